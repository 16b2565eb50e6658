//! Monte Carlo estimators of partial partition functions and bin sizes.
//!
//! Each estimator is a streaming fold over binned samples. Within an axis
//! bin every `f(x)` has the same phase `i^q`, so the phase is factored out
//! and the fold accumulates nonnegative reals in the log2 domain; the phase
//! is attached exactly when an estimate is read.
//!
//! | estimator        | samples                      | estimates                     |
//! |------------------|------------------------------|-------------------------------|
//! | `uniform_z`      | uniform on `X_b`             | `Z_b = |X_b| mean f`          |
//! | `ogata_tanemura` | `p_|f|` restricted to `X_b`  | `1/Z_b = mean(1/f) / |X_b|`   |
//! | `count_uniform`  | uniform on `X`               | `|X_b| = 2^N * fraction in b` |
//! | `count_absgibbs` | `p_|f|`                      | `|X+|, |X-|` via `Lambda/Gamma` |

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log2_add, Log2Sum};
use crate::sampler::BinnedSample;
use crate::value::{quarter_unit, PhaseBin};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    UniformZ,
    OgataTanemura,
    CountUniform,
    CountAbsgibbs,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 4] = [
        EstimatorId::UniformZ,
        EstimatorId::OgataTanemura,
        EstimatorId::CountUniform,
        EstimatorId::CountAbsgibbs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorId::UniformZ => "uniform_z",
            EstimatorId::OgataTanemura => "ogata_tanemura",
            EstimatorId::CountUniform => "count_uniform",
            EstimatorId::CountAbsgibbs => "count_absgibbs",
        }
    }

    /// Whether the estimate is a partition function (plotted per variable)
    /// rather than a bin size.
    pub fn estimates_z(&self) -> bool {
        matches!(self, EstimatorId::UniformZ | EstimatorId::OgataTanemura)
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown estimator {s:?} (expected one of uniform_z, ogata_tanemura, count_uniform, count_absgibbs)"
                ))
            })
    }
}

/// A signed/phased estimate `i^quarter * 2^log2_abs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub log2_abs: f64,
    pub quarter: u8,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate {
        log2_abs: f64::NEG_INFINITY,
        quarter: 0,
    };

    pub fn new(log2_abs: f64, quarter: u8) -> Self {
        Estimate {
            log2_abs,
            quarter: quarter & 3,
        }
    }

    pub fn positive(log2_abs: f64) -> Self {
        Self::new(log2_abs, 0)
    }

    pub fn to_complex(&self) -> Complex64 {
        quarter_unit(self.quarter) * self.log2_abs.exp2()
    }

    /// Real value for estimates in the plus or minus bins.
    pub fn to_real(&self) -> f64 {
        self.to_complex().re
    }

    pub fn recip(&self) -> Estimate {
        Estimate::new(-self.log2_abs, (4 - self.quarter) & 3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub k: u64,
    pub estimate: Estimate,
}

/// Running estimate of one quantity along one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorTrace {
    pub estimator: EstimatorId,
    /// Bin the quantity refers to; `None` for whole-space quantities.
    pub bin: Option<PhaseBin>,
    /// Short name of the traced quantity, e.g. `z`, `gamma`, `xi`, `lambda`.
    pub quantity: &'static str,
    pub chain_id: u64,
    pub points: Vec<TracePoint>,
}

impl EstimatorTrace {
    pub fn new(estimator: EstimatorId, bin: Option<PhaseBin>, quantity: &'static str, chain_id: u64) -> Self {
        EstimatorTrace {
            estimator,
            bin,
            quantity,
            chain_id,
            points: Vec::new(),
        }
    }

    pub fn final_estimate(&self) -> Estimate {
        self.points.last().map_or(Estimate::ZERO, |p| p.estimate)
    }

    pub fn final_k(&self) -> u64 {
        self.points.last().map_or(0, |p| p.k)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn record(&mut self, k: u64, estimate: Estimate) {
        self.points.push(TracePoint { k, estimate });
    }
}

/// Which sample indices `k` (1-based) are recorded in a trace: every
/// `stride`-th sample plus the last one, with `stride = ceil(K / max_points)`.
#[derive(Clone, Copy, Debug)]
pub struct TraceSchedule {
    stride: u64,
    total: u64,
}

impl TraceSchedule {
    pub fn new(total: u64, max_points: u64) -> Self {
        let max_points = max_points.max(1);
        TraceSchedule {
            stride: total.div_ceil(max_points).max(1),
            total,
        }
    }

    /// Records every sample.
    pub fn every(total: u64) -> Self {
        TraceSchedule { stride: 1, total }
    }

    pub fn records(&self, k: u64) -> bool {
        k.is_multiple_of(self.stride) || k == self.total
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// `log2` of a big integer, exact to `f64` precision for any size.
pub fn log2_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return (n.iter_u64_digits().next().unwrap_or(0) as f64).log2();
    }
    let shift = bits - 64;
    let top: BigUint = n >> shift;
    (top.iter_u64_digits().next().unwrap() as f64).log2() + shift as f64
}

fn expect_bin(sample: &BinnedSample, quarter: u8) -> Result<()> {
    if sample.bin != PhaseBin::Exact(quarter) {
        return Err(Error::Contract(format!(
            "sample in bin {} fed to an estimator for bin {}",
            sample.bin,
            PhaseBin::Exact(quarter)
        )));
    }
    Ok(())
}

fn axis_quarter(bin: PhaseBin) -> Result<u8> {
    bin.quarter().ok_or_else(|| {
        Error::UnsupportedEstimator(format!(
            "partition-function estimators work on axis bins only, got {bin}"
        ))
    })
}

/// `Z_b ~ |X_b| / k * sum f(x_j)` over uniform samples on `X_b`.
#[derive(Clone, Debug)]
pub struct UniformZFold {
    quarter: u8,
    log2_count: f64,
    sum: Log2Sum,
    k: u64,
}

impl UniformZFold {
    pub fn new(bin: PhaseBin, log2_count: f64) -> Result<Self> {
        Ok(UniformZFold {
            quarter: axis_quarter(bin)?,
            log2_count,
            sum: Log2Sum::default(),
            k: 0,
        })
    }

    pub fn push(&mut self, s: &BinnedSample) -> Result<()> {
        expect_bin(s, self.quarter)?;
        self.sum.add_log2(s.log2_abs);
        self.k += 1;
        Ok(())
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn estimate(&self) -> Estimate {
        if self.k == 0 {
            return Estimate::ZERO;
        }
        Estimate::new(
            self.log2_count + self.sum.log2() - (self.k as f64).log2(),
            self.quarter,
        )
    }
}

/// Ogata-Tanemura: `Gamma_b = 1 / (k |X_b|) * sum 1/f(x_j)` over samples
/// from `p_|f|` restricted to `X_b`; `E[Gamma_b] = 1 / Z_b`.
#[derive(Clone, Debug)]
pub struct OgataTanemuraFold {
    quarter: u8,
    log2_count: f64,
    inv_sum: Log2Sum,
    k: u64,
}

impl OgataTanemuraFold {
    pub fn new(bin: PhaseBin, log2_count: f64) -> Result<Self> {
        Ok(OgataTanemuraFold {
            quarter: axis_quarter(bin)?,
            log2_count,
            inv_sum: Log2Sum::default(),
            k: 0,
        })
    }

    pub fn push(&mut self, s: &BinnedSample) -> Result<()> {
        if s.bin == PhaseBin::Zero || s.log2_abs == f64::NEG_INFINITY {
            return Err(Error::Precondition(
                "f(x) = 0 in an Ogata-Tanemura sample; the kernel must have no zero entries".into(),
            ));
        }
        expect_bin(s, self.quarter)?;
        self.inv_sum.add_log2(-s.log2_abs);
        self.k += 1;
        Ok(())
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// `Gamma_b`, an unbiased estimate of `1 / Z_b`.
    pub fn gamma(&self) -> Estimate {
        if self.k == 0 {
            return Estimate::ZERO;
        }
        Estimate::new(
            self.inv_sum.log2() - (self.k as f64).log2() - self.log2_count,
            (4 - self.quarter) & 3,
        )
    }

    /// `1 / Gamma_b`, the reported partition-function estimate.
    pub fn z_estimate(&self) -> Estimate {
        if self.k == 0 {
            return Estimate::ZERO;
        }
        self.gamma().recip()
    }
}

/// Uniform counting: `xi_b = 2^N / k * #{j : x_j in b}`.
#[derive(Clone, Debug)]
pub struct CountFold {
    n: usize,
    counts: [u64; 4],
    zero: u64,
    off_axis: u64,
    k: u64,
}

impl CountFold {
    pub fn new(n: usize) -> Self {
        CountFold {
            n,
            counts: [0; 4],
            zero: 0,
            off_axis: 0,
            k: 0,
        }
    }

    pub fn push(&mut self, s: &BinnedSample) {
        match s.bin {
            PhaseBin::Exact(q) => self.counts[q as usize] += 1,
            PhaseBin::Zero => self.zero += 1,
            PhaseBin::General(_) => self.off_axis += 1,
        }
        self.k += 1;
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// Raw number of samples that landed in `bin` (off-axis bins are pooled).
    pub fn hits(&self, bin: PhaseBin) -> u64 {
        match bin {
            PhaseBin::Exact(q) => self.counts[q as usize],
            PhaseBin::Zero => self.zero,
            PhaseBin::General(_) => self.off_axis,
        }
    }

    pub fn xi(&self, bin: PhaseBin) -> Estimate {
        let hits = self.hits(bin);
        if self.k == 0 || hits == 0 {
            return Estimate::ZERO;
        }
        Estimate::positive(self.n as f64 + (hits as f64).log2() - (self.k as f64).log2())
    }
}

/// Sign-case counting from `p_|f|` samples:
/// `Lambda = mean 1/f`, `Gamma = mean 1/|f|`, and
/// `|X+| - |X-| ~ (Lambda / Gamma) 2^N`, `|X+| + |X-| = 2^N`.
#[derive(Clone, Debug)]
pub struct AbsGibbsCountFold {
    n: usize,
    inv_plus: Log2Sum,
    inv_minus: Log2Sum,
    k: u64,
}

impl AbsGibbsCountFold {
    pub fn new(n: usize) -> Self {
        AbsGibbsCountFold {
            n,
            inv_plus: Log2Sum::default(),
            inv_minus: Log2Sum::default(),
            k: 0,
        }
    }

    pub fn push(&mut self, s: &BinnedSample) -> Result<()> {
        match s.bin {
            PhaseBin::Exact(0) => self.inv_plus.add_log2(-s.log2_abs),
            PhaseBin::Exact(2) => self.inv_minus.add_log2(-s.log2_abs),
            PhaseBin::Zero => {
                return Err(Error::Precondition(
                    "f(x) = 0 encountered; counting from p_|f| assumes |X0| = 0".into(),
                ))
            }
            other => {
                return Err(Error::UnsupportedEstimator(format!(
                    "count_absgibbs handles real kernels only (sample in bin {other}); use count_uniform"
                )))
            }
        }
        self.k += 1;
        Ok(())
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// `Lambda`, with `E[Lambda] = (|X+| - |X-|) / Z_|f|`.
    pub fn lambda(&self) -> Estimate {
        if self.k == 0 {
            return Estimate::ZERO;
        }
        let (p, m) = (self.inv_plus.log2(), self.inv_minus.log2());
        let log2_k = (self.k as f64).log2();
        if p == m {
            return Estimate::ZERO;
        }
        let (hi, lo, quarter) = if p > m { (p, m, 0) } else { (m, p, 2) };
        let diff = hi + (-(lo - hi).exp2()).ln_1p() / std::f64::consts::LN_2;
        Estimate::new(diff - log2_k, quarter)
    }

    /// `Gamma`, with `E[Gamma] = 2^N / Z_|f|`.
    pub fn gamma(&self) -> Estimate {
        if self.k == 0 {
            return Estimate::ZERO;
        }
        Estimate::positive(log2_add(self.inv_plus.log2(), self.inv_minus.log2()) - (self.k as f64).log2())
    }

    /// `Lambda / Gamma`, in `[-1, 1]` by construction.
    pub fn ratio(&self) -> f64 {
        let (p, m) = (self.inv_plus.log2(), self.inv_minus.log2());
        match (p == f64::NEG_INFINITY, m == f64::NEG_INFINITY) {
            (true, true) => 0.0,
            (false, true) => 1.0,
            (true, false) => -1.0,
            _ => ((p - m) * std::f64::consts::LN_2 / 2.0).tanh(),
        }
    }

    /// `log2 |X+|` and `log2 |X-|` from the two-equation solve, clamped to
    /// `[0, 2^N]`.
    pub fn log2_counts(&self) -> (f64, f64) {
        let d = self.ratio().clamp(-1.0, 1.0);
        let n = self.n as f64;
        let plus = if d <= -1.0 { f64::NEG_INFINITY } else { n + ((1.0 + d) / 2.0).log2() };
        let minus = if d >= 1.0 { f64::NEG_INFINITY } else { n + ((1.0 - d) / 2.0).log2() };
        (plus, minus)
    }
}

/// Pulls `count` samples through `push`, recording `read` on the schedule.
fn run_fold<S, F>(
    samples: S,
    schedule: TraceSchedule,
    mut trace: EstimatorTrace,
    mut push: F,
    read: impl Fn() -> Estimate,
) -> Result<EstimatorTrace>
where
    S: IntoIterator<Item = Result<BinnedSample>>,
    F: FnMut(&BinnedSample) -> Result<()>,
{
    let mut k = 0;
    for s in samples.into_iter().take(schedule.total() as usize) {
        push(&s?)?;
        k += 1;
        if schedule.records(k) {
            trace.record(k, read());
        }
    }
    Ok(trace)
}

/// Uniform-sampling estimate of `Z_bin` from `K = schedule.total()` uniform
/// samples on `X_bin`.
pub fn estimate_z_uniform<S>(
    bin: PhaseBin,
    log2_bin_count: f64,
    samples: S,
    schedule: TraceSchedule,
    chain_id: u64,
) -> Result<EstimatorTrace>
where
    S: IntoIterator<Item = Result<BinnedSample>>,
{
    let fold = std::cell::RefCell::new(UniformZFold::new(bin, log2_bin_count)?);
    run_fold(
        samples,
        schedule,
        EstimatorTrace::new(EstimatorId::UniformZ, Some(bin), "z", chain_id),
        |s| fold.borrow_mut().push(s),
        || fold.borrow().estimate(),
    )
}

/// Ogata-Tanemura estimate of `Z_bin` (reported as `1 / Gamma_bin`) from
/// `K` samples of `p_|f|` restricted to `X_bin`.
pub fn estimate_z_ogata_tanemura<S>(
    bin: PhaseBin,
    log2_bin_count: f64,
    samples: S,
    schedule: TraceSchedule,
    chain_id: u64,
) -> Result<(EstimatorTrace, Estimate)>
where
    S: IntoIterator<Item = Result<BinnedSample>>,
{
    let fold = std::cell::RefCell::new(OgataTanemuraFold::new(bin, log2_bin_count)?);
    let trace = run_fold(
        samples,
        schedule,
        EstimatorTrace::new(EstimatorId::OgataTanemura, Some(bin), "z", chain_id),
        |s| fold.borrow_mut().push(s),
        || fold.borrow().z_estimate(),
    )?;
    let gamma = fold.borrow().gamma();
    Ok((trace, gamma))
}

/// Traces of `xi_b` for the four axis bins and the zero bin.
#[derive(Clone, Debug)]
pub struct CountTraces {
    pub traces: Vec<EstimatorTrace>,
    pub fold: CountFold,
}

impl CountTraces {
    pub fn trace(&self, bin: PhaseBin) -> Option<&EstimatorTrace> {
        self.traces.iter().find(|t| t.bin == Some(bin))
    }
}

pub const COUNT_BINS: [PhaseBin; 5] = [
    PhaseBin::PLUS,
    PhaseBin::PLUS_I,
    PhaseBin::MINUS,
    PhaseBin::MINUS_I,
    PhaseBin::Zero,
];

pub fn count_bins_uniform<S>(n: usize, samples: S, schedule: TraceSchedule, chain_id: u64) -> Result<CountTraces>
where
    S: IntoIterator<Item = BinnedSample>,
{
    let mut fold = CountFold::new(n);
    let mut traces: Vec<EstimatorTrace> = COUNT_BINS
        .iter()
        .map(|&b| EstimatorTrace::new(EstimatorId::CountUniform, Some(b), "xi", chain_id))
        .collect();
    let mut k = 0;
    for s in samples.into_iter().take(schedule.total() as usize) {
        fold.push(&s);
        k += 1;
        if schedule.records(k) {
            for (t, &b) in traces.iter_mut().zip(COUNT_BINS.iter()) {
                t.record(k, fold.xi(b));
            }
        }
    }
    Ok(CountTraces { traces, fold })
}

#[derive(Clone, Debug)]
pub struct AbsGibbsCounts {
    pub log2_plus: f64,
    pub log2_minus: f64,
    pub lambda: EstimatorTrace,
    pub gamma: EstimatorTrace,
    pub plus: EstimatorTrace,
    pub minus: EstimatorTrace,
    pub fold: AbsGibbsCountFold,
}

pub fn count_bins_absgibbs<S>(n: usize, samples: S, schedule: TraceSchedule, chain_id: u64) -> Result<AbsGibbsCounts>
where
    S: IntoIterator<Item = BinnedSample>,
{
    let id = EstimatorId::CountAbsgibbs;
    let mut fold = AbsGibbsCountFold::new(n);
    let mut lambda = EstimatorTrace::new(id, None, "lambda", chain_id);
    let mut gamma = EstimatorTrace::new(id, None, "gamma", chain_id);
    let mut plus = EstimatorTrace::new(id, Some(PhaseBin::PLUS), "count", chain_id);
    let mut minus = EstimatorTrace::new(id, Some(PhaseBin::MINUS), "count", chain_id);
    let mut k = 0;
    for s in samples.into_iter().take(schedule.total() as usize) {
        fold.push(&s)?;
        k += 1;
        if schedule.records(k) {
            let (p, m) = fold.log2_counts();
            lambda.record(k, fold.lambda());
            gamma.record(k, fold.gamma());
            plus.record(k, Estimate::positive(p));
            minus.record(k, Estimate::positive(m));
        }
    }
    let (log2_plus, log2_minus) = fold.log2_counts();
    Ok(AbsGibbsCounts {
        log2_plus,
        log2_minus,
        lambda,
        gamma,
        plus,
        minus,
        fold,
    })
}

/// One bin's contribution to `Z_f`: value `i^quarter * 2^log2_abs` with
/// standard error `rel_stderr * 2^log2_abs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinEstimate {
    pub quarter: u8,
    pub log2_abs: f64,
    pub rel_stderr: f64,
}

impl BinEstimate {
    pub fn exact(quarter: u8, log2_abs: f64) -> Self {
        BinEstimate {
            quarter,
            log2_abs,
            rel_stderr: 0.0,
        }
    }

    /// Mean and standard error across chains of per-chain finals.
    pub fn from_chains(quarter: u8, finals: &[Estimate]) -> Result<Self> {
        if finals.is_empty() {
            return Err(Error::Incomplete("no chain estimates for bin".into()));
        }
        let top = finals.iter().map(|e| e.log2_abs).fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Ok(BinEstimate::exact(quarter, top));
        }
        let rel: Vec<f64> = finals.iter().map(|e| (e.log2_abs - top).exp2()).collect();
        let (mean, se) = crate::numeric::mean_and_stderr(&rel);
        Ok(BinEstimate {
            quarter,
            log2_abs: top + mean.log2(),
            rel_stderr: se / mean,
        })
    }
}

/// `Z_f` assembled from per-bin estimates.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AssembledZ {
    /// All values below are relative to `2^log2_scale`.
    pub log2_scale: f64,
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
    /// `sum_b |Z_b|` relative to the scale.
    pub abs_total: f64,
    /// Set when `|Z_f| < 0.01 sum_b |Z_b|`: the bins cancel and `Z_f` is
    /// poorly determined by their difference.
    pub cancellation: bool,
}

impl AssembledZ {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im) * self.log2_scale.exp2()
    }

    pub fn stderr_abs(&self) -> f64 {
        self.stderr * self.log2_scale.exp2()
    }
}

pub const CANCELLATION_THRESHOLD: f64 = 0.01;

/// `Z_f = sum_b Z_b`, with standard errors added in quadrature. Every bin in
/// `nonempty` must have an estimate.
pub fn assemble_zf(nonempty: &[PhaseBin], estimates: &[BinEstimate]) -> Result<AssembledZ> {
    for bin in nonempty {
        let q = axis_quarter(*bin)?;
        if !estimates.iter().any(|e| e.quarter == q) {
            return Err(Error::Incomplete(format!("no estimate for nonempty bin {bin}")));
        }
    }
    let scale = estimates
        .iter()
        .map(|e| e.log2_abs)
        .fold(f64::NEG_INFINITY, f64::max);
    if scale == f64::NEG_INFINITY {
        return Ok(AssembledZ {
            log2_scale: 0.0,
            re: 0.0,
            im: 0.0,
            stderr: 0.0,
            abs_total: 0.0,
            cancellation: false,
        });
    }
    let mut z = Complex64::new(0.0, 0.0);
    let mut var = 0.0;
    let mut abs_total = 0.0;
    for e in estimates {
        let mag = (e.log2_abs - scale).exp2();
        z += quarter_unit(e.quarter) * mag;
        var += (e.rel_stderr * mag).powi(2);
        abs_total += mag;
    }
    Ok(AssembledZ {
        log2_scale: scale,
        re: z.re,
        im: z.im,
        stderr: var.sqrt(),
        abs_total,
        cancellation: z.norm() < CANCELLATION_THRESHOLD * abs_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridModel;
    use crate::kernel::PairwiseKernel;
    use crate::sampler::{SamplerConfig, UniformSampler};

    fn const_model() -> GridModel {
        GridModel::new(1, 2, PairwiseKernel::constant(3.0)).unwrap()
    }

    #[test]
    fn uniform_z_on_constant_function_is_exact() {
        let g = const_model();
        let samples = UniformSampler::new(&g, &SamplerConfig::with_seed(1, 0)).map(Ok);
        let t = estimate_z_uniform(PhaseBin::PLUS, 2.0, samples, TraceSchedule::every(25), 0).unwrap();
        assert_eq!(t.len(), 25);
        for p in &t.points {
            assert!((p.estimate.to_real() - 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ogata_tanemura_on_constant_function_is_exact() {
        let g = const_model();
        let samples = UniformSampler::new(&g, &SamplerConfig::with_seed(1, 0)).map(Ok);
        let (t, gamma) =
            estimate_z_ogata_tanemura(PhaseBin::PLUS, 2.0, samples, TraceSchedule::every(10), 0).unwrap();
        assert!((gamma.to_real() - 1.0 / 12.0).abs() < 1e-15);
        assert!((t.final_estimate().to_real() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_bin_is_a_contract_violation() {
        let g = GridModel::square(3, PairwiseKernel::neg13()).unwrap();
        let samples = UniformSampler::new(&g, &SamplerConfig::with_seed(4, 0)).map(Ok);
        let err = estimate_z_uniform(PhaseBin::PLUS, 8.0, samples, TraceSchedule::every(100), 0).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn general_bins_are_unsupported_for_z() {
        assert!(matches!(
            UniformZFold::new(PhaseBin::General(0.3), 1.0),
            Err(Error::UnsupportedEstimator(_))
        ));
    }

    #[test]
    fn phase_is_attached_exactly() {
        let g = GridModel::square(3, PairwiseKernel::cplx15i()).unwrap();
        let mut fold = UniformZFold::new(PhaseBin::MINUS_I, 0.0).unwrap();
        for s in UniformSampler::new(&g, &SamplerConfig::with_seed(2, 0))
            .filter(|s| s.bin == PhaseBin::MINUS_I)
            .take(10)
        {
            fold.push(&s).unwrap();
        }
        let z = fold.estimate().to_complex();
        assert_eq!(z.re, 0.0);
        assert!(z.im < 0.0);
    }

    #[test]
    fn counts_partition_every_prefix() {
        let g = GridModel::square(3, PairwiseKernel::cplx15i()).unwrap();
        let samples = UniformSampler::new(&g, &SamplerConfig::with_seed(9, 0));
        let ct = count_bins_uniform(9, samples, TraceSchedule::every(300), 0).unwrap();
        for k in 0..300 {
            let total: f64 = ct.traces.iter().map(|t| t.points[k].estimate.log2_abs.exp2()).sum();
            assert!((total - 512.0).abs() < 1e-9, "prefix {k}: {total}");
        }
    }

    #[test]
    fn all_positive_kernel_counts_everything_as_plus() {
        let g = GridModel::square(3, PairwiseKernel::constant(1.7)).unwrap();
        let samples = || UniformSampler::new(&g, &SamplerConfig::with_seed(2, 0));
        let ct = count_bins_uniform(9, samples(), TraceSchedule::every(50), 0).unwrap();
        assert_eq!(ct.fold.xi(PhaseBin::PLUS).log2_abs, 9.0);
        assert_eq!(ct.fold.xi(PhaseBin::MINUS), Estimate::ZERO);

        let ag = count_bins_absgibbs(9, samples(), TraceSchedule::every(50), 0).unwrap();
        assert_eq!(ag.log2_plus, 9.0);
        assert_eq!(ag.log2_minus, f64::NEG_INFINITY);
        assert_eq!(ag.fold.lambda(), ag.fold.gamma());
    }

    #[test]
    fn absgibbs_rejects_complex_kernels() {
        let g = GridModel::square(3, PairwiseKernel::cplx15i()).unwrap();
        let samples = UniformSampler::new(&g, &SamplerConfig::with_seed(2, 0));
        let err = count_bins_absgibbs(9, samples, TraceSchedule::every(200), 0).unwrap_err();
        assert!(matches!(err, Error::UnsupportedEstimator(_)));
    }

    #[test]
    fn lambda_gamma_solve() {
        let mut fold = AbsGibbsCountFold::new(4);
        let g = GridModel::new(1, 2, PairwiseKernel::from_real([[1.0, -1.0], [-1.0, 1.0]])).unwrap();
        for idx in 0..4 {
            fold.push(&BinnedSample::new(&g, g.assignment_from_index(idx))).unwrap();
        }
        // Two plus and two minus samples of magnitude 1: ratio 0.
        assert_eq!(fold.ratio(), 0.0);
        assert_eq!(fold.lambda(), Estimate::ZERO);
        let (p, m) = fold.log2_counts();
        assert!((p - 3.0).abs() < 1e-12 && (m - 3.0).abs() < 1e-12);
    }

    #[test]
    fn schedule_records_last_sample() {
        let s = TraceSchedule::new(1005, 100);
        let recorded: Vec<u64> = (1..=1005).filter(|&k| s.records(k)).collect();
        assert!(recorded.len() <= 101 && recorded.len() >= 90);
        assert_eq!(*recorded.last().unwrap(), 1005);
        assert!(TraceSchedule::new(1, 1000).records(1));
    }

    #[test]
    fn log2_of_big_integers() {
        let two_143 = BigUint::from(1u32) << 143;
        assert_eq!(log2_biguint(&two_143), 143.0);
        assert_eq!(log2_biguint(&BigUint::from(256u32)), 8.0);
        assert_eq!(log2_biguint(&BigUint::from(0u32)), f64::NEG_INFINITY);
    }

    #[test]
    fn assembly_flags_cancellation_and_missing_bins() {
        let plus = BinEstimate::exact(0, 8.0);
        let minus = BinEstimate::exact(2, 8.0);
        let z = assemble_zf(&[PhaseBin::PLUS, PhaseBin::MINUS], &[plus, minus]).unwrap();
        assert!(z.cancellation);
        assert_eq!(z.value().norm(), 0.0);
        assert!(matches!(
            assemble_zf(&[PhaseBin::PLUS, PhaseBin::MINUS], &[plus]),
            Err(Error::Incomplete(_))
        ));
        let z = assemble_zf(&[PhaseBin::PLUS], &[plus]).unwrap();
        assert!(!z.cancellation);
        assert!((z.value().re - 256.0).abs() < 1e-12);
    }

    #[test]
    fn chain_mean_in_log_domain() {
        let finals = [Estimate::positive(10.0), Estimate::positive(11.0)];
        let b = BinEstimate::from_chains(0, &finals).unwrap();
        assert!((b.log2_abs - 1536f64.log2()).abs() < 1e-12);
        assert!((b.rel_stderr - 512.0 / 1536.0).abs() < 1e-12);
    }
}
