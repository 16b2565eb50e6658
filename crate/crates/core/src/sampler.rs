//! Seeded generators of assignments.
//!
//! Every chain owns a ChaCha8 generator seeded from the run seed, with the
//! chain id selecting the ChaCha stream (`set_stream`). Auxiliary stages of a
//! chain (the counting stage that feeds an estimated bin size into a
//! Z estimator) use stream `chain_id + AUX_STREAM_OFFSET`. Streams are
//! disjoint 2^64-block sequences, so chains never overlap.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Assignment, GridModel};
use crate::value::{classify_phase, ComplexValue, PhaseBin};

pub const AUX_STREAM_OFFSET: u64 = 1 << 32;

pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    SingleSite,
    #[default]
    RowBlocked,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::SingleSite => "single-site",
            Scheme::RowBlocked => "row-blocked",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            Scheme::SingleSite => 0,
            Scheme::RowBlocked => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Scheme> {
        match code {
            0 => Some(Scheme::SingleSite),
            1 => Some(Scheme::RowBlocked),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-site" | "single" => Ok(Scheme::SingleSite),
            "row-blocked" | "row" => Ok(Scheme::RowBlocked),
            _ => Err(Error::Config(format!(
                "unknown sampling scheme {s:?} (expected single-site or row-blocked)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub chain_id: u64,
    /// Gibbs sweeps discarded before the first retained sample.
    pub burn_in: u32,
    /// Gibbs sweeps per retained sample.
    pub thinning: u32,
    pub scheme: Scheme,
    /// Consecutive rejected uniform draws tolerated before a bin is declared
    /// (probably) empty.
    pub max_draws_per_accept: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            chain_id: 0,
            burn_in: 100,
            thinning: 1,
            scheme: Scheme::RowBlocked,
            max_draws_per_accept: 10_000_000,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64, chain_id: u64) -> Self {
        SamplerConfig {
            seed,
            chain_id,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if self.max_draws_per_accept == 0 {
            return Err(Error::Config("rejection budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinnedSample {
    pub x: Assignment,
    pub value: ComplexValue,
    pub bin: PhaseBin,
    /// `log2 |f(x)|`, exact even where `value` would overflow.
    pub log2_abs: f64,
}

impl BinnedSample {
    pub fn new(model: &GridModel, x: Assignment) -> Self {
        let t = model.tally_unchecked(&x);
        let value = model.value_from_tally(&t);
        let log2_abs = model.log2_abs_from_tally(&t);
        BinnedSample {
            bin: classify_phase(&value),
            x,
            value,
            log2_abs,
        }
    }
}

/// Independent uniform assignments: every bit an independent fair coin.
pub struct UniformSampler<'a> {
    model: &'a GridModel,
    rng: ChaCha8Rng,
    mask: u64,
}

impl<'a> UniformSampler<'a> {
    pub fn new(model: &'a GridModel, cfg: &SamplerConfig) -> Self {
        Self::with_stream(model, cfg.seed, cfg.chain_id)
    }

    pub fn with_stream(model: &'a GridModel, seed: u64, stream: u64) -> Self {
        let cols = model.cols();
        UniformSampler {
            model,
            rng: chain_rng(seed, stream),
            mask: if cols == 64 { u64::MAX } else { (1 << cols) - 1 },
        }
    }

    pub fn draw_assignment(&mut self) -> Assignment {
        let words = (0..self.model.rows())
            .map(|_| self.rng.next_u64() & self.mask)
            .collect();
        Assignment::from_row_words(words, self.model.cols())
    }
}

impl Iterator for UniformSampler<'_> {
    type Item = BinnedSample;

    fn next(&mut self) -> Option<BinnedSample> {
        let x = self.draw_assignment();
        Some(BinnedSample::new(self.model, x))
    }
}

/// `count` uniform samples from `X`.
pub fn uniform_sample(model: &GridModel, cfg: &SamplerConfig, count: usize) -> Vec<BinnedSample> {
    UniformSampler::new(model, cfg).take(count).collect()
}

/// Uniform samples on a single phase bin, by rejection from uniform samples
/// on all of `X`.
pub struct RejectionSampler<'a> {
    inner: UniformSampler<'a>,
    target: PhaseBin,
    max_draws_per_accept: u64,
    draws: u64,
    accepted: u64,
}

impl<'a> RejectionSampler<'a> {
    pub fn new(model: &'a GridModel, cfg: &SamplerConfig, target: PhaseBin) -> Result<Self> {
        cfg.validate()?;
        Ok(RejectionSampler {
            inner: UniformSampler::new(model, cfg),
            target,
            max_draws_per_accept: cfg.max_draws_per_accept,
            draws: 0,
            accepted: 0,
        })
    }

    pub fn next_accepted(&mut self) -> Result<BinnedSample> {
        let mut misses = 0u64;
        loop {
            let s = self.inner.next().expect("uniform sampler is infinite");
            self.draws += 1;
            if s.bin == self.target {
                self.accepted += 1;
                return Ok(s);
            }
            misses += 1;
            if misses >= self.max_draws_per_accept {
                return Err(Error::EmptyBinSuspected {
                    bin: self.target.name(),
                    draws: misses,
                });
            }
        }
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.draws == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.draws as f64
        }
    }

    pub fn rejection_rate(&self) -> f64 {
        1.0 - self.acceptance_rate()
    }
}

impl Iterator for RejectionSampler<'_> {
    type Item = Result<BinnedSample>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_accepted())
    }
}

/// `count` uniform samples on `target`, together with the rejection rate.
pub fn uniform_bin_sample(
    model: &GridModel,
    cfg: &SamplerConfig,
    target: PhaseBin,
    count: usize,
) -> Result<(Vec<BinnedSample>, f64)> {
    let mut sampler = RejectionSampler::new(model, cfg, target)?;
    let samples = (0..count)
        .map(|_| sampler.next_accepted())
        .collect::<Result<Vec<_>>>()?;
    Ok((samples, sampler.rejection_rate()))
}

/// Gibbs sampler targeting `p_|f|(x) = |f(x)| / Z_|f|`.
///
/// A sweep visits sites (single-site) or rows (row-blocked) in raster order.
/// Row-blocked sweeps draw a whole row from its exact conditional given the
/// rows above and below: the row is a chain of binary variables with
/// horizontal `|kappa|` couplings and vertical `|kappa|` evidence, sampled by
/// forward filtering and backward sampling.
pub struct GibbsSampler<'a> {
    model: &'a GridModel,
    rng: ChaCha8Rng,
    x: Assignment,
    scheme: Scheme,
    burn_in: u32,
    thinning: u32,
    burned_in: bool,
    alpha: Vec<[f64; 2]>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(model: &'a GridModel, cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        if model.kernel().has_zero_entry() {
            return Err(Error::Precondition(
                "Gibbs sampling from p_|f| needs a kernel without zero entries".into(),
            ));
        }
        let mut rng = chain_rng(cfg.seed, cfg.chain_id);
        let cols = model.cols();
        let mask = if cols == 64 { u64::MAX } else { (1 << cols) - 1 };
        let words = (0..model.rows()).map(|_| rng.next_u64() & mask).collect();
        Ok(GibbsSampler {
            model,
            rng,
            x: Assignment::from_row_words(words, cols),
            scheme: cfg.scheme,
            burn_in: cfg.burn_in,
            thinning: cfg.thinning,
            burned_in: false,
            alpha: vec![[0.0; 2]; cols],
        })
    }

    pub fn state(&self) -> &Assignment {
        &self.x
    }

    pub fn set_state(&mut self, x: Assignment) -> Result<()> {
        if x.len() != self.model.n() || x.cols() != self.model.cols() {
            return Err(Error::Dimension {
                expected: self.model.n(),
                got: x.len(),
            });
        }
        self.x = x;
        Ok(())
    }

    /// Unnormalized conditional weights of `x_v = 0` and `x_v = 1` given
    /// the rest of `x`.
    pub fn site_conditional(model: &GridModel, x: &Assignment, v: usize) -> [f64; 2] {
        let cols = model.cols();
        let (r, c) = (v / cols, v % cols);
        let abs = model.abs_table();
        let mut w = [1.0, 1.0];
        for (b, wb) in w.iter_mut().enumerate() {
            if c > 0 {
                *wb *= abs[x.get_rc(r, c - 1) as usize][b];
            }
            if c + 1 < cols {
                *wb *= abs[b][x.get_rc(r, c + 1) as usize];
            }
            if r > 0 {
                *wb *= abs[x.get_rc(r - 1, c) as usize][b];
            }
            if r + 1 < model.rows() {
                *wb *= abs[b][x.get_rc(r + 1, c) as usize];
            }
        }
        w
    }

    pub fn update_site(&mut self, v: usize) {
        let w = Self::site_conditional(self.model, &self.x, v);
        let p1 = w[1] / (w[0] + w[1]);
        let bit = self.rng.gen::<f64>() < p1;
        self.x.set(v, bit);
    }

    /// Redraws row `r` from its exact conditional distribution.
    pub fn resample_row(&mut self, r: usize) {
        let model = self.model;
        let cols = model.cols();
        let rows = model.rows();
        let abs = model.abs_table();
        let evidence = |c: usize, b: usize, x: &Assignment| {
            let mut e = 1.0;
            if r > 0 {
                e *= abs[x.get_rc(r - 1, c) as usize][b];
            }
            if r + 1 < rows {
                e *= abs[b][x.get_rc(r + 1, c) as usize];
            }
            e
        };
        // Forward filter, normalized per column.
        for c in 0..cols {
            let mut a = [0.0; 2];
            for (b, ab) in a.iter_mut().enumerate() {
                let prior = if c == 0 {
                    1.0
                } else {
                    self.alpha[c - 1][0] * abs[0][b] + self.alpha[c - 1][1] * abs[1][b]
                };
                *ab = prior * evidence(c, b, &self.x);
            }
            let z = a[0] + a[1];
            self.alpha[c] = [a[0] / z, a[1] / z];
        }
        // Backward sample.
        let mut word = 0u64;
        let last = self.alpha[cols - 1];
        let mut next = (self.rng.gen::<f64>() * (last[0] + last[1]) >= last[0]) as usize;
        word |= (next as u64) << (cols - 1);
        for c in (0..cols - 1).rev() {
            let w0 = self.alpha[c][0] * abs[0][next];
            let w1 = self.alpha[c][1] * abs[1][next];
            next = (self.rng.gen::<f64>() * (w0 + w1) >= w0) as usize;
            word |= (next as u64) << c;
        }
        self.x.row_words_mut()[r] = word;
    }

    pub fn sweep(&mut self) {
        match self.scheme {
            Scheme::SingleSite => {
                for v in 0..self.model.n() {
                    self.update_site(v);
                }
            }
            Scheme::RowBlocked => {
                for r in 0..self.model.rows() {
                    self.resample_row(r);
                }
            }
        }
    }

    /// Next retained sample: burn-in on first call, then `thinning` sweeps.
    pub fn next_sample(&mut self) -> BinnedSample {
        if !self.burned_in {
            for _ in 0..self.burn_in {
                self.sweep();
            }
            self.burned_in = true;
        }
        for _ in 0..self.thinning {
            self.sweep();
        }
        BinnedSample::new(self.model, self.x.clone())
    }
}

impl Iterator for GibbsSampler<'_> {
    type Item = BinnedSample;

    fn next(&mut self) -> Option<BinnedSample> {
        Some(self.next_sample())
    }
}

/// `count` retained samples from `p_|f|`.
pub fn gibbs_sample_abs(model: &GridModel, cfg: &SamplerConfig, count: usize) -> Result<Vec<BinnedSample>> {
    Ok(GibbsSampler::new(model, cfg)?.take(count).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::PairwiseKernel;

    fn model(m: usize, preset: &str) -> GridModel {
        GridModel::square(m, PairwiseKernel::preset(preset).unwrap()).unwrap()
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let g = model(3, "neg13");
        let a = uniform_sample(&g, &SamplerConfig::with_seed(7, 1), 50);
        let b = uniform_sample(&g, &SamplerConfig::with_seed(7, 1), 50);
        let c = uniform_sample(&g, &SamplerConfig::with_seed(7, 2), 50);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn samples_carry_their_value_and_bin() {
        let g = model(3, "cplx15i");
        for s in uniform_sample(&g, &SamplerConfig::with_seed(3, 0), 100) {
            assert_eq!(s.value, g.evaluate_f(&s.x).unwrap());
            assert_eq!(s.bin, classify_phase(&s.value));
        }
    }

    #[test]
    fn positive_kernel_bins_everything_to_plus() {
        let g = model(3, "const(2)");
        assert!(uniform_sample(&g, &SamplerConfig::with_seed(1, 0), 200)
            .iter()
            .all(|s| s.bin == PhaseBin::PLUS));
    }

    #[test]
    fn rejection_reports_empty_bins() {
        let g = model(2, "ones");
        let cfg = SamplerConfig {
            max_draws_per_accept: 1000,
            ..SamplerConfig::with_seed(1, 0)
        };
        let err = uniform_bin_sample(&g, &cfg, PhaseBin::MINUS, 1).unwrap_err();
        assert!(matches!(err, Error::EmptyBinSuspected { draws: 1000, .. }));
    }

    #[test]
    fn gibbs_rejects_zero_entries() {
        let k = PairwiseKernel::from_real([[1.0, 0.0], [1.0, 1.0]]);
        let g = GridModel::square(2, k).unwrap();
        assert!(matches!(
            GibbsSampler::new(&g, &SamplerConfig::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn thinning_zero_is_rejected() {
        let g = model(2, "neg13");
        let cfg = SamplerConfig {
            thinning: 0,
            ..Default::default()
        };
        assert!(GibbsSampler::new(&g, &cfg).is_err());
    }

    /// For each single-site update P_v: p(x) P_v(x -> y) = p(y) P_v(y -> x).
    #[test]
    fn single_site_update_satisfies_detailed_balance() {
        let k = PairwiseKernel::from_real([[1.3, -0.4], [-2.0, 0.7]]);
        let g = GridModel::new(1, 2, k).unwrap();
        let states: Vec<Assignment> = (0..4).map(|i| g.assignment_from_index(i)).collect();
        let p: Vec<f64> = states.iter().map(|x| g.abs_f(x).unwrap()).collect();
        for v in 0..2 {
            let transition = |from: usize, to: usize| -> f64 {
                // Update at v only changes bit v.
                if (from ^ to) & !(1 << v) != 0 {
                    return 0.0;
                }
                let w = GibbsSampler::site_conditional(&g, &states[from], v);
                w[(to >> v) & 1] / (w[0] + w[1])
            };
            for a in 0..4 {
                for b in 0..4 {
                    let lhs = p[a] * transition(a, b);
                    let rhs = p[b] * transition(b, a);
                    assert!((lhs - rhs).abs() < 1e-14, "v={v} a={a} b={b}");
                }
            }
        }
    }
}
