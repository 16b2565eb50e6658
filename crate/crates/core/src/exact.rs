//! Exact partition quantities, per phase bin.
//!
//! Two independent engines:
//!
//! * [`brute_force_summary`] enumerates all `2^N` assignments.
//! * [`transfer_matrix_summary`] contracts the grid one site at a time. Its
//!   state is the current row profile together with the running phase of the
//!   product, taken mod 4. Because the phase of every factor is a quarter
//!   turn, the phase of `f(x)` lives in the finite group Z4 and can ride along
//!   in the state; summing the terminal states of phase `k` then yields the
//!   partial partition function of bin `k` exactly. A parallel 0/1 accumulator
//!   over the same transitions counts the assignments in each bin.

use std::fmt;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridModel;
use crate::numeric::CompensatedSum;
use crate::value::{classify_phase, quarter_name, quarter_unit, PhaseBin};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Brute,
    Transfer,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Brute => "brute",
            Method::Transfer => "transfer",
        })
    }
}

/// Size limits for the exact engines.
#[derive(Clone, Copy, Debug)]
pub struct ExactCaps {
    pub brute_max_n: usize,
    pub transfer_max_cols: usize,
}

impl Default for ExactCaps {
    fn default() -> Self {
        ExactCaps {
            brute_max_n: 24,
            transfer_max_cols: 14,
        }
    }
}

/// Total of one axis bin: `Z_b = i^b * 2^log2_abs` and `|X_b| = count`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinTotal {
    pub count: BigUint,
    /// `log2 |Z_b|`, `-inf` for an empty bin.
    pub log2_abs: f64,
}

impl BinTotal {
    fn empty() -> Self {
        BinTotal {
            count: BigUint::zero(),
            log2_abs: f64::NEG_INFINITY,
        }
    }
}

/// Assignments whose value is off the axes (only possible for general
/// kernels, and only reported by brute force).
#[derive(Clone, Debug, PartialEq)]
pub struct OffAxisTotal {
    pub count: BigUint,
    pub sum: Complex64,
    pub abs_sum: f64,
}

#[derive(Clone, Debug)]
pub struct PartitionSummary {
    pub rows: usize,
    pub cols: usize,
    pub method: Method,
    /// Indexed by quarter turn: plus, plus_i, minus, minus_i.
    pub bins: [BinTotal; 4],
    pub zero_count: BigUint,
    pub off_axis: Option<OffAxisTotal>,
}

impl PartitionSummary {
    pub fn n(&self) -> usize {
        self.rows * self.cols
    }

    pub fn bin(&self, quarter: u8) -> &BinTotal {
        &self.bins[(quarter & 3) as usize]
    }

    pub fn count(&self, quarter: u8) -> &BigUint {
        &self.bin(quarter).count
    }

    pub fn log2_abs_bin(&self, quarter: u8) -> f64 {
        self.bin(quarter).log2_abs
    }

    /// `Z_b` in rectangular form.
    pub fn z_bin(&self, quarter: u8) -> Complex64 {
        quarter_unit(quarter) * self.log2_abs_bin(quarter).exp2()
    }

    pub fn z_plus(&self) -> f64 {
        self.log2_abs_bin(0).exp2()
    }

    pub fn z_minus(&self) -> f64 {
        -self.log2_abs_bin(2).exp2()
    }

    /// `log2 Z_|f|`.
    pub fn log2_z_abs(&self) -> f64 {
        let mut terms: Vec<f64> = self.bins.iter().map(|b| b.log2_abs).collect();
        if let Some(off) = &self.off_axis {
            terms.push(off.abs_sum.log2());
        }
        let hi = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi == f64::NEG_INFINITY {
            return hi;
        }
        hi + terms.iter().map(|t| (t - hi).exp2()).sum::<f64>().log2()
    }

    pub fn z_abs(&self) -> f64 {
        self.log2_z_abs().exp2()
    }

    /// `Z_f / Z_|f|`, computed without overflow.
    pub fn z_f_relative(&self) -> Complex64 {
        let scale = self.log2_z_abs();
        if scale == f64::NEG_INFINITY {
            return Complex64::zero();
        }
        let mut acc = Complex64::zero();
        for q in 0..4u8 {
            acc += quarter_unit(q) * (self.log2_abs_bin(q) - scale).exp2();
        }
        if let Some(off) = &self.off_axis {
            acc += off.sum / scale.exp2();
        }
        acc
    }

    /// `Z_f`, the sum of all bins with their phases.
    pub fn z_f(&self) -> Complex64 {
        self.z_f_relative() * self.z_abs()
    }

    /// `|Z_f| / Z_|f|`; small values signal cancellation between bins.
    pub fn cancellation_ratio(&self) -> f64 {
        self.z_f_relative().norm()
    }

    /// Bins in quarter-turn order that contain at least one assignment.
    pub fn nonempty_bins(&self) -> Vec<PhaseBin> {
        (0..4u8)
            .filter(|&q| !self.count(q).is_zero())
            .map(PhaseBin::Exact)
            .collect()
    }

    pub fn total_count(&self) -> BigUint {
        let mut total = self.zero_count.clone();
        for b in &self.bins {
            total += &b.count;
        }
        if let Some(off) = &self.off_axis {
            total += &off.count;
        }
        total
    }

    /// Checks that the bins partition `{0,1}^N` and that plus/minus totals
    /// have the right signs.
    pub fn check_invariants(&self) -> Result<(), String> {
        let expected = BigUint::one() << self.n();
        let total = self.total_count();
        if total != expected {
            return Err(format!("bin counts sum to {total}, expected 2^{}", self.n()));
        }
        for (q, b) in self.bins.iter().enumerate() {
            if b.count.is_zero() != (b.log2_abs == f64::NEG_INFINITY) {
                return Err(format!("bin {} has count {} but log2|Z| {}", quarter_name(q as u8), b.count, b.log2_abs));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> SummaryJson {
        let bin = |q: u8| {
            let b = self.bin(q);
            let z = self.z_bin(q);
            BinJson {
                count: b.count.to_string(),
                sum: [z.re, z.im],
                log2_abs: finite_or_none(b.log2_abs),
                log2_abs_per_n: finite_or_none(b.log2_abs / self.n() as f64),
            }
        };
        let z_f = self.z_f();
        SummaryJson {
            method: self.method,
            rows: self.rows,
            cols: self.cols,
            n: self.n(),
            bins: BinsJson {
                plus: bin(0),
                minus: bin(2),
                plus_i: bin(1),
                minus_i: bin(3),
            },
            zero_count: self.zero_count.to_string(),
            off_axis: self.off_axis.as_ref().map(|o| OffAxisJson {
                count: o.count.to_string(),
                sum: [o.sum.re, o.sum.im],
                abs_sum: o.abs_sum,
            }),
            z_f: [z_f.re, z_f.im],
            z_abs: self.z_abs(),
            log2_z_abs: finite_or_none(self.log2_z_abs()),
            cancellation_ratio: self.cancellation_ratio(),
        }
    }
}

fn finite_or_none(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryJson {
    pub method: Method,
    pub rows: usize,
    pub cols: usize,
    pub n: usize,
    pub bins: BinsJson,
    pub zero_count: String,
    pub off_axis: Option<OffAxisJson>,
    pub z_f: [f64; 2],
    pub z_abs: f64,
    pub log2_z_abs: Option<f64>,
    pub cancellation_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BinsJson {
    pub plus: BinJson,
    pub minus: BinJson,
    pub plus_i: BinJson,
    pub minus_i: BinJson,
}

#[derive(Clone, Debug, Serialize)]
pub struct BinJson {
    pub count: String,
    pub sum: [f64; 2],
    pub log2_abs: Option<f64>,
    pub log2_abs_per_n: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OffAxisJson {
    pub count: String,
    pub sum: [f64; 2],
    pub abs_sum: f64,
}

#[derive(Clone, Default)]
struct BruteChunk {
    counts: [u64; 4],
    sums: [CompensatedSum; 4],
    zero: u64,
    off_count: u64,
    off_re: CompensatedSum,
    off_im: CompensatedSum,
    off_abs: CompensatedSum,
}

impl BruteChunk {
    fn merge(&mut self, o: &BruteChunk) {
        for q in 0..4 {
            self.counts[q] += o.counts[q];
            self.sums[q].merge(&o.sums[q]);
        }
        self.zero += o.zero;
        self.off_count += o.off_count;
        self.off_re.merge(&o.off_re);
        self.off_im.merge(&o.off_im);
        self.off_abs.merge(&o.off_abs);
    }
}

/// Enumerates all `2^N` assignments. Sums are accumulated with compensated
/// summation relative to `2^offset`, where `offset` bounds `log2 |f|` from
/// above, so no term overflows.
pub fn brute_force_summary(model: &GridModel, caps: &ExactCaps) -> Result<PartitionSummary> {
    let n = model.n();
    if n > caps.brute_max_n {
        return Err(Error::ResourceCap {
            what: "variable count for brute-force enumeration",
            value: n,
            cap: caps.brute_max_n,
        });
    }
    // Enumeration indices are u64.
    if n > 40 {
        return Err(Error::ResourceCap {
            what: "variable count for brute-force enumeration",
            value: n,
            cap: 40,
        });
    }
    let max_log2 = model
        .abs_table()
        .iter()
        .flatten()
        .filter(|v| **v > 0.0)
        .map(|v| v.log2())
        .fold(f64::NEG_INFINITY, f64::max);
    let offset = if max_log2.is_finite() {
        max_log2 * model.edge_count() as f64
    } else {
        0.0
    };
    let total: u64 = 1 << n;
    let chunk_bits = n.min(8);
    let chunks: u64 = 1 << chunk_bits;
    let per_chunk = total / chunks;
    let axis = model.quarter_table().is_some();

    let parts: Vec<BruteChunk> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut acc = BruteChunk::default();
            let start = chunk * per_chunk;
            for idx in start..start + per_chunk {
                let x = model.assignment_from_index(idx as u128);
                let t = model.tally_unchecked(&x);
                if axis {
                    let v = model.value_from_tally(&t);
                    if v.is_zero() {
                        acc.zero += 1;
                        continue;
                    }
                    let q = v.quarter().unwrap() as usize;
                    acc.counts[q] += 1;
                    acc.sums[q].add((model.log2_abs_from_tally(&t) - offset).exp2());
                } else {
                    let v = model.value_from_tally(&t);
                    match classify_phase(&v) {
                        PhaseBin::Zero => acc.zero += 1,
                        PhaseBin::Exact(q) => {
                            acc.counts[q as usize] += 1;
                            acc.sums[q as usize].add((model.log2_abs_from_tally(&t) - offset).exp2());
                        }
                        PhaseBin::General(_) => {
                            let z = v.to_complex() / offset.exp2();
                            acc.off_count += 1;
                            acc.off_re.add(z.re);
                            acc.off_im.add(z.im);
                            acc.off_abs.add(z.norm());
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut all = BruteChunk::default();
    for p in &parts {
        all.merge(p);
    }
    let mut bins: [BinTotal; 4] = std::array::from_fn(|_| BinTotal::empty());
    for q in 0..4 {
        bins[q] = BinTotal {
            count: BigUint::from(all.counts[q]),
            log2_abs: if all.counts[q] == 0 {
                f64::NEG_INFINITY
            } else {
                offset + all.sums[q].value().log2()
            },
        };
    }
    let off_axis = (!axis).then(|| {
        let scale = offset.exp2();
        OffAxisTotal {
            count: BigUint::from(all.off_count),
            sum: Complex64::new(all.off_re.value(), all.off_im.value()) * scale,
            abs_sum: all.off_abs.value() * scale,
        }
    });
    Ok(PartitionSummary {
        rows: model.rows(),
        cols: model.cols(),
        method: Method::Brute,
        bins,
        zero_count: BigUint::from(all.zero),
        off_axis,
    })
}

/// Phase-resolved transfer matrix over row profiles.
///
/// Sites are added in raster order. The profile holds the most recent value
/// of every column: columns left of the current site hold the current row,
/// the rest still hold the row above. Adding site `(r, c)` with value `b`
/// applies the vertical factor with the old bit `c` and the horizontal factor
/// with bit `c - 1`, then overwrites bit `c`. Each new state pulls from
/// exactly two predecessors, so parallel evaluation is deterministic.
pub fn transfer_matrix_summary(model: &GridModel, caps: &ExactCaps) -> Result<PartitionSummary> {
    let cols = model.cols();
    if cols > caps.transfer_max_cols {
        return Err(Error::ResourceCap {
            what: "column count for the transfer matrix",
            value: cols,
            cap: caps.transfer_max_cols,
        });
    }
    let quarters = *model.quarter_table().ok_or(Error::UnsupportedKernel)?;
    let abs = *model.abs_table();
    let nonzero = abs.map(|row| row.map(|v| v > 0.0));

    let states = 4usize << cols;
    let mut mags = vec![0.0f64; states];
    let mut counts = vec![BigUint::zero(); states];
    mags[0] = 1.0;
    counts[0] = BigUint::one();
    let mut log2_scale = 0.0f64;

    for r in 0..model.rows() {
        for c in 0..cols {
            let step = |s: usize| -> [(usize, f64, bool); 2] {
                let profile = s >> 2;
                let phase = (s & 3) as u8;
                let b = (profile >> c) & 1;
                let mut out = [(usize::MAX, 0.0, false); 2];
                let ups: &[usize] = if r > 0 { &[0, 1] } else { &[0] };
                for &u in ups {
                    let mut weight = 1.0;
                    let mut alive = true;
                    let mut shift = 0u8;
                    if r > 0 {
                        weight *= abs[u][b];
                        alive &= nonzero[u][b];
                        shift += quarters[u][b];
                    }
                    if c > 0 {
                        let left = (profile >> (c - 1)) & 1;
                        weight *= abs[left][b];
                        alive &= nonzero[left][b];
                        shift += quarters[left][b];
                    }
                    let prev_profile = (profile & !(1 << c)) | (u << c);
                    let prev_phase = phase.wrapping_sub(shift) & 3;
                    out[u] = ((prev_profile << 2) | prev_phase as usize, weight, alive);
                }
                out
            };
            let next_mags: Vec<f64> = (0..states)
                .into_par_iter()
                .map(|s| {
                    step(s)
                        .iter()
                        .filter(|(p, _, _)| *p != usize::MAX)
                        .map(|&(p, w, _)| mags[p] * w)
                        .sum()
                })
                .collect();
            let next_counts: Vec<BigUint> = (0..states)
                .into_par_iter()
                .map(|s| {
                    let mut acc = BigUint::zero();
                    for &(p, _, alive) in step(s).iter() {
                        if p != usize::MAX && alive {
                            acc += &counts[p];
                        }
                    }
                    acc
                })
                .collect();
            mags = next_mags;
            counts = next_counts;
        }
        let max = mags.iter().cloned().fold(0.0f64, f64::max);
        if max > 0.0 {
            let inv = 1.0 / max;
            mags.iter_mut().for_each(|m| *m *= inv);
            log2_scale += max.log2();
        }
    }

    let mut bins: [BinTotal; 4] = std::array::from_fn(|_| BinTotal::empty());
    for (q, bin) in bins.iter_mut().enumerate() {
        let mut mag = CompensatedSum::default();
        let mut count = BigUint::zero();
        for profile in 0..(1usize << cols) {
            let s = (profile << 2) | q;
            mag.add(mags[s]);
            count += &counts[s];
        }
        let m = mag.value();
        bin.log2_abs = if m > 0.0 {
            log2_scale + m.log2()
        } else {
            f64::NEG_INFINITY
        };
        bin.count = count;
    }
    let mut counted = BigUint::zero();
    for b in &bins {
        counted += &b.count;
    }
    let zero_count = (BigUint::one() << model.n()) - counted;
    Ok(PartitionSummary {
        rows: model.rows(),
        cols,
        method: Method::Transfer,
        bins,
        zero_count,
        off_axis: None,
    })
}

/// Transfer matrix when the kernel and width allow it, brute force otherwise.
pub fn exact_summary(model: &GridModel, caps: &ExactCaps) -> Result<PartitionSummary> {
    let axis = model.quarter_table().is_some();
    if axis && (model.cols() <= caps.transfer_max_cols || model.n() > caps.brute_max_n) {
        // Past both caps, report the transfer-matrix width: it is the cheaper one to raise.
        transfer_matrix_summary(model, caps)
    } else {
        brute_force_summary(model, caps)
    }
}

/// Compares two summaries: counts exactly, bin sums to `rel_tol` relative
/// to `Z_|f|`.
pub fn summaries_agree(a: &PartitionSummary, b: &PartitionSummary, rel_tol: f64) -> Result<(), String> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err("different grid shapes".into());
    }
    if a.zero_count != b.zero_count {
        return Err(format!("zero counts differ: {} vs {}", a.zero_count, b.zero_count));
    }
    let scale = a.log2_z_abs().max(b.log2_z_abs());
    for q in 0..4u8 {
        if a.count(q) != b.count(q) {
            return Err(format!(
                "bin {} counts differ: {} vs {}",
                quarter_name(q),
                a.count(q),
                b.count(q)
            ));
        }
        let x = (a.log2_abs_bin(q) - scale).exp2();
        let y = (b.log2_abs_bin(q) - scale).exp2();
        let denom = x.abs().max(y.abs());
        if denom > 0.0 && (x - y).abs() > rel_tol * denom {
            return Err(format!(
                "bin {} sums differ: 2^{} vs 2^{}",
                quarter_name(q),
                a.log2_abs_bin(q),
                b.log2_abs_bin(q)
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::PairwiseKernel;

    fn model(m: usize, preset: &str) -> GridModel {
        GridModel::square(m, PairwiseKernel::preset(preset).unwrap()).unwrap()
    }

    #[test]
    fn pm1_two_by_two_is_all_positive() {
        let s = brute_force_summary(&model(2, "pm(1)"), &ExactCaps::default()).unwrap();
        assert_eq!(s.count(0), &BigUint::from(16u32));
        assert_eq!(s.z_minus(), 0.0);
        assert!((s.z_f().re - 16.0).abs() < 1e-12);
        s.check_invariants().unwrap();
    }

    #[test]
    fn pm1_three_by_three_cancels() {
        let s = brute_force_summary(&model(3, "pm(1)"), &ExactCaps::default()).unwrap();
        assert_eq!(s.count(0), &BigUint::from(256u32));
        assert_eq!(s.count(2), &BigUint::from(256u32));
        assert!((s.z_plus() - 256.0).abs() < 1e-9);
        assert!(s.z_f().norm() <= 1e-9 * s.z_abs());
    }

    #[test]
    fn brute_force_cap_is_enforced() {
        let caps = ExactCaps {
            brute_max_n: 8,
            ..Default::default()
        };
        assert!(matches!(
            brute_force_summary(&model(3, "neg13"), &caps),
            Err(Error::ResourceCap { .. })
        ));
    }

    #[test]
    fn transfer_rejects_general_kernels_and_wide_grids() {
        let general = PairwiseKernel::new([
            [crate::value::ComplexValue::from_parts(1.0, 1.0), crate::value::ComplexValue::ONE],
            [crate::value::ComplexValue::ONE, crate::value::ComplexValue::ONE],
        ]);
        let g = GridModel::square(2, general).unwrap();
        assert!(matches!(
            transfer_matrix_summary(&g, &ExactCaps::default()),
            Err(Error::UnsupportedKernel)
        ));
        let wide = GridModel::new(2, 15, PairwiseKernel::neg13()).unwrap();
        assert!(matches!(
            transfer_matrix_summary(&wide, &ExactCaps::default()),
            Err(Error::ResourceCap { .. })
        ));
    }

    #[test]
    fn general_kernels_report_off_axis_mass() {
        let general = PairwiseKernel::new([
            [crate::value::ComplexValue::from_parts(1.0, 1.0), crate::value::ComplexValue::ONE],
            [crate::value::ComplexValue::ONE, crate::value::ComplexValue::real(2.0)],
        ]);
        let g = GridModel::new(2, 3, general).unwrap();
        let s = brute_force_summary(&g, &ExactCaps::default()).unwrap();
        s.check_invariants().unwrap();
        let off = s.off_axis.as_ref().unwrap();
        assert!(off.count > BigUint::zero());
        // Direct sum over all assignments.
        let mut direct = Complex64::zero();
        for idx in 0..64u128 {
            direct += g.evaluate_f(&g.assignment_from_index(idx)).unwrap().to_complex();
        }
        assert!((s.z_f() - direct).norm() < 1e-9 * direct.norm());
    }

    #[test]
    fn zero_entries_feed_the_zero_bin() {
        let k = PairwiseKernel::from_real([[1.0, 0.0], [2.0, -1.0]]);
        let g = GridModel::new(3, 3, k).unwrap();
        let caps = ExactCaps::default();
        let b = brute_force_summary(&g, &caps).unwrap();
        let t = transfer_matrix_summary(&g, &caps).unwrap();
        assert!(b.zero_count > BigUint::zero());
        summaries_agree(&b, &t, 1e-9).unwrap();
        t.check_invariants().unwrap();
    }
}
