//! Fourier dual of a grid factor graph.
//!
//! In the Forney (normal) form of the grid every variable is an equality
//! node and every kernel a degree-2 factor node; each factor sees its own
//! copy of the two variables it touches. The dual graph keeps this topology,
//! replaces every kernel `kappa` by its two-dimensional Hadamard transform
//! `nu`, and every equality node by an XOR (even-parity) node over the dual
//! variables `omega` on its incident half-edges.
//!
//! For a grid with `E` edges and `N` vertices the two partition functions
//! are related by `Z_d = 2^(2E - N) Z_f`; the code never assumes this, it
//! measures the ratio.

use num_complex::Complex64;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{brute_force_summary, ExactCaps};
use crate::grid::GridModel;
use crate::kernel::PairwiseKernel;
use crate::value::ComplexValue;

/// `nu(w_k, w_l) = sum_{x_k, x_l} kappa(x_k, x_l) (-1)^(w_k x_k + w_l x_l)`.
pub fn hadamard2(kernel: &PairwiseKernel) -> PairwiseKernel {
    let mut nu = [[ComplexValue::ZERO; 2]; 2];
    for (wk, row) in nu.iter_mut().enumerate() {
        for (wl, out) in row.iter_mut().enumerate() {
            let mut acc = ComplexValue::ZERO;
            for xk in 0..2 {
                for xl in 0..2 {
                    let term = kernel.entry(xk, xl);
                    let odd = (wk * xk + wl * xl) & 1 == 1;
                    acc = acc.add(&if odd { term.neg() } else { term });
                }
            }
            *out = acc;
        }
    }
    let out = PairwiseKernel::new(nu);
    match kernel.name() {
        Some(n) => out.with_name(format!("hadamard({n})")),
        None => out,
    }
}

#[derive(Clone, Debug)]
pub struct DualGridModel {
    rows: usize,
    cols: usize,
    nu: PairwiseKernel,
    edges: Vec<(usize, usize)>,
}

/// Dual of a grid: same topology, Hadamard-transformed kernel, XOR nodes.
pub fn dualize(model: &GridModel) -> DualGridModel {
    DualGridModel {
        rows: model.rows(),
        cols: model.cols(),
        nu: hadamard2(model.kernel()),
        edges: model.edges().to_vec(),
    }
}

impl DualGridModel {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n(&self) -> usize {
        self.rows * self.cols
    }

    pub fn kernel(&self) -> &PairwiseKernel {
        &self.nu
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of half-edges (dual variables) at each XOR node.
    pub fn node_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n()];
        for &(k, l) in &self.edges {
            d[k] += 1;
            d[l] += 1;
        }
        d
    }

    /// Reinterprets the dual as a primal grid with kernel `nu`. Dualizing
    /// that grid again transforms `nu` back to `4 kappa`.
    pub fn as_primal(&self) -> Result<GridModel> {
        GridModel::new(self.rows, self.cols, self.nu.clone())
    }
}

/// `Z_d` by a frontier contraction over the dual graph.
///
/// Vertices are closed in raster order. When vertex `v` is processed its
/// right and down edges are summed over both half-edge values; the state is
/// the partial parity of the open vertices `v..=v + cols`, and `v` is closed
/// by keeping only states where its parity is even.
pub fn dual_partition(dual: &DualGridModel) -> Complex64 {
    let cols = dual.cols;
    let rows = dual.rows;
    let nu: [[Complex64; 2]; 2] = dual.nu.entries().map(|r| r.map(|v| v.to_complex()));
    // Window bit j holds the parity of vertex v + j.
    let width = cols + 1;
    let mut state = vec![Complex64::zero(); 1 << width];
    state[0] = Complex64::new(1.0, 0.0);
    for v in 0..rows * cols {
        let (r, c) = (v / cols, v % cols);
        let mut edges_here = Vec::with_capacity(2);
        if c + 1 < cols {
            edges_here.push(1usize);
        }
        if r + 1 < rows {
            edges_here.push(cols);
        }
        for offset in edges_here {
            let mut next = vec![Complex64::zero(); 1 << width];
            for (s, w) in state.iter().enumerate() {
                if w.is_zero() {
                    continue;
                }
                for (a, nu_row) in nu.iter().enumerate() {
                    for (b, &nu_ab) in nu_row.iter().enumerate() {
                        if nu_ab.is_zero() {
                            continue;
                        }
                        let t = s ^ a ^ (b << offset);
                        next[t] += w * nu_ab;
                    }
                }
            }
            state = next;
        }
        // Close v: keep even parity at bit 0, shift the window.
        let mut next = vec![Complex64::zero(); 1 << width];
        for (s, w) in state.iter().enumerate() {
            if s & 1 == 0 {
                next[s >> 1] += w;
            }
        }
        state = next;
    }
    state[0]
}

/// Dimension cap for [`dual_partition_enumerate`].
pub const ENUMERATION_MAX_DIM: usize = 26;

/// `Z_d` by summing over the solution space of the XOR constraints.
///
/// The constraint matrix (one row per vertex, one column per half-edge) is
/// reduced over GF(2); the null-space basis spans every satisfying `omega`,
/// which are then visited in Gray-code order. Requires at most 128
/// half-edges and a null space of dimension at most
/// [`ENUMERATION_MAX_DIM`].
pub fn dual_partition_enumerate(dual: &DualGridModel) -> Result<Complex64> {
    let halves = 2 * dual.edges.len();
    if halves > 128 {
        return Err(Error::ResourceCap {
            what: "half-edge count for XOR enumeration",
            value: halves,
            cap: 128,
        });
    }
    // Half-edge 2e is the k-end of edge e, 2e + 1 the l-end.
    let mut rows: Vec<u128> = vec![0; dual.n()];
    for (e, &(k, l)) in dual.edges.iter().enumerate() {
        rows[k] |= 1 << (2 * e);
        rows[l] |= 1 << (2 * e + 1);
    }
    let basis = gf2_null_space(rows, halves);
    if basis.len() > ENUMERATION_MAX_DIM {
        return Err(Error::ResourceCap {
            what: "XOR solution-space dimension",
            value: basis.len(),
            cap: ENUMERATION_MAX_DIM,
        });
    }
    let nu: [[Complex64; 2]; 2] = dual.nu.entries().map(|r| r.map(|v| v.to_complex()));
    let weight = |omega: u128| -> Complex64 {
        let mut w = Complex64::new(1.0, 0.0);
        for e in 0..dual.edges.len() {
            let a = ((omega >> (2 * e)) & 1) as usize;
            let b = ((omega >> (2 * e + 1)) & 1) as usize;
            w *= nu[a][b];
            if w.is_zero() {
                break;
            }
        }
        w
    };
    let mut omega = 0u128;
    let mut total = weight(omega);
    for i in 1u64..(1u64 << basis.len()) {
        omega ^= basis[i.trailing_zeros() as usize];
        total += weight(omega);
    }
    Ok(total)
}

/// Basis of `{x : row . x = 0 for every row}` over GF(2), `nvars <= 128`.
fn gf2_null_space(mut rows: Vec<u128>, nvars: usize) -> Vec<u128> {
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, column)
    let mut r = 0;
    for col in 0..nvars {
        let bit = 1u128 << col;
        let Some(p) = (r..rows.len()).find(|&i| rows[i] & bit != 0) else {
            continue;
        };
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r && rows[i] & bit != 0 {
                rows[i] ^= rows[r];
            }
        }
        pivots.push((r, col));
        r += 1;
    }
    let pivot_cols: u128 = pivots.iter().fold(0, |m, &(_, c)| m | (1 << c));
    (0..nvars)
        .filter(|&f| pivot_cols & (1 << f) == 0)
        .map(|free| {
            let mut v = 1u128 << free;
            for &(row, col) in &pivots {
                if rows[row] & (1 << free) != 0 {
                    v |= 1 << col;
                }
            }
            v
        })
        .collect()
}

/// Closed form for kernels whose transform is supported on the single entry
/// `nu(1, 1)`: the only candidate is the all-ones `omega`, which satisfies an
/// XOR node iff the node's degree is even. Returns `None` for other kernels.
pub fn dual_partition_structural(dual: &DualGridModel) -> Option<Complex64> {
    let e = dual.nu.entries();
    if !(e[0][0].is_zero() && e[0][1].is_zero() && e[1][0].is_zero()) {
        return None;
    }
    if dual.node_degrees().iter().any(|d| d % 2 == 1) {
        return Some(Complex64::zero());
    }
    Some(e[1][1].powu(dual.edges.len() as u32).to_complex())
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    pub z_f: [f64; 2],
    pub z_d: [f64; 2],
    /// `Z_d / Z_f` when `Z_f` is nonzero.
    pub ratio: Option<[f64; 2]>,
    pub zero_equivalence: bool,
    /// `2^(2E - N)` for comparison with the measured ratio.
    pub topology_constant: f64,
}

/// Relative size below which `Z_f` (against `Z_|f|`) or `Z_d` (against
/// `sum |nu|^E`-scale magnitudes) counts as zero.
pub const ZERO_TOL: f64 = 1e-9;

/// Computes both sides by independent exact routes and checks that they
/// vanish together.
pub fn duality_check(model: &GridModel, max_n: usize) -> Result<DualityReport> {
    if model.n() > max_n {
        return Err(Error::ResourceCap {
            what: "variable count for the duality check",
            value: model.n(),
            cap: max_n,
        });
    }
    let caps = ExactCaps {
        brute_max_n: max_n,
        ..Default::default()
    };
    let primal = brute_force_summary(model, &caps)?;
    let z_f = primal.z_f();
    let f_zero = primal.cancellation_ratio() <= ZERO_TOL;

    let dual = dualize(model);
    let z_d = dual_partition(&dual);
    // Scale for Z_d: the same sum with |nu| in place of nu.
    let abs_dual = DualGridModel {
        nu: PairwiseKernel::new(dual.nu.entries().map(|r| r.map(|v| ComplexValue::real(v.magnitude())))),
        ..dual.clone()
    };
    let d_scale = dual_partition(&abs_dual).re;
    let d_zero = d_scale == 0.0 || z_d.norm() <= ZERO_TOL * d_scale;

    let exponent = 2 * model.edge_count() as i32 - model.n() as i32;
    Ok(DualityReport {
        z_f: [z_f.re, z_f.im],
        z_d: [z_d.re, z_d.im],
        ratio: (!f_zero).then(|| {
            let r = z_d / z_f;
            [r.re, r.im]
        }),
        zero_equivalence: f_zero == d_zero,
        topology_constant: 2f64.powi(exponent),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_kernel_eq(a: &PairwiseKernel, b: [[f64; 2]; 2]) {
        for (i, row) in b.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(a.entry(i, j), ComplexValue::real(v), "entry [{i}][{j}]");
            }
        }
    }

    #[test]
    fn hadamard_of_pm1_is_supported_on_ones() {
        assert_kernel_eq(&hadamard2(&PairwiseKernel::preset("pm(1)").unwrap()), [[0.0, 0.0], [0.0, 4.0]]);
    }

    #[test]
    fn hadamard_of_constant_is_dc_only() {
        assert_kernel_eq(&hadamard2(&PairwiseKernel::constant(1.0)), [[4.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn hadamard_of_neg13() {
        let nu = hadamard2(&PairwiseKernel::neg13());
        let want = [[0.3, 0.3], [0.3, 4.3]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((nu.entry(i, j).to_complex().re - want[i][j]).abs() < 1e-12);
                assert!(nu.entry(i, j).is_axis());
            }
        }
    }

    #[test]
    fn dual_degrees_match_primal() {
        let g = GridModel::new(3, 4, PairwiseKernel::neg13()).unwrap();
        let d = dualize(&g);
        let primal: Vec<usize> = (0..g.n()).map(|v| g.degree(v)).collect();
        assert_eq!(d.node_degrees(), primal);
    }

    #[test]
    fn null_space_has_expected_dimension() {
        let g = GridModel::square(3, PairwiseKernel::neg13()).unwrap();
        let d = dualize(&g);
        let mut rows = vec![0u128; 9];
        for (e, &(k, l)) in d.edges().iter().enumerate() {
            rows[k] |= 1 << (2 * e);
            rows[l] |= 1 << (2 * e + 1);
        }
        let basis = gf2_null_space(rows.clone(), 24);
        assert_eq!(basis.len(), 24 - 9);
        for b in basis {
            for r in &rows {
                assert_eq!((r & b).count_ones() % 2, 0);
            }
        }
    }

    #[test]
    fn structural_shortcut_only_for_single_support() {
        let d = dualize(&GridModel::square(3, PairwiseKernel::neg13()).unwrap());
        assert!(dual_partition_structural(&d).is_none());
        let d = dualize(&GridModel::square(2, PairwiseKernel::preset("pm(1)").unwrap()).unwrap());
        // All degrees are 2 on a 2x2 grid: the all-ones pattern survives.
        assert_eq!(dual_partition_structural(&d), Some(Complex64::new(256.0, 0.0)));
    }
}
