//! Rectangular grids of binary variables with one pairwise factor per
//! horizontal and vertical neighbour pair.
//!
//! Variables are numbered row-major. Each edge `(k, l)` has `k` the left or
//! upper endpoint, and the kernel is applied as `kappa(x_k, x_l)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernel::PairwiseKernel;
use crate::value::{classify_phase, ComplexValue, PhaseBin};

/// Row width limit: one row of an assignment is one `u64` word.
pub const MAX_COLS: usize = 64;

#[derive(Clone, Debug)]
pub struct GridModel {
    rows: usize,
    cols: usize,
    kernel: PairwiseKernel,
    edges: Vec<(usize, usize)>,
    abs: [[f64; 2]; 2],
    log2_abs: [[f64; 2]; 2],
    quarters: Option<[[u8; 2]; 2]>,
}

impl GridModel {
    pub fn new(rows: usize, cols: usize, kernel: PairwiseKernel) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!(
                "grid dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if cols > MAX_COLS {
            return Err(Error::ResourceCap {
                what: "grid column count",
                value: cols,
                cap: MAX_COLS,
            });
        }
        let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        let abs = kernel.abs_table();
        let log2_abs = abs.map(|row| row.map(f64::log2));
        let quarters = if kernel.is_axis_aligned() {
            let e = kernel.entries();
            Some([
                [e[0][0].quarter().unwrap(), e[0][1].quarter().unwrap()],
                [e[1][0].quarter().unwrap(), e[1][1].quarter().unwrap()],
            ])
        } else {
            None
        };
        Ok(GridModel {
            rows,
            cols,
            kernel,
            edges,
            abs,
            log2_abs,
            quarters,
        })
    }

    pub fn square(m: usize, kernel: PairwiseKernel) -> Result<Self> {
        Self::new(m, m, kernel)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.rows * self.cols
    }

    pub fn kernel(&self) -> &PairwiseKernel {
        &self.kernel
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `|kappa(a, b)|`.
    pub fn abs_entry(&self, a: usize, b: usize) -> f64 {
        self.abs[a][b]
    }

    pub fn abs_table(&self) -> &[[f64; 2]; 2] {
        &self.abs
    }

    /// Quarter-turn phases of the kernel entries, when all are axis values.
    pub fn quarter_table(&self) -> Option<&[[u8; 2]; 2]> {
        self.quarters.as_ref()
    }

    /// Grid-graph degree of variable `v`.
    pub fn degree(&self, v: usize) -> usize {
        let (r, c) = (v / self.cols, v % self.cols);
        usize::from(r > 0)
            + usize::from(r + 1 < self.rows)
            + usize::from(c > 0)
            + usize::from(c + 1 < self.cols)
    }

    fn row_mask(&self) -> u64 {
        if self.cols == 64 {
            u64::MAX
        } else {
            (1u64 << self.cols) - 1
        }
    }

    fn check(&self, x: &Assignment) -> Result<()> {
        if x.len() != self.n() || x.cols != self.cols {
            return Err(Error::Dimension {
                expected: self.n(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Counts edges by the pair of values at their endpoints.
    pub fn tally(&self, x: &Assignment) -> Result<EdgeTally> {
        self.check(x)?;
        Ok(self.tally_unchecked(x))
    }

    pub(crate) fn tally_unchecked(&self, x: &Assignment) -> EdgeTally {
        let mask = self.row_mask();
        let hmask = mask >> 1;
        let mut n = [[0u32; 2]; 2];
        let mut prev: Option<u64> = None;
        for &row in &x.rows {
            let left = row & hmask;
            let right = (row >> 1) & hmask;
            n[1][1] += (left & right).count_ones();
            n[1][0] += (left & !right).count_ones();
            n[0][1] += (!left & right & hmask).count_ones();
            n[0][0] += (!left & !right & hmask).count_ones();
            if let Some(up) = prev {
                n[1][1] += (up & row).count_ones();
                n[1][0] += (up & !row).count_ones();
                n[0][1] += (!up & row & mask).count_ones();
                n[0][0] += (!up & !row & mask).count_ones();
            }
            prev = Some(row);
        }
        EdgeTally { counts: n }
    }

    /// `f(x)`, the product of the kernel over all edges.
    pub fn evaluate_f(&self, x: &Assignment) -> Result<ComplexValue> {
        self.check(x)?;
        Ok(self.value_from_tally(&self.tally_unchecked(x)))
    }

    pub fn value_from_tally(&self, t: &EdgeTally) -> ComplexValue {
        match self.quarters {
            Some(q) => {
                let mut magnitude = 1.0;
                let mut quarter = 0u32;
                for a in 0..2 {
                    for b in 0..2 {
                        let n = t.counts[a][b];
                        if n > 0 {
                            magnitude *= self.abs[a][b].powi(n as i32);
                            quarter += q[a][b] as u32 * (n & 3);
                        }
                    }
                }
                if magnitude == 0.0 {
                    ComplexValue::ZERO
                } else {
                    ComplexValue::Axis {
                        magnitude,
                        quarter: (quarter & 3) as u8,
                    }
                }
            }
            None => {
                let mut acc = ComplexValue::ONE;
                for a in 0..2 {
                    for b in 0..2 {
                        acc = acc * self.kernel.entry(a, b).powu(t.counts[a][b]);
                    }
                }
                acc
            }
        }
    }

    /// `log2 |f(x)|` from an edge tally; `-inf` when `f(x) = 0`.
    pub fn log2_abs_from_tally(&self, t: &EdgeTally) -> f64 {
        let mut acc = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let n = t.counts[a][b];
                if n > 0 {
                    acc += n as f64 * self.log2_abs[a][b];
                }
            }
        }
        acc
    }

    /// `|f(x)|` as a product of entry magnitudes, without phase tracking.
    pub fn abs_f(&self, x: &Assignment) -> Result<f64> {
        let t = self.tally(x)?;
        let mut acc = 1.0;
        for a in 0..2 {
            for b in 0..2 {
                acc *= self.abs[a][b].powi(t.counts[a][b] as i32);
            }
        }
        Ok(acc)
    }

    /// Product of the kernel over an explicit subset of edges, one edge at a
    /// time.
    pub fn evaluate_edges(&self, x: &Assignment, edges: &[(usize, usize)]) -> Result<ComplexValue> {
        self.check(x)?;
        let mut acc = ComplexValue::ONE;
        for &(k, l) in edges {
            acc = acc * self.kernel.entry(x.get(k) as usize, x.get(l) as usize);
        }
        Ok(acc)
    }

    pub fn classify(&self, x: &Assignment) -> Result<PhaseBin> {
        Ok(classify_phase(&self.evaluate_f(x)?))
    }

    /// Assignment number `index` in the enumeration order used by the exact
    /// engines: bit `v` of `index` is variable `v`.
    pub fn assignment_from_index(&self, index: u128) -> Assignment {
        let mask = self.row_mask() as u128;
        let rows = (0..self.rows)
            .map(|r| {
                let shift = r * self.cols;
                if shift >= 128 {
                    0
                } else {
                    ((index >> shift) & mask) as u64
                }
            })
            .collect();
        Assignment {
            rows,
            cols: self.cols,
        }
    }
}

impl fmt::Display for GridModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{} grid, kernel {}", self.rows, self.cols, self.kernel.label())
    }
}

/// Edge counts `counts[a][b]` = number of edges `(k, l)` with `x_k = a`,
/// `x_l = b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeTally {
    pub counts: [[u32; 2]; 2],
}

impl EdgeTally {
    pub fn total(&self) -> u32 {
        self.counts.iter().flatten().sum()
    }

    pub fn disagreements(&self) -> u32 {
        self.counts[0][1] + self.counts[1][0]
    }
}

/// A binary assignment, bit-packed one word per grid row.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment {
    rows: Vec<u64>,
    cols: usize,
}

impl Assignment {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(cols <= MAX_COLS);
        Assignment {
            rows: vec![0; rows],
            cols,
        }
    }

    pub fn for_model(model: &GridModel) -> Self {
        Self::zeros(model.rows(), model.cols())
    }

    /// From row-major bits.
    pub fn from_bits(rows: usize, cols: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: bits.len(),
            });
        }
        let mut x = Self::zeros(rows, cols);
        for (v, &b) in bits.iter().enumerate() {
            x.set(v, b);
        }
        Ok(x)
    }

    pub fn from_row_words(words: Vec<u64>, cols: usize) -> Self {
        assert!(cols <= MAX_COLS);
        let mask = if cols == 64 { u64::MAX } else { (1u64 << cols) - 1 };
        Assignment {
            rows: words.into_iter().map(|w| w & mask).collect(),
            cols,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len() * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_words(&self) -> &[u64] {
        &self.rows
    }

    pub fn row_words_mut(&mut self) -> &mut [u64] {
        &mut self.rows
    }

    pub fn get(&self, v: usize) -> bool {
        (self.rows[v / self.cols] >> (v % self.cols)) & 1 == 1
    }

    pub fn get_rc(&self, r: usize, c: usize) -> bool {
        (self.rows[r] >> c) & 1 == 1
    }

    pub fn set(&mut self, v: usize, bit: bool) {
        self.set_rc(v / self.cols, v % self.cols, bit);
    }

    pub fn set_rc(&mut self, r: usize, c: usize, bit: bool) {
        if bit {
            self.rows[r] |= 1 << c;
        } else {
            self.rows[r] &= !(1 << c);
        }
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len()).map(|v| self.get(v)).collect()
    }

    /// Index in the exact-engine enumeration order. Only meaningful for
    /// `len() <= 128`.
    pub fn index(&self) -> u128 {
        let mut idx = 0u128;
        for (r, &w) in self.rows.iter().enumerate() {
            idx |= (w as u128) << (r * self.cols);
        }
        idx
    }
}
