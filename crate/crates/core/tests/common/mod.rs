//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use fgmc::{Assignment, GridModel};
use num_complex::Complex64;

/// `f(x)` as a plain product of kernel entries, without tallies or phases.
pub fn f_direct(model: &GridModel, x: &Assignment) -> Complex64 {
    let k = model.kernel();
    let (rows, cols) = (model.rows(), model.cols());
    let mut f = Complex64::new(1.0, 0.0);
    for r in 0..rows {
        for c in 0..cols {
            let a = x.get_rc(r, c) as usize;
            if c + 1 < cols {
                f *= k.entry(a, x.get_rc(r, c + 1) as usize).to_complex();
            }
            if r + 1 < rows {
                f *= k.entry(a, x.get_rc(r + 1, c) as usize).to_complex();
            }
        }
    }
    f
}

pub fn assignment(model: &GridModel, index: u64) -> Assignment {
    let n = model.n();
    let bits: Vec<bool> = (0..n).map(|v| (index >> v) & 1 == 1).collect();
    Assignment::from_bits(model.rows(), model.cols(), &bits).unwrap()
}

/// Quarter turn of a nonzero axis value.
pub fn quarter_of(z: Complex64) -> Option<u8> {
    let tol = 1e-12 * z.norm();
    if z.norm() == 0.0 {
        None
    } else if z.im.abs() <= tol {
        Some(if z.re > 0.0 { 0 } else { 2 })
    } else if z.re.abs() <= tol {
        Some(if z.im > 0.0 { 1 } else { 3 })
    } else {
        None
    }
}

/// Per-bin `(count, Z_b)` and `Z_|f|` by enumeration.
pub struct Oracle {
    pub counts: [u64; 4],
    pub z: [f64; 4],
    pub z_abs: f64,
    pub probs: Vec<f64>,
    pub quarters: Vec<Option<u8>>,
}

pub fn oracle(model: &GridModel) -> Oracle {
    let n = model.n();
    assert!(n <= 22);
    let mut o = Oracle {
        counts: [0; 4],
        z: [0.0; 4],
        z_abs: 0.0,
        probs: Vec::with_capacity(1 << n),
        quarters: Vec::with_capacity(1 << n),
    };
    for i in 0..1u64 << n {
        let f = f_direct(model, &assignment(model, i));
        let q = quarter_of(f);
        if let Some(q) = q {
            o.counts[q as usize] += 1;
            o.z[q as usize] += f.norm();
        }
        o.z_abs += f.norm();
        o.probs.push(f.norm());
        o.quarters.push(q);
    }
    for p in &mut o.probs {
        *p /= o.z_abs;
    }
    o
}

/// Upper 1% point of chi-squared with `df` degrees of freedom.
pub fn chi2_crit_01(df: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(df as f64).unwrap().inverse_cdf(0.99)
}

pub fn chi2(observed: &[u64], probs: &[f64]) -> (f64, usize) {
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut df = 0;
    for (&o, &p) in observed.iter().zip(probs) {
        if p == 0.0 {
            assert_eq!(o, 0, "sample in a zero-probability cell");
            continue;
        }
        let e = p * total as f64;
        stat += (o as f64 - e).powi(2) / e;
        df += 1;
    }
    (stat, df - 1)
}
