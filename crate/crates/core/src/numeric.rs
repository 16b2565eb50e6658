//! Small numerical helpers: compensated and log-domain accumulation.

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Running sum of positive terms held as `log2`, so that sums of values far
/// outside the `f64` range stay representable.
#[derive(Clone, Copy, Debug)]
pub struct Log2Sum {
    scale: f64,
    mantissa: f64,
}

impl Default for Log2Sum {
    fn default() -> Self {
        Log2Sum {
            scale: f64::NEG_INFINITY,
            mantissa: 0.0,
        }
    }
}

impl Log2Sum {
    /// Adds `2^log2_term`.
    pub fn add_log2(&mut self, log2_term: f64) {
        if log2_term == f64::NEG_INFINITY {
            return;
        }
        if log2_term > self.scale {
            self.mantissa = self.mantissa * (self.scale - log2_term).exp2() + 1.0;
            self.scale = log2_term;
        } else {
            self.mantissa += (log2_term - self.scale).exp2();
        }
    }

    pub fn merge(&mut self, other: &Log2Sum) {
        if other.mantissa == 0.0 {
            return;
        }
        self.add_log2(other.log2());
    }

    /// `log2` of the sum; `-inf` when nothing was added.
    pub fn log2(&self) -> f64 {
        if self.mantissa == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.scale + self.mantissa.log2()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mantissa == 0.0
    }
}

/// `log2(2^a + 2^b)`.
pub fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2
}

/// Mean and standard error of the mean (`std / sqrt(n)`, with the `n - 1`
/// variance denominator). The standard error is zero for fewer than two
/// values.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
