//! Complex scalars with exact quarter-turn phases, and the phase bins that
//! partition configuration space.
//!
//! Every value of the shipped kernels lies on one of the four half-axes
//! `{+r, +ir, -r, -ir}`. Keeping the phase as an integer mod 4 means bin
//! membership of a product of hundreds of factors is decided by integer
//! addition, never by thresholding a floating-point argument.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;

/// Tolerance used when snapping a general angle onto a multiple of pi/2.
pub const PHASE_SNAP_TOL: f64 = 1e-12;

/// `i^quarter` as an exact complex number.
pub fn quarter_unit(quarter: u8) -> Complex64 {
    match quarter & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ComplexValue {
    /// `magnitude * i^quarter`, `quarter` in `0..4`.
    Axis { magnitude: f64, quarter: u8 },
    /// Anything off the axes.
    General(Complex64),
}

impl ComplexValue {
    pub const ZERO: ComplexValue = ComplexValue::Axis {
        magnitude: 0.0,
        quarter: 0,
    };
    pub const ONE: ComplexValue = ComplexValue::Axis {
        magnitude: 1.0,
        quarter: 0,
    };
    pub const I: ComplexValue = ComplexValue::Axis {
        magnitude: 1.0,
        quarter: 1,
    };

    /// Panics if `magnitude` is negative or not finite.
    pub fn axis(magnitude: f64, quarter: u8) -> Self {
        assert!(
            magnitude >= 0.0 && magnitude.is_finite(),
            "magnitude must be finite and nonnegative, got {magnitude}"
        );
        if magnitude == 0.0 {
            return Self::ZERO;
        }
        ComplexValue::Axis {
            magnitude,
            quarter: quarter & 3,
        }
    }

    pub fn real(x: f64) -> Self {
        Self::from_parts(x, 0.0)
    }

    /// Builds a value from rectangular parts, landing on `Axis` whenever one
    /// component is exactly zero.
    pub fn from_parts(re: f64, im: f64) -> Self {
        if im == 0.0 {
            if re >= 0.0 {
                Self::axis(re, 0)
            } else {
                Self::axis(-re, 2)
            }
        } else if re == 0.0 {
            if im > 0.0 {
                Self::axis(im, 1)
            } else {
                Self::axis(-im, 3)
            }
        } else {
            ComplexValue::General(Complex64::new(re, im))
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::from_parts(z.re, z.im)
    }

    pub fn magnitude(&self) -> f64 {
        match *self {
            ComplexValue::Axis { magnitude, .. } => magnitude,
            ComplexValue::General(z) => z.norm(),
        }
    }

    pub fn quarter(&self) -> Option<u8> {
        match *self {
            ComplexValue::Axis { quarter, .. } => Some(quarter),
            ComplexValue::General(_) => None,
        }
    }

    pub fn is_axis(&self) -> bool {
        matches!(self, ComplexValue::Axis { .. })
    }

    pub fn is_zero(&self) -> bool {
        self.magnitude() == 0.0
    }

    /// Rectangular form. Axis values have at most one nonzero component.
    pub fn to_complex(&self) -> Complex64 {
        match *self {
            ComplexValue::Axis { magnitude, quarter } => quarter_unit(quarter) * magnitude,
            ComplexValue::General(z) => z,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        assert!(c >= 0.0, "scale factor must be nonnegative");
        match *self {
            ComplexValue::Axis { magnitude, quarter } => Self::axis(magnitude * c, quarter),
            ComplexValue::General(z) => Self::from_complex(z * c),
        }
    }

    pub fn powu(&self, n: u32) -> Self {
        match *self {
            ComplexValue::Axis { magnitude, quarter } => ComplexValue::Axis {
                magnitude: magnitude.powi(n as i32),
                quarter: ((quarter as u32 * (n & 3)) & 3) as u8,
            },
            ComplexValue::General(z) => Self::from_complex(z.powu(n)),
        }
    }

    /// Sum in rectangular form; exact axis results come back as `Axis`.
    pub fn add(&self, other: &ComplexValue) -> Self {
        Self::from_complex(self.to_complex() + other.to_complex())
    }

    pub fn neg(&self) -> Self {
        match *self {
            ComplexValue::Axis { magnitude, quarter } => Self::axis(magnitude, quarter + 2),
            ComplexValue::General(z) => ComplexValue::General(-z),
        }
    }

    pub fn classify(&self) -> PhaseBin {
        classify_phase(self)
    }
}

impl Mul for ComplexValue {
    type Output = ComplexValue;

    fn mul(self, rhs: ComplexValue) -> ComplexValue {
        match (self, rhs) {
            (
                ComplexValue::Axis {
                    magnitude: a,
                    quarter: p,
                },
                ComplexValue::Axis {
                    magnitude: b,
                    quarter: q,
                },
            ) => {
                let magnitude = a * b;
                if magnitude == 0.0 {
                    ComplexValue::ZERO
                } else {
                    ComplexValue::Axis {
                        magnitude,
                        quarter: (p + q) & 3,
                    }
                }
            }
            (a, b) => ComplexValue::from_complex(a.to_complex() * b.to_complex()),
        }
    }
}

impl fmt::Display for ComplexValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ComplexValue::Axis { magnitude, quarter } => match quarter {
                0 => write!(f, "{magnitude}"),
                1 => write!(f, "{magnitude}i"),
                2 => write!(f, "-{magnitude}"),
                _ => write!(f, "-{magnitude}i"),
            },
            ComplexValue::General(z) => write!(f, "{}{:+}i", z.re, z.im),
        }
    }
}

/// Which part of configuration space an assignment falls into, according to
/// the argument of `f(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhaseBin {
    /// `arg f = k * pi/2`: 0 is X+, 1 is X(+i), 2 is X-, 3 is X(-i).
    Exact(u8),
    Zero,
    /// Angle in `[0, 2pi)`, never within the snap tolerance of an axis.
    General(f64),
}

impl PhaseBin {
    pub const PLUS: PhaseBin = PhaseBin::Exact(0);
    pub const PLUS_I: PhaseBin = PhaseBin::Exact(1);
    pub const MINUS: PhaseBin = PhaseBin::Exact(2);
    pub const MINUS_I: PhaseBin = PhaseBin::Exact(3);

    /// The four axis bins in quarter-turn order.
    pub const AXES: [PhaseBin; 4] = [Self::PLUS, Self::PLUS_I, Self::MINUS, Self::MINUS_I];

    pub fn quarter(&self) -> Option<u8> {
        match *self {
            PhaseBin::Exact(k) => Some(k),
            _ => None,
        }
    }

    /// Short name used in files and on the command line.
    pub fn name(&self) -> String {
        match *self {
            PhaseBin::Exact(k) => quarter_name(k).to_string(),
            PhaseBin::Zero => "zero".to_string(),
            PhaseBin::General(a) => format!("angle({a})"),
        }
    }

    pub fn parse(s: &str) -> Option<PhaseBin> {
        match s.trim() {
            "plus" | "+" | "pos" => Some(Self::PLUS),
            "minus" | "-" | "neg" => Some(Self::MINUS),
            "plus_i" | "+i" | "i" => Some(Self::PLUS_I),
            "minus_i" | "-i" => Some(Self::MINUS_I),
            "zero" | "0" => Some(PhaseBin::Zero),
            _ => None,
        }
    }
}

impl fmt::Display for PhaseBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

pub fn quarter_name(quarter: u8) -> &'static str {
    match quarter & 3 {
        0 => "plus",
        1 => "plus_i",
        2 => "minus",
        _ => "minus_i",
    }
}

/// Assigns a value to its phase bin. Axis values are binned exactly; general
/// values are snapped to an axis when within [`PHASE_SNAP_TOL`] radians.
pub fn classify_phase(v: &ComplexValue) -> PhaseBin {
    match *v {
        ComplexValue::Axis { magnitude, quarter } => {
            if magnitude == 0.0 {
                PhaseBin::Zero
            } else {
                PhaseBin::Exact(quarter)
            }
        }
        ComplexValue::General(z) => {
            if z.norm() == 0.0 {
                return PhaseBin::Zero;
            }
            let mut angle = z.arg();
            if angle < 0.0 {
                angle += TAU;
            }
            let k = (angle / FRAC_PI_2).round();
            if (angle - k * FRAC_PI_2).abs() <= PHASE_SNAP_TOL {
                PhaseBin::Exact((k as i64).rem_euclid(4) as u8)
            } else {
                PhaseBin::General(angle)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        assert_eq!(classify_phase(&ComplexValue::real(2.8561)), PhaseBin::PLUS);
        assert_eq!(
            classify_phase(&ComplexValue::from_parts(0.0, 5.0)),
            PhaseBin::PLUS_I
        );
        assert_eq!(classify_phase(&ComplexValue::real(-1.69)), PhaseBin::MINUS);
        assert_eq!(classify_phase(&ComplexValue::ZERO), PhaseBin::Zero);
        assert_eq!(classify_phase(&ComplexValue::real(-0.0)), PhaseBin::Zero);
    }

    #[test]
    fn general_values_snap_near_axes() {
        let almost_minus_i = ComplexValue::General(Complex64::new(1e-15, -3.0));
        assert_eq!(classify_phase(&almost_minus_i), PhaseBin::MINUS_I);
        let diag = ComplexValue::General(Complex64::new(1.0, 1.0));
        match classify_phase(&diag) {
            PhaseBin::General(a) => assert!((a - std::f64::consts::FRAC_PI_4).abs() < 1e-15),
            other => panic!("expected general bin, got {other:?}"),
        }
    }

    #[test]
    fn axis_products_add_quarters() {
        let a = ComplexValue::axis(2.0, 3);
        let b = ComplexValue::axis(1.5, 2);
        assert_eq!(a * b, ComplexValue::axis(3.0, 1));
        assert_eq!(ComplexValue::I.powu(12), ComplexValue::ONE);
        assert_eq!(ComplexValue::I.powu(7), ComplexValue::axis(1.0, 3));
    }

    #[test]
    fn axis_values_have_one_nonzero_component() {
        for q in 0..4 {
            let z = ComplexValue::axis(1.3, q).to_complex();
            assert!(z.re == 0.0 || z.im == 0.0);
            assert!((z.norm() - 1.3).abs() < 1e-15);
        }
    }

    #[test]
    fn from_parts_lands_on_axis() {
        assert_eq!(ComplexValue::from_parts(0.0, -2.0), ComplexValue::axis(2.0, 3));
        assert!(!ComplexValue::from_parts(0.5, -2.0).is_axis());
        assert_eq!(ComplexValue::real(4.0).add(&ComplexValue::real(-4.0)), ComplexValue::ZERO);
    }

    #[test]
    fn bin_names_round_trip() {
        for b in PhaseBin::AXES {
            assert_eq!(PhaseBin::parse(&b.name()), Some(b));
        }
    }
}
