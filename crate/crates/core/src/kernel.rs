//! Pairwise kernels `kappa(x_k, x_l)` on binary variables.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value::ComplexValue;

#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseKernel {
    /// `entries[x_k][x_l]`.
    entries: [[ComplexValue; 2]; 2],
    name: Option<String>,
}

/// On-disk form: `{"entries": [[[re,im],[re,im]],[[re,im],[re,im]]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelFile {
    pub entries: [[[f64; 2]; 2]; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl PairwiseKernel {
    pub fn new(entries: [[ComplexValue; 2]; 2]) -> Self {
        PairwiseKernel {
            entries,
            name: None,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn from_real(entries: [[f64; 2]; 2]) -> Self {
        Self::new(entries.map(|row| row.map(ComplexValue::real)))
    }

    /// 1.3 when both variables are 0, 1 when both are 1, -1 otherwise.
    pub fn neg13() -> Self {
        Self::from_real([[1.3, -1.0], [-1.0, 1.0]]).with_name("neg13")
    }

    /// 1.5 when both variables are 0, i when both are 1, 1 otherwise.
    pub fn cplx15i() -> Self {
        let one = ComplexValue::ONE;
        Self::new([[ComplexValue::real(1.5), one], [one, ComplexValue::I]]).with_name("cplx15i")
    }

    /// `a` on agreement, `-a` on disagreement.
    pub fn pm(a: Complex64) -> Self {
        let a = ComplexValue::from_complex(a);
        let name = format!("pm({})", a);
        Self::new([[a, a.neg()], [a.neg(), a]]).with_name(name)
    }

    pub fn constant(c: f64) -> Self {
        Self::from_real([[c, c], [c, c]]).with_name(if c == 1.0 {
            "ones".to_string()
        } else {
            format!("const({c})")
        })
    }

    /// Looks up a named kernel: `neg13`, `cplx15i`, `ones`, `const(c)` or
    /// `pm(a)` where `a` is a real or imaginary literal such as `-2.5`, `i`,
    /// `2i` or `1+2i`.
    pub fn preset(name: &str) -> Result<Self> {
        let name = name.trim();
        match name {
            "neg13" => return Ok(Self::neg13()),
            "cplx15i" => return Ok(Self::cplx15i()),
            "ones" => return Ok(Self::constant(1.0)),
            _ => {}
        }
        if let Some(arg) = strip_call(name, "pm") {
            let a = parse_complex(arg)?;
            if a.norm() == 0.0 {
                return Err(Error::InvalidKernel("pm(a) requires a != 0".into()));
            }
            return Ok(Self::pm(a));
        }
        if let Some(arg) = strip_call(name, "const") {
            let c: f64 = arg
                .trim()
                .parse()
                .map_err(|_| Error::InvalidKernel(format!("bad constant in {name:?}")))?;
            if !(c > 0.0) {
                return Err(Error::InvalidKernel("const(c) requires c > 0".into()));
            }
            return Ok(Self::constant(c));
        }
        Err(Error::InvalidKernel(format!(
            "unknown preset {name:?}; known presets: {}",
            PRESET_NAMES.join(", ")
        )))
    }

    pub fn from_file(file: &KernelFile) -> Result<Self> {
        let mut entries = [[ComplexValue::ZERO; 2]; 2];
        for (a, row) in file.entries.iter().enumerate() {
            for (b, &[re, im]) in row.iter().enumerate() {
                if !re.is_finite() || !im.is_finite() {
                    return Err(Error::InvalidKernel(format!(
                        "entry [{a}][{b}] is not finite"
                    )));
                }
                entries[a][b] = ComplexValue::from_parts(re, im);
            }
        }
        let mut kernel = Self::new(entries);
        kernel.name = file.name.clone();
        Ok(kernel)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: KernelFile = serde_json::from_str(s)?;
        Self::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_file(&self) -> KernelFile {
        KernelFile {
            entries: self.entries.map(|row| {
                row.map(|v| {
                    let z = v.to_complex();
                    [z.re, z.im]
                })
            }),
            name: self.name.clone(),
        }
    }

    pub fn entry(&self, a: usize, b: usize) -> ComplexValue {
        self.entries[a][b]
    }

    pub fn entries(&self) -> &[[ComplexValue; 2]; 2] {
        &self.entries
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| "custom".to_string())
    }

    pub fn has_zero_entry(&self) -> bool {
        self.entries.iter().flatten().any(|v| v.is_zero())
    }

    /// True when every entry lies on one of the four half-axes (or is zero).
    pub fn is_axis_aligned(&self) -> bool {
        self.entries.iter().flatten().all(|v| v.is_axis())
    }

    /// True when every entry is real, i.e. only the sign bins can occur.
    pub fn is_real(&self) -> bool {
        self.entries
            .iter()
            .flatten()
            .all(|v| matches!(v.quarter(), Some(0) | Some(2)))
    }

    pub fn abs_table(&self) -> [[f64; 2]; 2] {
        self.entries.map(|row| row.map(|v| v.magnitude()))
    }

    /// Multiplies every entry by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        PairwiseKernel {
            entries: self.entries.map(|row| row.map(|v| v.scale(c))),
            name: self.name.as_ref().map(|n| format!("{c}*{n}")),
        }
    }
}

pub const PRESET_NAMES: [&str; 5] = ["neg13", "cplx15i", "pm(a)", "ones", "const(c)"];

fn strip_call<'a>(s: &'a str, func: &str) -> Option<&'a str> {
    s.strip_prefix(func)?
        .trim_start()
        .strip_prefix('(')?
        .strip_suffix(')')
}

/// Parses `x`, `yi`, `i`, `-i` or `x+yi` / `x-yi`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::InvalidKernel(format!("cannot parse {s:?} as a complex number"));
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // Split at the last sign that is not the leading one or an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&j| (bytes[j] == b'+' || bytes[j] == b'-') && !matches!(bytes[j - 1], b'e' | b'E'));
    let (re_part, im_part) = match split {
        Some(j) => (&body[..j], &body[j..]),
        None => ("", body),
    };
    let re = if re_part.is_empty() {
        0.0
    } else {
        re_part.parse::<f64>().map_err(|_| bad())?
    };
    let im = match im_part {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => t.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(Complex64::new(re, im))
}
