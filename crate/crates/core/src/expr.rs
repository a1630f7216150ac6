//! Named built-in target functions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::cheb::chebyshev_t;
use crate::error::Error;
use crate::sobolev::Target;

/// `T<k>`, `sin2pix`, `runge`, `xpow<α>` or `absx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    Cheb(usize),
    Sin2Pix,
    Runge,
    XPow(f64),
    AbsX,
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Parameter(format!("unknown expression '{s}'; expected T<k>, sin2pix, runge, xpow<a> or absx"));
        match s {
            "sin2pix" => Ok(Builtin::Sin2Pix),
            "runge" => Ok(Builtin::Runge),
            "absx" => Ok(Builtin::AbsX),
            _ => {
                if let Some(k) = s.strip_prefix('T') {
                    k.parse().map(Builtin::Cheb).map_err(|_| bad())
                } else if let Some(a) = s.strip_prefix("xpow") {
                    let a: f64 = a.parse().map_err(|_| bad())?;
                    if !a.is_finite() {
                        return Err(bad());
                    }
                    Ok(Builtin::XPow(a))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Cheb(k) => write!(f, "T{k}"),
            Builtin::Sin2Pix => write!(f, "sin2pix"),
            Builtin::Runge => write!(f, "runge"),
            Builtin::XPow(a) => write!(f, "xpow{a}"),
            Builtin::AbsX => write!(f, "absx"),
        }
    }
}

impl Target for Builtin {
    fn value(&self, x: f64) -> f64 {
        match *self {
            Builtin::Cheb(k) => chebyshev_t(k, x).0,
            Builtin::Sin2Pix => (2.0 * PI * x).sin(),
            Builtin::Runge => 1.0 / (1.0 + 25.0 * x * x),
            Builtin::XPow(a) => x.powf(a),
            Builtin::AbsX => x.abs(),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match *self {
            Builtin::Cheb(k) => chebyshev_t(k, x).1,
            Builtin::Sin2Pix => 2.0 * PI * (2.0 * PI * x).cos(),
            Builtin::Runge => {
                let d = 1.0 + 25.0 * x * x;
                -50.0 * x / (d * d)
            }
            Builtin::XPow(a) => a * x.powf(a - 1.0),
            Builtin::AbsX => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl Builtin {
    /// Exponent of an `x^α` singularity at zero, if any.
    pub fn singularity(&self) -> Option<f64> {
        match *self {
            Builtin::XPow(a) if a.fract() != 0.0 && a > 0.0 && a < 1.0 => Some(a),
            _ => None,
        }
    }
}
