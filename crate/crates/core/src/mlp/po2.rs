use serde::{Deserialize, Serialize};

/// Inclusive exponent range of power-of-two weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentRange {
    pub min: i8,
    pub max: i8,
}

impl Default for ExponentRange {
    fn default() -> Self {
        ExponentRange { min: -7, max: 7 }
    }
}

impl ExponentRange {
    /// Symmetric range for a `bits`-wide weight: shifts of up to `bits - 1`
    /// positions in either direction (8 bits gives `[-7, 7]`).
    pub fn from_weight_bits(bits: u32) -> Self {
        let m = bits.clamp(2, 64) as i8 - 1;
        ExponentRange { min: -m, max: m }
    }

    /// Magnitudes below this quantize to zero: half the smallest
    /// representable power on the log scale.
    pub fn zero_threshold(&self) -> f64 {
        libm::exp2(f64::from(self.min) - 0.5)
    }
}

/// `sign * 2^exponent`, or exactly zero when `sign == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(i8, i8)", into = "(i8, i8)")]
pub struct Po2Weight {
    pub sign: i8,
    pub exponent: i8,
}

impl From<(i8, i8)> for Po2Weight {
    fn from((sign, exponent): (i8, i8)) -> Self {
        if sign == 0 {
            Po2Weight::ZERO
        } else {
            Po2Weight {
                sign: sign.signum(),
                exponent,
            }
        }
    }
}

impl From<Po2Weight> for (i8, i8) {
    fn from(w: Po2Weight) -> Self {
        (w.sign, w.exponent)
    }
}

impl Po2Weight {
    pub const ZERO: Po2Weight = Po2Weight { sign: 0, exponent: 0 };

    pub fn new(sign: i8, exponent: i8) -> Self {
        (sign, exponent).into()
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn is_negative(&self) -> bool {
        self.sign < 0
    }

    pub fn value(&self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * libm::exp2(f64::from(self.exponent))
        }
    }

    /// Nearest power of two in the log domain, clamped to `range`.
    pub fn quantize(w: f64, range: ExponentRange) -> Self {
        let mag = libm::fabs(w);
        if !w.is_finite() || mag < range.zero_threshold() {
            return Po2Weight::ZERO;
        }
        let e = libm::round(libm::log2(mag)).clamp(f64::from(range.min), f64::from(range.max));
        Po2Weight {
            sign: if w < 0.0 { -1 } else { 1 },
            exponent: e as i8,
        }
    }
}
