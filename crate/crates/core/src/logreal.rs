//! Signed numbers stored as `sign * exp(log_mag)`.
//!
//! Trajectories of the recursions routinely reach magnitudes like `e^500`
//! and beyond, so every accumulation in the engine happens here rather than
//! in plain `f64`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// A real number as a sign in `{-1, 0, +1}` and the natural log of its
/// absolute value. `log_mag` is `-inf` exactly when `sign == 0`.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct LogReal {
    sign: i8,
    log_mag: f64,
}

/// `ln(1 - e^d)` for `d <= 0`, accurate on both sides of `-ln 2`.
#[inline]
pub fn log1mexp(d: f64) -> f64 {
    debug_assert!(d <= 0.0);
    if d > -std::f64::consts::LN_2 {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl LogReal {
    pub const ZERO: LogReal = LogReal {
        sign: 0,
        log_mag: f64::NEG_INFINITY,
    };
    pub const ONE: LogReal = LogReal {
        sign: 1,
        log_mag: 0.0,
    };

    /// Builds `sign * e^log_mag`. A zero sign or a `-inf` magnitude gives zero.
    #[inline]
    pub fn from_parts(sign: i8, log_mag: f64) -> Self {
        if sign == 0 || log_mag == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogReal {
                sign: sign.signum(),
                log_mag,
            }
        }
    }

    /// The positive number `e^log_mag`.
    #[inline]
    pub fn from_ln(log_mag: f64) -> Self {
        Self::from_parts(1, log_mag)
    }

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogReal {
                sign: if x > 0.0 { 1 } else { -1 },
                log_mag: x.abs().ln(),
            }
        }
    }

    /// Back to `f64`; saturates to `+-inf` or `0` outside the `f64` range.
    #[inline]
    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_mag.exp(),
        }
    }

    #[inline]
    pub fn sign(self) -> i8 {
        self.sign
    }

    #[inline]
    pub fn log_mag(self) -> f64 {
        self.log_mag
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.sign > 0
    }

    /// Finite magnitude (or zero). NaN and `+inf` magnitudes are not.
    #[inline]
    pub fn is_finite(self) -> bool {
        self.sign == 0 || self.log_mag.is_finite()
    }

    #[inline]
    pub fn abs(self) -> Self {
        LogReal {
            sign: self.sign.abs(),
            log_mag: self.log_mag,
        }
    }

    /// `max(x, 0)`.
    #[inline]
    pub fn pos_part(self) -> Self {
        if self.sign > 0 {
            self
        } else {
            Self::ZERO
        }
    }

    /// Multiplies by `e^l`.
    #[inline]
    pub fn scale_ln(self, l: f64) -> Self {
        Self::from_parts(self.sign, self.log_mag + l)
    }

    /// Square root of a nonnegative value; negative input yields NaN magnitude.
    #[inline]
    pub fn sqrt(self) -> Self {
        match self.sign {
            0 => Self::ZERO,
            1 => LogReal {
                sign: 1,
                log_mag: 0.5 * self.log_mag,
            },
            _ => LogReal {
                sign: 1,
                log_mag: f64::NAN,
            },
        }
    }

    #[inline]
    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    #[inline]
    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// `ln(max(x, 1))`, i.e. `log^+`.
    #[inline]
    pub fn log_pos(self) -> f64 {
        if self.sign > 0 {
            self.log_mag.max(0.0)
        } else {
            0.0
        }
    }

    /// Threshold level used for exceedance counting: `ln x` for positive
    /// values, `-inf` otherwise, so that `x > e^u` iff `level() > u`.
    #[inline]
    pub fn level(self) -> f64 {
        if self.sign > 0 {
            self.log_mag
        } else {
            f64::NEG_INFINITY
        }
    }
}

impl Default for LogReal {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<f64> for LogReal {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

impl Neg for LogReal {
    type Output = LogReal;
    #[inline]
    fn neg(self) -> LogReal {
        LogReal {
            sign: -self.sign,
            log_mag: self.log_mag,
        }
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    #[inline]
    fn mul(self, rhs: LogReal) -> LogReal {
        if self.sign == 0 || rhs.sign == 0 {
            return LogReal::ZERO;
        }
        LogReal {
            sign: self.sign * rhs.sign,
            log_mag: self.log_mag + rhs.log_mag,
        }
    }
}

impl Add for LogReal {
    type Output = LogReal;
    #[inline]
    fn add(self, rhs: LogReal) -> LogReal {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        let (big, small) = if self.log_mag >= rhs.log_mag {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let d = small.log_mag - big.log_mag;
        if big.sign == small.sign {
            LogReal {
                sign: big.sign,
                log_mag: big.log_mag + d.exp().ln_1p(),
            }
        } else if d == 0.0 {
            LogReal::ZERO
        } else {
            LogReal::from_parts(big.sign, big.log_mag + log1mexp(d))
        }
    }
}

impl Sub for LogReal {
    type Output = LogReal;
    #[inline]
    fn sub(self, rhs: LogReal) -> LogReal {
        self + (-rhs)
    }
}

impl PartialEq for LogReal {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign && (self.sign == 0 || self.log_mag == other.log_mag)
    }
}

impl PartialOrd for LogReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.log_mag.partial_cmp(&other.log_mag),
                _ => other.log_mag.partial_cmp(&self.log_mag),
            },
            ord => Some(ord),
        }
    }
}

impl fmt::Display for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            s if self.log_mag.abs() < 700.0 => write!(f, "{}", f64::from(s) * self.log_mag.exp()),
            s => write!(f, "{}exp({})", if s < 0 { "-" } else { "" }, self.log_mag),
        }
    }
}

const BATCH: usize = 64;

/// One-signed log-sum-exp accumulator. Terms are buffered and folded in
/// batches of 64, smallest magnitude first.
#[derive(Clone, Debug)]
struct OneSided {
    buf: [f64; BATCH],
    len: usize,
    acc: f64,
    max: f64,
}

impl OneSided {
    fn new() -> Self {
        OneSided {
            buf: [0.0; BATCH],
            len: 0,
            acc: f64::NEG_INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    #[inline]
    fn push(&mut self, l: f64) {
        if l > self.max {
            self.max = l;
        }
        self.buf[self.len] = l;
        self.len += 1;
        if self.len == BATCH {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.len == 0 {
            return;
        }
        let terms = &mut self.buf[..self.len];
        terms.sort_unstable_by(|a, b| a.total_cmp(b));
        let top = terms[terms.len() - 1].max(self.acc);
        let mut s = 0.0;
        if self.acc > f64::NEG_INFINITY {
            // the running total is usually the largest piece, so add it last
            for &t in terms.iter() {
                s += (t - top).exp();
            }
            s += (self.acc - top).exp();
        } else {
            for &t in terms.iter() {
                s += (t - top).exp();
            }
        }
        self.acc = top + s.ln();
        self.len = 0;
    }

    fn total(&self) -> f64 {
        let mut c = self.clone();
        c.flush();
        c.acc
    }
}

/// Accumulates a signed series in log space: positive and negative parts
/// are summed separately and combined once at the end.
#[derive(Clone, Debug)]
pub struct LogSum {
    pos: OneSided,
    neg: OneSided,
    terms: usize,
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSum {
    pub fn new() -> Self {
        LogSum {
            pos: OneSided::new(),
            neg: OneSided::new(),
            terms: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, x: LogReal) {
        match x.sign {
            0 => {}
            1 => self.pos.push(x.log_mag),
            _ => self.neg.push(x.log_mag),
        }
        self.terms += 1;
    }

    /// Largest magnitude seen on either side, as an upper bound on
    /// `ln |partial sum|` up to a factor of the term count.
    #[inline]
    pub fn log_scale(&self) -> f64 {
        let p = self.pos.max.max(self.pos.acc);
        let n = self.neg.max.max(self.neg.acc);
        p.max(n)
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn value(&self) -> LogReal {
        let p = LogReal::from_ln(self.pos.total());
        let n = LogReal::from_parts(-1, self.neg.total());
        p + n
    }
}
