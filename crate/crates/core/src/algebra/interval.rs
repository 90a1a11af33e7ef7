use std::ops::{Add, Mul, Neg, Sub};

/// Closed interval with outward-rounded arithmetic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn widened(lo: f64, hi: f64, exact: bool) -> Self {
        if exact {
            Self { lo, hi }
        } else {
            Self {
                lo: lo.next_down(),
                hi: hi.next_up(),
            }
        }
    }

    /// Integer power; even powers of an interval straddling zero start at zero.
    pub fn powi(self, k: u32) -> Self {
        match k {
            0 => Self::point(1.0),
            1 => self,
            _ => {
                let a = self.lo.abs().powi(k as i32);
                let b = self.hi.abs().powi(k as i32);
                if k % 2 == 1 {
                    let lo = self.lo.signum() * a;
                    let hi = self.hi.signum() * b;
                    Self::widened(lo, hi, false)
                } else if self.lo >= 0.0 {
                    Self::widened(a, b, false)
                } else if self.hi <= 0.0 {
                    Self::widened(b, a, false)
                } else {
                    Self {
                        lo: 0.0,
                        hi: a.max(b).next_up(),
                    }
                }
            }
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        let exact = (self.lo == 0.0 && self.hi == 0.0) || (rhs.lo == 0.0 && rhs.hi == 0.0);
        Interval::widened(self.lo + rhs.lo, self.hi + rhs.hi, exact)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        self + (-rhs)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let one = |i: &Interval| i.lo == 1.0 && i.hi == 1.0;
        if one(&self) {
            return rhs;
        }
        if one(&rhs) {
            return self;
        }
        let p = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::widened(lo, hi, false)
    }
}
