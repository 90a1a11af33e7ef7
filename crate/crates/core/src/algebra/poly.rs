use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::interval::Interval;
use super::AlgebraError;

/// Exponent tuple of a monomial, one entry per variable.
pub type Exponents = Vec<u32>;

/// Sparse multivariate polynomial with exact rational coefficients.
///
/// Terms are kept in a `BTreeMap` keyed by exponent tuple, so no two terms
/// share an exponent and zero coefficients are never stored. A float copy of
/// the coefficients is cached for fast evaluation.
#[derive(Clone)]
pub struct Polynomial {
    num_vars: usize,
    terms: BTreeMap<Exponents, BigRational>,
    float_terms: Vec<(Exponents, f64)>,
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars == other.num_vars && self.terms == other.terms
    }
}

impl Eq for Polynomial {}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial[{}]({})", self.num_vars, self)
    }
}

pub(crate) fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite float.
pub fn f64_to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite coordinate")
}

impl Polynomial {
    pub fn zero(num_vars: usize) -> Self {
        Self::from_map(num_vars, BTreeMap::new())
    }

    pub fn constant(num_vars: usize, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(vec![0; num_vars], c);
        }
        Self::from_map(num_vars, terms)
    }

    pub fn from_int(num_vars: usize, c: i64) -> Self {
        Self::constant(num_vars, BigRational::from_integer(BigInt::from(c)))
    }

    /// The coordinate function `x_{index+1}`.
    pub fn var(num_vars: usize, index: usize) -> Self {
        assert!(index < num_vars, "variable index out of range");
        let mut e = vec![0; num_vars];
        e[index] = 1;
        Self::from_map(num_vars, BTreeMap::from([(e, BigRational::one())]))
    }

    /// Builds a polynomial from (exponents, coefficient) pairs, merging duplicates.
    pub fn from_terms<I>(num_vars: usize, terms: I) -> Result<Self, AlgebraError>
    where
        I: IntoIterator<Item = (Exponents, BigRational)>,
    {
        let mut map: BTreeMap<Exponents, BigRational> = BTreeMap::new();
        for (e, c) in terms {
            if e.len() != num_vars {
                return Err(AlgebraError::DimensionMismatch {
                    expected: num_vars,
                    found: e.len(),
                });
            }
            *map.entry(e).or_insert_with(BigRational::zero) += c;
        }
        map.retain(|_, c| !c.is_zero());
        Ok(Self::from_map(num_vars, map))
    }

    fn from_map(num_vars: usize, terms: BTreeMap<Exponents, BigRational>) -> Self {
        let float_terms = terms
            .iter()
            .map(|(e, c)| (e.clone(), rational_to_f64(c)))
            .collect();
        Self {
            num_vars,
            terms,
            float_terms,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Re-embeds the polynomial into a ring with `num_vars` variables (must not drop a used variable).
    pub fn with_num_vars(&self, num_vars: usize) -> Result<Self, AlgebraError> {
        let mut map = BTreeMap::new();
        for (e, c) in &self.terms {
            if e.iter().skip(num_vars).any(|&k| k > 0) {
                return Err(AlgebraError::DimensionMismatch {
                    expected: num_vars,
                    found: self.num_vars,
                });
            }
            let mut f = e.clone();
            f.resize(num_vars, 0);
            map.insert(f, c.clone());
        }
        Ok(Self::from_map(num_vars, map))
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.num_vars);
        }
        Self::from_map(
            self.num_vars,
            self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        )
    }

    /// Exact partial derivative with respect to variable `index`.
    pub fn derivative(&self, index: usize) -> Self {
        let mut map = BTreeMap::new();
        for (e, c) in &self.terms {
            let k = e[index];
            if k == 0 {
                continue;
            }
            let mut f = e.clone();
            f[index] = k - 1;
            map.insert(f, c * BigRational::from_integer(BigInt::from(k)));
        }
        Self::from_map(self.num_vars, map)
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.num_vars).map(|i| self.derivative(i)).collect()
    }

    fn check_dim(&self, found: usize) -> Result<(), AlgebraError> {
        if found != self.num_vars {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.num_vars,
                found,
            });
        }
        Ok(())
    }

    /// Floating-point value at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, AlgebraError> {
        self.check_dim(x.len())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.float_terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(*c, |acc, (&k, &xi)| acc * powi(xi, k))
            })
            .sum()
    }

    /// Value together with a rigorous bound on its floating-point rounding error.
    fn eval_with_error(&self, x: &[f64]) -> (f64, f64) {
        let mut value = 0.0;
        let mut magnitude = 0.0;
        for (e, c) in &self.float_terms {
            let t = e
                .iter()
                .zip(x)
                .fold(*c, |acc, (&k, &xi)| acc * powi(xi, k));
            value += t;
            magnitude += t.abs();
        }
        let ops = (self.degree() as usize + self.float_terms.len() + 2) as f64;
        // each term carries at most (deg + 1) roundings, the sum adds #terms more
        (value, 4.0 * ops * f64::EPSILON * magnitude + f64::MIN_POSITIVE)
    }

    /// Exact value at a rational point.
    pub fn eval_exact(&self, x: &[BigRational]) -> Result<BigRational, AlgebraError> {
        self.check_dim(x.len())?;
        let mut acc = BigRational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (&k, xi) in e.iter().zip(x) {
                if k > 0 {
                    t *= num_traits::pow(xi.clone(), k as usize);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Exact sign of the polynomial at the (exactly representable) float point `x`.
    ///
    /// A float evaluation with an error bound settles most points; the rest
    /// fall back to rational arithmetic.
    pub fn sign_at(&self, x: &[f64]) -> Result<Ordering, AlgebraError> {
        self.check_dim(x.len())?;
        if x.iter().all(|v| v.is_finite()) {
            let (v, err) = self.eval_with_error(x);
            if v > err {
                return Ok(Ordering::Greater);
            }
            if v < -err {
                return Ok(Ordering::Less);
            }
            let q: Vec<BigRational> = x.iter().map(|&v| f64_to_rational(v)).collect();
            let value = self.eval_exact(&q)?;
            Ok(if value.is_positive() {
                Ordering::Greater
            } else if value.is_negative() {
                Ordering::Less
            } else {
                Ordering::Equal
            })
        } else {
            Err(AlgebraError::NonFinite)
        }
    }

    /// Gradient evaluated at `x` from the exact partial derivatives.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, AlgebraError> {
        self.check_dim(x.len())?;
        Ok((0..self.num_vars)
            .map(|i| self.derivative(i).eval_unchecked(x))
            .collect())
    }

    /// Enclosure of the range over a box, evaluated variable by variable in
    /// nested Horner form with exact even-power handling.
    pub fn eval_interval(&self, x: &[Interval]) -> Result<Interval, AlgebraError> {
        self.check_dim(x.len())?;
        Ok(horner_interval(&self.float_terms_with_error(), x, 0))
    }

    fn float_terms_with_error(&self) -> Vec<(&[u32], Interval)> {
        self.terms
            .iter()
            .zip(&self.float_terms)
            .map(|((e, q), (_, c))| {
                // the cached float may be rounded; widen unless it is exact
                let iv = if f64_to_rational(*c) == *q {
                    Interval::point(*c)
                } else {
                    Interval::new(c.next_down(), c.next_up())
                };
                (e.as_slice(), iv)
            })
            .collect()
    }

    /// Substitutes polynomials (all in the same ring) for the variables.
    pub fn compose(&self, subs: &[Polynomial]) -> Result<Polynomial, AlgebraError> {
        self.check_dim(subs.len())?;
        let target = subs.first().map(|p| p.num_vars).unwrap_or(0);
        let mut acc = Polynomial::zero(target);
        for (e, c) in &self.terms {
            let mut t = Polynomial::constant(target, c.clone());
            for (&k, s) in e.iter().zip(subs) {
                for _ in 0..k {
                    t = &t * s;
                }
            }
            acc = &acc + &t;
        }
        Ok(acc)
    }
}

fn powi(x: f64, k: u32) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(k as i32),
    }
}

fn horner_interval(terms: &[(&[u32], Interval)], x: &[Interval], var: usize) -> Interval {
    if var == x.len() {
        return terms
            .iter()
            .fold(Interval::point(0.0), |acc, (_, c)| acc + *c);
    }
    // group by the exponent of the current variable
    let mut groups: BTreeMap<u32, Vec<(&[u32], Interval)>> = BTreeMap::new();
    for (e, c) in terms {
        groups.entry(e[var]).or_default().push((e, *c));
    }
    let mut acc = Interval::point(0.0);
    for (k, group) in groups {
        let inner = horner_interval(&group, x, var + 1);
        acc = acc + inner * x[var].powi(k);
    }
    acc
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial::from_map(
            self.num_vars,
            self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        )
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.num_vars, rhs.num_vars, "polynomial ring mismatch");
        let mut map = self.terms.clone();
        for (e, c) in &rhs.terms {
            *map.entry(e.clone()).or_insert_with(BigRational::zero) += c;
        }
        map.retain(|_, c| !c.is_zero());
        Polynomial::from_map(self.num_vars, map)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.num_vars, rhs.num_vars, "polynomial ring mismatch");
        let mut map: BTreeMap<Exponents, BigRational> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Exponents = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *map.entry(e).or_insert_with(BigRational::zero) += c1 * c2;
            }
        }
        map.retain(|_, c| !c.is_zero());
        Polynomial::from_map(self.num_vars, map)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // highest total degree first, then reverse-lexicographic exponents
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|(a, _), (b, _)| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        for (n, (e, c)) in terms.into_iter().enumerate() {
            let negative = c.is_negative();
            let abs = c.abs();
            if n == 0 {
                if negative {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if negative { "-" } else { "+" })?;
            }
            let is_const = e.iter().all(|&k| k == 0);
            if !abs.is_one() || is_const {
                write!(f, "{}", abs)?;
            }
            let mut first = abs.is_one();
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                if !first {
                    write!(f, " ")?;
                }
                first = false;
                write!(f, "x{}", i + 1)?;
                if k > 1 {
                    write!(f, "^{}", k)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str, n: usize) -> Polynomial {
        Polynomial::parse(s, n).unwrap()
    }

    #[test]
    fn eval_circle() {
        let c = p("x^2 + y^2 - 1", 2);
        assert_eq!(c.eval(&[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(c.eval(&[0.0, 0.0]).unwrap(), -1.0);
        assert_eq!(c.eval(&[2.0, 0.0]).unwrap(), 3.0);
    }

    #[test]
    fn eval_dimension_mismatch() {
        let c = p("x^2 + y^2 - 1", 2);
        assert!(matches!(
            c.eval(&[1.0]),
            Err(AlgebraError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(c.grad(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn grad_examples() {
        let c = p("x^2 + y^2 - 1", 2);
        assert_eq!(c.grad(&[1.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        assert_eq!(c.grad(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let cusp = p("x^3 - y^2", 2);
        assert_eq!(cusp.grad(&[1.0, 1.0]).unwrap(), vec![3.0, -2.0]);
    }

    #[test]
    fn exact_sign_on_circle() {
        let c = p("x^2 + y^2 - 1", 2);
        assert_eq!(c.sign_at(&[1.0, 0.0]).unwrap(), Ordering::Equal);
        assert_eq!(c.sign_at(&[0.5, 0.0]).unwrap(), Ordering::Less);
        let three_four_five = p("x^2 + y^2 - 25/16", 2);
        assert_eq!(three_four_five.sign_at(&[0.75, 1.0]).unwrap(), Ordering::Equal);
    }

    #[test]
    fn exact_sign_matches_rational_eval() {
        let c = p("x^2 + y^2 - 1", 2);
        let x = [0.6, 0.8];
        let q: Vec<_> = x.iter().map(|&v| f64_to_rational(v)).collect();
        let exact = c.eval_exact(&q).unwrap();
        let expected = if exact.is_positive() {
            Ordering::Greater
        } else if exact.is_negative() {
            Ordering::Less
        } else {
            Ordering::Equal
        };
        assert_eq!(c.sign_at(&x).unwrap(), expected);
    }

    #[test]
    fn interval_disk_bounds() {
        let c = p("x^2 + y^2 - 1", 2);
        let b = [Interval::new(-0.1, 0.1), Interval::new(-0.1, 0.1)];
        let r = c.eval_interval(&b).unwrap();
        assert!(r.lo >= -1.0 - 1e-15 && r.hi <= -0.98 + 1e-15, "{r:?}");
        let b = [Interval::new(2.0, 3.0), Interval::new(0.0, 1.0)];
        let r = c.eval_interval(&b).unwrap();
        assert!(r.lo > 3.0 - 1e-12, "{r:?}");
    }

    #[test]
    fn arithmetic_and_compose() {
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let s = &(&x * &x) - &(&y * &y);
        assert_eq!(s, p("x1^2 - x2^2", 2));
        let d = s.derivative(0);
        assert_eq!(d, p("2 x1", 2));
        let sub = s.compose(&[&x + &y, &x - &y]).unwrap();
        assert_eq!(sub, p("4 x1 x2", 2));
    }

    #[test]
    fn display_parse_round_trip() {
        for s in ["x1^2 + x2^2 - 1", "-3/4 x1 x2^3 + 2 x2 - 7", "0", "x1", "-x2^2"] {
            let q = p(s, 2);
            let again = p(&q.to_string(), 2);
            assert_eq!(q, again, "{s} -> {q}");
        }
    }
}
