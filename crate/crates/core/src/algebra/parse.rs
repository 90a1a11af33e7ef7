//! Text syntax for polynomials: a sum of terms `c x1^e1 x2^e2 ...`.
//!
//! Coefficients may be integers, fractions (`3/4`) or decimals (`0.25`, read
//! exactly). Variables are `x1 .. xN`; `x`, `y`, `z` are accepted as aliases
//! for `x1`, `x2`, `x3`. A `*` between factors is optional.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::poly::{Exponents, Polynomial};
use super::AlgebraError;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(BigRational),
    Var(usize),
    Caret,
    Star,
    Plus,
    Minus,
}

fn err(pos: usize, message: impl Into<String>) -> AlgebraError {
    AlgebraError::Parse {
        position: pos,
        message: message.into(),
    }
}

fn parse_decimal(text: &str, pos: usize) -> Result<BigRational, AlgebraError> {
    let (int_part, frac_part) = match text.split_once('.') {
        Some((a, b)) => (a, b),
        None => (text, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits
        .parse()
        .map_err(|_| err(pos, format!("bad number `{text}`")))?;
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    Ok(BigRational::new(num, den))
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, AlgebraError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '^' => {
                out.push((i, Token::Caret));
                i += 1;
            }
            '*' => {
                out.push((i, Token::Star));
                i += 1;
            }
            '+' => {
                out.push((i, Token::Plus));
                i += 1;
            }
            '-' => {
                out.push((i, Token::Minus));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let mut value = parse_decimal(&text, start)?;
                // a fraction binds tighter than anything else
                if i < chars.len() && chars[i] == '/' {
                    i += 1;
                    let dstart = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    if dstart == i {
                        return Err(err(dstart, "expected denominator after `/`"));
                    }
                    let den: String = chars[dstart..i].iter().collect();
                    let den: BigInt = den.parse().map_err(|_| err(dstart, "bad denominator"))?;
                    if den.is_zero() {
                        return Err(err(dstart, "zero denominator"));
                    }
                    value /= BigRational::from_integer(den);
                }
                out.push((start, Token::Number(value)));
            }
            'x' | 'y' | 'z' => {
                let start = i;
                i += 1;
                let dstart = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let index = if dstart == i {
                    match c {
                        'x' => 0,
                        'y' => 1,
                        _ => 2,
                    }
                } else if c == 'x' {
                    let n: usize = chars[dstart..i]
                        .iter()
                        .collect::<String>()
                        .parse()
                        .map_err(|_| err(dstart, "bad variable index"))?;
                    if n == 0 {
                        return Err(err(start, "variables are numbered from x1"));
                    }
                    n - 1
                } else {
                    return Err(err(start, format!("unknown variable `{c}` with index")));
                };
                out.push((start, Token::Var(index)));
            }
            other => return Err(err(i, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

impl Polynomial {
    /// Parses the text syntax into a polynomial in `num_vars` variables.
    pub fn parse(src: &str, num_vars: usize) -> Result<Polynomial, AlgebraError> {
        let tokens = tokenize(src)?;
        if tokens.is_empty() {
            return Err(err(0, "empty polynomial"));
        }
        let mut terms: Vec<(Exponents, BigRational)> = Vec::new();
        let mut k = 0;
        while k < tokens.len() {
            let mut sign = BigRational::one();
            let mut saw_sign = false;
            while k < tokens.len() {
                match tokens[k].1 {
                    Token::Plus => {
                        saw_sign = true;
                        k += 1;
                    }
                    Token::Minus => {
                        saw_sign = true;
                        sign = -sign;
                        k += 1;
                    }
                    _ => break,
                }
            }
            if !terms.is_empty() && !saw_sign {
                return Err(err(tokens[k].0, "expected `+` or `-` between terms"));
            }
            let mut coeff = sign;
            let mut exps = vec![0u32; num_vars];
            let mut factors = 0;
            while k < tokens.len() {
                let (pos, tok) = &tokens[k];
                match tok {
                    Token::Number(v) => {
                        coeff *= v.clone();
                        k += 1;
                    }
                    Token::Var(index) => {
                        if *index >= num_vars {
                            return Err(err(
                                *pos,
                                format!("variable x{} exceeds ambient dimension {num_vars}", index + 1),
                            ));
                        }
                        k += 1;
                        let mut e = 1u32;
                        if k < tokens.len() && tokens[k].1 == Token::Caret {
                            k += 1;
                            match tokens.get(k) {
                                Some((p, Token::Number(v))) => {
                                    if !v.is_integer() || v < &BigRational::zero() {
                                        return Err(err(*p, "exponent must be a non-negative integer"));
                                    }
                                    e = v
                                        .to_integer()
                                        .try_into()
                                        .map_err(|_| err(*p, "exponent too large"))?;
                                    k += 1;
                                }
                                _ => return Err(err(*pos, "expected exponent after `^`")),
                            }
                        }
                        exps[*index] += e;
                    }
                    Token::Star => {
                        if factors == 0 {
                            return Err(err(*pos, "unexpected `*`"));
                        }
                        k += 1;
                        continue;
                    }
                    Token::Caret => return Err(err(*pos, "unexpected `^`")),
                    Token::Plus | Token::Minus => break,
                }
                factors += 1;
            }
            if factors == 0 {
                let pos = tokens.get(k).map(|t| t.0).unwrap_or(src.len());
                return Err(err(pos, "expected a term"));
            }
            terms.push((exps, coeff));
        }
        Polynomial::from_terms(num_vars, terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_aliases_and_fractions() {
        let p = Polynomial::parse("3/4 x^2 y - 0.5*z + 2", 3).unwrap();
        let q = Polynomial::parse("3/4 x1^2 x2 - 1/2 x3 + 2", 3).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.eval(&[2.0, 1.0, 4.0]).unwrap(), 3.0);
    }

    #[test]
    fn merges_like_terms_and_drops_zeros() {
        let p = Polynomial::parse("x y - y x + 1", 2).unwrap();
        assert_eq!(p, Polynomial::from_int(2, 1));
        assert_eq!(p.num_terms(), 1);
    }

    #[test]
    fn reports_positions() {
        match Polynomial::parse("x^2 + w", 2) {
            Err(AlgebraError::Parse { position, .. }) => assert_eq!(position, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Polynomial::parse("x3", 2).is_err());
        assert!(Polynomial::parse("x^", 2).is_err());
        assert!(Polynomial::parse("1/0", 2).is_err());
        assert!(Polynomial::parse("x y^1/2", 2).is_err());
        assert!(Polynomial::parse("", 2).is_err());
        assert!(Polynomial::parse("x 2 y", 2).is_ok());
        assert!(Polynomial::parse("x y z", 2).is_err());
    }
}
