//! Dense univariate polynomials over F_q.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fq::{Elem, Fq};
use crate::norm::LogNorm;

/// A polynomial c_0 + c_1 X + ... with no trailing zero coefficients.
/// The zero polynomial has an empty coefficient vector and no degree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    c: Vec<Elem>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { c: Vec::new() }
    }

    pub fn one() -> Self {
        Poly { c: vec![1] }
    }

    pub fn constant(a: Elem) -> Self {
        Self::from_coeffs(vec![a])
    }

    /// c * X^e
    pub fn monomial(c: Elem, e: usize) -> Self {
        if c == 0 {
            return Self::zero();
        }
        let mut v = vec![0; e + 1];
        v[e] = c;
        Poly { c: v }
    }

    /// X^e
    pub fn x_pow(e: usize) -> Self {
        Self::monomial(1, e)
    }

    /// Low-to-high coefficients; trailing zeros are trimmed.
    pub fn from_coeffs(mut c: Vec<Elem>) -> Self {
        while c.last() == Some(&0) {
            c.pop();
        }
        Poly { c }
    }

    pub fn coeffs(&self) -> &[Elem] {
        &self.c
    }

    pub fn coeff(&self, i: usize) -> Elem {
        self.c.get(i).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn deg(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    /// Degree as a signed exponent, `None` for zero.
    pub fn deg_i(&self) -> Option<i64> {
        self.deg().map(|d| d as i64)
    }

    pub fn norm(&self) -> LogNorm {
        match self.deg() {
            None => LogNorm::Zero,
            Some(d) => LogNorm::Exp(d as i64),
        }
    }

    pub fn lc(&self) -> Elem {
        self.c.last().copied().unwrap_or(0)
    }

    pub fn add(&self, o: &Poly, f: &Fq) -> Poly {
        let n = self.c.len().max(o.c.len());
        Poly::from_coeffs((0..n).map(|i| f.add(self.coeff(i), o.coeff(i))).collect())
    }

    pub fn sub(&self, o: &Poly, f: &Fq) -> Poly {
        let n = self.c.len().max(o.c.len());
        Poly::from_coeffs((0..n).map(|i| f.sub(self.coeff(i), o.coeff(i))).collect())
    }

    pub fn neg(&self, f: &Fq) -> Poly {
        Poly { c: self.c.iter().map(|&a| f.neg(a)).collect() }
    }

    pub fn scale(&self, a: Elem, f: &Fq) -> Poly {
        if a == 0 {
            return Poly::zero();
        }
        Poly { c: self.c.iter().map(|&x| f.mul(x, a)).collect() }
    }

    /// Multiplication by X^k.
    pub fn shift(&self, k: usize) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut c = vec![0; k];
        c.extend_from_slice(&self.c);
        Poly { c }
    }

    /// Exact division by X^k, `None` if X^k does not divide.
    pub fn unshift(&self, k: usize) -> Option<Poly> {
        if self.c.iter().take(k).any(|&a| a != 0) {
            return None;
        }
        Some(Poly::from_coeffs(self.c.iter().skip(k).copied().collect()))
    }

    /// Largest k with X^k dividing self; `None` for zero.
    pub fn x_valuation(&self) -> Option<usize> {
        self.c.iter().position(|&a| a != 0)
    }

    pub fn mul(&self, o: &Poly, f: &Fq) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![0; self.c.len() + o.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in o.c.iter().enumerate() {
                out[i + j] = f.add(out[i + j], f.mul(a, b));
            }
        }
        Poly::from_coeffs(out)
    }

    /// self += c * X^k * o, in place.
    pub fn axpy_shift(&mut self, c: Elem, k: usize, o: &Poly, f: &Fq) {
        if c == 0 || o.is_zero() {
            return;
        }
        if self.c.len() < o.c.len() + k {
            self.c.resize(o.c.len() + k, 0);
        }
        for (j, &b) in o.c.iter().enumerate() {
            if b != 0 {
                self.c[k + j] = f.add(self.c[k + j], f.mul(c, b));
            }
        }
        while self.c.last() == Some(&0) {
            self.c.pop();
        }
    }

    /// Euclidean division: `self = quot * b + rem` with deg rem < deg b.
    pub fn divmod(&self, b: &Poly, f: &Fq) -> Result<(Poly, Poly)> {
        let db = b.deg().ok_or(Error::DivisionByZero)?;
        let inv = f.inv(b.lc()).expect("leading coefficient is nonzero");
        let mut r = self.clone();
        let mut qc = vec![0; self.c.len().saturating_sub(db)];
        while let Some(dr) = r.deg() {
            if dr < db {
                break;
            }
            let c = f.mul(r.lc(), inv);
            qc[dr - db] = c;
            r.axpy_shift(f.neg(c), dr - db, b, f);
        }
        Ok((Poly::from_coeffs(qc), r))
    }

    pub fn rem(&self, b: &Poly, f: &Fq) -> Result<Poly> {
        self.divmod(b, f).map(|(_, r)| r)
    }

    /// Uniformly random polynomial of degree at most `max_deg`.
    pub fn random<R: Rng + ?Sized>(f: &Fq, max_deg: usize, rng: &mut R) -> Poly {
        Poly::from_coeffs((0..=max_deg).map(|_| rng.gen_range(0..f.q())).collect())
    }

    /// Human-readable form such as `2*X^3+X+1`; zero prints as `0`.
    pub fn to_text(&self) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut terms = Vec::new();
        for (e, &c) in self.c.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let mono = match e {
                0 => String::new(),
                1 => "X".into(),
                _ => format!("X^{e}"),
            };
            terms.push(match (c, e) {
                (_, 0) => c.to_string(),
                (1, _) => mono,
                _ => format!("{c}*{mono}"),
            });
        }
        terms.join("+")
    }

    /// Parses the output of [`Poly::to_text`]; coefficients must lie in F_q.
    pub fn parse(s: &str, f: &Fq) -> std::result::Result<Poly, String> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if s == "0" {
            return Ok(Poly::zero());
        }
        let mut out = Poly::zero();
        for term in s.split('+') {
            let (coef, mono) = match term.split_once('*') {
                Some((c, m)) => (c, m),
                None if term.contains('X') => ("1", term),
                None => (term, ""),
            };
            let c: u32 = coef.parse().map_err(|_| format!("bad coefficient in `{term}`"))?;
            if c >= f.q() {
                return Err(format!("coefficient {c} outside F_{}", f.q()));
            }
            let e: usize = match mono {
                "" => 0,
                "X" => 1,
                m => m
                    .strip_prefix("X^")
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| format!("bad monomial `{m}`"))?,
            };
            out = out.add(&Poly::monomial(c, e), f);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn long_division_over_f2() {
        let f = Fq::new(2).unwrap();
        let a = Poly::from_coeffs(vec![1, 0, 1]);
        let (q, r) = a.divmod(&Poly::x_pow(1), &f).unwrap();
        assert_eq!(q, Poly::x_pow(1));
        assert_eq!(r, Poly::one());
    }

    #[test]
    fn self_division() {
        let f = Fq::new(5).unwrap();
        let a = Poly::from_coeffs(vec![3, 0, 4, 2]);
        assert_eq!(a.divmod(&a, &f).unwrap(), (Poly::one(), Poly::zero()));
    }

    #[test]
    fn divmod_recomposes_over_f4() {
        let f = Fq::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let a = Poly::random(&f, 8, &mut rng);
            let b = Poly::random(&f, 8, &mut rng);
            if b.is_zero() {
                continue;
            }
            let (q, r) = a.divmod(&b, &f).unwrap();
            assert!(r.deg() < b.deg());
            assert_eq!(q.mul(&b, &f).add(&r, &f), a);
        }
    }

    #[test]
    fn zero_divisor_rejected() {
        let f = Fq::new(3).unwrap();
        assert_eq!(Poly::one().divmod(&Poly::zero(), &f), Err(Error::DivisionByZero));
    }

    #[test]
    fn text_round_trip() {
        let f = Fq::new(9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = Poly::random(&f, 6, &mut rng);
            assert_eq!(Poly::parse(&a.to_text(), &f).unwrap(), a);
        }
        assert_eq!(Poly::parse("X^2 + 1", &f).unwrap().to_text(), "X^2+1");
        assert!(Poly::parse("9*X", &f).is_err());
    }

    #[test]
    fn degree_of_zero_is_marker() {
        assert_eq!(Poly::zero().deg(), None);
        assert_eq!(Poly::zero().norm(), LogNorm::Zero);
        assert_eq!(Poly::from_coeffs(vec![0, 1, 0, 1]).norm(), LogNorm::Exp(3));
    }
}
