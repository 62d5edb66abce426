//! Truncated Laurent series in X^-1 over F_q with tracked precision.
//!
//! A value stores its coefficients from the top exponent downward and a
//! precision floor: coefficients below the floor are unknown. Exact values
//! (polynomials, finite sums, monomial inverses) carry no floor.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fq::{Elem, Fq};
use crate::norm::LogNorm;
use crate::poly::Poly;

/// Default number of known coefficients below exponent 0.
pub const DEFAULT_PRECISION: u32 = 256;

/// Precision floor from `ULAB_PRECISION`, falling back to the default.
pub fn precision_from_env() -> u32 {
    std::env::var("ULAB_PRECISION")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &u32| n > 0)
        .unwrap_or(DEFAULT_PRECISION)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Laurent {
    /// Exponent of `coeffs[0]`; meaningless when `coeffs` is empty.
    top: i64,
    /// `coeffs[i]` multiplies X^(top - i). First entry nonzero, no trailing zeros.
    coeffs: Vec<Elem>,
    /// Coefficients at exponents below the floor are unknown; `None` means exact.
    floor: Option<i64>,
}

fn max_floor(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Laurent {
    pub fn zero() -> Self {
        Laurent { top: 0, coeffs: Vec::new(), floor: None }
    }

    /// Zero to precision: every coefficient at exponent >= `floor` vanishes.
    pub fn zero_to(floor: i64) -> Self {
        Laurent { top: 0, coeffs: Vec::new(), floor: Some(floor) }
    }

    pub fn monomial(c: Elem, e: i64) -> Self {
        Self::from_dense(e, vec![c], None)
    }

    pub fn one() -> Self {
        Self::monomial(1, 0)
    }

    pub fn from_poly(p: &Poly) -> Self {
        match p.deg() {
            None => Self::zero(),
            Some(d) => Self::from_dense(d as i64, p.coeffs().iter().rev().copied().collect(), None),
        }
    }

    /// Builds from `(exponent, coefficient)` pairs; duplicate exponents add.
    pub fn from_terms(terms: &[(i64, Elem)], floor: Option<i64>, f: &Fq) -> Self {
        let Some(hi) = terms.iter().map(|t| t.0).max() else {
            return Laurent { top: 0, coeffs: vec![], floor };
        };
        let lo = terms.iter().map(|t| t.0).min().unwrap();
        let mut dense = vec![0; (hi - lo + 1) as usize];
        for &(e, c) in terms {
            let i = (hi - e) as usize;
            dense[i] = f.add(dense[i], c);
        }
        Self::from_dense(hi, dense, floor)
    }

    /// Dense coefficients from exponent `hi` downward, then normalized.
    pub fn from_dense(hi: i64, mut dense: Vec<Elem>, floor: Option<i64>) -> Self {
        if let Some(fl) = floor {
            let keep = (hi - fl + 1).max(0) as usize;
            dense.truncate(keep);
        }
        while dense.last() == Some(&0) {
            dense.pop();
        }
        let lead = dense.iter().position(|&c| c != 0);
        match lead {
            None => Laurent { top: 0, coeffs: Vec::new(), floor },
            Some(s) => Laurent { top: hi - s as i64, coeffs: dense.split_off(s), floor },
        }
    }

    /// Haar-random element of the maximal ideal: uniform coefficients at
    /// exponents -1..=-n, unknown below.
    pub fn random_unit_ball<R: Rng + ?Sized>(f: &Fq, n: u32, rng: &mut R) -> Self {
        let dense: Vec<Elem> = (0..n).map(|_| rng.gen_range(0..f.q())).collect();
        Self::from_dense(-1, dense, Some(-(n as i64)))
    }

    pub fn top(&self) -> Option<i64> {
        (!self.coeffs.is_empty()).then_some(self.top)
    }

    pub fn floor(&self) -> Option<i64> {
        self.floor
    }

    pub fn is_exact(&self) -> bool {
        self.floor.is_none()
    }

    /// Zero, exactly or to precision.
    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.coeffs.is_empty() && self.floor.is_none()
    }

    /// Lowest exponent with a stored coefficient.
    fn low(&self) -> i64 {
        self.top - self.coeffs.len() as i64 + 1
    }

    /// Coefficient of X^e; `None` if it lies below the precision floor.
    pub fn coeff(&self, e: i64) -> Option<Elem> {
        if self.floor.is_some_and(|fl| e < fl) {
            return None;
        }
        if self.coeffs.is_empty() || e > self.top || e < self.low() {
            return Some(0);
        }
        Some(self.coeffs[(self.top - e) as usize])
    }

    /// Nonzero stored terms, highest exponent first.
    pub fn terms(&self) -> impl Iterator<Item = (i64, Elem)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(move |(i, &c)| (self.top - i as i64, c))
    }

    /// Raises the precision floor, forgetting lower coefficients.
    pub fn truncate(&self, floor: i64) -> Self {
        let fl = max_floor(self.floor, Some(floor));
        Self::from_dense(self.top, self.coeffs.clone(), fl)
    }

    /// The norm q^top. Zero to precision is an error, never silently zero.
    pub fn norm(&self) -> Result<LogNorm> {
        match (self.top(), self.floor) {
            (Some(t), _) => Ok(LogNorm::Exp(t)),
            (None, None) => Ok(LogNorm::Zero),
            (None, Some(fl)) => Err(Error::PrecisionLoss { floor: fl }),
        }
    }

    /// Certifies |self| < q^e, or reports that precision cannot decide it.
    pub fn norm_lt(&self, e: i64) -> Result<bool> {
        match (self.top(), self.floor) {
            (Some(t), _) => Ok(t < e),
            (None, None) => Ok(true),
            // unknown part has norm at most q^(floor-1)
            (None, Some(fl)) if fl - 1 < e => Ok(true),
            (None, Some(fl)) => Err(Error::PrecisionLoss { floor: fl }),
        }
    }

    /// Multiplication by X^k.
    pub fn shift(&self, k: i64) -> Self {
        Laurent { top: self.top + k, coeffs: self.coeffs.clone(), floor: self.floor.map(|f| f + k) }
    }

    pub fn neg(&self, f: &Fq) -> Self {
        Laurent {
            top: self.top,
            coeffs: self.coeffs.iter().map(|&c| f.neg(c)).collect(),
            floor: self.floor,
        }
    }

    pub fn scale(&self, a: Elem, f: &Fq) -> Self {
        if a == 0 {
            return Laurent { top: 0, coeffs: vec![], floor: self.floor };
        }
        Laurent {
            top: self.top,
            coeffs: self.coeffs.iter().map(|&c| f.mul(c, a)).collect(),
            floor: self.floor,
        }
    }

    pub fn add(&self, o: &Laurent, f: &Fq) -> Self {
        let floor = max_floor(self.floor, o.floor);
        let tops: Vec<i64> = [self.top(), o.top()].into_iter().flatten().collect();
        let Some(&hi) = tops.iter().max() else {
            return Laurent { top: 0, coeffs: vec![], floor };
        };
        let mut lo = [self, o]
            .iter()
            .filter(|x| !x.is_zero())
            .map(|x| x.low())
            .min()
            .unwrap();
        if let Some(fl) = floor {
            lo = lo.max(fl);
        }
        if lo > hi {
            return Laurent { top: 0, coeffs: vec![], floor };
        }
        let mut dense = vec![0; (hi - lo + 1) as usize];
        for x in [self, o] {
            for (e, c) in x.terms() {
                if e >= lo {
                    let i = (hi - e) as usize;
                    dense[i] = f.add(dense[i], c);
                }
            }
        }
        Self::from_dense(hi, dense, floor)
    }

    pub fn sub(&self, o: &Laurent, f: &Fq) -> Self {
        self.add(&o.neg(f), f)
    }

    pub fn mul(&self, o: &Laurent, f: &Fq) -> Self {
        if self.is_exact_zero() || o.is_exact_zero() {
            return Self::zero();
        }
        // The unknown tail of x*y sits below max(tx+fy, ty+fx, fx+fy-1).
        let mut floor: Option<i64> = None;
        let mut bump = |v: i64| floor = Some(floor.map_or(v, |f: i64| f.max(v)));
        if let (Some(t), Some(fy)) = (self.top(), o.floor) {
            bump(t + fy);
        }
        if let (Some(t), Some(fx)) = (o.top(), self.floor) {
            bump(t + fx);
        }
        if let (Some(fx), Some(fy)) = (self.floor, o.floor) {
            bump(fx + fy - 1);
        }
        if self.is_zero() || o.is_zero() {
            return Laurent { top: 0, coeffs: vec![], floor };
        }
        let hi = self.top + o.top;
        let mut lo = self.low() + o.low();
        if let Some(fl) = floor {
            lo = lo.max(fl);
        }
        if lo > hi {
            return Laurent { top: 0, coeffs: vec![], floor };
        }
        let len = (hi - lo + 1) as usize;
        let mut dense = vec![0; len];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 || i >= len {
                continue;
            }
            let lim = (len - i).min(o.coeffs.len());
            for (j, &b) in o.coeffs[..lim].iter().enumerate() {
                if b != 0 {
                    dense[i + j] = f.add(dense[i + j], f.mul(a, b));
                }
            }
        }
        Self::from_dense(hi, dense, floor)
    }

    pub fn mul_poly(&self, p: &Poly, f: &Fq) -> Self {
        self.mul(&Laurent::from_poly(p), f)
    }

    /// Multiplicative inverse by geometric expansion of the unit part.
    ///
    /// Exact non-monomial inputs are expanded down to exponent `-prec`.
    pub fn inv(&self, f: &Fq, prec: u32) -> Result<Self> {
        let Some(e) = self.top() else {
            return Err(match self.floor {
                Some(fl) => Error::PrecisionLoss { floor: fl },
                None => Error::DivisionByZero,
            });
        };
        let c_inv = f.inv(self.coeffs[0]).expect("leading coefficient is nonzero");
        if self.floor.is_none() && self.coeffs.len() == 1 {
            return Ok(Laurent::monomial(c_inv, -e));
        }
        let floor = match self.floor {
            Some(fl) => fl - 2 * e,
            None => (-(prec as i64)).min(-e),
        };
        let count = (-e - floor + 1) as usize;
        let u: Vec<Elem> = self.coeffs.iter().map(|&c| f.mul(c, c_inv)).collect();
        let mut y = vec![0; count];
        y[0] = 1;
        for k in 1..count {
            let mut acc = 0;
            for i in 1..=k.min(u.len() - 1) {
                if u[i] != 0 && y[k - i] != 0 {
                    acc = f.add(acc, f.mul(u[i], y[k - i]));
                }
            }
            y[k] = f.neg(acc);
        }
        for v in y.iter_mut() {
            *v = f.mul(*v, c_inv);
        }
        Ok(Self::from_dense(-e, y, Some(floor)))
    }

    /// Polynomial part (exponents >= 0); needs every such coefficient known.
    pub fn poly_part(&self) -> Result<Poly> {
        if let Some(fl) = self.floor {
            if fl > 0 {
                return Err(Error::PrecisionLoss { floor: fl });
            }
        }
        let Some(t) = self.top() else { return Ok(Poly::zero()) };
        if t < 0 {
            return Ok(Poly::zero());
        }
        Ok(Poly::from_coeffs((0..=t).map(|e| self.coeff(e).unwrap()).collect()))
    }

    /// Part with negative exponents, keeping the precision floor.
    pub fn frac_part(&self) -> Self {
        let Some(t) = self.top() else { return self.clone() };
        if t < 0 {
            return self.clone();
        }
        let dense: Vec<Elem> = (1..=-self.low())
            .map(|k| self.coeffs.get((t + k) as usize).copied().unwrap_or(0))
            .collect();
        Self::from_dense(-1, dense, self.floor)
    }

    /// Text form `q=<q>; <exp>:<coeff>,...` with `; floor=<f>` for inexact values.
    pub fn to_text(&self, f: &Fq) -> String {
        let terms: Vec<String> = self.terms().map(|(e, c)| format!("{e}:{c}")).collect();
        let mut s = format!("q={}; {}", f.q(), terms.join(","));
        if let Some(fl) = self.floor {
            s.push_str(&format!("; floor={fl}"));
        }
        s
    }

    /// Parses [`Laurent::to_text`] output, returning the field size as well.
    pub fn parse(s: &str) -> std::result::Result<(u32, Laurent), String> {
        let mut parts = s.split(';').map(str::trim);
        let q: u32 = parts
            .next()
            .and_then(|h| h.strip_prefix("q="))
            .and_then(|v| v.trim().parse().ok())
            .ok_or("expected `q=<int>` header")?;
        let f = Fq::new(q as u64).map_err(|e| e.to_string())?;
        let body = parts.next().unwrap_or("");
        let mut terms = Vec::new();
        for t in body.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (e, c) = t.split_once(':').ok_or_else(|| format!("bad term `{t}`"))?;
            let e: i64 = e.trim().parse().map_err(|_| format!("bad exponent in `{t}`"))?;
            let c: u32 = c.trim().parse().map_err(|_| format!("bad coefficient in `{t}`"))?;
            if c >= q {
                return Err(format!("coefficient {c} outside F_{q}"));
            }
            terms.push((e, c));
        }
        let floor = match parts.next() {
            None => None,
            Some(fl) => Some(
                fl.strip_prefix("floor=")
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| format!("bad floor `{fl}`"))?,
            ),
        };
        Ok((q, Laurent::from_terms(&terms, floor, &f)))
    }
}

/// Sup norm of a vector; any component that is zero to precision is an error
/// unless a strictly larger component decides the maximum.
pub fn vec_norm(v: &[Laurent]) -> Result<LogNorm> {
    let mut best = LogNorm::Zero;
    let mut unresolved: Option<i64> = None;
    for x in v {
        match x.norm() {
            Ok(n) => best = best.max(n),
            Err(Error::PrecisionLoss { floor }) => {
                unresolved = Some(unresolved.map_or(floor, |u: i64| u.max(floor)))
            }
            Err(e) => return Err(e),
        }
    }
    match unresolved {
        // the undecided component is at most q^(fl-1)
        Some(fl) if best > LogNorm::Exp(fl - 1) => Ok(best),
        Some(fl) => Err(Error::PrecisionLoss { floor: fl }),
        None => Ok(best),
    }
}
