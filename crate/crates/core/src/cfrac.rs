//! Continued fractions of Laurent series.
//!
//! The expansion of a truncated series alpha' with floor f is computed by the
//! Euclidean algorithm on the rational alpha' = A / X^s. A partial quotient
//! a_k of alpha' is also a partial quotient of every series agreeing with
//! alpha' above the floor exactly when 2 deg q_k <= -f, so only those terms
//! are reported.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::fq::Fq;
use crate::laurent::Laurent;
use crate::norm::LogNorm;
use crate::par;
use crate::poly::Poly;

/// Why an expansion stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// The value is rational and its expansion is complete.
    Finite,
    /// `max_terms` partial quotients were produced.
    MaxTerms,
    /// The next partial quotient is not determined by the known digits.
    Precision,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CFExpansion {
    /// a_0, a_1, ...; every entry is certified.
    pub partials: Vec<Poly>,
    /// Convergent numerators p_0, p_1, ...
    pub p: Vec<Poly>,
    /// Convergent denominators q_0 = 1, q_1, ...
    pub q: Vec<Poly>,
    pub source_floor: Option<i64>,
    pub stop: Stop,
}

impl CFExpansion {
    pub fn len(&self) -> usize {
        self.partials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partials.is_empty()
    }

    /// deg a_i
    pub fn pq_deg(&self, i: usize) -> usize {
        self.partials[i].deg().unwrap_or(0)
    }

    /// deg q_i
    pub fn q_deg(&self, i: usize) -> usize {
        self.q[i].deg().expect("denominators are nonzero")
    }

    /// Degrees of a_1, a_2, ...
    pub fn degrees(&self) -> Vec<usize> {
        (1..self.len()).map(|i| self.pq_deg(i)).collect()
    }

    /// Evaluates [a_0; a_1, ..., a_n] back to a Laurent series.
    pub fn recompose(&self, f: &Fq, prec: u32) -> Result<Laurent> {
        let n = self.len() - 1;
        let p = Laurent::from_poly(&self.p[n]);
        let q = Laurent::from_poly(&self.q[n]);
        Ok(p.mul(&q.inv(f, prec)?, f))
    }
}

fn push_convergent(cf: &mut CFExpansion, a: Poly, f: &Fq) {
    let k = cf.partials.len();
    let (p, q) = match k {
        0 => (a.clone(), Poly::one()),
        1 => (a.mul(&cf.p[0], f).add(&Poly::one(), f), a.clone()),
        _ => (
            a.mul(&cf.p[k - 1], f).add(&cf.p[k - 2], f),
            a.mul(&cf.q[k - 1], f).add(&cf.q[k - 2], f),
        ),
    };
    cf.partials.push(a);
    cf.p.push(p);
    cf.q.push(q);
}

/// Continued-fraction expansion with at most `max_terms` partial quotients
/// (a_0 included).
pub fn cf_expand(alpha: &Laurent, max_terms: usize, f: &Fq) -> Result<CFExpansion> {
    if alpha.floor().is_some_and(|fl| fl > 0) {
        return Err(Error::PrecisionExhausted);
    }
    // alpha' = num / X^s
    let low = alpha.terms().map(|(e, _)| e).min().unwrap_or(0);
    let s = match alpha.floor() {
        Some(fl) => (-fl).max(0),
        None => (-low).max(0),
    };
    let mut dense = vec![0; alpha.top().map_or(0, |t| (t + s + 1).max(0) as usize)];
    for (e, c) in alpha.terms() {
        if e + s >= 0 {
            dense[(e + s) as usize] = c;
        }
    }
    let mut num = Poly::from_coeffs(dense);
    let mut den = Poly::x_pow(s as usize);
    let budget = alpha.floor().map(|fl| -fl);

    let mut cf = CFExpansion {
        partials: Vec::new(),
        p: Vec::new(),
        q: Vec::new(),
        source_floor: alpha.floor(),
        stop: Stop::MaxTerms,
    };
    while cf.len() < max_terms {
        let (a, r) = num.divmod(&den, f)?;
        if !cf.is_empty() {
            let qdeg = cf.q_deg(cf.len() - 1) + a.deg().unwrap_or(0);
            if budget.is_some_and(|b| 2 * qdeg as i64 > b) {
                cf.stop = Stop::Precision;
                return Ok(cf);
            }
        }
        push_convergent(&mut cf, a, f);
        if r.is_zero() {
            cf.stop = if budget.is_some() { Stop::Precision } else { Stop::Finite };
            return Ok(cf);
        }
        num = den;
        den = r;
    }
    Ok(cf)
}

/// Expansion by repeated polynomial-part extraction and inversion of the
/// remainder in Laurent arithmetic. Slower; used to cross-check [`cf_expand`].
pub fn cf_expand_by_inversion(
    alpha: &Laurent,
    max_terms: usize,
    f: &Fq,
    prec: u32,
) -> Result<CFExpansion> {
    let mut cf = CFExpansion {
        partials: Vec::new(),
        p: Vec::new(),
        q: Vec::new(),
        source_floor: alpha.floor(),
        stop: Stop::MaxTerms,
    };
    let mut x = alpha.clone();
    while cf.len() < max_terms {
        let a = match x.poly_part() {
            Ok(a) => a,
            Err(_) if !cf.is_empty() => {
                cf.stop = Stop::Precision;
                return Ok(cf);
            }
            Err(_) => return Err(Error::PrecisionExhausted),
        };
        let r = x.sub(&Laurent::from_poly(&a), f);
        push_convergent(&mut cf, a, f);
        if r.is_zero() {
            cf.stop = if r.is_exact() { Stop::Finite } else { Stop::Precision };
            return Ok(cf);
        }
        x = r.inv(f, prec)?;
    }
    Ok(cf)
}

/// |alpha - p_i / q_i| computed by direct subtraction.
pub fn approx_quality(alpha: &Laurent, cf: &CFExpansion, i: usize, f: &Fq) -> Result<LogNorm> {
    if i >= cf.len() {
        return Err(Error::Dimension(format!("convergent {i} of {}", cf.len())));
    }
    let diff = alpha.mul_poly(&cf.q[i], f).sub(&Laurent::from_poly(&cf.p[i]), f);
    Ok(diff.norm()?.shift(-(cf.q_deg(i) as i64)))
}

/// p_i q_{i-1} - p_{i-1} q_i, which must be a nonzero constant.
pub fn determinant(cf: &CFExpansion, i: usize, f: &Fq) -> Poly {
    cf.p[i].mul(&cf.q[i - 1], f).sub(&cf.p[i - 1].mul(&cf.q[i], f), f)
}

/// Tally of partial-quotient degrees over Haar-random series.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub q: u32,
    pub samples: usize,
    /// counts[d] = number of certified a_i (i >= 1) with deg a_i = d.
    pub counts: BTreeMap<usize, u64>,
    pub total: u64,
    /// Terms requested but not certified at the sampling precision.
    pub uncertified: u64,
}

/// One chi-square test result.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub critical_99: f64,
}

impl ChiSquare {
    pub fn accepts(&self) -> bool {
        self.statistic <= self.critical_99
    }
}

/// P(deg a = d) = (q - 1) q^-d for Haar-random series.
pub fn expected_degree_prob(q: u32, d: usize) -> f64 {
    (q as f64 - 1.0) * (q as f64).powi(-(d as i32))
}

impl DegreeStats {
    pub fn freq(&self, d: usize) -> f64 {
        self.counts.get(&d).copied().unwrap_or(0) as f64 / self.total.max(1) as f64
    }

    /// Rows `(d, count, freq, expected)`.
    pub fn rows(&self) -> Vec<(usize, u64, f64, f64)> {
        let dmax = self.counts.keys().max().copied().unwrap_or(1);
        (1..=dmax)
            .map(|d| {
                let c = self.counts.get(&d).copied().unwrap_or(0);
                (d, c, self.freq(d), expected_degree_prob(self.q, d))
            })
            .collect()
    }

    /// Pearson test against the geometric law, pooling the tail once the
    /// expected count drops below 5.
    pub fn chi_square(&self) -> ChiSquare {
        let n = self.total as f64;
        let mut stat = 0.0;
        let mut bins = 0;
        let mut d = 1;
        loop {
            let e = n * expected_degree_prob(self.q, d);
            // tail mass from d+1 on is q^-d
            let tail = n * (self.q as f64).powi(-(d as i32));
            if e < 5.0 || tail < 5.0 {
                let e_tail = n * (self.q as f64).powi(-(d as i32 - 1));
                let o_tail: u64 = self.counts.range(d..).map(|(_, c)| c).sum();
                stat += (o_tail as f64 - e_tail).powi(2) / e_tail;
                bins += 1;
                break;
            }
            let o = self.counts.get(&d).copied().unwrap_or(0) as f64;
            stat += (o - e).powi(2) / e;
            bins += 1;
            d += 1;
        }
        let dof = bins - 1;
        let critical_99 = ChiSquared::new(dof.max(1) as f64).unwrap().inverse_cdf(0.99);
        ChiSquare { statistic: stat, dof, critical_99 }
    }
}

/// Draws `samples` Haar-random series in the unit ball at `precision` digits,
/// expands each to `terms` partial quotients after a_0, and tallies degrees.
pub fn pq_degree_stats(
    samples: usize,
    q: u32,
    terms: usize,
    seed: u64,
    precision: u32,
) -> Result<DegreeStats> {
    let f = Fq::new(q as u64)?;
    let per: Vec<Result<(Vec<usize>, u64)>> = par::map_indexed(samples, |i| {
        let mut rng = par::item_rng(seed, i as u64);
        let alpha = Laurent::random_unit_ball(&f, precision, &mut rng);
        let cf = cf_expand(&alpha, terms + 1, &f)?;
        let degs = cf.degrees();
        let missing = (terms - degs.len()) as u64;
        Ok((degs, missing))
    });
    let mut stats = DegreeStats { q, samples, counts: BTreeMap::new(), total: 0, uncertified: 0 };
    for r in per {
        let (degs, missing) = r?;
        for d in degs {
            *stats.counts.entry(d).or_default() += 1;
            stats.total += 1;
        }
        stats.uncertified += missing;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[u32]) -> Poly {
        Poly::from_coeffs(c.to_vec())
    }

    #[test]
    fn polynomial_has_single_term() {
        let f = Fq::new(3).unwrap();
        let p = poly(&[1, 2, 0, 1]);
        let cf = cf_expand(&Laurent::from_poly(&p), 10, &f).unwrap();
        assert_eq!(cf.partials, vec![p]);
        assert_eq!(cf.stop, Stop::Finite);
    }

    #[test]
    fn x_plus_inverse_x() {
        let f = Fq::new(2).unwrap();
        let alpha = Laurent::from_terms(&[(1, 1), (-1, 1)], None, &f);
        let cf = cf_expand(&alpha, 10, &f).unwrap();
        assert_eq!(cf.partials, vec![poly(&[0, 1]), poly(&[0, 1])]);
        assert_eq!(cf.recompose(&f, 32).unwrap(), alpha);
        // alpha - X = X^-1; deg q_0 + deg q_1 = 1
        assert_eq!(approx_quality(&alpha, &cf, 0, &f).unwrap(), LogNorm::Exp(-1));
    }

    #[test]
    fn inverse_of_x_plus_one() {
        let f = Fq::new(2).unwrap();
        let x1 = Laurent::from_poly(&poly(&[1, 1]));
        let alpha = x1.inv(&f, 60).unwrap();
        let cf = cf_expand(&alpha, 10, &f).unwrap();
        assert_eq!(cf.partials[..2], [Poly::zero(), poly(&[1, 1])]);
        let back = cf.recompose(&f, 60).unwrap();
        assert!(back.sub(&alpha, &f).is_zero());
    }

    #[test]
    fn polynomial_quality_is_exact_zero() {
        let f = Fq::new(5).unwrap();
        let a = Laurent::from_poly(&poly(&[2, 3]));
        let cf = cf_expand(&a, 4, &f).unwrap();
        assert_eq!(approx_quality(&a, &cf, 0, &f).unwrap(), LogNorm::Zero);
    }

    #[test]
    fn exhausted_before_first_term() {
        let f = Fq::new(2).unwrap();
        let a = Laurent::monomial(1, 5).truncate(2);
        assert_eq!(cf_expand(&a, 4, &f), Err(Error::PrecisionExhausted));
        assert_eq!(cf_expand_by_inversion(&a, 4, &f, 32), Err(Error::PrecisionExhausted));
    }

    #[test]
    fn chi_square_rejects_wrong_law() {
        let mut counts = BTreeMap::new();
        counts.insert(1, 4000);
        counts.insert(2, 4000);
        counts.insert(3, 2000);
        let s = DegreeStats { q: 2, samples: 1, counts, total: 10000, uncertified: 0 };
        assert!(!s.chi_square().accepts());
    }
}
