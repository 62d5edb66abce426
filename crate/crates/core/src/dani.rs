//! Dani correspondence between ψ-approximation of a matrix A and cusp
//! excursions of the lattice Λ_A under the diagonal flow.
//!
//! Λ_A = {(Aq + p, q) : p ∈ F_q[X]^m, q ∈ F_q[X]^n}. With k = deg q and
//! |Aq + p| = q^-j, the flowed vector g_t(Aq + p, q) has norm at most q^-r
//! exactly when k ≤ mt − r and j ≥ nt + r ("box(t, r)").

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::fq::{Elem, Fq};
use crate::laurent::Laurent;
use crate::lattice::{apply_flow, FlowSpec, PolyLattice};
use crate::par;
use crate::poly::Poly;

const EPS: f64 = 1e-9;

/// Shape of ψ.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiKind {
    /// ψ(x) = x^-τ
    PowerLaw(Ratio<i64>),
    /// ψ(x) = x^-τ (log_q x)^-c, with log_q x read as 1 below x = q.
    PowerLog { tau: Ratio<i64>, c: f64, q: u32 },
    /// log_q ψ(q^j) for j = 0, 1, ...; constant past the end.
    Table(Vec<i64>),
}

/// ψ in log coordinates: j ↦ log_q ψ(q^j) + shift.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSpec {
    pub kind: PsiKind,
    pub shift: i64,
}

impl PsiSpec {
    pub fn power_law(tau: Ratio<i64>) -> Self {
        PsiSpec { kind: PsiKind::PowerLaw(tau), shift: 0 }
    }

    pub fn power_int(tau: i64) -> Self {
        Self::power_law(Ratio::from_integer(tau))
    }

    pub fn power_log(tau: Ratio<i64>, c: f64, q: u32) -> Self {
        PsiSpec { kind: PsiKind::PowerLog { tau, c, q }, shift: 0 }
    }

    pub fn table(values: Vec<i64>) -> Result<Self> {
        if values.is_empty() || values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InsufficientData("psi table must be nonempty and non-increasing".into()));
        }
        Ok(PsiSpec { kind: PsiKind::Table(values), shift: 0 })
    }

    /// ψ multiplied by q^s.
    pub fn shifted(&self, s: i64) -> Self {
        PsiSpec { kind: self.kind.clone(), shift: self.shift + s }
    }

    /// Parses `power:<tau>`, `powerlog:<tau>:<c>` or `table:<v0>,<v1>,...`;
    /// an optional `@<shift>` suffix adds a constant exponent. Logarithms
    /// are taken to base `q`.
    pub fn parse(s: &str, q: u32) -> std::result::Result<Self, String> {
        let (body, shift) = match s.split_once('@') {
            Some((b, sh)) => (b, sh.trim().parse::<i64>().map_err(|_| format!("bad shift in `{s}`"))?),
            None => (s, 0),
        };
        let rat = |t: &str| -> std::result::Result<Ratio<i64>, String> {
            let t = t.trim();
            match t.split_once('/') {
                Some((a, b)) => {
                    let a: i64 = a.parse().map_err(|_| format!("bad rational `{t}`"))?;
                    let b: i64 = b.parse().map_err(|_| format!("bad rational `{t}`"))?;
                    if b == 0 {
                        return Err(format!("zero denominator in `{t}`"));
                    }
                    Ok(Ratio::new(a, b))
                }
                None => t.parse::<i64>().map(Ratio::from_integer).map_err(|_| format!("bad rational `{t}`")),
            }
        };
        let parts: Vec<&str> = body.trim().split(':').collect();
        let mut spec = match parts.as_slice() {
            ["power", t] => PsiSpec::power_law(rat(t)?),
            ["powerlog", t, c] => {
                let c: f64 = c.trim().parse().map_err(|_| format!("bad log exponent `{c}`"))?;
                PsiSpec::power_log(rat(t)?, c, q)
            }
            ["table", v] => {
                let vals: std::result::Result<Vec<i64>, _> = v.split(',').map(|x| x.trim().parse::<i64>()).collect();
                PsiSpec::table(vals.map_err(|_| format!("bad table `{v}`"))?).map_err(|e| e.to_string())?
            }
            _ => return Err(format!("unknown psi `{s}`")),
        };
        if let PsiKind::PowerLaw(t) | PsiKind::PowerLog { tau: t, .. } = &spec.kind {
            if t.is_negative() {
                return Err("psi must be non-increasing (tau >= 0)".into());
            }
        }
        spec.shift = shift;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let rat = |r: &Ratio<i64>| {
            if r.is_integer() {
                r.numer().to_string()
            } else {
                format!("{}/{}", r.numer(), r.denom())
            }
        };
        let body = match &self.kind {
            PsiKind::PowerLaw(t) => format!("power:{}", rat(t)),
            PsiKind::PowerLog { tau, c, .. } => format!("powerlog:{}:{}", rat(tau), c),
            PsiKind::Table(v) => {
                format!("table:{}", v.iter().map(i64::to_string).collect::<Vec<_>>().join(","))
            }
        };
        if self.shift == 0 {
            body
        } else {
            format!("{body}@{}", self.shift)
        }
    }

    /// log_q ψ(q^j) as a float.
    pub fn log_value(&self, j: i64) -> f64 {
        let j = j.max(0);
        let base = match &self.kind {
            PsiKind::PowerLaw(t) => -(t * j).to_f64().unwrap(),
            PsiKind::PowerLog { tau, c, q } => {
                -(tau * j).to_f64().unwrap() - c * (j.max(1) as f64).ln() / (*q as f64).ln()
            }
            PsiKind::Table(v) => v[(j as usize).min(v.len() - 1)] as f64,
        };
        base + self.shift as f64
    }

    /// Compares log_q ψ(q^j) with the integer x.
    pub fn cmp_int(&self, j: i64, x: i64) -> Ordering {
        let j = j.max(0);
        match &self.kind {
            PsiKind::PowerLaw(t) => (-(t * j) + self.shift).cmp(&Ratio::from_integer(x)),
            PsiKind::Table(v) => (v[(j as usize).min(v.len() - 1)] + self.shift).cmp(&x),
            PsiKind::PowerLog { .. } => {
                let d = self.log_value(j) - x as f64;
                if d.abs() < EPS {
                    Ordering::Equal
                } else if d < 0.0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
        }
    }

    /// Whether |Aq+p| = q^-j with deg q = k solves |Aq+p|^m < ψ(|q|^n).
    pub fn solves(&self, m: usize, n: usize, k: i64, j: i64) -> bool {
        self.cmp_int(n as i64 * k, -(m as i64) * j) == Ordering::Greater
    }

    /// Smallest j for which degree-k vectors solve.
    pub fn quality_threshold(&self, m: usize, n: usize, k: i64) -> i64 {
        let guess = (-self.log_value(n as i64 * k) / m as f64).floor() as i64;
        let mut j = guess - 2;
        while j > i64::MIN / 4 && self.solves(m, n, k, j - 1) {
            j -= 8;
        }
        while !self.solves(m, n, k, j) {
            j += 1;
        }
        j
    }
}

fn rt_holds(psi: &PsiSpec, m: i64, n: i64, t: i64, r: i64) -> bool {
    psi.cmp_int(n * (m * t - r), -m * (n * t + r)) != Ordering::Greater
}

/// The extremal integer r ≤ mt with log_q ψ(q^(n(mt−r))) ≤ −m(nt+r), which
/// may be negative; `None` if even the lowest candidate fails.
pub fn solve_rt_raw(psi: &PsiSpec, m: usize, n: usize, t: i64) -> Option<i64> {
    let (m, n) = (m as i64, n as i64);
    let mut lo = -(m + n) * t.max(1) - 64;
    let mut hi = m * t;
    if !rt_holds(psi, m, n, t, lo) {
        return None;
    }
    if rt_holds(psi, m, n, t, hi) {
        return Some(hi);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if rt_holds(psi, m, n, t, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Cusp depth r(t) matched to ψ at time t; errors where it is negative.
pub fn solve_rt(psi: &PsiSpec, m: usize, n: usize, t: i64) -> Result<i64> {
    match solve_rt_raw(psi, m, n, t) {
        Some(r) if r >= 0 => Ok(r),
        _ => Err(Error::RtUndefined { t }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Convergent => "convergent",
            Verdict::Divergent => "divergent",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeriesReport {
    /// Σ_t q^(−(m+n) r(t))
    pub lattice: Verdict,
    /// Σ_j ψ(q^j) q^j
    pub integral: Verdict,
    pub lattice_exponent: f64,
    pub integral_exponent: f64,
    pub lattice_partial: Vec<f64>,
    pub integral_partial: Vec<f64>,
    pub horizon: i64,
}

impl SeriesReport {
    pub fn agree(&self) -> bool {
        self.lattice == self.integral
    }
}

fn classify(s: f64) -> Verdict {
    if s > 1.05 {
        Verdict::Convergent
    } else if s < 0.95 {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    }
}

/// Classifies both series by comparison with Σ x^-s: the effective
/// exponent s = −ln(term)/ln(index) is read at a far horizon.
pub fn series_test(psi: &PsiSpec, m: usize, n: usize, q: u32) -> SeriesReport {
    let lnq = (q as f64).ln();
    let horizon: i64 = 1 << 30;
    let lat_term = |t: i64| match solve_rt_raw(psi, m, n, t) {
        Some(r) => -((m + n) as f64) * r as f64,
        None => f64::INFINITY,
    };
    let int_term = |j: i64| psi.log_value(j) + j as f64;
    let lh = lat_term(horizon);
    let ih = int_term(horizon);
    let ln_h = (horizon as f64).ln();
    let lattice_exponent = -lh * lnq / ln_h;
    let integral_exponent = -ih * lnq / ln_h;
    let partial = |term: &dyn Fn(i64) -> f64| {
        let mut acc = 0.0;
        (1..=64)
            .map(|i| {
                acc += (term(i) * lnq).exp();
                acc
            })
            .collect::<Vec<f64>>()
    };
    SeriesReport {
        lattice: classify(lattice_exponent),
        integral: classify(integral_exponent),
        lattice_exponent,
        integral_exponent,
        lattice_partial: partial(&lat_term),
        integral_partial: partial(&int_term),
        horizon,
    }
}

/// Λ_A together with its source data.
#[derive(Debug, Clone)]
pub struct DaniLattice {
    a: Vec<Vec<Laurent>>,
    m: usize,
    n: usize,
    lattice: PolyLattice,
    horizon: Option<i64>,
}

impl DaniLattice {
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn matrix(&self) -> &[Vec<Laurent>] {
        &self.a
    }
    pub fn lattice(&self) -> &PolyLattice {
        &self.lattice
    }
    /// Largest t at which truncation cannot change δ(g_t Λ_A); `None` for exact A.
    pub fn horizon(&self) -> Option<i64> {
        self.horizon
    }

    pub fn flowed(&self, t: i64) -> Result<PolyLattice> {
        if let Some(h) = self.horizon {
            if t > h {
                return Err(Error::BeyondHorizon { t, horizon: h });
            }
        }
        apply_flow(&self.lattice, FlowSpec::new(self.m, self.n, t))
    }

    /// Δ_t = −log_q δ(g_t Λ_A)
    pub fn depth(&self, t: i64) -> Result<i64> {
        Ok(-self.flowed(t)?.delta().exp().unwrap())
    }
}

fn check_shape(a: &[Vec<Laurent>]) -> Result<(usize, usize)> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    if m == 0 || n == 0 || a.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("A must be a nonempty m x n matrix".into()));
    }
    Ok((m, n))
}

/// The known digits of x as an exact series.
fn known_part(x: &Laurent, f: &Fq) -> Laurent {
    let terms: Vec<(i64, Elem)> = x.terms().collect();
    Laurent::from_terms(&terms, None, f)
}

/// Builds Λ_A. Inexact entries known down to X^-N are truncated there;
/// the flow is then certified up to t = N/(m+n).
pub fn lattice_of(a: &[Vec<Laurent>], f: &Fq) -> Result<DaniLattice> {
    let (m, n) = check_shape(a)?;
    let floor = a.iter().flatten().filter_map(Laurent::floor).max();
    let trunc: Vec<Vec<Laurent>> = a.iter().map(|r| r.iter().map(|x| known_part(x, f)).collect()).collect();
    let horizon = match floor {
        Some(fl) if fl > 0 => return Err(Error::PrecisionLoss { floor: fl }),
        Some(fl) => Some(-fl / (m + n) as i64),
        None => None,
    };
    let d = m + n;
    let mut rows: Vec<Vec<Laurent>> = Vec::with_capacity(d);
    for i in 0..m {
        rows.push((0..d).map(|c| if c == i { Laurent::one() } else { Laurent::zero() }).collect());
    }
    for j in 0..n {
        let mut row: Vec<Laurent> = (0..m).map(|i| trunc[i][j].clone()).collect();
        row.extend((0..n).map(|c| if c == j { Laurent::one() } else { Laurent::zero() }));
        rows.push(row);
    }
    let lattice = PolyLattice::from_laurent_rows(&rows, f)?;
    Ok(DaniLattice { a: a.to_vec(), m, n, lattice, horizon })
}

/// Haar-random A with entries in the unit ball, known to `precision` digits.
pub fn random_matrix<R: rand::Rng + ?Sized>(f: &Fq, m: usize, n: usize, precision: u32, rng: &mut R) -> Vec<Vec<Laurent>> {
    (0..m).map(|_| (0..n).map(|_| Laurent::random_unit_ball(f, precision, rng)).collect()).collect()
}

/// Δ_t(g_t Λ_A) for `count` Haar-random A, each known to exactly the
/// precision the flow at time t needs.
pub fn flowed_depth_samples(m: usize, n: usize, t: i64, count: usize, q: u32, seed: u64) -> Result<Vec<i64>> {
    flowed_depth_samples_at(m, n, t, count, q, seed, ((m + n) as i64 * t).max(1) as u32)
}

/// As [`flowed_depth_samples`] with an explicit digit count for A.
pub fn flowed_depth_samples_at(
    m: usize,
    n: usize,
    t: i64,
    count: usize,
    q: u32,
    seed: u64,
    precision: u32,
) -> Result<Vec<i64>> {
    let f = Fq::new(q as u64)?;
    par::map_indexed(count, |i| {
        let mut rng = par::item_rng(seed, i as u64);
        let a = random_matrix(&f, m, n, precision, &mut rng);
        lattice_of(&a, &f)?.depth(t)
    })
    .into_iter()
    .collect()
}

/// How well a solution approximates: |Aq+p| = q^-j.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quality {
    Exact(i64),
    /// Every known digit vanishes; j is at least this.
    AtLeast(i64),
    /// Aq + p = 0.
    Infinite,
}

impl Quality {
    pub fn lower_bound(self) -> i64 {
        match self {
            Quality::Exact(j) | Quality::AtLeast(j) => j,
            Quality::Infinite => i64::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub p: Vec<Poly>,
    pub q: Vec<Poly>,
    pub deg: i64,
    pub quality: Quality,
}

/// Fractional digits of A: digit(i, j, u) is the X^-u coefficient of A_ij.
struct FracDigits {
    m: usize,
    n: usize,
    digits: Vec<Vec<Vec<Elem>>>,
    /// Digits are known for u ≤ known; `None` if every digit is known.
    known: Option<i64>,
}

impl FracDigits {
    fn new(a: &[Vec<Laurent>]) -> Result<Self> {
        let (m, n) = check_shape(a)?;
        let known = a.iter().flatten().filter_map(Laurent::floor).max().map(|fl| -fl);
        let digits = a
            .iter()
            .map(|r| {
                r.iter()
                    .map(|x| {
                        let low = x.terms().map(|t| t.0).min().unwrap_or(0).min(0);
                        let len = known.unwrap_or(-low).max(0) as usize;
                        (1..=len).map(|u| x.coeff(-(u as i64)).unwrap_or(0)).collect()
                    })
                    .collect()
            })
            .collect();
        Ok(FracDigits { m, n, digits, known })
    }

    fn digit(&self, i: usize, j: usize, u: i64) -> Elem {
        self.digits[i][j].get((u - 1) as usize).copied().unwrap_or(0)
    }

    /// Whether the X^-e digit of (Aq)_i is certified for deg q ≤ k.
    fn certified(&self, e: i64, k: i64) -> bool {
        self.known.is_none_or(|kn| e + k <= kn)
    }

    /// X^-e digit of (Aq)_i; coefficient vectors are low-to-high.
    fn frac_digit(&self, i: usize, q: &[Vec<Elem>], e: i64, f: &Fq) -> Elem {
        let mut acc = 0;
        for (j, c) in q.iter().enumerate() {
            for (s, &cs) in c.iter().enumerate() {
                if cs != 0 {
                    acc = f.add(acc, f.mul(cs, self.digit(i, j, e + s as i64)));
                }
            }
        }
        acc
    }

    /// Exhaustion bound for digit scans.
    fn scan_limit(&self, k: i64) -> i64 {
        match self.known {
            Some(kn) => kn - k,
            None => self.digits.iter().flatten().map(|d| d.len() as i64).max().unwrap_or(0) + 1,
        }
    }
}

/// Every ψ-solution (p, q) with 0 < deg q ≤ D... precisely: nonzero q of
/// degree at most D, p the polynomial-part minimizer. Exhaustive.
pub fn brute_force_solutions(a: &[Vec<Laurent>], psi: &PsiSpec, d: usize, f: &Fq) -> Result<Vec<Solution>> {
    let fd = FracDigits::new(a)?;
    let (m, n) = (fd.m, fd.n);
    let qq = f.q() as usize;
    let total_digits = n * (d + 1);
    let mut counter = vec![0usize; total_digits];
    let mut out = Vec::new();
    let thresholds: Vec<i64> = (0..=d as i64).map(|k| psi.quality_threshold(m, n, k)).collect();
    loop {
        let mut i = 0;
        while i < total_digits {
            counter[i] += 1;
            if counter[i] < qq {
                break;
            }
            counter[i] = 0;
            i += 1;
        }
        if i == total_digits {
            break;
        }
        let coeffs: Vec<Vec<Elem>> = (0..n)
            .map(|j| counter[j * (d + 1)..(j + 1) * (d + 1)].iter().map(|&x| x as Elem).collect())
            .collect();
        let k = coeffs
            .iter()
            .filter_map(|c| c.iter().rposition(|&x| x != 0))
            .max()
            .unwrap() as i64;
        let need = thresholds[k as usize];
        let mut rejected = false;
        for e in 1..need {
            if !fd.certified(e, k) {
                return Err(Error::PrecisionLoss { floor: -(fd.known.unwrap_or(0)) });
            }
            if (0..m).any(|i| fd.frac_digit(i, &coeffs, e, f) != 0) {
                rejected = true;
                break;
            }
        }
        if rejected {
            continue;
        }
        let limit = fd.scan_limit(k);
        let mut e = need.max(1);
        let quality = loop {
            if e > limit {
                break if fd.known.is_some() { Quality::AtLeast(e) } else { Quality::Infinite };
            }
            if (0..m).any(|i| fd.frac_digit(i, &coeffs, e, f) != 0) {
                break Quality::Exact(e);
            }
            e += 1;
        };
        let q: Vec<Poly> = coeffs.into_iter().map(Poly::from_coeffs).collect();
        let p = (0..m)
            .map(|i| {
                let mut acc = Laurent::zero();
                for j in 0..n {
                    acc = acc.add(&known_part(&a[i][j], f).mul_poly(&q[j], f), f);
                }
                acc.poly_part().map(|x| x.neg(f))
            })
            .collect::<Result<Vec<Poly>>>()?;
        out.push(Solution { p, q, deg: k, quality });
    }
    Ok(out)
}

fn rank(mut rows: Vec<Vec<Elem>>, f: &Fq) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][c] != 0) else { continue };
        rows.swap(r, p);
        let inv = f.inv(rows[r][c]).unwrap();
        let pivot: Vec<Elem> = rows[r].iter().map(|&x| f.mul(x, inv)).collect();
        for row in rows.iter_mut().skip(r + 1) {
            let h = row[c];
            if h != 0 {
                for (x, &y) in row.iter_mut().zip(&pivot).skip(c) {
                    *x = f.sub(*x, f.mul(h, y));
                }
            }
        }
        rows[r] = pivot;
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

/// For each k ≤ D, the log_q-count structure of solutions of degree exactly k:
/// returns (nullity with degree ≤ k, nullity with degree ≤ k−1) of the
/// linear system "digits X^-1..X^-(J(k)−1) of Aq vanish". Solutions of
/// degree k number q^a − q^b.
pub fn solution_kernel_dims(a: &[Vec<Laurent>], psi: &PsiSpec, d: usize, f: &Fq) -> Result<Vec<(usize, usize)>> {
    let fd = FracDigits::new(a)?;
    let (m, n) = (fd.m, fd.n);
    let mut out = Vec::with_capacity(d + 1);
    for k in 0..=d as i64 {
        let need = psi.quality_threshold(m, n, k).max(1);
        if !fd.certified(need - 1, k) {
            return Err(Error::PrecisionLoss { floor: -(fd.known.unwrap_or(0)) });
        }
        let build = |deg: i64| -> Vec<Vec<Elem>> {
            let mut rows = Vec::new();
            for i in 0..m {
                for e in 1..need {
                    let mut row = Vec::with_capacity(n * (deg + 1) as usize);
                    for j in 0..n {
                        for s in 0..=deg {
                            row.push(fd.digit(i, j, e + s));
                        }
                    }
                    rows.push(row);
                }
            }
            rows
        };
        let unknowns = n * (k as usize + 1);
        let lower_unknowns = n * k as usize;
        let full = unknowns - if need > 1 { rank(build(k), f) } else { 0 };
        let lower = if k == 0 {
            0
        } else {
            lower_unknowns - if need > 1 { rank(build(k - 1), f) } else { 0 }
        };
        out.push((full, lower));
    }
    Ok(out)
}

/// Largest solution degree ≤ D, if any.
pub fn max_solution_degree(a: &[Vec<Laurent>], psi: &PsiSpec, d: usize, f: &Fq) -> Result<Option<usize>> {
    Ok(solution_kernel_dims(a, psi, d, f)?.iter().rposition(|&(x, y)| x > y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub t: i64,
    pub r: i64,
    pub depth: i64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcursionTrace {
    pub records: Vec<TraceRecord>,
}

impl ExcursionTrace {
    pub fn hits(&self) -> usize {
        self.records.iter().filter(|r| r.hit).count()
    }

    pub fn write_csv(&self, out: &mut String) {
        out.push_str("t,r_t,delta_exp,hit\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", r.t, r.r, r.depth, r.hit as u8);
        }
    }
}

/// Δ_t along the orbit with the hit flags Δ_t ≥ r(t).
pub fn dynamical_test(dl: &DaniLattice, psi: &PsiSpec, ts: RangeInclusive<i64>) -> Result<ExcursionTrace> {
    let mut records = Vec::new();
    for t in ts {
        let r = solve_rt(psi, dl.m, dl.n, t)?;
        let depth = dl.depth(t)?;
        records.push(TraceRecord { t, r, depth, hit: depth >= r });
    }
    Ok(ExcursionTrace { records })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorrespondenceReport {
    pub t_max: i64,
    pub solutions: usize,
    pub hits: usize,
    /// Δ_t ≥ r(t)+1 without a solution in box(t, r(t)+1).
    pub deep_hit_unmatched: usize,
    /// A solution in box(t, r(t)) while Δ_t < r(t).
    pub solution_unmatched: usize,
    /// A solution of positive degree lying in no box(t, r(t)−1) with Δ_t ≥ r(t)−1.
    pub solution_uncovered: usize,
}

impl CorrespondenceReport {
    pub fn violations(&self) -> usize {
        self.deep_hit_unmatched + self.solution_unmatched + self.solution_uncovered
    }
}

/// Cross-validates brute-force ψ-solutions of degree ≤ D against the cusp
/// excursions of Λ_A, allowing a one-unit band in the depth exponent.
pub fn correspondence(a: &[Vec<Laurent>], psi: &PsiSpec, d: usize, f: &Fq) -> Result<CorrespondenceReport> {
    let dl = lattice_of(a, f)?;
    let (m, n) = (dl.m as i64, dl.n as i64);
    let mut t_max = -1;
    let mut t = 0;
    loop {
        if dl.horizon.is_some_and(|h| t > h) {
            break;
        }
        let r = solve_rt(psi, dl.m, dl.n, t)?;
        if m * t - r > d as i64 + 1 {
            break;
        }
        t_max = t;
        t += 1;
    }
    if t_max < 0 {
        return Err(Error::InsufficientData("no flow time fits the degree bound".into()));
    }
    let trace = dynamical_test(&dl, psi, 0..=t_max)?;
    let sols = brute_force_solutions(a, psi, d, f)?;
    let in_box = |s: &Solution, t: i64, r: i64| s.deg <= m * t - r && s.quality.lower_bound() >= n * t + r;
    let mut rep = CorrespondenceReport { t_max, solutions: sols.len(), hits: trace.hits(), ..Default::default() };
    for rec in &trace.records {
        if rec.depth > rec.r && !sols.iter().any(|s| in_box(s, rec.t, rec.r + 1)) {
            rep.deep_hit_unmatched += 1;
        }
        if rec.depth < rec.r && sols.iter().any(|s| in_box(s, rec.t, rec.r)) {
            rep.solution_unmatched += 1;
        }
    }
    for s in sols.iter().filter(|s| s.deg >= 1) {
        let covered = trace.records.iter().any(|rec| in_box(s, rec.t, rec.r - 1) && rec.depth >= rec.r - 1);
        if !covered {
            rep.solution_uncovered += 1;
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct KgReport {
    pub samples: usize,
    pub degree_bound: usize,
    /// Per sample: largest solution degree ≤ D.
    pub max_degree: Vec<Option<usize>>,
    /// Per sample: hits of the excursion trace over t ∈ [1, trace_horizon].
    pub trace_hits: Vec<usize>,
    pub trace_horizon: i64,
    pub series: SeriesReport,
}

impl KgReport {
    /// Fraction of samples with a solution of degree in (lo, D].
    pub fn fraction_above(&self, lo: usize) -> f64 {
        self.count_above(lo) as f64 / self.samples as f64
    }

    pub fn count_above(&self, lo: usize) -> usize {
        self.max_degree.iter().filter(|d| d.is_some_and(|d| d > lo)).count()
    }

    pub fn mean_hits(&self) -> f64 {
        self.trace_hits.iter().sum::<usize>() as f64 / self.samples.max(1) as f64
    }

    /// Least-squares decay factor of the fraction with a solution beyond D0,
    /// over D0 in `range` with at least `min_count` such samples.
    pub fn decay_factor(&self, range: RangeInclusive<usize>, min_count: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = range
            .filter_map(|d0| {
                let c = self.count_above(d0);
                (c >= min_count).then(|| (d0 as f64, (c as f64).ln()))
            })
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some((-sxy / sxx).exp())
    }
}

/// Wilson score interval at z = 2.58 (99%).
pub fn wilson_interval(successes: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let z = 2.576f64;
    let nf = total as f64;
    let p = successes as f64 / nf;
    let den = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy)]
pub struct KgParams {
    pub m: usize,
    pub n: usize,
    pub samples: usize,
    pub degree_bound: usize,
    pub seed: u64,
}

/// Digits of A sampled by [`kg_experiment`] for degree bound d.
pub fn kg_precision(psi: &PsiSpec, m: usize, n: usize, d: usize) -> u32 {
    let top = psi.quality_threshold(m, n, d as i64).max(1);
    (top + d as i64 + 8).max(2 * (m + n) as i64 * (d as i64 + 2)) as u32
}

/// Samples Haar-random A and records solution degrees and cusp hits.
/// Sample i draws A from `par::item_rng(seed, i)`.
pub fn kg_experiment(psi: &PsiSpec, params: KgParams, f: &Fq) -> Result<KgReport> {
    let KgParams { m, n, samples, degree_bound: d, seed } = params;
    let precision = kg_precision(psi, m, n, d);
    let trace_horizon = precision as i64 / (m + n) as i64;
    let per_sample = par::map_indexed(samples, |i| -> Result<(Option<usize>, usize)> {
        let mut rng = par::item_rng(seed, i as u64);
        let a = random_matrix(f, m, n, precision, &mut rng);
        let maxdeg = max_solution_degree(&a, psi, d, f)?;
        let dl = lattice_of(&a, f)?;
        let mut hits = 0;
        for t in 1..=trace_horizon {
            match solve_rt(psi, m, n, t) {
                Ok(r) => hits += (dl.depth(t)? >= r) as usize,
                Err(Error::RtUndefined { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok((maxdeg, hits))
    });
    let mut max_degree = Vec::with_capacity(samples);
    let mut trace_hits = Vec::with_capacity(samples);
    for r in per_sample {
        let (a, b) = r?;
        max_degree.push(a);
        trace_hits.push(b);
    }
    Ok(KgReport {
        samples,
        degree_bound: d,
        max_degree,
        trace_hits,
        trace_horizon,
        series: series_test(psi, m, n, f.q()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::LogNorm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn a11(x: Laurent) -> Vec<Vec<Laurent>> {
        vec![vec![x]]
    }

    #[test]
    fn rt_power_laws() {
        let one = PsiSpec::power_int(1);
        let three = PsiSpec::power_int(3);
        for t in 0..200 {
            assert_eq!(solve_rt(&one, 1, 1, t).unwrap(), 0);
            assert_eq!(solve_rt(&three, 1, 1, t).unwrap(), t / 2);
        }
    }

    #[test]
    fn rt_closed_form_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        use rand::Rng;
        for _ in 0..1000 {
            let tau = Ratio::new(rng.gen_range(1..40), rng.gen_range(1..10));
            let (m, n) = (rng.gen_range(1..4usize), rng.gen_range(1..4usize));
            let psi = PsiSpec::power_law(tau);
            let mut prev = -1;
            for t in 0..30 {
                let r = solve_rt_raw(&psi, m, n, t).unwrap();
                let (mi, ni) = (m as i64, n as i64);
                let exact = (Ratio::from_integer(mi * ni * t) * (tau - 1)) / (Ratio::from_integer(mi) + tau * ni);
                assert_eq!(r, exact.floor().to_integer());
                if tau >= Ratio::from_integer(1) {
                    assert!(r >= prev);
                    prev = r;
                }
            }
        }
    }

    #[test]
    fn rt_undefined_below_critical() {
        let psi = PsiSpec::power_law(Ratio::new(1, 2));
        assert!(matches!(solve_rt(&psi, 1, 1, 10), Err(Error::RtUndefined { t: 10 })));
        assert_eq!(solve_rt(&psi, 1, 1, 0).unwrap(), 0);
    }

    #[test]
    fn series_verdicts() {
        let s = series_test(&PsiSpec::power_int(1), 1, 1, 2);
        assert_eq!((s.lattice, s.integral), (Verdict::Divergent, Verdict::Divergent));
        let s = series_test(&PsiSpec::power_int(3), 1, 1, 2);
        assert_eq!((s.lattice, s.integral), (Verdict::Convergent, Verdict::Convergent));
        let s = series_test(&PsiSpec::power_log(Ratio::from_integer(1), 2.0, 2), 1, 1, 2);
        assert_eq!((s.lattice, s.integral), (Verdict::Convergent, Verdict::Convergent));
        let s = series_test(&PsiSpec::power_law(Ratio::new(1, 2)), 2, 1, 3);
        assert_eq!((s.lattice, s.integral), (Verdict::Divergent, Verdict::Divergent));
    }

    #[test]
    fn psi_text_round_trip() {
        for s in ["power:3", "power:3/2@-1", "powerlog:1:2", "table:0,-1,-3"] {
            assert_eq!(PsiSpec::parse(s, 2).unwrap().to_text(), s);
        }
        assert!(PsiSpec::parse("table:0,1", 2).is_err());
        assert!(PsiSpec::parse("power:-1", 2).is_err());
        assert!(PsiSpec::parse("wave:1", 2).is_err());
    }

    #[test]
    fn shift_moves_threshold_by_one() {
        let psi = PsiSpec::power_int(2);
        for (m, n) in [(1, 1), (2, 1), (1, 3)] {
            for k in 0..20 {
                let a = psi.quality_threshold(m, n, k);
                let b = psi.shifted(-(m as i64)).quality_threshold(m, n, k);
                assert_eq!(b, a + 1);
            }
        }
    }

    #[test]
    fn zero_matrix_is_standard() {
        let f = Fq::new(3).unwrap();
        let dl = lattice_of(&[vec![Laurent::zero(), Laurent::zero()]], &f).unwrap();
        assert_eq!(dl.lattice().delta(), LogNorm::Exp(0));
        assert_eq!(dl.horizon(), None);
        // A = 0: δ(g_t Λ) = q^(-min(n,m) t)... here m=1, n=2: q^(-t)
        for t in 0..10 {
            assert_eq!(dl.depth(t).unwrap(), t);
        }
    }

    #[test]
    fn polynomial_matrix_is_standard() {
        let f = Fq::new(2).unwrap();
        let a = Laurent::from_poly(&Poly::from_coeffs(vec![1, 1, 0, 1]));
        assert_eq!(lattice_of(&a11(a), &f).unwrap().lattice().delta(), LogNorm::Exp(0));
    }

    #[test]
    fn inverse_x_drops_into_cusp() {
        let f = Fq::new(2).unwrap();
        let dl = lattice_of(&a11(Laurent::monomial(1, -1)), &f).unwrap();
        assert_eq!(dl.depth(0).unwrap(), 0);
        assert_eq!(dl.depth(1).unwrap(), 0);
        for t in 2..12 {
            assert_eq!(dl.depth(t).unwrap(), t - 1);
        }
    }

    #[test]
    fn horizon_guard() {
        let f = Fq::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&f, 1, 1, 20, &mut rng);
        let dl = lattice_of(&a, &f).unwrap();
        assert_eq!(dl.horizon(), Some(10));
        assert!(dl.depth(10).is_ok());
        assert!(matches!(dl.depth(11), Err(Error::BeyondHorizon { .. })));
    }

    #[test]
    fn zero_matrix_solutions() {
        let f = Fq::new(2).unwrap();
        let sols = brute_force_solutions(&a11(Laurent::zero()), &PsiSpec::power_int(2), 3, &f).unwrap();
        assert_eq!(sols.len(), 15);
        assert!(sols.iter().all(|s| s.quality == Quality::Infinite && s.p[0].is_zero()));
    }

    #[test]
    fn kernel_count_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (q, m, n, tau) in [(2, 1, 1, 1), (2, 1, 1, 3), (3, 1, 1, 2), (2, 2, 1, 1), (2, 1, 2, 1)] {
            let f = Fq::new(q).unwrap();
            let psi = PsiSpec::power_int(tau);
            for _ in 0..20 {
                let a = random_matrix(&f, m, n, 40, &mut rng);
                let d = if n == 2 { 4 } else { 7 };
                let sols = brute_force_solutions(&a, &psi, d, &f).unwrap();
                let dims = solution_kernel_dims(&a, &psi, d, &f).unwrap();
                for (k, &(x, y)) in dims.iter().enumerate() {
                    let count = sols.iter().filter(|s| s.deg == k as i64).count() as u64;
                    assert_eq!(count, q.pow(x as u32) - q.pow(y as u32));
                }
            }
        }
    }

    #[test]
    fn solutions_carry_minimal_p() {
        let f = Fq::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&f, 1, 1, 40, &mut rng);
        for s in brute_force_solutions(&a, &PsiSpec::power_int(1), 6, &f).unwrap() {
            let v = a[0][0].mul_poly(&s.q[0], &f).add(&Laurent::from_poly(&s.p[0]), &f);
            assert_eq!(v.norm().unwrap(), LogNorm::Exp(-s.quality.lower_bound()));
        }
    }

    #[test]
    fn correspondence_small() {
        let f = Fq::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for tau in [1, 2, 3] {
            for _ in 0..10 {
                let a = random_matrix(&f, 1, 1, 64, &mut rng);
                let rep = correspondence(&a, &PsiSpec::power_int(tau), 8, &f).unwrap();
                assert_eq!(rep.violations(), 0, "{rep:?}");
            }
        }
    }

    #[test]
    fn trace_csv() {
        let f = Fq::new(2).unwrap();
        let dl = lattice_of(&a11(Laurent::zero()), &f).unwrap();
        let tr = dynamical_test(&dl, &PsiSpec::power_int(1), 0..=2).unwrap();
        let mut s = String::new();
        tr.write_csv(&mut s);
        assert_eq!(s, "t,r_t,delta_exp,hit\n0,0,0,1\n1,0,1,1\n2,0,2,1\n");
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(900, 1000);
        assert!(lo < 0.9 && 0.9 < hi);
    }
}
