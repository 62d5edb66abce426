//! Full-rank F_q[X]-lattices in k^d and the diagonal flow.
//!
//! A lattice is stored as X^-sigma times the row module of a polynomial
//! basis. Shortest vectors and successive minima are read off a weak Popov
//! form of the basis, whose row degrees are the minima exponents.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fq::Fq;
use crate::laurent::Laurent;
use crate::norm::LogNorm;
use crate::poly::Poly;

pub type PolyMatrix = Vec<Vec<Poly>>;

fn row_deg(row: &[Poly]) -> Option<usize> {
    row.iter().filter_map(Poly::deg).max()
}

/// Rightmost column attaining the row degree.
fn pivot(row: &[Poly]) -> Option<(usize, usize)> {
    let d = row_deg(row)?;
    let j = row.iter().rposition(|p| p.deg() == Some(d)).unwrap();
    Some((j, d))
}

/// Mulders–Storjohann simple transformations until the row pivots are
/// distinct. The first clash in row order is resolved first; on equal
/// degrees the later row is reduced.
pub fn weak_popov_reduce(basis: &[Vec<Poly>], f: &Fq) -> Result<PolyMatrix> {
    let d = basis.len();
    if basis.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension(format!("basis must be {d}x{d}")));
    }
    let mut b: PolyMatrix = basis.to_vec();
    let mut piv: Vec<(usize, usize)> = Vec::with_capacity(d);
    for row in &b {
        piv.push(pivot(row).ok_or(Error::Singular)?);
    }
    loop {
        let mut clash = None;
        'find: for i in 0..d {
            for k in 0..i {
                if piv[k].0 == piv[i].0 {
                    clash = Some((k, i));
                    break 'find;
                }
            }
        }
        let Some((a, c)) = clash else { break };
        let (lo, hi) = if piv[c].1 >= piv[a].1 { (a, c) } else { (c, a) };
        let (j, dlo) = piv[lo];
        let dhi = piv[hi].1;
        let coef = f.div(b[hi][j].lc(), b[lo][j].lc()).unwrap();
        let src = b[lo].clone();
        for (x, s) in b[hi].iter_mut().zip(&src) {
            x.axpy_shift(f.neg(coef), dhi - dlo, s, f);
        }
        piv[hi] = pivot(&b[hi]).ok_or(Error::Singular)?;
    }
    Ok(b)
}

/// Determinant by cofactor expansion; meant for small d.
pub fn det(m: &[Vec<Poly>], f: &Fq) -> Poly {
    let d = m.len();
    match d {
        0 => Poly::one(),
        1 => m[0][0].clone(),
        _ => {
            let mut acc = Poly::zero();
            for j in 0..d {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor: PolyMatrix = m[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, p)| p.clone()).collect())
                    .collect();
                let term = m[0][j].mul(&det(&minor, f), f);
                acc = if j % 2 == 0 { acc.add(&term, f) } else { acc.sub(&term, f) };
            }
            acc
        }
    }
}

/// X^-sigma * (row module of `basis`).
#[derive(Debug, Clone)]
pub struct PolyLattice {
    basis: PolyMatrix,
    reduced: PolyMatrix,
    sigma: i64,
    field: Fq,
}

impl PolyLattice {
    /// Rejects singular bases.
    pub fn new(basis: PolyMatrix, sigma: i64, field: &Fq) -> Result<Self> {
        let reduced = weak_popov_reduce(&basis, field)?;
        Ok(PolyLattice { basis, reduced, sigma, field: field.clone() })
    }

    /// F_q[X]^d
    pub fn standard(d: usize, field: &Fq) -> Self {
        let basis: PolyMatrix = (0..d)
            .map(|i| (0..d).map(|j| if i == j { Poly::one() } else { Poly::zero() }).collect())
            .collect();
        Self::new(basis, 0, field).expect("identity is nonsingular")
    }

    /// Rows with exact Laurent entries, cleared of denominators by sigma.
    pub fn from_laurent_rows(rows: &[Vec<Laurent>], field: &Fq) -> Result<Self> {
        if rows.iter().flatten().any(|x| !x.is_exact()) {
            return Err(Error::PrecisionLoss {
                floor: rows.iter().flatten().filter_map(Laurent::floor).max().unwrap(),
            });
        }
        let low = rows.iter().flatten().flat_map(|x| x.terms().map(|t| t.0)).min().unwrap_or(0);
        let s = (-low).max(0);
        let basis = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|x| {
                        let mut c = Vec::new();
                        for (e, v) in x.terms() {
                            let i = (e + s) as usize;
                            if c.len() <= i {
                                c.resize(i + 1, 0);
                            }
                            c[i] = v;
                        }
                        Poly::from_coeffs(c)
                    })
                    .collect()
            })
            .collect();
        Self::new(basis, s, field)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }
    pub fn sigma(&self) -> i64 {
        self.sigma
    }
    pub fn basis(&self) -> &PolyMatrix {
        &self.basis
    }
    pub fn reduced(&self) -> &PolyMatrix {
        &self.reduced
    }
    pub fn field(&self) -> &Fq {
        &self.field
    }

    fn reduced_degrees(&self) -> Vec<i64> {
        self.reduced.iter().map(|r| row_deg(r).unwrap() as i64).collect()
    }

    /// deg det B, read off the reduced basis.
    pub fn det_degree(&self) -> i64 {
        self.reduced_degrees().iter().sum()
    }

    /// |det| as a norm exponent: deg det B - d sigma.
    pub fn covolume_exp(&self) -> i64 {
        self.det_degree() - self.dim() as i64 * self.sigma
    }

    pub fn is_unimodular(&self) -> bool {
        self.covolume_exp() == 0
    }

    /// Smallest sup norm of a nonzero lattice vector.
    pub fn delta(&self) -> LogNorm {
        LogNorm::Exp(self.reduced_degrees().into_iter().min().unwrap() - self.sigma)
    }

    /// Successive minima, nondecreasing.
    pub fn successive_minima(&self) -> Vec<LogNorm> {
        let mut d = self.reduced_degrees();
        d.sort_unstable();
        d.into_iter().map(|e| LogNorm::Exp(e - self.sigma)).collect()
    }

    /// Number of lattice vectors (zero included) of norm at most q^b; the
    /// reduced basis is orthogonal, so this is Π q^max(0, b − e_i + 1).
    pub fn ball_count(&self, b: i64) -> u128 {
        let q = self.field.q() as u128;
        let e: i64 = self.reduced_degrees().iter().map(|&d| (b - (d - self.sigma) + 1).max(0)).sum();
        q.pow(e as u32)
    }

    /// A shortest nonzero vector, as polynomial coordinates before the X^-sigma factor.
    pub fn shortest_row(&self) -> &[Poly] {
        let degs = self.reduced_degrees();
        let i = (0..degs.len()).min_by_key(|&i| (degs[i], i)).unwrap();
        &self.reduced[i]
    }

    /// Multiplies coordinate j by X^(exps[j]).
    pub fn apply_scaling(&self, exps: &[i64]) -> Result<Self> {
        let d = self.dim();
        if exps.len() != d {
            return Err(Error::Dimension(format!("{} exponents for dimension {d}", exps.len())));
        }
        let smin = *exps.iter().min().unwrap();
        let mut rows: PolyMatrix = self
            .reduced
            .iter()
            .map(|r| r.iter().zip(exps).map(|(p, &e)| p.shift((e - smin) as usize)).collect())
            .collect();
        let mut sigma = self.sigma - smin;
        let common = rows.iter().flatten().filter_map(Poly::x_valuation).min().unwrap_or(0);
        if common > 0 {
            for p in rows.iter_mut().flatten() {
                *p = p.unshift(common).unwrap();
            }
            sigma -= common as i64;
        }
        Self::new(rows, sigma, &self.field)
    }

    /// Fixture text: header `d=<d> sigma=<s> q=<q>`, then one row per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("d={} sigma={} q={}\n", self.dim(), self.sigma, self.field.q());
        for row in &self.basis {
            let cells: Vec<String> = row.iter().map(Poly::to_text).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let (mut d, mut sigma, mut q) = (None, None, None);
        for kv in header.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::parse(1, format!("bad `{kv}`")))?;
            let v: i64 = v.parse().map_err(|_| Error::parse(1, format!("bad value `{kv}`")))?;
            match k {
                "d" => d = Some(v as usize),
                "sigma" => sigma = Some(v),
                "q" => q = Some(v as u64),
                _ => return Err(Error::parse(1, format!("unknown key `{k}`"))),
            }
        }
        let (Some(d), Some(sigma), Some(q)) = (d, sigma, q) else {
            return Err(Error::parse(1, "header needs d, sigma and q"));
        };
        let field = Fq::new(q)?;
        let mut basis = Vec::new();
        for (ln, line) in lines {
            let row: std::result::Result<Vec<Poly>, String> =
                line.split_whitespace().map(|c| Poly::parse(c, &field)).collect();
            let row = row.map_err(|m| Error::parse(ln + 1, m))?;
            if row.len() != d {
                return Err(Error::parse(ln + 1, format!("expected {d} entries")));
            }
            basis.push(row);
        }
        if basis.len() != d {
            return Err(Error::parse(d + 1, format!("expected {d} rows")));
        }
        Self::new(basis, sigma, &field)
    }
}

/// g_t = diag(X^(nt) on the first m coordinates, X^(-mt) on the last n).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowSpec {
    pub m: usize,
    pub n: usize,
    pub t: i64,
}

impl FlowSpec {
    pub fn new(m: usize, n: usize, t: i64) -> Self {
        FlowSpec { m, n, t }
    }

    /// Per-coordinate norm exponents; they sum to zero.
    pub fn exponents(&self) -> Vec<i64> {
        let (m, n) = (self.m as i64, self.n as i64);
        std::iter::repeat_n(n * self.t, self.m)
            .chain(std::iter::repeat_n(-m * self.t, self.n))
            .collect()
    }
}

pub fn apply_flow(lattice: &PolyLattice, flow: FlowSpec) -> Result<PolyLattice> {
    if flow.m + flow.n != lattice.dim() {
        return Err(Error::Dimension(format!("flow {}+{} on dimension {}", flow.m, flow.n, lattice.dim())));
    }
    if flow.t == 0 {
        return Ok(lattice.clone());
    }
    lattice.apply_scaling(&flow.exponents())
}

/// Lattices with delta <= q^-r.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CuspSet {
    pub r: i64,
}

impl CuspSet {
    pub fn contains(&self, lattice: &PolyLattice) -> bool {
        lattice.delta().le_exp(-self.r)
    }
}

pub fn cusp_member(lattice: &PolyLattice, r: i64) -> bool {
    CuspSet { r }.contains(lattice)
}

pub type LaurentMatrix = Vec<Vec<Laurent>>;

pub fn mat_mul(a: &LaurentMatrix, b: &LaurentMatrix, f: &Fq) -> LaurentMatrix {
    let (rows, inner, cols) = (a.len(), b.len(), b[0].len());
    (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| (0..inner).fold(Laurent::zero(), |acc, k| acc.add(&a[i][k].mul(&b[k][j], f), f)))
                .collect()
        })
        .collect()
}

pub fn diag(exps: &[i64]) -> LaurentMatrix {
    let d = exps.len();
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { Laurent::monomial(1, exps[i]) } else { Laurent::zero() }).collect())
        .collect()
}

/// Norm exponents of the elementary divisors of g over F_q[[X^-1]], found by
/// elimination with full pivoting on the largest norm.
pub fn elementary_divisors(g: &LaurentMatrix, f: &Fq, prec: u32) -> Result<Vec<i64>> {
    let d = g.len();
    let mut m = g.clone();
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let mut best: Option<(i64, usize, usize)> = None;
        let mut unknown: Option<i64> = None;
        for (i, row) in m.iter().enumerate().skip(k) {
            for (j, x) in row.iter().enumerate().skip(k) {
                match (x.top(), x.floor()) {
                    (Some(t), _) => {
                        if best.is_none_or(|b| t > b.0) {
                            best = Some((t, i, j));
                        }
                    }
                    (None, Some(fl)) => unknown = Some(unknown.map_or(fl, |u: i64| u.max(fl))),
                    (None, None) => {}
                }
            }
        }
        let (e, i, j) = match (best, unknown) {
            (Some(b), Some(fl)) if b.0 < fl => return Err(Error::PrecisionLoss { floor: fl }),
            (Some(b), _) => b,
            (None, Some(fl)) => return Err(Error::PrecisionLoss { floor: fl }),
            (None, None) => return Err(Error::Singular),
        };
        m.swap(k, i);
        for row in m.iter_mut() {
            row.swap(k, j);
        }
        out.push(e);
        let inv = m[k][k].inv(f, prec)?;
        let pivot_row = m[k].clone();
        for row in m.iter_mut().skip(k + 1) {
            if row[k].is_exact_zero() {
                continue;
            }
            let factor = row[k].mul(&inv, f);
            for (x, p) in row.iter_mut().zip(&pivot_row).skip(k) {
                *x = x.sub(&factor.mul(p, f), f);
            }
        }
    }
    Ok(out)
}

/// Bi-K-invariant length: sum of |elementary divisor exponents|.
pub fn cartan_distance(g: &LaurentMatrix, f: &Fq, prec: u32) -> Result<u64> {
    Ok(elementary_divisors(g, f, prec)?.iter().map(|e| e.unsigned_abs()).sum())
}
