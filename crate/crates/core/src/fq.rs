//! The finite field F_q, q = p^k, in a polynomial basis over F_p.
//!
//! An element is a `u32` whose base-p digits are the coefficients of its
//! residue modulo a fixed irreducible polynomial (digit i is the coefficient
//! of t^i). For q <= 2^16 multiplication goes through log/antilog tables; the
//! table-free path is always available and is used to cross-check them.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest field size accepted.
pub const MAX_Q: u32 = 1 << 24;
/// Largest field size for which log tables are built.
pub const TABLE_Q: u32 = 1 << 16;

pub type Elem = u32;

struct Inner {
    p: u32,
    k: u32,
    q: u32,
    /// Monic irreducible modulus of degree k, low-to-high digits over F_p.
    modulus: Vec<u32>,
    tables: Option<Tables>,
}

struct Tables {
    log: Vec<u32>,
    exp: Vec<u32>,
}

/// Handle to a finite field. Cloning is cheap.
#[derive(Clone)]
pub struct Fq(Arc<Inner>);

impl fmt::Debug for Fq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fq(q={}, p={}, k={})", self.0.q, self.0.p, self.0.k)
    }
}

impl PartialEq for Fq {
    fn eq(&self, other: &Self) -> bool {
        self.0.q == other.0.q && self.0.modulus == other.0.modulus
    }
}

/// Splits `q` as p^k with p prime, if possible.
pub fn prime_power(q: u64) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 2u64;
    while p * p <= q {
        if q.is_multiple_of(p) {
            break;
        }
        p += 1;
    }
    if !q.is_multiple_of(p) {
        p = q;
    }
    let (mut rest, mut k) = (q, 0u32);
    while rest % p == 0 {
        rest /= p;
        k += 1;
    }
    (rest == 1).then_some((p as u32, k))
}

impl Fq {
    /// Field of size q with log tables when q <= 2^16.
    pub fn new(q: u64) -> Result<Self> {
        Self::with_tables(q, q <= TABLE_Q as u64)
    }

    /// Field of size q using only table-free arithmetic.
    pub fn table_free(q: u64) -> Result<Self> {
        Self::with_tables(q, false)
    }

    fn with_tables(q: u64, tables: bool) -> Result<Self> {
        if q > MAX_Q as u64 {
            return Err(Error::InvalidField(q));
        }
        let (p, k) = prime_power(q).ok_or(Error::InvalidField(q))?;
        let modulus = find_irreducible(p, k);
        let mut inner = Inner { p, k, q: q as u32, modulus, tables: None };
        if tables {
            inner.tables = Some(build_tables(&inner));
        }
        Ok(Fq(Arc::new(inner)))
    }

    pub fn q(&self) -> u32 {
        self.0.q
    }
    pub fn p(&self) -> u32 {
        self.0.p
    }
    pub fn ext_degree(&self) -> u32 {
        self.0.k
    }
    pub fn modulus(&self) -> &[u32] {
        &self.0.modulus
    }
    pub fn has_tables(&self) -> bool {
        self.0.tables.is_some()
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        let i = &*self.0;
        if i.p == 2 {
            a ^ b
        } else if i.k == 1 {
            let s = a + b;
            if s >= i.p {
                s - i.p
            } else {
                s
            }
        } else {
            digitwise(i.p, a, b, |x, y| (x + y) % i.p)
        }
    }

    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        let i = &*self.0;
        if i.p == 2 || a == 0 {
            a
        } else if i.k == 1 {
            i.p - a
        } else {
            digitwise(i.p, a, 0, |x, _| (i.p - x) % i.p)
        }
    }

    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        if a == 0 || b == 0 {
            return 0;
        }
        match &self.0.tables {
            Some(t) => t.exp[(t.log[a as usize] + t.log[b as usize]) as usize],
            None => self.mul_table_free(a, b),
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: Elem) -> Option<Elem> {
        if a == 0 {
            return None;
        }
        Some(match &self.0.tables {
            Some(t) => {
                let qm1 = self.0.q - 1;
                t.exp[((qm1 - t.log[a as usize]) % qm1) as usize]
            }
            None => self.pow(a, (self.0.q - 2) as u64),
        })
    }

    pub fn div(&self, a: Elem, b: Elem) -> Option<Elem> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }

    pub fn pow(&self, mut a: Elem, mut e: u64) -> Elem {
        let mut acc = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        acc
    }

    /// Schoolbook product of residues modulo the irreducible polynomial.
    pub fn mul_table_free(&self, a: Elem, b: Elem) -> Elem {
        let i = &*self.0;
        let (p, k) = (i.p, i.k as usize);
        let da = digits(p, a, k);
        let db = digits(p, b, k);
        let mut prod = vec![0u64; 2 * k - 1];
        for (x, &u) in da.iter().enumerate() {
            if u == 0 {
                continue;
            }
            for (y, &v) in db.iter().enumerate() {
                prod[x + y] = (prod[x + y] + (u * v) as u64) % p as u64;
            }
        }
        // reduce: t^k = -(m_0 + ... + m_{k-1} t^{k-1})
        for deg in (k..prod.len()).rev() {
            let c = prod[deg];
            if c == 0 {
                continue;
            }
            prod[deg] = 0;
            for (j, &m) in i.modulus[..k].iter().enumerate() {
                let idx = deg - k + j;
                prod[idx] = (prod[idx] + (p as u64 - c) * m as u64) % p as u64;
            }
        }
        undigits(p, prod[..k].iter().map(|&d| d as u32))
    }
}

fn digits(p: u32, mut a: u32, k: usize) -> Vec<u32> {
    let mut out = vec![0; k];
    for d in out.iter_mut() {
        *d = a % p;
        a /= p;
    }
    out
}

fn undigits(p: u32, ds: impl DoubleEndedIterator<Item = u32>) -> u32 {
    ds.rev().fold(0, |acc, d| acc * p + d)
}

#[inline]
fn digitwise(p: u32, mut a: u32, mut b: u32, f: impl Fn(u32, u32) -> u32) -> u32 {
    let (mut out, mut place) = (0, 1);
    while a > 0 || b > 0 {
        out += f(a % p, b % p) * place;
        a /= p;
        b /= p;
        place *= p;
    }
    out
}

/// Polynomial remainder over F_p on low-to-high digit vectors.
fn fp_rem(p: u32, a: &[u32], m: &[u32]) -> Vec<u32> {
    let mut r = a.to_vec();
    let dm = m.len() - 1;
    let inv_lc = modpow(m[dm], p - 2, p);
    while r.len() > dm {
        let c = *r.last().unwrap() * inv_lc % p;
        let shift = r.len() - 1 - dm;
        for (j, &mj) in m.iter().enumerate() {
            r[shift + j] = (r[shift + j] + (p - c) * mj % p) % p;
        }
        while r.last() == Some(&0) {
            r.pop();
        }
    }
    r
}

fn modpow(mut b: u32, mut e: u32, p: u32) -> u32 {
    let (mut acc, m) = (1u64, p as u64);
    let mut base = b as u64 % m;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    b = acc as u32;
    b
}

/// Lexicographically smallest monic irreducible polynomial of degree k over F_p.
fn find_irreducible(p: u32, k: u32) -> Vec<u32> {
    if k == 1 {
        return vec![0, 1];
    }
    let count = (p as u64).pow(k);
    'cand: for low in 0..count {
        let mut m: Vec<u32> = digits(p, low as u32, k as usize);
        m.push(1);
        if m[0] == 0 {
            continue;
        }
        for d in 1..=k / 2 {
            for low_d in 0..(p as u64).pow(d) {
                let mut f = digits(p, low_d as u32, d as usize);
                f.push(1);
                if fp_rem(p, &m, &f).is_empty() {
                    continue 'cand;
                }
            }
        }
        return m;
    }
    unreachable!("irreducible polynomials exist in every degree")
}

fn build_tables(inner: &Inner) -> Tables {
    let q = inner.q;
    let field = Fq(Arc::new(Inner {
        p: inner.p,
        k: inner.k,
        q,
        modulus: inner.modulus.clone(),
        tables: None,
    }));
    let order = q - 1;
    let mut factors = Vec::new();
    let mut n = order;
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            factors.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        factors.push(n);
    }
    let gen = (1..q)
        .find(|&g| factors.iter().all(|&f| field.pow(g, (order / f) as u64) != 1))
        .expect("multiplicative group is cyclic");
    let mut exp = vec![0u32; 2 * order as usize];
    let mut log = vec![0u32; q as usize];
    let mut x = 1;
    for i in 0..order {
        exp[i as usize] = x;
        log[x as usize] = i;
        x = field.mul_table_free(x, gen);
    }
    for i in order..2 * order {
        exp[i as usize] = exp[(i - order) as usize];
    }
    Tables { log, exp }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_axioms(f: &Fq) {
        let q = f.q();
        for a in 0..q {
            assert_eq!(f.add(a, 0), a);
            assert_eq!(f.mul(a, 1), a);
            assert_eq!(f.add(a, f.neg(a)), 0);
            if a != 0 {
                assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
            for b in 0..q {
                assert_eq!(f.add(a, b), f.add(b, a));
                assert_eq!(f.mul(a, b), f.mul(b, a));
                for c in 0..q {
                    assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                    assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                    assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                }
            }
        }
    }

    #[test]
    fn field_axioms_exhaustive() {
        for q in [2, 3, 4, 5, 8, 9] {
            check_axioms(&Fq::new(q).unwrap());
            check_axioms(&Fq::table_free(q).unwrap());
        }
    }

    #[test]
    fn tables_match_table_free() {
        for q in [4u64, 16, 25, 27, 49, 64, 243] {
            let f = Fq::new(q).unwrap();
            assert!(f.has_tables());
            for a in 0..f.q() {
                for b in (0..f.q()).step_by(3) {
                    assert_eq!(f.mul(a, b), f.mul_table_free(a, b), "q={q} {a}*{b}");
                }
            }
        }
    }

    #[test]
    fn rejects_non_prime_powers() {
        for q in [0u64, 1, 6, 10, 12, 100] {
            assert_eq!(Fq::new(q).unwrap_err(), Error::InvalidField(q));
        }
        assert_eq!(prime_power(1024), Some((2, 10)));
        assert_eq!(prime_power(49), Some((7, 2)));
    }

    #[test]
    fn moduli_are_irreducible() {
        assert_eq!(Fq::new(4).unwrap().modulus(), &[1, 1, 1]);
        assert_eq!(Fq::new(8).unwrap().modulus(), &[1, 1, 0, 1]);
        assert_eq!(Fq::new(9).unwrap().modulus(), &[1, 0, 1]);
    }
}
