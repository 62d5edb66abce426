//! Rank-one model: the quotient ray of the Bruhat–Tits tree, geodesic
//! excursions coded by continued fractions, the logarithm law, and a
//! Siegel-formula check for lattices in k².
//!
//! Depth of a lattice class is e2 − e1 for successive minima exponents
//! e1 ≤ e2, i.e. the distance to the root of the quotient ray in tree edges.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::cfrac::{cf_expand, Stop};
use crate::dani::lattice_of;
use crate::error::{Error, Result};
use crate::fq::{Elem, Fq};
use crate::laurent::Laurent;
use crate::lattice::PolyLattice;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Excursion {
    pub n: usize,
    pub entry: i64,
    pub depth: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeodesicCode {
    pub excursions: Vec<Excursion>,
    /// α is rational and the geodesic ends in the cusp.
    pub rational: bool,
}

/// Excursion n has depth deg a_n and entry time deg q_(n−1) + deg q_n.
pub fn geodesic_code(alpha: &Laurent, max_terms: usize, f: &Fq) -> Result<GeodesicCode> {
    let cf = cf_expand(alpha, max_terms + 1, f)?;
    let excursions = (1..cf.len())
        .map(|n| Excursion {
            n,
            entry: (cf.q_deg(n - 1) + cf.q_deg(n)) as i64,
            depth: cf.pq_deg(n) as i64,
        })
        .collect();
    Ok(GeodesicCode { excursions, rational: cf.stop == Stop::Finite })
}

/// Depth of the lattice Λ_α scaled by diag(X^s, 1), for s = 0..=horizon.
/// Exact while s does not exceed the number of known digits of α.
pub fn flow_depths(alpha: &Laurent, horizon: i64, f: &Fq) -> Result<Vec<i64>> {
    let frac = alpha.frac_part();
    if let Some(fl) = frac.floor() {
        if horizon > -fl {
            return Err(Error::BeyondHorizon { t: horizon, horizon: -fl });
        }
    }
    let dl = lattice_of(&[vec![frac]], f)?;
    (0..=horizon)
        .map(|s| {
            let m = dl.lattice().apply_scaling(&[s, 0])?.successive_minima();
            Ok(m[1].exp().unwrap() - m[0].exp().unwrap())
        })
        .collect()
}

/// Strict local maxima of the depth profile, in time order.
pub fn flow_excursions(depths: &[i64]) -> Vec<Excursion> {
    (1..depths.len().saturating_sub(1))
        .filter(|&s| depths[s - 1] < depths[s] && depths[s] > depths[s + 1])
        .enumerate()
        .map(|(i, s)| Excursion { n: i + 1, entry: s as i64, depth: depths[s] })
        .collect()
}

/// Compares the continued-fraction code with the flow code on the time
/// range both certify. Returns the two records that were compared.
pub fn cross_check_codes(alpha: &Laurent, horizon: i64, f: &Fq) -> Result<(Vec<Excursion>, Vec<Excursion>)> {
    let code = geodesic_code(alpha, usize::MAX / 2, f)?;
    let depths = flow_depths(alpha, horizon, f)?;
    let flow = flow_excursions(&depths);
    let last_cf = if code.rational { i64::MAX } else { code.excursions.last().map_or(0, |e| e.entry) };
    let cutoff = last_cf.min(horizon - 1);
    let keep = |v: Vec<Excursion>| -> Vec<Excursion> { v.into_iter().filter(|e| e.entry <= cutoff).collect() };
    Ok((keep(code.excursions), keep(flow)))
}

/// Source of excursion records for the log-law statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthSource {
    /// Partial-quotient degrees of a Haar-random α: i.i.d. with
    /// P(d) = (q−1)q^-d; entry times from the continued-fraction recursion.
    HaarCf,
    /// Same depths at entry times 1, 2, 3, ...
    UnitSpacing,
    /// Every depth equal to 1, entry times as for `HaarCf`.
    Constant,
}

/// One draw from P(d) = (q−1)q^-d, d ≥ 1.
pub fn geometric_depth<R: Rng + ?Sized>(q: u32, rng: &mut R) -> i64 {
    if q == 2 {
        return 1 + rng.gen::<u64>().trailing_zeros().min(63) as i64;
    }
    let u: f64 = 1.0 - rng.gen::<f64>();
    ((-u.ln() / (q as f64).ln()).floor() as i64 + 1).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoglawSample {
    /// sup over √N < n ≤ N of depth_n / log_q(entry_n).
    pub statistic: f64,
    /// (n, depth, entry, running sup) at each record of the running sup.
    pub records: Vec<(u64, i64, i64, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct LoglawParams {
    pub samples: usize,
    pub horizon: u64,
    pub q: u32,
    pub seed: u64,
    pub source: DepthSource,
}

fn loglaw_one(p: &LoglawParams, i: usize) -> LoglawSample {
    let mut rng = par::item_rng(p.seed, i as u64);
    let lnq = (p.q as f64).ln();
    let start = (p.horizon as f64).sqrt().floor() as u64;
    let mut q_cur = 0i64;
    let mut sup = f64::NEG_INFINITY;
    let mut records = Vec::new();
    for n in 1..=p.horizon {
        let step = geometric_depth(p.q, &mut rng);
        let real_depth = if p.source == DepthSource::Constant { 1 } else { step };
        let q_prev = q_cur;
        q_cur += step;
        let entry = match p.source {
            DepthSource::UnitSpacing => n as i64,
            _ => q_prev + q_cur,
        };
        if n <= start || entry < 2 {
            continue;
        }
        let v = real_depth as f64 / ((entry as f64).ln() / lnq);
        if v > sup {
            sup = v;
            records.push((n, real_depth, entry, sup));
        }
    }
    LoglawSample { statistic: sup, records }
}

/// Running-sup log-law statistic per sample; its almost-sure limit is 1.
pub fn loglaw_limsup(p: LoglawParams) -> Vec<LoglawSample> {
    par::map_indexed(p.samples, |i| loglaw_one(&p, i))
}

pub fn median(v: &[f64]) -> f64 {
    let mut x = v.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = x.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        x[k / 2]
    } else {
        (x[k / 2 - 1] + x[k / 2]) / 2.0
    }
}

pub fn write_loglaw_csv(samples: &[LoglawSample], out: &mut String) {
    out.push_str("sample,n,depth,entry_time,running_sup\n");
    for (i, s) in samples.iter().enumerate() {
        for &(n, d, e, r) in &s.records {
            let _ = writeln!(out, "{i},{n},{d},{e},{r:.6}");
        }
    }
}

/// A tree vertex: the class of the O-lattice spanned by the columns of
/// [[X^-a, b], [0, 1]], with b reduced modulo X^-a O.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Vertex {
    pub a: i64,
    /// (exponent, coefficient) pairs of b, all exponents > −a, highest first.
    pub b: Vec<(i64, Elem)>,
}

impl Vertex {
    pub fn root() -> Self {
        Vertex { a: 0, b: Vec::new() }
    }

    fn reduced(a: i64, mut b: Vec<(i64, Elem)>) -> Self {
        b.retain(|&(e, c)| e > -a && c != 0);
        b.sort_by(|x, y| y.0.cmp(&x.0));
        Vertex { a, b }
    }

    /// The q+1 neighbours: index-q sublattices up to homothety.
    pub fn neighbours(&self, f: &Fq) -> Vec<Vertex> {
        let mut out: Vec<Vertex> = (0..f.q())
            .map(|c| {
                let mut b = self.b.clone();
                if c != 0 {
                    b.push((-self.a, c));
                }
                Vertex::reduced(self.a + 1, b)
            })
            .collect();
        out.push(Vertex::reduced(self.a - 1, self.b.clone()));
        out
    }

    /// e2 − e1 for the F_q[X]-lattice with rows (X^a, 0), (−X^a b, 1).
    pub fn depth(&self, f: &Fq) -> Result<i64> {
        if self.a.abs() > 4096 {
            return Err(Error::DegreeOverflow(format!("vertex exponent {}", self.a)));
        }
        let b = Laurent::from_terms(&self.b, None, f);
        let rows = vec![
            vec![Laurent::monomial(1, self.a), Laurent::zero()],
            vec![b.shift(self.a).neg(f), Laurent::one()],
        ];
        let m = PolyLattice::from_laurent_rows(&rows, f)?.successive_minima();
        Ok(m[1].exp().unwrap() - m[0].exp().unwrap())
    }
}

/// Vertex weights of the quotient ray, as exact rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct RayModel {
    pub q: u32,
    /// Unnormalized weights with w_0 = 1.
    pub raw: Vec<BigRational>,
    /// Weights normalized over the whole ray, the tail past L summed in
    /// closed form from the last computed ratio.
    pub weights: Vec<BigRational>,
    pub tail_mass: BigRational,
    /// (n_(l→l−1), n_(l→l), n_(l→l+1)) for each computed depth.
    pub neighbour_types: Vec<(usize, usize, usize)>,
}

impl RayModel {
    pub fn ratio(&self, l: usize) -> BigRational {
        &self.raw[l + 1] / &self.raw[l]
    }

    pub fn depth_limit(&self) -> usize {
        self.raw.len() - 1
    }

    /// μ(depth ≥ T) q^T over T ∈ [2, L]: (min, max).
    pub fn tail_constants(&self) -> (f64, f64) {
        let l = self.depth_limit();
        let mut acc = self.tail_mass.clone();
        let mut out = Vec::new();
        for t in (0..=l).rev() {
            acc += &self.weights[t];
            if t >= 2 {
                out.push(acc.to_f64().unwrap() * (self.q as f64).powi(t as i32));
            }
        }
        let lo = out.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = out.iter().cloned().fold(0.0, f64::max);
        (lo, hi)
    }

    pub fn write_csv(&self, out: &mut String) {
        out.push_str("l,num,den\n");
        for (l, w) in self.weights.iter().enumerate() {
            let _ = writeln!(out, "{l},{},{}", w.numer(), w.denom());
        }
    }
}

fn neighbour_profile(v: &Vertex, l: i64, f: &Fq) -> Result<((usize, usize, usize), Option<Vertex>)> {
    let mut counts = (0, 0, 0);
    let mut deeper = None;
    for u in v.neighbours(f) {
        let d = u.depth(f)?;
        match d - l {
            -1 => counts.0 += 1,
            0 => counts.1 += 1,
            1 => {
                counts.2 += 1;
                deeper.get_or_insert(u);
            }
            _ => return Err(Error::DegreeOverflow(format!("neighbour depth jump {l} -> {d}"))),
        }
    }
    Ok((counts, deeper))
}

/// Exact ray weights to depth L. Orbits of vertices under GL2(F_q[X]) are
/// the depth classes; the weight ratio across an edge orbit is the ratio of
/// neighbour counts, w_(l+1)/w_l = n_(l→l+1)/n_(l+1→l).
pub fn ray_measure(q: u32, depth: usize) -> Result<RayModel> {
    if depth > 60 {
        return Err(Error::DegreeOverflow(format!("ray depth {depth}")));
    }
    let f = Fq::new(q as u64)?;
    let mut v = Vertex::root();
    let mut profiles = Vec::new();
    for l in 0..=depth + 1 {
        let (prof, deeper) = neighbour_profile(&v, l as i64, &f)?;
        profiles.push(prof);
        v = deeper.ok_or_else(|| Error::InsufficientData(format!("no deeper neighbour at depth {l}")))?;
    }
    let mut raw = vec![BigRational::one()];
    for l in 0..depth {
        let up = profiles[l].2;
        let down = profiles[l + 1].0;
        let next = &raw[l] * BigRational::new(BigInt::from(up), BigInt::from(down));
        raw.push(next);
    }
    let r = if depth >= 1 { &raw[depth] / &raw[depth - 1] } else { BigRational::zero() };
    let tail_raw = if depth >= 1 { &raw[depth] * &r / (BigRational::one() - &r) } else { BigRational::zero() };
    let total: BigRational = raw.iter().fold(BigRational::zero(), |a, b| a + b) + &tail_raw;
    let weights = raw.iter().map(|w| w / &total).collect();
    Ok(RayModel { q, raw, weights, tail_mass: tail_raw / total, neighbour_types: profiles })
}

/// BFS over every vertex within `radius` of the root; checks that all
/// vertices of equal depth have the same neighbour profile.
pub fn ray_orbit_consistency(q: u32, radius: usize) -> Result<bool> {
    let f = Fq::new(q as u64)?;
    let mut seen = std::collections::HashSet::new();
    let mut frontier = vec![Vertex::root()];
    seen.insert(Vertex::root());
    let mut profile: std::collections::HashMap<i64, (usize, usize, usize)> = Default::default();
    for _ in 0..=radius {
        let mut next = Vec::new();
        for v in frontier {
            let l = v.depth(&f)?;
            let (p, _) = neighbour_profile(&v, l, &f)?;
            if *profile.entry(l).or_insert(p) != p {
                return Ok(false);
            }
            for u in v.neighbours(&f) {
                if seen.insert(u.clone()) {
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    Ok(true)
}

/// A random k ∈ GL2(O) with `digits` digits per entry.
fn random_k<R: Rng + ?Sized>(f: &Fq, digits: u32, rng: &mut R) -> [[Laurent; 2]; 2] {
    loop {
        let mut entry = || {
            let terms: Vec<(i64, Elem)> = (0..=digits as i64).map(|e| (-e, rng.gen_range(0..f.q()))).collect();
            Laurent::from_terms(&terms, None, f)
        };
        let k = [[entry(), entry()], [entry(), entry()]];
        let c = |x: &Laurent| x.coeff(0).unwrap_or(0);
        let det0 = f.sub(f.mul(c(&k[0][0]), c(&k[1][1])), f.mul(c(&k[0][1]), c(&k[1][0])));
        if det0 != 0 {
            return k;
        }
    }
}

/// The unimodular lattice k diag(X^-e, X^e) F_q[X]².
pub fn fiber_lattice(k: &[[Laurent; 2]; 2], e: i64, f: &Fq) -> Result<PolyLattice> {
    // Row i is the i-th column of k diag(X^-e, X^e).
    let s = [-e, e];
    let rows: Vec<Vec<Laurent>> = (0..2).map(|i| (0..2).map(|r| k[r][i].shift(s[i])).collect()).collect();
    PolyLattice::from_laurent_rows(&rows, f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaarBatch {
    /// Δ = −log_q δ per sample.
    pub deltas: Vec<i64>,
    /// Ray mass beyond the depth cap, excluded from sampling.
    pub truncated_mass: f64,
}

/// Haar-random unimodular lattices in k²: Δ = e with P(e) ∝ w_(2e) (even
/// depths of the ray), then a uniform point of the compact fiber
/// K diag(X^-e, X^e) F_q[X]². Δ is read off each sampled lattice.
pub fn haar_sample_d2(count: usize, depth_cap: usize, q: u32, seed: u64) -> Result<HaarBatch> {
    Ok(haar_sample_lattices(count, depth_cap, q, seed, |l| Ok(-l.delta().exp().unwrap()))?.0)
}

fn haar_sample_lattices<T: Send>(
    count: usize,
    depth_cap: usize,
    q: u32,
    seed: u64,
    measure: impl Fn(&PolyLattice) -> Result<T> + Sync,
) -> Result<(HaarBatch, Vec<T>)> {
    let f = Fq::new(q as u64)?;
    let ray = ray_measure(q, 2 * depth_cap)?;
    let w: Vec<f64> = (0..=depth_cap).map(|e| ray.weights[2 * e].to_f64().unwrap()).collect();
    let kept: f64 = w.iter().sum();
    let even_total: f64 = {
        let r = ray.ratio(2 * depth_cap - 1).to_f64().unwrap();
        kept + w[depth_cap] * r * r / (1.0 - r * r)
    };
    let mut cdf = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for x in &w {
        acc += x / kept;
        cdf.push(acc);
    }
    let per = par::map_indexed(count, |i| -> Result<(i64, T)> {
        let mut rng = par::item_rng(seed, i as u64);
        let u: f64 = rng.gen();
        let e = cdf.iter().position(|&c| u < c).unwrap_or(depth_cap) as i64;
        let k = random_k(&f, 3, &mut rng);
        let l = fiber_lattice(&k, e, &f)?;
        let d = -l.delta().exp().unwrap();
        Ok((d, measure(&l)?))
    });
    let mut deltas = Vec::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    for r in per {
        let (d, t) = r?;
        deltas.push(d);
        out.push(t);
    }
    Ok((HaarBatch { deltas, truncated_mass: 1.0 - kept / even_total }, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiegelSide {
    pub radius_exp: i64,
    /// Haar volume of the ball of radius q^B in k².
    pub lhs: f64,
    /// Monte Carlo mean of #{v ∈ Λ∖0 : |v| ≤ q^B}.
    pub rhs: f64,
    pub rhs_se: f64,
}

impl SiegelSide {
    /// Empirical C(2).
    pub fn ratio(&self) -> f64 {
        self.rhs / self.lhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiegelReport {
    pub sides: Vec<SiegelSide>,
    pub truncated_mass: f64,
}

impl SiegelReport {
    /// Largest relative spread of the empirical constants.
    pub fn spread(&self) -> f64 {
        let r: Vec<f64> = self.sides.iter().map(SiegelSide::ratio).collect();
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.iter().cloned().fold(0.0, f64::max);
        (hi - lo) / lo
    }
}

/// Both sides of the Siegel identity for ball indicators of radius q^B.
pub fn siegel_check_d2(radii: &[i64], count: usize, depth_cap: usize, q: u32, seed: u64) -> Result<SiegelReport> {
    let (batch, counts) = haar_sample_lattices(count, depth_cap, q, seed, |l| {
        Ok(radii.iter().map(|&b| (l.ball_count(b) - 1) as f64).collect::<Vec<f64>>())
    })?;
    let n = count as f64;
    let sides = radii
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let mean = counts.iter().map(|c| c[i]).sum::<f64>() / n;
            let var = counts.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            SiegelSide {
                radius_exp: b,
                lhs: (q as f64).powi(2 * b as i32),
                rhs: mean,
                rhs_se: (var / n).sqrt(),
            }
        })
        .collect();
    Ok(SiegelReport { sides, truncated_mass: batch.truncated_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_x_partials() {
        let f = Fq::new(2).unwrap();
        // α = 1/(X + 1/(X + ...)) to 60 terms.
        let mut alpha = Laurent::zero();
        for _ in 0..60 {
            alpha = Laurent::from_poly(&Poly::x_pow(1)).add(&alpha, &f).inv(&f, 200).unwrap();
        }
        let code = geodesic_code(&alpha.truncate(-150), 30, &f).unwrap();
        assert!(!code.rational);
        for (i, e) in code.excursions.iter().enumerate() {
            assert_eq!(e.depth, 1);
            assert_eq!(e.entry, 2 * (i as i64 + 1) - 1);
        }
    }

    #[test]
    fn polynomial_direction_is_rational() {
        let f = Fq::new(3).unwrap();
        let code = geodesic_code(&Laurent::from_poly(&Poly::from_coeffs(vec![1, 2, 1])), 10, &f).unwrap();
        assert!(code.rational && code.excursions.is_empty());
    }

    #[test]
    fn cf_and_flow_codes_agree() {
        let f = Fq::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let alpha = Laurent::random_unit_ball(&f, 80, &mut rng);
            let (cf, flow) = cross_check_codes(&alpha, 80, &f).unwrap();
            assert!(!cf.is_empty());
            assert_eq!(cf, flow);
        }
    }

    #[test]
    fn ray_ratios() {
        for q in [2, 3] {
            let ray = ray_measure(q, 8).unwrap();
            let qq = BigRational::from_integer(BigInt::from(q));
            assert_eq!(ray.ratio(0), (&qq + BigRational::one()) / &qq);
            for l in 1..8 {
                assert_eq!(ray.ratio(l), BigRational::one() / &qq);
            }
            let total = ray.weights.iter().fold(BigRational::zero(), |a, b| a + b) + &ray.tail_mass;
            assert_eq!(total, BigRational::one());
            let (c1, c2) = ray.tail_constants();
            assert!(c2 / c1 < 2.0);
        }
        assert_eq!(ray_measure(2, 0).unwrap().raw, vec![BigRational::one()]);
    }

    #[test]
    fn depth_classes_are_orbits() {
        assert!(ray_orbit_consistency(2, 7).unwrap());
        assert!(ray_orbit_consistency(3, 4).unwrap());
    }

    #[test]
    fn fiber_lattices_have_prescribed_depth() {
        let f = Fq::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for e in 0..6 {
            let k = random_k(&f, 4, &mut rng);
            let l = fiber_lattice(&k, e, &f).unwrap();
            assert!(l.is_unimodular());
            assert_eq!(l.delta().exp(), Some(-e));
        }
    }

    #[test]
    fn haar_depth_law() {
        let b = haar_sample_d2(20_000, 12, 2, 5).unwrap();
        let ray = ray_measure(2, 24).unwrap();
        let z: f64 = (0..=12).map(|e| ray.weights[2 * e].to_f64().unwrap()).sum();
        for e in 0..4 {
            let p = ray.weights[2 * e].to_f64().unwrap() / z;
            let obs = b.deltas.iter().filter(|&&d| d == e as i64).count() as f64 / 20_000.0;
            assert!((obs - p).abs() < 4.0 * (p / 20_000.0).sqrt() + 1e-3, "e={e} {obs} {p}");
        }
        assert_eq!(haar_sample_d2(50, 12, 2, 5).unwrap(), haar_sample_d2(50, 12, 2, 5).unwrap());
    }

    #[test]
    fn loglaw_sources() {
        let base = LoglawParams { samples: 5, horizon: 20_000, q: 2, seed: 1, source: DepthSource::HaarCf };
        for s in loglaw_limsup(base) {
            assert!(s.statistic > 0.5 && s.statistic < 2.0);
        }
        let c = loglaw_limsup(LoglawParams { source: DepthSource::Constant, ..base });
        assert!(c.iter().all(|s| s.statistic < 0.2));
    }
}
