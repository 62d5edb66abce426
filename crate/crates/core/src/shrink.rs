//! Shrinking-target statistics: Borel–Cantelli verdicts, Sprindzhuk sums,
//! quasi-independence estimates, exponential divergence and tail fits.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::par;

/// Indicators h_t(x_j) for samples j < J and times t = 1..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct HitFamily {
    samples: usize,
    times: usize,
    words: usize,
    bits: Vec<u64>,
    mu: Option<Vec<f64>>,
}

impl HitFamily {
    pub fn new(samples: usize, times: usize) -> Self {
        let words = times.div_ceil(64);
        HitFamily { samples, times, words, bits: vec![0; samples * words], mu: None }
    }

    /// Builds a family row by row; `row(j)` yields the hit times of sample j.
    pub fn from_rows(samples: usize, times: usize, rows: Vec<Vec<usize>>) -> Self {
        let mut h = Self::new(samples, times);
        for (j, row) in rows.into_iter().enumerate() {
            for t in row {
                h.set(j, t);
            }
        }
        h
    }

    /// Attaches analytic target measures μ(h_1), ..., μ(h_N).
    pub fn with_mu(mut self, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != self.times {
            return Err(Error::Dimension(format!("{} measures for {} times", mu.len(), self.times)));
        }
        if mu.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
            return Err(Error::InsufficientData("target measures must lie in [0, 1]".into()));
        }
        self.mu = Some(mu);
        Ok(self)
    }

    pub fn samples(&self) -> usize {
        self.samples
    }
    pub fn times(&self) -> usize {
        self.times
    }

    /// Marks h_t(x_j) = 1, t in 1..=N.
    pub fn set(&mut self, j: usize, t: usize) {
        assert!((1..=self.times).contains(&t));
        let i = t - 1;
        self.bits[j * self.words + i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, j: usize, t: usize) -> bool {
        let i = t - 1;
        self.bits[j * self.words + i / 64] >> (i % 64) & 1 == 1
    }

    /// Number of hits of sample j at times M..=N.
    pub fn window_count(&self, j: usize, m: usize, n: usize) -> u64 {
        if n < m {
            return 0;
        }
        let row = &self.bits[j * self.words..(j + 1) * self.words];
        let (a, b) = (m - 1, n - 1);
        let (wa, wb) = (a / 64, b / 64);
        let lo_mask = !0u64 << (a % 64);
        let hi_mask = if b % 64 == 63 { !0 } else { (1u64 << (b % 64 + 1)) - 1 };
        if wa == wb {
            return (row[wa] & lo_mask & hi_mask).count_ones() as u64;
        }
        let mut c = (row[wa] & lo_mask).count_ones() as u64 + (row[wb] & hi_mask).count_ones() as u64;
        for w in &row[wa + 1..wb] {
            c += w.count_ones() as u64;
        }
        c
    }

    /// Monte Carlo estimate of μ(h_t).
    pub fn mu_hat(&self, t: usize) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        (0..self.samples).filter(|&j| self.get(j, t)).count() as f64 / self.samples as f64
    }

    /// μ(h_t), analytic when known.
    pub fn mu(&self, t: usize) -> f64 {
        match &self.mu {
            Some(m) => m[t - 1],
            None => self.mu_hat(t),
        }
    }

    fn mu_hat_all(&self) -> Vec<f64> {
        let mut counts = vec![0u64; self.times];
        for j in 0..self.samples {
            let row = &self.bits[j * self.words..(j + 1) * self.words];
            for (w, &word) in row.iter().enumerate() {
                let mut x = word;
                while x != 0 {
                    counts[w * 64 + x.trailing_zeros() as usize] += 1;
                    x &= x - 1;
                }
            }
        }
        counts.into_iter().map(|c| c as f64 / self.samples.max(1) as f64).collect()
    }

    /// Prefix sums E_N = Σ_{t≤N} μ(h_t), index N.
    fn e_prefix(&self) -> Vec<f64> {
        let mu = match &self.mu {
            Some(m) => m.clone(),
            None => self.mu_hat_all(),
        };
        let mut out = Vec::with_capacity(self.times + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for m in mu {
            acc += m;
            out.push(acc);
        }
        out
    }
}

/// Independent indicators with P(h_t = 1) = mu(t).
pub fn independent_family(samples: usize, times: usize, mu: impl Fn(usize) -> f64 + Sync, seed: u64) -> HitFamily {
    let mus: Vec<f64> = (1..=times).map(&mu).collect();
    let rows = par::map_indexed(samples, |j| {
        let mut rng = par::item_rng(seed, j as u64);
        (1..=times).filter(|&t| rng.gen::<f64>() < mus[t - 1]).collect::<Vec<usize>>()
    });
    HitFamily::from_rows(samples, times, rows).with_mu(mus).expect("valid measures")
}

/// h_t = h_1 for every t, with P(h_1 = 1) = p.
pub fn duplicated_family(samples: usize, times: usize, p: f64, seed: u64) -> HitFamily {
    let rows = par::map_indexed(samples, |j| {
        let mut rng = par::item_rng(seed, j as u64);
        if rng.gen::<f64>() < p {
            (1..=times).collect()
        } else {
            Vec::new()
        }
    });
    HitFamily::from_rows(samples, times, rows).with_mu(vec![p; times]).expect("valid measures")
}

/// S_{H,N} per sample and E_{H,N}.
pub fn sprindzhuk_sums(h: &HitFamily, n: usize) -> Result<(Vec<u64>, f64)> {
    if n > h.times {
        return Err(Error::InsufficientData(format!("N = {n} beyond data horizon {}", h.times)));
    }
    let s = (0..h.samples).map(|j| h.window_count(j, 1, n)).collect();
    Ok((s, h.e_prefix()[n]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCorrelation {
    /// Σ_{s,t=M}^{N} (μ̂(h_s h_t) − μ̂(h_s)μ̂(h_t)), diagonal included.
    pub excess: f64,
    /// The same sum over s ≠ t.
    pub off_diagonal: f64,
    /// Σ_{t=M}^{N} μ̂(h_t)
    pub mass: f64,
    /// excess / mass, the estimated constant of the quasi-independence bound.
    pub ratio: f64,
    /// Σ_{t=M}^{N} μ̂(h_t)(1 − μ̂(h_t)), the excess of an independent family.
    pub diagonal: f64,
    pub effective_samples: usize,
}

/// The double sum equals the empirical variance of the window counts.
pub fn pair_correlation(h: &HitFamily, m: usize, n: usize) -> Result<PairCorrelation> {
    if h.samples < 2 {
        return Err(Error::InsufficientData("pair correlation needs at least two samples".into()));
    }
    if m < 1 || n > h.times || m > n {
        return Err(Error::InsufficientData(format!("window [{m}, {n}] outside 1..={}", h.times)));
    }
    let jn = h.samples as f64;
    let counts: Vec<f64> = (0..h.samples).map(|j| h.window_count(j, m, n) as f64).collect();
    let mean = counts.iter().sum::<f64>() / jn;
    let excess = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / jn;
    let mu = h.mu_hat_all();
    let diag: f64 = mu[m - 1..n].iter().map(|p| p - p * p).sum();
    let mass: f64 = mu[m - 1..n].iter().sum();
    Ok(PairCorrelation {
        excess,
        off_diagonal: excess - diag,
        mass,
        ratio: if mass > 0.0 { excess / mass } else { 0.0 },
        diagonal: diag,
        effective_samples: h.samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiIndependence {
    /// (N, Σμ̂ on [1, N], excess / diagonal) on nested windows.
    pub windows: Vec<(usize, f64, f64)>,
    /// Slope of ln(excess / diagonal) against ln Σμ̂.
    pub slope: f64,
}

impl QuasiIndependence {
    /// Variance inflation growing faster than mass^(1/2) violates the bound.
    pub fn holds(&self) -> bool {
        self.slope <= 0.5
    }
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// 1, 2, 4, ... below n, then n.
pub fn dyadic_grid(n: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (0..).map(|k| 1usize << k).take_while(|&x| x < n).collect();
    g.push(n);
    g
}

/// Variance inflation of the window counts on the nested windows [1, 2^k].
/// Independent families stay near 1; positively correlated ones grow.
pub fn quasi_independence(h: &HitFamily) -> Result<QuasiIndependence> {
    let mut windows = Vec::new();
    for n in dyadic_grid(h.times) {
        let pc = pair_correlation(h, 1, n)?;
        let inflation = if pc.diagonal > 0.0 { pc.excess / pc.diagonal } else { 0.0 };
        windows.push((n, pc.mass, inflation));
    }
    let pts: Vec<(f64, f64)> = windows
        .iter()
        .filter(|w| w.1 >= 1.0 && w.2 > 0.0)
        .map(|w| (w.1.ln(), w.2.ln()))
        .collect();
    let slope = if pts.len() >= 2 { ls_slope(&pts) } else { 0.0 };
    Ok(QuasiIndependence { windows, slope })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcVerdict {
    MeasureZero,
    FullMeasure,
    Inconclusive,
}

impl BcVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            BcVerdict::MeasureZero => "measure-zero",
            BcVerdict::FullMeasure => "full-measure",
            BcVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub n: usize,
    pub s_median: f64,
    pub e: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcReport {
    pub verdict: BcVerdict,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Samples with no hit in the second half of the horizon.
    pub finitely_many: f64,
    /// Samples with |S/E − 1| ≤ 1/4 at the horizon.
    pub near_one: f64,
    pub quasi_independence: Option<QuasiIndependence>,
}

impl BcReport {
    pub fn write_csv(&self, out: &mut String) {
        out.push_str("N,S_median,E,ratio\n");
        for p in &self.trajectory {
            let _ = writeln!(out, "{},{},{:.6},{:.6}", p.n, p.s_median, p.e, p.ratio);
        }
    }
}

fn median_u64(v: &mut [u64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_unstable();
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2] as f64
    } else {
        (v[k / 2 - 1] + v[k / 2]) as f64 / 2.0
    }
}

/// Borel–Cantelli verdict: E bounded over the second half of the horizon
/// means measure zero; E still growing with quasi-independence means full
/// measure.
pub fn bc_verdict(h: &HitFamily) -> Result<BcReport> {
    let n = h.times;
    let e = h.e_prefix();
    let mut trajectory = Vec::new();
    for g in if n == 0 { Vec::new() } else { dyadic_grid(n) } {
        let (mut s, eg) = sprindzhuk_sums(h, g)?;
        let s_median = median_u64(&mut s);
        trajectory.push(TrajectoryPoint { n: g, s_median, e: eg, ratio: if eg > 0.0 { s_median / eg } else { 0.0 } });
    }
    if n == 0 || h.samples == 0 || e[n] == 0.0 {
        return Ok(BcReport {
            verdict: BcVerdict::MeasureZero,
            trajectory,
            finitely_many: 1.0,
            near_one: 0.0,
            quasi_independence: None,
        });
    }
    let half = n / 2;
    let growth = e[n] - e[half];
    let jn = h.samples as f64;
    let finitely_many = (0..h.samples).filter(|&j| h.window_count(j, half + 1, n) == 0).count() as f64 / jn;
    let near_one = (0..h.samples)
        .filter(|&j| ((h.window_count(j, 1, n) as f64 / e[n]) - 1.0).abs() <= 0.25)
        .count() as f64
        / jn;
    let (verdict, qi) = if growth <= 0.05 {
        (BcVerdict::MeasureZero, None)
    } else if growth >= 0.5 {
        let qi = quasi_independence(h)?;
        (if qi.holds() { BcVerdict::FullMeasure } else { BcVerdict::Inconclusive }, Some(qi))
    } else {
        (BcVerdict::Inconclusive, None)
    };
    Ok(BcReport { verdict, trajectory, finitely_many, near_one, quasi_independence: qi })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTermReport {
    pub per_sample: Vec<bool>,
    /// Calibrated constant C.
    pub constant: f64,
    /// Slope of ln mean|S − E| against ln E over the grid.
    pub exponent: f64,
}

impl ErrorTermReport {
    pub fn all_within(&self) -> bool {
        self.per_sample.iter().all(|&b| b)
    }
}

fn error_scale(e: f64, eps: f64) -> f64 {
    e.sqrt() * e.ln().max(1.0).powf(1.5 + eps)
}

/// Checks |S − E| ≤ C E^(1/2) (log E)^(3/2+ε) along `grid`, with C set to
/// twice the largest normalized deviation at the first grid point.
pub fn error_term_check(h: &HitFamily, grid: &[usize], eps: f64) -> Result<ErrorTermReport> {
    if grid.is_empty() {
        return Err(Error::InsufficientData("empty grid".into()));
    }
    let points: Vec<(Vec<u64>, f64)> = grid.iter().map(|&g| sprindzhuk_sums(h, g)).collect::<Result<_>>()?;
    let (s0, e0) = &points[0];
    let b0 = error_scale(*e0, eps);
    let worst = s0.iter().map(|&s| (s as f64 - e0).abs() / b0).fold(0.0, f64::max);
    let constant = 2.0 * worst.max(1e-12);
    let per_sample = (0..h.samples)
        .map(|j| points.iter().all(|(s, e)| (s[j] as f64 - e).abs() <= constant * error_scale(*e, eps)))
        .collect();
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|(s, e)| {
            let mad = s.iter().map(|&x| (x as f64 - e).abs()).sum::<f64>() / s.len().max(1) as f64;
            (mad > 0.0 && *e > 0.0).then(|| (e.ln(), mad.ln()))
        })
        .collect();
    let exponent = if pts.len() >= 2 { ls_slope(&pts) } else { 0.0 };
    Ok(ErrorTermReport { per_sample, constant, exponent })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdReport {
    /// min over s ≠ t in the horizon of d(s, t)/|s − t|.
    pub witness: f64,
    /// (β, certified bound on the sup, largest observed partial sum).
    pub betas: Vec<(f64, Option<f64>, f64)>,
}

impl EdReport {
    pub fn certified(&self) -> bool {
        self.betas.iter().all(|b| b.1.is_some())
    }
}

/// Exponential divergence over times 1..=horizon. A positive linear-growth
/// witness c gives sup_t Σ_s e^(−β d) ≤ 1 + 2e^(−βc)/(1 − e^(−βc)).
pub fn ed_check(horizon: usize, distance: impl Fn(i64, i64) -> f64, betas: &[f64]) -> Result<EdReport> {
    if horizon < 2 {
        return Err(Error::InsufficientData("horizon too short to certify".into()));
    }
    let h = horizon as i64;
    let mut witness = f64::INFINITY;
    let mut dist = vec![vec![0.0; horizon]; horizon];
    for s in 1..=h {
        for t in 1..=h {
            let d = distance(s, t);
            dist[(s - 1) as usize][(t - 1) as usize] = d;
            if s != t {
                witness = witness.min(d / (s - t).abs() as f64);
            }
        }
    }
    let betas = betas
        .iter()
        .map(|&b| {
            let partial = (0..horizon)
                .map(|t| (0..horizon).map(|s| (-b * dist[s][t]).exp()).sum::<f64>())
                .fold(0.0, f64::max);
            let bound = (witness > 0.0).then(|| {
                let x = (-b * witness).exp();
                1.0 + 2.0 * x / (1.0 - x)
            });
            (b, bound, partial)
        })
        .collect();
    Ok(EdReport { witness, betas })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailRow {
    pub z: i64,
    pub phi_hat: f64,
    pub fit: f64,
    pub lo: f64,
    pub hi: f64,
    pub survivors: usize,
    pub in_window: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub rows: Vec<TailRow>,
    /// Decay rate per unit z, natural-log units: Φ(z) ≈ C e^(−κ z).
    pub kappa: f64,
    pub ci: (f64, f64),
    pub c1: f64,
    pub c2: f64,
    pub window: (i64, i64),
}

impl TailFit {
    pub fn write_csv(&self, out: &mut String) {
        out.push_str("z,phi_hat,fit,lo,hi\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.8e},{:.8e},{:.8e},{:.8e}", r.z, r.phi_hat, r.fit, r.lo, r.hi);
        }
    }
}

/// Survivor counts #{Δ ≥ z} for z = zmin..=zmax.
fn survivors(samples: &[i64], zmin: i64, zmax: i64) -> Vec<usize> {
    let mut hist = vec![0usize; (zmax - zmin + 1) as usize];
    for &x in samples {
        hist[(x - zmin) as usize] += 1;
    }
    let mut acc = 0;
    let mut out = vec![0; hist.len()];
    for i in (0..hist.len()).rev() {
        acc += hist[i];
        out[i] = acc;
    }
    out
}

/// Weighted least squares of ln Φ̂ on z over the window; returns (κ, ln C).
fn fit_window(surv: &[usize], total: usize, zmin: i64, window: (i64, i64)) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64, f64)> = (window.0..=window.1)
        .filter_map(|z| {
            let c = surv[(z - zmin) as usize];
            (c > 0).then(|| (z as f64, (c as f64 / total as f64).ln(), c as f64))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let w: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / w;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / w;
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((-slope, my - slope * mx))
}

pub const TAIL_MIN_SURVIVORS: usize = 30;

/// Fits Φ̂(z) = #{Δ ≥ z}/J on the linear regime: the lowest tenth of the z
/// range and every z with fewer than 30 survivors are dropped. The
/// confidence interval for κ comes from `boot` bootstrap resamples.
pub fn tail_fit(samples: &[i64], boot: usize, seed: u64) -> Result<TailFit> {
    if samples.len() < 1000 {
        return Err(Error::InsufficientData(format!("{} samples, need at least 1000", samples.len())));
    }
    let total = samples.len();
    let zmin = *samples.iter().min().unwrap();
    let zmax = *samples.iter().max().unwrap();
    let surv = survivors(samples, zmin, zmax);
    let span = zmax - zmin + 1;
    let drop = ((span as f64) * 0.1).ceil().max(1.0) as i64;
    let lo_z = zmin + drop;
    let hi_z = (zmin..=zmax).filter(|&z| surv[(z - zmin) as usize] >= TAIL_MIN_SURVIVORS).max().unwrap_or(zmin);
    if hi_z - lo_z < 1 {
        return Err(Error::InsufficientData("no linear regime detected".into()));
    }
    let window = (lo_z, hi_z);
    let (kappa, lnc) =
        fit_window(&surv, total, zmin, window).ok_or_else(|| Error::InsufficientData("no linear regime detected".into()))?;

    let reps = par::map_indexed(boot, |b| {
        let mut rng = par::item_rng(seed, b as u64);
        let resample: Vec<i64> = (0..total).map(|_| samples[rng.gen_range(0..total)]).collect();
        let s = survivors(&resample, zmin, zmax);
        fit_window(&s, total, zmin, window).map(|f| f.0)
    });
    let mut ks: Vec<f64> = reps.into_iter().flatten().collect();
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci = if ks.is_empty() {
        (kappa, kappa)
    } else {
        let at = |p: f64| ks[((ks.len() - 1) as f64 * p).round() as usize];
        (at(0.025), at(0.975))
    };

    let mut rows = Vec::new();
    let (mut c1, mut c2) = (f64::INFINITY, 0.0f64);
    for z in zmin..=zmax {
        let c = surv[(z - zmin) as usize];
        let phi = c as f64 / total as f64;
        let half = 1.96 * (phi * (1.0 - phi) / total as f64).sqrt();
        let in_window = (window.0..=window.1).contains(&z);
        if in_window && c > 0 {
            let env = phi * (kappa * z as f64).exp();
            c1 = c1.min(env);
            c2 = c2.max(env);
        }
        rows.push(TailRow {
            z,
            phi_hat: phi,
            fit: (lnc - kappa * z as f64).exp(),
            lo: (phi - half).max(0.0),
            hi: (phi + half).min(1.0),
            survivors: c,
            in_window,
        });
    }
    Ok(TailFit { rows, kappa, ci, c1, c2, window })
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.partial_cmp(q).unwrap());
    y.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n1, n2) = (x.len(), y.len());
    if n1 == 0 || n2 == 0 {
        return (0.0, 1.0);
    }
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n1 && j < n2 {
        let v = x[i].min(y[j]);
        while i < n1 && x[i] <= v {
            i += 1;
        }
        while j < n2 && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// Q_KS(λ) = P(K > λ) for the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * (y + y.powi(9) + y.powi(25) + y.powi(49));
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_counts_match_bits() {
        let h = HitFamily::from_rows(1, 200, vec![vec![1, 2, 63, 64, 65, 128, 129, 200]]);
        let naive = |m: usize, n: usize| (m..=n).filter(|&t| h.get(0, t)).count() as u64;
        for m in 1..=200 {
            for n in m..=200 {
                assert_eq!(h.window_count(0, m, n), naive(m, n), "{m} {n}");
            }
        }
    }

    #[test]
    fn trivial_families() {
        let z = HitFamily::new(5, 50).with_mu(vec![0.0; 50]).unwrap();
        let (s, e) = sprindzhuk_sums(&z, 50).unwrap();
        assert!(s.iter().all(|&x| x == 0) && e == 0.0);
        let ones = HitFamily::from_rows(3, 40, vec![(1..=40).collect(); 3]).with_mu(vec![1.0; 40]).unwrap();
        let (s, e) = sprindzhuk_sums(&ones, 40).unwrap();
        assert!(s.iter().all(|&x| x == 40) && e == 40.0);
        assert_eq!(bc_verdict(&HitFamily::new(0, 0)).unwrap().verdict, BcVerdict::MeasureZero);
    }

    #[test]
    fn fair_coins_concentrate() {
        let h = independent_family(200, 10_000, |_| 0.5, 3);
        let (s, e) = sprindzhuk_sums(&h, 10_000).unwrap();
        let inside = s.iter().filter(|&&x| (0.97..=1.03).contains(&(x as f64 / e))).count();
        assert!(inside as f64 >= 0.99 * 200.0);
    }

    #[test]
    fn pair_correlation_independent_vs_duplicated() {
        let ind = independent_family(2000, 64, |_| 0.5, 1);
        let pc = pair_correlation(&ind, 1, 64).unwrap();
        assert!(pc.off_diagonal.abs() < 3.0, "{pc:?}");
        assert!((pc.ratio - 0.5).abs() < 0.1);
        let dup = duplicated_family(2000, 64, 0.5, 1);
        let pc = pair_correlation(&dup, 1, 64).unwrap();
        assert!((pc.excess / (64.0 * 64.0 / 4.0) - 1.0).abs() < 0.1);
        assert!(!quasi_independence(&dup).unwrap().holds());
        assert!(quasi_independence(&ind).unwrap().holds());
        assert!(pair_correlation(&HitFamily::new(1, 4), 1, 4).is_err());
    }

    #[test]
    fn error_term_independent_and_adversarial() {
        let grid: Vec<usize> = (6..=14).map(|k| 1 << k).collect();
        let ind = independent_family(300, 1 << 14, |_| 0.5, 8);
        let r = error_term_check(&ind, &grid, 0.1).unwrap();
        assert!((r.exponent - 0.5).abs() < 0.1, "{}", r.exponent);
        let dup = duplicated_family(300, 1 << 14, 0.5, 8);
        assert!(!error_term_check(&dup, &grid, 0.1).unwrap().all_within());
        let ones = HitFamily::from_rows(2, 64, vec![(1..=64).collect(); 2]).with_mu(vec![1.0; 64]).unwrap();
        let r = error_term_check(&ones, &[8, 16, 64], 0.1).unwrap();
        assert!(r.all_within());
    }

    #[test]
    fn ed_geometric_and_constant() {
        let r = ed_check(50, |s, t| 2.0 * (s - t).abs() as f64, &[0.1, 1.0, 10.0]).unwrap();
        assert!(r.certified());
        assert_eq!(r.witness, 2.0);
        for &(_, bound, partial) in &r.betas {
            assert!(partial <= bound.unwrap() + 1e-9);
        }
        assert!(!ed_check(50, |_, _| 0.0, &[0.1, 1.0, 10.0]).unwrap().certified());
        assert!(!ed_check(50, |s, t| ((s - t).abs() as f64).ln(), &[0.1]).unwrap().certified());
        assert!(ed_check(1, |_, _| 0.0, &[1.0]).is_err());
    }

    #[test]
    fn tail_fit_on_exact_geometric() {
        // Φ(z) = 4^-z exactly, realized as a deterministic histogram.
        let mut samples = Vec::new();
        let total = 1i64 << 20;
        for z in 0..10 {
            let count = (total >> (2 * z)) - (total >> (2 * (z + 1)));
            samples.extend(std::iter::repeat_n(z, count as usize));
        }
        samples.extend(std::iter::repeat_n(10, (total >> 20) as usize));
        let fit = tail_fit(&samples, 20, 1).unwrap();
        assert!((fit.kappa - 2.0 * 2f64.ln()).abs() < 1e-6, "{}", fit.kappa);
        assert!(fit.c1 <= fit.c2);
        assert!(fit.rows.windows(2).all(|w| w[0].phi_hat >= w[1].phi_hat));
        assert!(tail_fit(&[1; 10], 10, 1).is_err());
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let b: Vec<f64> = (0..500).map(|i| i as f64 / 500.0 + 0.3).collect();
        assert!(ks_two_sample(&a, &a).1 > 0.99);
        assert!(ks_two_sample(&a, &b).1 < 1e-6);
    }
}
