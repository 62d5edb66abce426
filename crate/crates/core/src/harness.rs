//! Config-driven experiment runner.
//!
//! A config is a list of `key = value` lines (`#` starts a comment). Every
//! run writes `report.txt` and one or more CSV tables into the output
//! directory; each file opens with the version string and the full config
//! echo as `#` lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::Rng;

use crate::cfrac::{approx_quality, cf_expand, determinant, pq_degree_stats};
use crate::dani::{
    dynamical_test, flowed_depth_samples_at, kg_experiment, kg_precision, lattice_of, random_matrix, series_test,
    solve_rt, wilson_interval, KgParams, PsiSpec, Verdict,
};
use crate::error::{Error, Result};
use crate::fq::{prime_power, Fq};
use crate::laurent::Laurent;
use crate::lattice::{cartan_distance, diag, FlowSpec};
use crate::norm::LogNorm;
use crate::shrink::{
    bc_verdict, duplicated_family, dyadic_grid, error_term_check, ed_check, independent_family, quasi_independence,
    tail_fit, BcVerdict, HitFamily,
};
use crate::tree::{
    cross_check_codes, haar_sample_d2, loglaw_limsup, median, ray_measure, siegel_check_d2, write_loglaw_csv,
    DepthSource, LoglawParams,
};
use crate::{par, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    CfracStats,
    Kg,
    Loglaw,
    Tail,
    Sprindzhuk,
    Ed,
    Siegel,
}

impl Kind {
    pub const ALL: [Kind; 7] =
        [Kind::CfracStats, Kind::Kg, Kind::Loglaw, Kind::Tail, Kind::Sprindzhuk, Kind::Ed, Kind::Siegel];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::CfracStats => "cfrac-stats",
            Kind::Kg => "kg",
            Kind::Loglaw => "loglaw",
            Kind::Tail => "tail",
            Kind::Sprindzhuk => "sprindzhuk",
            Kind::Ed => "ed",
            Kind::Siegel => "siegel",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Keys, defaults and ranges, as shown by `ulab --help`.
pub const CONFIG_HELP: &str = "\
Config keys (one `key = value` per line, `#` comments):
  kind       experiment: cfrac-stats | kg | loglaw | tail | sprindzhuk | ed | siegel
  q          field size, prime power in [2, 65536]              (default 2)
  m, n       Dani dimensions, each in [1, 4]                    (default 1, 1)
  psi        approximation function: power:<tau>[@<shift>],
             powerlog:<tau>:<c>, table:<v1>,<v2>,...            (default power:1)
  samples    sample count in [1, 10^7]       (default 10^5 for cfrac-stats, tail,
             siegel; 1000 for kg, sprindzhuk; 100 for loglaw; 1 for ed)
  seed       master seed, any u64                               (default 1)
  terms      partial quotients per series, [1, 10^4]            (default 20)
  precision  digits per sampled series, 0 = automatic           (default 0)
  degree     solution degree bound D, [1, 40]                   (default 16)
  window     lower end of the degree window (D/2 when 0)        (default 0)
  d0         degree cut-off D0 for convergent psi, [0, D)       (default 8)
  horizon    time horizon N, [2, 10^8]   (default 10^6 for loglaw, 64 for ed,
             10^5 otherwise; at most 4096 for ed and 400 for the cusp family)
  source     loglaw: haar-cf | unit | constant; tail: haar-d2 | flow (default auto)
  time       flow time t for tail source=flow, [1, 64]          (default 8)
  depth      depth cap L for Haar sampling, [2, 40]             (default 30)
  boot       bootstrap resamples for tail CIs, [0, 10^4]        (default 200)
  family     sprindzhuk family: independent | duplicated | cusp (default independent)
  mu         target measures: pow:<a> (t^-a), geom:<b> (b^-t), const:<p> (default const:0.01)
  betas      ED exponents, comma separated, positive            (default 0.1,1,10)
  radii      Siegel ball exponents B, comma separated, [0, 16]  (default 1,2)
  sequence   ED sequence: diagonal | constant                   (default diagonal)
  out        output directory                                   (default ulab-out)
Environment: ULAB_PRECISION overrides `precision` for every sampled series.";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub q: u32,
    pub m: usize,
    pub n: usize,
    pub psi: String,
    pub samples: usize,
    pub seed: u64,
    pub terms: usize,
    pub precision: u32,
    pub degree: usize,
    pub window: usize,
    pub d0: usize,
    pub horizon: u64,
    pub source: String,
    pub time: i64,
    pub depth: usize,
    pub boot: usize,
    pub family: String,
    pub mu: String,
    pub betas: Vec<f64>,
    pub radii: Vec<i64>,
    pub sequence: String,
    pub out: String,
}

const KEYS: [&str; 23] = [
    "kind", "q", "m", "n", "psi", "samples", "seed", "terms", "precision", "degree", "window", "d0", "horizon",
    "source", "time", "depth", "boot", "family", "mu", "betas", "radii", "sequence", "out",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
}

fn in_range<T: PartialOrd + std::fmt::Display + Copy>(key: &str, v: T, lo: T, hi: T) -> std::result::Result<(), String> {
    if v < lo || v > hi {
        return Err(format!("`{key}` = {v} outside [{lo}, {hi}]"));
    }
    Ok(())
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> Self {
        let samples = match kind {
            Kind::CfracStats | Kind::Tail | Kind::Siegel => 100_000,
            Kind::Kg | Kind::Sprindzhuk => 1000,
            Kind::Loglaw => 100,
            Kind::Ed => 1,
        };
        let horizon = match kind {
            Kind::Loglaw => 1_000_000,
            Kind::Ed => 64,
            _ => 100_000,
        };
        ExperimentConfig {
            kind,
            q: 2,
            m: 1,
            n: 1,
            psi: "power:1".into(),
            samples,
            seed: 1,
            terms: 20,
            precision: 0,
            degree: 16,
            window: 0,
            d0: 8,
            horizon,
            source: "auto".into(),
            time: 8,
            depth: 30,
            boot: 200,
            family: "independent".into(),
            mu: "const:0.01".into(),
            betas: vec![0.1, 1.0, 10.0],
            radii: vec![1, 2],
            sequence: "diagonal".into(),
            out: "ulab-out".into(),
        }
    }

    /// Sets one key from its text form. Range checks that involve several
    /// keys happen in [`validate`](Self::validate).
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let v = v.trim();
        match key {
            "kind" => {
                let k = Kind::parse(v).ok_or_else(|| format!("unknown kind `{v}`"))?;
                if k != self.kind {
                    return Err(format!("kind `{v}` conflicts with `{}`", self.kind.as_str()));
                }
            }
            "q" => {
                let q: u64 = num(key, v)?;
                if q > 65536 || prime_power(q).is_none() {
                    return Err(format!("`q` = {q} is not a prime power in [2, 65536]"));
                }
                self.q = q as u32;
            }
            "m" => self.m = num(key, v)?,
            "n" => self.n = num(key, v)?,
            "psi" => self.psi = v.to_string(),
            "samples" => self.samples = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "terms" => self.terms = num(key, v)?,
            "precision" => self.precision = num(key, v)?,
            "degree" => self.degree = num(key, v)?,
            "window" => self.window = num(key, v)?,
            "d0" => self.d0 = num(key, v)?,
            "horizon" => self.horizon = num(key, v)?,
            "source" => self.source = v.to_string(),
            "time" => self.time = num(key, v)?,
            "depth" => self.depth = num(key, v)?,
            "boot" => self.boot = num(key, v)?,
            "family" => self.family = v.to_string(),
            "mu" => self.mu = v.to_string(),
            "betas" => self.betas = v.split(',').map(|x| num(key, x.trim())).collect::<std::result::Result<_, _>>()?,
            "radii" => self.radii = v.split(',').map(|x| num(key, x.trim())).collect::<std::result::Result<_, _>>()?,
            "sequence" => self.sequence = v.to_string(),
            "out" => self.out = v.to_string(),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Checks every parameter against its documented range. On failure
    /// returns the offending key and a message.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let at = |k: &'static str| move |e: String| (k, e);
        in_range("m", self.m, 1, 4).map_err(at("m"))?;
        in_range("n", self.n, 1, 4).map_err(at("n"))?;
        PsiSpec::parse(&self.psi, self.q).map_err(|e| ("psi", format!("`psi`: {e}")))?;
        in_range("samples", self.samples, 1, 10_000_000).map_err(at("samples"))?;
        in_range("terms", self.terms, 1, 10_000).map_err(at("terms"))?;
        in_range("precision", self.precision, 0, 1_000_000).map_err(at("precision"))?;
        in_range("degree", self.degree, 1, 40).map_err(at("degree"))?;
        in_range("window", self.window, 0, self.degree - 1).map_err(at("window"))?;
        in_range("d0", self.d0, 0, self.degree - 1).map_err(at("d0"))?;
        in_range("horizon", self.horizon, 2, 100_000_000).map_err(at("horizon"))?;
        in_range("time", self.time, 1, 64).map_err(at("time"))?;
        in_range("depth", self.depth, 2, 40).map_err(at("depth"))?;
        in_range("boot", self.boot, 0, 10_000).map_err(at("boot"))?;
        self.depth_source().map_err(at("source"))?;
        self.tail_source().map_err(at("source"))?;
        if !["independent", "duplicated", "cusp"].contains(&self.family.as_str()) {
            return Err(("family", format!("unknown family `{}`", self.family)));
        }
        let mu = MuSpec::parse(&self.mu).map_err(at("mu"))?;
        if self.kind == Kind::Sprindzhuk && self.family == "duplicated" && !matches!(mu, MuSpec::Const(_)) {
            return Err(("mu", "the duplicated family needs `mu = const:<p>`".into()));
        }
        if self.kind == Kind::Sprindzhuk && self.family == "cusp" {
            in_range("horizon", self.horizon, 2, 400).map_err(at("horizon"))?;
        }
        if self.kind == Kind::Ed {
            in_range("horizon", self.horizon, 2, 4096).map_err(at("horizon"))?;
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(("betas", "`betas` must be positive numbers".into()));
        }
        if self.radii.is_empty() || self.radii.iter().any(|b| !(0..=16).contains(b)) {
            return Err(("radii", "`radii` must lie in [0, 16]".into()));
        }
        if !["diagonal", "constant"].contains(&self.sequence.as_str()) {
            return Err(("sequence", format!("unknown sequence `{}`", self.sequence)));
        }
        if self.out.is_empty() {
            return Err(("out", "`out` must not be empty".into()));
        }
        Ok(())
    }

    fn depth_source(&self) -> std::result::Result<DepthSource, String> {
        match (self.kind, self.source.as_str()) {
            (Kind::Loglaw, "auto" | "haar-cf") => Ok(DepthSource::HaarCf),
            (Kind::Loglaw, "unit") => Ok(DepthSource::UnitSpacing),
            (Kind::Loglaw, "constant") => Ok(DepthSource::Constant),
            (Kind::Loglaw, s) => Err(format!("loglaw source `{s}` is not haar-cf, unit or constant")),
            _ => Ok(DepthSource::HaarCf),
        }
    }

    fn tail_source(&self) -> std::result::Result<bool, String> {
        match (self.kind, self.source.as_str()) {
            (Kind::Tail, "auto" | "haar-d2") => Ok(false),
            (Kind::Tail, "flow") => Ok(true),
            (Kind::Tail, s) => Err(format!("tail source `{s}` is not haar-d2 or flow")),
            (Kind::Loglaw, _) => Ok(false),
            (_, "auto") => Ok(false),
            (k, s) => Err(format!("`source` = {s} has no meaning for {}", k.as_str())),
        }
    }

    /// Canonical `key = value` form; parses back to an equal config.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for k in KEYS {
            let v = match k {
                "kind" => self.kind.as_str().to_string(),
                "q" => self.q.to_string(),
                "m" => self.m.to_string(),
                "n" => self.n.to_string(),
                "psi" => self.psi.clone(),
                "samples" => self.samples.to_string(),
                "seed" => self.seed.to_string(),
                "terms" => self.terms.to_string(),
                "precision" => self.precision.to_string(),
                "degree" => self.degree.to_string(),
                "window" => self.window.to_string(),
                "d0" => self.d0.to_string(),
                "horizon" => self.horizon.to_string(),
                "source" => self.source.clone(),
                "time" => self.time.to_string(),
                "depth" => self.depth.to_string(),
                "boot" => self.boot.to_string(),
                "family" => self.family.clone(),
                "mu" => self.mu.clone(),
                "betas" => join(&self.betas),
                "radii" => join(&self.radii),
                "sequence" => self.sequence.clone(),
                "out" => self.out.clone(),
                _ => unreachable!(),
            };
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Digits per sampled series: `ULAB_PRECISION`, else `precision`, else `auto`.
    fn digits(&self, auto: u32) -> u32 {
        if let Some(p) = std::env::var("ULAB_PRECISION").ok().and_then(|v| v.trim().parse::<u32>().ok()) {
            if p > 0 {
                return p;
            }
        }
        if self.precision > 0 {
            self.precision
        } else {
            auto
        }
    }
}

/// Parses a config that names its own kind.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_for(text, None)
}

/// Parses a config; `kind` supplies (or must agree with) the `kind` key.
pub fn parse_config_for(text: &str, kind: Option<Kind>) -> Result<ExperimentConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| Error::parse(line, "expected `key = value`"))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::parse(line, format!("unknown key `{k}`")));
        }
        if v.is_empty() {
            return Err(Error::parse(line, format!("`{k}` has no value")));
        }
        if let Some(prev) = seen.insert(k.to_string(), line) {
            return Err(Error::parse(line, format!("`{k}` already set at line {prev}")));
        }
        entries.push((line, k.to_string(), v.to_string()));
    }
    let last = text.lines().count().max(1);
    let file_kind = match entries.iter().find(|e| e.1 == "kind") {
        Some((line, _, v)) => Some(Kind::parse(v).ok_or_else(|| Error::parse(*line, format!("unknown kind `{v}`")))?),
        None => None,
    };
    let kind = match (kind, file_kind) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::parse(seen["kind"], format!("kind `{}` conflicts with `{}`", b.as_str(), a.as_str())))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(Error::parse(last, "missing required key `kind`")),
    };
    let mut cfg = ExperimentConfig::new(kind);
    for (line, k, v) in &entries {
        cfg.set(k, v).map_err(|e| Error::parse(*line, e))?;
    }
    cfg.validate().map_err(|(k, e)| Error::parse(seen.get(k).copied().unwrap_or(last), e))?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MuSpec {
    Pow(f64),
    Geom(f64),
    Const(f64),
}

impl MuSpec {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let (tag, v) = s.split_once(':').ok_or_else(|| format!("`mu` = {s}: expected pow:<a>, geom:<b> or const:<p>"))?;
        let x: f64 = v.trim().parse().map_err(|_| format!("`mu`: cannot parse `{v}`"))?;
        match tag.trim() {
            "pow" if x > 0.0 && x.is_finite() => Ok(MuSpec::Pow(x)),
            "geom" if x > 1.0 && x.is_finite() => Ok(MuSpec::Geom(x)),
            "const" if (0.0..=1.0).contains(&x) => Ok(MuSpec::Const(x)),
            _ => Err(format!("`mu` = {s} out of range")),
        }
    }

    fn at(self, t: usize) -> f64 {
        let t = t as f64;
        match self {
            MuSpec::Pow(a) => t.powf(-a).min(1.0),
            MuSpec::Geom(b) => b.powf(-t),
            MuSpec::Const(p) => p,
        }
    }

    /// Borel–Cantelli prediction for independent targets.
    fn expected(self) -> BcVerdict {
        match self {
            MuSpec::Pow(a) if a > 1.0 => BcVerdict::MeasureZero,
            MuSpec::Pow(_) => BcVerdict::FullMeasure,
            MuSpec::Geom(_) => BcVerdict::MeasureZero,
            MuSpec::Const(p) if p > 0.0 => BcVerdict::FullMeasure,
            MuSpec::Const(_) => BcVerdict::MeasureZero,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A check marked as advisory failed.
    Warning,
    /// A claim the experiment tests did not hold.
    Violation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub advisory: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    pub report: String,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok | Status::Warning => 0,
            Status::Violation => 2,
        }
    }
}

/// 0 success, 2 threshold violation, 3 precision failure, 1 anything else.
pub fn exit_code(r: &Result<RunOutcome>) -> i32 {
    match r {
        Ok(o) => o.exit_code(),
        Err(e) if e.is_precision() => 3,
        Err(_) => 1,
    }
}

#[derive(Default)]
struct Output {
    lines: Vec<(String, String)>,
    checks: Vec<Check>,
    tables: Vec<(String, String)>,
}

impl Output {
    fn put(&mut self, k: &str, v: impl std::fmt::Display) {
        self.lines.push((k.to_string(), v.to_string()));
    }
    fn check(&mut self, name: &str, pass: bool) {
        self.checks.push(Check { name: name.to_string(), pass, advisory: false });
    }
    fn advise(&mut self, name: &str, pass: bool) {
        self.checks.push(Check { name: name.to_string(), pass, advisory: true });
    }
    fn table(&mut self, name: &str, body: String) {
        self.tables.push((name.to_string(), body));
    }
}

/// File header: version and config echo as `#` lines.
pub fn header(cfg: &ExperimentConfig) -> String {
    let mut s = format!("# {VERSION}\n");
    for l in cfg.echo().lines() {
        let _ = writeln!(s, "# {l}");
    }
    s
}

/// Runs the experiment with `workers` threads (0 = all cores) and writes
/// its files. Output bytes do not depend on `workers`.
pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutcome> {
    cfg.validate().map_err(|(_, e)| Error::parse(0, e))?;
    let out = par::with_workers(workers, || compute(cfg))?;
    let status = if out.checks.iter().any(|c| !c.pass && !c.advisory) {
        Status::Violation
    } else if out.checks.iter().any(|c| !c.pass) {
        Status::Warning
    } else {
        Status::Ok
    };
    let head = header(cfg);
    let mut report = head.clone();
    let _ = writeln!(report, "experiment: {}", cfg.kind.as_str());
    for (k, v) in &out.lines {
        let _ = writeln!(report, "{k}: {v}");
    }
    for c in &out.checks {
        let mark = match (c.pass, c.advisory) {
            (true, _) => "PASS",
            (false, true) => "WARN",
            (false, false) => "FAIL",
        };
        let _ = writeln!(report, "check {}: {mark}", c.name);
    }
    let _ = writeln!(
        report,
        "status: {}",
        match status {
            Status::Ok => "ok",
            Status::Warning => "warning",
            Status::Violation => "violation",
        }
    );
    let dir = PathBuf::from(&cfg.out);
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    let mut write = |name: &str, body: &str| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        files.push(p);
        Ok(())
    };
    write("report.txt", &report)?;
    for (name, body) in &out.tables {
        write(name, &format!("{head}{body}"))?;
    }
    Ok(RunOutcome { status, checks: out.checks, files, report })
}

fn compute(cfg: &ExperimentConfig) -> Result<Output> {
    match cfg.kind {
        Kind::CfracStats => run_cfrac(cfg),
        Kind::Kg => run_kg(cfg),
        Kind::Loglaw => run_loglaw(cfg),
        Kind::Tail => run_tail(cfg),
        Kind::Sprindzhuk => run_sprindzhuk(cfg),
        Kind::Ed => run_ed(cfg),
        Kind::Siegel => run_siegel(cfg),
    }
}

/// Checks the determinant identity and the exact quality law on the
/// convergents of one series. Returns false on the first failure.
pub fn cf_laws_hold(alpha: &Laurent, terms: usize, f: &Fq) -> Result<bool> {
    let cf = cf_expand(alpha, terms + 1, f)?;
    for i in 1..cf.len() {
        if determinant(&cf, i, f).deg() != Some(0) {
            return Ok(false);
        }
    }
    for i in 0..cf.len().saturating_sub(1) {
        let want = LogNorm::Exp(-((cf.q_deg(i) + cf.q_deg(i + 1)) as i64));
        if approx_quality(alpha, &cf, i, f)? != want {
            return Ok(false);
        }
    }
    Ok(true)
}

fn run_cfrac(cfg: &ExperimentConfig) -> Result<Output> {
    let mut o = Output::default();
    let digits = cfg.digits(8 * cfg.terms as u32 + 64);
    let stats = pq_degree_stats(cfg.samples, cfg.q, cfg.terms, cfg.seed, digits)?;
    if stats.uncertified > 0 {
        return Err(Error::InsufficientPrecision(format!(
            "{} of {} partial quotients not certified at {digits} digits",
            stats.uncertified,
            cfg.samples * cfg.terms
        )));
    }
    let f = Fq::new(cfg.q as u64)?;
    let law_n = cfg.samples.min(1000);
    let laws = par::map_indexed(law_n, |i| {
        let mut rng = par::item_rng(cfg.seed, i as u64);
        let alpha = Laurent::random_unit_ball(&f, digits, &mut rng);
        cf_laws_hold(&alpha, cfg.terms, &f)
    });
    let law_fail = laws.into_iter().collect::<Result<Vec<bool>>>()?.iter().filter(|&&b| !b).count();
    let chi = stats.chi_square();
    o.put("digits", digits);
    o.put("partial_quotients", stats.total);
    o.put("chi_square", format!("{:.4} dof={} critical_99={:.4}", chi.statistic, chi.dof, chi.critical_99));
    o.put("law_samples", law_n);
    o.put("law_failures", law_fail);
    o.check("determinant and quality laws", law_fail == 0);
    o.check("degree law chi-square 99%", chi.accepts());
    let mut csv = String::from("d,count,freq,expected\n");
    for (d, c, fr, ex) in stats.rows() {
        let _ = writeln!(csv, "{d},{c},{fr:.6},{ex:.6}");
    }
    o.table("degrees.csv", csv);
    Ok(o)
}

fn run_kg(cfg: &ExperimentConfig) -> Result<Output> {
    let mut o = Output::default();
    let f = Fq::new(cfg.q as u64)?;
    let psi = PsiSpec::parse(&cfg.psi, cfg.q).map_err(|e| Error::parse(0, e))?;
    let (m, n, d) = (cfg.m, cfg.n, cfg.degree);
    let rep = kg_experiment(&psi, KgParams { m, n, samples: cfg.samples, degree_bound: d, seed: cfg.seed }, &f)?;
    let lo = if cfg.window == 0 { d / 2 } else { cfg.window };
    let top = rep.count_above(lo);
    let (wl, wh) = wilson_interval(top, rep.samples);
    let s = &rep.series;
    o.put("series_verdict", s.lattice.as_str());
    o.put("series_exponents", format!("{:.4},{:.4}", s.lattice_exponent, s.integral_exponent));
    o.put("window", format!("({lo}, {d}]"));
    o.put("fraction_in_window", format!("{:.4} [{wl:.4}, {wh:.4}]", top as f64 / rep.samples as f64));
    o.put("fraction_beyond_d0", format!("{:.4}", rep.fraction_above(cfg.d0)));
    o.put("mean_trace_hits", format!("{:.4} over t <= {}", rep.mean_hits(), rep.trace_horizon));
    o.check("series criteria agree", s.agree());
    match s.lattice {
        Verdict::Divergent => o.check("divergent: fraction in window >= 0.9", rep.fraction_above(lo) >= 0.9),
        Verdict::Convergent => {
            o.check("convergent: fraction beyond d0 <= 0.1", rep.fraction_above(cfg.d0) <= 0.1);
            let decay = rep.decay_factor(0..=cfg.d0, 10);
            o.put("decay_factor", decay.map_or("n/a".into(), |x| format!("{x:.4}")));
            o.check("convergent: decay factor >= 1.8", decay.is_some_and(|x| x >= 1.8));
        }
        Verdict::Inconclusive => {}
    }
    let mut csv = String::from("sample,max_degree,trace_hits\n");
    for (i, (md, h)) in rep.max_degree.iter().zip(&rep.trace_hits).enumerate() {
        let md = md.map_or("none".to_string(), |x| x.to_string());
        let _ = writeln!(csv, "{i},{md},{h}");
    }
    o.table("kg_samples.csv", csv);
    let mut csv = String::from("d0,count,fraction,lo,hi\n");
    for d0 in 0..d {
        let c = rep.count_above(d0);
        let (a, b) = wilson_interval(c, rep.samples);
        let _ = writeln!(csv, "{d0},{c},{:.6},{a:.6},{b:.6}", c as f64 / rep.samples as f64);
    }
    o.table("kg_fraction.csv", csv);
    let mut rng = par::item_rng(cfg.seed, 0);
    let a = random_matrix(&f, m, n, kg_precision(&psi, m, n, d), &mut rng);
    let dl = lattice_of(&a, &f)?;
    let mut csv = String::new();
    dynamical_test(&dl, &psi, 1..=rep.trace_horizon)?.write_csv(&mut csv);
    o.table("trace.csv", csv);
    Ok(o)
}

fn run_loglaw(cfg: &ExperimentConfig) -> Result<Output> {
    let mut o = Output::default();
    let source = cfg.depth_source().map_err(|e| Error::parse(0, e))?;
    let samples =
        loglaw_limsup(LoglawParams { samples: cfg.samples, horizon: cfg.horizon, q: cfg.q, seed: cfg.seed, source });
    let stats: Vec<f64> = samples.iter().map(|s| s.statistic).collect();
    let med = median(&stats);
    o.put("median_statistic", format!("{med:.6}"));
    if source != DepthSource::Constant {
        o.check("median within [0.85, 1.15]", (0.85..=1.15).contains(&med));
    }
    let f = Fq::new(cfg.q as u64)?;
    let digits = cfg.digits(128);
    let cross_n = cfg.samples.min(100);
    let cross_seed = par::derive_seed(cfg.seed, u64::MAX);
    let agree = par::map_indexed(cross_n, |i| {
        let mut rng = par::item_rng(cross_seed, i as u64);
        let alpha = Laurent::random_unit_ball(&f, digits, &mut rng);
        let (cf, flow) = cross_check_codes(&alpha, digits as i64, &f)?;
        Ok(cf == flow)
    });
    let mismatches = agree.into_iter().collect::<Result<Vec<bool>>>()?.iter().filter(|&&b| !b).count();
    o.put("code_cross_checks", cross_n);
    o.put("code_mismatches", mismatches);
    o.check("continued-fraction and flow codes agree", mismatches == 0);
    let mut csv = String::new();
    write_loglaw_csv(&samples, &mut csv);
    o.table("loglaw.csv", csv);
    let mut csv = String::from("sample,statistic\n");
    for (i, s) in stats.iter().enumerate() {
        let _ = writeln!(csv, "{i},{s:.6}");
    }
    o.table("loglaw_stats.csv", csv);
    Ok(o)
}

fn run_tail(cfg: &ExperimentConfig) -> Result<Output> {
    let mut o = Output::default();
    let flow = cfg.tail_source().map_err(|e| Error::parse(0, e))?;
    let lnq = (cfg.q as f64).ln();
    let (deltas, dim, tol) = if flow {
        let (m, n, t) = (cfg.m, cfg.n, cfg.time);
        let need = ((m + n) as i64 * t) as u32;
        let digits = cfg.digits(need);
        let d = flowed_depth_samples_at(m, n, t, cfg.samples, cfg.q, cfg.seed, digits)?;
        (d, m + n, 0.15)
    } else {
        let b = haar_sample_d2(cfg.samples, cfg.depth, cfg.q, cfg.seed)?;
        o.put("truncated_mass", format!("{:.3e}", b.truncated_mass));
        (b.deltas, 2, 0.05)
    };
    let fit = tail_fit(&deltas, cfg.boot, par::derive_seed(cfg.seed, u64::MAX))?;
    let target = dim as f64 * lnq;
    let rel = (fit.kappa - target) / target;
    o.put("dimension", dim);
    o.put("kappa", format!("{:.6} ci=[{:.6}, {:.6}]", fit.kappa, fit.ci.0, fit.ci.1));
    o.put("kappa_expected", format!("{target:.6}"));
    o.put("relative_error", format!("{rel:.6}"));
    o.put("fit_window", format!("[{}, {}]", fit.window.0, fit.window.1));
    o.put("envelope", format!("C1={:.6} C2={:.6}", fit.c1, fit.c2));
    o.check(&format!("kappa within {:.0}% of {dim} ln q", tol * 100.0), rel.abs() <= tol);
    let mut csv = String::new();
    fit.write_csv(&mut csv);
    o.table("tail.csv", csv);
    Ok(o)
}

fn cusp_family(cfg: &ExperimentConfig) -> Result<HitFamily> {
    let f = Fq::new(cfg.q as u64)?;
    let psi = PsiSpec::parse(&cfg.psi, cfg.q).map_err(|e| Error::parse(0, e))?;
    let (m, n) = (cfg.m, cfg.n);
    let horizon = cfg.horizon as i64;
    let digits = ((m + n) as i64 * horizon) as u32;
    let rs: Vec<Option<i64>> = (1..=horizon)
        .map(|t| match solve_rt(&psi, m, n, t) {
            Ok(r) => Ok(Some(r)),
            Err(Error::RtUndefined { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let rows = par::map_indexed(cfg.samples, |j| -> Result<Vec<usize>> {
        let mut rng = par::item_rng(cfg.seed, j as u64);
        let dl = lattice_of(&random_matrix(&f, m, n, digits, &mut rng), &f)?;
        let mut hits = Vec::new();
        for (i, r) in rs.iter().enumerate() {
            if let Some(r) = r {
                if dl.depth(i as i64 + 1)? >= *r {
                    hits.push(i + 1);
                }
            }
        }
        Ok(hits)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(HitFamily::from_rows(cfg.samples, horizon as usize, rows))
}

fn run_sprindzhuk(cfg: &ExperimentConfig) -> Result<Output> {
    let mut o = Output::default();
    let mu = MuSpec::parse(&cfg.mu).map_err(|e| Error::parse(0, e))?;
    let times = cfg.horizon as usize;
    let h = match cfg.family.as_str() {
        "independent" => {
            let fam = independent_family(cfg.samples, times, |t| mu.at(t), cfg.seed);
            fam.with_mu((1..=times).map(|t| mu.at(t)).collect())?
        }
        "duplicated" => {
            let MuSpec::Const(p) = mu else { unreachable!() };
            duplicated_family(cfg.samples, times, p, cfg.seed)
        }
        _ => cusp_family(cfg)?,
    };
    let bc = bc_verdict(&h)?;
    o.put("verdict", bc.verdict.as_str());
    o.put("finitely_many_fraction", format!("{:.4}", bc.finitely_many));
    o.put("near_one_fraction", format!("{:.4}", bc.near_one));
    let qi = quasi_independence(&h)?;
    o.put("quasi_independence_slope", format!("{:.4}", qi.slope));
    let grid: Vec<usize> = dyadic_grid(times).into_iter().filter(|&g| g >= 16).collect();
    if !grid.is_empty() {
        let et = error_term_check(&h, &grid, 0.01)?;
        let within = et.per_sample.iter().filter(|&&b| b).count();
        o.put("error_term_constant", format!("{:.4}", et.constant));
        o.put("error_term_within", format!("{within}/{}", et.per_sample.len()));
        o.put("error_exponent", format!("{:.4}", et.exponent));
        if cfg.family == "independent" && matches!(mu, MuSpec::Const(_)) && grid.len() >= 4 {
            o.check("error exponent 0.5 +- 0.05", (et.exponent - 0.5).abs() <= 0.05);
        }
    }
    match cfg.family.as_str() {
        "independent" => {
            let want = mu.expected();
            o.put("expected_verdict", want.as_str());
            o.check("Borel-Cantelli verdict", bc.verdict == want);
        }
        "duplicated" => o.check("quasi-independence violation flagged", !qi.holds()),
        _ => {
            let psi = PsiSpec::parse(&cfg.psi, cfg.q).map_err(|e| Error::parse(0, e))?;
            o.put("series_verdict", series_test(&psi, cfg.m, cfg.n, cfg.q).lattice.as_str());
        }
    }
    let mut csv = String::new();
    bc.write_csv(&mut csv);
    o.table("sprindzhuk.csv", csv);
    let mut csv = String::from("N,mass,inflation\n");
    for (n, mass, ratio) in &qi.windows {
        let _ = writeln!(csv, "{n},{mass:.6},{ratio:.6}");
    }
    o.table("quasi_independence.csv", csv);
    Ok(o)
}

fn run_ed(cfg: &ExperimentConfig) -> Result<Output> {
    let mut o = Output::default();
    let f = Fq::new(cfg.q as u64)?;
    let h = cfg.horizon as i64;
    let diagonal = cfg.sequence == "diagonal";
    let by_gap: Vec<f64> = (0..h)
        .map(|k| {
            if !diagonal || k == 0 {
                return Ok(0.0);
            }
            let g = diag(&FlowSpec::new(cfg.m, cfg.n, k).exponents());
            Ok(cartan_distance(&g, &f, 64)? as f64)
        })
        .collect::<Result<_>>()?;
    let rep = ed_check(cfg.horizon as usize, |s, t| by_gap[(s - t).unsigned_abs() as usize], &cfg.betas)?;
    o.put("witness", format!("{:.6}", rep.witness));
    let mut csv = String::from("beta,bound,partial_sup\n");
    for (b, bound, partial) in &rep.betas {
        let bs = bound.map_or("none".to_string(), |x| format!("{x:.6}"));
        let _ = writeln!(csv, "{b},{bs},{partial:.6}");
    }
    o.put("certified", rep.certified());
    if diagonal {
        o.check("diagonal sequence certified", rep.certified());
    } else {
        o.check("constant sequence rejected", rep.betas.iter().all(|b| b.1.is_none()));
    }
    o.table("ed.csv", csv);
    Ok(o)
}

fn run_siegel(cfg: &ExperimentConfig) -> Result<Output> {
    let mut o = Output::default();
    let rep = siegel_check_d2(&cfg.radii, cfg.samples, cfg.depth, cfg.q, cfg.seed)?;
    let mut csv = String::from("B,lhs,rhs,rhs_se,ratio\n");
    for s in &rep.sides {
        let _ = writeln!(csv, "{},{:.6},{:.6},{:.6},{:.6}", s.radius_exp, s.lhs, s.rhs, s.rhs_se, s.ratio());
    }
    o.put("spread", format!("{:.6}", rep.spread()));
    o.put("truncated_mass", format!("{:.3e}", rep.truncated_mass));
    o.advise("constants agree within 10%", rep.spread() <= 0.1);
    o.table("siegel.csv", csv);
    Ok(o)
}

/// Quick end-to-end checks of the arithmetic kernels, each a (name, pass) pair.
pub fn selftest(workers: usize) -> Vec<(String, bool)> {
    par::with_workers(workers, || {
        let mut out = Vec::new();
        let mut push = |name: &str, r: Result<bool>| out.push((name.to_string(), r.unwrap_or(false)));

        push("continued-fraction laws", (|| {
            let f = Fq::new(3)?;
            for i in 0..50 {
                let mut rng = par::item_rng(11, i);
                let alpha = Laurent::random_unit_ball(&f, 200, &mut rng);
                if !cf_laws_hold(&alpha, 12, &f)? {
                    return Ok(false);
                }
            }
            Ok(true)
        })());

        push("r(t) closed form", (|| {
            for tau in 1..=4i64 {
                let psi = PsiSpec::power_int(tau);
                for t in 1..=30i64 {
                    let want = (t * (tau - 1)).div_euclid(1 + tau);
                    if solve_rt(&psi, 1, 1, t)? != want {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        })());

        push("ray weights", (|| {
            let ray = ray_measure(2, 6)?;
            let half = num_rational::BigRational::new(1.into(), 2.into());
            Ok((1..6).all(|l| ray.ratio(l) == half))
        })());

        push("exponential divergence certificate", (|| {
            let f = Fq::new(2)?;
            let rep = ed_check(
                16,
                |s, t| {
                    let g = diag(&FlowSpec::new(1, 1, s - t).exponents());
                    cartan_distance(&g, &f, 64).map_or(0.0, |d| d as f64)
                },
                &[0.1, 1.0],
            )?;
            Ok(rep.certified() && (rep.witness - 2.0).abs() < 1e-12)
        })());

        push("worker-count independence", (|| {
            let a = par::with_workers(1, || pq_degree_stats(200, 2, 10, 5, 128))?;
            let b = par::with_workers(2, || pq_degree_stats(200, 2, 10, 5, 128))?;
            Ok(a == b)
        })());

        push("sampler reproducibility", {
            let mut r1 = par::item_rng(3, 7);
            let mut r2 = par::item_rng(3, 7);
            Ok((0..16).all(|_| r1.gen::<u64>() == r2.gen::<u64>()))
        });
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sets_q() {
        let c = parse_config("kind = kg\nq = 3\n").unwrap();
        assert_eq!(c.q, 3);
    }

    #[test]
    fn rejects_non_prime_power() {
        match parse_config("kind = kg\n\nq = 6\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        match parse_config("kind = kg\nsamlpes = 10\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("samlpes"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_config_is_an_error() {
        assert!(matches!(parse_config(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_config("# nothing\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn duplicate_and_conflicting_keys() {
        assert!(parse_config("kind = kg\nq = 2\nq = 3\n").is_err());
        assert!(parse_config_for("kind = kg\n", Some(Kind::Ed)).is_err());
        assert_eq!(parse_config_for("q = 5\n", Some(Kind::Ed)).unwrap().kind, Kind::Ed);
    }

    #[test]
    fn psi_validated_against_line() {
        match parse_config("kind = kg\npsi = power:x\nq = 2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kg_example_round_trips() {
        let text = "kind = kg\nq = 2\nm = 1\nn = 1\npsi = power:3\nsamples = 1000\ndegree = 16\nd0 = 8\nseed = 7\n";
        let c = parse_config(text).unwrap();
        let again = parse_config(&c.echo()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.echo(), c.echo());
    }

    #[test]
    fn every_kind_round_trips_with_defaults() {
        for k in Kind::ALL {
            let c = ExperimentConfig::new(k);
            c.validate().unwrap();
            assert_eq!(parse_config(&c.echo()).unwrap(), c);
        }
    }

    #[test]
    fn range_checks() {
        assert!(parse_config("kind = kg\ndegree = 41\n").is_err());
        assert!(parse_config("kind = ed\nhorizon = 5000\n").is_err());
        assert!(parse_config("kind = loglaw\nsource = flow\n").is_err());
        assert!(parse_config("kind = tail\nsource = flow\n").is_ok());
        assert!(parse_config("kind = sprindzhuk\nfamily = duplicated\nmu = pow:1\n").is_err());
        assert!(parse_config("kind = siegel\nradii = 1,17\n").is_err());
        assert!(parse_config("kind = ed\nbetas = 1,-1\n").is_err());
    }

    #[test]
    fn mu_specs() {
        assert_eq!(MuSpec::parse("pow:2").unwrap().expected(), BcVerdict::MeasureZero);
        assert_eq!(MuSpec::parse("pow:0.5").unwrap().expected(), BcVerdict::FullMeasure);
        assert_eq!(MuSpec::parse("geom:2").unwrap().at(3), 0.125);
        assert!(MuSpec::parse("const:2").is_err());
    }

    #[test]
    fn selftest_passes() {
        for (name, ok) in selftest(1) {
            assert!(ok, "{name}");
        }
    }

    #[test]
    fn run_writes_headed_files() {
        let dir = std::env::temp_dir().join(format!("ulab-harness-{}", std::process::id()));
        let mut c = ExperimentConfig::new(Kind::Ed);
        c.out = dir.to_string_lossy().into_owned();
        let r = run(&c, 1).unwrap();
        assert_eq!(r.exit_code(), 0);
        let csv = std::fs::read_to_string(dir.join("ed.csv")).unwrap();
        assert!(csv.starts_with(&header(&c)));
        assert!(csv.contains("beta,bound,partial_sup"));
        c.sequence = "constant".into();
        assert_eq!(run(&c, 1).unwrap().exit_code(), 0);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
