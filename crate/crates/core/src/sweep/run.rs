use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{CheckResult, FitEntry, Provenance, RunReport, Series, SweepConfig, SweepError, TraceSeries};
use crate::decay::{cross_check_alpha, worst_case_ensemble};
use crate::error::Point;
use crate::fit::{fit_loglog, logspace};
use crate::grid::{sample_real, wrap, GridFunction, PeriodicGrid};
use crate::resolvent::{
    damping_identity_check, low_energy_certificate, resolvent_measure, snap_q, solve_problem, BetaStrategy,
    ResolventPoint, StationaryProblem,
};
use crate::weyl::commutator_identity_check;
use crate::{DampingProfile, C64};

pub const CACHE_ENV: &str = "DAMPWAVE_CACHE_DIR";
pub const RESOLVENT_CSV: &str = "resolvent.csv";
pub const DECAY_CSV: &str = "decay.csv";
pub const REPORT_JSON: &str = "report.json";

const VERSION: &str = env!("CARGO_PKG_VERSION");
const IDENTITY_TOL: f64 = 1e-10;
const LOW_ENERGY_TOL: f64 = 1e-8;
const LOW_ENERGY_EPS1: f64 = 0.1;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force: bool,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    /// Overrides both the environment variable and the default location.
    pub cache_dir: Option<PathBuf>,
}

pub fn config_hash(cfg: &SweepConfig) -> String {
    let mut h = Sha256::new();
    h.update(cfg.canonical().as_bytes());
    h.update(b"\ndampwave ");
    h.update(VERSION.as_bytes());
    hex::encode(h.finalize())
}

/// `--cache-dir`, then `$DAMPWAVE_CACHE_DIR`, then `<output_dir>/.cache`.
pub fn cache_root(cfg: &SweepConfig, opts: &RunOptions) -> PathBuf {
    opts.cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output_dir.join(".cache"))
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunReport, SweepError> {
    run_config(&SweepConfig::load(config_path)?, opts)
}

pub fn run_config(cfg: &SweepConfig, opts: &RunOptions) -> Result<RunReport, SweepError> {
    let hash = config_hash(cfg);
    let entry = cache_root(cfg, opts).join(&hash);
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(SweepError::io(out))?;

    if !opts.force && entry.join(REPORT_JSON).is_file() {
        log::info!("cache hit {hash}");
        let mut report = read_report(&entry.join(REPORT_JSON))?;
        copy_artifacts(&entry, out)?;
        report.provenance.cached = true;
        write_json(&out.join(REPORT_JSON), &report)?;
        return Ok(report);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| SweepError::Config(format!("thread pool: {e}")))?;
    let jobs = pool.current_num_threads();
    let started = now();
    let (report, files) = pool.install(|| execute(cfg, &hash))?;
    let report = RunReport {
        provenance: Provenance {
            toolkit: "dampwave".into(),
            version: VERSION.into(),
            started_unix: started,
            finished_unix: now(),
            cached: false,
            jobs,
        },
        ..report
    };

    // Stage in a sibling directory, then rename, so a cache entry is never partial.
    let root = entry.parent().expect("cache entry has a parent");
    std::fs::create_dir_all(root).map_err(SweepError::io(root))?;
    let stage = root.join(format!(".stage-{hash}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&stage);
    std::fs::create_dir_all(&stage).map_err(SweepError::io(&stage))?;
    for (name, body) in &files {
        let p = stage.join(name);
        std::fs::write(&p, body).map_err(SweepError::io(&p))?;
    }
    write_json(&stage.join(REPORT_JSON), &report)?;
    if entry.exists() {
        std::fs::remove_dir_all(&entry).map_err(SweepError::io(&entry))?;
    }
    std::fs::rename(&stage, &entry).map_err(SweepError::io(&entry))?;
    copy_artifacts(&entry, out)?;
    Ok(report)
}

fn read_report(path: &Path) -> Result<RunReport, SweepError> {
    let text = std::fs::read_to_string(path).map_err(SweepError::io(path))?;
    serde_json::from_str(&text).map_err(|e| SweepError::Config(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, report: &RunReport) -> Result<(), SweepError> {
    let body = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, body + "\n").map_err(SweepError::io(path))
}

fn copy_artifacts(from: &Path, to: &Path) -> Result<(), SweepError> {
    for e in std::fs::read_dir(from).map_err(SweepError::io(from))? {
        let e = e.map_err(SweepError::io(from))?;
        let dst = to.join(e.file_name());
        std::fs::copy(e.path(), &dst).map_err(SweepError::io(&dst))?;
    }
    Ok(())
}

fn numeric(stage: impl Into<String>) -> impl FnOnce(crate::Error) -> SweepError {
    let stage = stage.into();
    move |source| SweepError::Numeric { stage, source }
}

/// Independent stream per (check, point) so results do not depend on scheduling.
fn stream_rng(seed: u64, name: &str, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tag = Sha256::digest(name.as_bytes());
    let base = u64::from_le_bytes(tag[..8].try_into().expect("8 bytes"));
    rng.set_stream(base.wrapping_add(index as u64));
    rng
}

fn random_source(grid: PeriodicGrid, rng: &mut ChaCha8Rng) -> GridFunction {
    let v = (0..grid.n()).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    GridFunction::new(grid, v).expect("grid length")
}

type Files = Vec<(String, String)>;

struct Sweep {
    points: Vec<ResolventPoint>,
    rows: Vec<(f64, f64, Option<i64>, f64)>,
}

fn execute(cfg: &SweepConfig, hash: &str) -> Result<(RunReport, Files), SweepError> {
    let profile = cfg.build_profile()?;
    let strategy = cfg.beta_strategy();
    let qs = cfg.q_values();
    let mut fits = BTreeMap::new();
    let mut checks = BTreeMap::new();
    let mut traces = BTreeMap::new();
    let mut files = Vec::new();

    let sweep = resolvent_sweep(cfg, &profile, &qs, &strategy)?;
    let mut csv = String::from("q,beta,k,norm\n");
    for (q, b, k, n) in &sweep.rows {
        let k = k.map(|k| k.to_string()).unwrap_or_default();
        writeln!(csv, "{q},{b},{k},{n}").expect("string write");
    }
    files.push((RESOLVENT_CSV.to_string(), csv));
    if sweep.points.len() >= 2 {
        let x: Vec<f64> = sweep.points.iter().map(|p| p.q).collect();
        let y: Vec<f64> = sweep.points.iter().map(|p| p.norm).collect();
        let fit = fit_loglog(&x, &y).map_err(numeric("resolvent fit"))?;
        let series = Series { x_label: "q".into(), y_label: "resolvent norm".into(), x, y };
        fits.insert("resolvent".to_string(), FitEntry { fit, series });
    } else {
        log::warn!("fewer than two q values; no resolvent fit");
    }

    for name in &cfg.checks {
        let result = match name.as_str() {
            "damping_identity" => damping_identity(cfg, &profile, &sweep)?,
            "commutator_identity" => commutator_identity(cfg, &profile, &sweep)?,
            "low_energy" => low_energy(cfg, &profile, &qs)?,
            "decay" => {
                let (result, fit, trace, csv) = decay(cfg, &profile, fits.get("resolvent").map(|f| f.fit.slope))?;
                fits.insert("decay".into(), fit);
                traces.insert("decay".into(), trace);
                files.push((DECAY_CSV.to_string(), csv));
                result
            }
            other => return Err(SweepError::Unknown { kind: "check", name: other.into() }),
        };
        checks.insert(name.clone(), result);
    }
    let report = RunReport {
        config_hash: hash.to_string(),
        fits,
        checks,
        traces,
        provenance: Provenance {
            toolkit: String::new(),
            version: String::new(),
            started_unix: 0.0,
            finished_unix: 0.0,
            cached: false,
            jobs: 0,
        },
    };
    Ok((report, files))
}

fn grid_for(cfg: &SweepConfig, q: f64) -> Result<PeriodicGrid, SweepError> {
    cfg.grid_rule().grid_for(q).map_err(|e| SweepError::Config(e.to_string()))
}

fn resolvent_sweep(
    cfg: &SweepConfig,
    profile: &DampingProfile,
    qs: &[f64],
    strategy: &BetaStrategy,
) -> Result<Sweep, SweepError> {
    let grids: Vec<PeriodicGrid> = qs.iter().map(|&q| grid_for(cfg, q)).collect::<Result<_, _>>()?;
    let measured: Vec<Result<(ResolventPoint, Vec<(f64, f64, Option<i64>, f64)>), crate::Error>> = qs
        .par_iter()
        .zip(&grids)
        .map(|(&q0, &g)| {
            let q = if cfg.sweep.snap { snap_q(profile, q0, g, cfg.sweep.eps2)? } else { q0 };
            let rows = match strategy {
                BetaStrategy::List(list) => {
                    crate::resolvent::beta_sweep(profile, q, list, g)?.into_iter().map(|(b, n)| (q, b, None, n)).collect()
                }
                _ => Vec::new(),
            };
            let p = resolvent_measure(profile, q, g, strategy).map_err(|e| attach_q(e, q))?;
            let rows = if rows.is_empty() { vec![(p.q, p.beta, p.k, p.norm)] } else { rows };
            Ok((p, rows))
        })
        .collect();
    let mut out = Sweep { points: Vec::new(), rows: Vec::new() };
    for (m, q) in measured.into_iter().zip(qs) {
        let (p, rows) = m.map_err(numeric(format!("resolvent sweep (requested q={q})")))?;
        out.points.push(p);
        out.rows.extend(rows);
    }
    Ok(out)
}

fn attach_q(e: crate::Error, q: f64) -> crate::Error {
    e.at(Point { q: Some(q), ..Default::default() })
}

fn beta_for(p: &ResolventPoint) -> f64 {
    if p.beta.is_finite() {
        p.beta
    } else {
        p.q * p.q / 2.0
    }
}

fn damping_identity(cfg: &SweepConfig, profile: &DampingProfile, sweep: &Sweep) -> Result<CheckResult, SweepError> {
    let residuals: Vec<Result<f64, crate::Error>> = sweep
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let g = cfg.grid_rule().grid_for(p.q)?;
            let f = random_source(g, &mut stream_rng(cfg.seed, "damping_identity", i));
            let sp = StationaryProblem::new(profile.clone(), p.q, beta_for(p), g)?;
            let u = solve_problem(&sp, &f)?;
            Ok(damping_identity_check(&sp, &u, &f)?.identity_residual)
        })
        .collect();
    let r: Vec<f64> = residuals.into_iter().collect::<Result<_, _>>().map_err(numeric("damping identity"))?;
    let worst = r.iter().cloned().fold(0.0, f64::max);
    Ok(CheckResult {
        pass: worst <= IDENTITY_TOL,
        values: BTreeMap::from([
            ("residuals".to_string(), json!(r)),
            ("max_residual".to_string(), json!(worst)),
            ("tolerance".to_string(), json!(IDENTITY_TOL)),
        ]),
    })
}

fn commutator_identity(cfg: &SweepConfig, profile: &DampingProfile, sweep: &Sweep) -> Result<CheckResult, SweepError> {
    let gamma = cfg.sweep.gamma.unwrap_or(1);
    let tau = cfg.sweep.tau.unwrap_or(0.75);
    let residuals: Vec<Result<f64, crate::Error>> = sweep
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let g = cfg.grid_rule().grid_for(p.q)?;
            let f = random_source(g, &mut stream_rng(cfg.seed, "commutator_identity", i));
            let h = p.q.powf(-1.0 / gamma as f64);
            commutator_identity_check(profile, h, tau, gamma, beta_for(p), &f)
                .map(|r| r.residual)
                .map_err(|e| e.at(Point { q: Some(p.q), beta: Some(beta_for(p)), k: None, h: Some(h) }))
        })
        .collect();
    let r: Vec<f64> = residuals.into_iter().collect::<Result<_, _>>().map_err(numeric("commutator identity"))?;
    let worst = r.iter().cloned().fold(0.0, f64::max);
    Ok(CheckResult {
        pass: worst <= IDENTITY_TOL,
        values: BTreeMap::from([
            ("residuals".to_string(), json!(r)),
            ("max_residual".to_string(), json!(worst)),
            ("tau".to_string(), json!(tau)),
            ("gamma".to_string(), json!(gamma)),
        ]),
    })
}

fn low_energy(cfg: &SweepConfig, profile: &DampingProfile, qs: &[f64]) -> Result<CheckResult, SweepError> {
    let limit = std::f64::consts::PI.powi(2) / (16.0 * (profile.sigma + LOW_ENERGY_EPS1).powi(2));
    let beta = 0.5 * limit;
    let out: Vec<Result<(f64, f64), crate::Error>> = qs
        .par_iter()
        .map(|&q| {
            let g = cfg.grid_rule().grid_for(q)?;
            let f = sample_real(|x| (-wrap(x).powi(2) / 0.1).exp(), g);
            let r = low_energy_certificate(profile, q, beta, LOW_ENERGY_EPS1, g, &f)
                .map_err(|e| e.at(Point::q_beta(q, beta)))?;
            Ok((r.constant, r.identity_residual))
        })
        .collect();
    let out: Vec<(f64, f64)> = out.into_iter().collect::<Result<_, _>>().map_err(numeric("low-energy estimate"))?;
    let cs: Vec<f64> = out.iter().map(|o| o.0).collect();
    let worst = out.iter().map(|o| o.1).fold(0.0, f64::max);
    let spread = cs.iter().cloned().fold(f64::MIN, f64::max) / cs.iter().cloned().fold(f64::MAX, f64::min) - 1.0;
    Ok(CheckResult {
        pass: spread < 0.2 && worst <= LOW_ENERGY_TOL,
        values: BTreeMap::from([
            ("beta".to_string(), json!(beta)),
            ("constants".to_string(), json!(cs)),
            ("spread".to_string(), json!(spread)),
            ("max_identity_residual".to_string(), json!(worst)),
        ]),
    })
}

fn decay(
    cfg: &SweepConfig,
    profile: &DampingProfile,
    resolvent_slope: Option<f64>,
) -> Result<(CheckResult, FitEntry, TraceSeries, String), SweepError> {
    let d = &cfg.decay;
    let n = match cfg.grid_n {
        super::GridSize::Fixed(n) => n,
        super::GridSize::Auto(_) => (4 * d.k_max.max(1) as usize).max(128),
    };
    let grid = PeriodicGrid::new(n).map_err(|e| SweepError::Config(e.to_string()))?;
    let mut times = vec![0.0];
    times.extend(logspace(1.0, d.t_max, d.n_times));
    let e = worst_case_ensemble(profile, d.k_max, grid, &times, cfg.seed).map_err(numeric("decay ensemble"))?;

    let norm = e.envelope.normalized();
    let trace = TraceSeries { t: times.clone(), energy: e.envelope.energies.clone(), sqrt_energy_over_data_norm: norm };
    let mut csv = String::from("t,E,E_sqrt_over_datanorm\n");
    for i in 0..times.len() {
        writeln!(csv, "{},{},{}", trace.t[i], trace.energy[i], trace.sqrt_energy_over_data_norm[i]).expect("string write");
    }

    let (lo, hi) = e.window;
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= lo && times[i] <= hi).collect();
    let series = Series {
        x_label: "1 + t".into(),
        y_label: "sqrt(E) / data norm".into(),
        x: idx.iter().map(|&i| 1.0 + times[i]).collect(),
        y: idx.iter().map(|&i| trace.sqrt_energy_over_data_norm[i]).collect(),
    };
    let fit = FitEntry { fit: e.fit.fit, series };

    let mut values = BTreeMap::from([
        ("alpha".to_string(), json!(e.fit.alpha)),
        ("alpha_early".to_string(), json!(e.fit.alpha_early)),
        ("alpha_late".to_string(), json!(e.fit.alpha_late)),
        ("super_polynomial".to_string(), json!(e.fit.super_polynomial)),
        ("window".to_string(), json!([lo, hi])),
        ("slowest".to_string(), json!(e.slowest)),
        ("grid_n".to_string(), json!(n)),
    ]);
    let pass = match resolvent_slope.filter(|s| *s > 0.0) {
        Some(s) => {
            let c = cross_check_alpha(s, e.fit.alpha).map_err(numeric("alpha cross-check"))?;
            values.insert("predicted_alpha".into(), json!(c.predicted_alpha));
            values.insert("alpha_difference".into(), json!(c.difference));
            c.pass
        }
        None => e.fit.alpha > 0.0,
    };
    Ok((CheckResult { pass, values }, fit, trace, csv))
}
