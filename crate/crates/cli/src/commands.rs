use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thinbasis_core::constants::{self, ExponentModel};
use thinbasis_core::expsum::FrequencyTable;
use thinbasis_core::numtheory::iroot;
use thinbasis_core::moments::{default_grid, exact_even_moment, quad_moment_table};
use thinbasis_core::randbasis::{
    self as rb, almost_all_experiment, upper_bound_monitor, ExperimentReport, MonitorReport, ProbTable,
};
use thinbasis_core::repcount::{f_coefficient, rep_count_with, Engine, RepQuery, Smoothness};
use thinbasis_core::singular::{sing_series, QSumEvaluator};
use thinbasis_core::smooth::{dickman_rho, SmoothSet};
use thinbasis_core::{arcs as arc, ArcSet, Classification, Growth, Route, WeylSumSpec};

use crate::config::{Format, OutputSpec, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{display, emit, json, write_atomic, Csv};
use crate::{fields, ArcsArg, ArcsArgs, ConstantsArgs, ModelArg, MomentsArgs, RepVariant, RepcountArgs, RouteArg, RunArgs};
use crate::{SingularArgs, SmoothArgs, WeylsumArgs};

pub fn constants(a: &ConstantsArgs) -> CliResult<String> {
    let model = match a.model {
        ModelArg::Transcendental => ExponentModel::transcendental(a.k),
        ModelArg::ZeroTail => ExponentModel::zero_tail(a.k),
        ModelArg::K2Delta8Zero if a.k == 2 => ExponentModel::k2_delta8_zero(),
        ModelArg::K2Delta8Zero => return Err(CliError::Config("k2-delta8-zero needs --k 2".into())),
        ModelArg::K3Delta12Zero if a.k == 3 => ExponentModel::k3_delta12_zero(),
        ModelArg::K3Delta12Zero => return Err(CliError::Config("k3-delta12-zero needs --k 3".into())),
    };
    model.validate()?;
    let (tau, tau_w) = constants::tau(&model)?;
    let (g0, g0_argmin) = constants::g0_with_argmin(&model)?;
    let s_min = (g0.floor() as u64 + 1).max(4 * a.k as u64 + 1);
    let s = a.s.unwrap_or(s_min);
    let t = a.t.unwrap_or(s as f64);
    let delta_star = constants::delta_star(&model, s, t)?;
    let nu = constants::nu_constants(&model, s).ok();
    let (omega, c1, c2) = constants::omega_c1_c2();
    let report = constants::threshold_report(a.k)?;
    let checks: Vec<_> = report.checks.iter().map(|(name, pass)| json!({ "check": name, "pass": pass })).collect();
    let all_pass = report.checks.iter().all(|c| c.1);
    let doc = json!({
        "k": a.k,
        "model": model,
        "tau": tau,
        "tau_w": tau_w,
        "g0": g0,
        "g0_argmin": g0_argmin,
        "s": s,
        "t": t,
        "delta_star": delta_star,
        "nu": nu,
        "omega": omega,
        "c1": c1,
        "c2": c2,
        "c1_bound": report.c1_bound,
        "inequality_report": checks,
        "all_pass": all_pass,
    });
    emit(a.out.as_deref(), &json(&doc))?;
    Ok(format!(
        "constants: k = {}, tau = {tau:.6e}, g0 = {g0:.4}, delta*_{s}({t}) = {delta_star:.4e}, {} checks {} -> {}",
        a.k,
        report.checks.len(),
        if all_pass { "pass" } else { "FAIL" },
        display(a.out.as_deref())
    ))
}

pub fn smooth(a: &SmoothArgs) -> CliResult<String> {
    let r = match (a.r, a.eta) {
        (Some(r), _) => r,
        (None, Some(eta)) if eta > 0.0 => a.p.powf(eta),
        _ => return Err(CliError::Config("need --R or a positive --eta".into())),
    };
    let set = SmoothSet::new(a.p, r)?;
    let u = if r > 1.0 { a.p.ln() / r.ln() } else { f64::INFINITY };
    let predicted = if u.is_finite() { dickman_rho(u) * a.p } else { 0.0 };
    let mut csv = Csv::new(&["P", "R", "count", "rho_prediction"]);
    csv.row(&fields![a.p, r, set.len(), predicted]);
    emit(a.out.as_deref(), &csv.into_bytes())?;
    if let Some(path) = &a.members {
        let mut m = Csv::new(&["x", "largest_prime_factor"]);
        for &x in set.members() {
            m.row(&fields![x, set.largest_prime_factor(x).unwrap_or(1)]);
        }
        write_atomic(path, &m.into_bytes())?;
    }
    Ok(format!("smooth: |A({}, {r})| = {} -> {}", a.p, set.len(), display(a.out.as_deref())))
}

pub fn weylsum(a: &WeylsumArgs) -> CliResult<String> {
    if a.alpha_grid == 0 {
        return Err(CliError::Config("--alpha-grid must be positive".into()));
    }
    let spec = WeylSumSpec { k: a.k, s: a.s, p: a.p, r: a.r.unwrap_or(a.p), variant: a.variant };
    spec.validate()?;
    let table = FrequencyTable::from_spec(&spec)?;
    let g = a.alpha_grid;
    let values: Vec<_> = (0..g).into_par_iter().map(|j| table.eval(j as f64 / g as f64)).collect();
    let mut csv = Csv::new(&["alpha", "re", "im", "abs"]);
    for (j, z) in values.iter().enumerate() {
        csv.row(&fields![j as f64 / g as f64, z.re, z.im, z.norm()]);
    }
    emit(a.out.as_deref(), &csv.into_bytes())?;
    Ok(format!("weylsum: {g} points, {} terms -> {}", table.len(), display(a.out.as_deref())))
}

fn read_input(path: &Path) -> CliResult<String> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text)?;
    } else {
        text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    }
    Ok(text)
}

pub fn arcs(a: &ArcsArgs) -> CliResult<String> {
    let dis = arc::ArcDissection::new(a.k, a.p, a.q)?;
    let text = read_input(&a.input)?;
    let mut alphas = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| CliError::Config(format!("line {}: not a number: {line:?}", i + 1)))?;
        if !v.is_finite() {
            return Err(CliError::Config(format!("line {}: alpha must be finite", i + 1)));
        }
        alphas.push((line.to_string(), v));
    }
    let labels: Vec<Classification> = alphas.par_iter().map(|(_, v)| dis.classify(*v)).collect();
    let mut csv = Csv::new(&["alpha", "label", "a", "q", "err"]);
    let mut major = 0;
    for ((raw, _), c) in alphas.iter().zip(&labels) {
        match *c {
            Classification::Major { a, q, err } => {
                major += 1;
                csv.row(&fields![raw, "major", a, q, err]);
            }
            Classification::Minor => csv.row(&fields![raw, "minor", "", "", ""]),
        }
    }
    emit(a.out.as_deref(), &csv.into_bytes())?;
    Ok(format!("arcs: {} values, {major} major -> {}", alphas.len(), display(a.out.as_deref())))
}

pub fn moments(a: &MomentsArgs) -> CliResult<String> {
    let spec = WeylSumSpec { k: a.k, s: a.s, p: a.p, r: a.r.unwrap_or(a.p), variant: a.variant };
    spec.validate()?;
    let need_q = || a.q.ok_or_else(|| CliError::Config("--Q is required for this arc set".into()));
    let arcs = match a.arcs {
        ArcsArg::Full => ArcSet::Full,
        ArcsArg::Major => ArcSet::Major { q: need_q()? },
        ArcsArg::Truncated => ArcSet::Truncated { q: need_q()? },
        ArcsArg::Minor => ArcSet::Minor { q: need_q()? },
    };
    if let Some(q) = a.q {
        arc::ArcDissection::new(a.k, a.p, q)?;
    }
    let table = FrequencyTable::from_spec(&spec)?;
    let grid = a.grid.unwrap_or_else(|| default_grid(&table));
    let quad = quad_moment_table(&table, a.t, arcs, a.p, a.k, grid)?;
    let exact = a.w.map(|w| exact_even_moment(&table, w)).transpose()?;
    let doc = json!({
        "spec": spec,
        "t": a.t,
        "arcs": arcs,
        "quad": quad,
        "exact_even": a.w.map(|w| json!({ "w": w, "value": exact })),
    });
    emit(a.out.as_deref(), &json(&doc))?;
    Ok(format!(
        "moments: integral of |f|^{} = {:.6e} on {grid} points{} -> {}",
        a.t,
        quad.value,
        exact.map_or(String::new(), |e| format!(", exact even moment {e:.6e}")),
        display(a.out.as_deref())
    ))
}

pub fn singular(a: &SingularArgs) -> CliResult<String> {
    let route = match a.route {
        RouteArg::QSum => Route::QSum { q_max: a.q },
        RouteArg::Euler => Route::Euler { tolerance: a.tol, max_depth: a.depth },
    };
    let docs: Vec<serde_json::Value> = match route {
        Route::QSum { q_max } => {
            let ev = QSumEvaluator::new(a.k, a.s, q_max)?;
            a.n.iter()
                .map(|&n| {
                    let terms = ev.terms(n);
                    let partial = ev.partial_sums(n);
                    let half = partial[(q_max as usize).div_ceil(2) - 1];
                    json!({
                        "n": n,
                        "value": ev.eval(n),
                        "route": route,
                        "diagnostics": {
                            "last_term": terms.last(),
                            "change_since_half_q": partial[partial.len() - 1] - half,
                        },
                    })
                })
                .collect()
        }
        Route::Euler { .. } => a
            .n
            .iter()
            .map(|&n| {
                let v = sing_series(n, a.k, a.s, route)?;
                Ok(json!({
                    "n": n,
                    "value": v.value,
                    "route": route,
                    "diagnostics": {
                        "converged": v.converged,
                        "prime_bound": v.prime_bound,
                        "tail_estimate": v.tail_estimate,
                        "factors": v.factors,
                    },
                }))
            })
            .collect::<CliResult<_>>()?,
    };
    let doc = if docs.len() == 1 { docs[0].clone() } else { serde_json::Value::Array(docs.clone()) };
    emit(a.out.as_deref(), &json(&doc))?;
    let first = docs[0]["value"].as_f64().unwrap_or(f64::NAN);
    Ok(format!("singular: {} value(s), S({}) = {first:.9} -> {}", docs.len(), a.n[0], display(a.out.as_deref())))
}

fn parse_range(s: &str) -> CliResult<(u64, u64)> {
    let bad = || CliError::Config(format!("--n-range must look like lo..hi, got {s:?}"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

pub fn repcount(a: &RepcountArgs) -> CliResult<String> {
    let (lo, hi) = match (&a.n_range, a.n) {
        (Some(r), _) => parse_range(r)?,
        (None, Some(n)) => (n, n),
        (None, None) => return Err(CliError::Config("need --n or --n-range".into())),
    };
    let big_n = a.big_n.unwrap_or(lo.max(1));
    let p = (2.0 * big_n as f64).powf(1.0 / a.k as f64);
    let phi: Growth = match &a.phi {
        Some(text) => serde_json::from_str(text).map_err(|e| CliError::Config(format!("--phi: {e}")))?,
        None => Growth::log(),
    };
    phi.validate()?;
    let r = match (a.r, a.eta) {
        (Some(r), _) => r,
        (None, Some(eta)) => p.powf(eta),
        (None, None) if a.variant == RepVariant::Selfsmooth => p,
        (None, None) => return Err(CliError::Config("need --R or --eta".into())),
    };
    let mut csv = Csv::new(&["n", "weighted", "count"]);
    let mut total = 0u128;
    if a.variant == RepVariant::F {
        if a.a.is_empty() || a.a.len() > a.s as usize {
            return Err(CliError::Config("F needs 1..=s dilations via --a".into()));
        }
        let d = a.s - a.a.len() as u32;
        let rows: Vec<_> = (lo..=hi)
            .into_par_iter()
            .map(|m| f_coefficient(d, &a.a, m, big_n, a.k, a.s, r).map(|f| (m, f)))
            .collect::<Result<_, _>>()?;
        for (m, f) in rows {
            total += f.count;
            csv.row(&fields![m, f.value, f.count]);
        }
    } else {
        let eta = a.eta.unwrap_or(1.0);
        let mut engine = Engine::new(hi, true)?;
        for n in lo..=hi {
            let cut = (n as f64 / phi.eval(n as f64)).powf(1.0 / a.k as f64);
            let mut q = RepQuery::plain(a.k, a.s, n, big_n, r);
            q.distinct = a.distinct;
            match a.variant {
                RepVariant::Plain => {}
                RepVariant::Rj => q.j = a.j,
                RepVariant::Phi => q.cutoff = Some(cut),
                RepVariant::Selfsmooth => {
                    q.smoothness = Smoothness::SelfSmooth { eta };
                    q.cutoff = Some(cut);
                }
                RepVariant::F => unreachable!(),
            }
            let res = rep_count_with(&q, &mut engine)?;
            total += res.count;
            csv.row(&fields![n, res.weighted, res.count]);
        }
    }
    emit(a.out.as_deref(), &csv.into_bytes())?;
    Ok(format!("repcount: {} value(s) of n, {total} tuples in all -> {}", hi - lo + 1, display(a.out.as_deref())))
}

fn load_run(a: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => return Err(CliError::Config("need --config or --preset".into())),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(x) = a.x_max {
        cfg.x_max = x;
    }
    if let Some(dir) = &a.out_dir {
        cfg.output.dir = Some(dir.clone());
    }
    if let Some(f) = a.format {
        cfg.output.format = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The config as echoed in reports: where outputs go and how many workers
/// ran do not affect results, so they are left out.
fn echo(cfg: &RunConfig) -> RunConfig {
    RunConfig { output: OutputSpec { dir: None, ..cfg.output.clone() }, workers: None, ..cfg.clone() }
}

/// Runs `f` on the config's own worker count unless the command line fixed one.
fn with_workers<T: Send>(cfg: &RunConfig, explicit: bool, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match cfg.workers {
        Some(w) if !explicit => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Config(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

#[derive(Serialize)]
struct SampleSummary<'a> {
    config: &'a RunConfig,
    members: usize,
    expected_members: f64,
    std_dev: f64,
    z: f64,
    clamp_x0: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xs: Option<&'a [u64]>,
}

pub fn sample_basis(a: &RunArgs, explicit_workers: bool) -> CliResult<String> {
    let cfg = load_run(a)?;
    let params = cfg.params();
    let (sample, table) = with_workers(&cfg, explicit_workers, || -> CliResult<_> {
        let sample = rb::sample_basis(cfg.seed, &params, cfg.x_max)?;
        Ok((sample, ProbTable::new(&params, iroot(cfg.x_max as u128, cfg.k))?))
    })??;
    let (mean, var) = table.cardinality_moments(table.x_max);
    let sd = var.sqrt();
    let count = sample.members.len();
    let z = if sd > 0.0 { (count as f64 - mean) / sd } else { 0.0 };
    let csv_mode = cfg.output.format == Format::Csv && cfg.output.dir.is_some();
    let shown = echo(&cfg);
    let summary = SampleSummary {
        config: &shown,
        members: count,
        expected_members: mean,
        std_dev: sd,
        z,
        clamp_x0: sample.clamp_x0,
        xs: (!csv_mode).then_some(&sample.xs[..]),
    };
    let dest = match &cfg.output.dir {
        Some(dir) => {
            if csv_mode {
                let mut csv = Csv::new(&["x", "member", "p"]);
                for (&x, &m) in sample.xs.iter().zip(&sample.members) {
                    csv.row(&fields![x, m, table.p[x as usize]]);
                }
                write_atomic(&dir.join("members.csv"), &csv.into_bytes())?;
            }
            write_atomic(&dir.join("sample.json"), &json(&summary))?;
            dir.display().to_string()
        }
        None => {
            emit(None, &json(&summary))?;
            "stdout".into()
        }
    };
    Ok(format!(
        "sample-basis: seed {}, {count} members up to X = {} (expected {mean:.2} +- {sd:.2}) -> {dest}",
        cfg.seed, cfg.x_max
    ))
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    config: &'a RunConfig,
    summary: &'a thinbasis_core::randbasis::ExperimentSummary,
    monitor: Option<&'a MonitorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    records: Option<&'a [thinbasis_core::randbasis::NRecord]>,
}

pub fn verify(a: &RunArgs, explicit_workers: bool) -> CliResult<String> {
    let cfg = load_run(a)?;
    let (report, monitor): (ExperimentReport, Option<MonitorReport>) =
        with_workers(&cfg, explicit_workers, || -> CliResult<_> {
            let report = almost_all_experiment(&cfg.experiment())?;
            let monitor = match cfg.monitor {
                Some(m) => {
                    let sample = rb::sample_basis(cfg.seed, &cfg.params(), m.n_max)?;
                    Some(upper_bound_monitor(&sample, 2, m.n_max, m.psi, report.summary.tau0)?)
                }
                None => None,
            };
            Ok((report, monitor))
        })??;
    let csv_mode = cfg.output.format == Format::Csv && cfg.output.dir.is_some();
    let shown = echo(&cfg);
    let doc = VerifyReport {
        config: &shown,
        summary: &report.summary,
        monitor: monitor.as_ref(),
        records: (!csv_mode).then_some(&report.records[..]),
    };
    let dest = match &cfg.output.dir {
        Some(dir) => {
            if csv_mode {
                let mut csv = Csv::new(&[
                    "n", "r_s", "r_plus", "r_zero", "r_eq", "singular", "target", "deviation", "exceptional",
                ]);
                for r in &report.records {
                    csv.row(&fields![
                        r.n,
                        r.r_s,
                        r.r_plus,
                        r.r_zero,
                        r.r_eq,
                        r.singular,
                        r.target,
                        r.deviation,
                        r.exceptional
                    ]);
                }
                write_atomic(&dir.join("records.csv"), &csv.into_bytes())?;
            }
            write_atomic(&dir.join("report.json"), &json(&doc))?;
            dir.display().to_string()
        }
        None => {
            emit(None, &json(&doc))?;
            "stdout".into()
        }
    };
    let s = &report.summary;
    if !s.accounting_ok {
        return Err(thinbasis_core::Error::Invariant("R^s = R^+ + R^0 + R^= failed on some record".into()).into());
    }
    Ok(format!(
        "verify: seed {}, {} records, {} exceptional ({:.3} vs predicted density {:.3e}), accounting ok{} -> {dest}",
        cfg.seed,
        s.records,
        s.exceptional,
        s.exceptional_fraction,
        s.predicted_density,
        monitor.map_or(String::new(), |m| format!(", monitor max {:.4} at n = {}", m.statistic, m.argmax)),
    ))
}
