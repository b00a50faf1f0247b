//! Subcommand implementations behind the `spthecl` binary.
//!
//! Every run writes a self-contained artifact directory:
//!
//! - `trace.csv` — diagnostics per stored sample
//!   (`t,j,s,theta_*,err,mu,q,rho_d,rho_a,W,V,bound`)
//! - `registry.toml` — the datasets the run used
//! - `switching_report.txt` — realized switching signal plus both
//!   constraint reports
//! - `constants.txt` — certificate constants, status, and a bound table
//! - `error_chart.svg` — error-versus-time line chart (log scale)
//! - `config.toml` — the experiment document (`example` runs only)
//!
//! Exit codes: 0 success, 1 validation error, 2 certificate/verification
//! failure, 3 i/o error.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::{self, ConfigError, Experiment};
use crate::dataset::DatasetRegistry;
use crate::estimator::{
    self, bound_curve, check_bound, input_sup, theorem_constants, BoundCurve, EstimatorError,
    RunResult,
};
use crate::example::{self, Variant};
use crate::gain::GainLaw;
use crate::linalg::{norm, sub};
use crate::switching::{verify_daat, verify_dadt, SwitchingSignal};

/// Failures grouped by the exit code they map to.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unparseable or invalid configuration (exit 1).
    Validation(String),
    /// A certificate or switching-constraint check failed (exit 2).
    Certificate(String),
    /// Filesystem trouble (exit 3).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Certificate(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Certificate(m) => write!(f, "certificate failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Io(io) => CliError::Io(io.to_string()),
            EstimatorError::NegativeLambda(_) => CliError::Certificate(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

fn io_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Io(e.to_string())
}

/// Runs one experiment and writes the artifact directory.
fn run_and_export(exp: &Experiment, out_dir: &Path) -> Result<RunResult, CliError> {
    fs::create_dir_all(out_dir).map_err(io_err)?;
    let cfg = &exp.config;
    let result = estimator::run(cfg, &exp.policy, exp.seed, &exp.options)?;

    let constants = theorem_constants(cfg)?;
    let theta_star = cfg.system.theta_star().to_vec();
    let vartheta0 = norm(&sub(&cfg.theta0, &theta_star));
    let u_sup = input_sup(cfg);
    let bound = constants
        .certificate_ok
        .then(|| bound_curve(&constants, &cfg.law, cfg.mu0, vartheta0, u_sup))
        .transpose()?;

    // trace.csv
    let trace = fs::File::create(out_dir.join("trace.csv")).map_err(io_err)?;
    estimator::write_diagnostics_csv(cfg, &result, bound.as_ref(), trace)?;

    // registry.toml
    cfg.registry
        .save(out_dir.join("registry.toml"))
        .map_err(io_err)?;

    // switching_report.txt
    let mut report = String::new();
    let _ = writeln!(
        report,
        "switching signal: initial mode {}",
        result.signal.initial_mode()
    );
    for (t, q) in result.signal.jumps() {
        let _ = writeln!(report, "  t = {t:.6} -> mode {q}");
    }
    let _ = writeln!(report, "jumps: {}", result.signal.jump_count());
    let _ = writeln!(report, "{}", result.dadt);
    let _ = writeln!(report, "{}", result.daat);
    fs::write(out_dir.join("switching_report.txt"), &report).map_err(io_err)?;

    // constants.txt
    let mut text = String::new();
    let _ = writeln!(text, "{constants}");
    let _ = writeln!(text, "{}", result.certificate);
    let _ = writeln!(text, "u_sup       = {u_sup:.9}");
    let _ = writeln!(text, "|vartheta0| = {vartheta0:.9}");
    if let Some(b) = &bound {
        let _ = writeln!(text, "\nbound envelope at sample hybrid times:");
        let t_end = result.arc.end_time();
        for k in 0..=8 {
            let t = t_end * k as f64 / 8.0;
            if let Ok(v) = b.eval(t, 0) {
                let _ = writeln!(text, "  bound({t:.4}, 0) = {v:.6}");
            }
        }
        let check = check_bound(&result.arc, &theta_star, b)?;
        let _ = writeln!(
            text,
            "\ntrajectory vs bound: {} (worst margin {:.6} at t = {:.4}, j = {})",
            if check.ok { "PASS" } else { "FAIL" },
            check.worst_margin,
            check.at.0,
            check.at.1
        );
    } else {
        let _ = writeln!(text, "\nbound envelope unavailable (certificate failed)");
    }
    fs::write(out_dir.join("constants.txt"), &text).map_err(io_err)?;

    // error_chart.svg
    let label = format!("{:?}", result.mode);
    let series = [(label.as_str(), result.error_trace(&theta_star))];
    let svg = error_chart_svg(&series);
    fs::write(out_dir.join("error_chart.svg"), svg).map_err(io_err)?;

    Ok(result)
}

/// `example`: run a benchmark variant and report the dataset roster plus the
/// final error.
pub fn cmd_example(
    variant: Variant,
    out_dir: &Path,
    seed: u64,
    eps_stop: Option<f64>,
) -> Result<String, CliError> {
    let mut options = example::run_options(variant);
    if let Some(eps) = eps_stop {
        options.eps_stop = eps;
    }
    let exp = Experiment {
        config: example::config(variant),
        policy: example::policy(variant),
        options,
        seed,
    };
    fs::create_dir_all(out_dir).map_err(io_err)?;
    fs::write(
        out_dir.join("config.toml"),
        config::benchmark_config_toml(variant),
    )
    .map_err(io_err)?;
    let result = run_and_export(&exp, out_dir)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "benchmark variant: {variant}");
    let _ = writeln!(summary, "{}", classification_roster(&exp.config.registry));
    let _ = writeln!(
        summary,
        "run ended at t = {:.4} ({}) after {} jumps",
        result.arc.end_time(),
        result.arc.termination,
        result.arc.jump_count()
    );
    let _ = writeln!(
        summary,
        "final error |theta - theta*| = {:.6e}",
        result.final_error(exp.config.system.theta_star())
    );
    let _ = writeln!(summary, "{}", result.dadt);
    let _ = writeln!(summary, "{}", result.daat);
    let _ = write!(summary, "artifacts in {}", out_dir.display());
    Ok(summary)
}

/// `simulate`: run an experiment from a config document.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path) -> Result<String, CliError> {
    let exp = config::load_experiment(config_path)?;
    let result = run_and_export(&exp, out_dir)?;
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "run ended at t = {:.4} ({}) after {} jumps",
        result.arc.end_time(),
        result.arc.termination,
        result.arc.jump_count()
    );
    let _ = writeln!(
        summary,
        "final error |theta - theta*| = {:.6e}",
        result.final_error(exp.config.system.theta_star())
    );
    if !result.certificate.condition_ok {
        let _ = writeln!(summary, "{}", result.certificate);
    }
    let _ = write!(summary, "artifacts in {}", out_dir.display());
    Ok(summary)
}

/// `bounds`: print the certificate constants and the bound envelope on a
/// `(t, j)` grid. Fails (exit 2) when the certificate condition is violated.
pub fn cmd_bounds(
    config_path: &Path,
    t_grid: Option<Vec<f64>>,
    j_grid: Option<Vec<usize>>,
) -> Result<String, CliError> {
    let exp = config::load_experiment(config_path)?;
    let cfg = &exp.config;
    let constants = theorem_constants(cfg)?;
    let mut out = String::new();
    let _ = writeln!(out, "{constants}");
    if !constants.certificate_ok {
        return Err(CliError::Certificate(format!(
            "lambda = {:.6} <= 0: the dwell/activation parameters do not support the \
             convergence certificate\n{out}",
            constants.lambda
        )));
    }
    let theta_star = cfg.system.theta_star().to_vec();
    let vartheta0 = norm(&sub(&cfg.theta0, &theta_star));
    let u_sup = input_sup(cfg);
    let bound: BoundCurve = bound_curve(&constants, &cfg.law, cfg.mu0, vartheta0, u_sup)?;
    let _ = writeln!(out, "u_sup       = {u_sup:.9}");
    let _ = writeln!(out, "|vartheta0| = {vartheta0:.9}");

    let blow_up = cfg.law.blow_up_time(cfg.mu0);
    let t_max = if blow_up.is_finite() {
        (1.0 - exp.options.eps_stop) * blow_up
    } else {
        exp.options.horizon.unwrap_or(cfg.law.upsilon())
    };
    let ts = t_grid.unwrap_or_else(|| (0..=8).map(|k| t_max * k as f64 / 8.0).collect());
    let js = j_grid.unwrap_or_else(|| {
        vec![
            0,
            cfg.automaton.n0() as usize,
            2 * cfg.automaton.n0() as usize,
        ]
    });
    let _ = writeln!(out, "\nbound envelope:");
    let _ = write!(out, "{:>12}", "t \\ j");
    for j in &js {
        let _ = write!(out, "{j:>14}");
    }
    let _ = writeln!(out);
    for t in &ts {
        let _ = write!(out, "{t:>12.5}");
        for j in &js {
            match bound.eval(*t, *j) {
                Ok(v) => {
                    let _ = write!(out, "{v:>14.6}");
                }
                Err(_) => {
                    let _ = write!(out, "{:>14}", "-");
                }
            }
        }
        let _ = writeln!(out);
    }
    Ok(out)
}

/// `verify-switching`: re-ingest a trace CSV (columns `t` and `q` required)
/// and check both switching constraints. Fails (exit 2) on violation.
#[allow(clippy::too_many_arguments)]
pub fn cmd_verify_switching(
    trace_path: &Path,
    law: &GainLaw,
    mu0: f64,
    tau_d: f64,
    tau_a: f64,
    n0: f64,
    t0: f64,
    drain_modes: &[usize],
) -> Result<String, CliError> {
    let signal = signal_from_trace_csv(trace_path, law, mu0)?;
    let partition = crate::dataset::ModePartition {
        sufficiently_rich: Vec::new(),
        insufficiently_rich: drain_modes.to_vec(),
        corrupted: Vec::new(),
    };
    let dadt = verify_dadt(&signal, law, mu0, tau_d, n0)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let daat = verify_daat(&signal, law, mu0, tau_a, t0, &partition)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let text = format!(
        "signal: initial mode {}, {} jumps, horizon {:.6}\n{}\n{}",
        signal.initial_mode(),
        signal.jump_count(),
        signal.horizon(),
        dadt,
        daat
    );
    if dadt.ok && daat.ok {
        Ok(text)
    } else {
        Err(CliError::Certificate(text))
    }
}

/// `classify-dataset`: print id, classification, richness, and spectral norm
/// per dataset in a registry document.
pub fn cmd_classify_dataset(path: &Path) -> Result<String, CliError> {
    let registry = DatasetRegistry::load(path).map_err(|e| match e {
        crate::dataset::io::RegistryIoError::Io(io) => CliError::Io(io.to_string()),
        other => CliError::Validation(other.to_string()),
    })?;
    Ok(classification_roster(&registry))
}

fn classification_roster(registry: &DatasetRegistry) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4} {:>22} {:>12} {:>12}",
        "id", "classification", "alpha", "|Phi|"
    );
    for ds in registry.iter() {
        let alpha = match ds.classification().alpha() {
            Some(a) => format!("{a:.4}"),
            None => "-".into(),
        };
        let _ = writeln!(
            out,
            "{:>4} {:>22} {:>12} {:>12.4}",
            ds.id(),
            ds.classification().to_string(),
            alpha,
            ds.data_matrix().spectral_norm()
        );
    }
    out.pop();
    out
}

/// Rebuilds a switching signal from a trace CSV: the mode is read from the
/// `q` column, jumps are detected where it changes (at the first row carrying
/// the new mode).
pub fn signal_from_trace_csv(
    path: &Path,
    law: &GainLaw,
    mu0: f64,
) -> Result<SwitchingSignal, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(io_err)?;
    let headers = reader.headers().map_err(io_err)?.clone();
    let t_col = headers
        .iter()
        .position(|h| h == "t")
        .ok_or_else(|| CliError::Validation("trace has no 't' column".into()))?;
    let q_col = headers
        .iter()
        .position(|h| h == "q")
        .ok_or_else(|| CliError::Validation("trace has no 'q' column".into()))?;
    let mut rows: Vec<(f64, usize)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(io_err)?;
        let t: f64 = record
            .get(t_col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Validation("unparseable 't' entry in trace".into()))?;
        let q: f64 = record
            .get(q_col)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::Validation("unparseable 'q' entry in trace".into()))?;
        rows.push((t, q.round() as usize));
    }
    if rows.is_empty() {
        return Err(CliError::Validation("trace has no data rows".into()));
    }
    let initial_mode = rows[0].1;
    let mut jumps = Vec::new();
    let mut current = initial_mode;
    for (t, q) in &rows {
        if *q != current {
            jumps.push((*t, *q));
            current = *q;
        }
    }
    let last_t = rows.last().expect("nonempty").0;
    // place the horizon past the last sample but inside the law's domain
    let blow_up = law.blow_up_time(mu0);
    let mut horizon = last_t + 1e-9 * (1.0 + last_t.abs());
    if blow_up.is_finite() {
        let limit = blow_up * (1.0 - 1e-11);
        if horizon >= limit {
            horizon = 0.5 * (last_t + limit);
        }
    }
    SwitchingSignal::new(initial_mode, jumps, horizon)
        .map_err(|e| CliError::Validation(e.to_string()))
}

/// One chart series: a label plus `(t, j, error)` points.
pub type ErrorSeries<'a> = (&'a str, Vec<(f64, usize, f64)>);

/// A minimal static line chart of error versus time, one polyline per
/// series, log-10 vertical scale.
pub fn error_chart_svg(series: &[ErrorSeries<'_>]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 440.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 30.0;
    const MB: f64 = 50.0;
    const FLOOR: f64 = 1e-12;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

    let t_max = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|(t, _, _)| *t))
        .fold(1e-9f64, f64::max);
    let mut log_min = f64::INFINITY;
    let mut log_max = f64::NEG_INFINITY;
    for (_, pts) in series {
        for (_, _, e) in pts {
            let le = e.max(FLOOR).log10();
            log_min = log_min.min(le);
            log_max = log_max.max(le);
        }
    }
    if !log_min.is_finite() || !log_max.is_finite() {
        log_min = -12.0;
        log_max = 1.0;
    }
    let log_min = log_min.floor();
    let log_max = log_max.ceil().max(log_min + 1.0);

    let x = |t: f64| ML + (W - ML - MR) * t / t_max;
    let y = |e: f64| {
        let le = e.max(FLOOR).log10();
        MT + (H - MT - MB) * (log_max - le) / (log_max - log_min)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    // frame
    let _ = writeln!(
        svg,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
        W - ML - MR,
        H - MT - MB
    );
    // horizontal grid: one line per decade
    let mut decade = log_min;
    while decade <= log_max + 1e-9 {
        let yy = y(10f64.powf(decade));
        let _ = writeln!(
            svg,
            "<line x1=\"{ML}\" y1=\"{yy:.1}\" x2=\"{:.1}\" y2=\"{yy:.1}\" stroke=\"#ddd\"/>",
            W - MR
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{decade:.0}</text>",
            ML - 6.0,
            yy + 4.0
        );
        decade += 1.0;
    }
    // time ticks
    for k in 0..=8 {
        let t = t_max * k as f64 / 8.0;
        let xx = x(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{xx:.1}\" y1=\"{:.1}\" x2=\"{xx:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>",
            MT,
            H - MB
        );
        let _ = writeln!(
            svg,
            "<text x=\"{xx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{t:.2}</text>",
            H - MB + 16.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">t</text>",
        (ML + W - MR) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{:.1}\" transform=\"rotate(-90 16 {:.1})\" \
         text-anchor=\"middle\">|theta - theta*|</text>",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    );
    for (idx, (label, pts)) in series.iter().enumerate() {
        let color = colors[idx % colors.len()];
        let mut points = String::new();
        for (k, (t, _, e)) in pts.iter().enumerate() {
            if k % 4 == 0 || k + 1 == pts.len() {
                let _ = write!(points, "{:.2},{:.2} ", x(*t), y(*e));
            }
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            points.trim_end()
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{label}</text>",
            ML + 10.0,
            MT + 18.0 + 16.0 * idx as f64
        );
    }
    let _ = writeln!(svg, "</svg>");
    svg
}
