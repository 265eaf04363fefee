//! `massera`: classify solutions of asymptotically periodic scalar ODEs and
//! difference equations from the command line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use massera_core::bebutov::{
    bebutov_distance, check_lemma_l1, DomainKind, SampledFunction,
};
use massera_core::chain::{build_chain_graph, chain_recurrent_set};
use massera_core::expr::parse;
use massera_core::period::{
    classify_stability, find_fixed_points, full_analysis, AnalysisSettings, PeriodMap, Stability,
    Verdict,
};
use massera_core::presets;
use massera_core::report::{write_iterate_csv, write_residual_csv};
use massera_core::{FieldKind, ScalarField};

#[derive(Parser)]
#[command(name = "massera", version, about = "Asymptotic periodicity analysis for scalar ODEs and difference equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify solutions: S-asymptotic / asymptotic periodicity, limit
    /// sets, fixed points.
    Analyze {
        #[arg(value_enum)]
        mode: Mode,
        #[command(flatten)]
        field: FieldArgs,
        /// Initial values, comma separated.
        #[arg(long, value_delimiter = ',')]
        u0: Vec<f64>,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Prefix for CSV series (<prefix>.trajectory.csv, .residuals.csv,
        /// .iterates.csv); suffixed with the u0 index when several.
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Scan the period map for fixed points and classify their stability.
    FixedPoints {
        #[arg(value_enum)]
        mode: Mode,
        #[command(flatten)]
        field: FieldArgs,
        /// Scan range.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        range: Vec<f64>,
        /// Grid resolution for the scan.
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build the (eps, n)-chain graph over a uniform grid and report the
    /// chain-recurrent set.
    Chain {
        #[arg(value_enum, default_value = "ode")]
        mode: Mode,
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        range: Vec<f64>,
        /// Number of grid points.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long, default_value_t = 20)]
        n_max: usize,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the edge list (`i,j,k_witness`) here.
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Bebutov (compact-open) distance between two sampled functions.
    Bebutov {
        /// First function: `const:<v>`, `expr:<expression in t>`, or
        /// `csv:<path>`.
        #[arg(long)]
        phi: String,
        #[arg(long)]
        psi: String,
        /// Window radius L_cap for the sup-min search.
        #[arg(long, default_value_t = 50.0)]
        window: f64,
        /// Also run the Lemma-style trichotomy check at this epsilon.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Preset management.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List available presets.
    List,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Ode,
    Map,
}

#[derive(Args)]
struct FieldArgs {
    /// Built-in preset (exP1, exDP1, beverton-holt, logistic, zero).
    #[arg(long)]
    preset: Option<String>,
    /// Right-hand side f(t, x).
    #[arg(long)]
    f: Option<String>,
    /// Periodic part P(t, x) of the decomposition.
    #[arg(long = "P")]
    p: Option<String>,
    /// Decaying part R(t, x) of the decomposition.
    #[arg(long = "R")]
    r: Option<String>,
    /// Period of the limiting equation.
    #[arg(long)]
    tau: Option<f64>,
    /// Analysis horizon (time for ODEs, iteration count for maps).
    #[arg(long)]
    horizon: Option<f64>,
    /// Beverton-Holt growth parameter (with --preset beverton-holt).
    #[arg(long)]
    mu: Option<f64>,
    /// Beverton-Holt carrying capacity K(t) (with --preset beverton-holt).
    #[arg(long = "K")]
    k: Option<String>,
    /// Periodic part of the carrying capacity.
    #[arg(long = "K-p")]
    k_p: Option<String>,
    /// Relative integration tolerance.
    #[arg(long = "tol-rel")]
    tol_rel: Option<f64>,
    /// Absolute integration tolerance.
    #[arg(long = "tol-abs")]
    tol_abs: Option<f64>,
    /// S-classification pass threshold on the residual tail sup.
    #[arg(long = "tol-s")]
    tol_s: Option<f64>,
    /// Iterate-tail convergence threshold.
    #[arg(long = "tol-conv")]
    tol_conv: Option<f64>,
    /// Iterate-tail divergence threshold.
    #[arg(long = "tol-div")]
    tol_div: Option<f64>,
    /// Fixed-point root tolerance.
    #[arg(long = "tol-root")]
    tol_root: Option<f64>,
}

impl FieldArgs {
    fn build(&self, mode: Mode) -> Result<(ScalarField, AnalysisSettings, f64)> {
        let mut built = match (&self.preset, &self.f) {
            (Some(_), Some(_)) => bail!("--preset and --f are mutually exclusive"),
            (None, None) => bail!("one of --preset or --f is required"),
            (Some(name), None) => {
                let p = if name == "beverton-holt"
                    && (self.mu.is_some() || self.k.is_some() || self.k_p.is_some())
                {
                    presets::beverton_holt(
                        self.mu.unwrap_or(2.0),
                        self.k.as_deref(),
                        self.k_p.as_deref(),
                    )?
                } else {
                    presets::preset(name)?
                };
                (p.field, p.settings, p.default_u0)
            }
            (None, Some(src)) => {
                let f = parse(src).map_err(|e| anyhow!("--f: {e}"))?;
                let mut field = match mode {
                    Mode::Ode => ScalarField::ode(f, "cli"),
                    Mode::Map => ScalarField::map(f, "cli"),
                };
                let tau = self.tau.context("--tau is required with --f")?;
                match (&self.p, &self.r) {
                    (Some(p_src), Some(r_src)) => {
                        field = field.with_decomposition(
                            parse(p_src).map_err(|e| anyhow!("--P: {e}"))?,
                            parse(r_src).map_err(|e| anyhow!("--R: {e}"))?,
                            tau,
                        )?;
                    }
                    (None, None) => {}
                    _ => bail!("--P and --R must be given together"),
                }
                let settings = AnalysisSettings {
                    tau,
                    horizon: self.horizon.unwrap_or(100.0 * tau.max(1.0)),
                    ..Default::default()
                };
                (field, settings, 0.0)
            }
        };
        let settings = &mut built.1;
        if let Some(mode_kind) = match (mode, built.0.kind) {
            (Mode::Ode, FieldKind::Map) => Some("map"),
            (Mode::Map, FieldKind::Ode) => Some("ode"),
            _ => None,
        } {
            bail!("field is a {mode_kind} field, but the other mode was requested");
        }
        if let Some(tau) = self.tau {
            settings.tau = tau;
        }
        if let Some(h) = self.horizon {
            settings.horizon = h;
        }
        let cfg = &mut settings.cfg;
        if let Some(v) = self.tol_rel {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.tol_abs {
            cfg.abs_tol = v;
        }
        if let Some(v) = self.tol_s {
            settings.s_tol = v;
        }
        if let Some(v) = self.tol_conv {
            settings.conv_tol = v;
        }
        if let Some(v) = self.tol_div {
            settings.div_threshold = v;
        }
        if let Some(v) = self.tol_root {
            settings.root_tol = v;
        }
        Ok(built)
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("MASSERA_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: MASSERA_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze {
            mode,
            field,
            u0,
            report,
            series,
        } => cmd_analyze(mode, field, u0, report, series),
        Command::FixedPoints {
            mode,
            field,
            range,
            grid,
            report,
        } => cmd_fixed_points(mode, field, range, grid, report),
        Command::Chain {
            mode,
            field,
            range,
            grid,
            eps,
            n_min,
            n_max,
            report,
            series,
        } => cmd_chain(mode, field, range, grid, eps, n_min, n_max, report, series),
        Command::Bebutov {
            phi,
            psi,
            window,
            eps,
        } => cmd_bebutov(&phi, &psi, window, eps),
        Command::Preset {
            action: PresetAction::List,
        } => {
            for name in presets::PRESET_NAMES {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cmd_analyze(
    mode: Mode,
    field_args: FieldArgs,
    u0: Vec<f64>,
    report_path: Option<PathBuf>,
    series: Option<PathBuf>,
) -> Result<ExitCode> {
    let (field, settings, default_u0) = field_args.build(mode)?;
    let u0s = if u0.is_empty() { vec![default_u0] } else { u0 };
    let mut reports = Vec::new();
    let mut inconclusive = false;
    for (idx, &u) in u0s.iter().enumerate() {
        let out = full_analysis(&field, u, &settings)?;
        inconclusive |= out.report.verdict == Verdict::Inconclusive;
        if let Some(prefix) = &series {
            let tag = if u0s.len() > 1 {
                format!("{}.{idx}", prefix.display())
            } else {
                prefix.display().to_string()
            };
            out.trajectory
                .write_csv(BufWriter::new(File::create(format!("{tag}.trajectory.csv"))?))?;
            write_residual_csv(
                &out.residuals,
                BufWriter::new(File::create(format!("{tag}.residuals.csv"))?),
            )?;
            write_iterate_csv(
                &out.iterates,
                BufWriter::new(File::create(format!("{tag}.iterates.csv"))?),
            )?;
        }
        reports.push(out.report);
    }
    let json = if reports.len() == 1 {
        reports[0].to_json()?
    } else {
        serde_json::to_string_pretty(&reports)?
    };
    emit(report_path, &json)?;
    Ok(if inconclusive {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_fixed_points(
    mode: Mode,
    field_args: FieldArgs,
    range: Vec<f64>,
    grid: usize,
    report_path: Option<PathBuf>,
) -> Result<ExitCode> {
    let (field, settings, _) = field_args.build(mode)?;
    let (lo, hi) = range_pair(&range, settings.fixed_point_range)?;
    let pm = PeriodMap::build(&field, settings.tau, settings.cfg)?;
    let scan = find_fixed_points(&pm, lo, hi, grid, settings.root_tol)?;
    let records: Vec<serde_json::Value> = scan
        .records
        .iter()
        .map(|rec| {
            let probe = if rec.isolation_gap.is_finite() {
                settings.probe.min(rec.isolation_gap / 4.0)
            } else {
                settings.probe
            };
            let stability = classify_stability(&pm, rec, probe, settings.root_tol)
                .unwrap_or(Stability::Inconclusive);
            serde_json::json!({
                "u": rec.u_star,
                "residual": rec.residual,
                "transverse": rec.transverse,
                "stability": stability,
                "isolation_gap": rec.isolation_gap,
            })
        })
        .collect();
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "schema": massera_core::REPORT_SCHEMA_VERSION,
        "range": [lo, hi],
        "grid": grid,
        "non_transverse_continuum": scan.non_transverse_continuum,
        "fixed_points": records,
    }))?;
    emit(report_path, &json)?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_chain(
    mode: Mode,
    field_args: FieldArgs,
    range: Vec<f64>,
    grid: usize,
    eps: f64,
    n_min: usize,
    n_max: usize,
    report_path: Option<PathBuf>,
    series: Option<PathBuf>,
) -> Result<ExitCode> {
    let (field, settings, _) = field_args.build(mode)?;
    let (lo, hi) = range_pair(&range, None)?;
    if grid < 2 {
        bail!("--grid must be at least 2");
    }
    let pm = PeriodMap::build(&field, settings.tau, settings.cfg)?;
    let points: Vec<f64> = (0..grid)
        .map(|i| lo + (hi - lo) * i as f64 / (grid - 1) as f64)
        .collect();
    let g = build_chain_graph(&pm, &points, eps, n_min, n_max)?;
    let cr = chain_recurrent_set(&g);
    if let Some(path) = series {
        g.write_edges_csv(BufWriter::new(File::create(&path)?))?;
    }
    let recurrent_points: Vec<f64> = cr.recurrent_indices.iter().map(|&i| g.points[i]).collect();
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "schema": massera_core::REPORT_SCHEMA_VERSION,
        "chain": {
            "epsilon": g.epsilon,
            "grid_slack": g.grid_slack,
            "n_min": g.n_min,
            "n_max": g.n_max,
            "n_points": g.points.len(),
            "n_edges": g.edges.len(),
            "recurrent_indices": cr.recurrent_indices,
            "recurrent_points": recurrent_points,
            "n_components": cr.scc_partition.len(),
        },
    }))?;
    emit(report_path, &json)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bebutov(phi: &str, psi: &str, window: f64, eps: Option<f64>) -> Result<ExitCode> {
    let f1 = parse_function_spec(phi, window)?;
    let f2 = parse_function_spec(psi, window)?;
    let d = bebutov_distance(&f1, &f2, window)?;
    let mut body = serde_json::json!({
        "schema": massera_core::REPORT_SCHEMA_VERSION,
        "distance": d.value,
        "truncated": d.truncated,
        "window": window,
    });
    if let Some(eps) = eps {
        let check = check_lemma_l1(&f1, &f2, eps)?;
        body["lemma_l1"] = serde_json::json!({
            "epsilon": check.epsilon,
            "window_sup": check.window_sup,
            "relation": check.relation,
        });
    }
    println!("{}", serde_json::to_string_pretty(&body)?);
    Ok(ExitCode::SUCCESS)
}

/// `const:<v>`, `expr:<expression in t>`, or `csv:<path>`.
fn parse_function_spec(spec: &str, window: f64) -> Result<SampledFunction> {
    let (kind, rest) = spec
        .split_once(':')
        .context("function spec must look like const:<v>, expr:<e>, or csv:<path>")?;
    let half = window + 1.0;
    let step = (2.0 * half / 4096.0).max(1e-6);
    match kind {
        "const" => {
            let v: f64 = rest.parse().with_context(|| format!("bad constant `{rest}`"))?;
            let n = (2.0 * half / step) as usize;
            Ok(SampledFunction::new(
                DomainKind::FullLine,
                step,
                -half,
                vec![v; n + 1],
            )?)
        }
        "expr" => {
            let e = parse(rest).map_err(|err| anyhow!("bad expression: {err}"))?;
            let n = (2.0 * half / step) as usize;
            let values = (0..=n)
                .map(|i| {
                    let t = -half + step * i as f64;
                    e.eval(t, 0.0)
                        .map_err(|err| anyhow!("evaluating at t={t}: {err}"))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(SampledFunction::new(DomainKind::FullLine, step, -half, values)?)
        }
        "csv" => {
            let file = File::open(rest).with_context(|| format!("opening {rest}"))?;
            Ok(SampledFunction::read_csv(
                BufReader::new(file),
                DomainKind::FullLine,
            )?)
        }
        other => bail!("unknown function spec kind `{other}`"),
    }
}

fn range_pair(range: &[f64], fallback: Option<(f64, f64)>) -> Result<(f64, f64)> {
    match range {
        [lo, hi] => Ok((*lo, *hi)),
        [] => fallback.context("--range LO HI is required"),
        _ => bail!("--range takes exactly two values"),
    }
}

fn emit(path: Option<PathBuf>, json: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(&p)?);
            writeln!(f, "{json}")?;
        }
        None => println!("{json}"),
    }
    Ok(())
}
