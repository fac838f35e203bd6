use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use meanband::bands::{band1_variance, band_from_stats, BandKind, COMPETITOR_CENTER_NOTE};
use meanband::estimator::{estimate, per_curve_coeffs, pooled_stats, sparsity_report, theoretical_levels, Rule};
use meanband::grid_basis::{make_grid, BasisFamily};
use meanband::io::{self, Format, Provenance};
use meanband::metrics::{run_scenario, ScenarioConfig};
use meanband::process_sim::{
    calibrate, generate_panel, sigma_k_theoretical, CurvePanel, PanelConfig, ProcessKind, ProcessSpec,
    SignalSpec, SIGNAL1_FORM,
};
use meanband::selector::{default_candidates, select_with, CandidateSpec, SelectOptions};
use meanband::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "meanband", version, about = "Thresholded mean estimation and confidence bands for functional data")]
struct Cli {
    /// RNG seed (overrides any seed in the scenario file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Scenario JSON (see README for the schema).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a panel of curves.
    Simulate(SimulateArgs),
    /// Estimate the mean of a stored panel.
    Estimate(EstimateArgs),
    /// Pick an estimator by data splitting.
    Select(SelectArgs),
    /// Build a confidence band for a stored panel.
    Band(BandArgs),
    /// Count the coefficients of signal 1 above the theoretical levels.
    Sparsity(SparsityArgs),
    /// Run a Monte-Carlo scenario (requires --scenario).
    Bench,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ProcessArg {
    Bb,
    Bm,
    Ar1,
    Arima11,
    Zero,
}

impl ProcessArg {
    fn spec(self, phi: f64) -> ProcessSpec<f64> {
        match self {
            ProcessArg::Bb => ProcessSpec::brownian_bridge(),
            ProcessArg::Bm => ProcessSpec::brownian_motion(),
            ProcessArg::Ar1 => ProcessSpec::ar1(phi, 1.0),
            ProcessArg::Arima11 => ProcessSpec::arima11(phi, 1.0),
            ProcessArg::Zero => ProcessSpec::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SignalArg {
    Signal1,
    Signal2,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BasisArg {
    Fourier,
    Haar,
}

impl From<BasisArg> for BasisFamily {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Fourier => BasisFamily::Fourier,
            BasisArg::Haar => BasisFamily::Haar,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum RuleArg {
    Hard,
    Soft,
    Ls,
}

impl From<RuleArg> for Rule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Hard => Rule::Hard,
            RuleArg::Soft => Rule::Soft,
            RuleArg::Ls => Rule::LeastSquares,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BandArg {
    Hard1,
    Hard3,
    Soft2,
    Untruncated,
    Band1,
    Band3,
}

impl From<BandArg> for BandKind {
    fn from(b: BandArg) -> Self {
        match b {
            BandArg::Hard1 => BandKind::ProposedHard1,
            BandArg::Hard3 => BandKind::ProposedHard3,
            BandArg::Soft2 => BandKind::ProposedSoft2,
            BandArg::Untruncated => BandKind::UntruncatedLS,
            BandArg::Band1 => BandKind::CompetitorTheoretical,
            BandArg::Band3 => BandKind::CompetitorSampleVar,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    m: usize,
    #[arg(long, value_enum, default_value_t = ProcessArg::Bb)]
    process: ProcessArg,
    #[arg(long, default_value_t = 0.5)]
    ar_phi: f64,
    #[arg(long, value_enum, default_value_t = SignalArg::Signal1)]
    signal: SignalArg,
    /// Process-to-noise variance ratio.
    #[arg(long, default_value_t = 1.0)]
    sigma_star: f64,
    #[arg(long, default_value_t = 4.25)]
    snr: f64,
}

#[derive(Debug, Args, Serialize)]
struct EstimateArgs {
    /// Panel CSV (grid row followed by one row per curve) or panel JSON.
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, value_enum, default_value_t = BasisArg::Fourier)]
    basis: BasisArg,
    #[arg(long, value_enum, default_value_t = RuleArg::Hard)]
    rule: RuleArg,
    #[arg(long, default_value_t = 1.0)]
    multiplier: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

#[derive(Debug, Args, Serialize)]
struct SelectArgs {
    #[arg(long)]
    panel: PathBuf,
    /// Also refit the winner on every curve.
    #[arg(long)]
    refit: bool,
}

#[derive(Debug, Args, Serialize)]
struct BandArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, value_enum, default_value_t = BandArg::Hard1)]
    kind: BandArg,
    #[arg(long, value_enum, default_value_t = BasisArg::Fourier)]
    basis: BasisArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Process whose covariance defines band1's variance.
    #[arg(long, value_enum)]
    process: Option<ProcessArg>,
    #[arg(long, default_value_t = 0.5)]
    ar_phi: f64,
    /// Innovation sd for ar1/arima11 (after variance matching if omitted).
    #[arg(long)]
    innovation_sd: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct SparsityArgs {
    #[arg(long, default_value_t = 256)]
    m: usize,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Measurement-error variance.
    #[arg(long, default_value_t = 0.136)]
    noise_var: f64,
    #[arg(long, value_enum, default_value_t = ProcessArg::Bb)]
    process: ProcessArg,
    #[arg(long, default_value_t = 0.75)]
    c1: f64,
    #[arg(long, default_value_t = 1.93)]
    c2: f64,
}

struct Ctx {
    seed: Option<u64>,
    out: PathBuf,
    format: Format,
    scenario: Option<PathBuf>,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ext(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    fn finish(&self, stem: &str, mut prov: Provenance, outputs: Vec<PathBuf>) -> Result<()> {
        prov.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        let path = io::sidecar_path(&self.out, stem);
        io::write_file(&path, |w| io::write_json(w, &prov))?;
        for p in &outputs {
            println!("{}", p.display());
        }
        println!("{}", path.display());
        Ok(())
    }

    fn scenario(&self) -> Result<Option<ScenarioConfig<f64>>> {
        self.scenario.as_deref().map(io::read_json).transpose()
    }
}

fn check_input(path: &Path) -> Result<()> {
    std::fs::metadata(path).map(|_| ()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn cmd_simulate(ctx: &Ctx, args: &SimulateArgs) -> Result<()> {
    let config = match ctx.scenario()? {
        Some(sc) => {
            sc.validate()?;
            let mut p = sc.resolved_panel()?;
            if let Some(s) = ctx.seed {
                p.seed = s;
            }
            p
        }
        None => {
            let grid = make_grid(args.m)?;
            let signal = match args.signal {
                SignalArg::Signal1 => SignalSpec::signal1_default(),
                SignalArg::Signal2 => SignalSpec::Signal2 { c3: 1.0 },
            };
            let process = args.process.spec(args.ar_phi);
            let (process, signal, noise_sd) = if matches!(process.kind, ProcessKind::Zero) {
                (process, signal, 0.0)
            } else {
                let c = calibrate(&process, &grid, args.sigma_star, args.snr, &signal)?;
                (c.process, c.signal, c.noise_sd)
            };
            PanelConfig {
                n: args.n,
                grid,
                signal,
                process,
                noise_sd,
                seed: ctx.seed.unwrap_or(0),
            }
        }
    };
    let panel = generate_panel(&config)?;
    let out = ctx.path(&format!("panel.{}", ctx.ext()));
    match ctx.format {
        Format::Csv => io::write_file(&out, |w| io::write_panel_csv(w, &panel))?,
        Format::Json => io::write_file(&out, |w| {
            io::write_json(
                w,
                &json!({
                    "grid": panel.grid().points(),
                    "y": panel.y().rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
                    "true_mean": panel.true_mean(),
                }),
            )
        })?,
    }
    let prov = Provenance::new("simulate", Some(config.seed), json!({ "panel": config }));
    ctx.finish("panel", prov, vec![out])
}

fn load_panel(path: &Path) -> Result<CurvePanel<f64>> {
    check_input(path)?;
    io::load_panel(path)
}

fn cmd_estimate(ctx: &Ctx, args: &EstimateArgs) -> Result<()> {
    let panel = load_panel(&args.panel)?;
    let family: BasisFamily = args.basis.into();
    let basis = family.build(panel.grid())?;
    let stats = pooled_stats(&per_curve_coeffs(&panel, &basis)?, args.alpha, args.delta)?;
    let est = estimate(&stats, &basis, args.rule.into(), args.multiplier)?;
    let outputs = match ctx.format {
        Format::Csv => {
            let c = ctx.path("coefficients.csv");
            let e = ctx.path("estimate.csv");
            io::write_file(&c, |w| io::write_coefficients_csv(w, &stats, &est))?;
            io::write_file(&e, |w| io::write_estimate_csv(w, panel.grid(), &est))?;
            vec![c, e]
        }
        Format::Json => {
            let e = ctx.path("estimate.json");
            io::write_file(&e, |w| {
                io::write_json(
                    w,
                    &json!({
                        "t": panel.grid().points(),
                        "mu_hat": stats.mu_hat(),
                        "s_k": stats.s_k(),
                        "r_hat": stats.r_hat(),
                        "z": stats.z(),
                        "estimate": est,
                    }),
                )
            })?;
            vec![e]
        }
    };
    let mut prov = Provenance::new("estimate", None, json!({ "args": args, "n": panel.n(), "m": panel.m() }));
    prov.notes.push(format!("active coefficients: {}", est.active_count()));
    ctx.finish("estimate", prov, outputs)
}

fn cmd_select(ctx: &Ctx, args: &SelectArgs) -> Result<()> {
    let panel = load_panel(&args.panel)?;
    let candidates: Vec<CandidateSpec<f64>> = match ctx.scenario()? {
        Some(sc) => sc.estimators,
        None => default_candidates(),
    };
    let seed = ctx.seed.unwrap_or(0);
    let result = select_with(&panel, &candidates, seed, SelectOptions { refit_full: args.refit })?;
    let outputs = match ctx.format {
        Format::Json => {
            let p = ctx.path("selection.json");
            io::write_file(&p, |w| io::write_json(w, &result))?;
            vec![p]
        }
        Format::Csv => {
            let p = ctx.path("selection.csv");
            io::write_file(&p, |w| {
                let mut out = csv::Writer::from_writer(w);
                out.write_record(["index", "label", "risk", "selected"])?;
                for (l, c) in result.candidates.iter().enumerate() {
                    out.write_record([
                        l.to_string(),
                        c.label(),
                        result.risks[l].map(|r| format!("{r:.16e}")).unwrap_or_default(),
                        u8::from(l == result.winner_index).to_string(),
                    ])?;
                }
                out.flush().map_err(|e| Error::Csv(e.into()))
            })?;
            let f = ctx.path("selected_fit.csv");
            io::write_file(&f, |w| {
                let mut out = csv::Writer::from_writer(w);
                out.write_record(["j", "t_j", "f_hat"])?;
                for (j, (&t, &v)) in panel.grid().points().iter().zip(&result.fitted_values).enumerate() {
                    out.write_record([(j + 1).to_string(), format!("{t:.16e}"), format!("{v:.16e}")])?;
                }
                out.flush().map_err(|e| Error::Csv(e.into()))
            })?;
            vec![p, f]
        }
    };
    let mut prov = Provenance::new(
        "select",
        Some(seed),
        json!({ "args": args, "candidates": candidates, "i1": result.i1_indices, "i2": result.i2_indices }),
    );
    prov.notes.push(format!("winner: {}", result.winner.label()));
    prov.notes.extend(result.warnings.iter().cloned());
    ctx.finish("selection", prov, outputs)
}

fn cmd_band(ctx: &Ctx, args: &BandArgs) -> Result<()> {
    let panel = load_panel(&args.panel)?;
    let family: BasisFamily = args.basis.into();
    let basis = family.build(panel.grid())?;
    let kind: BandKind = args.kind.into();
    let stats = pooled_stats(&per_curve_coeffs(&panel, &basis)?, args.alpha, args.delta)?;
    let process = match args.process {
        Some(p) => {
            let spec = p.spec(args.ar_phi);
            Some(match args.innovation_sd {
                Some(sd) => ProcessSpec { innovation_sd: sd, ..spec },
                None => meanband::process_sim::match_process_variance(&spec, panel.grid())?,
            })
        }
        None => None,
    };
    let gamma = match (kind, &process) {
        (BandKind::CompetitorTheoretical, Some(p)) => Some(band1_variance(p, &basis)?),
        _ => None,
    };
    let band = band_from_stats(kind, &stats, &basis, gamma.as_deref())?;
    let out = ctx.path(&format!("band.{}", ctx.ext()));
    match ctx.format {
        Format::Csv => io::write_file(&out, |w| io::write_band_csv(w, panel.grid(), &band))?,
        Format::Json => io::write_file(&out, |w| {
            io::write_json(
                w,
                &json!({
                    "kind": kind,
                    "alpha": args.alpha,
                    "t": panel.grid().points(),
                    "center": band.center(),
                    "lower": band.lower(),
                    "upper": band.upper(),
                    "mean_width": band.mean_width(),
                }),
            )
        })?,
    }
    let mut prov = Provenance::new("band", None, json!({ "args": args, "process": process }));
    if kind.is_competitor() {
        prov.notes.push(COMPETITOR_CENTER_NOTE.to_string());
    }
    ctx.finish("band", prov, vec![out])
}

fn cmd_sparsity(ctx: &Ctx, args: &SparsityArgs) -> Result<()> {
    if !(args.noise_var >= 0.0) {
        return Err(Error::InvalidArgument("noise variance must be >= 0".into()));
    }
    let grid = make_grid(args.m)?;
    let signal = SignalSpec::Signal1 { c1: args.c1, c2: args.c2 };
    let process = args.process.spec(0.5);
    let mut reports = Vec::new();
    for family in [BasisFamily::Fourier, BasisFamily::Haar] {
        if !family.supports(args.m) {
            continue;
        }
        let basis = family.build(&grid)?;
        let sigma2 = sigma_k_theoretical(&process, &basis)?;
        let levels = theoretical_levels(&sigma2, args.noise_var.sqrt(), args.n, args.alpha, 0.0)?;
        reports.push(sparsity_report(&signal, &basis, &levels)?);
    }
    let out = ctx.path(&format!("sparsity.{}", ctx.ext()));
    match ctx.format {
        Format::Json => io::write_file(&out, |w| io::write_json(w, &reports))?,
        Format::Csv => io::write_file(&out, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(["basis", "count", "sup_error", "l2_error", "surviving"])?;
            for r in &reports {
                let surviving: Vec<String> = r.surviving.iter().map(|k| k.to_string()).collect();
                csv.write_record([
                    r.basis_family.to_string(),
                    r.count.to_string(),
                    format!("{:.16e}", r.sup_error),
                    format!("{:.16e}", r.l2_error),
                    surviving.join(" "),
                ])?;
            }
            csv.flush().map_err(|e| Error::Csv(e.into()))
        })?,
    }
    let mut prov = Provenance::new("sparsity", None, json!({ "args": args }));
    prov.notes.push(SIGNAL1_FORM.to_string());
    ctx.finish("sparsity", prov, vec![out])
}

fn cmd_bench(ctx: &Ctx) -> Result<()> {
    let mut config = ctx
        .scenario()?
        .ok_or_else(|| Error::InvalidArgument("bench needs --scenario <path>".into()))?;
    if let Some(s) = ctx.seed {
        config.base_seed = s;
    }
    let report = run_scenario(&config)?;
    let out = ctx.path(&format!("bench.{}", ctx.ext()));
    match ctx.format {
        Format::Json => io::write_file(&out, |w| io::write_json(w, &report))?,
        Format::Csv => io::write_file(&out, |w| io::write_bench_csv(w, &report))?,
    }
    let mut prov = Provenance::new("bench", Some(config.base_seed), json!({ "scenario": config }));
    prov.notes.push(report.seed_rule.clone());
    prov.notes.extend(report.notes.iter().cloned());
    ctx.finish("bench", prov, vec![out])
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out,
        format: cli.format.into(),
        scenario: cli.scenario,
    };
    if let Some(s) = &ctx.scenario {
        check_input(s)?;
    }
    std::fs::create_dir_all(&ctx.out).map_err(|e| Error::Io {
        path: ctx.out.display().to_string(),
        source: e,
    })?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Estimate(a) => cmd_estimate(&ctx, a),
        Command::Select(a) => cmd_select(&ctx, a),
        Command::Band(a) => cmd_band(&ctx, a),
        Command::Sparsity(a) => cmd_sparsity(&ctx, a),
        Command::Bench => cmd_bench(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
