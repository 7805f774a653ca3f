//! Command-line front end: parse a TOML config, dispatch to the library,
//! write CSV artifacts plus a JSON manifest, deterministically.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use fermichain::chainmap::{chain_coefficients, save_chain_coefficients};
use fermichain::closure::{
    fit_universal_closure, load_closure_table, rescale_closure, save_closure_table, Fill,
};
use fermichain::experiments::{
    build_network_pair, chain_convergence_report, modulated_sides, run_adiabatic_equilibration,
    run_siam_benchmark, run_sd_reconstruction, write_comparison_csv, write_convergence_csv,
    write_final_table_csv, write_reconstruction_csv, ChainConfig, CorrelatorSource, DensityConfig,
    ExperimentConfig, InitialFill, LeadConfig,
};
use fermichain::gaussian::{evolve, CorrelationMatrix};

// ---------------------------------------------------------------------------
// Errors and exit codes

#[derive(Debug)]
enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<fermichain::Error> for CliError {
    fn from(e: fermichain::Error) -> Self {
        use fermichain::Error as E;
        match &e {
            E::Io(_) | E::MalformedFile { .. } => CliError::Io(e.to_string()),
            E::InvalidInput(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

// ---------------------------------------------------------------------------
// Command line

#[derive(Parser)]
#[command(name = "fermichain", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split each lead into initially-empty/filled densities and sample them
    Modulate(ConfigArgs),
    /// Chain coefficients of a bare spectral density
    ChainCoeffs(ConfigArgs),
    /// Fit the universal closure against the tail correlation function
    ClosureFit(ClosureFitArgs),
    /// Rescale a fitted closure table to a concrete tail (Omega, K)
    ClosureRescale(ClosureRescaleArgs),
    /// Evolve the closure-terminated network and record populations
    Simulate(ConfigArgs),
    /// Reconstruct the modulated densities from simulated correlators
    ReconstructSd(ConfigArgs),
    /// Compare the closure network against a long-chain reference
    BenchSiam(ConfigArgs),
    /// Adiabatic coupling ramp, closure network vs ramped reference
    Equilibrate(ConfigArgs),
    /// Per-site distance of both chains from their asymptotic coefficients
    ConvergenceReport(ConvergenceArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV outputs and the run manifest
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// Dotted-path config overrides, e.g. --set evolution.t_max=60
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Number of chain sites to tabulate
    #[arg(long, default_value_t = 30)]
    n_sites: usize,
}

#[derive(Args)]
struct ClosureFitArgs {
    #[arg(long)]
    n_modes: usize,
    #[arg(long, default_value_t = 100.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1001)]
    n_grid: usize,
    #[arg(long, default_value_t = 5e-3)]
    tolerance: f64,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct ClosureRescaleArgs {
    /// Fitted universal closure table (CSV)
    #[arg(long)]
    table: PathBuf,
    /// Tail site energy Omega
    #[arg(long)]
    omega0: f64,
    /// Tail hopping K
    #[arg(long)]
    kappa: f64,
    /// Which environment the closure terminates: empty or filled
    #[arg(long)]
    fill: String,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

// ---------------------------------------------------------------------------
// Config plumbing

/// Leads-only schema for `modulate` and `convergence-report`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeadsConfig {
    leads: Vec<LeadConfig>,
    #[serde(default)]
    chain: Option<ChainConfig>,
}

/// Bare-density schema for `chain-coeffs`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BareChainConfig {
    density: DensityConfig,
    chain: ChainConfig,
}

fn apply_override(value: &mut toml::Value, spec: &str) -> CliResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{spec}' is not KEY=VALUE")))?;
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .map(|t| t["v"].clone())
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
    let mut node = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override path '{key}' crosses a non-table")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert(toml::Value::Table(toml::Table::new()));
    }
    unreachable!("override paths are non-empty")
}

/// Read the TOML file, apply overrides, and deserialize strictly.
fn load_config<T: DeserializeOwned>(args: &ConfigArgs) -> CliResult<(T, toml::Value)> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let mut value: toml::Value = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    for spec in &args.overrides {
        apply_override(&mut value, spec)?;
    }
    let config: T = value
        .clone()
        .try_into()
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    Ok((config, value))
}

fn write_manifest(
    output_dir: &Path,
    command: &str,
    config: Option<&toml::Value>,
    overrides: &[String],
    outputs: &[String],
    metrics: serde_json::Value,
) -> CliResult<()> {
    let manifest = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config.map(|v| serde_json::to_value(v).expect("toml is json-safe")),
        "overrides": overrides,
        "outputs": outputs,
        "metrics": metrics,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(output_dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

// ---------------------------------------------------------------------------
// Commands

fn cmd_modulate(args: &ConfigArgs) -> CliResult<()> {
    let (config, raw) = load_config::<LeadsConfig>(args)?;
    let leads = config
        .leads
        .iter()
        .map(|l| l.build())
        .collect::<fermichain::Result<Vec<_>>>()?;
    let sides = modulated_sides(&leads)?;
    ensure_dir(&args.output_dir)?;
    let mut outputs = Vec::new();
    let mut hulls = Vec::new();
    for (j, name) in sides.iter().zip(["modulated_empty.csv", "modulated_filled.csv"]) {
        let hull = j
            .hull()
            .ok_or_else(|| CliError::Numerical("modulated density vanished".into()))?;
        let mut out = String::from("omega,j\n");
        let n = 1001;
        for k in 0..n {
            let w = hull.lo + hull.width() * k as f64 / (n - 1) as f64;
            out.push_str(&format!("{},{}\n", fmt_f64(w), fmt_f64(j.eval(w))));
        }
        std::fs::write(args.output_dir.join(name), out)?;
        outputs.push(name.to_string());
        hulls.push(serde_json::json!({"lo": hull.lo, "hi": hull.hi}));
    }
    write_manifest(
        &args.output_dir,
        "modulate",
        Some(&raw),
        &args.overrides,
        &outputs,
        serde_json::json!({"hull_empty": hulls[0], "hull_filled": hulls[1]}),
    )
}

fn cmd_chain_coeffs(args: &ConfigArgs) -> CliResult<()> {
    let (config, raw) = load_config::<BareChainConfig>(args)?;
    let density = config.density.build()?;
    let n_sites = config.chain.n_env;
    let nodes = config
        .chain
        .quadrature_nodes
        .unwrap_or_else(|| (60 * n_sites).max(20_000));
    let coeffs = chain_coefficients(&density, n_sites, nodes)?;
    ensure_dir(&args.output_dir)?;
    let path = args.output_dir.join("chain.csv");
    save_chain_coefficients(&coeffs, &path)?;
    write_manifest(
        &args.output_dir,
        "chain-coeffs",
        Some(&raw),
        &args.overrides,
        &["chain.csv".to_string()],
        serde_json::json!({
            "eta": coeffs.eta,
            "asym_omega": coeffs.asym_omega,
            "asym_kappa": coeffs.asym_kappa,
            "n_sites": coeffs.n_sites(),
        }),
    )
}

fn cmd_closure_fit(args: &ClosureFitArgs) -> CliResult<()> {
    let u = fit_universal_closure(args.n_modes, args.t_max, args.n_grid, args.tolerance)?;
    ensure_dir(&args.output_dir)?;
    let name = format!("closure_n{}.csv", args.n_modes);
    save_closure_table(&u, &args.output_dir.join(&name))?;
    write_manifest(
        &args.output_dir,
        "closure-fit",
        None,
        &[],
        &[name],
        serde_json::json!({
            "n_modes": args.n_modes,
            "fit_residual": u.fit_residual,
            "tolerance": args.tolerance,
        }),
    )
}

fn cmd_closure_rescale(args: &ClosureRescaleArgs) -> CliResult<()> {
    let fill = match args.fill.as_str() {
        "empty" => Fill::Empty,
        "filled" => Fill::Filled,
        other => {
            return Err(CliError::Config(format!(
                "--fill must be 'empty' or 'filled', got '{other}'"
            )))
        }
    };
    let u = load_closure_table(&args.table)?;
    let params = rescale_closure(&u, args.omega0, args.kappa, fill)?;
    ensure_dir(&args.output_dir)?;
    let mut out = String::from("k,omega,g,gamma,zeta_re,zeta_im\n");
    for k in 0..params.n_modes() {
        let g = if k + 1 < params.n_modes() {
            fmt_f64(params.g[k])
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            k + 1,
            fmt_f64(params.omega[k]),
            g,
            fmt_f64(params.gamma[k]),
            fmt_f64(params.zeta[k].re),
            fmt_f64(params.zeta[k].im),
        ));
    }
    std::fs::write(args.output_dir.join("closure_params.csv"), out)?;
    write_manifest(
        &args.output_dir,
        "closure-rescale",
        None,
        &[],
        &["closure_params.csv".to_string()],
        serde_json::json!({
            "omega0": args.omega0,
            "kappa": args.kappa,
            "fill": args.fill,
        }),
    )
}

fn cmd_simulate(args: &ConfigArgs) -> CliResult<()> {
    let (mut config, raw) = load_config::<ExperimentConfig>(args)?;
    // only the closure network is evolved; keep the unused reference tiny
    config.reference = Some(fermichain::experiments::ReferenceConfig {
        chain_length: Some(config.chain.n_env + 1),
    });
    let pair = build_network_pair(&config)?;
    let sys = &pair.fmc;
    let c0 = CorrelationMatrix::initial_state(
        &sys.layout,
        sys.dim(),
        config.system.initial == InitialFill::Filled,
    );
    let traj = evolve(
        sys,
        &c0,
        config.evolution.t_max,
        config.evolution.dt,
        config.evolution.record_every,
    )?;
    let s = sys.layout.system.expect("system present");
    let e_edge = sys.layout.empty_site(config.chain.n_env);
    let f_edge = sys.layout.filled_site(config.chain.n_env);
    let mut out = String::from("t,n_system,n_empty_edge,n_filled_edge\n");
    for (k, &t) in traj.times.iter().enumerate() {
        let c = &traj.snapshots[k].c;
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(t),
            fmt_f64(c[(s, s)].re),
            fmt_f64(c[(e_edge, e_edge)].re),
            fmt_f64(c[(f_edge, f_edge)].re),
        ));
    }
    ensure_dir(&args.output_dir)?;
    std::fs::write(args.output_dir.join("populations.csv"), out)?;
    let c_final = &traj.snapshots.last().expect("snapshots").c;
    write_manifest(
        &args.output_dir,
        "simulate",
        Some(&raw),
        &args.overrides,
        &["populations.csv".to_string()],
        serde_json::json!({
            "final_system_population": c_final[(s, s)].re,
            "dim": sys.dim(),
        }),
    )
}

fn cmd_reconstruct_sd(args: &ConfigArgs) -> CliResult<()> {
    let (config, raw) = load_config::<ExperimentConfig>(args)?;
    let reports = run_sd_reconstruction(&config, CorrelatorSource::Simulated)?;
    ensure_dir(&args.output_dir)?;
    let mut outputs = Vec::new();
    let mut metrics = serde_json::Map::new();
    for (report, name) in reports
        .iter()
        .zip(["reconstruction_empty.csv", "reconstruction_filled.csv"])
    {
        write_reconstruction_csv(report, &args.output_dir.join(name))?;
        outputs.push(name.to_string());
        let key = name.trim_end_matches(".csv").to_string();
        metrics.insert(
            format!("{key}_max_err_outside_kinks"),
            serde_json::json!(report.max_err_outside_kinks),
        );
        metrics.insert(
            format!("{key}_gate_5e-3"),
            serde_json::json!(report.max_err_outside_kinks < 5e-3),
        );
    }
    write_manifest(
        &args.output_dir,
        "reconstruct-sd",
        Some(&raw),
        &args.overrides,
        &outputs,
        serde_json::Value::Object(metrics),
    )
}

fn cmd_bench_siam(args: &ConfigArgs) -> CliResult<()> {
    let (config, raw) = load_config::<ExperimentConfig>(args)?;
    let report = run_siam_benchmark(&config)?;
    ensure_dir(&args.output_dir)?;
    write_comparison_csv(&report, &args.output_dir.join("comparison.csv"))?;
    write_manifest(
        &args.output_dir,
        "bench-siam",
        Some(&raw),
        &args.overrides,
        &["comparison.csv".to_string()],
        serde_json::json!({
            "max_error_after_transient": report.max_error_after_transient,
            "transient_cutoff": report.transient_cutoff,
            "reference_horizon": report.reference_horizon,
        }),
    )
}

fn cmd_equilibrate(args: &ConfigArgs) -> CliResult<()> {
    let (config, raw) = load_config::<ExperimentConfig>(args)?;
    let report = run_adiabatic_equilibration(&config)?;
    ensure_dir(&args.output_dir)?;
    write_comparison_csv(&report.system, &args.output_dir.join("comparison_system.csv"))?;
    write_comparison_csv(
        &report.filled_edge,
        &args.output_dir.join("comparison_filled_edge.csv"),
    )?;
    write_final_table_csv(
        &report.final_table,
        &args.output_dir.join("final_observables.csv"),
    )?;
    write_manifest(
        &args.output_dir,
        "equilibrate",
        Some(&raw),
        &args.overrides,
        &[
            "comparison_system.csv".to_string(),
            "comparison_filled_edge.csv".to_string(),
            "final_observables.csv".to_string(),
        ],
        serde_json::json!({
            "max_final_difference": report.max_final_difference,
            "gate_1e-3": report.max_final_difference < 1e-3,
        }),
    )
}

fn cmd_convergence_report(args: &ConvergenceArgs) -> CliResult<()> {
    let (config, raw) = load_config::<LeadsConfig>(&args.common)?;
    let leads = config
        .leads
        .iter()
        .map(|l| l.build())
        .collect::<fermichain::Result<Vec<_>>>()?;
    let nodes = config
        .chain
        .as_ref()
        .and_then(|c| c.quadrature_nodes)
        .unwrap_or_else(|| (60 * args.n_sites).max(20_000));
    let report = chain_convergence_report(&leads, args.n_sites, nodes)?;
    ensure_dir(&args.common.output_dir)?;
    write_convergence_csv(&report, &args.common.output_dir.join("convergence.csv"))?;
    write_manifest(
        &args.common.output_dir,
        "convergence-report",
        Some(&raw),
        &args.common.overrides,
        &["convergence.csv".to_string()],
        serde_json::json!({
            "n_sites": args.n_sites,
            "asym_empty": {"omega": report.asym[0].0, "kappa": report.asym[0].1},
            "asym_filled": {"omega": report.asym[1].0, "kappa": report.asym[1].1},
        }),
    )
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Modulate(a) => cmd_modulate(a),
        Command::ChainCoeffs(a) => cmd_chain_coeffs(a),
        Command::ClosureFit(a) => cmd_closure_fit(a),
        Command::ClosureRescale(a) => cmd_closure_rescale(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::ReconstructSd(a) => cmd_reconstruct_sd(a),
        Command::BenchSiam(a) => cmd_bench_siam(a),
        Command::Equilibrate(a) => cmd_equilibrate(a),
        Command::ConvergenceReport(a) => cmd_convergence_report(a),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
