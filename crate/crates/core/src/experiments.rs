//! End-to-end studies built from the lower-level modules: chain-coefficient
//! convergence tables, reconstruction of a spectral density from simulated
//! correlation functions, impurity-population benchmarks against long-chain
//! references, and adiabatic equilibration under a coupling ramp.

use std::path::{Path, PathBuf};

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::chainmap::{asymptotics, chain_coefficients, ChainCoefficients};
use crate::closure::{
    fit_universal_closure, load_closure_table, rescale_closure, Fill, UniversalClosure,
};
use crate::error::{Error, Result};
use crate::gaussian::{
    assemble, assemble_environment, evolve, evolve_closed, evolve_closed_ramped,
    two_time_correlator, AssemblySpec, CorrelationMatrix, QuadraticLindbladSystem, Ramp,
    ReferenceMode, Trajectory,
};
use crate::specdens::{
    analytic_ttcf, merge_environments, tcsm_modulate, Interval, InverseTemperature, LeadSpec,
    SpectralDensity, TtcfSign,
};

type Complex64 = Complex<f64>;

// ---------------------------------------------------------------------------
// Configuration

/// A spectral density description that can live in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    /// scale * sqrt((w - lo)(hi - w)) on (lo, hi)
    Semicircle { scale: f64, lo: f64, hi: f64 },
    /// linearly interpolated table loaded from a two-column CSV
    Csv { path: PathBuf },
}

impl DensityConfig {
    pub fn build(&self) -> Result<SpectralDensity> {
        match self {
            DensityConfig::Semicircle { scale, lo, hi } => {
                SpectralDensity::semicircle(*scale, Interval::new(*lo, *hi)?)
            }
            DensityConfig::Csv { path } => SpectralDensity::from_csv(path),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeadConfig {
    pub density: DensityConfig,
    pub temperature: f64,
    pub mu: f64,
}

impl LeadConfig {
    pub fn build(&self) -> Result<LeadSpec> {
        LeadSpec::single(
            self.density.build()?,
            InverseTemperature::from_temperature(self.temperature)?,
            self.mu,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialFill {
    Empty,
    Filled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub epsilon: f64,
    pub initial: InitialFill,
    /// Multiplier on the system-chain couplings (1 = physical, 0 = decoupled).
    #[serde(default = "one")]
    pub coupling_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_env: usize,
    #[serde(default)]
    pub quadrature_nodes: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureConfig {
    pub n_modes: usize,
    /// Load a previously fitted closure table instead of fitting live.
    #[serde(default)]
    pub table_path: Option<PathBuf>,
    #[serde(default = "default_t_max_fit")]
    pub t_max_fit: f64,
    #[serde(default = "default_n_grid")]
    pub n_grid: usize,
    #[serde(default = "default_fit_tolerance")]
    pub tolerance: f64,
}

fn default_t_max_fit() -> f64 {
    100.0
}
fn default_n_grid() -> usize {
    1001
}
fn default_fit_tolerance() -> f64 {
    5e-3
}

impl ClosureConfig {
    /// Load the table if a path is given, otherwise fit from scratch.
    pub fn resolve(&self) -> Result<UniversalClosure> {
        match &self.table_path {
            Some(p) => {
                let u = load_closure_table(p)?;
                if u.n_modes() != self.n_modes {
                    return Err(Error::InvalidInput(format!(
                        "closure table at {} has {} modes, config requests {}",
                        p.display(),
                        u.n_modes(),
                        self.n_modes
                    )));
                }
                Ok(u)
            }
            None => fit_universal_closure(self.n_modes, self.t_max_fit, self.n_grid, self.tolerance),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub t_max: f64,
    pub dt: f64,
    /// Coupling ramp duration; absent means full coupling from t=0.
    #[serde(default)]
    pub ramp_tau: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// Sites per chain in the dissipation-free long-chain reference;
    /// absent means ceil(2K * t_max * 1.25).
    #[serde(default)]
    pub chain_length: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub leads: Vec<LeadConfig>,
    pub system: SystemConfig,
    pub chain: ChainConfig,
    pub closure: ClosureConfig,
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.leads.is_empty() {
            return Err(Error::InvalidInput("need at least one lead".into()));
        }
        if !(self.evolution.t_max > 0.0) || !(self.evolution.dt > 0.0) {
            return Err(Error::InvalidInput("need positive t_max and dt".into()));
        }
        if !(self.system.coupling_scale >= 0.0) {
            return Err(Error::InvalidInput("coupling_scale must be >= 0".into()));
        }
        Ok(())
    }

    pub fn build_leads(&self) -> Result<Vec<LeadSpec>> {
        self.leads.iter().map(|l| l.build()).collect()
    }

    fn quadrature_nodes(&self, depth: usize) -> usize {
        self.chain
            .quadrature_nodes
            .unwrap_or_else(|| (60 * depth).max(20_000))
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Occupation-modulated and merged densities for the initially-empty (index
/// 0) and initially-filled (index 1) equivalent environments.
pub fn modulated_sides(leads: &[LeadSpec]) -> Result<[SpectralDensity; 2]> {
    let mut empties = Vec::with_capacity(leads.len());
    let mut filleds = Vec::with_capacity(leads.len());
    for lead in leads {
        let pair = tcsm_modulate(lead)?;
        empties.push(pair.empty_side);
        filleds.push(pair.filled_side);
    }
    let (empty, _) = merge_environments(&empties);
    let (filled, _) = merge_environments(&filleds);
    Ok([empty, filled])
}

fn hull_of(j: &SpectralDensity) -> Result<Interval> {
    j.hull()
        .ok_or_else(|| Error::InvalidInput("zero spectral density".into()))
}

// ---------------------------------------------------------------------------
// Chain-coefficient convergence

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// |omega_n - Omega| for the empty (0) and filled (1) environments.
    pub dev_omega: [f64; 2],
    /// |kappa_n - K|; NaN on the last computed site (no hopping there).
    pub dev_kappa: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub asym: [(f64, f64); 2],
}

/// Per-site distances of both equivalent-environment chains from their
/// asymptotic coefficients.
pub fn chain_convergence_report(
    leads: &[LeadSpec],
    n_sites: usize,
    quadrature_nodes: usize,
) -> Result<ConvergenceReport> {
    let sides = modulated_sides(leads)?;
    let mut chains: Vec<ChainCoefficients> = Vec::with_capacity(2);
    let mut asym = [(0.0, 0.0); 2];
    for (k, j) in sides.iter().enumerate() {
        let c = chain_coefficients(j, n_sites, quadrature_nodes)?;
        asym[k] = (c.asym_omega, c.asym_kappa);
        chains.push(c);
    }
    let rows = (0..n_sites)
        .map(|n| ConvergenceRow {
            n,
            dev_omega: [
                (chains[0].omega[n] - asym[0].0).abs(),
                (chains[1].omega[n] - asym[1].0).abs(),
            ],
            dev_kappa: [
                chains[0]
                    .kappa
                    .get(n)
                    .map_or(f64::NAN, |k| (k - asym[0].1).abs()),
                chains[1]
                    .kappa
                    .get(n)
                    .map_or(f64::NAN, |k| (k - asym[1].1).abs()),
            ],
        })
        .collect();
    Ok(ConvergenceReport { rows, asym })
}

pub fn write_convergence_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let mut out = String::from(
        "n,dev_omega_empty,dev_kappa_empty,dev_omega_filled,dev_kappa_filled\n",
    );
    for r in &report.rows {
        let cell = |x: f64| if x.is_nan() { String::new() } else { fmt_f64(x) };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n,
            fmt_f64(r.dev_omega[0]),
            cell(r.dev_kappa[0]),
            fmt_f64(r.dev_omega[1]),
            cell(r.dev_kappa[1]),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Spectral-density reconstruction

/// Where the correlation function fed to the windowed Fourier transform
/// comes from: the simulated chain-plus-closure network, or the exact
/// analytic transform of the density (isolates transform error).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelatorSource {
    Simulated,
    Analytic,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionRow {
    pub omega: f64,
    pub expected: f64,
    pub reconstructed: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub fill: Fill,
    pub rows: Vec<ReconstructionRow>,
    /// Non-differentiable points of the expected density (band edges of the
    /// merged pieces), where deviations are expected and not gated.
    pub kinks: Vec<f64>,
    /// Largest |expected - reconstructed| outside `kink_radius` of any kink.
    pub max_err_outside_kinks: f64,
    pub kink_radius: f64,
}

/// Gaussian window exp(-a t^2) with a such that the factor is 1e-15 at t_max.
pub fn window_exponent(t_max: f64) -> f64 {
    15.0 * std::f64::consts::LN_10 / (t_max * t_max)
}

fn reconstruction_kinks(j: &SpectralDensity) -> Vec<f64> {
    let mut pts: Vec<f64> = j
        .smooth_cells()
        .iter()
        .flat_map(|c| [c.lo, c.hi])
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    pts
}

/// Windowed half-line Fourier transform on the stored uniform grid:
/// (1/pi) Re int_0^inf e^{+/- i w t} c(t) exp(-a t^2) dt, by composite
/// Simpson (the trapezoid's O(dt^2) endpoint error is visible at the
/// reconstruction accuracies gated here).
fn windowed_transform(
    times: &[f64],
    c: &[Complex64],
    omegas: &[f64],
    sign: f64,
    a: f64,
) -> Vec<f64> {
    let n = times.len();
    let dt = times[1] - times[0];
    let windowed: Vec<Complex64> = times
        .iter()
        .zip(c)
        .map(|(&t, &v)| v * (-a * t * t).exp())
        .collect();
    // Simpson weights dt/3 * [1,4,2,4,...,4,1]; with an even number of
    // points the last interval falls back to trapezoid (the integrand is
    // already ~1e-15 there by construction of the window).
    let simpson_end = if n % 2 == 1 { n } else { n - 1 };
    omegas
        .iter()
        .map(|&w| {
            let mut acc = 0.0;
            for (k, (&t, &v)) in times.iter().zip(&windowed).enumerate().take(simpson_end) {
                let phase = sign * w * t;
                let term = (v * Complex64::new(phase.cos(), phase.sin())).re;
                let weight = if k == 0 || k + 1 == simpson_end {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += weight * term / 3.0;
            }
            if simpson_end < n {
                for k in [n - 2, n - 1] {
                    let phase = sign * w * times[k];
                    let term = (windowed[k] * Complex64::new(phase.cos(), phase.sin())).re;
                    acc += 0.5 * term;
                }
            }
            acc * dt / std::f64::consts::PI
        })
        .collect()
}

/// The time-domain Gaussian window is a frequency-domain convolution with a
/// Gaussian kernel of variance 2a; this evaluates that convolution of the
/// density, cell by cell so kinks stay inside smooth integrands.
fn window_smoothed_eval(j: &SpectralDensity, omega: f64, a: f64) -> f64 {
    let sigma = (2.0 * a).sqrt();
    let lo = omega - 8.0 * sigma;
    let hi = omega + 8.0 * sigma;
    let norm = 1.0 / (4.0 * std::f64::consts::PI * a).sqrt();
    let mut acc = 0.0;
    for cell in j.smooth_cells() {
        let (clo, chi) = (cell.lo.max(lo), cell.hi.min(hi));
        if clo >= chi {
            continue;
        }
        acc += crate::quad::integrate(
            |w| {
                let d = w - omega;
                j.eval(w) * norm * (-d * d / (4.0 * a)).exp()
            },
            clo,
            chi,
            60,
        );
    }
    acc
}

/// Reconstruct both occupation-modulated densities from the edge correlation
/// functions of their chain-plus-closure networks and compare to the
/// analytic evaluation. One report per environment (empty, filled).
///
/// With the `Analytic` correlator source the comparison isolates the
/// windowed-transform error, so the expected column is the window-convolved
/// density rather than the bare one (the window itself shifts steep regions
/// at the 1e-3 scale, which is dynamics-independent).
pub fn run_sd_reconstruction(
    config: &ExperimentConfig,
    source: CorrelatorSource,
) -> Result<Vec<ReconstructionReport>> {
    config.validate()?;
    let leads = config.build_leads()?;
    let sides = modulated_sides(&leads)?;
    let u = config.closure.resolve()?;
    let n_env = config.chain.n_env;
    let depth = n_env + 1;
    let nodes = config.quadrature_nodes(depth);
    let t_max = config.evolution.t_max;
    let dt = config.evolution.dt;
    let n_steps = (t_max / dt).round() as usize;
    let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
    let a = window_exponent(t_max);
    let kink_radius = 0.05;

    let mut reports = Vec::with_capacity(2);
    for (j, fill) in sides.iter().zip([Fill::Empty, Fill::Filled]) {
        if j.is_zero() {
            reports.push(ReconstructionReport {
                fill,
                rows: Vec::new(),
                kinks: Vec::new(),
                max_err_outside_kinks: 0.0,
                kink_radius,
            });
            continue;
        }
        let hull = hull_of(j)?;
        let c: Vec<Complex64> = match source {
            CorrelatorSource::Simulated => {
                let chain = chain_coefficients(j, depth, nodes)?;
                let (omega0, kappa) = asymptotics(hull);
                let params = rescale_closure(&u, omega0, kappa, fill)?;
                let env = assemble_environment(&chain, n_env, &params)?;
                let raw = two_time_correlator(&env, 0, &times, fill)?;
                let eta2 = chain.eta * chain.eta;
                raw.into_iter().map(|v| v * eta2).collect()
            }
            CorrelatorSource::Analytic => {
                let sign = match fill {
                    Fill::Empty => TtcfSign::Emission,
                    Fill::Filled => TtcfSign::Absorption,
                };
                analytic_ttcf(j, &times, sign)?
            }
        };
        // invert the transform with the opposite phase sign per side
        let transform_sign = match fill {
            Fill::Empty => 1.0,
            Fill::Filled => -1.0,
        };
        let pad = 0.25 * hull.width().max(1.0);
        let n_omega = 800;
        let omegas: Vec<f64> = (0..n_omega)
            .map(|k| {
                hull.lo - pad + (hull.width() + 2.0 * pad) * k as f64 / (n_omega - 1) as f64
            })
            .collect();
        let rec = windowed_transform(&times, &c, &omegas, transform_sign, a);
        let kinks = reconstruction_kinks(j);
        let mut max_err: f64 = 0.0;
        let rows: Vec<ReconstructionRow> = omegas
            .iter()
            .zip(&rec)
            .map(|(&w, &r)| {
                let expected = match source {
                    CorrelatorSource::Simulated => j.eval(w),
                    CorrelatorSource::Analytic => window_smoothed_eval(j, w, a),
                };
                let abs_err = (expected - r).abs();
                if kinks.iter().all(|&k| (w - k).abs() > kink_radius) {
                    max_err = max_err.max(abs_err);
                }
                ReconstructionRow {
                    omega: w,
                    expected,
                    reconstructed: r,
                    abs_err,
                }
            })
            .collect();
        reports.push(ReconstructionReport {
            fill,
            rows,
            kinks,
            max_err_outside_kinks: max_err,
            kink_radius,
        });
    }
    Ok(reports)
}

pub fn write_reconstruction_csv(report: &ReconstructionReport, path: &Path) -> Result<()> {
    let mut out = String::from("omega,J_expected,J_reconstructed,abs_err\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(r.omega),
            fmt_f64(r.expected),
            fmt_f64(r.reconstructed),
            fmt_f64(r.abs_err),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// FMC vs long-chain reference comparisons

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    pub fmc: Vec<f64>,
    pub reference: Vec<f64>,
    pub abs_error: Vec<f64>,
    /// Largest error for transient_cutoff < t < reference_horizon.
    pub max_error_after_transient: f64,
    pub transient_cutoff: f64,
    /// The long-chain reference is only trusted before the excitation
    /// wavefront reaches the far end: t < L / (2K).
    pub reference_horizon: f64,
}

impl ComparisonReport {
    fn from_series(
        times: Vec<f64>,
        fmc: Vec<f64>,
        reference: Vec<f64>,
        transient_cutoff: f64,
        reference_horizon: f64,
    ) -> Self {
        let abs_error: Vec<f64> = fmc
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .collect();
        let max_error_after_transient = times
            .iter()
            .zip(&abs_error)
            .filter(|(&t, _)| t > transient_cutoff && t < reference_horizon)
            .map(|(_, &e)| e)
            .fold(0.0_f64, f64::max);
        ComparisonReport {
            times,
            fmc,
            reference,
            abs_error,
            max_error_after_transient,
            transient_cutoff,
            reference_horizon,
        }
    }
}

pub fn write_comparison_csv(report: &ComparisonReport, path: &Path) -> Result<()> {
    let mut out = String::from("t,fmc,reference,abs_error\n");
    for (k, &t) in report.times.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(t),
            fmt_f64(report.fmc[k]),
            fmt_f64(report.reference[k]),
            fmt_f64(report.abs_error[k]),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// The two assemblies of one physical setup: closure-terminated network and
/// its dissipation-free long-chain benchmark, plus shared bookkeeping.
pub struct NetworkPair {
    pub fmc: QuadraticLindbladSystem,
    pub reference: QuadraticLindbladSystem,
    pub ref_length: usize,
    /// Largest tail hopping among the two environments, setting the
    /// wavefront speed and the transient scale.
    pub asym_kappa: f64,
    pub n_env: usize,
}

impl NetworkPair {
    pub fn transient_cutoff(&self) -> f64 {
        5.0 / self.asym_kappa
    }
    pub fn reference_horizon(&self) -> f64 {
        self.ref_length as f64 / (2.0 * self.asym_kappa)
    }
}

/// Build the closure-terminated network and its long-chain reference for a
/// system coupled to the given leads.
pub fn build_network_pair(config: &ExperimentConfig) -> Result<NetworkPair> {
    config.validate()?;
    let leads = config.build_leads()?;
    let sides = modulated_sides(&leads)?;
    let u = config.closure.resolve()?;
    let n_env = config.chain.n_env;
    let t_max = config.evolution.t_max;

    // wavefront speed from the larger tail hopping
    let kappas: Vec<f64> = sides
        .iter()
        .map(|j| Ok(asymptotics(hull_of(j)?).1))
        .collect::<Result<_>>()?;
    let asym_kappa = kappas.iter().fold(0.0_f64, |m, &k| m.max(k));
    let ref_length = config
        .reference
        .as_ref()
        .and_then(|r| r.chain_length)
        .unwrap_or_else(|| (2.0 * asym_kappa * t_max * 1.25).ceil() as usize)
        .max(n_env + 1);

    let depth = ref_length.max(n_env + 1);
    let nodes = config.quadrature_nodes(depth);
    let mut chains = Vec::with_capacity(2);
    let mut params = Vec::with_capacity(2);
    for (j, fill) in sides.iter().zip([Fill::Empty, Fill::Filled]) {
        let mut chain = chain_coefficients(j, depth, nodes)?;
        chain.eta *= config.system.coupling_scale;
        let (omega0, kappa) = asymptotics(hull_of(j)?);
        params.push(rescale_closure(&u, omega0, kappa, fill)?);
        chains.push(chain);
    }
    let ramp = match config.evolution.ramp_tau {
        Some(tau) => Ramp::Linear { tau },
        None => Ramp::Constant,
    };
    let spec = |mode| AssemblySpec {
        system_energy: config.system.epsilon,
        empty_chain: &chains[0],
        filled_chain: &chains[1],
        n_env,
        empty_closure: &params[0],
        filled_closure: &params[1],
        mode,
        ramp,
    };
    Ok(NetworkPair {
        fmc: assemble(&spec(ReferenceMode::Fmc))?,
        reference: assemble(&spec(ReferenceMode::LongChain(ref_length)))?,
        ref_length,
        asym_kappa,
        n_env,
    })
}

fn evolve_pair(
    pair: &NetworkPair,
    config: &ExperimentConfig,
    magnus_dt: f64,
) -> Result<(Trajectory, Trajectory)> {
    let system_filled = config.system.initial == InitialFill::Filled;
    let c0_fmc =
        CorrelationMatrix::initial_state(&pair.fmc.layout, pair.fmc.dim(), system_filled);
    let c0_ref = CorrelationMatrix::initial_state(
        &pair.reference.layout,
        pair.reference.dim(),
        system_filled,
    );
    let fmc = evolve(
        &pair.fmc,
        &c0_fmc,
        config.evolution.t_max,
        config.evolution.dt,
        config.evolution.record_every,
    )?;
    let reference = if matches!(pair.reference.ramp, Ramp::Constant) {
        evolve_closed(&pair.reference, &c0_ref, &fmc.times)?
    } else {
        evolve_closed_ramped(&pair.reference, &c0_ref, &fmc.times, magnus_dt)?
    };
    Ok((fmc, reference))
}

fn site_series(traj: &Trajectory, site: usize) -> Vec<f64> {
    traj.snapshots
        .iter()
        .map(|s| s.c[(site, site)].re)
        .collect()
}

/// Impurity-population benchmark: evolve the closure-terminated network and
/// the long-chain reference from the same initial state and compare the
/// system population.
pub fn run_siam_benchmark(config: &ExperimentConfig) -> Result<ComparisonReport> {
    let pair = build_network_pair(config)?;
    let (fmc, reference) = evolve_pair(&pair, config, 1e-2)?;
    let s_fmc = pair.fmc.layout.system.expect("system present");
    let s_ref = pair.reference.layout.system.expect("system present");
    Ok(ComparisonReport::from_series(
        fmc.times.clone(),
        site_series(&fmc, s_fmc),
        site_series(&reference, s_ref),
        pair.transient_cutoff(),
        pair.reference_horizon(),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalObservableRow {
    pub site: String,
    pub fmc: f64,
    pub reference: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone)]
pub struct AdiabaticReport {
    /// System population vs time.
    pub system: ComparisonReport,
    /// Population of the last explicit chain site on the filled side.
    pub filled_edge: ComparisonReport,
    /// Final-time populations on all sites both assemblies share.
    pub final_table: Vec<FinalObservableRow>,
    /// Largest final-time difference over the shared single-particle block
    /// (all |<a_j^dag a_k>_FMC - <a_j^dag a_k>_ref| on common sites).
    pub max_final_difference: f64,
}

/// Adiabatic equilibration: ramp the system-environment coupling and the
/// system energy from zero over `ramp_tau` and compare the closure network
/// against a ramped long-chain reference.
pub fn run_adiabatic_equilibration(config: &ExperimentConfig) -> Result<AdiabaticReport> {
    if config.evolution.ramp_tau.is_none() {
        return Err(Error::InvalidInput(
            "adiabatic protocol requires evolution.ramp_tau".into(),
        ));
    }
    let pair = build_network_pair(config)?;
    let (fmc, reference) = evolve_pair(&pair, config, 1e-2)?;
    let cutoff = pair.transient_cutoff();
    let horizon = pair.reference_horizon();

    let lf = &pair.fmc.layout;
    let lr = &pair.reference.layout;
    let system = ComparisonReport::from_series(
        fmc.times.clone(),
        site_series(&fmc, lf.system.expect("system present")),
        site_series(&reference, lr.system.expect("system present")),
        cutoff,
        horizon,
    );
    let filled_edge = ComparisonReport::from_series(
        fmc.times.clone(),
        site_series(&fmc, lf.filled_site(pair.n_env)),
        site_series(&reference, lr.filled_site(pair.n_env)),
        cutoff,
        horizon,
    );

    // shared sites: system, then both explicit chains
    let mut common: Vec<(String, usize, usize)> = vec![(
        "system".to_string(),
        lf.system.expect("system present"),
        lr.system.expect("system present"),
    )];
    for n in 0..=pair.n_env {
        common.push((format!("empty_{n}"), lf.empty_site(n), lr.empty_site(n)));
        common.push((format!("filled_{n}"), lf.filled_site(n), lr.filled_site(n)));
    }
    let cf = &fmc.snapshots.last().expect("snapshots").c;
    let cr = &reference.snapshots.last().expect("snapshots").c;
    let final_table: Vec<FinalObservableRow> = common
        .iter()
        .map(|(name, i, j)| {
            let a = cf[(*i, *i)].re;
            let b = cr[(*j, *j)].re;
            FinalObservableRow {
                site: name.clone(),
                fmc: a,
                reference: b,
                abs_diff: (a - b).abs(),
            }
        })
        .collect();
    let mut max_final_difference: f64 = 0.0;
    for (_, i1, j1) in &common {
        for (_, i2, j2) in &common {
            let d = (cf[(*i1, *i2)] - cr[(*j1, *j2)]).norm();
            max_final_difference = max_final_difference.max(d);
        }
    }
    Ok(AdiabaticReport {
        system,
        filled_edge,
        final_table,
        max_final_difference,
    })
}

pub fn write_final_table_csv(rows: &[FinalObservableRow], path: &Path) -> Result<()> {
    let mut out = String::from("site,fmc,reference,abs_diff\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.site,
            fmt_f64(r.fmc),
            fmt_f64(r.reference),
            fmt_f64(r.abs_diff),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
