//! Exact engine for quadratic fermionic Lindblad dynamics.
//!
//! The network (system + two chains + two closures) is quadratic and
//! number-conserving, so the two-point correlation matrix C_{jk} =
//! <a_j^dag a_k> is a complete state description and obeys a closed
//! equation of motion. A dense 2^dim master-equation oracle validates the
//! closed form on small instances.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::chainmap::ChainCoefficients;
use crate::closure::{ClosureParams, Fill};
use crate::error::{Error, Result};
use crate::linalg::{expm, hermitian_eigenvalues, hermiticity_defect, CMatrix};

const I: Complex64 = Complex64::new(0.0, 1.0);

// ---------------------------------------------------------------------------
// Network description

/// Time profile multiplying the designated (ramped) part of the
/// Hamiltonian: constant 1, or a linear switch-on reaching 1 at `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ramp {
    Constant,
    Linear { tau: f64 },
}

impl Ramp {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Ramp::Constant => 1.0,
            Ramp::Linear { tau } => (t / tau).clamp(0.0, 1.0),
        }
    }
}

/// Index bookkeeping for the assembled network. Ranges may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub system: Option<usize>,
    pub empty_chain: std::ops::Range<usize>,
    pub filled_chain: std::ops::Range<usize>,
    pub empty_closure: std::ops::Range<usize>,
    pub filled_closure: std::ops::Range<usize>,
}

impl Layout {
    /// Index of site `n` on the empty chain.
    pub fn empty_site(&self, n: usize) -> usize {
        self.empty_chain.start + n
    }

    /// Index of site `n` on the filled chain.
    pub fn filled_site(&self, n: usize) -> usize {
        self.filled_chain.start + n
    }
}

/// A quadratic, number-conserving Lindblad model: single-particle
/// Hamiltonian h(t) = h_static + r(t) h_ramped, plus per-mode loss and
/// gain rates (jump operators sqrt(loss_j) a_j and sqrt(gain_j) a_j^dag).
#[derive(Debug, Clone)]
pub struct QuadraticLindbladSystem {
    pub h_static: CMatrix,
    pub h_ramped: CMatrix,
    pub ramp: Ramp,
    pub loss: Vec<f64>,
    pub gain: Vec<f64>,
    pub layout: Layout,
}

impl QuadraticLindbladSystem {
    pub fn dim(&self) -> usize {
        self.h_static.nrows()
    }

    /// Single-particle Hamiltonian at time `t`.
    pub fn h_at(&self, t: f64) -> CMatrix {
        let r = self.ramp.value(t);
        if r == 0.0 {
            self.h_static.clone()
        } else {
            &self.h_static + &self.h_ramped * Complex64::new(r, 0.0)
        }
    }

    pub fn is_closed(&self) -> bool {
        self.loss.iter().all(|g| *g == 0.0) && self.gain.iter().all(|g| *g == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.h_static.ncols() != d
            || self.h_ramped.nrows() != d
            || self.h_ramped.ncols() != d
            || self.loss.len() != d
            || self.gain.len() != d
        {
            return Err(Error::InvalidInput("inconsistent dimensions".into()));
        }
        if hermiticity_defect(&self.h_static) > 1e-12 || hermiticity_defect(&self.h_ramped) > 1e-12
        {
            return Err(Error::InvalidInput("Hamiltonian must be Hermitian".into()));
        }
        if self
            .loss
            .iter()
            .chain(&self.gain)
            .any(|g| !g.is_finite() || *g < 0.0)
        {
            return Err(Error::InvalidInput("rates must be non-negative".into()));
        }
        Ok(())
    }
}

/// Two-point correlation matrix C_{jk} = <a_j^dag a_k>.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub c: CMatrix,
}

impl CorrelationMatrix {
    pub fn vacuum(dim: usize) -> Self {
        Self {
            c: CMatrix::zeros(dim, dim),
        }
    }

    pub fn filled(dim: usize) -> Self {
        Self {
            c: CMatrix::identity(dim, dim),
        }
    }

    /// Product state matching the network roles: empty chain and empty
    /// closure unoccupied, filled chain and filled closure occupied, the
    /// system mode set by `system_filled`.
    pub fn initial_state(layout: &Layout, dim: usize, system_filled: bool) -> Self {
        let mut c = CMatrix::zeros(dim, dim);
        for k in layout.filled_chain.clone().chain(layout.filled_closure.clone()) {
            c[(k, k)] = Complex64::new(1.0, 0.0);
        }
        if let Some(s) = layout.system {
            if system_filled {
                c[(s, s)] = Complex64::new(1.0, 0.0);
            }
        }
        Self { c }
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    /// Mode occupations Re C_{jj}.
    pub fn populations(&self, sites: &[usize]) -> Vec<f64> {
        sites.iter().map(|&j| self.c[(j, j)].re).collect()
    }

    /// Check the fermionic constraint: eigenvalues must lie in [0, 1]
    /// within `tol`.
    pub fn check_pauli(&self, tol: f64, time: f64) -> Result<()> {
        for e in hermitian_eigenvalues(&self.c) {
            if e < -tol || e > 1.0 + tol {
                return Err(Error::PauliViolation { value: e, time });
            }
        }
        Ok(())
    }
}

/// Time series of correlation-matrix snapshots.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<CorrelationMatrix>,
}

impl Trajectory {
    /// Populations of `sites` at every snapshot, one row per time.
    pub fn population_series(&self, sites: &[usize]) -> Vec<Vec<f64>> {
        self.snapshots.iter().map(|s| s.populations(sites)).collect()
    }
}

// ---------------------------------------------------------------------------
// Assembly

/// How the environment tail is handled: the Markovian closure, or a plain
/// long chain continued with the asymptotic coefficients (dissipation-free
/// benchmark).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceMode {
    Fmc,
    LongChain(usize),
}

/// Everything needed to build the system + two-chain network.
pub struct AssemblySpec<'a> {
    pub system_energy: f64,
    pub empty_chain: &'a ChainCoefficients,
    pub filled_chain: &'a ChainCoefficients,
    /// Chain sites 0..=n_env are kept on each side (the closure replaces
    /// everything past site n_env).
    pub n_env: usize,
    pub empty_closure: &'a ClosureParams,
    pub filled_closure: &'a ClosureParams,
    pub mode: ReferenceMode,
    pub ramp: Ramp,
}

/// Chain coefficient at depth `n`, continued with the asymptotic value
/// past the computed range.
fn site_energy(c: &ChainCoefficients, n: usize) -> f64 {
    c.omega.get(n).copied().unwrap_or(c.asym_omega)
}

fn hopping(c: &ChainCoefficients, n: usize) -> f64 {
    c.kappa.get(n).copied().unwrap_or(c.asym_kappa)
}

/// Build the full network. With `ReferenceMode::Fmc` each chain keeps
/// sites 0..=n_env and couples site n_env to its closure modes with the
/// amplitudes zeta; with `ReferenceMode::LongChain(l)` each chain has `l`
/// sites (continued by the asymptotic coefficients) and no dissipation.
/// When a ramp is configured it multiplies the system energy and the
/// system-chain couplings.
pub fn assemble(spec: &AssemblySpec) -> Result<QuadraticLindbladSystem> {
    if matches!(spec.empty_closure.fill, Fill::Filled) {
        return Err(Error::InvalidInput(
            "empty-side closure must have fill = empty".into(),
        ));
    }
    if matches!(spec.filled_closure.fill, Fill::Empty) {
        return Err(Error::InvalidInput(
            "filled-side closure must have fill = filled".into(),
        ));
    }
    let (chain_len, nc0, nc1) = match spec.mode {
        ReferenceMode::Fmc => {
            if spec.empty_chain.n_sites() <= spec.n_env
                || spec.filled_chain.n_sites() <= spec.n_env
            {
                return Err(Error::InvalidInput(format!(
                    "chains must be computed past site {}",
                    spec.n_env
                )));
            }
            (
                spec.n_env + 1,
                spec.empty_closure.n_modes(),
                spec.filled_closure.n_modes(),
            )
        }
        ReferenceMode::LongChain(l) => {
            if l == 0 {
                return Err(Error::InvalidInput("long chain needs at least 1 site".into()));
            }
            (l, 0, 0)
        }
    };

    let layout = Layout {
        system: Some(0),
        empty_chain: 1..1 + chain_len,
        filled_chain: 1 + chain_len..1 + 2 * chain_len,
        empty_closure: 1 + 2 * chain_len..1 + 2 * chain_len + nc0,
        filled_closure: 1 + 2 * chain_len + nc0..1 + 2 * chain_len + nc0 + nc1,
    };
    let dim = 1 + 2 * chain_len + nc0 + nc1;
    let mut h_static = CMatrix::zeros(dim, dim);
    let mut h_coupling = CMatrix::zeros(dim, dim);
    let mut loss = vec![0.0; dim];
    let mut gain = vec![0.0; dim];

    // system energy and system-chain couplings (the ramped part)
    h_coupling[(0, 0)] = Complex64::new(spec.system_energy, 0.0);
    for (chain, start) in [
        (spec.empty_chain, layout.empty_chain.start),
        (spec.filled_chain, layout.filled_chain.start),
    ] {
        let eta = Complex64::new(chain.eta, 0.0);
        h_coupling[(0, start)] = eta;
        h_coupling[(start, 0)] = eta;
        for n in 0..chain_len {
            h_static[(start + n, start + n)] = Complex64::new(site_energy(chain, n), 0.0);
            if n + 1 < chain_len {
                let k = Complex64::new(hopping(chain, n), 0.0);
                h_static[(start + n, start + n + 1)] = k;
                h_static[(start + n + 1, start + n)] = k;
            }
        }
    }

    if let ReferenceMode::Fmc = spec.mode {
        for (closure, chain_range, closure_range) in [
            (spec.empty_closure, &layout.empty_chain, &layout.empty_closure),
            (spec.filled_closure, &layout.filled_chain, &layout.filled_closure),
        ] {
            let edge = chain_range.end - 1;
            let base = closure_range.start;
            for k in 0..closure.n_modes() {
                h_static[(edge, base + k)] = closure.zeta[k];
                h_static[(base + k, edge)] = closure.zeta[k].conj();
                h_static[(base + k, base + k)] = Complex64::new(closure.omega[k], 0.0);
                if k + 1 < closure.n_modes() {
                    let g = Complex64::new(closure.g[k], 0.0);
                    h_static[(base + k, base + k + 1)] = g;
                    h_static[(base + k + 1, base + k)] = g;
                }
            }
        }
        for (k, idx) in layout.empty_closure.clone().enumerate() {
            loss[idx] = spec.empty_closure.gamma[k];
        }
        for (k, idx) in layout.filled_closure.clone().enumerate() {
            gain[idx] = spec.filled_closure.gamma[k];
        }
    }

    // with no ramp the coupling part is static
    let (h_static, h_ramped) = match spec.ramp {
        Ramp::Constant => (h_static + h_coupling, CMatrix::zeros(dim, dim)),
        Ramp::Linear { .. } => (h_static, h_coupling),
    };

    let sys = QuadraticLindbladSystem {
        h_static,
        h_ramped,
        ramp: spec.ramp,
        loss,
        gain,
        layout,
    };
    sys.validate()?;
    Ok(sys)
}

/// Build a single environment (one chain plus its closure, no system
/// mode), as used for environment correlation functions.
pub fn assemble_environment(
    chain: &ChainCoefficients,
    n_env: usize,
    closure: &ClosureParams,
) -> Result<QuadraticLindbladSystem> {
    if chain.n_sites() <= n_env {
        return Err(Error::InvalidInput(format!(
            "chain must be computed past site {n_env}"
        )));
    }
    let chain_len = n_env + 1;
    let nc = closure.n_modes();
    let dim = chain_len + nc;
    let (empty_fill, chain_range, closure_range) = match closure.fill {
        Fill::Empty => (true, 0..chain_len, chain_len..dim),
        Fill::Filled => (false, 0..chain_len, chain_len..dim),
    };
    let layout = Layout {
        system: None,
        empty_chain: if empty_fill { chain_range.clone() } else { 0..0 },
        filled_chain: if empty_fill { 0..0 } else { chain_range.clone() },
        empty_closure: if empty_fill { closure_range.clone() } else { 0..0 },
        filled_closure: if empty_fill { 0..0 } else { closure_range.clone() },
    };
    let mut h = CMatrix::zeros(dim, dim);
    for n in 0..chain_len {
        h[(n, n)] = Complex64::new(site_energy(chain, n), 0.0);
        if n + 1 < chain_len {
            let k = Complex64::new(hopping(chain, n), 0.0);
            h[(n, n + 1)] = k;
            h[(n + 1, n)] = k;
        }
    }
    let edge = chain_len - 1;
    for k in 0..nc {
        h[(edge, chain_len + k)] = closure.zeta[k];
        h[(chain_len + k, edge)] = closure.zeta[k].conj();
        h[(chain_len + k, chain_len + k)] = Complex64::new(closure.omega[k], 0.0);
        if k + 1 < nc {
            let g = Complex64::new(closure.g[k], 0.0);
            h[(chain_len + k, chain_len + k + 1)] = g;
            h[(chain_len + k + 1, chain_len + k)] = g;
        }
    }
    let mut loss = vec![0.0; dim];
    let mut gain = vec![0.0; dim];
    for (k, idx) in (chain_len..dim).enumerate() {
        match closure.fill {
            Fill::Empty => loss[idx] = closure.gamma[k],
            Fill::Filled => gain[idx] = closure.gamma[k],
        }
    }
    let sys = QuadraticLindbladSystem {
        h_static: h,
        h_ramped: CMatrix::zeros(dim, dim),
        ramp: Ramp::Constant,
        loss,
        gain,
        layout,
    };
    sys.validate()?;
    Ok(sys)
}

// ---------------------------------------------------------------------------
// Correlation-matrix evolution

/// Right-hand side of the correlation-matrix equation of motion
/// dC/dt = i (h^T C - C h^T) - 1/2 {Gamma, C} + Gamma_gain,
/// equivalently -X^dag C - C X + Gamma_gain with X = i h^T + Gamma/2.
/// The transpose on h follows from C_{jk} = <a_j^dag a_k>; the whole form
/// is validated against the dense master-equation oracle.
fn eom_rhs(sys: &QuadraticLindbladSystem, h_t: &CMatrix, c: &CMatrix) -> CMatrix {
    let ht = h_t.transpose();
    let mut rhs = (&ht * c - c * &ht) * I;
    let d = sys.dim();
    for j in 0..d {
        let gj = 0.5 * (sys.loss[j] + sys.gain[j]);
        for k in 0..d {
            let gk = 0.5 * (sys.loss[k] + sys.gain[k]);
            rhs[(j, k)] -= (gj + gk) * c[(j, k)];
        }
        rhs[(j, j)] += Complex64::new(sys.gain[j], 0.0);
    }
    rhs
}

/// Evolve the correlation matrix by fixed-step RK4, recording every
/// `record_every`-th step (and always the initial and final states). The
/// matrix is re-Hermitized each step; the fermionic constraint is checked
/// at every recorded snapshot.
pub fn evolve(
    sys: &QuadraticLindbladSystem,
    c0: &CorrelationMatrix,
    t_max: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory> {
    sys.validate()?;
    if !(dt > 0.0) || !(t_max > 0.0) {
        return Err(Error::InvalidInput("need positive dt and t_max".into()));
    }
    if c0.dim() != sys.dim() {
        return Err(Error::InvalidInput("state dimension mismatch".into()));
    }
    let record_every = record_every.max(1);
    let n_steps = (t_max / dt).round() as usize;
    let mut c = c0.c.clone();
    let mut times = vec![0.0];
    let mut snapshots = vec![c0.clone()];
    let time_independent = matches!(sys.ramp, Ramp::Constant) || sys.h_ramped.camax() == 0.0;
    let h_const = sys.h_at(0.0);

    for step in 0..n_steps {
        let t = step as f64 * dt;
        let (h1, h2, h3);
        #[allow(unused_assignments)]
        let (ha, hb, hc) = if time_independent {
            (&h_const, &h_const, &h_const)
        } else {
            h1 = sys.h_at(t);
            h2 = sys.h_at(t + 0.5 * dt);
            h3 = sys.h_at(t + dt);
            (&h1, &h2, &h3)
        };
        let k1 = eom_rhs(sys, ha, &c);
        let k2 = eom_rhs(sys, hb, &(&c + &k1 * Complex64::new(0.5 * dt, 0.0)));
        let k3 = eom_rhs(sys, hb, &(&c + &k2 * Complex64::new(0.5 * dt, 0.0)));
        let k4 = eom_rhs(sys, hc, &(&c + &k3 * Complex64::new(dt, 0.0)));
        c += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
            * Complex64::new(dt / 6.0, 0.0);
        // keep C exactly Hermitian against round-off drift
        c = (&c + &c.adjoint()) * Complex64::new(0.5, 0.0);
        if (step + 1) % record_every == 0 || step + 1 == n_steps {
            let snap = CorrelationMatrix { c: c.clone() };
            let t_now = (step + 1) as f64 * dt;
            snap.check_pauli(1e-8, t_now)?;
            times.push(t_now);
            snapshots.push(snap);
        }
    }
    Ok(Trajectory { times, snapshots })
}

/// Closed-system (no dissipation, no ramp) evolution via a single
/// eigendecomposition: C(t) = e^{i h^T t} C(0) e^{-i h^T t}. Much faster
/// than stepping for the long-chain references.
pub fn evolve_closed(
    sys: &QuadraticLindbladSystem,
    c0: &CorrelationMatrix,
    times: &[f64],
) -> Result<Trajectory> {
    sys.validate()?;
    if !sys.is_closed() {
        return Err(Error::InvalidInput(
            "closed evolution requires zero rates".into(),
        ));
    }
    if !matches!(sys.ramp, Ramp::Constant) && sys.h_ramped.camax() != 0.0 {
        return Err(Error::InvalidInput(
            "closed evolution requires a time-independent Hamiltonian".into(),
        ));
    }
    let ht = sys.h_at(0.0).transpose();
    let eig = ht.symmetric_eigen();
    let v = eig.eigenvectors;
    let vh = v.adjoint();
    let c_rot = &vh * &c0.c * &v;
    let mut snapshots = Vec::with_capacity(times.len());
    for &t in times {
        let phases: Vec<Complex64> = eig
            .eigenvalues
            .iter()
            .map(|w| (I * Complex64::new(w * t, 0.0)).exp())
            .collect();
        let mut m = c_rot.clone();
        for j in 0..m.nrows() {
            for k in 0..m.ncols() {
                m[(j, k)] *= phases[j] * phases[k].conj();
            }
        }
        let c = &v * m * &vh;
        snapshots.push(CorrelationMatrix {
            c: (&c + &c.adjoint()) * Complex64::new(0.5, 0.0),
        });
    }
    Ok(Trajectory {
        times: times.to_vec(),
        snapshots,
    })
}

/// Closed-system evolution with a time-dependent (ramped) Hamiltonian:
/// the single-particle unitary U obeys dU/dt = i h^T(t) U and is advanced
/// with midpoint-Magnus steps of at most `magnus_dt` (exact once the ramp
/// has saturated); snapshots are C(t) = U C(0) U^dag at `times`, which
/// must be non-decreasing.
pub fn evolve_closed_ramped(
    sys: &QuadraticLindbladSystem,
    c0: &CorrelationMatrix,
    times: &[f64],
    magnus_dt: f64,
) -> Result<Trajectory> {
    sys.validate()?;
    if !sys.is_closed() {
        return Err(Error::InvalidInput(
            "closed evolution requires zero rates".into(),
        ));
    }
    if !(magnus_dt > 0.0) {
        return Err(Error::InvalidInput("need positive magnus_dt".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidInput("times must be non-decreasing".into()));
    }
    let dim = sys.dim();
    // e^{i h^T dt} via the Hermitian eigendecomposition of h^T
    let unitary_step = |h_t: &CMatrix, dt: f64| -> CMatrix {
        let eig = h_t.transpose().symmetric_eigen();
        let v = &eig.eigenvectors;
        let mut m = v.clone();
        for (k, w) in eig.eigenvalues.iter().enumerate() {
            let phase = (I * Complex64::new(w * dt, 0.0)).exp();
            for r in 0..dim {
                m[(r, k)] *= phase;
            }
        }
        m * v.adjoint()
    };
    let ramp_end = match sys.ramp {
        Ramp::Constant => 0.0,
        Ramp::Linear { tau } => tau,
    };
    let mut u = CMatrix::identity(dim, dim);
    let mut t = 0.0;
    let mut snapshots = Vec::with_capacity(times.len());
    for &target in times {
        while t < target - 1e-12 {
            let remaining = target - t;
            if t >= ramp_end {
                // constant Hamiltonian: one exact step to the target
                u = unitary_step(&sys.h_at(t), remaining) * u;
                t = target;
            } else {
                let dt = magnus_dt.min(remaining).min(ramp_end - t).max(1e-12);
                u = unitary_step(&sys.h_at(t + 0.5 * dt), dt) * u;
                t += dt;
            }
        }
        let c = &u * &c0.c * u.adjoint();
        snapshots.push(CorrelationMatrix {
            c: (&c + &c.adjoint()) * Complex64::new(0.5, 0.0),
        });
    }
    Ok(Trajectory {
        times: times.to_vec(),
        snapshots,
    })
}

// ---------------------------------------------------------------------------
// Two-time correlation functions

/// Single-particle generator governing <a_p(t) a_q^dag(0)> on a Gaussian
/// state: A = -i h - (loss + gain)/2. The filled-side correlator
/// <a_p^dag(t) a_q(0)> is governed by the particle-hole transform
/// B = +i h^T - (loss + gain)/2.
pub fn single_particle_generator(sys: &QuadraticLindbladSystem, fill: Fill) -> CMatrix {
    let h = sys.h_at(f64::INFINITY);
    let d = sys.dim();
    let mut a = match fill {
        Fill::Empty => h * (-I),
        Fill::Filled => h.transpose() * I,
    };
    for j in 0..d {
        a[(j, j)] -= Complex64::new(0.5 * (sys.loss[j] + sys.gain[j]), 0.0);
    }
    a
}

/// Environment correlation function at `probe_site`: for fill = empty
/// c(t) = <a_p(t) a_p^dag(0)> on the vacuum; for fill = filled
/// c(t) = <a_p^dag(t) a_p(0)> on the completely filled state. `times`
/// must be a uniform non-negative grid starting at 0.
pub fn two_time_correlator(
    sys: &QuadraticLindbladSystem,
    probe_site: usize,
    times: &[f64],
    fill: Fill,
) -> Result<Vec<Complex64>> {
    sys.validate()?;
    if sys.layout.system.is_some() {
        return Err(Error::InvalidInput(
            "correlator requires an environment-only network".into(),
        ));
    }
    if probe_site >= sys.dim() {
        return Err(Error::InvalidInput("probe site out of range".into()));
    }
    let uniform = times.len() >= 2
        && times[0] == 0.0
        && times.windows(2).all(|w| {
            (w[1] - w[0] - (times[1] - times[0])).abs() < 1e-12 * times[times.len() - 1].max(1.0)
        });
    if !uniform {
        return Err(Error::InvalidInput(
            "times must be a uniform grid starting at 0".into(),
        ));
    }
    let a = single_particle_generator(sys, fill);
    let dt = times[1] - times[0];
    let e = expm(&(&a * Complex64::new(dt, 0.0)));
    let mut v = DVector::<Complex64>::zeros(sys.dim());
    v[probe_site] = Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(times.len());
    for _ in times {
        out.push(v[probe_site]);
        v = &e * v;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Dense master-equation oracle

/// Brute-force Lindblad evolution of the full 2^dim density matrix
/// (dim <= 4), used as ground truth for the correlation-matrix engine.
pub mod oracle {
    use super::*;

    /// Annihilation operator of mode `j` on the 2^dim Fock space, with the
    /// ordered-mode sign convention (bit j of the basis index is the
    /// occupation of mode j; modes below j contribute the parity sign).
    pub fn annihilator(dim: usize, j: usize) -> CMatrix {
        let n = 1 << dim;
        let mut a = CMatrix::zeros(n, n);
        for basis in 0..n {
            if basis & (1 << j) != 0 {
                let target = basis & !(1 << j);
                let parity = (basis & ((1 << j) - 1)).count_ones();
                let sign = if parity.is_multiple_of(2) { 1.0 } else { -1.0 };
                a[(target, basis)] = Complex64::new(sign, 0.0);
            }
        }
        a
    }

    /// Many-body Hamiltonian for the single-particle matrix `h`.
    pub fn many_body_hamiltonian(h: &CMatrix) -> CMatrix {
        let dim = h.nrows();
        let n = 1 << dim;
        let mut out = CMatrix::zeros(n, n);
        for j in 0..dim {
            let adj_j = annihilator(dim, j).adjoint();
            for k in 0..dim {
                if h[(j, k)] != Complex64::new(0.0, 0.0) {
                    out += &adj_j * annihilator(dim, k) * h[(j, k)];
                }
            }
        }
        out
    }

    /// Product state |occupations> as a density matrix.
    pub fn product_state(dim: usize, occupations: &[bool]) -> CMatrix {
        let mut idx = 0usize;
        for (j, occ) in occupations.iter().enumerate() {
            if *occ {
                idx |= 1 << j;
            }
        }
        let n = 1 << dim;
        let mut rho = CMatrix::zeros(n, n);
        rho[(idx, idx)] = Complex64::new(1.0, 0.0);
        rho
    }

    /// Lindblad superoperator applied to `rho` (works on any operator,
    /// which is what two-time correlators need).
    pub fn lindbladian(
        sys: &QuadraticLindbladSystem,
        h_many: &CMatrix,
        rho: &CMatrix,
    ) -> CMatrix {
        let dim = sys.dim();
        let mut out = (h_many * rho - rho * h_many) * (-I);
        for j in 0..dim {
            let a = annihilator(dim, j);
            let ad = a.adjoint();
            if sys.loss[j] > 0.0 {
                let g = Complex64::new(sys.loss[j], 0.0);
                let num = &ad * &a;
                out += (&a * rho * &ad - (&num * rho + rho * &num) * Complex64::new(0.5, 0.0)) * g;
            }
            if sys.gain[j] > 0.0 {
                let g = Complex64::new(sys.gain[j], 0.0);
                let num = &a * &ad;
                out += (&ad * rho * &a - (&num * rho + rho * &num) * Complex64::new(0.5, 0.0)) * g;
            }
        }
        out
    }

    /// RK4 evolution of the density matrix; returns (times, correlation
    /// matrices, density matrices at the recorded times).
    pub fn evolve_dense(
        sys: &QuadraticLindbladSystem,
        rho0: &CMatrix,
        t_max: f64,
        dt: f64,
        record_every: usize,
    ) -> Result<(Vec<f64>, Vec<CMatrix>, Vec<CMatrix>)> {
        sys.validate()?;
        let dim = sys.dim();
        if dim > 4 {
            return Err(Error::InvalidInput(
                "dense oracle capped at 4 modes".into(),
            ));
        }
        let record_every = record_every.max(1);
        let n_steps = (t_max / dt).round() as usize;
        let time_independent =
            matches!(sys.ramp, Ramp::Constant) || sys.h_ramped.camax() == 0.0;
        let h_many_const = many_body_hamiltonian(&sys.h_at(0.0));
        let mut rho = rho0.clone();
        let mut times = vec![0.0];
        let mut corrs = vec![correlations(sys, &rho)];
        let mut rhos = vec![rho.clone()];
        for step in 0..n_steps {
            let t = step as f64 * dt;
            let (m1, m2, m3);
            let (ha, hb, hc) = if time_independent {
                (&h_many_const, &h_many_const, &h_many_const)
            } else {
                m1 = many_body_hamiltonian(&sys.h_at(t));
                m2 = many_body_hamiltonian(&sys.h_at(t + 0.5 * dt));
                m3 = many_body_hamiltonian(&sys.h_at(t + dt));
                (&m1, &m2, &m3)
            };
            let k1 = lindbladian(sys, ha, &rho);
            let k2 = lindbladian(sys, hb, &(&rho + &k1 * Complex64::new(0.5 * dt, 0.0)));
            let k3 = lindbladian(sys, hb, &(&rho + &k2 * Complex64::new(0.5 * dt, 0.0)));
            let k4 = lindbladian(sys, hc, &(&rho + &k3 * Complex64::new(dt, 0.0)));
            rho += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
                * Complex64::new(dt / 6.0, 0.0);
            rho = (&rho + &rho.adjoint()) * Complex64::new(0.5, 0.0);
            if (step + 1) % record_every == 0 || step + 1 == n_steps {
                times.push((step + 1) as f64 * dt);
                corrs.push(correlations(sys, &rho));
                rhos.push(rho.clone());
            }
        }
        Ok((times, corrs, rhos))
    }

    /// Correlation matrix <a_j^dag a_k> read off a density matrix.
    pub fn correlations(sys: &QuadraticLindbladSystem, rho: &CMatrix) -> CMatrix {
        let dim = sys.dim();
        let mut c = CMatrix::zeros(dim, dim);
        for j in 0..dim {
            let adj_j = annihilator(dim, j).adjoint();
            for k in 0..dim {
                let op = &adj_j * annihilator(dim, k);
                c[(j, k)] = (op * rho).trace();
            }
        }
        c
    }

    /// Two-time correlator via quantum regression on the dense Lindbladian:
    /// fill = empty gives <a_p(t) a_q^dag(0)>, fill = filled gives
    /// <a_p^dag(t) a_q(0)>, both on the stated stationary initial state.
    pub fn two_time_dense(
        sys: &QuadraticLindbladSystem,
        p: usize,
        q: usize,
        rho0: &CMatrix,
        t_max: f64,
        dt: f64,
        fill: Fill,
    ) -> Result<Vec<Complex64>> {
        sys.validate()?;
        let dim = sys.dim();
        if dim > 4 {
            return Err(Error::InvalidInput(
                "dense oracle capped at 4 modes".into(),
            ));
        }
        let h_many = many_body_hamiltonian(&sys.h_at(0.0));
        let a_p = annihilator(dim, p);
        let a_q = annihilator(dim, q);
        // sigma(0) = a_q^dag rho (empty) or a_q rho (filled); then
        // c(t) = tr(a_p sigma(t)) or tr(a_p^dag sigma(t)).
        let mut sigma = match fill {
            Fill::Empty => a_q.adjoint() * rho0,
            Fill::Filled => &a_q * rho0,
        };
        let probe = match fill {
            Fill::Empty => a_p.clone(),
            Fill::Filled => a_p.adjoint(),
        };
        let n_steps = (t_max / dt).round() as usize;
        let mut out = Vec::with_capacity(n_steps + 1);
        for _ in 0..=n_steps {
            out.push((&probe * &sigma).trace());
            let k1 = lindbladian(sys, &h_many, &sigma);
            let k2 = lindbladian(sys, &h_many, &(&sigma + &k1 * Complex64::new(0.5 * dt, 0.0)));
            let k3 = lindbladian(sys, &h_many, &(&sigma + &k2 * Complex64::new(0.5 * dt, 0.0)));
            let k4 = lindbladian(sys, &h_many, &(&sigma + &k3 * Complex64::new(dt, 0.0)));
            sigma += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
                * Complex64::new(dt / 6.0, 0.0);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::closure_generator;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, dim: usize) -> QuadraticLindbladSystem {
        let mut h = CMatrix::zeros(dim, dim);
        for j in 0..dim {
            h[(j, j)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            for k in j + 1..dim {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                h[(j, k)] = z;
                h[(k, j)] = z.conj();
            }
        }
        let loss: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..0.8)).collect();
        let gain: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..0.8)).collect();
        QuadraticLindbladSystem {
            h_static: h,
            h_ramped: CMatrix::zeros(dim, dim),
            ramp: Ramp::Constant,
            loss,
            gain,
            layout: Layout {
                system: None,
                empty_chain: 0..0,
                filled_chain: 0..0,
                empty_closure: 0..0,
                filled_closure: 0..0,
            },
        }
    }

    #[test]
    fn single_mode_decay_and_fill() {
        let mk = |loss: f64, gain: f64| QuadraticLindbladSystem {
            h_static: CMatrix::zeros(1, 1),
            h_ramped: CMatrix::zeros(1, 1),
            ramp: Ramp::Constant,
            loss: vec![loss],
            gain: vec![gain],
            layout: Layout {
                system: None,
                empty_chain: 0..0,
                filled_chain: 0..0,
                empty_closure: 0..0,
                filled_closure: 0..0,
            },
        };
        let g = 0.7;
        let traj = evolve(&mk(g, 0.0), &CorrelationMatrix::filled(1), 2.0, 1e-3, 2000).unwrap();
        let n_final = traj.snapshots.last().unwrap().c[(0, 0)].re;
        assert!((n_final - (-g * 2.0_f64).exp()).abs() < 1e-10);

        let traj = evolve(&mk(0.0, g), &CorrelationMatrix::vacuum(1), 2.0, 1e-3, 2000).unwrap();
        let n_final = traj.snapshots.last().unwrap().c[(0, 0)].re;
        assert!((n_final - (1.0 - (-g * 2.0_f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn oracle_equivalence_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let dim = rng.gen_range(2..=3);
            let sys = random_instance(&mut rng, dim);
            let occ: Vec<bool> = (0..dim).map(|_| rng.gen_bool(0.5)).collect();
            let mut c0 = CorrelationMatrix::vacuum(dim);
            for (j, o) in occ.iter().enumerate() {
                if *o {
                    c0.c[(j, j)] = Complex64::new(1.0, 0.0);
                }
            }
            let rho0 = oracle::product_state(dim, &occ);
            let traj = evolve(&sys, &c0, 10.0, 1e-3, 1000).unwrap();
            let (times, corrs, rhos) =
                oracle::evolve_dense(&sys, &rho0, 10.0, 1e-3, 1000).unwrap();
            assert_eq!(traj.times, times);
            for (snap, dense) in traj.snapshots.iter().zip(&corrs) {
                let err = (&snap.c - dense).camax();
                assert!(err < 1e-8, "trial {trial}: entrywise error {err:e}");
            }
            for rho in &rhos {
                assert!((rho.trace().re - 1.0).abs() < 1e-10);
                assert!(rho.trace().im.abs() < 1e-12);
                let min_eig = hermitian_eigenvalues(rho)
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                assert!(min_eig > -1e-10, "trial {trial}: min eigenvalue {min_eig:e}");
            }
        }
    }

    #[test]
    fn oracle_agrees_with_time_dependent_ramp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dim = 2;
        let base = random_instance(&mut rng, dim);
        let mut hr = CMatrix::zeros(dim, dim);
        hr[(0, 1)] = Complex64::new(0.3, 0.2);
        hr[(1, 0)] = Complex64::new(0.3, -0.2);
        let sys = QuadraticLindbladSystem {
            h_ramped: hr,
            ramp: Ramp::Linear { tau: 3.0 },
            ..base
        };
        let occ = [true, false];
        let mut c0 = CorrelationMatrix::vacuum(dim);
        c0.c[(0, 0)] = Complex64::new(1.0, 0.0);
        let traj = evolve(&sys, &c0, 6.0, 1e-3, 6000).unwrap();
        let (_, corrs, _) =
            oracle::evolve_dense(&sys, &oracle::product_state(dim, &occ), 6.0, 1e-3, 6000)
                .unwrap();
        let err = (&traj.snapshots.last().unwrap().c - corrs.last().unwrap()).camax();
        assert!(err < 1e-8, "ramped entrywise error {err:e}");
    }

    #[test]
    fn two_time_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let dim = 3;
        let mut sys = random_instance(&mut rng, dim);
        // stationary initial states need pure loss (vacuum) or pure gain
        // (filled) so test each fill with its matching rates
        let loss = sys.loss.clone();
        sys.gain = vec![0.0; dim];
        let times: Vec<f64> = (0..501).map(|k| k as f64 * 0.01).collect();
        let fast = two_time_correlator(&sys, 1, &times, Fill::Empty).unwrap();
        let dense = oracle::two_time_dense(
            &sys,
            1,
            1,
            &oracle::product_state(dim, &[false; 3]),
            5.0,
            0.01,
            Fill::Empty,
        )
        .unwrap();
        for (a, b) in fast.iter().zip(&dense) {
            assert!((a - b).norm() < 1e-8, "empty: {a} vs {b}");
        }

        sys.loss = vec![0.0; dim];
        sys.gain = loss;
        let fast = two_time_correlator(&sys, 2, &times, Fill::Filled).unwrap();
        let dense = oracle::two_time_dense(
            &sys,
            2,
            2,
            &oracle::product_state(dim, &[true; 3]),
            5.0,
            0.01,
            Fill::Filled,
        )
        .unwrap();
        for (a, b) in fast.iter().zip(&dense) {
            assert!((a - b).norm() < 1e-8, "filled: {a} vs {b}");
        }
    }

    fn toy_closure(fill: Fill) -> ClosureParams {
        ClosureParams {
            omega: vec![0.9, 1.1],
            g: vec![0.4],
            gamma: vec![0.3, 0.5],
            zeta: vec![
                Complex64::new(0.35, 0.0),
                Complex64::new(0.0, -0.35),
            ],
            fill,
        }
    }

    fn toy_chain(n: usize) -> ChainCoefficients {
        ChainCoefficients {
            eta: 0.5,
            omega: vec![1.0; n],
            kappa: vec![0.5; n.saturating_sub(1)],
            asym_omega: 1.0,
            asym_kappa: 0.5,
            source_domain: crate::specdens::Interval::new(0.0, 2.0).unwrap(),
        }
    }

    #[test]
    fn assemble_dimensions_and_stationarity() {
        let chain = toy_chain(8);
        let spec = AssemblySpec {
            system_energy: -0.4,
            empty_chain: &chain,
            filled_chain: &chain,
            n_env: 6,
            empty_closure: &toy_closure(Fill::Empty),
            filled_closure: &toy_closure(Fill::Filled),
            mode: ReferenceMode::Fmc,
            ramp: Ramp::Constant,
        };
        let sys = assemble(&spec).unwrap();
        assert_eq!(sys.dim(), 1 + 2 * 7 + 2 * 2);
        // vacuum on the empty side / identity on the filled side is a
        // fixed point of the closure-only dynamics
        let closure_net =
            assemble_environment(&toy_chain(1), 0, &toy_closure(Fill::Empty)).unwrap();
        let c0 = CorrelationMatrix::vacuum(closure_net.dim());
        let traj = evolve(&closure_net, &c0, 1.0, 1e-3, 100).unwrap();
        for snap in &traj.snapshots {
            assert!(snap.c.camax() < 1e-12);
        }
        let closure_net =
            assemble_environment(&toy_chain(1), 0, &toy_closure(Fill::Filled)).unwrap();
        let c0 = CorrelationMatrix::filled(closure_net.dim());
        let traj = evolve(&closure_net, &c0, 1.0, 1e-3, 100).unwrap();
        for snap in &traj.snapshots {
            assert!((&snap.c - CMatrix::identity(snap.dim(), snap.dim())).camax() < 1e-12);
        }

        let long = assemble(&AssemblySpec {
            mode: ReferenceMode::LongChain(12),
            ..spec
        })
        .unwrap();
        assert_eq!(long.dim(), 1 + 2 * 12);
        assert!(long.is_closed());
    }

    #[test]
    fn decoupled_system_population_is_constant() {
        let chain = ChainCoefficients {
            eta: 0.0,
            ..toy_chain(4)
        };
        let sys = assemble(&AssemblySpec {
            system_energy: -0.4,
            empty_chain: &chain,
            filled_chain: &chain,
            n_env: 2,
            empty_closure: &toy_closure(Fill::Empty),
            filled_closure: &toy_closure(Fill::Filled),
            mode: ReferenceMode::Fmc,
            ramp: Ramp::Constant,
        })
        .unwrap();
        let c0 = CorrelationMatrix::initial_state(&sys.layout, sys.dim(), true);
        let traj = evolve(&sys, &c0, 3.0, 1e-3, 500).unwrap();
        for snap in &traj.snapshots {
            assert!((snap.c[(0, 0)].re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_system_conserves_particle_number() {
        let chain = toy_chain(10);
        let sys = assemble(&AssemblySpec {
            system_energy: -0.4,
            empty_chain: &chain,
            filled_chain: &chain,
            n_env: 0,
            empty_closure: &toy_closure(Fill::Empty),
            filled_closure: &toy_closure(Fill::Filled),
            mode: ReferenceMode::LongChain(10),
            ramp: Ramp::Constant,
        })
        .unwrap();
        let c0 = CorrelationMatrix::initial_state(&sys.layout, sys.dim(), true);
        let n0 = c0.c.trace().re;
        let traj = evolve(&sys, &c0, 5.0, 1e-3, 1000).unwrap();
        for snap in &traj.snapshots {
            assert!((snap.c.trace().re - n0).abs() < 1e-9);
        }
        // eigendecomposition path agrees with stepping
        let closed = evolve_closed(&sys, &c0, &traj.times).unwrap();
        let err = (&closed.snapshots.last().unwrap().c - &traj.snapshots.last().unwrap().c)
            .camax();
        assert!(err < 1e-9, "closed-path disagreement {err:e}");
    }

    #[test]
    fn ramped_closed_propagator_matches_rk4() {
        let chain = toy_chain(8);
        let sys = assemble(&AssemblySpec {
            system_energy: -0.4,
            empty_chain: &chain,
            filled_chain: &chain,
            n_env: 0,
            empty_closure: &toy_closure(Fill::Empty),
            filled_closure: &toy_closure(Fill::Filled),
            mode: ReferenceMode::LongChain(8),
            ramp: Ramp::Linear { tau: 3.0 },
        })
        .unwrap();
        let c0 = CorrelationMatrix::initial_state(&sys.layout, sys.dim(), true);
        let traj = evolve(&sys, &c0, 6.0, 2e-4, 5000).unwrap();
        let prop = evolve_closed_ramped(&sys, &c0, &traj.times, 1e-3).unwrap();
        for (a, b) in traj.snapshots.iter().zip(&prop.snapshots) {
            let err = (&a.c - &b.c).camax();
            assert!(err < 1e-5, "propagator disagreement {err:e}");
        }
        // exact constant-Hamiltonian jump well past the ramp
        let late = evolve_closed_ramped(&sys, &c0, &[0.0, 6.0], 1e-3).unwrap();
        let err = (&late.snapshots[1].c - &traj.snapshots.last().unwrap().c).camax();
        assert!(err < 1e-5, "late-jump disagreement {err:e}");
    }

    #[test]
    fn step_halving_converges() {
        let chain = toy_chain(6);
        let sys = assemble(&AssemblySpec {
            system_energy: -0.4,
            empty_chain: &chain,
            filled_chain: &chain,
            n_env: 4,
            empty_closure: &toy_closure(Fill::Empty),
            filled_closure: &toy_closure(Fill::Filled),
            mode: ReferenceMode::Fmc,
            ramp: Ramp::Constant,
        })
        .unwrap();
        let c0 = CorrelationMatrix::initial_state(&sys.layout, sys.dim(), true);
        let a = evolve(&sys, &c0, 4.0, 2e-3, 2000).unwrap();
        let b = evolve(&sys, &c0, 4.0, 1e-3, 4000).unwrap();
        let err = (&a.snapshots.last().unwrap().c - &b.snapshots.last().unwrap().c).camax();
        assert!(err < 1e-8, "step-halving change {err:e}");
    }

    #[test]
    fn generator_contraction_reproduces_closure_ttcf() {
        // one code path: the rescaled-closure TTCF formula; other code
        // path: the network single-particle generator, zeta-contracted
        for fill in [Fill::Empty, Fill::Filled] {
            let params = toy_closure(fill);
            let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
            let direct = crate::closure::closure_ttcf(&params, &times).unwrap();
            // network consisting of the closure modes alone
            let nc = params.n_modes();
            let mut h = CMatrix::zeros(nc, nc);
            for k in 0..nc {
                h[(k, k)] = Complex64::new(params.omega[k], 0.0);
                if k + 1 < nc {
                    h[(k, k + 1)] = Complex64::new(params.g[k], 0.0);
                    h[(k + 1, k)] = Complex64::new(params.g[k], 0.0);
                }
            }
            let (loss, gain) = match fill {
                Fill::Empty => (params.gamma.clone(), vec![0.0; nc]),
                Fill::Filled => (vec![0.0; nc], params.gamma.clone()),
            };
            let net = QuadraticLindbladSystem {
                h_static: h,
                h_ramped: CMatrix::zeros(nc, nc),
                ramp: Ramp::Constant,
                loss,
                gain,
                layout: Layout {
                    system: None,
                    empty_chain: 0..0,
                    filled_chain: 0..0,
                    empty_closure: 0..0,
                    filled_closure: 0..0,
                },
            };
            let a = single_particle_generator(&net, fill);
            let a_ref = closure_generator(&params);
            assert!((&a - &a_ref).camax() < 1e-14);
            for (idx, &t) in times.iter().enumerate() {
                let e = expm(&(&a * Complex64::new(t, 0.0))).transpose();
                let mut val = Complex64::new(0.0, 0.0);
                for k in 0..nc {
                    for l in 0..nc {
                        val += params.zeta[k].conj() * e[(k, l)] * params.zeta[l];
                    }
                }
                assert!(
                    (val - direct[idx]).norm() < 1e-10,
                    "fill {fill:?} t={t}: {val} vs {}",
                    direct[idx]
                );
            }
        }
    }

    #[test]
    fn chain_vacuum_correlator_starts_at_one() {
        let env = assemble_environment(&toy_chain(4), 3, &toy_closure(Fill::Empty)).unwrap();
        let times: Vec<f64> = (0..10).map(|k| k as f64 * 0.1).collect();
        let c = two_time_correlator(&env, 0, &times, Fill::Empty).unwrap();
        assert!((c[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn uniform_chain_correlator_matches_semicircle() {
        // long dissipation-free uniform chain: the edge correlator
        // approaches e^{-i Omega t} C_sc(2 K t) before the wavefront
        // returns from the far end
        let n = 200;
        let chain = toy_chain(n);
        let mut h = CMatrix::zeros(n, n);
        for k in 0..n {
            h[(k, k)] = Complex64::new(1.0, 0.0);
            if k + 1 < n {
                h[(k, k + 1)] = Complex64::new(0.5, 0.0);
                h[(k + 1, k)] = Complex64::new(0.5, 0.0);
            }
        }
        let _ = chain;
        let net = QuadraticLindbladSystem {
            h_static: h,
            h_ramped: CMatrix::zeros(n, n),
            ramp: Ramp::Constant,
            loss: vec![0.0; n],
            gain: vec![0.0; n],
            layout: Layout {
                system: None,
                empty_chain: 0..n,
                filled_chain: 0..0,
                empty_closure: 0..0,
                filled_closure: 0..0,
            },
        };
        let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.1).collect();
        let c = two_time_correlator(&net, 0, &times, Fill::Empty).unwrap();
        for (idx, &t) in times.iter().enumerate() {
            if t > 150.0 {
                break; // wavefront returns around t = L / K = 400; stay well inside
            }
            let expected = (-I * Complex64::new(t, 0.0)).exp()
                * crate::closure::c_semicircle(2.0 * 0.5 * t);
            assert!(
                (c[idx] - expected).norm() < 1e-6,
                "t={t}: {:?} vs {expected:?}",
                c[idx]
            );
        }
    }

    #[test]
    fn pauli_violation_detected() {
        let sys = QuadraticLindbladSystem {
            h_static: CMatrix::zeros(1, 1),
            h_ramped: CMatrix::zeros(1, 1),
            ramp: Ramp::Constant,
            loss: vec![0.0],
            gain: vec![0.0],
            layout: Layout {
                system: None,
                empty_chain: 0..0,
                filled_chain: 0..0,
                empty_closure: 0..0,
                filled_closure: 0..0,
            },
        };
        let mut bad = CorrelationMatrix::vacuum(1);
        bad.c[(0, 0)] = Complex64::new(1.5, 0.0);
        assert!(matches!(
            evolve(&sys, &bad, 1.0, 1e-2, 10),
            Err(Error::PauliViolation { .. })
        ));
    }
}
