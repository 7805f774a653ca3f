//! Spectral densities on finite frequency intervals and the environment
//! equivalence transformations: thermo-chemical modulation, merging,
//! Majorana extension, thermofield couplings and Szego-class diagnostics.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::composite_gauss_legendre;

/// A finite frequency interval `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::InvalidInput(format!(
                "invalid interval ({lo}, {hi}): need finite lo < hi"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, w: f64) -> bool {
        w >= self.lo && w <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn shifted(&self, delta: f64) -> Interval {
        Interval {
            lo: self.lo + delta,
            hi: self.hi + delta,
        }
    }

    pub fn mirrored(&self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

/// Inverse temperature, with an explicit sentinel for T = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InverseTemperature {
    Finite(f64),
    /// beta = +infinity (zero temperature); occupation becomes a step.
    Zero,
}

impl InverseTemperature {
    pub fn finite(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "inverse temperature must be positive and finite, got {beta}"
            )));
        }
        Ok(Self::Finite(beta))
    }

    pub fn from_temperature(t: f64) -> Result<Self> {
        if t == 0.0 {
            Ok(Self::Zero)
        } else {
            Self::finite(1.0 / t)
        }
    }
}

/// Fermi-Dirac occupation 1/(e^{beta (omega - mu)} + 1).
///
/// Stable for large |beta (omega - mu)|; at the T = 0 sentinel it is the
/// step 1 (omega < mu), 1/2 (omega = mu), 0 (omega > mu).
pub fn fermi_occupation(omega: f64, beta: InverseTemperature, mu: f64) -> Result<f64> {
    if !omega.is_finite() || !mu.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite arguments to fermi_occupation: omega={omega}, mu={mu}"
        )));
    }
    Ok(fermi_occupation_unchecked(omega, beta, mu))
}

fn fermi_occupation_unchecked(omega: f64, beta: InverseTemperature, mu: f64) -> f64 {
    match beta {
        InverseTemperature::Zero => {
            if omega < mu {
                1.0
            } else if omega > mu {
                0.0
            } else {
                0.5
            }
        }
        InverseTemperature::Finite(b) => {
            let x = b * (omega - mu);
            if x >= 0.0 {
                let e = (-x).exp();
                e / (1.0 + e)
            } else {
                1.0 / (1.0 + x.exp())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ModulationSide {
    Empty,
    Filled,
}

#[derive(Clone, Debug)]
enum Kind {
    /// scale * sqrt((w - lo)(hi - w)) on its interval.
    Semicircle { scale: f64, interval: Interval },
    /// Monotone-cubic interpolation of sorted samples, 0 outside.
    Tabulated(Arc<MonotoneCubic>),
    /// Occupation-weighted shift of another density (lazy).
    Modulated {
        side: ModulationSide,
        beta: InverseTemperature,
        mu: f64,
        inner: Arc<SpectralDensity>,
    },
    /// Pointwise sum with indicator semantics.
    Sum(Arc<Vec<SpectralDensity>>),
    /// Mirror-weighted extension onto -dom(J') u dom(J').
    MajoranaExtended {
        beta: InverseTemperature,
        mu: f64,
        inner: Arc<SpectralDensity>,
    },
    /// c * inner, c > 0.
    Scaled { factor: f64, inner: Arc<SpectralDensity> },
    /// inner((w - b) / a) style affine pullback: eval(w) = inner(a w + b).
    AffineArg { a: f64, b: f64, inner: Arc<SpectralDensity> },
    /// Arbitrary non-negative evaluator on a single interval.
    Custom(CustomFn),
}

#[derive(Clone)]
struct CustomFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl std::fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("CustomFn(..)")
    }
}

/// A non-negative weight function supported on a finite union of intervals.
///
/// Compositions (modulation, merging, extension) are lazy: evaluation
/// always reaches down to the parametric or tabulated leaves, so no
/// interpolation error is introduced before quadrature.
#[derive(Clone, Debug)]
pub struct SpectralDensity {
    pieces: Vec<Interval>,
    kind: Kind,
}

impl SpectralDensity {
    /// scale * sqrt((w - lo)(hi - w)) on `interval`.
    pub fn semicircle(scale: f64, interval: Interval) -> Result<Self> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "semicircle scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            pieces: vec![interval],
            kind: Kind::Semicircle { scale, interval },
        })
    }

    /// The unit-radius semicircle (2/pi) sqrt(1 - w^2) on (-1, 1).
    pub fn unit_semicircle() -> Self {
        Self::semicircle(
            2.0 / std::f64::consts::PI,
            Interval { lo: -1.0, hi: 1.0 },
        )
        .expect("unit semicircle parameters are valid")
    }

    /// Tabulated density from sorted (omega, j) samples; monotone cubic
    /// interpolation inside the sample range, 0 outside.
    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self> {
        let interp = MonotoneCubic::new(samples)?;
        let interval = Interval::new(interp.xs[0], *interp.xs.last().unwrap())?;
        Ok(Self {
            pieces: vec![interval],
            kind: Kind::Tabulated(Arc::new(interp)),
        })
    }

    /// Load a tabulated density from a 2-column CSV `omega,j` with header.
    pub fn from_csv(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 {
                continue; // header
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::MalformedFile {
                        path: path.display().to_string(),
                        reason: format!("bad row {}: {line}", i + 1),
                    })
            };
            samples.push((parse(cols.next())?, parse(cols.next())?));
        }
        Self::tabulated(samples)
    }

    /// Density given by an arbitrary non-negative evaluator on an
    /// interval (values outside are ignored).
    pub fn from_fn(
        interval: Interval,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            pieces: vec![interval],
            kind: Kind::Custom(CustomFn(Arc::new(f))),
        }
    }

    /// A density that is identically zero (empty support).
    pub fn zero() -> Self {
        Self {
            pieces: Vec::new(),
            kind: Kind::Sum(Arc::new(Vec::new())),
        }
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        Ok(Self {
            pieces: self.pieces.clone(),
            kind: Kind::Scaled {
                factor,
                inner: Arc::new(self.clone()),
            },
        })
    }

    /// The density w -> self(a w + b) (support transformed accordingly).
    pub fn affine_arg(&self, a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || a == 0.0 {
            return Err(Error::InvalidInput(format!(
                "invalid affine map a={a}, b={b}"
            )));
        }
        let mut pieces: Vec<Interval> = self
            .pieces
            .iter()
            .map(|iv| {
                let (x, y) = ((iv.lo - b) / a, (iv.hi - b) / a);
                Interval {
                    lo: x.min(y),
                    hi: x.max(y),
                }
            })
            .collect();
        pieces.sort_by(|p, q| p.lo.total_cmp(&q.lo));
        Ok(Self {
            pieces,
            kind: Kind::AffineArg {
                a,
                b,
                inner: Arc::new(self.clone()),
            },
        })
    }

    /// Support as a sorted list of disjoint intervals.
    pub fn pieces(&self) -> &[Interval] {
        &self.pieces
    }

    /// Convex hull of the support, if non-empty.
    pub fn hull(&self) -> Option<Interval> {
        let lo = self.pieces.first()?.lo;
        let hi = self.pieces.last()?.hi;
        Some(Interval { lo, hi })
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Pointwise evaluation; 0 outside the support.
    pub fn eval(&self, w: f64) -> f64 {
        if !self.pieces.iter().any(|p| p.contains(w)) {
            return 0.0;
        }
        self.eval_inside(w)
    }

    fn eval_inside(&self, w: f64) -> f64 {
        let v = match &self.kind {
            Kind::Semicircle { scale, interval } => {
                let arg = (w - interval.lo) * (interval.hi - w);
                if arg <= 0.0 {
                    0.0
                } else {
                    scale * arg.sqrt()
                }
            }
            Kind::Tabulated(t) => t.eval(w),
            Kind::Modulated {
                side,
                beta,
                mu,
                inner,
            } => {
                let n = fermi_occupation_unchecked(w, *beta, 0.0);
                let weight = match side {
                    ModulationSide::Empty => 1.0 - n,
                    ModulationSide::Filled => n,
                };
                weight * inner.eval(w + mu)
            }
            Kind::Sum(parts) => parts.iter().map(|p| p.eval(w)).sum(),
            Kind::MajoranaExtended { beta, mu, inner } => {
                // (1 - n_beta(w)) = (1 + tanh(beta w / 2)) / 2
                let weight = 1.0 - fermi_occupation_unchecked(w, *beta, 0.0);
                weight * (inner.eval(-w + mu) + inner.eval(w + mu))
            }
            Kind::Scaled { factor, inner } => factor * inner.eval_inside(w),
            Kind::AffineArg { a, b, inner } => inner.eval(a * w + b),
            Kind::Custom(f) => (f.0)(w),
        };
        v.max(0.0)
    }

    /// Frequencies where the density may lose smoothness: support edges,
    /// interpolation knots, shifted edges of merged constituents, and the
    /// occupation step at T = 0.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = Vec::new();
        match &self.kind {
            Kind::Semicircle { .. } | Kind::Custom(_) => {}
            Kind::Tabulated(t) => pts.extend(&t.xs),
            Kind::Modulated {
                beta, mu, inner, ..
            } => {
                pts.extend(inner.breakpoints().iter().map(|x| x - mu));
                if *beta == InverseTemperature::Zero {
                    pts.push(0.0);
                }
            }
            Kind::Sum(parts) => {
                for p in parts.iter() {
                    pts.extend(p.breakpoints());
                }
            }
            Kind::MajoranaExtended { beta, mu, inner } => {
                for x in inner.breakpoints() {
                    pts.push(x - mu);
                    pts.push(-(x - mu));
                }
                if *beta == InverseTemperature::Zero {
                    pts.push(0.0);
                }
            }
            Kind::Scaled { inner, .. } => pts.extend(inner.breakpoints()),
            Kind::AffineArg { a, b, inner } => {
                pts.extend(inner.breakpoints().iter().map(|x| (x - b) / a))
            }
        }
        for p in &self.pieces {
            pts.push(p.lo);
            pts.push(p.hi);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Subdivide the support into intervals on which the density is
    /// smooth in the interior.
    pub fn smooth_cells(&self) -> Vec<Interval> {
        let pts = self.breakpoints();
        let mut cells = Vec::new();
        for piece in &self.pieces {
            let mut edges: Vec<f64> = vec![piece.lo];
            let tol = 1e-12 * piece.width().max(1.0);
            for &p in &pts {
                if p > piece.lo + tol && p < piece.hi - tol && p - edges.last().unwrap() > tol {
                    edges.push(p);
                }
            }
            edges.push(piece.hi);
            for pair in edges.windows(2) {
                cells.push(Interval {
                    lo: pair[0],
                    hi: pair[1],
                });
            }
        }
        cells
    }

    /// Integral over the support. Each smooth cell is integrated under
    /// the substitution x = m - h cos(theta), which turns square-root
    /// band edges into analytic integrands.
    pub fn integral(&self, nodes_per_cell: usize) -> f64 {
        let panels = (nodes_per_cell / 16).max(1);
        self.smooth_cells()
            .iter()
            .map(|cell| {
                let m = 0.5 * (cell.lo + cell.hi);
                let h = 0.5 * cell.width();
                let (ts, ws) = composite_gauss_legendre(0.0, std::f64::consts::PI, panels, 16);
                ts.iter()
                    .zip(&ws)
                    .map(|(&t, &w)| w * h * t.sin() * self.eval(m - h * t.cos()))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// A lead: spectral density plus thermal state parameters and per-level
/// coupling scale.
#[derive(Clone, Debug)]
pub struct LeadSpec {
    pub density: SpectralDensity,
    pub beta: InverseTemperature,
    pub mu: f64,
    pub kappa: Vec<f64>,
}

impl LeadSpec {
    pub fn new(
        density: SpectralDensity,
        beta: InverseTemperature,
        mu: f64,
        kappa: Vec<f64>,
    ) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite mu: {mu}")));
        }
        if kappa.is_empty() || kappa.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidInput(
                "kappa must be a non-empty list of finite reals".into(),
            ));
        }
        Ok(Self {
            density,
            beta,
            mu,
            kappa,
        })
    }

    pub fn single(density: SpectralDensity, beta: InverseTemperature, mu: f64) -> Result<Self> {
        Self::new(density, beta, mu, vec![1.0])
    }
}

/// The two occupation-weighted densities produced by the thermo-chemical
/// modulation of a lead, on the shifted domain.
#[derive(Clone, Debug)]
pub struct ModulatedPair {
    pub empty_side: SpectralDensity,
    pub filled_side: SpectralDensity,
    pub shifted_domain: Interval,
}

/// Split a lead into an initially-empty and an initially-filled pure
/// environment with occupation-weighted densities on the shifted domain.
pub fn tcsm_modulate(lead: &LeadSpec) -> Result<ModulatedPair> {
    let hull = lead
        .density
        .hull()
        .ok_or_else(|| Error::InvalidInput("cannot modulate a zero density".into()))?;
    let shifted_pieces: Vec<Interval> = lead
        .density
        .pieces()
        .iter()
        .map(|p| p.shifted(-lead.mu))
        .collect();
    let inner = Arc::new(lead.density.clone());
    let make = |side| SpectralDensity {
        pieces: shifted_pieces.clone(),
        kind: Kind::Modulated {
            side,
            beta: lead.beta,
            mu: lead.mu,
            inner: Arc::clone(&inner),
        },
    };
    Ok(ModulatedPair {
        empty_side: make(ModulationSide::Empty),
        filled_side: make(ModulationSide::Filled),
        shifted_domain: hull.shifted(-lead.mu),
    })
}

/// Pointwise sum of densities with indicator semantics. Returns the merged
/// density and a warning when the supports do not overlap pairwise into a
/// single interval (a single Szego chain is then questionable).
pub fn merge_environments(parts: &[SpectralDensity]) -> (SpectralDensity, Option<String>) {
    let nonzero: Vec<SpectralDensity> =
        parts.iter().filter(|p| !p.is_zero()).cloned().collect();
    let mut intervals: Vec<Interval> = nonzero
        .iter()
        .flat_map(|p| p.pieces().iter().copied())
        .collect();
    intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut merged: Vec<Interval> = Vec::new();
    let mut gap = false;
    for iv in intervals {
        match merged.last_mut() {
            Some(last) if iv.lo <= last.hi => {
                last.hi = last.hi.max(iv.hi);
            }
            Some(_) => {
                gap = true;
                merged.push(iv);
            }
            None => merged.push(iv),
        }
    }
    let warning = if gap {
        Some(
            "merged supports are disjoint: the union is not a single interval, \
             a single Szego chain may not be meaningful"
                .to_string(),
        )
    } else {
        None
    };
    (
        SpectralDensity {
            pieces: merged,
            kind: Kind::Sum(Arc::new(nonzero)),
        },
        warning,
    )
}

/// Mirror-weighted extension of a single lead onto the symmetric domain
/// -(Omega - mu) u (Omega - mu), for Majorana-type system-bath coupling.
pub fn majorana_extend(lead: &LeadSpec) -> Result<SpectralDensity> {
    if lead.density.is_zero() {
        return Err(Error::InvalidInput("cannot extend a zero density".into()));
    }
    let shifted: Vec<Interval> = lead
        .density
        .pieces()
        .iter()
        .map(|p| p.shifted(-lead.mu))
        .collect();
    let mut pieces: Vec<Interval> = shifted.iter().map(|p| p.mirrored()).collect();
    pieces.extend(shifted);
    pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    // normalize overlaps into disjoint pieces
    let mut disjoint: Vec<Interval> = Vec::new();
    for iv in pieces {
        match disjoint.last_mut() {
            Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
            _ => disjoint.push(iv),
        }
    }
    Ok(SpectralDensity {
        pieces: disjoint,
        kind: Kind::MajoranaExtended {
            beta: lead.beta,
            mu: lead.mu,
            inner: Arc::new(lead.density.clone()),
        },
    })
}

/// Thermofield couplings h1 = cos(theta) sqrt(J), h2 = sin(theta) sqrt(J)
/// with sin^2(theta) the Fermi occupation at (beta, mu); defined on the
/// original (unshifted) domain.
#[derive(Clone, Debug)]
pub struct ThermofieldCouplings {
    lead: LeadSpec,
}

pub fn thermofield_couplings(lead: &LeadSpec) -> ThermofieldCouplings {
    ThermofieldCouplings { lead: lead.clone() }
}

impl ThermofieldCouplings {
    pub fn h1(&self, w: f64) -> f64 {
        let n = fermi_occupation_unchecked(w, self.lead.beta, self.lead.mu);
        ((1.0 - n) * self.lead.density.eval(w)).sqrt()
    }

    pub fn h2(&self, w: f64) -> f64 {
        let n = fermi_occupation_unchecked(w, self.lead.beta, self.lead.mu);
        (n * self.lead.density.eval(w)).sqrt()
    }
}

/// Numerical diagnostics for membership in the Szego class.
#[derive(Clone, Debug)]
pub struct SzegoReport {
    pub integral_j: f64,
    /// integral of |log J| against the Chebyshev weight; None when the
    /// refinement did not converge (flagged divergent).
    pub log_integral: Option<f64>,
    pub passed: bool,
    pub notes: Vec<String>,
}

/// Heuristic check of the Szego conditions: finite integral of J and of
/// |log J| / sqrt(1 - x^2) on the hull rescaled to [-1, 1], via the
/// endpoint substitution x = cos(t) and 3-level quadrature refinement with
/// a 1e-3 relative-change threshold.
pub fn szego_diagnostic(j: &SpectralDensity) -> Result<SzegoReport> {
    let hull = j
        .hull()
        .ok_or_else(|| Error::InvalidInput("zero density has no Szego diagnostic".into()))?;
    let mid = 0.5 * (hull.lo + hull.hi);
    let half = 0.5 * hull.width();
    // w(x) for x in [-1, 1]
    let w = |x: f64| j.eval(mid + half * x);

    const REL_TOL: f64 = 1e-3;
    let mut notes = Vec::new();

    // integral of J (in rescaled variables; only finiteness matters, but
    // report the physical integral over the hull)
    let levels_j: Vec<f64> = [400, 800, 1600]
        .iter()
        .map(|&panels| {
            let (xs, wts) = composite_gauss_legendre(-1.0, 1.0, panels, 8);
            half * xs
                .iter()
                .zip(&wts)
                .map(|(&x, &wt)| wt * w(x))
                .sum::<f64>()
        })
        .collect();
    let integral_j = levels_j[2];
    let j_converged = converged(&levels_j, REL_TOL);
    if !j_converged {
        notes.push("integral of J did not converge under refinement".into());
    }

    // integral of |log w(cos t)| over (0, pi); an exact zero inside the
    // hull makes the integrand infinite and the diagnostic fail
    let log_abs = |x: f64| {
        let v = w(x);
        if v == 0.0 {
            f64::INFINITY
        } else {
            v.ln().abs()
        }
    };
    let levels_log: Vec<f64> = [400, 800, 1600]
        .iter()
        .map(|&panels| {
            let (ts, wts) = composite_gauss_legendre(0.0, std::f64::consts::PI, panels, 8);
            ts.iter()
                .zip(&wts)
                .map(|(&t, &wt)| wt * log_abs(t.cos()))
                .sum::<f64>()
        })
        .collect();
    let log_converged = converged(&levels_log, REL_TOL);
    let log_integral = if log_converged {
        Some(levels_log[2])
    } else {
        notes.push(format!(
            "log-integral still changing under refinement ({:.3e} -> {:.3e} -> {:.3e}); \
             endpoint behavior is likely non-integrable",
            levels_log[0], levels_log[1], levels_log[2]
        ));
        None
    };

    Ok(SzegoReport {
        integral_j,
        log_integral,
        passed: j_converged && log_converged && integral_j.is_finite(),
        notes,
    })
}

fn converged(levels: &[f64], rel_tol: f64) -> bool {
    let last = levels[levels.len() - 1];
    if !last.is_finite() {
        return false;
    }
    let prev = levels[levels.len() - 2];
    let denom = last.abs().max(1e-12);
    ((last - prev) / denom).abs() < rel_tol
}

/// Sign convention for the analytic two-time correlation function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TtcfSign {
    /// c0(t) = integral J(w) e^{-i w t} dw
    Emission,
    /// c1(t) = integral J(w) e^{+i w t} dw
    Absorption,
}

/// Fourier transform of the density at the given times, by composite
/// Gauss-Legendre quadrature refined until the change is below `rel_tol`.
pub fn analytic_ttcf(
    j: &SpectralDensity,
    times: &[f64],
    sign: TtcfSign,
) -> Result<Vec<Complex64>> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("non-finite time in grid".into()));
    }
    if j.is_zero() {
        return Ok(vec![Complex64::new(0.0, 0.0); times.len()]);
    }
    let t_max = times.iter().fold(0.0_f64, |m, &t| m.max(t.abs()));
    let s = match sign {
        TtcfSign::Emission => -1.0,
        TtcfSign::Absorption => 1.0,
    };
    let rel_tol = 1e-10;

    let cells = j.smooth_cells();
    let eval_with = |panels_per_unit: f64| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); times.len()];
        for cell in &cells {
            let m = 0.5 * (cell.lo + cell.hi);
            let h = 0.5 * cell.width();
            // x = m - h cos(theta): analytic at sqrt band edges; enough
            // panels that each spans a bounded phase at t_max
            let panels = ((cell.width() * (t_max + 1.0) * panels_per_unit).ceil() as usize)
                .clamp(8, 200_000);
            let (ts, ws) = composite_gauss_legendre(0.0, std::f64::consts::PI, panels, 12);
            let xs: Vec<f64> = ts.iter().map(|&t| m - h * t.cos()).collect();
            let jw: Vec<f64> = ts
                .iter()
                .zip(&ws)
                .zip(&xs)
                .map(|((&t, &w), &x)| w * h * t.sin() * j.eval(x))
                .collect();
            for (k, &t) in times.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (&x, &jv) in xs.iter().zip(&jw) {
                    let phase = s * x * t;
                    acc += jv * Complex64::new(phase.cos(), phase.sin());
                }
                out[k] += acc;
            }
        }
        out
    };

    let coarse = eval_with(0.5);
    let fine = eval_with(1.0);
    let scale = fine
        .iter()
        .map(|c| c.norm())
        .fold(1e-300_f64, f64::max);
    let err = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0_f64, f64::max)
        / scale;
    if err > rel_tol {
        return Err(Error::QuadratureNonConvergence {
            achieved: err,
            requested: rel_tol,
        });
    }
    Ok(fine)
}

/// Monotone (Fritsch-Carlson) cubic interpolation of sorted samples.
#[derive(Clone, Debug)]
struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput(
                "tabulated density needs at least two samples".into(),
            ));
        }
        for win in samples.windows(2) {
            if win[1].0 <= win[0].0 {
                return Err(Error::InvalidInput(
                    "tabulated samples must be strictly increasing in omega".into(),
                ));
            }
        }
        if samples.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite() || y < 0.0) {
            return Err(Error::InvalidInput(
                "tabulated samples must be finite with j >= 0".into(),
            ));
        }
        let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let n = xs.len();
        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                m[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        // clamp endpoint slopes (Fritsch-Carlson)
        for i in 0..n - 1 {
            if d[i] == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
            } else {
                let a = m[i] / d[i];
                let b = m[i + 1] / d[i];
                let s = (a * a + b * b).sqrt();
                if s > 3.0 {
                    let tau = 3.0 / s;
                    m[i] = tau * a * d[i];
                    m[i + 1] = tau * b * d[i];
                }
            }
        }
        Ok(Self { xs, ys, slopes: m })
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let i = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        (h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1]
            + h11 * h * self.slopes[i + 1])
            .max(0.0)
    }
}
