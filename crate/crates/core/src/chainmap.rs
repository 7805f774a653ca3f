//! Star-to-chain transformation of a continuum environment.
//!
//! The continuum of modes weighted by a spectral density J is unitarily
//! equivalent to a semi-infinite nearest-neighbor chain whose site energies
//! and hoppings are the three-term recurrence coefficients of the
//! polynomials orthogonal with respect to the measure J(w) dw. The
//! coefficients converge to limits set only by the support interval; the
//! uniform tail is equivalent to a residual semicircle environment.

use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::specdens::{Interval, SpectralDensity};

/// Chain representation of a continuum environment: system coupling `eta`,
/// site energies `omega`, hoppings `kappa`, and the asymptotic values the
/// coefficients approach deep in the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCoefficients {
    /// System-chain coupling; its square is the integral of the density.
    pub eta: f64,
    /// Site energies omega_0..omega_{N-1}.
    pub omega: Vec<f64>,
    /// Hoppings kappa_0..kappa_{N-2}; entry n couples sites n and n+1.
    pub kappa: Vec<f64>,
    /// Limit of the site energies: the support midpoint.
    pub asym_omega: f64,
    /// Limit of the hoppings: a quarter of the support width.
    pub asym_kappa: f64,
    /// Convex hull of the density support the coefficients derive from.
    pub source_domain: Interval,
}

impl ChainCoefficients {
    pub fn n_sites(&self) -> usize {
        self.omega.len()
    }

    /// Maximum distance of the coefficients at site `n` from their
    /// asymptotic values (the hopping is the one leaving site `n`).
    pub fn deviation(&self, n: usize) -> f64 {
        let d_omega = (self.omega[n] - self.asym_omega).abs();
        let d_kappa = if n < self.kappa.len() {
            (self.kappa[n] - self.asym_kappa).abs()
        } else {
            0.0
        };
        d_omega.max(d_kappa)
    }
}

/// Asymptotic chain coefficients for a density supported on `domain`:
/// the site energies approach the midpoint and the hoppings a quarter of
/// the width.
pub fn asymptotics(domain: Interval) -> (f64, f64) {
    let (lo, hi) = (domain.lo, domain.hi);
    ((hi + lo) / 2.0, (hi - lo) / 4.0)
}

/// Semicircle density equivalent to the uniform chain tail with site
/// energy `asym_omega` and hopping `asym_kappa`: supported on
/// [omega - 2k, omega + 2k] with integral k^2.
pub fn residual_semicircle(asym_omega: f64, asym_kappa: f64) -> Result<SpectralDensity> {
    if !(asym_kappa > 0.0) {
        return Err(Error::InvalidInput(format!(
            "asymptotic hopping must be positive, got {asym_kappa}"
        )));
    }
    let lo = asym_omega - 2.0 * asym_kappa;
    let hi = asym_omega + 2.0 * asym_kappa;
    SpectralDensity::semicircle(
        1.0 / (2.0 * std::f64::consts::PI),
        Interval::new(lo, hi)?,
    )
}

/// Recurrence coefficients of the polynomials orthogonal with respect to
/// J(w) dw, computed by discretizing the measure and tridiagonalizing the
/// diagonal node matrix by Lanczos with full reorthogonalization.
///
/// `quadrature_nodes` is the total number of measure nodes, split over the
/// smooth cells of the support; it must be at least `50 * n_sites`.
pub fn chain_coefficients(
    j: &SpectralDensity,
    n_sites: usize,
    quadrature_nodes: usize,
) -> Result<ChainCoefficients> {
    if n_sites < 1 {
        return Err(Error::InvalidInput("n_sites must be at least 1".into()));
    }
    if quadrature_nodes < 50 * n_sites {
        return Err(Error::InvalidInput(format!(
            "need at least 50 nodes per site: {quadrature_nodes} < {}",
            50 * n_sites
        )));
    }
    let hull = j
        .hull()
        .ok_or_else(|| Error::InvalidInput("density has empty support".into()))?;
    let (nodes, weights) = discretize_measure(j, quadrature_nodes);
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numerical(format!(
            "measure discretization returned non-positive mass {total}"
        )));
    }
    let (omega, kappa) = lanczos_tridiagonal(&nodes, &weights, n_sites)?;
    let (asym_omega, asym_kappa) = asymptotics(hull);
    Ok(ChainCoefficients {
        eta: total.sqrt(),
        omega,
        kappa,
        asym_omega,
        asym_kappa,
        source_domain: hull,
    })
}

/// Smallest depth N such that every computed coefficient past it lies
/// within `epsilon` of its asymptotic value.
pub fn truncation_index(coeffs: &ChainCoefficients, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let n = coeffs.n_sites();
    let mut tail = n;
    for k in (0..n).rev() {
        if coeffs.deviation(k) < epsilon {
            tail = k;
        } else {
            break;
        }
    }
    if tail == n {
        return Err(Error::NotConverged);
    }
    Ok(tail.saturating_sub(1))
}

/// Discretize the measure J(w) dw into nodes and positive weights, cell by
/// cell over the smooth pieces of the support. Within each cell the
/// substitution w = m - h cos(theta) absorbs square-root behavior at the
/// cell edges, so Gauss-Legendre in theta converges fast for band-edge
/// densities.
fn discretize_measure(j: &SpectralDensity, total_nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let cells = j.smooth_cells();
    let total_width: f64 = cells.iter().map(|c| c.width()).sum();
    let mut nodes = Vec::with_capacity(total_nodes);
    let mut weights = Vec::with_capacity(total_nodes);
    let min_per_cell = 32usize;
    for cell in &cells {
        let share = if total_width > 0.0 {
            (total_nodes as f64 * cell.width() / total_width).round() as usize
        } else {
            0
        };
        let n_cell = share.max(min_per_cell);
        let m = 0.5 * (cell.lo + cell.hi);
        let h = 0.5 * cell.width();
        let (theta, gl_w) = gauss_legendre(n_cell);
        for (t, gw) in theta.iter().zip(&gl_w) {
            // map (-1,1) -> theta in (0,pi); dw = h sin(theta) dtheta
            let th = 0.5 * std::f64::consts::PI * (t + 1.0);
            let w = m - h * th.cos();
            let jac = h * th.sin() * 0.5 * std::f64::consts::PI;
            let weight = gw * jac * j.eval(w);
            if weight > 0.0 {
                nodes.push(w);
                weights.push(weight);
            }
        }
    }
    (nodes, weights)
}

/// Lanczos tridiagonalization of diag(nodes) started from the square-root
/// weight vector, with full reorthogonalization at every step. Returns the
/// diagonal (site energies) and off-diagonal (hoppings) entries.
fn lanczos_tridiagonal(
    nodes: &[f64],
    weights: &[f64],
    n_sites: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = nodes.len();
    if n_sites > m {
        return Err(Error::DepthExceeded {
            requested: n_sites,
            stable: m,
        });
    }
    let norm0: f64 = weights.iter().sum::<f64>().sqrt();
    let mut v: Vec<f64> = weights.iter().map(|w| w.sqrt() / norm0).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n_sites);
    let mut omega = Vec::with_capacity(n_sites);
    let mut kappa = Vec::with_capacity(n_sites.saturating_sub(1));
    let scale = nodes.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);

    for k in 0..n_sites {
        basis.push(v.clone());
        // u = D v
        let mut u: Vec<f64> = nodes.iter().zip(&v).map(|(x, vi)| x * vi).collect();
        let alpha: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        omega.push(alpha);
        if k + 1 == n_sites {
            break;
        }
        // full reorthogonalization, twice for stability
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = u.iter().zip(q).map(|(a, b)| a * b).sum();
                for (ui, qi) in u.iter_mut().zip(q) {
                    *ui -= c * qi;
                }
            }
        }
        let beta: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if beta <= 1e-13 * scale {
            return Err(Error::DepthExceeded {
                requested: n_sites,
                stable: k + 1,
            });
        }
        kappa.push(beta);
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi = ui / beta;
        }
    }
    Ok((omega, kappa))
}

// ---------------------------------------------------------------------------
// CSV I/O

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Write the coefficients as CSV `n,omega,kappa` (kappa on row n couples
/// sites n and n+1; blank on the last row) with a metadata comment line.
pub fn save_chain_coefficients(c: &ChainCoefficients, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "# eta = {}, asym_omega = {}, asym_kappa = {}, domain_lo = {}, domain_hi = {}\n",
        fmt_f64(c.eta),
        fmt_f64(c.asym_omega),
        fmt_f64(c.asym_kappa),
        fmt_f64(c.source_domain.lo),
        fmt_f64(c.source_domain.hi),
    ));
    out.push_str("n,omega,kappa\n");
    for n in 0..c.n_sites() {
        let kap = if n < c.kappa.len() {
            fmt_f64(c.kappa[n])
        } else {
            String::new()
        };
        out.push_str(&format!("{n},{},{kap}\n", fmt_f64(c.omega[n])));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Read coefficients written by [`save_chain_coefficients`].
pub fn load_chain_coefficients(path: &Path) -> Result<ChainCoefficients> {
    let text = std::fs::read_to_string(path)?;
    let bad = |reason: &str| Error::MalformedFile {
        path: path.display().to_string(),
        reason: reason.into(),
    };
    let mut lines = text.lines();
    let meta = lines.next().ok_or_else(|| bad("empty file"))?;
    let meta = meta
        .strip_prefix("# ")
        .ok_or_else(|| bad("missing metadata comment"))?;
    let mut eta = None;
    let mut asym_omega = None;
    let mut asym_kappa = None;
    let mut lo = None;
    let mut hi = None;
    for part in meta.split(", ") {
        let (key, value) = part
            .split_once(" = ")
            .ok_or_else(|| bad("malformed metadata entry"))?;
        let v: f64 = value
            .parse()
            .map_err(|_| bad("unparseable metadata value"))?;
        match key {
            "eta" => eta = Some(v),
            "asym_omega" => asym_omega = Some(v),
            "asym_kappa" => asym_kappa = Some(v),
            "domain_lo" => lo = Some(v),
            "domain_hi" => hi = Some(v),
            _ => return Err(bad("unknown metadata key")),
        }
    }
    let header = lines.next().ok_or_else(|| bad("missing header"))?;
    if header != "n,omega,kappa" {
        return Err(bad("unexpected header"));
    }
    let mut omega = Vec::new();
    let mut kappa = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad("expected 3 columns"));
        }
        let n: usize = fields[0].parse().map_err(|_| bad("bad site index"))?;
        if n != row {
            return Err(bad("non-contiguous site indices"));
        }
        omega.push(fields[1].parse().map_err(|_| bad("bad omega value"))?);
        if !fields[2].is_empty() {
            kappa.push(fields[2].parse().map_err(|_| bad("bad kappa value"))?);
        }
    }
    if omega.is_empty() {
        return Err(bad("no coefficient rows"));
    }
    if kappa.len() != omega.len() - 1 {
        return Err(bad("kappa count must be one less than omega count"));
    }
    Ok(ChainCoefficients {
        eta: eta.ok_or_else(|| bad("missing eta"))?,
        omega,
        kappa,
        asym_omega: asym_omega.ok_or_else(|| bad("missing asym_omega"))?,
        asym_kappa: asym_kappa.ok_or_else(|| bad("missing asym_kappa"))?,
        source_domain: Interval::new(
            lo.ok_or_else(|| bad("missing domain_lo"))?,
            hi.ok_or_else(|| bad("missing domain_hi"))?,
        )?,
    })
}
