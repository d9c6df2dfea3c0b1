//! A charged particle on a flux-threaded ring: exact spectra, their numerical
//! cross-checks, and flux sweeps.
//!
//! The reference route works in the angular-momentum basis, where a constant
//! flux term is exactly diagonal: level `n` has energy
//! `hbar^2 / (2 m R^2) * (n - alpha)^2`. The independent cross-check is a
//! nearest-neighbor Peierls chain whose `O(dtheta^2)` dispersion error is
//! itself an assertion target.
//!
//! Flux convention on the ring: `alpha = q Phi / (2 pi hbar)`, with `c`
//! absorbed into the flux. The 2D lattice modules keep `c` explicit; the two
//! conventions are deliberately not reconciled.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::ops::RangeInclusive;
use std::sync::Arc;

use crate::constants::PhysicalConstants;
use crate::format::fmt17;
use crate::grid::RingGrid;
use crate::state::RingState;
use crate::{Error, Result};

/// Magnetic flux through the ring together with its dimensionless reduced
/// form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxConfig {
    flux: f64,
    alpha: f64,
}

impl FluxConfig {
    /// Build from the flux `Phi`; `alpha = q Phi / (2 pi hbar)`.
    pub fn from_flux(flux: f64, consts: &PhysicalConstants) -> Result<Self> {
        if !flux.is_finite() {
            return Err(Error::invalid("flux", "must be finite"));
        }
        let alpha = consts.charge * flux / (2.0 * std::f64::consts::PI * consts.hbar);
        Ok(FluxConfig { flux, alpha })
    }

    /// Build from the reduced flux directly.
    pub fn from_alpha(alpha: f64, consts: &PhysicalConstants) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be finite"));
        }
        let flux = 2.0 * std::f64::consts::PI * consts.hbar * alpha / consts.charge;
        Ok(FluxConfig { flux, alpha })
    }

    pub fn flux(&self) -> f64 {
        self.flux
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Consistency of the two stored forms, to 1e-14 relative.
    pub fn validate(&self, consts: &PhysicalConstants) -> Result<()> {
        let alpha = consts.charge * self.flux / (2.0 * std::f64::consts::PI * consts.hbar);
        let scale = self.alpha.abs().max(1.0);
        if (alpha - self.alpha).abs() > 1e-14 * scale {
            return Err(Error::invalid(
                "alpha",
                format!("inconsistent with flux: {} vs {}", self.alpha, alpha),
            ));
        }
        Ok(())
    }
}

/// One energy level with its angular-momentum quantum number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingLevel {
    pub n: i64,
    pub energy: f64,
}

/// Levels sorted by energy (ties: smaller `|n|` first, then `+n` before `-n`),
/// optionally with grid eigenfunctions.
#[derive(Debug, Clone)]
pub struct RingSpectrum {
    pub levels: Vec<RingLevel>,
    pub eigenfunctions: Option<Vec<RingState>>,
}

impl RingSpectrum {
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }
}

fn level_order(a: &RingLevel, b: &RingLevel) -> std::cmp::Ordering {
    a.energy
        .total_cmp(&b.energy)
        .then(a.n.abs().cmp(&b.n.abs()))
        .then(b.n.cmp(&a.n))
}

fn sort_levels(levels: &mut [RingLevel]) {
    levels.sort_by(level_order);
}

/// Discretization route for [`numerical_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    /// Diagonal in the angular-momentum basis; the reference route.
    Spectral,
    /// Nearest-neighbor chain with Peierls link phases; the cross-check route
    /// with `O(dtheta^2)` dispersion error.
    PeierlsFd,
}

/// Exact spectrum `e_n = hbar^2/(2 m R^2) (n - alpha)^2` over a range of
/// quantum numbers.
pub fn analytic_spectrum(
    consts: &PhysicalConstants,
    radius: f64,
    flux: &FluxConfig,
    n_range: RangeInclusive<i64>,
) -> Result<RingSpectrum> {
    if n_range.is_empty() {
        return Err(Error::invalid("n_range", "empty quantum-number range"));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
    }
    let prefactor = consts.hbar * consts.hbar / (2.0 * consts.mass * radius * radius);
    let alpha = flux.alpha();
    let mut levels: Vec<RingLevel> = n_range
        .map(|n| {
            let d = n as f64 - alpha;
            RingLevel {
                n,
                energy: prefactor * d * d,
            }
        })
        .collect();
    sort_levels(&mut levels);
    Ok(RingSpectrum {
        levels,
        eigenfunctions: None,
    })
}

/// The nearest-neighbor ring chain with a constant Peierls phase.
///
/// Hopping magnitude is `hbar^2 / (2 m R^2 dtheta^2)` and the forward hop
/// carries `exp(-i alpha dtheta)`, so plane waves `exp(i n theta)` are exact
/// eigenvectors with eigenvalue `2 t (1 - cos((n - alpha) dtheta))`.
#[derive(Debug, Clone)]
pub struct ChainHamiltonian {
    grid: Arc<RingGrid>,
    hopping: f64,
    forward_phase: f64,
}

impl ChainHamiltonian {
    pub fn new(consts: &PhysicalConstants, grid: Arc<RingGrid>, flux: &FluxConfig) -> Self {
        let dtheta = grid.delta_theta();
        let r = grid.radius();
        let hopping =
            consts.hbar * consts.hbar / (2.0 * consts.mass * r * r * dtheta * dtheta);
        ChainHamiltonian {
            grid,
            hopping,
            forward_phase: -flux.alpha() * dtheta,
        }
    }

    pub fn grid(&self) -> &Arc<RingGrid> {
        &self.grid
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    /// `out = H psi`.
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let n = self.grid.len();
        debug_assert_eq!(psi.len(), n);
        debug_assert_eq!(out.len(), n);
        let t = self.hopping;
        let hop = Complex64::from_polar(t, self.forward_phase);
        for j in 0..n {
            let next = if j + 1 == n { 0 } else { j + 1 };
            let prev = if j == 0 { n - 1 } else { j - 1 };
            out[j] = 2.0 * t * psi[j] - hop * psi[next] - hop.conj() * psi[prev];
        }
    }

    /// Diagonal of the chain, used by iterative-solver preconditioning.
    pub fn diagonal(&self) -> Vec<f64> {
        vec![2.0 * self.hopping; self.grid.len()]
    }

    /// Dense matrix form, used by the eigenvalue cross-check.
    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let n = self.grid.len();
        let t = self.hopping;
        let hop = Complex64::from_polar(t, self.forward_phase);
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for j in 0..n {
            let next = if j + 1 == n { 0 } else { j + 1 };
            m[(j, j)] = Complex64::new(2.0 * t, 0.0);
            // Row j, column next: coefficient of psi[next] in (H psi)[j].
            m[(j, next)] -= hop;
            m[(next, j)] -= hop.conj();
        }
        m
    }
}

/// Spectrum of the discretized ring Hamiltonian; `k` lowest levels.
pub fn numerical_spectrum(
    consts: &PhysicalConstants,
    grid: &Arc<RingGrid>,
    flux: &FluxConfig,
    method: SpectrumMethod,
    k: usize,
) -> Result<RingSpectrum> {
    let n_points = grid.len();
    if k > n_points {
        return Err(Error::GridMismatch(format!(
            "requested {k} levels from a {n_points}-point grid"
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k", "must request at least one level"));
    }

    // Either route labels levels by the momentum numbers the grid supports;
    // the orderings agree because 1 - cos is monotone on [0, pi].
    let prefactor =
        consts.hbar * consts.hbar / (2.0 * consts.mass * grid.radius() * grid.radius());
    let alpha = flux.alpha();
    let mut labels: Vec<RingLevel> = grid
        .momentum_numbers()
        .map(|n| {
            let d = n as f64 - alpha;
            RingLevel {
                n,
                energy: prefactor * d * d,
            }
        })
        .collect();
    sort_levels(&mut labels);
    labels.truncate(k);

    match method {
        SpectrumMethod::Spectral => {
            let eigenfunctions = labels
                .iter()
                .map(|l| RingState::momentum_eigenstate(grid.clone(), l.n))
                .collect();
            Ok(RingSpectrum {
                levels: labels,
                eigenfunctions: Some(eigenfunctions),
            })
        }
        SpectrumMethod::PeierlsFd => {
            let chain = ChainHamiltonian::new(consts, grid.clone(), flux);
            let eig = nalgebra::linalg::SymmetricEigen::new(chain.to_matrix());
            let mut order: Vec<usize> = (0..n_points).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            order.truncate(k);

            let measure_root = grid.measure().sqrt();
            let mut levels = Vec::with_capacity(k);
            let mut eigenfunctions = Vec::with_capacity(k);
            for (slot, &idx) in order.iter().enumerate() {
                levels.push(RingLevel {
                    n: labels[slot].n,
                    energy: eig.eigenvalues[idx],
                });
                let column = eig.eigenvectors.column(idx);
                let amplitudes: Vec<Complex64> =
                    column.iter().map(|v| v / measure_root).collect();
                eigenfunctions.push(RingState::new(grid.clone(), amplitudes, 0.0)?);
            }
            Ok(RingSpectrum {
                levels,
                eigenfunctions: Some(eigenfunctions),
            })
        }
    }
}

/// One row of a flux sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub n: i64,
    pub energy: f64,
}

/// Analytic levels tabulated over a set of reduced fluxes, sorted by
/// `(alpha, energy)`.
pub fn spectrum_flux_sweep(
    consts: &PhysicalConstants,
    radius: f64,
    alphas: &[f64],
    n_range: RangeInclusive<i64>,
) -> Result<Vec<SweepRow>> {
    for &a in alphas {
        if !a.is_finite() {
            return Err(Error::invalid("alphas", format!("non-finite entry {a}")));
        }
    }
    let mut sorted_alphas = alphas.to_vec();
    sorted_alphas.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    for alpha in sorted_alphas {
        let flux = FluxConfig::from_alpha(alpha, consts)?;
        let spectrum = analytic_spectrum(consts, radius, &flux, n_range.clone())?;
        rows.extend(spectrum.levels.iter().map(|l| SweepRow {
            alpha,
            n: l.n,
            energy: l.energy,
        }));
    }
    Ok(rows)
}

/// CSV form of a sweep: header `alpha,n,energy`, 17 significant digits, LF
/// line endings.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,n,energy\n");
    for row in rows {
        out.push_str(&fmt17(row.alpha));
        out.push(',');
        out.push_str(&row.n.to_string());
        out.push(',');
        out.push_str(&fmt17(row.energy));
        out.push('\n');
    }
    out
}
