//! Passive phase-convention changes and their classification.
//!
//! A gauge function multiplies states by `exp(i Lambda)` pointwise and shifts
//! potentials by gradients. On the ring, `Lambda` is stored as a smooth
//! single-valued part plus an integer winding, which keeps `w != 0`
//! ("large") transformations free of branch-cut bookkeeping. On the lattice,
//! potentials remember the exact accumulated phase offset of every
//! transformation applied to them, so the induced change of link phases is
//! the exact discrete difference `-(Lambda(end) - Lambda(start))` and joint
//! gauge covariance holds at machine precision rather than at discretization
//! order.

use ndarray::Array2;
use num_complex::Complex64;
use std::sync::Arc;

use crate::constants::PhysicalConstants;
use crate::fft;
use crate::grid::{Boundary, Lattice2D, RingGrid};
use crate::lattice;
use crate::state::{RingState, Wavefunction2D};
use crate::{Error, Result};

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y - two_pi
    } else {
        y
    }
}

/// Phase convention `Lambda(theta) = winding * theta + smooth(theta)` on a
/// ring.
///
/// `exp(i Lambda)` is single-valued for any integer winding; `Lambda` itself
/// is single-valued only for winding 0. Integer windings are accepted as
/// representation changes and reported, not rejected.
#[derive(Debug, Clone)]
pub struct RingGauge {
    grid: Arc<RingGrid>,
    smooth: Vec<f64>,
    winding: i64,
}

impl RingGauge {
    /// Single-valued convention from a smooth periodic function of `theta`.
    pub fn from_fn(grid: Arc<RingGrid>, f: impl Fn(f64) -> f64) -> Self {
        Self::with_winding(grid, 0, f)
    }

    /// `Lambda(theta) = winding * theta + f(theta)` with `f` smooth periodic.
    pub fn with_winding(grid: Arc<RingGrid>, winding: i64, f: impl Fn(f64) -> f64) -> Self {
        let smooth = grid.thetas().iter().map(|&t| f(t)).collect();
        RingGauge {
            grid,
            smooth,
            winding,
        }
    }

    pub fn grid(&self) -> &Arc<RingGrid> {
        &self.grid
    }

    pub fn winding(&self) -> i64 {
        self.winding
    }

    /// Value of `Lambda` at grid point `k`.
    pub fn lambda_at(&self, k: usize) -> f64 {
        self.winding as f64 * self.grid.theta(k) + self.smooth[k]
    }

    /// `psi -> exp(i Lambda) psi`; densities are untouched pointwise.
    pub fn apply(&self, state: &RingState) -> Result<RingState> {
        if state.grid().len() != self.grid.len()
            || (!Arc::ptr_eq(state.grid(), &self.grid) && **state.grid() != *self.grid)
        {
            return Err(Error::GridMismatch(
                "gauge function and state live on different rings".into(),
            ));
        }
        let amplitudes = state
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(k, &a)| a * Complex64::from_polar(1.0, self.lambda_at(k)))
            .collect();
        RingState::new(state.grid().clone(), amplitudes, state.time())
    }

    pub fn inverse(&self) -> Self {
        RingGauge {
            grid: self.grid.clone(),
            smooth: self.smooth.iter().map(|v| -v).collect(),
            winding: -self.winding,
        }
    }

    /// The induced connection `omega = -hbar dLambda/dtheta`, via spectral
    /// differentiation of the smooth part.
    pub fn connection(&self, consts: &PhysicalConstants) -> Connection1D {
        let derivative = fft::periodic_derivative(&self.smooth, 2.0 * std::f64::consts::PI);
        let omega = derivative
            .iter()
            .map(|d| -consts.hbar * (self.winding as f64 + d))
            .collect();
        Connection1D {
            grid: self.grid.clone(),
            omega,
        }
    }
}

/// A connection on the ring: `omega(theta)`, pure gauge when it comes from a
/// phase convention, arbitrary when it stands for a physical field.
#[derive(Debug, Clone)]
pub struct Connection1D {
    grid: Arc<RingGrid>,
    omega: Vec<f64>,
}

/// Winding classification of a ring connection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingReport {
    pub winding: i64,
    /// Raw circulation `contour integral of omega dtheta`.
    pub circulation: f64,
    /// Angular distance (radians) from the circulation to the nearest
    /// integer multiple of `2 pi hbar`.
    pub residual: f64,
}

impl Connection1D {
    pub fn new(grid: Arc<RingGrid>, omega: Vec<f64>) -> Result<Self> {
        if omega.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} connection samples on a {}-point ring",
                omega.len(),
                grid.len()
            )));
        }
        Ok(Connection1D { grid, omega })
    }

    pub fn constant(grid: Arc<RingGrid>, value: f64) -> Self {
        let omega = vec![value; grid.len()];
        Connection1D { grid, omega }
    }

    pub fn grid(&self) -> &Arc<RingGrid> {
        &self.grid
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// `contour integral omega dtheta`; on the uniform periodic grid the
    /// trapezoid rule reduces to a plain rectangle sum.
    pub fn circulation(&self) -> f64 {
        self.omega.iter().sum::<f64>() * self.grid.delta_theta()
    }

    /// Round the circulation to an integer winding.
    ///
    /// Single-valued conventions have zero circulation; winding `w` marks a
    /// large transformation. A circulation farther than 0.05 rad from every
    /// integer holonomy is not a basis change at all (a physical flux is the
    /// usual culprit) and is reported as an error.
    pub fn winding_number(&self, consts: &PhysicalConstants) -> Result<WindingReport> {
        let circulation = self.circulation();
        let unit = 2.0 * std::f64::consts::PI * consts.hbar;
        let ratio = -circulation / unit;
        let winding = ratio.round();
        let residual = (ratio - winding).abs() * 2.0 * std::f64::consts::PI;
        if residual > 0.05 {
            return Err(Error::NotAWinding {
                circulation,
                residual,
            });
        }
        Ok(WindingReport {
            winding: winding as i64,
            circulation,
            residual,
        })
    }
}

/// Phase convention on a lattice, optionally time dependent through its time
/// derivative on the represented slice.
#[derive(Debug, Clone)]
pub struct LatticeGauge {
    grid: Arc<Lattice2D>,
    lambda: Array2<f64>,
    lambda_dot: Option<Array2<f64>>,
}

impl LatticeGauge {
    pub fn from_fn(grid: Arc<Lattice2D>, f: impl Fn(f64, f64) -> f64) -> Self {
        let lambda =
            Array2::from_shape_fn((grid.nx(), grid.ny()), |(i, j)| f(grid.x(i), grid.y(j)));
        LatticeGauge {
            grid,
            lambda,
            lambda_dot: None,
        }
    }

    pub fn from_values(grid: Arc<Lattice2D>, lambda: Array2<f64>) -> Result<Self> {
        if lambda.dim() != (grid.nx(), grid.ny()) {
            return Err(Error::GridMismatch(format!(
                "lambda shape {:?} on a {}x{} lattice",
                lambda.dim(),
                grid.nx(),
                grid.ny()
            )));
        }
        Ok(LatticeGauge {
            grid,
            lambda,
            lambda_dot: None,
        })
    }

    /// Attach `dLambda/dt` on this time slice (enters the scalar-potential
    /// transform).
    pub fn with_time_derivative(mut self, lambda_dot: Array2<f64>) -> Result<Self> {
        if lambda_dot.dim() != (self.grid.nx(), self.grid.ny()) {
            return Err(Error::GridMismatch("lambda_dot shape mismatch".into()));
        }
        self.lambda_dot = Some(lambda_dot);
        Ok(self)
    }

    pub fn grid(&self) -> &Arc<Lattice2D> {
        &self.grid
    }

    pub fn lambda(&self) -> &Array2<f64> {
        &self.lambda
    }

    pub fn inverse(&self) -> Self {
        LatticeGauge {
            grid: self.grid.clone(),
            lambda: self.lambda.mapv(|v| -v),
            lambda_dot: self.lambda_dot.as_ref().map(|d| d.mapv(|v| -v)),
        }
    }

    /// `psi -> exp(i Lambda) psi` pointwise; masked points stay exactly zero.
    pub fn apply(&self, state: &Wavefunction2D) -> Result<Wavefunction2D> {
        if state.grid().nx() != self.grid.nx()
            || state.grid().ny() != self.grid.ny()
            || (!Arc::ptr_eq(state.grid(), &self.grid) && **state.grid() != *self.grid)
        {
            return Err(Error::GridMismatch(
                "gauge function and state live on different lattices".into(),
            ));
        }
        let mut amplitudes = state.amplitudes().clone();
        for ((i, j), a) in amplitudes.indexed_iter_mut() {
            *a *= Complex64::from_polar(1.0, self.lambda[(i, j)]);
        }
        Wavefunction2D::new(state.grid().clone(), amplitudes, state.time())
    }

    /// Transform a background potential: `A -> A - (hbar c / q) grad Lambda`,
    /// `V -> V + (hbar / q) dLambda/dt`.
    ///
    /// Besides the continuum grids the result carries the exact accumulated
    /// phase offset, so link phases built from it are shifted by the exact
    /// discrete difference of `Lambda`.
    pub fn apply_to_potential(
        &self,
        p: &GaugePotential,
        consts: &PhysicalConstants,
    ) -> Result<GaugePotential> {
        if !Arc::ptr_eq(&self.grid, p.grid()) && **p.grid() != *self.grid {
            return Err(Error::GridMismatch(
                "gauge function and potential live on different lattices".into(),
            ));
        }
        let scale = consts.hbar * consts.light_speed / consts.charge;
        let (gx, gy) = gradient(&self.grid, &self.lambda);
        let a_x = &p.a_x - &gx.mapv(|v| v * scale);
        let a_y = &p.a_y - &gy.mapv(|v| v * scale);
        let v = match &self.lambda_dot {
            Some(dot) => &p.v + &dot.mapv(|d| d * consts.hbar / consts.charge),
            None => p.v.clone(),
        };
        Ok(GaugePotential {
            grid: p.grid().clone(),
            kind: p.kind.clone(),
            base_a_x: p.base_a_x.clone(),
            base_a_y: p.base_a_y.clone(),
            a_x,
            a_y,
            v,
            lambda_offset: &p.lambda_offset + &self.lambda,
        })
    }

    /// The induced pure-gauge background `A_i = -(hbar c / q) dLambda/dx_i`,
    /// tagged as such so downstream link phases stay discretely exact.
    pub fn connection(&self, consts: &PhysicalConstants) -> Result<GaugePotential> {
        GaugePotential::pure_gauge(self.grid.clone(), self.lambda.clone(), consts)
    }
}

/// Centered differences in the interior, one-sided at Dirichlet edges,
/// wrapped on a torus.
fn gradient(grid: &Lattice2D, field: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let a = grid.spacing();
    let periodic = grid.boundary() == Boundary::Periodic;
    let mut gx = Array2::zeros((nx, ny));
    let mut gy = Array2::zeros((nx, ny));
    for i in 0..nx {
        for j in 0..ny {
            gx[(i, j)] = if periodic {
                (field[((i + 1) % nx, j)] - field[((i + nx - 1) % nx, j)]) / (2.0 * a)
            } else if i == 0 {
                (field[(1, j)] - field[(0, j)]) / a
            } else if i == nx - 1 {
                (field[(nx - 1, j)] - field[(nx - 2, j)]) / a
            } else {
                (field[(i + 1, j)] - field[(i - 1, j)]) / (2.0 * a)
            };
            gy[(i, j)] = if periodic {
                (field[(i, (j + 1) % ny)] - field[(i, (j + ny - 1) % ny)]) / (2.0 * a)
            } else if j == 0 {
                (field[(i, 1)] - field[(i, 0)]) / a
            } else if j == ny - 1 {
                (field[(i, ny - 1)] - field[(i, ny - 2)]) / a
            } else {
                (field[(i, j + 1)] - field[(i, j - 1)]) / (2.0 * a)
            };
        }
    }
    (gx, gy)
}

/// Provenance tag of a background potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    PureGauge,
    Solenoid,
    UniformB,
    Custom,
}

#[derive(Debug, Clone)]
pub(crate) enum FieldKind {
    /// Generated by a phase convention; carries the generator so link phases
    /// telescope exactly.
    PureGauge { lambda: Array2<f64> },
    /// Ideal flux line: `A = (hbar c / q) alpha grad(polar angle)` around
    /// `center`, singular only there.
    Solenoid { center: [f64; 2], alpha: f64 },
    /// Uniform perpendicular field in Landau gauge `A = (-B y, 0)`.
    UniformB { b: f64 },
    Custom,
}

/// Prescribed background `(A, V)` over a lattice.
///
/// The vector potential is stored on grid points for continuum-facing
/// arithmetic; link-phase assembly prefers exact per-kind rules (polar-angle
/// differences for the solenoid, exact line integrals for the Landau gauge,
/// discrete differences for pure gauges) over midpoint quadrature.
///
/// Passive transformations keep the physical part (`kind` plus the base `A`
/// grids) untouched and accumulate their generators in `lambda_offset`; the
/// public `a_x`/`a_y` grids show the transformed potential.
#[derive(Debug, Clone)]
pub struct GaugePotential {
    grid: Arc<Lattice2D>,
    pub(crate) kind: FieldKind,
    /// Physical vector potential, invariant under passive transformations.
    pub(crate) base_a_x: Array2<f64>,
    pub(crate) base_a_y: Array2<f64>,
    /// Transformed grids per the joint-transformation law.
    pub(crate) a_x: Array2<f64>,
    pub(crate) a_y: Array2<f64>,
    pub(crate) v: Array2<f64>,
    /// Exact sum of all `Lambda`s applied via `apply_to_potential`.
    pub(crate) lambda_offset: Array2<f64>,
}

impl GaugePotential {
    fn base(grid: Arc<Lattice2D>, kind: FieldKind) -> Self {
        let shape = (grid.nx(), grid.ny());
        GaugePotential {
            grid,
            kind,
            base_a_x: Array2::zeros(shape),
            base_a_y: Array2::zeros(shape),
            a_x: Array2::zeros(shape),
            a_y: Array2::zeros(shape),
            v: Array2::zeros(shape),
            lambda_offset: Array2::zeros(shape),
        }
    }

    fn sync_base(&mut self) {
        self.base_a_x = self.a_x.clone();
        self.base_a_y = self.a_y.clone();
    }

    /// `A = 0`, `V = 0`.
    pub fn zero(grid: Arc<Lattice2D>) -> Self {
        Self::base(grid, FieldKind::Custom)
    }

    /// Ideal shielded flux line with reduced flux
    /// `alpha = q Phi / (2 pi hbar c)`.
    ///
    /// The singular center must sit inside the masked region; placing it on
    /// an unmasked point is an error.
    pub fn solenoid(
        grid: Arc<Lattice2D>,
        center: [f64; 2],
        alpha: f64,
        consts: &PhysicalConstants,
    ) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be finite"));
        }
        // Shielding check on the nearest grid point, when it exists.
        let fi = (center[0] - grid.origin()[0]) / grid.spacing();
        let fj = (center[1] - grid.origin()[1]) / grid.spacing();
        let (ri, rj) = (fi.round(), fj.round());
        if ri >= 0.0 && rj >= 0.0 && (ri as usize) < grid.nx() && (rj as usize) < grid.ny() {
            if grid.is_interior(ri as usize, rj as usize) {
                return Err(Error::Singularity {
                    x: center[0],
                    y: center[1],
                });
            }
        }
        let scale = consts.hbar * consts.light_speed * alpha / consts.charge;
        let mut p = Self::base(grid.clone(), FieldKind::Solenoid { center, alpha });
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let dx = grid.x(i) - center[0];
                let dy = grid.y(j) - center[1];
                let r2 = dx * dx + dy * dy;
                if r2 > 0.0 {
                    p.a_x[(i, j)] = -scale * dy / r2;
                    p.a_y[(i, j)] = scale * dx / r2;
                }
            }
        }
        p.sync_base();
        Ok(p)
    }

    /// Uniform field `B` in Landau gauge `A = (-B y, 0)`.
    pub fn uniform_b(grid: Arc<Lattice2D>, b: f64) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::invalid("b", "must be finite"));
        }
        let mut p = Self::base(grid.clone(), FieldKind::UniformB { b });
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                p.a_x[(i, j)] = -b * grid.y(j);
            }
        }
        p.sync_base();
        Ok(p)
    }

    /// Pure-gauge background generated by `lambda`:
    /// `A = -(hbar c / q) grad lambda`.
    pub fn pure_gauge(
        grid: Arc<Lattice2D>,
        lambda: Array2<f64>,
        consts: &PhysicalConstants,
    ) -> Result<Self> {
        if lambda.dim() != (grid.nx(), grid.ny()) {
            return Err(Error::GridMismatch("lambda shape mismatch".into()));
        }
        let scale = consts.hbar * consts.light_speed / consts.charge;
        let (gx, gy) = gradient(&grid, &lambda);
        let mut p = Self::base(grid, FieldKind::PureGauge { lambda });
        p.a_x = gx.mapv(|v| -v * scale);
        p.a_y = gy.mapv(|v| -v * scale);
        p.sync_base();
        Ok(p)
    }

    /// Arbitrary grids; link phases use the midpoint rule.
    pub fn custom(
        grid: Arc<Lattice2D>,
        a_x: Array2<f64>,
        a_y: Array2<f64>,
        v: Array2<f64>,
    ) -> Result<Self> {
        let shape = (grid.nx(), grid.ny());
        if a_x.dim() != shape || a_y.dim() != shape || v.dim() != shape {
            return Err(Error::GridMismatch("potential grid shape mismatch".into()));
        }
        let mut p = Self::base(grid, FieldKind::Custom);
        p.a_x = a_x;
        p.a_y = a_y;
        p.v = v;
        p.sync_base();
        Ok(p)
    }

    /// Replace the scalar potential, keeping the vector part.
    pub fn with_scalar_potential(mut self, v: Array2<f64>) -> Result<Self> {
        if v.dim() != (self.grid.nx(), self.grid.ny()) {
            return Err(Error::GridMismatch("scalar potential shape mismatch".into()));
        }
        self.v = v;
        Ok(self)
    }

    pub fn grid(&self) -> &Arc<Lattice2D> {
        &self.grid
    }

    pub fn provenance(&self) -> Provenance {
        match self.kind {
            FieldKind::PureGauge { .. } => Provenance::PureGauge,
            FieldKind::Solenoid { .. } => Provenance::Solenoid,
            FieldKind::UniformB { .. } => Provenance::UniformB,
            FieldKind::Custom => Provenance::Custom,
        }
    }

    pub fn a_x(&self) -> &Array2<f64> {
        &self.a_x
    }

    pub fn a_y(&self) -> &Array2<f64> {
        &self.a_y
    }

    pub fn v(&self) -> &Array2<f64> {
        &self.v
    }

    /// Finiteness on unmasked points.
    pub fn validate(&self) -> Result<()> {
        for ((i, j), &m) in self.grid.mask().indexed_iter() {
            if m
                && !(self.a_x[(i, j)].is_finite()
                    && self.a_y[(i, j)].is_finite()
                    && self.v[(i, j)].is_finite())
            {
                return Err(Error::invalid(
                    "potential",
                    format!("non-finite value on unmasked point ({i}, {j})"),
                ));
            }
        }
        Ok(())
    }
}

/// Outcome of the flat-connection test.
#[derive(Debug, Clone)]
pub struct FlatnessReport {
    pub flat: bool,
    /// Largest elementary plaquette circulation over active plaquettes.
    pub max_plaquette: f64,
    /// Largest wrapped holonomy residual over independent cycles of the
    /// unmasked link graph.
    pub max_loop_residual: f64,
    /// Signed raw holonomy of the cycle with the largest magnitude; its
    /// value over `2 pi` rounds to the winding of a flat configuration.
    pub max_loop_raw: f64,
    /// Reconstructed generator when flat: line integral of the link phases
    /// from a base point, sign-matched to [`GaugePotential::pure_gauge`].
    pub witness: Option<LatticeGauge>,
}

/// Default per-plaquette flatness tolerance,
/// `1e-10 (hbar c / q) / a` expressed in phase units.
pub fn default_flatness_tol(grid: &Lattice2D) -> f64 {
    1e-10 / grid.spacing()
}

/// Is this background a removable phase convention on its domain?
///
/// True iff every elementary plaquette circulation is below `tol` and every
/// independent non-contractible loop holonomy is within `tol` of a multiple
/// of `2 pi`. The classification is mod `2 pi` deliberately: an integer flux
/// has trivial holonomy and is operationally invisible, so it counts as
/// flat.
pub fn is_pure_gauge(
    p: &GaugePotential,
    consts: &PhysicalConstants,
    tol: f64,
) -> Result<FlatnessReport> {
    let links = lattice::build_link_phases(p, consts)?;
    let grid = p.grid();
    let (nx, ny) = (grid.nx(), grid.ny());

    let curvature = lattice::plaquette_curvature(&links);
    let mut max_plaquette: f64 = 0.0;
    for ((i, j), &value) in curvature.values().indexed_iter() {
        if curvature.is_active(i, j) {
            max_plaquette = max_plaquette.max(value.abs());
        }
    }

    // Spanning tree over the unmasked link graph; potentials phi accumulate
    // link phases from the root, so each non-tree link closes one
    // independent cycle with holonomy phi(u) + theta - phi(v).
    let idx = |i: usize, j: usize| i * ny + j;
    let mut phi = vec![0.0_f64; nx * ny];
    let mut visited = vec![false; nx * ny];
    let root = grid
        .mask()
        .indexed_iter()
        .find(|(_, &m)| m)
        .map(|((i, j), _)| (i, j))
        .expect("lattice has interior points");
    let mut queue = std::collections::VecDeque::new();
    visited[idx(root.0, root.1)] = true;
    queue.push_back(root);
    let mut in_tree = std::collections::HashSet::new();
    while let Some((i, j)) = queue.pop_front() {
        let here = phi[idx(i, j)];
        let mut visit = |i2: usize, j2: usize, step_phase: f64, link_id: (u8, usize, usize)| {
            if !visited[idx(i2, j2)] {
                visited[idx(i2, j2)] = true;
                phi[idx(i2, j2)] = here + step_phase;
                in_tree.insert(link_id);
                queue.push_back((i2, j2));
            }
        };
        if links.x_active(i, j) {
            let i2 = grid.next_x(i).unwrap();
            visit(i2, j, links.theta_x()[(i, j)], (0, i, j));
        }
        if i > 0 && links.x_active(i - 1, j) {
            visit(i - 1, j, -links.theta_x()[(i - 1, j)], (0, i - 1, j));
        }
        if i == 0 && grid.boundary() == Boundary::Periodic && links.x_active(nx - 1, j) {
            visit(nx - 1, j, -links.theta_x()[(nx - 1, j)], (0, nx - 1, j));
        }
        if links.y_active(i, j) {
            let j2 = grid.next_y(j).unwrap();
            visit(i, j2, links.theta_y()[(i, j)], (1, i, j));
        }
        if j > 0 && links.y_active(i, j - 1) {
            visit(i, j - 1, -links.theta_y()[(i, j - 1)], (1, i, j - 1));
        }
        if j == 0 && grid.boundary() == Boundary::Periodic && links.y_active(i, ny - 1) {
            visit(i, ny - 1, -links.theta_y()[(i, ny - 1)], (1, i, ny - 1));
        }
    }

    let unreached = grid
        .mask()
        .indexed_iter()
        .filter(|((i, j), &m)| m && !visited[idx(*i, *j)])
        .count();
    if unreached > 0 {
        return Err(Error::DisconnectedDomain { unreached });
    }

    let mut max_loop_residual: f64 = 0.0;
    let mut max_loop_raw: f64 = 0.0;
    let mut consider = |h: f64| {
        max_loop_residual = max_loop_residual.max(wrap_angle(h).abs());
        if h.abs() > max_loop_raw.abs() {
            max_loop_raw = h;
        }
    };
    for i in 0..nx {
        for j in 0..ny {
            if links.x_active(i, j) && !in_tree.contains(&(0, i, j)) {
                let i2 = grid.next_x(i).unwrap();
                consider(phi[idx(i, j)] + links.theta_x()[(i, j)] - phi[idx(i2, j)]);
            }
            if links.y_active(i, j) && !in_tree.contains(&(1, i, j)) {
                let j2 = grid.next_y(j).unwrap();
                consider(phi[idx(i, j)] + links.theta_y()[(i, j)] - phi[idx(i, j2)]);
            }
        }
    }

    let flat = max_plaquette <= tol && max_loop_residual <= tol;
    let witness = if flat {
        // theta(u->v) = -(lambda(v) - lambda(u)) on tree links, so the
        // generator is minus the accumulated potential.
        let lambda = Array2::from_shape_fn((nx, ny), |(i, j)| {
            if grid.is_interior(i, j) {
                -phi[idx(i, j)]
            } else {
                0.0
            }
        });
        Some(LatticeGauge::from_values(grid.clone(), lambda)?)
    } else {
        None
    };

    Ok(FlatnessReport {
        flat,
        max_plaquette,
        max_loop_residual,
        max_loop_raw,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::QuantumState;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::natural()
    }

    fn ring(n: usize) -> Arc<RingGrid> {
        Arc::new(RingGrid::new(1.0, n).unwrap())
    }

    #[test]
    fn identity_gauge_leaves_state_unchanged() {
        let g = ring(32);
        let psi = RingState::momentum_eigenstate(g.clone(), 2);
        let gauge = RingGauge::from_fn(g, |_| 0.0);
        let out = gauge.apply(&psi).unwrap();
        for (a, b) in out.amplitudes().iter().zip(psi.amplitudes()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn constant_gauge_rotates_inner_products() {
        // Direct-summation oracle: inner products against an untransformed
        // reference rotate by exp(i * 1.3).
        let g = ring(64);
        let psi = RingState::from_fn(g.clone(), 0.0, |t| Complex64::new(t.cos(), 0.4 * t.sin()))
            .normalized()
            .unwrap();
        let reference = RingState::momentum_eigenstate(g.clone(), 1);
        let gauge = RingGauge::from_fn(g, |_| 1.3);
        let out = gauge.apply(&psi).unwrap();
        let before = reference.inner_product(&psi).unwrap();
        let after = reference.inner_product(&out).unwrap();
        let rotation = after / before;
        let expected = Complex64::from_polar(1.0, 1.3);
        assert!((rotation - expected).norm() < 1e-12);
    }

    #[test]
    fn sine_gauge_preserves_density_but_moves_momentum() {
        let g = ring(64);
        let psi = RingState::momentum_eigenstate(g.clone(), 1);
        let gauge = RingGauge::from_fn(g.clone(), |t| t.sin());
        let out = gauge.apply(&psi).unwrap();
        for (a, b) in out.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a.norm_sqr() - b.norm_sqr()).abs() < 1e-15);
        }
        // FFT oracle: the momentum distribution must change.
        let before = psi.momentum_amplitudes();
        let after = out.momentum_amplitudes();
        let moved: f64 = before
            .iter()
            .zip(&after)
            .map(|(x, y)| (x.norm_sqr() - y.norm_sqr()).abs())
            .sum();
        assert!(moved > 0.1, "momentum distribution unexpectedly static");
    }

    #[test]
    fn connection_of_sine_is_minus_cos() {
        let g = ring(64);
        let gauge = RingGauge::from_fn(g.clone(), |t| t.sin());
        let conn = gauge.connection(&consts());
        for (k, &w) in conn.omega().iter().enumerate() {
            let expected = -g.theta(k).cos();
            assert!((w - expected).abs() < 1e-12);
        }
        assert!(conn.circulation().abs() < 1e-12);
        assert_eq!(conn.winding_number(&consts()).unwrap().winding, 0);
    }

    #[test]
    fn constant_gauge_has_zero_connection() {
        let g = ring(32);
        let gauge = RingGauge::from_fn(g, |_| 0.42);
        let conn = gauge.connection(&consts());
        for &w in conn.omega() {
            assert!(w.abs() < 1e-13);
        }
    }

    #[test]
    fn winding_three_circulation_matches_trapezoid_oracle() {
        let g = ring(128);
        let gauge = RingGauge::with_winding(g.clone(), 3, |t| 0.2 * (2.0 * t).sin());
        let conn = gauge.connection(&consts());
        // Trapezoid oracle over the periodic grid.
        let dtheta = g.delta_theta();
        let oracle: f64 = conn.omega().iter().sum::<f64>() * dtheta;
        assert!((conn.circulation() - oracle).abs() < 1e-13);
        assert!((conn.circulation() + 6.0 * std::f64::consts::PI).abs() < 1e-10);
        let report = conn.winding_number(&consts()).unwrap();
        assert_eq!(report.winding, 3);
        assert!(report.residual < 1e-10);
    }

    #[test]
    fn single_winding_classified() {
        let g = ring(64);
        let conn = RingGauge::with_winding(g, 1, |_| 0.0).connection(&consts());
        assert_eq!(conn.winding_number(&consts()).unwrap().winding, 1);
    }

    #[test]
    fn physical_flux_is_not_a_winding() {
        let g = ring(64);
        let conn = Connection1D::constant(g, -0.37);
        let err = conn.winding_number(&consts()).unwrap_err();
        match err {
            Error::NotAWinding { circulation, .. } => {
                assert!((circulation + 0.74 * std::f64::consts::PI).abs() < 1e-12);
            }
            other => panic!("expected NotAWinding, got {other:?}"),
        }
    }

    #[test]
    fn winding_invariant_under_zero_circulation_perturbation() {
        let g = ring(64);
        let base = RingGauge::with_winding(g.clone(), 2, |_| 0.0).connection(&consts());
        let perturbation = RingGauge::from_fn(g.clone(), |t| 0.7 * t.sin() - 0.1 * (3.0 * t).cos())
            .connection(&consts());
        let omega: Vec<f64> = base
            .omega()
            .iter()
            .zip(perturbation.omega())
            .map(|(a, b)| a + b)
            .collect();
        let combined = Connection1D::new(g, omega).unwrap();
        assert_eq!(combined.winding_number(&consts()).unwrap().winding, 2);
    }

    fn open_grid(n: usize, a: f64) -> Arc<Lattice2D> {
        Arc::new(Lattice2D::open(n, n, a).unwrap())
    }

    #[test]
    fn lattice_gauge_preserves_density_pointwise() {
        let grid = open_grid(16, 0.3);
        let psi = Wavefunction2D::gaussian(grid.clone(), [2.0, 2.0], 0.7, [1.0, 0.0]).unwrap();
        let gauge = LatticeGauge::from_fn(grid, |x, y| 0.3 * x - 0.8 * y + (x * y).sin());
        let out = gauge.apply(&psi).unwrap();
        for (a, b) in out.amplitudes().iter().zip(psi.amplitudes().iter()) {
            // Equal to rounding: the unit phase factor multiplies in.
            assert!((a.norm_sqr() - b.norm_sqr()).abs() <= 1e-15 * b.norm_sqr().max(1e-300));
        }
    }

    #[test]
    fn linear_lambda_shifts_vector_potential_uniformly() {
        // Analytic gradient: Lambda = 0.2 x gives A' = (-0.2 hbar c / q, 0).
        let c = consts();
        let grid = open_grid(12, 0.5);
        let p = GaugePotential::zero(grid.clone());
        let gauge = LatticeGauge::from_fn(grid.clone(), |x, _| 0.2 * x);
        let out = gauge.apply_to_potential(&p, &c).unwrap();
        // Finite-difference oracle agrees because the field is linear.
        let (gx, _) = gradient(&grid, gauge.lambda());
        for ((i, j), &g) in gx.indexed_iter() {
            assert!((out.a_x()[(i, j)] + g).abs() < 1e-13);
            assert!((out.a_x()[(i, j)] + 0.2).abs() < 1e-12, "at ({i},{j})");
            assert!(out.a_y()[(i, j)].abs() < 1e-13);
        }
    }

    #[test]
    fn constant_lambda_leaves_potential_alone() {
        let c = consts();
        let grid = open_grid(8, 1.0);
        let p = GaugePotential::uniform_b(grid.clone(), 0.7).unwrap();
        let gauge = LatticeGauge::from_fn(grid, |_, _| 4.2);
        let out = gauge.apply_to_potential(&p, &c).unwrap();
        for (a, b) in out.a_x().iter().zip(p.a_x().iter()) {
            assert!((a - b).abs() < 1e-13);
        }
        for (a, b) in out.v().iter().zip(p.v().iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn time_dependent_lambda_shifts_scalar_potential() {
        // Lambda = 0.5 t: dLambda/dt = 0.5, so V' = V + 0.5 hbar / q.
        let c = consts();
        let grid = open_grid(8, 1.0);
        let p = GaugePotential::zero(grid.clone());
        let dot = Array2::from_elem((8, 8), 0.5);
        let gauge = LatticeGauge::from_fn(grid, |_, _| 0.0)
            .with_time_derivative(dot)
            .unwrap();
        let out = gauge.apply_to_potential(&p, &c).unwrap();
        for &v in out.v().iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn gauge_then_inverse_restores_potential() {
        let c = consts();
        let grid = open_grid(10, 0.4);
        let p = GaugePotential::uniform_b(grid.clone(), 1.3).unwrap();
        let gauge = LatticeGauge::from_fn(grid, |x, y| (x - 0.7 * y).sin() + 0.2 * x * y);
        let there = gauge.apply_to_potential(&p, &c).unwrap();
        let back = gauge.inverse().apply_to_potential(&there, &c).unwrap();
        for (a, b) in back.a_x().iter().zip(p.a_x().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in back.a_y().iter().zip(p.a_y().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for &o in back.lambda_offset.iter() {
            assert_eq!(o, 0.0);
        }
    }

    #[test]
    fn solenoid_rejects_unshielded_center() {
        let grid = open_grid(8, 1.0);
        let err = GaugePotential::solenoid(grid, [3.0, 3.0], 0.4, &consts());
        assert!(matches!(err, Err(Error::Singularity { .. })));
    }

    #[test]
    fn solenoid_outside_grid_is_fine() {
        let grid = open_grid(8, 1.0);
        let p = GaugePotential::solenoid(grid, [-5.0, -5.0], 0.4, &consts()).unwrap();
        p.validate().unwrap();
    }
}
