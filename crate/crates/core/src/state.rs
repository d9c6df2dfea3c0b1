//! Wavefunctions on the ring and on the lattice, with the measure-weighted
//! Hilbert-space operations every other module builds on.

use ndarray::Array2;
use num_complex::Complex64;
use std::sync::Arc;

use crate::fft;
use crate::grid::{Lattice2D, RingGrid};
use crate::{Error, Result};

/// Common Hilbert-space surface of the two state kinds.
///
/// Inner products include the grid measure element (`R * dtheta` on the ring,
/// `a^2` on the lattice) so norms stay consistent under grid refinement.
pub trait QuantumState: Sized + Clone {
    fn inner_product(&self, other: &Self) -> Result<Complex64>;

    fn norm_sq(&self) -> f64;

    fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Same direction, unit norm. Fails on the zero state.
    fn normalized(&self) -> Result<Self>;

    fn scaled(&self, factor: Complex64) -> Self;
}

fn dot(a: &[Complex64], b: &[Complex64], measure: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc * measure
}

fn sum_sq(a: &[Complex64], measure: f64) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>() * measure
}

/// Periodic complex amplitudes over a [`RingGrid`].
#[derive(Debug, Clone)]
pub struct RingState {
    grid: Arc<RingGrid>,
    amplitudes: Vec<Complex64>,
    time: f64,
}

impl RingState {
    pub fn new(grid: Arc<RingGrid>, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes on a {}-point ring",
                amplitudes.len(),
                grid.len()
            )));
        }
        Ok(RingState {
            grid,
            amplitudes,
            time,
        })
    }

    pub fn from_fn(grid: Arc<RingGrid>, time: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = grid.thetas().iter().map(|&t| f(t)).collect();
        RingState {
            grid,
            amplitudes,
            time,
        }
    }

    /// Grid-normalized momentum eigenstate `exp(i n theta) / sqrt(2 pi R)`.
    pub fn momentum_eigenstate(grid: Arc<RingGrid>, n: i64) -> Self {
        let norm = 1.0 / (2.0 * std::f64::consts::PI * grid.radius()).sqrt();
        Self::from_fn(grid, 0.0, |theta| {
            Complex64::from_polar(norm, n as f64 * theta)
        })
    }

    pub fn grid(&self) -> &Arc<RingGrid> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Angular-momentum decomposition: coefficient of `exp(i n theta)` for
    /// each `n` in FFT bin order (see [`RingGrid::momentum_numbers`]),
    /// normalized so the coefficients of a momentum eigenstate are a unit
    /// spike.
    pub fn momentum_amplitudes(&self) -> Vec<Complex64> {
        let mut buf = self.amplitudes.clone();
        fft::forward(&mut buf);
        let scale = 1.0 / self.grid.len() as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
        buf
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("ring states on different grids".into()))
        }
    }
}

impl QuantumState for RingState {
    fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(dot(&self.amplitudes, &other.amplitudes, self.grid.measure()))
    }

    fn norm_sq(&self) -> f64 {
        sum_sq(&self.amplitudes, self.grid.measure())
    }

    fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateState);
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    fn scaled(&self, factor: Complex64) -> Self {
        let amplitudes = self.amplitudes.iter().map(|v| v * factor).collect();
        RingState {
            grid: self.grid.clone(),
            amplitudes,
            time: self.time,
        }
    }
}

/// Complex amplitude grid over a [`Lattice2D`]; identically zero on masked
/// points, always.
#[derive(Debug, Clone)]
pub struct Wavefunction2D {
    grid: Arc<Lattice2D>,
    amplitudes: Array2<Complex64>,
    time: f64,
}

impl Wavefunction2D {
    /// Validating constructor: amplitudes on masked points must already be
    /// exactly zero.
    pub fn new(grid: Arc<Lattice2D>, amplitudes: Array2<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.dim() != (grid.nx(), grid.ny()) {
            return Err(Error::GridMismatch(format!(
                "amplitude shape {:?} on a {}x{} lattice",
                amplitudes.dim(),
                grid.nx(),
                grid.ny()
            )));
        }
        for ((i, j), &m) in grid.mask().indexed_iter() {
            if !m && amplitudes[(i, j)] != Complex64::new(0.0, 0.0) {
                return Err(Error::invalid(
                    "amplitudes",
                    format!("nonzero value on masked point ({i}, {j})"),
                ));
            }
        }
        Ok(Wavefunction2D {
            grid,
            amplitudes,
            time,
        })
    }

    /// Evaluate `f` on interior points; masked points are zero by
    /// construction.
    pub fn from_fn(
        grid: Arc<Lattice2D>,
        time: f64,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Self {
        let amplitudes = Array2::from_shape_fn((grid.nx(), grid.ny()), |(i, j)| {
            if grid.is_interior(i, j) {
                f(grid.x(i), grid.y(j))
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Wavefunction2D {
            grid,
            amplitudes,
            time,
        }
    }

    /// Normalized Gaussian packet `exp(-|r - c|^2 / (4 sigma^2)) exp(i k.r)`,
    /// masked and renormalized on the grid.
    pub fn gaussian(
        grid: Arc<Lattice2D>,
        center: [f64; 2],
        sigma: f64,
        wavevector: [f64; 2],
    ) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
        }
        let raw = Self::from_fn(grid, 0.0, |x, y| {
            let dx = x - center[0];
            let dy = y - center[1];
            let envelope = (-(dx * dx + dy * dy) / (4.0 * sigma * sigma)).exp();
            Complex64::from_polar(envelope, wavevector[0] * x + wavevector[1] * y)
        });
        raw.normalized()
    }

    /// Normalized state with uniform random interior amplitudes; used by the
    /// randomized invariant checks.
    pub fn random(grid: &Arc<Lattice2D>, rng: &mut impl rand::Rng) -> Result<Self> {
        let raw = Array2::from_shape_fn((grid.nx(), grid.ny()), |(i, j)| {
            if grid.is_interior(i, j) {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Wavefunction2D {
            grid: grid.clone(),
            amplitudes: raw,
            time: 0.0,
        }
        .normalized()
    }

    pub(crate) fn from_raw(grid: Arc<Lattice2D>, amplitudes: Array2<Complex64>, time: f64) -> Self {
        Wavefunction2D {
            grid,
            amplitudes,
            time,
        }
    }

    pub fn grid(&self) -> &Arc<Lattice2D> {
        &self.grid
    }

    pub fn amplitudes(&self) -> &Array2<Complex64> {
        &self.amplitudes
    }

    /// Flat row-major view (y index contiguous).
    pub fn as_slice(&self) -> &[Complex64] {
        self.amplitudes.as_slice().expect("standard layout")
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// |psi|^2 at a point.
    pub fn density(&self, i: usize, j: usize) -> f64 {
        self.amplitudes[(i, j)].norm_sqr()
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch("wavefunctions on different lattices".into()))
        }
    }
}

impl QuantumState for Wavefunction2D {
    fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(dot(
            self.as_slice(),
            other.as_slice(),
            self.grid.measure(),
        ))
    }

    fn norm_sq(&self) -> f64 {
        sum_sq(self.as_slice(), self.grid.measure())
    }

    fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateState);
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    fn scaled(&self, factor: Complex64) -> Self {
        Wavefunction2D {
            grid: self.grid.clone(),
            amplitudes: self.amplitudes.mapv(|v| v * factor),
            time: self.time,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> Arc<RingGrid> {
        Arc::new(RingGrid::new(1.0, n).unwrap())
    }

    #[test]
    fn normalized_eigenstate_has_unit_norm() {
        let psi = RingState::momentum_eigenstate(ring(64), 3);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let ip = psi.inner_product(&psi).unwrap();
        assert!((ip - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fourier_modes_are_orthogonal() {
        let g = ring(64);
        let psi0 = RingState::momentum_eigenstate(g.clone(), 0);
        let psi1 = RingState::momentum_eigenstate(g, 1);
        let ip = psi0.inner_product(&psi1).unwrap();
        assert!(ip.norm() < 1e-13, "overlap {ip}");
    }

    #[test]
    fn constant_phase_shows_up_in_inner_product() {
        // Direct-summation oracle: <psi | e^{ic} psi> = e^{ic}.
        let c = 0.7;
        let psi = RingState::momentum_eigenstate(ring(32), 2);
        let rotated = psi.scaled(Complex64::from_polar(1.0, c));
        let ip = psi.inner_product(&rotated).unwrap();
        let expected = Complex64::new(0.7f64.cos(), 0.7f64.sin());
        assert!((ip - expected).norm() < 1e-13);
    }

    #[test]
    fn inner_product_is_conjugate_symmetric() {
        let g = ring(32);
        let a = RingState::from_fn(g.clone(), 0.0, |t| Complex64::new(t.cos(), t.sin() * 0.3));
        let b = RingState::from_fn(g, 0.0, |t| Complex64::new(0.2, (2.0 * t).sin()));
        let ab = a.inner_product(&b).unwrap();
        let ba = b.inner_product(&a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-13);
    }

    #[test]
    fn mismatched_grids_error() {
        let a = RingState::momentum_eigenstate(ring(32), 0);
        let b = RingState::momentum_eigenstate(ring(64), 0);
        assert!(matches!(a.inner_product(&b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn normalize_is_scale_invariant_and_idempotent() {
        let g = ring(32);
        let psi = RingState::from_fn(g, 0.0, |t| Complex64::new(1.0 + t.cos(), t.sin()));
        let scaled = psi.scaled(Complex64::new(3.0, 0.0));
        let n1 = psi.normalized().unwrap();
        let n2 = scaled.normalized().unwrap();
        let n3 = n1.normalized().unwrap();
        for k in 0..32 {
            assert!((n1.amplitudes()[k] - n2.amplitudes()[k]).norm() < 1e-12);
            assert!((n1.amplitudes()[k] - n3.amplitudes()[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_state_cannot_be_normalized() {
        let psi = RingState::from_fn(ring(16), 0.0, |_| Complex64::new(0.0, 0.0));
        assert!(matches!(psi.normalized(), Err(Error::DegenerateState)));
    }

    #[test]
    fn masked_points_stay_zero_and_nonzero_values_rejected() {
        let mut mask = Array2::from_elem((6, 6), true);
        mask[(2, 3)] = false;
        let grid = Arc::new(
            Lattice2D::with_mask(6, 6, 0.5, [0.0, 0.0], mask, crate::grid::Boundary::Dirichlet)
                .unwrap(),
        );
        let psi = Wavefunction2D::from_fn(grid.clone(), 0.0, |x, y| Complex64::new(x + y, 1.0));
        assert_eq!(psi.amplitudes()[(2, 3)], Complex64::new(0.0, 0.0));

        let mut amps = psi.amplitudes().clone();
        amps[(2, 3)] = Complex64::new(1e-300, 0.0);
        assert!(Wavefunction2D::new(grid, amps, 0.0).is_err());
    }

    #[test]
    fn gaussian_is_normalized_on_masked_grid() {
        let grid = Arc::new(Lattice2D::open(32, 32, 0.25).unwrap());
        let psi =
            Wavefunction2D::gaussian(grid, [4.0, 4.0], 0.8, [1.0, -0.5]).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn momentum_amplitudes_spike_for_eigenstate() {
        let g = ring(32);
        let psi = RingState::momentum_eigenstate(g.clone(), 5).normalized().unwrap();
        let coeffs = psi.momentum_amplitudes();
        let bins: Vec<i64> = g.momentum_numbers().collect();
        for (k, c) in coeffs.iter().enumerate() {
            if bins[k] == 5 {
                assert!(c.norm() > 0.3);
            } else {
                assert!(c.norm() < 1e-12, "leak at bin {}: {}", bins[k], c.norm());
            }
        }
    }
}
