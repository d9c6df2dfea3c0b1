//! Discretization domains: the periodic ring and the masked 2D lattice.

use ndarray::Array2;
use std::f64::consts::PI;

use crate::{Error, Result};

/// Uniform angular grid on a ring of fixed radius.
///
/// Points sit at `theta_k = 2 pi k / n` for `k = 0..n`. The grid measure used
/// by inner products is `radius * delta_theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingGrid {
    radius: f64,
    n_points: usize,
    thetas: Vec<f64>,
}

impl RingGrid {
    /// `n_points` must be even and at least 8 so the momentum range is
    /// symmetric and FFT-friendly.
    pub fn new(radius: f64, n_points: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        if n_points < 8 || n_points % 2 != 0 {
            return Err(Error::invalid(
                "n_points",
                format!("must be even and >= 8, got {n_points}"),
            ));
        }
        let thetas = (0..n_points)
            .map(|k| 2.0 * PI * k as f64 / n_points as f64)
            .collect();
        Ok(RingGrid {
            radius,
            n_points,
            thetas,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.thetas[k]
    }

    pub fn delta_theta(&self) -> f64 {
        2.0 * PI / self.n_points as f64
    }

    /// Arc-length measure element attached to each grid point.
    pub fn measure(&self) -> f64 {
        self.radius * self.delta_theta()
    }

    /// Momentum quantum numbers in FFT bin order: `0, 1, ..., n/2-1, -n/2, ..., -1`.
    pub fn momentum_numbers(&self) -> impl Iterator<Item = i64> + '_ {
        let n = self.n_points as i64;
        (0..n).map(move |k| if k < n / 2 { k } else { k - n })
    }
}

/// Boundary handling for the 2D lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// The wavefunction vanishes outside the grid; edge links are absent.
    Dirichlet,
    /// Torus topology; used mainly by analytic test oracles (plane waves are
    /// exact eigenvectors there).
    Periodic,
}

/// Uniform square lattice with a hard-wall mask.
///
/// `mask[(i, j)] == true` marks an interior point where the wavefunction may
/// be nonzero; `false` marks a wall (a barrier or a shielded cylinder). Walls
/// act as Dirichlet boundaries: links touching them are deleted rather than
/// penalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice2D {
    nx: usize,
    ny: usize,
    spacing: f64,
    origin: [f64; 2],
    mask: Array2<bool>,
    boundary: Boundary,
    n_interior: usize,
}

impl Lattice2D {
    /// Fully open rectangle with Dirichlet edges.
    pub fn open(nx: usize, ny: usize, spacing: f64) -> Result<Self> {
        Self::with_mask(
            nx,
            ny,
            spacing,
            [0.0, 0.0],
            Array2::from_elem((nx, ny), true),
            Boundary::Dirichlet,
        )
    }

    /// Fully open torus.
    pub fn periodic(nx: usize, ny: usize, spacing: f64) -> Result<Self> {
        Self::with_mask(
            nx,
            ny,
            spacing,
            [0.0, 0.0],
            Array2::from_elem((nx, ny), true),
            Boundary::Periodic,
        )
    }

    pub fn with_mask(
        nx: usize,
        ny: usize,
        spacing: f64,
        origin: [f64; 2],
        mask: Array2<bool>,
        boundary: Boundary,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::invalid("nx/ny", "lattice needs at least 2x2 points"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid("spacing", format!("must be positive, got {spacing}")));
        }
        if mask.dim() != (nx, ny) {
            return Err(Error::GridMismatch(format!(
                "mask shape {:?} does not match lattice {}x{}",
                mask.dim(),
                nx,
                ny
            )));
        }
        let n_interior = mask.iter().filter(|&&m| m).count();
        if n_interior == 0 {
            return Err(Error::invalid("mask", "no interior points"));
        }
        Ok(Lattice2D {
            nx,
            ny,
            spacing,
            origin,
            mask,
            boundary,
            n_interior,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        self.mask[(i, j)]
    }

    pub fn interior_count(&self) -> usize {
        self.n_interior
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.spacing
    }

    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.spacing
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x(i), self.y(j)]
    }

    /// Area measure element attached to each grid point.
    pub fn measure(&self) -> f64 {
        self.spacing * self.spacing
    }

    /// Index of the x-neighbor `i+1`, respecting the boundary. `None` at a
    /// Dirichlet edge.
    pub fn next_x(&self, i: usize) -> Option<usize> {
        if i + 1 < self.nx {
            Some(i + 1)
        } else if self.boundary == Boundary::Periodic {
            Some(0)
        } else {
            None
        }
    }

    /// Index of the y-neighbor `j+1`, respecting the boundary.
    pub fn next_y(&self, j: usize) -> Option<usize> {
        if j + 1 < self.ny {
            Some(j + 1)
        } else if self.boundary == Boundary::Periodic {
            Some(0)
        } else {
            None
        }
    }

    /// True when the x-link out of `(i, j)` exists: both endpoints interior
    /// and the boundary allows it.
    pub fn x_link_active(&self, i: usize, j: usize) -> bool {
        match self.next_x(i) {
            Some(i2) => self.mask[(i, j)] && self.mask[(i2, j)],
            None => false,
        }
    }

    pub fn y_link_active(&self, i: usize, j: usize) -> bool {
        match self.next_y(j) {
            Some(j2) => self.mask[(i, j)] && self.mask[(i, j2)],
            None => false,
        }
    }
}
