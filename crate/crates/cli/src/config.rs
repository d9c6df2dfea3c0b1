//! TOML config schemas, strict about unknown keys: a typo in a physics
//! parameter should fail loudly, not run silently with a default.

use abqsim_core::constants::PhysicalConstants;
use abqsim_core::dynamics::PropagatorConfig;
use abqsim_core::experiments::{AbExperimentConfig, BarrierSpec, PacketSpec};
use abqsim_core::gauge::GaugePotential;
use abqsim_core::grid::{Boundary, Lattice2D};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{CliError, CliResult};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsConfig {
    pub hbar: f64,
    pub mass: f64,
    pub charge: f64,
    pub light_speed: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig {
            hbar: 1.0,
            mass: 1.0,
            charge: 1.0,
            light_speed: 1.0,
        }
    }
}

impl ConstantsConfig {
    pub fn to_core(&self) -> CliResult<PhysicalConstants> {
        Ok(PhysicalConstants::new(
            self.hbar,
            self.mass,
            self.charge,
            self.light_speed,
        )?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSection {
    #[serde(default = "one")]
    pub radius: f64,
    pub alphas: Vec<f64>,
    #[serde(default = "RingSection::default_n_min")]
    pub n_min: i64,
    #[serde(default = "RingSection::default_n_max")]
    pub n_max: i64,
}

impl RingSection {
    fn default_n_min() -> i64 {
        -5
    }

    fn default_n_max() -> i64 {
        5
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingNumericalSection {
    pub grid_points: usize,
    pub levels: usize,
}

impl Default for RingNumericalSection {
    fn default() -> Self {
        RingNumericalSection {
            grid_points: 512,
            levels: 5,
        }
    }
}

/// `ring-spectrum` document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpectrumDoc {
    #[serde(default)]
    pub constants: ConstantsConfig,
    pub ring: RingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numerical: Option<RingNumericalSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskMaskSection {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    #[serde(default)]
    pub periodic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disk_mask: Option<DiskMaskSection>,
}

impl LatticeSection {
    pub fn build(&self) -> CliResult<Arc<Lattice2D>> {
        let boundary = if self.periodic {
            Boundary::Periodic
        } else {
            Boundary::Dirichlet
        };
        let mask = match &self.disk_mask {
            None => Array2::from_elem((self.nx, self.ny), true),
            Some(disk) => Array2::from_shape_fn((self.nx, self.ny), |(i, j)| {
                let dx = i as f64 * self.spacing - disk.center[0];
                let dy = j as f64 * self.spacing - disk.center[1];
                dx * dx + dy * dy > disk.radius * disk.radius
            }),
        };
        Ok(Arc::new(Lattice2D::with_mask(
            self.nx,
            self.ny,
            self.spacing,
            [0.0, 0.0],
            mask,
            boundary,
        )?))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformBSection {
    pub b: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolenoidPotentialSection {
    pub center: [f64; 2],
    pub alpha: f64,
}

/// `lambda(x, y) = linear.x + linear.y + amp_x sin(freq_x x) + amp_y sin(freq_y y)`
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PureGaugeSection {
    pub linear: [f64; 2],
    pub amp_x: f64,
    #[serde(default = "one")]
    pub freq_x: f64,
    pub amp_y: f64,
    #[serde(default = "one")]
    pub freq_y: f64,
}

impl Default for PureGaugeSection {
    fn default() -> Self {
        PureGaugeSection {
            linear: [0.0, 0.0],
            amp_x: 0.0,
            freq_x: 1.0,
            amp_y: 0.0,
            freq_y: 1.0,
        }
    }
}

impl PureGaugeSection {
    pub fn lambda(&self, x: f64, y: f64) -> f64 {
        self.linear[0] * x
            + self.linear[1] * y
            + self.amp_x * (self.freq_x * x).sin()
            + self.amp_y * (self.freq_y * y).sin()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialSection {
    Zero,
    UniformB(UniformBSection),
    Solenoid(SolenoidPotentialSection),
    PureGauge(PureGaugeSection),
}

impl PotentialSection {
    pub fn build(
        &self,
        grid: &Arc<Lattice2D>,
        consts: &PhysicalConstants,
    ) -> CliResult<GaugePotential> {
        Ok(match self {
            PotentialSection::Zero => GaugePotential::zero(grid.clone()),
            PotentialSection::UniformB(s) => GaugePotential::uniform_b(grid.clone(), s.b)?,
            PotentialSection::Solenoid(s) => {
                GaugePotential::solenoid(grid.clone(), s.center, s.alpha, consts)?
            }
            PotentialSection::PureGauge(s) => {
                let lambda = Array2::from_shape_fn((grid.nx(), grid.ny()), |(i, j)| {
                    s.lambda(grid.x(i), grid.y(j))
                });
                GaugePotential::pure_gauge(grid.clone(), lambda, consts)?
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    /// Per-plaquette flatness tolerance; 0 means the documented default
    /// `1e-10 / spacing`.
    pub tolerance: f64,
    pub commutator_trials: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            tolerance: 0.0,
            commutator_trials: 3,
        }
    }
}

/// `gauge-check` document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeCheckDoc {
    #[serde(default)]
    pub constants: ConstantsConfig,
    pub lattice: LatticeSection,
    pub potential: PotentialSection,
    #[serde(default)]
    pub check: CheckSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    pub center: [f64; 2],
    pub sigma: f64,
    pub wavevector: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub dt: f64,
    pub total_time: f64,
    #[serde(default = "RunSection::default_tolerance")]
    pub solver_tolerance: f64,
    #[serde(default = "RunSection::default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub snapshot_stride: usize,
}

impl RunSection {
    fn default_tolerance() -> f64 {
        1e-11
    }

    fn default_max_iterations() -> usize {
        500
    }

    pub fn to_core(&self) -> PropagatorConfig {
        PropagatorConfig {
            dt: self.dt,
            total_time: self.total_time,
            linear_solver_tolerance: self.solver_tolerance,
            max_solver_iterations: self.max_iterations,
            snapshot_stride: self.snapshot_stride,
            ..Default::default()
        }
    }
}

/// `evolve` document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveDoc {
    #[serde(default)]
    pub constants: ConstantsConfig,
    pub lattice: LatticeSection,
    pub potential: PotentialSection,
    /// Uniform scalar potential added on top.
    #[serde(default)]
    pub v_const: f64,
    pub packet: PacketSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            nx: 384,
            ny: 256,
            spacing: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierSection {
    pub x_center: f64,
    pub thickness: f64,
    pub slit_centers: [f64; 2],
    pub slit_width: f64,
}

impl Default for BarrierSection {
    fn default() -> Self {
        BarrierSection {
            x_center: 12.8,
            thickness: 0.3,
            slit_centers: [10.35, 15.15],
            slit_width: 0.8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolenoidSection {
    pub center: [f64; 2],
    pub radius: f64,
    /// Required by `interfere` and `holonomy`; ignored by `sweep`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl Default for SolenoidSection {
    fn default() -> Self {
        SolenoidSection {
            center: [12.8, 12.75],
            radius: 0.4,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScreenSection {
    pub x: f64,
}

impl Default for ScreenSection {
    fn default() -> Self {
        ScreenSection { x: 18.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferenceRunSection {
    pub dt: f64,
    pub total_time: f64,
    pub solver_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for InterferenceRunSection {
    fn default() -> Self {
        InterferenceRunSection {
            dt: 0.002,
            total_time: 14.0,
            solver_tolerance: 1e-11,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferencePacketSection {
    pub center: [f64; 2],
    pub sigma: f64,
    pub wavevector: [f64; 2],
}

impl Default for InterferencePacketSection {
    fn default() -> Self {
        InterferencePacketSection {
            center: [6.0, 12.75],
            sigma: 1.2,
            wavevector: [2.0, 0.0],
        }
    }
}

/// `interfere`, `holonomy`, and `sweep` document. Every geometry default is
/// the pinned reference configuration.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InterferenceDoc {
    pub constants: ConstantsConfig,
    pub geometry: GeometrySection,
    pub barrier: BarrierSection,
    pub solenoid: SolenoidSection,
    pub packet: InterferencePacketSection,
    pub screen: ScreenSection,
    pub run: InterferenceRunSection,
    /// Flux values for `sweep`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
}

impl InterferenceDoc {
    pub fn to_core(&self, alpha: f64) -> CliResult<AbExperimentConfig> {
        Ok(AbExperimentConfig {
            nx: self.geometry.nx,
            ny: self.geometry.ny,
            spacing: self.geometry.spacing,
            barrier: BarrierSpec {
                x_center: self.barrier.x_center,
                thickness: self.barrier.thickness,
                slit_centers: self.barrier.slit_centers,
                slit_width: self.barrier.slit_width,
            },
            solenoid_center: self.solenoid.center,
            solenoid_radius: self.solenoid.radius,
            alpha,
            packet: PacketSpec {
                center: self.packet.center,
                sigma: self.packet.sigma,
                wavevector: self.packet.wavevector,
            },
            screen_x: self.screen.x,
            run: PropagatorConfig {
                dt: self.run.dt,
                total_time: self.run.total_time,
                linear_solver_tolerance: self.run.solver_tolerance,
                max_solver_iterations: self.run.max_iterations,
                ..Default::default()
            },
            constants: self.constants.to_core()?,
        })
    }

    pub fn require_alpha(&self) -> CliResult<f64> {
        self.solenoid.alpha.ok_or_else(|| {
            CliError::Validation("`solenoid.alpha` is required for this command".into())
        })
    }

    pub fn require_alphas(&self) -> CliResult<Vec<f64>> {
        match &self.alphas {
            Some(a) if !a.is_empty() => Ok(a.clone()),
            _ => Err(CliError::Validation(
                "`alphas` (non-empty list) is required for sweep".into(),
            )),
        }
    }
}

/// Parse a strict TOML document; parse errors keep toml's line/column
/// rendering.
pub fn parse_doc<T: serde::de::DeserializeOwned>(text: &str) -> CliResult<T> {
    toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

/// Resolved config echo: the parsed document with every default filled.
pub fn resolved_toml<T: Serialize>(doc: &T) -> CliResult<String> {
    toml::to_string_pretty(doc).map_err(|e| CliError::Parse(format!("re-serialization: {e}")))
}
