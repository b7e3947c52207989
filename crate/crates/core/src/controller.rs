//! Damping-matrix design and the passive control force.
//!
//! Both controllers compute `τc = g + D (f − ξ̇)` with `D = Q S Qᵀ` for an
//! orthonormal `Q`. The velocity-preserving baseline aligns `Q` with the
//! desired velocity `f`. The obstacle-aware controller blends that matrix
//! with one aligned to the averaged obstacle normal:
//!
//! ```text
//! D = (1 − w) D^f + w D^o
//! ```
//!
//! where `w` is the danger weight from [`crate::geometry::DangerAssessment`].

use crate::flowfield::{modulate_probes, BaseField};
use crate::geometry::{assess_probes, proximity, DangerAssessment, Environment};
use crate::linalg::{check_spd, complete_basis, min_eigenvalue, orthonormal_completion};
use crate::{Error, Matrix, Result, Vector};

/// Below this desired speed (m/s) the follow damping ramps towards `s^f · I`.
pub const LOW_SPEED_RAMP: f64 = 1e-6;

/// `|p|` above `1 − ALIGNMENT_TOLERANCE` counts as normal and velocity aligned.
pub const ALIGNMENT_TOLERANCE: f64 = 1e-9;

/// User damping values (all in 1/s) and the critical distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampingSpec {
    /// `s^o`, damping towards obstacles.
    pub s_obs: f64,
    /// `s^f`, damping along the desired velocity.
    pub s_follow: f64,
    /// `s^c`, compliant damping in the remaining directions.
    pub s_compliant: f64,
    /// `Γc`, distance at which the damping starts to change.
    pub gamma_crit: f64,
}

impl DampingSpec {
    pub const DEFAULT_GAMMA_CRIT: f64 = 3.0;

    pub fn new(s_obs: f64, s_follow: f64, s_compliant: f64, gamma_crit: f64) -> Result<Self> {
        let spec = Self {
            s_obs,
            s_follow,
            s_compliant,
            gamma_crit,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `s^o = 2 m/Δt`, `s^f = m/Δt`, `s^c = 0.1 m/Δt` with `m` the smallest
    /// mass eigenvalue.
    pub fn recommended(min_mass: f64, dt: f64) -> Self {
        Self {
            s_obs: 2.0 * min_mass / dt,
            s_follow: min_mass / dt,
            s_compliant: 0.1 * min_mass / dt,
            gamma_crit: Self::DEFAULT_GAMMA_CRIT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("s_obs", self.s_obs),
            ("s_follow", self.s_follow),
            ("s_compliant", self.s_compliant),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::config(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(self.gamma_crit > 1.0) || !self.gamma_crit.is_finite() {
            return Err(Error::config(format!(
                "gamma_crit must exceed 1, got {}",
                self.gamma_crit
            )));
        }
        Ok(())
    }

    /// `s^o ≥ s^f ≥ s^c`: stiff towards obstacles, compliant sideways.
    pub fn has_recommended_ordering(&self) -> bool {
        self.s_obs >= self.s_follow && self.s_follow >= self.s_compliant
    }

    pub fn min_value(&self) -> f64 {
        self.s_obs.min(self.s_follow).min(self.s_compliant)
    }

    pub fn max_value(&self) -> f64 {
        self.s_obs.max(self.s_follow).max(self.s_compliant)
    }
}

/// `D = Q diag(S) Qᵀ` with orthonormal `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct DampingDecomposition {
    pub basis: Matrix,
    pub values: Vector,
}

impl DampingDecomposition {
    pub fn matrix(&self) -> Matrix {
        let mut scaled = self.basis.clone();
        for (mut column, value) in scaled.column_iter_mut().zip(self.values.iter()) {
            column *= *value;
        }
        let d = scaled * self.basis.transpose();
        // symmetrise away rounding
        (&d + d.transpose()) * 0.5
    }

    pub fn uniform(dim: usize, value: f64) -> Self {
        Self {
            basis: Matrix::identity(dim, dim),
            values: Vector::from_element(dim, value),
        }
    }
}

/// Point-mass plant: SPD mass matrix and a gravity force hook. Coriolis
/// terms are identically zero for a point mass.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantModel {
    pub mass: Matrix,
    pub gravity: Vector,
}

impl PlantModel {
    pub fn new(mass: Matrix, gravity: Vector) -> Result<Self> {
        check_spd(&mass, "mass matrix")?;
        if gravity.len() != mass.nrows() {
            return Err(Error::DimensionMismatch {
                expected: mass.nrows(),
                found: gravity.len(),
            });
        }
        Ok(Self { mass, gravity })
    }

    pub fn point_mass(dim: usize, mass: f64) -> Result<Self> {
        Self::new(Matrix::identity(dim, dim) * mass, Vector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn min_mass(&self) -> f64 {
        min_eigenvalue(&self.mass)
    }

    /// Kinetic energy `½ ξ̇ᵀ M ξ̇`.
    pub fn kinetic_energy(&self, xi_dot: &Vector) -> f64 {
        0.5 * xi_dot.dot(&(&self.mass * xi_dot))
    }
}

/// Control and external forces acting during one step.
#[derive(Clone, Debug, PartialEq)]
pub struct ForceSample {
    pub control: Vector,
    pub external: Vector,
}

/// Which damping design to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    /// Baseline: `Q` aligned with `f`, values `(s^f, s^c, …, s^c)`.
    VelocityPreserving,
    /// Blended obstacle-aware damping.
    ObstacleAware,
}

impl ControllerKind {
    pub fn label(&self) -> &'static str {
        match self {
            ControllerKind::VelocityPreserving => "velocity_preserving",
            ControllerKind::ObstacleAware => "obstacle_aware",
        }
    }
}

/// Unit vector along `f`, or the fallback direction when `f` vanishes.
fn follow_direction(f: &Vector, fallback: Option<&Vector>) -> Vector {
    let norm = f.norm();
    if norm > crate::linalg::MIN_DIRECTION_NORM {
        f / norm
    } else if let Some(direction) = fallback {
        direction.clone()
    } else {
        let mut e = Vector::zeros(f.len());
        e[0] = 1.0;
        e
    }
}

/// Weight `min(1, ‖n‖² + ΔΓ²)` that pushes the follow damping towards `s^o`.
pub fn velocity_preservation_weight(spec: &DampingSpec, assess: &DangerAssessment) -> f64 {
    let delta_gamma = proximity(assess.gamma_min, spec.gamma_crit);
    (assess.normal.norm_squared() + delta_gamma * delta_gamma).min(1.0)
}

/// Velocity-following damping `D^f`.
pub fn damping_follow(
    f: &Vector,
    spec: &DampingSpec,
    assess: &DangerAssessment,
) -> DampingDecomposition {
    damping_follow_with(f, spec, assess, None)
}

/// [`damping_follow`] with an explicit fallback direction for `f ≈ 0`.
pub fn damping_follow_with(
    f: &Vector,
    spec: &DampingSpec,
    assess: &DangerAssessment,
    fallback: Option<&Vector>,
) -> DampingDecomposition {
    let weight = velocity_preservation_weight(spec, assess);
    follow_decomposition(f, spec, weight, fallback)
}

fn follow_decomposition(
    f: &Vector,
    spec: &DampingSpec,
    preservation: f64,
    fallback: Option<&Vector>,
) -> DampingDecomposition {
    let dim = f.len();
    let direction = follow_direction(f, fallback);
    let basis = complete_basis(std::slice::from_ref(&direction), &direction);
    let mut values = Vector::from_element(
        dim,
        preservation * spec.s_obs + (1.0 - preservation) * spec.s_compliant,
    );
    values[0] = preservation * spec.s_obs + (1.0 - preservation) * spec.s_follow;

    let ramp = (f.norm() / LOW_SPEED_RAMP).min(1.0);
    if ramp < 1.0 {
        for value in values.iter_mut() {
            *value = ramp * *value + (1.0 - ramp) * spec.s_follow;
        }
    }
    DampingDecomposition { basis, values }
}

/// Obstacle damping `D^o`, aligned with the averaged normal.
pub fn damping_obstacle(
    f: &Vector,
    xi_dot: &Vector,
    spec: &DampingSpec,
    assess: &DangerAssessment,
) -> Result<DampingDecomposition> {
    damping_obstacle_with(f, xi_dot, spec, assess, None)
}

pub fn damping_obstacle_with(
    f: &Vector,
    xi_dot: &Vector,
    spec: &DampingSpec,
    assess: &DangerAssessment,
    fallback: Option<&Vector>,
) -> Result<DampingDecomposition> {
    let normal_norm = assess.normal.norm();
    if normal_norm < crate::linalg::MIN_DIRECTION_NORM {
        return Err(Error::DegenerateNormal);
    }
    let q1 = &assess.normal / normal_norm;
    let follow = follow_direction(f, fallback);
    let p = q1.dot(&follow).clamp(-1.0, 1.0);
    let alignment = p.abs();

    let basis = if alignment < 1.0 - ALIGNMENT_TOLERANCE {
        let q2 = (&follow - &q1 * p).normalize();
        complete_basis(&[q1.clone(), q2], &q1)
    } else {
        orthonormal_completion(&q1)?
    };

    let dim = f.len();
    let mut values = Vector::from_element(dim, spec.s_compliant);
    values[0] = if (f - xi_dot).dot(&assess.normal) > 0.0 {
        spec.s_obs
    } else {
        spec.s_compliant
    };
    if dim > 1 {
        values[1] = alignment * spec.s_compliant + (1.0 - alignment) * spec.s_follow;
    }
    Ok(DampingDecomposition { basis, values })
}

fn blend(
    follow: &DampingDecomposition,
    obstacle: Option<&DampingDecomposition>,
    weight: f64,
) -> Matrix {
    match obstacle {
        Some(obstacle) if weight > 0.0 => {
            follow.matrix() * (1.0 - weight) + obstacle.matrix() * weight
        }
        _ => follow.matrix(),
    }
}

/// Blended damping matrix `D(ξ, ξ̇)` of the obstacle-aware controller.
pub fn damping_combined(
    env: &Environment,
    field: &BaseField,
    spec: &DampingSpec,
    xi: &Vector,
    xi_dot: &Vector,
) -> Result<Matrix> {
    let probes = env.probe_all(xi)?;
    let f = modulate_probes(&probes, &field.velocity(xi))?;
    let assess = assess_probes(&probes, xi.len(), spec.gamma_crit)?;
    let follow = damping_follow(&f, spec, &assess);
    let obstacle = if assess.weight > 0.0 {
        Some(damping_obstacle(&f, xi_dot, spec, &assess)?)
    } else {
        None
    };
    Ok(blend(&follow, obstacle.as_ref(), assess.weight))
}

/// `τc = g + D (f − ξ̇)`.
pub fn control_force(plant: &PlantModel, damping: &Matrix, f: &Vector, xi_dot: &Vector) -> Vector {
    &plant.gravity + damping * (f - xi_dot)
}

/// Everything the controller computed for one measured state.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlOutput {
    pub desired_velocity: Vector,
    pub damping: Matrix,
    pub assessment: DangerAssessment,
    pub force: Vector,
}

/// Controller with its per-simulation state (the last valid follow
/// direction, reused when the desired velocity vanishes).
#[derive(Clone, Debug)]
pub struct Controller {
    kind: ControllerKind,
    spec: DampingSpec,
    last_direction: Option<Vector>,
}

impl Controller {
    pub fn new(kind: ControllerKind, spec: DampingSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            kind,
            spec,
            last_direction: None,
        })
    }

    pub fn kind(&self) -> ControllerKind {
        self.kind
    }

    pub fn spec(&self) -> &DampingSpec {
        &self.spec
    }

    pub fn reset(&mut self) {
        self.last_direction = None;
    }

    /// Evaluates the controller at a (possibly noisy) state. Interior points
    /// are evaluated on the surface of the obstacles containing them.
    pub fn evaluate(
        &mut self,
        env: &Environment,
        field: &BaseField,
        plant: &PlantModel,
        xi: &Vector,
        xi_dot: &Vector,
    ) -> Result<ControlOutput> {
        let probes = env.probe_all_clamped(xi)?;
        let f = modulate_probes(&probes, &field.velocity(xi))?;
        let assessment = assess_probes(&probes, xi.len(), self.spec.gamma_crit)?;

        if f.norm() > crate::linalg::MIN_DIRECTION_NORM {
            self.last_direction = Some(f.normalize());
        }
        let fallback = self.last_direction.as_ref();

        let damping = match self.kind {
            ControllerKind::VelocityPreserving => {
                follow_decomposition(&f, &self.spec, 0.0, fallback).matrix()
            }
            ControllerKind::ObstacleAware => {
                let follow = damping_follow_with(&f, &self.spec, &assessment, fallback);
                let obstacle = if assessment.weight > 0.0 {
                    Some(damping_obstacle_with(
                        &f,
                        xi_dot,
                        &self.spec,
                        &assessment,
                        fallback,
                    )?)
                } else {
                    None
                };
                blend(&follow, obstacle.as_ref(), assessment.weight)
            }
        };
        let force = control_force(plant, &damping, &f, xi_dot);
        Ok(ControlOutput {
            desired_velocity: f,
            damping,
            assessment,
            force,
        })
    }
}
