//! Nominal desired-velocity fields and obstacle-avoiding modulation.

use crate::geometry::{closeness_weights, Environment, ObstacleProbe};
use crate::linalg::orthonormal_completion;
use crate::{Error, Matrix, Result, Vector};

/// Nominal dynamical system `f^b(ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseField {
    /// `ξa − ξ`, shortened to at most `max_speed`.
    LinearAttractor { attractor: Vector, max_speed: f64 },
    /// Uniform flow `speed · direction`.
    Constant { direction: Vector, speed: f64 },
    /// `R(angle) (ξa − ξ)`, rotating in the plane of the first two axes,
    /// shortened to at most `max_speed`.
    RotatedLinear {
        attractor: Vector,
        angle: f64,
        max_speed: f64,
    },
}

impl BaseField {
    pub fn linear(attractor: Vector, max_speed: f64) -> Self {
        BaseField::LinearAttractor {
            attractor,
            max_speed,
        }
    }

    /// Constant field; `direction` is normalised.
    pub fn constant(direction: Vector, speed: f64) -> Result<Self> {
        let norm = direction.norm();
        if !(norm > 0.0) {
            return Err(Error::ZeroVector(norm));
        }
        Ok(BaseField::Constant {
            direction: direction / norm,
            speed,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            BaseField::LinearAttractor { attractor, .. }
            | BaseField::RotatedLinear { attractor, .. } => attractor.len(),
            BaseField::Constant { direction, .. } => direction.len(),
        }
    }

    /// Upper bound `v^max` on the field magnitude.
    pub fn max_speed(&self) -> f64 {
        match self {
            BaseField::LinearAttractor { max_speed, .. }
            | BaseField::RotatedLinear { max_speed, .. } => *max_speed,
            BaseField::Constant { speed, .. } => speed.abs(),
        }
    }

    pub fn attractor(&self) -> Option<&Vector> {
        match self {
            BaseField::LinearAttractor { attractor, .. }
            | BaseField::RotatedLinear { attractor, .. } => Some(attractor),
            BaseField::Constant { .. } => None,
        }
    }

    pub fn velocity(&self, xi: &Vector) -> Vector {
        match self {
            BaseField::LinearAttractor {
                attractor,
                max_speed,
            } => cap(attractor - xi, *max_speed),
            BaseField::Constant { direction, speed } => direction * *speed,
            BaseField::RotatedLinear {
                attractor,
                angle,
                max_speed,
            } => {
                let mut v = attractor - xi;
                let (sin, cos) = angle.sin_cos();
                let (a, b) = (v[0], v[1]);
                v[0] = cos * a - sin * b;
                v[1] = sin * a + cos * b;
                cap(v, *max_speed)
            }
        }
    }
}

fn cap(v: Vector, max_speed: f64) -> Vector {
    let norm = v.norm();
    if norm > max_speed {
        v * (max_speed / norm)
    } else {
        v
    }
}

/// Nominal velocity of `field` at `xi`.
pub fn base_velocity(field: &BaseField, xi: &Vector) -> Vector {
    field.velocity(xi)
}

/// Stretching factors `(λr, λe) = (1 − 1/Γ, 1 + 1/Γ)`.
pub fn modulation_eigenvalues(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma >= 1.0) {
        return Err(Error::Domain(format!(
            "gamma must be at least 1, got {gamma}"
        )));
    }
    Ok((1.0 - 1.0 / gamma, 1.0 + 1.0 / gamma))
}

/// `E diag(λr, λe, …, λe) E⁻¹` for one obstacle.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationDecomposition {
    /// Columns `[r, e1, …, e_{N−1}]`.
    pub basis: Matrix,
    pub lambda_reference: f64,
    pub lambda_tangent: f64,
}

impl ModulationDecomposition {
    pub fn from_probe(probe: &ObstacleProbe) -> Result<Self> {
        let (lambda_reference, lambda_tangent) = modulation_eigenvalues(probe.gamma)?;
        let tangents = orthonormal_completion(&probe.normal)?;
        let mut basis = tangents;
        basis.set_column(0, &probe.reference_direction);
        Ok(Self {
            basis,
            lambda_reference,
            lambda_tangent,
        })
    }

    pub fn matrix(&self) -> Result<Matrix> {
        let dim = self.basis.nrows();
        let mut diagonal = Vector::from_element(dim, self.lambda_tangent);
        diagonal[0] = self.lambda_reference;
        let inverse = self
            .basis
            .clone()
            .try_inverse()
            .ok_or(Error::SingularBasis(f64::INFINITY))?;
        Ok(&self.basis * Matrix::from_diagonal(&diagonal) * inverse)
    }

    pub fn apply(&self, velocity: &Vector) -> Result<Vector> {
        let coefficients = self
            .basis
            .clone()
            .lu()
            .solve(velocity)
            .ok_or(Error::SingularBasis(f64::INFINITY))?;
        let mut scaled = coefficients * self.lambda_tangent;
        scaled[0] *= self.lambda_reference / self.lambda_tangent;
        Ok(&self.basis * scaled)
    }
}

/// Obstacle-avoiding velocity `f(ξ)` of `field` in `env`.
pub fn modulate(env: &Environment, field: &BaseField, xi: &Vector) -> Result<Vector> {
    let probes = env.probe_all(xi)?;
    modulate_probes(&probes, &field.velocity(xi))
}

/// Modulates `nominal` given already evaluated obstacle probes.
///
/// Several obstacles are combined with the same `1 / (Γo − 1)` closeness
/// weights as the averaged normal: the direction is the renormalised
/// weighted sum of the per-obstacle directions and the magnitude the
/// weighted mean of the per-obstacle magnitudes.
pub fn modulate_probes(probes: &[ObstacleProbe], nominal: &Vector) -> Result<Vector> {
    match probes {
        [] => Ok(nominal.clone()),
        [single] => ModulationDecomposition::from_probe(single)?.apply(nominal),
        _ => {
            let weights = closeness_weights(probes);
            let dim = nominal.len();
            let mut direction = Vector::zeros(dim);
            let mut weighted = Vector::zeros(dim);
            let mut magnitude = 0.0;
            for (probe, weight) in probes.iter().zip(&weights) {
                if *weight == 0.0 {
                    continue;
                }
                let velocity = ModulationDecomposition::from_probe(probe)?.apply(nominal)?;
                let speed = velocity.norm();
                if speed > 0.0 {
                    direction.axpy(*weight / speed, &velocity, 1.0);
                }
                weighted.axpy(*weight, &velocity, 1.0);
                magnitude += weight * speed;
            }
            let norm = direction.norm();
            if norm < 1e-12 {
                Ok(weighted)
            } else {
                Ok(direction * (magnitude / norm))
            }
        }
    }
}
