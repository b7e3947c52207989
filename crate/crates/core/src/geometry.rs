//! Star-shaped obstacles and their `Γ` distance fields.
//!
//! Every obstacle carries a reference point `ξr` strictly inside it. For an
//! exterior point `ξ` the ray from `ξr` through `ξ` crosses the surface
//! exactly once, at `ξb`; the distance field is `Γ(ξ) = 1 + ‖ξ − ξb‖ / R0`
//! with `R0 = 1`. Spheres and axis-aligned boxes are supported, both
//! optionally inflated by a margin (Minkowski sum with a ball), which rounds
//! box edges and keeps the surface normal continuous.

use crate::{Error, Result, Vector};

/// Distance scaling `R0` of the `Γ` field.
pub const DISTANCE_SCALING: f64 = 1.0;

/// Points this far (in metres) inside a surface are still accepted as
/// boundary points, absorbing the rounding of the ray cast.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

/// Below this `Γ − 1` an obstacle takes the full averaged-normal weight.
pub const NEAR_SURFACE_EPSILON: f64 = 1e-9;

/// Geometric primitive before the margin is applied.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Sphere {
        center: Vector,
        radius: f64,
    },
    /// Axis-aligned box.
    Box {
        center: Vector,
        half_extents: Vector,
    },
}

impl Shape {
    pub fn center(&self) -> &Vector {
        match self {
            Shape::Sphere { center, .. } | Shape::Box { center, .. } => center,
        }
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    /// Exact Euclidean signed distance to the un-margined primitive.
    fn signed_distance(&self, p: &Vector) -> f64 {
        match self {
            Shape::Sphere { center, radius } => (p - center).norm() - radius,
            Shape::Box {
                center,
                half_extents,
            } => {
                let mut outside = 0.0;
                let mut max_q = f64::NEG_INFINITY;
                for i in 0..p.len() {
                    let q = (p[i] - center[i]).abs() - half_extents[i];
                    if q > 0.0 {
                        outside += q * q;
                    }
                    max_q = max_q.max(q);
                }
                outside.sqrt() + max_q.min(0.0)
            }
        }
    }

    /// Gradient of [`Shape::signed_distance`]; unit length wherever defined.
    fn signed_distance_gradient(&self, p: &Vector) -> Vector {
        match self {
            Shape::Sphere { center, .. } => {
                let d = p - center;
                let norm = d.norm();
                if norm > 0.0 {
                    d / norm
                } else {
                    unit_axis(p.len(), 0)
                }
            }
            Shape::Box {
                center,
                half_extents,
            } => {
                let dim = p.len();
                let mut grad = Vector::zeros(dim);
                let mut any_outside = false;
                let mut max_axis = 0;
                let mut max_q = f64::NEG_INFINITY;
                for i in 0..dim {
                    let offset = p[i] - center[i];
                    let q = offset.abs() - half_extents[i];
                    if q > 0.0 {
                        any_outside = true;
                        grad[i] = q * offset.signum();
                    }
                    if q > max_q {
                        max_q = q;
                        max_axis = i;
                    }
                }
                if any_outside {
                    let norm = grad.norm();
                    grad / norm
                } else {
                    let mut g = Vector::zeros(dim);
                    let offset = p[max_axis] - center[max_axis];
                    g[max_axis] = if offset < 0.0 { -1.0 } else { 1.0 };
                    g
                }
            }
        }
    }
}

/// A star-shaped obstacle: primitive, margin and reference point.
#[derive(Clone, Debug, PartialEq)]
pub struct Obstacle {
    shape: Shape,
    margin: f64,
    reference_point: Vector,
}

/// Everything the field and controller need about one obstacle at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ObstacleProbe {
    /// `Γ` at the evaluated point (≥ 1).
    pub gamma: f64,
    /// Unit surface normal `∇Γ / ‖∇Γ‖`.
    pub normal: Vector,
    /// Unit reference direction `(ξ − ξr) / ‖ξ − ξr‖`.
    pub reference_direction: Vector,
    /// Ray/surface intersection `ξb`.
    pub boundary_point: Vector,
    /// `‖ξ − ξb‖`, negative for interior points.
    pub signed_distance: f64,
}

impl Obstacle {
    pub fn sphere(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::config(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        check_dim(&center)?;
        Ok(Self {
            reference_point: center.clone(),
            shape: Shape::Sphere { center, radius },
            margin: 0.0,
        })
    }

    pub fn aabb(center: Vector, half_extents: Vector) -> Result<Self> {
        check_dim(&center)?;
        if half_extents.len() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                found: half_extents.len(),
            });
        }
        if half_extents.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::config("box half-extents must all be positive"));
        }
        Ok(Self {
            reference_point: center.clone(),
            shape: Shape::Box {
                center,
                half_extents,
            },
            margin: 0.0,
        })
    }

    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        if !(margin >= 0.0) || !margin.is_finite() {
            return Err(Error::config(format!(
                "margin must be non-negative, got {margin}"
            )));
        }
        self.margin = margin;
        self.check_reference()?;
        Ok(self)
    }

    pub fn with_reference_point(mut self, reference_point: Vector) -> Result<Self> {
        if reference_point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: reference_point.len(),
            });
        }
        self.reference_point = reference_point;
        self.check_reference()?;
        Ok(self)
    }

    fn check_reference(&self) -> Result<()> {
        if self.surface_function(&self.reference_point) < -BOUNDARY_TOLERANCE {
            Ok(())
        } else {
            Err(Error::config(
                "reference point must lie strictly inside the obstacle",
            ))
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn reference_point(&self) -> &Vector {
        &self.reference_point
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// Signed Euclidean distance to the margined surface (not the ray distance).
    fn surface_function(&self, p: &Vector) -> f64 {
        self.shape.signed_distance(p) - self.margin
    }

    /// Distance from the reference point to the surface along unit `direction`.
    fn surface_radius(&self, direction: &Vector) -> f64 {
        let reference = &self.reference_point;
        match &self.shape {
            Shape::Sphere { center, radius } => {
                let offset = reference - center;
                let r = radius + self.margin;
                let b = offset.dot(direction);
                let c = offset.norm_squared() - r * r;
                -b + (b * b - c).sqrt()
            }
            Shape::Box {
                center,
                half_extents,
            } => {
                // Exit distance through the box grown by the margin. It is exact
                // without margin and an upper bound otherwise.
                let mut exit = f64::INFINITY;
                for i in 0..direction.len() {
                    let u = direction[i];
                    if u.abs() > 0.0 {
                        let face = center[i] + u.signum() * (half_extents[i] + self.margin);
                        exit = exit.min((face - reference[i]) / u);
                    }
                }
                if self.margin == 0.0 {
                    return exit;
                }
                // The margined distance is convex along the ray and negative at
                // the reference point, so Newton from the upper bound decreases
                // monotonically onto the single crossing.
                let mut t = exit;
                for _ in 0..100 {
                    let p = reference + direction * t;
                    let h = self.surface_function(&p);
                    let slope = self.shape.signed_distance_gradient(&p).dot(direction);
                    if h <= 0.0 || slope <= 0.0 {
                        break;
                    }
                    let next = t - h / slope;
                    if !(next < t) {
                        break;
                    }
                    t = next;
                }
                t
            }
        }
    }

    /// Evaluates `Γ`, normal and boundary point; interior points are reported
    /// through `signed_distance < 0` and evaluated at their boundary point.
    pub fn probe_clamped(&self, xi: &Vector) -> ObstacleProbe {
        let offset = xi - &self.reference_point;
        let rho = offset.norm();
        let direction = if rho > 0.0 {
            offset / rho
        } else {
            unit_axis(xi.len(), 0)
        };
        let radius = self.surface_radius(&direction);
        let boundary_point = &self.reference_point + &direction * radius;
        let signed_distance = rho - radius;
        let gamma = 1.0 + signed_distance.max(0.0) / DISTANCE_SCALING;

        // Γ = 1 + ρ − R(u): ∇Γ = u + (R/ρ) (I − u uᵀ) g / (g·u), g the surface
        // gradient at ξb. Inside, the field is clamped to the boundary value.
        let g = self.shape.signed_distance_gradient(&boundary_point);
        let along = g.dot(&direction);
        let ratio = if signed_distance > 0.0 {
            radius / rho
        } else {
            1.0
        };
        let tangential = &g - &direction * along;
        let gradient = &direction + tangential * (ratio / along);
        let normal = gradient.normalize();

        ObstacleProbe {
            gamma,
            normal,
            reference_direction: direction,
            boundary_point,
            signed_distance,
        }
    }

    /// Like [`Obstacle::probe_clamped`] but rejects interior points.
    pub fn probe(&self, xi: &Vector) -> Result<ObstacleProbe> {
        self.check_point(xi)?;
        let probe = self.probe_clamped(xi);
        if probe.signed_distance < -BOUNDARY_TOLERANCE {
            return Err(Error::InteriorPoint {
                obstacle: 0,
                signed_distance: probe.signed_distance,
            });
        }
        Ok(probe)
    }

    pub fn gamma(&self, xi: &Vector) -> Result<f64> {
        Ok(self.probe(xi)?.gamma)
    }

    pub fn boundary_point(&self, xi: &Vector) -> Result<Vector> {
        Ok(self.probe(xi)?.boundary_point)
    }

    pub fn surface_normal(&self, xi: &Vector) -> Result<Vector> {
        Ok(self.probe(xi)?.normal)
    }

    /// `‖ξ − ξb‖` along the reference ray, negative inside. Defined everywhere.
    pub fn signed_distance(&self, xi: &Vector) -> f64 {
        self.probe_clamped(xi).signed_distance
    }

    /// True if `xi` is strictly inside the margined surface.
    pub fn contains(&self, xi: &Vector) -> bool {
        self.surface_function(xi) < 0.0
    }

    fn check_point(&self, xi: &Vector) -> Result<()> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: xi.len(),
            });
        }
        Ok(())
    }
}

fn check_dim(v: &Vector) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::config("obstacles need at least two dimensions"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::config("obstacle coordinates must be finite"));
    }
    Ok(())
}

fn unit_axis(dim: usize, axis: usize) -> Vector {
    let mut v = Vector::zeros(dim);
    v[axis] = 1.0;
    v
}

/// `Γ` of `obstacle` at `xi`; errors on interior points.
pub fn gamma(obstacle: &Obstacle, xi: &Vector) -> Result<f64> {
    obstacle.gamma(xi)
}

/// Ray/surface intersection `ξb` for `xi`.
pub fn boundary_point(obstacle: &Obstacle, xi: &Vector) -> Result<Vector> {
    obstacle.boundary_point(xi)
}

/// Unit normal `∇Γ / ‖∇Γ‖` at `xi`.
pub fn surface_normal(obstacle: &Obstacle, xi: &Vector) -> Result<Vector> {
    obstacle.surface_normal(xi)
}

/// Ordered collection of obstacles sharing one configuration space.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Environment {
    obstacles: Vec<Obstacle>,
}

/// Closeness of the nearest obstacles at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct DangerAssessment {
    /// Smallest `Γ` over all obstacles (`+∞` without obstacles).
    pub gamma_min: f64,
    /// Averaged normal `n`, a convex combination of unit normals.
    pub normal: Vector,
    /// Danger weight `w ∈ [0, 1]`.
    pub weight: f64,
}

impl Environment {
    pub fn new(obstacles: Vec<Obstacle>) -> Result<Self> {
        if let Some(first) = obstacles.first() {
            let dim = first.dim();
            if let Some(bad) = obstacles.iter().find(|o| o.dim() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: bad.dim(),
                });
            }
        }
        Ok(Self { obstacles })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    /// Probes every obstacle, failing on the first one containing `xi`.
    pub fn probe_all(&self, xi: &Vector) -> Result<Vec<ObstacleProbe>> {
        self.obstacles
            .iter()
            .enumerate()
            .map(|(index, obstacle)| {
                obstacle.probe(xi).map_err(|err| match err {
                    Error::InteriorPoint {
                        signed_distance, ..
                    } => Error::InteriorPoint {
                        obstacle: index,
                        signed_distance,
                    },
                    other => other,
                })
            })
            .collect()
    }

    /// Probes every obstacle, clamping interior points to the surface.
    pub fn probe_all_clamped(&self, xi: &Vector) -> Result<Vec<ObstacleProbe>> {
        self.obstacles
            .iter()
            .map(|obstacle| {
                obstacle.check_point(xi)?;
                Ok(obstacle.probe_clamped(xi))
            })
            .collect()
    }

    /// Minimum signed surface distance over all obstacles (`+∞` if none).
    pub fn signed_distance(&self, xi: &Vector) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.signed_distance(xi))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn assess(&self, xi: &Vector, gamma_crit: f64) -> Result<DangerAssessment> {
        let probes = self.probe_all(xi)?;
        assess_probes(&probes, xi.len(), gamma_crit)
    }
}

/// Danger assessment of `env` at `xi` for critical distance `gamma_crit`.
pub fn assess(env: &Environment, xi: &Vector, gamma_crit: f64) -> Result<DangerAssessment> {
    env.assess(xi, gamma_crit)
}

/// Normalised closeness weights `ŵo ∝ 1 / (Γo − 1)`.
///
/// If any obstacle is within [`NEAR_SURFACE_EPSILON`] of its surface, the
/// first such obstacle takes weight one.
pub fn closeness_weights(probes: &[ObstacleProbe]) -> Vec<f64> {
    let mut weights = vec![0.0; probes.len()];
    if let Some(touching) = probes
        .iter()
        .position(|p| p.gamma - 1.0 < NEAR_SURFACE_EPSILON)
    {
        weights[touching] = 1.0;
        return weights;
    }
    let mut total = 0.0;
    for (weight, probe) in weights.iter_mut().zip(probes) {
        *weight = 1.0 / (probe.gamma - 1.0);
        total += *weight;
    }
    for weight in &mut weights {
        *weight /= total;
    }
    weights
}

/// Scales the danger with distance: `max(0, (Γc − Γ) / (Γc − 1))`.
pub fn proximity(gamma: f64, gamma_crit: f64) -> f64 {
    ((gamma_crit - gamma) / (gamma_crit - 1.0)).max(0.0)
}

pub(crate) fn assess_probes(
    probes: &[ObstacleProbe],
    dim: usize,
    gamma_crit: f64,
) -> Result<DangerAssessment> {
    if !(gamma_crit > 1.0) {
        return Err(Error::Domain(format!(
            "critical gamma must exceed 1, got {gamma_crit}"
        )));
    }
    if probes.is_empty() {
        return Ok(DangerAssessment {
            gamma_min: f64::INFINITY,
            normal: Vector::zeros(dim),
            weight: 0.0,
        });
    }
    let gamma_min = probes.iter().map(|p| p.gamma).fold(f64::INFINITY, f64::min);
    let weights = closeness_weights(probes);
    let mut normal = Vector::zeros(dim);
    for (probe, weight) in probes.iter().zip(&weights) {
        normal.axpy(*weight, &probe.normal, 1.0);
    }
    let weight = (proximity(gamma_min, gamma_crit) * normal.norm()).clamp(0.0, 1.0);
    Ok(DangerAssessment {
        gamma_min,
        normal,
        weight,
    })
}

/// Finite-difference gradient of `Γ`, used by the tests as an oracle.
#[doc(hidden)]
pub fn gamma_gradient_fd(obstacle: &Obstacle, xi: &Vector, step: f64) -> Result<Vector> {
    let mut grad = Vector::zeros(xi.len());
    for i in 0..xi.len() {
        let mut plus = xi.clone();
        let mut minus = xi.clone();
        plus[i] += step;
        minus[i] -= step;
        grad[i] = (obstacle.gamma(&plus)? - obstacle.gamma(&minus)?) / (2.0 * step);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn unit_sphere() -> Obstacle {
        Obstacle::sphere(v(&[0.0, 0.0]), 1.0).unwrap()
    }

    fn margined_box() -> Obstacle {
        Obstacle::aabb(v(&[0.0, 0.0]), v(&[1.0, 1.0]))
            .unwrap()
            .with_margin(0.5)
            .unwrap()
    }

    /// Independent inside test for the margined box: clamp to the box and
    /// compare the Euclidean gap with the margin.
    fn inside_margined_box(p: &Vector, center: &Vector, half: &Vector, margin: f64) -> bool {
        let mut gap = 0.0;
        let mut inside_core = true;
        for i in 0..p.len() {
            let lo = center[i] - half[i];
            let hi = center[i] + half[i];
            let clamped = p[i].clamp(lo, hi);
            if p[i] != clamped {
                inside_core = false;
            }
            gap += (p[i] - clamped).powi(2);
        }
        inside_core || gap.sqrt() < margin
    }

    /// Brute-force ray marching with a fixed small step, refined by bisection.
    fn ray_march_surface(
        reference: &Vector,
        target: &Vector,
        inside: impl Fn(&Vector) -> bool,
    ) -> Vector {
        let dir = (target - reference).normalize();
        let step = 1e-4;
        let mut t = 0.0;
        while inside(&(reference + &dir * (t + step))) {
            t += step;
        }
        let (mut lo, mut hi) = (t, t + step);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if inside(&(reference + &dir * mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        reference + dir * (0.5 * (lo + hi))
    }

    #[test]
    fn sphere_gamma_on_axis() {
        let obstacle = unit_sphere();
        assert_eq!(obstacle.gamma(&v(&[2.0, 0.0])).unwrap(), 2.0);
        assert_eq!(
            obstacle.boundary_point(&v(&[2.0, 0.0])).unwrap(),
            v(&[1.0, 0.0])
        );
        let b = obstacle.boundary_point(&v(&[0.0, 3.0])).unwrap();
        assert!((b - v(&[0.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn gamma_is_one_on_the_margined_surface() {
        let obstacle = margined_box();
        for k in 0..64 {
            let angle = k as f64 * std::f64::consts::TAU / 64.0;
            let far = v(&[5.0 * angle.cos(), 5.0 * angle.sin()]);
            let surface = obstacle.boundary_point(&far).unwrap();
            let gamma = obstacle.gamma(&surface).unwrap();
            assert!((gamma - 1.0).abs() < 1e-9, "angle {angle}: {gamma}");
        }
        let sphere = unit_sphere();
        let point = v(&[0.6, 0.8]);
        assert!((sphere.gamma(&point).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn margined_box_gamma_matches_ray_marching() {
        let obstacle = margined_box();
        let (center, half) = (v(&[0.0, 0.0]), v(&[1.0, 1.0]));
        let xi = v(&[3.0, 0.0]);
        let oracle = ray_march_surface(&center, &xi, |p| {
            inside_margined_box(p, &center, &half, 0.5)
        });
        let expected = 1.0 + (&xi - oracle).norm();
        let gamma = obstacle.gamma(&xi).unwrap();
        assert!((gamma - expected).abs() < 1e-9, "{gamma} vs {expected}");
        assert!((gamma - 2.5).abs() < 1e-12);
    }

    #[test]
    fn off_axis_boundary_point_matches_bisection() {
        let obstacle = margined_box();
        let (center, half) = (v(&[0.0, 0.0]), v(&[1.0, 1.0]));
        for xi in [
            v(&[2.0, 1.7]),
            v(&[-1.9, 2.4]),
            v(&[3.0, -3.1]),
            v(&[0.4, -2.2]),
        ] {
            let oracle = ray_march_surface(&center, &xi, |p| {
                inside_margined_box(p, &center, &half, 0.5)
            });
            let boundary = obstacle.boundary_point(&xi).unwrap();
            assert!(
                (&boundary - &oracle).norm() < 1e-9,
                "{xi}: {boundary} vs {oracle}"
            );
        }
    }

    #[test]
    fn boundary_point_is_a_fixed_point_on_the_surface() {
        let obstacle = unit_sphere();
        let on_surface = v(&[0.0, 1.0]);
        let b = obstacle.boundary_point(&on_surface).unwrap();
        assert!((b - on_surface).norm() < 1e-15);
    }

    #[test]
    fn sphere_normal_is_radial() {
        let obstacle = unit_sphere();
        let n = obstacle.surface_normal(&v(&[0.0, 2.0])).unwrap();
        assert!((n - v(&[0.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn interior_points_are_rejected() {
        let obstacle = unit_sphere();
        let err = obstacle.gamma(&v(&[0.5, 0.0])).unwrap_err();
        assert!(matches!(err, Error::InteriorPoint { .. }));
        assert!(obstacle.signed_distance(&v(&[0.5, 0.0])) < 0.0);
        let env = Environment::new(vec![unit_sphere(), margined_box()]).unwrap();
        let err = env.assess(&v(&[0.0, 0.2]), 3.0).unwrap_err();
        assert!(matches!(err, Error::InteriorPoint { obstacle: 0, .. }));
    }

    #[test]
    fn shape_validation() {
        assert!(Obstacle::sphere(v(&[0.0, 0.0]), 0.0).is_err());
        assert!(Obstacle::aabb(v(&[0.0, 0.0]), v(&[1.0, -1.0])).is_err());
        assert!(unit_sphere().with_margin(-0.1).is_err());
        assert!(unit_sphere().with_reference_point(v(&[1.5, 0.0])).is_err());
        assert!(unit_sphere().with_reference_point(v(&[0.5, 0.0])).is_ok());
    }

    #[test]
    fn off_center_reference_point() {
        let obstacle = unit_sphere().with_reference_point(v(&[0.5, 0.0])).unwrap();
        // ray from (0.5, 0) through (0.5, 2): hits the circle at (0.5, sqrt(0.75))
        let xi = v(&[0.5, 2.0]);
        let expected = 1.0 + 2.0 - 0.75f64.sqrt();
        assert!((obstacle.gamma(&xi).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn assessment_far_from_critical_has_zero_weight() {
        let env = Environment::new(vec![unit_sphere()]).unwrap();
        let at_crit = env.assess(&v(&[3.0, 0.0]), 3.0).unwrap();
        assert_eq!(at_crit.weight, 0.0);
        assert_eq!(at_crit.gamma_min, 3.0);
        let beyond = env.assess(&v(&[0.0, 7.0]), 3.0).unwrap();
        assert_eq!(beyond.weight, 0.0);
    }

    #[test]
    fn averaged_normal_converges_to_closest_normal() {
        let env = Environment::new(vec![
            unit_sphere(),
            Obstacle::sphere(v(&[5.0, 0.0]), 1.0).unwrap(),
        ])
        .unwrap();
        let mut previous = f64::INFINITY;
        for gap in [1e-1, 1e-3, 1e-6, 1e-9, 1e-12] {
            let xi = v(&[0.0, 1.0 + gap]);
            let a = env.assess(&xi, 3.0).unwrap();
            let err = (a.normal - v(&[0.0, 1.0])).norm();
            assert!(err <= previous + 1e-15);
            previous = err;
        }
        assert!(previous < 1e-9);
    }

    #[test]
    fn opposing_obstacles_cancel_the_normal() {
        let env = Environment::new(vec![
            Obstacle::sphere(v(&[-2.0, 0.0]), 1.0).unwrap(),
            Obstacle::sphere(v(&[2.0, 0.0]), 1.0).unwrap(),
        ])
        .unwrap();
        let a = env.assess(&v(&[0.0, 0.0]), 3.0).unwrap();
        assert!(a.normal.norm() < 1e-15);
        assert_eq!(a.weight, 0.0);
        assert_eq!(a.gamma_min, 2.0);
    }

    #[test]
    fn empty_environment() {
        let a = Environment::empty().assess(&v(&[1.0, 2.0]), 3.0).unwrap();
        assert_eq!(a.gamma_min, f64::INFINITY);
        assert_eq!(a.normal, v(&[0.0, 0.0]));
        assert_eq!(a.weight, 0.0);
    }

    #[test]
    fn critical_gamma_must_exceed_one() {
        let env = Environment::new(vec![unit_sphere()]).unwrap();
        assert!(matches!(
            env.assess(&v(&[2.0, 0.0]), 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn touching_obstacles_tie_break_by_order() {
        let env = Environment::new(vec![
            Obstacle::sphere(v(&[-1.0, 0.0]), 1.0).unwrap(),
            Obstacle::sphere(v(&[1.0, 0.0]), 1.0).unwrap(),
        ])
        .unwrap();
        let a = env.assess(&v(&[0.0, 0.0]), 3.0).unwrap();
        assert_eq!(a.normal, v(&[1.0, 0.0]));
        assert_eq!(a.gamma_min, 1.0);
        assert_eq!(a.weight, 1.0);
    }

    fn exterior_point(obstacle: &Obstacle, angle: f64, gap: f64) -> Vector {
        let dir = v(&[angle.cos(), angle.sin()]);
        let surface = obstacle
            .boundary_point(&(obstacle.reference_point() + &dir * 100.0))
            .unwrap();
        surface + dir * gap
    }

    proptest! {
        #[test]
        fn normal_matches_finite_difference_gradient(
            angle in 0.0..std::f64::consts::TAU,
            gap in 0.05..3.0f64,
            margin in 0.0..0.6f64,
            hx in 0.3..2.0f64,
            hy in 0.3..2.0f64,
            rx in -0.2..0.2f64,
            ry in -0.2..0.2f64,
        ) {
            let obstacles = [
                Obstacle::aabb(v(&[0.3, -0.2]), v(&[hx, hy])).unwrap()
                    .with_margin(margin).unwrap()
                    .with_reference_point(v(&[0.3 + rx, -0.2 + ry])).unwrap(),
                Obstacle::sphere(v(&[0.0, 0.0]), hx).unwrap()
                    .with_margin(margin).unwrap()
                    .with_reference_point(v(&[rx, ry])).unwrap(),
            ];
            for obstacle in &obstacles {
                let xi = exterior_point(obstacle, angle, gap);
                let normal = obstacle.surface_normal(&xi).unwrap();
                prop_assert!((normal.norm() - 1.0).abs() < 1e-12);
                let fd = gamma_gradient_fd(obstacle, &xi, 1e-6).unwrap();
                let cos = normal.dot(&fd) / fd.norm();
                prop_assert!(cos > 1.0 - 1e-6, "cos {} at {}", cos, xi);
            }
        }

        #[test]
        fn gamma_grows_along_reference_rays(
            angle in 0.0..std::f64::consts::TAU,
            margin in 0.0..0.5f64,
        ) {
            let obstacle = margined_box().with_margin(margin).unwrap();
            let mut previous = 1.0;
            for k in 0..20 {
                let xi = exterior_point(&obstacle, angle, 0.1 * k as f64);
                let gamma = obstacle.gamma(&xi).unwrap();
                prop_assert!(gamma >= 1.0);
                if k > 0 {
                    prop_assert!(gamma > previous);
                }
                previous = gamma;
            }
        }

        #[test]
        fn boundary_point_is_idempotent(x in -4.0..4.0f64, y in -4.0..4.0f64) {
            let obstacle = margined_box();
            let xi = v(&[x, y]);
            prop_assume!(!obstacle.contains(&xi));
            let once = obstacle.boundary_point(&xi).unwrap();
            let twice = obstacle.boundary_point(&once).unwrap();
            prop_assert!((&once - &twice).norm() < 1e-9);
            prop_assert!((obstacle.gamma(&once).unwrap() - 1.0).abs() < 1e-9);
            // collinear with the reference point and the query
            let a = &xi - obstacle.reference_point();
            let b = &once - obstacle.reference_point();
            prop_assert!((a[0] * b[1] - a[1] * b[0]).abs() < 1e-9 * a.norm());
        }

        #[test]
        fn closeness_weights_are_a_partition_of_unity(
            gaps in proptest::collection::vec(1e-6..10.0f64, 1..6),
        ) {
            let probes: Vec<ObstacleProbe> = gaps
                .iter()
                .enumerate()
                .map(|(i, gap)| {
                    let angle = i as f64;
                    ObstacleProbe {
                        gamma: 1.0 + gap,
                        normal: v(&[angle.cos(), angle.sin()]),
                        reference_direction: v(&[angle.cos(), angle.sin()]),
                        boundary_point: v(&[0.0, 0.0]),
                        signed_distance: *gap,
                    }
                })
                .collect();
            let weights = closeness_weights(&probes);
            let total: f64 = weights.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let a = assess_probes(&probes, 2, 2.5).unwrap();
            prop_assert!(a.normal.norm() <= 1.0 + 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.weight));
        }
    }
}
