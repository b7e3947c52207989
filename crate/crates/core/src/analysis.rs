//! Checks for passivity, the discrete-time damping limit and the collision
//! bound, plus statistics for comparing controllers.

use std::fmt::Write as _;

use crate::controller::{DampingDecomposition, DampingSpec, PlantModel};
use crate::linalg::{condition_number, min_eigenvalue, symmetric_eigenvalues};
use crate::simulator::{format_float, mean_and_std, RunMetrics, SweepResult, TrajectoryRecord};
use crate::{Error, Matrix, Result, Vector};

/// Condition number above which a damping basis counts as singular.
pub const MAX_BASIS_CONDITION: f64 = 1e8;

/// `ξ̇ᵀ D (ξ̇ − f)`: power removed by the controller. Negative values are
/// the possibly non-passive region.
pub fn dissipation(xi_dot: &Vector, f: &Vector, damping: &Matrix) -> f64 {
    xi_dot.dot(&(damping * (xi_dot - f)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PassivitySample {
    pub xi_dot: Vector,
    pub f: Vector,
    pub damping: Matrix,
    pub dissipation: f64,
}

impl PassivitySample {
    pub fn new(xi_dot: Vector, f: Vector, damping: Matrix) -> Self {
        let dissipation = dissipation(&xi_dot, &f, &damping);
        Self {
            xi_dot,
            f,
            damping,
            dissipation,
        }
    }

    pub fn is_passive(&self) -> bool {
        self.dissipation >= 0.0
    }
}

/// Kinetic energy `W = ½ ξ̇ᵀ M ξ̇` at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub energy: f64,
}

pub fn energy_series(record: &TrajectoryRecord, plant: &PlantModel) -> Vec<EnergySample> {
    record
        .rows
        .iter()
        .map(|row| EnergySample {
            t: row.t,
            energy: plant.kinetic_energy(&row.xi_dot),
        })
        .collect()
}

/// Boundary of the non-passive region `ξ̇ᵀ D (ξ̇ − f) < 0` for
/// `D = Q diag(s) Qᵀ`.
///
/// In velocity space it is an ellipse centred at `f/2` with principal axes
/// along the columns of `Q` and semi-axes `√(c/sᵢ)`, `c = Σ sᵢ gᵢ²/4`,
/// `g = Qᵀ f`. In the coordinates `v̄ = √S Qᵀ ξ̇` it is the circle through
/// the origin and `f̄ = √S Qᵀ f`: centre `f̄/2`, radius `‖f̄‖/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PassivityRegion {
    pub center: Vector,
    pub axes: Matrix,
    pub semi_axes: Vector,
    pub transformed_center: Vector,
    pub transformed_radius: f64,
    values: Vector,
}

impl PassivityRegion {
    /// `true` when `f = 0` and the region collapses to the origin.
    pub fn is_degenerate(&self) -> bool {
        self.transformed_radius == 0.0
    }

    /// Velocity-space point on the boundary for a unit direction `u`
    /// expressed in the principal axes.
    pub fn boundary_point(&self, u: &Vector) -> Vector {
        &self.center + &self.axes * self.semi_axes.component_mul(u)
    }

    /// `n` equally spaced boundary points of a planar region.
    pub fn sample_boundary(&self, n: usize) -> Result<Vec<Vector>> {
        if self.center.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: self.center.len(),
            });
        }
        Ok((0..n)
            .map(|k| {
                let angle = std::f64::consts::TAU * k as f64 / n as f64;
                self.boundary_point(&Vector::from_column_slice(&[angle.cos(), angle.sin()]))
            })
            .collect())
    }

    /// `v̄ = √S Qᵀ ξ̇`.
    pub fn transform(&self, xi_dot: &Vector) -> Vector {
        (self.axes.transpose() * xi_dot).component_mul(&self.values.map(f64::sqrt))
    }

    /// Strictly inside the non-passive region, decided in the transformed
    /// coordinates.
    pub fn contains(&self, xi_dot: &Vector) -> bool {
        (self.transform(xi_dot) - &self.transformed_center).norm() < self.transformed_radius
    }
}

/// Non-passive region of the damping matrix `Q S Qᵀ` for desired velocity `f`.
pub fn passivity_boundary(f: &Vector, damping: &DampingDecomposition) -> Result<PassivityRegion> {
    let q = &damping.basis;
    let dim = f.len();
    if q.nrows() != dim || q.ncols() != dim || damping.values.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: q.nrows(),
        });
    }
    let condition = condition_number(q);
    if !(condition <= MAX_BASIS_CONDITION) {
        return Err(Error::SingularBasis(condition));
    }
    if (q.transpose() * q - Matrix::identity(dim, dim)).amax() > 1e-9 {
        return Err(Error::Domain("damping basis must be orthonormal".into()));
    }
    if damping.values.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Domain("damping values must be positive".into()));
    }
    let g = q.transpose() * f;
    let c: f64 = damping
        .values
        .iter()
        .zip(g.iter())
        .map(|(s, gi)| s * gi * gi / 4.0)
        .sum();
    let semi_axes = damping.values.map(|s| (c / s).sqrt());
    let f_bar = g.component_mul(&damping.values.map(f64::sqrt));
    Ok(PassivityRegion {
        center: f / 2.0,
        axes: q.clone(),
        semi_axes,
        transformed_center: &f_bar / 2.0,
        transformed_radius: f_bar.norm() / 2.0,
        values: damping.values.clone(),
    })
}

/// Eigen-decomposes a symmetric damping matrix (ascending values).
pub fn decompose_damping(damping: &Matrix) -> Result<DampingDecomposition> {
    crate::linalg::check_spd(damping, "damping matrix")?;
    let eig = damping.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let basis = Matrix::from_columns(
        &order
            .iter()
            .map(|i| eig.eigenvectors.column(*i))
            .collect::<Vec<_>>(),
    );
    let values = Vector::from_iterator(order.len(), order.iter().map(|i| eig.eigenvalues[*i]));
    Ok(DampingDecomposition { basis, values })
}

/// Plot-ready grid of `(vx, vy, dissipation)` over `[-extent, extent]²`.
pub fn passivity_grid_csv(
    f: &Vector,
    damping: &Matrix,
    extent: f64,
    resolution: usize,
) -> Result<String> {
    if f.len() != 2 || damping.nrows() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: f.len(),
        });
    }
    if resolution < 2 {
        return Err(Error::config("grid resolution must be at least 2"));
    }
    let mut out = String::from("vx,vy,dissipation\n");
    for i in 0..resolution {
        for j in 0..resolution {
            let vx = -extent + 2.0 * extent * i as f64 / (resolution - 1) as f64;
            let vy = -extent + 2.0 * extent * j as f64 / (resolution - 1) as f64;
            let d = dissipation(&Vector::from_column_slice(&[vx, vy]), f, damping);
            writeln!(
                out,
                "{},{},{}",
                format_float(vx),
                format_float(vy),
                format_float(d)
            )
            .unwrap();
        }
    }
    Ok(out)
}

/// Largest damping value `2 min eig(M) / Δt` for which explicit Euler keeps
/// the velocity error bounded.
pub fn discrete_damping_limit(mass: &Matrix, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    crate::linalg::check_spd(mass, "mass matrix")?;
    Ok(2.0 * min_eigenvalue(mass) / dt)
}

/// Per-step factor `1 − Δt s / m` of the scalar velocity error under
/// explicit Euler.
pub fn velocity_error_multiplier(s: f64, mass: f64, dt: f64) -> f64 {
    1.0 - dt * s / mass
}

/// Largest impact speed towards a flat wall at `distance` that the follow
/// damping can absorb: `s^f d / m`.
pub fn collision_impulse_bound(spec: &DampingSpec, mass: f64, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!(
            "distance must be positive, got {distance}"
        )));
    }
    if !(mass > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {mass}")));
    }
    Ok(spec.s_follow * distance / mass)
}

/// Maximum travel after an impact of speed `impact_speed`: `v m / s^f`.
pub fn displacement_bound(spec: &DampingSpec, mass: f64, impact_speed: f64) -> f64 {
    impact_speed.abs() * mass / spec.s_follow
}

/// Largest mass eigenvalue, the `m` used by the collision bound.
pub fn collision_mass(mass: &Matrix) -> f64 {
    symmetric_eigenvalues(mass)
        .last()
        .copied()
        .unwrap_or(f64::NAN)
}

/// Mean ± sample deviation of the run metrics of one controller.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerStats {
    pub label: String,
    pub runs: usize,
    pub mean_min_distance: f64,
    pub std_min_distance: f64,
    pub mean_max_force: f64,
    pub std_max_force: f64,
    pub collisions: usize,
}

impl ControllerStats {
    pub fn from_runs(label: &str, runs: &[RunMetrics]) -> Self {
        let distances: Vec<f64> = runs.iter().map(|r| r.min_signed_distance).collect();
        let forces: Vec<f64> = runs.iter().map(|r| r.max_control_force).collect();
        let (mean_min_distance, std_min_distance) = mean_and_std(&distances);
        let (mean_max_force, std_max_force) = mean_and_std(&forces);
        Self {
            label: label.to_string(),
            runs: runs.len(),
            mean_min_distance,
            std_min_distance,
            mean_max_force,
            std_max_force,
            collisions: runs.iter().filter(|r| r.collided()).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ControllerStats>,
}

/// Side-by-side statistics of two equally sized sets of runs.
pub fn compare_controllers(
    (label_a, runs_a): (&str, &[RunMetrics]),
    (label_b, runs_b): (&str, &[RunMetrics]),
) -> Result<Comparison> {
    if runs_a.len() != runs_b.len() {
        return Err(Error::config(format!(
            "epoch counts differ: {} vs {}",
            runs_a.len(),
            runs_b.len()
        )));
    }
    Ok(Comparison {
        rows: vec![
            ControllerStats::from_runs(label_a, runs_a),
            ControllerStats::from_runs(label_b, runs_b),
        ],
    })
}

impl Comparison {
    /// Aligned table, distances in mm and forces in N.
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(0)
            .max(10);
        let mut out = format!(
            "{:<width$}  {:>24}  {:>20}  {:>10}\n",
            "controller", "closest distance [mm]", "maximum force [N]", "collisions"
        );
        for row in &self.rows {
            let distance = format!(
                "{:.1} ± {:.1}",
                row.mean_min_distance * 1000.0,
                row.std_min_distance * 1000.0
            );
            let force = format!("{:.2} ± {:.2}", row.mean_max_force, row.std_max_force);
            writeln!(
                out,
                "{:<width$}  {:>24}  {:>20}  {:>10}",
                row.label,
                distance,
                force,
                format!("{}/{}", row.collisions, row.runs)
            )
            .unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "controller,runs,mean_min_distance_m,std_min_distance_m,mean_max_force_n,std_max_force_n,collisions\n",
        );
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.label,
                row.runs,
                format_float(row.mean_min_distance),
                format_float(row.std_min_distance),
                format_float(row.mean_max_force),
                format_float(row.std_max_force),
                row.collisions
            )
            .unwrap();
        }
        out
    }
}

/// Per-level statistics of several sweeps over the same levels, one column
/// pair per controller.
pub fn sweep_table_csv(sweeps: &[&SweepResult]) -> Result<String> {
    let Some(first) = sweeps.first() else {
        return Ok(String::new());
    };
    for sweep in sweeps {
        if sweep.levels.len() != first.levels.len()
            || sweep
                .levels
                .iter()
                .zip(&first.levels)
                .any(|(a, b)| a.level != b.level)
        {
            return Err(Error::config("sweeps must share the same noise levels"));
        }
    }
    let mut out = format!("{}_std", first.channel.label());
    for sweep in sweeps {
        let label = sweep.controller.label();
        write!(
            out,
            ",{label}_mean_min_distance,{label}_std_min_distance,{label}_collisions"
        )
        .unwrap();
    }
    out.push('\n');
    for (i, level) in first.levels.iter().enumerate() {
        out.push_str(&format_float(level.level));
        for sweep in sweeps {
            let stats = &sweep.levels[i];
            let collisions = stats.runs.iter().filter(|r| r.collided()).count();
            write!(
                out,
                ",{},{},{}",
                format_float(stats.mean_min_distance),
                format_float(stats.std_min_distance),
                collisions
            )
            .unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Aligned text version of [`sweep_table_csv`], distances in mm.
pub fn sweep_table_text(sweeps: &[&SweepResult]) -> Result<String> {
    sweep_table_csv(sweeps)?;
    let Some(first) = sweeps.first() else {
        return Ok(String::new());
    };
    let mut out = format!("{:>12}", format!("std [{}]", first.channel.unit()));
    for sweep in sweeps {
        write!(
            out,
            "  {:>30}",
            format!("{} [mm]", sweep.controller.label())
        )
        .unwrap();
    }
    out.push('\n');
    for (i, level) in first.levels.iter().enumerate() {
        write!(out, "{:>12.4}", level.level).unwrap();
        for sweep in sweeps {
            let stats = &sweep.levels[i];
            let cell = format!(
                "{:.1} ± {:.1}",
                stats.mean_min_distance * 1000.0,
                stats.std_min_distance * 1000.0
            );
            write!(out, "  {cell:>30}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Structured-text summary of single runs, one table per trajectory.
pub fn run_summary_toml(
    name: &str,
    controller: &str,
    seed: u64,
    records: &[TrajectoryRecord],
) -> String {
    let mut out = format!("name = \"{name}\"\ncontroller = \"{controller}\"\nseed = {seed}\n");
    for (i, record) in records.iter().enumerate() {
        let m = &record.metrics;
        write!(
            out,
            "\n[[runs]]\nstart = {i}\nsteps = {}\nmin_signed_distance = {}\nmax_control_force = {}\ncollided = {}\ndiverged = {}\n",
            m.steps,
            toml_float(m.min_signed_distance),
            toml_float(m.max_control_force),
            m.collided(),
            m.diverged
        )
        .unwrap();
        if let Some(d) = record.divergence {
            write!(
                out,
                "divergence_step = {}\ndivergence_time = {}\n",
                d.step,
                toml_float(d.time)
            )
            .unwrap();
        }
    }
    out
}

/// Structured-text summary of sweeps: per level mean, std and epochs.
pub fn sweep_summary_toml(name: &str, sweeps: &[&SweepResult]) -> String {
    let mut out = format!("name = \"{name}\"\n");
    for sweep in sweeps {
        write!(
            out,
            "\n[[sweeps]]\ncontroller = \"{}\"\nchannel = \"{}\"\nseed = {}\nepochs = {}\n",
            sweep.controller.label(),
            sweep.channel.label(),
            sweep.seed,
            sweep.epochs
        )
        .unwrap();
        for level in &sweep.levels {
            write!(
                out,
                "\n[[sweeps.levels]]\nstd = {}\nmean_min_distance = {}\nstd_min_distance = {}\ncollisions = {}\n",
                toml_float(level.level),
                toml_float(level.mean_min_distance),
                toml_float(level.std_min_distance),
                level.runs.iter().filter(|r| r.collided()).count()
            )
            .unwrap();
        }
    }
    out
}

fn toml_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format_float(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn metrics(distance: f64, force: f64) -> RunMetrics {
        RunMetrics {
            min_signed_distance: distance,
            max_control_force: force,
            steps: 10,
            diverged: false,
        }
    }

    #[test]
    fn dissipation_examples() {
        let eye = Matrix::identity(2, 2);
        assert_eq!(dissipation(&v(&[1.0, 1.0]), &v(&[1.0, 0.0]), &eye), 1.0);
        assert!((dissipation(&v(&[0.5, 0.3]), &v(&[1.0, 0.0]), &eye) + 0.16).abs() < 1e-15);
        assert_eq!(dissipation(&v(&[1.0, 0.0]), &v(&[1.0, 0.0]), &eye), 0.0);
    }

    #[test]
    fn identity_damping_gives_the_circle() {
        let region =
            passivity_boundary(&v(&[1.0, 0.0]), &DampingDecomposition::uniform(2, 1.0)).unwrap();
        assert_eq!(region.center, v(&[0.5, 0.0]));
        assert!((region.semi_axes - v(&[0.5, 0.5])).amax() < 1e-15);
        assert_eq!(region.transformed_radius, 0.5);
    }

    #[test]
    fn zero_field_is_degenerate() {
        let region =
            passivity_boundary(&v(&[0.0, 0.0]), &DampingDecomposition::uniform(2, 3.0)).unwrap();
        assert!(region.is_degenerate());
        assert!(!region.contains(&v(&[0.0, 0.0])));
        assert!(!region.contains(&v(&[0.1, -0.2])));
    }

    #[test]
    fn anisotropic_boundary_has_zero_dissipation() {
        let decomposition = DampingDecomposition {
            basis: Matrix::identity(2, 2),
            values: v(&[4.0, 1.0]),
        };
        let f = v(&[1.0, 0.0]);
        let region = passivity_boundary(&f, &decomposition).unwrap();
        let d = decomposition.matrix();
        for point in region.sample_boundary(360).unwrap() {
            assert!(dissipation(&point, &f, &d).abs() < 1e-9);
            let bar = region.transform(&point);
            assert!(
                ((bar - &region.transformed_center).norm() - region.transformed_radius).abs()
                    < 1e-9
            );
        }
    }

    #[test]
    fn singular_basis_is_rejected() {
        let decomposition = DampingDecomposition {
            basis: Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1e-10]),
            values: v(&[1.0, 1.0]),
        };
        assert!(matches!(
            passivity_boundary(&v(&[1.0, 0.0]), &decomposition),
            Err(Error::SingularBasis(_))
        ));
    }

    #[test]
    fn damping_limits() {
        assert!(
            (discrete_damping_limit(&Matrix::identity(2, 2), 0.01).unwrap() - 200.0).abs() < 1e-9
        );
        let mass = Matrix::from_diagonal(&v(&[2.0, 8.0]));
        assert!((discrete_damping_limit(&mass, 0.1).unwrap() - 40.0).abs() < 1e-9);
        assert!(discrete_damping_limit(&mass, 0.0).is_err());
        assert!(velocity_error_multiplier(190.0, 1.0, 0.01).abs() < 1.0);
        assert!(velocity_error_multiplier(210.0, 1.0, 0.01).abs() > 1.0);
    }

    #[test]
    fn impulse_bound_arithmetic() {
        let spec = DampingSpec::new(200.0, 100.0, 10.0, 3.0).unwrap();
        assert!((collision_impulse_bound(&spec, 1.0, 0.5).unwrap() - 50.0).abs() < 1e-12);
        assert!((displacement_bound(&spec, 1.0, 50.0) - 0.5).abs() < 1e-12);
        assert!(collision_impulse_bound(&spec, 1.0, 0.0).is_err());
        assert_eq!(collision_mass(&Matrix::from_diagonal(&v(&[2.0, 8.0]))), 8.0);
    }

    #[test]
    fn comparison_statistics_match_hand_computation() {
        let a = [metrics(0.010, 5.0), metrics(0.030, 7.0)];
        let b = [metrics(-0.002, 3.0), metrics(0.004, 3.0)];
        let table = compare_controllers(("aware", &a), ("baseline", &b)).unwrap();
        let aware = &table.rows[0];
        assert!((aware.mean_min_distance - 0.020).abs() < 1e-15);
        // sample deviation of {0.01, 0.03}
        assert!((aware.std_min_distance - 0.02f64.hypot(0.0) / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(aware.mean_max_force, 6.0);
        assert_eq!(table.rows[1].collisions, 1);
        assert_eq!(table.rows[1].std_max_force, 0.0);
        assert!(table.to_text().contains("20.0 ± 14.1"));
        assert_eq!(table.to_csv().lines().count(), 3);
        assert!(compare_controllers(("a", &a), ("b", &b[..1])).is_err());
    }

    #[test]
    fn identical_runs_give_identical_stats() {
        let a = [metrics(0.1, 1.0), metrics(0.2, 4.0), metrics(-0.1, 2.0)];
        let table = compare_controllers(("x", &a), ("x", &a)).unwrap();
        assert_eq!(table.rows[0], table.rows[1]);
    }

    #[test]
    fn summaries_are_valid_toml() {
        use crate::controller::ControllerKind;
        use crate::simulator::{LevelStats, NoiseChannel};
        let sweep = SweepResult {
            controller: ControllerKind::ObstacleAware,
            channel: NoiseChannel::Velocity,
            seed: 4,
            epochs: 2,
            levels: vec![LevelStats::from_runs(
                0.5,
                vec![metrics(0.1, 1.0), metrics(-0.1, 2.0)],
            )],
        };
        let text = sweep_summary_toml("demo", &[&sweep]);
        let value: toml::Value = toml::from_str(&text).unwrap();
        let level = &value["sweeps"][0]["levels"][0];
        assert_eq!(level["collisions"].as_integer(), Some(1));
        assert_eq!(level["mean_min_distance"].as_float(), Some(0.0));
        let record = TrajectoryRecord {
            dim: 2,
            rows: vec![],
            metrics: metrics(f64::INFINITY, 0.0),
            divergence: None,
        };
        let value: toml::Value =
            toml::from_str(&run_summary_toml("demo", "aware", 1, &[record])).unwrap();
        assert_eq!(
            value["runs"][0]["min_signed_distance"].as_float(),
            Some(f64::INFINITY)
        );
    }

    #[test]
    fn grid_has_expected_shape() {
        let csv = passivity_grid_csv(&v(&[1.0, 0.0]), &Matrix::identity(2, 2), 1.0, 5).unwrap();
        assert_eq!(csv.lines().count(), 26);
        assert!(csv.starts_with("vx,vy,dissipation\n"));
    }

    #[test]
    fn decomposition_reassembles() {
        let d = Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let decomposition = decompose_damping(&d).unwrap();
        assert!((decomposition.matrix() - d).amax() < 1e-12);
        assert!(decomposition.values[0] <= decomposition.values[1]);
    }

    proptest! {
        #[test]
        fn thale_circle_equivalence(fx in -3.0..3.0f64, fy in -3.0..3.0f64, vx in -4.0..4.0f64, vy in -4.0..4.0f64) {
            let f = v(&[fx, fy]);
            let xi_dot = v(&[vx, vy]);
            let d = dissipation(&xi_dot, &f, &Matrix::identity(2, 2));
            let margin = (&xi_dot - &f / 2.0).norm_squared() - f.norm_squared() / 4.0;
            // d equals the margin algebraically; skip the measure-zero shell
            prop_assume!(margin.abs() > 1e-9);
            prop_assert_eq!(d < 0.0, margin < 0.0);
        }

        #[test]
        fn outside_speed_ball_is_passive(fx in -3.0..3.0f64, fy in -3.0..3.0f64, angle in 0.0..6.3f64, scale in 1.0..3.0f64) {
            let f = v(&[fx, fy]);
            let xi_dot = v(&[angle.cos(), angle.sin()]) * (f.norm() * scale);
            prop_assert!(dissipation(&xi_dot, &f, &Matrix::identity(2, 2)) >= -1e-12);
        }

        #[test]
        fn transformed_region_matches_dissipation(
            theta in 0.0..3.2f64, s1 in 0.1..50.0f64, s2 in 0.1..50.0f64,
            fx in -2.0..2.0f64, fy in -2.0..2.0f64, vx in -3.0..3.0f64, vy in -3.0..3.0f64,
        ) {
            let (c, s) = (theta.cos(), theta.sin());
            let decomposition = DampingDecomposition {
                basis: Matrix::from_row_slice(2, 2, &[c, -s, s, c]),
                values: v(&[s1, s2]),
            };
            let f = v(&[fx, fy]);
            let xi_dot = v(&[vx, vy]);
            let region = passivity_boundary(&f, &decomposition).unwrap();
            let d = dissipation(&xi_dot, &f, &decomposition.matrix());
            prop_assume!(d.abs() > 1e-9);
            prop_assert_eq!(region.contains(&xi_dot), d < 0.0);
        }
    }
}
