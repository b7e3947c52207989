//! Discrete-time point-mass plant driven by the damping controller.
//!
//! One step: sample noise, evaluate the controller on the measured state,
//! then integrate
//!
//! ```text
//! ξ_{t+1}  = ξ_t + Δt ξ̇_t
//! ξ̇_{t+1} = ξ̇_t + Δt M⁻¹ (τc − g + τe)
//! ```
//!
//! with explicit Euler, or with the damping term taken implicitly
//! (see [`Integrator::SemiImplicit`]).

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::controller::{Controller, ControllerKind, DampingSpec, PlantModel};
use crate::flowfield::BaseField;
use crate::geometry::Environment;
use crate::{Error, Result, Vector};

/// Position, velocity and time of the agent.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantState {
    pub xi: Vector,
    pub xi_dot: Vector,
    pub t: f64,
}

impl PlantState {
    pub fn at_rest(xi: Vector) -> Self {
        let dim = xi.len();
        Self {
            xi,
            xi_dot: Vector::zeros(dim),
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self
                .xi
                .iter()
                .chain(self.xi_dot.iter())
                .all(|x| x.is_finite())
    }
}

/// Constant external force over `[start, start + duration)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Impulse {
    pub start: f64,
    pub duration: f64,
    pub force: Vector,
}

impl Impulse {
    /// Single-step impulse producing the impact velocity `v` on mass `M`.
    pub fn from_impact_velocity(
        plant: &PlantModel,
        start: f64,
        dt: f64,
        velocity: &Vector,
    ) -> Self {
        Self {
            start,
            duration: dt,
            force: &plant.mass * velocity / dt,
        }
    }

    /// `v^I = M⁻¹ τe · duration`.
    pub fn impact_velocity(&self, plant: &PlantModel) -> Result<Vector> {
        let velocity = plant
            .mass
            .clone()
            .lu()
            .solve(&self.force)
            .ok_or_else(|| Error::Domain("mass matrix is singular".into()))?;
        Ok(velocity * self.duration)
    }

    // Active on step k when t_k lies in the window, with half a step of slack
    // so that round-off in t does not add or drop a step.
    fn active_at(&self, t: f64, dt: f64) -> bool {
        let probe = t + 0.5 * dt;
        probe > self.start && probe <= self.start + self.duration
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DisturbanceSchedule {
    pub impulses: Vec<Impulse>,
}

impl DisturbanceSchedule {
    pub fn new(impulses: Vec<Impulse>) -> Self {
        Self { impulses }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self, dim: usize, dt: f64) -> Result<()> {
        let mut windows: Vec<(f64, f64)> = Vec::with_capacity(self.impulses.len());
        for (i, impulse) in self.impulses.iter().enumerate() {
            if impulse.force.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: impulse.force.len(),
                });
            }
            if !impulse.start.is_finite() || impulse.start < 0.0 {
                return Err(Error::config(format!(
                    "impulse {i}: start must be a finite time >= 0"
                )));
            }
            if !(impulse.duration >= dt * (1.0 - 1e-9)) || !impulse.duration.is_finite() {
                return Err(Error::config(format!(
                    "impulse {i}: duration {} is shorter than the time step {dt}",
                    impulse.duration
                )));
            }
            if impulse.force.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(format!("impulse {i}: force must be finite")));
            }
            windows.push((impulse.start, impulse.start + impulse.duration));
        }
        windows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in windows.windows(2) {
            if pair[1].0 < pair[0].1 - 1e-12 {
                return Err(Error::config("impulse windows overlap"));
            }
        }
        Ok(())
    }

    /// External force applied during the step starting at `t`.
    pub fn force_at(&self, t: f64, dt: f64, dim: usize) -> Vector {
        let mut force = Vector::zeros(dim);
        for impulse in self.impulses.iter().filter(|i| i.active_at(t, dt)) {
            force += &impulse.force;
        }
        force
    }
}

/// Where the Gaussian noise enters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum NoiseMode {
    /// Only the controller sees the perturbed state.
    #[default]
    Measurement,
    /// The perturbation is applied to the true state before the controller
    /// reads it.
    Process,
}

/// Zero-mean Gaussian noise with the given standard deviations.
///
/// Positions and velocities draw from separate ChaCha8 streams of the same
/// seed; samples are Ziggurat standard normals (`rand_distr::StandardNormal`)
/// scaled by the deviation. A zero deviation draws nothing.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseSpec {
    pub velocity_std: f64,
    pub position_std: f64,
    pub seed: u64,
    pub mode: NoiseMode,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("velocity_std", self.velocity_std),
            ("position_std", self.position_std),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::config(format!(
                    "{name} must be finite and >= 0, got {value}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

const POSITION_STREAM: u64 = 0;
const VELOCITY_STREAM: u64 = 1;

/// Per-run noise generator.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    spec: NoiseSpec,
    position: ChaCha8Rng,
    velocity: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(spec: NoiseSpec) -> Self {
        let mut position = ChaCha8Rng::seed_from_u64(spec.seed);
        position.set_stream(POSITION_STREAM);
        let mut velocity = ChaCha8Rng::seed_from_u64(spec.seed);
        velocity.set_stream(VELOCITY_STREAM);
        Self {
            spec,
            position,
            velocity,
        }
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    fn draw(rng: &mut ChaCha8Rng, std: f64, dim: usize) -> Option<Vector> {
        if std == 0.0 {
            return None;
        }
        Some(Vector::from_fn(dim, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        }))
    }

    /// Returns `(position noise, velocity noise)`, `None` for silent channels.
    pub fn sample(&mut self, dim: usize) -> (Option<Vector>, Option<Vector>) {
        let p = Self::draw(&mut self.position, self.spec.position_std, dim);
        let v = Self::draw(&mut self.velocity, self.spec.velocity_std, dim);
        (p, v)
    }
}

/// Time discretisation of the plant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Integrator {
    /// Forward Euler on position and velocity.
    #[default]
    ExplicitEuler,
    /// Damping force evaluated at the next velocity:
    /// `(M + Δt D) ξ̇' = M ξ̇ + Δt (τc − g + τe + D ξ̇)`, then `ξ' = ξ + Δt ξ̇'`.
    /// Stable for any positive damping.
    SemiImplicit,
}

impl Integrator {
    pub fn label(&self) -> &'static str {
        match self {
            Integrator::ExplicitEuler => "explicit_euler",
            Integrator::SemiImplicit => "semi_implicit",
        }
    }
}

/// Everything needed for one simulated trajectory.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub env: Environment,
    pub field: BaseField,
    pub plant: PlantModel,
    pub controller: ControllerKind,
    pub damping: DampingSpec,
    pub dt: f64,
    pub horizon: f64,
    pub start: PlantState,
    pub noise: NoiseSpec,
    pub disturbance: DisturbanceSchedule,
    pub integrator: Integrator,
}

impl SimConfig {
    /// Noiseless, undisturbed explicit-Euler run with recommended damping.
    pub fn new(
        env: Environment,
        field: BaseField,
        plant: PlantModel,
        start: PlantState,
        dt: f64,
        horizon: f64,
    ) -> Self {
        let damping = DampingSpec::recommended(plant.min_mass(), dt);
        Self {
            env,
            field,
            plant,
            controller: ControllerKind::ObstacleAware,
            damping,
            dt,
            horizon,
            start,
            noise: NoiseSpec::none(),
            disturbance: DisturbanceSchedule::none(),
            integrator: Integrator::ExplicitEuler,
        }
    }

    pub fn dim(&self) -> usize {
        self.plant.dim()
    }

    /// Number of steps; the record holds one more row than this.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon > self.dt) || !self.horizon.is_finite() {
            return Err(Error::config(format!(
                "horizon {} must exceed dt {}",
                self.horizon, self.dt
            )));
        }
        for (found, what) in [
            (self.field.dim(), "field"),
            (self.start.xi.len(), "start position"),
            (self.start.xi_dot.len(), "start velocity"),
        ] {
            if found != dim {
                return Err(Error::config(format!(
                    "{what} has dimension {found}, plant has {dim}"
                )));
            }
        }
        if let Some(obstacle) = self.env.obstacles().first() {
            if obstacle.dim() != dim {
                return Err(Error::config(format!(
                    "scene has dimension {}, plant has {dim}",
                    obstacle.dim()
                )));
            }
        }
        if !self.start.is_finite() {
            return Err(Error::config("start state must be finite"));
        }
        self.damping.validate()?;
        self.noise.validate()?;
        self.disturbance.validate(dim, self.dt)?;
        Ok(())
    }
}

/// One logged step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub xi: Vector,
    pub xi_dot: Vector,
    pub tau_c: Vector,
    pub tau_e: Vector,
    pub gamma_min: f64,
    pub weight: f64,
    pub signed_distance: f64,
}

/// Aggregate statistics of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunMetrics {
    /// Smallest signed surface distance over all rows (m), negative after a collision.
    pub min_signed_distance: f64,
    /// Largest control-force norm (N).
    pub max_control_force: f64,
    pub steps: usize,
    pub diverged: bool,
}

impl RunMetrics {
    pub fn collided(&self) -> bool {
        self.min_signed_distance < 0.0
    }

    pub fn from_rows(rows: &[TrajectoryRow], diverged: bool) -> Self {
        let mut min_signed_distance = f64::INFINITY;
        let mut max_control_force: f64 = 0.0;
        for row in rows {
            if row.signed_distance.is_finite() || row.signed_distance == f64::INFINITY {
                min_signed_distance = min_signed_distance.min(row.signed_distance);
            }
            let force = row.tau_c.norm();
            if force.is_finite() {
                max_control_force = max_control_force.max(force);
            }
        }
        Self {
            min_signed_distance,
            max_control_force,
            steps: rows.len().saturating_sub(1),
            diverged,
        }
    }
}

/// Step at which the state stopped being finite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergence {
    pub step: usize,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub dim: usize,
    pub rows: Vec<TrajectoryRow>,
    pub metrics: RunMetrics,
    pub divergence: Option<Divergence>,
}

/// Decimal with 17 significant digits, `.` separator.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

impl TrajectoryRecord {
    pub fn csv_header(dim: usize) -> String {
        let mut columns = vec!["t".to_string()];
        for prefix in ["xi", "xidot", "tauc", "taue"] {
            columns.extend((0..dim).map(|i| format!("{prefix}_{i}")));
        }
        columns.extend(["gamma_min", "w", "signed_dist"].map(String::from));
        columns.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::csv_header(self.dim))?;
        for row in &self.rows {
            let mut fields = Vec::with_capacity(4 * self.dim + 4);
            fields.push(format_float(row.t));
            for v in [&row.xi, &row.xi_dot, &row.tau_c, &row.tau_e] {
                fields.extend(v.iter().map(|x| format_float(*x)));
            }
            fields.push(format_float(row.gamma_min));
            fields.push(format_float(row.weight));
            fields.push(format_float(row.signed_distance));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Result of [`step`]: the next state and the forces applied during the step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: PlantState,
    pub tau_c: Vector,
    pub tau_e: Vector,
}

/// Advances the plant by one step of length `dt`.
#[allow(clippy::too_many_arguments)]
pub fn step(
    state: &PlantState,
    plant: &PlantModel,
    controller: &mut Controller,
    env: &Environment,
    field: &BaseField,
    noise: &mut NoiseSource,
    disturbance: &DisturbanceSchedule,
    dt: f64,
    integrator: Integrator,
    step_index: usize,
) -> Result<StepOutcome> {
    let dim = plant.dim();
    let (position_noise, velocity_noise) = noise.sample(dim);
    let mut true_state = state.clone();
    let mut measured = state.clone();
    match noise.spec().mode {
        NoiseMode::Measurement => {
            if let Some(dp) = &position_noise {
                measured.xi += dp;
            }
            if let Some(dv) = &velocity_noise {
                measured.xi_dot += dv;
            }
        }
        NoiseMode::Process => {
            if let Some(dp) = &position_noise {
                true_state.xi += dp;
            }
            if let Some(dv) = &velocity_noise {
                true_state.xi_dot += dv;
            }
            measured = true_state.clone();
        }
    }

    let output = controller.evaluate(env, field, plant, &measured.xi, &measured.xi_dot)?;
    let tau_e = disturbance.force_at(state.t, dt, dim);
    let net = &output.force - &plant.gravity + &tau_e;

    let xi_dot = match integrator {
        Integrator::ExplicitEuler => {
            let acceleration = solve(&plant.mass, &net)?;
            &true_state.xi_dot + acceleration * dt
        }
        Integrator::SemiImplicit => {
            let lhs = &plant.mass + &output.damping * dt;
            let rhs = &plant.mass * &true_state.xi_dot
                + (net + &output.damping * &true_state.xi_dot) * dt;
            solve(&lhs, &rhs)?
        }
    };
    let xi = match integrator {
        Integrator::ExplicitEuler => &true_state.xi + &true_state.xi_dot * dt,
        Integrator::SemiImplicit => &true_state.xi + &xi_dot * dt,
    };
    let next = PlantState {
        xi,
        xi_dot,
        t: state.t + dt,
    };
    if !next.is_finite() {
        return Err(Error::NonFiniteState {
            step: step_index + 1,
            time: next.t,
        });
    }
    Ok(StepOutcome {
        state: next,
        tau_c: output.force,
        tau_e,
    })
}

fn solve(lhs: &crate::Matrix, rhs: &Vector) -> Result<Vector> {
    lhs.clone()
        .cholesky()
        .map(|c| c.solve(rhs))
        .ok_or_else(|| Error::Domain("system matrix is not positive definite".into()))
}

fn observe(env: &Environment, state: &PlantState, gamma_crit: f64) -> Result<(f64, f64, f64)> {
    let probes = env.probe_all_clamped(&state.xi)?;
    let assessment = crate::geometry::assess_probes(&probes, state.xi.len(), gamma_crit)?;
    Ok((
        assessment.gamma_min,
        assessment.weight,
        env.signed_distance(&state.xi),
    ))
}

/// Simulates one trajectory from `config.start` to the horizon, stopping
/// early (and recording the divergence) if the state blows up.
pub fn run(config: &SimConfig) -> Result<TrajectoryRecord> {
    config.validate()?;
    let dim = config.dim();
    let steps = config.steps();
    let mut controller = Controller::new(config.controller, config.damping)?;
    let mut noise = NoiseSource::new(config.noise);
    let mut rows = Vec::with_capacity(steps + 1);
    let mut state = config.start.clone();
    let mut divergence = None;

    for k in 0..=steps {
        let (gamma_min, weight, signed_distance) =
            observe(&config.env, &state, config.damping.gamma_crit)?;
        if k == steps {
            // last row: forces the controller would apply next
            let output = controller.evaluate(
                &config.env,
                &config.field,
                &config.plant,
                &state.xi,
                &state.xi_dot,
            )?;
            rows.push(TrajectoryRow {
                t: state.t,
                xi: state.xi.clone(),
                xi_dot: state.xi_dot.clone(),
                tau_c: output.force,
                tau_e: config.disturbance.force_at(state.t, config.dt, dim),
                gamma_min,
                weight,
                signed_distance,
            });
            break;
        }
        let outcome = step(
            &state,
            &config.plant,
            &mut controller,
            &config.env,
            &config.field,
            &mut noise,
            &config.disturbance,
            config.dt,
            config.integrator,
            k,
        );
        match outcome {
            Ok(outcome) => {
                rows.push(TrajectoryRow {
                    t: state.t,
                    xi: state.xi.clone(),
                    xi_dot: state.xi_dot.clone(),
                    tau_c: outcome.tau_c,
                    tau_e: outcome.tau_e,
                    gamma_min,
                    weight,
                    signed_distance,
                });
                state = outcome.state;
                // keep the time grid exact
                state.t = (k + 1) as f64 * config.dt;
            }
            Err(Error::NonFiniteState { step, time }) => {
                // log the last finite state before stopping
                let output = controller.evaluate(
                    &config.env,
                    &config.field,
                    &config.plant,
                    &state.xi,
                    &state.xi_dot,
                )?;
                rows.push(TrajectoryRow {
                    t: state.t,
                    xi: state.xi.clone(),
                    xi_dot: state.xi_dot.clone(),
                    tau_c: output.force,
                    tau_e: config.disturbance.force_at(state.t, config.dt, dim),
                    gamma_min,
                    weight,
                    signed_distance,
                });
                divergence = Some(Divergence { step, time });
                break;
            }
            Err(other) => return Err(other),
        }
    }

    let metrics = RunMetrics::from_rows(&rows, divergence.is_some());
    Ok(TrajectoryRecord {
        dim,
        rows,
        metrics,
        divergence,
    })
}

/// Which noise deviation a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseChannel {
    Velocity,
    Position,
}

impl NoiseChannel {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseChannel::Velocity => "velocity",
            NoiseChannel::Position => "position",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            NoiseChannel::Velocity => "m/s",
            NoiseChannel::Position => "m",
        }
    }

    fn apply(&self, noise: &mut NoiseSpec, level: f64) {
        match self {
            NoiseChannel::Velocity => noise.velocity_std = level,
            NoiseChannel::Position => noise.position_std = level,
        }
    }
}

/// Mean and sample standard deviation; the deviation is 0 for a single value.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Runs of one noise level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    pub level: f64,
    pub runs: Vec<RunMetrics>,
    pub mean_min_distance: f64,
    pub std_min_distance: f64,
}

impl LevelStats {
    pub fn from_runs(level: f64, runs: Vec<RunMetrics>) -> Self {
        let distances: Vec<f64> = runs.iter().map(|r| r.min_signed_distance).collect();
        let (mean_min_distance, std_min_distance) = mean_and_std(&distances);
        Self {
            level,
            runs,
            mean_min_distance,
            std_min_distance,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub controller: ControllerKind,
    pub channel: NoiseChannel,
    pub seed: u64,
    pub epochs: usize,
    pub levels: Vec<LevelStats>,
}

/// Runs `epochs` noisy trajectories per level in parallel. Epoch `e` uses
/// seed `config.noise.seed + e` at every level.
pub fn monte_carlo(
    config: &SimConfig,
    channel: NoiseChannel,
    levels: &[f64],
    epochs: usize,
) -> Result<SweepResult> {
    if epochs == 0 {
        return Err(Error::config("epochs must be at least 1"));
    }
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..levels.len())
        .flat_map(|l| (0..epochs).map(move |e| (l, e)))
        .collect();
    let metrics: Vec<RunMetrics> = jobs
        .par_iter()
        .map(|&(l, e)| {
            let mut run_config = config.clone();
            channel.apply(&mut run_config.noise, levels[l]);
            run_config.noise.seed = config.noise.seed.wrapping_add(e as u64);
            run(&run_config).map(|record| record.metrics)
        })
        .collect::<Result<_>>()?;
    let levels = levels
        .iter()
        .enumerate()
        .map(|(l, &level)| {
            LevelStats::from_runs(level, metrics[l * epochs..(l + 1) * epochs].to_vec())
        })
        .collect();
    Ok(SweepResult {
        controller: config.controller,
        channel,
        seed: config.noise.seed,
        epochs,
        levels,
    })
}
