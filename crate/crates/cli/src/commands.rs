use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use obstacle_damping::analysis::{
    collision_impulse_bound, discrete_damping_limit, displacement_bound, passivity_boundary,
    passivity_grid_csv, run_summary_toml, sweep_summary_toml, sweep_table_csv, sweep_table_text,
    velocity_error_multiplier,
};
use obstacle_damping::config::{preset, preset_names, Experiment, ExperimentConfig};
use obstacle_damping::controller::{ControllerKind, DampingDecomposition, DampingSpec};
use obstacle_damping::simulator::{monte_carlo, run as simulate, Divergence, SweepResult};
use obstacle_damping::{Error, Matrix, Vector};

const DEFAULT_OUT_DIR: &str = "oad-out";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Diverged {
        start: usize,
        divergence: Divergence,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Diverged { .. } => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => f.write_str(msg),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Diverged { start, divergence } => write!(
                f,
                "start {start} diverged at step {} (t = {})",
                divergence.step, divergence.time
            ),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match err {
            Error::Io(source) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            other => CliError::Config(other.to_string()),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

pub struct Source {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub list_presets: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> CliResult<(ExperimentConfig, Option<PathBuf>)> {
        if let Some(name) = &self.preset {
            return Ok((preset(name)?, None));
        }
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("give --config or --preset".into()))?;
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let config = ExperimentConfig::from_toml(&text)?;
        Ok((config, path.parent().map(Path::to_path_buf)))
    }

    fn experiment(&self) -> CliResult<Experiment> {
        let (mut config, base_dir) = self.load()?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config.build(base_dir.as_deref())?)
    }

    fn out_dir(&self, experiment: &Experiment) -> PathBuf {
        self.out
            .clone()
            .or_else(|| experiment.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

fn list_presets() {
    for name in preset_names() {
        println!("{name}");
    }
}

fn write(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn short_label(kind: ControllerKind) -> &'static str {
    match kind {
        ControllerKind::ObstacleAware => "aware",
        ControllerKind::VelocityPreserving => "baseline",
    }
}

pub fn run(source: &Source, controller: Option<ControllerKind>, quiet: bool) -> CliResult {
    if source.list_presets {
        list_presets();
        return Ok(());
    }
    let mut experiment = source.experiment()?;
    if let Some(kind) = controller {
        for config in &mut experiment.runs {
            config.controller = kind;
        }
    }
    let kind = experiment.runs[0].controller;
    let seed = experiment.runs[0].noise.seed;
    let out_dir = source.out_dir(&experiment);
    create_dir(&out_dir)?;

    let mut records = Vec::with_capacity(experiment.runs.len());
    for (i, config) in experiment.runs.iter().enumerate() {
        let record = simulate(config)?;
        let path = out_dir.join(format!(
            "{}_{}_start{i}.csv",
            experiment.name,
            short_label(kind)
        ));
        write(&path, &record.to_csv_string())?;
        if !quiet {
            let m = &record.metrics;
            println!(
                "start {i}: closest distance {:.1} mm, max force {:.2} N, {} steps{}{}",
                m.min_signed_distance * 1000.0,
                m.max_control_force,
                m.steps,
                if m.collided() { ", COLLIDED" } else { "" },
                if m.diverged { ", DIVERGED" } else { "" },
            );
        }
        records.push(record);
    }
    let summary = run_summary_toml(&experiment.name, kind.label(), seed, &records);
    let summary_path = out_dir.join(format!(
        "{}_{}_metrics.toml",
        experiment.name,
        short_label(kind)
    ));
    write(&summary_path, &summary)?;
    if !quiet {
        println!("wrote {}", out_dir.display());
    }

    match records
        .iter()
        .enumerate()
        .find_map(|(i, r)| r.divergence.map(|d| (i, d)))
    {
        Some((start, divergence)) => Err(CliError::Diverged { start, divergence }),
        None => Ok(()),
    }
}

pub struct SweepOverrides {
    pub controller: Option<ControllerKind>,
    pub epochs: Option<usize>,
    pub levels: Option<Vec<f64>>,
    pub start: usize,
}

pub fn sweep(source: &Source, overrides: SweepOverrides, quiet: bool) -> CliResult {
    if source.list_presets {
        list_presets();
        return Ok(());
    }
    let experiment = source.experiment()?;
    let (channel, mut levels, mut epochs) = experiment.sweep.clone().ok_or_else(|| {
        CliError::Config(format!(
            "experiment `{}` has no [sweep] section",
            experiment.name
        ))
    })?;
    if let Some(l) = overrides.levels {
        if l.iter().any(|x| *x < 0.0) {
            return Err(CliError::Config("noise levels must be >= 0".into()));
        }
        levels = l;
    }
    if let Some(e) = overrides.epochs {
        epochs = e;
    }
    let base = experiment.runs.get(overrides.start).ok_or_else(|| {
        CliError::Config(format!(
            "start {} out of range ({} starts)",
            overrides.start,
            experiment.runs.len()
        ))
    })?;
    let kinds = match overrides.controller {
        Some(kind) => vec![kind],
        None => vec![
            ControllerKind::ObstacleAware,
            ControllerKind::VelocityPreserving,
        ],
    };

    let mut results: Vec<SweepResult> = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let mut config = base.clone();
        config.controller = kind;
        results.push(monte_carlo(&config, channel, &levels, epochs)?);
    }
    let refs: Vec<&SweepResult> = results.iter().collect();

    let out_dir = source.out_dir(&experiment);
    create_dir(&out_dir)?;
    let stem = format!("{}_sweep", experiment.name);
    let text = sweep_table_text(&refs)?;
    write(
        &out_dir.join(format!("{stem}.csv")),
        &sweep_table_csv(&refs)?,
    )?;
    write(&out_dir.join(format!("{stem}.txt")), &text)?;
    write(
        &out_dir.join(format!("{stem}_summary.toml")),
        &sweep_summary_toml(&experiment.name, &refs),
    )?;
    if !quiet {
        println!(
            "{} noise, {epochs} epochs per level, seeds {}..{}",
            channel.label(),
            base.noise.seed,
            base.noise.seed.wrapping_add(epochs as u64 - 1)
        );
        print!("{text}");
        println!("wrote {}", out_dir.display());
    }
    Ok(())
}

pub fn damping_limit(mass: &Matrix, dt: f64) -> CliResult {
    let limit = discrete_damping_limit(mass, dt)?;
    println!("damping limit: {limit} (2 min eig(M) / dt)");
    let m = mass.symmetric_eigenvalues().min();
    for factor in [0.95, 1.05] {
        let s = factor * limit;
        println!(
            "  s = {s}: velocity error multiplier {}",
            velocity_error_multiplier(s, m, dt)
        );
    }
    Ok(())
}

pub fn passivity(
    f: &Vector,
    s: &Vector,
    angle: Option<f64>,
    grid: Option<&Path>,
    extent: f64,
    resolution: usize,
) -> CliResult {
    let dim = f.len();
    if s.len() != dim {
        return Err(CliError::Config(format!(
            "--s needs {dim} values to match --f, got {}",
            s.len()
        )));
    }
    let basis = match angle {
        None => Matrix::identity(dim, dim),
        Some(theta) if dim == 2 => {
            let (sin, cos) = theta.sin_cos();
            Matrix::from_row_slice(2, 2, &[cos, -sin, sin, cos])
        }
        Some(_) => {
            return Err(CliError::Config(
                "--angle only applies in two dimensions".into(),
            ))
        }
    };
    let decomposition = DampingDecomposition {
        basis,
        values: s.clone(),
    };
    let region = passivity_boundary(f, &decomposition)?;
    println!("non-passive region: xi_dot^T D (xi_dot - f) < 0");
    println!("  center     {}", join(region.center.as_slice()));
    println!("  semi-axes  {}", join(region.semi_axes.as_slice()));
    for (i, axis) in region.axes.column_iter().enumerate() {
        println!("  axis {i}     {}", join(axis.as_slice()));
    }
    println!(
        "  transformed circle: center {}, radius {}",
        join(region.transformed_center.as_slice()),
        region.transformed_radius
    );
    if let Some(path) = grid {
        let csv = passivity_grid_csv(f, &decomposition.matrix(), extent, resolution)?;
        write(path, &csv)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn impulse_bound(sf: f64, m: f64, d: f64) -> CliResult {
    let spec = DampingSpec::new(sf, sf, sf, DampingSpec::DEFAULT_GAMMA_CRIT)?;
    let bound = collision_impulse_bound(&spec, m, d)?;
    println!("impact speed bound: {bound} m/s (s^f d / m)");
    println!(
        "  travel at that speed: {} m (v m / s^f)",
        displacement_bound(&spec, m, bound)
    );
    Ok(())
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
