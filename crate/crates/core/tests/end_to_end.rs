use obstacle_damping::analysis::{compare_controllers, energy_series, sweep_table_csv};
use obstacle_damping::config::{preset, ExperimentConfig};
use obstacle_damping::controller::{ControllerKind, PlantModel};
use obstacle_damping::flowfield::BaseField;
use obstacle_damping::geometry::Environment;
use obstacle_damping::simulator::{
    monte_carlo, run, NoiseChannel, PlantState, SimConfig, TrajectoryRecord,
};
use obstacle_damping::Vector;

#[test]
fn flat_wall_preset_stops_at_the_predicted_gap() {
    let experiment = preset("flat_wall_impulse").unwrap().build(None).unwrap();
    let record = run(&experiment.runs[0]).unwrap();
    // 0.5 m gap minus 40 m/s * 1 kg / 100 s⁻¹
    let min = record.metrics.min_signed_distance;
    assert!((min - 0.1).abs() < 1e-4, "{min}");
    assert_eq!(record.rows.len(), experiment.runs[0].steps() + 1);

    let csv = record.to_csv_string();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, TrajectoryRecord::csv_header(2));
    assert_eq!(csv.lines().count(), record.rows.len() + 1);
}

#[test]
fn free_motion_energy_rises_monotonically_to_the_target() {
    let plant = PlantModel::point_mass(2, 2.0).unwrap();
    let field = BaseField::constant(Vector::from_column_slice(&[1.0, 1.0]), 1.5).unwrap();
    let start = PlantState::at_rest(Vector::zeros(2));
    let config = SimConfig::new(Environment::empty(), field, plant.clone(), start, 0.01, 2.0);
    let record = run(&config).unwrap();
    let energy = energy_series(&record, &plant);
    let target = 0.5 * 2.0 * 1.5 * 1.5;
    assert!(energy.windows(2).all(|w| w[1].energy >= w[0].energy));
    assert!(energy.iter().all(|e| e.energy <= target + 1e-12));
    assert!((energy.last().unwrap().energy - target).abs() < 1e-9);
}

#[test]
fn velocity_stays_bounded_after_disturbances() {
    let experiment = preset("fig_multi_obstacle").unwrap().build(None).unwrap();
    for config in &experiment.runs {
        let record = run(config).unwrap();
        assert!(!record.metrics.diverged);
        let last = record.rows.last().unwrap();
        assert!(
            last.xi_dot.norm() < 2.0,
            "final speed {}",
            last.xi_dot.norm()
        );
    }
}

#[test]
fn sweep_epochs_match_single_runs() {
    let experiment = preset("fig_noise_velocity").unwrap().build(None).unwrap();
    let config = &experiment.runs[0];
    let sweep = monte_carlo(config, NoiseChannel::Velocity, &[0.5], 3).unwrap();
    for (epoch, metrics) in sweep.levels[0].runs.iter().enumerate() {
        let mut single = config.clone();
        single.noise.velocity_std = 0.5;
        single.noise.seed = config.noise.seed + epoch as u64;
        assert_eq!(&run(&single).unwrap().metrics, metrics);
    }
}

#[test]
fn controllers_compared_on_identical_seeds() {
    let experiment = preset("fig_noise_position").unwrap().build(None).unwrap();
    let mut aware = experiment.runs[0].clone();
    aware.controller = ControllerKind::ObstacleAware;
    let mut baseline = aware.clone();
    baseline.controller = ControllerKind::VelocityPreserving;
    let a = monte_carlo(&aware, NoiseChannel::Position, &[0.0, 0.01], 4).unwrap();
    let b = monte_carlo(&baseline, NoiseChannel::Position, &[0.0, 0.01], 4).unwrap();
    assert_eq!(a.seed, b.seed);

    let csv = sweep_table_csv(&[&a, &b]).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let comparison = compare_controllers(
        ("aware", &a.levels[1].runs),
        ("baseline", &b.levels[1].runs),
    )
    .unwrap();
    assert_eq!(comparison.rows[0].runs, 4);
    assert!(comparison.rows[0].mean_min_distance > comparison.rows[1].mean_min_distance);
    assert!(comparison.to_text().contains("±"));
}

#[test]
fn config_round_trip_preserves_results() {
    let original = preset("fig_multi_obstacle").unwrap();
    let reparsed = ExperimentConfig::from_toml(&original.to_toml().unwrap()).unwrap();
    let a = run(&original.build(None).unwrap().runs[1]).unwrap();
    let b = run(&reparsed.build(None).unwrap().runs[1]).unwrap();
    assert_eq!(a.to_csv_string(), b.to_csv_string());
}

#[test]
fn divergent_preset_reports_the_step() {
    let experiment = preset("divergent_damping").unwrap().build(None).unwrap();
    let record = run(&experiment.runs[0]).unwrap();
    let divergence = record
        .divergence
        .expect("explicit Euler above 2m/dt must diverge");
    assert!(record.metrics.diverged);
    assert_eq!(record.rows.len(), divergence.step);
    assert!(record
        .rows
        .iter()
        .all(|r| r.xi_dot.iter().all(|v| v.is_finite())));
}
