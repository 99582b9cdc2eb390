use ewens_pitman::io;
use ewens_pitman::{execute, run_experiment, ExperimentConfig, ExperimentKind, SampleSizes};
use ewens_pitman_core::stats::moment_estimates;

fn config(kind: ExperimentKind, n: u64, replicates: u64) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        alpha: 0.5,
        theta: 0.0,
        n: SampleSizes::One(n),
        replicates,
        replicate_offset: 0,
        truncation: Some(5000),
        grid_size: 20,
        epsilon_c: 1.0,
        seed: 31,
        output_dir: Default::default(),
        trajectories: true,
        realization: None,
    }
}

#[test]
fn splitting_replicates_changes_nothing() {
    for kind in [ExperimentKind::CrpLln, ExperimentKind::CltWQuenched, ExperimentKind::JointClt] {
        let whole = execute(&config(kind, 400, 60)).unwrap();
        let mut first = config(kind, 400, 30);
        let a = execute(&first).unwrap();
        first.replicate_offset = 30;
        let b = execute(&first).unwrap();

        let split: Vec<_> = a.replicates.iter().chain(&b.replicates).cloned().collect();
        assert_eq!(split, whole.replicates, "{kind}");
        let k_whole: Vec<f64> = whole.replicates.iter().filter_map(|r| r.k_scaled).collect();
        let k_split: Vec<f64> = split.iter().filter_map(|r| r.k_scaled).collect();
        let (mw, ms) = (moment_estimates(&k_whole, None).unwrap(), moment_estimates(&k_split, None).unwrap());
        assert!((mw.mean - ms.mean).abs() < 1e-12);
        assert!((mw.variance - ms.variance).abs() < 1e-12);
        if kind == ExperimentKind::CltWQuenched {
            // the pinned realization does not depend on the replicate range
            assert_eq!(a.realization, b.realization);
        }
    }
}

#[test]
fn every_output_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [ExperimentKind::CltWQuenched, ExperimentKind::CltY, ExperimentKind::PoissonizationCoupling] {
        let mut c = config(kind, 300, 12);
        c.output_dir = dir.path().join(kind.as_str());
        let (summary, out) = run_experiment(&c, false).unwrap();
        assert_eq!(summary.checks, out.reports.len());
        let d = &c.output_dir;

        assert_eq!(io::read_reports(&d.join(io::REPORTS_FILE)).unwrap(), out.reports);
        assert_eq!(io::read_moments(&d.join(io::MOMENTS_FILE)).unwrap(), out.moments);
        assert_eq!(io::read_replicates(&d.join(io::REPLICATES_FILE)).unwrap(), out.replicates);
        assert_eq!(io::read_trajectories(&d.join(io::TRAJECTORIES_FILE)).unwrap(), out.trajectories);
        let meta = io::read_metadata(&d.join(io::METADATA_FILE)).unwrap();
        assert_eq!(meta.config, c);
        assert_eq!(meta.seed, 31);
        for f in &meta.files {
            assert!(d.join(f).exists(), "{f}");
        }
        if let Some(real) = &out.realization {
            assert_eq!(&io::read_realization(&d.join(io::REALIZATION_FILE)).unwrap(), real);
        }
    }
}

#[test]
fn trajectories_are_only_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(ExperimentKind::CrpLln, 200, 5);
    c.trajectories = false;
    c.output_dir = dir.path().to_path_buf();
    run_experiment(&c, false).unwrap();
    assert!(!dir.path().join(io::TRAJECTORIES_FILE).exists());
    assert!(dir.path().join(io::METADATA_FILE).exists());
}
