mod common;

use lsm_bench::config::{DatasetSpec, Precision, Report};
use lsm_bench::experiment::{self, fold_indices};
use lsm_bench::results::{self, OutputFormat};
use lsm_bench::{ExperimentResult, Stage};
use lsm_core::liquid::Architecture;
use lsm_core::readout::ReadoutKind;
use lsm_core::PatternKind;

#[test]
fn plain_split_reports_every_readout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = lsm_bench::ExperimentConfig {
        readouts: ReadoutKind::ALL.to_vec(),
        repeats: 3,
        ..common::small_config(common::write_bars(dir.path(), 60, 30))
    };
    let r = experiment::run_experiment(&cfg).unwrap();
    assert_eq!(r.runs.len(), 3);
    assert_eq!(r.summary.len(), 3);
    for s in &r.summary {
        let tests: Vec<f64> = r
            .runs
            .iter()
            .map(|run| run.scores.iter().find(|x| x.readout == s.readout).unwrap().test_accuracy)
            .collect();
        assert_eq!(s.best_test, tests.iter().copied().fold(0.0, f64::max));
        assert!(tests.iter().all(|a| (0.0..=1.0).contains(a)));
        assert!(s.mean_test > 0.5, "{:?} {}", s.readout, s.mean_test);
    }
    for run in &r.runs {
        assert_eq!(run.input_neurons, 144);
        assert_eq!(run.selection_size, 144);
        assert_eq!((run.train_records, run.test_records), (60, 30));
        assert!(run.input_bytes > 0 && run.timings.total_ms >= 0.0);
    }
    assert_ne!(r.runs[0].seed, r.runs[1].seed);
}

#[test]
fn records_repeat_samples_cyclically() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::small_config(common::write_bars(dir.path(), 20, 10));
    cfg.encode.train_records = Some(50);
    cfg.pattern = PatternKind::CHESSBOARD;
    let r = experiment::run_experiment(&cfg).unwrap();
    assert_eq!(r.runs[0].train_records, 50);
    assert_eq!(r.runs[0].input_neurons, 36);
}

#[test]
fn same_seed_gives_identical_results_modulo_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = lsm_bench::ExperimentConfig {
        arch: Architecture::Rc5,
        pattern: PatternKind::SCANLINE,
        repeats: 2,
        seed: 77,
        ..common::small_config(common::write_bars(dir.path(), 40, 20))
    };
    let a = experiment::run_experiment(&cfg).unwrap().without_timings();
    let b = experiment::run_experiment(&cfg).unwrap().without_timings();
    assert_eq!(a.to_json(), b.to_json());

    let other = lsm_bench::ExperimentConfig { seed: 78, ..cfg };
    let c = experiment::run_experiment(&other).unwrap().without_timings();
    assert_ne!(a.runs[0].input_bytes, c.runs[0].input_bytes);
}

#[test]
fn single_precision_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = lsm_bench::ExperimentConfig {
        precision: Precision::F32,
        ..common::small_config(common::write_bars(dir.path(), 45, 15))
    };
    let r = experiment::run_experiment(&cfg).unwrap();
    assert!(r.summary[0].best_test > 0.5);
}

#[test]
fn cross_validation_covers_every_sample_once() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = lsm_bench::ExperimentConfig {
        cv_folds: 5,
        repeats: 2,
        report: Report::Mean,
        ..common::small_config(common::write_bars(dir.path(), 40, 13))
    };
    let r = experiment::run_experiment(&cfg).unwrap();
    // Five folds plus the average row, per repeat.
    assert_eq!(r.runs.len(), 12);
    let folds: Vec<_> = r.runs.iter().filter(|x| x.fold.is_some()).collect();
    let tested: usize = folds.iter().filter(|x| x.repeat == 0).map(|x| x.test_records).sum();
    assert_eq!(tested, 53);
    let sizes: Vec<usize> = folds.iter().filter(|x| x.repeat == 0).map(|x| x.test_records).collect();
    assert_eq!(sizes, vec![11, 11, 11, 10, 10]);

    for repeat in 0..2 {
        let per_fold: Vec<f64> = folds
            .iter()
            .filter(|x| x.repeat == repeat)
            .map(|x| x.scores[0].test_accuracy)
            .collect();
        let avg = r
            .runs
            .iter()
            .find(|x| x.repeat == repeat && x.fold.is_none())
            .unwrap();
        let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
        assert!((avg.scores[0].test_accuracy - mean).abs() < 1e-12);
    }
    assert_eq!(fold_indices(100, 10, 3).unwrap().iter().map(Vec::len).collect::<Vec<_>>(), vec![10; 10]);
}

#[test]
fn image_dir_without_test_dir_needs_cv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::small_config(DatasetSpec::ImageDir {
        dir: dir.path().to_path_buf(),
        test_dir: None,
        height: 10,
        width: 45,
        crop: Default::default(),
    });
    assert_eq!(cfg.validate().unwrap_err().stage, Stage::Config);
    cfg.cv_folds = 10;
    cfg.validate().unwrap();
}

#[test]
fn errors_carry_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let missing = common::small_config(DatasetSpec::mnist_dir(dir.path().join("nope"), 10, 10));
    assert_eq!(experiment::run_experiment(&missing).unwrap_err().stage, Stage::Load);

    let mut bad = common::small_config(common::write_bars(dir.path(), 10, 5));
    bad.pattern = PatternKind::Patch { size: 20, stride: 20 };
    let e = experiment::run_experiment(&bad).unwrap_err();
    assert_eq!(e.stage, Stage::Config);
    assert!(e.to_string().starts_with("[config]"));

    let mut single = common::small_config(common::write_bars(dir.path(), 1, 5));
    single.encode.train_records = Some(1);
    assert_eq!(experiment::run_experiment(&single).unwrap_err().stage, Stage::Train);
}

#[test]
fn comparison_ratios_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::small_config(common::write_bars(dir.path(), 30, 15));
    let patterns = [PatternKind::FULLSCALE, PatternKind::CHESSBOARD, PatternKind::PATCH];
    let cmp = experiment::compare_patterns(&cfg, &patterns).unwrap();
    let full = cmp.summary("fullscale").unwrap();
    assert_eq!(full.storage_ratio, Some(1.0));
    assert_eq!(full.runtime_ratio, Some(1.0));
    let cb = cmp.summary("chessboard").unwrap();
    assert_eq!(cb.selection_size, 36);
    assert!(cb.storage_ratio.unwrap() > 2.0);
    assert_eq!(cmp.result("patch").unwrap().runs[0].selection_size, 36);

    let csv = String::from_utf8(results::render(&cmp, OutputFormat::Csv).unwrap()).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "pattern,arch,readout,split,accuracy,runtime_ms,input_bytes");
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[1].starts_with("fullscale,1rc,sgd,train,"));
    assert!(lines[4].starts_with("chessboard,1rc,sgd,test,"));

    let empty = experiment::compare_patterns(&cfg, &[]).unwrap();
    let path = dir.path().join("empty.csv");
    results::emit_results(&empty, OutputFormat::Csv, &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "pattern,arch,readout,split,accuracy,runtime_ms,input_bytes\n"
    );
}

#[test]
fn result_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::small_config(common::write_bars(dir.path(), 30, 15));
    let r = experiment::run_experiment(&cfg).unwrap();
    let path = dir.path().join("r.json");
    results::emit_results(&r, OutputFormat::Json, &path).unwrap();
    let back = ExperimentResult::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn spike_files_and_state_dumps_land_where_asked() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::small_config(common::write_bars(dir.path(), 30, 12));
    cfg.spike_dir = Some(dir.path().join("spikes"));
    cfg.state_dump_dir = Some(dir.path().join("states"));
    let r = experiment::run_experiment(&cfg).unwrap();
    let train = dir.path().join("spikes/r0-train.lsms");
    let test = dir.path().join("spikes/r0-test.lsms");
    let on_disk = std::fs::metadata(&train).unwrap().len() + std::fs::metadata(&test).unwrap().len();
    assert_eq!(on_disk, r.runs[0].input_bytes);
    let recs = lsm_core::encoding::read_records(&test, 50.0).unwrap();
    assert_eq!(recs.len(), 12);

    let states = std::fs::read_to_string(dir.path().join("states/train.csv")).unwrap();
    let rows: Vec<&str> = states.lines().collect();
    assert_eq!(rows.len(), 30);
    // Label column followed by one value per excitatory neuron.
    assert_eq!(rows[0].split(',').count(), 1 + 80);
    assert!(std::fs::metadata(dir.path().join("states/test.csv")).is_ok());
}
