use precool::io::{read_trace_file, write_trace_file, write_trajectory_file};
use precool::pipeline::{analyze_traces, WarmupExperiment};
use precool::synth::synthesize_shot_ensemble;
use precool::Execution;

#[test]
fn analysis_is_unchanged_by_a_file_round_trip() {
    let mut e = WarmupExperiment::bench_reference();
    e.synth.seed = 5;
    let sim = e.simulate().unwrap();
    let traces = synthesize_shot_ensemble(
        16,
        &sim.trajectory,
        &e.chain,
        &e.synth_config(),
        &sim.disconnect_times_s(),
        Execution::default(),
    )
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let mut reread = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        let p = dir.path().join(format!("trace_{i:04}.csv"));
        write_trace_file(&p, t).unwrap();
        reread.push(read_trace_file(&p).unwrap());
    }
    write_trajectory_file(&dir.path().join("trajectory.csv"), &sim.trajectory).unwrap();

    for (a, b) in traces.iter().zip(&reread) {
        assert_eq!(a.voltages_v, b.voltages_v);
        assert_eq!(a.metadata, b.metadata);
        assert!((a.sample_interval_s - b.sample_interval_s).abs() < 1e-18);
    }
    let direct = analyze_traces(&traces, 40e-6, &e.analysis, Execution::Sequential).unwrap();
    let from_disk = analyze_traces(&reread, 40e-6, &e.analysis, Execution::Sequential).unwrap();
    for (x, y) in direct.series.iter().zip(&from_disk.series) {
        let (x, y) = (x.delta_p_db.unwrap(), y.delta_p_db.unwrap());
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = read_trace_file(std::path::Path::new("/nonexistent/trace.csv")).unwrap_err();
    assert!(matches!(err, precool::Error::Io(_)));
}
