use std::fs;
use std::path::Path;

use equiflow::run::{CHECKPOINT, DIAGNOSTICS, MANIFEST, TIMINGS};
use equiflow::{cmd_run, cmd_sweep, config_hash, parse_config_str, CliError, RunManifest, RunOptions};
use equiflow_core::flow::{FlowConfig, Status};
use equiflow_core::{io, Executor};

fn cfg(text: &str) -> FlowConfig {
    parse_config_str(text).unwrap().config
}

fn fresh() -> RunOptions {
    RunOptions::default()
}

/// Every file of a run directory except the wall-clock timings.
fn contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != TIMINGS {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn shrinking_circle_ends_in_a_blowup() {
    let dir = tempfile::tempdir().unwrap();
    let m = cmd_run(&cfg("family = circle(1.0)\n"), dir.path(), &fresh()).unwrap();
    assert_eq!(m.status, Status::BlowupDetected);
    let last = m.snapshots.last().unwrap();
    assert!(last.t > 0.24, "{}", last.t);
    assert_eq!(io::read_snapshot(&dir.path().join(&last.file)).unwrap().t(), last.t);
    // every listed file exists and parses
    for f in &m.files {
        let text = fs::read_to_string(dir.path().join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        if f.ends_with(".json") {
            serde_json::from_str::<serde_json::Value>(&text).unwrap();
        }
    }
    assert_eq!(m, RunManifest::read(dir.path()).unwrap());
    assert!(m.checkpoint.is_none() && !dir.path().join(CHECKPOINT).exists());
    assert!(dir.path().join(TIMINGS).exists() && !m.files.iter().any(|f| f == TIMINGS));
}

#[test]
fn special_lagrangian_reaches_the_end_time() {
    let dir = tempfile::tempdir().unwrap();
    let m = cmd_run(&cfg("beta = pi/2\nt_end = 0.5\n"), dir.path(), &fresh()).unwrap();
    assert_eq!(m.status, Status::ReachedTEnd);
    assert_eq!(m.t_final, 0.5);
    assert!(m.event.is_none());
    let rows = fs::read_to_string(dir.path().join(DIAGNOSTICS)).unwrap().lines().count() - 1;
    assert_eq!(rows, m.snapshots.len());
}

#[test]
fn reruns_are_byte_identical() {
    let c = cfg("beta = 3*pi/4\nnodes = 64\nt_end = 0.3\n");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_run(&c, a.path(), &fresh()).unwrap();
    cmd_run(&c, b.path(), &fresh()).unwrap();
    let first = contents(a.path());
    assert!(first.len() > 4);
    assert_eq!(first, contents(b.path()));
    // a rerun into the same directory replaces the old outputs
    cmd_run(&c, a.path(), &fresh()).unwrap();
    assert_eq!(first, contents(a.path()));
}

#[test]
fn interrupted_runs_resume_to_the_same_end() {
    let c = cfg("beta = pi/2\nt_end = 0.5\nnodes = 128\n");
    let whole = tempfile::tempdir().unwrap();
    let full = cmd_run(&c, whole.path(), &fresh()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let part = cmd_run(&c, dir.path(), &RunOptions { resume: false, max_steps: Some(300) }).unwrap();
    assert_eq!(part.status, Status::Running);
    assert_eq!(part.steps, 300);
    assert_eq!(part.checkpoint.as_deref(), Some(CHECKPOINT));
    let done = cmd_run(&c, dir.path(), &RunOptions { resume: true, max_steps: None }).unwrap();
    assert_eq!(done.status, Status::ReachedTEnd);
    assert_eq!(done.t_final, full.t_final);
    assert!(done.checkpoint.is_none() && !dir.path().join(CHECKPOINT).exists());
    assert!(!done.files.iter().any(|f| f == CHECKPOINT));

    // the checkpoint rounds radii once: agreement to round-off, not bitwise
    let end = |d: &Path, m: &RunManifest| io::read_snapshot(&d.join(&m.snapshots.last().unwrap().file)).unwrap();
    let (x, y) = (end(whole.path(), &full), end(dir.path(), &done));
    let gap = x.positions().iter().zip(y.positions()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(gap <= 1e-12, "{gap}");
    let rows = fs::read_to_string(dir.path().join(DIAGNOSTICS)).unwrap().lines().count() - 1;
    assert_eq!(rows, done.snapshots.len());

    // resuming a finished run is a no-op
    assert_eq!(cmd_run(&c, dir.path(), &RunOptions { resume: true, max_steps: None }).unwrap(), done);
}

#[test]
fn resume_rejects_a_changed_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("beta = pi/2\nt_end = 0.5\nnodes = 64\n");
    cmd_run(&c, dir.path(), &RunOptions { resume: false, max_steps: Some(10) }).unwrap();
    let other = cfg("beta = pi/2\nt_end = 0.6\nnodes = 64\n");
    match cmd_run(&other, dir.path(), &RunOptions { resume: true, max_steps: None }) {
        Err(CliError::HashMismatch { expected, found }) => {
            assert_eq!(expected, config_hash(&c));
            assert_eq!(found, config_hash(&other));
        }
        r => panic!("{r:?}"),
    }
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(cmd_run(&c, empty.path(), &RunOptions { resume: true, max_steps: None }), Err(CliError::Io { .. })));
    assert!(dir.path().join(MANIFEST).exists());
}

#[test]
fn sweeps_write_one_directory_per_configuration() {
    let out = tempfile::tempdir().unwrap();
    let configs = vec![
        ("circle".to_string(), cfg("family = circle(1.0)\nnodes = 64\n")),
        ("expander".to_string(), cfg("beta = pi/4\nnodes = 64\nt_end = 0.2\n")),
    ];
    let seq = cmd_sweep(&configs, out.path(), &fresh(), Executor::Sequential);
    let statuses: Vec<Status> = seq.iter().map(|(_, r)| r.as_ref().unwrap().status).collect();
    assert_eq!(statuses, [Status::BlowupDetected, Status::ReachedTEnd]);
    assert_eq!(seq[1].0, out.path().join("expander"));

    let par_out = tempfile::tempdir().unwrap();
    cmd_sweep(&configs, par_out.path(), &fresh(), Executor::Parallel);
    for name in ["circle", "expander"] {
        assert_eq!(contents(&out.path().join(name)), contents(&par_out.path().join(name)));
    }
}
