//! Run directories: manifest, snapshots, diagnostics and restart.
//!
//! ```text
//! out/
//!   manifest.json      RunManifest (deterministic)
//!   timings.json       wall-clock seconds per command (not deterministic)
//!   config.json        the configuration that was run
//!   diagnostics.csv    one row per emitted tick
//!   history.csv        (t, min|γ|) samples used for the singular time
//!   checkpoint.json    current state of an interrupted run
//!   snapshots/snap_NNNNNN.json, snapshots/pre_NNNNNN.json
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use equiflow_core::flow::{FlowConfig, Limits, Simulation, Status, Tick};
use equiflow_core::io::{self, Cell};
use equiflow_core::monitors::{self, MonitorSettings};
use equiflow_core::singularity::BlowupEvent;
use equiflow_core::{CurveSnapshot, Executor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";
pub const CONFIG: &str = "config.json";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const HISTORY: &str = "history.csv";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub step: u64,
    pub t: f64,
    pub file: String,
    /// State one step earlier on the same grid.
    pub companion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub status: Status,
    pub steps: u64,
    pub t_final: f64,
    pub event: Option<BlowupEvent>,
    pub snapshots: Vec<SnapshotEntry>,
    pub checkpoint: Option<String>,
    /// Every file of the run directory, relative to it, sorted.
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST), self)
    }

    pub fn add_files(&mut self, files: impl IntoIterator<Item = String>) {
        self.files.extend(files);
        self.files.sort();
        self.files.dedup();
    }

    pub fn load_snapshots(&self, dir: &Path) -> Result<Vec<CurveSnapshot>> {
        self.snapshots.iter().map(|e| Ok(io::read_snapshot(&dir.join(&e.file))?)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub resume: bool,
    pub max_steps: Option<u64>,
}

/// SHA-256 of the configuration without its output directory.
pub fn config_hash(config: &FlowConfig) -> String {
    let mut c = config.clone();
    c.output_dir = None;
    let json = serde_json::to_string(&c).expect("configurations always serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::json(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::json(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Record wall-clock seconds for `command` in `timings.json`.
pub(crate) fn record_timing(dir: &Path, command: &str, seconds: f64) -> Result<()> {
    let path = dir.join(TIMINGS);
    let mut t: BTreeMap<String, f64> = if path.exists() { read_json(&path)? } else { BTreeMap::new() };
    *t.entry(command.to_string()).or_insert(0.0) += seconds;
    write_json(&path, &t)
}

pub(crate) fn read_history_file(dir: &Path) -> Result<Vec<(f64, f64)>> {
    let (_, rows) = io::parse_csv(&io::read_text(&dir.join(HISTORY))?)?;
    Ok(rows.into_iter().filter_map(|r| Some((r.first().copied()??, r.get(1).copied()??))).collect())
}

struct Recorder<'a> {
    dir: &'a Path,
    diagnostics: BufWriter<File>,
    snapshots: &'a mut Vec<SnapshotEntry>,
    settings: &'a MonitorSettings,
}

impl Recorder<'_> {
    fn record(&mut self, tick: &Tick) -> equiflow_core::Result<()> {
        let k = self.snapshots.len();
        let file = format!("{SNAPSHOT_DIR}/snap_{k:06}.json");
        io::write_snapshot(&self.dir.join(&file), &tick.snapshot)?;
        let companion = match &tick.companion {
            Some(c) => {
                let name = format!("{SNAPSHOT_DIR}/pre_{k:06}.json");
                io::write_snapshot(&self.dir.join(&name), c)?;
                Some(name)
            }
            None => None,
        };
        self.snapshots.push(SnapshotEntry { step: tick.step, t: tick.snapshot.t(), file, companion });
        // Radial radii are re-derived as |x + iy| on reading, which can move
        // the last bit; diagnose what the files hold so `verify` reproduces
        // every row exactly.
        let cur = io::snapshot_from_json(&io::snapshot_to_json(&tick.snapshot))?;
        let prev = tick.companion.as_ref().map(|c| io::snapshot_from_json(&io::snapshot_to_json(c))).transpose()?;
        let frame = monitors::diagnose(prev.as_ref(), &cur, tick.step, self.settings);
        let path = self.dir.join(DIAGNOSTICS);
        self.diagnostics
            .write_all(io::csv_row(&monitors::frame_row(&frame)).as_bytes())
            .map_err(|source| equiflow_core::Error::Io { path: path.display().to_string(), source })
    }
}

/// Run (or resume) `config`, writing everything under `out`. A fresh run
/// replaces the outputs of any earlier run in the same directory.
pub fn cmd_run(config: &FlowConfig, out: &Path, opts: &RunOptions) -> Result<RunManifest> {
    let started = Instant::now();
    let mut config = config.clone();
    config.output_dir = None;
    let hash = config_hash(&config);
    let settings = MonitorSettings::default();
    let snap_dir = out.join(SNAPSHOT_DIR);
    let diag_path = out.join(DIAGNOSTICS);

    let (mut sim, mut manifest, diagnostics, fresh) = if opts.resume {
        let manifest = RunManifest::read(out)?;
        if manifest.config_hash != hash {
            return Err(CliError::HashMismatch { expected: manifest.config_hash, found: hash });
        }
        if manifest.status != Status::Running {
            return Ok(manifest);
        }
        let ck = manifest.checkpoint.clone().ok_or_else(|| CliError::NoCheckpoint(out.display().to_string()))?;
        let snap = io::read_snapshot(&out.join(ck))?;
        let sim = Simulation::from_snapshot(config.clone(), settings.clone(), snap, manifest.steps)?
            .with_history(read_history_file(out)?);
        let file = OpenOptions::new().append(true).open(&diag_path).map_err(|e| CliError::io(&diag_path, e))?;
        (sim, manifest, file, false)
    } else {
        if snap_dir.exists() {
            fs::remove_dir_all(&snap_dir).map_err(|e| CliError::io(&snap_dir, e))?;
        }
        for stale in [CHECKPOINT, TIMINGS] {
            let p = out.join(stale);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| CliError::io(&p, e))?;
            }
        }
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write_json(&out.join(CONFIG), &config)?;
        let sim = Simulation::new(config.clone(), settings.clone())?;
        let mut file = File::create(&diag_path).map_err(|e| CliError::io(&diag_path, e))?;
        let header = monitors::frame_header(&settings).join(",") + "\n";
        file.write_all(header.as_bytes()).map_err(|e| CliError::io(&diag_path, e))?;
        let manifest = RunManifest {
            config_hash: hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            status: Status::Running,
            steps: 0,
            t_final: 0.0,
            event: None,
            snapshots: Vec::new(),
            checkpoint: None,
            files: Vec::new(),
        };
        (sim, manifest, file, true)
    };
    fs::create_dir_all(&snap_dir).map_err(|e| CliError::io(&snap_dir, e))?;

    let mut rec =
        Recorder { dir: out, diagnostics: BufWriter::new(diagnostics), snapshots: &mut manifest.snapshots, settings: &settings };
    if fresh {
        let tick = sim.initial_tick();
        rec.record(&tick)?;
    }
    sim.run_with(Limits { max_steps: opts.max_steps }, |t| rec.record(t))?;
    rec.diagnostics.flush().map_err(|e| CliError::io(&diag_path, e))?;
    drop(rec);

    let state = &sim.state;
    let ck_path = out.join(CHECKPOINT);
    if state.status == Status::Running {
        io::write_snapshot(&ck_path, &state.snapshot)?;
        manifest.checkpoint = Some(CHECKPOINT.to_string());
    } else {
        if ck_path.exists() {
            fs::remove_file(&ck_path).map_err(|e| CliError::io(&ck_path, e))?;
        }
        manifest.checkpoint = None;
    }
    let rows: Vec<Vec<Cell>> = state.history.iter().map(|&(t, m)| vec![Cell::Num(t), Cell::Num(m)]).collect();
    write_text(&out.join(HISTORY), &io::csv(&["t".into(), "min_radius".into()], &rows))?;

    manifest.status = state.status;
    manifest.steps = state.step;
    manifest.t_final = state.snapshot.t();
    manifest.event = state.event;
    manifest.files.retain(|f| f != CHECKPOINT);
    let listed: Vec<String> = [CONFIG, DIAGNOSTICS, HISTORY]
        .into_iter()
        .map(String::from)
        .chain(manifest.checkpoint.clone())
        .chain(manifest.snapshots.iter().flat_map(|e| std::iter::once(e.file.clone()).chain(e.companion.clone())))
        .collect();
    manifest.add_files(listed);
    manifest.write(out)?;
    record_timing(out, "run", started.elapsed().as_secs_f64())?;
    Ok(manifest)
}

/// Run independent configurations concurrently, each into `out/<name>`.
pub fn cmd_sweep(
    configs: &[(String, FlowConfig)],
    out: &Path,
    opts: &RunOptions,
    exec: Executor,
) -> Vec<(PathBuf, Result<RunManifest>)> {
    exec.map(configs, |(name, cfg)| {
        let dir = out.join(name);
        let res = cmd_run(cfg, &dir, opts);
        (dir, res)
    })
}
