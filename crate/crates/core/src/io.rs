//! CSV artifacts, the run manifest, and the mode dispatcher behind the
//! command-line tool.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which round-trips
//! every `f64` exactly. Each output file's content hash is
//! `sha256("blob <len>\0" ++ bytes)`, the construction git uses for blobs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{Mode, RunConfig};
use crate::diagnostics::{
    aggregate_results, boundary_derivative_probe, linearity_metric, norm_series, Sample, Summary,
    Window,
};
use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;
use crate::heat_kernel::{verify_all, EstimateConfig, EstimateReport, HeatKernel};
use crate::noise::NoiseField;
use crate::obstacle::{solve_obstacle, solve_obstacle_exact, ObstaclePath, ObstacleSolution};
use crate::picard::{picard_solve_with, MildOperator, PicardState, Reflection};
use crate::profile::Profile;
use crate::scheme::{monitor_blowup, run, BlowupEvent, Exceedance, SimulationResult};
use crate::Side;

/// Exit status of a completed invocation.
pub mod exit {
    pub const OK: i32 = 0;
    /// Completed without reaching the requested accuracy.
    pub const NUMERICAL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const STABILITY: i32 = 3;
    pub const BLOWUP: i32 = 4;
    pub const IO: i32 = 5;
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stability { .. } => exit::STABILITY,
            Error::Io { .. } | Error::Csv(_) => exit::IO,
            Error::InvalidGrid(_)
            | Error::InvalidProfile(_)
            | Error::Coefficients(_)
            | Error::Config(_)
            | Error::Mismatch(_) => exit::CONFIG,
            Error::NoiseIndex { .. }
            | Error::BelowTimeFloor { .. }
            | Error::Quadrature(_)
            | Error::NonConvergence { .. } => exit::NUMERICAL,
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Hex digest of `sha256("blob <len>\0" ++ bytes)`.
pub fn git_style_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of a CSV file with the named columns blanked, so that fields such as
/// wall-clock times do not affect it.
pub fn hash_csv_excluding(path: &Path, excluded: &[&str]) -> Result<String> {
    if excluded.is_empty() {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        return Ok(git_style_hash(&bytes));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let keep: Vec<bool> = headers.iter().map(|h| !excluded.contains(&h)).collect();
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&headers)?;
    for record in reader.records() {
        let record = record?;
        let row: Vec<&str> = record
            .iter()
            .zip(&keep)
            .map(|(field, &k)| if k { field } else { "" })
            .collect();
        writer.write_record(&row)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    Ok(git_style_hash(&bytes))
}

fn create_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Time rows kept at a given stride; the last stored row is always included.
pub fn strided_rows(len: usize, stride: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..len).step_by(stride.max(1)).collect();
    if len > 0 && rows.last() != Some(&(len - 1)) {
        rows.push(len - 1);
    }
    rows
}

/// `(j, t, i, x, v1, v2, eta1, eta2)`, one line per stored node.
pub fn write_trajectory(path: &Path, result: &SimulationResult, stride: usize) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["j", "t", "i", "x", "v1", "v2", "eta1", "eta2"])?;
    let grid = &result.grid;
    for j in strided_rows(result.len(), stride) {
        let t = fmt_f64(grid.t(j));
        for i in 0..=grid.n() {
            w.write_record([
                j.to_string(),
                t.clone(),
                i.to_string(),
                fmt_f64(grid.x(i)),
                fmt_f64(result.v1[j][i]),
                fmt_f64(result.v2[j][i]),
                fmt_f64(result.eta1[j][i]),
                fmt_f64(result.eta2[j][i]),
            ])?;
        }
    }
    finish(w, path)
}

/// `(j, t, p, boundary_speed)`.
pub fn write_boundary(path: &Path, result: &SimulationResult, stride: usize) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["j", "t", "p", "boundary_speed"])?;
    for j in strided_rows(result.len(), stride) {
        w.write_record([
            j.to_string(),
            fmt_f64(result.grid.t(j)),
            fmt_f64(result.p[j]),
            fmt_f64(result.boundary_speed[j]),
        ])?;
    }
    finish(w, path)
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, k: usize, path: &Path) -> Result<T> {
    record
        .get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config(format!("{}: malformed field {k} in {record:?}", path.display())))
}

/// Reads a trajectory file and its boundary sidecar back into a result. With
/// a strided file the rebuilt grid has one time step per stored row.
pub fn read_trajectory(trajectory: &Path, boundary: &Path) -> Result<SimulationResult> {
    let mut rows: BTreeMap<usize, (f64, Vec<[f64; 4]>)> = BTreeMap::new();
    let mut reader = csv::Reader::from_path(trajectory)?;
    for record in reader.records() {
        let record = record?;
        let j: usize = parse_field(&record, 0, trajectory)?;
        let t: f64 = parse_field(&record, 1, trajectory)?;
        let i: usize = parse_field(&record, 2, trajectory)?;
        let vals = [
            parse_field(&record, 4, trajectory)?,
            parse_field(&record, 5, trajectory)?,
            parse_field(&record, 6, trajectory)?,
            parse_field(&record, 7, trajectory)?,
        ];
        let entry = rows.entry(j).or_insert_with(|| (t, Vec::new()));
        if i != entry.1.len() {
            return Err(Error::Config(format!(
                "{}: node {i} out of order in row {j}",
                trajectory.display()
            )));
        }
        entry.1.push(vals);
    }
    let (_, (t_last, first)) = rows
        .iter()
        .next_back()
        .ok_or_else(|| Error::Config(format!("{}: no rows", trajectory.display())))?;
    let n = first.len() - 1;
    let grid = SpaceTimeGrid::new(n, (rows.len() - 1).max(1), *t_last)?;

    let mut sidecar: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut reader = csv::Reader::from_path(boundary)?;
    for record in reader.records() {
        let record = record?;
        let j: usize = parse_field(&record, 0, boundary)?;
        sidecar.insert(j, (parse_field(&record, 2, boundary)?, parse_field(&record, 3, boundary)?));
    }

    let mut result = SimulationResult {
        grid,
        seed: 0,
        stream_id: 0,
        v1: Vec::new(),
        v2: Vec::new(),
        eta1: Vec::new(),
        eta2: Vec::new(),
        p: Vec::new(),
        boundary_speed: Vec::new(),
        blowup: None,
    };
    for (j, (_, nodes)) in &rows {
        if nodes.len() != n + 1 {
            return Err(Error::Config(format!("{}: row {j} is incomplete", trajectory.display())));
        }
        let column = |k: usize| nodes.iter().map(|v| v[k]).collect::<Vec<f64>>();
        result.v1.push(Profile::new(column(0))?);
        result.v2.push(Profile::new(column(1))?);
        result.eta1.push(column(2));
        result.eta2.push(column(3));
        let (p, s) = sidecar.get(j).copied().ok_or_else(|| {
            Error::Config(format!("{}: missing row {j}", boundary.display()))
        })?;
        result.p.push(p);
        result.boundary_speed.push(s);
    }
    Ok(result)
}

/// `(j, t, h1, h2, speed)`.
pub fn write_norms(path: &Path, result: &SimulationResult) -> Result<()> {
    let s = norm_series(result);
    let mut w = create_writer(path)?;
    w.write_record(["j", "t", "h1", "h2", "speed"])?;
    for j in 0..s.t.len() {
        w.write_record([
            j.to_string(),
            fmt_f64(s.t[j]),
            fmt_f64(s.h1[j]),
            fmt_f64(s.h2[j]),
            fmt_f64(s.speed[j]),
        ])?;
    }
    finish(w, path)
}

fn opt_index(i: Option<usize>) -> String {
    i.map(|i| i.to_string()).unwrap_or_default()
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// `(level, speed_level, norm_index, speed_index)`; empty cells mean the
/// level was never reached.
pub fn write_exceedance(path: &Path, rows: &[Exceedance]) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["level", "speed_level", "norm_index", "speed_index"])?;
    for r in rows {
        w.write_record([
            fmt_f64(r.level),
            fmt_f64(r.speed_level),
            opt_index(r.norm_index),
            opt_index(r.speed_index),
        ])?;
    }
    finish(w, path)
}

/// `(side, time_average, degenerate, steps)`.
pub fn write_linearity(path: &Path, result: &SimulationResult, window: Window) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["side", "time_average", "degenerate", "steps"])?;
    for side in Side::BOTH {
        let m = linearity_metric(result, side, window)?;
        w.write_record([
            (side.index() + 1).to_string(),
            fmt_f64(m.time_average),
            m.degenerate.to_string(),
            m.per_time.len().to_string(),
        ])?;
    }
    finish(w, path)
}

/// `(j, t, i, x, w, z, eta)`.
pub fn write_obstacle(path: &Path, grid: &SpaceTimeGrid, sol: &ObstacleSolution, z: &ObstaclePath) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["j", "t", "i", "x", "w", "z", "eta"])?;
    for (j, ((wr, zr), er)) in sol.w.iter().zip(z.rows()).zip(&sol.eta).enumerate() {
        let t = fmt_f64(grid.t(j));
        for i in 0..=grid.n() {
            w.write_record([
                j.to_string(),
                t.clone(),
                i.to_string(),
                fmt_f64(grid.x(i)),
                fmt_f64(wr[i]),
                fmt_f64(zr[i]),
                fmt_f64(er[i]),
            ])?;
        }
    }
    finish(w, path)
}

/// `(n, d_n, wall_time_ms)`.
pub fn write_picard_diffs(path: &Path, state: &PicardState) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["n", "d_n", "wall_time_ms"])?;
    for (k, (d, ms)) in state.diffs.iter().zip(&state.wall_time_ms).enumerate() {
        w.write_record([(k + 1).to_string(), fmt_f64(*d), format!("{ms:.3}")])?;
    }
    finish(w, path)
}

/// `(j, t, i, x, v1, v2, z1, z2)` for the last Picard iterate.
pub fn write_picard_iterate(path: &Path, grid: &SpaceTimeGrid, state: &PicardState, stride: usize) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["j", "t", "i", "x", "v1", "v2", "z1", "z2"])?;
    for j in strided_rows(state.v1.len(), stride) {
        let t = fmt_f64(grid.t(j));
        for i in 0..=grid.n() {
            w.write_record([
                j.to_string(),
                t.clone(),
                i.to_string(),
                fmt_f64(grid.x(i)),
                fmt_f64(state.v1[j][i]),
                fmt_f64(state.v2[j][i]),
                fmt_f64(state.z1[j][i]),
                fmt_f64(state.z2[j][i]),
            ])?;
        }
    }
    finish(w, path)
}

/// `(inequality_id, t, x, h, q, raw, scaled, scaled_alt)`; unused parameter
/// cells are empty.
pub fn write_estimates(path: &Path, reports: &[EstimateReport]) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["inequality_id", "t", "x", "h", "q", "raw", "scaled", "scaled_alt"])?;
    for r in reports {
        for p in &r.sweep {
            w.write_record([
                r.id.as_str().to_string(),
                opt_f64(p.t),
                opt_f64(p.x),
                opt_f64(p.h),
                opt_f64(p.q),
                fmt_f64(p.raw),
                fmt_f64(p.scaled),
                opt_f64(p.scaled_alt),
            ])?;
        }
    }
    finish(w, path)
}

/// `(inequality_id, worst_constant, spread, growth_detected, passed)`.
pub fn write_estimate_summary(path: &Path, reports: &[EstimateReport]) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["inequality_id", "worst_constant", "spread", "growth_detected", "passed"])?;
    for r in reports {
        w.write_record([
            r.id.as_str().to_string(),
            fmt_f64(r.worst_constant),
            fmt_f64(r.spread),
            r.growth_detected.to_string(),
            r.passed.to_string(),
        ])?;
    }
    finish(w, path)
}

/// `(preset, metric, mean, median, p10, p90, n_seeds)`.
pub fn write_summary(path: &Path, preset: &str, rows: &[(String, Summary)]) -> Result<()> {
    let mut w = create_writer(path)?;
    w.write_record(["preset", "metric", "mean", "median", "p10", "p90", "n_seeds"])?;
    for (metric, s) in rows {
        w.write_record([
            preset.to_string(),
            metric.clone(),
            fmt_f64(s.mean),
            fmt_f64(s.median),
            fmt_f64(s.p10),
            fmt_f64(s.p90),
            s.n.to_string(),
        ])?;
    }
    finish(w, path)
}

/// Reads a summary file written by [`write_summary`].
pub fn read_summary(path: &Path) -> Result<Vec<(String, String, Summary)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let preset = record.get(0).unwrap_or_default().to_string();
        let metric = record.get(1).unwrap_or_default().to_string();
        out.push((
            preset,
            metric.clone(),
            Summary {
                config_key: metric,
                mean: parse_field(&record, 2, path)?,
                median: parse_field(&record, 3, path)?,
                p10: parse_field(&record, 4, path)?,
                p90: parse_field(&record, 5, path)?,
                n: parse_field(&record, 6, path)?,
            },
        ));
    }
    Ok(out)
}

/// Flat `key=value` manifest. Keys keep insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// `hash.<file>` entries only.
    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("hash.").map(|f| (f.to_string(), v.clone())))
            .collect()
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={}\n", v.replace('\n', "\\n")))
            .collect()
    }

    pub fn parse(text: &str) -> Self {
        Self {
            entries: text
                .lines()
                .filter_map(|l| l.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?))
    }
}

fn flatten_toml(prefix: &str, value: &toml::Value, out: &mut Manifest) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_toml(&key, v, out);
            }
        }
        other => out.push(format!("config.{prefix}"), other),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecOptions {
    /// Worker threads for ensemble runs; `0` uses rayon's default.
    pub workers: usize,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self { workers: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub status: String,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

struct Artifacts {
    dir: PathBuf,
    /// `(file name, columns excluded from the hash)`.
    files: Vec<(String, Vec<&'static str>)>,
    manifest: Manifest,
    status: String,
    exit_code: i32,
}

impl Artifacts {
    fn path(&mut self, name: &str) -> PathBuf {
        self.path_excluding(name, Vec::new())
    }

    fn path_excluding(&mut self, name: &str, excluded: Vec<&'static str>) -> PathBuf {
        self.files.push((name.to_string(), excluded));
        self.dir.join(name)
    }

    fn set_status(&mut self, status: &str, code: i32) {
        self.status = status.to_string();
        self.exit_code = code;
    }
}

/// Runs the configured mode, writes its artifacts and `manifest.txt` into
/// `config.output_dir`, and reports the exit status. Errors before any output
/// is produced are returned as `Err`; see [`Error::exit_code`].
pub fn execute(config: &RunConfig, opts: ExecOptions) -> Result<Outcome> {
    config.validate()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let start = Instant::now();
    let mut art = Artifacts {
        dir: dir.clone(),
        files: Vec::new(),
        manifest: Manifest::default(),
        status: "ok".into(),
        exit_code: exit::OK,
    };
    art.manifest.push("mode", config.mode.as_str());
    art.manifest.push("crate_version", env!("CARGO_PKG_VERSION"));
    art.manifest.push("seed", config.seed);

    match config.mode {
        Mode::Simulate => simulate(config, &mut art)?,
        Mode::Ensemble => ensemble(config, opts, &mut art)?,
        Mode::Obstacle => obstacle(config, &mut art)?,
        Mode::Picard => picard(config, &mut art)?,
        Mode::VerifyKernel => verify_kernel(config, &mut art)?,
        Mode::Diagnose => diagnose(config, &mut art)?,
    }

    let config_text = config.to_toml();
    let config_path = art.path("config.toml");
    fs::write(&config_path, &config_text).map_err(|e| Error::io(&config_path, e))?;
    let parsed: toml::Value = toml::from_str(&config_text).expect("configuration re-parses");
    flatten_toml("", &parsed, &mut art.manifest);

    art.manifest.push("status", &art.status);
    art.manifest.push("exit_code", art.exit_code);
    art.manifest.push("wall_time_ms", format!("{:.3}", start.elapsed().as_secs_f64() * 1e3));
    art.manifest.push("hash_scheme", "sha256(\"blob <len>\\0\" ++ content)");
    let files = std::mem::take(&mut art.files);
    for (name, excluded) in &files {
        let hash = hash_csv_excluding(&dir.join(name), excluded)?;
        art.manifest.push(format!("hash.{name}"), hash);
        if !excluded.is_empty() {
            art.manifest.push(format!("hash_excludes.{name}"), excluded.join(","));
        }
    }
    let manifest_path = dir.join("manifest.txt");
    fs::write(&manifest_path, art.manifest.render()).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(Outcome {
        exit_code: art.exit_code,
        status: art.status,
        manifest_path,
        manifest: art.manifest,
    })
}

fn record_blowup(art: &mut Artifacts, prefix: &str, ev: &BlowupEvent) {
    art.manifest.push(format!("{prefix}blowup_index"), ev.index);
    art.manifest.push(format!("{prefix}blowup_side"), ev.side.index() + 1);
    art.manifest.push(format!("{prefix}blowup_reason"), format!("{:?}", ev.reason).to_lowercase());
    art.manifest.push(format!("{prefix}blowup_h_norm"), fmt_f64(ev.h_norm));
}

fn speed_scale(config: &RunConfig) -> Result<f64> {
    Ok(match config.monitor.speed_scale {
        Some(s) => s,
        None => config.coefficient_set()?.boundary.gamma().unwrap_or(1.0),
    })
}

fn simulate(config: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let grid = config.grid.build()?;
    let coeffs = config.coefficient_set()?;
    let nf = NoiseField::new(config.seed, 0, grid.n(), grid.m());
    let result = run(&coeffs, &grid, &nf, &config.scheme_options())?;
    let stride = config.output.stride;
    write_trajectory(&art.path("trajectory.csv"), &result, stride)?;
    write_boundary(&art.path("boundary.csv"), &result, stride)?;
    write_norms(&art.path("norms.csv"), &result)?;
    if config.diagnose.window.nodes(grid.n()).count() >= 3 {
        write_linearity(&art.path("linearity.csv"), &result, config.diagnose.window)?;
    }
    if !config.monitor.levels.is_empty() {
        let table = monitor_blowup(&result, &config.monitor.levels, speed_scale(config)?);
        write_exceedance(&art.path("exceedance.csv"), &table)?;
    }
    art.manifest.push("stream_id", 0);
    art.manifest.push("time_rows", result.len());
    if let Some(ev) = &result.blowup {
        record_blowup(art, "", ev);
        art.set_status("blowup", exit::BLOWUP);
    }
    Ok(())
}

/// Per-run scalar diagnostics collected by ensemble mode.
pub fn member_metrics(result: &SimulationResult, window: Window) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    if window.nodes(result.grid.n()).count() >= 3 {
        for (side, name) in [(Side::One, "linearity_v1"), (Side::Two, "linearity_v2")] {
            if let Ok(m) = linearity_metric(result, side, window) {
                out.push((name, m.time_average));
            }
        }
    }
    if let Ok(p) = boundary_derivative_probe(result, Side::One, result.len() - 1) {
        out.push(("probe_spread_v1", p.spread));
    }
    let norms = norm_series(result);
    let peak = norms
        .h1
        .iter()
        .zip(&norms.h2)
        .map(|(a, b)| a + b)
        .fold(0.0, f64::max);
    out.push(("max_h_norm", peak));
    out.push(("final_p", *result.p.last().expect("non-empty")));
    out
}

fn ensemble(config: &RunConfig, opts: ExecOptions, art: &mut Artifacts) -> Result<()> {
    let grid = config.grid.build()?;
    let coeffs = config.coefficient_set()?;
    let scheme_opts = config.scheme_options();
    let dir = art.dir.clone();
    let write_runs = config.output.ensemble_trajectories;
    let stride = config.output.stride;
    let window = config.diagnose.window;
    let member = |stream: u64| -> Result<(u64, Vec<(&'static str, f64)>, Option<BlowupEvent>)> {
        let nf = NoiseField::new(config.seed, stream, grid.n(), grid.m());
        let r = run(&coeffs, &grid, &nf, &scheme_opts)?;
        if write_runs {
            write_trajectory(&dir.join(format!("runs/stream_{stream:04}_trajectory.csv")), &r, stride)?;
            write_boundary(&dir.join(format!("runs/stream_{stream:04}_boundary.csv")), &r, stride)?;
        }
        Ok((stream, member_metrics(&r, window), r.blowup))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("workers: {e}")))?;
    let members: Vec<_> = pool.install(|| {
        (0..config.n_seeds)
            .into_par_iter()
            .map(member)
            .collect::<Result<Vec<_>>>()
    })?;
    if write_runs {
        for stream in 0..config.n_seeds {
            art.files.push((format!("runs/stream_{stream:04}_trajectory.csv"), Vec::new()));
            art.files.push((format!("runs/stream_{stream:04}_boundary.csv"), Vec::new()));
        }
    }

    let metrics_path = art.path("metrics.csv");
    let mut w = create_writer(&metrics_path)?;
    w.write_record(["stream_id", "metric", "value"])?;
    let mut by_metric: BTreeMap<&str, Vec<Sample>> = BTreeMap::new();
    let mut blowups = 0;
    for (stream, metrics, blowup) in &members {
        if let Some(ev) = blowup {
            blowups += 1;
            record_blowup(art, &format!("stream_{stream}."), ev);
        }
        for (name, value) in metrics {
            w.write_record([stream.to_string(), name.to_string(), fmt_f64(*value)])?;
            by_metric.entry(name).or_default().push(Sample {
                stream_id: *stream,
                config_key: name.to_string(),
                value: *value,
            });
        }
    }
    finish(w, &metrics_path)?;

    let mut rows = Vec::new();
    for (name, samples) in &by_metric {
        if samples.len() as u64 == config.n_seeds && samples.iter().all(|s| s.value.is_finite()) {
            rows.push((name.to_string(), crate::diagnostics::ensemble_aggregate(samples)?));
        }
    }
    write_summary(&art.path("summary.csv"), &config.preset, &rows)?;
    art.manifest.push("n_seeds", config.n_seeds);
    art.manifest.push("blowups", blowups);
    if blowups > 0 {
        art.set_status("blowup", exit::BLOWUP);
    }
    Ok(())
}

fn obstacle(config: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let grid = config.grid.build()?;
    let spec = &config.obstacle;
    let z = ObstaclePath::from_fn(&grid, spec.obstacle())?;
    let sol = if spec.exact {
        solve_obstacle_exact(&z, &grid)?
    } else {
        solve_obstacle(&z, &grid, spec.schedule())?
    };
    write_obstacle(&art.path("obstacle.csv"), &grid, &sol, &z)?;
    let path = art.path("obstacle_schedule.csv");
    let mut w = create_writer(&path)?;
    w.write_record(["eps", "violation"])?;
    for (eps, v) in sol.epsilon_schedule.iter().zip(&sol.violations) {
        w.write_record([fmt_f64(*eps), fmt_f64(*v)])?;
    }
    finish(w, &path)?;
    let path = art.path("obstacle_summary.csv");
    let mut w = create_writer(&path)?;
    w.write_record(["quantity", "value"])?;
    let rows = [
        ("final_eps", sol.final_eps()),
        ("residual", sol.residual),
        ("tolerance", crate::obstacle::obstacle_tolerance(&z, sol.final_eps())),
        ("complementarity", sol.complementarity(&z)),
        ("complementarity_abs", sol.complementarity_abs(&z)),
        ("complementarity_tolerance", crate::obstacle::complementarity_tolerance(&z)),
        ("total_eta", sol.total_eta()),
        ("newton_iterations", sol.newton_iterations as f64),
    ];
    for (k, v) in rows {
        w.write_record([k.to_string(), fmt_f64(v)])?;
    }
    finish(w, &path)
}

fn picard(config: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let grid = config.grid.build()?;
    let coeffs = config.coefficient_set()?;
    let nf = NoiseField::new(config.seed, 0, grid.n(), grid.m());
    let kernel = HeatKernel::new(config.kernel.image_terms, config.kernel.t_floor)?;
    let op = MildOperator::with_kernel(&grid, &kernel);
    let reflection = match config.picard.penalty_eps_min {
        Some(eps_min) => Reflection::Penalized { eps_min },
        None => Reflection::Exact,
    };
    let state = picard_solve_with(&op, &coeffs, &nf, config.picard.n_max, config.picard.d_tol, reflection)?;
    write_picard_diffs(&art.path_excluding("picard_diffs.csv", vec!["wall_time_ms"]), &state)?;
    write_picard_iterate(&art.path("picard_iterate.csv"), &grid, &state, config.output.stride)?;
    art.manifest.push("iterations", state.iteration);
    art.manifest.push("converged", state.converged);
    if !state.converged {
        art.set_status("not_converged", exit::NUMERICAL);
    }
    Ok(())
}

fn verify_kernel(config: &RunConfig, art: &mut Artifacts) -> Result<()> {
    // The sweeps integrate down to t = 0, so only the image count is taken
    // from the configuration; its time floor is meant for the mild solver.
    let defaults = EstimateConfig::default();
    let est = EstimateConfig {
        kernel: HeatKernel::new(config.kernel.image_terms, defaults.kernel.t_floor())?,
        ..defaults
    };
    let reports = verify_all(&est)?;
    write_estimates(&art.path("estimates.csv"), &reports)?;
    write_estimate_summary(&art.path("estimates_summary.csv"), &reports)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.id.as_str()).collect();
    art.manifest.push("estimates_failed", failed.join(","));
    Ok(())
}

fn diagnose(config: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let input = config.diagnose.input.as_ref().expect("validated");
    let boundary = input.with_file_name("boundary.csv");
    let result = read_trajectory(input, &boundary)?;
    let window = config.diagnose.window;
    write_linearity(&art.path("diagnose_linearity.csv"), &result, window)?;
    write_norms(&art.path("diagnose_norms.csv"), &result)?;
    let path = art.path("diagnose_probe.csv");
    let mut w = create_writer(&path)?;
    w.write_record(["side", "k", "x", "slope", "spread"])?;
    for side in Side::BOTH {
        let probe = boundary_derivative_probe(&result, side, result.len() - 1)?;
        for (k, s) in crate::diagnostics::PROBE_SCALES.iter().zip(probe.slopes) {
            w.write_record([
                (side.index() + 1).to_string(),
                k.to_string(),
                fmt_f64(result.grid.x(*k)),
                fmt_f64(s),
                fmt_f64(probe.spread),
            ])?;
        }
    }
    finish(w, &path)?;
    art.manifest.push("input", input.display());
    Ok(())
}

/// Ensemble summary of an arbitrary metric, for callers working in memory.
pub fn summarize(results: &[SimulationResult], name: &str, metric: impl Fn(&SimulationResult) -> Result<f64>) -> Result<Summary> {
    aggregate_results(results, name, metric)
}
