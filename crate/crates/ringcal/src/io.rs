//! Text file formats: layouts, positions, traces, cost curves and
//! observation sets.
//!
//! Floats are written in Rust's shortest round-trip form, so every reader
//! here returns bit-identical values.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use ringcal_core::completion::IterationRecord;
use ringcal_core::{DMatrix, MaskPair, ObservationSet, PairSet, PositionEstimate, SensorLayout, StructuredMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PointRow {
    index: usize,
    x_m: f64,
    y_m: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_points(path: &Path, comment: &str, points: impl Iterator<Item = [f64; 2]>) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# {comment}")?;
    let mut w = csv::Writer::from_writer(out);
    for (index, [x_m, y_m]) in points.enumerate() {
        w.serialize(PointRow { index, x_m, y_m })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `index,x_m,y_m` file; returns the points and the `#` comment.
fn read_points(path: &Path) -> Result<(Vec<[f64; 2]>, String)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let comment = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .map(|c| c.trim().to_string())
        .unwrap_or_default();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (k, row) in r.deserialize::<PointRow>().enumerate() {
        let row = row.with_context(|| format!("{}: row {}", path.display(), k + 1))?;
        ensure!(row.index == k, "{}: expected index {k}, found {}", path.display(), row.index);
        points.push([row.x_m, row.y_m]);
    }
    Ok((points, comment))
}

fn comment_field<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    comment
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
}

/// `index,x_m,y_m` with a `# r0_m=… a_m=… seed=…` first line.
pub fn write_layout(path: &Path, layout: &SensorLayout) -> Result<()> {
    let comment = format!("r0_m={} a_m={} seed={}", layout.r0, layout.a, layout.seed);
    write_points(path, &comment, layout.positions.iter().copied())
}

pub fn read_layout(path: &Path) -> Result<SensorLayout> {
    let (positions, comment) = read_points(path)?;
    let field = |key: &str| {
        comment_field(&comment, key).ok_or_else(|| anyhow!("{}: header lacks `{key}=`", path.display()))
    };
    Ok(SensorLayout {
        positions,
        r0: field("r0_m")?.parse().context("r0_m")?,
        a: field("a_m")?.parse().context("a_m")?,
        seed: field("seed")?.parse().context("seed")?,
    })
}

/// Writes the first two coordinates of each point, optionally after
/// rigid alignment to `reference`.
pub fn write_positions(path: &Path, estimate: &PositionEstimate, reference: Option<&DMatrix<f64>>) -> Result<()> {
    let coords = match reference {
        Some(r) => ringcal_core::procrustes_align(r, &estimate.coords)?.0,
        None => estimate.coords.clone(),
    };
    let aligned = PositionEstimate {
        coords,
        source: estimate.source,
    };
    let comment = format!(
        "source={} aligned={}",
        estimate.source.as_str(),
        reference.is_some()
    );
    write_points(path, &comment, (0..aligned.dim()).map(|i| aligned.point(i)))
}

/// Coordinates as an `n × 2` matrix.
pub fn read_positions(path: &Path) -> Result<DMatrix<f64>> {
    let (points, _) = read_points(path)?;
    Ok(DMatrix::from_fn(points.len(), 2, |i, k| points[i][k]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub cost: f64,
    pub grad_norm: f64,
}

pub fn write_trace(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in trace {
        w.serialize(TraceRow {
            iteration: r.iteration,
            cost: r.cost,
            grad_norm: r.grad_norm,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub candidate_m: f64,
    pub cost: f64,
}

/// Rows sorted by candidate; failed candidates appear as `inf`.
pub fn write_cost_curve(path: &Path, costs: &[(f64, f64)]) -> Result<()> {
    let mut rows: Vec<CostRow> = costs
        .iter()
        .map(|&(candidate_m, cost)| CostRow { candidate_m, cost })
        .collect();
    rows.sort_by(|a, b| a.candidate_m.total_cmp(&b.candidate_m));
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cost_curve(path: &Path) -> Result<Vec<CostRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

const MM_BANNER: &str = "%%MatrixMarket matrix coordinate real general";
const SIDECAR_FORMAT: &str = "ringcal-observation";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    n: usize,
    d0_true_m: f64,
    sigma_m: f64,
    c0: f64,
    mode: String,
    /// Zero-based pairs of the structured set `S`.
    structured: Vec<[usize; 2]>,
}

/// Sidecar path for an observation file: same stem, `.json` extension.
pub fn sidecar_path(mtx: &Path) -> PathBuf {
    mtx.with_extension("json")
}

/// Writes `values` on the random mask `E` as one-based coordinate entries,
/// and the structured mask plus metadata as a JSON sidecar.
pub fn write_observation(mtx: &Path, obs: &ObservationSet) -> Result<()> {
    let n = obs.dim();
    let e = &obs.masks.random;
    for i in 0..n {
        for j in 0..n {
            ensure!(
                e.contains(i, j) || obs.values[(i, j)] == 0.0,
                "value at ({i}, {j}) lies outside the random mask"
            );
        }
    }
    let mut out = create(mtx)?;
    writeln!(out, "{MM_BANNER}")?;
    writeln!(out, "% observed distances in meters on the random mask")?;
    writeln!(out, "{n} {n} {}", e.len())?;
    let mut line = String::new();
    for (i, j) in e.iter() {
        line.clear();
        writeln!(line, "{} {} {:e}", i + 1, j + 1, obs.values[(i, j)])?;
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;

    let sidecar = Sidecar {
        format: SIDECAR_FORMAT.to_string(),
        version: 1,
        n,
        d0_true_m: obs.d0_true,
        sigma_m: obs.sigma,
        c0: obs.c0,
        mode: obs.mode.as_str().to_string(),
        structured: obs.masks.structured.iter().map(|(i, j)| [i, j]).collect(),
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(sidecar_path(mtx), json + "\n")?;
    Ok(())
}

pub fn read_observation(mtx: &Path) -> Result<ObservationSet> {
    let side_path = sidecar_path(mtx);
    let side_text = std::fs::read_to_string(&side_path).with_context(|| format!("reading {}", side_path.display()))?;
    let side: Sidecar = serde_json::from_str(&side_text).with_context(|| format!("parsing {}", side_path.display()))?;
    ensure!(side.format == SIDECAR_FORMAT, "{}: unknown format {}", side_path.display(), side.format);
    let mode = StructuredMode::parse(&side.mode).ok_or_else(|| anyhow!("unknown mode {}", side.mode))?;

    let file = File::open(mtx).with_context(|| format!("reading {}", mtx.display()))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| anyhow!("{}: empty file", mtx.display()))?;
    ensure!(banner?.trim() == MM_BANNER, "{}: not a coordinate matrix-market file", mtx.display());

    let mut size: Option<(usize, usize)> = None;
    let n = side.n;
    let mut values = DMatrix::zeros(n, n);
    let mut random = PairSet::empty(n);
    let mut entries = 0;
    for (k, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let at = || format!("{}:{}", mtx.display(), k + 1);
        let fields: Vec<&str> = t.split_whitespace().collect();
        ensure!(fields.len() == 3, "{}: expected three fields", at());
        if size.is_none() {
            let rows: usize = fields[0].parse().with_context(at)?;
            let cols: usize = fields[1].parse().with_context(at)?;
            ensure!(rows == n && cols == n, "{}: size {rows}x{cols} disagrees with sidecar n={n}", at());
            size = Some((rows, fields[2].parse().with_context(at)?));
            continue;
        }
        let i: usize = fields[0].parse().with_context(at)?;
        let j: usize = fields[1].parse().with_context(at)?;
        ensure!((1..=n).contains(&i) && (1..=n).contains(&j) && i != j, "{}: bad index ({i}, {j})", at());
        let v: f64 = fields[2].parse().with_context(at)?;
        ensure!(random.insert(i - 1, j - 1), "{}: duplicate entry ({i}, {j})", at());
        values[(i - 1, j - 1)] = v;
        entries += 1;
    }
    let Some((_, declared)) = size else {
        bail!("{}: missing size line", mtx.display());
    };
    ensure!(declared == entries, "{}: declared {declared} entries, found {entries}", mtx.display());

    let mut structured = PairSet::empty(n);
    for [i, j] in side.structured {
        ensure!(i < n && j < n && i != j, "{}: bad structured pair ({i}, {j})", side_path.display());
        structured.insert(i, j);
    }
    Ok(ObservationSet {
        values,
        masks: MaskPair { structured, random },
        d0_true: side.d0_true_m,
        sigma: side.sigma_m,
        c0: side.c0,
        mode,
    })
}
