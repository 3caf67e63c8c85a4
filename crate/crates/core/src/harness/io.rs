//! Trajectory files, dataset manifests and experiment tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::hex_digest;
use super::HarnessError;
use crate::mfe::{Amplitudes, Trajectory, N_MODES};

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"MFETRJ01";

/// Shortest decimal text that still round-trips: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `# key = value` lines prepended to every table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommentHeader(pub Vec<(String, String)>);

impl CommentHeader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    fn render(&self, out: &mut String) {
        for (k, v) in &self.0 {
            let _ = writeln!(out, "# {k} = {}", v.replace('\n', " "));
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Renders a CSV table with a comment header.
pub fn render_table(header: &CommentHeader, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    header.render(&mut out);
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes a file atomically enough for our purposes: a temporary sibling is
/// renamed into place, so a failed run never leaves a partial file.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable {
    pub header: CommentHeader,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn parse_table(text: &str) -> Result<ParsedTable, HarnessError> {
    let mut header = CommentHeader::new();
    let mut columns = None;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some((k, v)) = c.split_once('=') {
                header.push(k.trim(), v.trim());
            }
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        match &columns {
            None => columns = Some(fields),
            Some(cols) => {
                if fields.len() != cols.len() {
                    return Err(HarnessError::Format(format!(
                        "line {}: expected {} fields, found {}",
                        n + 1,
                        cols.len(),
                        fields.len()
                    )));
                }
                rows.push(fields);
            }
        }
    }
    Ok(ParsedTable {
        header,
        columns: columns.ok_or_else(|| HarnessError::Format("missing column header".into()))?,
        rows,
    })
}

pub fn parse_f64(s: &str) -> Result<f64, HarnessError> {
    s.parse().map_err(|_| HarnessError::Format(format!("not a number: {s:?}")))
}

pub fn trajectory_columns() -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=N_MODES).map(|j| format!("a{j}")))
        .collect()
}

pub fn trajectory_to_csv(traj: &Trajectory, header: &CommentHeader) -> String {
    let cols = trajectory_columns();
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = traj
        .states
        .iter()
        .enumerate()
        .map(|(i, a)| {
            std::iter::once(fmt_f64(traj.time(i)))
                .chain(a.0.iter().map(|v| fmt_f64(*v)))
                .collect()
        })
        .collect();
    render_table(header, &cols, &rows)
}

pub fn trajectory_from_csv(text: &str) -> Result<(Trajectory, CommentHeader), HarnessError> {
    let table = parse_table(text)?;
    if table.columns != trajectory_columns() {
        return Err(HarnessError::Format(format!(
            "expected columns t,a1,...,a9, found {}",
            table.columns.join(",")
        )));
    }
    if table.rows.is_empty() {
        return Err(HarnessError::Format("trajectory has no samples".into()));
    }
    let mut times = Vec::with_capacity(table.rows.len());
    let mut states = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        times.push(parse_f64(&row[0])?);
        let mut a = Amplitudes::zeros();
        for j in 0..N_MODES {
            a[j] = parse_f64(&row[j + 1])?;
        }
        states.push(a);
    }
    let dt = if times.len() > 1 {
        (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
    } else {
        table.header.get("dt_sample").map(parse_f64).transpose()?.unwrap_or(1.0)
    };
    if !(dt > 0.0) {
        return Err(HarnessError::Format("times must increase".into()));
    }
    for (i, t) in times.iter().enumerate() {
        if (t - (times[0] + i as f64 * dt)).abs() > 1e-6 * dt.max(1.0) {
            return Err(HarnessError::Format(format!("non-uniform sampling at row {i}")));
        }
    }
    Ok((Trajectory::new(times[0], dt, states), table.header))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryHeader {
    pub re: f64,
    pub dt_sample: f64,
    pub count: u64,
    pub seed: u64,
    pub t0: f64,
}

/// `MFETRJ01`, then `re`, `dt_sample`, `count`, `seed`, `t0` and the states as
/// little-endian doubles, row-major.
pub fn trajectory_to_binary(traj: &Trajectory, re: f64, seed: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(48 + traj.len() * N_MODES * 8);
    out.extend_from_slice(TRAJECTORY_MAGIC);
    out.extend_from_slice(&re.to_le_bytes());
    out.extend_from_slice(&traj.dt_sample.to_le_bytes());
    out.extend_from_slice(&(traj.len() as u64).to_le_bytes());
    out.extend_from_slice(&seed.to_le_bytes());
    out.extend_from_slice(&traj.t0.to_le_bytes());
    for a in &traj.states {
        for v in &a.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn trajectory_from_binary(bytes: &[u8]) -> Result<(Trajectory, BinaryHeader), HarnessError> {
    let word = |i: usize| -> Result<[u8; 8], HarnessError> {
        bytes
            .get(8 + 8 * i..16 + 8 * i)
            .map(|s| s.try_into().unwrap())
            .ok_or_else(|| HarnessError::Format("truncated trajectory header".into()))
    };
    if bytes.len() < 8 || &bytes[..8] != TRAJECTORY_MAGIC {
        return Err(HarnessError::Format("not a binary trajectory (bad magic)".into()));
    }
    let header = BinaryHeader {
        re: f64::from_le_bytes(word(0)?),
        dt_sample: f64::from_le_bytes(word(1)?),
        count: u64::from_le_bytes(word(2)?),
        seed: u64::from_le_bytes(word(3)?),
        t0: f64::from_le_bytes(word(4)?),
    };
    let body = &bytes[48..];
    let expected = (header.count as usize)
        .checked_mul(N_MODES * 8)
        .ok_or_else(|| HarnessError::Format("absurd sample count".into()))?;
    if body.len() != expected || header.count == 0 || !(header.dt_sample > 0.0) {
        return Err(HarnessError::Format(format!(
            "binary trajectory body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let states = body
        .chunks_exact(N_MODES * 8)
        .map(|row| {
            let mut a = Amplitudes::zeros();
            for (j, v) in row.chunks_exact(8).enumerate() {
                a[j] = f64::from_le_bytes(v.try_into().unwrap());
            }
            a
        })
        .collect();
    Ok((Trajectory::new(header.t0, header.dt_sample, states), header))
}

/// Reads a trajectory in either format, chosen by content.
pub fn read_trajectory(path: &Path) -> Result<Trajectory, HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(TRAJECTORY_MAGIC) {
        return Ok(trajectory_from_binary(&bytes)?.0);
    }
    let text = String::from_utf8(bytes).map_err(|_| HarnessError::Format("trajectory is neither binary nor text".into()))?;
    Ok(trajectory_from_csv(&text)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    /// Relative to the manifest.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub re: f64,
    pub dt_sample: f64,
    pub count: usize,
    pub seed: u64,
    pub config_hash: String,
    pub files: Vec<ManifestFile>,
}

impl DatasetManifest {
    pub fn manifest_path(data: &Path) -> PathBuf {
        let mut name = data.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.toml");
        data.with_file_name(name)
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let text = toml::to_string(self).map_err(|e| HarnessError::Format(e.to_string()))?;
        write_file(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| HarnessError::Format(format!("{}: {e}", path.display())))
    }

    /// Recomputes every checksum relative to `dir`.
    pub fn verify(&self, dir: &Path) -> Result<(), HarnessError> {
        for f in &self.files {
            let p = dir.join(&f.path);
            let bytes = fs::read(&p).map_err(|e| HarnessError::Input(format!("{}: {e}", p.display())))?;
            let got = hex_digest(&bytes);
            if got != f.sha256 {
                return Err(HarnessError::Checksum {
                    path: p,
                    expected: f.sha256.clone(),
                    found: got,
                });
            }
        }
        Ok(())
    }
}

pub fn file_sha256(path: &Path) -> Result<String, HarnessError> {
    Ok(hex_digest(&fs::read(path)?))
}

/// Loads a dataset, checking its manifest when one sits next to it.
pub fn load_dataset(path: &Path) -> Result<Trajectory, HarnessError> {
    let manifest = DatasetManifest::manifest_path(path);
    if manifest.exists() {
        let m = DatasetManifest::read(&manifest)?;
        m.verify(manifest.parent().unwrap_or(Path::new(".")))?;
    }
    read_trajectory(path)
}
