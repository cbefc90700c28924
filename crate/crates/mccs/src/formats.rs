//! On-disk formats: key JSON, golden matrix binaries, and CSV or JSON
//! experiment artifacts.
//!
//! CSV outputs open with `#` comment lines naming the tool version and the
//! resolved config; JSON outputs carry the same in `tool` and `config`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use mccs_core::{DenseMatrix, EncodingMatrix, KeyChain, OrthonormalBasis, Seed};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = concat!("mccs ", env!("CARGO_PKG_VERSION"));

/// Shortest round-trip text of a float.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn finish(path: &Path, mut w: impl Write) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// CSV writer whose file opens with the provenance comment lines.
pub struct CsvOut {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create<C: Serialize>(path: &Path, config: &C, header: &[String]) -> CliResult<Self> {
        let mut f = create(path)?;
        let cfg = serde_json::to_string(config).map_err(|e| CliError::format(path, e))?;
        writeln!(f, "# tool: {TOOL}").map_err(|e| CliError::io(path, e))?;
        writeln!(f, "# config: {cfg}").map_err(|e| CliError::io(path, e))?;
        let mut inner = csv::Writer::from_writer(f);
        inner.write_record(header).map_err(|e| CliError::format(path, e))?;
        Ok(CsvOut {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner
            .write_record(fields)
            .map_err(|e| CliError::format(&self.path, e))
    }

    pub fn finish(self) -> CliResult<()> {
        let path = self.path;
        let mut inner = self.inner;
        inner.flush().map_err(|e| CliError::io(&path, e))
    }
}

fn csv_reader(path: &Path, headers: bool) -> CliResult<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(headers)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(f))
}

fn parse_f64(path: &Path, s: &str) -> CliResult<f64> {
    s.parse::<f64>()
        .map_err(|_| CliError::format(path, format!("not a number: {s:?}")))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::format(path, e))?;
    writeln!(f).map_err(|e| CliError::io(path, e))?;
    finish(path, f)
}

/// JSON report with provenance.
#[derive(Serialize)]
pub struct Report<'a, C: Serialize, B: Serialize> {
    pub tool: &'static str,
    pub config: &'a C,
    #[serde(flatten)]
    pub body: B,
}

impl<'a, C: Serialize, B: Serialize> Report<'a, C, B> {
    pub fn new(config: &'a C, body: B) -> Self {
        Report {
            tool: TOOL,
            config,
            body,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyFile {
    w: usize,
    matrix_seed: String,
    flip_seeds: Vec<String>,
}

pub fn write_key(path: &Path, keys: &KeyChain) -> CliResult<()> {
    let kf = KeyFile {
        w: keys.class_count(),
        matrix_seed: keys.matrix_seed().0.to_string(),
        flip_seeds: keys.flip_seeds().iter().map(|s| s.0.to_string()).collect(),
    };
    write_json(path, &kf)
}

pub fn read_key(path: &Path) -> CliResult<KeyChain> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::io(path, e))?;
    let kf: KeyFile = serde_json::from_str(&text).map_err(|e| CliError::format(path, e))?;
    let seed = |s: &str| {
        s.parse::<u64>()
            .map(Seed)
            .map_err(|_| CliError::format(path, format!("seed {s:?} is not a u64")))
    };
    let flips = kf
        .flip_seeds
        .iter()
        .map(|s| seed(s))
        .collect::<CliResult<Vec<_>>>()?;
    if kf.w != flips.len() + 1 {
        return Err(CliError::format(
            path,
            format!("w = {} but {} flip seeds", kf.w, flips.len()),
        ));
    }
    Ok(KeyChain::new(seed(&kf.matrix_seed)?, flips))
}

/// Golden matrix file: `m, n, u, frame_index` as little-endian `u32`, then
/// the entries row-major, eight per byte, first entry in the most
/// significant bit, bit 1 for `-1`. The last byte is zero-padded.
pub fn matrix_bytes(a: &EncodingMatrix) -> CliResult<Vec<u8>> {
    let field = |v: u64, what: &str| {
        u32::try_from(v).map_err(|_| CliError::config(format!("{what} does not fit in 32 bits")))
    };
    let mut out = Vec::with_capacity(16 + a.entries().len().div_ceil(8));
    for (v, what) in [
        (a.rows() as u64, "rows"),
        (a.cols() as u64, "cols"),
        (a.class_level() as u64, "class"),
        (a.frame_index(), "frame index"),
    ] {
        out.extend_from_slice(&field(v, what)?.to_le_bytes());
    }
    for chunk in a.entries().chunks(8) {
        let mut byte = 0u8;
        for (i, &e) in chunk.iter().enumerate() {
            if e < 0 {
                byte |= 0x80 >> i;
            }
        }
        out.push(byte);
    }
    Ok(out)
}

pub fn write_matrix(path: &Path, a: &EncodingMatrix) -> CliResult<()> {
    let bytes = matrix_bytes(a)?;
    let mut f = create(path)?;
    f.write_all(&bytes).map_err(|e| CliError::io(path, e))?;
    finish(path, f)
}

pub fn read_matrix(path: &Path) -> CliResult<EncodingMatrix> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&bytes).map_err(|msg| CliError::format(path, msg))
}

pub fn parse_matrix(bytes: &[u8]) -> Result<EncodingMatrix, String> {
    if bytes.len() < 16 {
        return Err("truncated header".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let (m, n, u, frame) = (word(0) as usize, word(1) as usize, word(2) as usize, word(3) as u64);
    let count = m.checked_mul(n).ok_or("dimensions overflow")?;
    let body = &bytes[16..];
    if body.len() != count.div_ceil(8) {
        return Err(format!("expected {} packed bytes, found {}", count.div_ceil(8), body.len()));
    }
    let entries = (0..count)
        .map(|i| if body[i / 8] & (0x80 >> (i % 8)) != 0 { -1 } else { 1 })
        .collect();
    EncodingMatrix::from_entries(m, n, entries, u, frame).map_err(|e| e.to_string())
}

/// Rows of `frame_index, v_0 .. v_(len-1)`.
pub fn write_frames<C: Serialize>(
    path: &Path,
    config: &C,
    prefix: &str,
    len: usize,
    rows: &[(u64, Vec<f64>)],
) -> CliResult<()> {
    let mut header = vec!["frame_index".to_string()];
    header.extend((0..len).map(|i| format!("{prefix}_{i}")));
    let mut out = CsvOut::create(path, config, &header)?;
    for (idx, v) in rows {
        let mut rec = Vec::with_capacity(len + 1);
        rec.push(idx.to_string());
        rec.extend(v.iter().map(|&x| num(x)));
        out.row(rec)?;
    }
    out.finish()
}

pub fn read_frames(path: &Path) -> CliResult<Vec<(u64, Vec<f64>)>> {
    let mut rdr = csv_reader(path, true)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::format(path, e))?;
        let mut it = rec.iter();
        let idx = it
            .next()
            .ok_or_else(|| CliError::format(path, "empty row"))?
            .parse::<u64>()
            .map_err(|_| CliError::format(path, "bad frame index"))?;
        let v = it.map(|s| parse_f64(path, s)).collect::<CliResult<Vec<f64>>>()?;
        out.push((idx, v));
    }
    Ok(out)
}

/// `n x n` CSV, no header.
pub fn read_basis(path: &Path) -> CliResult<OrthonormalBasis> {
    let mut rdr = csv_reader(path, false)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::format(path, e))?;
        rows.push(rec.iter().map(|s| parse_f64(path, s)).collect::<CliResult<_>>()?);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::format(path, "basis must be a square matrix"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let d = DenseMatrix::from_row_major(n, n, flat)?;
    Ok(OrthonormalBasis::from_matrix(d)?)
}

/// Single-column CSV, one sample per line, no header.
pub fn read_signal(path: &Path) -> CliResult<Vec<f64>> {
    let mut rdr = csv_reader(path, false)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::format(path, e))?;
        if rec.len() != 1 {
            return Err(CliError::format(path, "expected a single column"));
        }
        out.push(parse_f64(path, &rec[0])?);
    }
    Ok(out)
}
