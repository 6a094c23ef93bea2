//! Snapshots, checkpoints and time-series files.
//!
//! Snapshot layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8 | magic `MHDBFED\0` |
//! | 4 | version (`u32`) |
//! | 4 | `N` (`u32`) |
//! | 48 | `L, nu, kappa, a, alpha, t` (`f64`) |
//! | 4 | field count, always 2 (`u32`) |
//! | 4 | layout tag (`u32`) |
//! | rest | coefficients as `(re, im)` `f64` pairs |
//!
//! Coefficients run over field (`u`, `b`), then component, then the
//! half spectrum `N x N x (N/2+1)` with `k_z` fastest.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::{monitor, MonitorRecord};
use crate::error::{Error, Result};
use crate::integrator::StepSink;
use crate::rhs::PhysParams;
use crate::spectral::{Complex64, Grid, SpectralField};
use crate::state::State;

pub const MAGIC: [u8; 8] = *b"MHDBFED\0";
pub const VERSION: u32 = 1;
/// Half spectrum, `k_z` fastest.
pub const LAYOUT_HALF_KZ_FAST: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 6 * 8 + 4 + 4;

pub const TIMESERIES_HEADER: &str = "t,E,grad_u_sq,grad_b_sq,u_damp_norm,b_crit_norm,div_u_res,div_b_res,mean_ux,mean_uy,mean_uz,mean_bx,mean_by,mean_bz";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub version: u32,
    pub n: u32,
    pub l: f64,
    pub nu: f64,
    pub kappa: f64,
    pub a: f64,
    pub alpha: f64,
    pub t: f64,
    pub field_count: u32,
    pub layout: u32,
}

impl SnapshotHeader {
    pub fn params(&self) -> Result<PhysParams> {
        PhysParams::new(self.nu, self.kappa, self.a, self.alpha)
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        for v in [self.l, self.nu, self.kappa, self.a, self.alpha, self.t] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.field_count.to_le_bytes());
        out.extend_from_slice(&self.layout.to_le_bytes());
        out
    }

    fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let fmt = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < HEADER_LEN {
            return Err(fmt(format!("truncated header ({} bytes)", bytes.len())));
        }
        if bytes[..8] != MAGIC {
            return Err(fmt("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            return Err(fmt(format!("unsupported version {version}")));
        }
        let h = SnapshotHeader {
            version,
            n: u32_at(12),
            l: f64_at(16),
            nu: f64_at(24),
            kappa: f64_at(32),
            a: f64_at(40),
            alpha: f64_at(48),
            t: f64_at(56),
            field_count: u32_at(64),
            layout: u32_at(68),
        };
        if h.field_count != 2 {
            return Err(fmt(format!("expected 2 fields, got {}", h.field_count)));
        }
        if h.layout != LAYOUT_HALF_KZ_FAST {
            return Err(fmt(format!("unknown layout tag {}", h.layout)));
        }
        Ok(h)
    }
}

pub fn write_snapshot(state: &State, params: &PhysParams, path: &Path) -> Result<()> {
    let grid = state.grid();
    let header = SnapshotHeader {
        version: VERSION,
        n: grid.n() as u32,
        l: grid.l(),
        nu: params.nu,
        kappa: params.kappa,
        a: params.a,
        alpha: params.alpha,
        t: state.t,
        field_count: 2,
        layout: LAYOUT_HALF_KZ_FAST,
    };
    let mut bytes = header.encode();
    bytes.reserve(6 * grid.spectral_len() * 16);
    for field in [&state.u_hat, &state.b_hat] {
        for comp in field.comps() {
            for c in comp {
                bytes.extend_from_slice(&c.re.to_le_bytes());
                bytes.extend_from_slice(&c.im.to_le_bytes());
            }
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Read a snapshot with whatever grid and parameters it carries.
pub fn read_snapshot(path: &Path) -> Result<(State, PhysParams)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let header = SnapshotHeader::decode(&bytes, path)?;
    let grid = Grid::new(header.n as usize, header.l)?;
    let len = grid.spectral_len();
    let body = &bytes[HEADER_LEN..];
    if body.len() != 6 * len * 16 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("expected {} coefficient bytes, found {}", 6 * len * 16, body.len()),
        });
    }
    let mut values = body.chunks_exact(16).map(|c| {
        Complex64::new(
            f64::from_le_bytes(c[..8].try_into().unwrap()),
            f64::from_le_bytes(c[8..].try_into().unwrap()),
        )
    });
    let mut field = || -> Result<SpectralField> {
        let comps = [0, 1, 2].map(|_| values.by_ref().take(len).collect::<Vec<_>>());
        SpectralField::from_components(&grid, comps)
    };
    let u_hat = field()?;
    let b_hat = field()?;
    Ok((State::new(u_hat, b_hat, header.t)?, header.params()?))
}

/// Read a snapshot for a restart: the resolution, box and parameters must
/// match the running configuration exactly.
pub fn read_snapshot_strict(path: &Path, grid: &Grid, params: &PhysParams) -> Result<State> {
    let (state, found) = read_snapshot(path)?;
    let file_grid = state.grid();
    if file_grid.n() != grid.n() {
        return Err(Error::ResolutionMismatch {
            expected: grid.n(),
            found: file_grid.n(),
        });
    }
    let checks = [
        ("L", grid.l(), file_grid.l()),
        ("nu", params.nu, found.nu),
        ("kappa", params.kappa, found.kappa),
        ("a", params.a, found.a),
        ("alpha", params.alpha, found.alpha),
    ];
    for (name, expected, got) in checks {
        if expected.to_bits() != got.to_bits() {
            return Err(Error::ParameterMismatch {
                name,
                expected,
                found: got,
            });
        }
    }
    Ok(state)
}

/// Writes `checkpoint_<step>.bin` into a directory every `cadence` steps.
#[derive(Debug)]
pub struct CheckpointSink {
    pub dir: PathBuf,
    pub params: PhysParams,
    pub cadence: usize,
    pub written: Vec<(usize, f64, PathBuf)>,
}

impl CheckpointSink {
    pub fn new(dir: impl Into<PathBuf>, params: PhysParams, cadence: usize) -> Self {
        CheckpointSink {
            dir: dir.into(),
            params,
            cadence: cadence.max(1),
            written: Vec::new(),
        }
    }

    pub fn path_for(&self, step: usize) -> PathBuf {
        self.dir.join(format!("checkpoint_{step:08}.bin"))
    }
}

impl StepSink for CheckpointSink {
    fn cadence(&self) -> usize {
        self.cadence
    }

    fn observe(&mut self, step: usize, state: &State) -> Result<()> {
        let path = self.path_for(step);
        write_snapshot(state, &self.params, &path)?;
        self.written.push((step, state.t, path));
        Ok(())
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_row(r: &MonitorRecord) -> String {
    let mut cols = vec![
        fmt_f64(r.t),
        fmt_f64(r.energy),
        fmt_f64(r.grad_u_sq),
        fmt_f64(r.grad_b_sq),
        fmt_f64(r.u_damp_norm),
        r.b_crit_norm.map(fmt_f64).unwrap_or_default(),
        fmt_f64(r.div_u_res),
        fmt_f64(r.div_b_res),
    ];
    cols.extend(r.mean_u.iter().chain(&r.mean_b).map(|v| fmt_f64(*v)));
    cols.join(",")
}

fn check_header(path: &Path) -> Result<bool> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(false),
        Err(e) => return Err(Error::io(format!("opening {}", path.display()), e)),
    };
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    if first.is_empty() {
        return Ok(false);
    }
    if first.trim_end() != TIMESERIES_HEADER {
        return Err(Error::ColumnMismatch {
            path: path.to_path_buf(),
        });
    }
    Ok(true)
}

/// Append one row, writing the header first if the file is new or empty.
/// Numbers carry 17 significant digits; an absent `b_crit_norm` is an
/// empty field.
pub fn append_timeseries(record: &MonitorRecord, path: &Path) -> Result<()> {
    let has_header = check_header(path)?;
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut text = String::new();
    if !has_header {
        text.push_str(TIMESERIES_HEADER);
        text.push('\n');
    }
    text.push_str(&format_row(record));
    text.push('\n');
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_timeseries(path: &Path) -> Result<Vec<MonitorRecord>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let fmt = |line: usize, reason: String| Error::Format {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == TIMESERIES_HEADER => {}
        Some(Err(e)) => return Err(Error::io(format!("reading {}", path.display()), e)),
        _ => {
            return Err(Error::ColumnMismatch {
                path: path.to_path_buf(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 14 {
            return Err(fmt(i + 2, format!("expected 14 columns, got {}", cols.len())));
        }
        let num = |j: usize| -> Result<f64> {
            cols[j]
                .trim()
                .parse()
                .map_err(|_| fmt(i + 2, format!("bad number `{}`", cols[j])))
        };
        let b_crit_norm = if cols[5].trim().is_empty() {
            None
        } else {
            Some(num(5)?)
        };
        out.push(MonitorRecord {
            t: num(0)?,
            energy: num(1)?,
            grad_u_sq: num(2)?,
            grad_b_sq: num(3)?,
            u_damp_norm: num(4)?,
            b_crit_norm,
            div_u_res: num(6)?,
            div_b_res: num(7)?,
            mean_u: [num(8)?, num(9)?, num(10)?],
            mean_b: [num(11)?, num(12)?, num(13)?],
        });
    }
    Ok(out)
}

/// Streams monitor rows to a fresh time-series file.
pub struct TimeseriesSink {
    path: PathBuf,
    params: PhysParams,
    cadence: usize,
    writer: BufWriter<File>,
    rows: usize,
}

impl TimeseriesSink {
    /// Truncates `path` and writes the header.
    pub fn create(path: impl Into<PathBuf>, params: PhysParams, cadence: usize) -> Result<Self> {
        let path = path.into();
        let file = File::create(&path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "{TIMESERIES_HEADER}")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(TimeseriesSink {
            path,
            params,
            cadence: cadence.max(1),
            writer,
            rows: 0,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer
            .flush()
            .map_err(|e| Error::io(format!("writing {}", self.path.display()), e))?;
        Ok(self.path)
    }
}

impl StepSink for TimeseriesSink {
    fn cadence(&self) -> usize {
        self.cadence
    }

    fn observe(&mut self, _step: usize, state: &State) -> Result<()> {
        let record = monitor(state, &self.params)?;
        writeln!(self.writer, "{}", format_row(&record))
            .map_err(|e| Error::io(format!("writing {}", self.path.display()), e))?;
        self.rows += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verification::{make_ic, ICSpec};

    fn sample(n: usize) -> (State, PhysParams) {
        let grid = Grid::new(n, 2.0 * std::f64::consts::PI).unwrap();
        let mut ic = ICSpec::random_band(n as i64 / 3, 1.0, 0.5, 7);
        ic.mean_b = [0.1, 0.0, -0.2];
        let mut state = make_ic(&ic, &grid).unwrap();
        state.t = 0.375;
        (state, PhysParams::new(0.1, 0.05, 1.0, 2.0).unwrap())
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let (state, params) = sample(8);
        write_snapshot(&state, &params, &path).unwrap();
        let (back, p) = read_snapshot(&path).unwrap();
        assert_eq!(back, state);
        assert_eq!(p, params);
        let len = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(len, HEADER_LEN + 6 * state.grid().spectral_len() * 16);
    }

    #[test]
    fn corrupted_and_truncated_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let (state, params) = sample(8);
        write_snapshot(&state, &params, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();

        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Format { .. })));

        bytes[0] = b'M';
        bytes[8] = 99;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Format { .. })));

        bytes[8] = 1;
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn strict_read_rejects_other_resolution_and_params() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let (state, params) = sample(16);
        write_snapshot(&state, &params, &path).unwrap();
        let g32 = Grid::new(32, 2.0 * std::f64::consts::PI).unwrap();
        assert!(matches!(
            read_snapshot_strict(&path, &g32, &params),
            Err(Error::ResolutionMismatch { expected: 32, found: 16 })
        ));
        let mut other = params;
        other.kappa = 0.06;
        assert!(matches!(
            read_snapshot_strict(&path, state.grid(), &other),
            Err(Error::ParameterMismatch { name: "kappa", .. })
        ));
        assert_eq!(read_snapshot_strict(&path, state.grid(), &params).unwrap(), state);
    }

    fn record(alpha: f64) -> MonitorRecord {
        let (state, mut params) = sample(8);
        params.alpha = alpha;
        monitor(&state, &params).unwrap()
    }

    #[test]
    fn timeseries_header_once_and_parse_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        let mut r1 = record(2.0);
        let mut r2 = r1.clone();
        r1.t = 0.1 + 0.2;
        r2.t = 1.0 / 3.0;
        r2.energy = 1e-300;
        append_timeseries(&r1, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), TIMESERIES_HEADER);
        append_timeseries(&r2, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("t,E").count(), 1);
        assert_eq!(read_timeseries(&path).unwrap(), vec![r1, r2]);
    }

    #[test]
    fn alpha_zero_leaves_b_crit_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        let r = record(0.0);
        assert!(r.b_crit_norm.is_none());
        append_timeseries(&r, &path).unwrap();
        let row = std::fs::read_to_string(&path).unwrap().lines().nth(1).unwrap().to_owned();
        assert_eq!(row.split(',').nth(5), Some(""));
        assert_eq!(read_timeseries(&path).unwrap(), vec![r]);
    }

    #[test]
    fn foreign_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        std::fs::write(&path, "t,E,other\n").unwrap();
        assert!(matches!(
            append_timeseries(&record(2.0), &path),
            Err(Error::ColumnMismatch { .. })
        ));
        assert!(matches!(read_timeseries(&path), Err(Error::ColumnMismatch { .. })));
    }

    #[test]
    fn sink_matches_append() {
        let dir = tempfile::tempdir().unwrap();
        let (state, params) = sample(8);
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        let mut sink = TimeseriesSink::create(&a, params, 1).unwrap();
        sink.observe(0, &state).unwrap();
        sink.finish().unwrap();
        append_timeseries(&monitor(&state, &params).unwrap(), &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
