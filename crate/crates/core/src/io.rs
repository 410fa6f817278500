//! File formats: binary field container and CSV tables.
//!
//! Field container, little-endian:
//!
//! ```text
//! "SJFD" | version u32 | dim u32 | N u64 | L f64 | t f64
//!        | gauge u8 (0 none, 1 applied) | alpha f64 | m f64
//!        | N^dim × (re f64, im f64), row-major
//! ```

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolve::{Field, Gauge, Grid};
use crate::flow::GeodesicPath;
use crate::sojourn::SojournPoint;

const MAGIC: &[u8; 4] = b"SJFD";
const VERSION: u32 = 1;

pub fn write_field<W: Write>(field: &Field, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(field.grid.dim as u32).to_le_bytes())?;
    w.write_all(&(field.grid.n as u64).to_le_bytes())?;
    w.write_all(&field.grid.extent.to_le_bytes())?;
    w.write_all(&field.t.to_le_bytes())?;
    let (flag, alpha, m) = match field.gauge {
        Gauge::None => (0u8, 0.0, 0.0),
        Gauge::Applied { alpha, m } => (1u8, alpha, m),
    };
    w.write_all(&[flag])?;
    w.write_all(&alpha.to_le_bytes())?;
    w.write_all(&m.to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * field.data.len());
    for v in &field.data {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_array<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated field header: {e}")))?;
    Ok(b)
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field> {
    let magic: [u8; 4] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a field file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported field version {version}")));
    }
    let dim = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let n = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let extent = f64::from_le_bytes(read_array(&mut r)?);
    let t = f64::from_le_bytes(read_array(&mut r)?);
    let flag = read_array::<1, _>(&mut r)?[0];
    let alpha = f64::from_le_bytes(read_array(&mut r)?);
    let m = f64::from_le_bytes(read_array(&mut r)?);
    let grid = Grid::new(dim, n, extent).map_err(|e| Error::Format(e.to_string()))?;
    let mut payload = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut payload)
        .map_err(|e| Error::Format(format!("truncated field payload: {e}")))?;
    let data = payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    let mut field = Field::new(grid, data, t)?;
    field.gauge = match flag {
        0 => Gauge::None,
        1 => Gauge::Applied { alpha, m },
        f => return Err(Error::Format(format!("bad gauge flag {f}"))),
    };
    Ok(field)
}

/// `z,re,im,abs,arg` rows for a 1D field.
pub fn write_field_csv<W: Write>(field: &Field, mut w: W) -> Result<()> {
    if field.grid.dim != 1 {
        return Err(Error::Config("CSV export is for 1D fields".into()));
    }
    writeln!(w, "z,re,im,abs,arg")?;
    for (j, v) in field.data.iter().enumerate() {
        writeln!(w, "{},{},{},{},{}", field.grid.coord(j), v.re, v.im, v.norm(), v.arg())?;
    }
    Ok(())
}

fn header(prefix: &str, n: usize) -> String {
    (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",")
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_path_csv<W: Write>(path: &GeodesicPath, mut w: W) -> Result<()> {
    let n = path.dim;
    writeln!(w, "s,{},{},energy_drift", header("z", n), header("zeta", n))?;
    for k in 0..path.len() {
        writeln!(
            w,
            "{},{},{},{}",
            path.s[k],
            join(&path.z[k]),
            join(&path.zeta[k]),
            path.energy_drift[k]
        )?;
    }
    Ok(())
}

/// One sojourn table row; failures are kept with their message.
pub struct SojournRow<'a> {
    pub z: &'a [f64],
    pub zeta_hat: &'a [f64],
    pub result: &'a Result<SojournPoint>,
}

pub fn write_sojourn_csv<W: Write>(dim: usize, rows: &[SojournRow<'_>], mut w: W) -> Result<()> {
    writeln!(
        w,
        "{},{},{},lambda,{},{},exponent,residual,error",
        header("z", dim),
        header("zeta_hat", dim),
        header("theta", dim),
        header("mu", dim),
        header("xi", dim)
    )?;
    let blank = vec![""; dim].join(",");
    for row in rows {
        match row.result {
            Ok(p) => writeln!(
                w,
                "{},{},{},{},{},{},{},{},",
                join(row.z),
                join(row.zeta_hat),
                join(&p.theta),
                p.lambda,
                join(&p.mu),
                join(&p.xi),
                p.diagnostics.decay_exponent.map(|e| e.to_string()).unwrap_or_default(),
                p.diagnostics.residual
            )?,
            Err(e) => writeln!(
                w,
                "{},{},{blank},,{blank},{blank},,,\"{}\"",
                join(row.z),
                join(row.zeta_hat),
                e.to_string().replace('"', "'")
            )?,
        }
    }
    Ok(())
}
