//! Binary matrix container for cross-implementation comparison.
//!
//! Layout: 8-byte magic `JACDMAT\0`, u32 version, u32 dtype tag
//! (0 = f64, 1 = complex with two f64 components), u64 rows, u64 cols,
//! then the payload in column-major order, little-endian. Complex entries
//! store the real component first.

use std::io::{self, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::scenario::{GroundTruth, ReceivedSignal};

const MAGIC: &[u8; 8] = b"JACDMAT\0";
const VERSION: u32 = 1;

const DTYPE_F64: u32 = 0;
const DTYPE_C64: u32 = 1;

/// A matrix read back from the container.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

fn write_header<W: Write>(w: &mut W, dtype: u32, rows: usize, cols: usize) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&dtype.to_le_bytes())?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    Ok(())
}

pub fn write_real<W: Write>(w: &mut W, a: &Array2<f64>) -> io::Result<()> {
    let (rows, cols) = a.dim();
    write_header(w, DTYPE_F64, rows, cols)?;
    for j in 0..cols {
        for i in 0..rows {
            w.write_all(&a[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_complex<W: Write>(w: &mut W, a: &Array2<Complex64>) -> io::Result<()> {
    let (rows, cols) = a.dim();
    write_header(w, DTYPE_C64, rows, cols)?;
    for j in 0..cols {
        for i in 0..rows {
            let z = a[(i, j)];
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

pub fn read_matrix<R: Read>(r: &mut R) -> io::Result<Matrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unsupported version {version}"),
        ));
    }
    let dtype = read_u32(r)?;
    let rows = read_u64(r)? as usize;
    let cols = read_u64(r)? as usize;
    match dtype {
        DTYPE_F64 => {
            let mut a = Array2::zeros((rows, cols));
            for j in 0..cols {
                for i in 0..rows {
                    a[(i, j)] = read_f64(r)?;
                }
            }
            Ok(Matrix::Real(a))
        }
        DTYPE_C64 => {
            let mut a = Array2::zeros((rows, cols));
            for j in 0..cols {
                for i in 0..rows {
                    let re = read_f64(r)?;
                    let im = read_f64(r)?;
                    a[(i, j)] = Complex64::new(re, im);
                }
            }
            Ok(Matrix::Complex(a))
        }
        other => Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unknown dtype tag {other}"),
        )),
    }
}

/// Export a synthesized instance as one container file per matrix.
pub fn save_instance(dir: &Path, gt: &GroundTruth, rx: &ReceivedSignal) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let complex = [
        ("received.jmat", &rx.y),
        ("effective_channel.jmat", &gt.effective_channel),
        ("raw_channel.jmat", &gt.raw_channel),
        ("pilots.jmat", &gt.pilots),
        ("data.jmat", &gt.data),
    ];
    for (name, a) in complex {
        let mut f = std::fs::File::create(dir.join(name))?;
        write_complex(&mut f, a)?;
    }

    let activity = Array2::from_shape_fn((gt.activity.len(), 1), |(i, _)| {
        if gt.activity[i] {
            1.0
        } else {
            0.0
        }
    });
    let ue = Array2::from_shape_fn((gt.ue_positions.len(), 2), |(i, j)| gt.ue_positions[i][j]);
    let ap = Array2::from_shape_fn((gt.ap_positions.len(), 2), |(i, j)| gt.ap_positions[i][j]);
    for (name, a) in [
        ("activity.jmat", &activity),
        ("ue_positions.jmat", &ue),
        ("ap_positions.jmat", &ap),
    ] {
        let mut f = std::fs::File::create(dir.join(name))?;
        write_real(&mut f, a)?;
    }
    Ok(())
}
