//! Binary state checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! magic      4 bytes  "THFL"
//! version    u32
//! epsilon    f64
//! r_max      f64
//! n_sigma    u64
//! n_theta    u64
//! dsigma     f64
//! dtheta     f64
//! w          f64 × n_sigma·n_theta, row-major (σ index outer)
//! beta       f64
//! alpha      f64
//! t          f64
//! step       u64
//! ```

use std::io::{Read, Write};

use super::{GridSpec, MappedGrid, SolverError, SolverState};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"THFL";
pub const CHECKPOINT_VERSION: u32 = 1;

fn io(e: std::io::Error) -> SolverError {
    SolverError::Checkpoint(e.to_string())
}

pub fn write_checkpoint(out: &mut dyn Write, grid: &MappedGrid, state: &SolverState) -> Result<(), SolverError> {
    let mut buf = Vec::with_capacity(64 + 8 * state.w.len());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&grid.spec.epsilon.to_le_bytes());
    buf.extend_from_slice(&grid.spec.r_max.to_le_bytes());
    buf.extend_from_slice(&(grid.n_sigma() as u64).to_le_bytes());
    buf.extend_from_slice(&(grid.n_theta() as u64).to_le_bytes());
    buf.extend_from_slice(&grid.dsigma.to_le_bytes());
    buf.extend_from_slice(&grid.dtheta.to_le_bytes());
    for w in &state.w {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    buf.extend_from_slice(&state.beta.to_le_bytes());
    buf.extend_from_slice(&state.alpha.to_le_bytes());
    buf.extend_from_slice(&state.t.to_le_bytes());
    buf.extend_from_slice(&state.step.to_le_bytes());
    out.write_all(&buf).map_err(io)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], SolverError> {
        let end = self.pos + N;
        let slice = self
            .data
            .get(self.pos..end)
            .ok_or_else(|| SolverError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length"))
    }

    fn f64(&mut self) -> Result<f64, SolverError> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64, SolverError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
}

/// Reads a checkpoint; `Ψ` is left empty and must be recomputed by a Poisson solve.
pub fn read_checkpoint(input: &mut dyn Read) -> Result<(GridSpec, SolverState), SolverError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data).map_err(io)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if &c.take::<4>()? != CHECKPOINT_MAGIC {
        return Err(SolverError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(c.take()?);
    if version != CHECKPOINT_VERSION {
        return Err(SolverError::Checkpoint(format!("unsupported version {version}")));
    }
    let epsilon = c.f64()?;
    let r_max = c.f64()?;
    let n_sigma = c.u64()? as usize;
    let n_theta = c.u64()? as usize;
    let _dsigma = c.f64()?;
    let _dtheta = c.f64()?;
    let n = n_sigma
        .checked_mul(n_theta)
        .filter(|&n| n <= data.len() / 8)
        .ok_or_else(|| SolverError::Checkpoint("grid size does not match file length".into()))?;
    let w = (0..n).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;
    let beta = c.f64()?;
    let alpha = c.f64()?;
    let t = c.f64()?;
    let step = c.u64()?;
    if c.pos != data.len() {
        return Err(SolverError::Checkpoint(format!("{} trailing bytes", data.len() - c.pos)));
    }
    Ok((
        GridSpec {
            epsilon,
            n_sigma,
            n_theta,
            r_max,
        },
        SolverState {
            w,
            psi: Vec::new(),
            t,
            step,
            beta,
            alpha,
        },
    ))
}
