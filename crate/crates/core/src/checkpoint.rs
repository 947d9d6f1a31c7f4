//! Binary checkpoints.
//!
//! Layout, all little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic `SCGK` | 4 bytes |
//! | format version | u32 |
//! | N1, N2, N3 | u32 × 3 |
//! | P, R, tau, Pm, eta, e_r[0..3], L1, L2 | f64 × 10 |
//! | t | f64 |
//! | coefficients | (f64 re, f64 im) pairs |
//!
//! Coefficients are stored component by component — θ, v_T, v_P, b_T, b_P
//! (each over modes `(n1, n2)` in lexicographic order, then Chebyshev index),
//! then the means v_M1, v_M2, b_M1, b_M2 — i.e. [`SpectralState::pack`] order.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::mhd::{Params, SpectralState};
use crate::transforms::Dims;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SCGK";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 3 * 4 + 10 * 8 + 8;
/// Refuse absurd sizes before allocating.
const MAX_COEFFS: u64 = 1 << 28;

/// Decoded checkpoint contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: Params,
    pub state: SpectralState,
}

fn coeff_count(d: Dims) -> u64 {
    let h = (2 * d.n1 as u64 + 1).saturating_mul(2 * d.n2 as u64 + 1);
    let c = d.n3 as u64 + 2;
    h.saturating_mul(c).saturating_mul(5).saturating_add(4 * c)
}

pub fn encode(params: &Params, state: &SpectralState) -> Vec<u8> {
    let d = state.dims();
    let coeffs = state.pack();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * coeffs.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for n in [d.n1, d.n2, d.n3] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    let p = params;
    for x in [p.p, p.r, p.tau, p.pm, p.eta, p.e_r[0], p.e_r[1], p.e_r[2], p.l1, p.l2, state.t] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for z in coeffs {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated while reading {what} (offset {}, need {n} bytes, have {})",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Decodes a checkpoint. Nothing is returned unless the whole buffer is
/// well-formed.
pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic (not an SCGK checkpoint)".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let n1 = r.u32("N1")?;
    let n2 = r.u32("N2")?;
    let n3 = r.u32("N3")?;
    let mut f = [0.0; 11];
    for (i, x) in f.iter_mut().enumerate() {
        *x = r.f64(["P", "R", "tau", "Pm", "eta", "e_r", "e_r", "e_r", "L1", "L2", "t"][i])?;
    }
    let params = Params {
        p: f[0],
        r: f[1],
        tau: f[2],
        pm: f[3],
        eta: f[4],
        e_r: [f[5], f[6], f[7]],
        l1: f[8],
        l2: f[9],
    };
    params
        .validate()
        .map_err(|e| Error::Checkpoint(format!("invalid parameters: {e}")))?;
    if !f[10].is_finite() {
        return Err(Error::Checkpoint("non-finite time".into()));
    }
    if n3 < 2 || (n1 == 0 && n2 == 0) {
        return Err(Error::Checkpoint(format!("invalid dims ({n1}, {n2}, {n3})")));
    }
    let dims = Dims::new(n1 as usize, n2 as usize, n3 as usize);
    let count = coeff_count(dims);
    if count > MAX_COEFFS {
        return Err(Error::Checkpoint(format!("dims ({n1}, {n2}, {n3}) too large")));
    }
    let body = r.take(16 * count as usize, "coefficients")?;
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let coeffs: Vec<Complex64> = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    let mut state = SpectralState::zeros(dims, params.wavenumbers());
    state.unpack(&coeffs)?;
    state.t = f[10];
    Ok(Checkpoint { params, state })
}

/// Writes atomically (temporary file, then rename).
pub fn write(path: &Path, params: &Params, state: &SpectralState) -> Result<()> {
    let bytes = encode(params, state);
    let tmp = path.with_extension("tmp");
    let io = |e| Error::io(path, e);
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(&bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn read(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Reads a checkpoint and checks its dimensions against `expected`.
pub fn read_matching(path: &Path, expected: Dims) -> Result<Checkpoint> {
    let c = read(path)?;
    let d = c.state.dims();
    for (what, e, f) in [("N1", expected.n1, d.n1), ("N2", expected.n2, d.n2), ("N3", expected.n3, d.n3)] {
        if e != f {
            return Err(Error::CheckpointDims {
                what,
                expected: e as u32,
                found: f as u32,
            });
        }
    }
    Ok(c)
}
