//! Little-endian binary dumps of grid wavefunctions and Wigner arrays.
//!
//! Header (32 bytes): magic `SCQO`, version `u16`, kind `u16`, `N u64`,
//! `dx f64`, `hbar f64`. A wavepacket payload is `x_min f64`, `flags u64`
//! (bit 0: half line) and `N` pairs `(re, im)`. A Wigner payload is
//! `nq u64`, `np u64`, `q0 dq p0 dp f64` and the row-major values.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{Grid1D, WavepacketGrid, WignerGrid};
use crate::error::{Error, Result};

pub const DUMP_MAGIC: [u8; 4] = *b"SCQO";
pub const DUMP_VERSION: u16 = 1;

const KIND_WAVEPACKET: u16 = 1;
const KIND_WIGNER: u16 = 2;
const FLAG_HALF_LINE: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Dump {
    Wavepacket(WavepacketGrid),
    Wigner(WignerGrid),
}

fn header<W: Write>(w: &mut W, kind: u16, n: u64, dx: f64, hbar: f64) -> Result<()> {
    w.write_all(&DUMP_MAGIC)?;
    w.write_all(&DUMP_VERSION.to_le_bytes())?;
    w.write_all(&kind.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&dx.to_le_bytes())?;
    w.write_all(&hbar.to_le_bytes())?;
    Ok(())
}

pub fn write_wavepacket<W: Write>(mut w: W, psi: &WavepacketGrid) -> Result<()> {
    let g = &psi.grid;
    header(&mut w, KIND_WAVEPACKET, g.len() as u64, g.dx(), psi.hbar)?;
    w.write_all(&g.x_min().to_le_bytes())?;
    let flags = if g.is_half_line() { FLAG_HALF_LINE } else { 0 };
    w.write_all(&flags.to_le_bytes())?;
    for v in &psi.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_wigner<W: Write>(mut w: W, wg: &WignerGrid) -> Result<()> {
    if wg.data.len() != wg.nq * wg.np {
        return Err(Error::DimensionMismatch { expected: wg.nq * wg.np, found: wg.data.len() });
    }
    header(&mut w, KIND_WIGNER, wg.nq as u64, wg.dq, wg.hbar)?;
    w.write_all(&(wg.nq as u64).to_le_bytes())?;
    w.write_all(&(wg.np as u64).to_le_bytes())?;
    for x in [wg.q0, wg.dq, wg.p0, wg.dp] {
        w.write_all(&x.to_le_bytes())?;
    }
    for v in &wg.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// `x,re,im` rows.
pub fn write_wavepacket_csv<W: Write>(mut w: W, psi: &WavepacketGrid) -> Result<()> {
    writeln!(w, "x,re,im")?;
    for (j, v) in psi.values.iter().enumerate() {
        writeln!(w, "{:.16e},{:.16e},{:.16e}", psi.grid.x(j), v.re, v.im)?;
    }
    Ok(())
}

struct Cursor<R: Read>(R);

impl<R: Read> Cursor<R> {
    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut b = [0u8; K];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::MalformedDump(format!("truncated: {e}")))?;
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn len(&mut self, limit: u64) -> Result<usize> {
        let n = self.u64()?;
        if n > limit {
            return Err(Error::MalformedDump(format!("length {n} is implausible")));
        }
        Ok(n as usize)
    }
}

const MAX_LEN: u64 = 1 << 32;

pub fn read_dump<R: Read>(r: R) -> Result<Dump> {
    let mut c = Cursor(r);
    let magic: [u8; 4] = c.bytes()?;
    if magic != DUMP_MAGIC {
        return Err(Error::MalformedDump(format!("bad magic {magic:?}")));
    }
    let version = c.u16()?;
    if version != DUMP_VERSION {
        return Err(Error::MalformedDump(format!("unsupported version {version}")));
    }
    let kind = c.u16()?;
    let n = c.len(MAX_LEN)?;
    let dx = c.f64()?;
    let hbar = c.f64()?;
    match kind {
        KIND_WAVEPACKET => {
            let x_min = c.f64()?;
            let flags = c.u64()?;
            let grid = Grid1D::from_parts(x_min, dx, n, flags & FLAG_HALF_LINE != 0)?;
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                let re = c.f64()?;
                let im = c.f64()?;
                values.push(Complex64::new(re, im));
            }
            Ok(Dump::Wavepacket(
                WavepacketGrid::new(values, grid, hbar).map_err(|e| Error::MalformedDump(e.to_string()))?,
            ))
        }
        KIND_WIGNER => {
            let nq = c.len(MAX_LEN)?;
            let np = c.len(MAX_LEN)?;
            if nq != n || nq.checked_mul(np).is_none_or(|t| t as u64 > MAX_LEN) {
                return Err(Error::MalformedDump("inconsistent Wigner shape".into()));
            }
            let (q0, dq, p0, dp) = (c.f64()?, c.f64()?, c.f64()?, c.f64()?);
            if dq != dx {
                return Err(Error::MalformedDump("header dx disagrees with dq".into()));
            }
            let mut data = Vec::with_capacity(nq * np);
            for _ in 0..nq * np {
                data.push(c.f64()?);
            }
            Ok(Dump::Wigner(WignerGrid { nq, np, q0, dq, p0, dp, hbar, data }))
        }
        k => Err(Error::MalformedDump(format!("unknown kind {k}"))),
    }
}

pub fn read_wavepacket<R: Read>(r: R) -> Result<WavepacketGrid> {
    match read_dump(r)? {
        Dump::Wavepacket(psi) => Ok(psi),
        Dump::Wigner(_) => Err(Error::MalformedDump("expected a wavepacket, found a Wigner array".into())),
    }
}
