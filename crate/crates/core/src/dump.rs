//! Binary dump of sampled assignments.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "FGMCSMPL"
//! 8       4     format version (1)
//! 12      4     rows
//! 16      4     cols
//! 20      4     N = rows * cols
//! 24      8     seed
//! 32      8     chain_id
//! 40      1     scheme (0 = single-site, 1 = row-blocked, 255 = uniform)
//! 41      7     zero padding
//! 48      ...   samples, ceil(N / 8) bytes each
//! ```
//!
//! Within a sample, variable `v` (row-major) is bit `v % 8` of byte `v / 8`.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::grid::Assignment;
use crate::sampler::Scheme;

pub const MAGIC: &[u8; 8] = b"FGMCSMPL";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 48;
pub const UNIFORM_SCHEME_CODE: u8 = 255;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DumpHeader {
    pub rows: u32,
    pub cols: u32,
    pub seed: u64,
    pub chain_id: u64,
    /// `None` for uniform sampling.
    pub scheme: Option<Scheme>,
}

impl DumpHeader {
    pub fn n(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn sample_bytes(&self) -> usize {
        self.n().div_ceil(8)
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0..8].copy_from_slice(MAGIC);
        h[8..12].copy_from_slice(&VERSION.to_le_bytes());
        h[12..16].copy_from_slice(&self.rows.to_le_bytes());
        h[16..20].copy_from_slice(&self.cols.to_le_bytes());
        h[20..24].copy_from_slice(&(self.n() as u32).to_le_bytes());
        h[24..32].copy_from_slice(&self.seed.to_le_bytes());
        h[32..40].copy_from_slice(&self.chain_id.to_le_bytes());
        h[40] = self.scheme.map_or(UNIFORM_SCHEME_CODE, |s| s.code());
        h
    }

    fn decode(h: &[u8; HEADER_LEN]) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("not a sample dump: {msg}"));
        if &h[0..8] != MAGIC {
            return Err(bad("wrong magic"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(h[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(h[i..i + 8].try_into().unwrap());
        if u32_at(8) != VERSION {
            return Err(bad("unsupported version"));
        }
        let header = DumpHeader {
            rows: u32_at(12),
            cols: u32_at(16),
            seed: u64_at(24),
            chain_id: u64_at(32),
            scheme: match h[40] {
                UNIFORM_SCHEME_CODE => None,
                code => Some(Scheme::from_code(code).ok_or_else(|| bad("unknown scheme"))?),
            },
        };
        if u32_at(20) as usize != header.n() {
            return Err(bad("N does not match rows * cols"));
        }
        Ok(header)
    }
}

pub struct DumpWriter<W: Write> {
    out: W,
    header: DumpHeader,
    buf: Vec<u8>,
}

impl<W: Write> DumpWriter<W> {
    pub fn new(mut out: W, header: DumpHeader) -> io::Result<Self> {
        out.write_all(&header.encode())?;
        let buf = vec![0; header.sample_bytes()];
        Ok(DumpWriter { out, header, buf })
    }

    pub fn write(&mut self, x: &Assignment) -> Result<()> {
        if x.len() != self.header.n() || x.cols() != self.header.cols as usize {
            return Err(Error::Dimension {
                expected: self.header.n(),
                got: x.len(),
            });
        }
        self.buf.iter_mut().for_each(|b| *b = 0);
        for v in 0..x.len() {
            if x.get(v) {
                self.buf[v / 8] |= 1 << (v % 8);
            }
        }
        self.out.write_all(&self.buf)?;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub struct DumpReader<R: Read> {
    input: R,
    header: DumpHeader,
    buf: Vec<u8>,
}

impl<R: Read> DumpReader<R> {
    pub fn new(mut input: R) -> Result<Self> {
        let mut h = [0u8; HEADER_LEN];
        input.read_exact(&mut h)?;
        let header = DumpHeader::decode(&h)?;
        let buf = vec![0; header.sample_bytes()];
        Ok(DumpReader { input, header, buf })
    }

    pub fn header(&self) -> &DumpHeader {
        &self.header
    }
}

impl<R: Read> Iterator for DumpReader<R> {
    type Item = Result<Assignment>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.input.read_exact(&mut self.buf) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return None,
            Err(e) => return Some(Err(e.into())),
        }
        let (rows, cols) = (self.header.rows as usize, self.header.cols as usize);
        let bits: Vec<bool> = (0..rows * cols)
            .map(|v| (self.buf[v / 8] >> (v % 8)) & 1 == 1)
            .collect();
        Some(Assignment::from_bits(rows, cols, &bits))
    }
}
