use num_complex::Complex64;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RXCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Propagator state, serialized as little-endian binary:
/// magic, version (u32), step, n_steps (u64), time (f64), length (u64),
/// then re/im pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub step: u64,
    pub n_steps: u64,
    pub time: f64,
    pub state: Vec<Complex64>,
}

impl Checkpoint {
    pub fn new(step: u64, n_steps: u64, time: f64, state: Vec<Complex64>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            step,
            n_steps,
            time,
            state,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 16 * self.state.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.n_steps.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        out.extend_from_slice(&(self.state.len() as u64).to_le_bytes());
        for c in &self.state {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(r.array()?);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let step = u64::from_le_bytes(r.array()?);
        let n_steps = u64::from_le_bytes(r.array()?);
        let time = f64::from_le_bytes(r.array()?);
        let len = u64::from_le_bytes(r.array()?) as usize;
        if r.remaining() != 16 * len {
            return Err(Error::Checkpoint(format!(
                "expected {} bytes of state, found {}",
                16 * len,
                r.remaining()
            )));
        }
        let mut state = Vec::with_capacity(len);
        for _ in 0..len {
            let re = f64::from_le_bytes(r.array()?);
            let im = f64::from_le_bytes(r.array()?);
            state.push(Complex64::new(re, im));
        }
        Ok(Self {
            version,
            step,
            n_steps,
            time,
            state,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}
