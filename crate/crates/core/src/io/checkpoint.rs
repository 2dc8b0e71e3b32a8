//! Binary network checkpoints.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `SLQN` |
//! | 4 | format version (u32) |
//! | 12 | input, hidden, output sizes (u32 each) |
//! | 8·P | online network `W₁ b₁ W₂ b₂` |
//! | 8·P | target network |
//! | 8·P | Adam first moments |
//! | 8·P | Adam second moments |
//! | 8 | Adam step (u64) |
//! | 24 | β₁, β₂, ε̂ (f64) |
//!
//! with `P = h·i + h + o·h + o`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::neural_net::{AdamState, MlpParams};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SLQN";
const HEADER: usize = 4 + 4 + 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub online: MlpParams,
    pub target: MlpParams,
    pub adam: AdamState,
}

fn payload_len(i: usize, h: usize, o: usize) -> usize {
    let p = h * i + h + o * h + o;
    4 * 8 * p + 8 + 24
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (i, h, o) = self.online.shape();
        for other in [self.target.shape(), self.adam.m.shape(), self.adam.v.shape()] {
            if other != (i, h, o) {
                return Err(Error::invalid("checkpoint parts have different shapes"));
            }
        }
        let mut out = Vec::with_capacity(HEADER + payload_len(i, h, o));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        for d in [i, h, o] {
            let d = u32::try_from(d).map_err(|_| Error::invalid("layer too wide for checkpoint"))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for p in [&self.online, &self.target, &self.adam.m, &self.adam.v] {
            for x in p.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.adam.step.to_le_bytes());
        for x in [self.adam.beta1, self.adam.beta2, self.adam.eps] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Parse {
            line: 0,
            message: format!("checkpoint: {m}"),
        };
        if bytes.len() < HEADER || &bytes[..4] != MAGIC {
            return Err(bad("bad magic bytes"));
        }
        let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().expect("4 bytes"));
        let version = u32_at(4);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let (i, h, o) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
        if bytes.len() - HEADER != payload_len(i, h, o) {
            return Err(bad(&format!(
                "payload is {} bytes, dimensions {i}x{h}x{o} need {}",
                bytes.len() - HEADER,
                payload_len(i, h, o)
            )));
        }
        let mut words = bytes[HEADER..].chunks_exact(8).map(|c| c.try_into().expect("8 bytes"));
        let mut read_params = || {
            let mut p = MlpParams::zeros(i, h, o);
            for x in p.iter_mut() {
                *x = f64::from_le_bytes(words.next().expect("length checked"));
            }
            p
        };
        let online = read_params();
        let target = read_params();
        let m = read_params();
        let v = read_params();
        let step = u64::from_le_bytes(words.next().expect("length checked"));
        let mut f = || f64::from_le_bytes(words.next().expect("length checked"));
        let (beta1, beta2, eps) = (f(), f(), f());
        Ok(Checkpoint {
            online,
            target,
            adam: AdamState {
                m,
                v,
                step,
                beta1,
                beta2,
                eps,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural_net::{adam_step, forward, grad_td_loss, init_params, TdSample};

    fn trained() -> Checkpoint {
        let mut online = init_params(7, 9, 5, 3).unwrap();
        let target = init_params(7, 9, 5, 4).unwrap();
        let mut adam = AdamState::new(&online);
        let s = [0.1, 0.2, 0.0, 0.5, 0.1, 0.05, 0.05];
        for _ in 0..3 {
            let (g, _) = grad_td_loss(&online, &[TdSample { state: &s, action: 2, target: 4.0 }]).unwrap();
            adam_step(&mut online, &mut adam, &g, 1e-3).unwrap();
        }
        Checkpoint { online, target, adam }
    }

    #[test]
    fn byte_exact_round_trip() {
        let c = trained();
        let bytes = c.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        let x = [0.3, 0.0, 0.1, 0.2, 0.2, 0.1, 0.1];
        let a = forward(&c.online, &x).unwrap();
        let b = forward(&back.online, &x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let c = trained();
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), c);
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let bytes = trained().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(Checkpoint::from_bytes(&magic).is_err());
        let mut version = bytes.clone();
        version[4] = 2;
        assert!(matches!(Checkpoint::from_bytes(&version), Err(Error::Version { found: 2, .. })));
        let mut dims = bytes;
        dims[12] += 1;
        assert!(Checkpoint::from_bytes(&dims).is_err());
    }
}
