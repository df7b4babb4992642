//! Binary checkpoint of an [`EnsembleAccumulator`].
//!
//! All integers are little-endian `u64` unless noted, floats are
//! little-endian IEEE-754 `f64`:
//!
//! ```text
//! magic           8 bytes  "D2THCKPT"
//! version         u32      1
//! fingerprint     u64      FNV-1a of the configuration (trajectory count excluded)
//! n_sites, n_modes, n_snapshots, n_trajectories
//! 6 arrays        len, then len × (sum f64, compensation f64), in the order
//!                 coherence_re, coherence_im, lambda_re, lambda_im,
//!                 lambda_im_sq, energy
//! event_sum       (f64, f64)
//! event_sq_sum    (f64, f64)
//! event_samples
//! failures        count, then per failure: index, seed, t f64,
//!                 message length, UTF-8 bytes
//! ```
//!
//! Each sum is stored with its compensation term, so a resumed ensemble is
//! bit-identical to an uninterrupted one.

use std::io::{Read, Write};
use std::path::Path;

use d2therm_core::sum::NeumaierSum;
use d2therm_core::{EnsembleAccumulator, TrajectoryFailure};

use crate::config::ConfigFile;
use crate::error::{Result, SimError};

pub const MAGIC: &[u8; 8] = b"D2THCKPT";
pub const VERSION: u32 = 1;

/// Identifies the configuration a checkpoint belongs to. The trajectory
/// count is left out so a run can be extended.
pub fn fingerprint(config: &ConfigFile) -> u64 {
    let mut c = config.clone();
    c.run.trajectories = 0;
    let text = serde_json::to_string(&c).expect("config serializes");
    // FNV-1a
    text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_sums(out: &mut Vec<u8>, sums: &[NeumaierSum]) {
    put_u64(out, sums.len() as u64);
    for s in sums {
        let (a, b) = s.parts();
        put_f64(out, a);
        put_f64(out, b);
    }
}

pub fn encode(acc: &EnsembleAccumulator, fingerprint: u64) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u64(&mut out, fingerprint);
    for v in [
        acc.n_sites as u64,
        acc.n_modes as u64,
        acc.n_snapshots as u64,
        acc.n_trajectories,
    ] {
        put_u64(&mut out, v);
    }
    for arr in [
        &acc.coherence_re,
        &acc.coherence_im,
        &acc.lambda_re,
        &acc.lambda_im,
        &acc.lambda_im_sq,
        &acc.energy,
    ] {
        put_sums(&mut out, arr);
    }
    for s in [acc.event_sum, acc.event_sq_sum] {
        let (a, b) = s.parts();
        put_f64(&mut out, a);
        put_f64(&mut out, b);
    }
    put_u64(&mut out, acc.event_samples);
    put_u64(&mut out, acc.failures.len() as u64);
    for f in &acc.failures {
        put_u64(&mut out, f.index);
        put_u64(&mut out, f.seed);
        put_f64(&mut out, f.t);
        put_u64(&mut out, f.message.len() as u64);
        out.extend_from_slice(f.message.as_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| SimError::Checkpoint("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn sum(&mut self) -> Result<NeumaierSum> {
        Ok(NeumaierSum::from_parts(self.f64()?, self.f64()?))
    }

    fn sums(&mut self, expected: usize) -> Result<Vec<NeumaierSum>> {
        let len = self.u64()? as usize;
        if len != expected {
            return Err(SimError::Checkpoint(format!(
                "array of {len} entries, expected {expected}"
            )));
        }
        (0..len).map(|_| self.sum()).collect()
    }
}

/// Decode a checkpoint, checking it against `fingerprint`.
pub fn decode(bytes: &[u8], fingerprint: u64) -> Result<EnsembleAccumulator> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(SimError::Checkpoint("not a d2therm checkpoint".into()));
    }
    let version = u32::from_le_bytes(c.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(SimError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    if c.u64()? != fingerprint {
        return Err(SimError::Checkpoint(
            "written for a different configuration".into(),
        ));
    }
    let n_sites = c.u64()? as usize;
    let n_modes = c.u64()? as usize;
    let n_snapshots = c.u64()? as usize;
    let mut acc = EnsembleAccumulator::new(n_sites, n_modes, n_snapshots);
    acc.n_trajectories = c.u64()?;
    let nn = n_sites * n_sites * n_snapshots;
    let nm = n_modes * n_snapshots;
    acc.coherence_re = c.sums(nn)?;
    acc.coherence_im = c.sums(nn)?;
    acc.lambda_re = c.sums(nm)?;
    acc.lambda_im = c.sums(nm)?;
    acc.lambda_im_sq = c.sums(nm)?;
    acc.energy = c.sums(n_snapshots)?;
    acc.event_sum = c.sum()?;
    acc.event_sq_sum = c.sum()?;
    acc.event_samples = c.u64()?;
    let n_fail = c.u64()?;
    for _ in 0..n_fail {
        let index = c.u64()?;
        let seed = c.u64()?;
        let t = c.f64()?;
        let len = c.u64()? as usize;
        let message = String::from_utf8(c.take(len)?.to_vec())
            .map_err(|_| SimError::Checkpoint("failure message is not UTF-8".into()))?;
        acc.failures.push(TrajectoryFailure {
            index,
            seed,
            t,
            message,
        });
    }
    if c.pos != bytes.len() {
        return Err(SimError::Checkpoint("trailing bytes".into()));
    }
    Ok(acc)
}

pub fn save(path: &Path, acc: &EnsembleAccumulator, fingerprint: u64) -> Result<()> {
    // write then rename so an interrupted save keeps the old checkpoint
    let tmp = path.with_extension("tmp");
    std::fs::File::create(&tmp)?.write_all(&encode(acc, fingerprint))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path, fingerprint: u64) -> Result<EnsembleAccumulator> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| SimError::Read {
            path: path.to_path_buf(),
            source,
        })?;
    decode(&bytes, fingerprint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EnsembleAccumulator {
        let mut acc = EnsembleAccumulator::new(2, 3, 2);
        acc.n_trajectories = 5;
        for (i, s) in acc.lambda_im_sq.iter_mut().enumerate() {
            s.add(1.0 + i as f64);
            s.add(1e-17);
        }
        acc.energy[1].add(-42.5);
        acc.event_sum.add(7.0);
        acc.event_sq_sum.add(11.0);
        acc.event_samples = 30;
        acc.failures.push(TrajectoryFailure {
            index: 3,
            seed: 99,
            t: 0.25,
            message: "non-finite state".into(),
        });
        acc
    }

    #[test]
    fn round_trip_is_exact() {
        let acc = sample();
        let back = decode(&encode(&acc, 17), 17).unwrap();
        assert_eq!(back, acc);
        for (a, b) in acc.lambda_im_sq.iter().zip(&back.lambda_im_sq) {
            assert_eq!(a.parts().1.to_bits(), b.parts().1.to_bits());
        }
    }

    #[test]
    fn rejects_damaged_or_foreign_files() {
        let bytes = encode(&sample(), 17);
        assert!(decode(&bytes, 18)
            .unwrap_err()
            .to_string()
            .contains("different configuration"));
        assert!(decode(&bytes[..bytes.len() - 1], 17)
            .unwrap_err()
            .to_string()
            .contains("truncated"));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra, 17).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad, 17)
            .unwrap_err()
            .to_string()
            .contains("not a d2therm"));
        let mut ver = bytes;
        ver[8] = 9;
        assert!(decode(&ver, 17)
            .unwrap_err()
            .to_string()
            .contains("version"));
    }
}
