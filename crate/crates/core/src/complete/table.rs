use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{check_cap, CoeffVector, DiscreteBox, PrimeField};
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"WSLT";
pub const CACHE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;
const CHECKSUM_LEN: usize = 32;

/// `|T_{d,p}(a)|` for every `a` in `F_p^d`, row-major with `a_1` slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct CompleteSumTable {
    d: u32,
    p: u64,
    mags: Vec<f64>,
}

/// Neumaier sum of reals, in iteration order.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in values {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

impl CompleteSumTable {
    pub fn build(d: u32, p: u64, cap: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::precondition("degree must be >= 1"));
        }
        let field = PrimeField::new(p)?;
        let len = check_cap(p, d as usize, cap)?;
        let mags = (0..len)
            .into_par_iter()
            .map(|idx| {
                let a = CoeffVector::from_index(idx, d as usize, p);
                field.complete_sum(a.as_slice()).norm()
            })
            .collect();
        Ok(Self { d, p, mags })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.mags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mags.is_empty()
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.mags
    }

    #[inline]
    pub fn magnitude(&self, index: usize) -> f64 {
        self.mags[index]
    }

    pub fn get(&self, a: &[u64]) -> f64 {
        self.mags[a
            .iter()
            .fold(0usize, |acc, &c| acc * self.p as usize + c as usize)]
    }

    /// Whether `a_d = 0` for the vector at `index`.
    #[inline]
    pub fn leading_zero(&self, index: usize) -> bool {
        (index as u64).is_multiple_of(self.p)
    }

    /// `sum |T(a)|^{2 nu}` over the whole table, in index order.
    pub fn moment(&self, nu: u32, include_zero: bool) -> f64 {
        let skip = usize::from(!include_zero);
        compensated_sum(self.mags[skip..].iter().map(|m| m.powi(2 * nu as i32)))
    }

    /// `sum |T(a)|^{2 nu}` over `a in B \ {0}`.
    pub fn box_moment(&self, nu: u32, b: &DiscreteBox) -> f64 {
        compensated_sum(b.iter().filter_map(|a| {
            if a.iter().all(|&c| c == 0) {
                None
            } else {
                Some(self.get(&a).powi(2 * nu as i32))
            }
        }))
    }

    fn payload(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(HEADER_LEN + 8 * self.mags.len());
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.d.to_le_bytes());
        buf.extend_from_slice(&self.p.to_le_bytes());
        for m in &self.mags {
            buf.extend_from_slice(&m.to_le_bytes());
        }
        buf
    }
}

/// Writes the table followed by a SHA-256 digest of everything before it.
pub fn save_table(table: &CompleteSumTable, path: &Path) -> Result<()> {
    let payload = table.payload();
    let digest = Sha256::digest(&payload);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&payload)?;
    w.write_all(&digest)?;
    w.flush()?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<CompleteSumTable> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
        return Err(Error::MalformedCache(format!(
            "{} bytes is too short",
            bytes.len()
        )));
    }
    if &bytes[..4] != CACHE_MAGIC {
        return Err(Error::MalformedCache("bad magic".into()));
    }
    let (payload, digest) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(payload).as_slice() != digest {
        return Err(Error::ChecksumMismatch);
    }
    let version = u32::from_le_bytes(payload[4..8].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(Error::MalformedCache(format!(
            "unsupported version {version}"
        )));
    }
    let d = u32::from_le_bytes(payload[8..12].try_into().unwrap());
    let p = u64::from_le_bytes(payload[12..20].try_into().unwrap());
    let body = &payload[HEADER_LEN..];
    let expected = (p as u128)
        .checked_pow(d)
        .filter(|&n| n * 8 == body.len() as u128)
        .ok_or_else(|| {
            Error::MalformedCache(format!(
                "payload of {} bytes does not hold p^d entries",
                body.len()
            ))
        })?;
    let mags = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect::<Vec<_>>();
    debug_assert_eq!(mags.len() as u128, expected);
    Ok(CompleteSumTable { d, p, mags })
}
