//! Möbius sieves.
//!
//! [`MobiusTable`] holds `μ(n)` and the squarefree flag for every `n ≤ limit`
//! (one byte plus one bit per integer). It is built once by a linear sieve
//! and is immutable afterwards, so it can be shared across threads.
//!
//! [`SegmentedMobius`] produces the same values block by block for ranges
//! that do not fit in memory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest table built by [`sieve_mobius`] (about 1.1 GiB resident).
/// Tables up to `10⁸` are exercised by the test suite.
pub const DEFAULT_MAX_LIMIT: u64 = 1_000_000_000;

const DUMP_MAGIC: &[u8; 8] = b"SQFMOBIU";
const DUMP_VERSION: u32 = 1;
/// One signed byte per entry, `μ(1)..=μ(limit)`.
const ENCODING_I8: u8 = 1;

#[derive(Clone, PartialEq, Eq)]
pub struct MobiusTable {
    limit: u64,
    /// `mu[n]` for `0 ≤ n ≤ limit`; `mu[0]` is unused and stored as 0.
    mu: Vec<i8>,
    squarefree: Vec<u64>,
}

impl std::fmt::Debug for MobiusTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MobiusTable")
            .field("limit", &self.limit)
            .finish_non_exhaustive()
    }
}

pub fn sieve_mobius(limit: u64) -> Result<MobiusTable> {
    sieve_mobius_capped(limit, DEFAULT_MAX_LIMIT)
}

/// Linear sieve for `μ` on `[1, limit]`, refusing limits above `cap`.
pub fn sieve_mobius_capped(limit: u64, cap: u64) -> Result<MobiusTable> {
    if limit == 0 || limit > cap || limit >= u32::MAX as u64 {
        return Err(Error::Capacity {
            what: "sieve limit",
            requested: limit,
            limit: cap.min(u32::MAX as u64 - 1),
        });
    }
    let n = limit as usize;
    let mut mu = vec![0i8; n + 1];
    let mut composite = vec![0u64; n / 64 + 1];
    let mut primes: Vec<u32> = Vec::new();
    mu[1] = 1;
    for i in 2..=n {
        if composite[i >> 6] >> (i & 63) & 1 == 0 {
            primes.push(i as u32);
            mu[i] = -1;
        }
        let mu_i = mu[i];
        for &p in &primes {
            let m = i * p as usize;
            if m > n {
                break;
            }
            composite[m >> 6] |= 1 << (m & 63);
            if i % p as usize == 0 {
                mu[m] = 0;
                break;
            }
            mu[m] = -mu_i;
        }
    }
    Ok(MobiusTable::from_full(limit, mu))
}

impl MobiusTable {
    fn from_full(limit: u64, mu: Vec<i8>) -> Self {
        let mut squarefree = vec![0u64; mu.len() / 64 + 1];
        for (n, &m) in mu.iter().enumerate().skip(1) {
            if m != 0 {
                squarefree[n >> 6] |= 1 << (n & 63);
            }
        }
        MobiusTable {
            limit,
            mu,
            squarefree,
        }
    }

    /// Builds a table from explicit values, `values[i] = μ(i + 1)`.
    ///
    /// No arithmetic validation is done beyond the value range, which makes
    /// this the entry point for synthetic tables and fault injection.
    pub fn from_values(values: Vec<i8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Capacity {
                what: "table limit",
                requested: 0,
                limit: DEFAULT_MAX_LIMIT,
            });
        }
        if let Some(pos) = values.iter().position(|v| !(-1..=1).contains(v)) {
            return Err(Error::Format(format!(
                "mu({}) = {} is not in {{-1, 0, 1}}",
                pos + 1,
                values[pos]
            )));
        }
        let limit = values.len() as u64;
        let mut mu = Vec::with_capacity(values.len() + 1);
        mu.push(0);
        mu.extend(values);
        Ok(Self::from_full(limit, mu))
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// `μ(n)` for `1 ≤ n ≤ limit`.
    ///
    /// # Panics
    /// If `n` is zero or above the limit.
    #[inline]
    pub fn mu(&self, n: u64) -> i8 {
        assert!(n >= 1 && n <= self.limit, "n = {n} outside table");
        self.mu[n as usize]
    }

    #[inline]
    pub fn is_squarefree(&self, n: u64) -> bool {
        assert!(n >= 1 && n <= self.limit, "n = {n} outside table");
        self.squarefree[(n >> 6) as usize] >> (n & 63) & 1 == 1
    }

    /// `μ(1), …, μ(limit)` as a slice indexed from `n = 1` at position 1.
    pub fn mu_slice(&self) -> &[i8] {
        &self.mu
    }

    pub(crate) fn check_range(&self, x: u64) -> Result<()> {
        if x > self.limit {
            return Err(Error::Capacity {
                what: "x",
                requested: x,
                limit: self.limit,
            });
        }
        Ok(())
    }

    /// Number of squarefree `n ≤ x`.
    pub fn squarefree_count(&self, x: u64) -> Result<u64> {
        self.check_range(x)?;
        let full_words = (x as usize + 1) / 64;
        let mut count: u64 = self.squarefree[..full_words]
            .iter()
            .map(|w| w.count_ones() as u64)
            .sum();
        for n in (full_words * 64) as u64..=x {
            if n >= 1 && self.is_squarefree(n) {
                count += 1;
            }
        }
        Ok(count)
    }

    /// Integers `n ≤ up_to` for which `Σ_{d|n} μ(d) ≠ [n = 1]`.
    pub fn divisor_sum_violations(&self, up_to: u64) -> Result<Vec<u64>> {
        self.check_range(up_to)?;
        let n = up_to as usize;
        let mut acc = vec![0i64; n + 1];
        for d in 1..=n {
            let m = self.mu[d] as i64;
            if m != 0 {
                for k in (d..=n).step_by(d) {
                    acc[k] += m;
                }
            }
        }
        Ok((1..=n)
            .filter(|&k| acc[k] != i64::from(k == 1))
            .map(|k| k as u64)
            .collect())
    }

    /// Writes the table as `magic | version u32 | encoding u8 | 3 reserved
    /// bytes | limit u64 | μ(1..=limit) as i8`, integers little endian.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&[ENCODING_I8, 0, 0, 0])?;
        w.write_all(&self.limit.to_le_bytes())?;
        let bytes: Vec<u8> = self.mu[1..].iter().map(|&m| m as u8).collect();
        w.write_all(&bytes)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let fmt = |e: std::io::Error| Error::Format(format!("mobius dump: {e}"));
        let mut header = [0u8; 24];
        r.read_exact(&mut header).map_err(fmt)?;
        if &header[..8] != DUMP_MAGIC {
            return Err(Error::Format("mobius dump: bad magic".into()));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != DUMP_VERSION || header[12] != ENCODING_I8 {
            return Err(Error::Format(format!(
                "mobius dump: unsupported version {version} / encoding {}",
                header[12]
            )));
        }
        let limit = u64::from_le_bytes(header[16..24].try_into().unwrap());
        if limit == 0 || limit > DEFAULT_MAX_LIMIT {
            return Err(Error::Capacity {
                what: "dump limit",
                requested: limit,
                limit: DEFAULT_MAX_LIMIT,
            });
        }
        let mut bytes = vec![0u8; limit as usize];
        r.read_exact(&mut bytes).map_err(fmt)?;
        Self::from_values(bytes.into_iter().map(|b| b as i8).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file))
    }
}

/// `#{n ≤ x squarefree} = Σ_{d ≤ √x} μ(d) ⌊x/d²⌋`.
pub fn squarefree_count_via_mobius(table: &MobiusTable, x: u64) -> Result<u64> {
    let mut total: i64 = 0;
    let mut d = 1u64;
    while d * d <= x {
        total += table.mu(d) as i64 * (x / (d * d)) as i64;
        d += 1;
    }
    Ok(total as u64)
}

/// Block-wise Möbius evaluation on `[1, limit]` using only primes up to
/// `√limit`.
#[derive(Debug, Clone)]
pub struct SegmentedMobius {
    limit: u64,
    primes: Vec<u64>,
}

impl SegmentedMobius {
    pub fn new(limit: u64) -> Result<Self> {
        if limit == 0 {
            return Err(Error::Capacity {
                what: "sieve limit",
                requested: 0,
                limit: u64::MAX,
            });
        }
        let root = (limit as f64).sqrt() as u64 + 2;
        let mut is_comp = vec![false; root as usize + 1];
        let mut primes = Vec::new();
        for i in 2..=root as usize {
            if !is_comp[i] {
                primes.push(i as u64);
                for j in (i * i..=root as usize).step_by(i) {
                    is_comp[j] = true;
                }
            }
        }
        Ok(SegmentedMobius { limit, primes })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// `μ(n)` for `n ∈ [lo, hi)`, clamped to `[1, limit]`.
    pub fn block(&self, lo: u64, hi: u64) -> Vec<i8> {
        let lo = lo.max(1);
        let hi = hi.min(self.limit + 1);
        if lo >= hi {
            return Vec::new();
        }
        let len = (hi - lo) as usize;
        let mut mu = vec![1i8; len];
        let mut prod = vec![1u64; len];
        for &p in &self.primes {
            if p * p >= hi {
                break;
            }
            let first = lo.div_ceil(p) * p;
            for m in (first..hi).step_by(p as usize) {
                let i = (m - lo) as usize;
                mu[i] = -mu[i];
                prod[i] *= p;
            }
            let p2 = p * p;
            let first = lo.div_ceil(p2) * p2;
            for m in (first..hi).step_by(p2 as usize) {
                mu[(m - lo) as usize] = 0;
            }
        }
        for (i, (m, pr)) in mu.iter_mut().zip(&prod).enumerate() {
            // at most one prime factor exceeds √hi
            if *m != 0 && *pr != lo + i as u64 {
                *m = -*m;
            }
        }
        mu
    }
}

/// Squarefree count on `[1, limit]` by segmented sieving; blocks are
/// processed in parallel and merged by exact integer summation.
pub fn squarefree_count_segmented(limit: u64, block_len: u64) -> Result<u64> {
    let seg = SegmentedMobius::new(limit)?;
    let block_len = block_len.max(1);
    let blocks = limit.div_ceil(block_len);
    Ok((0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = 1 + b * block_len;
            seg.block(lo, lo + block_len)
                .iter()
                .filter(|&&m| m != 0)
                .count() as u64
        })
        .sum())
}
