//! Elementary arithmetic: factorization by trial division, Euler's totient,
//! the unit group of `Z/qZ`, the squarefree density `c_q`, and the Möbius
//! sieves in [`sieve`].

pub mod sieve;

pub use sieve::{
    sieve_mobius, sieve_mobius_capped, squarefree_count_segmented, squarefree_count_via_mobius,
    MobiusTable, SegmentedMobius, DEFAULT_MAX_LIMIT,
};

use crate::error::{Error, Result};

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn gcd_i64(a: i64, b: i64) -> u64 {
    gcd(a.unsigned_abs(), b.unsigned_abs())
}

/// Prime factorization `n = Π p^k` by trial division, primes ascending.
/// `factorize(1)` is empty.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let mut push = |p: u64, n: &mut u64| {
        let mut k = 0;
        while (*n).is_multiple_of(p) {
            *n /= p;
            k += 1;
        }
        if k > 0 {
            out.push((p, k));
        }
    };
    push(2, &mut n);
    let mut p = 3u64;
    while p.saturating_mul(p) <= n {
        push(p, &mut n);
        p += 2;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn prime_divisors(n: u64) -> Vec<u64> {
    factorize(n).into_iter().map(|(p, _)| p).collect()
}

/// All positive divisors of `n`, ascending.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut divs = vec![1u64];
    for (p, k) in factorize(n) {
        let len = divs.len();
        let mut pk = 1;
        for _ in 0..k {
            pk *= p;
            for i in 0..len {
                divs.push(divs[i] * pk);
            }
        }
    }
    divs.sort_unstable();
    divs
}

pub fn euler_phi(q: u64) -> Result<u64> {
    if q == 0 {
        return Err(Error::domain("euler_phi: q must be >= 1"));
    }
    Ok(factorize(q)
        .into_iter()
        .map(|(p, k)| (p - 1) * p.pow(k - 1))
        .product())
}

/// `1/ζ(2) = 6/π²`.
pub const INV_ZETA2: f64 = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);

/// Density of squarefree integers coprime to `q` inside one unit residue
/// class, `Π_{p∤q} (1 − p⁻²) = (6/π²) Π_{p|q} (1 − p⁻²)⁻¹`.
pub fn c_constant(q: u64) -> Result<f64> {
    if q == 0 {
        return Err(Error::domain("c_constant: q must be >= 1"));
    }
    let correction: f64 = prime_divisors(q)
        .into_iter()
        .map(|p| {
            let p2 = (p as f64) * (p as f64);
            p2 / (p2 - 1.0)
        })
        .product();
    Ok(INV_ZETA2 * correction)
}

/// The reduced residues `a ∈ [1, q]` with `gcd(a, q) = 1`, ascending. For
/// `q = 1` the single class is represented by `a = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitGroup {
    modulus: u64,
    elements: Vec<u64>,
}

impl UnitGroup {
    pub fn new(q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::domain("unit_group: q must be >= 1"));
        }
        let elements = (1..=q).filter(|&a| gcd(a, q) == 1).collect();
        Ok(UnitGroup {
            modulus: q,
            elements,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn phi(&self) -> u64 {
        self.elements.len() as u64
    }

    /// Canonical representative in `[1, q]` of `a mod q`.
    pub fn reduce(&self, a: i64) -> u64 {
        let r = a.rem_euclid(self.modulus as i64) as u64;
        if r == 0 {
            self.modulus
        } else {
            r
        }
    }

    /// Position of the class of `a` in [`elements`](Self::elements), or
    /// `None` when `gcd(a, q) > 1`.
    pub fn index_of(&self, a: i64) -> Option<usize> {
        self.elements.binary_search(&self.reduce(a)).ok()
    }

    /// Multiplicative inverse of the unit `a` modulo `q`.
    pub fn inverse(&self, a: u64) -> Option<u64> {
        mod_inverse(a, self.modulus).map(|inv| self.reduce(inv as i64))
    }
}

pub fn unit_group(q: u64) -> Result<UnitGroup> {
    UnitGroup::new(q)
}

/// Inverse of `a` modulo `m` (`m ≥ 1`); for `m = 1` every class is `0` and
/// the result is `0`.
pub fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut old_r, mut r) = ((a % m) as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let quot = old_r / r;
        (old_r, r) = (r, old_r - quot * r);
        (old_s, s) = (s, old_s - quot * s);
    }
    if old_r != 1 {
        return None;
    }
    Some(old_s.rem_euclid(m as i128) as u64)
}

pub fn mod_pow(base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let m = m as u128;
    let mut b = base as u128 % m;
    let mut acc = 1u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u64
}
