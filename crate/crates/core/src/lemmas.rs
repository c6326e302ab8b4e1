//! Brute-force oracles for the lattice and congruence counts behind the
//! asymptotic for `T(x;q)`.
//!
//! * Primitive solutions `u ∈ Z³`, `|uᵢ| ≤ Uᵢ`, of `u·w = 0`, and the
//!   explicit bound `12π U₀U₁U₂ / maxᵢ |wᵢ|Uᵢ + 4`.
//! * `N(V₁,V₂;q,a₁,a₂)`: pairs `(v₁, v₂) ∈ [1,V₁]×[1,V₂]` with
//!   `a₁v₁ ≡ a₂v₂ (mod q)` and `gcd(v₁v₂, q) = 1`, its expected size
//!   `N*(V₁,V₂;q)`, and the weight
//!   `M(q,a₁,a₂) = Σ_{d|q} d Σ_{0<|r|,|s|≤q/2, a₁s+a₂r ≡ 0 (d)} 1/(|r||s|)`.
//! * Dyadic averages of `M(q, f₁², f₂²)` over coprime `f₁, f₂`.
//!
//! `M` is exact: with `L = lcm(1, …, ⌊q/2⌋)` the sum `L²·M` is an integer,
//! accumulated in big integers and reduced once.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{divisors, euler_phi, gcd, gcd_i64, mod_inverse};
use crate::error::{Error, Result};

/// Largest box side accepted by [`count_primitive_solutions`].
pub const MAX_BOX: f64 = 1000.0;
/// Largest `V₁·V₂` for the direct pair enumeration of `N`.
pub const MAX_DIRECT_PAIRS: f64 = 1e8;
/// Largest modulus for which [`m_quantity`] is computed exactly.
pub const MAX_EXACT_M_MODULUS: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFormInstance {
    w: [i64; 3],
    u: [f64; 3],
}

impl LinearFormInstance {
    pub fn new(w: [i64; 3], u: [f64; 3]) -> Result<Self> {
        let g = gcd_i64(gcd_i64(w[0], w[1]) as i64, w[2]);
        if g != 1 {
            return Err(Error::domain(format!("{w:?} is not a primitive vector")));
        }
        if u.iter().any(|&b| !(b >= 1.0)) {
            return Err(Error::domain(format!("box sides {u:?} must be >= 1")));
        }
        Ok(LinearFormInstance { w, u })
    }

    pub fn w(&self) -> [i64; 3] {
        self.w
    }

    pub fn u(&self) -> [f64; 3] {
        self.u
    }
}

fn primitive3(u: [i64; 3]) -> bool {
    gcd_i64(gcd_i64(u[0], u[1]) as i64, u[2]) == 1
}

/// Calls `visit` on every primitive `u` with `|uᵢ| ≤ bounds[i]` and
/// `u·w = 0`. The coordinate with the largest `|wᵢ|` is solved for.
fn for_each_primitive_solution(w: [i64; 3], bounds: [i64; 3], mut visit: impl FnMut([i64; 3])) {
    let k = (0..3)
        .max_by_key(|&i| (w[i].abs(), std::cmp::Reverse(i)))
        .unwrap();
    let (i, j) = match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for ui in -bounds[i]..=bounds[i] {
        for uj in -bounds[j]..=bounds[j] {
            let rest = -(w[i] * ui + w[j] * uj);
            if rest % w[k] != 0 {
                continue;
            }
            let uk = rest / w[k];
            if uk.abs() > bounds[k] {
                continue;
            }
            let mut u = [0i64; 3];
            u[i] = ui;
            u[j] = uj;
            u[k] = uk;
            if primitive3(u) {
                visit(u);
            }
        }
    }
}

/// Exact number of primitive `u ∈ Z³` with `|uᵢ| ≤ Uᵢ` and `u·w = 0`.
pub fn count_primitive_solutions(inst: &LinearFormInstance) -> Result<u64> {
    if inst.u.iter().any(|&b| b > MAX_BOX) {
        return Err(Error::Capacity {
            what: "box side",
            requested: inst.u.iter().cloned().fold(0.0, f64::max) as u64,
            limit: MAX_BOX as u64,
        });
    }
    let bounds = inst.u.map(|b| b.floor() as i64);
    let mut count = 0;
    for_each_primitive_solution(inst.w, bounds, |_| count += 1);
    Ok(count)
}

/// `12π U₀U₁U₂ / maxᵢ(|wᵢ|Uᵢ) + 4`.
pub fn lemma1_bound(inst: &LinearFormInstance) -> f64 {
    let [u0, u1, u2] = inst.u;
    let denom = (0..3)
        .map(|i| inst.w[i].unsigned_abs() as f64 * inst.u[i])
        .fold(0.0, f64::max);
    12.0 * std::f64::consts::PI * u0 * u1 * u2 / denom + 4.0
}

/// Primitive-solution counts of one `w` for every integer box
/// `[−b₀,b₀]×[−b₁,b₁]×[−b₂,b₂]` with `bᵢ ≤ max_bound`.
#[derive(Debug, Clone)]
pub struct BoxCounts {
    max_bound: usize,
    /// cumulative counts indexed by `(b₀, b₁, b₂)`
    cumulative: Vec<u64>,
}

impl BoxCounts {
    pub fn new(w: [i64; 3], max_bound: u32) -> Result<Self> {
        LinearFormInstance::new(w, [1.0; 3])?;
        let n = max_bound as usize + 1;
        let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let mut cells = vec![0u64; n * n * n];
        let b = max_bound as i64;
        for_each_primitive_solution(w, [b; 3], |u| {
            cells[idx(
                u[0].unsigned_abs() as usize,
                u[1].unsigned_abs() as usize,
                u[2].unsigned_abs() as usize,
            )] += 1;
        });
        // 3-D prefix sums
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut v = cells[idx(a, b, c)];
                    if a > 0 {
                        v += cells[idx(a - 1, b, c)];
                    }
                    if b > 0 {
                        v += cells[idx(a, b - 1, c)];
                    }
                    if c > 0 {
                        v += cells[idx(a, b, c - 1)];
                    }
                    if a > 0 && b > 0 {
                        v -= cells[idx(a - 1, b - 1, c)];
                    }
                    if a > 0 && c > 0 {
                        v -= cells[idx(a - 1, b, c - 1)];
                    }
                    if b > 0 && c > 0 {
                        v -= cells[idx(a, b - 1, c - 1)];
                    }
                    if a > 0 && b > 0 && c > 0 {
                        v += cells[idx(a - 1, b - 1, c - 1)];
                    }
                    cells[idx(a, b, c)] = v;
                }
            }
        }
        Ok(BoxCounts {
            max_bound: max_bound as usize,
            cumulative: cells,
        })
    }

    pub fn count(&self, b: [u32; 3]) -> u64 {
        let n = self.max_bound + 1;
        let [a, b, c] = b.map(|v| (v as usize).min(self.max_bound));
        self.cumulative[(a * n + b) * n + c]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Violation {
    pub w: [i64; 3],
    pub u: [u32; 3],
    pub count: u64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Sweep {
    pub max_w: i64,
    pub max_u: u32,
    pub instances: u64,
    /// largest `count / bound` seen
    pub max_ratio: f64,
    pub violations: Vec<Lemma1Violation>,
}

/// Checks `count ≤ bound` for every primitive `w` with `|wᵢ| ≤ max_w` and
/// every integer box `1 ≤ Uᵢ ≤ max_u`.
pub fn lemma1_sweep(max_w: i64, max_u: u32) -> Lemma1Sweep {
    let side = 2 * max_w + 1;
    let results: Vec<(u64, f64, Vec<Lemma1Violation>)> = (0..side * side * side)
        .into_par_iter()
        .filter_map(|k| {
            let w = [
                k / (side * side) - max_w,
                (k / side) % side - max_w,
                k % side - max_w,
            ];
            let counts = BoxCounts::new(w, max_u).ok()?;
            let mut instances = 0;
            let mut max_ratio: f64 = 0.0;
            let mut violations = Vec::new();
            for u0 in 1..=max_u {
                for u1 in 1..=max_u {
                    for u2 in 1..=max_u {
                        let u = [u0, u1, u2];
                        let inst = LinearFormInstance {
                            w,
                            u: u.map(f64::from),
                        };
                        let count = counts.count(u);
                        let bound = lemma1_bound(&inst);
                        instances += 1;
                        max_ratio = max_ratio.max(count as f64 / bound);
                        if count as f64 > bound {
                            violations.push(Lemma1Violation { w, u, count, bound });
                        }
                    }
                }
            }
            Some((instances, max_ratio, violations))
        })
        .collect();
    let mut sweep = Lemma1Sweep {
        max_w,
        max_u,
        instances: 0,
        max_ratio: 0.0,
        violations: Vec::new(),
    };
    for (n, r, v) in results {
        sweep.instances += n;
        sweep.max_ratio = sweep.max_ratio.max(r);
        sweep.violations.extend(v);
    }
    sweep
}

fn check_units(q: u64, a1: i64, a2: i64) -> Result<()> {
    for a in [a1, a2] {
        if a == 0 || gcd(a.unsigned_abs(), q) != 1 {
            return Err(Error::domain(format!(
                "{a} is not a nonzero unit modulo {q}"
            )));
        }
    }
    Ok(())
}

fn box_side(v: f64) -> Result<u64> {
    if !(v >= 1.0) || !v.is_finite() {
        return Err(Error::domain(format!("box side {v} must be >= 1")));
    }
    Ok(v.floor() as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CongruenceCounts {
    pub v1: f64,
    pub v2: f64,
    pub q: u64,
    pub a1: i64,
    pub a2: i64,
    /// `N(V₁,V₂;q,a₁,a₂)` by residue buckets.
    pub n: u64,
    /// `N` by direct pair enumeration, when `V₁V₂` is within budget.
    pub n_direct: Option<u64>,
    /// `N*(V₁,V₂;q)`, denominator dividing `φ(q)`.
    pub n_star: Ratio<u128>,
    /// `M(q,a₁,a₂)` when `q ≤ MAX_EXACT_M_MODULUS`.
    pub m: Option<BigRational>,
}

/// `N` by enumerating every pair of the box.
pub fn congruence_count_direct(v1: f64, v2: f64, q: u64, a1: i64, a2: i64) -> Result<u64> {
    check_units(q, a1, a2)?;
    let (b1, b2) = (box_side(v1)?, box_side(v2)?);
    if (b1 as f64) * (b2 as f64) > MAX_DIRECT_PAIRS {
        return Err(Error::Capacity {
            what: "V1*V2",
            requested: b1.saturating_mul(b2),
            limit: MAX_DIRECT_PAIRS as u64,
        });
    }
    let qi = q as i128;
    let r1 = (a1 as i128).rem_euclid(qi);
    let r2 = (a2 as i128).rem_euclid(qi);
    let mut n = 0;
    for x in 1..=b1 {
        if gcd(x, q) != 1 {
            continue;
        }
        let lhs = r1 * x as i128 % qi;
        for y in 1..=b2 {
            if lhs == r2 * y as i128 % qi && gcd(y, q) == 1 {
                n += 1;
            }
        }
    }
    Ok(n)
}

/// Number of `v ∈ [1, b]` in each residue class modulo `q`.
fn class_counts(b: u64, q: u64) -> Vec<u64> {
    (0..q)
        .map(|c| {
            let c = if c == 0 { q } else { c };
            if c > b {
                0
            } else {
                (b - c) / q + 1
            }
        })
        .collect()
}

/// `N` by counting `v₂` per unit class `c` and pairing it with the class
/// `a₂a₁⁻¹c` of `v₁`.
pub fn congruence_count_bucketed(v1: f64, v2: f64, q: u64, a1: i64, a2: i64) -> Result<u64> {
    check_units(q, a1, a2)?;
    let (b1, b2) = (box_side(v1)?, box_side(v2)?);
    let first = class_counts(b1, q);
    let second = class_counts(b2, q);
    let a1r = (a1 as i128).rem_euclid(q as i128) as u64;
    let a2r = (a2 as i128).rem_euclid(q as i128) as u64;
    let ratio = (a2r as u128 * mod_inverse(a1r, q).expect("unit") as u128 % q as u128) as u64;
    Ok((0..q)
        .filter(|&c| gcd(c, q) == 1)
        .map(|c| {
            let target = (ratio as u128 * c as u128 % q as u128) as usize;
            second[c as usize] * first[target]
        })
        .sum())
}

fn units_up_to(b: u64, q: u64) -> u64 {
    let phi = euler_phi(q).expect("q >= 1");
    let full = (b / q) * phi;
    full + (1..=b % q).filter(|&v| gcd(v, q) == 1).count() as u64
}

/// `N*(V₁,V₂;q) = #{units in the box} / φ(q)`.
pub fn n_star(v1: f64, v2: f64, q: u64) -> Result<Ratio<u128>> {
    if q == 0 {
        return Err(Error::domain("q must be >= 1"));
    }
    let (b1, b2) = (box_side(v1)?, box_side(v2)?);
    let pairs = units_up_to(b1, q) as u128 * units_up_to(b2, q) as u128;
    Ok(Ratio::new(pairs, euler_phi(q)? as u128))
}

pub fn congruence_count(v1: f64, v2: f64, q: u64, a1: i64, a2: i64) -> Result<CongruenceCounts> {
    if q == 0 {
        return Err(Error::domain("q must be >= 1"));
    }
    let n = congruence_count_bucketed(v1, v2, q, a1, a2)?;
    let n_direct = if v1.floor() * v2.floor() <= MAX_DIRECT_PAIRS {
        Some(congruence_count_direct(v1, v2, q, a1, a2)?)
    } else {
        None
    };
    let m = if q <= MAX_EXACT_M_MODULUS {
        Some(m_quantity(q, a1, a2)?)
    } else {
        None
    };
    Ok(CongruenceCounts {
        v1,
        v2,
        q,
        a1,
        a2,
        n,
        n_direct,
        n_star: n_star(v1, v2, q)?,
        m,
    })
}

/// `L = lcm(1, …, h)` and `L/k` for `k = 0..=h` (index 0 unused).
fn harmonic_scale(h: u64) -> (BigInt, Vec<BigInt>) {
    let mut l = BigInt::from(1u32);
    for k in 2..=h {
        l = l.lcm(&BigInt::from(k));
    }
    let mut quotients = vec![BigInt::zero()];
    quotients.extend((1..=h).map(|k| &l / BigInt::from(k)));
    (l, quotients)
}

/// Admissible `r`, `s`: `0 < |r| ≤ q/2`.
fn signed_range(h: i64) -> impl Iterator<Item = i64> {
    (-h..=h).filter(|&v| v != 0)
}

/// `M(q,a₁,a₂)`, exact. For each divisor `d`, `s` runs over the class
/// `−a₂a₁⁻¹r (mod d)` through precomputed per-class sums of `1/|s|`.
pub fn m_quantity(q: u64, a1: i64, a2: i64) -> Result<BigRational> {
    check_units(q, a1, a2)?;
    if q > MAX_EXACT_M_MODULUS {
        return Err(Error::Capacity {
            what: "modulus for exact M",
            requested: q,
            limit: MAX_EXACT_M_MODULUS,
        });
    }
    let h = q / 2;
    if h == 0 {
        return Ok(BigRational::zero());
    }
    let (l, inv) = harmonic_scale(h);
    let mut numerator = BigInt::zero();
    for d in divisors(q) {
        let di = d as i64;
        let a1d = a1.rem_euclid(di) as u64;
        let a2d = a2.rem_euclid(di) as u64;
        let slope = if d == 1 {
            0
        } else {
            ((d - a2d) % d) * mod_inverse(a1d, d).expect("unit") % d
        };
        let mut per_class = vec![BigInt::zero(); d as usize];
        for s in signed_range(h as i64) {
            per_class[s.rem_euclid(di) as usize] += &inv[s.unsigned_abs() as usize];
        }
        let mut inner = BigInt::zero();
        for r in signed_range(h as i64) {
            let class = ((slope as i128 * r as i128).rem_euclid(d as i128)) as usize;
            inner += &inv[r.unsigned_abs() as usize] * &per_class[class];
        }
        numerator += inner * BigInt::from(d);
    }
    Ok(BigRational::new(numerator, &l * &l))
}

/// `M(q,a₁,a₂)` by the literal double loop over `(r, s)` per divisor,
/// `O(τ(q) q²)`. Exact.
pub fn m_quantity_naive(q: u64, a1: i64, a2: i64) -> Result<BigRational> {
    check_units(q, a1, a2)?;
    let h = (q / 2) as i64;
    if h == 0 {
        return Ok(BigRational::zero());
    }
    let hu = h as usize;
    let mut weight = vec![0u64; (hu + 1) * (hu + 1)];
    for d in divisors(q) {
        let di = d as i64;
        for r in signed_range(h) {
            for s in signed_range(h) {
                if (a1 as i128 * s as i128 + a2 as i128 * r as i128).rem_euclid(di as i128) == 0 {
                    weight[r.unsigned_abs() as usize * (hu + 1) + s.unsigned_abs() as usize] += d;
                }
            }
        }
    }
    let (l, inv) = harmonic_scale(h as u64);
    let mut numerator = BigInt::zero();
    for r in 1..=hu {
        for s in 1..=hu {
            let w = weight[r * (hu + 1) + s];
            if w != 0 {
                numerator += &inv[r] * &inv[s] * BigInt::from(w);
            }
        }
    }
    Ok(BigRational::new(numerator, &l * &l))
}

/// `M(q,a₁,a₂)` in double precision, same traversal as [`m_quantity`].
pub fn m_quantity_f64(q: u64, a1: i64, a2: i64) -> Result<f64> {
    check_units(q, a1, a2)?;
    let h = (q / 2) as i64;
    let mut total = 0.0;
    for d in divisors(q) {
        let di = d as i64;
        let slope = if d == 1 {
            0
        } else {
            let a1d = a1.rem_euclid(di) as u64;
            let a2d = a2.rem_euclid(di) as u64;
            ((d - a2d) % d) * mod_inverse(a1d, d).expect("unit") % d
        };
        let mut per_class = vec![0.0f64; d as usize];
        for s in signed_range(h) {
            per_class[s.rem_euclid(di) as usize] += 1.0 / s.unsigned_abs() as f64;
        }
        let inner: f64 = signed_range(h)
            .map(|r| {
                let class = (slope as i128 * r as i128).rem_euclid(d as i128) as usize;
                per_class[class] / r.unsigned_abs() as f64
            })
            .sum();
        total += d as f64 * inner;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma3Average {
    pub q: u64,
    pub f1: f64,
    pub f2: f64,
    /// `Σ* M(q, f₁², f₂²)` over `Fᵢ < fᵢ ≤ 2Fᵢ`, `gcd(f₁, f₂) = 1`.
    pub sum: f64,
    /// `F₁F₂ + q`
    pub envelope: f64,
    pub terms: u64,
    /// whether the terms were summed as exact rationals
    pub exact: bool,
}

impl Lemma3Average {
    pub fn ratio(&self) -> f64 {
        self.sum / self.envelope
    }
}

/// Largest `F₁F₂` accepted by [`lemma3_average`].
pub const MAX_LEMMA3_BOX: f64 = 1e4;
/// Moduli above this use the double-precision `M`.
pub const MAX_EXACT_LEMMA3_MODULUS: u64 = 500;

/// Sum of `M(q, f₁², f₂²)` over the dyadic box with `gcd(f₁f₂, q) = 1` and
/// `gcd(f₁, f₂) = 1`, plus the envelope `F₁F₂ + q`.
///
/// Since `M(q,a₁,a₂)` only depends on `a₂a₁⁻¹ mod q`, terms are memoized by
/// that ratio.
pub fn lemma3_average(q: u64, f1: f64, f2: f64) -> Result<Lemma3Average> {
    if q == 0 {
        return Err(Error::domain("q must be >= 1"));
    }
    if !(f1 >= 0.5 && f2 >= 0.5) {
        return Err(Error::domain("F1, F2 must be >= 1/2"));
    }
    if f1 * f2 > MAX_LEMMA3_BOX {
        return Err(Error::Capacity {
            what: "F1*F2",
            requested: (f1 * f2) as u64,
            limit: MAX_LEMMA3_BOX as u64,
        });
    }
    let range = |f: f64| (f.floor() as u64 + 1)..=((2.0 * f).floor() as u64);
    let exact = q <= MAX_EXACT_LEMMA3_MODULUS;
    let mut exact_cache: HashMap<u64, BigRational> = HashMap::new();
    let mut float_cache: HashMap<u64, f64> = HashMap::new();
    let mut exact_sum = BigRational::zero();
    let mut float_sum = 0.0;
    let mut terms = 0;
    for x in range(f1) {
        if gcd(x, q) != 1 {
            continue;
        }
        let x2 = (x as u128 * x as u128 % q as u128) as u64;
        let x2_inv = mod_inverse(x2, q).expect("unit");
        for y in range(f2) {
            if gcd(y, q) != 1 || gcd(x, y) != 1 {
                continue;
            }
            terms += 1;
            let y2 = (y as u128 * y as u128 % q as u128) as u64;
            let t = (y2 as u128 * x2_inv as u128 % q as u128) as u64;
            // M(q, x², y²) = M(q, 1, y²x⁻²)
            let t_arg = if q == 1 { 1 } else { t as i64 };
            if exact {
                let m = match exact_cache.get(&t) {
                    Some(m) => m.clone(),
                    None => {
                        let m = m_quantity(q, 1, t_arg)?;
                        exact_cache.insert(t, m.clone());
                        m
                    }
                };
                exact_sum += m;
            } else {
                let m = match float_cache.get(&t) {
                    Some(&m) => m,
                    None => {
                        let m = m_quantity_f64(q, 1, t_arg)?;
                        float_cache.insert(t, m);
                        m
                    }
                };
                float_sum += m;
            }
        }
    }
    let sum = if exact {
        exact_sum.to_f64().unwrap_or(f64::NAN)
    } else {
        float_sum
    };
    Ok(Lemma3Average {
        q,
        f1,
        f2,
        sum,
        envelope: f1 * f2 + q as f64,
        terms,
        exact,
    })
}
