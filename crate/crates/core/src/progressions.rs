//! Squarefree counts in reduced residue classes and the quantities built
//! from them.
//!
//! For fixed `(x, q)` a [`ProgressionProfile`] stores
//! `S(x;q,a) = #{n ≤ x squarefree, n ≡ a mod q}` for every unit `a`. From it:
//!
//! * `E(x;q,a) = S(x;q,a) − c_q x/q` ([`error_term`]),
//! * `V(x;q) = Σ*_a E(x;q,a)²` and the pair count `T(x;q) = Σ*_a S(x;q,a)²`
//!   ([`variance`]),
//! * the twisted correlations `T_γ`, `V_γ` for a bijection `γ` of the unit
//!   group ([`t_gamma`], [`v_gamma`]).
//!
//! `T` is also evaluated independently from `|μ(n)| = Σ_{e²|n} μ(e)` by
//! [`t_via_convolution`], without looking at squarefree flags.
//!
//! All integer quantities are exact. Float quantities use compensated
//! summation in residue order.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arith::{c_constant, gcd, mod_inverse, MobiusTable, UnitGroup};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};

#[derive(Debug, Clone, PartialEq)]
pub struct ProgressionProfile {
    x: u64,
    q: u64,
    units: UnitGroup,
    /// `counts[i] = S(x;q,units.elements()[i])`
    counts: Vec<u64>,
    c_q: f64,
    total: u64,
}

impl ProgressionProfile {
    /// Profile with caller-supplied counts, aligned with the ascending unit
    /// residues of `q`.
    pub fn from_counts(x: u64, q: u64, counts: Vec<u64>) -> Result<Self> {
        let units = UnitGroup::new(q)?;
        if counts.len() != units.elements().len() {
            return Err(Error::domain(format!(
                "expected {} counts for q = {q}, got {}",
                units.phi(),
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        Ok(ProgressionProfile {
            x,
            q,
            c_q: c_constant(q)?,
            units,
            counts,
            total,
        })
    }

    pub fn x(&self) -> u64 {
        self.x
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn phi(&self) -> u64 {
        self.units.phi()
    }

    pub fn c_q(&self) -> f64 {
        self.c_q
    }

    /// `Σ*_{n ≤ x} |μ(n)|`
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn units(&self) -> &UnitGroup {
        &self.units
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `S(x;q,a)`; fails when `gcd(a, q) > 1`.
    pub fn count(&self, a: i64) -> Result<u64> {
        self.index(a).map(|i| self.counts[i])
    }

    fn index(&self, a: i64) -> Result<usize> {
        self.units
            .index_of(a)
            .ok_or_else(|| Error::domain(format!("{a} is not a unit modulo {}", self.q)))
    }

    /// `c_q x / q`
    pub fn expected_count(&self) -> f64 {
        self.c_q * self.x as f64 / self.q as f64
    }

    /// Error terms `E(x;q,a)` in unit-residue order.
    pub fn error_terms(&self) -> Vec<f64> {
        let m = self.expected_count();
        self.counts.iter().map(|&s| s as f64 - m).collect()
    }
}

pub fn profile(table: &MobiusTable, x: u64, q: u64) -> Result<ProgressionProfile> {
    table.check_range(x)?;
    if q == 0 {
        return Err(Error::domain("q must be >= 1"));
    }
    let units = UnitGroup::new(q)?;
    let mut by_residue = vec![0u64; q as usize];
    for n in 1..=x {
        if table.is_squarefree(n) {
            by_residue[(n % q) as usize] += 1;
        }
    }
    let counts: Vec<u64> = units
        .elements()
        .iter()
        .map(|&a| by_residue[(a % q) as usize])
        .collect();
    let total = counts.iter().sum();
    Ok(ProgressionProfile {
        x,
        q,
        c_q: c_constant(q)?,
        units,
        counts,
        total,
    })
}

/// `E(x;q,a) = S(x;q,a) − c_q x/q`.
pub fn error_term(p: &ProgressionProfile, a: i64) -> Result<f64> {
    Ok(p.count(a)? as f64 - p.expected_count())
}

/// `(numerator, denominator)` view of an exact non-negative rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExactRational {
    pub numerator: i128,
    pub denominator: i128,
}

impl ExactRational {
    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    pub fn as_ratio(self) -> Ratio<i128> {
        Ratio::new(self.numerator, self.denominator)
    }
}

impl From<Ratio<i128>> for ExactRational {
    fn from(r: Ratio<i128>) -> Self {
        ExactRational {
            numerator: *r.numer(),
            denominator: *r.denom(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub x: u64,
    pub q: u64,
    pub phi: u64,
    pub c_q: f64,
    /// `Σ*_{n ≤ x} |μ(n)|`
    pub total: u64,
    /// `V(x;q) = Σ*_a E(x;q,a)²`
    #[serde(rename = "V")]
    pub v: f64,
    /// `Σ*_a (S_a − total/φ)²`, exact and reduced.
    pub centered_variance: ExactRational,
    /// `T(x;q) = Σ*_a S_a²`
    #[serde(rename = "T")]
    pub t: u128,
    /// `total² / φ`
    pub main_term_t: f64,
    /// `T − total²/φ`
    pub residual: f64,
}

pub fn variance(p: &ProgressionProfile) -> VarianceReport {
    let t: u128 = p.counts.iter().map(|&s| s as u128 * s as u128).sum();
    let phi = p.phi() as i128;
    let total = p.total as i128;
    let centered = Ratio::new(phi * t as i128 - total * total, phi);
    let v = compensated_sum(p.error_terms().into_iter().map(|e| e * e));
    let main_term_t = (total as f64) * (total as f64) / phi as f64;
    VarianceReport {
        x: p.x,
        q: p.q,
        phi: p.phi(),
        c_q: p.c_q,
        total: p.total,
        v,
        centered_variance: centered.into(),
        t,
        main_term_t,
        residual: ExactRational::from(centered).to_f64(),
    }
}

/// `T(x;q)` from the expansion `|μ(n)| = Σ_{e²|n} μ(e)`:
/// `T = Σ* μ(e₁)μ(e₂)` over `d₁e₁², d₂e₂² ≤ x` with `d₁e₁² ≡ d₂e₂² (mod q)`.
///
/// The pairs are grouped by their common residue `r`, giving
/// `T = Σ_r W_r²` with `W_r = Σ_{de² ≡ r} μ(e)`.
pub fn t_via_convolution(table: &MobiusTable, x: u64, q: u64) -> Result<u128> {
    table.check_range(x)?;
    if q == 0 {
        return Err(Error::domain("q must be >= 1"));
    }
    let coprime: Vec<bool> = (0..q).map(|r| gcd(r, q) == 1).collect();
    let mut weight = vec![0i64; q as usize];
    let mut e = 1u64;
    while e * e <= x {
        let mu_e = table.mu(e) as i64;
        if mu_e != 0 && coprime[(e % q) as usize] {
            let e2 = e * e;
            for d in 1..=x / e2 {
                if coprime[(d % q) as usize] {
                    weight[((d * e2) % q) as usize] += mu_e;
                }
            }
        }
        e += 1;
    }
    Ok(weight
        .iter()
        .map(|&w| (w as i128 * w as i128) as u128)
        .sum())
}

/// A permutation `γ` of `(Z/qZ)^×`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidueBijection {
    Identity,
    /// `a ↦ c·a`
    Multiply(u64),
    /// `a ↦ a⁻¹`
    Inverse,
    /// `a ↦ a^k`; a bijection only when `k` is coprime to the group exponent.
    Power(u64),
    /// Uniform permutation of the ascending unit list from a ChaCha8 stream
    /// seeded with `seed` (`rand::seq::SliceRandom::shuffle`).
    Random {
        seed: u64,
    },
}

impl ResidueBijection {
    /// Parses `identity`, `mul:c`, `inv`, `pow:k` or `random`; `random`
    /// takes `seed`.
    pub fn parse(spec: &str, seed: u64) -> Result<Self> {
        let bad = || Error::domain(format!("malformed bijection spec {spec:?}"));
        let (kind, arg) = match spec.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (spec, None),
        };
        let num =
            |a: Option<&str>| -> Result<u64> { a.ok_or_else(bad)?.parse().map_err(|_| bad()) };
        match kind {
            "identity" | "id" if arg.is_none() => Ok(Self::Identity),
            "inv" | "inverse" if arg.is_none() => Ok(Self::Inverse),
            "random" if arg.is_none() => Ok(Self::Random { seed }),
            "mul" => Ok(Self::Multiply(num(arg)?)),
            "pow" => Ok(Self::Power(num(arg)?)),
            _ => Err(bad()),
        }
    }

    /// `perm[i]` is the position of `γ(units[i])`.
    pub fn permutation(&self, units: &UnitGroup) -> Result<Vec<usize>> {
        let q = units.modulus();
        let elems = units.elements();
        let image_index = |v: u64| -> Result<usize> {
            units.index_of(v as i64).ok_or_else(|| {
                Error::domain(format!("{self:?} maps a unit to a non-unit modulo {q}"))
            })
        };
        let perm: Vec<usize> = match *self {
            Self::Identity => (0..elems.len()).collect(),
            Self::Multiply(c) => elems
                .iter()
                .map(|&a| image_index((c as u128 * a as u128 % q as u128) as u64))
                .collect::<Result<_>>()?,
            Self::Inverse => elems
                .iter()
                .map(|&a| image_index(mod_inverse(a, q).unwrap_or(0)))
                .collect::<Result<_>>()?,
            Self::Power(k) => elems
                .iter()
                .map(|&a| image_index(crate::arith::mod_pow(a, k, q)))
                .collect::<Result<_>>()?,
            Self::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut perm: Vec<usize> = (0..elems.len()).collect();
                perm.shuffle(&mut rng);
                perm
            }
        };
        let mut seen = vec![false; perm.len()];
        for &j in &perm {
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::domain(format!(
                    "{self:?} is not a bijection of the units modulo {q}"
                )));
            }
        }
        Ok(perm)
    }
}

impl std::fmt::Display for ResidueBijection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::Multiply(c) => write!(f, "mul:{c}"),
            Self::Inverse => write!(f, "inv"),
            Self::Power(k) => write!(f, "pow:{k}"),
            Self::Random { seed } => write!(f, "random(seed={seed})"),
        }
    }
}

/// `T_γ(x;q) = Σ*_a S(x;q,γ(a)) S(x;q,a)`, i.e. pairs `n₁ ≡ γ(a)`,
/// `n₂ ≡ a` with `γ` applied to the residue of `n₂`.
pub fn t_gamma(p: &ProgressionProfile, g: &ResidueBijection) -> Result<u128> {
    let perm = g.permutation(&p.units)?;
    Ok(perm
        .iter()
        .enumerate()
        .map(|(i, &j)| p.counts[i] as u128 * p.counts[j] as u128)
        .sum())
}

/// `V_γ(x;q) = Σ*_a E(x;q,a) E(x;q,γ(a))`.
pub fn v_gamma(p: &ProgressionProfile, g: &ResidueBijection) -> Result<f64> {
    let perm = g.permutation(&p.units)?;
    let e = p.error_terms();
    Ok(compensated_sum(
        perm.iter().enumerate().map(|(i, &j)| e[i] * e[j]),
    ))
}

/// `T, T_γ, V, V_γ` and the defect of `T − T_γ = V − V_γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaReport {
    pub x: u64,
    pub q: u64,
    pub gamma: String,
    #[serde(rename = "T")]
    pub t: u128,
    #[serde(rename = "T_gamma")]
    pub t_gamma: u128,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "V_gamma")]
    pub v_gamma: f64,
    /// `|(T − T_γ) − (V − V_γ)|`
    pub defect: f64,
}

pub fn gamma_report(p: &ProgressionProfile, g: &ResidueBijection) -> Result<GammaReport> {
    let rep = variance(p);
    let tg = t_gamma(p, g)?;
    let vg = v_gamma(p, g)?;
    let lhs = (rep.t as i128 - tg as i128) as f64;
    Ok(GammaReport {
        x: p.x,
        q: p.q,
        gamma: g.to_string(),
        t: rep.t,
        t_gamma: tg,
        v: rep.v,
        v_gamma: vg,
        defect: (lhs - (rep.v - vg)).abs(),
    })
}

/// Largest absolute defect between `V(x;q)` computed from the error terms
/// and its two expansions through `T(x;q)`:
///
/// * `T − 2 c_q (x/q) Σ* + φ c_q² x²/q²`
/// * `T − (Σ*)²/φ + (Σ* − φ c_q x/q)²/φ`
pub fn equivalence_check(p: &ProgressionProfile) -> f64 {
    let rep = variance(p);
    let phi = p.phi() as f64;
    let m = p.expected_count();
    let total = p.total as f64;
    let t = rep.t as f64;

    let mut first = CompensatedSum::new();
    first.add(t);
    first.add(-2.0 * m * total);
    first.add(phi * m * m);

    let mut second = CompensatedSum::new();
    second.add(rep.centered_variance.to_f64());
    let shift = total - phi * m;
    second.add(shift * shift / phi);

    (rep.v - first.value())
        .abs()
        .max((rep.v - second.value()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::sieve_mobius;

    fn table() -> MobiusTable {
        sieve_mobius(20_000).unwrap()
    }

    /// Literal pair enumeration of the convolution sum, `O(x²)`.
    fn t_by_pairs(t: &MobiusTable, x: u64, q: u64) -> i64 {
        let mut terms = Vec::new();
        for e in 1..=x {
            if e * e > x {
                break;
            }
            for d in 1..=x / (e * e) {
                if gcd(d * e, q) == 1 {
                    terms.push((d * e * e % q, t.mu(e) as i64));
                }
            }
        }
        let mut sum = 0;
        for &(r1, m1) in &terms {
            for &(r2, m2) in &terms {
                if r1 == r2 {
                    sum += m1 * m2;
                }
            }
        }
        sum
    }

    #[test]
    fn profile_examples() {
        let t = table();
        let p = profile(&t, 20, 4).unwrap();
        assert_eq!(p.count(1).unwrap(), 4);
        assert_eq!(p.count(3).unwrap(), 5);
        let p = profile(&t, 10, 3).unwrap();
        assert_eq!(p.count(1).unwrap(), 3);
        assert_eq!(p.count(2).unwrap(), 2);
        let p = profile(&t, 10, 1).unwrap();
        assert_eq!(p.count(1).unwrap(), 7);
        assert_eq!(p.total(), 7);
    }

    #[test]
    fn profile_errors() {
        let t = sieve_mobius(100).unwrap();
        assert!(matches!(profile(&t, 101, 3), Err(Error::Capacity { .. })));
        assert!(profile(&t, 100, 0).is_err());
        let p = profile(&t, 100, 6).unwrap();
        assert!(matches!(p.count(4), Err(Error::Domain(_))));
        assert!(error_term(&p, 3).is_err());
    }

    #[test]
    fn error_term_examples() {
        let t = table();
        let pi2 = std::f64::consts::PI.powi(2);
        let p = profile(&t, 10, 1).unwrap();
        assert!((error_term(&p, 1).unwrap() - (7.0 - 60.0 / pi2)).abs() < 1e-12);
        assert!((error_term(&p, 1).unwrap() - 0.9207).abs() < 1e-4);
        let p = profile(&t, 20, 4).unwrap();
        assert!((error_term(&p, 1).unwrap() - (4.0 - 5.0 * 8.0 / pi2)).abs() < 1e-12);
        for q in 1..30 {
            let p = profile(&t, 1000, q).unwrap();
            for &a in p.units().elements() {
                let e = error_term(&p, a as i64).unwrap();
                assert!((e + p.expected_count() - p.count(a as i64).unwrap() as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn profile_invariants() {
        let t = table();
        for q in 1..=60u64 {
            for x in [1u64, 17, 500, 20_000] {
                let p = profile(&t, x, q).unwrap();
                assert!(p.counts().iter().all(|&s| s <= x / q + 1));
                let direct = (1..=x)
                    .filter(|&n| t.is_squarefree(n) && gcd(n, q) == 1)
                    .count() as u64;
                assert_eq!(p.total(), direct);
            }
        }
    }

    #[test]
    fn variance_examples() {
        let t = table();
        let rep = variance(&profile(&t, 10, 3).unwrap());
        assert_eq!(rep.centered_variance.as_ratio(), Ratio::new(1, 2));
        assert_eq!(rep.t, 13);
        assert!((rep.residual - 0.5).abs() < 1e-15);

        let uniform = ProgressionProfile::from_counts(100, 5, vec![9, 9, 9, 9]).unwrap();
        let rep = variance(&uniform);
        assert_eq!(rep.centered_variance.numerator, 0);
        assert!(rep.v >= 0.0);
    }

    #[test]
    fn centered_variance_is_t_minus_main_term() {
        let t = table();
        for q in 1..=60u64 {
            for x in [10u64, 999, 20_000] {
                let rep = variance(&profile(&t, x, q).unwrap());
                let phi = rep.phi as i128;
                let expected = Ratio::new(rep.t as i128 * phi - (rep.total as i128).pow(2), phi);
                assert_eq!(rep.centered_variance.as_ratio(), expected);
                assert!(rep.centered_variance.numerator >= 0);
                assert!(rep.v >= 0.0);
                // denominator divides phi
                assert_eq!(phi % rep.centered_variance.denominator, 0);
            }
        }
    }

    #[test]
    fn convolution_examples() {
        let t = table();
        assert_eq!(t_via_convolution(&t, 10, 3).unwrap(), 13);
        assert_eq!(t_via_convolution(&t, 10, 1).unwrap(), 49);
        let rep = variance(&profile(&t, 100, 7).unwrap());
        assert_eq!(t_via_convolution(&t, 100, 7).unwrap(), rep.t);
        assert!(t_via_convolution(&t, 20_001, 7).is_err());
    }

    #[test]
    fn convolution_grouping_matches_pair_enumeration() {
        let t = table();
        for q in 1..=12u64 {
            for x in [1u64, 10, 37, 120] {
                assert_eq!(
                    t_via_convolution(&t, x, q).unwrap() as i64,
                    t_by_pairs(&t, x, q),
                    "x={x} q={q}"
                );
            }
        }
    }

    #[test]
    fn gamma_examples() {
        let t = table();
        let p = profile(&t, 10, 3).unwrap();
        assert_eq!(t_gamma(&p, &ResidueBijection::Identity).unwrap(), 13);
        assert_eq!(t_gamma(&p, &ResidueBijection::Multiply(2)).unwrap(), 12);
        let v = variance(&p).v;
        assert_eq!(v_gamma(&p, &ResidueBijection::Identity).unwrap(), v);
    }

    #[test]
    fn bijection_parsing_and_validation() {
        assert_eq!(
            ResidueBijection::parse("inv", 0).unwrap(),
            ResidueBijection::Inverse
        );
        assert_eq!(
            ResidueBijection::parse("mul:5", 0).unwrap(),
            ResidueBijection::Multiply(5)
        );
        assert_eq!(
            ResidueBijection::parse("random", 9).unwrap(),
            ResidueBijection::Random { seed: 9 }
        );
        for bad in ["mul", "mul:x", "pow:", "rot:3", "inv:2", ""] {
            assert!(ResidueBijection::parse(bad, 0).is_err(), "{bad}");
        }
        let units = UnitGroup::new(12).unwrap();
        // 3 is not a unit modulo 12
        assert!(ResidueBijection::Multiply(3).permutation(&units).is_err());
        // squaring collapses ±a modulo 7
        let units7 = UnitGroup::new(7).unwrap();
        assert!(ResidueBijection::Power(2).permutation(&units7).is_err());
        assert!(ResidueBijection::Power(5).permutation(&units7).is_ok());
        let p = profile(&table(), 100, 7).unwrap();
        assert!(t_gamma(&p, &ResidueBijection::Power(3)).is_err());
        assert!(v_gamma(&p, &ResidueBijection::Power(2)).is_err());
    }

    #[test]
    fn random_permutation_is_reproducible() {
        let units = UnitGroup::new(101).unwrap();
        let a = ResidueBijection::Random { seed: 7 }
            .permutation(&units)
            .unwrap();
        let b = ResidueBijection::Random { seed: 7 }
            .permutation(&units)
            .unwrap();
        let c = ResidueBijection::Random { seed: 8 }
            .permutation(&units)
            .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn gamma_orientations_agree() {
        let t = table();
        for q in [7u64, 12, 30, 97] {
            let p = profile(&t, 20_000, q).unwrap();
            for g in [
                ResidueBijection::Inverse,
                ResidueBijection::Multiply(q - 1),
                ResidueBijection::Random { seed: q },
            ] {
                let perm = g.permutation(p.units()).unwrap();
                let mut inv = vec![0; perm.len()];
                for (i, &j) in perm.iter().enumerate() {
                    inv[j] = i;
                }
                // n₁ ≡ a, n₂ ≡ γ⁻¹(a)
                let other: u128 = inv
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| p.counts()[i] as u128 * p.counts()[j] as u128)
                    .sum();
                assert_eq!(t_gamma(&p, &g).unwrap(), other);
            }
        }
    }

    #[test]
    fn gamma_relations() {
        let t = table();
        for q in [5u64, 7, 12, 30, 97, 144] {
            let p = profile(&t, 20_000, q).unwrap();
            for g in [
                ResidueBijection::Identity,
                ResidueBijection::Inverse,
                ResidueBijection::Multiply(5 % q),
                ResidueBijection::Random { seed: 1 },
            ] {
                if g.permutation(p.units()).is_err() {
                    continue;
                }
                let r = gamma_report(&p, &g).unwrap();
                let diff = r.t as i128 - r.t_gamma as i128;
                assert!(diff >= 0);
                assert!(diff as f64 <= 2.0 * r.v * (1.0 + 1e-12));
                assert!(r.v_gamma.abs() <= r.v * (1.0 + 1e-12));
                assert!(r.defect <= 1e-8 * (r.t as f64).max(1.0));
            }
        }
    }

    #[test]
    fn equivalence_examples() {
        let t = table();
        assert!(equivalence_check(&profile(&t, 10, 3).unwrap()) < 1e-9);
        // synthetic profile whose counts equal c_q x/q exactly: c_1 x = 6
        let x = (6.0 / crate::arith::INV_ZETA2).round() as u64;
        let synthetic = ProgressionProfile::from_counts(x, 1, vec![6]).unwrap();
        let rep = variance(&synthetic);
        assert_eq!(rep.centered_variance.numerator, 0);
        assert!(equivalence_check(&synthetic) < 1e-9);
    }
}
