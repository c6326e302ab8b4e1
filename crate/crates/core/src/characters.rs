//! Dirichlet characters modulo `q`.
//!
//! `(Z/qZ)^×` is decomposed through the factorization of `q` into cyclic
//! factors: one per odd prime power (generated by its least primitive root),
//! one of order 2 for `4 ‖ q`, and the pair `{−1, 5}` for `2^k`, `k ≥ 3`.
//! Generators are lifted to residues modulo `q` by CRT. Every unit gets an
//! exponent tuple (its discrete logarithms), and a character is an exponent
//! tuple `c` acting by `a ↦ e(Σ cᵢ logᵢ(a) / dᵢ)`.
//!
//! Character values are kept as exact fractions of a full turn with
//! denominator the group exponent `lcm(dᵢ)`; sums over `n` count how many
//! terms land on each root of unity and only convert to floating point at
//! the end.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::arith::{
    euler_phi, factorize, mod_inverse, mod_pow, prime_divisors, MobiusTable, UnitGroup,
};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Largest modulus accepted by [`build_group`]; the discrete-log table is
/// `O(q)`.
pub const MAX_GROUP_MODULUS: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct CharacterGroup {
    modulus: u64,
    factorization: Vec<(u64, u32)>,
    generators: Vec<u64>,
    orders: Vec<u64>,
    exponent: u64,
    units: UnitGroup,
    /// `logs[r * rank + i]` is the `i`-th discrete log of the residue `r`,
    /// meaningful only when `r` is a unit.
    logs: Vec<u32>,
    is_unit: Vec<bool>,
}

/// An exponent tuple `(c₁, …, c_r)`, `0 ≤ cᵢ < dᵢ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Character {
    exponents: Vec<u64>,
}

impl Character {
    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    pub fn is_principal(&self) -> bool {
        self.exponents.iter().all(|&c| c == 0)
    }
}

/// `e(numerator / denominator)` with `0 ≤ numerator < denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RootOfUnity {
    pub numerator: u64,
    pub denominator: u64,
}

impl RootOfUnity {
    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(
            1.0,
            std::f64::consts::TAU * self.numerator as f64 / self.denominator as f64,
        )
    }
}

/// Smallest primitive root modulo the odd prime power `p^k`.
fn least_primitive_root(p: u64, k: u32) -> u64 {
    let m = p.pow(k);
    let order = (p - 1) * p.pow(k - 1);
    let factors = prime_divisors(order);
    (2..m)
        .find(|&g| g % p != 0 && factors.iter().all(|&r| mod_pow(g, order / r, m) != 1))
        .expect("odd prime powers are cyclic")
}

/// Cyclic factor of a prime-power component: generator modulo `m`, its
/// order, and `log[a mod m]`.
struct Cyclic {
    generator: u64,
    order: u64,
    log: Vec<u32>,
}

fn walk_powers(g: u64, order: u64, m: u64) -> Vec<u32> {
    let mut log = vec![u32::MAX; m as usize];
    let mut v = 1u64;
    for j in 0..order {
        log[v as usize] = j as u32;
        v = v * g % m;
    }
    log
}

fn prime_power_factors(p: u64, k: u32) -> Vec<Cyclic> {
    let m = p.pow(k);
    if p != 2 {
        let g = least_primitive_root(p, k);
        let order = (p - 1) * p.pow(k - 1);
        return vec![Cyclic {
            generator: g,
            order,
            log: walk_powers(g, order, m),
        }];
    }
    match k {
        1 => Vec::new(),
        2 => vec![Cyclic {
            generator: 3,
            order: 2,
            log: walk_powers(3, 2, 4),
        }],
        _ => {
            // a ≡ (−1)^s 5^t (mod 2^k)
            let five_order = m / 4;
            let five_log = walk_powers(5, five_order, m);
            let mut sign_log = vec![u32::MAX; m as usize];
            let mut t_log = vec![u32::MAX; m as usize];
            for a in (1..m).step_by(2) {
                let (s, b) = if a % 4 == 1 { (0, a) } else { (1, m - a) };
                sign_log[a as usize] = s;
                t_log[a as usize] = five_log[b as usize];
            }
            vec![
                Cyclic {
                    generator: m - 1,
                    order: 2,
                    log: sign_log,
                },
                Cyclic {
                    generator: 5,
                    order: five_order,
                    log: t_log,
                },
            ]
        }
    }
}

/// `y mod q` with `y ≡ g (mod m)` and `y ≡ 1 (mod q/m)`.
fn crt_lift(g: u64, m: u64, q: u64) -> u64 {
    let n = q / m;
    let n_inv = mod_inverse(n % m, m).expect("coprime CRT moduli");
    let t = ((g + m - 1) % m) as u128 * n_inv as u128 % m as u128;
    ((1 + n as u128 * t) % q as u128) as u64
}

pub fn build_group(q: u64) -> Result<CharacterGroup> {
    if q == 0 {
        return Err(Error::domain("build_group: q must be >= 1"));
    }
    if q > MAX_GROUP_MODULUS {
        return Err(Error::Capacity {
            what: "character modulus",
            requested: q,
            limit: MAX_GROUP_MODULUS,
        });
    }
    let factorization = factorize(q);
    let mut components: Vec<(u64, Cyclic)> = Vec::new();
    for &(p, k) in &factorization {
        let m = p.pow(k);
        components.extend(prime_power_factors(p, k).into_iter().map(|c| (m, c)));
    }
    let rank = components.len();
    let generators = components
        .iter()
        .map(|(m, c)| crt_lift(c.generator, *m, q))
        .collect();
    let orders: Vec<u64> = components.iter().map(|(_, c)| c.order).collect();
    let exponent = orders.iter().fold(1u64, |acc, &d| num_integer::lcm(acc, d));
    let units = UnitGroup::new(q)?;
    let mut is_unit = vec![false; q as usize];
    let mut logs = vec![0u32; q as usize * rank];
    for &a in units.elements() {
        let r = (a % q) as usize;
        is_unit[r] = true;
        for (i, (m, c)) in components.iter().enumerate() {
            logs[r * rank + i] = c.log[(a % m) as usize];
        }
    }
    Ok(CharacterGroup {
        modulus: q,
        factorization,
        generators,
        orders,
        exponent,
        units,
        logs,
        is_unit,
    })
}

impl CharacterGroup {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn factorization(&self) -> &[(u64, u32)] {
        &self.factorization
    }

    /// Generators as residues modulo `q`, one per cyclic factor.
    pub fn generators(&self) -> &[u64] {
        &self.generators
    }

    /// Cyclic orders `(d₁, …, d_r)`; their product is `φ(q)`.
    pub fn orders(&self) -> &[u64] {
        &self.orders
    }

    /// `lcm(dᵢ)`, the common denominator of all character angles.
    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn rank(&self) -> usize {
        self.orders.len()
    }

    pub fn phi(&self) -> u64 {
        self.units.phi()
    }

    pub fn units(&self) -> &UnitGroup {
        &self.units
    }

    /// Discrete-log tuple of `a`, `None` for non-units.
    pub fn discrete_log(&self, a: i64) -> Option<&[u32]> {
        let r = a.rem_euclid(self.modulus as i64) as usize;
        let rank = self.rank();
        self.is_unit[r].then(|| &self.logs[r * rank..(r + 1) * rank])
    }

    /// `Π gᵢ^{eᵢ} mod q`.
    pub fn reconstruct(&self, exps: &[u32]) -> u64 {
        let q = self.modulus;
        self.generators
            .iter()
            .zip(exps)
            .fold(1 % q, |acc, (&g, &e)| {
                (acc as u128 * mod_pow(g, e as u64, q) as u128 % q as u128) as u64
            })
    }

    /// Number of characters, `φ(q)`.
    pub fn len(&self) -> usize {
        self.orders.iter().product::<u64>() as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `index`-th character in mixed-radix order (last factor fastest);
    /// index 0 is principal.
    pub fn character(&self, index: usize) -> Character {
        let mut rest = index as u64;
        let mut exponents = vec![0; self.rank()];
        for (slot, &d) in exponents.iter_mut().zip(&self.orders).rev() {
            *slot = rest % d;
            rest /= d;
        }
        Character { exponents }
    }

    pub fn characters(&self) -> impl Iterator<Item = Character> + '_ {
        (0..self.len()).map(|i| self.character(i))
    }

    pub fn principal(&self) -> Character {
        self.character(0)
    }

    fn angle_of_logs(&self, chi: &Character, logs: &[u32]) -> u64 {
        let e = self.exponent as u128;
        let mut acc: u128 = 0;
        for ((&c, &l), &d) in chi.exponents.iter().zip(logs).zip(&self.orders) {
            acc = (acc + c as u128 * l as u128 * (e / d as u128)) % e;
        }
        acc as u64
    }

    /// `χ(a)` as an exact fraction of a turn; `None` when `gcd(a, q) > 1`.
    pub fn angle(&self, chi: &Character, a: i64) -> Option<RootOfUnity> {
        self.discrete_log(a).map(|logs| RootOfUnity {
            numerator: self.angle_of_logs(chi, logs),
            denominator: self.exponent,
        })
    }

    /// `χ(a)` as a complex number, `0` off the units.
    pub fn value(&self, chi: &Character, a: i64) -> Complex64 {
        self.angle(chi, a)
            .map_or(Complex64::new(0.0, 0.0), RootOfUnity::to_complex)
    }

    /// Angle numerator of `χ(r)` for every residue `0 ≤ r < q`; `u64::MAX`
    /// marks non-units.
    pub fn angle_table(&self, chi: &Character) -> Vec<u64> {
        let rank = self.rank();
        (0..self.modulus as usize)
            .map(|r| {
                if self.is_unit[r] {
                    self.angle_of_logs(chi, &self.logs[r * rank..(r + 1) * rank])
                } else {
                    u64::MAX
                }
            })
            .collect()
    }

    /// `Σ_k counts[k] · e(k / exponent)`
    fn roots_weighted_sum(&self, counts: &[i64]) -> Complex64 {
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        for (k, &c) in counts.iter().enumerate() {
            if c != 0 {
                let z = RootOfUnity {
                    numerator: k as u64,
                    denominator: self.exponent,
                }
                .to_complex();
                re.add(c as f64 * z.re);
                im.add(c as f64 * z.im);
            }
        }
        Complex64::new(re.value(), im.value())
    }
}

/// How [`twisted_sum`] visits the integers `n ≤ x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TwistMode {
    /// Count squarefree `n` per residue class, then apply `χ` per class.
    #[default]
    Bucketed,
    /// Evaluate `χ(n)` for every squarefree `n ≤ x`, never forming the
    /// per-class counts.
    Direct,
}

/// `Σ_{n ≤ x} |μ(n)| χ(n)`.
pub fn twisted_sum(
    table: &MobiusTable,
    group: &CharacterGroup,
    chi: &Character,
    x: u64,
    mode: TwistMode,
) -> Result<Complex64> {
    table.check_range(x)?;
    let angles = group.angle_table(chi);
    let counts = match mode {
        TwistMode::Bucketed => bucket_by_angle(group, &angles, &residue_counts(table, group, x)),
        TwistMode::Direct => {
            direct_angle_counts(group, &angles, &squarefree_residues(table, group, x))
        }
    };
    Ok(group.roots_weighted_sum(&counts))
}

fn residue_counts(table: &MobiusTable, group: &CharacterGroup, x: u64) -> Vec<i64> {
    let q = group.modulus;
    let mut counts = vec![0i64; q as usize];
    for n in 1..=x {
        if table.is_squarefree(n) {
            counts[(n % q) as usize] += 1;
        }
    }
    counts
}

fn bucket_by_angle(group: &CharacterGroup, angles: &[u64], per_residue: &[i64]) -> Vec<i64> {
    let mut out = vec![0i64; group.exponent as usize];
    for (&a, &c) in angles.iter().zip(per_residue) {
        if a != u64::MAX {
            out[a as usize] += c;
        }
    }
    out
}

/// Residues `n mod q` of the squarefree `n ≤ x` coprime to `q`, in order
/// of `n`.
fn squarefree_residues(table: &MobiusTable, group: &CharacterGroup, x: u64) -> Vec<u32> {
    let q = group.modulus;
    (1..=x)
        .filter(|&n| table.is_squarefree(n))
        .map(|n| (n % q) as u32)
        .filter(|&r| group.is_unit[r as usize])
        .collect()
}

fn direct_angle_counts(group: &CharacterGroup, angles: &[u64], residues: &[u32]) -> Vec<i64> {
    let mut out = vec![0i64; group.exponent as usize];
    for &r in residues {
        out[angles[r as usize] as usize] += 1;
    }
    out
}

/// `(1/φ(q)) Σ_{χ ≠ χ₀} |Σ_{n ≤ x} |μ(n)| χ(n)|²`.
pub fn character_variance(table: &MobiusTable, q: u64, x: u64) -> Result<f64> {
    let group = build_group(q)?;
    character_variance_with(table, &group, x, TwistMode::Bucketed)
}

/// [`character_variance`] over a prebuilt group. Characters are evaluated
/// in parallel and reduced in index order.
pub fn character_variance_with(
    table: &MobiusTable,
    group: &CharacterGroup,
    x: u64,
    mode: TwistMode,
) -> Result<f64> {
    table.check_range(x)?;
    let squares: Vec<f64> = match mode {
        TwistMode::Bucketed => {
            let per_residue = residue_counts(table, group, x);
            (1..group.len())
                .into_par_iter()
                .map(|i| {
                    let angles = group.angle_table(&group.character(i));
                    group
                        .roots_weighted_sum(&bucket_by_angle(group, &angles, &per_residue))
                        .norm_sqr()
                })
                .collect()
        }
        TwistMode::Direct => {
            let residues = squarefree_residues(table, group, x);
            (1..group.len())
                .into_par_iter()
                .map(|i| {
                    let angles = group.angle_table(&group.character(i));
                    group
                        .roots_weighted_sum(&direct_angle_counts(group, &angles, &residues))
                        .norm_sqr()
                })
                .collect()
        }
    };
    let sum: CompensatedSum = squares.into_iter().collect();
    Ok(sum.value() / group.phi() as f64)
}

/// Largest deviation from the two orthogonality relations:
///
/// * `Σ_a χ(a) = 0` for every `χ ≠ χ₀`,
/// * `Σ_χ χ(a) conj(χ(b)) = φ(q) [a = b]` on all pairs when `φ ≤ 32`,
///   otherwise on 256 pairs drawn from a ChaCha8 stream seeded with `q`
///   (half of them diagonal).
///
/// Cost is `O(φ²)`.
pub fn orthogonality_selfcheck(group: &CharacterGroup) -> f64 {
    let units = group.units.elements();
    let e = group.exponent as usize;
    let row_defect = (1..group.len())
        .into_par_iter()
        .map(|i| {
            let chi = group.character(i);
            let mut counts = vec![0i64; e];
            for &a in units {
                counts[group.angle(&chi, a as i64).unwrap().numerator as usize] += 1;
            }
            group.roots_weighted_sum(&counts).norm()
        })
        .reduce(|| 0.0, f64::max);

    let pairs: Vec<(u64, u64)> = if units.len() <= 32 {
        units
            .iter()
            .flat_map(|&a| units.iter().map(move |&b| (a, b)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(group.modulus);
        (0..256)
            .map(|k| {
                let a = units[rng.gen_range(0..units.len())];
                let b = if k % 2 == 0 {
                    a
                } else {
                    units[rng.gen_range(0..units.len())]
                };
                (a, b)
            })
            .collect()
    };
    let column_defect = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut counts = vec![0i64; e];
            for chi in group.characters() {
                let ta = group.angle(&chi, a as i64).unwrap().numerator as usize;
                let tb = group.angle(&chi, b as i64).unwrap().numerator as usize;
                counts[(ta + e - tb) % e] += 1;
            }
            let expected = if a == b { group.phi() as f64 } else { 0.0 };
            (group.roots_weighted_sum(&counts) - Complex64::new(expected, 0.0)).norm()
        })
        .reduce(|| 0.0, f64::max);
    row_defect.max(column_defect)
}

/// Checks the structural invariants of a group: `Π dᵢ = φ(q)`, the
/// discrete log is a bijection onto `Π Z/dᵢZ`, and reconstruction from the
/// log returns the unit.
pub fn validate_group(group: &CharacterGroup) -> Result<()> {
    let phi = euler_phi(group.modulus)?;
    if group.orders.iter().product::<u64>() != phi {
        return Err(Error::domain(
            "product of cyclic orders differs from phi(q)",
        ));
    }
    let mut seen = std::collections::HashSet::new();
    for &a in group.units.elements() {
        let logs = group.discrete_log(a as i64).expect("unit");
        if logs.iter().zip(&group.orders).any(|(&l, &d)| l as u64 >= d) {
            return Err(Error::domain(format!("log of {a} out of range")));
        }
        if !seen.insert(logs.to_vec()) {
            return Err(Error::domain(format!("log of {a} repeats")));
        }
        if group.reconstruct(logs) != a % group.modulus {
            return Err(Error::domain(format!("reconstruction of {a} fails")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::sieve_mobius;
    use crate::progressions::{profile, variance};

    #[test]
    fn group_examples() {
        let g5 = build_group(5).unwrap();
        assert_eq!(g5.orders(), &[4]);
        assert_eq!(g5.generators(), &[2]);
        let g8 = build_group(8).unwrap();
        assert_eq!(g8.orders(), &[2, 2]);
        assert_eq!(g8.generators(), &[7, 5]);
        let g1 = build_group(1).unwrap();
        assert_eq!(g1.phi(), 1);
        assert_eq!(g1.len(), 1);
        assert!(g1.principal().is_principal());
        assert!(build_group(0).is_err());
        assert!(build_group(MAX_GROUP_MODULUS + 1).is_err());
    }

    #[test]
    fn least_primitive_roots() {
        // known least primitive roots
        for (p, g) in [(3, 2), (7, 3), (23, 5), (41, 6), (71, 7), (191, 19)] {
            assert_eq!(least_primitive_root(p, 1), g, "p={p}");
        }
        // prime powers: check the multiplicative order directly
        for (p, k) in [(3u64, 4u32), (5, 3), (29, 2)] {
            let g = least_primitive_root(p, k);
            let m = p.pow(k);
            let order = (1..=m).find(|&j| mod_pow(g, j, m) == 1).unwrap();
            assert_eq!(order, (p - 1) * p.pow(k - 1));
        }
    }

    #[test]
    fn structure_for_all_small_moduli() {
        for q in 1..=1000u64 {
            let g = build_group(q).unwrap();
            validate_group(&g).unwrap_or_else(|e| panic!("q={q}: {e}"));
            assert_eq!(g.len() as u64, g.phi());
        }
    }

    #[test]
    fn characters_are_distinct_and_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for q in [
            2u64, 4, 8, 9, 12, 15, 16, 24, 45, 63, 64, 100, 105, 128, 200,
        ] {
            let g = build_group(q).unwrap();
            let chars: Vec<_> = g.characters().collect();
            let set: std::collections::HashSet<_> = chars.iter().cloned().collect();
            assert_eq!(set.len() as u64, g.phi());
            let units = g.units().elements().to_vec();
            let e = g.exponent();
            for chi in &chars {
                for _ in 0..1000 {
                    let a = units[rng.gen_range(0..units.len())];
                    let b = units[rng.gen_range(0..units.len())];
                    let ab = (a * b % q) as i64;
                    let sum = (g.angle(chi, a as i64).unwrap().numerator
                        + g.angle(chi, b as i64).unwrap().numerator)
                        % e;
                    assert_eq!(g.angle(chi, ab).unwrap().numerator, sum);
                }
                // zero off the units
                if q > 2 {
                    assert_eq!(g.value(chi, q as i64), Complex64::new(0.0, 0.0));
                }
            }
            // distinct characters differ as functions
            let tables: std::collections::HashSet<_> =
                chars.iter().map(|c| g.angle_table(c)).collect();
            assert_eq!(tables.len(), chars.len());
        }
    }

    #[test]
    fn twisted_sum_examples() {
        let t = sieve_mobius(1000).unwrap();
        let g = build_group(3).unwrap();
        let chi = g.character(1);
        for mode in [TwistMode::Bucketed, TwistMode::Direct] {
            let s = twisted_sum(&t, &g, &chi, 10, mode).unwrap();
            assert!((s - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            let p = twisted_sum(&t, &g, &g.principal(), 10, mode).unwrap();
            assert_eq!(p, Complex64::new(5.0, 0.0));
        }
        assert!(twisted_sum(&t, &g, &chi, 1001, TwistMode::Direct).is_err());
    }

    #[test]
    fn twisted_sum_vanishes_on_full_periods() {
        // every integer marked squarefree: each residue appears k times
        let q = 12u64;
        let t = MobiusTable::from_values(vec![1; 12 * 7]).unwrap();
        let g = build_group(q).unwrap();
        for chi in g.characters().skip(1) {
            for mode in [TwistMode::Bucketed, TwistMode::Direct] {
                assert!(twisted_sum(&t, &g, &chi, q * 7, mode).unwrap().norm() < 1e-12);
            }
        }
    }

    #[test]
    fn character_variance_examples() {
        let t = sieve_mobius(10_000).unwrap();
        assert!((character_variance(&t, 3, 10).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(character_variance(&t, 1, 10).unwrap(), 0.0);
        for q in [5u64, 8, 12, 30, 49, 97] {
            let exact = variance(&profile(&t, 10_000, q).unwrap())
                .centered_variance
                .to_f64();
            let g = build_group(q).unwrap();
            for mode in [TwistMode::Bucketed, TwistMode::Direct] {
                let cv = character_variance_with(&t, &g, 10_000, mode).unwrap();
                assert!(
                    (cv - exact).abs() <= 1e-6 * exact.max(1.0),
                    "q={q} {cv} {exact}"
                );
            }
        }
    }

    #[test]
    fn orthogonality_examples() {
        assert!(orthogonality_selfcheck(&build_group(8).unwrap()) < 1e-12);
        assert!(orthogonality_selfcheck(&build_group(5).unwrap()) < 1e-12);
        assert!(orthogonality_selfcheck(&build_group(7).unwrap()) < 1e-10);
        for q in [1u64, 2, 60, 97, 360, 1009] {
            assert!(
                orthogonality_selfcheck(&build_group(q).unwrap()) < 1e-9,
                "q={q}"
            );
        }
    }
}
