//! Small-scale run of every exact identity (`q ≤ 60`, `x ≤ 10⁴`).
//!
//! Each check yields one [`CheckOutcome`] with its largest defect. Defects
//! are exact counts for integer identities and normalized float defects
//! otherwise; a check passes when its defect is at most its tolerance.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::arith::{euler_phi, gcd, squarefree_count_via_mobius, unit_group, MobiusTable};
use crate::characters::{build_group, character_variance_with, orthogonality_selfcheck, TwistMode};
use crate::error::Result;
use crate::lemmas::{
    congruence_count, congruence_count_bucketed, congruence_count_direct, lemma1_sweep, m_quantity,
};
use crate::numeric::fmt_sig12;
use crate::progressions::{
    equivalence_check, profile, t_gamma, t_via_convolution, v_gamma, variance, ResidueBijection,
};

pub const MAX_Q: u64 = 60;
pub const X_VALUES: [u64; 2] = [1_000, 10_000];
/// Table size needed by [`run`].
pub const TABLE_LIMIT: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub max_defect: f64,
    pub tolerance: f64,
    /// first failing instance, if any
    pub failure: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn line(&self) -> String {
        match &self.failure {
            None => format!(
                "PASS {} max_defect={} tol={}",
                self.name,
                fmt_sig12(self.max_defect),
                fmt_sig12(self.tolerance)
            ),
            Some(inst) => format!(
                "FAIL {} max_defect={} tol={} instance: {}",
                self.name,
                fmt_sig12(self.max_defect),
                fmt_sig12(self.tolerance),
                inst
            ),
        }
    }
}

/// Folds `(defect, instance)` pairs, in order, into an outcome.
fn outcome(
    name: &'static str,
    tolerance: f64,
    items: impl IntoIterator<Item = (f64, String)>,
) -> CheckOutcome {
    let mut max_defect: f64 = 0.0;
    let mut failure = None;
    for (defect, instance) in items {
        max_defect = max_defect.max(defect);
        if failure.is_none() && !(defect <= tolerance) {
            failure = Some(instance);
        }
    }
    CheckOutcome {
        name,
        max_defect,
        tolerance,
        failure,
    }
}

fn grid() -> Vec<(u64, u64)> {
    X_VALUES
        .iter()
        .flat_map(|&x| (1..=MAX_Q).map(move |q| (x, q)))
        .collect()
}

pub fn run(table: &MobiusTable, seed: u64) -> Result<Vec<CheckOutcome>> {
    table.check_range(TABLE_LIMIT)?;
    let mut out = Vec::new();

    let bad = table.divisor_sum_violations(TABLE_LIMIT)?;
    out.push(CheckOutcome {
        name: "mobius_divisor_sum",
        max_defect: bad.len() as f64,
        tolerance: 0.0,
        failure: bad.first().map(|n| format!("n={n}")),
    });

    out.push(outcome(
        "squarefree_count_identity",
        0.0,
        (1..=TABLE_LIMIT).step_by(37).chain([TABLE_LIMIT]).map(|x| {
            let direct = table.squarefree_count(x).unwrap_or(0) as f64;
            let via = squarefree_count_via_mobius(table, x).unwrap_or(0) as f64;
            ((direct - via).abs(), format!("x={x}"))
        }),
    ));

    out.push(outcome(
        "totient_unit_group",
        0.0,
        (1..=2_000u64).map(|q| {
            let a = euler_phi(q).unwrap_or(0) as f64;
            let b = unit_group(q).map(|g| g.phi()).unwrap_or(0) as f64;
            ((a - b).abs(), format!("q={q}"))
        }),
    ));

    let profiles: Vec<_> = grid()
        .par_iter()
        .map(|&(x, q)| profile(table, x, q))
        .collect::<Result<_>>()?;

    let conv: Vec<(f64, String)> = profiles
        .par_iter()
        .map(|p| {
            let t = variance(p).t as f64;
            let c = t_via_convolution(table, p.x(), p.q())
                .map(|v| v as f64)
                .unwrap_or(f64::NAN);
            ((t - c).abs(), format!("x={} q={}", p.x(), p.q()))
        })
        .collect();
    out.push(outcome("t_convolution_two_routes", 0.0, conv));

    out.push(outcome(
        "centered_variance_exact",
        0.0,
        profiles.iter().map(|p| {
            let rep = variance(p);
            let phi = rep.phi as i128;
            let lhs = rep.centered_variance.as_ratio();
            let rhs =
                num_rational::Ratio::new(rep.t as i128 * phi - (rep.total as i128).pow(2), phi);
            let defect = if lhs == rhs { 0.0 } else { 1.0 };
            (defect, format!("x={} q={}", p.x(), p.q()))
        }),
    ));

    out.push(outcome(
        "variance_expansion",
        1e-8,
        profiles.iter().map(|p| {
            let m = p.c_q() * p.x() as f64 / p.q() as f64;
            let scale = (p.phi() as f64 * m * m).max(1.0);
            (
                equivalence_check(p) / scale,
                format!("x={} q={}", p.x(), p.q()),
            )
        }),
    ));

    let bridge: Vec<(f64, String)> = profiles
        .iter()
        .map(|p| {
            let exact = variance(p).centered_variance.to_f64();
            let cv = build_group(p.q())
                .and_then(|g| character_variance_with(table, &g, p.x(), TwistMode::Direct))
                .unwrap_or(f64::NAN);
            (
                (cv - exact).abs() / exact.max(1.0),
                format!("x={} q={}", p.x(), p.q()),
            )
        })
        .collect();
    out.push(outcome("character_variance_bridge", 1e-6, bridge));

    out.push(outcome(
        "character_orthogonality",
        1e-9,
        (1..=MAX_Q).map(|q| {
            let d = build_group(q)
                .map(|g| orthogonality_selfcheck(&g))
                .unwrap_or(f64::NAN);
            (d, format!("q={q}"))
        }),
    ));

    let mut gamma_items = Vec::new();
    for p in profiles.iter().filter(|p| p.x() == 10_000) {
        let q = p.q();
        let rep = variance(p);
        for g in [
            ResidueBijection::Identity,
            ResidueBijection::Inverse,
            ResidueBijection::Multiply(q.saturating_sub(1).max(1)),
            ResidueBijection::Random { seed: seed ^ q },
        ] {
            let tg = t_gamma(p, &g)?;
            let vg = v_gamma(p, &g)?;
            let diff = rep.t as i128 - tg as i128;
            let scale = (rep.t as f64).max(1.0);
            let mut defect = ((diff as f64) - (rep.v - vg)).abs() / scale;
            if diff < 0 || diff as f64 > 2.0 * rep.v * (1.0 + 1e-12) {
                defect = f64::INFINITY;
            }
            gamma_items.push((defect, format!("x={} q={q} gamma={g}", p.x())));
        }
    }
    out.push(outcome("gamma_relations", 1e-8, gamma_items));

    let s = lemma1_sweep(5, 4);
    out.push(CheckOutcome {
        name: "lemma1_bound",
        max_defect: s.violations.len() as f64,
        tolerance: 0.0,
        failure: s.violations.first().map(|v| {
            format!(
                "w={:?} U={:?} count={} bound={}",
                v.w, v.u, v.count, v.bound
            )
        }),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lemma2_items = Vec::new();
    let hand = congruence_count(5.0, 5.0, 3, 1, 1)?;
    lemma2_items.push(((hand.n as f64 - 8.0).abs(), "N(5,5;3,1,1)".to_string()));
    let m2 = m_quantity(2, 1, 1)?.to_f64().unwrap_or(f64::NAN);
    lemma2_items.push(((m2 - 12.0).abs(), "M(2,1,1)".to_string()));
    for _ in 0..100 {
        let q = rng.gen_range(1..=MAX_Q);
        let unit = |rng: &mut ChaCha8Rng| loop {
            let a = rng.gen_range(-(q as i64) * 2..=q as i64 * 2);
            if a != 0 && gcd(a.unsigned_abs(), q) == 1 {
                break a;
            }
        };
        let (a1, a2) = (unit(&mut rng), unit(&mut rng));
        let v1 = rng.gen_range(1.0..200.0);
        let v2 = rng.gen_range(1.0..200.0);
        let d = congruence_count_direct(v1, v2, q, a1, a2)? as f64;
        let b = congruence_count_bucketed(v1, v2, q, a1, a2)? as f64;
        lemma2_items.push(((d - b).abs(), format!("V=({v1},{v2}) q={q} a=({a1},{a2})")));
    }
    out.push(outcome("lemma2_methods", 0.0, lemma2_items));

    let mut m_items = Vec::new();
    for q in 1..=30u64 {
        let units: Vec<i64> = (1..=q as i64).filter(|&a| gcd(a as u64, q) == 1).collect();
        for &a2 in &units {
            let base: BigRational = m_quantity(q, 1, a2)?;
            for &u in &units {
                let scaled = m_quantity(q, u, u * a2)?;
                let sym = m_quantity(q, a2, 1)?;
                let defect = if scaled == base && sym == base {
                    0.0
                } else {
                    1.0
                };
                m_items.push((defect, format!("q={q} u={u} a2={a2}")));
            }
        }
    }
    out.push(outcome("m_unit_scaling", 0.0, m_items));

    Ok(out)
}
