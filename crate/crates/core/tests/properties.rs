use std::sync::OnceLock;

use proptest::prelude::*;

use sqfree::arith::{gcd, sieve_mobius, MobiusTable};
use sqfree::characters::{build_group, character_variance_with, TwistMode};
use sqfree::experiments::{fit_exponents, parse_csv, row_from_profile, to_csv, FitMode, SweepRow};
use sqfree::lemmas::{
    congruence_count_bucketed, congruence_count_direct, count_primitive_solutions, lemma1_bound,
    m_quantity, m_quantity_naive, LinearFormInstance,
};
use sqfree::progressions::{
    profile, t_gamma, t_via_convolution, v_gamma, variance, ResidueBijection,
};

const LIMIT: u64 = 20_000;

fn table() -> &'static MobiusTable {
    static T: OnceLock<MobiusTable> = OnceLock::new();
    T.get_or_init(|| sieve_mobius(LIMIT).unwrap())
}

fn naive_squarefree(n: u64) -> bool {
    (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d * d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn class_counts_partition_coprime_squarefrees(x in 1u64..3_000, q in 1u64..120) {
        let p = profile(table(), x, q).unwrap();
        let direct = (1..=x).filter(|&n| gcd(n, q) == 1 && naive_squarefree(n)).count() as u64;
        prop_assert_eq!(p.total(), direct);
    }

    #[test]
    fn t_routes_agree(x in 1u64..LIMIT, q in 1u64..150) {
        let p = profile(table(), x, q).unwrap();
        prop_assert_eq!(variance(&p).t, t_via_convolution(table(), x, q).unwrap());
    }

    #[test]
    fn variance_dominates_centered_variance(x in 1u64..LIMIT, q in 1u64..300) {
        let r = variance(&profile(table(), x, q).unwrap());
        let c = r.centered_variance.to_f64();
        prop_assert!(c >= 0.0);
        prop_assert!(r.v + 1e-9 * r.v.max(1.0) >= c);
    }

    #[test]
    fn character_bridge(x in 1u64..LIMIT, q in 1u64..120, direct in any::<bool>()) {
        let mode = if direct { TwistMode::Direct } else { TwistMode::Bucketed };
        let g = build_group(q).unwrap();
        let cv = character_variance_with(table(), &g, x, mode).unwrap();
        let exact = variance(&profile(table(), x, q).unwrap()).centered_variance.to_f64();
        prop_assert!((cv - exact).abs() <= 1e-6 * exact.max(1.0), "{} vs {}", cv, exact);
    }

    #[test]
    fn gamma_bounds(x in 1u64..LIMIT, q in 2u64..200, k in 1u64..50, seed in any::<u64>()) {
        let p = profile(table(), x, q).unwrap();
        let rep = variance(&p);
        let c = (k..).find(|&c| gcd(c, q) == 1).unwrap();
        for g in [ResidueBijection::Multiply(c), ResidueBijection::Inverse, ResidueBijection::Random { seed }] {
            let tg = t_gamma(&p, &g).unwrap();
            let vg = v_gamma(&p, &g).unwrap();
            let diff = rep.t as i128 - tg as i128;
            prop_assert!(diff >= 0);
            prop_assert!(diff as f64 <= 2.0 * rep.v * (1.0 + 1e-12) + 1e-9);
            prop_assert!(((diff as f64) - (rep.v - vg)).abs() <= 1e-8 * (rep.t as f64).max(1.0));
            prop_assert!(vg.abs() <= rep.v * (1.0 + 1e-12) + 1e-9);
        }
    }

    #[test]
    fn row_invariants(x in 100u64..LIMIT, q in 1u64..100, e1 in 0.001f64..0.249, e2 in 0.001f64..0.249) {
        let p = profile(table(), x, q.min(x)).unwrap();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = row_from_profile(&p, lo);
        let b = row_from_profile(&p, hi);
        prop_assert!(a.moment1 <= (a.phi as f64 * a.v).sqrt() * (1.0 + 1e-10));
        for (x, y) in [(a.exceed_c1, b.exceed_c1), (a.exceed_c2, b.exceed_c2), (a.exceed_c3, b.exceed_c3)] {
            prop_assert!((0.0..=1.0).contains(&x));
            prop_assert!(y <= x);
        }
    }

    #[test]
    fn csv_round_trip(x in 100u64..LIMIT, qs in prop::collection::vec(1u64..100, 0..5)) {
        let rows: Vec<SweepRow> = qs
            .iter()
            .map(|&q| row_from_profile(&profile(table(), x, q).unwrap(), 0.05))
            .collect();
        let text = to_csv(&rows);
        let parsed = parse_csv(&text).unwrap();
        let rounded: Vec<SweepRow> = rows.iter().map(SweepRow::rounded).collect();
        prop_assert_eq!(parsed, rounded);
        prop_assert_eq!(to_csv(&rows), text);
    }

    #[test]
    fn lemma1_bound_holds(
        w in prop::array::uniform3(-12i64..=12),
        u in prop::array::uniform3(1.0f64..12.0),
    ) {
        prop_assume!(w.iter().any(|&v| v != 0));
        prop_assume!(gcd(gcd(w[0].unsigned_abs(), w[1].unsigned_abs()), w[2].unsigned_abs()) == 1);
        let inst = LinearFormInstance::new(w, u).unwrap();
        prop_assert!(count_primitive_solutions(&inst).unwrap() as f64 <= lemma1_bound(&inst));
    }

    #[test]
    fn lemma2_methods_agree(
        v1 in 1.0f64..300.0, v2 in 1.0f64..300.0, q in 1u64..200,
        a1 in -400i64..400, a2 in -400i64..400,
    ) {
        prop_assume!(a1 != 0 && a2 != 0);
        prop_assume!(gcd(a1.unsigned_abs(), q) == 1 && gcd(a2.unsigned_abs(), q) == 1);
        prop_assert_eq!(
            congruence_count_direct(v1, v2, q, a1, a2).unwrap(),
            congruence_count_bucketed(v1, v2, q, a1, a2).unwrap()
        );
    }

    #[test]
    fn m_fast_matches_naive(q in 1u64..40, a1 in 1i64..40, a2 in 1i64..40, u in 1i64..40) {
        prop_assume!(gcd(a1 as u64, q) == 1 && gcd(a2 as u64, q) == 1 && gcd(u as u64, q) == 1);
        let m = m_quantity(q, a1, a2).unwrap();
        prop_assert_eq!(&m, &m_quantity_naive(q, a1, a2).unwrap());
        prop_assert_eq!(&m, &m_quantity(q, u * a1, u * a2).unwrap());
    }

    #[test]
    fn fit_recovers_power_law(beta in -1.0f64..2.0, c in 0.1f64..10.0, n in 3usize..12) {
        let rows: Vec<SweepRow> = (0..n)
            .map(|i| {
                let q = 10u64 << i;
                synthetic(1_000_000, q, c * (q as f64).powf(beta))
            })
            .collect();
        let fit = fit_exponents(&rows, FitMode::VaryQ).unwrap();
        prop_assert!((fit.beta.unwrap() - beta).abs() < 1e-9);
        prop_assert!((fit.c - c).abs() < 1e-9 * c);
    }
}

fn synthetic(x: u64, q: u64, v: f64) -> SweepRow {
    SweepRow {
        x,
        q,
        phi: q,
        v,
        centered_variance: v,
        t: 0,
        thm1_env: 1.0,
        blomer_env: 1.0,
        hooley_env: 1.0,
        mn_ratio: 1.0,
        moment1: 0.0,
        moment1_env: 1.0,
        exceed_c1: 0.0,
        exceed_c2: 0.0,
        exceed_c3: 0.0,
        in_range_c3: false,
    }
}
