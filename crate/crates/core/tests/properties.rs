use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use lacuna_core::cf::{expand, expand_dyadic_all, expand_quadratic, expand_rational, RealSpec};
use lacuna_core::metric::bump::BumpFunction;
use lacuna_core::metric::counting::{default_k_max, smooth_count_direct, smooth_count_fourier};
use lacuna_core::metric::MetricParameters;
use lacuna_core::numerics::{dilate, dilate_max_gap, gap_report, required_bits, DyadicReal, Rounding, TorusPoint};
use lacuna_core::sequences::{thin, LacunarySequence};

const SCALE: i64 = 40;

fn point(m: u64) -> TorusPoint {
    TorusPoint::new(DyadicReal::from_parts(BigInt::from(m), -SCALE)).unwrap()
}

/// Largest clockwise distance from a point to the next distinct point, in units of `2^-SCALE`.
fn brute_max_gap(ms: &[u64]) -> u64 {
    let one = 1u64 << SCALE;
    let mut best = 0;
    for &x in ms {
        let next = ms.iter().map(|&y| (y + one - x) % one).filter(|&d| d > 0).min().unwrap_or(one);
        best = best.max(next);
    }
    best
}

fn points_strategy() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(
        prop_oneof![0u64..(1 << SCALE), (0u64..16).prop_map(|k| k << (SCALE - 4))],
        1..120,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gap_report_matches_brute_force(ms in points_strategy()) {
        let pts: Vec<TorusPoint> = ms.iter().map(|&m| point(m)).collect();
        let rep = gap_report(&pts).unwrap();
        let expect = DyadicReal::from_parts(BigInt::from(brute_max_gap(&ms)), -SCALE);
        prop_assert_eq!(rep.max_gap, expect);
    }

    #[test]
    fn gaps_sum_to_one(ms in points_strategy()) {
        let pts: Vec<TorusPoint> = ms.iter().map(|&m| point(m)).collect();
        let rep = gap_report(&pts).unwrap();
        let total = rep.gaps.iter().fold(DyadicReal::zero(), |acc, g| &acc + g);
        prop_assert_eq!(total, DyadicReal::one());
        prop_assert_eq!(rep.gaps.len(), ms.len());
    }
}

fn rational_alpha() -> impl Strategy<Value = BigRational> {
    (1u64..1_000_000_007, 2u64..1_000_000_007).prop_map(|(p, q)| BigRational::new(BigInt::from(p % q), BigInt::from(q)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adding_points_never_widens_the_gap(alpha in rational_alpha(), base in 2u32..6, n in 2usize..150) {
        let seq = LacunarySequence::powers(base, n + 1).unwrap();
        let bits = required_bits(seq.term(n + 1));
        let a = DyadicReal::from_rational(&alpha, bits, Rounding::NearestEven);
        let g_n = dilate_max_gap(&a, &seq.terms()[..n]).unwrap();
        let g_n1 = dilate_max_gap(&a, &seq.terms()[..n + 1]).unwrap();
        prop_assert!(g_n1 <= g_n);
    }

    #[test]
    fn doubling_precision_moves_gap_by_little(alpha in rational_alpha(), base in 2u32..6, n in 2usize..150) {
        let seq = LacunarySequence::powers(base, n).unwrap();
        let terms = seq.terms();
        let bits = required_bits(terms.last().unwrap());
        let g1 = dilate_max_gap(&DyadicReal::from_rational(&alpha, bits, Rounding::NearestEven), terms).unwrap();
        let g2 = dilate_max_gap(&DyadicReal::from_rational(&alpha, 2 * bits, Rounding::NearestEven), terms).unwrap();
        // Each dilate moves by at most a_max 2^-bits <= 2^-32, each gap by twice that.
        prop_assert!((&g1 - &g2).abs() <= DyadicReal::from_parts(1, -31));
    }

    #[test]
    fn dilates_agree_with_exact_fractional_parts(alpha in rational_alpha(), n in 1usize..60) {
        let seq = LacunarySequence::powers(3, n).unwrap();
        let bits = required_bits(seq.terms().last().unwrap());
        let a = DyadicReal::from_rational(&alpha, bits, Rounding::NearestEven);
        let pts = dilate(&a, seq.terms()).unwrap();
        let ar = a.to_rational();
        for (p, t) in pts.iter().zip(seq.terms()) {
            let x = &ar * BigRational::from_integer(BigInt::from(t.clone()));
            prop_assert_eq!(p.value().to_rational(), &x - x.floor());
        }
    }

    #[test]
    fn convergent_determinant_and_value(num in 1u64..u64::MAX, den in 1u64..u64::MAX, d in 2u32..5000) {
        let x = BigRational::new(BigInt::from(num), BigInt::from(den));
        let cf = expand_rational(&x, 200);
        prop_assert!(cf.terminated);
        let last = cf.q.len() - 1;
        prop_assert_eq!(BigRational::new(cf.p[last].clone(), BigInt::from(cf.q[last].clone())), x);
        let root = (d as f64).sqrt() as u32;
        let spec = RealSpec::parse(&format!("sqrt:{d}")).unwrap();
        for cf in [cf, expand(&spec, 60).unwrap()] {
            for k in 1..cf.q.len() {
                let det = &cf.p[k] * BigInt::from(cf.q[k - 1].clone()) - &cf.p[k - 1] * BigInt::from(cf.q[k].clone());
                let sign = if k % 2 == 1 { BigInt::one() } else { -BigInt::one() };
                prop_assert_eq!(det, sign);
            }
        }
        if root * root != d {
            prop_assert!(expand(&spec, 1000).unwrap().period.is_some());
        }
    }

    #[test]
    fn dyadic_prefix_matches_exact_quadratic(d in 2u32..100_000, bits in 64u64..400) {
        let root = (d as f64).sqrt() as u32;
        prop_assume!(root * root != d && (root + 1) * (root + 1) != d);
        let spec = RealSpec::parse(&format!("sqrt:{d}")).unwrap();
        let approx = expand_dyadic_all(&spec.approx(bits));
        let exact = expand_quadratic(&BigInt::zero(), &BigUint::from(d), &BigInt::one(), approx.depth());
        prop_assert_eq!(&approx.a0, &exact.a0);
        prop_assert_eq!(&approx.quotients, &exact.quotients);
        prop_assert!(approx.depth() >= 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn poisson_summation_reproduces_direct_count(alpha_bits in any::<[u64; 4]>(), near in 0usize..40, t_raw in any::<u64>(), on_dilate in any::<bool>()) {
        let params = MetricParameters::new(4096, 0.05).unwrap();
        let bump = BumpFunction::get();
        let seq = LacunarySequence::powers(3, 4096).unwrap();
        let th = thin(&seq, 4096, params.thinning_exponent()).unwrap();
        let bits = required_bits(th.terms.last().unwrap());
        let mut m = BigUint::zero();
        for w in alpha_bits {
            m = (m << 64) + w;
        }
        let mant = (m << bits) >> 256;
        let alpha = DyadicReal::from_parts(BigInt::from(mant), -(bits as i64));
        let t = if on_dilate {
            lacuna_core::numerics::frac(&(&alpha * &DyadicReal::from_biguint(&th.terms[near % th.k])))
        } else {
            TorusPoint::new(DyadicReal::from_parts(BigInt::from(t_raw), -64)).unwrap()
        };
        let d = smooth_count_direct(&alpha, &th.terms, &t, &params, bump).unwrap();
        let f = smooth_count_fourier(&alpha, &th.terms, &t, &params, bump, default_k_max(&params)).unwrap();
        prop_assert!((d - f).abs() <= 1e-6, "{} vs {}", d, f);
    }
}
