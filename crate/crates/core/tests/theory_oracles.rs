use procmatch::model::{Match, Pair, ReferenceMatch};
use procmatch::theory::{
    brute_force_expectations, expected_fmeasure, expected_precision, in_sigma_f, in_sigma_p, is_miem_pair,
    prob_annealer_condition, ConfidenceMatch, MeasureKind,
};
use proptest::prelude::*;

const UNIVERSE: usize = 8;

fn pair(k: usize) -> Pair {
    Pair::new(k / 3, k % 3)
}

fn subset(mask: u32) -> Match {
    (0..UNIVERSE).filter(|k| mask >> k & 1 == 1).map(pair).collect()
}

fn reference(mask: u32) -> ReferenceMatch {
    ReferenceMatch::new((0..UNIVERSE).filter(|k| mask >> k & 1 == 1).map(pair))
}

/// Plain-float measures: P(∅) borrows the grown match's value, so adding to
/// an empty match never lowers precision.
fn measures(sigma: u32, truth: u32) -> (f64, f64, f64) {
    let hits = (sigma & truth).count_ones() as f64;
    let size = sigma.count_ones() as f64;
    let r = truth.count_ones() as f64;
    let p = if size == 0.0 { f64::NAN } else { hits / size };
    let rec = if r == 0.0 { 0.0 } else { hits / r };
    let f = if size + r == 0.0 { 0.0 } else { 2.0 * hits / (size + r) };
    (p, rec, f)
}

fn no_drop(before: f64, after: f64) -> bool {
    before.is_nan() || after.is_nan() || after >= before - 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn region_membership_matches_direct_comparison(
        small in 0u32..(1 << UNIVERSE),
        extra in 0u32..(1 << UNIVERSE),
        truth in 0u32..(1 << UNIVERSE),
    ) {
        let big = small | extra;
        let delta = big & !small;
        let (s, d, r) = (subset(small), subset(delta), reference(truth));
        let (p0, r0, f0) = measures(small, truth);
        let (p1, r1, f1) = measures(big, truth);
        let (pd, _, _) = measures(delta, truth);

        prop_assert_eq!(in_sigma_p(&s, &d, &r).unwrap(), no_drop(p0, p1));
        prop_assert_eq!(in_sigma_f(&s, &d, &r).unwrap(), no_drop(f0, f1));
        prop_assert_eq!(is_miem_pair(MeasureKind::Precision, &s, &subset(big), &r).unwrap(), no_drop(p0, p1));
        prop_assert_eq!(is_miem_pair(MeasureKind::FMeasure, &s, &subset(big), &r).unwrap(), no_drop(f0, f1));
        prop_assert!(is_miem_pair(MeasureKind::Recall, &s, &subset(big), &r).unwrap());
        prop_assert!(r1 >= r0);
        if delta != 0 && small != 0 {
            // The regions are stated through the increment's precision.
            prop_assert_eq!(in_sigma_p(&s, &d, &r).unwrap(), pd >= p0 - 1e-12);
            prop_assert_eq!(in_sigma_f(&s, &d, &r).unwrap(), pd >= 0.5 * f0 - 1e-12);
        }
    }

    #[test]
    fn closed_forms_equal_enumeration(
        conf in prop::collection::vec(0.0f64..=1.0, 0..12),
        n in 1usize..15,
    ) {
        let cm = ConfidenceMatch::from_confidences(&conf).unwrap();
        let (bp, bf) = brute_force_expectations(&cm, n).unwrap();
        prop_assert!((bp - expected_precision(&cm)).abs() < 1e-12);
        prop_assert!((bf - expected_fmeasure(&cm, n).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn annealer_condition_iff_expectation_does_not_drop(
        conf in prop::collection::vec((0u32..=20).prop_map(|v| f64::from(v) / 20.0), 0..10),
        q in (0u32..=20).prop_map(|v| f64::from(v) / 20.0),
        n in 1usize..12,
    ) {
        let cm = ConfidenceMatch::from_confidences(&conf).unwrap();
        let grown = cm.with(Pair::new(99, 99), q).unwrap();
        let (p0, f0) = enumerate(&conf, n);
        let mut more = conf.clone();
        more.push(q);
        let (p1, f1) = enumerate(&more, n);
        for (kind, before, after) in [(MeasureKind::Precision, p0, p1), (MeasureKind::FMeasure, f0, f1)] {
            let cond = prob_annealer_condition(kind, &cm, q, n).unwrap();
            let gap = after - before;
            if gap.abs() > 1e-9 {
                prop_assert_eq!(cond, gap > 0.0, "{:?} {:?} q={} gap={}", kind, conf, q, gap);
            }
        }
        prop_assert!(prob_annealer_condition(MeasureKind::Recall, &cm, q, n).unwrap());
        prop_assert_eq!(grown.len(), cm.len() + 1);
    }
}

/// Independent enumeration of expected precision and f-measure; precision of
/// an empty outcome set is taken as zero.
fn enumerate(conf: &[f64], n: usize) -> (f64, f64) {
    let k = conf.len();
    let mut out = (0.0, 0.0);
    for world in 0..(1u64 << k) {
        let w: f64 = conf
            .iter()
            .enumerate()
            .map(|(i, c)| if world >> i & 1 == 1 { *c } else { 1.0 - c })
            .product();
        let hits = world.count_ones() as f64;
        if k > 0 {
            out.0 += w * hits / k as f64;
        }
        out.1 += w * 2.0 * hits / (k + n) as f64;
    }
    out
}

#[test]
fn annealer_rejects_bad_probability() {
    let cm = ConfidenceMatch::from_confidences(&[0.5]).unwrap();
    assert!(prob_annealer_condition(MeasureKind::Precision, &cm, 1.5, 2).is_err());
    assert!(brute_force_expectations(&cm, 0).is_err());
}
