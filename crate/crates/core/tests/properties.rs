use proptest::prelude::*;
use wipcrit::criteria::gordin_block;
use wipcrit::series::{series_terms, CriterionId};
use wipcrit::stats::Moments;
use wipcrit::sum::partial_sums;
use wipcrit::system::arc_overlap;
use wipcrit::verdict::judge_terms;
use wipcrit::{build_system, Arc, Execution, MonteCarlo, ParameterFamily, StreamSeed, VerdictPolicy};

fn overlap_by_counting(a: Arc, b: Arc, m: u64) -> u64 {
    (0..m).filter(|&x| a.contains(x, m) && b.contains(x, m)).count() as u64
}

proptest! {
    #[test]
    fn overlap_matches_pointwise_count(m in 2u64..200, a0 in 0u64..200, al in 0u64..200, b0 in 0u64..200, bl in 0u64..200) {
        let a = Arc { start: a0 % m, len: al % (m + 1) };
        let b = Arc { start: b0 % m, len: bl % (m + 1) };
        prop_assert_eq!(arc_overlap(a, b, m), overlap_by_counting(a, b, m));
    }

    #[test]
    fn defect_closed_form(m in 2u64..1_000_000, start in any::<u64>(), len in any::<u64>(), s in any::<u64>()) {
        let (start, len, s) = (start % m, 1 + len % (m - 1), s % m);
        let a = Arc { start, len };
        let measured = 2 * (len - arc_overlap(a, a.translate_back(s, m), m));
        let closed = 2 * s.min(len).min(m - len).min(m - s);
        prop_assert_eq!(measured, closed);
    }

    #[test]
    fn scaling_theta_scales_series(c in 0.01f64..100.0, k in 3usize..20) {
        let fam = wipcrit::make_preset(wipcrit::Preset::Ce1, k).unwrap().construction().unwrap();
        let scaled = fam.clone().scale_theta(c);
        let policy = VerdictPolicy::default();
        for (crit, power) in [(CriterionId::C1, 1), (CriterionId::C2, 2), (CriterionId::C4, 1), (CriterionId::L2, 2)] {
            let a = series_terms(crit, &fam, &policy).unwrap();
            let b = series_terms(crit, &scaled, &policy).unwrap();
            for (x, y) in a.terms.iter().zip(&b.terms) {
                let want = x * c.powi(power);
                prop_assert!((y - want).abs() <= 1e-12 * want.abs().max(1e-300));
            }
            prop_assert_eq!(a.verdict, b.verdict);
        }
    }

    #[test]
    fn zero_padding_keeps_verdict(terms in prop::collection::vec(0.0f64..10.0, 0..200), pad in 0usize..300) {
        let policy = VerdictPolicy::default();
        let mut padded = terms.clone();
        padded.extend(std::iter::repeat_n(0.0, pad));
        prop_assert_eq!(judge_terms(&terms, &policy).verdict, judge_terms(&padded, &policy).verdict);
    }

    #[test]
    fn partial_sums_monotone(terms in prop::collection::vec(0.0f64..1e6, 0..500)) {
        let s = partial_sums(&terms);
        prop_assert_eq!(s.len(), terms.len());
        prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn moments_merge_matches_single_pass(xs in prop::collection::vec(-1e3f64..1e3, 2..400), cut in 0usize..400) {
        let cut = cut % xs.len();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..cut].iter().for_each(|&x| a.push(x));
        xs[cut..].iter().for_each(|&x| b.push(x));
        let merged = a.merge(&b);
        prop_assert_eq!(merged.n, whole.n);
        prop_assert!((merged.mean() - whole.mean()).abs() <= 1e-9);
        prop_assert!((merged.variance() - whole.variance()).abs() <= 1e-6 * whole.variance().max(1.0));
    }
}

#[test]
fn execution_modes_are_bit_identical() {
    let fam =
        ParameterFamily::new("t", vec![1.5, 0.5], vec![0.25, 0.125], vec![1.0, 2.0], Some(vec![0.25, 0.3])).unwrap();
    let model = build_system(&fam, 16, 8).unwrap();
    let run = |exec| {
        let mc = MonteCarlo::new(StreamSeed::new(3, 9), 10_000, exec).unwrap();
        gordin_block(&model, &mc, 0, 2).unwrap()
    };
    assert_eq!(run(Execution::Parallel), run(Execution::Sequential));
}
