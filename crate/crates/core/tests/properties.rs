mod common;

use planguide::analysis::{plan_adherence, uniqueness};
use planguide::plans::{sample_distractor, validate_indices, ContentPlan, PlanRecord, Provenance};
use planguide::reranker::{kendall_tau, length_normalized, margin_loss};
use planguide::seq2seq::decode::nucleus;
use planguide::synth::SynthConfig;
use proptest::prelude::*;

fn plan(v: Vec<usize>) -> ContentPlan {
    ContentPlan::new(v, Provenance::Generated)
}

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, 1..10)
}

proptest! {
    #[test]
    fn plans_are_sorted_sets(v in prop::collection::vec(0usize..30, 0..12)) {
        let p = plan(v.clone());
        prop_assert!(p.edu_indices.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(v.iter().all(|i| p.contains(*i)));
        prop_assert!(p.validate(30).is_ok());
        let back = PlanRecord::new("d", &p, Some(3)).plan();
        prop_assert_eq!(back.edu_indices, p.edu_indices);
    }

    #[test]
    fn unsorted_or_out_of_range_indices_are_rejected(v in prop::collection::vec(0usize..10, 2..8)) {
        let sorted = v.windows(2).all(|w| w[0] < w[1]);
        prop_assert_eq!(validate_indices(&v, 10).is_ok(), sorted);
        let mut far = v.clone();
        far.push(10);
        prop_assert!(validate_indices(&far, 10).is_err());
    }

    #[test]
    fn margin_loss_ignores_a_common_shift(s in scores(), shift in -50.0f64..50.0, m in 0.0f64..1.0) {
        let moved: Vec<f64> = s.iter().map(|x| x + shift).collect();
        prop_assert!((margin_loss(&s, m) - margin_loss(&moved, m)).abs() < 1e-9);
        prop_assert!(margin_loss(&s, m) >= 0.0);
    }

    #[test]
    fn margin_loss_vanishes_on_well_separated_scores(n in 1usize..10, m in 0.0f64..1.0, gap in 0.0f64..1.0) {
        let s: Vec<f64> = (0..n).map(|i| -(i as f64) * (m + gap)).collect();
        prop_assert_eq!(margin_loss(&s, m), 0.0);
    }

    #[test]
    fn length_normalization_at_alpha_one_is_the_mean(lp in prop::collection::vec(-10.0f64..0.0, 1..20)) {
        let mean = lp.iter().sum::<f64>() / lp.len() as f64;
        prop_assert!((length_normalized(&lp, 1.0).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn tau_is_bounded_and_reflexive(pairs in prop::collection::vec((-5i32..5, -5i32..5), 2..12)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        if let Some(t) = kendall_tau(&a, &b) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&t));
            let flipped: Vec<f64> = b.iter().map(|x| -x).collect();
            prop_assert!((kendall_tau(&a, &flipped).unwrap() + t).abs() < 1e-12);
        }
        if let Some(t) = kendall_tau(&a, &a) {
            prop_assert!((t - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniqueness_ignores_order_and_counts_sets(
        plans in prop::collection::vec(prop::collection::vec(0usize..6, 0..4), 1..16),
        rot in 0usize..16,
    ) {
        let ps: Vec<ContentPlan> = plans.into_iter().map(plan).collect();
        let u = uniqueness(&ps);
        prop_assert!(u >= 1 && u <= ps.len());
        let mut turned = ps.clone();
        turned.rotate_left(rot % ps.len());
        turned.reverse();
        prop_assert_eq!(uniqueness(&turned), u);
        let mut doubled = ps.clone();
        doubled.extend(ps.iter().cloned());
        prop_assert_eq!(uniqueness(&doubled), u);
    }

    #[test]
    fn adherence_is_bounded_and_symmetric(
        e in prop::collection::vec(0usize..10, 0..6),
        d in prop::collection::vec(0usize..10, 0..6),
    ) {
        let (e, d) = (plan(e), plan(d));
        let a = plan_adherence(&e, &d);
        for v in [a.recall, a.precision, a.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let b = plan_adherence(&d, &e);
        prop_assert_eq!((a.recall, a.precision, a.f1), (b.precision, b.recall, b.f1));
        if !e.is_empty() {
            prop_assert_eq!(plan_adherence(&e, &e).f1, 1.0);
        }
    }

    #[test]
    fn nucleus_is_a_minimal_prefix(w in prop::collection::vec(0.0f64..1.0, 1..12), p in 0.05f64..1.0) {
        let z: f64 = w.iter().sum();
        prop_assume!(z > 0.0);
        let probs: Vec<f64> = w.iter().map(|x| x / z).collect();
        let kept = nucleus(&probs, p);
        let mass: f64 = kept.iter().map(|(i, _)| probs[*i]).sum();
        let renorm: f64 = kept.iter().map(|(_, q)| q).sum();
        prop_assert!((renorm - 1.0).abs() < 1e-9);
        prop_assert!(mass >= p - 1e-9 || kept.len() == probs.iter().filter(|&&q| q > 0.0).count());
        let without_last = mass - probs[kept.last().unwrap().0];
        prop_assert!(without_last < p);
    }
}

#[test]
fn distractors_avoid_the_oracle() {
    let docs = common::synth_docs(&SynthConfig { docs: 30, seed: 9, ..Default::default() });
    for (i, doc) in docs.iter().enumerate() {
        let oracle = planguide::plans::greedy_oracle(doc, &doc.reference_tokens().unwrap(), 20).unwrap();
        let distractor = sample_distractor(doc, &oracle, i as u64);
        assert!(distractor.edu_indices.iter().all(|j| !oracle.contains(*j)));
        assert_eq!(distractor.len(), oracle.len().min(doc.num_edus() - oracle.len()));
        assert_eq!(distractor, sample_distractor(doc, &oracle, i as u64));
    }
}
