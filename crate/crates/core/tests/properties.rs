use proptest::collection::vec;
use proptest::prelude::*;
use tlunet_core::compare::Histogram;
use tlunet_core::data::{build_splits, rle_decode, rle_encode, subsample_training, Flips, Fractions, Mask, MaskSet, RleString};
use tlunet_core::metrics::{aggregate, auc, dice, iou};
use tlunet_core::model::Prediction;
use tlunet_core::objective::{joint_loss, threshold, LossConfig, PixelReduction, Target};

fn mask_strategy(max: usize) -> impl Strategy<Value = Mask> {
    (1..=max, 1..=max).prop_flat_map(|(h, w)| vec(0u8..=1, h * w).prop_map(move |d| Mask::from_vec(h, w, d).unwrap()))
}

fn mask_pair(max: usize) -> impl Strategy<Value = (Mask, Mask)> {
    (1..=max, 1..=max).prop_flat_map(|(h, w)| {
        (vec(0u8..=1, h * w), vec(0u8..=1, h * w))
            .prop_map(move |(a, b)| (Mask::from_vec(h, w, a).unwrap(), Mask::from_vec(h, w, b).unwrap()))
    })
}

fn brute_auc(s: &[f64], l: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..s.len() {
        for j in 0..s.len() {
            if l[i] == 1 && l[j] == 0 {
                pairs += 1.0;
                wins += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

proptest! {
    #[test]
    fn rle_roundtrip_is_identity(m in mask_strategy(24)) {
        let rle = rle_encode(m.data(), m.height(), m.width()).unwrap();
        let back = rle_decode(&rle, m.height(), m.width()).unwrap();
        prop_assert_eq!(&back, &m);
        let text = rle.to_string();
        let parsed: RleString = text.parse().unwrap();
        prop_assert_eq!(&parsed, &rle);
        prop_assert_eq!(back.to_rle(), rle);
    }

    #[test]
    fn rle_runs_are_canonical(m in mask_strategy(24)) {
        let rle = m.to_rle();
        // Runs never touch: a gap of at least one pixel separates them.
        for w in rle.runs().windows(2) {
            prop_assert!(w[0].0 + w[0].1 < w[1].0);
        }
        prop_assert_eq!(rle.covered(), m.count());
    }

    #[test]
    fn dice_iou_invariants((x, y) in mask_pair(12)) {
        let d = dice(&x, &y).unwrap();
        let i = iou(&x, &y).unwrap();
        prop_assert_eq!(d, dice(&y, &x).unwrap());
        prop_assert_eq!(i, iou(&y, &x).unwrap());
        prop_assert!(0.0 <= i && i <= d && d <= 1.0);
        prop_assert!((i - d / (2.0 - d)).abs() < 1e-12);
    }

    #[test]
    fn auc_matches_pairs_and_ignores_monotone_maps(
        data in vec((0u32..20, 0u8..=1), 2..50)
    ) {
        let labels: Vec<u8> = data.iter().map(|d| d.1).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 20.0).collect();
        let a = auc(&scores, &labels).unwrap();
        prop_assert!((a - brute_auc(&scores, &labels)).abs() < 1e-12);
        let mapped: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 - 7.0 + s * s * s).collect();
        prop_assert!((auc(&mapped, &labels).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn loss_is_non_negative_decomposes_and_ignores_order(
        items in vec((vec(0.0f64..=1.0, 8), vec(0u8..=1, 8), vec(0.0f64..=1.0, 2)), 1..5),
        sum in any::<bool>(),
    ) {
        let reduction = if sum { PixelReduction::Sum } else { PixelReduction::Mean };
        let preds: Vec<Prediction<f64>> = items.iter().map(|(p, _, c)| Prediction {
            height: 2, width: 2, pixel_probs: p.clone(), class_probs: c.clone(),
        }).collect();
        let sets: Vec<MaskSet> = items.iter().map(|(_, m, _)| MaskSet::new(2, 2, vec![
            Mask::from_vec(2, 2, m[..4].to_vec()).unwrap(),
            Mask::from_vec(2, 2, m[4..].to_vec()).unwrap(),
        ]).unwrap()).collect();
        let labels: Vec<Vec<u8>> = items.iter().map(|(_, _, c)| c.iter().map(|&v| u8::from(v > 0.5)).collect()).collect();
        let targets: Vec<Target<'_>> = sets.iter().zip(&labels).map(|(m, l)| Target { masks: m, labels: l }).collect();

        let full = LossConfig { pixel_reduction: reduction, ..LossConfig::default() };
        let l = joint_loss(&preds, &targets, &full).unwrap();
        prop_assert!(l.total >= 0.0);
        let cls = joint_loss(&preds, &targets, &LossConfig { lambda_seg: 0.0, ..full }).unwrap();
        let seg = joint_loss(&preds, &targets, &LossConfig { lambda_cls: 0.0, ..full }).unwrap();
        prop_assert!((cls.total + seg.total - l.total).abs() <= 1e-9 * l.total.max(1.0));

        let rev_p: Vec<_> = preds.iter().rev().cloned().collect();
        let rev_t: Vec<_> = targets.iter().rev().copied().collect();
        let r = joint_loss(&rev_p, &rev_t, &full).unwrap();
        prop_assert!((r.total - l.total).abs() <= 1e-9 * l.total.max(1.0));
    }

    #[test]
    fn threshold_marks_at_or_above(probs in vec(0.0f64..=1.0, 1..40), t in 0.0f64..=1.0) {
        let m = threshold(&probs, t).unwrap();
        for (p, b) in probs.iter().zip(m) {
            prop_assert_eq!(b == 1, *p >= t);
        }
    }

    #[test]
    fn aggregate_bounds_are_ordered(v in vec(-5.0f64..5.0, 1..60)) {
        let a = aggregate(&v).unwrap();
        prop_assert!(a.min <= a.ci95.0 && a.ci95.0 <= a.ci75.0 && a.ci75.0 <= a.median);
        prop_assert!(a.median <= a.ci75.1 && a.ci75.1 <= a.ci95.1 && a.ci95.1 <= a.max);
        prop_assert!(a.min <= a.mean && a.mean <= a.max);
    }

    #[test]
    fn histogram_counts_every_delta(v in vec(-1.0f64..=1.0, 0..80)) {
        prop_assert_eq!(Histogram::of(&v).counts.iter().sum::<usize>(), v.len());
    }

    #[test]
    fn splits_partition_and_subsampling_keeps_eval_sets(n in 1usize..300, seed in any::<u64>(), frac in 0.05f64..=1.0) {
        let s = build_splits((0..n).collect::<Vec<_>>(), seed, Fractions::default()).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sub = subsample_training(&s, frac).unwrap();
        prop_assert_eq!(&sub.val, &s.val);
        prop_assert_eq!(&sub.test, &s.test);
        prop_assert!(sub.train.iter().all(|r| s.train.contains(r)));
    }

    #[test]
    fn flips_are_involutions(m in mask_strategy(10), h in any::<bool>(), v in any::<bool>()) {
        let f = Flips { horizontal: h, vertical: v };
        prop_assert_eq!(f.apply_mask(&f.apply_mask(&m)), m.clone());
        prop_assert_eq!(f.apply_mask(&m).count(), m.count());
    }
}
