//! Invariants over random inputs.

use echofinder_core::classify::features::{circularity, eccentricity};
use echofinder_core::eval::{match_detections, sweep_thresholds};
use echofinder_core::mining::{balance_indices, crop_roi, label_rois};
use echofinder_core::roi::{channel_consensus, dilate, erode, morph_close, morph_open};
use echofinder_core::{iou, normalize_sv, BinaryMask, BoundingBox, Echogram, EchogramMeta, Grid, Label};
use proptest::prelude::*;

fn arb_box(max: u32) -> impl Strategy<Value = BoundingBox> {
    (0..max, 0..max, 1..max, 1..max).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h).unwrap())
}

fn arb_mask(max_side: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max_side, 1..=max_side)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<bool>(), w * h)))
        .prop_map(|(w, h, bits)| BinaryMask::new(w, h, bits).unwrap())
}

fn arb_grid(max_side: usize) -> impl Strategy<Value = Grid<f32>> {
    (1..=max_side, 1..=max_side)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(0.0f32..=1.0, w * h)))
        .prop_map(|(w, h, v)| Grid::new(w, h, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn iou_symmetric_bounded_translation_invariant(a in arb_box(200), b in arb_box(200), dx in 0u32..500, dy in 0u32..500) {
        let v = iou(&a, &b);
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(iou(&a, &a), 1.0);
        let shift = |r: &BoundingBox| BoundingBox::new(r.x + dx, r.y + dy, r.w, r.h).unwrap();
        prop_assert_eq!(v, iou(&shift(&a), &shift(&b)));
        prop_assert_eq!(v == 0.0, !a.overlaps(&b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn morphology_laws(m in arb_mask(24), r in 1usize..3) {
        let o = morph_open(&m, r).unwrap();
        let c = morph_close(&m, r).unwrap();
        prop_assert!(o.is_subset_of(&m));
        prop_assert!(m.is_subset_of(&c));
        prop_assert_eq!(morph_open(&o, r).unwrap(), o);
        prop_assert_eq!(morph_close(&c, r).unwrap(), c);
        prop_assert!(erode(&m, r).unwrap().is_subset_of(&m));
        prop_assert!(m.is_subset_of(&dilate(&m, r).unwrap()));
    }

    #[test]
    fn consensus_is_monotone_in_the_vote_count(
        masks in (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(
                proptest::collection::vec(any::<bool>(), w * h).prop_map(move |b| BinaryMask::new(w, h, b).unwrap()),
                1..5,
            )
        })
    ) {
        let n = masks.len();
        let mut prev = channel_consensus(&masks, 1).unwrap();
        for k in 2..=n {
            let cur = channel_consensus(&masks, k).unwrap();
            prop_assert!(cur.is_subset_of(&prev));
            prev = cur;
        }
        // Requiring every channel is the intersection.
        let all = BinaryMask::from_fn(masks[0].width(), masks[0].height(), |x, y| masks.iter().all(|m| m.get(x, y)));
        prop_assert_eq!(prev, all);
    }

    #[test]
    fn labels_monotone_in_tau(
        rois in proptest::collection::vec(arb_box(100), 0..12),
        gt in proptest::collection::vec(arb_box(100), 0..6),
        t1 in 0.0f64..=1.0,
        t2 in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = label_rois(&rois, &gt, lo);
        let b = label_rois(&rois, &gt, hi);
        for (x, y) in a.iter().zip(&b) {
            // Raising tau can only turn positives into negatives.
            prop_assert!(!(y.label.is_positive() && !x.label.is_positive()));
            prop_assert_eq!(x.best_iou, y.best_iou);
        }
    }

    #[test]
    fn balance_is_seeded_and_bounded(
        labels in proptest::collection::vec(any::<bool>().prop_map(Label::from_positive), 0..80),
        ratio in 0.0f64..4.0,
        seed in any::<u64>(),
    ) {
        let keep = balance_indices(&labels, ratio, seed);
        prop_assert_eq!(&keep, &balance_indices(&labels, ratio, seed));
        let pos = labels.iter().filter(|l| l.is_positive()).count();
        let neg = labels.len() - pos;
        let kept_pos = keep.iter().filter(|&&i| labels[i].is_positive()).count();
        prop_assert_eq!(kept_pos, pos);
        // Positives first, then negatives, each group in input order.
        prop_assert!(keep[..pos].iter().all(|&i| labels[i].is_positive()));
        prop_assert!(keep[..pos].windows(2).all(|w| w[0] < w[1]));
        prop_assert!(keep[pos..].windows(2).all(|w| w[0] < w[1]));
        let cap = (ratio * pos as f64).floor() as usize;
        prop_assert_eq!(keep.len() - kept_pos, neg.min(cap));
    }

    #[test]
    fn crops_stay_within_source_range(g in arb_grid(30), bx in (0u32..30, 0u32..30, 1u32..30, 1u32..30), size in 8usize..20) {
        let (x, y) = (bx.0 % g.width() as u32, bx.1 % g.height() as u32);
        let w = bx.2.min(g.width() as u32 - x);
        let h = bx.3.min(g.height() as u32 - y);
        let b = BoundingBox::new(x, y, w, h).unwrap();
        let crop = crop_roi(std::slice::from_ref(&g), &b, size).unwrap();
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        for yy in y..y + h {
            for xx in x..x + w {
                let v = g.get(xx as usize, yy as usize);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        prop_assert_eq!(crop.data.len(), size * size);
        for v in &crop.data {
            prop_assert!(*v >= lo - 1e-6 && *v <= hi + 1e-6);
        }
    }

    #[test]
    fn normalization_is_monotone_and_bounded(vals in proptest::collection::vec(-150.0f32..20.0, 2..40)) {
        let meta = EchogramMeta {
            frequencies_khz: vec![38.0],
            depth_min_m: 0.0,
            depth_max_m: 1.0,
            start_epoch_s: 0,
            duration_s: 1.0,
        };
        let e = Echogram::new(vals.len(), 1, meta, vals.clone()).unwrap();
        let n = normalize_sv(&e, -90.0, -30.0).unwrap();
        let out = n[0].as_slice();
        for i in 0..vals.len() {
            prop_assert!((0.0..=1.0).contains(&out[i]));
            for j in 0..vals.len() {
                if vals[i] <= vals[j] {
                    prop_assert!(out[i] <= out[j]);
                }
            }
        }
    }

    #[test]
    fn eccentricity_scale_invariant(w in 1u32..12, h in 1u32..12, k in 2u32..5) {
        let rect = |w: u32, h: u32| -> Vec<[u32; 2]> {
            (0..h).flat_map(|y| (0..w).map(move |x| [x, y])).collect()
        };
        let a = eccentricity(&rect(w, h));
        let b = eccentricity(&rect(w * k, h * k));
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        prop_assert!((0.0..1.0).contains(&a));
        prop_assert!(circularity(&rect(w, h)) <= 1.0);
    }

    #[test]
    fn matching_invariants(
        dets in proptest::collection::vec(arb_box(60), 0..10),
        gt in proptest::collection::vec(arb_box(60), 0..10),
        tau in 0.0f64..1.0,
        rot in 0usize..10,
    ) {
        let m = match_detections(&dets, &gt, tau);
        prop_assert_eq!(m.tp + m.fn_, gt.len());
        prop_assert_eq!(m.tp + m.fp, dets.len());
        for p in &m.pairs {
            prop_assert!(p.iou > tau);
        }
        // Input order does not change the counts.
        let mut d2 = dets.clone();
        let mut g2 = gt.clone();
        if !d2.is_empty() { let k = rot % d2.len(); d2.rotate_left(k); d2.reverse(); }
        if !g2.is_empty() { let k = rot % g2.len(); g2.rotate_left(k); }
        let m2 = match_detections(&d2, &g2, tau);
        prop_assert_eq!((m.tp, m.fp, m.fn_), (m2.tp, m2.fp, m2.fn_));
        let mut ious: Vec<f64> = m.pairs.iter().map(|p| p.iou).collect();
        let mut ious2: Vec<f64> = m2.pairs.iter().map(|p| p.iou).collect();
        ious.sort_by(f64::total_cmp);
        ious2.sort_by(f64::total_cmp);
        prop_assert_eq!(ious, ious2);
    }

    #[test]
    fn recall_non_increasing_over_sweep(
        dets in proptest::collection::vec(arb_box(60), 0..10),
        gt in proptest::collection::vec(arb_box(60), 1..10),
    ) {
        let taus = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 0.9];
        let rows = sweep_thresholds(&dets, &gt, &taus).unwrap();
        for w in rows.windows(2) {
            prop_assert!(w[1].recall <= w[0].recall);
            prop_assert!(w[1].precision <= w[0].precision);
        }
        for r in &rows {
            let f = if r.precision + r.recall > 0.0 { 2.0 * r.precision * r.recall / (r.precision + r.recall) } else { 0.0 };
            prop_assert!((r.f1 - f).abs() < 1e-9);
        }
    }
}
