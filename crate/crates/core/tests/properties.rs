mod support;

use good_core::analysis::{parse_table, render_table, size_histogram, TableLayout, DEFAULT_SIZE_EDGES};
use good_core::dataset::{ClassSplit, Dataset, GroundTruthAnnotation, ImageInfo};
use good_core::ensemble::{greedy_order, top_one, utility, SourceCandidate, TopOne};
use good_core::eval::{evaluate, EvalConfig};
use good_core::pseudolabel::{filter_against_gt, merge_sources, top_k};
use good_core::{BBox, Proposal, PseudoBox, SizeClass};
use proptest::prelude::*;
use support::oracle::naive_iou;

fn arb_box() -> impl Strategy<Value = BBox> {
    (0.0f64..500.0, 0.0f64..500.0, 0.0f64..300.0, 0.0f64..300.0)
        .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
}

fn arb_proposals(max: usize) -> impl Strategy<Value = Vec<Proposal>> {
    prop::collection::vec((1u64..4, arb_box(), 0u32..=10), 0..max).prop_map(|v| {
        v.into_iter()
            .map(|(img, b, s)| Proposal::with_score(img, b, s as f64 / 10.0, "p").unwrap())
            .collect()
    })
}

fn arb_pseudo(max: usize, source: &'static str) -> impl Strategy<Value = Vec<PseudoBox>> {
    prop::collection::vec((1u64..4, arb_box(), 1u32..=10), 0..max).prop_map(move |v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (img, b, s))| PseudoBox {
                pseudo_id: i as u64 + 1,
                image_id: img,
                bbox: b,
                objectness: s as f64 / 10.0,
                source: source.into(),
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        let (ab, ba) = (a.iou(&b), b.iou(&a));
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - naive_iou(&a, &b)).abs() < 1e-12);
        if a.area() > 0.0 {
            prop_assert!((a.iou(&a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn iou_invariant_under_translation_and_scale(
        a in arb_box(), b in arb_box(), dx in -100.0f64..100.0, dy in -100.0f64..100.0, s in 0.1f64..10.0,
    ) {
        let base = a.iou(&b);
        prop_assert!((a.translate(dx, dy).iou(&b.translate(dx, dy)) - base).abs() < 1e-9);
        prop_assert!((a.scale(s).iou(&b.scale(s)) - base).abs() < 1e-9);
    }

    #[test]
    fn size_class_follows_area(w in 0.0f64..200.0, h in 0.0f64..200.0) {
        let b = BBox::new(0.0, 0.0, w, h).unwrap();
        let want = if w * h < 1024.0 {
            SizeClass::Small
        } else if w * h < 9216.0 {
            SizeClass::Medium
        } else {
            SizeClass::Large
        };
        prop_assert_eq!(b.size_class(), want);
    }

    #[test]
    fn filtered_proposals_clear_gt(props in arb_proposals(30), gts in prop::collection::vec((1u64..4, arb_box()), 0..6)) {
        let base: Vec<GroundTruthAnnotation> = gts
            .iter()
            .enumerate()
            .map(|(i, &(img, b))| GroundTruthAnnotation {
                annotation_id: i as u64 + 1, image_id: img, category_id: 1, bbox: b, is_crowd: false,
            })
            .collect();
        let kept = filter_against_gt(&props, &base, 0.5);
        for p in &kept {
            for g in base.iter().filter(|g| g.image_id == p.image_id) {
                prop_assert!(p.bbox.iou(&g.bbox) <= 0.5);
            }
        }
        // dropped proposals each overlap some GT above the threshold
        let dropped = props.len() - kept.len();
        let overlapping = props
            .iter()
            .filter(|p| base.iter().any(|g| g.image_id == p.image_id && p.bbox.iou(&g.bbox) > 0.5))
            .count();
        prop_assert_eq!(dropped, overlapping);
    }

    #[test]
    fn top_k_keeps_the_best_per_image(props in arb_proposals(30), k in 0usize..6) {
        let top = top_k(&props, k);
        for img in 1u64..4 {
            let kept: Vec<&PseudoBox> = top.iter().filter(|p| p.image_id == img).collect();
            let positive = props.iter().filter(|p| p.image_id == img && p.objectness > 0.0).count();
            prop_assert_eq!(kept.len(), positive.min(k));
            prop_assert!(kept.windows(2).all(|w| w[0].objectness >= w[1].objectness));
            if let Some(worst) = kept.last() {
                let better_dropped = props
                    .iter()
                    .filter(|p| p.image_id == img && p.objectness > worst.objectness)
                    .count();
                prop_assert!(better_dropped <= kept.len());
            }
        }
        let ids: Vec<u64> = top.iter().map(|p| p.pseudo_id).collect();
        prop_assert_eq!(ids, (1..=top.len() as u64).collect::<Vec<_>>());
        prop_assert!(top.windows(2).all(|w| w[0].image_id <= w[1].image_id));
    }

    #[test]
    fn top_k_is_monotone_in_k(props in arb_proposals(30), k in 0usize..6) {
        let small = top_k(&props, k);
        let large = top_k(&props, k + 1);
        prop_assert!(small.len() <= large.len());
        for p in &small {
            prop_assert!(large.iter().any(|q| q.image_id == p.image_id && q.bbox == p.bbox));
        }
    }

    #[test]
    fn merge_keeps_boxes_apart(a in arb_pseudo(20, "a"), b in arb_pseudo(20, "b"), t in 0.1f64..0.9) {
        let inputs = vec![("a".to_string(), a.clone()), ("b".to_string(), b.clone())];
        let merged = merge_sources(&inputs, t);
        prop_assert!(merged.len() <= a.len() + b.len());
        for (i, p) in merged.iter().enumerate() {
            for q in &merged[i + 1..] {
                if p.image_id == q.image_id {
                    prop_assert!(p.bbox.iou(&q.bbox) <= t);
                }
            }
        }
        // merging a merge changes nothing but ids
        let again = merge_sources(&[("m".to_string(), merged.clone())], t);
        prop_assert_eq!(again, merged.clone());
        // every input box is within the threshold of some kept box
        for p in a.iter().chain(&b) {
            prop_assert!(merged.iter().any(|m| m.image_id == p.image_id && (m.bbox == p.bbox || m.bbox.iou(&p.bbox) > t)));
        }
        let ids: Vec<u64> = merged.iter().map(|p| p.pseudo_id).collect();
        prop_assert_eq!(ids, (1..=merged.len() as u64).collect::<Vec<_>>());
    }

    #[test]
    fn greedy_order_is_a_permutation(
        utils in prop::collection::vec(-0.2f64..0.2, 1..6),
        tops in prop::collection::vec(prop::collection::btree_map(1u64..6, 0u32..4, 0..5), 6),
    ) {
        let cands: Vec<SourceCandidate> = utils
            .iter()
            .enumerate()
            .map(|(i, &u)| SourceCandidate {
                source: format!("s{i}"),
                top1: tops[i].iter().map(|(&img, &x)| (img, BBox::new(x as f64 * 20.0, 0.0, x as f64 * 20.0 + 15.0, 15.0).unwrap())).collect(),
                utility: u,
            })
            .collect();
        let order = greedy_order(&cands, 0.5);
        let mut names: Vec<String> = order.iter().map(|s| s.source.clone()).collect();
        names.sort();
        let mut want: Vec<String> = cands.iter().map(|c| c.source.clone()).collect();
        want.sort();
        prop_assert_eq!(names, want);
        let max_u = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(order[0].utility, max_u);
        prop_assert_eq!(order[0].uniqueness, 1.0);
    }

    #[test]
    fn histogram_conserves_boxes(boxes in arb_pseudo(40, "h")) {
        let h = size_histogram("h", &boxes, &DEFAULT_SIZE_EDGES).unwrap();
        prop_assert_eq!(h.total(), boxes.len() as u64);
    }
}

#[test]
fn duplicate_source_adds_nothing() {
    let top: TopOne = [(1, BBox::new(0., 0., 10., 10.).unwrap()), (2, BBox::new(5., 5., 30., 30.).unwrap())].into();
    let cands = vec![
        SourceCandidate { source: "depth".into(), top1: top.clone(), utility: 0.05 },
        SourceCandidate { source: "depth_copy".into(), top1: top, utility: 0.05 },
    ];
    let order = greedy_order(&cands, 0.5);
    assert_eq!(order[0].source, "depth");
    assert_eq!(order[1].uniqueness, 0.0);
    assert_eq!(order[1].score, 0.0);
}

#[test]
fn top_one_picks_the_highest_per_image() {
    let mk = |img, x: f64, o| PseudoBox {
        pseudo_id: 0,
        image_id: img,
        bbox: BBox::new(x, 0., x + 5., 5.).unwrap(),
        objectness: o,
        source: "s".into(),
    };
    let t = top_one(&[mk(1, 0., 0.2), mk(1, 10., 0.8), mk(2, 20., 0.5), mk(1, 30., 0.8)]);
    assert_eq!(t.len(), 2);
    assert_eq!(t[&1].x1, 10.0);
}

fn report_with(ar_novel_hit: bool, name: &str) -> good_core::EvalReport {
    let tax = good_core::Taxonomy::new(vec![
        good_core::Category { id: 1, name: "a".into(), supercategory: "x".into() },
        good_core::Category { id: 2, name: "b".into(), supercategory: "y".into() },
    ])
    .unwrap();
    let img = ImageInfo { id: 1, width: 300., height: 300., file_name: String::new() };
    let anns = vec![
        GroundTruthAnnotation { annotation_id: 1, image_id: 1, category_id: 1, bbox: BBox::new(0., 0., 50., 50.).unwrap(), is_crowd: false },
        GroundTruthAnnotation { annotation_id: 2, image_id: 1, category_id: 2, bbox: BBox::new(100., 100., 250., 250.).unwrap(), is_crowd: false },
    ];
    let ds = Dataset::new(tax, vec![img], anns).unwrap();
    let split = ClassSplit::from_base("s", &ds.taxonomy, [1].into()).unwrap();
    let mut dets = vec![good_core::Detection::new(1, BBox::new(0., 0., 50., 50.).unwrap(), 0.9).unwrap()];
    if ar_novel_hit {
        dets.push(good_core::Detection::new(1, BBox::new(100., 100., 250., 250.).unwrap(), 0.5).unwrap());
    }
    evaluate(&dets, &ds, &split, &EvalConfig::default(), name).unwrap()
}

#[test]
fn utility_is_a_difference_of_novel_ar() {
    let (hit, miss) = (report_with(true, "hold"), report_with(false, "hold"));
    assert_eq!(utility(&hit, &miss).unwrap(), 1.0);
    assert_eq!(utility(&miss, &hit).unwrap(), -1.0);
    assert_eq!(utility(&hit, &hit).unwrap(), 0.0);
    let mut other = miss.clone();
    other.ar_novel = 0.33;
    let mut mine = hit.clone();
    mine.ar_novel = 0.39;
    assert!((utility(&mine, &other).unwrap() - 0.06).abs() < 1e-12);
    assert!(utility(&hit, &report_with(false, "elsewhere")).is_err());
}

#[test]
fn rendered_table_round_trips() {
    let (hit, miss) = (report_with(true, "d"), report_with(false, "d"));
    let rows = vec![("base".to_string(), &miss), ("pseudo".to_string(), &hit)];
    let text = render_table(&rows, &TableLayout::default()).unwrap();
    let parsed = parse_table(&text).unwrap();
    assert_eq!(parsed.len(), 2);
    assert_eq!(parsed[0].0, "base");
    assert_eq!(parsed[1].1[1], 100.0);
    assert!(text.contains("**100.0**"));
    let widths: Vec<usize> = text.lines().map(str::len).collect();
    assert!(widths.windows(2).all(|w| w[0] == w[1]), "{text}");
}

#[test]
fn table_rejects_mixed_configs() {
    let a = report_with(true, "d");
    let mut b = report_with(false, "d");
    b.config.budget = 10;
    let rows = vec![("a".to_string(), &a), ("b".to_string(), &b)];
    assert!(render_table(&rows, &TableLayout::default()).is_err());
}
