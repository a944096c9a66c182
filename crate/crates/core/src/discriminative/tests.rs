use super::*;
use crate::corpus::{EntityTag, TokenSpan};
use proptest::prelude::*;
use rand::Rng;

fn example(tokens: &[&str], x: (usize, usize), y: (usize, usize), gold: Option<bool>) -> Example {
    Example {
        id: tokens.join("_"),
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        entity_tags: vec![EntityTag::None; tokens.len()],
        span_x: TokenSpan::new(x.0, x.1),
        span_y: TokenSpan::new(y.0, y.1),
        gold_label: gold.map(Label::from_bool),
        extra_features: Vec::new(),
    }
}

/// Independent enumerator: every contiguous run of 1..=3 items.
fn windows_oracle(prefix: &str, items: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..=(i + 3).min(items.len()) {
            out.push(format!("{prefix}:{}", items[i..j].join(" ")));
        }
    }
    out
}

#[test]
fn adjacent_spans_give_only_padded_grams() {
    let e = example(&["Ann", "Bob"], (0, 1), (1, 2), None);
    let f = extract_features(&e);
    let want: FeatureVector = [
        "between:<e1>",
        "between:<e2>",
        "between:<e1> <e2>",
        "left_x:<s>",
        "left_x:<e1>",
        "left_x:<s> <e1>",
        "right_y:<e2>",
        "right_y:</s>",
        "right_y:<e2> </s>",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    assert_eq!(f, want);
}

#[test]
fn between_trigram() {
    let e = example(&["X", "could", "produce", "a", "Y"], (0, 1), (4, 5), None);
    assert!(extract_features(&e).contains("between:could produce a"));
}

#[test]
fn extra_features_are_namespaced() {
    let mut e = example(&["a", "b"], (0, 1), (1, 2), None);
    e.extra_features = vec!["nsubj>wed<dobj".into()];
    assert!(extract_features(&e).contains("dep:nsubj>wed<dobj"));
}

fn random_example() -> impl Strategy<Value = Example> {
    (4usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::sample::select(vec!["a", "B", "c", "Dd", "e"]), n),
            prop::collection::vec(prop::sample::select(EntityTag::NAMED.to_vec()), n),
            prop::sample::subsequence((0..=n).collect::<Vec<_>>(), 4),
            any::<bool>(),
        )
            .prop_map(|(toks, tags, cuts, swap)| {
                // cuts are sorted: [a0, a1) and [b0, b1), widened to be non-empty
                let (a0, a1) = (cuts[0], cuts[1].max(cuts[0] + 1));
                let (b0, b1) = (cuts[2].max(a1), cuts[3].max(cuts[2].max(a1) + 1));
                let (x, y) = if swap { ((b0, b1), (a0, a1)) } else { ((a0, a1), (b0, b1)) };
                let mut e = example(&toks, x, y, None);
                e.entity_tags = tags;
                e
            })
            .prop_filter("spans fit", |e| e.validate().is_ok())
    })
}

proptest! {
    #[test]
    fn features_match_window_enumeration(e in random_example()) {
        let (a, b) = e.ordered_spans();
        let low: Vec<String> = e.tokens.iter().map(|t| t.to_lowercase()).collect();
        let mut want = BTreeSet::new();

        let mut between = vec!["<e1>".to_string()];
        between.extend(low[a.end..b.start].iter().cloned());
        between.push("<e2>".into());
        want.extend(windows_oracle("between", &between));

        let mut left: Vec<String> = Vec::new();
        if a.start <= 3 { left.push("<s>".into()); }
        left.extend(low[a.start.saturating_sub(3)..a.start].iter().cloned());
        left.push("<e1>".into());
        want.extend(windows_oracle("left_x", &left));

        let mut right = vec!["<e2>".to_string()];
        let end = (b.end + 3).min(low.len());
        right.extend(low[b.end..end].iter().cloned());
        if end == low.len() { right.push("</s>".into()); }
        want.extend(windows_oracle("right_y", &right));

        let tags: Vec<String> = e.entity_tags[a.end..b.start].iter().map(|t| t.name().to_string()).collect();
        want.extend(windows_oracle("tags", &tags));

        prop_assert_eq!(extract_features(&e), want);
    }

    #[test]
    fn gradient_matches_finite_differences(
        rows in prop::collection::vec(prop::collection::btree_set(0usize..5, 0..4), 1..6),
        w in prop::collection::vec(-1.0f64..1.0, 5),
        b in -1.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let rows: Vec<Vec<usize>> = rows.into_iter().map(|s| s.into_iter().collect()).collect();
        let mut rng = seed::rng(seed);
        let targets: Vec<f64> = rows.iter().map(|_| rng.gen::<f64>()).collect();
        let cw: Vec<f64> = rows.iter().map(|_| 1.0).collect();
        let l2 = 0.01;
        let (g, gb) = noise_aware_gradient(&w, b, &rows, &targets, &cw, l2);
        let h = 1e-6;
        let f = |w: &[f64], b: f64| noise_aware_objective(w, b, &rows, &targets, &cw, l2);
        for k in 0..w.len() {
            let mut up = w.clone();
            let mut down = w.clone();
            up[k] += h;
            down[k] -= h;
            let fd = (f(&up, b) - f(&down, b)) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() <= 1e-5 * fd.abs().max(1e-3), "{} vs {}", fd, g[k]);
        }
        let fd = (f(&w, b + h) - f(&w, b - h)) / (2.0 * h);
        prop_assert!((fd - gb).abs() <= 1e-5 * fd.abs().max(1e-3));
    }
}

#[test]
fn uninformative_labels_leave_model_at_zero() {
    let feats: Vec<FeatureVector> = ["a", "b", "c"]
        .iter()
        .map(|f| FeatureVector::from([f.to_string()]))
        .collect();
    let t = train_noise_aware(&feats, &[0.5, 0.5, 0.5], &TrainConfig::default()).unwrap();
    assert!(t.model.weights.is_empty());
    assert_eq!(t.model.bias, 0.0);
}

#[test]
fn separable_soft_labels_are_learned() {
    let mut examples = Vec::new();
    let mut marginals = Vec::new();
    for i in 0..40 {
        let pos = i % 2 == 0;
        let cue = if pos { "wed" } else { "met" };
        let filler = ["the", "a", "some", "one"][i % 4];
        examples.push(example(&["X", filler, cue, "Y"], (0, 1), (3, 4), Some(pos)));
        marginals.push(if pos { 0.95 } else { 0.05 });
    }
    let feats = extract_all(&examples);
    let t = train_noise_aware(&feats, &marginals, &TrainConfig::default()).unwrap();
    let m = evaluate_model(&t.model, &examples).unwrap();
    assert!(m.f1 >= 0.95, "{m:?}");
    for pair in t.history.windows(2) {
        assert!(pair[1] <= pair[0]);
    }
}

#[test]
fn training_rejects_bad_input() {
    let cfg = TrainConfig::default();
    assert!(train_noise_aware(&[], &[], &cfg).is_err());
    assert!(train_noise_aware(&[FeatureVector::new()], &[0.5, 0.5], &cfg).is_err());
    assert!(train_noise_aware(&[FeatureVector::new()], &[1.5], &cfg).is_err());
}

#[test]
fn subsampling_is_seeded() {
    let feats: Vec<FeatureVector> = (0..20).map(|i| FeatureVector::from([format!("f{}", i % 3)])).collect();
    let p: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 0.9 } else { 0.1 }).collect();
    let cfg = TrainConfig {
        subsample: Some(0.3),
        epochs: 20,
        ..Default::default()
    };
    let a = train_noise_aware(&feats, &p, &cfg).unwrap();
    let b = train_noise_aware(&feats, &p, &cfg).unwrap();
    assert_eq!(a, b);
    let full = train_noise_aware(&feats, &p, &TrainConfig { epochs: 20, ..Default::default() }).unwrap();
    assert_ne!(a.model, full.model);
}

#[test]
fn prediction_by_hand() {
    assert_eq!(predict(&LinearModel::zero(), &FeatureVector::new()), 0.5);
    let model = LinearModel {
        weights: BTreeMap::from([("a".into(), 0.5), ("b".into(), -1.25), ("c".into(), 2.0)]),
        bias: -0.25,
        threshold: 0.5,
    };
    let fv = FeatureVector::from(["a".to_string(), "b".to_string(), "c".to_string(), "zz".to_string()]);
    let want = 1.0 / (1.0 + (-(0.5 - 1.25 + 2.0 - 0.25f64)).exp());
    assert!((predict(&model, &fv) - want).abs() < 1e-15);
    let less = FeatureVector::from(["b".to_string(), "c".to_string()]);
    assert!(predict(&model, &less) < predict(&model, &fv) || model.weights["a"] <= 0.0);
}

#[test]
fn metrics_by_hand() {
    let m = Metrics::from_counts(3, 1, 2);
    assert!((m.precision - 0.75).abs() < 1e-15);
    assert!((m.recall - 0.6).abs() < 1e-15);
    assert!((m.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-15);
    assert_eq!(Metrics::from_counts(0, 0, 4).f1, 0.0);
}

#[test]
fn evaluate_conventions() {
    let ex = vec![
        example(&["a", "b"], (0, 1), (1, 2), Some(true)),
        example(&["c", "d"], (0, 1), (1, 2), Some(false)),
    ];
    let perfect = evaluate(&[0.9, 0.1], &ex, 0.5).unwrap();
    assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
    let none = evaluate(&[0.1, 0.1], &ex, 0.5).unwrap();
    assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
    // exactly at the threshold is negative
    assert_eq!(evaluate(&[0.5, 0.5], &ex, 0.5).unwrap().tp, 0);
    assert!(evaluate(&[], &[], 0.5).is_err());
    let mut unlabeled = ex.clone();
    unlabeled[0].gold_label = None;
    assert!(evaluate(&[0.9, 0.1], &unlabeled, 0.5).is_err());
}
