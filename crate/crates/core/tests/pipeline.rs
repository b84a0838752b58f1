use verge_core::dataset::FeatureTable;
use verge_core::features::FeatureSubset;
use verge_core::forest::Classifier;
use verge_core::pipeline::{predict_table, synth_participants, table_for, train_from_table, DepthChoice, WindowOptions};

/// Mann-Whitney estimate of P(score of a positive > score of a negative).
fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn synth_table() -> FeatureTable {
    let recs = synth_participants(2, 11, 60_000.0).unwrap();
    table_for(&recs, &WindowOptions::new(1000.0, 4.0)).unwrap()
}

#[test]
fn disparity_sd_separates_classes() {
    let t = synth_table();
    let col = t.columns(&["pair_disparity_sd".to_string()]).unwrap()[0];
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for r in t.usable() {
        match r.label.as_deref() {
            Some("InternalThought") => pos.push(r.values[col]),
            _ => neg.push(r.values[col]),
        }
    }
    assert!(pos.len() > 20 && neg.len() > 20);
    let a = auc(&pos, &neg);
    assert!(a > 0.95, "{a}");
}

#[test]
fn train_predict_roundtrip() {
    let t = synth_table();
    let model = train_from_table(&t, FeatureSubset::Vergence, 20, 4, &DepthChoice::Fixed(Some(8))).unwrap();
    let reloaded = verge_core::forest::ForestModel::from_json(&model.to_json().unwrap()).unwrap();
    let a = predict_table(&model, &t).unwrap();
    let b = predict_table(&reloaded, &t).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), t.rows.len());
    let row = t.subset(FeatureSubset::Vergence).unwrap().rows[0].values.clone();
    assert_eq!(model.predict(&row).unwrap(), a[0]);
}

#[test]
fn table_csv_roundtrip() {
    let t = synth_table();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let back = FeatureTable::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.feature_names, t.feature_names);
    assert_eq!(back.rows.len(), t.rows.len());
    for (x, y) in back.rows.iter().zip(&t.rows) {
        assert_eq!(x.label, y.label);
        for (u, v) in x.values.iter().zip(&y.values) {
            assert!(u == v || (u.is_nan() && v.is_nan()));
        }
    }
}
