use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use procmatch::calibrator::{lstm_forward, CalibratorParams, FeatureScaling, FeatureVector, HeadLayout, NetworkShape};
use procmatch::io::{
    history_from_jsonl, history_to_jsonl, load_calibrator, load_task_bundle, matrix_from_csv, matrix_to_csv,
    save_calibrator, save_task_bundle, schema_from_json, schema_to_json, BundleMeta, TaskBundle,
};
use procmatch::matchers::{slm_threshold, SimilarityMatrix};
use procmatch::model::{Attribute, DecisionHistory, DecisionRecord, Schema};
use procmatch::Error;
use proptest::prelude::*;

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/purchase-order-mini")
}

#[test]
fn fixture_bundle_loads() {
    let b = load_task_bundle(&fixture()).unwrap();
    assert_eq!((b.rows(), b.cols()), (3, 4));
    let names: Vec<&str> = b.schema_b.attributes.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, ["poDay", "poTime", "poCode", "city"]);
    assert_eq!(b.schema_a.attributes[0].path, ["PO2", "Order_Details", "orderDate"]);
    assert_eq!(b.histories.len(), 1);
    assert_eq!(b.histories["example"].len(), 5);
    let alg = slm_threshold(b.algorithmic.as_ref().unwrap(), 0.1).unwrap();
    let labels: Vec<String> = alg.pairs().map(|p| p.label()).collect();
    assert_eq!(labels, ["M11", "M12", "M13", "M14", "M31", "M32", "M34"]);
}

#[test]
fn bundle_round_trips_through_disk() {
    let original = load_task_bundle(&fixture()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_task_bundle(dir.path(), &original).unwrap();
    assert_eq!(load_task_bundle(dir.path()).unwrap(), original);
}

#[test]
fn missing_members_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture().join("schema_a.json"), dir.path().join("schema_a.json")).unwrap();
    match load_task_bundle(dir.path()) {
        Err(Error::IncompleteBundle { missing, .. }) => assert_eq!(missing, ["schema_b.json", "meta.json"]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bundle_rejects_out_of_grid_history() {
    let mut b = load_task_bundle(&fixture()).unwrap();
    b.histories.insert("bad".into(), DecisionHistory::new(vec![DecisionRecord::new(3, 0, 0.5, 1.0)]));
    let dir = tempfile::tempdir().unwrap();
    assert!(save_task_bundle(dir.path(), &b).is_err());
}

#[test]
fn minimal_bundle_without_optional_members() {
    let b = TaskBundle {
        meta: BundleMeta { name: "bare".into(), version: "1".into(), ref_size: Some(2) },
        schema_a: Schema::flat("A", &["x", "y"]).unwrap(),
        schema_b: Schema::flat("B", &["u", "v", "w"]).unwrap(),
        reference: None,
        algorithmic: None,
        histories: BTreeMap::new(),
    };
    let dir = tempfile::tempdir().unwrap();
    save_task_bundle(dir.path(), &b).unwrap();
    let back = load_task_bundle(dir.path()).unwrap();
    assert_eq!(back, b);
    assert_eq!(back.ref_size(), 2);
}

#[test]
fn calibrator_artifact_round_trips_bit_exactly() {
    let mut params = CalibratorParams::init(NetworkShape { input: 4, hidden: 7, dense: 9 }, HeadLayout::Separate, 4);
    params.scaling = FeatureScaling { delta_min: 0.123456789, delta_max: 31.4159 };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_calibrator(&path, &params).unwrap();
    let back = load_calibrator(&path).unwrap();
    assert_eq!(back, params);
    let f = [FeatureVector { c: 0.4, delta_t: 3.0, a_e: 0.2, m_tilde: 0.9 }];
    assert_eq!(lstm_forward(&back, &f).unwrap(), lstm_forward(&params, &f).unwrap());
}

fn arb_history() -> impl Strategy<Value = DecisionHistory> {
    prop::collection::vec((0usize..50, 0usize..50, 0.0f64..=1.0, 1e-6f64..1e3), 0..30).prop_map(|v| {
        let mut t = 0.0;
        v.into_iter()
            .map(|(r, c, conf, gap)| {
                t += gap;
                DecisionRecord::new(r, c, conf, t)
            })
            .collect()
    })
}

fn arb_schema() -> impl Strategy<Value = Schema> {
    prop::collection::vec(("[a-z]{1,3}", "[a-zA-Z_]{1,8}", prop::option::of("[a-z]{3,6}")), 1..8).prop_map(|leaves| {
        let attrs = leaves
            .into_iter()
            .enumerate()
            .map(|(id, (group, name, datatype))| {
                let mut a = Attribute::new(id, name.clone(), vec!["Root".into(), format!("G{group}"), name]);
                a.datatype = datatype;
                a
            })
            .collect::<Vec<_>>();
        // Leaves are re-read grouped by parent, so keep each group contiguous.
        let mut attrs = attrs;
        attrs.sort_by(|a, b| a.path[1].cmp(&b.path[1]));
        for (id, a) in attrs.iter_mut().enumerate() {
            a.id = id;
        }
        Schema::new("Root", attrs).unwrap()
    })
}

proptest! {
    #[test]
    fn history_jsonl_round_trip(h in arb_history()) {
        let text = history_to_jsonl(&h).unwrap();
        prop_assert_eq!(history_from_jsonl(&text, Path::new("h.jsonl")).unwrap(), h);
    }

    #[test]
    fn matrix_csv_round_trip((rows, cols, values) in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        (Just(r), Just(c), prop::collection::vec(0.0f64..=1.0, r * c))
    })) {
        let m = SimilarityMatrix::new(rows, cols, values).unwrap();
        prop_assert_eq!(matrix_from_csv(&matrix_to_csv(&m), Path::new("m.csv")).unwrap(), m);
    }

    #[test]
    fn schema_json_round_trip(s in arb_schema()) {
        let text = schema_to_json(&s).unwrap();
        prop_assert_eq!(schema_from_json(&text, Path::new("s.json")).unwrap(), s);
    }
}
