use mortrisk::cohort::{generate_synthetic_cohort, record_to_map, GeneratorConfig};
use mortrisk::explain::{explain_record, ExplainMode, ExplainRequest};
use mortrisk::models::{load_model, save_model, Family, Hyperparams, TrainedModel, FORMAT_VERSION};
use mortrisk::pipeline::{train_artifact, TrainOptions};
use mortrisk::Error;

fn quick_options(family: Family) -> TrainOptions {
    let h: Hyperparams = match family {
        Family::Lr => [("lambda", 5.0)].into_iter(),
        Family::Dt => [("max_depth", 4.0)].into_iter(),
        Family::Rf => [("n_trees", 10.0)].into_iter(),
        Family::Knn => [("k", 16.0)].into_iter(),
        Family::Mlp => [("epochs", 5.0)].into_iter(),
    }
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let mut o = TrainOptions::new(family);
    o.hyperparameters = Some(h);
    o.seed = 4;
    o
}

#[test]
fn every_family_survives_save_and_load() {
    let t = generate_synthetic_cohort(&GeneratorConfig {
        n: 500,
        seed: 21,
        prevalence: 0.15,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    for family in Family::ALL {
        let out = train_artifact(&t, &quick_options(family)).unwrap();
        let path = dir.path().join(format!("{}.json", family.tag()));
        save_model(&out.model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, out.model, "{family}");
        for rec in t.records.iter().take(20) {
            let a = out.model.predict_proba(rec).unwrap();
            let b = back.predict_proba(rec).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "{family}");
            assert!((0.0..=1.0).contains(&a));
        }
        // Saving the loaded model reproduces the file byte for byte.
        let again = dir.path().join("again.json");
        save_model(&back, &again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn explanations_are_consistent_with_predictions() {
    let t = generate_synthetic_cohort(&GeneratorConfig {
        n: 500,
        seed: 22,
        prevalence: 0.15,
        ..Default::default()
    })
    .unwrap();
    let w = t.schema.index_of("weight").unwrap();
    let rec = t.records.iter().find(|r| r.number(w).is_some()).unwrap();
    for family in Family::ALL {
        let model = train_artifact(&t, &quick_options(family)).unwrap().model;
        let req = ExplainRequest {
            n_permutations: Some(16),
            ..ExplainRequest::default()
        };
        let e = explain_record(&model, rec, &req).unwrap();
        let p = model.predict_proba(rec).unwrap();
        assert_eq!(e.prediction.to_bits(), p.to_bits());
        assert_eq!(e.force.arrows.len(), 25);
        let expected_mode = match family {
            Family::Dt | Family::Rf => ExplainMode::Tree,
            _ => ExplainMode::Sampled,
        };
        assert_eq!(e.force.mode, expected_mode);
        assert!((e.force.base + e.force.phi_sum() - p).abs() <= 1e-9, "{family}");
        assert_eq!(e.decision_path.is_some(), family == Family::Dt);
        if family == Family::Knn {
            let n = e.neighbors.unwrap();
            assert_eq!(n.neighbors.len(), 16);
            assert_eq!(n.positives + n.negatives, 16);
        }
        // Raw values echo the record, categories by label.
        let map = record_to_map(&t.schema, rec);
        let unit = e.force.arrows.iter().find(|a| a.feature == "service_unit").unwrap();
        assert_eq!(unit.raw_value, map["service_unit"]);
    }
}

#[test]
fn exact_mode_on_25_players_is_refused() {
    let t = generate_synthetic_cohort(&GeneratorConfig {
        n: 300,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let model = train_artifact(&t, &quick_options(Family::Lr)).unwrap().model;
    let mut t = t;
    t.records[0] = t.records.iter().find(|r| !r.values.iter().any(|v| v.is_missing())).unwrap().clone();
    let req = ExplainRequest {
        mode: Some(ExplainMode::Exact),
        ..ExplainRequest::default()
    };
    assert!(matches!(
        explain_record(&model, &t.records[0], &req).map(|_| ()),
        Err(Error::TooManyPlayers { players: 25, max: 20 })
    ));
}

#[test]
fn unknown_format_version_is_rejected() {
    let t = generate_synthetic_cohort(&GeneratorConfig {
        n: 300,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let model = train_artifact(&t, &quick_options(Family::Dt)).unwrap().model;
    let text = model
        .to_json()
        .unwrap()
        .replacen(&format!("\"format_version\": {FORMAT_VERSION}"), "\"format_version\": 99", 1);
    assert!(matches!(
        TrainedModel::from_json(&text),
        Err(Error::VersionMismatch { found: 99, .. })
    ));
    assert!(TrainedModel::from_json("{}").is_err());
}
