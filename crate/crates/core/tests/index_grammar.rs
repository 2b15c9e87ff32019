use proptest::prelude::*;

use dcpviz_core::index::{known_models, make_index, DataIndex, IndexError, KNOWN_MODELS};

#[test]
fn documented_example_parses() {
    let idx: DataIndex = "NEX-DCP_CESM1-CAM5_pr_2021-03-01".parse().unwrap();
    assert_eq!(
        (idx.dataset.as_str(), idx.model.as_str(), idx.variable.as_str(), idx.date().as_str()),
        ("NEX-DCP", "CESM1-CAM5", "pr", "2021-03-01")
    );
    assert_eq!(idx.to_string(), "NEX-DCP_CESM1-CAM5_pr_2021-03-01");
}

#[test]
fn every_known_model_round_trips() {
    let models = known_models();
    for model in KNOWN_MODELS {
        for variable in ["pr", "tasmax", "tasmin"] {
            let idx = make_index("NEX-DCP", model, variable, 2099, 12).unwrap();
            let text = idx.to_string();
            assert_eq!(DataIndex::parse_with(&text, &models).unwrap(), idx);
            assert_eq!(text.parse::<DataIndex>().unwrap(), idx);
        }
    }
}

#[test]
fn unregistered_model_is_refused_when_a_list_is_given() {
    let r = DataIndex::parse_with("NEX-DCP_MY-MODEL_pr_2021-03-01", &known_models());
    assert_eq!(r, Err(IndexError::UnknownModel("MY-MODEL".into())));
}

proptest! {
    #[test]
    fn round_trip(
        dataset in "[A-Za-z0-9][A-Za-z0-9.-]{0,8}",
        model in "[A-Za-z0-9][A-Za-z0-9_.-]{0,10}[A-Za-z0-9]",
        variable in "[a-z][a-z0-9]{0,6}",
        year in 0i32..=9999,
        month in 1u32..=12,
    ) {
        let idx = make_index(&dataset, &model, &variable, year, month).unwrap();
        let text = idx.to_string();
        prop_assert_eq!(text.parse::<DataIndex>().unwrap(), idx.clone());
        let json = serde_json::to_string(&idx).unwrap();
        prop_assert_eq!(json, format!("\"{text}\""));
    }

    #[test]
    fn garbage_never_panics(s in ".{0,40}") {
        if let Ok(idx) = s.parse::<DataIndex>() {
            prop_assert_eq!(idx.to_string(), s);
        }
    }
}
