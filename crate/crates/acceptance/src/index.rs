use dcpviz_core::index::{known_models, make_index, DataIndex, KNOWN_MODELS};

use crate::Faults;

pub const EXAMPLE: &str = "NEX-DCP_CESM1-CAM5_pr_2021-03-01";

pub fn run() -> (bool, String) {
    let mut faults = Faults::default();
    let models = known_models();
    let mut round_trips = 0;
    for model in KNOWN_MODELS {
        for variable in ["pr", "tasmax", "tasmin"] {
            for (year, month) in [(1950, 1), (2005, 12), (2021, 3), (2099, 12)] {
                let idx = match make_index("NEX-DCP", model, variable, year, month) {
                    Ok(i) => i,
                    Err(e) => {
                        faults.fail(format!("{model} {variable}: {e}"));
                        continue;
                    }
                };
                let text = idx.to_string();
                let want = format!("NEX-DCP_{model}_{variable}_{year:04}-{month:02}-01");
                faults.check(text == want, || format!("{text} != {want}"));
                faults.check(DataIndex::parse_with(&text, &models).as_ref() == Ok(&idx), || format!("{text} with model list"));
                faults.check(text.parse::<DataIndex>().as_ref() == Ok(&idx), || format!("{text} without model list"));
                round_trips += 1;
            }
        }
    }
    match EXAMPLE.parse::<DataIndex>() {
        Ok(idx) => {
            let parts = (idx.dataset.as_str(), idx.model.as_str(), idx.variable.as_str(), idx.date());
            faults.check(parts == ("NEX-DCP", "CESM1-CAM5", "pr", "2021-03-01".to_string()), || {
                format!("{EXAMPLE} parsed to {parts:?}")
            });
            faults.check(idx.to_string() == EXAMPLE, || format!("{EXAMPLE} printed as {idx}"));
        }
        Err(e) => faults.fail(format!("{EXAMPLE}: {e}")),
    }
    let summary = format!(
        "{} registered models, {round_trips} indexes round-trip, {EXAMPLE} parses to (NEX-DCP, CESM1-CAM5, pr, 2021-03-01)",
        KNOWN_MODELS.len()
    );
    (faults.is_empty(), faults.report(summary))
}
