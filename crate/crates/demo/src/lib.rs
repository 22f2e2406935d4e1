//! Browser bindings for subgroup-audit. Each exported function takes CSV text
//! and returns a JSON report; the `*_impl` functions hold the logic so they
//! can be tested natively.

use std::collections::BTreeMap;

use serde::Serialize;
use subgroup_audit::tabular::{parse_csv, target_column, write_csv, BinningConfig};
use subgroup_audit::{api, synth, Evaluation, Options};
use wasm_bindgen::prelude::*;

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(String::from).collect()
}

fn binning(spec: &str) -> Result<BinningConfig, String> {
    let mut cfg = BinningConfig::new();
    for entry in spec.split([';', '\n']).map(str::trim).filter(|e| !e.is_empty()) {
        cfg.push_entry(entry).map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn load(csv: &str, target: &str, protected: &[String]) -> Result<(subgroup_audit::RawTable, Vec<bool>), String> {
    let raw = parse_csv(csv.as_bytes(), Some(target), protected).map_err(|e| e.to_string())?;
    let y = target_column(&raw, target).map_err(|e| e.to_string())?;
    Ok((raw, y))
}

pub fn synth_impl(seed: u32, with_gender: bool) -> Result<String, String> {
    write_csv(&synth::scenario(seed.into(), with_gender)).map_err(|e| e.to_string())
}

/// `max_literals < 0` means no limit; `bins` holds entries like "Age:q4"
/// separated by `;` or newlines.
pub fn detect_impl(csv: &str, target: &str, protected: &str, bins: &str, max_literals: i32) -> Result<String, String> {
    let protected = split_list(protected);
    let (raw, y) = load(csv, target, &protected)?;
    let opts = Options {
        binning: binning(bins)?,
        max_literals: usize::try_from(max_literals).ok(),
        ..Options::default()
    };
    let report = api::most_biased_subgroup(&raw, &y, &protected, &opts).map_err(|e| e.to_string())?;
    Ok(report.to_json())
}

/// `max_subsample = 0` means the formula's sample size.
#[allow(clippy::too_many_arguments)]
pub fn linf_impl(
    csv: &str,
    target: &str,
    protected: &str,
    feature: &str,
    value: &str,
    delta: f64,
    epsilon: f64,
    eta: f64,
    max_subsample: u32,
    seed: u32,
) -> Result<String, String> {
    let protected = split_list(protected);
    let (raw, y) = load(csv, target, &protected)?;
    let opts = Options {
        epsilon,
        eta,
        max_subsample: (max_subsample > 0).then_some(max_subsample as usize),
        seed: seed.into(),
        ..Options::default()
    };
    let eval = Evaluation::linf(feature, value, delta);
    let report = api::evaluate_biased_subgroup(&raw, &y, &protected, &eval, &opts).map_err(|e| e.to_string())?;
    Ok(report.to_json())
}

#[derive(Serialize)]
struct Grid {
    rows: Vec<String>,
    cols: Vec<String>,
    /// `[positives, total]` per cell, row-major.
    cells: Vec<Vec<[usize; 2]>>,
}

/// Positive counts over two columns, for the heatmap. Labels are sorted.
pub fn cell_rates_impl(csv: &str, target: &str, row_col: &str, col_col: &str) -> Result<String, String> {
    let protected = vec![row_col.to_string(), col_col.to_string()];
    let (raw, y) = load(csv, target, &protected)?;
    let label = |v: Option<&str>| v.unwrap_or(subgroup_audit::tabular::MISSING_LABEL).to_string();
    let rows: Vec<String> = raw.column(row_col).map_err(|e| e.to_string())?.map(label).collect();
    let cols: Vec<String> = raw.column(col_col).map_err(|e| e.to_string())?.map(label).collect();
    let mut counts: BTreeMap<(&str, &str), [usize; 2]> = BTreeMap::new();
    for ((r, c), &pos) in rows.iter().zip(&cols).zip(&y) {
        let cell = counts.entry((r.as_str(), c.as_str())).or_default();
        cell[0] += pos as usize;
        cell[1] += 1;
    }
    let mut row_labels = rows.clone();
    row_labels.sort();
    row_labels.dedup();
    let mut col_labels = cols.clone();
    col_labels.sort();
    col_labels.dedup();
    let cells = row_labels
        .iter()
        .map(|r| {
            col_labels
                .iter()
                .map(|c| counts.get(&(r.as_str(), c.as_str())).copied().unwrap_or_default())
                .collect()
        })
        .collect();
    let grid = Grid {
        rows: row_labels,
        cols: col_labels,
        cells,
    };
    serde_json::to_string(&grid).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn synth(seed: u32, with_gender: bool) -> Result<String, JsError> {
    js(synth_impl(seed, with_gender))
}

#[wasm_bindgen]
pub fn detect(csv: &str, target: &str, protected: &str, bins: &str, max_literals: i32) -> Result<String, JsError> {
    js(detect_impl(csv, target, protected, bins, max_literals))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn linf(
    csv: &str,
    target: &str,
    protected: &str,
    feature: &str,
    value: &str,
    delta: f64,
    epsilon: f64,
    eta: f64,
    max_subsample: u32,
    seed: u32,
) -> Result<String, JsError> {
    js(linf_impl(csv, target, protected, feature, value, delta, epsilon, eta, max_subsample, seed))
}

#[wasm_bindgen]
pub fn cell_rates(csv: &str, target: &str, row_col: &str, col_col: &str) -> Result<String, JsError> {
    js(cell_rates_impl(csv, target, row_col, col_col))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn detect_on_synth() {
        let csv = synth_impl(0, false).unwrap();
        let v = parse(&detect_impl(&csv, "Target", "Race, Age", "", -1).unwrap());
        assert_eq!(v["rule_text"], "Race = Blue AND Age = 0-18");
        // single attributes are fair on this table
        let one = parse(&detect_impl(&csv, "Target", "Race,Age", "", 1).unwrap());
        assert_eq!(one["msd_value"], 0.0);
        assert_eq!(one["rule_text"], "⟨everyone⟩");
    }

    #[test]
    fn detect_with_bins() {
        let csv = "age,t\n10,1\n20,1\n30,0\n40,0\n";
        let v = parse(&detect_impl(csv, "t", "age", "age:25", -1).unwrap());
        assert_eq!(v["msd_value"], 1.0);
        assert!(binning("age:q").is_ok());
        assert!(detect_impl(csv, "t", "age", "age:q1", -1).is_err());
    }

    #[test]
    fn linf_fail_on_gendered_synth() {
        let csv = synth_impl(0, true).unwrap();
        let v = parse(&linf_impl(&csv, "Target", "Race,Age,Gender", "Gender", "F", 0.125, 0.05, 0.05, 0, 0).unwrap());
        assert_eq!(v["verdict"], "FAIL");
        assert_eq!(v["exact"], true);
        let sub = parse(&linf_impl(&csv, "Target", "Gender", "Gender", "F", 0.125, 0.05, 0.05, 50, 1).unwrap());
        assert_eq!(sub["exact"], false);
    }

    #[test]
    fn errors_are_messages() {
        let csv = synth_impl(0, false).unwrap();
        let e = detect_impl(&csv, "Target", "Height", "", -1).unwrap_err();
        assert!(e.contains("Height"), "{e}");
        assert!(linf_impl(&csv, "Target", "Race", "Race", "Red", 0.1, 0.05, 0.05, 0, 0).is_err());
        assert!(linf_impl(&csv, "Target", "Race", "Race", "Blue", 0.1, 0.9, 0.05, 0, 0).is_err());
    }

    #[test]
    fn grid_counts() {
        let csv = synth_impl(4, false).unwrap();
        let v = parse(&cell_rates_impl(&csv, "Target", "Race", "Age").unwrap());
        assert_eq!(v["rows"], serde_json::json!(["Blue", "Green", "Purple"]));
        assert_eq!(v["cols"][0], "0-18");
        assert_eq!(v["cells"][0][0], serde_json::json!([0, 24]));
        assert_eq!(v["cells"][1][0], serde_json::json!([9, 24]));
    }
}
