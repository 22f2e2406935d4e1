//! Task-level entry points: detection of the most discrepant subgroup and
//! evaluation of a given one, from in-memory tables, CSV files or two samples.
//!
//! In single-sample mode the two distributions compared are the protected
//! attributes of the positive rows against those of the negative rows, so a
//! positive signed gap means the subgroup is over-represented among positives.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::linf::{self, LinfVerdict, PacConfig};
use crate::msd;
use crate::subgroup::{format_rule, parse_rule, NamedLiteral, Rule};
use crate::tabular::{
    encode, infer_schema, read_csv, split_by_target, target_column, BinningConfig, EncodeOptions, EncodedTable,
    FeatureKind, FeatureSpec, RawTable, Schema,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Options {
    pub binning: BinningConfig,
    pub max_literals: Option<usize>,
    pub seed: u64,
    pub lenient: bool,
    pub epsilon: f64,
    pub eta: f64,
    pub max_subsample: Option<usize>,
}

impl Default for Options {
    fn default() -> Self {
        let pac = PacConfig::default();
        Options {
            binning: BinningConfig::default(),
            max_literals: None,
            seed: 0,
            lenient: false,
            epsilon: pac.epsilon,
            eta: pac.eta,
            max_subsample: None,
        }
    }
}

impl Options {
    pub fn pac(&self) -> PacConfig {
        PacConfig {
            epsilon: self.epsilon,
            eta: self.eta,
            max_subsample: self.max_subsample,
            seed: self.seed,
        }
    }

    fn encode_options(&self) -> EncodeOptions {
        EncodeOptions { lenient: self.lenient }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SingleSample,
    TwoSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "msd")]
    Msd,
    #[serde(rename = "l_inf")]
    LInf,
}

impl std::str::FromStr for Method {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "msd" => Ok(Method::Msd),
            "l_inf" | "linf" => Ok(Method::LInf),
            other => Err(AuditError::InvalidParameter(format!("unknown method {other:?} (expected msd or l_inf)"))),
        }
    }
}

/// What to evaluate: a rule for `msd`, a feature/value pair and tolerance for `l_inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub method: Method,
    pub rule: Option<String>,
    pub feature_involved: Option<String>,
    pub subgroup_to_check: Option<String>,
    pub delta: Option<f64>,
}

impl Evaluation {
    pub fn msd(rule: impl Into<String>) -> Self {
        Evaluation {
            method: Method::Msd,
            rule: Some(rule.into()),
            feature_involved: None,
            subgroup_to_check: None,
            delta: None,
        }
    }

    pub fn linf(feature: impl Into<String>, value: impl Into<String>, delta: f64) -> Self {
        Evaluation {
            method: Method::LInf,
            rule: None,
            feature_involved: Some(feature.into()),
            subgroup_to_check: Some(value.into()),
            delta: Some(delta),
        }
    }

    /// Checks that the method-specific arguments are present.
    pub fn check(&self) -> Result<()> {
        match self.method {
            Method::Msd if self.rule.is_none() => Err(AuditError::MissingArgument("rule")),
            Method::LInf if self.feature_involved.is_none() => Err(AuditError::MissingArgument("feature_involved")),
            Method::LInf if self.subgroup_to_check.is_none() => Err(AuditError::MissingArgument("subgroup_to_check")),
            Method::LInf if self.delta.is_none() => Err(AuditError::MissingArgument("delta")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes_explored: u64,
    pub nodes_pruned: u64,
    pub optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub kind: FeatureKind,
    pub categories: Vec<String>,
}

fn summarize(schema: &Schema) -> Vec<FeatureSummary> {
    schema
        .features
        .iter()
        .map(|f| FeatureSummary {
            name: f.name.clone(),
            kind: f.kind,
            categories: f.categories.clone(),
        })
        .collect()
}

/// Effective configuration echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub protected: Vec<String>,
    pub binning: BinningConfig,
    pub max_literals: usize,
    pub seed: u64,
    pub lenient: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_subsample: Option<usize>,
}

impl ConfigEcho {
    fn new(protected: &[String], opts: &Options, max_literals: usize) -> Self {
        ConfigEcho {
            protected: protected.to_vec(),
            binning: opts.binning.clone(),
            max_literals,
            seed: opts.seed,
            lenient: opts.lenient,
            epsilon: None,
            eta: None,
            max_subsample: None,
        }
    }

    fn with_pac(mut self, opts: &Options) -> Self {
        self.epsilon = Some(opts.epsilon);
        self.eta = Some(opts.eta);
        self.max_subsample = opts.max_subsample;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub mode: Mode,
    pub rule: Vec<NamedLiteral>,
    pub rule_text: String,
    pub msd_value: f64,
    pub signed_gap: f64,
    /// Rows in the first and second distribution.
    pub sample_sizes: (usize, usize),
    pub search: SearchStats,
    pub config: ConfigEcho,
    pub schema: Vec<FeatureSummary>,
}

impl DetectionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdEvaluation {
    pub mode: Mode,
    pub rule: Vec<NamedLiteral>,
    pub rule_text: String,
    pub msd_value: f64,
    pub signed_gap: f64,
    pub sample_sizes: (usize, usize),
    pub config: ConfigEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinfEvaluation {
    pub feature: String,
    pub value: String,
    #[serde(flatten)]
    pub result: LinfVerdict,
    pub config: ConfigEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum EvaluationReport {
    #[serde(rename = "msd")]
    Msd(MsdEvaluation),
    #[serde(rename = "l_inf")]
    LInf(LinfEvaluation),
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn encode_single(x: &RawTable, y: &[bool], protected: &[String], opts: &Options) -> Result<EncodedTable> {
    if y.len() != x.n_rows() {
        return Err(AuditError::TargetLength {
            rows: x.n_rows(),
            found: y.len(),
        });
    }
    let schema = infer_schema(x, protected, &opts.binning)?;
    encode(x, &schema, opts.encode_options())?.with_target(y.to_vec())
}

fn detection(mode: Mode, a: &EncodedTable, b: &EncodedTable, protected: &[String], opts: &Options) -> Result<DetectionReport> {
    let res = msd::msd_search(a, b, opts.max_literals)?;
    let schema = a.schema();
    Ok(DetectionReport {
        mode,
        rule: res.rule.to_named(schema),
        rule_text: format_rule(&res.rule, schema),
        msd_value: res.value,
        signed_gap: res.signed_gap,
        sample_sizes: (a.n_rows(), b.n_rows()),
        search: SearchStats {
            nodes_explored: res.nodes_explored,
            nodes_pruned: res.nodes_pruned,
            optimal: res.optimal,
        },
        config: ConfigEcho::new(protected, opts, res.max_literals),
        schema: summarize(schema),
    })
}

fn msd_evaluation(mode: Mode, rule: &Rule, a: &EncodedTable, b: &EncodedTable, protected: &[String], opts: &Options) -> Result<MsdEvaluation> {
    let gap = msd::signed_gap(rule, a, b)?;
    let schema = a.schema();
    let max_literals = opts.max_literals.unwrap_or(schema.n_features());
    Ok(MsdEvaluation {
        mode,
        rule: rule.to_named(schema),
        rule_text: format_rule(rule, schema),
        msd_value: gap.abs(),
        signed_gap: gap,
        sample_sizes: (a.n_rows(), b.n_rows()),
        config: ConfigEcho::new(protected, opts, max_literals),
    })
}

/// Most discrepant subgroup between positive and negative rows of `x`.
pub fn most_biased_subgroup(x: &RawTable, y: &[bool], protected: &[String], opts: &Options) -> Result<DetectionReport> {
    let table = encode_single(x, y, protected, opts)?;
    let (pos, neg) = split_by_target(&table)?;
    detection(Mode::SingleSample, &pos, &neg, protected, opts)
}

pub fn evaluate_biased_subgroup(
    x: &RawTable,
    y: &[bool],
    protected: &[String],
    eval: &Evaluation,
    opts: &Options,
) -> Result<EvaluationReport> {
    eval.check()?;
    let table = encode_single(x, y, protected, opts)?;
    let max_literals = opts.max_literals.unwrap_or(table.n_features());
    match eval.method {
        Method::Msd => {
            let rule = parse_rule(eval.rule.as_deref().unwrap_or_default(), table.schema())?;
            let (pos, neg) = split_by_target(&table)?;
            Ok(EvaluationReport::Msd(msd_evaluation(Mode::SingleSample, &rule, &pos, &neg, protected, opts)?))
        }
        Method::LInf => {
            let feature = eval.feature_involved.clone().unwrap_or_default();
            let value = eval.subgroup_to_check.clone().unwrap_or_default();
            let result = linf::linf_test(&table, &feature, &value, eval.delta.unwrap_or_default(), &opts.pac())?;
            Ok(EvaluationReport::LInf(LinfEvaluation {
                feature,
                value,
                result,
                config: ConfigEcho::new(protected, opts, max_literals).with_pac(opts),
            }))
        }
    }
}

fn load_csv(path: &Path, target_col: &str, protected: &[String]) -> Result<(RawTable, Vec<bool>)> {
    let raw = read_csv(path, Some(target_col), protected)?;
    let y = target_column(&raw, target_col)?;
    Ok((raw, y))
}

pub fn most_biased_subgroup_csv(
    csv_path: impl AsRef<Path>,
    target_col: &str,
    protected: &[String],
    opts: &Options,
) -> Result<DetectionReport> {
    let (raw, y) = load_csv(csv_path.as_ref(), target_col, protected)?;
    most_biased_subgroup(&raw, &y, protected, opts)
}

pub fn evaluate_biased_subgroup_csv(
    csv_path: impl AsRef<Path>,
    target_col: &str,
    protected: &[String],
    eval: &Evaluation,
    opts: &Options,
) -> Result<EvaluationReport> {
    eval.check()?;
    let (raw, y) = load_csv(csv_path.as_ref(), target_col, protected)?;
    evaluate_biased_subgroup(&raw, &y, protected, eval, opts)
}

fn check_same_columns(x1: &RawTable, x2: &RawTable) -> Result<()> {
    let c1: BTreeSet<&str> = x1.columns().iter().map(String::as_str).collect();
    let c2: BTreeSet<&str> = x2.columns().iter().map(String::as_str).collect();
    if c1 == c2 {
        return Ok(());
    }
    let only = |a: &BTreeSet<&str>, b: &BTreeSet<&str>| a.difference(b).copied().collect::<Vec<_>>().join(", ");
    Err(AuditError::ColumnMismatch(format!(
        "only in first: [{}]; only in second: [{}]",
        only(&c1, &c2),
        only(&c2, &c1)
    )))
}

/// Encodes both samples over a schema built from the union of their values.
/// Categorical labels are sorted so the schema does not depend on which
/// sample comes first.
fn encode_pair(x1: &RawTable, x2: &RawTable, protected: &[String], opts: &Options) -> Result<(EncodedTable, EncodedTable)> {
    check_same_columns(x1, x2)?;
    let union = x1.concat(x2)?;
    let mut schema = infer_schema(&union, protected, &opts.binning)?;
    schema.features.iter_mut().for_each(FeatureSpec::sort_categories);
    Ok((
        encode(x1, &schema, opts.encode_options())?,
        encode(x2, &schema, opts.encode_options())?,
    ))
}

/// Subgroup whose prevalence differs most between `x1` and `x2`; a positive
/// signed gap means it is more prevalent in `x1`.
pub fn most_biased_subgroup_two_samples(
    x1: &RawTable,
    x2: &RawTable,
    protected: &[String],
    opts: &Options,
) -> Result<DetectionReport> {
    let (a, b) = encode_pair(x1, x2, protected, opts)?;
    detection(Mode::TwoSample, &a, &b, protected, opts)
}

/// Only the `msd` method applies to two samples, which carry no outcome.
pub fn evaluate_biased_subgroup_two_samples(
    x1: &RawTable,
    x2: &RawTable,
    protected: &[String],
    rule: &str,
    opts: &Options,
) -> Result<EvaluationReport> {
    let (a, b) = encode_pair(x1, x2, protected, opts)?;
    let rule = parse_rule(rule, a.schema())?;
    Ok(EvaluationReport::Msd(msd_evaluation(Mode::TwoSample, &rule, &a, &b, protected, opts)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn scenario(gender: bool) -> (RawTable, Vec<bool>) {
        let raw = synth::scenario(synth::DEFAULT_SEED, gender);
        let y = target_column(&raw, "Target").unwrap();
        (raw, y)
    }

    #[test]
    fn detects_young_blue() {
        let (raw, y) = scenario(false);
        let r = most_biased_subgroup(&raw, &y, &names(&["Race", "Age"]), &Options::default()).unwrap();
        assert_eq!(r.rule_text, "Race = Blue AND Age = 0-18");
        assert!((r.msd_value - 0.111).abs() < 0.001);
        assert!((r.signed_gap + 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(r.sample_sizes, (72, 216));
        assert_eq!(r.mode, Mode::SingleSample);
    }

    #[test]
    fn evaluates_rule_and_linf() {
        let (raw, y) = scenario(true);
        let p = names(&["Race", "Age", "Gender"]);
        let opts = Options::default();
        match evaluate_biased_subgroup(&raw, &y, &p, &Evaluation::msd("Race = Blue AND Age = 0-18"), &opts).unwrap() {
            EvaluationReport::Msd(m) => assert!((m.msd_value - 0.111).abs() < 0.001),
            other => panic!("{other:?}"),
        }
        match evaluate_biased_subgroup(&raw, &y, &p, &Evaluation::linf("Gender", "F", 0.125), &opts).unwrap() {
            EvaluationReport::LInf(l) => {
                assert!(l.result.exact);
                assert_eq!(l.result.verdict, linf::Verdict::Fail);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_arguments() {
        let (raw, y) = scenario(true);
        let p = names(&["Gender"]);
        let mut e = Evaluation::linf("Gender", "F", 0.1);
        e.delta = None;
        let err = evaluate_biased_subgroup(&raw, &y, &p, &e, &Options::default()).unwrap_err();
        assert_eq!(err.to_string(), "missing delta");
        let mut e = Evaluation::msd("x");
        e.rule = None;
        assert!(matches!(e.check(), Err(AuditError::MissingArgument("rule"))));
    }

    #[test]
    fn uniform_outcomes_give_zero() {
        let rows: Vec<Vec<&str>> = (0..12).map(|i| vec![["a", "b", "c"][i % 3], ["u", "v"][(i / 3) % 2]]).collect();
        let raw = RawTable::from_strings(&["x", "z"], &rows).unwrap();
        // each (x, z) cell appears twice, once with each outcome
        let y: Vec<bool> = (0..12).map(|i| i >= 6).collect();
        let r = most_biased_subgroup(&raw, &y, &names(&["x", "z"]), &Options::default()).unwrap();
        assert_eq!(r.msd_value, 0.0);
        assert_eq!(r.rule_text, crate::subgroup::EVERYONE);
    }

    #[test]
    fn single_class_target() {
        let (raw, _) = scenario(false);
        let y = vec![true; raw.n_rows()];
        let err = most_biased_subgroup(&raw, &y, &names(&["Race"]), &Options::default()).unwrap_err();
        assert!(matches!(err, AuditError::DegenerateTarget(0)));
    }

    #[test]
    fn two_samples_identity_and_mismatch() {
        let (raw, _) = scenario(false);
        let p = names(&["Race", "Age"]);
        let r = most_biased_subgroup_two_samples(&raw, &raw, &p, &Options::default()).unwrap();
        assert_eq!((r.msd_value, r.rule.len()), (0.0, 0));
        let other = RawTable::from_strings(&["Race", "Age"], &[vec!["Blue", "0-18"]]).unwrap();
        let err = most_biased_subgroup_two_samples(&raw, &other, &p, &Options::default()).unwrap_err();
        assert!(err.to_string().contains("Target"), "{err}");
        let err = evaluate_biased_subgroup_two_samples(&raw, &raw, &p, "Race = Red", &Options::default()).unwrap_err();
        assert!(matches!(err, AuditError::UnknownCategory { .. }));
    }

    #[test]
    fn union_schema_admits_one_sided_category() {
        let x1 = RawTable::from_strings(&["c"], &[vec!["a"], vec!["b"]]).unwrap();
        let x2 = RawTable::from_strings(&["c"], &[vec!["a"], vec!["z"]]).unwrap();
        let r = most_biased_subgroup_two_samples(&x1, &x2, &names(&["c"]), &Options::default()).unwrap();
        assert_eq!(r.schema[0].categories[..3], names(&["a", "b", "z"]));
        assert_eq!(r.rule_text, "c = b");
        assert_eq!(r.signed_gap, 0.5);
        let swapped = most_biased_subgroup_two_samples(&x2, &x1, &names(&["c"]), &Options::default()).unwrap();
        assert_eq!(swapped.rule_text, "c = b");
        assert_eq!(swapped.signed_gap, -0.5);
    }

    #[test]
    fn report_json_round_trip() {
        let (raw, y) = scenario(true);
        let p = names(&["Race", "Age", "Gender"]);
        let opts = Options::default();
        let r = most_biased_subgroup(&raw, &y, &p, &opts).unwrap();
        let back: DetectionReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let e = evaluate_biased_subgroup(&raw, &y, &p, &Evaluation::linf("Gender", "F", 0.125), &opts).unwrap();
        let back: EvaluationReport = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(back, e);
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        for key in ["estimate", "margin", "threshold", "verdict", "subsample_sizes", "exact", "seed"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["verdict"], "FAIL");
    }
}
