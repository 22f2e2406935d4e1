//! Conjunctive subgroup rules over protected-feature categories.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::tabular::{EncodedTable, Schema};

/// Printed form of the empty rule, which selects the whole population.
pub const EVERYONE: &str = "⟨everyone⟩";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub feature: usize,
    pub category: u32,
}

impl Literal {
    pub fn new(feature: usize, category: u32) -> Self {
        Literal { feature, category }
    }
}

/// Conjunction of literals on distinct features, kept sorted by feature index.
///
/// The derived ordering compares the literal sequences lexicographically,
/// which is the second key of the canonical tie-break (after length).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    literals: Vec<Literal>,
}

impl Rule {
    pub fn everyone() -> Self {
        Rule::default()
    }

    pub fn new(mut literals: Vec<Literal>) -> Result<Self> {
        literals.sort();
        if literals.windows(2).any(|w| w[0].feature == w[1].feature) {
            return Err(AuditError::Rule("duplicate feature".into()));
        }
        Ok(Rule { literals })
    }

    /// Appends a literal whose feature is past every feature already in the rule.
    pub(crate) fn extended(&self, lit: Literal) -> Rule {
        debug_assert!(self.literals.last().is_none_or(|l| l.feature < lit.feature));
        let mut literals = Vec::with_capacity(self.literals.len() + 1);
        literals.extend_from_slice(&self.literals);
        literals.push(lit);
        Rule { literals }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn last_feature(&self) -> Option<usize> {
        self.literals.last().map(|l| l.feature)
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        for l in &self.literals {
            let f = schema
                .features
                .get(l.feature)
                .ok_or_else(|| AuditError::Rule(format!("feature index {} out of range", l.feature)))?;
            if l.category as usize >= f.n_categories() {
                return Err(AuditError::Rule(format!(
                    "category index {} out of range for {:?}",
                    l.category, f.name
                )));
            }
        }
        Ok(())
    }

    /// Canonical tie-break: fewer literals first, then lexicographic.
    pub fn canonical_cmp(&self, other: &Rule) -> std::cmp::Ordering {
        self.len().cmp(&other.len()).then_with(|| self.cmp(other))
    }

    pub fn matches(&self, row: &[u32]) -> bool {
        self.literals.iter().all(|l| row[l.feature] == l.category)
    }

    pub fn display<'a>(&'a self, schema: &'a Schema) -> RuleDisplay<'a> {
        RuleDisplay { rule: self, schema }
    }

    pub fn to_named(&self, schema: &Schema) -> Vec<NamedLiteral> {
        self.literals
            .iter()
            .map(|l| {
                let f = &schema.features[l.feature];
                NamedLiteral {
                    feature: f.name.clone(),
                    value: f.label(l.category).to_string(),
                }
            })
            .collect()
    }

    pub fn from_named(named: &[NamedLiteral], schema: &Schema) -> Result<Rule> {
        let literals = named
            .iter()
            .map(|n| {
                let (i, f) = schema.feature(&n.feature)?;
                let c = f.category_index(&n.value).ok_or_else(|| AuditError::UnknownCategory {
                    feature: n.feature.clone(),
                    value: n.value.clone(),
                })?;
                Ok(Literal::new(i, c))
            })
            .collect::<Result<Vec<_>>>()?;
        Rule::new(literals)
    }
}

/// JSON form of a literal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedLiteral {
    pub feature: String,
    pub value: String,
}

pub struct RuleDisplay<'a> {
    rule: &'a Rule,
    schema: &'a Schema,
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.rule.is_empty() {
            return f.write_str(EVERYONE);
        }
        for (k, l) in self.rule.literals.iter().enumerate() {
            if k > 0 {
                f.write_str(" AND ")?;
            }
            let feat = &self.schema.features[l.feature];
            write!(f, "{} = {}", feat.name, feat.label(l.category))?;
        }
        Ok(())
    }
}

pub fn format_rule(rule: &Rule, schema: &Schema) -> String {
    rule.display(schema).to_string()
}

pub fn count(rule: &Rule, table: &EncodedTable) -> usize {
    table.rows().filter(|r| rule.matches(r)).count()
}

/// Fraction of rows of `table` in the subgroup.
pub fn mass(rule: &Rule, table: &EncodedTable) -> Result<f64> {
    if table.n_rows() == 0 {
        return Err(AuditError::EmptyTable);
    }
    rule.validate(table.schema())?;
    Ok(count(rule, table) as f64 / table.n_rows() as f64)
}

/// Parses `Feature = value AND Feature = value`. Names are matched exactly,
/// falling back to a case-insensitive match when that is unambiguous.
pub fn parse_rule(text: &str, schema: &Schema) -> Result<Rule> {
    let text = text.trim();
    if text == EVERYONE {
        return Ok(Rule::everyone());
    }
    let mut literals = Vec::new();
    for part in split_and(text) {
        let part = part.trim();
        if part.is_empty() {
            return Err(AuditError::Rule("empty literal".into()));
        }
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| AuditError::Rule(format!("literal {part:?} has no '='")))?;
        let (name, value) = (name.trim(), value.trim());
        if name.is_empty() || value.is_empty() {
            return Err(AuditError::Rule(format!("empty literal {part:?}")));
        }
        let fi = resolve(schema.features.iter().map(|f| f.name.as_str()), name)
            .ok_or_else(|| AuditError::UnknownFeature(name.to_string()))?;
        let feat = &schema.features[fi];
        let ci = resolve(feat.categories.iter().map(String::as_str), value).ok_or_else(|| {
            AuditError::UnknownCategory {
                feature: feat.name.clone(),
                value: value.to_string(),
            }
        })?;
        literals.push(Literal::new(fi, ci as u32));
    }
    Rule::new(literals)
}

fn resolve<'a>(names: impl Iterator<Item = &'a str> + Clone, wanted: &str) -> Option<usize> {
    if let Some(i) = names.clone().position(|n| n == wanted) {
        return Some(i);
    }
    let mut hits = names
        .enumerate()
        .filter(|(_, n)| n.to_lowercase() == wanted.to_lowercase());
    match (hits.next(), hits.next()) {
        (Some((i, _)), None) => Some(i),
        _ => None,
    }
}

/// Splits on the word AND (any case) surrounded by whitespace.
fn split_and(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut parts = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i + 3 <= bytes.len() {
        let before = i > 0 && bytes[i - 1].is_ascii_whitespace();
        let after = bytes.get(i + 3).is_some_and(u8::is_ascii_whitespace);
        if before && after && bytes[i..i + 3].eq_ignore_ascii_case(b"and") {
            parts.push(&text[start..i]);
            start = i + 3;
            i += 3;
        } else {
            i += 1;
        }
    }
    parts.push(&text[start..]);
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::FeatureSpec;

    fn schema() -> Schema {
        Schema::new(
            vec![
                FeatureSpec::categorical("Race", ["Green", "Blue", "Purple"]).unwrap(),
                FeatureSpec::categorical("Age", ["0-18", "18-30", "30-45", "45-60"]).unwrap(),
                FeatureSpec::categorical("Sex", ["Male", "Female"]).unwrap(),
            ],
            None,
        )
        .unwrap()
    }

    fn table(rows: &[[u32; 3]]) -> EncodedTable {
        let cells = rows.iter().flatten().copied().collect();
        EncodedTable::new(schema(), rows.len(), cells, None).unwrap()
    }

    #[test]
    fn matching() {
        let blue_young = Rule::new(vec![Literal::new(0, 1), Literal::new(1, 0)]).unwrap();
        assert!(Rule::everyone().matches(&[2, 3, 1]));
        assert!(!blue_young.matches(&[1, 2, 0]));
        assert!(Rule::new(vec![Literal::new(0, 1)]).unwrap().matches(&[1, 0, 0]));
    }

    #[test]
    fn masses() {
        let rows = [[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0], [1, 1, 0], [2, 1, 0], [0, 2, 0], [1, 2, 0], [2, 2, 0]];
        let t = table(&rows);
        assert_eq!(mass(&Rule::everyone(), &t).unwrap(), 1.0);
        let none = Rule::new(vec![Literal::new(1, 3)]).unwrap();
        assert_eq!(mass(&none, &t).unwrap(), 0.0);
        let blue_young = Rule::new(vec![Literal::new(0, 1), Literal::new(1, 0)]).unwrap();
        assert!((mass(&blue_young, &t).unwrap() - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn formatting() {
        let s = schema();
        let r = Rule::new(vec![Literal::new(1, 0), Literal::new(0, 1)]).unwrap();
        assert_eq!(format_rule(&r, &s), "Race = Blue AND Age = 0-18");
        assert_eq!(format_rule(&Rule::everyone(), &s), EVERYONE);
        let s2 = Schema::new(
            vec![
                FeatureSpec::categorical("Race", ["White", "Black"]).unwrap(),
                FeatureSpec::categorical("Sex", ["Male", "Female"]).unwrap(),
            ],
            None,
        )
        .unwrap();
        let r = Rule::new(vec![Literal::new(1, 0), Literal::new(0, 0)]).unwrap();
        assert_eq!(format_rule(&r, &s2), "Race = White AND Sex = Male");
    }

    #[test]
    fn parsing() {
        let s = schema();
        let r = parse_rule("Race = Blue AND Age = 0-18", &s).unwrap();
        assert_eq!(r.literals(), &[Literal::new(0, 1), Literal::new(1, 0)]);
        assert_eq!(parse_rule("race=blue", &s).unwrap(), Rule::new(vec![Literal::new(0, 1)]).unwrap());
        assert_eq!(parse_rule("Age=0-18 and Race=Blue", &s).unwrap(), r);
        assert_eq!(parse_rule(EVERYONE, &s).unwrap(), Rule::everyone());
        let err = parse_rule("Race = Blue AND Race = Green", &s).unwrap_err();
        assert!(err.to_string().contains("duplicate feature"));
        assert!(matches!(parse_rule("Colour = Blue", &s), Err(AuditError::UnknownFeature(_))));
        assert!(matches!(parse_rule("Race = Red", &s), Err(AuditError::UnknownCategory { .. })));
        assert!(parse_rule("Race = Blue AND ", &s).is_err());
        assert!(parse_rule("", &s).is_err());
        assert!(parse_rule("Race", &s).is_err());
    }

    #[test]
    fn ambiguous_case_fallback_rejected() {
        let s = Schema::new(vec![FeatureSpec::categorical("x", ["a", "A"]).unwrap()], None).unwrap();
        assert_eq!(parse_rule("x = A", &s).unwrap(), Rule::new(vec![Literal::new(0, 1)]).unwrap());
        assert!(parse_rule("X = a", &s).is_ok());
        let s = Schema::new(vec![FeatureSpec::categorical("x", ["ab", "AB"]).unwrap()], None).unwrap();
        assert!(parse_rule("x = Ab", &s).is_err());
    }

    #[test]
    fn names_with_spaces() {
        let s = Schema::new(
            vec![
                FeatureSpec::categorical("Difficulty hearing", ["No", "Yes"]).unwrap(),
                FeatureSpec::categorical("Citizenship", ["Born in the US", "Naturalized"]).unwrap(),
            ],
            None,
        )
        .unwrap();
        let text = "Difficulty hearing = No AND Citizenship = Born in the US";
        let r = parse_rule(text, &s).unwrap();
        assert_eq!(format_rule(&r, &s), text);
    }

    #[test]
    fn named_round_trip() {
        let s = schema();
        let r = parse_rule("Race = Purple AND Sex = Female", &s).unwrap();
        assert_eq!(Rule::from_named(&r.to_named(&s), &s).unwrap(), r);
    }

    #[test]
    fn canonical_order() {
        let a = Rule::new(vec![Literal::new(0, 1)]).unwrap();
        let b = Rule::new(vec![Literal::new(0, 0), Literal::new(1, 0)]).unwrap();
        let c = Rule::new(vec![Literal::new(0, 2)]).unwrap();
        assert!(a.canonical_cmp(&b).is_lt());
        assert!(a.canonical_cmp(&c).is_lt());
        assert!(Rule::everyone().canonical_cmp(&a).is_lt());
    }
}
