//! Maximum subgroup discrepancy between two empirical distributions.
//!
//! For two encoded tables `A` and `B` over the same schema, the discrepancy of
//! a rule `S` is `|mass(S, A) - mass(S, B)|`, and the MSD is its maximum over
//! every conjunctive rule. [`msd_search`] finds the maximiser exactly with a
//! depth-first branch-and-bound over the conjunction lattice; [`msd_brute_force`]
//! enumerates the lattice and serves as the reference.
//!
//! All comparisons happen on integers: with row totals `n_a`, `n_b` and match
//! counts `c_a`, `c_b`, the signed gap is `(c_a * n_b - c_b * n_a) / (n_a * n_b)`
//! and the denominator is shared by every rule of one instance. Floats are only
//! produced for the result.
//!
//! Ties are broken canonically: fewer literals first, then the lexicographically
//! smallest sorted `(feature, category)` sequence.

use std::cmp::Ordering;

use crate::error::{AuditError, Result};
use crate::subgroup::{self, Literal, Rule};
use crate::tabular::EncodedTable;

/// Largest lattice `msd_brute_force` will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone)]
pub struct MsdResult {
    pub rule: Rule,
    pub value: f64,
    pub signed_gap: f64,
    pub nodes_explored: u64,
    pub nodes_pruned: u64,
    pub optimal: bool,
    pub max_literals: usize,
}

/// Search counters are reported but do not take part in equality.
impl PartialEq for MsdResult {
    fn eq(&self, other: &Self) -> bool {
        self.rule == other.rule
            && self.value.to_bits() == other.value.to_bits()
            && self.signed_gap.to_bits() == other.signed_gap.to_bits()
            && self.optimal == other.optimal
            && self.max_literals == other.max_literals
    }
}

fn check_pair(a: &EncodedTable, b: &EncodedTable) -> Result<()> {
    if a.schema().features != b.schema().features {
        return Err(AuditError::SchemaMismatch("tables have different protected features".into()));
    }
    if a.n_rows() == 0 || b.n_rows() == 0 {
        return Err(AuditError::EmptyTable);
    }
    Ok(())
}

/// Gap as a float, shared by every code path so equal counts give equal bits.
pub fn gap_value(c_a: usize, n_a: usize, c_b: usize, n_b: usize) -> f64 {
    let num = c_a as i128 * n_b as i128 - c_b as i128 * n_a as i128;
    num as f64 / (n_a as i128 * n_b as i128) as f64
}

/// `mass(rule, a) - mass(rule, b)`.
pub fn signed_gap(rule: &Rule, a: &EncodedTable, b: &EncodedTable) -> Result<f64> {
    check_pair(a, b)?;
    rule.validate(a.schema())?;
    Ok(gap_value(
        subgroup::count(rule, a),
        a.n_rows(),
        subgroup::count(rule, b),
        b.n_rows(),
    ))
}

/// `|mass(rule, a) - mass(rule, b)|`.
pub fn msd_evaluate(rule: &Rule, a: &EncodedTable, b: &EncodedTable) -> Result<f64> {
    signed_gap(rule, a, b).map(f64::abs)
}

fn resolve_depth(max_literals: Option<usize>, d: usize) -> Result<usize> {
    match max_literals {
        None => Ok(d),
        Some(k) if k <= d => Ok(k),
        Some(k) => Err(AuditError::MaxLiterals {
            requested: k,
            features: d,
        }),
    }
}

/// Incumbent with its exact score numerator.
#[derive(Debug, Clone)]
struct Best {
    rule: Rule,
    score: u128,
    gap: i128,
}

impl Best {
    fn root() -> Self {
        Best {
            rule: Rule::everyone(),
            score: 0,
            gap: 0,
        }
    }

    /// Would a rule with this score displace the incumbent?
    fn beaten_by(&self, score: u128, rule: impl FnOnce() -> Rule) -> Option<Rule> {
        match score.cmp(&self.score) {
            Ordering::Less => None,
            Ordering::Greater => Some(rule()),
            Ordering::Equal => {
                let r = rule();
                (r.canonical_cmp(&self.rule) == Ordering::Less).then_some(r)
            }
        }
    }

    fn into_result(self, n_a: usize, n_b: usize, explored: u64, pruned: u64, depth: usize) -> MsdResult {
        let denom = (n_a as i128 * n_b as i128) as f64;
        let signed_gap = self.gap as f64 / denom;
        MsdResult {
            rule: self.rule,
            value: signed_gap.abs(),
            signed_gap,
            nodes_explored: explored,
            nodes_pruned: pruned,
            optimal: true,
            max_literals: depth,
        }
    }
}

struct Scores {
    n_a: i128,
    n_b: i128,
}

impl Scores {
    fn gap(&self, c_a: usize, c_b: usize) -> i128 {
        c_a as i128 * self.n_b - c_b as i128 * self.n_a
    }

    fn bound(&self, c_a: usize, c_b: usize) -> u128 {
        (c_a as i128 * self.n_b).max(c_b as i128 * self.n_a) as u128
    }
}

struct Child {
    lit: Literal,
    c_a: usize,
    c_b: usize,
    bound: u128,
}

struct Search {
    cols_a: Vec<Vec<u32>>,
    cols_b: Vec<Vec<u32>>,
    cards: Vec<usize>,
    scores: Scores,
    depth: usize,
    best: Best,
    explored: u64,
    pruned: u64,
}

fn columns(t: &EncodedTable) -> Vec<Vec<u32>> {
    (0..t.n_features())
        .map(|f| (0..t.n_rows()).map(|r| t.cell(r, f)).collect())
        .collect()
}

impl Search {
    fn visit(&mut self, rule: &Rule, rows_a: &[u32], rows_b: &[u32]) {
        if rule.len() == self.depth {
            return;
        }
        let d = self.cards.len();
        let start = rule.last_feature().map_or(0, |f| f + 1);
        let mut children = Vec::new();
        for f in start..d {
            let mut ca = vec![0usize; self.cards[f]];
            let mut cb = vec![0usize; self.cards[f]];
            let col_a = &self.cols_a[f];
            let col_b = &self.cols_b[f];
            for &r in rows_a {
                ca[col_a[r as usize] as usize] += 1;
            }
            for &r in rows_b {
                cb[col_b[r as usize] as usize] += 1;
            }
            for c in 0..self.cards[f] {
                let lit = Literal::new(f, c as u32);
                let (c_a, c_b) = (ca[c], cb[c]);
                self.explored += 1;
                let gap = self.scores.gap(c_a, c_b);
                if let Some(r) = self.best.beaten_by(gap.unsigned_abs(), || rule.extended(lit)) {
                    self.best = Best {
                        rule: r,
                        score: gap.unsigned_abs(),
                        gap,
                    };
                }
                children.push(Child {
                    lit,
                    c_a,
                    c_b,
                    bound: self.scores.bound(c_a, c_b),
                });
            }
        }
        // best-first within the node; ties keep canonical order
        children.sort_by(|x, y| y.bound.cmp(&x.bound).then(x.lit.cmp(&y.lit)));
        let child_len = rule.len() + 1;
        for ch in children {
            // leaves: nothing below the last feature or the depth limit
            if ch.lit.feature + 1 == d || child_len == self.depth {
                continue;
            }
            let hopeless = ch.bound < self.best.score
                || (ch.bound == self.best.score && self.best.rule.len() <= child_len);
            if hopeless {
                self.pruned += 1;
                continue;
            }
            let f = ch.lit.feature;
            let c = ch.lit.category;
            let sub_a: Vec<u32> = rows_a.iter().copied().filter(|&r| self.cols_a[f][r as usize] == c).collect();
            let sub_b: Vec<u32> = rows_b.iter().copied().filter(|&r| self.cols_b[f][r as usize] == c).collect();
            debug_assert_eq!((sub_a.len(), sub_b.len()), (ch.c_a, ch.c_b));
            let child = rule.extended(ch.lit);
            self.visit(&child, &sub_a, &sub_b);
        }
    }
}

/// Exact maximiser of the discrepancy over rules with at most `max_literals`
/// literals (all features when `None`).
pub fn msd_search(a: &EncodedTable, b: &EncodedTable, max_literals: Option<usize>) -> Result<MsdResult> {
    check_pair(a, b)?;
    let d = a.n_features();
    let depth = resolve_depth(max_literals, d)?;
    let (n_a, n_b) = (a.n_rows(), b.n_rows());
    let mut search = Search {
        cols_a: columns(a),
        cols_b: columns(b),
        cards: a.schema().features.iter().map(|f| f.n_categories()).collect(),
        scores: Scores {
            n_a: n_a as i128,
            n_b: n_b as i128,
        },
        depth,
        best: Best::root(),
        explored: 1,
        pruned: 0,
    };
    let rows_a: Vec<u32> = (0..n_a as u32).collect();
    let rows_b: Vec<u32> = (0..n_b as u32).collect();
    search.visit(&Rule::everyone(), &rows_a, &rows_b);
    let Search { best, explored, pruned, .. } = search;
    Ok(best.into_result(n_a, n_b, explored, pruned, depth))
}

/// Exhaustive enumeration with the same tie-break as [`msd_search`].
pub fn msd_brute_force(a: &EncodedTable, b: &EncodedTable, max_literals: Option<usize>) -> Result<MsdResult> {
    check_pair(a, b)?;
    let d = a.n_features();
    let depth = resolve_depth(max_literals, d)?;
    let cards: Vec<usize> = a.schema().features.iter().map(|f| f.n_categories()).collect();
    let full: u128 = cards.iter().fold(1u128, |acc, &c| acc.saturating_mul(c as u128 + 1));
    if full > BRUTE_FORCE_LIMIT {
        return Err(AuditError::LatticeTooLarge(full));
    }
    let (n_a, n_b) = (a.n_rows(), b.n_rows());
    let scores = Scores {
        n_a: n_a as i128,
        n_b: n_b as i128,
    };
    let mut best = Best::root();
    let mut explored = 0u64;
    let mut stack: Vec<Literal> = Vec::new();
    enumerate(&cards, 0, depth, &mut stack, &mut |lits| {
        explored += 1;
        let rule = Rule::new(lits.to_vec()).expect("distinct features");
        let gap = scores.gap(subgroup::count(&rule, a), subgroup::count(&rule, b));
        if let Some(r) = best.beaten_by(gap.unsigned_abs(), || rule) {
            best = Best {
                rule: r,
                score: gap.unsigned_abs(),
                gap,
            };
        }
    });
    Ok(best.into_result(n_a, n_b, explored, 0, depth))
}

fn enumerate(cards: &[usize], f: usize, left: usize, stack: &mut Vec<Literal>, visit: &mut impl FnMut(&[Literal])) {
    if f == cards.len() {
        visit(stack);
        return;
    }
    enumerate(cards, f + 1, left, stack, visit);
    if left == 0 {
        return;
    }
    for c in 0..cards[f] {
        stack.push(Literal::new(f, c as u32));
        enumerate(cards, f + 1, left - 1, stack, visit);
        stack.pop();
    }
}
