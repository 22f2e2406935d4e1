#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subgroup_audit::tabular::{EncodedTable, FeatureSpec, RawTable, Schema};

/// Discrepancy maximum computed straight from raw labels: every conjunction
/// over observed values, positives vs negatives, exact rational comparison.
/// Returns the value and every maximising rule as (column, label) pairs.
pub fn naive_msd(raw: &RawTable, target: &str, protected: &[&str]) -> (f64, Vec<Vec<(String, String)>>) {
    let t = raw.column_index(target).unwrap();
    let cols: Vec<usize> = protected.iter().map(|p| raw.column_index(p).unwrap()).collect();
    let is_pos = |r: &Vec<Option<String>>| r[t].as_deref() == Some("1");
    let n_pos = raw.rows().iter().filter(|r| is_pos(r)).count() as i64;
    let n_neg = raw.n_rows() as i64 - n_pos;
    let mut values: Vec<Vec<String>> = Vec::new();
    for &c in &cols {
        let mut v: Vec<String> = raw.rows().iter().filter_map(|r| r[c].clone()).collect();
        v.sort();
        v.dedup();
        values.push(v);
    }
    let mut best = 0i64;
    let mut argmax: Vec<Vec<(String, String)>> = Vec::new();
    let mut choice: Vec<Option<usize>> = vec![None; cols.len()];
    loop {
        let (mut cp, mut cn) = (0i64, 0i64);
        for r in raw.rows() {
            let hit = choice
                .iter()
                .zip(&cols)
                .enumerate()
                .all(|(k, (ch, &c))| ch.is_none_or(|v| r[c].as_deref() == Some(values[k][v].as_str())));
            if hit {
                if is_pos(r) {
                    cp += 1
                } else {
                    cn += 1
                }
            }
        }
        let score = (cp * n_neg - cn * n_pos).abs();
        let rule: Vec<(String, String)> = choice
            .iter()
            .enumerate()
            .filter_map(|(k, ch)| ch.map(|v| (protected[k].to_string(), values[k][v].clone())))
            .collect();
        if score > best {
            best = score;
            argmax = vec![rule];
        } else if score == best {
            argmax.push(rule);
        }
        // odometer over None, Some(0), .., Some(len-1)
        let mut k = 0;
        loop {
            if k == cols.len() {
                return (best as f64 / (n_pos * n_neg) as f64, argmax);
            }
            choice[k] = match choice[k] {
                None if !values[k].is_empty() => Some(0),
                Some(v) if v + 1 < values[k].len() => Some(v + 1),
                _ => None,
            };
            if choice[k].is_some() {
                break;
            }
            k += 1;
        }
    }
}

pub fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn index_schema(cards: &[usize]) -> Schema {
    let features = cards
        .iter()
        .enumerate()
        .map(|(i, &k)| FeatureSpec::categorical(format!("f{i}"), (0..k).map(|c| format!("c{c}"))).unwrap())
        .collect();
    Schema::new(features, None).unwrap()
}

/// Random encoded table with a target whose rate depends on the first feature.
pub fn random_table(rng: &mut ChaCha8Rng, n: usize, cards: &[usize]) -> EncodedTable {
    let schema = index_schema(cards);
    let d = cards.len();
    // skewed category weights so some cells are rare or empty
    let weights: Vec<Vec<f64>> = cards
        .iter()
        .map(|&k| (0..k).map(|_| rng.random_range(0.05..1.0)).collect())
        .collect();
    let rates: Vec<f64> = (0..cards.first().copied().unwrap_or(1)).map(|_| rng.random_range(0.1..0.9)).collect();
    let mut cells = Vec::with_capacity(n * d);
    let mut target = Vec::with_capacity(n);
    for i in 0..n {
        let mut first = 0u32;
        for (f, w) in weights.iter().enumerate() {
            let total: f64 = w.iter().sum();
            let mut u = rng.random_range(0.0..total);
            let mut c = 0;
            while c + 1 < w.len() && u >= w[c] {
                u -= w[c];
                c += 1;
            }
            if f == 0 {
                first = c as u32;
            }
            cells.push(c as u32);
        }
        let p = if d == 0 { 0.5 } else { rates[first as usize] };
        // force both classes to be present
        target.push(if i == 0 { true } else if i == 1 { false } else { rng.random_bool(p) });
    }
    EncodedTable::new(schema, n, cells, Some(target)).unwrap()
}

/// Two samples over `cards.len()` features. Sample 2 is uniform; sample 1
/// mixes in rows forced into `planted` so that the population gap of the
/// planted rule is exactly `shift`.
pub fn planted_pair(
    rng: &mut ChaCha8Rng,
    n: usize,
    cards: &[usize],
    planted: &[(usize, usize)],
    shift: f64,
) -> (RawTable, RawTable) {
    let base: f64 = planted.iter().map(|&(f, _)| 1.0 / cards[f] as f64).product();
    let w = shift / (1.0 - base);
    let columns: Vec<String> = (0..cards.len()).map(|f| format!("f{f}")).collect();
    let uniform_row = |rng: &mut ChaCha8Rng| -> Vec<usize> { cards.iter().map(|&k| rng.random_range(0..k)).collect() };
    let to_raw = |rows: Vec<Vec<usize>>| {
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(|c| Some(format!("c{c}"))).collect())
            .collect();
        RawTable::new(columns.clone(), rows).unwrap()
    };
    let mut first = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = uniform_row(rng);
        if rng.random_bool(w) {
            for &(f, c) in planted {
                row[f] = c;
            }
        }
        first.push(row);
    }
    let second = (0..n).map(|_| uniform_row(rng)).collect();
    (to_raw(first), to_raw(second))
}

/// Random conjunction of `k` literals over distinct features.
pub fn random_rule(rng: &mut ChaCha8Rng, cards: &[usize], k: usize) -> Vec<(usize, usize)> {
    let mut features: Vec<usize> = (0..cards.len()).collect();
    for i in 0..k {
        let j = rng.random_range(i..features.len());
        features.swap(i, j);
    }
    let mut lits: Vec<(usize, usize)> = features[..k].iter().map(|&f| (f, rng.random_range(0..cards[f]))).collect();
    lits.sort();
    lits
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn label_counts(raw: &RawTable, col: &str) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    for v in raw.column(col).unwrap().flatten() {
        *m.entry(v.to_string()).or_default() += 1;
    }
    m
}
