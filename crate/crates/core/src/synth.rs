//! Synthetic "marginally fair, intersectionally biased" scenario.
//!
//! Race × Age is a 3 × 4 grid of 24-row cells with an overall positive rate of
//! 1/4. Every race and every age bucket keeps that rate, but the cell
//! (Blue, 0-18) has no positives:
//!
//! | positives / 24 | 0-18 | 18-30 | 30-45 | 45-60 |
//! |----------------|------|-------|-------|-------|
//! | Green          | 9    | 5     | 5     | 5     |
//! | Blue           | 0    | 8     | 8     | 8     |
//! | Purple         | 9    | 5     | 5     | 5     |
//!
//! Splitting on the target gives 72 positive and 216 negative rows. A cell's
//! signed gap between the two splits is its excess positives over `p·n`
//! divided by `p(1-p)N`, so (Blue, 0-18) sits at `-24/216 = -1/9` and every
//! other cell at most half that, while single-feature rules have gap 0.
//!
//! The gendered variant splits each cell into 12 M and 12 F rows and gives F
//! a quarter (rounded down) of the cell's positives: 16 of 144 women are
//! positive against 72 of 288 overall, an ℓ∞ gap of 0.139.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tabular::RawTable;

pub const RACES: [&str; 3] = ["Green", "Blue", "Purple"];
pub const AGES: [&str; 4] = ["0-18", "18-30", "30-45", "45-60"];
pub const GENDERS: [&str; 2] = ["M", "F"];
pub const CELL_SIZE: usize = 24;
pub const DEFAULT_SEED: u64 = 0;

/// Positive rows in the (race, age) cell.
pub fn cell_positives(race: usize, age: usize) -> usize {
    match (RACES[race], age) {
        ("Blue", 0) => 0,
        ("Blue", _) => 8,
        (_, 0) => 9,
        _ => 5,
    }
}

/// Positive rows given to women in a cell of the gendered variant.
pub fn female_positives(race: usize, age: usize) -> usize {
    cell_positives(race, age) / 4
}

/// Builds the scenario table; rows are shuffled by `seed`, counts never change.
pub fn scenario(seed: u64, with_gender: bool) -> RawTable {
    let mut columns = vec!["Race".to_string(), "Age".to_string()];
    if with_gender {
        columns.push("Gender".into());
    }
    columns.push("Target".into());

    let mut rows: Vec<Vec<Option<String>>> = Vec::with_capacity(RACES.len() * AGES.len() * CELL_SIZE);
    let flag = |b: bool| Some(if b { "1" } else { "0" }.to_string());
    for (r, race) in RACES.iter().enumerate() {
        for (a, age) in AGES.iter().enumerate() {
            let pos = cell_positives(r, a);
            let half = CELL_SIZE / 2;
            for k in 0..CELL_SIZE {
                let mut row = vec![Some(race.to_string()), Some(age.to_string())];
                let positive = if with_gender {
                    // first half M, second half F
                    let female = k >= half;
                    row.push(Some(GENDERS[female as usize].to_string()));
                    let f_pos = female_positives(r, a);
                    if female {
                        k - half < f_pos
                    } else {
                        k < pos - f_pos
                    }
                } else {
                    k < pos
                };
                row.push(flag(positive));
                rows.push(row);
            }
        }
    }
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    RawTable::new(columns, rows).expect("rectangular by construction")
}
