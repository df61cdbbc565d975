//! Helpers for the acceptance run: a scoreboard of criteria and the fixed
//! instance families the criteria are stated over.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use udisc::linalg::CMatrix;
use udisc::similar::{self, DiagonalSpec, SimilarClassSpec};
use udisc::states::DiscriminationInstance;

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Runs criteria one after another, printing a PASS or FAIL line for each.
/// A panicking criterion counts as a failure and does not stop the rest.
#[derive(Debug, Default)]
pub struct Scoreboard {
    pub results: Vec<(String, bool)>,
}

impl Scoreboard {
    pub fn run(&mut self, label: &str, body: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let verdict = match panic::catch_unwind(AssertUnwindSafe(body)) {
            Ok(v) => v,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Verdict::new(false, format!("panicked: {msg}"))
            }
        };
        let tag = if verdict.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} {label}: {} [{:.2} s]",
            verdict.detail,
            start.elapsed().as_secs_f64()
        );
        self.results.push((label.to_string(), verdict.pass));
    }

    pub fn failures(&self) -> Vec<&str> {
        self.results
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(l, _)| l.as_str())
            .collect()
    }
}

/// Pure pair with overlap `c` as a one-plane similar-class instance.
pub fn pure_pair(c: f64, eta1: f64) -> DiscriminationInstance {
    let spec = SimilarClassSpec {
        d: 1,
        r_mat: CMatrix::identity(1),
        thetas: vec![c.acos()],
        eta1,
    };
    similar::generate(&spec).expect("valid pure pair").0
}

/// Ranks cycle through 1, 2, 3.
pub fn rank_for(k: u64) -> usize {
    1 + (k % 3) as usize
}

/// The seeded similar-class family: spec `k` has rank `rank_for(k)`.
pub fn similar_family(seeds: std::ops::Range<u64>) -> Vec<SimilarClassSpec> {
    seeds.map(|k| similar::random_spec(rank_for(k), k)).collect()
}

/// The seeded diagonal-canonical family, ranks 2 and 3 alternating; a single
/// plane would force `r = s = 1`.
pub fn diagonal_family(seeds: std::ops::Range<u64>) -> Vec<DiagonalSpec> {
    seeds
        .map(|k| similar::random_diagonal_spec(2 + (k % 2) as usize, k))
        .collect()
}

pub fn off_diagonal_magnitude(m: &CMatrix) -> f64 {
    let mut largest: f64 = 0.0;
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if i != j {
                largest = largest.max(m[(i, j)].norm());
            }
        }
    }
    largest
}
