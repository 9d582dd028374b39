//! Maximal marginal relevance re-ranking.
//!
//! Each step picks the unselected candidate maximising
//! `lambda * sim(query, c) - (1 - lambda) * max_{s in selected} sim(c, s)`,
//! where `sim` is the collection metric's similarity. The first pick is the
//! most query-similar candidate. Ties go to the earlier candidate.

use serde::{Deserialize, Serialize};

use super::{DistanceMetric, SearchHit, StoreError};

pub const DEFAULT_MMR_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmrParams {
    pub lambda: f64,
    pub candidate_pool: usize,
    pub result_count: usize,
}

impl MmrParams {
    pub fn new(lambda: f64, candidate_pool: usize, result_count: usize) -> Result<Self, StoreError> {
        let params = Self {
            lambda,
            candidate_pool,
            result_count,
        };
        params.validate()?;
        Ok(params)
    }

    /// Default lambda 0.5 and a pool of three times the result count.
    pub fn for_results(result_count: usize) -> Self {
        Self {
            lambda: DEFAULT_MMR_LAMBDA,
            candidate_pool: result_count.saturating_mul(3),
            result_count,
        }
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(StoreError::InvalidArgument(format!(
                "lambda {} outside [0, 1]",
                self.lambda
            )));
        }
        if self.result_count == 0 {
            return Err(StoreError::InvalidArgument("result_count must be at least 1".into()));
        }
        if self.candidate_pool < self.result_count {
            return Err(StoreError::InvalidArgument(format!(
                "candidate_pool {} is smaller than result_count {}",
                self.candidate_pool, self.result_count
            )));
        }
        Ok(())
    }
}

pub fn mmr_rerank(
    query: &[f32],
    candidates: &[(String, Vec<f32>)],
    params: MmrParams,
    metric: DistanceMetric,
) -> Result<Vec<SearchHit>, StoreError> {
    params.validate()?;
    if candidates.is_empty() {
        return Err(StoreError::EmptyCandidates);
    }
    let n = candidates.len();
    let relevance = candidates
        .iter()
        .map(|(_, v)| metric.relatedness(query, v))
        .collect::<Result<Vec<_>, _>>()?;

    let mut selected: Vec<usize> = Vec::with_capacity(params.result_count.min(n));
    let mut chosen = vec![false; n];
    // Running max similarity of each candidate to anything already selected.
    let mut redundancy = vec![f64::NEG_INFINITY; n];

    while selected.len() < params.result_count.min(n) {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !chosen[*i]) {
            let score = if selected.is_empty() {
                relevance[i]
            } else {
                params.lambda * relevance[i] - (1.0 - params.lambda) * redundancy[i]
            };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let (pick, _) = best.expect("an unselected candidate remains");
        chosen[pick] = true;
        selected.push(pick);
        for i in (0..n).filter(|i| !chosen[*i]) {
            let sim = metric.relatedness(&candidates[i].1, &candidates[pick].1)?;
            redundancy[i] = redundancy[i].max(sim);
        }
    }

    selected
        .into_iter()
        .enumerate()
        .map(|(pos, i)| {
            Ok(SearchHit {
                object_id: candidates[i].0.clone(),
                distance: metric.distance(query, &candidates[i].1)?,
                rank: pos + 1,
            })
        })
        .collect()
}
