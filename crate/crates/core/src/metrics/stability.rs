//! Ranking stability under dialogue sub-sampling.
//!
//! For each sample size `S`, draw `S` dialogues without replacement from
//! every ordered pair's pool, recompute the pooled matrix, `C_j` and the
//! ranking, and count how often the ranking equals the reference exactly.
//! Repeat `R` times. Each `(S, repeat)` cell has its own random stream
//! derived from the seed, so results do not depend on thread scheduling.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::rates::{overall_rates, rank_bots, GridCell, PairPools, RateGrid};
use super::MetricsError;
use crate::model::BotId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCurve {
    pub reference: Vec<BotId>,
    pub repeats: usize,
    /// `(S, agreement)` in the order the sample sizes were given.
    pub agreement: Vec<(usize, f64)>,
}

impl StabilityCurve {
    pub fn at(&self, s: usize) -> Option<f64> {
        self.agreement.iter().find(|(x, _)| *x == s).map(|(_, a)| *a)
    }
}

fn cell_seed(seed: u64, s_index: usize, repeat: usize) -> u64 {
    let mut h = seed ^ 0x5851_f42d_4c95_7f2d;
    for x in [s_index as u64, repeat as u64] {
        h = (h ^ x).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        h ^= h >> 29;
    }
    h
}

/// Whether one sub-sample reproduces `reference`. Undefined cells and ties
/// count as disagreement.
fn sample_agrees(pools: &PairPools, reference: &[BotId], s: usize, rng: &mut ChaCha8Rng) -> bool {
    let n = pools.bots().len();
    let mut cells = vec![vec![GridCell::NotRun; n]; n];
    for (&(i, j), pool) in pools.pools() {
        let mut inquiries = 0;
        let mut contradictions = 0;
        for k in index::sample(rng, pool.len(), s) {
            inquiries += pool[k].inquiries;
            contradictions += pool[k].contradictions;
        }
        cells[i][j] = if inquiries == 0 {
            GridCell::Undefined
        } else {
            GridCell::Rate(contradictions as f64 / inquiries as f64)
        };
    }
    let grid = RateGrid {
        bots: pools.bots().to_vec(),
        cells,
    };
    match overall_rates(&grid) {
        Ok(overall) => {
            let ranking = rank_bots(&overall);
            !ranking.has_ties() && ranking.order == reference
        }
        Err(_) => false,
    }
}

pub fn stability_curve(
    pools: &PairPools,
    reference: &[BotId],
    s_values: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<StabilityCurve, MetricsError> {
    let mut sorted_ref = reference.to_vec();
    sorted_ref.sort();
    let mut sorted_bots = pools.bots().to_vec();
    sorted_bots.sort();
    if sorted_ref != sorted_bots {
        return Err(MetricsError::Argument(
            "reference ranking must list every bot in the pool exactly once".into(),
        ));
    }
    if repeats == 0 || s_values.is_empty() {
        return Err(MetricsError::Argument("need at least one sample size and one repeat".into()));
    }
    let max_s = *s_values.iter().max().expect("nonempty");
    if s_values.contains(&0) {
        return Err(MetricsError::Argument("sample sizes must be positive".into()));
    }
    for (&(i, j), pool) in pools.pools() {
        if pool.len() < max_s {
            return Err(MetricsError::PoolTooSmall {
                partner: pools.bots()[i].clone(),
                evaluated: pools.bots()[j].clone(),
                size: pool.len(),
                needed: max_s,
            });
        }
    }

    let agreement = s_values
        .iter()
        .enumerate()
        .map(|(s_index, &s)| {
            let hits = (0..repeats)
                .into_par_iter()
                .filter(|&r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, s_index, r));
                    sample_agrees(pools, reference, s, &mut rng)
                })
                .count();
            (s, hits as f64 / repeats as f64)
        })
        .collect();
    Ok(StabilityCurve {
        reference: reference.to_vec(),
        repeats,
        agreement,
    })
}

/// [`stability_curve`] with `dropped` removed from the pools and from the
/// reference ranking.
pub fn leave_one_out_stability(
    pools: &PairPools,
    reference: &[BotId],
    dropped: &BotId,
    s_values: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<StabilityCurve, MetricsError> {
    let reduced = pools.without(dropped)?;
    let reference: Vec<BotId> = reference.iter().filter(|b| *b != dropped).cloned().collect();
    stability_curve(&reduced, &reference, s_values, repeats, seed)
}

/// `min, min+step, ..` up to and including `max`.
pub fn sample_sizes(min: usize, max: usize, step: usize) -> Vec<usize> {
    (min.max(1)..=max).step_by(step.max(1)).collect()
}
