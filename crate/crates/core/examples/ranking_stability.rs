//! How often a bootstrap subsample of `S` dialogues per pair reproduces a
//! reference ranking, for the full pool and with one bot left out.

use std::collections::BTreeMap;

use aih::metrics::{leave_one_out_stability, sample_sizes, stability_curve, DialogueTally, PairPools};
use aih::model::BotId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let names = ["A", "B", "C"];
    let bots: Vec<BotId> = names.iter().map(|b| BotId::new(*b).unwrap()).collect();
    // per-bot contradiction probability, identical for every partner
    let p = [0.20, 0.30, 0.35];

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pools = BTreeMap::new();
    for i in 0..3 {
        for j in 0..3 {
            let tallies = (0..200)
                .map(|m| {
                    let contradictions = (0..5).filter(|_| rng.random_bool(p[j])).count();
                    DialogueTally {
                        dialogue_id: format!("{}-{}-{m:04}", names[i], names[j]),
                        inquiries: 5,
                        contradictions,
                    }
                })
                .collect();
            pools.insert((i, j), tallies);
        }
    }
    let pools = PairPools::new(bots.clone(), pools).expect("pools cover the bots");

    let s = sample_sizes(10, 100, 10);
    let full = stability_curve(&pools, &bots, &s, 500, 1).unwrap();
    let no_a = leave_one_out_stability(&pools, &bots, &bots[0], &s, 500, 2).unwrap();
    println!("S    all    without A");
    for ((size, a), (_, b)) in full.agreement.iter().zip(&no_a.agreement) {
        println!("{size:<4} {a:.3}  {b:.3}");
    }
}
