//! Pair contradiction rates `C_ij`, overall rates `C_j` and rankings.
//!
//! Orientation: row `i` is the partner (Chatbot1), column `j` the evaluated
//! bot (Chatbot2). `C_j` is the unweighted mean of column `j`.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::MetricsError;
use crate::model::{BotId, Dialogue, Judgment};

/// Judged inquiry pairs and contradictions of one dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DialogueTally {
    pub dialogue_id: String,
    pub inquiries: usize,
    pub contradictions: usize,
}

/// How one pair's dialogues are reduced to a rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Aggregation {
    /// Total contradictions over total judged inquiry pairs.
    #[default]
    Pooled,
    /// Mean of per-dialogue rates over dialogues with at least one judged
    /// inquiry pair.
    PerDialogue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellStats {
    /// `None` when no inquiry pair was judged.
    pub rate: Option<f64>,
    pub inquiries: usize,
    pub contradictions: usize,
    pub dialogues: usize,
}

impl CellStats {
    pub fn from_tallies(tallies: &[DialogueTally], aggregation: Aggregation) -> Self {
        let inquiries: usize = tallies.iter().map(|t| t.inquiries).sum();
        let contradictions: usize = tallies.iter().map(|t| t.contradictions).sum();
        let rate = match aggregation {
            Aggregation::Pooled => (inquiries > 0).then(|| contradictions as f64 / inquiries as f64),
            Aggregation::PerDialogue => {
                let rates: Vec<f64> = tallies
                    .iter()
                    .filter(|t| t.inquiries > 0)
                    .map(|t| t.contradictions as f64 / t.inquiries as f64)
                    .collect();
                (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
            }
        };
        Self {
            rate,
            inquiries,
            contradictions,
            dialogues: tallies.len(),
        }
    }
}

/// Pooled rate over the judgments of one ordered pair.
pub fn pair_rate(judgments: &[Judgment]) -> CellStats {
    let contradictions = judgments.iter().filter(|j| j.contradiction).count();
    let inquiries = judgments.len();
    let dialogues = judgments
        .iter()
        .map(|j| j.dialogue_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    CellStats {
        rate: (inquiries > 0).then(|| contradictions as f64 / inquiries as f64),
        inquiries,
        contradictions,
        dialogues,
    }
}

/// Judged dialogues per ordered pair `(partner, evaluated)`, indices into
/// `bots`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPools {
    bots: Vec<BotId>,
    pools: BTreeMap<(usize, usize), Vec<DialogueTally>>,
}

impl PairPools {
    pub fn new(bots: Vec<BotId>, pools: BTreeMap<(usize, usize), Vec<DialogueTally>>) -> Result<Self, MetricsError> {
        let n = bots.len();
        if let Some(&(i, j)) = pools.keys().find(|(i, j)| *i >= n || *j >= n) {
            return Err(MetricsError::Argument(format!("pair ({i}, {j}) outside a {n}-bot registry")));
        }
        Ok(Self { bots, pools })
    }

    /// Groups judgments by the ordered pair of the dialogue they belong to.
    /// Every dialogue contributes a tally, possibly with zero inquiries.
    pub fn from_judgments(bots: &[BotId], dialogues: &[Dialogue], judgments: &[Judgment]) -> Result<Self, MetricsError> {
        let index: HashMap<&BotId, usize> = bots.iter().enumerate().map(|(i, b)| (b, i)).collect();
        let mut by_dialogue: HashMap<&str, ((usize, usize), DialogueTally)> = HashMap::new();
        let mut order = Vec::new();
        for d in dialogues {
            let i = *index.get(&d.bot1).ok_or_else(|| MetricsError::UnknownBot(d.bot1.clone()))?;
            let j = *index.get(&d.bot2).ok_or_else(|| MetricsError::UnknownBot(d.bot2.clone()))?;
            let tally = DialogueTally {
                dialogue_id: d.dialogue_id.clone(),
                inquiries: 0,
                contradictions: 0,
            };
            if by_dialogue.insert(&d.dialogue_id, ((i, j), tally)).is_some() {
                return Err(MetricsError::Argument(format!("duplicate dialogue id `{}`", d.dialogue_id)));
            }
            order.push(d.dialogue_id.as_str());
        }
        for jd in judgments {
            let (_, tally) = by_dialogue
                .get_mut(jd.dialogue_id.as_str())
                .ok_or_else(|| MetricsError::UnknownDialogue(jd.dialogue_id.clone()))?;
            tally.inquiries += 1;
            tally.contradictions += usize::from(jd.contradiction);
        }
        let mut pools: BTreeMap<(usize, usize), Vec<DialogueTally>> = BTreeMap::new();
        for id in order {
            let (pair, tally) = by_dialogue.remove(id).expect("inserted above");
            pools.entry(pair).or_default().push(tally);
        }
        Self::new(bots.to_vec(), pools)
    }

    pub fn bots(&self) -> &[BotId] {
        &self.bots
    }

    pub fn pools(&self) -> &BTreeMap<(usize, usize), Vec<DialogueTally>> {
        &self.pools
    }

    pub fn pool(&self, partner: usize, evaluated: usize) -> Option<&[DialogueTally]> {
        self.pools.get(&(partner, evaluated)).map(Vec::as_slice)
    }

    /// The same pools without `dropped`, as partner or as evaluated bot.
    pub fn without(&self, dropped: &BotId) -> Result<Self, MetricsError> {
        let k = self
            .bots
            .iter()
            .position(|b| b == dropped)
            .ok_or_else(|| MetricsError::UnknownBot(dropped.clone()))?;
        let shift = |x: usize| if x > k { x - 1 } else { x };
        let pools = self
            .pools
            .iter()
            .filter(|((i, j), _)| *i != k && *j != k)
            .map(|(&(i, j), v)| ((shift(i), shift(j)), v.clone()))
            .collect();
        let bots = self.bots.iter().filter(|b| *b != dropped).cloned().collect();
        Self::new(bots, pools)
    }

    pub fn matrix(&self, aggregation: Aggregation) -> ContradictionMatrix {
        let n = self.bots.len();
        let mut cells = vec![vec![None; n]; n];
        for (&(i, j), tallies) in &self.pools {
            cells[i][j] = Some(CellStats::from_tallies(tallies, aggregation));
        }
        ContradictionMatrix {
            bots: self.bots.clone(),
            cells,
        }
    }
}

/// `N x N` pair statistics. `None` marks a pair that was not run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContradictionMatrix {
    pub bots: Vec<BotId>,
    pub cells: Vec<Vec<Option<CellStats>>>,
}

impl ContradictionMatrix {
    pub fn rate_grid(&self) -> RateGrid {
        RateGrid {
            bots: self.bots.clone(),
            cells: self
                .cells
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|c| match c {
                            None => GridCell::NotRun,
                            Some(CellStats { rate: None, .. }) => GridCell::Undefined,
                            Some(CellStats { rate: Some(r), .. }) => GridCell::Rate(*r),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GridCell {
    Rate(f64),
    /// Pair was run but no inquiry pair was judged.
    Undefined,
    /// Pair is not part of the campaign (e.g. self-pairs disabled).
    NotRun,
}

/// Rates only; the input of [`overall_rates`]. Published tables can be fed
/// in directly with [`RateGrid::from_rates`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateGrid {
    pub bots: Vec<BotId>,
    pub cells: Vec<Vec<GridCell>>,
}

impl RateGrid {
    /// `rows[i][j]` is `C_ij`: row = partner, column = evaluated bot.
    pub fn from_rates(bots: Vec<BotId>, rows: &[Vec<f64>]) -> Result<Self, MetricsError> {
        let n = bots.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(MetricsError::Argument(format!("rate table must be {n} x {n}")));
        }
        Ok(Self {
            bots,
            cells: rows.iter().map(|r| r.iter().map(|&x| GridCell::Rate(x)).collect()).collect(),
        })
    }
}

/// `C_j` for every bot, in registry order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverallRates(pub Vec<(BotId, f64)>);

impl OverallRates {
    pub fn get(&self, bot: &str) -> Option<f64> {
        self.0.iter().find(|(b, _)| b.as_str() == bot).map(|(_, r)| *r)
    }
}

/// Column means of the rate grid: `C_j = (1/N) sum_i C_ij`, over the pairs
/// that were run.
pub fn overall_rates(grid: &RateGrid) -> Result<OverallRates, MetricsError> {
    let n = grid.bots.len();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            match grid.cells[i][j] {
                GridCell::Rate(r) => {
                    sum += r;
                    count += 1;
                }
                GridCell::Undefined => {
                    return Err(MetricsError::UndefinedCell {
                        partner: grid.bots[i].clone(),
                        evaluated: grid.bots[j].clone(),
                    })
                }
                GridCell::NotRun => {}
            }
        }
        if count == 0 {
            return Err(MetricsError::Argument(format!("no pairs evaluate `{}`", grid.bots[j])));
        }
        out.push((grid.bots[j].clone(), sum / count as f64));
    }
    Ok(OverallRates(out))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingReport {
    pub overall: OverallRates,
    /// Most consistent (lowest `C_j`) first. Exact ties are ordered by id.
    pub order: Vec<BotId>,
    /// Groups of bots with exactly equal `C_j`.
    pub ties: Vec<Vec<BotId>>,
}

impl RankingReport {
    pub fn has_ties(&self) -> bool {
        !self.ties.is_empty()
    }
}

pub fn rank_bots(overall: &OverallRates) -> RankingReport {
    let mut sorted = overall.0.clone();
    sorted.sort_by(|(a, x), (b, y)| x.total_cmp(y).then_with(|| a.cmp(b)));
    let mut ties = Vec::new();
    let mut k = 0;
    while k < sorted.len() {
        let mut end = k + 1;
        while end < sorted.len() && sorted[end].1 == sorted[k].1 {
            end += 1;
        }
        if end - k > 1 {
            ties.push(sorted[k..end].iter().map(|(b, _)| b.clone()).collect());
        }
        k = end;
    }
    RankingReport {
        overall: overall.clone(),
        order: sorted.into_iter().map(|(b, _)| b).collect(),
        ties,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(names: &[&str]) -> Vec<BotId> {
        names.iter().map(|n| BotId::new(*n).unwrap()).collect()
    }

    fn judgment(id: &str, k: u32, c: bool) -> Judgment {
        Judgment::auto(id, k, if c { 0.9 } else { 0.1 }, 0.15)
    }

    #[test]
    fn pooled_pair_rate() {
        let js = [judgment("a", 1, true), judgment("a", 2, false), judgment("b", 1, true), judgment("b", 2, false)];
        let cell = pair_rate(&js);
        assert_eq!(cell.rate, Some(0.5));
        assert_eq!(cell.inquiries, 4);
        assert_eq!(cell.dialogues, 2);
        let zeros: Vec<Judgment> = (0..3).map(|k| judgment("a", k, false)).collect();
        assert_eq!(pair_rate(&zeros).rate, Some(0.0));
        assert_eq!(pair_rate(&[]).rate, None);
    }

    #[test]
    fn pooled_and_per_dialogue_differ() {
        let tallies = [
            DialogueTally { dialogue_id: "a".into(), inquiries: 1, contradictions: 1 },
            DialogueTally { dialogue_id: "b".into(), inquiries: 3, contradictions: 0 },
            DialogueTally { dialogue_id: "c".into(), inquiries: 0, contradictions: 0 },
        ];
        assert_eq!(CellStats::from_tallies(&tallies, Aggregation::Pooled).rate, Some(0.25));
        assert_eq!(CellStats::from_tallies(&tallies, Aggregation::PerDialogue).rate, Some(0.5));
    }

    #[test]
    fn column_means() {
        let grid = RateGrid::from_rates(ids(&["A", "B"]), &[vec![0.2, 0.4], vec![0.6, 0.8]]).unwrap();
        let overall = overall_rates(&grid).unwrap();
        assert!((overall.get("A").unwrap() - 0.4).abs() < 1e-15);
        assert!((overall.get("B").unwrap() - 0.6).abs() < 1e-15);
        let same = RateGrid::from_rates(ids(&["A", "B"]), &[vec![0.3, 0.3], vec![0.3, 0.3]]).unwrap();
        assert_eq!(overall_rates(&same).unwrap().get("A"), Some(0.3));
    }

    #[test]
    fn undefined_cell_is_named() {
        let mut grid = RateGrid::from_rates(ids(&["A", "B"]), &[vec![0.2, 0.4], vec![0.6, 0.8]]).unwrap();
        grid.cells[1][0] = GridCell::Undefined;
        match overall_rates(&grid).unwrap_err() {
            MetricsError::UndefinedCell { partner, evaluated } => {
                assert_eq!(partner.as_str(), "B");
                assert_eq!(evaluated.as_str(), "A");
            }
            e => panic!("{e}"),
        }
        grid.cells[1][0] = GridCell::NotRun;
        assert!((overall_rates(&grid).unwrap().get("A").unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ties_are_grouped() {
        let overall = OverallRates(vec![
            (BotId::new("Z").unwrap(), 0.3),
            (BotId::new("A").unwrap(), 0.3),
            (BotId::new("M").unwrap(), 0.1),
        ]);
        let r = rank_bots(&overall);
        assert_eq!(r.order, ids(&["M", "A", "Z"]));
        assert_eq!(r.ties, vec![ids(&["A", "Z"])]);
    }

    #[test]
    fn leaving_a_bot_out_reindexes() {
        let mut pools = BTreeMap::new();
        for i in 0..3 {
            for j in 0..3 {
                pools.insert((i, j), vec![DialogueTally { dialogue_id: format!("{i}{j}"), inquiries: 1, contradictions: 0 }]);
            }
        }
        let p = PairPools::new(ids(&["A", "B", "C"]), pools).unwrap();
        let q = p.without(&BotId::new("B").unwrap()).unwrap();
        assert_eq!(q.bots(), ids(&["A", "C"]).as_slice());
        assert_eq!(q.pool(1, 0).unwrap()[0].dialogue_id, "20");
        assert!(p.without(&BotId::new("X").unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn ranking_ignores_common_offsets(
            values in proptest::collection::vec(0u32..64, 1..6),
            offset in 0u32..64,
        ) {
            let bots: Vec<BotId> = (0..values.len()).map(|i| BotId::new(format!("b{i}")).unwrap()).collect();
            let to_overall = |shift: u32| OverallRates(
                bots.iter().cloned().zip(values.iter().map(|v| f64::from(v + shift) / 64.0)).collect()
            );
            let a = rank_bots(&to_overall(0));
            let b = rank_bots(&to_overall(offset));
            prop_assert_eq!(a.order, b.order);
            prop_assert_eq!(a.ties, b.ties);
        }
    }
}
