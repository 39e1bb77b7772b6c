//! Pair tables in the published layout (rows = partner, columns = evaluated
//! bot, an `Avg.` row of column means), inquiry statistics, question
//! appropriateness, and the combined JSON report.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;

use super::agreement::{AgreementReport, InterAnnotatorReport};
use super::rates::{ContradictionMatrix, RankingReport};
use super::stability::StabilityCurve;
use super::MetricsError;
use crate::model::{AnnotationVote, BotId, Dialogue, Dimension, Judgment};

/// A value per ordered pair. `None` marks a pair with no data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairTable {
    pub title: String,
    pub bots: Vec<BotId>,
    pub cells: Vec<Vec<Option<f64>>>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn fmt_cell(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.decimals$}"))
}

impl PairTable {
    pub fn new(title: impl Into<String>, bots: Vec<BotId>, cells: Vec<Vec<Option<f64>>>) -> Self {
        Self {
            title: title.into(),
            bots,
            cells,
        }
    }

    pub fn from_matrix(title: impl Into<String>, matrix: &ContradictionMatrix) -> Self {
        let cells = matrix
            .cells
            .iter()
            .map(|row| row.iter().map(|c| c.and_then(|c| c.rate)).collect())
            .collect();
        Self::new(title, matrix.bots.clone(), cells)
    }

    /// The `Avg.` row: mean over partners for each evaluated bot.
    pub fn column_means(&self) -> Vec<Option<f64>> {
        (0..self.bots.len()).map(|j| mean(self.cells.iter().map(|row| row[j]))).collect()
    }

    /// Mean over evaluated bots for each partner.
    pub fn row_means(&self) -> Vec<Option<f64>> {
        self.cells.iter().map(|row| mean(row.iter().copied())).collect()
    }

    /// Mean of every defined cell.
    pub fn grand_mean(&self) -> Option<f64> {
        mean(self.cells.iter().flat_map(|row| row.iter().copied()))
    }

    /// Aligned text with an `Avg.` column of row means and an `Avg.` row of
    /// column means; the corner holds the grand mean.
    pub fn to_text(&self, decimals: usize) -> String {
        let width = self
            .bots
            .iter()
            .map(|b| b.as_str().len())
            .max()
            .unwrap_or(0)
            .max(decimals + 3)
            .max(4);
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        let _ = write!(out, "{:<width$}", "");
        for b in &self.bots {
            let _ = write!(out, "  {:>width$}", b.as_str());
        }
        let _ = writeln!(out, "  {:>width$}", "Avg.");
        let row_means = self.row_means();
        for (i, row) in self.cells.iter().enumerate() {
            let _ = write!(out, "{:<width$}", self.bots[i].as_str());
            for &c in row {
                let _ = write!(out, "  {:>width$}", fmt_cell(c, decimals));
            }
            let _ = writeln!(out, "  {:>width$}", fmt_cell(row_means[i], decimals));
        }
        let _ = write!(out, "{:<width$}", "Avg.");
        for c in self.column_means() {
            let _ = write!(out, "  {:>width$}", fmt_cell(c, decimals));
        }
        let _ = writeln!(out, "  {:>width$}", fmt_cell(self.grand_mean(), decimals));
        out
    }

    /// CSV at full precision; empty fields for missing cells.
    pub fn to_csv(&self) -> String {
        let field = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("partner");
        for b in &self.bots {
            let _ = write!(out, ",{b}");
        }
        out.push_str(",avg\n");
        let row_means = self.row_means();
        for (i, row) in self.cells.iter().enumerate() {
            out.push_str(self.bots[i].as_str());
            for &c in row {
                let _ = write!(out, ",{}", field(c));
            }
            let _ = writeln!(out, ",{}", field(row_means[i]));
        }
        out.push_str("avg");
        for c in self.column_means() {
            let _ = write!(out, ",{}", field(c));
        }
        let _ = writeln!(out, ",{}", field(self.grand_mean()));
        out
    }
}

fn pair_index<'a>(bots: &[BotId], dialogues: &'a [Dialogue]) -> Result<HashMap<&'a str, (usize, usize)>, MetricsError> {
    let position = |b: &BotId| bots.iter().position(|x| x == b).ok_or_else(|| MetricsError::UnknownBot(b.clone()));
    dialogues
        .iter()
        .map(|d| Ok((d.dialogue_id.as_str(), (position(&d.bot1)?, position(&d.bot2)?))))
        .collect()
}

/// Average inquiry pairs and contradictions per dialogue, per ordered pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InquiryStatistics {
    pub inquiries: PairTable,
    pub contradictions: PairTable,
}

/// Counts inquiries from the dialogues and contradictions from the
/// judgments. Pairs without dialogues are left empty.
pub fn inquiry_statistics(bots: &[BotId], dialogues: &[Dialogue], judgments: &[Judgment]) -> Result<InquiryStatistics, MetricsError> {
    let index = pair_index(bots, dialogues)?;
    let mut contradictions: HashMap<&str, usize> = HashMap::new();
    for j in judgments {
        if !index.contains_key(j.dialogue_id.as_str()) {
            return Err(MetricsError::UnknownDialogue(j.dialogue_id.clone()));
        }
        *contradictions.entry(j.dialogue_id.as_str()).or_default() += usize::from(j.contradiction);
    }
    let n = bots.len();
    let mut sums = vec![vec![(0usize, 0usize, 0usize); n]; n];
    for d in dialogues {
        let (i, j) = index[d.dialogue_id.as_str()];
        let cell = &mut sums[i][j];
        cell.0 += 1;
        cell.1 += d.inquiries.len();
        cell.2 += contradictions.get(d.dialogue_id.as_str()).copied().unwrap_or(0);
    }
    let table = |title: &str, pick: fn(&(usize, usize, usize)) -> usize| {
        let cells = sums
            .iter()
            .map(|row| row.iter().map(|c| (c.0 > 0).then(|| pick(c) as f64 / c.0 as f64)).collect())
            .collect();
        PairTable::new(title, bots.to_vec(), cells)
    };
    Ok(InquiryStatistics {
        inquiries: table("Inquiry pairs per dialogue", |c| c.1),
        contradictions: table("Contradictions per dialogue", |c| c.2),
    })
}

/// Majority-vote share of appropriate questions and relevant answers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppropriatenessSummary {
    pub appropriate: PairTable,
    pub relevant: PairTable,
    /// Over every annotated question, not averaged per pair.
    pub overall_appropriate: Option<f64>,
    pub overall_relevant: Option<f64>,
}

/// Reduces raw annotation votes to one majority label per inquiry pair and
/// dimension, then averages per ordered pair.
pub fn appropriateness_summary(
    bots: &[BotId],
    dialogues: &[Dialogue],
    votes: &[AnnotationVote],
) -> Result<AppropriatenessSummary, MetricsError> {
    let index = pair_index(bots, dialogues)?;
    // (dialogue, turn) -> (votes, appropriate, relevant)
    let mut tallies: BTreeMap<(&str, u32), (usize, usize, usize)> = BTreeMap::new();
    for v in votes {
        if !index.contains_key(v.dialogue_id.as_str()) {
            return Err(MetricsError::UnknownDialogue(v.dialogue_id.clone()));
        }
        let label = |dimension: Dimension| {
            v.label(dimension).map(usize::from).ok_or_else(|| MetricsError::MissingDimension {
                dimension,
                dialogue_id: v.dialogue_id.clone(),
                turn_k: v.turn_k,
                annotator: v.annotator.clone(),
            })
        };
        let appropriate = label(Dimension::QuestionAppropriate)?;
        let relevant = label(Dimension::AnswerRelevant)?;
        let t = tallies.entry((v.dialogue_id.as_str(), v.turn_k)).or_default();
        t.0 += 1;
        t.1 += appropriate;
        t.2 += relevant;
    }
    let n = bots.len();
    let mut sums = vec![vec![(0usize, 0usize, 0usize); n]; n];
    let mut totals = (0usize, 0usize, 0usize);
    for ((id, _), (count, appropriate, relevant)) in tallies {
        let a = usize::from(2 * appropriate > count);
        let r = usize::from(2 * relevant > count);
        let (i, j) = index[id];
        sums[i][j].0 += 1;
        sums[i][j].1 += a;
        sums[i][j].2 += r;
        totals.0 += 1;
        totals.1 += a;
        totals.2 += r;
    }
    let table = |title: &str, pick: fn(&(usize, usize, usize)) -> usize| {
        let cells = sums
            .iter()
            .map(|row| row.iter().map(|c| (c.0 > 0).then(|| pick(c) as f64 / c.0 as f64)).collect())
            .collect();
        PairTable::new(title, bots.to_vec(), cells)
    };
    let overall = |x: usize| (totals.0 > 0).then(|| x as f64 / totals.0 as f64);
    Ok(AppropriatenessSummary {
        appropriate: table("Appropriate questions", |c| c.1),
        relevant: table("Relevant answers", |c| c.2),
        overall_appropriate: overall(totals.1),
        overall_relevant: overall(totals.2),
    })
}

/// Everything one analysis run produced, as a single JSON document. Rates
/// keep full precision here.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<ContradictionMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<RankingReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<StabilityCurve>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub agreement: Vec<AgreementReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inter_annotator: Option<InterAnnotatorReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}
