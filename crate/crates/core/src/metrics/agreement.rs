//! Agreement between automatic and human decisions, and between annotators.
//!
//! Labels are 0/1 with contradiction as the positive class. Pearson's r on two
//! binary vectors is the phi coefficient; it is computed with the ordinary
//! formula and is undefined when either vector is constant.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::MetricsError;
use crate::model::{BotId, Dialogue, Judgment};

/// F1 of `predicted` against `truth`. `None` when neither vector has a
/// positive label.
pub fn f1_score(predicted: &[bool], truth: &[bool]) -> Option<f64> {
    assert_eq!(predicted.len(), truth.len(), "label vectors differ in length");
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    (denom > 0).then(|| (2 * tp) as f64 / denom as f64)
}

/// Pearson correlation. `None` for fewer than two points or a constant
/// vector.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "vectors differ in length");
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx <= 0.0 || vy <= 0.0 {
        return None;
    }
    Some(((n * sxy - sx * sy) / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

fn as_f64(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&b| f64::from(u8::from(b))).collect()
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub tau: f64,
    /// Mean automatic label.
    pub contradiction_rate: f64,
    pub f1: Option<f64>,
    pub pearson_r: Option<f64>,
    /// Inquiry pairs judged by both sides.
    pub n: usize,
}

fn matched<'a>(auto: &'a [Judgment], human: &[Judgment]) -> Result<Vec<(&'a Judgment, bool)>, MetricsError> {
    let human: HashMap<(&str, u32), bool> = human.iter().map(|j| (j.key(), j.contradiction)).collect();
    let mut out = Vec::new();
    for a in auto {
        if let Some(&h) = human.get(&a.key()) {
            if a.score.is_none() {
                return Err(MetricsError::MissingScore {
                    dialogue_id: a.dialogue_id.clone(),
                    turn_k: a.turn_k,
                });
            }
            out.push((a, h));
        }
    }
    if out.is_empty() {
        return Err(MetricsError::DisjointKeys);
    }
    Ok(out)
}

fn report(pairs: &[(&Judgment, bool)], tau: f64) -> AgreementReport {
    let predicted: Vec<bool> = pairs.iter().map(|(a, _)| a.score.expect("checked") > tau).collect();
    let truth: Vec<bool> = pairs.iter().map(|(_, h)| *h).collect();
    let positives = predicted.iter().filter(|&&p| p).count();
    AgreementReport {
        tau,
        contradiction_rate: positives as f64 / predicted.len() as f64,
        f1: f1_score(&predicted, &truth),
        pearson_r: pearson(&as_f64(&predicted), &as_f64(&truth)),
        n: predicted.len(),
    }
}

/// Compares automatic labels, re-thresholded at `tau` from stored scores,
/// with human majority decisions on the inquiry pairs both sides judged.
pub fn auto_human_agreement(auto: &[Judgment], human: &[Judgment], tau: f64) -> Result<AgreementReport, MetricsError> {
    Ok(report(&matched(auto, human)?, tau))
}

pub fn tau_sweep(auto: &[Judgment], human: &[Judgment], taus: &[f64]) -> Result<Vec<AgreementReport>, MetricsError> {
    if taus.is_empty() {
        return Err(MetricsError::Argument("tau sweep needs at least one threshold".into()));
    }
    let pairs = matched(auto, human)?;
    Ok(taus.iter().map(|&tau| report(&pairs, tau)).collect())
}

/// Per evaluated bot: the mean over annotators of Pearson's r between the
/// annotator's labels and the majority decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterAnnotatorReport {
    /// `None` when every annotator of that bot was excluded.
    pub per_bot: Vec<(BotId, Option<f64>)>,
    /// `(bot, annotator)` whose labels or majority vector were constant.
    pub excluded: Vec<(BotId, String)>,
}

impl InterAnnotatorReport {
    /// Mean over bots with a defined value.
    pub fn average(&self) -> Option<f64> {
        let vals: Vec<f64> = self.per_bot.iter().filter_map(|(_, r)| *r).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// An annotator's own labels next to the majority labels of the same items.
type LabelPairs = (Vec<f64>, Vec<f64>);

/// Groups human judgments by the evaluated bot (Chatbot2) of their dialogue.
/// Judgments without votes are ignored.
pub fn inter_annotator(bots: &[BotId], dialogues: &[Dialogue], human: &[Judgment]) -> Result<InterAnnotatorReport, MetricsError> {
    let evaluated: HashMap<&str, &BotId> = dialogues.iter().map(|d| (d.dialogue_id.as_str(), &d.bot2)).collect();
    let mut per_bot: BTreeMap<&BotId, BTreeMap<&str, LabelPairs>> = BTreeMap::new();
    for j in human {
        let Some(votes) = &j.votes else { continue };
        let bot = *evaluated
            .get(j.dialogue_id.as_str())
            .ok_or_else(|| MetricsError::UnknownDialogue(j.dialogue_id.clone()))?;
        if !bots.contains(bot) {
            return Err(MetricsError::UnknownBot(bot.clone()));
        }
        let majority = f64::from(u8::from(j.contradiction));
        for v in votes {
            let entry = per_bot.entry(bot).or_default().entry(v.annotator.as_str()).or_default();
            entry.0.push(f64::from(v.label));
            entry.1.push(majority);
        }
    }
    let mut out = InterAnnotatorReport {
        per_bot: Vec::new(),
        excluded: Vec::new(),
    };
    for bot in bots {
        let Some(annotators) = per_bot.get(bot) else { continue };
        let mut rs = Vec::new();
        for (annotator, (own, majority)) in annotators {
            match pearson(own, majority) {
                Some(r) => rs.push(r),
                None => out.excluded.push((bot.clone(), annotator.to_string())),
            }
        }
        let mean = (!rs.is_empty()).then(|| rs.iter().sum::<f64>() / rs.len() as f64);
        out.per_bot.push((bot.clone(), mean));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JudgmentSource, Vote};

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    fn auto(scores: &[f64]) -> Vec<Judgment> {
        scores.iter().enumerate().map(|(k, &s)| Judgment::auto("d", k as u32, s, 0.15)).collect()
    }

    fn human(labels: &[bool]) -> Vec<Judgment> {
        labels
            .iter()
            .enumerate()
            .map(|(k, &c)| Judgment {
                dialogue_id: "d".into(),
                turn_k: k as u32,
                score: None,
                contradiction: c,
                tau: None,
                source: JudgmentSource::Human,
                votes: None,
            })
            .collect()
    }

    #[test]
    fn identical_vectors() {
        let v = bits("1100110010");
        assert_eq!(f1_score(&v, &v), Some(1.0));
        assert_eq!(pearson(&as_f64(&v), &as_f64(&v)), Some(1.0));
    }

    #[test]
    fn all_positive_against_half() {
        let p = bits("1111111111");
        let t = bits("1111100000");
        assert_eq!(f1_score(&p, &t), Some(2.0 / 3.0));
        assert_eq!(pearson(&as_f64(&p), &as_f64(&t)), None);
    }

    #[test]
    fn complements() {
        let p = bits("1010101010");
        let t = bits("0101010101");
        assert_eq!(f1_score(&p, &t), Some(0.0));
        assert_eq!(pearson(&as_f64(&p), &as_f64(&t)), Some(-1.0));
    }

    #[test]
    fn no_positives_anywhere() {
        let z = bits("0000");
        assert_eq!(f1_score(&z, &z), None);
    }

    #[test]
    fn sweep_rethresholds_stored_scores() {
        let a = auto(&[0.05, 0.12, 0.2, 0.4, 0.6, 0.9]);
        let h = human(&bits("001111"));
        let rows = tau_sweep(&a, &h, &[0.1, 0.15, 0.3, 0.5]).unwrap();
        let crs: Vec<f64> = rows.iter().map(|r| r.contradiction_rate).collect();
        assert_eq!(crs, [5.0 / 6.0, 4.0 / 6.0, 3.0 / 6.0, 2.0 / 6.0]);
        assert_eq!(rows[1].f1, Some(1.0));
        assert_eq!(rows[1].pearson_r, Some(1.0));
        let all = auto(&[0.2, 0.3]);
        assert_eq!(auto_human_agreement(&all, &human(&bits("10")), 0.0).unwrap().contradiction_rate, 1.0);
    }

    #[test]
    fn disjoint_keys_are_an_error() {
        let a = auto(&[0.5]);
        let mut h = human(&[true]);
        h[0].dialogue_id = "other".into();
        assert_eq!(auto_human_agreement(&a, &h, 0.15), Err(MetricsError::DisjointKeys));
        assert!(tau_sweep(&a, &human(&[true]), &[]).is_err());
    }

    fn voted(k: u32, labels: [u8; 3]) -> Judgment {
        let votes: Vec<Vote> = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| Vote { annotator: format!("a{i}"), label })
            .collect();
        crate::recognition::aggregate_votes("A-B-0001", k, votes).unwrap()
    }

    fn setup() -> (Vec<BotId>, Vec<Dialogue>) {
        let d = crate::model::fixtures::dialogue_with_inquiry();
        (vec![d.bot1.clone(), d.bot2.clone()], vec![d])
    }

    #[test]
    fn unanimous_annotators_agree_perfectly() {
        let (bots, dialogues) = setup();
        let js = [voted(1, [1, 1, 1]), voted(2, [0, 0, 0]), voted(3, [1, 1, 1]), voted(4, [0, 0, 0])];
        let r = inter_annotator(&bots, &dialogues, &js).unwrap();
        assert_eq!(r.per_bot, vec![(dialogues[0].bot2.clone(), Some(1.0))]);
        assert!(r.excluded.is_empty());
    }

    #[test]
    fn anti_correlated_annotator_pulls_mean_down() {
        let (bots, dialogues) = setup();
        let js = [voted(1, [1, 1, 0]), voted(2, [1, 1, 0]), voted(3, [0, 0, 1]), voted(4, [0, 0, 1])];
        let r = inter_annotator(&bots, &dialogues, &js).unwrap();
        let mean = r.per_bot[0].1.unwrap();
        assert!((mean - 1.0 / 3.0).abs() < 1e-12, "{mean}");
    }

    #[test]
    fn constant_annotator_is_excluded() {
        let (bots, dialogues) = setup();
        let js = [voted(1, [1, 1, 1]), voted(2, [0, 0, 1]), voted(3, [1, 1, 1]), voted(4, [0, 0, 1])];
        let r = inter_annotator(&bots, &dialogues, &js).unwrap();
        assert_eq!(r.excluded, vec![(dialogues[0].bot2.clone(), "a2".to_string())]);
        assert_eq!(r.per_bot[0].1, Some(1.0));
    }
}
