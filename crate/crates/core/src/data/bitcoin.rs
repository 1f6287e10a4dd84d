use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::graph::{build_graph, WeightedArc, WeightedDigraph};
use crate::tensor::DenseMatrix;

/// Arc weights are floored here so that a −10 rating stays a valid arc.
pub const MIN_RATING_WEIGHT: f64 = 1e-6;

/// Train fractions per class: risky, trustworthy, neutral, unknown.
pub const BITCOIN_TRAIN_FRACTIONS: [f64; 4] = [0.2, 0.9, 0.9, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater: u64,
    pub ratee: u64,
    pub score: i32,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitcoinClass {
    Risky = 0,
    Trustworthy = 1,
    Neutral = 2,
    Unknown = 3,
}

impl BitcoinClass {
    pub const ALL: [BitcoinClass; 4] =
        [Self::Risky, Self::Trustworthy, Self::Neutral, Self::Unknown];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Risky => "risky",
            Self::Trustworthy => "trustworthy",
            Self::Neutral => "neutral",
            Self::Unknown => "unknown",
        }
    }
}

/// Maps a rating in [−10, 10] affinely onto [0, 1].
pub fn renormalize_ratings(score: f64) -> Result<f64, DataError> {
    if !(-10.0..=10.0).contains(&score) {
        return Err(DataError::RatingOutOfRange(score));
    }
    Ok(score / 20.0 + 0.5)
}

/// Keeps the latest record per (rater, ratee); equal timestamps fall back to
/// the higher score so the result does not depend on input order.
/// Output is sorted by (rater, ratee).
pub fn dedup_latest(records: &[RatingRecord]) -> Vec<RatingRecord> {
    let mut latest: BTreeMap<(u64, u64), RatingRecord> = BTreeMap::new();
    for r in records {
        latest
            .entry((r.rater, r.ratee))
            .and_modify(|cur| {
                if r.time
                    .total_cmp(&cur.time)
                    .then(r.score.cmp(&cur.score))
                    .is_gt()
                {
                    *cur = *r;
                }
            })
            .or_insert(*r);
    }
    latest.into_values().collect()
}

/// Class of a node from the ratings it received.
pub fn classify_received(scores: &[i32]) -> BitcoinClass {
    if scores.iter().any(|&s| s < 0) {
        BitcoinClass::Risky
    } else if 2 * scores.iter().filter(|&&s| s > 1).count() > scores.len() {
        BitcoinClass::Trustworthy
    } else if scores.is_empty() {
        BitcoinClass::Unknown
    } else {
        BitcoinClass::Neutral
    }
}

/// Class of every user appearing in `records`, after latest-wins dedup.
pub fn bitcoin_labels(records: &[RatingRecord]) -> BTreeMap<u64, BitcoinClass> {
    let mut received: BTreeMap<u64, Vec<i32>> = BTreeMap::new();
    for r in dedup_latest(records) {
        received.entry(r.rater).or_default();
        received.entry(r.ratee).or_default().push(r.score);
    }
    received
        .into_iter()
        .map(|(id, s)| (id, classify_received(&s)))
        .collect()
}

/// Parses `rater,ratee,score,time` rows; a header line is optional.
pub fn read_ratings_csv<R: Read>(reader: R) -> Result<Vec<RatingRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| DataError::Malformed {
            line: e.position().map_or(i as u64 + 1, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 && row.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let bad = |message: String| DataError::Malformed { line, message };
        if row.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", row.len())));
        }
        let rater = row[0]
            .parse::<u64>()
            .map_err(|_| bad(format!("bad rater {:?}", &row[0])))?;
        let ratee = row[1]
            .parse::<u64>()
            .map_err(|_| bad(format!("bad ratee {:?}", &row[1])))?;
        // Scores may be written as "-10" or "-10.0".
        let score_f = row[2]
            .parse::<f64>()
            .map_err(|_| bad(format!("bad score {:?}", &row[2])))?;
        if score_f.fract() != 0.0 || score_f == 0.0 || !(-10.0..=10.0).contains(&score_f) {
            return Err(bad(format!(
                "score {score_f} not a nonzero integer in [-10, 10]"
            )));
        }
        let time = row[3]
            .parse::<f64>()
            .map_err(|_| bad(format!("bad time {:?}", &row[3])))?;
        out.push(RatingRecord {
            rater,
            ratee,
            score: score_f as i32,
            time,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BitcoinDataset {
    pub graph: WeightedDigraph,
    /// Original user id of each node.
    pub user_ids: Vec<u64>,
    /// Raw rating behind each arc, aligned with arc ordinals.
    pub raw_scores: Vec<i32>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Builds the rating graph from records at or before `cutoff`.
///
/// Users are renumbered `0..N` in ascending id order. Node features are the
/// constant (1, 1).
pub fn bitcoin_from_records(
    records: &[RatingRecord],
    cutoff: Option<f64>,
    seed: u64,
) -> Result<BitcoinDataset, DataError> {
    let kept: Vec<RatingRecord> = records
        .iter()
        .filter(|r| cutoff.is_none_or(|c| r.time <= c))
        .copied()
        .collect();
    let records = dedup_latest(&kept);
    let users: BTreeSet<u64> = records.iter().flat_map(|r| [r.rater, r.ratee]).collect();
    let user_ids: Vec<u64> = users.into_iter().collect();
    let index: HashMap<u64, usize> = user_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let mut arcs = Vec::with_capacity(records.len());
    let mut raw_scores = Vec::with_capacity(records.len());
    for r in &records {
        let w = renormalize_ratings(r.score as f64)?.max(MIN_RATING_WEIGHT);
        arcs.push(WeightedArc::new(index[&r.rater], index[&r.ratee], w));
        raw_scores.push(r.score);
    }
    let classes = bitcoin_labels(&records);
    let labels: Vec<usize> = user_ids.iter().map(|u| classes[u].id()).collect();
    let n = user_ids.len();
    let graph = build_graph(
        arcs,
        DenseMatrix::filled(n, 2, 1.0),
        Some(labels.clone()),
        4,
    )?;
    let (train, test) = stratified_split(&labels, &BITCOIN_TRAIN_FRACTIONS, seed);
    Ok(BitcoinDataset {
        graph,
        user_ids,
        raw_scores,
        train,
        test,
    })
}

pub fn load_bitcoin(
    path: impl AsRef<Path>,
    cutoff: Option<f64>,
    seed: u64,
) -> Result<BitcoinDataset, DataError> {
    let file = std::fs::File::open(path)?;
    bitcoin_from_records(&read_ratings_csv(file)?, cutoff, seed)
}

/// Per-class seeded split taking `round(fraction · class size)` nodes of each
/// class for training. Both halves are sorted.
pub fn stratified_split(
    labels: &[usize],
    fractions: &[f64],
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, &frac) in fractions.iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let cut = (frac * members.len() as f64).round() as usize;
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}
