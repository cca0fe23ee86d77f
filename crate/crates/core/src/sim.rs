//! Synthetic matching tasks and simulated human matchers with tunable biases.
//!
//! Each decision first draws a latent probability `q` of being right, then
//! draws correctness from it. An unbiased, noiseless matcher reports `q`
//! itself; bias and noise distort the report but never the outcome.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matchers::{default_ensemble, Lexicon, SimilarityMatrix};
use crate::model::{DecisionHistory, DecisionRecord, Pair, ReferenceMatch, Schema};

/// Concentration of the latent correctness distribution.
const KAPPA: f64 = 4.0;
/// Mean seconds between decisions for a confident matcher.
const BASE_GAP: f64 = 10.0;
const CONFUSABLE_WEIGHT: f64 = 2.0;
const LOOKALIKE_SHARPNESS: f64 = 8.0;
const SEED_POOL: usize = 50;

/// A task with known ground truth and an algorithmic similarity matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SimTask {
    pub schema_a: Schema,
    pub schema_b: Schema,
    pub reference: ReferenceMatch,
    pub algorithmic: SimilarityMatrix,
}

impl SimTask {
    pub fn rows(&self) -> usize {
        self.schema_a.len()
    }

    pub fn cols(&self) -> usize {
        self.schema_b.len()
    }
}

const ENTITIES: &[(&str, &str)] = &[
    ("customer", "client"),
    ("order", "purchase"),
    ("product", "item"),
    ("invoice", "bill"),
    ("shipment", "delivery"),
    ("supplier", "vendor"),
    ("employee", "staff"),
];

const FIELDS: &[(&str, &str)] = &[
    ("name", "title"),
    ("date", "day"),
    ("number", "num"),
    ("city", "town"),
    ("address", "addr"),
    ("phone", "tel"),
    ("email", "mail"),
    ("code", "id"),
    ("price", "cost"),
    ("quantity", "qty"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskShape {
    pub correspondences: usize,
    pub extra_rows: usize,
    pub extra_cols: usize,
}

impl Default for TaskShape {
    fn default() -> Self {
        TaskShape {
            correspondences: 16,
            extra_rows: 4,
            extra_cols: 8,
        }
    }
}

fn camel(entity: &str, field: &str) -> String {
    let mut s = entity.to_string();
    let mut cs = field.chars();
    if let Some(first) = cs.next() {
        s.extend(first.to_uppercase());
        s.push_str(cs.as_str());
    }
    s
}

/// Builds a two-schema task from entity/field vocabularies. The second
/// schema renames attributes with synonyms, abbreviations and snake case;
/// both sides carry unmatched distractors.
pub fn synthetic_task(shape: TaskShape, seed: u64) -> Result<SimTask> {
    let combos: Vec<(usize, usize)> = (0..ENTITIES.len())
        .flat_map(|e| (0..FIELDS.len()).map(move |f| (e, f)))
        .collect();
    let needed = shape.correspondences + shape.extra_rows + shape.extra_cols;
    if shape.correspondences == 0 || needed > combos.len() {
        return Err(Error::InvalidArgument(format!(
            "task shape {shape:?} needs between 1 and {} attributes",
            combos.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<(usize, usize)> = combos.choose_multiple(&mut rng, needed).copied().collect();
    let (shared, rest) = picked.split_at(shape.correspondences);
    let (only_a, only_b) = rest.split_at(shape.extra_rows);

    let a_name = |&(e, f): &(usize, usize)| camel(ENTITIES[e].0, FIELDS[f].0);
    let b_name = |&(e, f): &(usize, usize), rng: &mut ChaCha8Rng| {
        let ent = if rng.random_bool(0.5) { ENTITIES[e].1 } else { ENTITIES[e].0 };
        let fld = if rng.random_bool(0.5) { FIELDS[f].1 } else { FIELDS[f].0 };
        if rng.random_bool(0.5) {
            format!("{ent}_{fld}")
        } else {
            camel(ent, fld)
        }
    };

    let mut rows: Vec<(String, Option<usize>)> = shared
        .iter()
        .enumerate()
        .map(|(k, c)| (a_name(c), Some(k)))
        .chain(only_a.iter().map(|c| (a_name(c), None)))
        .collect();
    let mut cols: Vec<(String, Option<usize>)> = shared
        .iter()
        .enumerate()
        .map(|(k, c)| (b_name(c, &mut rng), Some(k)))
        .collect();
    for c in only_b {
        let n = b_name(c, &mut rng);
        cols.push((n, None));
    }
    rows.shuffle(&mut rng);
    cols.shuffle(&mut rng);

    let names = |v: &[(String, Option<usize>)]| v.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    let schema_a = Schema::flat("SourceA", &names(&rows))?;
    let schema_b = Schema::flat("SourceB", &names(&cols))?;
    let reference = ReferenceMatch::new(rows.iter().enumerate().filter_map(|(i, (_, k))| {
        let k = (*k)?;
        let j = cols.iter().position(|(_, kk)| *kk == Some(k))?;
        Some(Pair::new(i, j))
    }));
    let algorithmic = default_ensemble(&schema_a, &schema_b, &Lexicon::bundled());
    Ok(SimTask {
        schema_a,
        schema_b,
        reference,
        algorithmic,
    })
}

/// Behavioral knobs of one simulated matcher.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasProfile {
    /// Probability that a decision is correct.
    pub skill: f64,
    pub confidence_bias: f64,
    pub confidence_noise: f64,
    /// Per-decision relaxation of the minimum confidence worth reporting.
    pub temporal_relaxation: f64,
    /// Probability of picking a pair because others picked it.
    pub consensus_coupling: f64,
    pub decisions_mean: usize,
    pub seed: u64,
}

impl BiasProfile {
    pub fn unbiased(skill: f64, decisions_mean: usize, seed: u64) -> Self {
        BiasProfile {
            skill,
            confidence_bias: 0.0,
            confidence_noise: 0.0,
            temporal_relaxation: 0.0,
            consensus_coupling: 0.0,
            decisions_mean,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.skill)
            && self.confidence_bias.is_finite()
            && self.confidence_noise >= 0.0
            && self.confidence_noise.is_finite()
            && self.temporal_relaxation >= 0.0
            && self.temporal_relaxation.is_finite()
            && (0.0..=1.0).contains(&self.consensus_coupling)
            && self.decisions_mean >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid bias profile {self:?}")))
        }
    }
}

/// How often each pair was chosen by a reference population.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Popularity {
    pub counts: Vec<(Pair, u32)>,
}

impl Popularity {
    pub fn from_histories<'a>(histories: impl IntoIterator<Item = &'a DecisionHistory>) -> Self {
        let mut map = std::collections::BTreeMap::new();
        for h in histories {
            for p in h.touched() {
                *map.entry(p).or_insert(0u32) += 1;
            }
        }
        Popularity {
            counts: map.into_iter().collect(),
        }
    }
}

fn latent(rng: &mut ChaCha8Rng, skill: f64) -> f64 {
    if skill <= 0.0 || skill >= 1.0 {
        return skill.clamp(0.0, 1.0);
    }
    Beta::new(skill * KAPPA, (1.0 - skill) * KAPPA)
        .expect("shape parameters are positive")
        .sample(rng)
}

/// Wrong pairs are drawn with weight growing with their algorithmic
/// similarity, doubled when they share a row or column with a correct pair,
/// so that mistakes cluster on look-alikes as human mistakes do.
fn incorrect_pair(rng: &mut ChaCha8Rng, task: &SimTask, used: &BTreeSet<Pair>) -> Option<Pair> {
    let (n, m) = (task.rows(), task.cols());
    let mut rows_hit = vec![false; n];
    let mut cols_hit = vec![false; m];
    for p in task.reference.pairs() {
        rows_hit[p.row] = true;
        cols_hit[p.col] = true;
    }
    let candidates: Vec<(Pair, f64)> = (0..n)
        .flat_map(|i| (0..m).map(move |j| Pair::new(i, j)))
        .filter(|&p| !used.contains(&p) && !task.reference.contains(p))
        .map(|p| {
            let near = if rows_hit[p.row] || cols_hit[p.col] { CONFUSABLE_WEIGHT } else { 1.0 };
            (p, near * (LOOKALIKE_SHARPNESS * task.algorithmic.at(p)).exp())
        })
        .collect();
    let idx = WeightedIndex::new(candidates.iter().map(|(_, w)| *w)).ok()?;
    Some(candidates[idx.sample(rng)].0)
}

fn copied_pair(rng: &mut ChaCha8Rng, pop: &Popularity, used: &BTreeSet<Pair>, task: &SimTask) -> Option<(Pair, f64)> {
    let avail: Vec<(Pair, u32)> = pop
        .counts
        .iter()
        .copied()
        .filter(|(p, c)| *c > 0 && !used.contains(p) && p.row < task.rows() && p.col < task.cols())
        .collect();
    if avail.is_empty() {
        return None;
    }
    let total: u32 = avail.iter().map(|(_, c)| c).sum();
    let right: u32 = avail
        .iter()
        .filter(|(p, _)| task.reference.contains(*p))
        .map(|(_, c)| c)
        .sum();
    let idx = WeightedIndex::new(avail.iter().map(|(_, c)| *c)).ok()?;
    Some((avail[idx.sample(rng)].0, f64::from(right) / f64::from(total)))
}

/// One matcher's history; deterministic given the profile seed.
pub fn simulate_matcher(
    task: &SimTask,
    profile: &BiasProfile,
    popularity: Option<&Popularity>,
) -> Result<DecisionHistory> {
    profile.validate()?;
    if task.reference.is_empty() {
        return Err(Error::InvalidArgument("reference match is empty".into()));
    }
    let cells = task.rows() * task.cols();
    if profile.decisions_mean > cells {
        return Err(Error::InvalidArgument(format!(
            "{} decisions requested on a {}x{} task",
            profile.decisions_mean,
            task.rows(),
            task.cols()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let mean = profile.decisions_mean as f64;
    let k_total = Normal::new(mean, 0.2 * mean)
        .expect("finite parameters")
        .sample(&mut rng)
        .round()
        .clamp(1.0, cells as f64) as usize;
    let noise = (profile.confidence_noise > 0.0)
        .then(|| Normal::new(0.0, profile.confidence_noise).expect("positive scale"));
    let gap_jitter = LogNormal::new(0.0, 0.35).expect("valid lognormal");

    let correct: Vec<Pair> = task.reference.pairs().collect();
    let mut used = BTreeSet::new();
    let mut records = Vec::with_capacity(k_total);
    let mut t = 0.0;
    for k in 0..k_total {
        let copied = match popularity {
            Some(pop) if profile.consensus_coupling > 0.0 && rng.random_bool(profile.consensus_coupling) => {
                copied_pair(&mut rng, pop, &used, task)
            }
            _ => None,
        };
        let (pair, q) = match copied {
            Some(c) => c,
            None => {
                let floor = (profile.temporal_relaxation * (k_total - 1 - k) as f64).min(0.95);
                let mut q = latent(&mut rng, profile.skill);
                for _ in 0..1000 {
                    if q >= floor {
                        break;
                    }
                    q = latent(&mut rng, profile.skill);
                }
                let pick = if rng.random_bool(q) {
                    let free: Vec<Pair> = correct.iter().copied().filter(|p| !used.contains(p)).collect();
                    free.choose(&mut rng).copied()
                } else {
                    incorrect_pair(&mut rng, task, &used)
                };
                match pick {
                    Some(p) => (p, q),
                    None => break,
                }
            }
        };
        used.insert(pair);
        let jitter = noise.map_or(0.0, |n| n.sample(&mut rng));
        let confidence = (q + profile.confidence_bias + jitter).clamp(0.0, 1.0);
        let gap = BASE_GAP
            * (0.5 + 1.5 * (1.0 - q))
            * gap_jitter.sample(&mut rng)
            * (1.0 + profile.temporal_relaxation * k as f64);
        t += gap.max(1e-3);
        records.push(DecisionRecord::new(pair.row, pair.col, confidence, t));
    }
    Ok(DecisionHistory::new(records))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Span { lo, hi }
    }

    pub const fn fixed(v: f64) -> Self {
        Span { lo: v, hi: v }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }
}

/// Ranges from which cohort profiles are drawn uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileDistribution {
    pub skill: Span,
    pub confidence_bias: Span,
    pub confidence_noise: Span,
    pub temporal_relaxation: Span,
    pub consensus_coupling: Span,
    pub decisions_mean: (usize, usize),
}

impl ProfileDistribution {
    pub fn unbiased() -> Self {
        ProfileDistribution {
            skill: Span::new(0.3, 0.9),
            confidence_bias: Span::fixed(0.0),
            confidence_noise: Span::fixed(0.0),
            temporal_relaxation: Span::fixed(0.0),
            consensus_coupling: Span::fixed(0.0),
            decisions_mean: (14, 22),
        }
    }

    /// Overconfident, noisy matchers with mild drift and herding.
    pub fn biased() -> Self {
        ProfileDistribution {
            skill: Span::new(0.3, 0.85),
            confidence_bias: Span::new(0.1, 0.35),
            confidence_noise: Span::new(0.05, 0.2),
            temporal_relaxation: Span::new(0.0, 0.03),
            consensus_coupling: Span::new(0.0, 0.3),
            decisions_mean: (14, 22),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> BiasProfile {
        let (lo, hi) = self.decisions_mean;
        BiasProfile {
            skill: self.skill.sample(rng),
            confidence_bias: self.confidence_bias.sample(rng),
            confidence_noise: self.confidence_noise.sample(rng),
            temporal_relaxation: self.temporal_relaxation.sample(rng),
            consensus_coupling: self.consensus_coupling.sample(rng),
            decisions_mean: if hi > lo { rng.random_range(lo..=hi) } else { lo },
            seed: rng.random(),
        }
    }
}

impl std::str::FromStr for ProfileDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unbiased" => Ok(Self::unbiased()),
            "biased" => Ok(Self::biased()),
            other => Err(Error::InvalidArgument(format!("unknown profile distribution {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedMatcher {
    pub id: String,
    pub profile: BiasProfile,
    pub history: DecisionHistory,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cohort {
    pub task: SimTask,
    pub popularity: Popularity,
    pub matchers: Vec<SimulatedMatcher>,
}

impl Cohort {
    pub fn histories(&self) -> Vec<DecisionHistory> {
        self.matchers.iter().map(|m| m.history.clone()).collect()
    }
}

/// Simulates `count` matchers whose profiles are drawn from `dist`. Herding
/// draws on an auxiliary pool of independent matchers from the same
/// distribution.
pub fn simulate_cohort(count: usize, dist: &ProfileDistribution, task: &SimTask, seed: u64) -> Result<Cohort> {
    if count == 0 {
        return Err(Error::InvalidArgument("cohort needs at least one matcher".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool_profiles: Vec<BiasProfile> = (0..SEED_POOL)
        .map(|_| BiasProfile {
            consensus_coupling: 0.0,
            ..dist.sample(&mut rng)
        })
        .collect();
    let pool = pool_profiles
        .par_iter()
        .map(|p| simulate_matcher(task, p, None))
        .collect::<Result<Vec<_>>>()?;
    let popularity = Popularity::from_histories(&pool);

    let profiles: Vec<BiasProfile> = (0..count).map(|_| dist.sample(&mut rng)).collect();
    let matchers = profiles
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            simulate_matcher(task, p, Some(&popularity)).map(|history| SimulatedMatcher {
                id: format!("m{i:03}"),
                profile: *p,
                history,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Cohort {
        task: task.clone(),
        popularity,
        matchers,
    })
}
