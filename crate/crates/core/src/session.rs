//! The interactive loop: display zero from K-means medoids, then for every
//! answered display retrain the learner and pick the next display with the
//! session's strategy. Also the simulated-oracle drivers used for
//! experiments (single runs, the ablation grid, the fully-supervised floor).

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    decision_scores, evaluate_eer, normalize_scores, scoring_matrix, train_svm, LinearModel,
    ScoreMatrix, SvmConfig,
};
use crate::clustering::{
    assignment_matrix, kmeans_fit_restarts, ranked_members, squared_distance_matrix, ClusterModel,
    DistanceMatrix, IndicatorMatrix,
};
use crate::display::{select_top_b, solve_for_pool, Membership};
use crate::error::{Error, Result};
use crate::model::{Dataset, Hyperparams, Label, LabelVector};
use crate::samplers::{maxmin_select, random_select, uncertainty_select, SamplerKind};
use crate::{derive_seed, seeded_rng};

const SEED_KMEANS: u64 = 1;
const SEED_SVM: u64 = 2;
const SEED_SOLVE: u64 = 3;
const SEED_RANDOM: u64 = 4;
const SEED_SPLIT: u64 = 5;

/// Who answers displays.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleBinding {
    /// Replays known labels for the pool.
    Simulated(LabelVector),
    /// Answers arrive from outside through [`Session::submit_labels`].
    Human,
}

/// Held-out samples used only to report the equal error rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub features: Dataset,
    pub labels: Vec<Label>,
}

impl EvalSet {
    pub fn new(features: Dataset, labels: Vec<Label>) -> Result<Self> {
        if features.n() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "eval set has {} rows but {} labels",
                features.n(),
                labels.len()
            )));
        }
        if !labels.contains(&Label::Positive) || !labels.contains(&Label::Negative) {
            return Err(Error::InvalidArgument(
                "evaluation set must contain both classes".into(),
            ));
        }
        Ok(Self { features, labels })
    }
}

/// One answered display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDisplay {
    pub indices: Vec<usize>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration; the model of this record was trained on `iter`
    /// displays.
    pub iter: usize,
    pub labeled: usize,
    pub samp_pct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eer: Option<f64>,
    /// Fixed-point sweeps spent choosing the next display (proposed only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fp_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_final: Option<f64>,
    pub strategy: SamplerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTrace {
    pub strategy: SamplerKind,
    pub seed: u64,
    pub n_train: usize,
    pub records: Vec<IterationRecord>,
}

impl MetricsTrace {
    pub fn eer_at(&self, iter: usize) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.iter == iter)
            .and_then(|r| r.eer)
    }

    pub fn final_eer(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.eer)
    }
}

/// Percentage of the training pool labeled after `t` full displays.
pub fn sampling_rate(t: usize, b: usize, n_train: usize) -> f64 {
    (t * b) as f64 / n_train as f64 * 100.0
}

/// `labeled / n_train` as a percentage truncated (not rounded) to two
/// decimals, computed in integers.
pub fn format_rate_truncated(labeled: usize, n_train: usize) -> String {
    let hundredths = (labeled as u128 * 10_000) / n_train as u128;
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// Mutable part of a session; successors are built by value.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub t: usize,
    pub labeled_history: Vec<LabeledDisplay>,
    pub current_model: Option<LinearModel>,
    pub pending_display: Vec<usize>,
    pub membership_last: Option<Membership>,
    pub metrics: MetricsTrace,
}

impl SessionState {
    pub fn labeled_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for d in &self.labeled_history {
            for &i in &d.indices {
                mask[i] = true;
            }
        }
        mask
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled_history.iter().map(|d| d.indices.len()).sum()
    }
}

/// Everything fixed for the lifetime of a session.
#[derive(Debug)]
pub struct SessionContext {
    pub dataset: Arc<Dataset>,
    pub hp: Hyperparams,
    pub strategy: SamplerKind,
    pub oracle: OracleBinding,
    pub eval: Option<EvalSet>,
    pub clusters: ClusterModel,
    pub indicator: IndicatorMatrix,
    pub distances: DistanceMatrix,
}

#[derive(Debug, Clone)]
pub struct Session {
    ctx: Arc<SessionContext>,
    state: SessionState,
}

/// Display zero: one medoid per cluster in cluster order, cut to `b`, or
/// topped up round-robin with each cluster's next-nearest members.
pub fn initial_display(ranked: &[Vec<usize>], b: usize) -> Vec<usize> {
    let mut display = Vec::with_capacity(b);
    let deepest = ranked.iter().map(Vec::len).max().unwrap_or(0);
    'outer: for rank in 0..deepest {
        for members in ranked {
            if let Some(&i) = members.get(rank) {
                display.push(i);
                if display.len() == b {
                    break 'outer;
                }
            }
        }
    }
    display
}

pub fn init_session(
    dataset: Arc<Dataset>,
    hp: Hyperparams,
    strategy: SamplerKind,
    oracle: OracleBinding,
    eval: Option<EvalSet>,
) -> Result<Session> {
    let n = dataset.n();
    hp.validate_for_pool(n)?;
    dataset.check_finite()?;
    if let OracleBinding::Simulated(truth) = &oracle {
        if truth.len() != n {
            return Err(Error::InvalidArgument(format!(
                "simulated oracle knows {} labels for a pool of {n}",
                truth.len()
            )));
        }
    }
    if let Some(ev) = &eval {
        if ev.features.d() != dataset.d() {
            return Err(Error::InvalidArgument(
                "eval features have a different dimension than the pool".into(),
            ));
        }
    }

    let clusters = kmeans_fit_restarts(
        &dataset,
        hp.clusters,
        derive_seed(hp.seed, SEED_KMEANS, 0),
        hp.kmeans_max_iter,
        hp.kmeans_restarts,
    )?;
    let indicator = assignment_matrix(&clusters);
    let distances = squared_distance_matrix(&clusters, &dataset)?;
    let pending = initial_display(&ranked_members(&clusters, &dataset), hp.display_size);

    let metrics = MetricsTrace {
        strategy,
        seed: hp.seed,
        n_train: n,
        records: Vec::new(),
    };
    Ok(Session {
        ctx: Arc::new(SessionContext {
            dataset,
            hp,
            strategy,
            oracle,
            eval,
            clusters,
            indicator,
            distances,
        }),
        state: SessionState {
            t: 0,
            labeled_history: Vec::new(),
            current_model: None,
            pending_display: pending,
            membership_last: None,
            metrics,
        },
    })
}

impl Session {
    pub fn context(&self) -> &SessionContext {
        &self.ctx
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn hp(&self) -> &Hyperparams {
        &self.ctx.hp
    }

    pub fn is_finished(&self) -> bool {
        self.state.pending_display.is_empty()
    }

    pub fn pending_display(&self) -> &[usize] {
        &self.state.pending_display
    }

    /// Normalized scores of the current model on the pool, if it has one.
    pub fn current_fhat(&self) -> Option<Vec<f64>> {
        let model = self.state.current_model.as_ref()?;
        if model.single_class.is_some() {
            return Some(vec![0.5; self.ctx.dataset.n()]);
        }
        let raw = decision_scores(model, &self.ctx.dataset).ok()?;
        Some(normalize_scores(&raw, self.ctx.hp.eps_score))
    }

    /// Answers of the simulated oracle for the pending display.
    pub fn oracle_answers(&self) -> Result<Vec<(usize, Label)>> {
        match &self.ctx.oracle {
            OracleBinding::Simulated(truth) => self
                .state
                .pending_display
                .iter()
                .map(|&i| {
                    truth.get(i).map(|l| (i, l)).ok_or_else(|| {
                        Error::InvalidState(format!("simulated oracle has no label for sample {i}"))
                    })
                })
                .collect(),
            OracleBinding::Human => Err(Error::InvalidState(
                "a human oracle answers through submit_labels".into(),
            )),
        }
    }

    /// Records the answers to the pending display, retrains, and (budget
    /// permitting) selects the next display. Returns the successor session.
    pub fn submit_labels(&self, answers: &[(usize, Label)]) -> Result<Session> {
        if self.is_finished() {
            return Err(Error::InvalidState("session is finished".into()));
        }
        let pending = &self.state.pending_display;
        let by_index = check_answers(pending, answers)?;

        let ctx = &self.ctx;
        let hp = &ctx.hp;
        let n = ctx.dataset.n();
        let mut state = self.state.clone();
        let t = state.t;

        state.labeled_history.push(LabeledDisplay {
            indices: pending.clone(),
            labels: pending.iter().map(|i| by_index[i]).collect(),
        });

        let (idx, labels): (Vec<usize>, Vec<Label>) = state
            .labeled_history
            .iter()
            .flat_map(|d| d.indices.iter().copied().zip(d.labels.iter().copied()))
            .unzip();
        let model = train_svm(
            &ctx.dataset.subset(&idx),
            &labels,
            SvmConfig {
                lambda: hp.svm_lambda,
                epochs: hp.svm_epochs,
                balanced: hp.svm_balanced,
            },
            derive_seed(hp.seed, SEED_SVM, t as u64),
        )?;
        let eer = match &ctx.eval {
            Some(ev) => Some(evaluate_eer(&model, &ev.features, &ev.labels)?),
            None => None,
        };

        let labeled_count = state.labeled_count();
        let mask = state.labeled_mask(n);
        let remaining = mask.iter().filter(|m| !**m).count();
        let mut fp_iterations = None;
        let mut objective_final = None;
        state.pending_display = if t + 1 < hp.budget && remaining > 0 {
            let raw = decision_scores(&model, &ctx.dataset)?;
            match ctx.strategy {
                SamplerKind::Proposed => {
                    let f = if model.single_class.is_some() {
                        ScoreMatrix::uniform(n)
                    } else {
                        scoring_matrix(&normalize_scores(&raw, hp.eps_score))
                    };
                    let (mu, report) = solve_for_pool(
                        &ctx.indicator,
                        &ctx.distances,
                        &f,
                        hp,
                        derive_seed(hp.seed, SEED_SOLVE, t as u64),
                        &mask,
                    )?;
                    fp_iterations = Some(mu.tau);
                    objective_final = report.objective_trace.last().copied();
                    let next = select_top_b(&mu, &mask, hp.display_size)?;
                    state.membership_last = Some(mu);
                    next
                }
                SamplerKind::Maxmin => {
                    maxmin_select(&ctx.dataset, &idx, hp.display_size)?
                }
                SamplerKind::Uncertainty => uncertainty_select(&raw, &mask, hp.display_size)?,
                SamplerKind::Random => random_select(
                    &mask,
                    hp.display_size,
                    derive_seed(hp.seed, SEED_RANDOM, t as u64),
                )?,
            }
        } else {
            Vec::new()
        };

        state.metrics.records.push(IterationRecord {
            iter: t + 1,
            labeled: labeled_count,
            samp_pct: labeled_count as f64 / n as f64 * 100.0,
            eer,
            fp_iterations,
            objective_final,
            strategy: ctx.strategy,
        });
        state.current_model = Some(model);
        state.t = t + 1;
        Ok(Session {
            ctx: Arc::clone(&self.ctx),
            state,
        })
    }
}

fn check_answers(pending: &[usize], answers: &[(usize, Label)]) -> Result<HashMap<usize, Label>> {
    let expected: HashSet<usize> = pending.iter().copied().collect();
    let mut by_index = HashMap::with_capacity(answers.len());
    for &(i, label) in answers {
        if !expected.contains(&i) {
            return Err(Error::InvalidArgument(format!(
                "sample {i} is not part of the pending display"
            )));
        }
        if by_index.insert(i, label).is_some() {
            return Err(Error::InvalidArgument(format!("sample {i} answered twice")));
        }
    }
    if let Some(missing) = pending.iter().find(|i| !by_index.contains_key(i)) {
        return Err(Error::InvalidArgument(format!(
            "no answer for pending sample {missing}"
        )));
    }
    Ok(by_index)
}

/// Train/eval partition of a fully labeled pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
}

/// Seeded half/half split that keeps the class ratio: the training half has
/// `floor(n / 2)` samples and `ceil(positives / 2)` of the positives. Both
/// halves must end up with both classes.
pub fn stratified_split(labels: &LabelVector, seed: u64) -> Result<Split> {
    let n = labels.len();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..n {
        match labels.get(i) {
            Some(Label::Positive) => pos.push(i),
            Some(Label::Negative) => neg.push(i),
            None => {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} has no ground-truth label"
                )))
            }
        }
    }
    let n_train = n / 2;
    let pos_train = pos.len().div_ceil(2).min(n_train);
    let neg_train = n_train - pos_train;
    if pos_train == 0
        || pos_train == pos.len()
        || neg_train == 0
        || neg_train >= neg.len()
    {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} positives and {} negatives into two halves with both classes",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = seeded_rng(seed, SEED_SPLIT);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut train: Vec<usize> = pos[..pos_train]
        .iter()
        .chain(&neg[..neg_train])
        .copied()
        .collect();
    let mut eval: Vec<usize> = pos[pos_train..]
        .iter()
        .chain(&neg[neg_train..])
        .copied()
        .collect();
    train.sort_unstable();
    eval.sort_unstable();
    Ok(Split { train, eval })
}

fn known_labels(labels: &LabelVector, idx: &[usize]) -> Result<Vec<Label>> {
    idx.iter()
        .map(|&i| {
            labels
                .get(i)
                .ok_or_else(|| Error::InvalidArgument(format!("sample {i} has no label")))
        })
        .collect()
}

/// Builds the simulated-oracle session for a split of a labeled pool.
pub fn simulated_session(
    dataset: &Dataset,
    ground_truth: &LabelVector,
    hp: &Hyperparams,
    strategy: SamplerKind,
    split: &Split,
) -> Result<Session> {
    if ground_truth.len() != dataset.n() {
        return Err(Error::InvalidArgument(format!(
            "{} ground-truth labels for a pool of {}",
            ground_truth.len(),
            dataset.n()
        )));
    }
    let train = Arc::new(dataset.subset(&split.train));
    let truth = ground_truth.subset(&split.train);
    let eval = EvalSet::new(
        dataset.subset(&split.eval),
        known_labels(ground_truth, &split.eval)?,
    )?;
    init_session(
        train,
        hp.clone(),
        strategy,
        OracleBinding::Simulated(truth),
        Some(eval),
    )
}

/// Runs a whole session against the ground truth. Without an explicit split
/// the pool is split with [`stratified_split`] under `seed`.
pub fn run_simulated(
    dataset: &Dataset,
    ground_truth: &LabelVector,
    hp: &Hyperparams,
    strategy: SamplerKind,
    eval_split: Option<&Split>,
    seed: u64,
) -> Result<MetricsTrace> {
    let hp = Hyperparams {
        seed,
        ..hp.clone()
    };
    let split = match eval_split {
        Some(s) => s.clone(),
        None => stratified_split(ground_truth, seed)?,
    };
    let mut session = simulated_session(dataset, ground_truth, &hp, strategy, &split)?;
    while !session.is_finished() {
        let answers = session.oracle_answers()?;
        session = session.submit_labels(&answers)?;
    }
    Ok(session.state.metrics)
}

/// One SVM on every training label; the reference floor for the curves.
pub fn run_fully_supervised(
    dataset: &Dataset,
    ground_truth: &LabelVector,
    split: &Split,
    hp: &Hyperparams,
) -> Result<f64> {
    let train_labels = known_labels(ground_truth, &split.train)?;
    let model = train_svm(
        &dataset.subset(&split.train),
        &train_labels,
        SvmConfig {
            lambda: hp.svm_lambda,
            epochs: hp.svm_epochs,
            balanced: hp.svm_balanced,
        },
        derive_seed(hp.seed, SEED_SVM, u64::MAX),
    )?;
    evaluate_eer(
        &model,
        &dataset.subset(&split.eval),
        &known_labels(ground_truth, &split.eval)?,
    )
}

/// Which objective terms an ablation row keeps; cardinality always stays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationConfig {
    pub name: &'static str,
    pub representativity: bool,
    pub diversity: bool,
    pub ambiguity: bool,
}

pub const ABLATION_CONFIGS: [AblationConfig; 7] = [
    AblationConfig { name: "rep", representativity: true, diversity: false, ambiguity: false },
    AblationConfig { name: "div", representativity: false, diversity: true, ambiguity: false },
    AblationConfig { name: "amb", representativity: false, diversity: false, ambiguity: true },
    AblationConfig { name: "rep+div", representativity: true, diversity: true, ambiguity: false },
    AblationConfig { name: "rep+amb", representativity: true, diversity: false, ambiguity: true },
    AblationConfig { name: "div+amb", representativity: false, diversity: true, ambiguity: true },
    AblationConfig { name: "all", representativity: true, diversity: true, ambiguity: true },
];

impl AblationConfig {
    /// `hp` with the dropped terms zeroed.
    pub fn apply(&self, hp: &Hyperparams) -> Hyperparams {
        Hyperparams {
            rep_weight: if self.representativity { hp.rep_weight } else { 0.0 },
            alpha: if self.diversity { hp.alpha } else { 0.0 },
            beta: if self.ambiguity { hp.beta } else { 0.0 },
            ..hp.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub n_train: usize,
    pub display_size: usize,
    pub budget: usize,
    pub rows: Vec<(String, MetricsTrace)>,
}

/// The seven term combinations, each a full proposed-strategy run on the
/// same split and seed.
pub fn run_ablation(
    dataset: &Dataset,
    ground_truth: &LabelVector,
    hp: &Hyperparams,
    seed: u64,
) -> Result<AblationTable> {
    let split = stratified_split(ground_truth, seed)?;
    let mut rows = Vec::with_capacity(ABLATION_CONFIGS.len());
    for cfg in ABLATION_CONFIGS {
        let trace = run_simulated(
            dataset,
            ground_truth,
            &cfg.apply(hp),
            SamplerKind::Proposed,
            Some(&split),
            seed,
        )?;
        rows.push((cfg.name.to_string(), trace));
    }
    Ok(AblationTable {
        n_train: split.train.len(),
        display_size: hp.display_size,
        budget: hp.budget,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_rate_schedule() {
        let expected = [
            "1.45", "2.90", "4.36", "5.81", "7.27", "8.72", "10.18", "11.63", "13.09", "14.54",
        ];
        for (t, want) in (1..=10).zip(expected) {
            assert_eq!(format_rate_truncated(t * 16, 2200 / 2), want);
        }
        assert!((sampling_rate(1, 16, 1100) - 1.454_545_454_5).abs() < 1e-9);
    }

    #[test]
    fn initial_display_truncates_and_pads() {
        let ranked = vec![vec![3, 7, 8], vec![1], vec![], vec![4, 5]];
        assert_eq!(initial_display(&ranked, 2), vec![3, 1]);
        assert_eq!(initial_display(&ranked, 3), vec![3, 1, 4]);
        assert_eq!(initial_display(&ranked, 5), vec![3, 1, 4, 7, 5]);
        assert_eq!(initial_display(&ranked, 10), vec![3, 1, 4, 7, 5, 8]);
    }

    #[test]
    fn answers_must_match_pending() {
        use Label::*;
        let pending = [4, 9];
        assert!(check_answers(&pending, &[(4, Positive), (9, Negative)]).is_ok());
        let missing = check_answers(&pending, &[(4, Positive)]).unwrap_err();
        assert!(missing.to_string().contains("9"));
        assert!(check_answers(&pending, &[(4, Positive), (9, Negative), (1, Negative)]).is_err());
        assert!(check_answers(&pending, &[(4, Positive), (4, Negative), (9, Negative)]).is_err());
    }

    #[test]
    fn split_is_stratified_and_halved() {
        let mut labels = vec![Label::Negative; 2200];
        for slot in labels.iter_mut().take(39) {
            *slot = Label::Positive;
        }
        let lv = LabelVector::from_labels(&labels);
        let split = stratified_split(&lv, 3).unwrap();
        assert_eq!(split.train.len(), 1100);
        assert_eq!(split.eval.len(), 1100);
        let pos_train = split.train.iter().filter(|&&i| i < 39).count();
        assert_eq!(pos_train, 20);
        let mut all: Vec<usize> = split.train.iter().chain(&split.eval).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..2200).collect::<Vec<_>>());
        assert_eq!(split, stratified_split(&lv, 3).unwrap());
    }

    #[test]
    fn ablation_rows_zero_the_right_terms() {
        let hp = Hyperparams::default();
        let div = ABLATION_CONFIGS[1].apply(&hp);
        assert_eq!((div.rep_weight, div.alpha, div.beta, div.gamma), (0.0, 1.0, 0.0, 1.0));
        let all = ABLATION_CONFIGS[6].apply(&hp);
        assert_eq!(all, hp);
    }
}
