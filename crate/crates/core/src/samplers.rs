//! Comparison display strategies: farthest-first (maxmin), smallest-margin
//! (uncertainty), and uniform random sampling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::squared_distance;
use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Proposed,
    Maxmin,
    Uncertainty,
    Random,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [
        SamplerKind::Proposed,
        SamplerKind::Maxmin,
        SamplerKind::Uncertainty,
        SamplerKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Proposed => "proposed",
            SamplerKind::Maxmin => "maxmin",
            SamplerKind::Uncertainty => "uncertainty",
            SamplerKind::Random => "random",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(SamplerKind::Proposed),
            "maxmin" => Ok(SamplerKind::Maxmin),
            "uncertainty" => Ok(SamplerKind::Uncertainty),
            "random" => Ok(SamplerKind::Random),
            other => Err(Error::config(
                "strategy",
                format!("must be one of proposed, maxmin, uncertainty, random (got {other:?})"),
            )),
        }
    }
}

fn mask_from(n: usize, labeled: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    for &i in labeled {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "labeled index {i} out of range for pool of {n}"
            )));
        }
        mask[i] = true;
    }
    Ok(mask)
}

/// Greedy farthest-first: each pick maximizes the euclidean distance to the
/// nearest labeled or already picked sample. Ties go to the smaller index.
pub fn maxmin_select(features: &Dataset, labeled: &[usize], b: usize) -> Result<Vec<usize>> {
    if labeled.is_empty() {
        return Err(Error::InvalidState(
            "maxmin needs at least one labeled sample to measure distances from".into(),
        ));
    }
    let n = features.n();
    let mask = mask_from(n, labeled)?;
    let mut candidates: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    if candidates.is_empty() {
        return Err(Error::InvalidState("every sample is already labeled".into()));
    }
    let widen = |i: usize| -> Vec<f64> { features.row(i).iter().map(|&v| f64::from(v)).collect() };

    let anchors: Vec<Vec<f64>> = labeled.iter().map(|&l| widen(l)).collect();
    let mut nearest: Vec<f64> = candidates
        .iter()
        .map(|&i| {
            anchors
                .iter()
                .map(|a| squared_distance(features.row(i), a))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let take = b.min(candidates.len());
    let mut picked = Vec::with_capacity(take);
    for _ in 0..take {
        let mut best = 0;
        for pos in 1..candidates.len() {
            if nearest[pos] > nearest[best] {
                best = pos;
            }
        }
        let chosen = candidates.remove(best);
        nearest.remove(best);
        picked.push(chosen);
        let anchor = widen(chosen);
        for (pos, &i) in candidates.iter().enumerate() {
            let dist = squared_distance(features.row(i), &anchor);
            if dist < nearest[pos] {
                nearest[pos] = dist;
            }
        }
    }
    Ok(picked)
}

/// The `b` unlabeled samples with the smallest `|score|`, closest first.
pub fn uncertainty_select(raw_scores: &[f64], labeled_mask: &[bool], b: usize) -> Result<Vec<usize>> {
    if raw_scores.len() != labeled_mask.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for a mask of {}",
            raw_scores.len(),
            labeled_mask.len()
        )));
    }
    if let Some(i) = raw_scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("score {i} is not finite")));
    }
    let mut candidates: Vec<usize> = (0..raw_scores.len()).filter(|&i| !labeled_mask[i]).collect();
    if candidates.is_empty() {
        return Err(Error::InvalidState("every sample is already labeled".into()));
    }
    candidates.sort_by(|&x, &y| {
        raw_scores[x]
            .abs()
            .total_cmp(&raw_scores[y].abs())
            .then(x.cmp(&y))
    });
    candidates.truncate(b);
    Ok(candidates)
}

/// Uniform sample without replacement from the unlabeled samples.
pub fn random_select(labeled_mask: &[bool], b: usize, seed: u64) -> Result<Vec<usize>> {
    let candidates: Vec<usize> = (0..labeled_mask.len()).filter(|&i| !labeled_mask[i]).collect();
    if candidates.is_empty() {
        return Err(Error::InvalidState("every sample is already labeled".into()));
    }
    let mut rng = seeded_rng(seed, 0x726e);
    let take = b.min(candidates.len());
    Ok(rand::seq::index::sample(&mut rng, candidates.len(), take)
        .into_iter()
        .map(|pos| candidates[pos])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn line(xs: &[f32]) -> Dataset {
        Dataset::new(xs.to_vec(), 1, Dataset::sequential_ids(xs.len()), None).unwrap()
    }

    #[test]
    fn maxmin_hand_geometry() {
        let ds = line(&[0.0, 1.0, 2.0, 10.0]);
        assert_eq!(maxmin_select(&ds, &[0], 2).unwrap(), vec![3, 2]);
    }

    #[test]
    fn maxmin_exhausts_pool() {
        let ds = line(&[0.0, 1.0, 2.0, 10.0]);
        let mut got = maxmin_select(&ds, &[1], 10).unwrap();
        got.sort_unstable();
        assert_eq!(got, vec![0, 2, 3]);
    }

    #[test]
    fn maxmin_needs_labels() {
        let ds = line(&[0.0, 1.0]);
        assert!(matches!(maxmin_select(&ds, &[], 1), Err(Error::InvalidState(_))));
    }

    #[test]
    fn maxmin_is_permutation_covariant() {
        let mut rng = seeded_rng(5, 5);
        let n = 25;
        let pts: Vec<f32> = (0..n * 2).map(|_| rng.random::<f32>()).collect();
        let ds = Dataset::new(pts.clone(), 2, Dataset::sequential_ids(n), None).unwrap();
        let labeled = [3, 17];
        let mut a = maxmin_select(&ds, &labeled, 6).unwrap();

        // Reverse the pool, select, and map back.
        let perm: Vec<usize> = (0..n).rev().collect();
        let permuted = ds.subset(&perm);
        let labeled_p: Vec<usize> = labeled.iter().map(|&i| n - 1 - i).collect();
        let mut b: Vec<usize> = maxmin_select(&permuted, &labeled_p, 6)
            .unwrap()
            .into_iter()
            .map(|p| perm[p])
            .collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn uncertainty_examples() {
        let scores = [-3.0, 0.1, -0.05, 2.0];
        assert_eq!(uncertainty_select(&scores, &[false; 4], 2).unwrap(), vec![2, 1]);
        assert_eq!(uncertainty_select(&[1.0; 5], &[false; 5], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(
            uncertainty_select(&scores, &[false, false, true, false], 2).unwrap(),
            vec![1, 3]
        );
    }

    #[test]
    fn random_single_candidate_and_determinism() {
        assert_eq!(random_select(&[true, false, true], 3, 1).unwrap(), vec![1]);
        let mask = vec![false; 50];
        assert_eq!(
            random_select(&mask, 10, 77).unwrap(),
            random_select(&mask, 10, 77).unwrap()
        );
        assert!(random_select(&[true, true], 1, 0).is_err());
    }

    #[test]
    fn random_frequencies_are_uniform() {
        let mask = [false; 4];
        let draws = 10_000;
        let mut counts = [0usize; 4];
        for seed in 0..draws {
            counts[random_select(&mask, 1, seed).unwrap()[0]] += 1;
        }
        let p = 0.25;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn samplers_return_disjoint_distinct_sets() {
        let mut rng = seeded_rng(12, 0);
        for trial in 0..20u64 {
            let n = rng.random_range(3..30);
            let pts: Vec<f32> = (0..n).map(|_| rng.random::<f32>()).collect();
            let ds = line(&pts);
            let mask: Vec<bool> = (0..n).map(|i| i == 0 || rng.random::<f64>() < 0.3).collect();
            let labeled: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
            let unlabeled = n - labeled.len();
            if unlabeled == 0 {
                continue;
            }
            let b = rng.random_range(1..8);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for set in [
                maxmin_select(&ds, &labeled, b).unwrap(),
                uncertainty_select(&scores, &mask, b).unwrap(),
                random_select(&mask, b, trial).unwrap(),
            ] {
                assert_eq!(set.len(), b.min(unlabeled));
                let mut sorted = set.clone();
                sorted.sort_unstable();
                sorted.dedup();
                assert_eq!(sorted.len(), set.len());
                assert!(set.iter().all(|&i| !mask[i]));
            }
        }
    }

    #[test]
    fn parses_names() {
        for kind in SamplerKind::ALL {
            assert_eq!(kind.name().parse::<SamplerKind>().unwrap(), kind);
        }
        assert!("greedy".parse::<SamplerKind>().is_err());
    }
}
