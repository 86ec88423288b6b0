//! K-means partition of the pool and the matrices derived from it: the
//! cluster indicator `C`, the squared centroid distances `D`, and the
//! per-cluster medoids that make up display zero.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Dataset, Matrix};
use crate::{derive_seed, seeded_rng};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    /// K x d.
    pub centroids: Matrix,
    pub assignment: Vec<usize>,
    /// Sum of squared distances of points to their assigned centroid.
    pub distortion: f64,
    /// Distortion after every assignment step, in order.
    pub distortion_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

/// n x K one-hot cluster membership.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMatrix {
    matrix: Matrix,
    assignment: Vec<usize>,
}

impl IndicatorMatrix {
    /// Builds `C` from a cluster assignment; every index must be below `k`.
    pub fn from_assignment(assignment: &[usize], k: usize) -> Result<Self> {
        let mut c = Matrix::zeros(assignment.len(), k);
        for (i, &a) in assignment.iter().enumerate() {
            if a >= k {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} assigned to cluster {a}, but K = {k}"
                )));
            }
            c.set(i, a, 1.0);
        }
        Ok(Self {
            matrix: c,
            assignment: assignment.to_vec(),
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn k(&self) -> usize {
        self.matrix.cols()
    }

    /// Cluster of sample `i` (the column holding its 1).
    #[inline]
    pub fn cluster_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    /// Cluster masses `C' mu`.
    pub fn cluster_mass(&self, mu: &[f64]) -> Vec<f64> {
        let mut mass = vec![0.0; self.k()];
        for (i, &m) in mu.iter().enumerate() {
            for (k, c) in self.matrix.row(i).iter().enumerate() {
                mass[k] += c * m;
            }
        }
        mass
    }

    pub fn select_rows(&self, idx: &[usize]) -> IndicatorMatrix {
        IndicatorMatrix {
            matrix: self.matrix.select_rows(idx),
            assignment: idx.iter().map(|&i| self.assignment[i]).collect(),
        }
    }
}

/// n x K squared euclidean distances to every centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(Matrix);

impl DistanceMatrix {
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if let Some(pos) = m.as_slice().iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "distance entry {pos} is negative or non-finite"
            )));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn select_rows(&self, idx: &[usize]) -> DistanceMatrix {
        DistanceMatrix(self.0.select_rows(idx))
    }
}

#[inline]
pub(crate) fn squared_distance(x: &[f32], c: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .map(|(&a, &b)| {
            let diff = f64::from(a) - b;
            diff * diff
        })
        .sum()
}

fn nearest(x: &[f32], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for k in 0..centroids.rows() {
        let dist = squared_distance(x, centroids.row(k));
        if dist < best.1 {
            best = (k, dist);
        }
    }
    best
}

fn kmeans_pp_init(dataset: &Dataset, k: usize, rng: &mut impl Rng) -> Matrix {
    let n = dataset.n();
    let d = dataset.d();
    let mut centroids = Matrix::zeros(k, d);
    let widen = |row: &[f32], out: &mut [f64]| {
        for (o, &v) in out.iter_mut().zip(row) {
            *o = f64::from(v);
        }
    };
    let first = rng.random_range(0..n);
    widen(dataset.row(first), centroids.row_mut(0));
    let mut closest: Vec<f64> = (0..n)
        .map(|i| squared_distance(dataset.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in closest.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Rounding can walk past the last positive weight.
            if closest[chosen] <= 0.0 {
                chosen = closest
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        widen(dataset.row(pick), centroids.row_mut(c));
        for (i, slot) in closest.iter_mut().enumerate() {
            let dist = squared_distance(dataset.row(i), centroids.row(c));
            if dist < *slot {
                *slot = dist;
            }
        }
    }
    centroids
}

/// Lloyd iterations from k-means++ seeding. Stops when the assignment is
/// unchanged or after `max_iter` assignment steps.
pub fn kmeans_fit(dataset: &Dataset, k: usize, seed: u64, max_iter: usize) -> Result<ClusterModel> {
    let n = dataset.n();
    let d = dataset.d();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {k} must lie in [1, {n}]"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    dataset.check_finite()?;

    let mut rng = seeded_rng(seed, 0x6b6d);
    let mut centroids = kmeans_pp_init(dataset, k, &mut rng);
    let mut assignment = vec![usize::MAX; n];
    let mut own_dist = vec![0.0; n];
    let mut trace = Vec::new();

    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let (a, dist) = nearest(dataset.row(i), &centroids);
            if assignment[i] != a {
                assignment[i] = a;
                changed = true;
            }
            own_dist[i] = dist;
        }
        trace.push(own_dist.iter().sum());
        if !changed {
            break;
        }

        // Update step: means of the new assignment.
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let a = assignment[i];
            counts[a] += 1;
            for (s, &v) in sums.row_mut(a).iter_mut().zip(dataset.row(i)) {
                *s += f64::from(v);
            }
        }
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed with the point farthest from its own centroid.
                let far = (0..n)
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| own_dist[a].total_cmp(&own_dist[b]).then(b.cmp(&a)))
                    .expect("k <= n leaves a candidate");
                taken.push(far);
                for (dst, &v) in centroids.row_mut(c).iter_mut().zip(dataset.row(far)) {
                    *dst = f64::from(v);
                }
            }
        }
    }

    // Leave the assignment consistent with the final centroids.
    for i in 0..n {
        let (a, dist) = nearest(dataset.row(i), &centroids);
        assignment[i] = a;
        own_dist[i] = dist;
    }
    let distortion: f64 = own_dist.iter().sum();
    if trace.last() != Some(&distortion) {
        trace.push(distortion);
    }
    Ok(ClusterModel {
        centroids,
        assignment,
        distortion,
        distortion_trace: trace,
    })
}

/// Best of `restarts` independent [`kmeans_fit`] runs by final distortion
/// (earliest run on ties). Run 0 uses `seed` itself, so one restart is
/// exactly [`kmeans_fit`].
pub fn kmeans_fit_restarts(
    dataset: &Dataset,
    k: usize,
    seed: u64,
    max_iter: usize,
    restarts: usize,
) -> Result<ClusterModel> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let mut best = kmeans_fit(dataset, k, seed, max_iter)?;
    for r in 1..restarts {
        let run = kmeans_fit(dataset, k, derive_seed(seed, 0x6b6d, r as u64), max_iter)?;
        if run.distortion < best.distortion {
            best = run;
        }
    }
    Ok(best)
}

pub fn assignment_matrix(model: &ClusterModel) -> IndicatorMatrix {
    IndicatorMatrix::from_assignment(&model.assignment, model.k())
        .expect("cluster model assignment is always below K")
}

pub fn squared_distance_matrix(model: &ClusterModel, dataset: &Dataset) -> Result<DistanceMatrix> {
    if model.centroids.cols() != dataset.d() {
        return Err(Error::InvalidArgument(format!(
            "centroid dimension {} does not match feature dimension {}",
            model.centroids.cols(),
            dataset.d()
        )));
    }
    let k = model.k();
    let mut dist = Matrix::zeros(dataset.n(), k);
    for i in 0..dataset.n() {
        let x = dataset.row(i);
        for c in 0..k {
            dist.set(i, c, squared_distance(x, model.centroids.row(c)));
        }
    }
    Ok(DistanceMatrix(dist))
}

/// Members of every cluster ordered by distance to the centroid, ties by
/// index. Empty clusters yield empty lists.
pub fn ranked_members(model: &ClusterModel, dataset: &Dataset) -> Vec<Vec<usize>> {
    let mut members: Vec<Vec<(f64, usize)>> = vec![Vec::new(); model.k()];
    for (i, &a) in model.assignment.iter().enumerate() {
        members[a].push((squared_distance(dataset.row(i), model.centroids.row(a)), i));
    }
    members
        .into_iter()
        .map(|mut m| {
            m.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            m.into_iter().map(|(_, i)| i).collect()
        })
        .collect()
}

/// The sample nearest to each centroid, in cluster order.
pub fn medoid_indices(model: &ClusterModel, dataset: &Dataset) -> Vec<usize> {
    ranked_members(model, dataset)
        .into_iter()
        .filter_map(|m| m.first().copied())
        .collect()
}
