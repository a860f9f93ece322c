//! E-DBSCAN anomaly subsystem.
//!
//! Plain DBSCAN over Euclidean distance, where the ε-neighbourhood of a
//! point includes the point itself and a core object needs at least
//! `min_pts` neighbours, extended with a local-density check: a candidate
//! core whose neighbourhood is too uneven is demoted to a border point.
//! The unevenness is the population variance of `|N(y)| / |N(x)|` over the
//! neighbours `y` of candidate `x`.
//!
//! Clusters are the connected components of core objects (two cores are
//! connected when within ε). A border point joins the cluster of its
//! nearest core, lower index on ties.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdd::BinaryClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EDbscanConfig {
    pub eps: f64,
    pub min_pts: usize,
    /// Demotion threshold on neighbourhood density variance;
    /// `f64::INFINITY` disables the extension.
    #[serde(with = "unbounded")]
    pub var_threshold: f64,
}

/// JSON has no infinity: an unbounded threshold is stored as `null`.
mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointKind {
    Core,
    Border,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EDbscanModel {
    config: EDbscanConfig,
    kinds: Vec<PointKind>,
    /// Cluster id per training point, `None` for noise.
    labels: Vec<Option<usize>>,
    clusters: usize,
    /// Distinct core objects, kept for classification.
    cores: Vec<Vec<f64>>,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn validate(config: &EDbscanConfig) -> Result<()> {
    if !(config.eps > 0.0 && config.eps.is_finite()) {
        return Err(Error::Range {
            what: "epsilon",
            value: config.eps,
        });
    }
    if config.min_pts < 2 {
        return Err(Error::Range {
            what: "min_pts",
            value: config.min_pts as f64,
        });
    }
    if config.var_threshold.is_nan() || config.var_threshold < 0.0 {
        return Err(Error::Range {
            what: "density variance threshold",
            value: config.var_threshold,
        });
    }
    Ok(())
}

/// Population variance of neighbour densities relative to the centre's.
pub fn density_variance(center_count: usize, neighbour_counts: impl Iterator<Item = usize>) -> f64 {
    let c = center_count as f64;
    let rel: Vec<f64> = neighbour_counts.map(|n| n as f64 / c).collect();
    if rel.is_empty() {
        return 0.0;
    }
    let mean = rel.iter().sum::<f64>() / rel.len() as f64;
    rel.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rel.len() as f64
}

pub fn edbscan_fit(points: &[Vec<f64>], config: &EDbscanConfig) -> Result<EDbscanModel> {
    validate(config)?;
    let n = points.len();
    let eps2 = config.eps * config.eps;
    let neighbours: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| squared_distance(&points[i], &points[j]) <= eps2)
                .collect()
        })
        .collect();

    let core: Vec<bool> = (0..n)
        .map(|i| {
            let count = neighbours[i].len();
            count >= config.min_pts
                && density_variance(count, neighbours[i].iter().map(|&j| neighbours[j].len()))
                    <= config.var_threshold
        })
        .collect();

    // Expand clusters breadth-first through core objects.
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut clusters = 0;
    let mut queue = std::collections::VecDeque::new();
    for seed in 0..n {
        if !core[seed] || labels[seed].is_some() {
            continue;
        }
        labels[seed] = Some(clusters);
        queue.push_back(seed);
        while let Some(c) = queue.pop_front() {
            for &j in &neighbours[c] {
                if core[j] && labels[j].is_none() {
                    labels[j] = Some(clusters);
                    queue.push_back(j);
                }
            }
        }
        clusters += 1;
    }

    let mut kinds = vec![PointKind::Noise; n];
    for i in 0..n {
        if core[i] {
            kinds[i] = PointKind::Core;
            continue;
        }
        let nearest = neighbours[i]
            .iter()
            .filter(|&&j| core[j])
            .map(|&j| (squared_distance(&points[i], &points[j]), j))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, j)) = nearest {
            kinds[i] = PointKind::Border;
            labels[i] = labels[j];
        }
    }

    let mut cores: Vec<Vec<f64>> = (0..n).filter(|&i| core[i]).map(|i| points[i].clone()).collect();
    cores.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    cores.dedup();

    Ok(EDbscanModel {
        config: *config,
        kinds,
        labels,
        clusters,
        cores,
    })
}

impl EDbscanModel {
    pub fn config(&self) -> &EDbscanConfig {
        &self.config
    }

    pub fn kinds(&self) -> &[PointKind] {
        &self.kinds
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters
    }

    pub fn core_objects(&self) -> &[Vec<f64>] {
        &self.cores
    }

    pub fn noise_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == PointKind::Noise).count()
    }

    /// Euclidean distance to the nearest core object (∞ with no cores).
    pub fn nearest_core_distance(&self, x: &[f64]) -> Result<f64> {
        if let Some(c) = self.cores.first() {
            if c.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: c.len(),
                    found: x.len(),
                });
            }
        }
        Ok(self
            .cores
            .iter()
            .map(|c| squared_distance(c, x))
            .fold(f64::INFINITY, f64::min)
            .sqrt())
    }

    /// Intrusive iff `x` lies farther than ε from every core object. The
    /// score `d / (d + ε)` crosses 0.5 exactly at the decision boundary.
    pub fn classify(&self, x: &[f64]) -> Result<(BinaryClass, f64)> {
        if self.kinds.is_empty() {
            return Err(Error::UnfittedModel);
        }
        let d = self.nearest_core_distance(x)?;
        let eps = self.config.eps;
        let score = if d.is_infinite() { 1.0 } else { d / (d + eps) };
        Ok((BinaryClass::from_intrusive(d > eps), score))
    }
}

/// k-distance elbow: each point's distance to its k-th nearest other point,
/// sorted ascending; the elbow is the sample farthest from the chord joining
/// the first and last values (both axes scaled to [0, 1]). Never returns
/// less than `floor`.
pub fn suggest_eps(points: &[Vec<f64>], k: usize, floor: f64) -> f64 {
    let n = points.len();
    if n <= k || k == 0 {
        return floor;
    }
    let mut kdist: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| squared_distance(&points[i], &points[j]))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.sqrt()
        })
        .collect();
    kdist.sort_by(f64::total_cmp);
    let (lo, hi) = (kdist[0], kdist[n - 1]);
    if hi <= lo {
        return hi.max(floor);
    }
    let mut best = (0.0, kdist[0]);
    for (i, &d) in kdist.iter().enumerate() {
        let x = i as f64 / (n - 1) as f64;
        let y = (d - lo) / (hi - lo);
        // distance from (x, y) to the chord y = x, up to a constant factor
        let gap = x - y;
        if gap > best.0 {
            best = (gap, d);
        }
    }
    best.1.max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eps: f64, min_pts: usize) -> EDbscanConfig {
        EDbscanConfig {
            eps,
            min_pts,
            var_threshold: f64::INFINITY,
        }
    }

    #[test]
    fn two_pairs_and_a_singleton() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![5.0, 5.0],
            vec![5.0, 5.1],
            vec![20.0, -3.0],
        ];
        let m = edbscan_fit(&pts, &cfg(0.15, 2)).unwrap();
        assert_eq!(m.cluster_count(), 2);
        assert_eq!(m.noise_count(), 1);
        assert_eq!(m.kinds()[4], PointKind::Noise);
        assert_eq!(m.labels()[0], m.labels()[1]);
        assert_ne!(m.labels()[0], m.labels()[2]);
    }

    #[test]
    fn tiny_eps_makes_everything_noise() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.5 * i as f64]).collect();
        let m = edbscan_fit(&pts, &cfg(1e-9, 2)).unwrap();
        assert_eq!(m.noise_count(), 10);
        assert_eq!(m.cluster_count(), 0);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = vec![vec![0.3, 0.3]; 6];
        let m = edbscan_fit(&pts, &cfg(0.01, 6)).unwrap();
        assert_eq!(m.cluster_count(), 1);
        assert_eq!(m.noise_count(), 0);
        assert_eq!(m.core_objects().len(), 1);
    }

    #[test]
    fn classify_rules() {
        let pts = vec![vec![0.0, 0.0], vec![0.05, 0.0], vec![0.0, 0.05]];
        let m = edbscan_fit(&pts, &cfg(0.1, 3)).unwrap();
        let (v, s) = m.classify(&[0.0, 0.0]).unwrap();
        assert_eq!(v, BinaryClass::Normal);
        assert_eq!(s, 0.0);
        assert_eq!(m.classify(&[3.0, 3.0]).unwrap().0, BinaryClass::Intrusive);
        assert!(m.classify(&[3.0]).is_err());
        let empty = edbscan_fit(&[], &cfg(0.1, 3)).unwrap();
        assert!(matches!(empty.classify(&[0.0]), Err(Error::UnfittedModel)));
    }

    #[test]
    fn variance_rule_demotes_uneven_cores() {
        // A dense blob with a sparse tail: the point bridging them sees very
        // different neighbour densities.
        let mut pts: Vec<Vec<f64>> = (0..8).map(|i| vec![0.001 * i as f64]).collect();
        pts.push(vec![0.1]);
        pts.push(vec![0.2]);
        let plain = edbscan_fit(&pts, &cfg(0.1, 2)).unwrap();
        let strict = edbscan_fit(&pts, &EDbscanConfig { var_threshold: 0.05, ..cfg(0.1, 2) }).unwrap();
        let plain_cores = plain.kinds().iter().filter(|k| **k == PointKind::Core).count();
        let strict_cores = strict.kinds().iter().filter(|k| **k == PointKind::Core).count();
        assert!(strict_cores < plain_cores);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(edbscan_fit(&[], &cfg(0.0, 2)).is_err());
        assert!(edbscan_fit(&[], &cfg(0.1, 1)).is_err());
    }

    #[test]
    fn elbow_separates_blob_from_outliers() {
        let mut pts: Vec<Vec<f64>> = (0..50).map(|i| vec![0.01 * (i % 10) as f64, 0.01 * (i / 10) as f64]).collect();
        pts.extend([vec![1.0, 1.0], vec![0.9, 0.2], vec![0.3, 0.95]]);
        let eps = suggest_eps(&pts, 3, 1e-6);
        assert!((0.01..0.5).contains(&eps), "{eps}");
    }

    #[test]
    fn unbounded_threshold_survives_json() {
        for var_threshold in [f64::INFINITY, 0.25] {
            let c = EDbscanConfig { var_threshold, ..cfg(0.5, 3) };
            let back: EDbscanConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }
}
