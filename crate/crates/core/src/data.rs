//! Datasets: synthesis, normalization, sharding and adjacent-dataset
//! construction.

use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{invalid, Error, Result};
use crate::objective::Sample;
use crate::rng::{self, Stream};
use crate::vector;

/// Fraction of synthetic logistic labels flipped after planting.
pub const LABEL_NOISE: f64 = 0.1;

/// Normalization leaves data untouched when the max feature norm is within
/// this slack of 1, which makes it idempotent.
const NORM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    SyntheticQuadratic,
    SyntheticLogistic,
    SyntheticClassification,
    Csv,
}

/// An ordered sample sequence. Order is part of identity: adjacency replaces
/// the last sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, provenance: Provenance) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let width = samples[0].features.len();
        if let Some(bad) = samples.iter().find(|s| s.features.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: bad.features.len(),
            });
        }
        Ok(Dataset {
            samples,
            provenance,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.samples[0].features.len()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn max_feature_norm(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| vector::norm(&s.features))
            .fold(0.0, f64::max)
    }

    /// Scales all features by a common factor so the largest feature norm is
    /// 1. Datasets already within unit max norm are returned unchanged.
    pub fn normalized(mut self) -> Self {
        let m = self.max_feature_norm();
        if m > 1.0 + NORM_SLACK {
            for s in &mut self.samples {
                s.features.iter_mut().for_each(|v| *v /= m);
            }
        }
        self
    }
}

/// Recipes for [`synthesize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Centers drawn from a standard normal. With `symmetric`, centers come in
    /// `±c` pairs (an odd trailing center is zero) so the mean center is 0.
    Quadratic { symmetric: bool },
    /// Normal features normalized to unit max norm; labels from a planted
    /// linear separator with [`LABEL_NOISE`] flips.
    Logistic,
    /// Gaussian class clusters for the MLP kind, normalized.
    Classification { classes: usize },
}

/// Deterministic synthetic dataset of `n` samples in dimension `d`.
pub fn synthesize(kind: SynthKind, n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("N", "must be at least 1"));
    }
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let gaussian = |rng: &mut Xoshiro256PlusPlus| -> Vec<f64> {
        (0..d).map(|_| StandardNormal.sample(rng)).collect()
    };
    match kind {
        SynthKind::Quadratic { symmetric } => {
            let mut samples = Vec::with_capacity(n);
            while samples.len() < n {
                let c = gaussian(&mut rng);
                if symmetric {
                    if samples.len() + 1 == n {
                        samples.push(Sample::center(alloc::vec![0.0; d]));
                    } else {
                        let neg = c.iter().map(|v| -v).collect();
                        samples.push(Sample::center(c));
                        samples.push(Sample::center(neg));
                    }
                } else {
                    samples.push(Sample::center(c));
                }
            }
            Dataset::new(samples, Provenance::SyntheticQuadratic)
        }
        SynthKind::Logistic => {
            let planted = gaussian(&mut rng);
            let samples = (0..n)
                .map(|_| {
                    let u = gaussian(&mut rng);
                    let mut y = if vector::dot(&planted, &u) > 0.0 { 1.0 } else { 0.0 };
                    if rng.gen_bool(LABEL_NOISE) {
                        y = 1.0 - y;
                    }
                    Sample::new(u, y)
                })
                .collect();
            Ok(Dataset::new(samples, Provenance::SyntheticLogistic)?.normalized())
        }
        SynthKind::Classification { classes } => {
            if classes < 2 {
                return Err(invalid("classes", "must be at least 2"));
            }
            let means: Vec<Vec<f64>> = (0..classes)
                .map(|_| gaussian(&mut rng).into_iter().map(|v| 2.0 * v).collect())
                .collect();
            let samples = (0..n)
                .map(|_| {
                    let c = rng.gen_range(0..classes);
                    let u = gaussian(&mut rng)
                        .into_iter()
                        .zip(&means[c])
                        .map(|(e, m)| e + m)
                        .collect();
                    Sample::new(u, c as f64)
                })
                .collect();
            Ok(Dataset::new(samples, Provenance::SyntheticClassification)?.normalized())
        }
    }
}

/// Contiguous near-equal partition of `0..n` into `p` index intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardAssignment {
    ranges: Vec<Range<usize>>,
}

impl ShardAssignment {
    pub fn workers(&self) -> usize {
        self.ranges.len()
    }

    pub fn range(&self, worker: usize) -> Range<usize> {
        self.ranges[worker].clone()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    pub fn min_size(&self) -> usize {
        self.ranges.iter().map(|r| r.len()).min().unwrap_or(0)
    }
}

/// Splits `n` samples over `p` workers; the first `n mod p` shards take one
/// extra sample.
pub fn shard(n: usize, p: usize) -> Result<ShardAssignment> {
    if p == 0 {
        return Err(invalid("P", "must be at least 1"));
    }
    if p > n {
        return Err(invalid("P", alloc::format!("{p} workers exceed {n} samples")));
    }
    let base = n / p;
    let extra = n % p;
    let mut start = 0;
    let ranges = (0..p)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect();
    Ok(ShardAssignment { ranges })
}

/// Returns `S′`: identical to `S` except the last sample, which becomes a
/// copy of a uniformly drawn `S[j]` different from the original last sample.
pub fn make_adjacent(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::AdjacencyImpossible("need at least two samples"));
    }
    let samples = dataset.samples();
    let last = &samples[n - 1];
    if samples.iter().all(|s| s == last) {
        return Err(Error::AdjacencyImpossible("all samples are identical"));
    }
    let mut rng = rng::stream(seed, Stream::Adjacent);
    for _ in 0..100 {
        let j = rng.gen_range(0..n);
        if samples[j] != *last {
            let mut out = samples.to_vec();
            out[n - 1] = samples[j].clone();
            return Dataset::new(out, dataset.provenance);
        }
    }
    Err(Error::AdjacencyImpossible(
        "no distinct replacement found within 100 draws",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use crate::objective::ObjectiveModel;
    use alloc::vec;

    #[test]
    fn synthesis_is_deterministic() {
        for kind in [
            SynthKind::Quadratic { symmetric: false },
            SynthKind::Logistic,
            SynthKind::Classification { classes: 3 },
        ] {
            assert_eq!(synthesize(kind, 20, 4, 9), synthesize(kind, 20, 4, 9));
            assert_ne!(synthesize(kind, 20, 4, 9), synthesize(kind, 20, 4, 10));
        }
    }

    #[test]
    fn symmetric_centers_have_zero_full_gradient_at_origin() {
        let data = synthesize(SynthKind::Quadratic { symmetric: true }, 2, 3, 1).unwrap();
        let m = ObjectiveModel::quadratic(SymMatrix::identity(3)).unwrap();
        let g = m.full_grad(&[0.0; 3], data.samples()).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn logistic_features_are_unit_bounded() {
        let data = synthesize(SynthKind::Logistic, 100, 5, 3).unwrap();
        assert_eq!(data.len(), 100);
        assert!(data.samples().iter().all(|s| vector::norm(&s.features) <= 1.0 + 1e-12));
        let labels: f64 = data.samples().iter().map(|s| s.label).sum();
        assert!(labels > 10.0 && labels < 90.0);
    }

    #[test]
    fn normalization_hits_unit_norm_and_is_idempotent() {
        let s = vec![
            Sample::new(vec![6.0, 8.0], 1.0),
            Sample::new(vec![1.0, 0.0], 0.0),
        ];
        let once = Dataset::new(s, Provenance::Csv).unwrap().normalized();
        assert!((once.max_feature_norm() - 1.0).abs() < 1e-15);
        assert_eq!(once.clone().normalized(), once);
    }

    #[test]
    fn shard_sizes() {
        assert_eq!(shard(25, 5).unwrap().sizes(), vec![5; 5]);
        assert_eq!(shard(26, 5).unwrap().sizes(), vec![6, 5, 5, 5, 5]);
        assert_eq!(shard(7, 1).unwrap().ranges(), &[0..7]);
        assert!(shard(3, 4).is_err());
        assert!(shard(3, 0).is_err());
    }

    #[test]
    fn adjacent_differs_only_in_last_position() {
        let data = synthesize(SynthKind::Logistic, 30, 3, 5).unwrap();
        let adj = make_adjacent(&data, 11).unwrap();
        assert_eq!(&adj.samples()[..29], &data.samples()[..29]);
        assert_ne!(adj.samples()[29], data.samples()[29]);
        assert!(data.samples().contains(&adj.samples()[29]));
        assert_eq!(make_adjacent(&data, 11).unwrap(), adj);
    }

    #[test]
    fn adjacency_errors() {
        let same = Dataset::new(vec![Sample::center(vec![1.0]); 4], Provenance::Csv).unwrap();
        assert!(make_adjacent(&same, 0).is_err());
        let one = Dataset::new(vec![Sample::center(vec![1.0])], Provenance::Csv).unwrap();
        assert!(make_adjacent(&one, 0).is_err());
    }
}
