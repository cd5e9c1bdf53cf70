use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::textfeat::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingConfig {
    pub num_rings: usize,
    pub target_size: usize,
    pub seed: u64,
}

impl RingConfig {
    pub fn new(target_size: usize, seed: u64) -> Self {
        RingConfig {
            num_rings: 10,
            target_size,
            seed,
        }
    }
}

/// Anything with a dimension that can be summed into a centroid and measured
/// against one.
pub trait RingPoint {
    fn dim(&self) -> usize;
    fn add_to(&self, acc: &mut [f64]);
    fn sq_dist(&self, centroid: &[f64]) -> f64;
}

impl RingPoint for Vec<f64> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn add_to(&self, acc: &mut [f64]) {
        acc.iter_mut().zip(self).for_each(|(a, x)| *a += x);
    }

    fn sq_dist(&self, c: &[f64]) -> f64 {
        self.iter().zip(c).map(|(x, m)| (x - m).powi(2)).sum()
    }
}

impl RingPoint for SparseVector {
    fn dim(&self) -> usize {
        SparseVector::dim(self)
    }

    fn add_to(&self, acc: &mut [f64]) {
        for &(i, v) in self.entries() {
            acc[i] += v;
        }
    }

    // ‖x − c‖² = ‖c‖² + Σ_nz (x_i² − 2 x_i c_i); ‖c‖² is the same for every
    // point, but kept so the value is a true distance.
    fn sq_dist(&self, c: &[f64]) -> f64 {
        let base: f64 = c.iter().map(|m| m * m).sum();
        base + self.entries().iter().map(|&(i, x)| x * x - 2.0 * x * c[i]).sum::<f64>()
    }
}

/// Largest-remainder apportionment of `target` over `sizes`; equal remainders
/// go to the lower ring index.
pub fn ring_quotas(sizes: &[usize], target: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut quotas: Vec<usize> = sizes.iter().map(|&s| target * s / n).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&r| std::cmp::Reverse(target * sizes[r] % n));
    let left = target - quotas.iter().sum::<usize>();
    for &r in order.iter().take(left) {
        quotas[r] += 1;
    }
    quotas
}

/// Distance-stratified undersampling of one class; returns sorted indices.
pub fn ring_undersample<P: RingPoint>(points: &[P], cfg: &RingConfig) -> Result<Vec<usize>> {
    let n = points.len();
    if cfg.num_rings == 0 {
        return Err(Error::config("num_rings must be >= 1"));
    }
    if cfg.target_size > n {
        return Err(Error::config(format!(
            "target size {} exceeds class size {n}",
            cfg.target_size
        )));
    }
    if cfg.target_size == n {
        return Ok((0..n).collect());
    }
    let dim = points[0].dim();
    if let Some(p) = points.iter().find(|p| p.dim() != dim) {
        return Err(Error::Dimension { expected: dim, got: p.dim() });
    }
    let mut centroid = vec![0.0; dim];
    points.iter().for_each(|p| p.add_to(&mut centroid));
    centroid.iter_mut().for_each(|c| *c /= n as f64);

    let dist: Vec<f64> = points.iter().map(|p| p.sq_dist(&centroid)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));

    let rings = cfg.num_rings.min(n);
    let (base, extra) = (n / rings, n % rings);
    let sizes: Vec<usize> = (0..rings).map(|r| base + usize::from(r < extra)).collect();
    let quotas = ring_quotas(&sizes, cfg.target_size);

    let mut rng = seed::rng(cfg.seed);
    let mut selected = Vec::with_capacity(cfg.target_size);
    let mut start = 0;
    for (size, quota) in sizes.into_iter().zip(quotas) {
        let ring = &order[start..start + size];
        selected.extend(sample(&mut rng, size, quota).into_iter().map(|k| ring[k]));
        start += size;
    }
    selected.sort_unstable();
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotas_sum_to_target() {
        assert_eq!(ring_quotas(&[10; 10], 50), vec![5; 10]);
        assert_eq!(ring_quotas(&[4, 3, 3], 5), vec![2, 2, 1]);
        assert_eq!(ring_quotas(&[3, 3, 3], 2), vec![1, 1, 0]);
    }

    #[test]
    fn equal_rings_get_equal_share() {
        let pts: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64, 0.0]).collect();
        let cfg = RingConfig::new(50, 3);
        let idx = ring_undersample(&pts, &cfg).unwrap();
        assert_eq!(idx.len(), 50);
        // centroid at 49.5: rank by |i − 49.5|; each ring of 10 contributes 5
        let mut order: Vec<usize> = (0..100).collect();
        order.sort_by(|&a, &b| (a as f64 - 49.5).abs().total_cmp(&(b as f64 - 49.5).abs()).then(a.cmp(&b)));
        for ring in order.chunks(10) {
            assert_eq!(ring.iter().filter(|i| idx.contains(i)).count(), 5);
        }
        assert_eq!(idx, ring_undersample(&pts, &cfg).unwrap());
    }

    #[test]
    fn identity_and_errors() {
        let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64]).collect();
        assert_eq!(ring_undersample(&pts, &RingConfig::new(7, 0)).unwrap(), (0..7).collect::<Vec<_>>());
        assert!(ring_undersample(&pts, &RingConfig::new(8, 0)).is_err());
        assert_eq!(ring_undersample(&pts, &RingConfig::new(3, 0)).unwrap().len(), 3);
    }

    #[test]
    fn sparse_matches_dense() {
        let dense: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 5) as f64, 0.0, (i % 7) as f64]).collect();
        let sparse: Vec<SparseVector> = dense
            .iter()
            .map(|v| {
                let e = v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i, *x)).collect();
                SparseVector::new(3, e).unwrap()
            })
            .collect();
        let cfg = RingConfig::new(12, 4);
        assert_eq!(ring_undersample(&dense, &cfg).unwrap(), ring_undersample(&sparse, &cfg).unwrap());
    }
}
