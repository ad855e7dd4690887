//! K-fold cross-validation error and its average over random partitions.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::error::BmaError;
use crate::methods::{fit_method, Method, MethodOptions};
use crate::regression::Dataset;
use crate::scalar::Scalar;

/// Case-to-fold map with labels `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    pub assignments: Vec<usize>,
    pub k: usize,
}

impl FoldPartition {
    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn fold_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a - 1] += 1;
        }
        sizes
    }
}

/// Random balanced partition: shuffle the cases, then deal them round-robin.
pub fn kfold_partition<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<FoldPartition, BmaError> {
    if k < 2 || k > n {
        return Err(BmaError::InvalidInput(format!("K = {k} must lie in [2, n = {n}]")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k + 1;
    }
    Ok(FoldPartition { assignments, k })
}

/// `(1/n) Σ_i (y_i - f̂^(-κ(i))(x_i))²` with each fold's model trained on
/// the other folds after re-centering that training split.
pub fn cve<T: Scalar>(
    data: &Dataset<T>,
    method: Method,
    opts: &MethodOptions,
    partition: &FoldPartition,
) -> Result<T, BmaError> {
    if partition.n() != data.n() {
        return Err(BmaError::InvalidInput(format!(
            "partition covers {} cases, data has {}",
            partition.n(),
            data.n()
        )));
    }
    // Summed in case order so the value does not depend on fold labels.
    let mut sq = vec![T::zero(); data.n()];
    for fold in 1..=partition.k {
        let wrap = |e: BmaError| BmaError::Fold { fold, source: Box::new(e) };
        let held_out = partition.fold_rows(fold);
        let train_rows: Vec<usize> = (0..data.n()).filter(|&i| partition.assignments[i] != fold).collect();
        let train = data.subset(&train_rows).map_err(wrap)?;
        let fit = fit_method(&train, method, opts).map_err(wrap)?;
        let pred = fit.predictor.predict(&data.x_raw.select_rows(&held_out)).map_err(wrap)?;
        for (&i, &yhat) in held_out.iter().zip(&pred) {
            let e = data.y[i] - yhat;
            sq[i] = e * e;
        }
    }
    Ok(sq.into_iter().sum::<T>() / T::from_usize_lossy(data.n()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcveEstimate<T> {
    pub ecve: T,
    /// Partitions actually averaged; 1 when `k = n`.
    pub t_used: usize,
    pub cves: Vec<T>,
}

/// Average CVE over `t` random partitions. Partition `i` is drawn from its
/// own generator (`seed`, stream `i`), so the estimate does not depend on
/// how the work is scheduled. With `k = n` the partition is unique and a
/// single CVE is returned.
pub fn ecve_estimate<T: Scalar>(
    data: &Dataset<T>,
    method: Method,
    opts: &MethodOptions,
    k: usize,
    t: usize,
    seed: u64,
) -> Result<EcveEstimate<T>, BmaError> {
    if t == 0 {
        return Err(BmaError::InvalidInput("T must be at least 1".into()));
    }
    let n = data.n();
    let t_used = if k == n { 1 } else { t };
    let cves = (0..t_used)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let part = kfold_partition(n, k, &mut rng)?;
            cve(data, method, opts, &part)
        })
        .collect::<Result<Vec<T>, BmaError>>()?;
    let ecve = cves.iter().copied().sum::<T>() / T::from_usize_lossy(t_used);
    Ok(EcveEstimate { ecve, t_used, cves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use rand_distr::StandardNormal;

    fn synthetic(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let y = (0..n)
            .map(|i| 1.0 + cols[0][i] + rng.sample::<f64, _>(StandardNormal))
            .collect();
        Dataset::new(Matrix::from_columns(&cols).unwrap(), y).unwrap()
    }

    #[test]
    fn partitions_are_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = kfold_partition(10, 5, &mut rng).unwrap();
        assert_eq!(p.fold_sizes(), vec![2; 5]);
        let p = kfold_partition(51, 51, &mut rng).unwrap();
        assert_eq!(p.fold_sizes(), vec![1; 51]);
        let p = kfold_partition(23, 4, &mut rng).unwrap();
        let s = p.fold_sizes();
        assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        assert!(kfold_partition(5, 6, &mut rng).is_err());
        assert!(kfold_partition(5, 1, &mut rng).is_err());
        let a = kfold_partition(30, 3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = kfold_partition(30, 3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_response_has_zero_error() {
        let x = Matrix::from_columns(&[(0..8).map(|i| i as f64).collect::<Vec<_>>()]).unwrap();
        let d = Dataset::new(x, vec![3.0; 8]).unwrap();
        let p = kfold_partition(8, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(cve(&d, Method::Mean, &MethodOptions::default(), &p).unwrap(), 0.0);
    }

    #[test]
    fn relabeling_folds_leaves_cve_unchanged() {
        let d = synthetic(20, 3);
        let p = kfold_partition(20, 4, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let relabeled = FoldPartition {
            assignments: p.assignments.iter().map(|&a| 5 - a).collect(),
            k: 4,
        };
        let opts = MethodOptions::default();
        let a = cve(&d, Method::EbLocal, &opts, &p).unwrap();
        let b = cve(&d, Method::EbLocal, &opts, &relabeled).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn leave_one_out_is_partition_free() {
        let d = synthetic(15, 5);
        let opts = MethodOptions::default();
        let a = ecve_estimate(&d, Method::FixedG, &opts, 15, 7, 1).unwrap();
        let b = ecve_estimate(&d, Method::FixedG, &opts, 15, 3, 99).unwrap();
        assert_eq!(a.t_used, 1);
        assert_eq!(a.ecve, b.ecve);
    }

    #[test]
    fn single_partition_estimate_is_one_cve() {
        let d = synthetic(20, 6);
        let opts = MethodOptions::default();
        let e = ecve_estimate(&d, Method::FixedG, &opts, 5, 1, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        rng.set_stream(0);
        let p = kfold_partition(20, 5, &mut rng).unwrap();
        assert_eq!(e.ecve, cve(&d, Method::FixedG, &opts, &p).unwrap());
        assert!(ecve_estimate(&d, Method::FixedG, &opts, 5, 0, 8).is_err());
    }

    #[test]
    fn fold_failures_name_the_fold() {
        // Two identical x values in a 3-case training split make the full
        // model unfittable once its own fold is removed.
        let x = Matrix::from_columns(&[vec![1.0, 1.0, 1.0, 2.0]]).unwrap();
        let d = Dataset::new(x, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let part = FoldPartition { assignments: vec![1, 1, 2, 2], k: 2 };
        match cve(&d, Method::FixedG, &MethodOptions::default(), &part) {
            Err(BmaError::Fold { fold, .. }) => assert_eq!(fold, 1),
            other => panic!("{other:?}"),
        }
    }
}
