use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::matrix::write_square;
use crate::error::{Error, Result};

/// Fewest permutations accepted by [`dcor_permutation_test`].
pub const MIN_PERMUTATIONS: usize = 99;

/// Permutations drawn per RNG stream. Each batch seeds its own stream from
/// the master seed, so results do not depend on the thread count.
const PERMUTATION_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DcorResult {
    pub dcor: f64,
    pub dcov: f64,
    pub p_value: Option<f64>,
    pub n_permutations: usize,
    pub seed: u64,
}

/// Double-centred distance matrix of a sample, row-major.
fn centered(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut a: Vec<f64> = (0..n * n).map(|k| (x[k / n] - x[k % n]).abs()).collect();
    let row_means: Vec<f64> = a.chunks(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    // Distance matrices are symmetric, so column means equal row means.
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] += grand - row_means[i] - row_means[j];
        }
    }
    a
}

/// `(1/n^2) sum A_ij B_{p(i) p(j)}` for a permutation `p` of `B`'s rows.
fn cross_moment(a: &[f64], b: &[f64], perm: &[usize]) -> f64 {
    let n = perm.len();
    let mut total = 0.0;
    for i in 0..n {
        let bi = perm[i] * n;
        let row = &a[i * n..(i + 1) * n];
        total += row
            .iter()
            .zip(perm)
            .map(|(aij, &pj)| aij * b[bi + pj])
            .sum::<f64>();
    }
    total / (n * n) as f64
}

struct Prepared {
    a: Vec<f64>,
    b: Vec<f64>,
    /// `sqrt(dVar^2(x) * dVar^2(y))`.
    norm: f64,
}

impl Prepared {
    fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::contract(format!(
                "dcor needs equal lengths, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::SampleTooSmall {
                needed: 2,
                got: x.len(),
            });
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::contract("dcor input must be finite"));
        }
        let identity: Vec<usize> = (0..x.len()).collect();
        let a = centered(x);
        let b = centered(y);
        let var_x = cross_moment(&a, &a, &identity).max(0.0);
        let var_y = cross_moment(&b, &b, &identity).max(0.0);
        Ok(Prepared {
            norm: (var_x * var_y).sqrt(),
            a,
            b,
        })
    }

    fn dcov2(&self, perm: &[usize]) -> f64 {
        cross_moment(&self.a, &self.b, perm).max(0.0)
    }

    fn dcor(&self, dcov2: f64) -> f64 {
        if self.norm > 0.0 {
            (dcov2 / self.norm).sqrt().clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Sample distance correlation of two equally long sequences. Zero when
/// either sample has zero distance variance.
pub fn dcor(x: &[f64], y: &[f64]) -> Result<DcorResult> {
    let prep = Prepared::new(x, y)?;
    let dcov2 = prep.dcov2(&(0..x.len()).collect::<Vec<_>>());
    Ok(DcorResult {
        dcor: prep.dcor(dcov2),
        dcov: dcov2.sqrt(),
        p_value: None,
        n_permutations: 0,
        seed: 0,
    })
}

/// Distance correlation with a permutation p-value
/// `(1 + #{dCov^2(x, y_perm) >= dCov^2(x, y)}) / (n_perm + 1)`.
pub fn dcor_permutation_test(x: &[f64], y: &[f64], n_perm: usize, seed: u64) -> Result<DcorResult> {
    if n_perm < MIN_PERMUTATIONS {
        return Err(Error::contract(format!(
            "need at least {MIN_PERMUTATIONS} permutations, got {n_perm}"
        )));
    }
    let prep = Prepared::new(x, y)?;
    let n = x.len();
    let identity: Vec<usize> = (0..n).collect();
    let observed = prep.dcov2(&identity);

    let batches = n_perm.div_ceil(PERMUTATION_BATCH);
    let exceed: usize = (0..batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(batch as u64);
            let draws = PERMUTATION_BATCH.min(n_perm - batch * PERMUTATION_BATCH);
            let mut perm = identity.clone();
            (0..draws)
                .filter(|_| {
                    perm.shuffle(&mut rng);
                    prep.dcov2(&perm) >= observed
                })
                .count()
        })
        .sum();

    Ok(DcorResult {
        dcor: prep.dcor(observed),
        dcov: observed.sqrt(),
        p_value: Some((1 + exceed) as f64 / (n_perm + 1) as f64),
        n_permutations: n_perm,
        seed,
    })
}

/// Pairwise distance correlations between labelled curves; the diagonal is
/// 1 for non-constant curves.
#[derive(Debug, Clone, PartialEq)]
pub struct DcorMatrix {
    pub labels: Vec<String>,
    pub dcor: Vec<f64>,
    pub p_values: Option<Vec<f64>>,
}

/// `n_perm = None` skips the permutation tests. Pair `(i, j)` uses seed
/// `seed + i * n + j` so every test has its own stream.
pub fn dcor_matrix(
    features: &[(String, Vec<f64>)],
    n_perm: Option<usize>,
    seed: u64,
) -> Result<DcorMatrix> {
    let n = features.len();
    if n < 2 {
        return Err(Error::contract("dcor_matrix needs at least two curves"));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let results = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (x, y) = (&features[i].1, &features[j].1);
            match n_perm {
                Some(p) => dcor_permutation_test(x, y, p, seed.wrapping_add((i * n + j) as u64)),
                None => dcor(x, y),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = vec![0.0; n * n];
    let mut p_values = n_perm.map(|_| vec![0.0; n * n]);
    for (&(i, j), r) in pairs.iter().zip(results) {
        values[i * n + j] = r.dcor;
        values[j * n + i] = r.dcor;
        if let (Some(pv), Some(p)) = (p_values.as_mut(), r.p_value) {
            pv[i * n + j] = p;
            pv[j * n + i] = p;
        }
    }
    Ok(DcorMatrix {
        labels: features.iter().map(|f| f.0.clone()).collect(),
        dcor: values,
        p_values,
    })
}

impl DcorMatrix {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_square(writer, &self.labels, &self.dcor)
    }

    pub fn write_p_values_csv<W: Write>(&self, writer: W) -> Result<()> {
        match &self.p_values {
            Some(p) => write_square(writer, &self.labels, p),
            None => Err(Error::contract("no permutation p-values were computed")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_correlation_is_one() {
        let x = [0.1, 2.0, -3.0, 4.5, 0.0];
        assert!((dcor(&x, &x).unwrap().dcor - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_sample_gives_zero() {
        let r = dcor(&[2.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(r.dcor, 0.0);
        assert_eq!(r.dcov, 0.0);
    }

    #[test]
    fn balanced_xor_pattern_is_uncorrelated() {
        let r = dcor(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(r.dcor.abs() <= 1e-12);
    }

    #[test]
    fn nonlinear_dependence_is_detected() {
        let x: Vec<f64> = (-10..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let r = dcor(&x, &y).unwrap();
        assert!(r.dcor > 0.4, "{}", r.dcor);
    }

    #[test]
    fn errors() {
        assert!(dcor(&[1.0, 2.0], &[1.0]).is_err());
        assert!(dcor(&[1.0], &[1.0]).is_err());
        assert!(dcor_permutation_test(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0], 10, 0).is_err());
    }

    #[test]
    fn permutation_test_is_reproducible() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin()).collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).cos()).collect();
        let a = dcor_permutation_test(&x, &y, 199, 42).unwrap();
        let b = dcor_permutation_test(&x, &y, 199, 42).unwrap();
        assert_eq!(a.p_value.unwrap().to_bits(), b.p_value.unwrap().to_bits());
        assert_eq!(a.n_permutations, 199);

        let perfect = dcor_permutation_test(&x, &x, 199, 7).unwrap();
        assert!(perfect.p_value.unwrap() <= 2.0 / 200.0);
    }

    #[test]
    fn matrix_is_symmetric_with_unit_diagonal() {
        let features: Vec<(String, Vec<f64>)> = (0..4)
            .map(|s| {
                let curve = (0..24).map(|h| ((h * (s + 1)) as f64 * 0.3).sin()).collect();
                (format!("S{s}"), curve)
            })
            .collect();
        let m = dcor_matrix(&features, Some(99), 3).unwrap();
        for i in 0..4 {
            assert!((m.dcor[i * 4 + i] - 1.0).abs() < 1e-12);
            for j in 0..4 {
                assert_eq!(m.dcor[i * 4 + j], m.dcor[j * 4 + i]);
            }
        }
        assert!(m.p_values.is_some());
    }
}
