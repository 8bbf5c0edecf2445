use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointwiseDistance {
    #[default]
    Absolute,
    Squared,
}

impl PointwiseDistance {
    fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            PointwiseDistance::Absolute => (a - b).abs(),
            PointwiseDistance::Squared => (a - b) * (a - b),
        }
    }
}

impl FromStr for PointwiseDistance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(PointwiseDistance::Absolute),
            "squared" => Ok(PointwiseDistance::Squared),
            _ => Err(Error::contract(format!("unknown pointwise distance {s:?}"))),
        }
    }
}

/// Move weights, regularization strength and pointwise distance for DTW.
///
/// `wh` weighs steps that advance only the first sequence, `wv` steps that
/// advance only the second, `wd` diagonal steps. Every accumulated cell
/// `(i, j)` past the first also pays `lambda * |i - j|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtwConfig {
    pub wh: f64,
    pub wv: f64,
    pub wd: f64,
    pub lambda: f64,
    pub distance: PointwiseDistance,
}

impl Default for DtwConfig {
    fn default() -> Self {
        DtwConfig {
            wh: 1.0,
            wv: 1.0,
            wd: 2.0,
            lambda: 0.0,
            distance: PointwiseDistance::Absolute,
        }
    }
}

impl DtwConfig {
    pub fn validate(&self) -> Result<()> {
        let w = [self.wh, self.wv, self.wd];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().all(|v| *v == 0.0) {
            return Err(Error::contract(format!(
                "move weights must be finite, non-negative and not all zero: {w:?}"
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::contract(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

impl fmt::Display for DtwConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "weights=({}, {}, {}) lambda={}",
            self.wh, self.wv, self.wd, self.lambda
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwAlignment {
    pub cost: f64,
    /// Zero-based `(i, j)` pairs from `(0, 0)` to `(n - 1, m - 1)`.
    pub path: Vec<(usize, usize)>,
}

#[derive(Clone, Copy)]
enum Move {
    Start,
    Diagonal,
    Horizontal,
    Vertical,
}

/// Weighted, regularized DTW between `x` and `y`.
///
/// The first pair is always aligned and contributes its bare pointwise cost.
/// Ties between predecessor moves prefer diagonal, then the `x`-advancing
/// move, then the `y`-advancing one.
pub fn dtw_distance(x: &[f64], y: &[f64], cfg: &DtwConfig) -> Result<DtwAlignment> {
    cfg.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::contract("dtw needs non-empty sequences"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::contract("dtw input must be finite"));
    }

    let (n, m) = (x.len(), y.len());
    let width = m + 1;
    let mut acc = vec![f64::INFINITY; (n + 1) * width];
    let mut moves = vec![Move::Start; (n + 1) * width];
    for i in 1..=n {
        for j in 1..=m {
            let c = cfg.distance.eval(x[i - 1], y[j - 1]);
            let at = i * width + j;
            if i == 1 && j == 1 {
                acc[at] = c;
                continue;
            }
            let candidates = [
                (acc[at - width - 1] + cfg.wd * c, Move::Diagonal),
                (acc[at - width] + cfg.wh * c, Move::Horizontal),
                (acc[at - 1] + cfg.wv * c, Move::Vertical),
            ];
            let (best, mv) = candidates
                .into_iter()
                .fold((f64::INFINITY, Move::Start), |b, cand| if cand.0 < b.0 { cand } else { b });
            acc[at] = best + cfg.lambda * i.abs_diff(j) as f64;
            moves[at] = mv;
        }
    }

    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    loop {
        path.push((i - 1, j - 1));
        match moves[i * width + j] {
            Move::Start => break,
            Move::Diagonal => {
                i -= 1;
                j -= 1;
            }
            Move::Horizontal => i -= 1,
            Move::Vertical => j -= 1,
        }
    }
    path.reverse();
    Ok(DtwAlignment {
        cost: acc[n * width + m],
        path,
    })
}

/// Symmetrized DTW distances between every pair of labelled curves:
/// `d(a, b) = (dtw(a, b) + dtw(b, a)) / 2`.
pub fn pairwise_dtw(features: &[(String, Vec<f64>)], cfg: &DtwConfig) -> Result<DistanceMatrix> {
    cfg.validate()?;
    if features.len() < 2 {
        return Err(Error::contract(format!(
            "pairwise_dtw needs at least two curves, got {}",
            features.len()
        )));
    }
    let n = features.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let dists = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&features[i].1, &features[j].1);
            let forward = dtw_distance(a, b, cfg)?.cost;
            let backward = dtw_distance(b, a, cfg)?.cost;
            Ok((forward + backward) / 2.0)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut data = vec![0.0; n * n];
    for (&(i, j), d) in pairs.iter().zip(dists) {
        data[i * n + j] = d;
        data[j * n + i] = d;
    }
    DistanceMatrix::new(features.iter().map(|f| f.0.clone()).collect(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sequences_cost_nothing() {
        let x = [0.3, -1.0, 2.5, 2.5, 7.0];
        let a = dtw_distance(&x, &x, &DtwConfig::default()).unwrap();
        assert_eq!(a.cost, 0.0);
        assert_eq!(a.path, (0..5).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn small_worked_case() {
        let a = dtw_distance(&[1.0, 3.0, 2.0], &[2.0, 2.0], &DtwConfig::default()).unwrap();
        assert_eq!(a.cost, 2.0);
        assert_eq!(a.path.first(), Some(&(0, 0)));
        assert_eq!(a.path.last(), Some(&(2, 1)));
    }

    #[test]
    fn single_pair() {
        let a = dtw_distance(&[0.0], &[3.0], &DtwConfig::default()).unwrap();
        assert_eq!(a.cost, 3.0);
        assert_eq!(a.path, vec![(0, 0)]);
        let sq = DtwConfig {
            distance: PointwiseDistance::Squared,
            ..DtwConfig::default()
        };
        assert_eq!(dtw_distance(&[0.0], &[3.0], &sq).unwrap().cost, 9.0);
    }

    #[test]
    fn path_moves_are_unit_steps() {
        let x = [0.0, 1.0, 5.0, 2.0, 2.0, 9.0, 1.0];
        let y = [1.0, 5.0, 5.0, 1.0];
        let cfg = DtwConfig {
            lambda: 0.3,
            ..DtwConfig::default()
        };
        let a = dtw_distance(&x, &y, &cfg).unwrap();
        assert_eq!(a.path[0], (0, 0));
        assert_eq!(*a.path.last().unwrap(), (6, 3));
        for w in a.path.windows(2) {
            let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            assert!(matches!((di, dj), (1, 0) | (0, 1) | (1, 1)));
        }
    }

    #[test]
    fn contract_errors() {
        let cfg = DtwConfig::default();
        assert!(dtw_distance(&[], &[1.0], &cfg).is_err());
        assert!(dtw_distance(&[f64::NAN], &[1.0], &cfg).is_err());
        let bad = DtwConfig {
            wh: 0.0,
            wv: 0.0,
            wd: 0.0,
            ..cfg
        };
        assert!(dtw_distance(&[1.0], &[1.0], &bad).is_err());
        let neg = DtwConfig { lambda: -1.0, ..cfg };
        assert!(dtw_distance(&[1.0], &[1.0], &neg).is_err());
        assert!(pairwise_dtw(&[("a".into(), vec![1.0])], &cfg).is_err());
    }

    #[test]
    fn identical_pair_is_closest() {
        let base: Vec<f64> = (0..24).map(|h| (h as f64 / 4.0).sin()).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 0.7).collect();
        let features = vec![
            ("A".to_string(), base.clone()),
            ("B".to_string(), base),
            ("C".to_string(), shifted),
        ];
        let d = pairwise_dtw(&features, &DtwConfig::default()).unwrap();
        assert_eq!(d.get(0, 1), 0.0);
        assert!(d.get(0, 2) > 0.0 && d.get(1, 2) > 0.0);
    }

    #[test]
    fn asymmetric_weights_are_averaged() {
        let cfg = DtwConfig {
            wh: 1.0,
            wv: 3.0,
            ..DtwConfig::default()
        };
        let x = vec![0.0, 2.0, 2.0, 4.0];
        let y = vec![1.0, 4.0];
        let f = dtw_distance(&x, &y, &cfg).unwrap().cost;
        let b = dtw_distance(&y, &x, &cfg).unwrap().cost;
        assert_ne!(f, b);
        let d = pairwise_dtw(&[("x".into(), x), ("y".into(), y)], &cfg).unwrap();
        assert_eq!(d.get(0, 1), (f + b) / 2.0);
        assert_eq!(d.get(1, 0), d.get(0, 1));
    }
}
