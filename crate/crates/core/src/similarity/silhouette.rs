use std::collections::BTreeMap;

use super::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    /// One score per matrix row, in matrix order.
    pub per_point: Vec<f64>,
    pub mean: f64,
}

/// Silhouette scores of a partition computed directly on `matrix`.
///
/// Members of singleton clusters score 0, as do points whose intra- and
/// nearest-cluster mean distances are both zero.
pub fn silhouette(matrix: &DistanceMatrix, assignment: &[usize]) -> Result<Silhouette> {
    let n = matrix.len();
    if assignment.len() != n {
        return Err(Error::contract(format!(
            "assignment covers {} of {} points",
            assignment.len(),
            n
        )));
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in assignment.iter().enumerate() {
        members.entry(c).or_default().push(i);
    }
    if members.len() < 2 {
        return Err(Error::Degenerate(
            "silhouette needs at least two clusters".into(),
        ));
    }

    let mean_to = |i: usize, group: &[usize]| -> (f64, usize) {
        let others: Vec<f64> = group.iter().filter(|&&j| j != i).map(|&j| matrix.get(i, j)).collect();
        (others.iter().sum::<f64>() / others.len() as f64, others.len())
    };

    let per_point: Vec<f64> = (0..n)
        .map(|i| {
            let own = &members[&assignment[i]];
            if own.len() == 1 {
                return 0.0;
            }
            let (a, _) = mean_to(i, own);
            let b = members
                .iter()
                .filter(|(c, _)| **c != assignment[i])
                .map(|(_, g)| mean_to(i, g).0)
                .fold(f64::INFINITY, f64::min);
            let scale = a.max(b);
            if scale > 0.0 {
                (b - a) / scale
            } else {
                0.0
            }
        })
        .collect();
    let mean = per_point.iter().sum::<f64>() / n as f64;
    Ok(Silhouette { per_point, mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_matrix(points: &[f64]) -> DistanceMatrix {
        let n = points.len();
        let data = (0..n * n)
            .map(|k| (points[k / n] - points[k % n]).abs())
            .collect();
        DistanceMatrix::new((0..n).map(|i| format!("p{i}")).collect(), data).unwrap()
    }

    #[test]
    fn two_tight_groups() {
        let m = line_matrix(&[0.0, 1.0, 10.0, 11.0]);
        let s = silhouette(&m, &[0, 0, 1, 1]).unwrap();
        // a(0) = 1, b(0) = (10 + 11) / 2.
        assert!((s.per_point[0] - 9.5 / 10.5).abs() < 1e-12);
        // a(1) = 1, b(1) = (9 + 10) / 2.
        assert!((s.per_point[1] - 8.5 / 9.5).abs() < 1e-12);
        assert!((s.mean - (9.5 / 10.5 + 8.5 / 9.5) / 2.0).abs() < 1e-12);
        assert!((s.mean - 0.8997).abs() < 1e-3);
    }

    #[test]
    fn singletons_score_zero() {
        let m = line_matrix(&[0.0, 1.0, 10.0]);
        let s = silhouette(&m, &[0, 0, 1]).unwrap();
        assert_eq!(s.per_point[2], 0.0);
        let all = silhouette(&m, &[0, 1, 2]).unwrap();
        assert_eq!(all.per_point, vec![0.0; 3]);
        assert_eq!(all.mean, 0.0);
    }

    #[test]
    fn coincident_clusters_score_zero() {
        let m = line_matrix(&[3.0, 3.0, 3.0, 3.0]);
        let s = silhouette(&m, &[0, 0, 1, 1]).unwrap();
        assert_eq!(s.per_point, vec![0.0; 4]);
    }

    #[test]
    fn single_cluster_is_degenerate() {
        let m = line_matrix(&[0.0, 1.0]);
        assert!(matches!(silhouette(&m, &[0, 0]), Err(Error::Degenerate(_))));
        assert!(silhouette(&m, &[0]).is_err());
    }

    #[test]
    fn separation_drives_mean_to_one() {
        let mut last = -1.0;
        for gap in [10.0, 100.0, 1e4, 1e6] {
            let m = line_matrix(&[0.0, 1.0, gap, gap + 1.0]);
            let s = silhouette(&m, &[0, 0, 1, 1]).unwrap().mean;
            assert!(s > last && s <= 1.0);
            last = s;
        }
        assert!(last > 0.9999);
    }
}
