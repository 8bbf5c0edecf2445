use std::io::Write;

use super::{silhouette, DistanceMatrix};
use crate::error::{Error, Result};

/// One agglomeration step. Leaves are numbered `0..n` in matrix order and
/// the cluster formed at step `s` (0-based) is numbered `n + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<String>,
    pub k: usize,
    /// Cluster of each matrix row. Ids `0..k` are ordered by each cluster's
    /// smallest member label.
    pub assignment: Vec<usize>,
    pub merges: Vec<Merge>,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> Vec<&str> {
        let mut m: Vec<&str> = self
            .labels
            .iter()
            .zip(&self.assignment)
            .filter(|(_, &c)| c == cluster)
            .map(|(l, _)| l.as_str())
            .collect();
        m.sort_unstable();
        m
    }
}

struct Node {
    id: usize,
    /// Matrix rows, sorted by label.
    rows: Vec<usize>,
}

/// Average-linkage agglomerative clustering down to `k` clusters.
///
/// Linkage is the unweighted mean over all cross pairs, summed in label
/// order so the result does not depend on the matrix's row order. Exact
/// ties go to the pair whose smallest labels sort first.
pub fn agglomerative_cluster(matrix: &DistanceMatrix, k: usize) -> Result<Clustering> {
    let n = matrix.len();
    if k == 0 || k > n {
        return Err(Error::contract(format!("k = {k} outside 1..={n}")));
    }
    let labels = matrix.labels();
    let mut active: Vec<Node> = (0..n).map(|i| Node { id: i, rows: vec![i] }).collect();
    active.sort_by(|a, b| labels[a.rows[0]].cmp(&labels[b.rows[0]]));

    let linkage = |a: &Node, b: &Node| -> f64 {
        let total: f64 = a
            .rows
            .iter()
            .map(|&i| b.rows.iter().map(|&j| matrix.get(i, j)).sum::<f64>())
            .sum();
        total / (a.rows.len() * b.rows.len()) as f64
    };

    let mut merges = Vec::with_capacity(n - k);
    while active.len() > k {
        // `active` stays sorted by smallest label, so scanning `p < q`
        // visits pairs in lexicographic order and strict `<` keeps the
        // first of any tie.
        let mut best = (f64::INFINITY, 0, 1);
        for p in 0..active.len() {
            for q in p + 1..active.len() {
                let d = linkage(&active[p], &active[q]);
                if d < best.0 {
                    best = (d, p, q);
                }
            }
        }
        let (height, p, q) = best;
        let second = active.remove(q);
        let first = &mut active[p];
        merges.push(Merge {
            a: first.id,
            b: second.id,
            height,
            size: first.rows.len() + second.rows.len(),
        });
        first.id = n + merges.len() - 1;
        first.rows.extend(second.rows);
        first.rows.sort_by(|&i, &j| labels[i].cmp(&labels[j]));
    }

    let mut assignment = vec![0; n];
    for (c, node) in active.iter().enumerate() {
        for &i in &node.rows {
            assignment[i] = c;
        }
    }
    Ok(Clustering {
        labels: labels.to_vec(),
        k,
        assignment,
        merges,
    })
}

/// Clustering plus silhouette validation on the same matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub clustering: Clustering,
    pub silhouettes: Vec<f64>,
    pub mean_silhouette: f64,
}

pub const ASSIGNMENT_HEADER: [&str; 3] = ["station_id", "cluster_id", "silhouette"];
pub const MERGES_HEADER: [&str; 4] = ["step", "clusterA", "clusterB", "height"];

impl ClusterReport {
    pub fn labels(&self) -> &[String] {
        &self.clustering.labels
    }

    pub fn k(&self) -> usize {
        self.clustering.k
    }

    /// `(label, cluster id, silhouette)` sorted by label.
    pub fn rows(&self) -> Vec<(&str, usize, f64)> {
        let mut rows: Vec<(&str, usize, f64)> = self
            .clustering
            .labels
            .iter()
            .zip(&self.clustering.assignment)
            .zip(&self.silhouettes)
            .map(|((l, &c), &s)| (l.as_str(), c, s))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        rows
    }

    /// `station_id,cluster_id,silhouette`; cluster ids are written 1-based.
    pub fn write_assignments<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(ASSIGNMENT_HEADER)?;
        for (label, c, s) in self.rows() {
            wtr.write_record([label.to_string(), (c + 1).to_string(), s.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<clusters>", e))?;
        Ok(())
    }

    pub fn write_merges<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(MERGES_HEADER)?;
        for (step, m) in self.clustering.merges.iter().enumerate() {
            wtr.write_record([
                (step + 1).to_string(),
                m.a.to_string(),
                m.b.to_string(),
                m.height.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<merges>", e))?;
        Ok(())
    }
}

/// Clusters into `k >= 2` groups and scores the partition.
pub fn cluster_report(matrix: &DistanceMatrix, k: usize) -> Result<ClusterReport> {
    if k < 2 {
        return Err(Error::contract(format!(
            "a silhouette-scored report needs k >= 2, got {k}"
        )));
    }
    let clustering = agglomerative_cluster(matrix, k)?;
    let sil = silhouette(matrix, &clustering.assignment)?;
    Ok(ClusterReport {
        clustering,
        silhouettes: sil.per_point,
        mean_silhouette: sil.mean,
    })
}
