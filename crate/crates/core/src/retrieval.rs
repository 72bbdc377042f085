//! Ranking, ground truth and mean average precision. Rankings order a
//! database per query; ground truth marks which database items count as
//! relevant. Both carry the database size so mismatched pairs are caught
//! before any metric is computed.

use rayon::prelude::*;

use crate::binary::PackedCodes;
use crate::error::{Error, Result};
use crate::sash::LabelMatrix;
use crate::types::FeatureMatrix;

/// Per-query orderings of a database, nearest first. Each entry is
/// (database index, distance); distances are non-decreasing and indices
/// unique within a query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    db_size: usize,
    entries: Vec<Vec<(usize, u32)>>,
}

impl Ranking {
    pub fn new(db_size: usize, entries: Vec<Vec<(usize, u32)>>) -> Result<Self> {
        for (q, list) in entries.iter().enumerate() {
            let mut seen = vec![false; db_size];
            let mut prev = 0u32;
            for (pos, &(idx, dist)) in list.iter().enumerate() {
                if idx >= db_size {
                    return Err(Error::InvalidInput(format!(
                        "query {q}: index {idx} is outside a database of {db_size}"
                    )));
                }
                if seen[idx] {
                    return Err(Error::InvalidInput(format!(
                        "query {q}: index {idx} appears twice"
                    )));
                }
                seen[idx] = true;
                if pos > 0 && dist < prev {
                    return Err(Error::InvalidInput(format!(
                        "query {q}: distances decrease at position {pos}"
                    )));
                }
                prev = dist;
            }
        }
        Ok(Self { db_size, entries })
    }

    pub(crate) fn new_unchecked(db_size: usize, entries: Vec<Vec<(usize, u32)>>) -> Self {
        Self { db_size, entries }
    }

    /// Number of queries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn db_size(&self) -> usize {
        self.db_size
    }

    /// Ordered (database index, distance) pairs for one query.
    pub fn entry(&self, q: usize) -> &[(usize, u32)] {
        &self.entries[q]
    }
}

/// Relevant database indices per query, each set sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    db_size: usize,
    relevant: Vec<Vec<usize>>,
}

impl GroundTruth {
    pub fn new(db_size: usize, mut relevant: Vec<Vec<usize>>) -> Result<Self> {
        for (q, set) in relevant.iter_mut().enumerate() {
            set.sort_unstable();
            if let Some(&bad) = set.iter().find(|&&i| i >= db_size) {
                return Err(Error::InvalidInput(format!(
                    "query {q}: index {bad} is outside a database of {db_size}"
                )));
            }
            if set.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!(
                    "query {q}: relevant set holds a duplicate index"
                )));
            }
        }
        Ok(Self { db_size, relevant })
    }

    /// Number of queries.
    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }

    pub fn db_size(&self) -> usize {
        self.db_size
    }

    /// Sorted relevant indices for one query; may be empty.
    pub fn relevant(&self, q: usize) -> &[usize] {
        &self.relevant[q]
    }
}

/// Rank every database code against every query code by Hamming distance.
/// Ties order by ascending database index, so results are deterministic.
pub fn hamming_rank(queries: &PackedCodes, db: &PackedCodes) -> Result<Ranking> {
    if queries.l() != db.l() {
        return Err(Error::DimensionMismatch(format!(
            "queries use {} bits, database uses {}",
            queries.l(),
            db.l()
        )));
    }
    let entries: Vec<Vec<(usize, u32)>> = (0..queries.m())
        .into_par_iter()
        .map(|qi| {
            let mut row: Vec<(usize, u32)> = (0..db.m())
                .map(|di| (di, queries.hamming(qi, db, di)))
                .collect();
            row.sort_unstable_by_key(|&(i, d)| (d, i));
            row
        })
        .collect();
    Ok(Ranking::new_unchecked(db.m(), entries))
}

/// Exact k nearest database columns per query under squared Euclidean
/// distance; ties break toward the lower index. With `exclude_self`, database
/// column i is skipped for query i (for the common database == queries case).
pub fn euclidean_knn(
    queries: &FeatureMatrix,
    db: &FeatureMatrix,
    k: usize,
    exclude_self: bool,
) -> Result<GroundTruth> {
    if queries.d() != db.d() {
        return Err(Error::DimensionMismatch(format!(
            "queries have {} rows, database has {}",
            queries.d(),
            db.d()
        )));
    }
    let available = db.m() - usize::from(exclude_self);
    if k == 0 || k > available {
        return Err(Error::InvalidInput(format!(
            "k = {k} is outside 1..={available} usable database items"
        )));
    }
    let relevant: Vec<Vec<usize>> = (0..queries.m())
        .into_par_iter()
        .map(|qi| {
            let q = queries.data().column(qi);
            let mut dists: Vec<(f64, usize)> = (0..db.m())
                .filter(|&di| !(exclude_self && di == qi))
                .map(|di| ((db.data().column(di) - q).norm_squared(), di))
                .collect();
            dists.sort_unstable_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .expect("finite distances")
                    .then(a.1.cmp(&b.1))
            });
            let mut ids: Vec<usize> = dists[..k].iter().map(|&(_, i)| i).collect();
            ids.sort_unstable();
            ids
        })
        .collect();
    Ok(GroundTruth {
        db_size: db.m(),
        relevant,
    })
}

/// Label-driven relevance. Single-label mode matches dominant classes;
/// multi-label mode requires at least one shared positive label.
pub fn label_ground_truth(
    query_labels: &LabelMatrix,
    db_labels: &LabelMatrix,
    multi: bool,
) -> Result<GroundTruth> {
    if query_labels.c() != db_labels.c() {
        return Err(Error::DimensionMismatch(format!(
            "queries carry {} classes, database carries {}",
            query_labels.c(),
            db_labels.c()
        )));
    }
    let relevant: Vec<Vec<usize>> = if multi {
        let db_sets: Vec<Vec<usize>> = (0..db_labels.m()).map(|j| db_labels.label_set(j)).collect();
        (0..query_labels.m())
            .into_par_iter()
            .map(|qi| {
                let qs = query_labels.label_set(qi);
                db_sets
                    .iter()
                    .enumerate()
                    .filter(|(_, ds)| qs.iter().any(|l| ds.binary_search(l).is_ok()))
                    .map(|(di, _)| di)
                    .collect()
            })
            .collect()
    } else {
        let db_classes: Vec<usize> = (0..db_labels.m())
            .map(|j| db_labels.class_of_column(j))
            .collect();
        (0..query_labels.m())
            .into_par_iter()
            .map(|qi| {
                let qc = query_labels.class_of_column(qi);
                db_classes
                    .iter()
                    .enumerate()
                    .filter(|&(_, &dc)| dc == qc)
                    .map(|(di, _)| di)
                    .collect()
            })
            .collect()
    };
    Ok(GroundTruth {
        db_size: db_labels.m(),
        relevant,
    })
}

/// Mean over queries of average precision at `top_k`. Average precision sums
/// precision at each relevant rank within the cutoff and divides by the full
/// relevant count, so missing items beyond the cutoff still cost score.
/// Queries with empty ground truth are skipped; if every query is empty the
/// metric is undefined and an error is returned.
pub fn mean_average_precision(rank: &Ranking, gt: &GroundTruth, top_k: usize) -> Result<f64> {
    if rank.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ranked queries against {} ground truth queries",
            rank.len(),
            gt.len()
        )));
    }
    if rank.db_size() != gt.db_size() {
        return Err(Error::DimensionMismatch(format!(
            "ranking is over {} items, ground truth over {}",
            rank.db_size(),
            gt.db_size()
        )));
    }
    if top_k == 0 {
        return Err(Error::InvalidInput("top_k must be at least 1".into()));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for q in 0..rank.len() {
        let rel = gt.relevant(q);
        if rel.is_empty() {
            continue;
        }
        let list = rank.entry(q);
        let limit = top_k.min(list.len());
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (pos, &(idx, _)) in list[..limit].iter().enumerate() {
            if rel.binary_search(&idx).is_ok() {
                hits += 1;
                sum += hits as f64 / (pos + 1) as f64;
            }
        }
        total += sum / rel.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric(
            "every query has empty ground truth".into(),
        ));
    }
    Ok(total / counted as f64)
}
