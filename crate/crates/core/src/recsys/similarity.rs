use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ratings::RatingsTable;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Item graph built from rating correlations. Node `i` is item `items[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    pub graph: Graph,
    pub items: Vec<u32>,
    pub method: String,
    /// edges kept per node before symmetrization
    pub top_k: usize,
}

impl SimilarityGraph {
    pub fn node_of(&self, item: u32) -> Result<usize> {
        self.items
            .binary_search(&item)
            .map_err(|_| Error::UnknownItem(item))
    }
}

/// Pearson correlation between every pair of items over their co-rating
/// users. Means are taken over each item's own ratings. Pairs with fewer than
/// two co-raters or a zero centered variance get 0.
pub fn pearson_matrix(table: &RatingsTable) -> Vec<Vec<f64>> {
    let n = table.items().len();
    let mut per_item: Vec<HashMap<u32, f64>> = vec![HashMap::new(); n];
    for r in table.ratings() {
        per_item[table.item_index(r.item).expect("indexed")].insert(r.user, r.rating as f64);
    }
    let means: Vec<f64> = per_item
        .iter()
        .map(|m| {
            if m.is_empty() {
                0.0
            } else {
                m.values().sum::<f64>() / m.len() as f64
            }
        })
        .collect();
    let mut corr = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let (small, large, ms, ml) = if per_item[a].len() <= per_item[b].len() {
                (&per_item[a], &per_item[b], means[a], means[b])
            } else {
                (&per_item[b], &per_item[a], means[b], means[a])
            };
            let mut co = 0usize;
            let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
            let mut users: Vec<(&u32, &f64)> = small.iter().collect();
            // fixed summation order keeps the result independent of hashing
            users.sort_unstable_by_key(|(u, _)| **u);
            for (u, &rs) in users {
                if let Some(&rl) = large.get(u) {
                    let (x, y) = (rs - ms, rl - ml);
                    sxy += x * y;
                    sxx += x * x;
                    syy += y * y;
                    co += 1;
                }
            }
            let c = if co < 2 || sxx == 0.0 || syy == 0.0 {
                0.0
            } else {
                sxy / (sxx.sqrt() * syy.sqrt())
            };
            corr[a][b] = c;
            corr[b][a] = c;
        }
    }
    corr
}

/// Keep the `top_k` strongest positive correlations of every item and take
/// the union of the kept edges.
pub fn build_similarity(table: &RatingsTable, top_k: usize) -> Result<SimilarityGraph> {
    let n = table.items().len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "similarity graph needs at least 2 items".into(),
        ));
    }
    for (item, &count) in table.items().iter().zip(&table.item_counts()) {
        if count < 2 {
            log::warn!("item {item} has {count} rating(s) and gets no edges");
        }
    }
    let corr = pearson_matrix(table);
    let mut keep = vec![vec![false; n]; n];
    for (i, row) in corr.iter().enumerate() {
        let mut cand: Vec<usize> = (0..n).filter(|&j| j != i && row[j] > 0.0).collect();
        cand.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
        for &j in cand.iter().take(top_k) {
            keep[i.min(j)][i.max(j)] = true;
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if keep[i][j] {
                edges.push((i, j, corr[i][j]));
            }
        }
    }
    Ok(SimilarityGraph {
        graph: Graph::new(n, edges)?,
        items: table.items().to_vec(),
        method: "pearson".into(),
        top_k,
    })
}
