use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    /// 1 to 5
    pub rating: u8,
}

/// Rating triples with sorted user and item id lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingsTable {
    ratings: Vec<Rating>,
    users: Vec<u32>,
    items: Vec<u32>,
}

impl RatingsTable {
    pub fn new(ratings: Vec<Rating>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(ratings.len());
        for r in &ratings {
            if !(1..=5).contains(&r.rating) {
                return Err(Error::InvalidArgument(format!(
                    "rating {} by user {} for item {} is outside 1..=5",
                    r.rating, r.user, r.item
                )));
            }
            if !seen.insert((r.user, r.item)) {
                return Err(Error::InvalidArgument(format!(
                    "user {} rated item {} twice",
                    r.user, r.item
                )));
            }
        }
        let users: BTreeSet<u32> = ratings.iter().map(|r| r.user).collect();
        let items: BTreeSet<u32> = ratings.iter().map(|r| r.item).collect();
        Ok(RatingsTable {
            ratings,
            users: users.into_iter().collect(),
            items: items.into_iter().collect(),
        })
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// Sorted user ids.
    pub fn users(&self) -> &[u32] {
        &self.users
    }

    /// Sorted item ids.
    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn user_index(&self, user: u32) -> Option<usize> {
        self.users.binary_search(&user).ok()
    }

    pub fn item_index(&self, item: u32) -> Option<usize> {
        self.items.binary_search(&item).ok()
    }

    /// Number of ratings per item, aligned with [`Self::items`].
    pub fn item_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.items.len()];
        for r in &self.ratings {
            counts[self.item_index(r.item).expect("indexed")] += 1;
        }
        counts
    }

    /// Ratings of every user keyed by item id.
    pub fn by_user(&self) -> HashMap<u32, HashMap<u32, u8>> {
        let mut out: HashMap<u32, HashMap<u32, u8>> = HashMap::new();
        for r in &self.ratings {
            out.entry(r.user).or_default().insert(r.item, r.rating);
        }
        out
    }
}

/// Parse the tab-separated `user item rating timestamp` layout of `u.data`.
pub fn ingest_movielens(path: &Path) -> Result<RatingsTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ratings(BufReader::new(file), path)
}

pub fn parse_ratings<R: BufRead>(reader: R, path: &Path) -> Result<RatingsTable> {
    let mut ratings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = idx + 1;
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg,
        };
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(format!(
                "expected 4 fields, found {}",
                fields.len()
            )));
        }
        let user = fields[0]
            .parse::<u32>()
            .map_err(|e| parse_err(format!("user id `{}`: {e}", fields[0])))?;
        let item = fields[1]
            .parse::<u32>()
            .map_err(|e| parse_err(format!("item id `{}`: {e}", fields[1])))?;
        let rating = fields[2]
            .parse::<u8>()
            .ok()
            .filter(|r| (1..=5).contains(r))
            .ok_or_else(|| parse_err(format!("rating `{}` is not in 1..=5", fields[2])))?;
        fields[3]
            .parse::<u64>()
            .map_err(|e| parse_err(format!("timestamp `{}`: {e}", fields[3])))?;
        ratings.push(Rating { user, item, rating });
    }
    if ratings.is_empty() {
        return Err(Error::NoRatings(path.to_path_buf()));
    }
    RatingsTable::new(ratings)
}

/// Keep the `count` most rated items, breaking ties by lower item id.
pub fn select_top_items(table: &RatingsTable, count: usize) -> Result<RatingsTable> {
    if count > table.items().len() {
        return Err(Error::InvalidArgument(format!(
            "asked for {count} items, table has {}",
            table.items().len()
        )));
    }
    let counts = table.item_counts();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // items are sorted by id, so a stable sort keeps lower ids first
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    let keep: HashSet<u32> = order[..count].iter().map(|&i| table.items()[i]).collect();
    RatingsTable::new(
        table
            .ratings()
            .iter()
            .filter(|r| keep.contains(&r.item))
            .copied()
            .collect(),
    )
}
