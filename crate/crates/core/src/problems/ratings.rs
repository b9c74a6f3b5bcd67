use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::rng::SeededRng;
use crate::problem::Matrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("ratings file contains no ratings")]
    Empty,
    #[error("filtering with thresholds ({min_user}, {min_item}) removed every rating")]
    FilteredEmpty { min_user: usize, min_item: usize },
    #[error("{0}")]
    InvalidArgument(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
    pub timestamp: i64,
}

/// Ratings in chronological order with dense ids `0..n_users` and
/// `0..n_items`. Repeated `(user, item)` pairs are kept; the later one wins
/// once revealed.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingsDataset {
    pub ratings: Vec<Rating>,
    pub n_users: usize,
    pub n_items: usize,
}

impl RatingsDataset {
    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// Sorts by timestamp (stably) and remaps ids densely, preserving the
    /// order of the original ids.
    fn normalized(mut ratings: Vec<Rating>) -> Self {
        ratings.sort_by_key(|r| r.timestamp);
        let users = dense_map(ratings.iter().map(|r| r.user));
        let items = dense_map(ratings.iter().map(|r| r.item));
        for r in &mut ratings {
            r.user = users[&r.user];
            r.item = items[&r.item];
        }
        Self {
            ratings,
            n_users: users.len(),
            n_items: items.len(),
        }
    }
}

fn dense_map(ids: impl Iterator<Item = usize>) -> BTreeMap<usize, usize> {
    let distinct: BTreeSet<usize> = ids.collect();
    distinct.into_iter().enumerate().map(|(new, old)| (old, new)).collect()
}

/// Reads `user_id,item_id,rating,timestamp` lines. Blank lines and lines
/// starting with `#` are skipped.
pub fn load_ratings(path: &Path) -> Result<RatingsDataset, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_ratings(&text)
}

pub fn parse_ratings(text: &str) -> Result<RatingsDataset, DataError> {
    let mut ratings = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |message: String| DataError::Malformed { line: idx + 1, message };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(malformed(format!("expected 4 comma-separated fields, found {}", fields.len())));
        }
        let user = fields[0]
            .parse::<usize>()
            .map_err(|e| malformed(format!("user id `{}`: {e}", fields[0])))?;
        let item = fields[1]
            .parse::<usize>()
            .map_err(|e| malformed(format!("item id `{}`: {e}", fields[1])))?;
        let value = fields[2]
            .parse::<f64>()
            .map_err(|e| malformed(format!("rating `{}`: {e}", fields[2])))?;
        if !value.is_finite() {
            return Err(malformed(format!("rating `{}` is not finite", fields[2])));
        }
        let timestamp = fields[3]
            .parse::<i64>()
            .map_err(|e| malformed(format!("timestamp `{}`: {e}", fields[3])))?;
        ratings.push(Rating {
            user,
            item,
            value,
            timestamp,
        });
    }
    if ratings.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(RatingsDataset::normalized(ratings))
}

/// Repeatedly drops users with fewer than `min_user` ratings and items with
/// fewer than `min_item` until neither rule removes anything.
pub fn filter_min_counts(ds: &RatingsDataset, min_user: usize, min_item: usize) -> Result<RatingsDataset, DataError> {
    let mut ratings = ds.ratings.clone();
    loop {
        let before = ratings.len();
        let mut user_counts = vec![0usize; ds.n_users];
        for r in &ratings {
            user_counts[r.user] += 1;
        }
        ratings.retain(|r| user_counts[r.user] >= min_user);
        let mut item_counts = vec![0usize; ds.n_items];
        for r in &ratings {
            item_counts[r.item] += 1;
        }
        ratings.retain(|r| item_counts[r.item] >= min_item);
        if ratings.len() == before {
            break;
        }
    }
    if ratings.is_empty() {
        return Err(DataError::FilteredEmpty { min_user, min_item });
    }
    Ok(RatingsDataset::normalized(ratings))
}

/// Shape of a synthetic low-rank ratings stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_ratings: usize,
    pub latent_dim: usize,
    pub noise_sd: f64,
}

/// Draws unit-variance factors and emits `P_u^T Q_i + noise` at uniformly
/// random cells, one per timestamp `0, 1, 2, ...`.
pub fn synth_ratings(spec: &SynthSpec, seed: u64) -> Result<RatingsDataset, DataError> {
    if spec.n_users == 0 || spec.n_items == 0 || spec.n_ratings == 0 || spec.latent_dim == 0 {
        return Err(DataError::InvalidArgument("synthetic ratings need positive counts".into()));
    }
    let mut rng = SeededRng::new(seed);
    let p = Matrix::from_fn(spec.latent_dim, spec.n_users, |_, _| rng.normal());
    let q = Matrix::from_fn(spec.latent_dim, spec.n_items, |_, _| rng.normal());
    ratings_from_factors(&p, &q, spec.n_ratings, spec.noise_sd, &mut rng)
}

/// Ratings from given factors `P` (`F x U`) and `Q` (`F x I`).
pub fn ratings_from_factors(
    p: &Matrix,
    q: &Matrix,
    n_ratings: usize,
    noise_sd: f64,
    rng: &mut SeededRng,
) -> Result<RatingsDataset, DataError> {
    if p.nrows() != q.nrows() {
        return Err(DataError::InvalidArgument(format!(
            "factor ranks differ: {} vs {}",
            p.nrows(),
            q.nrows()
        )));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(DataError::InvalidArgument(format!("noise_sd must be non-negative, got {noise_sd}")));
    }
    let (n_users, n_items) = (p.ncols(), q.ncols());
    let ratings = (0..n_ratings)
        .map(|k| {
            let user = rng.index(n_users);
            let item = rng.index(n_items);
            let noise = if noise_sd > 0.0 { noise_sd * rng.normal() } else { 0.0 };
            Rating {
                user,
                item,
                value: p.column(user).dot(&q.column(item)) + noise,
                timestamp: k as i64,
            }
        })
        .collect();
    Ok(RatingsDataset {
        ratings,
        n_users,
        n_items,
    })
}
