use std::collections::HashMap;

use crate::problem::{Problem, ProblemError, Vector};
use crate::rng::SeededRng;

use super::ratings::RatingsDataset;

/// Where the `lambda` term sits relative to the `1 / |K|` normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Regularizer {
    /// `lambda (||P_u||^2 + ||Q_i||^2)` inside the normalized sum over `K`.
    #[default]
    PerRating,
    /// `lambda (||P||_F^2 + ||Q||_F^2)` added once, unnormalized.
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MfParams {
    /// Latent dimension `F`.
    pub latent_dim: usize,
    pub lambda: f64,
    /// Ratings revealed per time step (`N`).
    pub reveal_per_step: usize,
    /// Ratings revealed at `t = 0`.
    pub initial_revealed: usize,
    /// Sampling period used to map `t` to a step index.
    pub h: f64,
    pub regularizer: Regularizer,
}

#[derive(Clone, Debug)]
struct PairReveals {
    user: usize,
    item: usize,
    /// `(position in the stream, rating)`, ascending.
    reveals: Vec<(usize, f64)>,
}

/// Streaming matrix factorization
/// `1 / |K(t)| sum_{(u, i) in K(t)} (R_ui - P_u^T Q_i)^2 + lambda (||P_u||^2 + ||Q_i||^2)`.
///
/// `K(t)` is the set of distinct `(u, i)` pairs among the first
/// `min(initial + k N, total)` ratings, `k = round(t / h)`, each carrying its
/// most recent revealed rating. The decision vector stacks the columns of
/// `P` (`F x U`) and then those of `Q` (`F x I`).
#[derive(Clone, Debug)]
pub struct MatrixFactorization {
    params: MfParams,
    n_users: usize,
    n_items: usize,
    total: usize,
    /// Ordered by first reveal.
    pairs: Vec<PairReveals>,
    first_reveal: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WarmStart {
    pub x: Vector,
    pub iterations: usize,
    pub grad_norm: f64,
}

pub fn make_mf(ds: &RatingsDataset, params: MfParams) -> Result<MatrixFactorization, ProblemError> {
    let invalid = |msg: String| Err(ProblemError::InvalidArgument(msg));
    if params.latent_dim == 0 {
        return invalid("latent dimension must be at least 1".into());
    }
    if !(params.lambda.is_finite() && params.lambda >= 0.0) {
        return invalid(format!("lambda must be non-negative, got {}", params.lambda));
    }
    if !(params.h.is_finite() && params.h > 0.0) {
        return invalid(format!("sampling period must be positive, got {}", params.h));
    }
    if params.initial_revealed == 0 || params.initial_revealed > ds.len() {
        return invalid(format!(
            "initial_revealed must lie in 1..={}, got {}",
            ds.len(),
            params.initial_revealed
        ));
    }

    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs: Vec<PairReveals> = Vec::new();
    for (pos, r) in ds.ratings.iter().enumerate() {
        let slot = *index.entry((r.user, r.item)).or_insert_with(|| {
            pairs.push(PairReveals {
                user: r.user,
                item: r.item,
                reveals: Vec::new(),
            });
            pairs.len() - 1
        });
        pairs[slot].reveals.push((pos, r.value));
    }
    let first_reveal = pairs.iter().map(|p| p.reveals[0].0).collect();
    Ok(MatrixFactorization {
        params,
        n_users: ds.n_users,
        n_items: ds.n_items,
        total: ds.len(),
        pairs,
        first_reveal,
    })
}

impl MatrixFactorization {
    pub fn params(&self) -> &MfParams {
        &self.params
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn step_index(&self, t: f64) -> usize {
        let k = (t / self.params.h).round();
        if k > 0.0 {
            k as usize
        } else {
            0
        }
    }

    /// Number of ratings revealed at time `t`.
    pub fn revealed(&self, t: f64) -> usize {
        let k = self.step_index(t);
        self.params
            .initial_revealed
            .saturating_add(k.saturating_mul(self.params.reveal_per_step))
            .min(self.total)
    }

    /// `|K(t)|`, the number of distinct revealed pairs.
    pub fn active_pairs(&self, t: f64) -> usize {
        let n = self.revealed(t);
        self.first_reveal.partition_point(|&p| p < n)
    }

    /// Steps until every rating is revealed.
    pub fn steps_to_exhaust(&self) -> usize {
        let remaining = self.total - self.params.initial_revealed;
        match self.params.reveal_per_step {
            0 => 0,
            n => remaining.div_ceil(n),
        }
    }

    fn user_offset(&self, u: usize) -> usize {
        u * self.params.latent_dim
    }

    fn item_offset(&self, i: usize) -> usize {
        (self.n_users + i) * self.params.latent_dim
    }

    /// Calls `f(user, item, rating)` for every pair in `K(t)`.
    fn for_each_active(&self, t: f64, mut f: impl FnMut(usize, usize, f64)) -> usize {
        let n = self.revealed(t);
        let active = self.first_reveal.partition_point(|&p| p < n);
        for pair in &self.pairs[..active] {
            let latest = pair.reveals.partition_point(|&(pos, _)| pos < n) - 1;
            f(pair.user, pair.item, pair.reveals[latest].1);
        }
        active
    }

    /// Gradient descent on the `t = 0` problem from a seeded start
    /// `scale * N(0, I)` until `||grad|| <= level`.
    pub fn warm_start(
        &self,
        level: f64,
        step: f64,
        scale: f64,
        seed: u64,
        max_iterations: usize,
    ) -> Result<WarmStart, ProblemError> {
        let mut rng = SeededRng::new(seed);
        let mut x = rng.normal_vector(self.dim()) * scale;
        for iterations in 0..=max_iterations {
            let g = self.grad_x(&x, 0.0);
            let grad_norm = g.norm();
            if !grad_norm.is_finite() {
                return Err(ProblemError::InvalidArgument(format!(
                    "warm start diverged after {iterations} iterations; reduce the step {step}"
                )));
            }
            if grad_norm <= level {
                return Ok(WarmStart {
                    x,
                    iterations,
                    grad_norm,
                });
            }
            x.axpy(-step, &g, 1.0);
        }
        Err(ProblemError::InvalidArgument(format!(
            "warm start did not reach gradient norm {level} within {max_iterations} iterations"
        )))
    }
}

impl Problem for MatrixFactorization {
    fn name(&self) -> &str {
        "mf"
    }

    fn dim(&self) -> usize {
        self.params.latent_dim * (self.n_users + self.n_items)
    }

    fn value(&self, x: &Vector, t: f64) -> f64 {
        let f = self.params.latent_dim;
        let lambda = self.params.lambda;
        let per_rating = self.params.regularizer == Regularizer::PerRating;
        let mut sum = 0.0;
        let active = self.for_each_active(t, |u, i, r| {
            let pu = x.rows(self.user_offset(u), f);
            let qi = x.rows(self.item_offset(i), f);
            let e = r - pu.dot(&qi);
            sum += e * e;
            if per_rating {
                sum += lambda * (pu.norm_squared() + qi.norm_squared());
            }
        });
        let mut value = sum / active as f64;
        if !per_rating {
            value += lambda * x.norm_squared();
        }
        value
    }

    fn grad_x(&self, x: &Vector, t: f64) -> Vector {
        let f = self.params.latent_dim;
        let lambda = self.params.lambda;
        let per_rating = self.params.regularizer == Regularizer::PerRating;
        let mut g = Vector::zeros(x.len());
        let active = self.for_each_active(t, |u, i, r| {
            let (ou, oi) = (self.user_offset(u), self.item_offset(i));
            let e = r - x.rows(ou, f).dot(&x.rows(oi, f));
            for j in 0..f {
                let (pj, qj) = (x[ou + j], x[oi + j]);
                let mut gp = -2.0 * e * qj;
                let mut gq = -2.0 * e * pj;
                if per_rating {
                    gp += 2.0 * lambda * pj;
                    gq += 2.0 * lambda * qj;
                }
                g[ou + j] += gp;
                g[oi + j] += gq;
            }
        });
        g /= active as f64;
        if !per_rating {
            g.axpy(2.0 * lambda, x, 1.0);
        }
        g
    }
}
