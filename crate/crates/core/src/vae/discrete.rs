//! Exact enumeration oracles on discrete toy encoders.
//!
//! A discrete model small enough to sum exhaustively turns the two
//! decompositions used by the objective registry into exact algebra:
//!
//!   E_x[KL(q(z|x) ‖ p(z))]  =  I(x;z) + KL(q̂(z) ‖ p(z))
//!   KL(q̂(z) ‖ p(z))        =  TC(z) + Σⱼ KL(q̂(zⱼ) ‖ p(zⱼ))
//!
//! the second requiring a factorized prior, which this model has by
//! construction. All quantities are in nats.

use crate::rng::{stream, uniform, Stream};

/// Discrete encoder: `n_x` inputs, `d` latent dimensions with `bins`
/// states each, conditionals factorized per dimension, factorized
/// prior. All probabilities are strictly positive.
pub struct DiscreteToy {
    /// p(x), length n_x.
    pub p_x: Vec<f64>,
    /// cond[j][x][b] = q(z_j = b | x).
    pub cond: Vec<Vec<Vec<f64>>>,
    /// prior[j][b] = p(z_j = b).
    pub prior: Vec<Vec<f64>>,
}

fn random_dist(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| uniform(rng) + 0.1).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

impl DiscreteToy {
    pub fn random(n_x: usize, d: usize, bins: usize, seed: u64) -> Self {
        assert!(n_x >= 1 && d >= 1 && bins >= 2);
        let mut rng = stream(seed, Stream::Data);
        let p_x = random_dist(&mut rng, n_x);
        let cond = (0..d)
            .map(|_| (0..n_x).map(|_| random_dist(&mut rng, bins)).collect())
            .collect();
        let prior = (0..d).map(|_| random_dist(&mut rng, bins)).collect();
        Self { p_x, cond, prior }
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.p_x.len(), self.cond.len(), self.prior[0].len())
    }

    /// Iterate all joint latent states.
    fn states(&self) -> Vec<Vec<usize>> {
        let (_, d, bins) = self.dims();
        let mut out = vec![vec![]];
        for _ in 0..d {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..bins).map(move |b| {
                        let mut t = s.clone();
                        t.push(b);
                        t
                    })
                })
                .collect();
        }
        out
    }

    /// q(z|x) for a joint state.
    fn q_given(&self, z: &[usize], x: usize) -> f64 {
        z.iter().enumerate().map(|(j, &b)| self.cond[j][x][b]).product()
    }

    /// p(z) for a joint state.
    fn p_joint(&self, z: &[usize]) -> f64 {
        z.iter().enumerate().map(|(j, &b)| self.prior[j][b]).product()
    }

    /// Aggregate q̂(z) = Σ_x p(x) q(z|x).
    fn q_agg(&self, z: &[usize]) -> f64 {
        self.p_x.iter().enumerate().map(|(x, &px)| px * self.q_given(z, x)).sum()
    }

    /// Marginal of the aggregate over dimension j.
    fn q_agg_dim(&self, j: usize, b: usize) -> f64 {
        self.p_x.iter().enumerate().map(|(x, &px)| px * self.cond[j][x][b]).sum()
    }

    /// E_x[KL(q(z|x) ‖ p(z))].
    pub fn expected_conditional_kl(&self) -> f64 {
        let states = self.states();
        self.p_x
            .iter()
            .enumerate()
            .map(|(x, &px)| {
                px * states
                    .iter()
                    .map(|z| {
                        let q = self.q_given(z, x);
                        q * (q / self.p_joint(z)).ln()
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// I(x; z) under the joint p(x) q(z|x).
    pub fn mutual_information(&self) -> f64 {
        let states = self.states();
        self.p_x
            .iter()
            .enumerate()
            .map(|(x, &px)| {
                px * states
                    .iter()
                    .map(|z| {
                        let q = self.q_given(z, x);
                        q * (q / self.q_agg(z)).ln()
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// KL(q̂(z) ‖ p(z)).
    pub fn aggregate_prior_kl(&self) -> f64 {
        self.states()
            .iter()
            .map(|z| {
                let q = self.q_agg(z);
                q * (q / self.p_joint(z)).ln()
            })
            .sum()
    }

    /// Total correlation of the aggregate posterior.
    pub fn total_correlation(&self) -> f64 {
        self.states()
            .iter()
            .map(|z| {
                let q = self.q_agg(z);
                let prod: f64 = z
                    .iter()
                    .enumerate()
                    .map(|(j, &b)| self.q_agg_dim(j, b))
                    .product();
                q * (q / prod).ln()
            })
            .sum()
    }

    /// Σⱼ KL(q̂(zⱼ) ‖ p(zⱼ)).
    pub fn dimension_kl_sum(&self) -> f64 {
        let (_, d, bins) = self.dims();
        (0..d)
            .map(|j| {
                (0..bins)
                    .map(|b| {
                        let q = self.q_agg_dim(j, b);
                        q * (q / self.prior[j][b]).ln()
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_kl_splits_into_mi_plus_aggregate_kl() {
        for (n_x, d, bins, seed) in [(4, 2, 2, 1), (8, 3, 3, 2), (5, 1, 3, 3), (3, 3, 2, 4)] {
            let m = DiscreteToy::random(n_x, d, bins, seed);
            let lhs = m.expected_conditional_kl();
            let rhs = m.mutual_information() + m.aggregate_prior_kl();
            assert!(
                (lhs - rhs).abs() < 1e-9,
                "n_x={n_x} d={d} bins={bins}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn aggregate_kl_splits_into_tc_plus_dimension_kls() {
        for (n_x, d, bins, seed) in [(4, 2, 2, 5), (8, 3, 3, 6), (6, 2, 3, 7)] {
            let m = DiscreteToy::random(n_x, d, bins, seed);
            let lhs = m.aggregate_prior_kl();
            let rhs = m.total_correlation() + m.dimension_kl_sum();
            assert!(
                (lhs - rhs).abs() < 1e-9,
                "n_x={n_x} d={d} bins={bins}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn degenerate_cases_vanish() {
        // Conditionals equal to the prior: every divergence is zero.
        let mut m = DiscreteToy::random(4, 2, 3, 8);
        for j in 0..2 {
            for x in 0..4 {
                m.cond[j][x] = m.prior[j].clone();
            }
        }
        assert!(m.expected_conditional_kl().abs() < 1e-12);
        assert!(m.mutual_information().abs() < 1e-12);
        assert!(m.aggregate_prior_kl().abs() < 1e-12);
        assert!(m.total_correlation().abs() < 1e-12);
        assert!(m.dimension_kl_sum().abs() < 1e-12);

        // Input-independent conditionals: I(x;z) = 0 and the aggregate
        // equals the (factorized) conditional, so TC = 0 as well.
        let mut m = DiscreteToy::random(4, 2, 3, 9);
        for j in 0..2 {
            let row = m.cond[j][0].clone();
            for x in 1..4 {
                m.cond[j][x] = row.clone();
            }
        }
        assert!(m.mutual_information().abs() < 1e-12);
        assert!(m.total_correlation().abs() < 1e-12);
        assert!(m.expected_conditional_kl() > 0.0);
    }

    #[test]
    fn single_dimension_has_no_total_correlation() {
        let m = DiscreteToy::random(6, 1, 3, 10);
        assert!(m.total_correlation().abs() < 1e-12);
        assert!((m.aggregate_prior_kl() - m.dimension_kl_sum()).abs() < 1e-12);
    }
}
