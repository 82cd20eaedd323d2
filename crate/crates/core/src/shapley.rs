//! Shapley aggregation of subset coefficients into per-feature scores, and
//! the fairness-utility score built from them.

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::{coefficient_table, coefficient_table_for, CoefficientTable, ScoringProblem};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::prob::{SubsetKey, MAX_FEATURES};

/// Hard ceiling for exact aggregation.
pub const SHAPLEY_EXACT_MAX: usize = 20;

/// Default feature count above which callers should switch to sampling.
pub const DEFAULT_EXACT_LIMIT: usize = 12;

/// Default weight of the discrimination score in `F_i`.
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Which characteristic function to aggregate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Characteristic {
    Accuracy,
    Discrimination,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// Per-feature scores, in feature order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapleyScores {
    pub features: Vec<String>,
    /// Marginal accuracy coefficients, bits.
    pub phi_acc: Vec<f64>,
    /// Marginal discrimination coefficients, bits cubed.
    pub phi_d: Vec<f64>,
    /// `phi_acc - alpha * phi_d`.
    pub fairness: Vec<f64>,
    pub alpha: f64,
    pub method: Method,
    /// Standard errors `(phi_acc, phi_d)` per feature when sampled.
    pub std_err: Option<Vec<(f64, f64)>>,
    pub seed: Option<u64>,
    pub permutations: Option<usize>,
}

impl ShapleyScores {
    pub fn n(&self) -> usize {
        self.features.len()
    }
}

/// `t! (n - t - 1)! / n!`, the weight of a coalition of size `t` not
/// containing the player.
pub fn shapley_weight(t_size: usize, n: usize) -> Result<Ratio<u128>> {
    if n == 0 || t_size >= n || n > MAX_FEATURES {
        return Err(Error::Argument(format!(
            "coalition size {t_size} out of range for n = {n}"
        )));
    }
    // equals 1 / (n * C(n-1, t)); the binomial stays well inside u128
    Ok(Ratio::new(1, n as u128 * binomial(n as u128 - 1, t_size as u128)))
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|t| {
            let w = shapley_weight(t, n).expect("in range");
            *w.numer() as f64 / *w.denom() as f64
        })
        .collect()
}

/// Exact Shapley values from a dense value vector indexed by subset bitmask
/// (`values.len() == 2^n`).
pub fn shapley_from_values(values: &[f64], n: usize, exec: Execution) -> Result<Vec<f64>> {
    if n > SHAPLEY_EXACT_MAX {
        return Err(Error::Size(format!(
            "exact aggregation limited to n = {SHAPLEY_EXACT_MAX}, got {n}"
        )));
    }
    if values.len() != 1usize << n {
        return Err(Error::Table(format!(
            "expected {} subset values, got {}",
            1usize << n,
            values.len()
        )));
    }
    let w = weights(n);
    Ok(exec.map_range(n, |i| {
        let bit = 1usize << i;
        (0..values.len())
            .filter(|t| t & bit == 0)
            .map(|t| w[t.count_ones() as usize] * (values[t | bit] - values[t]))
            .sum()
    }))
}

/// Exact Shapley values of one characteristic function stored in `table`.
pub fn shapley_exact(table: &CoefficientTable, which: Characteristic, exec: Execution) -> Result<Vec<f64>> {
    let n = table.n();
    if n > SHAPLEY_EXACT_MAX {
        return Err(Error::Size(format!(
            "exact aggregation limited to n = {SHAPLEY_EXACT_MAX}, got {n}"
        )));
    }
    let values = (0..1u64 << n)
        .map(|bits| {
            let key = SubsetKey::from_bits_unchecked(bits);
            let v = match which {
                Characteristic::Accuracy => table.acc(key),
                Characteristic::Discrimination => table.disc(key),
            };
            v.ok_or_else(|| Error::Table(format!("missing subset {key}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    shapley_from_values(&values, n, exec)
}

/// The `index`-th sampled permutation of `0..n` for `seed`. Each index uses
/// its own generator stream, so permutations can be drawn in any order.
pub fn permutation(n: usize, seed: u64, index: u64) -> Vec<usize> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

/// Every prefix subset visited by the sampled permutations, sorted.
pub fn monte_carlo_subsets(n: usize, permutations: usize, seed: u64) -> Vec<SubsetKey> {
    let mut keys = vec![SubsetKey::EMPTY];
    for index in 0..permutations as u64 {
        let mut key = SubsetKey::EMPTY;
        for i in permutation(n, seed, index) {
            key = key.with(i);
            keys.push(key);
        }
    }
    keys.sort_unstable();
    keys.dedup();
    keys
}

/// Sampled Shapley values with standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub values: Vec<f64>,
    /// Sample standard deviation of the marginal contributions over the
    /// square root of the permutation count.
    pub std_err: Vec<f64>,
}

/// Averages marginal contributions `v(pred + i) - v(pred)` over seeded
/// random permutations. Permutations are evaluated according to `exec` and
/// reduced in index order, so the output depends only on `(seed,
/// permutations)`.
pub fn shapley_monte_carlo<F>(
    value_fn: F,
    n: usize,
    permutations: usize,
    seed: u64,
    exec: Execution,
) -> Result<MonteCarloEstimate>
where
    F: Fn(SubsetKey) -> Result<f64> + Sync,
{
    if permutations < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 permutations, got {permutations}"
        )));
    }
    if n == 0 || n > MAX_FEATURES {
        return Err(Error::Argument(format!("feature count {n} out of range")));
    }
    let empty = value_fn(SubsetKey::EMPTY)?;
    let contributions = exec.try_map_range(permutations, |index| {
        let mut out = vec![0.0; n];
        let mut key = SubsetKey::EMPTY;
        let mut prev = empty;
        for i in permutation(n, seed, index as u64) {
            key = key.with(i);
            let v = value_fn(key)?;
            out[i] = v - prev;
            prev = v;
        }
        Ok::<_, Error>(out)
    })?;

    // Welford, in permutation order
    let mut mean = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    for (k, row) in contributions.iter().enumerate() {
        let count = (k + 1) as f64;
        for i in 0..n {
            let delta = row[i] - mean[i];
            mean[i] += delta / count;
            m2[i] += delta * (row[i] - mean[i]);
        }
    }
    let p = permutations as f64;
    let std_err = m2.iter().map(|s| (s / (p - 1.0)).sqrt() / p.sqrt()).collect();
    Ok(MonteCarloEstimate { values: mean, std_err })
}

/// `F_i = phi_acc[i] - alpha * phi_d[i]`.
pub fn fairness_score(phi_acc: &[f64], phi_d: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if phi_acc.len() != phi_d.len() {
        return Err(Error::Argument(format!(
            "score lengths differ: {} vs {}",
            phi_acc.len(),
            phi_d.len()
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Argument(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    Ok(phi_acc.iter().zip(phi_d).map(|(a, d)| a - alpha * d).collect())
}

/// Scores every feature from a full coefficient table.
pub fn score_exact(prob: &ScoringProblem, alpha: f64, exec: Execution) -> Result<(ShapleyScores, CoefficientTable)> {
    let table = coefficient_table(prob, exec)?;
    let phi_acc = shapley_exact(&table, Characteristic::Accuracy, exec)?;
    let phi_d = shapley_exact(&table, Characteristic::Discrimination, exec)?;
    let fairness = fairness_score(&phi_acc, &phi_d, alpha)?;
    let scores = ShapleyScores {
        features: prob.feature_names().into_iter().map(String::from).collect(),
        phi_acc,
        phi_d,
        fairness,
        alpha,
        method: Method::Exact,
        std_err: None,
        seed: None,
        permutations: None,
    };
    Ok((scores, table))
}

/// Scores every feature from sampled permutations. Only the subsets the
/// permutations visit are computed; both characteristic functions share
/// them.
pub fn score_monte_carlo(
    prob: &ScoringProblem,
    alpha: f64,
    permutations: usize,
    seed: u64,
    exec: Execution,
) -> Result<(ShapleyScores, CoefficientTable)> {
    let n = prob.n();
    let keys = monte_carlo_subsets(n, permutations, seed);
    let table = coefficient_table_for(prob, &keys, exec)?;
    let lookup = |which: Characteristic| {
        let table = &table;
        move |key: SubsetKey| {
            match which {
                Characteristic::Accuracy => table.acc(key),
                Characteristic::Discrimination => table.disc(key),
            }
            .ok_or_else(|| Error::Table(format!("missing subset {key}")))
        }
    };
    let acc = shapley_monte_carlo(lookup(Characteristic::Accuracy), n, permutations, seed, exec)?;
    let disc = shapley_monte_carlo(lookup(Characteristic::Discrimination), n, permutations, seed, exec)?;
    let fairness = fairness_score(&acc.values, &disc.values, alpha)?;
    let scores = ShapleyScores {
        features: prob.feature_names().into_iter().map(String::from).collect(),
        phi_acc: acc.values,
        phi_d: disc.values,
        fairness,
        alpha,
        method: Method::MonteCarlo,
        std_err: Some(acc.std_err.into_iter().zip(disc.std_err).collect()),
        seed: Some(seed),
        permutations: Some(permutations),
    };
    Ok((scores, table))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SelectionPolicy {
    /// The `k` best features.
    TopK(usize),
    /// Every feature with `F_i >= tau`.
    Threshold(f64),
}

/// Feature indices by descending `F_i`, equal scores in ascending index
/// order.
pub fn ranking(fairness: &[f64]) -> Result<Vec<usize>> {
    if let Some(i) = fairness.iter().position(|f| !f.is_finite()) {
        return Err(Error::Argument(format!("score of feature {i} is not finite")));
    }
    let mut order: Vec<usize> = (0..fairness.len()).collect();
    order.sort_by(|&i, &j| fairness[j].total_cmp(&fairness[i]).then(i.cmp(&j)));
    Ok(order)
}

/// Ranked selection under `policy`.
pub fn rank_and_select(scores: &ShapleyScores, policy: SelectionPolicy) -> Result<Vec<usize>> {
    let order = ranking(&scores.fairness)?;
    match policy {
        SelectionPolicy::TopK(k) => {
            if k > order.len() {
                return Err(Error::Argument(format!(
                    "top-k of {k} exceeds the {} available features",
                    order.len()
                )));
            }
            Ok(order[..k].to_vec())
        }
        SelectionPolicy::Threshold(tau) => {
            if tau.is_nan() {
                return Err(Error::Argument("threshold is NaN".into()));
            }
            Ok(order.into_iter().filter(|&i| scores.fairness[i] >= tau).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weight_examples() {
        assert_eq!(shapley_weight(1, 3).unwrap(), Ratio::new(1, 6));
        assert_eq!(shapley_weight(0, 1).unwrap(), Ratio::new(1, 1));
        assert_eq!(shapley_weight(3, 4).unwrap(), Ratio::new(1, 4));
        assert!(matches!(shapley_weight(3, 3), Err(Error::Argument(_))));
    }

    #[test]
    fn weights_sum_to_one_over_coalitions() {
        for n in 1..=20u128 {
            let total = (0..n).fold(Ratio::new(0u128, 1), |acc, t| {
                acc + shapley_weight(t as usize, n as usize).unwrap() * binomial(n - 1, t)
            });
            assert_eq!(total, Ratio::new(1, 1), "n = {n}");
        }
    }

    #[test]
    fn copies_split_the_value() {
        // v(S) = 1 whenever S is non-empty: two interchangeable copies
        let v = [0.0, 1.0, 1.0, 1.0];
        let phi = shapley_from_values(&v, 2, Execution::Sequential).unwrap();
        assert_eq!(phi, vec![0.5, 0.5]);
        let zero = shapley_from_values(&[0.0; 8], 3, Execution::Sequential).unwrap();
        assert_eq!(zero, vec![0.0; 3]);
    }

    #[test]
    fn additive_game_is_exact_for_any_sample() {
        let c = [0.3, -1.25, 2.0, 0.0];
        let v = |k: SubsetKey| Ok(k.iter().map(|i| c[i]).sum::<f64>());
        for p in [2, 7, 50] {
            let est = shapley_monte_carlo(v, 4, p, 99, Execution::Parallel).unwrap();
            for i in 0..4 {
                assert_abs_diff_eq!(est.values[i], c[i], epsilon = 1e-15);
                assert_abs_diff_eq!(est.std_err[i], 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_mode_independent() {
        let v = |k: SubsetKey| Ok((k.bits() as f64).sqrt());
        let a = shapley_monte_carlo(v, 5, 300, 4, Execution::Parallel).unwrap();
        let b = shapley_monte_carlo(v, 5, 300, 4, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(permutation(6, 1, 3), permutation(6, 1, 3));
        assert_ne!(permutation(8, 1, 3), permutation(8, 1, 4));
        assert!(shapley_monte_carlo(v, 5, 1, 4, Execution::Sequential).is_err());
    }

    #[test]
    fn monte_carlo_subsets_cover_prefixes() {
        let keys = monte_carlo_subsets(4, 10, 1);
        assert!(keys.contains(&SubsetKey::EMPTY));
        assert!(keys.contains(&SubsetKey::full(4)));
        for index in 0..10 {
            let p = permutation(4, 1, index);
            let mut k = SubsetKey::EMPTY;
            for i in p {
                k = k.with(i);
                assert!(keys.binary_search(&k).is_ok());
            }
        }
    }

    #[test]
    fn fairness_examples() {
        let f = fairness_score(&[0.5], &[0.1], 2.0).unwrap();
        assert_abs_diff_eq!(f[0], 0.3, epsilon = 1e-15);
        assert_eq!(fairness_score(&[0.5, 0.2], &[0.1, 0.4], 0.0).unwrap(), vec![0.5, 0.2]);
        assert_eq!(fairness_score(&[0.5, 0.2], &[0.0, 0.0], 7.0).unwrap(), vec![0.5, 0.2]);
        assert!(fairness_score(&[0.5], &[0.1, 0.2], 1.0).is_err());
        assert!(fairness_score(&[0.5], &[0.1], -1.0).is_err());
    }

    fn scores(f: Vec<f64>) -> ShapleyScores {
        ShapleyScores {
            features: (0..f.len()).map(|i| format!("X{i}")).collect(),
            phi_acc: f.clone(),
            phi_d: vec![0.0; f.len()],
            fairness: f,
            alpha: 1.0,
            method: Method::Exact,
            std_err: None,
            seed: None,
            permutations: None,
        }
    }

    #[test]
    fn selection_policies() {
        let s = scores(vec![0.1, 0.7, 0.3, 0.7]);
        assert_eq!(rank_and_select(&s, SelectionPolicy::TopK(4)).unwrap(), vec![1, 3, 2, 0]);
        assert_eq!(rank_and_select(&s, SelectionPolicy::TopK(2)).unwrap(), vec![1, 3]);
        assert_eq!(rank_and_select(&s, SelectionPolicy::Threshold(0.3)).unwrap(), vec![1, 3, 2]);
        assert!(rank_and_select(&s, SelectionPolicy::Threshold(f64::INFINITY)).unwrap().is_empty());
        assert!(rank_and_select(&s, SelectionPolicy::TopK(5)).is_err());
        assert!(rank_and_select(&scores(vec![f64::NAN]), SelectionPolicy::TopK(1)).is_err());
    }
}
