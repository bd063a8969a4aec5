use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dict::kmeans::kmeans;
use crate::dict::omp::OmpCoder;
use crate::dict::Dictionary;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from, STREAM_DICTIONARY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsvdParams {
    pub atoms: usize,
    pub sparsity: usize,
    pub sweeps: usize,
    /// OMP residual tolerance during training.
    #[serde(default)]
    pub tolerance: f64,
    pub seed: u64,
    #[serde(default = "default_coherence")]
    pub coherence_limit: f64,
    #[serde(default = "default_kmeans_iterations")]
    pub kmeans_iterations: usize,
    /// Atoms used by fewer signals than this fraction of the mean usage
    /// are treated as unused.
    #[serde(default = "default_min_usage")]
    pub min_usage: f64,
    /// Alternating rank-1 refinements per atom update.
    #[serde(default = "default_rank_one_iterations")]
    pub rank_one_iterations: usize,
}

fn default_coherence() -> f64 {
    0.99
}
fn default_min_usage() -> f64 {
    0.5
}
fn default_kmeans_iterations() -> usize {
    20
}
fn default_rank_one_iterations() -> usize {
    3
}

impl KsvdParams {
    pub fn new(atoms: usize, sparsity: usize, sweeps: usize, seed: u64) -> Self {
        KsvdParams {
            atoms,
            sparsity,
            sweeps,
            tolerance: 0.0,
            seed,
            coherence_limit: default_coherence(),
            min_usage: default_min_usage(),
            kmeans_iterations: default_kmeans_iterations(),
            rank_one_iterations: default_rank_one_iterations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsvdReport {
    /// Mean relative representation error after the coding stage of each
    /// sweep, followed by the error of the final dictionary.
    pub errors: Vec<f64>,
    pub replaced_atoms: usize,
}

impl KsvdReport {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().unwrap_or(&f64::NAN)
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Codes every signal; returns dense codes.
pub fn sparse_code_all(signals: &[Vec<f64>], dict: &Dictionary, t0: usize, eta: f64) -> Result<Vec<Vec<f64>>> {
    let coder = OmpCoder::new(dict)?;
    signals
        .par_iter()
        .map(|y| coder.encode(y, t0, eta).map(|c| c.coefficients))
        .collect()
}

/// `Y - D X` column by column.
pub fn residuals(signals: &[Vec<f64>], dict: &Dictionary, codes: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    signals
        .iter()
        .zip(codes)
        .map(|(y, x)| {
            let r = dict.decode(x)?;
            Ok(y.iter().zip(&r).map(|(a, b)| a - b).collect())
        })
        .collect()
}

/// Mean of `|y - D x| / |y|` over signals (zero signals count their absolute error).
pub fn mean_relative_error(signals: &[Vec<f64>], dict: &Dictionary, codes: &[Vec<f64>]) -> Result<f64> {
    let res = residuals(signals, dict, codes)?;
    let sum: f64 = signals
        .iter()
        .zip(&res)
        .map(|(y, r)| {
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if ny > 0.0 {
                nr / ny
            } else {
                nr
            }
        })
        .sum();
    Ok(sum / signals.len() as f64)
}

/// Dictionary-update stage: for fixed supports, sequentially replaces each
/// used atom (ascending index) and its coefficients by an alternating
/// rank-1 fit of the residual restricted to its users. Never increases
/// `|Y - D X|_F`. Returns the indices of unused atoms.
pub fn update_atoms(
    signals: &[Vec<f64>],
    dict: &mut Dictionary,
    codes: &mut [Vec<f64>],
    rank_one_iterations: usize,
) -> Result<Vec<usize>> {
    let n = dict.signal_len();
    let mut resid = residuals(signals, dict, codes)?;
    let mut unused = Vec::new();
    for j in 0..dict.atom_count() {
        let users: Vec<usize> = (0..signals.len()).filter(|&s| codes[s][j] != 0.0).collect();
        if users.is_empty() {
            unused.push(j);
            continue;
        }
        let old = dict.atom(j).to_vec();
        // E_s = R_s + d_j x_js for every user s.
        let e: Vec<Vec<f64>> = users
            .iter()
            .map(|&s| resid[s].iter().zip(&old).map(|(r, d)| r + d * codes[s][j]).collect())
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut u = old.clone();
        if normalize(&mut u) == 0.0 {
            unused.push(j);
            continue;
        }
        let mut v: Vec<f64> = e.iter().map(|es| dot(es, &u)).collect();
        for _ in 0..rank_one_iterations {
            let mut next = vec![0.0; n];
            for (es, &vs) in e.iter().zip(&v) {
                for (t, x) in next.iter_mut().zip(es) {
                    *t += vs * x;
                }
            }
            if normalize(&mut next) == 0.0 {
                break;
            }
            u = next;
            v = e.iter().map(|es| dot(es, &u)).collect();
        }
        dict.atom_mut(j).copy_from_slice(&u);
        for ((&s, es), &vs) in users.iter().zip(&e).zip(&v) {
            codes[s][j] = vs;
            for ((r, x), d) in resid[s].iter_mut().zip(es).zip(&u) {
                *r = x - d * vs;
            }
        }
    }
    Ok(unused)
}

/// Learns a unit-norm dictionary from `signals` by K-SVD with k-means
/// initialisation. Rarely used atoms and atoms nearly parallel to an
/// earlier one are replaced by the worst-represented signal after every sweep.
pub fn ksvd_train(signals: &[Vec<f64>], params: &KsvdParams) -> Result<(Dictionary, KsvdReport)> {
    if signals.is_empty() {
        return Err(Error::invalid("K-SVD needs at least one training signal"));
    }
    let n = signals[0].len();
    if n == 0 || signals.iter().any(|s| s.len() != n) {
        return Err(Error::invalid("training signals must share a nonzero length"));
    }
    if params.atoms == 0 || params.sparsity == 0 {
        return Err(Error::invalid("K-SVD needs at least one atom and T0 >= 1"));
    }
    let mut rng = rng_from(derive_seed(params.seed, STREAM_DICTIONARY, 1));
    let mut random_unit = |n: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        normalize(&mut v);
        v
    };

    let centers = kmeans(
        signals,
        params.atoms,
        params.kmeans_iterations,
        derive_seed(params.seed, STREAM_DICTIONARY, 0),
    );
    let mut atoms = Vec::with_capacity(params.atoms);
    for mut c in centers {
        if normalize(&mut c) == 0.0 {
            c = random_unit(n);
        }
        atoms.push(c);
    }
    let mut dict = Dictionary::from_atoms(atoms)?;

    let mut errors = Vec::with_capacity(params.sweeps + 1);
    let mut replaced_atoms = 0;
    for _ in 0..params.sweeps {
        let mut codes = sparse_code_all(signals, &dict, params.sparsity, params.tolerance)?;
        errors.push(mean_relative_error(signals, &dict, &codes)?);
        let usage: Vec<usize> = (0..dict.atom_count())
            .map(|j| codes.iter().filter(|c| c[j] != 0.0).count())
            .collect();
        let mean_usage = usage.iter().sum::<usize>() as f64 / usage.len() as f64;
        let mut unused = update_atoms(signals, &mut dict, &mut codes, params.rank_one_iterations)?;
        for (j, &u) in usage.iter().enumerate() {
            if u > 0 && (u as f64) < params.min_usage * mean_usage {
                unused.push(j);
            }
        }

        for j in 0..dict.atom_count() {
            if unused.contains(&j) {
                continue;
            }
            let coherent = (0..j)
                .filter(|i| !unused.contains(i))
                .any(|i| {
                    let c: f64 = dict.atom(i).iter().zip(dict.atom(j)).map(|(a, b)| a * b).sum();
                    c.abs() > params.coherence_limit
                });
            if coherent {
                unused.push(j);
            }
        }
        if unused.is_empty() {
            continue;
        }
        unused.sort_unstable();
        let res = residuals(signals, &dict, &codes)?;
        let mut worst: Vec<(f64, usize)> = res
            .iter()
            .zip(signals)
            .enumerate()
            .map(|(s, (r, y))| {
                let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                (if ny > 0.0 { nr / ny } else { 0.0 }, s)
            })
            .collect();
        worst.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut candidates = worst.into_iter();
        for j in unused {
            let fresh = match candidates.next() {
                Some((err, s)) if err > 1e-10 => {
                    let mut v = signals[s].clone();
                    normalize(&mut v);
                    v
                }
                _ => random_unit(n),
            };
            dict.atom_mut(j).copy_from_slice(&fresh);
            replaced_atoms += 1;
        }
    }
    let codes = sparse_code_all(signals, &dict, params.sparsity, params.tolerance)?;
    errors.push(mean_relative_error(signals, &dict, &codes)?);
    Ok((dict, KsvdReport { errors, replaced_atoms }))
}
