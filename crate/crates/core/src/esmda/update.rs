use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Ensemble, StateVector};
use crate::seed::{derive_seed, rng_from, STREAM_PERTURB};

/// Default fraction of the eigenvalue energy kept when inverting.
pub const DEFAULT_ENERGY: f64 = 0.999;

/// Seed of member `i` for an update seeded with `seed`.
pub fn member_seed(seed: u64, member: usize) -> u64 {
    derive_seed(seed, STREAM_PERTURB, member as u64)
}

/// `d_obs + sqrt(alpha) * sigma * z` for one member. A standard normal is
/// drawn for every datum in order; data with infinite sigma are returned
/// unperturbed.
pub fn perturb_one(d_obs: &[f64], sigma: &[f64], alpha: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed);
    let sa = alpha.sqrt();
    d_obs
        .iter()
        .zip(sigma)
        .map(|(&d, &s)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            if s.is_finite() {
                d + sa * s * z
            } else {
                d
            }
        })
        .collect()
}

/// `n_ens` perturbed copies of `d_obs`; member `i` uses [`member_seed`].
pub fn perturb_observations(d_obs: &[f64], sigma: &[f64], alpha: f64, n_ens: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_noise(d_obs, sigma, alpha)?;
    Ok((0..n_ens)
        .map(|i| perturb_one(d_obs, sigma, alpha, member_seed(seed, i)))
        .collect())
}

fn check_noise(d_obs: &[f64], sigma: &[f64], alpha: f64) -> Result<()> {
    if sigma.len() != d_obs.len() {
        return Err(Error::DimensionMismatch {
            what: "noise levels",
            expected: d_obs.len(),
            actual: sigma.len(),
        });
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("inflation coefficient {alpha} must be positive")));
    }
    if let Some(i) = sigma.iter().position(|s| !(*s >= 0.0)) {
        return Err(Error::invalid(format!("noise level of datum {i} is negative or NaN")));
    }
    if let Some(i) = d_obs.iter().position(|d| !d.is_finite()) {
        return Err(Error::invalid(format!("observation {i} is not finite")));
    }
    Ok(())
}

/// One ES-MDA analysis step with per-member seeds `seed` mixed by
/// [`member_seed`].
pub fn esmda_update(
    states: &Ensemble,
    simulated: &[Vec<f64>],
    d_obs: &[f64],
    sigma: &[f64],
    alpha: f64,
    energy: f64,
    seed: u64,
) -> Result<Ensemble> {
    let seeds: Vec<u64> = (0..states.size()).map(|i| member_seed(seed, i)).collect();
    esmda_update_with_seeds(states, simulated, d_obs, sigma, alpha, energy, &seeds)
}

/// As [`esmda_update`], with an explicit perturbation seed per member.
///
/// Data with infinite sigma, or with no spread across the simulated
/// ensemble, get zero gain. The remaining system is scaled by the noise
/// levels and `S^-1 (C_dd + alpha C_d) S^-1` is inverted through its
/// leading eigenpairs holding `energy` of the total.
pub fn esmda_update_with_seeds(
    states: &Ensemble,
    simulated: &[Vec<f64>],
    d_obs: &[f64],
    sigma: &[f64],
    alpha: f64,
    energy: f64,
    member_seeds: &[u64],
) -> Result<Ensemble> {
    let n = states.size();
    if n < 2 {
        return Err(Error::invalid("ES-MDA needs at least 2 members"));
    }
    for (what, len) in [("simulated-data ensemble", simulated.len()), ("member seeds", member_seeds.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                actual: len,
            });
        }
    }
    check_noise(d_obs, sigma, alpha)?;
    if let Some(bad) = simulated.iter().find(|d| d.len() != d_obs.len()) {
        return Err(Error::DimensionMismatch {
            what: "simulated data vector",
            expected: d_obs.len(),
            actual: bad.len(),
        });
    }
    if simulated.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("simulated data contain non-finite values".into()));
    }
    if !(energy > 0.0) {
        return Err(Error::invalid("TSVD energy fraction must be positive"));
    }

    let nf = n as f64;
    let mean_d: Vec<f64> = (0..d_obs.len())
        .map(|r| simulated.iter().map(|d| d[r]).sum::<f64>() / nf)
        .collect();
    let rows: Vec<usize> = (0..d_obs.len())
        .filter(|&r| sigma[r].is_finite() && simulated.iter().any(|d| d[r] != simulated[0][r]))
        .collect();
    if let Some(&r) = rows.iter().find(|&&r| sigma[r] == 0.0) {
        return Err(Error::invalid(format!("noise level of datum {r} is zero")));
    }
    if rows.is_empty() {
        return Ok(states.clone());
    }
    let nd = rows.len();
    let scale = (nf - 1.0).sqrt();

    // G = S^-1 (D - mean) / sqrt(N - 1)
    let g = DMatrix::from_fn(nd, n, |a, i| {
        let r = rows[a];
        (simulated[i][r] - mean_d[r]) / sigma[r] / scale
    });
    let mut c = &g * g.transpose();
    for a in 0..nd {
        c[(a, a)] += alpha;
    }
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..nd).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().sum();
    let mut kept = nd;
    if energy < 1.0 {
        let mut acc = 0.0;
        for (count, &k) in order.iter().enumerate() {
            acc += eig.eigenvalues[k];
            if acc >= energy * total {
                kept = count + 1;
                break;
            }
        }
    }
    let mut c_pinv = DMatrix::zeros(nd, nd);
    for &k in &order[..kept] {
        let lambda = eig.eigenvalues[k];
        if lambda > 0.0 {
            let v = eig.eigenvectors.column(k);
            c_pinv += (v * v.transpose()) / lambda;
        }
    }

    // Innovation matrix S^-1 (d_pert - d), column per member.
    let mut innov = DMatrix::zeros(nd, n);
    for i in 0..n {
        let pert = perturb_one(d_obs, sigma, alpha, member_seeds[i]);
        for (a, &r) in rows.iter().enumerate() {
            innov[(a, i)] = (pert[r] - simulated[i][r]) / sigma[r];
        }
    }
    // W = G^T C^+ innov / sqrt(N - 1); increment = (M - mean) W.
    let w = g.transpose() * (c_pinv * innov) / scale;

    let mean_m = states.mean();
    let m_len = states.state_len();
    let anomalies = DMatrix::from_fn(m_len, n, |r, i| states.members()[i].0[r] - mean_m[r]);
    let delta = anomalies * w;
    let members = states
        .members()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let col: DVector<f64> = delta.column(i).into_owned();
            StateVector(m.0.iter().zip(col.iter()).map(|(a, b)| a + b).collect())
        })
        .collect::<Vec<_>>();
    if members.iter().flat_map(|m| &m.0).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("ES-MDA update produced non-finite states".into()));
    }
    Ensemble::new(members, states.kind())
}
