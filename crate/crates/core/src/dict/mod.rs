//! Learned dictionaries for sparse representation of lnK fields.

mod kmeans;
mod ksvd;
mod omp;

pub use kmeans::kmeans;
pub use ksvd::{
    ksvd_train, mean_relative_error, residuals, sparse_code_all, update_atoms, KsvdParams, KsvdReport,
};
pub use omp::{omp, OmpCoder, SparseCode};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_flat, write_flat};
use crate::model::{Ensemble, EnsembleKind, StateVector};

/// `N_Y × d` matrix stored atom by atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    n: usize,
    d: usize,
    atoms: Vec<f64>,
}

impl Dictionary {
    pub fn from_atoms(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let d = atoms.len();
        if d == 0 {
            return Err(Error::invalid("dictionary needs at least one atom"));
        }
        let n = atoms[0].len();
        if n == 0 || atoms.iter().any(|a| a.len() != n) {
            return Err(Error::invalid("atoms must share a nonzero length"));
        }
        if atoms.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("atoms must be finite"));
        }
        Ok(Dictionary {
            n,
            d,
            atoms: atoms.concat(),
        })
    }

    pub fn signal_len(&self) -> usize {
        self.n
    }

    pub fn atom_count(&self) -> usize {
        self.d
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.n..(j + 1) * self.n]
    }

    pub(crate) fn atom_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.atoms[j * self.n..(j + 1) * self.n]
    }

    pub fn atoms(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|j| self.atom(j).to_vec()).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| self.atom(j).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// `D^T D`, row-major `d × d`.
    pub fn gram(&self) -> Vec<f64> {
        let d = self.d;
        let rows: Vec<Vec<f64>> = (0..d)
            .into_par_iter()
            .map(|i| {
                let a = self.atom(i);
                (0..d)
                    .map(|j| a.iter().zip(self.atom(j)).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect();
        rows.concat()
    }

    /// `D^T y`.
    pub fn correlate(&self, y: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|j| self.atom(j).iter().zip(y).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `D x`.
    pub fn decode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                what: "sparse code",
                expected: self.d,
                actual: x.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        for (j, &c) in x.iter().enumerate() {
            if c != 0.0 {
                for (t, a) in y.iter_mut().zip(self.atom(j)) {
                    *t += c * a;
                }
            }
        }
        Ok(y)
    }
}

/// JSON sidecar stored next to the flat atom file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryMeta {
    pub atoms: usize,
    pub signal_len: usize,
    pub sparsity: usize,
    pub seed: u64,
    pub sweeps: usize,
    /// Hash of the training-library manifest.
    pub training_hash: String,
    pub final_error: f64,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_dictionary(path: &Path, dict: &Dictionary, meta: &DictionaryMeta) -> Result<()> {
    write_flat(path, &dict.atoms())?;
    std::fs::write(sidecar(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn read_dictionary(path: &Path) -> Result<(Dictionary, DictionaryMeta)> {
    let dict = Dictionary::from_atoms(read_flat(path)?)?;
    let meta: DictionaryMeta = serde_json::from_str(&std::fs::read_to_string(sidecar(path))?)?;
    if meta.atoms != dict.atom_count() || meta.signal_len != dict.signal_len() {
        return Err(Error::Format("dictionary sidecar does not match the atom file".into()));
    }
    Ok((dict, meta))
}

/// Sparse codes of every member as dense length-`d` state vectors.
pub fn encode_ensemble(ensemble: &Ensemble, dict: &Dictionary, t0: usize, eta: f64) -> Result<Ensemble> {
    if ensemble.kind() != EnsembleKind::RawLnK {
        return Err(Error::invalid("encoding expects a raw lnK ensemble"));
    }
    if ensemble.state_len() != dict.signal_len() {
        return Err(Error::DimensionMismatch {
            what: "ensemble member",
            expected: dict.signal_len(),
            actual: ensemble.state_len(),
        });
    }
    let coder = OmpCoder::new(dict)?;
    let members = ensemble
        .members()
        .par_iter()
        .map(|m| coder.encode(&m.0, t0, eta).map(|c| StateVector(c.coefficients)))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(members, EnsembleKind::SparseCoefficients)
}

pub fn decode_ensemble(ensemble: &Ensemble, dict: &Dictionary) -> Result<Ensemble> {
    if ensemble.kind() != EnsembleKind::SparseCoefficients {
        return Err(Error::invalid("decoding expects a sparse-coefficient ensemble"));
    }
    let members = ensemble
        .members()
        .par_iter()
        .map(|m| dict.decode(&m.0).map(StateVector))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(members, EnsembleKind::RawLnK)
}
