//! Sparse symmetric storage and preconditioned conjugate gradients.

use crate::error::{Error, Result};

/// Compressed sparse rows with sorted, merged column indices.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

/// Collects `(row, col, value)` contributions; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder {
            rows: vec![Vec::with_capacity(8); n],
        }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        self.rows[row].push((col, value));
    }

    /// Adds the symmetric coupling `c * (x_a - x_b)` to rows `a` and `b`.
    #[inline]
    pub fn add_coupling(&mut self, a: usize, b: usize, c: f64) {
        self.add(a, a, c);
        self.add(b, b, c);
        self.add(a, b, -c);
        self.add(b, a, -c);
    }

    pub fn build(self) -> CsrMatrix {
        let n = self.rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for mut row in self.rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(c);
                    val.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col.len());
        }
        CsrMatrix { n, row_ptr, col, val }
    }
}

impl CsrMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col[a..b], &self.val[a..b])
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().position(|&c| c == i).map_or(0.0, |p| vals[p])
            })
            .collect()
    }
}

enum Preconditioner {
    Jacobi(Vec<f64>),
    /// Lower factor with the sparsity of the lower triangle of A.
    IncompleteCholesky(CsrMatrix),
}

impl Preconditioner {
    fn new(a: &CsrMatrix) -> Self {
        match incomplete_cholesky(a) {
            Some(l) => Preconditioner::IncompleteCholesky(l),
            None => Preconditioner::Jacobi(
                a.diagonal()
                    .into_iter()
                    .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
                    .collect(),
            ),
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Jacobi(inv) => {
                for ((zi, ri), d) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * d;
                }
            }
            Preconditioner::IncompleteCholesky(l) => {
                let n = l.n;
                // L y = r
                for i in 0..n {
                    let (cols, vals) = l.row(i);
                    let mut s = r[i];
                    let last = cols.len() - 1;
                    for p in 0..last {
                        s -= vals[p] * z[cols[p]];
                    }
                    z[i] = s / vals[last];
                }
                // L^T x = y, in place.
                for i in (0..n).rev() {
                    let (cols, vals) = l.row(i);
                    let last = cols.len() - 1;
                    z[i] /= vals[last];
                    let zi = z[i];
                    for p in 0..last {
                        z[cols[p]] -= vals[p] * zi;
                    }
                }
            }
        }
    }
}

/// IC(0) factor; `None` on a non-positive pivot.
fn incomplete_cholesky(a: &CsrMatrix) -> Option<CsrMatrix> {
    let n = a.n;
    let mut row_ptr = vec![0];
    let mut col = Vec::new();
    let mut val: Vec<f64> = Vec::new();
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let start = col.len();
        for (&c, &v) in cols.iter().zip(vals) {
            if c <= i {
                col.push(c);
                val.push(v);
            }
        }
        if col.len() == start || *col.last().unwrap() != i {
            return None;
        }
        let end = col.len();
        for p in start..end {
            let k = col[p];
            // Sparse dot of the already-computed parts of rows i and k.
            let (ka, kb) = (row_ptr[k], if k == i { p } else { row_ptr[k + 1] - 1 });
            let mut s = val[p];
            let (mut x, mut y) = (start, ka);
            while x < p && y < kb {
                match col[x].cmp(&col[y]) {
                    std::cmp::Ordering::Less => x += 1,
                    std::cmp::Ordering::Greater => y += 1,
                    std::cmp::Ordering::Equal => {
                        s -= val[x] * val[y];
                        x += 1;
                        y += 1;
                    }
                }
            }
            if k == i {
                if !(s > 0.0) {
                    return None;
                }
                val[p] = s.sqrt();
            } else {
                val[p] = s / val[row_ptr[k + 1] - 1];
            }
        }
        row_ptr.push(col.len());
    }
    Some(CsrMatrix { n, row_ptr, col, val })
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from the
/// contents of `x`. Converged when `|b - A x| <= tol * |b|`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.n;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    a.mul(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = norm(&r) / b_norm;
    if res <= tol {
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: res,
        });
    }
    let pre = Preconditioner::new(a);
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=max_iter {
        a.mul(&p, &mut q);
        let pq: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        if !(pq > 0.0) {
            return Err(Error::SolverDivergence {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        res = norm(&r) / b_norm;
        if res <= tol {
            return Ok(SolveStats {
                iterations: it,
                relative_residual: res,
            });
        }
        pre.apply(&r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDivergence {
        iterations: max_iter,
        residual: res,
    })
}
