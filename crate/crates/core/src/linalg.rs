//! Dense linear algebra for the small symmetric systems that arise in local
//! fits (dimension at most six).

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SmallMatrix {
    pub fn zeros(dim: usize) -> Self {
        SmallMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Hankel matrix `H[i][j] = moments[i + j]`.
    pub fn hankel(dim: usize, moments: &[f64]) -> Self {
        debug_assert!(moments.len() >= 2 * dim - 1);
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = moments[i + j];
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), dim);
            for (j, v) in r.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self, s: f64) -> Self {
        SmallMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn matmul(&self, other: &SmallMatrix) -> SmallMatrix {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    fn norm1(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for SmallMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SmallMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Cholesky factorisation of a symmetric definite matrix after symmetric
/// diagonal equilibration. Negative definite matrices are factorised via
/// their negation.
#[derive(Debug, Clone)]
pub struct SymFactor {
    dim: usize,
    // scaling: A = sign * S^{-1} (L L^T) S^{-1}, S = diag(scale)
    scale: Vec<f64>,
    sign: f64,
    lower: SmallMatrix,
    condition: f64,
}

/// Reason a small symmetric system could not be solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveFailure {
    NotDefinite,
    IllConditioned(f64),
}

impl SymFactor {
    /// Factorises `a`, which must be positive definite (`sign = 1`) or
    /// negative definite (`sign = -1`). Fails when the equilibrated matrix is
    /// not definite or its 1-norm condition number exceeds `max_condition`.
    pub fn new(a: &SmallMatrix, sign: f64, max_condition: f64) -> Result<Self, SolveFailure> {
        let n = a.dim;
        let mut scale = vec![0.0; n];
        for i in 0..n {
            let d = sign * a[(i, i)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(SolveFailure::NotDefinite);
            }
            scale[i] = 1.0 / d.sqrt();
        }
        let mut eq = SmallMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                eq[(i, j)] = sign * a[(i, j)] * scale[i] * scale[j];
            }
        }
        let mut l = SmallMatrix::zeros(n);
        for j in 0..n {
            let mut d = eq[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) {
                return Err(SolveFailure::NotDefinite);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = eq[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        let mut factor = SymFactor {
            dim: n,
            scale,
            sign,
            lower: l,
            condition: 1.0,
        };
        let inv_eq = factor.equilibrated_inverse();
        let condition = eq.norm1() * inv_eq.norm1();
        if !condition.is_finite() || condition > max_condition {
            return Err(SolveFailure::IllConditioned(condition));
        }
        factor.condition = condition;
        Ok(factor)
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn solve_equilibrated(&self, rhs: &mut [f64]) {
        let n = self.dim;
        let l = &self.lower;
        for i in 0..n {
            let mut s = rhs[i];
            for k in 0..i {
                s -= l[(i, k)] * rhs[k];
            }
            rhs[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * rhs[k];
            }
            rhs[i] = s / l[(i, i)];
        }
    }

    fn equilibrated_inverse(&self) -> SmallMatrix {
        let n = self.dim;
        let mut inv = SmallMatrix::zeros(n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = 0.0);
            col[j] = 1.0;
            self.solve_equilibrated(&mut col);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = b.iter().zip(&self.scale).map(|(v, s)| v * s).collect();
        self.solve_equilibrated(&mut x);
        x.iter()
            .zip(&self.scale)
            .map(|(v, s)| v * s * self.sign)
            .collect()
    }

    /// `A^{-1}`.
    pub fn inverse(&self) -> SmallMatrix {
        let n = self.dim;
        let inv_eq = self.equilibrated_inverse();
        let mut inv = SmallMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = self.sign * inv_eq[(i, j)] * self.scale[i] * self.scale[j];
            }
        }
        inv
    }
}
