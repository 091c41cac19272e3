//! Thomas algorithm for tridiagonal systems.

/// Tridiagonal matrix stored by diagonals. `lower[j]` couples row `j` to `j-1` (so `lower[0]`
/// is unused), `upper[j]` couples row `j` to `j+1` (`upper[n-1]` unused).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Forward-eliminated form of a [`Tridiagonal`], reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    // modified upper coefficients c'_j and reciprocal pivots
    cprime: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        assert!(lower.len() == diag.len() && upper.len() == diag.len());
        Self { lower, diag, upper }
    }

    /// Constant-coefficient matrix of size `n`.
    pub fn constant(n: usize, lower: f64, diag: f64, upper: f64) -> Self {
        Self::new(vec![lower; n], vec![diag; n], vec![upper; n])
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j] * x[j];
                if j > 0 {
                    s += self.lower[j] * x[j - 1];
                }
                if j + 1 < n {
                    s += self.upper[j] * x[j + 1];
                }
                s
            })
            .collect()
    }

    /// Factorization without pivoting; requires a diagonally dominant (or otherwise stable) matrix.
    pub fn factor(&self) -> TridiagonalLu {
        let n = self.len();
        let mut cprime = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_c = 0.0;
        for j in 0..n {
            let l = if j > 0 { self.lower[j] } else { 0.0 };
            let pivot = self.diag[j] - l * prev_c;
            let inv = 1.0 / pivot;
            inv_pivot[j] = inv;
            prev_c = if j + 1 < n { self.upper[j] * inv } else { 0.0 };
            cprime[j] = prev_c;
        }
        TridiagonalLu {
            lower: self.lower.clone(),
            cprime,
            inv_pivot,
        }
    }

    /// One-shot solve of `A x = rhs`, overwriting `rhs` with `x`.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        self.factor().solve_in_place(rhs);
    }
}

impl TridiagonalLu {
    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return;
        }
        rhs[0] *= self.inv_pivot[0];
        for j in 1..n {
            rhs[j] = (rhs[j] - self.lower[j] * rhs[j - 1]) * self.inv_pivot[j];
        }
        for j in (0..n - 1).rev() {
            rhs[j] -= self.cprime[j] * rhs[j + 1];
        }
    }
}
