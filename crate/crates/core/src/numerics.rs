//! Small numerical kernels shared by the solvers: quadrature nodes, tridiagonal
//! and banded elimination, log-log regression and summary statistics.

use nalgebra::DMatrix;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[i]` couples row `i` to `i-1`, `upper[i]` couples row `i` to `i+1`.
/// Returns `None` on a vanishing pivot.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
) -> Option<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta.abs() < 1e-300 {
        return None;
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta.abs() < 1e-300 {
            return None;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Some(())
}

/// LU factorisation of a banded matrix without pivoting.
///
/// Intended for diagonally dominant finite-difference operators.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    // row-major band storage: a[i][j - i + bw] for |i - j| <= bw
    band: Vec<f64>,
}

impl BandedLu {
    pub fn new(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: vec![0.0; n * (2 * bw + 1)],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i.abs_diff(j) <= self.bw);
        let k = self.idx(i, j);
        self.band[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.band[self.idx(i, j)]
        }
    }

    pub fn factor(&mut self) -> Result<(), String> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = self.band[self.idx(k, k)];
            if !pivot.is_finite() || pivot.abs() < 1e-300 {
                return Err(format!("vanishing pivot at row {k}"));
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let li = self.idx(i, k);
                let factor = self.band[li] / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.band[li] = factor;
                for j in k + 1..=last {
                    let kj = self.band[self.idx(k, j)];
                    if kj != 0.0 {
                        let ij = self.idx(i, j);
                        self.band[ij] -= factor * kj;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let mut s = rhs[i];
            for (j, r) in rhs.iter().enumerate().take(i).skip(first) {
                s -= self.band[self.idx(i, j)] * r;
            }
            rhs[i] = s;
        }
        for i in (0..n).rev() {
            let last = (i + bw).min(n - 1);
            let mut s = rhs[i];
            for j in i + 1..=last {
                s -= self.band[self.idx(i, j)] * rhs[j];
            }
            rhs[i] = s / self.band[self.idx(i, i)];
        }
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// Sample mean and standard error (sample std / sqrt(n)), summed in index order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Operator (spectral) norm of a row-major `d x d` matrix.
pub fn operator_norm(m: &[f64], d: usize) -> f64 {
    match d {
        1 => m[0].abs(),
        _ => {
            let mat = DMatrix::from_row_slice(d, d, m);
            mat.singular_values().max()
        }
    }
}

/// Smallest eigenvalue of `m m^T` for a row-major `d x d` matrix.
pub fn min_eig_gram(m: &[f64], d: usize) -> f64 {
    let mat = DMatrix::from_row_slice(d, d, m);
    let gram = &mat * mat.transpose();
    gram.symmetric_eigenvalues().min()
}

/// `out = m v` for a row-major `d x d` matrix.
pub fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for i in 0..d {
        out[i] = (0..d).map(|j| m[i * d + j] * v[j]).sum();
    }
}

/// `m^T v` for a row-major `d x d` matrix.
pub fn mat_t_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d)
        .map(|j| (0..d).map(|i| m[i * d + j] * v[i]).sum())
        .collect()
}

/// Solves `m x = v` for small dense systems; `None` if singular.
pub fn solve_small(m: &[f64], v: &[f64]) -> Option<Vec<f64>> {
    let d = v.len();
    if d == 1 {
        return if m[0] == 0.0 {
            None
        } else {
            Some(vec![v[0] / m[0]])
        };
    }
    let mat = DMatrix::from_row_slice(d, d, m);
    let rhs = nalgebra::DVector::from_column_slice(v);
    mat.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

/// Composite trapezoid over a uniform grid of spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[n - 1]))
}
