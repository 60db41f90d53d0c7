//! Dense linear-algebra kernels: a row-major matrix, a pivoted symmetric
//! solver and power iteration for the dominant eigenpair.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Row-major dense matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ v`
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "transpose of {}x{} times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x * vi;
            }
        }
        Ok(out)
    }

    /// Gram matrix `selfᵀ self`, exactly symmetric.
    pub fn gram(&self) -> Matrix {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..p {
                for b in a..p {
                    g[(a, b)] += r[a] * r[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn symmetry_tolerance(a: &Matrix) -> f64 {
    1e-10 * a.max_abs().max(1.0)
}

/// Solves `A x = b` for square symmetric `A` by Gaussian elimination with
/// partial pivoting. Indefinite matrices are accepted.
pub fn solve_symmetric(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} system with right-hand side of length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    if !a.is_symmetric(symmetry_tolerance(a)) {
        return Err(Error::DimensionMismatch("matrix is not symmetric".into()));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side".into()));
    }
    let scale = a.max_abs();
    let threshold = 1e-12 * scale;
    if n > 0 && scale == 0.0 {
        return Err(Error::SingularMatrix {
            pivot: 0.0,
            threshold,
        });
    }

    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let (piv_row, piv_abs) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs < threshold {
            return Err(Error::SingularMatrix {
                pivot: piv_abs,
                threshold,
            });
        }
        if piv_row != col {
            for j in 0..n {
                m.swap(col * n + j, piv_row * n + j);
            }
            x.swap(col, piv_row);
        }
        let pivot = m[col * n + col];
        for r in col + 1..n {
            let factor = m[r * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                m[r * n + j] -= factor * m[col * n + j];
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let tail: f64 = (col + 1..n).map(|j| m[col * n + j] * x[j]).sum();
        x[col] = (x[col] - tail) / m[col * n + col];
    }
    Ok(x)
}

/// Inverse of a symmetric matrix, column by column through [`solve_symmetric`].
pub fn invert_symmetric(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = solve_symmetric(a, &e)?;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    // average out rounding asymmetry
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = m;
            inv[(j, i)] = m;
        }
    }
    Ok(inv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit vector; its largest-magnitude entry is positive.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Dominant eigenpair of a symmetric positive semi-definite matrix by power
/// iteration from a seeded random start.
pub fn dominant_eigenpair(s: &Matrix, tol: f64, max_iter: usize, seed: u64) -> Result<Eigenpair> {
    dominant_eigenpair_excluding(s, tol, max_iter, seed, &[])
}

/// Number of plain iterations between operator squarings.
const SQUARING_PERIOD: usize = 32;

/// Power iteration restricted to the orthogonal complement of `exclude`
/// (a list of orthonormal vectors). Used by deflated PCA so that later
/// components stay orthogonal even once the deflated matrix is numerically
/// zero.
///
/// When the plain iteration stalls (near-degenerate leading eigenvalues) the
/// iteration operator is periodically squared, so each step applies a higher
/// power of the matrix. The residual is always measured against `s` itself.
pub fn dominant_eigenpair_excluding(
    s: &Matrix,
    tol: f64,
    max_iter: usize,
    seed: u64,
    exclude: &[Vec<f64>],
) -> Result<Eigenpair> {
    let n = s.rows();
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigenproblem on a {}x{} matrix",
            s.rows(),
            s.cols()
        )));
    }
    if n == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    if !s.is_symmetric(symmetry_tolerance(s)) {
        return Err(Error::DimensionMismatch("matrix is not symmetric".into()));
    }
    if max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
    }
    if exclude.iter().any(|u| u.len() != n) {
        return Err(Error::DimensionMismatch("excluded vector length".into()));
    }

    let project = |v: &mut Vec<f64>| {
        for u in exclude {
            let c = dot(u, v);
            v.iter_mut().zip(u).for_each(|(x, ui)| *x -= c * ui);
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    project(&mut v);
    if normalize(&mut v).is_none() {
        // random start fell into the excluded span; try coordinate axes
        v = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                project(&mut e);
                e
            })
            .max_by(|a, b| norm2(a).total_cmp(&norm2(b)))
            .expect("n > 0");
        if normalize(&mut v).is_none() {
            return Err(Error::DimensionMismatch(
                "excluded vectors span the whole space".into(),
            ));
        }
    }

    let mut op = s.clone();
    let mut last_residual = f64::INFINITY;
    for iteration in 0..=max_iter {
        let sv = s.matvec(&v)?;
        let lambda = dot(&v, &sv);
        let residual = sv
            .iter()
            .zip(&v)
            .fold(0.0_f64, |m, (a, b)| m.max((a - lambda * b).abs()));
        if residual <= tol {
            return Ok(finish(lambda, v, iteration, residual, tol));
        }
        last_residual = residual;
        if iteration == max_iter {
            break;
        }
        if iteration > 0 && iteration % SQUARING_PERIOD == 0 {
            op = square_normalized(&op)?;
        }
        let mut w = op.matvec(&v)?;
        project(&mut w);
        if normalize(&mut w).is_none() {
            // v lies in the null space of the operator
            return Ok(finish(0.0, v, iteration, residual, tol));
        }
        v = w;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: last_residual,
        last_iterate: v,
    })
}

fn finish(lambda: f64, mut v: Vec<f64>, iterations: usize, residual: f64, tol: f64) -> Eigenpair {
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best });
    if v[imax] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let value = if lambda < 0.0 && lambda >= -tol { 0.0 } else { lambda };
    Eigenpair {
        value,
        vector: v,
        iterations,
        residual,
    }
}

fn normalize(v: &mut [f64]) -> Option<f64> {
    let n = norm2(v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(n)
}

fn square_normalized(m: &Matrix) -> Result<Matrix> {
    let mut sq = m.matmul(m)?;
    let scale = sq.max_abs();
    if scale == 0.0 {
        return Ok(m.clone());
    }
    let n = sq.rows();
    for i in 0..n {
        for j in 0..=i {
            let v = 0.5 * (sq[(i, j)] + sq[(j, i)]) / scale;
            sq[(i, j)] = v;
            sq[(j, i)] = v;
        }
    }
    Ok(sq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &Matrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.matvec(x).unwrap();
        ax.iter().zip(b).fold(0.0, |m, (p, q)| m.max((p - q).abs()))
    }

    #[test]
    fn solve_identity() {
        let x = solve_symmetric(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn solve_diagonal() {
        let x = solve_symmetric(&Matrix::diag(&[2.0, 4.0]), &[2.0, 8.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn solve_two_by_two_against_hand_elimination() {
        // 4x + y = 1, x + 3y = 2  =>  y = 7/11, x = 1/11
        let a = Matrix::from_rows(&[[4.0, 1.0], [1.0, 3.0]]).unwrap();
        let x = solve_symmetric(&a, &[1.0, 2.0]).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-15);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn solve_indefinite_needs_pivoting() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let x = solve_symmetric(&a, &[3.0, 5.0]).unwrap();
        assert_eq!(x, vec![5.0, 3.0]);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(
            solve_symmetric(&a, &[1.0, 1.0]),
            Err(Error::SingularMatrix { .. })
        ));
        assert!(matches!(
            solve_symmetric(&Matrix::zeros(2, 2), &[1.0, 1.0]),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn dimension_and_symmetry_checks() {
        assert!(matches!(
            solve_symmetric(&Matrix::identity(2), &[1.0]),
            Err(Error::DimensionMismatch(_))
        ));
        let a = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(solve_symmetric(&a, &[1.0, 1.0]).is_err());
        assert!(Matrix::new(2, 2, vec![1.0, f64::NAN, 0.0, 1.0]).is_err());
        assert!(Matrix::new(2, 2, vec![1.0]).is_err());
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = Matrix::from_rows(&[[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]]).unwrap();
        let inv = invert_symmetric(&a).unwrap();
        let prod = a.matmul(&inv).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigen_diagonal() {
        let e = dominant_eigenpair(&Matrix::diag(&[3.0, 1.0]), 1e-12, 10_000, 7).unwrap();
        assert!((e.value - 3.0).abs() < 1e-12);
        assert!((e.vector[0] - 1.0).abs() < 1e-12);
        assert!(e.vector[1].abs() < 1e-6);
    }

    #[test]
    fn eigen_identity_degenerate() {
        let e = dominant_eigenpair(&Matrix::identity(2), 1e-12, 10, 3).unwrap();
        assert_eq!(e.value, 1.0);
        assert!((norm2(&e.vector) - 1.0).abs() < 1e-12);
        let big = e.vector.iter().cloned().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
        assert!(big > 0.0);
    }

    #[test]
    fn eigen_two_by_two_characteristic_polynomial() {
        // det([[2-l,1],[1,2-l]]) = (l-1)(l-3)
        let s = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = dominant_eigenpair(&s, 1e-12, 10_000, 11).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((e.value - 3.0).abs() < 1e-11);
        assert!((e.vector[0] - h).abs() < 1e-11 && (e.vector[1] - h).abs() < 1e-11);
    }

    #[test]
    fn eigen_near_degenerate_uses_squaring() {
        let s = Matrix::diag(&[1.0, 1.0 - 1e-6, 0.5]);
        let e = dominant_eigenpair(&s, 1e-13, 5_000, 5).unwrap();
        assert!((e.value - 1.0).abs() < 1e-6);
        assert!(e.residual <= 1e-13);
    }

    #[test]
    fn eigen_zero_matrix() {
        let e = dominant_eigenpair(&Matrix::zeros(3, 3), 1e-12, 10, 1).unwrap();
        assert_eq!(e.value, 0.0);
        assert!((norm2(&e.vector) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_excluding_finds_second_axis() {
        let s = Matrix::diag(&[5.0, 2.0, 1.0]);
        let e = dominant_eigenpair_excluding(&s, 1e-12, 10_000, 2, &[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!((e.value - 2.0).abs() < 1e-11);
        assert!(e.vector[0].abs() < 1e-15);
    }

    #[test]
    fn eigen_no_convergence_reports_iterate() {
        let s = Matrix::diag(&[1.0, 0.999_999, 0.0]);
        match dominant_eigenpair(&s, 1e-15, 1, 9) {
            Err(Error::NoConvergence { last_iterate, .. }) => assert_eq!(last_iterate.len(), 3),
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn random_solves_meet_residual_bound() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in 1..=8 {
            let raw: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = Matrix::new(n, n, raw).unwrap();
            let mut a = r.gram();
            for i in 0..n {
                a[(i, i)] += 0.1;
            }
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let x = solve_symmetric(&a, &b).unwrap();
            assert!(residual(&a, &x, &b) <= 1e-8 * (1.0 + max_norm(&b)));
        }
    }
}
