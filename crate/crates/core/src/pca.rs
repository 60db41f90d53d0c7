//! Principal components by sequential variance maximisation: each loading is
//! the dominant eigenvector of the Gram matrix of the data with all earlier
//! components subtracted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{dominant_eigenpair_excluding, Matrix};

pub const DEFAULT_COMPONENTS: usize = 3;

const EIGEN_MAX_ITER: usize = 100_000;
const EIGEN_SEED: u64 = 0x5eed_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub loadings: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// Centred (and optionally unit-variance) copy of `x`, with the column means
/// and scales that were removed. Constant columns keep scale 1.
pub fn center_and_scale(x: &Matrix, standardize: bool) -> Result<(Matrix, Vec<f64>, Vec<f64>)> {
    let (n, p) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    let means: Vec<f64> = (0..p)
        .map(|j| x.column(j).iter().sum::<f64>() / n as f64)
        .collect();
    let mut out = x.clone();
    for i in 0..n {
        for j in 0..p {
            out[(i, j)] -= means[j];
        }
    }
    let mut scales = vec![1.0; p];
    if standardize {
        for (j, scale) in scales.iter_mut().enumerate() {
            let ss: f64 = (0..n).map(|i| out[(i, j)] * out[(i, j)]).sum();
            let sd = (ss / (n - 1) as f64).sqrt();
            if sd > 0.0 {
                *scale = sd;
                for i in 0..n {
                    out[(i, j)] /= sd;
                }
            }
        }
    }
    Ok((out, means, scales))
}

/// First `m` principal components of an already centred matrix.
pub fn principal_components(x: &Matrix, m: usize) -> Result<PcaResult> {
    let (n, p) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::TooFewRows(n));
    }
    if m == 0 || m > (n - 1).min(p) {
        return Err(Error::InvalidConfig(format!(
            "{m} components requested from a {n}x{p} matrix (at most {})",
            (n - 1).min(p)
        )));
    }
    let total_variance = x.frobenius_norm().powi(2) / (n - 1) as f64;
    let tol = 1e-12 * x.gram().max_abs().max(1.0);

    let mut residual = x.clone();
    let mut loadings: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut explained_variance = Vec::with_capacity(m);
    for k in 0..m {
        let gram = residual.gram();
        let pair = dominant_eigenpair_excluding(&gram, tol, EIGEN_MAX_ITER, EIGEN_SEED + k as u64, &loadings)?;
        let w = pair.vector;
        // X <- X - (X w) wᵀ
        let scores = residual.matvec(&w)?;
        for (i, s) in scores.iter().enumerate() {
            for (j, wj) in w.iter().enumerate() {
                residual[(i, j)] -= s * wj;
            }
        }
        explained_variance.push(scores.iter().map(|s| s * s).sum::<f64>() / (n - 1) as f64);
        loadings.push(w);
    }
    let explained_ratio = explained_variance
        .iter()
        .map(|v| if total_variance > 0.0 { v / total_variance } else { 0.0 })
        .collect();
    Ok(PcaResult {
        loadings,
        explained_variance,
        explained_ratio,
        means: vec![0.0; p],
        scales: vec![1.0; p],
    })
}

/// Centres/scales `x` and extracts `m` components, recording the
/// preprocessing in the result.
pub fn fit(x: &Matrix, standardize: bool, m: usize) -> Result<PcaResult> {
    let (centered, means, scales) = center_and_scale(x, standardize)?;
    let mut result = principal_components(&centered, m)?;
    result.means = means;
    result.scales = scales;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominantVariable {
    pub component: usize,
    pub column: usize,
    /// Column already chosen by an earlier component.
    pub duplicate: bool,
    /// Another column had exactly the same absolute loading.
    pub tie: bool,
}

/// For each of the first `m` components, the column with the largest
/// absolute loading (smallest index on exact ties).
pub fn select_dominant_variables(result: &PcaResult, m: usize) -> Result<Vec<DominantVariable>> {
    if m > result.loadings.len() {
        return Err(Error::InvalidConfig(format!(
            "{m} components requested, {} computed",
            result.loadings.len()
        )));
    }
    let mut chosen: Vec<DominantVariable> = Vec::with_capacity(m);
    for (component, w) in result.loadings.iter().take(m).enumerate() {
        let max = w.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        let column = w.iter().position(|x| x.abs() == max).unwrap_or(0);
        let tie = w.iter().filter(|x| x.abs() == max).count() > 1;
        let duplicate = chosen.iter().any(|d| d.column == column);
        chosen.push(DominantVariable {
            component,
            column,
            duplicate,
            tie,
        });
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::dot;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn centering_removes_mean() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let (c, means, scales) = center_and_scale(&x, false).unwrap();
        assert_eq!(c.column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(means, vec![2.0]);
        assert_eq!(scales, vec![1.0]);
    }

    #[test]
    fn constant_column_keeps_unit_scale() {
        let x = Matrix::from_rows(&[[5.0], [5.0], [5.0]]).unwrap();
        let (c, _, scales) = center_and_scale(&x, true).unwrap();
        assert_eq!(c.column(0), vec![0.0; 3]);
        assert_eq!(scales, vec![1.0]);
    }

    #[test]
    fn two_point_standardisation() {
        let x = Matrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let (c, _, scales) = center_and_scale(&x, true).unwrap();
        assert!((scales[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((c[(0, 0)] + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((c[(1, 0)] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            center_and_scale(&Matrix::from_rows(&[[1.0]]).unwrap(), true),
            Err(Error::TooFewRows(1))
        ));
    }

    #[test]
    fn rank_one_line() {
        let x = Matrix::from_rows(&[[-1.0, -1.0], [0.0, 0.0], [1.0, 1.0]]).unwrap();
        let r = principal_components(&x, 1).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((r.loadings[0][0] - h).abs() < 1e-12 && (r.loadings[0][1] - h).abs() < 1e-12);
        assert!((r.explained_ratio[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_square() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        let r = principal_components(&x, 2).unwrap();
        assert!((r.explained_ratio[0] - 0.5).abs() < 1e-9);
        assert!((r.explained_ratio[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn known_axis_variances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = Normal::new(0.0, 2.0).unwrap();
        let b = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<[f64; 2]> = (0..5000).map(|_| [a.sample(&mut rng), b.sample(&mut rng)]).collect();
        let r = fit(&Matrix::from_rows(&rows).unwrap(), false, 2).unwrap();
        assert!((r.loadings[0][0].abs() - 1.0).abs() < 0.05);
        assert!((r.loadings[1][1].abs() - 1.0).abs() < 0.05);
        assert!((r.explained_ratio[0] - 0.8).abs() < 0.05);
        assert!((r.explained_ratio[1] - 0.2).abs() < 0.05);
    }

    #[test]
    fn component_count_is_checked() {
        let x = Matrix::from_rows(&[[-1.0, 0.0, 2.0], [1.0, 0.0, -2.0]]).unwrap();
        assert!(principal_components(&x, 2).is_err());
        assert!(principal_components(&x, 0).is_err());
    }

    #[test]
    fn dominant_variable_rules() {
        let mk = |loadings: Vec<Vec<f64>>| PcaResult {
            explained_variance: vec![1.0; loadings.len()],
            explained_ratio: vec![0.5; loadings.len()],
            means: vec![],
            scales: vec![],
            loadings,
        };
        let r = mk(vec![vec![0.9, 0.1], vec![0.1, 0.9]]);
        let cols: Vec<usize> = select_dominant_variables(&r, 2).unwrap().iter().map(|d| d.column).collect();
        assert_eq!(cols, vec![0, 1]);

        let r = mk(vec![vec![-0.6, 0.55]]);
        assert_eq!(select_dominant_variables(&r, 1).unwrap()[0].column, 0);

        let r = mk(vec![vec![0.5, -0.5], vec![0.8, 0.2]]);
        let d = select_dominant_variables(&r, 2).unwrap();
        assert_eq!(d[0].column, 0);
        assert!(d[0].tie);
        assert!(d[1].duplicate && !d[1].tie);
        assert!(select_dominant_variables(&r, 3).is_err());
    }

    #[test]
    fn full_deflation_exhausts_the_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Normal::new(0.0, 1.0).unwrap();
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| g.sample(&mut rng)).collect()).collect();
        let (x, _, _) = center_and_scale(&Matrix::from_rows(&rows).unwrap(), false).unwrap();
        let r = principal_components(&x, 4).unwrap();
        let mut residual = x.clone();
        for w in &r.loadings {
            let s = residual.matvec(w).unwrap();
            for i in 0..residual.rows() {
                for j in 0..residual.cols() {
                    residual[(i, j)] -= s[i] * w[j];
                }
            }
        }
        assert!(residual.frobenius_norm() <= 1e-6 * x.frobenius_norm());
        for a in 0..4 {
            for b in 0..a {
                assert!(dot(&r.loadings[a], &r.loadings[b]).abs() < 1e-8);
            }
        }
    }
}
