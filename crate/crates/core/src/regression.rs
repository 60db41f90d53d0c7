//! Ordinary least squares through the normal equations, with the fit
//! statistics reported for each group model.

use serde::{Deserialize, Serialize};

use crate::curveproc::ExpansionSeries;
use crate::domain::{FitStatistics, GroupLabel, GroupModel, Mixture, ModelForm, Term};
use crate::error::{Error, Result};
use crate::numkernel::{invert_symmetric, solve_symmetric, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Estimated coefficients in regressor-column order (intercept last by
    /// project convention).
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub residual_std: f64,
    /// `None` where the standard error is zero (exact fits).
    pub t_statistics: Vec<Option<f64>>,
    pub n_observations: usize,
}

/// Least-squares fit of `y` on the columns of `x`.
pub fn ols_fit(x: &Matrix, y: &[f64]) -> Result<OlsFit> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} regressor rows, {} responses",
            y.len()
        )));
    }
    if n <= p {
        return Err(Error::TooFewObservations {
            observations: n,
            parameters: p,
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response".into()));
    }
    let xtx = x.gram();
    let xty = x.tr_matvec(y)?;
    let beta = solve_symmetric(&xtx, &xty).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::RankDeficient,
        other => other,
    })?;

    let fitted = x.matvec(&beta)?;
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ess: f64 = fitted.iter().map(|v| (v - mean).powi(2)).sum();
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();

    let r_squared = if sst > 0.0 {
        ess / sst
    } else {
        let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        if rss <= n as f64 * (f64::EPSILON * scale).powi(2) {
            1.0
        } else {
            return Err(Error::ConstantResponse);
        }
    };

    let sigma2 = rss / (n - p) as f64;
    let inv = invert_symmetric(&xtx).map_err(|_| Error::RankDeficient)?;
    let t_statistics = beta
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let se = (sigma2 * inv[(j, j)]).sqrt();
            (se > 0.0 && se.is_finite()).then(|| b / se)
        })
        .collect();

    Ok(OlsFit {
        coefficients: beta,
        r_squared,
        residual_std: sigma2.sqrt(),
        t_statistics,
        n_observations: n,
    })
}

/// `x_new · β̂`
pub fn predict(fit: &OlsFit, x_new: &Matrix) -> Result<Vec<f64>> {
    if x_new.rows() == 0 {
        return Ok(Vec::new());
    }
    if x_new.cols() != fit.coefficients.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} columns for {} coefficients",
            x_new.cols(),
            fit.coefficients.len()
        )));
    }
    x_new.matvec(&fit.coefficients)
}

/// Regression design for one group: pooled per-sample rows over all of the
/// group's specimens.
#[derive(Debug, Clone)]
pub struct GroupDesign {
    pub x: Matrix,
    pub y: Vec<f64>,
    /// Samples skipped because `ln(EXP)` is undefined.
    pub dropped_nonpositive: usize,
}

pub fn group_design(rows: &[(&Mixture, &ExpansionSeries)], form: ModelForm, terms: &[Term]) -> Result<GroupDesign> {
    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut dropped = 0;
    for (mix, series) in rows {
        for (t, exp) in series.samples() {
            let response = match form {
                ModelForm::Linear => exp,
                ModelForm::LogLinear if exp > 0.0 => exp.ln(),
                ModelForm::LogLinear => {
                    dropped += 1;
                    continue;
                }
            };
            for term in terms {
                data.push(term.value(mix, t)?);
            }
            y.push(response);
        }
    }
    Ok(GroupDesign {
        x: Matrix::new(y.len(), terms.len(), data)?,
        y,
        dropped_nonpositive: dropped,
    })
}

/// Fits a group's model on pooled (mixture, series) rows. `terms` defaults to
/// the group's standard regressors; the log-linear form is used for HN.
pub fn fit_group_model(
    rows: &[(&Mixture, &ExpansionSeries)],
    group: GroupLabel,
    terms: Option<&[Term]>,
) -> Result<GroupModel> {
    if rows.len() < 2 {
        return Err(Error::EmptyGroup {
            group: group.to_string(),
            count: rows.len(),
        });
    }
    let form = group.model_form();
    let terms = terms.map_or_else(|| group.default_terms(), <[Term]>::to_vec);
    let design = group_design(rows, form, &terms)?;
    if design.dropped_nonpositive > 0 {
        log::warn!(
            "group {group}: dropped {} non-positive expansion samples before the log transform",
            design.dropped_nonpositive
        );
    }
    let fit = ols_fit(&design.x, &design.y)?;
    Ok(GroupModel {
        group,
        form,
        terms,
        coefficients: fit.coefficients.clone(),
        fit: Some(FitStatistics {
            r_squared: fit.r_squared,
            residual_std: fit.residual_std,
            t_statistics: fit.t_statistics,
            n_observations: fit.n_observations,
            dropped_nonpositive: design.dropped_nonpositive,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::max_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn with_intercept(xs: &[f64]) -> Matrix {
        let rows: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 1.0]).collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn exact_affine_data() {
        let fit = ols_fit(&with_intercept(&[0.0, 1.0, 2.0]), &[1.0, 3.0, 5.0]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let y = predict(&fit, &with_intercept(&[3.0])).unwrap();
        assert!((y[0] - 7.0).abs() < 1e-12);
        assert!(predict(&fit, &Matrix::zeros(0, 2)).unwrap().is_empty());
        assert!(predict(&fit, &Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn noiseless_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let beta = [1.5, -0.25, 3.0];
        let rows: Vec<[f64; 3]> = (0..50)
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(0.0..10.0), 1.0])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum()).collect();
        let fit = ols_fit(&x, &y).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let refit = predict(&fit, &x).unwrap();
        assert!(refit.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn null_relationship() {
        // x symmetric about its mean, y even in x: no linear association
        let fit = ols_fit(&with_intercept(&[-2.0, -1.0, 0.0, 1.0, 2.0]), &[4.0, 1.0, 0.0, 1.0, 4.0]).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!(fit.r_squared.abs() < 1e-12);
    }

    #[test]
    fn t_statistics_classical_formula() {
        // y = 2x + 1 + e with e = (0.1, -0.1, -0.1, 0.1); checked against closed forms
        let xs = [0.0, 1.0, 2.0, 3.0];
        let e = [0.1, -0.1, -0.1, 0.1];
        let y: Vec<f64> = xs.iter().zip(&e).map(|(x, e)| 2.0 * x + 1.0 + e).collect();
        let fit = ols_fit(&with_intercept(&xs), &y).unwrap();
        let sxx: f64 = 5.0; // Σ(x - 1.5)²
        let rss: f64 = y.iter().zip(&xs).map(|(y, x)| (y - fit.coefficients[0] * x - fit.coefficients[1]).powi(2)).sum();
        let s2 = rss / 2.0;
        let se_slope = (s2 / sxx).sqrt();
        let se_int = (s2 * (1.0 / 4.0 + 1.5 * 1.5 / sxx)).sqrt();
        assert!((fit.t_statistics[0].unwrap() - fit.coefficients[0] / se_slope).abs() < 1e-9);
        assert!((fit.t_statistics[1].unwrap() - fit.coefficients[1] / se_int).abs() < 1e-9);
        assert!((fit.residual_std - s2.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn error_paths() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        assert!(matches!(ols_fit(&x, &[1.0, 2.0, 3.0]), Err(Error::RankDeficient)));
        assert!(matches!(
            ols_fit(&with_intercept(&[0.0, 1.0]), &[1.0, 2.0]),
            Err(Error::TooFewObservations { .. })
        ));
        // constant response, exact fit through the intercept
        let fit = ols_fit(&with_intercept(&[0.0, 1.0, 2.0]), &[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(fit.r_squared, 1.0);
        // constant response, no intercept: cannot be fitted exactly
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert!(matches!(ols_fit(&x, &[3.0, 3.0, 3.0]), Err(Error::ConstantResponse)));
    }

    #[test]
    fn normal_equations_and_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let rows: Vec<[f64; 3]> = (0..30)
                .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(0.0..1.0), 1.0])
                .collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let y: Vec<f64> = (0..30).map(|_| rng.random_range(-3.0..3.0)).collect();
            let fit = ols_fit(&x, &y).unwrap();
            let fitted = predict(&fit, &x).unwrap();
            let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
            let xtr = x.tr_matvec(&resid).unwrap();
            assert!(max_norm(&xtr) <= 1e-8 * (1.0 + max_norm(&x.tr_matvec(&y).unwrap())));
            let mean = y.iter().sum::<f64>() / 30.0;
            let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            let ess: f64 = fitted.iter().map(|v| (v - mean).powi(2)).sum();
            let rss: f64 = resid.iter().map(|r| r * r).sum();
            assert!(((ess + rss) - sst).abs() <= 1e-6 * sst);
            assert!((0.0..=1.0 + 1e-12).contains(&fit.r_squared));
        }
    }

    #[test]
    fn noise_regressor_never_lowers_r_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = xs.iter().map(|x| 0.3 * x + rng.random_range(-1.0..1.0)).collect();
        let base = ols_fit(&with_intercept(&xs), &y).unwrap();
        let rows: Vec<[f64; 3]> = xs.iter().map(|&x| [x, rng.random_range(-1.0..1.0), 1.0]).collect();
        let wider = ols_fit(&Matrix::from_rows(&rows).unwrap(), &y).unwrap();
        assert!(wider.r_squared >= base.r_squared - 1e-12);
    }
}
