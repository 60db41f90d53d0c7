//! Two-feature soft-margin linear SVM trained in the primal, and the
//! reduction of a trained boundary to an axis-parallel threshold.
//!
//! Training minimises `½‖β‖² + C Σ max(0, 1 − yₙ(xₙ·β + b))`. A seeded,
//! diagonally preconditioned subgradient descent with averaged iterates
//! finds the neighbourhood of the optimum; an active-set step on the same
//! objective then solves the optimality conditions for the margin set read
//! off that iterate, which both sharpens the answer and certifies it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{solve_symmetric, Matrix};

pub const DEFAULT_BOX_CONSTRAINT: f64 = 100.0;
pub const DEFAULT_MAX_ITER: usize = 100_000;
const STALL_WINDOW: usize = 100;
const STALL_REL_CHANGE: f64 = 1e-8;

/// `β·x + b = 0` in the plane of two named features. The positive side is
/// `β·x + b ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBoundary {
    pub feature_names: [String; 2],
    pub weights: [f64; 2],
    pub bias: f64,
    pub box_constraint: f64,
}

impl LinearBoundary {
    pub fn new(feature_names: [&str; 2], weights: [f64; 2], bias: f64, box_constraint: f64) -> Result<Self> {
        if weights.iter().chain([&bias, &box_constraint]).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary coefficients".into()));
        }
        if weights == [0.0, 0.0] {
            return Err(Error::DegenerateBoundary);
        }
        Ok(LinearBoundary {
            feature_names: feature_names.map(str::to_string),
            weights,
            bias,
            box_constraint,
        })
    }

    pub fn decision_value(&self, point: [f64; 2]) -> f64 {
        self.weights[0] * point[0] + self.weights[1] * point[1] + self.bias
    }

    /// Weights and bias rescaled so that `‖β‖₂ = 1`.
    pub fn normalized(&self) -> ([f64; 2], f64) {
        let n = self.weights[0].hypot(self.weights[1]);
        ([self.weights[0] / n, self.weights[1] / n], self.bias / n)
    }

    /// Index of the only non-zero weight, if the line is axis-parallel.
    pub fn parallel_axis(&self) -> Option<usize> {
        match self.weights {
            [_, 0.0] => Some(0),
            [0.0, _] => Some(1),
            _ => None,
        }
    }

    /// `"C3A + 1.241*WC - 8.697 = 0"` style rendering.
    pub fn equation(&self) -> String {
        let mut s = String::new();
        for (&w, name) in self.weights.iter().zip(&self.feature_names) {
            if w == 0.0 {
                continue;
            }
            let term = if w.abs() == 1.0 { name.clone() } else { format!("{}*{name}", w.abs()) };
            match (s.is_empty(), w < 0.0) {
                (true, false) => s.push_str(&term),
                (true, true) => s.push_str(&format!("-{term}")),
                (false, false) => s.push_str(&format!(" + {term}")),
                (false, true) => s.push_str(&format!(" - {term}")),
            }
        }
        let sign = if self.bias < 0.0 { '-' } else { '+' };
        format!("{s} {sign} {} = 0", self.bias.abs())
    }
}

/// Side of the boundary: `+1` when `β·x + b ≥ 0` (zero maps to `+1`), else `-1`.
pub fn classify(boundary: &LinearBoundary, point: [f64; 2]) -> i8 {
    if boundary.decision_value(point) >= 0.0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub box_constraint: f64,
    pub seed: u64,
    pub max_iter: usize,
    /// Train on z-scored features and map the result back to raw units.
    /// This changes the regulariser, hence the optimum.
    pub standardize: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            box_constraint: DEFAULT_BOX_CONSTRAINT,
            seed: 0,
            max_iter: DEFAULT_MAX_ITER,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub boundary: LinearBoundary,
    /// `ξₙ = max(0, 1 − yₙ f(xₙ))` per training point.
    pub slacks: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Optimality conditions verified at the returned solution.
    pub certified: bool,
}

/// Primal objective `½‖β‖² + C Σ max(0, 1 − yₙ(xₙ·β + b))`.
pub fn primal_objective(weights: [f64; 2], bias: f64, points: &[[f64; 2]], labels: &[i8], c: f64) -> f64 {
    let reg = 0.5 * (weights[0] * weights[0] + weights[1] * weights[1]);
    let loss: f64 = points
        .iter()
        .zip(labels)
        .map(|(x, &y)| (1.0 - f64::from(y) * (weights[0] * x[0] + weights[1] * x[1] + bias)).max(0.0))
        .sum();
    reg + c * loss
}

/// Trains with default settings and generic feature names.
pub fn svm_train(points: &[[f64; 2]], labels: &[i8], c: f64, seed: u64) -> Result<SvmFit> {
    let config = SvmConfig {
        box_constraint: c,
        seed,
        ..SvmConfig::default()
    };
    svm_train_with(points, labels, ["x0", "x1"], &config)
}

pub fn svm_train_with(
    points: &[[f64; 2]],
    labels: &[i8],
    feature_names: [&str; 2],
    config: &SvmConfig,
) -> Result<SvmFit> {
    let c = config.box_constraint;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidConfig(format!("box constraint must be positive, got {c}")));
    }
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points, {} labels",
            points.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::InvalidLabel(bad));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training points".into()));
    }

    let (train_points, back): (Vec<[f64; 2]>, Option<([f64; 2], [f64; 2])>) = if config.standardize {
        let (means, scales) = feature_moments(points);
        let z = points
            .iter()
            .map(|p| [(p[0] - means[0]) / scales[0], (p[1] - means[1]) / scales[1]])
            .collect();
        (z, Some((means, scales)))
    } else {
        (points.to_vec(), None)
    };

    let sub = subgradient_descent(&train_points, labels, c, config.seed, config.max_iter);
    let mut best = (sub.weights, sub.bias);
    let mut best_obj = primal_objective(best.0, best.1, &train_points, labels, c);
    let mut certified = false;
    for start in [(sub.weights, sub.bias), (sub.last_weights, sub.last_bias)] {
        let (theta, cert) = active_set_refine(&train_points, labels, c, start);
        let obj = primal_objective(theta.0, theta.1, &train_points, labels, c);
        if cert && !certified || (cert == certified && obj < best_obj) {
            best = theta;
            best_obj = obj;
            certified = cert;
        }
        if certified {
            break;
        }
    }
    if !certified && !sub.stalled {
        return Err(Error::NoConvergence {
            iterations: sub.iterations,
            residual: best_obj,
            last_iterate: vec![best.0[0], best.0[1], best.1],
        });
    }

    let (weights, bias) = match back {
        None => best,
        Some((means, scales)) => {
            let w = [best.0[0] / scales[0], best.0[1] / scales[1]];
            (w, best.1 - w[0] * means[0] - w[1] * means[1])
        }
    };
    let boundary = LinearBoundary::new(feature_names, weights, bias, c)?;
    let slacks = points
        .iter()
        .zip(labels)
        .map(|(p, &y)| (1.0 - f64::from(y) * boundary.decision_value(*p)).max(0.0))
        .collect();
    let objective = primal_objective(weights, bias, points, labels, c);
    Ok(SvmFit {
        boundary,
        slacks,
        objective,
        iterations: sub.iterations,
        certified,
    })
}

fn feature_moments(points: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let n = points.len() as f64;
    let mut means = [0.0; 2];
    let mut scales = [1.0; 2];
    for j in 0..2 {
        means[j] = points.iter().map(|p| p[j]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[j] - means[j]).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            scales[j] = var.sqrt();
        }
    }
    (means, scales)
}

struct Subgradient {
    weights: [f64; 2],
    bias: f64,
    last_weights: [f64; 2],
    last_bias: f64,
    iterations: usize,
    stalled: bool,
}

/// Subgradient descent with step `1/√t`, a fixed diagonal preconditioner
/// built from the centred feature energies, and polynomially weighted
/// iterate averaging. The bias is carried relative to the feature means,
/// an exact reparametrisation of the same objective.
fn subgradient_descent(points: &[[f64; 2]], labels: &[i8], c: f64, seed: u64, max_iter: usize) -> Subgradient {
    let n = points.len();
    let (means, _) = feature_moments(points);
    let centred: Vec<[f64; 2]> = points.iter().map(|p| [p[0] - means[0], p[1] - means[1]]).collect();
    let precond = [
        1.0 + c * centred.iter().map(|u| u[0] * u[0]).sum::<f64>(),
        1.0 + c * centred.iter().map(|u| u[1] * u[1]).sum::<f64>(),
        1.0 + c * n as f64,
    ];

    // small seeded start breaks the symmetry of the all-zero point
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = [
        rng.random_range(-1e-3..1e-3) / precond[0].sqrt(),
        rng.random_range(-1e-3..1e-3) / precond[1].sqrt(),
        0.0,
    ];
    let mut avg = theta;
    let objective = |t: &[f64; 3]| {
        0.5 * (t[0] * t[0] + t[1] * t[1])
            + c * centred
                .iter()
                .zip(labels)
                .map(|(u, &y)| (1.0 - f64::from(y) * (t[0] * u[0] + t[1] * u[1] + t[2])).max(0.0))
                .sum::<f64>()
    };

    let mut prev_obj = objective(&avg);
    let mut stalled = false;
    let mut iterations = 0;
    for t in 1..=max_iter {
        iterations = t;
        let mut g = [theta[0], theta[1], 0.0];
        for (u, &y) in centred.iter().zip(labels) {
            let y = f64::from(y);
            if y * (theta[0] * u[0] + theta[1] * u[1] + theta[2]) < 1.0 {
                g[0] -= c * y * u[0];
                g[1] -= c * y * u[1];
                g[2] -= c * y;
            }
        }
        let step = 1.0 / (t as f64).sqrt();
        for j in 0..3 {
            theta[j] -= step * g[j] / precond[j];
        }
        let rho = 2.0 / (t as f64 + 1.0);
        for j in 0..3 {
            avg[j] += rho * (theta[j] - avg[j]);
        }
        if t % STALL_WINDOW == 0 {
            let obj = objective(&avg);
            if (prev_obj - obj).abs() <= STALL_REL_CHANGE * obj.abs().max(f64::MIN_POSITIVE) {
                stalled = true;
                break;
            }
            prev_obj = obj;
        }
    }
    let uncentre = |t: [f64; 3]| ([t[0], t[1]], t[2] - t[0] * means[0] - t[1] * means[1]);
    let (weights, bias) = uncentre(avg);
    let (last_weights, last_bias) = uncentre(theta);
    Subgradient {
        weights,
        bias,
        last_weights,
        last_bias,
        iterations,
        stalled,
    }
}

fn margins(points: &[[f64; 2]], labels: &[i8], theta: ([f64; 2], f64)) -> Vec<f64> {
    points
        .iter()
        .zip(labels)
        .map(|(x, &y)| f64::from(y) * (theta.0[0] * x[0] + theta.0[1] * x[1] + theta.1))
        .collect()
}

/// Optimum of the objective restricted to a guessed partition: points in
/// `on_margin` satisfy `yₙ f(xₙ) = 1`, points in `violating` pay the linear
/// hinge. Returns the solution and the margin multipliers.
fn solve_partition(
    points: &[[f64; 2]],
    labels: &[i8],
    c: f64,
    on_margin: &[usize],
    violating: &[usize],
) -> Option<(([f64; 2], f64), Vec<f64>)> {
    let m = on_margin.len();
    if m == 0 {
        return None;
    }
    let a = |i: usize| {
        let y = f64::from(labels[i]);
        [y * points[i][0], y * points[i][1], y]
    };
    let mut g = [0.0; 3];
    for &i in violating {
        let ai = a(i);
        for j in 0..3 {
            g[j] += c * ai[j];
        }
    }
    // [[H, -Aᵀ], [-A, -εI]] (θ, μ) = (g, -1); the small ε keeps the system
    // solvable when margin constraints are linearly dependent.
    let dim = 3 + m;
    let mut k = Matrix::zeros(dim, dim);
    k[(0, 0)] = 1.0;
    k[(1, 1)] = 1.0;
    let scale = points.iter().flatten().fold(1.0_f64, |s, v| s.max(v.abs()));
    for (r, &i) in on_margin.iter().enumerate() {
        let ai = a(i);
        for j in 0..3 {
            k[(j, 3 + r)] = -ai[j];
            k[(3 + r, j)] = -ai[j];
        }
        k[(3 + r, 3 + r)] = -1e-13 * scale * scale;
    }
    let mut rhs = vec![0.0; dim];
    rhs[..3].copy_from_slice(&g);
    rhs[3..].iter_mut().for_each(|v| *v = -1.0);
    let sol = solve_symmetric(&k, &rhs).ok()?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((([sol[0], sol[1]], sol[2]), sol[3..].to_vec()))
}

/// Checks the optimality conditions of a partition solution: violators sit
/// inside the margin, the rest outside, and multipliers lie in `[0, C]`.
fn certify(
    points: &[[f64; 2]],
    labels: &[i8],
    c: f64,
    theta: ([f64; 2], f64),
    on_margin: &[usize],
    violating: &[usize],
    multipliers: &[f64],
) -> bool {
    let tol = 1e-7;
    let m = margins(points, labels, theta);
    let ok_mult = multipliers.iter().all(|&mu| mu >= -tol * c && mu <= c * (1.0 + tol));
    let ok_points = m.iter().enumerate().all(|(i, &mi)| {
        if violating.contains(&i) {
            mi <= 1.0 + tol
        } else if on_margin.contains(&i) {
            (mi - 1.0).abs() <= tol
        } else {
            mi >= 1.0 - tol
        }
    });
    ok_mult && ok_points
}

/// Margin partitions worth trying at a point: points within widening bands
/// of the margin, the points nearest the margin, and the least separated
/// point of each class.
fn candidate_partitions(m: &[f64], labels: &[i8]) -> Vec<(Vec<usize>, Vec<usize>)> {
    const BANDS: [f64; 8] = [1e-9, 1e-6, 1e-4, 1e-3, 1e-2, 3e-2, 0.1, 0.3];
    let n = m.len();
    let split = |on_margin: Vec<usize>| {
        let violating = (0..n).filter(|&i| m[i] < 1.0 && !on_margin.contains(&i)).collect();
        (on_margin, violating)
    };
    let mut out: Vec<(Vec<usize>, Vec<usize>)> = BANDS
        .iter()
        .map(|&band| {
            let on_margin: Vec<usize> = (0..n).filter(|&i| (m[i] - 1.0).abs() <= band).collect();
            let violating = (0..n).filter(|&i| m[i] < 1.0 - band).collect();
            (on_margin, violating)
        })
        .collect();
    let mut by_distance: Vec<usize> = (0..n).collect();
    by_distance.sort_by(|&a, &b| (m[a] - 1.0).abs().total_cmp(&(m[b] - 1.0).abs()).then(a.cmp(&b)));
    for k in 1..=n.min(3) {
        let mut on_margin = by_distance[..k].to_vec();
        on_margin.sort_unstable();
        out.push(split(on_margin));
    }
    let least = |y: i8| (0..n).filter(|&i| labels[i] == y).min_by(|&a, &b| m[a].total_cmp(&m[b]).then(a.cmp(&b)));
    if let (Some(p), Some(q)) = (least(1), least(-1)) {
        out.push(split(vec![p.min(q), p.max(q)]));
    }
    out.retain(|(on_margin, _)| !on_margin.is_empty());
    out.dedup();
    out
}

/// Primal-dual active-set iteration from one starting partition: solve the
/// partition, move every point whose optimality condition fails to the set
/// its margin or multiplier points to, and repeat until certified. Falls
/// back to moving only the worst offender once a partition repeats.
fn pivot_to_optimum(
    points: &[[f64; 2]],
    labels: &[i8],
    c: f64,
    mut on_margin: Vec<usize>,
    mut violating: Vec<usize>,
) -> Option<([f64; 2], f64)> {
    let n = points.len();
    let tol = 1e-7;
    let mut seen: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    let mut single_moves = false;
    for _ in 0..(20 + 4 * n) {
        let (theta, mu) = solve_partition(points, labels, c, &on_margin, &violating)?;
        if certify(points, labels, c, theta, &on_margin, &violating, &mu) {
            return Some(theta);
        }
        seen.push((on_margin.clone(), violating.clone()));
        let m = margins(points, labels, theta);
        // (index, target set, size of the violation); target 0 = outside the
        // margin, 1 = on it, 2 = inside it
        let mut moves: Vec<(usize, u8, f64)> = Vec::new();
        for i in 0..n {
            if let Some(r) = on_margin.iter().position(|&j| j == i) {
                if mu[r] < -tol * c {
                    moves.push((i, 0, -mu[r] / c));
                } else if mu[r] > c * (1.0 + tol) {
                    moves.push((i, 2, mu[r] / c - 1.0));
                }
            } else if violating.contains(&i) {
                if m[i] > 1.0 + tol {
                    moves.push((i, 1, m[i] - 1.0));
                }
            } else if m[i] < 1.0 - tol {
                moves.push((i, 1, 1.0 - m[i]));
            }
        }
        if moves.is_empty() {
            return None;
        }
        if single_moves {
            let worst = moves
                .iter()
                .copied()
                .max_by(|a, b| a.2.total_cmp(&b.2).then(b.0.cmp(&a.0)))
                .expect("non-empty");
            moves = vec![worst];
        }
        for &(i, target, _) in &moves {
            on_margin.retain(|&j| j != i);
            violating.retain(|&j| j != i);
            match target {
                1 => on_margin.push(i),
                2 => violating.push(i),
                _ => {}
            }
        }
        on_margin.sort_unstable();
        violating.sort_unstable();
        if seen.iter().any(|(a, b)| *a == on_margin && *b == violating) {
            if single_moves {
                return None;
            }
            single_moves = true;
        }
    }
    None
}

/// Polishes an approximate solution to the exact optimum when a starting
/// partition read off it pivots to a certified one.
fn active_set_refine(points: &[[f64; 2]], labels: &[i8], c: f64, start: ([f64; 2], f64)) -> (([f64; 2], f64), bool) {
    let m = margins(points, labels, start);
    for (on_margin, violating) in candidate_partitions(&m, labels) {
        if let Some(theta) = pivot_to_optimum(points, labels, c, on_margin, violating) {
            return (theta, true);
        }
    }
    // the iterate was too far off to read the partition from; get it from
    // the dual instead
    let dual = dual_coordinate_solve(points, labels, c);
    let bound = |a: f64| a >= c * (1.0 - 1e-9);
    let on_margin: Vec<usize> = (0..points.len()).filter(|&i| dual.alpha[i] > 1e-12 * c && !bound(dual.alpha[i])).collect();
    let violating: Vec<usize> = (0..points.len()).filter(|&i| bound(dual.alpha[i])).collect();
    if !on_margin.is_empty() {
        if let Some(theta) = pivot_to_optimum(points, labels, c, on_margin, violating) {
            return (theta, true);
        }
    }
    let theta = (dual.weights, dual.bias);
    let primal = primal_objective(theta.0, theta.1, points, labels, c);
    let gap_ok = primal - dual.objective <= 1e-9 * primal.abs().max(1.0);
    let start_obj = primal_objective(start.0, start.1, points, labels, c);
    if gap_ok || primal < start_obj {
        (theta, gap_ok)
    } else {
        (start, false)
    }
}

struct DualSolution {
    alpha: Vec<f64>,
    weights: [f64; 2],
    bias: f64,
    /// Dual objective; a lower bound on the primal optimum.
    objective: f64,
}

/// Sequential minimal optimisation of the dual problem
/// `max Σα − ½ΣΣ αᵢαⱼyᵢyⱼ xᵢ·xⱼ`, `0 ≤ α ≤ C`, `Σ αy = 0`, with
/// second-order working-set selection.
fn dual_coordinate_solve(points: &[[f64; 2]], labels: &[i8], c: f64) -> DualSolution {
    const TAU: f64 = 1e-12;
    let n = points.len();
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let k = |i: usize, j: usize| points[i][0] * points[j][0] + points[i][1] * points[j][1];
    let q = |i: usize, j: usize| y[i] * y[j] * k(i, j);
    let qd: Vec<f64> = (0..n).map(|i| k(i, i)).collect();
    let scale = qd.iter().fold(1.0_f64, |a, &v| a.max(v));
    let eps = 1e-12 * scale.max(1.0) * c.max(1.0);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    for _ in 0..(1_000 * n.max(100)) {
        let up = |t: usize, a: &[f64]| if y[t] > 0.0 { a[t] < c } else { a[t] > 0.0 };
        let low = |t: usize, a: &[f64]| if y[t] > 0.0 { a[t] > 0.0 } else { a[t] < c };
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(t, &alpha) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(t, &alpha) {
                continue;
            }
            let yg = y[t] * grad[t];
            gmax2 = gmax2.max(yg);
            let diff = gmax + yg;
            if diff > 0.0 {
                let quad = qd[i] + qd[t] - 2.0 * k(i, t);
                let obj = -diff * diff / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if j == usize::MAX || gmax + gmax2 < eps {
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    let mut w = [0.0; 2];
    for t in 0..n {
        w[0] += alpha[t] * y[t] * points[t][0];
        w[1] += alpha[t] * y[t] * points[t][1];
    }
    // bias from the free multipliers, else the middle of the feasible range
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            free += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let r = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    let objective = alpha.iter().sum::<f64>() - 0.5 * (w[0] * w[0] + w[1] * w[1]);
    DualSolution {
        alpha,
        weights: w,
        bias: -r,
        objective,
    }
}

/// Replaces a trained boundary by a threshold on the axis that dominates it
/// over the data's range (`|βⱼ|·rangeⱼ`), placed to minimise training
/// misclassifications. Among equally good thresholds the one nearest the
/// original line's crossing at the mean of the other feature wins.
pub fn simplify_axis_parallel(boundary: &LinearBoundary, points: &[[f64; 2]], labels: &[i8]) -> Result<LinearBoundary> {
    if boundary.parallel_axis().is_some() {
        return Ok(boundary.clone());
    }
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points, {} labels",
            points.len(),
            labels.len()
        )));
    }
    if points.is_empty() {
        return Err(Error::InvalidConfig("simplification needs training points".into()));
    }
    let range = |j: usize| {
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])));
        hi - lo
    };
    let reach = [boundary.weights[0].abs() * range(0), boundary.weights[1].abs() * range(1)];
    let axis = if reach[1] > reach[0] { 1 } else { 0 };
    let other = 1 - axis;
    let sign = boundary.weights[axis].signum();

    let mean_other = points.iter().map(|p| p[other]).sum::<f64>() / points.len() as f64;
    let crossing = -(boundary.bias + boundary.weights[other] * mean_other) / boundary.weights[axis];

    let mut values: Vec<f64> = points.iter().map(|p| p[axis]).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut candidates: Vec<f64> = values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    candidates.push(values[0] - 1.0);
    candidates.push(values[values.len() - 1] + 1.0);

    let errors = |threshold: f64| {
        points
            .iter()
            .zip(labels)
            .filter(|(p, &y)| {
                let side = if sign * (p[axis] - threshold) >= 0.0 { 1 } else { -1 };
                side != y
            })
            .count()
    };
    let threshold = candidates
        .into_iter()
        .map(|t| (errors(t), (t - crossing).abs(), t))
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .map(|(_, _, t)| t)
        .expect("at least two candidates");

    let mut weights = [0.0; 2];
    weights[axis] = sign;
    let names = [boundary.feature_names[0].as_str(), boundary.feature_names[1].as_str()];
    LinearBoundary::new(names, weights, -sign * threshold, boundary.box_constraint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq28() -> LinearBoundary {
        LinearBoundary::new(["C3A", "WC"], [1.0, 1.241], -8.697, 100.0).unwrap()
    }

    fn eq30() -> LinearBoundary {
        LinearBoundary::new(["C3S", "WC"], [1.0, 387.3], -233.6, 100.0).unwrap()
    }

    #[test]
    fn classify_published_boundaries() {
        assert!((eq28().decision_value([10.0, 0.5]) - 1.9235).abs() < 1e-12);
        assert_eq!(classify(&eq28(), [10.0, 0.5]), 1);
        assert!((eq30().decision_value([50.0, 0.481]) - 2.6913).abs() < 1e-10);
        assert_eq!(classify(&eq30(), [50.0, 0.481]), 1);
        assert!((eq30().decision_value([55.0, 0.45]) + 4.315).abs() < 1e-10);
        assert_eq!(classify(&eq30(), [55.0, 0.45]), -1);
    }

    #[test]
    fn zero_maps_to_positive() {
        let b = LinearBoundary::new(["a", "b"], [1.0, 0.0], -2.0, 1.0).unwrap();
        assert_eq!(classify(&b, [2.0, 7.0]), 1);
    }

    #[test]
    fn zero_weights_rejected() {
        assert!(matches!(
            LinearBoundary::new(["a", "b"], [0.0, 0.0], 1.0, 1.0),
            Err(Error::DegenerateBoundary)
        ));
    }

    #[test]
    fn equation_rendering() {
        assert_eq!(eq28().equation(), "C3A + 1.241*WC - 8.697 = 0");
        assert_eq!(eq30().equation(), "C3S + 387.3*WC - 233.6 = 0");
    }

    #[test]
    fn two_point_max_margin() {
        let fit = svm_train(&[[-1.0, 0.0], [1.0, 0.0]], &[-1, 1], 1e4, 0).unwrap();
        assert!(fit.certified);
        assert!((fit.boundary.weights[0] - 1.0).abs() < 1e-9);
        assert!(fit.boundary.weights[1].abs() < 1e-9);
        assert!(fit.boundary.bias.abs() < 1e-9);
        assert!(fit.slacks.iter().all(|s| *s <= 1e-9));
    }

    #[test]
    fn separable_line_at_zero() {
        let pts = [[-3.0, 0.0], [-1.5, 0.0], [-1.0, 0.0], [1.0, 0.0], [2.0, 0.0], [4.0, 0.0]];
        let fit = svm_train(&pts, &[-1, -1, -1, 1, 1, 1], 1e3, 4).unwrap();
        let crossing = -fit.boundary.bias / fit.boundary.weights[0];
        assert!(crossing.abs() < 1e-3);
        assert!((fit.boundary.weights[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn perturbed_xor_needs_slack() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.2]];
        let fit = svm_train(&pts, &[1, 1, -1, -1], 100.0, 1).unwrap();
        assert!(fit.slacks.iter().any(|s| *s > 0.0));
        assert!(fit.certified);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(svm_train(&[[0.0, 0.0], [1.0, 0.0]], &[1, 1], 1.0, 0), Err(Error::SingleClass)));
        assert!(svm_train(&[[0.0, 0.0], [1.0, 0.0]], &[1, -1], 0.0, 0).is_err());
        assert!(matches!(svm_train(&[[0.0, 0.0], [1.0, 0.0]], &[1, 2], 1.0, 0), Err(Error::InvalidLabel(2))));
    }

    #[test]
    fn conflicting_duplicates_force_slack() {
        let pts = [[0.0, 0.0], [0.0, 0.0], [2.0, 0.0], [-2.0, 0.0]];
        let fit = svm_train(&pts, &[1, -1, 1, -1], 10.0, 0).unwrap();
        assert!(fit.slacks[0] + fit.slacks[1] >= 1.0 - 1e-9);
    }

    #[test]
    fn standardized_training_maps_back() {
        let pts = [[10.0, 0.40], [12.0, 0.45], [30.0, 0.60], [33.0, 0.62]];
        let cfg = SvmConfig {
            box_constraint: 10.0,
            standardize: true,
            ..SvmConfig::default()
        };
        let fit = svm_train_with(&pts, &[-1, -1, 1, 1], ["C3S", "WC"], &cfg).unwrap();
        for (p, y) in pts.iter().zip([-1, -1, 1, 1]) {
            assert_eq!(classify(&fit.boundary, *p), y);
        }
    }

    #[test]
    fn simplify_keeps_axis_parallel() {
        let b = LinearBoundary::new(["a", "b"], [0.0, 2.0], -1.0, 1.0).unwrap();
        assert_eq!(simplify_axis_parallel(&b, &[[0.0, 0.0]], &[1]).unwrap(), b);
    }

    #[test]
    fn simplify_clean_gap() {
        let pts = [[1.0, 0.3], [2.0, 0.9], [2.5, 0.5], [3.5, 0.4], [4.0, 0.8], [5.0, 0.2]];
        let labels = [-1, -1, -1, 1, 1, 1];
        let b = LinearBoundary::new(["x", "y"], [1.0, 0.2], -3.1, 1.0).unwrap();
        let s = simplify_axis_parallel(&b, &pts, &labels).unwrap();
        assert_eq!(s.weights, [1.0, 0.0]);
        assert!((-s.bias - 3.0).abs() < 1e-12);
    }

    #[test]
    fn simplify_published_first_boundary_near_eight() {
        // mixtures labelled by the published first boundary over typical ranges
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..=28 {
            let c3a = 1.0 + 0.5 * i as f64;
            for wc in [0.35, 0.45, 0.55, 0.65] {
                pts.push([c3a, wc]);
                labels.push(classify(&eq28(), [c3a, wc]));
            }
        }
        let s = simplify_axis_parallel(&eq28(), &pts, &labels).unwrap();
        assert_eq!(s.weights, [1.0, 0.0]);
        assert!((-s.bias - 8.0).abs() <= 0.5, "threshold {}", -s.bias);
    }
}
