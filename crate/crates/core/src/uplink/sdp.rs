use nalgebra::{DMatrix, DVector};

use super::sdr::SdrProblem;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitize, inner_real, min_eigenvalue, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `max(0, −λ_min(Ω))`.
    pub psd_violation: f64,
    /// `max_n |Ω_nn − 1|`.
    pub diag_violation: f64,
    /// Largest excess of `Tr(Δ̃ Ω)` over the leakage budget.
    pub eq_violation: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.psd_violation.max(self.diag_violation).max(self.eq_violation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdrSolution {
    pub omega: CMat,
    /// `Tr(Λ Ω)`.
    pub objective: f64,
    /// Dual value certified by the final multipliers (same scale).
    pub dual_objective: f64,
    pub kkt_residuals: KktResiduals,
    pub iterations: usize,
    pub converged: bool,
}

/// Constraints whose matrix alone already exceeds the budget for every
/// unit-diagonal PSD `Ω`. Diagonal matrices are checked exactly, others
/// through `λ_min(Δ̃) · Tr(Ω)`.
pub fn infeasible_constraints(problem: &SdrProblem, eps_leak: f64) -> Vec<usize> {
    let n = problem.n2 + 1;
    problem
        .constraint_mats
        .iter()
        .enumerate()
        .filter(|(_, a)| {
            let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if scale == 0.0 {
                return false;
            }
            let off = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)].norm())
                .fold(0.0, f64::max);
            if off <= 1e-14 * scale {
                a.diagonal().iter().map(|z| z.re).sum::<f64>() > eps_leak
            } else {
                min_eigenvalue(a) * n as f64 > eps_leak
            }
        })
        .map(|(j, _)| j)
        .collect()
}

/// Solves `min Tr(ΛΩ)` s.t. `diag(Ω) = 1`, `Ω ⪰ 0`, `Tr(Δ̃_j Ω) ≤ eps_leak`
/// with a dual alternating-direction method. Inequalities carry explicit
/// non-negative slacks so that every constraint is an equality on the
/// block variable `(Ω, s)`.
pub fn solve_sdp(
    problem: &SdrProblem,
    eps_sdp: f64,
    eps_leak: f64,
    max_iter: usize,
    warm: Option<&CMat>,
) -> Result<SdrSolution> {
    let n = problem.n2 + 1;
    if problem.lambda.shape() != (n, n) || problem.constraint_mats.iter().any(|a| a.shape() != (n, n)) {
        return Err(Error::Contract("lifted matrices must be (N2 + 1) square".into()));
    }
    if !(eps_sdp > 0.0 && eps_leak >= 0.0) {
        return Err(Error::Domain("tolerances must be positive".into()));
    }
    let bad = infeasible_constraints(problem, eps_leak);
    if !bad.is_empty() {
        return Err(Error::Infeasible(format!(
            "{} of {} covert constraints cannot meet the leakage budget {eps_leak} with a unit diagonal",
            bad.len(),
            problem.constraint_mats.len()
        )));
    }
    let mats: Vec<&CMat> = problem.constraint_mats.iter().filter(|a| a.iter().any(|z| z.norm() > 0.0)).collect();
    let m = mats.len();
    let scale = problem.lambda.norm();
    let c = if scale > 0.0 { &problem.lambda / C64::new(scale, 0.0) } else { problem.lambda.clone() };

    // Gram matrix of the constraint operator on (Ω, s).
    let dim = n + m;
    let mut gram = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        gram[(i, i)] = 1.0;
    }
    for (j, a) in mats.iter().enumerate() {
        for i in 0..n {
            gram[(i, n + j)] = a[(i, i)].re;
            gram[(n + j, i)] = a[(i, i)].re;
        }
        for (k, b) in mats.iter().enumerate().skip(j) {
            let v = inner_real(a, b) + if j == k { 1.0 } else { 0.0 };
            gram[(n + j, n + k)] = v;
            gram[(n + k, n + j)] = v;
        }
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Domain("constraint Gram matrix is singular".into()))?;
    let b = DVector::from_fn(dim, |i, _| if i < n { 1.0 } else { eps_leak });
    let b_norm = b.norm();

    let apply = |x: &CMat, s: &[f64]| -> DVector<f64> {
        DVector::from_fn(dim, |i, _| if i < n { x[(i, i)].re } else { inner_real(mats[i - n], x) + s[i - n] })
    };

    let mut x = match warm {
        Some(w) if w.shape() == (n, n) => w.clone(),
        _ => CMat::identity(n, n),
    };
    let mut s = vec![0.0; m];
    let mut z = CMat::zeros(n, n);
    let mut z_s = vec![0.0; m];
    let mut y = DVector::<f64>::zeros(dim);
    let mut mu = 1.0 / n as f64;
    let (mut primal, mut dual, mut gap) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let cz = &c - &z;
        let neg_zs: Vec<f64> = z_s.iter().map(|v| -v).collect();
        let rhs = (&b - apply(&x, &s)) * mu + apply(&cz, &neg_zs);
        y = chol.solve(&rhs);

        let mut v = c.clone();
        for i in 0..n {
            v[(i, i)] -= C64::new(y[i], 0.0);
        }
        for (j, a) in mats.iter().enumerate() {
            v -= *a * C64::new(y[n + j], 0.0);
        }
        v -= &x * C64::new(mu, 0.0);
        hermitize(&mut v);
        let (vals, u) = hermitian_eigen(&v);
        let pos = reassemble(&u, &vals, |l| l.max(0.0));
        let x_new = reassemble(&u, &vals, |l| (-l).max(0.0) / mu);
        let vs: Vec<f64> = (0..m).map(|j| -y[n + j] - mu * s[j]).collect();
        let s_new: Vec<f64> = vs.iter().map(|v| (-v).max(0.0) / mu).collect();
        z_s = vs.iter().map(|v| v.max(0.0)).collect();
        z = pos;

        let step = ((&x_new - &x).norm_squared() + s_new.iter().zip(&s).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sqrt();
        x = x_new;
        s = s_new;
        dual = mu * step / (1.0 + c.norm());
        primal = (apply(&x, &s) - &b).norm() / (1.0 + b_norm);
        let pobj = inner_real(&c, &x);
        let dobj = b.dot(&y);
        gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if primal.max(dual).max(gap) <= 0.1 * eps_sdp {
            converged = true;
            break;
        }
        if iterations % 10 == 0 {
            if primal > 5.0 * dual {
                mu = (mu * 1.6).min(1e8);
            } else if dual > 5.0 * primal {
                mu = (mu / 1.6).max(1e-8);
            }
        }
    }
    let _ = (primal, dual, gap);

    // Rescale to an exactly unit diagonal; congruence keeps Ω PSD.
    let d: Vec<f64> = (0..n).map(|i| x[(i, i)].re).collect();
    let mut omega = CMat::from_fn(n, n, |i, j| {
        let (di, dj) = (d[i], d[j]);
        if di > 0.0 && dj > 0.0 {
            x[(i, j)] / (di * dj).sqrt()
        } else if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    hermitize(&mut omega);
    let kkt = KktResiduals {
        psd_violation: (-min_eigenvalue(&omega)).max(0.0),
        diag_violation: (0..n).map(|i| (omega[(i, i)].re - 1.0).abs()).fold(0.0, f64::max),
        eq_violation: mats.iter().map(|a| (inner_real(a, &omega) - eps_leak).max(0.0)).fold(0.0, f64::max),
    };
    Ok(SdrSolution {
        objective: inner_real(&problem.lambda, &omega),
        dual_objective: b.dot(&y) * scale,
        omega,
        kkt_residuals: kkt,
        iterations,
        converged,
    })
}

fn reassemble(u: &CMat, vals: &[f64], f: impl Fn(f64) -> f64) -> CMat {
    let mut scaled = u.clone();
    for (j, &l) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(f(l));
    }
    scaled * u.adjoint()
}
