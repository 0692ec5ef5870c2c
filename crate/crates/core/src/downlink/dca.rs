use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, hermitian_eigen, CMat, CVec, C64};
use crate::linkmetrics::{cross_gains, LinkState, UplinkDecision};
use crate::scenario::{Band, SystemConfig};

/// Weighted-MSE surrogate in the energy beams,
/// `f(W) = Σ_i c_i ‖h̄_i W‖² − Σ_l b_l ‖h̄_l W‖` (constants dropped).
#[derive(Debug, Clone, PartialEq)]
pub struct DcaProblem {
    pub h_bar: Vec<CVec>,
    pub quad: Vec<f64>,
    pub lin: Vec<f64>,
    pub p_max: f64,
}

impl DcaProblem {
    /// Builds the surrogate from the current link state, MSE weights
    /// `gamma_mse[band][l]`, and the time split.
    pub fn from_state(
        cfg: &SystemConfig,
        link: &LinkState,
        ul: &UplinkDecision,
        gamma_mse: &[Vec<f64>; 2],
        beta: f64,
    ) -> Self {
        let l = link.energy.len();
        let mut quad = vec![0.0; l];
        let mut lin = vec![0.0; l];
        for band in Band::ALL {
            let k = band.index();
            let g_bar = &link.eff.g_bar[k];
            let f = &ul.f[k];
            let q = cross_gains(g_bar, f);
            let gbar: Vec<f64> = (0..l)
                .map(|i| {
                    let share = match band {
                        Band::Sub6 => ul.gamma[i],
                        Band::MmWave => 1.0 - ul.gamma[i],
                    };
                    share * cfg.xi * beta / (1.0 - beta)
                })
                .collect();
            for dec in 0..l {
                let weight = gamma_mse[k][dec];
                for (i, qi) in q[dec].iter().enumerate() {
                    quad[i] += weight * gbar[i] * qi;
                }
                let q_ll = f.column(dec).dotc(&g_bar[dec]);
                lin[dec] += 2.0 * weight * q_ll.re * gbar[dec].sqrt();
            }
        }
        Self { h_bar: link.eff.h_bar.clone(), quad, lin, p_max: cfg.p_max }
    }

    pub fn objective(&self, w: &CMat) -> f64 {
        self.h_bar
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let e = w.tr_mul(h).norm_squared();
                self.quad[i] * e - self.lin[i] * e.sqrt()
            })
            .sum()
    }
}

/// Minimizer of `Tr(WᴴQW) − 2 Re Tr(VᴴW)` over `‖W‖_F² ≤ p_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallQpSolution {
    pub w: CMat,
    /// Multiplier of the power constraint.
    pub nu: f64,
    /// `‖(Q + νI)W − V‖_F`.
    pub residual: f64,
}

/// Closed-form solve via the eigenbasis of `Q` and bisection on `ν`.
pub fn solve_ball_qp(q: &CMat, v: &CMat, p_max: f64) -> BallQpSolution {
    let n = q.nrows();
    let (vals, u) = hermitian_eigen(q);
    let vt = u.adjoint() * v;
    let row_sq: Vec<f64> = (0..n).map(|i| vt.row(i).norm_squared()).collect();
    let v_norm = row_sq.iter().sum::<f64>().sqrt();
    let lam_max = vals.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    let tiny_eig = 1e-14 * lam_max.max(f64::MIN_POSITIVE);
    let tiny_row = 1e-24 * v_norm * v_norm;

    let norm_sq = |nu: f64| -> f64 {
        (0..n)
            .map(|i| {
                let den = vals[i].max(0.0) + nu;
                if row_sq[i] <= tiny_row {
                    0.0
                } else if den <= tiny_eig {
                    f64::INFINITY
                } else {
                    row_sq[i] / (den * den)
                }
            })
            .sum()
    };

    let nu = if v_norm == 0.0 || norm_sq(0.0) <= p_max {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, v_norm / p_max.sqrt());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if norm_sq(mid) > p_max {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };

    let mut scaled = vt;
    for i in 0..n {
        let den = vals[i].max(0.0) + nu;
        let s = if row_sq[i] <= tiny_row || den <= tiny_eig { 0.0 } else { 1.0 / den };
        scaled.row_mut(i).scale_mut(s);
    }
    let mut w = &u * scaled;
    // Guard the boundary against rounding.
    let fw = frobenius_sq(&w);
    if fw > p_max {
        w *= C64::new((p_max / fw).sqrt(), 0.0);
    }
    let mut lhs = q * &w;
    lhs += &w * C64::new(nu, 0.0);
    let residual = (lhs - v).norm();
    BallQpSolution { w, nu, residual }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcaOutcome {
    pub w: CMat,
    /// Surrogate value at the start and after each iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Difference-of-convex iteration for the energy beams: linearize the
/// concave part at `W^t`, solve the convex ball-constrained quadratic, and
/// stop on a small relative step or the iteration cap.
pub fn dca_energy_beams(problem: &DcaProblem, w0: &CMat, eps_dca: f64, t_dca_max: usize) -> Result<DcaOutcome> {
    let m = w0.nrows();
    if w0.ncols() != m || problem.h_bar.iter().any(|h| h.len() != m) {
        return Err(Error::Contract("beam matrix and channels disagree in size".into()));
    }
    if problem.quad.iter().any(|&c| !(c >= 0.0)) {
        return Err(Error::Domain("quadratic weights must be non-negative".into()));
    }
    let mut w = w0.clone();
    let start = frobenius_sq(&w);
    if start > problem.p_max {
        w *= C64::new((problem.p_max / start).sqrt(), 0.0);
    }

    let mut base_q = CMat::zeros(m, m);
    for (h, &c) in problem.h_bar.iter().zip(&problem.quad) {
        base_q += (h.conjugate() * h.transpose()) * C64::new(c, 0.0);
    }

    let mut trace = vec![problem.objective(&w)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < t_dca_max {
        let mut q = base_q.clone();
        let mut v = CMat::zeros(m, m);
        // Directions conj(h̄) of nulled convex terms; W stays orthogonal to them.
        let mut nulled: Vec<CVec> = Vec::new();
        let w_norm = frobenius_sq(&w).sqrt();
        for (h, &b) in problem.h_bar.iter().zip(&problem.lin) {
            let y = w.tr_mul(h);
            let norm = y.norm();
            if b == 0.0 {
                continue;
            }
            if norm <= 1e-9 * h.norm() * w_norm {
                if b < 0.0 && h.norm() > 0.0 {
                    // The majorizer degenerates to the constraint h̄W = 0.
                    let mut d = h.conjugate();
                    for e in &nulled {
                        let proj = e.dotc(&d);
                        d -= e * proj;
                    }
                    let dn = d.norm();
                    if dn > 1e-12 * h.norm() {
                        nulled.push(d / C64::new(dn, 0.0));
                    }
                }
                continue;
            }
            // h̄ᴴ h̄ W / ‖h̄ W‖ as an outer product h̄* (h̄W)ᵀ.
            let grad = h.conjugate() * y.transpose() / C64::new(norm, 0.0);
            if b > 0.0 {
                v += grad * C64::new(b / 2.0, 0.0);
            } else {
                // A negative weight makes the term convex; majorize it by a
                // quadratic that touches at the current iterate.
                q += (h.conjugate() * h.transpose()) * C64::new(-b / (2.0 * norm), 0.0);
            }
        }
        if !nulled.is_empty() {
            let mut p = CMat::identity(m, m);
            for e in &nulled {
                p -= e * e.adjoint();
            }
            q = &p * q * &p;
            v = &p * v;
        }
        let sol = solve_ball_qp(&q, &v, problem.p_max);
        let value = problem.objective(&sol.w);
        let prev = *trace.last().expect("trace starts non-empty");
        iterations += 1;
        if value > prev {
            // Only rounding can make the majorizer step ascend; keep W^t.
            trace.push(prev);
            converged = true;
            break;
        }
        let step = frobenius_sq(&(&sol.w - &w));
        let denom = frobenius_sq(&w);
        w = sol.w;
        trace.push(value);
        if denom == 0.0 {
            if step == 0.0 {
                converged = true;
                break;
            }
        } else if step / denom <= eps_dca {
            converged = true;
            break;
        }
    }
    Ok(DcaOutcome { w, trace, iterations, converged })
}
