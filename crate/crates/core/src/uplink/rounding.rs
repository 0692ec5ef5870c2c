use rand::Rng;
use rand_distr::StandardNormal;

use super::sdp::SdrSolution;
use super::sdr::SdrProblem;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, wrap_phase, CMat, CVec, C64};

/// Orthogonal projector onto the phase vectors that null every leakage
/// path, `aᵀ φ = 0`.
#[derive(Debug, Clone)]
pub struct CovertProjector {
    rows: Vec<CVec>,
    scales: Vec<f64>,
    /// Orthonormal basis of `span{conj(a_j)}`.
    basis: Vec<CVec>,
    n: usize,
}

impl CovertProjector {
    pub fn new(rows: &[CVec]) -> Self {
        let n = rows.first().map_or(0, |r| r.len());
        let mut basis: Vec<CVec> = Vec::new();
        for a in rows {
            let mut v = a.conjugate();
            let norm0 = v.norm();
            if norm0 == 0.0 {
                continue;
            }
            // Two Gram–Schmidt sweeps keep the basis orthonormal.
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dotc(&v);
                    v -= q * c;
                }
            }
            let nv = v.norm();
            if nv > 1e-10 * norm0 {
                basis.push(v / C64::new(nv, 0.0));
            }
        }
        let scales = rows.iter().map(|a| a.norm_squared() / n as f64).collect();
        Self { rows: rows.to_vec(), scales, basis, n }
    }

    pub fn from_problem(problem: &SdrProblem) -> Self {
        Self::new(&problem.covert_rows)
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Largest `N |aᵀφ|² / ‖a‖²`, the leaked power in units of one
    /// element's mean contribution.
    pub fn ratio(&self, phi: &CVec) -> f64 {
        self.rows
            .iter()
            .zip(&self.scales)
            .filter(|(_, &s)| s > 0.0)
            .map(|(a, &s)| a.iter().zip(phi.iter()).map(|(x, y)| x * y).sum::<C64>().norm_sqr() / s)
            .fold(0.0, f64::max)
    }

    /// Alternating projection between the null space of the leakage rows
    /// and the unit-modulus set. Returns the unit-modulus iterate with the
    /// smallest ratio seen.
    pub fn restore(&self, phi: &CVec, eps_leak: f64, max_iter: usize) -> CVec {
        let mut best = phi.clone();
        let mut best_ratio = self.ratio(phi);
        if self.basis.is_empty() || self.basis.len() >= self.n || best_ratio <= eps_leak {
            return best;
        }
        let mut cur = phi.clone();
        for _ in 0..max_iter {
            let mut p = cur.clone();
            for q in &self.basis {
                let c = q.dotc(&p);
                p -= q * c;
            }
            for (x, old) in p.iter_mut().zip(cur.iter()) {
                let r = x.norm();
                *x = if r > 1e-12 { *x / r } else { *old };
            }
            cur = p;
            let r = self.ratio(&cur);
            if r < best_ratio {
                best_ratio = r;
                best = cur.clone();
                if r <= eps_leak {
                    break;
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingOutcome {
    pub theta2: Vec<f64>,
    pub objective: f64,
    /// False when every candidate lost to the incumbent.
    pub improved: bool,
    pub covert_ratio: f64,
    pub candidates: usize,
}

/// Maps a lifted vector to phases: `arg(ξ_n / ξ_{N+1})` for `n ≤ N`.
pub fn normalize_lifted(xi: &CVec) -> Vec<f64> {
    let n = xi.len() - 1;
    let anchor = xi[n];
    let rot = if anchor.norm() > 0.0 { anchor.conj() / anchor.norm() } else { C64::new(1.0, 0.0) };
    (0..n)
        .map(|i| {
            let z = xi[i] * rot;
            if z.norm() > 0.0 {
                wrap_phase(z.arg())
            } else {
                0.0
            }
        })
        .collect()
}

/// Gaussian randomization around the relaxed solution. Candidates are the
/// principal eigenvector and `n_rand` draws `U Σ^{1/2} r`, each mapped to
/// unit modulus, pulled back into the leakage budget, and scored by
/// `evaluate` (lower is better). The incumbent is kept unless a candidate
/// that leaks no more than it does scores strictly lower.
#[allow(clippy::too_many_arguments)]
pub fn recover_phases<R: Rng + ?Sized>(
    solution: &SdrSolution,
    projector: &CovertProjector,
    n_rand: usize,
    rng: &mut R,
    incumbent: &[f64],
    eps_leak: f64,
    mut evaluate: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<RoundingOutcome> {
    let n = incumbent.len();
    if solution.omega.shape() != (n + 1, n + 1) {
        return Err(Error::Contract(format!("relaxed matrix does not match {n} phases")));
    }
    if n_rand == 0 {
        return Err(Error::Domain("at least one randomization sample is needed".into()));
    }
    let inc_phi = CVec::from_iterator(n, incumbent.iter().map(|&t| C64::from_polar(1.0, t)));
    let inc_ratio = projector.ratio(&inc_phi);
    let inc_obj = evaluate(incumbent)?;
    let budget = eps_leak.max(inc_ratio) * (1.0 + 1e-9) + 1e-15;

    let (vals, u) = hermitian_eigen(&solution.omega);
    let mut factor: CMat = u.clone();
    for (j, &l) in vals.iter().enumerate() {
        factor.column_mut(j).scale_mut(l.max(0.0).sqrt());
    }
    let principal = u.column(n).into_owned();

    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut consider = |xi: &CVec, best: &mut Option<(Vec<f64>, f64, f64)>| -> Result<()> {
        let theta = normalize_lifted(xi);
        let mut phi = CVec::from_iterator(n, theta.iter().map(|&t| C64::from_polar(1.0, t)));
        if !projector.is_empty() && projector.ratio(&phi) > eps_leak {
            phi = projector.restore(&phi, eps_leak, 50);
        }
        let ratio = projector.ratio(&phi);
        if ratio > budget {
            return Ok(());
        }
        let theta: Vec<f64> = phi.iter().map(|z| wrap_phase(z.arg())).collect();
        let obj = evaluate(&theta)?;
        if obj.is_finite() && best.as_ref().is_none_or(|b| obj < b.1) {
            *best = Some((theta, obj, ratio));
        }
        Ok(())
    };
    consider(&principal, &mut best)?;
    for _ in 0..n_rand {
        let r = CVec::from_fn(n + 1, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        });
        consider(&(&factor * r), &mut best)?;
    }
    match best {
        Some((theta2, objective, covert_ratio)) if objective < inc_obj => Ok(RoundingOutcome {
            theta2,
            objective,
            improved: true,
            covert_ratio,
            candidates: n_rand + 1,
        }),
        _ => Ok(RoundingOutcome {
            theta2: incumbent.to_vec(),
            objective: inc_obj,
            improved: false,
            covert_ratio: inc_ratio,
            candidates: n_rand + 1,
        }),
    }
}
