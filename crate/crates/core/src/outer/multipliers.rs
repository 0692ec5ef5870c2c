use crate::error::{Error, Result};

/// Multipliers of the parametric (sum-of-ratios) form.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMultipliers {
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    /// MSE weights `Γ[band][l]`.
    pub gamma_mse: [Vec<f64>; 2],
}

/// Sub-6 volume `v C_s / (C_s + C_m)` and the matching share `α`, which
/// equalizes the two band latencies.
pub fn optimal_volume_split(volume: f64, cap_s: f64, cap_m: f64) -> Result<(f64, f64)> {
    let total = cap_s + cap_m;
    if !(total > 0.0) || cap_s < 0.0 || cap_m < 0.0 {
        return Err(Error::Infeasible(format!("no capacity to carry the task (C_s = {cap_s}, C_m = {cap_m})")));
    }
    let alpha = cap_s / total;
    Ok((volume * alpha, alpha))
}

fn totals(cap_s: &[f64], cap_m: &[f64]) -> Result<Vec<f64>> {
    if cap_s.len() != cap_m.len() {
        return Err(Error::Contract("capacity vectors differ in length".into()));
    }
    cap_s
        .iter()
        .zip(cap_m)
        .enumerate()
        .map(|(l, (s, m))| {
            let c = s + m;
            if c > 0.0 {
                Ok(c)
            } else {
                Err(Error::Infeasible(format!("IoTD {l} has zero total capacity")))
            }
        })
        .collect()
}

/// `λ_l = 1 / (C_s + C_m)` and `η_l = ϖ_l v_l / (C_s + C_m)`.
pub fn init_multipliers(cap_s: &[f64], cap_m: &[f64], weights: &[f64], volumes: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = totals(cap_s, cap_m)?;
    if weights.len() != c.len() || volumes.len() != c.len() {
        return Err(Error::Contract("task vectors do not match the capacities".into()));
    }
    let lambda = c.iter().map(|c| 1.0 / c).collect();
    let eta = c.iter().zip(weights.iter().zip(volumes)).map(|(c, (w, v))| w * v / c).collect();
    Ok((lambda, eta))
}

/// `Γ_F,l = λ_l η_l B_F / e_F,l`.
pub fn mse_weights(lambda: &[f64], eta: &[f64], bandwidths: [f64; 2], mse: &[Vec<f64>; 2]) -> Result<[Vec<f64>; 2]> {
    let l = lambda.len();
    if eta.len() != l || mse.iter().any(|e| e.len() != l) {
        return Err(Error::Contract("multiplier and MSE vectors differ in length".into()));
    }
    let mut out = [vec![0.0; l], vec![0.0; l]];
    for k in 0..2 {
        for i in 0..l {
            let e = mse[k][i];
            if !(e > 0.0) {
                return Err(Error::Domain(format!("mean squared error of IoTD {i} must be positive, got {e}")));
            }
            out[k][i] = lambda[i] * eta[i] * bandwidths[k] / e;
        }
    }
    Ok(out)
}

/// `ψ = [η_l C_l − ϖ_l v_l ; λ_l C_l − 1]`, stacked over IoTDs.
pub fn psi(lambda: &[f64], eta: &[f64], cap_total: &[f64], weights: &[f64], volumes: &[f64]) -> Vec<f64> {
    let l = lambda.len();
    let mut out = Vec::with_capacity(2 * l);
    out.extend((0..l).map(|i| eta[i] * cap_total[i] - weights[i] * volumes[i]));
    out.extend((0..l).map(|i| lambda[i] * cap_total[i] - 1.0));
    out
}

/// `ψ` with the first half divided by `ϖ_l v_l`, so both halves are
/// dimensionless and the stopping tolerance means the same thing for any
/// task size.
pub fn normalized_psi(lambda: &[f64], eta: &[f64], cap_total: &[f64], weights: &[f64], volumes: &[f64]) -> Vec<f64> {
    let l = lambda.len();
    let mut out = psi(lambda, eta, cap_total, weights, volumes);
    for i in 0..l {
        out[i] /= weights[i] * volumes[i];
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStep {
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    /// Backtracking exponent `i` of the accepted step.
    pub exponent: u32,
    /// The sufficient-decrease test failed up to the cap; input returned.
    pub stagnated: bool,
}

/// One damped Newton step on `ψ(μ) = 0` with capacities fixed. Each
/// residual row is paired with the variable it depends on (`η` for the
/// volume rows, `λ` for the unit rows), which makes the Jacobian diagonal
/// with entries `C_s,l + C_m,l`.
#[allow(clippy::too_many_arguments)]
pub fn newton_update_multipliers(
    lambda: &[f64],
    eta: &[f64],
    cap_s: &[f64],
    cap_m: &[f64],
    weights: &[f64],
    volumes: &[f64],
    delta: f64,
    epsilon: f64,
) -> Result<NewtonStep> {
    let c = totals(cap_s, cap_m)?;
    let l = c.len();
    if lambda.len() != l || eta.len() != l || weights.len() != l || volumes.len() != l {
        return Err(Error::Contract("multiplier inputs differ in length".into()));
    }
    if !(delta > 0.0 && delta < 1.0 && epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain("step parameters must lie in (0, 1)".into()));
    }
    if lambda.iter().chain(eta).any(|&x| !(x > 0.0)) {
        return Err(Error::Domain("multipliers must be positive".into()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r0 = psi(lambda, eta, &c, weights, volumes);
    let n0 = norm(&r0);
    if n0 == 0.0 {
        return Ok(NewtonStep { lambda: lambda.to_vec(), eta: eta.to_vec(), exponent: 0, stagnated: false });
    }
    const CAP: u32 = 50;
    for i in 0..=CAP {
        let step = delta.powi(i as i32);
        let new_eta: Vec<f64> = (0..l).map(|j| eta[j] - step * r0[j] / c[j]).collect();
        let new_lambda: Vec<f64> = (0..l).map(|j| lambda[j] - step * r0[l + j] / c[j]).collect();
        let n1 = norm(&psi(&new_lambda, &new_eta, &c, weights, volumes));
        if n1 <= (1.0 - epsilon * step) * n0 {
            return Ok(NewtonStep { lambda: new_lambda, eta: new_eta, exponent: i, stagnated: false });
        }
    }
    Ok(NewtonStep { lambda: lambda.to_vec(), eta: eta.to_vec(), exponent: CAP, stagnated: true })
}
