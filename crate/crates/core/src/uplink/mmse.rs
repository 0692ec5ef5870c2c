use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

/// Linear MMSE decoders for one band: column `l` is
/// `(Σ_i p_i ḡ_i ḡ_iᴴ + σ² I)⁻¹ √p_l ḡ_l`.
pub fn mmse_decoder(g_bar: &[CVec], powers: &[f64], sigma2: f64) -> Result<CMat> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain("noise variance must be positive".into()));
    }
    if g_bar.len() != powers.len() {
        return Err(Error::Contract(format!("{} channels for {} powers", g_bar.len(), powers.len())));
    }
    let Some(m) = g_bar.first().map(|g| g.len()) else {
        return Ok(CMat::zeros(0, 0));
    };
    if g_bar.iter().any(|g| g.len() != m) {
        return Err(Error::Contract("uplink channels differ in length".into()));
    }
    let mut cov = CMat::identity(m, m) * C64::new(sigma2, 0.0);
    for (g, &p) in g_bar.iter().zip(powers) {
        if p > 0.0 {
            cov += (g * g.adjoint()) * C64::new(p, 0.0);
        }
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Domain("receive covariance is not positive definite".into()))?;
    let mut rhs = CMat::zeros(m, g_bar.len());
    for (l, (g, &p)) in g_bar.iter().zip(powers).enumerate() {
        if p > 0.0 {
            rhs.set_column(l, &(g * C64::new(p.sqrt(), 0.0)));
        }
    }
    Ok(chol.solve(&rhs))
}
