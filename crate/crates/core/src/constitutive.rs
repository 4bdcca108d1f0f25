//! Material closures: hindered settling, effective solid stress, mixture
//! viscosity, MLB settling velocities, batch fluxes and the compression matrix.

use crate::error::{Error, Result};
use crate::geometry::{mixture_fields, PhysicalParams};

const VISCOSITY_PHI_LIMIT: f64 = 0.95;

/// (1 − φ/φ_max)^4.7, with φ clamped into [0, φ_max].
pub fn hindered_settling(phi: f64, params: &PhysicalParams) -> f64 {
    let phi = phi.clamp(0.0, params.phi_max);
    (1.0 - phi / params.phi_max).powf(4.7)
}

/// Effective solid stress and its derivative, (σ_e(φ), σ_e′(φ)).
pub fn effective_stress(phi: f64, params: &PhysicalParams) -> (f64, f64) {
    let phi = phi.clamp(0.0, params.phi_max);
    if phi < params.phi_c {
        return (0.0, 0.0);
    }
    let ratio = phi / params.phi_c;
    let r4 = ratio.powi(4);
    let value = params.sigma_0 * (r4 * ratio - 1.0);
    let slope = 5.0 * params.sigma_0 * r4 / params.phi_c;
    (value, slope)
}

/// μ₀(1 − φ/0.95)^(−2.5).
pub fn mixture_viscosity(phi: f64, params: &PhysicalParams) -> Result<f64> {
    if !(phi < VISCOSITY_PHI_LIMIT) {
        return Err(Error::OutOfRange(format!(
            "viscosity undefined at volume fraction {phi}"
        )));
    }
    let phi = phi.max(0.0);
    Ok(params.mu_0 * (1.0 - phi / VISCOSITY_PHI_LIMIT).powf(-2.5))
}

/// MLB settling velocity of every species, m/s (negative is downward).
pub fn mlb_velocities(c: &[f64], params: &PhysicalParams) -> Result<Vec<f64>> {
    let mut v = vec![0.0; c.len()];
    mlb_velocities_into(c, params, &mut v)?;
    Ok(v)
}

pub(crate) fn mlb_velocities_into(c: &[f64], params: &PhysicalParams, out: &mut [f64]) -> Result<()> {
    let mix = mixture_fields(c, params)?;
    let c_tot: f64 = c.iter().sum();
    let base = mix.phi_f * params.varrho_f - c_tot;
    let mut mean = 0.0;
    for k in 0..c.len() {
        mean += c[k] / mix.rho * params.delta[k] * (params.varrho[k] + base);
    }
    let scale = -params.g * params.settling_scale * hindered_settling(mix.phi, params);
    for i in 0..c.len() {
        let theta = params.delta[i] * (params.varrho[i] + base) - mean;
        out[i] = scale * theta;
    }
    Ok(())
}

/// f_i(c) = c_i v_i(c).
pub fn batch_fluxes(c: &[f64], params: &PhysicalParams) -> Result<Vec<f64>> {
    let v = mlb_velocities(c, params)?;
    Ok(c.iter().zip(v).map(|(ci, vi)| ci * vi).collect())
}

/// Compression matrix D(c), row-major `n_c × n_c`. Zero below the critical
/// volume fraction.
pub fn compression_matrix(c: &[f64], params: &PhysicalParams) -> Result<Vec<f64>> {
    let n = c.len();
    let mut d = vec![0.0; n * n];
    compression_matrix_into(c, params, &mut d)?;
    Ok(d)
}

/// Writes D(c) into `out` and returns false when it is identically zero.
pub(crate) fn compression_matrix_into(
    c: &[f64],
    params: &PhysicalParams,
    out: &mut [f64],
) -> Result<bool> {
    out.iter_mut().for_each(|x| *x = 0.0);
    let mix = mixture_fields(c, params)?;
    let phi = mix.phi;
    if phi <= 0.0 || phi < params.phi_c {
        return Ok(false);
    }
    let (sigma, sigma_prime) = effective_stress(phi, params);
    let rho = mix.rho;
    let delta_c: f64 = params.delta.iter().zip(c).map(|(d, ci)| d * ci).sum();
    let scale = params.settling_scale * hindered_settling(phi, params);
    let n = c.len();
    for l in 0..n {
        let rho_l = params.varrho[l];
        let mixed = params.delta[l] * rho - delta_c;
        let stress_term = (1.0 - phi) * c[l] / (rho_l * rho) * mixed * sigma_prime;
        let third = c[l] / (rho_l * phi * rho) * mixed;
        for i in 0..n {
            let kron = if i == l { params.delta[l] } else { 0.0 };
            let second = c[l] * params.varrho[i] * params.delta[i] / (rho_l * rho);
            out[i * n + l] =
                scale / (rho_l * phi) * (stress_term + sigma * (kron - second - third));
        }
    }
    Ok(true)
}
