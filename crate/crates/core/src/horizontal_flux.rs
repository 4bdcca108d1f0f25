//! Edge fluxes of HLL-PVM-1U type for layer mass and momentum, upwind species
//! fluxes, the pressure source and the characteristic speeds.
//!
//! Every function takes the two cells adjacent to an edge as [`Column`]s, with
//! `normal` the unit normal pointing from `ci` to `cj`. Differences are always
//! `(·)_j − (·)_i` and averages are arithmetic means.

use crate::error::{Error, Result};
use crate::geometry::{Column, LayerGeometry, PhysicalParams, Vec2};

#[inline]
fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Wave-speed bounds for one edge, shared by every layer.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeSpeeds {
    pub sigma_l: f64,
    pub sigma_r: f64,
    pub theta_0: f64,
    pub theta_1: f64,
}

impl EdgeSpeeds {
    pub fn new(sigma_l: f64, sigma_r: f64) -> Self {
        let (theta_0, theta_1) = theta_coeffs(sigma_l, sigma_r);
        Self {
            sigma_l,
            sigma_r,
            theta_0,
            theta_1,
        }
    }

    /// Largest absolute signal speed, λ = max(|σ_L|, |σ_R|).
    pub fn lambda(&self) -> f64 {
        self.sigma_l.abs().max(self.sigma_r.abs())
    }
}

/// χ = 4 − 2/M.
pub fn chi(m: usize) -> f64 {
    4.0 - 2.0 / m as f64
}

/// (σ_L, σ_R) = v̄ ∓ √(χΨ).
pub fn characteristic_speeds(
    ci: &Column,
    cj: &Column,
    normal: Vec2,
    params: &PhysicalParams,
) -> Result<(f64, f64)> {
    let m = ci.n_layers();
    let mf = m as f64;
    let mut vbar = 0.0;
    for a in 0..m {
        vbar += 0.5 * dot([ci.vel[a][0] + cj.vel[a][0], ci.vel[a][1] + cj.vel[a][1]], normal);
    }
    vbar /= mf;
    let mut spread = 0.0;
    let mut weighted_rho = 0.0;
    for a in 0..m {
        let v_a = 0.5 * dot([ci.vel[a][0] + cj.vel[a][0], ci.vel[a][1] + cj.vel[a][1]], normal);
        spread += (vbar - v_a) * (vbar - v_a);
        let odd = (2 * a + 1) as f64;
        weighted_rho += odd / (mf * params.varrho_f) * 0.5 * (ci.rho[a] + cj.rho[a]);
    }
    let h_avg = 0.5 * (ci.h + cj.h);
    let psi = spread + 0.5 * params.g * h_avg * (1.0 + weighted_rho);
    if !(psi > 0.0) {
        return Err(Error::NonpositivePsi(psi));
    }
    let root = (chi(m) * psi).sqrt();
    Ok((vbar - root, vbar + root))
}

/// (θ₀, θ₁) of the HLL-PVM-1U viscosity polynomial.
pub fn theta_coeffs(sigma_l: f64, sigma_r: f64) -> (f64, f64) {
    let gap = sigma_r - sigma_l;
    let scale = sigma_l.abs().max(sigma_r.abs()).max(1.0);
    if gap.abs() < 1e-12 * scale {
        return (0.0, sgn(sigma_r));
    }
    let theta_0 = (sigma_r * sigma_l.abs() - sigma_l * sigma_r.abs()) / gap;
    let theta_1 = (sigma_r.abs() - sigma_l.abs()) / gap;
    (theta_0, theta_1)
}

/// b = {{ρ_α}}(z_B,j − z_B,i).
pub fn wellbalance_term(ci: &Column, cj: &Column, a: usize) -> f64 {
    0.5 * (ci.rho[a] + cj.rho[a]) * (cj.zb - ci.zb)
}

/// Pressure-gradient source ψ for layer `a`.
pub fn pressure_source(
    ci: &Column,
    cj: &Column,
    a: usize,
    normal: Vec2,
    layers: &LayerGeometry,
    params: &PhysicalParams,
) -> Vec2 {
    let m_avg = 0.5 * (ci.m[a] + cj.m[a]);
    let h2_avg = 0.5 * (ci.h * ci.h + cj.h * cj.h);
    let h_avg = 0.5 * (ci.h + cj.h);
    let dm_a = cj.m[a] - ci.m[a];
    let mut upper = 0.0;
    for b in a + 1..ci.n_layers() {
        upper += layers.fraction(b) * ((cj.m[b] - ci.m[b]) - dm_a);
    }
    let weight = 0.5 * layers.fraction(a) + layers.above(a);
    let scalar = params.g
        * (m_avg * ((cj.zb - ci.zb) + (cj.h - ci.h))
            + h2_avg * weight * (cj.rho[a] - ci.rho[a])
            + h_avg * upper);
    [scalar * normal[0], scalar * normal[1]]
}

/// Layer mass flux F^m.
pub fn mass_flux(ci: &Column, cj: &Column, a: usize, normal: Vec2, speeds: &EdgeSpeeds) -> f64 {
    let q_avg = [0.5 * (ci.q[a][0] + cj.q[a][0]), 0.5 * (ci.q[a][1] + cj.q[a][1])];
    let dq = [cj.q[a][0] - ci.q[a][0], cj.q[a][1] - ci.q[a][1]];
    let b = wellbalance_term(ci, cj, a);
    dot(q_avg, normal)
        - 0.5 * (speeds.theta_0 * (cj.m[a] - ci.m[a] + b) + speeds.theta_1 * dot(dq, normal))
}

/// (q⊗q/m) η.
#[inline]
fn advective(q: Vec2, m: f64, normal: Vec2) -> Vec2 {
    let qn = dot(q, normal) / m;
    [q[0] * qn, q[1] * qn]
}

/// Layer momentum flux F^q, given the pressure source ψ of the same edge and layer.
pub fn momentum_flux(
    ci: &Column,
    cj: &Column,
    a: usize,
    normal: Vec2,
    speeds: &EdgeSpeeds,
    psi: Vec2,
) -> Result<Vec2> {
    if !(ci.m[a] > 0.0 && cj.m[a] > 0.0) {
        return Err(Error::DegenerateColumn {
            cell: None,
            h: ci.h.min(cj.h),
        });
    }
    let fi = advective(ci.q[a], ci.m[a], normal);
    let fj = advective(cj.q[a], cj.m[a], normal);
    let mut out = [0.0; 2];
    for d in 0..2 {
        out[d] = 0.5 * (fi[d] + fj[d])
            - 0.5 * speeds.theta_0 * (cj.q[a][d] - ci.q[a][d])
            - 0.5 * speeds.theta_1 * psi[d]
            - 0.5 * speeds.theta_1 * (fj[d] - fi[d]);
    }
    Ok(out)
}

/// Upw(ν; β, γ) = ν((1 + sgn ν)/2 β + (1 − sgn ν)/2 γ).
pub fn upwind(nu: f64, left: &[f64], right: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; left.len()];
    upwind_into(nu, left, right, &mut out);
    out
}

pub(crate) fn upwind_into(nu: f64, left: &[f64], right: &[f64], out: &mut [f64]) {
    let s = sgn(nu);
    let wl = 0.5 * (1.0 + s);
    let wr = 0.5 * (1.0 - s);
    for ((o, l), r) in out.iter_mut().zip(left).zip(right) {
        *o = nu * (wl * l + wr * r);
    }
}

/// (F^r, F^ζ) for layer `a` from the layer mass flux.
pub fn species_flux(ci: &Column, cj: &Column, a: usize, fm: f64) -> (Vec<f64>, Vec<f64>) {
    let n_c = ci.r_per_m.len() / ci.n_layers();
    let n_s = ci.zeta_per_m.len() / ci.n_layers();
    let mut fr = vec![0.0; n_c];
    let mut fz = vec![0.0; n_s];
    species_flux_into(ci, cj, a, fm, &mut fr, &mut fz);
    (fr, fz)
}

fn species_flux_into(ci: &Column, cj: &Column, a: usize, fm: f64, fr: &mut [f64], fz: &mut [f64]) {
    let (n_c, n_s) = (fr.len(), fz.len());
    upwind_into(
        fm,
        &ci.r_per_m[a * n_c..(a + 1) * n_c],
        &cj.r_per_m[a * n_c..(a + 1) * n_c],
        fr,
    );
    upwind_into(
        fm,
        &ci.zeta_per_m[a * n_s..(a + 1) * n_s],
        &cj.zeta_per_m[a * n_s..(a + 1) * n_s],
        fz,
    );
}

/// All fluxes through one edge, evaluated from the `lo` side (normal pointing
/// to `hi`). The `hi` cell sees the negated F^m, F^q, F^r, F^ζ and the same ψ.
#[derive(Debug, Clone, Default)]
pub struct EdgeFluxes {
    pub speeds: EdgeSpeeds,
    pub mass: Vec<f64>,
    pub momentum: Vec<Vec2>,
    pub psi: Vec<Vec2>,
    /// Layer-major `n_c` and `n_s` blocks.
    pub solids: Vec<f64>,
    pub substrates: Vec<f64>,
}

impl EdgeFluxes {
    pub fn new(n_layers: usize, n_c: usize, n_s: usize) -> Self {
        Self {
            speeds: EdgeSpeeds::default(),
            mass: vec![0.0; n_layers],
            momentum: vec![[0.0; 2]; n_layers],
            psi: vec![[0.0; 2]; n_layers],
            solids: vec![0.0; n_layers * n_c],
            substrates: vec![0.0; n_layers * n_s],
        }
    }
}

/// Fills `out` with every flux through the edge between `ci` and `cj`.
pub fn edge_fluxes(
    ci: &Column,
    cj: &Column,
    normal: Vec2,
    layers: &LayerGeometry,
    params: &PhysicalParams,
    out: &mut EdgeFluxes,
) -> Result<()> {
    let (sl, sr) = characteristic_speeds(ci, cj, normal, params)?;
    let speeds = EdgeSpeeds::new(sl, sr);
    out.speeds = speeds;
    let m = ci.n_layers();
    let n_c = out.solids.len() / m;
    let n_s = out.substrates.len() / m;
    for a in 0..m {
        let psi = pressure_source(ci, cj, a, normal, layers, params);
        let fm = mass_flux(ci, cj, a, normal, &speeds);
        out.psi[a] = psi;
        out.mass[a] = fm;
        out.momentum[a] = momentum_flux(ci, cj, a, normal, &speeds, psi)?;
        species_flux_into(
            ci,
            cj,
            a,
            fm,
            &mut out.solids[a * n_c..(a + 1) * n_c],
            &mut out.substrates[a * n_s..(a + 1) * n_s],
        );
    }
    Ok(())
}
