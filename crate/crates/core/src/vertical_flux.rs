//! Exchange terms between neighbouring layers of a column: discrete batch and
//! compression fluxes, the interface mass exchange and the species, substrate
//! and momentum exchanges built from it.
//!
//! Interface `k` (0..=M) separates layer `k−1` (below) from layer `k` (above).
//! Interfaces 0 and M are closed: every exchange through them is zero.

use crate::constitutive::{compression_matrix_into, mlb_velocities_into};
use crate::error::{Error, Result};
use crate::geometry::{Column, LayerGeometry, PhysicalParams, Vec2};
use crate::horizontal_flux::upwind_into;

/// Vertical spacing used in the compression flux between layers `a` and `a+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompressionSpacing {
    /// h_a · l_a, i.e. l_a² h.
    #[default]
    Squared,
    /// h (l_a + l_{a+1}) / 2, the distance between layer midpoints.
    Midpoint,
}

impl CompressionSpacing {
    pub fn spacing(self, h: f64, a: usize, layers: &LayerGeometry) -> f64 {
        let l = layers.fractions();
        match self {
            CompressionSpacing::Squared => (l[a] * h) * l[a],
            CompressionSpacing::Midpoint => h * 0.5 * (l[a] + l[a + 1]),
        }
    }
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

/// Discrete batch flux f̃ at the interface between `c_lower` and `c_upper`.
pub fn interface_batch_flux(c_lower: &[f64], c_upper: &[f64], params: &PhysicalParams) -> Result<Vec<f64>> {
    let n = c_lower.len();
    let mut v_lo = vec![0.0; n];
    let mut v_up = vec![0.0; n];
    mlb_velocities_into(c_lower, params, &mut v_lo)?;
    mlb_velocities_into(c_upper, params, &mut v_up)?;
    let mut out = vec![0.0; n];
    batch_flux_from_velocities(c_lower, c_upper, &v_lo, &v_up, &mut out);
    Ok(out)
}

fn batch_flux_from_velocities(c_lo: &[f64], c_up: &[f64], v_lo: &[f64], v_up: &[f64], out: &mut [f64]) {
    let omega = v_up.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for i in 0..out.len() {
        let jump = c_up[i] - c_lo[i];
        out[i] = 0.5 * (c_lo[i] * v_lo[i] + c_up[i] * v_up[i])
            - 0.5 * omega * jump
            - 0.5 * c_lo[i] * (v_up[i] - v_lo[i]).abs() * sgn(jump);
    }
}

/// Compression flux ã between layer `a` (concentration `c_lower`) and `a+1`.
pub fn interface_compression_flux(
    c_lower: &[f64],
    c_upper: &[f64],
    h: f64,
    a: usize,
    layers: &LayerGeometry,
    params: &PhysicalParams,
    spacing: CompressionSpacing,
) -> Result<Vec<f64>> {
    let n = c_lower.len();
    let mut d_lo = vec![0.0; n * n];
    let mut d_up = vec![0.0; n * n];
    let lo_active = compression_matrix_into(c_lower, params, &mut d_lo)?;
    let up_active = compression_matrix_into(c_upper, params, &mut d_up)?;
    let mut out = vec![0.0; n];
    if lo_active || up_active {
        compression_from_matrices(c_lower, c_upper, &d_lo, &d_up, spacing.spacing(h, a, layers), &mut out);
    }
    Ok(out)
}

fn compression_from_matrices(c_lo: &[f64], c_up: &[f64], d_lo: &[f64], d_up: &[f64], dz: f64, out: &mut [f64]) {
    let n = out.len();
    for i in 0..n {
        let mut acc = 0.0;
        for l in 0..n {
            acc += (d_lo[i * n + l] + d_up[i * n + l]) * (c_up[l] - c_lo[l]);
        }
        out[i] = acc / (2.0 * dz);
    }
}

/// Specific flows R_α = q_α − Σ_j r_α^(j) (q_α/m_α)(ϱ_j − ϱ_f)/ϱ_j and R̄ = Σ_β l_β R_β.
pub fn specific_flow(col: &Column, layers: &LayerGeometry, params: &PhysicalParams) -> Result<(Vec<Vec2>, Vec2)> {
    let m = col.n_layers();
    let n_c = params.n_c();
    let mut flows = vec![[0.0; 2]; m];
    let mut mean = [0.0; 2];
    for a in 0..m {
        if !(col.m[a] > 0.0) {
            return Err(Error::DegenerateColumn { cell: None, h: col.h });
        }
        // r/m is stored directly, so Σ_j r_j (q/m) w_j = q Σ_j (r_j/m) w_j
        let mut frac = 0.0;
        for j in 0..n_c {
            frac += col.r_per_m[a * n_c + j] * params.buoyancy_weight(j);
        }
        for d in 0..2 {
            flows[a][d] = col.q[a][d] - col.q[a][d] * frac;
            mean[d] += layers.fraction(a) * flows[a][d];
        }
    }
    Ok((flows, mean))
}

/// Cell-local interface data, computed once per step and shared with neighbours.
#[derive(Debug, Clone, Default)]
pub struct VerticalColumn {
    n_layers: usize,
    n_c: usize,
    n_s: usize,
    /// f̃ and ã per interface, `n_c` each.
    pub batch: Vec<f64>,
    pub compression: Vec<f64>,
    /// Harmonic-mean density ρ̃ per interface (zero on the closed ends).
    pub rho_tilde: Vec<f64>,
    /// Local settling exchange −(ρ̃/ϱ_f) Σ_l (ϱ_l−ϱ_f)/ϱ_l (f̃ − ã).
    pub settling: Vec<f64>,
    /// Σ_{β<k} l_β (R_β − R̄) per interface.
    pub flow_below: Vec<Vec2>,
    /// Interface averages c̃, s̃ and q̃.
    pub c_tilde: Vec<f64>,
    pub s_tilde: Vec<f64>,
    pub q_tilde: Vec<Vec2>,
    /// Upwinded substrate counterflow per interface, `n_s` each.
    pub counterflow: Vec<f64>,
    velocities: Vec<f64>,
    matrices: Vec<f64>,
    active: Vec<bool>,
    flows: Vec<Vec2>,
    lo_buf: Vec<f64>,
    up_buf: Vec<f64>,
}

impl VerticalColumn {
    pub fn new(n_layers: usize, n_c: usize, n_s: usize) -> Self {
        let k = n_layers + 1;
        Self {
            n_layers,
            n_c,
            n_s,
            batch: vec![0.0; k * n_c],
            compression: vec![0.0; k * n_c],
            rho_tilde: vec![0.0; k],
            settling: vec![0.0; k],
            flow_below: vec![[0.0; 2]; k],
            c_tilde: vec![0.0; k * n_c],
            s_tilde: vec![0.0; k * n_s],
            q_tilde: vec![[0.0; 2]; k],
            counterflow: vec![0.0; k * n_s],
            velocities: vec![0.0; n_layers * n_c],
            matrices: vec![0.0; n_layers * n_c * n_c],
            active: vec![false; n_layers],
            flows: vec![[0.0; 2]; n_layers],
            lo_buf: vec![0.0; n_s],
            up_buf: vec![0.0; n_s],
        }
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    /// f̃ − ã at interface `k`.
    pub fn net_settling(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_c;
        self.batch[k * n..(k + 1) * n]
            .iter()
            .zip(&self.compression[k * n..(k + 1) * n])
            .map(|(f, a)| f - a)
    }

    pub fn compute(
        &mut self,
        col: &Column,
        layers: &LayerGeometry,
        params: &PhysicalParams,
        spacing: CompressionSpacing,
    ) -> Result<()> {
        let m = self.n_layers;
        let (n_c, n_s) = (self.n_c, self.n_s);
        for a in 0..m {
            let c = col.c_layer(a);
            mlb_velocities_into(c, params, &mut self.velocities[a * n_c..(a + 1) * n_c])?;
            self.active[a] =
                compression_matrix_into(c, params, &mut self.matrices[a * n_c * n_c..(a + 1) * n_c * n_c])?;
        }
        let (flows, mean) = specific_flow(col, layers, params)?;
        self.flows.copy_from_slice(&flows);

        let mut below = [0.0; 2];
        for k in 0..=m {
            self.flow_below[k] = below;
            if k < m {
                let l = layers.fraction(k);
                below[0] += l * (self.flows[k][0] - mean[0]);
                below[1] += l * (self.flows[k][1] - mean[1]);
            }
        }

        let nn = n_c * n_c;
        for k in [0, m] {
            self.batch[k * n_c..(k + 1) * n_c].fill(0.0);
            self.compression[k * n_c..(k + 1) * n_c].fill(0.0);
            self.rho_tilde[k] = 0.0;
            self.settling[k] = 0.0;
            self.c_tilde[k * n_c..(k + 1) * n_c].fill(0.0);
            self.s_tilde[k * n_s..(k + 1) * n_s].fill(0.0);
            self.q_tilde[k] = [0.0; 2];
            self.counterflow[k * n_s..(k + 1) * n_s].fill(0.0);
        }
        for k in 1..m {
            let (lo, up) = (k - 1, k);
            let c_lo = col.c_layer(lo);
            let c_up = col.c_layer(up);
            batch_flux_from_velocities(
                c_lo,
                c_up,
                &self.velocities[lo * n_c..up * n_c],
                &self.velocities[up * n_c..(up + 1) * n_c],
                &mut self.batch[k * n_c..(k + 1) * n_c],
            );
            let comp = &mut self.compression[k * n_c..(k + 1) * n_c];
            if self.active[lo] || self.active[up] {
                compression_from_matrices(
                    c_lo,
                    c_up,
                    &self.matrices[lo * nn..up * nn],
                    &self.matrices[up * nn..(up + 1) * nn],
                    spacing.spacing(col.h, lo, layers),
                    comp,
                );
            } else {
                comp.fill(0.0);
            }

            let (rl, ru) = (col.rho[lo], col.rho[up]);
            let rho_tilde = 2.0 * rl * ru / (rl + ru);
            self.rho_tilde[k] = rho_tilde;
            let mut weighted = 0.0;
            let mut total = 0.0;
            for l in 0..n_c {
                let net = self.batch[k * n_c + l] - self.compression[k * n_c + l];
                weighted += params.buoyancy_weight(l) * net;
                total += net;
            }
            self.settling[k] = -rho_tilde / params.varrho_f * weighted;

            for l in 0..n_c {
                self.c_tilde[k * n_c + l] =
                    0.5 * (col.r_per_m[up * n_c + l] + col.r_per_m[lo * n_c + l]);
            }
            for l in 0..n_s {
                self.s_tilde[k * n_s + l] =
                    0.5 * (col.s[lo * n_s + l] / col.rho[lo] + col.s[up * n_s + l] / col.rho[up]);
            }
            self.q_tilde[k] = [
                0.5 * (col.vel[up][0] + col.vel[lo][0]),
                0.5 * (col.vel[up][1] + col.vel[lo][1]),
            ];

            for (a, buf) in [(lo, &mut self.lo_buf), (up, &mut self.up_buf)] {
                let fluid = params.varrho_f * col.phi_f[a];
                if !(col.phi_f[a] > 0.0) {
                    return Err(Error::InvalidState(format!(
                        "fluid volume fraction {} in layer {a}",
                        col.phi_f[a]
                    )));
                }
                for l in 0..n_s {
                    buf[l] = col.s[a * n_s + l] / fluid;
                }
            }
            upwind_into(
                total,
                &self.lo_buf,
                &self.up_buf,
                &mut self.counterflow[k * n_s..(k + 1) * n_s],
            );
        }
        Ok(())
    }
}

/// Horizontal-divergence part of the mass exchange through interface `k`
/// contributed by the edge to neighbour `vj`:
/// (|e|/|V|) {{ρ̃}}/ϱ_f Σ_{β<k} l_β ((R_β−R̄)_j − (R_β−R̄)_i)·η.
pub fn edge_mass_exchange(
    vi: &VerticalColumn,
    vj: &VerticalColumn,
    k: usize,
    normal: Vec2,
    length: f64,
    area: f64,
    params: &PhysicalParams,
) -> f64 {
    let rho_avg = 0.5 * (vi.rho_tilde[k] + vj.rho_tilde[k]);
    let d0 = vj.flow_below[k][0] - vi.flow_below[k][0];
    let d1 = vj.flow_below[k][1] - vi.flow_below[k][1];
    length / area * rho_avg / params.varrho_f * (d0 * normal[0] + d1 * normal[1])
}

/// Interface exchanges of one cell, indexed by interface `k` in 0..=M.
#[derive(Debug, Clone, Default)]
pub struct VerticalExchange {
    /// Total mass exchange: Σ_j G_ij plus the local settling exchange.
    pub mass: Vec<f64>,
    pub solids: Vec<f64>,
    pub substrates: Vec<f64>,
    pub momentum: Vec<Vec2>,
}

impl VerticalExchange {
    pub fn new(n_layers: usize, n_c: usize, n_s: usize) -> Self {
        let k = n_layers + 1;
        Self {
            mass: vec![0.0; k],
            solids: vec![0.0; k * n_c],
            substrates: vec![0.0; k * n_s],
            momentum: vec![[0.0; 2]; k],
        }
    }
}

/// A neighbour of the cell being assembled: its interface data and the
/// shared edge (normal pointing towards the neighbour).
pub struct NeighborColumn<'a> {
    pub column: &'a VerticalColumn,
    pub normal: Vec2,
    pub length: f64,
}

/// Assembles G, 𝒢, 𝒮 and 𝒬 for one cell.
///
/// The edge-averaged divergence part is summed over neighbours; the settling
/// exchange depends only on the cell's own column and enters once.
pub fn assemble_exchange<'a>(
    vi: &VerticalColumn,
    neighbors: impl Iterator<Item = NeighborColumn<'a>> + Clone,
    area: f64,
    params: &PhysicalParams,
    out: &mut VerticalExchange,
) {
    let m = vi.n_layers;
    let (n_c, n_s) = (vi.n_c, vi.n_s);
    out.mass.fill(0.0);
    out.solids.fill(0.0);
    out.substrates.fill(0.0);
    out.momentum.fill([0.0; 2]);
    for k in 1..m {
        let solids = &mut out.solids[k * n_c..(k + 1) * n_c];
        let substrates = &mut out.substrates[k * n_s..(k + 1) * n_s];
        let mut mass = 0.0;
        let mut momentum = [0.0; 2];
        for nb in neighbors.clone() {
            let vj = nb.column;
            let g = edge_mass_exchange(vi, vj, k, nb.normal, nb.length, area, params);
            mass += g;
            for l in 0..n_c {
                solids[l] += 0.5 * (vi.c_tilde[k * n_c + l] + vj.c_tilde[k * n_c + l]) * g;
            }
            for l in 0..n_s {
                substrates[l] += 0.5 * (vi.s_tilde[k * n_s + l] + vj.s_tilde[k * n_s + l]) * g;
            }
            for d in 0..2 {
                momentum[d] += 0.5 * (vi.q_tilde[k][d] + vj.q_tilde[k][d]) * g;
            }
        }
        let local = vi.settling[k];
        out.mass[k] = mass + local;
        for l in 0..n_c {
            let net = vi.batch[k * n_c + l] - vi.compression[k * n_c + l];
            solids[l] += vi.c_tilde[k * n_c + l] * local - net;
        }
        for l in 0..n_s {
            substrates[l] += vi.s_tilde[k * n_s + l] * local + vi.counterflow[k * n_s + l];
        }
        for d in 0..2 {
            out.momentum[k][d] = momentum[d] + vi.q_tilde[k][d] * local;
        }
    }
}
