//! Shared helpers for the integration and acceptance tests: configuration
//! builders, a state bounds check and independent reference solvers.

#![allow(dead_code)]

use mlswr::geometry::{Column, SimState};
use mlswr::io::{parse_config, preset, RunConfig};
use mlswr::stepper::Simulation;

pub fn preset_config(name: &str) -> RunConfig {
    parse_config(preset(name).unwrap().text).unwrap()
}

/// Same preset on an `nx × ny × m` grid covering the same domain.
pub fn coarse(name: &str, nx: usize, ny: usize, m: usize) -> RunConfig {
    let mut c = preset_config(name);
    let (lx, ly) = (c.grid.nx as f64 * c.grid.dx, c.grid.ny as f64 * c.grid.dy);
    c.grid.nx = nx;
    c.grid.ny = ny;
    c.grid.dx = lx / nx as f64;
    c.grid.dy = ly / ny as f64;
    c.layers.count = m;
    c
}

pub fn pure_fluid(c: &mut RunConfig) {
    c.initial.c = vec![0.0; c.initial.c.len()];
    c.initial.s = vec![0.0; c.initial.s.len()];
    c.reactions.preset = "none".into();
}

/// h > 0, 0 ≤ c_tot ≤ c_max, s ≥ −1e-12 and s_w ≥ 0 in every cell and layer.
pub fn check_bounds(sim: &Simulation) -> Result<(), String> {
    let (state, grid, layers, params) = (sim.state(), sim.grid(), sim.layers(), sim.params());
    let c_max = params.c_max();
    for i in 0..grid.n_cells() {
        let col = Column::from_state(state, grid, layers, params, i).map_err(|e| format!("cell {i}: {e}"))?;
        if !(col.h > 0.0) {
            return Err(format!("h = {} in cell {i}", col.h));
        }
        for a in 0..layers.count() {
            let c = col.c_layer(a);
            let s = col.s_layer(a);
            let c_tot: f64 = c.iter().sum();
            if !(c_tot >= 0.0 && c_tot <= c_max) || c.iter().any(|&x| x < 0.0) {
                return Err(format!("c = {c:?} in cell {i}, layer {a}"));
            }
            if s.iter().any(|&x| !(x >= -1e-12)) {
                return Err(format!("s = {s:?} in cell {i}, layer {a}"));
            }
            let phi: f64 = c.iter().zip(&params.varrho).map(|(c, r)| c / r).sum();
            let s_w = params.varrho_f * (1.0 - phi) - s.iter().sum::<f64>();
            if !(s_w >= 0.0) {
                return Err(format!("s_w = {s_w} in cell {i}, layer {a}"));
            }
        }
    }
    Ok(())
}

/// Max over the entries of |a − b| / scale, with scale the largest |b|.
pub fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let dev = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale > 0.0 {
        dev / scale
    } else {
        dev
    }
}

/// Denitrification rates written out in closed form: (dc/dt, ds/dt).
pub fn denitrification_rates(c: &[f64], s: &[f64]) -> ([f64; 2], [f64; 3]) {
    let (mu_max, b, f_p, y, y_bar, k1, k2) = (5.56e-4, 6.94e-5, 0.2, 0.67, 0.172216, 5e-4, 0.02);
    let (s1, s2) = (s[0].max(0.0), s[1].max(0.0));
    let mu = mu_max * s1 / (k1 + s1) * s2 / (k2 + s2);
    let x = c[0].max(0.0);
    ([x * (mu - b), x * f_p * b], [-x * y_bar * mu, x * (-mu / y + 0.8 * b), x * y_bar * mu])
}

/// Classical RK4 for the 0-D kinetics system in (c1, c2, s1, s2, s3).
pub fn rk4_kinetics(c0: [f64; 2], s0: [f64; 3], t_end: f64, steps: usize) -> [f64; 5] {
    let f = |y: [f64; 5]| {
        let (rc, rs) = denitrification_rates(&y[..2], &y[2..]);
        [rc[0], rc[1], rs[0], rs[1], rs[2]]
    };
    let add = |y: [f64; 5], k: [f64; 5], h: f64| std::array::from_fn::<f64, 5, _>(|i| y[i] + h * k[i]);
    let dt = t_end / steps as f64;
    let mut y = [c0[0], c0[1], s0[0], s0[1], s0[2]];
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(add(y, k1, 0.5 * dt));
        let k3 = f(add(y, k2, 0.5 * dt));
        let k4 = f(add(y, k3, dt));
        y = std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    y
}

/// Material constants of the reference column.
#[derive(Debug, Clone)]
pub struct ColumnModel {
    pub rho_s: Vec<f64>,
    pub rho_f: f64,
    pub delta: Vec<f64>,
    pub scale: f64,
    pub g: f64,
    pub phi_max: f64,
    pub phi_c: f64,
    pub sigma_0: f64,
    pub reactions: bool,
    pub eps_cutoff: f64,
    pub l: Vec<f64>,
}

/// Stand-alone single-column solver for a horizontally uniform fluid at
/// rest: solids settle and compress between layers, substrates follow the
/// fluid counterflow and the denitrification kinetics act in every layer.
#[derive(Debug, Clone)]
pub struct ReferenceColumn {
    pub model: ColumnModel,
    pub mbar: f64,
    pub h: f64,
    /// r[a][k] and zeta[a][l].
    pub r: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<f64>>,
}

impl ReferenceColumn {
    pub fn from_cell(state: &SimState, cell: usize, model: ColumnModel) -> Self {
        let m = state.n_layers;
        let (n_c, n_s) = (state.n_c, state.n_s);
        let r = (0..m)
            .map(|a| state.r[(cell * m + a) * n_c..(cell * m + a + 1) * n_c].to_vec())
            .collect();
        let zeta = (0..m)
            .map(|a| state.zeta[(cell * m + a) * n_s..(cell * m + a + 1) * n_s].to_vec())
            .collect();
        Self { model, mbar: state.mbar[cell], h: state.h[cell], r, zeta }
    }

    fn settling_velocity(&self, c: &[f64]) -> Vec<f64> {
        let md = &self.model;
        let phi: f64 = c.iter().zip(&md.rho_s).map(|(c, r)| c / r).sum();
        let c_tot: f64 = c.iter().sum();
        let rho = md.rho_f * (1.0 - phi) + c_tot;
        let hindered = (1.0 - (phi / md.phi_max).clamp(0.0, 1.0)).powf(4.7);
        let buoy = |k: usize| md.delta[k] * (md.rho_s[k] + (1.0 - phi) * md.rho_f - c_tot);
        let mean: f64 = (0..c.len()).map(|k| c[k] / rho * buoy(k)).sum();
        (0..c.len()).map(|i| -md.g * md.scale * hindered * (buoy(i) - mean)).collect()
    }

    /// Compression coefficient matrix, row-major.
    fn compression(&self, c: &[f64]) -> Vec<f64> {
        let md = &self.model;
        let n = c.len();
        let phi: f64 = c.iter().zip(&md.rho_s).map(|(c, r)| c / r).sum();
        if phi < md.phi_c || phi <= 0.0 {
            return vec![0.0; n * n];
        }
        let rho = md.rho_f * (1.0 - phi) + c.iter().sum::<f64>();
        let x = phi / md.phi_c;
        let sigma = md.sigma_0 * (x.powi(5) - 1.0);
        let dsigma = 5.0 * md.sigma_0 * x.powi(4) / md.phi_c;
        let hindered = (1.0 - (phi / md.phi_max).clamp(0.0, 1.0)).powf(4.7);
        let dc: f64 = md.delta.iter().zip(c).map(|(d, c)| d * c).sum();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for l in 0..n {
                let rl = md.rho_s[l];
                let tail = md.delta[l] * rho - dc;
                let kron = if i == l { md.delta[l] } else { 0.0 };
                let first = (1.0 - phi) * c[l] / (rl * rho) * tail * dsigma;
                let second = sigma
                    * (kron - c[l] * md.rho_s[i] * md.delta[i] / (rl * rho) - c[l] / (rl * phi * rho) * tail);
                out[i * n + l] = md.scale * hindered / (rl * phi) * (first + second);
            }
        }
        out
    }

    /// Advances one step of length `dt` with forward Euler.
    pub fn step(&mut self, dt: f64) {
        let md = self.model.clone();
        let m = md.l.len();
        let n_c = md.rho_s.len();
        let n_s = self.zeta[0].len();
        let h = self.h;
        let w: Vec<f64> = md.rho_s.iter().map(|r| (r - md.rho_f) / r).collect();
        let mass: Vec<f64> = (0..m)
            .map(|a| md.rho_f * h + (0..n_c).map(|k| w[k] * self.r[a][k]).sum::<f64>())
            .collect();
        let c: Vec<Vec<f64>> = self.r.iter().map(|r| r.iter().map(|x| x / h).collect()).collect();
        let s: Vec<Vec<f64>> = self.zeta.iter().map(|z| z.iter().map(|x| x / h).collect()).collect();
        let phi_f: Vec<f64> =
            c.iter().map(|c| 1.0 - c.iter().zip(&md.rho_s).map(|(c, r)| c / r).sum::<f64>()).collect();
        let vel: Vec<Vec<f64>> = c.iter().map(|c| self.settling_velocity(c)).collect();

        // exchange through the interface above layer a, for a in 0..m−1
        let mut solids = vec![vec![0.0; n_c]; m + 1];
        let mut substrates = vec![vec![0.0; n_s]; m + 1];
        for k in 1..m {
            let (lo, up) = (k - 1, k);
            let omega = vel[up].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let d_lo = self.compression(&c[lo]);
            let d_up = self.compression(&c[up]);
            let dz = md.l[lo] * md.l[lo] * h;
            let mut net = vec![0.0; n_c];
            for i in 0..n_c {
                let jump = c[up][i] - c[lo][i];
                let sign = if jump > 0.0 { 1.0 } else if jump < 0.0 { -1.0 } else { 0.0 };
                let batch = 0.5 * (c[lo][i] * vel[lo][i] + c[up][i] * vel[up][i])
                    - 0.5 * omega * jump
                    - 0.5 * c[lo][i] * (vel[up][i] - vel[lo][i]).abs() * sign;
                let comp: f64 =
                    (0..n_c).map(|j| (d_lo[i * n_c + j] + d_up[i * n_c + j]) * (c[up][j] - c[lo][j])).sum::<f64>()
                        / (2.0 * dz);
                net[i] = batch - comp;
            }
            let (rho_lo, rho_up) = (mass[lo] / h, mass[up] / h);
            let rho_t = 2.0 * rho_lo * rho_up / (rho_lo + rho_up);
            let g_loc = -rho_t / md.rho_f * (0..n_c).map(|i| w[i] * net[i]).sum::<f64>();
            for i in 0..n_c {
                let c_t = 0.5 * (self.r[lo][i] / mass[lo] + self.r[up][i] / mass[up]);
                solids[k][i] = c_t * g_loc - net[i];
            }
            let total: f64 = net.iter().sum();
            for l in 0..n_s {
                let s_t = 0.5 * (self.zeta[lo][l] / mass[lo] + self.zeta[up][l] / mass[up]);
                let pick = if total > 0.0 {
                    s[lo][l] / (md.rho_f * phi_f[lo])
                } else if total < 0.0 {
                    s[up][l] / (md.rho_f * phi_f[up])
                } else {
                    0.0
                };
                substrates[k][l] = s_t * g_loc + total * pick;
            }
        }

        let c_max = md.rho_s.iter().copied().fold(f64::INFINITY, f64::min) * md.phi_max;
        let mut source = 0.0;
        let tol = 1e-12 * h;
        for a in 0..m {
            let (mut rc, mut rs) = ([0.0; 2], [0.0; 3]);
            if md.reactions && c[a].iter().sum::<f64>() < c_max - md.eps_cutoff {
                (rc, rs) = denitrification_rates(&c[a], &s[a]);
            }
            source += md.l[a] * h * (rc.iter().sum::<f64>() + rs.iter().sum::<f64>());
            for i in 0..n_c {
                let v = self.r[a][i] + dt / md.l[a] * (solids[a + 1][i] - solids[a][i]) + dt * h * rc[i];
                self.r[a][i] = if v < 0.0 && v > -tol { 0.0 } else { v };
            }
            for l in 0..n_s {
                let v = self.zeta[a][l] + dt / md.l[a] * (substrates[a + 1][l] - substrates[a][l]) + dt * h * rs[l];
                self.zeta[a][l] = if v < 0.0 && v > -tol { 0.0 } else { v };
            }
        }
        self.mbar += dt * source;
        let weighted: f64 = (0..m).map(|a| md.l[a] * (0..n_c).map(|k| w[k] * self.r[a][k]).sum::<f64>()).sum();
        self.h = (self.mbar - weighted) / md.rho_f;
    }
}
