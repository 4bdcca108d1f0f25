//! Time marching: CFL step size, explicit update of m̄, q, r and ζ, recovery
//! of layer masses and height, and the linearly implicit viscous correction.

use std::sync::Arc;

use rayon::prelude::*;

use crate::constitutive::mixture_viscosity;
use crate::error::{Error, Result};
use crate::geometry::{
    mixture_fields, recover_height, recover_layer_mass_into, Column, Grid, LayerGeometry,
    PhysicalParams, SimState, Vec2,
};
use crate::horizontal_flux::{edge_fluxes, EdgeFluxes};
use crate::kinetics::{reaction_terms_into, ReactionSpec};
use crate::vertical_flux::{
    assemble_exchange, CompressionSpacing, NeighborColumn, VerticalColumn, VerticalExchange,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MLSWR_THREADS";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub cfl: f64,
    pub t_end: f64,
    /// Upper bound on Δt, s.
    pub dt_max: f64,
    pub viscosity: bool,
    pub compression_spacing: CompressionSpacing,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            t_end: 0.0,
            dt_max: 0.1,
            viscosity: true,
            compression_spacing: CompressionSpacing::Squared,
        }
    }
}

/// Summary of one completed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub max_q: f64,
    pub min_h: f64,
    /// Total magnitude of round-off negatives set to zero, kg/m².
    pub clipped: f64,
}

impl std::fmt::Display for StepReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "step={} t={:.6} dt={:.6e} max_q={:.6e} min_h={:.9} clipped={:.3e}",
            self.step, self.t, self.dt, self.max_q, self.min_h, self.clipped
        )
    }
}

/// Δt = cfl / max(λ/d), limited by `dt_max`. A zero rate yields `dt_max`.
pub fn dt_from_rate(max_rate: f64, cfl: f64, dt_max: f64) -> f64 {
    if max_rate > 0.0 {
        (cfl / max_rate).min(dt_max)
    } else {
        dt_max
    }
}

/// CFL-limited step for `state`, evaluated from the edge wave speeds.
pub fn cfl_dt(
    state: &SimState,
    grid: &Grid,
    layers: &LayerGeometry,
    params: &PhysicalParams,
    cfl: f64,
    dt_max: f64,
) -> Result<f64> {
    let cols = (0..grid.n_cells())
        .map(|i| Column::from_state(state, grid, layers, params, i))
        .collect::<Result<Vec<_>>>()?;
    let mut rate: f64 = 0.0;
    for e in grid.edges() {
        let (sl, sr) = crate::horizontal_flux::characteristic_speeds(&cols[e.lo], &cols[e.hi], e.normal, params)?;
        rate = rate.max(sl.abs().max(sr.abs()) / e.distance);
    }
    Ok(dt_from_rate(rate, cfl, dt_max))
}

/// Solves a tridiagonal system in place with the Thomas algorithm.
/// `lower[k]` couples rows `k+1` and `k`, `upper[k]` rows `k` and `k+1`.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let mut work = vec![0.0; diag.len()];
    thomas(lower, diag, upper, rhs, &mut work)
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], work: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let tiny = f64::MIN_POSITIVE;
    let mut pivot = diag[0];
    if pivot.abs() <= tiny {
        return Err(Error::SingularSystem(0));
    }
    rhs[0] /= pivot;
    for k in 1..n {
        work[k] = upper[k - 1] / pivot;
        pivot = diag[k] - lower[k - 1] * work[k];
        if !(pivot.abs() > tiny) {
            return Err(Error::SingularSystem(k));
        }
        rhs[k] = (rhs[k] - lower[k - 1] * rhs[k - 1]) / pivot;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= work[k + 1] * rhs[k + 1];
    }
    Ok(())
}

/// Scratch space for the viscous solve of one column.
#[derive(Debug, Clone, Default)]
pub struct ViscousScratch {
    coupling: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
    rhs: Vec<f64>,
    work: Vec<f64>,
}

/// Implicit vertical viscosity for one column:
/// l_α q_α − Δt (K_{α+1/2} − K_{α−1/2}) = l_α q_α^{half}, with
/// K_{α+1/2} = μ(φ̄)/((l_α + l_{α+1}) h_old) (q_{α+1}/m_{α+1} − q_α/m_α).
#[allow(clippy::too_many_arguments)]
pub fn viscous_solve(
    q_half: &[Vec2],
    m: &[f64],
    phi: &[f64],
    h_old: f64,
    dt: f64,
    layers: &LayerGeometry,
    params: &PhysicalParams,
    out: &mut [Vec2],
) -> Result<()> {
    viscous_solve_with(q_half, m, phi, h_old, dt, layers, params, out, &mut ViscousScratch::default())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn viscous_solve_with(
    q_half: &[Vec2],
    m: &[f64],
    phi: &[f64],
    h_old: f64,
    dt: f64,
    layers: &LayerGeometry,
    params: &PhysicalParams,
    out: &mut [Vec2],
    s: &mut ViscousScratch,
) -> Result<()> {
    let n = q_half.len();
    out.copy_from_slice(q_half);
    if n < 2 {
        return Ok(());
    }
    let l = layers.fractions();
    s.coupling.resize(n - 1, 0.0);
    for a in 0..n - 1 {
        let mu = mixture_viscosity(0.5 * (phi[a + 1] + phi[a]), params)?;
        s.coupling[a] = mu / ((l[a + 1] + l[a]) * h_old);
    }
    s.diag.resize(n, 0.0);
    s.off.resize(n - 1, 0.0);
    s.rhs.resize(n, 0.0);
    s.work.resize(n, 0.0);
    for a in 0..n {
        let below = if a > 0 { s.coupling[a - 1] } else { 0.0 };
        let above = if a + 1 < n { s.coupling[a] } else { 0.0 };
        s.diag[a] = l[a] * m[a] + dt * (below + above);
    }
    for a in 0..n - 1 {
        s.off[a] = -dt * s.coupling[a];
    }
    for d in 0..2 {
        for a in 0..n {
            s.rhs[a] = l[a] * q_half[a][d];
        }
        thomas(&s.off, &s.diag, &s.off, &mut s.rhs, &mut s.work)?;
        for a in 0..n {
            out[a][d] = m[a] * s.rhs[a];
        }
    }
    Ok(())
}

/// Per-cell scratch for the update phase.
struct CellScratch {
    exchange: VerticalExchange,
    rc: Vec<f64>,
    rs: Vec<f64>,
    q_sum: Vec<Vec2>,
    r_sum: Vec<f64>,
    z_sum: Vec<f64>,
    q_half: Vec<Vec2>,
    m_new: Vec<f64>,
    phi_new: Vec<f64>,
    viscous: ViscousScratch,
}

impl CellScratch {
    fn new(m: usize, n_c: usize, n_s: usize) -> Self {
        Self {
            exchange: VerticalExchange::new(m, n_c, n_s),
            rc: vec![0.0; m * n_c],
            rs: vec![0.0; m * n_s],
            q_sum: vec![[0.0; 2]; m],
            r_sum: vec![0.0; m * n_c],
            z_sum: vec![0.0; m * n_s],
            q_half: vec![[0.0; 2]; m],
            m_new: vec![0.0; m],
            phi_new: vec![0.0; m],
            viscous: ViscousScratch::default(),
        }
    }
}

fn thread_pool() -> Result<Arc<rayon::ThreadPool>> {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Arc::new)
        .map_err(|e| Error::InvalidState(format!("cannot start worker threads: {e}")))
}

fn tag_cell(e: Error, cell: usize) -> Error {
    match e {
        Error::DegenerateColumn { cell: None, h } => Error::DegenerateColumn { cell: Some(cell), h },
        other => other,
    }
}

/// A running simulation: geometry, closures, the current state and the
/// buffers reused from step to step.
pub struct Simulation {
    grid: Grid,
    layers: LayerGeometry,
    params: PhysicalParams,
    reactions: ReactionSpec,
    config: StepConfig,
    state: SimState,
    previous: SimState,
    steps: u64,
    last_dt: f64,
    pool: Arc<rayon::ThreadPool>,
    columns: Vec<Column>,
    verticals: Vec<VerticalColumn>,
    edges: Vec<EdgeFluxes>,
    clipped: Vec<f64>,
}

impl Simulation {
    pub fn new(
        grid: Grid,
        layers: LayerGeometry,
        params: PhysicalParams,
        reactions: ReactionSpec,
        config: StepConfig,
        state: SimState,
    ) -> Result<Self> {
        let n = grid.n_cells();
        let (m, n_c, n_s) = (layers.count(), params.n_c(), params.n_s);
        if state.n_cells() != n || state.n_layers != m || state.n_c != n_c || state.n_s != n_s {
            return Err(Error::MismatchedStates(format!(
                "state has {} cells × {} layers ({} solids, {} substrates), model expects {n} × {m} ({n_c}, {n_s})",
                state.n_cells(),
                state.n_layers,
                state.n_c,
                state.n_s
            )));
        }
        if !(config.cfl > 0.0 && config.cfl <= 1.0) {
            return Err(Error::OutOfRange(format!("cfl = {} must lie in (0, 1]", config.cfl)));
        }
        if !(config.dt_max > 0.0) {
            return Err(Error::OutOfRange(format!("dt_max = {} must be positive", config.dt_max)));
        }
        let edges = vec![EdgeFluxes::new(m, n_c, n_s); grid.edges().len()];
        Ok(Self {
            columns: vec![Column::default(); n],
            verticals: vec![VerticalColumn::new(m, n_c, n_s); n],
            clipped: vec![0.0; n],
            edges,
            pool: thread_pool()?,
            previous: state.clone(),
            state,
            steps: 0,
            last_dt: 0.0,
            grid,
            layers,
            params,
            reactions,
            config,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn layers(&self) -> &LayerGeometry {
        &self.layers
    }
    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }
    pub fn reactions(&self) -> &ReactionSpec {
        &self.reactions
    }
    pub fn config(&self) -> &StepConfig {
        &self.config
    }
    pub fn config_mut(&mut self) -> &mut StepConfig {
        &mut self.config
    }
    pub fn state(&self) -> &SimState {
        &self.state
    }
    /// State before the most recent step (the initial state before any step).
    pub fn previous(&self) -> &SimState {
        &self.previous
    }
    pub fn steps(&self) -> u64 {
        self.steps
    }
    /// Δt of the most recent step, zero before the first.
    pub fn last_dt(&self) -> f64 {
        self.last_dt
    }

    pub fn finished(&self) -> bool {
        self.state.t >= self.config.t_end
    }

    /// Advances until `t_end`, calling `observer` after every step.
    pub fn run(&mut self, mut observer: impl FnMut(&Simulation, &StepReport) -> Result<()>) -> Result<()> {
        while !self.finished() {
            let report = self.step()?;
            observer(self, &report)?;
        }
        Ok(())
    }

    /// One full time step.
    pub fn step(&mut self) -> Result<StepReport> {
        let step = self.steps + 1;
        let pool = Arc::clone(&self.pool);
        let report = pool
            .install(|| self.advance(step))
            .map_err(|e| Error::AtStep { step, source: Box::new(e) })?;
        Ok(report)
    }

    fn advance(&mut self, step: u64) -> Result<StepReport> {
        let grid = &self.grid;
        let layers = &self.layers;
        let params = &self.params;
        let config = self.config;
        let state = &self.state;

        self.columns
            .par_iter_mut()
            .zip(self.verticals.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, (col, vert))| {
                col.fill(state, grid, layers, params, i)?;
                vert.compute(col, layers, params, config.compression_spacing)
                    .map_err(|e| tag_cell(e, i))
            })?;

        let columns = &self.columns;
        self.edges
            .par_iter_mut()
            .zip(grid.edges().par_iter())
            .try_for_each(|(out, e)| {
                edge_fluxes(&columns[e.lo], &columns[e.hi], e.normal, layers, params, out)
            })?;

        let max_rate = self
            .edges
            .iter()
            .zip(grid.edges())
            .map(|(f, e)| f.speeds.lambda() / e.distance)
            .fold(0.0, f64::max);
        let remaining = config.t_end - state.t;
        let mut dt = dt_from_rate(max_rate, config.cfl, config.dt_max);
        let last = dt >= remaining;
        if last {
            dt = remaining;
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidState(format!("time step {dt} is not positive")));
        }

        self.previous.clone_from(&self.state);

        let verticals = &self.verticals;
        let edges = &self.edges;
        let reactions = &self.reactions;
        let (m, n_c, n_s) = (layers.count(), params.n_c(), params.n_s);
        let area = grid.area();
        let st = &mut self.state;
        (
            st.mbar.par_iter_mut(),
            st.h.par_iter_mut(),
            st.q.par_chunks_mut(m),
            st.r.par_chunks_mut(m * n_c),
            st.zeta.par_chunks_mut(m * n_s),
            self.clipped.par_iter_mut(),
        )
            .into_par_iter()
            .enumerate()
            .try_for_each_init(
                || CellScratch::new(m, n_c, n_s),
                |scratch, (i, (mbar, h, q, r, zeta, clipped))| {
                    let cell = CellUpdate {
                        grid,
                        layers,
                        params,
                        reactions,
                        config: &config,
                        columns,
                        verticals,
                        edges,
                        area,
                        dt,
                    };
                    cell.apply(i, mbar, h, q, r, zeta, clipped, scratch)
                        .map_err(|e| tag_cell(e, i))
                },
            )?;

        let st = &mut self.state;
        st.t = if last { config.t_end } else { st.t + dt };
        self.steps = step;
        self.last_dt = dt;

        let mut max_q: f64 = 0.0;
        for q in &st.q {
            max_q = max_q.max(q[0].hypot(q[1]));
        }
        let min_h = st.h.iter().copied().fold(f64::INFINITY, f64::min);
        let finite = max_q.is_finite()
            && st.h.iter().all(|x| x.is_finite())
            && st.mbar.iter().all(|x| x.is_finite())
            && st.r.iter().chain(&st.zeta).all(|x| x.is_finite());
        if !finite {
            return Err(Error::BlowUp {
                step,
                what: "state contains NaN or infinity".into(),
            });
        }
        Ok(StepReport {
            step,
            t: st.t,
            dt,
            max_q,
            min_h,
            clipped: self.clipped.iter().sum(),
        })
    }
}

struct CellUpdate<'a> {
    grid: &'a Grid,
    layers: &'a LayerGeometry,
    params: &'a PhysicalParams,
    reactions: &'a ReactionSpec,
    config: &'a StepConfig,
    columns: &'a [Column],
    verticals: &'a [VerticalColumn],
    edges: &'a [EdgeFluxes],
    area: f64,
    dt: f64,
}

impl CellUpdate<'_> {
    #[allow(clippy::too_many_arguments)]
    fn apply(
        &self,
        i: usize,
        mbar: &mut f64,
        h: &mut f64,
        q: &mut [Vec2],
        r: &mut [f64],
        zeta: &mut [f64],
        clipped: &mut f64,
        s: &mut CellScratch,
    ) -> Result<()> {
        let (layers, params) = (self.layers, self.params);
        let m = layers.count();
        let (n_c, n_s) = (params.n_c(), params.n_s);
        let l = layers.fractions();
        let col = &self.columns[i];
        let dt = self.dt;
        let h_old = *h;

        let neighbors = self.grid.neighbors(i);
        assemble_exchange(
            &self.verticals[i],
            neighbors.iter().map(|nb| NeighborColumn {
                column: &self.verticals[nb.cell],
                normal: nb.normal,
                length: nb.length,
            }),
            self.area,
            params,
            &mut s.exchange,
        );

        let mut mass_sum = 0.0;
        s.q_sum.fill([0.0; 2]);
        s.r_sum.fill(0.0);
        s.z_sum.fill(0.0);
        for nb in neighbors {
            let f = &self.edges[nb.edge];
            let sign = if nb.is_lo { 1.0 } else { -1.0 };
            let len = nb.length;
            for a in 0..m {
                mass_sum += len * l[a] * (sign * f.mass[a]);
                for d in 0..2 {
                    s.q_sum[a][d] += len * (sign * f.momentum[a][d] + f.psi[a][d]);
                }
            }
            for (acc, x) in s.r_sum.iter_mut().zip(&f.solids) {
                *acc += len * (sign * x);
            }
            for (acc, x) in s.z_sum.iter_mut().zip(&f.substrates) {
                *acc += len * (sign * x);
            }
        }

        let mut source = 0.0;
        for a in 0..m {
            let rc = &mut s.rc[a * n_c..(a + 1) * n_c];
            let rs = &mut s.rs[a * n_s..(a + 1) * n_s];
            reaction_terms_into(col.c_layer(a), col.s_layer(a), self.reactions, params, rc, rs);
            let total: f64 = rc.iter().sum::<f64>() + rs.iter().sum::<f64>();
            source += l[a] * h_old * total;
        }

        let ex = &s.exchange;
        let coef = dt / self.area;
        let mbar_new = *mbar - coef * mass_sum + dt * source;
        for a in 0..m {
            for d in 0..2 {
                s.q_half[a][d] = q[a][d] - coef * s.q_sum[a][d]
                    + dt / l[a] * (ex.momentum[a + 1][d] - ex.momentum[a][d]);
            }
        }
        let tol = 1e-12 * h_old;
        let mut clip = 0.0;
        for a in 0..m {
            for k in 0..n_c {
                let idx = a * n_c + k;
                let mut v = r[idx] - coef * s.r_sum[idx]
                    + dt / l[a] * (ex.solids[(a + 1) * n_c + k] - ex.solids[a * n_c + k])
                    + dt * h_old * s.rc[idx];
                if v < 0.0 {
                    if v > -tol {
                        clip -= v;
                        v = 0.0;
                    } else {
                        return Err(Error::NegativeConcentration { what: "solids", cell: i, layer: a, value: v });
                    }
                }
                r[idx] = v;
            }
            for k in 0..n_s {
                let idx = a * n_s + k;
                let mut v = zeta[idx] - coef * s.z_sum[idx]
                    + dt / l[a] * (ex.substrates[(a + 1) * n_s + k] - ex.substrates[a * n_s + k])
                    + dt * h_old * s.rs[idx];
                if v < 0.0 {
                    if v > -tol {
                        clip -= v;
                        v = 0.0;
                    } else {
                        return Err(Error::NegativeConcentration { what: "substrate", cell: i, layer: a, value: v });
                    }
                }
                zeta[idx] = v;
            }
        }
        *clipped = clip;
        *mbar = mbar_new;
        let h_new = recover_height(mbar_new, r, layers, params)?;
        *h = h_new;

        if self.config.viscosity && m > 1 {
            recover_layer_mass_into(mbar_new, r, layers, params, &mut s.m_new);
            let mut c = [0.0f64; 8];
            for a in 0..m {
                let layer = &r[a * n_c..(a + 1) * n_c];
                let phi = if n_c <= c.len() {
                    for (x, y) in c.iter_mut().zip(layer) {
                        *x = y / h_new;
                    }
                    mixture_fields(&c[..n_c], params)?.phi
                } else {
                    let cv: Vec<f64> = layer.iter().map(|y| y / h_new).collect();
                    mixture_fields(&cv, params)?.phi
                };
                s.phi_new[a] = phi;
            }
            viscous_solve_with(&s.q_half, &s.m_new, &s.phi_new, h_old, dt, layers, params, q, &mut s.viscous)?;
        } else {
            q.copy_from_slice(&s.q_half);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::ReactionSpec;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    #[test]
    fn dt_examples() {
        assert_relative_eq!(dt_from_rate(5.0, 0.5, 1.0), 0.1, max_relative = 1e-15);
        assert_relative_eq!(dt_from_rate(10.0, 0.5, 1.0), 0.05, max_relative = 1e-15);
        assert_eq!(dt_from_rate(0.0, 0.5, 0.1), 0.1);
    }

    #[test]
    fn quiescent_single_layer_dt() {
        let p = PhysicalParams::denitrification();
        let layers = LayerGeometry::uniform(1);
        let grid = Grid::flat(3, 1, 0.5, 0.5).unwrap();
        let state =
            SimState::from_primitive(&layers, &p, &[2.0; 3], &[0.0; 6], &[0.0; 9], &[[0.0; 2]; 3]).unwrap();
        let dt = cfl_dt(&state, &grid, &layers, &p, 0.5, 10.0).unwrap();
        assert_relative_eq!(dt, 0.5 * 0.5 / (2.0 * p.g * 2.0).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn thomas_small_system() {
        let mut rhs = [1.0, 2.0, 3.0];
        solve_tridiagonal(&[1.0, 1.0], &[4.0, 4.0, 4.0], &[1.0, 1.0], &mut rhs).unwrap();
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 4.0]);
        let x = a.lu().solve(&DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        for k in 0..3 {
            assert_relative_eq!(rhs[k], x[k], max_relative = 1e-14);
        }
        assert!(matches!(
            solve_tridiagonal(&[1.0], &[0.0, 1.0], &[1.0], &mut [1.0, 1.0]),
            Err(Error::SingularSystem(0))
        ));
    }

    #[test]
    fn inviscid_or_single_layer_is_identity() {
        let mut p = PhysicalParams::denitrification();
        let layers = LayerGeometry::uniform(3);
        let q = [[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]];
        let m = [1000.0, 1001.0, 1002.0];
        let mut out = [[0.0; 2]; 3];
        p.mu_0 = 0.0;
        viscous_solve(&q, &m, &[0.01; 3], 1.0, 0.1, &layers, &p, &mut out).unwrap();
        assert_eq!(out, q);
        let one = LayerGeometry::uniform(1);
        let mut single = [[0.0; 2]];
        viscous_solve(&q[..1], &m[..1], &[0.0], 1.0, 0.1, &one, &PhysicalParams::denitrification(), &mut single)
            .unwrap();
        assert_eq!(single[0], q[0]);
    }

    #[test]
    fn viscous_solve_keeps_column_momentum() {
        let p = PhysicalParams::denitrification();
        let layers = LayerGeometry::uniform(6);
        let q: Vec<Vec2> = (0..6).map(|a| [a as f64 * 0.3 - 1.0, (a * a) as f64 * 0.1]).collect();
        let m = [1000.0; 6];
        let mut out = vec![[0.0; 2]; 6];
        viscous_solve(&q, &m, &[0.004; 6], 0.01, 5.0, &layers, &p, &mut out).unwrap();
        for d in 0..2 {
            let before: f64 = (0..6).map(|a| layers.fraction(a) * q[a][d]).sum();
            let after: f64 = (0..6).map(|a| layers.fraction(a) * out[a][d]).sum();
            assert!((before - after).abs() <= 1e-12 * before.abs().max(1.0));
        }
    }

    #[test]
    fn zero_duration_run_leaves_state() {
        let p = PhysicalParams::denitrification();
        let layers = LayerGeometry::uniform(2);
        let grid = Grid::flat(2, 2, 0.1, 0.1).unwrap();
        let state = SimState::from_primitive(&layers, &p, &[1.0; 4], &[1.0; 16], &[0.0; 24], &[[0.0; 2]; 8]).unwrap();
        let mut sim = Simulation::new(grid, layers, p, ReactionSpec::none(), StepConfig::default(), state.clone()).unwrap();
        sim.run(|_, _| Ok(())).unwrap();
        assert_eq!(sim.state(), &state);
        assert_eq!(sim.steps(), 0);
    }

    #[test]
    fn quiescent_clear_fluid_is_steady() {
        let p = PhysicalParams::denitrification();
        let layers = LayerGeometry::uniform(3);
        let grid = Grid::flat(3, 2, 0.1, 0.1).unwrap();
        let state = SimState::from_primitive(&layers, &p, &[1.0; 6], &[0.0; 36], &[0.0; 54], &[[0.0; 2]; 18]).unwrap();
        let config = StepConfig { t_end: 0.2, ..StepConfig::default() };
        let mut sim = Simulation::new(grid, layers, p, ReactionSpec::none(), config, state.clone()).unwrap();
        sim.run(|_, _| Ok(())).unwrap();
        assert_eq!(sim.state().t, 0.2);
        for (a, b) in sim.state().h.iter().zip(&state.h) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert_eq!(sim.state().mbar, state.mbar);
        assert!(sim.state().q.iter().all(|q| *q == [0.0, 0.0]));
    }

    /// Dense assembly of the same viscous system, solved with LU.
    fn dense_viscous(q: &[Vec2], m: &[f64], phi: &[f64], h: f64, dt: f64, l: &[f64], p: &PhysicalParams) -> Vec<Vec2> {
        let n = q.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for r in 0..n {
            // l_r q_r − Δt (K_{r+1/2} − K_{r−1/2}) with q = m u
            a[(r, r)] += l[r] * m[r];
            if r + 1 < n {
                let k = p.mu_0 * (1.0 - 0.5 * (phi[r] + phi[r + 1]) / 0.95).powf(-2.5) / (2.0 * (0.5 * l[r + 1] + 0.5 * l[r]) * h);
                a[(r, r + 1)] -= dt * k;
                a[(r, r)] += dt * k;
            }
            if r > 0 {
                let k = p.mu_0 * (1.0 - 0.5 * (phi[r] + phi[r - 1]) / 0.95).powf(-2.5) / (2.0 * (0.5 * l[r] + 0.5 * l[r - 1]) * h);
                a[(r, r - 1)] -= dt * k;
                a[(r, r)] += dt * k;
            }
        }
        let lu = a.lu();
        let mut out = vec![[0.0; 2]; n];
        for d in 0..2 {
            let b = DVector::from_iterator(n, (0..n).map(|r| l[r] * q[r][d]));
            let u = lu.solve(&b).unwrap();
            for r in 0..n {
                out[r][d] = m[r] * u[r];
            }
        }
        out
    }

    proptest! {
        #[test]
        fn viscous_solve_matches_dense(
            seed in proptest::collection::vec(0.0..1.0f64, 24),
            dt in 0.001..1.0f64,
            h in 0.05..2.0f64,
        ) {
            let p = PhysicalParams::denitrification();
            let n = 8;
            let raw: Vec<f64> = (0..n).map(|a| 0.5 + seed[a]).collect();
            let total: f64 = raw.iter().sum();
            let mut l: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let head: f64 = l[..n - 1].iter().sum();
            l[n - 1] = 1.0 - head;
            let layers = LayerGeometry::new(l.clone()).unwrap();
            let q: Vec<Vec2> = (0..n).map(|a| [seed[a + 8] * 4.0 - 2.0, seed[a + 16] - 0.5]).collect();
            let m: Vec<f64> = (0..n).map(|a| 900.0 + 200.0 * seed[(a + 5) % 24]).collect();
            let phi: Vec<f64> = (0..n).map(|a| 0.02 * seed[(a + 11) % 24]).collect();
            let mut out = vec![[0.0; 2]; n];
            viscous_solve(&q, &m, &phi, h, dt, &layers, &p, &mut out).unwrap();
            let want = dense_viscous(&q, &m, &phi, h, dt, &l, &p);
            for a in 0..n {
                for d in 0..2 {
                    prop_assert!((out[a][d] - want[a][d]).abs() <= 1e-12 * want[a][d].abs().max(1e-3));
                }
            }
        }
    }
}
