//! Diagnostic vertical velocity w, reconstructed from two consecutive states.
//!
//! Within layer α, w is affine in z: it starts at `w_plus[α]` on the lower
//! interface and changes at rate `slope[α]`, reaching `w_minus[α]` on the upper
//! interface. Across an interface the jump keeps the relative mass flux
//! ρ (w − ∂_t z) continuous.

use crate::error::{Error, Result};
use crate::geometry::{Column, Grid, LayerGeometry, PhysicalParams, SimState, Vec2};
use crate::kinetics::{reaction_terms, total_reactions, ReactionSpec};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerticalProfile {
    /// w just above the lower interface of each layer, m/s.
    pub w_plus: Vec<f64>,
    /// w just below the upper interface of each layer, m/s.
    pub w_minus: Vec<f64>,
    /// ∂w/∂z inside each layer, 1/s.
    pub slope: Vec<f64>,
    /// Elevation of the lower interface and thickness of each layer at the old time level.
    pub z_base: Vec<f64>,
    pub thickness: Vec<f64>,
}

impl VerticalProfile {
    /// w at elevation `z` inside layer `a`.
    pub fn at(&self, a: usize, z: f64) -> f64 {
        self.w_plus[a] + self.slope[a] * (z - self.z_base[a])
    }

    /// w at the midpoint of layer `a`.
    pub fn midpoint(&self, a: usize) -> f64 {
        self.w_plus[a] + self.slope[a] * (0.5 * self.thickness[a])
    }
}

/// Everything the reconstruction needs besides the two states.
pub struct Model<'a> {
    pub grid: &'a Grid,
    pub layers: &'a LayerGeometry,
    pub params: &'a PhysicalParams,
    pub reactions: &'a ReactionSpec,
}

fn check_pair(prev: &SimState, next: &SimState, grid: &Grid) -> Result<()> {
    let same = prev.n_cells() == next.n_cells()
        && prev.n_layers == next.n_layers
        && prev.n_c == next.n_c
        && prev.n_s == next.n_s
        && prev.n_cells() == grid.n_cells();
    if !same {
        return Err(Error::MismatchedStates(format!(
            "{} vs {} cells, {} vs {} layers on a grid of {} cells",
            prev.n_cells(),
            next.n_cells(),
            prev.n_layers,
            next.n_layers,
            grid.n_cells()
        )));
    }
    Ok(())
}

/// Centred difference of a cell field along one axis, one-sided next to walls
/// and zero when the axis has a single cell.
fn axis_derivative(field: &dyn Fn(usize) -> f64, grid: &Grid, i: usize, axis: usize) -> f64 {
    let (ix, iy) = grid.cell_coords(i);
    let (pos, len, h) = if axis == 0 { (ix, grid.nx, grid.dx) } else { (iy, grid.ny, grid.dy) };
    if len < 2 {
        return 0.0;
    }
    let at = |p: usize| {
        if axis == 0 {
            field(grid.cell_index(p, iy))
        } else {
            field(grid.cell_index(ix, p))
        }
    };
    if pos == 0 {
        (at(1) - at(0)) / h
    } else if pos + 1 == len {
        (at(pos) - at(pos - 1)) / h
    } else {
        (at(pos + 1) - at(pos - 1)) / (2.0 * h)
    }
}

fn gradient(field: &dyn Fn(usize) -> f64, grid: &Grid, i: usize) -> Vec2 {
    [axis_derivative(field, grid, i, 0), axis_derivative(field, grid, i, 1)]
}

/// Vertical profile of cell `cell` between `prev` and `next`, a step `dt` apart.
pub fn vertical_velocity(
    prev: &SimState,
    next: &SimState,
    dt: f64,
    cell: usize,
    model: &Model<'_>,
) -> Result<VerticalProfile> {
    check_pair(prev, next, model.grid)?;
    let old = Column::from_state(prev, model.grid, model.layers, model.params, cell)?;
    let new = Column::from_state(next, model.grid, model.layers, model.params, cell)?;
    profile_from_columns(prev, next, &old, &new, dt, cell, model)
}

/// Profiles of every cell.
pub fn vertical_velocity_field(
    prev: &SimState,
    next: &SimState,
    dt: f64,
    model: &Model<'_>,
) -> Result<Vec<VerticalProfile>> {
    check_pair(prev, next, model.grid)?;
    use rayon::prelude::*;
    (0..model.grid.n_cells())
        .into_par_iter()
        .map(|i| vertical_velocity(prev, next, dt, i, model))
        .collect()
}

fn interface_elevation<'s>(state: &'s SimState, zb: &'s [f64], cum: f64) -> impl Fn(usize) -> f64 + 's {
    move |j| zb[j] + state.h[j] * cum
}

fn profile_from_columns(
    prev: &SimState,
    next: &SimState,
    old: &Column,
    new: &Column,
    dt: f64,
    i: usize,
    model: &Model<'_>,
) -> Result<VerticalProfile> {
    let (grid, layers, params) = (model.grid, model.layers, model.params);
    let m = layers.count();
    let n_c = prev.n_c;
    let zb = grid.zb();

    let mut out = VerticalProfile {
        w_plus: vec![0.0; m],
        w_minus: vec![0.0; m],
        slope: vec![0.0; m],
        z_base: (0..m).map(|a| layers.interface_z(old.zb, old.h, a)).collect(),
        thickness: (0..m).map(|a| layers.fraction(a) * old.h).collect(),
    };

    let grad_zb = gradient(&|j| zb[j], grid, i);
    let mut w = old.vel[0][0] * grad_zb[0] + old.vel[0][1] * grad_zb[1];
    for a in 0..m {
        if a > 0 {
            // jump across interface a between layers a−1 and a
            let z_old = interface_elevation(prev, zb, layers.cumulative(a));
            let z_new = interface_elevation(next, zb, layers.cumulative(a));
            let dz = (z_new(i) - z_old(i)) / dt;
            let grad_z = gradient(&z_old, grid, i);
            let (rl, ru) = (new.rho[a - 1], new.rho[a]);
            let flux_jump = [
                ru * old.vel[a][0] - rl * old.vel[a - 1][0],
                ru * old.vel[a][1] - rl * old.vel[a - 1][1],
            ];
            w = ((ru - rl) * dz + flux_jump[0] * grad_z[0] + flux_jump[1] * grad_z[1] + rl * w) / ru;
        }
        out.w_plus[a] = w;

        let d_rho = (new.rho[a] - old.rho[a]) / dt;
        let qx = |j: usize| prev.q[j * m + a][0] / prev.h[j];
        let qy = |j: usize| prev.q[j * m + a][1] / prev.h[j];
        let div = axis_derivative(&qx, grid, i, 0) + axis_derivative(&qy, grid, i, 1);
        let (rc, rs) = reaction_terms(old.c_layer(a), old.s_layer(a), model.reactions, params);
        let (_, _, r_rho) = total_reactions(&rc, &rs);
        debug_assert_eq!(rc.len(), n_c);
        let slope = -(d_rho + div - r_rho) / new.rho[a];
        out.slope[a] = slope;
        w += out.thickness[a] * slope;
        out.w_minus[a] = w;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepper::{Simulation, StepConfig};

    fn setup(n: usize, c: f64) -> (Grid, LayerGeometry, PhysicalParams, SimState) {
        let p = PhysicalParams::denitrification();
        let layers = LayerGeometry::uniform(n);
        let grid = Grid::flat(2, 2, 0.1, 0.1).unwrap();
        let cells = 4;
        let state = SimState::from_primitive(
            &layers,
            &p,
            &vec![1.5; cells],
            &vec![c; cells * n * 2],
            &vec![0.0; cells * n * 3],
            &vec![[0.0; 2]; cells * n],
        )
        .unwrap();
        (grid, layers, p, state)
    }

    #[test]
    fn quiescent_fluid_has_no_vertical_motion() {
        let (grid, layers, p, state) = setup(4, 0.0);
        let reactions = ReactionSpec::none();
        let model = Model { grid: &grid, layers: &layers, params: &p, reactions: &reactions };
        let prof = vertical_velocity(&state, &state, 0.1, 0, &model).unwrap();
        assert!(prof.w_plus.iter().chain(&prof.w_minus).chain(&prof.slope).all(|&x| x == 0.0));
    }

    #[test]
    fn profile_is_affine_within_layers() {
        let (grid, layers, p, mut next) = setup(3, 2.0);
        let prev = next.clone();
        next.r.iter_mut().enumerate().for_each(|(k, r)| *r *= 1.0 + 0.01 * k as f64);
        let reactions = ReactionSpec::none();
        let model = Model { grid: &grid, layers: &layers, params: &p, reactions: &reactions };
        let prof = vertical_velocity(&prev, &next, 0.1, 0, &model).unwrap();
        for a in 0..3 {
            let z0 = prof.z_base[a];
            let t = prof.thickness[a];
            let (w0, w1, w2) = (prof.at(a, z0), prof.at(a, z0 + 0.5 * t), prof.at(a, z0 + t));
            assert!((w1 - 0.5 * (w0 + w2)).abs() <= 1e-14 * w0.abs().max(w2.abs()).max(1e-30));
            assert!((w2 - prof.w_minus[a]).abs() <= 1e-14 * w2.abs().max(1e-30));
            assert_eq!(prof.midpoint(a), w1);
        }
    }

    #[test]
    fn mismatched_states_are_rejected() {
        let (grid, layers, p, state) = setup(3, 0.0);
        let (_, _, _, other) = setup(4, 0.0);
        let reactions = ReactionSpec::none();
        let model = Model { grid: &grid, layers: &layers, params: &p, reactions: &reactions };
        assert!(matches!(
            vertical_velocity(&state, &other, 0.1, 0, &model),
            Err(Error::MismatchedStates(_))
        ));
    }

    #[test]
    fn settling_column_surface_velocity_matches_height_change() {
        let (grid, layers, p, state) = setup(6, 3.0);
        let reactions = ReactionSpec::none();
        let config = StepConfig { t_end: 1.0, ..StepConfig::default() };
        let mut sim = Simulation::new(grid.clone(), layers.clone(), p.clone(), reactions.clone(), config, state).unwrap();
        sim.step().unwrap();
        let model = Model { grid: &grid, layers: &layers, params: &p, reactions: &reactions };
        let dt = sim.last_dt();
        let prof = vertical_velocity(sim.previous(), sim.state(), dt, 0, &model).unwrap();
        let dh = (sim.state().h[0] - sim.previous().h[0]) / dt;
        // the density rate is a difference of O(10³) values over a short step
        let w_scale = prof.w_plus.iter().map(|w| w.abs()).fold(0.0, f64::max);
        assert!(w_scale > 0.0);
        assert!((prof.w_minus[5] - dh).abs() <= 1e-7 * w_scale);
        // settling solids make the lower layers denser
        assert!(prof.slope[0] < 0.0);
    }
}
