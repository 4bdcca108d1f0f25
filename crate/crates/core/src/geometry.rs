//! Horizontal grid, layer geometry, the evolving state and the algebraic
//! recovery of derived quantities (layer masses, column height, mixture
//! density, volume fractions and water concentration).
//!
//! Layers are indexed from the bottom, `0..M`. Interfaces are indexed
//! `0..=M`: interface `k` is the bottom of layer `k`, so interface `0` is the
//! bed and interface `M` the free surface.

use crate::error::{Error, Result, Violation};

pub type Vec2 = [f64; 2];

/// Columns thinner than this are treated as degenerate (dry states are not supported).
pub const H_FLOOR: f64 = 1e-8;

/// Material constants shared by every closure of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Solid densities ϱ_i, kg/m³. Their count fixes the number of solid species.
    pub varrho: Vec<f64>,
    /// Fluid density ϱ_f, kg/m³.
    pub varrho_f: f64,
    /// Dimensionless size factors δ_i of the settling velocity.
    pub delta: Vec<f64>,
    /// Number of dissolved substrates.
    pub n_s: usize,
    /// d₁²/(18 μ_f), m³·s/kg.
    pub settling_scale: f64,
    /// Gravitational acceleration, m/s².
    pub g: f64,
    pub phi_max: f64,
    pub phi_c: f64,
    /// Stress modulus σ₀, m²/s².
    pub sigma_0: f64,
    /// Reference mixture viscosity μ₀, Pa·s.
    pub mu_0: f64,
}

impl PhysicalParams {
    /// Two solid species and three substrates with the denitrification-vessel values.
    pub fn denitrification() -> Self {
        Self {
            varrho: vec![2000.0, 2000.0],
            varrho_f: 998.0,
            delta: vec![4e-4, 2.5e-4],
            n_s: 3,
            settling_scale: 1e-4,
            g: 9.81,
            phi_max: 0.02,
            phi_c: 0.003,
            sigma_0: 0.02,
            mu_0: 0.01,
        }
    }

    pub fn n_c(&self) -> usize {
        self.varrho.len()
    }

    /// Largest admissible total solids concentration, min_i ϱ_i · φ_max.
    pub fn c_max(&self) -> f64 {
        self.varrho.iter().copied().fold(f64::INFINITY, f64::min) * self.phi_max
    }

    /// (ϱ_l − ϱ_f)/ϱ_l for every species.
    pub(crate) fn buoyancy_weight(&self, l: usize) -> f64 {
        (self.varrho[l] - self.varrho_f) / self.varrho[l]
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let finite = |v: f64| v.is_finite();
        if self.varrho.is_empty() {
            out.push(Violation::new("physics.varrho", "at least one solid species is required"));
        }
        if self.delta.len() != self.varrho.len() {
            out.push(Violation::new(
                "physics.delta",
                format!(
                    "expected {} entries (one per solid species), got {}",
                    self.varrho.len(),
                    self.delta.len()
                ),
            ));
        }
        if !(finite(self.varrho_f) && self.varrho_f > 0.0) {
            out.push(Violation::new("physics.varrho_f", "must be positive and finite"));
        }
        for (i, &v) in self.varrho.iter().enumerate() {
            if !(finite(v) && v > self.varrho_f) {
                out.push(Violation::new(
                    "physics.varrho",
                    format!("entry {} = {v} must exceed the fluid density", i + 1),
                ));
            }
        }
        for (i, &d) in self.delta.iter().enumerate() {
            if !(finite(d) && d > 0.0) {
                out.push(Violation::new(
                    "physics.delta",
                    format!("entry {} = {d} must be positive", i + 1),
                ));
            }
        }
        if !(finite(self.settling_scale) && self.settling_scale >= 0.0) {
            out.push(Violation::new("physics.settling_scale", "must be non-negative"));
        }
        if !(finite(self.g) && self.g > 0.0) {
            out.push(Violation::new("physics.g", "must be positive"));
        }
        if !(finite(self.phi_max) && self.phi_max > 0.0 && self.phi_max < 1.0) {
            out.push(Violation::new("material.phi_max", "must lie in (0, 1)"));
        }
        if !(finite(self.phi_c) && self.phi_c > 0.0 && self.phi_c < self.phi_max) {
            out.push(Violation::new("material.phi_c", "must lie in (0, phi_max)"));
        }
        if !(finite(self.sigma_0) && self.sigma_0 >= 0.0) {
            out.push(Violation::new("material.sigma_0", "must be non-negative"));
        }
        if !(finite(self.mu_0) && self.mu_0 >= 0.0) {
            out.push(Violation::new("material.mu_0", "must be non-negative"));
        }
        out
    }
}

/// Volume fractions and density of the mixture at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixture {
    pub phi: f64,
    pub phi_f: f64,
    pub rho: f64,
}

/// φ = Σ c_i/ϱ_i, φ_f = 1 − φ and ρ = ϱ_f φ_f + Σ c_i.
pub fn mixture_fields(c: &[f64], params: &PhysicalParams) -> Result<Mixture> {
    let mut phi = 0.0;
    let mut c_tot = 0.0;
    for (ci, rho_i) in c.iter().zip(&params.varrho) {
        phi += ci / rho_i;
        c_tot += ci;
    }
    if !(phi <= 1.0) {
        return Err(Error::InvalidState(format!(
            "solids volume fraction {phi} exceeds one"
        )));
    }
    let phi_f = 1.0 - phi;
    Ok(Mixture {
        phi,
        phi_f,
        rho: params.varrho_f * phi_f + c_tot,
    })
}

/// s_w = ϱ_f φ_f(c) − Σ_l s_l.
pub fn water_concentration(c: &[f64], s: &[f64], params: &PhysicalParams) -> Result<f64> {
    let mix = mixture_fields(c, params)?;
    let s_w = params.varrho_f * mix.phi_f - s.iter().sum::<f64>();
    if s_w < -1e-12 * params.varrho_f {
        return Err(Error::NegativeWater(s_w));
    }
    Ok(s_w)
}

/// Per-species Σ_β l_β (ϱ_l−ϱ_f)/ϱ_l r_β^(l), summed over species.
fn weighted_solids(r: &[f64], layers: &LayerGeometry, params: &PhysicalParams) -> f64 {
    let n_c = params.n_c();
    let mut total = 0.0;
    for (a, l_a) in layers.fractions().iter().enumerate() {
        for l in 0..n_c {
            total += params.buoyancy_weight(l) * l_a * r[a * n_c + l];
        }
    }
    total
}

/// Layer masses m_α from the column mass m̄ and the layer solids r (layer-major,
/// `r[α·n_c + l]`).
pub fn recover_layer_mass(
    mbar: f64,
    r: &[f64],
    layers: &LayerGeometry,
    params: &PhysicalParams,
) -> Vec<f64> {
    let mut m = vec![0.0; layers.count()];
    recover_layer_mass_into(mbar, r, layers, params, &mut m);
    m
}

pub(crate) fn recover_layer_mass_into(
    mbar: f64,
    r: &[f64],
    layers: &LayerGeometry,
    params: &PhysicalParams,
    out: &mut [f64],
) {
    let n_c = params.n_c();
    let l_sum = layers.sum();
    let mut rbar = [0.0f64; 8];
    let mut rbar_vec;
    let rbar: &mut [f64] = if n_c <= rbar.len() {
        &mut rbar[..n_c]
    } else {
        rbar_vec = vec![0.0; n_c];
        &mut rbar_vec
    };
    for (a, l_a) in layers.fractions().iter().enumerate() {
        for l in 0..n_c {
            rbar[l] += l_a * r[a * n_c + l];
        }
    }
    for (a, m_a) in out.iter_mut().enumerate() {
        let mut corr = 0.0;
        for l in 0..n_c {
            corr += params.buoyancy_weight(l) * (l_sum * r[a * n_c + l] - rbar[l]);
        }
        *m_a = mbar + corr;
    }
}

/// Column height h = (m̄ − Σ_β Σ_l (ϱ_l−ϱ_f)/ϱ_l l_β r_β^(l)) / ϱ_f.
pub fn recover_height(
    mbar: f64,
    r: &[f64],
    layers: &LayerGeometry,
    params: &PhysicalParams,
) -> Result<f64> {
    let h = (mbar - weighted_solids(r, layers, params)) / params.varrho_f;
    if !(h > H_FLOOR) {
        return Err(Error::DegenerateColumn { cell: None, h });
    }
    Ok(h)
}

/// Fixed vertical partition of every column into fractions l_α of the height.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGeometry {
    fractions: Vec<f64>,
    below: Vec<f64>,
    above: Vec<f64>,
}

impl LayerGeometry {
    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "at least one layer");
        Self::from_fractions_unchecked(vec![1.0 / m as f64; m])
    }

    pub fn new(fractions: Vec<f64>) -> Result<Self> {
        let mut bad = Vec::new();
        if fractions.is_empty() {
            bad.push(Violation::new("layers.l", "at least one layer is required"));
        }
        if fractions.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            bad.push(Violation::new("layers.l", "fractions must be positive"));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-14 {
            bad.push(Violation::new(
                "layers.l",
                format!("fractions sum to {sum}, expected 1"),
            ));
        }
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        Ok(Self::from_fractions_unchecked(fractions))
    }

    fn from_fractions_unchecked(fractions: Vec<f64>) -> Self {
        let m = fractions.len();
        let mut below = vec![0.0; m + 1];
        for a in 0..m {
            below[a + 1] = below[a] + fractions[a];
        }
        let mut above = vec![0.0; m];
        for a in (0..m.saturating_sub(1)).rev() {
            above[a] = above[a + 1] + fractions[a + 1];
        }
        Self {
            fractions,
            below,
            above,
        }
    }

    pub fn count(&self) -> usize {
        self.fractions.len()
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn fraction(&self, a: usize) -> f64 {
        self.fractions[a]
    }

    /// Σ_{β<k} l_β, the relative height of interface `k`.
    pub fn cumulative(&self, k: usize) -> f64 {
        self.below[k]
    }

    /// Σ_{β>a} l_β.
    pub fn above(&self, a: usize) -> f64 {
        self.above[a]
    }

    pub fn sum(&self) -> f64 {
        self.below[self.count()]
    }

    /// Elevation of interface `k` over a column with bed `zb` and height `h`.
    pub fn interface_z(&self, zb: f64, h: f64, k: usize) -> f64 {
        zb + h * self.below[k]
    }

    pub fn midpoint_z(&self, zb: f64, h: f64, a: usize) -> f64 {
        zb + h * (self.below[a] + 0.5 * self.fractions[a])
    }
}

/// An edge between two horizontally adjacent cells; `normal` points from `lo` to `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub lo: usize,
    pub hi: usize,
    pub normal: Vec2,
    pub length: f64,
    pub distance: f64,
}

/// One entry of a cell's neighbour list J_i.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub cell: usize,
    pub edge: usize,
    /// Unit normal pointing from this cell towards `cell`.
    pub normal: Vec2,
    pub length: f64,
    pub distance: f64,
    /// True if this cell is the edge's `lo` side.
    pub is_lo: bool,
}

/// Uniform Cartesian partition of the horizontal domain `(0, nx·dx) × (0, ny·dy)`.
///
/// Cells are numbered `ix + nx·iy`. Domain-boundary edges are walls and are
/// simply absent from the neighbour lists.
#[derive(Debug, Clone)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    zb: Vec<f64>,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<Neighbor>>,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, zb: Vec<f64>) -> Result<Self> {
        let mut bad = Vec::new();
        if nx == 0 || ny == 0 {
            bad.push(Violation::new("grid", "nx and ny must be positive"));
        }
        if !(dx.is_finite() && dx > 0.0 && dy.is_finite() && dy > 0.0) {
            bad.push(Violation::new("grid", "dx and dy must be positive"));
        }
        if zb.len() != nx * ny {
            bad.push(Violation::new(
                "bathymetry",
                format!("expected {} samples, got {}", nx * ny, zb.len()),
            ));
        }
        if zb.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
            bad.push(Violation::new("bathymetry", "samples must be finite and non-negative"));
        }
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }

        let mut edges = Vec::with_capacity(2 * nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let i = ix + nx * iy;
                if ix + 1 < nx {
                    edges.push(Edge {
                        lo: i,
                        hi: i + 1,
                        normal: [1.0, 0.0],
                        length: dy,
                        distance: dx,
                    });
                }
                if iy + 1 < ny {
                    edges.push(Edge {
                        lo: i,
                        hi: i + nx,
                        normal: [0.0, 1.0],
                        length: dx,
                        distance: dy,
                    });
                }
            }
        }
        let mut neighbors = vec![Vec::with_capacity(4); nx * ny];
        for (e, edge) in edges.iter().enumerate() {
            neighbors[edge.lo].push(Neighbor {
                cell: edge.hi,
                edge: e,
                normal: edge.normal,
                length: edge.length,
                distance: edge.distance,
                is_lo: true,
            });
            neighbors[edge.hi].push(Neighbor {
                cell: edge.lo,
                edge: e,
                normal: [-edge.normal[0], -edge.normal[1]],
                length: edge.length,
                distance: edge.distance,
                is_lo: false,
            });
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            zb,
            edges,
            neighbors,
        })
    }

    /// Samples `zb(x1, x2)` at the cell centres.
    pub fn with_bathymetry(
        nx: usize,
        ny: usize,
        dx: f64,
        dy: f64,
        zb: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let samples = (0..nx * ny)
            .map(|i| {
                let (ix, iy) = (i % nx, i / nx);
                zb((ix as f64 + 0.5) * dx, (iy as f64 + 0.5) * dy)
            })
            .collect();
        Self::new(nx, ny, dx, dy, samples)
    }

    pub fn flat(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        Self::new(nx, ny, dx, dy, vec![0.0; nx * ny])
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_index(&self, ix: usize, iy: usize) -> usize {
        ix + self.nx * iy
    }

    pub fn cell_coords(&self, i: usize) -> (usize, usize) {
        (i % self.nx, i / self.nx)
    }

    pub fn center(&self, i: usize) -> Vec2 {
        let (ix, iy) = self.cell_coords(i);
        [(ix as f64 + 0.5) * self.dx, (iy as f64 + 0.5) * self.dy]
    }

    pub fn area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn zb(&self) -> &[f64] {
        &self.zb
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbors[i]
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.dx == other.dx && self.dy == other.dy
    }
}

/// Conserved unknowns at one time level.
///
/// Per-layer arrays are cell-major then layer-major: `q[i·M + α]`,
/// `r[(i·M + α)·n_c + l]`, `zeta[(i·M + α)·n_s + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub n_layers: usize,
    pub n_c: usize,
    pub n_s: usize,
    /// Column mass m̄ = Σ l_β m_β, kg/m².
    pub mbar: Vec<f64>,
    /// Column height, m.
    pub h: Vec<f64>,
    /// Layer momentum ρ_α h ṽ_α, kg/(m·s).
    pub q: Vec<Vec2>,
    /// Layer solids c h, kg/m².
    pub r: Vec<f64>,
    /// Layer substrates s h, kg/m².
    pub zeta: Vec<f64>,
}

impl SimState {
    pub fn n_cells(&self) -> usize {
        self.h.len()
    }

    /// Builds a state from primitive fields: heights per cell, layer
    /// concentrations `c`, `s` and horizontal velocities (same layouts as the
    /// conserved arrays).
    pub fn from_primitive(
        layers: &LayerGeometry,
        params: &PhysicalParams,
        h: &[f64],
        c: &[f64],
        s: &[f64],
        vel: &[Vec2],
    ) -> Result<Self> {
        let n = h.len();
        let m_layers = layers.count();
        let (n_c, n_s) = (params.n_c(), params.n_s);
        if c.len() != n * m_layers * n_c || s.len() != n * m_layers * n_s || vel.len() != n * m_layers
        {
            return Err(Error::InvalidState("primitive field sizes do not match".into()));
        }
        let mut state = SimState {
            t: 0.0,
            n_layers: m_layers,
            n_c,
            n_s,
            mbar: vec![0.0; n],
            h: h.to_vec(),
            q: vec![[0.0; 2]; n * m_layers],
            r: c.iter().enumerate().map(|(k, ck)| ck * h[k / (m_layers * n_c)]).collect(),
            zeta: s.iter().enumerate().map(|(k, sk)| sk * h[k / (m_layers * n_s)]).collect(),
        };
        for i in 0..n {
            if !(h[i] > H_FLOOR) {
                return Err(Error::DegenerateColumn { cell: Some(i), h: h[i] });
            }
            let mut mbar = 0.0;
            for a in 0..m_layers {
                let ia = i * m_layers + a;
                let mix = mixture_fields(&c[ia * n_c..(ia + 1) * n_c], params)?;
                let m = mix.rho * h[i];
                mbar += layers.fraction(a) * m;
                state.q[ia] = [m * vel[ia][0], m * vel[ia][1]];
            }
            state.mbar[i] = mbar;
        }
        Ok(state)
    }

    pub fn q_column(&self, i: usize) -> &[Vec2] {
        &self.q[i * self.n_layers..(i + 1) * self.n_layers]
    }

    pub fn r_column(&self, i: usize) -> &[f64] {
        let w = self.n_layers * self.n_c;
        &self.r[i * w..(i + 1) * w]
    }

    pub fn zeta_column(&self, i: usize) -> &[f64] {
        let w = self.n_layers * self.n_s;
        &self.zeta[i * w..(i + 1) * w]
    }

    /// Σ_i |V| Σ_α l_α r_{i,α}^(k) for every solid species.
    pub fn solid_mass(&self, grid: &Grid, layers: &LayerGeometry) -> Vec<f64> {
        Self::integrate(&self.r, self.n_c, self.n_layers, grid, layers)
    }

    pub fn substrate_mass(&self, grid: &Grid, layers: &LayerGeometry) -> Vec<f64> {
        Self::integrate(&self.zeta, self.n_s, self.n_layers, grid, layers)
    }

    /// Σ_i |V| m̄_i.
    pub fn total_mass(&self, grid: &Grid) -> f64 {
        self.mbar.iter().sum::<f64>() * grid.area()
    }

    fn integrate(
        field: &[f64],
        width: usize,
        m_layers: usize,
        grid: &Grid,
        layers: &LayerGeometry,
    ) -> Vec<f64> {
        let mut out = vec![0.0; width];
        for (ia, chunk) in field.chunks(width).enumerate() {
            let l_a = layers.fraction(ia % m_layers);
            for (o, v) in out.iter_mut().zip(chunk) {
                *o += l_a * v;
            }
        }
        out.iter_mut().for_each(|o| *o *= grid.area());
        out
    }
}

/// Derived per-layer fields of one cell at one time level.
#[derive(Debug, Clone, Default)]
pub struct Column {
    pub h: f64,
    pub zb: f64,
    pub m: Vec<f64>,
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_f: Vec<f64>,
    pub q: Vec<Vec2>,
    /// Horizontal velocity q/m.
    pub vel: Vec<Vec2>,
    /// Concentrations r/h and s/h, layer-major.
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    /// Mass fractions r/m and ζ/m, layer-major.
    pub r_per_m: Vec<f64>,
    pub zeta_per_m: Vec<f64>,
}

impl Column {
    pub fn from_state(
        state: &SimState,
        grid: &Grid,
        layers: &LayerGeometry,
        params: &PhysicalParams,
        i: usize,
    ) -> Result<Self> {
        let mut col = Column::default();
        col.fill(state, grid, layers, params, i)?;
        Ok(col)
    }

    pub fn n_layers(&self) -> usize {
        self.m.len()
    }

    pub fn fill(
        &mut self,
        state: &SimState,
        grid: &Grid,
        layers: &LayerGeometry,
        params: &PhysicalParams,
        i: usize,
    ) -> Result<()> {
        let m_layers = state.n_layers;
        let (n_c, n_s) = (state.n_c, state.n_s);
        let resize = |v: &mut Vec<f64>, n: usize| {
            v.clear();
            v.resize(n, 0.0);
        };
        resize(&mut self.m, m_layers);
        resize(&mut self.rho, m_layers);
        resize(&mut self.phi, m_layers);
        resize(&mut self.phi_f, m_layers);
        resize(&mut self.c, m_layers * n_c);
        resize(&mut self.s, m_layers * n_s);
        resize(&mut self.r_per_m, m_layers * n_c);
        resize(&mut self.zeta_per_m, m_layers * n_s);
        self.q.clear();
        self.q.extend_from_slice(state.q_column(i));
        self.vel.clear();
        self.vel.resize(m_layers, [0.0; 2]);

        let h = state.h[i];
        if !(h > H_FLOOR) {
            return Err(Error::DegenerateColumn { cell: Some(i), h });
        }
        self.h = h;
        self.zb = grid.zb()[i];
        let r = state.r_column(i);
        let zeta = state.zeta_column(i);
        recover_layer_mass_into(state.mbar[i], r, layers, params, &mut self.m);
        for a in 0..m_layers {
            let m = self.m[a];
            if !(m > 0.0) {
                return Err(Error::DegenerateColumn { cell: Some(i), h });
            }
            self.rho[a] = m / h;
            self.vel[a] = [self.q[a][0] / m, self.q[a][1] / m];
            for l in 0..n_c {
                self.c[a * n_c + l] = r[a * n_c + l] / h;
                self.r_per_m[a * n_c + l] = r[a * n_c + l] / m;
            }
            for l in 0..n_s {
                self.s[a * n_s + l] = zeta[a * n_s + l] / h;
                self.zeta_per_m[a * n_s + l] = zeta[a * n_s + l] / m;
            }
            let mix = mixture_fields(&self.c[a * n_c..(a + 1) * n_c], params)?;
            self.phi[a] = mix.phi;
            self.phi_f[a] = mix.phi_f;
        }
        Ok(())
    }

    pub fn c_layer(&self, a: usize) -> &[f64] {
        let n_c = self.c.len() / self.m.len();
        &self.c[a * n_c..(a + 1) * n_c]
    }

    pub fn s_layer(&self, a: usize) -> &[f64] {
        let n_s = self.s.len() / self.m.len();
        &self.s[a * n_s..(a + 1) * n_s]
    }
}
