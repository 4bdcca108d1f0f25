//! Run configuration: a TOML document whose first line is the version header
//! `# mlswr-config v1`.
//!
//! ```text
//! # mlswr-config v1
//! [grid]
//! nx = 40
//! ny = 40
//! dx = 0.1
//! dy = 0.15
//!
//! [layers]
//! count = 40
//! l = "uniform"            # or an explicit list of fractions summing to 1
//!
//! [physics]                # densities kg/m³, g m/s², settling_scale m³·s/kg
//! varrho = [2000.0, 2000.0]
//! varrho_f = 998.0
//! delta = [4e-4, 2.5e-4]
//! n_s = 3
//! settling_scale = 1e-4
//! g = 9.81
//!
//! [material]
//! phi_max = 0.02
//! phi_c = 0.003
//! sigma_0 = 0.02
//! mu_0 = 0.01
//!
//! [reactions]
//! preset = "denitrification"   # or "none"; kinetic constants may be overridden
//!
//! [bathymetry]
//! preset = "inclined"          # "flat", "inclined" or "gaussian"
//!
//! [initial]
//! h = 1.5                      # with lake_at_rest = true: free-surface elevation
//! c = [3.0, 2.5]
//! s = [0.006, 0.0009, 0.0]
//!
//! [time]
//! cfl = 0.5
//! t_end = 40.0
//! dt_max = 0.1
//! snapshot_every = 200         # steps; 0 writes only the first and last
//!
//! [output]
//! directory = "out/sim1"
//! formats = ["csv", "vtk"]
//! ```
//!
//! Optional keys: `time.viscosity` (default true), `time.compression_spacing`
//! (`"squared"` or `"midpoint"`), `initial.lake_at_rest` (default false) and
//! the kinetic overrides `mu_max`, `decay`, `f_p`, `yield_coef`, `yield_bar`,
//! `kappa_1`, `kappa_2`, `eps_cutoff` in `[reactions]`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::geometry::{Grid, LayerGeometry, PhysicalParams, SimState, H_FLOOR};
use crate::io::bathymetry::Bathymetry;
use crate::kinetics::{Denitrification, ReactionSpec};
use crate::stepper::{Simulation, StepConfig};
use crate::vertical_flux::CompressionSpacing;

pub const HEADER: &str = "# mlswr-config v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub layers: LayersConfig,
    pub physics: PhysicsConfig,
    pub material: MaterialConfig,
    pub reactions: ReactionsConfig,
    pub bathymetry: BathymetryConfig,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerFractions {
    /// Only `"uniform"` is accepted.
    Named(String),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayersConfig {
    pub count: usize,
    pub l: LayerFractions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub varrho: Vec<f64>,
    pub varrho_f: f64,
    pub delta: Vec<f64>,
    pub n_s: usize,
    pub settling_scale: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub phi_max: f64,
    pub phi_c: f64,
    pub sigma_0: f64,
    pub mu_0: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionsConfig {
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yield_coef: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yield_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathymetryConfig {
    pub preset: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub h: f64,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    #[serde(default)]
    pub lake_at_rest: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub dt_max: f64,
    pub snapshot_every: u64,
    #[serde(default = "yes")]
    pub viscosity: bool,
    #[serde(default)]
    pub compression_spacing: CompressionSpacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Vtk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a configuration, reporting every violation at once.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let first = text.lines().next().unwrap_or("").trim();
    if first != HEADER {
        let message = match first.strip_prefix("# mlswr-config ") {
            Some(v) => format!("unsupported config version `{v}`"),
            None => format!("expected the header line `{HEADER}`"),
        };
        return Err(Error::Syntax { line: 1, message });
    }
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Syntax {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    config.check()?;
    Ok(config)
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl RunConfig {
    /// Serializes to the text format; `parse_config` of the result gives back `self`.
    pub fn to_text(&self) -> String {
        let body = toml::to_string(self).expect("configuration values are always representable");
        format!("{HEADER}\n{body}")
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let g = &self.grid;
        if g.nx == 0 || g.ny == 0 {
            out.push(Violation::new("grid", "nx and ny must be at least 1"));
        }
        if !positive(g.dx) {
            out.push(Violation::new("grid.dx", "must be positive"));
        }
        if !positive(g.dy) {
            out.push(Violation::new("grid.dy", "must be positive"));
        }

        match self.layer_geometry() {
            Err(Error::Validation(v)) => out.extend(v),
            Err(e) => out.push(Violation::new("layers", e.to_string())),
            Ok(_) => {}
        }

        let params = self.params();
        out.extend(params.validate());

        let r = &self.reactions;
        match r.preset.as_str() {
            "none" => {}
            "denitrification" => {
                if params.n_c() != 2 || params.n_s != 3 {
                    out.push(Violation::new(
                        "reactions.preset",
                        "denitrification needs 2 solid species and 3 substrates",
                    ));
                }
            }
            other => out.push(Violation::new("reactions.preset", format!("unknown preset `{other}`"))),
        }
        let overrides = [
            ("mu_max", r.mu_max),
            ("decay", r.decay),
            ("f_p", r.f_p),
            ("kappa_1", r.kappa_1),
            ("kappa_2", r.kappa_2),
            ("eps_cutoff", r.eps_cutoff),
        ];
        for (name, v) in overrides {
            if v.is_some_and(|v| !non_negative(v)) {
                out.push(Violation::new(format!("reactions.{name}"), "must be non-negative"));
            }
        }
        for (name, v) in [("yield_coef", r.yield_coef), ("yield_bar", r.yield_bar)] {
            if v.is_some_and(|v| !positive(v)) {
                out.push(Violation::new(format!("reactions.{name}"), "must be positive"));
            }
        }

        let bathymetry = self.bathymetry.preset.parse::<Bathymetry>();
        if bathymetry.is_err() {
            out.push(Violation::new(
                "bathymetry.preset",
                format!("unknown preset `{}`", self.bathymetry.preset),
            ));
        }

        let init = &self.initial;
        if !(init.h.is_finite() && (init.lake_at_rest || init.h > H_FLOOR)) {
            out.push(Violation::new("initial.h", "must be a positive height"));
        }
        if init.c.len() != params.n_c() {
            out.push(Violation::new(
                "initial.c",
                format!("expected {} entries, got {}", params.n_c(), init.c.len()),
            ));
        } else if init.c.iter().any(|&c| !non_negative(c)) {
            out.push(Violation::new("initial.c", "concentrations must be non-negative"));
        } else if init.c.iter().sum::<f64>() > params.c_max() {
            out.push(Violation::new("initial.c", format!("total exceeds c_max = {}", params.c_max())));
        }
        if init.s.len() != params.n_s {
            out.push(Violation::new(
                "initial.s",
                format!("expected {} entries, got {}", params.n_s, init.s.len()),
            ));
        } else if init.s.iter().any(|&s| !non_negative(s)) {
            out.push(Violation::new("initial.s", "concentrations must be non-negative"));
        }
        if init.lake_at_rest && out.is_empty() {
            if let (Ok(grid), true) = (self.grid(), init.h.is_finite()) {
                if let Some((i, &zb)) = grid.zb().iter().enumerate().find(|(_, &zb)| !(init.h - zb > H_FLOOR)) {
                    out.push(Violation::new(
                        "initial.h",
                        format!("free surface {} lies below the bed ({zb}) in cell {i}", init.h),
                    ));
                }
            }
        }

        let t = &self.time;
        if !(t.cfl > 0.0 && t.cfl <= 1.0) {
            out.push(Violation::new("time.cfl", "must lie in (0, 1]"));
        }
        if !non_negative(t.t_end) {
            out.push(Violation::new("time.t_end", "must be non-negative"));
        }
        if !positive(t.dt_max) {
            out.push(Violation::new("time.dt_max", "must be positive"));
        }
        if self.output.directory.as_os_str().is_empty() {
            out.push(Violation::new("output.directory", "must not be empty"));
        }
        out
    }

    /// `validate` as a `Result`.
    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn params(&self) -> PhysicalParams {
        let (p, m) = (&self.physics, &self.material);
        PhysicalParams {
            varrho: p.varrho.clone(),
            varrho_f: p.varrho_f,
            delta: p.delta.clone(),
            n_s: p.n_s,
            settling_scale: p.settling_scale,
            g: p.g,
            phi_max: m.phi_max,
            phi_c: m.phi_c,
            sigma_0: m.sigma_0,
            mu_0: m.mu_0,
        }
    }

    pub fn layer_geometry(&self) -> Result<LayerGeometry> {
        let count = self.layers.count;
        if count == 0 {
            return Err(Error::Validation(vec![Violation::new("layers.count", "must be at least 1")]));
        }
        match &self.layers.l {
            LayerFractions::Named(name) if name == "uniform" => Ok(LayerGeometry::uniform(count)),
            LayerFractions::Named(name) => Err(Error::Validation(vec![Violation::new(
                "layers.l",
                format!("expected \"uniform\" or a list of fractions, got \"{name}\""),
            )])),
            LayerFractions::List(l) if l.len() != count => Err(Error::Validation(vec![Violation::new(
                "layers.l",
                format!("{} fractions given for {count} layers", l.len()),
            )])),
            LayerFractions::List(l) => LayerGeometry::new(l.clone()),
        }
    }

    pub fn bathymetry(&self) -> Result<Bathymetry> {
        self.bathymetry.preset.parse()
    }

    pub fn grid(&self) -> Result<Grid> {
        let b = self.bathymetry()?;
        let g = &self.grid;
        Grid::with_bathymetry(g.nx, g.ny, g.dx, g.dy, |x1, x2| b.elevation([x1, x2]))
    }

    pub fn reactions(&self, params: &PhysicalParams) -> ReactionSpec {
        let r = &self.reactions;
        if r.preset != "denitrification" {
            return ReactionSpec::none();
        }
        let d = Denitrification::default();
        let k = Denitrification {
            mu_max: r.mu_max.unwrap_or(d.mu_max),
            decay: r.decay.unwrap_or(d.decay),
            f_p: r.f_p.unwrap_or(d.f_p),
            yield_coef: r.yield_coef.unwrap_or(d.yield_coef),
            yield_bar: r.yield_bar.unwrap_or(d.yield_bar),
            kappa_1: r.kappa_1.unwrap_or(d.kappa_1),
            kappa_2: r.kappa_2.unwrap_or(d.kappa_2),
        };
        let mut spec = ReactionSpec::denitrification(k, params);
        if let Some(eps) = r.eps_cutoff {
            spec.eps_cutoff = eps;
        }
        spec
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            cfl: self.time.cfl,
            t_end: self.time.t_end,
            dt_max: self.time.dt_max,
            viscosity: self.time.viscosity,
            compression_spacing: self.time.compression_spacing,
        }
    }

    /// Uniform initial data at rest. With `lake_at_rest` the height is the
    /// depth below the free-surface elevation `initial.h`.
    pub fn initial_state(&self, grid: &Grid, layers: &LayerGeometry, params: &PhysicalParams) -> Result<SimState> {
        let n = grid.n_cells();
        let m = layers.count();
        let init = &self.initial;
        let h: Vec<f64> = if init.lake_at_rest {
            grid.zb().iter().map(|zb| init.h - zb).collect()
        } else {
            vec![init.h; n]
        };
        let c: Vec<f64> = std::iter::repeat_n(init.c.iter().copied(), n * m).flatten().collect();
        let s: Vec<f64> = std::iter::repeat_n(init.s.iter().copied(), n * m).flatten().collect();
        SimState::from_primitive(layers, params, &h, &c, &s, &vec![[0.0; 2]; n * m])
    }

    /// Validates and assembles a ready-to-run simulation.
    pub fn build(&self) -> Result<Simulation> {
        self.check()?;
        let params = self.params();
        let layers = self.layer_geometry()?;
        let grid = self.grid()?;
        let reactions = self.reactions(&params);
        let state = self.initial_state(&grid, &layers, &params)?;
        Simulation::new(grid, layers, params, reactions, self.step_config(), state)
    }
}
