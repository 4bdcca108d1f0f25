use mlswr::io::config::LayerFractions;
use mlswr::io::{Bathymetry, RunConfig};

mod support;

struct Expected {
    name: &'static str,
    domain: (f64, f64),
    spacing: (f64, f64),
    layers: usize,
    h0: f64,
    c0: [f64; 2],
    t_end: f64,
    sigma_0: f64,
    phi_c: f64,
    bathymetry: Bathymetry,
}

const TABLE: [Expected; 3] = [
    Expected {
        name: "sim1",
        domain: (4.0, 6.0),
        spacing: (0.1, 0.15),
        layers: 40,
        h0: 1.5,
        c0: [3.0, 2.5],
        t_end: 40.0,
        sigma_0: 0.02,
        phi_c: 0.003,
        bathymetry: Bathymetry::Inclined,
    },
    Expected {
        name: "sim2",
        domain: (4.0, 6.0),
        spacing: (0.1, 0.15),
        layers: 40,
        h0: 1.5,
        c0: [10.0, 8.0],
        t_end: 40.0,
        sigma_0: 0.5,
        phi_c: 0.002,
        bathymetry: Bathymetry::Inclined,
    },
    Expected {
        name: "sim3",
        domain: (1.0, 1.0),
        spacing: (0.025, 0.025),
        layers: 60,
        h0: 0.4,
        c0: [3.0, 2.5],
        t_end: 20.0,
        sigma_0: 0.02,
        phi_c: 0.003,
        bathymetry: Bathymetry::Gaussian,
    },
];

fn check(c: &RunConfig, e: &Expected) {
    let g = &c.grid;
    assert_eq!((g.dx, g.dy), e.spacing, "{}", e.name);
    assert!((g.nx as f64 * g.dx - e.domain.0).abs() < 1e-12, "{}", e.name);
    assert!((g.ny as f64 * g.dy - e.domain.1).abs() < 1e-12, "{}", e.name);
    assert_eq!(c.layers.count, e.layers);
    assert_eq!(c.layers.l, LayerFractions::Named("uniform".into()));
    assert_eq!(c.initial.h, e.h0);
    assert!(!c.initial.lake_at_rest);
    assert_eq!(c.initial.c, e.c0);
    assert_eq!(c.initial.s, [0.006, 0.0009, 0.0]);
    assert_eq!(c.time.t_end, e.t_end);
    assert_eq!(c.time.cfl, 0.5);
    assert_eq!(c.material.sigma_0, e.sigma_0);
    assert_eq!(c.material.phi_c, e.phi_c);
    assert_eq!(c.material.phi_max, 0.02);
    assert_eq!(c.material.mu_0, 0.01);
    assert_eq!(c.physics.varrho, [2000.0, 2000.0]);
    assert_eq!(c.physics.varrho_f, 998.0);
    assert_eq!(c.physics.delta, [4e-4, 2.5e-4]);
    assert_eq!(c.physics.g, 9.81);
    assert_eq!(c.reactions.preset, "denitrification");
    assert_eq!(c.bathymetry().unwrap(), e.bathymetry);
}

#[test]
fn presets_match_the_scenario_table() {
    for e in &TABLE {
        check(&support::preset_config(e.name), e);
    }
}

#[test]
fn sim1_has_64000_cells() {
    let c = support::preset_config("sim1");
    assert_eq!(c.grid.nx * c.grid.ny * c.layers.count, 64000);
}

#[test]
fn presets_build_valid_initial_states() {
    for e in &TABLE {
        let mut c = support::coarse(e.name, 4, 4, 3);
        c.time.t_end = 0.0;
        let sim = c.build().unwrap();
        assert!(sim.state().h.iter().all(|&h| h == e.h0));
        support::check_bounds(&sim).unwrap();
    }
}
