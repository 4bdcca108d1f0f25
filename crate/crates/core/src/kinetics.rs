//! Biochemical reaction terms R_c = Σ_c κ and R_s = Σ_s κ, with a hard cutoff
//! near the maximal solids concentration.

use crate::geometry::PhysicalParams;

/// Denitrification kinetics for biomass X_OHO, X_U and substrates S_NO3, S_S, S_N2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Denitrification {
    /// Maximum growth rate, 1/s.
    pub mu_max: f64,
    /// Decay rate, 1/s.
    pub decay: f64,
    /// Fraction of decayed biomass becoming inert.
    pub f_p: f64,
    pub yield_coef: f64,
    pub yield_bar: f64,
    /// Saturation constants for S_NO3 and S_S, kg/m³.
    pub kappa_1: f64,
    pub kappa_2: f64,
}

impl Default for Denitrification {
    fn default() -> Self {
        Self {
            mu_max: 5.56e-4,
            decay: 6.94e-5,
            f_p: 0.2,
            yield_coef: 0.67,
            yield_bar: 0.172216,
            kappa_1: 5e-4,
            kappa_2: 0.02,
        }
    }
}

impl Denitrification {
    /// Specific growth rate μ(s); negative substrate values count as zero.
    pub fn growth_rate(&self, s: &[f64]) -> f64 {
        let s1 = s[0].max(0.0);
        let s2 = s[1].max(0.0);
        self.mu_max * (s1 / (self.kappa_1 + s1)) * (s2 / (self.kappa_2 + s2))
    }

    /// Σ_c, 2×2 row-major.
    pub fn solid_stoichiometry(&self) -> Vec<f64> {
        vec![1.0, -1.0, 0.0, self.f_p]
    }

    /// Σ_s, 3×2 row-major.
    pub fn substrate_stoichiometry(&self) -> Vec<f64> {
        vec![
            -self.yield_bar,
            0.0,
            -1.0 / self.yield_coef,
            1.0 - self.f_p,
            self.yield_bar,
            0.0,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateLaw {
    None,
    Denitrification(Denitrification),
}

/// Stoichiometric matrices (row-major, `n × ell`) plus the rate law.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionSpec {
    pub ell: usize,
    pub sigma_c: Vec<f64>,
    pub sigma_s: Vec<f64>,
    pub rate_law: RateLaw,
    /// Reactions switch off once c_tot ≥ c_max − eps_cutoff, kg/m³.
    pub eps_cutoff: f64,
}

impl ReactionSpec {
    pub fn none() -> Self {
        Self {
            ell: 0,
            sigma_c: Vec::new(),
            sigma_s: Vec::new(),
            rate_law: RateLaw::None,
            eps_cutoff: 0.0,
        }
    }

    pub fn denitrification(kinetics: Denitrification, params: &PhysicalParams) -> Self {
        Self {
            ell: 2,
            sigma_c: kinetics.solid_stoichiometry(),
            sigma_s: kinetics.substrate_stoichiometry(),
            rate_law: RateLaw::Denitrification(kinetics),
            eps_cutoff: 0.01 * params.c_max(),
        }
    }

    pub fn is_active(&self) -> bool {
        !matches!(self.rate_law, RateLaw::None)
    }

    /// Rate vector κ(c, s).
    pub fn rates(&self, c: &[f64], s: &[f64]) -> [f64; 2] {
        match self.rate_law {
            RateLaw::None => [0.0; 2],
            RateLaw::Denitrification(k) => {
                let biomass = c[0].max(0.0);
                [biomass * k.growth_rate(s), biomass * k.decay]
            }
        }
    }
}

/// (R_c, R_s) at one point.
pub fn reaction_terms(
    c: &[f64],
    s: &[f64],
    spec: &ReactionSpec,
    params: &PhysicalParams,
) -> (Vec<f64>, Vec<f64>) {
    let mut rc = vec![0.0; c.len()];
    let mut rs = vec![0.0; s.len()];
    reaction_terms_into(c, s, spec, params, &mut rc, &mut rs);
    (rc, rs)
}

pub(crate) fn reaction_terms_into(
    c: &[f64],
    s: &[f64],
    spec: &ReactionSpec,
    params: &PhysicalParams,
    rc: &mut [f64],
    rs: &mut [f64],
) {
    rc.iter_mut().for_each(|x| *x = 0.0);
    rs.iter_mut().for_each(|x| *x = 0.0);
    if !spec.is_active() {
        return;
    }
    let c_tot: f64 = c.iter().sum();
    if c_tot >= params.c_max() - spec.eps_cutoff {
        return;
    }
    let kappa = spec.rates(c, s);
    let ell = spec.ell;
    for (i, out) in rc.iter_mut().enumerate() {
        *out = (0..ell).map(|k| spec.sigma_c[i * ell + k] * kappa[k]).sum();
    }
    for (l, out) in rs.iter_mut().enumerate() {
        *out = (0..ell).map(|k| spec.sigma_s[l * ell + k] * kappa[k]).sum();
    }
}

/// Component sums (R̃_c, R̃_s, R̃_ρ).
pub fn total_reactions(rc: &[f64], rs: &[f64]) -> (f64, f64, f64) {
    let tc: f64 = rc.iter().sum();
    let ts: f64 = rs.iter().sum();
    (tc, ts, tc + ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setup() -> (Denitrification, ReactionSpec, PhysicalParams) {
        let p = PhysicalParams::denitrification();
        let k = Denitrification::default();
        (k, ReactionSpec::denitrification(k, &p), p)
    }

    #[test]
    fn growth_rate_examples() {
        let (k, _, _) = setup();
        assert_eq!(k.growth_rate(&[0.0, 1.0, 0.0]), 0.0);
        assert_relative_eq!(k.growth_rate(&[1e12, 1e12, 0.0]), k.mu_max, max_relative = 1e-12);
        let mu = k.growth_rate(&[0.006, 0.0009, 0.0]);
        assert_relative_eq!(mu, 5.56e-4 * (0.006 / 0.0065) * (0.0009 / 0.0209), max_relative = 1e-15);
        assert_relative_eq!(mu, 2.2100846e-5, max_relative = 1e-7);
    }

    #[test]
    fn initial_state_rates() {
        let (_, spec, p) = setup();
        let (rc, rs) = reaction_terms(&[3.0, 2.5], &[0.006, 0.0009, 0.0], &spec, &p);
        assert_relative_eq!(rc[0], 3.0 * (2.2100846e-5 - 6.94e-5), max_relative = 1e-6);
        assert_relative_eq!(rc[0], -1.41897e-4, max_relative = 1e-5);
        assert_relative_eq!(rc[1], 4.164e-5, max_relative = 1e-12);
        assert_eq!(rs.len(), 3);
    }

    #[test]
    fn no_biomass_no_reaction() {
        let (_, spec, p) = setup();
        let (rc, rs) = reaction_terms(&[0.0, 2.5], &[0.006, 0.0009, 0.0], &spec, &p);
        assert!(rc.iter().chain(&rs).all(|&x| x == 0.0));
    }

    #[test]
    fn cutoff_near_packing() {
        let (_, spec, p) = setup();
        let (rc, rs) = reaction_terms(&[20.0, 19.6], &[0.006, 0.0009, 0.0], &spec, &p);
        assert!(rc.iter().chain(&rs).all(|&x| x == 0.0));
        let (rc, _) = reaction_terms(&[20.0, 19.5], &[0.006, 0.0009, 0.0], &spec, &p);
        assert!(rc[0] != 0.0);
    }

    #[test]
    fn inactive_spec_gives_zero() {
        let p = PhysicalParams::denitrification();
        let (rc, rs) = reaction_terms(&[3.0, 2.5], &[0.006, 0.0009, 0.0], &ReactionSpec::none(), &p);
        assert!(rc.iter().chain(&rs).all(|&x| x == 0.0));
    }

    #[test]
    fn totals_of_zero_are_zero() {
        assert_eq!(total_reactions(&[0.0, 0.0], &[0.0; 3]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn nitrogen_stays_nonnegative_under_euler() {
        let (_, spec, p) = setup();
        let mut c = vec![3.0, 2.5];
        let mut s = vec![0.006, 0.0009, 0.0];
        for _ in 0..400 {
            let (rc, rs) = reaction_terms(&c, &s, &spec, &p);
            c.iter_mut().zip(&rc).for_each(|(x, r)| *x += 0.1 * r);
            s.iter_mut().zip(&rs).for_each(|(x, r)| *x += 0.1 * r);
            assert!(s[2] >= 0.0);
        }
    }

    proptest! {
        #[test]
        fn matrix_path_matches_closed_form(
            c1 in 0.0..20.0f64, c2 in 0.0..15.0f64,
            s1 in 0.0..0.05f64, s2 in 0.0..0.05f64, s3 in 0.0..0.05f64,
        ) {
            let (k, spec, p) = setup();
            prop_assume!(c1 + c2 < p.c_max() - spec.eps_cutoff);
            let s = [s1, s2, s3];
            let (rc, rs) = reaction_terms(&[c1, c2], &s, &spec, &p);
            let mu = k.growth_rate(&s);
            let b = k.decay;
            let expect_c = [c1 * (mu - b), c1 * k.f_p * b];
            let expect_s = [
                -c1 * k.yield_bar * mu,
                c1 * (-mu / k.yield_coef + 0.8 * b),
                c1 * k.yield_bar * mu,
            ];
            // relative to the size of the individual rate contributions
            let scale = c1 * (mu / k.yield_coef + b) + 1e-300;
            for (a, e) in rc.iter().zip(&expect_c).chain(rs.iter().zip(&expect_s)) {
                prop_assert!((a - e).abs() <= 1e-14 * scale, "{a} vs {e}");
            }
            let (tc, ts, tr) = total_reactions(&rc, &rs);
            prop_assert_eq!(tr, tc + ts);
            let expect_tc = c1 * (mu - b + k.f_p * b);
            prop_assert!((tc - expect_tc).abs() <= 1e-14 * scale);
        }
    }
}
