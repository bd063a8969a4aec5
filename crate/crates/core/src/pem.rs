//! Soft-sand petro-elastic model: Hertz-Mindlin contact moduli at critical
//! porosity, modified lower Hashin-Shtrikman interpolation to the mineral
//! point, Gassmann fluid substitution, then P-impedance.
//!
//! Moduli are in GPa, densities in kg/m³, velocities in m/s and impedance
//! in kg/(m²·s).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{vertical_average, ReservoirModel};

const GPA_PER_BAR: f64 = 1.0e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RockPhysicsParams {
    pub phi_critical: f64,
    /// Average contacts per grain.
    pub coordination: f64,
    /// Degree of the Hertz-Mindlin root.
    pub root_degree: f64,
    pub k_mineral: f64,
    pub mu_mineral: f64,
    pub nu_mineral: f64,
    pub rho_mineral: f64,
    /// Effective stress (GPa) when `overburden` is unset.
    pub p_eff: f64,
    /// Overburden stress (GPa); when set, the effective stress of each cell
    /// is overburden minus pore pressure.
    pub overburden: Option<f64>,
}

impl Default for RockPhysicsParams {
    fn default() -> Self {
        RockPhysicsParams {
            phi_critical: 0.36,
            coordination: 9.0,
            root_degree: 3.0,
            k_mineral: 36.6,
            mu_mineral: 44.0,
            nu_mineral: 0.08,
            rho_mineral: 2650.0,
            p_eff: 0.02,
            overburden: None,
        }
    }
}

impl RockPhysicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi_critical > 0.0 && self.phi_critical < 1.0) {
            return Err(Error::invalid("critical porosity must be in (0, 1)"));
        }
        if !(self.coordination > 0.0 && self.root_degree >= 1.0) {
            return Err(Error::invalid("coordination number must be > 0 and root degree >= 1"));
        }
        if !(self.k_mineral > 0.0 && self.mu_mineral > 0.0 && self.rho_mineral > 0.0) {
            return Err(Error::invalid("mineral moduli and density must be positive"));
        }
        if !(self.nu_mineral > 0.0 && self.nu_mineral < 0.5) {
            return Err(Error::invalid("mineral Poisson ratio must be in (0, 0.5)"));
        }
        if self.overburden.is_none() && !(self.p_eff > 0.0) {
            return Err(Error::invalid("effective stress must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluidModuli {
    pub k_w: f64,
    pub k_o: f64,
    pub k_g: f64,
    pub rho_w: f64,
    pub rho_o: f64,
    pub rho_g: f64,
}

impl Default for FluidModuli {
    fn default() -> Self {
        FluidModuli {
            k_w: 2.25,
            k_o: 1.0,
            k_g: 0.05,
            rho_w: 1000.0,
            rho_o: 800.0,
            rho_g: 100.0,
        }
    }
}

impl FluidModuli {
    pub fn validate(&self) -> Result<()> {
        let all = [self.k_w, self.k_o, self.k_g, self.rho_w, self.rho_o, self.rho_g];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("fluid moduli and densities must be positive"));
        }
        Ok(())
    }
}

/// Phase saturations `(S_w, S_o, S_g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturations {
    pub water: f64,
    pub oil: f64,
    pub gas: f64,
}

impl Saturations {
    pub fn oil_water(s_w: f64) -> Self {
        Saturations {
            water: s_w,
            oil: 1.0 - s_w,
            gas: 0.0,
        }
    }
}

/// Dry-frame moduli `(K_HM, mu_HM)` at critical porosity for `params.p_eff`.
pub fn hertz_mindlin(params: &RockPhysicsParams) -> Result<(f64, f64)> {
    hertz_mindlin_at(params, params.p_eff)
}

pub fn hertz_mindlin_at(params: &RockPhysicsParams, p_eff: f64) -> Result<(f64, f64)> {
    if !(p_eff > 0.0) {
        return Err(Error::invalid(format!("effective stress must be positive, got {p_eff}")));
    }
    let RockPhysicsParams {
        phi_critical: phic,
        coordination: c,
        root_degree: n,
        mu_mineral: mu,
        nu_mineral: nu,
        ..
    } = *params;
    let common = c * c * (1.0 - phic).powi(2) * mu * mu * p_eff / (PI * PI * (1.0 - nu).powi(2));
    let k = (common / 18.0).powf(1.0 / n);
    let g = (5.0 - 4.0 * nu) / (5.0 * (2.0 - nu)) * (1.5 * common).powf(1.0 / n);
    Ok((k, g))
}

/// Modified lower Hashin-Shtrikman bound between the mineral point
/// (`phi = 0`) and the Hertz-Mindlin point (`phi = phi_c`).
pub fn mlhs_dry_moduli(phi: f64, phi_c: f64, k_hm: f64, mu_hm: f64, k_s: f64, mu_s: f64) -> Result<(f64, f64)> {
    if !(0.0..=phi_c).contains(&phi) {
        return Err(Error::invalid(format!("porosity {phi} outside [0, {phi_c}]")));
    }
    let x = phi / phi_c;
    let a = 4.0 / 3.0 * mu_hm;
    let k = 1.0 / (x / (k_hm + a) + (1.0 - x) / (k_s + a)) - a;
    let z = (9.0 * k_hm + 8.0 * mu_hm) / (k_hm + 2.0 * mu_hm);
    let b = mu_hm * z / 6.0;
    let g = 1.0 / (x / (mu_hm + b) + (1.0 - x) / (mu_s + b)) - b;
    Ok((k, g))
}

/// Reuss average of the phase bulk moduli.
pub fn fluid_modulus(s: Saturations, fluids: &FluidModuli) -> Result<f64> {
    if s.water < 0.0 || s.oil < 0.0 || s.gas < 0.0 || s.water + s.oil + s.gas <= 0.0 {
        return Err(Error::invalid("saturations must be non-negative and not all zero"));
    }
    Ok(1.0 / (s.water / fluids.k_w + s.oil / fluids.k_o + s.gas / fluids.k_g))
}

/// Gassmann substitution. Returns `(K_sat, mu_sat, rho_sat)`.
pub fn gassmann_saturate(
    k_d: f64,
    g_d: f64,
    phi: f64,
    k_f: f64,
    k_s: f64,
    s: Saturations,
    fluids: &FluidModuli,
    rho_mineral: f64,
) -> Result<(f64, f64, f64)> {
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::invalid(format!("porosity {phi} outside (0, 1)")));
    }
    if !(k_d < k_s) {
        return Err(Error::invalid(format!("dry modulus {k_d} must be below the mineral modulus {k_s}")));
    }
    let denom = phi / k_f + (1.0 - phi) / k_s - k_d / (k_s * k_s);
    if !(denom > 0.0) {
        return Err(Error::Numerical(format!("Gassmann denominator {denom} is not positive")));
    }
    let k_sat = k_d + (1.0 - k_d / k_s).powi(2) / denom;
    let rho = (1.0 - phi) * rho_mineral + phi * (s.water * fluids.rho_w + s.oil * fluids.rho_o + s.gas * fluids.rho_g);
    Ok((k_sat, g_d, rho))
}

/// `(V_p, V_s, Z_p)` from moduli in GPa and density in kg/m³.
pub fn velocities_and_impedance(k_sat: f64, mu_sat: f64, rho_sat: f64) -> (f64, f64, f64) {
    let vp = ((k_sat + 4.0 / 3.0 * mu_sat) * 1e9 / rho_sat).sqrt();
    let vs = (mu_sat * 1e9 / rho_sat).sqrt();
    (vp, vs, rho_sat * vp)
}

/// P-impedance of one cell; `pore_pressure_bar` only matters in overburden mode.
pub fn cell_impedance(
    phi: f64,
    s_w: f64,
    pore_pressure_bar: f64,
    params: &RockPhysicsParams,
    fluids: &FluidModuli,
) -> Result<f64> {
    let p_eff = match params.overburden {
        Some(ob) => ob - pore_pressure_bar * GPA_PER_BAR,
        None => params.p_eff,
    };
    let (k_hm, mu_hm) = hertz_mindlin_at(params, p_eff)?;
    let (k_d, g_d) = mlhs_dry_moduli(phi, params.phi_critical, k_hm, mu_hm, params.k_mineral, params.mu_mineral)?;
    let s = Saturations::oil_water(s_w);
    let k_f = fluid_modulus(s, fluids)?;
    let (k, g, rho) = gassmann_saturate(k_d, g_d, phi, k_f, params.k_mineral, s, fluids, params.rho_mineral)?;
    Ok(velocities_and_impedance(k, g, rho).2)
}

/// Thickness-weighted vertical average of cell impedance: an `ny × nx`
/// row-major image, NaN in columns without active cells. `pressure_bar`
/// and `s_w` are full-grid snapshot fields.
pub fn impedance_map(
    model: &ReservoirModel,
    grid: &Grid,
    pressure_bar: &[f64],
    s_w: &[f64],
    params: &RockPhysicsParams,
    fluids: &FluidModuli,
) -> Result<Vec<f64>> {
    let n = grid.cell_count();
    for (what, len) in [("pressure snapshot", pressure_bar.len()), ("saturation snapshot", s_w.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                actual: len,
            });
        }
    }
    params.validate()?;
    fluids.validate()?;
    let mut z = vec![0.0; n];
    for &c in grid.active_cells() {
        z[c] = cell_impedance(model.phi[c], s_w[c], pressure_bar[c], params, fluids)?;
    }
    Ok(vertical_average(&z, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn hertz_mindlin_matches_scalar_oracle() {
        let (k, g) = hertz_mindlin(&RockPhysicsParams::default()).unwrap();
        assert_relative_eq!(k, 2.04429768468208, max_relative = 1e-12);
        assert_relative_eq!(g, 2.9897853638475422, max_relative = 1e-12);
    }

    #[test]
    fn hertz_mindlin_scaling_and_limit() {
        let p = RockPhysicsParams::default();
        let (k1, g1) = hertz_mindlin_at(&p, 0.01).unwrap();
        let (k2, g2) = hertz_mindlin_at(&p, 0.02).unwrap();
        assert_relative_eq!(k2 / k1, 2f64.powf(1.0 / 3.0), max_relative = 1e-12);
        assert_relative_eq!(g2 / g1, 2f64.powf(1.0 / 3.0), max_relative = 1e-12);
        let (k0, g0) = hertz_mindlin_at(&p, 1e-15).unwrap();
        assert!(k0 < 1e-3 && g0 < 1e-3);
        assert!(hertz_mindlin_at(&p, 0.0).is_err());
        assert!(hertz_mindlin_at(&p, -1.0).is_err());
    }

    #[test]
    fn mlhs_endpoints_and_midpoint() {
        let p = RockPhysicsParams::default();
        let (khm, ghm) = hertz_mindlin(&p).unwrap();
        let at = |phi| mlhs_dry_moduli(phi, 0.36, khm, ghm, 36.6, 44.0).unwrap();
        let (k0, g0) = at(0.0);
        assert_relative_eq!(k0, 36.6, max_relative = 1e-12);
        assert_relative_eq!(g0, 44.0, max_relative = 1e-12);
        let (kc, gc) = at(0.36);
        assert_relative_eq!(kc, khm, max_relative = 1e-12);
        assert_relative_eq!(gc, ghm, max_relative = 1e-12);
        let (km, gm) = at(0.18);
        assert_relative_eq!(km, 6.5146423526724355, max_relative = 1e-12);
        assert_relative_eq!(gm, 7.3994316095312715, max_relative = 1e-12);
        let mut last = at(0.0);
        for i in 1..=36 {
            let cur = at(i as f64 * 0.01);
            assert!(cur.0 < last.0 && cur.1 < last.1);
            last = cur;
        }
        assert!(mlhs_dry_moduli(0.37, 0.36, khm, ghm, 36.6, 44.0).is_err());
    }

    #[test]
    fn fluid_modulus_cases() {
        let f = FluidModuli::default();
        assert_relative_eq!(fluid_modulus(Saturations::oil_water(1.0), &f).unwrap(), 2.25);
        let eq = FluidModuli {
            k_w: 2.0,
            k_o: 2.0,
            ..f.clone()
        };
        assert_relative_eq!(fluid_modulus(Saturations::oil_water(0.5), &eq).unwrap(), 2.0, max_relative = 1e-15);
        let zero = Saturations {
            water: 0.0,
            oil: 0.0,
            gas: 0.0,
        };
        assert!(fluid_modulus(zero, &f).is_err());
    }

    proptest! {
        #[test]
        fn fluid_modulus_below_arithmetic_mean(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            prop_assume!(a + b + c > 1e-6);
            let t = a + b + c;
            let s = Saturations { water: a / t, oil: b / t, gas: c / t };
            let f = FluidModuli::default();
            let kf = fluid_modulus(s, &f).unwrap();
            let arith = s.water * f.k_w + s.oil * f.k_o + s.gas * f.k_g;
            prop_assert!(kf <= f.k_w.max(f.k_o).max(f.k_g) * (1.0 + 1e-12));
            prop_assert!(kf <= arith * (1.0 + 1e-12));
        }

        #[test]
        fn gassmann_stiffens_monotonically(phi in 0.02f64..0.34, kf1 in 0.01f64..5.0, kf2 in 0.01f64..5.0) {
            let p = RockPhysicsParams::default();
            let (khm, ghm) = hertz_mindlin(&p).unwrap();
            let (kd, gd) = mlhs_dry_moduli(phi, 0.36, khm, ghm, 36.6, 44.0).unwrap();
            let f = FluidModuli::default();
            let s = Saturations::oil_water(0.5);
            let (lo, hi) = if kf1 < kf2 { (kf1, kf2) } else { (kf2, kf1) };
            let (k_lo, mu, _) = gassmann_saturate(kd, gd, phi, lo, 36.6, s, &f, 2650.0).unwrap();
            let (k_hi, _, _) = gassmann_saturate(kd, gd, phi, hi, 36.6, s, &f, 2650.0).unwrap();
            prop_assert!(k_lo >= kd);
            prop_assert!(k_hi >= k_lo);
            prop_assert_eq!(mu, gd);
        }

        #[test]
        fn p_velocity_bounds_s_velocity(k in 0.0f64..50.0, mu in 0.0f64..50.0, rho in 1000.0f64..3000.0) {
            let (vp, vs, z) = velocities_and_impedance(k, mu, rho);
            prop_assert!(vp >= (4.0f64 / 3.0).sqrt() * vs * (1.0 - 1e-12));
            prop_assert!((z - rho * vp).abs() <= 1e-9 * z.max(1.0));
        }
    }

    #[test]
    fn gassmann_dry_limit_and_density() {
        let f = FluidModuli::default();
        let (k, mu, _) = gassmann_saturate(8.0, 7.0, 0.2, 0.0, 36.6, Saturations::oil_water(1.0), &f, 2650.0).unwrap();
        assert_relative_eq!(k, 8.0, max_relative = 1e-15);
        assert_eq!(mu, 7.0);
        let (k_small, _, _) =
            gassmann_saturate(8.0, 7.0, 0.2, 1e-9, 36.6, Saturations::oil_water(1.0), &f, 2650.0).unwrap();
        assert!((k_small - 8.0).abs() < 1e-6);
        let (_, _, rho) = gassmann_saturate(8.0, 7.0, 0.2, 2.25, 36.6, Saturations::oil_water(1.0), &f, 2650.0).unwrap();
        assert_relative_eq!(rho, 2320.0, max_relative = 1e-15);
        assert!(gassmann_saturate(60.0, 7.0, 0.2, 2.25, 36.6, Saturations::oil_water(1.0), &f, 2650.0).is_err());
        let err = gassmann_saturate(36.0, 7.0, 0.2, 1e6, 36.6, Saturations::oil_water(1.0), &f, 2650.0).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn velocity_oracle() {
        let (vp, vs, _) = velocities_and_impedance(20.0, 9.0, 2300.0);
        assert_relative_eq!(vp, 3730.019232961255, max_relative = 1e-12);
        assert_eq!(velocities_and_impedance(20.0, 0.0, 2300.0).1, 0.0);
        assert!(vs > 0.0);
    }

    #[test]
    fn full_chain_oracle() {
        let z = cell_impedance(0.2, 1.0, 250.0, &RockPhysicsParams::default(), &FluidModuli::default()).unwrap();
        assert_relative_eq!(z, 7012503.718886045, max_relative = 1e-12);
    }

    #[test]
    fn water_raises_impedance() {
        let p = RockPhysicsParams::default();
        let f = FluidModuli::default();
        let mut last = 0.0;
        for i in 0..=10 {
            let z = cell_impedance(0.25, 0.2 + 0.06 * i as f64, 250.0, &p, &f).unwrap();
            assert!(z > last);
            last = z;
        }
    }

    #[test]
    fn overburden_mode_depends_on_pore_pressure() {
        let p = RockPhysicsParams {
            overburden: Some(0.05),
            ..RockPhysicsParams::default()
        };
        let f = FluidModuli::default();
        let lo = cell_impedance(0.2, 0.5, 300.0, &p, &f).unwrap();
        let hi = cell_impedance(0.2, 0.5, 200.0, &p, &f).unwrap();
        assert!(hi > lo);
        assert!(cell_impedance(0.2, 0.5, 600.0, &p, &f).is_err());
    }

    fn uniform(grid: &Grid, phi: f64) -> ReservoirModel {
        let n = grid.cell_count();
        ReservoirModel::new(grid, vec![4.0; n], vec![phi; n], vec![3.0; n]).unwrap()
    }

    #[test]
    fn uniform_state_gives_uniform_image() {
        let grid = Grid::new(4, 3, 2, 10.0, 10.0, vec![2.0, 5.0], None).unwrap();
        let n = grid.cell_count();
        let m = uniform(&grid, 0.22);
        let img = impedance_map(&m, &grid, &vec![250.0; n], &vec![0.3; n], &Default::default(), &Default::default())
            .unwrap();
        assert_eq!(img.len(), 12);
        assert!(img.iter().all(|&v| (v - img[0]).abs() <= 1e-9 * img[0]));
    }

    #[test]
    fn single_layer_map_is_cellwise() {
        let grid = Grid::new(3, 2, 1, 10.0, 10.0, vec![4.0], None).unwrap();
        let m = uniform(&grid, 0.2);
        let sw: Vec<f64> = (0..6).map(|c| 0.2 + 0.1 * c as f64).collect();
        let img = impedance_map(&m, &grid, &[250.0; 6], &sw, &Default::default(), &Default::default()).unwrap();
        for c in 0..6 {
            let z = cell_impedance(0.2, sw[c], 250.0, &Default::default(), &Default::default()).unwrap();
            assert_relative_eq!(img[c], z, max_relative = 1e-14);
        }
    }

    #[test]
    fn empty_columns_are_masked() {
        let mut mask = vec![true; 8];
        mask[1] = false;
        mask[5] = false;
        let grid = Grid::new(2, 2, 2, 10.0, 10.0, vec![1.0, 1.0], Some(mask)).unwrap();
        let m = uniform(&grid, 0.2);
        let img = impedance_map(&m, &grid, &[250.0; 8], &[0.4; 8], &Default::default(), &Default::default()).unwrap();
        assert!(img[1].is_nan());
        assert!(img[0].is_finite() && img[2].is_finite() && img[3].is_finite());
    }
}
