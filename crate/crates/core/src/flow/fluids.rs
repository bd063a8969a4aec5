use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Oil-water fluid description with Corey relative permeabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidProps {
    /// Water viscosity (Pa·s).
    pub mu_w: f64,
    /// Oil viscosity (Pa·s).
    pub mu_o: f64,
    /// Densities (kg/m³).
    pub rho_w: f64,
    pub rho_o: f64,
    pub n_w: f64,
    pub n_o: f64,
    pub s_wr: f64,
    pub s_or: f64,
    pub krw0: f64,
    pub kro0: f64,
}

impl Default for FluidProps {
    fn default() -> Self {
        FluidProps {
            mu_w: 0.5e-3,
            mu_o: 2.0e-3,
            rho_w: 1000.0,
            rho_o: 800.0,
            n_w: 2.0,
            n_o: 2.0,
            s_wr: 0.2,
            s_or: 0.2,
            krw0: 0.6,
            kro0: 0.9,
        }
    }
}

impl FluidProps {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_w > 0.0 && self.mu_o > 0.0) {
            return Err(Error::invalid("viscosities must be positive"));
        }
        if !(self.s_wr >= 0.0 && self.s_or >= 0.0 && self.s_wr + self.s_or < 1.0) {
            return Err(Error::invalid("residual saturations must satisfy 0 <= s_wr + s_or < 1"));
        }
        if !(self.n_w >= 1.0 && self.n_o >= 1.0) {
            return Err(Error::invalid("Corey exponents must be >= 1"));
        }
        if !(self.krw0 > 0.0 && self.kro0 > 0.0) {
            return Err(Error::invalid("endpoint relative permeabilities must be positive"));
        }
        if !(self.rho_w > 0.0 && self.rho_o > 0.0) {
            return Err(Error::invalid("densities must be positive"));
        }
        Ok(())
    }

    /// Largest mobile water saturation.
    pub fn s_w_max(&self) -> f64 {
        1.0 - self.s_or
    }

    /// Corey curves `(k_rw, k_ro)`; `s_w` is clamped to `[s_wr, 1 - s_or]`.
    pub fn relative_permeability(&self, s_w: f64) -> (f64, f64) {
        let span = 1.0 - self.s_wr - self.s_or;
        let se = ((s_w - self.s_wr) / span).clamp(0.0, 1.0);
        (self.krw0 * se.powf(self.n_w), self.kro0 * (1.0 - se).powf(self.n_o))
    }

    /// Phase mobilities `(lambda_w, lambda_o)` in 1/(Pa·s).
    pub fn mobilities(&self, s_w: f64) -> (f64, f64) {
        let (krw, kro) = self.relative_permeability(s_w);
        (krw / self.mu_w, kro / self.mu_o)
    }

    pub fn fractional_flow(&self, s_w: f64) -> f64 {
        let (lw, lo) = self.mobilities(s_w);
        if lw + lo > 0.0 {
            lw / (lw + lo)
        } else {
            0.0
        }
    }

    /// Maximum slope of the fractional-flow curve, sampled on a fine grid.
    pub fn max_fractional_flow_slope(&self) -> f64 {
        let n = 2000;
        let (lo, hi) = (self.s_wr, self.s_w_max());
        let h = (hi - lo) / n as f64;
        let mut best = 0.0f64;
        let mut prev = self.fractional_flow(lo);
        for i in 1..=n {
            let f = self.fractional_flow(lo + h * i as f64);
            best = best.max((f - prev) / h);
            prev = f;
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        let f = FluidProps::default();
        assert_eq!(f.relative_permeability(f.s_wr).0, 0.0);
        assert_eq!(f.relative_permeability(1.0 - f.s_or).1, 0.0);
        assert_eq!(f.relative_permeability(f.s_wr).1, f.kro0);
    }

    #[test]
    fn linear_corey() {
        let f = FluidProps {
            n_w: 1.0,
            n_o: 1.0,
            krw0: 1.0,
            kro0: 1.0,
            s_wr: 0.0,
            s_or: 0.0,
            ..FluidProps::default()
        };
        let (krw, kro) = f.relative_permeability(0.3);
        assert!((krw - 0.3).abs() < 1e-15);
        assert!((kro - 0.7).abs() < 1e-15);
    }

    #[test]
    fn monotone_and_bounded() {
        let f = FluidProps::default();
        let mut last = f.relative_permeability(0.0);
        for i in 1..=100 {
            let cur = f.relative_permeability(i as f64 / 100.0);
            assert!(cur.0 >= last.0 && cur.1 <= last.1);
            assert!(cur.0 <= f.krw0 && cur.1 <= f.kro0 && cur.0 >= 0.0 && cur.1 >= 0.0);
            last = cur;
        }
    }

    #[test]
    fn validation() {
        let bad = FluidProps {
            s_wr: 0.6,
            s_or: 0.5,
            ..FluidProps::default()
        };
        assert!(bad.validate().is_err());
        assert!(FluidProps::default().validate().is_ok());
    }
}
