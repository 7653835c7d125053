//! Constitutive relation `u = Φ(h)` between enthalpy and temperature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    /// `Φ(h) = (h − L)₊`
    #[serde(rename = "one")]
    OnePhase,
    /// `Φ(h) = k₁ (h − L)₊ + k₂ min{h, 0}`
    #[serde(rename = "two")]
    TwoPhase,
    /// `Φ(h) = h`, the fractional heat equation.
    Identity,
}

/// Nondecreasing, Lipschitz phase law. `L` is the width of the degenerate
/// plateau on which no diffusion acts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseLaw {
    kind: PhaseKind,
    latent_heat: f64,
    k1: f64,
    k2: f64,
}

impl PhaseLaw {
    pub fn one_phase(latent_heat: f64) -> Result<Self> {
        check_latent(latent_heat)?;
        Ok(PhaseLaw { kind: PhaseKind::OnePhase, latent_heat, k1: 1.0, k2: 0.0 })
    }

    pub fn two_phase(latent_heat: f64, k1: f64, k2: f64) -> Result<Self> {
        check_latent(latent_heat)?;
        for (field, k) in [("k1", k1), ("k2", k2)] {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::invalid(field, format!("conductivity must be positive, got {k}")));
            }
        }
        Ok(PhaseLaw { kind: PhaseKind::TwoPhase, latent_heat, k1, k2 })
    }

    pub fn identity() -> Self {
        PhaseLaw { kind: PhaseKind::Identity, latent_heat: 0.0, k1: 1.0, k2: 0.0 }
    }

    pub fn kind(&self) -> PhaseKind {
        self.kind
    }

    pub fn latent_heat(&self) -> f64 {
        self.latent_heat
    }

    pub fn conductivities(&self) -> (f64, f64) {
        (self.k1, self.k2)
    }

    /// Temperature `Φ(h)`.
    #[inline]
    pub fn eval(&self, h: f64) -> f64 {
        match self.kind {
            PhaseKind::OnePhase => (h - self.latent_heat).max(0.0),
            PhaseKind::TwoPhase => self.k1 * (h - self.latent_heat).max(0.0) + self.k2 * h.min(0.0),
            PhaseKind::Identity => h,
        }
    }

    /// Global Lipschitz constant of `Φ`.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            PhaseKind::OnePhase | PhaseKind::Identity => 1.0,
            PhaseKind::TwoPhase => self.k1.max(self.k2),
        }
    }

    pub fn eval_into(&self, h: &[f64], u: &mut [f64]) {
        for (ui, &hi) in u.iter_mut().zip(h) {
            *ui = self.eval(hi);
        }
    }
}

fn check_latent(latent_heat: f64) -> Result<()> {
    if latent_heat.is_finite() && latent_heat >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("latent_heat", format!("must be finite and >= 0, got {latent_heat}")))
    }
}
