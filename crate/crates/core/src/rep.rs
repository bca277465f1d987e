//! Representation bookkeeping: group dimension, spin, and action units.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Fundamental representation of SU(n), viewed as a spin S = (n-1)/2 multiplet.
///
/// The Hilbert basis is ordered lowest weight first: index k holds
/// |S, m = -S + k> for k = 0..n-1, so the coherent-state expansion
/// |0> + sum_i psi_i |i> is literal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresentationSpec {
    /// Group dimension n = 2S + 1.
    pub n: usize,
    /// Action unit (defaults to 1).
    pub hbar: f64,
}

impl RepresentationSpec {
    /// Build the spec for SU(n) with hbar = 1.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_hbar(n, 1.0)
    }

    /// Build the spec for SU(n) with an explicit hbar.
    pub fn with_hbar(n: usize, hbar: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "hbar must be a positive finite real, got {hbar}"
            )));
        }
        Ok(Self { n, hbar })
    }

    /// Twice the spin, exactly: 2S = n - 1.
    pub fn two_s(&self) -> usize {
        self.n - 1
    }

    /// Spin S = (n-1)/2.
    pub fn spin(&self) -> f64 {
        (self.n - 1) as f64 / 2.0
    }

    /// Number of complex stereographic coordinates, n - 1.
    pub fn num_params(&self) -> usize {
        self.n - 1
    }

    /// Casimir eigenvalue S(S+1) hbar^2 of the spin-S multiplet.
    pub fn casimir_eigenvalue(&self) -> f64 {
        let s = self.spin();
        s * (s + 1.0) * self.hbar * self.hbar
    }
}
