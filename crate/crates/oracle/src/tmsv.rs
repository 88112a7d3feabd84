//! Two-mode squeezed vacuum photon statistics.

/// Squeezing parameter of a two-mode squeezed vacuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmsvParams {
    pub r: f64,
}

impl TmsvParams {
    pub fn new(r: f64) -> Self {
        assert!(r.is_finite() && r >= 0.0, "squeezing parameter must be finite and >= 0");
        Self { r }
    }

    /// Mean photon number of either marginal.
    pub fn mean_photons(&self) -> f64 {
        self.r.sinh().powi(2)
    }

    /// Marginal quadrature variance, cosh 2r.
    pub fn marginal_variance(&self) -> f64 {
        (2.0 * self.r).cosh()
    }

    /// Cross-quadrature moment, sinh 2r.
    pub fn cross_moment(&self) -> f64 {
        (2.0 * self.r).sinh()
    }
}

/// `<n_A n_B>` for a TMSV in closed form: `2 n̄² + n̄`.
///
/// The marginals are thermal and photon numbers are perfectly correlated, so
/// `<n_A n_B> = <n²>` of a thermal distribution.
pub fn tmsv_nn(r: f64) -> f64 {
    let nbar = TmsvParams::new(r).mean_photons();
    2.0 * nbar * nbar + nbar
}

/// `<n_A n_B>` for a TMSV by explicit summation of `n² P(n)` over the thermal
/// distribution up to `cutoff` photons.
pub fn tmsv_nn_fock_sum(r: f64, cutoff: usize) -> f64 {
    let nbar = TmsvParams::new(r).mean_photons();
    let ratio = nbar / (1.0 + nbar);
    let mut p = 1.0 / (1.0 + nbar);
    let mut total = 0.0;
    for n in 0..=cutoff {
        let nf = n as f64;
        total += nf * nf * p;
        p *= ratio;
    }
    total
}
