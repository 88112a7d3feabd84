//! The four-mode Bell source and the two polarization analyzers.
//!
//! Two X-squeezed beams (the second turned into a P-squeezed beam by a π/2
//! phase shift) meet on a balanced beamsplitter and form an EPR pair. The
//! second EPR arm is rotated into the vertical polarization and both arms
//! are interfered on a second balanced beamsplitter, which acts separately on
//! each polarization and brings in one vacuum mode per polarization. The
//! outputs are ordered `(A^h, A^v, B^h, B^v)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

use crate::correlation::SecondMoments;
use crate::error::{Error, Result};
use crate::gaussian::{
    apply, beamsplitter, bell_input_state, cp_map, mode_permutation, phase_rotation, polarization_mixer,
    ChannelParams, CovarianceMatrix, SymplecticTransform,
};

pub const A_H: usize = 0;
pub const A_V: usize = 1;
pub const B_H: usize = 2;
pub const B_V: usize = 3;

/// Analyzer output modes.
pub const A_PLUS: usize = 0;
pub const A_MINUS: usize = 1;
pub const B_PLUS: usize = 2;
pub const B_MINUS: usize = 3;

/// Analyzer angles for the CHSH combination
/// `E(θ_A,θ_B) + E(θ′_A,θ′_B) + E(θ′_A,θ_B) − E(θ_A,θ′_B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellAngles {
    pub theta_a: f64,
    pub theta_a_prime: f64,
    pub theta_b: f64,
    pub theta_b_prime: f64,
}

impl BellAngles {
    /// Settings `{π/8, 3π/8} × {0, π/4}`, labeled so that the 3π/8-separated
    /// pair is the subtracted term.
    pub fn canonical() -> Self {
        Self {
            theta_a: 3.0 * FRAC_PI_8,
            theta_a_prime: FRAC_PI_8,
            theta_b: FRAC_PI_4,
            theta_b_prime: 0.0,
        }
    }

    /// The four `(θ_A, θ_B)` pairs in the order they enter the CHSH sum.
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.theta_a, self.theta_b),
            (self.theta_a_prime, self.theta_b_prime),
            (self.theta_a_prime, self.theta_b),
            (self.theta_a, self.theta_b_prime),
        ]
    }

    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            theta_a: self.theta_a + delta,
            theta_a_prime: self.theta_a_prime + delta,
            theta_b: self.theta_b + delta,
            theta_b_prime: self.theta_b_prime + delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.theta_a, self.theta_a_prime, self.theta_b, self.theta_b_prime];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("analyzer angles must be finite".into()))
        }
    }
}

impl Default for BellAngles {
    fn default() -> Self {
        Self::canonical()
    }
}

/// Source and channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub v_sqz: f64,
    pub v_asqz: f64,
    /// Phase correction on `A^v` after the second beamsplitter.
    #[serde(default)]
    pub qwp_phase: f64,
    /// Beam-path phase on the second EPR arm.
    #[serde(default)]
    pub arm_phase: f64,
    pub channel: ChannelParams,
}

impl CircuitConfig {
    pub fn new(v_sqz: f64, v_asqz: f64, channel: ChannelParams) -> Self {
        Self {
            v_sqz,
            v_asqz,
            qwp_phase: 0.0,
            arm_phase: 0.0,
            channel,
        }
    }

    /// Pure squeezing with the conjugate quadrature at the uncertainty bound.
    pub fn pure(v_sqz: f64, channel: ChannelParams) -> Self {
        Self::new(v_sqz, 1.0 / v_sqz, channel)
    }

    /// From squeezing in dB and single-mode purity `μ = 1/√(V_sqz V_asqz)`.
    pub fn from_squeezing_db(squeezing_db: f64, purity: f64, channel: ChannelParams) -> Self {
        let v_sqz = db_to_variance(squeezing_db);
        Self::new(v_sqz, 1.0 / (purity * purity * v_sqz), channel)
    }

    pub fn validate(&self) -> Result<()> {
        bell_input_state(self.v_sqz, self.v_asqz)?;
        ChannelParams::new(self.channel.eta, self.channel.epsilon)?;
        if !(self.qwp_phase.is_finite() && self.arm_phase.is_finite()) {
            return Err(Error::InvalidArgument("circuit phases must be finite".into()));
        }
        Ok(())
    }
}

/// `10^(−dB/10)`.
pub fn db_to_variance(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// `−10 log10(V)`.
pub fn variance_to_db(v: f64) -> f64 {
    -10.0 * v.log10()
}

/// Passive part of the source: every element from the squeezers to the
/// quarter-wave plate, outputs in `(A^h, A^v, B^h, B^v)` order.
pub fn source_transform(qwp_phase: f64, arm_phase: f64) -> Result<SymplecticTransform> {
    const N: usize = 4;
    // Input modes: 0, 1 squeezers; 2, 3 the horizontal and vertical vacuum
    // ports of the second beamsplitter.
    SymplecticTransform::chain(
        N,
        &[
            phase_rotation(1, FRAC_PI_2, N)?,
            beamsplitter(0, 1, N)?,
            phase_rotation(1, arm_phase, N)?,
            beamsplitter(3, 1, N)?,
            beamsplitter(0, 2, N)?,
            mode_permutation(&[0, 3, 2, 1])?,
            phase_rotation(A_V, qwp_phase, N)?,
        ],
    )
}

/// Measured four-mode state `η S γ_in Sᵀ + ε I`.
pub fn build_bell_state(cfg: &CircuitConfig) -> Result<CovarianceMatrix> {
    cfg.validate()?;
    let input = bell_input_state(cfg.v_sqz, cfg.v_asqz)?;
    build_from_input(&input, cfg)
}

/// Pushes an arbitrary four-mode input through the source optics and the
/// channel of `cfg`; `cfg.v_sqz` and `cfg.v_asqz` are ignored.
pub fn build_from_input(input: &CovarianceMatrix, cfg: &CircuitConfig) -> Result<CovarianceMatrix> {
    if input.n_modes() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: input.n_modes(),
        });
    }
    let s = source_transform(cfg.qwp_phase, cfg.arm_phase)?;
    Ok(cp_map(&apply(&s, input)?, cfg.channel).state)
}

/// Same as [`build_bell_state`] without validating the parameters, for
/// the fitter's excursions into unphysical corners.
pub(crate) fn build_bell_state_unchecked(cfg: &CircuitConfig) -> Result<CovarianceMatrix> {
    let input = CovarianceMatrix::diagonal(&[cfg.v_sqz, cfg.v_asqz, cfg.v_sqz, cfg.v_asqz, 1.0, 1.0, 1.0, 1.0])?;
    build_from_input(&input, cfg)
}

/// Rotates Alice's pair by θ_A and Bob's by θ_B, giving `(A⁺, A⁻, B⁺, B⁻)`.
pub fn analyze(gamma4: &CovarianceMatrix, theta_a: f64, theta_b: f64) -> Result<CovarianceMatrix> {
    if gamma4.n_modes() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: gamma4.n_modes(),
        });
    }
    let s = polarization_mixer(B_H, B_V, theta_b, 4)?.after(&polarization_mixer(A_H, A_V, theta_a, 4)?)?;
    apply(&s, gamma4)
}

/// Analyzer output port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    Plus,
    Minus,
}

impl Port {
    pub fn alice_mode(self) -> usize {
        match self {
            Port::Plus => A_PLUS,
            Port::Minus => A_MINUS,
        }
    }

    pub fn bob_mode(self) -> usize {
        match self {
            Port::Plus => B_PLUS,
            Port::Minus => B_MINUS,
        }
    }
}

/// Detector pairs in R-table order: `(+,+), (−,−), (+,−), (−,+)`.
pub const PAIR_ORDER: [(Port, Port); 4] = [
    (Port::Plus, Port::Plus),
    (Port::Minus, Port::Minus),
    (Port::Plus, Port::Minus),
    (Port::Minus, Port::Plus),
];

/// Two-mode reduced state of one (A, B) detector pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMarginal {
    pub alice: Port,
    pub bob: Port,
    /// Ordered `(X_A, P_A, X_B, P_B)`.
    pub block: CovarianceMatrix,
}

impl PairMarginal {
    pub fn modes(&self) -> [usize; 2] {
        [self.alice.alice_mode(), self.bob.bob_mode()]
    }

    /// Cross-moments and variances entering the photon-correlation formula.
    pub fn moments(&self) -> SecondMoments {
        let g = &self.block;
        SecondMoments {
            xx: g.get(0, 2),
            pp: g.get(1, 3),
            xp: g.get(0, 3),
            px: g.get(1, 2),
            va_x: g.get(0, 0),
            va_p: g.get(1, 1),
            vb_x: g.get(2, 2),
            vb_p: g.get(3, 3),
            v_v: 1.0,
        }
    }

    /// Writes the block back into a four-mode analyzed state.
    pub fn embed_into(&self, gamma: &CovarianceMatrix) -> Result<CovarianceMatrix> {
        gamma.with_marginal(&self.modes(), &self.block)
    }
}

pub fn pair_marginal(gamma_analyzed: &CovarianceMatrix, alice: Port, bob: Port) -> Result<PairMarginal> {
    if gamma_analyzed.n_modes() != 4 {
        return Err(Error::MomentExtraction(format!(
            "expected a four-mode analyzed state, got {} modes",
            gamma_analyzed.n_modes()
        )));
    }
    let block = gamma_analyzed.marginal(&[alice.alice_mode(), bob.bob_mode()])?;
    Ok(PairMarginal { alice, bob, block })
}
