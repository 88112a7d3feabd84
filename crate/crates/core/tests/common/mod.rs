//! Random states and circuits shared by the integration tests.

#![allow(dead_code)]

use cvbell_core::gaussian::{
    apply, beamsplitter, cp_map, phase_rotation, polarization_mixer, ChannelParams, CovarianceMatrix,
    SymplecticTransform,
};
use proptest::prelude::*;

/// One optical element on a four-mode register.
#[derive(Debug, Clone, Copy)]
pub enum Element {
    Splitter(usize, usize),
    Rotation(usize, f64),
    Mixer(usize, usize, f64),
}

impl Element {
    pub fn transform(self, n_modes: usize) -> SymplecticTransform {
        match self {
            Element::Splitter(i, j) => beamsplitter(i, j, n_modes),
            Element::Rotation(i, phi) => phase_rotation(i, phi, n_modes),
            Element::Mixer(i, j, t) => polarization_mixer(i, j, t, n_modes),
        }
        .unwrap()
    }
}

fn distinct_pair(n: usize) -> impl Strategy<Value = (usize, usize)> {
    (0..n, 1..n).prop_map(move |(i, d)| (i, (i + d) % n))
}

pub fn element(n: usize) -> impl Strategy<Value = Element> {
    let angle = -std::f64::consts::PI..std::f64::consts::PI;
    prop_oneof![
        distinct_pair(n).prop_map(|(i, j)| Element::Splitter(i, j)),
        (0..n, angle.clone()).prop_map(|(i, phi)| Element::Rotation(i, phi)),
        (distinct_pair(n), angle).prop_map(|((i, j), t)| Element::Mixer(i, j, t)),
    ]
}

pub fn circuit(n: usize, len: usize) -> impl Strategy<Value = Vec<Element>> {
    prop::collection::vec(element(n), 1..=len)
}

pub fn compose(n: usize, elements: &[Element]) -> SymplecticTransform {
    let parts: Vec<_> = elements.iter().map(|e| e.transform(n)).collect();
    SymplecticTransform::chain(n, &parts).unwrap()
}

/// Independent single-mode squeezed thermal inputs `diag(ν s, ν / s)`.
pub fn squeezed_thermal_input(modes: &[(f64, f64)]) -> CovarianceMatrix {
    let diag: Vec<f64> = modes.iter().flat_map(|&(nu, s)| [nu * s, nu / s]).collect();
    CovarianceMatrix::diagonal(&diag).unwrap()
}

/// `(ν, s)` per mode: thermal factor ν ≥ 1 and squeezing s in `[1/smax, smax]`.
pub fn mode_params(n: usize, smax: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1.0..3.0f64, (1.0 / smax)..smax), n)
}

/// A random physical channel: η in (0.05, 1], ε ≥ 1 − η.
pub fn physical_channel() -> impl Strategy<Value = ChannelParams> {
    (0.05..=1.0f64, 0.0..0.5f64).prop_map(|(eta, extra)| ChannelParams::new(eta, 1.0 - eta + extra).unwrap())
}

/// A random four-mode classical (thermal, passively mixed) state, optionally
/// sent through a physical channel.
pub fn separable_state() -> impl Strategy<Value = CovarianceMatrix> {
    (
        prop::collection::vec(1.0..4.0f64, 4),
        circuit(4, 12),
        physical_channel(),
    )
        .prop_map(|(nus, elements, ch)| {
            let input = squeezed_thermal_input(&nus.iter().map(|&nu| (nu, 1.0)).collect::<Vec<_>>());
            cp_map(&apply(&compose(4, &elements), &input).unwrap(), ch).state
        })
}

/// A random physical two-mode state with squeezing, mixing and noise, used
/// to draw moment sets.
pub fn two_mode_state() -> impl Strategy<Value = CovarianceMatrix> {
    (mode_params(2, 4.0), circuit(2, 6), physical_channel()).prop_map(|(modes, elements, ch)| {
        cp_map(&apply(&compose(2, &elements), &squeezed_thermal_input(&modes)).unwrap(), ch).state
    })
}
