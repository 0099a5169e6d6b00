//! Ideal-pulse NV sequences: XY8-K detection and correlation spectroscopy.

use serde::{Deserialize, Serialize};

use super::ops::{trace_product, CMatrix, C64, ONE, ZERO};
use super::{rotating_frame_hamiltonian, Propagator, SpinSystem, TimeSeries};
use crate::error::{Error, Result};

// NV basis order is m_s = +1, 0, −1.
const MS_ZERO: usize = 1;
const MS_MINUS: usize = 2;
const NV_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulseAxis {
    X,
    Y,
    MinusX,
    MinusY,
}

impl PulseAxis {
    fn phase(self) -> f64 {
        use std::f64::consts::{FRAC_PI_2, PI};
        match self {
            PulseAxis::X => 0.0,
            PulseAxis::Y => FRAC_PI_2,
            PulseAxis::MinusX => PI,
            PulseAxis::MinusY => -FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SequenceElement {
    HalfPi(PulseAxis),
    Pi(PulseAxis),
    /// Free evolution (s).
    Free(f64),
    /// Discards NV coherences, standing in for T₂* dephasing during long
    /// storage intervals.
    Dephase,
}

const XY8_PHASES: [PulseAxis; 8] = [
    PulseAxis::X,
    PulseAxis::Y,
    PulseAxis::X,
    PulseAxis::Y,
    PulseAxis::Y,
    PulseAxis::X,
    PulseAxis::Y,
    PulseAxis::X,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub elements: Vec<SequenceElement>,
}

impl PulseSequence {
    /// (τ/2 – π – τ – π – … – π – τ/2) with XY8 phases, repeated `k` times.
    pub fn xy8(k: usize, tau: f64) -> Self {
        let mut elements = Vec::with_capacity(k * 17);
        for _ in 0..k {
            elements.push(SequenceElement::Free(tau / 2.0));
            for (i, axis) in XY8_PHASES.iter().enumerate() {
                elements.push(SequenceElement::Pi(*axis));
                let gap = if i == 7 { tau / 2.0 } else { tau };
                elements.push(SequenceElement::Free(gap));
            }
        }
        PulseSequence { elements }
    }

    /// π/2(x) – XY8-K – π/2(−x).
    pub fn xy8_detection(k: usize, tau: f64) -> Self {
        let mut elements = vec![SequenceElement::HalfPi(PulseAxis::X)];
        elements.extend(Self::xy8(k, tau).elements);
        elements.push(SequenceElement::HalfPi(PulseAxis::MinusX));
        PulseSequence { elements }
    }

    /// π/2(x) – XY8-K – π/2(y) – T – π/2(x) – XY8-K – π/2(y).
    pub fn correlation(k: usize, tau: f64, t: f64) -> Self {
        let block = Self::xy8(k, tau).elements;
        let mut elements = vec![SequenceElement::HalfPi(PulseAxis::X)];
        elements.extend(block.iter().copied());
        elements.push(SequenceElement::HalfPi(PulseAxis::Y));
        elements.push(SequenceElement::Dephase);
        elements.push(SequenceElement::Free(t));
        elements.push(SequenceElement::HalfPi(PulseAxis::X));
        elements.extend(block);
        elements.push(SequenceElement::HalfPi(PulseAxis::Y));
        PulseSequence { elements }
    }

    pub fn pi_pulse_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, SequenceElement::Pi(_)))
            .count()
    }

    pub fn duration(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                SequenceElement::Free(t) => *t,
                _ => 0.0,
            })
            .sum()
    }

    /// Propagates a density matrix through the sequence, element by element.
    pub fn apply(&self, sys: &SpinSystem, rho: &CMatrix) -> Result<CMatrix> {
        let engine = Engine::new(sys)?;
        let mut rho = rho.clone();
        for e in &self.elements {
            rho = match e {
                SequenceElement::Dephase => engine.dephase(&rho),
                other => {
                    let u = engine.element_unitary(other);
                    &u * rho * u.adjoint()
                }
            };
        }
        Ok(rho)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceOptions {
    /// NV longitudinal relaxation time (s); multiplies the correlation
    /// signal by exp(−T/T₁) when set.
    pub t1: Option<f64>,
}

pub(crate) struct Engine {
    prop: Propagator,
    nuclear_dim: usize,
}

impl Engine {
    pub(crate) fn new(sys: &SpinSystem) -> Result<Self> {
        if sys.nv.is_none() {
            return Err(Error::precondition("pulse sequences need an NV spin"));
        }
        let h = rotating_frame_hamiltonian(sys)?;
        Ok(Engine {
            prop: Propagator::new(&h),
            nuclear_dim: sys.dimension() / NV_DIM,
        })
    }

    fn dim(&self) -> usize {
        self.nuclear_dim * NV_DIM
    }

    /// Ideal rotation by `angle` about an equatorial axis of the
    /// |0⟩ ↔ |−1⟩ transition.
    fn pulse(&self, angle: f64, axis: PulseAxis) -> CMatrix {
        let (s, c) = (angle / 2.0).sin_cos();
        let phi = axis.phase();
        let mut small = CMatrix::identity(NV_DIM, NV_DIM);
        small[(MS_ZERO, MS_ZERO)] = C64::new(c, 0.0);
        small[(MS_MINUS, MS_MINUS)] = C64::new(c, 0.0);
        small[(MS_ZERO, MS_MINUS)] = C64::new(0.0, -s) * C64::from_polar(1.0, -phi);
        small[(MS_MINUS, MS_ZERO)] = C64::new(0.0, -s) * C64::from_polar(1.0, phi);
        super::kron(&small, &CMatrix::identity(self.nuclear_dim, self.nuclear_dim))
    }

    fn element_unitary(&self, e: &SequenceElement) -> CMatrix {
        use std::f64::consts::{FRAC_PI_2, PI};
        match *e {
            SequenceElement::HalfPi(a) => self.pulse(FRAC_PI_2, a),
            SequenceElement::Pi(a) => self.pulse(PI, a),
            SequenceElement::Free(t) => self.prop.unitary(t),
            SequenceElement::Dephase => CMatrix::identity(self.dim(), self.dim()),
        }
    }

    /// One XY8 block (eight π pulses) as a single unitary.
    fn xy8_block(&self, tau: f64) -> CMatrix {
        let half = self.prop.unitary(tau / 2.0);
        let full = self.prop.unitary(tau);
        let mut u = half.clone();
        for (i, axis) in XY8_PHASES.iter().enumerate() {
            u = self.pulse(std::f64::consts::PI, *axis) * u;
            u = if i == 7 { &half * u } else { &full * u };
        }
        u
    }

    fn xy8_k(&self, tau: f64, k: usize) -> CMatrix {
        let block = self.xy8_block(tau);
        let mut u = block.clone();
        for _ in 1..k {
            u = &block * u;
        }
        u
    }

    fn initial_state(&self) -> CMatrix {
        let n = self.dim();
        let mut rho = CMatrix::from_element(n, n, ZERO);
        let w = C64::new(1.0 / self.nuclear_dim as f64, 0.0);
        for r in 0..self.nuclear_dim {
            let i = MS_ZERO * self.nuclear_dim + r;
            rho[(i, i)] = w;
        }
        rho
    }

    /// P(m_s = 0) − P(m_s = −1) as an operator.
    fn readout(&self) -> CMatrix {
        let n = self.dim();
        let mut o = CMatrix::from_element(n, n, ZERO);
        for r in 0..self.nuclear_dim {
            let i0 = MS_ZERO * self.nuclear_dim + r;
            let i1 = MS_MINUS * self.nuclear_dim + r;
            o[(i0, i0)] = ONE;
            o[(i1, i1)] = -ONE;
        }
        o
    }

    fn dephase(&self, rho: &CMatrix) -> CMatrix {
        let nd = self.nuclear_dim;
        CMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            if i / nd == j / nd {
                rho[(i, j)]
            } else {
                ZERO
            }
        })
    }
}

/// Population difference P(0) − P(−1) after π/2 – XY8-K – π/2 for each
/// pulse spacing τ (s). Nuclei start fully mixed.
pub fn xy8_response(sys: &SpinSystem, taus: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::precondition("XY8-K needs K ≥ 1"));
    }
    let engine = Engine::new(sys)?;
    let rho0 = engine.initial_state();
    let readout = engine.readout();
    let open = engine.pulse(std::f64::consts::FRAC_PI_2, PulseAxis::X);
    let close = engine.pulse(std::f64::consts::FRAC_PI_2, PulseAxis::MinusX);
    taus.iter()
        .map(|&tau| {
            if !(tau > 0.0) {
                return Err(Error::domain("pulse spacing must be positive"));
            }
            let u = &close * engine.xy8_k(tau, k) * &open;
            let rho = &u * &rho0 * u.adjoint();
            Ok(trace_product(&rho, &readout).re)
        })
        .collect()
}

/// Correlation signal versus storage time T = i·dt, i = 0..n.
///
/// Two XY8-K blocks at spacing `tau` bracket a free evolution T during which
/// the NV holds a population and its coherences are discarded.
pub fn correlation_response(
    sys: &SpinSystem,
    dt: f64,
    n: usize,
    tau: f64,
    k: usize,
    opts: SequenceOptions,
) -> Result<TimeSeries> {
    if k == 0 {
        return Err(Error::precondition("XY8-K needs K ≥ 1"));
    }
    if !(tau > 0.0) {
        return Err(Error::domain("pulse spacing must be positive"));
    }
    let engine = Engine::new(sys)?;
    let dd = engine.xy8_k(tau, k);
    let x = engine.pulse(std::f64::consts::FRAC_PI_2, PulseAxis::X);
    let y = engine.pulse(std::f64::consts::FRAC_PI_2, PulseAxis::Y);
    let block = &y * dd * &x;

    let rho0 = engine.initial_state();
    let rho1 = engine.dephase(&(&block * rho0 * block.adjoint()));
    let observed = block.adjoint() * engine.readout() * &block;

    // Tr(ρ₁ U(T)† O' U(T)) in the eigenbasis of the rotating-frame Hamiltonian
    let r = engine.prop.to_eigenbasis(&rho1);
    let o = engine.prop.to_eigenbasis(&observed);
    let e = &engine.prop.energies;
    let d = r.nrows();
    let mut terms: Vec<(f64, C64)> = Vec::with_capacity(d * d);
    for j in 0..d {
        for kk in 0..d {
            let w = r[(j, kk)] * o[(kk, j)];
            if w.norm() > 1e-15 {
                terms.push(((e[kk] - e[j]) * 1e3, w));
            }
        }
    }
    let values = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let s: f64 = terms
                .iter()
                .map(|(f, w)| (w * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * t)).re)
                .sum();
            match opts.t1 {
                Some(t1) => s * (-t / t1).exp(),
                None => s,
            }
        })
        .collect();
    TimeSeries::new(dt, values)
}

#[cfg(test)]
mod tests {
    use super::super::{Nucleus, Species};
    use super::*;

    fn sensed() -> SpinSystem {
        SpinSystem::new(434.4)
            .with_nv()
            .with_nucleus(Nucleus { species: Species::H, a_zz: 8.0, a_zx: 15.0 })
            .with_nucleus(Nucleus { species: Species::D, a_zz: 1.0, a_zx: 2.0 })
    }

    fn readout_of(sys: &SpinSystem, seq: &PulseSequence) -> f64 {
        let engine = Engine::new(sys).unwrap();
        let rho = seq.apply(sys, &engine.initial_state()).unwrap();
        trace_product(&rho, &engine.readout()).re
    }

    #[test]
    fn xy8_layout() {
        let seq = PulseSequence::xy8(3, 100e-9);
        assert_eq!(seq.pi_pulse_count(), 24);
        assert!((seq.duration() - 24.0 * 100e-9).abs() < 1e-18);
    }

    #[test]
    fn xy8_matches_elementwise_propagation() {
        let sys = sensed();
        let taus = [250e-9, 270.3e-9, 290e-9];
        let fast = xy8_response(&sys, &taus, 3).unwrap();
        for (tau, f) in taus.iter().zip(fast) {
            let slow = readout_of(&sys, &PulseSequence::xy8_detection(3, *tau));
            assert!((f - slow).abs() < 1e-10, "{f} vs {slow}");
        }
    }

    #[test]
    fn correlation_matches_elementwise_propagation() {
        let sys = sensed();
        let tau = 270.3e-9;
        let dt = 0.37e-6;
        let fast = correlation_response(&sys, dt, 6, tau, 2, SequenceOptions::default()).unwrap();
        for (i, f) in fast.values.iter().enumerate() {
            let slow = readout_of(&sys, &PulseSequence::correlation(2, tau, i as f64 * dt));
            assert!((f - slow).abs() < 1e-10, "{f} vs {slow}");
        }
    }

    #[test]
    fn sequences_need_an_nv() {
        let sys = SpinSystem::new(100.0).with_nucleus(Nucleus::new(Species::H));
        assert!(xy8_response(&sys, &[1e-7], 1).is_err());
        assert!(xy8_response(&sensed(), &[1e-7], 0).is_err());
        assert!(xy8_response(&sensed(), &[-1e-7], 1).is_err());
    }
}
