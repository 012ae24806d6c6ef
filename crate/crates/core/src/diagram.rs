//! Signal/noise decomposition and persistence measures.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::persistence::{PersistenceDiagram, PersistentDot};

/// `|death - birth|` of a dot.
pub fn persistence_of(dot: &PersistentDot) -> f64 {
    dot.persistence()
}

/// A diagram split by persistence: `signal` holds dots with persistence
/// strictly above `phi`, `noise` the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedDiagram {
    pub signal: PersistenceDiagram,
    pub noise: PersistenceDiagram,
    pub phi: f64,
}

pub fn decompose(diagram: &PersistenceDiagram, phi: f64) -> Result<DecomposedDiagram> {
    if !(phi >= 0.0) {
        return Err(Error::NegativePhi(phi));
    }
    let (signal, noise): (Vec<PersistentDot>, Vec<PersistentDot>) = diagram
        .dots
        .iter()
        .partition(|dot| dot.persistence() > phi);
    Ok(DecomposedDiagram {
        signal: PersistenceDiagram::new(signal, diagram.direction, diagram.source_dims),
        noise: PersistenceDiagram::new(noise, diagram.direction, diagram.source_dims),
        phi,
    })
}

/// `(sum per(x)^p)^(1/p)` over the dots of a diagram.
pub fn total_persistence(diagram: &PersistenceDiagram, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    if p.is_infinite() {
        return Ok(diagram.dots.iter().map(|d| d.persistence()).fold(0.0, f64::max));
    }
    let sum: f64 = diagram
        .dots
        .iter()
        .map(|d| libm::pow(d.persistence(), p))
        .sum();
    Ok(libm::pow(sum, 1.0 / p))
}
