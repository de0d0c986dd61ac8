//! Separable time-frequency lattices and the Heisenberg 2-cocycle.
//!
//! The primal lattice is Λ = θZ×Z and its adjoint (dual) lattice is
//! Λ° = Z×(1/θ)Z, the set of points whose time-frequency shifts commute
//! with every shift from Λ. Both are indexed by integer pairs (m, n).
//!
//! Time-frequency shifts compose as π(z)π(z') = c(z, z')π(z + z') with
//! c(z, z') = exp(-2πi x η) for z = (x, ω), z' = (y, η). The algebra over
//! the primal lattice carries this cocycle; the algebra over the dual
//! lattice carries its complex conjugate.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::NcError;

/// Which of the two lattices (hence which twisted algebra) an object lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Λ = θZ×Z, cocycle c.
    Primal,
    /// Λ° = Z×(1/θ)Z, cocycle conj(c).
    Dual,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Primal => "Primal",
            Side::Dual => "Dual",
        }
    }
}

/// A point of the time-frequency plane, (time shift, frequency shift).
pub type Point = (f64, f64);

/// The pair (θ, side) fixing one of the two lattices.
///
/// θ must lie in (0,1); irrationality is assumed downstream but not enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    theta: f64,
    side: Side,
}

impl LatticeSpec {
    pub fn new(theta: f64, side: Side) -> Result<Self, NcError> {
        if !(theta > 0.0 && theta < 1.0) || !theta.is_finite() {
            return Err(NcError::InvalidTheta(theta));
        }
        Ok(LatticeSpec { theta, side })
    }

    pub fn primal(theta: f64) -> Result<Self, NcError> {
        Self::new(theta, Side::Primal)
    }

    pub fn dual(theta: f64) -> Result<Self, NcError> {
        Self::new(theta, Side::Dual)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// The other lattice of the pair, with the conjugate cocycle.
    pub fn adjoint(&self) -> LatticeSpec {
        LatticeSpec {
            theta: self.theta,
            side: match self.side {
                Side::Primal => Side::Dual,
                Side::Dual => Side::Primal,
            },
        }
    }

    /// Covolume: θ for the primal lattice, 1/θ for the dual.
    pub fn vol(&self) -> f64 {
        match self.side {
            Side::Primal => self.theta,
            Side::Dual => 1.0 / self.theta,
        }
    }

    /// Embeds the integer index (m, n) into the time-frequency plane.
    pub fn point(&self, m: i64, n: i64) -> Point {
        match self.side {
            Side::Primal => (m as f64 * self.theta, n as f64),
            Side::Dual => (m as f64, n as f64 / self.theta),
        }
    }

    /// Squared Euclidean length of the embedded index, |λ|².
    pub fn norm_sq(&self, m: i64, n: i64) -> f64 {
        let (x, w) = self.point(m, n);
        x * x + w * w
    }

    /// The 2-cocycle of this side evaluated at two plane points.
    ///
    /// Primal: c(z, z') = exp(-2πi x η); dual: the complex conjugate.
    /// The phase is computed with a compensated product and reduced
    /// modulo one turn before scaling by 2π, so the cocycle identity
    /// holds to ~1e-15 even for coordinates far from the origin.
    pub fn cocycle(&self, z: Point, w: Point) -> Complex64 {
        let turns = phase_turns(z.0, w.1);
        let c = Complex64::new(0.0, -2.0 * PI * turns).exp();
        match self.side {
            Side::Primal => c,
            Side::Dual => c.conj(),
        }
    }

    /// Cocycle evaluated at integer indices of this lattice.
    pub fn cocycle_idx(&self, a: (i64, i64), b: (i64, i64)) -> Complex64 {
        self.cocycle(self.point(a.0, a.1), self.point(b.0, b.1))
    }
}

/// x·w in units of full turns, computed as an exact two-product and
/// reduced to |value| ≲ 1/2 before the residual is re-added.
pub(crate) fn phase_turns(x: f64, w: f64) -> f64 {
    let hi = x * w;
    let lo = x.mul_add(w, -hi);
    (hi - hi.round()) + lo
}
