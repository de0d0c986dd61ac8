//! Finite-support model of the twisted group algebras over Λ and Λ°.
//!
//! An element is a coefficient map a: Z² → C supported in the box
//! |m|, |n| ≤ R, representing Σ a(λ) π(λ) with λ the embedded lattice
//! point. The product is twisted convolution
//!
//!   (a ♮ b)(λ) = Σ_μ a(μ) b(λ-μ) c(μ, λ-μ),
//!
//! the involution is a*(λ) = c(λ,λ) conj(a(-λ)), and the canonical trace
//! reads off the coefficient at the origin. The involution phase is the
//! unconjugated diagonal cocycle of the element's side: that is the unique
//! choice for which π(a)* = π(a*) holds for the concrete shift operators
//! and the left regular matrices form a *-representation.
//!
//! Derivations act diagonally: on the primal side ∂_ν scales the (m,n)
//! coefficient by 2πi m (ν=1) or 2πi n (ν=2). Dual-side derivations carry
//! the scale factor κ = 1/2, the normalization compatible with the module
//! connection and the πi(Z+iZ) gauge lattice.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::NcError;
use crate::lattice::{LatticeSpec, Side};

/// Dual-side derivation scale: ∂_ν on Λ° multiplies (m,n) by κ·2πi·(m or n).
///
/// Fixed by compatibility of the dual derivations with the module
/// connection and locked by tests (gauge shift πi(m+ni) on monomials).
pub const KAPPA_DUAL: f64 = 0.5;

/// Relative tail threshold above which a product flags truncation loss.
pub const TAIL_WARN_RATIO: f64 = 1e-9;

/// Which derivation, ∂₁ (first torus factor) or ∂₂ (second).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivation {
    D1,
    D2,
}

/// Finitely supported coefficient map over an integer-indexed lattice.
#[derive(Debug, Clone)]
pub struct AlgebraElement {
    lattice: LatticeSpec,
    radius: i64,
    /// Row-major over the box, index (m+R)*(2R+1) + (n+R).
    coeffs: Vec<Complex64>,
    /// Estimated ℓ¹ mass pushed beyond the radius by truncating operations.
    tail_norm: f64,
    /// Set when a single operation discarded more than
    /// `TAIL_WARN_RATIO` times the ℓ¹ norm of its result.
    truncation_warning: bool,
}

impl AlgebraElement {
    pub fn zero(lattice: LatticeSpec, radius: i64) -> Self {
        assert!(radius >= 0, "radius must be nonnegative");
        let side = (2 * radius + 1) as usize;
        AlgebraElement {
            lattice,
            radius,
            coeffs: vec![Complex64::new(0.0, 0.0); side * side],
            tail_norm: 0.0,
            truncation_warning: false,
        }
    }

    /// The identity δ₀ of the twisted algebra.
    pub fn delta(lattice: LatticeSpec) -> Self {
        let mut e = Self::zero(lattice, 0);
        e.coeffs[0] = Complex64::new(1.0, 0.0);
        e
    }

    /// c·π(λ) for the lattice index (m, n).
    pub fn monomial(lattice: LatticeSpec, m: i64, n: i64, c: Complex64) -> Self {
        let r = m.abs().max(n.abs());
        let mut e = Self::zero(lattice, r);
        e.set(m, n, c);
        e
    }

    /// Generator U₁ = π((θ,0)) (primal) or the dual translation generator.
    pub fn u1(lattice: LatticeSpec) -> Self {
        Self::monomial(lattice, 1, 0, Complex64::new(1.0, 0.0))
    }

    /// Generator U₂ = π((0,1)) (primal) or the dual modulation generator.
    pub fn u2(lattice: LatticeSpec) -> Self {
        Self::monomial(lattice, 0, 1, Complex64::new(1.0, 0.0))
    }

    pub fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    pub fn side(&self) -> Side {
        self.lattice.side()
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn tail_norm(&self) -> f64 {
        self.tail_norm
    }

    /// Overrides the tail estimate (used by lattice-sampling constructors
    /// that know their own truncation error).
    pub fn set_tail_norm(&mut self, tail: f64) {
        self.tail_norm = tail;
    }

    pub fn truncation_warning(&self) -> bool {
        self.truncation_warning
    }

    fn idx(&self, m: i64, n: i64) -> Option<usize> {
        if m.abs() > self.radius || n.abs() > self.radius {
            None
        } else {
            let side = (2 * self.radius + 1) as i64;
            Some(((m + self.radius) * side + (n + self.radius)) as usize)
        }
    }

    pub fn get(&self, m: i64, n: i64) -> Complex64 {
        self.idx(m, n)
            .map(|i| self.coeffs[i])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn set(&mut self, m: i64, n: i64, v: Complex64) {
        let i = self
            .idx(m, n)
            .expect("index outside the declared radius");
        self.coeffs[i] = v;
    }

    pub fn add_at(&mut self, m: i64, n: i64, v: Complex64) {
        let i = self
            .idx(m, n)
            .expect("index outside the declared radius");
        self.coeffs[i] += v;
    }

    /// Iterates all stored coefficients in row-major (m, n) order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        let r = self.radius;
        let side = 2 * r + 1;
        self.coeffs.iter().enumerate().map(move |(i, &c)| {
            let m = i as i64 / side - r;
            let n = i as i64 % side - r;
            (m, n, c)
        })
    }

    /// Nonzero coefficients in lexicographic (m, n) order.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        self.iter().filter(|&(_, _, c)| c != Complex64::new(0.0, 0.0))
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Diagnostic sup norm sup |a(m,n)|.
    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Weighted norm Σ |a(λ)| (1+|λ|²)^{s/2} over embedded lattice points.
    pub fn s_norm(&self, s: f64) -> f64 {
        assert!(s >= 0.0, "s_norm requires s >= 0");
        self.iter()
            .map(|(m, n, c)| c.norm() * (1.0 + self.lattice.norm_sq(m, n)).powf(s / 2.0))
            .sum()
    }

    /// Coefficient at the origin; the canonical trace of the algebra.
    pub fn trace(&self) -> Complex64 {
        self.get(0, 0)
    }

    /// Tr(a ♮ b) evaluated directly as Σ_μ a(μ) b(-μ) c(μ, -μ), which is
    /// exact for the stored supports (no output truncation involved).
    pub fn trace_mul(&self, other: &Self) -> Result<Complex64, NcError> {
        if self.side() != other.side() {
            return Err(NcError::SideMismatch(
                self.side().name(),
                other.side().name(),
            ));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, n, c) in self.iter_nonzero() {
            let b = other.get(-m, -n);
            if b != Complex64::new(0.0, 0.0) {
                acc += c * b * self.lattice.cocycle_idx((m, n), (-m, -n));
            }
        }
        Ok(acc)
    }

    /// Some(c, m, n) when the element is a single monomial c·π(m,n).
    pub fn as_monomial(&self) -> Option<(i64, i64, Complex64)> {
        let mut found = None;
        for (m, n, c) in self.iter_nonzero() {
            if found.is_some() {
                return None;
            }
            found = Some((m, n, c));
        }
        found
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= s;
        }
        out.tail_norm = self.tail_norm * s.norm();
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.linear_comb(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.linear_comb(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// α·self + β·other at the larger of the two radii.
    pub fn linear_comb(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Self {
        assert_eq!(
            self.side(),
            other.side(),
            "linear combination across lattice sides"
        );
        let r = self.radius.max(other.radius);
        let mut out = Self::zero(self.lattice, r);
        for (m, n, c) in self.iter() {
            out.add_at(m, n, alpha * c);
        }
        for (m, n, c) in other.iter() {
            out.add_at(m, n, beta * c);
        }
        out.tail_norm = self.tail_norm * alpha.norm() + other.tail_norm * beta.norm();
        out.truncation_warning = self.truncation_warning || other.truncation_warning;
        out
    }

    /// Re-boxes to `new_radius`, accumulating any discarded ℓ¹ mass.
    pub fn resized(&self, new_radius: i64) -> Self {
        let mut out = Self::zero(self.lattice, new_radius);
        let mut discarded = 0.0;
        for (m, n, c) in self.iter() {
            if m.abs() <= new_radius && n.abs() <= new_radius {
                out.set(m, n, c);
            } else {
                discarded += c.norm();
            }
        }
        out.tail_norm = self.tail_norm + discarded;
        out.truncation_warning = self.truncation_warning;
        out
    }

    /// Drops coefficients below `rel_tol` times the ℓ¹ norm and shrinks the
    /// box to the remaining support. Dropped mass goes into the tail.
    pub fn pruned(&self, rel_tol: f64) -> Self {
        let cut = self.l1_norm() * rel_tol;
        let mut support = 0i64;
        for (m, n, c) in self.iter() {
            if c.norm() > cut {
                support = support.max(m.abs().max(n.abs()));
            }
        }
        let mut out = Self::zero(self.lattice, support);
        let mut discarded = 0.0;
        for (m, n, c) in self.iter() {
            if m.abs() <= support && n.abs() <= support && c.norm() > cut {
                out.set(m, n, c);
            } else {
                discarded += c.norm();
            }
        }
        out.tail_norm = self.tail_norm + discarded;
        out.truncation_warning = self.truncation_warning;
        out
    }

    /// Twisted convolution truncated to radius max(R_a, R_b).
    pub fn twisted_mul(&self, other: &Self) -> Result<Self, NcError> {
        self.twisted_mul_at(other, self.radius.max(other.radius))
    }

    /// Twisted convolution with an explicit output radius.
    ///
    /// The convolution is evaluated on its full support R_a + R_b; mass
    /// outside the output box is accumulated into `tail_norm` and flags a
    /// truncation warning when it exceeds `TAIL_WARN_RATIO` relative to
    /// the ℓ¹ norm of the result.
    pub fn twisted_mul_at(&self, other: &Self, out_radius: i64) -> Result<Self, NcError> {
        if self.side() != other.side() {
            return Err(NcError::SideMismatch(
                self.side().name(),
                other.side().name(),
            ));
        }
        let mut out = Self::zero(self.lattice, out_radius);
        let full = self.radius + other.radius;
        let mut discarded = 0.0;
        for lm in -full..=full {
            for ln in -full..=full {
                let mut acc = Complex64::new(0.0, 0.0);
                // μ ranges over supp(a) ∩ (λ - supp(b)).
                let m_lo = (-self.radius).max(lm - other.radius);
                let m_hi = self.radius.min(lm + other.radius);
                let n_lo = (-self.radius).max(ln - other.radius);
                let n_hi = self.radius.min(ln + other.radius);
                for mm in m_lo..=m_hi {
                    for mn in n_lo..=n_hi {
                        let a = self.get(mm, mn);
                        if a == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        let b = other.get(lm - mm, ln - mn);
                        if b == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        acc += a * b * self.lattice.cocycle_idx((mm, mn), (lm - mm, ln - mn));
                    }
                }
                if lm.abs() <= out_radius && ln.abs() <= out_radius {
                    if acc != Complex64::new(0.0, 0.0) {
                        out.set(lm, ln, acc);
                    }
                } else {
                    discarded += acc.norm();
                }
            }
        }
        out.tail_norm = discarded
            + self.tail_norm * other.l1_norm()
            + self.l1_norm() * other.tail_norm;
        out.truncation_warning = self.truncation_warning
            || other.truncation_warning
            || discarded > TAIL_WARN_RATIO * out.l1_norm().max(f64::MIN_POSITIVE);
        Ok(out)
    }

    /// Involution a*(λ) = c(λ,λ)·conj(a(-λ)) with this side's cocycle.
    pub fn involution(&self) -> Self {
        let mut out = Self::zero(self.lattice, self.radius);
        for (m, n, c) in self.iter() {
            if c != Complex64::new(0.0, 0.0) {
                let phase = self.lattice.cocycle_idx((-m, -n), (-m, -n));
                out.set(-m, -n, phase * c.conj());
            }
        }
        out.tail_norm = self.tail_norm;
        out.truncation_warning = self.truncation_warning;
        out
    }

    /// ||a - a*||₁, the deviation from self-adjointness.
    pub fn self_adjointness_defect(&self) -> f64 {
        self.sub(&self.involution()).l1_norm()
    }

    fn derivation_multiplier(&self, nu: Derivation, m: i64, n: i64) -> Complex64 {
        let scale = match self.side() {
            Side::Primal => 1.0,
            Side::Dual => KAPPA_DUAL,
        };
        let k = match nu {
            Derivation::D1 => m,
            Derivation::D2 => n,
        };
        Complex64::new(0.0, 2.0 * PI * scale * k as f64)
    }

    /// The torus derivation ∂_ν acting diagonally on coefficients.
    pub fn derive(&self, nu: Derivation) -> Self {
        let mut out = Self::zero(self.lattice, self.radius);
        for (m, n, c) in self.iter() {
            if c != Complex64::new(0.0, 0.0) {
                out.set(m, n, self.derivation_multiplier(nu, m, n) * c);
            }
        }
        // Unknown tail mass is amplified by at most the first multiplier
        // magnitude outside the box, recorded as an estimate.
        let scale = match self.side() {
            Side::Primal => 1.0,
            Side::Dual => KAPPA_DUAL,
        };
        out.tail_norm = self.tail_norm * 2.0 * PI * scale * (self.radius + 1) as f64;
        out.truncation_warning = self.truncation_warning;
        out
    }

    /// ∂̄ = ∂₁ + i∂₂.
    pub fn d_bar(&self) -> Self {
        self.derive(Derivation::D1).linear_comb(
            Complex64::new(1.0, 0.0),
            &self.derive(Derivation::D2),
            Complex64::new(0.0, 1.0),
        )
    }

    /// ∂ = ∂₁ - i∂₂.
    pub fn d_holo(&self) -> Self {
        self.derive(Derivation::D1).linear_comb(
            Complex64::new(1.0, 0.0),
            &self.derive(Derivation::D2),
            Complex64::new(0.0, -1.0),
        )
    }

    /// Δ = ∂₁² + ∂₂².
    pub fn laplacian(&self) -> Self {
        self.derive(Derivation::D1)
            .derive(Derivation::D1)
            .add(&self.derive(Derivation::D2).derive(Derivation::D2))
    }

    /// JSON object {theta, side, radius, entries: [[m,n,re,im],..]} with
    /// entries sorted lexicographically by (m, n) and 17-significant-digit
    /// floats, so repeated dumps diff byte-stably.
    pub fn to_json(&self) -> String {
        let mut s = String::new();
        s.push_str("{\"theta\":");
        s.push_str(&fmt_f64(self.lattice.theta()));
        s.push_str(",\"side\":\"");
        s.push_str(self.side().name());
        s.push_str("\",\"radius\":");
        s.push_str(&self.radius.to_string());
        s.push_str(",\"entries\":[");
        let mut first = true;
        for (m, n, c) in self.iter_nonzero() {
            if !first {
                s.push(',');
            }
            first = false;
            s.push_str(&format!(
                "[{},{},{},{}]",
                m,
                n,
                fmt_f64(c.re),
                fmt_f64(c.im)
            ));
        }
        s.push_str("]}");
        s
    }

    /// Parses the JSON interchange format produced by [`to_json`].
    pub fn from_json(text: &str) -> Result<Self, NcError> {
        let v: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| NcError::InvalidConfig(format!("element JSON: {e}")))?;
        let theta = v["theta"]
            .as_f64()
            .ok_or_else(|| NcError::InvalidConfig("element JSON: missing theta".into()))?;
        let side = match v["side"].as_str() {
            Some("Primal") => Side::Primal,
            Some("Dual") => Side::Dual,
            _ => return Err(NcError::InvalidConfig("element JSON: bad side".into())),
        };
        let radius = v["radius"]
            .as_i64()
            .ok_or_else(|| NcError::InvalidConfig("element JSON: missing radius".into()))?;
        let lattice = LatticeSpec::new(theta, side)?;
        let mut out = Self::zero(lattice, radius);
        let entries = v["entries"]
            .as_array()
            .ok_or_else(|| NcError::InvalidConfig("element JSON: missing entries".into()))?;
        for e in entries {
            let row = e
                .as_array()
                .filter(|r| r.len() == 4)
                .ok_or_else(|| NcError::InvalidConfig("element JSON: bad entry".into()))?;
            let m = row[0].as_i64().unwrap_or(i64::MAX);
            let n = row[1].as_i64().unwrap_or(i64::MAX);
            let re = row[2].as_f64().unwrap_or(f64::NAN);
            let im = row[3].as_f64().unwrap_or(f64::NAN);
            if m.abs() > radius || n.abs() > radius || !re.is_finite() || !im.is_finite() {
                return Err(NcError::InvalidConfig("element JSON: bad entry".into()));
            }
            out.set(m, n, Complex64::new(re, im));
        }
        Ok(out)
    }
}

/// 17-significant-digit decimal float formatting used in all JSON output.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const THETA: f64 = std::f64::consts::SQRT_2 - 1.0;

    fn primal() -> LatticeSpec {
        LatticeSpec::primal(THETA).unwrap()
    }

    fn dual() -> LatticeSpec {
        LatticeSpec::dual(THETA).unwrap()
    }

    pub(crate) fn random_element(
        lattice: LatticeSpec,
        radius: i64,
        rng: &mut ChaCha8Rng,
    ) -> AlgebraElement {
        let mut e = AlgebraElement::zero(lattice, radius);
        for m in -radius..=radius {
            for n in -radius..=radius {
                e.set(
                    m,
                    n,
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                );
            }
        }
        e
    }

    #[test]
    fn delta_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_element(primal(), 3, &mut rng);
        let d = AlgebraElement::delta(primal());
        let left = d.twisted_mul_at(&a, 3).unwrap();
        let right = a.twisted_mul_at(&d, 3).unwrap();
        assert!(left.sub(&a).l1_norm() < 1e-14);
        assert!(right.sub(&a).l1_norm() < 1e-14);
    }

    #[test]
    fn generator_commutation_relation() {
        // U₂ ♮ U₁ = exp(2πiθ)·(U₁ ♮ U₂) on the primal side.
        let u1 = AlgebraElement::u1(primal());
        let u2 = AlgebraElement::u2(primal());
        let lhs = u2.twisted_mul_at(&u1, 2).unwrap();
        let rhs = u1
            .twisted_mul_at(&u2, 2)
            .unwrap()
            .scale(Complex64::new(0.0, 2.0 * PI * THETA).exp());
        assert!(lhs.sub(&rhs).l1_norm() < 1e-14);
    }

    #[test]
    fn dual_generators_give_minus_inverse_theta_torus() {
        // V₂ ♮ V₁ = exp(-2πi/θ)·(V₁ ♮ V₂): the dual algebra is the torus
        // with parameter -1/θ.
        let v1 = AlgebraElement::u1(dual());
        let v2 = AlgebraElement::u2(dual());
        let lhs = v2.twisted_mul_at(&v1, 2).unwrap();
        let rhs = v1
            .twisted_mul_at(&v2, 2)
            .unwrap()
            .scale(Complex64::new(0.0, -2.0 * PI / THETA).exp());
        assert!(lhs.sub(&rhs).l1_norm() < 1e-14);
    }

    #[test]
    fn side_mismatch_rejected() {
        let a = AlgebraElement::u1(primal());
        let b = AlgebraElement::u1(dual());
        assert!(matches!(
            a.twisted_mul(&b),
            Err(NcError::SideMismatch(_, _))
        ));
    }

    #[test]
    fn involution_of_delta_and_monomial() {
        let d = AlgebraElement::delta(primal());
        assert!(d.involution().sub(&d).l1_norm() < 1e-15);

        // (C·π(λ))* = conj(C)·c(λ,λ)·π(-λ); verify against the unitarity
        // relation π(λ) ♮ π(λ)* = δ₀.
        let c = Complex64::new(0.6, -0.8);
        for lattice in [primal(), dual()] {
            let mono = AlgebraElement::monomial(lattice, 2, -1, c);
            let star = mono.involution();
            let lam = lattice.point(2, -1);
            let expect = c.conj() * lattice.cocycle(lam, lam);
            assert!((star.get(-2, 1) - expect).norm() < 1e-15);
            let unit = AlgebraElement::monomial(lattice, 2, -1, Complex64::new(1.0, 0.0));
            let prod = unit.twisted_mul_at(&unit.involution(), 0).unwrap();
            assert!(
                prod.sub(&AlgebraElement::delta(lattice)).l1_norm() < 1e-14,
                "monomials must be unitary under the involution"
            );
        }
    }

    #[test]
    fn involution_is_involutive() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = random_element(primal(), 3, &mut rng);
            assert!(a.involution().involution().sub(&a).l1_norm() < 1e-14);
            let b = random_element(dual(), 2, &mut rng);
            assert!(b.involution().involution().sub(&b).l1_norm() < 1e-14);
        }
    }

    #[test]
    fn involution_antihomomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for lattice in [primal(), dual()] {
            for _ in 0..20 {
                let a = random_element(lattice, 3, &mut rng);
                let b = random_element(lattice, 3, &mut rng);
                let lhs = a.twisted_mul_at(&b, 6).unwrap().involution();
                let rhs = b
                    .involution()
                    .twisted_mul_at(&a.involution(), 6)
                    .unwrap();
                assert!(lhs.sub(&rhs).l1_norm() < 1e-12 * lhs.l1_norm().max(1.0));
            }
        }
    }

    #[test]
    fn trace_reads_origin_and_is_tracial() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_element(primal(), 4, &mut rng);
        assert_eq!(a.trace(), a.get(0, 0));

        for _ in 0..20 {
            let a = random_element(primal(), 3, &mut rng);
            let b = random_element(primal(), 3, &mut rng);
            let ab = a.twisted_mul_at(&b, 6).unwrap().trace();
            let ba = b.twisted_mul_at(&a, 6).unwrap().trace();
            assert!((ab - ba).norm() < 1e-12);
        }
    }

    #[test]
    fn trace_positive_on_star_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for lattice in [primal(), dual()] {
            for _ in 0..20 {
                let a = random_element(lattice, 3, &mut rng);
                let t = a
                    .involution()
                    .twisted_mul_at(&a, 6)
                    .unwrap()
                    .trace();
                assert!(t.re >= -1e-12);
                assert!(t.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn associativity_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for lattice in [primal(), dual()] {
            for _ in 0..10 {
                let a = random_element(lattice, 2, &mut rng);
                let b = random_element(lattice, 2, &mut rng);
                let c = random_element(lattice, 2, &mut rng);
                let ab_c = a
                    .twisted_mul_at(&b, 4)
                    .unwrap()
                    .twisted_mul_at(&c, 6)
                    .unwrap();
                let a_bc = a
                    .twisted_mul_at(&b.twisted_mul_at(&c, 4).unwrap(), 6)
                    .unwrap();
                assert!(ab_c.sub(&a_bc).l1_norm() < 1e-12 * ab_c.l1_norm().max(1.0));
            }
        }
    }

    #[test]
    fn s_norm_values() {
        let d = AlgebraElement::delta(primal());
        for s in [0.0, 1.0, 2.0, 3.5] {
            assert!((d.s_norm(s) - 1.0).abs() < 1e-15);
        }
        let u1 = AlgebraElement::u1(primal());
        assert!((u1.s_norm(0.0) - 1.0).abs() < 1e-15);
        assert!((u1.s_norm(2.0) - (1.0 + THETA * THETA)).abs() < 1e-14);
    }

    #[test]
    fn derive_generators() {
        let u1 = AlgebraElement::u1(primal());
        let d1 = u1.derive(Derivation::D1);
        assert!((d1.get(1, 0) - Complex64::new(0.0, 2.0 * PI)).norm() < 1e-15);
        let d2 = u1.derive(Derivation::D2);
        assert!(d2.l1_norm() < 1e-15);
        let delta = AlgebraElement::delta(primal());
        assert!(delta.derive(Derivation::D1).l1_norm() < 1e-15);
        assert!(delta.derive(Derivation::D2).l1_norm() < 1e-15);
    }

    #[test]
    fn derive_leibniz() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for lattice in [primal(), dual()] {
            for nu in [Derivation::D1, Derivation::D2] {
                let a = random_element(lattice, 2, &mut rng);
                let b = random_element(lattice, 2, &mut rng);
                let lhs = a.twisted_mul_at(&b, 4).unwrap().derive(nu);
                let rhs = a
                    .derive(nu)
                    .twisted_mul_at(&b, 4)
                    .unwrap()
                    .add(&a.twisted_mul_at(&b.derive(nu), 4).unwrap());
                assert!(lhs.sub(&rhs).l1_norm() < 1e-12 * lhs.l1_norm().max(1.0));
            }
        }
    }

    #[test]
    fn derivations_kill_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_element(primal(), 3, &mut rng);
        assert!(a.derive(Derivation::D1).trace().norm() < 1e-15);
        assert!(a.derive(Derivation::D2).trace().norm() < 1e-15);
        assert!(a.d_bar().trace().norm() < 1e-15);
    }

    #[test]
    fn d_bar_on_generator() {
        let u1 = AlgebraElement::u1(primal());
        let db = u1.d_bar();
        assert!((db.get(1, 0) - Complex64::new(0.0, 2.0 * PI)).norm() < 1e-15);
        let delta = AlgebraElement::delta(primal());
        assert!(delta.d_bar().l1_norm() < 1e-15);
    }

    #[test]
    fn derivations_commute_with_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for lattice in [primal(), dual()] {
            let a = random_element(lattice, 3, &mut rng);
            for nu in [Derivation::D1, Derivation::D2] {
                let lhs = a.involution().derive(nu);
                let rhs = a.derive(nu).involution();
                assert!(lhs.sub(&rhs).l1_norm() < 1e-13);
            }
        }
    }

    #[test]
    fn truncation_tail_is_tracked() {
        let u = AlgebraElement::monomial(primal(), 2, 0, Complex64::new(1.0, 0.0));
        // Product supported at (4,0), forced into radius 2: all mass discarded.
        let p = u.twisted_mul_at(&u, 2).unwrap();
        assert!(p.l1_norm() < 1e-15);
        assert!((p.tail_norm() - 1.0).abs() < 1e-15);
        assert!(p.truncation_warning());
        // Same product at an adequate radius keeps everything.
        let q = u.twisted_mul_at(&u, 4).unwrap();
        assert!((q.l1_norm() - 1.0).abs() < 1e-15);
        assert!(q.tail_norm() < 1e-15);
        assert!(!q.truncation_warning());
    }

    #[test]
    fn json_round_trip_and_stability() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_element(dual(), 2, &mut rng);
        let text = a.to_json();
        assert_eq!(text, AlgebraElement::from_json(&text).unwrap().to_json());
        let b = AlgebraElement::from_json(&text).unwrap();
        assert!(a.sub(&b).l1_norm() < 1e-15);
        assert_eq!(b.side(), Side::Dual);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prop_involution_antihom_small(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_element(primal(), 1, &mut rng);
            let b = random_element(primal(), 1, &mut rng);
            let lhs = a.twisted_mul_at(&b, 2).unwrap().involution();
            let rhs = b.involution().twisted_mul_at(&a.involution(), 2).unwrap();
            prop_assert!(lhs.sub(&rhs).l1_norm() < 1e-12);
        }

        #[test]
        fn prop_trace_tracial_small(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_element(dual(), 1, &mut rng);
            let b = random_element(dual(), 1, &mut rng);
            let ab = a.twisted_mul_at(&b, 2).unwrap().trace();
            let ba = b.twisted_mul_at(&a, 2).unwrap().trace();
            prop_assert!((ab - ba).norm() < 1e-13);
        }
    }
}
