//! The soliton layer: Gabor frame verification, Parseval normalization,
//! Rieffel-type projections, energy/charge/self-duality diagnostics, the
//! connection coefficient b, the trace invariant τ(b), and the classifier
//! for gauge equivalence to Gaussian solitons.
//!
//! For a window η generating a Gabor frame, the Gram element G = ⟨η,η⟩_B
//! is invertible; η̃ = η·G^{-1/2} is a Parseval frame and p = ⟨η̃,η̃⟩_A is
//! a projection of trace θ. Every frame window satisfies ∇̄η = η·b with
//! b = G^{-1}⟨η, ∇̄η⟩_B, so p solves the self-duality equation and
//! saturates the Belavin-Polyakov bound S(p) = 4π|Q(p)|.
//!
//! The gauge action η ↦ η·U (U invertible, dual side) fixes p and moves
//! b to b_U = U^{-1}bU + U^{-1}∂̄U; its trace τ(b) moves within the
//! lattice πi(Z+iZ), and η is gauge-equivalent to the Gaussian soliton
//! with parameter λ exactly when λ - τ(b) lies on that lattice.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::algebra::{AlgebraElement, Derivation};
use crate::error::NcError;
use crate::lattice::{LatticeSpec, Side};
use crate::module::{inner_a, inner_b, l2_distance, l2_inner, ModuleVector, Nabla, Radius};
use crate::quadrature::QuadratureSpec;
use crate::spectral::{inv_sqrt, inverse, spectral_bounds};
use crate::window::Window;

/// Tolerances used by the soliton pipeline; every threshold a verdict
/// depends on lives here, with the defaults the reports are gated on.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Spectral lower bound below which the Gram element is not invertible.
    pub frame_margin: f64,
    /// Maximal frame-bound movement allowed between truncation radii.
    pub bound_drift: f64,
    /// Relative slack for the Rayleigh-quotient cross-validation.
    pub rayleigh_epsilon: f64,
    /// ℓ¹ distance of ⟨η̃,η̃⟩_B from the identity after normalization.
    pub tightness: f64,
    /// Residual contracts for the approximate functional calculus.
    pub inverse: f64,
    pub inv_sqrt: f64,
    /// Projection residual gates.
    pub projection_idempotency: f64,
    pub projection_self_adjoint: f64,
    /// L² residual of ∇̄η - η·b.
    pub module_residual: f64,
    /// Imaginary part allowed in the energy trace.
    pub energy_imag: f64,
    /// Lattice distance below which a pair is declared gaugeable.
    pub gaugeable_distance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            frame_margin: 1e-8,
            bound_drift: 1e-4,
            rayleigh_epsilon: 1e-3,
            tightness: 1e-7,
            inverse: 1e-9,
            inv_sqrt: 1e-8,
            projection_idempotency: 1e-6,
            projection_self_adjoint: 1e-6,
            module_residual: 1e-5,
            energy_imag: 1e-8,
            gaugeable_distance: 1e-6,
        }
    }
}

/// Frame verdict for a window: spectral bounds of the Gram element,
/// cross-validated by Rayleigh quotients of the frame operator.
#[derive(Debug, Clone)]
pub struct FrameReport {
    pub lower: f64,
    pub upper: f64,
    pub tight: bool,
    pub invertibility_margin: f64,
    pub radius_used: i64,
    pub is_frame: bool,
    /// Largest bound movement between the two Gram truncation radii.
    pub bound_drift: f64,
    pub rayleigh_min: f64,
    pub rayleigh_max: f64,
}

/// Projection residuals and invariants checked on p = ⟨η̃, η̃⟩_A.
#[derive(Debug, Clone)]
pub struct ProjectionChecks {
    pub idempotency: f64,
    pub self_adjointness: f64,
    pub trace: Complex64,
    pub killing_residual: [f64; 2],
    pub action_lemma_defect: [f64; 2],
}

/// Energy, charge, and duality diagnostics of a projection.
#[derive(Debug, Clone)]
pub struct SolitonReport {
    pub energy: f64,
    pub charge: f64,
    pub bp_gap: f64,
    pub sd_residual: f64,
    pub el_residual: f64,
    pub idempotency: f64,
    pub self_adjointness: f64,
    pub trace: f64,
    pub charge_integrality_gap: f64,
    pub energy_imag: f64,
}

/// Both evaluation routes for the trace invariant.
#[derive(Debug, Clone, Copy)]
pub struct TauReport {
    /// Trace of the connection coefficient b (authoritative).
    pub algebra_route: Complex64,
    /// vol(Λ)^{-1} ⟨∇̄η, η⟩_{L²}, exact for tight frames.
    pub l2_route: Complex64,
    pub discrepancy: f64,
}

/// Verdict of the gauge-to-Gaussian classification.
#[derive(Debug, Clone)]
pub struct GaugeReport {
    pub tau_b: Complex64,
    pub lambda: Complex64,
    /// Distance of λ - τ(b) to the lattice πi(Z+iZ).
    pub lattice_distance: f64,
    pub gaugeable: bool,
    pub nearest_point: (i64, i64),
    pub tau_l2_route: Complex64,
    pub tau_route_discrepancy: f64,
}

#[derive(Debug, Clone)]
struct Normalized {
    eta_tilde: ModuleVector,
    s: AlgebraElement,
    tightness_l1: f64,
}

#[derive(Debug, Clone)]
struct ProjectionData {
    p: AlgebraElement,
    checks: ProjectionChecks,
}

#[derive(Debug, Clone)]
struct ConnectionData {
    b: AlgebraElement,
    module_residual: f64,
    tau: TauReport,
}

/// Gauge transform output: the moved vector, the transformed connection
/// coefficient, and the verification residuals.
#[derive(Debug, Clone)]
pub struct GaugeTransform {
    pub eta_u: ModuleVector,
    pub b_u: AlgebraElement,
    /// ℓ¹ distance between b(η·U) recomputed from scratch and b_U.
    pub b_consistency: f64,
    /// ℓ¹ distance between the projections of η·U and η.
    pub projection_invariance: f64,
    pub tau_b_u: Complex64,
}

/// Lazily evaluated soliton pipeline for one window at one θ.
///
/// All stages are cached: the Gram element, frame bounds, normalization,
/// projection, soliton diagnostics, and the connection coefficient.
pub struct Pipeline {
    theta: f64,
    quad: QuadratureSpec,
    eta: ModuleVector,
    r_primal: Radius,
    r_dual: Radius,
    tol: Tolerances,
    gram: OnceLock<Result<AlgebraElement, NcError>>,
    frame: OnceLock<Result<FrameReport, NcError>>,
    normalized: OnceLock<Result<Normalized, NcError>>,
    projection: OnceLock<Result<ProjectionData, NcError>>,
    connection: OnceLock<Result<ConnectionData, NcError>>,
}

/// Default policy: grow until the outer ring mass is below target.
pub fn default_primal_radius() -> Radius {
    Radius::Auto {
        target: 3e-8,
        min: 8,
        max: 20,
    }
}

pub fn default_dual_radius() -> Radius {
    Radius::Auto {
        target: 1e-11,
        min: 4,
        max: 16,
    }
}

impl Pipeline {
    pub fn new(theta: f64, window: Window) -> Result<Pipeline, NcError> {
        let quad = QuadratureSpec::auto_for(&[&window]);
        Self::with_settings(
            theta,
            window,
            quad,
            default_primal_radius(),
            default_dual_radius(),
            Tolerances::default(),
        )
    }

    pub fn with_settings(
        theta: f64,
        window: Window,
        quad: QuadratureSpec,
        r_primal: Radius,
        r_dual: Radius,
        tol: Tolerances,
    ) -> Result<Pipeline, NcError> {
        LatticeSpec::primal(theta)?;
        Ok(Pipeline {
            theta,
            quad,
            eta: ModuleVector::from_window(theta, window),
            r_primal,
            r_dual,
            tol,
            gram: OnceLock::new(),
            frame: OnceLock::new(),
            normalized: OnceLock::new(),
            projection: OnceLock::new(),
            connection: OnceLock::new(),
        })
    }

    /// Pipeline for an arbitrary module vector (gauged windows).
    pub fn from_vector(
        eta: ModuleVector,
        quad: QuadratureSpec,
        r_primal: Radius,
        r_dual: Radius,
        tol: Tolerances,
    ) -> Result<Pipeline, NcError> {
        LatticeSpec::primal(eta.theta())?;
        Ok(Pipeline {
            theta: eta.theta(),
            quad,
            eta,
            r_primal,
            r_dual,
            tol,
            gram: OnceLock::new(),
            frame: OnceLock::new(),
            normalized: OnceLock::new(),
            projection: OnceLock::new(),
            connection: OnceLock::new(),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn window_vector(&self) -> &ModuleVector {
        &self.eta
    }

    /// Gram element ⟨η, η⟩_B.
    pub fn gram(&self) -> Result<&AlgebraElement, NcError> {
        self.gram
            .get_or_init(|| inner_b(&self.eta, &self.eta, self.r_dual, &self.quad))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Frame bounds with Rayleigh cross-validation.
    pub fn frame_report(&self) -> Result<&FrameReport, NcError> {
        self.frame
            .get_or_init(|| self.compute_frame_report())
            .as_ref()
            .map_err(Clone::clone)
    }

    fn compute_frame_report(&self) -> Result<FrameReport, NcError> {
        let gram = self.gram()?;
        let r = gram.radius();
        // Stability across two Gram truncation radii and two section
        // radii. Edge eigenvalues of Dirichlet sections converge only
        // polynomially, so the sections are taken well beyond the
        // coefficient support.
        let gram_next = inner_b(&self.eta, &self.eta, Radius::Fixed(r + 2), &self.quad)?;
        let sec = (r + 6).max(20);
        let bounds = spectral_bounds(gram, sec)?;
        let bounds_next = spectral_bounds(&gram_next, sec + 2)?;
        let drift = (bounds.lower - bounds_next.lower)
            .abs()
            .max((bounds.upper - bounds_next.upper).abs())
            .max(bounds_next.drift())
            .max(bounds.drift());
        let lower = bounds_next.lower;
        let upper = bounds_next.upper;

        // Rayleigh quotients of the frame operator over random
        // Gaussian-mixture test vectors must land inside the bounds.
        let mut rng = SplitMix(0x5eed_0001);
        let base = ModuleVector::from_window(
            self.theta,
            Window::gaussian(Complex64::new(0.0, 0.0), self.theta)?,
        );
        let mut ray_min = f64::INFINITY;
        let mut ray_max = f64::NEG_INFINITY;
        for _ in 0..20 {
            let mut f: Option<ModuleVector> = None;
            for _ in 0..3 {
                let c = Complex64::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
                let x = rng.range(-2.0, 2.0);
                let w = rng.range(-2.0, 2.0);
                let term = base.tf_shift_free(x, w).scale(c);
                f = Some(match f {
                    None => term,
                    Some(acc) => acc.add(&term),
                });
            }
            let f = f.unwrap();
            let table = inner_a(
                &f,
                &self.eta,
                Radius::Auto {
                    target: 1e-8,
                    min: 8,
                    max: 24,
                },
                &self.quad,
            )?;
            let sum: f64 = table.iter().map(|(_, _, c)| c.norm_sqr()).sum();
            let rho = sum / l2_inner(&f, &f, &self.quad).re;
            ray_min = ray_min.min(rho);
            ray_max = ray_max.max(rho);
            let eps = self.tol.rayleigh_epsilon;
            if rho < lower * (1.0 - eps) - eps * 1e-3 || rho > upper * (1.0 + eps) + eps * 1e-3 {
                return Err(NcError::CrossValidationFailed {
                    value: rho,
                    lo: lower * (1.0 - eps),
                    hi: upper * (1.0 + eps),
                });
            }
        }

        let is_frame = lower > self.tol.frame_margin && drift < self.tol.bound_drift;
        Ok(FrameReport {
            lower,
            upper,
            tight: (upper - lower).abs() <= 1e-6 * upper.max(1.0),
            invertibility_margin: lower,
            radius_used: r,
            is_frame,
            bound_drift: drift,
            rayleigh_min: ray_min,
            rayleigh_max: ray_max,
        })
    }

    fn normalized_data(&self) -> Result<&Normalized, NcError> {
        self.normalized
            .get_or_init(|| self.compute_normalized())
            .as_ref()
            .map_err(Clone::clone)
    }

    fn compute_normalized(&self) -> Result<Normalized, NcError> {
        let report = self.frame_report()?;
        if !report.is_frame {
            return Err(NcError::NotAFrame(report.invertibility_margin));
        }
        let gram = self.gram()?;
        let s = inv_sqrt(gram, self.tol.inv_sqrt)?.pruned(1e-14);
        let eta_tilde = self.eta.act_b(&s)?;
        // Tightness by the independent quadrature route, not the algebra
        // identity the iteration already certified.
        let gram_tilde = inner_b(
            &eta_tilde,
            &eta_tilde,
            Radius::Fixed(gram.radius()),
            &self.quad,
        )?;
        let one = AlgebraElement::delta(gram.lattice());
        let tightness_l1 = gram_tilde.sub(&one.resized(gram_tilde.radius())).l1_norm();
        if tightness_l1 > self.tol.tightness {
            return Err(NcError::ResidualTooLarge {
                context: "normalize tightness",
                value: tightness_l1,
                tol: self.tol.tightness,
            });
        }
        Ok(Normalized {
            eta_tilde,
            s,
            tightness_l1,
        })
    }

    /// Parseval-normalized window η̃ = η·⟨η,η⟩_B^{-1/2}.
    pub fn normalized_vector(&self) -> Result<&ModuleVector, NcError> {
        Ok(&self.normalized_data()?.eta_tilde)
    }

    /// The inverse square root element used in the normalization.
    pub fn normalizer(&self) -> Result<&AlgebraElement, NcError> {
        Ok(&self.normalized_data()?.s)
    }

    /// ℓ¹ distance of ⟨η̃,η̃⟩_B from 1_B (quadrature route).
    pub fn tightness_residual(&self) -> Result<f64, NcError> {
        Ok(self.normalized_data()?.tightness_l1)
    }

    fn projection_data(&self) -> Result<&ProjectionData, NcError> {
        self.projection
            .get_or_init(|| self.compute_projection())
            .as_ref()
            .map_err(Clone::clone)
    }

    fn compute_projection(&self) -> Result<ProjectionData, NcError> {
        let norm = self.normalized_data()?;
        let p = inner_a(&norm.eta_tilde, &norm.eta_tilde, self.r_primal, &self.quad)?;
        let checks = projection_checks(&p)?;
        if checks.idempotency > self.tol.projection_idempotency {
            return Err(NcError::ResidualTooLarge {
                context: "projection idempotency",
                value: checks.idempotency,
                tol: self.tol.projection_idempotency,
            });
        }
        if checks.self_adjointness > self.tol.projection_self_adjoint {
            return Err(NcError::ResidualTooLarge {
                context: "projection self-adjointness",
                value: checks.self_adjointness,
                tol: self.tol.projection_self_adjoint,
            });
        }
        Ok(ProjectionData { p, checks })
    }

    /// The Rieffel-type projection p = ⟨η̃, η̃⟩_A.
    pub fn projection(&self) -> Result<&AlgebraElement, NcError> {
        Ok(&self.projection_data()?.p)
    }

    pub fn projection_checks(&self) -> Result<&ProjectionChecks, NcError> {
        Ok(&self.projection_data()?.checks)
    }

    /// Full soliton diagnostics of the projection.
    pub fn soliton_report(&self) -> Result<SolitonReport, NcError> {
        let data = self.projection_data()?;
        let p = &data.p;
        let (energy_value, energy_imag) = energy(p, self.tol.energy_imag)?;
        let (charge_value, gap) = charge(p)?;
        let sd = self_duality_residual(p)?;
        let el = el_residual(p)?;
        Ok(SolitonReport {
            energy: energy_value,
            charge: charge_value,
            bp_gap: energy_value - 4.0 * PI * charge_value.abs(),
            sd_residual: sd,
            el_residual: el,
            idempotency: data.checks.idempotency,
            self_adjointness: data.checks.self_adjointness,
            trace: data.checks.trace.re,
            charge_integrality_gap: gap,
            energy_imag,
        })
    }

    fn connection_data(&self) -> Result<&ConnectionData, NcError> {
        self.connection
            .get_or_init(|| self.compute_connection())
            .as_ref()
            .map_err(Clone::clone)
    }

    fn compute_connection(&self) -> Result<ConnectionData, NcError> {
        let report = self.frame_report()?;
        if !report.is_frame {
            return Err(NcError::NotAFrame(report.invertibility_margin));
        }
        let gram = self.gram()?;
        let nabla_eta = self.eta.nabla(Nabla::Bar)?;
        let cross = inner_b(&self.eta, &nabla_eta, self.r_dual, &self.quad)?;
        let g_inv = inverse(gram, self.tol.inverse)?;
        let b = g_inv
            .twisted_mul_at(&cross, g_inv.radius() + cross.radius())?
            .pruned(1e-14);
        let recon = self.eta.act_b(&b)?;
        let module_residual = l2_distance(&nabla_eta, &recon, &self.quad);
        if module_residual > self.tol.module_residual {
            return Err(NcError::ResidualTooLarge {
                context: "connection coefficient",
                value: module_residual,
                tol: self.tol.module_residual,
            });
        }
        let algebra_route = b.trace();
        // vol(Λ)^{-1}⟨∇̄η, η⟩: exact for tight frames, where ||η||² = θ.
        let l2_route =
            l2_inner(&nabla_eta, &self.eta, &self.quad) / Complex64::new(self.theta, 0.0);
        let tau = TauReport {
            algebra_route,
            l2_route,
            discrepancy: (algebra_route - l2_route).norm(),
        };
        Ok(ConnectionData {
            b,
            module_residual,
            tau,
        })
    }

    /// Connection coefficient b with ∇̄η = η·b.
    pub fn connection_coefficient(&self) -> Result<&AlgebraElement, NcError> {
        Ok(&self.connection_data()?.b)
    }

    /// L² residual of ∇̄η - η·b.
    pub fn connection_residual(&self) -> Result<f64, NcError> {
        Ok(self.connection_data()?.module_residual)
    }

    /// τ(b) by both routes.
    pub fn tau(&self) -> Result<TauReport, NcError> {
        Ok(self.connection_data()?.tau)
    }

    /// Applies the gauge action η ↦ η·U and verifies the transformation
    /// law b_U = U^{-1}bU + U^{-1}∂̄U plus the invariance of the
    /// projection (skipped when `verify` is false).
    pub fn gauge_transform(
        &self,
        u: &AlgebraElement,
        verify: bool,
    ) -> Result<GaugeTransform, NcError> {
        if u.side() != Side::Dual {
            return Err(NcError::SideMismatch(u.side().name(), "Dual"));
        }
        let b = self.connection_coefficient()?;
        let u_inv = invert_gauge_element(u)?;
        let work = u.radius() + b.radius() + u_inv.radius();
        let b_u = u_inv
            .twisted_mul_at(&b.twisted_mul_at(u, work)?, work)?
            .add(&u_inv.twisted_mul_at(&u.d_bar(), work)?)
            .pruned(1e-14);
        let eta_u = self.eta.act_b(u)?;
        let (b_consistency, projection_invariance) = if verify {
            let moved = Pipeline::from_vector(
                eta_u.clone(),
                self.quad,
                self.r_primal,
                self.r_dual,
                self.tol,
            )?;
            let b_moved = moved.connection_coefficient()?;
            let diff = b_moved
                .sub(&b_u.resized(b_moved.radius().max(b_u.radius())))
                .l1_norm();
            let p0 = self.projection()?;
            let p1 = moved.projection()?;
            let p_diff = p0.sub(&p1.resized(p0.radius().max(p1.radius()))).l1_norm();
            (diff, p_diff)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(GaugeTransform {
            eta_u,
            tau_b_u: b_u.trace(),
            b_u,
            b_consistency,
            projection_invariance,
        })
    }

    /// Classifies whether η is gauge-equivalent to the Gaussian soliton
    /// of parameter λ: true exactly when λ - τ(b) ∈ πi(Z+iZ).
    pub fn classify_gauge_to_gaussian(&self, lambda: Complex64) -> Result<GaugeReport, NcError> {
        let tau = self.tau()?;
        let z = lambda - tau.algebra_route;
        let (distance, nearest) = lattice_distance_pi_i(z);
        Ok(GaugeReport {
            tau_b: tau.algebra_route,
            lambda,
            lattice_distance: distance,
            gaugeable: distance <= self.tol.gaugeable_distance,
            nearest_point: nearest,
            tau_l2_route: tau.l2_route,
            tau_route_discrepancy: tau.discrepancy,
        })
    }
}

/// Distance of z to the lattice πi(Z+iZ) = {πi(m+in)} and the nearest
/// integer pair (m, n). The lattice point is -πn + iπm, so the nearest
/// pair comes from rounding the two coordinates; the four neighboring
/// pairs are scanned as specified.
pub fn lattice_distance_pi_i(z: Complex64) -> (f64, (i64, i64)) {
    let m0 = (z.im / PI).floor();
    let n0 = (-z.re / PI).floor();
    let mut best = (f64::INFINITY, (0i64, 0i64));
    for dm in 0..=1 {
        for dn in 0..=1 {
            let m = m0 + dm as f64;
            let n = n0 + dn as f64;
            let point = Complex64::new(-PI * n, PI * m);
            let d = (z - point).norm();
            if d < best.0 {
                best = (d, (m as i64, n as i64));
            }
        }
    }
    best
}

/// Residuals and invariants of a candidate projection.
pub fn projection_checks(p: &AlgebraElement) -> Result<ProjectionChecks, NcError> {
    let r = p.radius();
    let idem = p.twisted_mul_at(p, r)?.sub(p).l1_norm();
    let sa = p.self_adjointness_defect();
    let trace = p.trace();
    let mut killing = [0.0; 2];
    let mut action = [0.0; 2];
    for (i, nu) in [Derivation::D1, Derivation::D2].into_iter().enumerate() {
        let dp = p.derive(nu);
        // p (∂p) p, with the full product support retained.
        let pdp = p.twisted_mul_at(&dp, 2 * r)?;
        killing[i] = pdp.twisted_mul_at(p, 3 * r)?.l1_norm();
        // Tr(∂p ∂p) = 2 Tr(p ∂p ∂p).
        let lhs = dp.trace_mul(&dp)?;
        let dpdp = dp.twisted_mul_at(&dp, r)?;
        let rhs = p.trace_mul(&dpdp)? * Complex64::new(2.0, 0.0);
        action[i] = (lhs - rhs).norm();
    }
    Ok(ProjectionChecks {
        idempotency: idem,
        self_adjointness: sa,
        trace,
        killing_residual: killing,
        action_lemma_defect: action,
    })
}

/// Energy S(p) = Tr(∂p ∂̄p); errors when the trace has an imaginary part
/// beyond `imag_tol`. Returns (energy, |imaginary part|).
pub fn energy(p: &AlgebraElement, imag_tol: f64) -> Result<(f64, f64), NcError> {
    let t = p.d_holo().trace_mul(&p.d_bar())?;
    if t.im.abs() > imag_tol {
        return Err(NcError::EnergyNotReal(t.im.abs(), imag_tol));
    }
    Ok((t.re, t.im.abs()))
}

/// Topological charge Q(p) = (1/2πi) Tr(p[∂₁p ∂₂p - ∂₂p ∂₁p]) and its
/// distance to the nearest integer.
pub fn charge(p: &AlgebraElement) -> Result<(f64, f64), NcError> {
    let d1 = p.derive(Derivation::D1);
    let d2 = p.derive(Derivation::D2);
    let r = p.radius();
    let comm = d1
        .twisted_mul_at(&d2, r)?
        .sub(&d2.twisted_mul_at(&d1, r)?);
    let t = p.trace_mul(&comm)?;
    let q = t / Complex64::new(0.0, 2.0 * PI);
    let value = q.re;
    Ok((value, (value - value.round()).abs()))
}

/// ℓ¹ norm of ∂̄(p) ♮ p over the full product support.
pub fn self_duality_residual(p: &AlgebraElement) -> Result<f64, NcError> {
    let db = p.d_bar();
    Ok(db.twisted_mul_at(p, db.radius() + p.radius())?.l1_norm())
}

/// ℓ¹ norm of p(Δp) - (Δp)p over the full product support.
pub fn el_residual(p: &AlgebraElement) -> Result<f64, NcError> {
    let lap = p.laplacian();
    let full = p.radius() + lap.radius();
    let lhs = p.twisted_mul_at(&lap, full)?;
    let rhs = lap.twisted_mul_at(p, full)?;
    Ok(lhs.sub(&rhs).l1_norm())
}

/// L² residual of the Wexler-Raz reconstruction f = η̃·⟨η̃, f⟩_B.
pub fn wexler_raz_residual(
    eta_tilde: &ModuleVector,
    f: &ModuleVector,
    r_dual: i64,
    quad: &QuadratureSpec,
) -> Result<f64, NcError> {
    let c = inner_b(eta_tilde, f, Radius::Fixed(r_dual), quad)?;
    let recon = eta_tilde.act_b(&c)?;
    Ok(l2_distance(f, &recon, quad))
}

/// Inverse of a gauge element: exact for (phase-scaled) monomials, and
/// (U*U)^{-1}U* through the Neumann series otherwise, with the residual
/// certified.
pub fn invert_gauge_element(u: &AlgebraElement) -> Result<AlgebraElement, NcError> {
    if let Some((m, n, c)) = u.as_monomial() {
        if c.norm() < 1e-14 {
            return Err(NcError::NotInvertible(c.norm()));
        }
        let star = AlgebraElement::monomial(u.lattice(), m, n, c).involution();
        return Ok(star.scale(Complex64::new(1.0 / c.norm_sqr(), 0.0)));
    }
    let h = u
        .involution()
        .twisted_mul_at(u, 2 * u.radius())?;
    let h_inv = inverse(&h, 1e-10).map_err(|e| match e {
        NcError::NotPositive(m) => NcError::NotInvertible(m),
        other => other,
    })?;
    let u_inv = h_inv.twisted_mul_at(&u.involution(), h_inv.radius() + u.radius())?;
    let residual = u
        .twisted_mul_at(&u_inv, u.radius() + u_inv.radius())?
        .sub(&AlgebraElement::delta(u.lattice()).resized(u.radius() + u_inv.radius()))
        .l1_norm();
    if residual > 1e-8 {
        return Err(NcError::NotInvertible(residual));
    }
    Ok(u_inv)
}

/// Deterministic generator for cross-validation vectors.
struct SplitMix(u64);

impl SplitMix {
    fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
