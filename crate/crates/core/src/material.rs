//! Constitutive content: isotropic linear elasticity, the Drucker–Prager
//! strength surface, and the strength driving force that enters the
//! fracture functional.

use crate::tensor::{double_contract, j2, SymTensor2};
use thiserror::Error;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Upper bound accepted for the residual stiffness `eta_eps`.
pub const ETA_EPS_MAX: f64 = 1e-2;
pub const ETA_EPS_DEFAULT: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("material parameter {name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("material parameter delta_eps must be non-negative and finite, got {0}")]
    NegativeDelta(f64),
    #[error("eta_eps must lie in (0, {ETA_EPS_MAX}], got {0}")]
    EtaOutOfRange(f64),
    #[error(
        "degenerate Drucker-Prager surface: 3*sigma_hs - sigma_ts = 0 \
         (sigma_ts = {sigma_ts}, sigma_hs = {sigma_hs})"
    )]
    DegenerateDruckerPrager { sigma_ts: f64, sigma_hs: f64 },
    #[error("degenerate strength ratio: the {0} strength is unbounded for sigma_hs/sigma_ts = {1}")]
    DegenerateStrengthRatio(&'static str, f64),
}

/// Elastic, strength and toughness constants plus the regularization
/// parameters. Build through [`MaterialParams::validate`] or
/// [`Material::new`] before use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Shear modulus.
    pub mu: f64,
    /// Lamé constant.
    pub lambda: f64,
    /// Uniaxial tensile strength.
    pub sigma_ts: f64,
    /// Hydrostatic strength.
    pub sigma_hs: f64,
    /// Critical energy release rate.
    pub g_c: f64,
    /// Regularization length.
    pub eps: f64,
    /// Residual stiffness of fully broken material.
    pub eta_eps: f64,
    /// Coefficient of the regularized surface energy.
    pub delta_eps: f64,
}

/// How `delta_eps` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaEps {
    /// Supplied value.
    Given(f64),
    /// `3 G_c / (16 W_ts eps)`, i.e. the leading-order scaling with unit
    /// prefactor and no O(1) correction.
    Fallback,
}

impl DeltaEps {
    pub fn resolve(&self, mu: f64, lambda: f64, sigma_ts: f64, g_c: f64, eps: f64) -> f64 {
        match *self {
            DeltaEps::Given(d) => d,
            DeltaEps::Fallback => delta_eps_fallback(mu, lambda, sigma_ts, g_c, eps),
        }
    }
}

pub fn young_modulus(mu: f64, lambda: f64) -> f64 {
    mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu)
}

pub fn bulk_modulus(mu: f64, lambda: f64) -> f64 {
    lambda + 2.0 / 3.0 * mu
}

pub fn poisson_ratio(mu: f64, lambda: f64) -> f64 {
    lambda / (2.0 * (lambda + mu))
}

/// `δᵋ = 3 G_c / (16 𝒲_ts ε)`.
pub fn delta_eps_fallback(mu: f64, lambda: f64, sigma_ts: f64, g_c: f64, eps: f64) -> f64 {
    let w_ts = sigma_ts * sigma_ts / (2.0 * young_modulus(mu, lambda));
    3.0 * g_c / (16.0 * w_ts * eps)
}

impl MaterialParams {
    pub fn validate(&self) -> Result<(), MaterialError> {
        let positive = [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("sigma_ts", self.sigma_ts),
            ("sigma_hs", self.sigma_hs),
            ("g_c", self.g_c),
            ("eps", self.eps),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(MaterialError::NonPositive { name, value });
            }
        }
        if !(self.eta_eps.is_finite() && self.eta_eps > 0.0 && self.eta_eps <= ETA_EPS_MAX) {
            return Err(MaterialError::EtaOutOfRange(self.eta_eps));
        }
        if !(self.delta_eps.is_finite() && self.delta_eps >= 0.0) {
            return Err(MaterialError::NegativeDelta(self.delta_eps));
        }
        if 3.0 * self.sigma_hs - self.sigma_ts == 0.0 {
            return Err(MaterialError::DegenerateDruckerPrager {
                sigma_ts: self.sigma_ts,
                sigma_hs: self.sigma_hs,
            });
        }
        Ok(())
    }

    /// `|3σ_hs − σ_ts| < 1e−8 σ_ts`: valid but numerically fragile.
    pub fn is_near_degenerate(&self) -> bool {
        (3.0 * self.sigma_hs - self.sigma_ts).abs() < 1e-8 * self.sigma_ts
    }

    pub fn young_e(&self) -> f64 {
        young_modulus(self.mu, self.lambda)
    }

    pub fn kappa(&self) -> f64 {
        bulk_modulus(self.mu, self.lambda)
    }

    pub fn poisson(&self) -> f64 {
        poisson_ratio(self.mu, self.lambda)
    }

    /// Same material at another regularization length, with `delta_eps`
    /// re-resolved by `rule`.
    pub fn with_eps(&self, eps: f64, rule: DeltaEps) -> MaterialParams {
        MaterialParams {
            eps,
            delta_eps: rule.resolve(self.mu, self.lambda, self.sigma_ts, self.g_c, eps),
            ..*self
        }
    }
}

/// Quantities derived once from [`MaterialParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub young_e: f64,
    pub kappa: f64,
    /// Stored energy density at the uniaxial tensile strength, `σ_ts²/2E`.
    pub w_ts: f64,
    /// Stored energy density at the hydrostatic strength, `σ_hs²/2κ`.
    pub w_hs: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// `3 G_c / (16 𝒲_ts)`.
    pub eps_recommended_max: f64,
}

pub fn derive_constants(m: &MaterialParams) -> DerivedConstants {
    let young_e = m.young_e();
    let kappa = m.kappa();
    let (sts, shs) = (m.sigma_ts, m.sigma_hs);
    let w_ts = sts * sts / (2.0 * young_e);
    let w_hs = shs * shs / (2.0 * kappa);
    let surface = m.delta_eps * m.g_c / (8.0 * m.eps);
    let alpha1 = surface / shs - 2.0 * w_hs / (3.0 * shs);
    let alpha2 = SQRT_3 * (3.0 * shs - sts) / (shs * sts) * surface + 2.0 * w_hs / (SQRT_3 * shs)
        - 2.0 * SQRT_3 * w_ts / sts;
    DerivedConstants {
        young_e,
        kappa,
        w_ts,
        w_hs,
        alpha1,
        alpha2,
        eps_recommended_max: 3.0 * m.g_c / (16.0 * w_ts),
    }
}

/// `W(E) = μ tr E² + (λ/2)(tr E)²`
pub fn stored_energy(strain: &SymTensor2, m: &MaterialParams) -> f64 {
    let tr = strain.trace();
    m.mu * double_contract(strain, strain) + 0.5 * m.lambda * tr * tr
}

/// `∂W/∂E = 2μE + λ (tr E) I`
pub fn stress(strain: &SymTensor2, m: &MaterialParams) -> SymTensor2 {
    *strain * (2.0 * m.mu) + SymTensor2::IDENTITY * (m.lambda * strain.trace())
}

/// Drucker–Prager strength function; zero on the strength surface.
pub fn strength_function(sigma: &SymTensor2, m: &MaterialParams) -> f64 {
    let (sts, shs) = (m.sigma_ts, m.sigma_hs);
    let denom = 3.0 * shs - sts;
    j2(sigma).sqrt() + sts * sigma.trace() / (SQRT_3 * denom) - SQRT_3 * shs * sts / denom
}

/// Critical stresses predicted by the strength surface for monotonic
/// shear `diag(σ, −σ, 0)`, biaxial tension `diag(σ, σ, 0)` and uniaxial
/// compression `diag(−σ, 0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedStrengths {
    pub shear: f64,
    pub biaxial: f64,
    /// Negative when `σ_hs/σ_ts < 2/3`, where the surface never closes on
    /// the compressive side.
    pub compressive: f64,
}

pub fn derived_strengths(m: &MaterialParams) -> Result<DerivedStrengths, MaterialError> {
    let ratio = m.sigma_hs / m.sigma_ts;
    let checked = |name: &'static str, d: f64| {
        if d == 0.0 || !d.is_finite() {
            Err(MaterialError::DegenerateStrengthRatio(name, ratio))
        } else {
            Ok(m.sigma_hs / d)
        }
    };
    Ok(DerivedStrengths {
        shear: checked("shear", SQRT_3 * (ratio - 1.0 / 3.0))?,
        biaxial: checked("biaxial", ratio + 1.0 / 3.0)?,
        compressive: checked("compressive", ratio - 2.0 / 3.0)?,
    })
}

/// Strength driving force with the damage factor removed:
/// `ĉ_e(E) = μ α₂ √(2 tr E_D²) + 3κ α₁ tr E`. May be negative.
pub fn che_undamaged(strain: &SymTensor2, m: &MaterialParams, d: &DerivedConstants) -> f64 {
    // 2 tr E_D² = 4 J₂(E)
    let dev_norm = (4.0 * j2(strain)).sqrt();
    m.mu * d.alpha2 * dev_norm + 3.0 * d.kappa * d.alpha1 * strain.trace()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsStatus {
    Pass,
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsCheck {
    pub status: EpsStatus,
    /// `eps / eps_recommended_max`
    pub ratio: f64,
    pub threshold: f64,
}

impl std::fmt::Display for EpsCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self.status {
            EpsStatus::Pass => "pass",
            EpsStatus::Warn => "warn",
        };
        write!(f, "{s} (eps/threshold = {:e}, threshold = {:e})", self.ratio, self.threshold)
    }
}

/// Compares `eps` with `3 G_c / (16 𝒲_ts)`.
pub fn check_eps(m: &MaterialParams, d: &DerivedConstants) -> EpsCheck {
    let ratio = m.eps / d.eps_recommended_max;
    EpsCheck {
        status: if ratio < 1.0 { EpsStatus::Pass } else { EpsStatus::Warn },
        ratio,
        threshold: d.eps_recommended_max,
    }
}

/// Validated parameters together with their derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub params: MaterialParams,
    pub derived: DerivedConstants,
}

impl Material {
    pub fn new(params: MaterialParams) -> Result<Self, MaterialError> {
        params.validate()?;
        if params.is_near_degenerate() {
            log::warn!(
                "3*sigma_hs - sigma_ts = {:e} is nearly zero; strength predictions are ill-conditioned",
                3.0 * params.sigma_hs - params.sigma_ts
            );
        }
        Ok(Material { params, derived: derive_constants(&params) })
    }

    pub fn stored_energy(&self, strain: &SymTensor2) -> f64 {
        stored_energy(strain, &self.params)
    }

    pub fn stress(&self, strain: &SymTensor2) -> SymTensor2 {
        stress(strain, &self.params)
    }

    pub fn strength_function(&self, sigma: &SymTensor2) -> f64 {
        strength_function(sigma, &self.params)
    }

    pub fn che(&self, strain: &SymTensor2) -> f64 {
        che_undamaged(strain, &self.params, &self.derived)
    }

    pub fn check_eps(&self) -> EpsCheck {
        check_eps(&self.params, &self.derived)
    }

    /// Sign of `(3σ_hs − σ_ts)`, used to orient the strength surface.
    pub fn surface_orientation(&self) -> f64 {
        (3.0 * self.params.sigma_hs - self.params.sigma_ts).signum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn unit_params() -> MaterialParams {
        MaterialParams {
            mu: 1.0,
            lambda: 1.0,
            sigma_ts: 1.0,
            sigma_hs: 1.0,
            g_c: 1.0,
            eps: 0.1,
            eta_eps: 1e-5,
            delta_eps: 1.0,
        }
    }

    fn strain() -> impl Strategy<Value = SymTensor2> {
        proptest::array::uniform6(-1.0..1.0f64)
            .prop_map(|c| SymTensor2::new(c[0], c[1], c[2], c[3], c[4], c[5]))
    }

    fn params() -> impl Strategy<Value = MaterialParams> {
        (0.1..10.0f64, 0.1..10.0f64, 0.5..5.0f64, 0.5..3.0f64).prop_map(|(mu, lambda, sts, r)| {
            MaterialParams {
                mu,
                lambda,
                sigma_ts: sts,
                sigma_hs: r * sts,
                ..unit_params()
            }
        })
    }

    #[test]
    fn stored_energy_examples() {
        let m = unit_params();
        assert_eq!(stored_energy(&SymTensor2::ZERO, &m), 0.0);
        assert_eq!(stored_energy(&SymTensor2::diag(1.0, 0.0, 0.0), &m), 1.5);
    }

    #[test]
    fn stress_examples() {
        let m = MaterialParams { lambda: 0.0, ..unit_params() };
        assert_eq!(stress(&SymTensor2::ZERO, &m), SymTensor2::ZERO);
        let s = stress(&SymTensor2::new(0.0, 0.0, 0.0, 0.5, 0.0, 0.0), &m);
        assert_eq!(s, SymTensor2::new(0.0, 0.0, 0.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn strength_function_examples() {
        let m = MaterialParams { sigma_ts: 2.0, sigma_hs: 1.5, ..unit_params() };
        let f_uni = strength_function(&SymTensor2::diag(2.0, 0.0, 0.0), &m);
        assert!(f_uni.abs() < 1e-14, "{f_uni}");
        let f_hyd = strength_function(&SymTensor2::diag(1.5, 1.5, 1.5), &m);
        assert!(f_hyd.abs() < 1e-14, "{f_hyd}");
        let f0 = strength_function(&SymTensor2::ZERO, &m);
        let expect = -SQRT_3 * 1.5 * 2.0 / (3.0 * 1.5 - 2.0);
        assert!((f0 - expect).abs() < 1e-14);
    }

    #[test]
    fn derived_strengths_unit_ratio() {
        let s = derived_strengths(&unit_params()).unwrap();
        assert!((s.shear - SQRT_3 / 2.0).abs() < 1e-14);
        assert!((s.biaxial - 0.75).abs() < 1e-14);
        assert!((s.compressive - 3.0).abs() < 1e-14);
    }

    #[test]
    fn derived_strengths_degenerate() {
        let m = MaterialParams { sigma_ts: 3.0, sigma_hs: 2.0, ..unit_params() };
        assert!(matches!(
            derived_strengths(&m),
            Err(MaterialError::DegenerateStrengthRatio("compressive", _))
        ));
    }

    #[test]
    fn derive_constants_examples() {
        let m = MaterialParams { delta_eps: 0.0, ..unit_params() };
        let d = derive_constants(&m);
        assert!((d.young_e - 2.5).abs() < 1e-15);
        assert!((d.kappa - 5.0 / 3.0).abs() < 1e-15);
        // with delta = 0 only the W_hs term remains in alpha1
        assert!((d.alpha1 + 2.0 * d.w_hs / 3.0).abs() < 1e-15);

        // sigma_ts = 1, E = 2: mu = 0.8, lambda = 0.8 * (2 - 1.6) / (3*0.8 - 2)... pick nu = 0.25
        let mu = 0.8;
        let lambda = 0.8;
        assert!((young_modulus(mu, lambda) - 2.0).abs() < 1e-15);
        let m = MaterialParams { mu, lambda, ..unit_params() };
        let d = derive_constants(&m);
        assert!((d.w_ts - 0.25).abs() < 1e-15);
        assert!((d.eps_recommended_max - 0.75).abs() < 1e-15);
    }

    #[test]
    fn alpha1_vanishes_without_surface_or_hydrostatic_energy() {
        // delta = 0 and W_hs -> 0 (sigma_hs -> 0 is invalid, so check the
        // formula's two pieces separately)
        let m = MaterialParams { delta_eps: 0.0, ..unit_params() };
        let d = derive_constants(&m);
        let surface_part = d.alpha1 + 2.0 * d.w_hs / (3.0 * m.sigma_hs);
        assert_eq!(surface_part, 0.0);
    }

    #[test]
    fn che_examples() {
        let m = MaterialParams { delta_eps: 2.0, ..unit_params() };
        let d = derive_constants(&m);
        assert_eq!(che_undamaged(&SymTensor2::ZERO, &m, &d), 0.0);
        let theta = 0.3;
        let e = SymTensor2::IDENTITY * (theta / 3.0);
        let c = che_undamaged(&e, &m, &d);
        assert!((c - 3.0 * d.kappa * d.alpha1 * theta).abs() < 1e-14);
    }

    #[test]
    fn eps_check() {
        let mu = 0.8;
        let lambda = 0.8;
        let base = MaterialParams { mu, lambda, ..unit_params() };
        let d = derive_constants(&base);
        assert!((d.eps_recommended_max - 0.75).abs() < 1e-15);
        let half = MaterialParams { eps: 0.375, ..base };
        let c = check_eps(&half, &derive_constants(&half));
        assert_eq!(c.status, EpsStatus::Pass);
        assert!((c.ratio - 0.5).abs() < 1e-15);
        let double = MaterialParams { eps: 1.5, ..base };
        let c = check_eps(&double, &derive_constants(&double));
        assert_eq!(c.status, EpsStatus::Warn);
        assert!((c.ratio - 2.0).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        let bad = MaterialParams { g_c: -1.0, ..unit_params() };
        assert_eq!(
            bad.validate(),
            Err(MaterialError::NonPositive { name: "g_c", value: -1.0 })
        );
        let degenerate = MaterialParams { sigma_ts: 3.0, sigma_hs: 1.0, ..unit_params() };
        assert!(matches!(
            degenerate.validate(),
            Err(MaterialError::DegenerateDruckerPrager { .. })
        ));
        let eta = MaterialParams { eta_eps: 0.1, ..unit_params() };
        assert!(matches!(eta.validate(), Err(MaterialError::EtaOutOfRange(_))));
        let near = MaterialParams { sigma_ts: 3.0, sigma_hs: 1.0 + 1e-10, ..unit_params() };
        assert!(near.validate().is_ok());
        assert!(near.is_near_degenerate());
    }

    #[test]
    fn fallback_delta() {
        let m = MaterialParams { mu: 0.8, lambda: 0.8, ..unit_params() };
        // W_ts = 0.25, so delta = 3 / (16 * 0.25 * eps) = 0.75 / eps
        let d = delta_eps_fallback(m.mu, m.lambda, m.sigma_ts, m.g_c, 0.375);
        assert!((d - 2.0).abs() < 1e-14);
        let m2 = m.with_eps(0.75, DeltaEps::Fallback);
        assert!((m2.delta_eps - 1.0).abs() < 1e-14);
    }

    /// Stress invariants of a damaged state, from the strain route.
    fn che_from_stress_invariants(e: &SymTensor2, v: f64, m: &MaterialParams, d: &DerivedConstants) -> f64 {
        let i1 = 3.0 * d.kappa * v * v * e.trace();
        let ed = e.deviator();
        let j2 = 2.0 * m.mu * m.mu * v.powi(4) * double_contract(&ed, &ed);
        d.alpha2 * j2.sqrt() + d.alpha1 * i1
    }

    proptest! {
        #[test]
        fn stored_energy_nonnegative(e in strain(), m in params()) {
            prop_assert!(stored_energy(&e, &m) >= 0.0);
        }

        #[test]
        fn stored_energy_work_identity(e in strain(), m in params()) {
            let w = stored_energy(&e, &m);
            let half_work = 0.5 * double_contract(&stress(&e, &m), &e);
            prop_assert!((w - half_work).abs() <= 1e-12 * (1.0 + w));
        }

        #[test]
        fn stress_is_energy_gradient(e in strain(), m in params()) {
            let s = stress(&e, &m);
            for h in [1e-4, 1e-5] {
                // symmetric perturbations; off-diagonal derivative is 2*s_ij
                let comps: [(fn(&mut SymTensor2) -> &mut f64, f64, f64); 6] = [
                    (|t| &mut t.xx, s.xx, 1.0),
                    (|t| &mut t.yy, s.yy, 1.0),
                    (|t| &mut t.zz, s.zz, 1.0),
                    (|t| &mut t.xy, s.xy, 2.0),
                    (|t| &mut t.yz, s.yz, 2.0),
                    (|t| &mut t.xz, s.xz, 2.0),
                ];
                for (get, exact, factor) in comps {
                    let mut p = e;
                    *get(&mut p) += h;
                    let mut q = e;
                    *get(&mut q) -= h;
                    let fd = (stored_energy(&p, &m) - stored_energy(&q, &m)) / (2.0 * h);
                    let reference = factor * exact;
                    let scale = s.max_abs().max(1e-8);
                    prop_assert!((fd - reference).abs() / scale < 1e-6, "fd {fd} vs {reference}");
                }
            }
        }

        #[test]
        fn che_matches_stress_invariant_route(e in strain(), v in 0.05..1.0f64, m in params()) {
            let m = MaterialParams { delta_eps: 1.7, ..m };
            let d = derive_constants(&m);
            let lhs = v * v * che_undamaged(&e, &m, &d);
            let rhs = che_from_stress_invariants(&e, v, &m, &d);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }

        #[test]
        fn derived_strength_states_lie_on_surface(sts in 0.1..100.0f64, r in 0.4..5.0f64) {
            prop_assume!((r - 2.0 / 3.0).abs() > 1e-3);
            let m = MaterialParams { sigma_ts: sts, sigma_hs: r * sts, ..unit_params() };
            let s = derived_strengths(&m).unwrap();
            let f_ss = strength_function(&SymTensor2::diag(s.shear, -s.shear, 0.0), &m);
            let f_bs = strength_function(&SymTensor2::diag(s.biaxial, s.biaxial, 0.0), &m);
            for f in [f_ss, f_bs] {
                prop_assert!(f.abs() < 1e-10 * sts, "{f}");
            }
            if r > 2.0 / 3.0 {
                let f_cs = strength_function(&SymTensor2::diag(-s.compressive, 0.0, 0.0), &m);
                prop_assert!(f_cs.abs() < 1e-10 * sts, "{f_cs}");
            } else {
                // the cone is open in compression: no uniaxial compressive failure
                for k in [0.1, 1.0, 10.0, 1e3] {
                    let f = strength_function(&SymTensor2::diag(-k * sts, 0.0, 0.0), &m);
                    prop_assert!(f < 0.0);
                }
            }
        }

        #[test]
        fn tensile_overload_violates_surface(sts in 0.1..10.0f64, r in 0.34..5.0f64, k in 1.01..5.0f64) {
            let m = MaterialParams { sigma_ts: sts, sigma_hs: r * sts, ..unit_params() };
            let orient = 3.0 * m.sigma_hs - m.sigma_ts;
            prop_assume!(orient > 0.0);
            let f = strength_function(&SymTensor2::diag(k * sts, 0.0, 0.0), &m);
            prop_assert!(orient * f > 0.0);
        }
    }
}
