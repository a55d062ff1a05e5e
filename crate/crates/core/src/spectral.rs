//! Mesh-free spectral ground truth for the wave equation on the quotient.
//!
//! The Laplace-Beltrami spectrum on the dodecahedral space is the
//! restriction of the sphere spectrum to the invariant modes: the
//! eigenvalues are q^2 = beta^2 - 1 with beta running over
//! {1,13,21,25,31,33,37,41,43,45,49,51,53,55,57} and all odd integers
//! from 61 on. Per mode the wave equation reduces to
//!
//! ```text
//! u_q'' + 3 (a'/a) u_q' + (q^2 / a^2) u_q = 0
//! ```
//!
//! which has elementary solutions for both named expansion models: Ferrers
//! functions of order 3/2 and half-odd degree for the de Sitter model
//! (all reducible to trigonometric closed forms), spherical Bessel
//! functions for the inflating model. A classical Runge-Kutta integrator
//! provides the independent cross-check.

use crate::evolution::ScaleFactorModel;
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("beta = {beta} is not an odd positive integer")]
    BadBeta { beta: f64 },
    #[error("order mu = {mu} is not supported (need 3/2, or -3/2 with nu = 1/2)")]
    BadOrder { mu: f64 },
    #[error("argument x = {x} is outside the open interval (-1, 1)")]
    OutsideCut { x: f64 },
    #[error("argument x = {x} must be positive")]
    NonPositiveArgument { x: f64 },
    #[error("the Ferrers pair P/Q degenerates at beta = 1; the q = 0 mode uses P^(-3/2)")]
    DegeneratePair,
    #[error("closed-form coefficients need a named model; use the two-point solve for custom models")]
    CustomModel,
}

/// The fifteen low eigenvalue labels; beyond these every odd beta >= 61
/// is admissible.
pub const LOW_BETAS: [u32; 15] = [1, 13, 21, 25, 31, 33, 37, 41, 43, 45, 49, 51, 53, 55, 57];

/// An admissible eigenvalue label: q^2 = beta^2 - 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EigenLabel {
    beta: u32,
}

impl EigenLabel {
    /// Build a label after checking admissibility.
    pub fn new(beta: u32) -> Option<Self> {
        if LOW_BETAS.contains(&beta) || (beta >= 61 && beta % 2 == 1) {
            Some(EigenLabel { beta })
        } else {
            None
        }
    }

    pub fn beta(self) -> u32 {
        self.beta
    }

    pub fn q_squared(self) -> f64 {
        let b = self.beta as f64;
        b * b - 1.0
    }

    pub fn q(self) -> f64 {
        self.q_squared().sqrt()
    }

    /// sin(beta pi / 2), exactly +-1 for odd beta.
    pub fn parity_sign(self) -> f64 {
        if self.beta % 4 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn is_constant_mode(self) -> bool {
        self.beta == 1
    }
}

/// Sorted admissible labels with beta <= beta_max.
pub fn eigen_betas(beta_max: u32) -> Vec<EigenLabel> {
    let mut out: Vec<EigenLabel> = LOW_BETAS
        .iter()
        .copied()
        .filter(|&b| b <= beta_max)
        .filter_map(EigenLabel::new)
        .collect();
    let mut b = 61;
    while b <= beta_max {
        out.push(EigenLabel::new(b).expect("odd beta >= 61 is admissible"));
        b += 2;
    }
    out.sort_by_key(|l| l.beta);
    out
}

fn check_beta(nu: f64) -> Result<u32, SpectralError> {
    let beta = nu + 0.5;
    let rounded = beta.round();
    if (beta - rounded).abs() > 1e-12 || rounded < 1.0 || (rounded as i64) % 2 == 0 {
        return Err(SpectralError::BadBeta { beta });
    }
    Ok(rounded as u32)
}

fn check_cut(x: f64) -> Result<(), SpectralError> {
    if x.abs() >= 1.0 {
        return Err(SpectralError::OutsideCut { x });
    }
    Ok(())
}

/// Ferrers function of the first kind, P^mu_nu(x), for the orders the
/// mode theory uses: mu = 3/2 with nu = beta - 1/2, and mu = -3/2 with
/// nu = 1/2.
///
/// Both reduce to trigonometric closed forms in theta = arccos x; the
/// series in (1-x) loses all precision near x = 0 once beta is large,
/// while the closed forms are uniformly stable on the whole cut.
pub fn ferrers_p(mu: f64, nu: f64, x: f64) -> Result<f64, SpectralError> {
    check_cut(x)?;
    if (mu - 1.5).abs() < 1e-12 {
        let beta = check_beta(nu)?;
        Ok(p32(beta, x))
    } else if (mu + 1.5).abs() < 1e-12 {
        if (nu - 0.5).abs() > 1e-12 {
            return Err(SpectralError::BadOrder { mu });
        }
        Ok(pm32_half(x))
    } else {
        Err(SpectralError::BadOrder { mu })
    }
}

/// Derivative of [`ferrers_p`] with respect to x.
pub fn ferrers_p_prime(mu: f64, nu: f64, x: f64) -> Result<f64, SpectralError> {
    check_cut(x)?;
    if (mu - 1.5).abs() < 1e-12 {
        let beta = check_beta(nu)?;
        Ok(p32_prime(beta, x))
    } else if (mu + 1.5).abs() < 1e-12 {
        if (nu - 0.5).abs() > 1e-12 {
            return Err(SpectralError::BadOrder { mu });
        }
        Ok(pm32_half_prime(x))
    } else {
        Err(SpectralError::BadOrder { mu })
    }
}

/// Ferrers function of the second kind Q^{3/2}_{beta-1/2}(x), beta >= 3.
pub fn ferrers_q(mu: f64, nu: f64, x: f64) -> Result<f64, SpectralError> {
    check_cut(x)?;
    if (mu - 1.5).abs() > 1e-12 {
        return Err(SpectralError::BadOrder { mu });
    }
    let beta = check_beta(nu)?;
    if beta == 1 {
        return Err(SpectralError::DegeneratePair);
    }
    Ok(q32(beta, x))
}

/// Derivative of [`ferrers_q`] with respect to x.
pub fn ferrers_q_prime(mu: f64, nu: f64, x: f64) -> Result<f64, SpectralError> {
    check_cut(x)?;
    if (mu - 1.5).abs() > 1e-12 {
        return Err(SpectralError::BadOrder { mu });
    }
    let beta = check_beta(nu)?;
    if beta == 1 {
        return Err(SpectralError::DegeneratePair);
    }
    Ok(q32_prime(beta, x))
}

/// P^{3/2}_{beta-1/2}(cos theta)
///   = -sqrt(2/(pi sin theta)) (cot theta cos(beta theta) + beta sin(beta theta)).
fn p32(beta: u32, x: f64) -> f64 {
    let b = beta as f64;
    let th = x.acos();
    let (s, c) = (th.sin(), th.cos());
    -(2.0 / (PI * s)).sqrt() * ((c / s) * (b * th).cos() + b * (b * th).sin())
}

fn p32_prime(beta: u32, x: f64) -> f64 {
    let b = beta as f64;
    let th = x.acos();
    let (s, c) = (th.sin(), th.cos());
    let amp = -(2.0 / (PI * s)).sqrt();
    let body = (c / s) * (b * th).cos() + b * (b * th).sin();
    let amp_dth = -0.5 * amp * c / s;
    let body_dth =
        -(b * th).cos() / (s * s) - (c / s) * b * (b * th).sin() + b * b * (b * th).cos();
    // d/dx = -(1/sin theta) d/dtheta
    -(amp_dth * body + amp * body_dth) / s
}

/// Q^{3/2}_{beta-1/2}(cos theta)
///   = sqrt(pi/(2 sin theta)) (cot theta sin(beta theta) - beta cos(beta theta)).
fn q32(beta: u32, x: f64) -> f64 {
    let b = beta as f64;
    let th = x.acos();
    let (s, c) = (th.sin(), th.cos());
    (PI / (2.0 * s)).sqrt() * ((c / s) * (b * th).sin() - b * (b * th).cos())
}

fn q32_prime(beta: u32, x: f64) -> f64 {
    let b = beta as f64;
    let th = x.acos();
    let (s, c) = (th.sin(), th.cos());
    let amp = (PI / (2.0 * s)).sqrt();
    let body = (c / s) * (b * th).sin() - b * (b * th).cos();
    let amp_dth = -0.5 * amp * c / s;
    let body_dth =
        -(b * th).sin() / (s * s) + (c / s) * b * (b * th).cos() + b * b * (b * th).sin();
    -(amp_dth * body + amp * body_dth) / s
}

/// P^{-3/2}_{1/2}(x), the second solution paired with P^{3/2}_{1/2} for
/// the constant mode:
///   -(1/sqrt(2 pi)) (1-x^2)^{-3/4} (x sqrt(1-x^2) + arcsin x - pi/2).
fn pm32_half(x: f64) -> f64 {
    let g = x * (1.0 - x * x).sqrt() + x.asin() - PI / 2.0;
    -(1.0 / (2.0 * PI).sqrt()) * (1.0 - x * x).powf(-0.75) * g
}

fn pm32_half_prime(x: f64) -> f64 {
    let one_m = 1.0 - x * x;
    let g = x * one_m.sqrt() + x.asin() - PI / 2.0;
    -(1.0 / (2.0 * PI).sqrt()) * (1.5 * x * one_m.powf(-1.75) * g + 2.0 * one_m.powf(-0.25))
}

/// Which spherical Bessel family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BesselKind {
    J,
    Y,
}

/// Half-integer Bessel order used by the inflating modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BesselOrder {
    Half,
    ThreeHalves,
}

/// Half-integer Bessel functions in their trigonometric closed forms:
/// J_{1/2}, Y_{1/2}, J_{3/2}, Y_{3/2}. The J_{3/2} combination
/// sin x / x - cos x cancels catastrophically for small x and is summed
/// as its Maclaurin series there.
pub fn bessel_half(kind: BesselKind, order: BesselOrder, x: f64) -> Result<f64, SpectralError> {
    if x <= 0.0 {
        return Err(SpectralError::NonPositiveArgument { x });
    }
    let amp = (2.0 / (PI * x)).sqrt();
    Ok(match (kind, order) {
        (BesselKind::J, BesselOrder::Half) => amp * x.sin(),
        (BesselKind::Y, BesselOrder::Half) => -amp * x.cos(),
        (BesselKind::J, BesselOrder::ThreeHalves) => amp * j1_body(x),
        (BesselKind::Y, BesselOrder::ThreeHalves) => amp * (-x.cos() / x - x.sin()),
    })
}

/// sin(x)/x - cos(x), stable for all x > 0.
fn j1_body(x: f64) -> f64 {
    if x >= 0.5 {
        return x.sin() / x - x.cos();
    }
    // sum_{k>=1} (-1)^{k+1} 2k x^{2k} / (2k+1)!
    let t = x * x;
    let mut term = t / 3.0;
    let mut sum = term;
    let mut k = 1.0f64;
    while term.abs() > 1e-18 * sum.abs() {
        k += 1.0;
        term *= -t * (2.0 * k) / ((2.0 * k) * (2.0 * k + 1.0) * (2.0 * k - 2.0));
        sum += term;
    }
    sum
}

/// Mode amplitude pair (u_q, u_q') at a given time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeState {
    pub value: f64,
    pub derivative: f64,
}

/// The two constants of a mode solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeCoefficients {
    pub a_plus: f64,
    pub a_minus: f64,
}

/// Closed-form coefficients from Cauchy data (u_q(0), u_q'(0)) at t = 0.
///
/// De Sitter: the printed formulas normalized to H = 1 generalize by
/// dividing the velocity datum by H. Inflating, q = 0: the constants of
/// u_0(t) = A- e^{-3t} + A+ are A- = -u'(0)/3 and A+ = u(0) + u'(0)/3,
/// the unique solution of the 2x2 system for the basis {1, e^{-3t}}.
pub fn coeffs_from_data(
    model: ScaleFactorModel,
    label: EigenLabel,
    u0: f64,
    u0_prime: f64,
) -> Result<ModeCoefficients, SpectralError> {
    match model {
        ScaleFactorModel::DeSitter { hubble } => {
            let v = u0_prime / hubble;
            let half_pi_sqrt = (PI / 2.0).sqrt();
            if label.is_constant_mode() {
                Ok(ModeCoefficients {
                    a_plus: -half_pi_sqrt * (u0 + PI / 4.0 * v),
                    a_minus: -half_pi_sqrt * v,
                })
            } else {
                let sign = label.parity_sign();
                let beta = label.beta() as f64;
                Ok(ModeCoefficients {
                    a_plus: -half_pi_sqrt * sign / beta * u0,
                    a_minus: -(2.0 / PI).sqrt() * sign / label.q_squared() * v,
                })
            }
        }
        ScaleFactorModel::Inflating => {
            if label.is_constant_mode() {
                Ok(ModeCoefficients {
                    a_plus: u0 + u0_prime / 3.0,
                    a_minus: -u0_prime / 3.0,
                })
            } else {
                let q = label.q();
                let (sq, cq) = (q.sin(), q.cos());
                let half_pi_sqrt = (PI / 2.0).sqrt();
                Ok(ModeCoefficients {
                    a_plus: -half_pi_sqrt
                        * (q.sqrt() * sq * u0 + (sq - q * cq) / q.powf(1.5) * u0_prime),
                    a_minus: -half_pi_sqrt
                        * (q.sqrt() * cq * u0 + (cq + q * sq) / q.powf(1.5) * u0_prime),
                })
            }
        }
        ScaleFactorModel::Custom { .. } => Err(SpectralError::CustomModel),
    }
}

/// Coefficients from Cauchy data given at an arbitrary start time: solve
/// the 2x2 system built from the two basis solutions at t_star. The
/// Wronskian of the pair is nonzero, so the system is regular.
pub fn coeffs_from_data_at(
    model: ScaleFactorModel,
    label: EigenLabel,
    t_star: f64,
    u0: f64,
    u0_prime: f64,
) -> Result<ModeCoefficients, SpectralError> {
    let plus = mode_closed(
        model,
        label,
        ModeCoefficients { a_plus: 1.0, a_minus: 0.0 },
        t_star,
    )?;
    let minus = mode_closed(
        model,
        label,
        ModeCoefficients { a_plus: 0.0, a_minus: 1.0 },
        t_star,
    )?;
    let det = plus.value * minus.derivative - minus.value * plus.derivative;
    let a_plus = (u0 * minus.derivative - u0_prime * minus.value) / det;
    let a_minus = (u0_prime * plus.value - u0 * plus.derivative) / det;
    Ok(ModeCoefficients { a_plus, a_minus })
}

/// Closed-form mode solution and its time derivative.
///
/// De Sitter (theta = arccos(tanh Ht)):
///
/// ```text
/// u_q = -A+ sqrt(2/pi) C(theta) + A- sqrt(pi/2) S(theta),
/// C = cos theta cos(beta theta) + beta sin theta sin(beta theta),
/// S = cos theta sin(beta theta) - beta sin theta cos(beta theta),
/// ```
///
/// which is (cosh Ht)^{-3/2} [A+ P^{3/2} + A- Q^{3/2}](tanh Ht) with the
/// Ferrers closed forms expanded. Inflating: Bessel closed forms in
/// x = q e^{-t}; the derivative drops to the order-1/2 pair.
pub fn mode_closed(
    model: ScaleFactorModel,
    label: EigenLabel,
    coeffs: ModeCoefficients,
    t: f64,
) -> Result<ModeState, SpectralError> {
    let ModeCoefficients { a_plus, a_minus } = coeffs;
    match model {
        ScaleFactorModel::DeSitter { hubble } => {
            let h = hubble;
            let th = (h * t).tanh().acos();
            let (s, c) = (th.sin(), th.cos());
            if label.is_constant_mode() {
                // u_0 = -sqrt(2/pi) A+ - A-/sqrt(2 pi) (sin th cos th - th)
                let value =
                    -(2.0 / PI).sqrt() * a_plus - a_minus / (2.0 * PI).sqrt() * (s * c - th);
                let derivative = -h * (2.0 / PI).sqrt() * a_minus * s * s * s;
                Ok(ModeState { value, derivative })
            } else {
                let b = label.beta() as f64;
                let (sb, cb) = ((b * th).sin(), (b * th).cos());
                let big_c = c * cb + b * s * sb;
                let big_s = c * sb - b * s * cb;
                let value =
                    -a_plus * (2.0 / PI).sqrt() * big_c + a_minus * (PI / 2.0).sqrt() * big_s;
                let derivative = -h
                    * label.q_squared()
                    * s
                    * s
                    * (-a_plus * (2.0 / PI).sqrt() * cb + a_minus * (PI / 2.0).sqrt() * sb);
                Ok(ModeState { value, derivative })
            }
        }
        ScaleFactorModel::Inflating => {
            if label.is_constant_mode() {
                let e3 = (-3.0 * t).exp();
                Ok(ModeState {
                    value: a_minus * e3 + a_plus,
                    derivative: -3.0 * a_minus * e3,
                })
            } else {
                let q = label.q();
                let x = q * (-t).exp();
                let j32 = bessel_half(BesselKind::J, BesselOrder::ThreeHalves, x)?;
                let y32 = bessel_half(BesselKind::Y, BesselOrder::ThreeHalves, x)?;
                let j12 = bessel_half(BesselKind::J, BesselOrder::Half, x)?;
                let y12 = bessel_half(BesselKind::Y, BesselOrder::Half, x)?;
                let value = (-1.5 * t).exp() * (a_minus * j32 + a_plus * y32);
                let derivative = -(-2.5 * t).exp() * q * (a_minus * j12 + a_plus * y12);
                Ok(ModeState { value, derivative })
            }
        }
        ScaleFactorModel::Custom { .. } => Err(SpectralError::CustomModel),
    }
}

/// Classical fourth-order Runge-Kutta integration of the mode equation,
/// sampled at every step. Independent of the closed forms.
pub fn mode_ode_rk4(
    model: ScaleFactorModel,
    label: EigenLabel,
    u0: f64,
    u0_prime: f64,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Vec<(f64, ModeState)>, SpectralError> {
    assert!(dt > 0.0 && t1 > t0);
    let q2 = label.q_squared();
    let rhs = |t: f64, u: f64, v: f64| -> (f64, f64) {
        let (a, h) = model
            .scale_factor(t)
            .expect("scale factor must be defined along the trajectory");
        (v, -3.0 * h * v - q2 / (a * a) * u)
    };
    let n = ((t1 - t0) / dt).ceil() as usize;
    let dt = (t1 - t0) / n as f64;
    let mut out = Vec::with_capacity(n + 1);
    let (mut u, mut v, mut t) = (u0, u0_prime, t0);
    out.push((t, ModeState { value: u, derivative: v }));
    for _ in 0..n {
        let (k1u, k1v) = rhs(t, u, v);
        let (k2u, k2v) = rhs(t + 0.5 * dt, u + 0.5 * dt * k1u, v + 0.5 * dt * k1v);
        let (k3u, k3v) = rhs(t + 0.5 * dt, u + 0.5 * dt * k2u, v + 0.5 * dt * k2v);
        let (k4u, k4v) = rhs(t + dt, u + dt * k3u, v + dt * k3v);
        u += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        t += dt;
        out.push((t, ModeState { value: u, derivative: v }));
    }
    Ok(out)
}

/// Limit and leading correction of one mode as t tends to infinity.
#[derive(Clone, Copy, Debug)]
pub struct ProfileTerm {
    /// u_q(infinity)
    pub limit: f64,
    /// Coefficient of the leading correction: of (1 - tanh Ht) for the
    /// de Sitter model, of exp(-2t) for the inflating model (zero on the
    /// constant mode, whose corrections decay faster).
    pub first_correction: f64,
}

/// Per-mode asymptotic profile values.
pub fn asymptotic_profile(
    model: ScaleFactorModel,
    modes: &[(EigenLabel, ModeCoefficients)],
) -> Result<Vec<ProfileTerm>, SpectralError> {
    modes
        .iter()
        .map(|&(label, coeffs)| {
            Ok(match model {
                ScaleFactorModel::DeSitter { .. } => ProfileTerm {
                    limit: -(2.0 / PI).sqrt() * coeffs.a_plus,
                    first_correction: if label.is_constant_mode() {
                        0.0
                    } else {
                        -(2.0 / PI).sqrt() * label.q_squared() * coeffs.a_plus
                    },
                },
                ScaleFactorModel::Inflating => {
                    if label.is_constant_mode() {
                        ProfileTerm { limit: coeffs.a_plus, first_correction: 0.0 }
                    } else {
                        let q = label.q();
                        ProfileTerm {
                            limit: -(2.0 / PI).sqrt() * q.powf(-1.5) * coeffs.a_plus,
                            first_correction: -0.5 * (2.0 / PI).sqrt() * q.sqrt() * coeffs.a_plus,
                        }
                    }
                }
                ScaleFactorModel::Custom { .. } => return Err(SpectralError::CustomModel),
            })
        })
        .collect()
}

/// Split a mode into the slow branch (A+ only; tends to the profile) and
/// the fast branch (A- only; decays at the faster exponential rate).
pub fn split_plus_minus(coeffs: ModeCoefficients) -> (ModeCoefficients, ModeCoefficients) {
    (
        ModeCoefficients { a_plus: coeffs.a_plus, a_minus: 0.0 },
        ModeCoefficients { a_plus: 0.0, a_minus: coeffs.a_minus },
    )
}

/// Both sides of the de Sitter mode-space norm identities
/// (profile L2 norm vs H^{-1} norm of the slow branch's initial state,
/// and the same for gradients).
#[derive(Clone, Copy, Debug)]
pub struct DeSitterNormIdentities {
    pub profile_l2_sq: f64,
    pub plus_initial_hm1_sq: f64,
    pub grad_profile_l2_sq: f64,
    pub grad_initial_hm1_sq: f64,
}

/// Evaluate the de Sitter norm identities over a finite label set with
/// Cauchy data (u_q(0), u_q'(0)) per label.
pub fn desitter_norm_identities(
    hubble: f64,
    data: &[(EigenLabel, f64, f64)],
) -> Result<DeSitterNormIdentities, SpectralError> {
    let model = ScaleFactorModel::DeSitter { hubble };
    let mut out = DeSitterNormIdentities {
        profile_l2_sq: 0.0,
        plus_initial_hm1_sq: 0.0,
        grad_profile_l2_sq: 0.0,
        grad_initial_hm1_sq: 0.0,
    };
    for &(label, u0, u0p) in data {
        let coeffs = coeffs_from_data(model, label, u0, u0p)?;
        let (plus, _) = split_plus_minus(coeffs);
        let u_inf = -(2.0 / PI).sqrt() * coeffs.a_plus;
        let plus0 = mode_closed(model, label, plus, 0.0)?.value;
        let b2 = (label.beta() as f64).powi(2); // q^2 + 1
        out.profile_l2_sq += u_inf * u_inf;
        out.plus_initial_hm1_sq += plus0 * plus0 / b2;
        out.grad_profile_l2_sq += label.q_squared() * u_inf * u_inf;
        out.grad_initial_hm1_sq += label.q_squared() * u0 * u0 / b2;
    }
    Ok(out)
}

/// Series norms of the inflating asymptotic profile together with the
/// generalized energies of the slow branch and the realized comparison
/// ratios of the sandwich inequalities.
#[derive(Clone, Debug)]
pub struct InflatingNormCheck {
    pub profile_l2_sq: f64,
    pub grad_profile_sq: f64,
    pub laplacian_profile_sq: f64,
    pub energy_m_minus1: f64,
    pub energy_m0: f64,
    /// E_{-1} / |grad profile|^2 (1 when both vanish)
    pub ratio_grad: f64,
    /// E_0 / |laplacian profile|^2 (1 when both vanish)
    pub ratio_laplacian: f64,
    /// Bracket constant: the realized ratios must lie in [1/c, c].
    pub bracket: f64,
}

fn weight_q(q: f64) -> f64 {
    q - (2.0 * q).sin() + q.cos() / q
}

/// Evaluate the inflating profile norms and sandwich ratios over a label
/// set. The bracket constant is derived from the per-mode extreme ratios
/// over all admissible beta <= 201.
pub fn profile_norm_check(modes: &[(EigenLabel, ModeCoefficients)]) -> InflatingNormCheck {
    let mut check = InflatingNormCheck {
        profile_l2_sq: 0.0,
        grad_profile_sq: 0.0,
        laplacian_profile_sq: 0.0,
        energy_m_minus1: 0.0,
        energy_m0: 0.0,
        ratio_grad: 1.0,
        ratio_laplacian: 1.0,
        bracket: 1.0,
    };
    let two_over_pi = 2.0 / PI;
    for &(label, coeffs) in modes {
        let a2 = coeffs.a_plus * coeffs.a_plus;
        if label.is_constant_mode() {
            check.profile_l2_sq += a2;
            continue;
        }
        let q = label.q();
        let w = weight_q(q);
        check.profile_l2_sq += two_over_pi * q.powi(-3) * a2;
        check.grad_profile_sq += two_over_pi / q * a2;
        check.laplacian_profile_sq += two_over_pi * q * a2;
        check.energy_m_minus1 += two_over_pi / (q * q + 1.0) * w * a2;
        check.energy_m0 += two_over_pi * w * a2;
    }
    if check.grad_profile_sq > 0.0 {
        check.ratio_grad = check.energy_m_minus1 / check.grad_profile_sq;
    }
    if check.laplacian_profile_sq > 0.0 {
        check.ratio_laplacian = check.energy_m0 / check.laplacian_profile_sq;
    }
    check.bracket = sandwich_bracket(201);
    check
}

/// Smallest c such that every per-mode comparison ratio over the labels
/// beta <= beta_max lies in [1/c, c].
pub fn sandwich_bracket(beta_max: u32) -> f64 {
    let mut c: f64 = 1.0;
    for label in eigen_betas(beta_max) {
        if label.is_constant_mode() {
            continue;
        }
        let q = label.q();
        let w = weight_q(q);
        // E_{-1} vs gradient: q w / (q^2+1); E_0 vs laplacian: w / q
        for ratio in [q * w / (q * q + 1.0), w / q] {
            c = c.max(ratio).max(1.0 / ratio);
        }
    }
    c
}
