//! The explicit 2x2 construction: a decreasing chain of near-identity
//! positive contractions whose product rotates `e1` toward the `e2` axis.
//!
//! Per step `k`, the factor is `P_eta_k + (1 - eps_k) P_eta_k^perp` with
//! `eps_k = (D + n - k)^{-1}` and frame angles `rho_k` advancing by
//! `theta_k = theta / log(D + n - k)`; the scalars `alpha_k` (norm loss of
//! the tracked vector) and `beta_k` (largest feasible decrease constant
//! between consecutive factors) quantify the construction.
//!
//! Angles are tracked as exact running scalars, never recovered from
//! matrices, so there are no branch issues near pi/2; the matrix/scalar
//! agreement is a test, not the data path.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::seqgen::{verify_chain, ChainMeta, ContractionChain, DEFAULT_CHAIN_TOL};
use crate::symmat::SymMatrix;

const FRAC_PI_3: f64 = std::f64::consts::FRAC_PI_3;

#[derive(Debug, Clone)]
pub struct RotationParams {
    pub delta: f64,
    pub n: usize,
    pub theta: f64,
    /// `D = 2 / delta`; the construction needs `D > 8`.
    pub d_cap: f64,
    /// `B = 1 / log D`, the tail integral of `1 / (t log^2 t)` from `D`.
    pub b_const: f64,
}

impl RotationParams {
    pub fn new(delta: f64, n: usize, theta: f64) -> Result<Self> {
        if !(0.0 < delta && delta < 0.25) {
            return Err(Error::Validation(format!(
                "delta {delta} outside (0, 1/4); D = 2/delta must exceed 8"
            )));
        }
        if !theta.is_finite() || theta <= 0.0 {
            return Err(Error::Validation(format!("theta {theta} must be positive")));
        }
        let d_cap = 2.0 / delta;
        let params = RotationParams {
            delta,
            n,
            theta,
            d_cap,
            b_const: 1.0 / d_cap.ln(),
        };
        // The per-step rotation angle must stay inside the domain of the step operations.
        if n >= 1 {
            let worst = params.theta_k(n - 1);
            if worst > FRAC_PI_3 {
                return Err(Error::ThetaTooLarge(format!(
                    "theta_k reaches {worst}, beyond pi/3; reduce theta below {}",
                    FRAC_PI_3 * (d_cap + 1.0).ln()
                )));
            }
        }
        Ok(params)
    }

    #[inline]
    pub fn eps_k(&self, k: usize) -> f64 {
        1.0 / (self.d_cap + (self.n - k) as f64)
    }

    #[inline]
    pub fn theta_k(&self, k: usize) -> f64 {
        self.theta / (self.d_cap + (self.n - k) as f64).ln()
    }

    /// The strongest admissibility regime: every per-step correction is small
    /// enough that all envelope and sum bounds are guaranteed
    /// (`10 theta_k^2 <= 1/2` and `18 eps_k theta_k^2 <= 1/2`).
    pub fn smallness_ok(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let k = self.n - 1; // both quantities peak at the last step
        let t = self.theta_k(k);
        10.0 * t * t <= 0.5 && 18.0 * self.eps_k(k) * t * t <= 0.5
    }

    /// Largest theta satisfying the smallness regime for this delta.
    pub fn theta_cap_smallness(delta: f64) -> f64 {
        let d_cap = 2.0 / delta;
        let log_edge = (d_cap + 1.0).ln();
        let from_cube = log_edge / 20f64.sqrt();
        let from_beta = log_edge * ((d_cap + 1.0) / 36.0).sqrt();
        from_cube.min(from_beta)
    }

    /// Largest theta keeping the product lower bound above `1 - delta`.
    pub fn theta_cap_rate(delta: f64) -> f64 {
        let d_cap = 2.0 / delta;
        ((1.0 / (1.0 - delta)).ln() * d_cap.ln() / 34.0).sqrt()
    }

    /// Largest theta inside the step-operation domain at all.
    pub fn theta_cap_domain(delta: f64) -> f64 {
        FRAC_PI_3 * (2.0 / delta + 1.0).ln()
    }
}

/// One contraction applied to a unit vector at angle `phi`, with the frame
/// at angle `rho >= phi`: returns the norm `alpha` of the image and the new
/// angle.
///
/// Computed in the frame of `eta` through the cancellation-free forms
/// `alpha = sqrt(1 - eps (2 - eps) sin^2 t)` and
/// `delta_phi = atan(eps tan t / (1 + (1 - eps) tan^2 t))` with
/// `t = rho - phi`.
pub fn alpha_step(phi: f64, rho: f64, eps: f64) -> Result<(f64, f64)> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::Domain(format!("eps {eps} outside [0, 1/2]")));
    }
    let theta_rel = rho - phi;
    if !(-1e-15..=FRAC_PI_3 + 1e-15).contains(&theta_rel) {
        return Err(Error::Domain(format!(
            "relative angle {theta_rel} outside [0, pi/3]"
        )));
    }
    let theta_rel = theta_rel.max(0.0);
    let s = theta_rel.sin();
    let alpha = (1.0 - eps * (2.0 - eps) * s * s).sqrt();
    let tan = theta_rel.tan();
    let delta_phi = (eps * tan / (1.0 + (1.0 - eps) * tan * tan)).atan();
    Ok((alpha, phi + delta_phi))
}

/// Largest `beta` with
/// `P_xi + (1 - eps) P_xi^perp >= beta (P_zeta + (1 - kappa) P_zeta^perp)`
/// for frames `phi_rel` apart: the smaller eigenvalue of
/// `D (I - eps P_zeta^perp) D` with `D = diag(1, (1 - kappa)^{-1/2})`.
pub fn beta_min(phi_rel: f64, eps: f64, kappa: f64) -> Result<f64> {
    if !(eps > 0.0 && eps + eps * eps < kappa && kappa < 0.5) {
        return Err(Error::Domain(format!(
            "need 0 < eps, eps + eps^2 < kappa < 1/2; got eps {eps}, kappa {kappa}"
        )));
    }
    if !(-1e-15..=FRAC_PI_3 + 1e-15).contains(&phi_rel) {
        return Err(Error::Domain(format!(
            "relative angle {phi_rel} outside [0, pi/3]"
        )));
    }
    let c = phi_rel.cos();
    let s = phi_rel.sin();
    let scale = 1.0 / (1.0 - kappa);
    let a = 1.0 - eps * s * s;
    let b = eps * c * s * scale.sqrt();
    let d = (1.0 - eps * c * c) * scale;
    Ok(((a + d) - ((a - d) * (a - d) + 4.0 * b * b).sqrt()) / 2.0)
}

/// Which families of bounds held along a run. `alpha`/`beta` are the
/// per-step guarantees and hold on the whole step-operation domain; the envelope and
/// sum bounds are only promised in the smallness regime.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    /// `alpha_{k+1} >= 1 - eps_k theta_k^2` and
    /// `|dphi - eps_k theta_k| <= 10 eps_k theta_k^3` at every step.
    pub alpha: bool,
    /// `1 - 2 (rho_k - rho_{k-1})^2 <= beta_k <= 1` at every step.
    pub beta: bool,
    /// `sum (1 - alpha_k) <= B theta^2` and
    /// `sum (1 - beta_k)(n - k) <= 18 B theta^2`.
    pub sums: bool,
    /// Parameters were inside the smallness regime.
    pub smallness: bool,
    /// `theta_{k+1} - theta_k` stayed in `[0, 1.5 eps_k theta_k]`.
    pub theta_increments: bool,
    /// `rho_{k+1} - rho_k` stayed in `[0, 3 eps_k theta_k]`.
    pub rho_increments: bool,
    /// `beta_k >= 1 - 18 eps_{k-1}^2 theta_{k-1}^2` at every step.
    pub beta_strong: bool,
    /// `eps_k - eps_{k-1} > eps_{k-1}^2` (an index-arithmetic identity).
    pub eps_growth: bool,
    pub alpha_deficit_sum: f64,
    pub beta_weighted_deficit_sum: f64,
    pub b_theta_sq: f64,
}

#[derive(Debug, Clone)]
pub struct RotationState {
    /// `eps_k`, `theta_k` for `k = 0..n-1`.
    pub eps: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Vector angles `phi_0..phi_n`.
    pub phis: Vec<f64>,
    /// Frame angles `rho_0..rho_{n-1}`.
    pub rhos: Vec<f64>,
    /// `alpha_1..alpha_n`.
    pub alphas: Vec<f64>,
    /// `beta_0 = 1, beta_1..beta_{n-1}`.
    pub betas: Vec<f64>,
    pub bounds: BoundsReport,
}

impl RotationState {
    pub fn phi_n(&self) -> f64 {
        *self.phis.last().expect("phi_0 always present")
    }

    pub fn alpha_product(&self) -> f64 {
        self.alphas.iter().map(|a| a.ln()).sum::<f64>().exp()
    }

    /// `prod beta_k^{n-k}`, computed through logs for stability.
    pub fn beta_weighted_product(&self) -> f64 {
        let n = self.alphas.len();
        self.betas
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, b)| (n - k) as f64 * b.ln())
            .sum::<f64>()
            .exp()
    }

    /// The guaranteed scalar lower bound `exp(-34 B theta^2)`.
    pub fn scalar_lower_bound(&self) -> f64 {
        (-34.0 * self.bounds.b_theta_sq).exp()
    }
}

/// Runs the angle recursion and records every per-step quantity and bound.
pub fn run_recursion(params: &RotationParams) -> Result<RotationState> {
    let n = params.n;
    let eps: Vec<f64> = (0..n).map(|k| params.eps_k(k)).collect();
    let thetas: Vec<f64> = (0..n).map(|k| params.theta_k(k)).collect();

    let mut phis = vec![0.0f64];
    let mut rhos: Vec<f64> = Vec::new();
    let mut alphas: Vec<f64> = Vec::with_capacity(n);
    let mut betas: Vec<f64> = Vec::new();

    let tol = 1e-12;
    let mut alpha_ok = true;
    let mut beta_ok = true;
    let mut theta_inc_ok = true;
    let mut rho_inc_ok = true;
    let mut beta_strong_ok = true;
    let mut eps_growth_ok = true;
    let mut alpha_deficit = 0.0f64;
    let mut beta_weighted_deficit = 0.0f64;

    if n >= 1 {
        rhos.push(thetas[0]);
        betas.push(1.0);
    }

    for k in 0..n {
        let (alpha, phi_next) = alpha_step(phis[k], rhos[k], eps[k]).map_err(|e| match e {
            Error::Domain(msg) => Error::ThetaTooLarge(msg),
            other => other,
        })?;
        let dphi = phi_next - phis[k];
        let et = eps[k] * thetas[k];
        if alpha < 1.0 - eps[k] * thetas[k] * thetas[k] - tol {
            alpha_ok = false;
        }
        if (dphi - et).abs() > 10.0 * et * thetas[k] * thetas[k] + tol {
            alpha_ok = false;
        }
        alpha_deficit += 1.0 - alpha;
        alphas.push(alpha);
        phis.push(phi_next);

        if k + 1 < n {
            let rho_next = phi_next + thetas[k + 1];
            let dtheta = thetas[k + 1] - thetas[k];
            if !(-tol..=1.5 * et + tol).contains(&dtheta) {
                theta_inc_ok = false;
            }
            let drho = rho_next - rhos[k];
            if !(-tol..=3.0 * et + tol).contains(&drho) {
                rho_inc_ok = false;
            }
            // eps_{k+1} - eps_k > eps_k^2 reduces to (a + 1)^2 > a (a + 1)
            // for a = D + n - k - 1, exact on the index formulas.
            let a = params.d_cap + (n - k - 1) as f64;
            if (a + 1.0) * (a + 1.0) <= a * (a + 1.0) {
                eps_growth_ok = false;
            }

            let beta = beta_min(drho.max(0.0), eps[k], eps[k + 1]).map_err(|e| match e {
                Error::Domain(msg) => Error::ThetaTooLarge(msg),
                other => other,
            })?;
            if beta > 1.0 + tol || beta < 1.0 - 2.0 * drho * drho - tol {
                beta_ok = false;
            }
            if beta < 1.0 - 18.0 * et * et - tol {
                beta_strong_ok = false;
            }
            beta_weighted_deficit += (1.0 - beta) * (n - (k + 1)) as f64;
            betas.push(beta);
            rhos.push(rho_next);
        }
    }

    let b_theta_sq = params.b_const * params.theta * params.theta;
    let sums_ok = alpha_deficit <= b_theta_sq + 1e-9
        && beta_weighted_deficit <= 18.0 * b_theta_sq + 1e-9;

    Ok(RotationState {
        eps,
        thetas,
        phis,
        rhos,
        alphas,
        betas,
        bounds: BoundsReport {
            alpha: alpha_ok,
            beta: beta_ok,
            sums: sums_ok,
            smallness: params.smallness_ok(),
            theta_increments: theta_inc_ok,
            rho_increments: rho_inc_ok,
            beta_strong: beta_strong_ok,
            eps_growth: eps_growth_ok,
            alpha_deficit_sum: alpha_deficit,
            beta_weighted_deficit_sum: beta_weighted_deficit,
            b_theta_sq,
        },
    })
}

/// Bisection for the theta reaching `target = phi_n(theta)` within 1e-10.
/// `phi_n` is monotone increasing on the bracket; each evaluation is checked
/// to stay between the bracket values.
pub fn solve_theta(delta: f64, n: usize, target: f64) -> Result<f64> {
    if !(target > 0.0 && target <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::Validation(format!(
            "target angle {target} outside (0, pi/2]"
        )));
    }
    if n == 0 {
        return Err(Error::Unreachable("zero steps cannot rotate".into()));
    }
    let phi_of = |theta: f64| -> Result<f64> {
        let params = RotationParams::new(delta, n, theta)?;
        Ok(run_recursion(&params)?.phi_n())
    };

    let mut hi = RotationParams::theta_cap_domain(delta) * (1.0 - 1e-9);
    let mut phi_hi = phi_of(hi)?;
    if phi_hi < target {
        return Err(Error::Unreachable(format!(
            "phi_n at the largest admissible theta is {phi_hi} < target {target}; increase n"
        )));
    }
    let mut lo = hi * 1e-12;
    let mut phi_lo = phi_of(lo)?;
    if phi_lo > target {
        return Err(Error::Numerical(format!(
            "phi_n at the bracket floor already exceeds the target ({phi_lo})"
        )));
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let phi_mid = phi_of(mid)?;
        if (phi_mid - target).abs() <= 1e-10 {
            return Ok(mid);
        }
        if phi_mid < phi_lo - 1e-12 || phi_mid > phi_hi + 1e-12 {
            return Err(Error::Numerical(format!(
                "phi_n not monotone on the bracket: {phi_mid} outside [{phi_lo}, {phi_hi}]"
            )));
        }
        if phi_mid < target {
            lo = mid;
            phi_lo = phi_mid;
        } else {
            hi = mid;
            phi_hi = phi_mid;
        }
    }
    Err(Error::Numerical(
        "bisection for theta did not reach the 1e-10 angle tolerance".into(),
    ))
}

/// `P_eta + (1 - eps) P_eta^perp = (1 - eps) I + eps P_eta` at angle `rho`.
fn rotation_factor(rho: f64, eps: f64) -> SymMatrix {
    let c = rho.cos();
    let s = rho.sin();
    SymMatrix::from_rows(&[
        vec![(1.0 - eps) + eps * c * c, eps * c * s],
        vec![eps * c * s, (1.0 - eps) + eps * s * s],
    ])
    .expect("2x2 entries are finite")
}

/// Builds the decreasing chain `T_0 >= T_1 >= ... >= T_{n-1}` with
/// `T_k = beta_0 ... beta_k (P_eta_k + (1 - eps_k) P_eta_k^perp)` and the
/// final term scaled by `lambda_scale`. Terms are stored in application
/// order, i.e. `terms[k] = T_k` and products apply ascending k.
pub fn build_chain(
    params: &RotationParams,
    lambda_scale: f64,
) -> Result<(ContractionChain, RotationState)> {
    if !(0.0 < lambda_scale && lambda_scale <= 1.0) {
        return Err(Error::Validation(format!(
            "lambda {lambda_scale} outside (0, 1]"
        )));
    }
    if params.n == 0 {
        return Err(Error::Validation("cannot build an empty chain".into()));
    }
    let state = run_recursion(params)?;
    let n = params.n;
    let mut terms = Vec::with_capacity(n);
    let mut beta_prod = 1.0f64;
    for k in 0..n {
        beta_prod *= state.betas[k];
        let mut scale = beta_prod;
        if k == n - 1 {
            scale *= lambda_scale;
        }
        terms.push(rotation_factor(state.rhos[k], state.eps[k]).scale(scale));
    }
    let meta = ChainMeta::new("rotation2d", 0)
        .with("delta", params.delta)
        .with("n", n as u64)
        .with("theta", params.theta)
        .with("lambda", lambda_scale);
    let chain = ContractionChain::from_terms(terms, meta)?;
    let report = verify_chain(&chain, DEFAULT_CHAIN_TOL)?;
    if !report.accepted {
        return Err(Error::Construction(format!(
            "rotation chain failed verification (worst witness {:?}); theta is outside the \
             validity regime",
            report
                .step_witnesses
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
        )));
    }
    Ok((chain, state))
}

/// Applies the whole chain to `e1` in ascending term order.
pub fn evaluate_product(chain: &ContractionChain) -> Vec<f64> {
    let mut v = vec![0.0; chain.dim()];
    v[0] = 1.0;
    for t in chain.terms() {
        v = t.matvec(&v);
    }
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsOk {
    pub alpha: bool,
    pub beta: bool,
    pub sums: bool,
}

/// The machine-readable run report.
#[derive(Debug, Clone, Serialize)]
pub struct RotationReport {
    pub delta: f64,
    pub n: usize,
    pub theta: f64,
    pub lambda: f64,
    pub phi_n: f64,
    pub alpha_prod: f64,
    pub beta_weighted_prod: f64,
    /// `exp(-34 B theta^2)`.
    pub lower_bound_exp: f64,
    /// The full matrix chain applied to `e1`.
    pub product_vector: [f64; 2],
    pub product_norm: f64,
    /// Relative disagreement between the matrix product and the scalar
    /// prediction `r (cos phi_n, sin phi_n)`.
    pub scalar_matrix_rel_err: f64,
    pub bounds_ok: BoundsOk,
    pub smallness_ok: bool,
    /// Index convention of the stored chain.
    pub term_indexing: String,
}

pub fn rotation_report(
    params: &RotationParams,
    state: &RotationState,
    chain: &ContractionChain,
    lambda: f64,
) -> RotationReport {
    let v = evaluate_product(chain);
    let r = state.alpha_product() * state.beta_weighted_product() * lambda;
    let expect = [r * state.phi_n().cos(), r * state.phi_n().sin()];
    let rel_err = crate::matrix::dist(&v, &expect) / r.max(f64::MIN_POSITIVE);
    RotationReport {
        delta: params.delta,
        n: params.n,
        theta: params.theta,
        lambda,
        phi_n: state.phi_n(),
        alpha_prod: state.alpha_product(),
        beta_weighted_prod: state.beta_weighted_product(),
        lower_bound_exp: state.scalar_lower_bound(),
        product_vector: [v[0], v[1]],
        product_norm: crate::matrix::norm(&v),
        scalar_matrix_rel_err: rel_err,
        bounds_ok: BoundsOk {
            alpha: state.bounds.alpha,
            beta: state.bounds.beta,
            sums: state.bounds.sums,
        },
        smallness_ok: state.bounds.smallness,
        term_indexing: "terms[k] = T_k for k = 0..n-1 in application order; statements \
                        indexed from T_1 shift k by one; lambda scales the final term"
            .into(),
    }
}

/// What the construction's own estimates would require for a full quarter
/// turn ending at `1 - delta`: the step size from the smallness and
/// product-lower-bound caps, and the (astronomical) step count implied by
/// `phi_n ~ theta (loglog(D + n) - loglog D)`.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub delta: f64,
    pub d_cap: f64,
    pub b_const: f64,
    pub theta_cap_smallness: f64,
    pub theta_cap_rate: f64,
    pub theta: f64,
    /// log10 of the implied number of steps.
    pub log10_n: f64,
}

pub fn analyze(delta: f64) -> Result<AnalyzeReport> {
    if !(0.0 < delta && delta < 0.25) {
        return Err(Error::Validation(format!(
            "delta {delta} outside (0, 1/4)"
        )));
    }
    let d_cap = 2.0 / delta;
    let b_const = 1.0 / d_cap.ln();
    let cap_small = RotationParams::theta_cap_smallness(delta);
    let cap_rate = RotationParams::theta_cap_rate(delta);
    let theta = cap_small.min(cap_rate);
    let lnln_n = std::f64::consts::FRAC_PI_2 / theta + d_cap.ln().ln();
    let log10_n = lnln_n.exp() / std::f64::consts::LN_10;
    Ok(AnalyzeReport {
        delta,
        d_cap,
        b_const,
        theta_cap_smallness: cap_small,
        theta_cap_rate: cap_rate,
        theta,
        log10_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::norm;

    #[test]
    fn alpha_step_degenerate_cases() {
        let (a, p) = alpha_step(0.3, 0.5, 0.0).unwrap();
        assert_eq!(a, 1.0);
        assert_eq!(p, 0.3);

        let (a, p) = alpha_step(0.4, 0.4, 0.2).unwrap();
        assert_eq!(a, 1.0);
        assert_eq!(p, 0.4);
    }

    #[test]
    fn alpha_step_matches_direct_2x2_arithmetic() {
        // Independent oracle: v = (c^2 + (1-eps) s^2, eps s c) for phi = 0.
        let (eps, rho) = (0.1f64, 0.2f64);
        let (c, s) = (rho.cos(), rho.sin());
        let vx = c * c + (1.0 - eps) * s * s;
        let vy = eps * s * c;
        let oracle_alpha = (vx * vx + vy * vy).sqrt();
        let oracle_phi = (vy / vx).atan();

        let (alpha, phi) = alpha_step(0.0, rho, eps).unwrap();
        assert!((alpha - oracle_alpha).abs() < 1e-14);
        assert!((phi - oracle_phi).abs() < 1e-14);
        assert!((alpha - 0.996243).abs() < 1e-6);
        assert!((phi - 0.019546).abs() < 1e-5);
    }

    #[test]
    fn alpha_step_bounds_hold_across_the_domain() {
        for eps in [0.01, 0.1, 0.3, 0.5] {
            for theta in [1e-4, 0.05, 0.3, 0.8, FRAC_PI_3] {
                let (alpha, phi) = alpha_step(0.0, theta, eps).unwrap();
                assert!(alpha >= 1.0 - eps * theta * theta - 1e-12);
                assert!((phi - eps * theta).abs() <= 10.0 * eps * theta * theta * theta + 1e-12);
            }
        }
    }

    #[test]
    fn alpha_step_rejects_bad_inputs() {
        assert!(alpha_step(0.0, 0.1, 0.6).is_err());
        assert!(alpha_step(0.0, 1.2, 0.1).is_err());
        assert!(alpha_step(0.2, 0.1, 0.1).is_err());
    }

    #[test]
    fn beta_min_aligned_frames_give_one() {
        let b = beta_min(0.0, 0.1, 0.15).unwrap();
        assert!((b - 1.0).abs() < 1e-14);
    }

    #[test]
    fn beta_min_matches_eigen_oracle_and_stays_in_range() {
        let (eps, kappa, phi) = (0.1, 0.15, 0.1);
        let b = beta_min(phi, eps, kappa).unwrap();
        // Oracle: assemble the conjugated matrix entrywise and use the
        // closed-form smaller eigenvalue.
        let (c, s) = (phi.cos(), phi.sin());
        let t = (1.0 - kappa).powf(-0.5);
        let m = [
            [1.0 - eps * s * s, eps * c * s * t],
            [eps * c * s * t, (1.0 - eps * c * c) * t * t],
        ];
        let tr = m[0][0] + m[1][1];
        let disc = ((m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[0][1]).sqrt();
        let oracle = (tr - disc) / 2.0;
        assert!((b - oracle).abs() < 1e-14);
        assert!((0.98..=1.0).contains(&b), "beta {b} outside [1 - 2 phi^2, 1]");
    }

    #[test]
    fn beta_min_bounds_hold_across_the_domain() {
        for eps in [1e-4, 0.01, 0.1, 0.2] {
            for kappa_gap in [2e-4, 0.05, 0.15] {
                let kappa = eps + eps * eps + kappa_gap;
                if kappa >= 0.5 {
                    continue;
                }
                for phi in [0.0, 1e-3, 0.05, 0.4, 1.0] {
                    let b = beta_min(phi, eps, kappa).unwrap();
                    assert!(b <= 1.0 + 1e-12);
                    assert!(
                        b >= 1.0 - 2.0 * phi * phi - 1e-12,
                        "beta {b} below 1 - 2 phi^2 at eps {eps}, kappa {kappa}, phi {phi}"
                    );
                }
            }
        }
    }

    #[test]
    fn beta_min_rejects_bad_inputs() {
        assert!(beta_min(0.1, 0.0, 0.2).is_err());
        assert!(beta_min(0.1, 0.2, 0.2).is_err());
        assert!(beta_min(0.1, 0.1, 0.6).is_err());
        assert!(beta_min(1.2, 0.1, 0.2).is_err());
    }

    #[test]
    fn recursion_with_zero_steps_is_empty() {
        let params = RotationParams::new(0.2, 0, 0.1).unwrap();
        let state = run_recursion(&params).unwrap();
        assert_eq!(state.phi_n(), 0.0);
        assert!(state.alphas.is_empty());
        assert!(state.betas.is_empty());
    }

    #[test]
    fn recursion_tracks_exact_index_formulas() {
        let params = RotationParams::new(0.2, 50, 0.05).unwrap();
        let state = run_recursion(&params).unwrap();
        for k in 0..50 {
            let expect_eps = 1.0 / (10.0 + (50 - k) as f64);
            assert_eq!(state.eps[k], expect_eps);
            let expect_theta = 0.05 / (10.0 + (50 - k) as f64).ln();
            assert_eq!(state.thetas[k], expect_theta);
        }
        // rho_{k+1} = phi_{k+1} + theta_{k+1}, rho_0 = theta_0, phi_0 = 0.
        assert_eq!(state.rhos[0], state.thetas[0]);
        for k in 1..50 {
            assert_eq!(state.rhos[k], state.phis[k] + state.thetas[k]);
        }
        assert!(state.bounds.alpha && state.bounds.beta && state.bounds.sums);
        assert!(state.bounds.eps_growth && state.bounds.theta_increments);
        assert!(state.bounds.rho_increments && state.bounds.beta_strong);
        // Phi is nondecreasing.
        for w in state.phis.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn tiny_theta_matches_first_order_sum() {
        let params = RotationParams::new(0.2, 200, 1e-4).unwrap();
        let state = run_recursion(&params).unwrap();
        let first_order: f64 = (0..200).map(|k| state.eps[k] * state.thetas[k]).sum();
        let rel = (state.phi_n() - first_order).abs() / first_order;
        assert!(rel < 0.05, "relative deviation {rel}");
    }

    #[test]
    fn solve_theta_reaches_target() {
        let theta = solve_theta(0.2, 400, 0.05).unwrap();
        let params = RotationParams::new(0.2, 400, theta).unwrap();
        let state = run_recursion(&params).unwrap();
        assert!((state.phi_n() - 0.05).abs() <= 1e-10);
    }

    #[test]
    fn solve_theta_rejects_degenerate_targets() {
        assert!(solve_theta(0.2, 100, 0.0).is_err());
        assert!(solve_theta(0.2, 100, 2.0).is_err());
    }

    #[test]
    fn phi_grows_with_n_at_fixed_theta() {
        let phi_at = |n: usize| {
            let params = RotationParams::new(0.2, n, 0.05).unwrap();
            run_recursion(&params).unwrap().phi_n()
        };
        assert!(phi_at(400) <= phi_at(800) + 1e-15);
    }

    #[test]
    fn single_factor_chain_is_the_unscaled_factor() {
        let params = RotationParams::new(0.2, 1, 0.01).unwrap();
        let (chain, state) = build_chain(&params, 1.0).unwrap();
        assert_eq!(chain.len(), 1);
        // beta_0 = 1: the only term is P_eta0 + (1 - eps_0) P_eta0^perp.
        let expect = rotation_factor(state.rhos[0], state.eps[0]);
        assert!(chain.terms()[0].max_abs_diff(&expect) < 1e-15);
        // Product = alpha_1 * xi_1.
        let v = evaluate_product(&chain);
        assert!((norm(&v) - state.alphas[0]).abs() < 1e-14);
    }

    #[test]
    fn chain_verifies_and_product_matches_scalars() {
        let theta = solve_theta(0.21, 300, 0.04).unwrap();
        let params = RotationParams::new(0.21, 300, theta).unwrap();
        let (chain, state) = build_chain(&params, 0.9).unwrap();
        assert!(verify_chain(&chain, 1e-9).unwrap().accepted);

        let v = evaluate_product(&chain);
        let r = state.alpha_product() * state.beta_weighted_product() * 0.9;
        let expect = [r * state.phi_n().cos(), r * state.phi_n().sin()];
        let rel = crate::matrix::dist(&v, &expect) / r;
        assert!(rel < 1e-8, "relative product mismatch {rel}");
        assert!(r >= state.scalar_lower_bound() * 0.9 - 1e-9);

        // Final term's smallest eigenvalue is the full beta product times
        // (1 - eps_{n-1}), scaled by lambda.
        let beta_prod: f64 = state.betas.iter().product();
        let min_eig = crate::symmat::min_eigenvalue(chain.terms().last().unwrap()).unwrap();
        let expect_eig = 0.9 * beta_prod * (1.0 - state.eps[299]);
        assert!((min_eig - expect_eig).abs() < 1e-9);
    }

    #[test]
    fn analyze_reports_astronomical_step_counts() {
        let report = analyze(0.2).unwrap();
        assert!(report.theta > 0.0);
        assert!(report.theta <= report.theta_cap_smallness);
        assert!(report.theta <= report.theta_cap_rate);
        // The implied n has hundreds of thousands of digits.
        assert!(report.log10_n > 1e4);
    }

    #[test]
    fn params_validation() {
        assert!(RotationParams::new(0.3, 10, 0.1).is_err());
        assert!(RotationParams::new(0.2, 10, -1.0).is_err());
        assert!(matches!(
            RotationParams::new(0.2, 10, 100.0),
            Err(Error::ThetaTooLarge(_))
        ));
    }
}
