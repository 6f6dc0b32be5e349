//! Quantitative diagnostics for contraction chains: the `f_k` functional
//! family and its threshold `gamma`, scalar spectral measures, the per-step
//! energy-dissipation inequality, the convergence rate bound, spectral-gap
//! measurement, tail summability, and the norm-convergence estimate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::products::{product_prefix_clamped, ProperMap};
use crate::seqgen::ContractionChain;
use crate::symmat::{operator_norm, sym_eig, SymMatrix};

/// `f_k(t) = 1 - (1 - t)^{1/k}` on [0, 1].
///
/// Increasing in `t`, operator monotone, and pointwise nonincreasing in `k`:
/// the family decreases to the indicator of {1} (e.g. `f_1(0.75) = 0.75`
/// but `f_2(0.75) = 0.5`), which is what makes the functional
/// `<f_k(T) xi, xi>` arbitrarily small for vectors orthogonal to the
/// eigenvalue-1 space.
pub fn f_k(t: f64, k: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("f_k argument {t} outside [0, 1]")));
    }
    assert!(k >= 1, "f_k order must be >= 1");
    Ok(1.0 - (1.0 - t).powf(1.0 / f64::from(k)))
}

/// The point where `f_k` crosses 1/2: `gamma(k) = 1 - 2^{-k}`.
pub fn gamma(k: u32) -> f64 {
    assert!(k >= 1, "gamma order must be >= 1");
    1.0 - 0.5f64.powi(k as i32)
}

/// Eigenvalues within this distance of a cut point are assigned below it, so
/// interval masses are deterministic under roundoff.
const MASS_TIE_TOL: f64 = 1e-12;

/// Atomic scalar spectral measure of `(T, xi)`: weight `<q_i, xi>^2` at each
/// eigenvalue of `T`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralMass {
    /// `(eigenvalue, weight)` pairs, eigenvalues ascending.
    pub atoms: Vec<(f64, f64)>,
}

impl SpectralMass {
    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// Mass of `[0, cut)`, with ties within [`MASS_TIE_TOL`] of `cut`
    /// assigned below.
    pub fn mass_below(&self, cut: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|(t, _)| *t <= cut + MASS_TIE_TOL)
            .map(|(_, w)| w)
            .sum()
    }

    /// Mass of `[lo, hi)` under the same tie rule at both ends.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.mass_below(hi) - self.mass_below(lo)
    }

    /// `\int f dmu`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|(t, w)| f(*t) * w).sum()
    }
}

/// Scalar spectral measure of a positive contraction `T` at the vector `xi`.
pub fn spectral_mass(t: &SymMatrix, xi: &[f64]) -> Result<SpectralMass> {
    if t.dim() != xi.len() {
        return Err(Error::Shape(format!(
            "spectral_mass: matrix dim {} vs vector dim {}",
            t.dim(),
            xi.len()
        )));
    }
    let eig = sym_eig(t)?;
    let atoms = eig
        .values
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let c = dot(&eig.eigenvector(i), xi);
            (lambda, c * c)
        })
        .collect();
    Ok(SpectralMass { atoms })
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipationCheck {
    /// `(1 - gamma^2) * mu([0, gamma))`.
    pub lhs: f64,
    /// `|xi|^2 - |T xi|^2`.
    pub rhs: f64,
    pub ok: bool,
}

/// The per-step energy loss bound: applying `T` once to `xi` dissipates at
/// least `(1 - gamma^2)` times the spectral mass below `gamma`.
pub fn dissipation_check(t: &SymMatrix, xi: &[f64], k: u32) -> Result<DissipationCheck> {
    let g = gamma(k);
    let mu = spectral_mass(t, xi)?;
    let lhs = (1.0 - g * g) * mu.mass_below(g);
    let txi = t.matvec(xi);
    let rhs = dot(xi, xi) - dot(&txi, &txi);
    Ok(DissipationCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-10,
    })
}

/// Steps after which the squared norm is guaranteed at or below `eps`,
/// provided the `f_k` functional premise held at step `m`:
/// `N = m + ceil(2 (1 - gamma^2)^{-1} eps^{-1} |xi_m|^2)`.
pub fn rate_bound(m: usize, k: u32, eps: f64, xi_m_norm_sq: f64) -> usize {
    assert!(eps > 0.0, "rate_bound needs eps > 0");
    let g = gamma(k);
    m + (2.0 / (1.0 - g * g) / eps * xi_m_norm_sq).ceil() as usize
}

#[derive(Debug, Clone, Serialize)]
pub struct RateCheck {
    pub m: usize,
    pub k: u32,
    pub eps: f64,
    /// `<f_k(T_m) xi_m, xi_m>`; the premise is that this is at most `eps / 4`.
    pub premise_value: f64,
    pub premise_holds: bool,
    /// The step `N` from [`rate_bound`].
    pub bound_step: usize,
    /// `|xi_N|^2`.
    pub conclusion_value: f64,
    pub conclusion_holds: bool,
    /// Premise implies conclusion (vacuously true when the premise fails).
    pub ok: bool,
}

/// Runs the identity-ordered product on `xi` and checks that whenever the
/// `f_k` functional at step `m` is at most `eps / 4`, the squared norm at
/// step `rate_bound(...)` is at most `eps`.
///
/// Step 0 is the input vector; `xi_j = T_j ... T_1 xi`. The functional at
/// `m = 0` uses the first term.
pub fn rate_guarantee_check(
    chain: &ContractionChain,
    xi: &[f64],
    m: usize,
    k: u32,
    eps: f64,
) -> Result<RateCheck> {
    if eps <= 0.0 {
        return Err(Error::Validation("rate check needs eps > 0".into()));
    }
    if xi.len() != chain.dim() {
        return Err(Error::Shape(format!(
            "rate check: vector dim {} vs chain dim {}",
            xi.len(),
            chain.dim()
        )));
    }
    if m > chain.len() {
        return Err(Error::ChainTooShort(format!(
            "premise step {m} exceeds chain length {}",
            chain.len()
        )));
    }

    let mut v = xi.to_vec();
    for j in 1..=m {
        v = chain.term(j)?.matvec(&v);
    }
    let premise_term = chain.term(m.max(1))?;
    let fk_t = crate::symmat::apply_spectral_fn(premise_term, |t| {
        f_k(t, k).expect("clamped argument is in [0, 1]")
    })?;
    let premise_value = dot(&fk_t.matvec(&v), &v);
    let premise_holds = premise_value <= eps / 4.0;

    let bound_step = rate_bound(m, k, eps, dot(&v, &v));
    if bound_step > chain.len() {
        return Err(Error::ChainTooShort(format!(
            "rate bound needs {bound_step} terms, chain has {}",
            chain.len()
        )));
    }
    for j in (m + 1)..=bound_step {
        v = chain.term(j)?.matvec(&v);
    }
    let conclusion_value = dot(&v, &v);
    let conclusion_holds = conclusion_value <= eps + 1e-10;

    Ok(RateCheck {
        m,
        k,
        eps,
        premise_value,
        premise_holds,
        bound_step,
        conclusion_value,
        conclusion_holds,
        ok: !premise_holds || conclusion_holds,
    })
}

/// Largest `delta` such that no eigenvalue of `T` lies in
/// `(1 - delta, 1 - one_tol)`. Eigenvalues at or above `1 - one_tol` count
/// as the eigenvalue-1 cluster. Convention: if the whole spectrum sits in
/// the cluster, the gap is 1.
pub fn gap_of(t: &SymMatrix, one_tol: f64) -> Result<f64> {
    let eig = sym_eig(t)?;
    let below: Vec<f64> = eig
        .values
        .iter()
        .copied()
        .filter(|&x| x < 1.0 - one_tol)
        .collect();
    match below.last() {
        None => Ok(1.0),
        Some(&top_below) => Ok(1.0 - top_below),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SummabilityReport {
    /// Partial sums of `|T_proxy - T_n|` over the materialized chain.
    pub partial_sums: Vec<f64>,
    /// The final partial sum; a finite-horizon estimate of the full tail sum.
    pub sup_estimate: f64,
    /// The limit is a finite-horizon proxy (the last term), so this is a
    /// diagnostic, not a proof of summability.
    pub finite_horizon_proxy: bool,
}

pub fn summability_report(chain: &ContractionChain) -> SummabilityReport {
    let proxy = chain.limit_proxy();
    let mut partial_sums = Vec::with_capacity(chain.len());
    let mut acc = 0.0;
    for t in chain.terms() {
        acc += operator_norm(&proxy.sub(t).into_matrix());
        partial_sums.push(acc);
    }
    SummabilityReport {
        partial_sums,
        sup_estimate: acc,
        finite_horizon_proxy: true,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NormConvergenceReport {
    /// `|S_H - P|` at the final step `H` of the map horizon.
    pub final_norm_dist: f64,
    /// `(1 - gap)^k + (sum of |T_sigma(j) - proxy| over the last k steps) + 1e-8`.
    pub bound: f64,
    pub gap: f64,
    pub tail_sum: f64,
    pub k_power: usize,
    pub holds: bool,
}

/// Norm-convergence estimate for chains whose limit proxy has 1 isolated in
/// its spectrum: the operator distance from the full product to `P` is
/// controlled by `(1 - delta)^k` plus the norm errors of the last `k`
/// factors.
pub fn norm_convergence_check(
    chain: &ContractionChain,
    map: &ProperMap,
    k_power: usize,
) -> Result<NormConvergenceReport> {
    let gap = gap_of(chain.limit_proxy(), 1e-8)?;
    // An eigenvalue just below the cluster boundary leaves no usable gap.
    if gap <= 2e-8 {
        return Err(Error::NoGap(format!(
            "limit proxy spectrum reaches within {gap:e} of the eigenvalue-1 cluster"
        )));
    }
    let horizon = map.horizon();
    if k_power == 0 || k_power > horizon {
        return Err(Error::Validation(format!(
            "k_power must be in 1..={horizon}"
        )));
    }

    let product = product_prefix_clamped(chain, map, horizon)?;
    let p: &Matrix = chain.proj_p().as_matrix();
    let final_norm_dist = operator_norm(&product.sub(p));

    let proxy = chain.limit_proxy();
    let mut tail_sum = 0.0;
    for j in (horizon - k_power + 1)..=horizon {
        let idx = map.eval(j)?.min(chain.len());
        tail_sum += operator_norm(&chain.term(idx)?.sub(proxy).into_matrix());
    }
    let bound = (1.0 - gap).powi(k_power as i32) + tail_sum + 1e-8;
    Ok(NormConvergenceReport {
        final_norm_dist,
        bound,
        gap,
        tail_sum,
        k_power,
        holds: final_norm_dist <= bound,
    })
}
