//! Generators for decreasing sequences of positive contractions, chain
//! verification, and factorization of a chain into elementary contractions.
//!
//! A chain is finite; diagnostics that reference the limit use the last term
//! as its proxy. Indices past the materialized length are interpreted as the
//! proxy repeated forever, which keeps the extended sequence decreasing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagnostics::gap_of;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::symmat::{
    apply_spectral_fn, contraction_from_pair, loewner_witness, min_eigenvalue, max_eigenvalue,
    operator_norm, spectral_projection_top, SymMatrix,
};

/// Materialized-length caps; generation beyond these is refused to bound memory.
const MAX_TERMS_DIM_LE_8: usize = 100_000;
const MAX_TERMS_DIM_LE_100: usize = 1_000;
const MAX_GENERATOR_DIM: usize = 100;

/// Cluster tolerance for "eigenvalue equals 1" when the spectral projection
/// of the limit proxy is formed.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

/// Default Loewner tolerance for chain verification.
pub const DEFAULT_CHAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainMeta {
    pub generator: String,
    pub seed: u64,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl ChainMeta {
    pub fn new(generator: &str, seed: u64) -> Self {
        ChainMeta {
            generator: generator.to_string(),
            seed,
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

/// A finite decreasing list `T_1 >= T_2 >= ...` of positive contractions,
/// its limit proxy (the last term), and the spectral projection `P` of the
/// proxy at eigenvalue 1.
///
/// Construction only checks shapes; use [`verify_chain`] for the order
/// verdict. All shipped generators verify their own output.
#[derive(Debug, Clone)]
pub struct ContractionChain {
    dim: usize,
    terms: Vec<SymMatrix>,
    limit_proxy: SymMatrix,
    proj_p: SymMatrix,
    meta: ChainMeta,
}

impl ContractionChain {
    pub fn from_terms(terms: Vec<SymMatrix>, meta: ChainMeta) -> Result<Self> {
        Self::from_terms_with_cluster_tol(terms, meta, DEFAULT_CLUSTER_TOL)
    }

    pub fn from_terms_with_cluster_tol(
        terms: Vec<SymMatrix>,
        meta: ChainMeta,
        cluster_tol: f64,
    ) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Validation("chain needs at least one term".into()))?;
        let dim = first.dim();
        if terms.iter().any(|t| t.dim() != dim) {
            return Err(Error::Shape("chain terms must share one dimension".into()));
        }
        let limit_proxy = terms.last().expect("nonempty").clone();
        let proj_p = spectral_projection_top(&limit_proxy, cluster_tol)?;
        Ok(ContractionChain {
            dim,
            terms,
            limit_proxy,
            proj_p,
            meta,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[SymMatrix] {
        &self.terms
    }

    /// 1-based term access; out of range is an error.
    pub fn term(&self, index: usize) -> Result<&SymMatrix> {
        if index == 0 || index > self.terms.len() {
            return Err(Error::Range(format!(
                "term index {index} outside 1..={}",
                self.terms.len()
            )));
        }
        Ok(&self.terms[index - 1])
    }

    /// 1-based term access with the eventually-constant tail: indices past
    /// the materialized length resolve to the limit proxy.
    pub fn term_clamped(&self, index: usize) -> &SymMatrix {
        let i = index.clamp(1, self.terms.len());
        &self.terms[i - 1]
    }

    pub fn limit_proxy(&self) -> &SymMatrix {
        &self.limit_proxy
    }

    /// Spectral projection of the limit proxy at the eigenvalue-1 cluster.
    pub fn proj_p(&self) -> &SymMatrix {
        &self.proj_p
    }

    pub fn meta(&self) -> &ChainMeta {
        &self.meta
    }
}

/// Verification verdict with witness values, not just booleans.
#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub accepted: bool,
    pub tol: f64,
    /// Largest eigenvalue of the first term; must not exceed `1 + tol`.
    pub t1_max_eig: f64,
    /// Smallest eigenvalue of `T_k - T_{k+1}` per step.
    pub step_witnesses: Vec<f64>,
    /// Smallest eigenvalue of each term.
    pub term_min_eigs: Vec<f64>,
    /// Spectral gap of the limit proxy below the eigenvalue-1 cluster.
    pub proxy_gap: f64,
    /// Worst max-abs commutator entry between `P` and any term.
    pub proj_commute_max: f64,
}

/// Checks `I >= T_1 >= T_2 >= ... >= 0` within `tol`. The verdict is data;
/// only eigensolver breakdown is an error.
pub fn verify_chain(chain: &ContractionChain, tol: f64) -> Result<ChainReport> {
    let t1_max_eig = max_eigenvalue(&chain.terms[0])?;
    let mut step_witnesses = Vec::with_capacity(chain.len().saturating_sub(1));
    for pair in chain.terms.windows(2) {
        step_witnesses.push(loewner_witness(&pair[1], &pair[0])?);
    }
    let mut term_min_eigs = Vec::with_capacity(chain.len());
    for t in &chain.terms {
        term_min_eigs.push(min_eigenvalue(t)?);
    }
    let p = chain.proj_p().as_matrix();
    let mut proj_commute_max = 0.0f64;
    for t in &chain.terms {
        let tp = t.as_matrix().mul(p);
        let pt = p.mul(t.as_matrix());
        proj_commute_max = proj_commute_max.max(tp.max_abs_diff(&pt));
    }
    let accepted = t1_max_eig <= 1.0 + tol
        && step_witnesses.iter().all(|&w| w >= -tol)
        && term_min_eigs.iter().all(|&w| w >= -tol);
    Ok(ChainReport {
        accepted,
        tol,
        t1_max_eig,
        step_witnesses,
        term_min_eigs,
        proxy_gap: gap_of(chain.limit_proxy(), DEFAULT_CLUSTER_TOL)?,
        proj_commute_max,
    })
}

fn check_generator_size(dim: usize, n: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::Validation("dimension must be >= 1".into()));
    }
    if n == 0 {
        return Err(Error::Validation("chain length must be >= 1".into()));
    }
    let cap = if dim <= 8 {
        MAX_TERMS_DIM_LE_8
    } else if dim <= MAX_GENERATOR_DIM {
        MAX_TERMS_DIM_LE_100
    } else {
        return Err(Error::Validation(format!(
            "generator dimension {dim} exceeds the cap {MAX_GENERATOR_DIM}"
        )));
    };
    if n > cap {
        return Err(Error::Validation(format!(
            "chain length {n} exceeds the cap {cap} for dimension {dim}"
        )));
    }
    Ok(())
}

/// Shared postcondition for every generator: the output must verify.
fn finish_generator(terms: Vec<SymMatrix>, meta: ChainMeta) -> Result<ContractionChain> {
    let chain = ContractionChain::from_terms(terms, meta)?;
    let report = verify_chain(&chain, DEFAULT_CHAIN_TOL)?;
    if !report.accepted {
        return Err(Error::Construction(format!(
            "generator '{}' produced a rejected chain (t1 max eig {}, worst step witness {:?})",
            chain.meta.generator,
            report.t1_max_eig,
            report
                .step_witnesses
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
        )));
    }
    if report.proj_commute_max > 1e-7 {
        return Err(Error::Construction(format!(
            "generator '{}' broke the P-commutation invariant ({})",
            chain.meta.generator, report.proj_commute_max
        )));
    }
    Ok(chain)
}

/// The constant sequence `T, T, ..., T`.
pub fn gen_constant(t: &SymMatrix, n: usize) -> Result<ContractionChain> {
    check_generator_size(t.dim(), n)?;
    let w_lo = min_eigenvalue(t)?;
    let w_hi = max_eigenvalue(t)?;
    if w_lo < -DEFAULT_CHAIN_TOL || w_hi > 1.0 + DEFAULT_CHAIN_TOL {
        return Err(Error::Order(format!(
            "constant generator needs 0 <= T <= I, got spectrum [{w_lo}, {w_hi}]"
        )));
    }
    let meta = ChainMeta::new("constant", 0).with("len", n as u64);
    finish_generator(vec![t.clone(); n], meta)
}

/// Decreasing orthogonal projections with the given nonincreasing ranks,
/// built by shrinking one seeded orthonormal frame.
pub fn projection_chain_with_ranks(
    dim: usize,
    ranks: &[usize],
    seed: u64,
) -> Result<ContractionChain> {
    check_generator_size(dim, ranks.len().max(1))?;
    if ranks.is_empty() {
        return Err(Error::Validation("need at least one rank".into()));
    }
    if ranks.iter().any(|&r| r > dim) {
        return Err(Error::Validation("rank exceeds dimension".into()));
    }
    if ranks.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Validation("ranks must be nonincreasing".into()));
    }
    let mut rng = Rng::new(seed);
    let q = rng.orthogonal(dim);
    let terms: Vec<SymMatrix> = ranks
        .iter()
        .map(|&r| {
            let values: Vec<f64> = (0..dim).map(|i| if i < r { 1.0 } else { 0.0 }).collect();
            SymMatrix::conjugated_diag(&q, &values)
        })
        .collect();
    let meta = ChainMeta::new("projections", seed)
        .with("ranks", serde_json::json!(ranks))
        .with("len", ranks.len() as u64);
    finish_generator(terms, meta)
}

/// Decreasing orthogonal projections with seeded, randomly shrinking ranks.
pub fn gen_projection_chain(dim: usize, n: usize, seed: u64) -> Result<ContractionChain> {
    check_generator_size(dim, n)?;
    let mut rng = Rng::new(seed);
    let mut ranks = Vec::with_capacity(n);
    let mut r = dim;
    for _ in 0..n {
        ranks.push(r);
        if r > 0 && rng.uniform() < 0.35 {
            r -= 1;
        }
    }
    projection_chain_with_ranks(dim, &ranks, seed)
}

/// Commuting chain from explicit diagonals: `T_n = Q diag(D_n) Q^T` for one
/// orthogonal frame and entrywise nonincreasing diagonals in [0, 1].
pub fn chain_from_conjugated_diagonals(
    q: &Matrix,
    diagonals: &[Vec<f64>],
    meta: ChainMeta,
) -> Result<ContractionChain> {
    let dim = q.dim();
    check_generator_size(dim, diagonals.len().max(1))?;
    if diagonals.is_empty() {
        return Err(Error::Validation("need at least one diagonal".into()));
    }
    for d in diagonals {
        if d.len() != dim {
            return Err(Error::Shape("diagonal length must match the frame".into()));
        }
        if d.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Order("diagonal values must lie in [0, 1]".into()));
        }
    }
    for pair in diagonals.windows(2) {
        if pair[0].iter().zip(&pair[1]).any(|(a, b)| b > a) {
            return Err(Error::Order(
                "diagonals must be entrywise nonincreasing".into(),
            ));
        }
    }
    let terms = diagonals
        .iter()
        .map(|d| SymMatrix::conjugated_diag(q, d))
        .collect();
    finish_generator(terms, meta)
}

/// Commuting chain: one seeded orthogonal frame, entrywise nonincreasing
/// diagonals. `pinned` coordinates stay exactly 1 in every term and span `P`.
pub fn gen_commuting_diagonal(
    dim: usize,
    n: usize,
    seed: u64,
    pinned: usize,
) -> Result<ContractionChain> {
    check_generator_size(dim, n)?;
    if pinned > dim {
        return Err(Error::Validation("pinned coordinates exceed dimension".into()));
    }
    let mut rng = Rng::new(seed);
    let q = rng.orthogonal(dim);
    let mut values: Vec<f64> = (0..dim)
        .map(|i| if i < pinned { 1.0 } else { rng.uniform() })
        .collect();
    let mut terms = Vec::with_capacity(n);
    for step in 0..n {
        if step > 0 {
            for (i, v) in values.iter_mut().enumerate() {
                if i >= pinned {
                    *v *= rng.uniform_in(0.5, 1.0);
                }
            }
        }
        terms.push(SymMatrix::conjugated_diag(&q, &values));
    }
    let meta = ChainMeta::new("commuting", seed)
        .with("pinned", pinned as u64)
        .with("len", n as u64);
    finish_generator(terms, meta)
}

/// Chain with a uniform spectral gap: every term's spectrum lies in
/// `[0, 1 - delta] + {1}`, with nested, shrinking eigenvalue-1 spaces.
///
/// Half the coordinates carry exact 1s that drop at seeded steps; the other
/// half carries a noncommuting decreasing block scaled into `[0, 1 - delta]`.
pub fn gen_gap_chain(dim: usize, n: usize, delta: f64, seed: u64) -> Result<ContractionChain> {
    check_generator_size(dim, n)?;
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::Validation(format!("delta {delta} outside (0, 1)")));
    }
    let mut rng = Rng::new(seed);
    let q = rng.orthogonal(dim);

    let pinned_block = dim - dim / 2;
    // Drop step per pinned coordinate; usize::MAX means never.
    let drops: Vec<usize> = (0..pinned_block)
        .map(|_| {
            if rng.uniform() < 0.4 {
                usize::MAX
            } else {
                1 + rng.below(n)
            }
        })
        .collect();
    let landing: Vec<f64> = (0..pinned_block)
        .map(|_| (1.0 - delta) * rng.uniform())
        .collect();

    let free_block = dim - pinned_block;
    let mut y = Matrix::identity(free_block.max(1));

    let mut pinned_values: Vec<f64> = vec![1.0; pinned_block];
    let mut terms = Vec::with_capacity(n);
    for step in 1..=n {
        for j in 0..pinned_block {
            if drops[j] != usize::MAX {
                if step == drops[j] + 1 {
                    pinned_values[j] = landing[j];
                } else if step > drops[j] + 1 {
                    pinned_values[j] *= rng.uniform_in(0.6, 1.0);
                }
            }
        }
        let mut pre = Matrix::zero(dim);
        for (j, &v) in pinned_values.iter().enumerate() {
            pre.set(j, j, v);
        }
        if free_block > 0 {
            let raw = rng.normal_matrix(free_block);
            let x = raw.scale(1.0 / operator_norm(&raw));
            y = x.mul(&y);
            let block = y.transpose().mul(&y).scale(1.0 - delta);
            for a in 0..free_block {
                for b in 0..free_block {
                    pre.set(pinned_block + a, pinned_block + b, block.get(a, b));
                }
            }
        }
        let sym = SymMatrix::symmetrize(&q.mul(&pre).mul(&q.transpose()));
        terms.push(sym);
    }
    let meta = ChainMeta::new("gap", seed)
        .with("delta", delta)
        .with("len", n as u64);
    finish_generator(terms, meta)
}

/// `T_n = y_n^T y_n` for `y_n = x_n ... x_1` with seeded random contractions
/// `x_n` of operator norm 1. With `fix_common_vector`, every `x_n` fixes one
/// shared seeded unit vector, so `P` is nonzero by construction.
pub fn gen_random_decreasing(
    dim: usize,
    n: usize,
    seed: u64,
    fix_common_vector: bool,
) -> Result<ContractionChain> {
    check_generator_size(dim, n)?;
    let mut rng = Rng::new(seed);
    let fixed: Option<Vec<f64>> = fix_common_vector.then(|| rng.unit_vector(dim));

    let mut y = Matrix::identity(dim);
    let mut terms = Vec::with_capacity(n);
    for _ in 0..n {
        let x = match &fixed {
            None => {
                let raw = rng.normal_matrix(dim);
                raw.scale(1.0 / operator_norm(&raw))
            }
            Some(v) => {
                // x = P_v + (I - P_v) g (I - P_v) with |g| = 1: fixes v, norm <= 1.
                let raw = rng.normal_matrix(dim);
                let g = raw.scale(1.0 / operator_norm(&raw));
                let p_v = Matrix::from_fn(dim, |i, j| v[i] * v[j]);
                let comp = Matrix::identity(dim).sub(&p_v);
                comp.mul(&g).mul(&comp).add(&p_v)
            }
        };
        y = x.mul(&y);
        terms.push(SymMatrix::symmetrize(&y.transpose().mul(&y)));
    }
    let meta = ChainMeta::new("random", seed)
        .with("fix_common_vector", fix_common_vector)
        .with("len", n as u64);
    finish_generator(terms, meta)
}

/// `T_n = y_n^T y_n` for `y_n = x_n ... x_1` with `x_n = (e_n + I)/2` for
/// seeded random orthogonal projections `e_n`. Each `x_n` is an invertible
/// positive contraction with spectrum {1/2, 1}.
pub fn gen_proj_average(dim: usize, n: usize, seed: u64) -> Result<ContractionChain> {
    check_generator_size(dim, n)?;
    let mut rng = Rng::new(seed);
    let mut y = Matrix::identity(dim);
    let mut terms = Vec::with_capacity(n);
    for _ in 0..n {
        let rank = if dim == 1 { 1 } else { 1 + rng.below(dim - 1) };
        let e = rng.projection(dim, rank);
        let x = e.as_matrix().add(&Matrix::identity(dim)).scale(0.5);
        y = x.mul(&y);
        terms.push(SymMatrix::symmetrize(&y.transpose().mul(&y)));
    }
    let meta = ChainMeta::new("proj-average", seed).with("len", n as u64);
    finish_generator(terms, meta)
}

/// Factorizes a verified chain into contractions: `x_1 = T_1^{1/2}` and
/// `x_{n+1} T_n^{1/2} = T_{n+1}^{1/2}`, so `(x_n ... x_1)^T (x_n ... x_1)`
/// rebuilds `T_n`.
pub fn factorize_chain(chain: &ContractionChain) -> Result<Vec<Matrix>> {
    let report = verify_chain(chain, DEFAULT_CHAIN_TOL)?;
    if !report.accepted {
        return Err(Error::Order(
            "factorize_chain needs a verified decreasing chain".into(),
        ));
    }
    let mut factors = Vec::with_capacity(chain.len());
    factors.push(apply_spectral_fn(&chain.terms[0], |t| t.max(0.0).sqrt())?.into_matrix());
    for pair in chain.terms.windows(2) {
        factors.push(contraction_from_pair(&pair[1], &pair[0])?);
    }
    Ok(factors)
}
