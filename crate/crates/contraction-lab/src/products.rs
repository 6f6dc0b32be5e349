//! Proper reorderings, the products `S_n^sigma = T_sigma(n) ... T_sigma(1)`,
//! and per-vector convergence traces toward `P xi`.
//!
//! Properness is an infinite-tail notion; a [`ProperMap`] encodes it at
//! finite horizon as a declared kind with a provable repetition bound. When a
//! map is evaluated against a chain, indices past the materialized length
//! resolve to the last term, i.e. the chain is extended by its limit proxy
//! (still a decreasing sequence, so every convergence statement applies
//! verbatim).

use std::collections::HashMap;

use crate::diagnostics::f_k;
use crate::error::{Error, Result};
use crate::matrix::{dist, dot, norm, Matrix};
use crate::seqgen::ContractionChain;
use crate::symmat::{apply_spectral_fn, SymMatrix};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SigmaKind {
    /// `sigma(n) = n`.
    Identity,
    /// Each index repeated `B` times: `sigma(n) = ceil(n / B)`.
    BlockRepeat(usize),
    /// `stride` staggered lanes: `sigma(n) = floor((n-1)/s) + ((n-1) mod s) + 1`.
    /// Not monotone, which is the point.
    Interleave(usize),
    /// Explicit prefix, then a tail kind evaluated at the relative index
    /// `n - prefix_len`.
    Explicit {
        prefix: Vec<usize>,
        tail: Box<SigmaKind>,
    },
}

impl SigmaKind {
    fn validate(&self) -> Result<()> {
        match self {
            SigmaKind::Identity => Ok(()),
            SigmaKind::BlockRepeat(b) => {
                if *b == 0 {
                    return Err(Error::Validation("block size must be >= 1".into()));
                }
                Ok(())
            }
            SigmaKind::Interleave(s) => {
                if *s == 0 {
                    return Err(Error::Validation("stride must be >= 1".into()));
                }
                Ok(())
            }
            SigmaKind::Explicit { prefix, tail } => {
                if prefix.contains(&0) {
                    return Err(Error::Validation("prefix indices are 1-based".into()));
                }
                if matches!(**tail, SigmaKind::Explicit { .. }) {
                    return Err(Error::Validation("tail must be a plain kind".into()));
                }
                tail.validate()
            }
        }
    }

    fn eval(&self, n: usize) -> usize {
        match self {
            SigmaKind::Identity => n,
            SigmaKind::BlockRepeat(b) => (n - 1) / b + 1,
            SigmaKind::Interleave(s) => (n - 1) / s + (n - 1) % s + 1,
            SigmaKind::Explicit { prefix, tail } => {
                if n <= prefix.len() {
                    prefix[n - 1]
                } else {
                    tail.eval(n - prefix.len())
                }
            }
        }
    }

    /// Declared upper bound on preimage sizes within any horizon.
    fn repetition_bound(&self) -> usize {
        match self {
            SigmaKind::Identity => 1,
            SigmaKind::BlockRepeat(b) => *b,
            SigmaKind::Interleave(s) => *s,
            SigmaKind::Explicit { prefix, tail } => {
                let mut mult: HashMap<usize, usize> = HashMap::new();
                for &i in prefix {
                    *mult.entry(i).or_insert(0) += 1;
                }
                let prefix_max = mult.values().copied().max().unwrap_or(0);
                prefix_max + tail.repetition_bound()
            }
        }
    }

    /// First step from which every evaluated index is at least `chain_len`.
    fn tail_entry(&self, chain_len: usize) -> usize {
        match self {
            SigmaKind::Identity => chain_len,
            SigmaKind::BlockRepeat(b) => b * (chain_len - 1) + 1,
            SigmaKind::Interleave(s) => s * (chain_len - 1) + 1,
            SigmaKind::Explicit { prefix, tail } => prefix.len() + tail.tail_entry(chain_len),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SigmaKind::Identity => "identity".into(),
            SigmaKind::BlockRepeat(b) => format!("blocks:{b}"),
            SigmaKind::Interleave(s) => format!("interleave:{s}"),
            SigmaKind::Explicit { prefix, tail } => {
                format!("explicit[{}]+{}", prefix.len(), tail.describe())
            }
        }
    }
}

/// Finite-horizon description of a proper self-map of the positive integers.
#[derive(Debug, Clone)]
pub struct ProperMap {
    kind: SigmaKind,
    horizon: usize,
}

impl ProperMap {
    pub fn new(kind: SigmaKind, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Validation("horizon must be >= 1".into()));
        }
        kind.validate()?;
        Ok(ProperMap { kind, horizon })
    }

    pub fn identity(horizon: usize) -> Self {
        ProperMap::new(SigmaKind::Identity, horizon).expect("identity is valid")
    }

    pub fn blocks(b: usize, horizon: usize) -> Result<Self> {
        ProperMap::new(SigmaKind::BlockRepeat(b), horizon)
    }

    pub fn interleave(s: usize, horizon: usize) -> Result<Self> {
        ProperMap::new(SigmaKind::Interleave(s), horizon)
    }

    /// Parses `identity`, `blocks:B`, or `interleave:S`.
    pub fn parse(spec: &str, horizon: usize) -> Result<Self> {
        let kind = parse_kind(spec)?;
        ProperMap::new(kind, horizon)
    }

    pub fn kind(&self) -> &SigmaKind {
        &self.kind
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        ProperMap::new(self.kind.clone(), horizon)
    }

    /// `sigma(n)` for `1 <= n <= horizon`.
    pub fn eval(&self, n: usize) -> Result<usize> {
        if n == 0 || n > self.horizon {
            return Err(Error::Range(format!(
                "sigma argument {n} outside 1..={}",
                self.horizon
            )));
        }
        Ok(self.kind.eval(n))
    }

    pub fn repetition_bound(&self) -> usize {
        self.kind.repetition_bound()
    }

    /// First step from which the evaluated index, clamped to `chain_len`,
    /// stays equal to `chain_len` forever.
    pub fn tail_entry(&self, chain_len: usize) -> usize {
        self.kind.tail_entry(chain_len.max(1))
    }

    pub fn describe(&self) -> String {
        self.kind.describe()
    }
}

pub fn parse_kind(spec: &str) -> Result<SigmaKind> {
    if spec == "identity" {
        return Ok(SigmaKind::Identity);
    }
    if let Some(rest) = spec.strip_prefix("blocks:") {
        let b: usize = rest
            .parse()
            .map_err(|_| Error::Validation(format!("bad block size '{rest}'")))?;
        return Ok(SigmaKind::BlockRepeat(b));
    }
    if let Some(rest) = spec.strip_prefix("interleave:") {
        let s: usize = rest
            .parse()
            .map_err(|_| Error::Validation(format!("bad stride '{rest}'")))?;
        return Ok(SigmaKind::Interleave(s));
    }
    Err(Error::Validation(format!(
        "unknown sigma kind '{spec}' (expected identity | blocks:B | interleave:S)"
    )))
}

/// `sigma(n)` under the map's own horizon.
pub fn sigma_eval(map: &ProperMap, n: usize) -> Result<usize> {
    map.eval(n)
}

/// `T_sigma(n) ... T_sigma(1)` by left multiplication. Strict about indices:
/// every evaluated index must lie within the materialized chain.
pub fn product_prefix(chain: &ContractionChain, map: &ProperMap, n: usize) -> Result<Matrix> {
    let mut s = Matrix::identity(chain.dim());
    for step in 1..=n {
        let idx = map.eval(step)?;
        s = chain.term(idx)?.as_matrix().mul(&s);
    }
    Ok(s)
}

/// Like [`product_prefix`], but with the eventually-constant tail: indices
/// past the chain length use the limit proxy.
pub fn product_prefix_clamped(
    chain: &ContractionChain,
    map: &ProperMap,
    n: usize,
) -> Result<Matrix> {
    let mut s = Matrix::identity(chain.dim());
    for step in 1..=n {
        let idx = map.eval(step)?;
        s = chain.term_clamped(idx).as_matrix().mul(&s);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Stop when `dist_to_p` drops below the threshold.
    Dist,
    /// Stop when both `dist_to_p` and `adjoint_dist` drop below it.
    DistAndAdjoint,
}

#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub horizon: usize,
    /// Order of the `f_k` functional recorded along the trace.
    pub k: u32,
    /// Early-stop threshold; `None` runs to the horizon.
    pub stop_below: Option<f64>,
    pub stop_on: StopRule,
    /// Retain every iterate (needed by [`stability_check`]).
    pub retain_vectors: bool,
}

impl TraceOptions {
    pub fn new(horizon: usize, k: u32) -> Self {
        TraceOptions {
            horizon,
            k,
            stop_below: None,
            stop_on: StopRule::Dist,
            retain_vectors: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TraceStep {
    pub n: usize,
    /// Effective chain index used at this step (0 for the initial row).
    pub sigma_index: usize,
    pub xi_norm: f64,
    pub dist_to_p: f64,
    /// `|(S_n^sigma)^T xi - P xi|`.
    pub adjoint_dist: f64,
    /// `<f_k(T_sigma(n)) xi_n, xi_n>`.
    pub f_functional: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub steps: Vec<TraceStep>,
    pub k: u32,
    pub sigma_desc: String,
    pub chain_generator: String,
    /// The input vector.
    pub xi: Vec<f64>,
    /// The target vector `P xi`.
    pub p_xi: Vec<f64>,
    /// Iterates `xi_0, xi_1, ...` when retention was requested.
    pub retained: Option<Vec<Vec<f64>>>,
}

impl ConvergenceTrace {
    pub fn final_step(&self) -> &TraceStep {
        self.steps.last().expect("trace records at least step 0")
    }

    /// First step index at which `dist_to_p` is at or below `threshold`.
    pub fn steps_to_threshold(&self, threshold: f64) -> Option<usize> {
        self.steps
            .iter()
            .find(|s| s.dist_to_p <= threshold)
            .map(|s| s.n)
    }
}

/// Runs `xi_{n+1} = T_sigma(n+1) xi_n` and records norms, distances to
/// `P xi`, the adjoint distance, and the `f_k` functional per step.
///
/// The vector path never materializes `S_n`; the adjoint distance uses the
/// transpose product applied to `xi`, maintained as a matrix only until the
/// map enters its constant tail and incrementally afterwards.
pub fn trace_convergence(
    chain: &ContractionChain,
    map: &ProperMap,
    xi: &[f64],
    horizon: usize,
    k: u32,
) -> Result<ConvergenceTrace> {
    trace_convergence_opts(chain, map, xi, &TraceOptions::new(horizon, k))
}

pub fn trace_convergence_opts(
    chain: &ContractionChain,
    map: &ProperMap,
    xi: &[f64],
    opts: &TraceOptions,
) -> Result<ConvergenceTrace> {
    let d = chain.dim();
    if xi.len() != d {
        return Err(Error::Shape(format!(
            "trace: vector dim {} vs chain dim {d}",
            xi.len()
        )));
    }
    if xi.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("trace: vector entries must be finite".into()));
    }
    if opts.horizon > map.horizon() {
        return Err(Error::Range(format!(
            "trace horizon {} exceeds sigma horizon {}",
            opts.horizon,
            map.horizon()
        )));
    }
    if opts.k < 1 {
        return Err(Error::Validation("f_k order must be >= 1".into()));
    }

    let len = chain.len();
    let tail_entry = map.tail_entry(len);
    let p_xi = chain.proj_p().matvec(xi);

    // f_k(T_index) cache; kinds revisit at most a few indices at a time.
    let mut fk_cache: HashMap<usize, SymMatrix> = HashMap::new();
    let k_order = opts.k;
    let mut fk_functional = |idx: usize, v: &[f64]| -> Result<f64> {
        if !fk_cache.contains_key(&idx) {
            if fk_cache.len() > 16 {
                fk_cache.clear();
            }
            let m = apply_spectral_fn(chain.term_clamped(idx), |t| {
                f_k(t, k_order).expect("clamped argument is in [0, 1]")
            })?;
            fk_cache.insert(idx, m);
        }
        Ok(dot(&fk_cache[&idx].matvec(v), v))
    };

    let mut v = xi.to_vec();
    let mut retained = opts.retain_vectors.then(|| vec![v.clone()]);

    // Adjoint state: full matrix product before the tail, then
    // S_n^T xi = M^T (T_proxy^(n - n0) xi) with M frozen at the tail entry.
    let mut product: Option<Matrix> = Some(Matrix::identity(d));
    let mut frozen_t: Option<Matrix> = None;
    let mut omega: Vec<f64> = xi.to_vec();

    let first_idx = if opts.horizon >= 1 {
        map.eval(1)?.min(len)
    } else {
        1
    };
    let f0 = fk_functional(first_idx, &v)?;
    let mut steps = vec![TraceStep {
        n: 0,
        sigma_index: 0,
        xi_norm: norm(&v),
        dist_to_p: dist(&v, &p_xi),
        adjoint_dist: dist(&v, &p_xi),
        f_functional: f0,
    }];

    let stop_reached = |step: &TraceStep, opts: &TraceOptions| -> bool {
        match opts.stop_below {
            None => false,
            Some(thr) => match opts.stop_on {
                StopRule::Dist => step.dist_to_p <= thr,
                StopRule::DistAndAdjoint => step.dist_to_p <= thr && step.adjoint_dist <= thr,
            },
        }
    };
    if stop_reached(&steps[0], opts) {
        return Ok(ConvergenceTrace {
            steps,
            k: opts.k,
            sigma_desc: map.describe(),
            chain_generator: chain.meta().generator.clone(),
            xi: xi.to_vec(),
            p_xi,
            retained,
        });
    }

    for n in 1..=opts.horizon {
        let idx = map.eval(n)?.min(len);
        let term = chain.term_clamped(idx);
        let prev_norm = norm(&v);
        v = term.matvec(&v);
        let xi_norm = norm(&v);
        debug_assert!(xi_norm <= prev_norm + 1e-12, "contractivity violated");

        let adjoint_vec = if let Some(s) = product.as_mut() {
            *s = term.as_matrix().mul(s);
            let a = s.vecmat(xi);
            if n >= tail_entry {
                frozen_t = Some(s.transpose());
                omega = xi.to_vec();
                product = None;
            }
            a
        } else {
            omega = chain.limit_proxy().matvec(&omega);
            frozen_t.as_ref().expect("frozen after tail entry").matvec(&omega)
        };

        let f_val = fk_functional(idx, &v)?;
        let step = TraceStep {
            n,
            sigma_index: idx,
            xi_norm,
            dist_to_p: dist(&v, &p_xi),
            adjoint_dist: dist(&adjoint_vec, &p_xi),
            f_functional: f_val,
        };
        if let Some(r) = retained.as_mut() {
            r.push(v.clone());
        }
        let done = stop_reached(&step, opts);
        steps.push(step);
        if done {
            break;
        }
    }

    Ok(ConvergenceTrace {
        steps,
        k: opts.k,
        sigma_desc: map.describe(),
        chain_generator: chain.meta().generator.clone(),
        xi: xi.to_vec(),
        p_xi,
        retained,
    })
}

/// `max_n |xi_{n+k} - xi_n|` over the last quarter of a retained trace.
pub fn stability_check(trace: &ConvergenceTrace, k_shift: usize) -> Result<f64> {
    let retained = trace
        .retained
        .as_ref()
        .ok_or_else(|| Error::MissingData("trace was recorded without retained vectors".into()))?;
    let last = retained.len() - 1;
    if k_shift == 0 || k_shift > last {
        return Err(Error::Validation(format!(
            "shift must be in 1..={last}"
        )));
    }
    let start = (3 * last) / 4;
    let start = start.min(last - k_shift);
    let mut worst = 0.0f64;
    for n in start..=(last - k_shift) {
        worst = worst.max(dist(&retained[n + k_shift], &retained[n]));
    }
    Ok(worst)
}
