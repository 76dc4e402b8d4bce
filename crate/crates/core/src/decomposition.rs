//! Jacobian sign-stable (JSS) decompositions and tight mixed-monotone
//! decomposition functions.
//!
//! A map `q` with Jacobian bounds `J_lo <= J(z) <= J_hi` on a box domain is
//! split as `q(z) = A z + r(z)` with `A = J_lo`, so the residual `r` has
//! Jacobian range `[0, J_hi - J_lo]` and is increasing in every argument.
//! For a sign-stable map, `q_d,i(z1, z2) = q_i(D^i z1 + (I - D^i) z2)` with
//! `D^i = diag(max(sgn(J_hi,i), 0))` is a decomposition function:
//! increasing in `z1`, decreasing in `z2`, and `q_d(z, z) = q(z)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::interval::{split_unchecked, IntervalVector};

/// Slack allowed when checking that decomposition arguments lie in the domain.
pub const DOMAIN_SLACK: f64 = 1e-9;

type EvalFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// A deterministic map `R^arity -> R^codim` defined on a box domain.
#[derive(Clone)]
pub struct VectorField {
    arity: usize,
    codim: usize,
    domain: IntervalVector,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("arity", &self.arity)
            .field("codim", &self.codim)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl VectorField {
    pub fn new<F>(codim: usize, domain: IntervalVector, eval: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            arity: domain.dim(),
            codim,
            domain,
            eval: Arc::new(eval),
        }
    }

    /// `z -> M z` on the given domain.
    pub fn linear(m: DMatrix<f64>, domain: IntervalVector) -> Self {
        let codim = m.nrows();
        Self::new(codim, domain, move |z| &m * z)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn domain(&self) -> &IntervalVector {
        &self.domain
    }

    /// Evaluates without a domain check.
    pub fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        (self.eval)(z)
    }

    pub fn eval_checked(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.require_in_domain(z)?;
        Ok(self.eval(z))
    }

    fn require_in_domain(&self, z: &DVector<f64>) -> Result<()> {
        check_dim("vector field argument", self.arity, z.len())?;
        if !self.domain.contains(z, DOMAIN_SLACK) {
            return Err(Error::InvalidInput(format!(
                "argument {:?} lies outside the domain",
                z.as_slice()
            )));
        }
        Ok(())
    }
}

/// Elementwise Jacobian bounds `lower <= J(z) <= upper` over a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBounds {
    lower: DMatrix<f64>,
    upper: DMatrix<f64>,
}

impl JacobianBounds {
    pub fn new(lower: DMatrix<f64>, upper: DMatrix<f64>) -> Result<Self> {
        check_dim("jacobian bound rows", lower.nrows(), upper.nrows())?;
        check_dim("jacobian bound cols", lower.ncols(), upper.ncols())?;
        for (idx, (l, u)) in lower.iter().zip(upper.iter()).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite jacobian bound at flat index {idx}"
                )));
            }
            if l > u {
                return Err(Error::InvalidInput(format!(
                    "jacobian lower bound {l} exceeds upper bound {u} at flat index {idx}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Bounds of a map with constant Jacobian `m`.
    pub fn exact(m: DMatrix<f64>) -> Self {
        Self {
            lower: m.clone(),
            upper: m,
        }
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DMatrix<f64> {
        &self.upper
    }

    pub fn shape(&self) -> (usize, usize) {
        self.lower.shape()
    }

    /// True if no entry's range straddles zero.
    pub fn is_sign_stable(&self) -> bool {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .all(|(l, u)| !(*l < 0.0 && *u > 0.0))
    }
}

/// Per-output-row 0/1 diagonal selectors `D^i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CornerSelector {
    rows: Vec<Vec<bool>>,
}

impl CornerSelector {
    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    /// `D^i` as a dense diagonal matrix.
    pub fn diag(&self, i: usize) -> DMatrix<f64> {
        let d = &self.rows[i];
        DMatrix::from_diagonal(&DVector::from_iterator(
            d.len(),
            d.iter().map(|&b| if b { 1.0 } else { 0.0 }),
        ))
    }

    fn mix(pattern: &[bool], z1: &DVector<f64>, z2: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(pattern.len(), |j, _| if pattern[j] { z1[j] } else { z2[j] })
    }
}

/// `q(z) = linear_part * z + residual(z)` with a sign-stable residual.
#[derive(Debug, Clone)]
pub struct JssDecomposition {
    pub linear_part: DMatrix<f64>,
    pub residual: VectorField,
    pub residual_jacobian: JacobianBounds,
    selector: CornerSelector,
}

impl JssDecomposition {
    pub fn selector(&self) -> &CornerSelector {
        &self.selector
    }

    /// `(r_d(lo, hi), r_d(hi, lo))`: lower and upper bounds of the residual on a box.
    pub fn residual_bounds(
        &self,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let lower = eval_decomposition(&self.residual, &self.selector, lo, hi)?;
        let upper = eval_decomposition(&self.residual, &self.selector, hi, lo)?;
        Ok((lower, upper))
    }

    /// Encloses `q` over `[lo, hi]` via the linear-part split plus residual corners.
    pub fn enclose(
        &self,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let (lin_lo, lin_hi) = split_unchecked(&self.linear_part).apply(lo, hi);
        let (r_lo, r_hi) = self.residual_bounds(lo, hi)?;
        Ok((lin_lo + r_lo, lin_hi + r_hi))
    }
}

/// Splits `q` into `A z + r(z)` choosing `A = J_lo` entrywise.
pub fn jss_decompose(q: &VectorField, jb: &JacobianBounds) -> Result<JssDecomposition> {
    check_dim("jacobian rows vs codim", q.codim(), jb.shape().0)?;
    check_dim("jacobian cols vs arity", q.arity(), jb.shape().1)?;
    let a = jb.lower().clone();
    let residual_jacobian = JacobianBounds::new(
        DMatrix::zeros(a.nrows(), a.ncols()),
        jb.upper() - jb.lower(),
    )?;
    let selector = build_corner_selectors(&residual_jacobian)?;
    let original = q.clone();
    let linear = a.clone();
    let residual = VectorField::new(q.codim(), q.domain().clone(), move |z| {
        original.eval(z) - &linear * z
    });
    Ok(JssDecomposition {
        linear_part: a,
        residual,
        residual_jacobian,
        selector,
    })
}

pub fn build_corner_selectors(residual_jb: &JacobianBounds) -> Result<CornerSelector> {
    if !residual_jb.is_sign_stable() {
        return Err(Error::ContractViolation(
            "residual jacobian bounds straddle zero; map is not sign-stable".into(),
        ));
    }
    let upper = residual_jb.upper();
    let rows = (0..upper.nrows())
        .map(|i| (0..upper.ncols()).map(|j| upper[(i, j)] > 0.0).collect())
        .collect();
    Ok(CornerSelector { rows })
}

/// `q_d(z1, z2)` row by row; rows sharing a selector pattern share one evaluation.
pub fn eval_decomposition(
    q: &VectorField,
    sel: &CornerSelector,
    z1: &DVector<f64>,
    z2: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim("selector rows vs codim", q.codim(), sel.rows.len())?;
    q.require_in_domain(z1)?;
    q.require_in_domain(z2)?;
    let mut out = DVector::zeros(q.codim());
    let mut cache: Vec<(&[bool], DVector<f64>)> = Vec::new();
    for (i, pattern) in sel.rows.iter().enumerate() {
        let hit = cache.iter().position(|(p, _)| *p == pattern.as_slice());
        let idx = match hit {
            Some(idx) => idx,
            None => {
                let value = q.eval(&CornerSelector::mix(pattern, z1, z2));
                cache.push((pattern.as_slice(), value));
                cache.len() - 1
            }
        };
        out[i] = cache[idx].1[i];
    }
    Ok(out)
}

/// `F_q = J_hi^+ + J_lo^-`, which bounds the decomposition spread by `F_q (hi - lo)`.
pub fn jacobian_spread(jb: &JacobianBounds) -> DMatrix<f64> {
    let upper = split_unchecked(jb.upper());
    let lower = split_unchecked(jb.lower());
    upper.positive + lower.negative
}

/// Central finite-difference Jacobian; the stencil is pulled inside the domain.
pub fn finite_difference_jacobian(q: &VectorField, z: &DVector<f64>) -> DMatrix<f64> {
    let domain = q.domain();
    let mut jac = DMatrix::zeros(q.codim(), q.arity());
    for j in 0..q.arity() {
        let width = domain.upper()[j] - domain.lower()[j];
        let h = 1e-5 * if width > 0.0 { width } else { 1.0 };
        let (mut plus, mut minus) = (z.clone(), z.clone());
        plus[j] = if width > 0.0 {
            (z[j] + h).min(domain.upper()[j])
        } else {
            z[j] + h
        };
        minus[j] = if width > 0.0 {
            (z[j] - h).max(domain.lower()[j])
        } else {
            z[j] - h
        };
        let step = plus[j] - minus[j];
        let column = (q.eval(&plus) - q.eval(&minus)) / step;
        jac.set_column(j, &column);
    }
    jac
}

/// Result of a sampled finite-difference audit.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianAudit {
    pub samples: usize,
    pub violations: usize,
    pub worst_excess: f64,
}

impl JacobianAudit {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn sample_in(domain: &IntervalVector, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(domain.dim(), |i, _| {
        let (lo, hi) = (domain.lower()[i], domain.upper()[i]);
        if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        }
    })
}

/// Spot-checks that sampled finite-difference Jacobians respect `jb` within `tol`.
pub fn audit_jacobian_bounds(
    q: &VectorField,
    jb: &JacobianBounds,
    samples: usize,
    seed: u64,
    tol: f64,
) -> JacobianAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst_excess = 0.0f64;
    for _ in 0..samples {
        let z = sample_in(q.domain(), &mut rng);
        let jac = finite_difference_jacobian(q, &z);
        let mut bad = false;
        for ((v, lo), hi) in jac.iter().zip(jb.lower().iter()).zip(jb.upper().iter()) {
            let excess = (lo - v).max(v - hi);
            worst_excess = worst_excess.max(excess);
            bad |= excess > tol;
        }
        violations += bad as usize;
    }
    JacobianAudit {
        samples,
        violations,
        worst_excess,
    }
}

/// Checks that the residual's sampled Jacobian keeps the sign its bounds promise.
pub fn audit_sign_stability(
    decomp: &JssDecomposition,
    samples: usize,
    seed: u64,
    tol: f64,
) -> JacobianAudit {
    audit_jacobian_bounds(
        &decomp.residual,
        &decomp.residual_jacobian,
        samples,
        seed,
        tol,
    )
}

/// Largest `|A z + r_d(z, z) - q(z)|` over sampled points of the domain.
pub fn audit_diagonal_identity(
    decomp: &JssDecomposition,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let z = sample_in(decomp.residual.domain(), &mut rng);
        let q = &decomp.linear_part * &z + decomp.residual.eval(&z);
        let qd = &decomp.linear_part * &z
            + eval_decomposition(&decomp.residual, &decomp.selector, &z, &z)?;
        worst = worst.max((q - qd).amax());
    }
    Ok(worst)
}
