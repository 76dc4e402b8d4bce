//! H-infinity gain synthesis for the framer recursion.
//!
//! Decision variables are `Q` (diagonal, positive), the nonnegative splits
//! `Lp, Ln` of `L~ = QL`, the splits of `L~C` and `L~V`, and the scalars
//! `alpha, eps, gamma`. The two LMI blocks are
//!
//! ```text
//! [ I-Q   *     *     *      ]          [ -gamma I  *     *  ]
//! [ I    -aI    *     *      ]  < 0     [ Om       -Q/2   *  ]  < 0
//! [ G     0    -Q/2   *      ]          [ Om        0    -I  ]
//! [ 0     0     Q     Q-2eI  ]
//!
//! G  = Q A^ + Lc_p + Lc_n + (Lp + Ln) F_psi
//! Om = [ Q|W^|, Lv_p + Lv_n, Q B^ ]
//! ```
//!
//! with `A^ = [|A| + F_phi; 0 I_p]` and `B^ = [0; I_p]`. The coupling
//! equalities are eliminated by treating `Lc_n = Lc_p - L~C` and
//! `Lv_n = Lv_p - L~V` as derived quantities constrained to be nonnegative.

pub mod ipm;
pub mod sdpa;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use ipm::{IpmOptions, IpmSolver};
pub use sdpa::{parse_solution_vector, SdpProblem, SdpaEntry};

use crate::decomposition::jacobian_spread;
use crate::error::{check_dim, Error, Result};
use crate::interval::{abs_matrix, split_unchecked};
use crate::observer::PlantModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub status: SolverStatus,
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub message: String,
}

/// Anything that solves an SDPA-form problem. Results are never trusted:
/// every returned point is re-verified.
pub trait ConicBackend {
    fn name(&self) -> &str;
    fn solve(&self, problem: &SdpProblem) -> Result<SolverOutcome>;
}

/// Replays a primal vector produced by an external solver.
#[derive(Debug, Clone)]
pub struct ExternalSolution {
    pub x: Vec<f64>,
}

impl ConicBackend for ExternalSolution {
    fn name(&self) -> &str {
        "external"
    }

    fn solve(&self, problem: &SdpProblem) -> Result<SolverOutcome> {
        check_dim("external solution", problem.num_vars(), self.x.len())?;
        let objective = problem.c.iter().zip(&self.x).map(|(c, x)| c * x).sum();
        Ok(SolverOutcome {
            status: SolverStatus::Optimal,
            x: Some(self.x.clone()),
            objective,
            iterations: 0,
            message: "imported".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthesisDims {
    pub n: usize,
    pub p: usize,
    pub l: usize,
    pub n_z: usize,
    pub n_w: usize,
    pub n_v: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisInput {
    pub a_abs_plus_fphi: DMatrix<f64>,
    pub f_psi: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub w_hat_abs: DMatrix<f64>,
    pub kappa_h: Vec<f64>,
    dims: SynthesisDims,
}

impl SynthesisInput {
    pub fn new(
        a_abs_plus_fphi: DMatrix<f64>,
        f_psi: DMatrix<f64>,
        c: DMatrix<f64>,
        v: DMatrix<f64>,
        w_hat_abs: DMatrix<f64>,
        kappa_h: Vec<f64>,
    ) -> Result<Self> {
        let n_z = a_abs_plus_fphi.ncols();
        let n = a_abs_plus_fphi.nrows();
        if n > n_z {
            return Err(Error::InvalidInput(format!(
                "|A| + F_phi is {n}x{n_z}; needs n <= n_z"
            )));
        }
        let p = n_z - n;
        let l = c.nrows();
        check_dim("C cols", n_z, c.ncols())?;
        check_dim("F_psi rows", l, f_psi.nrows())?;
        check_dim("F_psi cols", n_z, f_psi.ncols())?;
        check_dim("V rows", l, v.nrows())?;
        check_dim("|W^| rows", n_z, w_hat_abs.nrows())?;
        check_dim("kappa_h", p, kappa_h.len())?;
        let all = [&a_abs_plus_fphi, &f_psi, &c, &v, &w_hat_abs];
        if all.iter().any(|m| m.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidInput("synthesis data must be finite".into()));
        }
        if [&a_abs_plus_fphi, &f_psi, &w_hat_abs]
            .iter()
            .any(|m| m.iter().any(|&x| x < 0.0))
        {
            return Err(Error::InvalidInput(
                "|A| + F_phi, F_psi and |W^| must be nonnegative".into(),
            ));
        }
        if kappa_h.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::InvalidInput("kappa_h must be positive".into()));
        }
        let dims = SynthesisDims {
            n,
            p,
            l,
            n_z,
            n_w: w_hat_abs.ncols(),
            n_v: v.ncols(),
        };
        Ok(Self {
            a_abs_plus_fphi,
            f_psi,
            c,
            v,
            w_hat_abs,
            kappa_h,
            dims,
        })
    }

    pub fn from_plant(plant: &PlantModel, kappa_h: Vec<f64>) -> Result<Self> {
        Self::new(
            abs_matrix(plant.a()) + jacobian_spread(&plant.f.residual_jacobian),
            jacobian_spread(&plant.g.residual_jacobian),
            plant.c().clone(),
            plant.v.clone(),
            abs_matrix(plant.w_hat()),
            kappa_h,
        )
    }

    pub fn dims(&self) -> SynthesisDims {
        self.dims
    }

    /// `[|A| + F_phi; 0 I_p]`.
    pub fn a_hat(&self) -> DMatrix<f64> {
        let SynthesisDims { n, p, n_z, .. } = self.dims;
        let mut a = DMatrix::zeros(n_z, n_z);
        a.rows_mut(0, n).copy_from(&self.a_abs_plus_fphi);
        for j in 0..p {
            a[(n + j, n + j)] = 1.0;
        }
        a
    }

    /// `[0; I_p]`, injecting the slack channel into the last `p` rows.
    pub fn b_hat(&self) -> DMatrix<f64> {
        let SynthesisDims { n, p, n_z, .. } = self.dims;
        let mut b = DMatrix::zeros(n_z, p);
        for j in 0..p {
            b[(n + j, j)] = 1.0;
        }
        b
    }

    /// Copy with `|W^|` and `V` multiplied by `factor`.
    pub fn with_noise_scale(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.a_abs_plus_fphi.clone(),
            self.f_psi.clone(),
            self.c.clone(),
            &self.v * factor,
            &self.w_hat_abs * factor,
            self.kappa_h.clone(),
        )
    }
}

/// Values of every decision matrix, including the derived splits.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisVariables {
    pub q: DVector<f64>,
    pub l_p: DMatrix<f64>,
    pub l_n: DMatrix<f64>,
    pub lc_p: DMatrix<f64>,
    pub lc_n: DMatrix<f64>,
    pub lv_p: DMatrix<f64>,
    pub lv_n: DMatrix<f64>,
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma: f64,
}

impl SynthesisVariables {
    pub fn l_tilde(&self) -> DMatrix<f64> {
        &self.l_p - &self.l_n
    }

    /// `L = Q^-1 L~`; `Q` is diagonal so this is a row scaling.
    pub fn gain(&self) -> DMatrix<f64> {
        let mut g = self.l_tilde();
        for (i, mut row) in g.row_iter_mut().enumerate() {
            row /= self.q[i];
        }
        g
    }

    /// Entries that must be nonnegative, in a fixed order.
    fn sign_constrained(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for m in [
            &self.l_p, &self.l_n, &self.lc_p, &self.lc_n, &self.lv_p, &self.lv_n,
        ] {
            out.extend(m.iter().copied());
        }
        out
    }
}

/// Position of each free variable in the solver vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    dims: SynthesisDims,
}

impl VariableLayout {
    pub fn new(dims: SynthesisDims) -> Self {
        Self { dims }
    }

    fn sizes(&self) -> [usize; 5] {
        let d = self.dims;
        [
            d.n_z,
            d.n_z * d.l,
            d.n_z * d.l,
            d.n_z * d.n_z,
            d.n_z * d.n_v,
        ]
    }

    pub fn len(&self) -> usize {
        self.sizes().iter().sum::<usize>() + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn gamma_index(&self) -> usize {
        self.len() - 1
    }

    pub fn unpack(&self, inp: &SynthesisInput, x: &[f64]) -> Result<SynthesisVariables> {
        check_dim("solution vector", self.len(), x.len())?;
        let d = self.dims;
        let mut at = 0;
        let mut take = |rows: usize, cols: usize| {
            // Row-major so that the file layout reads naturally.
            let m = DMatrix::from_row_slice(rows, cols, &x[at..at + rows * cols]);
            at += rows * cols;
            m
        };
        let q = take(d.n_z, 1).column(0).into_owned();
        let l_p = take(d.n_z, d.l);
        let l_n = take(d.n_z, d.l);
        let lc_p = take(d.n_z, d.n_z);
        let lv_p = take(d.n_z, d.n_v);
        let l_tilde = &l_p - &l_n;
        let lc_n = &lc_p - &l_tilde * &inp.c;
        let lv_n = &lv_p - &l_tilde * &inp.v;
        let n = x.len();
        Ok(SynthesisVariables {
            q,
            l_p,
            l_n,
            lc_p,
            lc_n,
            lv_p,
            lv_n,
            alpha: x[n - 3],
            epsilon: x[n - 2],
            gamma: x[n - 1],
        })
    }
}

/// Both LMI blocks evaluated at `vars`.
pub fn lmi_blocks(inp: &SynthesisInput, vars: &SynthesisVariables) -> (DMatrix<f64>, DMatrix<f64>) {
    let SynthesisDims {
        n_z, n_w, n_v, p, ..
    } = inp.dims;
    let q = DMatrix::from_diagonal(&vars.q);
    let id = DMatrix::<f64>::identity(n_z, n_z);
    let gamma_blk =
        &q * inp.a_hat() + &vars.lc_p + &vars.lc_n + (&vars.l_p + &vars.l_n) * &inp.f_psi;

    let mut b1 = DMatrix::zeros(4 * n_z, 4 * n_z);
    let put = |m: &mut DMatrix<f64>, r: usize, c: usize, blk: &DMatrix<f64>| {
        m.view_mut((r, c), blk.shape()).copy_from(blk);
        if r != c {
            m.view_mut((c, r), (blk.ncols(), blk.nrows()))
                .copy_from(&blk.transpose());
        }
    };
    put(&mut b1, 0, 0, &(&id - &q));
    put(&mut b1, n_z, 0, &id);
    put(&mut b1, n_z, n_z, &(&id * -vars.alpha));
    put(&mut b1, 2 * n_z, 0, &gamma_blk);
    put(&mut b1, 2 * n_z, 2 * n_z, &(&q * -0.5));
    put(&mut b1, 3 * n_z, 2 * n_z, &q);
    put(
        &mut b1,
        3 * n_z,
        3 * n_z,
        &(&q - &id * (2.0 * vars.epsilon)),
    );

    let m = n_w + n_v + p;
    let mut omega = DMatrix::zeros(n_z, m);
    omega.columns_mut(0, n_w).copy_from(&(&q * &inp.w_hat_abs));
    omega
        .columns_mut(n_w, n_v)
        .copy_from(&(&vars.lv_p + &vars.lv_n));
    omega
        .columns_mut(n_w + n_v, p)
        .copy_from(&(&q * inp.b_hat()));
    let mut b2 = DMatrix::zeros(m + 2 * n_z, m + 2 * n_z);
    put(&mut b2, 0, 0, &(DMatrix::identity(m, m) * -vars.gamma));
    put(&mut b2, m, 0, &omega);
    put(&mut b2, m, m, &(&q * -0.5));
    put(&mut b2, m + n_z, 0, &omega);
    put(
        &mut b2,
        m + n_z,
        m + n_z,
        &-DMatrix::<f64>::identity(n_z, n_z),
    );
    (b1, b2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisOptions {
    /// Strict inequalities become `<= -margin` (and `>= margin`).
    pub margin: f64,
    /// Box `|x_i| <= variable_bound` on every decision variable.
    pub variable_bound: f64,
    /// Eigenvalue and equality tolerance for accepting a certificate.
    pub tol: f64,
    pub ipm: IpmOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            margin: 1e-5,
            variable_bound: 1e4,
            tol: 1e-7,
            ipm: IpmOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssembledSdp {
    pub input: SynthesisInput,
    pub layout: VariableLayout,
    pub problem: SdpProblem,
    pub margin: f64,
}

fn scalar_rows(vars: &SynthesisVariables) -> Vec<f64> {
    let mut rows: Vec<f64> = vars.q.iter().copied().collect();
    rows.extend(vars.sign_constrained());
    rows.extend([vars.alpha, vars.epsilon, vars.gamma]);
    rows
}

fn push_upper(entries: &mut Vec<SdpaEntry>, mat: usize, block: usize, m: &DMatrix<f64>) {
    for j in 0..m.ncols() {
        for i in 0..=j {
            let v = m[(i, j)];
            if v != 0.0 {
                entries.push(SdpaEntry {
                    mat,
                    block,
                    i: i + 1,
                    j: j + 1,
                    value: v,
                });
            }
        }
    }
}

/// Builds the SDPA-form problem `min gamma` over both LMIs and all sign rows.
pub fn assemble_sdp(inp: &SynthesisInput, opts: &SynthesisOptions) -> Result<AssembledSdp> {
    if !(opts.margin > 0.0 && opts.variable_bound > opts.margin) {
        return Err(Error::InvalidInput(
            "need 0 < margin < variable_bound".into(),
        ));
    }
    let layout = VariableLayout::new(inp.dims);
    let nvar = layout.len();
    let zero = vec![0.0; nvar];
    let base = layout.unpack(inp, &zero)?;
    let (m1, m2) = lmi_blocks(inp, &base);
    let r0 = scalar_rows(&base);
    let n_q = inp.dims.n_z;
    let n_sign = r0.len() - n_q - 3;
    let lower_bounds: Vec<f64> = std::iter::repeat_n(opts.margin, n_q)
        .chain(std::iter::repeat_n(0.0, n_sign))
        .chain(std::iter::repeat_n(opts.margin, 3))
        .collect();
    let n_rows = r0.len() + 2 * nvar;

    let mut entries = Vec::new();
    // Z = -M(x) - margin I, so F_0 = M_0 + margin I and F_k = -M_k.
    let shift = |m: &DMatrix<f64>| m + DMatrix::identity(m.nrows(), m.ncols()) * opts.margin;
    push_upper(&mut entries, 0, 1, &shift(&m1));
    push_upper(&mut entries, 0, 2, &shift(&m2));
    let diag_entry = |entries: &mut Vec<SdpaEntry>, mat: usize, row: usize, value: f64| {
        if value != 0.0 {
            entries.push(SdpaEntry {
                mat,
                block: 3,
                i: row + 1,
                j: row + 1,
                value,
            });
        }
    };
    for (r, (lb, v0)) in lower_bounds.iter().zip(&r0).enumerate() {
        diag_entry(&mut entries, 0, r, lb - v0);
    }
    let box_row = |k: usize| r0.len() + 2 * k;
    for k in 0..nvar {
        diag_entry(&mut entries, 0, box_row(k), -opts.variable_bound);
        diag_entry(&mut entries, 0, box_row(k) + 1, -opts.variable_bound);
    }

    let mut unit = zero.clone();
    for k in 0..nvar {
        unit[k] = 1.0;
        let vars = layout.unpack(inp, &unit)?;
        unit[k] = 0.0;
        let (k1, k2) = lmi_blocks(inp, &vars);
        push_upper(&mut entries, k + 1, 1, &(&m1 - k1));
        push_upper(&mut entries, k + 1, 2, &(&m2 - k2));
        for (r, (v, v0)) in scalar_rows(&vars).iter().zip(&r0).enumerate() {
            diag_entry(&mut entries, k + 1, r, v - v0);
        }
        diag_entry(&mut entries, k + 1, box_row(k), -1.0);
        diag_entry(&mut entries, k + 1, box_row(k) + 1, 1.0);
    }
    entries.sort_by_key(|e| (e.mat, e.block, e.i, e.j));

    let mut c = vec![0.0; nvar];
    c[layout.gamma_index()] = 1.0;
    let problem = SdpProblem {
        block_struct: vec![m1.nrows() as i64, m2.nrows() as i64, -(n_rows as i64)],
        c,
        entries,
    };
    Ok(AssembledSdp {
        input: inp.clone(),
        layout,
        problem,
        margin: opts.margin,
    })
}

mod rows_serde {
    use nalgebra::{DMatrix, DVector};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }

    pub mod vector {
        use super::*;

        pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.as_slice().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
            Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockResiduals {
    pub block1: f64,
    pub block2: f64,
}

/// Solver output in a form the verifier can audit on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCertificate {
    #[serde(with = "rows_serde")]
    pub gain: DMatrix<f64>,
    pub gamma: f64,
    #[serde(with = "rows_serde::vector")]
    pub q: DVector<f64>,
    #[serde(with = "rows_serde")]
    pub l_p: DMatrix<f64>,
    #[serde(with = "rows_serde")]
    pub l_n: DMatrix<f64>,
    #[serde(with = "rows_serde")]
    pub lc_p: DMatrix<f64>,
    #[serde(with = "rows_serde")]
    pub lc_n: DMatrix<f64>,
    #[serde(with = "rows_serde")]
    pub lv_p: DMatrix<f64>,
    #[serde(with = "rows_serde")]
    pub lv_n: DMatrix<f64>,
    pub alpha: f64,
    pub epsilon: f64,
    pub residuals: BlockResiduals,
    pub equality_residual: f64,
    pub solver: String,
    pub status: String,
}

impl GainCertificate {
    pub fn variables(&self) -> SynthesisVariables {
        SynthesisVariables {
            q: self.q.clone(),
            l_p: self.l_p.clone(),
            l_n: self.l_n.clone(),
            lc_p: self.lc_p.clone(),
            lc_n: self.lc_n.clone(),
            lv_p: self.lv_p.clone(),
            lv_n: self.lv_n.clone(),
            alpha: self.alpha,
            epsilon: self.epsilon,
            gamma: self.gamma,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone)]
pub enum SynthesisOutcome {
    Certified(GainCertificate),
    Infeasible { status: String },
}

/// Solves, recovers `L = Q^-1 L~`, and accepts the result only if the
/// independent re-substitution check passes at `tol`.
pub fn synthesize_gain(
    asm: &AssembledSdp,
    backend: &dyn ConicBackend,
    tol: f64,
) -> Result<SynthesisOutcome> {
    let out = backend.solve(&asm.problem)?;
    match out.status {
        SolverStatus::Infeasible => {
            return Ok(SynthesisOutcome::Infeasible {
                status: format!("{}: infeasible ({})", backend.name(), out.message),
            })
        }
        SolverStatus::Failed => {
            return Err(Error::SynthesisFailed(format!(
                "{}: {} after {} iterations",
                backend.name(),
                out.message,
                out.iterations
            )))
        }
        SolverStatus::Optimal => {}
    }
    let x = out
        .x
        .ok_or_else(|| Error::SynthesisFailed(format!("{} returned no point", backend.name())))?;
    let vars = asm.layout.unpack(&asm.input, &x)?;
    let mut cert = GainCertificate {
        gain: vars.gain(),
        gamma: vars.gamma,
        q: vars.q.clone(),
        l_p: vars.l_p.clone(),
        l_n: vars.l_n.clone(),
        lc_p: vars.lc_p.clone(),
        lc_n: vars.lc_n.clone(),
        lv_p: vars.lv_p.clone(),
        lv_n: vars.lv_n.clone(),
        alpha: vars.alpha,
        epsilon: vars.epsilon,
        residuals: BlockResiduals {
            block1: f64::NAN,
            block2: f64::NAN,
        },
        equality_residual: f64::NAN,
        solver: backend.name().to_string(),
        status: format!("optimal ({}, {} iterations)", out.message, out.iterations),
    };
    let report = verify_certificate(&asm.input, &cert, tol);
    if !report.passed {
        return Err(Error::CertificateRejected(report.failures.join("; ")));
    }
    cert.residuals = BlockResiduals {
        block1: report.block1_max_eig,
        block2: report.block2_max_eig,
    };
    cert.equality_residual = report.equality_residual;
    Ok(SynthesisOutcome::Certified(cert))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub block1_max_eig: f64,
    pub block2_max_eig: f64,
    /// Blocks rebuilt with the canonical splits `|QY|` of the returned gain.
    pub comparison_block1_max_eig: f64,
    pub comparison_block2_max_eig: f64,
    pub equality_residual: f64,
    pub min_split_entry: f64,
    pub min_q: f64,
    pub gamma: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

fn max_eig(m: DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::NEG_INFINITY;
    }
    SymmetricEigen::new(m).eigenvalues.max()
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Rebuilds both blocks from the certificate alone and reports the margins.
pub fn verify_certificate(
    inp: &SynthesisInput,
    cert: &GainCertificate,
    tol: f64,
) -> VerificationReport {
    let d = inp.dims;
    let mut failures = Vec::new();
    let shapes = [
        ("gain", cert.gain.shape(), (d.n_z, d.l)),
        ("q", (cert.q.len(), 1), (d.n_z, 1)),
        ("l_p", cert.l_p.shape(), (d.n_z, d.l)),
        ("l_n", cert.l_n.shape(), (d.n_z, d.l)),
        ("lc_p", cert.lc_p.shape(), (d.n_z, d.n_z)),
        ("lc_n", cert.lc_n.shape(), (d.n_z, d.n_z)),
        ("lv_p", cert.lv_p.shape(), (d.n_z, d.n_v)),
        ("lv_n", cert.lv_n.shape(), (d.n_z, d.n_v)),
    ];
    for (name, got, want) in shapes {
        if got != want {
            failures.push(format!("{name} has shape {got:?}, expected {want:?}"));
        }
    }
    let nan = f64::NAN;
    if !failures.is_empty() {
        return VerificationReport {
            block1_max_eig: nan,
            block2_max_eig: nan,
            comparison_block1_max_eig: nan,
            comparison_block2_max_eig: nan,
            equality_residual: nan,
            min_split_entry: nan,
            min_q: nan,
            gamma: cert.gamma,
            passed: false,
            failures,
        };
    }

    let vars = cert.variables();
    let q = DMatrix::from_diagonal(&cert.q);
    let l_tilde = &q * &cert.gain;
    let equality_residual = [
        max_abs_diff(&(&cert.l_p - &cert.l_n), &l_tilde),
        max_abs_diff(&(&cert.lc_p - &cert.lc_n), &(&l_tilde * &inp.c)),
        max_abs_diff(&(&cert.lv_p - &cert.lv_n), &(&l_tilde * &inp.v)),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let min_split_entry = vars
        .sign_constrained()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let min_q = cert.q.iter().copied().fold(f64::INFINITY, f64::min);

    let (b1, b2) = lmi_blocks(inp, &vars);
    let block1_max_eig = max_eig(b1);
    let block2_max_eig = max_eig(b2);

    let ls = split_unchecked(&l_tilde);
    let lcs = split_unchecked(&(&l_tilde * &inp.c));
    let lvs = split_unchecked(&(&l_tilde * &inp.v));
    let canonical = SynthesisVariables {
        l_p: ls.positive,
        l_n: ls.negative,
        lc_p: lcs.positive,
        lc_n: lcs.negative,
        lv_p: lvs.positive,
        lv_n: lvs.negative,
        ..vars.clone()
    };
    let (c1, c2) = lmi_blocks(inp, &canonical);
    let comparison_block1_max_eig = max_eig(c1);
    let comparison_block2_max_eig = max_eig(c2);

    let eigs = [
        ("block 1", block1_max_eig),
        ("block 2", block2_max_eig),
        ("comparison block 1", comparison_block1_max_eig),
        ("comparison block 2", comparison_block2_max_eig),
    ];
    for (name, e) in eigs {
        if !(e < -tol) {
            failures.push(format!(
                "{name} max eigenvalue {e:.3e} is not below {:.1e}",
                -tol
            ));
        }
    }
    if !(equality_residual < tol) {
        failures.push(format!(
            "equality residual {equality_residual:.3e} exceeds {tol:.1e}"
        ));
    }
    if !(min_split_entry >= -tol) {
        failures.push(format!("split entry {min_split_entry:.3e} is negative"));
    }
    if !(min_q > 0.0) {
        failures.push(format!("Q has nonpositive diagonal entry {min_q:.3e}"));
    }
    for (name, v) in [
        ("gamma", cert.gamma),
        ("alpha", cert.alpha),
        ("epsilon", cert.epsilon),
    ] {
        if !(v > 0.0) {
            failures.push(format!("{name} = {v:.3e} is not positive"));
        }
    }
    VerificationReport {
        block1_max_eig,
        block2_max_eig,
        comparison_block1_max_eig,
        comparison_block2_max_eig,
        equality_residual,
        min_split_entry,
        min_q,
        gamma: cert.gamma,
        passed: failures.is_empty(),
        failures,
    }
}
