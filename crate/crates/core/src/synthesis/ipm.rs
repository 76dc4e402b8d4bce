//! Embedded primal-dual interior-point solver for small SDPA-form problems.
//!
//! Phase I minimizes `s` subject to `Z(x) + sI >= 0` to find a strictly
//! feasible point (or a dual bound proving there is none). Phase II runs an
//! HKM predictor-corrector from that point, keeping the primal iterate
//! exactly feasible while the dual residual is driven to zero.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::sdpa::SdpProblem;
use super::{ConicBackend, SolverOutcome, SolverStatus};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IpmOptions {
    /// Relative bound on `tr(ZY)` at termination.
    pub gap_tol: f64,
    /// Relative bound on the dual residual at termination.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-7,
            max_iter: 150,
            step_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IpmSolver {
    pub options: IpmOptions,
}

type Sparse = Vec<(usize, usize, f64)>;

/// One cone block. Diagonal blocks store every matrix as a `size x 1` column.
#[derive(Debug, Clone)]
struct Block {
    size: usize,
    diagonal: bool,
    f0: DMatrix<f64>,
    /// Per variable: full entry list (both triangles for dense blocks).
    fk: Vec<Sparse>,
}

impl Block {
    fn zeros(&self) -> DMatrix<f64> {
        if self.diagonal {
            DMatrix::zeros(self.size, 1)
        } else {
            DMatrix::zeros(self.size, self.size)
        }
    }

    /// `sum_k x_k F_k`.
    fn linear(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = self.zeros();
        for (k, list) in self.fk.iter().enumerate() {
            let xk = x[k];
            if xk == 0.0 {
                continue;
            }
            for &(i, j, v) in list {
                if self.diagonal {
                    out[(i, 0)] += xk * v;
                } else {
                    out[(i, j)] += xk * v;
                }
            }
        }
        out
    }

    fn slack(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.linear(x) - &self.f0
    }

    /// `tr(F_k M)`.
    fn trace_with(&self, k: usize, m: &DMatrix<f64>) -> f64 {
        if self.diagonal {
            self.fk[k].iter().map(|&(i, _, v)| v * m[(i, 0)]).sum()
        } else {
            self.fk[k].iter().map(|&(i, j, v)| v * m[(j, i)]).sum()
        }
    }

    /// `tr(A B)`.
    fn inner(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        if self.diagonal {
            a.dot(b)
        } else {
            a.component_mul(&b.transpose()).sum()
        }
    }

    fn inverse(&self, z: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        if self.diagonal {
            z.iter().all(|v| *v > 0.0).then(|| z.map(|v| 1.0 / v))
        } else {
            Some(Cholesky::new(z.clone())?.inverse())
        }
    }

    /// Largest `a` with `m + a d` positive semidefinite (infinite if unbounded).
    fn max_step(&self, m: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
        if self.diagonal {
            return m
                .iter()
                .zip(d.iter())
                .filter(|(_, dv)| **dv < 0.0)
                .map(|(mv, dv)| -mv / dv)
                .fold(f64::INFINITY, f64::min);
        }
        let Some(chol) = Cholesky::new(m.clone()) else {
            return 0.0;
        };
        let l = chol.l();
        let Some(half) = l.solve_lower_triangular(d) else {
            return 0.0;
        };
        let Some(w) = l.solve_lower_triangular(&half.transpose()) else {
            return 0.0;
        };
        let w = (&w + w.transpose()) * 0.5;
        let lam = SymmetricEigen::new(w).eigenvalues.min();
        if lam < 0.0 {
            -1.0 / lam
        } else {
            f64::INFINITY
        }
    }

    fn min_eigenvalue(&self, z: &DMatrix<f64>) -> f64 {
        if self.diagonal {
            z.min()
        } else {
            SymmetricEigen::new(z.clone()).eigenvalues.min()
        }
    }
}

#[derive(Debug, Clone)]
struct Program {
    c: DVector<f64>,
    blocks: Vec<Block>,
}

struct State {
    x: DVector<f64>,
    z: Vec<DMatrix<f64>>,
    y: Vec<DMatrix<f64>>,
}

struct Progress {
    primal: f64,
    dual: f64,
    /// `tr(ZY)`.
    gap: f64,
    /// Dual residual relative to `1 + |c|`.
    residual: f64,
}

struct Direction {
    dx: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
    dy: Vec<DMatrix<f64>>,
}

impl Program {
    fn from_sdpa(p: &SdpProblem) -> Self {
        let m = p.num_vars();
        let mut blocks: Vec<Block> = p
            .block_struct
            .iter()
            .map(|&b| {
                let size = b.unsigned_abs() as usize;
                let diagonal = b < 0;
                Block {
                    size,
                    diagonal,
                    f0: if diagonal {
                        DMatrix::zeros(size, 1)
                    } else {
                        DMatrix::zeros(size, size)
                    },
                    fk: vec![Vec::new(); m],
                }
            })
            .collect();
        for e in &p.entries {
            let blk = &mut blocks[e.block - 1];
            let (i, j) = (e.i - 1, e.j - 1);
            if e.mat == 0 {
                if blk.diagonal {
                    blk.f0[(i, 0)] += e.value;
                } else {
                    blk.f0[(i, j)] += e.value;
                    if i != j {
                        blk.f0[(j, i)] += e.value;
                    }
                }
            } else {
                let list = &mut blk.fk[e.mat - 1];
                list.push((i, j, e.value));
                if i != j && !blk.diagonal {
                    list.push((j, i, e.value));
                }
            }
        }
        Self {
            c: DVector::from_column_slice(&p.c),
            blocks,
        }
    }

    fn nu(&self) -> f64 {
        self.blocks.iter().map(|b| b.size as f64).sum()
    }

    /// Adds a variable `s` entering every block as `+ s I`, plus a row
    /// `s >= -1`, with objective `s`.
    fn phase_one(&self) -> Self {
        let m = self.c.len();
        let mut c = DVector::zeros(m + 1);
        c[m] = 1.0;
        let mut blocks = self.blocks.clone();
        for b in &mut blocks {
            b.fk.push((0..b.size).map(|i| (i, i, 1.0)).collect());
        }
        let mut bound = Block {
            size: 1,
            diagonal: true,
            f0: DMatrix::from_element(1, 1, -1.0),
            fk: vec![Vec::new(); m + 1],
        };
        bound.fk[m].push((0, 0, 1.0));
        blocks.push(bound);
        Self { c, blocks }
    }

    fn slacks(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| b.slack(x)).collect()
    }

    fn min_eigenvalue(&self, x: &DVector<f64>) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.min_eigenvalue(&b.slack(x)))
            .fold(f64::INFINITY, f64::min)
    }

    fn start(&self, x: DVector<f64>, mu: f64) -> Option<State> {
        let z = self.slacks(&x);
        let y = self
            .blocks
            .iter()
            .zip(&z)
            .map(|(b, z)| b.inverse(z).map(|inv| inv * mu))
            .collect::<Option<Vec<_>>>()?;
        Some(State { x, z, y })
    }

    fn progress(&self, st: &State) -> Progress {
        let mut residual = self.c.clone();
        let mut dual = 0.0;
        let mut gap = 0.0;
        for ((b, z), y) in self.blocks.iter().zip(&st.z).zip(&st.y) {
            for k in 0..self.c.len() {
                if !b.fk[k].is_empty() {
                    residual[k] -= b.trace_with(k, y);
                }
            }
            dual += b.inner(&b.f0, y);
            gap += b.inner(z, y);
        }
        Progress {
            primal: self.c.dot(&st.x),
            dual,
            gap,
            residual: residual.norm() / (1.0 + self.c.norm()),
        }
    }

    /// Schur complement `M_kl = sum_b tr(F_k Z^-1 F_l Y)`.
    fn schur(&self, zinv: &[DMatrix<f64>], y: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.c.len();
        let mut out = DMatrix::zeros(m, m);
        for ((b, zi), y) in self.blocks.iter().zip(zinv).zip(y) {
            let active: Vec<usize> = (0..m).filter(|&k| !b.fk[k].is_empty()).collect();
            if b.diagonal {
                let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); b.size];
                for &k in &active {
                    for &(i, _, v) in &b.fk[k] {
                        rows[i].push((k, v));
                    }
                }
                for (i, row) in rows.iter().enumerate() {
                    let w = y[(i, 0)] * zi[(i, 0)];
                    for &(k, v) in row {
                        for &(l, u) in row {
                            out[(k, l)] += v * u * w;
                        }
                    }
                }
                continue;
            }
            for &k in &active {
                // G = Z^-1 F_k Y as a sum of sparse outer products.
                let mut g = DMatrix::zeros(b.size, b.size);
                for &(i, j, v) in &b.fk[k] {
                    let col = zi.column(i);
                    for a in 0..b.size {
                        let s = v * y[(j, a)];
                        if s != 0.0 {
                            g.column_mut(a).axpy(s, &col, 1.0);
                        }
                    }
                }
                for &l in &active {
                    out[(l, k)] += b.trace_with(l, &g);
                }
            }
        }
        (&out + out.transpose()) * 0.5
    }

    /// Direction targeting `ZY = target I - R`.
    fn direction(
        &self,
        factor: &Cholesky<f64, nalgebra::Dyn>,
        st: &State,
        zinv: &[DMatrix<f64>],
        target: f64,
        correction: Option<&[DMatrix<f64>]>,
    ) -> Direction {
        let m = self.c.len();
        let kmat: Vec<DMatrix<f64>> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(bi, b)| {
                let zi = &zinv[bi];
                match (b.diagonal, correction) {
                    (true, None) => zi * target,
                    (true, Some(r)) => zi.component_mul(&r[bi].map(|v| target - v)),
                    (false, None) => zi * target,
                    (false, Some(r)) => zi * target - zi * &r[bi],
                }
            })
            .collect();
        let mut rhs = -self.c.clone();
        for (b, km) in self.blocks.iter().zip(&kmat) {
            for k in 0..m {
                if !b.fk[k].is_empty() {
                    rhs[k] += b.trace_with(k, km);
                }
            }
        }
        let dx = factor.solve(&rhs);
        let dz: Vec<DMatrix<f64>> = self.blocks.iter().map(|b| b.linear(&dx)).collect();
        let dy = self
            .blocks
            .iter()
            .enumerate()
            .map(|(bi, b)| {
                let (zi, y) = (&zinv[bi], &st.y[bi]);
                if b.diagonal {
                    &kmat[bi] - y - zi.component_mul(&dz[bi]).component_mul(y)
                } else {
                    let d = &kmat[bi] - y - zi * &dz[bi] * y;
                    (&d + d.transpose()) * 0.5
                }
            })
            .collect();
        Direction { dx, dz, dy }
    }

    fn step_lengths(&self, st: &State, d: &Direction) -> (f64, f64) {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for (bi, b) in self.blocks.iter().enumerate() {
            ap = ap.min(b.max_step(&st.z[bi], &d.dz[bi]));
            ad = ad.min(b.max_step(&st.y[bi], &d.dy[bi]));
        }
        (ap, ad)
    }

    /// One predictor-corrector iteration. `None` when the Schur system or the
    /// slack factorization breaks down.
    fn iterate(&self, st: &mut State, fraction: f64) -> Option<()> {
        let zinv = self
            .blocks
            .iter()
            .zip(&st.z)
            .map(|(b, z)| b.inverse(z))
            .collect::<Option<Vec<_>>>()?;
        let nu = self.nu();
        let mu = self.progress(st).gap / nu;
        let mut schur = self.schur(&zinv, &st.y);
        let factor = match Cholesky::new(schur.clone()) {
            Some(f) => f,
            None => {
                let scale = schur.diagonal().amax().max(1e-300);
                for i in 0..schur.nrows() {
                    schur[(i, i)] += 1e-12 * scale;
                }
                Cholesky::new(schur)?
            }
        };

        let pred = self.direction(&factor, st, &zinv, 0.0, None);
        let (ap, ad) = self.step_lengths(st, &pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut mu_aff = 0.0;
        for (bi, b) in self.blocks.iter().enumerate() {
            let z = &st.z[bi] + &pred.dz[bi] * ap;
            let y = &st.y[bi] + &pred.dy[bi] * ad;
            mu_aff += b.inner(&z, &y);
        }
        let sigma = (mu_aff / nu / mu).powi(3).clamp(0.0, 1.0);
        let correction: Vec<DMatrix<f64>> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(bi, b)| {
                if b.diagonal {
                    pred.dz[bi].component_mul(&pred.dy[bi])
                } else {
                    &pred.dz[bi] * &pred.dy[bi]
                }
            })
            .collect();
        let dir = self.direction(&factor, st, &zinv, sigma * mu, Some(&correction));
        let (ap, ad) = self.step_lengths(st, &dir);
        let mut ap = (fraction * ap).min(1.0);
        let ad = (fraction * ad).min(1.0);

        loop {
            let x = &st.x + &dir.dx * ap;
            let z = self.slacks(&x);
            if self
                .blocks
                .iter()
                .zip(&z)
                .all(|(b, z)| b.inverse(z).is_some())
            {
                st.x = x;
                st.z = z;
                break;
            }
            ap *= 0.5;
            if ap < 1e-14 {
                return None;
            }
        }
        for (y, dy) in st.y.iter_mut().zip(&dir.dy) {
            *y += dy * ad;
        }
        Some(())
    }
}

enum Verdict {
    Continue,
    Stop(SolverStatus, String),
}

impl IpmSolver {
    pub fn new(options: IpmOptions) -> Self {
        Self { options }
    }

    fn run(
        &self,
        prog: &Program,
        st: &mut State,
        iterations: &mut usize,
        check: &dyn Fn(&State, &Progress) -> Verdict,
    ) -> (SolverStatus, String) {
        for _ in 0..self.options.max_iter {
            let pr = prog.progress(st);
            if let Verdict::Stop(status, msg) = check(st, &pr) {
                return (status, msg);
            }
            if prog.iterate(st, self.options.step_fraction).is_none() {
                return (SolverStatus::Failed, "numerical breakdown".into());
            }
            *iterations += 1;
        }
        let pr = prog.progress(st);
        if let Verdict::Stop(status, msg) = check(st, &pr) {
            return (status, msg);
        }
        (SolverStatus::Failed, "iteration limit".into())
    }

    fn converged(&self, pr: &Progress) -> bool {
        pr.residual <= self.options.feas_tol
            && pr.gap <= self.options.gap_tol * pr.primal.abs().max(1.0)
    }

    fn find_feasible(
        &self,
        prog: &Program,
        iterations: &mut usize,
    ) -> std::result::Result<DVector<f64>, (SolverStatus, String)> {
        let m = prog.c.len();
        let p1 = prog.phase_one();
        let lam = prog.min_eigenvalue(&DVector::zeros(m));
        let mut x = DVector::zeros(m + 1);
        x[m] = (1.0 - lam).max(-0.5);
        let mut st = p1.start(x, 1.0).ok_or((
            SolverStatus::Failed,
            "phase I start is not interior".to_string(),
        ))?;
        let feas_tol = self.options.feas_tol;
        let check = |st: &State, pr: &Progress| {
            let s = st.x[m];
            let dual_ok = pr.residual <= feas_tol;
            if dual_ok && pr.dual > 0.0 {
                return Verdict::Stop(
                    SolverStatus::Infeasible,
                    format!("optimum is at least {:.3e} > 0", pr.dual),
                );
            }
            // Half the best achievable margin is enough to start phase II.
            if s < 0.0 && dual_ok && s <= 0.5 * pr.dual {
                return Verdict::Stop(SolverStatus::Optimal, String::new());
            }
            if self.converged(pr) {
                return if s < 0.0 {
                    Verdict::Stop(SolverStatus::Optimal, String::new())
                } else {
                    Verdict::Stop(
                        SolverStatus::Infeasible,
                        format!("optimum {s:.3e} is not negative; no strictly feasible point"),
                    )
                };
            }
            Verdict::Continue
        };
        match self.run(&p1, &mut st, iterations, &check) {
            (SolverStatus::Optimal, _) => Ok(st.x.rows(0, m).into_owned()),
            (status, msg) => Err((status, format!("phase I: {msg}"))),
        }
    }
}

impl ConicBackend for IpmSolver {
    fn name(&self) -> &str {
        "embedded-ipm"
    }

    fn solve(&self, problem: &SdpProblem) -> Result<SolverOutcome> {
        problem.validate()?;
        let prog = Program::from_sdpa(problem);
        let mut iterations = 0;
        let x = match self.find_feasible(&prog, &mut iterations) {
            Ok(x) => x,
            Err((status, message)) => {
                return Ok(SolverOutcome {
                    status,
                    x: None,
                    objective: f64::NAN,
                    iterations,
                    message,
                })
            }
        };
        let mu = prog.c.dot(&x).abs().max(1.0) / prog.nu();
        let Some(mut st) = prog.start(x, mu) else {
            return Ok(SolverOutcome {
                status: SolverStatus::Failed,
                x: None,
                objective: f64::NAN,
                iterations,
                message: "phase I point is not interior".into(),
            });
        };
        let check = |_: &State, pr: &Progress| {
            if self.converged(pr) {
                Verdict::Stop(
                    SolverStatus::Optimal,
                    format!("gap {:.3e}, dual residual {:.3e}", pr.gap, pr.residual),
                )
            } else {
                Verdict::Continue
            }
        };
        let (status, message) = self.run(&prog, &mut st, &mut iterations, &check);
        Ok(SolverOutcome {
            status,
            objective: prog.c.dot(&st.x),
            x: Some(st.x.iter().copied().collect()),
            iterations,
            message,
        })
    }
}
