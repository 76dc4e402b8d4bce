//! Forward-Euler predator-prey benchmark with a hidden unknown-input map.
//!
//! ```text
//! x1+ = x1 + dt(-x1 x2 - x2 + u + d + w1)
//! x2+ = x2 + dt(x1 x2 + x1 + w2)
//! d+  = d + dt(0.1(cos x1 - sin x2) + w3)
//! y   = (x1 + v1, x2 + v2, sin d + v3)
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::{jss_decompose, JacobianBounds, VectorField};
use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::observer::{KnownInputMap, PlantModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    #[default]
    Uniform,
    /// Each component sits on one of its two bounds with equal probability.
    Extremal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredatorPreyParams {
    pub dt: f64,
    pub u: f64,
    pub noise_w: IntervalVector,
    pub noise_v: IntervalVector,
    pub x0_box: IntervalVector,
    pub d0_box: IntervalVector,
    pub domain: IntervalVector,
    pub distribution: NoiseDistribution,
}

impl Default for PredatorPreyParams {
    fn default() -> Self {
        let sym = |r: f64| IntervalVector::symmetric(&[r, r, r]).expect("finite radius");
        Self {
            dt: 0.01,
            u: 0.0,
            noise_w: sym(0.1),
            noise_v: sym(0.1),
            x0_box: IntervalVector::from_slices(&[-0.35, -0.1], &[0.0, 0.6]).expect("ordered"),
            d0_box: IntervalVector::from_slices(&[-0.1], &[0.1]).expect("ordered"),
            domain: IntervalVector::from_slices(&[-2.0, -2.0, -1.0], &[2.0, 2.0, 1.0])
                .expect("ordered"),
            distribution: NoiseDistribution::Uniform,
        }
    }
}

/// Plant, hidden map, and simulation settings.
#[derive(Debug, Clone)]
pub struct BenchmarkSystem {
    pub plant: PlantModel,
    /// Noise-free part of the unknown-input map; never handed to the learner.
    pub true_h: VectorField,
    /// Row mapping process noise into `d+`.
    pub w_h: DMatrix<f64>,
    pub known_h: KnownInputMap,
    /// Lipschitz constant of each component of `true_h`.
    pub kappa_h: Vec<f64>,
    pub domain: IntervalVector,
    pub initial_state_box: IntervalVector,
    pub d0_box: IntervalVector,
    pub discretization_step: f64,
    pub distribution: NoiseDistribution,
}

impl BenchmarkSystem {
    pub fn initial_framer(&self) -> IntervalVector {
        self.initial_state_box.concat(&self.d0_box)
    }

    /// Width of the noise added to `d+`, per unknown input.
    pub fn unknown_input_noise_width(&self) -> Vec<f64> {
        let (lo, hi) = crate::interval::bound_linear_map(&self.w_h, &self.plant.noise_w)
            .expect("w_h matches noise_w")
            .into_bounds();
        (hi - lo).iter().copied().collect()
    }

    /// Exact successor `z+` for given noise.
    pub fn step(&self, z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.plant.dims().n;
        let x_next = self.plant.f.residual.eval(z) + self.plant.a() * z + &self.plant.w * w;
        let d_next = self.true_h.eval(z) + &self.w_h * w;
        DVector::from_iterator(z.len(), x_next.iter().take(n).chain(d_next.iter()).copied())
    }

    pub fn measure(&self, z: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.plant.g.residual.eval(z) + self.plant.c() * z + &self.plant.v * v
    }
}

fn f_map(dt: f64, u: f64) -> impl Fn(&DVector<f64>) -> DVector<f64> {
    move |z| {
        let (x1, x2, d) = (z[0], z[1], z[2]);
        DVector::from_vec(vec![
            x1 + dt * (-x1 * x2 - x2 + u + d),
            x2 + dt * (x1 * x2 + x1),
        ])
    }
}

fn g_map(z: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(vec![z[0], z[1], z[2].sin()])
}

fn h_map(dt: f64) -> impl Fn(&DVector<f64>) -> DVector<f64> {
    move |z| DVector::from_vec(vec![z[2] + dt * 0.1 * (z[0].cos() - z[1].sin())])
}

/// Range of `cos` over `[a, b]`.
pub(crate) fn cos_range(a: f64, b: f64) -> (f64, f64) {
    let (ca, cb) = (a.cos(), b.cos());
    let mut lo = ca.min(cb);
    let mut hi = ca.max(cb);
    if (a / (2.0 * PI)).ceil() * 2.0 * PI <= b {
        hi = 1.0;
    }
    if ((a - PI) / (2.0 * PI)).ceil() * 2.0 * PI + PI <= b {
        lo = -1.0;
    }
    (lo, hi)
}

fn sin_range(a: f64, b: f64) -> (f64, f64) {
    cos_range(a - PI / 2.0, b - PI / 2.0)
}

fn bounds(entries: &[[(f64, f64); 3]]) -> Result<JacobianBounds> {
    let rows = entries.len();
    let lo = DMatrix::from_fn(rows, 3, |i, j| entries[i][j].0);
    let hi = DMatrix::from_fn(rows, 3, |i, j| entries[i][j].1);
    JacobianBounds::new(lo, hi)
}

/// Benchmark with the default parameters.
pub fn predator_prey_system() -> BenchmarkSystem {
    predator_prey_system_with(&PredatorPreyParams::default())
        .expect("default parameters are consistent")
}

pub fn predator_prey_system_with(params: &PredatorPreyParams) -> Result<BenchmarkSystem> {
    let PredatorPreyParams { dt, u, .. } = *params;
    if !(dt > 0.0 && dt.is_finite()) || !u.is_finite() {
        return Err(Error::InvalidInput(format!("bad step {dt} or input {u}")));
    }
    let checks = [
        ("domain", params.domain.dim(), 3),
        ("x0_box", params.x0_box.dim(), 2),
        ("d0_box", params.d0_box.dim(), 1),
        ("noise_w", params.noise_w.dim(), 3),
        ("noise_v", params.noise_v.dim(), 3),
    ];
    for (name, got, want) in checks {
        if got != want {
            return Err(Error::InvalidInput(format!(
                "{name} must have dimension {want}, got {got}"
            )));
        }
    }
    let initial = params.x0_box.concat(&params.d0_box);
    if !params.domain.contains_box(&initial, 0.0) {
        return Err(Error::InvalidInput(
            "initial box must lie inside the domain".into(),
        ));
    }

    let dom = &params.domain;
    let (x1a, x1b) = (dom.lower()[0], dom.upper()[0]);
    let (x2a, x2b) = (dom.lower()[1], dom.upper()[1]);
    let (da, db) = (dom.lower()[2], dom.upper()[2]);

    let f_jb = bounds(&[
        [
            (1.0 - dt * x2b, 1.0 - dt * x2a),
            (-dt * (x1b + 1.0), -dt * (x1a + 1.0)),
            (dt, dt),
        ],
        [
            (dt * (x2a + 1.0), dt * (x2b + 1.0)),
            (1.0 + dt * x1a, 1.0 + dt * x1b),
            (0.0, 0.0),
        ],
    ])?;
    let g_jb = bounds(&[
        [(1.0, 1.0), (0.0, 0.0), (0.0, 0.0)],
        [(0.0, 0.0), (1.0, 1.0), (0.0, 0.0)],
        [(0.0, 0.0), (0.0, 0.0), cos_range(da, db)],
    ])?;
    let (s_lo, s_hi) = sin_range(x1a, x1b);
    let (c_lo, c_hi) = cos_range(x2a, x2b);
    let c = 0.1 * dt;
    let h_jb = bounds(&[[(-c * s_hi, -c * s_lo), (-c * c_hi, -c * c_lo), (1.0, 1.0)]])?;

    let f = VectorField::new(2, dom.clone(), f_map(dt, u));
    let g = VectorField::new(3, dom.clone(), g_map);
    let h = VectorField::new(1, dom.clone(), h_map(dt));

    let w = DMatrix::from_row_slice(2, 3, &[dt, 0.0, 0.0, 0.0, dt, 0.0]);
    let w_h = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, dt]);
    let v = DMatrix::identity(3, 3);
    let plant = PlantModel::new(
        jss_decompose(&f, &f_jb)?,
        jss_decompose(&g, &g_jb)?,
        w,
        v,
        params.noise_w.clone(),
        params.noise_v.clone(),
    )?;

    let h_noise = crate::interval::bound_linear_map(&w_h, &params.noise_w)?;
    let known_h = KnownInputMap {
        decomposition: jss_decompose(&h, &h_jb)?,
        noise: h_noise,
    };
    // Norm of the entrywise largest gradient, nudged up to stay an upper bound.
    let grad_sq: f64 = (0..3)
        .map(|j| {
            let m = h_jb.lower()[(0, j)].abs().max(h_jb.upper()[(0, j)].abs());
            m * m
        })
        .sum();
    let kappa_h = vec![grad_sq.sqrt() * (1.0 + 1e-12)];

    Ok(BenchmarkSystem {
        plant,
        true_h: h,
        w_h,
        known_h,
        kappa_h,
        domain: dom.clone(),
        initial_state_box: params.x0_box.clone(),
        d0_box: params.d0_box.clone(),
        discretization_step: dt,
        distribution: params.distribution,
    })
}

fn rows_to_matrix(
    name: &str,
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: usize,
) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput(format!(
            "{name} must be {nrows}x{ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Linear plant `x+ = A z + W w`, `d+ = H z + W_h w`, `y = C z + V v` given by rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSystemSpec {
    pub a: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    #[serde(default)]
    pub h: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    #[serde(default)]
    pub w_h: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub noise_w: IntervalVector,
    pub noise_v: IntervalVector,
    pub domain: IntervalVector,
    pub x0_box: IntervalVector,
    #[serde(default = "IntervalVector::empty_dim")]
    pub d0_box: IntervalVector,
    #[serde(default)]
    pub distribution: NoiseDistribution,
}

pub fn linear_system(spec: &LinearSystemSpec) -> Result<BenchmarkSystem> {
    let n_z = spec.domain.dim();
    let n = spec.a.len();
    if n > n_z {
        return Err(Error::InvalidInput(format!(
            "A has {n} rows but the domain has dimension {n_z}"
        )));
    }
    let p = n_z - n;
    let l = spec.c.len();
    let n_w = spec.noise_w.dim();
    let n_v = spec.noise_v.dim();
    let a = rows_to_matrix("a", &spec.a, n, n_z)?;
    let c = rows_to_matrix("c", &spec.c, l, n_z)?;
    let h = rows_to_matrix("h", &spec.h, p, n_z)?;
    let w = rows_to_matrix("w", &spec.w, n, n_w)?;
    let w_h = if spec.w_h.is_empty() {
        DMatrix::zeros(p, n_w)
    } else {
        rows_to_matrix("w_h", &spec.w_h, p, n_w)?
    };
    let v = rows_to_matrix("v", &spec.v, l, n_v)?;
    if spec.x0_box.dim() != n || spec.d0_box.dim() != p {
        return Err(Error::InvalidInput(format!(
            "x0_box must have dimension {n} and d0_box {p}"
        )));
    }
    let initial = spec.x0_box.concat(&spec.d0_box);
    if !spec.domain.contains_box(&initial, 0.0) {
        return Err(Error::InvalidInput(
            "initial box must lie inside the domain".into(),
        ));
    }
    let dom = &spec.domain;
    let decomp = |m: &DMatrix<f64>| {
        jss_decompose(
            &VectorField::linear(m.clone(), dom.clone()),
            &JacobianBounds::exact(m.clone()),
        )
    };
    let plant = PlantModel::new(
        decomp(&a)?,
        decomp(&c)?,
        w,
        v,
        spec.noise_w.clone(),
        spec.noise_v.clone(),
    )?;
    let known_h = KnownInputMap {
        decomposition: decomp(&h)?,
        noise: crate::interval::bound_linear_map(&w_h, &spec.noise_w)?,
    };
    let kappa_h = (0..p)
        .map(|j| (h.row(j).norm() * (1.0 + 1e-12)).max(crate::learner::KAPPA_MIN))
        .collect();
    Ok(BenchmarkSystem {
        plant,
        true_h: VectorField::linear(h, dom.clone()),
        w_h,
        known_h,
        kappa_h,
        domain: dom.clone(),
        initial_state_box: spec.x0_box.clone(),
        d0_box: spec.d0_box.clone(),
        discretization_step: 1.0,
        distribution: spec.distribution,
    })
}

/// Largest sampled ratio `|q_j(a) - q_j(b)| / |a - b|` per output component.
pub fn sampled_lipschitz(q: &VectorField, pairs: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dom = q.domain();
    let mut worst = vec![0.0f64; q.codim()];
    for _ in 0..pairs {
        let a = draw(&mut rng, dom, NoiseDistribution::Uniform);
        let b = draw(&mut rng, dom, NoiseDistribution::Uniform);
        let dist = (&a - &b).norm();
        if dist == 0.0 {
            continue;
        }
        let diff = q.eval(&a) - q.eval(&b);
        for (w, d) in worst.iter_mut().zip(diff.iter()) {
            *w = w.max(d.abs() / dist);
        }
    }
    worst
}

/// Ground-truth run: `states` has `K + 1` entries, the rest `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRun {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
    pub process_noise: Vec<DVector<f64>>,
    pub measurement_noise: Vec<DVector<f64>>,
}

fn draw(rng: &mut ChaCha8Rng, bx: &IntervalVector, dist: NoiseDistribution) -> DVector<f64> {
    DVector::from_iterator(
        bx.dim(),
        (0..bx.dim()).map(|i| {
            let (lo, hi) = (bx.lower()[i], bx.upper()[i]);
            if lo == hi {
                return lo;
            }
            match dist {
                NoiseDistribution::Uniform => rng.random_range(lo..=hi),
                NoiseDistribution::Extremal => {
                    if rng.random_bool(0.5) {
                        hi
                    } else {
                        lo
                    }
                }
            }
        }),
    )
}

/// Simulates `K` steps from a seeded initial state and noise sequence.
pub fn simulate_truth(system: &BenchmarkSystem, seed: u64, horizon: usize) -> Result<TruthRun> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = system.initial_framer();
    let mut z = draw(&mut rng, &init, NoiseDistribution::Uniform);
    let mut run = TruthRun {
        states: Vec::with_capacity(horizon + 1),
        measurements: Vec::with_capacity(horizon),
        process_noise: Vec::with_capacity(horizon),
        measurement_noise: Vec::with_capacity(horizon),
    };
    for k in 0..=horizon {
        if let Some(i) = (0..z.len()).find(|&i| {
            z[i] < system.domain.lower()[i] || z[i] > system.domain.upper()[i] || !z[i].is_finite()
        }) {
            return Err(Error::DomainEscape {
                step: k,
                component: i,
                value: z[i],
            });
        }
        run.states.push(z.clone());
        if k == horizon {
            break;
        }
        let w = draw(&mut rng, &system.plant.noise_w, system.distribution);
        let v = draw(&mut rng, &system.plant.noise_v, system.distribution);
        run.measurements.push(system.measure(&z, &v));
        z = system.step(&z, &w);
        run.process_noise.push(w);
        run.measurement_noise.push(v);
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::audit_jacobian_bounds;

    #[test]
    fn parameters_match_benchmark() {
        let sys = predator_prey_system();
        assert_eq!(sys.discretization_step, 0.01);
        assert_eq!(sys.initial_state_box.lower().as_slice(), &[-0.35, -0.1]);
        assert_eq!(sys.initial_state_box.upper().as_slice(), &[0.0, 0.6]);
        for bx in [&sys.plant.noise_w, &sys.plant.noise_v] {
            assert_eq!(bx.upper().as_slice(), &[0.1, 0.1, 0.1]);
            assert_eq!(bx.lower().as_slice(), &[-0.1, -0.1, -0.1]);
        }
        let d = sys.plant.dims();
        assert_eq!((d.n, d.p, d.l, d.n_w, d.n_v), (2, 1, 3, 3, 3));
    }

    #[test]
    fn one_step_from_origin() {
        let sys = predator_prey_system();
        let z = DVector::zeros(3);
        let next = sys.step(&z, &DVector::zeros(3));
        assert_eq!(next[0], 0.0);
        assert_eq!(next[1], 0.0);
        assert!((next[2] - 0.001).abs() < 1e-15);
    }

    #[test]
    fn jacobian_bounds_hold_on_domain() {
        let sys = predator_prey_system();
        let p = &sys.plant;
        for (q, jb) in [
            (&p.f.residual, &p.f.residual_jacobian),
            (&p.g.residual, &p.g.residual_jacobian),
            (
                &sys.known_h.decomposition.residual,
                &sys.known_h.decomposition.residual_jacobian,
            ),
        ] {
            let audit = audit_jacobian_bounds(q, jb, 2000, 3, 1e-7);
            assert!(audit.passed(), "{audit:?}");
        }
    }

    #[test]
    fn kappa_close_to_gradient_norm_on_grid() {
        let sys = predator_prey_system();
        assert!((sys.kappa_h[0] - (1.0f64 + 2e-6).sqrt()).abs() < 1e-6);
        // Largest gradient norm over a grid of the domain.
        let mut worst = 0.0f64;
        let n = 60;
        for i in 0..=n {
            for j in 0..=n {
                let x1 = -2.0 + 4.0 * i as f64 / n as f64;
                let x2 = -2.0 + 4.0 * j as f64 / n as f64;
                let gx1 = -0.001 * x1.sin();
                let gx2 = -0.001 * x2.cos();
                worst = worst.max((gx1 * gx1 + gx2 * gx2 + 1.0).sqrt());
            }
        }
        assert!(worst <= sys.kappa_h[0]);
        assert!(sys.kappa_h[0] - worst < 1e-7);
    }

    #[test]
    fn cos_range_cases() {
        assert_eq!(cos_range(-1.0, 1.0), (1.0f64.cos(), 1.0));
        assert_eq!(cos_range(3.0, 3.5).0, -1.0);
        let (lo, hi) = cos_range(0.1, 0.2);
        assert_eq!((lo, hi), (0.2f64.cos(), 0.1f64.cos()));
        assert_eq!(cos_range(-10.0, 10.0), (-1.0, 1.0));
    }

    #[test]
    fn simulation_is_deterministic_and_zero_noise_is_exact() {
        let sys = predator_prey_system();
        let a = simulate_truth(&sys, 7, 50).unwrap();
        let b = simulate_truth(&sys, 7, 50).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.states.len(), 51);
        assert_eq!(a.measurements.len(), 50);

        let params = PredatorPreyParams {
            noise_w: IntervalVector::symmetric(&[0.0; 3]).unwrap(),
            noise_v: IntervalVector::symmetric(&[0.0; 3]).unwrap(),
            ..Default::default()
        };
        let quiet = predator_prey_system_with(&params).unwrap();
        let run = simulate_truth(&quiet, 1, 20).unwrap();
        assert!(run
            .process_noise
            .iter()
            .all(|w| w.iter().all(|&x| x == 0.0)));
        assert!(run
            .measurement_noise
            .iter()
            .all(|v| v.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn noise_draws_in_bounds_with_uniform_mean() {
        let sys = predator_prey_system();
        let runs: Vec<TruthRun> = (0..10)
            .map(|s| simulate_truth(&sys, s, 500).unwrap())
            .collect();
        let w: Vec<&DVector<f64>> = runs.iter().flat_map(|r| r.process_noise.iter()).collect();
        let v: Vec<&DVector<f64>> = runs
            .iter()
            .flat_map(|r| r.measurement_noise.iter())
            .collect();
        assert_eq!(w.len() + v.len(), 10_000);
        for d in w.iter().chain(v.iter()) {
            assert!(d.iter().all(|x| (-0.1..=0.1).contains(x)));
        }
        // Uniform on [-0.1, 0.1] has sd 0.2/sqrt(12); the mean of N draws has sd/sqrt(N).
        let sigma = 0.2 / 12f64.sqrt() / (5000f64).sqrt();
        for series in [&w, &v] {
            for c in 0..3 {
                let mean = series.iter().map(|d| d[c]).sum::<f64>() / series.len() as f64;
                assert!(mean.abs() < 3.0 * sigma, "component {c} mean {mean}");
            }
        }
    }

    #[test]
    fn escape_is_reported() {
        let params = PredatorPreyParams {
            domain: IntervalVector::from_slices(&[-0.4, -0.2, -0.11], &[0.05, 0.65, 0.11]).unwrap(),
            ..Default::default()
        };
        let sys = predator_prey_system_with(&params).unwrap();
        let err = simulate_truth(&sys, 0, 5000).unwrap_err();
        assert!(matches!(err, Error::DomainEscape { .. }), "{err}");
    }

    #[test]
    fn sampled_lipschitz_stays_below_kappa() {
        let sys = predator_prey_system();
        let est = sampled_lipschitz(&sys.true_h, 20_000, 5);
        assert!(est[0] <= sys.kappa_h[0]);
        assert!(est[0] > 0.9);
    }

    #[test]
    fn linear_system_from_rows() {
        let spec = LinearSystemSpec {
            a: vec![vec![0.9, 0.1]],
            c: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            h: vec![vec![0.0, 0.5]],
            w: vec![vec![1.0]],
            w_h: vec![vec![0.0]],
            v: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            noise_w: IntervalVector::symmetric(&[0.01]).unwrap(),
            noise_v: IntervalVector::symmetric(&[0.01, 0.01]).unwrap(),
            domain: IntervalVector::symmetric(&[5.0, 5.0]).unwrap(),
            x0_box: IntervalVector::symmetric(&[1.0]).unwrap(),
            d0_box: IntervalVector::symmetric(&[1.0]).unwrap(),
            distribution: NoiseDistribution::Uniform,
        };
        let sys = linear_system(&spec).unwrap();
        let d = sys.plant.dims();
        assert_eq!((d.n, d.p, d.l), (1, 1, 2));
        assert!((sys.kappa_h[0] - 0.5).abs() < 1e-9);
        let z = DVector::from_vec(vec![1.0, 2.0]);
        let next = sys.step(&z, &DVector::zeros(1));
        assert!((next[0] - 1.1).abs() < 1e-15 && (next[1] - 1.0).abs() < 1e-15);
        let bad = LinearSystemSpec {
            a: vec![vec![1.0]],
            ..spec
        };
        assert!(linear_system(&bad).is_err());
    }
}
