//! Interval framer recursion for the augmented state `z = [x; d]`.
//!
//! One step maps the current framer `[z_lo, z_hi]` and a measurement `y` to
//!
//! ```text
//! z_lo+ = mu_lo + (LC)- z_lo - (LC)+ z_hi + L y + L- psi_d(z_lo, z_hi) - L+ psi_d(z_hi, z_lo)
//!         + W^+ w_lo - W^- w_hi + (LV)- v_lo - (LV)+ v_hi
//! z_hi+ = mu_hi + (LC)- z_hi - (LC)+ z_lo + L y + L- psi_d(z_hi, z_lo) - L+ psi_d(z_lo, z_hi)
//!         + W^+ w_hi - W^- w_lo + (LV)- v_hi - (LV)+ v_lo
//! ```
//!
//! where `W` is the augmented process-noise matrix (zero rows for `d`), the
//! `x` rows of `mu` come from the JSS decomposition of `f`, and the `d` rows
//! come from the box bounds of the learned abstraction model (or from an
//! exactly known `h` in bypass mode).

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::decomposition::JssDecomposition;
use crate::error::{check_dim, Error, Result};
use crate::interval::{split_unchecked, IntervalVector};
use crate::learner::AbstractionModel;

/// Framer order violations up to this size are clamped; larger ones abort.
pub const DIVERGENCE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub p: usize,
    pub l: usize,
    pub n_w: usize,
    pub n_v: usize,
}

impl Dims {
    pub fn n_z(&self) -> usize {
        self.n + self.p
    }
}

/// Known part of the augmented plant.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub f: JssDecomposition,
    pub g: JssDecomposition,
    pub w: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub noise_w: IntervalVector,
    pub noise_v: IntervalVector,
    w_hat: DMatrix<f64>,
    domain: IntervalVector,
    dims: Dims,
    clip_to_domain: bool,
}

impl PlantModel {
    pub fn new(
        f: JssDecomposition,
        g: JssDecomposition,
        w: DMatrix<f64>,
        v: DMatrix<f64>,
        noise_w: IntervalVector,
        noise_v: IntervalVector,
    ) -> Result<Self> {
        let domain = f.residual.domain().clone();
        let n_z = domain.dim();
        let n = f.residual.codim();
        if n > n_z {
            return Err(Error::InvalidInput(format!(
                "f has {n} outputs but the augmented state has only {n_z} components"
            )));
        }
        check_dim("g arity", n_z, g.residual.arity())?;
        if g.residual.domain() != &domain {
            return Err(Error::InvalidInput("f and g must share one domain".into()));
        }
        let l = g.residual.codim();
        check_dim("W rows", n, w.nrows())?;
        check_dim("V rows", l, v.nrows())?;
        check_dim("process noise dim", w.ncols(), noise_w.dim())?;
        check_dim("measurement noise dim", v.ncols(), noise_v.dim())?;
        let dims = Dims {
            n,
            p: n_z - n,
            l,
            n_w: w.ncols(),
            n_v: v.ncols(),
        };
        let mut w_hat = DMatrix::zeros(n_z, dims.n_w);
        w_hat.rows_mut(0, n).copy_from(&w);
        Ok(Self {
            f,
            g,
            w,
            v,
            noise_w,
            noise_v,
            w_hat,
            domain,
            dims,
            clip_to_domain: true,
        })
    }

    /// Intersect every new framer with the domain box (on by default).
    pub fn with_domain_clipping(mut self, clip: bool) -> Self {
        self.clip_to_domain = clip;
        self
    }

    pub fn clips_to_domain(&self) -> bool {
        self.clip_to_domain
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn domain(&self) -> &IntervalVector {
        &self.domain
    }

    /// `[W; 0]`.
    pub fn w_hat(&self) -> &DMatrix<f64> {
        &self.w_hat
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.f.linear_part
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.g.linear_part
    }

    /// Copy with both noise boxes replaced.
    pub fn with_noise(&self, noise_w: IntervalVector, noise_v: IntervalVector) -> Result<Self> {
        check_dim("process noise dim", self.dims.n_w, noise_w.dim())?;
        check_dim("measurement noise dim", self.dims.n_v, noise_v.dim())?;
        Ok(Self {
            noise_w,
            noise_v,
            ..self.clone()
        })
    }
}

/// Exactly known unknown-input map `d+ = h(z) + eta`, `eta` in `noise`.
#[derive(Debug, Clone)]
pub struct KnownInputMap {
    pub decomposition: JssDecomposition,
    pub noise: IntervalVector,
}

/// Source of the `d` rows of the framer recursion.
#[derive(Debug, Clone)]
pub enum InputModel {
    Learned(AbstractionModel),
    Known(KnownInputMap),
}

impl InputModel {
    pub fn learned(&self) -> Option<&AbstractionModel> {
        match self {
            InputModel::Learned(m) => Some(m),
            InputModel::Known(_) => None,
        }
    }

    fn bounds(
        &self,
        plant: &PlantModel,
        framer: &IntervalVector,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let Dims { n, p, .. } = plant.dims;
        match self {
            InputModel::Learned(model) => {
                check_dim("learner outputs", p, model.output_dim())?;
                if model.is_empty() {
                    // No data yet: the only a priori enclosure of d+ is the domain.
                    Ok(plant.domain.rows(n..n + p).into_bounds())
                } else {
                    model.box_bounds(framer)
                }
            }
            InputModel::Known(known) => {
                let (lo, hi) = known
                    .decomposition
                    .enclose(framer.lower(), framer.upper())?;
                Ok((lo + known.noise.lower(), hi + known.noise.upper()))
            }
        }
    }
}

/// Current framer, gain, and step index.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub gain: DMatrix<f64>,
    pub step: usize,
}

impl ObserverState {
    pub fn new(init: &IntervalVector, gain: DMatrix<f64>) -> Self {
        Self {
            lower: init.lower().clone(),
            upper: init.upper().clone(),
            gain,
            step: 0,
        }
    }

    pub fn framer(&self) -> Result<IntervalVector> {
        IntervalVector::new(self.lower.clone(), self.upper.clone())
    }

    /// Observer error `upper - lower`.
    pub fn error(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }
}

/// Advances the framer by one step and feeds the learner the new sample.
pub fn observer_step(
    plant: &PlantModel,
    model: &mut InputModel,
    st: &ObserverState,
    y: &DVector<f64>,
) -> Result<ObserverState> {
    let dims = plant.dims;
    let n_z = dims.n_z();
    check_dim("measurement", dims.l, y.len())?;
    check_dim("framer", n_z, st.lower.len())?;
    check_dim("gain rows", n_z, st.gain.nrows())?;
    check_dim("gain cols", dims.l, st.gain.ncols())?;
    let framer = st.framer()?;
    let (lo, hi) = (framer.lower(), framer.upper());
    let next_step = st.step + 1;

    let (f_lo, f_hi) = plant.f.enclose(lo, hi)?;
    let (h_lo, h_hi) = model.bounds(plant, &framer)?;
    let mu_lo = stack(&f_lo, &h_lo);
    let mu_hi = stack(&f_hi, &h_hi);

    let gain = &st.gain;
    let lc = split_unchecked(&(gain * plant.c()));
    let lv = split_unchecked(&(gain * &plant.v));
    let l_split = split_unchecked(gain);
    let w_split = split_unchecked(&plant.w_hat);
    let (psi_lo, psi_hi) = plant.g.residual_bounds(lo, hi)?;
    let ly = gain * y;
    let (w_lo, w_hi) = (plant.noise_w.lower(), plant.noise_w.upper());
    let (v_lo, v_hi) = (plant.noise_v.lower(), plant.noise_v.upper());

    let new_lo = &mu_lo + &lc.negative * lo - &lc.positive * hi + &ly + &l_split.negative * &psi_lo
        - &l_split.positive * &psi_hi
        + &w_split.positive * w_lo
        - &w_split.negative * w_hi
        + &lv.negative * v_lo
        - &lv.positive * v_hi;
    let new_hi = &mu_hi + &lc.negative * hi - &lc.positive * lo + &ly + &l_split.negative * &psi_hi
        - &l_split.positive * &psi_lo
        + &w_split.positive * w_hi
        - &w_split.negative * w_lo
        + &lv.negative * v_hi
        - &lv.positive * v_lo;

    let mut next = order_checked(new_lo, new_hi, next_step)?;
    if plant.clip_to_domain {
        next = clip(&next, &plant.domain, next_step)?;
    }

    if let InputModel::Learned(m) = model {
        let d_next = next.rows(dims.n..n_z);
        m.ingest_sample(framer, d_next, st.step)?;
    }

    let (lower, upper) = next.into_bounds();
    Ok(ObserverState {
        lower,
        upper,
        gain: st.gain.clone(),
        step: next_step,
    })
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

fn order_checked(lo: DVector<f64>, hi: DVector<f64>, step: usize) -> Result<IntervalVector> {
    let (mut lo, mut hi) = (lo, hi);
    for i in 0..lo.len() {
        if !lo[i].is_finite() || !hi[i].is_finite() || lo[i] - hi[i] > DIVERGENCE_SLACK {
            return Err(Error::ObserverDivergence {
                step,
                component: i,
                lower: lo[i],
                upper: hi[i],
            });
        }
        if lo[i] > hi[i] {
            let mid = 0.5 * (lo[i] + hi[i]);
            lo[i] = mid;
            hi[i] = mid;
        }
    }
    IntervalVector::new(lo, hi)
}

fn clip(framer: &IntervalVector, domain: &IntervalVector, step: usize) -> Result<IntervalVector> {
    framer.intersect(domain).ok_or_else(|| {
        let i = (0..framer.dim())
            .find(|&i| {
                framer.lower()[i] > domain.upper()[i] || framer.upper()[i] < domain.lower()[i]
            })
            .unwrap_or(0);
        Error::ObserverDivergence {
            step,
            component: i,
            lower: framer.lower()[i].max(domain.lower()[i]),
            upper: framer.upper()[i].min(domain.upper()[i]),
        }
    })
}

/// One row of a framer trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FramerRecord {
    pub k: usize,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub eps: DVector<f64>,
    pub eps_norm: f64,
}

impl FramerRecord {
    fn from_state(st: &ObserverState) -> Self {
        let eps = st.error();
        Self {
            k: st.step,
            eps_norm: eps.norm(),
            lower: st.lower.clone(),
            upper: st.upper.clone(),
            eps,
        }
    }

    pub fn framer(&self) -> Result<IntervalVector> {
        IntervalVector::new(self.lower.clone(), self.upper.clone())
    }
}

#[derive(Debug, Clone)]
pub struct FramerTrajectory {
    pub records: Vec<FramerRecord>,
    pub model: InputModel,
}

impl FramerTrajectory {
    pub fn sup_eps_norm(&self) -> f64 {
        self.records.iter().map(|r| r.eps_norm).fold(0.0, f64::max)
    }

    pub fn final_record(&self) -> &FramerRecord {
        self.records
            .last()
            .expect("trajectory always holds the initial framer")
    }

    /// CSV with header `k,z_lo_*,z_hi_*,eps_*,eps_norm2`; 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n_z = self.records.first().map_or(0, |r| r.lower.len());
        let mut header = vec!["k".to_string()];
        for prefix in ["z_lo", "z_hi", "eps"] {
            header.extend((1..=n_z).map(|i| format!("{prefix}_{i}")));
        }
        header.push("eps_norm2".into());
        writeln!(out, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![r.k.to_string()];
            for v in r.lower.iter().chain(r.upper.iter()).chain(r.eps.iter()) {
                row.push(format!("{v:.16e}"));
            }
            row.push(format!("{:.16e}", r.eps_norm));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is ASCII"))
    }
}

/// Streaming driver around [`observer_step`].
#[derive(Debug)]
pub struct IntervalObserver<'a> {
    plant: &'a PlantModel,
    model: InputModel,
    state: ObserverState,
    records: Vec<FramerRecord>,
}

impl<'a> IntervalObserver<'a> {
    pub fn new(
        plant: &'a PlantModel,
        model: InputModel,
        init: &IntervalVector,
        gain: DMatrix<f64>,
    ) -> Result<Self> {
        let dims = plant.dims();
        check_dim("initial framer", dims.n_z(), init.dim())?;
        check_dim("gain rows", dims.n_z(), gain.nrows())?;
        check_dim("gain cols", dims.l, gain.ncols())?;
        let state = ObserverState::new(init, gain);
        let records = vec![FramerRecord::from_state(&state)];
        Ok(Self {
            plant,
            model,
            state,
            records,
        })
    }

    pub fn state(&self) -> &ObserverState {
        &self.state
    }

    pub fn model(&self) -> &InputModel {
        &self.model
    }

    pub fn push(&mut self, y: &DVector<f64>) -> Result<&ObserverState> {
        self.state = observer_step(self.plant, &mut self.model, &self.state, y)?;
        self.records.push(FramerRecord::from_state(&self.state));
        Ok(&self.state)
    }

    pub fn finish(self) -> FramerTrajectory {
        FramerTrajectory {
            records: self.records,
            model: self.model,
        }
    }
}

/// Runs the observer over a batch of measurements.
pub fn run_observer(
    plant: &PlantModel,
    model: InputModel,
    init: &IntervalVector,
    gain: DMatrix<f64>,
    measurements: &[DVector<f64>],
) -> Result<FramerTrajectory> {
    let mut obs = IntervalObserver::new(plant, model, init, gain)?;
    for y in measurements {
        obs.push(y)?;
    }
    Ok(obs.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{
        predator_prey_system, predator_prey_system_with, simulate_truth, PredatorPreyParams,
    };
    use crate::learner::LipschitzSpec;

    fn learner(sys: &crate::benchmark::BenchmarkSystem) -> InputModel {
        let m = AbstractionModel::new(3, LipschitzSpec::new(sys.kappa_h.clone()).unwrap())
            .with_output_noise(sys.unknown_input_noise_width())
            .unwrap();
        InputModel::Learned(m)
    }

    fn quiet_params() -> PredatorPreyParams {
        PredatorPreyParams {
            noise_w: IntervalVector::symmetric(&[0.0; 3]).unwrap(),
            noise_v: IntervalVector::symmetric(&[0.0; 3]).unwrap(),
            ..Default::default()
        }
    }

    #[test]
    fn degenerate_setup_tracks_truth_exactly() {
        let sys = predator_prey_system_with(&quiet_params()).unwrap();
        let truth = simulate_truth(&sys, 3, 200).unwrap();
        let init = IntervalVector::point(truth.states[0].clone());
        let traj = run_observer(
            &sys.plant,
            InputModel::Known(sys.known_h.clone()),
            &init,
            DMatrix::zeros(3, 3),
            &truth.measurements,
        )
        .unwrap();
        for (rec, z) in traj.records.iter().zip(&truth.states) {
            assert!((&rec.lower - z).amax() < 1e-12, "step {}", rec.k);
            assert!((&rec.upper - z).amax() < 1e-12, "step {}", rec.k);
        }
    }

    #[test]
    fn zero_length_run_keeps_initial_framer() {
        let sys = predator_prey_system();
        let init = sys.initial_framer();
        let traj =
            run_observer(&sys.plant, learner(&sys), &init, DMatrix::zeros(3, 3), &[]).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.records[0].lower, *init.lower());
        assert_eq!(traj.records[0].upper, *init.upper());
    }

    #[test]
    fn runs_are_bit_identical() {
        let sys = predator_prey_system();
        let truth = simulate_truth(&sys, 5, 100).unwrap();
        let gain = DMatrix::from_element(3, 3, 0.01);
        let run = || {
            run_observer(
                &sys.plant,
                learner(&sys),
                &sys.initial_framer(),
                gain.clone(),
                &truth.measurements,
            )
            .unwrap()
            .to_csv_string()
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn gain_off_ignores_measurements() {
        let sys = predator_prey_system();
        let init = sys.initial_framer();
        let st = ObserverState::new(&init, DMatrix::zeros(3, 3));
        let mut m1 = learner(&sys);
        let mut m2 = learner(&sys);
        let a = observer_step(&sys.plant, &mut m1, &st, &DVector::zeros(3)).unwrap();
        let b = observer_step(&sys.plant, &mut m2, &st, &DVector::from_element(3, 5.0)).unwrap();
        assert_eq!(a, b);
        // Open-loop propagation: f rows are the decomposition enclosure plus noise.
        let (f_lo, f_hi) = sys.plant.f.enclose(init.lower(), init.upper()).unwrap();
        let dw = sys.plant.w.abs() * DVector::from_element(3, 0.1);
        let clip = sys.plant.domain();
        for i in 0..2 {
            assert!((a.lower[i] - (f_lo[i] - dw[i]).max(clip.lower()[i])).abs() < 1e-15);
            assert!((a.upper[i] - (f_hi[i] + dw[i]).min(clip.upper()[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn measurement_enters_through_gain() {
        let sys = predator_prey_system_with(&quiet_params())
            .unwrap()
            .plant
            .with_domain_clipping(false);
        let init = IntervalVector::from_slices(&[-0.1, -0.1, -0.1], &[0.1, 0.1, 0.1]).unwrap();
        let gain = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.1 } else { 0.0 });
        let st = ObserverState::new(&init, gain.clone());
        let bench = predator_prey_system();
        let mut m = InputModel::Known(bench.known_h.clone());
        let y0 = DVector::zeros(3);
        let y1 = DVector::from_vec(vec![0.01, 0.02, 0.03]);
        let a = observer_step(&sys, &mut m, &st, &y0).unwrap();
        let b = observer_step(&sys, &mut m, &st, &y1).unwrap();
        let shift = &gain * &y1;
        assert!((&b.lower - &a.lower - &shift).amax() < 1e-15);
        assert!((&b.upper - &a.upper - &shift).amax() < 1e-15);
    }

    #[test]
    fn wider_noise_never_narrows_framer() {
        let sys = predator_prey_system();
        let truth = simulate_truth(&sys, 9, 150).unwrap();
        let wide = sys
            .plant
            .with_noise(
                IntervalVector::symmetric(&[0.2, 0.15, 0.1]).unwrap(),
                IntervalVector::symmetric(&[0.1, 0.3, 0.1]).unwrap(),
            )
            .unwrap();
        let gain = DMatrix::from_element(3, 3, 0.02);
        let init = sys.initial_framer();
        let narrow_run = run_observer(
            &sys.plant,
            InputModel::Known(sys.known_h.clone()),
            &init,
            gain.clone(),
            &truth.measurements,
        )
        .unwrap();
        let wide_run = run_observer(
            &wide,
            InputModel::Known(sys.known_h.clone()),
            &init,
            gain,
            &truth.measurements,
        )
        .unwrap();
        for (a, b) in narrow_run.records.iter().zip(&wide_run.records) {
            for i in 0..3 {
                assert!(b.eps[i] >= a.eps[i] - 1e-12, "step {} component {i}", a.k);
            }
        }
    }

    #[test]
    fn benchmark_enclosure_few_seeds() {
        let sys = predator_prey_system();
        for seed in 0..5 {
            let truth = simulate_truth(&sys, seed, 300).unwrap();
            for gain in [DMatrix::zeros(3, 3), DMatrix::from_element(3, 3, 0.05)] {
                let traj = run_observer(
                    &sys.plant,
                    learner(&sys),
                    &sys.initial_framer(),
                    gain,
                    &truth.measurements,
                )
                .unwrap();
                for (rec, z) in traj.records.iter().zip(&truth.states) {
                    assert!(
                        rec.framer().unwrap().contains(z, 1e-9),
                        "seed {seed} step {}",
                        rec.k
                    );
                }
            }
        }
    }

    #[test]
    fn learner_sees_only_framer_boxes() {
        let sys = predator_prey_system();
        let truth = simulate_truth(&sys, 2, 40).unwrap();
        let traj = run_observer(
            &sys.plant,
            learner(&sys),
            &sys.initial_framer(),
            DMatrix::zeros(3, 3),
            &truth.measurements,
        )
        .unwrap();
        let model = traj.model.learned().unwrap();
        assert_eq!(model.len(), 40);
        for s in model.samples() {
            let now = traj.records[s.step].framer().unwrap();
            let next = traj.records[s.step + 1].framer().unwrap().rows(2..3);
            assert_eq!(s.input_box, now);
            assert_eq!(s.output_box, next);
        }
    }

    #[test]
    fn envelope_at_probe_tightens_over_run() {
        let sys = predator_prey_system();
        let truth = simulate_truth(&sys, 4, 120).unwrap();
        let mut obs = IntervalObserver::new(
            &sys.plant,
            learner(&sys),
            &sys.initial_framer(),
            DMatrix::zeros(3, 3),
        )
        .unwrap();
        let probe = DVector::from_vec(vec![-0.1, 0.2, 0.0]);
        let mut last = f64::INFINITY;
        for y in &truth.measurements {
            obs.push(y).unwrap();
            let env = obs
                .model()
                .learned()
                .unwrap()
                .eval_envelope(&probe)
                .unwrap();
            let w = env.width()[0];
            assert!(w <= last + 1e-15);
            last = w;
        }
    }

    #[test]
    fn non_finite_gain_reports_divergence() {
        let sys = predator_prey_system();
        let mut gain = DMatrix::zeros(3, 3);
        gain[(0, 0)] = f64::NAN;
        let st = ObserverState::new(&sys.initial_framer(), gain);
        let mut m = learner(&sys);
        let err = observer_step(&sys.plant, &mut m, &st, &DVector::zeros(3)).unwrap_err();
        assert!(
            matches!(err, Error::ObserverDivergence { step: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn wrong_measurement_dimension_rejected() {
        let sys = predator_prey_system();
        let st = ObserverState::new(&sys.initial_framer(), DMatrix::zeros(3, 3));
        let mut m = learner(&sys);
        assert!(matches!(
            observer_step(&sys.plant, &mut m, &st, &DVector::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_header_and_round_trip_precision() {
        let sys = predator_prey_system();
        let truth = simulate_truth(&sys, 1, 3).unwrap();
        let traj = run_observer(
            &sys.plant,
            learner(&sys),
            &sys.initial_framer(),
            DMatrix::zeros(3, 3),
            &truth.measurements,
        )
        .unwrap();
        let csv = traj.to_csv_string().unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,z_lo_1,z_lo_2,z_lo_3,z_hi_1,z_hi_2,z_hi_3,eps_1,eps_2,eps_3,eps_norm2"
        );
        for (line, rec) in lines.zip(&traj.records) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[0].parse::<usize>().unwrap(), rec.k);
            let parsed: Vec<f64> = fields[1..].iter().map(|f| f.parse().unwrap()).collect();
            assert_eq!(&parsed[0..3], rec.lower.as_slice());
            assert_eq!(&parsed[3..6], rec.upper.as_slice());
            assert_eq!(parsed[9], rec.eps_norm);
        }
    }

    #[test]
    fn plant_has_stacked_noise_matrix() {
        let sys = predator_prey_system();
        let w_hat = sys.plant.w_hat();
        assert_eq!(w_hat.shape(), (3, 3));
        assert_eq!(w_hat.rows(0, 2), sys.plant.w);
        assert!(w_hat.row(2).iter().all(|&x| x == 0.0));
    }
}
