//! Data-driven over-approximation of the unknown input map `h`.
//!
//! Each stored sample pairs an input box `[z_lo, z_hi]` with an output box for
//! the successor unknown input. With per-output Lipschitz constants `kappa_j`,
//! the envelopes
//!
//! ```text
//! lower_j(z) = max_t ( d_lo[t,j] - kappa_j |z - c_t| - s[t,j] )
//! upper_j(z) = min_t ( d_hi[t,j] + kappa_j |z - c_t| + s[t,j] )
//! ```
//!
//! enclose `h_j(z)`, where `c_t` is the input box center and `s[t,j]` a
//! per-sample slack covering the input box radius (and the width of any
//! additive noise on the unknown channel).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::interval::{IntervalVector, ORDER_SLACK};

/// Floor applied to estimated Lipschitz constants.
pub const KAPPA_MIN: f64 = 1e-9;

/// Per-output Lipschitz constants for the Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LipschitzSpec {
    constants: Vec<f64>,
}

impl LipschitzSpec {
    pub fn new(constants: Vec<f64>) -> Result<Self> {
        if let Some((j, k)) = constants
            .iter()
            .enumerate()
            .find(|(_, k)| !(k.is_finite() && **k > 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "Lipschitz constant {j} must be positive and finite, got {k}"
            )));
        }
        Ok(Self { constants })
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    pub fn dim(&self) -> usize {
        self.constants.len()
    }
}

impl TryFrom<Vec<f64>> for LipschitzSpec {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LipschitzSpec> for Vec<f64> {
    fn from(spec: LipschitzSpec) -> Self {
        spec.constants
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSample {
    pub input_box: IntervalVector,
    pub input_center: Vec<f64>,
    pub output_box: IntervalVector,
    pub slack: Vec<f64>,
    pub step: usize,
}

impl DataSample {
    fn lower_term(&self, j: usize, kappa: f64, dist: f64) -> f64 {
        self.output_box.lower()[j] - kappa * dist - self.slack[j]
    }

    fn upper_term(&self, j: usize, kappa: f64, dist: f64) -> f64 {
        self.output_box.upper()[j] + kappa * dist + self.slack[j]
    }

    fn distance_to(&self, z: &DVector<f64>) -> f64 {
        self.input_center
            .iter()
            .zip(z.iter())
            .map(|(c, v)| (v - c) * (v - c))
            .sum::<f64>()
            .sqrt()
    }

    /// Distance from the center to the farthest corner of `bx`.
    fn farthest_distance(&self, bx: &IntervalVector) -> f64 {
        self.input_center
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let a = bx.upper()[i] - c;
                let b = bx.lower()[i] - c;
                (a * a).max(b * b)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Interval data buffer plus Lipschitz constants defining the envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionModel {
    input_dim: usize,
    lipschitz: LipschitzSpec,
    #[serde(default)]
    window: Option<usize>,
    /// Width of an additive disturbance on the unknown channel, per output.
    #[serde(default)]
    output_noise: Vec<f64>,
    buffer: Vec<DataSample>,
}

impl AbstractionModel {
    pub fn new(input_dim: usize, lipschitz: LipschitzSpec) -> Self {
        let p = lipschitz.dim();
        Self {
            input_dim,
            lipschitz,
            window: None,
            output_noise: vec![0.0; p],
            buffer: Vec::new(),
        }
    }

    /// Keep only the `window` most recent samples (`None` keeps everything).
    pub fn with_window(mut self, window: Option<usize>) -> Result<Self> {
        if window == Some(0) {
            return Err(Error::InvalidInput("window must be at least 1".into()));
        }
        self.window = window;
        self.prune();
        Ok(self)
    }

    /// Declares `d+ = h(z) + eta` with `eta` confined to a box of the given widths.
    pub fn with_output_noise(mut self, widths: Vec<f64>) -> Result<Self> {
        check_dim("output noise widths", self.output_dim(), widths.len())?;
        if widths.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput(
                "output noise widths must be finite and nonnegative".into(),
            ));
        }
        if !self.buffer.is_empty() {
            return Err(Error::InvalidInput(
                "output noise must be set before any sample is ingested".into(),
            ));
        }
        self.output_noise = widths;
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.lipschitz.dim()
    }

    pub fn lipschitz(&self) -> &LipschitzSpec {
        &self.lipschitz
    }

    pub fn window(&self) -> Option<usize> {
        self.window
    }

    pub fn output_noise(&self) -> &[f64] {
        &self.output_noise
    }

    pub fn samples(&self) -> &[DataSample] {
        &self.buffer
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    fn prune(&mut self) {
        if let Some(t) = self.window {
            if self.buffer.len() > t {
                let excess = self.buffer.len() - t;
                self.buffer.drain(..excess);
            }
        }
    }

    /// Appends one sample; `step` must exceed every stored step.
    pub fn ingest_sample(
        &mut self,
        input_box: IntervalVector,
        output_box: IntervalVector,
        step: usize,
    ) -> Result<()> {
        check_dim("sample input box", self.input_dim, input_box.dim())?;
        check_dim("sample output box", self.output_dim(), output_box.dim())?;
        if let Some(last) = self.buffer.last() {
            if step <= last.step {
                return Err(Error::InvalidInput(format!(
                    "sample step {step} does not follow previous step {}",
                    last.step
                )));
            }
        }
        let (center, width) = input_box.midpoint_width();
        let radius = 0.5 * width.norm();
        let slack = self
            .lipschitz
            .constants()
            .iter()
            .zip(&self.output_noise)
            .map(|(k, noise)| k * radius + noise)
            .collect();
        self.buffer.push(DataSample {
            input_box,
            input_center: center.iter().copied().collect(),
            output_box,
            slack,
            step,
        });
        self.prune();
        Ok(())
    }

    /// Envelope `[lower(z), upper(z)]` at a point.
    pub fn eval_envelope(&self, z: &DVector<f64>) -> Result<IntervalVector> {
        check_dim("envelope query", self.input_dim, z.len())?;
        if self.buffer.is_empty() {
            return Err(Error::NoData);
        }
        let dists: Vec<f64> = self.buffer.iter().map(|s| s.distance_to(z)).collect();
        self.fold_terms(&dists)
    }

    /// Box-wide bounds `(h_lo*, h_hi*)` with `h_lo* <= h(z) <= h_hi*` for every `z` in `bx`.
    ///
    /// Each sample's term is evaluated at its farthest corner of `bx`, which is
    /// where the lower term is smallest and the upper term is largest.
    pub fn box_bounds(&self, bx: &IntervalVector) -> Result<(DVector<f64>, DVector<f64>)> {
        check_dim("box_bounds query", self.input_dim, bx.dim())?;
        if self.buffer.is_empty() {
            return Err(Error::NoData);
        }
        let dists: Vec<f64> = self
            .buffer
            .iter()
            .map(|s| s.farthest_distance(bx))
            .collect();
        let env = self.fold_terms(&dists)?;
        Ok(env.into_bounds())
    }

    fn fold_terms(&self, dists: &[f64]) -> Result<IntervalVector> {
        let p = self.output_dim();
        let mut lower = DVector::from_element(p, f64::NEG_INFINITY);
        let mut upper = DVector::from_element(p, f64::INFINITY);
        for (sample, &dist) in self.buffer.iter().zip(dists) {
            for j in 0..p {
                let kappa = self.lipschitz.constants()[j];
                lower[j] = lower[j].max(sample.lower_term(j, kappa, dist));
                upper[j] = upper[j].min(sample.upper_term(j, kappa, dist));
            }
        }
        for j in 0..p {
            if lower[j] - upper[j] > ORDER_SLACK {
                return Err(Error::InconsistentData {
                    output: j,
                    lower: lower[j],
                    upper: upper[j],
                });
            }
        }
        IntervalVector::new(lower, upper)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        check_dim(
            "output noise widths",
            self.output_dim(),
            self.output_noise.len(),
        )?;
        if self.window == Some(0) {
            return Err(Error::InvalidInput("window must be at least 1".into()));
        }
        let mut last = None;
        for s in &self.buffer {
            check_dim("sample input box", self.input_dim, s.input_box.dim())?;
            check_dim("sample center", self.input_dim, s.input_center.len())?;
            check_dim("sample output box", self.output_dim(), s.output_box.dim())?;
            check_dim("sample slack", self.output_dim(), s.slack.len())?;
            if s.slack.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidInput(
                    "sample slack must be nonnegative".into(),
                ));
            }
            if last.is_some_and(|l| s.step <= l) {
                return Err(Error::InvalidInput("sample steps must increase".into()));
            }
            last = Some(s.step);
        }
        Ok(())
    }
}

/// Corner of `bx` farthest from `anchor` in Euclidean distance; the upper bound wins ties.
pub fn farthest_corner(bx: &IntervalVector, anchor: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(bx.dim(), |i, _| {
        let (lo, hi) = (bx.lower()[i], bx.upper()[i]);
        if (hi - anchor[i]).abs() >= (lo - anchor[i]).abs() {
            hi
        } else {
            lo
        }
    })
}

/// Data-driven Lipschitz estimate from pessimistic output gaps between sample pairs.
pub fn estimate_lipschitz(samples: &[DataSample], safety_factor: f64) -> Result<LipschitzSpec> {
    if !(safety_factor >= 1.0 && safety_factor.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "safety factor must be finite and >= 1, got {safety_factor}"
        )));
    }
    let Some(first) = samples.first() else {
        return Err(Error::NoSlope);
    };
    let p = first.output_box.dim();
    let mut slopes = vec![0.0f64; p];
    let mut any_pair = false;
    for (ia, a) in samples.iter().enumerate() {
        check_dim("sample output box", p, a.output_box.dim())?;
        for b in &samples[ia + 1..] {
            let dist = a
                .input_center
                .iter()
                .zip(&b.input_center)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            if dist <= 0.0 {
                continue;
            }
            any_pair = true;
            for (j, slope) in slopes.iter_mut().enumerate() {
                let gap = (a.output_box.lower()[j] - b.output_box.upper()[j])
                    .max(b.output_box.lower()[j] - a.output_box.upper()[j])
                    .max(0.0);
                *slope = slope.max(gap / dist);
            }
        }
    }
    if !any_pair {
        return Err(Error::NoSlope);
    }
    LipschitzSpec::new(
        slopes
            .into_iter()
            .map(|s| (safety_factor * s).max(KAPPA_MIN))
            .collect(),
    )
}
