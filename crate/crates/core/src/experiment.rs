//! JSON-configured experiments: synthesis, observer runs, offline learning,
//! and property audits.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::{
    linear_system, predator_prey_system_with, sampled_lipschitz, simulate_truth, BenchmarkSystem,
    LinearSystemSpec, NoiseDistribution, PredatorPreyParams, TruthRun,
};
use crate::decomposition::{audit_diagonal_identity, audit_sign_stability, JssDecomposition};
use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::learner::{estimate_lipschitz, AbstractionModel, LipschitzSpec};
use crate::observer::{run_observer, FramerTrajectory, InputModel};
use crate::synthesis::{
    assemble_sdp, parse_solution_vector, synthesize_gain, verify_certificate, AssembledSdp,
    ConicBackend, ExternalSolution, GainCertificate, IpmSolver, SynthesisInput, SynthesisOptions,
    SynthesisOutcome, VerificationReport,
};

/// Elementwise slack used when counting enclosure violations.
pub const ENCLOSURE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    PredatorPrey(PredatorPreyParams),
    Linear(LinearSystemSpec),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub w: Option<IntervalVector>,
    pub v: Option<IntervalVector>,
    pub distribution: Option<NoiseDistribution>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainSource {
    #[default]
    Zero,
    Synthesize,
    /// Certificate JSON written by `synth`; re-verified before use.
    File(PathBuf),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    #[default]
    Learned,
    KnownH,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverConfig {
    pub horizon: usize,
    pub seed: u64,
    /// Number of consecutive seeds starting at `seed`.
    pub runs: usize,
    pub gain: GainSource,
    pub mode: InputMode,
    pub clip_to_domain: bool,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            horizon: 500,
            seed: 0,
            runs: 1,
            gain: GainSource::Zero,
            mode: InputMode::Learned,
            clip_to_domain: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaSetting {
    /// The system's own Lipschitz bound for `h`.
    #[default]
    System,
    /// Estimated from data (only for `learn`).
    Auto,
    Value(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub kappa: KappaSetting,
    pub window: Option<usize>,
    pub safety_factor: f64,
    /// Interval data for `learn`.
    pub data: Option<PathBuf>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            kappa: KappaSetting::System,
            window: None,
            safety_factor: 1.5,
            data: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendConfig {
    #[default]
    Embedded,
    /// Primal vector from an external SDPA run (`xVec` section or bare list).
    External(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub options: SynthesisOptions,
    pub backend: BackendConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub trajectory: String,
    pub model: String,
    pub summary: String,
    pub certificate: String,
    pub check: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            trajectory: "trajectory.csv".into(),
            model: "model.json".into(),
            summary: "summary.json".into(),
            certificate: "certificate.json".into(),
            check: "check.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub observer: ObserverConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn config_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    /// Parses and validates; errors name the offending key.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." {
                "<root>".to_string()
            } else {
                path
            };
            config_err(&key, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.observer.horizon == 0 {
            return Err(config_err("observer.horizon", "must be at least 1"));
        }
        if self.observer.runs == 0 {
            return Err(config_err("observer.runs", "must be at least 1"));
        }
        if self.learner.window == Some(0) {
            return Err(config_err("learner.window", "must be at least 1"));
        }
        let sf = self.learner.safety_factor;
        if !(sf.is_finite() && sf >= 1.0) {
            return Err(config_err(
                "learner.safety_factor",
                "must be finite and >= 1",
            ));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.observer.runs as u64)
            .map(|i| self.observer.seed + i)
            .collect()
    }
}

/// One observer run against simulated ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub horizon: usize,
    pub violations: usize,
    pub sup_eps_norm: f64,
    pub initial_eps_norm: f64,
    pub final_eps: Vec<f64>,
    pub final_eps_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub truth: TruthRun,
    pub trajectory: FramerTrajectory,
    pub summary: RunSummary,
}

/// Aggregate over all seeds, sorted by seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub horizon: usize,
    pub violations: usize,
    pub sup_eps_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub passed: bool,
    pub items: Vec<CheckItem>,
}

/// Counts `(step, component)` pairs where the truth leaves the framer.
pub fn count_violations(traj: &FramerTrajectory, states: &[DVector<f64>]) -> usize {
    traj.records
        .iter()
        .zip(states)
        .map(|(r, z)| {
            (0..z.len())
                .filter(|&i| {
                    z[i] < r.lower[i] - ENCLOSURE_SLACK || z[i] > r.upper[i] + ENCLOSURE_SLACK
                })
                .count()
        })
        .sum()
}

#[derive(Debug, Clone, Deserialize)]
struct LearnSample {
    #[serde(alias = "input")]
    input_box: IntervalVector,
    #[serde(alias = "output")]
    output_box: IntervalVector,
}

#[derive(Debug, Clone, Deserialize)]
struct LearnData {
    #[serde(alias = "buffer")]
    samples: Vec<LearnSample>,
}

/// A configured experiment with its system built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub system: BenchmarkSystem,
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err("<file>", format!("cannot read {}: {e}", path.display())))?;
        let cfg = ExperimentConfig::from_json_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(cfg, base)
    }

    pub fn new(config: ExperimentConfig, base_dir: PathBuf) -> Result<Self> {
        let mut system = match &config.system {
            SystemConfig::PredatorPrey(params) => {
                let mut params = params.clone();
                if let Some(w) = &config.noise.w {
                    params.noise_w = w.clone();
                }
                if let Some(v) = &config.noise.v {
                    params.noise_v = v.clone();
                }
                if let Some(d) = config.noise.distribution {
                    params.distribution = d;
                }
                predator_prey_system_with(&params)
            }
            SystemConfig::Linear(spec) => {
                let mut spec = spec.clone();
                if let Some(w) = &config.noise.w {
                    spec.noise_w = w.clone();
                }
                if let Some(v) = &config.noise.v {
                    spec.noise_v = v.clone();
                }
                if let Some(d) = config.noise.distribution {
                    spec.distribution = d;
                }
                linear_system(&spec)
            }
        }
        .map_err(|e| config_err("system", e.to_string()))?;
        system.plant = system
            .plant
            .with_domain_clipping(config.observer.clip_to_domain);
        Ok(Self {
            config,
            base_dir,
            system,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.resolve(&self.config.output.dir).join(name)
    }

    pub fn synthesis_input(&self) -> Result<SynthesisInput> {
        SynthesisInput::from_plant(&self.system.plant, self.system.kappa_h.clone())
    }

    pub fn assemble(&self) -> Result<AssembledSdp> {
        assemble_sdp(&self.synthesis_input()?, &self.config.synthesis.options)
    }

    fn backend(&self) -> Result<Box<dyn ConicBackend>> {
        match &self.config.synthesis.backend {
            BackendConfig::Embedded => {
                Ok(Box::new(IpmSolver::new(self.config.synthesis.options.ipm)))
            }
            BackendConfig::External(path) => {
                let path = self.resolve(path);
                let text = fs::read_to_string(&path).map_err(|e| {
                    config_err(
                        "synthesis.backend.external",
                        format!("{}: {e}", path.display()),
                    )
                })?;
                let n = self.assemble()?.layout.len();
                Ok(Box::new(ExternalSolution {
                    x: parse_solution_vector(&text, n)?,
                }))
            }
        }
    }

    pub fn synthesize(&self) -> Result<SynthesisOutcome> {
        let asm = self.assemble()?;
        let backend = self.backend()?;
        synthesize_gain(&asm, backend.as_ref(), self.config.synthesis.options.tol)
    }

    pub fn verify(&self, cert: &GainCertificate) -> Result<VerificationReport> {
        Ok(verify_certificate(
            &self.synthesis_input()?,
            cert,
            self.config.synthesis.options.tol,
        ))
    }

    /// Gain to run with, plus `gamma` when it comes from a certificate.
    pub fn resolve_gain(&self) -> Result<(DMatrix<f64>, Option<f64>)> {
        let d = self.system.plant.dims();
        match &self.config.observer.gain {
            GainSource::Zero => Ok((DMatrix::zeros(d.n_z(), d.l), None)),
            GainSource::Matrix(rows) => {
                if rows.len() != d.n_z() || rows.iter().any(|r| r.len() != d.l) {
                    return Err(config_err(
                        "observer.gain.matrix",
                        format!("must be {}x{}", d.n_z(), d.l),
                    ));
                }
                Ok((DMatrix::from_fn(d.n_z(), d.l, |i, j| rows[i][j]), None))
            }
            GainSource::Synthesize => match self.synthesize()? {
                SynthesisOutcome::Certified(cert) => Ok((cert.gain, Some(cert.gamma))),
                SynthesisOutcome::Infeasible { status } => Err(Error::SynthesisFailed(status)),
            },
            GainSource::File(path) => {
                let path = self.resolve(path);
                let text = fs::read_to_string(&path).map_err(|e| {
                    config_err("observer.gain.file", format!("{}: {e}", path.display()))
                })?;
                let cert = GainCertificate::from_json(&text)?;
                let report = self.verify(&cert)?;
                if !report.passed {
                    return Err(Error::CertificateRejected(report.failures.join("; ")));
                }
                Ok((cert.gain, Some(cert.gamma)))
            }
        }
    }

    fn kappa(&self) -> Result<LipschitzSpec> {
        match &self.config.learner.kappa {
            KappaSetting::System => LipschitzSpec::new(self.system.kappa_h.clone()),
            KappaSetting::Value(v) => LipschitzSpec::new(v.clone())
                .map_err(|e| config_err("learner.kappa", e.to_string())),
            KappaSetting::Auto => Err(config_err(
                "learner.kappa",
                "`auto` is only available for `learn`; observer runs need a fixed constant",
            )),
        }
    }

    /// Fresh input model; in learned mode it never sees `true_h`.
    pub fn input_model(&self) -> Result<InputModel> {
        match self.config.observer.mode {
            InputMode::KnownH => Ok(InputModel::Known(self.system.known_h.clone())),
            InputMode::Learned => {
                let model = AbstractionModel::new(self.system.plant.dims().n_z(), self.kappa()?)
                    .with_window(self.config.learner.window)?
                    .with_output_noise(self.system.unknown_input_noise_width())?;
                Ok(InputModel::Learned(model))
            }
        }
    }

    pub fn run_seed(
        &self,
        seed: u64,
        gain: &DMatrix<f64>,
        gamma: Option<f64>,
    ) -> Result<RunResult> {
        let horizon = self.config.observer.horizon;
        let truth = simulate_truth(&self.system, seed, horizon)?;
        let trajectory = run_observer(
            &self.system.plant,
            self.input_model()?,
            &self.system.initial_framer(),
            gain.clone(),
            &truth.measurements,
        )?;
        let violations = count_violations(&trajectory, &truth.states);
        let last = trajectory.final_record();
        let summary = RunSummary {
            seed,
            horizon,
            violations,
            sup_eps_norm: trajectory.sup_eps_norm(),
            initial_eps_norm: trajectory.records[0].eps_norm,
            final_eps: last.eps.iter().copied().collect(),
            final_eps_norm: last.eps_norm,
            gamma,
        };
        Ok(RunResult {
            truth,
            trajectory,
            summary,
        })
    }

    /// All configured seeds in parallel, returned in seed order.
    pub fn run_all(&self) -> Result<(Vec<RunResult>, Option<f64>)> {
        let (gain, gamma) = self.resolve_gain()?;
        let mut results: Vec<RunResult> = self
            .config
            .seeds()
            .into_par_iter()
            .map(|seed| self.run_seed(seed, &gain, gamma))
            .collect::<Result<_>>()?;
        results.sort_by_key(|r| r.summary.seed);
        Ok((results, gamma))
    }

    /// Runs and writes the trajectory CSV, learned model, and summary JSON.
    pub fn run_and_write(&self) -> Result<BatchSummary> {
        let (results, gamma) = self.run_all()?;
        let out_dir = self.resolve(&self.config.output.dir);
        fs::create_dir_all(&out_dir)?;
        let single = results.len() == 1;
        for r in &results {
            let tag = |name: &str| {
                if single {
                    name.to_string()
                } else {
                    let (stem, ext) = name.rsplit_once('.').unwrap_or((name, ""));
                    format!("{stem}_seed{}.{ext}", r.summary.seed)
                }
            };
            let csv = fs::File::create(out_dir.join(tag(&self.config.output.trajectory)))?;
            r.trajectory.write_csv(std::io::BufWriter::new(csv))?;
            if let Some(model) = r.trajectory.model.learned() {
                fs::write(
                    out_dir.join(tag(&self.config.output.model)),
                    model.to_json()?,
                )?;
            }
        }
        let batch = BatchSummary {
            horizon: self.config.observer.horizon,
            violations: results.iter().map(|r| r.summary.violations).sum(),
            sup_eps_norm: results
                .iter()
                .map(|r| r.summary.sup_eps_norm)
                .fold(0.0, f64::max),
            gamma,
            runs: results.into_iter().map(|r| r.summary).collect(),
        };
        let text = if batch.runs.len() == 1 {
            serde_json::to_string_pretty(&batch.runs[0])?
        } else {
            serde_json::to_string_pretty(&batch)?
        };
        fs::write(out_dir.join(&self.config.output.summary), text + "\n")?;
        Ok(batch)
    }

    /// Fits an abstraction model to the configured interval data file.
    pub fn learn(&self) -> Result<AbstractionModel> {
        let path = self
            .config
            .learner
            .data
            .as_ref()
            .ok_or_else(|| config_err("learner.data", "required for `learn`"))?;
        let path = self.resolve(path);
        let text = fs::read_to_string(&path)
            .map_err(|e| config_err("learner.data", format!("{}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let data: LearnData = serde_path_to_error::deserialize(de).map_err(|e| {
            config_err(
                &format!("learner.data:{}", e.path()),
                e.into_inner().to_string(),
            )
        })?;
        let first = data
            .samples
            .first()
            .ok_or_else(|| config_err("learner.data", "no samples"))?;
        let (n_in, p) = (first.input_box.dim(), first.output_box.dim());
        let fit = |kappa: LipschitzSpec| -> Result<AbstractionModel> {
            let mut model =
                AbstractionModel::new(n_in, kappa).with_window(self.config.learner.window)?;
            for (t, s) in data.samples.iter().enumerate() {
                model.ingest_sample(s.input_box.clone(), s.output_box.clone(), t)?;
            }
            Ok(model)
        };
        let kappa = match &self.config.learner.kappa {
            KappaSetting::Auto => {
                let probe = fit(LipschitzSpec::new(vec![1.0; p])?)?;
                estimate_lipschitz(probe.samples(), self.config.learner.safety_factor)?
            }
            KappaSetting::System => LipschitzSpec::new(self.system.kappa_h.clone())?,
            KappaSetting::Value(v) => LipschitzSpec::new(v.clone())
                .map_err(|e| config_err("learner.kappa", e.to_string()))?,
        };
        fit(kappa)
    }

    /// Sampled audits of the system data plus a Monte Carlo enclosure check.
    pub fn check(&self) -> Result<CheckReport> {
        let sys = &self.system;
        let mut items = Vec::new();
        let mut push = |name: &str, passed: bool, detail: String| {
            items.push(CheckItem {
                name: name.into(),
                passed,
                detail,
            })
        };
        let maps: [(&str, &JssDecomposition); 3] = [
            ("f", &sys.plant.f),
            ("g", &sys.plant.g),
            ("h", &sys.known_h.decomposition),
        ];
        for (name, d) in maps {
            let audit = audit_sign_stability(d, 2000, 17, 1e-7);
            push(
                &format!("jacobian_bounds_{name}"),
                audit.passed(),
                format!(
                    "{} of {} samples violate; worst excess {:.3e}",
                    audit.violations, audit.samples, audit.worst_excess
                ),
            );
            let worst = audit_diagonal_identity(d, 500, 18)?;
            push(
                &format!("decomposition_diagonal_{name}"),
                worst <= 1e-12,
                format!("max |q_d(z,z) - q(z)| = {worst:.3e}"),
            );
        }
        let lip = sampled_lipschitz(&sys.true_h, 20_000, 23);
        let lip_ok = lip.iter().zip(&sys.kappa_h).all(|(e, k)| e <= k);
        push(
            "lipschitz_h",
            lip_ok,
            format!("sampled {lip:?} vs bound {:?}", sys.kappa_h),
        );

        let (gain, gamma) = self.resolve_gain()?;
        if let GainSource::Synthesize | GainSource::File(_) = self.config.observer.gain {
            push(
                "certificate",
                true,
                format!("verified, gamma = {:.6e}", gamma.unwrap_or(f64::NAN)),
            );
        }
        let runs: Vec<RunSummary> = self
            .config
            .seeds()
            .into_par_iter()
            .map(|seed| self.run_seed(seed, &gain, gamma).map(|r| r.summary))
            .collect::<Result<_>>()?;
        let violations: usize = runs.iter().map(|r| r.violations).sum();
        push(
            "enclosure",
            violations == 0,
            format!(
                "{violations} violations over {} runs x {} steps",
                runs.len(),
                self.config.observer.horizon
            ),
        );
        let passed = items.iter().all(|i| i.passed);
        Ok(CheckReport { passed, items })
    }

    pub fn export_sdpa(&self, path: &Path) -> Result<()> {
        fs::write(path, self.assemble()?.problem.to_sdpa_string())?;
        Ok(())
    }
}
