//! Stage runner: dependency checks, skip-if-unchanged and atomic artifact
//! directories.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use shmked::config::RunConfig;
use shmked::dict::{Dictionary, DictionaryMeta};
use shmked::esmda::{run_baseline_esmda, run_shm_ked, AssimilationResult, Experiment, ObservationLayout, ObservationSet};
use shmked::flow::SimOutput;
use shmked::io::{decode_flat, encode_flat, matrix_to_csv, model_to_csv};
use shmked::twin::{learn_dictionary, prior_library, run_truth};

use crate::error::{CliError, CliResult};
use crate::manifest::{hash_file, sha256_hex, Manifest};
use crate::plot::plot_emit;
use crate::report::build_report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Esmda,
    ShmKed,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Esmda => "esmda",
            Method::ShmKed => "shm-ked",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    GeneratePrior,
    LearnDict,
    RunTruth,
    Assimilate(Method),
    Report,
    Plot,
}

impl Stage {
    /// Every stage in pipeline order.
    pub const ALL: [Stage; 7] = [
        Stage::GeneratePrior,
        Stage::LearnDict,
        Stage::RunTruth,
        Stage::Assimilate(Method::Esmda),
        Stage::Assimilate(Method::ShmKed),
        Stage::Report,
        Stage::Plot,
    ];

    /// Artifact directory under the output root.
    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::GeneratePrior => "prior",
            Stage::LearnDict => "dictionary",
            Stage::RunTruth => "truth",
            Stage::Assimilate(m) => m.label(),
            Stage::Report => "report",
            Stage::Plot => "plots",
        }
    }

    pub fn dependencies(self) -> Vec<Stage> {
        match self {
            Stage::GeneratePrior | Stage::RunTruth => vec![],
            Stage::LearnDict => vec![Stage::GeneratePrior],
            Stage::Assimilate(Method::Esmda) => vec![Stage::RunTruth, Stage::GeneratePrior],
            Stage::Assimilate(Method::ShmKed) => vec![Stage::RunTruth, Stage::GeneratePrior, Stage::LearnDict],
            Stage::Report => vec![
                Stage::RunTruth,
                Stage::GeneratePrior,
                Stage::Assimilate(Method::Esmda),
                Stage::Assimilate(Method::ShmKed),
            ],
            Stage::Plot => vec![Stage::Report],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::GeneratePrior => write!(f, "generate-prior"),
            Stage::LearnDict => write!(f, "learn-dict"),
            Stage::RunTruth => write!(f, "run-truth"),
            Stage::Assimilate(m) => write!(f, "assimilate --method {}", m.label()),
            Stage::Report => write!(f, "report"),
            Stage::Plot => write!(f, "plot"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    UpToDate,
}

/// Named artifact contents produced by a stage, written only on success.
pub type Artifacts = Vec<(String, Vec<u8>)>;

pub fn text(name: impl Into<String>, body: String) -> (String, Vec<u8>) {
    (name.into(), body.into_bytes())
}

pub struct Workspace {
    pub cfg: RunConfig,
    pub root: PathBuf,
    pub force: bool,
    config_hash: String,
}

/// Loads and validates a configuration file. `seed` overrides the configured
/// master seed; `out` overrides the output directory (otherwise resolved
/// relative to the configuration file).
pub fn load_config(path: &Path, seed: Option<u64>) -> CliResult<RunConfig> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    let mut cfg = RunConfig::from_json(&raw).map_err(|e| CliError::Config(vec![e.to_string()]))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let problems = cfg.problems();
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(problems))
    }
}

impl Workspace {
    pub fn open(config: &Path, seed: Option<u64>, out: Option<&Path>, force: bool) -> CliResult<Self> {
        let cfg = load_config(config, seed)?;
        let root = match out {
            Some(o) => o.to_path_buf(),
            None => config.parent().unwrap_or(Path::new(".")).join(&cfg.output_dir),
        };
        // The output location is not an input of any stage.
        let mut canonical = cfg.clone();
        canonical.output_dir.clear();
        let config_hash = sha256_hex(canonical.to_json().as_bytes());
        Ok(Workspace {
            cfg,
            root,
            force,
            config_hash,
        })
    }

    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.dir_name())
    }

    fn experiment(&self) -> CliResult<Experiment> {
        self.cfg.experiment().map_err(|e| CliError::Config(vec![e.to_string()]))
    }

    /// Manifests of the stage's dependencies, or the list of missing stages.
    fn upstream(&self, stage: Stage) -> CliResult<BTreeMap<String, String>> {
        let mut inputs = BTreeMap::new();
        inputs.insert("config".to_string(), self.config_hash.clone());
        let mut missing = Vec::new();
        for dep in stage.dependencies() {
            let dir = self.dir(dep);
            match Manifest::read(&dir)? {
                Some(m) if m.artifacts_intact(&dir) => {
                    inputs.insert(dep.to_string(), m.digest()?);
                }
                _ => missing.push(dep.to_string()),
            }
        }
        if missing.is_empty() {
            Ok(inputs)
        } else {
            Err(CliError::Dependency {
                stage: stage.to_string(),
                missing,
            })
        }
    }

    pub fn run(&self, stage: Stage) -> CliResult<Outcome> {
        let inputs = self.upstream(stage)?;
        let mut manifest = Manifest::new(&stage.to_string(), self.cfg.seed, inputs);
        let dir = self.dir(stage);
        if !self.force {
            if let Some(old) = Manifest::read(&dir)? {
                if old.inputs_hash == manifest.inputs_hash && old.artifacts_intact(&dir) {
                    return Ok(Outcome::UpToDate);
                }
            }
        }
        let artifacts = match stage {
            Stage::GeneratePrior => self.generate_prior()?,
            Stage::LearnDict => self.learn_dict()?,
            Stage::RunTruth => self.run_truth()?,
            Stage::Assimilate(m) => self.assimilate(m)?,
            Stage::Report => build_report(self)?,
            Stage::Plot => plot_emit(&self.dir(Stage::Report))?,
        };
        // Write into a sibling directory and swap it in, so a failure never
        // leaves a half-written stage behind.
        std::fs::create_dir_all(&self.root)?;
        let staging = self.root.join(format!(".{}.partial", stage.dir_name()));
        if staging.exists() {
            std::fs::remove_dir_all(&staging)?;
        }
        std::fs::create_dir_all(&staging)?;
        for (name, bytes) in &artifacts {
            std::fs::write(staging.join(name), bytes)?;
            manifest.artifacts.insert(name.clone(), hash_file(&staging.join(name))?);
        }
        manifest.write(&staging)?;
        if dir.exists() {
            std::fs::remove_dir_all(&dir)?;
        }
        std::fs::rename(&staging, &dir)?;
        Ok(Outcome::Ran)
    }

    fn generate_prior(&self) -> CliResult<Artifacts> {
        let library = prior_library(&self.cfg)?;
        Ok(vec![
            ("library.bin".into(), encode_flat(&library.fields)?),
            text("library.csv", library.manifest_csv()),
        ])
    }

    pub fn load_library(&self) -> CliResult<Vec<Vec<f64>>> {
        read_vectors(&self.dir(Stage::GeneratePrior).join("library.bin"))
    }

    /// The first `ensemble_size` library members.
    pub fn initial_ensemble(&self) -> CliResult<Vec<Vec<f64>>> {
        let mut lib = self.load_library()?;
        if lib.len() < self.cfg.ensemble_size {
            return Err(CliError::other("prior library is smaller than the ensemble"));
        }
        lib.truncate(self.cfg.ensemble_size);
        Ok(lib)
    }

    fn learn_dict(&self) -> CliResult<Artifacts> {
        let lib_dir = self.dir(Stage::GeneratePrior);
        let library = shmked::prior::ModelLibrary {
            fields: self.load_library()?,
            seeds: Vec::new(),
            kind: String::new(),
        };
        let (dict, report) = learn_dictionary(&self.cfg, &library)?;
        let n = dict.signal_len();
        let meta = DictionaryMeta {
            atoms: dict.atom_count(),
            signal_len: n,
            sparsity: self.cfg.sparsity(n),
            seed: self.cfg.seed,
            sweeps: self.cfg.dictionary.sweeps,
            training_hash: hash_file(&lib_dir.join("library.csv"))?,
            final_error: report.final_error(),
        };
        let mut errors = String::from("sweep,mean_relative_error\n");
        for (i, e) in report.errors.iter().enumerate() {
            errors.push_str(&format!("{i},{e}\n"));
        }
        Ok(vec![
            ("dictionary.bin".into(), encode_flat(&dict.atoms())?),
            text("dictionary.bin.json", serde_json::to_string_pretty(&meta)?),
            text("ksvd.csv", errors),
        ])
    }

    pub fn load_dictionary(&self) -> CliResult<Dictionary> {
        let (dict, _) = shmked::dict::read_dictionary(&self.dir(Stage::LearnDict).join("dictionary.bin"))?;
        Ok(dict)
    }

    fn run_truth(&self) -> CliResult<Artifacts> {
        let exp = self.experiment()?;
        let truth = run_truth(&self.cfg, &exp)?;
        let (rows, cols) = (exp.grid.ny(), exp.grid.nx());
        let obs = &truth.observations;
        let mut out = vec![
            ("field.bin".into(), encode_flat(std::slice::from_ref(&truth.field))?),
            text("model.csv", model_to_csv(&truth.model, &exp.grid)),
            text("production.csv", truth.output.to_csv()),
            text("diagnostics.json", serde_json::to_string_pretty(&truth.output.diagnostics)?),
            text("layout.json", serde_json::to_string_pretty(&obs.layout)?),
            (
                "observations.bin".into(),
                encode_flat(&[obs.truth.clone(), obs.d_obs.clone(), obs.sigma.clone()])?,
            ),
            text("observations.csv", obs.to_csv()),
            ("impedance.bin".into(), encode_flat(&truth.impedance)?),
        ];
        let mut energy = String::from("survey_time,kept_energy\n");
        for ((t, img), e) in exp.schedule.survey_times.iter().zip(&truth.impedance).zip(&truth.kept_energy) {
            out.push(text(format!("impedance_t{t}.csv"), matrix_to_csv(img, rows, cols)));
            energy.push_str(&format!("{t},{e}\n"));
        }
        out.push(text("kept_energy.csv", energy));
        Ok(out)
    }

    pub fn load_truth_field(&self) -> CliResult<Vec<f64>> {
        let mut v = read_vectors(&self.dir(Stage::RunTruth).join("field.bin"))?;
        v.pop().ok_or_else(|| CliError::other("truth field file is empty"))
    }

    pub fn load_truth_output(&self) -> CliResult<SimOutput> {
        let text = std::fs::read_to_string(self.dir(Stage::RunTruth).join("production.csv"))?;
        Ok(SimOutput::from_csv(&text)?)
    }

    pub fn load_truth_impedance(&self) -> CliResult<Vec<Vec<f64>>> {
        read_vectors(&self.dir(Stage::RunTruth).join("impedance.bin"))
    }

    pub fn load_observations(&self) -> CliResult<ObservationSet> {
        let dir = self.dir(Stage::RunTruth);
        let layout: ObservationLayout = serde_json::from_str(&std::fs::read_to_string(dir.join("layout.json"))?)?;
        let mut v = read_vectors(&dir.join("observations.bin"))?;
        if v.len() != 3 || v[0].len() != layout.len() {
            return Err(CliError::other("observation vectors do not match the layout"));
        }
        let sigma = v.pop().unwrap();
        let d_obs = v.pop().unwrap();
        let truth = v.pop().unwrap();
        Ok(ObservationSet {
            layout,
            truth,
            d_obs,
            sigma,
        })
    }

    fn assimilate(&self, method: Method) -> CliResult<Artifacts> {
        let exp = self.experiment()?;
        let obs = self.load_observations()?;
        let initial = self.initial_ensemble()?;
        let settings = self.cfg.assimilation_settings();
        let mut result = match method {
            Method::Esmda => run_baseline_esmda(&exp, &initial, &obs, &settings)?,
            Method::ShmKed => {
                let dict = self.load_dictionary()?;
                let sparse = self.cfg.sparse_settings(exp.grid.active_count());
                run_shm_ked(&exp, &initial, &obs, &dict, &sparse, &settings)?
            }
        };
        let states: Vec<Vec<f64>> = std::mem::take(&mut result.states).into_iter().flatten().collect();
        let simulated: Vec<Vec<f64>> = std::mem::take(&mut result.simulated).into_iter().flatten().collect();
        Ok(vec![
            text("result.json", serde_json::to_string(&result)?),
            ("states.bin".into(), encode_flat(&states)?),
            ("simulated.bin".into(), encode_flat(&simulated)?),
            text("rmse.csv", result.rmse_csv()),
        ])
    }

    /// The assimilation result without its per-stage states and data.
    pub fn load_result(&self, method: Method) -> CliResult<AssimilationResult> {
        let text = std::fs::read_to_string(self.dir(Stage::Assimilate(method)).join("result.json"))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn read_vectors(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::other(format!("cannot read {}: {e}", path.display())))?;
    Ok(decode_flat(&bytes)?)
}
