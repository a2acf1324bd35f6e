//! Experiment configuration: a TOML file whose sections override the
//! per-subcommand defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use warmstart::circuit::{build_hea, build_hva, Ansatz};
use warmstart::loss::{LossKind, StabilizerDataset};
use warmstart::{PauliSum, StateVector};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    #[serde(default)]
    pub system: SystemCfg,
    #[serde(default)]
    pub ansatz: AnsatzCfg,
    #[serde(default)]
    pub loss: LossCfg,
    #[serde(default)]
    pub sampling: SamplingCfg,
    #[serde(default)]
    pub optimizer: OptimizerCfg,
    #[serde(default)]
    pub track: TrackCfg,
    #[serde(default)]
    pub jump: JumpCfg,
    #[serde(default)]
    pub grid2d: Grid2dCfg,
    #[serde(default)]
    pub compress: CompressCfg,
    #[serde(default)]
    pub bounds: BoundsCfg,
    #[serde(default)]
    pub unitary: UnitaryCfg,
}

/// One size or a list of sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sizes {
    One(usize),
    Many(Vec<usize>),
}

impl Sizes {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            Sizes::One(n) => vec![*n],
            Sizes::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemCfg {
    pub qubits: Option<Sizes>,
    /// `xz_chain`, `xx_chain`, `terms` or `file`.
    pub hamiltonian: Option<String>,
    /// Inline terms, one `coefficient AXES` per line.
    pub terms: Option<String>,
    pub file: Option<PathBuf>,
    /// `zero` or `plus`.
    pub initial_state: Option<String>,
}

/// A fixed layer count or `"n"` for as many layers as qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Layers {
    Count(usize),
    PerQubit(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzCfg {
    /// `hea`, `hva` or `file`.
    pub family: Option<String>,
    pub layers: Option<Layers>,
    pub shuffle_seed: Option<u64>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossCfg {
    /// `real_time`, `imaginary_time`, `unitary_hst`, `unitary_bell` or `qml`.
    pub kind: Option<String>,
    pub dt: Option<f64>,
    pub dataset_size: Option<usize>,
    /// `zero` or `random` center `theta*`.
    pub center: Option<String>,
    /// Half-width of the random center distribution.
    pub center_width: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingCfg {
    pub n_samples: Option<usize>,
    pub directions: Option<usize>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub r_points: Option<usize>,
    /// Fixed half-width for `variance-vs-dt` and `ite-suite`.
    pub r: Option<f64>,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub dt_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerCfg {
    pub grad_tol: Option<f64>,
    pub max_iters: Option<usize>,
    /// `quasi_newton` or `gradient_descent`.
    pub method: Option<String>,
    pub max_step: Option<f64>,
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackCfg {
    pub dt_max: Option<f64>,
    pub n_steps: Option<usize>,
    pub jump_guard: Option<f64>,
    pub instances: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpCfg {
    pub restarts: Option<usize>,
    pub threshold: Option<f64>,
    pub loss_margin: Option<f64>,
    pub dts: Option<Vec<f64>>,
    pub instance: Option<usize>,
    pub cut_points: Option<usize>,
    pub cut_margin: Option<f64>,
    pub random_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid2dCfg {
    pub resolution: Option<usize>,
    /// Extra margin around the projected trajectory, as a fraction of its extent.
    pub padding: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressCfg {
    /// `fixed` or `adaptive`.
    pub schedule: Option<String>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub dts: Option<Vec<f64>>,
    pub t_final: Option<f64>,
    pub dt_init: Option<f64>,
    pub dt_max: Option<f64>,
    pub dt_min: Option<f64>,
    pub threshold: Option<f64>,
    pub jitter: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsCfg {
    pub r: Option<f64>,
    pub r0: Option<f64>,
    pub m: Option<usize>,
    pub lambda: Option<f64>,
    pub dt: Option<f64>,
    pub delta: Option<f64>,
    pub f_target: Option<f64>,
    pub mu: Option<f64>,
    pub eps: Option<f64>,
    pub beta: Option<f64>,
    pub eta0: Option<f64>,
    pub dtau: Option<f64>,
    /// `derived` or `stated`.
    pub factor: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitaryCfg {
    pub max_qubits: Option<usize>,
    pub dataset_sizes: Option<Vec<usize>>,
    pub draws: Option<usize>,
    pub comparisons: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: Config = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        cfg.check_files(path.parent().unwrap_or(Path::new(".")))
    }

    /// Resolves relative file references against the config's directory and
    /// checks that they exist.
    fn check_files(mut self, base: &Path) -> Result<Config, CliError> {
        for (field, slot) in [
            ("system.file", &mut self.system.file),
            ("ansatz.file", &mut self.ansatz.file),
        ] {
            if let Some(p) = slot.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
                if !p.exists() {
                    return Err(CliError::Validation(format!(
                        "{field}: {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        Ok(self)
    }

    pub fn hamiltonian(&self, n: usize, default: &str) -> Result<PauliSum, CliError> {
        let kind = self.system.hamiltonian.as_deref().unwrap_or(default);
        let h = match kind {
            "xz_chain" => PauliSum::xz_chain(n)?,
            "xx_chain" => PauliSum::xx_chain(n)?,
            "terms" => {
                let text = self
                    .system
                    .terms
                    .as_deref()
                    .ok_or_else(|| CliError::Validation("system.terms is required for hamiltonian = \"terms\"".into()))?;
                PauliSum::parse(text)?
            }
            "file" => {
                let path = self
                    .system
                    .file
                    .as_ref()
                    .ok_or_else(|| CliError::Validation("system.file is required for hamiltonian = \"file\"".into()))?;
                PauliSum::parse(&read(path)?)?
            }
            other => {
                return Err(CliError::Validation(format!(
                    "system.hamiltonian: unknown model \"{other}\" (expected xz_chain, xx_chain, terms or file)"
                )))
            }
        };
        if h.n() != n {
            return Err(CliError::Validation(format!(
                "system.hamiltonian acts on {} qubits but system.qubits asks for {n}",
                h.n()
            )));
        }
        Ok(h)
    }

    pub fn qubits(&self, default: &[usize]) -> Result<Vec<usize>, CliError> {
        let q = self
            .system
            .qubits
            .as_ref()
            .map_or_else(|| default.to_vec(), Sizes::to_vec);
        if q.is_empty() || q.contains(&0) {
            return Err(CliError::Validation(
                "system.qubits must list positive sizes".into(),
            ));
        }
        Ok(q)
    }

    pub fn initial_state(&self, n: usize) -> Result<StateVector, CliError> {
        match self.system.initial_state.as_deref().unwrap_or("zero") {
            "zero" => Ok(StateVector::zero(n)?),
            "plus" => Ok(StateVector::plus(n)?),
            other => Err(CliError::Validation(format!(
                "system.initial_state: unknown state \"{other}\" (expected zero or plus)"
            ))),
        }
    }

    pub fn ansatz(
        &self,
        n: usize,
        h: &PauliSum,
        default_family: &str,
        default_layers: Layers,
    ) -> Result<Ansatz, CliError> {
        let layers = match self.ansatz.layers.clone().unwrap_or(default_layers) {
            Layers::Count(l) => l,
            Layers::PerQubit(s) if s == "n" => n,
            Layers::PerQubit(s) => {
                return Err(CliError::Validation(format!(
                    "ansatz.layers: expected a count or \"n\", got \"{s}\""
                )))
            }
        };
        let a = match self.ansatz.family.as_deref().unwrap_or(default_family) {
            "hea" => build_hea(n, layers, self.ansatz.shuffle_seed)?,
            "hva" => build_hva(h, layers)?,
            "file" => {
                let path = self.ansatz.file.as_ref().ok_or_else(|| {
                    CliError::Validation("ansatz.file is required for family = \"file\"".into())
                })?;
                Ansatz::parse(&read(path)?)?
            }
            other => {
                return Err(CliError::Validation(format!(
                    "ansatz.family: unknown family \"{other}\" (expected hea, hva or file)"
                )))
            }
        };
        if a.n() != n {
            return Err(CliError::Validation(format!(
                "ansatz acts on {} qubits, system on {n}",
                a.n()
            )));
        }
        Ok(a)
    }

    pub fn loss_kind(&self, n: usize, default: &str, seed: u64) -> Result<LossKind, CliError> {
        Ok(match self.loss.kind.as_deref().unwrap_or(default) {
            "real_time" => LossKind::RealTime,
            "imaginary_time" => LossKind::ImaginaryTime,
            "unitary_hst" => LossKind::UnitaryHst,
            "unitary_bell" => LossKind::UnitaryBell,
            "qml" => LossKind::Qml(StabilizerDataset::sample(n, self.loss.dataset_size.unwrap_or(4), seed)?),
            other => {
                return Err(CliError::Validation(format!(
                    "loss.kind: unknown kind \"{other}\" (expected real_time, imaginary_time, unitary_hst, unitary_bell or qml)"
                )))
            }
        })
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Config {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn sizes_and_layers_accept_both_spellings() {
        let c = parse("[system]\nqubits = 4\n[ansatz]\nlayers = \"n\"\n");
        assert_eq!(c.qubits(&[1]).unwrap(), vec![4]);
        let h = c.hamiltonian(4, "xz_chain").unwrap();
        assert_eq!(
            c.ansatz(4, &h, "hea", Layers::Count(1))
                .unwrap()
                .num_params(),
            2 * 4 * 4
        );
        let c = parse("[system]\nqubits = [2, 3]\n[ansatz]\nlayers = 1\n");
        assert_eq!(c.qubits(&[1]).unwrap(), vec![2, 3]);
        assert_eq!(
            c.ansatz(2, &h, "hea", Layers::Count(5))
                .unwrap()
                .num_params(),
            4
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Config>("[track]\nsteps = 3\n").is_err());
        assert!(toml::from_str::<Config>("extra = 1\n").is_err());
    }

    #[test]
    fn inline_terms_must_match_the_qubit_count() {
        let c = parse("[system]\nhamiltonian = \"terms\"\nterms = \"1 XX\\n0.5 ZI\"\n");
        assert_eq!(c.hamiltonian(2, "xz_chain").unwrap().terms().len(), 2);
        assert!(c.hamiltonian(3, "xz_chain").is_err());
    }

    #[test]
    fn relative_files_resolve_against_the_config() {
        let dir = tempfile::TempDir::new().unwrap();
        std::fs::write(dir.path().join("h.txt"), "1 Z\n").unwrap();
        let cfg_path = dir.path().join("c.toml");
        std::fs::write(
            &cfg_path,
            "[system]\nhamiltonian = \"file\"\nfile = \"h.txt\"\n",
        )
        .unwrap();
        let c = Config::load(&cfg_path).unwrap();
        assert_eq!(
            c.system.file.as_deref(),
            Some(dir.path().join("h.txt").as_path())
        );
        assert_eq!(c.hamiltonian(1, "xz_chain").unwrap().n(), 1);

        std::fs::write(&cfg_path, "[system]\nfile = \"absent.txt\"\n").unwrap();
        assert!(matches!(
            Config::load(&cfg_path),
            Err(CliError::Validation(_))
        ));
    }

    #[test]
    fn qml_kind_builds_a_dataset_of_the_requested_size() {
        let c = parse("[loss]\nkind = \"qml\"\ndataset_size = 3\n");
        match c.loss_kind(2, "real_time", 1).unwrap() {
            LossKind::Qml(d) => assert_eq!(d.len(), 3),
            other => panic!("unexpected kind {}", other.name()),
        }
    }
}
