use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use explosion_core::catalog::CatalogEntry;
use explosion_core::elliptic::AdvectionScheme;
use explosion_core::geometry::{build_grid, builtin_flow, nonlinearity, DomainSpec, FLOW_CATALOG};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Experiments the runner knows about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Gelfand,
    Bounds,
    Fig2,
    Equidist,
    Stratify,
    Compressible,
    ShearGrowth,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Gelfand,
        Experiment::Bounds,
        Experiment::Fig2,
        Experiment::Equidist,
        Experiment::Stratify,
        Experiment::Compressible,
        Experiment::ShearGrowth,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Gelfand => "gelfand",
            Experiment::Bounds => "bounds",
            Experiment::Fig2 => "fig2",
            Experiment::Equidist => "equidist",
            Experiment::Stratify => "stratify",
            Experiment::Compressible => "compressible",
            Experiment::ShearGrowth => "shear_growth",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s || e.name().replace('_', "-") == s)
            .ok_or_else(|| ConfigError::field("experiment", format!("unknown experiment '{s}'")))
    }
}

/// A cell seed point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub x: f64,
    pub y: f64,
}

/// One (domain, flow, nonlinearity) combination for catalog sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub label: String,
    pub domain: DomainSpec,
    pub flow: CatalogEntry,
    pub nonlinearity: CatalogEntry,
    /// Overrides the experiment-wide scheme for this case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<AdvectionScheme>,
}

impl Case {
    pub fn scheme_or(&self, fallback: AdvectionScheme) -> AdvectionScheme {
        self.scheme.unwrap_or(fallback)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative bracket width of the λ* bisection.
    pub rtol: f64,
    /// Sup-norm increment that stops the monotone iteration.
    pub tol_inc: f64,
    pub max_iter: usize,
    /// Separatrix threshold as a fraction of max|Ψ|.
    pub eps_sep: f64,
    pub n_levels: usize,
    pub oversample: usize,
    pub freidlin_rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-3,
            tol_inc: 1e-10,
            max_iter: 10_000,
            eps_sep: 0.02,
            n_levels: 64,
            oversample: 8,
            freidlin_rtol: 1e-4,
        }
    }
}

/// Configuration of one experiment run (TOML on disk).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub scheme: AdvectionScheme,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    pub resolutions: Vec<usize>,
    pub amplitudes: Vec<f64>,
    pub domain: DomainSpec,
    pub flow: CatalogEntry,
    pub nonlinearity: CatalogEntry,
    #[serde(default)]
    pub seeds: Vec<Seed>,
    #[serde(default)]
    pub cases: Vec<Case>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_jobs() -> usize {
    4
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
}

impl ConfigError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Field {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn unit_square() -> DomainSpec {
    DomainSpec::unit_square()
}

fn exp() -> CatalogEntry {
    CatalogEntry::new("exponential")
}

/// Cell extrema of the four-cell flow on [0, 2π]².
pub fn fig2_seeds() -> Vec<Seed> {
    let pi = std::f64::consts::PI;
    let xs = [pi * 2f64.cbrt(), pi * 6f64.cbrt()];
    let ys = [pi, pi * 3f64.sqrt()];
    let mut out = Vec::new();
    for y in ys {
        for x in xs {
            out.push(Seed { x, y });
        }
    }
    out
}

/// The five catalog configurations of the bounds sweep.
pub fn bounds_cases() -> Vec<Case> {
    let two_pi = 2.0 * std::f64::consts::PI;
    vec![
        Case {
            label: "sinsin-exp".into(),
            domain: unit_square(),
            flow: CatalogEntry::new("sinsin"),
            nonlinearity: exp(),
            scheme: None,
        },
        Case {
            label: "sinsin-power2".into(),
            domain: unit_square(),
            flow: CatalogEntry::new("sinsin"),
            nonlinearity: CatalogEntry::new("power").with("m", 2.0),
            scheme: None,
        },
        Case {
            label: "sinsin4-exp".into(),
            domain: DomainSpec::square(2.0),
            flow: CatalogEntry::new("sinsin"),
            nonlinearity: exp(),
            scheme: None,
        },
        Case {
            label: "fig2-exp".into(),
            domain: DomainSpec::square(two_pi),
            flow: CatalogEntry::new("fig2"),
            nonlinearity: exp(),
            scheme: None,
        },
        Case {
            label: "shear-exp".into(),
            domain: unit_square(),
            flow: CatalogEntry::new("shear").with("c", 1.0),
            nonlinearity: exp(),
            scheme: None,
        },
    ]
}

impl ExperimentConfig {
    /// Default configuration for an experiment.
    pub fn default_for(experiment: Experiment) -> Self {
        let base = |resolutions: Vec<usize>, amplitudes: Vec<f64>, domain: DomainSpec, flow: CatalogEntry| Self {
            experiment,
            output_dir: PathBuf::from("out").join(experiment.name()),
            scheme: AdvectionScheme::Upwind,
            jobs: default_jobs(),
            resolutions,
            amplitudes,
            domain,
            flow,
            nonlinearity: exp(),
            seeds: Vec::new(),
            cases: Vec::new(),
            tolerances: Tolerances::default(),
        };
        let two_pi = 2.0 * std::f64::consts::PI;
        match experiment {
            Experiment::Gelfand => base(
                vec![97, 193, 385],
                vec![0.0],
                DomainSpec::Disk { radius: 1.0 },
                CatalogEntry::new("shear").with("c", 0.0),
            ),
            Experiment::Bounds => {
                let mut c = base(vec![65], vec![0.0, 64.0, 256.0, 1024.0], unit_square(), CatalogEntry::new("sinsin"));
                c.cases = bounds_cases();
                c
            }
            Experiment::Fig2 => {
                let mut c = base(
                    vec![256],
                    vec![64.0, 128.0, 256.0, 512.0],
                    DomainSpec::square(two_pi),
                    CatalogEntry::new("fig2"),
                );
                c.scheme = AdvectionScheme::Central;
                c.seeds = fig2_seeds();
                c.tolerances.oversample = 12;
                c
            }
            Experiment::Equidist => {
                let mut c = base(
                    vec![129],
                    vec![0.0, 64.0, 128.0, 256.0, 512.0],
                    unit_square(),
                    CatalogEntry::new("sinsin"),
                );
                c.scheme = AdvectionScheme::NodalUpwind;
                c
            }
            Experiment::Stratify => {
                let mut c = base(vec![129], vec![0.0, 512.0], DomainSpec::square(2.0), CatalogEntry::new("sinsin"));
                c.scheme = AdvectionScheme::Central;
                c.seeds = vec![
                    Seed { x: 0.5, y: 0.5 },
                    Seed { x: 1.5, y: 0.5 },
                    Seed { x: 0.5, y: 1.5 },
                    Seed { x: 1.5, y: 1.5 },
                ];
                c
            }
            Experiment::Compressible => base(
                vec![65],
                vec![0.0, 1.0, 2.0, 3.0],
                DomainSpec::Disk { radius: 1.0 },
                CatalogEntry::new("radial").with("n", 1.0),
            ),
            Experiment::ShearGrowth => {
                let mut c = base(
                    vec![65],
                    vec![0.0, 64.0, 128.0, 256.0, 512.0],
                    unit_square(),
                    CatalogEntry::new("shear").with("c", 1.0),
                );
                c.cases = vec![
                    Case {
                        label: "shear".into(),
                        domain: unit_square(),
                        flow: CatalogEntry::new("shear").with("c", 1.0),
                        nonlinearity: exp(),
                        scheme: Some(AdvectionScheme::Upwind),
                    },
                    Case {
                        label: "sinsin".into(),
                        domain: unit_square(),
                        flow: CatalogEntry::new("sinsin"),
                        nonlinearity: exp(),
                        scheme: Some(AdvectionScheme::Central),
                    },
                ];
                c
            }
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Cases swept by catalog experiments; falls back to the top-level
    /// domain/flow/nonlinearity.
    pub fn effective_cases(&self) -> Vec<Case> {
        if self.cases.is_empty() {
            vec![Case {
                label: self.flow.name.clone(),
                domain: self.domain.clone(),
                flow: self.flow.clone(),
                nonlinearity: self.nonlinearity.clone(),
                scheme: None,
            }]
        } else {
            self.cases.clone()
        }
    }

    /// Checks catalog names, sweeps and the output directory.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.jobs == 0 {
            return Err(ConfigError::field("jobs", "must be at least 1"));
        }
        if self.resolutions.is_empty() {
            return Err(ConfigError::field("resolutions", "must not be empty"));
        }
        for (k, r) in self.resolutions.iter().enumerate() {
            if *r < 8 {
                return Err(ConfigError::field(
                    format!("resolutions[{k}]"),
                    format!("{r} is below the minimum of 8"),
                ));
            }
        }
        if self.amplitudes.is_empty() {
            return Err(ConfigError::field("amplitudes", "must not be empty"));
        }
        for (k, w) in self.amplitudes.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(ConfigError::field(
                    format!("amplitudes[{}]", k + 1),
                    "A-list must be strictly increasing",
                ));
            }
        }
        if self.amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(ConfigError::field("amplitudes", "entries must be finite and non-negative"));
        }
        let t = &self.tolerances;
        if !(t.rtol > 0.0 && t.rtol < 1.0) {
            return Err(ConfigError::field("tolerances.rtol", "must lie in (0, 1)"));
        }
        if !(t.tol_inc > 0.0) || t.max_iter == 0 {
            return Err(ConfigError::field(
                "tolerances.tol_inc",
                "tol_inc must be positive and max_iter non-zero",
            ));
        }
        if !(t.eps_sep > 0.0 && t.eps_sep < 1.0) {
            return Err(ConfigError::field("tolerances.eps_sep", "must lie in (0, 1)"));
        }
        if t.n_levels < 32 {
            return Err(ConfigError::field("tolerances.n_levels", "need at least 32 levels"));
        }
        if t.oversample == 0 {
            return Err(ConfigError::field("tolerances.oversample", "must be at least 1"));
        }
        let check_case = |prefix: &str, domain: &DomainSpec, flow: &CatalogEntry, nl: &CatalogEntry| -> Result<(), ConfigError> {
            if !FLOW_CATALOG.contains(&flow.name.as_str()) {
                return Err(ConfigError::field(
                    format!("{prefix}flow.name"),
                    format!("unknown flow '{}' (expected one of: {})", flow.name, FLOW_CATALOG.join(", ")),
                ));
            }
            nonlinearity(nl).map_err(|e| ConfigError::field(format!("{prefix}nonlinearity"), e.to_string()))?;
            let grid = build_grid(domain, 9).map_err(|e| ConfigError::field(format!("{prefix}domain"), e.to_string()))?;
            builtin_flow(flow, &grid).map_err(|e| ConfigError::field(format!("{prefix}flow"), e.to_string()))?;
            Ok(())
        };
        check_case("", &self.domain, &self.flow, &self.nonlinearity)?;
        for (k, c) in self.cases.iter().enumerate() {
            check_case(&format!("cases[{k}]."), &c.domain, &c.flow, &c.nonlinearity)?;
        }
        std::fs::create_dir_all(&self.output_dir)
            .map_err(|e| ConfigError::field("output_dir", format!("{}: {e}", self.output_dir.display())))?;
        let probe = self.output_dir.join(".write-test");
        std::fs::write(&probe, b"")
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| ConfigError::field("output_dir", format!("not writable: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_compressible(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::default_for(Experiment::Compressible);
        c.resolutions = vec![17];
        c.amplitudes = vec![0.0, 1.0];
        c.output_dir = dir.to_path_buf();
        c
    }

    fn field_of(e: ConfigError) -> String {
        match e {
            ConfigError::Field { field, .. } => field,
            other => panic!("expected a field error, got {other}"),
        }
    }

    #[test]
    fn default_configs_round_trip_through_toml() {
        for e in Experiment::ALL {
            let c = ExperimentConfig::default_for(e);
            let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
            assert_eq!(back, c, "{e}");
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("nope".parse::<Experiment>().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = ExperimentConfig::default_for(Experiment::Gelfand).to_toml_string();
        text.push_str("\nbogus = 1\n");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn validation_names_the_offending_field() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_compressible(dir.path());
        c.flow = CatalogEntry::new("vortex");
        assert_eq!(field_of(c.validate().unwrap_err()), "flow.name");

        let mut c = ExperimentConfig::default_for(Experiment::Bounds);
        c.output_dir = dir.path().to_path_buf();
        c.cases[2].flow = CatalogEntry::new("vortex");
        assert_eq!(field_of(c.validate().unwrap_err()), "cases[2].flow.name");

        let mut c = small_compressible(dir.path());
        c.amplitudes = vec![0.0, 2.0, 1.0];
        assert_eq!(field_of(c.validate().unwrap_err()), "amplitudes[2]");

        let mut c = small_compressible(dir.path());
        c.resolutions = vec![4];
        assert_eq!(field_of(c.validate().unwrap_err()), "resolutions[0]");

        let mut c = small_compressible(dir.path());
        c.nonlinearity = CatalogEntry::new("power").with("m", 1.0);
        assert_eq!(field_of(c.validate().unwrap_err()), "nonlinearity");

        let mut c = small_compressible(dir.path());
        c.jobs = 0;
        assert_eq!(field_of(c.validate().unwrap_err()), "jobs");
    }
}
