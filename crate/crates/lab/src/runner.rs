use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::experiments::run_experiment;
use crate::manifest::{sha256_hex, OutputEntry, OutputKind, RunManifest};
use crate::plots::emit_plots;
use crate::table::{Table, SCHEMA_REVISION};
use crate::VERSION;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_FILE: &str = "SCHEMA.md";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

fn write(dir: &Path, name: &str, bytes: &[u8], kind: OutputKind, outputs: &mut Vec<OutputEntry>) -> Result<(), RunError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|source| RunError::Io { path, source })?;
    outputs.push(OutputEntry {
        path: name.to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
        kind,
        plot: None,
    });
    Ok(())
}

/// Markdown description of every CSV written by a run.
pub fn schema_markdown(experiment: &str, tables: &[Table]) -> String {
    let mut s = format!(
        "# Output schema: {experiment}\n\nWritten by explosion-lab {VERSION}, schema revision {SCHEMA_REVISION}. \
         Every CSV starts with one `#` comment line naming the version and revision, then a header row.\n"
    );
    for t in tables {
        s.push_str(&format!(
            "\n## {}\n\n{}\n\n| column | meaning |\n|---|---|\n",
            t.file, t.description
        ));
        for (c, m) in &t.columns {
            s.push_str(&format!("| `{c}` | {m} |\n"));
        }
    }
    s
}

/// Validates the config, runs the experiment on a pool of `jobs` workers
/// and writes CSVs, SCHEMA.md, plot scripts and the manifest.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest, RunError> {
    config.validate()?;
    let t0 = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    log::info!("running {} with {} workers", config.experiment, config.jobs);
    let result = pool.install(|| run_experiment(config));

    let dir = &config.output_dir;
    let mut outputs = Vec::new();
    for t in &result.tables {
        let kind = if t.plot.is_some() { OutputKind::Curve } else { OutputKind::Table };
        write(dir, &t.file, &t.to_csv(), kind, &mut outputs)?;
        if let Some(last) = outputs.last_mut() {
            last.plot = t.plot.clone();
        }
    }
    write(
        dir,
        SCHEMA_FILE,
        schema_markdown(config.experiment.name(), &result.tables).as_bytes(),
        OutputKind::Schema,
        &mut outputs,
    )?;
    let mut manifest = RunManifest {
        artifact: "explosion-lab".into(),
        version: VERSION.into(),
        experiment: config.experiment.name().into(),
        config: config.clone(),
        tasks: result.tasks,
        assertions: result.assertions,
        outputs,
        wall_seconds: 0.0,
    };
    for (name, script) in emit_plots(&manifest) {
        write(dir, &name, script.as_bytes(), OutputKind::Plot, &mut manifest.outputs)?;
    }
    manifest.wall_seconds = t0.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, json).map_err(|source| RunError::Io { path, source })?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    fn small_compressible(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::default_for(Experiment::Compressible);
        c.resolutions = vec![17];
        c.amplitudes = vec![0.0, 1.0];
        c.output_dir = dir.to_path_buf();
        c.jobs = 2;
        c
    }

    #[test]
    fn runs_are_deterministic_and_verifiable() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = run(&small_compressible(a.path())).unwrap();
        let mut cb = small_compressible(b.path());
        cb.jobs = 1;
        let mb = run(&cb).unwrap();
        let csvs: Vec<_> = ma.outputs.iter().filter(|o| o.path.ends_with(".csv")).collect();
        assert!(!csvs.is_empty());
        for o in &csvs {
            let x = std::fs::read(a.path().join(&o.path)).unwrap();
            let y = std::fs::read(b.path().join(&o.path)).unwrap();
            assert_eq!(x, y, "{}", o.path);
        }
        assert!(a.path().join("SCHEMA.md").exists());

        let loaded = RunManifest::load(&a.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(loaded, ma);
        assert!(ma.verify(a.path()).is_empty());
        let victim = &csvs[0].path;
        std::fs::write(a.path().join(victim), b"tampered").unwrap();
        assert_eq!(ma.verify(a.path()), vec![victim.clone()]);
        assert!(mb.verify(b.path()).is_empty());
    }

    #[test]
    fn plot_scripts_follow_curve_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let m = run(&small_compressible(dir.path())).unwrap();
        let first = emit_plots(&m);
        assert_eq!(first, emit_plots(&m));
        let curves = m.outputs.iter().filter(|o| o.kind == OutputKind::Curve && o.plot.is_some()).count();
        assert_eq!(first.len(), curves);
        for (name, script) in &first {
            assert!(m.outputs.iter().any(|o| o.kind == OutputKind::Plot && &o.path == name));
            assert!(script.contains("set datafile separator ','"));
        }
        let mut bare = m.clone();
        bare.outputs.retain(|o| o.kind != OutputKind::Curve);
        assert!(emit_plots(&bare).is_empty());
    }
}
