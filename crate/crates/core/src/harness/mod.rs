//! Config-driven experiments: replicated particle runs with best/worst-agent
//! distance metrics and cross-run medians, the ellipse classification run,
//! and their CSV artifacts.

mod config;
mod ellipse;
mod experiment;
pub mod output;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{Bound, Config, ConfigError, EllipseConfig, ExperimentConfig};
pub use ellipse::{run_ellipse, EllipseArtifacts};
pub use experiment::{
    distance_metrics, init_particles, median, run_experiment, summarize, MetricRow, RunArtifacts, RunFailure,
    RunResult, SummaryRow,
};

/// Bundled presets, `(name, TOML source)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig1_a", include_str!("../../presets/fig1_a.toml")),
    ("fig1_b", include_str!("../../presets/fig1_b.toml")),
    ("fig1_c", include_str!("../../presets/fig1_c.toml")),
    ("fig1_d", include_str!("../../presets/fig1_d.toml")),
    ("fig1_e", include_str!("../../presets/fig1_e.toml")),
    ("fig1_f", include_str!("../../presets/fig1_f.toml")),
    ("fig2_sgld_d10", include_str!("../../presets/fig2_sgld_d10.toml")),
    ("fig2_mf_sgld_d10", include_str!("../../presets/fig2_mf_sgld_d10.toml")),
    (
        "fig2_hom_sgld_d10",
        include_str!("../../presets/fig2_hom_sgld_d10.toml"),
    ),
    (
        "fig2_mf_hom_sgld_d10",
        include_str!("../../presets/fig2_mf_hom_sgld_d10.toml"),
    ),
    ("fig2_sgld_d50", include_str!("../../presets/fig2_sgld_d50.toml")),
    ("fig2_mf_sgld_d50", include_str!("../../presets/fig2_mf_sgld_d50.toml")),
    (
        "fig2_hom_sgld_d50",
        include_str!("../../presets/fig2_hom_sgld_d50.toml"),
    ),
    (
        "fig2_mf_hom_sgld_d50",
        include_str!("../../presets/fig2_mf_hom_sgld_d50.toml"),
    ),
    (
        "ellipse_sgld_verlet",
        include_str!("../../presets/ellipse_sgld_verlet.toml"),
    ),
    (
        "ellipse_hom_verlet",
        include_str!("../../presets/ellipse_hom_verlet.toml"),
    ),
    (
        "ellipse_sgld_euler",
        include_str!("../../presets/ellipse_sgld_euler.toml"),
    ),
    (
        "ellipse_hom_euler",
        include_str!("../../presets/ellipse_hom_euler.toml"),
    ),
];

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

pub fn preset(name: &str, overrides: &[(String, String)]) -> Result<Config, ConfigError> {
    let src = preset_source(name).ok_or_else(|| ConfigError::UnknownPreset(name.into()))?;
    Config::parse(src, overrides)
}

/// Loads `target` as a preset name, or else as a config file path.
pub fn resolve(target: &str, overrides: &[(String, String)]) -> Result<Config, ConfigError> {
    if preset_source(target).is_some() {
        preset(target, overrides)
    } else {
        let path = Path::new(target);
        if !path.exists() {
            return Err(ConfigError::UnknownPreset(target.into()));
        }
        Config::load(path, overrides)
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing artifacts: {0}")]
    Io(#[from] io::Error),
}

/// What a finished [`run_config`] produced.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// `(run, iteration, message)` for every numerically aborted run.
    pub failures: Vec<(usize, usize, String)>,
}

/// Runs a config and writes its artifacts (plus the resolved `config.toml`)
/// into `out`. Numerical aborts are reported, not returned as errors; the
/// artifacts of completed work are still written.
pub fn run_config(config: &Config, workers: usize, out: &Path) -> Result<RunReport, HarnessError> {
    config.validate()?;
    std::fs::create_dir_all(out)?;
    let mut report = RunReport::default();
    let config_path = out.join("config.toml");
    std::fs::write(&config_path, config.to_toml())?;
    report.files.push(config_path);
    match config {
        Config::Particles(cfg) => {
            let art = run_experiment(cfg, workers)?;
            report.files.extend(output::write_particle_artifacts(&art, out)?);
            report.failures = art
                .failures()
                .map(|(run, f)| (run, f.iteration, f.message.clone()))
                .collect();
        }
        Config::Ellipse(cfg) => {
            let art = run_ellipse(cfg, workers)?;
            report
                .files
                .push(output::write_dataset(&art.dataset, &out.join("dataset.csv"))?);
            match &art.training {
                Ok((outcome, grid)) => {
                    report
                        .files
                        .push(output::write_loss_curve(&outcome.curve, &out.join("loss_curve.csv"))?);
                    report.files.push(output::write_grid(grid, &out.join("grid.csv"))?);
                    report
                        .files
                        .push(output::write_params(&outcome.net, &out.join("params.csv"))?);
                }
                Err(e) => report.failures.push((0, e.iteration, e.source.to_string())),
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_parse_and_validate() {
        for (name, _) in PRESETS {
            let c = preset(name, &[]).unwrap();
            assert_eq!(c.name(), *name);
            c.validate().unwrap();
            assert_eq!(Config::parse(&c.to_toml(), &[]).unwrap(), c, "{name}");
        }
    }

    #[test]
    fn preset_parameters() {
        let Config::Particles(f) = preset("fig1_f", &[]).unwrap() else {
            panic!("fig1_f is a particle preset")
        };
        assert_eq!((f.agents, f.iters, f.beta, f.lambda), (25, 150, 10.0, 10.0));
        let Config::Particles(h) = preset("fig2_mf_hom_sgld_d50", &[]).unwrap() else {
            panic!("fig2 presets are particle presets")
        };
        assert_eq!(
            (h.dim, h.outer_dt, h.epsilon, h.osc_delta, h.runs),
            (50, 0.005, 0.01, 0.01, 50)
        );
        assert!(!h.traces_enabled());
        assert!(matches!(preset("ellipse_hom_euler", &[]).unwrap(), Config::Ellipse(_)));
        assert!(matches!(preset("nope", &[]), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn run_config_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let over = [
            ("iters".to_string(), "5".to_string()),
            ("runs".to_string(), "2".to_string()),
        ];
        let cfg = preset("fig1_c", &over).unwrap();
        let report = run_config(&cfg, 2, dir.path()).unwrap();
        assert!(report.failures.is_empty());
        let names: Vec<_> = report
            .files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(
            names,
            [
                "config.toml",
                "traces.csv",
                "metrics.csv",
                "summary.csv",
                "failures.csv"
            ]
        );
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 6);
        let traces = std::fs::read_to_string(dir.path().join("traces.csv")).unwrap();
        assert!(traces.starts_with("run,agent,iter,x0,x1\n"));
        assert_eq!(traces.lines().count(), 1 + 2 * 6 * 25);
    }
}
