use super::config::{ConfigError, EllipseConfig};
use crate::dynamics::RunError;
use crate::resnet::{generate_ellipses, probability_grid, train, EllipseDataset, ProbabilityGrid, TrainOutcome};

#[derive(Debug, Clone)]
pub struct EllipseArtifacts {
    pub config: EllipseConfig,
    pub dataset: EllipseDataset,
    /// Training result and the probability grid of the reported network.
    pub training: Result<(TrainOutcome, ProbabilityGrid), RunError>,
}

/// Generates the dataset, trains, and evaluates the probability grid on a
/// pool of `workers` threads.
pub fn run_ellipse(cfg: &EllipseConfig, workers: usize) -> Result<EllipseArtifacts, ConfigError> {
    cfg.validate()?;
    let hp = cfg.hyper_params()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let dataset = generate_ellipses(&cfg.dataset_spec(), cfg.data_seed());
    let training = pool.install(|| {
        train(&dataset, cfg.scheme, cfg.method, &hp, cfg.seed, &cfg.train_options()).map(|outcome| {
            let grid = probability_grid(
                &outcome.net,
                (cfg.grid_x[0], cfg.grid_x[1]),
                (cfg.grid_y[0], cfg.grid_y[1]),
                (cfg.grid_resolution, cfg.grid_resolution),
            );
            (outcome, grid)
        })
    });
    Ok(EllipseArtifacts {
        config: cfg.clone(),
        dataset,
        training,
    })
}
