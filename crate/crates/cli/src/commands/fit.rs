//! `mvsfuse fit` — gradient-descent fitting of the pipeline parameters on
//! one or more scene directories.

use mvsfusion::error::{Error, Result};
use mvsfusion::io::{write_fit_trace, write_json};
use mvsfusion::losses::fit;
use mvsfusion::pipeline::{prepare_scene, FitParams};
use serde::{Deserialize, Serialize};

use crate::cli::FitArgs;
use crate::config::AppConfig;
use crate::runlog::RunLog;
use crate::scenedir::load_scene;

/// `fitted_params.json`: the best parameters seen plus fit provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedParamsFile {
    pub params: FitParams,
    pub best_loss: f64,
    pub epochs_run: usize,
    pub diverged: bool,
}

pub fn run(config: &mut AppConfig, args: &FitArgs) -> Result<()> {
    if let Some(epochs) = args.epochs {
        config.fit.epochs = epochs;
    }
    if let Some(lr) = args.learning_rate {
        config.fit.learning_rate = lr;
    }
    config.validate()?;

    let mut prepared = Vec::with_capacity(args.scenes.len());
    let mut bounds = None;
    for dir in &args.scenes {
        let scene = load_scene(dir)?;
        let n = scene.n_views();
        let reference = args.r#ref.unwrap_or(n / 2);
        if reference >= n {
            return Err(Error::invalid(format!(
                "reference view {reference} out of range for the {n}-view scene {}",
                dir.display()
            )));
        }
        match bounds {
            None => bounds = Some(scene.meta.bounds),
            Some(b) if b == scene.meta.bounds => {}
            Some(b) => {
                return Err(Error::invalid(format!(
                    "scene {} has depth bounds {:?}, expected {:?} like the first scene",
                    dir.display(),
                    scene.meta.bounds,
                    b
                )))
            }
        }
        prepared.push(prepare_scene(
            &scene.views,
            reference,
            &scene.gt_depths[reference],
            &scene.meta.bounds,
            config.pipeline.n_views,
        )?);
    }

    std::fs::create_dir_all(&args.out)?;
    config.echo_into(&args.out)?;
    let mut log = RunLog::create(&args.out)?;
    log.log(&format!(
        "fit {} scene(s), {} epochs, learning rate {}",
        prepared.len(),
        config.fit.epochs,
        config.fit.learning_rate
    ));

    let init = FitParams::from_config(&config.pipeline);
    let result = fit(&prepared, &config.pipeline, &init, &config.fit)?;

    write_fit_trace(&args.out.join("fit_trace.csv"), &result.trace)?;
    write_json(
        &args.out.join("fitted_params.json"),
        &FittedParamsFile {
            params: result.params,
            best_loss: result.best_loss,
            epochs_run: result.trace.len(),
            diverged: result.diverged,
        },
    )?;
    log.log(&format!(
        "fit done: best loss {} after {} epoch(s), diverged = {}",
        result.best_loss,
        result.trace.len(),
        result.diverged
    ));
    if result.diverged {
        eprintln!(
            "mvsfuse: warning: fit diverged after {} epoch(s); wrote the best parameters seen",
            result.trace.len()
        );
    }
    println!(
        "fitted {} scene(s): best loss {} ({} epochs) -> {}",
        prepared.len(),
        result.best_loss,
        result.trace.len(),
        args.out.join("fitted_params.json").display()
    );
    Ok(())
}
