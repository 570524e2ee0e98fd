//! `mvsfuse synth` — generate a synthetic scene directory.

use mvsfusion::error::Result;
use mvsfusion::evalbench::generate_scene;

use crate::cli::SynthArgs;
use crate::config::AppConfig;
use crate::runlog::RunLog;
use crate::scenedir::write_scene;

pub fn run(config: &mut AppConfig, args: &SynthArgs) -> Result<()> {
    let scene_config = &mut config.scene;
    if let Some(seed) = args.seed {
        scene_config.seed = seed;
    }
    if let Some(kind) = args.kind {
        scene_config.kind = kind;
    }
    if let Some(height) = args.height {
        scene_config.height = height;
    }
    if let Some(width) = args.width {
        scene_config.width = width;
    }
    if let Some(views) = args.views {
        scene_config.n_views = views;
    }
    if let Some(noise) = args.noise {
        scene_config.noise_std = noise;
    }
    if let Some(outliers) = args.outliers {
        scene_config.outlier_fraction = outliers;
    }
    if let Some(jitter) = args.jitter {
        scene_config.confidence_jitter = jitter;
    }
    config.validate()?;

    std::fs::create_dir_all(&args.out)?;
    let mut log = RunLog::create(&args.out)?;
    let scene_config = config.scene;
    log.log(&format!(
        "synth kind={} size={}x{} views={} seed={}",
        scene_config.kind,
        scene_config.height,
        scene_config.width,
        scene_config.n_views,
        scene_config.seed
    ));
    let scene = generate_scene(&scene_config)?;
    write_scene(&args.out, &scene_config, &scene)?;
    config.echo_into(&args.out)?;
    log.log("synth done");
    println!(
        "wrote {} views ({}x{}, kind {}) to {}",
        scene_config.n_views,
        scene_config.height,
        scene_config.width,
        scene_config.kind,
        args.out.display()
    );
    Ok(())
}
