//! `mvsfuse fuse` — fuse reference views of a scene, in parallel over views.

use mvsfusion::error::{Error, Result};
use mvsfusion::geometry::is_valid_depth;
use mvsfusion::io::{write_pfm, write_volume};
use mvsfusion::pipeline::{fuse_view, FuseMode};

use crate::cli::FuseArgs;
use crate::config::AppConfig;
use crate::jobs::parallel_map;
use crate::runlog::RunLog;
use crate::scenedir::{load_scene, view_dir, FuseStats, ViewStats};

pub fn run(config: &mut AppConfig, args: &FuseArgs, jobs: usize) -> Result<()> {
    if args.brute_force {
        config.pipeline.mode = FuseMode::BruteForce;
    }
    if let Some(mode) = args.mode {
        config.pipeline.mode = mode.into();
    }
    if let Some(m) = args.hypotheses {
        config.pipeline.hypotheses = m;
    }
    if let Some(m) = args.brute_force_hypotheses {
        config.pipeline.brute_force_hypotheses = m;
    }
    if let Some(n) = args.views {
        config.pipeline.n_views = n;
    }
    config.validate()?;

    let scene = load_scene(&args.scene)?;
    let n = scene.n_views();
    let refs: Vec<usize> = if args.refs.is_empty() {
        (0..n).collect()
    } else {
        let mut refs = args.refs.clone();
        refs.sort_unstable();
        refs.dedup();
        if let Some(&bad) = refs.iter().find(|&&v| v >= n) {
            return Err(Error::invalid(format!(
                "reference view {bad} out of range for a {n}-view scene"
            )));
        }
        refs
    };

    std::fs::create_dir_all(&args.out)?;
    config.echo_into(&args.out)?;
    let mut log = RunLog::create(&args.out)?;
    log.log(&format!(
        "fuse scene={} mode={:?} refs={refs:?} jobs={jobs}",
        args.scene.display(),
        config.pipeline.mode
    ));

    let pipeline = config.pipeline.clone();
    let results: Vec<Result<ViewStats>> = parallel_map(refs.len(), jobs, |k| {
        let view = refs[k];
        let outcome = fuse_view(&scene.views, view, &scene.meta.bounds, &pipeline, args.dump_vcv)?;
        let dir = view_dir(&args.out, view);
        std::fs::create_dir_all(&dir)?;
        write_pfm(&dir.join("fused_depth.pfm"), &outcome.output.depth.values)?;
        write_pfm(&dir.join("fused_confidence.pfm"), &outcome.output.confidence.values)?;
        if let Some(windows) = &outcome.windows {
            write_pfm(&dir.join("window_min.pfm"), &windows.bound_min)?;
            write_pfm(&dir.join("window_max.pfm"), &windows.bound_max)?;
        }
        if args.dump_vcv {
            if let Some(volume) = &outcome.volume {
                write_volume(&dir.join("vcv.raw"), volume)?;
            }
        }
        let valid_pixels =
            outcome.output.depth.values.iter().filter(|&&d| is_valid_depth(d)).count();
        Ok(ViewStats { view, volume_bytes: outcome.volume_bytes, valid_pixels })
    });

    let mut views = Vec::with_capacity(results.len());
    for r in results {
        views.push(r?);
    }
    let hypotheses = match config.pipeline.mode {
        FuseMode::Vcv => config.pipeline.hypotheses,
        FuseMode::BruteForce | FuseMode::Conventional => config.pipeline.brute_force_hypotheses,
    };
    let stats = FuseStats { mode: config.pipeline.mode, hypotheses, views };
    mvsfusion::io::write_json(&args.out.join("stats.json"), &stats)?;
    log.log(&format!("fuse done ({} views)", stats.views.len()));
    println!(
        "fused {} view(s) in {:?} mode to {}",
        stats.views.len(),
        config.pipeline.mode,
        args.out.display()
    );
    Ok(())
}
