//! `mvsfuse cloud` — point-cloud export and Chamfer distances, plus the
//! cloud helpers shared with `mvsfuse eval --cloud`.

use std::path::Path;

use mvsfusion::error::Result;
use mvsfusion::evalbench::{chamfer, export_cloud, CloudSource, PointCloud};
use mvsfusion::io::write_ply;
use mvsfusion::Grid2;

use crate::cli::CloudArgs;
use crate::config::AppConfig;
use crate::runlog::RunLog;
use crate::scenedir::{load_fused_present, LoadedScene};

/// One cloud source per input view (corrupted depth + its confidence).
pub fn input_sources(scene: &LoadedScene) -> Vec<CloudSource<'_>> {
    scene
        .views
        .iter()
        .enumerate()
        .map(|(i, v)| CloudSource {
            depth: &v.depth,
            confidence: &v.confidence,
            camera: &v.camera,
            view_id: i as u32,
        })
        .collect()
}

/// Full-confidence maps for the ground-truth cloud.
pub fn unit_confidences(scene: &LoadedScene) -> Vec<Grid2<f64>> {
    scene.gt_depths.iter().map(|g| Grid2::filled(g.height(), g.width(), 1.0)).collect()
}

/// One cloud source per ground-truth view; `ones` must come from
/// [`unit_confidences`].
pub fn gt_sources<'a>(scene: &'a LoadedScene, ones: &'a [Grid2<f64>]) -> Vec<CloudSource<'a>> {
    scene
        .gt_depths
        .iter()
        .zip(ones)
        .enumerate()
        .map(|(i, (depth, confidence))| CloudSource {
            depth,
            confidence,
            camera: &scene.views[i].camera,
            view_id: i as u32,
        })
        .collect()
}

/// One cloud source per fused view (`(view index, maps)` pairs).
pub fn fused_sources<'a>(
    scene: &'a LoadedScene,
    fused: &'a [(usize, crate::scenedir::FusedView)],
) -> Vec<CloudSource<'a>> {
    fused
        .iter()
        .map(|(i, f)| CloudSource {
            depth: &f.depth,
            confidence: &f.confidence,
            camera: &scene.views[*i].camera,
            view_id: *i as u32,
        })
        .collect()
}

/// Write `label,chamfer` rows; a missing distance (empty cloud) is an empty
/// cell.
pub fn write_chamfer_csv(path: &Path, rows: &[(String, Option<f64>)]) -> Result<()> {
    let mut text = String::from("label,chamfer\n");
    for (label, value) in rows {
        let cell = value.map(|v| v.to_string()).unwrap_or_default();
        text.push_str(&format!("{label},{cell}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn run(config: &AppConfig, args: &CloudArgs) -> Result<()> {
    config.validate()?;
    let scene = crate::scenedir::load_scene(&args.scene)?;

    std::fs::create_dir_all(&args.out)?;
    config.echo_into(&args.out)?;
    let mut log = RunLog::create(&args.out)?;
    log.log(&format!("cloud scene={}", args.scene.display()));

    let ones = unit_confidences(&scene);
    let gt = export_cloud(&gt_sources(&scene, &ones), None)?;
    write_ply(&args.out.join("gt.ply"), &gt)?;

    let inputs = input_sources(&scene);
    let input = export_cloud(&inputs, None)?;
    write_ply(&args.out.join("input.ply"), &input)?;

    let mut rows: Vec<(String, Option<f64>)> =
        vec![("input".into(), chamfer(&input, &gt))];

    let write_filtered = |label: &str,
                          sources: &[CloudSource],
                          out: &Path,
                          rows: &mut Vec<(String, Option<f64>)>|
     -> Result<PointCloud> {
        let cloud = export_cloud(sources, Some(&config.filter))?;
        write_ply(out, &cloud)?;
        rows.push((label.to_string(), chamfer(&cloud, &gt)));
        Ok(cloud)
    };

    if !args.no_filter {
        write_filtered("input_filtered", &inputs, &args.out.join("input_filtered.ply"), &mut rows)?;
    }

    if let Some(fused_dir) = &args.fused {
        let fused = load_fused_present(fused_dir, scene.n_views())?;
        let sources = fused_sources(&scene, &fused);
        let cloud = export_cloud(&sources, None)?;
        write_ply(&args.out.join("fused.ply"), &cloud)?;
        rows.push(("fused".into(), chamfer(&cloud, &gt)));
        if !args.no_filter {
            write_filtered(
                "fused_filtered",
                &sources,
                &args.out.join("fused_filtered.ply"),
                &mut rows,
            )?;
        }
    }

    write_chamfer_csv(&args.out.join("chamfer.csv"), &rows)?;
    log.log(&format!("cloud done ({} comparisons)", rows.len()));
    println!("wrote {} cloud comparison(s) to {}", rows.len(), args.out.display());
    Ok(())
}
