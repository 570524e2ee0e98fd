//! `mvsfuse eval` — depth-map metrics, sparsification curves, and optional
//! heat maps / Chamfer distances for one fused scene.

use std::path::Path;

use mvsfusion::error::Result;
use mvsfusion::evalbench::{
    auc, chamfer, completeness, error_map, export_cloud, inlier_fraction, mae, sparsification,
};
use mvsfusion::io::{write_heatmap_png, write_metrics, write_sparsification, MetricsRow};
use mvsfusion::Grid2;

use crate::cli::EvalArgs;
use crate::commands::cloud::{fused_sources, gt_sources, input_sources, unit_confidences};
use crate::config::AppConfig;
use crate::runlog::RunLog;
use crate::scenedir::{load_fused_present, load_scene, FusedView};

/// Concatenate per-view maps into one `1 x total` grid, in view order.
fn pool(maps: &[&Grid2<f64>]) -> Grid2<f64> {
    let total: usize = maps.iter().map(|m| m.len()).sum();
    let mut data = Vec::with_capacity(total);
    for m in maps {
        data.extend_from_slice(m.as_slice());
    }
    Grid2::from_vec(1, total, data).expect("pooled grid shape")
}

struct MapEval {
    row: MetricsRow,
    /// `None` when the map and ground truth share no valid pixel.
    curve: Option<mvsfusion::evalbench::SparsificationCurve>,
}

fn evaluate_map(
    label: String,
    pred: &Grid2<f64>,
    conf: &Grid2<f64>,
    gt: &Grid2<f64>,
    threshold: f64,
    steps: usize,
) -> MapEval {
    let curve = sparsification(pred, conf, gt, steps);
    MapEval {
        row: MetricsRow {
            label,
            completeness: completeness(pred, gt),
            mae: mae(pred, gt),
            inlier_fraction: inlier_fraction(pred, gt, threshold),
            auc: curve.as_ref().and_then(auc),
        },
        curve,
    }
}

pub fn run(config: &mut AppConfig, args: &EvalArgs) -> Result<()> {
    if let Some(t) = args.inlier_threshold {
        config.eval.inlier_threshold = t;
    }
    config.validate()?;
    let eval = config.eval;

    let scene = load_scene(&args.scene)?;
    let fused = load_fused_present(&args.fused, scene.n_views())?;

    std::fs::create_dir_all(&args.out)?;
    config.echo_into(&args.out)?;
    let mut log = RunLog::create(&args.out)?;
    log.log(&format!(
        "eval scene={} fused={} ({} fused views)",
        args.scene.display(),
        args.fused.display(),
        fused.len()
    ));

    let curves_dir = args.out.join("curves");
    std::fs::create_dir_all(&curves_dir)?;

    let mut rows = Vec::new();
    let mut write_eval = |e: &MapEval, curve_path: &Path| -> Result<()> {
        match &e.curve {
            Some(curve) => write_sparsification(curve_path, curve)?,
            None => std::fs::write(curve_path, "fraction,mae\n")?,
        }
        rows.push(e.row.clone());
        Ok(())
    };

    for (i, view) in scene.views.iter().enumerate() {
        let e = evaluate_map(
            format!("input/{i:03}"),
            &view.depth,
            &view.confidence,
            &scene.gt_depths[i],
            eval.inlier_threshold,
            eval.sparsification_steps,
        );
        write_eval(&e, &curves_dir.join(format!("input_{i:03}.csv")))?;
    }
    for (i, f) in &fused {
        let e = evaluate_map(
            format!("fused/{i:03}"),
            &f.depth,
            &f.confidence,
            &scene.gt_depths[*i],
            eval.inlier_threshold,
            eval.sparsification_steps,
        );
        write_eval(&e, &curves_dir.join(format!("fused_{i:03}.csv")))?;
    }

    // Pooled rows: every pixel of every view as one flat map.
    let input_pred = pool(&scene.views.iter().map(|v| &v.depth).collect::<Vec<_>>());
    let input_conf = pool(&scene.views.iter().map(|v| &v.confidence).collect::<Vec<_>>());
    let input_gt = pool(&scene.gt_depths.iter().collect::<Vec<_>>());
    let e = evaluate_map(
        "input/all".into(),
        &input_pred,
        &input_conf,
        &input_gt,
        eval.inlier_threshold,
        eval.sparsification_steps,
    );
    write_eval(&e, &curves_dir.join("input_all.csv"))?;

    let fused_pred = pool(&fused.iter().map(|(_, f)| &f.depth).collect::<Vec<_>>());
    let fused_conf = pool(&fused.iter().map(|(_, f)| &f.confidence).collect::<Vec<_>>());
    let fused_gt = pool(&fused.iter().map(|(i, _)| &scene.gt_depths[*i]).collect::<Vec<_>>());
    let e = evaluate_map(
        "fused/all".into(),
        &fused_pred,
        &fused_conf,
        &fused_gt,
        eval.inlier_threshold,
        eval.sparsification_steps,
    );
    write_eval(&e, &curves_dir.join("fused_all.csv"))?;

    write_metrics(&args.out.join("metrics.csv"), &rows)?;

    if args.report_png {
        let heat_dir = args.out.join("heatmaps");
        std::fs::create_dir_all(&heat_dir)?;
        for (i, view) in scene.views.iter().enumerate() {
            let errors = error_map(&view.depth, &scene.gt_depths[i]);
            write_heatmap_png(&heat_dir.join(format!("input_{i:03}.png")), &errors, eval.heatmap_max)?;
        }
        for (i, f) in &fused {
            let errors = error_map(&f.depth, &scene.gt_depths[*i]);
            write_heatmap_png(&heat_dir.join(format!("fused_{i:03}.png")), &errors, eval.heatmap_max)?;
        }
        log.log("eval heat maps written");
    }

    if args.cloud {
        let ones = unit_confidences(&scene);
        let gt_cloud = export_cloud(&gt_sources(&scene, &ones), None)?;
        let input_cloud = export_cloud(&input_sources(&scene), None)?;
        let fused_refs: Vec<(usize, FusedView)> = fused.clone();
        let fused_cloud = export_cloud(&fused_sources(&scene, &fused_refs), Some(&config.filter))?;
        let chamfer_rows = vec![
            ("input_unfiltered".to_string(), chamfer(&input_cloud, &gt_cloud)),
            ("fused_filtered".to_string(), chamfer(&fused_cloud, &gt_cloud)),
        ];
        crate::commands::cloud::write_chamfer_csv(&args.out.join("chamfer.csv"), &chamfer_rows)?;
        log.log("eval chamfer distances written");
    }

    log.log(&format!("eval done ({} rows)", rows.len()));
    println!("wrote {} metric rows to {}", rows.len(), args.out.join("metrics.csv").display());
    Ok(())
}
