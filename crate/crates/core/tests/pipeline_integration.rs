//! Whole-pipeline properties beyond the acceptance criteria.

mod common;

use common::scene;
use polymap::camera::{CameraPose, Point3};
use polymap::map::MapPolygon3D;
use polymap::pipeline::{process_frame, run_pipeline, FrameBundle};

fn shift_pose(base: &CameraPose<f64>, delta: Point3<f64>) -> CameraPose<f64> {
    CameraPose::new(*base.rotation(), base.translation().add(&delta)).unwrap()
}

#[test]
fn translation_only_pose_shifts_every_polygon() {
    let dir = tempfile::tempdir().unwrap();
    let corridor = scene::Corridor::default();
    let mut rng = common::rng(21);
    let (frames, poses_path) = corridor.write_sequence(dir.path(), 1, 0.05, &mut rng);
    let config = corridor.config(48, &poses_path);

    let base = process_frame(&config, &frames[0]).unwrap();
    let delta = Point3::new(3.0, -1.0, 7.0);
    let shifted_frame = FrameBundle {
        pose: shift_pose(&frames[0].pose, delta),
        ..frames[0].clone()
    };
    let shifted = process_frame(&config, &shifted_frame).unwrap();

    assert_eq!(base.polygons.len(), shifted.polygons.len());
    for (a, b) in base.polygons.iter().zip(&shifted.polygons) {
        assert_eq!(a.superpixel_id, b.superpixel_id);
        for (va, vb) in a.vertices.iter().zip(&b.vertices) {
            assert!((vb.x - (va.x + delta.x)).abs() < 1e-9);
            assert!((vb.y - (va.y + delta.y)).abs() < 1e-9);
            assert!((vb.z - (va.z + delta.z)).abs() < 1e-9);
        }
    }
}

#[test]
fn frame_results_are_independent_of_other_frames() {
    let dir = tempfile::tempdir().unwrap();
    let corridor = scene::Corridor::default();
    let mut rng = common::rng(22);
    let (frames, poses_path) = corridor.write_sequence(dir.path(), 3, 0.05, &mut rng);
    let config = corridor.config(48, &poses_path);

    // Processing frame 1 alone must equal processing it within the batch.
    let alone = process_frame(&config, &frames[1]).unwrap();
    let again = process_frame(&config, &frames[1]).unwrap();
    let key = |p: &MapPolygon3D<f64>| (p.frame_id, p.superpixel_id);
    assert_eq!(alone.polygons.len(), again.polygons.len());
    for (a, b) in alone.polygons.iter().zip(&again.polygons) {
        assert_eq!(key(a), key(b));
        assert_eq!(a.vertices, b.vertices);
    }

    // A full run over all frames reproduces the same per-frame stats as
    // single-frame runs (polygon and vertex counts match).
    let full = run_pipeline(&config, &frames, &dir.path().join("full")).unwrap();
    let mut single_total = 0usize;
    for f in &frames {
        single_total += process_frame(&config, f).unwrap().polygons.len();
    }
    assert_eq!(full.polygon_count, single_total);
}

#[test]
fn corrupt_frames_are_skipped_and_reported() {
    let dir = tempfile::tempdir().unwrap();
    let corridor = scene::Corridor::default();
    let mut rng = common::rng(23);
    let (mut frames, poses_path) = corridor.write_sequence(dir.path(), 3, 0.05, &mut rng);
    frames[1].depth = dir.path().join("missing_depth.png");
    let config = corridor.config(48, &poses_path);

    let report = run_pipeline(&config, &frames, &dir.path().join("out")).unwrap();
    assert_eq!(report.skipped.len(), 1);
    assert_eq!(report.skipped[0].0, 1);
    assert_eq!(report.timings.len(), 2);
    assert!(report.map_path.exists());
    let stats_text = std::fs::read_to_string(dir.path().join("out/stats.txt")).unwrap();
    assert!(stats_text.contains("skipped_frame=1"), "{stats_text}");
}

#[test]
fn timing_report_is_ordered_by_frame_id() {
    let dir = tempfile::tempdir().unwrap();
    let corridor = scene::Corridor::default();
    let mut rng = common::rng(24);
    let (frames, poses_path) = corridor.write_sequence(dir.path(), 4, 0.05, &mut rng);
    // Present frames out of order; the report must still be sorted.
    let shuffled = vec![
        frames[2].clone(),
        frames[0].clone(),
        frames[3].clone(),
        frames[1].clone(),
    ];
    let config = corridor.config(48, &poses_path);
    let report = run_pipeline(&config, &shuffled, &dir.path().join("out")).unwrap();
    let ids: Vec<u64> = report.timings.iter().map(|t| t.frame_id).collect();
    assert_eq!(ids, vec![0, 1, 2, 3]);
}

#[test]
fn ground_smoothing_flattens_the_road_band() {
    // On the corridor scene, road depth after the pipeline's refit agrees
    // with the analytic ground plane much better than the noisy input.
    let corridor = scene::Corridor::default();
    let mut rng = common::rng(25);
    let rendered = corridor.render(0, 0.1, &mut rng);

    let lab = polymap::color::rgb_grid_to_lab::<f64>(&rendered.rgb);
    let params = polymap::snic::SnicParams {
        k_superpixels: 96,
        spatial_norm: (scene::CORRIDOR_SIZE * scene::CORRIDOR_SIZE) as f64 / 96.0,
        color_norm: 100.0,
        semantic_penalty: 10.0,
    };
    let part = polymap::snic::run_snic(&lab, &rendered.labels, &params).unwrap();
    let (refined, rmask, _) =
        polymap::refine::apply_planes(&part, &rendered.depth, &rendered.mask).unwrap();
    let ransac = polymap::refine::RansacParams::defaults_with_seed(5);
    let (outcome, smoothed, smask) = polymap::refine::ransac_ground(
        &refined,
        &rmask,
        &rendered.labels,
        scene::ROAD,
        &corridor.intrinsics,
        &ransac,
    )
    .unwrap();
    assert!(matches!(
        outcome,
        polymap::refine::GroundOutcome::Smoothed { .. }
    ));

    // Compare road depth against the analytic ground-plane depth.
    let mut noisy_err = 0.0;
    let mut smooth_err = 0.0;
    let mut n = 0usize;
    for ((x, y), &label) in rendered.labels.iter() {
        if label != scene::ROAD || !*smask.get(x, y) || !*rendered.mask.get(x, y) {
            continue;
        }
        let (truth, hit_label) = corridor.true_hit(x as f64, y as f64);
        if hit_label != scene::ROAD {
            continue;
        }
        noisy_err += (rendered.depth.get(x, y) - truth).powi(2);
        smooth_err += (smoothed.get(x, y) - truth).powi(2);
        n += 1;
    }
    assert!(n > 500, "only {n} road pixels compared");
    let noisy_rms = (noisy_err / n as f64).sqrt();
    let smooth_rms = (smooth_err / n as f64).sqrt();
    assert!(
        smooth_rms < noisy_rms / 3.0,
        "road smoothing too weak: {smooth_rms:.4} vs noisy {noisy_rms:.4}"
    );
}
