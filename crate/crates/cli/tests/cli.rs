//! Command-line behavior: exit codes, warning lines, flag and environment
//! overrides, and command ordering requirements.

mod util;

use std::path::Path;

use serde_json::Value;
use util::{copy_golden_inputs, copy_tree, fixture_dir, fsv, fsv_env, read, run_full_pipeline};

/// A minimal workspace: golden base layers + config, with an empty tree.
fn stage_empty_tree(dir: &Path) {
    copy_tree(&fixture_dir().join("base"), &dir.join("base"));
    std::fs::copy(fixture_dir().join("config.toml"), dir.join("config.toml")).unwrap();
    std::fs::create_dir_all(dir.join("tree")).unwrap();
}

fn write_layer(dir: &Path, rel: &str, kind: &str, ipc: &[i64], degenerate: bool) {
    let layer_dir = dir.join("tree").join(rel);
    std::fs::create_dir_all(&layer_dir).unwrap();
    let features: Vec<Value> = ipc
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x0 = i as f64;
            let ring = if degenerate {
                // Collinear: zero area survives no repair.
                vec![[x0, 0.0], [x0 + 1.0, 0.0], [x0 + 2.0, 0.0], [x0, 0.0]]
            } else {
                vec![
                    [x0, 0.0],
                    [x0 + 1.0, 0.0],
                    [x0 + 1.0, 1.0],
                    [x0, 1.0],
                    [x0, 0.0],
                ]
            };
            serde_json::json!({
                "type": "Feature",
                "properties": { kind: v },
                "geometry": { "type": "Polygon", "coordinates": [ring] },
            })
        })
        .collect();
    let doc = serde_json::json!({ "type": "FeatureCollection", "features": features });
    let name = layer_dir.join(format!("{kind}.geojson"));
    std::fs::write(name, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
}

#[test]
fn catalog_of_empty_root_succeeds_with_zero_entries() {
    let tmp = tempfile::tempdir().unwrap();
    stage_empty_tree(tmp.path());
    let r = fsv(tmp.path(), &["catalog"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("catalog: 0 entries"), "{}", r.stdout);
    assert!(tmp.path().join("out/catalog.csv").exists());
}

#[test]
fn catalog_warns_on_malformed_names_and_skips_them() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    stage_empty_tree(dir);
    write_layer(dir, "EA/202102", "CS", &[2, 3, 4], false);
    // A stray file and a malformed period directory must be skipped with
    // warnings, not fail the walk.
    std::fs::write(dir.join("tree/EA/202102/WEIRD.geojson"), "{}").unwrap();
    write_layer(dir, "EA/2021xx", "CS", &[2], false);

    let r = fsv(dir, &["catalog"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("catalog: 1 entries"), "{}", r.stdout);
    assert!(
        r.stderr.contains("warning: skipping file not named CS/ML1/ML2"),
        "{}",
        r.stderr
    );
    assert!(
        r.stderr
            .contains("warning: skipping directory not named YYYYMM with a publication month"),
        "{}",
        r.stderr
    );
}

#[test]
fn duplicate_layer_entry_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    copy_golden_inputs(dir);
    // The same (region, period, kind) in a second format is a collision.
    for ext in ["shp", "dbf", "prj"] {
        std::fs::copy(
            dir.join(format!("tree/WA/202102/CS.{ext}")),
            dir.join(format!("tree/EA/202102/CS.{ext}")),
        )
        .unwrap();
    }
    let r = fsv(dir, &["catalog"]);
    assert_eq!(r.code, 2, "stdout: {} stderr: {}", r.stdout, r.stderr);
    assert!(r.stderr.contains("duplicate catalog entry"), "{}", r.stderr);
}

#[test]
fn degenerate_layer_geometry_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    stage_empty_tree(dir);
    write_layer(dir, "EA/202102", "CS", &[2], true);
    let r = fsv(dir, &["catalog"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = fsv(dir, &["build"]);
    assert_eq!(r.code, 3, "stdout: {} stderr: {}", r.stdout, r.stderr);
    assert!(r.stderr.contains("degenerate"), "{}", r.stderr);
}

#[test]
fn evaluation_with_no_scorable_pairs_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    copy_golden_inputs(dir);
    // Restricting to the first period leaves every prediction target
    // outside the panel, so the join is empty.
    let range = ["--periods", "2021-02..2021-02"];
    let r = fsv(dir, &["catalog"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = fsv(dir, &[&["build"], &range[..]].concat());
    assert_eq!(r.code, 0, "{}", r.stderr);
    let r = fsv(dir, &[&["evaluate"], &range[..]].concat());
    assert_eq!(r.code, 4, "stdout: {} stderr: {}", r.stdout, r.stderr);
}

#[test]
fn commands_require_their_predecessors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    copy_golden_inputs(dir);

    let r = fsv(dir, &["build"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("run the catalog command first"), "{}", r.stderr);

    let r = fsv(dir, &["evaluate"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("run the build command first"), "{}", r.stderr);

    let r = fsv(dir, &["report"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("run the evaluate command first"), "{}", r.stderr);
}

#[test]
fn sources_flag_restricts_predictions_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    copy_golden_inputs(dir);
    for cmd in ["catalog", "build"] {
        let r = fsv(dir, &[cmd]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    let r = fsv(dir, &["evaluate", "--sources", "PPS"]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    let predictions = read(&dir.join("out/predictions.csv"));
    for line in predictions.lines().skip(1) {
        assert!(line.contains(",PPS,"), "non-PPS row survived: {line}");
    }
    assert_eq!(predictions.lines().count(), 51, "header + 50 PPS rows");

    let doc: Value = serde_json::from_str(&read(&dir.join("out/reports/metrics.json"))).unwrap();
    let sources: Vec<&String> = doc["groupings"]["source"]
        .as_object()
        .unwrap()
        .keys()
        .collect();
    assert_eq!(sources, ["PPS"]);
}

#[test]
fn threshold_flags_change_filtering() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    copy_golden_inputs(dir);
    let r = fsv(dir, &["catalog"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    // Lower thresholds keep the sliver (2^-8 sq deg) and the 0.4375-covered
    // atom that the default run drops.
    let r = fsv(
        dir,
        &[
            "build",
            "--threshold-area",
            "0.003",
            "--threshold-coverage",
            "0.4",
        ],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let panel = read(&dir.join("out/panel.csv"));
    assert_eq!(panel.lines().count(), 1 + 143, "one extra low-coverage row");
    assert!(
        panel.contains(",AAA,A1,L3,2021-02,CS,1,1.000000"),
        "sliver no longer trims coverage"
    );
    assert!(
        panel.contains(",AAA,A4,L3,2021-10,CS,4,0.437500"),
        "low-coverage atom admitted at the relaxed threshold"
    );
}

#[test]
fn data_root_env_var_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    copy_golden_inputs(dir);
    std::fs::rename(dir.join("tree"), dir.join("actual_tree")).unwrap();
    // The configured root no longer exists, so only the override can work.
    let r = fsv(dir, &["catalog"]);
    assert_eq!(r.code, 1);

    let root = dir.join("actual_tree");
    let r = fsv_env(dir, &["catalog"], &[("FSV_DATA_ROOT", root.to_str().unwrap())]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("catalog: 14 entries"), "{}", r.stdout);
}

#[test]
fn missing_config_file_fails_plainly() {
    let tmp = tempfile::tempdir().unwrap();
    let r = fsv(tmp.path(), &["catalog"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.starts_with("error:"), "{}", r.stderr);
}

#[test]
fn full_run_then_sources_rerun_is_consistent() {
    // An end-to-end sanity pass plus a rerun with a narrower source list:
    // the narrowed report must equal the corresponding slice of the full
    // report (same keys, same values).
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    copy_golden_inputs(dir);
    run_full_pipeline(dir);
    let full: Value = serde_json::from_str(&read(&dir.join("out/reports/metrics.json"))).unwrap();

    let r = fsv(dir, &["evaluate", "--sources", "FEWSNET"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let narrowed: Value =
        serde_json::from_str(&read(&dir.join("out/reports/metrics.json"))).unwrap();

    assert_eq!(
        narrowed["groupings"]["source"]["FEWSNET"],
        full["groupings"]["source"]["FEWSNET"],
        "per-source metrics must not depend on which other sources ran"
    );
}
