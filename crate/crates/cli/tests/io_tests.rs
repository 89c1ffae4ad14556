//! Loader validation and round-trip behaviour.

mod common;

use common::*;
use epifit_cli::config::DataConfig;
use epifit_cli::io;
use epifit_core::row_normalize;

fn sample_dataset() -> epifit_core::StratifiedCounts {
    let spec = recovery_spec(epifit_core::ContactStructure::Identity, 3);
    let params = set_params(
        &spec,
        2,
        3,
        &[
            ("endemic.intercept", -9.0),
            ("endemic.sin", 0.4),
            ("epidemic.intercept", -7.0),
            ("epidemic.tau", 0.5),
            ("dispersion.psi", (0.2_f64).ln()),
        ],
    );
    simulate_replicates(&spec, &params, 2, 3, 30, 1, 5).remove(0)
}

#[test]
fn canonical_roundtrip_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_dataset();
    write_dataset_files(dir.path(), &data, &path_edges(3), Some(&small_contact(2)));
    let config = DataConfig {
        counts: "counts.csv".into(),
        population: "population.csv".into(),
        adjacency: "adjacency.csv".into(),
        contacts: Some("contacts.csv".into()),
    };
    let loaded = io::load_dataset(&config, dir.path()).unwrap();
    assert_eq!(loaded.counts, data);
    assert_eq!(loaded.counts.fingerprint(), data.fingerprint());
    assert!(loaded.contacts.is_some());
    // orders derived from the path graph
    assert_eq!(loaded.orders.max_order(), 2);
}

#[test]
fn shuffled_rows_load_identically() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_dataset();
    write_dataset_files(dir.path(), &data, &path_edges(3), None);
    // reverse all data rows in counts.csv
    let text = std::fs::read_to_string(dir.path().join("counts.csv")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    lines.reverse();
    let mut shuffled = vec![header];
    shuffled.extend(lines);
    std::fs::write(dir.path().join("counts.csv"), shuffled.join("\n")).unwrap();

    let config = DataConfig {
        counts: "counts.csv".into(),
        population: "population.csv".into(),
        adjacency: "adjacency.csv".into(),
        contacts: None,
    };
    let loaded = io::load_dataset(&config, dir.path()).unwrap();
    assert_eq!(loaded.counts, data);
}

#[test]
fn loader_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_dataset();
    write_dataset_files(dir.path(), &data, &path_edges(3), None);
    let config = DataConfig {
        counts: "counts.csv".into(),
        population: "population.csv".into(),
        adjacency: "adjacency.csv".into(),
        contacts: None,
    };

    // duplicated cell
    let text = std::fs::read_to_string(dir.path().join("counts.csv")).unwrap();
    let duplicated = format!("{text}{}\n", text.lines().nth(1).unwrap());
    std::fs::write(dir.path().join("counts.csv"), &duplicated).unwrap();
    let err = io::load_dataset(&config, dir.path()).unwrap_err();
    assert_eq!(err.code, "E_DUPLICATE_CELL");

    // missing cell
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(1);
    std::fs::write(dir.path().join("counts.csv"), lines.join("\n")).unwrap();
    let err = io::load_dataset(&config, dir.path()).unwrap_err();
    assert_eq!(err.code, "E_MISSING_CELL");

    // negative count: rewrite the first data row's count field
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut fields: Vec<&str> = lines[1].split(',').collect();
    fields[3] = "-1";
    lines[1] = fields.join(",");
    std::fs::write(dir.path().join("counts.csv"), lines.join("\n")).unwrap();
    let err = io::load_dataset(&config, dir.path()).unwrap_err();
    assert_eq!(err.code, "E_NEGATIVE_COUNT");

    // unknown region in the adjacency file
    std::fs::write(dir.path().join("counts.csv"), &text).unwrap();
    std::fs::write(
        dir.path().join("adjacency.csv"),
        "region_a,region_b\nr0,r1\nr1,nowhere\n",
    )
    .unwrap();
    let err = io::load_dataset(&config, dir.path()).unwrap_err();
    assert_eq!(err.code, "E_LABEL_MISMATCH");
}

#[test]
fn matrix_csv_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let c = row_normalize(&small_contact(3)).unwrap();
    let path = dir.path().join("m.csv");
    io::write_matrix_csv(&path, c.groups(), c.matrix()).unwrap();
    let (labels, values) = io::read_matrix_csv(&path).unwrap();
    assert_eq!(labels, c.groups());
    for (a, b) in values.iter().zip(c.matrix().iter()) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn age_specific_factor_set_scales_group_totals() {
    // the published under-reporting sensitivity factors, applied per group
    let groups = ["00-04", "05-14", "15-24", "25-44", "45-64", "65+"];
    let factors = [1.5, 2.5, 3.0, 3.0, 2.5, 2.0];
    let weeks = epifit_core::IsoWeek::new(2011, 27).unwrap().sequence(4);
    let counts = ndarray::Array3::from_shape_fn((4, 6, 2), |(t, g, r)| (10 + t + g + r) as u64);
    let population = ndarray::Array2::from_elem((6, 2), 1000.0);
    let data = epifit_core::StratifiedCounts::new(
        weeks,
        groups.iter().map(|s| s.to_string()).collect(),
        vec!["east".into(), "west".into()],
        counts,
        population,
    )
    .unwrap();
    let text = "00-04=1.5,05-14=2.5,15-24=3.0,25-44=3.0,45-64=2.5,65+=2.0";
    let parsed = io::parse_scale_factors(text, data.groups()).unwrap();
    assert_eq!(parsed.to_vec(), factors);
    let scaled = data.scale_by_group(&parsed).unwrap();
    for (g, factor) in factors.iter().enumerate() {
        let before: u64 = (0..4)
            .flat_map(|t| (0..2).map(move |r| (t, r)))
            .map(|(t, r)| data.counts()[(t, g, r)])
            .sum();
        let after: u64 = (0..4)
            .flat_map(|t| (0..2).map(move |r| (t, r)))
            .map(|(t, r)| scaled.counts()[(t, g, r)])
            .sum();
        // rounding keeps the group totals within half a count per cell
        let expected = before as f64 * factor;
        assert!(
            (after as f64 - expected).abs() <= 4.0,
            "group {g}: {after} vs {expected}"
        );
    }
}

#[test]
fn scale_factor_parsing() {
    let groups: Vec<String> = vec!["00-04".into(), "05-14".into(), "65+".into()];
    let positional = io::parse_scale_factors("1.5, 2.5,3", &groups).unwrap();
    assert_eq!(positional, vec![1.5, 2.5, 3.0]);
    let labelled = io::parse_scale_factors("65+=2.0,00-04=1.5", &groups).unwrap();
    assert_eq!(labelled, vec![1.5, 1.0, 2.0]);
    assert!(io::parse_scale_factors("1.5", &groups).is_err());
    assert!(io::parse_scale_factors("no-such=2", &groups).is_err());
}
