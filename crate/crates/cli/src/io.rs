//! CSV ingestion and emission.
//!
//! Formats:
//! * counts: `week,region,group,count` (long, one row per cell)
//! * population: `region,group,population`
//! * adjacency: `region_a,region_b` (first-order neighbour edges)
//! * contact matrix: square, header row and first column carry group labels
//! * survey: `participant_group,contact_group,count`, one row per
//!   participant and contact group, plus a roster `participant_id,group`
//! * group population: `group,population`
//! * grouping: `fine,coarse`

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use epifit_core::{
    adjacency_orders, ContactMatrix, CountCell, IsoWeek, OrderMatrix, PopulationCell, RegionGraph,
    StratifiedCounts,
};

use crate::config::DataConfig;
use crate::errors::{CliError, CliResult};

#[derive(Debug)]
pub struct Dataset {
    pub counts: StratifiedCounts,
    pub graph: RegionGraph,
    pub orders: OrderMatrix,
    pub contacts: Option<ContactMatrix>,
}

impl Dataset {
    pub fn summary(&self) -> String {
        format!(
            "T={} weeks ({}..{}), G={} groups, R={} regions, {} cases, population {:.0}",
            self.counts.n_weeks(),
            self.counts.weeks().first().expect("nonempty"),
            self.counts.weeks().last().expect("nonempty"),
            self.counts.n_groups(),
            self.counts.n_regions(),
            self.counts.total_cases(),
            self.counts.total_population(),
        )
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn reader(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> CliResult<()> {
    let got: Vec<&str> = got.iter().collect();
    if got != want {
        return Err(CliError::parse(format!(
            "{}: header {:?} does not match {:?}",
            path.display(),
            got.join(","),
            want.join(",")
        )));
    }
    Ok(())
}

pub fn read_counts_csv(path: &Path) -> CliResult<Vec<CountCell>> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers()?, &["week", "region", "group", "count"])?;
    let mut cells = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let context =
            |what: &str| CliError::parse(format!("{}, row {}: {what}", path.display(), line + 2));
        let week: IsoWeek = record[0]
            .parse()
            .map_err(|_| context(&format!("invalid week {:?}", &record[0])))?;
        let count: i64 = record[3]
            .parse()
            .map_err(|_| context(&format!("invalid count {:?}", &record[3])))?;
        if count < 0 {
            return Err(CliError::new(
                "E_NEGATIVE_COUNT",
                format!(
                    "{}, row {}: negative count {count}",
                    path.display(),
                    line + 2
                ),
            ));
        }
        cells.push(CountCell {
            week,
            region: record[1].to_string(),
            group: record[2].to_string(),
            count: count as u64,
        });
    }
    Ok(cells)
}

pub fn read_population_csv(path: &Path) -> CliResult<Vec<PopulationCell>> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers()?, &["region", "group", "population"])?;
    let mut cells = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let population: f64 = record[2].parse().map_err(|_| {
            CliError::parse(format!(
                "{}: bad population {:?}",
                path.display(),
                &record[2]
            ))
        })?;
        cells.push(PopulationCell {
            region: record[0].to_string(),
            group: record[1].to_string(),
            population,
        });
    }
    Ok(cells)
}

pub fn read_adjacency_csv(path: &Path) -> CliResult<Vec<(String, String)>> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers()?, &["region_a", "region_b"])?;
    let mut edges = Vec::new();
    for record in rdr.records() {
        let record = record?;
        edges.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(edges)
}

/// Square labelled matrix: header `group,<g1>,...`, one labelled row each.
pub fn read_matrix_csv(path: &Path) -> CliResult<(Vec<String>, Array2<f64>)> {
    let mut rdr = reader(path)?;
    let header = rdr.headers()?.clone();
    if header.is_empty() || &header[0] != "group" {
        return Err(CliError::parse(format!(
            "{}: matrix header must start with \"group\"",
            path.display()
        )));
    }
    let labels: Vec<String> = header.iter().skip(1).map(|s| s.to_string()).collect();
    let n = labels.len();
    let mut values = Array2::zeros((n, n));
    let mut row_count = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if i >= n {
            return Err(CliError::parse(format!(
                "{}: more rows than header columns",
                path.display()
            )));
        }
        if record[0] != labels[i] {
            return Err(CliError::parse(format!(
                "{}: row label {:?} does not match column label {:?}",
                path.display(),
                &record[0],
                labels[i]
            )));
        }
        for j in 0..n {
            values[(i, j)] = record[j + 1].parse().map_err(|_| {
                CliError::parse(format!(
                    "{}: bad entry {:?} at ({}, {})",
                    path.display(),
                    &record[j + 1],
                    labels[i],
                    labels[j]
                ))
            })?;
        }
        row_count += 1;
    }
    if row_count != n {
        return Err(CliError::parse(format!(
            "{}: {row_count} rows for {n} columns",
            path.display()
        )));
    }
    Ok((labels, values))
}

pub fn write_matrix_csv(path: &Path, labels: &[String], values: &Array2<f64>) -> CliResult<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header = vec!["group".to_string()];
    header.extend(labels.iter().cloned());
    wtr.write_record(&header)?;
    for (i, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        for j in 0..labels.len() {
            row.push(format!("{}", values[(i, j)]));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_survey_csv(path: &Path) -> CliResult<Vec<(String, String, u64)>> {
    let mut rdr = reader(path)?;
    check_header(
        path,
        rdr.headers()?,
        &["participant_group", "contact_group", "count"],
    )?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let count: u64 = record[2].parse().map_err(|_| {
            CliError::parse(format!(
                "{}: bad contact count {:?}",
                path.display(),
                &record[2]
            ))
        })?;
        rows.push((record[0].to_string(), record[1].to_string(), count));
    }
    Ok(rows)
}

pub fn read_roster_csv(path: &Path) -> CliResult<Vec<(String, String)>> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers()?, &["participant_id", "group"])?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(rows)
}

pub fn read_group_population_csv(path: &Path) -> CliResult<Vec<(String, f64)>> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers()?, &["group", "population"])?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let population: f64 = record[1].parse().map_err(|_| {
            CliError::parse(format!(
                "{}: bad population {:?}",
                path.display(),
                &record[1]
            ))
        })?;
        rows.push((record[0].to_string(), population));
    }
    Ok(rows)
}

pub fn read_grouping_csv(path: &Path) -> CliResult<Vec<(String, String)>> {
    let mut rdr = reader(path)?;
    check_header(path, rdr.headers()?, &["fine", "coarse"])?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(rows)
}

/// Load and cross-validate the full dataset behind a `[data]` section.
pub fn load_dataset(data: &DataConfig, base: &Path) -> CliResult<Dataset> {
    let counts = read_counts_csv(&resolve(base, &data.counts))?;
    let population = read_population_csv(&resolve(base, &data.population))?;
    let counts = StratifiedCounts::from_cells(&counts, &population)?;

    let edges = read_adjacency_csv(&resolve(base, &data.adjacency))?;
    let edge_regions: BTreeSet<&String> = edges.iter().flat_map(|(a, b)| [a, b]).collect();
    for region in &edge_regions {
        if !counts.regions().contains(region) {
            return Err(CliError::new(
                "E_LABEL_MISMATCH",
                format!("adjacency region {region:?} not present in the counts file"),
            ));
        }
    }
    let graph = RegionGraph::new(counts.regions().to_vec(), &edges).map_err(CliError::from)?;
    let orders = adjacency_orders(&graph).map_err(CliError::from)?;

    let contacts = match &data.contacts {
        None => None,
        Some(path) => {
            let (labels, values) = read_matrix_csv(&resolve(base, path))?;
            if labels != counts.groups() {
                return Err(CliError::new(
                    "E_LABEL_MISMATCH",
                    format!(
                        "contact matrix groups {:?} do not match the counts groups {:?} (sorted)",
                        labels,
                        counts.groups()
                    ),
                ));
            }
            // group-level populations for reciprocity checks and aggregation
            let group_pop: Vec<f64> = (0..counts.n_groups())
                .map(|g| {
                    (0..counts.n_regions())
                        .map(|r| counts.population()[(g, r)])
                        .sum()
                })
                .collect();
            Some(ContactMatrix::new(values, labels, group_pop).map_err(CliError::from)?)
        }
    };

    Ok(Dataset {
        counts,
        graph,
        orders,
        contacts,
    })
}

/// Canonical long-format counts emission; `load_dataset` of the output
/// reproduces the lattice exactly.
pub fn write_counts_csv(path: &Path, data: &StratifiedCounts) -> CliResult<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["week", "region", "group", "count"])?;
    for (t, week) in data.weeks().iter().enumerate() {
        for (r, region) in data.regions().iter().enumerate() {
            for (g, group) in data.groups().iter().enumerate() {
                wtr.write_record([
                    week.to_string(),
                    region.clone(),
                    group.clone(),
                    data.counts()[(t, g, r)].to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_population_csv(path: &Path, data: &StratifiedCounts) -> CliResult<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["region", "group", "population"])?;
    for (r, region) in data.regions().iter().enumerate() {
        for (g, group) in data.groups().iter().enumerate() {
            wtr.write_record([
                region.clone(),
                group.clone(),
                format!("{}", data.population()[(g, r)]),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Simulated trajectories in the counts schema plus a replicate index.
pub fn write_simulations_csv(path: &Path, sims: &[StratifiedCounts]) -> CliResult<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["replicate", "week", "region", "group", "count"])?;
    for (i, sim) in sims.iter().enumerate() {
        for (t, week) in sim.weeks().iter().enumerate() {
            for (r, region) in sim.regions().iter().enumerate() {
                for (g, group) in sim.groups().iter().enumerate() {
                    wtr.write_record([
                        i.to_string(),
                        week.to_string(),
                        region.clone(),
                        group.clone(),
                        sim.counts()[(t, g, r)].to_string(),
                    ])?;
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Parse `--scale-factors`, either positional ("1.5,2.5") in sorted group
/// order or labelled ("00-04=1.5,65+=2.0").
pub fn parse_scale_factors(text: &str, groups: &[String]) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.iter().any(|p| p.contains('=')) {
        let mut factors = vec![1.0; groups.len()];
        for part in parts {
            let (label, value) = part
                .split_once('=')
                .ok_or_else(|| CliError::args(format!("bad scale factor {part:?}")))?;
            let ix = groups.iter().position(|g| g == label).ok_or_else(|| {
                CliError::args(format!("unknown group {label:?} in --scale-factors"))
            })?;
            factors[ix] = value
                .parse()
                .map_err(|_| CliError::args(format!("bad scale factor value {value:?}")))?;
        }
        Ok(factors)
    } else {
        if parts.len() != groups.len() {
            return Err(CliError::args(format!(
                "{} scale factors for {} groups",
                parts.len(),
                groups.len()
            )));
        }
        parts
            .iter()
            .map(|p| {
                p.parse()
                    .map_err(|_| CliError::args(format!("bad scale factor value {p:?}")))
            })
            .collect()
    }
}
