//! Count lattices stratified by week, group and region.

use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::fingerprint::Fnv1a;
use crate::week::IsoWeek;

/// One observed cell of the count lattice, as it appears in a long-format file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountCell {
    pub week: IsoWeek,
    pub group: String,
    pub region: String,
    pub count: u64,
}

/// A population entry for one (group, region) stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationCell {
    pub group: String,
    pub region: String,
    pub population: f64,
}

/// A dense lattice of weekly case counts `Y[t, g, r]` with matching population
/// offsets `e[g, r]`.
///
/// Group and region labels are kept in sorted order so that the lattice is
/// independent of input row order. Weeks must form a consecutive ISO-week
/// sequence; the model's one-week lag depends on it.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedCounts {
    counts: Array3<u64>,
    weeks: Vec<IsoWeek>,
    groups: Vec<String>,
    regions: Vec<String>,
    population: Array2<f64>,
    population_t: Option<Array3<f64>>,
}

impl StratifiedCounts {
    /// Assemble a lattice from preordered parts. `counts` is indexed
    /// `[t, g, r]`, `population` `[g, r]`.
    pub fn new(
        weeks: Vec<IsoWeek>,
        groups: Vec<String>,
        regions: Vec<String>,
        counts: Array3<u64>,
        population: Array2<f64>,
    ) -> Result<Self> {
        let (t, g, r) = counts.dim();
        if t != weeks.len() || g != groups.len() || r != regions.len() {
            return Err(Error::Invalid(format!(
                "count lattice {:?} does not match labels ({}, {}, {})",
                counts.dim(),
                weeks.len(),
                groups.len(),
                regions.len()
            )));
        }
        if t < 2 {
            return Err(Error::Invalid(format!(
                "need at least two weeks of data, got {t}"
            )));
        }
        if population.dim() != (g, r) {
            return Err(Error::Invalid(format!(
                "population shape {:?} does not match ({g}, {r})",
                population.dim()
            )));
        }
        for w in weeks.windows(2) {
            if w[0].next() != w[1] {
                return Err(Error::NonContiguousWeeks {
                    prev: w[0].to_string(),
                    next: w[1].to_string(),
                });
            }
        }
        for ((gi, ri), &p) in population.indexed_iter() {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::Invalid(format!(
                    "population for (group {:?}, region {:?}) must be positive, got {p}",
                    groups[gi], regions[ri]
                )));
            }
        }
        Ok(StratifiedCounts {
            counts,
            weeks,
            groups,
            regions,
            population,
            population_t: None,
        })
    }

    /// Build a validated lattice from unordered long-format cells.
    ///
    /// Labels are sorted; the week range is taken from the cells and must be
    /// dense: every (week, group, region) combination exactly once.
    pub fn from_cells(cells: &[CountCell], population: &[PopulationCell]) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Invalid("no count rows".into()));
        }
        let mut groups: Vec<String> = cells.iter().map(|c| c.group.clone()).collect();
        groups.sort();
        groups.dedup();
        let mut regions: Vec<String> = cells.iter().map(|c| c.region.clone()).collect();
        regions.sort();
        regions.dedup();

        let start = cells.iter().map(|c| c.week).min().expect("nonempty");
        let end = cells.iter().map(|c| c.week).max().expect("nonempty");
        let mut weeks = vec![start];
        while *weeks.last().unwrap() < end {
            let next = weeks.last().unwrap().next();
            weeks.push(next);
        }

        let (t, g, r) = (weeks.len(), groups.len(), regions.len());
        let week_index = |w: IsoWeek| weeks.binary_search(&w).ok();
        let mut seen: Array3<bool> = Array3::from_elem((t, g, r), false);
        let mut counts: Array3<u64> = Array3::zeros((t, g, r));
        for c in cells {
            let ti = week_index(c.week).expect("week inside derived range");
            let gi = groups.binary_search(&c.group).expect("group present");
            let ri = regions.binary_search(&c.region).expect("region present");
            if seen[(ti, gi, ri)] {
                return Err(Error::DuplicateCell {
                    week: c.week.to_string(),
                    group: c.group.clone(),
                    region: c.region.clone(),
                });
            }
            seen[(ti, gi, ri)] = true;
            counts[(ti, gi, ri)] = c.count;
        }
        if let Some(((ti, gi, ri), _)) = seen.indexed_iter().find(|(_, &s)| !s) {
            return Err(Error::MissingCell {
                week: weeks[ti].to_string(),
                group: groups[gi].clone(),
                region: regions[ri].clone(),
            });
        }

        // Populations: one entry per (group, region), label sets must agree.
        let mut pop = Array2::from_elem((g, r), f64::NAN);
        for p in population {
            let gi = groups
                .binary_search(&p.group)
                .map_err(|_| Error::LabelMismatch {
                    detail: format!("population group {:?} not present in counts", p.group),
                })?;
            let ri = regions
                .binary_search(&p.region)
                .map_err(|_| Error::LabelMismatch {
                    detail: format!("population region {:?} not present in counts", p.region),
                })?;
            if !pop[(gi, ri)].is_nan() {
                return Err(Error::LabelMismatch {
                    detail: format!(
                        "duplicate population entry for (group {:?}, region {:?})",
                        p.group, p.region
                    ),
                });
            }
            pop[(gi, ri)] = p.population;
        }
        if let Some(((gi, ri), _)) = pop.indexed_iter().find(|(_, v)| v.is_nan()) {
            return Err(Error::LabelMismatch {
                detail: format!(
                    "no population entry for (group {:?}, region {:?})",
                    groups[gi], regions[ri]
                ),
            });
        }

        StratifiedCounts::new(weeks, groups, regions, counts, pop)
    }

    /// Attach time-varying population offsets `e[t, g, r]`.
    pub fn with_time_varying_population(mut self, population_t: Array3<f64>) -> Result<Self> {
        if population_t.dim() != self.counts.dim() {
            return Err(Error::Invalid(format!(
                "time-varying population shape {:?} does not match counts {:?}",
                population_t.dim(),
                self.counts.dim()
            )));
        }
        if population_t.iter().any(|&p| p.is_nan() || p <= 0.0) {
            return Err(Error::Invalid(
                "time-varying population entries must be positive".into(),
            ));
        }
        self.population_t = Some(population_t);
        Ok(self)
    }

    pub fn n_weeks(&self) -> usize {
        self.weeks.len()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn weeks(&self) -> &[IsoWeek] {
        &self.weeks
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn counts(&self) -> &Array3<u64> {
        &self.counts
    }

    pub fn population(&self) -> &Array2<f64> {
        &self.population
    }

    pub fn population_t(&self) -> Option<&Array3<f64>> {
        self.population_t.as_ref()
    }

    pub fn slice(&self, t: usize) -> ArrayView2<'_, u64> {
        self.counts.index_axis(ndarray::Axis(0), t)
    }

    pub fn total_cases(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total_population(&self) -> f64 {
        self.population.sum()
    }

    /// Counts as a (T, G*R) float matrix with cell index `g * R + r`.
    pub fn stacked(&self) -> Array2<f64> {
        let (t, g, r) = self.counts.dim();
        let mut out = Array2::zeros((t, g * r));
        for ((ti, gi, ri), &y) in self.counts.indexed_iter() {
            out[(ti, gi * r + ri)] = y as f64;
        }
        out
    }

    /// Multiply counts by per-group factors, rounding half up.
    ///
    /// Zero counts stay zero regardless of the factor; this deterministic
    /// scaling cannot invent cases where none were reported.
    pub fn scale_by_group(&self, factors: &[f64]) -> Result<StratifiedCounts> {
        if factors.len() != self.groups.len() {
            return Err(Error::Invalid(format!(
                "{} scale factors for {} groups",
                factors.len(),
                self.groups.len()
            )));
        }
        if factors.iter().any(|&f| f.is_nan() || f <= 0.0) {
            return Err(Error::Invalid("scale factors must be positive".into()));
        }
        let mut scaled = self.clone();
        for ((_, gi, _), y) in scaled.counts.indexed_iter_mut() {
            *y = (*y as f64 * factors[gi] + 0.5).floor() as u64;
        }
        Ok(scaled)
    }

    /// Hash of the full lattice: labels, counts and populations.
    pub fn fingerprint(&self) -> String {
        let mut h = Fnv1a::new();
        h.write_u64(self.weeks.len() as u64);
        h.write_u64(self.groups.len() as u64);
        h.write_u64(self.regions.len() as u64);
        for w in &self.weeks {
            h.write_str(&w.to_string());
        }
        for g in &self.groups {
            h.write_str(g);
        }
        for r in &self.regions {
            h.write_str(r);
        }
        for &y in self.counts.iter() {
            h.write_u64(y);
        }
        for &p in self.population.iter() {
            h.write_f64(p);
        }
        if let Some(pt) = &self.population_t {
            for &p in pt.iter() {
                h.write_f64(p);
            }
        }
        h.hex()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells_2x2x2() -> (Vec<CountCell>, Vec<PopulationCell>) {
        let mut cells = Vec::new();
        let w0: IsoWeek = "2011-W01".parse().unwrap();
        for (ti, w) in w0.sequence(2).into_iter().enumerate() {
            for g in ["a", "b"] {
                for r in ["x", "y"] {
                    cells.push(CountCell {
                        week: w,
                        group: g.into(),
                        region: r.into(),
                        count: (ti + 1) as u64,
                    });
                }
            }
        }
        let pop = ["a", "b"]
            .iter()
            .flat_map(|g| {
                ["x", "y"].iter().map(|r| PopulationCell {
                    group: g.to_string(),
                    region: r.to_string(),
                    population: 1000.0,
                })
            })
            .collect();
        (cells, pop)
    }

    #[test]
    fn builds_dense_lattice() {
        let (cells, pop) = cells_2x2x2();
        let data = StratifiedCounts::from_cells(&cells, &pop).unwrap();
        assert_eq!(data.n_weeks(), 2);
        assert_eq!(data.n_groups(), 2);
        assert_eq!(data.n_regions(), 2);
        assert_eq!(data.total_cases(), 12);
    }

    #[test]
    fn order_independent() {
        let (mut cells, pop) = cells_2x2x2();
        let a = StratifiedCounts::from_cells(&cells, &pop).unwrap();
        cells.reverse();
        cells.swap(0, 3);
        let b = StratifiedCounts::from_cells(&cells, &pop).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn duplicate_cell_rejected() {
        let (mut cells, pop) = cells_2x2x2();
        cells.push(cells[0].clone());
        match StratifiedCounts::from_cells(&cells, &pop) {
            Err(Error::DuplicateCell { .. }) => {}
            other => panic!("expected duplicate-cell error, got {other:?}"),
        }
    }

    #[test]
    fn missing_cell_rejected() {
        let (mut cells, pop) = cells_2x2x2();
        cells.pop();
        match StratifiedCounts::from_cells(&cells, &pop) {
            Err(Error::MissingCell { .. }) => {}
            other => panic!("expected missing-cell error, got {other:?}"),
        }
    }

    #[test]
    fn missing_population_rejected() {
        let (cells, mut pop) = cells_2x2x2();
        pop.pop();
        assert!(matches!(
            StratifiedCounts::from_cells(&cells, &pop),
            Err(Error::LabelMismatch { .. })
        ));
    }

    #[test]
    fn scaling_rounds_half_up() {
        let (cells, pop) = cells_2x2x2();
        let data = StratifiedCounts::from_cells(&cells, &pop).unwrap();
        // count 1 * 2.5 = 2.5 -> 3; count 2 * 2.5 = 5
        let scaled = data.scale_by_group(&[2.5, 1.0]).unwrap();
        assert_eq!(scaled.counts()[(0, 0, 0)], 3);
        assert_eq!(scaled.counts()[(1, 0, 0)], 5);
        assert_eq!(scaled.counts()[(0, 1, 0)], 1);
        // identity factors leave counts unchanged
        let same = data.scale_by_group(&[1.0, 1.0]).unwrap();
        assert_eq!(same, data);
    }

    #[test]
    fn zero_counts_stay_zero() {
        let (mut cells, pop) = cells_2x2x2();
        for c in &mut cells {
            c.count = 0;
        }
        let data = StratifiedCounts::from_cells(&cells, &pop).unwrap();
        let scaled = data.scale_by_group(&[10.0, 10.0]).unwrap();
        assert_eq!(scaled.total_cases(), 0);
    }
}
