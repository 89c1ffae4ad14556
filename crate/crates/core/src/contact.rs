//! Social contact matrices: estimation from survey diaries under population
//! reciprocity, aggregation to coarser groups, row normalization, and the
//! eigendecomposition-based fractional power transform.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eig, Inverse, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw contact-survey data: per participant group, the number of participants
/// and the summed reported contacts towards each contact group.
#[derive(Debug, Clone)]
pub struct SurveyRecords {
    groups: Vec<String>,
    participants: Vec<u64>,
    contact_sums: Array2<f64>,
}

impl SurveyRecords {
    /// Build records from diary rows `(participant_group, contact_group, count)`
    /// and a participant roster `(participant_id, group)`.
    ///
    /// The declared group set is the sorted union of the labels seen in both
    /// inputs. Participants who reported no contacts still count towards the
    /// group denominators, which is why the roster is required.
    pub fn from_rows(rows: &[(String, String, u64)], roster: &[(String, String)]) -> Result<Self> {
        let mut groups: Vec<String> = roster
            .iter()
            .map(|(_, g)| g.clone())
            .chain(rows.iter().flat_map(|(pg, cg, _)| [pg.clone(), cg.clone()]))
            .collect();
        groups.sort();
        groups.dedup();
        let index = |label: &str| -> Result<usize> {
            groups
                .binary_search_by(|g| g.as_str().cmp(label))
                .map_err(|_| Error::LabelMismatch {
                    detail: format!("unknown group label {label:?}"),
                })
        };

        let mut participants = vec![0u64; groups.len()];
        let mut seen_ids = std::collections::BTreeSet::new();
        for (id, g) in roster {
            if !seen_ids.insert(id.clone()) {
                return Err(Error::LabelMismatch {
                    detail: format!("duplicate participant id {id:?} in roster"),
                });
            }
            participants[index(g)?] += 1;
        }

        let n = groups.len();
        let mut contact_sums = Array2::zeros((n, n));
        for (pg, cg, count) in rows {
            contact_sums[(index(pg)?, index(cg)?)] += *count as f64;
        }
        Ok(SurveyRecords {
            groups,
            participants,
            contact_sums,
        })
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn participants(&self) -> &[u64] {
        &self.participants
    }

    /// Sample mean contacts per participant and day, `m[g', g]`.
    pub fn sample_means(&self) -> Result<Array2<f64>> {
        let n = self.groups.len();
        let mut m = Array2::zeros((n, n));
        for gp in 0..n {
            if self.participants[gp] == 0 {
                return Err(Error::EmptyGroup {
                    group: self.groups[gp].clone(),
                });
            }
            for g in 0..n {
                m[(gp, g)] = self.contact_sums[(gp, g)] / self.participants[gp] as f64;
            }
        }
        Ok(m)
    }
}

/// A G x G matrix of mean daily contact rates between groups, with the group
/// labels and population sizes it refers to.
///
/// Rows index the participant (infecting) group, columns the contact
/// (infected) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactMatrix {
    matrix: Array2<f64>,
    groups: Vec<String>,
    population: Vec<f64>,
    row_normalized: bool,
}

impl ContactMatrix {
    pub fn new(matrix: Array2<f64>, groups: Vec<String>, population: Vec<f64>) -> Result<Self> {
        let n = groups.len();
        if matrix.dim() != (n, n) || population.len() != n {
            return Err(Error::Invalid(format!(
                "contact matrix {:?} does not match {n} groups",
                matrix.dim()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid(
                "contact matrix entries must be finite and nonnegative".into(),
            ));
        }
        let row_normalized = is_row_normalized(&matrix, 1e-12);
        Ok(ContactMatrix {
            matrix,
            groups,
            population,
            row_normalized,
        })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn population(&self) -> &[f64] {
        &self.population
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn is_row_normalized(&self) -> bool {
        self.row_normalized
    }

    /// Largest population-level reciprocity violation,
    /// `max |c[g',g] n_g' - c[g,g'] n_g|` relative to the largest total flow.
    pub fn reciprocity_error(&self) -> f64 {
        let n = self.groups.len();
        let mut worst = 0.0_f64;
        let mut scale = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let flow = self.matrix[(i, j)] * self.population[i];
                scale = scale.max(flow.abs());
                let gap = (flow - self.matrix[(j, i)] * self.population[j]).abs();
                worst = worst.max(gap);
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }
}

fn is_row_normalized(matrix: &Array2<f64>, tol: f64) -> bool {
    matrix
        .rows()
        .into_iter()
        .all(|row| (row.sum() - 1.0).abs() <= tol)
}

/// Estimate a contact matrix from survey records, correcting the sample means
/// for reciprocity at the population level.
///
/// Uses the population-weighted symmetrization
/// `c[g',g] = (m[g'g] n_g' + m[gg'] n_g) / (2 n_g')`, which makes
/// `c[g',g] n_g' = c[g,g'] n_g` hold exactly.
pub fn estimate_contact_matrix(
    records: &SurveyRecords,
    population: &[f64],
) -> Result<ContactMatrix> {
    let n = records.groups().len();
    if population.len() != n {
        return Err(Error::LabelMismatch {
            detail: format!("{} population entries for {} groups", population.len(), n),
        });
    }
    if population.iter().any(|&p| p.is_nan() || p <= 0.0) {
        return Err(Error::Invalid("population entries must be positive".into()));
    }
    let m = records.sample_means()?;
    let mut c = Array2::zeros((n, n));
    for gp in 0..n {
        for g in 0..n {
            let total = m[(gp, g)] * population[gp] + m[(g, gp)] * population[g];
            c[(gp, g)] = total / (2.0 * population[gp]);
        }
    }
    ContactMatrix::new(c, records.groups().to_vec(), population.to_vec())
}

/// Aggregate a fine contact matrix to coarser groups: sum over the contact
/// groups (columns) to be joined and take the population-weighted average
/// across the participant groups (rows).
///
/// `grouping` maps every fine label to its coarse label; coarse groups appear
/// in order of first appearance along the fine labels. Population-level
/// reciprocity of the fine matrix carries over to the aggregated one.
pub fn aggregate_contact_matrix(
    fine: &ContactMatrix,
    grouping: &[(String, String)],
    fine_population: &[f64],
) -> Result<ContactMatrix> {
    let n = fine.n_groups();
    if fine_population.len() != n {
        return Err(Error::LabelMismatch {
            detail: format!(
                "{} population entries for {} fine groups",
                fine_population.len(),
                n
            ),
        });
    }
    let coarse_of = |label: &str| -> Result<&str> {
        grouping
            .iter()
            .find(|(f, _)| f == label)
            .map(|(_, c)| c.as_str())
            .ok_or_else(|| Error::LabelMismatch {
                detail: format!("fine group {label:?} missing from grouping map"),
            })
    };

    let mut coarse_labels: Vec<String> = Vec::new();
    let mut assignment = vec![0usize; n];
    for (i, label) in fine.groups().iter().enumerate() {
        let coarse = coarse_of(label)?;
        let idx = match coarse_labels.iter().position(|c| c == coarse) {
            Some(idx) => idx,
            None => {
                coarse_labels.push(coarse.to_string());
                coarse_labels.len() - 1
            }
        };
        assignment[i] = idx;
    }

    let k = coarse_labels.len();
    let mut coarse_pop = vec![0.0; k];
    for (i, &a) in assignment.iter().enumerate() {
        coarse_pop[a] += fine_population[i];
    }
    for (a, &p) in coarse_pop.iter().enumerate() {
        if p.is_nan() || p <= 0.0 {
            return Err(Error::ZeroCoarsePopulation {
                group: coarse_labels[a].clone(),
            });
        }
    }

    let mut coarse = Array2::zeros((k, k));
    for a in 0..k {
        for b in 0..k {
            let mut acc = 0.0;
            for i in 0..n {
                if assignment[i] != a {
                    continue;
                }
                for (j, &aj) in assignment.iter().enumerate() {
                    if aj == b {
                        acc += fine_population[i] * fine.matrix()[(i, j)];
                    }
                }
            }
            coarse[(a, b)] = acc / coarse_pop[a];
        }
    }
    ContactMatrix::new(coarse, coarse_labels, coarse_pop)
}

/// Divide every row by its sum so rows are probability distributions.
pub fn row_normalize(c: &ContactMatrix) -> Result<ContactMatrix> {
    let mut matrix = c.matrix().clone();
    for (i, mut row) in matrix.rows_mut().into_iter().enumerate() {
        let sum = row.sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(Error::ZeroRow {
                group: c.groups()[i].clone(),
            });
        }
        row.mapv_inplace(|v| v / sum);
    }
    let mut out = ContactMatrix::new(matrix, c.groups().to_vec(), c.population().to_vec())?;
    out.row_normalized = true;
    Ok(out)
}

/// A negative entry of a fractional matrix power that was clamped to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationEvent {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

const ROW_SUM_TOL: f64 = 1e-9;
const IMAG_TOL: f64 = 1e-9;
const COND_LIMIT: f64 = 1e12;

/// Fractional matrix power of a row-normalized contact matrix via its
/// eigendecomposition, `C^kappa = E diag(lambda^kappa) E^{-1}`.
///
/// The power interpolates between no mixing (`kappa = 0`, the identity), the
/// observed mixing (`kappa = 1`) and group-independent mixing (`kappa` large:
/// all rows approach the stationary distribution). Negative entries of the
/// reconstruction are clamped to zero; [`matrix_power_detailed`] reports them.
///
/// The computation runs in complex arithmetic with principal-branch powers and
/// keeps the real part. It fails if the eigenvector matrix has condition
/// number above 1e12, or if the imaginary residue exceeds 1e-9 (which happens
/// e.g. for matrices with negative real eigenvalues at fractional powers).
pub fn matrix_power(c: &ContactMatrix, kappa: f64) -> Result<ContactMatrix> {
    matrix_power_detailed(c, kappa).map(|(m, _)| m)
}

/// Like [`matrix_power`], additionally returning the truncated entries.
pub fn matrix_power_detailed(
    c: &ContactMatrix,
    kappa: f64,
) -> Result<(ContactMatrix, Vec<TruncationEvent>)> {
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::NegativeKappa { kappa });
    }
    let n = c.n_groups();
    // Tolerant row-sum check instead of the flag: outputs of this function
    // (row sums within 1e-9) must be acceptable inputs for the semigroup
    // property to be testable.
    for (i, row) in c.matrix().rows().into_iter().enumerate() {
        let sum = row.sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::NotRowNormalized { row: i, sum });
        }
    }
    if kappa == 0.0 {
        let mut out =
            ContactMatrix::new(Array2::eye(n), c.groups().to_vec(), c.population().to_vec())?;
        out.row_normalized = true;
        return Ok((out, Vec::new()));
    }

    let (eigenvalues, eigenvectors): (Array1<c64>, Array2<c64>) =
        c.matrix().eig().map_err(|e| Error::Eigen(e.to_string()))?;
    let cond = condition_number(&eigenvectors)?;
    if cond > COND_LIMIT {
        return Err(Error::IllConditioned { cond });
    }
    let inverse = eigenvectors
        .inv()
        .map_err(|e| Error::Eigen(e.to_string()))?;
    let powered = eigenvalues.mapv(|l| {
        if l.norm() == 0.0 {
            c64::new(0.0, 0.0)
        } else {
            l.powf(kappa)
        }
    });
    let lambda = Array2::from_diag(&powered);
    let reconstructed = eigenvectors.dot(&lambda).dot(&inverse);

    let residue = reconstructed.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > IMAG_TOL {
        return Err(Error::ComplexResidue { residue });
    }

    let mut events = Vec::new();
    let mut real = Array2::zeros((n, n));
    for ((i, j), z) in reconstructed.indexed_iter() {
        if z.re < 0.0 {
            events.push(TruncationEvent {
                row: i,
                col: j,
                value: z.re,
            });
            real[(i, j)] = 0.0;
        } else {
            real[(i, j)] = z.re;
        }
    }
    let mut out = ContactMatrix::new(real, c.groups().to_vec(), c.population().to_vec())?;
    out.row_normalized = is_row_normalized(out.matrix(), 1e-12);
    Ok((out, events))
}

fn condition_number(e: &Array2<c64>) -> Result<f64> {
    let (_, singular, _) = e
        .svd(false, false)
        .map_err(|err| Error::Eigen(err.to_string()))?;
    let max = singular.iter().cloned().fold(0.0, f64::max);
    let min = singular.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}
