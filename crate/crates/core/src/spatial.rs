//! Region adjacency structure and spatial transmission weights.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Undirected neighbourhood graph of the study regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGraph {
    regions: Vec<String>,
    neighbours: Vec<Vec<usize>>,
}

impl RegionGraph {
    /// Build a graph from region labels and an edge list of first-order
    /// neighbours. Edges are symmetrized and deduplicated; self-loops and
    /// unknown labels are rejected.
    pub fn new(regions: Vec<String>, edges: &[(String, String)]) -> Result<Self> {
        let index = |label: &str| -> Result<usize> {
            regions
                .iter()
                .position(|r| r == label)
                .ok_or_else(|| Error::UnknownRegion {
                    label: label.to_string(),
                })
        };
        let mut neighbours = vec![Vec::new(); regions.len()];
        for (a, b) in edges {
            let (i, j) = (index(a)?, index(b)?);
            if i == j {
                return Err(Error::SelfLoop { region: a.clone() });
            }
            if !neighbours[i].contains(&j) {
                neighbours[i].push(j);
                neighbours[j].push(i);
            }
        }
        for n in &mut neighbours {
            n.sort_unstable();
        }
        Ok(RegionGraph {
            regions,
            neighbours,
        })
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.neighbours[i]
    }
}

/// All-pairs adjacency orders `o[r', r]` (hop counts) on a region graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderMatrix {
    orders: Array2<u32>,
    regions: Vec<String>,
}

impl OrderMatrix {
    pub fn orders(&self) -> &Array2<u32> {
        &self.orders
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn get(&self, from: usize, to: usize) -> u32 {
        self.orders[(from, to)]
    }

    pub fn max_order(&self) -> u32 {
        self.orders.iter().copied().max().unwrap_or(0)
    }
}

/// Breadth-first hop counts from every region.
///
/// Fails on a disconnected graph, listing the connected components.
pub fn adjacency_orders(graph: &RegionGraph) -> Result<OrderMatrix> {
    let n = graph.n_regions();
    let mut orders = Array2::zeros((n, n));
    let mut unreachable = false;
    for source in 0..n {
        let mut dist = vec![u32::MAX; n];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &v in graph.neighbours(u) {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if dist.contains(&u32::MAX) {
            unreachable = true;
            break;
        }
        for (target, &d) in dist.iter().enumerate() {
            orders[(source, target)] = d;
        }
    }
    if unreachable {
        return Err(Error::Disconnected {
            components: components(graph),
        });
    }
    Ok(OrderMatrix {
        orders,
        regions: graph.regions().to_vec(),
    })
}

fn components(graph: &RegionGraph) -> Vec<Vec<String>> {
    let n = graph.n_regions();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            comp.push(graph.regions()[u].clone());
            for &v in graph.neighbours(u) {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        comp.sort();
        out.push(comp);
    }
    out
}

/// Power-law transmission weights in terms of adjacency order.
///
/// With `include_self`, `w[r',r] = (o[r',r] + 1)^-rho`, giving unit weight to
/// local transmission; otherwise `w[r',r] = o[r',r]^-rho` off the diagonal and
/// zero on it. The result is unnormalized.
pub fn power_law_weights(
    orders: &OrderMatrix,
    rho: f64,
    include_self: bool,
) -> Result<Array2<f64>> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::NonPositiveRho { rho });
    }
    let n = orders.n_regions();
    let mut w = Array2::zeros((n, n));
    for ((i, j), &o) in orders.orders().indexed_iter() {
        w[(i, j)] = if include_self {
            (o as f64 + 1.0).powf(-rho)
        } else if i == j {
            0.0
        } else {
            (o as f64).powf(-rho)
        };
    }
    Ok(w)
}

/// Nonparametric order weights: `w[r',r] = order_weights[o[r',r]]`.
///
/// `order_weights[0]` applies to the diagonal; for model identifiability it is
/// conventionally fixed to 1 and only the weights for orders >= 1 are free.
pub fn free_order_weights(orders: &OrderMatrix, order_weights: &[f64]) -> Result<Array2<f64>> {
    let needed = orders.max_order() as usize + 1;
    if order_weights.len() < needed {
        return Err(Error::Invalid(format!(
            "{} order weights supplied, graph needs {needed}",
            order_weights.len()
        )));
    }
    if order_weights.iter().any(|&w| w.is_nan() || w < 0.0) {
        return Err(Error::Invalid("order weights must be nonnegative".into()));
    }
    let n = orders.n_regions();
    let mut w = Array2::zeros((n, n));
    for ((i, j), &o) in orders.orders().indexed_iter() {
        w[(i, j)] = order_weights[o as usize];
    }
    Ok(w)
}

/// Declarative choice of the spatial weight function inside a model.
///
/// Parameter values (the decay `rho`, or the free order weights) live in the
/// model's parameter vector, on the log scale. With `group_specific`, each
/// infecting group carries its own decay parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum WeightConfig {
    PowerLawWithSelf { group_specific: bool },
    PowerLawNoSelf { group_specific: bool },
    FreeOrderWeights,
}

impl WeightConfig {
    pub fn include_self(&self) -> bool {
        matches!(
            self,
            WeightConfig::PowerLawWithSelf { .. } | WeightConfig::FreeOrderWeights
        )
    }

    /// Number of free weight parameters for a model with `n_groups` groups on
    /// a graph with maximum adjacency order `max_order`.
    pub fn parameter_count(&self, n_groups: usize, max_order: u32) -> usize {
        match self {
            WeightConfig::PowerLawWithSelf { group_specific }
            | WeightConfig::PowerLawNoSelf { group_specific } => {
                if *group_specific {
                    n_groups
                } else {
                    1
                }
            }
            WeightConfig::FreeOrderWeights => max_order as usize,
        }
    }
}

/// Row-normalize the product of contact and spatial weights over all
/// combinations of group and region.
///
/// Rows and columns are indexed by cells `(g, r) -> g * R + r`. Entry
/// `[(g', r'), (g, r)]` is `c[g',g] w[r',r]` divided by the row total, so every
/// row sums to one. A row with no positive product (for example an isolated
/// region under no-self weights with a diagonal contact matrix) is an error.
pub fn joint_normalize(contact: &Array2<f64>, spatial: &Array2<f64>) -> Result<Array2<f64>> {
    let g = contact.nrows();
    let r = spatial.nrows();
    if contact.ncols() != g || spatial.ncols() != r {
        return Err(Error::Invalid(
            "joint_normalize needs square contact and spatial matrices".into(),
        ));
    }
    if contact.iter().any(|&v| v < 0.0) || spatial.iter().any(|&v| v < 0.0) {
        return Err(Error::Invalid(
            "joint_normalize inputs must be nonnegative".into(),
        ));
    }
    let n = g * r;
    let mut out = Array2::zeros((n, n));
    for gp in 0..g {
        for rp in 0..r {
            let row = gp * r + rp;
            let mut sum = 0.0;
            for gg in 0..g {
                let c = contact[(gp, gg)];
                for rr in 0..r {
                    let v = c * spatial[(rp, rr)];
                    out[(row, gg * r + rr)] = v;
                    sum += v;
                }
            }
            if sum <= 0.0 || sum.is_nan() {
                return Err(Error::ZeroJointRow {
                    group: gp,
                    region: rp,
                });
            }
            out.row_mut(row).mapv_inplace(|v| v / sum);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn path_graph(labels: &[&str]) -> RegionGraph {
        let regions: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        let edges: Vec<(String, String)> = labels
            .windows(2)
            .map(|w| (w[0].to_string(), w[1].to_string()))
            .collect();
        RegionGraph::new(regions, &edges).unwrap()
    }

    #[test]
    fn path_orders() {
        let g = path_graph(&["A", "B", "C"]);
        let o = adjacency_orders(&g).unwrap();
        assert_eq!(o.get(0, 2), 2);
        assert_eq!(o.get(2, 0), 2);
        assert_eq!(o.get(1, 1), 0);
        assert_eq!(o.max_order(), 2);
    }

    #[test]
    fn disconnected_lists_components() {
        let g = RegionGraph::new(
            vec!["A".into(), "B".into(), "C".into()],
            &[("A".into(), "B".into())],
        )
        .unwrap();
        match adjacency_orders(&g) {
            Err(Error::Disconnected { components }) => {
                assert_eq!(components.len(), 2);
                assert!(components.contains(&vec!["C".to_string()]));
            }
            other => panic!("expected disconnected error, got {other:?}"),
        }
    }

    #[test]
    fn self_loop_rejected() {
        let err = RegionGraph::new(vec!["A".into()], &[("A".into(), "A".into())]);
        assert!(matches!(err, Err(Error::SelfLoop { .. })));
    }

    #[test]
    fn power_law_values() {
        let g = path_graph(&["A", "B", "C", "D", "E"]);
        let o = adjacency_orders(&g).unwrap();
        let w = power_law_weights(&o, 2.27, true).unwrap();
        // weights along the first row reach orders 0..4
        let rounded: Vec<f64> = (0..5)
            .map(|j| (w[(0, j)] * 100.0).round() / 100.0)
            .collect();
        assert_eq!(rounded, vec![1.00, 0.21, 0.08, 0.04, 0.03]);
        // unit local weight for any rho
        let w = power_law_weights(&o, 7.7, true).unwrap();
        assert_eq!(w[(2, 2)], 1.0);
        // rho = 1, order 3 -> 1/4
        let w = power_law_weights(&o, 1.0, true).unwrap();
        assert_abs_diff_eq!(w[(0, 3)], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn power_law_no_self_zero_diagonal() {
        let g = path_graph(&["A", "B", "C"]);
        let o = adjacency_orders(&g).unwrap();
        let w = power_law_weights(&o, 1.5, false).unwrap();
        for i in 0..3 {
            assert_eq!(w[(i, i)], 0.0);
        }
        assert_abs_diff_eq!(w[(0, 2)], 2f64.powf(-1.5), epsilon = 1e-15);
    }

    #[test]
    fn free_order_weights_lookup() {
        let g = path_graph(&["A", "B", "C"]);
        let o = adjacency_orders(&g).unwrap();
        let w = free_order_weights(&o, &[1.0, 0.4, 0.1]).unwrap();
        assert_eq!(w[(0, 0)], 1.0);
        assert_eq!(w[(0, 1)], 0.4);
        assert_eq!(w[(0, 2)], 0.1);
        assert_eq!(w[(2, 0)], 0.1);
        // too few weights for the maximum order
        assert!(free_order_weights(&o, &[1.0, 0.4]).is_err());
    }

    #[test]
    fn nonpositive_rho_rejected() {
        let g = path_graph(&["A", "B"]);
        let o = adjacency_orders(&g).unwrap();
        assert!(matches!(
            power_law_weights(&o, 0.0, true),
            Err(Error::NonPositiveRho { .. })
        ));
    }

    #[test]
    fn joint_identity_structure() {
        let c = Array2::eye(2);
        let w = Array2::eye(3);
        let m = joint_normalize(&c, &w).unwrap();
        for row in 0..6 {
            let mut ones = 0;
            for col in 0..6 {
                if row == col {
                    assert_eq!(m[(row, col)], 1.0);
                    ones += 1;
                } else {
                    assert_eq!(m[(row, col)], 0.0);
                }
            }
            assert_eq!(ones, 1);
        }
    }

    #[test]
    fn single_group_reduces_to_spatial_normalization() {
        let c = array![[1.0]];
        let w = array![[1.0, 0.5], [0.25, 1.0]];
        let m = joint_normalize(&c, &w).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], 1.0 / 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 1)], 0.5 / 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(1, 0)], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(1, 1)], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn zero_joint_row_named() {
        // single region with no-self weights leaves no outflow at all
        let c = array![[1.0]];
        let w = array![[0.0]];
        match joint_normalize(&c, &w) {
            Err(Error::ZeroJointRow {
                group: 0,
                region: 0,
            }) => {}
            other => panic!("expected zero-row error at (0, 0), got {other:?}"),
        }
    }
}
