//! Envy-with-slack graphs and equivalence classes of identical rows.

use serde::Serialize;

use super::scalar::{dot, Rows, Scalar};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `w[i][j] = <X_i, mu_i> - <X_j, mu_i>` for every ordered pair, including `i == j`.
pub(crate) fn weights<S: Scalar>(mu: &Rows<S>, x: &Rows<S>) -> Rows<S> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let own = dot(&x[i], &mu[i]);
            (0..n).map(|j| own.clone() - dot(&x[j], &mu[i])).collect()
        })
        .collect()
}

pub(crate) fn rows_equal<S: Scalar>(a: &[S], b: &[S], tol: &S) -> bool {
    a.iter().zip(b).all(|(x, y)| (x.clone() - y.clone()).abs() <= *tol)
}

/// Partition of the players into groups with identical allocation rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EquivalenceClasses {
    /// Classes in order of their smallest member; members ascending.
    pub classes: Vec<Vec<usize>>,
    pub class_of: Vec<usize>,
}

impl EquivalenceClasses {
    pub(crate) fn of<S: Scalar>(x: &Rows<S>) -> Self {
        let tol = S::zero_tol();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut class_of = vec![0; x.len()];
        for i in 0..x.len() {
            match classes.iter().position(|c| rows_equal(&x[c[0]], &x[i], &tol)) {
                Some(c) => {
                    classes[c].push(i);
                    class_of[i] = c;
                }
                None => {
                    class_of[i] = classes.len();
                    classes.push(vec![i]);
                }
            }
        }
        Self { classes, class_of }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn same(&self, i: usize, j: usize) -> bool {
        self.class_of[i] == self.class_of[j]
    }
}

/// Classes of rows that agree entrywise within `1e-12`.
pub fn equivalence_classes(x: &Matrix) -> EquivalenceClasses {
    EquivalenceClasses::of::<f64>(&super::scalar::to_rows(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvySlackGraph {
    pub alpha: f64,
    /// Weak graphs keep edges with `w <= 0`; strict graphs keep `w < alpha`.
    pub strict: bool,
    /// Weight of every ordered pair, edge or not.
    pub weights: Vec<Vec<f64>>,
    pub edges: Vec<Edge>,
}

impl EnvySlackGraph {
    /// Builds a strict graph from a precomputed weight table.
    pub fn from_weights(weights: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        let n = weights.len();
        if weights.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("weight table must be square"));
        }
        let edges = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && weights[i][j] < alpha)
            .map(|(tail, head)| Edge {
                tail,
                head,
                weight: weights[tail][head],
            })
            .collect();
        Ok(Self {
            alpha,
            strict: true,
            weights,
            edges,
        })
    }

    pub fn players(&self) -> usize {
        self.weights.len()
    }

    pub fn has_edge(&self, tail: usize, head: usize) -> bool {
        self.edges.iter().any(|e| e.tail == tail && e.head == head)
    }
}

pub fn build_envy_slack_graph(mu: &Matrix, x: &Matrix, alpha: f64, strict: bool) -> Result<EnvySlackGraph> {
    if mu.shape() != x.shape() {
        return Err(Error::shape(mu.shape(), x.shape()));
    }
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha must be nonnegative"));
    }
    if !strict && alpha != 0.0 {
        return Err(Error::invalid("the weak envy graph is only defined for alpha = 0"));
    }
    let w = weights::<f64>(&super::scalar::to_rows(mu), &super::scalar::to_rows(x));
    if strict {
        return EnvySlackGraph::from_weights(w, alpha);
    }
    let n = w.len();
    let edges = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && w[i][j] <= 0.0)
        .map(|(tail, head)| Edge {
            tail,
            head,
            weight: w[tail][head],
        })
        .collect();
    Ok(EnvySlackGraph {
        alpha,
        strict,
        weights: w,
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::make_uar;

    fn mat(rows: Vec<Vec<f64>>) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn class_examples() {
        assert_eq!(equivalence_classes(&make_uar(3, 2).unwrap()).classes, vec![vec![0, 1, 2]]);
        assert_eq!(
            equivalence_classes(&mat(vec![vec![1.0, 0.0], vec![0.0, 1.0]])).classes,
            vec![vec![0], vec![1]]
        );
        let c = equivalence_classes(&mat(vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.0, 1.0]]));
        assert_eq!(c.classes, vec![vec![0, 1], vec![2]]);
        assert_eq!(c.class_of, vec![0, 0, 1]);
    }

    #[test]
    fn strict_graph_examples() {
        let mu = mat(vec![vec![1.0], vec![1.0]]);
        let x = mat(vec![vec![0.6], vec![0.4]]);
        let g = build_envy_slack_graph(&mu, &x, 0.5, true).unwrap();
        assert_eq!(g.edges.len(), 2);
        assert_eq!((g.edges[0].tail, g.edges[0].head), (0, 1));
        assert!((g.edges[0].weight - 0.2).abs() < 1e-15);
        assert!((g.edges[1].weight + 0.2).abs() < 1e-15);

        let g = build_envy_slack_graph(&mu, &x, 0.1, true).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!((g.edges[0].tail, g.edges[0].head), (1, 0));
    }

    #[test]
    fn weak_graph_of_uniform_is_complete() {
        let mu = mat(vec![vec![1.0, 2.0], vec![3.0, 1.0], vec![2.0, 2.0]]);
        let g = build_envy_slack_graph(&mu, &make_uar(3, 2).unwrap(), 0.0, false).unwrap();
        assert_eq!(g.edges.len(), 6);
        assert!(g.edges.iter().all(|e| e.weight == 0.0));
        assert!(build_envy_slack_graph(&mu, &make_uar(3, 2).unwrap(), 0.1, false).is_err());
    }
}
