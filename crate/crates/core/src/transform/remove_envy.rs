//! Envy removal by gradual mass transfer and cycle rotation.

use super::graph::{weights, EquivalenceClasses};
use super::ops::transfer;
use super::scalar::{dot, to_matrix, to_rows, Rows, Scalar};
use crate::error::{Error, Result};
use crate::matrix::{validate_allocation, Matrix};

fn negative_edges<S: Scalar>(w: &Rows<S>) -> usize {
    let tol = -S::zero_tol();
    w.iter().flatten().filter(|v| **v < tol).count()
}

/// Depth-first search for a weak-envy path from `from` back to `u`, lowest
/// index first. Returns the nodes on the path, excluding `u`.
fn weak_path_to<S: Scalar>(w: &Rows<S>, from: usize, u: usize) -> Option<Vec<usize>> {
    let n = w.len();
    let tol = S::zero_tol();
    let mut visited = vec![false; n];
    visited[from] = true;
    let mut stack: Vec<(usize, usize)> = vec![(from, 0)];
    while let Some(&(node, next)) = stack.last() {
        if w[node][u] <= tol {
            return Some(stack.iter().map(|&(v, _)| v).collect());
        }
        let cand = (next..n).find(|&c| c != u && c != node && !visited[c] && w[node][c] <= tol);
        let top = stack.len() - 1;
        match cand {
            Some(c) => {
                stack[top].1 = c + 1;
                visited[c] = true;
                stack.push((c, 0));
            }
            None => {
                stack.pop();
            }
        }
    }
    None
}

/// One call of the envy-removal procedure. Returns the input unchanged when it
/// is already envy-free; otherwise strictly fewer envy edges remain.
///
/// With `(u, v)` the first envy edge, the donor set `U` holds the players
/// weakly reachable from `v`. Donors hand mass to everyone else until `u`
/// stops envying `v`, or a donor becomes indifferent to an outsider, who then
/// joins `U`. Once `u` itself is reachable, the cycle through `(u, v)` is
/// rotated.
pub(crate) fn remove_envy_step<S: Scalar>(mu: &Rows<S>, x: &Rows<S>) -> Result<Rows<S>> {
    let n = x.len();
    let tol = S::zero_tol();
    let neg = |v: &S| *v < -tol.clone();
    let w0 = weights(mu, x);
    let Some((u, v)) = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| neg(&w0[i][j]))
    else {
        return Ok(x.clone());
    };
    let before_edges = negative_edges(&w0);
    let before_classes = EquivalenceClasses::of(x).len();

    let classes = EquivalenceClasses::of(x);
    let mut in_u = vec![false; n];
    for &j in &classes.classes[classes.class_of[v]] {
        in_u[j] = true;
    }
    let mut cur = x.clone();
    let mut result = None;
    for _ in 0..=n {
        let w = weights(mu, &cur);
        if !neg(&w[u][v]) {
            result = Some(cur.clone());
            break;
        }
        if let Some(path) = weak_path_to(&w, v, u) {
            let mut cycle = vec![u];
            cycle.extend(path);
            let mut rotated = cur.clone();
            for (pos, &i) in cycle.iter().enumerate() {
                rotated[i] = cur[cycle[(pos + 1) % cycle.len()]].clone();
            }
            result = Some(rotated);
            break;
        }
        let members: Vec<usize> = (0..n).filter(|&j| in_u[j]).collect();
        let p = S::from_usize(n - members.len());
        let pooled = |i: usize| {
            members
                .iter()
                .fold(S::zero(), |acc, &j| acc + dot(&cur[j], &mu[i]))
        };

        let own_v = dot(&cur[v], &mu[u]);
        let den_u = pooled(u) + p.clone() * own_v;
        if den_u <= S::zero() {
            return Err(Error::invariant("degenerate transfer denominator for the envious player"));
        }
        let mut best: (S, usize, Option<usize>) = (-w[u][v].clone() / den_u, u, None);
        for &i in &members {
            let util = dot(&cur[i], &mu[i]);
            let den = p.clone() * util + pooled(i);
            for t in (0..n).filter(|&t| !in_u[t]) {
                let num = w[i][t].clone();
                let beta = if num <= S::zero() {
                    S::zero()
                } else if den <= S::zero() {
                    continue;
                } else {
                    num / den.clone()
                };
                if beta < best.0 || (beta == best.0 && i < best.1) {
                    best = (beta, i, Some(t));
                }
            }
        }
        let (beta, _, target) = best;
        cur = transfer(&members, &beta, &cur)?;
        if let Some(t) = target {
            let classes = EquivalenceClasses::of(&cur);
            for &j in &classes.classes[classes.class_of[t]] {
                if j != u {
                    in_u[j] = true;
                }
            }
        }
    }
    let out = result.ok_or_else(|| Error::invariant("envy removal did not terminate"))?;

    let after_edges = negative_edges(&weights(mu, &out));
    if after_edges >= before_edges {
        return Err(Error::invariant(format!(
            "envy edge count did not decrease ({before_edges} -> {after_edges})"
        )));
    }
    let after_classes = EquivalenceClasses::of(&out).len();
    if after_classes > before_classes {
        return Err(Error::invariant(format!(
            "envy removal split classes ({before_classes} -> {after_classes})"
        )));
    }
    Ok(out)
}

/// Removes at least one envy edge from `x` without creating new ones; returns
/// `x` unchanged when no player envies another.
pub fn remove_envy(mu: &Matrix, x: &Matrix) -> Result<Matrix> {
    if mu.shape() != x.shape() {
        return Err(Error::shape(mu.shape(), x.shape()));
    }
    let report = validate_allocation(x, crate::FEASIBILITY_TOL);
    if !report.is_ok() {
        return Err(Error::invalid(format!("invalid allocation: {report}")));
    }
    Ok(to_matrix(&remove_envy_step::<f64>(&to_rows(mu), &to_rows(x))?))
}
