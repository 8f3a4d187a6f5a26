//! Allocation-reshaping subroutines used by the envy-freeness transform.
//!
//! Each operation is generic over [`Scalar`]; the `f64` wrappers below take and
//! return plain matrices.

use std::collections::HashSet;

use super::graph::{EnvySlackGraph, EquivalenceClasses};
use super::scalar::{sum, to_matrix, to_rows, Rows, Scalar};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn check_members(set: &[usize], n: usize, what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for &i in set {
        if i >= n {
            return Err(Error::invalid(format!("{what}: player {i} out of range")));
        }
        if !seen.insert(i) {
            return Err(Error::invalid(format!("{what}: player {i} repeated")));
        }
    }
    Ok(())
}

/// Result of draining a class: the new allocation and whether the transfer
/// had to be scaled down to keep entries nonnegative.
pub(crate) struct Drained<S> {
    pub x: Rows<S>,
    pub clamped: bool,
}

pub(crate) fn drain<S: Scalar>(class: &[usize], alpha: &S, x: &Rows<S>, b: &S) -> Result<Drained<S>> {
    let n = x.len();
    if class.is_empty() {
        return Err(Error::invalid("class must be nonempty"));
    }
    check_members(class, n, "class")?;
    let s = class.len();
    let row = &x[class[0]];
    let mass = sum(row);
    if mass <= S::zero() {
        return Err(Error::invalid("class holds no allocation mass"));
    }
    let denom = S::from_usize(2) * b.clone() * S::from_usize(n) * mass;
    let mut shed = S::from_usize(n - s) * alpha.clone() / denom.clone();
    let mut gain = S::from_usize(s) * alpha.clone() / denom;
    let clamped = shed > S::one();
    if clamped {
        gain = gain / shed.clone();
        shed = S::one();
    }
    let row = row.clone();
    let mut out = x.clone();
    for (i, r) in out.iter_mut().enumerate() {
        let factor = if class.contains(&i) { -shed.clone() } else { gain.clone() };
        for (v, xs) in r.iter_mut().zip(&row) {
            *v = v.clone() + factor.clone() * xs.clone();
        }
    }
    Ok(Drained { x: out, clamped })
}

pub(crate) fn half_shift<S: Scalar>(cycle: &[usize], x: &Rows<S>) -> Result<Rows<S>> {
    if cycle.len() < 2 {
        return Err(Error::invalid("cycle must have at least two nodes"));
    }
    check_members(cycle, x.len(), "cycle")?;
    let two = S::from_usize(2);
    let mut out = x.clone();
    for (pos, &i) in cycle.iter().enumerate() {
        let next = cycle[(pos + 1) % cycle.len()];
        out[i] = x[i]
            .iter()
            .zip(&x[next])
            .map(|(a, b)| (a.clone() + b.clone()) / two.clone())
            .collect();
    }
    Ok(out)
}

pub(crate) fn average<S: Scalar>(q: &[usize], x: &Rows<S>) -> Result<Rows<S>> {
    if q.len() < 2 {
        return Err(Error::invalid("clique must have at least two players"));
    }
    check_members(q, x.len(), "clique")?;
    let m = x[0].len();
    let size = S::from_usize(q.len());
    let avg: Vec<S> = (0..m)
        .map(|k| q.iter().fold(S::zero(), |acc, &i| acc + x[i][k].clone()) / size.clone())
        .collect();
    let mut out = x.clone();
    for &i in q {
        out[i] = avg.clone();
    }
    Ok(out)
}

pub(crate) fn transfer<S: Scalar>(u: &[usize], beta: &S, x: &Rows<S>) -> Result<Rows<S>> {
    let n = x.len();
    check_members(u, n, "donor set")?;
    if u.is_empty() || u.len() == n {
        return Err(Error::invalid("donor set must be a nonempty proper subset"));
    }
    let outside = S::from_usize(n - u.len());
    if *beta < S::zero() || beta.clone() * outside.clone() > S::one() {
        return Err(Error::invalid(format!(
            "transfer fraction {:?} outside [0, 1/{}]",
            beta.to_f64(),
            n - u.len()
        )));
    }
    let m = x[0].len();
    let pooled: Vec<S> = (0..m)
        .map(|k| u.iter().fold(S::zero(), |acc, &i| acc + x[i][k].clone()))
        .collect();
    let keep = S::one() - outside * beta.clone();
    let mut out = x.clone();
    for (i, r) in out.iter_mut().enumerate() {
        if u.contains(&i) {
            r.iter_mut().for_each(|v| *v = keep.clone() * v.clone());
        } else {
            for (v, p) in r.iter_mut().zip(&pooled) {
                *v = v.clone() + beta.clone() * p.clone();
            }
        }
    }
    Ok(out)
}

/// Follows each class's cheapest outgoing cross-class edge until a class
/// repeats. Returns one representative node per class on the cycle.
pub(crate) fn class_cycle<S: Scalar>(w: &Rows<S>, alpha: &S, classes: &EquivalenceClasses) -> Option<Vec<usize>> {
    let n = w.len();
    let mut best: Vec<Option<(usize, usize)>> = vec![None; classes.len()];
    for (c, members) in classes.classes.iter().enumerate() {
        for &t in members {
            for h in 0..n {
                if classes.same(t, h) || !(w[t][h] < *alpha) {
                    continue;
                }
                // Members are ascending, so strict improvement keeps the lowest (tail, head).
                if best[c].is_none_or(|(bt, bh)| w[t][h] < w[bt][bh]) {
                    best[c] = Some((t, h));
                }
            }
        }
    }
    for start in 0..classes.len() {
        if best[start].is_none() {
            continue;
        }
        let mut path = vec![start];
        let mut cur = start;
        while let Some((_, h)) = best[cur] {
            let next = classes.class_of[h];
            if let Some(pos) = path.iter().position(|&c| c == next) {
                return Some(path[pos..].iter().map(|&c| best[c].unwrap().0).collect());
            }
            path.push(next);
            cur = next;
        }
    }
    None
}

/// Moves allocation away from every member of `class` towards everyone else.
/// The boolean reports whether the transfer was scaled down to stay nonnegative.
pub fn drain_sink_class(class: &[usize], alpha: f64, x: &Matrix, b: f64) -> Result<(Matrix, bool)> {
    if !(b > 0.0) || !(alpha >= 0.0) {
        return Err(Error::invalid("drain requires alpha >= 0 and b > 0"));
    }
    let d = drain::<f64>(class, &alpha, &to_rows(x), &b)?;
    Ok((to_matrix(&d.x), d.clamped))
}

/// Each cycle node keeps half its row and takes half of its successor's row.
pub fn half_shift_cycle(cycle: &[usize], x: &Matrix) -> Result<Matrix> {
    Ok(to_matrix(&half_shift::<f64>(cycle, &to_rows(x))?))
}

/// Replaces every row in `q` by the average of those rows.
pub fn average_clique(q: &[usize], x: &Matrix) -> Result<Matrix> {
    Ok(to_matrix(&average::<f64>(q, &to_rows(x))?))
}

/// Scales rows in `u` by `1 - |N \ U| beta` and hands `beta` of their pooled
/// mass to each player outside `u`.
pub fn mass_transfer(u: &[usize], beta: f64, x: &Matrix) -> Result<Matrix> {
    Ok(to_matrix(&transfer::<f64>(u, &beta, &to_rows(x))?))
}

pub fn min_slack_class_cycle(g: &EnvySlackGraph, classes: &EquivalenceClasses) -> Result<Option<Vec<usize>>> {
    if !g.strict {
        return Err(Error::invalid("class cycles are defined on strict graphs"));
    }
    if classes.class_of.len() != g.players() {
        return Err(Error::invalid("classes do not match the graph"));
    }
    Ok(class_cycle::<f64>(&g.weights, &g.alpha, classes))
}
