//! Envy-freeness slack transform.
//!
//! Starting from an envy-free allocation, repeatedly either drains a class
//! that others are close to envying, blends rows along a cycle of cheapest
//! edges, shrinks the threshold, or merges the classes on such a cycle. The
//! result gives every player a margin of at least `gamma` over every other
//! player, except over players holding an identical row.
//!
//! Thresholds shrink geometrically from an exponentially large start, far
//! below double precision, so the loop runs on exact rationals.

use num::{BigRational, One, Zero};

use super::graph::{weights, EquivalenceClasses};
use super::ops::{average, class_cycle, drain, half_shift};
use super::remove_envy::remove_envy_step;
use super::report::{Branch, ConstraintOutcome, IterationRecord, Outcome, TransformReport};
use super::scalar::{to_matrix, to_rows, Rows, Scalar};
use crate::error::{Error, Result};
use crate::matrix::{frobenius_product, validate_allocation, FractionalAllocation, MeanMatrix};
use crate::model::check_bounds;
use crate::FEASIBILITY_TOL;

pub(crate) struct LoopResult<S> {
    pub x: Rows<S>,
    pub alpha: S,
    pub iterations: usize,
    pub clamp_events: usize,
}

fn any_envy<S: Scalar>(w: &Rows<S>) -> bool {
    let tol = -S::zero_tol();
    w.iter().flatten().any(|v| *v < tol)
}

/// Calls envy removal until nobody envies anyone. Returns the number of calls.
pub(crate) fn settle<S: Scalar>(mu: &Rows<S>, x: &mut Rows<S>) -> Result<usize> {
    let n = x.len();
    let mut calls = 0;
    while any_envy(&weights(mu, x)) {
        if calls > n * n {
            return Err(Error::invariant("envy removal did not converge within n^2 calls"));
        }
        *x = remove_envy_step(mu, x)?;
        calls += 1;
    }
    Ok(calls)
}

fn check_columns<S: Scalar>(x: &Rows<S>, when: &str) -> Result<()> {
    let tol = S::zero_tol();
    for k in 0..x[0].len() {
        let s = x.iter().fold(S::zero(), |acc, r| acc + r[k].clone());
        if (s - S::one()).abs() > tol {
            return Err(Error::invariant(format!("column {k} no longer sums to 1 after {when}")));
        }
    }
    if x.iter().flatten().any(|v| *v < -tol.clone()) {
        return Err(Error::invariant(format!("negative entry after {when}")));
    }
    Ok(())
}

/// The main loop on rescaled means (lower bound 1, upper bound `b`).
pub(crate) fn slack_loop<S: Scalar>(
    mu: &Rows<S>,
    mut x: Rows<S>,
    alpha0: S,
    b: &S,
    scale: f64,
    observe: &mut dyn FnMut(&IterationRecord),
) -> Result<LoopResult<S>> {
    let n = x.len();
    let budget = n * n * n;
    let nn = S::from_usize(n);
    let shrink = S::from_usize(4) * b.clone() * nn.clone() * nn.clone() * nn.clone() * nn.clone();
    let two = S::from_usize(2);
    let mut alpha = alpha0;
    let mut iterations = 0;
    let mut clamp_events = 0;
    loop {
        let w = weights(mu, &x);
        let classes = EquivalenceClasses::of(&x);
        let edge = |i: usize, j: usize| w[i][j] < alpha;
        let cross = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .any(|(i, j)| !classes.same(i, j) && edge(i, j));
        if !cross {
            break;
        }
        if iterations >= budget {
            return Err(Error::invariant(format!("iteration budget n^3 = {budget} exhausted")));
        }
        let edges = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && edge(i, j))
            .count();
        let mut record = IterationRecord {
            iteration: iterations,
            branch: Branch::Shrink,
            alpha: alpha.to_f64() * scale,
            edges,
            classes: classes.len(),
            envy_removals: 0,
        };

        let sink = classes.classes.iter().find(|members| {
            let inside = |j: usize| members.contains(&j);
            let incoming = (0..n).any(|t| !inside(t) && members.iter().any(|&h| edge(t, h)));
            let outgoing = members.iter().any(|&t| (0..n).any(|h| !inside(h) && edge(t, h)));
            incoming && !outgoing
        });
        if let Some(members) = sink {
            let drained = drain(members, &alpha, &x, b).map_err(|e| Error::invariant(e.to_string()))?;
            if drained.clamped {
                clamp_events += 1;
            }
            x = drained.x;
            alpha = alpha / (two.clone() * b.clone());
            record.branch = Branch::Drain;
        } else {
            let cycle = class_cycle(&w, &alpha, &classes)
                .ok_or_else(|| Error::invariant("no class cycle although every entered class has an exit"))?;
            let splits = (0..n).any(|u| {
                cycle.iter().any(|&i| u != i && edge(u, i)) && cycle.iter().any(|&i| u == i || !edge(u, i))
            });
            let threshold = alpha.clone() / shrink.clone();
            let shifted = if splits {
                let mut y = half_shift(&cycle, &x)?;
                // A blended representative can envy a classmate left off the cycle.
                let removals = settle(mu, &mut y)?;
                let half = alpha.clone() / two.clone();
                let wy = weights(mu, &y);
                let remaining = (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| i != j && wy[i][j] < half)
                    .count();
                // Two cycle nodes pointing at each other can trade one edge for another.
                (remaining < edges).then_some((y, removals))
            } else {
                None
            };
            if let Some((y, removals)) = shifted {
                x = y;
                record.envy_removals = removals;
                alpha = alpha / two.clone();
                record.branch = Branch::HalfShift;
            } else if (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .any(|(i, j)| i != j && edge(i, j) && w[i][j] >= threshold)
            {
                alpha = threshold;
                record.branch = Branch::Shrink;
            } else {
                let mut q: Vec<usize> = cycle
                    .iter()
                    .flat_map(|&i| classes.classes[classes.class_of[i]].iter().copied())
                    .collect();
                q.sort_unstable();
                q.dedup();
                x = average(&q, &x)?;
                let alpha_avg = alpha / nn.clone();
                record.envy_removals = settle(mu, &mut x)?;
                alpha = alpha_avg / two.clone();
                record.branch = Branch::Merge;
            }
        }
        iterations += 1;
        check_columns(&x, &format!("iteration {}", record.iteration))?;
        if any_envy(&weights(mu, &x)) {
            return Err(Error::invariant(format!(
                "allocation not envy-free after iteration {} ({:?})",
                record.iteration, record.branch
            )));
        }
        observe(&record);
    }
    Ok(LoopResult {
        x,
        alpha,
        iterations,
        clamp_events,
    })
}

fn rational(v: f64) -> BigRational {
    <BigRational as Scalar>::from_f64(v)
}

/// `(4 b n^4)^(n^2) (2n)^(n^3)`: the factor between `gamma` and the starting threshold.
pub(crate) fn alpha_multiplier(n: usize, b: &BigRational) -> BigRational {
    let int = <BigRational as Scalar>::from_usize;
    let base = int(4) * b * num::pow(int(n), 4);
    num::pow(base, n * n) * num::pow(int(2 * n), n * n * n)
}

/// Largest admissible `gamma` for `n` players and value range `[a, b]`.
pub fn efe_gamma_max(n: usize, a: f64, b: f64) -> Result<f64> {
    check_bounds(a, b)?;
    let bq = rational(b) / rational(a);
    let g = rational(a) / alpha_multiplier(n, &bq);
    Ok(Scalar::to_f64(&g))
}

/// Snaps each column to an exact probability vector: tiny negatives become 0
/// and the largest entry absorbs the rounding residue.
fn snap_columns(x: &mut Rows<BigRational>) {
    let m = x[0].len();
    for k in 0..m {
        for r in x.iter_mut() {
            if r[k] < BigRational::zero() {
                r[k] = BigRational::zero();
            }
        }
        let big = (0..x.len())
            .fold(0, |best, i| if x[i][k] > x[best][k] { i } else { best });
        let rest = x
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != big)
            .fold(BigRational::zero(), |acc, (_, r)| acc + r[k].clone());
        x[big][k] = BigRational::one() - rest;
    }
}

pub fn efe_slack_transform(
    mu: &MeanMatrix,
    y: &FractionalAllocation,
    gamma: f64,
    a: f64,
    b: f64,
) -> Result<TransformReport> {
    efe_slack_transform_observed(mu, y, gamma, a, b, &mut |_| {})
}

/// Same as [`efe_slack_transform`], calling `observe` after every outer iteration.
pub fn efe_slack_transform_observed(
    mu: &MeanMatrix,
    y: &FractionalAllocation,
    gamma: f64,
    a: f64,
    b: f64,
    observe: &mut dyn FnMut(&IterationRecord),
) -> Result<TransformReport> {
    check_bounds(a, b)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma must be positive"));
    }
    let n = mu.rows();
    let bq = rational(b) / rational(a);
    let alpha0 = rational(gamma) / rational(a) * alpha_multiplier(n, &bq);
    if alpha0 > BigRational::one() {
        return Err(Error::invalid(format!(
            "gamma {gamma:e} exceeds the admissible maximum {:e}",
            efe_gamma_max(n, a, b)?
        )));
    }
    run(mu, y, gamma, a, b, alpha0, observe)
}

/// Runs the transform from a caller-chosen starting threshold (in units of the
/// lower bound `a`), skipping the admissibility check on `gamma`.
#[doc(hidden)]
pub fn efe_slack_transform_with_alpha(
    mu: &MeanMatrix,
    y: &FractionalAllocation,
    gamma: f64,
    a: f64,
    b: f64,
    alpha0: f64,
) -> Result<TransformReport> {
    check_bounds(a, b)?;
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::invalid("starting threshold must be positive"));
    }
    run(mu, y, gamma, a, b, rational(alpha0), &mut |_| {})
}

fn run(
    mu: &MeanMatrix,
    y: &FractionalAllocation,
    gamma: f64,
    a: f64,
    b: f64,
    alpha0: BigRational,
    observe: &mut dyn FnMut(&IterationRecord),
) -> Result<TransformReport> {
    if mu.shape() != y.shape() {
        return Err(Error::shape(mu.shape(), y.shape()));
    }
    let n = mu.rows();
    if n < 2 {
        return Err(Error::invalid("at least two players are required"));
    }
    if !mu.within(a, b) {
        return Err(Error::invalid(format!("mean entries must lie in [{a}, {b}]")));
    }
    let report = validate_allocation(y, FEASIBILITY_TOL);
    if !report.is_ok() {
        return Err(Error::invalid(format!("invalid allocation: {report}")));
    }
    let wf = weights::<f64>(&to_rows(mu), &to_rows(y));
    if let Some((i, j)) = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| wf[i][j] < -FEASIBILITY_TOL)
    {
        return Err(Error::invalid(format!(
            "input is not envy-free: player {i} envies player {j} by {:e}",
            -wf[i][j]
        )));
    }

    let aq = rational(a);
    let muq: Rows<BigRational> = to_rows::<BigRational>(mu)
        .into_iter()
        .map(|r| r.into_iter().map(|v| v / aq.clone()).collect())
        .collect();
    let bq = rational(b) / aq.clone();
    let mut x: Rows<BigRational> = to_rows(y);
    snap_columns(&mut x);
    settle(&muq, &mut x)?;

    let initial_alpha = Scalar::to_f64(&alpha0) * a;
    let mut log = Vec::new();
    let result = slack_loop(&muq, x, alpha0, &bq, a, &mut |r| {
        log.push(r.clone());
        observe(r);
    })?;

    let out = to_matrix(&result.x);
    let mut outcomes = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let exact = result.x[i]
                .iter()
                .zip(&result.x[j])
                .zip(&muq[i])
                .fold(BigRational::zero(), |acc, ((p, q), v)| acc + (p.clone() - q.clone()) * v.clone());
            let slack = Scalar::to_f64(&exact) * a;
            let equal = result.x[i] == result.x[j];
            let outcome = if equal {
                Outcome::EqualRows
            } else if slack >= gamma - FEASIBILITY_TOL {
                Outcome::Slack
            } else {
                Outcome::Violated
            };
            outcomes.push(ConstraintOutcome {
                label: format!("efe:{i}->{j}"),
                slack,
                outcome,
            });
        }
    }
    let welfare = |x: &Rows<BigRational>| {
        x.iter()
            .zip(&muq)
            .fold(BigRational::zero(), |acc, (r, v)| acc + super::scalar::dot(r, v))
    };
    let y_exact: Rows<BigRational> = to_rows(y);
    let sw_loss = Scalar::to_f64(&(welfare(&y_exact) - welfare(&result.x))) * a;
    debug_assert!((sw_loss - (frobenius_product(y, mu)? - frobenius_product(&out, mu)?)).abs() < 1e-9);

    Ok(TransformReport {
        output: FractionalAllocation::new_unchecked(out),
        gamma,
        initial_alpha,
        final_alpha: Scalar::to_f64(&result.alpha) * a,
        iterations: result.iterations,
        outcomes,
        sw_loss,
        clamp_events: result.clamp_events,
        log,
    })
}
