use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points_used: usize,
    pub excluded: usize,
}

/// Least-squares line through `(ln T, ln regret)`.
///
/// Points with nonpositive regret cannot be logged; they are dropped with a
/// warning.
pub fn fit_regret_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    let mut excluded = 0;
    for &(t, r) in points {
        if !(t > 0.0 && r > 0.0 && t.is_finite() && r.is_finite()) {
            log::warn!("dropping point (T={t}, regret={r}) from the slope fit");
            excluded += 1;
            continue;
        }
        xs.push(t.ln());
        ys.push(r.ln());
    }
    let k = xs.len();
    if k < 3 {
        return Err(Error::invalid(format!(
            "slope fit needs at least 3 positive points, {k} remain after dropping {excluded}"
        )));
    }
    let kf = k as f64;
    let mx = xs.iter().sum::<f64>() / kf;
    let my = ys.iter().sum::<f64>() / kf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope fit needs at least two distinct horizons"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (sse / (kf - 2.0) / sxx).sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        points_used: k,
        excluded,
    })
}
