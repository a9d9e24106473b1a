//! Exact one-dimensional Wasserstein-1 distance.
//!
//! `W1(mu, nu) = integral of |F_mu - F_nu|` over the line, evaluated by a
//! sorted sweep over the merged supports in `O(n log n)`.

use crate::error::{Error, Result};
use crate::metrics::DiscreteMeasure;

pub fn w1_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let (tm, tn) = (mu.total(), nu.total());
    if (tm - tn).abs() > 1e-9 * tm.abs().max(tn.abs()).max(1e-300) {
        return Err(Error::MassMismatch(tm, tn));
    }
    let transverse = mu
        .points
        .iter()
        .chain(&nu.points)
        .map(|p| p[1])
        .next()
        .unwrap_or(0.0);
    if mu
        .points
        .iter()
        .chain(&nu.points)
        .any(|p| p[1] != transverse)
    {
        return Err(Error::InvalidConfig(
            "w1_1d requires supports on a single line".into(),
        ));
    }

    let mut events: Vec<(f64, f64)> = Vec::with_capacity(mu.len() + nu.len());
    events.extend(mu.points.iter().zip(&mu.masses).map(|(p, &m)| (p[0], m)));
    events.extend(nu.points.iter().zip(&nu.masses).map(|(p, &m)| (p[0], -m)));
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut w = 0.0;
    let mut cdf_gap: f64 = 0.0;
    let mut comp = 0.0; // compensation for the running CDF difference
    let mut last_x = f64::NAN;
    for (x, dm) in events {
        if last_x.is_finite() && x > last_x {
            w += cdf_gap.abs() * (x - last_x);
        }
        let y = dm - comp;
        let t = cdf_gap + y;
        comp = (t - cdf_gap) - y;
        cdf_gap = t;
        last_x = x;
    }
    Ok(w)
}
