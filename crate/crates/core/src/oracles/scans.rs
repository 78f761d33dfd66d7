//! Threshold scans for the existence lemmas on Gaussian expectations.
//!
//! The lemmas only assert that some epsilon, N, R0 or constant band exists.
//! These scans evaluate the population quantity (or, for the heavy-tailed
//! sum, an empirical one) and report where the inequality starts to hold.

use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;

use super::erfcx::erfcx_unchecked;
use super::expectations::{mean_fourth_ratio, mean_inverse, mean_ratio};
use crate::error::Result;
use crate::rng::SeedTree;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdScan {
    pub name: String,
    pub quantity: String,
    /// The located threshold, or `None` if the scan never crossed.
    pub threshold: Option<f64>,
    pub rows: Vec<Value>,
}

/// Bisection for the crossing of a monotone predicate, `ok(lo) != ok(hi)`.
fn bisect(mut lo: f64, mut hi: f64, ok: impl Fn(f64) -> bool, log: bool) -> f64 {
    let lo_ok = ok(lo);
    for _ in 0..200 {
        let mid = if log { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) == lo_ok {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo_ok {
        lo
    } else {
        hi
    }
}

/// `E[X^2 1{|X| > N}]` for standard normal X.
pub fn second_moment_tail(n: f64) -> f64 {
    let e = (-0.5 * n * n).exp();
    n * (2.0 / PI).sqrt() * e + erfcx_unchecked(n / 2f64.sqrt()) * e
}

fn small_denominator_scan() -> ThresholdScan {
    // min over the sphere of E[Z^2 X^2/(eps + X^2)] is E[X^2/(eps + X^2)].
    let target = 0.99;
    let eps_star = bisect(1e-14, 1.0, |e| mean_ratio(e) >= target, true);
    let eps = 0.5 * eps_star;
    let n_star = bisect(0.0, 40.0, |n| mean_ratio(eps) - second_moment_tail(n) >= target, false);
    let rows = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2]
        .iter()
        .map(|&e| json!({"epsilon": e, "min_expectation": mean_ratio(e)}))
        .chain(std::iter::once(json!({
            "epsilon": eps,
            "cutoff_n": n_star,
            "truncated_lower_bound": mean_ratio(eps) - second_moment_tail(n_star),
        })))
        .collect();
    ThresholdScan {
        name: "small_denominator_ratio".into(),
        quantity: "largest epsilon with min_xi E[(a.xi)^2 X^2/(eps+X^2)] >= 0.99; cutoff N at eps/2".into(),
        threshold: Some(eps_star),
        rows,
    }
}

fn fourth_over_square_scan(seed: u64) -> ThresholdScan {
    let (n, m, directions) = (64usize, 640usize, 200usize);
    let tree = SeedTree::new(seed);
    let mut normals = tree.child(0).normals();
    let mut a = vec![0.0; n * m];
    normals.fill(&mut a);
    let mut dir_normals = tree.child(1).normals();
    let mut perps = Vec::with_capacity(directions);
    for _ in 0..directions {
        let mut e = vec![0.0; n];
        dir_normals.fill(&mut e[1..]);
        let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        e.iter_mut().for_each(|v| *v /= norm);
        let proj: Vec<f64> = a.chunks(n).map(|row| row.iter().zip(&e).map(|(p, q)| p * q).sum()).collect();
        perps.push(proj);
    }
    let xs: Vec<f64> = a.chunks(n).map(|row| row[0]).collect();

    let mut rows = Vec::new();
    let mut threshold = None;
    for &eta in &[0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.001] {
        let (c, s) = (1.0 - eta, (1.0 - (1.0 - eta) * (1.0f64 - eta)).sqrt());
        let min = perps
            .iter()
            .map(|p| {
                xs.iter()
                    .zip(p)
                    .map(|(x, y)| (c * x + s * y).powi(4) / (x * x))
                    .sum::<f64>()
                    / m as f64
            })
            .fold(f64::INFINITY, f64::min);
        if min >= 100.0 {
            threshold = Some(eta);
        }
        rows.push(json!({"eta0": eta, "min_over_directions": min}));
    }
    ThresholdScan {
        name: "fourth_over_square_sum".into(),
        quantity: "smallest eta0 on the grid with min over 200 directions of (1/m) sum (a.u)^4/(a.e1)^2 >= 100; n=64, m=640".into(),
        threshold,
        rows,
    }
}

fn small_radius_scan() -> ThresholdScan {
    let beta = 1.0;
    let sup = |r: f64| r * mean_ratio(beta * r).max(mean_inverse(beta * r));
    let mut rows = Vec::new();
    let mut first = None;
    for &eps in &[0.5, 0.1, 0.01, 0.001] {
        let r0 = bisect(1e-14, 1e4, |r| sup(r) < eps, true);
        first.get_or_insert(r0);
        rows.push(json!({"beta": beta, "epsilon": eps, "r0": r0}));
    }
    ThresholdScan {
        name: "small_radius_bound".into(),
        quantity: "largest R0 with R sup_u E[(a.u)^2/(beta R + X^2)] < epsilon; threshold is epsilon=0.5".into(),
        threshold: first,
        rows,
    }
}

fn cubic_band_scan() -> ThresholdScan {
    let beta = 1.0;
    let r1 = 0.1;
    let grid: Vec<f64> = (0..=60).map(|i| r1 * 10f64.powf(-6.0 * i as f64 / 60.0)).collect();
    let e4: Vec<f64> = grid.iter().map(|&r| mean_fourth_ratio(beta * r)).collect();
    let lo = 0.1 * e4.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e4.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ThresholdScan {
        name: "cubic_band".into(),
        quantity: "population band s E[X^4/(beta R+X^2)] for s in [0.1, 1], R in [1e-7, R1]".into(),
        threshold: Some(r1),
        rows: vec![json!({"beta": beta, "r1": r1, "lower": lo, "upper": hi})],
    }
}

pub fn threshold_scans(seed: u64) -> Result<Vec<ThresholdScan>> {
    Ok(vec![
        small_denominator_scan(),
        fourth_over_square_scan(seed),
        small_radius_scan(),
        cubic_band_scan(),
    ])
}
