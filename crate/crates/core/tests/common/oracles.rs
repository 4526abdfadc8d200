//! Independent reference implementations used to cross-check the library.

use std::collections::BTreeMap;

use tourbot::nlu::YesNoLabel;
use tourbot::spotdb::Spot;

/// Great-circle distance by the spherical law of cosines (not haversine).
pub fn great_circle_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dl = (lon2 - lon1).to_radians();
    let c = (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).clamp(-1.0, 1.0);
    6371.0088 * c.acos()
}

/// How strongly a non-desired introduced spot claims a plan slot. Larger
/// wins: Yes beats Other beats No, then higher sentiment, then smaller id.
fn dominates(a: &str, b: &str, labels: &BTreeMap<String, YesNoLabel>, sentiments: &BTreeMap<String, f64>) -> bool {
    let rank = |id: &str| match labels[id] {
        YesNoLabel::Yes => 2,
        YesNoLabel::Other => 1,
        YesNoLabel::No => 0,
    };
    if rank(a) != rank(b) {
        return rank(a) > rank(b);
    }
    if sentiments[a] != sentiments[b] {
        return sentiments[a] > sentiments[b];
    }
    a < b
}

/// All ordered pairs (first, second) that satisfy the plan rules stated
/// declaratively:
/// * with a desired spot, `first` is it; otherwise `first` dominates every
///   other introduced spot;
/// * `second` dominates every introduced spot other than `first` (and the
///   desired one).
pub fn plan_pairs(
    introduced: &[String],
    labels: &BTreeMap<String, YesNoLabel>,
    sentiments: &BTreeMap<String, f64>,
    desired: Option<&str>,
) -> Vec<(String, String)> {
    let mut pool: Vec<String> = introduced.to_vec();
    if let Some(d) = desired {
        if !pool.iter().any(|s| s == d) {
            pool.push(d.to_string());
        }
    }
    let rankable = |id: &str| Some(id) != desired;
    let mut out = Vec::new();
    for first in &pool {
        for second in &pool {
            if first == second {
                continue;
            }
            let first_ok = match desired {
                Some(d) => first == d,
                None => introduced
                    .iter()
                    .all(|other| other == first || dominates(first, other, labels, sentiments)),
            };
            let second_ok = rankable(second)
                && introduced
                    .iter()
                    .filter(|o| *o != first && rankable(o))
                    .all(|other| other == second || dominates(second, other, labels, sentiments));
            if first_ok && second_ok {
                out.push((first.clone(), second.clone()));
            }
        }
    }
    out
}

/// Seed per the selection rules, computed by a plain scan.
pub fn selection_seed<'a>(eligible: &[&'a Spot], desired: Option<&str>) -> &'a Spot {
    if let Some(d) = desired.and_then(|d| eligible.iter().find(|s| s.id == d)) {
        return d;
    }
    let mut best = eligible[0];
    for s in &eligible[1..] {
        if s.popularity > best.popularity || (s.popularity == best.popularity && s.id < best.id) {
            best = s;
        }
    }
    best
}

/// Minimal summed distance to the seed over every k-subset of `eligible`
/// that contains the seed.
pub fn min_selection_cost(eligible: &[&Spot], seed: &Spot, k: usize) -> f64 {
    let others: Vec<&Spot> = eligible.iter().copied().filter(|s| s.id != seed.id).collect();
    let n = others.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k - 1 {
            continue;
        }
        let cost: f64 = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| great_circle_km(seed.lat, seed.lon, others[i].lat, others[i].lon))
            .sum();
        best = best.min(cost);
    }
    best
}
