//! Double description for pointed cones inside the nonnegative orthant.
//!
//! Starts from the orthant's ray basis and inserts the remaining halfspaces
//! one at a time, combining adjacent positive/negative ray pairs. All
//! arithmetic is rational, so rays are exact; adjacency is the usual
//! combinatorial test on tight sets, recomputed exactly for combined rays.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Clone)]
struct Ray {
    v: Vec<BigRational>,
    /// bitset of halfspaces (orthant facets, then processed inequalities)
    /// tight at this ray
    tight: u128,
}

/// Extreme rays of `{z >= 0} ∩ {ineqs . z >= 0}`, normalized so the first
/// nonzero component is 1. Supports up to 128 total halfspaces, which
/// covers the capped dimensions used here.
pub fn extreme_rays_nonneg(d: usize, ineqs: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    assert!(d + ineqs.len() <= 128, "halfspace budget exceeded");
    // orthant facets as explicit halfspaces, then the supplied ones
    let mut halfspaces: Vec<Vec<BigRational>> = (0..d)
        .map(|i| {
            let mut h = vec![BigRational::zero(); d];
            h[i] = BigRational::one();
            h
        })
        .collect();

    let mut rays: Vec<Ray> = (0..d)
        .map(|i| {
            let mut v = vec![BigRational::zero(); d];
            v[i] = BigRational::one();
            let tight = ((1u128 << d) - 1) & !(1u128 << i);
            Ray { v, tight }
        })
        .collect();

    for h in ineqs {
        let vals: Vec<BigRational> = rays
            .iter()
            .map(|r| h.iter().zip(&r.v).map(|(a, b)| a * b).sum())
            .collect();
        halfspaces.push(h.clone());
        let mut next: Vec<Ray> = Vec::new();
        for (r, val) in rays.iter().zip(&vals) {
            if !val.is_negative() {
                let mut nr = r.clone();
                if val.is_zero() {
                    nr.tight |= 1u128 << (halfspaces.len() - 1);
                }
                next.push(nr);
            }
        }
        for (pi, pv) in vals.iter().enumerate() {
            if !pv.is_positive() {
                continue;
            }
            for (ni, nv) in vals.iter().enumerate() {
                if !nv.is_negative() {
                    continue;
                }
                if !adjacent(&rays, pi, ni) {
                    continue;
                }
                let v: Vec<BigRational> = rays[pi]
                    .v
                    .iter()
                    .zip(&rays[ni].v)
                    .map(|(p, n)| pv * n - nv * p)
                    .collect();
                let v = normalize(v);
                let tight = tight_set(&halfspaces, &v);
                next.push(Ray { v, tight });
            }
        }
        rays = dedup(next);
    }
    rays.into_iter().map(|r| r.v).collect()
}

fn tight_set(halfspaces: &[Vec<BigRational>], v: &[BigRational]) -> u128 {
    let mut bits = 0u128;
    for (k, h) in halfspaces.iter().enumerate() {
        let val: BigRational = h.iter().zip(v).map(|(a, b)| a * b).sum();
        if val.is_zero() {
            bits |= 1 << k;
        }
    }
    bits
}

fn adjacent(rays: &[Ray], a: usize, b: usize) -> bool {
    let common = rays[a].tight & rays[b].tight;
    rays.iter()
        .enumerate()
        .all(|(k, r)| k == a || k == b || (r.tight & common) != common)
}

fn normalize(v: Vec<BigRational>) -> Vec<BigRational> {
    let pivot = v.iter().find(|x| !x.is_zero()).cloned();
    match pivot {
        Some(p) => v.into_iter().map(|x| x / p.clone()).collect(),
        None => v,
    }
}

fn dedup(rays: Vec<Ray>) -> Vec<Ray> {
    let mut out: Vec<Ray> = Vec::with_capacity(rays.len());
    for r in rays {
        if !out.iter().any(|o| o.v == r.v) {
            out.push(r);
        }
    }
    out
}
