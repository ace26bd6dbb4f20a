//! Sampling check of the projection property: a point is in the EP exactly
//! when the OFR, with that point fixed, is still feasible.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::vertices::{enumerate_vertices, MAX_ENUMERATION_DIMENSION};
use crate::lp::Assignment;
use crate::polytope::{Interval, Polytope};
use crate::projection::{EpModel, OfrPolytope};
use crate::scalar::Scalar;

/// Largest grid denominator used when drawing sample coordinates.
pub const MAX_DENOMINATOR: i64 = 64;

/// Above this many row subsets the OFR vertex pass is skipped.
const VERTEX_SUBSET_LIMIT: u128 = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SampleSource {
    Grid,
    OfrVertex,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub point: Assignment,
    pub in_ep: bool,
    pub ofr_feasible: bool,
    pub source: SampleSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectionCheck {
    pub node: String,
    pub seed: u64,
    pub samples: usize,
    /// Samples that landed inside the EP.
    pub samples_inside: usize,
    /// OFR vertices checked; `None` when the pass was skipped for size.
    pub vertices_checked: Option<usize>,
    pub counterexamples: Vec<Counterexample>,
}

impl ProjectionCheck {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// The box sampled along one axis: the EP's range widened by a tenth of its
/// width on each side (by one unit for a flat or infinite side).
fn sampling_range(iv: &Interval) -> (Scalar, Scalar) {
    let one = Scalar::one();
    let (lo, hi) = match (&iv.lower, &iv.upper) {
        (Some(l), Some(u)) => (l.clone(), u.clone()),
        (Some(l), None) => (l.clone(), l + &Scalar::from_integer(10)),
        (None, Some(u)) => (u - &Scalar::from_integer(10), u.clone()),
        (None, None) => (Scalar::from_integer(-10), Scalar::from_integer(10)),
    };
    let width = &hi - &lo;
    let margin = if width.is_zero() {
        one
    } else {
        &width / &Scalar::from_integer(10)
    };
    (&lo - &margin, &hi + &margin)
}

fn draw(rng: &mut ChaCha8Rng, lo: &Scalar, hi: &Scalar) -> Scalar {
    let q = rng.gen_range(1..=MAX_DENOMINATOR);
    let k = rng.gen_range(0..=q);
    lo + &(&(hi - lo) * &Scalar::new(k, q))
}

/// Seeded sample points over the EP's inflated bounding box.
pub fn sample_points(ep: &Polytope, count: usize, seed: u64) -> Vec<Assignment> {
    let bbox: BTreeMap<String, Interval> = match ep.bounding_box() {
        Ok(b) => b,
        Err(_) => ep
            .variables()
            .iter()
            .map(|v| {
                (
                    v.clone(),
                    Interval {
                        lower: None,
                        upper: None,
                    },
                )
            })
            .collect(),
    };
    let ranges: Vec<(String, Scalar, Scalar)> = ep
        .variables()
        .iter()
        .map(|v| {
            let (lo, hi) = sampling_range(&bbox[v]);
            (v.clone(), lo, hi)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            ranges
                .iter()
                .map(|(v, lo, hi)| (v.clone(), draw(&mut rng, lo, hi)))
                .collect()
        })
        .collect()
}

/// Compares EP membership with OFR slice feasibility on `samples` seeded
/// points, and checks that every OFR vertex projects into the EP.
pub fn verify_projection(
    ofr: &OfrPolytope,
    ep: &EpModel,
    samples: usize,
    seed: u64,
) -> ProjectionCheck {
    let points = sample_points(&ep.polytope, samples.max(1), seed);
    let results: Vec<(bool, Option<Counterexample>)> = points
        .into_par_iter()
        .map(|point| {
            let in_ep = ep.polytope.contains(&point).unwrap_or(false);
            let ofr_feasible = ofr.polytope.fix(&point).is_feasible();
            let bad = (in_ep != ofr_feasible).then_some(Counterexample {
                point,
                in_ep,
                ofr_feasible,
                source: SampleSource::Grid,
            });
            (in_ep, bad)
        })
        .collect();
    let samples_inside = results.iter().filter(|(inside, _)| *inside).count();
    let mut counterexamples: Vec<Counterexample> =
        results.into_iter().filter_map(|(_, c)| c).collect();

    let p = &ofr.polytope;
    let vertices_checked = if p.dimension() <= MAX_ENUMERATION_DIMENSION
        && binomial(p.row_count(), p.dimension()) <= VERTEX_SUBSET_LIMIT
    {
        let vertices = enumerate_vertices(p).unwrap_or_default();
        for v in &vertices {
            let image: Assignment = ofr
                .exported
                .iter()
                .map(|name| (name.clone(), v[name].clone()))
                .collect();
            if !ep.polytope.contains(&image).unwrap_or(false) {
                counterexamples.push(Counterexample {
                    point: image,
                    in_ep: false,
                    ofr_feasible: true,
                    source: SampleSource::OfrVertex,
                });
            }
        }
        Some(vertices.len())
    } else {
        None
    };

    ProjectionCheck {
        node: ep.owner.clone(),
        seed,
        samples: samples.max(1),
        samples_inside,
        vertices_checked,
        counterexamples,
    }
}
