//! Geometric augmentation of training samples.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainSample;
use crate::data::{normalize_points, Point2, PointSet};
use crate::error::Result;
use crate::NOISE;

/// Which transformations may fire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub flips: bool,
    pub rotation: bool,
    pub crop_wrap: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flips: true,
            rotation: true,
            crop_wrap: true,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        Self {
            flips: false,
            rotation: false,
            crop_wrap: false,
        }
    }
}

/// One concrete draw of every random choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub flip_x: bool,
    pub flip_y: bool,
    /// Rotation angle in radians.
    pub theta: f64,
    pub cut_x: Option<f64>,
    pub cut_y: Option<f64>,
}

impl AugmentDraw {
    pub const IDENTITY: Self = Self {
        flip_x: false,
        flip_y: false,
        theta: 0.0,
        cut_x: None,
        cut_y: None,
    };

    /// Draws in a fixed order so a given rng state always yields the same
    /// draw regardless of which toggles are enabled.
    pub fn sample<R: Rng>(config: &AugmentConfig, rng: &mut R) -> Self {
        let flip_x = rng.random_bool(0.5);
        let flip_y = rng.random_bool(0.5);
        let theta = rng.random_range(-PI..PI);
        let wrap_x = rng.random_bool(0.5);
        let cut_x = rng.random_range(-1.0..1.0);
        let wrap_y = rng.random_bool(0.5);
        let cut_y = rng.random_range(-1.0..1.0);
        Self {
            flip_x: config.flips && flip_x,
            flip_y: config.flips && flip_y,
            theta: if config.rotation { theta } else { 0.0 },
            cut_x: (config.crop_wrap && wrap_x).then_some(cut_x),
            cut_y: (config.crop_wrap && wrap_y).then_some(cut_y),
        }
    }
}

/// Augments with a draw taken from a seeded generator.
pub fn augment(sample: &TrainSample, config: &AugmentConfig, seed: u64) -> Result<TrainSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    apply_augment(sample, &AugmentDraw::sample(config, &mut rng))
}

/// Flips, rotates about the origin, re-normalizes, then wraps each cut axis
/// so the cut lands on the ±1 border. Clusters severed by a cut are split.
pub fn apply_augment(sample: &TrainSample, draw: &AugmentDraw) -> Result<TrainSample> {
    let (sin, cos) = draw.theta.sin_cos();
    let moved: Vec<Point2> = sample
        .points
        .iter()
        .map(|p| {
            let x = if draw.flip_x { -p.x } else { p.x };
            let y = if draw.flip_y { -p.y } else { p.y };
            Point2::new(cos * x - sin * y, sin * x + cos * y)
        })
        .collect();
    let mut points = normalize_points(&PointSet::new(sample.plot_id.clone(), moved))?.points;
    let mut labels = sample.labels.clone();
    if let Some(c) = draw.cut_x {
        let above: Vec<bool> = points.iter().map(|p| p.x >= c).collect();
        split_severed(&mut labels, &above);
        for p in &mut points {
            p.x = wrap(p.x, c);
        }
    }
    if let Some(c) = draw.cut_y {
        let above: Vec<bool> = points.iter().map(|p| p.y >= c).collect();
        split_severed(&mut labels, &above);
        for p in &mut points {
            p.y = wrap(p.y, c);
        }
    }
    Ok(TrainSample {
        plot_id: sample.plot_id.clone(),
        points,
        labels,
        agreement: sample.agreement.clone(),
    })
}

/// Cyclic shift placing coordinate `c` at the ±1 border.
pub fn wrap(v: f64, c: f64) -> f64 {
    (v - c).rem_euclid(2.0) - 1.0
}

/// Gives the `above` side of every cluster present on both sides a fresh
/// ID, allocated in ascending order of the original ID. Noise never splits.
fn split_severed(labels: &mut [u32], above: &[bool]) {
    let mut sides: BTreeMap<u32, (bool, bool)> = BTreeMap::new();
    for (&l, &a) in labels.iter().zip(above) {
        if l == NOISE {
            continue;
        }
        let e = sides.entry(l).or_default();
        if a {
            e.1 = true;
        } else {
            e.0 = true;
        }
    }
    let mut next = labels.iter().copied().max().unwrap_or(0);
    let fresh: BTreeMap<u32, u32> = sides
        .into_iter()
        .filter(|(_, (lo, hi))| *lo && *hi)
        .map(|(l, _)| {
            next += 1;
            (l, next)
        })
        .collect();
    for (l, &a) in labels.iter_mut().zip(above) {
        if a {
            if let Some(&f) = fresh.get(l) {
                *l = f;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(points: &[(f64, f64)], labels: &[u32]) -> TrainSample {
        TrainSample {
            plot_id: "s".into(),
            points: points.iter().copied().map(Point2::from).collect(),
            labels: labels.to_vec(),
            agreement: (0..labels.len()).map(|i| i as f64 / 10.0).collect(),
        }
    }

    #[test]
    fn identity_draw_changes_nothing() {
        let s = sample(&[(-1.0, 0.2), (1.0, -1.0), (0.3, 1.0)], &[1, 2, 0]);
        assert_eq!(apply_augment(&s, &AugmentDraw::IDENTITY).unwrap(), s);
    }

    #[test]
    fn flip_negates_and_keeps_labels() {
        let s = sample(&[(-1.0, 0.2), (1.0, -1.0), (0.3, 1.0)], &[1, 2, 0]);
        let d = AugmentDraw { flip_x: true, ..AugmentDraw::IDENTITY };
        let out = apply_augment(&s, &d).unwrap();
        assert_eq!(out.labels, s.labels);
        for (a, b) in out.points.iter().zip(&s.points) {
            assert!((a.x + b.x).abs() < 1e-12 && a.y == b.y);
        }
    }

    #[test]
    fn cut_splits_severed_cluster() {
        let s = sample(&[(-1.0, -1.0), (0.4, 0.0), (0.6, 0.0), (1.0, 1.0)], &[2, 1, 1, 0]);
        let d = AugmentDraw { cut_x: Some(0.5), ..AugmentDraw::IDENTITY };
        let out = apply_augment(&s, &d).unwrap();
        assert_eq!(out.labels, vec![2, 1, 3, 0]);
        assert!((out.points[1].x - 0.9).abs() < 1e-12);
        assert!((out.points[2].x + 0.9).abs() < 1e-12);
    }

    #[test]
    fn wrap_stays_in_domain() {
        for &(v, c) in &[(-1.0, -1.0), (1.0, -1.0), (0.999, 0.999), (-1.0, 0.999)] {
            let w = wrap(v, c);
            assert!((-1.0..1.0).contains(&w), "{v} {c} -> {w}");
        }
    }
}
