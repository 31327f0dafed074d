#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use pushlab_core::perception::{BackgroundModel, BackgroundParams, Latent, LatentEncoder};
use pushlab_core::{Image, Point, PushAction, Result, TripletStore};
use rand::Rng;

/// Reads the latent straight off a `dim x 1` image.
pub struct IdentityEncoder {
    pub dim: usize,
}

impl LatentEncoder for IdentityEncoder {
    fn latent_dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, image: &Image) -> Result<Latent> {
        Ok(Latent(image.pixels().to_vec()))
    }

    fn fingerprint(&self) -> u64 {
        0x1d
    }
}

/// A background so far from any test value that every pixel is foreground.
pub fn permissive_background(dim: usize) -> BackgroundModel {
    let params = BackgroundParams {
        burn_in: 1,
        ..BackgroundParams::default()
    };
    let mut bg = BackgroundModel::new(dim, 1, params).unwrap();
    bg.update(&Image::new(dim, 1, -1.0e6)).unwrap();
    bg
}

/// A distinct, valid action for triplet `i`.
pub fn tagged_action(i: usize) -> PushAction {
    let x = 0.01 + (i % 60) as f64 * 0.01;
    let y = 0.01 + (i / 60 % 30) as f64 * 0.01;
    PushAction::new(vec![Point::new(x, y), Point::new(0.35, 0.2)]).unwrap()
}

/// An encoded store whose latents are exactly the given `(pre, post)` pairs.
pub fn latent_store(pairs: &[(Vec<f32>, Vec<f32>)]) -> TripletStore {
    let dim = pairs[0].0.len();
    let mut store = TripletStore::new(dim, 1);
    for (i, (pre, post)) in pairs.iter().enumerate() {
        store
            .record(
                Image::from_pixels(dim, 1, pre.clone()).unwrap(),
                tagged_action(i),
                Image::from_pixels(dim, 1, post.clone()).unwrap(),
            )
            .unwrap();
    }
    store
        .encode_all(&permissive_background(dim), &IdentityEncoder { dim })
        .unwrap();
    store
}

/// Latent values on a coarse grid so exact and near matches are common.
pub fn grid_latent<R: Rng>(rng: &mut R, dim: usize, steps: u32) -> Vec<f32> {
    (0..dim).map(|_| rng.gen_range(0..=steps) as f32 * 0.25).collect()
}

pub fn random_pairs<R: Rng>(rng: &mut R, count: usize, dim: usize, steps: u32) -> Vec<(Vec<f32>, Vec<f32>)> {
    (0..count)
        .map(|_| (grid_latent(rng, dim, steps), grid_latent(rng, dim, steps)))
        .collect()
}

pub fn close(a: &[f32], b: &[f32], thresholds: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .zip(thresholds)
        .all(|((x, y), t)| (*x as f64 - *y as f64).abs() <= *t)
}

fn key(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Length of the shortest chain of stored transitions from `start` to a
/// state within `thresholds` of `goal`, if one of at most `max_depth` steps
/// exists. Plain breadth-first search with exact-value state identity.
pub fn bfs_min_length(
    pairs: &[(Vec<f32>, Vec<f32>)],
    thresholds: &[f64],
    start: &[f32],
    goal: &[f32],
    max_depth: usize,
) -> Option<usize> {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(key(start));
    queue.push_back((start.to_vec(), 0));
    while let Some((state, depth)) = queue.pop_front() {
        if close(&state, goal, thresholds) {
            return Some(depth);
        }
        if depth == max_depth {
            continue;
        }
        for (pre, post) in pairs {
            if close(&state, pre, thresholds) && seen.insert(key(post)) {
                queue.push_back((post.clone(), depth + 1));
            }
        }
    }
    None
}
