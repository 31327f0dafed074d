use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use pushlab_core::perception::{BackgroundModel, BackgroundParams, LatentEncoder, LinearEncoder};
use pushlab_core::sim::Camera;
use pushlab_core::{Image, ObjectState, PushWorld, TableGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_images(rng: &mut ChaCha8Rng, n: usize, w: usize, h: usize) -> Vec<Image> {
    (0..n)
        .map(|_| Image::from_pixels(w, h, (0..w * h).map(|_| rng.gen::<f32>()).collect()).unwrap())
        .collect()
}

/// Images spanned by a few random patterns, plus a little noise.
fn low_rank_images(rng: &mut ChaCha8Rng, n: usize, dim: usize, rank: usize) -> Vec<Image> {
    let patterns: Vec<Vec<f32>> = (0..rank)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    (0..n)
        .map(|_| {
            let mut px = vec![0.0f32; dim];
            for (k, p) in patterns.iter().enumerate() {
                let z: f32 = rng.gen_range(-1.0..1.0) * (rank - k) as f32;
                px.iter_mut().zip(p).for_each(|(x, v)| *x += z * v);
            }
            px.iter_mut().for_each(|x| *x += rng.gen_range(-0.01..0.01));
            Image::from_pixels(dim, 1, px).unwrap()
        })
        .collect()
}

fn data_matrix(images: &[Image]) -> DMatrix<f64> {
    let dim = images[0].len();
    DMatrix::from_fn(images.len(), dim, |i, j| images[i].pixels()[j] as f64)
}

/// Dense covariance eigendecomposition: top-`m` eigenvectors as columns,
/// and the eigenvalues in decreasing order.
fn dense_top_subspace(images: &[Image], m: usize) -> (DMatrix<f64>, Vec<f64>) {
    let x = data_matrix(images);
    let n = images.len() as f64;
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / n;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = DMatrix::from_fn(x.ncols(), m, |i, k| eig.eigenvectors[(i, order[k])]);
    (top, order.iter().map(|&i| eig.eigenvalues[i]).collect())
}

fn components_matrix(enc: &LinearEncoder) -> DMatrix<f64> {
    let cs = enc.components();
    DMatrix::from_fn(cs[0].len(), cs.len(), |i, k| cs[k][i] as f64)
}

/// Sine of the largest principal angle between two orthonormal bases.
fn largest_angle_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let residual = a - b * (b.transpose() * a);
    residual.singular_values().max()
}

fn gram_error(enc: &LinearEncoder) -> f64 {
    let u = components_matrix(enc);
    let gram = u.transpose() * &u;
    let identity = DMatrix::<f64>::identity(gram.nrows(), gram.ncols());
    (gram - identity).abs().max()
}

fn reconstruction_mse(enc: &LinearEncoder, images: &[Image]) -> f64 {
    let mut total = 0.0;
    for img in images {
        let back = enc.decode(&enc.encode(img).unwrap()).unwrap();
        total += img
            .pixels()
            .iter()
            .zip(back.pixels())
            .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
            .sum::<f64>();
    }
    total / (images.len() * images[0].len()) as f64
}

fn burned_in(world: &PushWorld) -> BackgroundModel {
    let cam = world.camera();
    let params = BackgroundParams::default();
    let mut bg = BackgroundModel::new(cam.width, cam.height, params).unwrap();
    for _ in 0..params.burn_in {
        bg.update(world.background()).unwrap();
    }
    bg
}

fn footprint(g: &TableGeometry, cam: Camera, o: &ObjectState) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for row in 0..cam.height {
        for col in 0..cam.width {
            let x = (col as f64 + 0.5) * g.width / cam.width as f64;
            let y = g.depth - (row as f64 + 0.5) * g.depth / cam.height as f64;
            if (x - o.center.x).powi(2) + (y - o.center.y).powi(2) <= o.radius * o.radius {
                out.push((col as i64, row as i64));
            }
        }
    }
    out
}

fn within_one_pixel(p: (i64, i64), set: &[(i64, i64)]) -> bool {
    set.iter().any(|q| (p.0 - q.0).abs() <= 1 && (p.1 - q.1).abs() <= 1)
}

#[test]
fn top_three_subspace_matches_dense_eigendecomposition() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let images = random_images(&mut rng, 20, 8, 8);
        let fit = LinearEncoder::fit_detailed(&images, 3).unwrap();
        let (oracle, eigenvalues) = dense_top_subspace(&images, 3);
        let sine = largest_angle_sine(&components_matrix(&fit.encoder), &oracle);
        assert!(sine < 1e-4, "seed {seed}: largest principal angle sine {sine:e}");
        for (got, want) in fit.explained_variance.iter().zip(&eigenvalues) {
            assert!((got - want).abs() <= 1e-6 * eigenvalues[0], "seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn explained_variance_is_nonincreasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let images = low_rank_images(&mut rng, 60, 30, 5);
    let fit = LinearEncoder::fit_detailed(&images, 8).unwrap();
    assert!(fit.explained_variance.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn reconstruction_error_never_grows_with_more_latents() {
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sets = vec![random_images(&mut rng, 40, 6, 6)];
        sets.push(low_rank_images(&mut rng, 40, 36, 4));
        for images in &sets {
            let errors: Vec<f64> = (1..=10)
                .map(|m| reconstruction_mse(&LinearEncoder::fit(images, m).unwrap(), images))
                .collect();
            for (m, w) in errors.windows(2).enumerate() {
                assert!(w[1] <= w[0] + 1e-12, "seed {seed}: error rose from m={} to m={}: {:?}", m + 1, m + 2, errors);
            }
        }
    }
}

#[test]
fn empty_table_background_gives_empty_foreground() {
    let world = PushWorld::new(TableGeometry::default(), Camera::default()).unwrap();
    let bg = burned_in(&world);
    let fg = bg.foreground(world.background()).unwrap();
    assert!(fg.pixels().iter().all(|&v| v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn one_object_foreground_is_its_footprint(x in 0.03f64..0.67, y in 0.03f64..0.32) {
        let world = PushWorld::new(TableGeometry::default(), Camera::default()).unwrap();
        let g = *world.geometry();
        let cam = world.camera();
        let bg = burned_in(&world);
        let object = ObjectState::new(0, x, y);
        let frame = world.render(&world.reset(&[object]).unwrap());
        let fg = bg.foreground(&frame).unwrap();
        let disc = footprint(&g, cam, &object);
        let mut lit = Vec::new();
        for row in 0..cam.height {
            for col in 0..cam.width {
                if fg.get(col, row) != 0.0 {
                    lit.push((col as i64, row as i64));
                }
            }
        }
        for p in &lit {
            prop_assert!(within_one_pixel(*p, &disc), "stray foreground pixel {:?}", p);
        }
        for p in &disc {
            // only the disc's outer ring may blend into the background
            let interior = [(-1, 0), (1, 0), (0, -1), (0, 1)]
                .iter()
                .all(|d| disc.contains(&(p.0 + d.0, p.1 + d.1)));
            prop_assert!(!interior || lit.contains(p), "missing foreground pixel {:?}", p);
        }
    }

    #[test]
    fn background_variance_respects_floor(
        frames in prop::collection::vec(prop::collection::vec(-2.0f32..2.0, 6), 1..40),
        alpha in 0.01f64..0.99,
    ) {
        let params = BackgroundParams { alpha, ..BackgroundParams::default() };
        let mut bg = BackgroundModel::new(3, 2, params).unwrap();
        for f in &frames {
            bg.update(&Image::from_pixels(3, 2, f.clone()).unwrap()).unwrap();
            prop_assert!(bg.variance().iter().all(|&v| v >= params.variance_floor));
        }
        prop_assert_eq!(bg.frames_seen(), frames.len() as u64);
    }

    #[test]
    fn background_follows_scalar_recurrence(
        frames in prop::collection::vec(-2.0f32..2.0, 1..60),
        alpha in 0.01f64..0.99,
    ) {
        let params = BackgroundParams { alpha, ..BackgroundParams::default() };
        let mut bg = BackgroundModel::new(1, 1, params).unwrap();
        let (mut mean, mut var) = (frames[0] as f64, params.variance_floor);
        bg.update(&Image::from_pixels(1, 1, vec![frames[0]]).unwrap()).unwrap();
        for &x in &frames[1..] {
            bg.update(&Image::from_pixels(1, 1, vec![x]).unwrap()).unwrap();
            let d = x as f64 - mean;
            mean = (1.0 - alpha) * mean + alpha * x as f64;
            var = ((1.0 - alpha) * var + alpha * d * d).max(params.variance_floor);
        }
        prop_assert!((bg.mean()[0] - mean).abs() <= 1e-12);
        prop_assert!((bg.variance()[0] - var).abs() <= 1e-12);
    }

    #[test]
    fn components_are_orthonormal(seed in any::<u64>(), m in 1usize..=7, n in 8usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let images = if seed % 2 == 0 {
            random_images(&mut rng, n, 5, 4)
        } else {
            low_rank_images(&mut rng, n, 20, 3)
        };
        let enc = LinearEncoder::fit(&images, m).unwrap();
        prop_assert!(gram_error(&enc) <= 1e-6, "gram error {}", gram_error(&enc));
    }

    #[test]
    fn projection_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let images = random_images(&mut rng, 25, 6, 5);
        let enc = LinearEncoder::fit(&images, 4).unwrap();
        let x: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (px, py, pm) = (enc.project(&x).unwrap(), enc.project(&y).unwrap(), enc.project(&mix).unwrap());
        for i in 0..4 {
            prop_assert!((pm[i] - (a * px[i] + b * py[i])).abs() <= 1e-9);
        }
        // the same combination through images, at image precision
        let mean = enc.mean_image();
        let as_image = |v: &[f64]| {
            Image::from_pixels(6, 5, v.iter().zip(mean).map(|(d, m)| (d + *m as f64) as f32).collect()).unwrap()
        };
        let (ex, ey, em) = (
            enc.encode(&as_image(&x)).unwrap(),
            enc.encode(&as_image(&y)).unwrap(),
            enc.encode(&as_image(&mix)).unwrap(),
        );
        for i in 0..4 {
            let combined = a * ex.0[i] as f64 + b * ey.0[i] as f64;
            prop_assert!((em.0[i] as f64 - combined).abs() <= 1e-5);
        }
    }

    #[test]
    fn in_subspace_images_survive_encode_decode(seed in any::<u64>(), m in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let images = random_images(&mut rng, 30, 6, 6);
        let enc = LinearEncoder::fit(&images, m).unwrap();
        let z = pushlab_core::Latent((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let img = enc.decode(&z).unwrap();
        let back = enc.decode(&enc.encode(&img).unwrap()).unwrap();
        for (p, q) in img.pixels().iter().zip(back.pixels()) {
            prop_assert!((p - q).abs() <= 1e-6);
        }
    }
}
