mod common;

use common::IdentityEncoder;
use proptest::prelude::*;
use pushlab_core::perception::{BackgroundModel, BackgroundParams, LatentEncoder, LinearEncoder};
use pushlab_core::{Error, Image, Point, PushAction, TripletStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    Image::from_pixels(w, h, (0..w * h).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

fn random_action(rng: &mut ChaCha8Rng) -> PushAction {
    let n = rng.gen_range(2..=11);
    PushAction::new(
        (0..n)
            .map(|_| Point::new(rng.gen_range(0.0f32..0.7) as f64, rng.gen_range(0.0f32..0.35) as f64))
            .collect(),
    )
    .unwrap()
}

fn random_store(rng: &mut ChaCha8Rng, count: usize, w: usize, h: usize) -> TripletStore {
    let mut store = TripletStore::new(w, h);
    for _ in 0..count {
        let pre = random_image(rng, w, h);
        let action = random_action(rng);
        let post = random_image(rng, w, h);
        store.record(pre, action, post).unwrap();
    }
    store
}

fn ready_background(w: usize, h: usize) -> BackgroundModel {
    let params = BackgroundParams {
        burn_in: 2,
        ..BackgroundParams::default()
    };
    let mut bg = BackgroundModel::new(w, h, params).unwrap();
    bg.update(&Image::new(w, h, 0.0)).unwrap();
    bg.update(&Image::new(w, h, 0.0)).unwrap();
    bg
}

fn bytes(store: &TripletStore) -> Vec<u8> {
    let mut buf = Vec::new();
    store.write_to(&mut buf).unwrap();
    buf
}

#[test]
fn hundred_triplets_round_trip_through_a_file() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let store = random_store(&mut rng, 100, 8, 6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.oelt");
    store.save(&path).unwrap();
    let back = TripletStore::load(&path).unwrap();
    assert_eq!(back, store);
    assert_eq!(std::fs::read(&path).unwrap(), bytes(&back));
}

#[test]
fn three_triplets_cache_six_latents_matching_manual_encoding() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = random_store(&mut rng, 3, 4, 4);
    let bg = ready_background(4, 4);
    let images: Vec<Image> = store
        .triplets()
        .iter()
        .flat_map(|t| [t.pre_image.clone(), t.post_image.clone()])
        .collect();
    let enc = LinearEncoder::fit(&images, 2).unwrap();
    store.encode_all(&bg, &enc).unwrap();
    let mut cached = 0;
    for t in store.triplets() {
        for (img, latent) in [(&t.pre_image, &t.pre_latent), (&t.post_image, &t.post_latent)] {
            let latent = latent.as_ref().unwrap();
            assert_eq!(latent.len(), 2);
            // foreground by hand, then project by hand
            let fg: Vec<f64> = img
                .pixels()
                .iter()
                .zip(bg.mean().iter().zip(bg.variance()))
                .map(|(&x, (&m, &v))| {
                    let d = x as f64 - m;
                    if d * d > 16.0 * v {
                        x as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            for (k, c) in enc.components().iter().enumerate() {
                let z: f64 = c
                    .iter()
                    .zip(&fg)
                    .zip(enc.mean_image())
                    .map(|((&ci, &x), &m)| ci as f64 * (x - m as f64))
                    .sum();
                assert!((latent.0[k] as f64 - z).abs() <= 1e-5);
            }
            cached += 1;
        }
    }
    assert_eq!(cached, 6);
}

#[test]
fn corrupted_magic_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut buf = bytes(&random_store(&mut rng, 2, 3, 3));
    buf[0] = b'X';
    assert!(matches!(TripletStore::read_from(&mut buf.as_slice()), Err(Error::BadMagic { .. })));
}

#[test]
fn every_truncation_is_an_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = random_store(&mut rng, 3, 3, 2);
    store.encode_all(&ready_background(3, 2), &IdentityEncoder { dim: 6 }).unwrap();
    let buf = bytes(&store);
    for cut in 0..buf.len() {
        assert!(TripletStore::read_from(&mut &buf[..cut]).is_err(), "cut at {cut}");
    }
    let mut extra = buf.clone();
    extra.push(0);
    assert!(TripletStore::read_from(&mut extra.as_slice()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn round_trip_is_bit_exact(
        seed in any::<u64>(),
        count in 0usize..30,
        w in 1usize..6,
        h in 1usize..6,
        encoded in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = random_store(&mut rng, count, w, h);
        if encoded {
            let enc = IdentityEncoder { dim: w * h };
            store.encode_all(&ready_background(w, h), &enc).unwrap();
            prop_assert_eq!(store.encoder_fingerprint(), Some(enc.fingerprint()));
        }
        let buf = bytes(&store);
        let back = TripletStore::read_from(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &store);
        prop_assert_eq!(bytes(&back), buf);
        prop_assert_eq!(back.len(), count);
        prop_assert_eq!(back.is_encoded(), encoded);
    }

    #[test]
    fn indices_stay_dense(seed in any::<u64>(), count in 1usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = TripletStore::new(2, 2);
        let mut actions = Vec::new();
        for i in 0..count {
            let a = random_action(&mut rng);
            let img = Image::new(2, 2, i as f32);
            prop_assert_eq!(store.record(img.clone(), a.clone(), img).unwrap(), i);
            actions.push(a);
        }
        for (i, a) in actions.iter().enumerate() {
            prop_assert_eq!(&store.get(i).unwrap().action, a);
        }
    }
}
