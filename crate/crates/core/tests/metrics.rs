use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timelapse::metrics::{fid_from_features, masked_ssim, ssim};
use timelapse::superres::{box_mean, guided_filter_plane};
use timelapse::{Image, Mask};

fn rows(seed: u64, n: usize, dim: usize, shift: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>() + shift).collect()).collect()
}

fn noise_image(seed: u64, side: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(side, side, |_, _| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
}

#[test]
fn fid_is_symmetric_and_grows_with_shift() {
    let a = rows(1, 400, 8, 0.0);
    let near = rows(2, 400, 8, 0.05);
    let far = rows(3, 400, 8, 0.5);
    let ab = fid_from_features(&a, &near).unwrap();
    assert_relative_eq!(ab, fid_from_features(&near, &a).unwrap(), max_relative = 1e-9);
    assert!(fid_from_features(&a, &far).unwrap() > ab);
}

#[test]
fn fid_of_a_pure_mean_shift_is_its_squared_norm() {
    let a = rows(4, 300, 5, 0.0);
    let b: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| v + 0.2).collect()).collect();
    assert_relative_eq!(fid_from_features(&a, &b).unwrap(), 5.0 * 0.04, max_relative = 1e-6);
}

#[test]
fn ssim_is_symmetric_and_bounded() {
    let (a, b) = (noise_image(5, 24), noise_image(6, 24));
    let ab = ssim(&a, &b).unwrap();
    assert_relative_eq!(ab, ssim(&b, &a).unwrap(), max_relative = 1e-12);
    assert!(ab < 0.5 && ab > -1.0);
}

#[test]
fn masked_ssim_ignores_the_other_region() {
    let a = noise_image(7, 32);
    let mask = Mask::horizon_split(32, 32, 0.5);
    let b = Image::from_fn(32, 32, |x, y| if mask.is_static(x, y) { a.pixel(x, y) } else { [0.0; 3] });
    let whole = ssim(&a, &b).unwrap();
    let masked = masked_ssim(&a, &b, &mask, true).unwrap();
    assert!(masked > whole);
    assert!(masked > 0.8, "{masked}");
}

#[test]
fn box_mean_of_a_constant_is_constant() {
    let plane = vec![0.37; 15 * 9];
    for v in box_mean(&plane, 15, 9, 3) {
        assert_relative_eq!(v, 0.37, max_relative = 1e-12);
    }
}

#[test]
fn guided_filter_keeps_constants_and_rejects_bad_radii() {
    let guide: Vec<f64> = (0..100).map(|k| (k as f64 * 0.37).sin()).collect();
    let flat = vec![-0.4; 100];
    for v in guided_filter_plane(&guide, &flat, 10, 10, 2, 1e-3).unwrap() {
        assert_relative_eq!(v, -0.4, max_relative = 1e-9);
    }
    assert!(guided_filter_plane(&guide, &flat, 10, 10, 0, 1e-3).is_err());
    assert!(guided_filter_plane(&guide, &flat, 10, 10, 10, 1e-3).is_err());
}
