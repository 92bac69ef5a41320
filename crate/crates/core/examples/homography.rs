//! Clock-preset motion: builds each hour's homography from four point
//! displacements and checks the algebra the animation relies on.
//!
//! cargo run --example homography

use timelapse::animation::{ClockPresets, Homography, ReflectedField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let presets = ClockPresets::default();
    let horizon = 0.55;
    println!("hour  displacement of (0.5, 0.25) after 10 frames");
    for hour in 1..=12 {
        let h = presets.homography(hour, 1.0, horizon)?;
        let p = h.power(10)?.map_point([0.5, 0.25]);
        println!("{hour:>4}  ({:+.4}, {:+.4})", p[0] - 0.5, p[1] - 0.25);
    }

    let h = presets.homography(2, 1.0, horizon)?;
    let src = Homography::reference_points(horizon);
    let dst = src.map(|p| h.map_point(p));
    let refit = Homography::from_correspondences(&src, &dst, horizon)?;
    println!("refit from correspondences: max entry difference {:.2e}", refit.max_abs_diff(&h));

    let mut repeated = Homography::identity(horizon);
    for _ in 0..5 {
        repeated = repeated.compose(&h)?;
    }
    println!("H^5 vs repeated products: {:.2e}", h.power(5)?.max_abs_diff(&repeated));

    let field = ReflectedField::new(h)?;
    let q = [0.3, 0.8];
    let (a, b) = (field.map(q), field.conjugated().conjugated().map(q));
    println!("reflected field below the horizon maps {q:?} to {a:?} (conjugated twice: {b:?})");
    Ok(())
}
