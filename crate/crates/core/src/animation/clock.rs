use std::path::Path;

use serde::{Deserialize, Serialize};

use super::homography::{Homography, Point};
use crate::error::{Error, Result};

const DEFAULT_PRESETS: &str = include_str!("../../data/clock_presets.toml");

/// Per-frame displacements of the reference points for one clock direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockPreset {
    pub hour: u32,
    pub upper_left: Point,
    pub upper_right: Point,
    pub horizon_left: Point,
    pub horizon_right: Point,
}

impl ClockPreset {
    pub fn displacements(&self) -> [Point; 4] {
        [self.upper_left, self.upper_right, self.horizon_left, self.horizon_right]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockPresets {
    pub preset: Vec<ClockPreset>,
}

impl Default for ClockPresets {
    fn default() -> Self {
        Self::parse(DEFAULT_PRESETS).expect("bundled clock presets are valid")
    }
}

impl ClockPresets {
    pub fn parse(text: &str) -> Result<Self> {
        let p: ClockPresets = toml::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut hours: Vec<u32> = self.preset.iter().map(|p| p.hour).collect();
        hours.sort_unstable();
        if hours != (1..=12).collect::<Vec<_>>() {
            return Err(Error::Config("clock presets must cover hours 1 to 12 exactly once".into()));
        }
        if self.preset.iter().flat_map(|p| p.displacements()).flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite clock displacement".into()));
        }
        Ok(())
    }

    pub fn get(&self, hour: u32) -> Result<&ClockPreset> {
        self.preset
            .iter()
            .find(|p| p.hour == hour)
            .ok_or_else(|| Error::Argument(format!("clock hour {hour} outside 1..=12")))
    }

    pub fn homography(&self, hour: u32, speed_scale: f64, horizon_y: f64) -> Result<Homography> {
        if !speed_scale.is_finite() || speed_scale < 0.0 {
            return Err(Error::Argument(format!("speed scale {speed_scale} must be finite and non-negative")));
        }
        let d = self.get(hour)?.displacements().map(|p| [p[0] * speed_scale, p[1] * speed_scale]);
        Homography::from_displacements(&d, horizon_y)
    }
}

/// Bundled preset for `hour` (12 is up and toward the viewer, 3 is straight
/// right), scaled by `speed_scale`.
pub fn clock_homography(hour: u32, speed_scale: f64, horizon_y: f64) -> Result<Homography> {
    ClockPresets::default().homography(hour, speed_scale, horizon_y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_oclock_is_rightward() {
        let p = ClockPresets::default();
        let d = p.get(3).unwrap();
        assert!(d.upper_left[0] > 0.0 && d.upper_right[0] > 0.0);
        assert_eq!(d.upper_left[1], 0.0);
        assert_eq!(d.upper_right[1], 0.0);
    }

    #[test]
    fn opposite_hours_mirror() {
        let p = ClockPresets::default();
        for h in 1..=11 {
            let (a, b) = (p.get(h).unwrap(), p.get(12 - h).unwrap());
            assert!((a.upper_left[0] + b.upper_right[0]).abs() < 1e-12);
            assert!((a.upper_left[1] - b.upper_right[1]).abs() < 1e-12);
            assert!((a.horizon_left[0] + b.horizon_right[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn twelve_moves_up_and_spreads() {
        let d = ClockPresets::default().get(12).unwrap().clone();
        assert!(d.upper_left[1] < 0.0 && d.upper_right[1] < 0.0);
        assert!(d.upper_left[0] < 0.0 && d.upper_right[0] > 0.0);
    }

    #[test]
    fn zero_speed_and_bad_hours() {
        let h = clock_homography(7, 0.0, 0.5).unwrap();
        assert!(h.max_abs_diff(&Homography::identity(0.5)) < 1e-12);
        assert!(matches!(clock_homography(13, 1.0, 0.5), Err(Error::Argument(_))));
        assert!(matches!(clock_homography(0, 1.0, 0.5), Err(Error::Argument(_))));
    }

    #[test]
    fn incomplete_preset_file_is_rejected() {
        let text = "[[preset]]\nhour = 1\nupper_left = [0.0, 0.0]\nupper_right = [0.0, 0.0]\nhorizon_left = [0.0, 0.0]\nhorizon_right = [0.0, 0.0]\n";
        assert!(matches!(ClockPresets::parse(text), Err(Error::Config(_))));
    }
}
