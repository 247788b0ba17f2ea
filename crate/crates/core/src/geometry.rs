//! Channel domains bounded by two wall profiles between the flat sections
//! `x = 0` and `x = 1`, both spanning `y in (-1, 1)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Number of abscissae sampled when validating a wall profile.
const VALIDATION_SAMPLES: usize = 2048;

/// Tolerance on the section end points `y = -1` and `y = +1`.
const SECTION_TOL: f64 = 1e-12;

/// Shape of the wall pair.
#[derive(Debug, Clone, PartialEq)]
pub enum WallProfile {
    /// Flat walls `y = -1` and `y = +1`.
    Straight,
    /// Symmetric constriction `y_t(x) = 1 - a (1 - cos(2 pi k x))`, `y_b = -y_t`.
    ///
    /// The walls are smooth across the periodic sections and the throat
    /// half-width is `1 - 2a`, so `amplitude < 0.5` is required.
    Cosine { amplitude: f64, periods: u32 },
    /// Piecewise-linear walls through `(x, y_bottom, y_top)` samples.
    Tabulated(Vec<[f64; 3]>),
}

/// The channel domain: unit length in `x`, flat matching sections at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGeometry {
    profile: WallProfile,
}

impl ChannelGeometry {
    pub const LENGTH: f64 = 1.0;

    pub fn straight() -> Self {
        Self {
            profile: WallProfile::Straight,
        }
    }

    pub fn cosine(amplitude: f64, periods: u32) -> Result<Self> {
        Self::new(WallProfile::Cosine { amplitude, periods })
    }

    pub fn tabulated(samples: Vec<[f64; 3]>) -> Result<Self> {
        Self::new(WallProfile::Tabulated(samples))
    }

    /// Validates the profile and wraps it.
    pub fn new(profile: WallProfile) -> Result<Self> {
        match &profile {
            WallProfile::Straight => {}
            WallProfile::Cosine { amplitude, periods } => {
                if !amplitude.is_finite() {
                    return Err(Error::Geometry("cosine amplitude must be finite".into()));
                }
                if *periods == 0 && *amplitude != 0.0 {
                    return Err(Error::Geometry(
                        "cosine profile needs at least one period".into(),
                    ));
                }
            }
            WallProfile::Tabulated(samples) => {
                if samples.len() < 2 {
                    return Err(Error::Geometry(
                        "tabulated profile needs at least two samples".into(),
                    ));
                }
                if samples.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::Geometry("tabulated profile has non-finite values".into()));
                }
                let first = samples[0][0];
                let last = samples[samples.len() - 1][0];
                if first != 0.0 || last != Self::LENGTH {
                    return Err(Error::Geometry(format!(
                        "tabulated abscissae must span [0, 1], got [{first}, {last}]"
                    )));
                }
                if samples.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::Geometry(
                        "tabulated abscissae must be strictly increasing".into(),
                    ));
                }
            }
        }
        let geom = Self { profile };
        geom.check_sections()?;
        geom.check_width(VALIDATION_SAMPLES)?;
        Ok(geom)
    }

    pub fn profile(&self) -> &WallProfile {
        &self.profile
    }

    pub fn is_straight(&self) -> bool {
        match &self.profile {
            WallProfile::Straight => true,
            WallProfile::Cosine { amplitude, .. } => *amplitude == 0.0,
            WallProfile::Tabulated(s) => s.iter().all(|p| p[1] == -1.0 && p[2] == 1.0),
        }
    }

    /// True when the walls are mirror images under `y -> -y`.
    pub fn is_mirror_symmetric(&self) -> bool {
        match &self.profile {
            WallProfile::Straight | WallProfile::Cosine { .. } => true,
            WallProfile::Tabulated(s) => s.iter().all(|p| p[1] == -p[2]),
        }
    }

    pub fn bottom(&self, x: f64) -> f64 {
        match &self.profile {
            WallProfile::Straight => -1.0,
            WallProfile::Cosine { .. } => -self.top(x),
            WallProfile::Tabulated(s) => interpolate(s, x, 1),
        }
    }

    pub fn top(&self, x: f64) -> f64 {
        match &self.profile {
            WallProfile::Straight => 1.0,
            WallProfile::Cosine { amplitude, periods } => {
                1.0 - amplitude * (1.0 - (2.0 * PI * f64::from(*periods) * x).cos())
            }
            WallProfile::Tabulated(s) => interpolate(s, x, 2),
        }
    }

    pub fn width(&self, x: f64) -> f64 {
        self.top(x) - self.bottom(x)
    }

    /// Checks `y_b < y_t` on `n + 1` equispaced abscissae plus every
    /// tabulated knot, reporting the first violation.
    pub fn check_width(&self, n: usize) -> Result<()> {
        let n = n.max(1);
        let knots = match &self.profile {
            WallProfile::Tabulated(s) => s.iter().map(|p| p[0]).collect(),
            _ => Vec::new(),
        };
        let mut xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).chain(knots).collect();
        xs.sort_by(f64::total_cmp);
        for x in xs {
            let (bottom, top) = (self.bottom(x), self.top(x));
            if bottom >= top || !(top - bottom).is_finite() {
                return Err(Error::DegenerateChannel { x, bottom, top });
            }
        }
        Ok(())
    }

    fn check_sections(&self) -> Result<()> {
        for x in [0.0, Self::LENGTH] {
            let (b, t) = (self.bottom(x), self.top(x));
            if (b + 1.0).abs() > SECTION_TOL || (t - 1.0).abs() > SECTION_TOL {
                return Err(Error::Geometry(format!(
                    "section at x = {x} must span (-1, 1), got ({b}, {t})"
                )));
            }
        }
        Ok(())
    }
}

fn interpolate(samples: &[[f64; 3]], x: f64, column: usize) -> f64 {
    let x = x.clamp(0.0, ChannelGeometry::LENGTH);
    let k = samples.partition_point(|p| p[0] <= x);
    if k == 0 {
        return samples[0][column];
    }
    if k == samples.len() {
        return samples[k - 1][column];
    }
    let (a, b) = (samples[k - 1], samples[k]);
    let t = (x - a[0]) / (b[0] - a[0]);
    a[column] + t * (b[column] - a[column])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_channel_has_unit_sections() {
        let g = ChannelGeometry::straight();
        assert_eq!(g.bottom(0.3), -1.0);
        assert_eq!(g.top(0.7), 1.0);
        assert!(g.is_straight());
        assert!(g.is_mirror_symmetric());
    }

    #[test]
    fn cosine_walls_meet_sections_exactly() {
        let g = ChannelGeometry::cosine(0.2, 1).unwrap();
        assert!((g.top(0.0) - 1.0).abs() < 1e-15);
        assert!((g.top(1.0) - 1.0).abs() < 1e-12);
        assert!((g.top(0.5) - 0.6).abs() < 1e-15);
        assert_eq!(g.bottom(0.25), -g.top(0.25));
    }

    #[test]
    fn degenerate_cosine_is_rejected_with_location() {
        match ChannelGeometry::cosine(0.5, 1) {
            Err(Error::DegenerateChannel { x, .. }) => assert!((x - 0.5).abs() < 1e-12),
            other => panic!("expected degenerate channel, got {other:?}"),
        }
        assert!(ChannelGeometry::cosine(0.45, 1).is_ok());
    }

    #[test]
    fn tabulated_profile_interpolates_linearly() {
        let g = ChannelGeometry::tabulated(vec![
            [0.0, -1.0, 1.0],
            [0.5, -0.5, 0.8],
            [1.0, -1.0, 1.0],
        ])
        .unwrap();
        assert!((g.bottom(0.25) + 0.75).abs() < 1e-15);
        assert!((g.top(0.75) - 0.9).abs() < 1e-15);
        assert!(!g.is_mirror_symmetric());
    }

    #[test]
    fn tabulated_profile_must_match_sections() {
        let err = ChannelGeometry::tabulated(vec![[0.0, -1.0, 1.0], [1.0, -0.9, 1.0]]);
        assert!(matches!(err, Err(Error::Geometry(_))));
        let crossing = ChannelGeometry::tabulated(vec![
            [0.0, -1.0, 1.0],
            [0.4, 0.5, 0.2],
            [1.0, -1.0, 1.0],
        ]);
        match crossing {
            Err(Error::DegenerateChannel { x, .. }) => assert!(x > 0.0 && x <= 0.4),
            other => panic!("expected degenerate channel, got {other:?}"),
        }
    }
}
