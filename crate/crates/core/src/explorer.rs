//! Random intrinsic-phase actions.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::sim::{Point, PushAction, TableGeometry, MAX_WAYPOINTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExplorationMode {
    /// One straight push between two points.
    Round1,
    /// A polyline of 1 to 10 segments.
    Round2,
}

impl FromStr for ExplorationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "round1" | "1" => Ok(Self::Round1),
            "round2" | "2" => Ok(Self::Round2),
            other => Err(Error::config(format!("unknown mode {other:?} (expected round1 or round2)"))),
        }
    }
}

impl fmt::Display for ExplorationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Round1 => "round1",
            Self::Round2 => "round2",
        })
    }
}

/// Draws an action with waypoints uniform over the reachable table area.
pub fn propose_action<R: Rng + ?Sized>(rng: &mut R, mode: ExplorationMode, geometry: &TableGeometry) -> PushAction {
    let segments = match mode {
        ExplorationMode::Round1 => 1,
        ExplorationMode::Round2 => rng.gen_range(1..MAX_WAYPOINTS),
    };
    let region = geometry.reachable();
    let waypoints = (0..=segments)
        .map(|_| loop {
            let p = Point::new(
                rng.gen_range(region.min.x..region.max.x),
                rng.gen_range(region.min.y..region.max.y),
            );
            // waypoints are stored at f32 precision; rounding must not leave the region
            if region.contains(Point::new(p.x as f32 as f64, p.y as f32 as f64)) {
                break p;
            }
        })
        .collect();
    PushAction::new(waypoints).expect("sampled waypoint count is always valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round1_is_two_points_and_reproducible() {
        let g = TableGeometry::default();
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let x = propose_action(&mut a, ExplorationMode::Round1, &g);
            assert_eq!(x.waypoints().len(), 2);
            assert!(x.within(&g));
            assert_eq!(x, propose_action(&mut b, ExplorationMode::Round1, &g));
        }
    }

    #[test]
    fn waypoints_avoid_shelf() {
        let g = TableGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for mode in [ExplorationMode::Round1, ExplorationMode::Round2] {
            for _ in 0..10_000 {
                let a = propose_action(&mut rng, mode, &g);
                assert!(a.waypoints().iter().all(|p| g.reachable().contains(*p)));
            }
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("round2".parse::<ExplorationMode>().unwrap(), ExplorationMode::Round2);
        assert_eq!(ExplorationMode::Round1.to_string(), "round1");
        assert!("round3".parse::<ExplorationMode>().is_err());
    }
}
