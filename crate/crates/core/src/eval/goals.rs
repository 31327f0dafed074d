use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::explorer::{propose_action, ExplorationMode};
use crate::image::Image;
use crate::sim::{random_layout, ObjectState, PushWorld};

/// Draws attempted per displacing push before giving up on it.
const MAX_PUSH_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct GoalSpec {
    pub goal_image: Image,
    /// Per-object `(x, y, z)` in object-id order; `z` is 0 on the table.
    pub target_positions: Vec<[f64; 3]>,
    pub initial_layout: Vec<ObjectState>,
}

/// Where the objects sit when a trial begins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GoalStart {
    /// A fresh random layout per trial, drawn independently of the goal.
    #[default]
    Random,
    /// The layout the goal was pushed from.
    Base,
}

impl FromStr for GoalStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Self::Random),
            "base" => Ok(Self::Base),
            other => Err(Error::config(format!("unknown goal start {other:?} (expected random or base)"))),
        }
    }
}

impl fmt::Display for GoalStart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::Base => "base",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GoalSettings {
    /// Range of displacing pushes applied to each goal's starting layout.
    pub pushes_min: usize,
    pub pushes_max: usize,
    pub mode: ExplorationMode,
    pub start: GoalStart,
}

impl Default for GoalSettings {
    fn default() -> Self {
        Self {
            pushes_min: 1,
            pushes_max: 5,
            mode: ExplorationMode::Round1,
            start: GoalStart::Random,
        }
    }
}

/// Generates `count` goals by forward simulation.
///
/// Each goal draws a fresh random layout of the objects in `base_layout`
/// (count and radius) and applies a random number of explorer pushes to it,
/// counting only pushes that move at least one object, so the target is
/// always physically reachable on the table plane. The trial's initial
/// layout follows `settings.start`.
pub fn generate_goals<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    world: &PushWorld,
    base_layout: &[ObjectState],
    settings: &GoalSettings,
) -> Result<Vec<GoalSpec>> {
    if count == 0 {
        return Err(Error::config("need at least one goal"));
    }
    if base_layout.is_empty() {
        return Err(Error::config("base layout has no objects"));
    }
    if settings.pushes_min > settings.pushes_max {
        return Err(Error::config("goal push range is empty"));
    }
    let geometry = world.geometry();
    let radius = base_layout[0].radius;
    (0..count)
        .map(|_| {
            let base = world.reset(&random_layout(rng, geometry, base_layout.len(), radius)?)?;
            let mut state = base.clone();
            let pushes = rng.gen_range(settings.pushes_min..=settings.pushes_max);
            for _ in 0..pushes {
                for _ in 0..MAX_PUSH_ATTEMPTS {
                    let action = propose_action(rng, settings.mode, geometry);
                    let next = world.apply_action(&state, &action);
                    if next.objects != state.objects {
                        state = next;
                        break;
                    }
                }
            }
            let initial_layout = match settings.start {
                GoalStart::Base => base.objects.clone(),
                GoalStart::Random => random_layout(rng, geometry, base_layout.len(), radius)?,
            };
            Ok(GoalSpec {
                goal_image: world.render(&state),
                target_positions: state.objects.iter().map(|o| [o.center.x, o.center.y, 0.0]).collect(),
                initial_layout,
            })
        })
        .collect()
}
