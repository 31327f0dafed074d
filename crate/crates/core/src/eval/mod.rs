//! Goals, scoring, and the two-phase protocol.

mod goals;
mod protocol;
mod score;

pub use goals::{generate_goals, GoalSettings, GoalSpec, GoalStart};
pub use protocol::{
    config_goals, evaluate, run_extrinsic, run_intrinsic, IntrinsicRun, Policy, PolicyKind, RandomPolicy, ReportMeta, ScoreReport,
    StayStill, TrialOutcome, CONFIG_FILE,
};
pub use score::{goal_score, SCORE_DECAY};
