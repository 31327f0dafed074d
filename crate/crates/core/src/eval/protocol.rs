use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::goals::{generate_goals, GoalSettings, GoalSpec};
use super::score::goal_score;
use crate::agent::{Agent, Artifacts};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::explorer::{propose_action, ExplorationMode};
use crate::image::Image;
use crate::sim::{random_layout, ObjectState, PushAction, PushWorld, TableGeometry, WorldState, ACTION_TIMESTEPS};

pub const CONFIG_FILE: &str = "config.txt";

/// Independent random streams derived from one seed.
const LAYOUT_STREAM: u64 = 0;
const EXPLORER_STREAM: u64 = 1;
const GOAL_STREAM: u64 = 2;
const RANDOM_POLICY_STREAM: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Something that acts during extrinsic trials.
pub trait Policy {
    fn name(&self) -> &str;

    fn begin_trial(&mut self);

    /// The next action, or `None` to stay still for the rest of the trial.
    fn act(&mut self, observation: &Image, goal: &Image, remaining_timesteps: u64) -> Result<Option<PushAction>>;

    fn end_action(&mut self, post: &Image) -> Result<()>;
}

impl Policy for Agent {
    fn name(&self) -> &str {
        "baseline"
    }

    fn begin_trial(&mut self) {
        Agent::begin_trial(self);
    }

    fn act(&mut self, observation: &Image, goal: &Image, remaining_timesteps: u64) -> Result<Option<PushAction>> {
        self.step(observation, Some(goal), remaining_timesteps)
    }

    fn end_action(&mut self, post: &Image) -> Result<()> {
        Agent::end_action(self, post)
    }
}

/// Pushes at random until the budget runs out.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
    mode: ExplorationMode,
    geometry: TableGeometry,
}

impl RandomPolicy {
    pub fn new(rng: ChaCha8Rng, mode: ExplorationMode, geometry: TableGeometry) -> Self {
        Self { rng, mode, geometry }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn begin_trial(&mut self) {}

    fn act(&mut self, _: &Image, _: &Image, _: u64) -> Result<Option<PushAction>> {
        Ok(Some(propose_action(&mut self.rng, self.mode, &self.geometry)))
    }

    fn end_action(&mut self, _: &Image) -> Result<()> {
        Ok(())
    }
}

/// Never acts.
#[derive(Clone, Copy, Debug, Default)]
pub struct StayStill;

impl Policy for StayStill {
    fn name(&self) -> &str {
        "still"
    }

    fn begin_trial(&mut self) {}

    fn act(&mut self, _: &Image, _: &Image, _: u64) -> Result<Option<PushAction>> {
        Ok(None)
    }

    fn end_action(&mut self, _: &Image) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Baseline,
    Random,
    StayStill,
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Self::Baseline),
            "random" => Ok(Self::Random),
            "still" | "stay-still" => Ok(Self::StayStill),
            other => Err(Error::config(format!("unknown policy {other:?}"))),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Baseline => "baseline",
            Self::Random => "random",
            Self::StayStill => "still",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportMeta {
    pub config_fingerprint: u64,
    pub seed: u64,
    pub policy: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub goal_id: usize,
    pub score: f64,
    /// Per-object final distance to target, meters.
    pub distances: Vec<f64>,
    pub actions: usize,
    pub timesteps: u64,
}

impl TrialOutcome {
    pub fn mean_distance(&self) -> f64 {
        self.distances.iter().sum::<f64>() / self.distances.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub meta: ReportMeta,
    pub trials: Vec<TrialOutcome>,
    /// Mean of the per-goal scores.
    pub mean: f64,
}

impl ScoreReport {
    /// `goal_id,score,distance_m` rows followed by a `#` summary line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("goal_id,score,distance_m\n");
        for t in &self.trials {
            writeln!(s, "{},{},{}", t.goal_id, t.score, t.mean_distance()).unwrap();
        }
        writeln!(
            s,
            "# mean_score={} goals={} policy={} seed={} config={:016x}",
            self.mean,
            self.trials.len(),
            self.meta.policy,
            self.meta.seed,
            self.meta.config_fingerprint
        )
        .unwrap();
        s
    }
}

fn positions(state: &WorldState) -> Vec<[f64; 3]> {
    state.objects.iter().map(|o| [o.center.x, o.center.y, 0.0]).collect()
}

/// Runs one trial per goal and scores the final object positions.
///
/// Each trial starts from the goal's initial layout with `budget` timesteps.
/// The policy is asked for an action while a whole action still fits in the
/// remaining budget; once it declines, the trial ends as it stands.
pub fn run_extrinsic(
    world: &PushWorld,
    goals: &[GoalSpec],
    policy: &mut dyn Policy,
    budget: u64,
    meta: ReportMeta,
) -> Result<ScoreReport> {
    if goals.is_empty() {
        return Err(Error::config("need at least one goal"));
    }
    let mut trials = Vec::with_capacity(goals.len());
    for (goal_id, goal) in goals.iter().enumerate() {
        policy.begin_trial();
        let mut state = world.reset(&goal.initial_layout)?;
        let mut actions = 0;
        while state.timestep + ACTION_TIMESTEPS <= budget {
            let observation = world.render(&state);
            let Some(action) = policy.act(&observation, &goal.goal_image, budget - state.timestep)? else {
                break;
            };
            state = world.apply_action(&state, &action);
            actions += 1;
            policy.end_action(&world.render(&state))?;
        }
        let finals = positions(&state);
        let score = goal_score(&goal.target_positions, &finals)?;
        let distances = goal
            .target_positions
            .iter()
            .zip(&finals)
            .map(|(t, f)| ((t[0] - f[0]).powi(2) + (t[1] - f[1]).powi(2) + (t[2] - f[2]).powi(2)).sqrt())
            .collect();
        trials.push(TrialOutcome {
            goal_id,
            score,
            distances,
            actions,
            timesteps: state.timestep,
        });
    }
    let mean = trials.iter().map(|t| t.score).sum::<f64>() / trials.len() as f64;
    Ok(ScoreReport { meta, trials, mean })
}

/// Output of the intrinsic phase.
#[derive(Clone, Debug)]
pub struct IntrinsicRun {
    pub artifacts: Artifacts,
    pub initial_layout: Vec<ObjectState>,
    /// Simulator clock at the end of the phase.
    pub timesteps: u64,
}

/// Explores for `config.actions` actions, then learns the encoder and
/// threshold table. Artifacts and the config are written to `out` if given.
pub fn run_intrinsic(config: &RunConfig, out: Option<&Path>) -> Result<IntrinsicRun> {
    config.validate()?;
    let frames = 2 * config.actions as u64;
    if frames < config.bg_burn_in {
        return Err(Error::config(format!(
            "{} actions give {frames} frames, fewer than the background burn-in of {}",
            config.actions, config.bg_burn_in
        )));
    }
    let world = config.world()?;
    let geometry = *world.geometry();
    let initial_layout = random_layout(
        &mut stream(config.seed, LAYOUT_STREAM),
        &geometry,
        config.objects,
        config.object_radius,
    )?;
    let mut state = world.reset(&initial_layout)?;
    let camera = world.camera();
    let mut agent = Agent::explorer(
        (camera.width, camera.height),
        config.background_params(),
        config.mode,
        geometry,
        stream(config.seed, EXPLORER_STREAM),
    )?;
    for _ in 0..config.actions {
        let action = agent
            .step(&world.render(&state), None, u64::MAX)?
            .expect("exploring agents always act");
        state = world.apply_action(&state, &action);
        agent.end_action(&world.render(&state))?;
    }
    let (store, background) = agent.into_experience()?;
    let artifacts = Artifacts::build(store, background, config.latents, config.levels)?;
    if let Some(dir) = out {
        artifacts.save(dir)?;
        fs::write(dir.join(CONFIG_FILE), config_text(config))?;
    }
    Ok(IntrinsicRun {
        artifacts,
        initial_layout,
        timesteps: state.timestep,
    })
}

fn config_text(config: &RunConfig) -> String {
    format!("# config={}\n{}", config.fingerprint_hex(), config.to_text())
}

/// The goals used for every policy evaluated under `config`.
pub fn config_goals(config: &RunConfig, world: &PushWorld) -> Result<Vec<GoalSpec>> {
    let mut rng = stream(config.seed, GOAL_STREAM);
    let base = random_layout(&mut rng, world.geometry(), config.objects, config.object_radius)?;
    let settings = GoalSettings {
        pushes_min: config.goal_pushes_min,
        pushes_max: config.goal_pushes_max,
        mode: config.mode,
        start: config.goal_start,
    };
    generate_goals(&mut rng, config.goals, world, &base, &settings)
}

/// Scores one policy on the goals derived from `config`.
pub fn evaluate(config: &RunConfig, artifacts: &Artifacts, kind: PolicyKind) -> Result<ScoreReport> {
    config.validate()?;
    let world = config.world()?;
    let goals = config_goals(config, &world)?;
    let mut policy: Box<dyn Policy> = match kind {
        PolicyKind::Baseline => Box::new(Agent::solver(artifacts.clone(), config.planner_config())?),
        PolicyKind::Random => Box::new(RandomPolicy::new(
            stream(config.seed, RANDOM_POLICY_STREAM),
            config.mode,
            *world.geometry(),
        )),
        PolicyKind::StayStill => Box::new(StayStill),
    };
    let meta = ReportMeta {
        config_fingerprint: config.fingerprint(),
        seed: config.seed,
        policy: kind.to_string(),
    };
    run_extrinsic(&world, &goals, policy.as_mut(), config.trial_timesteps, meta)
}
