//! The agent state machine.
//!
//! Every cycle starts in `ActionStart`. Without a goal the agent explores
//! (`ProposeAction`), with one it plans (`PlanAction`); either way a chosen
//! action moves it to `DoAction`. Once the caller has executed the action and
//! hands back the resulting frame, `EndAction` files the experience and the
//! cycle restarts. A failed or empty plan parks the agent in `WaitForGoal`
//! until the next trial.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::abstraction::ThresholdTable;
use crate::error::{Error, Result};
use crate::explorer::{propose_action, ExplorationMode};
use crate::image::Image;
use crate::memory::TripletStore;
use crate::perception::{BackgroundModel, BackgroundParams, Latent, LatentEncoder, LinearEncoder};
use crate::planner::{compute_max_depth, Plan, Planner, PlannerConfig};
use crate::sim::{PushAction, TableGeometry};

pub const STORE_FILE: &str = "store.oelt";
pub const ENCODER_FILE: &str = "encoder.oele";
pub const BACKGROUND_FILE: &str = "background.oelb";
pub const THRESHOLDS_FILE: &str = "thresholds.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    ActionStart,
    ProposeAction,
    PlanAction,
    DoAction,
    EndAction,
    WaitForGoal,
}

#[derive(Clone, Debug)]
pub struct AgentState {
    pub stage: Stage,
    pub pending_plan: Option<Plan>,
    pub pre_snapshot: Option<Image>,
    pub chosen: Option<PushAction>,
}

impl AgentState {
    fn start() -> Self {
        Self {
            stage: Stage::ActionStart,
            pending_plan: None,
            pre_snapshot: None,
            chosen: None,
        }
    }
}

/// Everything the extrinsic phase needs from the intrinsic one.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub store: Arc<TripletStore>,
    pub background: BackgroundModel,
    pub encoder: LinearEncoder,
    pub table: Arc<ThresholdTable>,
}

impl Artifacts {
    /// Fits the encoder on every foreground image in the store, caches the
    /// latents and builds the threshold table.
    pub fn build(mut store: TripletStore, background: BackgroundModel, latents: usize, levels: usize) -> Result<Self> {
        if store.is_empty() {
            return Err(Error::config("no experience to learn from"));
        }
        let mut images = Vec::with_capacity(2 * store.len());
        for t in store.triplets() {
            images.push(background.foreground(&t.pre_image)?);
            images.push(background.foreground(&t.post_image)?);
        }
        let encoder = LinearEncoder::fit(&images, latents)?;
        drop(images);
        store.encode_all(&background, &encoder)?;
        let table = ThresholdTable::build(&store, levels)?;
        Ok(Self {
            store: Arc::new(store),
            background,
            encoder,
            table: Arc::new(table),
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.store.save(&dir.join(STORE_FILE))?;
        self.encoder.save(&dir.join(ENCODER_FILE))?;
        self.background.save(&dir.join(BACKGROUND_FILE))?;
        fs::write(dir.join(THRESHOLDS_FILE), self.table.to_csv())?;
        Ok(())
    }

    /// Loads the binary artifacts and rebuilds the threshold table.
    pub fn load(dir: &Path, levels: usize) -> Result<Self> {
        let store = TripletStore::load(&dir.join(STORE_FILE))?;
        let encoder = LinearEncoder::load(&dir.join(ENCODER_FILE))?;
        let background = BackgroundModel::load(&dir.join(BACKGROUND_FILE))?;
        if store.encoder_fingerprint() != Some(encoder.fingerprint()) {
            return Err(Error::Malformed(
                "store latents were not produced by this encoder".into(),
            ));
        }
        let table = ThresholdTable::build(&store, levels)?;
        Ok(Self {
            store: Arc::new(store),
            background,
            encoder,
            table: Arc::new(table),
        })
    }

    /// Foreground-filters and encodes a frame.
    pub fn perceive(&self, image: &Image) -> Result<Latent> {
        self.encoder.encode(&self.background.foreground(image)?)
    }
}

struct Explorer {
    store: TripletStore,
    background: BackgroundModel,
    rng: ChaCha8Rng,
    mode: ExplorationMode,
    geometry: TableGeometry,
}

struct Solver {
    artifacts: Artifacts,
    planner: Planner,
}

enum Phase {
    Intrinsic(Box<Explorer>),
    Extrinsic(Box<Solver>),
}

pub struct Agent {
    state: AgentState,
    phase: Phase,
}

impl Agent {
    /// A fresh agent for the intrinsic phase.
    pub fn explorer(
        image_size: (usize, usize),
        background: BackgroundParams,
        mode: ExplorationMode,
        geometry: TableGeometry,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let (w, h) = image_size;
        Ok(Self {
            state: AgentState::start(),
            phase: Phase::Intrinsic(Box::new(Explorer {
                store: TripletStore::new(w, h),
                background: BackgroundModel::new(w, h, background)?,
                rng,
                mode,
                geometry,
            })),
        })
    }

    /// Convenience constructor seeding the explorer from an integer.
    pub fn explorer_seeded(
        image_size: (usize, usize),
        background: BackgroundParams,
        mode: ExplorationMode,
        geometry: TableGeometry,
        seed: u64,
    ) -> Result<Self> {
        Self::explorer(image_size, background, mode, geometry, ChaCha8Rng::seed_from_u64(seed))
    }

    /// An agent that plans towards goals with learned artifacts.
    pub fn solver(artifacts: Artifacts, config: PlannerConfig) -> Result<Self> {
        let planner = Planner::new(artifacts.store.clone(), artifacts.table.clone(), config)?;
        Ok(Self {
            state: AgentState::start(),
            phase: Phase::Extrinsic(Box::new(Solver { artifacts, planner })),
        })
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn stage(&self) -> Stage {
        self.state.stage
    }

    /// Experience gathered so far; `None` once the agent is planning.
    pub fn store(&self) -> Option<&TripletStore> {
        match &self.phase {
            Phase::Intrinsic(e) => Some(&e.store),
            Phase::Extrinsic(_) => None,
        }
    }

    pub fn artifacts(&self) -> Option<&Artifacts> {
        match &self.phase {
            Phase::Intrinsic(_) => None,
            Phase::Extrinsic(s) => Some(&s.artifacts),
        }
    }

    /// Ends the intrinsic phase, handing back the experience and background model.
    pub fn into_experience(self) -> Result<(TripletStore, BackgroundModel)> {
        if self.state.stage == Stage::DoAction {
            return Err(Error::Phase("an action is still in flight".into()));
        }
        match self.phase {
            Phase::Intrinsic(e) => Ok((e.store, e.background)),
            Phase::Extrinsic(_) => Err(Error::Phase("agent is not exploring".into())),
        }
    }

    /// Starts a new trial: the agent forgets any plan and stops waiting.
    pub fn begin_trial(&mut self) {
        self.state = AgentState::start();
    }

    /// Runs the machine from `ActionStart` to the next action, if any.
    ///
    /// Intrinsic steps take no goal; extrinsic steps require one.
    pub fn step(&mut self, observation: &Image, goal: Option<&Image>, remaining_timesteps: u64) -> Result<Option<PushAction>> {
        match self.state.stage {
            Stage::WaitForGoal => return Ok(None),
            Stage::DoAction => return Err(Error::Phase("previous action has not been completed".into())),
            _ => {}
        }
        self.state.stage = Stage::ActionStart;
        match (&mut self.phase, goal) {
            (Phase::Intrinsic(explorer), None) => {
                self.state.stage = Stage::ProposeAction;
                explorer.background.update(observation)?;
                let action = propose_action(&mut explorer.rng, explorer.mode, &explorer.geometry);
                self.state.pre_snapshot = Some(observation.clone());
                self.state.chosen = Some(action.clone());
                self.state.stage = Stage::DoAction;
                Ok(Some(action))
            }
            (Phase::Extrinsic(solver), Some(goal)) => {
                self.state.stage = Stage::PlanAction;
                let current = solver.artifacts.perceive(observation)?;
                let target = solver.artifacts.perceive(goal)?;
                let plan = solver
                    .planner
                    .plan(&current, &target, compute_max_depth(remaining_timesteps))?;
                match plan {
                    Some(plan) if !plan.is_empty() => {
                        let action = plan.actions[0].clone();
                        self.state.pending_plan = Some(plan);
                        self.state.pre_snapshot = Some(observation.clone());
                        self.state.chosen = Some(action.clone());
                        self.state.stage = Stage::DoAction;
                        Ok(Some(action))
                    }
                    other => {
                        self.state.pending_plan = other;
                        self.state.chosen = None;
                        self.state.stage = Stage::WaitForGoal;
                        Ok(None)
                    }
                }
            }
            (Phase::Intrinsic(_), Some(_)) => Err(Error::Phase("goal given during the intrinsic phase".into())),
            (Phase::Extrinsic(_), None) => Err(Error::Phase("no goal given during the extrinsic phase".into())),
        }
    }

    /// Completes the action returned by the last `step` with the frame that
    /// followed it. Intrinsic agents record the triplet.
    pub fn end_action(&mut self, post: &Image) -> Result<()> {
        if self.state.stage != Stage::DoAction {
            return Err(Error::Phase("no action in flight".into()));
        }
        self.state.stage = Stage::EndAction;
        let pre = self.state.pre_snapshot.take().expect("DoAction keeps the pre frame");
        let action = self.state.chosen.take().expect("DoAction keeps the action");
        if let Phase::Intrinsic(explorer) = &mut self.phase {
            explorer.background.update(post)?;
            explorer.store.record(pre, action, post.clone())?;
        }
        self.state.stage = Stage::ActionStart;
        Ok(())
    }
}
