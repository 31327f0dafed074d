//! Run configuration in a plain `key = value` text format.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::GoalStart;
use crate::explorer::ExplorationMode;
use crate::perception::BackgroundParams;
use crate::planner::PlannerConfig;
use crate::sim::{Camera, ObjectState, PushWorld, TableGeometry};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Intrinsic-phase action count.
    pub actions: usize,
    pub mode: ExplorationMode,
    pub objects: usize,
    pub latents: usize,
    pub levels: usize,
    pub level_stride: usize,
    pub goals: usize,
    pub goal_pushes_min: usize,
    pub goal_pushes_max: usize,
    pub goal_start: GoalStart,
    pub trial_timesteps: u64,
    pub table_width: f64,
    pub table_depth: f64,
    pub shelf_depth: f64,
    pub effector_radius: f64,
    pub object_radius: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub bg_alpha: f64,
    pub bg_k: f64,
    pub bg_variance_floor: f64,
    pub bg_burn_in: u64,
    pub curve_grid: Vec<usize>,
    pub curve_seeds: usize,
    pub diag_samples: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = TableGeometry::default();
        let cam = Camera::default();
        let bg = BackgroundParams::default();
        Self {
            seed: 1,
            actions: 5000,
            mode: ExplorationMode::Round1,
            objects: 1,
            latents: 7,
            levels: 200,
            level_stride: 1,
            goals: 50,
            goal_pushes_min: 1,
            goal_pushes_max: 5,
            goal_start: GoalStart::Random,
            trial_timesteps: 10_000,
            table_width: g.width,
            table_depth: g.depth,
            shelf_depth: g.shelf_depth,
            effector_radius: g.effector_radius,
            object_radius: ObjectState::DEFAULT_RADIUS,
            image_width: cam.width,
            image_height: cam.height,
            bg_alpha: bg.alpha,
            bg_k: bg.k,
            bg_variance_floor: bg.variance_floor,
            bg_burn_in: bg.burn_in,
            curve_grid: vec![200, 1000, 5000],
            curve_seeds: 5,
            diag_samples: 100,
            out: PathBuf::from("runs"),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    /// Reads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "actions" => self.actions = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "objects" => self.objects = parse(key, value)?,
            "latents" => self.latents = parse(key, value)?,
            "levels" => self.levels = parse(key, value)?,
            "level_stride" => self.level_stride = parse(key, value)?,
            "goals" => self.goals = parse(key, value)?,
            "goal_pushes_min" => self.goal_pushes_min = parse(key, value)?,
            "goal_pushes_max" => self.goal_pushes_max = parse(key, value)?,
            "goal_start" => self.goal_start = value.parse()?,
            "trial_timesteps" => self.trial_timesteps = parse(key, value)?,
            "table_width" => self.table_width = parse(key, value)?,
            "table_depth" => self.table_depth = parse(key, value)?,
            "shelf_depth" => self.shelf_depth = parse(key, value)?,
            "effector_radius" => self.effector_radius = parse(key, value)?,
            "object_radius" => self.object_radius = parse(key, value)?,
            "image_width" => self.image_width = parse(key, value)?,
            "image_height" => self.image_height = parse(key, value)?,
            "bg_alpha" => self.bg_alpha = parse(key, value)?,
            "bg_k" => self.bg_k = parse(key, value)?,
            "bg_variance_floor" => self.bg_variance_floor = parse(key, value)?,
            "bg_burn_in" => self.bg_burn_in = parse(key, value)?,
            "curve_grid" => {
                self.curve_grid = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "curve_seeds" => self.curve_seeds = parse(key, value)?,
            "diag_samples" => self.diag_samples = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.actions == 0 {
            return Err(Error::config("intrinsic action count must be positive"));
        }
        if !(1..=3).contains(&self.objects) {
            return Err(Error::config(format!("object count must be 1..=3, got {}", self.objects)));
        }
        let counts = [
            ("latents", self.latents),
            ("goals", self.goals),
            ("level_stride", self.level_stride),
            ("image_width", self.image_width),
            ("image_height", self.image_height),
            ("curve_seeds", self.curve_seeds),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.levels < 2 {
            return Err(Error::config("levels must be at least 2"));
        }
        if self.goal_pushes_min > self.goal_pushes_max {
            return Err(Error::config("goal_pushes_min exceeds goal_pushes_max"));
        }
        if self.trial_timesteps == 0 {
            return Err(Error::config("trial_timesteps must be positive"));
        }
        if !(self.object_radius > 0.0) {
            return Err(Error::config("object radius must be positive"));
        }
        if self.curve_grid.iter().any(|&n| n == 0) || self.curve_grid.is_empty() {
            return Err(Error::config("curve grid needs positive action counts"));
        }
        self.geometry().validate()?;
        self.background_params().validate()?;
        Ok(())
    }

    pub fn geometry(&self) -> TableGeometry {
        TableGeometry {
            width: self.table_width,
            depth: self.table_depth,
            shelf_depth: self.shelf_depth,
            effector_radius: self.effector_radius,
        }
    }

    pub fn camera(&self) -> Camera {
        Camera {
            width: self.image_width,
            height: self.image_height,
        }
    }

    pub fn world(&self) -> Result<PushWorld> {
        PushWorld::new(self.geometry(), self.camera())
    }

    pub fn background_params(&self) -> BackgroundParams {
        BackgroundParams {
            alpha: self.bg_alpha,
            k: self.bg_k,
            variance_floor: self.bg_variance_floor,
            burn_in: self.bg_burn_in,
        }
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            level_stride: self.level_stride,
            ..PlannerConfig::default()
        }
    }

    /// Canonical text form, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("seed = {}\n", self.seed);
        s.push_str(&self.experiment_text());
        writeln!(s, "out = {}", self.out.display()).unwrap();
        s
    }

    /// Every setting that can change an experiment's outcome, except the seed.
    fn experiment_entries(&self) -> Vec<(&'static str, String)> {
        let grid: Vec<String> = self.curve_grid.iter().map(|n| n.to_string()).collect();
        vec![
            ("actions", self.actions.to_string()),
            ("mode", self.mode.to_string()),
            ("objects", self.objects.to_string()),
            ("latents", self.latents.to_string()),
            ("levels", self.levels.to_string()),
            ("level_stride", self.level_stride.to_string()),
            ("goals", self.goals.to_string()),
            ("goal_pushes_min", self.goal_pushes_min.to_string()),
            ("goal_pushes_max", self.goal_pushes_max.to_string()),
            ("goal_start", self.goal_start.to_string()),
            ("trial_timesteps", self.trial_timesteps.to_string()),
            ("table_width", self.table_width.to_string()),
            ("table_depth", self.table_depth.to_string()),
            ("shelf_depth", self.shelf_depth.to_string()),
            ("effector_radius", self.effector_radius.to_string()),
            ("object_radius", self.object_radius.to_string()),
            ("image_width", self.image_width.to_string()),
            ("image_height", self.image_height.to_string()),
            ("bg_alpha", self.bg_alpha.to_string()),
            ("bg_k", self.bg_k.to_string()),
            ("bg_variance_floor", self.bg_variance_floor.to_string()),
            ("bg_burn_in", self.bg_burn_in.to_string()),
            ("curve_grid", grid.join(",")),
            ("curve_seeds", self.curve_seeds.to_string()),
            ("diag_samples", self.diag_samples.to_string()),
        ]
    }

    fn experiment_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.experiment_entries() {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }

    /// Hash of the experiment settings; seed and output directory excluded.
    pub fn fingerprint(&self) -> u64 {
        let digest = Sha256::digest(self.experiment_text().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    pub fn fingerprint_hex(&self) -> String {
        format!("{:016x}", self.fingerprint())
    }
}
