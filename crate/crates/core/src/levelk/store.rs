//! Trained models keyed by the hash of the settings that produced them,
//! cached in memory and optionally mirrored to a directory of artifacts.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::training::{train_level, EncounterTemplate, TrainingError, TrainingPlan};
use super::{PolicySet, TrainedModel};
use crate::config::training_hash;
use crate::engine::SimConfig;
use crate::learning::persistence::{artifact_name, Mode, PersistError, PolicyArtifact};
use crate::learning::LearnParams;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("missing policy artifact {}", .0.display())]
    Missing(PathBuf),
    #[error("{}: {source}", path.display())]
    Persist { path: PathBuf, source: PersistError },
    #[error(transparent)]
    Training(#[from] TrainingError),
}

/// What a store needs to find or train a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelKey {
    pub level: u8,
    pub mode: Mode,
    pub sim: SimConfig,
    pub learning: LearnParams,
    pub seed: u64,
}

impl ModelKey {
    pub fn hash(&self) -> [u8; 32] {
        training_hash(self.seed, self.mode, &self.sim, &self.learning)
    }

    pub fn file_name(&self) -> String {
        artifact_name(self.level, self.mode, &self.hash())
    }

    fn at_level(&self, level: u8) -> Self {
        Self { level, ..*self }
    }
}

/// One model trained by the store.
#[derive(Debug, Clone)]
pub struct TrainingRecord {
    pub level: u8,
    pub mode: Mode,
    pub file_name: String,
    pub converged: bool,
    pub iterations: usize,
    pub curve: Vec<f64>,
    pub elapsed: Duration,
}

#[derive(Debug, Default)]
pub struct PolicyStore {
    dir: Option<PathBuf>,
    train_missing: bool,
    cache: HashMap<(u8, [u8; 32]), Arc<TrainedModel>>,
    /// Models trained so far, in training order.
    pub trained: Vec<TrainingRecord>,
}

impl PolicyStore {
    /// An in-memory store that trains every model it is asked for.
    pub fn in_memory() -> Self {
        Self { dir: None, train_missing: true, ..Default::default() }
    }

    /// A store backed by `dir`; missing artifacts are trained and written
    /// when `train_missing` is set, and reported otherwise.
    pub fn on_disk(dir: impl Into<PathBuf>, train_missing: bool) -> Self {
        Self { dir: Some(dir.into()), train_missing, ..Default::default() }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn model(&mut self, key: &ModelKey) -> Result<Arc<TrainedModel>, StoreError> {
        let hash = key.hash();
        if let Some(m) = self.cache.get(&(key.level, hash)) {
            return Ok(m.clone());
        }
        let path = self.dir.as_ref().map(|d| d.join(key.file_name()));
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            let art = PolicyArtifact::load(p).map_err(|source| StoreError::Persist { path: p.clone(), source })?;
            let m = Arc::new(TrainedModel::from_artifact(art));
            self.cache.insert((key.level, hash), m.clone());
            return Ok(m);
        }
        if !self.train_missing {
            return Err(StoreError::Missing(path.unwrap_or_else(|| PathBuf::from(key.file_name()))));
        }
        let prerequisites = if key.level > 1 {
            let lower = self.model(&key.at_level(key.level - 1))?;
            PolicySet { level1: Some(lower), level2: None }
        } else {
            PolicySet::default()
        };
        self.train(key, &prerequisites)
    }

    /// Trains `key` against the given prerequisites and stores the result,
    /// replacing any cached model.
    pub fn train(&mut self, key: &ModelKey, prerequisites: &PolicySet) -> Result<Arc<TrainedModel>, StoreError> {
        let plan = TrainingPlan {
            target_level: key.level,
            template: EncounterTemplate { mode: key.mode, geometry: Default::default(), approach_deg: None },
            params: key.learning,
            sim: key.sim,
            seed: key.seed,
        };
        let start = Instant::now();
        let out = train_level(&plan, prerequisites)?;
        let elapsed = start.elapsed();
        let hash = key.hash();
        if let Some(dir) = &self.dir {
            let path = dir.join(key.file_name());
            let art = PolicyArtifact {
                level: key.level,
                mode: key.mode,
                seed: key.seed,
                config_hash: hash,
                converged: out.converged,
                data: out.model.clone().into_data(),
            };
            std::fs::create_dir_all(dir)
                .map_err(PersistError::from)
                .and_then(|_| art.save(&path))
                .map_err(|source| StoreError::Persist { path, source })?;
        }
        self.trained.push(TrainingRecord {
            level: key.level,
            mode: key.mode,
            file_name: key.file_name(),
            converged: out.converged,
            iterations: out.iterations,
            curve: out.curve,
            elapsed,
        });
        let m = Arc::new(out.model);
        self.cache.insert((key.level, hash), m.clone());
        Ok(m)
    }

    /// Models for the requested levels; other levels stay empty.
    pub fn policy_set(&mut self, key: &ModelKey, levels: &[u8]) -> Result<PolicySet, StoreError> {
        let mut set = PolicySet::default();
        for &level in levels {
            let m = self.model(&key.at_level(level))?;
            match level {
                1 => set.level1 = Some(m),
                2 => set.level2 = Some(m),
                _ => {}
            }
        }
        Ok(set)
    }
}
