use std::fmt;

use crate::error::{ensure, Result};

/// Training schedule and batch settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPlan {
    pub lr_stage1: f64,
    pub lr_stage2: f64,
    pub lr_finetune: f64,
    /// Epochs run after batch norm is folded into the convolutions.
    pub finetune_epochs: usize,
    /// Consecutive flat epochs that count as a plateau.
    pub plateau_epochs: usize,
    /// Relative loss improvement below which a stage-1 epoch is flat.
    pub stage1_threshold: f64,
    /// Relative loss improvement below which a stage-2 epoch is flat.
    pub merge_threshold: f64,
    pub batch_size: usize,
    pub patches_per_epoch: usize,
    /// Noise levels are drawn uniformly from this range, in 0..255 units.
    pub sigma_range: (f64, f64),
    /// Cap on stage-1 epochs; reaching it moves training to stage 2.
    pub max_stage1_epochs: usize,
    /// Cap on epochs before the merge, whatever the plateau detector says.
    pub max_epochs: usize,
}

impl Default for TrainPlan {
    fn default() -> Self {
        Self {
            lr_stage1: 1e-3,
            lr_stage2: 1e-4,
            lr_finetune: 1e-6,
            finetune_epochs: 50,
            plateau_epochs: 5,
            stage1_threshold: 1e-3,
            merge_threshold: 1e-4,
            batch_size: 128,
            patches_per_epoch: 128 * 8000,
            sigma_range: (0.0, 75.0),
            max_stage1_epochs: 60,
            max_epochs: 80,
        }
    }
}

impl TrainPlan {
    pub fn steps_per_epoch(&self) -> usize {
        self.patches_per_epoch.div_ceil(self.batch_size)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, lr) in [
            ("stage-1", self.lr_stage1),
            ("stage-2", self.lr_stage2),
            ("fine-tune", self.lr_finetune),
        ] {
            ensure!(lr.is_finite() && lr > 0.0, "{name} learning rate must be positive, got {lr}");
        }
        ensure!(self.batch_size >= 2, "batch size must be at least 2 for batch norm");
        ensure!(self.patches_per_epoch >= 1, "an epoch needs at least one patch");
        ensure!(self.max_epochs >= 1, "max_epochs must be at least 1");
        ensure!(self.plateau_epochs >= 1, "plateau_epochs must be at least 1");
        let (lo, hi) = self.sigma_range;
        ensure!(
            lo >= 0.0 && lo <= hi && hi.is_finite(),
            "noise range [{lo}, {hi}] is invalid"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Stage1,
    Stage2,
    Finetune,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Stage1 => "stage1",
            Phase::Stage2 => "stage2",
            Phase::Finetune => "finetune",
        })
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch counter across all phases.
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    pub phase: Phase,
}

impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch {} loss {:.6e} lr {:e} phase {}",
            self.epoch, self.loss, self.lr, self.phase
        )
    }
}
