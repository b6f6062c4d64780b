use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::DatasetManifest;
use crate::error::{ensure, Result};
use crate::init::default_init;
use crate::model::{backward, merge_batchnorm, ModelConfig, ParameterSet};
use crate::optim::adam::{adam_step, AdamState};
use crate::optim::plan::{EpochRecord, Phase, TrainPlan};
use crate::optim::sampler::{sample_batch, SampleOptions};
use crate::tensor::Tensor4;

/// Trained parameters (batch norm already folded) and the per-epoch log.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterSet,
    pub log: Vec<EpochRecord>,
}

/// Counts consecutive epochs whose relative improvement falls below a threshold.
#[derive(Debug, Clone)]
struct PlateauDetector {
    threshold: f64,
    patience: usize,
    flat: usize,
    previous: Option<f64>,
}

impl PlateauDetector {
    fn new(threshold: f64, patience: usize) -> Self {
        Self {
            threshold,
            patience,
            flat: 0,
            previous: None,
        }
    }

    fn observe(&mut self, loss: f64) -> bool {
        if let Some(prev) = self.previous {
            let improvement = (prev - loss) / prev.abs().max(f64::MIN_POSITIVE);
            if improvement < self.threshold {
                self.flat += 1;
            } else {
                self.flat = 0;
            }
        }
        self.previous = Some(loss);
        self.flat >= self.patience
    }
}

/// Loads the manifest's images and trains a network from `seed`.
pub fn train(
    plan: &TrainPlan,
    manifest: &DatasetManifest,
    config: &ModelConfig,
    seed: u64,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    manifest.validate()?;
    let images = manifest.load_images()?;
    let opts = SampleOptions::new(plan, manifest.patch_size, manifest.augment, manifest.clipped);
    train_on_images(plan, &images, &opts, config, seed, on_epoch)
}

/// Trains on in-memory images. The result depends only on the arguments.
pub fn train_on_images(
    plan: &TrainPlan,
    images: &[Tensor4],
    opts: &SampleOptions,
    config: &ModelConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    plan.validate()?;
    config.validate()?;
    ensure!(
        opts.patch_size % config.downsample_factor == 0,
        "patch size {} is not a multiple of the downsampling factor {}",
        opts.patch_size,
        config.downsample_factor
    );
    if let Some(img) = images.first() {
        ensure!(
            img.shape().channels == config.in_channels,
            "training images have {} channels but the model expects {}",
            img.shape().channels,
            config.in_channels
        );
    }
    let opts = SampleOptions {
        batch_size: plan.batch_size,
        sigma_range: plan.sigma_range,
        ..*opts
    };

    let mut params = default_init(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);

    let mut log = Vec::new();
    let mut epoch = 0;
    let mut run_epoch = |params: &mut ParameterSet,
                         adam: &mut AdamState,
                         phase: Phase,
                         log: &mut Vec<EpochRecord>|
     -> Result<f64> {
        let steps = plan.steps_per_epoch();
        let mut total = 0.0;
        for _ in 0..steps {
            let batch = sample_batch(images, &opts, &mut rng)?;
            let out = backward(params, &batch.noisy, &batch.maps, &batch.clean)?;
            adam_step(params, &out.grads, adam)?;
            for (layer, stats) in params.layers.iter_mut().zip(&out.bn_stats) {
                if let (Some(bn), Some(stats)) = (&mut layer.bn, stats) {
                    bn.update_running(stats);
                }
            }
            total += out.loss;
        }
        let loss = total / steps as f64;
        epoch += 1;
        let record = EpochRecord {
            epoch,
            loss,
            lr: adam.lr,
            phase,
        };
        log::info!("{record}");
        on_epoch(&record);
        log.push(record);
        Ok(loss)
    };

    let mut adam = AdamState::for_params(&params, plan.lr_stage1);
    let mut phase = Phase::Stage1;
    let mut stage1 = PlateauDetector::new(plan.stage1_threshold, plan.plateau_epochs);
    let mut stage2 = PlateauDetector::new(plan.merge_threshold, plan.plateau_epochs);
    for n in 1..=plan.max_epochs {
        let loss = run_epoch(&mut params, &mut adam, phase, &mut log)?;
        match phase {
            Phase::Stage1 => {
                if stage1.observe(loss) || n >= plan.max_stage1_epochs {
                    phase = Phase::Stage2;
                    adam.lr = plan.lr_stage2;
                }
            }
            Phase::Stage2 => {
                if stage2.observe(loss) {
                    break;
                }
            }
            Phase::Finetune => unreachable!("fine-tuning starts after the merge"),
        }
    }

    params = merge_batchnorm(&params)?;
    let mut adam = AdamState::for_params(&params, plan.lr_finetune);
    for _ in 0..plan.finetune_epochs {
        run_epoch(&mut params, &mut adam, Phase::Finetune, &mut log)?;
    }
    Ok(TrainOutcome { params, log })
}
