//! Minibatch SGD with momentum for the contact network.
//!
//! The optimizer is the classic momentum form: `v = m*v - lr*(g + wd*w)`,
//! `w += v`, with weight decay folded into the update rather than the loss
//! gradients. Batches are sampled with replacement from a fixed substream
//! per iteration, so a run is a pure function of the seed.

use super::{masked_squared_error, softmax_ce, PicnnModel, POSE_SCALE};
use crate::imaging::{augment, AugmentSpec, FacePatch};
use crate::numerics::Rng;
use crate::real::Real;
use crate::{Error, Result};

/// Substream id for batch sampling, disjoint from the per-layer init ids.
const BATCH_STREAM: u64 = 1 << 20;

/// One training example: a patch by index, an optional augmentation to apply
/// on the fly, the contact label, and head pose in degrees when known.
#[derive(Debug, Clone)]
pub struct TrainEntry {
    pub patch: usize,
    pub augment: Option<AugmentSpec>,
    pub label: bool,
    /// (yaw, pitch, roll) in degrees; `None` rows contribute nothing to the
    /// pose loss.
    pub pose: Option<[f64; 3]>,
}

/// Training data: entries index into a shared patch pool so oversampled
/// examples don't duplicate pixels.
#[derive(Debug, Clone, Default)]
pub struct TrainSet {
    pub patches: Vec<FacePatch>,
    pub entries: Vec<TrainEntry>,
}

impl TrainSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Optimizer hyperparameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Weight of the pose regression term; zero disables the pose pass
    /// completely.
    pub pose_weight: f64,
    /// `(iteration bound, rate)` pairs at the reference scale of the last
    /// bound; bounds rescale proportionally to `iterations`.
    pub schedule: Vec<(usize, f64)>,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            batch_size: 64,
            momentum: 0.9,
            weight_decay: 5e-4,
            pose_weight: 0.1,
            schedule: vec![(100_000, 5e-3), (200_000, 5e-4)],
            log_every: 50,
        }
    }
}

impl TrainConfig {
    /// Learning rate at a 1-based iteration: the rate of the first schedule
    /// entry whose rescaled bound covers it, the last rate beyond the end.
    /// With the default schedule the rate drops tenfold halfway through,
    /// whatever the configured run length.
    pub fn learning_rate(&self, iteration: usize) -> f64 {
        let reference = self.schedule.last().map(|&(b, _)| b).unwrap_or(1).max(1);
        for &(bound, rate) in &self.schedule {
            let scaled = (bound as f64 * self.iterations as f64 / reference as f64).round() as usize;
            if iteration <= scaled {
                return rate;
            }
        }
        self.schedule.last().map(|&(_, r)| r).unwrap_or(0.0)
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(Error::Config("iterations and batch size must be positive".into()));
        }
        if self.pose_weight < 0.0 {
            return Err(Error::Config("pose weight must be non-negative".into()));
        }
        if self.schedule.is_empty() {
            return Err(Error::Config("the learning-rate schedule needs at least one entry".into()));
        }
        if self.schedule.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Config("schedule bounds must be strictly increasing".into()));
        }
        if self.schedule.iter().any(|&(_, r)| !(r > 0.0)) {
            return Err(Error::Config("schedule rates must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub iteration: usize,
    pub lr: f64,
    pub total_loss: f64,
    pub ce_loss: f64,
    /// Raw (unweighted) masked pose error.
    pub pose_loss: f64,
}

/// Trains the model in place and returns the loss log (always including
/// iterations 1 and the last). Identical seeds, data and configuration give
/// bit-identical models.
pub fn train_picnn<T: Real>(
    model: &mut PicnnModel<T>,
    data: &TrainSet,
    config: &TrainConfig,
    rng: &Rng,
) -> Result<Vec<TrainLogRow>> {
    config.validate()?;
    if data.is_empty() || data.patches.is_empty() {
        return Err(Error::DegenerateInput("training needs at least one entry and patch".into()));
    }
    if let Some(bad) = data.entries.iter().find(|e| e.patch >= data.patches.len()) {
        return Err(Error::OutOfBounds(format!(
            "entry references patch {} of {}",
            bad.patch,
            data.patches.len()
        )));
    }

    let use_pose = model.pose_head.is_some() && config.pose_weight > 0.0;
    let bs = config.batch_size;
    let input_len = model.input_len();
    let mut velocities: Vec<Vec<T>> =
        model.param_tensors_mut().iter().map(|t| vec![T::zero(); t.len()]).collect();
    let batch_base = rng.substream(BATCH_STREAM);

    let mut x = vec![T::zero(); bs * input_len];
    let mut labels = vec![false; bs];
    let mut targets = vec![T::zero(); bs * 3];
    let mut mask = vec![false; bs];
    let mut log = Vec::new();

    for it in 1..=config.iterations {
        let mut r = batch_base.substream(it as u64);
        for b in 0..bs {
            let entry = &data.entries[r.next_below(data.entries.len())];
            let patch = &data.patches[entry.patch];
            let slot = &mut x[b * input_len..(b + 1) * input_len];
            match &entry.augment {
                Some(spec) => model.write_input(&augment(patch, spec), slot)?,
                None => model.write_input(patch, slot)?,
            }
            labels[b] = entry.label;
            mask[b] = false;
            targets[b * 3..b * 3 + 3].fill(T::zero());
            if use_pose {
                if let Some(pose) = entry.pose {
                    mask[b] = true;
                    for (slot, deg) in targets[b * 3..b * 3 + 3].iter_mut().zip(pose) {
                        *slot = T::of(deg / POSE_SCALE);
                    }
                }
            }
        }

        let cache = model.forward_train(&x, bs);
        let mut dlogits = vec![T::zero(); bs * 2];
        let (ce, _) = softmax_ce(&cache.logits, &labels, Some(&mut dlogits));
        let (pose_raw, dpose) = if use_pose {
            let mut d = vec![T::zero(); bs * 3];
            let raw = masked_squared_error(&cache.pose, &targets, &mask, 3, Some(&mut d));
            let lambda = T::of(config.pose_weight);
            for g in d.iter_mut() {
                *g *= lambda;
            }
            (raw, Some(d))
        } else {
            (T::zero(), None)
        };
        let grads = model.backward(&cache, &dlogits, dpose.as_deref());

        let lr = T::of(config.learning_rate(it));
        let momentum = T::of(config.momentum);
        let wd = T::of(config.weight_decay);
        let grad_tensors = grads.tensors();
        for ((param, vel), grad) in
            model.param_tensors_mut().into_iter().zip(velocities.iter_mut()).zip(grad_tensors)
        {
            for i in 0..param.len() {
                let g = grad[i] + wd * param[i];
                vel[i] = momentum * vel[i] - lr * g;
                param[i] += vel[i];
            }
        }

        if it == 1 || it == config.iterations || it % config.log_every.max(1) == 0 {
            let total = ce.as_f64() + config.pose_weight * pose_raw.as_f64();
            let row = TrainLogRow {
                iteration: it,
                lr: config.learning_rate(it),
                total_loss: total,
                ce_loss: ce.as_f64(),
                pose_loss: pose_raw.as_f64(),
            };
            log::debug!(
                "iter {} lr {:.5} loss {:.5} (ce {:.5}, pose {:.5})",
                row.iteration,
                row.lr,
                row.total_loss,
                row.ce_loss,
                row.pose_loss
            );
            log.push(row);
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::picnn::{InitScheme, PicnnConfig};

    fn tiny_config() -> PicnnConfig {
        PicnnConfig {
            input_size: 35,
            channel_scale: 0.02,
            fc_dim: 6,
            pose_branch: true,
            init: InitScheme::HeNormal,
        }
    }

    fn brightness_set(size: usize, with_pose: bool) -> TrainSet {
        let mut patches = Vec::new();
        let mut entries = Vec::new();
        for i in 0..8 {
            let bright = i % 2 == 0;
            let value = if bright { 200 + (i as u8) * 5 } else { 40 + (i as u8) * 5 };
            patches.push(FacePatch::filled(size, size, 3, value).unwrap());
            entries.push(TrainEntry {
                patch: i,
                augment: None,
                label: bright,
                pose: with_pose.then_some([9.0, 0.0, 0.0]),
            });
        }
        TrainSet { patches, entries }
    }

    #[test]
    fn schedule_keeps_reference_rates_at_reference_scale() {
        let config = TrainConfig { iterations: 200_000, ..TrainConfig::default() };
        assert_eq!(config.learning_rate(1), 0.005);
        assert_eq!(config.learning_rate(100_000), 0.005);
        assert_eq!(config.learning_rate(100_001), 0.0005);
        assert_eq!(config.learning_rate(200_000), 0.0005);
        // Past the final bound the last rate sticks.
        assert_eq!(config.learning_rate(300_000), 0.0005);
    }

    #[test]
    fn schedule_bounds_rescale_with_run_length() {
        let config = TrainConfig { iterations: 10, ..TrainConfig::default() };
        // 100_000/200_000 of a 10-iteration run is 5.
        assert_eq!(config.learning_rate(5), 0.005);
        assert_eq!(config.learning_rate(6), 0.0005);
    }

    #[test]
    fn first_log_row_of_a_zero_network_has_closed_form_loss() {
        let mut model = PicnnModel::<f64>::zeroed(tiny_config()).unwrap();
        let data = brightness_set(35, true);
        let config = TrainConfig {
            iterations: 1,
            batch_size: 4,
            log_every: 1,
            ..TrainConfig::default()
        };
        let log = train_picnn(&mut model, &data, &config, &Rng::new(5)).unwrap();
        // Zero weights: uniform softmax gives ce = ln 2, and the pose head
        // outputs zero against targets (9/90, 0, 0), so the raw pose error
        // is 0.1^2 = 0.01 and the total is ln 2 + 0.1 * 0.01.
        assert_eq!(log.len(), 1);
        assert!((log[0].ce_loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((log[0].pose_loss - 0.01).abs() < 1e-12);
        assert!((log[0].total_loss - 0.6941471805599453).abs() < 1e-12);
        assert_eq!(log[0].lr, 0.005);
    }

    #[test]
    fn training_separates_bright_from_dark_patches() {
        // The eighth-width preset is the smallest shape that trains
        // dependably; narrower stacks can lose every first-layer channel to
        // dead rectifiers on flat inputs.
        let net = PicnnConfig::desk_small();
        let rng = Rng::new(40);
        let mut model = PicnnModel::<f64>::init(net, &rng).unwrap();
        let data = brightness_set(net.input_size, false);
        let config = TrainConfig {
            iterations: 80,
            batch_size: 8,
            log_every: 80,
            ..TrainConfig::default()
        };
        let log = train_picnn(&mut model, &data, &config, &rng).unwrap();
        let first = log.first().unwrap().ce_loss;
        let last = log.last().unwrap().ce_loss;
        assert!(last < first, "loss should drop: {first} -> {last}");
        assert!(last < 0.4, "final cross-entropy {last} still near chance");
        let scores = model
            .predict_patches(&data.patches)
            .unwrap();
        for (i, s) in scores.iter().enumerate() {
            if i % 2 == 0 {
                assert!(*s > 0.5, "bright patch {i} scored {s}");
            } else {
                assert!(*s < 0.5, "dark patch {i} scored {s}");
            }
        }
    }

    #[test]
    fn zero_pose_weight_matches_a_pose_free_network_bit_for_bit() {
        let master = Rng::new(7);
        let mut with_head = PicnnModel::<f64>::init(tiny_config(), &master).unwrap();
        let mut without_head =
            PicnnModel::<f64>::init(PicnnConfig { pose_branch: false, ..tiny_config() }, &master)
                .unwrap();
        let data = brightness_set(35, true);
        let config = TrainConfig {
            iterations: 6,
            batch_size: 4,
            pose_weight: 0.0,
            log_every: 2,
            ..TrainConfig::default()
        };
        let log_a = train_picnn(&mut with_head, &data, &config, &master).unwrap();
        let log_b = train_picnn(&mut without_head, &data, &config, &master).unwrap();
        assert_eq!(log_a.len(), log_b.len());
        for (a, b) in log_a.iter().zip(&log_b) {
            assert_eq!(a.ce_loss.to_bits(), b.ce_loss.to_bits());
        }
        let probe: Vec<f64> =
            (0..2 * with_head.input_len()).map(|i| (i % 251) as f64 / 251.0).collect();
        let pa = with_head.contact_probabilities(&probe, 2);
        let pb = without_head.contact_probabilities(&probe, 2);
        for (a, b) in pa.iter().zip(&pb) {
            assert_eq!(a.to_bits(), b.to_bits(), "disabling the pose loss must not perturb scores");
        }
        for (a, b) in with_head.convs.iter().zip(&without_head.convs) {
            assert_eq!(a.weights, b.weights);
        }
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let data = brightness_set(35, true);
        let config =
            TrainConfig { iterations: 5, batch_size: 4, log_every: 1, ..TrainConfig::default() };
        let run = || {
            let rng = Rng::new(99);
            let mut model = PicnnModel::<f32>::init(tiny_config(), &rng).unwrap();
            let log = train_picnn(&mut model, &data, &config, &rng).unwrap();
            (model, log)
        };
        let (model_a, log_a) = run();
        let (model_b, log_b) = run();
        assert_eq!(log_a, log_b);
        assert_eq!(model_a.fc8e.weights, model_b.fc8e.weights);
        assert_eq!(model_a.convs[0].weights, model_b.convs[0].weights);
    }

    #[test]
    fn log_rows_cover_first_last_and_cadence_iterations() {
        let mut model = PicnnModel::<f32>::zeroed(tiny_config()).unwrap();
        let data = brightness_set(35, false);
        let config =
            TrainConfig { iterations: 10, batch_size: 2, log_every: 4, ..TrainConfig::default() };
        let log = train_picnn(&mut model, &data, &config, &Rng::new(1)).unwrap();
        let iters: Vec<usize> = log.iter().map(|r| r.iteration).collect();
        assert_eq!(iters, vec![1, 4, 8, 10]);
        assert!(log.iter().all(|r| r.total_loss.is_finite()));
    }

    #[test]
    fn invalid_configurations_and_datasets_are_rejected() {
        let mut model = PicnnModel::<f32>::zeroed(tiny_config()).unwrap();
        let data = brightness_set(35, false);
        let bad = TrainConfig { iterations: 0, ..TrainConfig::default() };
        assert!(train_picnn(&mut model, &data, &bad, &Rng::new(0)).is_err());
        let bad = TrainConfig { schedule: vec![], ..TrainConfig::default() };
        assert!(train_picnn(&mut model, &data, &bad, &Rng::new(0)).is_err());
        let bad = TrainConfig { pose_weight: -1.0, ..TrainConfig::default() };
        assert!(train_picnn(&mut model, &data, &bad, &Rng::new(0)).is_err());
        assert!(train_picnn(&mut model, &TrainSet::default(), &TrainConfig::default(), &Rng::new(0))
            .is_err());
        let mut broken = brightness_set(35, false);
        broken.entries[0].patch = 99;
        assert!(train_picnn(&mut model, &broken, &TrainConfig::default(), &Rng::new(0)).is_err());
    }
}
