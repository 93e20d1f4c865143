//! Synthetic teacher–student fitting: PSP filter → dense layer → HH neuron →
//! affine scaling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{cosine_lr, AdamConfig, AdamState};
use super::dense::DenseLayer;
use super::metrics::smape;
use super::psp::{psp_filter_grouped, PSPKernel};
use super::segment::{split_train_test, Sample, SegmentationScheme};
use crate::adjoint::{
    backward_through_time, forward_checkpointed, make_plan, LossSeeds, SurrogateSpec,
};
use crate::dynamics::{HHParams, NeuronState};
use crate::error::{Error, Result};

/// The trainable pipeline. Parameters are the dense weights and bias plus a
/// per-output scale and offset; kernels and the neuron are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentModel {
    pub kernels: Vec<PSPKernel>,
    /// Kernel index of each input channel.
    pub groups: Vec<usize>,
    /// Converts the dense output to membrane current (uA/cm^2).
    pub input_gain: f64,
    pub dense: DenseLayer,
    pub neuron: HHParams,
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
    pub checkpoint_budget: usize,
}

impl StudentModel {
    pub fn outputs(&self) -> usize {
        self.dense.outputs()
    }

    pub fn param_count(&self) -> usize {
        self.dense.param_count() + 2 * self.outputs()
    }

    /// Dense weights (row-major), dense bias, scale, offset.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.dense.params();
        p.extend(&self.scale);
        p.extend(&self.offset);
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Usage(
                "student parameter vector has wrong length".into(),
            ));
        }
        let nd = self.dense.param_count();
        let no = self.outputs();
        self.dense.set_params(&flat[..nd])?;
        self.scale.copy_from_slice(&flat[nd..nd + no]);
        self.offset.copy_from_slice(&flat[nd + no..]);
        Ok(())
    }

    /// Synaptic currents of a raw spike input.
    pub fn filter(&self, spikes: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        psp_filter_grouped(spikes, &self.kernels, &self.groups)
    }

    fn currents(&self, filtered: &[Vec<f64>]) -> Vec<Vec<f64>> {
        filtered
            .iter()
            .map(|x| {
                self.dense
                    .forward(x)
                    .into_iter()
                    .map(|i| self.input_gain * i)
                    .collect()
            })
            .collect()
    }

    /// Output series for an already-filtered input.
    pub fn predict_filtered(&self, filtered: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let currents = self.currents(filtered);
        let mut state = NeuronState::resting(&self.neuron, self.outputs());
        let mut spikes = vec![false; self.outputs()];
        let mut out = Vec::with_capacity(currents.len());
        for i in &currents {
            crate::dynamics::hh_step_in_place(&mut state, i, &self.neuron, &mut spikes)?;
            out.push(self.readout(&state.v));
        }
        Ok(out)
    }

    pub fn predict(&self, spikes: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.predict_filtered(&self.filter(spikes)?)
    }

    fn readout(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(v, (a, b))| a * v + b)
            .collect()
    }

    /// Supervised MSE of one sample and its gradient in [`Self::params`]
    /// layout.
    pub fn loss_and_grad(
        &self,
        filtered: &[Vec<f64>],
        target: &[Vec<f64>],
        pad_len: usize,
    ) -> Result<(f64, Vec<f64>)> {
        let steps = filtered.len();
        let no = self.outputs();
        if target.len() != steps || pad_len >= steps {
            return Err(Error::Usage(format!(
                "sample has {steps} input steps, {} target steps, pad {pad_len}",
                target.len()
            )));
        }
        let currents = self.currents(filtered);
        let plan = make_plan(steps, self.checkpoint_budget.max(1))?;
        let fwd = forward_checkpointed(
            &self.neuron,
            &NeuronState::resting(&self.neuron, no),
            &currents,
            &plan,
        )?;
        let n_sup = ((steps - pad_len) * no) as f64;
        let mut loss = 0.0;
        let mut d_v = vec![vec![0.0; no]; steps];
        let mut g_scale = vec![0.0; no];
        let mut g_offset = vec![0.0; no];
        for t in pad_len..steps {
            for d in 0..no {
                let v = fwd.v[t][d];
                let err = self.scale[d] * v + self.offset[d] - target[t][d];
                loss += err * err / n_sup;
                let dy = 2.0 * err / n_sup;
                d_v[t][d] = self.scale[d] * dy;
                g_scale[d] += dy * v;
                g_offset[d] += dy;
            }
        }
        let grads = backward_through_time(
            &self.neuron,
            fwd,
            &currents,
            &LossSeeds::potential(d_v),
            &SurrogateSpec::default(),
        )?;
        let n_in = self.dense.inputs();
        let mut flat = vec![0.0; self.param_count()];
        let bias_at = no * n_in;
        for (x, d_i) in filtered.iter().zip(&grads.d_inputs) {
            for d in 0..no {
                let g = self.input_gain * d_i[d];
                if g == 0.0 {
                    continue;
                }
                flat[bias_at + d] += g;
                for (w, xi) in flat[d * n_in..(d + 1) * n_in].iter_mut().zip(x) {
                    *w += g * xi;
                }
            }
        }
        let nd = self.dense.param_count();
        flat[nd..nd + no].copy_from_slice(&g_scale);
        flat[nd + no..].copy_from_slice(&g_offset);
        Ok((loss, flat))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeacherStudentConfig {
    pub n_inputs: usize,
    pub excitatory_fraction: f64,
    pub n_samples: usize,
    pub scheme: SegmentationScheme,
    pub dt: f64,
    pub input_rate_hz: f64,
    pub tau_exc: f64,
    pub tau_inh: f64,
    pub input_gain: f64,
    /// Teacher dense weights have magnitude uniform in `[0, 2 weight_scale)`,
    /// signed by the channel group.
    pub weight_scale: f64,
    pub teacher_scale: f64,
    pub teacher_offset: f64,
    pub checkpoint_budget: usize,
}

impl Default for TeacherStudentConfig {
    fn default() -> Self {
        TeacherStudentConfig {
            n_inputs: 64,
            excitatory_fraction: 0.75,
            n_samples: 48,
            scheme: SegmentationScheme {
                pad_len: 100,
                out_len: 400,
            },
            dt: 0.05,
            input_rate_hz: 100.0,
            tau_exc: 2.0,
            tau_inh: 6.0,
            input_gain: 50.0,
            weight_scale: 1.0,
            teacher_scale: 0.02,
            teacher_offset: -0.3,
            checkpoint_budget: 32,
        }
    }
}

/// A generated task: dataset, index split, teacher, and a freshly
/// initialized student.
#[derive(Debug, Clone)]
pub struct TeacherStudentTask {
    pub teacher: StudentModel,
    pub student: StudentModel,
    pub samples: Vec<Sample>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn signed_dense<R: Rng>(groups: &[usize], scale: f64, rng: &mut R) -> DenseLayer {
    let row = groups
        .iter()
        .map(|&g| {
            let m = rng.random_range(0.0..2.0 * scale);
            if g == 0 {
                m
            } else {
                -m
            }
        })
        .collect();
    DenseLayer::new(vec![row], vec![0.0]).expect("one row")
}

pub fn teacher_student_task(
    config: &TeacherStudentConfig,
    seed: u64,
) -> Result<TeacherStudentTask> {
    if config.n_inputs == 0 || config.n_samples == 0 {
        return Err(Error::Config("task needs inputs and samples".into()));
    }
    let mut neuron = HHParams::default();
    neuron.dt = config.dt;
    neuron.validate()?;
    let kernels = vec![
        PSPKernel::spanning(config.tau_exc, config.dt, 5.0)?,
        PSPKernel::spanning(config.tau_inh, config.dt, 5.0)?,
    ];
    let n_exc = (config.n_inputs as f64 * config.excitatory_fraction).round() as usize;
    let groups: Vec<usize> = (0..config.n_inputs)
        .map(|c| usize::from(c >= n_exc))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = |dense: DenseLayer, scale: f64, offset: f64| StudentModel {
        kernels: kernels.clone(),
        groups: groups.clone(),
        input_gain: config.input_gain,
        dense,
        neuron: neuron.clone(),
        scale: vec![scale],
        offset: vec![offset],
        checkpoint_budget: config.checkpoint_budget,
    };
    let teacher = model(
        signed_dense(&groups, config.weight_scale, &mut rng),
        config.teacher_scale,
        config.teacher_offset,
    );
    let student = model(
        signed_dense(&groups, config.weight_scale, &mut rng),
        config.teacher_scale * 0.5,
        0.0,
    );

    let p_spike = config.input_rate_hz * config.dt * 1e-3;
    let steps = config.scheme.pad_len + config.scheme.out_len;
    let mut samples = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        let input: Vec<Vec<f64>> = (0..steps)
            .map(|_| {
                (0..config.n_inputs)
                    .map(|_| f64::from(u8::from(rng.random_bool(p_spike))))
                    .collect()
            })
            .collect();
        let target = teacher.predict(&input)?;
        samples.push(Sample {
            input,
            target,
            pad_len: config.scheme.pad_len,
        });
    }
    let (train, test) = split_train_test(samples.len(), &mut rng);
    Ok(TeacherStudentTask {
        teacher,
        student,
        samples,
        train,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub cosine: bool,
    /// Evaluate only; parameters never change.
    pub freeze: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            adam: AdamConfig::default(),
            batch_size: 4,
            cosine: true,
            freeze: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_smape: f64,
}

/// Record 0 is the untrained model; record `e` follows epoch `e`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,train_loss,val_smape")?;
        for r in &self.records {
            writeln!(out, "{},{},{}", r.epoch, r.train_loss, r.val_smape)?;
        }
        Ok(())
    }
}

/// Everything needed to continue training bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub model: StudentModel,
    pub adam: AdamState,
    pub epoch: usize,
    pub history: History,
}

impl TrainerState {
    pub fn new(model: StudentModel, config: &TrainConfig) -> Self {
        let adam = AdamState::new(config.adam, model.param_count());
        TrainerState {
            model,
            adam,
            epoch: 0,
            history: History::default(),
        }
    }
}

fn diverged(epoch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NumericalOverflow { .. } | Error::GradientOverflow { .. } => {
            Error::TrainingDiverged { epoch }
        }
        other => other,
    }
}

/// Held-out sMAPE over the supervised steps of `idx`.
pub fn evaluate(
    model: &StudentModel,
    filtered: &[Vec<Vec<f64>>],
    samples: &[Sample],
    idx: &[usize],
) -> Result<f64> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for &i in idx {
        let out = model.predict_filtered(&filtered[i])?;
        let s = &samples[i];
        for t in s.pad_len..s.steps() {
            pred.extend(&out[t]);
            truth.extend(&s.target[t]);
        }
    }
    smape(&pred, &truth)
}

fn train_loss(
    model: &StudentModel,
    filtered: &[Vec<Vec<f64>>],
    samples: &[Sample],
    idx: &[usize],
) -> Result<f64> {
    let mut total = 0.0;
    for &i in idx {
        total += model
            .loss_and_grad(&filtered[i], &samples[i].target, samples[i].pad_len)?
            .0;
    }
    Ok(total / idx.len().max(1) as f64)
}

/// Runs epochs until `state.epoch == min(stop, config.epochs)`, appending to
/// the history. The learning-rate schedule always spans `config.epochs`.
/// Epoch `e` shuffles with a stream derived from `(seed, e)`, so a
/// state saved after any epoch resumes to the identical result.
pub fn train_until(
    state: &mut TrainerState,
    samples: &[Sample],
    train: &[usize],
    test: &[usize],
    config: &TrainConfig,
    stop: usize,
) -> Result<()> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::Usage(
            "training needs non-empty train and test sets".into(),
        ));
    }
    let filtered: Vec<Vec<Vec<f64>>> = samples
        .iter()
        .map(|s| state.model.filter(&s.input))
        .collect::<Result<_>>()?;
    if state.history.records.is_empty() {
        let train_loss =
            train_loss(&state.model, &filtered, samples, train).map_err(diverged(0))?;
        let val_smape = evaluate(&state.model, &filtered, samples, test).map_err(diverged(0))?;
        state.history.records.push(EpochRecord {
            epoch: 0,
            train_loss,
            val_smape,
        });
    }
    let batch = config.batch_size.max(1);
    while state.epoch < stop.min(config.epochs) {
        let epoch = state.epoch + 1;
        let lr = if config.cosine {
            cosine_lr(config.adam.lr, epoch - 1, config.epochs)
        } else {
            config.adam.lr
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        let mut order = train.to_vec();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);

        let mut per_sample = vec![0.0; samples.len()];
        for chunk in order.chunks(batch) {
            let mut grad = vec![0.0; state.model.param_count()];
            for &i in chunk {
                let (loss, g) = state
                    .model
                    .loss_and_grad(&filtered[i], &samples[i].target, samples[i].pad_len)
                    .map_err(diverged(epoch))?;
                if !loss.is_finite() {
                    return Err(Error::TrainingDiverged { epoch });
                }
                per_sample[i] = loss;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b / chunk.len() as f64;
                }
            }
            if !config.freeze {
                let mut params = state.model.params();
                state.adam.step(&mut params, &grad, lr)?;
                if params.iter().any(|p| !p.is_finite()) {
                    return Err(Error::TrainingDiverged { epoch });
                }
                state.model.set_params(&params)?;
            }
        }
        let train_loss = train.iter().map(|&i| per_sample[i]).sum::<f64>() / train.len() as f64;
        let val_smape =
            evaluate(&state.model, &filtered, samples, test).map_err(diverged(epoch))?;
        state.history.records.push(EpochRecord {
            epoch,
            train_loss,
            val_smape,
        });
        state.epoch = epoch;
    }
    Ok(())
}

/// Trains `model` from scratch and returns its history.
pub fn fit(
    model: &mut StudentModel,
    samples: &[Sample],
    train: &[usize],
    test: &[usize],
    config: &TrainConfig,
) -> Result<History> {
    let mut state = TrainerState::new(model.clone(), config);
    train_until(&mut state, samples, train, test, config, config.epochs)?;
    *model = state.model;
    Ok(state.history)
}
