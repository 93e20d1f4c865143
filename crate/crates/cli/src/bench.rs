use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Subcommand;
use hhfuse::adjoint::{
    backward_through_time, forward_checkpointed, grad_check_hh, make_plan, LossSeeds, SurrogateSpec,
    DEFAULT_FD_STEP,
};
use hhfuse::dynamics::reference::hh_step_naive;
use hhfuse::dynamics::{hh_step_in_place, HHParams, NeuronState};
use hhfuse::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::manifest::Manifest;
use crate::settings::{ensure_dir, Context};
use crate::{CliError, CliResult};

/// Fused and naive stepping must agree to this absolute tolerance.
const FIDELITY_TOL: f64 = 1e-12;
/// Adjoint gradients must match finite differences to this relative error.
const GRAD_TOL: f64 = 1e-5;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steps per second of the fused HH step against the naive reference.
    StepThroughput(StepArgs),
    /// Adjoint gradients against finite differences on random chains.
    GradCheck(GradArgs),
    /// Peak retained states of checkpointed BPTT under several budgets.
    Mem(MemArgs),
}

#[derive(Debug, clap::Args, Serialize)]
pub struct StepArgs {
    #[arg(long, default_value_t = 1000)]
    neurons: usize,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Timed repetitions; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, short, default_value = "hhfuse-out")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct GradArgs {
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 60)]
    steps: usize,
    #[arg(long, default_value_t = 2)]
    neurons: usize,
    #[arg(long, short, default_value = "hhfuse-out")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct MemArgs {
    #[arg(long, default_value_t = 400)]
    steps: usize,
    /// Checkpoint budgets; defaults to 1, ceil(sqrt(T)), T/4 and T.
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<usize>,
    #[arg(long, short, default_value = "hhfuse-out")]
    #[serde(skip)]
    out: PathBuf,
}

pub fn run(ctx: &Context, cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::StepThroughput(a) => step_throughput(ctx, a),
        Command::GradCheck(a) => grad_check(ctx, a),
        Command::Mem(a) => mem(ctx, a),
    }
}

fn finish(ctx: &Context, kind: &str, args: &impl Serialize, out: &Path, csv: String, seed: Option<u64>) -> CliResult<()> {
    ensure_dir(out)?;
    let path = out.join(format!("{kind}.csv"));
    std::fs::write(&path, csv)?;
    let mut m = Manifest::new(&format!("bench {kind}"), ctx, args)?;
    if let Some(s) = seed {
        let (_, source) = ctx.resolve_seed(None)?;
        m = m.with_seed(s, source);
    }
    m.output(&path);
    m.write(&out.join(format!("{kind}.manifest.json")))
}

fn drive(neurons: usize, k: usize) -> Vec<f64> {
    (0..neurons)
        .map(|n| 4.0 + 0.02 * n as f64 + 6.0 * (0.01 * k as f64 + n as f64).sin())
        .collect()
}

fn step_throughput(ctx: &Context, a: &StepArgs) -> CliResult<()> {
    if a.neurons == 0 || a.steps == 0 || a.repeats == 0 {
        return Err(Error::Usage("neurons, steps and repeats must be positive".into()).into());
    }
    let p = HHParams::default();
    let inputs: Vec<Vec<f64>> = (0..a.steps).map(|k| drive(a.neurons, k)).collect();
    let s0 = NeuronState::resting(&p, a.neurons);

    // precondition: both implementations produce the same trace
    let mut fused = s0.clone();
    let mut naive = s0.clone();
    let mut spikes = vec![false; a.neurons];
    for (k, x) in inputs.iter().enumerate() {
        hh_step_in_place(&mut fused, x, &p, &mut spikes)?;
        let (next, s) = hh_step_naive(&naive, x, &p)?;
        naive = next;
        let worst = fused.v.iter().zip(&naive.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if worst > FIDELITY_TOL || spikes != s {
            return Err(CliError::Check(format!("fused and naive steps diverge at step {k} by {worst:e}")));
        }
    }

    let time = |f: &mut dyn FnMut()| -> f64 {
        (0..a.repeats)
            .map(|_| {
                let t = Instant::now();
                f();
                t.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let t_fused = time(&mut || {
        let mut s = s0.clone();
        let mut spikes = vec![false; a.neurons];
        for x in &inputs {
            hh_step_in_place(&mut s, x, &p, &mut spikes).expect("checked above");
        }
        std::hint::black_box(&s);
    });
    let t_naive = time(&mut || {
        let mut s = s0.clone();
        for x in &inputs {
            s = hh_step_naive(&s, x, &p).expect("checked above").0;
        }
        std::hint::black_box(&s);
    });
    let work = (a.neurons * a.steps) as f64;
    let mut csv = String::from("implementation,neurons,steps,seconds,neuron_steps_per_s\n");
    for (name, t) in [("fused", t_fused), ("naive", t_naive)] {
        csv.push_str(&format!("{name},{},{},{t},{}\n", a.neurons, a.steps, work / t));
    }
    let speedup = t_naive / t_fused;
    println!(
        "fused {:.3e} neuron-steps/s, naive {:.3e}, speedup {speedup:.2}x",
        work / t_fused,
        work / t_naive
    );
    if speedup < 2.0 {
        println!("note: speedup below 2x on this machine");
    }
    finish(ctx, "step-throughput", a, &a.out, csv, None)
}

fn grad_check(ctx: &Context, a: &GradArgs) -> CliResult<()> {
    if a.chains == 0 || a.steps == 0 || a.neurons == 0 {
        return Err(Error::Usage("chains, steps and neurons must be positive".into()).into());
    }
    let (seed, _) = ctx.resolve_seed(None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = HHParams::default();
    let mut csv = String::from("chain,quantity,adjoint,numeric,rel_error\n");
    let mut worst: f64 = 0.0;
    for chain in 0..a.chains {
        let v0: Vec<f64> = (0..a.neurons).map(|_| rng.random_range(-70.0..-60.0)).collect();
        let inputs: Vec<Vec<f64>> = (0..a.steps)
            .map(|_| (0..a.neurons).map(|_| rng.random_range(0.0..30.0)).collect())
            .collect();
        let weights: Vec<Vec<f64>> = (0..a.steps)
            .map(|_| (0..a.neurons).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let report = grad_check_hh(&p, &NeuronState::at_potential(&p, &v0), &inputs, &weights, DEFAULT_FD_STEP)?;
        worst = worst.max(report.max_rel_error());
        for e in &report.entries {
            csv.push_str(&format!("{chain},{},{},{},{}\n", e.quantity, e.adjoint, e.numeric, e.rel_error));
        }
    }
    println!("{} chains of {} steps: max relative error {worst:.3e}", a.chains, a.steps);
    finish(ctx, "grad-check", a, &a.out, csv, Some(seed))?;
    if worst >= GRAD_TOL {
        return Err(CliError::Check(format!("max relative error {worst:e} >= {GRAD_TOL:e}")));
    }
    Ok(())
}

fn mem(ctx: &Context, a: &MemArgs) -> CliResult<()> {
    let t = a.steps;
    if t == 0 {
        return Err(Error::Usage("steps must be positive".into()).into());
    }
    let budgets = if a.budgets.is_empty() {
        let mut b = vec![1, (t as f64).sqrt().ceil() as usize, (t / 4).max(1), t];
        b.dedup();
        b
    } else {
        a.budgets.clone()
    };
    let p = HHParams::default();
    let inputs: Vec<Vec<f64>> = (0..t).map(|k| drive(1, k)).collect();
    let seeds = LossSeeds::potential(vec![vec![1.0]; t]);
    let s0 = NeuronState::resting(&p, 1);
    let mut csv = String::from("budget,segment_length,checkpoints,peak_live_states,bound,forward_steps\n");
    let mut violations = Vec::new();
    for &budget in &budgets {
        let plan = make_plan(t, budget)?;
        let seg = plan.segment_length;
        let stored = plan.stored_indices.len();
        let fwd = forward_checkpointed(&p, &s0, &inputs, &plan)?;
        let g = backward_through_time(&p, fwd, &inputs, &seeds, &SurrogateSpec::default())?;
        let peak = g.stats.peak_live_states;
        csv.push_str(&format!("{budget},{seg},{stored},{peak},{},{}\n", budget + seg, g.stats.forward_steps));
        println!(
            "budget {budget:>4}: segment {seg:>4}, peak {peak:>4} states (bound {}), {} forward steps",
            budget + seg,
            g.stats.forward_steps
        );
        if peak > budget + seg {
            violations.push(budget);
        }
    }
    finish(ctx, "mem", a, &a.out, csv, None)?;
    if !violations.is_empty() {
        return Err(CliError::Check(format!("peak exceeds budget + segment for budgets {violations:?}")));
    }
    Ok(())
}
