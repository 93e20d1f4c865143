use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use hhfuse::learn::{io, teacher_student_task, train_until, TeacherStudentConfig, TrainConfig, TrainerState};
use hhfuse::plot::{line_plot, Series};
use hhfuse::Error;
use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;
use crate::settings::{ensure_dir, load_config, Context};
use crate::CliResult;

const TRAINER_FILE: &str = "trainer.json";

#[derive(Debug, clap::Args)]
pub struct Args {
    /// TOML config, or a manifest from an earlier run.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; holds the resumable trainer state.
    #[arg(long, short, default_value = "hhfuse-out")]
    out: PathBuf,
    /// Continue from the trainer state in the output directory.
    #[arg(long)]
    resume: bool,
    /// Stop after this epoch instead of running the full schedule.
    #[arg(long)]
    until: Option<usize>,
    /// Save the trainer state every this many epochs.
    #[arg(long, default_value_t = 10)]
    checkpoint_every: usize,
    /// Also write an SVG of the learning curve.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRunConfig {
    /// Shuffling seed; copied into `train.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Seed of the generated task; defaults to `seed`.
    #[serde(default)]
    pub task_seed: Option<u64>,
    #[serde(default)]
    pub task: TeacherStudentConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

pub fn run(ctx: &Context, args: &Args) -> CliResult<()> {
    let mut cfg: TrainRunConfig = load_config(&args.config)?;
    let (seed, source) = ctx.resolve_seed(cfg.seed)?;
    cfg.seed = Some(seed);
    cfg.train.seed = seed;
    let task_seed = *cfg.task_seed.get_or_insert(seed);
    if args.checkpoint_every == 0 {
        return Err(Error::Usage("--checkpoint-every must be at least 1".into()).into());
    }
    ensure_dir(&args.out)?;

    let task = teacher_student_task(&cfg.task, task_seed)?;
    let state_path = args.out.join(TRAINER_FILE);
    let mut state = if args.resume {
        if !state_path.exists() {
            return Err(Error::Usage(format!("nothing to resume: {} does not exist", state_path.display())).into());
        }
        let s = io::load_trainer(&state_path)?;
        if s.model.param_count() != task.student.param_count() {
            return Err(Error::Config("trainer state does not match the configured task".into()).into());
        }
        s
    } else {
        TrainerState::new(task.student.clone(), &cfg.train)
    };

    let stop = args.until.unwrap_or(cfg.train.epochs).min(cfg.train.epochs);
    while state.epoch < stop {
        let next = (state.epoch + args.checkpoint_every).min(stop);
        train_until(&mut state, &task.samples, &task.train, &task.test, &cfg.train, next)?;
        io::save_trainer(&state, &state_path)?;
        if let Some(r) = state.history.last() {
            log::info!("epoch {}: loss {:.6}, held-out sMAPE {:.4}", r.epoch, r.train_loss, r.val_smape);
        }
    }
    if state.history.records.is_empty() {
        // zero epochs still records the initial evaluation
        train_until(&mut state, &task.samples, &task.train, &task.test, &cfg.train, 0)?;
        io::save_trainer(&state, &state_path)?;
    }

    let mut manifest = Manifest::new("train", ctx, &cfg)?.with_seed(seed, source);
    manifest.output(&state_path);
    let history_path = args.out.join("history.csv");
    state.history.write_csv(BufWriter::new(File::create(&history_path)?))?;
    manifest.output(&history_path);
    if args.svg {
        let curve = Series {
            label: "held-out sMAPE".into(),
            points: state
                .history
                .records
                .iter()
                .map(|r| (r.epoch as f64, r.val_smape))
                .collect(),
        };
        let path = args.out.join("history.svg");
        std::fs::write(&path, line_plot("teacher-student fit", "epoch", "sMAPE (%)", &[curve]))?;
        manifest.output(&path);
    }
    let last = state.history.last().expect("history has the initial record");
    println!("epoch {}: held-out sMAPE {:.4}%", last.epoch, last.val_smape);
    manifest.set_summary(&serde_json::json!({ "epoch": last.epoch, "val_smape": last.val_smape }))?;
    manifest.write(&args.out.join("manifest.json"))
}
