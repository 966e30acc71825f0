use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wizard_rl::agents::{parse_agent_mix, Agent, AgentSpec, NetBank, RoundNets};
use wizard_rl::config::Config;
use wizard_rl::eval::{
    accuracy_csv, eval_accuracy, eval_winning_share, parse_accuracy_csv, parse_share_csv, position_curve_plot,
    round_curve_plot, share_bars_plot, share_csv, training_curve_plot, write_text,
};
use wizard_rl::game::MAX_ROUND;
use wizard_rl::history::HistoryEncoder;
use wizard_rl::nn::inspect;
use wizard_rl::train::{
    read_progress, train_estimator_stage, train_history_stage, train_round, EstimatorStageConfig,
    HistoryStageConfig, TrainConfig, TrainSetup,
};

#[derive(Parser, Debug)]
#[command(name = "wizard-rl", version, about = "Train and evaluate Wizard agents")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Config file with `[section]` headers and `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stream; required by training and evaluation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Round numbers, `a..b` (inclusive) or a single round.
    #[arg(long, global = true, value_parser = parse_rounds)]
    rounds: Option<RangeInclusive<u8>>,
    /// Simulation threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override a config value, `section.key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print only errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Also print a JSON summary of evaluation reports.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Self-play training of the bidding and playing networks.
    TrainDqn {
        /// Training rounds per round number (train.rounds_total).
        #[arg(long)]
        total: Option<u64>,
        /// History encoder whose cell state extends the playing input.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Continue training from a checkpoint against fixed opponents.
    Retrain {
        /// Round file or directory of round files to start from.
        #[arg(long)]
        warm: PathBuf,
        #[arg(long)]
        epsilon_start: Option<f64>,
        /// Comma-separated agent specs of the fixed seats.
        #[arg(long)]
        opponents: Option<String>,
        #[arg(long)]
        total: Option<u64>,
    },
    /// Supervised training of history encoders.
    TrainHistory {
        /// Networks that play the data-generating rounds (default: random play).
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Hidden sizes, comma separated (history.hidden_sizes).
        #[arg(long)]
        hidden: Option<String>,
    },
    /// Supervised training of the card-location estimator.
    TrainEstimator {
        #[arg(long)]
        policy: Option<PathBuf>,
        /// History encoder whose cell state extends the estimator input.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Accuracy of seat 0 at every bidding position.
    EvalAccuracy {
        /// Four comma-separated agent specs; seat 0 is evaluated.
        #[arg(long)]
        agents: String,
        /// Single round; alternative to --rounds.
        #[arg(long)]
        round: Option<u8>,
        /// Rounds per bidding position (eval.rounds_per_position).
        #[arg(long)]
        n: Option<u64>,
    },
    /// Winning shares over full games.
    EvalWinshare {
        #[arg(long)]
        agents: String,
        /// Games (eval.games).
        #[arg(long)]
        games: Option<u64>,
        /// Last round of every game.
        #[arg(long)]
        max_round: u8,
    },
    /// Print tensor names, shapes and checksum of a checkpoint.
    InspectCheckpoint { path: PathBuf },
    /// Convert progress or report CSVs into plot tables.
    GenPlotData {
        /// fig2 (training curve), fig3 (round curve), fig4 (positions), fig12 (shares).
        #[arg(long)]
        family: String,
        /// Input CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn parse_rounds(s: &str) -> std::result::Result<RangeInclusive<u8>, String> {
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (s, s),
    };
    let a: u8 = a.trim().parse().map_err(|_| format!("bad round `{a}`"))?;
    let b: u8 = b.trim().parse().map_err(|_| format!("bad round `{b}`"))?;
    if a == 0 || b > MAX_ROUND || a > b {
        return Err(format!("round range must lie within 1..{MAX_ROUND}"));
    }
    Ok(a..=b)
}

struct Ctx {
    global: Global,
    config: Config,
}

impl Ctx {
    fn seed(&self) -> Result<u64> {
        self.global.seed.ok_or_else(|| anyhow!("--seed is required for this command"))
    }

    fn out(&self) -> Result<&Path> {
        self.global.out.as_deref().ok_or_else(|| anyhow!("--out is required for this command"))
    }

    fn rounds(&self) -> Vec<u8> {
        self.global.rounds.clone().unwrap_or(1..=1).collect()
    }

    fn workers(&self) -> Result<usize> {
        Ok(self.config.get("run.workers")?)
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.global.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

fn build_config(global: &Global) -> Result<Config> {
    let mut config = Config::default();
    if let Some(path) = &global.config {
        config.merge_file(path)?;
    }
    for o in &global.overrides {
        config.set_assignment(o)?;
    }
    if let Some(w) = global.workers {
        config.set("run.workers", &w.to_string())?;
    }
    Ok(config)
}

fn load_bank(path: &Path) -> Result<Arc<NetBank>> {
    Ok(Arc::new(NetBank::load(path).with_context(|| format!("loading networks from {}", path.display()))?))
}

fn load_encoder(path: &Path) -> Result<Arc<HistoryEncoder>> {
    Ok(Arc::new(HistoryEncoder::load(path).with_context(|| format!("loading encoder {}", path.display()))?))
}

fn resolve_agents(s: &str) -> Result<([Agent; 4], [String; 4])> {
    let specs: [AgentSpec; 4] = parse_agent_mix(s)?;
    let names = specs.each_ref().map(|s| s.to_string());
    let mut agents = Vec::with_capacity(4);
    for spec in &specs {
        agents.push(Agent::load(spec)?);
    }
    Ok((agents.try_into().expect("four agents"), names))
}

fn train_dqn(ctx: &Ctx, total: Option<u64>, history: Option<&Path>) -> Result<()> {
    let seed = ctx.seed()?;
    let out = ctx.out()?;
    let mut config = ctx.config.clone();
    if let Some(t) = total {
        config.set("train.rounds_total", &t.to_string())?;
    }
    let history = history.map(load_encoder).transpose()?;
    let configs: Vec<TrainConfig> =
        ctx.rounds().into_iter().map(|r| TrainConfig::from_config(&config, r, seed)).collect::<Result<_, _>>()?;
    for cfg in &configs {
        let setup = TrainSetup { history: history.clone(), out: Some(out.to_path_buf()), ..Default::default() };
        let res = train_round(cfg, &setup)?;
        let last = res.progress.last().map_or(0.0, |p| p.window_accuracy);
        ctx.say(format!("round {}: {} rounds, last window accuracy {last:.4}", cfg.round, cfg.total_rounds));
    }
    Ok(())
}

fn retrain(ctx: &Ctx, warm: &Path, epsilon_start: Option<f64>, opponents: Option<&str>, total: Option<u64>) -> Result<()> {
    let seed = ctx.seed()?;
    let out = ctx.out()?;
    let mut config = ctx.config.clone();
    if let Some(e) = epsilon_start {
        config.set("retrain.epsilon_start", &e.to_string())?;
    }
    if let Some(o) = opponents {
        config.set("retrain.opponents", o)?;
    }
    if let Some(t) = total {
        config.set("train.rounds_total", &t.to_string())?;
    }
    let eps = config.raw("retrain.epsilon_start")?.to_string();
    config.set("train.epsilon_start", &eps)?;
    let specs: Vec<AgentSpec> = config
        .raw("retrain.opponents")?
        .split(',')
        .map(|s| s.parse::<AgentSpec>())
        .collect::<Result<_, _>>()?;
    if specs.len() >= 4 {
        bail!("at most three opponents, got {}", specs.len());
    }
    let opponents: Vec<Agent> = specs.iter().map(Agent::load).collect::<Result<_, _>>()?;
    let bank = load_bank(warm)?;
    let mut jobs: Vec<(TrainConfig, RoundNets)> = Vec::new();
    for r in ctx.rounds() {
        let cfg = TrainConfig::from_config(&config, r, seed)?;
        let nets = bank.get(r).cloned().ok_or_else(|| anyhow!("{} has no networks for round {r}", warm.display()))?;
        jobs.push((cfg, nets));
    }
    for (cfg, nets) in jobs {
        let setup = TrainSetup {
            warm_start: Some(nets),
            opponents: opponents.clone(),
            history: None,
            out: Some(out.to_path_buf()),
        };
        let res = train_round(&cfg, &setup)?;
        if let Some(p) = res.progress.last() {
            ctx.say(format!(
                "round {}: last window accuracy {:.4}, seats {:?}",
                cfg.round,
                p.window_accuracy,
                p.seats().map(|a| (a * 1e4).round() / 1e4)
            ));
        }
    }
    Ok(())
}

fn train_history_cmd(ctx: &Ctx, policy: Option<&Path>, hidden: Option<&str>) -> Result<()> {
    let seed = ctx.seed()?;
    let out = ctx.out()?;
    let mut config = ctx.config.clone();
    if let Some(h) = hidden {
        config.set("history.hidden_sizes", h)?;
    }
    let cfg = HistoryStageConfig::from_config(&config, ctx.rounds(), seed)?;
    let bank = policy.map(load_bank).transpose()?;
    for res in train_history_stage(&cfg, bank.as_ref(), Some(out))? {
        ctx.say(format!("round {} hidden {}: final loss {:.6}", res.round, res.hidden, res.trace.final_loss()));
    }
    Ok(())
}

fn train_estimator_cmd(ctx: &Ctx, policy: Option<&Path>, history: Option<&Path>) -> Result<()> {
    let seed = ctx.seed()?;
    let out = ctx.out()?;
    let cfg = EstimatorStageConfig::from_config(&ctx.config, ctx.rounds(), seed)?;
    let bank = policy.map(load_bank).transpose()?;
    let history = history.map(load_encoder).transpose()?;
    for res in train_estimator_stage(&cfg, bank.as_ref(), history.as_ref(), Some(out))? {
        ctx.say(format!("round {}: {} samples, final loss {:.6}", res.round, res.samples, res.trace.final_loss()));
    }
    Ok(())
}

fn eval_accuracy_cmd(ctx: &Ctx, agents: &str, round: Option<u8>, n: Option<u64>) -> Result<()> {
    let seed = ctx.seed()?;
    let rounds = match round {
        Some(r) if (1..=MAX_ROUND).contains(&r) => vec![r],
        Some(r) => bail!("round {r} outside 1..{MAX_ROUND}"),
        None => ctx.rounds(),
    };
    let mut config = ctx.config.clone();
    if let Some(n) = n {
        config.set("eval.rounds_per_position", &n.to_string())?;
    }
    let n = config.positive("eval.rounds_per_position")?;
    let workers = ctx.workers()?;
    let (agents, names) = resolve_agents(agents)?;
    for &r in &rounds {
        for a in &agents {
            a.validate(r)?;
        }
    }
    for r in rounds {
        let report = eval_accuracy(&agents, &names, r, n, seed, workers)?;
        let csv = accuracy_csv(&report)?;
        match &ctx.global.out {
            Some(dir) => write_text(&dir.join(format!("accuracy_round_{r:02}.csv")), &csv)?,
            None if !ctx.global.quiet => print!("{csv}"),
            None => {}
        }
        let pos = report.positions.map(|t| format!("{:.4}", t.accuracy()));
        ctx.say(format!("round {r}: accuracy {:.4} ± {:.4}, by position {pos:?}", report.accuracy(), report.overall().half_width()));
        if ctx.global.json {
            println!("{}", report.summary_json());
        }
    }
    Ok(())
}

fn eval_winshare_cmd(ctx: &Ctx, agents: &str, games: Option<u64>, max_round: u8) -> Result<()> {
    let seed = ctx.seed()?;
    if !(1..=MAX_ROUND).contains(&max_round) {
        bail!("--max-round must lie within 1..{MAX_ROUND}");
    }
    let mut config = ctx.config.clone();
    if let Some(g) = games {
        config.set("eval.games", &g.to_string())?;
    }
    let games = config.positive("eval.games")?;
    let (agents, names) = resolve_agents(agents)?;
    let report = eval_winning_share(&agents, &names, games, max_round, seed, ctx.workers()?)?;
    let csv = share_csv(&report)?;
    match &ctx.global.out {
        Some(dir) => write_text(&dir.join(format!("winshare_r{max_round:02}.csv")), &csv)?,
        None if !ctx.global.quiet => print!("{csv}"),
        None => {}
    }
    ctx.say(format!("shares {:?}", report.shares().map(|s| (s * 1e4).round() / 1e4)));
    if ctx.global.json {
        println!("{}", report.summary_json());
    }
    Ok(())
}

fn gen_plot_data(ctx: &Ctx, family: &str, inputs: &[PathBuf]) -> Result<()> {
    let read = |p: &PathBuf| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    let single = || -> Result<&PathBuf> {
        match inputs {
            [one] => Ok(one),
            _ => bail!("{family} takes exactly one input file"),
        }
    };
    let table = match family {
        "fig2" => training_curve_plot(&read_progress(single()?)?)?,
        "fig3" => {
            let reports = inputs.iter().map(|p| Ok(parse_accuracy_csv(&read(p)?)?)).collect::<Result<Vec<_>>>()?;
            round_curve_plot(&reports)?
        }
        "fig4" => position_curve_plot(&parse_accuracy_csv(&read(single()?)?)?)?,
        "fig12" => share_bars_plot(&parse_share_csv(&read(single()?)?)?)?,
        other => bail!("unknown plot family `{other}`; expected fig2, fig3, fig4 or fig12"),
    };
    match &ctx.global.out {
        Some(dir) => write_text(&dir.join(format!("{family}.csv")), &table)?,
        None => print!("{table}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = build_config(&cli.global)?;
    let ctx = Ctx { global: cli.global, config };
    match &cli.command {
        Command::TrainDqn { total, history } => train_dqn(&ctx, *total, history.as_deref()),
        Command::Retrain { warm, epsilon_start, opponents, total } => {
            retrain(&ctx, warm, *epsilon_start, opponents.as_deref(), *total)
        }
        Command::TrainHistory { policy, hidden } => train_history_cmd(&ctx, policy.as_deref(), hidden.as_deref()),
        Command::TrainEstimator { policy, history } => train_estimator_cmd(&ctx, policy.as_deref(), history.as_deref()),
        Command::EvalAccuracy { agents, round, n } => eval_accuracy_cmd(&ctx, agents, *round, *n),
        Command::EvalWinshare { agents, games, max_round } => eval_winshare_cmd(&ctx, agents, *games, *max_round),
        Command::InspectCheckpoint { path } => {
            print!("{}", inspect(path)?);
            Ok(())
        }
        Command::GenPlotData { family, inputs } => gen_plot_data(&ctx, family, inputs),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
