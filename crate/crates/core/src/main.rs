use clap::{Args, Parser, Subcommand};
use macsim::analysis::{
    expected_r1, expected_r2, instantaneous_coordination, mean_instantaneous_coordination,
    optimal_r,
};
use macsim::config::{ConfigBuilder, ParsedConfig, RunManifest};
use macsim::export::{
    export_trace, load_qtables, read_traces_jsonl, render_msc, snapshot_qtables,
    write_learning_curve, write_traces_jsonl,
};
use macsim::trainer::{eval_episode, monte_carlo_returns, ExperimentResult, Grid};
use macsim::{AgentKind, EnvConfig, Exec, QTables};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "macsim",
    version,
    about = "Learn MAC signaling and channel access by self-play"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train learners over n_rep sessions and write curves, tables and traces.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate a Q-table snapshot greedily.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        tables: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo return of a hand-written UE policy.
    Baseline {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// expert, pi1 or pi2
        #[arg(long, default_value = "expert")]
        agent: String,
        #[arg(long, default_value_t = 100_000)]
        episodes: usize,
    },
    /// Closed-form single-UE expected returns.
    Oracle {
        #[arg(long)]
        bler: f64,
        /// One or more comma-separated episode lengths.
        #[arg(long, value_delimiter = ',')]
        t_max: Vec<usize>,
    },
    /// Instantaneous Coordination of traces written by `train`.
    Ic {
        #[arg(long)]
        traces: PathBuf,
        /// UE index; omitted means the mean over all UEs.
        #[arg(long)]
        ue: Option<usize>,
    },
    /// Train on one scenario, evaluate on another.
    Generalize {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        eval_num_ues: Option<usize>,
        #[arg(long)]
        eval_bler: Option<f64>,
        #[arg(long)]
        eval_sdus: Option<usize>,
        #[arg(long)]
        eval_t_max: Option<usize>,
    },
    /// Cartesian hyper-parameter sweep; prints a CSV table.
    Grid {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        f_eps_values: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        memory_lens: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play one greedy episode and print it as a sequence chart.
    Trace {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Snapshot to play; without it `--agent` selects a built-in policy.
        #[arg(long)]
        tables: Option<PathBuf>,
        #[arg(long, default_value = "expert")]
        agent: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// key = value configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    num_ues: Option<usize>,
    #[arg(long)]
    sdus: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    bler: Option<f64>,
    #[arg(long)]
    buffer_capacity: Option<usize>,
    /// full or empty
    #[arg(long)]
    start_buffer: Option<String>,
    #[arg(long)]
    arrival_prob: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    f_eps: Option<f64>,
    #[arg(long)]
    eps_floor: Option<f64>,
    #[arg(long)]
    n_tr: Option<usize>,
    #[arg(long)]
    n_eval: Option<usize>,
    #[arg(long)]
    n_rep: Option<usize>,
    #[arg(long)]
    memory_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run sessions one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

impl ConfigArgs {
    fn load(&self) -> macsim::Result<ParsedConfig> {
        let mut b = ConfigBuilder::new();
        if let Some(path) = &self.config {
            b.read_file(path)?;
        }
        let flags: [(&str, Option<String>); 16] = [
            ("num_ues", self.num_ues.map(|v| v.to_string())),
            ("sdus_per_ue", self.sdus.map(|v| v.to_string())),
            ("t_max", self.t_max.map(|v| v.to_string())),
            ("bler", self.bler.map(|v| v.to_string())),
            (
                "buffer_capacity",
                self.buffer_capacity.map(|v| v.to_string()),
            ),
            ("start_buffer", self.start_buffer.clone()),
            ("arrival_prob", self.arrival_prob.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("f_eps", self.f_eps.map(|v| v.to_string())),
            ("eps_floor", self.eps_floor.map(|v| v.to_string())),
            ("n_tr", self.n_tr.map(|v| v.to_string())),
            ("n_eval", self.n_eval.map(|v| v.to_string())),
            ("n_rep", self.n_rep.map(|v| v.to_string())),
            ("memory_len", self.memory_len.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                b.set(k, &v)?;
            }
        }
        b.build()
    }

    /// Experiment subcommands refuse to run without an explicit seed.
    fn load_seeded(&self) -> Result<ParsedConfig, String> {
        let p = self.load().map_err(|e| e.to_string())?;
        if !p.seed_given {
            return Err("a seed is required: pass --seed or set `seed` in the config".into());
        }
        Ok(p)
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }
}

fn agent_kind(label: &str) -> Result<AgentKind, String> {
    AgentKind::from_label(label).ok_or_else(|| format!("unknown agent `{label}`"))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let f = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| e.to_string())?;
    w.write_all(b"\n").map_err(|e| e.to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>, String> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn print_experiment(res: &ExperimentResult) {
    for s in &res.sessions {
        println!("session {:>3}: mean eval R = {:.4}", s.session, s.mean_eval);
    }
    let a = res.aggregate;
    println!(
        "mean R = {:.4} +/- {:.4} (std err, n={}), best = {:.4}",
        a.mean, a.std_err, a.n, a.best
    );
}

fn train(cfg: &ConfigArgs, out: &Path) -> Result<(), String> {
    let p = cfg.load_seeded()?;
    let mut manifest = RunManifest::new(&p.env, &p.train);
    let res = macsim::trainer::run_experiment_with(&p.env, &p.train, cfg.exec())
        .map_err(|e| e.to_string())?;
    print_experiment(&res);
    manifest.finish();

    fs::create_dir_all(out).map_err(|e| e.to_string())?;
    let hash = manifest.config_hash.clone();
    write_learning_curve(create(&out.join("curve.csv"))?, &hash, &res.sessions)
        .map_err(|e| e.to_string())?;
    for s in &res.sessions {
        snapshot_qtables(
            create(&out.join(format!("qtables_session{}.json", s.session)))?,
            &s.tables,
            &hash,
        )
        .map_err(|e| e.to_string())?;
    }
    write_traces_jsonl(
        create(&out.join("eval_traces.jsonl"))?,
        res.sessions.iter().flat_map(|s| &s.traces),
    )
    .map_err(|e| e.to_string())?;
    write_json(&out.join("summary.json"), &res.aggregate)?;
    write_json(&out.join("manifest.json"), &manifest)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn eval(cfg: &ConfigArgs, tables: &Path, out: Option<&Path>) -> Result<(), String> {
    let p = cfg.load_seeded()?;
    let f = File::open(tables).map_err(|e| format!("{}: {e}", tables.display()))?;
    let loaded =
        load_qtables(BufReader::new(f), Some(p.train.memory_len)).map_err(|e| e.to_string())?;
    let mut rng = macsim::exec::stream_rng(p.train.seed, 0);
    let mut traces = Vec::with_capacity(p.train.n_eval);
    for _ in 0..p.train.n_eval {
        traces.push(
            eval_episode(&p.env, &p.train, &loaded.tables, &mut rng).map_err(|e| e.to_string())?,
        );
    }
    let rets: Vec<f64> = traces.iter().map(|t| t.total_return).collect();
    let a = macsim::trainer::Aggregate::from_values(&rets);
    println!(
        "tables trained under {}; mean R = {:.4} +/- {:.4} over {} episodes",
        loaded.config_hash, a.mean, a.std_err, a.n
    );
    if let Ok(ic) = mean_instantaneous_coordination(&traces) {
        println!("mean IC = {ic:.5} nats");
    }
    if let Some(path) = out {
        write_traces_jsonl(create(path)?, &traces).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn baseline(cfg: &ConfigArgs, agent: &str, episodes: usize) -> Result<(), String> {
    let mut p = cfg.load_seeded()?;
    p.train.agent_kind = agent_kind(agent)?;
    if p.train.agent_kind == AgentKind::Learner {
        return Err("baseline needs a hand-written agent: expert, pi1 or pi2".into());
    }
    let stats = monte_carlo_returns(&p.env, &p.train, &QTables::new(0), episodes, cfg.exec())
        .map_err(|e| e.to_string())?;
    println!(
        "{agent}: mean R = {:.5} +/- {:.5} (std err) over {} episodes",
        stats.mean, stats.std_err, stats.episodes
    );
    if p.env.num_ues == 1 && p.env.sdus_per_ue == 1 {
        let (b, t) = (p.env.bler, p.env.t_max);
        println!(
            "closed form: R1 = {:.5}, R2 = {:.5}, R* = {:.5}",
            expected_r1(b, t),
            expected_r2(b, t),
            optimal_r(b, t)
        );
    }
    Ok(())
}

fn oracle(bler: f64, t_max: &[usize]) -> Result<(), String> {
    if !(0.0..=1.0).contains(&bler) {
        return Err(format!("bler {bler} is outside [0, 1]"));
    }
    println!("t_max,bler,r1,r2,r_opt");
    for &t in t_max {
        println!(
            "{t},{bler},{},{},{}",
            expected_r1(bler, t),
            expected_r2(bler, t),
            optimal_r(bler, t)
        );
    }
    Ok(())
}

fn ic(path: &Path, ue: Option<usize>) -> Result<(), String> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let traces = read_traces_jsonl(BufReader::new(f)).map_err(|e| e.to_string())?;
    let v = match ue {
        Some(u) => instantaneous_coordination(&traces, u),
        None => mean_instantaneous_coordination(&traces),
    }
    .map_err(|e| e.to_string())?;
    let mean_r = traces.iter().map(|t| t.total_return).sum::<f64>() / traces.len() as f64;
    println!(
        "IC = {v:.6} nats over {} episodes (mean R = {mean_r:.4})",
        traces.len()
    );
    Ok(())
}

fn generalize(
    cfg: &ConfigArgs,
    num_ues: Option<usize>,
    bler: Option<f64>,
    sdus: Option<usize>,
    t_max: Option<usize>,
) -> Result<(), String> {
    let p = cfg.load_seeded()?;
    let mut eval_env: EnvConfig = p.env.clone();
    if let Some(v) = num_ues {
        eval_env.num_ues = v;
    }
    if let Some(v) = bler {
        eval_env.bler = v;
    }
    if let Some(v) = sdus {
        eval_env.sdus_per_ue = v;
        eval_env.buffer_capacity = eval_env.buffer_capacity.max(v);
    }
    if let Some(v) = t_max {
        eval_env.t_max = v;
    }
    let res = macsim::trainer::run_generalization_with(&p.env, &eval_env, &p.train, cfg.exec())
        .map_err(|e| e.to_string())?;
    print_experiment(&res);
    Ok(())
}

fn grid(
    cfg: &ConfigArgs,
    alphas: Vec<f64>,
    gammas: Vec<f64>,
    f_eps: Vec<f64>,
    mems: Vec<usize>,
    out: Option<&Path>,
) -> Result<(), String> {
    let p = cfg.load_seeded()?;
    let base = Grid::around(&p.train);
    let pick = |v: Vec<f64>, d: Vec<f64>| if v.is_empty() { d } else { v };
    let g = Grid {
        alpha: pick(alphas, base.alpha),
        gamma: pick(gammas, base.gamma),
        f_eps: pick(f_eps, base.f_eps),
        memory_len: if mems.is_empty() {
            base.memory_len
        } else {
            mems
        },
    };
    let rows = macsim::trainer::grid_search_with(&p.env, &p.train, &g, cfg.exec())
        .map_err(|e| e.to_string())?;
    let mut text = format!(
        "# config_hash={}\nalpha,gamma,f_eps,memory_len,mean,std_err,best\n",
        p.hash()
    );
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.alpha,
            r.gamma,
            r.f_eps,
            r.memory_len,
            r.aggregate.mean,
            r.aggregate.std_err,
            r.aggregate.best
        ));
    }
    print!("{text}");
    if let Some(path) = out {
        fs::write(path, text).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn trace(cfg: &ConfigArgs, tables: Option<&Path>, agent: &str, json: bool) -> Result<(), String> {
    let mut p = cfg.load().map_err(|e| e.to_string())?;
    let q = match tables {
        Some(path) => {
            let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
            p.train.agent_kind = AgentKind::Learner;
            let loaded = load_qtables(BufReader::new(f), None).map_err(|e| e.to_string())?;
            p.train.memory_len = loaded.tables.memory_len;
            loaded.tables
        }
        None => {
            p.train.agent_kind = agent_kind(agent)?;
            QTables::new(p.train.memory_len)
        }
    };
    let mut rng = macsim::exec::stream_rng(p.train.seed, 0);
    let mut tr = eval_episode(&p.env, &p.train, &q, &mut rng).map_err(|e| e.to_string())?;
    tr.meta.config_hash = p.hash();
    tr.meta.seed = p.train.seed;
    if json {
        println!("{}", export_trace(&tr).map_err(|e| e.to_string())?);
    } else {
        print!("{}", render_msc(&tr));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { cfg, out } => train(&cfg, &out),
        Command::Eval { cfg, tables, out } => eval(&cfg, &tables, out.as_deref()),
        Command::Baseline {
            cfg,
            agent,
            episodes,
        } => baseline(&cfg, &agent, episodes),
        Command::Oracle { bler, t_max } => oracle(bler, &t_max),
        Command::Ic { traces, ue } => ic(&traces, ue),
        Command::Generalize {
            cfg,
            eval_num_ues,
            eval_bler,
            eval_sdus,
            eval_t_max,
        } => generalize(&cfg, eval_num_ues, eval_bler, eval_sdus, eval_t_max),
        Command::Grid {
            cfg,
            alphas,
            gammas,
            f_eps_values,
            memory_lens,
            out,
        } => grid(
            &cfg,
            alphas,
            gammas,
            f_eps_values,
            memory_lens,
            out.as_deref(),
        ),
        Command::Trace {
            cfg,
            tables,
            agent,
            json,
        } => trace(&cfg, tables.as_deref(), &agent, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
