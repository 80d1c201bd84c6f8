use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pldispatch::emit::{self, Manifest};
use pldispatch::io::{self, ListsFile, ScenarioSpec, SolutionFile};
use pldispatch::sim::{self, ServiceDistribution, SimConfig};
use pldispatch::sweep::{self, SweepConfig, DEFAULT_TIME_LIMIT_SECS};
use pldispatch::{mps, report, Error, Result};
use pldispatch_core::policy::{enumerate_oracle_capped, region_automorphisms, Policy};
use pldispatch_core::{
    build_model, closest_lists, evaluate_lists, local_search, scenario_library, similarity, solve_lp, solve_mip,
    BnbParams, BranchRule, CaseId, MdpModel, ModelKind, RegionId, SimplexParams, DEFAULT_ENUMERATION_CAP,
};

#[derive(Parser)]
#[command(name = "pldispatch", version, about = "Priority-list ambulance dispatch models and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    U,
    Pl,
    Pli,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::U => ModelKind::U,
            Model::Pl => ModelKind::PL,
            Model::Pli => ModelKind::PLI,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ListModel {
    Pl,
    Pli,
}

impl From<ListModel> for ModelKind {
    fn from(m: ListModel) -> Self {
        match m {
            ListModel::Pl => ModelKind::PL,
            ListModel::Pli => ModelKind::PLI,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Branching {
    Assignment,
    Fractional,
}

#[derive(Clone, Copy, ValueEnum)]
enum Service {
    Exponential,
    Lognormal,
}

#[derive(Args)]
struct SolverArgs {
    /// Absolute optimality gap (reward per stage).
    #[arg(long, default_value_t = 1e-6)]
    abs_gap: f64,
    #[arg(long, default_value_t = 1e-6)]
    rel_gap: f64,
    /// Wall-clock limit per model solve, seconds.
    #[arg(long, default_value_t = DEFAULT_TIME_LIMIT_SECS)]
    time_limit: f64,
    #[arg(long, default_value_t = 1_000_000)]
    node_limit: usize,
    #[arg(long, value_enum, default_value_t = Branching::Assignment)]
    branching: Branching,
}

impl SolverArgs {
    fn params(&self) -> BnbParams {
        BnbParams {
            abs_gap: self.abs_gap,
            rel_gap: self.rel_gap,
            node_limit: self.node_limit,
            time_limit_secs: Some(self.time_limit),
            branch_rule: match self.branching {
                Branching::Assignment => BranchRule::AssignmentRow,
                Branching::Fractional => BranchRule::MostFractional,
            },
            ..BnbParams::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a scenario file for a library region and arrival case.
    Build {
        #[arg(long)]
        region: RegionId,
        #[arg(long)]
        case: CaseId,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 4)]
        m: usize,
        /// Service-time units per arrival-rate time unit.
        #[arg(long)]
        time_scale: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve Model U, PL or PLI for a scenario.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
        /// Solution file to write.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the model in MPS format.
        #[arg(long)]
        mps: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Write a model in MPS format without solving it.
    ExportMps {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read an MPS file and solve its LP relaxation.
    SolveMps { file: PathBuf },
    /// Closest-ambulance lists, optionally improved by local search.
    Heuristic {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = ListModel::Pl)]
        kind: ListModel,
        #[arg(long)]
        local_search: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact gain of given priority lists.
    Evaluate { scenario: PathBuf, lists: PathBuf },
    /// Best lists by exhaustive enumeration (tiny instances only).
    Oracle {
        scenario: PathBuf,
        #[arg(long, required = true)]
        enumerate: bool,
        #[arg(long, value_enum, default_value_t = ListModel::Pl)]
        kind: ListModel,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gains and similarity of two solutions or list files.
    Compare {
        scenario: PathBuf,
        first: PathBuf,
        second: PathBuf,
        /// Count event-states uniformly instead of by occupation.
        #[arg(long)]
        unweighted: bool,
    },
    /// Simulate the dispatching induced by priority lists.
    Simulate {
        scenario: PathBuf,
        lists: PathBuf,
        #[arg(long, default_value_t = 20)]
        replications: usize,
        #[arg(long, default_value_t = 1e5)]
        horizon: f64,
        #[arg(long, default_value_t = 100.0)]
        warmup: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Service::Exponential)]
        service: Service,
        /// Coefficient of variation for lognormal service.
        #[arg(long, default_value_t = 1.0)]
        cv: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve library scenarios and write tables into a new run directory.
    Sweep {
        /// Glob over scenario ids, e.g. "R5-C2-*".
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Model::U, Model::Pl])]
        models: Vec<Model>,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
        #[arg(long, env = "PLDISPATCH_WORKERS", default_value_t = 1)]
        workers: usize,
        /// Single worker, for reproducible output.
        #[arg(long)]
        deterministic: bool,
        #[arg(long)]
        unweighted: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Optimal lists for region R5, case C2 beside the reference ones.
    Report {
        #[arg(long, value_enum, default_value_t = ListModel::Pl)]
        kind: ListModel,
        /// JSON output file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn write_json_out<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.into(), source })?;
    std::fs::write(path, text + "\n").map_err(|source| Error::Io { path: path.into(), source })
}

fn print_lists(lists: &pldispatch_core::PriorityLists) {
    for line in lists.describe() {
        println!("  {line}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build { region, case, lambda, m, time_scale, out } => {
            let spec = ScenarioSpec { time_scale, ..ScenarioSpec::builtin(region, case, lambda, m) };
            io::write_scenario_spec(&out, &spec)?;
            println!("wrote {} ({})", out.display(), spec.to_scenario()?.id);
        }
        Command::Solve { scenario, model, out, mps: mps_out, solver } => {
            let sc = io::read_scenario(&scenario)?;
            let problem = build_model(&sc, model.into())?;
            if let Some(p) = mps_out {
                std::fs::write(&p, mps::write_problem(&problem)).map_err(|source| Error::Io { path: p, source })?;
            }
            let rep = solve_mip(&problem, &solver.params())?;
            let file = SolutionFile::from_report(&problem, &rep);
            println!(
                "{} model {}: {:?}, objective {:.10} per stage ({:.6} per time unit), bound {:.10}, {} nodes",
                sc.id, rep.kind, rep.status, rep.objective, file.reward_per_time, rep.bound, rep.nodes
            );
            if let Some(l) = &rep.lists {
                print_lists(l);
            }
            if let Some(p) = out {
                io::write_solution(&p, &file)?;
            }
        }
        Command::ExportMps { scenario, model, out } => {
            let sc = io::read_scenario(&scenario)?;
            let problem = build_model(&sc, model.into())?;
            std::fs::write(&out, mps::write_problem(&problem))
                .map_err(|source| Error::Io { path: out.clone(), source })?;
            println!("wrote {} ({} columns, {} rows)", out.display(), problem.lp.num_cols(), problem.lp.num_rows());
        }
        Command::SolveMps { file } => {
            let text = std::fs::read_to_string(&file).map_err(|source| Error::Io { path: file.clone(), source })?;
            let model = mps::read_mps(&text)?;
            let sol = solve_lp(&model.lp, &SimplexParams::default())?;
            println!(
                "{}: {:?}, objective {:.12}, {} iterations ({} integer columns relaxed)",
                model.name,
                sol.status,
                sol.objective,
                sol.iterations,
                model.integer.len()
            );
        }
        Command::Heuristic { scenario, kind, local_search: ls, seed, out } => {
            let sc = io::read_scenario(&scenario)?;
            let kind: ModelKind = kind.into();
            let (lists, gain) = if ls {
                local_search(&sc, kind, seed)?
            } else {
                let l = closest_lists(&sc, kind);
                let g = evaluate_lists(&sc, &l)?;
                (l, g)
            };
            println!("{}: gain {:.10} per stage ({:.6} per time unit)", sc.id, gain.per_stage, gain.per_time());
            print_lists(&lists);
            if let Some(p) = out {
                io::write_lists(&p, &lists)?;
            }
        }
        Command::Evaluate { scenario, lists } => {
            let sc = io::read_scenario(&scenario)?;
            let l = io::read_lists_or_solution(&lists)?;
            let g = evaluate_lists(&sc, &l)?;
            println!("{}: gain {:.12} per stage ({:.6} per time unit)", sc.id, g.per_stage, g.per_time());
        }
        Command::Oracle { scenario, enumerate: _, kind, cap, out } => {
            let sc = io::read_scenario(&scenario)?;
            let r = enumerate_oracle_capped(&sc, kind.into(), cap)?;
            println!(
                "{}: best gain {:.12} over {} combinations ({} maximizers)",
                sc.id, r.gain.per_stage, r.evaluated, r.maximizers
            );
            print_lists(&r.lists);
            if let Some(p) = out {
                io::write_lists(&p, &r.lists)?;
            }
        }
        Command::Compare { scenario, first, second, unweighted } => {
            let sc = io::read_scenario(&scenario)?;
            let a = load_policy(&sc, &first)?;
            let b = load_policy(&sc, &second)?;
            let idle = a.kind == ModelKind::PLI || b.kind == ModelKind::PLI;
            let model = MdpModel::new(&sc, if idle { ModelKind::PLI } else { ModelKind::PL })?;
            let ga = pldispatch_core::policy::stationary(&model, &a.actions)?.gain;
            let gb = pldispatch_core::policy::stationary(&model, &b.actions)?.gain;
            let autos = region_automorphisms(&sc);
            let s_ab = similarity(&model, &a, &b, &autos, !unweighted)?;
            let s_ba = similarity(&model, &b, &a, &autos, !unweighted)?;
            let fmt = |s: Option<f64>| s.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
            println!("first  gain {:.12} per stage", ga.per_stage);
            println!("second gain {:.12} per stage", gb.per_stage);
            println!("similarity weighted by first {}, by second {}", fmt(s_ab.score), fmt(s_ba.score));
        }
        Command::Simulate { scenario, lists, replications, horizon, warmup, seed, service, cv, out } => {
            let sc = io::read_scenario(&scenario)?;
            let l = io::read_lists_or_solution(&lists)?;
            let config = SimConfig {
                horizon,
                warmup,
                replications,
                seed,
                service: match service {
                    Service::Exponential => ServiceDistribution::Exponential,
                    Service::Lognormal => ServiceDistribution::Lognormal { cv },
                },
            };
            let est = sim::simulate(&sc, &l, &config)?;
            match est.half_width {
                Some(h) => println!("reward per time unit {:.6} +/- {:.6} (95%)", est.mean, h),
                None => println!("reward per time unit {:.6}", est.mean),
            }
            if let Ok(g) = evaluate_lists(&sc, &l) {
                println!("analytical {:.6}", g.per_time());
            }
            println!("lost {:.4}%, idled {:.4}%", 100.0 * est.loss_fraction, 100.0 * est.idle_fraction);
            if let Some(p) = out {
                write_json_out(&p, &est)?;
            }
        }
        Command::Sweep { filter, models, out_dir, workers, deterministic, unweighted, solver } => {
            let workers = if deterministic { 1 } else { workers.max(1) };
            let scenarios = sweep::select(scenario_library(), filter.as_deref())?;
            let config = SweepConfig {
                models: models.into_iter().map(Into::into).collect(),
                filter,
                bnb: solver.params(),
                time_limit_secs: solver.time_limit,
                workers,
                weighted_similarity: !unweighted,
            };
            let result = sweep::sweep(&scenarios, &config)?;
            let manifest = Manifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: std::env::args().collect(),
                workers,
                scenarios: scenarios.len(),
                config: serde_json::to_value(config.echo()).expect("solver echo serializes"),
                files: Vec::new(),
            };
            let dir = emit::emit(&result, &out_dir, manifest)?;
            let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
            let conforming = result.rows.iter().filter(|r| r.conforms == Some(true)).count();
            println!("{} scenarios ({failed} failed), {conforming} conforming", result.rows.len());
            println!("wrote {}", dir.display());
        }
        Command::Report { kind, out, solver } => {
            let r = report::report_r5c2(kind.into(), &solver.params())?;
            print!("{}", r.render());
            if let Some(p) = out {
                write_json_out(&p, &r)?;
            }
        }
    }
    Ok(())
}

fn load_policy(sc: &pldispatch_core::Scenario, path: &Path) -> Result<Policy> {
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?)
            .map_err(|source| Error::Json { path: path.into(), source })?;
    if value.get("y_support").is_some() {
        return io::read_solution(path)?.policy(sc);
    }
    let lists = serde_json::from_value::<ListsFile>(value)
        .map_err(|source| Error::Json { path: path.into(), source })?
        .to_lists()?;
    let kind = if lists.kind == ModelKind::PLI { ModelKind::PLI } else { ModelKind::PL };
    Ok(Policy::from_lists(&MdpModel::new(sc, kind)?, &lists))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
