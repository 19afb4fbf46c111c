use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use speedbal::flownet::dump_network;
use speedbal::oracle::{brute_force_energy, yds_energy, OracleMethod};
use speedbal::timetable::Segment;
use speedbal::verify::{FeasibilityVerdict, KktVerdict};
use speedbal::{
    bal_solve_observed, build_schedule, check_feasibility, check_schedule_kkt, mbal_solve,
    validate_instance, BudgetJob, EnergyBudgetProblem, Error, Instance, Schedule, SolverConfig,
};

#[derive(Parser)]
#[command(
    name = "speedbal",
    version,
    about = "Energy-optimal speed scaling on parallel machines"
)]
struct Cli {
    #[command(flatten)]
    opts: Options,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Options {
    /// Override the instance's power exponent.
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Override the instance's machine count.
    #[arg(long, global = true)]
    machines: Option<usize>,
    /// Speed search tolerance, relative to the initial upper bound.
    #[arg(long, global = true, allow_negative_numbers = true)]
    tol_speed: Option<f64>,
    /// Relative tolerance for flow saturation and feasibility.
    #[arg(long, global = true, allow_negative_numbers = true)]
    tol_flow: Option<f64>,
    /// Write the per-step trace as JSON to stderr.
    #[arg(long, global = true)]
    trace: bool,
    /// Write every critical-speed network and flow to stderr.
    #[arg(long, global = true)]
    dump_network: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Gantt,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum-energy schedule for an instance with deadlines.
    Solve { instance: PathBuf },
    /// Minimum makespan under an energy budget; jobs carry no deadlines.
    Mbal {
        #[arg(long, allow_negative_numbers = true)]
        energy: f64,
        problem: PathBuf,
    },
    /// Check a schedule for feasibility and optimality (arguments in either order).
    Verify {
        first: PathBuf,
        second: PathBuf,
        /// Relative tolerance for the optimality properties.
        #[arg(long, default_value_t = 1e-6, allow_negative_numbers = true)]
        tol_kkt: f64,
        /// Relative tolerance for the feasibility checks.
        #[arg(long, default_value_t = 1e-9, allow_negative_numbers = true)]
        tol_feasibility: f64,
    },
    #[command(hide = true)]
    Oracle {
        #[arg(long, value_enum, default_value_t = Method::Yds)]
        method: Method,
        #[arg(long, default_value_t = 1e-7)]
        resolution: f64,
        instance: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Yds,
    Brute,
}

enum Failure {
    Input(String, String),
    Solver(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

fn input(code: &str, detail: impl ToString) -> Failure {
    Failure::Input(code.into(), detail.to_string())
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| input("Io", e))?;
        s
    } else {
        std::fs::read_to_string(path)
            .map_err(|e| input("Io", format!("{}: {e}", path.display())))?
    };
    serde_json::from_str(&text).map_err(|e| input("Parse", format!("{}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(value: Value, what: &str) -> Result<T, Failure> {
    serde_json::from_value(value).map_err(|e| input("Parse", format!("{what}: {e}")))
}

impl Options {
    fn config(&self) -> Result<SolverConfig, Failure> {
        let mut cfg = SolverConfig::default();
        if let Some(t) = self.tol_speed {
            cfg.speed_tolerance = t;
        }
        if let Some(t) = self.tol_flow {
            cfg.flow_tolerance = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn instance(&self, value: Value) -> Result<Instance, Failure> {
        let mut inst: Instance = parse(value, "instance")?;
        if let Some(a) = self.alpha {
            inst.alpha = a;
        }
        if let Some(m) = self.machines {
            inst.machines = m;
        }
        Ok(validate_instance(inst)?)
    }
}

#[derive(Serialize)]
struct TraceStep<'a> {
    step: usize,
    s_crit: f64,
    critical_jobs: &'a [String],
    tight_intervals: &'a [usize],
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    energy: f64,
    makespan: f64,
    segments: &'a [Segment],
    speeds: BTreeMap<&'a str, f64>,
}

#[derive(Deserialize)]
struct BudgetInput {
    alpha: f64,
    machines: usize,
    jobs: Vec<BudgetJob>,
}

#[derive(Serialize)]
struct MbalOutput<'a> {
    x_star: f64,
    budget: f64,
    energy: f64,
    schedule: &'a Schedule,
}

#[derive(Serialize)]
struct VerifyOutput {
    passed: bool,
    energy: f64,
    feasibility: FeasibilityVerdict,
    kkt: KktVerdict,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn speeds_by_id<'a>(inst: &'a Instance, speeds: &[f64]) -> BTreeMap<&'a str, f64> {
    inst.jobs
        .iter()
        .map(|j| j.id.as_str())
        .zip(speeds.iter().copied())
        .collect()
}

fn job_symbol(k: usize) -> char {
    const SYMBOLS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    SYMBOLS.get(k).map_or('#', |&b| b as char)
}

const GANTT_WIDTH: usize = 64;

/// One row per machine; each column shows the job running at its midpoint.
fn gantt(schedule: &Schedule, ids: &[&str]) -> String {
    let symbol_of = |id: &str| ids.iter().position(|&x| x == id).map_or('?', job_symbol);
    let machines = schedule
        .segments
        .iter()
        .map(|s| s.machine)
        .max()
        .unwrap_or(0);
    let start = schedule
        .segments
        .iter()
        .map(|s| s.start)
        .fold(f64::INFINITY, f64::min);
    let end = schedule.makespan;
    let mut out = String::new();
    if machines == 0 || end <= start {
        out.push_str("(empty schedule)\n");
        return out;
    }
    let step = (end - start) / GANTT_WIDTH as f64;
    let _ = writeln!(
        out,
        "       {:<w$}{}",
        format!("{start}"),
        end,
        w = GANTT_WIDTH
    );
    for m in 1..=machines {
        let row: String = (0..GANTT_WIDTH)
            .map(|c| {
                let t = start + (c as f64 + 0.5) * step;
                schedule
                    .segments
                    .iter()
                    .find(|s| s.machine == m && s.start <= t && t < s.end)
                    .map_or('.', |s| symbol_of(&s.job))
            })
            .collect();
        let _ = writeln!(out, "M{m:<4} |{row}|");
    }
    let mut speeds: BTreeMap<usize, f64> = BTreeMap::new();
    for s in &schedule.segments {
        if let Some(k) = ids.iter().position(|&x| x == s.job) {
            speeds.entry(k).or_insert(s.speed);
        }
    }
    for (k, speed) in speeds {
        let _ = writeln!(out, "  {} = {} (speed {speed})", job_symbol(k), ids[k]);
    }
    let _ = writeln!(out, "energy {}", schedule.energy);
    out
}

fn run(cli: Cli) -> Result<(String, bool), Failure> {
    let opts = &cli.opts;
    match &cli.command {
        Command::Solve { instance } => {
            let inst = opts.instance(read_json(instance)?)?;
            let cfg = opts.config()?;
            let mut dump = String::new();
            let (speeds, trace) = bal_solve_observed(&inst, &cfg, |crit, _| {
                if opts.dump_network {
                    let step = dump.matches("# step").count();
                    let _ = writeln!(dump, "# step {step} speed {}", crit.speed);
                    dump.push_str(&dump_network(&crit.network, &crit.flow, &inst.jobs));
                }
            })?;
            if opts.dump_network {
                eprint!("{dump}");
            }
            if opts.trace {
                let steps: Vec<TraceStep> = trace
                    .iter()
                    .map(|s| TraceStep {
                        step: s.step,
                        s_crit: s.s_crit,
                        critical_jobs: &s.critical_jobs,
                        tight_intervals: &s.tight_intervals,
                    })
                    .collect();
                eprint!("{}", to_json(&steps));
            }
            let (schedule, _) = build_schedule(&inst, &speeds, &cfg)?;
            let text = match opts.format {
                Format::Json => to_json(&SolveOutput {
                    energy: schedule.energy,
                    makespan: schedule.makespan,
                    segments: &schedule.segments,
                    speeds: speeds_by_id(&inst, &speeds.speeds),
                }),
                Format::Gantt => {
                    let ids: Vec<&str> = inst.jobs.iter().map(|j| j.id.as_str()).collect();
                    gantt(&schedule, &ids)
                }
            };
            Ok((text, true))
        }
        Command::Mbal { energy, problem } => {
            let mut raw: BudgetInput = parse(read_json(problem)?, "problem")?;
            if let Some(a) = opts.alpha {
                raw.alpha = a;
            }
            if let Some(m) = opts.machines {
                raw.machines = m;
            }
            let problem = EnergyBudgetProblem {
                jobs: raw.jobs,
                machines: raw.machines,
                alpha: raw.alpha,
                budget: *energy,
            };
            let res = mbal_solve(&problem, &opts.config()?)?;
            let text = match opts.format {
                Format::Json => to_json(&MbalOutput {
                    x_star: res.makespan,
                    budget: *energy,
                    energy: res.schedule.energy,
                    schedule: &res.schedule,
                }),
                Format::Gantt => {
                    let ids: Vec<&str> = problem.jobs.iter().map(|j| j.id.as_str()).collect();
                    format!("makespan {}\n{}", res.makespan, gantt(&res.schedule, &ids))
                }
            };
            Ok((text, true))
        }
        Command::Verify {
            first,
            second,
            tol_kkt,
            tol_feasibility,
        } => {
            let (a, b) = (read_json(first)?, read_json(second)?);
            let (sched, inst) = if a.get("segments").is_some() {
                (a, b)
            } else {
                (b, a)
            };
            if sched.get("segments").is_none() {
                return Err(input("Parse", "neither file is a schedule (no `segments`)"));
            }
            let schedule: Schedule = parse(sched, "schedule")?;
            let inst = opts.instance(inst)?;
            let tol_ok = |t: f64| t > 0.0 && t.is_finite();
            if !tol_ok(*tol_kkt) || !tol_ok(*tol_feasibility) {
                return Err(Error::BadTolerance.into());
            }
            let schedule = Schedule::from_segments(schedule.segments, inst.alpha);
            let feasibility = check_feasibility(&schedule, &inst, *tol_feasibility);
            let kkt = check_schedule_kkt(&inst, &schedule, *tol_kkt);
            let passed = feasibility.passed && kkt.passed();
            let out = VerifyOutput {
                passed,
                energy: schedule.energy,
                feasibility,
                kkt,
            };
            Ok((to_json(&out), passed))
        }
        Command::Oracle {
            method,
            resolution,
            instance,
        } => {
            let inst = opts.instance(read_json(instance)?)?;
            let res = match method {
                Method::Yds => {
                    if inst.machines != 1 {
                        return Err(input(
                            "BadMachines",
                            "the yds oracle needs exactly one machine",
                        ));
                    }
                    yds_energy(&inst.jobs, inst.alpha)
                }
                Method::Brute => brute_force_energy(&inst, *resolution)?,
            };
            #[derive(Serialize)]
            struct Out<'a> {
                method: OracleMethod,
                energy: f64,
                speeds: BTreeMap<&'a str, f64>,
            }
            let out = Out {
                method: res.method,
                energy: res.energy,
                speeds: speeds_by_id(&inst, &res.speeds),
            };
            Ok((to_json(&out), true))
        }
    }
}

fn report(code: &str, detail: &str) {
    eprintln!("{}", serde_json::json!({ "error": code, "detail": detail }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("Usage", e.render().to_string().trim());
            return ExitCode::from(2);
        }
    };
    let output = cli.opts.output.clone();
    match run(cli) {
        Ok((text, passed)) => {
            let written = match &output {
                Some(path) => std::fs::write(path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                report("Io", &e.to_string());
                return ExitCode::from(2);
            }
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Input(code, detail)) => {
            report(&code, &detail);
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            report(e.code(), &e.to_string());
            ExitCode::from(if e.is_internal() { 3 } else { 2 })
        }
    }
}
