//! `selftimed` command-line front end.
//!
//! Exit codes: 0 on success or when results match their closed forms, 1 on
//! a checked mismatch or simulation fault, 2 on usage or configuration
//! errors.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use selftimed::adders::{functional_check, trial_vectors, Trials};
use selftimed::analysis::{
    classify_indication, crossover_m, expected_indication, gen_carry_chain_vector, sweep_unchecked, theory_global,
    theory_local, ChainSpec, Latencies, MRange, SweepReport,
};
use selftimed::cells::{derive_pinned_delays, load_delay_table};
use selftimed::netlist::serialize_netlist;
use selftimed::stage::StageRunner;
use selftimed::{
    build_full_adder, build_rca, build_stage, default_delay_table, AdderVariant, Architecture, Circuit, DelayTable,
};

#[derive(Parser)]
#[command(name = "selftimed", version, about = "Dual-rail self-timed adder simulator")]
struct Cli {
    /// Delay overrides, one `<KIND> <tu>` per line.
    #[arg(long, global = true)]
    delay_table: Option<PathBuf>,
    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random operand generation.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a ripple-carry adder (or a whole stage with --arch) as a netlist.
    Build {
        #[arg(long, default_value = "latency-opt-biased")]
        variant: AdderVariant,
        #[arg(long, default_value_t = 32)]
        n: usize,
        /// Wrap the adder in a LOCAL or GLOBAL pipeline stage.
        #[arg(long)]
        arch: Option<Architecture>,
        /// Allow a variant the architecture does not normally pair with.
        #[arg(long)]
        force: bool,
    },
    /// Simulate one carry-chain transaction and compare with the closed form.
    Measure {
        #[arg(long)]
        arch: Architecture,
        /// Defaults to the architecture's own adder.
        #[arg(long)]
        variant: Option<AdderVariant>,
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Also write the SET and RTZ event traces as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Cycle time of both architectures over a range of chain lengths.
    Sweep {
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value = "4:28")]
        m_range: MRange,
    },
    /// Classify how a full adder's outputs indicate its inputs.
    Classify {
        variant: AdderVariant,
        /// Report the classes without comparing them to the expected table.
        #[arg(long)]
        no_expect: bool,
    },
    /// Functional check against integer addition.
    Check {
        #[arg(long, default_value = "latency-opt-biased")]
        variant: AdderVariant,
        #[arg(long, default_value_t = 32)]
        n: usize,
        /// A positive count or `exhaustive`.
        #[arg(long, default_value = "1000")]
        trials: String,
        /// Run full stage handshakes instead of the bare adder.
        #[arg(long)]
        arch: Option<Architecture>,
    },
    /// Print the delay table in use, plus the crossover chain length.
    Delays,
}

enum Failure {
    Usage(anyhow::Error),
    Mismatch(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Mismatch(e)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Mismatch(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(usage),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout").map_err(Failure::from),
    }
}

fn delays(cli: &Cli) -> Result<DelayTable, Failure> {
    match &cli.delay_table {
        None => Ok(default_delay_table()),
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
            load_delay_table(&text).with_context(|| path.display().to_string()).map_err(usage)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let d = delays(&cli)?;
    match &cli.command {
        &Command::Build { variant, n, arch, force } => {
            let netlist = match arch {
                Some(arch) => build_stage(arch, variant, n, force).map_err(usage)?.netlist,
                None if (1..=selftimed::adders::MAX_WIDTH).contains(&n) => build_rca(variant, n).netlist,
                None => return Err(usage(anyhow!("width {n} outside 1..=63"))),
            };
            let text = serialize_netlist(&netlist).map_err(|e| anyhow!(e))?;
            emit(&cli.out, &text)
        }
        &Command::Measure { arch, variant, n, m, ref trace } => measure(&cli, &d, arch, variant, n, m, trace),
        &Command::Sweep { n, m_range } => {
            let ms = m_range.values();
            if let Some(&m) = ms.iter().find(|&&m| m + 2 > n) {
                return Err(usage(anyhow!("chain length {m} needs n >= {}", m + 2)));
            }
            let rows = sweep_unchecked(n, &ms, &d).map_err(|e| anyhow!(e))?;
            let report = SweepReport { n, rows };
            emit(&cli.out, &report.to_csv())?;
            match report.rows.iter().find(|r| !r.matches()) {
                Some(r) => Err(anyhow!(
                    "m={}: local {} vs {}, global {} vs {}",
                    r.m,
                    r.cycle_local_sim,
                    r.cycle_local_theory,
                    r.cycle_global_sim,
                    r.cycle_global_theory
                )
                .into()),
                None => Ok(()),
            }
        }
        &Command::Classify { variant, no_expect } => {
            let got = classify_indication(&build_full_adder(variant), &d).map_err(|e| anyhow!(e))?;
            emit(&cli.out, &format!("SET: {}, RTZ: {}\n", got.set, got.rtz))?;
            let want = expected_indication(variant);
            if no_expect || got == want {
                Ok(())
            } else {
                Err(anyhow!("{variant}: expected SET: {}, RTZ: {}", want.set, want.rtz).into())
            }
        }
        Command::Check { variant, n, trials, arch } => check(&cli, &d, *variant, *n, trials, *arch),
        Command::Delays => {
            let pinned = derive_pinned_delays();
            let mut text = d.to_text();
            writeln!(
                text,
                "# pinned: CE2={} OR2={} AO21={} AO22={}; crossover m at n=32: {}",
                pinned.ce2,
                pinned.or2,
                pinned.ao21,
                pinned.ao22,
                crossover_m(32, &d)
            )
            .unwrap();
            emit(&cli.out, &text)
        }
    }
}

const MEASURE_HEADER: &str = "arch,variant,n,m,fl_sim,fl_theory,rl_sim,rl_theory,cycle_sim,cycle_theory";

fn measure(
    cli: &Cli,
    d: &DelayTable,
    arch: Architecture,
    variant: Option<AdderVariant>,
    n: usize,
    m: usize,
    trace: &Option<PathBuf>,
) -> Outcome {
    let variant = variant.unwrap_or(arch.default_variant());
    let chain = ChainSpec { n, m };
    let (a, b, cin) = gen_carry_chain_vector(chain).map_err(usage)?;
    let stage = build_stage(arch, variant, n, true).map_err(usage)?;
    let circuit = Circuit::compile(&stage.netlist, d).map_err(|e| anyhow!(e))?;
    let mut runner = StageRunner::new(&stage, &circuit).map_err(|e| anyhow!(e))?.keep_traces(trace.is_some());
    let rec = runner.transaction(a, b, cin).map_err(|e| anyhow!(e))?;
    if rec.result != a + b + cin as u64 {
        return Err(anyhow!("decoded {:#x}, expected {:#x}", rec.result, a + b + cin as u64).into());
    }
    let sim = Latencies { forward: rec.forward_latency, reverse: rec.reverse_latency };
    // Closed forms only describe each architecture's own adder.
    let theory = (variant == arch.default_variant()).then(|| match arch {
        Architecture::Local => theory_local(m, d),
        Architecture::Global => theory_global(m, n, d),
    });
    let show = |f: fn(&Latencies) -> u64| theory.as_ref().map(|t| f(t).to_string()).unwrap_or_default();
    let text = format!(
        "{MEASURE_HEADER}\n{arch},{variant},{n},{m},{},{},{},{},{},{}\n",
        sim.forward,
        show(|l| l.forward),
        sim.reverse,
        show(|l| l.reverse),
        sim.cycle(),
        show(Latencies::cycle),
    );
    emit(&cli.out, &text)?;
    if let (Some(path), Some((set, rtz))) = (trace, runner.last_traces()) {
        // Absolute simulation times; the return to zero follows the SET phase.
        let csv = format!("time,net,value\n{}{}", set.to_csv(&circuit, 0), rtz.to_csv(&circuit, 0));
        fs::write(path, csv).with_context(|| format!("writing {}", path.display())).map_err(usage)?;
    }
    match theory {
        Some(t) if t != sim => {
            let note = if arch == Architecture::Local && m < 3 { " (the LOCAL form assumes m >= 3)" } else { "" };
            Err(anyhow!(
                "simulated FL/RL {}/{} but closed form gives {}/{}{note}",
                sim.forward,
                sim.reverse,
                t.forward,
                t.reverse
            )
            .into())
        }
        _ => Ok(()),
    }
}

fn check(
    cli: &Cli,
    d: &DelayTable,
    variant: AdderVariant,
    n: usize,
    trials: &str,
    arch: Option<Architecture>,
) -> Outcome {
    if !(1..=selftimed::adders::MAX_WIDTH).contains(&n) {
        return Err(usage(anyhow!("width {n} outside 1..=63")));
    }
    let trials = match trials {
        "exhaustive" if n <= 8 => Trials::Exhaustive,
        "exhaustive" => return Err(usage(anyhow!("exhaustive checking is limited to n <= 8"))),
        count => match count.parse::<usize>() {
            Ok(0) | Err(_) => return Err(usage(anyhow!("--trials must be a positive integer or `exhaustive`"))),
            Ok(count) => Trials::Random { count, seed: cli.seed },
        },
    };
    let (cases, failure) = match arch {
        None => {
            let report = functional_check(&build_rca(variant, n), d, &trials).map_err(|e| anyhow!(e))?;
            (report.cases, report.failure.map(|c| c.to_string()))
        }
        Some(arch) => {
            let stage = build_stage(arch, variant, n, false).map_err(usage)?;
            let circuit = Circuit::compile(&stage.netlist, d).map_err(|e| anyhow!(e))?;
            let mut runner = StageRunner::new(&stage, &circuit).map_err(|e| anyhow!(e))?;
            let vectors = trial_vectors(n, &trials);
            let mut failure = None;
            let mut cases = 0;
            for (a, b, cin) in vectors {
                cases += 1;
                match runner.transaction(a, b, cin) {
                    Ok(rec) if rec.result == a + b + cin as u64 => {}
                    Ok(rec) => failure = Some(format!("a={a} b={b} cin={}: got {}", cin as u8, rec.result)),
                    Err(e) => failure = Some(format!("a={a} b={b} cin={}: {e}", cin as u8)),
                }
                if failure.is_some() {
                    break;
                }
            }
            (cases, failure)
        }
    };
    match failure {
        None => emit(&cli.out, &format!("pass: {cases} cases\n")),
        Some(f) => {
            emit(&cli.out, &format!("FAIL after {cases} cases: {f}\n"))?;
            Err(anyhow!("counterexample: {f}").into())
        }
    }
}
