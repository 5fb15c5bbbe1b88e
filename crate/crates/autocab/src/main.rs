use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use autocab::bench::{aggregate, run_suite, token_report, RunSpec};
use autocab::files::LoadError;
use autocab::server::{Server, ServerConfig};
use autocab::store::{load_trace, TraceStore};
use autocab::{image, World};
use autocab_core::agents::{Backend, Variant};
use autocab_core::episode::{replay, Action, Environment, ModalityConfig, TapTarget};
use autocab_core::gui::{Behavior, ScreenId};
use autocab_core::task::Suite;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "autocab", version, about = "In-vehicle GUI agent simulator and benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Suite manifest; the bundled suite when omitted.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Region knowledge base JSON.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Screen layouts JSON.
    #[arg(long)]
    layouts: Option<PathBuf>,
}

impl DataArgs {
    fn world(&self) -> Result<World, LoadError> {
        World::load(self.suite.as_deref(), self.kb.as_deref(), self.layouts.as_deref())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the suite and write traces plus a report.
    Run {
        #[command(flatten)]
        data: DataArgs,
        /// t3a, m3a or asurada; repeat for several. All three by default.
        #[arg(long = "variant")]
        variants: Vec<Variant>,
        #[arg(long, default_value = "scripted")]
        backend: Backend,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Instantiate every template in this region.
        #[arg(long)]
        region: Option<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Report directory; traces go to $AUTOCAB_TRACE_DIR or <out>/traces.
        #[arg(long, default_value = "autocab-out")]
        out: PathBuf,
        /// host:port of the external policy.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        max_steps: Option<u32>,
        /// Per-step timeout for the external policy, seconds.
        #[arg(long, default_value_t = 120)]
        step_timeout: u64,
        /// Only these templates (comma separated).
        #[arg(long, value_delimiter = ',')]
        templates: Option<Vec<String>>,
    },
    /// Re-execute traces and check every digest.
    Replay {
        #[command(flatten)]
        data: DataArgs,
        /// Trace files or directories.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Aggregate a trace directory into a report.
    Report {
        #[command(flatten)]
        data: DataArgs,
        dir: PathBuf,
        /// Write report.json and report.txt here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the reasoning-token histogram as JSON instead.
        #[arg(long)]
        tokens: bool,
    },
    /// Load the suite and instantiate every template.
    ValidateSuite {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
    /// Serve the session protocol over TCP or stdio.
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        #[arg(long, conflicts_with = "listen")]
        stdio: bool,
        /// Idle seconds before a session is closed.
        #[arg(long, default_value_t = 300)]
        idle_timeout: u64,
        /// Trace directory when $AUTOCAB_TRACE_DIR is unset.
        #[arg(long, default_value = "autocab-out/traces")]
        out: PathBuf,
    },
    /// Render one screen of an instance to PNG.
    Screenshot {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        template: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        region: Option<String>,
        /// Screen to open, e.g. HVAC; the start screen by default.
        #[arg(long)]
        screen: Option<String>,
        /// Draw Set-of-Mark indices.
        #[arg(long)]
        som: bool,
        #[arg(long, default_value = "screen.png")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<LoadError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run { data, variants, backend, seeds, region, jobs, out, endpoint, max_steps, step_timeout, templates } => {
            let world = data.world()?;
            let spec = RunSpec {
                variants: if variants.is_empty() { Variant::ALL.to_vec() } else { variants },
                backend,
                seeds,
                region,
                jobs,
                max_steps,
                endpoint,
                step_timeout: Duration::from_secs(step_timeout),
                templates,
                stamp_wall_clock: true,
            };
            let store = TraceStore::from_env(out.join("traces"));
            let run = run_suite(&world, &spec, Some(&store))?;
            for f in &run.failures {
                eprintln!("episode {} {} seed {} failed: {}", f.job.variant, f.job.template_id, f.job.seed, f.error);
            }
            fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            fs::write(out.join("report.json"), run.report.to_json())?;
            let table = run.report.to_table();
            fs::write(out.join("report.txt"), &table)?;
            print!("{table}");
            println!("\n{} traces in {}", run.trace_paths.len(), store.root().display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { data, paths } => {
            let world = data.world()?;
            let mut files = Vec::new();
            for p in paths {
                if p.is_dir() {
                    files.extend(TraceStore::new(p).list()?);
                } else {
                    files.push(p);
                }
            }
            let mut bad = 0;
            for f in &files {
                let verdict = load_trace(f).map_err(anyhow::Error::from).and_then(|t| {
                    replay(&t, &world.kb, &world.layouts).map_err(anyhow::Error::from)
                });
                match verdict {
                    Ok(o) => println!("ok    {}  reward {} steps {}", f.display(), o.reward, o.steps_used),
                    Err(e) => {
                        bad += 1;
                        println!("FAIL  {}  {e}", f.display());
                    }
                }
            }
            println!("{} of {} traces replayed", files.len() - bad, files.len());
            Ok(if bad == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Report { data, dir, out, tokens } => {
            let traces: Vec<_> = TraceStore::new(&dir).load_all()?.into_iter().map(|(_, t)| t).collect();
            if tokens {
                println!("{}", serde_json::to_string_pretty(&token_report(&traces)?)?);
                return Ok(ExitCode::SUCCESS);
            }
            if traces.is_empty() {
                bail!("no traces under {}", dir.display());
            }
            let world = data.world()?;
            let report = aggregate(&traces, world.suite.suite_version);
            if let Some(out) = out {
                fs::create_dir_all(&out)?;
                fs::write(out.join("report.json"), report.to_json())?;
                fs::write(out.join("report.txt"), report.to_table())?;
            }
            print!("{}", report.to_table());
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateSuite { data, seeds } => {
            let world = data.world()?;
            let mut problems = 0;
            for t in &world.suite.templates {
                for seed in 0..seeds {
                    let r = Suite::region_for(t, seed, &world.kb)
                        .and_then(|region| world.suite.instantiate(t, seed, region))
                        .map_err(anyhow::Error::from)
                        .and_then(|inst| {
                            Environment::reset(&inst, ModalityConfig::default(), &world.kb, &world.layouts, None)
                                .map_err(anyhow::Error::from)
                        });
                    if let Err(e) = r {
                        problems += 1;
                        println!("{} seed {seed}: {e}", t.template_id);
                    }
                }
            }
            println!("{} templates, {} seeds each, {problems} problems", world.suite.templates.len(), seeds);
            Ok(if problems == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Serve { data, listen, stdio, idle_timeout, out } => {
            let world = Arc::new(data.world()?);
            let config = ServerConfig {
                idle_timeout: Duration::from_secs(idle_timeout),
                store: Some(TraceStore::from_env(out)),
                ..ServerConfig::default()
            };
            let server = Arc::new(Server::new(world, config));
            if stdio {
                server.serve_connection(BufReader::new(io::stdin()), io::stdout())?;
            } else {
                let listener = Server::bind(&listen)?;
                eprintln!("listening on {}", listener.local_addr()?);
                server.serve_tcp(listener)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Screenshot { data, template, seed, region, screen, som, out } => {
            let world = data.world()?;
            let t = world.suite.template(&template).with_context(|| format!("no template `{template}`"))?;
            let profile = match &region {
                Some(r) => world.kb.region(r).with_context(|| format!("no region `{r}`"))?,
                None => Suite::region_for(t, seed, &world.kb)?,
            };
            let inst = world.suite.instantiate(t, seed, profile)?;
            let config = ModalityConfig::from_list("a11y,screen,som").map_err(anyhow::Error::msg)?;
            let (mut env, mut obs) = Environment::reset(&inst, config, &world.kb, &world.layouts, None)?;
            if let Some(name) = screen {
                let target = ScreenId::ALL
                    .into_iter()
                    .find(|s| s.name().eq_ignore_ascii_case(&name))
                    .with_context(|| format!("no screen `{name}`"))?;
                obs = open_screen(&mut env, obs, target)?;
            }
            let buf = if som { obs.som_screen } else { obs.screen }.context("no screen buffer")?;
            write_png(&buf, &out)?;
            println!("{}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn open_screen(
    env: &mut Environment,
    obs: autocab_core::episode::Observation,
    target: ScreenId,
) -> Result<autocab_core::episode::Observation> {
    if obs.current_screen == target {
        return Ok(obs);
    }
    let nav = env
        .tree()
        .interactables()
        .into_iter()
        .find(|n| n.behavior == Some(Behavior::Navigate { screen: target }))
        .and_then(|n| n.som_index)
        .with_context(|| format!("{} is not reachable from {}", target.name(), obs.current_screen.name()))?;
    Ok(env.step(&Action::Tap { target: TapTarget::Index { som_index: nav } })?.observation)
}

fn write_png(buf: &autocab_core::gui::PixelBuffer, path: &Path) -> Result<()> {
    image::write_png(buf, path).with_context(|| path.display().to_string())
}
