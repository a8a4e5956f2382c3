use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use scenevar_core::agents::AgentMemory;
use scenevar_core::benchmark::{self, BaselineSpec, BenchmarkReport};
use scenevar_core::config::Config;
use scenevar_core::episodes::{read_json, write_json, Dataset};
use scenevar_core::pipeline::{default_transport, generate_dataset};
use scenevar_core::scene::{load_scene, presets, ObjectLibrary, Scene, SceneDescription, SceneFormat};
use scenevar_core::{Error, Result};

#[derive(Parser)]
#[command(name = "scenevar", version, about = "Scene variant and object-navigation episode generation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML or JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Configuration override, `section.key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for data-parallel stages.
    #[arg(long)]
    workers: Option<usize>,
    /// Run every stage on the calling thread.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut overrides = self.overrides.clone();
        if let Some(w) = self.workers {
            overrides.push(format!("workers={w}"));
        }
        if self.sequential {
            overrides.push("exec=\"sequential\"".into());
        }
        Config::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate scene variants and episodes from static scenes.
    Generate {
        #[arg(long)]
        seed: u64,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Scene files (`.json` descriptions). Repeatable.
        #[arg(long = "scene")]
        scenes: Vec<PathBuf>,
        /// Built-in fixture scenes by name. Repeatable.
        #[arg(long = "fixture")]
        fixtures: Vec<String>,
        /// Variants per scene; overrides the configuration.
        #[arg(long)]
        variants: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run navigation baselines on a dataset and write a report.
    Evaluate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        dataset: PathBuf,
        /// Report JSON path. A CSV summary is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated baselines: random, semantic, random-nofn, semantic-nofn.
        #[arg(long, value_delimiter = ',', default_value = "random,semantic")]
        baselines: Vec<String>,
        /// Directory for per-episode trajectory JSON.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate reports as CSV, markdown and plot data.
    Report {
        /// Report JSON files.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic scene descriptions.
    Fixture {
        /// single_room, two_room, two_story, empty_room, or layout (random).
        #[arg(long, default_value = "two_room")]
        name: String,
        /// Seeds of random layouts. Repeatable.
        #[arg(long = "layout-seed")]
        layout_seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Backend(_) | Error::RetriesExhausted { .. } | Error::Schema(_) => 4,
        _ => 3,
    }
}

fn fixture(name: &str) -> Result<SceneDescription> {
    Ok(match name {
        "single_room" => presets::single_room(),
        "two_room" => presets::two_room(),
        "two_story" => presets::two_story(),
        "empty_room" => presets::empty_room(5.0, 5.0),
        other => match other.strip_prefix("layout_").and_then(|s| s.parse().ok()) {
            Some(seed) => presets::random_layout(seed),
            None => return Err(Error::Config(format!("unknown fixture `{other}`"))),
        },
    })
}

fn scenes(paths: &[PathBuf], fixtures: &[String]) -> Result<Vec<Scene>> {
    let mut out = Vec::new();
    for p in paths {
        out.push(load_scene(p, SceneFormat::from_path(p)?).map_err(|e| match e {
            Error::Io { .. } | Error::Parse { .. } | Error::InvalidScene(_) => Error::Dataset(e.to_string()),
            e => e,
        })?);
    }
    for f in fixtures {
        out.push(fixture(f)?.build()?);
    }
    if out.is_empty() {
        return Err(Error::Config("no scenes given; use --scene or --fixture".into()));
    }
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            seed,
            out,
            scenes: paths,
            fixtures,
            variants,
            common,
        } => {
            let mut cfg = common.load()?;
            if let Some(v) = variants {
                cfg.dataset.variants_per_scene = v;
            }
            let scenes = scenes(&paths, &fixtures)?;
            let library = ObjectLibrary::default_library();
            let m = scenevar_core::par::with_workers(cfg.exec, cfg.workers, || {
                generate_dataset(&scenes, &library, &cfg, seed, &out, default_transport())
            })?;
            info!("{} variants, {} episodes", m.variants.len(), m.total_episodes);
            println!("wrote {} episodes over {} variants to {}", m.total_episodes, m.variants.len(), out.display());
        }
        Command::Evaluate {
            seed,
            dataset,
            out,
            baselines,
            trajectories,
            common,
        } => {
            let cfg = common.load()?;
            let specs = baselines.iter().map(|b| BaselineSpec::parse(b.trim())).collect::<Result<Vec<_>>>()?;
            let ds = Dataset::open(&dataset)?;
            let library = ObjectLibrary::default_library();
            let memory = AgentMemory::new();
            let report = benchmark::run_benchmark(
                &ds,
                &specs,
                &cfg,
                &library,
                seed,
                default_transport(),
                &memory,
                trajectories.as_deref(),
            )?;
            write_text(&out, &benchmark::report_json(&report))?;
            let label = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report").to_string();
            write_text(&out.with_extension("csv"), &benchmark::summary_csv(&[(label, report.clone())]))?;
            for b in &report.baselines {
                println!(
                    "{:<22} SR {:.4}  SPL {:.4}  SoftSPL {:.4}  Dist2Goal {:.4}",
                    b.name, b.summary.sr, b.summary.spl, b.summary.soft_spl, b.summary.dist_to_goal
                );
            }
        }
        Command::Report { reports, out } => {
            let mut loaded: Vec<(String, BenchmarkReport)> = Vec::new();
            for p in &reports {
                let label = p.file_stem().and_then(|s| s.to_str()).unwrap_or("report").to_string();
                loaded.push((label, read_json(p)?));
            }
            write_text(&out.join("summary.csv"), &benchmark::summary_csv(&loaded))?;
            write_text(&out.join("categories.csv"), &benchmark::category_csv(&loaded))?;
            write_text(&out.join("report.md"), &benchmark::markdown(&loaded))?;
            write_json(&out.join("plot_data.json"), &benchmark::plot_data(&loaded))?;
            print!("{}", benchmark::markdown(&loaded));
        }
        Command::Fixture { name, layout_seeds, out } => {
            let descs: Vec<SceneDescription> = if layout_seeds.is_empty() {
                vec![fixture(&name)?]
            } else {
                layout_seeds.iter().map(|&s| presets::random_layout(s)).collect()
            };
            for d in descs {
                d.validate()?;
                let path = out.join(format!("{}.json", d.scene_id));
                write_text(&path, &d.to_json())?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
