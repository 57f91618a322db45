use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use graspcommit::baselines::MethodId;
use graspcommit::harness::{aggregate, load_scene, plot_trajectory, run_bench, run_method, MethodConfig, Scene};
use serde_json::json;

/// Grasp-pose sampling and trajectory commitment planners for planar arms.
#[derive(Parser)]
#[command(name = "graspcommit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan once and report the outcome.
    Plan {
        /// Scene file, or the name of a built-in scene.
        #[arg(long)]
        scene: String,
        #[arg(long, default_value = "ours")]
        method: MethodId,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw the scene and trajectory to this SVG file.
        #[arg(long)]
        out_svg: Option<PathBuf>,
        /// Write the trajectory (radians) as JSON.
        #[arg(long)]
        out_traj: Option<PathBuf>,
    },
    /// Run seeded trials and print aggregate statistics.
    Bench {
        /// Comma-separated scene files or built-in names.
        #[arg(long, value_delimiter = ',', default_values_t = Scene::BUILTIN.map(String::from))]
        scenes: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = MethodId::ALL)]
        methods: Vec<MethodId>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scene file utilities.
    Scene {
        #[command(subcommand)]
        command: SceneCommand,
    },
}

#[derive(Subcommand)]
enum SceneCommand {
    /// Check scene files and report the first violated rule of each.
    Validate {
        #[arg(required = true)]
        paths: Vec<String>,
    },
    /// Print a scene in normalized form.
    Show { scene: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

/// Exit code 2: the inputs were unusable.
struct InputError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.into())
    }
}

fn load(scene: &str) -> Result<Scene> {
    load_scene(scene).with_context(|| format!("loading scene {scene}"))
}

fn plan_cmd(scene: &str, method: MethodId, seed: u64, out_svg: Option<&Path>, out_traj: Option<&Path>) -> Result<bool, InputError> {
    let scene = load(scene)?;
    let outcome = run_method(&scene, method, seed, &MethodConfig::default());
    println!("scene: {}", scene.name);
    println!("method: {method}");
    println!("seed: {seed}");
    println!("success: {}", outcome.success);
    if let Some(cost) = outcome.cost {
        println!("cost: {cost:.6}");
    }
    println!("iterations: {}", outcome.stats.iterations);
    println!("commitments: {}", outcome.stats.commits);
    println!("wall_time_s: {:.3}", outcome.stats.wall_time);
    let grasp = outcome.grasp.map(|g| g.pose);
    if let Some(path) = out_svg {
        plot_trajectory(&scene.arm, &scene, outcome.trajectory.as_ref(), grasp.as_ref(), path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = out_traj {
        let doc = json!({
            "scene": scene.name,
            "method": method.name(),
            "seed": seed,
            "success": outcome.success,
            "cost": outcome.cost,
            "grasp": outcome.grasp,
            "waypoints": outcome.trajectory,
        });
        let text = serde_json::to_string_pretty(&doc).expect("plain JSON values");
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(outcome.success)
}

fn bench_cmd(
    scenes: &[String],
    methods: &[MethodId],
    trials: usize,
    seed: u64,
    format: Format,
    out: Option<&Path>,
) -> Result<(), InputError> {
    if trials == 0 {
        return Err(anyhow!("--trials must be at least 1").into());
    }
    let scenes = scenes.iter().map(|s| load(s)).collect::<Result<Vec<_>>>()?;
    let records = run_bench(&scenes, methods, trials, seed, &MethodConfig::default());
    let report = aggregate(&records, seed)?;
    let text = match format {
        Format::Csv => report.to_csv(),
        Format::Markdown => report.to_markdown(),
    };
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn scene_cmd(command: &SceneCommand) -> Result<(), InputError> {
    match command {
        SceneCommand::Validate { paths } => {
            let mut failed = 0;
            for p in paths {
                match load_scene(p) {
                    Ok(s) => println!("{p}: ok ({} obstacles, {} joints)", s.obstacles.len(), s.arm.dof()),
                    Err(e) => {
                        println!("{p}: {e}");
                        failed += 1;
                    }
                }
            }
            if failed > 0 {
                return Err(anyhow!("{failed} of {} scene(s) invalid", paths.len()).into());
            }
        }
        SceneCommand::Show { scene } => print!("{}", load(scene)?.to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan {
            scene,
            method,
            seed,
            out_svg,
            out_traj,
        } => plan_cmd(scene, *method, *seed, out_svg.as_deref(), out_traj.as_deref()),
        Command::Bench {
            scenes,
            methods,
            trials,
            seed,
            format,
            out,
        } => bench_cmd(scenes, methods, *trials, *seed, *format, out.as_deref()).map(|_| true),
        Command::Scene { command } => scene_cmd(command).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(InputError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
