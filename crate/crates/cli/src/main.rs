use clap::{Parser, Subcommand, ValueEnum};
use offroad_cli::service::{router, AppState};
use offroad_cli::session::SessionStore;
use offroad_cli::{load_planner, parse_lon_lat};
use offroad_core::geomap::io::save_cache;
use offroad_core::synth::{synth_map, SynthConfig};
use offroad_core::{GeoPose, PlanMode, PlanRequest};
use std::path::PathBuf;
use std::process::ExitCode;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "planner", about = "Off-road global path planner", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Trail,
    Direct,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve the JSON API.
    Serve {
        #[arg(long)]
        map: PathBuf,
        /// GeoJSON features burnt into the map before indexing trails.
        #[arg(long)]
        trails: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Keep user-drawn areas in this JSON file across restarts.
        #[arg(long)]
        sessions: Option<PathBuf>,
    },
    /// Plan one path and write it as GeoJSON.
    Plan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        trails: Option<PathBuf>,
        /// lon,lat
        #[arg(long, value_parser = parse_lon_lat, allow_hyphen_values = true)]
        start: GeoPose,
        /// lon,lat
        #[arg(long, value_parser = parse_lon_lat, allow_hyphen_values = true)]
        target: GeoPose,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Trail)]
        mode: Mode,
        /// Also write the full result as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a synthetic map cache for trying things out.
    Synth {
        #[arg(long, default_value_t = 2000)]
        width: usize,
        #[arg(long, default_value_t = 2000)]
        height: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cmd: Cmd) -> Result<(), Box<dyn std::error::Error>> {
    match cmd {
        Cmd::Serve {
            map,
            trails,
            port,
            host,
            sessions,
        } => {
            let planner = load_planner(&map, trails.as_deref())?;
            let id = map.file_stem().map_or("map".into(), |s| s.to_string_lossy().into_owned());
            let mut state = AppState::new(id, planner);
            if let Some(p) = sessions {
                state.sessions = SessionStore::with_snapshot(&p)?;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                tracing::info!("listening on {}", listener.local_addr()?);
                axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
        }
        Cmd::Plan {
            map,
            trails,
            start,
            target,
            out,
            mode,
            json,
        } => {
            let planner = load_planner(&map, trails.as_deref())?;
            let mut req = PlanRequest::new(start, target);
            if let Mode::Direct = mode {
                req.mode = PlanMode::Direct;
            }
            let res = planner.plan(&req)?;
            std::fs::write(&out, serde_json::to_string_pretty(&res.to_geojson())?)?;
            if let Some(j) = json {
                std::fs::write(j, serde_json::to_string_pretty(&res)?)?;
            }
            let m = &res.metrics;
            println!(
                "length {:.1} m, {} segments, {} poses, {:.0} ms",
                m.length_m,
                res.segments.len(),
                res.path.len(),
                m.timings_ms.total
            );
            if res.diagnostics.failed_segments > 0 {
                println!("warning: {} spans exceed the turning limit", res.diagnostics.failed_segments);
            }
        }
        Cmd::Synth {
            width,
            height,
            seed,
            out,
        } => {
            save_cache(&synth_map(&SynthConfig::new(width, height, seed)), &out)?;
            println!("wrote {width}x{height} map to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let filter = EnvFilter::try_from_env("PLANNER_LOG").unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("planner: {e}");
            ExitCode::FAILURE
        }
    }
}
