//! Subcommand implementations. Every command resolves its configuration,
//! writes a copy of it alongside the outputs, and produces byte-deterministic
//! files for a fixed seed.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use analysis::{box_stats, pca_fit_project, success_by_distance, EpisodeOutcome, Mahalanobis};
use depth_noise::{apply_noise, DepthImageBatch, NoiseConfig};
use nav_rl::{evaluate_nav, load_actor, save_actor, train_nav, MazeSpec, NavTrainConfig};
use recurrent_cells::CellKind;
use spatial_bench::{loss_curves_csv, per_step_error_csv, train_benchmark, BenchConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("bad config {path}: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Message(String),
}

impl CliError {
    fn msg(e: impl std::fmt::Display) -> Self {
        CliError::Message(e.to_string())
    }
}

/// Output root override: relative --out paths are joined under
/// SRULAB_OUT_ROOT when it is set.
fn resolve_out_dir(out: &Path) -> PathBuf {
    match std::env::var_os("SRULAB_OUT_ROOT") {
        Some(root) if out.is_relative() => PathBuf::from(root).join(out),
        _ => out.to_path_buf(),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| CliError::Write { path: dir.display().to_string(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(value).map_err(CliError::msg)?;
    json.push('\n');
    write_file(path, json.as_bytes())
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|source| CliError::Read { path: path.display().to_string(), source })?;
    serde_json::from_str(&raw)
        .map_err(|e| CliError::Config { path: path.display().to_string(), message: e.to_string() })
}

pub fn bench_spatial(
    cell: CellKind,
    seed: u64,
    epochs: Option<u64>,
    config_path: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let mut config: BenchConfig = match config_path {
        Some(p) => read_config(p)?,
        None => BenchConfig::default(),
    };
    if let Some(e) = epochs {
        config.epochs = e;
    }
    let out = resolve_out_dir(out);
    ensure_dir(&out)?;
    write_json(&out.join("config.resolved.json"), &config)?;

    let report = train_benchmark(cell, &config, seed).map_err(CliError::msg)?;
    write_json(&out.join("report.json"), &report)?;
    write_file(&out.join("loss_curves.csv"), loss_curves_csv(&report).as_bytes())?;
    write_file(&out.join("per_step_error.csv"), per_step_error_csv(&report).as_bytes())?;
    println!(
        "bench-spatial {cell} seed {seed}: final spatial MSE {:.6}, temporal accuracy {:.4}",
        report.final_eval.spatial_mse, report.final_eval.temporal_acc
    );
    Ok(())
}

pub fn noise_apply(input: &Path, out: &Path, config_path: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut config: NoiseConfig = read_config(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate().map_err(CliError::msg)?;
    let out = resolve_out_dir(out);
    ensure_dir(&out)?;
    write_json(&out.join("config.resolved.json"), &config)?;

    let mut entries: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(|source| CliError::Read { path: input.display().to_string(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(p.extension().and_then(|s| s.to_str()), Some("pfm") | Some("pgm"))
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(CliError::Message(format!("no .pfm/.pgm files in {}", input.display())));
    }

    for (idx, path) in entries.iter().enumerate() {
        let is_pfm = path.extension().and_then(|s| s.to_str()) == Some("pfm");
        let (data, h, w) = if is_pfm {
            depth_noise::io::read_pfm(path).map_err(CliError::msg)?
        } else {
            depth_noise::io::read_pgm(path).map_err(CliError::msg)?
        };
        // one sub-seed per file so ordering of files never shifts draws
        let mut per_file = config.clone();
        per_file.seed = tensor_core::rng::substream_seed(config.seed, "noise-image", idx as u64);
        let batch = DepthImageBatch::new(1, h, w, data);
        let noisy = apply_noise(&batch, &per_file).map_err(CliError::msg)?;
        let dest = out.join(path.file_name().expect("file name"));
        if is_pfm {
            depth_noise::io::write_pfm(&dest, noisy.image(0), h, w).map_err(CliError::msg)?;
        } else {
            depth_noise::io::write_pgm(&dest, noisy.image(0), h, w).map_err(CliError::msg)?;
        }
    }
    println!("noise-apply: processed {} images", entries.len());
    Ok(())
}

pub fn nav_train(config_path: &Path, seed: u64, out: &Path) -> Result<(), CliError> {
    let config: NavTrainConfig = read_config(config_path)?;
    let out = resolve_out_dir(out);
    ensure_dir(&out)?;
    write_json(&out.join("config.resolved.json"), &config)?;

    let (agents, reports) = train_nav(&config, seed).map_err(CliError::msg)?;
    write_json(&out.join("report.json"), &reports)?;
    for (i, agent) in agents.iter().enumerate() {
        save_actor(&agent.actor, &out.join(format!("actor_{i}.json"))).map_err(CliError::msg)?;
    }
    let last = reports[0].iterations.last();
    println!(
        "nav-train {}: {} iterations, final mean step reward {:.4}",
        config.memory.name(),
        reports[0].iterations.len(),
        last.map(|l| l.mean_step_reward).unwrap_or(f64::NAN)
    );
    Ok(())
}

fn parse_edges(edges: &str) -> Result<Vec<f64>, CliError> {
    edges
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Message(format!("bad edge '{t}'"))))
        .collect()
}

pub fn nav_eval(
    ckpt: &Path,
    mazes_dir: &Path,
    episodes_per_maze: usize,
    seed: u64,
    edges: &str,
    out: &Path,
    attention_csv: bool,
) -> Result<(), CliError> {
    let actor = load_actor(ckpt).map_err(CliError::msg)?;
    let edges = parse_edges(edges)?;

    let mut maze_paths: Vec<PathBuf> = std::fs::read_dir(mazes_dir)
        .map_err(|source| CliError::Read { path: mazes_dir.display().to_string(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|s| s.to_str()) == Some("txt"))
        .collect();
    maze_paths.sort();
    if maze_paths.is_empty() {
        return Err(CliError::Message(format!("no .txt mazes in {}", mazes_dir.display())));
    }
    let mut mazes = Vec::with_capacity(maze_paths.len());
    for p in &maze_paths {
        let text = std::fs::read_to_string(p)
            .map_err(|source| CliError::Read { path: p.display().to_string(), source })?;
        mazes.push(MazeSpec::from_ascii(&text, 0.5, 0.5).map_err(CliError::msg)?);
    }

    let env_config = nav_rl::EnvConfig { num_rays: actor.attn.tokens, ..nav_rl::EnvConfig::default() };
    let report = evaluate_nav(&actor, &mazes, episodes_per_maze, &env_config, &edges, seed)
        .map_err(CliError::msg)?;
    let out = resolve_out_dir(out);
    ensure_dir(&out)?;
    write_json(&out.join("eval.json"), &report)?;
    if attention_csv {
        let csv = nav_rl::attention_trace_csv(&actor, &mazes[0], &env_config, seed).map_err(CliError::msg)?;
        write_file(&out.join("attention_trace.csv"), csv.as_bytes())?;
    }
    println!(
        "nav-eval: success rate {:.3} over {} episodes (mean length {:.1} steps)",
        report.success_rate, report.episodes, report.mean_episode_steps
    );
    Ok(())
}

fn read_features(path: &Path) -> Result<(Vec<String>, analysis::FeatureSet), CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|source| CliError::Read { path: path.display().to_string(), source })?;
    analysis::csv::parse_feature_csv(&raw).map_err(CliError::msg)
}

#[derive(Serialize)]
struct PcaOutput {
    components: Vec<Vec<f64>>,
    explained_variance: Vec<f64>,
    residual_variance: f64,
    mean: Vec<f64>,
    projections: Vec<Vec<f64>>,
}

pub fn analyze_pca(input: &Path, components: usize, out: &Path) -> Result<(), CliError> {
    let (_, features) = read_features(input)?;
    let (proj, pca) = pca_fit_project(&features, components).map_err(CliError::msg)?;
    let output = PcaOutput {
        components: pca.components.chunks(pca.dim).map(|c| c.to_vec()).collect(),
        explained_variance: pca.explained_variance.clone(),
        residual_variance: pca.residual_variance,
        mean: pca.mean.clone(),
        projections: proj.chunks(pca.k).map(|r| r.to_vec()).collect(),
    };
    let out = resolve_out_dir(out);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_json(&out, &output)?;
    println!("analyze pca: {} components, explained {:?}", pca.k, pca.explained_variance);
    Ok(())
}

#[derive(Serialize)]
struct MdOutput {
    distances: Vec<f64>,
    stats: analysis::BoxStats,
}

pub fn analyze_md(input: &Path, query: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let (_, fit) = read_features(input)?;
    let md = Mahalanobis::fit(&fit).map_err(CliError::msg)?;
    let queries = match query {
        Some(q) => read_features(q)?.1,
        None => fit.clone(),
    };
    let distances: Vec<f64> =
        queries.data.chunks(queries.dim).map(|row| md.distance(row)).collect();
    let output = MdOutput { stats: box_stats(&distances), distances };
    let out = resolve_out_dir(out);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_json(&out, &output)?;
    println!("analyze md: median distance {:.4}", output.stats.median);
    Ok(())
}

pub fn analyze_sr(input: &Path, edges: &str, out: &Path) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(input)
        .map_err(|source| CliError::Read { path: input.display().to_string(), source })?;
    let mut episodes = Vec::new();
    for (i, line) in raw.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let distance: f64 = parts
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| CliError::Message(format!("bad distance at line {}", i + 1)))?;
        let success: bool = match parts.next().map(|t| t.trim()) {
            Some("1") | Some("true") => true,
            Some("0") | Some("false") => false,
            other => {
                return Err(CliError::Message(format!(
                    "bad success flag {other:?} at line {}",
                    i + 1
                )))
            }
        };
        episodes.push(EpisodeOutcome { distance, success });
    }
    let edges = parse_edges(edges)?;
    let buckets = success_by_distance(&episodes, &edges).map_err(CliError::msg)?;

    #[derive(Serialize)]
    struct SrOutput {
        edges: Vec<f64>,
        successes: Vec<u64>,
        totals: Vec<u64>,
        rates: Vec<Option<f64>>,
    }
    let output = SrOutput {
        edges: buckets.edges.clone(),
        successes: buckets.successes.clone(),
        totals: buckets.totals.clone(),
        rates: buckets.rates(),
    };
    let out = resolve_out_dir(out);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_json(&out, &output)?;
    println!("analyze sr-by-dist: {} episodes into {} buckets", episodes.len(), output.totals.len());
    Ok(())
}
