//! `zsm`: zonotope shadow matching from the command line.
//!
//! Subcommands: `preprocess` (mesh -> building cache), `run-zsm` (set-valued
//! estimate), `run-sm` (grid baseline), `oracle-check` (rasterized occlusion
//! agreement), `bench` (Minkowski representation benchmark).

mod schema;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use schema::*;
use zsm_core::baseline::{make_grid, predict_visibility, score_and_select};
use zsm_core::bench::{bench_minkowski, records_to_csv};
use zsm_core::map::{aoi_from, build_building, Building, GroundModel};
use zsm_core::mesh::{load_mesh, segment_buildings, MeshFormat};
use zsm_core::polygon::MultiPolygon2D;
use zsm_core::runner::{classify, run_zsm, Scenario, ScenarioFile, Visibility};
use zsm_core::scenario::occluded;

#[derive(Parser)]
#[command(name = "zsm", version, about = "Set-valued GNSS shadow matching")]
struct Cli {
    /// Worker threads (1 keeps timings reproducible; computations are
    /// currently sequential regardless).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapFormat {
    Obj,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Segment a triangle mesh into buildings and convert them to
    /// constrained zonotopes.
    Preprocess {
        /// Input mesh (OBJ subset or JSON).
        #[arg(long)]
        map: PathBuf,
        /// Input format; inferred from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<MapFormat>,
        /// Merge each segmented component into one convex part.
        #[arg(long, default_value_t = true, overrides_with = "no_merge")]
        merge: bool,
        /// One part per triangle instead of merging.
        #[arg(long)]
        no_merge: bool,
        /// Vertex welding tolerance in meters.
        #[arg(long, default_value_t = 1e-6)]
        weld_tol: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the set-valued estimator on a scenario.
    RunZsm {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Shadow extrusion length in meters.
        #[arg(long, default_value_t = 1e5)]
        epsilon: f64,
        /// Override the scenario's LOS threshold (dB-Hz).
        #[arg(long)]
        threshold: Option<f64>,
        /// Override the scenario's minimum elevation (degrees).
        #[arg(long)]
        min_elevation: Option<f64>,
        /// Remove building footprints from the AOI.
        #[arg(long)]
        exclude_footprints: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the grid-based shadow-matching baseline.
    RunSm {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Grid spacing in meters.
        #[arg(long)]
        grid: f64,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        exclude_footprints: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the ZSM estimate against a rasterized occlusion oracle.
    OracleCheck {
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Raster pitch in meters.
        #[arg(long, default_value_t = 0.5)]
        pitch: f64,
        #[arg(long, default_value_t = 1e5)]
        epsilon: f64,
        #[arg(long)]
        exclude_footprints: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time constrained-zonotope vs vertex-representation Minkowski sums.
    Bench {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 2026)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}: {1}")]
    Json(PathBuf, serde_json::Error),
    #[error("{path}: unsupported schema version {found} (expected {expected})")]
    Schema {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("cannot infer map format from {0} (use --format)")]
    UnknownFormat(PathBuf),
    #[error(transparent)]
    Mesh(#[from] zsm_core::mesh::MeshError),
    #[error(transparent)]
    Map(#[from] zsm_core::map::MapError),
    #[error(transparent)]
    Runner(#[from] zsm_core::runner::RunnerError),
    #[error(transparent)]
    Baseline(#[from] zsm_core::baseline::BaselineError),
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let body = serde_json::to_vec_pretty(value).expect("serializable report");
    write_file(path, &body)
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Json(path.to_path_buf(), e))
}

fn load_cache(path: &Path) -> Result<BuildingsCache, CliError> {
    let cache: BuildingsCache = load_json(path)?;
    if cache.schema_version != CACHE_SCHEMA_VERSION {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            found: cache.schema_version,
            expected: CACHE_SCHEMA_VERSION,
        });
    }
    Ok(cache)
}

fn load_scenario(path: &Path) -> Result<ScenarioFile, CliError> {
    let file: ScenarioFile = load_json(path)?;
    if file.schema_version != zsm_core::runner::SCENARIO_SCHEMA_VERSION {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            found: file.schema_version,
            expected: zsm_core::runner::SCENARIO_SCHEMA_VERSION,
        });
    }
    Ok(file)
}

fn footprints_of(buildings: &[Building]) -> MultiPolygon2D {
    let mut fp = MultiPolygon2D::empty();
    for b in buildings {
        fp = MultiPolygon2D::union(&fp, &b.footprint);
    }
    fp
}

fn resolve_scene(
    file: &ScenarioFile,
    buildings: &[Building],
    exclude_footprints: bool,
    threshold: Option<f64>,
    min_elevation: Option<f64>,
) -> Result<(Scenario, GroundModel), CliError> {
    let (mut scenario, aoi_spec) = Scenario::resolve(file)?;
    if let Some(t) = threshold {
        scenario.los_threshold = t;
    }
    if let Some(e) = min_elevation {
        scenario.min_elevation_deg = e;
    }
    let ground = aoi_from(&aoi_spec, exclude_footprints, buildings)?;
    Ok((scenario, ground))
}

fn cmd_preprocess(
    map: &Path,
    format: Option<MapFormat>,
    merge: bool,
    weld_tol: f64,
    out: &Path,
) -> Result<u8, CliError> {
    let bytes = read_file(map)?;
    let format = match format {
        Some(MapFormat::Obj) => MeshFormat::ObjSubset,
        Some(MapFormat::Json) => MeshFormat::Json,
        None => match map.extension().and_then(|e| e.to_str()) {
            Some("obj") => MeshFormat::ObjSubset,
            Some("json") => MeshFormat::Json,
            _ => return Err(CliError::UnknownFormat(map.to_path_buf())),
        },
    };
    let start = Instant::now();
    let mesh = load_mesh(bytes.as_slice(), format, true)?;
    let components = segment_buildings(&mesh, weld_tol);
    let mut buildings = Vec::with_capacity(components.len());
    for (i, comp) in components.iter().enumerate() {
        buildings.push(build_building(comp, merge, &format!("b{i:03}"))?);
    }
    let offline_seconds = start.elapsed().as_secs_f64();
    let cache = BuildingsCache {
        schema_version: CACHE_SCHEMA_VERSION,
        map_sha256: hex_sha256(&bytes),
        merge,
        weld_tol,
        offline_seconds,
        buildings,
    };
    write_json(&out.join("buildings.json"), &cache)?;
    println!(
        "preprocessed {} buildings in {:.3} s -> {}",
        cache.buildings.len(),
        offline_seconds,
        out.join("buildings.json").display()
    );
    Ok(0)
}

fn hex_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_run_zsm(
    cache_path: &Path,
    scenario_path: &Path,
    epsilon: f64,
    threshold: Option<f64>,
    min_elevation: Option<f64>,
    exclude_footprints: bool,
    out: &Path,
) -> Result<u8, CliError> {
    let cache = load_cache(cache_path)?;
    let file = load_scenario(scenario_path)?;
    let (scenario, ground) = resolve_scene(
        &file,
        &cache.buildings,
        exclude_footprints,
        threshold,
        min_elevation,
    )?;
    let mut report = run_zsm(&cache.buildings, &scenario, &ground, epsilon)?;
    report.offline_seconds = cache.offline_seconds;
    let empty = report.estimate.is_empty();
    let svg = svg::render(
        &ground.aoi,
        &footprints_of(&cache.buildings),
        &report.estimate,
        scenario.true_position,
    );
    write_file(&out.join("estimate.svg"), svg.as_bytes())?;
    write_json(
        &out.join("zsm_report.json"),
        &ZsmReportFile {
            schema_version: REPORT_SCHEMA_VERSION,
            epsilon,
            los_threshold: scenario.los_threshold,
            report,
        },
    )?;
    println!(
        "zsm estimate written to {} ({})",
        out.join("zsm_report.json").display(),
        if empty { "EMPTY" } else { "nonempty" }
    );
    Ok(if empty { 3 } else { 0 })
}

fn cmd_run_sm(
    cache_path: &Path,
    scenario_path: &Path,
    spacing: f64,
    threshold: Option<f64>,
    exclude_footprints: bool,
    out: &Path,
) -> Result<u8, CliError> {
    let cache = load_cache(cache_path)?;
    let file = load_scenario(scenario_path)?;
    let (scenario, ground) =
        resolve_scene(&file, &cache.buildings, exclude_footprints, threshold, None)?;
    let grid = make_grid(&ground, spacing)?;
    let sats: Vec<Vector3<f64>> = scenario.satellites.iter().map(|s| s.position).collect();

    let key = format!(
        "{}:{}:{:.6}:{:.3},{:.3}",
        cache.map_sha256,
        grid.candidates.len(),
        spacing,
        grid.origin[0],
        grid.origin[1]
    );
    let vis_path = out.join(format!("vis_{}.json", &hex_sha256(key.as_bytes())[..16]));
    let t0 = Instant::now();
    let matrix = match load_json::<VisibilityCache>(&vis_path) {
        Ok(v) if v.key == key && v.schema_version == CACHE_SCHEMA_VERSION => v.matrix,
        _ => {
            let m = predict_visibility(&grid, &cache.buildings, &sats, &ground);
            write_json(
                &vis_path,
                &VisibilityCache {
                    schema_version: CACHE_SCHEMA_VERSION,
                    key,
                    grid: grid.clone(),
                    matrix: m.clone(),
                },
            )?;
            m
        }
    };
    let offline_seconds = t0.elapsed().as_secs_f64();

    let measured: Vec<Visibility> = scenario
        .satellites
        .iter()
        .map(|s| classify(s.cno, scenario.los_threshold))
        .collect();
    let t1 = Instant::now();
    let report = score_and_select(&grid, &matrix, &measured, &scenario.street_frame)?;
    let online_seconds = t1.elapsed().as_secs_f64();

    let best_region = {
        // mark best candidates as small squares for the rendering
        let h = 0.25 * spacing;
        let rings: Vec<Vec<[f64; 2]>> = report
            .best
            .iter()
            .map(|c| {
                vec![
                    [c[0] - h, c[1] - h],
                    [c[0] + h, c[1] - h],
                    [c[0] + h, c[1] + h],
                    [c[0] - h, c[1] + h],
                ]
            })
            .collect();
        MultiPolygon2D::from_rings(&rings)
    };
    let svg = svg::render(
        &ground.aoi,
        &footprints_of(&cache.buildings),
        &best_region,
        scenario.true_position,
    );
    write_file(&out.join("sm_estimate.svg"), svg.as_bytes())?;
    write_json(
        &out.join("sm_report.json"),
        &SmReportFile {
            schema_version: REPORT_SCHEMA_VERSION,
            grid_spacing: spacing,
            candidate_count: grid.candidates.len(),
            offline_seconds,
            online_seconds,
            report,
        },
    )?;
    println!(
        "sm report written to {} ({} candidates)",
        out.join("sm_report.json").display(),
        grid.candidates.len()
    );
    Ok(0)
}

fn cmd_oracle_check(
    cache_path: &Path,
    scenario_path: &Path,
    pitch: f64,
    epsilon: f64,
    exclude_footprints: bool,
    out: &Path,
) -> Result<u8, CliError> {
    let cache = load_cache(cache_path)?;
    let file = load_scenario(scenario_path)?;
    let (scenario, ground) =
        resolve_scene(&file, &cache.buildings, exclude_footprints, None, None)?;
    let report = run_zsm(&cache.buildings, &scenario, &ground, epsilon)?;
    let zero_area_estimate = report.estimate.area() <= 0.0;

    let measured: Vec<Visibility> = scenario
        .satellites
        .iter()
        .map(|s| classify(s.cno, scenario.los_threshold))
        .collect();
    let m = ground.aoi.measures();
    let (lo, hi) = m.bbox.expect("nonempty aoi");
    let nx = ((hi[0] - lo[0]) / pitch).ceil() as usize;
    let ny = ((hi[1] - lo[1]) / pitch).ceil() as usize;
    let fp = footprints_of(&cache.buildings);

    // classify each raster cell by occlusion oracle and by estimate membership
    let mut cells: Vec<Option<(bool, bool)>> = vec![None; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let p = [
                lo[0] + (i as f64 + 0.5) * pitch,
                lo[1] + (j as f64 + 0.5) * pitch,
            ];
            if !ground.aoi.point_in(p) || fp.point_in(p) {
                continue;
            }
            let h = ground.height_at(p).unwrap_or(0.0);
            let from = Vector3::new(p[0], p[1], h);
            let oracle = scenario.satellites.iter().zip(&measured).all(|(s, lbl)| {
                let occ = occluded(&from, &s.position, &cache.buildings);
                occ == (*lbl == Visibility::Nlos)
            });
            cells[j * nx + i] = Some((oracle, report.estimate.point_in(p)));
        }
    }
    // exclude a band of 2 cells around any oracle or estimate boundary
    let band = 2isize;
    let mut total = 0usize;
    let mut compared = 0usize;
    let mut agree = 0usize;
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            let Some((o, e)) = cells[(j as usize) * nx + i as usize] else {
                continue;
            };
            total += 1;
            let mut on_boundary = false;
            'scan: for dj in -band..=band {
                for di in -band..=band {
                    let (ni, nj) = (i + di, j + dj);
                    if ni < 0 || nj < 0 || ni >= nx as isize || nj >= ny as isize {
                        on_boundary = true; // AOI edge
                        break 'scan;
                    }
                    match cells[(nj as usize) * nx + ni as usize] {
                        Some((no, ne)) if no == o && ne == e => {}
                        _ => {
                            on_boundary = true;
                            break 'scan;
                        }
                    }
                }
            }
            if on_boundary {
                continue;
            }
            compared += 1;
            if o == e {
                agree += 1;
            }
        }
    }
    let agreement = if compared == 0 {
        0.0
    } else {
        agree as f64 / compared as f64
    };
    write_json(
        &out.join("oracle_report.json"),
        &OracleReportFile {
            schema_version: REPORT_SCHEMA_VERSION,
            pitch,
            cells_total: total,
            cells_compared: compared,
            cells_agree: agree,
            agreement,
            zero_area_estimate,
        },
    )?;
    println!(
        "oracle agreement {agreement:.4} over {compared}/{total} cells{}",
        if zero_area_estimate {
            " (zero-area estimate)"
        } else {
            ""
        }
    );
    Ok(0)
}

fn cmd_bench(trials: usize, seed: u64, out: &Path) -> Result<u8, CliError> {
    let (records, summary) = bench_minkowski(trials, seed);
    write_file(&out.join("bench.csv"), records_to_csv(&records).as_bytes())?;
    write_json(
        &out.join("bench.json"),
        &BenchReportFile {
            schema_version: REPORT_SCHEMA_VERSION,
            seed,
            summary: summary.clone(),
        },
    )?;
    println!(
        "median conzono {:.3e} s, vertex-rep {:.3e} s, ratio {:.1}x",
        summary.conzono_median_s, summary.vertex_rep_median_s, summary.median_ratio
    );
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if cli.threads > 1 {
        log::info!("--threads > 1 requested; computations currently run sequentially");
    }
    match cli.cmd {
        Cmd::Preprocess {
            map,
            format,
            merge,
            no_merge,
            weld_tol,
            out,
        } => cmd_preprocess(&map, format, merge && !no_merge, weld_tol, &out),
        Cmd::RunZsm {
            cache,
            scenario,
            epsilon,
            threshold,
            min_elevation,
            exclude_footprints,
            out,
        } => cmd_run_zsm(
            &cache,
            &scenario,
            epsilon,
            threshold,
            min_elevation,
            exclude_footprints,
            &out,
        ),
        Cmd::RunSm {
            cache,
            scenario,
            grid,
            threshold,
            exclude_footprints,
            out,
        } => cmd_run_sm(&cache, &scenario, grid, threshold, exclude_footprints, &out),
        Cmd::OracleCheck {
            cache,
            scenario,
            pitch,
            epsilon,
            exclude_footprints,
            out,
        } => cmd_oracle_check(&cache, &scenario, pitch, epsilon, exclude_footprints, &out),
        Cmd::Bench { trials, seed, out } => cmd_bench(trials, seed, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ZSM_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
