//! `tsisc`: command-line front end wiring the library into reproducible runs.
//!
//! One binary, subcommand per task. Every option can also come from a
//! `key=value` config file (`--config run.kv`, explicit flags win), the seed
//! falls back to `TSISC_SEED`, and each run echoes its effective
//! configuration into the output directory as `config.echo.kv` so results
//! are reproducible from the echo alone.

mod merge;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use merge::{parse_u64_list, Merge};
use tsisc_core::array_sim::{AnalogArray, AnalogArrayConfig, Architecture, HalfSelectParams};
use tsisc_core::cell_model::{self, DecayModel, VariabilitySpec};
use tsisc_core::cost_model::{compare, evaluate, CostArchitecture, CostInputs};
use tsisc_core::digital_surface::SaeMap;
use tsisc_core::events::{
    generate_synthetic, inject_noise, read_stream, write_stream, EdgeOrientation, PolarityMode, ReadOptions,
    SceneConfig, StreamFormat, StreamHeader,
};
use tsisc_core::formats;
use tsisc_core::frames::{export_frames, Channels, FrameSpec, Quantization, SurfaceSource, Windowing};
use tsisc_core::stcf::{denoise_stream, roc_curve, Backend, StcfConfig, StcfPolarity, StcfState};

#[derive(Parser)]
#[command(name = "tsisc", version, about = "Analog time-surface construction: simulation, denoising, costs, frames")]
struct Cli {
    /// Key-value config file; explicit flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global RNG seed (fallback: TSISC_SEED env var, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for results and the config echo.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled stream (moving edge, optional noise).
    Gen(GenArgs),
    /// Replay a stream through the analog array and dump voltage surfaces.
    Simulate(SimulateArgs),
    /// Run the correlation filter; optionally sweep thresholds for ROC/AUC.
    Denoise(DenoiseArgs),
    /// Evaluate the power/area/latency model and comparison ratios.
    Cost(CostArgs),
    /// Fit the retention model to a measured voltage trace.
    Fit(FitArgs),
    /// Export time-surface frames for CV pipelines.
    Export(ExportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Stream preset: `edge` (moving-edge signal) or `noise` (noise only).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    width: Option<u16>,
    #[arg(long)]
    height: Option<u16>,
    /// Stream duration (e.g. `2s`, `500ms`, `1500us`).
    #[arg(long)]
    duration: Option<String>,
    /// Edge speed in pixels per second.
    #[arg(long)]
    speed: Option<f64>,
    #[arg(long)]
    orientation: Option<String>,
    /// Gaussian timestamp jitter sigma (duration).
    #[arg(long)]
    jitter: Option<String>,
    /// Alternate edge polarity between sweeps.
    #[arg(long)]
    alternate_polarity: bool,
    /// Poisson noise rate to merge in, Hz per pixel.
    #[arg(long)]
    noise: Option<f64>,
    /// Output format: `binary` or `csv`.
    #[arg(long)]
    format: Option<String>,
    /// Output stream path (default `<out-dir>/stream.evb` or `.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Input stream (`.csv` or binary).
    #[arg(long = "in")]
    input: PathBuf,
    /// Architecture: `3d` or `2d`.
    #[arg(long)]
    arch: Option<String>,
    /// Cell calibration: `20fF`, `10fF`, `tg`, or a calibration file path.
    #[arg(long)]
    cap: Option<String>,
    /// Per-cell variability: `zero` or `calibrated`.
    #[arg(long)]
    variability: Option<String>,
    /// Read a surface every interval (duration).
    #[arg(long)]
    read_every: Option<String>,
    /// Explicit comma-separated read instants (microseconds).
    #[arg(long)]
    read_at: Option<String>,
    /// Half-select write pulse (ns, 2D only).
    #[arg(long)]
    tp_ns: Option<f64>,
    /// Half-select on-state time constant (ns, 2D only).
    #[arg(long)]
    tau_on_ns: Option<f64>,
    /// Column-coupling voltage loss per write (V, 2D only).
    #[arg(long)]
    delta_v: Option<f64>,
    #[arg(long)]
    polarity: Option<String>,
    /// Also write the first half-select histogram (2D only).
    #[arg(long)]
    histogram: bool,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// `timestamp` (digital reference) or `voltage` (analog emulation).
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    cap: Option<String>,
    #[arg(long)]
    variability: Option<String>,
    /// Correlation time window (duration, default 24ms).
    #[arg(long)]
    tau_tw: Option<String>,
    /// Support threshold.
    #[arg(long)]
    th: Option<u32>,
    /// Patch radius (1 = 3x3).
    #[arg(long)]
    radius: Option<usize>,
    /// Polarity handling: `merged`, `split`, or `split-merged`.
    #[arg(long)]
    polarity: Option<String>,
    /// Sweep thresholds and write roc.csv + AUC (labeled input required).
    #[arg(long)]
    sweep_th: bool,
    /// Do not write noise-classified events into the filter state.
    #[arg(long)]
    no_write_noise: bool,
    /// Filtered stream output path (default `<out-dir>/filtered.evb`).
    #[arg(long)]
    filtered_out: Option<PathBuf>,
}

#[derive(Args)]
struct CostArgs {
    /// Key-value file overriding any cost constant.
    #[arg(long)]
    constants: Option<PathBuf>,
    /// `all` or one of `isc-3d`, `isc-2d`, `sram-bose`, `sram-rios`.
    #[arg(long)]
    arch: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    /// Trace CSV: `dt_us,volts` per line, `#` comments.
    #[arg(long = "in")]
    input: PathBuf,
    /// Calibration output (default `<out-dir>/calibration.kv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Label recorded in the calibration file.
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Surface back-end: `digital` or `analog`.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    cap: Option<String>,
    #[arg(long)]
    variability: Option<String>,
    /// Digital decay constant (duration, default 10ms).
    #[arg(long)]
    tau: Option<String>,
    /// Frame window (duration, default 50ms).
    #[arg(long)]
    window: Option<String>,
    /// Explicit comma-separated frame instants (microseconds).
    #[arg(long)]
    at: Option<String>,
    /// Output size: `224` or `320x240`.
    #[arg(long)]
    size: Option<String>,
    /// `merged` (1 frame/window) or `split` (per polarity).
    #[arg(long)]
    channels: Option<String>,
    /// `u8` (PGM) or `f32` (TSF1).
    #[arg(long)]
    quant: Option<String>,
    /// Emit the trailing partial window as a frame.
    #[arg(long)]
    emit_partial: bool,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let file_map = match &cli.config {
        None => BTreeMap::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            formats::parse_kv(&text).map_err(|e| anyhow!("config {}: {e}", path.display()))?
        }
    };
    let merge = Merge::new(&file_map);
    let seed = match cli.seed {
        Some(s) => s,
        None => match merge.raw("seed") {
            Some(v) => v.parse().map_err(|_| anyhow!("config seed: bad integer {v:?}"))?,
            None => std::env::var("TSISC_SEED").ok().and_then(|v| v.parse().ok()).unwrap_or(0),
        },
    };
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;

    let mut echo = BTreeMap::new();
    echo.insert("seed".to_string(), seed.to_string());
    match &cli.command {
        Command::Gen(args) => cmd_gen(args, &merge, seed, &cli.out_dir, &mut echo)?,
        Command::Simulate(args) => cmd_simulate(args, &merge, seed, &cli.out_dir, &mut echo)?,
        Command::Denoise(args) => cmd_denoise(args, &merge, seed, &cli.out_dir, &mut echo)?,
        Command::Cost(args) => cmd_cost(args, &merge, &cli.out_dir, &mut echo)?,
        Command::Fit(args) => cmd_fit(args, &merge, &cli.out_dir, &mut echo)?,
        Command::Export(args) => cmd_export(args, &merge, seed, &cli.out_dir, &mut echo)?,
    }

    let echo_path = cli.out_dir.join("config.echo.kv");
    let mut w = BufWriter::new(File::create(&echo_path)?);
    formats::write_kv(&mut w, &echo)?;
    w.flush()?;
    Ok(())
}

fn load_stream(path: &Path) -> Result<(StreamHeader, Vec<tsisc_core::events::EventRecord>)> {
    let format = StreamFormat::from_path(path);
    read_stream(path, format, ReadOptions::default()).with_context(|| format!("reading {}", path.display()))
}

fn decay_model(cap: &str) -> Result<DecayModel> {
    if let Some(m) = DecayModel::by_label(cap) {
        return Ok(m);
    }
    let path = Path::new(cap);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return DecayModel::from_kv_str(&text).map_err(|e| anyhow!("calibration {}: {e}", path.display()));
    }
    bail!("unknown calibration {cap:?}: expected 20fF, 10fF, tg, or a calibration file path")
}

fn variability_spec(name: &str, seed: u64) -> Result<VariabilitySpec> {
    match name {
        "zero" | "none" => Ok(VariabilitySpec::zero(seed)),
        "calibrated" => Ok(VariabilitySpec::calibrated(seed)),
        other => bail!("unknown variability {other:?}: expected zero or calibrated"),
    }
}

fn stcf_polarity(name: &str) -> Result<StcfPolarity> {
    match name {
        "merged" => Ok(StcfPolarity::Merged),
        "split" => Ok(StcfPolarity::Split),
        "split-merged" => Ok(StcfPolarity::SplitMergedDecision),
        other => bail!("unknown polarity mode {other:?}"),
    }
}

fn cmd_gen(args: &GenArgs, merge: &Merge, seed: u64, out_dir: &Path, echo: &mut BTreeMap<String, String>) -> Result<()> {
    let preset = merge.string("preset", args.preset.clone(), "edge")?;
    let width = merge.value("width", args.width, 64u16)?;
    let height = merge.value("height", args.height, 64u16)?;
    let duration_us = merge.duration_us("duration", args.duration.clone(), 2_000_000)?;
    let speed = merge.value("speed", args.speed, 128.0)?;
    let orientation = merge.string("orientation", args.orientation.clone(), "vertical")?;
    let jitter_us = merge.duration_us("jitter", args.jitter.clone(), 200)?;
    let alternate = args.alternate_polarity || merge.flag("alternate-polarity")?;
    let noise = merge.value("noise", args.noise, 0.0)?;
    let format_name = merge.string("format", args.format.clone(), "binary")?;
    let format = match format_name.as_str() {
        "binary" => StreamFormat::Binary,
        "csv" => StreamFormat::Csv,
        other => bail!("unknown format {other:?}"),
    };
    let default_name = if format == StreamFormat::Csv { "stream.csv" } else { "stream.evb" };
    let out = args.out.clone().unwrap_or_else(|| out_dir.join(default_name));

    let (header, events) = match preset.as_str() {
        "edge" => {
            let scene = SceneConfig {
                width,
                height,
                duration_us,
                edge_speed_px_s: speed,
                orientation: match orientation.as_str() {
                    "vertical" => EdgeOrientation::Vertical,
                    "horizontal" => EdgeOrientation::Horizontal,
                    other => bail!("unknown orientation {other:?}"),
                },
                jitter_sigma_us: jitter_us as f64,
                alternate_polarity: alternate,
                seed,
            };
            generate_synthetic(&scene)?
        }
        "noise" => (StreamHeader::new(width, height, duration_us).with_labels(true), Vec::new()),
        other => bail!("unknown preset {other:?}"),
    };
    let (header, events) = if noise > 0.0 || preset == "noise" {
        inject_noise(&events, &header, noise, seed.wrapping_add(1))?
    } else {
        (header, events)
    };
    write_stream(&header, &events, &out, format)?;
    println!("wrote {} events ({}x{}, {} us) to {}", events.len(), header.width, header.height, header.duration_us, out.display());

    for (k, v) in [
        ("subcommand", "gen".to_string()),
        ("preset", preset),
        ("width", width.to_string()),
        ("height", height.to_string()),
        ("duration_us", duration_us.to_string()),
        ("speed", speed.to_string()),
        ("orientation", orientation),
        ("jitter_us", jitter_us.to_string()),
        ("alternate_polarity", alternate.to_string()),
        ("noise_hz_per_px", noise.to_string()),
        ("format", format_name),
        ("out", out.display().to_string()),
    ] {
        echo.insert(k.to_string(), v);
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, merge: &Merge, seed: u64, out_dir: &Path, echo: &mut BTreeMap<String, String>) -> Result<()> {
    let (header, events) = load_stream(&args.input)?;
    let arch_name = merge.string("arch", args.arch.clone(), "3d")?;
    let architecture = match arch_name.as_str() {
        "3d" => Architecture::ThreeD,
        "2d" => Architecture::TwoD,
        other => bail!("unknown architecture {other:?}"),
    };
    let cap = merge.string("cap", args.cap.clone(), "20fF")?;
    let model = decay_model(&cap)?;
    let var_name = merge.string("variability", args.variability.clone(), "zero")?;
    let variability = variability_spec(&var_name, seed)?;
    let polarity_name = merge.string("polarity", args.polarity.clone(), "merged")?;

    let read_times: Vec<u64> = if let Some(list) = merge.opt_string("read-at", args.read_at.clone())? {
        parse_u64_list(&list)?
    } else {
        let every = merge.duration_us("read-every", args.read_every.clone(), 10_000)?;
        if every == 0 {
            bail!("--read-every must be > 0");
        }
        (1..=header.duration_us / every).map(|k| k * every).collect()
    };

    let mut config = AnalogArrayConfig::new(header.width, header.height, architecture);
    config.polarity_mode = match polarity_name.as_str() {
        "merged" => PolarityMode::Merged,
        "split" => PolarityMode::Split,
        other => bail!("unknown polarity {other:?}"),
    };
    config.half_select = HalfSelectParams {
        pulse_ns: merge.value("tp-ns", args.tp_ns, 5.0)?,
        tau_on_ns: merge.value("tau-on-ns", args.tau_on_ns, 100.0)?,
        delta_v: merge.value("delta-v", args.delta_v, 0.0)?,
    };
    config.record_events = architecture == Architecture::TwoD;

    let mut array = AnalogArray::new(config.clone(), &model, &variability)?;
    let surfaces = array.replay(events.iter().copied(), &read_times)?;
    for (surface, t) in surfaces.iter().zip(&read_times) {
        let path = out_dir.join(format!("surface_{t:012}.tsf"));
        let mut w = BufWriter::new(File::create(&path)?);
        formats::write_tsf1(&mut w, surface)?;
        w.flush()?;
    }
    println!("replayed {} events; wrote {} surfaces to {}", events.len(), surfaces.len(), out_dir.display());

    if architecture == Architecture::TwoD {
        let stats = array.stats();
        let path = out_dir.join("halfselect.csv");
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "event_index,dt_us,dv_volts")?;
        for e in &stats.events {
            writeln!(w, "{},{},{}", e.event_index, e.dt_us, e.dv_volts)?;
        }
        if stats.dropped_records > 0 {
            writeln!(w, "# truncated: {} further records not written", stats.dropped_records)?;
        }
        w.flush()?;
        println!(
            "half-select: {} row disturbances, {} column disturbances -> {}",
            stats.row_disturb_count,
            stats.column_disturb_count,
            path.display()
        );
        if args.histogram || merge.flag("histogram")? {
            let hist = &stats.first_half_select;
            let path = out_dir.join("first_halfselect_histogram.csv");
            let mut w = BufWriter::new(File::create(&path)?);
            writeln!(w, "bin_start_us,count")?;
            for (i, c) in hist.counts.iter().enumerate() {
                writeln!(w, "{},{}", i as u64 * hist.bin_width_us, c)?;
            }
            writeln!(w, "overflow,{}", hist.overflow)?;
            w.flush()?;
        }
    }

    for (k, v) in [
        ("subcommand", "simulate".to_string()),
        ("in", args.input.display().to_string()),
        ("arch", arch_name),
        ("cap", cap),
        ("variability", var_name),
        ("polarity", polarity_name),
        ("reads", read_times.len().to_string()),
        ("tp_ns", config.half_select.pulse_ns.to_string()),
        ("tau_on_ns", config.half_select.tau_on_ns.to_string()),
        ("delta_v", config.half_select.delta_v.to_string()),
    ] {
        echo.insert(k.to_string(), v);
    }
    Ok(())
}

fn cmd_denoise(args: &DenoiseArgs, merge: &Merge, seed: u64, out_dir: &Path, echo: &mut BTreeMap<String, String>) -> Result<()> {
    let (header, events) = load_stream(&args.input)?;
    let backend_name = merge.string("backend", args.backend.clone(), "timestamp")?;
    let backend = match backend_name.as_str() {
        "timestamp" => Backend::Timestamp,
        "voltage" => Backend::Voltage,
        other => bail!("unknown backend {other:?}"),
    };
    let cap = merge.string("cap", args.cap.clone(), "20fF")?;
    let var_name = merge.string("variability", args.variability.clone(), "zero")?;
    let polarity_name = merge.string("polarity", args.polarity.clone(), "merged")?;
    let config = StcfConfig {
        radius: merge.value("radius", args.radius, 1)?,
        tau_tw_us: merge.duration_us("tau-tw", args.tau_tw.clone(), 24_000)?,
        threshold: merge.value("th", args.th, 2)?,
        backend,
        polarity: stcf_polarity(&polarity_name)?,
        write_noise: !(args.no_write_noise || merge.flag("no-write-noise")?),
    };
    let model = decay_model(&cap)?;
    let variability = variability_spec(&var_name, seed)?;
    let make_state = || -> Result<StcfState, tsisc_core::stcf::StcfError> {
        match backend {
            Backend::Timestamp => Ok(StcfState::timestamp(header.width, header.height, &config)),
            Backend::Voltage => StcfState::voltage(header.width, header.height, &config, &model, &variability),
        }
    };

    let mut summary = BTreeMap::new();
    let mut state = make_state()?;
    let (outcome, filtered) = denoise_stream(&events, &config, &mut state)?;
    summary.insert("events_in".to_string(), events.len().to_string());
    summary.insert("events_out".to_string(), filtered.len().to_string());
    if let Some(c) = &outcome.confusion {
        summary.insert("tpr".to_string(), format!("{:.6}", c.tpr()));
        summary.insert("fpr".to_string(), format!("{:.6}", c.fpr()));
    }

    let sweep = args.sweep_th || merge.flag("sweep-th")?;
    if sweep {
        let roc_outcome = roc_curve(&events, &config, make_state)?;
        let roc_path = out_dir.join("roc.csv");
        let mut w = BufWriter::new(File::create(&roc_path)?);
        writeln!(w, "th,fpr,tpr")?;
        for p in &roc_outcome.roc {
            writeln!(w, "{},{:.6},{:.6}", p.threshold, p.fpr, p.tpr)?;
        }
        w.flush()?;
        let auc = roc_outcome.auc.unwrap();
        summary.insert("auc".to_string(), format!("{auc:.6}"));
        println!("auc {auc:.4} -> {}", roc_path.display());
    }

    let filtered_path = args
        .filtered_out
        .clone()
        .unwrap_or_else(|| out_dir.join("filtered.evb"));
    let out_header = StreamHeader { has_labels: header.has_labels, ..header.clone() };
    write_stream(&out_header, &filtered, &filtered_path, StreamFormat::from_path(&filtered_path))?;
    println!("kept {} of {} events -> {}", filtered.len(), events.len(), filtered_path.display());

    let summary_path = out_dir.join("summary.kv");
    let mut w = BufWriter::new(File::create(&summary_path)?);
    formats::write_kv(&mut w, &summary)?;
    w.flush()?;

    for (k, v) in [
        ("subcommand", "denoise".to_string()),
        ("in", args.input.display().to_string()),
        ("backend", backend_name),
        ("cap", cap),
        ("variability", var_name),
        ("polarity", polarity_name),
        ("radius", config.radius.to_string()),
        ("tau_tw_us", config.tau_tw_us.to_string()),
        ("th", config.threshold.to_string()),
        ("write_noise", config.write_noise.to_string()),
        ("sweep_th", sweep.to_string()),
        ("filtered_out", filtered_path.display().to_string()),
    ] {
        echo.insert(k.to_string(), v);
    }
    Ok(())
}

fn cmd_cost(args: &CostArgs, merge: &Merge, out_dir: &Path, echo: &mut BTreeMap<String, String>) -> Result<()> {
    let mut inputs = CostInputs::default();
    let constants = match (&args.constants, merge.raw("constants")) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(p)) => Some(PathBuf::from(p)),
        (None, None) => None,
    };
    if let Some(path) = &constants {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading constants {}", path.display()))?;
        let map = formats::parse_kv(&text)?;
        inputs.apply_overrides(&map)?;
    }
    let arch_name = merge.string("arch", args.arch.clone(), "all")?;
    let arches: Vec<CostArchitecture> = if arch_name == "all" {
        CostArchitecture::ALL.to_vec()
    } else {
        vec![CostArchitecture::parse(&arch_name).ok_or_else(|| anyhow!("unknown architecture {arch_name:?}"))?]
    };

    let csv_path = out_dir.join("report.csv");
    let txt_path = out_dir.join("report.txt");
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    let mut txt = BufWriter::new(File::create(&txt_path)?);
    writeln!(csv, "architecture,component,calibrated,static_w,dynamic_w,area_mm2,latency_ns")?;
    for arch in &arches {
        let report = evaluate(&inputs, *arch)?;
        writeln!(txt, "== {} ==", arch.name())?;
        writeln!(
            txt,
            "{:<18} {:>14} {:>14} {:>12} {:>12}  source",
            "component", "static [W]", "dynamic [W]", "area [mm2]", "delay [ns]"
        )?;
        for c in &report.components {
            writeln!(csv, "{},{},{},{:e},{:e},{},{}", arch.name(), c.name, c.calibrated, c.static_w, c.dynamic_w, c.area_mm2, c.latency_ns)?;
            writeln!(
                txt,
                "{:<18} {:>14.4e} {:>14.4e} {:>12.5} {:>12.3}  {}",
                c.name,
                c.static_w,
                c.dynamic_w,
                c.area_mm2,
                c.latency_ns,
                if c.calibrated { "calibrated" } else { "published" }
            )?;
        }
        writeln!(
            txt,
            "{:<18} {:>14.4e} {:>14.4e} {:>12.5} {:>12.3}",
            "total",
            report.static_w(),
            report.dynamic_w(),
            report.area_mm2(),
            report.latency_ns()
        )?;
        let shares: Vec<String> = report
            .power_shares_pct()
            .iter()
            .map(|(n, s)| format!("{n} {s:.1}%"))
            .collect();
        writeln!(txt, "power shares: {}", shares.join(", "))?;
        writeln!(txt)?;
    }

    let cmp = compare(&inputs)?;
    let ratios_path = out_dir.join("ratios.csv");
    let mut rw = BufWriter::new(File::create(&ratios_path)?);
    writeln!(rw, "ratio,value")?;
    writeln!(txt, "== headline ratios ==")?;
    for (name, value) in cmp.rows() {
        writeln!(rw, "{name},{value:.4}")?;
        writeln!(txt, "{name:<22} {value:>10.2}")?;
        println!("{name:<22} {value:>10.2}");
    }
    csv.flush()?;
    txt.flush()?;
    rw.flush()?;

    echo.insert("subcommand".to_string(), "cost".to_string());
    echo.insert("arch".to_string(), arch_name);
    if let Some(p) = &constants {
        echo.insert("constants".to_string(), p.display().to_string());
    }
    Ok(())
}

fn cmd_fit(args: &FitArgs, merge: &Merge, out_dir: &Path, echo: &mut BTreeMap<String, String>) -> Result<()> {
    let text = std::fs::read_to_string(&args.input).with_context(|| format!("reading trace {}", args.input.display()))?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (dt, v) = line
            .split_once(',')
            .ok_or_else(|| anyhow!("{}:{}: expected dt_us,volts", args.input.display(), i + 1))?;
        samples.push((
            dt.trim().parse::<f64>().with_context(|| format!("line {}: bad dt {dt:?}", i + 1))?,
            v.trim().parse::<f64>().with_context(|| format!("line {}: bad volts {v:?}", i + 1))?,
        ));
    }
    let (model, report) = cell_model::fit(&samples)?;
    let label = merge.string("label", args.label.clone(), "fit")?;
    let model = DecayModel { label: label.clone(), ..model };
    let out = args.out.clone().unwrap_or_else(|| out_dir.join("calibration.kv"));
    std::fs::write(&out, model.to_kv_string())?;
    println!(
        "fit mse {:.6e} V^2 over {} samples in {} iterations{} -> {}",
        report.mse,
        samples.len(),
        report.iterations,
        if report.degenerate { " (degenerate: second exponential unidentifiable)" } else { "" },
        out.display()
    );

    for (k, v) in [
        ("subcommand", "fit".to_string()),
        ("in", args.input.display().to_string()),
        ("label", label),
        ("out", out.display().to_string()),
        ("mse", format!("{:e}", report.mse)),
        ("iterations", report.iterations.to_string()),
        ("degenerate", report.degenerate.to_string()),
    ] {
        echo.insert(k.to_string(), v);
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs, merge: &Merge, seed: u64, out_dir: &Path, echo: &mut BTreeMap<String, String>) -> Result<()> {
    let (header, events) = load_stream(&args.input)?;
    let backend = merge.string("backend", args.backend.clone(), "digital")?;
    let cap = merge.string("cap", args.cap.clone(), "20fF")?;
    let var_name = merge.string("variability", args.variability.clone(), "zero")?;
    let channels_name = merge.string("channels", args.channels.clone(), "merged")?;
    let channels = match channels_name.as_str() {
        "merged" => Channels::Merged,
        "split" => Channels::Split,
        other => bail!("unknown channels {other:?}"),
    };
    let polarity_mode = match channels {
        Channels::Merged => PolarityMode::Merged,
        Channels::Split => PolarityMode::Split,
    };
    let quant_name = merge.string("quant", args.quant.clone(), "u8")?;
    let quantization = match quant_name.as_str() {
        "u8" => Quantization::U8,
        "f32" | "float" => Quantization::Float32,
        other => bail!("unknown quantization {other:?}"),
    };
    let (out_width, out_height) = parse_size(&merge.string("size", args.size.clone(), "224")?)?;
    let windowing = if let Some(list) = merge.opt_string("at", args.at.clone())? {
        Windowing::Explicit(parse_u64_list(&list)?)
    } else {
        Windowing::FixedUs(merge.duration_us("window", args.window.clone(), 50_000)?)
    };
    let spec = FrameSpec {
        windowing,
        out_width,
        out_height,
        channels,
        quantization,
        emit_partial: args.emit_partial || merge.flag("emit-partial")?,
    };

    let tau_us = merge.duration_us("tau", args.tau.clone(), 10_000)? as f64;
    let mut source = match backend.as_str() {
        "digital" => SurfaceSource::Digital { map: SaeMap::new(header.width, header.height, polarity_mode), tau_us },
        "analog" => {
            let model = decay_model(&cap)?;
            let variability = variability_spec(&var_name, seed)?;
            let mut config = AnalogArrayConfig::new(header.width, header.height, Architecture::ThreeD);
            config.polarity_mode = polarity_mode;
            SurfaceSource::Analog(AnalogArray::new(config, &model, &variability)?)
        }
        other => bail!("unknown backend {other:?}"),
    };

    let frames_dir = out_dir.join("frames");
    let index = export_frames(&events, &header, &mut source, &spec, &frames_dir)?;
    println!("wrote {} frame files + {}", index.entries.len(), index.index_path.display());

    for (k, v) in [
        ("subcommand", "export".to_string()),
        ("in", args.input.display().to_string()),
        ("backend", backend),
        ("cap", cap),
        ("variability", var_name),
        ("channels", channels_name),
        ("quant", quant_name),
        ("size", format!("{out_width}x{out_height}")),
        ("tau_us", tau_us.to_string()),
        ("frames", index.entries.len().to_string()),
    ] {
        echo.insert(k.to_string(), v);
    }
    Ok(())
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    if let Some((w, h)) = s.split_once('x') {
        return Ok((w.parse().context("bad size width")?, h.parse().context("bad size height")?));
    }
    let n: usize = s.parse().with_context(|| format!("bad size {s:?}"))?;
    Ok((n, n))
}
