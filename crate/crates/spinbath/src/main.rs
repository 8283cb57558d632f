#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinbath::csvio::{self, provenance};
use spinbath::{parallel, Error, RunConfig};
use spinbath_core::bath::{flip_flop_factor, polarization};
use spinbath_core::datasets::{self, RateUnit};
use spinbath_core::fit::{self, FitOptions, GuessContext, ModelSpec, Series};
use spinbath_core::pulse::{self, EchoSimulation, Sequence};
use spinbath_core::spectra::{analyze_peaks, build_sticks, convolve};
use spinbath_core::spin::{zeeman_temperature, CenterKind};

#[derive(Parser)]
#[command(name = "spinbath", version, about = "Spin-bath decoherence toolkit for N-V centers in diamond")]
struct Cli {
    /// Output directory (default: $SPINBATH_OUT_DIR, then the config's
    /// output_dir, then the current directory).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bath polarization and flip-flop factor over a temperature range.
    Polarization {
        /// Spectrometer frequency, Hz.
        #[arg(long)]
        freq: Option<f64>,
        /// `min:max:log[:n]`, `min:max:lin[:n]` or a comma list, K.
        #[arg(long, default_value = "1.3:300:log")]
        temps: String,
    },
    /// Field-swept derivative spectrum and peak report.
    Spectrum {
        /// Comma list of centers (n, nv); overrides the config.
        #[arg(long)]
        centers: Option<String>,
        /// Tilt of B0 from [111], degrees.
        #[arg(long)]
        tilt: Option<f64>,
        #[arg(long)]
        temp: Option<f64>,
        #[arg(long)]
        freq: Option<f64>,
    },
    /// Simulate a pulse sequence.
    Simulate {
        /// hahn or ir.
        #[arg(long, default_value = "hahn")]
        sequence: String,
        /// Bath temperature, K.
        #[arg(long)]
        temp: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 2000)]
        realizations: usize,
        /// Largest τ (Hahn) or recovery time (IR), s. Default scales with
        /// the expected decay time.
        #[arg(long)]
        delay_max: Option<f64>,
        #[arg(long, default_value_t = 41)]
        points: usize,
        /// Per-source switching rate at high temperature, 1/s.
        #[arg(long)]
        base_rate: Option<f64>,
        /// T1 for inversion recovery, s.
        #[arg(long, default_value_t = 1.2e-3)]
        t1: f64,
        /// Gaussian noise on inversion-recovery points.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        threads: Option<usize>,
        /// Output file name inside the output directory.
        #[arg(long)]
        output: Option<String>,
    },
    /// Fit a registered model to a dataset or simulated trace.
    Fit {
        #[arg(long)]
        model: String,
        /// CSV file, or `bundled:<name>` (nv-t2, n-t2, nv-t1, n-t1).
        #[arg(long)]
        data: String,
        /// Hold parameters fixed: `name=value` or `name` (at its start value).
        #[arg(long, value_delimiter = ',')]
        fix: Vec<String>,
        /// Release parameters that are fixed by default.
        #[arg(long, value_delimiter = ',')]
        free: Vec<String>,
        /// Starting values, `name=value`.
        #[arg(long, value_delimiter = ',')]
        init: Vec<String>,
        /// Weight by the data uncertainties instead of σ = 1.
        #[arg(long)]
        weighted: bool,
        /// Spectrometer frequency for the T_Ze start value, Hz.
        #[arg(long)]
        freq: Option<f64>,
        #[arg(long, default_value_t = 500)]
        max_iterations: usize,
    },
    /// Evaluate a rate model on a temperature grid.
    ModelEval {
        #[arg(long)]
        model: String,
        /// `name=value,...`; default-fixed parameters may be omitted.
        #[arg(long)]
        params: String,
        #[arg(long, default_value = "1.3:300:log")]
        temps: String,
    },
    /// Simulated echo T2 against temperature.
    T2Scan {
        #[arg(long, default_value = "300,30,20,11.518,8,5,3,2")]
        temps: String,
        #[arg(long, default_value_t = 2000)]
        realizations: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Bundled relaxation tables and dataset validation.
    Dataset {
        /// Export a bundled table (nv-t2, n-t2, nv-t1, n-t1).
        #[arg(long)]
        name: Option<String>,
        /// Validate a dataset file and print its rows.
        #[arg(long)]
        check: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    NotConverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::NotConverged(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<spinbath_core::Error> for Failure {
    fn from(e: spinbath_core::Error) -> Self {
        match e {
            spinbath_core::Error::UnknownModel(_) | spinbath_core::Error::UnknownParameter { .. } => {
                Failure::Usage(format!("{e}\n{}", registry_listing()))
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn registry_listing() -> String {
    let mut s = String::from("available models:");
    for m in fit::registry() {
        let names: Vec<&str> = m.params.iter().map(|p| p.name).collect();
        s.push_str(&format!("\n  {:<20} {} ({})", m.name, m.description, names.join(", ")));
    }
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

struct Context {
    config: RunConfig,
    out_dir: PathBuf,
}

impl Context {
    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, Failure> {
        let path = csvio::output_path(&self.out_dir, name);
        csvio::write_file(&path, contents)?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn header(&self, extra: &str, seed: u64) -> String {
        provenance(&self.config.hash(extra), seed)
    }
}

fn run(cli: Cli) -> CliResult {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| std::env::var_os("SPINBATH_OUT_DIR").map(PathBuf::from))
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let mut ctx = Context { config, out_dir };
    match cli.command {
        Command::Polarization { freq, temps } => cmd_polarization(&ctx, freq, &temps),
        Command::Spectrum {
            centers,
            tilt,
            temp,
            freq,
        } => {
            if let Some(c) = centers {
                ctx.config.centers = parse_centers(&c)?;
            }
            if let Some(t) = tilt {
                ctx.config.sticks.tilt_deg = t;
            }
            if let Some(t) = temp {
                ctx.config.temperature = t;
            }
            if let Some(f) = freq {
                ctx.config.frequency = f;
            }
            ctx.config.validate().map_err(|e| Failure::Usage(e.message))?;
            cmd_spectrum(&ctx)
        }
        Command::Simulate {
            sequence,
            temp,
            seed,
            realizations,
            delay_max,
            points,
            base_rate,
            t1,
            noise,
            threads,
            output,
        } => {
            let seq = Sequence::parse(&sequence)
                .ok_or_else(|| Failure::Usage(format!("unknown sequence `{sequence}` (expected hahn or ir)")))?;
            if let Some(t) = temp {
                ctx.config.temperature = t;
            }
            if let Some(s) = seed {
                ctx.config.seed = s;
            }
            if let Some(r) = base_rate {
                ctx.config.base_rate = r;
            }
            ctx.config.validate().map_err(|e| Failure::Usage(e.message))?;
            let opts = SimulateArgs {
                seq,
                realizations,
                delay_max,
                points,
                t1,
                noise,
                threads,
                output,
            };
            cmd_simulate(&ctx, &opts)
        }
        Command::Fit {
            model,
            data,
            fix,
            free,
            init,
            weighted,
            freq,
            max_iterations,
        } => {
            let args = FitArgs {
                fix,
                free,
                init,
                weighted,
                freq,
                max_iterations,
            };
            cmd_fit(&ctx, &model, &data, &args)
        }
        Command::ModelEval { model, params, temps } => cmd_model_eval(&ctx, &model, &params, &temps),
        Command::T2Scan {
            temps,
            realizations,
            seed,
            threads,
        } => {
            if let Some(s) = seed {
                ctx.config.seed = s;
            }
            cmd_t2_scan(&ctx, &temps, realizations, threads)
        }
        Command::Dataset { name, check } => cmd_dataset(&ctx, name.as_deref(), check.as_deref()),
    }
}

fn parse_centers(s: &str) -> Result<Vec<CenterKind>, Failure> {
    let kinds: Vec<CenterKind> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "n" => Ok(CenterKind::N),
            "nv" => Ok(CenterKind::Nv),
            _ => Err(Failure::Usage(format!("unknown center `{t}` (expected n or nv)"))),
        })
        .collect::<Result<_, _>>()?;
    if kinds.is_empty() {
        return Err(Failure::Usage("no centers given".into()));
    }
    Ok(kinds)
}

/// `min:max:log[:n]`, `min:max:lin[:n]` (n defaults to 50) or `a,b,c`.
fn parse_temps(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("bad temperature range `{s}` (use min:max:log[:n], min:max:lin[:n] or a,b,c)"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let temps: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let n: usize = match parts.get(3) {
            Some(p) => p.trim().parse().map_err(|_| bad())?,
            None => 50,
        };
        if n < 2 || !(hi > lo) {
            return Err(bad());
        }
        let u = |k: usize| k as f64 / (n - 1) as f64;
        match parts[2].trim() {
            "log" if lo > 0.0 => (0..n).map(|k| lo * (hi / lo).powf(u(k))).collect(),
            "lin" => (0..n).map(|k| lo + (hi - lo) * u(k)).collect(),
            _ => return Err(bad()),
        }
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if temps.is_empty() || temps.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Failure::Usage(format!("temperatures must be > 0 K: `{s}`")));
    }
    Ok(temps)
}

fn cmd_polarization(ctx: &Context, freq: Option<f64>, temps: &str) -> CliResult {
    let freq = freq.unwrap_or(ctx.config.frequency);
    let t_ze = zeeman_temperature(freq)?;
    let temps = parse_temps(temps)?;
    let rows = temps
        .iter()
        .map(|&t| Ok((polarization(t, t_ze)?, flip_flop_factor(t, t_ze)?)))
        .collect::<Result<Vec<_>, spinbath_core::Error>>()?;
    let header = ctx.header(&format!("polarization freq={freq:e} temps={temps:?}"), ctx.config.seed);
    ctx.write("polarization.csv", &csvio::render_polarization(&rows, &header))?;
    println!("T_Ze = {t_ze:.4} K");
    Ok(())
}

fn cmd_spectrum(ctx: &Context) -> CliResult {
    let cfg = &ctx.config;
    if cfg.centers.is_empty() {
        return Err(Failure::Usage("no centers configured ([spectrum] centers is empty)".into()));
    }
    let sticks = build_sticks(&cfg.spectrum_centers(), cfg.frequency, cfg.temperature, &cfg.sticks)?;
    let mut spec = convolve(&sticks, &cfg.grid);
    spec.meta.frequency = cfg.frequency;
    spec.meta.temperature = cfg.temperature;
    for d in &spec.diagnostics {
        eprintln!("warning: {d:?}");
    }
    let report = analyze_peaks(&spec, cfg.peak_threshold);
    let header = ctx.header("spectrum", cfg.seed);
    ctx.write("spectrum.csv", &csvio::render_spectrum(&spec, &header))?;
    ctx.write("peaks.csv", &csvio::render_peaks(&report, &header))?;
    println!("{} peaks", report.peaks.len());
    for p in &report.peaks {
        println!("  {:.6} T  pp width {:.3} G", p.center_field, p.pp_width * 1e4);
    }
    Ok(())
}

struct SimulateArgs {
    seq: Sequence,
    realizations: usize,
    delay_max: Option<f64>,
    points: usize,
    t1: f64,
    noise: f64,
    threads: Option<usize>,
    output: Option<String>,
}

fn linspace(max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| max * k as f64 / (n - 1) as f64).collect()
}

fn cmd_simulate(ctx: &Context, a: &SimulateArgs) -> CliResult {
    if a.points < 2 {
        return Err(Failure::Usage("--points must be >= 2".into()));
    }
    if let Some(m) = a.delay_max {
        if !(m.is_finite() && m > 0.0) {
            return Err(Failure::Usage("--delay-max must be > 0".into()));
        }
    }
    let cfg = ctx.config.bath();
    let trace = match a.seq {
        Sequence::HahnEcho => {
            let taus = match a.delay_max {
                Some(m) => linspace(m, a.points),
                None => {
                    let g = pulse::scan_grid(&cfg)?;
                    linspace(*g.last().unwrap_or(&1e-5), a.points)
                }
            };
            let sim = EchoSimulation::from_config(&cfg, &taus)?;
            let pool = parallel::pool(a.threads).map_err(|e| Failure::Usage(e.to_string()))?;
            parallel::run_echo(&sim, a.realizations, &pool)?
        }
        Sequence::InversionRecovery => {
            let delays = linspace(a.delay_max.unwrap_or(5.0 * a.t1), a.points);
            pulse::simulate_inversion_recovery(a.t1, &delays, a.noise, cfg.seed)?
        }
    };
    let extra = format!(
        "simulate sequence={} realizations={} delay_max={:?} points={} t1={:e} noise={:e}",
        a.seq.as_str(),
        a.realizations,
        a.delay_max,
        a.points,
        a.t1,
        a.noise
    );
    let header = ctx.header(&extra, cfg.seed);
    let name = a.output.clone().unwrap_or_else(|| format!("trace_{}.csv", a.seq.as_str()));
    ctx.write(&name, &csvio::render_trace(&trace, &header))?;
    Ok(())
}

fn split_kv(item: &str) -> Result<(&str, Option<f64>), Failure> {
    match item.split_once('=') {
        Some((k, v)) => {
            let v = v
                .trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("`{item}`: value is not a number")))?;
            Ok((k.trim(), Some(v)))
        }
        None => Ok((item.trim(), None)),
    }
}

fn load_series(spec: &str, model: &ModelSpec, weighted: bool) -> Result<Series, Failure> {
    let rate_unit = match model.y_unit {
        "1/us" => Some(RateUnit::PerMicrosecond),
        "1/s" => Some(RateUnit::PerSecond),
        _ => None,
    };
    if let Some(name) = spec.strip_prefix("bundled:") {
        let d = datasets::bundled_by_name(name)?;
        let unit = rate_unit.ok_or_else(|| {
            Failure::Usage(format!("model `{}` fits decay traces, not relaxation tables", model.name))
        })?;
        return Ok(d.to_rate_series(unit, weighted)?);
    }
    let path = Path::new(spec);
    let text = csvio::read_file(path)?;
    let is_trace = text.lines().any(|l| l.trim() == csvio::TRACE_HEADER);
    match (is_trace, rate_unit) {
        (true, None) => {
            let t = csvio::parse_trace(&text, path)?;
            if weighted {
                if t.std_error.iter().any(|s| !(*s > 0.0)) {
                    return Err(Failure::Usage("--weighted needs std_error > 0 on every row".into()));
                }
                Ok(Series::new(t.delays, t.amplitude, t.std_error)?)
            } else {
                Ok(Series::unweighted(t.delays, t.amplitude)?)
            }
        }
        (false, Some(unit)) => {
            let d = csvio::parse_dataset(&text, path)?;
            Ok(d.to_rate_series(unit, weighted)?)
        }
        (true, Some(_)) => Err(Failure::Usage(format!("model `{}` needs a relaxation table, got a decay trace", model.name))),
        (false, None) => Err(Failure::Usage(format!("model `{}` needs a decay trace ({})", model.name, csvio::TRACE_HEADER))),
    }
}

struct FitArgs {
    fix: Vec<String>,
    free: Vec<String>,
    init: Vec<String>,
    weighted: bool,
    freq: Option<f64>,
    max_iterations: usize,
}

fn cmd_fit(ctx: &Context, model: &str, data: &str, a: &FitArgs) -> CliResult {
    let FitArgs {
        fix,
        free,
        init,
        weighted,
        freq,
        max_iterations,
    } = a;
    let (weighted, freq) = (*weighted, *freq);
    let spec = fit::lookup(model)?;
    let series = load_series(data, spec, weighted)?;
    let guess_ctx = GuessContext {
        spectrometer_freq: freq.unwrap_or(ctx.config.frequency),
    };
    let mut start = spec.initial_guess(&series, &guess_ctx);
    let mut mask = spec.default_mask();
    for item in init {
        let (name, v) = split_kv(item)?;
        let j = spec.param_index(name)?;
        start[j] = v.ok_or_else(|| Failure::Usage(format!("--init `{item}` needs a value")))?;
    }
    for item in free {
        let j = spec.param_index(item.trim())?;
        mask[j] = false;
    }
    for item in fix {
        let (name, v) = split_kv(item)?;
        let j = spec.param_index(name)?;
        mask[j] = true;
        if let Some(v) = v {
            start[j] = v;
        }
    }
    let options = FitOptions {
        max_iterations: *max_iterations,
        ..FitOptions::with_fixed(mask)
    };
    let result = fit::fit(spec, &series, &start, &options)?;
    let extra = format!(
        "fit model={model} data={data} fix={fix:?} free={free:?} init={init:?} weighted={weighted} freq={freq:?} max_iterations={max_iterations}"
    );
    let header = ctx.header(&extra, ctx.config.seed);
    let report = result.report(spec);
    ctx.write(&format!("fit_{model}.txt"), &format!("{header}{report}"))?;
    ctx.write(&format!("fit_{model}.csv"), &csvio::render_fit(&result, spec, &header))?;
    print!("{report}");
    if !result.converged {
        return Err(Failure::NotConverged(format!(
            "fit did not converge ({:?} after {} iterations)",
            result.termination, result.iterations
        )));
    }
    Ok(())
}

fn cmd_model_eval(ctx: &Context, model: &str, params: &str, temps: &str) -> CliResult {
    let spec = fit::lookup(model)?;
    if !matches!(spec.x_unit, "K") {
        return Err(Failure::Usage(format!("model-eval takes a temperature model (t1_model, t2_model), not `{model}`")));
    }
    let mut p: Vec<Option<f64>> = spec.params.iter().map(|ps| ps.default_fixed).collect();
    for item in params.split(',').filter(|s| !s.trim().is_empty()) {
        let (name, v) = split_kv(item)?;
        let j = spec.param_index(name)?;
        p[j] = Some(v.ok_or_else(|| Failure::Usage(format!("--params `{item}` needs a value")))?);
    }
    let missing: Vec<&str> = spec
        .params
        .iter()
        .zip(&p)
        .filter(|(_, v)| v.is_none())
        .map(|(ps, _)| ps.name)
        .collect();
    if !missing.is_empty() {
        return Err(Failure::Usage(format!("missing parameters: {}", missing.join(", "))));
    }
    let p: Vec<f64> = p.into_iter().flatten().collect();
    let temps = parse_temps(temps)?;
    let rows: Vec<(f64, f64)> = temps.iter().map(|&t| (t, (spec.eval)(&p, t))).collect();
    let header = ctx.header(&format!("model-eval model={model} params={p:?} temps={temps:?}"), ctx.config.seed);
    ctx.write(&format!("model_eval_{model}.csv"), &csvio::render_model_eval(&rows, spec.y_unit, &header))?;
    Ok(())
}

fn cmd_t2_scan(ctx: &Context, temps: &str, realizations: usize, threads: Option<usize>) -> CliResult {
    let temps = parse_temps(temps)?;
    if realizations == 0 {
        return Err(Failure::Usage("--realizations must be >= 1".into()));
    }
    ctx.config.validate().map_err(|e| Failure::Usage(e.message))?;
    let pool = parallel::pool(threads).map_err(|e| Failure::Usage(e.to_string()))?;
    let points = pulse::effective_t2_scan_with(&ctx.config.bath(), &temps, |sim| {
        parallel::run_echo(sim, realizations, &pool).map_err(|e| match e {
            Error::Core(c) => c,
            other => spinbath_core::Error::Domain(other.to_string()),
        })
    });
    let points = match points {
        Ok(p) => p,
        Err(e @ spinbath_core::Error::ScanFit { .. }) => return Err(Failure::NotConverged(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let header = ctx.header(&format!("t2-scan temps={temps:?} realizations={realizations}"), ctx.config.seed);
    ctx.write("t2_scan.csv", &csvio::render_scan(&points, &header))?;
    for p in &points {
        println!("{:>10.4} K  f = {:.4e}  T2 = {:.4e} s", p.temperature, p.flip_flop_factor, p.t2);
    }
    Ok(())
}

fn cmd_dataset(ctx: &Context, name: Option<&str>, check: Option<&Path>) -> CliResult {
    match (name, check) {
        (Some(name), None) => {
            let mut d = datasets::bundled_by_name(name)?;
            let header = ctx.header(&format!("dataset name={name}"), ctx.config.seed);
            d.metadata.push(header.trim_end().trim_start_matches('#').to_string());
            ctx.write(&format!("{name}.csv"), &csvio::render_dataset(&d)?)?;
            Ok(())
        }
        (None, Some(path)) => {
            let d = csvio::load_dataset(path)?;
            d.validate()?;
            println!("{} rows", d.rows.len());
            for r in &d.rows {
                println!("  {:>8} K  {:e} s  ± {:e} s  [{}]", r.temperature, r.value, r.error, r.source);
            }
            Ok(())
        }
        _ => Err(Failure::Usage(format!(
            "give exactly one of --name <{}> or --check <file>",
            datasets::BUNDLED_NAMES.join("|")
        ))),
    }
}
