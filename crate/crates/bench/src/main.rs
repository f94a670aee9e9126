use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lsm_core::liquid::Architecture;
use lsm_core::readout::ReadoutKind;
use lsm_core::{GridShape, PatternKind};
use lsm_bench::config::{ExperimentConfig, Report};
use lsm_bench::error::{Result, Stage, StageExt};
use lsm_bench::results::{self, OutputFormat};
use lsm_bench::{data, experiment, pipeline};

#[derive(Parser)]
#[command(name = "lsm-bench", version, about = "Input-pattern benchmarks for liquid state machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and report accuracy, runtime and storage.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_pattern)]
        pattern: Option<PatternKind>,
        /// Write the pixel selection (one id per line) to this file.
        #[arg(long)]
        dump_selection: Option<PathBuf>,
    },
    /// Run the same experiment once per pattern.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated pattern names.
        #[arg(long, value_delimiter = ',', value_parser = parse_pattern,
              default_value = "fullscale,scanline,chessboard,patch")]
        patterns: Vec<PatternKind>,
    },
    /// Encode the dataset under each pattern and report spike-file sizes.
    Encode {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_parser = parse_pattern,
              default_value = "fullscale,scanline,chessboard,patch")]
        patterns: Vec<PatternKind>,
        /// Keep the spike files here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        records: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the pixel ids a pattern selects on a grid.
    DumpSelection {
        #[arg(long, value_parser = parse_pattern)]
        pattern: PatternKind,
        #[arg(long, default_value_t = 28)]
        height: usize,
        #[arg(long, default_value_t = 28)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment manifest; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_arch)]
    arch: Option<Architecture>,
    /// Comma-separated readouts (sgd, svm1, svm2).
    #[arg(long, value_delimiter = ',', value_parser = parse_readout)]
    readout: Option<Vec<ReadoutKind>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, value_parser = parse_report)]
    report: Option<Report>,
    /// k-fold cross-validation over train and test pooled.
    #[arg(long)]
    cv: Option<usize>,
    #[arg(long)]
    sim_time_ms: Option<f64>,
    #[arg(long)]
    max_rate_hz: Option<f64>,
    #[arg(long)]
    encode_seed: Option<u64>,
    /// Training records to encode (images repeat cyclically).
    #[arg(long)]
    records: Option<usize>,
    #[arg(long)]
    neurons: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write state vectors of the first run as CSV into this directory.
    #[arg(long)]
    dump_states: Option<PathBuf>,
    /// Result file; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or csv; guessed from the --out extension by default.
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(a) = self.arch {
            cfg.arch = a;
        }
        if let Some(r) = &self.readout {
            cfg.readouts = r.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.repeats {
            cfg.repeats = r;
        }
        if let Some(r) = self.report {
            cfg.report = r;
        }
        if let Some(k) = self.cv {
            cfg.cv_folds = k;
        }
        if let Some(t) = self.sim_time_ms {
            cfg.encode.sim_time_ms = t;
        }
        if let Some(r) = self.max_rate_hz {
            cfg.encode.max_rate_hz = r;
        }
        if let Some(s) = self.encode_seed {
            cfg.encode.seed = Some(s);
        }
        if let Some(n) = self.records {
            cfg.encode.train_records = Some(n);
        }
        if let Some(n) = self.neurons {
            cfg.liquid.n_neurons = n;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(d) = &self.dump_states {
            cfg.state_dump_dir = Some(d.clone());
        }
        Ok(cfg)
    }

    fn emit(&self, result: &impl results::Emit) -> Result<()> {
        match &self.out {
            Some(path) => {
                let format = self.format.unwrap_or_else(|| OutputFormat::for_path(path));
                results::emit_results(result, format, path)
            }
            None => {
                let bytes = results::render(result, self.format.unwrap_or_default())?;
                io::stdout().write_all(&bytes).stage(Stage::Output)
            }
        }
    }
}

fn parse_pattern(s: &str) -> std::result::Result<PatternKind, String> {
    PatternKind::from_name(s).ok_or_else(|| format!("unknown pattern `{s}`"))
}

fn parse_arch(s: &str) -> std::result::Result<Architecture, String> {
    Architecture::from_name(s).ok_or_else(|| format!("unknown architecture `{s}` (1rc or 5rc)"))
}

fn parse_readout(s: &str) -> std::result::Result<ReadoutKind, String> {
    ReadoutKind::from_name(s).ok_or_else(|| format!("unknown readout `{s}`"))
}

fn parse_report(s: &str) -> std::result::Result<Report, String> {
    match s {
        "best" => Ok(Report::Best),
        "mean" => Ok(Report::Mean),
        _ => Err(format!("unknown report mode `{s}` (best or mean)")),
    }
}

fn parse_format(s: &str) -> std::result::Result<OutputFormat, String> {
    match s {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        _ => Err(format!("unknown format `{s}` (json or csv)")),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            pattern,
            dump_selection,
        } => {
            let mut cfg = common.config()?;
            if let Some(p) = pattern {
                cfg.pattern = p;
            }
            if let Some(path) = dump_selection {
                let (train, _) = data::load(&cfg.dataset)?;
                pipeline::selection(&cfg, &train)?
                    .save_text(path)
                    .stage(Stage::Output)?;
            }
            let result = experiment::run_experiment(&cfg)?;
            for s in &result.summary {
                eprintln!(
                    "{} {} {}: best {:.4} mean {:.4} (+/- {:.4}) over {} run(s), {:.0} ms, {} bytes",
                    cfg.pattern.name(),
                    cfg.arch.name(),
                    s.readout.name(),
                    s.best_test,
                    s.mean_test,
                    s.std_test,
                    cfg.repeats,
                    result.timings.total_ms,
                    result.input_bytes
                );
            }
            common.emit(&result)
        }
        Command::Compare { common, patterns } => {
            let cfg = common.config()?;
            let cmp = experiment::compare_patterns(&cfg, &patterns)?;
            for p in &cmp.patterns {
                eprintln!(
                    "{:<10} pixels {:>4}  bytes {:>10}  runtime {:>8.0} ms  storage x{}  runtime x{}",
                    p.pattern.name(),
                    p.selection_size,
                    p.input_bytes,
                    p.runtime_ms,
                    p.storage_ratio.map_or("-".into(), |r| format!("{r:.2}")),
                    p.runtime_ratio.map_or("-".into(), |r| format!("{r:.2}")),
                );
            }
            common.emit(&cmp)
        }
        Command::Encode {
            config,
            patterns,
            out_dir,
            records,
            seed,
        } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let (train, _) = data::load(&cfg.dataset)?;
            let n = records.or(cfg.encode.train_records).unwrap_or(train.len());
            let tmp = tempfile::tempdir().stage(Stage::Store)?;
            let dir = out_dir.unwrap_or_else(|| tmp.path().to_path_buf());
            std::fs::create_dir_all(&dir).stage(Stage::Store)?;
            let mut full = None;
            println!("pattern,pixels,records,spikes,bytes,storage_ratio");
            for p in patterns {
                let c = ExperimentConfig { pattern: p, ..cfg.clone() };
                let sel = pipeline::selection(&c, &train)?;
                let es = cfg.encode.seed.unwrap_or(cfg.seed);
                let recs = train.encode(&sel, &cfg.encode, n, es)?;
                let bytes = lsm_core::encoding::write_records(&recs, dir.join(format!("{}.lsms", p.name())))
                    .stage(Stage::Store)?;
                if p == PatternKind::Fullscale {
                    full = Some(bytes);
                }
                let spikes: usize = recs.iter().map(|r| r.len()).sum();
                let ratio = full.map_or(String::new(), |f| format!("{:.3}", f as f64 / bytes as f64));
                println!("{},{},{},{},{},{}", p.name(), sel.len(), recs.len(), spikes, bytes, ratio);
            }
            Ok(())
        }
        Command::DumpSelection {
            pattern,
            height,
            width,
            seed,
            out,
        } => {
            let shape = GridShape::new(height, width).stage(Stage::Config)?;
            let sel = pattern.select(shape, seed).stage(Stage::Pattern)?;
            match out {
                Some(path) => sel.save_text(path).stage(Stage::Output),
                None => sel.write_text(io::stdout().lock()).stage(Stage::Output),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lsm-bench: {e}");
            ExitCode::FAILURE
        }
    }
}

