use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gifsent::pipeline::{cmd_analyze, cmd_extract_frames, cmd_fetch_media, cmd_ingest, cmd_score};
use gifsent::report::rerender;
use gifsent::training::{fine_tune_image, fine_tune_text};
use gifsent::{PipelineConfig, Result};
use log::LevelFilter;

/// Reaction-GIF sentiment pipeline.
///
/// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
/// 3 backend error.
#[derive(Debug, Parser)]
#[command(name = "gifsent", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Each flag overrides the config key of the same name.
#[derive(Debug, Args)]
struct Global {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "warn")]
    log_level: LevelFilter,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[arg(long, global = true)]
    corpus_path: Option<PathBuf>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    frame_period: Option<f64>,
    #[arg(long, global = true)]
    min_face_size: Option<u32>,
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    network_fetch: Option<bool>,
    #[arg(long, global = true)]
    fetch_url_template: Option<String>,
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    dump_faces: Option<bool>,
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    dump_captions: Option<bool>,
    #[arg(long, global = true)]
    text_backend: Option<String>,
    #[arg(long, global = true)]
    image_backend: Option<String>,
    #[arg(long, global = true)]
    face_backend: Option<String>,
    #[arg(long, global = true)]
    ocr_backend: Option<String>,
    /// Any other key, e.g. `--set face_backend.script=faces.json`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE", value_parser = parse_set)]
    set: Vec<(String, String)>,
}

fn parse_set(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_owned(), v.to_owned()))
        .ok_or_else(|| format!("expected SECTION.KEY=VALUE, got `{s}`"))
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the raw corpus and write the canonical JSONL plus rejects.
    Ingest,
    /// Resolve each record's media in the cache, downloading if enabled.
    FetchMedia,
    /// Sample frames from every GIF and dump them into the cache.
    ExtractFrames,
    /// Score every GIF and write scores.jsonl.
    Score,
    /// Compute the analysis report from the corpus and scores.
    Analyze,
    /// Re-render the charts from an existing report.json.
    Report,
    /// Fine-tune the text backend on JSONL {text, label} data.
    TrainText {
        #[arg(long)]
        data: PathBuf,
        /// Model artifact path [default: <out_dir>/text_model.json].
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fine-tune the image backend on a positive/ + negative/ image directory.
    TrainImage {
        #[arg(long)]
        data: PathBuf,
        /// Model artifact path [default: <out_dir>/image_model.json].
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Global {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut put = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((key.to_owned(), v));
            }
        };
        let quoted = |p: &Option<PathBuf>| p.as_ref().map(|p| toml_string(&p.to_string_lossy()));
        put("pipeline.out_dir", quoted(&self.out_dir));
        put("pipeline.corpus_path", quoted(&self.corpus_path));
        put("pipeline.cache_dir", quoted(&self.cache_dir));
        put("pipeline.parallelism", self.parallelism.map(|v| v.to_string()));
        put("pipeline.frame_period", self.frame_period.map(|v| format!("{v:?}")));
        put("pipeline.min_face_size", self.min_face_size.map(|v| v.to_string()));
        put("pipeline.network_fetch", self.network_fetch.map(|v| v.to_string()));
        put("pipeline.fetch_url_template", self.fetch_url_template.as_deref().map(toml_string));
        put("pipeline.dump_faces", self.dump_faces.map(|v| v.to_string()));
        put("pipeline.dump_captions", self.dump_captions.map(|v| v.to_string()));
        put("text_backend.name", self.text_backend.as_deref().map(toml_string));
        put("image_backend.name", self.image_backend.as_deref().map(toml_string));
        put("face_backend.name", self.face_backend.as_deref().map(toml_string));
        put("ocr_backend.name", self.ocr_backend.as_deref().map(toml_string));
        out.extend(self.set.iter().cloned());
        out
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_owned()).to_string()
}

fn run(cli: &Cli) -> Result<()> {
    let config = PipelineConfig::load(cli.global.config.as_deref(), &cli.global.overrides())?;
    let out_dir = &config.pipeline.out_dir;
    match &cli.command {
        Command::Ingest => {
            let s = cmd_ingest(&config)?;
            println!("{} records, {} rejects -> {}", s.records, s.rejects, s.corpus.display());
        }
        Command::FetchMedia => {
            let s = cmd_fetch_media(&config)?;
            println!("{} records with media, {} missing", s.resolved, s.missing);
        }
        Command::ExtractFrames => {
            let s = cmd_extract_frames(&config)?;
            println!("{} gifs, {} frames, {} failed", s.gifs, s.frames, s.failed);
        }
        Command::Score => {
            let s = cmd_score(&config)?;
            println!("{} gifs scored, {} skipped -> {}", s.scored, s.skipped, s.scores.display());
        }
        Command::Analyze => {
            for f in cmd_analyze(&config)? {
                println!("{}", f.display());
            }
        }
        Command::Report => {
            for f in rerender(out_dir)? {
                println!("{}", f.display());
            }
        }
        Command::TrainText { data, output } => {
            let out = output.clone().unwrap_or_else(|| out_dir.join("text_model.json"));
            let r = fine_tune_text(&config.text_backend.name, &config.text.finetune, data, &out)?;
            println!("{} (log {})", r.model.display(), r.log.display());
        }
        Command::TrainImage { data, output } => {
            let out = output.clone().unwrap_or_else(|| out_dir.join("image_model.json"));
            let r = fine_tune_image(&config.image_backend.name, &config.image.finetune, data, &out)?;
            println!("{} (log {})", r.model.display(), r.log.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap's own usage errors would exit 2, which is reserved for data errors
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.global.log_level)
        .parse_default_env()
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
