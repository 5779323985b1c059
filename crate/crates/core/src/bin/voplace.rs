//! Command-line front end. Each subcommand is one pipeline stage; `pipeline`
//! runs them all and `synth` writes synthetic keyframe files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use voplace::archive::SignatureArchive;
use voplace::config::PipelineConfig;
use voplace::descriptors::DescriptorKind;
use voplace::error::{Error, Result};
use voplace::keyframe::{load_sequence, write_sequence};
use voplace::matching::{MatchResult, VariantPairing};
use voplace::pipeline::{describe, evaluate, imitate, match_signatures, run_pipeline, MatchSource, PipelineInput};
use voplace::scan::{FilterKind, ScanArchive};
use voplace::synth::{SyntheticSequence, WorldSpec};

#[derive(Parser)]
#[command(name = "voplace", version, about = "Place recognition on imitated scans from visual odometry")]
struct Cli {
    /// Worker threads for describe and match (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build filtered scans from a keyframe file.
    Imitate {
        #[arg(long)]
        keyframes: PathBuf,
        /// Archive file, or a directory of per-keyframe files with --split.
        #[arg(long)]
        out: PathBuf,
        /// Filters to apply; repeat or comma-separate. Default: both.
        #[arg(long, value_delimiter = ',')]
        filter: Vec<FilterKind>,
        #[arg(long)]
        split: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compute one descriptor for every scan of an archive.
    Describe {
        /// Scan archive file or directory.
        #[arg(long)]
        scans: PathBuf,
        #[arg(long)]
        descriptor: DescriptorKind,
        /// Scan filter to read (default: the descriptor's usual one).
        #[arg(long)]
        filter: Option<FilterKind>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Difference matrices and nearest-reference matches.
    Match {
        #[arg(long)]
        queries: PathBuf,
        /// Defaults to the query archive (same-sequence matching).
        #[arg(long)]
        references: Option<PathBuf>,
        /// Treat the two archives as one sequence and apply the exclusion window.
        #[arg(long)]
        same_sequence: bool,
        #[arg(long, default_value = "fused")]
        source: MatchSource,
        /// Output directory for D_s.csv, D_i.csv, D_fused.csv and matches.csv.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Precision-recall evaluation of a match table.
    Evaluate {
        #[arg(long)]
        matches: PathBuf,
        /// Keyframe file with ground-truth positions for the queries.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        references: Option<PathBuf>,
        #[arg(long)]
        same_sequence: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// All stages, keeping every intermediate file.
    Pipeline {
        #[arg(long)]
        queries: PathBuf,
        /// Without references the query sequence is matched against itself.
        #[arg(long)]
        references: Option<PathBuf>,
        /// Descriptors to run; repeat or comma-separate. Default: all.
        #[arg(long, value_delimiter = ',')]
        descriptor: Vec<DescriptorKind>,
        #[arg(long, default_value = "fused")]
        source: MatchSource,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate a synthetic keyframe sequence from a world description.
    Synth {
        /// World description (TOML). Without it, an out-and-back street.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write `<out>.reference.txt` (ids below N) and
        /// `<out>.query.txt` (ids from N).
        #[arg(long)]
        split_at: Option<u64>,
    },
}

/// Configuration file plus per-field overrides.
#[derive(Args, Clone, Debug, Default)]
struct ConfigArgs {
    /// TOML configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scan_range: Option<f64>,
    #[arg(long)]
    polar_resolution_deg: Option<f64>,
    /// Voxel cell as `x,y,z` meters.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    voxel_cell: Option<Vec<f64>>,
    #[arg(long)]
    structure_weight: Option<f64>,
    #[arg(long)]
    gt_threshold: Option<f64>,
    #[arg(long)]
    exclusion_window: Option<u64>,
    /// `symmetric` or `query-to-reference`.
    #[arg(long)]
    variant_pairing: Option<String>,
    #[arg(long)]
    delight_inner_radius: Option<f64>,
    #[arg(long)]
    delight_outer_radius: Option<f64>,
    #[arg(long)]
    m2dp_rings: Option<usize>,
    #[arg(long)]
    m2dp_sectors: Option<usize>,
    #[arg(long)]
    m2dp_azimuths: Option<usize>,
    #[arg(long)]
    m2dp_elevations: Option<usize>,
    #[arg(long)]
    sc_rings: Option<usize>,
    #[arg(long)]
    sc_sectors: Option<usize>,
    #[arg(long)]
    sc_max_range: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { $target = v; })*
            };
        }
        set! {
            scan_range => c.scan_range,
            polar_resolution_deg => c.polar_resolution_deg,
            structure_weight => c.structure_weight,
            gt_threshold => c.gt_threshold,
            exclusion_window => c.exclusion_window,
            delight_inner_radius => c.delight.inner_radius,
            delight_outer_radius => c.delight.outer_radius,
            m2dp_rings => c.m2dp.rings,
            m2dp_sectors => c.m2dp.sectors,
            m2dp_azimuths => c.m2dp.azimuths,
            m2dp_elevations => c.m2dp.elevations,
            sc_rings => c.scan_context.rings,
            sc_sectors => c.scan_context.sectors,
            sc_max_range => c.scan_context.max_range,
        }
        if let Some(v) = &self.voxel_cell {
            c.voxel_cell = [v[0], v[1], v[2]];
        }
        if let Some(p) = &self.variant_pairing {
            c.variant_pairing = match p.as_str() {
                "symmetric" => VariantPairing::Symmetric,
                "query-to-reference" => VariantPairing::QueryToReference,
                other => return Err(Error::InvalidParameter(format!("unknown variant pairing {other:?}"))),
            };
        }
        c.validate()?;
        Ok(c)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("--jobs: {e}")))?;
    }
    match cli.command {
        Command::Imitate {
            keyframes,
            out,
            filter,
            split,
            config,
        } => {
            let config = config.resolve()?;
            let kinds = if filter.is_empty() {
                vec![FilterKind::Polar, FilterKind::Voxel]
            } else {
                filter
            };
            let scans = imitate(&load_sequence(&keyframes)?, &config, &kinds)?;
            for kind in kinds {
                if let Some(mean) = scans.mean_point_count(kind) {
                    println!("{kind}: {mean:.1} points per scan on average");
                }
            }
            if split {
                scans.save_split(&out)
            } else {
                scans.save(&out)
            }
        }
        Command::Describe {
            scans,
            descriptor,
            filter,
            out,
            config,
        } => {
            let config = config.resolve()?;
            let archive = describe(&ScanArchive::load_any(&scans)?, descriptor, filter, &config)?;
            info!("{} {descriptor} signatures", archive.entries.len());
            archive.save(&out)
        }
        Command::Match {
            queries,
            references,
            same_sequence,
            source,
            out,
            config,
        } => {
            let config = config.resolve()?;
            let q = SignatureArchive::load(&queries)?;
            let r = match &references {
                Some(path) => SignatureArchive::load(path)?,
                None => q.clone(),
            };
            let output = match_signatures(&q, &r, &config, same_sequence || references.is_none(), source)?;
            create_dir(&out)?;
            output.save(&out, &config.fingerprint())
        }
        Command::Evaluate {
            matches,
            queries,
            references,
            same_sequence,
            out,
            config,
        } => {
            let config = config.resolve()?;
            let (result, fingerprint) = MatchResult::load_csv(&matches)?;
            config.check_fingerprint(&fingerprint, "match table")?;
            let q = load_sequence(&queries)?;
            let r = references.as_ref().map(load_sequence).transpose()?;
            let same = same_sequence || r.is_none();
            let evaluation = evaluate(&result, &q, r.as_deref().unwrap_or(&q), &config, same)?;
            create_dir(&out)?;
            evaluation.save(&out, &fingerprint)?;
            let c = &evaluation.curve;
            println!(
                "AUC {:.4}, max recall at 100% precision {:.4} ({} matchable queries)",
                c.auc, c.max_recall_at_full_precision, c.matchable_queries
            );
            Ok(())
        }
        Command::Pipeline {
            queries,
            references,
            descriptor,
            source,
            out,
            config,
        } => {
            let config = config.resolve()?;
            let kinds = if descriptor.is_empty() {
                DescriptorKind::ALL.to_vec()
            } else {
                descriptor
            };
            let q = load_sequence(&queries)?;
            let r = references.as_ref().map(load_sequence).transpose()?;
            let input = PipelineInput {
                queries: &q,
                references: r.as_deref(),
            };
            let run = run_pipeline(input, &config, &kinds, source, Some(&out))?;
            std::fs::write(out.join("config.toml"), config.to_toml()).map_err(|e| Error::io(&out, e))?;
            for d in &run.descriptors {
                let c = &d.evaluation.curve;
                println!(
                    "{:12} AUC {:.4}  max recall at 100% precision {:.4}",
                    d.kind.to_string(),
                    c.auc,
                    c.max_recall_at_full_precision
                );
            }
            Ok(())
        }
        Command::Synth {
            spec,
            seed,
            out,
            split_at,
        } => {
            let mut spec = match &spec {
                Some(path) => WorldSpec::load(path)?,
                None => WorldSpec::out_and_back(seed.unwrap_or(1), 300.0, 1.0),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let seq = SyntheticSequence::from_spec(&spec)?;
            write_sequence(&out, &seq.keyframes)?;
            if let Some(n) = split_at {
                let (reference, query): (Vec<_>, Vec<_>) = seq.keyframes.iter().cloned().partition(|k| k.id < n);
                write_sequence(with_suffix(&out, ".reference.txt"), &reference)?;
                write_sequence(with_suffix(&out, ".query.txt"), &query)?;
            }
            println!("{} keyframes written to {}", seq.keyframes.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
