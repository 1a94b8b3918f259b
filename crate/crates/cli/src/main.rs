//! Command-line front end for the template protection pipeline.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use coprint_core::coprime::{
    brute_force_estimate, derive_keys, generate_template, validate_keys, KeySet, ProtectedTemplate,
};
use coprint_core::evalkit::{
    build_report, diversity_generate, diversity_report, protocol_scores, revocability_experiment,
    timing_benchmark, unlinkability_experiment, KeyPolicy, ParameterSpace,
};
use coprint_core::fpdata::{load_dataset, parse_minutiae, parse_skeleton, write_dataset};
use coprint_core::matcher::{match_templates, MatchParams};
use coprint_core::ridgefeat::{build_feature_matrix, FeatureMatrix};
use coprint_core::rng::derive_seed;
use coprint_core::sectoring::SectorConfig;
use coprint_core::synthgen::{generate_population, SceneParams};

#[derive(Parser)]
#[command(
    name = "coprint",
    version,
    about = "Cancelable fingerprint templates over coprime position cycles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory of minutiae and skeleton files
    Synth(SynthArgs),
    /// Extract ridge-count features from one record as CSV
    Extract(ExtractArgs),
    /// Build a protected template from one record and a key
    Protect(ProtectArgs),
    /// Score a query template against an enrolled template
    Match(MatchArgs),
    /// Run the verification protocol over a dataset and report EER/ROC
    Eval(EvalArgs),
    /// Security analyses of the scheme
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    subjects: usize,
    #[arg(long, default_value_t = 4)]
    impressions: usize,
    /// Positional jitter between impressions, pixels
    #[arg(long, default_value_t = 0.8)]
    sigma: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Minutiae per finger
    #[arg(long, default_value_t = 8)]
    minutiae: usize,
    #[arg(long, default_value_t = 8)]
    sectors: usize,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
}

#[derive(Args)]
struct ExtractArgs {
    /// Minutiae record file
    #[arg(long, value_name = "FILE")]
    minutiae: PathBuf,
    /// Skeleton image (PGM)
    #[arg(long, value_name = "FILE")]
    skeleton: PathBuf,
    #[arg(long, default_value_t = 8)]
    sectors: usize,
    /// Write the CSV here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Key material for one template, either stored or derived.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct KeyInput {
    /// Key file holding one line: k1 k2 k3 k4 rho
    #[arg(long, value_name = "FILE")]
    keys: Option<PathBuf>,
    /// Derive the key set from this seed
    #[arg(long, value_name = "SEED")]
    key_seed: Option<u64>,
}

impl KeyInput {
    fn resolve(&self, side: u32) -> Result<KeySet> {
        let keys = match (&self.keys, self.key_seed) {
            (Some(path), None) => read_key_file(path)?,
            (None, Some(seed)) => derive_keys(seed, side)?,
            _ => unreachable!("clap enforces exactly one key source"),
        };
        validate_keys(&keys, side)
            .with_context(|| format!("key set unusable for template side {side}"))?;
        Ok(keys)
    }
}

fn read_key_file(path: &Path) -> Result<KeySet> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading key file {}", path.display()))?;
    KeySet::from_line(text.trim()).with_context(|| format!("parsing key file {}", path.display()))
}

#[derive(Args)]
struct ProtectArgs {
    #[arg(long, value_name = "FILE")]
    minutiae: PathBuf,
    #[arg(long, value_name = "FILE")]
    skeleton: PathBuf,
    #[arg(long, default_value_t = 8)]
    sectors: usize,
    #[command(flatten)]
    key: KeyInput,
    /// Template output file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also save the key set as a key file (needed later for matching)
    #[arg(long, value_name = "FILE")]
    write_keys: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    /// Query template file
    #[arg(long, value_name = "FILE")]
    query: PathBuf,
    /// Enrolled template file
    #[arg(long, value_name = "FILE")]
    enrolled: PathBuf,
    /// Key file for the query template
    #[arg(long, value_name = "FILE")]
    query_keys: PathBuf,
    /// Key file for the enrolled template
    #[arg(long, value_name = "FILE")]
    enrolled_keys: PathBuf,
    #[arg(long, default_value_t = 1.5)]
    threshold: f64,
    #[arg(long, default_value_t = 2.0)]
    weight: f64,
    #[arg(long)]
    json: bool,
}

/// How keys are assigned across the dataset.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct PolicyInput {
    /// One shared key file used for every record
    #[arg(long, value_name = "FILE")]
    keys: Option<PathBuf>,
    /// One shared key set derived from this seed
    #[arg(long, value_name = "SEED")]
    key_seed: Option<u64>,
    /// Independent per-subject key sets derived from this seed
    #[arg(long, value_name = "SEED")]
    per_user_seed: Option<u64>,
}

impl PolicyInput {
    fn resolve(&self, side: u32) -> Result<KeyPolicy> {
        Ok(match (&self.keys, self.key_seed, self.per_user_seed) {
            (Some(path), None, None) => {
                let keys = read_key_file(path)?;
                validate_keys(&keys, side)
                    .with_context(|| format!("key set unusable for template side {side}"))?;
                KeyPolicy::SameKey(keys)
            }
            (None, Some(seed), None) => KeyPolicy::SameKey(derive_keys(seed, side)?),
            (None, None, Some(seed)) => KeyPolicy::PerUser { seed },
            _ => unreachable!("clap enforces exactly one policy"),
        })
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset directory of *.min and *.pgm files
    #[arg(long, value_name = "DIR")]
    dataset: PathBuf,
    #[arg(long, default_value_t = 8)]
    sectors: usize,
    #[command(flatten)]
    policy: PolicyInput,
    /// Operating points to keep in the ROC sweep
    #[arg(long, default_value_t = 64)]
    roc_points: usize,
    /// Also measure wall-clock timings with this many repeated runs
    #[arg(long, value_name = "RUNS")]
    timings: Option<usize>,
    #[arg(long, default_value_t = 1.5)]
    threshold: f64,
    #[arg(long, default_value_t = 2.0)]
    weight: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Size of the key space an attacker must search for given dimensions
    Bruteforce(BruteforceArgs),
    /// Score a re-keyed record's old templates against its new enrollment
    Revocability(RevocabilityArgs),
    /// Cross-match two enrollments of the same fingers under independent keys
    Unlinkability(UnlinkabilityArgs),
    /// Issue many templates from one record and cross-compare them
    Diversity(DiversityArgs),
}

#[derive(Args)]
struct BruteforceArgs {
    /// Minutiae count of the protected record
    #[arg(long, value_name = "COUNT")]
    minutiae: u32,
    #[arg(long, default_value_t = 8)]
    sectors: u32,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RevocabilityArgs {
    #[arg(long, value_name = "DIR")]
    dataset: PathBuf,
    /// Record index (load order) whose key is revoked
    #[arg(long, default_value_t = 0)]
    target: usize,
    #[command(flatten)]
    policy: PolicyInput,
    /// Number of revoked key sets to test
    #[arg(long, default_value_t = 3)]
    revoked: usize,
    #[arg(long, default_value_t = 11)]
    revoked_seed: u64,
    #[arg(long, default_value_t = 8)]
    sectors: usize,
    #[arg(long, default_value_t = 1.5)]
    threshold: f64,
    #[arg(long, default_value_t = 2.0)]
    weight: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct UnlinkabilityArgs {
    #[arg(long, value_name = "DIR")]
    dataset: PathBuf,
    /// Key derivation seed of the first application
    #[arg(long, default_value_t = 1)]
    seed_a: u64,
    /// Key derivation seed of the second application
    #[arg(long, default_value_t = 2)]
    seed_b: u64,
    #[arg(long, default_value_t = 8)]
    sectors: usize,
    #[arg(long, default_value_t = 1.5)]
    threshold: f64,
    #[arg(long, default_value_t = 2.0)]
    weight: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DiversityArgs {
    #[arg(long, value_name = "FILE")]
    minutiae: PathBuf,
    #[arg(long, value_name = "FILE")]
    skeleton: PathBuf,
    #[arg(long, default_value_t = 8)]
    sectors: usize,
    /// Number of templates to issue
    #[arg(long, default_value_t = 6)]
    count: usize,
    #[arg(long, default_value_t = 21)]
    seed: u64,
    /// Candidate k1 values; giving any *-values list switches from random
    /// draws to lexicographic enumeration of the cartesian space
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    k1_values: Vec<u32>,
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    k2_values: Vec<u32>,
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    k3_values: Vec<u32>,
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    k4_values: Vec<u32>,
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    rho_values: Vec<u64>,
    #[arg(long, default_value_t = 1.5)]
    threshold: f64,
    #[arg(long, default_value_t = 2.0)]
    weight: f64,
    #[arg(long)]
    json: bool,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => run_synth(args),
        Command::Extract(args) => run_extract(args),
        Command::Protect(args) => run_protect(args),
        Command::Match(args) => run_match(args),
        Command::Eval(args) => run_eval(args),
        Command::Analyze(AnalyzeCommand::Bruteforce(args)) => run_bruteforce(args),
        Command::Analyze(AnalyzeCommand::Revocability(args)) => run_revocability(args),
        Command::Analyze(AnalyzeCommand::Unlinkability(args)) => run_unlinkability(args),
        Command::Analyze(AnalyzeCommand::Diversity(args)) => run_diversity(args),
    }
}

fn load_record(
    args_minutiae: &Path,
    args_skeleton: &Path,
    sectors: usize,
) -> Result<FeatureMatrix> {
    let text = fs::read_to_string(args_minutiae)
        .with_context(|| format!("reading {}", args_minutiae.display()))?;
    let record =
        parse_minutiae(&text).with_context(|| format!("parsing {}", args_minutiae.display()))?;
    let bytes =
        fs::read(args_skeleton).with_context(|| format!("reading {}", args_skeleton.display()))?;
    let skeleton = parse_skeleton(&bytes, Some((record.width, record.height)))
        .with_context(|| format!("parsing {}", args_skeleton.display()))?;
    let config = SectorConfig::new(sectors)?;
    Ok(build_feature_matrix(&record, &skeleton, &config)?)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let params = SceneParams {
        width: args.width,
        height: args.height,
        minutiae: args.minutiae,
        sectors: args.sectors,
        ..SceneParams::default()
    };
    let entries = generate_population(
        args.subjects,
        args.impressions,
        args.sigma,
        args.seed,
        &params,
    )?;
    write_dataset(&args.out, &entries)?;
    println!(
        "wrote {} records ({} subjects x {} impressions) to {}",
        entries.len(),
        args.subjects,
        args.impressions,
        args.out.display()
    );
    Ok(())
}

fn run_extract(args: ExtractArgs) -> Result<()> {
    let features = load_record(&args.minutiae, &args.skeleton, args.sectors)?;
    let csv = features.to_csv();
    match args.out {
        Some(path) => {
            fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            println!(
                "wrote {} minutiae x {} sectors to {}",
                features.minutia_count(),
                features.sector_count(),
                path.display()
            );
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_protect(args: ProtectArgs) -> Result<()> {
    let features = load_record(&args.minutiae, &args.skeleton, args.sectors)?;
    let side = features.scalar_len() as u32;
    let keys = args.key.resolve(side)?;
    let template = generate_template(&features, &keys)?;
    template.save(&args.out)?;
    if let Some(path) = &args.write_keys {
        fs::write(path, format!("{}\n", keys.to_line()))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "protected template {}x{} ({} sectors) written to {}",
        side,
        side,
        template.sector_count(),
        args.out.display()
    );
    Ok(())
}

fn run_match(args: MatchArgs) -> Result<()> {
    let query = ProtectedTemplate::load(&args.query)?;
    let enrolled = ProtectedTemplate::load(&args.enrolled)?;
    let query_keys = read_key_file(&args.query_keys)?;
    let enrolled_keys = read_key_file(&args.enrolled_keys)?;
    let params = MatchParams::new(args.threshold, args.weight)?;
    let result = match_templates(&query, &enrolled, &query_keys, &enrolled_keys, &params)?;
    if args.json {
        print_json(&serde_json::json!({
            "score": result.overall_score,
            "matched": result.matched_count,
            "query_minutiae": result.query_count,
            "enrolled_minutiae": result.enrolled_count,
        }))?;
    } else {
        println!(
            "score {:.4} ({} of {} query minutiae matched)",
            result.overall_score, result.matched_count, result.query_count
        );
    }
    Ok(())
}

fn dataset_side(entries: &[coprint_core::DatasetEntry], sectors: usize) -> u32 {
    (entries[0].record.minutiae().len() * 2 * sectors) as u32
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let entries = load_dataset(&args.dataset)?;
    let config = SectorConfig::new(args.sectors)?;
    let params = MatchParams::new(args.threshold, args.weight)?;
    let policy = args.policy.resolve(dataset_side(&entries, args.sectors))?;
    let scores = protocol_scores(&entries, &policy, &config, &params)?;
    let timings = match args.timings {
        Some(runs) => Some(timing_benchmark(&entries, &config, &params, runs)?),
        None => None,
    };
    let report = build_report(&scores, args.roc_points, timings)?;
    if args.json {
        print_json(&report)?;
    } else {
        println!(
            "{} genuine and {} imposter comparisons",
            report.genuine_count, report.imposter_count
        );
        println!(
            "EER {:.3}% at threshold {:.4}",
            report.eer_percent, report.eer_threshold
        );
        if let Some(t) = &report.timings {
            println!(
                "generation {:.3} ms/template (std {:.3}), matching {:.3} ms/comparison (std {:.3}) over {} runs",
                t.generation_mean_s * 1e3,
                t.generation_std_s * 1e3,
                t.matching_mean_s * 1e3,
                t.matching_std_s * 1e3,
                t.runs
            );
        }
    }
    Ok(())
}

fn run_bruteforce(args: BruteforceArgs) -> Result<()> {
    if args.minutiae == 0 || args.sectors == 0 {
        bail!("minutiae and sectors must be positive");
    }
    let side = args.minutiae as u128 * 2 * args.sectors as u128;
    let estimate = brute_force_estimate(args.minutiae, args.sectors);
    if args.json {
        print_json(&serde_json::json!({
            "minutiae": args.minutiae,
            "sectors": args.sectors,
            "side": side,
            "key_space": estimate,
        }))?;
    } else {
        println!("template side {side}, naive key search space {estimate} combinations");
    }
    Ok(())
}

fn run_revocability(args: RevocabilityArgs) -> Result<()> {
    let entries = load_dataset(&args.dataset)?;
    let config = SectorConfig::new(args.sectors)?;
    let params = MatchParams::new(args.threshold, args.weight)?;
    let side = dataset_side(&entries, args.sectors);
    let policy = args.policy.resolve(side)?;
    // revoked candidates draw from their own namespace; a per-user policy
    // seeded with the same number must not reproduce them
    let revoked_base = derive_seed(0x7265766f6b65, args.revoked_seed);
    let mut revoked: Vec<KeySet> = Vec::with_capacity(args.revoked);
    let mut i = 0u64;
    while revoked.len() < args.revoked && i < args.revoked as u64 + 64 {
        let k = derive_keys(derive_seed(revoked_base, i), side)?;
        let clashes = matches!(&policy, KeyPolicy::SameKey(current) if k == *current);
        if !clashes && !revoked.contains(&k) {
            revoked.push(k);
        }
        i += 1;
    }
    let report =
        revocability_experiment(&entries, args.target, &policy, &revoked, &config, &params)?;
    if args.json {
        print_json(&report)?;
    } else {
        println!(
            "genuine mean {:.4} (n={}), imposter mean {:.4} (n={})",
            report.genuine.mean, report.genuine.count, report.imposter.mean, report.imposter.count
        );
        println!(
            "revoked-key mean {:.4} over {} keys, gap to imposters {:.4}",
            report.pseudo_imposter.mean, report.revoked_count, report.imposter_gap
        );
    }
    Ok(())
}

fn run_unlinkability(args: UnlinkabilityArgs) -> Result<()> {
    let entries = load_dataset(&args.dataset)?;
    let config = SectorConfig::new(args.sectors)?;
    let params = MatchParams::new(args.threshold, args.weight)?;
    let report = unlinkability_experiment(&entries, args.seed_a, args.seed_b, &config, &params)?;
    if args.json {
        print_json(&report)?;
    } else {
        println!(
            "same-finger cross-application mean {:.4} (n={}), different-finger {:.4} (n={})",
            report.pseudo_genuine.mean,
            report.pseudo_genuine.count,
            report.pseudo_imposter.mean,
            report.pseudo_imposter.count
        );
        println!("distribution overlap {:.4}", report.overlap);
        if let Some(w) = &report.warning {
            eprintln!("warning: {w}");
        }
    }
    Ok(())
}

fn run_diversity(args: DiversityArgs) -> Result<()> {
    let features = load_record(&args.minutiae, &args.skeleton, args.sectors)?;
    let side = features.scalar_len() as u32;
    let params = MatchParams::new(args.threshold, args.weight)?;
    let explicit_space = !(args.k1_values.is_empty()
        && args.k2_values.is_empty()
        && args.k3_values.is_empty()
        && args.k4_values.is_empty()
        && args.rho_values.is_empty());
    let report = if explicit_space {
        let or_full = |list: &[u32], lo: u32| -> Vec<u32> {
            if list.is_empty() {
                (lo..=side).collect()
            } else {
                list.to_vec()
            }
        };
        let space = ParameterSpace {
            k1: or_full(&args.k1_values, 1),
            k2: or_full(&args.k2_values, 1),
            k3: or_full(&args.k3_values, 2),
            k4: or_full(&args.k4_values, 2),
            rho: if args.rho_values.is_empty() {
                (0..args.count as u64)
                    .map(|i| derive_seed(args.seed, i))
                    .collect()
            } else {
                args.rho_values.clone()
            },
        };
        diversity_generate(&features, args.count, &space, &params)?
    } else {
        let mut keys: Vec<KeySet> = Vec::with_capacity(args.count);
        let mut i = 0u64;
        while keys.len() < args.count && i < args.count as u64 + 64 {
            let k = derive_keys(derive_seed(args.seed, i), side)?;
            if !keys.contains(&k) {
                keys.push(k);
            }
            i += 1;
        }
        diversity_report(&features, &keys, &params)?
    };
    if args.json {
        print_json(&report)?;
    } else {
        println!("{} templates of side {}", report.keys.len(), report.side);
        println!(
            "worst cross-match score {:.4}, smallest filler difference {:.4}",
            report.max_cross_score, report.min_filler_difference
        );
    }
    Ok(())
}
