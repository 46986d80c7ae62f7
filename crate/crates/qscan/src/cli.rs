//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use qscan_core::{
    asymptotic_rate, filter_variants, fit_null, theoretical_bound, Family, GenotypeMatrix, McMode, Method, NullModel,
    ScanConfig, ScoreSet, ThresholdConfig, ThresholdResult,
};

use crate::error::{QscanError, Result};
use crate::experiments::{fwer_experiment, fwer_table, power_experiment, power_table, ExperimentConfig};
use crate::io::{
    align_samples, parse_dosage_tsv, parse_pheno_covar, parse_vcf_subset, write_qmax_tsv, write_regions_tsv,
    write_windows_tsv_gz, NullModelSummary, ParseOptions, RegionRecord, ScanReportFile, ThresholdFile,
};
use crate::parallel::{par_mc_threshold, par_scan_report, with_threads};

#[derive(Debug, Parser)]
#[command(name = "qscan", version, about = "Scan statistics for rare-variant association regions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the null model, compute the threshold, scan and report regions.
    Scan(ScanArgs),
    /// Compute only the Monte Carlo threshold and its null maxima.
    Threshold(InputArgs),
    /// Family-wise error simulation.
    SimulateFwer(SimulateArgs),
    /// Power simulation.
    SimulatePower(SimulateArgs),
    /// Print the closed-form threshold bound and the asymptotic rate.
    Bound(BoundArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenoFormat {
    Tsv,
    Vcf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Qscan,
    Mscan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McModeArg {
    GenotypeProjection,
    BandedCholesky,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Genotype file (dosage table or VCF, optionally gzipped)
    #[arg(long)]
    pub geno: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: GenoFormat,
    /// Phenotype/covariate table
    #[arg(long)]
    pub pheno: PathBuf,
    #[arg(long)]
    pub pheno_col: String,
    /// Comma-separated covariate column names
    #[arg(long, value_delimiter = ',')]
    pub covar_cols: Vec<String>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 40)]
    pub lmin: usize,
    #[arg(long, default_value_t = 200)]
    pub lmax: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2000)]
    pub mc_reps: usize,
    #[arg(long, value_enum, default_value = "genotype-projection")]
    pub mc_mode: McModeArg,
    #[arg(long, value_enum, default_value = "qscan")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    pub maf_max: f64,
    #[arg(long, default_value_t = 3)]
    pub mac_min: u32,
    /// Variants with a larger fraction of missing genotypes are dropped
    #[arg(long, default_value_t = 0.10)]
    pub max_missing: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Also write every window statistic to `<prefix>.windows.tsv.gz`
    #[arg(long)]
    pub emit_windows: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// key = value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` settings applied after the file
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Write the table to `<prefix>.fwer.tsv` or `<prefix>.power.tsv`
    #[arg(long)]
    pub out_prefix: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long, default_value_t = 20_000)]
    pub p: usize,
    #[arg(long, default_value_t = 40)]
    pub lmin: usize,
    #[arg(long, default_value_t = 200)]
    pub lmax: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Binomial => Family::Binomial,
        }
    }
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Qscan => Method::QScan,
            MethodArg::Mscan => Method::MScan,
        }
    }
}

impl From<McModeArg> for McMode {
    fn from(m: McModeArg) -> Self {
        match m {
            McModeArg::GenotypeProjection => McMode::GenotypeProjection,
            McModeArg::BandedCholesky => McMode::BandedCholesky,
        }
    }
}

impl Cli {
    /// Window-length problems that clap cannot express, reported as usage
    /// errors.
    pub fn usage_problem(&self) -> Option<String> {
        let (lmin, lmax) = match &self.command {
            Command::Scan(a) => (a.input.lmin, a.input.lmax),
            Command::Threshold(a) => (a.lmin, a.lmax),
            Command::Bound(a) => (a.lmin, a.lmax),
            _ => return None,
        };
        if lmin == 0 {
            return Some("--lmin must be at least 1".into());
        }
        (lmin > lmax).then(|| format!("--lmin ({lmin}) must not exceed --lmax ({lmax})"))
    }
}

fn with_path(path: &Path, e: QscanError) -> QscanError {
    match e {
        QscanError::Parse { line, message } => QscanError::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

/// Everything up to the fitted null model and the score statistics.
pub struct Prepared {
    pub n_variants_input: usize,
    pub geno: GenotypeMatrix,
    pub model: NullModel,
    pub scores: ScoreSet,
    pub scan_cfg: ScanConfig,
    pub warnings: Vec<String>,
}

pub fn prepare(a: &InputArgs) -> Result<Prepared> {
    let scan_cfg = ScanConfig::new(a.lmin, a.lmax, a.method.into())?;
    let opts = ParseOptions {
        max_missing: a.max_missing,
    };
    let parsed = match a.format {
        GenoFormat::Tsv => parse_dosage_tsv(&a.geno, opts),
        GenoFormat::Vcf => parse_vcf_subset(&a.geno, opts),
    }
    .map_err(|e| with_path(&a.geno, e))?;
    let table = parse_pheno_covar(&a.pheno, &a.pheno_col, &a.covar_cols).map_err(|e| with_path(&a.pheno, e))?;
    let bundle = align_samples(&parsed.geno, &parsed.sample_ids, &table, a.family.into())?;
    let mut warnings = parsed.warnings;
    warnings.extend(bundle.warnings);
    let geno = filter_variants(&bundle.genotype, a.maf_max, a.mac_min)?;
    log::info!(
        "{} samples, {} of {} variants pass the MAF/MAC filter",
        geno.n_samples(),
        geno.n_variants(),
        parsed.geno.n_variants()
    );
    let model = fit_null(&bundle.phenotype, &bundle.covariates)?;
    let scores = ScoreSet::compute(&geno, &model, scan_cfg.required_bandwidth())?;
    scan_cfg.validate(scores.n_variants())?;
    Ok(Prepared {
        n_variants_input: parsed.geno.n_variants(),
        geno,
        model,
        scores,
        scan_cfg,
        warnings,
    })
}

fn threshold_of(a: &InputArgs, prep: &Prepared) -> Result<ThresholdResult> {
    let cfg = ThresholdConfig {
        alpha: a.alpha,
        n_reps: a.mc_reps,
        seed: a.seed,
        mode: a.mc_mode.into(),
    };
    par_mc_threshold(&prep.scores, Some((&prep.geno, &prep.model)), &prep.scan_cfg, &cfg)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn threshold_file(a: &InputArgs, prep: &Prepared, t: &ThresholdResult) -> ThresholdFile {
    ThresholdFile {
        method: t.method.name().into(),
        alpha: t.alpha,
        h: t.h,
        mc_reps: t.qmax_samples.len(),
        mc_mode: t.mode.name().into(),
        seed: a.seed,
        n_variants: prep.scores.n_variants(),
        l_min: a.lmin,
        l_max: a.lmax,
        bound_upper: finite(t.bound_upper),
        asymptotic_rate: finite(t.rate),
        warnings: t.warnings.clone(),
    }
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| QscanError::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| QscanError::io(path, e))
}

fn run_scan(a: &ScanArgs) -> Result<()> {
    let input = &a.input;
    let prep = prepare(input)?;
    let t = threshold_of(input, &prep)?;
    log::info!("threshold h = {}", t.h);
    let report = par_scan_report(&prep.scores, &prep.scan_cfg, t.h)?;
    let regions: Vec<RegionRecord> = report
        .regions
        .iter()
        .map(|r| RegionRecord::new(r, &prep.scores))
        .collect();
    write_regions_tsv(&suffixed(&input.out_prefix, ".regions.tsv"), &regions)?;
    if a.emit_windows {
        write_windows_tsv_gz(&suffixed(&input.out_prefix, ".windows.tsv.gz"), &prep.scores, &prep.scan_cfg)?;
    }
    let m = &prep.model;
    let file = ScanReportFile {
        n_samples: prep.geno.n_samples(),
        n_variants_input: prep.n_variants_input,
        n_variants_tested: prep.scores.n_variants(),
        maf_max: input.maf_max,
        mac_min: input.mac_min,
        null_model: NullModelSummary {
            family: m.family.name().into(),
            coefficients: m.alpha_hat.clone(),
            covariate_names: m.covariates.names().to_vec(),
            dispersion: m.dispersion,
            iterations: m.iterations,
        },
        threshold: threshold_file(input, &prep, &t),
        n_candidates: report.n_candidates,
        skipped_windows: report.skipped_windows,
        regions,
        warnings: prep.warnings,
    };
    write_json(&suffixed(&input.out_prefix, ".report.json"), &file)?;
    println!("{} regions above h = {}", file.regions.len(), t.h);
    Ok(())
}

fn run_threshold(a: &InputArgs) -> Result<()> {
    let prep = prepare(a)?;
    let t = threshold_of(a, &prep)?;
    write_json(&suffixed(&a.out_prefix, ".threshold.json"), &threshold_file(a, &prep, &t))?;
    write_qmax_tsv(&suffixed(&a.out_prefix, ".qmax.tsv"), &t.qmax_samples)?;
    println!("h = {}", t.h);
    Ok(())
}

pub fn experiment_config(a: &SimulateArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| QscanError::io(path, e))?;
            ExperimentConfig::parse(&text).map_err(|e| with_path(path, e))?
        }
        None => ExperimentConfig::default(),
    };
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| QscanError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit_table(a: &SimulateArgs, suffix: &str, table: &str) -> Result<()> {
    if let Some(prefix) = &a.out_prefix {
        let path = suffixed(prefix, suffix);
        fs::write(&path, table).map_err(|e| QscanError::io(&path, e))?;
    }
    print!("{table}");
    Ok(())
}

fn run_bound(a: &BoundArgs) -> Result<()> {
    let b = theoretical_bound(a.p, a.lmin, a.lmax, a.alpha)?;
    let r = asymptotic_rate(a.p)?;
    println!("theoretical_bound\t{b}");
    println!("asymptotic_rate\t{r}");
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Scan(a) => with_threads(a.input.threads, || run_scan(a))?,
        Command::Threshold(a) => with_threads(a.threads, || run_threshold(a))?,
        Command::SimulateFwer(a) => {
            let cfg = experiment_config(a)?;
            let (rows, _) = with_threads(a.threads, || fwer_experiment(&cfg))??;
            emit_table(a, ".fwer.tsv", &fwer_table(&rows))
        }
        Command::SimulatePower(a) => {
            let cfg = experiment_config(a)?;
            let (rows, _) = with_threads(a.threads, || power_experiment(&cfg))??;
            emit_table(a, ".power.tsv", &power_table(&rows))
        }
        Command::Bound(a) => run_bound(a),
    }
}
