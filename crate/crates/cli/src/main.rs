mod config;
mod design;
mod fail;
mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use twinsem::prep::{summarize_twin_data, summary_table, ZygosityLabels};
use twinsem::sim::{simulate, Censor, SimSpec};
use twinsem::{fit, ColumnTable, ReportFormat};

use config::{apply_prep, read_levels, read_table, PrepStep, RunConfig};
use fail::{fail, CliError, Kind};
use output::Outputs;

#[derive(Parser)]
#[command(name = "twinsem", version, about = "RAM structural equation models for twin and causal designs")]
struct Cli {
    /// Run configuration (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum)]
    report: Option<Report>,
    /// Write results and exit 0 even if the optimizer did not converge
    #[arg(long, global = true)]
    allow_nonconverged: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Report {
    Tsv,
    Csv,
    Json,
}

impl From<Report> for ReportFormat {
    fn from(r: Report) -> Self {
        match r {
            Report::Tsv => ReportFormat::Tsv,
            Report::Csv => ReportFormat::Csv,
            Report::Json => ReportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured design, fit it and write estimates, fit indices and diagnostics
    Fit {
        /// Path listing (.R/.onyx or .json) replacing the configured paths
        #[arg(long)]
        paths: Option<PathBuf>,
    },
    /// Draw data from the configured design at the `simulate.truth` values
    Simulate {
        #[arg(long)]
        paths: Option<PathBuf>,
    },
    /// Data preparation on a single CSV
    Prep {
        #[command(subcommand)]
        op: PrepCommand,
    },
    /// Convert an Onyx export or exchange document to exchange JSON
    ParsePaths {
        #[arg(long)]
        paths: PathBuf,
        /// Model name in the written document (default: file stem)
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Args)]
struct PrepInput {
    /// Input CSV (`NA` or empty = missing)
    #[arg(long)]
    data: PathBuf,
    /// JSON sidecar mapping ordinal columns to their ordered levels
    #[arg(long)]
    ordinal: Option<PathBuf>,
    /// Output file name inside --out (default: <input stem>_<op>.csv)
    #[arg(long)]
    name: Option<String>,
}

#[derive(Subcommand)]
enum PrepCommand {
    /// Split censored measures into <v>bin / <v>cont columns
    BinCont {
        #[command(flatten)]
        input: PrepInput,
        #[arg(long, value_delimiter = ',', required = true)]
        vars: Vec<String>,
        #[arg(long, allow_hyphen_values = true)]
        censp: f64,
        #[arg(long, value_delimiter = ',')]
        suffixes: Vec<String>,
    },
    /// Fill missing twin covariates with 99999 and blank that twin's phenotype
    Placeholder {
        #[command(flatten)]
        input: PrepInput,
        #[arg(long)]
        covariate: String,
        #[arg(long)]
        phenotype: String,
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "_T1,_T2")]
        suffixes: Vec<String>,
    },
    /// Replace variables by regression residuals
    Residualize {
        #[command(flatten)]
        input: PrepInput,
        /// e.g. "bmi ~ age + I(age^2)"
        #[arg(long, conflicts_with_all = ["dvs", "covs"])]
        formula: Option<String>,
        #[arg(long, value_delimiter = ',')]
        dvs: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        covs: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        suffixes: Vec<String>,
    },
    /// Standardize wide twin variables with moments pooled over both twins
    Scale {
        #[command(flatten)]
        input: PrepInput,
        #[arg(long, value_delimiter = ',', required = true)]
        bases: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "_T1,_T2")]
        suffixes: Vec<String>,
    },
    /// Pair counts, pooled mean/SD and MZ/DZ twin correlations
    Summarize {
        #[command(flatten)]
        input: PrepInput,
        #[arg(long, value_delimiter = ',', required = true)]
        bases: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "_T1,_T2")]
        suffixes: Vec<String>,
        #[arg(long, default_value = "zygosity")]
        zygosity: String,
        #[arg(long, value_delimiter = ',')]
        mz: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        dz: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("twinsem: {e}");
            ExitCode::from(e.kind as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit { paths } => run_fit(cli, &load_config(cli)?, paths.as_deref()),
        Command::Simulate { paths } => run_simulate(cli, &load_config(cli)?, paths.as_deref()),
        Command::Prep { op } => run_prep(cli, op),
        Command::ParsePaths { paths, name } => {
            let set = design::read_paths(paths)?;
            for d in &set.diagnostics {
                eprintln!("warning: line {}: {}", d.line, d.message);
            }
            let name = name.clone().unwrap_or_else(|| stem(paths));
            let mut out = Outputs::default();
            out.add(format!("{name}.json"), set.to_exchange(&name).to_json() + "\n");
            out.commit(&cli.out)?;
            Ok(())
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| fail(Kind::Config, "--config is required"))?;
    RunConfig::load(path)
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("out").to_string()
}

fn extension(f: ReportFormat) -> &'static str {
    match f {
        ReportFormat::Tsv => "tsv",
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    }
}

fn run_fit(cli: &Cli, cfg: &RunConfig, paths: Option<&Path>) -> Result<(), CliError> {
    let format = cli.report.map(ReportFormat::from).or(cfg.output.report).unwrap_or(ReportFormat::Tsv);
    let mut groups = BTreeMap::new();
    let mut notes: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (name, table) in cfg.load_groups()? {
        let (table, w) = apply_prep(table, &cfg.prep).map_err(|e| in_group(e, &name))?;
        if !w.is_empty() {
            notes.insert(name.clone(), w);
        }
        groups.insert(name, table);
    }
    let model = design::build(cfg, groups, paths)?;
    let result = fit(&model, &cfg.fit.options(cli.seed))?;
    for (g, w) in &notes {
        for line in w {
            eprintln!("warning: {g}: {line}");
        }
    }
    if !result.converged() && !cli.allow_nonconverged {
        return Err(fail(
            Kind::NotConverged,
            format!(
                "optimizer stopped with status `{}` at -2lnL {:.6}; nothing written (rerun with --allow-nonconverged to keep the results)",
                result.status.as_str(),
                result.neg2ll
            ),
        ));
    }
    let diagnostics = serde_json::json!({
        "status": result.status.as_str(),
        "groups": result.groups,
        "warnings": notes,
    });
    let ext = extension(format);
    let prefix = &cfg.output.prefix;
    let mut out = Outputs::default();
    out.add(format!("{prefix}estimates.{ext}"), result.summary(format, cfg.output.ci));
    out.add(format!("{prefix}fit.{ext}"), result.fit_table(format));
    out.add(
        format!("{prefix}diagnostics.json"),
        serde_json::to_string_pretty(&diagnostics).expect("diagnostics serialize") + "\n",
    );
    for p in out.commit(&cli.out)? {
        eprintln!("wrote {}", p.display());
    }
    if format == ReportFormat::Tsv {
        print!("{}", result.summary(format, cfg.output.ci));
    }
    Ok(())
}

fn in_group(mut e: CliError, group: &str) -> CliError {
    e.message = format!("group {group}: {}", e.message);
    e
}

fn run_simulate(cli: &Cli, cfg: &RunConfig, paths: Option<&Path>) -> Result<(), CliError> {
    let sim = cfg.simulate.as_ref().ok_or_else(|| fail(Kind::Config, "config has no `simulate` block"))?;
    let model = design::build_unbound(cfg, paths)?;
    let n = match &sim.n {
        config::NPerGroup::Same(n) => vec![*n],
        config::NPerGroup::Each(v) => v.clone(),
    };
    let spec = SimSpec {
        model,
        truth: sim.truth.clone(),
        n,
        seed: cli.seed.or(sim.seed).unwrap_or(cfg.fit.seed),
        ordinal: sim.ordinal.clone(),
        censor: sim.censor.as_ref().map(|c| Censor {
            vars: c.vars.clone(),
            lod: c.lod,
            suffixes: c.suffixes.clone(),
        }),
        missing: sim.missing.as_ref().map(|m| (m.columns.clone(), m.rate)),
    };
    let drawn = simulate(&spec)?;
    let mut out = Outputs::default();
    let mut levels = BTreeMap::new();
    for (group, table) in &drawn.groups {
        out.add(format!("{}{group}.csv", cfg.output.prefix), table.to_csv_string()?);
        levels.extend(table.ordinal_levels());
    }
    out.add(
        format!("{}truth.json", cfg.output.prefix),
        serde_json::to_string_pretty(&drawn.truth_json()).expect("truth serializes") + "\n",
    );
    if !levels.is_empty() {
        out.add(
            format!("{}levels.json", cfg.output.prefix),
            serde_json::to_string_pretty(&levels).expect("levels serialize") + "\n",
        );
    }
    for p in out.commit(&cli.out)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn opt_suffixes(s: &[String]) -> Option<Vec<String>> {
    (!s.is_empty()).then(|| s.to_vec())
}

fn pair(s: &[String]) -> Result<[String; 2], CliError> {
    <[String; 2]>::try_from(s.to_vec()).map_err(|_| fail(Kind::Config, format!("--suffixes needs exactly two values, got {}", s.len())))
}

fn run_prep(cli: &Cli, op: &PrepCommand) -> Result<(), CliError> {
    let (input, tag) = match op {
        PrepCommand::BinCont { input, .. } => (input, "bin-cont"),
        PrepCommand::Placeholder { input, .. } => (input, "placeholder"),
        PrepCommand::Residualize { input, .. } => (input, "residualize"),
        PrepCommand::Scale { input, .. } => (input, "scale"),
        PrepCommand::Summarize { input, .. } => (input, "summary"),
    };
    let levels = match &input.ordinal {
        Some(p) => read_levels(p)?,
        None => BTreeMap::new(),
    };
    let data = read_table(&input.data, &levels)?;
    let step = match op {
        PrepCommand::BinCont { vars, censp, suffixes, .. } => PrepStep::BinCont {
            vars: vars.clone(),
            censp: *censp,
            suffixes: opt_suffixes(suffixes),
        },
        PrepCommand::Placeholder { covariate, phenotype, suffixes, .. } => PrepStep::Placeholder {
            covariate: covariate.clone(),
            phenotype: phenotype.clone(),
            suffixes: pair(suffixes)?,
        },
        PrepCommand::Residualize { formula, dvs, covs, suffixes, .. } => PrepStep::Residualize {
            formula: formula.clone(),
            dvs: dvs.clone(),
            covs: covs.clone(),
            suffixes: opt_suffixes(suffixes),
        },
        PrepCommand::Scale { bases, suffixes, .. } => PrepStep::Scale {
            bases: bases.clone(),
            suffixes: suffixes.clone(),
        },
        PrepCommand::Summarize { bases, suffixes, zygosity, mz, dz, .. } => {
            let mut labels = ZygosityLabels::default();
            if !mz.is_empty() {
                labels.mz = mz.clone();
            }
            if !dz.is_empty() {
                labels.dz = dz.clone();
            }
            let rows = summarize_twin_data(&data, bases, &pair(suffixes)?, zygosity, &labels)?;
            let format = cli.report.map(ReportFormat::from).unwrap_or(ReportFormat::Csv);
            let body = match format {
                ReportFormat::Json => serde_json::to_string_pretty(&rows).expect("summary serializes") + "\n",
                ReportFormat::Csv => summary_table(&rows).to_csv_string()?,
                ReportFormat::Tsv => summary_table(&rows).to_csv_string()?.replace(',', "\t"),
            };
            let name = input.name.clone().unwrap_or_else(|| format!("{}_{tag}.{}", stem(&input.data), extension(format)));
            let mut out = Outputs::default();
            out.add(name, body);
            out.commit(&cli.out)?;
            return Ok(());
        }
    };
    let (table, notes) = apply_prep(data, std::slice::from_ref(&step))?;
    for n in &notes {
        eprintln!("warning: {n}");
    }
    write_table(cli, &table, input.name.clone().unwrap_or_else(|| format!("{}_{tag}.csv", stem(&input.data))))
}

/// Writes the table and, when it has ordinal columns, a `<name>.levels.json` sidecar.
fn write_table(cli: &Cli, table: &ColumnTable, name: String) -> Result<(), CliError> {
    let mut out = Outputs::default();
    let levels = table.ordinal_levels();
    if !levels.is_empty() {
        let base = name.strip_suffix(".csv").unwrap_or(&name);
        out.add(
            format!("{base}.levels.json"),
            serde_json::to_string_pretty(&levels).expect("levels serialize") + "\n",
        );
    }
    out.add(name, table.to_csv_string()?);
    for p in out.commit(&cli.out)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}
