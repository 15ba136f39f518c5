//! `cmode`: run error-rate experiments, evaluate bound curves, ingest
//! record files and summarize instances.
//!
//! Exit status: 0 on success, 2 for unreadable or malformed input, 3 when
//! the input is well formed but the request does not apply to it (wrong
//! setting, tied mode, budget too small).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use community_mode::bounds::{self, BoundsError, CurveId, RateId};
use community_mode::ingest::{self, ColumnRef, IngestError, IngestSpec, Normalization};
use community_mode::montecarlo::{self, ExperimentConfig, MonteCarloError};
use community_mode::{Instance, Setting};

#[derive(Parser)]
#[command(name = "cmode", version, about = "Community mode estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output prefix; writes PREFIX.csv and PREFIX.json.
        #[arg(long)]
        out: PathBuf,
        /// Worker thread cap (results do not depend on it).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Evaluate upper bounds over a budget grid, and lower-bound rates.
    Bounds {
        #[arg(long)]
        instance: PathBuf,
        /// Bound or rate id, e.g. DSM_COUPON, DSSR_SEP, SEPARATED.
        #[arg(long = "bound", required = true, num_args = 1..)]
        bounds: Vec<String>,
        #[arg(long, default_value_t = 0)]
        t_min: u64,
        #[arg(long)]
        t_max: u64,
        #[arg(long, default_value_t = 1)]
        t_step: u64,
        /// Output prefix; writes PREFIX.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build an instance JSON from a delimited record file.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Box column: header name or 0-based index.
        #[arg(long)]
        box_col: String,
        /// Community column: header name or 0-based index.
        #[arg(long)]
        community_col: String,
        /// none, trim or trim+casefold.
        #[arg(long, default_value = "none")]
        normalize: String,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        /// The file has no header row.
        #[arg(long)]
        no_header: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print an instance summary as JSON.
    Info {
        #[arg(long)]
        instance: PathBuf,
    },
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }

    fn semantic(message: impl ToString) -> Self {
        Failure {
            code: 3,
            message: message.to_string(),
        }
    }
}

impl From<MonteCarloError> for Failure {
    fn from(e: MonteCarloError) -> Self {
        match e {
            MonteCarloError::Algorithm(_) => Failure::semantic(e),
            _ => Failure::input(e),
        }
    }
}

impl From<BoundsError> for Failure {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::UnknownId(_) => Failure::input(e),
            _ => Failure::semantic(e),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        Failure::input(e)
    }
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    Instance::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn cmd_run(config: &Path, out: &Path, threads: Option<usize>) -> Result<(), Failure> {
    let (config, instance) = ExperimentConfig::read(config)?;
    let estimates = montecarlo::run_experiment(&config, &instance, out, threads)?;
    eprintln!(
        "{} estimates written to {}",
        estimates.len(),
        montecarlo::with_suffix(out, "csv").display()
    );
    Ok(())
}

fn cmd_bounds(
    instance: &Path,
    ids: &[String],
    t_min: u64,
    t_max: u64,
    t_step: u64,
    out: &Path,
) -> Result<(), Failure> {
    if t_step == 0 || t_min > t_max {
        return Err(Failure::input(
            "budget grid needs t-step > 0 and t-min <= t-max",
        ));
    }
    let d = read_instance(instance)?;
    let ids: Vec<CurveId> = ids
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, BoundsError>>()?;
    let budgets: Vec<u64> = (t_min..=t_max).step_by(t_step as usize).collect();
    let curves = ids
        .iter()
        .map(|&id| bounds::bound_curve(id, &d, &budgets))
        .collect::<Result<Vec<_>, _>>()?;
    let path = montecarlo::with_suffix(out, "csv");
    let file = std::fs::File::create(&path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    bounds::write_curves_csv(&curves, std::io::BufWriter::new(file)).map_err(Failure::input)?;
    eprintln!("{} curves written to {}", curves.len(), path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ingest(
    input: &Path,
    box_col: &str,
    community_col: &str,
    normalize: &str,
    delimiter: char,
    no_header: bool,
    out: &Path,
) -> Result<(), Failure> {
    if !delimiter.is_ascii() {
        return Err(Failure::input("delimiter must be a single ASCII character"));
    }
    let spec = IngestSpec {
        path: input.to_path_buf(),
        box_column: ColumnRef::Name(box_col.to_string()),
        community_column: ColumnRef::Name(community_col.to_string()),
        delimiter: delimiter as u8,
        has_header: !no_header,
        normalization: normalize.parse::<Normalization>()?,
    };
    let report = ingest::ingest_csv(&spec)?;
    report
        .instance
        .write(out)
        .map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
    eprintln!(
        "{} rows ({} malformed skipped): {} boxes, {} communities -> {}",
        report.rows,
        report.malformed,
        report.instance.num_boxes(),
        report.instance.num_communities(),
        out.display()
    );
    Ok(())
}

fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn marker(e: &BoundsError) -> Value {
    match e {
        BoundsError::InfiniteHardness => json!("infinite-hardness"),
        other => json!(format!("unavailable: {other}")),
    }
}

fn rates(d: &Instance, ids: &[RateId]) -> Value {
    let mut m = Map::new();
    for &id in ids {
        let v = match bounds::lower_bound_rate(id, d) {
            Ok(r) => number(r),
            Err(e) => marker(&e),
        };
        m.insert(id.name().to_string(), v);
    }
    Value::Object(m)
}

fn info_json(d: &Instance) -> Value {
    let summary = d.summarize();
    let labels = d.community_labels();
    let mut order: Vec<usize> = (0..d.num_communities()).collect();
    order.sort_by(|&a, &b| {
        summary.community_sizes[b]
            .cmp(&summary.community_sizes[a])
            .then(a.cmp(&b))
    });
    let top: Vec<Value> = order
        .iter()
        .take(5)
        .map(|&j| json!({"community": labels[j], "size": summary.community_sizes[j]}))
        .collect();
    let setting = d.classify_setting();

    let mut out = json!({
        "boxes": d.num_boxes(),
        "communities": d.num_communities(),
        "individuals": summary.total,
        "box_sizes": d.box_labels().iter().zip(&summary.box_sizes)
            .map(|(l, n)| json!({"box": l, "size": n})).collect::<Vec<_>>(),
        "top_communities": top,
        "mode": summary.mode_set.iter().map(|&j| labels[j].clone()).collect::<Vec<_>>(),
        "setting": setting.as_str(),
    });
    let obj = out.as_object_mut().expect("object");
    match setting {
        Setting::Mixed => {
            obj.insert(
                "lower_bound_rates".into(),
                rates(d, &[RateId::MixedIdentityless, RateId::MixedIdentity]),
            );
        }
        Setting::Separated => {
            let h = match bounds::hardness_separated(d) {
                Ok(h) => json!({"H": number(h.h), "H2": number(h.h2), "Hc": number(h.hc)}),
                Err(e) => marker(&e),
            };
            obj.insert("hardness".into(), h);
            obj.insert("lower_bound_rates".into(), rates(d, &[RateId::Separated]));
        }
        Setting::DisjointBox => {
            let h = match bounds::hardness_box(d) {
                Ok(h) => json!({
                    "Hb": number(h.hb),
                    "Hb2": number(h.hb2),
                    "Gamma": number(h.gamma),
                    "gamma_box": d.box_labels()[h.gamma_box],
                }),
                Err(e) => marker(&e),
            };
            obj.insert("hardness".into(), h);
            obj.insert(
                "lower_bound_rates".into(),
                rates(d, &[RateId::BoxMixed, RateId::BoxGamma]),
            );
        }
        Setting::General => {}
    }
    out
}

fn cmd_info(instance: &Path) -> Result<(), Failure> {
    let d = read_instance(instance)?;
    let text = serde_json::to_string_pretty(&info_json(&d)).map_err(Failure::input)?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            out,
            threads,
        } => cmd_run(config, out, *threads),
        Command::Bounds {
            instance,
            bounds,
            t_min,
            t_max,
            t_step,
            out,
        } => cmd_bounds(instance, bounds, *t_min, *t_max, *t_step, out),
        Command::Ingest {
            input,
            box_col,
            community_col,
            normalize,
            delimiter,
            no_header,
            out,
        } => cmd_ingest(
            input,
            box_col,
            community_col,
            normalize,
            *delimiter,
            *no_header,
            out,
        ),
        Command::Info { instance } => cmd_info(instance),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("cmode: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
