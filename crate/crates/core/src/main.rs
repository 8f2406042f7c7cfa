//! Command-line front end: one subcommand per pipeline stage, from catalog
//! inspection through dataset construction, training, evaluation, the
//! neuron sweep and the recommendation query.
//!
//! Exit codes: 0 success, 1 operational error (bad data, failed
//! precondition, I/O), 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use threatmatch::catalog::{load_catalog, load_registry, AttackType, Catalog, StrideCategory};
use threatmatch::encoder::{
    dataset_from_catalog, fmt_number, read_csv, write_csv, Dataset, FeatureRow,
    NormalizationParams, TargetMode,
};
use threatmatch::experiment::{
    evaluate, recommend, run_sweep, split_raw, train_model, RecommendInput,
};
use threatmatch::neuralnet::{Model, RpropParams, TrainConfig};

#[derive(Parser)]
#[command(
    name = "threatmatch",
    about = "Match attack patterns to mitigating security-pattern groups",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CatalogArgs {
    /// Attack-pattern catalog file
    #[arg(long)]
    catalog: PathBuf,
    /// Component registry file (`name,id` lines)
    #[arg(long)]
    registry: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset CSV
    #[arg(long)]
    data: PathBuf,
    /// Target representation of the CSV
    #[arg(long, default_value = "scalar", value_parser = parse_mode)]
    mode: TargetMode,
    /// The CSV has a header line
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct TrainOpts {
    /// Hidden-layer size
    #[arg(long, default_value_t = 90)]
    hidden: usize,
    /// Seed for weight init, hold-out and split decisions
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Training MSE goal
    #[arg(long, default_value_t = 0.0)]
    goal: f64,
    #[arg(long, default_value_t = 5000)]
    max_epochs: usize,
    /// Consecutive validation failures allowed before stopping
    #[arg(long, default_value_t = 6)]
    max_fail: usize,
    /// Gradient infinity-norm floor
    #[arg(long, default_value_t = 1e-6)]
    min_grad: f64,
    /// Fraction of training data held out for early stopping
    #[arg(long, default_value_t = 0.15)]
    val_fraction: f64,
    /// Feed raw feature values instead of min-max normalizing to [-1, 1]
    #[arg(long)]
    no_normalize: bool,
}

impl TrainOpts {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            goal: self.goal,
            max_epochs: self.max_epochs,
            max_fail: self.max_fail,
            min_grad: self.min_grad,
            val_fraction: self.val_fraction,
            learning_rate: 0.01,
            seed: self.seed,
            rprop: RpropParams::default(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Encode the catalog into a dataset CSV
    BuildDataset {
        #[command(flatten)]
        catalog: CatalogArgs,
        #[arg(long, default_value = "scalar", value_parser = parse_mode)]
        mode: TargetMode,
        /// Write a header line
        #[arg(long)]
        header: bool,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition a dataset into train and test CSVs
    Split {
        #[command(flatten)]
        data: DataArgs,
        /// Number of test rows
        #[arg(long)]
        n_test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
    },
    /// Train a network and write the model file
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: TrainOpts,
        /// Model output path
        #[arg(long)]
        out: PathBuf,
        /// Also write the normalization params as `column,min,max` lines
        #[arg(long)]
        params_out: Option<PathBuf>,
    },
    /// Tabulate actual vs expected output of a model over a test set
    Evaluate {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Print only the first N rows of the table
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average MSE/epochs/time over repeated runs per hidden-layer size
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        /// Hidden-layer sizes, comma separated
        #[arg(long, value_delimiter = ',', default_value = "80,90,100,110,120")]
        neurons: Vec<usize>,
        /// Runs per size
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[command(flatten)]
        opts: TrainOpts,
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Suggest the security-pattern group for one attack sample
    Recommend {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        catalog: CatalogArgs,
        /// Attack ID (with --resource/--vector/--type)
        #[arg(long, requires_all = ["resource", "vector", "attack_type"], conflicts_with = "features")]
        attack_id: Option<u32>,
        /// Attacked resource component name
        #[arg(long)]
        resource: Option<String>,
        /// Attack vector component name
        #[arg(long)]
        vector: Option<String>,
        /// Attack type letter: A, I or C
        #[arg(long = "type", value_parser = parse_attack_type)]
        attack_type: Option<AttackType>,
        /// Already-encoded feature row `attack_id,resource_id,vector_id,type`
        #[arg(long, value_delimiter = ',', num_args = 4)]
        features: Option<Vec<f64>>,
    },
    /// Count (pattern, category) assignments per STRIDE category
    Histogram {
        #[command(flatten)]
        catalog: CatalogArgs,
    },
}

#[derive(Clone, Copy)]
enum Format {
    Text,
    Csv,
}

fn parse_mode(text: &str) -> Result<TargetMode, String> {
    TargetMode::parse(text).ok_or_else(|| format!("expected `scalar` or `onehot`, got {text:?}"))
}

fn parse_format(text: &str) -> Result<Format, String> {
    match text {
        "text" => Ok(Format::Text),
        "csv" => Ok(Format::Csv),
        _ => Err(format!("expected `text` or `csv`, got {text:?}")),
    }
}

fn parse_attack_type(text: &str) -> Result<AttackType, String> {
    let mut chars = text.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => {
            AttackType::from_letter(c).ok_or_else(|| format!("expected A, I or C, got {text:?}"))
        }
        _ => Err(format!("expected A, I or C, got {text:?}")),
    }
}

fn read_file(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load_catalog_files(args: &CatalogArgs) -> Result<Catalog, String> {
    let registry = load_registry(&read_file(&args.registry)?)
        .map_err(|e| format!("{}: {e}", args.registry.display()))?;
    load_catalog(&read_file(&args.catalog)?, registry)
        .map_err(|e| format!("{}: {e}", args.catalog.display()))
}

fn load_dataset(args: &DataArgs) -> Result<Dataset, String> {
    read_csv(&read_file(&args.data)?, args.mode, args.header)
        .map_err(|e| format!("{}: {e}", args.data.display()))
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::BuildDataset {
            catalog,
            mode,
            header,
            out,
        } => {
            let catalog = load_catalog_files(&catalog)?;
            let dataset = dataset_from_catalog(&catalog, mode).map_err(|e| e.to_string())?;
            write_output(&out, &write_csv(&dataset, header))
        }
        Command::Split {
            data,
            n_test,
            seed,
            out_train,
            out_test,
        } => {
            let dataset = load_dataset(&data)?;
            let (train, test) = split_raw(&dataset, n_test, seed).map_err(|e| e.to_string())?;
            fs::write(&out_train, write_csv(&train, data.header))
                .map_err(|e| format!("{}: {e}", out_train.display()))?;
            fs::write(&out_test, write_csv(&test, data.header))
                .map_err(|e| format!("{}: {e}", out_test.display()))?;
            eprintln!("wrote {} train rows, {} test rows", train.len(), test.len());
            Ok(())
        }
        Command::Train {
            data,
            opts,
            out,
            params_out,
        } => {
            let dataset = load_dataset(&data)?;
            let run = train_model(
                &dataset,
                None,
                opts.hidden,
                &opts.config(),
                opts.seed,
                !opts.no_normalize,
            )
            .map_err(|e| e.to_string())?;
            run.model
                .save(&out)
                .map_err(|e| format!("{}: {e}", out.display()))?;
            if let Some(path) = params_out {
                let params = run
                    .model
                    .norm
                    .as_ref()
                    .map(NormalizationParams::to_text)
                    .unwrap_or_default();
                fs::write(&path, params).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            println!(
                "trained: hidden={} epochs={} final_train_mse={}",
                opts.hidden,
                run.epochs_used,
                fmt_number(run.train_mse)
            );
            Ok(())
        }
        Command::Evaluate {
            model,
            data,
            rows,
            format,
            out,
        } => {
            let model = Model::load(&model).map_err(|e| format!("{}: {e}", model.display()))?;
            let dataset = read_csv(&read_file(&data.data)?, model.mode, data.header)
                .map_err(|e| format!("{}: {e}", data.data.display()))?;
            let table = evaluate(&model, &dataset).map_err(|e| e.to_string())?;
            let rendered = match format {
                Format::Text => table.render_text(rows),
                Format::Csv => table.render_csv(),
            };
            write_output(&out, &rendered)
        }
        Command::Sweep {
            data,
            neurons,
            runs,
            opts,
            format,
            out,
        } => {
            let dataset = load_dataset(&data)?;
            let report = run_sweep(
                &dataset,
                &neurons,
                runs,
                &opts.config(),
                opts.seed,
                !opts.no_normalize,
            )
            .map_err(|e| e.to_string())?;
            let rendered = match format {
                Format::Text => report.render_text(),
                Format::Csv => report.render_csv(),
            };
            write_output(&out, &rendered)
        }
        Command::Recommend {
            model,
            catalog,
            attack_id,
            resource,
            vector,
            attack_type,
            features,
        } => {
            let model = Model::load(&model).map_err(|e| format!("{}: {e}", model.display()))?;
            let catalog = load_catalog_files(&catalog)?;
            let input = match (features, attack_id) {
                (Some(values), None) => {
                    RecommendInput::Features(FeatureRow([values[0], values[1], values[2], values[3]]))
                }
                (None, Some(attack_id)) => RecommendInput::Sample {
                    attack_id,
                    resource: resource.expect("required by clap"),
                    vector: vector.expect("required by clap"),
                    attack_type: attack_type.expect("required by clap"),
                },
                _ => {
                    return Err(
                        "give either --features or --attack-id with --resource/--vector/--type"
                            .into(),
                    )
                }
            };
            let rec = recommend(&model, &input, &catalog).map_err(|e| e.to_string())?;
            for warning in &rec.warnings {
                eprintln!("warning: {warning}");
            }
            let raw = rec
                .raw_output
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(" ");
            println!("raw output: {raw}");
            println!("group {}: {}", rec.group_id, rec.category_name);
            for member in &rec.members {
                println!("  {} ({})", member.pattern_name, member.source);
            }
            Ok(())
        }
        Command::Histogram { catalog } => {
            let catalog = load_catalog_files(&catalog)?;
            let counts = catalog.stride_histogram();
            for category in StrideCategory::ALL {
                println!(
                    "{}={}",
                    category.letter(),
                    counts[(category.group_id() - 1) as usize]
                );
            }
            println!("total assignments: {}", counts.iter().sum::<usize>());
            println!("patterns: {}", catalog.patterns().len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
