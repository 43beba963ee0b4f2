//! CLI for the dyadic-grid machinery: delta diagnostics, covering queries,
//! grid inspection, per-theorem verifiers, test-data generation, and the
//! full verification suites with JSON reports.
//!
//! Exit codes: 0 all checks pass, 1 a verification failed, 2 usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dyadic::covering::{cover, cover_naive, RatInterval};
use dyadic::error::Error;
use dyadic::exact::{format_rational, parse_rational, Rational};
use dyadic::grids::{endpoint_sets, Domain, GridSpec};
use dyadic::haar::{bmo_dyadic, BmoMode};
use dyadic::maximal::verify_maximal_comparability;
use dyadic::mesh::{
    function2_from_json, function_from_csv, function_from_json, function_to_csv, function_to_json,
    weight2_from_json, weight_from_json, MeshWeight2D,
};
use dyadic::product::{
    product_bmo_dyadic, product_h1_dyadic_norm, product_weight_check, random_finite_product_haar,
    random_staircase, singleton_omegas, verify_strong_maximal_comparability, GridPair,
};
use dyadic::suite::{run_suite, SuiteConfig, SuiteName};
use dyadic::weights::{
    class_constant, generate_dyadic_doubling, verify_intersection, Family, PIndex, WeightClass,
};
use dyadic::{covering_constant, relative_distance};

#[derive(Parser)]
#[command(
    name = "dyadic",
    about = "Dyadic grids, covering lemmas, and class-constant verification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DomainArgs {
    /// Torus finest level L (mesh 2^-L).
    #[arg(long, default_value_t = 8)]
    level: i32,
    /// Switch to the line window [-2^M, 2^M) with this M.
    #[arg(long)]
    window: Option<i32>,
}

impl DomainArgs {
    fn domain(&self) -> Domain {
        match self.window {
            None => Domain::torus(self.level),
            Some(m) => Domain::line(m, self.level),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Std,
    Delta,
    Naive,
}

#[derive(Subcommand)]
enum Command {
    /// Print the relative distance d(delta) to the dyadic rationals.
    DOfDelta { delta: String },
    /// Cover an interval by a standard or shifted grid interval.
    Cover {
        #[arg(long)]
        delta: String,
        #[arg(long, allow_hyphen_values = true)]
        left: String,
        #[arg(long, allow_hyphen_values = true)]
        len: String,
        /// Search the naive grid instead (may find nothing).
        #[arg(long)]
        naive: bool,
        /// Naive search depth (levels below 0).
        #[arg(long, default_value_t = 8)]
        depth: i32,
        #[command(flatten)]
        dom: DomainArgs,
    },
    /// Grid inspection.
    Grid {
        #[command(subcommand)]
        cmd: GridCmd,
    },
    /// Weight-class verification against the two-grid intersection bounds.
    Weights {
        #[command(subcommand)]
        cmd: WeightsCmd,
    },
    /// BMO norms of a mesh function over one grid.
    Bmo {
        #[arg(long, default_value = "avg")]
        mode: String,
        #[arg(long, value_enum, default_value = "std")]
        grid: GridArg,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        input: PathBuf,
    },
    /// Maximal-function comparability verification.
    Maximal {
        #[command(subcommand)]
        cmd: MaximalCmd,
    },
    /// Product (two-parameter) verifiers.
    Product {
        #[command(subcommand)]
        cmd: ProductCmd,
    },
    /// Generate test data (cascade weights, finite-Haar functions).
    Generate {
        #[command(subcommand)]
        cmd: GenerateCmd,
    },
    /// Run verification suites and write JSON reports.
    Verify {
        /// all | covering | weights | bmo | vmo | maximal | product
        suite: String,
        /// Shift(s) to test; defaults to 1/3, 1/5, 2/5, 1/7.
        #[arg(long)]
        delta: Vec<String>,
        #[arg(long, default_value_t = 8)]
        level: i32,
        #[arg(long, default_value_t = 4)]
        level_2d: i32,
        #[arg(long, default_value_t = 6)]
        window: i32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 64.0)]
        k_cap: f64,
        #[arg(long, default_value_t = 12)]
        weights: usize,
        #[arg(long, default_value_t = 24)]
        functions: usize,
        /// Directory for per-suite JSON reports and the summary.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GridCmd {
    /// Show the level-n endpoints of the standard grid and one shifted grid.
    Show {
        #[arg(long)]
        delta: String,
        #[arg(long, value_enum, default_value = "delta")]
        family: GridArg,
        #[arg(long, allow_hyphen_values = true)]
        n: i32,
        #[command(flatten)]
        dom: DomainArgs,
    },
}

#[derive(Subcommand)]
enum WeightsCmd {
    Verify {
        #[arg(long)]
        class: String,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also export the constant table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Just the constant of one class over one family.
    Constant {
        #[arg(long)]
        class: String,
        #[arg(long, default_value = "continuous")]
        family: String,
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum MaximalCmd {
    Verify {
        #[arg(long)]
        delta: String,
        #[arg(long)]
        weight: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ProductCmd {
    Verify {
        /// strong-maximal | bmo | weights | h1
        #[arg(long)]
        which: String,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        weight: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        level: i32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum GenerateCmd {
    Weight {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 3.0)]
        ratio_bound: f64,
        #[command(flatten)]
        dom: DomainArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit the one-column CSV format instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    Function {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        terms: usize,
        #[command(flatten)]
        dom: DomainArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let usage = matches!(
                e,
                Error::Config(_)
                    | Error::Parse(_)
                    | Error::DeltaOutOfRange(_)
                    | Error::DyadicDelta(_)
                    | Error::ExponentBelowOne(_)
            );
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn read_json(path: &PathBuf) -> Result<serde_json::Value, Error> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn load_function(path: &PathBuf) -> Result<dyadic::mesh::MeshFunction1D, Error> {
    if path.extension().is_some_and(|e| e == "csv") {
        function_from_csv(&std::fs::read_to_string(path)?)
    } else {
        function_from_json(&read_json(path)?)
    }
}

fn parse_delta(s: &str) -> Result<Rational, Error> {
    let d = parse_rational(s)?;
    covering_constant(&d)?; // validates (0,1) and d(delta) > 0
    Ok(d)
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::DOfDelta { delta } => {
            let d = relative_distance(&parse_rational(&delta)?)?;
            println!("{}", format_rational(&d));
            Ok(true)
        }
        Command::Cover {
            delta,
            left,
            len,
            naive,
            depth,
            dom,
        } => {
            let delta = parse_delta(&delta)?;
            let q = RatInterval::new(parse_rational(&left)?, parse_rational(&len)?, dom.domain())?;
            if naive {
                match cover_naive(&q, &delta, depth)? {
                    Some((id, ratio)) => {
                        println!(
                            "{}",
                            serde_json::json!({
                                "interval": id,
                                "ratio": format_rational(&ratio),
                            })
                        );
                    }
                    None => println!("{}", serde_json::json!({ "interval": null })),
                }
                return Ok(true);
            }
            let (id, ratio) = cover(&q, &delta)?;
            println!(
                "{}",
                serde_json::json!({ "interval": id, "ratio": format_rational(&ratio) })
            );
            Ok(true)
        }
        Command::Grid {
            cmd:
                GridCmd::Show {
                    delta,
                    family,
                    n,
                    dom,
                },
        } => {
            let delta = parse_delta(&delta)?;
            let domain = dom.domain();
            let grid = match family {
                GridArg::Std => GridSpec::standard(domain),
                GridArg::Delta => GridSpec::shifted(delta.clone(), domain)?,
                GridArg::Naive => GridSpec::naive_shifted(delta.clone(), domain)?,
            };
            let std = GridSpec::standard(domain);
            let (a, b) = endpoint_sets(&std, &grid, n)?;
            println!(
                "{}",
                serde_json::json!({
                    "level": n,
                    "standard": a.iter().map(format_rational).collect::<Vec<_>>(),
                    "other": b.iter().map(format_rational).collect::<Vec<_>>(),
                })
            );
            Ok(true)
        }
        Command::Weights { cmd } => match cmd {
            WeightsCmd::Verify {
                class,
                delta,
                input,
                report,
                csv,
            } => {
                let class = WeightClass::parse(&class)?;
                let delta = parse_delta(&delta)?;
                let w = weight_from_json(&read_json(&input)?)?;
                let rep = verify_intersection(&w, &delta, class)?;
                if let Some(path) = report {
                    std::fs::write(&path, serde_json::to_string_pretty(&rep.to_json())?)?;
                }
                if let Some(path) = csv {
                    std::fs::write(&path, rep.csv_rows())?;
                }
                println!("{}", serde_json::to_string_pretty(&rep.to_json())?);
                Ok(rep.pass)
            }
            WeightsCmd::Constant {
                class,
                family,
                delta,
                input,
            } => {
                let class = WeightClass::parse(&class)?;
                let family = match family.as_str() {
                    "continuous" => Family::Continuous,
                    "std" => Family::Std,
                    "shifted" | "delta" => Family::Shifted,
                    other => return Err(Error::Config(format!("unknown family {other:?}"))),
                };
                let delta = delta.map(|d| parse_delta(&d)).transpose()?;
                let w = weight_from_json(&read_json(&input)?)?;
                let rep = class_constant(&w, class, family, delta.as_ref())?;
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::to_value(&rep)?)?
                );
                Ok(true)
            }
        },
        Command::Bmo {
            mode,
            grid,
            delta,
            input,
        } => {
            let f = load_function(&input)?;
            let g = match grid {
                GridArg::Std => GridSpec::standard(f.domain()),
                GridArg::Delta => {
                    let d =
                        delta.ok_or_else(|| Error::Config("--grid delta needs --delta".into()))?;
                    GridSpec::shifted(parse_delta(&d)?, f.domain())?
                }
                GridArg::Naive => {
                    return Err(Error::Config("bmo is defined on std/delta grids".into()))
                }
            };
            let mode = match mode.as_str() {
                "avg" => BmoMode::Avg,
                "carleson" => BmoMode::Carleson,
                m if m.starts_with("avgp") => {
                    BmoMode::AvgP(m[4..].parse().map_err(|e| Error::Parse(format!("{e}")))?)
                }
                other => return Err(Error::Config(format!("unknown mode {other:?}"))),
            };
            let rep = bmo_dyadic(&f, &g, mode)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::to_value(&rep)?)?
            );
            Ok(true)
        }
        Command::Maximal { cmd } => match cmd {
            MaximalCmd::Verify {
                delta,
                weight,
                input,
                report,
            } => {
                let delta = parse_delta(&delta)?;
                let f = load_function(&input)?;
                let w = weight
                    .map(|p| weight_from_json(&read_json(&p)?))
                    .transpose()?;
                let rep = verify_maximal_comparability(&f, &delta, w.as_ref())?;
                if let Some(path) = report {
                    std::fs::write(&path, serde_json::to_string_pretty(&rep.to_json())?)?;
                }
                println!("{}", serde_json::to_string_pretty(&rep.to_json())?);
                Ok(rep.pass)
            }
        },
        Command::Product { cmd } => match cmd {
            ProductCmd::Verify {
                which,
                delta,
                input,
                weight,
                level,
                seed,
            } => {
                let delta = parse_delta(&delta)?;
                let dx = Domain::torus(level);
                let dy = Domain::torus(level);
                let mut rng = seeded(seed);
                let f = match &input {
                    Some(p) => function2_from_json(&read_json(p)?)?,
                    None => random_finite_product_haar(&mut rng, dx, dy, 6)?,
                };
                match which.as_str() {
                    "strong-maximal" => {
                        let w = weight
                            .map(|p| weight2_from_json(&read_json(&p)?))
                            .transpose()?;
                        let rep = verify_strong_maximal_comparability(&f, &delta, w.as_ref())?;
                        println!("{}", serde_json::to_string_pretty(&rep.to_json())?);
                        Ok(rep.pass)
                    }
                    "bmo" => {
                        let (fx, fy) = f.domains();
                        let pair = GridPair::four(&delta, fx, fy)?[0].clone();
                        let mut omegas = singleton_omegas(&pair)?;
                        for _ in 0..50 {
                            omegas.push(random_staircase(&mut rng, fx, fy, 5));
                        }
                        let (value, _) = product_bmo_dyadic(&f, &pair, &omegas)?;
                        println!(
                            "{}",
                            serde_json::json!({ "pair": pair.tag(), "constant": value })
                        );
                        Ok(true)
                    }
                    "weights" => {
                        let w = match weight {
                            Some(p) => weight2_from_json(&read_json(&p)?)?,
                            None => {
                                let wx = generate_dyadic_doubling(seed, dx, 2.0)?;
                                let wy = generate_dyadic_doubling(seed + 1, dy, 2.0)?;
                                MeshWeight2D::tensor(&wx, &wy)
                            }
                        };
                        let rep = product_weight_check(&w, PIndex::Finite(2.0), &delta)?;
                        println!("{}", serde_json::to_string_pretty(&rep.to_json())?);
                        Ok(rep.pass)
                    }
                    "h1" => {
                        let (fx, fy) = f.domains();
                        let mut out = serde_json::Map::new();
                        for pair in GridPair::four(&delta, fx, fy)? {
                            let norm = product_h1_dyadic_norm(&f, &pair)?;
                            out.insert(pair.tag(), serde_json::json!(norm));
                        }
                        println!("{}", serde_json::Value::Object(out));
                        Ok(true)
                    }
                    other => Err(Error::Config(format!("unknown product check {other:?}"))),
                }
            }
        },
        Command::Generate { cmd } => match cmd {
            GenerateCmd::Weight {
                seed,
                ratio_bound,
                dom,
                out,
                csv,
            } => {
                let w = generate_dyadic_doubling(seed, dom.domain(), ratio_bound)?;
                emit(function_to_json(w.as_fn()), w.as_fn(), out, csv)
            }
            GenerateCmd::Function {
                seed,
                terms,
                dom,
                out,
                csv,
            } => {
                let mut rng = seeded(seed);
                let f = dyadic::haar::random_finite_haar(&mut rng, dom.domain(), terms)?;
                emit(function_to_json(&f), &f, out, csv)
            }
        },
        Command::Verify {
            suite,
            delta,
            level,
            level_2d,
            window,
            seed,
            k_cap,
            weights,
            functions,
            out,
        } => {
            let deltas: Vec<Rational> = if delta.is_empty() {
                ["1/3", "1/5", "2/5", "1/7"]
                    .iter()
                    .map(|s| parse_delta(s))
                    .collect::<Result<_, _>>()?
            } else {
                delta
                    .iter()
                    .map(|s| parse_delta(s))
                    .collect::<Result<_, _>>()?
            };
            let suites = if suite == "all" {
                SuiteName::ALL.to_vec()
            } else {
                vec![SuiteName::parse(&suite)?]
            };
            let mut all_pass = true;
            for d in &deltas {
                let mut cfg = SuiteConfig::new(d.clone())?;
                cfg.level = level;
                cfg.level_2d = level_2d;
                cfg.window = window;
                cfg.seed = seed;
                cfg.k_cap = k_cap;
                cfg.weight_count = weights;
                cfg.function_count = functions;
                cfg.suites = suites.clone();
                cfg.out_dir = out
                    .as_ref()
                    .map(|dir| dir.join(format!("delta_{}", format_rational(d).replace('/', "_"))));
                let (pass, outcomes) = run_suite(&cfg)?;
                for o in &outcomes {
                    println!(
                        "delta {:>4}  {:<10} {}",
                        format_rational(d),
                        o.suite,
                        if o.pass { "PASS" } else { "FAIL" }
                    );
                    if !o.pass {
                        if let Some(failure) = &o.failure {
                            eprintln!("failing case: {}", serde_json::to_string_pretty(failure)?);
                        }
                    }
                }
                all_pass &= pass;
            }
            Ok(all_pass)
        }
    }
}

fn emit(
    json: serde_json::Value,
    f: &dyadic::mesh::MeshFunction1D,
    out: Option<PathBuf>,
    csv: bool,
) -> Result<bool, Error> {
    let text = if csv {
        function_to_csv(f)
    } else {
        serde_json::to_string_pretty(&json)?
    };
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(true)
}

fn seeded(seed: u64) -> impl rand::Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha20Rng::seed_from_u64(seed)
}
