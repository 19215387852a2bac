//! Command-line front end: every library operation with JSON (default), TSV or CSV output.

mod output;

use std::io::{Read, Write};
use std::process::ExitCode;

use betashift::cantor::{self, build_levels, measure, sample_digits, CantorPlan, LevelMode};
use betashift::dimension::{self, boxcount, boxcount_csv, dim_r, dim_uniform, local_dimension_series};
use betashift::expansion::{approximate_beta, expand_rational, parse_decimal};
use betashift::recurrence::{classify_prefix, estimate_exponents, extract_returns, OrbitView};
use betashift::symbolic::{count_admissible, enumerate_admissible, full_window_check, is_admissible};
use betashift::{BetaContext, Error, Word};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_rational::BigRational;
use serde_json::{json, Value};

use output::{Format, Rendered};

#[derive(Parser, Debug)]
#[command(name = "betashift", version, about = "beta-expansions, recurrence exponents and Cantor constructions")]
struct Cli {
    /// Base: decimal (`2.5`), fraction (`5/2`) or a named constant (`golden`, `tribonacci`).
    #[arg(long, global = true, env = "BETASHIFT_BETA", default_value = "2", value_parser = parse_beta)]
    beta: BetaContext,
    /// Working precision in bits.
    #[arg(long, global = true, env = "BETASHIFT_PRECISION", default_value_t = 128,
          value_parser = clap::value_parser!(u64).range(64..))]
    precision: u64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    output: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

fn parse_beta(s: &str) -> Result<BetaContext, String> {
    BetaContext::parse(s).map_err(|e| e.to_string())
}

fn parse_rational(s: &str) -> Result<BigRational, String> {
    parse_decimal(s).map_err(|e| e.to_string())
}

fn parse_word(s: &str) -> Result<Word, String> {
    s.parse::<Word>().map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Greedy digits of a rational point.
    Expand {
        #[arg(long, value_parser = parse_rational)]
        x: BigRational,
        #[arg(long)]
        n: usize,
    },
    /// Prefix of the infinite expansion of 1.
    EpsStar {
        #[arg(long)]
        n: usize,
    },
    /// The truncated base whose expansion of 1 is the length-N prefix.
    ApproxBeta {
        #[arg(long = "N")]
        big_n: usize,
    },
    Admissible {
        #[arg(value_parser = parse_word)]
        word: Word,
    },
    /// Number of admissible words of length n.
    Count {
        #[arg(long)]
        n: usize,
    },
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        limit: usize,
    },
    /// Full-cylinder window report for length n.
    FullScan {
        #[arg(long)]
        n: usize,
    },
    /// Recurrence exponent estimates and the distance series.
    Exponents {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long = "N", alias = "n-max")]
        n_max: usize,
    },
    /// Return profile with the prefix form of every entry.
    Returns {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        monotone: bool,
    },
    Cantor {
        #[command(subcommand)]
        cmd: CantorCmd,
    },
    Dim {
        #[command(subcommand)]
        cmd: DimCmd,
    },
}

#[derive(Args, Debug)]
#[group(skip)]
#[command(group(clap::ArgGroup::new("point").required(true).args(["x", "stdin_digits"])))]
struct PointArgs {
    /// Rational point in [0, 1).
    #[arg(long, value_parser = parse_rational)]
    x: Option<BigRational>,
    /// Read comma-separated digits from standard input.
    #[arg(long)]
    stdin_digits: bool,
    /// Most digits generated for a rational point.
    #[arg(long, default_value_t = 1 << 16)]
    budget: usize,
}

#[derive(Args, Debug, Clone)]
struct PlanArgs {
    #[arg(long)]
    rhat: f64,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Number of construction levels.
    #[arg(long, default_value_t = 6)]
    levels: usize,
}

#[derive(Subcommand, Debug)]
enum CantorCmd {
    Plan {
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Digits of one point of the construction.
    Sample {
        #[command(flatten)]
        plan: PlanArgs,
        /// Digit depth (default: the end of the third level).
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Exact level counts.
    Counts {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Exact measure of the cylinder of a prefix.
    Measure {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, value_parser = parse_word)]
        prefix: Word,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PointSource {
    Uniform,
    Cantor,
}

#[derive(Subcommand, Debug)]
enum DimCmd {
    /// Dimension of the set with prescribed exponents (both) and of the uniform level set.
    Formula {
        #[arg(long)]
        rhat: f64,
        #[arg(long)]
        r: f64,
    },
    Uniform {
        #[arg(long)]
        rhat: f64,
    },
    /// Exact series and measure ratios of a construction plan.
    Series {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        k: Option<usize>,
    },
    Boxcount {
        #[arg(long, value_enum, default_value_t = PointSource::Uniform)]
        source: PointSource,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 200)]
        resamples: usize,
        #[arg(long)]
        rhat: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
    },
}

fn point_view(ctx: &BetaContext, p: &PointArgs) -> betashift::Result<OrbitView> {
    if let Some(x) = &p.x {
        return Ok(OrbitView::from_rational(ctx, x)?.with_budget(p.budget));
    }
    let mut s = String::new();
    std::io::stdin()
        .read_to_string(&mut s)
        .map_err(|e| Error::InvalidParameter(format!("stdin: {e}")))?;
    let w: Word = s.trim().parse()?;
    if !is_admissible(&w, ctx)? {
        return Err(Error::Inadmissible);
    }
    Ok(OrbitView::from_digits(ctx, w.into_vec()))
}

fn make_plan(ctx: &BetaContext, a: &PlanArgs) -> betashift::Result<CantorPlan> {
    CantorPlan::new(ctx, a.rhat, a.r, a.delta, a.levels)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn run(cli: &Cli) -> betashift::Result<Rendered> {
    let ctx = cli.beta.clone().with_precision(cli.precision);
    let beta = ctx.label().to_string();
    let out = match &cli.cmd {
        Cmd::Expand { x, n } => {
            let w = expand_rational(x, &ctx, *n)?;
            Rendered::json(json!({ "beta": beta, "x": x.to_string(), "n": n, "digits": w }))
        }
        Cmd::EpsStar { n } => {
            let w = ctx.eps_star(*n)?;
            let pattern = ctx.eps_pattern().map(|p| json!({ "prefix": Word(p.prefix), "cycle": Word(p.cycle) }));
            Rendered::json(json!({ "beta": beta, "n": n, "digits": w, "pattern": pattern }))
        }
        Cmd::ApproxBeta { big_n } => {
            let b = approximate_beta(&ctx, *big_n)?;
            let bounds = b.beta_bounds(cli.precision);
            Rendered::json(json!({
                "beta": beta,
                "N": big_n,
                "value": format!("{:.17}", bounds.center().to_f64()),
                "lower": bounds.lower().to_f64(),
                "upper": bounds.upper().to_f64(),
                "eps_star": b.eps_star(2 * big_n)?,
            }))
        }
        Cmd::Admissible { word } => {
            let ok = is_admissible(word, &ctx)?;
            let state = betashift::symbolic::follower_state(word, &ctx)?;
            Rendered::json(json!({ "beta": beta, "word": word, "admissible": ok, "full": state == Some(0) }))
        }
        Cmd::Count { n } => {
            let c = count_admissible(&ctx, *n)?;
            Rendered::json(json!({ "beta": beta, "n": n, "count": c.to_string() }))
        }
        Cmd::Enumerate { n, limit } => {
            let total = count_admissible(&ctx, *n)?;
            if total > BigUint::from(*limit) {
                return Err(Error::BudgetExceeded(format!("{total} words exceed --limit {limit}")));
            }
            let words: Vec<Word> = enumerate_admissible(&ctx, *n)?.collect();
            let rows = words.iter().map(|w| vec![w.to_string()]).collect();
            Rendered::table(json!({ "beta": beta, "n": n, "words": words }), vec!["word"], rows)
        }
        Cmd::FullScan { n } => {
            let r = full_window_check(&ctx, *n)?;
            Rendered::json(json!({ "beta": beta, "report": to_value(&r) }))
        }
        Cmd::Exponents { point, n_max } => {
            let mut x = point_view(&ctx, point)?;
            let rep = estimate_exponents(&mut x, *n_max)?;
            let rows = rep
                .series
                .iter()
                .enumerate()
                .map(|(i, s)| vec![(i + 1).to_string(), to_value(s).to_string().trim_matches('"').to_string()])
                .collect();
            Rendered::table(json!({ "beta": beta, "report": to_value(&rep) }), vec!["n", "neg_log_distance"], rows)
        }
        Cmd::Returns { point, k, monotone } => {
            let mut x = point_view(&ctx, point)?;
            let prof = extract_returns(&mut x, *k, *monotone)?;
            let mut forms = Vec::new();
            for i in 1..=prof.entries.len() {
                forms.push(match classify_prefix(&mut x, i, &prof) {
                    Ok(f) => to_value(&f),
                    Err(Error::FormViolation { .. }) => json!("FormViolation"),
                    Err(e) => return Err(e),
                });
            }
            Rendered::json(json!({ "beta": beta, "profile": to_value(&prof), "forms": forms }))
        }
        Cmd::Cantor { cmd } => match cmd {
            CantorCmd::Plan { plan } => Rendered::json(to_value(&make_plan(&ctx, plan)?)),
            CantorCmd::Sample { plan, depth } => {
                let p = make_plan(&ctx, plan)?;
                let depth = depth.unwrap_or(p.m_seq[p.levels().min(3) - 1] as usize);
                let digits = Word(sample_digits(&p, cli.seed, depth)?);
                Rendered::json(json!({ "beta": beta, "seed": cli.seed.to_string(), "depth": depth, "digits": digits }))
            }
            CantorCmd::Counts { plan, k } => {
                let p = make_plan(&ctx, plan)?;
                let levels = build_levels(&p, k.unwrap_or(p.levels()), LevelMode::CountsOnly)?;
                Rendered::json(json!({ "beta": beta, "block_count": p.blocks().count().to_string(), "levels": to_value(&levels) }))
            }
            CantorCmd::Measure { plan, prefix } => {
                let p = make_plan(&ctx, plan)?;
                let mu = measure(&p, prefix)?;
                let zero = mu.numer().magnitude().bits() == 0;
                let log2 = cantor::log2_big(mu.numer().magnitude()) - cantor::log2_big(mu.denom().magnitude());
                Rendered::json(json!({
                    "beta": beta,
                    "prefix": prefix,
                    "measure": mu.to_string(),
                    "log2_measure": if zero { Value::Null } else { json!(log2) },
                }))
            }
        },
        Cmd::Dim { cmd } => match cmd {
            DimCmd::Formula { rhat, r } => {
                let d = if r.is_infinite() { dim_r(*rhat, f64::INFINITY)? } else { dim_r(*rhat, *r)? };
                Rendered::json(json!({ "r_hat": rhat, "r": if r.is_finite() { json!(r) } else { json!("inf") }, "dimension": d.value, "countable": d.countable }))
            }
            DimCmd::Uniform { rhat } => {
                let d = dim_uniform(*rhat)?;
                let star = if *rhat > 0.0 && *rhat <= 1.0 { Some(to_value(&dimension::maximizer(*rhat)?)) } else { None };
                Rendered::json(json!({ "r_hat": rhat, "dimension": d.value, "countable": d.countable, "maximizer": star }))
            }
            DimCmd::Series { plan, k } => {
                let p = make_plan(&ctx, plan)?;
                let rep = local_dimension_series(&p, k.unwrap_or(p.levels()))?;
                Rendered::json(json!({ "beta": beta, "N": p.big_n, "M": p.big_m, "report": to_value(&rep) }))
            }
            DimCmd::Boxcount { source, points, n_min, n_max, resamples, rhat, r, delta } => {
                let mut views = Vec::with_capacity(*points);
                match source {
                    PointSource::Uniform => {
                        use rand::{Rng, SeedableRng};
                        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cli.seed);
                        let den: num_bigint::BigInt = num_bigint::BigInt::from(1u8) << 64;
                        for _ in 0..*points {
                            let x = BigRational::new(rng.gen::<u64>().into(), den.clone());
                            views.push(OrbitView::from_rational(&ctx, &x)?);
                        }
                    }
                    PointSource::Cantor => {
                        let (Some(rhat), Some(r)) = (rhat, r) else {
                            return Err(Error::InvalidParameter("--source cantor needs --rhat and --r".into()));
                        };
                        let p = make_plan(&ctx, &PlanArgs { rhat: *rhat, r: *r, delta: *delta, levels: 4 })?;
                        for i in 0..*points {
                            let depth = (*n_max).min(*p.m_seq.last().unwrap() as usize);
                            views.push(OrbitView::from_digits(&ctx, sample_digits(&p, cli.seed + i as u64, depth)?));
                        }
                    }
                }
                let b = boxcount(&mut views, &ctx, *n_min..=*n_max, *resamples, cli.seed)?;
                let csv = boxcount_csv(&b);
                let rows = b.pairs.iter().map(|(n, y)| vec![n.to_string(), y.to_string()]).collect();
                let mut out = Rendered::table(json!({ "beta": beta, "boxcount": to_value(&b) }), vec!["n", "ln_count"], rows);
                out.csv_override = Some(csv);
                out
            }
        },
    };
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(r) => {
            // A closed pipe (e.g. `| head`) is not an error.
            let _ = writeln!(std::io::stdout().lock(), "{}", r.render(cli.output));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let err = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{}", serde_json::to_string_pretty(&err).unwrap());
            ExitCode::from(1)
        }
    }
}
