//! Subcommand dispatch: `price`, `surface`, `loading`, `verify`.
//!
//! Exit codes: 0 on success, 1 when the verification report contains a
//! z-score breach, 2 on configuration errors (including unreadable or
//! unwritable paths).

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::model::{ClaimModel, Payoff};
use crate::output::{fmt_sci, write_verify_csv, SurfaceTable};
use crate::pricing::{
    self, kappa, PolicySurface, PriceQuery,
};
use crate::simulate::{self, SimConfig, VerifyRow};
use crate::solver::{integrate_backward, SolverConfig, SurfaceKind, ValueSurface};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "catindex", version, about = "Indifference pricing for index-linked catastrophe derivatives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override: index level (currency).
    #[arg(long)]
    pub c: Option<f64>,
    /// Override: valuation time (years).
    #[arg(long)]
    pub t: Option<f64>,
    /// Override: derivative quantity.
    #[arg(long)]
    pub k: Option<f64>,
    /// Override: CSV destination (stdout when unset everywhere).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override: SVG plot destination.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Override: Monte-Carlo path count.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Override: Monte-Carlo seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SurfaceCsvKind {
    /// Buyer's indifference price p_b(c, t, k).
    Price,
    /// Optimal risk loading theta*(c, t).
    Loading,
    /// p_b(c, t, 1) - pi_0(c, t).
    Gap,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print every configured price at one query point.
    Price(CommonArgs),
    /// Emit a surface as CSV (and optionally SVG).
    Surface {
        #[arg(long, value_enum, default_value_t = SurfaceCsvKind::Price)]
        kind: SurfaceCsvKind,
        #[command(flatten)]
        args: CommonArgs,
    },
    /// Shorthand for `surface --kind loading`.
    Loading(CommonArgs),
    /// Cross-check the solver against Monte-Carlo simulation.
    Verify(CommonArgs),
}

/// Run a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Price(args) => cmd_price(&args),
        Command::Surface { kind, args } => cmd_surface(kind, &args),
        Command::Loading(args) => cmd_surface(SurfaceCsvKind::Loading, &args),
        Command::Verify(args) => return run_verify(&args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG_ERROR
        }
    }
}

struct Context {
    config: RunConfig,
    model: ClaimModel,
    curve: crate::demand::DemandCurve,
    payoff: Payoff,
    solver: SolverConfig,
    sim: SimConfig,
}

impl Context {
    fn load(args: &CommonArgs) -> Result<Self> {
        let config = RunConfig::from_path(&args.config)?;
        let model = config.build_model()?;
        let curve = config.build_curve()?;
        let payoff = config.build_payoff()?;
        let solver = config.solver_config()?;
        let mut sim = config.sim_config()?;
        if let Some(p) = args.paths {
            sim = SimConfig::new(p, sim.seed, sim.chunk_size)
                .map_err(|e| Error::Config(format!("sim: {e}")))?;
        }
        if let Some(s) = args.seed {
            sim.seed = s;
        }
        Ok(Self { config, model, curve, payoff, solver, sim })
    }

    /// Query points: CLI overrides replace the configured grid.
    fn queries(&self, args: &CommonArgs) -> Vec<PriceQuery> {
        if args.c.is_some() || args.t.is_some() || args.k.is_some()
            || self.config.output.queries.is_empty()
        {
            vec![PriceQuery {
                c: args.c.unwrap_or(0.0),
                t: args.t.unwrap_or(0.0),
                k: args.k.unwrap_or(1.0),
            }]
        } else {
            self.config
                .output
                .queries
                .iter()
                .map(|&(c, t, k)| PriceQuery { c, t, k })
                .collect()
        }
    }

    fn solve(&self, kind: SurfaceKind, k: f64) -> Result<ValueSurface> {
        integrate_backward(kind, k, &self.model, &self.curve, &self.payoff, &self.solver)
    }
}

fn open_sink(args: &CommonArgs, configured: &Option<String>) -> Result<Box<dyn Write>> {
    let path = args.out.clone().or_else(|| configured.as_ref().map(PathBuf::from));
    match path {
        Some(p) => Ok(Box::new(
            File::create(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        )),
        None => Ok(Box::new(std::io::stdout())),
    }
}

fn cmd_price(args: &CommonArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let kappa = kappa(&ctx.model, &ctx.curve)?;
    let pi0 = ctx.solve(SurfaceKind::RiskNeutral, 0.0)?;
    let denominations: Vec<u64> =
        ctx.config.output.denominations.iter().map(|&n| n as u64).collect();
    let g_denoms: Vec<ValueSurface> = denominations
        .iter()
        .map(|&n| ctx.solve(SurfaceKind::SellerTransform, 1.0 / n as f64))
        .collect::<Result<_>>()?;

    for query in ctx.queries(args) {
        let w_k = ctx.solve(SurfaceKind::Wealth, query.k)?;
        let w_neg = if query.k == 0.0 { w_k.clone() } else { ctx.solve(SurfaceKind::Wealth, -query.k)? };
        let g_k = ctx.solve(SurfaceKind::SellerTransform, query.k)?;

        println!(
            "query: c = {}, t = {}, k = {}",
            fmt_sci(query.c),
            fmt_sci(query.t),
            fmt_sci(query.k)
        );
        println!("  p_b        = {}", fmt_sci(pricing::indifference_buy_price(&query, &w_k)?));
        println!("  p_s        = {}", fmt_sci(pricing::indifference_sell_price(&query, &w_neg)?));
        println!(
            "  pi_s       = {}",
            fmt_sci(pricing::certainty_equivalence_seller(&query, &g_k, &ctx.model)?)
        );
        let limits = pricing::denomination_limit(&query, &denominations, &g_denoms, &ctx.model)?;
        for (n, v) in denominations.iter().zip(&limits) {
            println!("  N*pi_s(1/N) [N={n}] = {}", fmt_sci(*v));
        }
        println!("  pi_0       = {}", fmt_sci(pricing::risk_neutral_price(&query, &pi0)?));
        println!(
            "  theta_star = {}",
            fmt_sci(pricing::optimal_loading(&query, &w_k, &ctx.model, &ctx.curve)?)
        );
        println!("  kappa      = {}", fmt_sci(kappa));
    }
    Ok(())
}

fn cmd_surface(kind: SurfaceCsvKind, args: &CommonArgs) -> Result<()> {
    let ctx = Context::load(args)?;
    let k = args.k.unwrap_or(1.0);
    let kappa = kappa(&ctx.model, &ctx.curve)?;

    let table = match kind {
        SurfaceCsvKind::Price => {
            let w = ctx.solve(SurfaceKind::Wealth, k)?;
            let values = w
                .slices()
                .iter()
                .zip(w.times())
                .map(|(slice, &t)| {
                    slice.iter().map(|&v| v - kappa * (ctx.model.horizon - t)).collect()
                })
                .collect();
            SurfaceTable { times: w.times().to_vec(), delta: w.lattice.delta, values }
        }
        SurfaceCsvKind::Loading => {
            let w = ctx.solve(SurfaceKind::Wealth, k)?;
            let policy = PolicySurface::from_wealth_surface(&w, &ctx.model, &ctx.curve)?;
            SurfaceTable { times: policy.times.clone(), delta: policy.delta, values: policy.values }
        }
        SurfaceCsvKind::Gap => {
            let w = ctx.solve(SurfaceKind::Wealth, 1.0)?;
            let pi0 = ctx.solve(SurfaceKind::RiskNeutral, 0.0)?;
            let values = w
                .slices()
                .iter()
                .zip(pi0.slices())
                .zip(w.times())
                .map(|((ws, ps), &t)| {
                    ws.iter()
                        .zip(ps)
                        .map(|(&wv, &pv)| wv - kappa * (ctx.model.horizon - t) - pv)
                        .collect()
                })
                .collect();
            SurfaceTable { times: w.times().to_vec(), delta: w.lattice.delta, values }
        }
    };

    let mut sink = open_sink(args, &ctx.config.output.csv)?;
    table.write_csv(&mut sink)?;

    let svg_path = args.svg.clone().or_else(|| ctx.config.output.svg.as_ref().map(PathBuf::from));
    if let Some(p) = svg_path {
        let mut f =
            File::create(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        table.write_svg(&mut f)?;
    }
    Ok(())
}

/// Exit code implied by a verification report: 0 iff every |z| <= 3.
pub fn verify_exit_code(rows: &[VerifyRow]) -> i32 {
    let mut code = EXIT_OK;
    for r in rows.iter().filter(|r| r.z_score.abs() > 3.0) {
        eprintln!("verification failed: {} z = {}", r.quantity, fmt_sci(r.z_score));
        code = EXIT_VERIFY_FAILED;
    }
    code
}

fn run_verify(args: &CommonArgs) -> i32 {
    match cmd_verify(args) {
        Ok(rows) => verify_exit_code(&rows),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG_ERROR
        }
    }
}

fn cmd_verify(args: &CommonArgs) -> Result<Vec<VerifyRow>> {
    let ctx = Context::load(args)?;
    let x0 = ctx.config.model.x0;
    let queries = ctx.queries(args);
    let pi0 = ctx.solve(SurfaceKind::RiskNeutral, 0.0)?;

    let mut rows = Vec::new();
    // Always check the derivative-free book first.
    let w0 = ctx.solve(SurfaceKind::Wealth, 0.0)?;
    let c0 = queries.first().map_or(0.0, |q| q.c);
    rows.extend(simulate::verify_value_function(
        &ctx.model, &ctx.curve, &ctx.payoff, 0.0, &w0, c0, x0, &ctx.sim,
    )?);

    for q in &queries {
        if q.k != 0.0 {
            let w = ctx.solve(SurfaceKind::Wealth, q.k)?;
            rows.extend(simulate::verify_value_function(
                &ctx.model, &ctx.curve, &ctx.payoff, q.k, &w, q.c, x0, &ctx.sim,
            )?);
        }
        let est = simulate::mc_risk_neutral(&ctx.model, &ctx.payoff, q.c, q.t, &ctx.sim);
        let analytic = pi0.eval(q.c, q.t)?;
        let z = if est.std_error > 0.0 { (est.mean - analytic) / est.std_error } else { 0.0 };
        rows.push(VerifyRow {
            quantity: format!("risk_neutral_c{:e}_t{}", q.c, q.t),
            estimate: est.mean,
            std_error: est.std_error,
            analytic,
            z_score: z,
        });
    }

    let mut sink = open_sink(args, &ctx.config.output.csv)?;
    write_verify_csv(&rows, &mut sink)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(z: f64) -> VerifyRow {
        VerifyRow {
            quantity: "q".into(),
            estimate: 0.0,
            std_error: 1.0,
            analytic: 0.0,
            z_score: z,
        }
    }

    #[test]
    fn verify_exit_codes() {
        assert_eq!(verify_exit_code(&[]), EXIT_OK);
        assert_eq!(verify_exit_code(&[row(0.0), row(-2.9), row(3.0)]), EXIT_OK);
        assert_eq!(verify_exit_code(&[row(0.0), row(3.1)]), EXIT_VERIFY_FAILED);
        assert_eq!(verify_exit_code(&[row(-4.0)]), EXIT_VERIFY_FAILED);
    }

    #[test]
    fn cli_parses_subcommands_and_overrides() {
        let cli = Cli::try_parse_from([
            "catindex", "surface", "--kind", "gap", "--config", "x.toml", "--c", "1.5e7",
            "--seed", "9",
        ])
        .unwrap();
        match cli.command {
            Command::Surface { kind, args } => {
                assert_eq!(kind, SurfaceCsvKind::Gap);
                assert_eq!(args.c, Some(1.5e7));
                assert_eq!(args.seed, Some(9));
                assert_eq!(args.t, None);
            }
            other => panic!("parsed {other:?}"),
        }
        assert!(Cli::try_parse_from(["catindex", "loading"]).is_err()); // --config required
    }
}
