//! `jjcert`: build, certify and sweep the junction-in-cavity model from the
//! command line. Models travel between commands as JSON.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use jjcert::josephson::build_model;
use jjcert::linalg::CVector;
use jjcert::moment::{default_time_scales, estimate_decay, integrate_mean, slow_mode};
use jjcert::report::{
    bode_csv, bode_to_csv, find_threshold, kappa1_sensitivity, log_grid, norm_spread, sensitivity_to_csv, sweep_kappa2,
    sweep_to_csv,
};
use jjcert::sector::{cosine_instance, verify_second, verify_sector, GridSpec, SectorReport};
use jjcert::stability::{build_f, certify, spectral_abscissa, Tolerances};
use jjcert::{Error, PhysicalParams, SystemModel};

#[derive(Parser, Debug)]
#[command(
    name = "jjcert",
    version,
    about = "Robust stability certificates for a Josephson junction in a cavity"
)]
struct Cli {
    /// SystemModel JSON to read instead of building one from parameters.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// No summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct ParamArgs {
    /// PhysicalParams JSON; individual flags override its fields.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long = "U")]
    u: Option<f64>,
    #[arg(long = "Jp")]
    jp: Option<f64>,
    #[arg(long)]
    kappa1: Option<f64>,
    #[arg(long)]
    kappa2: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long)]
    nbar: Option<f64>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<PhysicalParams> {
        let mut p = match &self.params {
            Some(path) => serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))?,
            None => PhysicalParams::default(),
        };
        let overrides = [
            (&mut p.omega, self.omega),
            (&mut p.g, self.g),
            (&mut p.charging_energy, self.u),
            (&mut p.josephson_rate, self.jp),
            (&mut p.kappa1, self.kappa1),
            (&mut p.kappa2, self.kappa2),
            (&mut p.hbar, self.hbar),
            (&mut p.nbar, self.nbar),
        ];
        for (field, value) in overrides {
            if let Some(v) = value {
                *field = v;
            }
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug)]
struct TolArgs {
    /// Certified requires hinf * (1 + margin) < gamma / 2.
    #[arg(long, default_value_t = 0.0)]
    margin: f64,
    #[arg(long, default_value_t = 1e-9)]
    hinf_rel_tol: f64,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            hinf_rel: self.hinf_rel_tol,
            margin: self.margin,
            ..Tolerances::default()
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the SystemModel from physical parameters.
    Build(#[command(flatten)] ParamArgs),
    /// Hurwitz test and H-infinity bound; exit 2 when not certified.
    Certify {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        tols: TolArgs,
    },
    /// Certificate over a log grid of kappa2 values.
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        tols: TolArgs,
        /// lo:hi:n, n log-spaced points.
        #[arg(long, default_value = "1e11:1e13:50")]
        kappa2_grid: String,
    },
    /// Bisect for the smallest certified kappa2.
    Threshold {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        tols: TolArgs,
        #[arg(long, default_value_t = 1e11)]
        lo: f64,
        #[arg(long, default_value_t = 1e13)]
        hi: f64,
        #[arg(long, default_value_t = 1e-3)]
        rel_tol: f64,
    },
    /// Frequency response of the perturbation channel.
    Bode {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 1.0)]
        omega_lo: f64,
        #[arg(long, default_value_t = 1e15)]
        omega_hi: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
    },
    /// H-infinity norm over a log grid of kappa1 at fixed kappa2.
    Sensitivity {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        tols: TolArgs,
        /// lo:hi:n, n log-spaced points.
        #[arg(long, default_value = "1e10:1e12:10")]
        kappa1_grid: String,
    },
    /// Integrate the mean dynamics and fit the decay envelope.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        /// Defaults to ten time constants of the slowest mode.
        #[arg(long)]
        t_end: Option<f64>,
        /// Defaults to 0.05 / max|F|.
        #[arg(long)]
        dt: Option<f64>,
        /// JSON array of [re, im] pairs, or "slow-mode".
        #[arg(long, default_value = "slow-mode")]
        v0: String,
        /// DecayEstimate JSON; defaults to `<out>.decay.json`, or stderr without --out.
        #[arg(long)]
        decay_out: Option<PathBuf>,
    },
    /// Grid check of the cosine sector bounds.
    VerifySector {
        #[arg(long = "Jp", default_value_t = PhysicalParams::default().josephson_rate)]
        jp: f64,
        /// Defaults to 1 / (2 Jp).
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        delta1: f64,
        /// Defaults to Jp^2.
        #[arg(long)]
        delta2: Option<f64>,
        #[arg(long, default_value_t = 20.0)]
        range: f64,
        #[arg(long, default_value_t = 801)]
        points: usize,
    },
}

/// Result of a command: what to write, and whether the verdict was negative.
struct Outcome {
    body: String,
    negative: bool,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Self { body, negative: false }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        bail!("grid must be lo:hi:n, got {spec:?}");
    };
    let lo: f64 = lo.parse().with_context(|| format!("bad grid start {lo:?}"))?;
    let hi: f64 = hi.parse().with_context(|| format!("bad grid end {hi:?}"))?;
    let n: usize = n.parse().with_context(|| format!("bad grid count {n:?}"))?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
        bail!("grid needs 0 < lo <= hi and n >= 1, got {spec:?}");
    }
    Ok(log_grid(lo, hi, n))
}

fn parse_v0(spec: &str, dim: usize) -> Result<Option<CVector>> {
    if spec == "slow-mode" {
        return Ok(None);
    }
    let pairs: Vec<[f64; 2]> =
        serde_json::from_str(spec).context("--v0 must be \"slow-mode\" or a JSON array of [re, im]")?;
    if pairs.len() != dim {
        bail!("--v0 has {} components, the model has {dim}", pairs.len());
    }
    Ok(Some(CVector::from_iterator(
        dim,
        pairs.iter().map(|&[re, im]| Complex64::new(re, im)),
    )))
}

fn table_format(format: Option<Format>) -> Format {
    format.unwrap_or(Format::Csv)
}

fn json_only(format: Option<Format>, what: &str) -> Result<()> {
    if format == Some(Format::Csv) {
        bail!("{what} output is JSON only");
    }
    Ok(())
}

fn load_model(cli: &Cli, params: &ParamArgs) -> Result<SystemModel> {
    match &cli.model {
        Some(path) => SystemModel::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display())),
        None => Ok(build_model(&params.resolve()?)?),
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let say = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::Build(params) => {
            json_only(cli.format, "build")?;
            let model = build_model(&params.resolve()?)?;
            Ok(Outcome::ok(model.to_json() + "\n"))
        }
        Command::Certify { params, tols } => {
            json_only(cli.format, "certify")?;
            let cert = certify(&load_model(cli, params)?, &tols.tolerances())?;
            say(match cert.hinf_norm {
                Some(h) => format!(
                    "||G||inf = {h:e}, gamma/2 = {:e}, certified = {}",
                    cert.gamma_half, cert.certified
                ),
                None => format!(
                    "F is not Hurwitz (abscissa {:e}), not certified",
                    cert.spectral_abscissa
                ),
            });
            Ok(Outcome {
                body: json(&cert)?,
                negative: !cert.certified,
            })
        }
        Command::Sweep {
            params,
            tols,
            kappa2_grid,
        } => {
            let rows = sweep_kappa2(&params.resolve()?, &parse_grid(kappa2_grid)?, &tols.tolerances());
            say(format!(
                "{} of {} points certified",
                rows.iter().filter(|r| r.certified).count(),
                rows.len()
            ));
            Ok(Outcome::ok(match table_format(cli.format) {
                Format::Csv => sweep_to_csv(&rows),
                Format::Json => json(&rows)?,
            }))
        }
        Command::Threshold {
            params,
            tols,
            lo,
            hi,
            rel_tol,
        } => {
            json_only(cli.format, "threshold")?;
            match find_threshold(&params.resolve()?, *lo, *hi, *rel_tol, &tols.tolerances()) {
                Ok(t) => {
                    say(format!(
                        "kappa2* = {:e} after {} evaluations",
                        t.kappa2_star, t.evaluations
                    ));
                    Ok(Outcome::ok(json(&t)?))
                }
                Err(Error::ThresholdBracket(msg)) => {
                    say(format!("no threshold in bracket: {msg}"));
                    Ok(Outcome {
                        body: json(&serde_json::json!({ "error": msg }))?,
                        negative: true,
                    })
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Bode {
            params,
            omega_lo,
            omega_hi,
            points,
        } => {
            let rows = bode_csv(&load_model(cli, params)?, *omega_lo, *omega_hi, *points)?;
            let peak = rows
                .iter()
                .map(|r| r.magnitude)
                .filter(|m| m.is_finite())
                .fold(0.0, f64::max);
            say(format!("{} rows, peak magnitude {peak:e}", rows.len()));
            Ok(Outcome::ok(match table_format(cli.format) {
                Format::Csv => bode_to_csv(&rows),
                Format::Json => json(&rows)?,
            }))
        }
        Command::Sensitivity {
            params,
            tols,
            kappa1_grid,
        } => {
            let p = params.resolve()?;
            let rows = kappa1_sensitivity(&p, &parse_grid(kappa1_grid)?, p.kappa2, &tols.tolerances());
            if let Some(spread) = norm_spread(&rows) {
                say(format!("max/min norm over kappa1 = {spread}"));
            }
            Ok(Outcome::ok(match table_format(cli.format) {
                Format::Csv => sensitivity_to_csv(&rows),
                Format::Json => json(&rows)?,
            }))
        }
        Command::Simulate {
            params,
            t_end,
            dt,
            v0,
            decay_out,
        } => {
            if cli.format == Some(Format::Json) {
                bail!("simulate output is CSV only");
            }
            let model = load_model(cli, params)?;
            let f = build_f(&model)?;
            let (default_dt, default_t_end) = default_time_scales(&f, spectral_abscissa(&f)?);
            let v0 = match parse_v0(v0, f.nrows())? {
                Some(v) => v,
                None => slow_mode(&f)?.1,
            };
            let traj = integrate_mean(&f, &v0, t_end.unwrap_or(default_t_end), dt.unwrap_or(default_dt))?;
            let estimate = estimate_decay(&traj)?;

            let mut body = String::from("t");
            for k in 0..f.nrows() {
                body += &format!(",re{k},im{k}");
            }
            body += ",norm_sq\n";
            for (t, v) in traj.times.iter().zip(&traj.states) {
                body += &format!("{t:e}");
                for z in v.iter() {
                    body += &format!(",{:e},{:e}", z.re, z.im);
                }
                body += &format!(",{:e}\n", v.norm_squared());
            }

            let footer = json(&estimate)?;
            let footer_path = decay_out.clone().or_else(|| {
                cli.out.as_ref().map(|o| {
                    let mut name = o.as_os_str().to_owned();
                    name.push(".decay.json");
                    PathBuf::from(name)
                })
            });
            match footer_path {
                Some(path) => fs::write(&path, footer).with_context(|| format!("writing {}", path.display()))?,
                None if !cli.quiet => eprint!("{footer}"),
                None => {}
            }
            say(format!(
                "c2 = {:e}, c1 = {:e} over {} samples",
                estimate.c2, estimate.c1, estimate.samples_used
            ));
            Ok(Outcome::ok(body))
        }
        Command::VerifySector {
            jp,
            gamma,
            delta1,
            delta2,
            range,
            points,
        } => {
            json_only(cli.format, "verify-sector")?;
            let (fp, fs) = cosine_instance(*jp);
            let grid = GridSpec::symmetric(*range, *points);
            let first = verify_sector(&fp, gamma.unwrap_or(1.0 / (2.0 * jp)), *delta1, &grid)?;
            let second = verify_second(&fs, delta2.unwrap_or(jp * jp), &grid)?;
            #[derive(Serialize)]
            struct Both {
                first: SectorReport,
                second: SectorReport,
                passed: bool,
            }
            let passed = first.passed && second.passed;
            say(format!(
                "first-derivative margin {:e}, second-derivative margin {:e}",
                first.worst_margin, second.worst_margin
            ));
            Ok(Outcome::ok(json(&Both { first, second, passed })?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(&cli).and_then(|o| {
        match &cli.out {
            Some(path) => fs::write(path, &o.body).with_context(|| format!("writing {}", path.display()))?,
            None => std::io::stdout().write_all(o.body.as_bytes())?,
        }
        Ok(o.negative)
    });
    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
