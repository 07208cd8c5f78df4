use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};

use log::{info, warn};
use qbmor_core::bt::balanced_truncation_scaled;
use qbmor_core::diagnostics::{residuals, ResidualReport};
use qbmor_core::gramians::{truncated_h2_error, truncated_h2_norm};
use qbmor_core::io::{load_reduced, load_system, save_reduced, save_system, Kind};
use qbmor_core::irka::{tqb_irka, InitKind, IrkaConfig};
use qbmor_core::models::{chafee_infante, fitzhugh_nagumo};
use qbmor_core::signals::InputSignal;
use qbmor_core::simulate::{output_errors, simulate, write_csv, SimOptions};
use qbmor_core::sweep::error_sweep;
use qbmor_core::{rescale, QBSystem, ReducedModel};
use serde::Serialize;

use crate::{CliError, GenerateArgs, Init, IrkaFlags, Method, Model, ReduceArgs, ReportArgs, Status, SweepArgs, What};

type Result<T> = std::result::Result<T, CliError>;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn to_toml<T: Serialize>(v: &T) -> Result<String> {
    toml::to_string(v).map_err(|e| CliError::Usage(e.to_string()))
}

fn meta(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

#[derive(Serialize)]
struct GenerateSummary<'a> {
    model: &'a str,
    k: usize,
    n: usize,
    m: usize,
    p: usize,
    out: String,
}

pub fn generate(args: &GenerateArgs) -> Result<Status> {
    let (name, sys) = match args.model {
        Model::Chafee => ("chafee", chafee_infante(args.k)?),
        Model::Fhn => ("fhn", fitzhugh_nagumo(args.k)?),
    };
    save_system(&args.out, &sys, Kind::Full, meta(&[("model", name.into()), ("k", args.k.to_string())]))?;
    let summary = GenerateSummary { model: name, k: args.k, n: sys.n(), m: sys.m(), p: sys.p(), out: args.out.display().to_string() };
    emit(&to_toml(&summary)?)?;
    Ok(Status::Done)
}

fn irka_config(r: usize, f: &IrkaFlags, init: Init) -> IrkaConfig {
    let mut cfg = IrkaConfig::new(r);
    cfg.tol = f.tol;
    cfg.maxit = f.maxit;
    cfg.gamma = f.gamma;
    cfg.seed = f.seed;
    cfg.shift = f.shift;
    cfg.reflect_unstable = !f.no_reflect;
    cfg.init = match init {
        Init::Random => InitKind::Random(f.seed),
        Init::Linear => InitKind::LinearIrka(f.seed),
    };
    cfg
}

#[derive(Serialize)]
struct IrkaSummary {
    method: &'static str,
    r: usize,
    seed: u64,
    init: &'static str,
    gamma: f64,
    tol: f64,
    maxit: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    shift: Option<f64>,
    reflect_unstable: bool,
    converged: bool,
    iterations: usize,
    hurwitz: bool,
    eig_change_history: Vec<f64>,
    /// `[re, im]` pairs.
    final_eigs: Vec<[f64; 2]>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct BtSummary {
    method: &'static str,
    r: usize,
    gamma: f64,
    hurwitz: bool,
    hsv: Vec<f64>,
}

fn base_meta(method: &str, r: usize, f: &IrkaFlags, source: &QBSystem) -> Vec<(&'static str, String)> {
    vec![
        ("method", method.to_string()),
        ("r", r.to_string()),
        ("gamma", f.gamma.to_string()),
        ("seed", f.seed.to_string()),
        ("source", source.label().to_string()),
    ]
}

pub fn reduce(args: &ReduceArgs) -> Result<Status> {
    let (sys, _) = load_system(&args.system)?;
    fs::create_dir_all(&args.out)?;
    match args.method {
        Method::TqbIrka => {
            let cfg = irka_config(args.r, &args.irka, args.init);
            let (red, _, rep) = tqb_irka(&sys, &cfg)?;
            info!("TQB-IRKA wall time {:?}", rep.wall_time);
            for w in &rep.warnings {
                warn!("{w}");
            }
            let mut m = base_meta("tqb-irka", args.r, &args.irka, &sys);
            m.push(("converged", rep.converged.to_string()));
            m.push(("iterations", rep.iterations.to_string()));
            save_reduced(&args.out, &red, meta(&m))?;
            let summary = IrkaSummary {
                method: "tqb-irka",
                r: args.r,
                seed: args.irka.seed,
                init: match args.init {
                    Init::Random => "random",
                    Init::Linear => "linear",
                },
                gamma: cfg.gamma,
                tol: cfg.tol,
                maxit: cfg.maxit,
                shift: cfg.shift,
                reflect_unstable: cfg.reflect_unstable,
                converged: rep.converged,
                iterations: rep.iterations,
                hurwitz: red.is_hurwitz(),
                eig_change_history: rep.eig_change_history.clone(),
                final_eigs: rep.final_eigs.iter().map(|z| [z.re, z.im]).collect(),
                warnings: rep.warnings.clone(),
            };
            let text = to_toml(&summary)?;
            fs::write(args.out.join("report.toml"), &text)?;
            emit(&text)?;
            Ok(if rep.converged { Status::Done } else { Status::NotConverged })
        }
        Method::Bt => {
            let (red, hsv) = balanced_truncation_scaled(&sys, args.r, args.irka.gamma)?;
            save_reduced(&args.out, &red, meta(&base_meta("bt", args.r, &args.irka, &sys)))?;
            let mut w = csv::Writer::from_path(args.out.join("hsv.csv"))?;
            w.write_record(["index", "hsv"])?;
            for (i, s) in hsv.iter().enumerate() {
                w.write_record([(i + 1).to_string(), fmt(*s)])?;
            }
            w.flush()?;
            let summary = BtSummary { method: "bt", r: args.r, gamma: args.irka.gamma, hurwitz: red.is_hurwitz(), hsv };
            let text = to_toml(&summary)?;
            fs::write(args.out.join("report.toml"), &text)?;
            emit(&text)?;
            Ok(Status::Done)
        }
    }
}

fn load_pair(args: &ReportArgs) -> Result<(QBSystem, ReducedModel, BTreeMap<String, String>)> {
    let (sys, _) = load_system(&args.system)?;
    let (red, mf) = load_reduced(&args.reduced)?;
    if red.system().m() != sys.m() || red.system().p() != sys.p() {
        return Err(CliError::Usage(format!(
            "reduced model has m={} p={}, system has m={} p={}",
            red.system().m(),
            red.system().p(),
            sys.m(),
            sys.p()
        )));
    }
    Ok((sys, red, mf.meta))
}

fn write_residuals(unscaled: &ResidualReport, scaled: &ResidualReport, gamma: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["measure", "unscaled", "scaled", "gamma"])?;
    for ((name, u), (_, s)) in unscaled.measures().iter().zip(scaled.measures().iter()) {
        w.write_record([name.to_string(), fmt(*u), fmt(*s), fmt(gamma)])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    emit(&String::from_utf8_lossy(&bytes))
}

pub fn report(args: &ReportArgs) -> Result<Status> {
    let (sys, red, stored) = load_pair(args)?;
    match args.what {
        What::Residuals => {
            let gamma = match args.gamma {
                Some(g) => g,
                None => match stored.get("gamma") {
                    Some(g) => g.parse().map_err(|_| CliError::Usage(format!("stored gamma `{g}` is not a number")))?,
                    None => 1.0,
                },
            };
            let scaled_sys = rescale(&sys, gamma)?;
            let scaled_red = red.rescaled(gamma)?;
            let (u, s) = rayon::join(|| residuals(&sys, &red), || residuals(&scaled_sys, &scaled_red));
            let (u, s) = (u?, s?);
            for d in u.degraded.iter().chain(&s.degraded) {
                warn!("{d}");
            }
            write_residuals(&u, &s, gamma)?;
        }
        What::H2err => {
            let (err, full) = rayon::join(|| truncated_h2_error(&sys, &red), || truncated_h2_norm(&sys));
            let (err, full) = (err?.value, full?.value);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["error", "relative", "full_norm"])?;
            w.write_record([fmt(err), fmt(err / full), fmt(full)])?;
            let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
            emit(&String::from_utf8_lossy(&bytes))?;
        }
        What::Simulate => {
            let name = args.input.as_deref().ok_or_else(|| CliError::Usage("simulate needs --input".into()))?;
            let u = InputSignal::parse(name)?;
            if u.m() != sys.m() {
                return Err(CliError::Usage(format!("input `{name}` has {} channels, system has {}", u.m(), sys.m())));
            }
            let opts = SimOptions::default();
            let (y, yr) = rayon::join(
                || simulate(&sys, &u, args.t_end, args.samples, &opts),
                || simulate(&red, &u, args.t_end, args.samples, &opts),
            );
            let (y, yr) = (y?, yr?);
            let (mean, max) = output_errors(&y, &yr)?;
            match &args.out {
                Some(p) => write_csv(io::BufWriter::new(fs::File::create(p)?), &[("full", &y), ("reduced", &yr)])?,
                None => write_csv(io::stdout().lock(), &[("full", &y), ("reduced", &yr)])?,
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["input", "T", "mean_rel", "max_rel"])?;
            w.write_record([name.to_string(), fmt(args.t_end), fmt(mean), fmt(max)])?;
            let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
            if args.out.is_some() {
                emit(&String::from_utf8_lossy(&bytes))?;
            } else {
                eprint!("{}", String::from_utf8_lossy(&bytes));
            }
        }
    }
    Ok(Status::Done)
}

pub fn sweep(args: &SweepArgs) -> Result<Status> {
    if args.r_min == 0 || args.r_min > args.r_max {
        return Err(CliError::Usage(format!("empty order range {}..={}", args.r_min, args.r_max)));
    }
    let (sys, _) = load_system(&args.system)?;
    let cfg = irka_config(args.r_min, &args.irka, Init::Random);
    let orders: Vec<usize> = (args.r_min..=args.r_max).collect();
    let pts = error_sweep(&sys, &orders, &cfg, args.irka.seed, args.starts)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["r", "error", "iterations", "converged", "seed"])?;
    for p in &pts {
        w.write_record([p.r.to_string(), fmt(p.error), p.iterations.to_string(), p.converged.to_string(), p.seed.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    match &args.out {
        Some(path) => fs::write(path, &bytes)?,
        None => emit(&String::from_utf8_lossy(&bytes))?,
    }
    Ok(if pts.iter().all(|p| p.converged) { Status::Done } else { Status::NotConverged })
}
