//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fanlab_core::layers::{decay_report, layer_from_seed, membership, LayerConfig, MembershipOptions};
use fanlab_core::models::{builtin, verify_model, HyperbolicModel, BUILTIN_NAMES};
use fanlab_core::riemann::{
    compare_limits, solve_boundary_riemann, CompareConfig, ComparisonReport, FanSolution, Provider, RiemannConfig,
};
use fanlab_core::selfsim::{continuation_ladder, MeshPolicy, ProfileOptions, RungSummary};
use fanlab_core::wavefan::{
    classify, default_contact_tol, fan_curve, lax_oracle, wave_from_lax, FanConfig, LeadingOrder, WaveFanCurve,
    WavePiece,
};
use fanlab_core::Error;
use nalgebra::DVector;
use serde_json::{json, Value};

use crate::args::{CompareArgs, LayerArgs, ModelArgs, SolveArgs, VerifyArgs, ViscousArgs, WavefanArgs};
use crate::output::{ensure_dir, indexed, num, nums, write_json, Csv};

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or inconsistent inputs.
    Usage(String),
    /// Numerical or I/O failure, reported verbatim.
    Solver(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load_model(args: &ModelArgs) -> std::result::Result<(HyperbolicModel, Value), Failure> {
    let (name, params) = args.resolve().map_err(Failure::Usage)?;
    let model = builtin(&name, &params).map_err(|e| match e {
        Error::InvalidParams(msg) => Failure::Usage(msg),
        other => Failure::Solver(other),
    })?;
    let config = json!({
        "model": name,
        "params": params,
        "center": model.domain().center.as_slice(),
        "radius": model.domain().radius,
        "gap_c": model.gap_c(),
    });
    Ok((model, config))
}

fn check_state(model: &HyperbolicModel, flag: &str, u: &DVector<f64>) -> Outcome {
    if u.len() != model.dim() {
        return Err(Failure::Usage(format!(
            "{flag} has {} entries, model {} needs {}",
            u.len(),
            model.name(),
            model.dim()
        )));
    }
    if !model.domain().contains(u) {
        return Err(Failure::Usage(format!(
            "{flag} = {:?} lies outside the domain box",
            u.as_slice()
        )));
    }
    Ok(())
}

fn provider(text: &str) -> std::result::Result<Provider, Failure> {
    text.parse().map_err(|e: Error| Failure::Usage(e.to_string()))
}

fn state_columns(prefix: &str, n: usize) -> Vec<String> {
    indexed(prefix, n)
}

pub fn models_list() -> Outcome {
    for name in BUILTIN_NAMES {
        let m = builtin(name, &BTreeMap::new())?;
        println!(
            "{name}: n={} k={} gap_c={} conservative={} center={:?} radius={}",
            m.dim(),
            m.k(),
            num(m.gap_c()),
            m.is_conservative(),
            m.domain().center.as_slice(),
            m.domain().radius
        );
    }
    Ok(())
}

pub fn models_verify(args: &VerifyArgs) -> Outcome {
    if args.grid < 2 {
        return Err(Failure::Usage("--grid must be at least 2".into()));
    }
    let (model, _) = load_model(&args.model)?;
    let report = verify_model(&model, args.grid)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(())
}

pub fn layer(args: &LayerArgs) -> Outcome {
    let (model, mut config) = load_model(&args.model)?;
    check_state(&model, "--ubar", &args.ubar)?;
    let layer_cfg = LayerConfig::default();
    let horizon = layer_cfg.horizon(&model);
    let (seed, fit) = match (&args.seed, &args.ub) {
        (Some(s), None) => {
            if s.len() != model.k() {
                return Err(Failure::Usage(format!("--seed needs {} entries", model.k())));
            }
            (s.clone(), None)
        }
        (None, Some(ub)) => {
            check_state(&model, "--ub", ub)?;
            let opts = MembershipOptions {
                horizon: Some(horizon),
                ..MembershipOptions::default()
            };
            let m = membership(&model, &args.ubar, ub, args.tol, &layer_cfg, &opts)?;
            (m.s.clone(), Some(m))
        }
        _ => return Err(Failure::Usage("exactly one of --seed or --ub is required".into())),
    };
    let traj = layer_from_seed(&model, &args.ubar, &seed, horizon, &layer_cfg)?;
    let decay = decay_report(&traj, model.gap_c())?;
    config["command"] = json!("layer");
    config["ubar"] = json!(args.ubar.as_slice());
    config["seed"] = json!(seed.as_slice());
    config["ub"] = json!(args.ub.as_ref().map(|u| u.as_slice().to_vec()));
    config["horizon"] = json!(horizon);
    config["tol"] = json!(args.tol);
    let n = model.dim();
    let mut columns = vec!["zeta".to_string()];
    columns.extend(state_columns("V", n));
    columns.extend(state_columns("W", n));
    let mut csv = Csv::new(&config, &columns);
    for ((z, v), w) in traj.zeta.iter().zip(&traj.v).zip(&traj.w) {
        csv.row(std::iter::once(num(*z)).chain(nums(v.iter())).chain(nums(w.iter())));
    }
    ensure_dir(&args.out.out_dir)?;
    csv.write(&args.out.out_dir.join("layer.csv"))?;
    let summary = json!({
        "config": config,
        "seed": seed.as_slice(),
        "membership_residual": fit.as_ref().map(|m| m.residual),
        "membership_iterations": fit.as_ref().map(|m| m.iterations),
        "boundary_state": traj.v[0].as_slice(),
        "fitted_rate": finite_or_null(decay.fitted_rate),
        "weighted_sup_tail": decay.weighted_sup_tail,
    });
    write_json(&args.out.out_dir.join("layer.json"), &summary)?;
    println!(
        "layer: S = {:?}, fitted rate {}, boundary state {:?}",
        seed.as_slice(),
        decay.fitted_rate,
        traj.v[0].as_slice()
    );
    Ok(())
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn piece_json(p: &WavePiece) -> Value {
    json!({
        "family": p.family,
        "type": p.kind.as_str(),
        "speed_lo": p.speed.0,
        "speed_hi": p.speed.1,
        "left": p.left_state.as_slice(),
        "right": p.right_state.as_slice(),
    })
}

pub fn wavefan(args: &WavefanArgs) -> Outcome {
    let (model, mut config) = load_model(&args.model)?;
    check_state(&model, "--u0", &args.u0)?;
    if args.family == 0 || args.family > model.dim() {
        return Err(Failure::Usage(format!("--family must lie in 1..={}", model.dim())));
    }
    if args.nodes < 3 {
        return Err(Failure::Usage("--nodes must be at least 3".into()));
    }
    let provider = provider(&args.provider)?;
    let fan_cfg = FanConfig {
        nodes: args.nodes,
        tol: args.tol,
        ..FanConfig::default()
    };
    let (curve, pieces): (WaveFanCurve, Vec<WavePiece>) = match provider {
        Provider::EnvelopeEngine => {
            let closure = LeadingOrder::new(&model, args.family)?;
            let curve = fan_curve(&model, &closure, args.family, args.strength, &args.u0, &fan_cfg)?;
            let pieces = classify(&curve, default_contact_tol(&curve));
            (curve, pieces)
        }
        Provider::LaxOracle => {
            let wave = if args.strength == 0.0 {
                None
            } else {
                Some(lax_oracle(&model, args.family, args.strength, &args.u0)?)
            };
            wave_from_lax(&model, args.family, args.strength, &args.u0, wave.as_ref(), args.nodes)?
        }
    };
    config["command"] = json!("wavefan");
    config["u0"] = json!(args.u0.as_slice());
    config["family"] = json!(args.family);
    config["strength"] = json!(args.strength);
    config["provider"] = json!(provider.as_str());
    config["nodes"] = json!(args.nodes);
    config["tol"] = json!(args.tol);
    let mut columns = vec!["tau".to_string()];
    columns.extend(state_columns("V", model.dim()));
    columns.extend(["omega", "xi", "f", "g"].map(String::from));
    let mut csv = Csv::new(&config, &columns);
    for j in 0..curve.len() {
        csv.row(
            std::iter::once(num(curve.tau[j]))
                .chain(nums(curve.v[j].iter()))
                .chain([curve.omega[j], curve.xi[j], curve.f[j], curve.g[j]].iter().map(|x| num(*x))),
        );
    }
    ensure_dir(&args.out.out_dir)?;
    csv.write(&args.out.out_dir.join("curve.csv"))?;
    let summary = json!({
        "config": config,
        "endpoint": curve.endpoint().as_slice(),
        "picard_residuals": curve.residuals,
        "pieces": pieces.iter().map(piece_json).collect::<Vec<_>>(),
    });
    write_json(&args.out.out_dir.join("pieces.json"), &summary)?;
    println!(
        "wavefan: endpoint {:?}, {} piece(s)",
        curve.endpoint().as_slice(),
        pieces.len()
    );
    for p in &pieces {
        println!("  {} speeds [{}, {}]", p.kind.as_str(), num(p.speed.0), num(p.speed.1));
    }
    Ok(())
}

fn default_viscous_xi_max(model: &HyperbolicModel, states: &[&DVector<f64>]) -> std::result::Result<f64, Failure> {
    let mut fastest: f64 = 0.0;
    for u in states {
        fastest = fastest.max(model.spectral(u)?.lambdas.max());
    }
    Ok(1.5 * fastest + 1.0)
}

pub fn viscous(args: &ViscousArgs) -> Outcome {
    let (model, mut config) = load_model(&args.model)?;
    check_state(&model, "--u0", &args.u0)?;
    check_state(&model, "--ub", &args.ub)?;
    let xi_max = match args.xi_max {
        Some(x) if x > 0.0 => x,
        Some(x) => return Err(Failure::Usage(format!("--xi-max must be positive, got {x}"))),
        None => default_viscous_xi_max(&model, &[&args.u0, &args.ub])?,
    };
    let opts = ProfileOptions {
        mesh: MeshPolicy::Adaptive {
            nodes: args.nodes,
            passes: 3,
            max_nodes: 64_001,
        },
        tol: args.tol,
        ..ProfileOptions::default()
    };
    let eps = &args.eps.0;
    let ladder = continuation_ladder(&model, &args.ub, &args.u0, xi_max, eps, &opts)?;
    config["command"] = json!("viscous");
    config["u0"] = json!(args.u0.as_slice());
    config["ub"] = json!(args.ub.as_slice());
    config["eps"] = json!(eps);
    config["xi_max"] = json!(xi_max);
    config["mesh"] = json!(opts.mesh);
    config["tol"] = json!(args.tol);
    ensure_dir(&args.out.out_dir)?;
    let mut rungs = Vec::new();
    for (i, p) in ladder.profiles.iter().enumerate() {
        let mut cfg = config.clone();
        cfg["epsilon"] = json!(p.epsilon);
        let mut columns = vec!["xi".to_string()];
        columns.extend(state_columns("Q", model.dim()));
        let mut csv = Csv::new(&cfg, &columns);
        for (x, q) in p.xi.iter().zip(&p.q) {
            csv.row(std::iter::once(num(*x)).chain(nums(q.iter())));
        }
        let file = format!("profile_{i:03}.csv");
        csv.write(&args.out.out_dir.join(&file))?;
        let mut entry = serde_json::to_value(RungSummary::from(p)).map_err(Error::from)?;
        entry["file"] = json!(file);
        rungs.push(entry);
        println!(
            "eps {} nodes {} residual {} newton {}",
            num(p.epsilon),
            p.len(),
            num(p.residual_norm),
            p.newton_iterations
        );
    }
    let manifest = json!({
        "config": config,
        "rungs": rungs,
        "failure": ladder.failure.as_ref().map(|e| e.to_string()),
    });
    write_json(&args.out.out_dir.join("manifest.json"), &manifest)?;
    match ladder.failure {
        Some(e) => Err(Failure::Solver(e)),
        None => Ok(()),
    }
}

fn riemann_config(args: &SolveArgs) -> std::result::Result<RiemannConfig, Failure> {
    Ok(RiemannConfig {
        provider: provider(&args.provider)?,
        tol: args.tol,
        ..RiemannConfig::default()
    })
}

/// Runs `task` on every scenario with up to `jobs` threads; results keep input order.
fn run_scenarios<T: Send>(
    count: usize,
    jobs: usize,
    task: impl Fn(usize) -> T + Sync,
) -> Vec<T> {
    let jobs = jobs.clamp(1, count.max(1));
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (worker, chunk) in slots.chunks_mut(count.div_ceil(jobs).max(1)).enumerate() {
            let task = &task;
            let start = worker * count.div_ceil(jobs).max(1);
            scope.spawn(move || {
                for (offset, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(task(start + offset));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every scenario ran")).collect()
}

fn scenario_dir(base: &Path, index: usize, count: usize) -> PathBuf {
    if count == 1 {
        base.to_path_buf()
    } else {
        base.join(format!("scenario_{index:03}"))
    }
}

fn fan_csv(fan: &FanSolution, config: &Value, n: usize) -> Csv {
    let mut columns: Vec<String> = ["family", "type", "speed_lo", "speed_hi"].map(String::from).to_vec();
    columns.extend(state_columns("left", n));
    columns.extend(state_columns("right", n));
    let mut csv = Csv::new(config, &columns);
    for p in &fan.pieces {
        csv.row(
            [p.family.to_string(), p.kind.as_str().to_string(), num(p.speed.0), num(p.speed.1)]
                .into_iter()
                .chain(nums(p.left_state.iter()))
                .chain(nums(p.right_state.iter())),
        );
    }
    csv
}

fn fan_json(fan: &FanSolution) -> Value {
    json!({
        "S": fan.s.as_slice(),
        "strengths": fan.strengths,
        "trace": fan.trace.as_slice(),
        "residual": fan.residual,
        "horizon": fan.horizon,
        "provider": fan.provider.as_str(),
        "newton_iterations": fan.newton_iterations,
        "pieces": fan.pieces.iter().map(piece_json).collect::<Vec<_>>(),
    })
}

fn check_jobs(jobs: usize) -> Outcome {
    if jobs == 0 {
        Err(Failure::Usage("--jobs must be at least 1".into()))
    } else {
        Ok(())
    }
}

pub fn solve(args: &SolveArgs) -> Outcome {
    check_jobs(args.jobs)?;
    let (model, mut config) = load_model(&args.model)?;
    check_state(&model, "--u0", &args.u0)?;
    for ub in &args.ub {
        check_state(&model, "--ub", ub)?;
    }
    let rc = riemann_config(args)?;
    config["command"] = json!("solve");
    config["u0"] = json!(args.u0.as_slice());
    config["provider"] = json!(rc.provider.as_str());
    config["tol"] = json!(args.tol);
    let count = args.ub.len();
    let results = run_scenarios(count, args.jobs, |i| solve_boundary_riemann(&model, &args.u0, &args.ub[i], &rc));
    let mut first_error = None;
    for (i, result) in results.into_iter().enumerate() {
        let mut cfg = config.clone();
        cfg["ub"] = json!(args.ub[i].as_slice());
        match result {
            Ok(fan) => {
                let dir = scenario_dir(&args.out.out_dir, i, count);
                ensure_dir(&dir)?;
                fan_csv(&fan, &cfg, model.dim()).write(&dir.join("fan.csv"))?;
                write_json(&dir.join("solution.json"), &json!({"config": cfg, "solution": fan_json(&fan)}))?;
                println!(
                    "solve[{i}]: S = {:?}, strengths = {:?}, trace = {:?}, {} piece(s)",
                    fan.s.as_slice(),
                    fan.strengths,
                    fan.trace.as_slice(),
                    fan.pieces.len()
                );
            }
            Err(e) => {
                eprintln!("solve[{i}]: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(Failure::Solver(e)),
        None => Ok(()),
    }
}

fn report_json(report: &ComparisonReport) -> Value {
    json!({
        "xi_max": report.xi_max,
        "z_inner": report.z_inner,
        "rungs": report.rungs,
        "ladder_failure": report.ladder_failure.as_ref().map(|e| e.to_string()),
        "fan": fan_json(&report.fan),
        "thresholds": {
            "l1_nonincreasing": report.l1_nonincreasing(),
            "inner_nonincreasing": report.inner_nonincreasing(),
            "inner_below_threshold": report.inner_threshold_met(),
            "tails_decreasing": report.tails_decreasing(),
            "inner_threshold": report.inner_threshold,
            "l1_loglog_slope": report.l1_slope(),
            "passed": report.passed(),
        },
    })
}

pub fn compare(args: &CompareArgs) -> Outcome {
    let solve = &args.solve;
    check_jobs(solve.jobs)?;
    let (model, mut config) = load_model(&solve.model)?;
    check_state(&model, "--u0", &solve.u0)?;
    for ub in &solve.ub {
        check_state(&model, "--ub", ub)?;
    }
    if !(args.z_inner > 0.0) {
        return Err(Failure::Usage("--z-inner must be positive".into()));
    }
    let cc = CompareConfig {
        riemann: riemann_config(solve)?,
        xi_max: args.xi_max,
        z_inner: args.z_inner,
        inner_threshold: args.threshold,
        ..CompareConfig::default()
    };
    let eps = &args.eps.0;
    config["command"] = json!("compare");
    config["u0"] = json!(solve.u0.as_slice());
    config["provider"] = json!(cc.riemann.provider.as_str());
    config["tol"] = json!(solve.tol);
    config["eps"] = json!(eps);
    config["z_inner"] = json!(args.z_inner);
    config["threshold"] = json!(args.threshold);
    config["tail_window"] = json!([cc.tail_window.0, cc.tail_window.1]);
    let count = solve.ub.len();
    let results = run_scenarios(count, solve.jobs, |i| compare_limits(&model, &solve.u0, &solve.ub[i], eps, &cc));
    let mut first_error = None;
    for (i, result) in results.into_iter().enumerate() {
        let mut cfg = config.clone();
        cfg["ub"] = json!(solve.ub[i].as_slice());
        let report = match result {
            Ok(r) => r,
            Err(e) => {
                eprintln!("compare[{i}]: {e}");
                first_error.get_or_insert(e);
                continue;
            }
        };
        cfg["xi_max"] = json!(report.xi_max);
        let dir = scenario_dir(&solve.out.out_dir, i, count);
        ensure_dir(&dir)?;
        let columns = ["epsilon", "l1_fan_dist", "sup_inner_dist", "weighted_tail"].map(String::from);
        let mut csv = Csv::new(&cfg, &columns);
        for r in &report.rungs {
            csv.row([r.epsilon, r.l1_fan_dist, r.sup_inner_dist, r.weighted_tail].iter().map(|x| num(*x)));
        }
        csv.write(&dir.join("convergence.csv"))?;
        fan_csv(&report.fan, &cfg, model.dim()).write(&dir.join("fan.csv"))?;
        let summary = report_json(&report);
        write_json(&dir.join("summary.json"), &json!({"config": cfg, "report": summary}))?;
        println!("compare[{i}]: {} rung(s)", report.rungs.len());
        for r in &report.rungs {
            println!(
                "  eps {} l1 {} inner {} tail {}",
                num(r.epsilon),
                num(r.l1_fan_dist),
                num(r.sup_inner_dist),
                num(r.weighted_tail)
            );
        }
        for (name, ok) in [
            ("l1_nonincreasing", report.l1_nonincreasing()),
            ("inner_nonincreasing", report.inner_nonincreasing()),
            ("inner_below_threshold", report.inner_threshold_met()),
            ("tails_decreasing", report.tails_decreasing()),
        ] {
            println!("  {name}: {}", if ok { "pass" } else { "fail" });
        }
        if let Some(e) = &report.ladder_failure {
            println!("  ladder stopped: {e}");
        }
    }
    match first_error {
        Some(e) => Err(Failure::Solver(e)),
        None => Ok(()),
    }
}
