use std::path::{Path, PathBuf};

use spn_core::diagnostics::{self, DiagnosticsError, StabilityVerdict};
use spn_core::examples;
use spn_core::linalg::Matrix;
use spn_core::lyapunov::{self, Condition, LyapunovError};
use spn_core::network::{self, parse_matrix, SpecFile, ValidatedNetwork};
use spn_core::scheduling::PolicyKind;
use spn_core::sim::{self, AuditReport, InitialJobs, SimError, SimOptions, SimState, TieBreak, Trajectory};

use crate::report::{self, float, list, Report};
use crate::{Cli, CliError, Command, NetworkArgs, PolicyArgs, PolicyName, RunArgs, TieBreakName};

pub fn run(cli: &Cli, out: &Path) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate(net) => validate(net),
        Command::Example { name, unstable } => example(name, *unstable, out),
        Command::Simulate { net, policy, run, interval, predraw_depth } => {
            simulate(cli, out, net, policy, run, *interval, *predraw_depth)
        }
        Command::Certify { net, z, epsilon, max_slack, condition, samples } => {
            certify(cli, out, net, z.z.as_deref(), *epsilon, *max_slack, condition, *samples)
        }
        Command::Drift { net, policy, z, run, cert_epsilon, trajectories } => {
            drift(cli, out, net, policy, z.z.as_deref(), run, *cert_epsilon, *trajectories)
        }
        Command::Analyze { inputs, slope_threshold, expect_stable } => {
            analyze(out, inputs, *slope_threshold, *expect_stable)
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::input("cli::Read", format!("{}: {e}", path.display())))
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn sim_err(e: SimError) -> CliError {
    CliError::input(format!("sim::{}", e.code()), e.to_string())
}

fn lyap_err(e: LyapunovError) -> CliError {
    CliError::input(format!("lyapunov::{}", e.code()), e.to_string())
}

fn diag_err(e: DiagnosticsError) -> CliError {
    CliError::input(format!("diagnostics::{}", e.code()), e.to_string())
}

fn load_network(args: &NetworkArgs) -> Result<ValidatedNetwork, CliError> {
    let spec = match (&args.source.spec, &args.source.example) {
        (_, Some(name)) => examples::build(name, args.unstable)
            .map_err(|e| CliError::input("examples::UnknownExample", e.to_string()))?,
        (Some(path), None) => {
            if args.unstable {
                return Err(CliError::input("cli::UnstableNeedsExample", "--unstable applies to builtin examples"));
            }
            let text = read(path)?;
            SpecFile::parse(&text)
                .and_then(SpecFile::into_spec)
                .map_err(|e| CliError::input(format!("config::{}", e.code()), format!("{}: {e}", path.display())))?
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    network::validate(spec).map_err(|errs| {
        let code = format!("network::{}", errs[0].code());
        let lines: Vec<String> = errs.iter().map(|e| format!("[network::{}] {e}", e.code())).collect();
        CliError::input(code, lines.join("\n"))
    })
}

fn validate(args: &NetworkArgs) -> Result<(), CliError> {
    let net = load_network(args)?;
    let mut r = Report::new();
    r.str("name", &net.spec().name)
        .kv("valid", true)
        .kv("buffers", net.num_buffers())
        .kv("activities", net.num_activities())
        .kv("processors", net.num_processors())
        .kv("components", net.components().len())
        .kv("synchronized", net.spec().synchronized)
        .kv("rho", list(net.load().rho.iter().map(|&x| float(x))))
        .num("spectral_radius", net.spectral_radius());
    match net.route_bound() {
        Some(d) => r.kv("route_bound", d),
        None => r.str("route_bound", "unbounded"),
    };
    print!("{}", r.as_str());
    Ok(())
}

fn example(name: &str, unstable: bool, out: &Path) -> Result<(), CliError> {
    let spec = examples::build(name, unstable).map_err(|e| CliError::input("examples::UnknownExample", e.to_string()))?;
    ensure_dir(out)?;
    let file = if unstable { format!("{name}-unstable.toml") } else { format!("{name}.toml") };
    let path = out.join(file);
    std::fs::write(&path, SpecFile::from_spec(&spec).to_toml()).map_err(|e| CliError::io(&path, e))?;
    println!("{}", path.display());
    Ok(())
}

/// Constructed certificate matrix and slack bound, if a constructor applies.
fn constructed(net: &ValidatedNetwork) -> Option<(Matrix, Option<f64>, &'static str)> {
    if let Ok((z, b)) = lyapunov::construct_psn(net) {
        return Some((z, b, "parallel-server"));
    }
    if let Ok((z, b)) = lyapunov::construct_comm(net) {
        return Some((z, b, "communication"));
    }
    None
}

fn load_z(net: &ValidatedNetwork, path: Option<&Path>) -> Result<(Matrix, Option<f64>, String), CliError> {
    match path {
        Some(p) => {
            let z = parse_matrix(&read(p)?)
                .map_err(|e| CliError::input(format!("config::{}", e.code()), format!("{}: {e}", p.display())))?;
            let bound = constructed(net).and_then(|c| c.1);
            Ok((z, bound, p.display().to_string()))
        }
        None => constructed(net)
            .map(|(z, b, kind)| (z, b, kind.to_string()))
            .ok_or_else(|| CliError::input("cli::NoCertificate", "no closed-form certificate applies; pass --z")),
    }
}

fn policy_kind(args: &PolicyArgs, net: &ValidatedNetwork) -> Result<PolicyKind, CliError> {
    let policy = match args.policy {
        PolicyName::Lrfs => PolicyKind::Lrfs,
        PolicyName::EpsLrfs => {
            let epsilon = match args.epsilon {
                Some(e) => e,
                None => constructed(net)
                    .and_then(|c| c.1)
                    .map(|b| (b / 2.0).min(1.0))
                    .ok_or_else(|| CliError::input("cli::MissingEpsilon", "eps-lrfs needs --epsilon"))?,
            };
            PolicyKind::EpsLrfs { epsilon }
        }
        PolicyName::StaticPriority => {
            let order = match &args.priority_order {
                Some(o) => o
                    .iter()
                    .map(|&i| i.checked_sub(1))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| CliError::input("scheduling::BadPriorityOrder", "buffers are one-based"))?,
                None => exit_first_order(net),
            };
            PolicyKind::StaticPriority { order }
        }
    };
    policy
        .check(net.num_buffers())
        .map_err(|e| CliError::input(format!("scheduling::{}", e.code()), e.to_string()))?;
    Ok(policy)
}

/// Buffers by increasing expected remaining work, ties by index.
fn exit_first_order(net: &ValidatedNetwork) -> Vec<usize> {
    let w = net.visit_work();
    let mut order: Vec<usize> = (0..net.num_buffers()).collect();
    order.sort_by(|&a, &b| w[a].total_cmp(&w[b]).then(a.cmp(&b)));
    order
}

fn parse_initial(items: &[String], net: &ValidatedNetwork) -> Result<Vec<InitialJobs>, CliError> {
    items
        .iter()
        .map(|s| {
            let bad = || CliError::input("cli::BadInitial", format!("`{s}`: expected BUFFER:COUNTER:COUNT"));
            let parts: Vec<&str> = s.split(':').collect();
            let [b, c, n] = parts.as_slice() else { return Err(bad()) };
            let buffer: usize = b.parse().map_err(|_| bad())?;
            if buffer == 0 || buffer > net.num_buffers() {
                return Err(bad());
            }
            Ok(InitialJobs {
                buffer: buffer - 1,
                counter: c.parse().map_err(|_| bad())?,
                count: n.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

fn need_seed(cli: &Cli) -> Result<u64, CliError> {
    cli.seed.ok_or_else(|| CliError::input("cli::MissingSeed", "this command needs --seed"))
}

fn run_options(cli: &Cli, run: &RunArgs, policy: &PolicyArgs, net: &ValidatedNetwork) -> Result<SimOptions, CliError> {
    Ok(SimOptions {
        horizon: run.horizon,
        seed: need_seed(cli)?,
        replications: run.replications,
        tiebreak: match policy.tiebreak {
            TieBreakName::Lowest => TieBreak::Lowest,
            TieBreakName::Random => TieBreak::Random,
        },
        initial: parse_initial(&run.initial, net)?,
        audit: run.audit,
        ..SimOptions::default()
    })
}

fn policy_report(r: &mut Report, policy: &PolicyKind) {
    r.str("policy", policy.name());
    match policy {
        PolicyKind::EpsLrfs { epsilon } => {
            r.num("epsilon", *epsilon);
        }
        PolicyKind::StaticPriority { order } => {
            r.kv("priority_order", list(order.iter().map(|i| i + 1)));
        }
        PolicyKind::Lrfs => {}
    }
}

fn audit_report(r: &mut Report, trajs: &[Trajectory]) -> u64 {
    let reports: Vec<AuditReport> = trajs.iter().filter_map(|t| t.audit.clone()).collect();
    if reports.is_empty() {
        return 0;
    }
    let a = AuditReport::merge(&reports);
    r.section("audit")
        .kv("instants", a.instants)
        .kv("violations", a.violations())
        .kv("feasibility", a.feasibility)
        .kv("maximality", a.maximality)
        .kv("non_preemption", a.non_preemption)
        .kv("counter", a.counter)
        .kv("workload_identity", a.workload_identity)
        .kv("conservation", a.conservation)
        .kv("synchrony", a.synchrony)
        .kv("routing_increments", a.routing.count)
        .num("routing_mean", a.routing.mean)
        .num("routing_stderr", a.routing.stderr)
        .kv("routing_centered", a.routing.centered(3.0));
    if let Some(v) = &a.first_violation {
        r.str("first_violation", v);
    }
    a.violations() + u64::from(!a.routing.centered(3.0))
}

fn trajectory_path(out: &Path, seed: u64, format: report::Format) -> PathBuf {
    out.join(format!("trajectory-seed{seed}.{}", format.extension()))
}

fn final_half_slope(traj: &Trajectory) -> f64 {
    let (t, y) = (traj.times(), traj.norms());
    let Some(&last) = t.last() else { return 0.0 };
    let start = t.iter().position(|&s| s >= t[0] + 0.5 * (last - t[0])).unwrap_or(0);
    diagnostics::ls_slope(&t[start..], &y[start..])
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    cli: &Cli,
    out: &Path,
    args: &NetworkArgs,
    policy_args: &PolicyArgs,
    run: &RunArgs,
    interval: f64,
    depth: usize,
) -> Result<(), CliError> {
    let net = load_network(args)?;
    let policy = policy_kind(policy_args, &net)?;
    let opts = SimOptions { sample_interval: interval, predraw_depth: depth, ..run_options(cli, run, policy_args, &net)? };
    let trajs = sim::run_replications(&net, &policy, &opts, None).map_err(sim_err)?;
    ensure_dir(out)?;
    for tr in &trajs {
        report::write_trajectory(&trajectory_path(out, tr.seed, cli.format), tr, net.num_buffers(), cli.format)?;
    }

    let stability = diagnostics::stability_estimate(&trajs, diagnostics::DEFAULT_SLOPE_THRESHOLD).ok();
    let mut r = Report::new();
    r.str("network", &net.spec().name);
    policy_report(&mut r, &policy);
    r.num("horizon", opts.horizon).num("sample_interval", opts.sample_interval).kv("replications", trajs.len());
    match &stability {
        Some(s) => {
            r.str("verdict", &s.verdict.to_string())
                .kv("diverging_replications", s.diverging_count())
                .kv("bounded_replications", s.replications.iter().filter(|x| x.verdict == StabilityVerdict::BoundedEvidence).count())
                .num("mean_tail_slope", s.tail_slope);
        }
        None => {
            r.str("verdict", "insufficient-samples");
        }
    }
    for (k, tr) in trajs.iter().enumerate() {
        r.array_section("replication")
            .kv("seed", tr.seed)
            .num("time_avg_norm", tr.time_avg_norm())
            .num("tail_slope", final_half_slope(tr))
            .kv("events_processed", tr.events_processed)
            .num("final_norm", tr.final_norm);
        if let Some(s) = &stability {
            r.str("verdict", &s.replications[k].verdict.to_string());
        }
    }
    let audit_failures = audit_report(&mut r, &trajs);
    r.write(&out.join("summary.txt"))?;
    print!("{}", r.as_str());
    if audit_failures > 0 {
        return Err(CliError::Violated("audit recorded invariant violations".into()));
    }
    if run.expect_stable && stability.as_ref().is_none_or(|s| s.verdict == StabilityVerdict::Diverging) {
        return Err(CliError::Violated("stability verdict is not stable".into()));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn certify(
    cli: &Cli,
    out: &Path,
    args: &NetworkArgs,
    z_path: Option<&Path>,
    epsilon: Option<f64>,
    want_slack: bool,
    conditions: &[String],
    samples: u64,
) -> Result<(), CliError> {
    let net = load_network(args)?;
    let (z, bound, source) = load_z(&net, z_path)?;
    let conditions = conditions
        .iter()
        .map(|c| c.parse::<Condition>().map_err(|e| CliError::input("cli::BadCondition", e)))
        .collect::<Result<Vec<_>, _>>()?;
    let epsilon = epsilon.or(bound.map(|b| b / 2.0)).unwrap_or(0.0);
    let res = lyapunov::check_local(&z, &net, epsilon).map_err(lyap_err)?;

    let mut r = Report::new();
    r.str("network", &net.spec().name).str("z_source", &source);
    r.kv("z", list(z.iter().map(|row| list(row.iter().map(|&x| float(x))))));
    if let Some(b) = bound {
        r.num("epsilon_bound", b);
    }
    r.num("epsilon", epsilon).kv("holds", res.holds);
    let mut failed = !res.holds;
    if let (Some(eta), Some(c)) = (res.eta, res.c) {
        r.num("eta", eta).num("C", c);
    }
    r.num("max_coefficient", res.max_coefficient);
    if let Some(w) = &res.witness {
        r.kv("witness_pattern", list(buffers_of(&w.pattern.0)))
            .kv("witness_schedule", list(buffers_of(&w.schedule.0)))
            .kv("witness_buffer", w.buffer + 1)
            .num("witness_coefficient", w.coefficient);
    }
    if want_slack {
        match lyapunov::max_slack(&z, &net).map_err(lyap_err)? {
            Some(e) => r.num("max_slack", e),
            None => r.str("max_slack", "none"),
        };
    }
    for cond in conditions {
        let ok = lyapunov::check_structural(&z, &net, cond);
        failed |= !ok;
        r.kv(&format!("condition_{cond}"), ok);
    }
    if samples > 0 {
        if let (Some(eta), Some(c)) = (res.eta, res.c) {
            let mut rng = sim::stream(cli.seed.unwrap_or(0), "certify");
            let v = lyapunov::sample_check(&z, &net, epsilon, eta, c, samples, &mut rng).map_err(lyap_err)?;
            failed |= v > 0;
            r.kv("samples", samples).kv("sample_violations", v);
        }
    }
    ensure_dir(out)?;
    r.write(&out.join("certificate.txt"))?;
    print!("{}", r.as_str());
    if failed {
        return Err(CliError::Violated("certificate violated".into()));
    }
    Ok(())
}

/// One-based indices of the set entries.
fn buffers_of(bits: &[bool]) -> Vec<usize> {
    bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i + 1).collect()
}

#[allow(clippy::too_many_arguments)]
fn drift(
    cli: &Cli,
    out: &Path,
    args: &NetworkArgs,
    policy_args: &PolicyArgs,
    z_path: Option<&Path>,
    run: &RunArgs,
    cert_epsilon: Option<f64>,
    write_trajectories: bool,
) -> Result<(), CliError> {
    let net = load_network(args)?;
    let policy = policy_kind(policy_args, &net)?;
    let (z, bound, source) = load_z(&net, z_path)?;
    let epsilon = match cert_epsilon {
        Some(e) => e,
        None if net.route_bound().is_some() => 0.0,
        None => bound
            .map(|b| b / 2.0)
            .ok_or_else(|| CliError::input("cli::MissingEpsilon", "unbounded routes need --cert-epsilon"))?,
    };
    let res = lyapunov::check_local(&z, &net, epsilon).map_err(lyap_err)?;
    let Some(cert) = res.certificate(&z, epsilon) else {
        return Err(CliError::Violated(format!("certificate does not hold at slack {epsilon}")));
    };
    let k = diagnostics::global_constants(&net, &cert).map_err(diag_err)?;
    let opts = SimOptions {
        sample_interval: k.t as f64,
        predraw_depth: k.d,
        ..run_options(cli, run, policy_args, &net)?
    };
    let probe = |s: &SimState| diagnostics::eval_global(s, &net, &k, &cert).expect("pre-draw depth covers D");
    let trajs = sim::run_replications(&net, &policy, &opts, Some(&probe)).map_err(sim_err)?;
    let est = diagnostics::drift_estimate(&trajs).map_err(diag_err)?;

    ensure_dir(out)?;
    let bins_path = out.join(format!("drift_bins.{}", cli.format.extension()));
    let mut w = csv_writer(&bins_path, cli.format)?;
    let io = |e: csv::Error| CliError::io(&bins_path, e);
    w.write_record(["|Y|_lo", "|Y|_hi", "n", "mean_increment", "stderr"]).map_err(io)?;
    for b in &est.bins {
        w.write_record([float(b.lo), float(b.hi), b.n.to_string(), float(b.mean_increment), float(b.stderr)])
            .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(&bins_path, e))?;
    if write_trajectories {
        for tr in &trajs {
            report::write_trajectory(&trajectory_path(out, tr.seed, cli.format), tr, net.num_buffers(), cli.format)?;
        }
    }

    let mut r = Report::new();
    r.str("network", &net.spec().name);
    policy_report(&mut r, &policy);
    r.num("horizon", opts.horizon).kv("replications", trajs.len()).kv("seed", opts.seed);
    r.section("certificate")
        .str("z_source", &source)
        .num("epsilon", cert.epsilon)
        .num("eta", cert.eta)
        .num("C", cert.c);
    r.section("constants")
        .num("B_renewal", k.b_renewal)
        .kv("T", k.t)
        .num("nu", k.nu)
        .num("gamma", k.gamma)
        .kv("D", k.d)
        .num("gamma1", k.gamma1)
        .num("gamma2", k.gamma2)
        .num("upsilon", k.upsilon)
        .num("C", k.c)
        .num("xi", k.xi)
        .num("beta_min", k.beta_min)
        .num("m_min", k.m_min)
        .num("m_max", k.m_max)
        .kv("bounded_routes", k.bounded_routes);
    r.section("drift")
        .kv("increments", est.increments)
        .kv("bins", est.bins.len())
        .num("a", est.a)
        .num("b", est.b)
        .kv("drift_consistent", est.drift_consistent)
        .kv("top_two_bins_negative", est.top_bins_negative(2, 2.0));
    let audit_failures = audit_report(&mut r, &trajs);
    r.write(&out.join("drift.txt"))?;
    print!("{}", r.as_str());
    if audit_failures > 0 {
        return Err(CliError::Violated("audit recorded invariant violations".into()));
    }
    if run.expect_stable && !est.drift_consistent {
        return Err(CliError::Violated("drift is not consistent with stability".into()));
    }
    Ok(())
}

fn csv_writer(path: &Path, format: report::Format) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::WriterBuilder::new()
        .delimiter(format.delimiter())
        .from_path(path)
        .map_err(|e| CliError::io(path, e))
}

fn analyze(out: &Path, inputs: &[PathBuf], threshold: f64, expect_stable: bool) -> Result<(), CliError> {
    let trajs = inputs
        .iter()
        .enumerate()
        .map(|(k, p)| report::read_trajectory(p, k as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let s = diagnostics::stability_estimate(&trajs, threshold).map_err(diag_err)?;
    let mut r = Report::new();
    r.kv("inputs", trajs.len())
        .str("verdict", &s.verdict.to_string())
        .num("time_avg_norm", s.time_avg_norm)
        .num("tail_slope", s.tail_slope)
        .num("slope_threshold", s.threshold)
        .kv("diverging_replications", s.diverging_count());
    for (p, rep) in inputs.iter().zip(&s.replications) {
        r.array_section("input")
            .str("path", &p.display().to_string())
            .num("time_avg_norm", rep.time_avg_norm)
            .num("tail_slope", rep.tail_slope)
            .num("middle_avg", rep.middle_avg)
            .num("tail_avg", rep.tail_avg)
            .str("verdict", &rep.verdict.to_string());
    }
    if trajs.iter().all(|t| t.rows.iter().all(|row| row.probe.is_some())) {
        if let Ok(d) = diagnostics::drift_estimate(&trajs) {
            r.section("drift")
                .kv("increments", d.increments)
                .num("a", d.a)
                .num("b", d.b)
                .kv("drift_consistent", d.drift_consistent)
                .kv("top_two_bins_negative", d.top_bins_negative(2, 2.0));
        }
    }
    ensure_dir(out)?;
    r.write(&out.join("analysis.txt"))?;
    print!("{}", r.as_str());
    if expect_stable && s.verdict == StabilityVerdict::Diverging {
        return Err(CliError::Violated("stability verdict is diverging".into()));
    }
    Ok(())
}
