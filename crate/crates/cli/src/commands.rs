//! Directive drivers. Each returns a text report, CSV rows, and whether
//! the verification it performs passed.

use std::fmt::Write as _;

use auctionlab_core::engine::{export_transcript, revenue, run_auction, utility, MechanismConfig, MechanismKind};
use auctionlab_core::equilibrium::{
    enumerate_pure_nash, is_pure_nash, solve_spe, spe_report, spe_root_alternatives, EquilibriumReport, GameInstance,
    SpeSolution, DEFAULT_PROFILE_CAP,
};
use auctionlab_core::gen::{self, Lattice};
use auctionlab_core::rational::{fmt_rational, int, ratio};
use auctionlab_core::smoothness::{
    check_smoothness, check_smoothness_via_extension, poa_bound, Approximator, DeviationFamily, ProfileDomain,
    SmoothnessCertificate, Verdict,
};
use auctionlab_core::strategies::{generate_plan_space, Plan};
use auctionlab_core::valuations::check_pointwise_approx;
use auctionlab_core::{optimal_welfare, ItemSet, Rational, Valuation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus;
use crate::error::CliError;
use crate::output::{decimal, exact, Row};
use crate::scenario::{Directive, Scenario, SmoothnessFamily, SweepSpec};

/// Cap on the optimal-welfare search used for reports.
const WELFARE_CAP: u128 = 10_000_000;
/// Profiles sampled when a smoothness domain is too large to enumerate.
pub const DEFAULT_SAMPLES: usize = 2_000;

/// Command-line overrides of scenario settings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Options {
    pub grid: Option<Rational>,
    pub seed: Option<u64>,
    pub cap: Option<u64>,
}

#[derive(Clone, Debug, Default)]
pub struct CommandOutput {
    pub report: String,
    pub rows: Vec<Row>,
    pub passed: bool,
}

impl CommandOutput {
    fn absorb(&mut self, other: CommandOutput) {
        self.report.push_str(&other.report);
        self.rows.extend(other.rows);
        self.passed &= other.passed;
    }
}

pub fn execute(directive: Directive, scenario: &Scenario, opts: &Options) -> Result<CommandOutput, CliError> {
    match directive {
        Directive::Run => run(scenario, opts),
        Directive::Nash => nash(scenario, opts),
        Directive::Spe => spe(scenario, opts),
        Directive::Smoothness => smoothness(scenario, opts),
        Directive::Approx => approx(scenario),
        Directive::Reproduce => corpus::reproduce_scenario(scenario, opts),
        Directive::Sweep => sweep(scenario, opts),
    }
}

fn instance_name(s: &Scenario) -> String {
    s.experiment
        .as_ref()
        .and_then(|e| e.name.clone())
        .unwrap_or_else(|| "scenario".into())
}

fn base_row(directive: &str, s: &Scenario) -> Row {
    Row::new(directive, &instance_name(s), s.config.kind.name(), s.config.n, s.config.m)
}

fn seed(s: &Scenario, opts: &Options) -> Option<u64> {
    opts.seed.or_else(|| s.experiment.as_ref().and_then(|e| e.seed))
}

fn cap(s: &Scenario, opts: &Options) -> Option<u64> {
    opts.cap.or_else(|| s.experiment.as_ref().and_then(|e| e.cap))
}

pub fn run(s: &Scenario, opts: &Options) -> Result<CommandOutput, CliError> {
    if s.profile.is_empty() {
        return Err(CliError::Invalid("run needs a [[profile]] with one plan per bidder".into()));
    }
    let out = run_auction(&s.config, &s.profile, seed(s, opts))?;
    let (_, opt) = optimal_welfare(&s.valuations, WELFARE_CAP)?;
    let welfare = out.welfare(&s.valuations)?;
    let mut report = String::new();
    writeln!(report, "mechanism: {} (n={}, m={})", s.config.kind.name(), s.config.n, s.config.m).unwrap();
    writeln!(report, "transcript (round winner amount plus bundle price):").unwrap();
    report.push_str(&export_transcript(&out));
    for (i, v) in s.valuations.iter().enumerate() {
        writeln!(
            report,
            "bidder {i}: bundle {} pays {} utility {}",
            out.allocation.bundles[i],
            fmt_rational(&out.payments[i]),
            fmt_rational(&utility(&out, i, v)?)
        )
        .unwrap();
    }
    writeln!(report, "welfare: {}", fmt_rational(&welfare)).unwrap();
    writeln!(report, "revenue: {}", fmt_rational(&revenue(&out))).unwrap();
    writeln!(report, "opt: {}", fmt_rational(&opt)).unwrap();
    let mut row = base_row("run", s);
    row.opt = exact(Some(opt));
    row.welfare_min = exact(Some(welfare));
    row.welfare_max = row.welfare_min.clone();
    row.revenue = exact(Some(revenue(&out)));
    Ok(CommandOutput {
        report,
        rows: vec![row],
        passed: true,
    })
}

fn report_equilibria(report: &mut String, eq: &EquilibriumReport, shown: usize) {
    writeln!(report, "opt: {}", fmt_rational(&eq.opt_welfare)).unwrap();
    writeln!(report, "{} equilibria: {}", eq.kind.name(), eq.equilibria.len()).unwrap();
    for (k, e) in eq.equilibria.iter().take(shown).enumerate() {
        let winners: Vec<String> = e
            .outcome
            .allocation
            .bundles
            .iter()
            .enumerate()
            .map(|(i, b)| format!("{i}:{b}"))
            .collect();
        writeln!(
            report,
            "  #{k}: welfare {} revenue {} allocation [{}]",
            fmt_rational(&e.welfare),
            fmt_rational(&e.revenue),
            winners.join(" ")
        )
        .unwrap();
    }
    if eq.equilibria.len() > shown {
        writeln!(report, "  ... {} more", eq.equilibria.len() - shown).unwrap();
    }
    writeln!(report, "poa: {}", ratio_text(eq.poa)).unwrap();
    writeln!(report, "pos: {}", ratio_text(eq.pos)).unwrap();
}

fn ratio_text(r: Option<Rational>) -> String {
    match r {
        Some(x) => format!("{} (~{:.6})", fmt_rational(&x), decimal(Some(x)).unwrap_or_default()),
        None => "undefined".into(),
    }
}

fn equilibrium_row(mut row: Row, eq: &EquilibriumReport) -> Row {
    row.opt = exact(Some(eq.opt_welfare));
    row.welfare_min = exact(eq.equilibria.iter().map(|e| e.welfare).min());
    row.welfare_max = exact(eq.equilibria.iter().map(|e| e.welfare).max());
    row.equilibria = Some(eq.equilibria.len());
    row.profiles = Some(eq.profiles_checked);
    row.poa = exact(eq.poa);
    row.poa_decimal = decimal(eq.poa);
    row.pos = exact(eq.pos);
    row.pos_decimal = decimal(eq.pos);
    row
}

pub fn nash(s: &Scenario, opts: &Options) -> Result<CommandOutput, CliError> {
    let instance = s.instance(opts.grid)?;
    let mut report = String::new();
    writeln!(report, "plan profiles: {}", instance.profile_count()).unwrap();
    if !s.profile.is_empty() {
        if s.profile.iter().any(Plan::is_mixed) {
            return Err(CliError::Invalid("nash checks pure profiles; the profile has a mixed plan".into()));
        }
        let check = is_pure_nash(&instance, &s.profile)?;
        let (out, _) = instance.utilities(&s.profile)?;
        let welfare = out.welfare(&s.valuations)?;
        let (_, opt) = instance.optimum()?;
        writeln!(report, "profile welfare: {}", fmt_rational(&welfare)).unwrap();
        writeln!(report, "opt: {}", fmt_rational(&opt)).unwrap();
        match &check.witness {
            Some(d) if !check.is_nash => writeln!(
                report,
                "not an equilibrium: bidder {} gains {} with {}",
                d.bidder,
                fmt_rational(&d.gain),
                d.plan
            )
            .unwrap(),
            _ => writeln!(report, "pure nash: yes").unwrap(),
        }
        let mut row = base_row("nash", s);
        row.opt = exact(Some(opt));
        row.welfare_min = exact(Some(welfare));
        row.welfare_max = row.welfare_min.clone();
        row.revenue = exact(Some(revenue(&out)));
        row.passed = check.is_nash;
        return Ok(CommandOutput {
            report,
            rows: vec![row],
            passed: check.is_nash,
        });
    }
    let cap = cap(s, opts).map_or(DEFAULT_PROFILE_CAP, u128::from);
    let eq = enumerate_pure_nash(&instance, cap)?;
    report_equilibria(&mut report, &eq, 10);
    Ok(CommandOutput {
        report,
        rows: vec![equilibrium_row(base_row("nash", s), &eq)],
        passed: true,
    })
}

pub fn describe_solution(report: &mut String, sol: &SpeSolution) {
    for (t, stage) in sol.path.iter().enumerate() {
        let support = match (stage.supporter, stage.supporter_item) {
            (Some(sup), Some(j)) => format!(", supported by {sup} on item {j}"),
            (Some(sup), None) => format!(", supported by {sup}"),
            _ => String::new(),
        };
        writeln!(
            report,
            "  round {t}: bidder {} takes item {} at {}{support}",
            stage.winner,
            stage.item,
            fmt_rational(&stage.price)
        )
        .unwrap();
    }
    writeln!(report, "  welfare: {}", sol.welfare.map_or("none".into(), |w| fmt_rational(&w))).unwrap();
    writeln!(report, "  ratio: {}", ratio_text(sol.ratio)).unwrap();
    if !sol.unsolved.is_empty() {
        writeln!(report, "  states without a stage equilibrium: {}", sol.unsolved.len()).unwrap();
    }
}

pub fn spe(s: &Scenario, opts: &Options) -> Result<CommandOutput, CliError> {
    let mut options = s.spe_options(opts.grid)?;
    if let Some(c) = cap(s, opts) {
        options.state_cap = usize::try_from(c).unwrap_or(usize::MAX);
    }
    let alternatives = s.experiment.as_ref().map_or(false, |e| e.alternatives);
    let sols = if alternatives {
        spe_root_alternatives(&s.config, &s.valuations, &options)?
    } else {
        vec![solve_spe(&s.config, &s.valuations, &options)?]
    };
    let mut report = String::new();
    writeln!(report, "opt: {}", fmt_rational(&sols.first().map_or(int(0), |x| x.opt_welfare))).unwrap();
    for (k, sol) in sols.iter().enumerate() {
        writeln!(report, "equilibrium #{k} ({} states solved):", sol.states_solved).unwrap();
        describe_solution(&mut report, sol);
    }
    let eq = spe_report(&s.valuations, &sols)?;
    writeln!(report, "poa over listed equilibria: {}", ratio_text(eq.poa)).unwrap();
    writeln!(report, "pos over listed equilibria: {}", ratio_text(eq.pos)).unwrap();
    let passed = !sols.is_empty() && sols.iter().all(|x| x.welfare.is_some());
    let mut row = equilibrium_row(base_row("spe", s), &eq);
    row.passed = passed;
    Ok(CommandOutput {
        report,
        rows: vec![row],
        passed,
    })
}

/// The deviation family a profile supports without being told.
fn default_family(vals: &[Valuation]) -> Option<SmoothnessFamily> {
    let all = |name: &str| vals.iter().all(|v| v.class_name() == name);
    if all("unit_demand") {
        Some(SmoothnessFamily::Direct(DeviationFamily::UnitDemand))
    } else if all("constraint_homogeneous") {
        Some(SmoothnessFamily::Direct(DeviationFamily::Core))
    } else if all("concave_symmetric") {
        Some(SmoothnessFamily::Extension(Approximator::ConcaveSymmetric))
    } else if all("additive") {
        Some(SmoothnessFamily::Extension(Approximator::Additive))
    } else if all("xos") {
        Some(SmoothnessFamily::Extension(Approximator::Xos))
    } else if vals.iter().all(|v| matches!(v, Valuation::Table { subadditive: true, .. })) {
        Some(SmoothnessFamily::Extension(Approximator::Subadditive))
    } else {
        None
    }
}

/// λ of the direct certificates, and the base λ of extensions.
pub fn default_lambda(family: &SmoothnessFamily) -> Rational {
    match family {
        SmoothnessFamily::Direct(DeviationFamily::UnitDemand) => ratio(1, 2),
        _ => ratio(1, 4),
    }
}

pub fn certify(
    instance: &GameInstance,
    family: &SmoothnessFamily,
    lambda: Rational,
    mu: Rational,
    domain: ProfileDomain,
) -> Result<SmoothnessCertificate, CliError> {
    Ok(match family {
        SmoothnessFamily::Direct(f) => check_smoothness(instance, *f, lambda, mu, domain)?,
        SmoothnessFamily::Extension(a) => check_smoothness_via_extension(instance, *a, lambda, mu, domain)?,
    })
}

fn certificate_row(mut row: Row, cert: &SmoothnessCertificate) -> Row {
    row.opt = exact(Some(cert.opt_welfare));
    row.family = cert.family.clone();
    row.lambda = exact(Some(cert.lambda));
    row.mu = exact(Some(cert.mu));
    row.margin = exact(cert.worst_margin);
    row.margin_decimal = decimal(cert.worst_margin);
    row.exhaustive = Some(cert.exhaustive);
    row.profiles = Some(cert.profiles_checked);
    row.poa = exact(cert.poa_bound().ok());
    row.poa_decimal = decimal(cert.poa_bound().ok());
    row.passed = cert.all_checks_pass();
    row
}

pub fn smoothness(s: &Scenario, opts: &Options) -> Result<CommandOutput, CliError> {
    let exp = s.experiment.clone();
    let family = exp
        .as_ref()
        .and_then(|e| e.family.clone())
        .or_else(|| default_family(&s.valuations))
        .ok_or_else(|| CliError::Invalid("experiment.family is required for this valuation profile".into()))?;
    let lambda = exp.as_ref().and_then(|e| e.lambda).unwrap_or_else(|| default_lambda(&family));
    let mu = exp.as_ref().and_then(|e| e.mu).unwrap_or_else(|| int(2));
    let samples = exp.as_ref().and_then(|e| e.samples).unwrap_or(DEFAULT_SAMPLES);
    let domain = ProfileDomain::Auto {
        count: samples,
        seed: seed(s, opts).unwrap_or(0),
    };
    let instance = s.instance(opts.grid)?;
    let cert = certify(&instance, &family, lambda, mu, domain)?;
    let mut report = cert.report();
    if let Verdict::Counterexample { profile, .. } = &cert.verdict {
        let replay = Scenario {
            profile: profile.clone(),
            experiment: None,
            sweep: None,
            ..s.clone()
        };
        if let Ok(text) = replay.to_toml() {
            writeln!(report, "counterexample scenario:\n{text}").unwrap();
        }
    }
    let passed = cert.all_checks_pass();
    Ok(CommandOutput {
        report,
        rows: vec![certificate_row(base_row("smoothness", s), &cert)],
        passed,
    })
}

fn default_approximator(v: &Valuation) -> Option<Approximator> {
    match v {
        Valuation::ConcaveSymmetric { .. } => Some(Approximator::ConcaveSymmetric),
        Valuation::Additive { .. } => Some(Approximator::Additive),
        Valuation::Xos { .. } => Some(Approximator::Xos),
        Valuation::Table { subadditive: true, .. } => Some(Approximator::Subadditive),
        _ => None,
    }
}

pub fn approx(s: &Scenario) -> Result<CommandOutput, CliError> {
    let exp = s.experiment.as_ref();
    let set = exp.and_then(|e| e.set).unwrap_or_else(|| ItemSet::full(s.config.m));
    let mut report = String::new();
    let mut rows = Vec::new();
    let mut passed = true;
    writeln!(report, "target set: {set}").unwrap();
    for (i, v) in s.valuations.iter().enumerate() {
        let approximator = exp
            .and_then(|e| e.approximator)
            .or_else(|| default_approximator(v))
            .ok_or_else(|| CliError::Invalid(format!("bidder {i}: no approximation chain for {}", v.class_name())))?;
        let res = approximator.approximate(v, set)?;
        let pointwise = check_pointwise_approx(v, &res.approx, set, res.beta)?;
        let bound = approximator.class_beta(s.config.m);
        let ok = pointwise && res.beta <= bound;
        passed &= ok;
        writeln!(
            report,
            "bidder {i}: {} via {}: beta {} (class bound {}), v(S) = {}, approx(S) = {}, pointwise {}",
            v.class_name(),
            approximator.name(),
            fmt_rational(&res.beta),
            fmt_rational(&bound),
            fmt_rational(&v.value(set)?),
            fmt_rational(&res.approx.value(set)?),
            if ok { "ok" } else { "FAILED" }
        )
        .unwrap();
        let mut row = base_row("approx", s);
        row.instance = format!("{}#{i}", row.instance);
        row.family = approximator.name().into();
        row.lambda = fmt_rational(&res.beta);
        row.passed = ok;
        rows.push(row);
    }
    Ok(CommandOutput { report, rows, passed })
}

fn generate(class: &str, rng: &mut ChaCha8Rng, m: usize, lattice: Lattice) -> Result<Valuation, CliError> {
    Ok(match class {
        "unit_demand" => gen::unit_demand(rng, m, lattice)?,
        "additive" => gen::additive(rng, m, lattice)?,
        "constraint_homogeneous" => gen::constraint_homogeneous(rng, m, lattice)?,
        "concave_symmetric" => gen::concave_symmetric(rng, m, lattice)?,
        "xos" => gen::xos(rng, m, 3, lattice)?,
        "subadditive" => gen::subadditive_table(rng, m, m, lattice)?,
        other => return Err(CliError::Invalid(format!("sweep.class: unknown class `{other}`"))),
    })
}

fn family_for_class(class: &str) -> SmoothnessFamily {
    match class {
        "unit_demand" => SmoothnessFamily::Direct(DeviationFamily::UnitDemand),
        "constraint_homogeneous" => SmoothnessFamily::Direct(DeviationFamily::Core),
        "concave_symmetric" => SmoothnessFamily::Extension(Approximator::ConcaveSymmetric),
        "additive" => SmoothnessFamily::Extension(Approximator::Additive),
        "xos" => SmoothnessFamily::Extension(Approximator::Xos),
        _ => SmoothnessFamily::Extension(Approximator::Subadditive),
    }
}

/// `OPT <= 2·SW + 2nδ` for every listed equilibrium.
pub fn pure_bound_holds(eq: &EquilibriumReport, n: usize, delta: Rational) -> bool {
    let slack = int(2) * int(n as i128) * delta;
    eq.equilibria
        .iter()
        .all(|e| eq.opt_welfare <= int(2) * e.welfare + slack)
}

/// One generated instance of a sweep.
pub fn sweep_instance(s: &Scenario, spec: &SweepSpec, seed: u64, index: usize, step: Option<Rational>) -> Result<GameInstance, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
    let n = rng.gen_range(spec.n.0..=spec.n.1);
    let m = rng.gen_range(spec.m.0..=spec.m.1);
    let lattice = Lattice::new(spec.denom as i128, spec.max_units as i128);
    let vals = (0..n)
        .map(|_| generate(&spec.class, &mut rng, m, lattice))
        .collect::<Result<Vec<_>, _>>()?;
    let kind = match &s.config.kind {
        MechanismKind::SequentialItem { .. } => MechanismKind::SequentialItem { order: (0..m).collect() },
        other => other.clone(),
    };
    let config = MechanismConfig::with_default_ties(kind, n, m)?;
    let mut space = s
        .plans
        .clone()
        .ok_or_else(|| CliError::Invalid("plans: a sweep needs a [plans] grid".into()))?;
    if let Some(step) = step {
        space.step = step;
    }
    let grid = space.grid()?;
    let spaces = vals
        .iter()
        .map(|v| generate_plan_space(v, &grid, &space.families, space.undominated))
        .collect();
    Ok(GameInstance::new(config, vals, spaces)?)
}

pub fn sweep(s: &Scenario, opts: &Options) -> Result<CommandOutput, CliError> {
    let spec = s
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Invalid("sweep needs a [sweep] section".into()))?;
    let seed = opts.seed.or(spec.seed).unwrap_or(0);
    let delta = opts.grid.or(s.plans.as_ref().map(|p| p.step)).unwrap_or_else(|| int(1));
    let exp = s.experiment.as_ref();
    let family = family_for_class(&spec.class);
    let lambda = exp.and_then(|e| e.lambda).unwrap_or_else(|| default_lambda(&family));
    let mu = exp.and_then(|e| e.mu).unwrap_or_else(|| int(2));
    let samples = exp.and_then(|e| e.samples).unwrap_or(DEFAULT_SAMPLES);
    let profile_cap = cap(s, opts).map_or(DEFAULT_PROFILE_CAP, u128::from);
    let check_bound = spec.class == "unit_demand" && s.config.kind.is_draft();

    let mut total = CommandOutput {
        passed: true,
        ..CommandOutput::default()
    };
    let mut worst_poa: Option<Rational> = None;
    let mut equilibria = 0usize;
    let mut worst_margin: Option<Rational> = None;
    for k in 0..spec.instances {
        let instance = sweep_instance(s, spec, seed, k, opts.grid)?;
        let (n, m) = (instance.config.n, instance.config.m);
        let name = format!("{}-{k}", spec.class);
        for d in &spec.directives {
            let row = Row::new(d.name(), &name, instance.config.kind.name(), n, m);
            match d {
                Directive::Nash => {
                    let eq = enumerate_pure_nash(&instance, profile_cap)?;
                    let mut row = equilibrium_row(row, &eq);
                    if check_bound {
                        row.passed = pure_bound_holds(&eq, n, delta);
                    }
                    equilibria += eq.equilibria.len();
                    if let Some(p) = eq.poa {
                        worst_poa = Some(worst_poa.map_or(p, |w| w.max(p)));
                    }
                    total.passed &= row.passed;
                    total.rows.push(row);
                }
                _ => {
                    let domain = ProfileDomain::Auto {
                        count: samples,
                        seed: seed.wrapping_add(k as u64),
                    };
                    let cert = certify(&instance, &family, lambda, mu, domain)?;
                    if let Some(x) = cert.worst_margin {
                        worst_margin = Some(worst_margin.map_or(x, |w| w.min(x)));
                    }
                    let row = certificate_row(row, &cert);
                    total.passed &= row.passed;
                    total.rows.push(row);
                }
            }
        }
    }
    let failed = total.rows.iter().filter(|r| !r.passed).count();
    writeln!(total.report, "instances: {} ({} class), seed {seed}", spec.instances, spec.class).unwrap();
    writeln!(total.report, "rows: {} ({failed} failed)", total.rows.len()).unwrap();
    if spec.directives.contains(&Directive::Nash) {
        writeln!(total.report, "pure equilibria found: {equilibria}").unwrap();
        writeln!(total.report, "max observed poa: {}", ratio_text(worst_poa)).unwrap();
        if check_bound {
            writeln!(
                total.report,
                "opt <= 2 sw + 2 n delta (delta {}): {}",
                fmt_rational(&delta),
                if failed == 0 { "holds" } else { "FAILED" }
            )
            .unwrap();
        }
    }
    if spec.directives.contains(&Directive::Smoothness) {
        writeln!(total.report, "family: {} at lambda {}, mu {}", family.name(), fmt_rational(&lambda), fmt_rational(&mu)).unwrap();
        if let SmoothnessFamily::Direct(_) = family {
            writeln!(total.report, "poa bound: {}", fmt_rational(&poa_bound(lambda, mu)?)).unwrap();
        }
        writeln!(total.report, "worst margin: {}", worst_margin.map_or("none".into(), |x| fmt_rational(&x))).unwrap();
    }
    Ok(total)
}

/// Runs several outputs into one, for multi-step pipelines.
pub fn combine(parts: Vec<CommandOutput>) -> CommandOutput {
    let mut total = CommandOutput {
        passed: true,
        ..CommandOutput::default()
    };
    for p in parts {
        total.absorb(p);
    }
    total
}
