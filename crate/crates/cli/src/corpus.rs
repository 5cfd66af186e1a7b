//! Golden instances and the pipelines that reproduce them. Each pipeline
//! prints expected against measured values and passes only if all agree.

use std::fmt::{Display, Write as _};

use auctionlab_core::engine::{revenue, run_auction, MechanismConfig, MechanismKind};
use auctionlab_core::equilibrium::{is_pure_nash, solve_spe, spe_root_alternatives, SpeSolution};
use auctionlab_core::rational::{fmt_rational, int, ratio, to_f64};
use auctionlab_core::{optimal_welfare, Rational, Valuation};

use crate::commands::{self, describe_solution, CommandOutput, Options};
use crate::error::CliError;
use crate::output::{exact, Row};
use crate::scenario::{parse_scenario, Scenario};

pub const NAMES: [&str; 5] = [
    "intro_3_2",
    "lower_209_171",
    "stability_reconstructed",
    "non_unique",
    "unit_demand_poa2",
];

const WELFARE_CAP: u128 = 10_000_000;

pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "intro_3_2" => include_str!("../corpus/intro_3_2.toml"),
        "lower_209_171" => include_str!("../corpus/lower_209_171.toml"),
        "stability_reconstructed" => include_str!("../corpus/stability_reconstructed.toml"),
        "non_unique" => include_str!("../corpus/non_unique.toml"),
        "unit_demand_poa2" => include_str!("../corpus/unit_demand_poa2.toml"),
        _ => return None,
    })
}

fn unknown(name: &str) -> CliError {
    CliError::Usage(format!("unknown corpus instance `{name}` (known: {})", NAMES.join(", ")))
}

pub fn load(name: &str) -> Result<Scenario, CliError> {
    let text = source(name).ok_or_else(|| unknown(name))?;
    parse_scenario(text, &format!("corpus/{name}.toml"))
}

pub fn reproduce(name: &str, opts: &Options) -> Result<CommandOutput, CliError> {
    let scenario = load(name)?;
    pipeline(name, &scenario, opts)
}

/// Runs the pipeline named by the scenario's `experiment.name` on the
/// scenario's own data.
pub fn reproduce_scenario(scenario: &Scenario, opts: &Options) -> Result<CommandOutput, CliError> {
    let name = scenario
        .experiment
        .as_ref()
        .and_then(|e| e.name.clone())
        .ok_or_else(|| CliError::Invalid("experiment.name: reproduce needs a corpus instance name".into()))?;
    pipeline(&name, scenario, opts)
}

fn pipeline(name: &str, s: &Scenario, opts: &Options) -> Result<CommandOutput, CliError> {
    let mut out = match name {
        "intro_3_2" => intro(s)?,
        "lower_209_171" => lower(s)?,
        "stability_reconstructed" => stability(s)?,
        "non_unique" => non_unique(s)?,
        "unit_demand_poa2" => unit_demand_poa2(s, opts)?,
        _ => return Err(unknown(name)),
    };
    out.report = format!("reproduce {name}\n{}", out.report);
    writeln!(out.report, "result: {}", if out.passed { "all values match" } else { "MISMATCH" }).unwrap();
    Ok(out)
}

/// Expected-versus-measured lines for one pipeline.
struct Checks {
    name: String,
    report: String,
    rows: Vec<Row>,
    passed: bool,
}

impl Checks {
    fn new(name: &str, s: &Scenario) -> Self {
        let mut row = Row::new("reproduce", name, s.config.kind.name(), s.config.n, s.config.m);
        row.family = "summary".into();
        Checks {
            name: name.into(),
            report: String::new(),
            rows: vec![row],
            passed: true,
        }
    }

    fn check(&mut self, label: &str, expected: impl Display, measured: impl Display, ok: bool) {
        writeln!(
            self.report,
            "  {label}: expected {expected}, measured {measured} [{}]",
            if ok { "ok" } else { "MISMATCH" }
        )
        .unwrap();
        self.passed &= ok;
    }

    fn equal(&mut self, label: &str, expected: Rational, measured: Option<Rational>) {
        let shown = measured.map_or("none".into(), |m| fmt_rational(&m));
        self.check(label, fmt_rational(&expected), shown, measured == Some(expected));
    }

    fn note(&mut self, line: impl Display) {
        writeln!(self.report, "{line}").unwrap();
    }

    fn finish(mut self, opt: Rational, welfare: Option<Rational>, ratio: Option<Rational>) -> CommandOutput {
        let row = &mut self.rows[0];
        row.opt = exact(Some(opt));
        row.welfare_min = exact(welfare);
        row.poa = exact(ratio);
        row.poa_decimal = ratio.map(|r| to_f64(&r));
        row.passed = self.passed;
        row.instance = self.name;
        CommandOutput {
            report: self.report,
            rows: self.rows,
            passed: self.passed,
        }
    }
}

/// The four-bidder contrast instance at a given eps.
pub fn intro_scenario(eps: Rational) -> Result<Scenario, CliError> {
    let mut s = load("intro_3_2")?;
    let (one, zero) = (int(1), int(0));
    s.valuations = vec![
        Valuation::unit_demand(vec![eps, zero, zero])?,
        Valuation::unit_demand(vec![one, one, zero])?,
        Valuation::unit_demand(vec![zero, one, one])?,
        Valuation::unit_demand(vec![zero, zero, one - eps])?,
    ];
    for plan in s.profile.iter_mut().skip(1) {
        if let auctionlab_core::strategies::Plan::UntilWin { bid, .. } = plan {
            bid.amount = eps;
        }
    }
    if let Some(p) = s.plans.as_mut() {
        p.step = eps;
    }
    Ok(s)
}

fn intro(s: &Scenario) -> Result<CommandOutput, CliError> {
    let mut c = Checks::new("intro_3_2", s);
    let eps = s.valuations[0].item_values()[0];
    c.note(format!("  eps: {}", fmt_rational(&eps)));

    // items A, C, B one at a time
    let seq = MechanismConfig::with_default_ties(MechanismKind::SequentialItem { order: vec![0, 2, 1] }, s.config.n, s.config.m)?;
    let sol = solve_spe(&seq, &s.valuations, &s.spe_options(None)?)?;
    c.equal("sequential equilibrium welfare", int(2) + eps, sol.welfare);

    let instance = s.instance(None)?;
    let check = is_pure_nash(&instance, &s.profile)?;
    c.check("draft profile is a pure equilibrium", "yes", if check.is_nash { "yes" } else { "no" }, check.is_nash);
    if let Some(d) = check.witness.filter(|_| !check.is_nash) {
        c.note(format!("    bidder {} gains {} with {}", d.bidder, fmt_rational(&d.gain), d.plan));
    }
    let draft = run_auction(&s.config, &s.profile, None)?;
    let draft_welfare = draft.welfare(&s.valuations)?;
    c.equal("draft equilibrium welfare", int(3) - eps, Some(draft_welfare));

    let (_, opt) = optimal_welfare(&s.valuations, WELFARE_CAP)?;
    let contrast = sol.welfare.filter(|w| *w > int(0)).map(|w| draft_welfare / w);
    let slack = int(2) * eps;
    let close = contrast.map_or(false, |r| {
        let gap = r - ratio(3, 2);
        gap <= slack && -gap <= slack
    });
    c.check(
        "draft over sequential welfare",
        format!("3/2 within {}", fmt_rational(&slack)),
        contrast.map_or("none".into(), |r| format!("{} (~{:.4})", fmt_rational(&r), to_f64(&r))),
        close,
    );
    Ok(c.finish(opt, Some(draft_welfare), contrast))
}

fn lower(s: &Scenario) -> Result<CommandOutput, CliError> {
    let mut c = Checks::new("lower_209_171", s);
    let (_, opt) = optimal_welfare(&s.valuations, WELFARE_CAP)?;
    c.equal("optimal welfare", int(209), Some(opt));

    let scripted = run_auction(&s.config, &s.profile, None)?;
    c.equal("scripted profile welfare", int(171), Some(scripted.welfare(&s.valuations)?));
    c.equal("scripted profile revenue", int(51), Some(revenue(&scripted)));

    let sol = solve_spe(&s.config, &s.valuations, &s.spe_options(None)?)?;
    describe_solution(&mut c.report, &sol);
    let first = sol.path.first().map(|st| (st.winner, st.item, st.price, st.supporter));
    c.check(
        "first round",
        "bidder 1 takes item 2 at 51, supported by 0",
        first.map_or("none".into(), |(w, j, p, sup)| {
            format!("bidder {w} takes item {j} at {}, supported by {}", fmt_rational(&p), sup.map_or("-".into(), |x| x.to_string()))
        }),
        first == Some((1, 2, int(51), Some(0))),
    );
    c.equal("equilibrium welfare", int(171), sol.welfare);

    let mut instance = s.instance(None)?;
    instance.include_profile(&sol.policies);
    let check = is_pure_nash(&instance, &sol.policies)?;
    c.check("equilibrium policies are pure nash", "yes", if check.is_nash { "yes" } else { "no" }, check.is_nash);
    c.equal("ratio 209/171", ratio(209, 171), sol.ratio);
    Ok(c.finish(opt, sol.welfare, sol.ratio))
}

fn stability(s: &Scenario) -> Result<CommandOutput, CliError> {
    let mut c = Checks::new("stability_reconstructed", s);
    let (alloc, opt) = optimal_welfare(&s.valuations, WELFARE_CAP)?;
    c.equal("optimal welfare", ratio(31, 10), Some(opt));
    let diagonal = alloc.bundles.iter().enumerate().all(|(i, b)| b.len() == 1 && b.contains(i));
    c.check("optimal allocation", "diagonal", if diagonal { "diagonal" } else { "other" }, diagonal);

    let sols = spe_root_alternatives(&s.config, &s.valuations, &s.spe_options(None)?)?;
    for (k, sol) in sols.iter().enumerate() {
        c.note(format!("  equilibrium #{k}:"));
        describe_solution(&mut c.report, sol);
    }
    let inefficient = !sols.is_empty() && sols.iter().all(|x| x.welfare.map_or(false, |w| w < opt));
    c.check(
        "every root equilibrium misses the optimum",
        "yes",
        format!("{} equilibria, {}", sols.len(), if inefficient { "all inefficient" } else { "not all inefficient" }),
        inefficient,
    );
    let best = sols.iter().filter_map(|x| x.welfare).max();
    let pos = best.and_then(|w| auctionlab_core::equilibrium::welfare_ratio(opt, w));
    c.check(
        "price of stability",
        "> 1",
        pos.map_or("none".into(), |r| fmt_rational(&r)),
        pos.map_or(false, |r| r > int(1)),
    );
    c.equal("price of stability on this grid", ratio(62, 61), pos);
    Ok(c.finish(opt, best, pos))
}

fn non_unique(s: &Scenario) -> Result<CommandOutput, CliError> {
    let mut c = Checks::new("non_unique", s);
    let sols: Vec<SpeSolution> = spe_root_alternatives(&s.config, &s.valuations, &s.spe_options(None)?)?;
    let mut instance = s.instance(None)?;
    for sol in &sols {
        instance.include_profile(&sol.policies);
    }
    let mut first_item_winners = Vec::new();
    let mut all_nash = true;
    for (k, sol) in sols.iter().enumerate() {
        c.note(format!("  equilibrium #{k}:"));
        describe_solution(&mut c.report, sol);
        all_nash &= is_pure_nash(&instance, &sol.policies)?.is_nash;
        if let Some(out) = &sol.outcome {
            let winner = out.allocation.bundles.iter().position(|b| b.contains(0));
            first_item_winners.push((winner, out.item_prices[0]));
        }
    }
    let mut distinct: Vec<usize> = first_item_winners.iter().filter_map(|(w, _)| *w).collect();
    distinct.sort_unstable();
    distinct.dedup();
    c.check(
        "pure equilibria with different winners of A*",
        ">= 2",
        format!("{} (winners {:?})", distinct.len(), distinct),
        distinct.len() >= 2,
    );
    c.check("all are pure nash", "yes", if all_nash { "yes" } else { "no" }, all_nash);
    let prices_ok = first_item_winners.iter().all(|(_, p)| *p == int(1));
    c.check("price of A*", "1 in each", if prices_ok { "1 in each" } else { "other" }, prices_ok);
    let (_, opt) = optimal_welfare(&s.valuations, WELFARE_CAP)?;
    let worst = sols.iter().filter_map(|x| x.welfare).min();
    Ok(c.finish(opt, worst, worst.and_then(|w| auctionlab_core::equilibrium::welfare_ratio(opt, w))))
}

fn unit_demand_poa2(s: &Scenario, opts: &Options) -> Result<CommandOutput, CliError> {
    let mut out = commands::sweep(s, opts)?;
    let delta = opts.grid.or(s.plans.as_ref().map(|p| p.step)).unwrap_or_else(|| int(1));
    let failed = out.rows.iter().filter(|r| !r.passed).count();
    writeln!(
        out.report,
        "  bound opt <= 2 sw + 2 n delta (delta {}): expected every equilibrium, measured {} of {} instances [{}]",
        fmt_rational(&delta),
        out.rows.len() - failed,
        out.rows.len(),
        if failed == 0 { "ok" } else { "MISMATCH" }
    )
    .unwrap();
    Ok(out)
}
