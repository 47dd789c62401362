use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value as Json};

use frontdoor::criteria::{find_frontdoor_sets, is_backdoor_set, is_frontdoor_set};
use frontdoor::docalculus::{
    replay_frontdoor, rule_certificate, search_derivation, Derivation, Direction, IntervAtom, Rule,
};
use frontdoor::probtab::{
    backdoor_estimate, conditional, frontdoor_estimate, parse_model, parse_table, random_cbn, Assignment, Cbn,
    JointTable, Rational, Scalar, FLOAT_TOLERANCE,
};
use frontdoor::{cgraph::parse_node_list, parse_graph, CausalGraph, Error, NodeId, NodeSet};

#[derive(Parser)]
#[command(name = "frontdoor", version, about = "Front-door adjustment and do-calculus toolkit")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Output::Pretty)]
    output: Output,
    /// Exact rational arithmetic instead of f64.
    #[arg(long, global = true)]
    rational: bool,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Json,
    Pretty,
}

#[derive(Subcommand)]
enum Command {
    /// Test (A ⊥⊥ B | C), optionally in a mutilated graph.
    Dsep {
        graph: PathBuf,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value = "")]
        given: String,
        /// Remove edges into these nodes first.
        #[arg(long, default_value = "")]
        overline: String,
        /// Remove edges out of these nodes first.
        #[arg(long, default_value = "")]
        underline: String,
    },
    /// List the simple paths between two nodes.
    Paths {
        graph: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Mark each path open or blocked given this set.
        #[arg(long)]
        given: Option<String>,
    },
    /// Check the front-door criterion, or list front-door sets when --z is omitted.
    Frontdoor {
        graph: PathBuf,
        #[command(flatten)]
        xy: Roles,
        #[arg(long)]
        z: Option<String>,
        /// Largest candidate set when searching.
        #[arg(long, default_value_t = 2)]
        max_size: usize,
    },
    /// Check the back-door criterion.
    Backdoor {
        graph: PathBuf,
        #[command(flatten)]
        xy: Roles,
        #[arg(long)]
        z: String,
    },
    /// Evaluate a do-calculus applicability condition.
    Rule {
        graph: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        rule: u8,
        #[arg(long)]
        y: String,
        #[arg(long, default_value = "")]
        x: String,
        #[arg(long)]
        z: String,
        #[arg(long, default_value = "")]
        w: String,
    },
    /// Derive a hat-free expression for P(y|do(x)).
    Identify {
        graph: PathBuf,
        #[command(flatten)]
        xy: Roles,
        /// Mediator set for the scripted front-door proof.
        #[arg(long, conflicts_with = "search")]
        z: Option<String>,
        /// Breadth-first search instead of the scripted proof.
        #[arg(long)]
        search: bool,
        #[arg(long, default_value_t = 8, requires = "search")]
        depth: usize,
    },
    /// Front-door or back-door estimate from observational data.
    Estimate {
        /// Model or joint-table file.
        file: PathBuf,
        #[arg(long, conflicts_with = "backdoor")]
        frontdoor: bool,
        #[arg(long)]
        backdoor: bool,
        /// Treatment, as NAME=STATE.
        #[arg(long)]
        x: String,
        /// Outcome, as NAME=STATE or NAME for every state.
        #[arg(long)]
        y: String,
        /// Mediator (front-door) or adjustment (back-door) set.
        #[arg(long, default_value = "")]
        z: String,
    },
    /// Interventional distribution by truncated factorization.
    Oracle {
        model: PathBuf,
        #[arg(long = "do")]
        action: String,
        #[arg(long)]
        outcome: String,
    },
    /// Compare the front-door estimate with the oracle on a model and on
    /// random reparameterizations of its graph.
    Verify {
        model: PathBuf,
        #[command(flatten)]
        xy: Roles,
        #[arg(long)]
        z: String,
        #[arg(long, default_value_t = 0)]
        trials: u64,
    },
}

#[derive(Args)]
struct Roles {
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
}

/// Verdict of a command that ran to completion.
enum Verdict {
    Holds,
    Fails,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Verdict::Holds) => ExitCode::SUCCESS,
        Ok(Verdict::Fails) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let negative = matches!(
                e.downcast_ref::<Error>(),
                Some(
                    Error::PositivityViolation(_)
                        | Error::CriterionNotSatisfied(_)
                        | Error::ConditioningOnZero(_)
                        | Error::RuleNotApplicable { .. }
                )
            );
            ExitCode::from(if negative { 1 } else { 2 })
        }
    }
}

fn read(path: &FsPath) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Graph files, or the graph part of a model file.
fn load_graph(path: &FsPath) -> anyhow::Result<CausalGraph> {
    let text = read(path)?;
    match parse_graph(&text) {
        Ok(g) => Ok(g),
        Err(Error::Parse(_)) => match parse_model(&text) {
            Ok(m) => Ok(m.graph().clone()),
            Err(_) => Err(parse_graph(&text).unwrap_err().into()),
        },
        Err(e) => Err(e.into()),
    }
}

fn load_model(path: &FsPath) -> anyhow::Result<Cbn> {
    Ok(parse_model(&read(path)?)?)
}

fn nodes(text: &str) -> anyhow::Result<NodeSet> {
    Ok(parse_node_list(text)?)
}

fn single(text: &str, flag: &str) -> anyhow::Result<NodeId> {
    let s = nodes(text)?;
    match s.len() {
        1 => Ok(s.into_iter().next().unwrap()),
        _ => bail!("--{flag} takes exactly one node"),
    }
}

fn set_text(s: &NodeSet) -> String {
    let names: Vec<&str> = s.iter().map(NodeId::as_str).collect();
    format!("{{{}}}", names.join(","))
}

fn emit(cli: &Cli, value: &impl Serialize, pretty: impl FnOnce() -> String) -> anyhow::Result<()> {
    match cli.output {
        Output::Json => println!("{}", serde_json::to_string_pretty(value)?),
        Output::Pretty => println!("{}", pretty()),
    }
    Ok(())
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Holds
    } else {
        Verdict::Fails
    }
}

fn run(cli: &Cli) -> anyhow::Result<Verdict> {
    match &cli.command {
        Command::Dsep {
            graph,
            a,
            b,
            given,
            overline,
            underline,
        } => {
            let g = load_graph(graph)?;
            let (a, b, c) = (nodes(a)?, nodes(b)?, nodes(given)?);
            let (ov, un) = (nodes(overline)?, nodes(underline)?);
            let m = g.overline(&ov)?.underline(&un)?;
            let separated = m.d_separated(&a, &b, &c)?;
            let witness = if separated { None } else { m.find_open_path(&a, &b, &c, false)? };
            let out = json!({
                "separated": separated,
                "witness": witness,
                "edges": m.edges(),
            });
            emit(cli, &out, || match &witness {
                None => "true".to_owned(),
                Some(p) => format!("false\nopen path: {p}"),
            })?;
            Ok(verdict(separated))
        }

        Command::Paths { graph, from, to, given } => {
            let g = load_graph(graph)?;
            let (a, b) = (single(from, "from")?, single(to, "to")?);
            let given = given.as_deref().map(nodes).transpose()?;
            let mut rows = Vec::new();
            for p in g.all_simple_paths(a.as_str(), b.as_str())? {
                let blocked = match &given {
                    Some(c) => Some(p.is_blocked(&g, c)?),
                    None => None,
                };
                rows.push((p, blocked));
            }
            let out: Vec<Json> = rows
                .iter()
                .map(|(p, blocked)| json!({"path": p, "backdoor": p.is_backdoor(), "blocked": blocked}))
                .collect();
            emit(cli, &out, || {
                let lines: Vec<String> = rows
                    .iter()
                    .map(|(p, blocked)| match blocked {
                        Some(true) => format!("{p}  blocked"),
                        Some(false) => format!("{p}  open"),
                        None => p.to_string(),
                    })
                    .collect();
                if lines.is_empty() {
                    "no paths".to_owned()
                } else {
                    lines.join("\n")
                }
            })?;
            Ok(Verdict::Holds)
        }

        Command::Frontdoor { graph, xy, z, max_size } => {
            let g = load_graph(graph)?;
            let (x, y) = (nodes(&xy.x)?, nodes(&xy.y)?);
            let Some(z) = z else {
                let max = (*max_size).min(g.observed().len());
                let sets = find_frontdoor_sets(&g, &x, &y, max)?;
                emit(cli, &sets, || {
                    if sets.is_empty() {
                        format!("no front-door set of size <= {max}")
                    } else {
                        sets.iter().map(set_text).collect::<Vec<_>>().join("\n")
                    }
                })?;
                return Ok(verdict(!sets.is_empty()));
            };
            let z = nodes(z)?;
            let r = is_frontdoor_set(&g, &x, &y, &z)?;
            emit(cli, &r, || {
                let mark = |ok: bool| if ok { "holds" } else { "fails" };
                let mut s = format!(
                    "front-door criterion: {}\n(i)   every directed path {} → {} passes through {}: {}\n\
                     (ii)  no unblocked back-door path from {} to {}: {}\n\
                     (iii) every back-door path from {} to {} is blocked by {}: {}",
                    if r.satisfied { "satisfied" } else { "not satisfied" },
                    set_text(&x),
                    set_text(&y),
                    set_text(&z),
                    mark(r.cond_i),
                    set_text(&x),
                    set_text(&z),
                    mark(r.cond_ii),
                    set_text(&z),
                    set_text(&y),
                    set_text(&x),
                    mark(r.cond_iii),
                );
                if let Some(w) = &r.witness {
                    s.push_str(&format!("\nwitness: {w}"));
                }
                s
            })?;
            Ok(verdict(r.satisfied))
        }

        Command::Backdoor { graph, xy, z } => {
            let g = load_graph(graph)?;
            let (x, y, z) = (nodes(&xy.x)?, nodes(&xy.y)?, nodes(z)?);
            let r = is_backdoor_set(&g, &x, &y, &z)?;
            emit(cli, &r, || {
                let mut s = format!(
                    "back-door criterion: {}",
                    if r.satisfied { "satisfied" } else { "not satisfied" }
                );
                if let Some(d) = &r.descendant_violation {
                    s.push_str(&format!("\n{d} is a descendant of {}", set_text(&x)));
                }
                if let Some(p) = &r.open_backdoor {
                    s.push_str(&format!("\nopen back-door path: {p}"));
                }
                s
            })?;
            Ok(verdict(r.satisfied))
        }

        Command::Rule { graph, rule, y, x, z, w } => {
            let g = load_graph(graph)?;
            let rule = Rule::from_number(*rule)?;
            let c = rule_certificate(&g, rule, &nodes(y)?, &nodes(x)?, &nodes(z)?, &nodes(w)?)?;
            emit(cli, &c, || format!("{}\n{rule}: {}", c.holds, c.statement()))?;
            Ok(verdict(c.holds))
        }

        Command::Identify {
            graph,
            xy,
            z,
            search,
            depth,
        } => {
            let g = load_graph(graph)?;
            let (x, y) = (nodes(&xy.x)?, nodes(&xy.y)?);
            let d = if *search {
                let goal = IntervAtom::query(&y, &x, &NodeSet::new())?;
                match search_derivation(&g, &goal, *depth)? {
                    Some(d) => d,
                    None => {
                        eprintln!("no derivation found at depth {depth}");
                        return Ok(Verdict::Fails);
                    }
                }
            } else {
                let z = z
                    .as_deref()
                    .ok_or_else(|| anyhow!("identify needs --z for the scripted proof, or --search"))?;
                replay_frontdoor(&g, &x, &y, &nodes(z)?)?
            };
            emit(cli, &d, || render_derivation(&d))?;
            Ok(Verdict::Holds)
        }

        Command::Estimate {
            file,
            frontdoor,
            backdoor,
            x,
            y,
            z,
        } => {
            if !frontdoor && !backdoor {
                bail!("choose --frontdoor or --backdoor");
            }
            let text = read(file)?;
            let table = match parse_model(&text) {
                Ok(m) => m.observational_joint::<Rational>(),
                Err(Error::Parse(_)) => parse_table(&text)?,
                Err(e) => return Err(e.into()),
            };
            let treat = Assignment::parse(x)?;
            let [(tx, xv)]: [(&NodeId, usize); 1] = treat
                .iter()
                .collect::<Vec<_>>()
                .try_into()
                .map_err(|_| anyhow!("--x takes a single NAME=STATE"))?;
            let (ty, y_states) = outcome_states(&table, y)?;
            let z = nodes(z)?;
            let kind = if *frontdoor { "front-door" } else { "back-door" };
            let rows = if cli.rational {
                estimates(&table, *frontdoor, tx, xv, &ty, &y_states, &z)?
            } else {
                estimates(&table.map(Scalar::to_f64), *frontdoor, tx, xv, &ty, &y_states, &z)?
            };
            let out: Vec<Json> = rows
                .iter()
                .map(|(yv, v, f)| json!({"treatment": tx, "treatment_state": xv, "outcome": ty, "outcome_state": yv, "method": kind, "value": v, "float": f}))
                .collect();
            emit(cli, &out, || {
                rows.iter()
                    .map(|(yv, v, _)| format!("P({ty}={yv}|do({tx}={xv})) = {v}"))
                    .collect::<Vec<_>>()
                    .join("\n")
            })?;
            Ok(Verdict::Holds)
        }

        Command::Oracle { model, action, outcome } => {
            let m = load_model(model)?;
            let action = Assignment::parse(action)?;
            let outcome = nodes(outcome)?;
            let rows = if cli.rational {
                oracle_rows::<Rational>(&m, &action, &outcome)?
            } else {
                oracle_rows::<f64>(&m, &action, &outcome)?
            };
            let out: Vec<Json> = rows
                .iter()
                .map(|(a, v, f)| json!({"do": action, "outcome": a, "value": v, "float": f}))
                .collect();
            emit(cli, &out, || {
                rows.iter()
                    .map(|(a, v, _)| format!("P({}|do({})) = {v}", a.to_string().replace(' ', ""), action.to_string().replace(' ', "")))
                    .collect::<Vec<_>>()
                    .join("\n")
            })?;
            Ok(Verdict::Holds)
        }

        Command::Verify { model, xy, z, trials } => {
            let m = load_model(model)?;
            let (x, y) = (single(&xy.x, "x")?, single(&xy.y, "y")?);
            let z = nodes(z)?;
            let report = is_frontdoor_set(m.graph(), &[x.clone()].into(), &[y.clone()].into(), &z)?;
            if !report.satisfied {
                let witness = report.witness.as_ref().map(|p| format!(" (witness {p})")).unwrap_or_default();
                return Err(Error::CriterionNotSatisfied(format!(
                    "{} fails condition {}{witness}",
                    set_text(&z),
                    report.first_failure().unwrap_or(0)
                ))
                .into());
            }
            let v = if cli.rational {
                verify::<Rational>(&m, &x, &y, &z, *trials, cli.seed)?
            } else {
                verify::<f64>(&m, &x, &y, &z, *trials, cli.seed)?
            };
            let ok = v.agreeing == v.models;
            emit(cli, &v, || v.render())?;
            Ok(verdict(ok))
        }
    }
}

fn outcome_states(t: &JointTable<Rational>, y: &str) -> anyhow::Result<(NodeId, Vec<usize>)> {
    if y.contains('=') {
        let a = Assignment::parse(y)?;
        let [(n, s)]: [(&NodeId, usize); 1] = a
            .iter()
            .collect::<Vec<_>>()
            .try_into()
            .map_err(|_| anyhow!("--y takes a single NAME or NAME=STATE"))?;
        Ok((n.clone(), vec![s]))
    } else {
        let n = single(y, "y")?;
        let card = t.cardinality(n.as_str())?;
        Ok((n, (0..card).collect()))
    }
}

fn estimates<T: Scalar>(
    t: &JointTable<T>,
    front: bool,
    x: &NodeId,
    xv: usize,
    y: &NodeId,
    y_states: &[usize],
    z: &NodeSet,
) -> anyhow::Result<Vec<(usize, String, f64)>> {
    y_states
        .iter()
        .map(|&yv| {
            let v = if front {
                frontdoor_estimate(t, x.as_str(), z, y.as_str(), xv, yv)?
            } else {
                backdoor_estimate(t, x.as_str(), y.as_str(), z, xv, yv)?
            };
            Ok((yv, v.render(), v.to_f64()))
        })
        .collect()
}

fn oracle_rows<T: Scalar>(m: &Cbn, action: &Assignment, outcome: &NodeSet) -> anyhow::Result<Vec<(Assignment, String, f64)>> {
    let t: JointTable<T> = m.intervene_oracle(action, outcome)?;
    Ok(t.entries()
        .map(|(states, p)| {
            let a: Assignment = t.variables().iter().map(|(n, _)| n.clone()).zip(states).collect();
            (a, p.render(), p.to_f64())
        })
        .collect())
}

#[derive(Serialize)]
struct Comparison {
    x_state: usize,
    y_state: usize,
    estimate: String,
    oracle: String,
    observational: String,
    deviation: String,
}

#[derive(Serialize)]
struct ModelCheck {
    model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    max_deviation: Option<f64>,
    agrees: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    exact: bool,
    tolerance: f64,
    /// Given model, per (x, y) state pair.
    comparisons: Vec<Comparison>,
    /// Whether the interventional values equal plain P(y|x) on the given model.
    observational_matches: bool,
    models: usize,
    agreeing: usize,
    max_deviation: f64,
    checks: Vec<ModelCheck>,
}

impl VerifyReport {
    fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.comparisons {
            s.push_str(&format!(
                "x={} y={}  front-door {}  oracle {}  P(y|x) {}  deviation {}\n",
                c.x_state, c.y_state, c.estimate, c.oracle, c.observational, c.deviation
            ));
        }
        s.push_str(&format!(
            "observational P(y|x) {} the interventional distribution\n",
            if self.observational_matches { "equals" } else { "differs from" }
        ));
        for c in self.checks.iter().filter(|c| !c.agrees) {
            s.push_str(&format!(
                "{}: {}\n",
                c.model,
                c.error.clone().unwrap_or_else(|| format!("deviation {}", c.max_deviation.unwrap_or(f64::NAN)))
            ));
        }
        let mode = if self.exact { "rational" } else { "float" };
        s.push_str(&format!(
            "{}/{} models agree; max deviation {} ({mode} mode)",
            self.agreeing,
            self.models,
            if self.max_deviation == 0.0 { "0".to_owned() } else { format!("{:.3e}", self.max_deviation) }
        ));
        s
    }
}

struct Deviations<T> {
    rows: Vec<(usize, usize, T, T, T)>,
    max: T,
}

fn compare<T: Scalar>(m: &Cbn, x: &NodeId, y: &NodeId, z: &NodeSet) -> Result<Deviations<T>, Error> {
    let t: JointTable<T> = m.observational_joint();
    let (cx, cy) = (m.cardinality(x.as_str())?, m.cardinality(y.as_str())?);
    let ys: NodeSet = [y.clone()].into();
    let mut rows = Vec::new();
    let mut max = T::zero();
    for xv in 0..cx {
        let oracle: JointTable<T> = m.intervene_oracle(&Assignment::new().with(x.clone(), xv), &ys)?;
        for yv in 0..cy {
            let est = frontdoor_estimate(&t, x.as_str(), z, y.as_str(), xv, yv)?;
            let truth = oracle.probabilities()[yv].clone();
            let obs = conditional(
                &t,
                &Assignment::new().with(y.clone(), yv),
                &Assignment::new().with(x.clone(), xv),
            )?;
            let dev = est.abs_diff(&truth);
            if dev > max {
                max = dev.clone();
            }
            rows.push((xv, yv, est, truth, obs));
        }
    }
    Ok(Deviations { rows, max })
}

fn verify<T: Scalar>(m: &Cbn, x: &NodeId, y: &NodeId, z: &NodeSet, trials: u64, seed: u64) -> anyhow::Result<VerifyReport> {
    let exact = std::any::TypeId::of::<T>() == std::any::TypeId::of::<Rational>();
    let tolerance = if exact { 0.0 } else { FLOAT_TOLERANCE };
    let within = |d: &T| if exact { d.is_zero() } else { d.to_f64() <= tolerance };

    let base = compare::<T>(m, x, y, z)?;
    let comparisons = base
        .rows
        .iter()
        .map(|(xv, yv, est, truth, obs)| Comparison {
            x_state: *xv,
            y_state: *yv,
            estimate: est.render(),
            oracle: truth.render(),
            observational: obs.render(),
            deviation: est.abs_diff(truth).render(),
        })
        .collect();
    let observational_matches = base.rows.iter().all(|(_, _, _, truth, obs)| within(&truth.abs_diff(obs)));

    let mut checks = vec![ModelCheck {
        model: "given model".to_owned(),
        error: None,
        max_deviation: Some(base.max.to_f64()),
        agrees: within(&base.max),
    }];
    let mut max_deviation = base.max.to_f64();
    for i in 0..trials {
        let s = seed.wrapping_add(i);
        let r = random_cbn(m.graph(), m.cardinalities(), s)?;
        let check = match compare::<T>(&r, x, y, z) {
            Ok(d) => {
                max_deviation = max_deviation.max(d.max.to_f64());
                ModelCheck {
                    model: format!("random model (seed {s})"),
                    error: None,
                    max_deviation: Some(d.max.to_f64()),
                    agrees: within(&d.max),
                }
            }
            Err(e) => ModelCheck {
                model: format!("random model (seed {s})"),
                error: Some(e.to_string()),
                max_deviation: None,
                agrees: false,
            },
        };
        checks.push(check);
    }
    Ok(VerifyReport {
        exact,
        tolerance,
        comparisons,
        observational_matches,
        models: checks.len(),
        agreeing: checks.iter().filter(|c| c.agrees).count(),
        max_deviation,
        checks,
    })
}

fn render_derivation(d: &Derivation) -> String {
    let mut s = format!("goal: {}\n", d.goal);
    for (i, step) in d.steps.iter().enumerate() {
        let label = step.label.as_deref().map(|l| format!("{l}: ")).unwrap_or_default();
        let dir = match step.direction {
            Some(Direction::Forward) => " (forward)",
            Some(Direction::Backward) => " (backward)",
            None => "",
        };
        s.push_str(&format!("{}. {label}{}{dir}, moved {}\n", i + 1, step.kind, set_text(&step.moved)));
        s.push_str(&format!("     {}\n   = {}\n", step.before_text, step.after_text));
        for c in &step.certificates {
            let edges: Vec<String> = c.edges.iter().map(|(a, b)| format!("{a}→{b}")).collect();
            s.push_str(&format!("   graph {}: {}\n", c.graph_label(), edges.join(", ")));
            s.push_str(&format!("   certificate {} [{}]\n", c.statement(), if c.holds { "holds" } else { "fails" }));
        }
    }
    s.push_str(&format!("result: {}", d.result_text));
    s
}
