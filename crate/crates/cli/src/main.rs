mod error;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use spjopt::hom::ElemMap;
use spjopt::keys::chase_shuffled;
use spjopt::pipeline::{chased_core, equivalence};
use spjopt::plan::{check_well_behaved, parse_plan_file, PlanFile};
use spjopt::simplex::format_rational;
use spjopt::{
    bag_witness, build_representation, chase, compute_core, evaluate_naive, evaluate_well_behaved,
    intermediate_degree_bound, optimal_cwidth, optimize, output_degree, satisfies_keys, Caps, ChaseResult,
    EvalTrace, KeySet, OpenStructure, Signature, SpjPlan, Structure, ThetaReading,
};

use error::{CliError, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "spjopt", version, about = "Optimize select-project-join plans under unary keys")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(clap::Args, Debug, Clone)]
struct Opts {
    /// Plan file: optional `(relation NAME ARITY)` declarations, then a plan.
    #[arg(long, global = true)]
    plan: Option<PathBuf>,
    /// Second plan file (for `equiv`).
    #[arg(long, global = true)]
    plan2: Option<PathBuf>,
    /// Keys file: one `key REL POS` line per key, 1-based.
    #[arg(long, global = true)]
    keys: Option<PathBuf>,
    /// Structure JSON file.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output file (a directory for `witness`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Read join conditions as written instead of by their closure.
    #[arg(long, global = true)]
    strict_theta: bool,
    /// Universe limit for core computation and width search.
    #[arg(long, global = true, env = "SPJOPT_CAP_UNIVERSE")]
    cap_universe: Option<usize>,
    /// Seed for a randomized chase step order.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print per-subplan cardinalities.
    #[arg(long, global = true)]
    trace: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Accept several unary keys on one relation.
    #[arg(long, global = true)]
    allow_multi_keys: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Dot,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate the inputs.
    Check,
    /// Emit the plan's representation and its AST-shaped decomposition.
    Represent,
    /// Chase a structure (--data) or a plan's representation (--plan).
    Chase,
    /// Core of a structure (--data) or of a plan's chased representation.
    Core,
    /// Output and intermediate degrees of a plan.
    Degree,
    /// Synthesize an equivalent well-behaved plan of minimum intermediate degree.
    Optimize,
    /// Evaluate a plan over --data.
    Evaluate,
    /// Decide equivalence of --plan and --plan2 under --keys.
    Equiv,
    /// Emit lower-bound data families for a plan's optimized core.
    Witness {
        /// Sizes to instantiate, e.g. `--n 1,2,4`.
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4],
              value_parser = clap::value_parser!(u32).range(1..))]
        n: Vec<u32>,
    },
    /// Minimum C-width decomposition of a plan's chased core (or of --data).
    Decompose,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spjopt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let o = &cli.opts;
    let out = match &cli.command {
        Command::Check => cmd_check(o)?,
        Command::Represent => cmd_represent(o)?,
        Command::Chase => cmd_chase(o)?,
        Command::Core => cmd_core(o)?,
        Command::Degree => cmd_degree(o)?,
        Command::Optimize => cmd_optimize(o)?,
        Command::Evaluate => cmd_evaluate(o)?,
        Command::Equiv => cmd_equiv(o)?,
        Command::Witness { n } => cmd_witness(o, n)?,
        Command::Decompose => cmd_decompose(o)?,
    };
    let to_file = !matches!(cli.command, Command::Witness { .. });
    emit(o.out.as_deref().filter(|_| to_file), &out)
}

/// Rendered command output.
enum Output {
    Json(Value),
    Text(String),
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, out: &Output) -> Result<(), CliError> {
    let mut text = match out {
        Output::Json(v) => serde_json::to_string_pretty(v).expect("serializable"),
        Output::Text(t) => t.clone(),
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match path {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// --- inputs ------------------------------------------------------------------

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str, cmd: &str) -> Result<&'a Path, CliError> {
    p.as_deref()
        .ok_or_else(|| CliError::Usage(format!("`{cmd}` needs {flag}")))
}

fn load_plan(path: &Path) -> Result<PlanFile, CliError> {
    parse_plan_file(&read(path)?).map_err(|e| CliError::input(path, e))
}

fn load_keys(o: &Opts) -> Result<KeySet, CliError> {
    match &o.keys {
        None => Ok(KeySet::new()),
        Some(path) => KeySet::parse(&read(path)?).map_err(|e| CliError::input(path, e)),
    }
}

fn load_data(o: &Opts) -> Result<Option<OpenStructure>, CliError> {
    match &o.data {
        None => Ok(None),
        Some(path) => OpenStructure::from_json_str(&read(path)?)
            .map(Some)
            .map_err(|e| CliError::input(path, e)),
    }
}

/// Declarations of the plan files, else the data signature.
fn resolve_signature(plans: &[&PlanFile], data: Option<&Structure>) -> Result<Signature, CliError> {
    let mut declared = Signature::new();
    for p in plans {
        declared = declared.merge(&p.declarations)?;
    }
    match data {
        _ if declared.is_empty() && data.is_none() => Err(CliError::Invalid(
            "no signature: declare `(relation NAME ARITY)` in the plan file or pass --data".into(),
        )),
        None => Ok(declared),
        Some(d) if declared.is_empty() => Ok(d.signature().clone()),
        Some(d) => {
            declared.check_within(d.signature())?;
            Ok(declared)
        }
    }
}

fn caps(o: &Opts) -> Caps {
    o.cap_universe.map(Caps::uniform).unwrap_or_default()
}

fn reading(o: &Opts) -> ThetaReading {
    if o.strict_theta {
        ThetaReading::Strict
    } else {
        ThetaReading::Closure
    }
}

/// Plan, signature and keys for the pipeline commands.
fn pipeline_inputs(o: &Opts, cmd: &str) -> Result<(SpjPlan, Signature, KeySet), CliError> {
    let pf = load_plan(require(&o.plan, "--plan", cmd)?)?;
    let data = load_data(o)?;
    let sig = resolve_signature(&[&pf], data.as_ref().map(|d| &d.structure))?;
    pf.plan.arity(&sig)?;
    let keys = load_keys(o)?;
    keys.validate(&sig)?;
    keys.check_pipeline(o.allow_multi_keys)?;
    Ok((pf.plan, sig, keys))
}

fn no_dot(o: &Opts, cmd: &str) -> Result<(), CliError> {
    if o.format == Format::Dot {
        return Err(CliError::Usage(format!("`{cmd}` has no DOT output")));
    }
    Ok(())
}

fn map_json(h: &ElemMap, src: &Structure, dst: &Structure) -> Value {
    let m: serde_json::Map<String, Value> = h.iter().map(|(&a, &b)| (src.name(a), Value::from(dst.name(b)))).collect();
    Value::Object(m)
}

fn names(s: &Structure, t: &[spjopt::Elem]) -> String {
    format!("({})", s.names_of(t).join(", "))
}

fn structure_text(o: &OpenStructure) -> String {
    let s = &o.structure;
    let mut out = String::new();
    for (rel, t) in s.tuples() {
        let _ = writeln!(out, "{rel}{}", names(s, t));
    }
    let _ = writeln!(out, "tuple {}", names(s, &o.tuple));
    out
}

// --- commands ----------------------------------------------------------------

fn cmd_check(o: &Opts) -> Result<Output, CliError> {
    no_dot(o, "check")?;
    let path = require(&o.plan, "--plan", "check")?;
    let pf = load_plan(path)?;
    let data = load_data(o)?;
    let sig = resolve_signature(&[&pf], data.as_ref().map(|d| &d.structure))?;
    let arity = pf.plan.arity(&sig)?;
    let keys = load_keys(o)?;
    keys.validate(&sig)?;
    let pipeline_ok = keys.check_pipeline(o.allow_multi_keys).err().map(|e| e.to_string());
    let wb = check_well_behaved(&pf.plan, &sig, reading(o))?;
    let satisfied = match &data {
        Some(d) => Some(satisfies_keys(&d.structure, &keys)?),
        None => None,
    };
    let doc = json!({
        "plan": pf.plan.to_string(),
        "arity": arity,
        "operators": pf.plan.size(),
        "relations": pf.plan.relations(),
        "reading": if o.strict_theta { "strict" } else { "closure" },
        "wellBehaved": wb.is_ok(),
        "offendingSubplan": wb.err().map(|q| q.to_string()),
        "keys": keys.to_text().lines().collect::<Vec<_>>(),
        "keyDiagnostic": pipeline_ok,
        "dataSatisfiesKeys": satisfied,
    });
    Ok(match o.format {
        Format::Text => {
            let mut t = format!("plan {}\narity {arity}\nwell-behaved {}\n", doc["plan"].as_str().unwrap(), doc["wellBehaved"]);
            if let Some(q) = doc["offendingSubplan"].as_str() {
                let _ = writeln!(t, "offending {q}");
            }
            if let Some(d) = doc["keyDiagnostic"].as_str() {
                let _ = writeln!(t, "keys {d}");
            }
            Output::Text(t)
        }
        _ => Output::Json(doc),
    })
}

fn cmd_represent(o: &Opts) -> Result<Output, CliError> {
    let pf = load_plan(require(&o.plan, "--plan", "represent")?)?;
    let data = load_data(o)?;
    let sig = resolve_signature(&[&pf], data.as_ref().map(|d| &d.structure))?;
    let (rep, dec) = build_representation(&pf.plan, &sig)?;
    let s = &rep.open.structure;
    let labels = dec.labels();
    Ok(match o.format {
        Format::Dot => Output::Text(dec.td.to_dot(s, Some(&labels))),
        Format::Text => {
            let mut t = structure_text(&rep.open);
            for (v, (beta, label)) in dec.beta.iter().zip(&labels).enumerate() {
                let _ = writeln!(t, "node {v} {} {label}", names(s, beta));
            }
            Output::Text(t)
        }
        Format::Json => Output::Json(json!({
            "representation": rep.open.to_json(),
            "decomposition": dec.td.to_json(s, Some(&labels)),
        })),
    })
}

fn chase_json(input: &Structure, r: &ChaseResult) -> Value {
    json!({
        "result": r.result.to_json(),
        "merge": map_json(&r.merge, input, &r.result.structure),
    })
}

fn cmd_chase(o: &Opts) -> Result<Output, CliError> {
    no_dot(o, "chase")?;
    let keys = load_keys(o)?;
    let input = match (load_data(o)?, &o.plan) {
        (Some(d), _) => d,
        (None, Some(_)) => {
            let (p, sig, _) = pipeline_inputs(o, "chase")?;
            let (rep, _) = build_representation(&p, &sig)?;
            rep.open
        }
        (None, None) => return Err(CliError::Usage("`chase` needs --data or --plan".into())),
    };
    keys.validate(input.structure.signature())?;
    let r = match o.seed {
        Some(seed) => chase_shuffled(&input, &keys, &mut ChaCha8Rng::seed_from_u64(seed)),
        None => chase(&input, &keys),
    };
    Ok(match o.format {
        Format::Text => Output::Text(structure_text(&r.result)),
        _ => Output::Json(chase_json(&input.structure, &r)),
    })
}

fn cmd_core(o: &Opts) -> Result<Output, CliError> {
    no_dot(o, "core")?;
    let caps = caps(o);
    let core = match (&o.plan, load_data(o)?) {
        (Some(_), _) => {
            let (p, sig, keys) = pipeline_inputs(o, "core")?;
            chased_core(&p, &sig, &keys, caps)?
        }
        (None, Some(d)) => {
            if d.structure.len() > caps.core_universe {
                return Err(CliError::Cap(format!(
                    "structure has {} elements, core computation is capped at {}",
                    d.structure.len(),
                    caps.core_universe
                )));
            }
            compute_core(&d)
        }
        (None, None) => return Err(CliError::Usage("`core` needs --plan or --data".into())),
    };
    Ok(match o.format {
        Format::Text => Output::Text(structure_text(&core)),
        _ => Output::Json(core.to_json()),
    })
}

fn cmd_degree(o: &Opts) -> Result<Output, CliError> {
    no_dot(o, "degree")?;
    let (p, sig, keys) = pipeline_inputs(o, "degree")?;
    let out = output_degree(&p, &sig, &keys)?;
    let inter = intermediate_degree_bound(&p, &sig, &keys)?;
    let mut subplans = Vec::new();
    for q in p.subplans() {
        subplans.push((q.to_string(), format_rational(&output_degree(&q, &sig, &keys)?)));
    }
    Ok(match o.format {
        Format::Text => {
            let mut t = format!("output {}\nintermediate {}\n", format_rational(&out), format_rational(&inter));
            for (q, d) in &subplans {
                let _ = writeln!(t, "{d}\t{q}");
            }
            Output::Text(t)
        }
        _ => Output::Json(json!({
            "outputDegree": format_rational(&out),
            "intermediateDegree": format_rational(&inter),
            "wellBehaved": check_well_behaved(&p, &sig, reading(o))?.is_ok(),
            "subplans": subplans.iter().map(|(q, d)| json!({"plan": q, "degree": d})).collect::<Vec<_>>(),
        })),
    })
}

fn cmd_optimize(o: &Opts) -> Result<Output, CliError> {
    let (p, sig, keys) = pipeline_inputs(o, "optimize")?;
    let r = optimize(&p, &sig, &keys, caps(o), o.allow_multi_keys)?;
    if o.strict_theta && !check_well_behaved(&r.plan, &sig, ThetaReading::Strict)?.is_ok() {
        log::warn!("synthesized plan is well-behaved only under the closure reading");
    }
    Ok(match o.format {
        Format::Dot => Output::Text(r.width.td.to_dot(&r.core.structure, None)),
        Format::Text => {
            let mut t = format!("{}\ndegree {}\n", r.plan, format_rational(&r.degree));
            for (name, def) in r.elimination.new_relations() {
                let _ = writeln!(t, "{name} := {def}");
            }
            Output::Text(t)
        }
        Format::Json => Output::Json(r.to_json()),
    })
}

fn trace_rows(trace: &EvalTrace) -> Vec<(String, usize, String)> {
    trace
        .entries
        .iter()
        .map(|e| {
            let path: Vec<String> = e.path.iter().map(ToString::to_string).collect();
            (format!("/{}", path.join("/")), e.cardinality(), e.plan.to_string())
        })
        .collect()
}

fn cmd_evaluate(o: &Opts) -> Result<Output, CliError> {
    no_dot(o, "evaluate")?;
    let pf = load_plan(require(&o.plan, "--plan", "evaluate")?)?;
    let data_path = require(&o.data, "--data", "evaluate")?;
    let data = load_data(o)?.expect("path checked").structure;
    if !pf.declarations.is_empty() {
        pf.declarations.check_within(data.signature()).map_err(|e| CliError::input(data_path, e))?;
    }
    let well_behaved = check_well_behaved(&pf.plan, data.signature(), ThetaReading::Closure)?.is_ok();
    let trace = if well_behaved {
        evaluate_well_behaved(&pf.plan, &data)?
    } else {
        evaluate_naive(&pf.plan, &data)?
    };
    let rows = trace_rows(&trace);
    let output: Vec<Vec<String>> = trace.root().iter().map(|t| data.names_of(t)).collect();
    Ok(match o.format {
        Format::Text => {
            let mut t = String::new();
            for row in &output {
                let _ = writeln!(t, "({})", row.join(", "));
            }
            if o.trace {
                let _ = writeln!(t, "path\tcardinality\tsubplan");
                for (path, card, plan) in &rows {
                    let _ = writeln!(t, "{path}\t{card}\t{plan}");
                }
            }
            let _ = writeln!(t, "max intermediate {}", trace.max_intermediate());
            Output::Text(t)
        }
        _ => {
            let mut doc = json!({
                "evaluator": if well_behaved { "well-behaved" } else { "naive" },
                "output": output,
                "cardinality": trace.root().len(),
                "maxIntermediate": trace.max_intermediate(),
            });
            if o.trace {
                doc["trace"] = rows
                    .iter()
                    .map(|(path, card, plan)| json!({"path": path, "cardinality": card, "subplan": plan}))
                    .collect();
            }
            Output::Json(doc)
        }
    })
}

fn cmd_equiv(o: &Opts) -> Result<Output, CliError> {
    no_dot(o, "equiv")?;
    let first = load_plan(require(&o.plan, "--plan", "equiv")?)?;
    let second = load_plan(require(&o.plan2, "--plan2", "equiv")?)?;
    let data = load_data(o)?;
    let sig = resolve_signature(&[&first, &second], data.as_ref().map(|d| &d.structure))?;
    let keys = load_keys(o)?;
    keys.validate(&sig)?;
    keys.check_pipeline(o.allow_multi_keys)?;
    let eq = equivalence(&first.plan, &second.plan, &sig, &keys)?;
    let (a, b) = (&eq.first.structure, &eq.second.structure);
    Ok(match o.format {
        Format::Text => Output::Text(format!("{}\n", eq.equivalent())),
        _ => Output::Json(json!({
            "equivalent": eq.equivalent(),
            "forward": eq.forward.as_ref().map(|h| map_json(h, a, b)),
            "backward": eq.backward.as_ref().map(|h| map_json(h, b, a)),
        })),
    })
}

/// Chased core of --plan, or --data as given.
fn width_input(o: &Opts, cmd: &str) -> Result<(OpenStructure, KeySet), CliError> {
    if o.plan.is_some() {
        let (p, sig, keys) = pipeline_inputs(o, cmd)?;
        return Ok((chased_core(&p, &sig, &keys, caps(o))?, keys));
    }
    let data = load_data(o)?.ok_or_else(|| CliError::Usage(format!("`{cmd}` needs --plan or --data")))?;
    let keys = load_keys(o)?;
    keys.validate(data.structure.signature())?;
    keys.check_pipeline(o.allow_multi_keys)?;
    Ok((data, keys))
}

fn cmd_decompose(o: &Opts) -> Result<Output, CliError> {
    let (core, keys) = width_input(o, "decompose")?;
    let report = optimal_cwidth(&core, &keys, caps(o).width_universe)?;
    let s = &core.structure;
    Ok(match o.format {
        Format::Dot => Output::Text(report.td.to_dot(s, None)),
        Format::Text => {
            let mut t = format!("width {}\n", format_rational(&report.width));
            for v in 0..report.td.len() {
                let bag: Vec<spjopt::Elem> = report.td.bags[v].iter().copied().collect();
                let _ = writeln!(t, "node {v} {} {}", names(s, &bag), format_rational(&report.bag_numbers[v]));
            }
            Output::Text(t)
        }
        Format::Json => Output::Json(json!({
            "structure": core.to_json(),
            "width": report.to_json(s),
        })),
    })
}

fn cmd_witness(o: &Opts, sizes: &[u32]) -> Result<Output, CliError> {
    no_dot(o, "witness")?;
    let (core, keys) = width_input(o, "witness")?;
    let report = optimal_cwidth(&core, &keys, caps(o).width_universe)?;
    let (node, family) = bag_witness(&core, &keys, &report)?;
    if let Some(dir) = &o.out {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.clone(),
            source,
        })?;
    }
    let s = &core.structure;
    let target: BTreeSet<String> = family.target.iter().map(|&e| s.name(e)).collect();
    let mut instances = Vec::new();
    for &n in sizes {
        let d = family.generate(n as usize)?;
        let mut entry = json!({
            "n": n,
            "maxRelation": d.max_relation_size(),
            "imageLowerBound": family.image_lower_bound(n as usize),
        });
        match &o.out {
            Some(dir) => {
                let path = dir.join(format!("witness-n{n}.json"));
                let text = serde_json::to_string_pretty(&d.to_json()).expect("serializable") + "\n";
                fs::write(&path, text).map_err(|source| CliError::Write { path: path.clone(), source })?;
                entry["file"] = Value::from(path.display().to_string());
            }
            None => entry["structure"] = d.to_json(),
        }
        instances.push(entry);
    }
    let doc = json!({
        "node": node,
        "bag": target,
        "colorNumber": format_rational(family.value()),
        "targetColors": family.target_colors,
        "tupleColors": family.tuple_colors,
        "instances": instances,
    });
    Ok(match o.format {
        Format::Text => {
            let mut t = format!("bag {node} color number {}\n", format_rational(family.value()));
            for e in &instances {
                let _ = writeln!(t, "n {} max relation {} images >= {}", e["n"], e["maxRelation"], e["imageLowerBound"]);
            }
            Output::Text(t)
        }
        _ => Output::Json(doc),
    })
}
