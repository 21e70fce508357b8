//! Command-line front end. Mind the conditional: `if P then M else N`
//! selects the *then* branch when P <= 0 (so `\x:R. if x then 0 else x`
//! is ReLU), exactly as in the calculus.
//!
//! Exit codes: 0 success; 1 `check` verdict Fail; 2 usage, parse or type
//! errors; 3 divergence (fuel exhausted) or primitive domain error.
//! `PCFR_FUEL` overrides the default step budget of 1e6.

use std::process::ExitCode;
use std::rc::Rc;

use clap::{Parser as ClapParser, Subcommand, ValueEnum};

use pcfr::ad::{ad_term, ad_type, grad_program, AdMode};
use pcfr::eval::{EvalConfig, EvalOutcome, Strategy};
use pcfr::lab::{
    branch_trace, failure_scan, pretrace_check, stability_probe, ScanReport,
    StabilityVerdict, TraceOutcome, SCHEMA_VERSION,
};
use pcfr::oracle::{compare_at, diff_probe, CompareConfig, DiffProbe, Verdict};
use pcfr::parser::parse;
use pcfr::pretty::{print_term, print_type};
use pcfr::registry::PrimRegistry;
use pcfr::syntax::{Term, TypeExpr};
use pcfr::typecheck::{infer_with_spans, Program, TypingEnv};

#[derive(ClapParser)]
#[command(
    name = "pcfr",
    about = "PCF with reals: evaluation, AD transformations, and an empirical failure lab",
    long_about = "Surface syntax: `\\x:R. t`, `fix f:R -> R. t`, `<t, t>`, `proj i k t`,\n\
        infix + - *, and `if P then M else N`, which selects the THEN branch when\n\
        P <= 0 (so `\\x:R. if x then 0 else x` is ReLU). `-- args: x y` in a file\n\
        pins argument order. PCFR_FUEL overrides the default fuel of 1e6 steps."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Head,
    Cbv,
    Cbn,
    Full,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Head => Strategy::HeadDeterministic,
            StrategyArg::Cbv => Strategy::CallByValue,
            StrategyArg::Cbn => Strategy::CallByName,
            StrategyArg::Full => Strategy::FullNormalize,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fwd,
    Rev,
}

impl From<ModeArg> for AdMode {
    fn from(m: ModeArg) -> AdMode {
        match m {
            ModeArg::Fwd => AdMode::Forward,
            ModeArg::Rev => AdMode::Reverse,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a program at numeric arguments.
    Eval {
        file: String,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        args: Vec<f64>,
        #[arg(long, value_enum, default_value = "head")]
        strategy: StrategyArg,
        #[arg(long)]
        fuel: Option<usize>,
        #[arg(long)]
        fix_cap: Option<usize>,
    },
    /// Print the forward/reverse AD transform of the term.
    Transform {
        file: String,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(short)]
        n: usize,
        #[arg(long)]
        print_type: bool,
    },
    /// Evaluate the AD gradient at a point.
    Grad {
        file: String,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        at: Vec<f64>,
    },
    /// Compare both AD modes against the finite-difference oracle.
    Check {
        file: String,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        at: Vec<f64>,
        #[arg(long)]
        rtol: Option<f64>,
        #[arg(long)]
        atol: Option<f64>,
    },
    /// Monte-Carlo scan of a box for AD failure points.
    Scan {
        file: String,
        #[arg(long = "box", num_args = 2.., allow_negative_numbers = true)]
        box_bounds: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: Option<String>,
        #[arg(long)]
        csv: Option<String>,
    },
    /// Probe trace stability in a ball around a point.
    Stability {
        file: String,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        at: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = 32)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the branch trace of a run.
    Trace {
        file: String,
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        at: Vec<f64>,
    },
    /// Check the pre-trace relation between a simple term and a term.
    Pretrace {
        simple_file: String,
        file: String,
        #[arg(long, default_value_t = 8)]
        fix_bound: usize,
    },
    /// List or run the shipped examples.
    Corpus {
        #[arg(value_parser = ["list", "run"])]
        action: String,
    },
}

struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            message: message.into(),
            code: 2,
        }
    }

    fn divergence(message: impl Into<String>) -> Failure {
        Failure {
            message: message.into(),
            code: 3,
        }
    }
}

fn default_fuel() -> usize {
    std::env::var("PCFR_FUEL")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&f| f >= 1)
        .unwrap_or(1_000_000)
}

struct Loaded {
    prog: Program,
    coarity: usize,
}

/// Reads and typechecks a source file as a program. A closed term of type
/// R -> ... -> R^m is uncurried: fresh argument variables are applied so
/// that `eval corpus/floor.pcfr --args 2.5` works on the lambda form.
fn load_program(path: &str, reg: &PrimRegistry) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{path}: {e}")))?;
    let parsed = parse(&text, reg).map_err(|e| Failure::usage(format!("{path}: {e}")))?;
    let mut prog = match parsed.pragma_args.clone() {
        Some(vars) => Program::new(parsed.term.clone(), vars),
        None => Program::from_term(parsed.term.clone()),
    };
    let mut ty = infer_with_spans(
        &TypingEnv::ground(&prog.vars),
        &prog.term,
        reg,
        &parsed.spans,
    )
    .map_err(|e| Failure::usage(format!("{path}: type error: {e}")))?;
    if prog.vars.is_empty() {
        let mut k = 0usize;
        while let TypeExpr::Arrow(dom, cod) = ty.clone() {
            if *dom != TypeExpr::Real {
                break;
            }
            k += 1;
            let x = format!("x{k}");
            prog = Program::new(
                Term::app(prog.term.clone(), Term::var(&x)),
                prog.vars.iter().cloned().chain([x]).collect(),
            );
            ty = *cod;
        }
    }
    let coarity = match &ty {
        TypeExpr::Real => 1,
        TypeExpr::Product(cs) if cs.iter().all(|c| *c == TypeExpr::Real) => cs.len(),
        other => {
            return Err(Failure::usage(format!(
                "{path}: program must produce reals, found type {other}"
            )))
        }
    };
    Ok(Loaded { prog, coarity })
}

fn want_arity(l: &Loaded, got: usize, what: &str) -> Result<(), Failure> {
    if l.prog.arity() != got {
        return Err(Failure::usage(format!(
            "program takes {} arguments, {what} supplies {got}",
            l.prog.arity()
        )));
    }
    Ok(())
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn fmt_vec(vs: &[f64]) -> String {
    if vs.len() == 1 {
        fmt_num(vs[0])
    } else {
        format!(
            "<{}>",
            vs.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(", ")
        )
    }
}

fn run() -> Result<u8, Failure> {
    let cli = Cli::parse();
    let reg = PrimRegistry::default();
    let base_cfg = EvalConfig {
        fuel: default_fuel(),
        ..Default::default()
    };
    match cli.cmd {
        Cmd::Eval {
            file,
            args,
            strategy,
            fuel,
            fix_cap,
        } => {
            let l = load_program(&file, &reg)?;
            want_arity(&l, args.len(), "--args")?;
            let cfg = EvalConfig {
                fuel: fuel.unwrap_or(base_cfg.fuel),
                fix_cap,
                record_decisions: false,
            };
            let out = pcfr::eval::eval_program_outcome(
                &l.prog,
                &args,
                strategy.into(),
                &cfg,
                &reg,
            );
            match out {
                EvalOutcome::NormalForm { term, .. } => {
                    match pcfr::eval::decode_ground(&term, l.coarity) {
                        Some(vs) => println!("{}", fmt_vec(&vs)),
                        None => println!("{}", print_term(&term)),
                    }
                    Ok(0)
                }
                EvalOutcome::FuelExhausted { steps, .. } => Err(Failure::divergence(
                    format!("divergence: fuel exhausted after {steps} steps"),
                )),
                EvalOutcome::PrimDomainError { symbol, args, .. } => {
                    Err(Failure::divergence(format!(
                        "domain error: {symbol}({})",
                        args.iter().map(|a| fmt_num(*a)).collect::<Vec<_>>().join(", ")
                    )))
                }
                EvalOutcome::Stuck { term, .. } => Err(Failure::usage(format!(
                    "stuck term: {}",
                    print_term(&term)
                ))),
            }
        }
        Cmd::Transform {
            file,
            mode,
            n,
            print_type: with_type,
        } => {
            if n == 0 {
                return Err(Failure::usage("-n must be at least 1"));
            }
            let text = std::fs::read_to_string(&file)
                .map_err(|e| Failure::usage(format!("{file}: {e}")))?;
            let parsed =
                parse(&text, &reg).map_err(|e| Failure::usage(format!("{file}: {e}")))?;
            let vars = pcfr::syntax::free_vars(&parsed.term);
            let ty = infer_with_spans(
                &TypingEnv::ground(&vars),
                &parsed.term,
                &reg,
                &parsed.spans,
            )
            .map_err(|e| Failure::usage(format!("{file}: type error: {e}")))?;
            let d = ad_term(&parsed.term, mode.into(), n, &reg)
                .map_err(|e| Failure::usage(e.to_string()))?;
            println!("{}", print_term(&d));
            if with_type {
                println!("type: {}", print_type(&ad_type(&ty, mode.into(), n)));
            }
            Ok(0)
        }
        Cmd::Grad { file, mode, at } => {
            let l = load_program(&file, &reg)?;
            want_arity(&l, at.len(), "--at")?;
            if l.coarity != 1 {
                return Err(Failure::usage("grad requires a program of coarity 1"));
            }
            let builder = grad_program(&l.prog, mode.into(), &reg)
                .map_err(|e| Failure::usage(e.to_string()))?;
            let g = builder
                .value_at(&at, Strategy::HeadDeterministic, &base_cfg, &reg)
                .map_err(|e| Failure::usage(e.to_string()))?
                .ok_or_else(|| {
                    Failure::divergence("divergence while evaluating the gradient")
                })?;
            println!("{}", fmt_vec(&g));
            let cmp = CompareConfig {
                eval: base_cfg.clone(),
                ..Default::default()
            };
            if let DiffProbe::Differentiable { grad } = diff_probe(&l.prog, &at, &cmp, &reg)
            {
                let off = g
                    .iter()
                    .zip(&grad)
                    .any(|(a, b)| (a - b).abs() > cmp.atol + cmp.rtol * b.abs());
                if off {
                    eprintln!(
                        "warning: finite differences disagree (oracle gradient {})",
                        fmt_vec(&grad)
                    );
                }
            }
            Ok(0)
        }
        Cmd::Check {
            file,
            at,
            rtol,
            atol,
        } => {
            let l = load_program(&file, &reg)?;
            want_arity(&l, at.len(), "--at")?;
            let mut cmp = CompareConfig {
                eval: base_cfg.clone(),
                ..Default::default()
            };
            if let Some(r) = rtol {
                cmp.rtol = r;
            }
            if let Some(a) = atol {
                cmp.atol = a;
            }
            let report = compare_at(&l.prog, &at, &cmp, &reg);
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(if report.verdict == Verdict::Fail { 1 } else { 0 })
        }
        Cmd::Scan {
            file,
            box_bounds,
            samples,
            seed,
            json,
            csv,
        } => {
            let l = load_program(&file, &reg)?;
            if box_bounds.len() != 2 * l.prog.arity() {
                return Err(Failure::usage(format!(
                    "--box needs {} LO HI pairs",
                    l.prog.arity()
                )));
            }
            let pairs: Vec<(f64, f64)> =
                box_bounds.chunks(2).map(|c| (c[0], c[1])).collect();
            if pairs.iter().any(|(lo, hi)| lo >= hi) {
                return Err(Failure::usage("--box bounds must satisfy LO < HI"));
            }
            let cmp = CompareConfig {
                eval: base_cfg.clone(),
                ..Default::default()
            };
            let report = failure_scan(&l.prog, &pairs, samples, seed, &cmp, &reg);
            print_scan_summary(&report);
            if let Some(path) = json {
                std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap())
                    .map_err(|e| Failure::usage(format!("{path}: {e}")))?;
            }
            if let Some(path) = csv {
                std::fs::write(&path, scan_csv(&report))
                    .map_err(|e| Failure::usage(format!("{path}: {e}")))?;
            }
            Ok(0)
        }
        Cmd::Stability {
            file,
            at,
            radius,
            probes,
            seed,
        } => {
            let l = load_program(&file, &reg)?;
            want_arity(&l, at.len(), "--at")?;
            let v = stability_probe(&l.prog, &at, radius, probes, seed, &base_cfg, &reg);
            #[derive(serde::Serialize)]
            #[serde(rename_all = "camelCase")]
            struct Out {
                schema: u32,
                verdict: StabilityVerdict,
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&Out {
                    schema: SCHEMA_VERSION,
                    verdict: v
                })
                .unwrap()
            );
            Ok(0)
        }
        Cmd::Trace { file, at } => {
            let l = load_program(&file, &reg)?;
            want_arity(&l, at.len(), "--at")?;
            let tr = branch_trace(&l.prog, &at, &base_cfg, &reg);
            for e in &tr.events {
                println!("{}", serde_json::to_string(e).unwrap());
            }
            println!("outcome: {:?}", tr.outcome);
            if tr.outcome == TraceOutcome::FuelExhausted {
                return Err(Failure::divergence("divergence: fuel exhausted"));
            }
            Ok(0)
        }
        Cmd::Pretrace {
            simple_file,
            file,
            fix_bound,
        } => {
            let read = |p: &String| -> Result<Rc<Term>, Failure> {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::usage(format!("{p}: {e}")))?;
                Ok(parse(&text, &reg)
                    .map_err(|e| Failure::usage(format!("{p}: {e}")))?
                    .term)
            };
            let t = read(&simple_file)?;
            let m = read(&file)?;
            let r = pretrace_check(&t, &m, fix_bound)
                .map_err(|e| Failure::usage(e.to_string()))?;
            if r.holds {
                println!("yes");
            } else if r.bound_hit {
                println!("no (fix bound {fix_bound} hit; a larger bound may differ)");
            } else {
                println!("no");
            }
            Ok(0)
        }
        Cmd::Corpus { action } => {
            if action == "list" {
                for e in pcfr::corpus::entries() {
                    println!("{}", e.name);
                }
                return Ok(0);
            }
            run_corpus(&reg, &base_cfg)
        }
    }
}

fn print_scan_summary(r: &ScanReport) {
    println!(
        "samples {}  evaluated {}  divergent {}  agree {}  fail {}  outsideDiffDomain {}",
        r.samples, r.evaluated, r.divergent, r.agree, r.fail, r.outside_diff_domain
    );
    println!("failFraction {}", r.fail_fraction);
    for p in &r.fail_points {
        println!("fail at {}", fmt_vec(p));
    }
}

fn scan_csv(r: &ScanReport) -> String {
    let n = r.box_bounds.len();
    let mut out = (1..=n)
        .map(|i| format!("x{i}"))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for p in &r.fail_points {
        out.push_str(
            &p.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","),
        );
        out.push('\n');
    }
    out
}

/// Parses, typechecks and exercises every shipped example; JSON reports
/// are validated against the schema version as they are produced.
fn run_corpus(reg: &PrimRegistry, cfg: &EvalConfig) -> Result<u8, Failure> {
    for e in pcfr::corpus::entries() {
        let parsed = parse(e.source, reg)
            .map_err(|err| Failure::usage(format!("corpus {}: {err}", e.name)))?;
        let vars = pcfr::syntax::free_vars(&parsed.term);
        let ty = infer_with_spans(&TypingEnv::ground(&vars), &parsed.term, reg, &parsed.spans)
            .map_err(|err| Failure::usage(format!("corpus {}: {err}", e.name)))?;
        // Uncurry R arguments to obtain a program, when possible.
        let mut prog = Program::new(parsed.term.clone(), vars);
        let mut t = ty.clone();
        while prog.vars.is_empty() || matches!(&t, TypeExpr::Arrow(d, _) if **d == TypeExpr::Real)
        {
            match t {
                TypeExpr::Arrow(d, c) if *d == TypeExpr::Real => {
                    let x = format!("x{}", prog.arity() + 1);
                    prog = Program::new(
                        Term::app(prog.term.clone(), Term::var(&x)),
                        prog.vars.iter().cloned().chain([x]).collect(),
                    );
                    t = *c;
                }
                _ => break,
            }
        }
        if t != TypeExpr::Real || prog.arity() == 0 {
            println!("{}: type {} (parsed, typechecked)", e.name, ty);
            continue;
        }
        let n = prog.arity();
        let cmp = CompareConfig {
            eval: cfg.clone(),
            ..Default::default()
        };
        let report = failure_scan(
            &prog,
            &vec![(-1.0, 1.0); n],
            200,
            42,
            &cmp,
            reg,
        );
        let v: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        if v["schema"] != serde_json::json!(SCHEMA_VERSION) {
            return Err(Failure::usage(format!(
                "corpus {}: scan report schema drift",
                e.name
            )));
        }
        println!(
            "{}: type {}  scan(200 in [-1,1]^{}) agree {} fail {} outside {} divergent {}",
            e.name, ty, n, report.agree, report.fail, report.outside_diff_domain,
            report.divergent
        );
    }
    Ok(0)
}

fn main() -> ExitCode {
    // Die quietly when stdout is a closed pipe (e.g. piped to head).
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
