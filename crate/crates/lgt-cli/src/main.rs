//! `lgt`: run, type-check, verify and draw λ_GT programs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lambda_gt::canon::{embed, normalize};
use lambda_gt::dot::{render_expr, render_graph};
use lambda_gt::eval::{eval_with, trace_line, DEFAULT_FUEL};
use lambda_gt::grammar::{generate_set, Grammar};
use lambda_gt::syntax::ast::SRule;
use lambda_gt::syntax::printer::print_type_atom;
use lambda_gt::syntax::{expand_expr, expand_rules, expand_term_notation, parse_goal, parse_program, parse_type_defs, print_graph, type_atom};
use lambda_gt::verifier::{Checker, TypingContext, DEFAULT_DEPTH};
use lambda_gt::{Expr, TypeHead};

#[derive(Parser)]
#[command(name = "lgt", version, about = "Run, type-check and verify graph programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the main expression and print its value.
    Run(Common),
    /// Print the type of the main expression.
    Typecheck(Common),
    /// Check a graph against a type under the file's production rules.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Goal of the form `T : t(X, ...)`.
        #[arg(long)]
        goal: String,
        /// Also compare with the derivations of the grammar up to this depth.
        #[arg(long, value_name = "N", num_args = 0..=1, default_missing_value = "4", value_parser = clap::value_parser!(u64).range(1..))]
        with_oracle: Option<u64>,
    },
    /// Emit Graphviz for the main expression, or for every step with --trace.
    Dot(Common),
}

#[derive(Args)]
struct Common {
    /// Program or grammar file.
    input: PathBuf,
    /// Maximum number of reduction steps.
    #[arg(long, default_value_t = DEFAULT_FUEL as u64, value_parser = clap::value_parser!(u64).range(1..))]
    fuel: u64,
    /// Maximum number of hole decompositions along one proof branch.
    #[arg(long, default_value_t = DEFAULT_DEPTH as u64, value_parser = clap::value_parser!(u64).range(1..))]
    depth: u64,
    /// Print reduction steps or the proof.
    #[arg(long)]
    trace: bool,
    /// Production rules that override those in the input.
    #[arg(long, value_name = "PATH")]
    types: Option<PathBuf>,
}

enum Failure {
    /// Type, verification or runtime error.
    Domain(String),
    /// Usage, parse or I/O error.
    Input(String),
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

struct Loaded {
    grammar: Grammar,
    main: Option<Expr>,
}

fn load(c: &Common) -> Result<Loaded, Failure> {
    let src = read(&c.input)?;
    let prog = parse_program(&src).map_err(|e| Failure::Input(format!("{}:{e}", c.input.display())))?;
    let mut rules = prog.rules;
    if let Some(path) = &c.types {
        let extra = parse_type_defs(&read(path)?).map_err(|e| Failure::Input(format!("{}:{e}", path.display())))?;
        rules = merge_rules(rules, extra, path);
    }
    Ok(Loaded { grammar: expand_rules(&rules), main: prog.main.as_ref().map(expand_expr) })
}

/// Rules of the separate file replace same-named rules of the program.
fn merge_rules(own: Vec<SRule>, extra: Vec<SRule>, path: &Path) -> Vec<SRule> {
    let overridden: std::collections::BTreeSet<_> = extra.iter().map(|r| r.name.clone()).collect();
    let mut warned = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for r in own {
        if overridden.contains(&r.name) {
            if warned.insert(r.name.clone()) {
                eprintln!("warning: type {} is defined in {}, ignoring the program's rules", r.name, path.display());
            }
        } else {
            out.push(r);
        }
    }
    out.extend(extra);
    out
}

fn checker(l: &Loaded, depth: u64) -> Result<Checker, Failure> {
    Checker::new(&l.grammar)
        .map(|c| c.with_depth(depth as usize))
        .map_err(|e| Failure::Domain(e.to_string()))
}

fn main_expr(l: &Loaded) -> Result<&Expr, Failure> {
    l.main.as_ref().ok_or_else(|| Failure::Input("the input has no main expression".into()))
}

fn run(c: &Common) -> Outcome {
    let l = load(c)?;
    let e = main_expr(&l)?;
    let ch = if l.grammar.rules.is_empty() { None } else { Some(checker(&l, c.depth)?) };
    let v = eval_with(e, ch.as_ref(), c.fuel as usize, |rule, e| {
        if c.trace {
            eprintln!("{}", trace_line(rule, e));
        }
    })
    .map_err(|e| Failure::Domain(e.to_string()))?;
    println!("{}", print_graph(&embed(&normalize(&v))));
    Ok(())
}

fn typecheck(c: &Common) -> Outcome {
    let l = load(c)?;
    let e = main_expr(&l)?;
    let ch = checker(&l, c.depth)?;
    let ty = ch.type_of_expr(&TypingContext::new(), e).map_err(|e| Failure::Domain(e.to_string()))?;
    println!("{}", print_type_atom(&ty));
    Ok(())
}

fn verify(c: &Common, goal: &str, oracle: Option<u64>) -> Outcome {
    let l = load(c)?;
    let g = parse_goal(goal).map_err(|e| Failure::Input(format!("goal:{e}")))?;
    let t = expand_term_notation(&g.template);
    let ty = type_atom(&g.ty);
    let ch = checker(&l, c.depth)?;
    let v = ch.check_graph(&t, &ty).map_err(|e| Failure::Domain(e.to_string()))?;
    if v.accepted {
        println!("ACCEPT");
        if c.trace {
            v.trace.iter().for_each(|s| println!("  {s}"));
        }
    } else {
        println!("REJECT");
        if v.depth_exceeded {
            println!("  depth limit {} reached", c.depth);
        }
        if c.trace {
            if let Some(d) = &v.deepest {
                println!("  deepest failing obligation: {d}");
            }
        }
    }
    let mut disagree = false;
    if let (Some(n), TypeHead::Var(_)) = (oracle, &ty.head) {
        if t.has_contexts() || t.has_lambda() {
            println!("oracle: skipped, the goal has graph contexts or abstractions");
        } else {
            let derived = generate_set(&l.grammar, &ty, n as usize).contains(&normalize(&t));
            match (derived, v.accepted) {
                (true, false) => {
                    disagree = true;
                    println!("oracle: DISAGREE, derivable within depth {n} but rejected");
                }
                (false, true) => println!("oracle: not derivable within depth {n} (inconclusive)"),
                _ => println!("oracle: agrees at depth {n}"),
            }
        }
    }
    if disagree {
        Err(Failure::Domain("checker and oracle disagree".into()))
    } else if v.accepted {
        Ok(())
    } else {
        Err(Failure::Domain("goal rejected".into()))
    }
}

fn dot(c: &Common) -> Outcome {
    let l = load(c)?;
    let e = main_expr(&l)?;
    if !c.trace {
        print!("{}", render_expr(e));
        return Ok(());
    }
    let ch = if l.grammar.rules.is_empty() { None } else { Some(checker(&l, c.depth)?) };
    print!("{}", render_expr(e));
    let v = eval_with(e, ch.as_ref(), c.fuel as usize, |_, e| print!("{}", render_expr(e)))
        .map_err(|e| Failure::Domain(e.to_string()))?;
    print!("{}", render_graph(&v));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Run(c) => run(c),
        Command::Typecheck(c) => typecheck(c),
        Command::Verify { common, goal, with_oracle } => verify(common, goal, *with_oracle),
        Command::Dot(c) => dot(c),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
