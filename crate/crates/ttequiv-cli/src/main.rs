use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ttequiv::automata::{run_dbta, Dbta};
use ttequiv::domain::{domain_automaton, inverse_regular};
use ttequiv::dtop_equiv::{decide_equiv_dtop, gen_hard_instance, Verdict};
use ttequiv::earliest::{canonical, equiv_total_dtop, TotalEquiv};
use ttequiv::format::{
    parse_butt_text, parse_cfg_text, parse_dbta_text, parse_document, parse_mtt_text, write_dbta,
    write_mtt, Document,
};
use ttequiv::lookahead::{eliminate_lookahead_pair, from_bottom_up};
use ttequiv::monadic::{decide_equiv_monadic, reduce_monadic, MonadicVerdict, Reduced};
use ttequiv::mtt::{balance, eval, eval_partial, validate, Mtt};
use ttequiv::parikh::{decide_equiv_fc, parikh_image, search_counterexample, FcVerdict, YdtFc};
use ttequiv::{parse_tree, Error, Path};

#[derive(Parser)]
#[command(
    name = "ttequiv",
    version,
    about = "Evaluate, analyse and compare tree transducers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a file and report structural problems.
    Validate { file: PathBuf },
    /// Run a transducer or automaton on an input tree.
    Run {
        file: PathBuf,
        #[arg(long)]
        input: String,
    },
    /// Evaluate on the input with the subtree at the hole path cut off.
    RunPartial {
        file: PathBuf,
        #[arg(long)]
        input: String,
        #[arg(long)]
        hole: String,
    },
    /// Height and size differences of two partial outputs.
    Balance {
        file1: PathBuf,
        file2: PathBuf,
        #[arg(long)]
        input: String,
        #[arg(long)]
        hole: String,
    },
    /// Print an automaton for the domain.
    Domain { file: PathBuf },
    /// Print an automaton for the inverse image of a tree language.
    Preimage {
        file: PathBuf,
        #[arg(long)]
        automaton: PathBuf,
    },
    /// Print the canonical earliest form of a total top-down transducer.
    Canonical { file: PathBuf },
    /// Decide equivalence of two transducers.
    Equiv {
        #[arg(long, value_enum)]
        class: Class,
        file1: PathBuf,
        file2: PathBuf,
        /// Index-word length bound for monadic macro tree transducers.
        #[arg(long, default_value_t = 10)]
        max_len: usize,
        /// Input language for string transducers (default: all trees).
        #[arg(long)]
        domain: Option<PathBuf>,
    },
    /// Conversions between transducer kinds.
    Convert {
        #[command(subcommand)]
        what: Convert,
    },
    /// Print the HDT0L instance of two monadic macro tree transducers.
    ExportHdt0l { file1: PathBuf, file2: PathBuf },
    /// Print the Parikh image of a grammar as a semilinear set.
    Parikh { grammar: PathBuf },
    /// Build two top-down transducers that are equivalent iff the given partial identity
    /// transducers have disjoint domains.
    GenHard {
        #[arg(required = true)]
        automata: Vec<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Convert {
    /// Bottom-up transducer to a top-down transducer with look-ahead.
    FromButt { file: PathBuf },
    /// Remove look-ahead from a pair of top-down transducers.
    EliminateLa {
        file1: PathBuf,
        file2: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Class {
    TotalDtop,
    Dtop,
    Butt,
    MonadicMtt,
    FcString,
}

/// Failure of a command, split by exit code.
enum Failure {
    Usage(String),
    Budget(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Budget(_) => Failure::Budget(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn read(p: &FsPath) -> Result<String, Failure> {
    fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
}

fn with_file<T>(p: &FsPath, r: ttequiv::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", p.display())),
        b => b,
    })
}

fn load(p: &FsPath) -> Result<Document, Failure> {
    with_file(p, parse_document(&read(p)?))
}

fn load_mtt(p: &FsPath) -> Result<Mtt, Failure> {
    with_file(p, parse_mtt_text(&read(p)?))
}

/// A tree-to-string transducer, either given directly or as the yield of a top-down one.
fn load_string_transducer(p: &FsPath) -> Result<YdtFc, Failure> {
    match load(p)? {
        Document::Ydt(m) => Ok(m),
        Document::Mtt(m) => with_file(p, YdtFc::from_dtop_yield(&m)),
        other => Err(Failure::Usage(format!(
            "{}: expected a tree-to-string transducer, found kind `{}`",
            p.display(),
            other.kind()
        ))),
    }
}

fn write_out(dir: &FsPath, name: &str, text: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
}

fn emit(docs: &[(&str, String)], out_dir: Option<&FsPath>) -> Result<(), Failure> {
    match out_dir {
        Some(dir) => {
            for (name, text) in docs {
                write_out(dir, name, text)?;
                println!("wrote {}", dir.join(name).display());
            }
        }
        None => {
            for (i, (name, text)) in docs.iter().enumerate() {
                if i > 0 {
                    println!();
                }
                println!("# {name}");
                print!("{text}");
            }
        }
    }
    Ok(())
}

fn cmd_validate(file: &FsPath) -> Outcome {
    let doc = load(file)?;
    let problems: Vec<String> = match &doc {
        Document::Mtt(m) => validate(m).iter().map(|d| d.to_string()).collect(),
        Document::Butt(b) => b.validate(),
        _ => Vec::new(),
    };
    if problems.is_empty() {
        println!("ok: {}", doc.kind());
        return Ok(true);
    }
    for p in &problems {
        println!("{p}");
    }
    Err(Failure::Usage(format!(
        "{} problem(s) in {}",
        problems.len(),
        file.display()
    )))
}

fn cmd_run(file: &FsPath, input: &str) -> Outcome {
    let doc = load(file)?;
    match doc {
        Document::Mtt(m) => {
            let s = parse_tree(input, &m.input)?;
            match eval(&m, &s)? {
                Some(t) => println!("{t}"),
                None => {
                    println!("undefined");
                    return Ok(false);
                }
            }
        }
        Document::Butt(b) => {
            let m = from_bottom_up(&b)?;
            let s = parse_tree(input, &m.input)?;
            match eval(&m, &s)? {
                Some(t) => println!("{t}"),
                None => {
                    println!("undefined");
                    return Ok(false);
                }
            }
        }
        Document::Ydt(m) => {
            let s = parse_tree(input, &m.input)?;
            match m.eval(&s)? {
                Some(w) if w.is_empty() => println!("ε"),
                Some(w) => println!("{}", m.word(&w).join(" ")),
                None => {
                    println!("undefined");
                    return Ok(false);
                }
            }
        }
        Document::Dbta(a) => {
            let s = parse_tree(input, &a.alphabet)?;
            match run_dbta(&a, &s)? {
                Some(q) if a.finals.contains(&q) => println!("accepted in state {}", a.states[q]),
                Some(q) => {
                    println!("rejected in state {}", a.states[q]);
                    return Ok(false);
                }
                None => {
                    println!("rejected (no transition)");
                    return Ok(false);
                }
            }
        }
        other => {
            return Err(Failure::Usage(format!(
                "cannot run a file of kind `{}`",
                other.kind()
            )));
        }
    }
    Ok(true)
}

fn cmd_run_partial(file: &FsPath, input: &str, hole: &str) -> Outcome {
    let m = load_mtt(file)?;
    let s = parse_tree(input, &m.input)?;
    let u = Path::parse(hole)?;
    println!("{}", eval_partial(&m, &s, &u)?);
    Ok(true)
}

fn cmd_balance(f1: &FsPath, f2: &FsPath, input: &str, hole: &str) -> Outcome {
    let m1 = load_mtt(f1)?;
    let m2 = load_mtt(f2)?;
    let s = parse_tree(input, &m1.input)?;
    let u = Path::parse(hole)?;
    let (h, size) = balance(&m1, &m2, &s, &u)?;
    println!("h-balance: {h}");
    println!("s-balance: {size}");
    Ok(true)
}

fn cmd_domain(file: &FsPath) -> Outcome {
    let a = match load(file)? {
        Document::Mtt(m) => domain_automaton(&m)?,
        Document::Butt(b) => domain_automaton(&from_bottom_up(&b)?)?,
        Document::Ydt(m) => m.domain()?,
        other => {
            return Err(Failure::Usage(format!(
                "kind `{}` has no domain",
                other.kind()
            )))
        }
    };
    print!("{}", write_dbta(&a));
    Ok(true)
}

fn cmd_preimage(file: &FsPath, automaton: &FsPath) -> Outcome {
    let m = load_mtt(file)?;
    let b = with_file(automaton, parse_dbta_text(&read(automaton)?))?;
    print!("{}", write_dbta(&inverse_regular(&m, &b)?));
    Ok(true)
}

fn cmd_canonical(file: &FsPath) -> Outcome {
    let m = load_mtt(file)?;
    let c = canonical(&m)?;
    let axiom = c.axiom.to_tree();
    println!("# axiom: {axiom}");
    print!("{}", write_mtt(&c.to_dtop()));
    Ok(true)
}

fn report_witness(what: &str, t: &impl std::fmt::Display) -> Outcome {
    println!("not equivalent ({what}); witness: {t}");
    Ok(false)
}

fn cmd_equiv(
    class: Class,
    f1: &FsPath,
    f2: &FsPath,
    max_len: usize,
    domain: Option<&FsPath>,
) -> Outcome {
    match class {
        Class::TotalDtop => {
            let (m1, m2) = (load_mtt(f1)?, load_mtt(f2)?);
            match equiv_total_dtop(&m1, &m2)? {
                TotalEquiv::Equal => {
                    println!(
                        "equivalent; canonical form: {} rules",
                        canonical(&m1)?.rule_count()
                    );
                    Ok(true)
                }
                TotalEquiv::NotEqual(t) => report_witness("outputs differ", &t),
            }
        }
        Class::Dtop | Class::Butt => {
            let (m1, m2) = match class {
                Class::Butt => {
                    let b1 = with_file(f1, parse_butt_text(&read(f1)?))?;
                    let b2 = with_file(f2, parse_butt_text(&read(f2)?))?;
                    (from_bottom_up(&b1)?, from_bottom_up(&b2)?)
                }
                _ => (load_mtt(f1)?, load_mtt(f2)?),
            };
            match decide_equiv_dtop(&m1, &m2)? {
                Verdict::Equivalent => {
                    println!("equivalent");
                    Ok(true)
                }
                Verdict::DomainMismatch(t) => report_witness("domains differ", &t),
                Verdict::OutputMismatch(t) => report_witness("outputs differ", &t),
            }
        }
        Class::MonadicMtt => {
            let (m1, m2) = (load_mtt(f1)?, load_mtt(f2)?);
            match decide_equiv_monadic(&m1, &m2, max_len)? {
                MonadicVerdict::NoCounterexampleUpTo(n) => {
                    println!("no counterexample up to index length {n}");
                    Ok(true)
                }
                MonadicVerdict::NotEquivalent(t) => report_witness("outputs differ", &t),
                MonadicVerdict::DomainMismatch(t) => report_witness("domains differ", &t),
            }
        }
        Class::FcString => {
            let (m1, m2) = (load_string_transducer(f1)?, load_string_transducer(f2)?);
            let d = match domain {
                Some(p) => with_file(p, parse_dbta_text(&read(p)?))?,
                None => Dbta::universal(m1.input.clone()),
            };
            match decide_equiv_fc(&m1, &m2, &d)? {
                FcVerdict::Equivalent => {
                    println!("equivalent");
                    Ok(true)
                }
                FcVerdict::DomainMismatch(t) => report_witness("domains differ", &t),
                FcVerdict::NotEquivalent { a, b, .. } => {
                    match search_counterexample(&m1, &m2, &d, 8, 200_000)? {
                        Some(t) => println!("not equivalent (`{a}` and `{b}` can disagree); witness: {t}"),
                        None => println!("not equivalent (`{a}` and `{b}` can disagree); no witness found up to height 8"),
                    }
                    Ok(false)
                }
            }
        }
    }
}

fn cmd_convert(what: &Convert) -> Outcome {
    match what {
        Convert::FromButt { file } => {
            let b = with_file(file, parse_butt_text(&read(file)?))?;
            print!("{}", write_mtt(&from_bottom_up(&b)?));
        }
        Convert::EliminateLa {
            file1,
            file2,
            out_dir,
        } => {
            let (m1, m2) = (load_mtt(file1)?, load_mtt(file2)?);
            let el = eliminate_lookahead_pair(&m1, &m2)?;
            emit(
                &[
                    ("n1.tt", write_mtt(&el.n1)),
                    ("n2.tt", write_mtt(&el.n2)),
                    ("e.tt", write_dbta(&el.e)),
                ],
                out_dir.as_deref(),
            )?;
        }
    }
    Ok(true)
}

fn cmd_export(f1: &FsPath, f2: &FsPath) -> Outcome {
    let (m1, m2) = (load_mtt(f1)?, load_mtt(f2)?);
    match reduce_monadic(&m1, &m2)? {
        Reduced::DomainMismatch(t) => report_witness("domains differ", &t),
        Reduced::Instance(r) => {
            print!("{}", r.instance);
            Ok(true)
        }
    }
}

fn cmd_parikh(grammar: &FsPath) -> Outcome {
    let g = with_file(grammar, parse_cfg_text(&read(grammar)?))?;
    print!("{}", parikh_image(&g)?);
    Ok(true)
}

fn cmd_gen_hard(automata: &[PathBuf], out_dir: Option<&FsPath>) -> Outcome {
    let ms = automata
        .iter()
        .map(|p| load_mtt(p))
        .collect::<Result<Vec<_>, _>>()?;
    let (m1, m2) = gen_hard_instance(&ms)?;
    emit(
        &[("m1.tt", write_mtt(&m1)), ("m2.tt", write_mtt(&m2))],
        out_dir,
    )?;
    Ok(true)
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Validate { file } => cmd_validate(file),
        Command::Run { file, input } => cmd_run(file, input),
        Command::RunPartial { file, input, hole } => cmd_run_partial(file, input, hole),
        Command::Balance {
            file1,
            file2,
            input,
            hole,
        } => cmd_balance(file1, file2, input, hole),
        Command::Domain { file } => cmd_domain(file),
        Command::Preimage { file, automaton } => cmd_preimage(file, automaton),
        Command::Canonical { file } => cmd_canonical(file),
        Command::Equiv {
            class,
            file1,
            file2,
            max_len,
            domain,
        } => cmd_equiv(*class, file1, file2, *max_len, domain.as_deref()),
        Command::Convert { what } => cmd_convert(what),
        Command::ExportHdt0l { file1, file2 } => cmd_export(file1, file2),
        Command::Parikh { grammar } => cmd_parikh(grammar),
        Command::GenHard { automata, out_dir } => cmd_gen_hard(automata, out_dir.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Budget(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
