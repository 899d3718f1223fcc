use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ebs_core::analysis::{
    bounded_equiv, decide_sat_bounded, ebs_oracle, find_bound_bounded, interleaved_sat, search_space_report, spectrum,
    Budget, Verdict,
};
use ebs_core::bmc::{bmc_solve, ind_solve, TransitionSystem};
use ebs_core::edp::{check_classified, classify, edp_bound, EdpVariant};
use ebs_core::formula::to_pcnf_with;
use ebs_core::ground::{bsr_ground_with, export_dimacs, ground_formula, tseitin};
use ebs_core::translate::{spectrum_to_bsr, translate, Mode, SpectrumSpec};
use ebs_core::{parse_problem, Error, Limits, PrenexForm, Problem, Vocabulary};

const OK: u8 = 0;
const NO: u8 = 1;
const UNKNOWN: u8 = 2;
const USAGE: u8 = 3;
const CAP: u8 = 4;

#[derive(Parser)]
#[command(name = "ebs", version, about = "Fragment checks, bounds and bounded model search for first-order sentences")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,
    /// Maximum number of prenex CNF clauses.
    #[arg(long, global = true)]
    max_clauses: Option<usize>,
    /// Maximum number of ground formula nodes.
    #[arg(long, global = true)]
    max_ground: Option<usize>,
    /// Maximum number of translated disjuncts.
    #[arg(long, global = true)]
    max_disjuncts: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Equivalent,
    Equispectral,
}

#[derive(Args)]
struct Input {
    /// Input `.fol` file, or `-` for stdin.
    input: PathBuf,
}

#[derive(Args)]
struct SigmaArgs {
    /// Predicates to preserve; defaults to the file's `@sigma`.
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the prenex conjunctive normal form.
    Normalize(Input),
    /// Print variable and predicate roles.
    Classify(Input),
    /// Check membership in the fragment for a σ.
    CheckEdp {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sigma: SigmaArgs,
        #[arg(long, default_value = "base")]
        variant: String,
    },
    /// Print the witness-size bound.
    Bound {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "base")]
        variant: String,
    },
    /// Translate into an ∃*∀* sentence.
    Translate {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = ModeArg::Equivalent)]
        mode: ModeArg,
        /// Defaults to `@bound`, then to the computed bound.
        #[arg(long)]
        bound: Option<usize>,
    },
    /// Decide satisfiability.
    Sat {
        #[command(flatten)]
        input: Input,
        #[arg(long, conflicts_with = "interleaved")]
        bound: Option<usize>,
        /// Alternate model search and ground refutation.
        #[arg(long)]
        interleaved: bool,
        /// SIZE,DEPTH,STEPS for `--interleaved`.
        #[arg(long, value_delimiter = ',', requires = "interleaved")]
        budget: Option<Vec<u64>>,
    },
    /// List model sizes up to N.
    Spectrum {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        nmax: usize,
    },
    /// Compare two sentences on small structures.
    Equiv {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 4)]
        ncap: usize,
    },
    /// Search every small model for an extensible core.
    EbsOracle {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sigma: SigmaArgs,
        #[arg(long)]
        bound: usize,
        #[arg(long)]
        nmax: usize,
    },
    /// Least bound whose translation agrees on small structures.
    FindBound {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        bmax: usize,
        #[arg(long)]
        ncap: usize,
    },
    /// Build a sentence with a prescribed spectrum.
    SpectrumToBsr {
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long)]
        cofinite_from: Option<usize>,
    },
    /// Unroll a transition system and search for a counterexample.
    Bmc {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        k: usize,
        /// Check the inductive step instead.
        #[arg(long)]
        ind: bool,
    },
    /// Write the propositional encoding in DIMACS form.
    ExportDimacs {
        #[command(flatten)]
        input: Input,
        /// Ground over this universe size instead of the ∃*∀* grounding.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

struct Report {
    code: u8,
    text: String,
    json: Value,
}

fn report(code: u8, text: impl Into<String>, json: Value) -> Result<Report, Error> {
    Ok(Report { code, text: text.into(), json })
}

fn read(path: &PathBuf) -> Result<String, Error> {
    let mut s = String::new();
    let res = if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut s).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| s = t)
    };
    res.map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    Ok(s)
}

fn load(path: &PathBuf) -> Result<Problem, Error> {
    parse_problem(&read(path)?)
}

fn variant(tag: &str) -> Result<EdpVariant, Error> {
    tag.parse()
}

fn sigma_of(p: &Problem, s: &SigmaArgs) -> BTreeSet<String> {
    match &s.sigma {
        Some(v) => v.iter().filter(|x| !x.is_empty()).cloned().collect(),
        None => p.sigma().unwrap_or_default(),
    }
}

fn pcnf(p: &Problem, limits: &Limits) -> Result<PrenexForm, Error> {
    let mut pf = to_pcnf_with(&p.formula, limits)?;
    for v in &p.declared_free {
        if !pf.free_vars.contains(v) {
            pf.free_vars.push(v.clone());
        }
    }
    Ok(pf)
}

fn default_bound(p: &Problem, pf: &PrenexForm) -> Result<usize, Error> {
    if let Some(b) = p.bound() {
        return Ok(b);
    }
    Ok(edp_bound(&classify(&p.vocabulary, pf), EdpVariant::Base)?.b)
}

fn sat_report(out: &ebs_core::analysis::SatOutcome) -> Result<Report, Error> {
    let code = match out.verdict {
        Verdict::Sat(_) => OK,
        Verdict::Unsat => NO,
        Verdict::Unknown => UNKNOWN,
    };
    let mut text = out.verdict.tag().to_string();
    if let Some(m) = out.verdict.model() {
        text.push('\n');
        text.push_str(&m.to_json_string());
    }
    report(code, text, out.to_json())
}

fn run(cli: &Cli) -> Result<Report, Error> {
    let mut limits = Limits::default();
    if let Some(n) = cli.max_clauses {
        limits.pcnf_clauses = n;
        limits.cnf_clauses = n;
    }
    if let Some(n) = cli.max_ground {
        limits.ground_nodes = n;
    }
    if let Some(n) = cli.max_disjuncts {
        limits.disjuncts = n;
    }
    match &cli.command {
        Command::Normalize(i) => {
            let p = load(&i.input)?;
            let pf = pcnf(&p, &limits)?;
            let f = pf.to_formula();
            report(OK, f.to_string(), json!({ "pcnf": f.to_string(), "clauses": pf.matrix.len() }))
        }
        Command::Classify(i) => {
            let p = load(&i.input)?;
            let c = classify(&p.vocabulary, &pcnf(&p, &limits)?);
            let mut text = String::new();
            for (name, vals) in [("V", &c.v), ("EV", &c.ev), ("AV", &c.av), ("EU", &c.eu), ("EUbar", &c.eu_bar)] {
                text.push_str(&format!("{name}: {}\n", vals.join(" ")));
            }
            for (pred, role) in &c.predicates {
                text.push_str(&format!("{pred}: {}\n", role.tag()));
            }
            text.push_str(&format!("k={} m={} r={} q={}", c.k, c.m, c.r, c.q));
            report(OK, text, c.to_json())
        }
        Command::CheckEdp { input, sigma, variant: v } => {
            let p = load(&input.input)?;
            let v = variant(v)?;
            let sigma = sigma_of(&p, sigma);
            let c = classify(&p.vocabulary, &pcnf(&p, &limits)?);
            let check = check_classified(&c, &sigma, v);
            let b = if check.ok { edp_bound(&c, v).ok().map(|r| r.b) } else { None };
            let mut text = format!("{}", if check.ok { "EDP" } else { "not EDP" });
            if let Some(b) = b {
                text.push_str(&format!(" B={b}"));
            }
            for d in &check.diagnostics {
                text.push_str(&format!("\n  {d}"));
            }
            let json = json!({
                "edp": check.ok,
                "B": b,
                "variant": v.tag(),
                "sigma": sigma,
                "diagnostics": check.diagnostics,
            });
            report(if check.ok { OK } else { NO }, text, json)
        }
        Command::Bound { input, variant: v } => {
            let p = load(&input.input)?;
            let c = classify(&p.vocabulary, &pcnf(&p, &limits)?);
            let r = edp_bound(&c, variant(v)?)?;
            let terms: Vec<String> = r.terms.iter().map(|(k, x)| format!("{k}={x}")).collect();
            report(OK, format!("B={} ({})", r.b, terms.join(" ")), r.to_json())
        }
        Command::Translate { input, mode, bound } => {
            let p = load(&input.input)?;
            let pf = pcnf(&p, &limits)?;
            let b = match bound {
                Some(b) => *b,
                None => default_bound(&p, &pf)?,
            };
            let mode = match mode {
                ModeArg::Equivalent => Mode::Equivalent,
                ModeArg::Equispectral => Mode::Equispectral,
            };
            let t = translate(&pf, b, mode, &limits)?;
            let mut json = t.to_json();
            json["B"] = json!(b);
            report(OK, t.bsr.to_formula().to_string(), json)
        }
        Command::Sat { input, bound, interleaved, budget } => {
            let p = load(&input.input)?;
            if *interleaved {
                let mut b = Budget::default();
                if let Some(v) = budget {
                    if v.len() != 3 {
                        return Err(Error::Invalid("--budget takes SIZE,DEPTH,STEPS".into()));
                    }
                    b = Budget { max_size: v[0] as usize, max_depth: v[1] as usize, max_steps: v[2] };
                }
                return sat_report(&interleaved_sat(&p.vocabulary, &p.formula, b)?);
            }
            let b = match bound {
                Some(b) => *b,
                None => default_bound(&p, &pcnf(&p, &limits)?)?,
            };
            let out = decide_sat_bounded(&p.vocabulary, &p.formula, b, &limits)?;
            let mut r = sat_report(&out)?;
            r.json["B"] = json!(b);
            r.json["search_space"] = search_space_report(&p.vocabulary, b);
            Ok(r)
        }
        Command::Spectrum { input, nmax } => {
            let p = load(&input.input)?;
            let s = spectrum(&p.vocabulary, &p.formula, *nmax, &limits)?;
            let text = s.sizes().iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
            report(OK, text, s.to_json())
        }
        Command::Equiv { a, b, ncap } => {
            let (pa, pb) = (load(a)?, load(b)?);
            if pa.vocabulary != pb.vocabulary {
                return Err(Error::Invalid("the two inputs declare different vocabularies".into()));
            }
            let r = bounded_equiv(&pa.vocabulary, &pa.formula, &pb.formula, *ncap, &limits)?;
            let text = match &r.countermodel {
                None => format!("equivalent up to size {ncap}"),
                Some(m) => format!("differ\n{}", m.to_json_string()),
            };
            report(if r.equivalent { OK } else { NO }, text, r.to_json())
        }
        Command::EbsOracle { input, sigma, bound, nmax } => {
            let p = load(&input.input)?;
            let sigma = sigma_of(&p, sigma);
            let v = ebs_oracle(&p.vocabulary, &p.formula, &sigma, *bound, *nmax, &limits)?;
            let text = match &v.failure {
                None => format!("pass ({} models)", v.models_checked),
                Some(f) => format!("fail\nmodel {}\nextension {:?}", f.model.to_json_string(), f.extension),
            };
            report(if v.pass { OK } else { NO }, text, v.to_json())
        }
        Command::FindBound { input, bmax, ncap } => {
            let p = load(&input.input)?;
            match find_bound_bounded(&p.vocabulary, &p.formula, *bmax, *ncap, &limits)? {
                Some(r) => {
                    let json = json!({
                        "B": r.b,
                        "translation": r.translation.to_json(),
                        "note": r.note(),
                    });
                    report(OK, format!("B={} ({})", r.b, r.note()), json)
                }
                None => report(NO, format!("none up to {bmax}"), json!({ "B": null, "nCap": ncap })),
            }
        }
        Command::SpectrumToBsr { sizes, cofinite_from } => {
            let spec = SpectrumSpec { finite: sizes.iter().copied().collect(), cofinite_from: *cofinite_from };
            let vocab = Vocabulary::default();
            let f = spectrum_to_bsr(&spec, &vocab)?;
            report(OK, f.to_string(), json!({ "formula": f.to_string() }))
        }
        Command::Bmc { input, k, ind } => {
            let p = load(&input.input)?;
            let ts = TransitionSystem::from_problem(&p)?;
            let r = if *ind { ind_solve(&ts, *k, &limits)? } else { bmc_solve(&ts, *k, &limits)? };
            let mut out = sat_report(&r.outcome)?;
            out.text = format!("k={} B={} {}", r.k, r.bound.b, out.text);
            out.json = r.to_json();
            Ok(out)
        }
        Command::ExportDimacs { input, size, output } => {
            let p = load(&input.input)?;
            let text = match size {
                Some(n) => {
                    let g = ground_formula(&p.vocabulary, &p.formula, *n, None, &limits)?;
                    let cnf = tseitin(&g.formula, g.table.len() as u32);
                    export_dimacs(&cnf, &g.table)
                }
                None => {
                    let g = bsr_ground_with(&p.vocabulary, &pcnf(&p, &limits)?, &limits)?;
                    export_dimacs(&g.cnf, &g.table)
                }
            };
            match output {
                Some(path) => {
                    std::fs::write(path, &text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
                    report(OK, format!("wrote {}", path.display()), json!({ "path": path.display().to_string() }))
                }
                None => report(OK, text.trim_end(), json!({ "dimacs": text })),
            }
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::CapExceeded { .. } => CAP,
        Error::NotEdp { .. } => NO,
        Error::Internal(_) => UNKNOWN,
        Error::Parse { .. } | Error::Invalid(_) => USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(r) => {
            let out = match cli.format {
                Format::Text => r.text,
                Format::Json => r.json.to_string(),
            };
            let _ = writeln!(std::io::stdout(), "{out}");
            ExitCode::from(r.code)
        }
        Err(e) => {
            match cli.format {
                Format::Text => eprintln!("error: {e}"),
                Format::Json => {
                    let _ = writeln!(std::io::stdout(), "{}", json!({ "error": e.to_string(), "code": exit_code(&e) }));
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
