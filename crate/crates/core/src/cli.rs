//! The `tol` command line.
//!
//! Exit codes: 0 success, 1 a negative answer (invalid triple, rejected
//! proof, failed law), 2 unreadable or malformed input, 3 an evaluation
//! error such as a mass overflow.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::assertions::{parse_assertion, sample_models, Scope};
use crate::lang::{parse_bexpr, parse_program, LangError, Program, State};
use crate::laws::run_laws;
use crate::proofs::{check_proof, elaborate_derived, CheckConfig, Proof, ProofError};
use crate::semantics::{eval_command, EvalConfig, EvalError};
use crate::semiring::{parse_rational, Scheme, Semiring};
use crate::transformers::{
    check_triple, transform, FiniteDomain, Generator, TransformError, TransformKind, TripleConfig,
};
use crate::weighting::Weighting;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SEMANTIC: i32 = 3;

/// Environment variable naming a default configuration file.
pub const CONFIG_ENV: &str = "TOL_CONFIG";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// Settings shared by the subcommands. A JSON file with any subset of these
/// fields may be given with `--config` or the `TOL_CONFIG` variable; flags
/// take precedence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub semiring: String,
    /// `conservative` or `indicative`; must agree with the semiring.
    pub scheme: Option<String>,
    pub unroll_limit: usize,
    pub window: usize,
    pub ncheck: u64,
    /// Reporting tolerance for approximate values.
    pub tolerance: String,
    pub domain: Option<String>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            semiring: "bool".into(),
            scheme: None,
            unroll_limit: 64,
            window: 4,
            ncheck: 16,
            tolerance: "0".into(),
            domain: None,
            format: Format::Text,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn semiring(&self) -> Result<Semiring, CliError> {
        let sr = Semiring::from_name(&self.semiring).map_err(|e| CliError::input(e.to_string()))?;
        if let Some(name) = &self.scheme {
            let wanted = match name.as_str() {
                "conservative" => Scheme::Conservative,
                "indicative" => Scheme::Indicative,
                other => return Err(CliError::input(format!("unknown scheme `{other}`"))),
            };
            if sr.scheme() != Some(wanted) {
                return Err(CliError::input(format!("the {} semiring does not use the {name} scheme", sr.name())));
            }
        }
        Ok(sr)
    }

    pub fn eval(&self) -> Result<EvalConfig, CliError> {
        let mut cfg = EvalConfig::new(self.unroll_limit, self.window).map_err(|e| CliError::input(e.to_string()))?;
        cfg.report_tolerance = parse_rational(&self.tolerance)
            .ok_or_else(|| CliError::input(format!("bad tolerance `{}`", self.tolerance)))?;
        Ok(cfg)
    }

    pub fn domain(&self) -> Result<Option<FiniteDomain>, CliError> {
        self.domain.as_deref().map(|d| FiniteDomain::parse(d).map_err(|e| CliError::input(e.to_string()))).transpose()
    }
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Semantic(String),
}

impl CliError {
    fn input(msg: impl Into<String>) -> CliError {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Semantic(_) => EXIT_SEMANTIC,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Semantic(m) => write!(f, "semantic error: {m}"),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Lang(LangError::Syntax(_)) | EvalError::BadConfig(_) => CliError::Input(e.to_string()),
            _ => CliError::Semantic(e.to_string()),
        }
    }
}

impl From<TransformError> for CliError {
    fn from(e: TransformError) -> Self {
        match e {
            TransformError::Eval(e) => e.into(),
            TransformError::Domain(_) | TransformError::Predicate(..) => CliError::Input(e.to_string()),
            TransformError::GeneratorExhausted(_) => CliError::Semantic(e.to_string()),
        }
    }
}

impl From<ProofError> for CliError {
    fn from(e: ProofError) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "tol", version, about = "Weighted program semantics, outcome triples and proof checking")]
pub struct Cli {
    /// JSON configuration file; defaults to $TOL_CONFIG when set.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Semiring: bool, prob, nat or nat-inf.
    #[arg(long)]
    pub semiring: Option<String>,
    /// Unroll limit per loop entry.
    #[arg(long = "k")]
    pub unroll_limit: Option<usize>,
    /// Cycle-detection window.
    #[arg(long = "w")]
    pub window: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a program from an initial state or weighting.
    Run {
        prog: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
        /// Initial bindings such as `x=1,y=2`; unlisted variables start at 0.
        #[arg(long)]
        init: Option<String>,
        /// Initial weighting such as `{ (x=0): 1/2, (x=1): 1/2 }`.
        #[arg(long, conflicts_with = "init")]
        weighting: Option<String>,
    },
    /// Decide an outcome triple by enumerating or sampling preconditions.
    CheckTriple {
        #[arg(long)]
        pre: String,
        #[arg(long)]
        post: String,
        #[arg(long)]
        prog: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
        /// Finite domain such as `x:0..3, y:{0,2}`.
        #[arg(long)]
        domain: Option<String>,
    },
    /// Check a proof file.
    CheckProof {
        proof: PathBuf,
        /// Also check the proof with derived rules expanded into core rules.
        #[arg(long)]
        expand_derived: bool,
        /// Largest index at which indexed premises are checked.
        #[arg(long)]
        ncheck: Option<u64>,
    },
    /// Compute a predicate transformer over a finite domain.
    Transform {
        /// wlp, wpp, wp or wlpp.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        post: String,
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        prog: PathBuf,
        #[arg(long = "k")]
        unroll_limit: Option<usize>,
    },
    /// Run the algebraic law suites.
    Laws {
        #[arg(long)]
        semiring: Option<String>,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Inspect the shipped corpus.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CorpusAction {
    /// List corpus programs and their proofs.
    List {
        /// Corpus directory; defaults to `./corpus`.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

fn base_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    Ok(cfg)
}

fn apply_eval(cfg: &mut RunConfig, a: &EvalArgs) {
    if let Some(s) = &a.semiring {
        cfg.semiring = s.clone();
    }
    if let Some(k) = a.unroll_limit {
        cfg.unroll_limit = k;
    }
    if let Some(w) = a.window {
        cfg.window = w;
    }
}

fn load_program(path: &Path) -> Result<Program, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    parse_program(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn emit<S: Serialize>(out: &mut dyn Write, format: Format, text: impl fmt::Display, value: S) -> Result<(), CliError> {
    let r = match format {
        Format::Text => writeln!(out, "{text}"),
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&value).expect("outputs serialize")),
    };
    r.map_err(|e| CliError::Semantic(format!("cannot write output: {e}")))
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut cfg = base_config(cli)?;
    match &cli.command {
        Command::Run { prog, eval, init, weighting } => {
            apply_eval(&mut cfg, eval);
            let sr = cfg.semiring()?;
            let program = load_program(prog)?;
            let m = match (init, weighting) {
                (_, Some(w)) => Weighting::parse(sr, w).map_err(|e| CliError::input(e.to_string()))?,
                (i, None) => {
                    let overrides = match i {
                        Some(t) => State::parse_bindings(t).map_err(CliError::input)?,
                        None => State::new(),
                    };
                    Weighting::unit_state(
                        sr,
                        program.state_with(&overrides).map_err(|e| CliError::input(e.to_string()))?,
                    )
                }
            };
            let r = eval_command(&program.body, &m, &cfg.eval()?)?;
            emit(out, cfg.format, &r, r.report())?;
            Ok(EXIT_OK)
        }
        Command::CheckTriple { pre, post, prog, eval, domain } => {
            apply_eval(&mut cfg, eval);
            if domain.is_some() {
                cfg.domain = domain.clone();
            }
            let sr = cfg.semiring()?;
            let program = load_program(prog)?;
            let pre = parse_assertion(pre).map_err(|e| CliError::input(format!("pre: {e}")))?;
            let post = parse_assertion(post).map_err(|e| CliError::input(format!("post: {e}")))?;
            let gen = match cfg.domain()? {
                Some(d) => Generator::Domain(d),
                None => Generator::List(sample_models(&pre, &Scope::new(sr), &program.vars, 8)),
            };
            let tcfg = TripleConfig { eval: cfg.eval()?, ..TripleConfig::default() };
            let v = check_triple(&pre, &program.body, &post, &gen, sr, &tcfg)?;
            let value = json!({ "verdict": v.label(), "detail": v.to_string() });
            emit(out, cfg.format, &v, value)?;
            Ok(if v.is_invalid() { EXIT_NEGATIVE } else { EXIT_OK })
        }
        Command::CheckProof { proof, expand_derived, ncheck } => {
            let p = Proof::load(proof)?;
            let ccfg = CheckConfig { ncheck: ncheck.unwrap_or(cfg.ncheck), ..CheckConfig::default() };
            let r = check_proof(&p, &ccfg);
            let mut text = format!("{r}{} obligation(s)", r.obligations.len());
            let mut value = json!({ "report": r });
            let mut ok = r.is_accepted();
            if *expand_derived {
                let e = check_proof(&p.with_root(elaborate_derived(&p.root)), &ccfg);
                let agree = e.is_accepted() == r.is_accepted();
                text.push_str(&format!("\nexpanded: {}{}", e.root, if agree { "" } else { " (disagrees)" }));
                value["expanded"] = json!(e);
                value["agree"] = json!(agree);
                ok &= agree;
            }
            emit(out, cfg.format, text, value)?;
            Ok(if ok { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Transform { kind, post, domain, prog, unroll_limit } => {
            if domain.is_some() {
                cfg.domain = domain.clone();
            }
            if let Some(k) = unroll_limit {
                cfg.unroll_limit = *k;
            }
            let kind = TransformKind::from_name(kind)
                .ok_or_else(|| CliError::input(format!("unknown transformer `{kind}`")))?;
            let d = cfg.domain()?.ok_or_else(|| CliError::input("transform needs --domain"))?;
            let program = load_program(prog)?;
            let q = parse_bexpr(post).map_err(|e| CliError::input(format!("post: {e}")))?;
            let set = transform(kind, &program.body, &q, &d, &cfg.eval()?)?;
            let show = |ss: &[State]| ss.iter().map(ToString::to_string).collect::<Vec<_>>();
            let mut text = format!("{{{}}}", show(&set.states).join(", "));
            if !set.unknown.is_empty() {
                text.push_str(&format!("\nunresolved: {{{}}}", show(&set.unknown).join(", ")));
            }
            let value = json!({ "kind": kind.name(), "states": show(&set.states), "unknown": show(&set.unknown) });
            emit(out, cfg.format, text, value)?;
            Ok(EXIT_OK)
        }
        Command::Laws { semiring, iters, seed } => {
            if let Some(s) = semiring {
                cfg.semiring = s.clone();
            }
            let sr = cfg.semiring()?;
            let reports = run_laws(sr, *iters, *seed);
            let ok = reports.iter().all(|r| r.passed());
            let mut text = format!("seed {seed}, {iters} iterations");
            for r in &reports {
                text.push_str(&format!("\n{r}"));
            }
            let value = json!({ "seed": seed, "iters": iters, "suites": reports });
            emit(out, cfg.format, text, value)?;
            Ok(if ok { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Corpus { action: CorpusAction::List { dir } } => {
            let dir = dir.clone().unwrap_or_else(|| PathBuf::from("corpus"));
            let entries = corpus_entries(&dir)?;
            let text = entries
                .iter()
                .map(|e| format!("{:<12} {}", e.name, e.proof.as_deref().unwrap_or("-")))
                .collect::<Vec<_>>()
                .join("\n");
            emit(out, cfg.format, text, &entries)?;
            Ok(EXIT_OK)
        }
    }
}

/// A corpus program and its proof file, if one ships.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub program: String,
    pub proof: Option<String>,
}

pub fn corpus_entries(dir: &Path) -> Result<Vec<CorpusEntry>, CliError> {
    let read = std::fs::read_dir(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in read {
        let path = entry.map_err(|e| CliError::input(e.to_string()))?.path();
        if path.extension().is_some_and(|x| x == "prog") {
            let name = path.file_stem().expect("file name").to_string_lossy().to_string();
            let proof = format!("{name}.proof");
            let has_proof = dir.join(&proof).exists();
            out.push(CorpusEntry { program: format!("{name}.prog"), proof: has_proof.then_some(proof), name });
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}
