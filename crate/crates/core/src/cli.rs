//! Command-line front end.
//!
//! Exit codes: 0 success (and PASS for `l_inf`), 1 FAIL, 2 INCONCLUSIVE,
//! 64 usage error, 65 data error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::api::{self, DetectionReport, Evaluation, EvaluationReport, Method, Options};
use crate::error::AuditError;
use crate::linf::{PacConfig, Verdict};
use crate::synth;
use crate::tabular::{read_csv, write_csv, BinningConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

pub const SEED_ENV: &str = "SUBGROUP_AUDIT_SEED";

#[derive(Debug, Parser)]
#[command(name = "subgroup-audit", version, about = "Find and test biased intersectional subgroups in tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find the subgroup with maximum discrepancy
    Detect(DataArgs),
    /// Evaluate a given subgroup with msd or the l_inf test
    Evaluate(EvaluateArgs),
    /// Write the synthetic Race x Age scenario as CSV
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Msd,
    #[value(name = "l_inf")]
    LInf,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV input; give twice for a two-sample comparison
    #[arg(long = "input", value_name = "CSV")]
    inputs: Vec<PathBuf>,
    /// Binary outcome column (single-input mode)
    #[arg(long)]
    target: Option<String>,
    /// Protected columns, comma separated
    #[arg(long, value_delimiter = ',')]
    protected: Vec<String>,
    /// Binning for a continuous column: "col:edge,edge,..." or "col:q4"
    #[arg(long = "bins", value_name = "SPEC")]
    bins: Vec<String>,
    #[arg(long)]
    max_literals: Option<usize>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// Map unseen categories to the missing category instead of failing
    #[arg(long)]
    lenient: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Rule text for msd, e.g. "Race = Blue AND Age = 0-18"
    #[arg(long)]
    rule: Option<String>,
    /// Feature of the l_inf subgroup
    #[arg(long)]
    feature: Option<String>,
    /// Category of the l_inf subgroup
    #[arg(long)]
    value: Option<String>,
    /// Tolerance for the l_inf test
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_subsample: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// Add a Gender column where Gender = F is under-approved
    #[arg(long)]
    with_gender: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Validated invocation; every combination here is one the api accepts.
#[derive(Debug, Clone, PartialEq)]
pub enum CliConfig {
    Detect {
        input: Input,
        protected: Vec<String>,
        options: Options,
        output: Output,
    },
    Evaluate {
        input: Input,
        protected: Vec<String>,
        evaluation: Evaluation,
        options: Options,
        output: Output,
    },
    Synth {
        seed: u64,
        with_gender: bool,
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Single { path: PathBuf, target: String },
    Pair(PathBuf, PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub json: bool,
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct UsageError {
    pub flag: String,
    pub message: String,
    pub hint: String,
}

fn usage(flag: &str, message: impl Into<String>, hint: impl Into<String>) -> UsageError {
    UsageError {
        flag: flag.to_string(),
        message: message.into(),
        hint: hint.into(),
    }
}

fn data_config(d: &DataArgs, allow_pair: bool) -> Result<(Input, Vec<String>, Options, Output), UsageError> {
    let input = match (d.inputs.as_slice(), &d.target) {
        ([], _) => return Err(usage("--input", "--input is required", "pass --input data.csv")),
        ([path], Some(t)) => Input::Single {
            path: path.clone(),
            target: t.clone(),
        },
        ([_], None) => {
            return Err(usage(
                "--target",
                "--target is required with a single --input",
                "name the binary outcome column, e.g. --target Target",
            ))
        }
        ([_, _], Some(_)) => {
            return Err(usage(
                "--target",
                "--target is not used when comparing two inputs",
                "drop --target, or give a single --input",
            ))
        }
        ([_, _], None) if !allow_pair => {
            return Err(usage(
                "--input",
                "the l_inf test needs a single input with a target",
                "give one --input and --target",
            ))
        }
        ([a, b], None) => Input::Pair(a.clone(), b.clone()),
        _ => return Err(usage("--input", "--input given more than twice", "pass one or two --input files")),
    };
    let protected: Vec<String> = d.protected.iter().map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect();
    if protected.is_empty() {
        return Err(usage(
            "--protected",
            "--protected is required",
            "list protected columns, e.g. --protected Race,Age",
        ));
    }
    let mut binning = BinningConfig::new();
    for b in &d.bins {
        binning
            .push_entry(b)
            .map_err(|e| usage("--bins", e.to_string(), "use \"col:18,30,45\" or \"col:q4\""))?;
    }
    for col in binning.columns.keys() {
        if !protected.contains(col) {
            return Err(usage(
                "--bins",
                format!("--bins names {col:?}, which is not in --protected"),
                "bin only protected columns",
            ));
        }
    }
    if let Some(k) = d.max_literals {
        if k > protected.len() {
            return Err(usage(
                "--max-literals",
                format!("--max-literals {k} exceeds the {} protected columns", protected.len()),
                "use a value between 0 and the number of protected columns",
            ));
        }
    }
    let options = Options {
        binning,
        max_literals: d.max_literals,
        seed: d.seed.unwrap_or(0),
        lenient: d.lenient,
        ..Options::default()
    };
    let output = Output {
        json: d.format == Format::Json,
        out: d.out.clone(),
    };
    Ok((input, protected, options, output))
}

fn evaluate_config(e: &EvaluateArgs) -> Result<CliConfig, UsageError> {
    let method = e
        .method
        .ok_or_else(|| usage("--method", "--method is required", "use --method msd or --method l_inf"))?;
    let reject = |present: bool, flag: &str, m: &str| -> Result<(), UsageError> {
        if present {
            Err(usage(flag, format!("{flag} does not apply to --method {m}"), format!("remove {flag}")))
        } else {
            Ok(())
        }
    };
    let evaluation = match method {
        MethodArg::Msd => {
            reject(e.feature.is_some(), "--feature", "msd")?;
            reject(e.value.is_some(), "--value", "msd")?;
            reject(e.delta.is_some(), "--delta", "msd")?;
            reject(e.epsilon.is_some(), "--epsilon", "msd")?;
            reject(e.eta.is_some(), "--eta", "msd")?;
            reject(e.max_subsample.is_some(), "--max-subsample", "msd")?;
            let rule = e.rule.clone().ok_or_else(|| {
                usage("--rule", "--rule is required with --method msd", "e.g. --rule \"Race = Blue AND Age = 0-18\"")
            })?;
            Evaluation::msd(rule)
        }
        MethodArg::LInf => {
            reject(e.rule.is_some(), "--rule", "l_inf")?;
            let feature = e
                .feature
                .clone()
                .ok_or_else(|| usage("--feature", "--feature is required with --method l_inf", "e.g. --feature Gender"))?;
            let value = e
                .value
                .clone()
                .ok_or_else(|| usage("--value", "--value is required with --method l_inf", "e.g. --value F"))?;
            let delta = e
                .delta
                .ok_or_else(|| usage("--delta", "--delta is required with --method l_inf", "e.g. --delta 0.125"))?;
            if !(0.0..=1.0).contains(&delta) {
                return Err(usage("--delta", format!("--delta {delta} is outside [0, 1]"), "the tolerance is a probability gap"));
            }
            Evaluation::linf(feature, value, delta)
        }
    };
    let (input, protected, mut options, output) = data_config(&e.data, method == MethodArg::Msd)?;
    let defaults = PacConfig::default();
    options.epsilon = e.epsilon.unwrap_or(defaults.epsilon);
    options.eta = e.eta.unwrap_or(defaults.eta);
    options.max_subsample = e.max_subsample;
    if let Err(err) = options.pac().validate() {
        let flag = match &err {
            AuditError::InvalidParameter(m) if m.starts_with("epsilon") => "--epsilon",
            AuditError::InvalidParameter(m) if m.starts_with("eta") => "--eta",
            _ => "--max-subsample",
        };
        return Err(usage(flag, err.to_string(), "epsilon in (0, 0.5), eta in (0, 1), max-subsample > 0"));
    }
    Ok(CliConfig::Evaluate {
        input,
        protected,
        evaluation,
        options,
        output,
    })
}

/// Parses and validates argv (including the program name) without touching files.
pub fn parse_config<I, T>(argv: I) -> Result<CliConfig, ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ParseOutcome::Display(e.to_string()),
        _ => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let message = first.trim_start_matches("error: ").to_string();
            ParseOutcome::Usage(usage("", message, "run with --help for usage"))
        }
    })?;
    match cli.command {
        Command::Detect(d) => {
            let (input, protected, options, output) = data_config(&d, true).map_err(ParseOutcome::Usage)?;
            Ok(CliConfig::Detect {
                input,
                protected,
                options,
                output,
            })
        }
        Command::Evaluate(e) => evaluate_config(&e).map_err(ParseOutcome::Usage),
        Command::Synth(s) => Ok(CliConfig::Synth {
            seed: s.seed.unwrap_or(synth::DEFAULT_SEED),
            with_gender: s.with_gender,
            out: s.out,
        }),
    }
}

#[derive(Debug)]
pub enum ParseOutcome {
    /// Help or version text; exit 0.
    Display(String),
    Usage(UsageError),
}

pub fn render_detection(r: &DetectionReport) -> String {
    let mode = match r.mode {
        api::Mode::SingleSample => "single sample (positives vs negatives)",
        api::Mode::TwoSample => "two samples",
    };
    format!(
        "mode:       {mode}, {} vs {} rows\n\
         rule:       {}\n\
         msd:        {:.6}\n\
         signed gap: {:+.6}\n\
         search:     {} nodes explored, {} pruned, {}\n",
        r.sample_sizes.0,
        r.sample_sizes.1,
        r.rule_text,
        r.msd_value,
        r.signed_gap,
        r.search.nodes_explored,
        r.search.nodes_pruned,
        if r.search.optimal { "optimal" } else { "not optimal" },
    )
}

pub fn render_evaluation(r: &EvaluationReport) -> String {
    match r {
        EvaluationReport::Msd(m) => format!(
            "rule:       {}\nmsd:        {:.6}\nsigned gap: {:+.6}\n",
            m.rule_text, m.msd_value, m.signed_gap
        ),
        EvaluationReport::LInf(l) => {
            let v = &l.result;
            format!(
                "subgroup:   {} = {}\n\
                 estimate:   {:.6} (margin {:.6}, {})\n\
                 rows used:  {} subgroup, {} population\n\
                 threshold:  {}\n\
                 verdict:    {}\n",
                l.feature,
                l.value,
                v.estimate,
                v.margin,
                if v.exact { "exact" } else { "subsampled" },
                v.subsample_sizes.0,
                v.subsample_sizes.1,
                v.threshold,
                v.verdict.as_str(),
            )
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl From<AuditError> for Failure {
    fn from(e: AuditError) -> Self {
        Failure {
            code: if e.is_usage() { EXIT_USAGE } else { EXIT_DATA },
            message: e.to_string(),
        }
    }
}

fn emit(text: &str, out: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: EXIT_DATA,
            message: format!("cannot write {}: {e}", path.display()),
        }),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Failure {
            code: EXIT_DATA,
            message: format!("cannot write output: {e}"),
        }),
    }
}

fn execute(cfg: CliConfig, stdout: &mut dyn Write) -> Result<i32, Failure> {
    match cfg {
        CliConfig::Synth { seed, with_gender, out } => {
            let csv = write_csv(&synth::scenario(seed, with_gender))?;
            emit(&csv, &out, stdout)?;
            Ok(EXIT_OK)
        }
        CliConfig::Detect {
            input,
            protected,
            options,
            output,
        } => {
            let report = match &input {
                Input::Single { path, target } => api::most_biased_subgroup_csv(path, target, &protected, &options)?,
                Input::Pair(a, b) => {
                    let x1 = read_csv(a, None, &protected)?;
                    let x2 = read_csv(b, None, &protected)?;
                    api::most_biased_subgroup_two_samples(&x1, &x2, &protected, &options)?
                }
            };
            let text = if output.json {
                report.to_json() + "\n"
            } else {
                render_detection(&report)
            };
            emit(&text, &output.out, stdout)?;
            Ok(EXIT_OK)
        }
        CliConfig::Evaluate {
            input,
            protected,
            evaluation,
            options,
            output,
        } => {
            let report = match &input {
                Input::Single { path, target } => {
                    api::evaluate_biased_subgroup_csv(path, target, &protected, &evaluation, &options)?
                }
                Input::Pair(a, b) => {
                    debug_assert_eq!(evaluation.method, Method::Msd);
                    let x1 = read_csv(a, None, &protected)?;
                    let x2 = read_csv(b, None, &protected)?;
                    let rule = evaluation.rule.as_deref().unwrap_or_default();
                    api::evaluate_biased_subgroup_two_samples(&x1, &x2, &protected, rule, &options)?
                }
            };
            let text = if output.json {
                report.to_json() + "\n"
            } else {
                render_evaluation(&report)
            };
            emit(&text, &output.out, stdout)?;
            Ok(match &report {
                EvaluationReport::LInf(l) => match l.result.verdict {
                    Verdict::Pass => EXIT_OK,
                    Verdict::Fail => EXIT_FAIL,
                    Verdict::Inconclusive => EXIT_INCONCLUSIVE,
                },
                EvaluationReport::Msd(_) => EXIT_OK,
            })
        }
    }
}

/// Runs the tool with explicit output streams and returns the exit code.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_config(argv) {
        Ok(cfg) => cfg,
        Err(ParseOutcome::Display(text)) => {
            let _ = stdout.write_all(text.as_bytes());
            return EXIT_OK;
        }
        Err(ParseOutcome::Usage(u)) => {
            let _ = writeln!(stderr, "error: {}", u.message);
            let _ = writeln!(stderr, "hint: {}", u.hint);
            return EXIT_USAGE;
        }
    };
    match execute(cfg, stdout) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<CliConfig, ParseOutcome> {
        parse_config(std::iter::once("subgroup-audit").chain(args.iter().copied()))
    }

    fn usage_flag(args: &[&str]) -> String {
        match parse(args) {
            Err(ParseOutcome::Usage(u)) => u.flag,
            other => panic!("expected usage error, got {other:?}"),
        }
    }

    #[test]
    fn detect_single_and_pair() {
        let cfg = parse(&["detect", "--input", "a.csv", "--target", "T", "--protected", "Race,Age"]).unwrap();
        match cfg {
            CliConfig::Detect { input, protected, .. } => {
                assert_eq!(input, Input::Single { path: "a.csv".into(), target: "T".into() });
                assert_eq!(protected, vec!["Race", "Age"]);
            }
            other => panic!("{other:?}"),
        }
        let cfg = parse(&["detect", "--input", "a.csv", "--input", "b.csv", "--protected", "Race"]).unwrap();
        assert!(matches!(cfg, CliConfig::Detect { input: Input::Pair(..), .. }));
    }

    #[test]
    fn contradictory_flags() {
        assert_eq!(usage_flag(&["detect", "--protected", "R"]), "--input");
        assert_eq!(usage_flag(&["detect", "--input", "a", "--protected", "R"]), "--target");
        assert_eq!(usage_flag(&["detect", "--input", "a", "--input", "b", "--target", "T", "--protected", "R"]), "--target");
        assert_eq!(usage_flag(&["detect", "--input", "a", "--input", "b", "--input", "c", "--protected", "R"]), "--input");
        assert_eq!(usage_flag(&["detect", "--input", "a", "--target", "T"]), "--protected");
        assert_eq!(usage_flag(&["detect", "--input", "a", "--target", "T", "--protected", "R", "--bins", "Age:1,2"]), "--bins");
        assert_eq!(usage_flag(&["detect", "--input", "a", "--target", "T", "--protected", "R", "--max-literals", "2"]), "--max-literals");
        let base = ["evaluate", "--input", "a", "--target", "T", "--protected", "R"];
        fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
            base.iter().chain(extra).copied().collect()
        }
        assert_eq!(usage_flag(&with(&base, &[])), "--method");
        assert_eq!(usage_flag(&with(&base, &["--method", "msd"])), "--rule");
        assert_eq!(usage_flag(&with(&base, &["--method", "msd", "--rule", "R = a", "--delta", "0.1"])), "--delta");
        assert_eq!(usage_flag(&with(&base, &["--method", "l_inf", "--feature", "R", "--value", "a"])), "--delta");
        assert_eq!(usage_flag(&with(&base, &["--method", "l_inf", "--value", "a", "--delta", "0.1"])), "--feature");
        assert_eq!(usage_flag(&with(&base, &["--method", "l_inf", "--feature", "R", "--value", "a", "--delta", "2"])), "--delta");
        assert_eq!(
            usage_flag(&with(&base, &["--method", "l_inf", "--feature", "R", "--value", "a", "--delta", "0.1", "--epsilon", "0.7"])),
            "--epsilon"
        );
        assert_eq!(usage_flag(&with(&base, &["--method", "l_inf", "--rule", "R = a"])), "--rule");
        let pair = ["evaluate", "--input", "a", "--input", "b", "--protected", "R", "--method", "l_inf", "--feature", "R", "--value", "a", "--delta", "0.1"];
        assert_eq!(usage_flag(&pair), "--input");
    }

    #[test]
    fn unknown_flag_is_usage() {
        assert_eq!(usage_flag(&["detect", "--bogus"]), "");
        assert_eq!(usage_flag(&["detect", "--input", "a", "--target", "T", "--protected", "R", "--format", "xml"]), "");
    }

    #[test]
    fn help_is_not_an_error() {
        assert!(matches!(parse(&["--help"]), Err(ParseOutcome::Display(_))));
    }

    #[test]
    fn bins_parsed() {
        let cfg = parse(&["detect", "--input", "a", "--target", "T", "--protected", "Age,Inc", "--bins", "Age:18,30,45", "--bins", "Inc:q4"]).unwrap();
        let CliConfig::Detect { options, .. } = cfg else { panic!() };
        assert_eq!(options.binning.columns.len(), 2);
    }
}
