//! Argument parsing and the five subcommands.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use xfvar::algebra::{
    measure_from_totals, measure_validate, ExplanationMeasure, Provenance, TotalsTable,
};
use xfvar::anova::{
    exact_measure, hoeffding_decompose, indices_from_decomposition, DiscreteDomain, ExactPairs,
};
use xfvar::distribution::Marginal;
use xfvar::fit::{fit_model, DagConfig, Dataset, FitConfig, FitMethod};
use xfvar::pickfreeze::EstimatorConfig;
use xfvar::scm::{model_from_json, model_to_json, Mechanism, ParentFn, ScmModel};
use xfvar::sensitivity::{builtin, builtin_names, estimate_measure, IndependentSampler};
use xfvar::subset::{self, Mask};

use crate::error::{CliError, INPUT, NOT_REDUCIBLE};
use crate::report::{RunReport, Table};
use crate::venn;

/// Tolerance of the internal cross-check between exact constructions.
pub const ORACLE_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "xfvar",
    version,
    about = "Counterfactual explainability measures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure of a function of independent inputs.
    Gsa(GsaArgs),
    /// Counterfactual measure of a causal model's outcome.
    Counterfactual(CounterfactualArgs),
    /// Fit a causal model to a CSV file.
    Fit(FitArgs),
    /// Exact measure of a model on a finite domain.
    Oracle(OracleArgs),
    /// Venn diagram of a report.
    Venn(VennArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
    #[arg(long, default_value_t = 12)]
    pub max_vars: usize,
    /// Clip negative atoms at zero and renormalize.
    #[arg(long)]
    pub clip_atoms: bool,
}

impl McArgs {
    fn config(&self) -> EstimatorConfig {
        EstimatorConfig {
            batches: self.batches,
            max_vars: self.max_vars,
            ..EstimatorConfig::new(self.samples, self.seed)
        }
    }
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["func", "model"]))]
pub struct GsaArgs {
    /// Built-in test function.
    #[arg(long)]
    pub func: Option<String>,
    /// Model with independent roots and a deterministic outcome.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CounterfactualArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub mc: McArgs,
    /// Comma-separated nodes; prints the one total with its standard error.
    #[arg(long)]
    pub subset: Option<String>,
    /// Leave the outcome node out of the measure's variables.
    #[arg(long)]
    pub exclude_outcome: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    QuantileGrid,
    AdditiveEmpirical,
    HeteroGaussian,
}

impl From<MethodArg> for FitMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::QuantileGrid => FitMethod::QuantileGrid,
            MethodArg::AdditiveEmpirical => FitMethod::AdditiveEmpirical,
            MethodArg::HeteroGaussian => FitMethod::HeteroGaussian,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON graph description: nodes with parents, outcome, categorical columns.
    #[arg(long)]
    pub dag: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::QuantileGrid)]
    pub method: MethodArg,
    /// Number of quantile levels `(2i+1)/2L`, `i < L`.
    #[arg(long, default_value_t = 50)]
    pub levels: usize,
    #[arg(long, default_value_t = 20)]
    pub min_cell: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 2 for cross-fitted residuals, 1 for in-sample.
    #[arg(long, default_value_t = 2)]
    pub folds: usize,
    /// Equal-frequency bins for continuous parents.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Numeric parents with at most this many distinct values are discrete.
    #[arg(long, default_value_t = 20)]
    pub max_discrete: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["out", "ascii"]))]
pub struct VennArgs {
    #[arg(long)]
    pub report: PathBuf,
    /// SVG output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a region table instead.
    #[arg(long)]
    pub ascii: bool,
}

/// Parses `args` (program name first) and runs the command, writing
/// normal output to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                write!(stdout, "{e}").map_err(|e| CliError::internal(e.to_string()))?;
                return Ok(());
            }
            let text = e.to_string();
            let message: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect();
            return Err(CliError::input(
                message.join(" ").trim_start_matches("error: ").to_string(),
            ));
        }
    };
    configure_threads()?;
    match cli.command {
        Command::Gsa(a) => cmd_gsa(&a, stdout),
        Command::Counterfactual(a) => cmd_counterfactual(&a, stdout),
        Command::Fit(a) => cmd_fit(&a, stdout),
        Command::Oracle(a) => cmd_oracle(&a, stdout),
        Command::Venn(a) => cmd_venn(&a, stdout),
    }
}

/// `XFVAR_THREADS` sizes the worker pool; unset or 0 leaves it automatic.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("XFVAR_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::input(format!(
            "XFVAR_THREADS must be a non-negative integer, got `{raw}`"
        ))
    })?;
    if n > 0 {
        // A pool built earlier in the same process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn emit(stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::internal(format!("writing output: {e}")))
}

/// Writes the report to `--out` as JSON, or to stdout in `format`.
fn deliver(
    report: &RunReport,
    out: Option<&Path>,
    format: Format,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    match out {
        Some(path) => {
            write_file(path, &report.to_json())?;
            if format == Format::Table {
                emit(stdout, &report.to_table())?;
            }
            Ok(())
        }
        None => match format {
            Format::Json => emit(stdout, &report.to_json()),
            Format::Table => emit(stdout, &report.to_table()),
        },
    }
}

pub fn load_model(path: &Path) -> Result<ScmModel, CliError> {
    Ok(model_from_json(&read(path)?)?)
}

/// Clipping, then a validation warning at three times the largest atom
/// standard error.
fn finish_mc(m: ExplanationMeasure<f64>, clip: bool) -> (ExplanationMeasure<f64>, Vec<String>) {
    let mut warnings = Vec::new();
    let m = if clip {
        warnings.push("negative atoms clipped at 0 and the measure renormalized".to_string());
        m.clipped()
    } else {
        m
    };
    let se = m
        .atom_stderr()
        .map_or(0.0, |se| se.iter().copied().fold(0.0, f64::max));
    let report = measure_validate(&m, 3.0 * se);
    if !report.passed() {
        warnings.push(format!(
            "measure fails validation at tolerance {:.3e}: mass deviation {:.3e}, {} negative atoms, {} monotonicity violations",
            report.tol,
            report.mass_deviation,
            report.negative_atoms.len(),
            report.monotonicity_violations.len()
        ));
    }
    (m, warnings)
}

/// A model whose non-outcome nodes are all roots and whose outcome is a
/// formula of them.
pub struct Reduced<'a> {
    pub names: Vec<String>,
    pub marginals: Vec<&'a Marginal>,
    formula: &'a xfvar::scm::Formula,
    /// Position among the inputs of each of the outcome's parents.
    slots: Vec<usize>,
}

impl Reduced<'_> {
    pub fn eval(&self, w: &[f64]) -> f64 {
        let mut pv = [0.0; subset::MAX_VARS];
        for (i, &s) in self.slots.iter().enumerate() {
            pv[i] = w[s];
        }
        self.formula.eval(&pv[..self.slots.len()])
    }
}

pub fn reduce(model: &ScmModel) -> Result<Reduced<'_>, CliError> {
    let y = model.outcome();
    let not_reducible = |why: String| {
        CliError::new(
            NOT_REDUCIBLE,
            format!("model is not reducible to independent inputs: {why}"),
        )
    };
    let formula = match model.mechanism(y) {
        Mechanism::Deterministic(f) => f,
        other => {
            return Err(not_reducible(format!(
                "outcome `{}` is {}, not deterministic",
                model.outcome_name(),
                other.kind()
            )))
        }
    };
    let mut names = Vec::new();
    let mut marginals = Vec::new();
    let mut slot_of = vec![usize::MAX; model.var_count()];
    for k in (0..model.var_count()).filter(|&k| k != y) {
        match model.mechanism(k) {
            Mechanism::Root(m) => {
                slot_of[k] = names.len();
                names.push(model.names()[k].clone());
                marginals.push(m);
            }
            other => {
                return Err(not_reducible(format!(
                    "node `{}` is {}, not a root",
                    model.names()[k],
                    other.kind()
                )))
            }
        }
    }
    let slots = model.dag().parents(y).iter().map(|&p| slot_of[p]).collect();
    Ok(Reduced {
        names,
        marginals,
        formula,
        slots,
    })
}

pub fn cmd_gsa(a: &GsaArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = a.mc.config();
    let measure = match (&a.func, &a.model) {
        (Some(name), _) => {
            let t = builtin(name).ok_or_else(|| {
                CliError::input(format!(
                    "unknown function `{name}`; available: {}",
                    builtin_names().join(", ")
                ))
            })?;
            let names = vec!["W1".to_string(), "W2".to_string(), "W3".to_string()];
            estimate_measure(
                &t.eval,
                &IndependentSampler::standard_normal(3)?,
                &cfg,
                names,
            )?
        }
        (None, Some(path)) => {
            let model = load_model(path)?;
            let r = reduce(&model)?;
            let sampler =
                IndependentSampler::new(r.marginals.iter().map(|&m| m.clone()).collect())?;
            estimate_measure(&|w: &[f64]| r.eval(w), &sampler, &cfg, r.names.clone())?
        }
        (None, None) => return Err(CliError::input("one of --func or --model is required")),
    };
    let (measure, warnings) = finish_mc(measure, a.mc.clip_atoms);
    let report = RunReport::from_measure(&measure, "pick_freeze", warnings);
    deliver(&report, a.out.as_deref(), a.format, stdout)
}

fn parse_subset(model: &ScmModel, text: &str) -> Result<Mask, CliError> {
    let mut mask: Mask = 0;
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let k = model
            .names()
            .iter()
            .position(|n| n == part)
            .ok_or_else(|| CliError::input(format!("unknown node `{part}` in --subset")))?;
        mask |= 1 << k;
    }
    if mask == 0 {
        return Err(CliError::input("--subset names no nodes"));
    }
    Ok(mask)
}

pub fn cmd_counterfactual(a: &CounterfactualArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let cfg = a.mc.config();
    if let Some(text) = &a.subset {
        let s = parse_subset(&model, text)?;
        let est = model.counterfactual_total(s, &cfg)?;
        let line = format!(
            "{}\t{:.4} ± {:.4}\n",
            subset::label(s, model.names()),
            est.value,
            est.stderr
        );
        if let Some(path) = &a.out {
            write_file(path, &line)?;
        }
        return emit(stdout, &line);
    }
    let measure = model.estimate_counterfactual_measure(&cfg, !a.exclude_outcome)?;
    let (measure, warnings) = finish_mc(measure, a.mc.clip_atoms);
    let report = RunReport::from_measure(&measure, "pick_freeze_counterfactual", warnings);
    deliver(&report, a.out.as_deref(), a.format, stdout)
}

fn cell_count(m: &Mechanism) -> usize {
    fn of(p: &ParentFn) -> usize {
        match p {
            ParentFn::Formula(_) => 1,
            ParentFn::Table(t) => t.cells().len(),
        }
    }
    match m {
        Mechanism::Root(_) | Mechanism::Deterministic(_) => 1,
        Mechanism::QuantileTable(t) => t.cells().len(),
        Mechanism::AdditiveNoise { mean, .. } => of(mean),
        Mechanism::HeteroGaussian { mean, .. } => of(mean),
    }
}

pub fn cmd_fit(a: &FitArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let dag: DagConfig = serde_json::from_str(&read(&a.dag)?)
        .map_err(|e| CliError::input(format!("{}: {e}", a.dag.display())))?;
    if a.levels == 0 {
        return Err(CliError::input("--levels must be positive"));
    }
    let levels = (0..a.levels)
        .map(|i| (2 * i + 1) as f64 / (2 * a.levels) as f64)
        .collect();
    let cfg = FitConfig {
        method: a.method.into(),
        levels,
        min_cell: a.min_cell,
        folds: a.folds,
        bins: a.bins,
        seed: a.seed,
        max_discrete: a.max_discrete,
    };
    let file = fs::File::open(&a.data).map_err(|e| CliError::io(&a.data, e))?;
    let data = Dataset::from_csv(
        std::io::BufReader::new(file),
        &dag.node_names(),
        &dag.categorical,
    )?;
    let model = fit_model(&data, &dag, &cfg)?;
    let mut json = model_to_json(&model);
    json.push('\n');
    write_file(&a.out, &json)?;
    let mut summary = format!(
        "fitted {} rows with {} ({} rows dropped)\n",
        data.rows(),
        cfg.method.name(),
        data.dropped()
    );
    for k in 0..model.var_count() {
        let m = model.mechanism(k);
        summary.push_str(&format!(
            "  {}: {}, {} cell{}\n",
            model.names()[k],
            m.kind(),
            cell_count(m),
            if cell_count(m) == 1 { "" } else { "s" }
        ));
    }
    emit(stdout, &summary)
}

/// Support of a root law with finitely many values; the empirical law puts
/// mass on each distinct sample value.
fn discrete_support(m: &Marginal) -> Option<Vec<(f64, f64)>> {
    if let Marginal::Empirical { sorted } = m {
        let n = sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for &v in sorted {
            match out.last_mut() {
                Some((last, p)) if *last == v => *p += 1.0 / n,
                _ => out.push((v, 1.0 / n)),
            }
        }
        return Some(out);
    }
    m.finite_support()
}

/// Largest atomwise difference; a NaN anywhere counts as infinite.
fn max_atom_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            if d.is_nan() {
                f64::INFINITY
            } else {
                d
            }
        })
        .fold(0.0, f64::max)
}

fn nonempty(names: &[String], v: &[f64]) -> Table {
    Table(
        (1..v.len())
            .map(|s| (subset::label(s as Mask, names), v[s]))
            .collect(),
    )
}

pub fn cmd_oracle(a: &OracleArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let r = reduce(&model)?;
    let mut supports = Vec::with_capacity(r.marginals.len());
    for (name, m) in r.names.iter().zip(&r.marginals) {
        let s = discrete_support(m).ok_or_else(|| {
            CliError::new(
                NOT_REDUCIBLE,
                format!("model is not reducible to a finite domain: root `{name}` is not discrete"),
            )
        })?;
        supports.push(s);
    }
    let oracle_err = |e: xfvar::anova::AnovaError| match e {
        xfvar::anova::AnovaError::ZeroVariance => {
            CliError::new(crate::error::ZERO_VARIANCE, e.to_string())
        }
        xfvar::anova::AnovaError::TooLarge(_) => CliError::new(NOT_REDUCIBLE, e.to_string()),
        _ => CliError::internal(e.to_string()),
    };
    let d = DiscreteDomain::new(supports).map_err(oracle_err)?;
    let f = |w: &[f64]| r.eval(w);
    let dec = hoeffding_decompose(&f, &d).map_err(oracle_err)?;
    let measure = exact_measure(&dec, r.names.clone()).map_err(oracle_err)?;
    let idx = indices_from_decomposition(&dec);
    cross_check(&f, &d, &measure)?;

    let mut report = RunReport::from_measure(&measure, "exact_enumeration", Vec::new());
    report.lower = Some(nonempty(&r.names, &idx.lower_normalized()));
    report.upper = Some(nonempty(&r.names, &idx.upper_normalized()));
    report.superset = Some(nonempty(&r.names, &idx.superset_normalized()));
    deliver(&report, a.out.as_deref(), a.format, stdout)
}

/// Rebuilds the measure from pair enumerations of the upper, lower and
/// superset indices and compares atoms with the decomposition.
fn cross_check<F: Fn(&[f64]) -> f64>(
    f: &F,
    d: &DiscreteDomain<f64>,
    measure: &ExplanationMeasure<f64>,
) -> Result<(), CliError> {
    let internal = |e: String| CliError::internal(format!("oracle cross-check: {e}"));
    let pairs = ExactPairs::new(f, d).map_err(|e| internal(e.to_string()))?;
    let k = measure.var_count();
    let n = 1usize << k;
    let full = subset::full_mask(k);
    let var = pairs.variance();
    let names = measure.names().to_vec();
    let mut upper = vec![0.0; n];
    let mut from_lower = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for s in 0..n {
        let m = s as Mask;
        upper[s] = pairs.upper(m).map_err(|e| internal(e.to_string()))? / var;
        sup[s] = pairs.superset(m).map_err(|e| internal(e.to_string()))? / var;
        if s > 0 {
            let rest = full & !m;
            let lower = if rest == 0 {
                0.0
            } else {
                pairs.lower(rest).map_err(|e| internal(e.to_string()))?
            };
            from_lower[s] = 1.0 - lower / var;
        }
    }
    let totals_route = |t: Vec<f64>| -> Result<Vec<f64>, CliError> {
        let table = TotalsTable::new(k, t).map_err(|e| internal(e.to_string()))?;
        Ok(
            measure_from_totals(&table, names.clone(), Provenance::Exact)
                .map_err(|e| internal(e.to_string()))?
                .atoms()
                .to_vec(),
        )
    };
    let superset_atoms = xfvar::algebra::atoms_from_interactions(&sup);
    let routes = [
        ("upper", totals_route(upper)?),
        ("lower", totals_route(from_lower)?),
        ("superset", superset_atoms),
    ];
    for (route, atoms) in routes {
        let diff = max_atom_diff(measure.atoms(), &atoms);
        if diff > ORACLE_TOL {
            return Err(internal(format!(
                "{route} route differs from the decomposition by {diff:.3e}"
            )));
        }
    }
    Ok(())
}

pub fn cmd_venn(a: &VennArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let report = RunReport::from_json(&read(&a.report)?)?;
    let m = venn::venn_measure(&report.measure()?)?;
    if a.ascii {
        return emit(stdout, &venn::ascii(&m));
    }
    match &a.out {
        Some(path) => write_file(path, &venn::svg(&m)),
        None => Err(CliError::new(INPUT, "one of --out or --ascii is required")),
    }
}
