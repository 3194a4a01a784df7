use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::{BigRational, Signed, Zero};

use causal_entropy::certify::{
    certificate_from_text, certificate_to_text, certify, verify_certificate, Verdict,
};
use causal_entropy::coexist::{enumerate_variables, marginal_variables, Theory};
use causal_entropy::constraints::{generate, GenerationOptions, QuantumVariant};
use causal_entropy::dist::{
    entropy_vector, parse_distribution, prbox_bilocal_strategy, singlet_bilocal_strategy,
    DistributionSource,
};
use causal_entropy::graph::{catalog, parse_structure, CausalStructure, CATALOG_NAMES};
use causal_entropy::poly::{
    eliminate, orbit_classify, EliminationBudget, InequalitySystem, Relation, Row, SymmetryGroup,
};
use causal_entropy::Error;

#[derive(Parser)]
#[command(
    name = "causal-entropy",
    about = "Entropy-cone analysis of causal structures with latent resources",
    version
)]
struct Cli {
    /// Worker threads for parallel sections (also CAUSAL_ENTROPY_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoryArg {
    Classical,
    Quantum,
    Boxworld,
    Gpt,
}

impl TheoryArg {
    fn theory(self) -> Theory {
        match self {
            TheoryArg::Classical => Theory::Classical,
            TheoryArg::Quantum => Theory::Quantum,
            TheoryArg::Boxworld => Theory::BoxWorld,
            TheoryArg::Gpt => Theory::GeneralGpt,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    /// Weak monotonicity plus purification.
    Wm,
    /// Positivity of all conditional entropies.
    Pc,
}

impl VariantArg {
    fn variant(self) -> QuantumVariant {
        match self {
            VariantArg::Wm => QuantumVariant::WeakMonotonicity,
            VariantArg::Pc => QuantumVariant::PositiveConditional,
        }
    }
}

#[derive(Args)]
struct GenerationArgs {
    /// Resource theory governing the latent nodes.
    #[arg(long, value_enum)]
    theory: TheoryArg,
    /// Quantum constraint variant.
    #[arg(long, value_enum, default_value = "wm")]
    quantum_variant: VariantArg,
    /// Also emit the non-Shannon tightening rows (classical only).
    #[arg(long)]
    non_shannon: bool,
}

impl GenerationArgs {
    fn options(&self) -> GenerationOptions {
        let mut options = GenerationOptions::new(self.theory.theory());
        options.quantum_variant = self.quantum_variant.variant();
        options.include_non_shannon = self.non_shannon;
        options
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate constraints and project them onto kept components.
    Analyze {
        /// Catalog name or structure file path.
        structure: String,
        #[command(flatten)]
        generation: GenerationArgs,
        /// Components to keep: 'observed', 'restricted7', or a
        /// comma-separated list of column labels.
        #[arg(long, default_value = "observed")]
        keep: String,
        /// Abort elimination when the working system exceeds this many rows.
        #[arg(long)]
        budget: Option<usize>,
        /// Abort elimination after this many seconds.
        #[arg(long)]
        time_limit: Option<u64>,
        /// Write the projected system here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Permutation generator file; adds an orbit summary.
        #[arg(long)]
        symmetry: Option<PathBuf>,
        /// Omit the timing header so output is byte-identical across runs.
        #[arg(long)]
        no_timing: bool,
    },
    /// Test an observed distribution against a structure and theory.
    Certify {
        /// Catalog name or structure file path.
        structure: String,
        /// Distribution file path, 'prbox-bilocal', or 'singlet-bilocal:<x>'.
        distribution: String,
        #[command(flatten)]
        generation: GenerationArgs,
        /// Bits of precision for entropy enclosures.
        #[arg(long, default_value_t = 40)]
        precision: u32,
        /// Certificate output path used on an Incompatible verdict.
        #[arg(long, default_value = "incompatibility.cert")]
        out: PathBuf,
    },
    /// Re-check an incompatibility certificate file.
    VerifyCertificate {
        /// Certificate file path.
        certificate: PathBuf,
    },
    /// List the built-in causal structures.
    Catalog,
    /// Split observed nodes over the values of parentless pivots.
    Postselect {
        /// Catalog name or structure file path.
        structure: String,
        /// Pivot to condition on, as NAME:CARDINALITY; repeatable.
        #[arg(long, required = true)]
        pivot: Vec<String>,
        /// Write the transformed structure here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify the rows of a saved system under a symmetry group.
    Orbits {
        /// Inequality system in the tab-separated layout.
        system: PathBuf,
        /// Permutation generator file.
        #[arg(long)]
        symmetry: PathBuf,
    },
    /// List the entropy components tracked for a structure and theory.
    Variables {
        /// Catalog name or structure file path.
        structure: String,
        /// Resource theory governing the latent nodes.
        #[arg(long, value_enum)]
        theory: TheoryArg,
    },
}

fn load_structure(spec: &str) -> Result<CausalStructure, Error> {
    if Path::new(spec).is_file() {
        parse_structure(&fs::read_to_string(spec)?)
    } else {
        catalog(spec)
    }
}

fn structure_catalog_name(spec: &str) -> Option<&str> {
    if Path::new(spec).is_file() {
        None
    } else {
        Some(spec)
    }
}

/// One generator per line, written as whitespace-separated FROM>TO tokens.
fn parse_generator_file(text: &str) -> Result<Vec<BTreeMap<String, String>>, Error> {
    let mut generators = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut map = BTreeMap::new();
        for token in line.split_whitespace() {
            let Some((from, to)) = token.split_once('>') else {
                return Err(Error::Parse {
                    line: i + 1,
                    column: 1,
                    message: format!("expected FROM>TO, found '{token}'"),
                });
            };
            if map.insert(from.to_string(), to.to_string()).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    column: 1,
                    message: format!("'{from}' renamed twice"),
                });
            }
        }
        if !map.is_empty() {
            generators.push(map);
        }
    }
    Ok(generators)
}

fn format_coeff(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        c.to_string()
    }
}

fn row_display(row: &Row, columns: &[String]) -> String {
    let mut terms = Vec::new();
    for (c, name) in row.coeffs.iter().zip(columns) {
        if !c.is_zero() {
            terms.push(format!("{}*{}", format_coeff(c), name));
        }
    }
    if terms.is_empty() {
        terms.push("0".to_string());
    }
    let relation = match row.relation {
        Relation::Ge => ">=",
        Relation::Eq => "=",
    };
    format!("{} {relation} 0", terms.join(" "))
}

fn orbit_summary(system: &InequalitySystem, generators: &[BTreeMap<String, String>]) -> Result<String, Error> {
    let group = SymmetryGroup::from_renamings(&system.columns, generators)?;
    let classes = orbit_classify(system, &group);
    let mut out = String::new();
    out.push_str(&format!(
        "# symmetry group order {}, {} orbit classes\n",
        group.order(),
        classes.len()
    ));
    for (i, class) in classes.iter().enumerate() {
        out.push_str(&format!(
            "orbit\t{}\tsize\t{}\t{}\n",
            i + 1,
            class.size(),
            row_display(&class.representative, &system.columns)
        ));
    }
    Ok(out)
}

fn emit(out: Option<&PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => {
            fs::write(path, content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run_analyze(
    structure: &str,
    generation: &GenerationArgs,
    keep: &str,
    budget: Option<usize>,
    time_limit: Option<u64>,
    out: Option<&PathBuf>,
    symmetry: Option<&PathBuf>,
    no_timing: bool,
) -> Result<u8, Error> {
    let start = Instant::now();
    let s = load_structure(structure)?;
    let options = generation.options();
    let system = generate(&s, &options)?;
    let kept: Vec<String> = match keep {
        "observed" => marginal_variables(&s)?
            .iter()
            .map(|v| v.to_string())
            .collect(),
        "restricted7" => [
            "H(X1)",
            "H(X2)",
            "H(Y_R1)",
            "H(Y_R2)",
            "H(Z)",
            "H(X1,Y_R1)",
            "H(X2,Y_R2)",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        list => list.split(',').map(|s| s.trim().to_string()).collect(),
    };
    for name in &kept {
        if system.column_index(name).is_none() {
            return Err(Error::DimensionMismatch(format!(
                "kept component {name} is not a system column"
            )));
        }
    }
    let mut elimination_budget = EliminationBudget::default();
    if let Some(rows) = budget {
        elimination_budget.max_rows = rows;
    }
    if let Some(secs) = time_limit {
        elimination_budget.time_limit = Some(Duration::from_secs(secs));
    }
    let (projected, partial) = match eliminate(&system, &kept, &elimination_budget) {
        Ok(projected) => (projected, false),
        Err(Error::BudgetExceeded {
            budget,
            column,
            partial,
        }) => {
            eprintln!(
                "warning: row budget of {budget} exceeded while eliminating '{column}'; \
                 output holds only the consequences found so far"
            );
            (*partial, true)
        }
        Err(e) => return Err(e),
    };
    let mut content = String::new();
    if !no_timing {
        content.push_str(&format!("# elapsed-ms {}\n", start.elapsed().as_millis()));
    }
    if partial {
        content.push_str("# partial: elimination budget exceeded\n");
    }
    content.push_str(&projected.to_tsv());
    if let Some(path) = symmetry {
        let generators = parse_generator_file(&fs::read_to_string(path)?)?;
        content.push_str(&orbit_summary(&projected, &generators)?);
    }
    emit(out, &content)?;
    Ok(if partial { 2 } else { 0 })
}

/// Accepts `N/D`, plain integers, and decimal literals such as `0.1`.
fn parse_number(tok: &str) -> Result<BigRational, Error> {
    let bad = || Error::Parse {
        line: 1,
        column: 1,
        message: format!("bad rational '{tok}'"),
    };
    if let Some((int, frac)) = tok.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let scale = num::BigInt::from(10u32).pow(frac.len() as u32);
        let int: BigRational = int.parse().map_err(|_| bad())?;
        let frac = BigRational::new(frac.parse().map_err(|_| bad())?, scale);
        Ok(if int.is_negative() { int - frac } else { int + frac })
    } else {
        tok.parse().map_err(|_| bad())
    }
}

fn load_distribution(spec: &str, precision: u32) -> Result<DistributionSource, Error> {
    if spec == "prbox-bilocal" {
        return Ok(DistributionSource::Family(prbox_bilocal_strategy()));
    }
    if let Some(x) = spec.strip_prefix("singlet-bilocal:") {
        let x = parse_number(x)?;
        return Ok(DistributionSource::Family(singlet_bilocal_strategy(
            &x, precision,
        )));
    }
    parse_distribution(&fs::read_to_string(spec)?)
}

fn run_certify(
    structure: &str,
    distribution: &str,
    generation: &GenerationArgs,
    precision: u32,
    out: &PathBuf,
) -> Result<u8, Error> {
    let s = load_structure(structure)?;
    let options = generation.options();
    let source = load_distribution(distribution, precision)?;
    let components = marginal_variables(&s)?;
    let enclosures = entropy_vector(&source, &s, &components, precision)?;
    let result = certify(&s, structure_catalog_name(structure), &options, &enclosures)?;
    println!("{}", result.verdict);
    match result.verdict {
        Verdict::Compatible => Ok(0),
        Verdict::Incompatible => {
            let cert = result
                .certificate
                .expect("incompatible verdicts carry a certificate");
            fs::write(out, certificate_to_text(&cert))?;
            println!("certificate written to {}", out.display());
            Ok(1)
        }
    }
}

fn run_verify_certificate(path: &PathBuf) -> Result<u8, Error> {
    let text = fs::read_to_string(path)?;
    let cert = certificate_from_text(&text)?;
    match verify_certificate(&cert) {
        Ok(()) => {
            println!("valid");
            Ok(0)
        }
        Err(e) => {
            println!("invalid: {e}");
            Ok(1)
        }
    }
}

fn run_postselect(
    structure: &str,
    pivots: &[String],
    out: Option<&PathBuf>,
) -> Result<u8, Error> {
    let mut s = load_structure(structure)?;
    for pivot in pivots {
        let Some((name, card)) = pivot.split_once(':') else {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("expected NAME:CARDINALITY, found '{pivot}'"),
            });
        };
        let Ok(card) = card.parse::<usize>() else {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("bad cardinality '{card}'"),
            });
        };
        let (next, _) = s.post_select(name, card)?;
        s = next;
    }
    emit(out, &s.serialize())?;
    Ok(0)
}

fn run_orbits(system: &PathBuf, symmetry: &PathBuf) -> Result<u8, Error> {
    let system = InequalitySystem::from_tsv(&fs::read_to_string(system)?)?;
    let generators = parse_generator_file(&fs::read_to_string(symmetry)?)?;
    print!("{}", orbit_summary(&system, &generators)?);
    Ok(0)
}

fn run_variables(structure: &str, theory: TheoryArg) -> Result<u8, Error> {
    let s = load_structure(structure)?;
    for v in enumerate_variables(&s, theory.theory())? {
        println!("{v}");
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8, Error> {
    match &cli.command {
        Command::Analyze {
            structure,
            generation,
            keep,
            budget,
            time_limit,
            out,
            symmetry,
            no_timing,
        } => run_analyze(
            structure,
            generation,
            keep,
            *budget,
            *time_limit,
            out.as_ref(),
            symmetry.as_ref(),
            *no_timing,
        ),
        Command::Certify {
            structure,
            distribution,
            generation,
            precision,
            out,
        } => run_certify(structure, distribution, generation, *precision, out),
        Command::VerifyCertificate { certificate } => run_verify_certificate(certificate),
        Command::Catalog => {
            for name in CATALOG_NAMES {
                println!("{name}");
            }
            Ok(0)
        }
        Command::Postselect {
            structure,
            pivot,
            out,
        } => run_postselect(structure, pivot, out.as_ref()),
        Command::Orbits { system, symmetry } => run_orbits(system, symmetry),
        Command::Variables { structure, theory } => run_variables(structure, *theory),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("CAUSAL_ENTROPY_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
