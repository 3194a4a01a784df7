use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use num::{BigRational, Signed, Zero};

use crate::coexist::{enumerate_variables, marginal_variables, EntropyVariable, Theory};
use crate::constraints::{generate, ConstraintFamily, GenerationOptions, QuantumVariant};
use crate::enclose::Interval;
use crate::error::{Error, Result};
use crate::graph::{catalog, parse_structure, CausalStructure, SystemId};
use crate::poly::{lp_feasible, FarkasCertificate, Feasibility, InequalitySystem, Relation, Row};

/// Outcome of a certification run. Compatibility of the entropic relaxation
/// never certifies the distribution itself as realizable, so the positive
/// verdict reads as inconclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Compatible,
    Incompatible,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Compatible => f.write_str("Inconclusive-Compatible"),
            Verdict::Incompatible => f.write_str("Incompatible"),
        }
    }
}

/// A self-contained, re-checkable incompatibility certificate. The witness
/// refers to the deterministically regenerated constraint system for the
/// recorded structure and options.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    /// Either `catalog <name>` or the inline structure text.
    pub structure_catalog: Option<String>,
    pub structure_text: Option<String>,
    pub theory: Theory,
    pub variant: QuantumVariant,
    pub families: BTreeSet<ConstraintFamily>,
    /// Pinned columns in order: (column name, lower, upper).
    pub pins: Vec<(String, BigRational, BigRational)>,
    pub ge_multipliers: Vec<(usize, String, BigRational)>,
    pub eq_multipliers: Vec<(usize, String, BigRational)>,
    pub lower_multipliers: Vec<(usize, BigRational)>,
    pub upper_multipliers: Vec<(usize, BigRational)>,
}

#[derive(Debug, Clone)]
pub struct CertificationResult {
    pub verdict: Verdict,
    pub pinned: BTreeMap<EntropyVariable, (BigRational, BigRational)>,
    pub families: BTreeSet<ConstraintFamily>,
    pub certificate: Option<Certificate>,
    /// A full entropy vector satisfying every constraint, present on
    /// Compatible.
    pub feasible_point: Option<Vec<BigRational>>,
}

/// Elemental Shannon inequalities over the observed marginal vocabulary,
/// branch by branch. Any entropy vector of an actual distribution satisfies
/// them, so their violation flags a malformed input point rather than a
/// causal incompatibility.
pub fn observed_shannon_system(structure: &CausalStructure) -> Result<InequalitySystem> {
    let comps = marginal_variables(structure)?;
    let columns: Vec<String> = comps.iter().map(|v| v.to_string()).collect();
    let index: BTreeMap<&EntropyVariable, usize> =
        comps.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut sys = InequalitySystem::new(columns);
    let mut push = |terms: &[(&BTreeSet<SystemId>, i64)], provenance: String| {
        let mut coeffs = vec![BigRational::zero(); comps.len()];
        for (set, c) in terms {
            if set.is_empty() {
                continue;
            }
            let var = EntropyVariable::joint((*set).clone());
            let j = index[&var];
            coeffs[j] += BigRational::from_integer((*c).into());
        }
        sys.push(coeffs, Relation::Ge, provenance);
    };
    for branch in structure.branches() {
        let active: Vec<SystemId> = structure
            .node_names()
            .filter(|n| structure.is_observed(n) && structure.active_in(n, &branch))
            .map(|n| SystemId::Observed(n.clone()))
            .collect();
        let n = active.len();
        let full: BTreeSet<SystemId> = active.iter().cloned().collect();
        for i in 0..n {
            let mut rest = full.clone();
            rest.remove(&active[i]);
            push(
                &[(&full, 1), (&rest, -1)],
                format!("shannon: drop {}", active[i]),
            );
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let others: Vec<&SystemId> = active
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i && *k != j)
                    .map(|(_, s)| s)
                    .collect();
                for mask in 0..(1u32 << others.len()) {
                    let k_set: BTreeSet<SystemId> = others
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| mask >> b & 1 == 1)
                        .map(|(_, s)| (*s).clone())
                        .collect();
                    let mut ik = k_set.clone();
                    ik.insert(active[i].clone());
                    let mut jk = k_set.clone();
                    jk.insert(active[j].clone());
                    let mut ijk = ik.clone();
                    ijk.insert(active[j].clone());
                    push(
                        &[(&ik, 1), (&jk, 1), (&ijk, -1), (&k_set, -1)],
                        format!("shannon: I({}:{})", active[i], active[j]),
                    );
                }
            }
        }
    }
    sys.canonicalize();
    Ok(sys)
}

fn interval_pins(
    system: &InequalitySystem,
    enclosures: &BTreeMap<EntropyVariable, Interval>,
) -> Result<Vec<(usize, BigRational, BigRational)>> {
    let mut pins = Vec::with_capacity(enclosures.len());
    for (comp, interval) in enclosures {
        let name = comp.to_string();
        let Some(col) = system.column_index(&name) else {
            return Err(Error::DimensionMismatch(format!(
                "component {name} is not a system column"
            )));
        };
        if interval.lo > interval.hi {
            return Err(Error::DimensionMismatch(format!(
                "empty enclosure for {name}"
            )));
        }
        pins.push((col, interval.lo.clone(), interval.hi.clone()));
    }
    Ok(pins)
}

/// Cheap feasibility candidate: treat every system as independent, giving
/// singletons their pinned midpoint entropy and unpinned systems a slack
/// value, so joints are sums of parts. The additive vector satisfies every
/// balanced information identity, so it often lands inside the cone when
/// the observed point itself is near-product; the caller still checks it
/// against every row and pin before trusting it.
fn additive_candidate(
    structure: &CausalStructure,
    options: &GenerationOptions,
    system: &InequalitySystem,
    enclosures: &BTreeMap<EntropyVariable, Interval>,
    pins: &[(usize, BigRational, BigRational)],
) -> Option<Vec<BigRational>> {
    let vars = enumerate_variables(structure, options.theory).ok()?;
    if vars.len() != system.columns.len() {
        return None;
    }
    for (v, name) in vars.iter().zip(&system.columns) {
        if v.to_string() != *name {
            return None;
        }
    }
    let two = BigRational::from_integer(2.into());
    let mut weight: BTreeMap<SystemId, BigRational> = BTreeMap::new();
    let mut observed_total = BigRational::zero();
    for (comp, interval) in enclosures {
        if comp.front.len() == 1 && comp.back.is_empty() {
            let mid = (&interval.lo + &interval.hi) / &two;
            observed_total += &mid;
            weight.insert(comp.front.first().unwrap().clone(), mid);
        }
    }
    let point: Vec<BigRational> = vars
        .iter()
        .map(|v| {
            v.front
                .iter()
                .map(|s| weight.get(s).unwrap_or(&observed_total).clone())
                .sum()
        })
        .collect();
    for row in &system.rows {
        let val = row.dot(&point);
        let ok = match row.relation {
            Relation::Ge => !val.is_negative(),
            Relation::Eq => val.is_zero(),
        };
        if !ok {
            return None;
        }
    }
    for (col, lo, hi) in pins {
        if point[*col] < *lo || point[*col] > *hi {
            return None;
        }
    }
    Some(point)
}

/// Decides whether an observed entropy point (given as per-component
/// enclosures) is consistent with the entropy cone of the structure under
/// the options' theory. `structure_catalog` names the catalog entry when
/// the structure came from it, making the certificate self-contained.
pub fn certify(
    structure: &CausalStructure,
    structure_catalog: Option<&str>,
    options: &GenerationOptions,
    enclosures: &BTreeMap<EntropyVariable, Interval>,
) -> Result<CertificationResult> {
    let comps = marginal_variables(structure)?;
    let expected: BTreeSet<&EntropyVariable> = comps.iter().collect();
    let given: BTreeSet<&EntropyVariable> = enclosures.keys().collect();
    if expected != given {
        return Err(Error::DimensionMismatch(format!(
            "enclosures cover {} components, structure has {} marginal components",
            given.len(),
            expected.len()
        )));
    }
    // A point outside the plain observed Shannon cone cannot be the entropy
    // vector of any distribution; report it as a caller bug.
    let shannon = observed_shannon_system(structure)?;
    let shannon_pins = interval_pins(&shannon, enclosures)?;
    if let Feasibility::Infeasible(_) = lp_feasible(&shannon, &shannon_pins) {
        return Err(Error::NonEntropicPoint(
            "no point of the enclosure box satisfies the observed Shannon inequalities"
                .to_string(),
        ));
    }
    let families = options.effective_families()?;
    let system = generate(structure, options)?;
    let pins = interval_pins(&system, enclosures)?;
    let pinned: BTreeMap<EntropyVariable, (BigRational, BigRational)> = enclosures
        .iter()
        .map(|(k, v)| (k.clone(), (v.lo.clone(), v.hi.clone())))
        .collect();
    if let Some(point) = additive_candidate(structure, options, &system, enclosures, &pins) {
        return Ok(CertificationResult {
            verdict: Verdict::Compatible,
            pinned,
            families,
            certificate: None,
            feasible_point: Some(point),
        });
    }
    match lp_feasible(&system, &pins) {
        Feasibility::Feasible(point) => Ok(CertificationResult {
            verdict: Verdict::Compatible,
            pinned,
            families,
            certificate: None,
            feasible_point: Some(point),
        }),
        Feasibility::Infeasible(farkas) => {
            let describe = |idx: &usize| system.rows[*idx].provenance.clone();
            let certificate = Certificate {
                structure_catalog: structure_catalog.map(|s| s.to_string()),
                structure_text: if structure_catalog.is_none() {
                    Some(structure.serialize())
                } else {
                    None
                },
                theory: options.theory,
                variant: options.quantum_variant,
                families: families.clone(),
                pins: pins
                    .iter()
                    .map(|(col, lo, hi)| (system.columns[*col].clone(), lo.clone(), hi.clone()))
                    .collect(),
                ge_multipliers: farkas
                    .ge_multipliers
                    .iter()
                    .map(|(i, m)| (*i, describe(i), m.clone()))
                    .collect(),
                eq_multipliers: farkas
                    .eq_multipliers
                    .iter()
                    .map(|(i, m)| (*i, describe(i), m.clone()))
                    .collect(),
                lower_multipliers: farkas.lower_multipliers.clone(),
                upper_multipliers: farkas.upper_multipliers.clone(),
            };
            // Belt and braces: the re-checkable form must verify too.
            verify_certificate(&certificate)?;
            Ok(CertificationResult {
                verdict: Verdict::Incompatible,
                pinned,
                families,
                certificate: Some(certificate),
                feasible_point: None,
            })
        }
    }
}

/// Rows of `projected` that the whole enclosure box certainly violates,
/// with the violation margin (most negative first). An empty result means
/// some point of the box satisfies every row.
pub fn violated_inequalities(
    projected: &InequalitySystem,
    enclosures: &BTreeMap<EntropyVariable, Interval>,
) -> Result<Vec<(Row, BigRational)>> {
    let by_name: BTreeMap<String, &Interval> = enclosures
        .iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    let mut bounds = Vec::with_capacity(projected.columns.len());
    for name in &projected.columns {
        let Some(interval) = by_name.get(name) else {
            return Err(Error::DimensionMismatch(format!(
                "no enclosure for column {name}"
            )));
        };
        bounds.push((*interval).clone());
    }
    let range = |row: &Row| -> (BigRational, BigRational) {
        let mut min = BigRational::zero();
        let mut max = BigRational::zero();
        for (c, b) in row.coeffs.iter().zip(&bounds) {
            if c.is_positive() {
                min += c * &b.lo;
                max += c * &b.hi;
            } else if c.is_negative() {
                min += c * &b.hi;
                max += c * &b.lo;
            }
        }
        (min, max)
    };
    let mut out: Vec<(Row, BigRational)> = Vec::new();
    for row in &projected.rows {
        let (min, max) = range(row);
        let slack = match row.relation {
            Relation::Ge => {
                if max.is_negative() {
                    Some(max)
                } else {
                    None
                }
            }
            Relation::Eq => {
                if max.is_negative() {
                    Some(max)
                } else if min.is_positive() {
                    Some(-min)
                } else {
                    None
                }
            }
        };
        if let Some(slack) = slack {
            out.push((row.clone(), slack));
        }
    }
    out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.provenance.cmp(&b.0.provenance)));
    Ok(out)
}

/// Re-derives the constraint system recorded in the certificate and checks
/// the Farkas combination exactly. `Ok(())` means the certificate proves
/// infeasibility; tampered content yields `InvalidCertificate`.
pub fn verify_certificate(cert: &Certificate) -> Result<()> {
    let structure = match (&cert.structure_catalog, &cert.structure_text) {
        (Some(name), _) => catalog(name)?,
        (None, Some(text)) => parse_structure(text)?,
        (None, None) => {
            return Err(Error::InvalidCertificate(
                "certificate names no structure".to_string(),
            ))
        }
    };
    let mut options = GenerationOptions::new(cert.theory);
    options.quantum_variant = cert.variant;
    options.enabled_families = Some(cert.families.clone());
    let system = generate(&structure, &options)?;
    let mut pins = Vec::with_capacity(cert.pins.len());
    for (name, lo, hi) in &cert.pins {
        let Some(col) = system.column_index(name) else {
            return Err(Error::InvalidCertificate(format!(
                "pinned column {name} does not exist"
            )));
        };
        if lo > hi {
            return Err(Error::InvalidCertificate(format!(
                "empty pin interval for {name}"
            )));
        }
        pins.push((col, lo.clone(), hi.clone()));
    }
    let mut farkas = FarkasCertificate {
        ge_multipliers: Vec::new(),
        eq_multipliers: Vec::new(),
        lower_multipliers: cert.lower_multipliers.clone(),
        upper_multipliers: cert.upper_multipliers.clone(),
    };
    for (idx, provenance, m) in &cert.ge_multipliers {
        let Some(row) = system.rows.get(*idx) else {
            return Err(Error::InvalidCertificate(format!(
                "row index {idx} out of range"
            )));
        };
        if row.provenance != *provenance {
            return Err(Error::InvalidCertificate(format!(
                "row {idx} provenance mismatch: expected '{}', certificate says '{provenance}'",
                row.provenance
            )));
        }
        farkas.ge_multipliers.push((*idx, m.clone()));
    }
    for (idx, provenance, m) in &cert.eq_multipliers {
        let Some(row) = system.rows.get(*idx) else {
            return Err(Error::InvalidCertificate(format!(
                "row index {idx} out of range"
            )));
        };
        if row.provenance != *provenance {
            return Err(Error::InvalidCertificate(format!(
                "row {idx} provenance mismatch: expected '{}', certificate says '{provenance}'",
                row.provenance
            )));
        }
        farkas.eq_multipliers.push((*idx, m.clone()));
    }
    for (idx, _) in farkas
        .lower_multipliers
        .iter()
        .chain(&farkas.upper_multipliers)
    {
        if *idx >= pins.len() {
            return Err(Error::InvalidCertificate(format!(
                "pin index {idx} out of range"
            )));
        }
    }
    if farkas.verify(&system, &pins) {
        Ok(())
    } else {
        Err(Error::InvalidCertificate(
            "multipliers do not produce a contradiction".to_string(),
        ))
    }
}

/// Serializes a certificate to its text file form.
pub fn certificate_to_text(cert: &Certificate) -> String {
    let mut out = String::new();
    match (&cert.structure_catalog, &cert.structure_text) {
        (Some(name), _) => {
            let _ = writeln!(out, "structure catalog {name}");
        }
        (_, Some(text)) => {
            let lines: Vec<&str> = text.lines().collect();
            let _ = writeln!(out, "structure inline {}", lines.len());
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
        }
        _ => {}
    }
    let _ = writeln!(out, "theory {}", cert.theory.name());
    let _ = writeln!(out, "variant {}", cert.variant.name());
    let families: Vec<&str> = cert.families.iter().map(|f| f.name()).collect();
    let _ = writeln!(out, "families {}", families.join(","));
    for (name, lo, hi) in &cert.pins {
        let _ = writeln!(out, "pin {name} {lo} {hi}");
    }
    for (idx, provenance, m) in &cert.ge_multipliers {
        let _ = writeln!(out, "ge {idx} {m} {provenance}");
    }
    for (idx, provenance, m) in &cert.eq_multipliers {
        let _ = writeln!(out, "eq {idx} {m} {provenance}");
    }
    for (idx, m) in &cert.lower_multipliers {
        let _ = writeln!(out, "lower {idx} {m}");
    }
    for (idx, m) in &cert.upper_multipliers {
        let _ = writeln!(out, "upper {idx} {m}");
    }
    out
}

/// Parses the text form produced by `certificate_to_text`.
pub fn certificate_from_text(text: &str) -> Result<Certificate> {
    let err = |line: usize, message: String| Error::Parse {
        line,
        column: 1,
        message,
    };
    let mut cert = Certificate {
        structure_catalog: None,
        structure_text: None,
        theory: Theory::Classical,
        variant: QuantumVariant::WeakMonotonicity,
        families: BTreeSet::new(),
        pins: Vec::new(),
        ge_multipliers: Vec::new(),
        eq_multipliers: Vec::new(),
        lower_multipliers: Vec::new(),
        upper_multipliers: Vec::new(),
    };
    let mut seen_theory = false;
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let line_no = i + 1;
        let line = lines[i];
        i += 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "structure" => match tokens.get(1) {
                Some(&"catalog") if tokens.len() == 3 => {
                    cert.structure_catalog = Some(tokens[2].to_string());
                }
                Some(&"inline") if tokens.len() == 3 => {
                    let Ok(count) = tokens[2].parse::<usize>() else {
                        return Err(err(line_no, "bad inline line count".to_string()));
                    };
                    if i + count > lines.len() {
                        return Err(err(line_no, "inline structure truncated".to_string()));
                    }
                    cert.structure_text = Some(lines[i..i + count].join("\n"));
                    i += count;
                }
                _ => {
                    return Err(err(
                        line_no,
                        "expected 'structure catalog <name>' or 'structure inline <n>'"
                            .to_string(),
                    ))
                }
            },
            "theory" if tokens.len() == 2 => {
                cert.theory = Theory::parse(tokens[1])?;
                seen_theory = true;
            }
            "variant" if tokens.len() == 2 => {
                cert.variant = QuantumVariant::parse(tokens[1])?;
            }
            "families" if tokens.len() == 2 => {
                for name in tokens[1].split(',') {
                    cert.families.insert(ConstraintFamily::parse(name)?);
                }
            }
            "pin" if tokens.len() == 4 => {
                let parse = |t: &str| -> Result<BigRational> {
                    t.parse()
                        .map_err(|_| err(line_no, format!("bad rational '{t}'")))
                };
                cert.pins
                    .push((tokens[1].to_string(), parse(tokens[2])?, parse(tokens[3])?));
            }
            "ge" | "eq" if tokens.len() >= 4 => {
                let Ok(idx) = tokens[1].parse::<usize>() else {
                    return Err(err(line_no, "bad row index".to_string()));
                };
                let Ok(m) = tokens[2].parse::<BigRational>() else {
                    return Err(err(line_no, format!("bad rational '{}'", tokens[2])));
                };
                let provenance = tokens[3..].join(" ");
                if tokens[0] == "ge" {
                    cert.ge_multipliers.push((idx, provenance, m));
                } else {
                    cert.eq_multipliers.push((idx, provenance, m));
                }
            }
            "lower" | "upper" if tokens.len() == 3 => {
                let Ok(idx) = tokens[1].parse::<usize>() else {
                    return Err(err(line_no, "bad pin index".to_string()));
                };
                let Ok(m) = tokens[2].parse::<BigRational>() else {
                    return Err(err(line_no, format!("bad rational '{}'", tokens[2])));
                };
                if tokens[0] == "lower" {
                    cert.lower_multipliers.push((idx, m));
                } else {
                    cert.upper_multipliers.push((idx, m));
                }
            }
            other => return Err(err(line_no, format!("unknown directive '{other}'"))),
        }
    }
    if !seen_theory {
        return Err(Error::InvalidCertificate("missing theory line".to_string()));
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{entropy_vector, prbox_bilocal_strategy, DistributionSource};
    use crate::graph::catalog;
    use num::bigint::BigInt;
    use num::One;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn uniform_bits_enclosures(
        structure: &CausalStructure,
    ) -> BTreeMap<EntropyVariable, Interval> {
        // Independent fair bits: H(S) = |S| exactly.
        marginal_variables(structure)
            .unwrap()
            .into_iter()
            .map(|v| {
                let size = v.front.len() as i64;
                (v, Interval::point(rat(size, 1)))
            })
            .collect()
    }

    #[test]
    fn uniform_bits_are_compatible_everywhere() {
        for name in ["instrumental", "fig2", "bilocal_postselected"] {
            let s = catalog(name).unwrap();
            for theory in [Theory::Classical, Theory::Quantum, Theory::BoxWorld] {
                let r = certify(
                    &s,
                    Some(name),
                    &GenerationOptions::new(theory),
                    &uniform_bits_enclosures(&s),
                )
                .unwrap();
                assert_eq!(r.verdict, Verdict::Compatible, "{name} {theory:?}");
                assert!(r.feasible_point.is_some());
            }
        }
    }

    #[test]
    fn non_entropic_point_is_reported_distinctly() {
        let s = catalog("instrumental").unwrap();
        let mut enc = uniform_bits_enclosures(&s);
        // H(X,Y,Z) > H(X) + H(Y) + H(Z) violates subadditivity.
        let joint = marginal_variables(&s)
            .unwrap()
            .into_iter()
            .find(|v| v.front.len() == 3)
            .unwrap();
        enc.insert(joint, Interval::point(rat(10, 1)));
        let r = certify(
            &s,
            Some("instrumental"),
            &GenerationOptions::new(Theory::Classical),
            &enc,
        );
        assert!(matches!(r, Err(Error::NonEntropicPoint(_))));
    }

    #[test]
    fn missing_component_is_a_dimension_error() {
        let s = catalog("instrumental").unwrap();
        let mut enc = uniform_bits_enclosures(&s);
        let first = enc.keys().next().cloned().unwrap();
        enc.remove(&first);
        let r = certify(
            &s,
            Some("instrumental"),
            &GenerationOptions::new(Theory::Classical),
            &enc,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn prbox_strategy_incompatible_with_quantum_certificate_round_trip() {
        let s = catalog("bilocal_postselected").unwrap();
        let source = DistributionSource::Family(prbox_bilocal_strategy());
        let comps = marginal_variables(&s).unwrap();
        let enc = entropy_vector(&source, &s, &comps, 40).unwrap();
        let r = certify(
            &s,
            Some("bilocal_postselected"),
            &GenerationOptions::new(Theory::Quantum),
            &enc,
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Incompatible);
        let cert = r.certificate.unwrap();
        verify_certificate(&cert).unwrap();
        let text = certificate_to_text(&cert);
        let parsed = certificate_from_text(&text).unwrap();
        assert_eq!(parsed, cert);
        verify_certificate(&parsed).unwrap();
        // Tampering with a multiplier breaks it.
        let mut tampered = cert.clone();
        if let Some((_, _, m)) = tampered.ge_multipliers.first_mut() {
            *m += BigRational::one();
        }
        assert!(matches!(
            verify_certificate(&tampered),
            Err(Error::InvalidCertificate(_))
        ));
    }

    #[test]
    fn prbox_strategy_stays_inside_boxworld() {
        let s = catalog("bilocal_postselected").unwrap();
        let source = DistributionSource::Family(prbox_bilocal_strategy());
        let comps = marginal_variables(&s).unwrap();
        let enc = entropy_vector(&source, &s, &comps, 40).unwrap();
        let r = certify(
            &s,
            Some("bilocal_postselected"),
            &GenerationOptions::new(Theory::BoxWorld),
            &enc,
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Compatible);
    }

    #[test]
    fn violated_inequalities_empty_for_interior_points() {
        let s = catalog("instrumental").unwrap();
        let sys = observed_shannon_system(&s).unwrap();
        let enc = uniform_bits_enclosures(&s);
        let v = violated_inequalities(&sys, &enc).unwrap();
        assert!(v.is_empty());
        let empty = InequalitySystem::new(sys.columns.clone());
        assert!(violated_inequalities(&empty, &enc).unwrap().is_empty());
    }
}
