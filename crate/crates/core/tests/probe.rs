use causal_entropy::certify::certify;
use causal_entropy::coexist::{marginal_variables, Theory};
use causal_entropy::constraints::GenerationOptions;
use causal_entropy::dist::{
    entropy_vector, prbox_bilocal_strategy, singlet_bilocal_strategy, DistributionSource,
};
use causal_entropy::graph::catalog;
use num::{BigRational, FromPrimitive};
use std::time::Instant;

#[test]
fn probe_singlet_classical() {
    let s = catalog("bilocal_postselected").unwrap();
    let comps = marginal_variables(&s).unwrap();
    let x = BigRational::from_f64(0.1).unwrap();
    let singlet = DistributionSource::Family(singlet_bilocal_strategy(&x, 48));
    let enc = entropy_vector(&singlet, &s, &comps, 24).unwrap();
    let t0 = Instant::now();
    let r = certify(
        &s,
        Some("bilocal_postselected"),
        &GenerationOptions::new(Theory::Classical),
        &enc,
    )
    .unwrap();
    println!("singlet 0.1 classical: {} in {:?}", r.verdict, t0.elapsed());
}

#[test]
fn probe_prbox_classical() {
    let s = catalog("bilocal_postselected").unwrap();
    let comps = marginal_variables(&s).unwrap();
    let prbox = DistributionSource::Family(prbox_bilocal_strategy());
    let enc = entropy_vector(&prbox, &s, &comps, 24).unwrap();
    let t0 = Instant::now();
    let r = certify(
        &s,
        Some("bilocal_postselected"),
        &GenerationOptions::new(Theory::Classical),
        &enc,
    )
    .unwrap();
    println!("prbox classical: {} in {:?}", r.verdict, t0.elapsed());
}
