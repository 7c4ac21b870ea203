use alphapred_core::domination::domination_experiment_shape;
use alphapred_core::risk::{risk_difference_crn, risk_mc};
use alphapred_core::{Candidate, ProblemSpec, RiskQuery, Shape, Verdict};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let spec = ProblemSpec::new(4, 1.0, 2.0, 0.3).unwrap();
    let mu = [0.5, -1.0, 0.0, 2.0];
    let one = pool(1).install(|| risk_difference_crn(&spec, &mu, 20_000, 3).unwrap());
    let three = pool(3).install(|| risk_difference_crn(&spec, &mu, 20_000, 3).unwrap());
    assert_eq!(one, three);
}

#[test]
fn risk_difference_depends_on_mu_only_through_its_norm() {
    let spec = ProblemSpec::new(3, 1.0, 1.0, 0.0).unwrap();
    let a = risk_difference_crn(&spec, &[1.5, 0.0, 0.0], 200_000, 8).unwrap().diff;
    let b = risk_difference_crn(&spec, &[0.0, -0.9, 1.2], 200_000, 9).unwrap().diff;
    let gap = (a.value - b.value).abs();
    assert!(gap <= 3.0 * (a.error.powi(2) + b.error.powi(2)).sqrt(), "{a:?} {b:?}");
}

#[test]
fn harmonic_risk_is_below_invariant_risk_at_origin() {
    let spec = ProblemSpec::new(5, 1.0, 1.0, 0.0).unwrap();
    let mu = vec![0.0; 5];
    let u = risk_mc(&RiskQuery::new(spec, mu.clone(), Candidate::BestInvariant, 100_000, 1).unwrap()).unwrap();
    let h = risk_mc(&RiskQuery::new(spec, mu, Candidate::HarmonicBayes, 100_000, 1).unwrap()).unwrap();
    assert!(u.value - h.value > 3.0 * (u.error.powi(2) + h.error.powi(2)).sqrt(), "{u:?} {h:?}");
}

#[test]
fn constant_shape_is_neutral() {
    let spec = ProblemSpec::new(3, 1.0, 1.0, -0.4).unwrap();
    let rep = domination_experiment_shape(&spec, &[0.0, 2.0], &Shape::Constant, 5_000, 4).unwrap();
    assert_eq!(rep.verdict, Verdict::Neutral);
}
