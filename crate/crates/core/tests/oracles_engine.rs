use admission_lab::engine::{run, RunOptions, Sampling, Target};
use admission_lab::group::GroupState;
use admission_lab::oracles::{
    accept_any_veto, f_majority, f_veto, tau, triangle_cdf, triangle_pdf, truncated_triangle_cdf, truncated_triangle_pdf,
};
use admission_lab::rng::SimRng;
use admission_lab::rules::RuleSpec;
use admission_lab::stats::ks_distance;
use proptest::prelude::*;

const GRID: usize = 1500;

/// Midpoint-rule integral over the unit square of `g(a, b)` for an
/// unordered uniform pair, giving `(P(admitted and below q), P(admitted))`.
fn pair_integral(admit: impl Fn(f64, f64) -> Option<f64>, q: f64) -> (f64, f64) {
    let h = 1.0 / GRID as f64;
    let (mut below, mut any) = (0.0, 0.0);
    for i in 0..GRID {
        let a = (i as f64 + 0.5) * h;
        for j in 0..GRID {
            let b = (j as f64 + 0.5) * h;
            if let Some(y) = admit(a.min(b), a.max(b)) {
                any += 1.0;
                if y < q {
                    below += 1.0;
                }
            }
        }
    }
    let cells = (GRID * GRID) as f64;
    (below / cells, any / cells)
}

fn majority_admit(median: f64) -> impl Fn(f64, f64) -> Option<f64> {
    move |lo, hi| Some(if median - lo <= hi - median { lo } else { hi })
}

fn veto_admit(q: f64) -> impl Fn(f64, f64) -> Option<f64> {
    move |lo, hi| ((lo + hi) / 2.0 < q).then_some(hi)
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = 4000;
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

#[test]
fn majority_acceptance_matches_integration() {
    for q in [0.05, 0.2, 0.37, 0.5, 0.61, 0.9] {
        let (below, any) = pair_integral(majority_admit(q), q);
        assert!((any - 1.0).abs() < 1e-12);
        assert!((below - f_majority(q).unwrap()).abs() < 2e-3, "q = {q}");
    }
}

#[test]
fn veto_acceptance_matches_integration() {
    for q in [0.2, 0.5, 0.55, 0.7, 0.85, 1.0] {
        let (below, any) = pair_integral(veto_admit(q), q);
        assert!((any - accept_any_veto(q).unwrap()).abs() < 2e-3, "q = {q}");
        if q > 0.5 {
            assert!((below / any - f_veto(q).unwrap()).abs() < 2e-3, "q = {q}");
        }
    }
}

#[test]
fn tau_is_the_fixed_point_found_by_bisection() {
    for p in [0.55, 0.6, 0.75, 0.9, 0.99] {
        let (mut lo, mut hi) = (0.5 + 1e-12, 1.0);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if f_veto(mid).unwrap() < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((tau(p).unwrap() - lo).abs() < 1e-12, "p = {p}");
    }
    assert!((tau(1.0).unwrap() - 1.0).abs() < 1e-15);
    assert!(tau(0.5).is_err());
}

#[test]
fn densities_integrate_to_their_cdfs() {
    for x in [0.1, 0.3, 0.5, 0.72, 1.0] {
        let num = integrate(|t| triangle_pdf(t).unwrap(), 0.0, x);
        assert!((num - triangle_cdf(x).unwrap()).abs() < 1e-6);
    }
    for q in [0.6, 0.75, 0.95] {
        assert!((truncated_triangle_cdf(1.0, q).unwrap() - 1.0).abs() < 1e-12);
        let top = (2.0 * q).min(1.0);
        assert!((integrate(|t| truncated_triangle_pdf(t, q).unwrap(), 0.0, top) - 1.0).abs() < 1e-6);
        for x in [0.2, q, (q + 1.0) / 2.0] {
            let num = integrate(|t| truncated_triangle_pdf(t, q).unwrap(), 0.0, x);
            assert!((num - truncated_triangle_cdf(x, q).unwrap()).abs() < 1e-6, "q = {q}, x = {x}");
        }
        // the admitted law below q is where f_veto is read from
        assert!((truncated_triangle_cdf(q, q).unwrap() - f_veto(q).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn closed_forms_stay_in_range(q in 0.0..=1.0f64) {
        let m = f_majority(q).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert!((f_majority(1.0 - q).unwrap() - (1.0 - m)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&accept_any_veto(q).unwrap()));
        if q > 0.5 {
            prop_assert!(f_veto(q).unwrap() <= 1.0 + 1e-15);
            prop_assert!(f_veto(q).unwrap() >= 0.5);
        }
    }

    #[test]
    fn f_veto_is_increasing(a in 0.5001..=1.0f64, b in 0.5001..=1.0f64) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(f_veto(lo).unwrap() <= f_veto(hi).unwrap());
    }

    #[test]
    fn runs_are_reproducible_and_consistent(seed in any::<u64>(), rule in 0usize..3, accepted in 1u64..400) {
        let spec = match rule {
            0 => RuleSpec::majority(),
            1 => RuleSpec::consensus(),
            _ => RuleSpec::veto(0.25).unwrap(),
        };
        let initial = GroupState::from_opinions([0.25, 0.5]).unwrap();
        let opts = RunOptions { log_admitted: true, max_steps: Some(2_000_000), ..Default::default() };
        let a = run(initial.clone(), spec.clone(), Target::Accepted(accepted), SimRng::new(seed), opts.clone()).unwrap();
        let b = run(initial, spec, Target::Accepted(accepted), SimRng::new(seed), opts).unwrap();
        prop_assert_eq!(&a, &b);
        let log = a.admitted_log.as_ref().unwrap();
        prop_assert_eq!(log.len() as u64, a.accepted);
        prop_assert!(a.steps >= a.accepted);
        if !a.exhausted {
            prop_assert_eq!(a.accepted, accepted);
        }
        prop_assert!(a.checkpoints.windows(2).all(|w| w[0].k < w[1].k && w[0].steps <= w[1].steps));
        prop_assert!(a.checkpoints.iter().all(|c| c.x1 <= c.q_p && c.q_p <= c.xk));
        prop_assert_eq!(a.consensus_violations, 0);
    }
}

#[test]
fn direct_and_raw_veto_sampling_agree_in_law() {
    // frozen founder at 1: the admitted law is the truncated triangle at the moving quantile,
    // so compare the two samplers' admitted values with each other instead
    let initial = GroupState::from_opinions([1.0]).unwrap();
    let rule = RuleSpec::veto(0.25).unwrap();
    let logs: Vec<Vec<f64>> = [Sampling::Raw, Sampling::Direct]
        .into_iter()
        .map(|sampling| {
            let opts = RunOptions { log_admitted: true, sampling, ..Default::default() };
            run(initial.clone(), rule.clone(), Target::Accepted(40_000), SimRng::new(7), opts)
                .unwrap()
                .admitted_log
                .unwrap()
        })
        .collect();
    let mut raw = logs[0].clone();
    raw.sort_by(f64::total_cmp);
    let n = raw.len() as f64;
    let ecdf = |x: f64| raw.partition_point(|&v| v <= x) as f64 / n;
    let d = ks_distance(&logs[1], ecdf).unwrap();
    // two-sample KS critical value at the 0.1% level
    let critical = 1.95 * (2.0 / n).sqrt();
    assert!(d < critical, "two-sample KS {d} vs {critical}");
}
