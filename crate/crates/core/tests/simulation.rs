use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use locprob_core::analytic::{failure_prob_sum, CoefficientVariant};
use locprob_core::model::{NetworkParams, ShadowModel};
use locprob_core::montecarlo::{
    estimate, estimate_with, sample_realization, Labeling, RunOptions, ShadowDraw, ShadowParams, TrialProtocol,
};
use locprob_core::shadowing::{failure_prob_shadow, ShadowFailureMethod};

#[test]
fn radii_are_area_uniform() {
    let net = NetworkParams::new(1000, 500).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let radii: Vec<f64> = (0..1000)
        .flat_map(|_| sample_realization(&mut rng, &net).positions.into_iter().map(|p| p.0))
        .collect();
    assert_eq!(radii.len(), 1_000_000);
    assert!(radii.iter().all(|&r| (0.0..=1.0).contains(&r)));
    for rho in [0.3f64, 0.7] {
        let p = rho * rho;
        let frac = radii.iter().filter(|&&r| r <= rho).count() as f64 / radii.len() as f64;
        let se = (p * (1.0 - p) / radii.len() as f64).sqrt();
        assert!((frac - p).abs() < 4.0 * se, "rho={rho}: {frac} vs {p}");
    }
}

#[test]
fn centre_probe_matches_counting_sum() {
    let grid = [
        (50, 0.2, 0.3),
        (50, 0.5, 0.5),
        (50, 0.8, 0.7),
        (100, 0.2, 0.2),
        (100, 0.5, 0.3),
        (100, 0.9, 0.6),
        (300, 0.2, 0.099),
        (300, 0.2, 0.3),
        (300, 0.5, 0.15),
        (300, 0.8, 0.2),
        (1000, 0.5, 0.08),
        (1000, 0.95, 0.2),
    ];
    for (i, (n, a, b)) in grid.into_iter().enumerate() {
        let net = NetworkParams::with_fraction(n, a).unwrap();
        let p = failure_prob_sum(&net, b).unwrap().p_loc;
        let est = estimate(&net, b, &TrialProtocol::center(), None, 100_000, 1000 + i as u64).unwrap();
        assert!(est.agrees_with(p, 3.0), "n={n} a={a} b={b}: {} vs {p}", est.p_hat);
    }
}

#[test]
fn shadowed_centre_probe_matches_integration() {
    let model = ShadowModel::new(0.0, -80.0, 0.1, 3.5, 12.0, 40.0).unwrap();
    let shadow = ShadowParams {
        sigma1: model.sigma1,
        b_hat_max: model.b_hat_max,
    };
    let protocol = TrialProtocol::center().with_shadow(ShadowDraw::PerNode);
    for (i, (k, b_o)) in [(10, 0.1), (10, 0.25), (10, 0.4), (40, 0.1), (40, 0.3)]
        .into_iter()
        .enumerate()
    {
        let net = NetworkParams::new(50, k).unwrap();
        let dist = model.bhat_distribution(b_o * model.domain_radius).unwrap();
        let p = failure_prob_shadow(
            &net,
            &dist,
            ShadowFailureMethod::IntegrateConditional,
            CoefficientVariant::Corrected,
        )
        .unwrap()
        .p_loc;
        let est = estimate(&net, b_o, &protocol, Some(&shadow), 100_000, 500 + i as u64).unwrap();
        assert!(est.agrees_with(p, 3.0), "k={k} b_o={b_o}: {} vs {p}", est.p_hat);
    }
}

#[test]
fn boundary_depresses_all_node_estimate() {
    for (n, a, b) in [(300, 0.5, 0.2), (500, 0.3, 0.1), (100, 0.2, 0.4)] {
        let net = NetworkParams::with_fraction(n, a).unwrap();
        let centre = estimate(
            &net,
            b,
            &TrialProtocol::center().with_labeling(Labeling::FixedCount),
            None,
            20_000,
            3,
        )
        .unwrap();
        let all = estimate(&net, b, &TrialProtocol::all_nl(), None, 20_000, 3).unwrap();
        let slack = 3.0 * (centre.std_error().powi(2) + all.std_error().powi(2)).sqrt();
        assert!(
            all.p_hat <= centre.p_hat + slack,
            "n={n} a={a} b={b}: all {} centre {}",
            all.p_hat,
            centre.p_hat
        );
    }
}

#[test]
fn tiny_shadowing_reduces_to_fixed_coverage() {
    let net = NetworkParams::new(200, 100).unwrap();
    let shadow = ShadowParams {
        sigma1: 1e-9,
        b_hat_max: 0.9,
    };
    let plain = estimate(&net, 0.2, &TrialProtocol::all_nl(), None, 200, 5).unwrap();
    for draw in [ShadowDraw::PerNode, ShadowDraw::PerLink] {
        let shadowed = estimate(
            &net,
            0.2,
            &TrialProtocol::all_nl().with_shadow(draw),
            Some(&shadow),
            200,
            5,
        )
        .unwrap();
        assert!(
            (shadowed.p_hat - plain.p_hat).abs() < 0.01,
            "{draw:?}: {} vs {}",
            shadowed.p_hat,
            plain.p_hat
        );
    }
}

#[test]
fn per_link_decorrelates_audibility() {
    // one draw shared by all links and a draw per link are different models
    let model = ShadowModel::new(0.0, -80.0, 0.1, 3.5, 12.0, 40.0).unwrap();
    let shadow = ShadowParams {
        sigma1: model.sigma1,
        b_hat_max: model.b_hat_max,
    };
    let net = NetworkParams::new(50, 10).unwrap();
    let node = estimate(
        &net,
        0.1,
        &TrialProtocol::center().with_shadow(ShadowDraw::PerNode),
        Some(&shadow),
        50_000,
        8,
    )
    .unwrap();
    let link = estimate(
        &net,
        0.1,
        &TrialProtocol::center().with_shadow(ShadowDraw::PerLink),
        Some(&shadow),
        50_000,
        8,
    )
    .unwrap();
    assert!(node.p_hat > 0.0 && link.p_hat > 0.0);
    assert!(node.p_hat != link.p_hat);
}

#[test]
fn estimates_ignore_worker_count() {
    let net = NetworkParams::new(400, 120).unwrap();
    let model = ShadowModel::new(0.0, -80.0, 0.1, 3.5, 12.0, 40.0).unwrap();
    let shadow = ShadowParams {
        sigma1: model.sigma1,
        b_hat_max: model.b_hat_max,
    };
    for protocol in [
        TrialProtocol::center(),
        TrialProtocol::all_nl(),
        TrialProtocol::all_nl().with_shadow(ShadowDraw::PerLink),
        TrialProtocol::center().with_shadow(ShadowDraw::PerNode),
    ] {
        let runs: Vec<_> = [1, 3, 4]
            .into_iter()
            .map(|w| {
                estimate_with(
                    &net,
                    0.12,
                    &protocol,
                    Some(&shadow),
                    300,
                    77,
                    RunOptions { workers: Some(w) },
                )
                .unwrap()
            })
            .collect();
        assert!(runs.windows(2).all(|w| w[0] == w[1]), "{protocol}");
    }
}
