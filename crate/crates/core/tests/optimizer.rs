//! Intensity and sampling-probability search.

use pmqkd::{
    analytic_rate, optimize, Bounds, ChannelSpec, OptimizerConfig, ProtocolParams, Strategy,
};

fn base(loss_db: f64) -> ProtocolParams {
    ProtocolParams::new(ChannelSpec::from_loss_db(loss_db).unwrap(), 1e-3)
}

#[test]
fn optimum_at_45_db_is_near_the_operating_intensity() {
    let r = optimize(&base(45.0), &Bounds::default(), &OptimizerConfig::default()).unwrap();
    assert!(!r.infeasible);
    let ratio = r.mu_opt / 9.78e-4;
    assert!((1.0 / 1.5..=1.5).contains(&ratio), "mu_opt {}", r.mu_opt);
}

#[test]
fn optimal_rate_falls_with_loss() {
    let config = OptimizerConfig {
        record_trace: false,
        ..OptimizerConfig::default()
    };
    let rates: Vec<f64> = (0..=10)
        .map(|i| {
            let loss = 10.0 + 4.0 * i as f64;
            optimize(&base(loss), &Bounds::default(), &config).unwrap().rate_opt
        })
        .collect();
    for w in rates.windows(2) {
        assert!(w[1] <= w[0], "{rates:?}");
    }
    assert!(rates[0] > 0.0);
}

#[test]
fn same_seed_same_trace() {
    let run = |seed| {
        let config = OptimizerConfig {
            seed,
            ..OptimizerConfig::default()
        };
        optimize(&base(30.0), &Bounds::default(), &config).unwrap()
    };
    let (a, b) = (run(1), run(1));
    assert_eq!(a, b);
    assert!(!a.trace.is_empty());
    // The final re-evaluation of the optimum is counted but not traced.
    assert_eq!(a.trace.len() + 1, a.evaluations);
}

#[test]
fn every_strategy_beats_the_grid() {
    for strategy in [Strategy::Evolution, Strategy::Pattern] {
        let config = OptimizerConfig {
            strategy,
            ..OptimizerConfig::default()
        };
        for loss in [15.0, 35.0] {
            let r = optimize(&base(loss), &Bounds::default(), &config).unwrap();
            assert!(r.rate_opt >= r.grid_rate, "{strategy:?} at {loss} dB");
            let p = ProtocolParams {
                mu: r.mu_opt,
                p_s: r.p_s_opt,
                ..base(loss)
            };
            assert_eq!(analytic_rate(&p), r.rate_opt);
        }
    }
}

#[test]
fn no_key_is_reported_as_infeasible() {
    let r = optimize(&base(70.0), &Bounds::default(), &OptimizerConfig::default()).unwrap();
    assert!(r.infeasible);
    assert_eq!(r.rate_opt, 0.0);
}
