use ellbound::relax::RelaxOptions;
use ellbound::sim::{simulate, TrackScenario};

#[test]
fn fused_track_is_no_worse_than_best_sensor() {
    let sc = TrackScenario::default();
    let report = simulate(&sc, &RelaxOptions::default()).unwrap();
    assert_eq!(report.runs, 100);
    assert_eq!(report.violations.containment, 0);
    assert_eq!(report.violations.update_order, 0);
    assert_eq!(report.violations.fusion_order, 0);
    let mut worst = f64::NEG_INFINITY;
    for m in &report.steps {
        let best = m.rmse_sensor.iter().copied().fold(f64::INFINITY, f64::min);
        let margin = m.rmse_fused_dec - best;
        worst = worst.max(margin);
        assert!(margin <= 0.1, "step {}: fused {} vs best sensor {best}", m.step, m.rmse_fused_dec);
        assert!(m.vol_fused_dec <= m.vol_fused_ci + 1e-8, "step {}", m.step);
    }
    eprintln!("worst fused-minus-best-sensor rmse: {worst:.4}");
}
