//! Protocol-level behaviour of the adaptation rules.

use oie_core::adaptation::{oie_fixed_point, EffectiveNoise, OieParams};
use oie_core::report::{slope_report, Metric};
use oie_core::trial_sim::{run_protocol, ProtocolSpec, Rule};

#[test]
fn oie_protocol_lowers_cocontraction_with_practice() {
    let spec = ProtocolSpec { solo_trials: 0, trials_per_block: 5, ..ProtocolSpec::default() };
    let ds = run_protocol(&spec, 11).unwrap();
    let params = OieParams::default();
    let effective = EffectiveNoise::from_regressions(&spec.noise.visual, &spec.noise.haptic).unwrap();
    let slopes = slope_report(&ds.rows, Metric::UMean).unwrap();
    let mut checked = 0;
    for s in slopes {
        let first = ds.rows.iter().find(|r| r.condition == s.condition && r.trial == 1).unwrap();
        let (sv, sh) = effective.at(s.condition);
        let star = oie_fixed_point(sv, sh, &params).unwrap();
        if first.u_set > star + 0.05 {
            assert!(s.slope < 0.0, "{}: slope {} with u {} above u* {}", s.condition, s.slope, first.u_set, star);
            checked += 1;
        }
    }
    assert!(checked >= 3, "only {checked} conditions started above equilibrium");
}

#[test]
fn fixed_rule_keeps_setpoint() {
    let spec = ProtocolSpec { solo_trials: 1, trials_per_block: 3, rule: Rule::Fixed, u0: 0.4, ..ProtocolSpec::default() };
    let ds = run_protocol(&spec, 4).unwrap();
    assert!(ds.rows.iter().all(|r| r.u_set == 0.4));
    for s in slope_report(&ds.rows, Metric::USet).unwrap() {
        assert!(s.slope.abs() < 1e-12);
    }
}
