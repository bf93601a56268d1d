use model_reward_demo::{friedman_game_report, ig_curves_report, reward_curves_report, MAX_POINTS_PER_PARTY};

#[test]
fn example_game_curves() {
    let c = reward_curves_report(r#"{"n": 2, "values": [0, 7, 5, 8]}"#, 11).unwrap();
    assert_eq!(c.phi, vec![5.0, 3.0]);
    assert_eq!(c.points.len(), 11);
    assert_eq!(c.points[0].rewards, vec![8.0, 8.0]);
    let last = c.points.last().unwrap();
    assert_eq!(last.rho, 1.0);
    assert!((last.rewards[1] - 4.8).abs() < 1e-12);
    assert!(!last.individually_rational);
    assert!(c.points[9].individually_rational);
    assert!((c.rho_r.value() - 0.920_086_243_483_048_7).abs() < 1e-12);
    assert!(c.monotone && c.submodular);
    let json = serde_json::to_value(&c).unwrap();
    assert_eq!(json["points"][0]["rho"], 0.0);
}

#[test]
fn bad_inputs_are_reported() {
    assert!(reward_curves_report("{", 5).is_err());
    assert!(reward_curves_report(r#"{"n": 2, "values": [0, 1]}"#, 5).is_err());
    assert!(friedman_game_report(0, 0.1, 1.0, 0).is_err());
    assert!(friedman_game_report(MAX_POINTS_PER_PARTY + 1, 0.1, 1.0, 0).is_err());
    assert!(ig_curves_report(10, -1.0, 1.0, 0, 5).is_err());
}

#[test]
fn friedman_game_is_deterministic() {
    let a = friedman_game_report(30, 0.05, 1.0, 4).unwrap();
    let b = friedman_game_report(30, 0.05, 1.0, 4).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.game.n(), 3);
    assert!(a.curves.monotone && a.curves.submodular);
    assert_eq!(a.curves.points.len(), 21);
}

#[test]
fn gain_curves_fall_from_grand_value() {
    let g = ig_curves_report(20, 0.1, 1.0, 2, 12).unwrap();
    assert_eq!(g.parties.len(), 3);
    for p in &g.parties {
        assert_eq!(p.points.len(), 12);
        assert!(p.points[0].1 <= g.v_n && p.points[0].1 > p.points[11].1);
        assert!(p.points.windows(2).all(|w| w[1].1 <= w[0].1));
        assert!(p.points[11].1 >= p.own_value - 1e-9);
    }
}
