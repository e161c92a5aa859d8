use lagopf::network::nominal_load;
use lagopf::opf::OperatingPoint;
use lagopf::solver::{multi_start, solve_acopf, solve_partial_lagrangian, SolverConfig};
use lagopf::twobus::{find_solutions, TwoBusParams};

fn point(theta: f64) -> OperatingPoint {
    OperatingPoint {
        v: vec![1.0, 1.0],
        theta: vec![0.0, -theta],
    }
}

#[test]
fn solver_reaches_the_root_of_each_basin() {
    let p = TwoBusParams::canonical();
    let s = find_solutions(&p).unwrap();
    let net = p.to_network();
    let load = nominal_load(&net);
    let cfg = SolverConfig::default();
    for (start, root, cost, mu) in [
        (0.3, s.theta_global, s.cost_global, s.mu_global),
        (2.3, s.theta_local, s.cost_local, s.mu_local),
    ] {
        let r = solve_acopf(&net, &load, &point(start), &cfg).unwrap();
        assert!(r.converged(), "{r:?}");
        assert!(
            (-r.point.theta[1] - root).abs() < 1e-6,
            "{} vs {root}",
            -r.point.theta[1]
        );
        assert!((r.cost - cost).abs() < 1e-6 * cost);
        assert!((r.duals.mu_p[1] - mu).abs() < 1e-5 * mu, "{} vs {mu}", r.duals.mu_p[1]);
    }
}

#[test]
fn multi_start_finds_both_roots() {
    let p = TwoBusParams::canonical();
    let s = find_solutions(&p).unwrap();
    let net = p.to_network();
    let clusters = multi_start(&net, &nominal_load(&net), 50, &SolverConfig::default()).unwrap();
    assert_eq!(clusters.len(), 2, "{clusters:?}");
    assert!((clusters[0].result.cost - s.cost_global).abs() < 1e-6 * s.cost_global);
    assert!((clusters[1].result.cost - s.cost_local).abs() < 1e-6 * s.cost_local);
}

#[test]
fn lagrangian_minimizer_from_local_duals_is_in_global_basin() {
    let p = TwoBusParams::canonical();
    let s = find_solutions(&p).unwrap();
    let net = p.to_network();
    let load = nominal_load(&net);
    let cfg = SolverConfig::default();
    let local = solve_acopf(&net, &load, &point(2.3), &cfg).unwrap();
    let (x, _) = solve_partial_lagrangian(&net, &load, &local.duals, &OperatingPoint::flat(&net), &cfg).unwrap();
    let r = solve_acopf(&net, &load, &x, &cfg).unwrap();
    assert!(r.converged());
    assert!((r.cost - s.cost_global).abs() < 1e-6 * s.cost_global);
}
