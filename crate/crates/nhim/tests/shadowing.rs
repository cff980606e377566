//! Shadowing check of the torus-model unstable section: points started on
//! the computed graph and flowed ten units stay on the graph. The fiber
//! attracts along the flow while the base coordinate expands, so start
//! points sit deep inside the chart and their orbits sweep most of it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nhim::dynamics::integrate;
use nhim::graph_transform::{
    flow_unstable_manifold, Interpolation, ManifoldSettings, SectionGrid,
};
use nhim::suite::decay_envelope_weight;
use nhim::torus::{torus_perturbed_field, torus_stationary_model, PerturbationProfile};

/// Flow duration of each shadowing orbit.
const FLOW_SPAN: f64 = 10.0;
/// Base expansion is e^10 over the span, so starts this deep in the chart
/// end up near its edge without escaping.
const START_HALF_WIDTH: f64 = 1e-5;
/// Allowed distance from the graph after the flow. The fiber contracts by
/// e^-10 along the orbit, so this bound is dominated by the interpolation
/// error of the section itself (about 1e-9), with five orders of margin.
const SHADOW_TOL: f64 = 1e-4;

#[test]
fn graph_orbits_stay_on_the_graph() {
    let (alpha, amplitude) = (1.0, 0.05);
    let field = torus_perturbed_field(alpha, amplitude, PerturbationProfile::Constant);
    let grid = SectionGrid::zeros(
        (0..121).map(|i| 100.0 + 0.25 * i as f64).collect(),
        vec![(0..5).map(|i| -0.25 + 0.125 * i as f64).collect()],
        1,
        Interpolation::Cubic,
    )
    .expect("grid axes are valid");
    let (section, _report) = flow_unstable_manifold(
        &field,
        &torus_stationary_model(2),
        &decay_envelope_weight(alpha, amplitude),
        grid,
        112.0,
        &ManifoldSettings::new(1e-9),
    )
    .expect("torus solve converges");

    let mut rng = ChaCha8Rng::seed_from_u64(0x73686164);
    let mut sigma = [0.0];
    for _ in 0..20 {
        let t0 = rng.random_range(110.0..=112.0);
        let x0 = rng.random_range(-START_HALF_WIDTH..=START_HALF_WIDTH);
        section.eval(t0, &[x0], &mut sigma);
        let start = [x0, sigma[0]];

        let traj = integrate(&field, t0, &start, FLOW_SPAN, 1e-10, &[])
            .expect("orbit integrates for the full span");
        assert!((traj.final_time - (t0 - FLOW_SPAN)).abs() < 1e-9);
        let x1 = traj.final_state[0];
        assert!(
            x1.abs() <= 0.25,
            "orbit left the chart: started {x0:.2e}, ended {x1:.3}"
        );

        section.eval(traj.final_time, &[x1], &mut sigma);
        let gap = (traj.final_state[1] - sigma[0]).abs();
        assert!(
            gap < SHADOW_TOL,
            "orbit drifted {gap:.3e} from the graph (start t = {t0:.2}, x = {x0:.2e})"
        );
    }
}
