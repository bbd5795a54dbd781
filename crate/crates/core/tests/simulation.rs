//! Properties of the quasi-static tendon simulation.

mod common;

use common::sim::{model, random_states, rotate, tendon, PENALTY};
use common::{angle_diff, orthosis2, published_orthosis2, uniform_tko_stack};
use kresling_orthosis::equilibrium::{
    objective, run_schedule, solve_equilibrium, sweep_single_tendon, total_energy, SolveOptions,
    TendonCommand,
};
use kresling_orthosis::schedules::{make_schedule, MotionMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn energy_gradient_matches_finite_differences() {
    common::sim::energy_gradient_error();
}

#[test]
fn objective_gradient_matches_finite_differences() {
    common::sim::objective_gradient_error();
}

#[test]
fn perturbed_states_store_energy() {
    let m = model(&orthosis2());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for x in random_states(&m, &mut rng, 20) {
        assert!(total_energy(&m, &x).unwrap().0 > 0.0);
    }
}

#[test]
fn zero_command_is_neutral() {
    common::sim::zero_command_beta();
}

#[test]
fn uniform_command_compresses_without_bending() {
    common::sim::uniform_command_beta();
}

#[test]
fn sweeps_are_equivariant_on_a_symmetric_stack() {
    common::sim::sweep_equivariance_error();
}

#[test]
fn shifting_a_mixed_command_rotates_the_marker() {
    let m = model(&uniform_tko_stack());
    let opts = SolveOptions::default();
    let c = [0.12, 0.05, 0.0, 0.0, 0.02, 0.0];
    let base = solve_equilibrium(&m, &TendonCommand::new(c).unwrap(), &opts).unwrap();
    let shifted: [f64; 6] = std::array::from_fn(|i| c[(i + 5) % 6]);
    let moved = solve_equilibrium(&m, &TendonCommand::new(shifted).unwrap(), &opts).unwrap();
    let (p, q) = (m.marker(&base.configuration), m.marker(&moved.configuration));
    assert!((rotate([p.x, p.y, p.z], 1) - q).norm() < 1e-6);
}

#[test]
fn full_pulls_stay_within_the_closed_form_bound() {
    common::sim::full_pull_margin();
}

#[test]
fn sweeps_start_and_end_neutral() {
    let m = model(&orthosis2());
    for k in [1, 4] {
        let tr = sweep_single_tendon(&m, tendon(k), 3, 0.5, &SolveOptions::default()).unwrap();
        let s = tr.samples();
        assert_eq!((s[0].t, s[2].t), (0.0, 14.0));
        assert!(s[0].beta_deg < 1e-3 && s[2].beta_deg < 1e-3);
        assert!(s[1].beta_deg > 1.0);
    }
}

#[test]
fn bending_grows_while_pulling() {
    // Above roughly half contraction the stack snaps through, so the ramp
    // stays in the smooth branch.
    let m = model(&orthosis2());
    for k in 1..=6 {
        let tr = sweep_single_tendon(&m, tendon(k), 29, 0.4, &SolveOptions::default()).unwrap();
        let pull: Vec<f64> = tr.samples().iter().filter(|s| s.t <= 7.0).map(|s| s.beta_deg).collect();
        for w in pull.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "T{k}: {} then {}", w[0], w[1]);
        }
    }
}

#[test]
fn solves_descend_and_respect_slack() {
    let m = model(&published_orthosis2());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let neutral = m.neutral_tendon_lengths();
    for _ in 0..20 {
        let c: [f64; 6] = std::array::from_fn(|_| if rng.gen_bool(0.5) { rng.gen_range(0.0..0.4) } else { 0.0 });
        let command = TendonCommand::new(c).unwrap();
        let seed_energy = objective(&m, &command, PENALTY, &m.neutral_parameters()).unwrap().unwrap().0;
        let r = solve_equilibrium(&m, &command, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.energy <= seed_energy);
        let targets = command.targets(&neutral);
        for (k, ((&length, &target), &force)) in r.tendon_lengths.iter().zip(&targets).zip(&r.tendon_forces).enumerate() {
            let slack = length <= target + 1e-6;
            let taut = force > 0.0;
            assert!(slack || taut, "tendon {} neither slack nor taut", k + 1);
            assert!(!(taut && length <= target), "tendon {} taut while slack", k + 1);
        }
    }
}

#[test]
fn extension_leans_dorsally() {
    let m = model(&orthosis2());
    let schedule = make_schedule(MotionMode::Extension, 0.3).unwrap();
    let tr = run_schedule(&m, &schedule, 2.0, &SolveOptions::default()).unwrap();
    let peak = tr.samples().iter().max_by(|a, b| a.beta_deg.total_cmp(&b.beta_deg)).unwrap();
    assert!(peak.beta_deg > 1.0);
    assert!(angle_diff(peak.phi_deg, 0.0).abs() <= 30.0, "phi {}", peak.phi_deg);
}

#[test]
fn idle_schedule_stays_neutral() {
    let m = model(&orthosis2());
    let idle = kresling_orthosis::schedules::Schedule::idle(5.0).unwrap();
    let tr = run_schedule(&m, &idle, 1.0, &SolveOptions::default()).unwrap();
    assert_eq!(tr.len(), 6);
    let first = tr.samples()[0];
    assert!(tr.samples().iter().all(|s| s.marker == first.marker && s.beta_deg < 1e-9));
}

#[test]
fn circumduction_visits_every_sector_in_order() {
    common::sim::circumduction_sectors();
}

#[test]
fn single_unit_matches_grid_search() {
    common::sim::grid::single_unit_vs_grid();
}
