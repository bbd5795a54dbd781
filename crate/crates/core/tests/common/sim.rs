//! Simulator checks shared by the property tests and the acceptance run.
//! Each one panics with a description on failure.

use super::{angle_diff, orthosis2, published_orthosis2, sector_of, uniform_tko_stack};
use kresling_orthosis::equilibrium::{
    build_elastic_model, objective, run_schedule, solve_equilibrium, sweep_single_tendon, total_energy, ElasticModel,
    SolveOptions, TendonCommand, TrajectorySample, DEFAULT_CREASE_STIFFNESS, DEFAULT_FACET_STIFFNESS,
};
use kresling_orthosis::geometry::{Chirality, UnitSpec};
use kresling_orthosis::kinematics::{stack_bend_angle, tendon_columns, theoretical_bend_report, TendonId};
use kresling_orthosis::schedules::make_circumduction_schedule;
use kresling_orthosis::sizing::OrthosisDesign;
use nalgebra::{Point3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PENALTY: f64 = 1e3 * DEFAULT_CREASE_STIFFNESS;

pub fn model(design: &OrthosisDesign) -> ElasticModel {
    build_elastic_model(design, DEFAULT_CREASE_STIFFNESS, DEFAULT_FACET_STIFFNESS).unwrap()
}

pub fn tendon(k: usize) -> TendonId {
    TendonId::new(k).unwrap()
}

/// Random states around neutral with every unit bent by at least 1e-3 rad.
pub fn random_states(m: &ElasticModel, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
    let neutral = m.neutral_parameters();
    let mut out = Vec::new();
    while out.len() < count {
        let mut x = neutral.clone();
        for unit in x.chunks_mut(4) {
            unit[0] += rng.gen_range(-3.0..3.0);
            unit[1] += rng.gen_range(-0.05..0.05);
            let beta: f64 = rng.gen_range(1e-3..0.15);
            let phi: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            unit[2] = beta * phi.cos();
            unit[3] = beta * phi.sin();
        }
        out.push(x);
    }
    out
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let (mut up, mut down) = (x.to_vec(), x.to_vec());
            up[i] += step;
            down[i] -= step;
            (f(&up) - f(&down)) / (2.0 * step)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

/// Worst relative gradient error of the elastic energy over 100 states.
pub fn energy_gradient_error() -> f64 {
    let m = model(&orthosis2());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for x in random_states(&m, &mut rng, 100) {
        let (_, g) = total_energy(&m, &x).unwrap();
        let fd = central_difference(|y| total_energy(&m, y).unwrap().0, &x, 1e-6);
        worst = worst.max(relative_error(&fd, &g));
    }
    assert!(worst < 1e-5, "worst energy gradient error {worst:e}");
    worst
}

/// Worst relative gradient error of the full objective (springs, tendon
/// penalty, barriers) and the number of feasible states checked.
pub fn objective_gradient_error() -> (f64, usize) {
    let m = model(&published_orthosis2());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst, mut checked): (f64, usize) = (0.0, 0);
    for x in random_states(&m, &mut rng, 120) {
        let c: [f64; 6] = std::array::from_fn(|_| rng.gen_range(0.0..0.3));
        let command = TendonCommand::new(c).unwrap();
        let Some((_, g)) = objective(&m, &command, PENALTY, &x).unwrap() else { continue };
        let eval = |y: &[f64]| objective(&m, &command, PENALTY, y).unwrap().map(|v| v.0);
        if (0..x.len()).any(|i| {
            let mut y = x.clone();
            y[i] += 1e-6;
            eval(&y).is_none()
        }) {
            continue;
        }
        let fd = central_difference(|y| eval(y).unwrap(), &x, 1e-6);
        worst = worst.max(relative_error(&fd, &g));
        checked += 1;
    }
    assert!(worst < 1e-5, "worst objective gradient error {worst:e}");
    assert!(checked >= 100, "only {checked} feasible states");
    (worst, checked)
}

/// Bend angle under a zero command.
pub fn zero_command_beta() -> f64 {
    let m = model(&orthosis2());
    let r = solve_equilibrium(&m, &TendonCommand::zero(), &SolveOptions::default()).unwrap();
    assert!(r.converged);
    let beta = stack_bend_angle(&r.configuration).0;
    assert!(beta < 1e-6, "beta {beta}");
    beta
}

/// Bend angle of the symmetric stack under a uniform command; the stack
/// must also shorten.
pub fn uniform_command_beta() -> f64 {
    let m = model(&uniform_tko_stack());
    let r = solve_equilibrium(&m, &TendonCommand::uniform(0.2).unwrap(), &SolveOptions::default()).unwrap();
    assert!(r.converged);
    let beta = stack_bend_angle(&r.configuration).0;
    assert!(beta < 1e-4, "beta {beta}");
    let neutral = m.neutral_configuration();
    for (c, n) in r.configuration.unit_configs.iter().zip(&neutral.unit_configs) {
        assert!(c.height <= n.height);
    }
    let total = |s: &kresling_orthosis::kinematics::StackConfiguration| s.unit_configs.iter().map(|c| c.height).sum::<f64>();
    assert!(total(&r.configuration) < total(&neutral) - 1.0);
    beta
}

/// Rotation by `k` × 60° about the forearm axis.
pub fn rotate(p: [f64; 3], k: usize) -> Point3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), (60.0 * k as f64).to_radians()) * Point3::from(p)
}

/// Largest marker mismatch between the T1 sweep rotated by 60°·(k−1) and
/// the Tk sweep on the symmetric stack.
pub fn sweep_equivariance_error() -> f64 {
    let m = model(&uniform_tko_stack());
    let opts = SolveOptions::default();
    let reference = sweep_single_tendon(&m, tendon(1), 15, 0.3, &opts).unwrap();
    assert!(reference.max_beta_deg() > 1.0);
    let mut worst: f64 = 0.0;
    for k in 2..=6 {
        let sweep = sweep_single_tendon(&m, tendon(k), 15, 0.3, &opts).unwrap();
        for (a, b) in reference.samples().iter().zip(sweep.samples()) {
            worst = worst.max((rotate(a.marker, k - 1) - Point3::from(b.marker)).norm());
        }
    }
    assert!(worst < 1e-6, "marker mismatch {worst:e} mm");
    worst
}

/// Full single-tendon pulls on the published design: largest margin of β
/// over the summed closed-form maximum (must stay below 0.5°). Each pull
/// must also bend towards its own sector.
pub fn full_pull_margin() -> f64 {
    let design = published_orthosis2();
    let m = model(&design);
    let report = theoretical_bend_report(&design).unwrap();
    let bound = report.summed_lateral.min(report.summed_sagittal);
    let mut worst = f64::NEG_INFINITY;
    for k in 1..=6 {
        let r = solve_equilibrium(&m, &TendonCommand::single(tendon(k), 1.0).unwrap(), &SolveOptions::default()).unwrap();
        assert!(r.converged);
        let (beta, phi) = stack_bend_angle(&r.configuration);
        worst = worst.max(beta - bound);
        let centre = tendon(k).sector_center_deg();
        assert!(angle_diff(phi, centre).abs() <= 15.0, "T{k}: phi {phi} vs sector {centre}");
    }
    assert!(worst <= 0.5, "beta exceeds the bound by {worst}");
    worst
}

/// Ordered, de-duplicated sectors the azimuth passes through while bent.
pub fn visited_sectors(samples: &[TrajectorySample], min_beta: f64) -> Vec<usize> {
    let mut seq: Vec<usize> = Vec::new();
    for s in samples.iter().filter(|s| s.beta_deg > min_beta) {
        let sector = sector_of(s.phi_deg);
        if seq.last() != Some(&sector) {
            seq.push(sector);
        }
    }
    seq
}

pub fn circumduction_sectors() -> Vec<usize> {
    let m = model(&orthosis2());
    let schedule = make_circumduction_schedule(0.3).unwrap();
    let tr = run_schedule(&m, &schedule, 2.0, &SolveOptions::default()).unwrap();
    let seq = visited_sectors(tr.samples(), 0.5);
    assert_eq!(seq, vec![0, 1, 2, 3, 4, 5], "sectors {seq:?}");
    seq
}

/// A single movable unit checked against brute force: the energy is
/// rebuilt from scratch with nalgebra rotations and minimised over height
/// and twist by compass search at every node of a (β, φ) grid.
pub mod grid {
    use super::*;

    const SECTION: usize = 3;
    pub const BETA_STEP: f64 = 0.5;
    pub const PHI_STEP: f64 = 5.0;

    struct Oracle {
        spec: UnitSpec,
        shift: usize,
        mountain_rest: [f64; 6],
        valley_rest: [f64; 6],
        kc: f64,
        kf: f64,
        /// Tendon diagonal column in this section and its slack at neutral.
        column: usize,
        excess_at_neutral: f64,
    }

    fn hexagon(radius: f64) -> [Vector3<f64>; 6] {
        std::array::from_fn(|k| {
            let a = (60.0 * k as f64).to_radians();
            Vector3::new(radius * a.cos(), radius * a.sin(), 0.0)
        })
    }

    impl Oracle {
        /// Bottom vertices fixed; top frame twisted about z, tilted by β
        /// towards φ, lifted by h along the half-tilted normal.
        fn vertices(&self, h: f64, twist_deg: f64, beta_deg: f64, phi_deg: f64) -> ([Vector3<f64>; 6], [Vector3<f64>; 6]) {
            let phi = phi_deg.to_radians();
            let axis = nalgebra::Unit::new_normalize(Vector3::new(-phi.sin(), phi.cos(), 0.0));
            let tilt = Rotation3::from_axis_angle(&axis, beta_deg.to_radians());
            let half = Rotation3::from_axis_angle(&axis, beta_deg.to_radians() / 2.0);
            let twist = Rotation3::from_axis_angle(&Vector3::z_axis(), twist_deg.to_radians());
            let lift = half * Vector3::new(0.0, 0.0, h);
            let top = hexagon(self.spec.a2()).map(|v| lift + tilt * (twist * v));
            (hexagon(self.spec.a1()), top)
        }

        fn energy(&self, h: f64, twist: f64, beta: f64, phi: f64) -> f64 {
            let (bottom, top) = self.vertices(h, twist, beta, phi);
            let mut e = 0.0;
            for k in 0..6 {
                let m = (top[k] - bottom[k]).norm() - self.mountain_rest[k];
                let v = (top[(k + self.shift) % 6] - bottom[k]).norm() - self.valley_rest[k];
                e += 0.5 * self.kf * m * m + 0.5 * self.kc * v * v;
            }
            let d = (top[(self.column + self.shift) % 6] - bottom[self.column]).norm();
            let excess = (d - self.valley_rest[self.column] + self.excess_at_neutral).max(0.0);
            e + 0.5 * PENALTY * excess * excess
        }

        /// Minimum over (h, twist) by compass search from `start`.
        fn relax(&self, beta: f64, phi: f64, start: (f64, f64)) -> (f64, (f64, f64)) {
            let (mut x, mut best) = (start, self.energy(start.0, start.1, beta, phi));
            let mut step = 1.0;
            while step > 1e-7 {
                let mut moved = false;
                for (dh, dt) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    let e = self.energy(x.0 + dh, x.1 + dt, beta, phi);
                    if e < best {
                        best = e;
                        x = (x.0 + dh, x.1 + dt);
                        moved = true;
                    }
                }
                if !moved {
                    step *= 0.5;
                }
            }
            (best, x)
        }
    }

    /// Solver and grid minimiser for section 3 under a light T1 pull, as
    /// ((β, φ) solved, (β, φ) grid).
    pub fn single_unit_vs_grid() -> ((f64, f64), (f64, f64)) {
        let design = orthosis2();
        let m = model(&design).with_movable_sections(&[SECTION]).unwrap();
        let spec = *design.unit(SECTION);
        let h0 = design.heights()[SECTION - 1];
        let cos = (spec.a1().powi(2) + spec.a2().powi(2) + h0 * h0 - spec.b().powi(2)) / (2.0 * spec.a1() * spec.a2());
        let theta0 = cos.acos().to_degrees() * if spec.chirality() == Chirality::Cw { -1.0 } else { 1.0 };
        let shift = if spec.chirality() == Chirality::Cw { 1 } else { 5 };

        let contraction = 0.08;
        let k = 1;
        let column = tendon_columns(&design, tendon(k))[SECTION - 1];
        let mut oracle = Oracle {
            spec,
            shift,
            mountain_rest: [0.0; 6],
            valley_rest: [0.0; 6],
            kc: DEFAULT_CREASE_STIFFNESS,
            kf: DEFAULT_FACET_STIFFNESS,
            column,
            excess_at_neutral: contraction * m.neutral_tendon_lengths()[k - 1],
        };
        let (bottom, top) = oracle.vertices(h0, theta0, 0.0, 0.0);
        oracle.mountain_rest = std::array::from_fn(|i| (top[i] - bottom[i]).norm());
        oracle.valley_rest = std::array::from_fn(|i| (top[(i + shift) % 6] - bottom[i]).norm());
        let (model_mountain, model_valley) = m.rest_lengths(SECTION);
        for i in 0..6 {
            assert!((model_mountain[i] - oracle.mountain_rest[i]).abs() < 1e-9);
            assert!((model_valley[i] - oracle.valley_rest[i]).abs() < 1e-9);
        }

        let command = TendonCommand::single(tendon(k), contraction).unwrap();
        let r = solve_equilibrium(&m, &command, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        let unit = r.configuration.unit_configs[SECTION - 1];
        // Barriers are dormant here, so both energies must agree.
        let oracle_at_solution = oracle.energy(unit.height, unit.twist_deg, unit.bend_angle_deg, unit.bend_azimuth_deg);
        assert!((oracle_at_solution - r.energy).abs() < 1e-9 * r.energy.max(1.0), "{oracle_at_solution} vs {}", r.energy);
        assert!(unit.bend_angle_deg > 2.0 * BETA_STEP, "too little bend to resolve: {}", unit.bend_angle_deg);

        let mut best = (f64::INFINITY, 0.0, 0.0);
        let betas = (0..=((2.0 * unit.bend_angle_deg + 2.0) / BETA_STEP) as usize).map(|i| i as f64 * BETA_STEP);
        for beta in betas {
            let mut start = (h0, theta0);
            for j in 0..(360.0 / PHI_STEP) as usize {
                let phi = -180.0 + j as f64 * PHI_STEP;
                let (e, x) = oracle.relax(beta, phi, start);
                start = x;
                if e < best.0 {
                    best = (e, beta, phi);
                }
            }
        }
        let (_, beta_grid, phi_grid) = best;
        let solved = (unit.bend_angle_deg, unit.bend_azimuth_deg);
        assert!((solved.0 - beta_grid).abs() <= BETA_STEP, "beta {} vs grid {beta_grid}", solved.0);
        assert!(angle_diff(solved.1, phi_grid).abs() <= PHI_STEP, "phi {} vs grid {phi_grid}", solved.1);
        (solved, (beta_grid, phi_grid))
    }
}
