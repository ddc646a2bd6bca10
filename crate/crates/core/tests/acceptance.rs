//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured values (visible with `--nocapture`).
//!
//! Run with `cargo test --test acceptance`.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use bimot::analysis::{
    self, pushforward_rho, strassen_feasible, wasserstein2, zolotarev_project,
};
use bimot::cdf1d::lub_1d;
use bimot::conic::{
    project_cone, project_dual_cone, solve, ConeBlock, ConicProgram, CscMatrix, SolveStatus,
    SolverSettings,
};
use bimot::m2ot::{build_and_solve, extract_plan, ObjectiveSpec, DEFAULT_GAMMA_FLOOR};
use bimot::motapprox::demo_sequence;
use bimot::oracle::{grid_dominance_lp, GridSpec};
use bimot::DiscreteMeasure;

fn m1d(atoms: &[(f64, f64)]) -> DiscreteMeasure {
    let atoms: Vec<(f64, Vec<f64>)> = atoms.iter().map(|&(w, x)| (w, vec![x])).collect();
    DiscreteMeasure::new(1, &atoms).unwrap()
}

/// A random centred measure with `n` atoms in `[-2, 2]^d`.
fn random_centred(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DiscreteMeasure {
    let mut weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let atoms: Vec<(f64, Vec<f64>)> = weights
        .into_iter()
        .map(|w| (w, (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()))
        .collect();
    DiscreteMeasure::new(d, &atoms)
        .unwrap()
        .recentre(&vec![0.0; d])
        .unwrap()
}

/// Splits every atom `x` of `m` into `x + v` and `x - v` with half the
/// mass: a martingale dilation, so the result dominates `m`.
fn dilate(rng: &mut ChaCha8Rng, m: &DiscreteMeasure) -> DiscreteMeasure {
    let d = m.dim();
    let mut atoms = Vec::with_capacity(2 * m.len());
    for (w, x) in m.atoms() {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(0.1..1.0)).collect();
        atoms.push((0.5 * w, x.iter().zip(&v).map(|(a, b)| a + b).collect()));
        atoms.push((0.5 * w, x.iter().zip(&v).map(|(a, b)| a - b).collect()));
    }
    DiscreteMeasure::new(d, &atoms).unwrap()
}

fn planar_cross_pair() -> (DiscreteMeasure, DiscreteMeasure) {
    let mu = DiscreteMeasure::new(
        2,
        &[
            (0.25, vec![-1.0, 0.0]),
            (0.25, vec![1.0, 0.0]),
            (0.25, vec![-2.0, 0.0]),
            (0.25, vec![2.0, 0.0]),
        ],
    )
    .unwrap();
    let nu = DiscreteMeasure::new(
        2,
        &[
            (0.25, vec![0.0, -1.0]),
            (0.25, vec![0.0, 1.0]),
            (0.25, vec![0.0, -2.0]),
            (0.25, vec![0.0, 2.0]),
        ],
    )
    .unwrap();
    (mu, nu)
}

#[test]
fn criterion_1_planar_cross_regression() {
    let start = Instant::now();
    let (mu, nu) = planar_cross_pair();
    let diag = analysis::z2(&mu, &nu, &SolverSettings::default()).unwrap();
    assert!((diag.z2 - 2.5).abs() <= 1e-4, "z2 {}", diag.z2);
    assert!((diag.c_value - 5.0).abs() <= 1e-4, "c {}", diag.c_value);

    let rho = zolotarev_project(&mu, &nu, &SolverSettings::default()).unwrap();
    let m2 = rho.second_moment();
    assert!((m2 - 5.0).abs() <= 1e-4, "m2(rho) {m2}");
    for (_, z) in rho.atoms() {
        for v in z {
            let on_lattice = [-2.0, -1.0, 1.0, 2.0].iter().any(|l| (v - l).abs() < 1e-3);
            assert!(on_lattice, "rho atom coordinate {v} off the 16-point lattice");
        }
    }
    assert!(strassen_feasible(&mu, &rho, 1e-6).unwrap());
    assert!(strassen_feasible(&nu, &rho, 1e-6).unwrap());
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "runtime {elapsed:?}");
    println!(
        "criterion 1 PASS: z2 {:.6}, c {:.6}, m2(rho) {m2:.6}, lattice support, both dominances feasible, {elapsed:?}",
        diag.z2, diag.c_value
    );
}

#[test]
fn criterion_2_penalized_sequence_regression() {
    let start = Instant::now();
    let report = demo_sequence(&[3, 5, 20, 1000], true, &SolverSettings::default()).unwrap();
    assert!(report.aborted.is_none());
    let costs: Vec<f64> = report.records.iter().map(|r| r.transport_cost).collect();
    for (got, want) in costs.iter().zip([0.9223, 0.8209, 0.6928]) {
        assert!((got - want).abs() <= 1e-3, "{got} vs {want}");
    }
    let limit_gap = (costs[3] - 2.0 / 3.0).abs();
    assert!(limit_gap <= 5e-3, "n=1000 cost {} vs 2/3", costs[3]);
    // Costs trend monotonically down toward the limit value and never
    // undershoot it by more than 1e-2.
    let trend = demo_sequence(&[3, 5, 20, 100], true, &SolverSettings::default()).unwrap();
    let tcosts: Vec<f64> = trend.records.iter().map(|r| r.transport_cost).collect();
    assert!(tcosts.windows(2).all(|w| w[1] < w[0]), "costs {tcosts:?}");
    assert!(tcosts.iter().all(|c| *c >= 2.0 / 3.0 - 1e-2));
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "runtime {elapsed:?}");
    println!(
        "criterion 2 PASS: costs {:.4}/{:.4}/{:.4}, n=1000 within {limit_gap:.1e} of 2/3, {elapsed:?}",
        costs[0], costs[1], costs[2]
    );
}

#[test]
fn criterion_3_one_dimensional_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let settings = SolverSettings::default();
    let mut worst_m2 = 0.0f64;
    let mut worst_p = 0.0f64;
    for _ in 0..50 {
        let mu = random_centred(&mut rng, rng.gen_range(2..=12), 1);
        let nu = random_centred(&mut rng, rng.gen_range(2..=12), 1);
        let lub = lub_1d(&mu, &nu).unwrap();

        let (report, map) =
            build_and_solve(&mu, &nu, &ObjectiveSpec::Quadratic, &settings).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        let plan = extract_plan(&report, &map, DEFAULT_GAMMA_FLOOR).unwrap();
        let rho = pushforward_rho(&plan, 1e-8).unwrap();
        let diff = (rho.second_moment() - lub.second_moment()).abs();
        worst_m2 = worst_m2.max(diff);
        assert!(diff <= 1e-6, "p=2 m2 gap {diff}");

        for p in [1.5, 4.0] {
            let want: f64 = lub.atoms().map(|(w, x)| w * x[0].abs().powf(p)).sum();
            let (report, _) =
                build_and_solve(&mu, &nu, &ObjectiveSpec::Dominance(p), &settings).unwrap();
            assert_eq!(report.status, SolveStatus::Optimal);
            let diff = (report.objective_value - want).abs();
            worst_p = worst_p.max(diff);
            assert!(diff <= 1e-5, "p={p} cost gap {diff}");
        }
    }
    println!(
        "criterion 3 PASS: 50 pairs, worst p=2 m2 gap {worst_m2:.2e}, worst p in {{1.5,4}} cost gap {worst_p:.2e}"
    );
}

#[test]
fn criterion_4_identity_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let settings = SolverSettings::default();
    let mut count = 0;
    for d in [2usize, 3] {
        for _ in 0..8 {
            let mu = random_centred(&mut rng, rng.gen_range(2..=10), d);
            let nu = random_centred(&mut rng, rng.gen_range(2..=10), d);
            let diag = analysis::z2(&mu, &nu, &settings).unwrap();
            let m2_mu = mu.second_moment();
            let m2_nu = nu.second_moment();

            // The quadratic-cost identity holds by construction.
            let cz = (diag.z2 - (diag.c_value - 0.5 * (m2_mu + m2_nu))).abs();
            assert!(cz <= 1e-6);

            // Triangle equality through the projection, each ordered leg
            // evaluated as half the second-moment gap.
            let rho = zolotarev_project(&mu, &nu, &settings).unwrap();
            let m2_rho = rho.second_moment();
            let legs = 0.5 * (m2_rho - m2_mu) + 0.5 * (m2_rho - m2_nu);
            assert!(
                (diag.z2 - legs).abs() <= 1e-4,
                "triangle {} vs {} (d={d})",
                diag.z2,
                legs
            );

            // Discrepancy identities from the extracted plan.
            let (report, map) =
                build_and_solve(&mu, &nu, &ObjectiveSpec::Quadratic, &settings).unwrap();
            let plan = extract_plan(&report, &map, DEFAULT_GAMMA_FLOOR).unwrap();
            let alpha = diag.alpha.unwrap();
            let mut dev_y = 0.0;
            let mut dev_x = 0.0;
            for (i, (_, x)) in mu.atoms().enumerate() {
                for (j, (_, y)) in nu.atoms().enumerate() {
                    if let Some(z) = plan.zeta_at(i, j) {
                        let g = plan.gamma_at(i, j);
                        dev_y += g
                            * z.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                        dev_x += g
                            * z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                    }
                }
            }
            assert!(
                (dev_y - (1.0 - alpha) * diag.z2).abs() <= 1e-4,
                "discrepancy nu-side {dev_y} vs {}",
                (1.0 - alpha) * diag.z2
            );
            assert!(
                (dev_x - (1.0 + alpha) * diag.z2).abs() <= 1e-4,
                "discrepancy mu-side {dev_x} vs {}",
                (1.0 + alpha) * diag.z2
            );

            // Metric sandwich against the transport linear program.
            let w2 = wasserstein2(&mu, &nu, &settings).unwrap();
            let sigma = m2_mu.sqrt() + m2_nu.sqrt();
            assert!(0.25 * w2 * w2 <= diag.z2 + 1e-6, "lower sandwich");
            assert!(diag.z2 <= 0.5 * sigma * w2 + 1e-6, "upper sandwich");

            // Projection distances relate to the index algebraically.
            assert!(
                (diag.forward_projection_distance - 0.5 * (1.0 - alpha) * diag.z2).abs() <= 1e-9
            );
            assert!(
                (diag.backward_projection_distance - 0.5 * (1.0 + alpha) * diag.z2).abs() <= 1e-9
            );
            count += 1;
        }
    }
    println!("criterion 4 PASS: identity suite on {count} random pairs in R^2 and R^3");
}

#[test]
fn criterion_5_order_characterization() {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    let settings = SolverSettings::default();
    for k in 0..20 {
        let d = if k % 2 == 0 { 1 } else { 2 };
        let mu = random_centred(&mut rng, rng.gen_range(2..=6), d);
        let nu = dilate(&mut rng, &mu);
        let diag = analysis::z2(&mu, &nu, &settings).unwrap();
        let expected = 0.5 * (nu.second_moment() - mu.second_moment());
        assert!(
            (diag.z2 - expected).abs() <= 1e-6,
            "ordered z2 {} vs {}",
            diag.z2,
            expected
        );
        assert!(
            (diag.alpha.unwrap() - 1.0).abs() <= 1e-5,
            "alpha {}",
            diag.alpha.unwrap()
        );
        let swapped = analysis::z2(&nu, &mu, &settings).unwrap();
        assert!(
            (swapped.alpha.unwrap() + 1.0).abs() <= 1e-5,
            "swapped alpha {}",
            swapped.alpha.unwrap()
        );
    }
    println!("criterion 5 PASS: 20 dilation pairs with alpha = +1/-1 and ordered-distance identity");
}

#[test]
fn criterion_6_oracle_dominance_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(67);
    let settings = SolverSettings::default();
    let mut worst_overshoot = f64::NEG_INFINITY;
    for k in 0..20 {
        let d = if k < 12 { 1 } else { 2 };
        let n = rng.gen_range(2..=4);
        let mu = random_centred(&mut rng, n, d);
        let nu = random_centred(&mut rng, rng.gen_range(2..=4), d);
        let (report, _) =
            build_and_solve(&mu, &nu, &ObjectiveSpec::Quadratic, &settings).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal);
        let solver_cost = report.objective_value;

        let (coarse_counts, fine_counts): (Vec<usize>, Vec<usize>) = if d == 1 {
            (vec![31], vec![61])
        } else {
            (vec![13, 13], vec![25, 25])
        };
        let grid = GridSpec::new(vec![-3.0; d], vec![3.0; d], coarse_counts).unwrap();
        let (_, coarse) =
            grid_dominance_lp(&mu, &nu, |z| z.iter().map(|v| v * v).sum(), &grid, &settings)
                .unwrap();
        let fine_grid = GridSpec::new(vec![-3.0; d], vec![3.0; d], fine_counts).unwrap();
        let (_, fine) =
            grid_dominance_lp(&mu, &nu, |z| z.iter().map(|v| v * v).sum(), &fine_grid, &settings)
                .unwrap();

        // Grid restriction is an upper bound and refining never increases
        // the value beyond tolerance.
        assert!(coarse >= solver_cost - 1e-6, "coarse {coarse} vs {solver_cost}");
        assert!(fine >= solver_cost - 1e-6, "fine {fine} vs {solver_cost}");
        assert!(fine <= coarse + 1e-6);
        worst_overshoot = worst_overshoot.max(solver_cost - coarse);
        // Convergence within O(step) on refinement.
        let step = 6.0 / (fine_grid.counts[0] - 1) as f64;
        assert!(
            (fine - solver_cost).abs() <= 4.0 * step * (1.0 + 9.0),
            "fine gap {} vs step {step}",
            fine - solver_cost
        );
    }
    println!(
        "criterion 6 PASS: 20 instances, oracle always above solver (worst overshoot {worst_overshoot:.2e})"
    );
}

#[test]
fn criterion_7_solver_unit_suite() {
    // Cone projections: idempotence, 1-Lipschitz, Moreau decomposition.
    let blocks = [
        ConeBlock::Zero(3),
        ConeBlock::Nonnegative(4),
        ConeBlock::SecondOrder(4),
        ConeBlock::Power { alpha: 0.5, n: 4 },
        ConeBlock::Power { alpha: 0.3, n: 3 },
        ConeBlock::Power { alpha: 0.75, n: 5 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for block in &blocks {
        let n = block.len();
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        for _ in 0..1000 {
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let p = project_cone(&u, block).unwrap();
            let pp = project_cone(&p, block).unwrap();
            let drift = p
                .iter()
                .zip(&pp)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(drift <= 1e-9, "idempotence {drift}");

            let neg: Vec<f64> = u.iter().map(|v| -v).collect();
            let pd = project_dual_cone(&neg, block).unwrap();
            let mut inner = 0.0;
            let mut recon = 0.0f64;
            for i in 0..n {
                inner += p[i] * pd[i];
                recon = recon.max((p[i] - pd[i] - u[i]).abs());
            }
            assert!(inner.abs() <= 1e-9, "moreau orthogonality {inner}");
            assert!(recon <= 1e-9, "moreau reconstruction {recon}");

            if let Some((u2, p2)) = prev.take() {
                let du: f64 = u.iter().zip(&u2).map(|(a, b)| (a - b) * (a - b)).sum();
                let dp: f64 = p.iter().zip(&p2).map(|(a, b)| (a - b) * (a - b)).sum();
                assert!(dp.sqrt() <= du.sqrt() + 1e-12, "lipschitz");
            }
            prev = Some((u, p));
        }
    }

    // Planted-optimum linear and second-order programs.
    let mut worst = 0.0f64;
    for inst in 0..10 {
        let (n, m) = (20, 8);
        let mut triplets = Vec::new();
        for c in 0..n {
            for _ in 0..3 {
                triplets.push((rng.gen_range(0..m), c, rng.gen_range(-1.0..1.0)));
            }
        }
        let a = CscMatrix::from_triplets(m, n, &triplets);
        // Plant x* >= 0 with complementary s*.
        let xstar: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { rng.gen_range(0.5..2.0) } else { 0.0 })
            .collect();
        let sstar: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 0.0 } else { rng.gen_range(0.5..2.0) })
            .collect();
        let ystar: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut c = sstar.clone();
        a.mul_t_acc(1.0, &ystar, &mut c);
        let mut b = vec![0.0; m];
        a.mul_acc(1.0, &xstar, &mut b);
        let planted: f64 = c.iter().zip(&xstar).map(|(ci, xi)| ci * xi).sum();
        let prog = ConicProgram {
            nvars: n,
            objective: c,
            a,
            b,
            cone_blocks: vec![(ConeBlock::Nonnegative(n), 0..n)],
        };
        let report = solve(&prog, &SolverSettings::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal, "instance {inst}");
        let gap = (report.objective_value - planted).abs() / (1.0 + planted.abs());
        worst = worst.max(gap);
        assert!(gap <= 1e-6, "planted LP gap {gap}");
    }
    for inst in 0..5 {
        // One boundary second-order block plus nonnegative variables.
        let (k, extra, m) = (4, 6, 5);
        let n = k + extra;
        let mut triplets = Vec::new();
        for c in 0..n {
            for _ in 0..2 {
                triplets.push((rng.gen_range(0..m), c, rng.gen_range(-1.0..1.0)));
            }
        }
        let a = CscMatrix::from_triplets(m, n, &triplets);
        let z: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut xstar = vec![t];
        xstar.extend(&z);
        let mut sstar = vec![t];
        sstar.extend(z.iter().map(|v| -v));
        let kappa = rng.gen_range(0.5..1.5);
        for s in sstar.iter_mut() {
            *s *= kappa;
        }
        for i in 0..extra {
            if i % 2 == 0 {
                xstar.push(rng.gen_range(0.5..2.0));
                sstar.push(0.0);
            } else {
                xstar.push(0.0);
                sstar.push(rng.gen_range(0.5..2.0));
            }
        }
        let ystar: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut c = sstar.clone();
        a.mul_t_acc(1.0, &ystar, &mut c);
        let mut b = vec![0.0; m];
        a.mul_acc(1.0, &xstar, &mut b);
        let planted: f64 = c.iter().zip(&xstar).map(|(ci, xi)| ci * xi).sum();
        let prog = ConicProgram {
            nvars: n,
            objective: c,
            a,
            b,
            cone_blocks: vec![
                (ConeBlock::SecondOrder(k), 0..k),
                (ConeBlock::Nonnegative(extra), k..n),
            ],
        };
        let report = solve(&prog, &SolverSettings::default()).unwrap();
        assert_eq!(report.status, SolveStatus::Optimal, "socp instance {inst}");
        let gap = (report.objective_value - planted).abs() / (1.0 + planted.abs());
        worst = worst.max(gap);
        assert!(gap <= 1e-6, "planted SOCP gap {gap}");
    }
    println!(
        "criterion 7 PASS: projection properties at 1e-9 on 1000 points per cone; planted optima recovered (worst gap {worst:.2e})"
    );
}

fn square_grid(n: usize) -> DiscreteMeasure {
    let w = 1.0 / (n * n) as f64;
    let mut atoms = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = -0.5 + i as f64 / (n - 1) as f64;
            let y = -0.5 + j as f64 / (n - 1) as f64;
            atoms.push((w, vec![x, y]));
        }
    }
    DiscreteMeasure::new(2, &atoms).unwrap()
}

fn five_point_cross() -> DiscreteMeasure {
    DiscreteMeasure::new(
        2,
        &[
            (0.2, vec![0.4, 0.0]),
            (0.2, vec![-0.4, 0.0]),
            (0.2, vec![0.0, 0.4]),
            (0.2, vec![0.0, -0.4]),
            (0.2, vec![0.0, 0.0]),
        ],
    )
    .unwrap()
}

#[test]
fn criterion_8_planar_grid_index() {
    // Sanity run on the coarse discretization: must finish within a minute
    // and land in the order-violation band.
    let nu = five_point_cross();
    let start = Instant::now();
    let coarse_settings = SolverSettings {
        tol_feas: 1e-6,
        tol_gap: 1e-6,
        ..Default::default()
    };
    let coarse = analysis::z2(&square_grid(41), &nu, &coarse_settings).unwrap();
    let coarse_elapsed = start.elapsed();
    let coarse_alpha = coarse.alpha.unwrap();
    assert!(
        coarse_elapsed.as_secs_f64() < 60.0,
        "41x41 runtime {coarse_elapsed:?}"
    );
    assert!(
        (-1.0..-0.8).contains(&coarse_alpha),
        "41x41 alpha {coarse_alpha}"
    );

    // The reference discretization (takes minutes).
    let fine_settings = SolverSettings {
        tol_feas: 1e-7,
        tol_gap: 1e-7,
        ..Default::default()
    };
    let start = Instant::now();
    let fine = analysis::z2(&square_grid(121), &nu, &fine_settings).unwrap();
    let fine_elapsed = start.elapsed();
    let alpha = fine.alpha.unwrap();
    assert!((alpha + 0.8898).abs() <= 5e-3, "121x121 alpha {alpha}");
    assert!((fine.z2 - 0.0233).abs() <= 5e-4, "121x121 z2 {}", fine.z2);
    println!(
        "criterion 8 PASS: 41x41 alpha {coarse_alpha:.4} in {coarse_elapsed:?}; 121x121 alpha {alpha:.4}, z2 {:.5} in {fine_elapsed:?}",
        fine.z2
    );
}
