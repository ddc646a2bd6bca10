use bimot::cdf1d::lub_1d;
use bimot::conic::SolveStatus;
use bimot::m2ot::{build_and_solve, ObjectiveSpec};
use bimot::DiscreteMeasure;

fn main() {
    let m1d = |atoms: &[(f64, f64)]| {
        let atoms: Vec<(f64, Vec<f64>)> = atoms.iter().map(|&(w, x)| (w, vec![x])).collect();
        DiscreteMeasure::new(1, &atoms).unwrap()
    };
    let mu = m1d(&[(0.5, -1.0), (0.5, 1.0)]);
    let nu = m1d(&[(0.2, -2.0), (0.6, 0.0), (0.2, 2.0)]);
    let lub = lub_1d(&mu, &nu).unwrap();
    for p in [1.5f64, 2.0, 4.0] {
        let want: f64 = lub.atoms().map(|(w, x)| w * x[0].abs().powf(p)).sum();
        let t0 = std::time::Instant::now();
        let (rep, _) = build_and_solve(&mu, &nu, &ObjectiveSpec::Dominance(p), &Default::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        println!(
            "p {p}: solver {:.9} oracle {:.9} diff {:.2e} iters {} ({:?})",
            rep.objective_value, want, (rep.objective_value - want).abs(), rep.iterations, t0.elapsed()
        );
    }
}
