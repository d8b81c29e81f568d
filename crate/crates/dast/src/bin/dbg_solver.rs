// debug: restart vs no-restart at experiment scale
use dast::measure::{self, MeasurementPlan};
use dast::net::{build_net, eps_for_target_size};
use dast::solver::*;
use dast::experiment::{default_true_system, derive_seed};

fn main() {
    let rho = 0.7;
    let eps = eps_for_target_size(rho, 2000).unwrap();
    let net = build_net(rho, eps).unwrap();
    let n = 80;
    let plan = MeasurementPlan::FrequencyUniform { n };
    let matrix = measure::build_matrix(&plan, &net).unwrap();
    let truth = default_true_system();
    let clean = measure::apply_plan(&plan, &truth).unwrap();
    let y = measure::add_noise(&clean, 0.01, plan.noise_kind(), derive_seed(1, &[0]));
    let mu = choose_mu(0.01, n, rho, 0.5).unwrap();
    let p = DastProblem::new(matrix, y, mu).unwrap();
    println!("gap_tol default = {:.3e}", SolverConfig::default().effective_gap_tol(p.observations()));
    for restart in [true, false] {
        for max_iter in [2000usize, 10000, 50000] {
            let cfg = SolverConfig { max_iter, restart, ..SolverConfig::default() };
            let t0 = std::time::Instant::now();
            let sol = solve_dast(&p, &cfg).unwrap();
            println!("restart={restart} max={max_iter}: {:?} iters {} gap {:.3e} obj {:.9} accepted {} [{:.2?}]",
                sol.status, sol.iterations, sol.dual_gap, sol.objective,
                sol.objective_trace.len(), t0.elapsed());
        }
    }
}
