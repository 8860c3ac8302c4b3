use logsob::markov::Chain;
use logsob::sdp::SolveOptions;
use logsob::sos::{build_lsi_hierarchy, HierarchyOptions};

fn main() {
    let sym = std::env::args().any(|a| a == "--sym");
    let verbose = std::env::args().any(|a| a == "-v");
    let chain = Chain::complete(3).unwrap();
    let mut o = HierarchyOptions::new(3, 5);
    o.symmetry = sym;
    let c = build_lsi_hierarchy(&chain, &o).unwrap();
    for eps in [1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6, 0.0] {
        let opts = SolveOptions {
            eps_shift: eps,
            verbose,
            ..Default::default()
        };
        let sol = c.sdp.solve(&opts).unwrap();
        let gamma = match &c.symmetry {
            Some(_) => -sol.lambda[c.gamma],
            None => sol.y[c.gamma],
        };
        println!(
            "eps={eps:.1e} status={:?} iters={} obj={:+.10} gamma={:.10} alpha={:.10} eps_aff={:.2e} gap={:.2e}",
            sol.status, sol.iterations, sol.objective, gamma, 1.0 / gamma, sol.eps_aff, sol.rel_gap,
        );
    }
}
