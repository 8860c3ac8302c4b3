use logsob::markov::Chain;
use logsob::sdp::SolveOptions;
use logsob::sos::{build_lsi_hierarchy, HierarchyOptions};

fn main() {
    let eps: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1e-4);
    let chain = Chain::complete(3).unwrap();
    let o = HierarchyOptions::new(3, 5);
    let c = build_lsi_hierarchy(&chain, &o).unwrap();
    let opts = SolveOptions { eps_shift: eps, verbose: true, ..Default::default() };
    let sol = c.sdp.solve(&opts).unwrap();
    println!(
        "eps={eps:.1e} status={:?} iters={} gamma={:.10} eps_aff={:.2e} gap={:.2e}",
        sol.status, sol.iterations, sol.y[c.gamma], sol.eps_aff, sol.rel_gap,
    );
}
