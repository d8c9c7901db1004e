use ttls::bench::{run_sweep, SweepAxis, SweepSpec};
use ttls::inference::SelectionPolicy;
use ttls::pipeline::{run, Method, PipelineOptions};
use ttls::simulate::{generate_joint_truth, mcc, SimulationConfig};
use ttls::Execution;

fn main() {
    let mut ttls_mccs = Vec::new();
    let mut single_mccs = Vec::new();
    let start = std::time::Instant::now();
    for rep in 0..10u64 {
        let truth = generate_joint_truth(&SimulationConfig {
            p: 30,
            n: 500,
            groups: 3,
            shared_fraction: 0.4,
            edges_per_node: 2.0,
            seed: 42 + rep,
            magnitude: (0.3, 0.4),
        })
        .unwrap();
        let supports: Vec<_> = (0..3).map(|g| truth.support(g)).collect();
        for (method, store) in [
            (Method::Ttls, &mut ttls_mccs),
            (Method::SingleTarget, &mut single_mccs),
        ] {
            let out = run(
                &truth.dataset,
                &PipelineOptions {
                    method,
                    policy: SelectionPolicy::Fdr { q: 0.05 },
                    ..PipelineOptions::default()
                },
            )
            .unwrap();
            let m: f64 = out
                .groups
                .iter()
                .zip(&supports)
                .map(|(a, s)| mcc(&a.edges, s, 30).mcc)
                .sum::<f64>()
                / 3.0;
            store.push(m);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "recovery ({:.1}s): ttls mean {:.4}, single mean {:.4}",
        start.elapsed().as_secs_f64(),
        mean(&ttls_mccs),
        mean(&single_mccs)
    );
    let worst = ttls_mccs
        .iter()
        .zip(&single_mccs)
        .map(|(t, s)| t - s)
        .fold(f64::INFINITY, f64::min);
    println!("  worst pairwise ttls-minus-single: {worst:+.4}");

    let spec = SweepSpec {
        axis: SweepAxis::SharedFraction,
        values: vec![0.1, 0.5, 0.9],
        fixed: SimulationConfig {
            p: 100,
            n: 100,
            groups: 5,
            shared_fraction: 0.4,
            edges_per_node: 2.0,
            seed: 42,
            magnitude: (0.1, 0.4),
        },
        replicates: 10,
        methods: vec![Method::Ttls, Method::SingleTarget],
        policy: SelectionPolicy::Auto,
        execution: Execution::Parallel,
    };
    let start = std::time::Instant::now();
    let report = run_sweep(&spec).unwrap();
    println!("sweep took {:.1}s", start.elapsed().as_secs_f64());
    for method in [Method::Ttls, Method::SingleTarget] {
        let at: Vec<f64> = [0.1, 0.5, 0.9]
            .iter()
            .map(|&v| report.mean_mcc(method, v).unwrap())
            .collect();
        println!("  {method}: {at:?}");
    }
}
