use adaptive_cs::pipeline::hypothesis::{hypothesis_risk_compare, RiskComparison, ToyHypothesisInstance, ToyLoss};

/// Minimum mean loss over every routing function from data points to
/// `options` whose image has at most `j` elements.
fn best_routing(n_points: usize, options: usize, j: usize, loss: impl Fn(usize, usize) -> f64) -> f64 {
    let total = options.pow(n_points as u32);
    let mut best = f64::INFINITY;
    for code in 0..total {
        let mut routing = Vec::with_capacity(n_points);
        let mut c = code;
        for _ in 0..n_points {
            routing.push(c % options);
            c /= options;
        }
        let mut used = routing.clone();
        used.sort();
        used.dedup();
        if used.len() > j {
            continue;
        }
        let mean = routing.iter().enumerate().map(|(i, &o)| loss(i, o)).sum::<f64>() / n_points as f64;
        best = best.min(mean);
    }
    best
}

fn naive(inst: &ToyHypothesisInstance) -> RiskComparison {
    let table = inst.loss_table().unwrap();
    let (nd, nm, nt) = (inst.data().len(), inst.masks().len(), inst.thetas().len());
    let inf_h1 = (0..nm)
        .flat_map(|m| (0..nt).map(move |t| (m, t)))
        .map(|(m, t)| (0..nd).map(|i| table[i][m][t]).sum::<f64>() / nd as f64)
        .fold(f64::INFINITY, f64::min);
    let inf_h2 = (0..nt)
        .map(|t| best_routing(nd, nm, inst.j(), |i, m| table[i][m][t]))
        .fold(f64::INFINITY, f64::min);
    let inf_h15 = best_routing(nd, nm * nt, inst.j(), |i, p| table[i][p / nt][p % nt]);
    RiskComparison { inf_h1, inf_h2, inf_h15 }
}

#[test]
fn enumeration_matches_naive_routing_oracle() {
    for seed in 0..30 {
        for loss in [ToyLoss::SquaredError, ToyLoss::Ssim] {
            let inst = ToyHypothesisInstance::random(4, 4, 3, 4, 2, loss, seed).unwrap();
            let fast = hypothesis_risk_compare(&inst).unwrap();
            let slow = naive(&inst);
            assert!((fast.inf_h1 - slow.inf_h1).abs() < 1e-12);
            assert!((fast.inf_h2 - slow.inf_h2).abs() < 1e-12);
            assert!((fast.inf_h15 - slow.inf_h15).abs() < 1e-12);
        }
    }
}

#[test]
fn adaptive_pairs_dominate_on_random_instances() {
    let (mut strict_h1, mut strict_h2) = (0, 0);
    for seed in 0..100 {
        let inst = ToyHypothesisInstance::random(4, 4, 3, 4, 2, ToyLoss::SquaredError, seed).unwrap();
        let r = hypothesis_risk_compare(&inst).unwrap();
        assert!(r.inf_h15 <= r.inf_h1 && r.inf_h15 <= r.inf_h2, "seed {seed}: {r:?}");
        strict_h1 += usize::from(r.inf_h15 < r.inf_h1);
        strict_h2 += usize::from(r.inf_h15 < r.inf_h2);
    }
    assert!(strict_h1 >= 1 && strict_h2 >= 1, "{strict_h1} {strict_h2}");
}
