use chirp2d::*;
use std::time::Instant;

fn main() {
    for &m in &[25usize, 50, 100] {
        let spec = ModelSpec::new(
            vec![ChirpComponent::new(2.0, 3.0, 1.5, 0.5, 2.5, 0.75)],
            NoiseSpec::gaussian(0.5, 7),
        );
        let grid = synthesize(&spec, m, m).unwrap();
        let t = Instant::now();
        let fit = estimate_one(&grid, &EstimatorConfig::new(1)).unwrap();
        let el = t.elapsed();
        println!(
            "M=N={m}: fit in {:.2?} alpha={:.6} beta={:.6} (true 1.5, 0.5)",
            el,
            fit.components[0].component.alpha,
            fit.components[0].component.beta
        );
    }
}
