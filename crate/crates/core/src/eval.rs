//! Prediction quality metrics and benchmark-set generation.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Experiment, InstructionId, PortMapping3};
use crate::sim::simulate;

pub const DEFAULT_HEATMAP_BINS: usize = 35;

/// Label stored with generated benchmark sets.
pub const BENCHMARK_SAMPLING: &str = "iid-draws-with-replacement";

/// Model throughput for every experiment, in input order.
pub fn predict(m: &PortMapping3, experiments: &[Experiment]) -> Result<Vec<(Experiment, f64)>> {
    experiments
        .par_iter()
        .map(|e| Ok((e.clone(), simulate(m, e)?.throughput)))
        .collect()
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

/// Mean absolute percentage error as a fraction.
pub fn mape(pred: &[f64], meas: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), meas.len())?;
    if pred.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    let mut sum = 0.0;
    for (&p, &m) in pred.iter().zip(meas) {
        if m.is_nan() || m <= 0.0 {
            return Err(Error::NonPositiveMeasurement(m));
        }
        sum += (p - m).abs() / m;
    }
    Ok(sum / pred.len() as f64)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_lengths(xs.len(), ys.len())?;
    if xs.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            out[k] = avg;
        }
        start = end;
    }
    out
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_lengths(xs.len(), ys.len())?;
    pearson(&ranks(xs), &ranks(ys))
}

/// `count` experiments of exactly `size` instructions, each drawn i.i.d.
/// with replacement from `isa` and merged into a multiset.
pub fn gen_benchmark<R: Rng + ?Sized>(
    isa: &[InstructionId],
    size: u32,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Experiment>> {
    if isa.is_empty() {
        return Err(Error::EmptyIsa);
    }
    if size == 0 {
        return Err(Error::InvalidConfig(
            "benchmark size must be positive".into(),
        ));
    }
    (0..count)
        .map(|_| {
            Experiment::new((0..size).map(|_| (isa[rng.random_range(0..isa.len())].clone(), 1)))
        })
        .collect()
}

/// `bins × bins` counts over `[0, max]²`, indexed `[measured][predicted]`.
/// Values on the upper edge land in the last bin.
pub fn heatmap_bins(pred: &[f64], meas: &[f64], bins: usize) -> Result<Vec<Vec<u64>>> {
    check_lengths(pred.len(), meas.len())?;
    if bins == 0 {
        return Err(Error::InvalidConfig("bins must be positive".into()));
    }
    let max = pred.iter().chain(meas).fold(0.0f64, |a, &b| a.max(b));
    let bin = |v: f64| -> usize {
        if max <= 0.0 {
            return 0;
        }
        ((v / max * bins as f64) as usize).min(bins - 1)
    };
    let mut grid = vec![vec![0u64; bins]; bins];
    for (&p, &m) in pred.iter().zip(meas) {
        grid[bin(m)][bin(p)] += 1;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reduce_to_two_level;
    use crate::model::{fixtures, insn};
    use crate::oracle::oracle_throughput;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn predict_worked_example() {
        let m = fixtures::two_level_example_as_three();
        let e = Experiment::new([(insn("add"), 2), (insn("mul"), 1), (insn("store"), 1)]).unwrap();
        assert_eq!(
            predict(&m, std::slice::from_ref(&e)).unwrap(),
            vec![(e, 1.5)]
        );

        let single =
            PortMapping3::from_edges(1, [(insn("i"), crate::model::PortSet::single(0), 1)])
                .unwrap();
        let e = Experiment::new([(insn("i"), 5)]).unwrap();
        assert_eq!(predict(&single, &[e]).unwrap()[0].1, 5.0);
    }

    #[test]
    fn predict_matches_oracle() {
        let m = fixtures::three_level_example();
        let isa: Vec<_> = m.instructions().cloned().collect();
        let es = gen_benchmark(&isa, 5, 50, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for (e, t) in predict(&m, &es).unwrap() {
            let (m2, e2) = reduce_to_two_level(&m, &e).unwrap();
            assert!((oracle_throughput(&m2, &e2).unwrap() - t).abs() <= 1e-6);
        }
    }

    #[test]
    fn mape_cases() {
        assert_eq!(mape(&[1.5], &[2.0]).unwrap(), 0.25);
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mape(&[1.0, 3.0], &[2.0, 2.0]).unwrap() - 0.5).abs() <= 1e-9);
        assert!(matches!(
            mape(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            mape(&[1.0], &[0.0]),
            Err(Error::NonPositiveMeasurement(_))
        ));
    }

    #[test]
    fn pearson_cases() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let doubled: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let negated: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &doubled).unwrap() - 1.0).abs() <= 1e-12);
        assert!((pearson(&xs, &negated).unwrap() + 1.0).abs() <= 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() <= 1e-9);
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::DegenerateVariance)
        ));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn spearman_cases() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 300.0]).unwrap() - 1.0).abs() <= 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() <= 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() <= 1e-9);
        assert!(matches!(
            spearman(&[1.0, 2.0], &[5.0, 5.0]),
            Err(Error::DegenerateVariance)
        ));
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn benchmark_generation() {
        let isa = vec![insn("a"), insn("b"), insn("c")];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let singles = gen_benchmark(&isa, 1, 10, &mut rng).unwrap();
        assert!(singles.iter().all(|e| e.as_singleton().is_some()));
        let five = gen_benchmark(&isa, 5, 100, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(five.iter().all(|e| e.total_mass() == 5));
        assert_eq!(
            five,
            gen_benchmark(&isa, 5, 100, &mut ChaCha8Rng::seed_from_u64(2)).unwrap()
        );
        assert!(gen_benchmark(&[], 5, 1, &mut rng).is_err());
    }

    #[test]
    fn heatmap_cases() {
        let g = heatmap_bins(&[1.0], &[2.0], 4).unwrap();
        let nonzero: Vec<_> = g.iter().flatten().filter(|&&c| c > 0).collect();
        assert_eq!(nonzero, vec![&1]);
        assert_eq!(g[3][2], 1);

        let xs = [0.5, 1.0, 2.0, 3.5, 4.0];
        let g = heatmap_bins(&xs, &xs, DEFAULT_HEATMAP_BINS).unwrap();
        for (r, row) in g.iter().enumerate() {
            for (c, &n) in row.iter().enumerate() {
                if r != c {
                    assert_eq!(n, 0);
                }
            }
        }
        assert_eq!(g.len(), 35);
        assert!(heatmap_bins(&[1.0], &[], 3).is_err());
    }

    proptest! {
        #[test]
        fn heatmap_conserves_points(points in prop::collection::vec((0.0f64..50.0, 0.0f64..50.0), 0..200), bins in 1usize..40) {
            let (p, m): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
            let g = heatmap_bins(&p, &m, bins).unwrap();
            prop_assert_eq!(g.iter().flatten().sum::<u64>(), points.len() as u64);
        }

        #[test]
        fn mape_is_scale_invariant(points in prop::collection::vec((0.1f64..10.0, 0.1f64..10.0), 1..50), k in 0.01f64..100.0) {
            let (p, m): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
            let kp: Vec<f64> = p.iter().map(|x| x * k).collect();
            let km: Vec<f64> = m.iter().map(|x| x * k).collect();
            prop_assert!((mape(&p, &m).unwrap() - mape(&kp, &km).unwrap()).abs() <= 1e-9);
        }

        #[test]
        fn spearman_is_monotone_invariant(points in prop::collection::vec((0.1f64..10.0, 0.1f64..10.0), 3..50)) {
            let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
            if let Ok(s) = spearman(&x, &y) {
                let tx: Vec<f64> = x.iter().map(|v| v.ln() * 3.0 + 1.0).collect();
                let ty: Vec<f64> = y.iter().map(|v| v.powi(3)).collect();
                prop_assert!((s - spearman(&tx, &ty).unwrap()).abs() <= 1e-9);
            }
        }
    }
}
