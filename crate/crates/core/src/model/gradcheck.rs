use std::borrow::Borrow;

use rand::seq::index::sample;

use super::{Example, ModelError, ModelParams};
use crate::seed;

/// Coordinates probed per check (all of them when the model is smaller).
pub const GRAD_CHECK_COORDS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_coordinate: usize,
    pub coordinates_checked: usize,
}

/// Compare the analytic gradient of `params` against central finite
/// differences.
pub fn grad_check<E: Borrow<Example>>(
    params: &ModelParams,
    batch: &[E],
    epsilon: f64,
) -> Result<GradCheckReport, ModelError> {
    let (_, analytic) = params.loss_and_grad(batch)?;
    grad_check_against(params, batch, &analytic, epsilon, GRAD_CHECK_COORDS, 0)
}

/// Central differences on `n_coords` seeded random coordinates, scored by
/// |g_a − g_fd| / max(|g_a|, |g_fd|, 1e-12).
pub fn grad_check_against<E: Borrow<Example>>(
    params: &ModelParams,
    batch: &[E],
    analytic: &[f64],
    epsilon: f64,
    n_coords: usize,
    seed: u64,
) -> Result<GradCheckReport, ModelError> {
    assert!(
        (1e-8..=1e-3).contains(&epsilon),
        "epsilon must lie in [1e-8, 1e-3]"
    );
    if analytic.len() != params.flat.len() {
        return Err(ModelError::DimensionMismatch {
            expected: params.flat.len(),
            got: analytic.len(),
        });
    }
    let dim = params.flat.len();
    let coords: Vec<usize> = if dim <= n_coords {
        (0..dim).collect()
    } else {
        let mut picked = sample(&mut seed::rng(seed, "grad-check", &[]), dim, n_coords).into_vec();
        picked.sort_unstable();
        picked
    };

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_coordinate: coords[0],
        coordinates_checked: coords.len(),
    };
    for &i in &coords {
        let original = probe.flat[i];
        probe.flat[i] = original + epsilon;
        let plus = probe.loss(batch)?;
        probe.flat[i] = original - epsilon;
        let minus = probe.loss(batch)?;
        probe.flat[i] = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-12);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_coordinate = i;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Label;
    use crate::model::{init_params, FeatureVector, Hyper, LayerShape};
    use rand::Rng;

    fn random_batch(seed: u64, n: usize, dim: usize) -> Vec<Example> {
        let mut rng = seed::rng(seed, "batch", &[]);
        (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..dim)
                    .map(|_| {
                        if rng.gen_bool(0.5) {
                            rng.gen_range(0.0..1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Example {
                    features: FeatureVector::from_dense(&x),
                    label: if i % 2 == 0 {
                        Label::Phishing
                    } else {
                        Label::Legitimate
                    },
                }
            })
            .collect()
    }

    #[test]
    fn logistic_gradient_matches() {
        let mut p = init_params(0, 4, 1);
        p.flat.iter_mut().for_each(|w| *w *= 5.0);
        let batch = random_batch(2, 8, 16);
        let r = grad_check(&p, &batch, 1e-5).unwrap();
        assert!(r.max_rel_err < 1e-6, "{r:?}");
        assert_eq!(r.coordinates_checked, 17);
    }

    #[test]
    fn mlp_gradient_matches() {
        let mut p = init_params(5, 4, 3);
        p.flat.iter_mut().for_each(|w| *w *= 3.0);
        let batch = random_batch(4, 6, 16);
        let r = grad_check(&p, &batch, 1e-5).unwrap();
        assert!(r.max_rel_err < 1e-6, "{r:?}");
    }

    #[test]
    fn zero_gradient_at_perfect_fit() {
        // Scores of ±800 saturate: analytic and numeric gradients both vanish.
        let p = ModelParams {
            shapes: vec![LayerShape { rows: 2, cols: 1 }],
            flat: vec![800.0, -800.0, 0.0],
            hyper: Hyper::default(),
        };
        let batch = vec![
            Example {
                features: FeatureVector::from_dense(&[1.0, 0.0]),
                label: Label::Phishing,
            },
            Example {
                features: FeatureVector::from_dense(&[0.0, 1.0]),
                label: Label::Legitimate,
            },
        ];
        let r = grad_check(&p, &batch, 1e-4).unwrap();
        assert!(r.max_rel_err < 1e-9, "{r:?}");
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let p = init_params(0, 4, 9);
        let batch = random_batch(10, 8, 16);
        let (_, mut g) = p.loss_and_grad(&batch).unwrap();
        g[5] += 1.0;
        let r = grad_check_against(&p, &batch, &g, 1e-5, GRAD_CHECK_COORDS, 0).unwrap();
        assert!(r.max_rel_err > 0.5);
        assert_eq!(r.worst_coordinate, 5);
    }

    #[test]
    fn samples_a_subset_of_large_models() {
        let p = init_params(0, 1024, 1);
        let batch = random_batch(1, 2, 4096);
        let r = grad_check(&p, &batch, 1e-5).unwrap();
        assert_eq!(r.coordinates_checked, GRAD_CHECK_COORDS);
        assert!(r.max_rel_err < 1e-6, "{r:?}");
    }
}
