//! Central-difference gradient verification.

use super::params::ParamSet;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Block name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub per_block: Vec<(String, f64)>,
    pub coordinates: usize,
}

/// Compares `analytic` against `(f(p+h) − f(p−h)) / 2h` for every coordinate of
/// `params`, using the relative error `|a − n| / max(|a|, |n|, 1e-8)`.
///
/// `params` is perturbed in place and restored bit-exactly after each probe.
pub fn grad_check<P, F>(mut f: F, params: &mut P, analytic: &P, h: f64) -> GradCheckReport
where
    P: ParamSet,
    F: FnMut(&P) -> f64,
{
    assert!(h > 0.0, "grad_check step must be positive");
    let analytic: Vec<(String, Vec<f64>)> = analytic
        .blocks()
        .into_iter()
        .map(|(n, b)| (n, b.to_vec()))
        .collect();
    let sizes: Vec<usize> = params.blocks().iter().map(|(_, b)| b.len()).collect();
    assert_eq!(sizes.len(), analytic.len(), "parameter/gradient block count differs");

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        per_block: Vec::with_capacity(sizes.len()),
        coordinates: 0,
    };
    for (b, &len) in sizes.iter().enumerate() {
        let (name, grads) = &analytic[b];
        assert_eq!(grads.len(), len, "gradient block {name} has wrong length");
        let mut block_max = 0.0f64;
        for i in 0..len {
            let original = params.blocks()[b].1[i];
            params.blocks_mut()[b].1[i] = original + h;
            let plus = f(params);
            params.blocks_mut()[b].1[i] = original - h;
            let minus = f(params);
            params.blocks_mut()[b].1[i] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = grads[i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (a - numeric).abs() / denom;
            if rel > block_max {
                block_max = rel;
            }
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((name.clone(), i));
            }
            report.coordinates += 1;
        }
        report.per_block.push((name.clone(), block_max));
    }
    report
}
