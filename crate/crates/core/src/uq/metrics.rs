use super::fields::{FieldSet, Quantity};
use crate::{Error, Result};

/// Discrete L2(D) norm with cell width `dx`.
pub fn l2_norm(values: &[f64], dx: f64) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() * dx).sqrt()
}

fn reference_on(grid: &FieldSet, reference: &FieldSet) -> Result<FieldSet> {
    if (grid.length() - reference.length()).abs() > 1e-12 * grid.length() {
        return Err(Error::Shape("fields live on different domains".into()));
    }
    reference.restrict_to(grid.n_cells())
}

fn check_runs(runs: &[FieldSet]) -> Result<&FieldSet> {
    let first = runs.first().ok_or_else(|| Error::Config("no runs to score".into()))?;
    if runs.iter().any(|r| r.n_cells() != first.n_cells() || r.length() != first.length()) {
        return Err(Error::Shape("runs live on different grids".into()));
    }
    Ok(first)
}

/// Root-mean-square over runs of the L2(D) error, per quantity. The
/// reference is averaged onto the runs' grid first.
pub fn err_global(runs: &[FieldSet], reference: &FieldSet) -> Result<[f64; 4]> {
    let first = check_runs(runs)?;
    let r = reference_on(first, reference)?;
    let dx = first.dx();
    let mut out = [0.0; 4];
    for q in Quantity::ALL {
        let s: f64 = runs
            .iter()
            .map(|run| {
                let e: Vec<f64> = run.quantity(q).iter().zip(r.quantity(q)).map(|(a, b)| a - b).collect();
                l2_norm(&e, dx).powi(2)
            })
            .sum();
        out[q.index()] = (s / runs.len() as f64).sqrt();
    }
    Ok(out)
}

/// Root-mean-square over runs of the cellwise error.
pub fn err_pointwise(runs: &[FieldSet], reference: &FieldSet) -> Result<FieldSet> {
    let first = check_runs(runs)?;
    let r = reference_on(first, reference)?;
    let j = runs.len() as f64;
    let values = (0..r.values().len())
        .map(|k| (runs.iter().map(|run| (run.values()[k] - r.values()[k]).powi(2)).sum::<f64>() / j).sqrt())
        .collect();
    first.with_values(values)
}

/// Mean over paired evaluation points of the L2(D) distance, per quantity.
pub fn err_mean_l2(hi: &[FieldSet], approx: &[FieldSet]) -> Result<[f64; 4]> {
    if hi.len() != approx.len() || hi.is_empty() {
        return Err(Error::Shape("need equally many, non-empty high and approximate fields".into()));
    }
    let mut out = [0.0; 4];
    for (h, a) in hi.iter().zip(approx) {
        if h.n_cells() != a.n_cells() {
            return Err(Error::Shape("high and approximate fields differ in size".into()));
        }
        for q in Quantity::ALL {
            let e: Vec<f64> = h.quantity(q).iter().zip(a.quantity(q)).map(|(x, y)| x - y).collect();
            out[q.index()] += l2_norm(&e, h.dx());
        }
    }
    for v in &mut out {
        *v /= hi.len() as f64;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(n: usize, f: impl Fn(usize) -> f64) -> FieldSet {
        FieldSet::new(n, 1.0, (0..4 * n).map(f).collect()).unwrap()
    }

    #[test]
    fn exact_runs_have_zero_error() {
        let r = field(10, |k| (k as f64).sin());
        assert_eq!(err_global(&[r.clone(), r.clone()], &r).unwrap(), [0.0; 4]);
        assert!(err_pointwise(&[r.clone()], &r).unwrap().values().iter().all(|v| *v == 0.0));
        assert_eq!(err_mean_l2(&[r.clone()], &[r.clone()]).unwrap(), [0.0; 4]);
    }

    #[test]
    fn constant_offset_gives_its_magnitude() {
        let r = field(10, |k| k as f64 * 0.1);
        let run = field(10, |k| k as f64 * 0.1 - 0.3);
        for e in err_global(&[run.clone()], &r).unwrap() {
            assert!((e - 0.3).abs() < 1e-14);
        }
        for e in err_pointwise(&[run.clone()], &r).unwrap().values() {
            assert!((e - 0.3).abs() < 1e-14);
        }
        for e in err_mean_l2(&[r.clone()], &[run]).unwrap() {
            assert!((e - 0.3).abs() < 1e-14);
        }
    }

    #[test]
    fn pointwise_error_averages_squares_over_runs() {
        let r = field(2, |_| 0.0);
        let a = field(2, |_| 1.0);
        let b = field(2, |_| -3.0);
        for e in err_pointwise(&[a.clone(), b.clone()], &r).unwrap().values() {
            assert!((e - 5f64.sqrt()).abs() < 1e-14);
        }
        for e in err_global(&[a, b], &r).unwrap() {
            assert!((e - 5f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn reference_is_restricted_to_the_run_grid() {
        let fine = field(40, |k| (k % 40) as f64);
        let coarse = fine.restrict_to(10).unwrap();
        assert_eq!(err_global(&[coarse], &fine).unwrap(), [0.0; 4]);
        let odd = field(7, |_| 0.0);
        assert!(err_global(&[odd], &fine).is_err());
    }
}
