use std::time::Instant;

use rayon::prelude::*;

use super::fields::FieldSet;
use super::sampling::RandomSample;
use crate::{Error, Result};

/// Elementwise sum of equally long vectors by a balanced pairwise tree, so
/// the rounding pattern depends only on the number of terms.
pub fn pairwise_sum<S: AsRef<[f64]>>(samples: &[S]) -> Vec<f64> {
    match samples.len() {
        0 => Vec::new(),
        1 => samples[0].as_ref().to_vec(),
        n => {
            let (a, b) = samples.split_at(n / 2);
            let mut s = pairwise_sum(a);
            for (x, y) in s.iter_mut().zip(pairwise_sum(b)) {
                *x += y;
            }
            s
        }
    }
}

fn check_samples<S: AsRef<[f64]>>(samples: &[S]) -> Result<usize> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Config("estimator needs at least one sample".into()))?;
    let len = first.as_ref().len();
    if samples.iter().any(|s| s.as_ref().len() != len) {
        return Err(Error::Shape("samples have different lengths".into()));
    }
    Ok(len)
}

/// Monte Carlo estimate of the mean: the pointwise sample average.
pub fn mc_estimate<S: AsRef<[f64]>>(samples: &[S]) -> Result<Vec<f64>> {
    check_samples(samples)?;
    let inv = 1.0 / samples.len() as f64;
    Ok(pairwise_sum(samples).into_iter().map(|s| s * inv).collect())
}

/// Unbiased pointwise sample variance; zero for a single sample.
pub fn sample_variance<S: AsRef<[f64]>>(samples: &[S]) -> Result<Vec<f64>> {
    let mean = mc_estimate(samples)?;
    let m = samples.len();
    if m < 2 {
        return Ok(vec![0.0; mean.len()]);
    }
    let dev: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| s.as_ref().iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).collect())
        .collect();
    Ok(pairwise_sum(&dev).into_iter().map(|s| s / (m - 1) as f64).collect())
}

/// Variance from separately estimated first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceField {
    pub values: Vec<f64>,
    /// Entries where `E[q^2] - E[q]^2` came out negative and were clipped.
    pub clipped: usize,
}

pub fn variance_field(mean: &[f64], mean_sq: &[f64]) -> Result<VarianceField> {
    if mean.len() != mean_sq.len() {
        return Err(Error::Shape("mean and second moment differ in length".into()));
    }
    let mut clipped = 0;
    let values = mean
        .iter()
        .zip(mean_sq)
        .map(|(m, s)| {
            let v = s - m * m;
            if v < 0.0 {
                clipped += 1;
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(VarianceField { values, clipped })
}

/// Control-variate coefficient per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaField {
    pub values: Vec<f64>,
    /// Entries whose coarse samples had no variance; those fall back to 1.
    pub degenerate: usize,
}

/// Regression slope of fine on coarse samples, entry by entry.
pub fn lambda_coeff<S: AsRef<[f64]>>(fine: &[S], coarse: &[S]) -> Result<LambdaField> {
    if fine.len() != coarse.len() {
        return Err(Error::Shape("fine and coarse sample counts differ".into()));
    }
    if fine.len() < 2 {
        return Err(Error::Config("control variate needs at least two paired samples".into()));
    }
    let len = check_samples(fine)?;
    if check_samples(coarse)? != len {
        return Err(Error::Shape("fine and coarse fields differ in length".into()));
    }
    let (sxy, sxx) = moments2(fine, coarse)?;
    let m = fine.len() as f64;
    let cm = mc_estimate(coarse)?;
    let mut degenerate = 0;
    let values = (0..len)
        .map(|k| {
            let floor = m * (1e-12 * cm[k].abs()).powi(2);
            if sxx[k] <= floor {
                degenerate += 1;
                1.0
            } else {
                sxy[k] / sxx[k]
            }
        })
        .collect();
    Ok(LambdaField { values, degenerate })
}

/// Centred cross and coarse sums of squares.
fn moments2<S: AsRef<[f64]>>(fine: &[S], coarse: &[S]) -> Result<(Vec<f64>, Vec<f64>)> {
    let fm = mc_estimate(fine)?;
    let cm = mc_estimate(coarse)?;
    let (xy, xx): (Vec<Vec<f64>>, Vec<Vec<f64>>) = fine
        .iter()
        .zip(coarse)
        .map(|(f, c)| {
            let f = f.as_ref();
            let c = c.as_ref();
            let xy = (0..f.len()).map(|k| (f[k] - fm[k]) * (c[k] - cm[k])).collect();
            let xx = (0..f.len()).map(|k| (c[k] - cm[k]).powi(2)).collect();
            (xy, xx)
        })
        .unzip();
    Ok((pairwise_sum(&xy), pairwise_sum(&xx)))
}

/// How control-variate coefficients are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMode {
    /// Per-entry regression coefficient.
    Regression,
    /// One regression coefficient per block of `block` consecutive entries
    /// (one per quantity with the usual field layout).
    Scalar { block: usize },
    /// All coefficients one: plain telescoping MLMC.
    Unit,
}

/// One level of a multilevel hierarchy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSpec {
    pub n_cells: usize,
    pub dt: f64,
    pub samples: usize,
}

/// Paired samples of one level, all on the coarsest grid. Level zero has no
/// coarse partners.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelSamples {
    pub fine: Vec<Vec<f64>>,
    pub coarse: Vec<Vec<f64>>,
    pub runs: usize,
    pub cost_seconds: f64,
}

impl LevelSamples {
    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Self {
        let m = |v: &Vec<Vec<f64>>| v.iter().map(|s| s.iter().map(|x| f(*x)).collect()).collect();
        Self { fine: m(&self.fine), coarse: m(&self.coarse), runs: self.runs, cost_seconds: self.cost_seconds }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlmcEstimate {
    pub estimate: Vec<f64>,
    /// `lambdas[l]` multiplies level `l` inside the correction of level
    /// `l + 1`; the last entry is identically one.
    pub lambdas: Vec<Vec<f64>>,
    pub degenerate: Vec<usize>,
    /// Level terms: `E[q_0]` and `E[q_l - lambda_{l-1} q_{l-1}]`.
    pub level_means: Vec<Vec<f64>>,
    /// Sample variance of each level term.
    pub level_variances: Vec<Vec<f64>>,
    /// Sample variance of the uncorrected differences `q_l - q_{l-1}`.
    pub plain_variances: Vec<Vec<f64>>,
}

/// Control-variate combination of per-level samples.
pub fn combine_levels(levels: &[LevelSamples], mode: LambdaMode) -> Result<MlmcEstimate> {
    let n_levels = levels.len();
    if n_levels == 0 {
        return Err(Error::Config("MLMC needs at least one level".into()));
    }
    let len = check_samples(&levels[0].fine)?;
    for (l, lv) in levels.iter().enumerate().skip(1) {
        if lv.fine.len() != lv.coarse.len() {
            return Err(Error::Shape(format!("level {l} has unpaired samples")));
        }
        if check_samples(&lv.fine)? != len || check_samples(&lv.coarse)? != len {
            return Err(Error::Shape(format!("level {l} fields differ in length")));
        }
    }

    let mut lambdas = Vec::with_capacity(n_levels);
    let mut degenerate = Vec::with_capacity(n_levels);
    for lv in &levels[1..] {
        let lam = match mode {
            LambdaMode::Unit => LambdaField { values: vec![1.0; len], degenerate: 0 },
            LambdaMode::Regression => lambda_coeff(&lv.fine, &lv.coarse)?,
            LambdaMode::Scalar { block } => scalar_lambda(&lv.fine, &lv.coarse, block)?,
        };
        degenerate.push(lam.degenerate);
        lambdas.push(lam.values);
    }
    lambdas.push(vec![1.0; len]);
    degenerate.push(0);

    let mut level_means = Vec::with_capacity(n_levels);
    let mut level_variances = Vec::with_capacity(n_levels);
    let mut plain_variances = Vec::with_capacity(n_levels);
    for (l, lv) in levels.iter().enumerate() {
        if l == 0 {
            level_means.push(mc_estimate(&lv.fine)?);
            let v = sample_variance(&lv.fine)?;
            level_variances.push(v.clone());
            plain_variances.push(v);
            continue;
        }
        let lam = &lambdas[l - 1];
        let corrected: Vec<Vec<f64>> = lv
            .fine
            .iter()
            .zip(&lv.coarse)
            .map(|(f, c)| (0..len).map(|k| f[k] - lam[k] * c[k]).collect())
            .collect();
        let plain: Vec<Vec<f64>> = lv
            .fine
            .iter()
            .zip(&lv.coarse)
            .map(|(f, c)| (0..len).map(|k| f[k] - c[k]).collect())
            .collect();
        level_means.push(mc_estimate(&corrected)?);
        level_variances.push(sample_variance(&corrected)?);
        plain_variances.push(sample_variance(&plain)?);
    }

    // prod_{i=l}^{L-1} lambda_i, built from the top down
    let mut weight = lambdas[n_levels - 1].clone();
    let mut estimate: Vec<f64> = (0..len).map(|k| weight[k] * level_means[n_levels - 1][k]).collect();
    for l in (0..n_levels - 1).rev() {
        for k in 0..len {
            weight[k] *= lambdas[l][k];
            estimate[k] += weight[k] * level_means[l][k];
        }
    }
    Ok(MlmcEstimate { estimate, lambdas, degenerate, level_means, level_variances, plain_variances })
}

fn scalar_lambda<S: AsRef<[f64]>>(fine: &[S], coarse: &[S], block: usize) -> Result<LambdaField> {
    if fine.len() < 2 || fine.len() != coarse.len() {
        return Err(Error::Config("control variate needs at least two paired samples".into()));
    }
    let (sxy, sxx) = moments2(fine, coarse)?;
    if block == 0 || sxy.len() % block != 0 {
        return Err(Error::Config(format!("block size {block} does not divide {}", sxy.len())));
    }
    let mut values = Vec::with_capacity(sxy.len());
    let mut degenerate = 0;
    for (xy, xx) in sxy.chunks(block).zip(sxx.chunks(block)) {
        let (a, b): (f64, f64) = (xy.iter().sum(), xx.iter().sum());
        let lam = if b > 0.0 {
            a / b
        } else {
            degenerate += block;
            1.0
        };
        values.extend(std::iter::repeat_n(lam, block));
    }
    Ok(LambdaField { values, degenerate })
}

/// Sampling plan options for [`mlmc_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlmcOptions {
    pub lambda: LambdaMode,
    /// Reuse the same random streams on every level instead of independent
    /// streams per level.
    pub shared_streams: bool,
    /// Dimension of the random space.
    pub dim: usize,
}

impl MlmcOptions {
    pub fn new(dim: usize) -> Self {
        Self { lambda: LambdaMode::Regression, shared_streams: false, dim }
    }

    /// Stream id of sample `i` on level `l`. Level zero always uses streams
    /// `0..M_0`, so a plain MC run with the same seed sees the same inputs.
    pub fn stream(&self, level: usize, i: usize) -> u64 {
        if self.shared_streams {
            i as u64
        } else {
            ((level as u64) << 40) | i as u64
        }
    }
}

fn validate_levels(levels: &[LevelSpec], mode: LambdaMode) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Config("MLMC needs at least one level".into()));
    }
    for (l, lv) in levels.iter().enumerate() {
        if lv.samples == 0 || lv.n_cells == 0 || !(lv.dt > 0.0) {
            return Err(Error::Config(format!("level {l} is empty or has a bad time step")));
        }
        if l > 0 {
            if lv.n_cells != 2 * levels[l - 1].n_cells {
                return Err(Error::Config(format!(
                    "level {l} has {} cells; nested refinement needs {}",
                    lv.n_cells,
                    2 * levels[l - 1].n_cells
                )));
            }
            if mode != LambdaMode::Unit && lv.samples < 2 {
                return Err(Error::Config(format!("level {l} needs two samples for its control variate")));
            }
        }
    }
    Ok(())
}

/// Runs the coupled sample hierarchy. Every field is conservatively
/// restricted to the coarsest grid before it is stored.
pub fn run_levels<R>(
    levels: &[LevelSpec],
    runner: &R,
    master_seed: u64,
    opts: &MlmcOptions,
) -> Result<Vec<LevelSamples>>
where
    R: Fn(&LevelSpec, &RandomSample) -> Result<FieldSet> + Sync,
{
    validate_levels(levels, opts.lambda)?;
    let n0 = levels[0].n_cells;
    let jobs: Vec<(usize, usize)> = levels
        .iter()
        .enumerate()
        .flat_map(|(l, lv)| (0..lv.samples).map(move |i| (l, i)))
        .collect();
    let run = |spec: &LevelSpec, z: &RandomSample| -> Result<(Vec<f64>, f64)> {
        let t0 = Instant::now();
        let f = runner(spec, z)?;
        let secs = t0.elapsed().as_secs_f64();
        if f.n_cells() != spec.n_cells {
            return Err(Error::Shape(format!(
                "runner returned {} cells for a {}-cell level",
                f.n_cells(),
                spec.n_cells
            )));
        }
        Ok((f.restrict_to(n0)?.into_values(), secs))
    };
    let results: Vec<(usize, Vec<f64>, Option<Vec<f64>>, f64)> = jobs
        .par_iter()
        .map(|&(l, i)| {
            let z = RandomSample::from_stream(master_seed, opts.stream(l, i), opts.dim);
            let (fine, t_f) = run(&levels[l], &z)?;
            if l == 0 {
                return Ok((l, fine, None, t_f));
            }
            let (coarse, t_c) = run(&levels[l - 1], &z)?;
            Ok((l, fine, Some(coarse), t_f + t_c))
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<LevelSamples> = levels.iter().map(|_| LevelSamples::default()).collect();
    for (l, fine, coarse, secs) in results {
        let lv = &mut out[l];
        lv.fine.push(fine);
        lv.runs += 1;
        if let Some(c) = coarse {
            lv.coarse.push(c);
            lv.runs += 1;
        }
        lv.cost_seconds += secs;
    }
    Ok(out)
}

/// Control-variate MLMC estimate of the mean fields, plus the variance via
/// the same estimator applied to the squared fields.
pub fn mlmc_estimate<R>(
    levels: &[LevelSpec],
    runner: &R,
    master_seed: u64,
    opts: &MlmcOptions,
) -> Result<(MlmcEstimate, VarianceField, Vec<LevelSamples>)>
where
    R: Fn(&LevelSpec, &RandomSample) -> Result<FieldSet> + Sync,
{
    let samples = run_levels(levels, runner, master_seed, opts)?;
    let mean = combine_levels(&samples, opts.lambda)?;
    let squared: Vec<LevelSamples> = samples.iter().map(|s| s.map(|x| x * x)).collect();
    let second = combine_levels(&squared, opts.lambda)?;
    let var = variance_field(&mean.estimate, &second.estimate)?;
    Ok((mean, var, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uq::sampling::draw_samples;

    fn approx(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn mc_of_identical_samples_is_exact() {
        let a = vec![0.1, -3.7, 1e9];
        assert_eq!(mc_estimate(&[a.clone(), a.clone(), a.clone()]).unwrap(), a);
    }

    #[test]
    fn mc_of_two_fields_is_midpoint() {
        let e = mc_estimate(&[vec![1.0, 2.0], vec![3.0, -2.0]]).unwrap();
        assert_eq!(e, vec![2.0, 0.0]);
    }

    #[test]
    fn mc_rejects_bad_input() {
        let none: [Vec<f64>; 0] = [];
        assert!(mc_estimate(&none).is_err());
        assert!(mc_estimate(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn mc_variance_shrinks_with_sample_size() {
        // surrogate model q(z) = sum z_k; estimator variance ~ 1/M
        let est_var = |m: usize| {
            let means: Vec<f64> = (0..200)
                .map(|j| {
                    let s: Vec<Vec<f64>> = draw_samples(m, 3, 1000 + j)
                        .into_iter()
                        .map(|s| vec![s.z.iter().sum()])
                        .collect();
                    mc_estimate(&s).unwrap()[0]
                })
                .collect();
            let mu = means.iter().sum::<f64>() / means.len() as f64;
            means.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (means.len() - 1) as f64
        };
        let ratio = est_var(16) / est_var(64);
        assert!((2.8..5.6).contains(&ratio), "{ratio}");
    }

    #[test]
    fn variance_of_two_point_distribution() {
        let (a, b) = (vec![1.0, 4.0], vec![3.0, -2.0]);
        let m = mc_estimate(&[a.clone(), b.clone()]).unwrap();
        let sq = mc_estimate(&[vec![1.0, 16.0], vec![9.0, 4.0]]).unwrap();
        let v = variance_field(&m, &sq).unwrap();
        assert!(approx(&v.values, &[1.0, 9.0], 1e-14));
        assert_eq!(v.clipped, 0);
        let det = variance_field(&[2.0], &[4.0 - 1e-15]).unwrap();
        assert_eq!(det.values, vec![0.0]);
        assert_eq!(det.clipped, 1);
    }

    #[test]
    fn lambda_examples() {
        let c: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let same = lambda_coeff(&c, &c).unwrap();
        assert!(approx(&same.values, &[1.0, 1.0], 1e-14));
        let twice: Vec<Vec<f64>> = c.iter().map(|v| v.iter().map(|x| 2.0 * x).collect()).collect();
        assert!(approx(&lambda_coeff(&twice, &c).unwrap().values, &[2.0, 2.0], 1e-13));
        let flat = vec![vec![3.0, 3.0]; 5];
        let d = lambda_coeff(&flat, &flat).unwrap();
        assert_eq!(d.values, vec![1.0, 1.0]);
        assert_eq!(d.degenerate, 2);
        assert!(lambda_coeff(&c[..1], &c[..1]).is_err());
    }

    #[test]
    fn independent_pairs_give_small_lambda() {
        let m = 400;
        let a: Vec<Vec<f64>> = draw_samples(m, 1, 5).into_iter().map(|s| s.z).collect();
        let b: Vec<Vec<f64>> = draw_samples(m, 1, 6).into_iter().map(|s| s.z).collect();
        let lam = lambda_coeff(&a, &b).unwrap().values[0];
        assert!(lam.abs() <= 3.0 / (m as f64).sqrt(), "{lam}");
    }

    fn toy_levels(n_levels: usize, m: usize) -> Vec<LevelSamples> {
        let q = |l: usize, z: f64| vec![z + 0.5f64.powi(l as i32) * z * z, (1.0 + z).powi(2) / (l + 1) as f64];
        (0..n_levels)
            .map(|l| {
                let zs = draw_samples(m, 1, 40 + l as u64);
                LevelSamples {
                    fine: zs.iter().map(|s| q(l, s.z[0])).collect(),
                    coarse: if l == 0 { vec![] } else { zs.iter().map(|s| q(l - 1, s.z[0])).collect() },
                    runs: 0,
                    cost_seconds: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn single_level_is_plain_mc() {
        let lv = toy_levels(1, 33);
        let e = combine_levels(&lv, LambdaMode::Regression).unwrap();
        let mc = mc_estimate(&lv[0].fine).unwrap();
        assert_eq!(e.estimate.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                   mc.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(e.lambdas, vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn telescoping_with_shared_samples() {
        // shared samples, unit lambda: the sum collapses to the finest mean
        let m = 17;
        let zs = draw_samples(m, 1, 9);
        let q = |l: usize, z: f64| vec![(z * (l + 1) as f64).sin(), z.powi(l as i32 + 1)];
        let levels: Vec<LevelSamples> = (0..3)
            .map(|l| LevelSamples {
                fine: zs.iter().map(|s| q(l, s.z[0])).collect(),
                coarse: if l == 0 { vec![] } else { zs.iter().map(|s| q(l - 1, s.z[0])).collect() },
                ..Default::default()
            })
            .collect();
        let e = combine_levels(&levels, LambdaMode::Unit).unwrap();
        let fine = mc_estimate(&levels[2].fine).unwrap();
        assert!(approx(&e.estimate, &fine, 1e-12));
    }

    #[test]
    fn combination_matches_hand_formula() {
        let lv = toy_levels(3, 25);
        let e = combine_levels(&lv, LambdaMode::Regression).unwrap();
        let l0 = lambda_coeff(&lv[1].fine, &lv[1].coarse).unwrap().values;
        let l1 = lambda_coeff(&lv[2].fine, &lv[2].coarse).unwrap().values;
        let m0 = mc_estimate(&lv[0].fine).unwrap();
        let mean_diff = |s: &LevelSamples, lam: &[f64]| {
            let d: Vec<Vec<f64>> = s.fine.iter().zip(&s.coarse)
                .map(|(f, c)| (0..2).map(|k| f[k] - lam[k] * c[k]).collect())
                .collect();
            mc_estimate(&d).unwrap()
        };
        let t1 = mean_diff(&lv[1], &l0);
        let t2 = mean_diff(&lv[2], &l1);
        for k in 0..2 {
            let want = l0[k] * l1[k] * m0[k] + l1[k] * t1[k] + t2[k];
            assert!((e.estimate[k] - want).abs() < 1e-13);
        }
        assert_eq!(e.lambdas[2], vec![1.0, 1.0]);
    }

    #[test]
    fn regression_never_increases_level_variance() {
        let lv = toy_levels(3, 40);
        let e = combine_levels(&lv, LambdaMode::Regression).unwrap();
        for l in 1..3 {
            for k in 0..2 {
                assert!(e.level_variances[l][k] <= e.plain_variances[l][k] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn scalar_mode_uses_one_coefficient_per_block() {
        let lv = toy_levels(2, 20);
        let e = combine_levels(&lv, LambdaMode::Scalar { block: 1 }).unwrap();
        let r = combine_levels(&lv, LambdaMode::Regression).unwrap();
        assert!(approx(&e.lambdas[0], &r.lambdas[0], 1e-12));
        let e2 = combine_levels(&lv, LambdaMode::Scalar { block: 2 }).unwrap();
        assert_eq!(e2.lambdas[0][0], e2.lambdas[0][1]);
    }

    #[test]
    fn non_nested_levels_are_rejected() {
        let lv = [
            LevelSpec { n_cells: 25, dt: 1e-3, samples: 8 },
            LevelSpec { n_cells: 40, dt: 5e-4, samples: 2 },
        ];
        let runner = |s: &LevelSpec, _: &RandomSample| FieldSet::new(s.n_cells, 1.0, vec![1.0; 4 * s.n_cells]);
        assert!(matches!(
            run_levels(&lv, &runner, 1, &MlmcOptions::new(1)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sample_ratios_are_reported() {
        let lv = [
            LevelSpec { n_cells: 4, dt: 1e-3, samples: 32 },
            LevelSpec { n_cells: 8, dt: 5e-4, samples: 8 },
            LevelSpec { n_cells: 16, dt: 2.5e-4, samples: 2 },
        ];
        let runner = |s: &LevelSpec, z: &RandomSample| {
            let v = (0..4 * s.n_cells).map(|k| z.z[0] * k as f64 / s.n_cells as f64).collect();
            FieldSet::new(s.n_cells, 1.0, v)
        };
        let (_, var, samples) = mlmc_estimate(&lv, &runner, 3, &MlmcOptions::new(2)).unwrap();
        let runs: Vec<usize> = samples.iter().map(|s| s.runs).collect();
        assert_eq!(runs, vec![32, 16, 4]);
        assert!(samples.iter().all(|s| s.fine[0].len() == 16));
        assert_eq!(var.values.len(), 16);
    }
}
