//! Partial correlation and the Fisher-z conditional independence test.

use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::linalg::least_squares;
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PartialCorrelationError {
    #[error("x and y must be distinct columns")]
    SameVariable,
    #[error("x or y appears in the conditioning set")]
    Overlap,
    #[error("{n} rows is too few for a conditioning set of size {z_size}")]
    TooFewRows { n: usize, z_size: usize },
    #[error("conditioning set is collinear")]
    SingularConditioningSet,
    #[error("residual variance of x or y is zero")]
    ZeroVariance,
}

/// Sample partial correlation of columns `x` and `y` given `z`, from the
/// residuals of least-squares projections (with intercept) onto `z`.
pub fn partial_correlation(data: &Dataset, x: usize, y: usize, z: &[usize]) -> Result<f64, PartialCorrelationError> {
    if x == y {
        return Err(PartialCorrelationError::SameVariable);
    }
    if z.contains(&x) || z.contains(&y) {
        return Err(PartialCorrelationError::Overlap);
    }
    let n = data.n_rows();
    if n <= z.len() + 3 {
        return Err(PartialCorrelationError::TooFewRows { n, z_size: z.len() });
    }
    if z.is_empty() {
        return pearson(data.column(x), data.column(y));
    }
    let regressors: Vec<&[f64]> = z.iter().map(|&c| data.column(c)).collect();
    let rx = least_squares(&regressors, data.column(x), true)
        .map_err(|_| PartialCorrelationError::SingularConditioningSet)?;
    let ry = least_squares(&regressors, data.column(y), true)
        .map_err(|_| PartialCorrelationError::SingularConditioningSet)?;
    pearson(&rx.residuals, &ry.residuals)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, PartialCorrelationError> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    // Relative to the raw scale so that projection round-off does not pass as signal.
    let scale_a: f64 = a.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let scale_b: f64 = b.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if saa <= 1e-24 * scale_a.max(1.0) || sbb <= 1e-24 * scale_b.max(1.0) {
        return Err(PartialCorrelationError::ZeroVariance);
    }
    Ok((sab / math::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum FisherZError {
    #[error("degenerate sample: requires |r| < 1 and n - |Z| - 3 > 0 (r = {r}, n = {n}, |Z| = {z_size})")]
    DegenerateSample { r: f64, n: usize, z_size: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
}

/// `sqrt(n - |Z| - 3) * |atanh(r)|`.
pub fn fisher_z_statistic(r: f64, n: usize, z_size: usize) -> Result<f64, FisherZError> {
    if r.is_nan() || math::abs(r) >= 1.0 || n <= z_size + 3 {
        return Err(FisherZError::DegenerateSample { r, n, z_size });
    }
    let dof = (n - z_size - 3) as f64;
    Ok(math::sqrt(dof) * math::abs(0.5 * math::ln((1.0 + r) / (1.0 - r))))
}

/// Two-sided Fisher-z test: true when independence is not rejected at `alpha`.
pub fn fisher_z_independent(r: f64, n: usize, z_size: usize, alpha: f64) -> Result<bool, FisherZError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FisherZError::InvalidAlpha(alpha));
    }
    let stat = fisher_z_statistic(r, n, z_size)?;
    Ok(stat <= normal_quantile(1.0 - alpha / 2.0))
}

/// Standard normal quantile function (Wichura's AS 241, PPND16), accurate to
/// about 1e-16 relative. Returns ±infinity at 0 and 1, NaN outside [0, 1].
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if math::abs(q) <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_672_7e3 * r + 3.343_057_558_358_812_810_5e4) * r
            + 6.726_577_092_700_870_085_3e4)
            * r
            + 4.592_195_393_154_987_145_7e4)
            * r
            + 1.373_169_376_550_946_112_5e4)
            * r
            + 1.971_590_950_306_551_442_7e3)
            * r
            + 1.331_416_678_917_843_774_5e2)
            * r
            + 3.387_132_872_796_366_608_0)
            * q;
        let den = ((((((5.226_495_278_852_854_561_0e3 * r + 2.872_908_573_572_194_267_4e4) * r
            + 3.930_789_580_009_271_061_0e4)
            * r
            + 2.121_379_430_158_659_586_7e4)
            * r
            + 5.394_196_021_424_751_107_7e3)
            * r
            + 6.871_870_074_920_579_083_0e2)
            * r
            + 4.231_333_070_160_091_125_2e1)
            * r
            + 1.0;
        return num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = math::sqrt(-math::ln(tail));
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414_076_4e-4 * r + 2.272_384_498_926_918_458_33e-2) * r
            + 2.417_807_251_774_506_117_7e-1)
            * r
            + 1.270_458_252_452_368_382_58)
            * r
            + 3.647_848_324_763_204_605_04)
            * r
            + 5.769_497_221_460_691_405_5)
            * r
            + 4.630_337_846_156_545_295_9)
            * r
            + 1.423_437_110_749_683_577_34;
        let den = ((((((1.050_750_071_644_416_843_24e-9 * r + 5.475_938_084_995_344_946e-4) * r
            + 1.519_866_656_361_645_719_66e-2)
            * r
            + 1.481_039_764_274_800_745_9e-1)
            * r
            + 6.897_673_349_851_000_045_5e-1)
            * r
            + 1.676_384_830_183_803_849_4)
            * r
            + 2.053_191_626_637_758_821_87)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_132_65e-7 * r + 2.711_555_568_743_487_578_15e-5) * r
            + 1.242_660_947_388_078_438_6e-3)
            * r
            + 2.653_218_952_657_612_309_3e-2)
            * r
            + 2.965_605_718_285_048_912_3e-1)
            * r
            + 1.784_826_539_917_291_335_8)
            * r
            + 5.463_784_911_164_114_369_9)
            * r
            + 6.657_904_643_501_103_777_2;
        let den = ((((((2.044_263_103_389_939_785_64e-15 * r + 1.421_511_758_316_445_888_7e-7) * r
            + 1.846_318_317_510_054_681_8e-5)
            * r
            + 7.868_691_311_456_132_591e-4)
            * r
            + 1.487_536_129_085_061_485_25e-2)
            * r
            + 1.369_298_809_227_358_053_1e-1)
            * r
            + 5.998_322_065_558_879_376_9e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn std_normal_cdf(x: f64) -> f64 {
        0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-300, 1e-20, 1e-10, 1e-4, 0.01, 0.025, 0.2, 0.5, 0.8, 0.975, 0.999, 1.0 - 1e-12] {
            let x = normal_quantile(p);
            let tail = p.min(1.0 - p);
            let back = std_normal_cdf(-x.abs());
            assert!((back - tail).abs() <= 1e-9 * tail, "p={p} x={x} back={back}");
        }
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!(normal_quantile(1.5).is_nan());
    }

    #[test]
    fn fisher_z_examples() {
        assert!(fisher_z_independent(0.0, 10, 0, 0.05).unwrap());
        assert!(fisher_z_independent(0.0, 1000, 4, 0.01).unwrap());

        // 0.5 * ln 3 = 0.5493, times sqrt(97).
        let s = fisher_z_statistic(0.5, 100, 0).unwrap();
        assert!((s - 0.5 * 3f64.ln() * 97f64.sqrt()).abs() < 1e-12);
        assert!((s - 5.41).abs() < 0.01);
        assert!(!fisher_z_independent(0.5, 100, 0, 0.05).unwrap());

        let s = fisher_z_statistic(0.01, 100, 0).unwrap();
        assert!((s - 0.0985).abs() < 1e-4);
        assert!(fisher_z_independent(0.01, 100, 0, 0.05).unwrap());
    }

    #[test]
    fn fisher_z_preconditions() {
        assert!(matches!(fisher_z_independent(1.0, 100, 0, 0.05), Err(FisherZError::DegenerateSample { .. })));
        assert!(matches!(fisher_z_independent(0.2, 5, 2, 0.05), Err(FisherZError::DegenerateSample { .. })));
        assert!(matches!(fisher_z_independent(0.2, 50, 2, 0.0), Err(FisherZError::InvalidAlpha(_))));
    }

    #[test]
    fn partial_correlation_argument_checks() {
        let d = Dataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![1.0, 2.0, 3.0, 4.0, 6.0], vec![2.0, 1.0, 4.0, 3.0, 5.0], vec![0.0, 1.0, 0.0, 1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(partial_correlation(&d, 0, 0, &[]), Err(PartialCorrelationError::SameVariable));
        assert_eq!(partial_correlation(&d, 0, 1, &[1]), Err(PartialCorrelationError::Overlap));
        assert_eq!(partial_correlation(&d, 0, 1, &[2, 2]), Err(PartialCorrelationError::TooFewRows { n: 5, z_size: 2 }));
        assert_eq!(partial_correlation(&d, 0, 0, &[]), Err(PartialCorrelationError::SameVariable));
        let self_r = partial_correlation(&Dataset::new(vec!["a".into(), "b".into()], vec![d.column(0).to_vec(), d.column(0).to_vec()]).unwrap(), 0, 1, &[]).unwrap();
        assert_eq!(self_r, 1.0);
    }

    #[test]
    fn collinear_conditioning_set() {
        let base: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let other: Vec<f64> = (0..20).map(|i| (i as f64 * 1.7).cos()).collect();
        let third: Vec<f64> = (0..20).map(|i| (i as f64 * 0.9).sin() + 0.1 * i as f64).collect();
        let twice: Vec<f64> = base.iter().map(|v| 2.0 * v - 1.0).collect();
        let d = Dataset::new(
            vec!["x".into(), "y".into(), "z1".into(), "z2".into()],
            vec![other, third, base, twice],
        )
        .unwrap();
        assert_eq!(partial_correlation(&d, 0, 1, &[2, 3]), Err(PartialCorrelationError::SingularConditioningSet));
    }
}
