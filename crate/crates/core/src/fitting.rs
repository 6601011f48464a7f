//! Per-element intensity statistics: Gamma, lognormal and Gamma-Gamma fits
//! ranked by the Kolmogorov-Smirnov statistic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{digamma, gamma_p, ln_bessel_k, ln_gamma, normal_cdf, trigamma};

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("samples must be positive for this model ({0} nonpositive found)")]
    NonPositiveSamples(usize),
    #[error("degenerate samples (zero variance)")]
    ZeroVariance,
    #[error("moments inconsistent with a Gamma-Gamma law: m2 = {m2}, E[ln] = {elog}")]
    InconsistentMoments { m2: f64, elog: f64 },
}

/// Largest shape parameter the Gamma-Gamma inversion reports; beyond this
/// the factor is indistinguishable from a constant and the Bessel-based
/// density becomes numerically pointless.
const GG_SHAPE_CAP: f64 = 500.0;

const MIN_SAMPLES: usize = 100;

/// Intensity samples of one detector element across channel realizations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntensityEnsemble {
    pub element_index: usize,
    pub samples: Vec<f64>,
    pub turbulence_preset: String,
}

impl IntensityEnsemble {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.samples.len() < MIN_SAMPLES {
            return Err(FitError::TooFewSamples {
                min: MIN_SAMPLES,
                got: self.samples.len(),
            });
        }
        assert!(
            self.samples.iter().all(|s| s.is_finite() && *s >= 0.0),
            "ensemble samples must be finite and nonnegative"
        );
        Ok(())
    }
}

/// Fitted parameters of one candidate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FittedModel {
    Gamma { shape: f64, scale: f64 },
    LogNormal { mu: f64, sigma: f64 },
    GammaGamma { alpha: f64, beta: f64, mean: f64 },
}

impl FittedModel {
    pub fn name(&self) -> &'static str {
        match self {
            FittedModel::Gamma { .. } => "gamma",
            FittedModel::LogNormal { .. } => "lognormal",
            FittedModel::GammaGamma { .. } => "gamma_gamma",
        }
    }
}

/// Maximum-likelihood Gamma fit: shape from the Newton root of
/// ln(α) − ψ(α) = ln(mean) − mean(ln x), scale = mean/shape.
pub fn fit_gamma(samples: &[f64]) -> Result<FittedModel, FitError> {
    check_min(samples)?;
    let bad = samples.iter().filter(|&&x| x <= 0.0).count();
    if bad > 0 {
        return Err(FitError::NonPositiveSamples(bad));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mean_log = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_log;
    if s <= 1e-12 {
        return Err(FitError::ZeroVariance);
    }
    // standard initial guess, then Newton on f(a) = ln a − ψ(a) − s
    let mut a = (3.0 - s + ((s - 3.0) * (s - 3.0) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let f = a.ln() - digamma(a) - s;
        let fp = 1.0 / a - trigamma(a);
        let next = (a - f / fp).max(a * 0.1);
        if (next - a).abs() < 1e-8 * a {
            a = next;
            break;
        }
        a = next;
    }
    Ok(FittedModel::Gamma {
        shape: a,
        scale: mean / a,
    })
}

/// Maximum-likelihood lognormal fit: μ and σ of ln x.
pub fn fit_lognormal(samples: &[f64]) -> Result<FittedModel, FitError> {
    check_min(samples)?;
    let bad = samples.iter().filter(|&&x| x <= 0.0).count();
    if bad > 0 {
        return Err(FitError::NonPositiveSamples(bad));
    }
    let n = samples.len() as f64;
    let mu = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
    let var = samples.iter().map(|x| (x.ln() - mu).powi(2)).sum::<f64>() / n;
    Ok(FittedModel::LogNormal {
        mu,
        sigma: var.sqrt(),
    })
}

/// Gamma-Gamma fit by log-moment inversion.
///
/// For I = X·Y with X ~ Γ(α, 1/α), Y ~ Γ(β, 1/β) scaled to the sample mean:
///   Var[ln I] = ψ'(α) + ψ'(β)
///   E[ln(I/mean)] = (ψ(α) − ln α) + (ψ(β) − ln β)
/// Both moments are solved by bracketed bisection with α >= β. Data whose
/// log-moments sit just outside the feasible set (e.g. nearly constant or
/// exactly exponential samples) snap to the nearest boundary; shapes are
/// capped at 500, beyond which the factor is effectively constant.
pub fn fit_gamma_gamma(samples: &[f64]) -> Result<FittedModel, FitError> {
    check_min(samples)?;
    let bad = samples.iter().filter(|&&x| x <= 0.0).count();
    if bad > 0 {
        return Err(FitError::NonPositiveSamples(bad));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let elog = samples.iter().map(|x| (x / mean).ln()).sum::<f64>() / n;
    let vlog = {
        let m = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
        samples.iter().map(|x| (x.ln() - m).powi(2)).sum::<f64>() / n
    };
    let m2 = samples.iter().map(|x| (x / mean).powi(2)).sum::<f64>() / n;
    if vlog <= 1e-12 || m2 - 1.0 <= 1e-12 {
        return Err(FitError::ZeroVariance);
    }

    let g = |k: f64| digamma(k) - k.ln();
    let beta_of = |a: f64| -> f64 {
        let rem = vlog - trigamma(a);
        if rem <= trigamma(GG_SHAPE_CAP) {
            GG_SHAPE_CAP
        } else {
            inv_trigamma(rem)
        }
    };
    let f = |a: f64| g(a) + g(beta_of(a)) - elog;

    // α ranges from the symmetric point ψ'(α) = vlog/2 up to the cap
    let a_sym = inv_trigamma(0.5 * vlog);
    if a_sym >= GG_SHAPE_CAP {
        return Err(FitError::InconsistentMoments { m2, elog });
    }
    let (f_lo, f_hi) = (f(a_sym), f(GG_SHAPE_CAP));
    let alpha = if f_lo >= 0.0 && f_hi >= 0.0 {
        a_sym // measured E[ln] below the feasible minimum: snap to symmetric
    } else if f_lo <= 0.0 && f_hi <= 0.0 {
        GG_SHAPE_CAP // root beyond the cap (near-Gamma data)
    } else {
        let (mut lo, mut hi) = (a_sym, GG_SHAPE_CAP);
        let rising = f_hi > f_lo;
        for _ in 0..90 {
            let mid = 0.5 * (lo + hi);
            let positive = f(mid) > 0.0;
            if positive == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let beta = beta_of(alpha);
    let (alpha, beta) = (alpha.max(beta), alpha.min(beta));
    Ok(FittedModel::GammaGamma { alpha, beta, mean })
}

fn check_min(samples: &[f64]) -> Result<(), FitError> {
    if samples.len() < MIN_SAMPLES {
        return Err(FitError::TooFewSamples {
            min: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    Ok(())
}

/// Solve ψ'(x) = y for x > 0 (ψ' is strictly decreasing).
fn inv_trigamma(y: f64) -> f64 {
    assert!(y > 0.0);
    let (mut lo, mut hi) = (1e-6, 1e9);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if trigamma(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-14 {
            break;
        }
    }
    (lo * hi).sqrt()
}

/// Evaluable CDF for a fitted model. The Gamma-Gamma density has no
/// closed-form CDF; it is tabulated once on a square-root-spaced grid
/// (which absorbs the integrable singularity at zero for β < 1) and
/// interpolated.
pub enum ModelCdf {
    Gamma { shape: f64, scale: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Table { sqrt_x: Vec<f64>, cdf: Vec<f64> },
}

impl ModelCdf {
    pub fn of(model: &FittedModel, x_max: f64) -> Self {
        match *model {
            FittedModel::Gamma { shape, scale } => ModelCdf::Gamma { shape, scale },
            FittedModel::LogNormal { mu, sigma } => ModelCdf::LogNormal { mu, sigma },
            FittedModel::GammaGamma { alpha, beta, mean } => {
                // integrate the unit-mean density with the substitution
                // x = t², then rescale by the sample mean
                let steps = 2400;
                let t_max = (x_max / mean).max(1e-12).sqrt() * 1.01;
                let ln_norm = std::f64::consts::LN_2
                    + 0.5 * (alpha + beta) * (alpha * beta).ln()
                    - ln_gamma(alpha)
                    - ln_gamma(beta);
                let pdf = |x: f64| -> f64 {
                    if x <= 0.0 {
                        return 0.0;
                    }
                    let arg = 2.0 * (alpha * beta * x).sqrt();
                    (ln_norm + (0.5 * (alpha + beta) - 1.0) * x.ln() + ln_bessel_k(alpha - beta, arg))
                        .exp()
                };
                let mut sqrt_x = Vec::with_capacity(steps + 1);
                let mut cdf = Vec::with_capacity(steps + 1);
                let dt = t_max / steps as f64;
                let mut acc = 0.0;
                let mut prev = 0.0; // integrand 2t·pdf(t²) at t = 0
                sqrt_x.push(0.0);
                cdf.push(0.0);
                for i in 1..=steps {
                    let t = i as f64 * dt;
                    let integrand = 2.0 * t * pdf(t * t);
                    acc += 0.5 * (prev + integrand) * dt;
                    prev = integrand;
                    sqrt_x.push(t * mean.sqrt());
                    cdf.push(acc.min(1.0));
                }
                ModelCdf::Table { sqrt_x, cdf }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ModelCdf::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_p(*shape, x / scale)
                }
            }
            ModelCdf::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else if *sigma == 0.0 {
                    if x.ln() < *mu {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    normal_cdf((x.ln() - mu) / sigma)
                }
            }
            ModelCdf::Table { sqrt_x, cdf } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let t = x.sqrt();
                match sqrt_x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
                    Ok(i) => cdf[i],
                    Err(i) => {
                        if i == 0 {
                            0.0
                        } else if i >= sqrt_x.len() {
                            *cdf.last().unwrap()
                        } else {
                            let w = (t - sqrt_x[i - 1]) / (sqrt_x[i] - sqrt_x[i - 1]);
                            cdf[i - 1] + w * (cdf[i] - cdf[i - 1])
                        }
                    }
                }
            }
        }
    }
}

/// Kolmogorov-Smirnov statistic D = sup |F_emp − F_model| by the
/// sorted-sample formula.
pub fn ks_statistic(samples: &[f64], cdf: &ModelCdf) -> f64 {
    assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf.eval(x);
        let hi = (i + 1) as f64 / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi.abs()).max(lo.abs());
    }
    d
}

/// One entry of a model ranking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FittedModel,
    pub ks_statistic: f64,
    pub best_model: bool,
}

/// Ranking of all candidate models over one ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingOutcome {
    pub element_index: usize,
    pub turbulence_preset: String,
    /// Successful fits, ascending KS (best first).
    pub reports: Vec<FitReport>,
    /// Models that failed to fit, with the reason.
    pub failures: Vec<(String, String)>,
    /// Zero-intensity samples excluded from the log-based fits.
    pub excluded_zero_samples: usize,
}

/// Fit Gamma, lognormal and Gamma-Gamma to the ensemble, rank by KS
/// statistic, and flag the best. Zero-intensity samples (deep fades) are
/// excluded from the log-based fits with the count reported.
pub fn rank_models(ensemble: &IntensityEnsemble) -> Result<RankingOutcome, FitError> {
    ensemble.validate()?;
    let positive: Vec<f64> = ensemble
        .samples
        .iter()
        .copied()
        .filter(|&x| x > 0.0)
        .collect();
    let excluded = ensemble.samples.len() - positive.len();
    let x_max = positive.iter().copied().fold(0.0, f64::max);

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let candidates: [(&str, Result<FittedModel, FitError>); 3] = [
        ("gamma", fit_gamma(&positive)),
        ("lognormal", fit_lognormal(&positive)),
        ("gamma_gamma", fit_gamma_gamma(&positive)),
    ];
    for (name, fit) in candidates {
        match fit {
            Ok(model) => {
                let cdf = ModelCdf::of(&model, x_max);
                let ks = ks_statistic(&positive, &cdf);
                reports.push(FitReport {
                    model,
                    ks_statistic: ks,
                    best_model: false,
                });
            }
            Err(e) => failures.push((name.to_string(), e.to_string())),
        }
    }
    if reports.is_empty() {
        return Err(FitError::ZeroVariance);
    }
    reports.sort_by(|a, b| a.ks_statistic.partial_cmp(&b.ks_statistic).unwrap());
    reports[0].best_model = true;
    Ok(RankingOutcome {
        element_index: ensemble.element_index,
        turbulence_preset: ensemble.turbulence_preset.clone(),
        reports,
        failures,
        excluded_zero_samples: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{rng_for, SeedDomain};
    use rand::Rng;
    use rand_distr::{Distribution, Gamma as GammaDist, LogNormal as LogNormalDist};

    fn gamma_samples(shape: f64, scale: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_for(seed, SeedDomain::Sampling, 0);
        let d = GammaDist::new(shape, scale).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn gamma_round_trip() {
        let s = gamma_samples(3.0, 2.0, 100_000, 1);
        let FittedModel::Gamma { shape, scale } = fit_gamma(&s).unwrap() else {
            panic!()
        };
        assert!((shape - 3.0).abs() < 0.1, "shape {shape}");
        assert!((scale - 2.0).abs() < 0.1, "scale {scale}");
    }

    #[test]
    fn gamma_fits_exponential_with_unit_shape() {
        let s = gamma_samples(1.0, 1.5, 100_000, 2);
        let FittedModel::Gamma { shape, .. } = fit_gamma(&s).unwrap() else {
            panic!()
        };
        assert!((shape - 1.0).abs() < 0.05, "shape {shape}");
    }

    #[test]
    fn gamma_rejects_constant_samples() {
        let s = vec![2.5; 200];
        assert_eq!(fit_gamma(&s), Err(FitError::ZeroVariance));
    }

    #[test]
    fn lognormal_round_trip_and_edges() {
        let mut rng = rng_for(3, SeedDomain::Sampling, 0);
        let d = LogNormalDist::new(0.0, 0.5).unwrap();
        let s: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let FittedModel::LogNormal { mu, sigma } = fit_lognormal(&s).unwrap() else {
            panic!()
        };
        assert!(mu.abs() < 0.01, "mu {mu}");
        assert!((sigma - 0.5).abs() < 0.01, "sigma {sigma}");

        let constant = vec![3.0; 150];
        let FittedModel::LogNormal { mu, sigma } = fit_lognormal(&constant).unwrap() else {
            panic!()
        };
        assert!((mu - 3.0_f64.ln()).abs() < 1e-12);
        assert_eq!(sigma, 0.0);

        let mut with_zero = constant;
        with_zero[0] = 0.0;
        assert!(matches!(
            fit_lognormal(&with_zero),
            Err(FitError::NonPositiveSamples(1))
        ));
    }

    fn gg_samples(alpha: f64, beta: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_for(seed, SeedDomain::Sampling, 1);
        let a = GammaDist::new(alpha, 1.0 / alpha).unwrap();
        let b = GammaDist::new(beta, 1.0 / beta).unwrap();
        (0..n).map(|_| a.sample(&mut rng) * b.sample(&mut rng)).collect()
    }

    #[test]
    fn gamma_gamma_round_trip() {
        let s = gg_samples(4.0, 2.0, 100_000, 4);
        let FittedModel::GammaGamma { alpha, beta, .. } = fit_gamma_gamma(&s).unwrap() else {
            panic!()
        };
        assert!((alpha - 4.0).abs() < 0.5, "alpha {alpha}");
        assert!((beta - 2.0).abs() < 0.3, "beta {beta}");
    }

    #[test]
    fn gamma_gamma_on_exponential_data_reports_unit_scintillation() {
        let s = gamma_samples(1.0, 1.0, 100_000, 5);
        let FittedModel::GammaGamma { alpha, beta, .. } = fit_gamma_gamma(&s).unwrap() else {
            panic!()
        };
        let si2 = (1.0 + 1.0 / alpha) * (1.0 + 1.0 / beta) - 1.0;
        assert!((si2 - 1.0).abs() < 0.05, "sigma_I^2 {si2} (alpha {alpha}, beta {beta})");
    }

    #[test]
    fn gamma_gamma_rejects_constant_samples() {
        let s = vec![1.0; 200];
        assert!(matches!(fit_gamma_gamma(&s), Err(FitError::ZeroVariance)));
    }

    #[test]
    fn large_shapes_mean_low_scintillation() {
        // α, β → ∞ limit: fitted σ_I² → 0 on nearly constant data
        let mut rng = rng_for(6, SeedDomain::Sampling, 2);
        let s: Vec<f64> = (0..50_000)
            .map(|_| 1.0 + 1e-3 * rng.gen::<f64>())
            .collect();
        let FittedModel::GammaGamma { alpha, beta, .. } = fit_gamma_gamma(&s).unwrap() else {
            panic!()
        };
        let si2 = (1.0 + 1.0 / alpha) * (1.0 + 1.0 / beta) - 1.0;
        assert!(si2 < 1e-4, "sigma_I^2 {si2}");
    }

    #[test]
    fn ks_statistic_edges() {
        let samples: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        // model CDF identically zero on the sample range -> D = 1
        let zero_cdf = ModelCdf::Table {
            sqrt_x: vec![0.0, 100.0],
            cdf: vec![0.0, 0.0],
        };
        assert_eq!(ks_statistic(&samples, &zero_cdf), 1.0);
        // the empirical CDF itself can deviate by at most 1/n
        let table = ModelCdf::Table {
            sqrt_x: samples.iter().map(|x| x.sqrt()).collect(),
            cdf: (1..=100).map(|i| i as f64 / 100.0).collect(),
        };
        assert!(ks_statistic(&samples, &table) <= 1.0 / 100.0 + 1e-12);
    }

    #[test]
    fn ks_self_consistency_for_fitted_gamma() {
        // samples drawn from the model itself: D stays under the 1%
        // significance bound 1.63/sqrt(n) in the vast majority of trials
        let mut ok = 0;
        let trials = 20;
        let n = 20_000;
        for t in 0..trials {
            let s = gamma_samples(3.0, 2.0, n, 100 + t);
            let model = fit_gamma(&s).unwrap();
            let cdf = ModelCdf::of(&model, s.iter().copied().fold(0.0, f64::max));
            if ks_statistic(&s, &cdf) < 1.63 / (n as f64).sqrt() {
                ok += 1;
            }
        }
        assert!(ok >= trials - 1, "only {ok}/{trials} under the KS bound");
    }

    #[test]
    fn ranking_recovers_the_generating_model() {
        let gamma_data = IntensityEnsemble {
            element_index: 0,
            samples: gamma_samples(3.0, 2.0, 50_000, 7),
            turbulence_preset: "test".into(),
        };
        let out = rank_models(&gamma_data).unwrap();
        assert_eq!(out.reports[0].model.name(), "gamma");
        assert!(out.reports[0].best_model);

        let mut rng = rng_for(8, SeedDomain::Sampling, 0);
        let d = LogNormalDist::new(0.0, 0.8).unwrap();
        let ln_data = IntensityEnsemble {
            element_index: 1,
            samples: (0..50_000).map(|_| d.sample(&mut rng)).collect(),
            turbulence_preset: "test".into(),
        };
        let out = rank_models(&ln_data).unwrap();
        assert_eq!(out.reports[0].model.name(), "lognormal");
    }

    #[test]
    fn ranking_reports_zero_exclusions() {
        let mut samples = gamma_samples(2.0, 1.0, 5_000, 9);
        samples[0] = 0.0;
        samples[1] = 0.0;
        let ens = IntensityEnsemble {
            element_index: 2,
            samples,
            turbulence_preset: "test".into(),
        };
        let out = rank_models(&ens).unwrap();
        assert_eq!(out.excluded_zero_samples, 2);
        assert!(!out.reports.is_empty());
        assert_eq!(out.reports.iter().filter(|r| r.best_model).count(), 1);
    }

    #[test]
    fn gamma_gamma_cdf_table_is_a_proper_cdf() {
        let model = FittedModel::GammaGamma {
            alpha: 4.0,
            beta: 2.0,
            mean: 1.0,
        };
        let cdf = ModelCdf::of(&model, 20.0);
        // frozen reference points from an independent quadrature of the
        // Bessel-form density (unit mean)
        let mid = cdf.eval(1.0);
        assert!(mid > 0.5 && mid < 0.75, "cdf(1) = {mid}");
        assert!(cdf.eval(20.0) > 0.999);
        let mut last = 0.0;
        for i in 0..=100 {
            let v = cdf.eval(i as f64 * 0.2);
            assert!(v >= last - 1e-12);
            last = v;
        }
    }
}
