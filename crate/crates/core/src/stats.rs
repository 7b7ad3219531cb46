//! Estimators, confidence bands and the lower-bound machinery for the
//! maximal-edge criterion.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{Error, Result};
use crate::fpp::{self, FppSample};
use crate::graph::WeightedGraph;
use crate::rng;

/// Normal quantile used for all reported confidence half-widths.
pub const Z95: f64 = 1.96;

/// Moments of a sample with jackknife confidence half-widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased.
    pub variance: f64,
    pub sd: f64,
    pub ci_mean: f64,
    pub ci_sd: f64,
    pub ci_sd_over_mean: f64,
}

impl SampleStats {
    pub fn sd_over_mean(&self) -> f64 {
        self.sd / self.mean
    }

    /// Leave-one-out jackknife in O(n) via centered deviations.
    pub fn from_samples(xs: &[f64]) -> SampleStats {
        let n = xs.len();
        if n == 0 {
            return SampleStats {
                n,
                mean: f64::NAN,
                variance: f64::NAN,
                sd: f64::NAN,
                ci_mean: f64::INFINITY,
                ci_sd: f64::INFINITY,
                ci_sd_over_mean: f64::INFINITY,
            };
        }
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let variance = if n > 1 { ss / (nf - 1.0) } else { 0.0 };
        let sd = variance.sqrt();
        let ci_mean = if n > 1 { Z95 * sd / nf.sqrt() } else { f64::INFINITY };
        if n < 3 {
            return SampleStats {
                n,
                mean,
                variance,
                sd,
                ci_mean,
                ci_sd: f64::INFINITY,
                ci_sd_over_mean: f64::INFINITY,
            };
        }
        let loo = |x: f64| {
            let d = x - mean;
            let m = mean - d / (nf - 1.0);
            let ss_i = (ss - d * d * nf / (nf - 1.0)).max(0.0);
            let sd_i = (ss_i / (nf - 2.0)).sqrt();
            (sd_i, sd_i / m)
        };
        let (mut s_sd, mut s_r) = (0.0, 0.0);
        for &x in xs {
            let (a, b) = loo(x);
            s_sd += a;
            s_r += b;
        }
        let (bar_sd, bar_r) = (s_sd / nf, s_r / nf);
        let (mut v_sd, mut v_r) = (0.0, 0.0);
        for &x in xs {
            let (a, b) = loo(x);
            v_sd += (a - bar_sd).powi(2);
            v_r += (b - bar_r).powi(2);
        }
        let scale = (nf - 1.0) / nf;
        SampleStats {
            n,
            mean,
            variance,
            sd,
            ci_mean,
            ci_sd: Z95 * (scale * v_sd).sqrt(),
            ci_sd_over_mean: Z95 * (scale * v_r).sqrt(),
        }
    }
}

/// Standard error of the unbiased sample variance from the fourth central
/// moment.
pub fn variance_standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 4 {
        return f64::INFINITY;
    }
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Outcome of a statistical inequality check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Inside the confidence band but on the wrong side of the bound.
    Inconclusive,
    Fail,
}

impl Verdict {
    /// `estimate <= bound`, with `3 * half_width` of slack before failing.
    pub fn upper(estimate: f64, bound: f64, half_width: f64) -> Verdict {
        if estimate <= bound {
            Verdict::Pass
        } else if estimate <= bound + 3.0 * half_width {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        }
    }

    /// `estimate >= bound`, symmetric to [`Verdict::upper`].
    pub fn lower(estimate: f64, bound: f64, half_width: f64) -> Verdict {
        Verdict::upper(-estimate, -bound, half_width)
    }

    pub fn is_fail(self) -> bool {
        self == Verdict::Fail
    }

    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L0Estimate {
    pub value: f64,
    pub n: usize,
}

/// Smallest `d` with `#{|v_i| > d} / n <= d`.
pub fn l0_norm_estimate(samples: &[f64]) -> Result<L0Estimate> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("L0 norm of an empty sample".into()));
    }
    let mut a: Vec<f64> = samples.iter().map(|v| v.abs()).collect();
    if a.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("L0 norm of a sample containing NaN".into()));
    }
    a.sort_by(f64::total_cmp);
    let n = a.len();
    let nf = n as f64;
    // On [lo, a[i]) exactly n - i samples exceed d.
    let mut lo = 0.0;
    let mut i = 0;
    while i < n {
        let hi = a[i];
        let g = (n - i) as f64 / nf;
        let cand = if lo > g { lo } else { g };
        if cand < hi {
            return Ok(L0Estimate { value: cand, n });
        }
        let v = a[i];
        while i < n && a[i] == v {
            i += 1;
        }
        lo = v;
    }
    Ok(L0Estimate { value: lo, n })
}

/// Which evaluation path produced an `F_K` value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FkMethod {
    LowerPiece,
    UpperPiece,
    AlternatingSum,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FkValue {
    pub value: f64,
    pub ln_value: f64,
    pub method: FkMethod,
}

impl FkValue {
    fn from_value(value: f64, method: FkMethod) -> FkValue {
        FkValue {
            value,
            ln_value: value.ln(),
            method,
        }
    }
}

/// Draws used when the exact alternating sum is numerically unusable.
pub const FK_MC_DRAWS: usize = 1_000_000;
const FK_MC_SEED: u64 = 0x4b5f_f11d;
const FK_MAX_CANCELLATION: f64 = 1e6;

/// `E (max(0, s - U_1 - .. - U_K))^2` for independent uniforms.
pub fn f_k_eval(k: u32, s: f64) -> Result<FkValue> {
    if k == 0 || !(s >= 0.0) || !s.is_finite() {
        return Err(Error::InvalidParameter(format!("F_K needs K >= 1, s >= 0 (K={k}, s={s})")));
    }
    let kf = k as f64;
    if s == 0.0 {
        return Ok(FkValue {
            value: 0.0,
            ln_value: f64::NEG_INFINITY,
            method: FkMethod::LowerPiece,
        });
    }
    if s <= 1.0 {
        let ln_value = std::f64::consts::LN_2 + (kf + 2.0) * s.ln() - ln_factorial(k as u64 + 2);
        return Ok(FkValue {
            value: ln_value.exp(),
            ln_value,
            method: FkMethod::LowerPiece,
        });
    }
    let full = |s: f64| (s - kf / 2.0).powi(2) + kf / 12.0;
    if s >= kf {
        return Ok(FkValue::from_value(full(s), FkMethod::UpperPiece));
    }
    if s > kf / 2.0 {
        let mirror = f_k_eval(k, kf - s)?;
        let value = full(s) - mirror.value;
        let method = if mirror.method == FkMethod::MonteCarlo {
            FkMethod::MonteCarlo
        } else {
            FkMethod::AlternatingSum
        };
        return Ok(FkValue::from_value(value, method));
    }
    // 2/(K+2)! * sum_j (-1)^j C(K,j) (s-j)_+^(K+2)
    let ln_scale = std::f64::consts::LN_2 - ln_factorial(k as u64 + 2);
    let ln_terms: Vec<(f64, bool)> = (0..=k)
        .take_while(|&j| (j as f64) < s)
        .map(|j| {
            let lt = ln_binomial(k as u64, j as u64) + (kf + 2.0) * (s - j as f64).ln() + ln_scale;
            (lt, j % 2 == 1)
        })
        .collect();
    let ln_max = ln_terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let scaled: f64 = ln_terms
        .iter()
        .map(|&(lt, neg)| if neg { -(lt - ln_max).exp() } else { (lt - ln_max).exp() })
        .sum();
    if scaled > 0.0 && 1.0 / scaled < FK_MAX_CANCELLATION {
        let ln_value = ln_max + scaled.ln();
        return Ok(FkValue {
            value: ln_value.exp(),
            ln_value,
            method: FkMethod::AlternatingSum,
        });
    }
    let (mean, _) = f_k_monte_carlo(k, s, FK_MC_DRAWS, FK_MC_SEED);
    Ok(FkValue::from_value(mean, FkMethod::MonteCarlo))
}

/// Monte Carlo mean and standard error of `F_K(s)`.
pub fn f_k_monte_carlo(k: u32, s: f64, draws: usize, seed: u64) -> (f64, f64) {
    const CHUNK: usize = 1 << 14;
    let chunks = draws.div_ceil(CHUNK);
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, c as u64);
            let len = CHUNK.min(draws - c * CHUNK);
            let (mut a, mut b) = (0.0, 0.0);
            for _ in 0..len {
                let mut acc = s;
                for _ in 0..k {
                    acc -= r.random::<f64>();
                    if acc <= 0.0 {
                        break;
                    }
                }
                let v = if acc > 0.0 { acc * acc } else { 0.0 };
                a += v;
                b += v * v;
            }
            (a, b)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `K(d) = ceil(3 / d^2)`, guarded against representation noise in `3 / d^2`.
pub fn k_of_delta(delta: f64) -> u32 {
    (3.0 / (delta * delta) * (1.0 - 1e-12)).ceil() as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiMinus {
    pub delta: f64,
    pub k: u32,
    pub s: f64,
    pub ln_value: f64,
    /// `exp(ln_value)`; zero once it underflows.
    pub value: f64,
}

/// `sqrt( (3/d - d)^2 / 4 * F_K(d^2 / (3 - d^2)) * d / 3 )` with `K = K(d)`.
pub fn psi_minus_eval(delta: f64) -> Result<PsiMinus> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("psi_minus needs 0 < delta <= 1 (got {delta})")));
    }
    let k = k_of_delta(delta);
    let s = delta * delta / (3.0 - delta * delta);
    let fk = f_k_eval(k, s)?;
    let ln_value = 0.5 * (2.0 * (0.5 * (3.0 / delta - delta)).ln() + fk.ln_value + (delta / 3.0).ln());
    Ok(PsiMinus {
        delta,
        k,
        s,
        ln_value,
        value: ln_value.exp(),
    })
}

/// One grid point of the variance lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1Row {
    pub delta: f64,
    pub k: u32,
    /// Empirical `P(Xi / E X >= delta)`.
    pub tail_prob: f64,
    pub ln_rhs: f64,
    pub rhs: f64,
    /// `var X / (E X)^2`.
    pub lhs: f64,
    pub lhs_ci: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub exact_lhs: bool,
    pub mean: f64,
    pub rows: Vec<Theorem1Row>,
    pub holds: bool,
}

/// `var X / (E X)^2 >= (3/d - d)^2 / 4 * F_K(d^2/(3-d^2)) * (P(Xi/EX >= d) - d/3 - 1/(d K))^+`.
///
/// `exact` supplies `(E X, var X)` from the chain solver; without it both
/// come from the samples and the left side carries a confidence band.
pub fn theorem1_lower_check(samples: &[FppSample], exact: Option<(f64, f64)>, deltas: &[f64]) -> Result<Theorem1Report> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("theorem1_lower needs samples".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
    let st = SampleStats::from_samples(&xs);
    let (mean, lhs, lhs_ci) = match exact {
        Some((m, v)) => (m, v / (m * m), 0.0),
        None => {
            let r = st.sd_over_mean();
            (st.mean, r * r, 2.0 * r * st.ci_sd_over_mean)
        }
    };
    let n = samples.len() as f64;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParameter(format!("theorem1_lower delta must be in (0, 1] (got {delta})")));
        }
        let k = k_of_delta(delta);
        let tail_prob = samples.iter().filter(|s| s.xi / mean >= delta).count() as f64 / n;
        let weight = tail_prob - delta / 3.0 - 1.0 / (delta * k as f64);
        let (ln_rhs, rhs) = if weight > 0.0 {
            let fk = f_k_eval(k, delta * delta / (3.0 - delta * delta))?;
            let l = 2.0 * (0.5 * (3.0 / delta - delta)).ln() + fk.ln_value + weight.ln();
            (l, l.exp())
        } else {
            (f64::NEG_INFINITY, 0.0)
        };
        rows.push(Theorem1Row {
            delta,
            k,
            tail_prob,
            ln_rhs,
            rhs,
            lhs,
            lhs_ci,
            holds: lhs + 3.0 * lhs_ci >= rhs,
        });
    }
    let holds = rows.iter().all(|r| r.holds);
    Ok(Theorem1Report {
        exact_lhs: exact.is_some(),
        mean,
        rows,
        holds,
    })
}

/// Average ranks, 1-based.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            out[p] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParameter("spearman needs two equal-length sequences (n >= 2)".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// One graph of a trend experiment.
#[derive(Debug, Clone)]
pub struct TrendMember {
    pub label: String,
    pub param: f64,
    pub graph: WeightedGraph,
    pub source: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub label: String,
    pub param: f64,
    pub sd_over_mean: f64,
    pub ci: f64,
    pub l0_xi: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub members: Vec<TrendRow>,
    pub spearman: f64,
}

/// `sd(X)/E X` and `||Xi / E X||_0` per member, plus their rank correlation.
/// Member `i` draws from master seed `subseed(seed, i)`.
pub fn theorem1_trend_experiment(members: &[TrendMember], runs: usize, seed: u64) -> Result<TrendReport> {
    if members.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "theorem1_trend needs at least 5 members (got {})",
            members.len()
        )));
    }
    let rows: Vec<TrendRow> = members
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let samples = fpp::simulate_fpp(&m.graph, m.source, m.target, runs, rng::subseed(seed, i as u64))?;
            let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
            let st = SampleStats::from_samples(&xs);
            let ratios: Vec<f64> = samples.iter().map(|s| s.xi / st.mean).collect();
            Ok(TrendRow {
                label: m.label.clone(),
                param: m.param,
                sd_over_mean: st.sd_over_mean(),
                ci: st.ci_sd_over_mean,
                l0_xi: l0_norm_estimate(&ratios)?.value,
                n_runs: runs,
            })
        })
        .collect::<Result<_>>()?;
    let a: Vec<f64> = rows.iter().map(|r| r.sd_over_mean).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.l0_xi).collect();
    let spearman = spearman(&a, &b)?;
    Ok(TrendReport { members: rows, spearman })
}

pub fn trend_csv(report: &TrendReport) -> String {
    let mut out = String::from("label,param,sd_over_mean,ci,l0_xi,n_runs\n");
    for r in &report.members {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.label, r.param, r.sd_over_mean, r.ci, r.l0_xi, r.n_runs));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackknife_matches_naive_leave_one_out() {
        let xs = [0.3, 1.7, 2.2, 0.9, 4.1, 0.05, 1.1];
        let st = SampleStats::from_samples(&xs);
        let n = xs.len();
        let thetas: Vec<f64> = (0..n)
            .map(|i| {
                let rest: Vec<f64> = xs.iter().enumerate().filter(|p| p.0 != i).map(|p| *p.1).collect();
                let m = rest.iter().sum::<f64>() / (n - 1) as f64;
                let v = rest.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 2) as f64;
                v.sqrt() / m
            })
            .collect();
        let bar = thetas.iter().sum::<f64>() / n as f64;
        let se = ((n - 1) as f64 / n as f64 * thetas.iter().map(|t| (t - bar).powi(2)).sum::<f64>()).sqrt();
        assert!((st.ci_sd_over_mean - Z95 * se).abs() < 1e-12);
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((st.variance - v).abs() < 1e-14);
    }

    #[test]
    fn verdict_bands() {
        assert_eq!(Verdict::upper(0.9, 1.0, 0.1), Verdict::Pass);
        assert_eq!(Verdict::upper(1.2, 1.0, 0.1), Verdict::Inconclusive);
        assert_eq!(Verdict::upper(1.4, 1.0, 0.1), Verdict::Fail);
        assert_eq!(Verdict::lower(0.8, 1.0, 0.1), Verdict::Inconclusive);
        assert_eq!(Verdict::Pass.and(Verdict::Inconclusive), Verdict::Inconclusive);
    }

    #[test]
    fn l0_examples() {
        assert_eq!(l0_norm_estimate(&[0.0; 10]).unwrap().value, 0.0);
        assert_eq!(l0_norm_estimate(&[0.5; 10]).unwrap().value, 0.5);
        let mut v = vec![1.0; 3];
        v.extend([0.0; 7]);
        assert!((l0_norm_estimate(&v).unwrap().value - 0.3).abs() < 1e-15);
        assert_eq!(l0_norm_estimate(&[-2.0]).unwrap().value, 1.0);
        assert!(l0_norm_estimate(&[]).is_err());
    }

    #[test]
    fn fk_reference_values() {
        // 50-digit references computed independently
        let cases = [
            (1, 1.0, 0.333_333_333_333_333_33),
            (3, 0.5, 0.000_520_833_333_333_333_33),
            (5, 2.0, 0.048_809_523_809_523_809_524),
            (4, 2.5, 0.551_866_319_444_444_444_44),
            (12, 3.5, 0.000_847_558_943_281_709_431_32),
        ];
        for (k, s, want) in cases {
            let got = f_k_eval(k, s).unwrap();
            assert!(((got.value - want) / want).abs() < 1e-10, "F_{k}({s}) = {} want {want}", got.value);
        }
        let ln = f_k_eval(12, 1.0 / 11.0).unwrap().ln_value;
        assert!((ln - (-58.068_607_821_355_923_807_543_41)).abs() < 1e-10);
        assert_eq!(f_k_eval(7, 0.0).unwrap().value, 0.0);
        assert!(f_k_eval(0, 1.0).is_err());
    }

    #[test]
    fn fk_monte_carlo_agrees() {
        for (k, s) in [(1, 1.0), (3, 0.5), (5, 2.0)] {
            let exact = f_k_eval(k, s).unwrap().value;
            let (m, se) = f_k_monte_carlo(k, s, FK_MC_DRAWS, 17);
            assert!((m - exact).abs() < 3.0 * se, "F_{k}({s}) mc {m} exact {exact} se {se}");
        }
    }

    #[test]
    fn fk_monotone_on_grid() {
        for k in 1..=8 {
            let mut prev = 0.0;
            for i in 0..=40 {
                let s = i as f64 * 0.25;
                let v = f_k_eval(k, s).unwrap().value;
                assert!(v >= prev - 1e-12, "F_{k} not increasing at {s}");
                prev = v;
                let next = f_k_eval(k + 1, s).unwrap().value;
                assert!(next <= v + 1e-12, "F not decreasing in K at ({k}, {s})");
            }
        }
    }

    #[test]
    fn k_of_delta_grid() {
        assert_eq!(k_of_delta(0.05), 1200);
        assert_eq!(k_of_delta(0.1), 300);
        assert_eq!(k_of_delta(0.15), 134);
        assert_eq!(k_of_delta(0.5), 12);
        assert_eq!(k_of_delta(1.0), 3);
    }

    #[test]
    fn psi_minus_matches_reference_grid() {
        let reference = [
            -7922.304821793463913586,
            -1572.577986996303927012,
            -598.8067387673060299014,
            -294.9949480843531484819,
            -169.6177471932217855461,
            -109.6553639393741759541,
            -74.20645861750590998361,
            -52.28604768291724973496,
            -38.539239656305277862,
            -28.91858273361350947895,
            -22.72623958188536910625,
            -19.37920783430588417424,
            -16.32780347166601234688,
            -13.54952013413691134041,
            -11.02871550104460513975,
            -8.755547546282894816506,
            -8.272529332262212421378,
            -6.33279126439394155959,
            -5.949110778469054312451,
            -4.329346376844968461656,
        ];
        for (i, want) in reference.iter().enumerate() {
            let p = psi_minus_eval((i + 1) as f64 / 20.0).unwrap();
            assert!(((p.ln_value - want) / want).abs() < 1e-8, "delta {} got {}", p.delta, p.ln_value);
            assert!(p.ln_value.is_finite());
        }
        let one = psi_minus_eval(1.0).unwrap();
        assert!(((one.value - (1.0f64 / 5760.0).sqrt()) / one.value).abs() < 1e-12);
        assert!(((one.value - 0.013176) / 0.013176).abs() < 1e-4);
        assert!(psi_minus_eval(0.0).is_err() && psi_minus_eval(1.5).is_err());
    }

    #[test]
    fn theorem1_single_edge_closed_form_tail() {
        let g = crate::graph::parse_edge_list("a b 1").unwrap();
        let samples = fpp::simulate_fpp(&g, 0, 1, 20_000, 5).unwrap();
        let rep = theorem1_lower_check(&samples, Some((1.0, 1.0)), &[0.25, 0.5, 1.0]).unwrap();
        for row in &rep.rows {
            let exact = (-row.delta).exp();
            assert!((row.tail_prob - exact).abs() < 4.0 * (exact * (1.0 - exact) / 20_000.0).sqrt());
        }
        assert!(rep.holds);
    }

    #[test]
    fn theorem1_clamp_at_delta_one() {
        // Xi/EX >= 1 never happens here, so the weight is negative.
        let samples: Vec<FppSample> = (0..100)
            .map(|i| FppSample {
                x: 1.0 + i as f64 / 100.0,
                xi: 0.1,
                path_len: 3,
            })
            .collect();
        let rep = theorem1_lower_check(&samples, None, &[1.0]).unwrap();
        assert_eq!(rep.rows[0].rhs, 0.0);
        assert!(rep.holds);
    }

    #[test]
    fn spearman_with_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }
}
