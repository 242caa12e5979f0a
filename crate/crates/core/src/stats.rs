//! Statistical kernels: KL divergence, Welch's unpaired t-test, Spearman
//! rank correlation, and the dependent t-test for paired samples.
//!
//! The Student-t CDF is evaluated through `statrs` (regularised
//! incomplete beta); everything on top of it is implemented here.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{PipelineError, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (ddof = 1).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Two-sided p-value for a t statistic with `df` degrees of freedom.
pub fn two_sided_t_pvalue(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    2.0 * dist.cdf(-t.abs())
}

/// Cumulative distribution of Student's t.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").cdf(t)
}

/// Smoothed KL divergence: both vectors get `+epsilon` and are
/// renormalised before `sum p ln(p/q)`.
pub fn kl_divergence(p: &[f64], q: &[f64], epsilon: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(PipelineError::invalid(format!(
            "KL divergence needs equal lengths, got {} vs {}",
            p.len(),
            q.len()
        )));
    }
    if p.is_empty() {
        return Err(PipelineError::invalid("KL divergence of empty vectors"));
    }
    let ps: f64 = p.iter().map(|v| v + epsilon).sum();
    let qs: f64 = q.iter().map(|v| v + epsilon).sum();
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        let pn = (pi + epsilon) / ps;
        let qn = (qi + epsilon) / qs;
        kl += pn * (pn / qn).ln();
    }
    Ok(kl)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Welch's unpaired t-test (unequal variances, Welch-Satterthwaite
/// degrees of freedom). Requires at least two values per group.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(PipelineError::SmallData {
            got: a.len().min(b.len()),
            required: 2,
        });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a), sample_variance(b));
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 == 0.0 {
        // Identical constant samples: no detectable difference.
        return Ok(WelchResult {
            t: 0.0,
            df: na + nb - 2.0,
            p: 1.0,
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(WelchResult {
        t,
        df,
        p: two_sided_t_pvalue(t, df),
    })
}

/// Average ranks (ties get the mean of the ranks they occupy), 1-based.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).expect("no NaN in rank input"));
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    if da == 0.0 || db == 0.0 {
        return None;
    }
    Some(num / (da * db).sqrt())
}

/// Spearman rank correlation: Pearson correlation of average ranks.
/// `None` when either variable has zero rank variance.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(PipelineError::invalid("spearman needs paired values"));
    }
    if a.len() < 3 {
        return Err(PipelineError::SmallData {
            got: a.len(),
            required: 3,
        });
    }
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Dependent t-test for paired samples. `None` when the differences have
/// zero variance (undefined signal).
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<Option<PairedTResult>> {
    if a.len() != b.len() {
        return Err(PipelineError::invalid("paired t-test needs equal lengths"));
    }
    if a.len() < 2 {
        return Err(PipelineError::SmallData {
            got: a.len(),
            required: 2,
        });
    }
    let d: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let var = sample_variance(&d);
    if var == 0.0 {
        return Ok(None);
    }
    let t = mean(&d) / (var / n).sqrt();
    let df = n - 1.0;
    Ok(Some(PairedTResult {
        t,
        df,
        p: two_sided_t_pvalue(t, df),
    }))
}
