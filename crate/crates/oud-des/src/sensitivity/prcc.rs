//! Rank statistics: PRCC and log-log effect sizes.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

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
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Errors when more than half of a column sits in tied groups.
fn check_ties(xs: &[f64], what: &str) -> Result<()> {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let mut tied = 0;
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        if j > i {
            tied += j - i + 1;
        }
        i = j + 1;
    }
    if 2 * tied > s.len() {
        return Err(Error::Domain(format!("{what}: more than half the values are tied")));
    }
    Ok(())
}

fn residuals(z: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = z.clone().qr();
    let r = qr.r();
    let beta = r.solve_upper_triangular(&(qr.q().transpose() * v)).ok_or(Error::RankDeficient)?;
    Ok(v - z * beta)
}

fn corr(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (ma, mb) = (a.mean(), b.mean());
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prcc {
    pub coefficient: f64,
    pub t: f64,
    pub p: f64,
    /// `p` times the family size, capped at 1.
    pub p_bonferroni: f64,
}

/// Partial rank correlation of each column of `x` (n rows × k columns)
/// with `y`.
pub fn prcc(x: &[Vec<f64>], y: &[f64], family: usize) -> Result<Vec<Prcc>> {
    let n = x.len();
    let k = x.first().map_or(0, Vec::len);
    if n != y.len() {
        return Err(Error::Domain(format!("{n} input rows but {} outputs", y.len())));
    }
    if k == 0 || n <= k + 2 {
        return Err(Error::Domain(format!("prcc needs more than k+2 = {} rows, got {n}", k + 2)));
    }
    let mut cols = Vec::with_capacity(k);
    for j in 0..k {
        let c: Vec<f64> = x.iter().map(|r| r[j]).collect();
        check_ties(&c, &format!("parameter column {}", j + 1))?;
        cols.push(ranks(&c));
    }
    check_ties(y, "output")?;
    let ry = DVector::from_vec(ranks(y));
    let df = (n - k - 1) as f64;
    let tdist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Domain(e.to_string()))?;
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let z = DMatrix::from_fn(n, k, |i, c| match c {
            0 => 1.0,
            c if c <= j => cols[c - 1][i],
            c => cols[c][i],
        });
        let rx = DVector::from_column_slice(&cols[j]);
        let r = corr(&residuals(&z, &rx)?, &residuals(&z, &ry)?);
        let t = r * (df / (1.0 - r * r)).sqrt();
        let p = if t.is_finite() { 2.0 * tdist.cdf(-t.abs()) } else { 0.0 };
        out.push(Prcc { coefficient: r, t, p, p_bonferroni: (p * family as f64).min(1.0) });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Effect {
    pub coefficient: f64,
    pub p: f64,
    pub p_bonferroni: f64,
}

/// Regresses ln(y+1) on ln(x+1) for inputs already scaled to [0,1].
/// Outputs are counts, so zero is allowed; negatives are not.
pub fn effect_sizes(x_unit: &[Vec<f64>], y: &[f64], family: usize) -> Result<Vec<Effect>> {
    if let Some(v) = y.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("effect sizes need outputs >= 0, got {v}")));
    }
    if x_unit.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain("effect sizes need inputs in [0,1]".into()));
    }
    let design: Vec<Vec<f64>> = x_unit.iter().map(|r| std::iter::once(1.0).chain(r.iter().map(|v| v.ln_1p())).collect()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln_1p()).collect();
    let fit = crate::stats::ols(&design, &ly)?;
    Ok((1..fit.coefficients.len())
        .map(|j| {
            let p = fit.p[j];
            Effect { coefficient: fit.coefficients[j], p, p_bonferroni: (p * family as f64).min(1.0) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_ranks() {
        assert_eq!(ranks(&[10.0, 30.0, 20.0, 20.0]), vec![1.0, 4.0, 2.5, 2.5]);
    }

    #[test]
    fn tie_check() {
        assert!(check_ties(&[1.0, 1.0, 1.0, 2.0], "c").is_err());
        assert!(check_ties(&[1.0, 1.0, 2.0, 3.0], "c").is_ok());
    }
}
