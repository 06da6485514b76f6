//! Distribution comparison utilities shared by the verifiers: empirical
//! distributions over canonical byte keys, total-variation distance, and a
//! two-sample multinomial chi-square test with small-count pooling.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("empty distribution")]
    Empty,
    #[error("need at least {0} observations")]
    TooFew(u64),
}

/// Counts over canonical outcome keys.  Counts merge commutatively, so
/// parallel accumulation is safe.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmpiricalDist {
    counts: BTreeMap<Vec<u8>, u64>,
    total: u64,
}

impl EmpiricalDist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, outcome: Vec<u8>) {
        *self.counts.entry(outcome).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn record_n(&mut self, outcome: Vec<u8>, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(outcome).or_insert(0) += n;
        self.total += n;
    }

    pub fn merge(&mut self, other: &EmpiricalDist) {
        for (k, v) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += v;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support(&self) -> impl Iterator<Item = (&Vec<u8>, u64)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    pub fn count(&self, outcome: &[u8]) -> u64 {
        self.counts.get(outcome).copied().unwrap_or(0)
    }

    pub fn freq(&self, outcome: &[u8]) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(outcome) as f64 / self.total as f64
        }
    }
}

/// Total-variation distance between normalized counts: half the L1 distance
/// over the union support.
pub fn tv_distance(d1: &EmpiricalDist, d2: &EmpiricalDist) -> Result<f64, StatsError> {
    if d1.total == 0 || d2.total == 0 {
        return Err(StatsError::Empty);
    }
    let mut keys: Vec<&Vec<u8>> = d1.counts.keys().chain(d2.counts.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut sum = 0.0;
    for k in keys {
        sum += (d1.freq(k) - d2.freq(k)).abs();
    }
    Ok(sum / 2.0)
}

/// Two-sample multinomial chi-square test of homogeneity over the pooled
/// support, pooling categories whose pooled expected count falls below 5.
/// Returns the p-value; degenerate supports give p = 1.
pub fn multinomial_two_sample(d1: &EmpiricalDist, d2: &EmpiricalDist) -> Result<f64, StatsError> {
    if d1.total < 2 || d2.total < 2 {
        return Err(StatsError::TooFew(2));
    }
    let n1 = d1.total as f64;
    let n2 = d2.total as f64;
    let n = n1 + n2;
    let mut keys: Vec<Vec<u8>> = d1
        .counts
        .keys()
        .chain(d2.counts.keys())
        .cloned()
        .collect();
    keys.sort();
    keys.dedup();
    // Pool rare categories: keep categories whose pooled count gives every
    // cell an expectation of at least 5; sweep the rest into one bucket.
    let mut kept: Vec<(u64, u64)> = Vec::new();
    let mut rest = (0u64, 0u64);
    for k in &keys {
        let (c1, c2) = (d1.count(k), d2.count(k));
        let pooled = (c1 + c2) as f64;
        let min_expected = (pooled * n1.min(n2)) / n;
        if min_expected >= 5.0 {
            kept.push((c1, c2));
        } else {
            rest.0 += c1;
            rest.1 += c2;
        }
    }
    if rest.0 + rest.1 > 0 {
        kept.push(rest);
    }
    if kept.len() < 2 {
        return Ok(1.0);
    }
    let mut stat = 0.0;
    for &(c1, c2) in &kept {
        let pooled = (c1 + c2) as f64;
        let e1 = pooled * n1 / n;
        let e2 = pooled * n2 / n;
        stat += (c1 as f64 - e1).powi(2) / e1;
        stat += (c2 as f64 - e2).powi(2) / e2;
    }
    let df = (kept.len() - 1) as f64;
    Ok(chi_square_survival(stat, df))
}

/// Verdict combining a TV threshold and a p-value floor, with the largest
/// per-outcome discrepancies listed for diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ComparisonVerdict {
    pub pass: bool,
    pub tv: f64,
    pub p_value: f64,
    pub tv_threshold: f64,
    pub p_threshold: f64,
    pub worst_outcomes: Vec<OutcomeDiagnostic>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct OutcomeDiagnostic {
    pub outcome_hex: String,
    pub freq_left: f64,
    pub freq_right: f64,
}

pub fn verdict(
    d1: &EmpiricalDist,
    d2: &EmpiricalDist,
    tv_threshold: f64,
    p_threshold: f64,
) -> Result<ComparisonVerdict, StatsError> {
    let tv = tv_distance(d1, d2)?;
    let p_value = multinomial_two_sample(d1, d2)?;
    let mut keys: Vec<Vec<u8>> = d1
        .counts
        .keys()
        .chain(d2.counts.keys())
        .cloned()
        .collect();
    keys.sort();
    keys.dedup();
    let mut diffs: Vec<OutcomeDiagnostic> = keys
        .into_iter()
        .map(|k| OutcomeDiagnostic {
            outcome_hex: k.iter().map(|b| format!("{b:02x}")).collect(),
            freq_left: d1.freq(&k),
            freq_right: d2.freq(&k),
        })
        .collect();
    diffs.sort_by(|a, b| {
        let da = (a.freq_left - a.freq_right).abs();
        let db = (b.freq_left - b.freq_right).abs();
        db.partial_cmp(&da).unwrap()
    });
    diffs.truncate(5);
    Ok(ComparisonVerdict {
        pass: tv <= tv_threshold && p_value >= p_threshold,
        tv,
        p_value,
        tv_threshold,
        p_threshold,
        worst_outcomes: diffs,
    })
}

/// Survival function of the chi-square distribution: `Q(df/2, x/2)`, the
/// regularized upper incomplete gamma.  Series for small arguments,
/// continued fraction otherwise (Numerical Recipes gammp/gammq style).
pub fn chi_square_survival(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let a = df / 2.0;
    let x = x / 2.0;
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9.
    #[allow(clippy::excessive_precision)]
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = COEFFS[0];
        for (i, &c) in COEFFS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = a;
    for _ in 0..500 {
        n += 1.0;
        term *= x / n;
        sum += term;
        if term.abs() < sum.abs() * 1e-15 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h * (-x + a * x.ln() - ln_gamma(a)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(&str, u64)]) -> EmpiricalDist {
        let mut d = EmpiricalDist::new();
        for (k, n) in pairs {
            d.record_n(k.as_bytes().to_vec(), *n);
        }
        d
    }

    #[test]
    fn tv_zero_on_equal() {
        let d = dist(&[("a", 3), ("b", 5)]);
        assert_eq!(tv_distance(&d, &d).unwrap(), 0.0);
    }

    #[test]
    fn tv_one_on_disjoint_supports() {
        let d1 = dist(&[("a", 4)]);
        let d2 = dist(&[("b", 9)]);
        assert_eq!(tv_distance(&d1, &d2).unwrap(), 1.0);
    }

    #[test]
    fn tv_quarter_on_worked_example() {
        let d1 = dist(&[("a", 1), ("b", 1)]);
        let d2 = dist(&[("a", 1), ("b", 3)]);
        assert!((tv_distance(&d1, &d2).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn tv_errors_on_empty() {
        let d1 = EmpiricalDist::new();
        let d2 = dist(&[("a", 1)]);
        assert_eq!(tv_distance(&d1, &d2), Err(StatsError::Empty));
    }

    #[test]
    fn tv_is_a_metric_on_samples() {
        // Symmetry and triangle inequality over a handful of random-ish
        // count tables.
        let tables = [
            dist(&[("a", 10), ("b", 1)]),
            dist(&[("a", 3), ("b", 3), ("c", 3)]),
            dist(&[("c", 7), ("d", 2)]),
            dist(&[("a", 1)]),
        ];
        for x in &tables {
            for y in &tables {
                let dxy = tv_distance(x, y).unwrap();
                let dyx = tv_distance(y, x).unwrap();
                assert!((dxy - dyx).abs() < 1e-12);
                for z in &tables {
                    let dxz = tv_distance(x, z).unwrap();
                    let dzy = tv_distance(z, y).unwrap();
                    assert!(dxy <= dxz + dzy + 1e-12);
                }
            }
        }
    }

    #[test]
    fn chi_square_survival_reference_values() {
        // Classical table values.
        assert!((chi_square_survival(3.841_458_820_694_124, 1.0) - 0.05).abs() < 1e-9);
        assert!((chi_square_survival(5.991_464_547_107_979, 2.0) - 0.05).abs() < 1e-9);
        assert!((chi_square_survival(2.417_910_447_761_194, 3.0) - 0.490_309_306_965_388_3).abs() < 1e-9);
    }

    #[test]
    fn identical_large_samples_give_high_p() {
        let d = dist(&[("a", 50_000), ("b", 50_000)]);
        let p = multinomial_two_sample(&d, &d).unwrap();
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shifted_bernoulli_gives_tiny_p() {
        let d1 = dist(&[("h", 50_000), ("t", 50_000)]);
        let d2 = dist(&[("h", 60_000), ("t", 40_000)]);
        let p = multinomial_two_sample(&d1, &d2).unwrap();
        assert!(p < 1e-3, "p = {p}");
    }

    #[test]
    fn single_shared_category_gives_p_one() {
        let d1 = dist(&[("a", 10)]);
        let d2 = dist(&[("a", 20)]);
        assert_eq!(multinomial_two_sample(&d1, &d2).unwrap(), 1.0);
    }

    #[test]
    fn verdict_passes_on_equal_and_fails_on_disjoint() {
        let d1 = dist(&[("a", 1000), ("b", 1000)]);
        assert!(verdict(&d1, &d1, 0.02, 1e-3).unwrap().pass);
        let d2 = dist(&[("c", 2000)]);
        let v = verdict(&d1, &d2, 0.02, 1e-3).unwrap();
        assert!(!v.pass);
        assert_eq!(v.tv, 1.0);
    }

    #[test]
    fn verdict_threshold_edges_are_inclusive() {
        let d1 = dist(&[("a", 3), ("b", 1)]);
        let d2 = dist(&[("a", 1), ("b", 3)]);
        let tv = tv_distance(&d1, &d2).unwrap();
        let v = verdict(&d1, &d2, tv, 0.0).unwrap();
        assert!(v.pass);
    }
}
