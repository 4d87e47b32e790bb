//! Coefficient functions of the photon-added Kraus operators and the Fock
//! matrix elements of the beamsplitter, two-mode-squeeze and
//! phase-conjugation unitaries.
//!
//! Every term is carried as `(sign, ln|term|)` so factorials in the hundreds
//! never overflow. Powers use the `0^0 = 1` convention, which makes the
//! identity limits (`kappa = 1` for the amplifier and attenuator) exact.

use crate::error::{domain, Result};
use crate::fock::{log_binomial, log_factorial};

/// Results whose magnitude falls below this fraction of their largest term
/// are reported as cancellation-dominated.
pub const CANCELLATION_RATIO: f64 = 1e-12;

/// Compensated accumulator for `sum_i s_i exp(L_i)`.
#[derive(Debug, Clone, Default)]
pub struct SignedLogSum {
    terms: Vec<(bool, f64)>,
}

impl SignedLogSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `(-1)^negative * exp(log_mag)`. A `-inf` magnitude is a zero term.
    pub fn add(&mut self, negative: bool, log_mag: f64) {
        if log_mag > f64::NEG_INFINITY {
            self.terms.push((negative, log_mag));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `ln` of the largest term magnitude.
    pub fn max_log(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eval(&self) -> SumEval {
        let max_log = self.max_log();
        if max_log == f64::NEG_INFINITY {
            return SumEval {
                value: 0.0,
                max_term: 0.0,
            };
        }
        // Neumaier summation of the rescaled terms
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &(neg, l) in &self.terms {
            let x = if neg { -(l - max_log).exp() } else { (l - max_log).exp() };
            let t = sum + x;
            if sum.abs() >= x.abs() {
                comp += (sum - t) + x;
            } else {
                comp += (x - t) + sum;
            }
            sum = t;
        }
        let scale = max_log.exp();
        SumEval {
            value: (sum + comp) * scale,
            max_term: scale,
        }
    }

    pub fn value(&self) -> f64 {
        self.eval().value
    }
}

/// A finished sum with its cancellation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumEval {
    pub value: f64,
    pub max_term: f64,
}

impl SumEval {
    /// `|value| / max_term`, or 1 for an empty sum.
    pub fn ratio(&self) -> f64 {
        if self.max_term == 0.0 {
            1.0
        } else {
            self.value.abs() / self.max_term
        }
    }

    pub fn cancellation_dominated(&self) -> bool {
        self.ratio() < CANCELLATION_RATIO
    }
}

/// `ln(base^exp)` with `0^0 = 1`; `-inf` marks a vanishing power.
#[inline]
fn log_pow(base: f64, exp: usize) -> f64 {
    if exp == 0 {
        0.0
    } else if base == 0.0 {
        f64::NEG_INFINITY
    } else {
        exp as f64 * base.ln()
    }
}

fn check_amplifier(kappa: f64) -> Result<()> {
    if kappa >= 1.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(domain("kappa", kappa, "[1, inf) for the amplifier"))
    }
}

fn check_attenuator(kappa: f64) -> Result<()> {
    if (0.0..=1.0).contains(&kappa) {
        Ok(())
    } else {
        Err(domain("kappa", kappa, "[0, 1] for the attenuator"))
    }
}

fn check_conjugator(kappa: f64) -> Result<()> {
    if kappa >= 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(domain("kappa", kappa, "[0, inf) for the phase conjugator"))
    }
}

/// Bases `(1/kappa, sqrt(1 - kappa^-2))` of the amplifier sums.
fn amplifier_bases(kappa: f64) -> (f64, f64) {
    let inv = 1.0 / kappa;
    (inv, (1.0 - inv * inv).max(0.0).sqrt())
}

/// Bases `(kappa, sqrt(1 - kappa^2))` of the attenuator sums.
fn attenuator_bases(kappa: f64) -> (f64, f64) {
    (kappa, (1.0 - kappa * kappa).max(0.0).sqrt())
}

/// Bases `(1/sqrt(1 + kappa^2), 1/sqrt(1 + kappa^-2))` of the conjugator
/// sums; the second is written `kappa / sqrt(1 + kappa^2)` so `kappa = 0` is
/// finite.
fn conjugator_bases(kappa: f64) -> (f64, f64) {
    let h = (1.0 + kappa * kappa).sqrt();
    (1.0 / h, kappa / h)
}

/// Amplifier coefficient `g1(n, n1, m1; kappa)`.
pub fn g1(n: usize, n1: usize, m1: usize, kappa: f64) -> Result<f64> {
    g1_eval(n, n1, m1, kappa).map(|e| e.value)
}

pub fn g1_eval(n: usize, n1: usize, m1: usize, kappa: f64) -> Result<SumEval> {
    check_amplifier(kappa)?;
    let (inv, s) = amplifier_bases(kappa);
    Ok(g1_sum(n, n1, m1, inv, s).eval())
}

pub(crate) fn g1_sum(n: usize, n1: usize, m1: usize, inv: f64, s: f64) -> SignedLogSum {
    let mut acc = SignedLogSum::new();
    let lo = n1.saturating_sub(m1);
    let hi = n.min(n1);
    if lo > hi {
        return acc;
    }
    for r in lo..=hi {
        let l = log_binomial(n, r)
            + log_binomial(m1, n1 - r)
            + log_pow(inv, n + n1 - 2 * r)
            + log_pow(s, m1 + 2 * r - n1);
        acc.add(r % 2 == 1, l);
    }
    acc
}

/// Attenuator coefficient `g2(n, l, n1; kappa)`.
pub fn g2(n: usize, ell: usize, n1: usize, kappa: f64) -> Result<f64> {
    g2_eval(n, ell, n1, kappa).map(|e| e.value)
}

pub fn g2_eval(n: usize, ell: usize, n1: usize, kappa: f64) -> Result<SumEval> {
    check_attenuator(kappa)?;
    let (k, s) = attenuator_bases(kappa);
    Ok(g2_sum(n, ell, n1, k, s).eval())
}

pub(crate) fn g2_sum(n: usize, ell: usize, n1: usize, k: f64, s: f64) -> SignedLogSum {
    let mut acc = SignedLogSum::new();
    let lo = ell.saturating_sub(n);
    let hi = ell.min(n1);
    if lo > hi {
        return acc;
    }
    for r in lo..=hi {
        let l = log_binomial(n1, r)
            + log_binomial(n, ell - r)
            + log_pow(k, n1 + ell - 2 * r)
            + log_pow(s, 2 * r + n - ell);
        acc.add((n + r - ell) % 2 == 1, l);
    }
    acc
}

/// Phase-conjugator coefficient `g3(n, n1, m1; kappa)`.
pub fn g3(n: usize, n1: usize, m1: usize, kappa: f64) -> Result<f64> {
    g3_eval(n, n1, m1, kappa).map(|e| e.value)
}

pub fn g3_eval(n: usize, n1: usize, m1: usize, kappa: f64) -> Result<SumEval> {
    check_conjugator(kappa)?;
    let (sech, tanh) = conjugator_bases(kappa);
    Ok(g3_sum(n, n1, m1, sech, tanh).eval())
}

pub(crate) fn g3_sum(n: usize, n1: usize, m1: usize, sech: f64, tanh: f64) -> SignedLogSum {
    let mut acc = SignedLogSum::new();
    let lo = n.saturating_sub(n1);
    let hi = n.min(m1);
    if lo > hi {
        return acc;
    }
    for r in lo..=hi {
        let l = log_binomial(m1, r)
            + log_binomial(n1, n - r)
            + log_pow(tanh, m1 + n - 2 * r)
            + log_pow(sech, n1 + 2 * r - n);
        acc.add((n - r) % 2 == 1, l);
    }
    acc
}

/// Precomputed bases for one channel family and parameter; lets the Kraus
/// builders skip the per-call domain checks.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Bases {
    Amplifier { inv: f64, s: f64 },
    Attenuator { k: f64, s: f64 },
    Conjugator { sech: f64, tanh: f64 },
}

impl Bases {
    pub(crate) fn amplifier(kappa: f64) -> Result<Self> {
        check_amplifier(kappa)?;
        let (inv, s) = amplifier_bases(kappa);
        Ok(Self::Amplifier { inv, s })
    }

    pub(crate) fn attenuator(kappa: f64) -> Result<Self> {
        check_attenuator(kappa)?;
        let (k, s) = attenuator_bases(kappa);
        Ok(Self::Attenuator { k, s })
    }

    pub(crate) fn conjugator(kappa: f64) -> Result<Self> {
        check_conjugator(kappa)?;
        let (sech, tanh) = conjugator_bases(kappa);
        Ok(Self::Conjugator { sech, tanh })
    }
}

/// `<m1, m2| U_TMS |n1, n2>` for the amplifier dilation, `kappa = cosh r`.
pub fn t_amplifier(m1: usize, m2: usize, n1: usize, n2: usize, kappa: f64) -> Result<f64> {
    check_amplifier(kappa)?;
    // m1 - m2 = n1 - n2
    if m1 + n2 != n1 + m2 {
        return Ok(0.0);
    }
    let (inv, s) = amplifier_bases(kappa);
    let mut acc = SignedLogSum::new();
    for r in 0..=n2 {
        for j in 0..=m1 {
            if n1 != r + j || m2 + r + j != n2 + m1 {
                continue;
            }
            let l = log_binomial(n2, r)
                + log_binomial(m1, j)
                + log_pow(inv, n2 + j - r)
                + log_pow(s, m1 + r - j);
            acc.add(r % 2 == 1, l);
        }
    }
    let pre = 0.5 * (log_factorial(n1) + log_factorial(m2) - log_factorial(m1) - log_factorial(n2));
    Ok(acc.value() * pre.exp() * inv)
}

/// `<m1, m2| U_BS |n1, n2>` for the attenuator dilation, `kappa = cos theta`.
pub fn t_attenuator(m1: usize, m2: usize, n1: usize, n2: usize, kappa: f64) -> Result<f64> {
    check_attenuator(kappa)?;
    if m1 + m2 != n1 + n2 {
        return Ok(0.0);
    }
    let (k, s) = attenuator_bases(kappa);
    let mut acc = SignedLogSum::new();
    for r in 0..=n1 {
        for j in 0..=n2 {
            if m2 != r + j || m1 + r + j != n1 + n2 {
                continue;
            }
            let l = log_binomial(n1, r)
                + log_binomial(n2, j)
                + log_pow(k, n1 - r + j)
                + log_pow(s, r + n2 - j);
            acc.add((n2 - j) % 2 == 1, l);
        }
    }
    let pre = 0.5 * (log_factorial(m1) + log_factorial(m2) - log_factorial(n1) - log_factorial(n2));
    Ok(acc.value() * pre.exp())
}

/// `<m1, m2| U_PC |n1, n2>` for the phase-conjugator dilation.
pub fn t_conjugator(m1: usize, m2: usize, n1: usize, n2: usize, kappa: f64) -> Result<f64> {
    check_conjugator(kappa)?;
    // the mode flip in the dilation swaps the input labels: m1 - m2 = n2 - n1
    if m1 + n1 != n2 + m2 {
        return Ok(0.0);
    }
    let (sech, tanh) = conjugator_bases(kappa);
    let mut acc = SignedLogSum::new();
    for r in 0..=m1 {
        for j in 0..=n1 {
            if n2 != r + j || m2 + r + j != n1 + m1 {
                continue;
            }
            let l = log_binomial(m1, r)
                + log_binomial(n1, j)
                + log_pow(sech, n1 + r - j)
                + log_pow(tanh, m1 - r + j);
            acc.add(j % 2 == 1, l);
        }
    }
    let pre = 0.5 * (log_factorial(n2) + log_factorial(m2) - log_factorial(m1) - log_factorial(n1));
    Ok(acc.value() * pre.exp() * sech)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> f64 {
        if k > n {
            return 0.0;
        }
        let mut b: u128 = 1;
        for i in 0..k {
            b = b * (n - i) as u128 / (i + 1) as u128;
        }
        b as f64
    }

    fn pw(b: f64, e: i64) -> f64 {
        if e == 0 {
            1.0
        } else {
            b.powi(e as i32)
        }
    }

    // Plain f64 transcriptions of the sums, used as an independent check of
    // the log-space path on small indices.
    fn g1_naive(n: i64, n1: i64, m1: i64, k: f64) -> f64 {
        let s = (1.0 - 1.0 / (k * k)).max(0.0).sqrt();
        ((n1 - m1).max(0)..=n.min(n1))
            .map(|r| {
                binom(n as u64, r as u64)
                    * binom(m1 as u64, (n1 - r) as u64)
                    * if r % 2 == 1 { -1.0 } else { 1.0 }
                    * pw(1.0 / k, n + n1 - 2 * r)
                    * pw(s, m1 + 2 * r - n1)
            })
            .sum()
    }

    fn g2_naive(n: i64, l: i64, n1: i64, k: f64) -> f64 {
        let s = (1.0 - k * k).max(0.0).sqrt();
        ((l - n).max(0)..=l.min(n1))
            .map(|r| {
                binom(n1 as u64, r as u64)
                    * binom(n as u64, (l - r) as u64)
                    * if (n - l + r) % 2 != 0 { -1.0 } else { 1.0 }
                    * pw(k, n1 - 2 * r + l)
                    * pw(s, 2 * r + n - l)
            })
            .sum()
    }

    fn g3_naive(n: i64, n1: i64, m1: i64, k: f64) -> f64 {
        let a = (1.0 + 1.0 / (k * k)).sqrt();
        let b = (1.0 + k * k).sqrt();
        ((n - n1).max(0)..=n.min(m1))
            .map(|r| {
                binom(m1 as u64, r as u64)
                    * binom(n1 as u64, (n - r) as u64)
                    * pw(1.0 / a, m1 - 2 * r + n)
                    * if (n - r) % 2 == 1 { -1.0 } else { 1.0 }
                    * pw(1.0 / b, n1 + 2 * r - n)
            })
            .sum()
    }

    #[test]
    fn g1_examples() {
        for n in 0..6 {
            for m1 in 0..6 {
                assert_eq!(g1(n, m1, m1, 1.0).unwrap(), 1.0);
            }
        }
        let expected = 3.0 * (1.0f64 / 1.5).powi(2) * (1.0 - 1.0 / 2.25f64).sqrt();
        assert!((g1(0, 2, 3, 1.5).unwrap() - expected).abs() < 1e-15);
        assert!((g1(2, 0, 0, 2.0).unwrap() - 0.25).abs() < 1e-16);
        assert!(g1(1, 1, 1, 0.9).is_err());
    }

    #[test]
    fn g2_examples() {
        for n in 0..6 {
            for n1 in 0..6 {
                for ell in 0..8 {
                    let v = g2(n, ell, n1, 1.0).unwrap();
                    assert_eq!(v, if ell == n { 1.0 } else { 0.0 });
                }
            }
        }
        assert!((g2(0, 0, 3, 0.8).unwrap() - 0.512).abs() < 1e-15);
        for kappa in [0.0, 0.3, 0.9] {
            let expected = -(1.0f64 - kappa * kappa).sqrt();
            assert!((g2(1, 0, 0, kappa).unwrap() - expected).abs() < 1e-15);
        }
        assert!(g2(0, 0, 0, 1.1).is_err());
        assert!(g2(0, 0, 0, -0.1).is_err());
    }

    #[test]
    fn g3_examples() {
        for kappa in [0.3f64, 1.0, 1.25f64.sqrt()] {
            for n1 in 0..5 {
                for m1 in 0..5 {
                    let expected = (1.0 + 1.0 / (kappa * kappa)).sqrt().powi(-(m1 as i32))
                        * (1.0 + kappa * kappa).sqrt().powi(-(n1 as i32));
                    assert!((g3(0, n1, m1, kappa).unwrap() - expected).abs() < 1e-15);
                }
            }
        }
        assert_eq!(g3(1, 0, 0, 0.7).unwrap(), 0.0);
        assert!(g3(0, 0, 0, -1.0).is_err());
    }

    #[test]
    fn log_space_matches_naive_sums() {
        for n in 0..5i64 {
            for a in 0..9i64 {
                for b in 0..9i64 {
                    for k in [1.0, 1.2, 2.5] {
                        let v = g1(n as usize, a as usize, b as usize, k).unwrap();
                        let w = g1_naive(n, a, b, k);
                        assert!((v - w).abs() <= 1e-12 * w.abs().max(1.0), "g1 {n} {a} {b} {k}");
                    }
                    for k in [0.0, 0.4, 0.95, 1.0] {
                        let v = g2(n as usize, a as usize, b as usize, k).unwrap();
                        let w = g2_naive(n, a, b, k);
                        assert!((v - w).abs() <= 1e-12 * w.abs().max(1.0), "g2 {n} {a} {b} {k}");
                    }
                    for k in [0.2, 1.0, 3.0] {
                        let v = g3(n as usize, a as usize, b as usize, k).unwrap();
                        let w = g3_naive(n, a, b, k);
                        assert!((v - w).abs() <= 1e-12 * w.abs().max(1.0), "g3 {n} {a} {b} {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn empty_ranges_are_exact_zero() {
        // g1: lo = n1 - m1 > min(n, n1) when n1 - m1 > n
        assert_eq!(g1(0, 3, 1, 1.5).unwrap(), 0.0);
        // g2: lo = l - n > min(l, n1) when n1 < l - n
        assert_eq!(g2(1, 4, 2, 0.5).unwrap(), 0.0);
        // g3: lo = n - n1 > min(n, m1) when m1 < n - n1
        assert_eq!(g3(3, 0, 2, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn attenuator_t_limits() {
        for m1 in 0..5 {
            for m2 in 0..5 {
                for n1 in 0..5 {
                    for n2 in 0..5 {
                        let id = t_attenuator(m1, m2, n1, n2, 1.0).unwrap();
                        assert_eq!(id, if m1 == n1 && m2 == n2 { 1.0 } else { 0.0 });
                        let swap = t_attenuator(m1, m2, n1, n2, 0.0).unwrap();
                        let sign = if n2 % 2 == 1 { -1.0 } else { 1.0 };
                        assert_eq!(swap, if m1 == n2 && m2 == n1 { sign } else { 0.0 });
                    }
                }
            }
        }
    }

    #[test]
    fn conservation_laws() {
        for m1 in 0..6 {
            for m2 in 0..6 {
                for n1 in 0..6 {
                    for n2 in 0..6 {
                        if m1 + m2 != n1 + n2 {
                            assert_eq!(t_attenuator(m1, m2, n1, n2, 0.6).unwrap(), 0.0);
                        }
                        if m1 + n2 != n1 + m2 {
                            assert_eq!(t_amplifier(m1, m2, n1, n2, 1.7).unwrap(), 0.0);
                        }
                        if m1 + n1 != n2 + m2 {
                            assert_eq!(t_conjugator(m1, m2, n1, n2, 0.8).unwrap(), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn attenuator_blocks_are_orthonormal() {
        let kappa = 0.65;
        for total in 0..12usize {
            for a in 0..=total {
                for b in 0..=total {
                    let dot: f64 = (0..=total)
                        .map(|m1| {
                            let m2 = total - m1;
                            t_attenuator(m1, m2, a, total - a, kappa).unwrap()
                                * t_attenuator(m1, m2, b, total - b, kappa).unwrap()
                        })
                        .sum();
                    let expected = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - expected).abs() < 1e-10, "N={total} a={a} b={b} dot={dot}");
                }
            }
        }
    }

    #[test]
    fn t_matches_reduced_kraus_coefficients() {
        // setting m2 = l, n2 = n collapses the double sums onto g1, g2, g3
        let (ka, kb, kc): (f64, f64, f64) = (1.4, 0.7, 0.9);
        for n in 0..4usize {
            for n1 in 0..6usize {
                for m1 in 0..8usize {
                    if m1 + n >= n1 {
                        let ell = m1 + n - n1;
                        let pre = 0.5
                            * (log_factorial(n1) + log_factorial(ell)
                                - log_factorial(m1)
                                - log_factorial(n));
                        let reduced = pre.exp() / ka * g1(n, n1, m1, ka).unwrap();
                        let t = t_amplifier(m1, ell, n1, n, ka).unwrap();
                        assert!((t - reduced).abs() < 1e-13);
                    }
                    if n1 + n >= m1 {
                        let ell = n1 + n - m1;
                        let pre = 0.5
                            * (log_factorial(m1) + log_factorial(ell)
                                - log_factorial(n1)
                                - log_factorial(n));
                        let reduced = pre.exp() * g2(n, ell, n1, kb).unwrap();
                        let t = t_attenuator(m1, ell, n1, n, kb).unwrap();
                        assert!((t - reduced).abs() < 1e-13);
                    }
                    if m1 + n1 >= n {
                        let ell = m1 + n1 - n;
                        let pre = 0.5
                            * (log_factorial(n) + log_factorial(ell)
                                - log_factorial(m1)
                                - log_factorial(n1));
                        let d = 1.0 / (1.0 + kc * kc).sqrt();
                        let reduced = d * pre.exp() * g3(n, n1, m1, kc).unwrap();
                        let t = t_conjugator(m1, ell, n1, n, kc).unwrap();
                        assert!((t - reduced).abs() < 1e-13, "{m1} {ell} {n1} {n}: {t} vs {reduced}");
                    }
                }
            }
        }
    }

    #[test]
    fn cancellation_is_flagged() {
        let mut acc = SignedLogSum::new();
        acc.add(false, 0.0);
        acc.add(true, 0.0);
        let e = acc.eval();
        assert_eq!(e.value, 0.0);
        assert!(e.cancellation_dominated());
        assert!(!g1_eval(2, 3, 4, 1.3).unwrap().cancellation_dominated());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn summation_order_does_not_matter(
                terms in proptest::collection::vec((any::<bool>(), -30.0f64..30.0), 1..40),
                seed in any::<u64>(),
            ) {
                let mut fwd = SignedLogSum::new();
                for &(s, l) in &terms {
                    fwd.add(s, l);
                }
                let mut shuffled = terms.clone();
                let n = shuffled.len();
                let mut state = seed | 1;
                for i in (1..n).rev() {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    shuffled.swap(i, (state % (i as u64 + 1)) as usize);
                }
                let mut rev = SignedLogSum::new();
                for &(s, l) in &shuffled {
                    rev.add(s, l);
                }
                let (a, b) = (fwd.eval(), rev.eval());
                let scale = a.max_term.max(f64::MIN_POSITIVE);
                prop_assert!((a.value - b.value).abs() <= 1e-12 * scale);
            }
        }
    }
}
