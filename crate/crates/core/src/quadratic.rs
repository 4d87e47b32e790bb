//! Quadratic operators `W_{l l'} = F_l^dagger F_l'` and the numeric
//! linear-independence test on them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coeffs::{g1_sum, g2_sum, g3_sum, Bases};
use crate::error::{Error, Result};
use crate::fock::log_factorial;
use crate::kraus::{Family, KrausOperator, PhotonAddedChannel};

/// Relative singular-value cutoff for the numeric rank.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// A `dim_in x dim_in` operator nonzero only at `(i, i - offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticOperator {
    pub l: usize,
    pub l_prime: usize,
    pub dim: usize,
    /// Column minus row of the nonzero line.
    pub shift: i64,
    /// `(row, value)` pairs along the line.
    pub entries: Vec<(usize, f64)>,
}

impl QuadraticOperator {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col as i64 - row as i64 != self.shift {
            return 0.0;
        }
        self.entries
            .iter()
            .find(|(r, _)| *r == row)
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, v) in &self.entries {
            m[(*r, (*r as i64 + self.shift) as usize)] = *v;
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.to_dense() - other.to_dense()).amax()
    }
}

/// Column shift of `W_{l l'}`: `l' - l` for the attenuator and conjugator,
/// `l - l'` for the amplifier.
pub fn shift(family: Family, l: usize, l_prime: usize) -> i64 {
    let d = l_prime as i64 - l as i64;
    match family {
        Family::Amplifier => -d,
        Family::Attenuator | Family::Conjugator => d,
    }
}

fn kraus_at(channel: &PhotonAddedChannel, l: usize) -> Result<Option<&KrausOperator>> {
    if l > channel.kraus_cutoff() {
        return Err(Error::OutOfRange {
            index: l,
            dim: channel.kraus_cutoff() + 1,
        });
    }
    Ok(channel.operator(l))
}

/// `F_l^dagger F_l'` from the stored Kraus operators.
pub fn w_operator(channel: &PhotonAddedChannel, l: usize, l_prime: usize) -> Result<QuadraticOperator> {
    let dim = channel.trunc().dim_in();
    let s = shift(channel.family(), l, l_prime);
    let mut entries = Vec::new();
    if let (Some(f), Some(g)) = (kraus_at(channel, l)?, kraus_at(channel, l_prime)?) {
        let (fd, gd) = (f.to_dense(), g.to_dense());
        let prod = fd.adjoint() * gd;
        for i in 0..dim {
            for k in 0..dim {
                let v = prod[(i, k)];
                if v.norm() == 0.0 {
                    continue;
                }
                if k as i64 - i as i64 != s {
                    return Err(Error::InvalidState(format!(
                        "W[{l},{l_prime}] has an element off its band at ({i}, {k})"
                    )));
                }
                entries.push((i, v.re));
            }
        }
    } else {
        kraus_at(channel, l)?;
        kraus_at(channel, l_prime)?;
    }
    Ok(QuadraticOperator {
        l,
        l_prime,
        dim,
        shift: s,
        entries,
    })
}

/// `W_{l l'}` from the closed forms, on `dim` input levels. These do not
/// see the output truncation, so they match [`w_operator`] whenever every
/// intermediate output level fits in the channel's `dim_out`.
pub fn w_closed_form(
    family: Family,
    kappa: f64,
    n: usize,
    l: usize,
    l_prime: usize,
    dim: usize,
) -> Result<QuadraticOperator> {
    let lf = log_factorial;
    let s = shift(family, l, l_prime);
    let mut entries = Vec::new();
    match family {
        Family::Attenuator => {
            let Bases::Attenuator { k, s: sn } = Bases::attenuator(kappa)? else {
                unreachable!()
            };
            // |n1><n1 + l' - l|, n1 >= max(0, l - n, l - l')
            let lo = l.saturating_sub(n).max(l.saturating_sub(l_prime));
            for n1 in lo..dim {
                let c = (n1 + l_prime) - l;
                if c >= dim {
                    break;
                }
                let log_pre = 0.5
                    * (2.0 * lf(n1 + n - l) + lf(l) + lf(l_prime)
                        - lf(n1)
                        - 2.0 * lf(n)
                        - lf(c));
                let v = log_pre.exp() * g2_sum(n, l, n1, k, sn).value() * g2_sum(n, l_prime, c, k, sn).value();
                entries.push((n1, v));
            }
        }
        Family::Amplifier => {
            let Bases::Amplifier { inv, s: sn } = Bases::amplifier(kappa)? else {
                unreachable!()
            };
            // |n1><n1 + l - l'|, n1 >= max(0, n - l, l' - l)
            let lo = n.saturating_sub(l).max(l_prime.saturating_sub(l));
            for n1 in lo..dim {
                let c = (n1 + l) - l_prime;
                if c >= dim {
                    break;
                }
                let m = l + n1 - n;
                let log_pre = 0.5
                    * (lf(n1) + lf(l) + lf(l_prime) + lf(c) - 2.0 * lf(m) - 2.0 * lf(n));
                let v = inv * inv
                    * log_pre.exp()
                    * g1_sum(n, n1, m, inv, sn).value()
                    * g1_sum(n, c, m, inv, sn).value();
                entries.push((n1, v));
            }
        }
        Family::Conjugator => {
            let Bases::Conjugator { sech, tanh } = Bases::conjugator(kappa)? else {
                unreachable!()
            };
            // |n1><n1 + l' - l|, n1 from max(0, l - l') to n + l
            let lo = l.saturating_sub(l_prime);
            for n1 in lo..=(n + l).min(dim.saturating_sub(1)) {
                let c = (n1 + l_prime) - l;
                if c >= dim {
                    break;
                }
                let m = l + n - n1;
                let log_pre = 0.5
                    * (2.0 * lf(n) + lf(l) + lf(l_prime) - 2.0 * lf(m) - lf(n1) - lf(c));
                let v = sech * sech
                    * log_pre.exp()
                    * g3_sum(n, n1, m, sech, tanh).value()
                    * g3_sum(n, c, m, sech, tanh).value();
                entries.push((n1, v));
            }
        }
    }
    entries.retain(|(_, v)| *v != 0.0);
    Ok(QuadraticOperator {
        l,
        l_prime,
        dim,
        shift: s,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    /// Number of operators in the set.
    pub count: usize,
    pub rank: usize,
    pub threshold: f64,
    /// Singular values in decreasing order.
    pub singular_values: Vec<f64>,
    /// Matrix dimension the operators were restricted to.
    pub dim: usize,
}

impl RankReport {
    pub fn full_rank(&self) -> bool {
        self.rank == self.count
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rank report serializes")
    }
}

/// Numeric rank of a set of equally sized matrices, each flattened to a
/// vector.
pub fn rank_of(ops: &[DMatrix<f64>]) -> Result<RankReport> {
    let Some(first) = ops.first() else {
        return Err(Error::InvalidState("empty operator set".into()));
    };
    let len = first.len();
    if ops.iter().any(|o| o.shape() != first.shape()) {
        return Err(Error::InvalidState("operators differ in shape".into()));
    }
    let m = DMatrix::from_fn(ops.len(), len, |r, c| ops[r].as_slice()[c]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let cutoff = RANK_THRESHOLD * sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|s| **s > cutoff && **s > 0.0).count();
    Ok(RankReport {
        count: ops.len(),
        rank,
        threshold: cutoff,
        singular_values: sv,
        dim: first.nrows(),
    })
}

/// Rank of `{W_{l l'} : l, l' <= max_l}` over the nonzero Kraus operators
/// with index at most `max_l`.
pub fn independence_rank(channel: &PhotonAddedChannel, max_l: usize) -> Result<RankReport> {
    let idx: Vec<usize> = channel
        .operators()
        .iter()
        .map(|op| op.index)
        .filter(|l| *l <= max_l)
        .collect();
    let mut ops = Vec::with_capacity(idx.len() * idx.len());
    for &l in &idx {
        for &lp in &idx {
            ops.push(w_operator(channel, l, lp)?.to_dense());
        }
    }
    rank_of(&ops)
}
