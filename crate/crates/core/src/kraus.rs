//! Banded Kraus operators for the photon-added attenuator `B_l(kappa; n)`,
//! amplifier `A_l(kappa; n)` and phase conjugator `C_l(kappa; n)`, plus the
//! general construction `F_k = <k|_E U |psi>_E` for an arbitrary environment.
//!
//! Every family operator has a single nonzero line: parallel to the diagonal
//! for the attenuator and amplifier, parallel to the anti-diagonal for the
//! conjugator. Operators are stored as that line only.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coeffs::{self, g1_sum, g2_sum, g3_sum, Bases};
use crate::error::{Error, Result};
use crate::fock::{log_factorial, DiagonalState, PureState, Truncation};

/// Upper bound on automatically chosen output dimensions.
pub const MAX_AUTO_DIM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Attenuator,
    Amplifier,
    Conjugator,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Attenuator, Family::Amplifier, Family::Conjugator];

    pub fn check_kappa(self, kappa: f64) -> Result<()> {
        match self {
            Family::Attenuator => Bases::attenuator(kappa).map(|_| ()),
            Family::Amplifier => Bases::amplifier(kappa).map(|_| ()),
            Family::Conjugator => Bases::conjugator(kappa).map(|_| ()),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Family::Attenuator => "att",
            Family::Amplifier => "amp",
            Family::Conjugator => "conj",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Family::Attenuator => "attenuator",
            Family::Amplifier => "amplifier",
            Family::Conjugator => "conjugator",
        };
        f.write_str(name)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "att" | "attenuator" | "b" => Ok(Family::Attenuator),
            "amp" | "amplifier" | "a" => Ok(Family::Amplifier),
            "conj" | "conjugator" | "pc" | "c" => Ok(Family::Conjugator),
            other => Err(Error::Parse(format!("unknown channel family '{other}'"))),
        }
    }
}

/// Family, parameter and environment level, without a truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub family: Family,
    pub kappa: f64,
    pub n_add: usize,
}

impl ChannelSpec {
    pub fn new(family: Family, kappa: f64, n_add: usize) -> Result<Self> {
        family.check_kappa(kappa)?;
        Ok(Self {
            family,
            kappa,
            n_add,
        })
    }

    pub fn build(&self, trunc: Truncation, tol: f64) -> Result<PhotonAddedChannel> {
        build(self.family, self.kappa, self.n_add, trunc, tol)
    }

    pub fn build_unchecked(&self, trunc: Truncation, tol: f64) -> Result<PhotonAddedChannel> {
        build_unchecked(self.family, self.kappa, self.n_add, trunc, tol)
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(kappa={}, n={})", self.family, self.kappa, self.n_add)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandKind {
    /// Nonzero at `(j + offset, j)`.
    Diagonal,
    /// Nonzero at `(offset - j, j)`.
    AntiDiagonal,
}

/// One line of a matrix: `values[i]` sits in input column `start + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub kind: BandKind,
    pub offset: i64,
    pub start: usize,
    pub values: Vec<C64>,
}

impl Band {
    pub fn row_of(&self, col: usize) -> i64 {
        match self.kind {
            BandKind::Diagonal => col as i64 + self.offset,
            BandKind::AntiDiagonal => self.offset - col as i64,
        }
    }

    /// `(row, col, value)` for every stored element.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.values.iter().enumerate().map(move |(i, v)| {
            let col = self.start + i;
            (self.row_of(col) as usize, col, *v)
        })
    }

    fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == C64::default())
    }
}

/// A Kraus operator stored as one or more bands.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausOperator {
    /// Environment Fock level `l` that labels the operator.
    pub index: usize,
    pub dim_out: usize,
    pub dim_in: usize,
    pub bands: Vec<Band>,
}

impl KrausOperator {
    pub fn single_band(&self) -> Option<&Band> {
        match self.bands.as_slice() {
            [b] => Some(b),
            _ => None,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let mut acc = C64::default();
        for b in &self.bands {
            if col >= b.start && col < b.start + b.values.len() && b.row_of(col) == row as i64 {
                acc += b.values[col - b.start];
            }
        }
        acc
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.bands.iter().flat_map(Band::entries)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim_out, self.dim_in);
        for (r, c, v) in self.entries() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn is_real(&self) -> bool {
        self.entries().all(|(_, _, v)| v.im == 0.0)
    }

    fn is_zero(&self) -> bool {
        self.bands.iter().all(Band::is_zero)
    }

    /// `F^dagger F` as a dense `dim_in x dim_in` matrix.
    pub fn gram(&self) -> DMatrix<C64> {
        let d = self.to_dense();
        d.adjoint() * d
    }
}

/// Any channel given by an explicit Kraus list on a truncation.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    trunc: Truncation,
    operators: Vec<KrausOperator>,
    defect: f64,
}

impl KrausChannel {
    /// Wraps a Kraus list and measures its completeness defect.
    pub fn new(trunc: Truncation, operators: Vec<KrausOperator>) -> Result<Self> {
        for op in &operators {
            if op.dim_in != trunc.dim_in() || op.dim_out != trunc.dim_out() {
                return Err(Error::DimensionMismatch {
                    expected: trunc.dim_out(),
                    got: op.dim_out,
                });
            }
        }
        let defect = completeness_defect_of(trunc.dim_in(), &operators);
        Ok(Self {
            trunc,
            operators,
            defect,
        })
    }

    pub fn trunc(&self) -> Truncation {
        self.trunc
    }

    pub fn dim_in(&self) -> usize {
        self.trunc.dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.trunc.dim_out()
    }

    pub fn operators(&self) -> &[KrausOperator] {
        &self.operators
    }

    /// `max |sum_l F_l^dagger F_l - I|` on the input space.
    pub fn completeness_defect(&self) -> f64 {
        self.defect
    }

    /// Every value multiplied by `factor`; for fault-injection tests.
    pub fn scaled(&self, factor: f64) -> Self {
        let operators: Vec<_> = self
            .operators
            .iter()
            .map(|op| KrausOperator {
                bands: op
                    .bands
                    .iter()
                    .map(|b| Band {
                        values: b.values.iter().map(|v| v * factor).collect(),
                        ..b.clone()
                    })
                    .collect(),
                ..op.clone()
            })
            .collect();
        let defect = completeness_defect_of(self.dim_in(), &operators);
        Self {
            trunc: self.trunc,
            operators,
            defect,
        }
    }
}

fn completeness_defect_of(dim_in: usize, operators: &[KrausOperator]) -> f64 {
    let all_single = operators.iter().all(|op| op.bands.len() <= 1);
    if all_single {
        // single-band operators have diagonal F^dagger F
        let mut diag = vec![0.0f64; dim_in];
        for op in operators {
            for (_, c, v) in op.entries() {
                diag[c] += v.norm_sqr();
            }
        }
        return diag.iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max);
    }
    let mut sum = DMatrix::<C64>::zeros(dim_in, dim_in);
    for op in operators {
        sum += op.gram();
    }
    for i in 0..dim_in {
        sum[(i, i)] -= C64::new(1.0, 0.0);
    }
    sum.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// A photon-added channel: family, parameter, environment Fock level and its
/// Kraus list.
#[derive(Debug, Clone)]
pub struct PhotonAddedChannel {
    family: Family,
    kappa: f64,
    n_add: usize,
    channel: KrausChannel,
    /// Largest Kraus index `l` that was generated.
    kraus_cutoff: usize,
}

impl PhotonAddedChannel {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n_add(&self) -> usize {
        self.n_add
    }

    pub fn kraus_cutoff(&self) -> usize {
        self.kraus_cutoff
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    pub fn trunc(&self) -> Truncation {
        self.channel.trunc()
    }

    pub fn operators(&self) -> &[KrausOperator] {
        self.channel.operators()
    }

    pub fn completeness_defect(&self) -> f64 {
        self.channel.completeness_defect()
    }

    /// Operator with Kraus index `l`, if it is nonzero on the truncation.
    pub fn operator(&self, l: usize) -> Option<&KrausOperator> {
        self.operators().iter().find(|op| op.index == l)
    }

    /// Copy with every Kraus value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            channel: self.channel.scaled(factor),
            ..self.clone()
        }
    }

    pub fn to_export(&self) -> KrausExport {
        KrausExport {
            family: self.family,
            kappa: self.kappa,
            n_add: self.n_add,
            dim_in: self.channel.dim_in(),
            dim_out: self.channel.dim_out(),
            kraus_cutoff: self.kraus_cutoff,
            completeness_defect: Some(self.completeness_defect()),
            operators: self
                .operators()
                .iter()
                .filter_map(|op| {
                    let b = op.single_band()?;
                    Some(BandExport {
                        index: op.index,
                        kind: b.kind,
                        offset: b.offset,
                        start: b.start,
                        values: b.values.iter().map(|v| v.re).collect(),
                    })
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_export()).expect("Kraus export serializes")
    }
}

impl AsRef<KrausChannel> for PhotonAddedChannel {
    fn as_ref(&self) -> &KrausChannel {
        &self.channel
    }
}

impl AsRef<KrausChannel> for KrausChannel {
    fn as_ref(&self) -> &KrausChannel {
        self
    }
}

/// Serialized Kraus set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrausExport {
    pub family: Family,
    pub kappa: f64,
    pub n_add: usize,
    pub dim_in: usize,
    pub dim_out: usize,
    pub kraus_cutoff: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completeness_defect: Option<f64>,
    pub operators: Vec<BandExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandExport {
    pub index: usize,
    pub kind: BandKind,
    pub offset: i64,
    pub start: usize,
    pub values: Vec<f64>,
}

impl KrausExport {
    pub fn into_channel(self) -> Result<PhotonAddedChannel> {
        self.family.check_kappa(self.kappa)?;
        let trunc = Truncation::new(self.dim_in, self.dim_out)?;
        let operators = self
            .operators
            .into_iter()
            .map(|b| {
                let band = Band {
                    kind: b.kind,
                    offset: b.offset,
                    start: b.start,
                    values: b.values.into_iter().map(|v| C64::new(v, 0.0)).collect(),
                };
                check_band_fits(&band, self.dim_in, self.dim_out)?;
                Ok(KrausOperator {
                    index: b.index,
                    dim_out: self.dim_out,
                    dim_in: self.dim_in,
                    bands: vec![band],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PhotonAddedChannel {
            family: self.family,
            kappa: self.kappa,
            n_add: self.n_add,
            channel: KrausChannel::new(trunc, operators)?,
            kraus_cutoff: self.kraus_cutoff,
        })
    }
}

fn check_band_fits(b: &Band, dim_in: usize, dim_out: usize) -> Result<()> {
    for i in 0..b.values.len() {
        let col = b.start + i;
        let row = b.row_of(col);
        if col >= dim_in {
            return Err(Error::OutOfRange { index: col, dim: dim_in });
        }
        if row < 0 || row as usize >= dim_out {
            return Err(Error::OutOfRange {
                index: row.max(0) as usize,
                dim: dim_out,
            });
        }
    }
    Ok(())
}

/// Collects `f(col)` over the input columns whose image row lies inside the
/// truncation. `cols` is the formula's own column range.
fn band_from(
    kind: BandKind,
    offset: i64,
    cols: std::ops::Range<usize>,
    trunc: Truncation,
    mut f: impl FnMut(usize) -> f64,
) -> Band {
    let row = |c: usize| match kind {
        BandKind::Diagonal => c as i64 + offset,
        BandKind::AntiDiagonal => offset - c as i64,
    };
    let in_range = |c: usize| {
        let r = row(c);
        r >= 0 && (r as usize) < trunc.dim_out()
    };
    let hi = cols.end.min(trunc.dim_in());
    let valid: Vec<usize> = (cols.start..hi).filter(|&c| in_range(c)).collect();
    match (valid.first(), valid.last()) {
        (Some(&lo), Some(&last)) => Band {
            kind,
            offset,
            start: lo,
            values: (lo..=last).map(|c| C64::new(f(c), 0.0)).collect(),
        },
        _ => Band {
            kind,
            offset,
            start: 0,
            values: Vec::new(),
        },
    }
}

/// Attenuator operator `B_l(kappa; n)`: `|n1> -> |n1 + n - l>`.
fn attenuator_op(k: f64, s: f64, n: usize, l: usize, trunc: Truncation) -> KrausOperator {
    let lf = log_factorial(l) - log_factorial(n);
    let band = band_from(
        BandKind::Diagonal,
        n as i64 - l as i64,
        l.saturating_sub(n)..usize::MAX,
        trunc,
        |n1| {
            let pre = 0.5 * (log_factorial(n1 + n - l) + lf - log_factorial(n1));
            g2_sum(n, l, n1, k, s).value() * pre.exp()
        },
    );
    KrausOperator {
        index: l,
        dim_out: trunc.dim_out(),
        dim_in: trunc.dim_in(),
        bands: vec![band],
    }
}

/// Amplifier operator `A_l(kappa; n)`: `|n1> -> |n1 + l - n>`.
fn amplifier_op(inv: f64, s: f64, n: usize, l: usize, trunc: Truncation) -> KrausOperator {
    let lf = log_factorial(l) - log_factorial(n);
    let band = band_from(
        BandKind::Diagonal,
        l as i64 - n as i64,
        n.saturating_sub(l)..usize::MAX,
        trunc,
        |n1| {
            let m1 = n1 + l - n;
            let pre = 0.5 * (log_factorial(n1) + lf - log_factorial(m1));
            inv * g1_sum(n, n1, m1, inv, s).value() * pre.exp()
        },
    );
    KrausOperator {
        index: l,
        dim_out: trunc.dim_out(),
        dim_in: trunc.dim_in(),
        bands: vec![band],
    }
}

/// Conjugator operator `C_l(kappa; n)`: `|n1> -> |l + n - n1>`, `n1 <= l + n`.
fn conjugator_op(sech: f64, tanh: f64, n: usize, l: usize, trunc: Truncation) -> KrausOperator {
    let lf = log_factorial(n) + log_factorial(l);
    let band = band_from(
        BandKind::AntiDiagonal,
        (l + n) as i64,
        0..l + n + 1,
        trunc,
        |n1| {
            let m1 = l + n - n1;
            let pre = 0.5 * (lf - log_factorial(m1) - log_factorial(n1));
            sech * g3_sum(n, n1, m1, sech, tanh).value() * pre.exp()
        },
    );
    KrausOperator {
        index: l,
        dim_out: trunc.dim_out(),
        dim_in: trunc.dim_in(),
        bands: vec![band],
    }
}

/// Tracks `sum_l F_l^dagger F_l` for single-band operators (diagonal).
struct ColumnNorms(Vec<f64>);

impl ColumnNorms {
    fn add(&mut self, op: &KrausOperator) {
        for (_, c, v) in op.entries() {
            self.0[c] += v.norm_sqr();
        }
    }

    fn defect(&self) -> f64 {
        self.0.iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Largest Kraus index that can still place an element inside the truncation.
fn last_useful_index(family: Family, n: usize, trunc: Truncation) -> usize {
    match family {
        // l <= n1 + n for some n1 < dim_in
        Family::Attenuator => trunc.dim_in() - 1 + n,
        // output n1 + l - n < dim_out with n1 >= 0
        Family::Amplifier => trunc.dim_out() - 1 + n,
        // output l + n - n1 < dim_out with n1 < dim_in
        Family::Conjugator => (trunc.dim_out() + trunc.dim_in()).saturating_sub(n + 2),
    }
}

fn build_family(
    family: Family,
    kappa: f64,
    n_add: usize,
    trunc: Truncation,
    tol: f64,
) -> Result<PhotonAddedChannel> {
    let ch = build_unchecked(family, kappa, n_add, trunc, tol)?;
    if ch.completeness_defect() > tol {
        return Err(Error::Tolerance {
            tol,
            achieved: ch.completeness_defect(),
            context: format!(
                "{family}(kappa={kappa}, n={n_add}) on dim_in={} dim_out={} with l <= {}",
                trunc.dim_in(),
                trunc.dim_out(),
                ch.kraus_cutoff
            ),
        });
    }
    Ok(ch)
}

/// Like [`build`], but returns the channel even when `tol` is out of reach
/// on `trunc`; the caller inspects `completeness_defect`.
pub fn build_unchecked(
    family: Family,
    kappa: f64,
    n_add: usize,
    trunc: Truncation,
    tol: f64,
) -> Result<PhotonAddedChannel> {
    let bases = match family {
        Family::Attenuator => Bases::attenuator(kappa)?,
        Family::Amplifier => Bases::amplifier(kappa)?,
        Family::Conjugator => Bases::conjugator(kappa)?,
    };
    let make = |l: usize| match bases {
        Bases::Attenuator { k, s } => attenuator_op(k, s, n_add, l, trunc),
        Bases::Amplifier { inv, s } => amplifier_op(inv, s, n_add, l, trunc),
        Bases::Conjugator { sech, tanh } => conjugator_op(sech, tanh, n_add, l, trunc),
    };
    let last = last_useful_index(family, n_add, trunc);
    let mut norms = ColumnNorms(vec![0.0; trunc.dim_in()]);
    let mut operators = Vec::new();
    let mut cutoff = 0;
    for l in 0..=last {
        let op = make(l);
        norms.add(&op);
        if !op.is_zero() {
            operators.push(op);
        }
        cutoff = l;
        // the attenuator family is finite; the others stop once complete
        if family != Family::Attenuator && norms.defect() <= tol {
            break;
        }
    }
    let channel = KrausChannel::new(trunc, operators)?;
    Ok(PhotonAddedChannel {
        family,
        kappa,
        n_add,
        channel,
        kraus_cutoff: cutoff,
    })
}

/// `B_l(kappa; n)` for `l = 0 ..= dim_in - 1 + n`; exact on the input space
/// when `dim_out >= dim_in + n`.
pub fn build_attenuator(
    kappa: f64,
    n_add: usize,
    trunc: Truncation,
    tol: f64,
) -> Result<PhotonAddedChannel> {
    build_family(Family::Attenuator, kappa, n_add, trunc, tol)
}

/// `A_l(kappa; n)` with `l` grown until the completeness defect is at most
/// `tol`.
pub fn build_amplifier(
    kappa: f64,
    n_add: usize,
    trunc: Truncation,
    tol: f64,
) -> Result<PhotonAddedChannel> {
    build_family(Family::Amplifier, kappa, n_add, trunc, tol)
}

/// `C_l(kappa; n)` with `l` grown until the completeness defect is at most
/// `tol`.
pub fn build_conjugator(
    kappa: f64,
    n_add: usize,
    trunc: Truncation,
    tol: f64,
) -> Result<PhotonAddedChannel> {
    build_family(Family::Conjugator, kappa, n_add, trunc, tol)
}

pub fn build(
    family: Family,
    kappa: f64,
    n_add: usize,
    trunc: Truncation,
    tol: f64,
) -> Result<PhotonAddedChannel> {
    build_family(family, kappa, n_add, trunc, tol)
}

/// Builds with the smallest output dimension (from a growing schedule) that
/// reaches `tol`. The attenuator always uses `dim_in + n_add`.
pub fn build_auto(
    family: Family,
    kappa: f64,
    n_add: usize,
    dim_in: usize,
    tol: f64,
) -> Result<PhotonAddedChannel> {
    family.check_kappa(kappa)?;
    let mut dim_out = dim_in + n_add;
    if family == Family::Attenuator {
        return build_family(family, kappa, n_add, Truncation::new(dim_in, dim_out)?, tol);
    }
    dim_out += 8;
    loop {
        match build_family(family, kappa, n_add, Truncation::new(dim_in, dim_out)?, tol) {
            Err(Error::Tolerance { .. }) if dim_out < MAX_AUTO_DIM => {
                dim_out = (dim_out + dim_out / 2 + 8).min(MAX_AUTO_DIM);
            }
            other => return other,
        }
    }
}

/// Closed-form two-mode unitary matrix elements for one family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DilationElements {
    Attenuator(f64),
    Amplifier(f64),
    Conjugator(f64),
}

impl DilationElements {
    pub fn family(&self) -> Family {
        match self {
            Self::Attenuator(_) => Family::Attenuator,
            Self::Amplifier(_) => Family::Amplifier,
            Self::Conjugator(_) => Family::Conjugator,
        }
    }

    pub fn kappa(&self) -> f64 {
        match *self {
            Self::Attenuator(k) | Self::Amplifier(k) | Self::Conjugator(k) => k,
        }
    }

    pub fn of(family: Family, kappa: f64) -> Self {
        match family {
            Family::Attenuator => Self::Attenuator(kappa),
            Family::Amplifier => Self::Amplifier(kappa),
            Family::Conjugator => Self::Conjugator(kappa),
        }
    }

    /// `T^{m1, m2}_{n1, n2}`.
    pub fn element(&self, m1: usize, m2: usize, n1: usize, n2: usize) -> Result<f64> {
        match *self {
            Self::Attenuator(k) => coeffs::t_attenuator(m1, m2, n1, n2, k),
            Self::Amplifier(k) => coeffs::t_amplifier(m1, m2, n1, n2, k),
            Self::Conjugator(k) => coeffs::t_conjugator(m1, m2, n1, n2, k),
        }
    }

    /// The band of `<k|_E U |n2>_E` on the system mode.
    fn band(&self, k: usize, n2: usize, trunc: Truncation) -> Result<Band> {
        // conservation: attenuator m1 = n1 + n2 - k; amplifier m1 = n1 + k - n2;
        // conjugator m1 = k + n2 - n1
        let (kind, offset, cols) = match self {
            Self::Attenuator(_) => (BandKind::Diagonal, n2 as i64 - k as i64, 0..usize::MAX),
            Self::Amplifier(_) => (BandKind::Diagonal, k as i64 - n2 as i64, 0..usize::MAX),
            Self::Conjugator(_) => (BandKind::AntiDiagonal, (k + n2) as i64, 0..k + n2 + 1),
        };
        let mut err = None;
        let band = band_from(kind, offset, cols, trunc, |n1| {
            let m1 = match kind {
                BandKind::Diagonal => (n1 as i64 + offset) as usize,
                BandKind::AntiDiagonal => (offset - n1 as i64) as usize,
            };
            self.element(m1, k, n1, n2).unwrap_or_else(|e| {
                err = Some(e);
                0.0
            })
        });
        match err {
            Some(e) => Err(e),
            None => Ok(band),
        }
    }
}

/// `F_k = sum T^{m1, k}_{n1, n2} <n2|psi> |m1><n1|` for a pure environment.
///
/// The Kraus index `k` grows until the completeness defect drops to `tol`, or
/// until no further operator can reach the truncation.
pub fn kraus_from_environment(
    elements: DilationElements,
    env: &PureState,
    trunc: Truncation,
    tol: f64,
) -> Result<KrausChannel> {
    elements.family().check_kappa(elements.kappa())?;
    let support: Vec<(usize, C64)> = env
        .amps()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > 0.0)
        .map(|(i, a)| (i, *a))
        .collect();
    let max_env = support.last().map(|s| s.0).unwrap_or(0);
    let last = last_useful_index(elements.family(), max_env, trunc);
    let dim_in = trunc.dim_in();
    let mut gram = DMatrix::<C64>::zeros(dim_in, dim_in);
    let mut operators = Vec::new();
    for k in 0..=last {
        let mut bands = Vec::with_capacity(support.len());
        for &(n2, amp) in &support {
            let mut band = elements.band(k, n2, trunc)?;
            if band.values.is_empty() {
                continue;
            }
            for v in band.values.iter_mut() {
                *v *= amp;
            }
            bands.push(band);
        }
        let op = KrausOperator {
            index: k,
            dim_out: trunc.dim_out(),
            dim_in,
            bands,
        };
        if op.is_zero() {
            continue;
        }
        gram += op.gram();
        operators.push(op);
        if elements.family() != Family::Attenuator && identity_defect(&gram) <= tol {
            break;
        }
    }
    let channel = KrausChannel::new(trunc, operators)?;
    if channel.completeness_defect() > tol {
        return Err(Error::Tolerance {
            tol,
            achieved: channel.completeness_defect(),
            context: format!("{} environment Kraus set", elements.family()),
        });
    }
    Ok(channel)
}

/// Kraus set for a Fock-diagonal (mixed) environment such as a thermal or
/// photon-added thermal state: the union over `n` of `sqrt(p_n)` times the
/// photon-added family at level `n`.
pub fn kraus_from_mixed_environment(
    family: Family,
    kappa: f64,
    env: &DiagonalState,
    trunc: Truncation,
    tol: f64,
) -> Result<KrausChannel> {
    let mut operators = Vec::new();
    for (n, p) in env.probs().iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        // each component only has to be accurate to its share of the budget
        let component = build_family(family, kappa, n, trunc, tol)?;
        let w = p.sqrt();
        for op in component.operators() {
            operators.push(KrausOperator {
                bands: op
                    .bands
                    .iter()
                    .map(|b| Band {
                        values: b.values.iter().map(|v| v * w).collect(),
                        ..b.clone()
                    })
                    .collect(),
                ..op.clone()
            });
        }
    }
    KrausChannel::new(trunc, operators)
}

fn identity_defect(gram: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Completeness defect of a built channel.
pub fn completeness_defect(channel: &impl AsRef<KrausChannel>) -> f64 {
    channel.as_ref().completeness_defect()
}
