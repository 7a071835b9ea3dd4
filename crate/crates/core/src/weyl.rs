//! Truncated Weyl sums `S_m(x; N) = sum_{n<=N} e(x_1 n^{m_1} + ... + x_d n^{m_d})`,
//! streamed traces, the Menshov-Rademacher series and growth scans.

use std::f64::consts::TAU;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use crate::arith::{mul_mod, pow_mod};
use crate::error::{Error, Result};
use crate::phase::{e_eval, phase_of_residue, poly_phase, sparse_poly_phase, ComplexAcc, Phase};

/// Strictly increasing positive exponents `m_1 < ... < m_d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExponentVector(Vec<u32>);

impl ExponentVector {
    pub fn new(m: Vec<u32>) -> Result<Self> {
        if m.is_empty() || m[0] == 0 || m.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::precondition(format!(
                "exponents {m:?} must be positive and strictly increasing"
            )));
        }
        Ok(Self(m))
    }

    /// `(1, 2, ..., d)`.
    pub fn standard(d: usize) -> Self {
        Self((1..=d as u32).collect())
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_standard(&self) -> bool {
        self.0.iter().enumerate().all(|(j, &m)| m == j as u32 + 1)
    }
}

/// A point of the torus `T_d`.
///
/// Stored as an optional exact rational part `(b_1, ..., b_d) / q`, whose
/// phases are computed from residues mod `q`, plus a fixed-point offset.
/// Purely real points have no rational part.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorusPoint {
    base: Option<(Vec<u64>, u64)>,
    offset: Vec<Phase>,
}

/// Nearest phase to `r mod 1`.
pub fn phase_from_big_rational(r: &BigRational) -> Phase {
    let den = r.denom().clone();
    let num = r.numer().mod_floor(&den);
    let scaled: BigInt = ((num << 64u32) + (&den >> 1u32)) / &den;
    let v = scaled.to_u128().unwrap_or(0);
    Phase(v as u64) // 2^64 wraps to 0
}

impl TorusPoint {
    pub fn from_phases(x: Vec<Phase>) -> Self {
        Self {
            base: None,
            offset: x,
        }
    }

    pub fn from_f64(x: &[f64]) -> Self {
        Self::from_phases(x.iter().map(|&t| Phase::from_f64(t)).collect())
    }

    pub fn zero(d: usize) -> Self {
        Self::from_phases(vec![Phase::ZERO; d])
    }

    /// `(a_1, ..., a_d) / q`, evaluated exactly.
    pub fn rational(nums: &[i64], q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidDenominator);
        }
        Ok(Self {
            base: Some((
                nums.iter()
                    .map(|&a| a.rem_euclid(q as i64) as u64)
                    .collect(),
                q,
            )),
            offset: vec![Phase::ZERO; nums.len()],
        })
    }

    /// Adds exact rational displacements, rounded once to phases.
    pub fn displaced(mut self, delta: &[BigRational]) -> Result<Self> {
        if delta.len() != self.dim() {
            return Err(Error::precondition("displacement has the wrong dimension"));
        }
        for (o, r) in self.offset.iter_mut().zip(delta) {
            *o += phase_from_big_rational(r);
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    /// Coordinates as phases (rational part rounded).
    pub fn coordinates(&self) -> Vec<Phase> {
        match &self.base {
            None => self.offset.clone(),
            Some((nums, q)) => nums
                .iter()
                .zip(&self.offset)
                .map(|(&a, &o)| phase_of_residue(a, *q) + o)
                .collect(),
        }
    }

    pub fn rational_part(&self) -> Option<(&[u64], u64)> {
        self.base.as_ref().map(|(n, q)| (n.as_slice(), *q))
    }

    pub fn offsets(&self) -> &[Phase] {
        &self.offset
    }

    fn has_offset(&self) -> bool {
        self.offset.iter().any(|o| o.0 != 0)
    }
}

/// Phase evaluator for a fixed `(x, m)`.
struct Evaluator<'a> {
    x: &'a TorusPoint,
    m: &'a [u32],
    standard: bool,
    offset: bool,
}

impl<'a> Evaluator<'a> {
    fn new(x: &'a TorusPoint, m: &'a ExponentVector) -> Result<Self> {
        if x.dim() != m.len() {
            return Err(Error::precondition(format!(
                "point has dimension {} but there are {} exponents",
                x.dim(),
                m.len()
            )));
        }
        Ok(Self {
            x,
            m: m.as_slice(),
            standard: m.is_standard(),
            offset: x.has_offset() || x.base.is_none(),
        })
    }

    #[inline]
    fn phase(&self, n: u64) -> Phase {
        let mut t = Phase::ZERO;
        if let Some((nums, q)) = &self.x.base {
            let q = *q;
            let nq = n % q;
            let r = if self.standard {
                let mut acc = 0u64;
                for &a in nums.iter().rev() {
                    acc = mul_mod((acc + a) % q, nq, q);
                }
                acc
            } else {
                nums.iter().zip(self.m).fold(0u64, |acc, (&a, &e)| {
                    (acc + mul_mod(a, pow_mod(nq, e as u64, q), q)) % q
                })
            };
            t = phase_of_residue(r, q);
        }
        if self.offset {
            t += if self.standard {
                poly_phase(&self.x.offset, n)
            } else {
                sparse_poly_phase(&self.x.offset, self.m, n)
            };
        }
        t
    }
}

fn check_trivial_bound(s: Complex64, n: u64) {
    assert!(
        s.norm() <= n as f64 * (1.0 + 1e-12),
        "trivial bound violated: |S| = {} > N = {n}",
        s.norm()
    );
}

/// `S_m(x; N)`.
pub fn weyl_sum_m(x: &TorusPoint, m: &ExponentVector, n: u64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::precondition("N must be >= 1"));
    }
    let ev = Evaluator::new(x, m)?;
    let mut acc = ComplexAcc::new();
    for k in 1..=n {
        acc.add(e_eval(ev.phase(k)));
    }
    let s = acc.value();
    check_trivial_bound(s, n);
    Ok(s)
}

/// The phases `x_1 n^{m_1} + ... + x_d n^{m_d} mod 1` for `n = 1..=N`.
pub fn phase_sequence(x: &TorusPoint, m: &ExponentVector, n: u64) -> Result<Vec<Phase>> {
    let ev = Evaluator::new(x, m)?;
    Ok((1..=n).map(|k| ev.phase(k)).collect())
}

/// `S_d(x; N)` with `m = (1, ..., d)`.
pub fn weyl_sum(x: &TorusPoint, n: u64) -> Result<Complex64> {
    weyl_sum_m(x, &ExponentVector::standard(x.dim()), n)
}

/// `sigma_d(x; N) = sum_{n<=N} e(x n^d)` for a one-dimensional point.
pub fn monomial_sum(x: &TorusPoint, n: u64, d: u32) -> Result<Complex64> {
    if d < 2 {
        return Err(Error::precondition("monomial sums need d >= 2"));
    }
    weyl_sum_m(x, &ExponentVector::new(vec![d])?, n)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub n: u64,
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SumTrace {
    pub entries: Vec<TraceEntry>,
}

impl SumTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One pass up to the last checkpoint, recording the running sum at each.
pub fn weyl_sum_trace(x: &TorusPoint, m: &ExponentVector, checkpoints: &[u64]) -> Result<SumTrace> {
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::precondition(
            "checkpoints must be positive and strictly increasing",
        ));
    }
    let ev = Evaluator::new(x, m)?;
    let mut acc = ComplexAcc::new();
    let mut entries = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    let last = *checkpoints.last().unwrap();
    for k in 1..=last {
        acc.add(e_eval(ev.phase(k)));
        if next.peek() == Some(&&k) {
            next.next();
            let s = acc.value();
            check_trivial_bound(s, k);
            entries.push(TraceEntry {
                n: k,
                re: s.re,
                im: s.im,
                magnitude: s.norm(),
            });
        }
    }
    Ok(SumTrace { entries })
}

/// Every integer up to 1000, then powers of two, capped at `n_max`.
pub fn checkpoint_grid(n_max: u64) -> Vec<u64> {
    let mut grid: Vec<u64> = (1..=n_max.min(1000)).collect();
    let mut n = 1024u64;
    while n <= n_max {
        grid.push(n);
        n = match n.checked_mul(2) {
            Some(v) => v,
            None => break,
        };
    }
    grid
}

/// Powers of two `2, 4, ..., <= n_max`.
pub fn dyadic_grid(n_max: u64) -> Vec<u64> {
    std::iter::successors(Some(2u64), |&n| n.checked_mul(2))
        .take_while(|&n| n <= n_max)
        .collect()
}

fn log_plus(k: u64) -> f64 {
    (k as f64).ln().max(1.0)
}

/// `|s_d(x; k)|` for `k = 1..=K`, where
/// `s_d(x; k) = sum_{n<=k} n^{-1/2} (log+ n)^{-gamma} e(x_1 n + ... + x_d n^d)`.
pub fn mr_partial_series(x: &TorusPoint, k_max: u64, gamma: f64) -> Result<Vec<f64>> {
    if gamma.is_nan() || gamma <= 1.5 {
        return Err(Error::precondition(format!(
            "gamma = {gamma} must exceed 3/2"
        )));
    }
    if k_max == 0 {
        return Err(Error::precondition("K must be >= 1"));
    }
    let m = ExponentVector::standard(x.dim());
    let ev = Evaluator::new(x, &m)?;
    let mut acc = ComplexAcc::new();
    let mut out = Vec::with_capacity(k_max as usize);
    for n in 1..=k_max {
        let w = (n as f64).powf(-0.5) * log_plus(n).powf(-gamma);
        acc.add(e_eval(ev.phase(n)) * w);
        out.push(acc.value().norm());
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct MrRatioReport {
    pub n_max: u64,
    pub max_ratio: f64,
    pub argmax_n: u64,
    pub ratios: Vec<(u64, f64)>,
}

/// `max` over dyadic `N <= N_max` of `|S_d(x; N)| / (N^{1/2} (log N)^{3/2})`.
pub fn mr_ratio_scan(x: &TorusPoint, n_max: u64) -> Result<MrRatioReport> {
    if n_max < 16 {
        return Err(Error::precondition("N_max must be >= 16"));
    }
    let grid = dyadic_grid(n_max);
    let trace = weyl_sum_trace(x, &ExponentVector::standard(x.dim()), &grid)?;
    let ratios: Vec<(u64, f64)> = trace
        .entries
        .iter()
        .map(|e| {
            let n = e.n as f64;
            (e.n, e.magnitude / (n.sqrt() * n.ln().powf(1.5)))
        })
        .collect();
    let (argmax_n, max_ratio) =
        ratios.iter().copied().fold(
            (0, f64::NEG_INFINITY),
            |best, r| if r.1 > best.1 { r } else { best },
        );
    Ok(MrRatioReport {
        n_max,
        max_ratio,
        argmax_n,
        ratios,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SigmaEstimate {
    pub value: f64,
    pub degenerate: bool,
}

/// Finite-scale surrogate for `limsup log|S| / log N`: the max of
/// `log|S| / log N` over the upper half of the trace.
pub fn sigma_estimate(trace: &SumTrace) -> Result<SigmaEstimate> {
    if trace.len() < 8 {
        return Err(Error::precondition(
            "sigma estimate needs at least 8 trace entries",
        ));
    }
    let tail = &trace.entries[trace.len() / 2..];
    let best = tail
        .iter()
        .filter(|e| e.n > 1 && e.magnitude > 0.0)
        .map(|e| e.magnitude.ln() / (e.n as f64).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Ok(SigmaEstimate {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(SigmaEstimate {
        value: best,
        degenerate: false,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::precondition(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )));
    }
    Ok(())
}

/// Checkpoints `N <= N_max` with `|S_m(x; N)| >= N^alpha`.
pub fn exceptional_scan(
    x: &TorusPoint,
    alpha: f64,
    m: &ExponentVector,
    n_max: u64,
) -> Result<Vec<u64>> {
    check_alpha(alpha)?;
    if n_max == 0 {
        return Err(Error::precondition("N_max must be >= 1"));
    }
    let trace = weyl_sum_trace(x, m, &checkpoint_grid(n_max))?;
    Ok(trace
        .entries
        .iter()
        .filter(|e| e.magnitude >= (e.n as f64).powf(alpha))
        .map(|e| e.n)
        .collect())
}

/// Many independent sums, evaluated in parallel and returned in input order.
pub fn weyl_sums_par(points: &[TorusPoint], m: &ExponentVector, n: u64) -> Result<Vec<Complex64>> {
    points.par_iter().map(|x| weyl_sum_m(x, m, n)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationReport {
    pub difference: f64,
    pub bound: f64,
    pub printed_bound: f64,
    pub pass: bool,
}

/// Compares `|S(a/q + delta; N) - S(a/q; N)|` with the Lipschitz bound
/// `2 pi sum_n sum_j |delta_j| n^{m_j}`.
///
/// `printed_bound` is `2 d N^{d+1} max|delta_j|`, reported for comparison only.
pub fn perturbation_check(
    nums: &[i64],
    q: u64,
    delta: &[BigRational],
    m: &ExponentVector,
    n: u64,
) -> Result<PerturbationReport> {
    let anchor = TorusPoint::rational(nums, q)?;
    let moved = anchor.clone().displaced(delta)?;
    let s0 = weyl_sum_m(&anchor, m, n)?;
    let s1 = weyl_sum_m(&moved, m, n)?;
    let abs: Vec<f64> = delta
        .iter()
        .map(|r| r.abs().to_f64().unwrap_or(f64::INFINITY))
        .collect();
    let mut bound = 0.0;
    for k in 1..=n {
        for (d, &e) in abs.iter().zip(m.as_slice()) {
            bound += d * (k as f64).powi(e as i32);
        }
    }
    bound *= TAU;
    // absorb the rounding of the displaced coordinates and the two sums
    let slack = 1e-9 * n as f64;
    let dmax = abs.iter().copied().fold(0.0, f64::max);
    let deg = *m.as_slice().last().unwrap() as f64;
    let difference = (s1 - s0).norm();
    Ok(PerturbationReport {
        difference,
        bound,
        printed_bound: 2.0 * deg * (n as f64).powf(deg + 1.0) * dmax,
        pass: difference <= bound + slack,
    })
}
