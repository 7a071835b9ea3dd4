//! Large complete sums: the sets `L_p`, the exponents `beta_d` and `kappa_d`,
//! orbit and box densities, and amplification of large values to nearby
//! points and longer sums.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::complete::{CoeffVector, CompleteSumTable, DiscreteBox, PrimeField};
use crate::error::{Error, Result};
use crate::phase::Phase;
use crate::weyl::{monomial_sum, weyl_sum, TorusPoint};

/// Relative slack on `|T| >= gamma sqrt(p)`, so that sums whose exact
/// magnitude equals the threshold are not lost to rounding.
pub const LP_REL_TOL: f64 = 1e-9;

/// A positive rational exponent `num / den` in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct RationalExponent {
    pub num: u64,
    pub den: u64,
}

impl RationalExponent {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 {
            return Err(Error::precondition(format!(
                "exponent {num}/{den} must be positive"
            )));
        }
        let g = num.gcd(&den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(n: u64) -> Self {
        Self { num: n, den: 1 }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn as_ratio(self) -> BigRational {
        BigRational::new(self.num.into(), self.den.into())
    }

    pub fn is_integer(self) -> bool {
        self.den == 1
    }
}

impl fmt::Display for RationalExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for RationalExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse rational exponent {s:?}"));
        match s.trim().split_once('/') {
            Some((a, b)) => Self::new(
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ),
            None => Self::new(s.trim().parse().map_err(|_| bad())?, 1),
        }
    }
}

/// `ceil(p^tau)` computed exactly.
pub fn ceil_pow(p: u64, tau: RationalExponent) -> BigUint {
    let n = BigUint::from(p).pow(tau.num as u32);
    let mut r = n.nth_root(tau.den as u32);
    if r.pow(tau.den as u32) < n {
        r += 1u32;
    }
    r
}

/// Exact test of `|delta| < p^{-tau}` (or `<=` when `inclusive`).
pub fn within_radius(delta: &BigRational, p: u64, tau: RationalExponent, inclusive: bool) -> bool {
    // |delta|^v p^u  vs  1
    let a = delta.abs();
    let lhs = a.numer().pow(tau.den as u32) * BigInt::from(p).pow(tau.num as u32);
    let rhs = a.denom().pow(tau.den as u32);
    if inclusive {
        lhs <= rhs
    } else {
        lhs < rhs
    }
}

/// `beta_d = max_{1<=nu<=d} min(d/nu, 2d/(2d - nu))`.
pub fn beta(d: u32) -> Result<Ratio<u64>> {
    if d < 3 {
        return Err(Error::UndefinedForDegree(d));
    }
    let d64 = d as u64;
    Ok((1..=d64)
        .map(|nu| {
            let a = Ratio::new(d64, nu);
            let b = Ratio::new(2 * d64, 2 * d64 - nu);
            a.min(b)
        })
        .max()
        .expect("d >= 3"))
}

/// `kappa_d = beta_d / (2d)`.
pub fn kappa(d: u32) -> Result<Ratio<u64>> {
    Ok(beta(d)? / Ratio::from_integer(2 * d as u64))
}

#[inline]
pub fn is_large(magnitude: f64, p: u64, gamma: f64) -> bool {
    magnitude >= gamma * (p as f64).sqrt() * (1.0 - LP_REL_TOL)
}

#[derive(Clone, Debug, Serialize)]
pub struct LargeSumSet {
    pub d: u32,
    pub p: u64,
    pub gamma: f64,
    pub members: Vec<CoeffVector>,
    pub density: f64,
}

impl LargeSumSet {
    pub fn from_table(table: &CompleteSumTable, gamma: f64) -> Self {
        let (d, p) = (table.d(), table.p());
        let members = (0..table.len())
            .filter(|&i| !table.leading_zero(i) && is_large(table.magnitude(i), p, gamma))
            .map(|i| CoeffVector::from_index(i, d as usize, p))
            .collect::<Vec<_>>();
        let density = members.len() as f64 / table.len() as f64;
        Self {
            d,
            p,
            gamma,
            members,
            density,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, a: &CoeffVector) -> bool {
        self.members.binary_search(a).is_ok()
    }
}

/// All `a` with `a_d != 0` and `|T_{d,p}(a)| >= gamma sqrt(p)`, in index order.
pub fn enumerate_lp(d: u32, p: u64, gamma: f64, cap: u64) -> Result<LargeSumSet> {
    let table = CompleteSumTable::build(d, p, cap)?;
    Ok(LargeSumSet::from_table(&table, gamma))
}

/// First member of `L_p` in lexicographic order, found without building a
/// table. Suitable for primes whose `p^d` is far beyond any cap.
pub fn first_lp_member(field: &PrimeField, d: u32, gamma: f64) -> Option<CoeffVector> {
    let p = field.p();
    let total = (p as u128).checked_pow(d)?;
    (0..total).find_map(|idx| {
        if idx % p as u128 == 0 {
            return None;
        }
        let a = CoeffVector::from_index(idx as usize, d as usize, p);
        is_large(field.complete_sum(a.as_slice()).norm(), p, gamma).then_some(a)
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitCount {
    pub count: u64,
    pub bound: f64,
    pub pass: bool,
}

/// `#{lambda in F_p^* : (a_1 lambda, ..., a_k lambda^k) in B}` against
/// `0.5 L^k p^{1-k}`.
pub fn orbit_in_box_count(a: &[u64], p: u64, b: &DiscreteBox) -> Result<OrbitCount> {
    if a.is_empty() || a.iter().any(|&c| c % p == 0) {
        return Err(Error::precondition("every a_i must be nonzero mod p"));
    }
    if b.dim() != a.len() {
        return Err(Error::precondition("box dimension must equal k"));
    }
    let mut count = 0u64;
    let mut point = vec![0u64; a.len()];
    for lambda in 1..p {
        let mut pw = 1u64;
        for (slot, &c) in point.iter_mut().zip(a) {
            pw = crate::arith::mul_mod(pw, lambda, p);
            *slot = crate::arith::mul_mod(c % p, pw, p);
        }
        if b.contains(&point) {
            count += 1;
        }
    }
    let k = a.len() as i32;
    let bound = 0.5 * (b.side() as f64).powi(k) * (p as f64).powi(1 - k);
    Ok(OrbitCount {
        count,
        bound,
        pass: count as f64 >= bound,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrbitSweep {
    pub p: u64,
    pub min_side: u64,
    pub boxes_tested: u64,
    pub failures: Vec<u64>,
    /// Smallest `L0` with `count(L) >= 0.5 L^k p^{1-k}` for every `L >= L0`.
    pub empirical_threshold: u64,
}

/// Orbit counts for every origin-cornered box `{1..L}^k` with
/// `min_side <= L <= p`.
pub fn orbit_density_sweep(a: &[u64], p: u64, min_side: u64) -> Result<OrbitSweep> {
    if a.is_empty() || a.iter().any(|&c| c % p == 0) {
        return Err(Error::precondition("every a_i must be nonzero mod p"));
    }
    let k = a.len() as i32;
    // hist[m] = #{lambda : all coordinates nonzero with max coordinate m}
    let mut hist = vec![0u64; p as usize];
    for lambda in 1..p {
        let mut pw = 1u64;
        let mut mx = 0u64;
        let mut zero = false;
        for &c in a {
            pw = crate::arith::mul_mod(pw, lambda, p);
            let v = crate::arith::mul_mod(c % p, pw, p);
            zero |= v == 0;
            mx = mx.max(v);
        }
        if !zero {
            hist[mx as usize] += 1;
        }
    }
    let bound = |l: u64| 0.5 * (l as f64).powi(k) * (p as f64).powi(1 - k);
    let mut counts = vec![0u64; p as usize];
    let mut run = 0u64;
    for l in 1..p as usize {
        run += hist[l];
        counts[l] = run;
    }
    // {1..p} excludes 0 and contains {1..p-1}
    let count_at = |l: u64| counts[l.min(p - 1) as usize];
    let mut failures = Vec::new();
    let mut boxes_tested = 0;
    for l in min_side.max(1)..=p {
        boxes_tested += 1;
        if (count_at(l) as f64) < bound(l) {
            failures.push(l);
        }
    }
    let mut empirical_threshold = p + 1;
    for l in (1..=p).rev() {
        if (count_at(l) as f64) < bound(l) {
            break;
        }
        empirical_threshold = l;
    }
    Ok(OrbitSweep {
        p,
        min_side,
        boxes_tested,
        failures,
        empirical_threshold,
    })
}

/// Some `a` in `B` and `L_p` (the first in index order), if any.
pub fn box_density_check(lp: &LargeSumSet, b: &DiscreteBox) -> Result<Option<CoeffVector>> {
    if lp.d < 3 {
        return Err(Error::precondition("box density is stated for d >= 3"));
    }
    if b.dim() != lp.d as usize {
        return Err(Error::precondition("box dimension must equal d"));
    }
    Ok(lp
        .members
        .iter()
        .find(|a| b.contains(a.as_slice()))
        .cloned())
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityThreshold {
    pub d: u32,
    pub p: u64,
    /// Smallest `L` such that every box of side `L` meets `L_p`.
    pub side: Option<u64>,
    pub reference: f64,
    pub ratio: Option<f64>,
}

fn all_boxes_hit(indicator: &[u32], d: usize, p: usize, side: usize) -> bool {
    let mut cur = indicator.to_vec();
    let mut line = vec![0u32; 2 * p + 1];
    for axis in 0..d {
        let stride = p.pow((d - 1 - axis) as u32);
        let block = stride * p;
        let mut next = vec![0u32; cur.len()];
        for outer in (0..cur.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                // cyclic prefix sums over two periods
                line[0] = 0;
                for t in 0..2 * p {
                    line[t + 1] = line[t] + cur[base + (t % p) * stride];
                }
                for i in 0..p {
                    next[base + i * stride] = line[i + side] - line[i];
                }
            }
        }
        cur = next;
    }
    cur.iter().all(|&c| c > 0)
}

/// Sweeps the box side to find the smallest `L` at which every box of side
/// `L` (all `p^d` positions) contains a member of `L_p`, and compares it to
/// `p^{1 - kappa_d} ln p`.
pub fn density_threshold(lp: &LargeSumSet) -> Result<DensityThreshold> {
    let (d, p) = (lp.d as usize, lp.p as usize);
    let k = kappa(lp.d)?;
    let reference = (p as f64).powf(1.0 - k.to_f64().unwrap()) * (p as f64).ln();
    let mut indicator = vec![0u32; p.pow(d as u32)];
    for a in &lp.members {
        indicator[a.index(lp.p)] = 1;
    }
    let side = if lp.is_empty() {
        None
    } else {
        let (mut lo, mut hi) = (1usize, p);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if all_boxes_hit(&indicator, d, p, mid) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Some(lo as u64)
    };
    Ok(DensityThreshold {
        d: lp.d,
        p: lp.p,
        side,
        reference,
        ratio: side.map(|s| s as f64 / reference),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AmplificationPlan {
    pub p: u64,
    pub tau: RationalExponent,
    pub d: u32,
    pub gamma: f64,
    /// `floor(0.25 gamma^{1/d} p^{(2 tau - 1)/(2d) - 1})`
    pub m: u64,
    pub n: u64,
    pub radius: f64,
}

fn check_tau(tau: RationalExponent, d: u32) -> Result<()> {
    // tau > d + 1/2
    if 2 * tau.num <= (2 * d as u64 + 1) * tau.den {
        return Err(Error::precondition(format!(
            "tau = {tau} must exceed d + 1/2 = {d}.5"
        )));
    }
    Ok(())
}

/// Largest `m` with `(4m)^{2dv} <= gamma^{2v} p^{2u - v - 2dv}` for `tau = u/v`,
/// i.e. `floor(0.25 gamma^{1/d} p^{(2 tau - 1)/(2d) - 1})`. May be 0.
pub fn plan_multiplier(p: u64, tau: RationalExponent, d: u32, gamma: f64) -> Result<u64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::precondition("gamma must be positive"));
    }
    let g = BigRational::from_f64(gamma).expect("finite");
    Ok(plan_floor(p, tau, d, &g))
}

fn plan_floor(p: u64, tau: RationalExponent, d: u32, gamma: &BigRational) -> u64 {
    let (u, v, d) = (tau.num as i64, tau.den as i64, d as i64);
    let s = 2 * u - v - 2 * d * v;
    let gp = (2 * v) as u32;
    let (gn, gd) = (gamma.numer().pow(gp), gamma.denom().pow(gp));
    let pp = BigInt::from(p).pow(s.unsigned_abs() as u32);
    let (rhs, lhs_extra) = if s >= 0 {
        (gn * &pp, gd)
    } else {
        (gn, gd * &pp)
    };
    let fits = |m: u64| -> bool {
        let lhs = BigInt::from(4 * m).pow((2 * d * v) as u32) * &lhs_extra;
        lhs <= rhs
    };
    let est = 0.25
        * gamma.to_f64().unwrap().powf(1.0 / d as f64)
        * (p as f64).powf(((2.0 * tau.to_f64()) - 1.0) / (2.0 * d as f64) - 1.0);
    let mut m = if est.is_finite() && est > 0.0 {
        est.floor() as u64
    } else {
        0
    };
    while m > 0 && !fits(m) {
        m -= 1;
    }
    while fits(m + 1) {
        m += 1;
    }
    m
}

pub fn amplification_plan(
    p: u64,
    tau: RationalExponent,
    d: u32,
    gamma: f64,
) -> Result<AmplificationPlan> {
    if d == 0 {
        return Err(Error::precondition("degree must be >= 1"));
    }
    PrimeField::new(p)?;
    check_tau(tau, d)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::precondition("gamma must be positive"));
    }
    let g = BigRational::from_f64(gamma).expect("finite");
    let m = plan_floor(p, tau, d, &g);
    if m == 0 {
        return Err(Error::PrimeTooSmall(format!(
            "floor(0.25 gamma^(1/d) p^((2 tau - 1)/(2d) - 1)) = 0 for p = {p}, d = {d}, tau = {tau}"
        )));
    }
    let n = p
        .checked_mul(m)
        .ok_or_else(|| Error::precondition("trial length overflows 64 bits"))?;
    Ok(AmplificationPlan {
        p,
        tau,
        d,
        gamma,
        m,
        n,
        radius: (p as f64).powf(-tau.to_f64()),
    })
}

/// The `count` smallest primes for which the plan is feasible.
pub fn smallest_feasible_primes(
    d: u32,
    tau: RationalExponent,
    gamma: f64,
    count: usize,
) -> Result<Vec<u64>> {
    check_tau(tau, d)?;
    let mut out = Vec::with_capacity(count);
    let mut p = 2u64;
    while out.len() < count {
        p = crate::arith::next_prime(p + 1);
        match amplification_plan(p, tau, d, gamma) {
            Ok(_) => out.push(p),
            Err(Error::PrimeTooSmall(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// A displacement strictly below `p^{-tau}/2` in absolute value, exact.
pub fn half_radius(p: u64, tau: RationalExponent) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(ceil_pow(p, tau)) * 2)
}

/// `+-half_radius` along each axis: `2d` displacement vectors.
pub fn axis_offsets(p: u64, tau: RationalExponent, d: usize) -> Vec<Vec<BigRational>> {
    let h = half_radius(p, tau);
    let mut out = Vec::with_capacity(2 * d);
    for j in 0..d {
        for sign in [1, -1] {
            let mut v = vec![BigRational::zero(); d];
            v[j] = if sign > 0 { h.clone() } else { -h.clone() };
            out.push(v);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct AmplificationReport {
    pub p: u64,
    pub d: u32,
    pub tau: RationalExponent,
    pub n: u64,
    pub anchor: CoeffVector,
    pub delta: Vec<String>,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `|S_d(a/p + delta; N)|` against `0.25 gamma N p^{-1/2}`.
pub fn amplified_sum_check(
    plan: &AmplificationPlan,
    anchor: &CoeffVector,
    delta: &[BigRational],
) -> Result<AmplificationReport> {
    let (p, d) = (plan.p, plan.d as usize);
    if anchor.degree() != d || delta.len() != d {
        return Err(Error::precondition(
            "anchor and displacement must have length d",
        ));
    }
    let field = PrimeField::new(p)?;
    if anchor.leading() == 0
        || !is_large(field.complete_sum(anchor.as_slice()).norm(), p, plan.gamma)
    {
        return Err(Error::precondition(format!(
            "anchor {anchor:?} is not in L_p"
        )));
    }
    if let Some(j) = delta
        .iter()
        .position(|r| !within_radius(r, p, plan.tau, false))
    {
        return Err(Error::precondition(format!(
            "coordinate {j} is not within p^(-tau) of the anchor"
        )));
    }
    let nums: Vec<i64> = anchor.as_slice().iter().map(|&c| c as i64).collect();
    let x = TorusPoint::rational(&nums, p)?.displaced(delta)?;
    let value = weyl_sum(&x, plan.n)?.norm();
    let bound = 0.25 * plan.gamma * plan.n as f64 / (p as f64).sqrt();
    Ok(AmplificationReport {
        p,
        d: plan.d,
        tau: plan.tau,
        n: plan.n,
        anchor: anchor.clone(),
        delta: delta.iter().map(|r| r.to_string()).collect(),
        value,
        bound,
        pass: value >= bound,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MonomialAmplificationReport {
    pub a: u64,
    pub p: u64,
    pub d: u32,
    pub tau: RationalExponent,
    pub n: u64,
    pub delta: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `|sigma_d(a/p^d + delta; N)| >= 0.5 N / p` for `p^d | N` and
/// `4 N^d <= p^{tau - 1}`.
pub fn monomial_amplified_check(
    a: u64,
    p: u64,
    d: u32,
    tau: RationalExponent,
    delta: &BigRational,
    n: Option<u64>,
) -> Result<MonomialAmplificationReport> {
    if !crate::arith::is_prime(p) {
        return Err(Error::InvalidField(p));
    }
    if d < 2 {
        return Err(Error::precondition("monomial sums need d >= 2"));
    }
    if a.is_multiple_of(p) {
        return Err(Error::InvalidNumerator { numerator: a, p });
    }
    let q = p
        .checked_pow(d)
        .ok_or_else(|| Error::precondition("p^d overflows 64 bits"))?;
    // 4 N^d <= p^{tau - 1}  <=>  4^v N^{dv} <= p^{u - v}
    let fits = |n: u64| -> bool {
        if tau.num < tau.den {
            return false;
        }
        let lhs =
            BigUint::from(4u32).pow(tau.den as u32) * BigUint::from(n).pow(d * tau.den as u32);
        lhs <= BigUint::from(p).pow((tau.num - tau.den) as u32)
    };
    if !fits(q) {
        return Err(Error::PrimeTooSmall(format!(
            "no N with p^d <= N and 4 N^d <= p^(tau - 1) for p = {p}, d = {d}, tau = {tau}"
        )));
    }
    let n = n.unwrap_or(q);
    if !n.is_multiple_of(q) || !fits(n) {
        return Err(Error::precondition(format!(
            "N = {n} must be a multiple of p^d with 4 N^d <= p^(tau - 1)"
        )));
    }
    if !within_radius(delta, p, tau, true) {
        return Err(Error::precondition("x is not within p^(-tau) of a/p^d"));
    }
    let x = TorusPoint::rational(&[(a % q) as i64], q)?.displaced(std::slice::from_ref(delta))?;
    let value = monomial_sum(&x, n, d)?.norm();
    let bound = 0.5 * n as f64 / p as f64;
    Ok(MonomialAmplificationReport {
        a,
        p,
        d,
        tau,
        n,
        delta: delta.to_string(),
        value,
        bound,
        pass: value >= bound,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureEstimate {
    pub d: u32,
    pub alpha: f64,
    pub i: u64,
    pub samples: u64,
    pub seed: u64,
    pub hits: u64,
    pub estimate: f64,
    pub half_width: f64,
}

/// The `s`-th uniform point of `T_d` for a given seed. Each sample owns its
/// own ChaCha stream, so results do not depend on scheduling.
pub fn sample_point(seed: u64, s: u64, d: usize) -> TorusPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    TorusPoint::from_phases((0..d).map(|_| Phase(rng.gen())).collect())
}

/// Monte Carlo estimate of `lambda{x : |S_d(x; i)| >= i^alpha}` with a
/// normal-approximation 95% half-width.
pub fn measure_estimate(
    d: u32,
    alpha: f64,
    i: u64,
    samples: u64,
    seed: u64,
) -> Result<MeasureEstimate> {
    if samples < 1000 {
        return Err(Error::precondition("at least 1000 samples are required"));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::precondition(format!(
            "alpha = {alpha} must lie in (0, 1/2)"
        )));
    }
    if i == 0 || d == 0 {
        return Err(Error::precondition("i and d must be >= 1"));
    }
    let threshold = (i as f64).powf(alpha);
    let hits = (0..samples)
        .into_par_iter()
        .map(|s| {
            let x = sample_point(seed, s, d as usize);
            let v = weyl_sum(&x, i).expect("valid point").norm();
            // credit the certified summation error of 4N ulp
            u64::from(v + 4.0 * i as f64 * f64::EPSILON >= threshold)
        })
        .sum::<u64>();
    let estimate = hits as f64 / samples as f64;
    let half_width = 1.96 * (estimate * (1.0 - estimate) / samples as f64).sqrt();
    Ok(MeasureEstimate {
        d,
        alpha,
        i,
        samples,
        seed,
        hits,
        estimate,
        half_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complete::{lambda_orbit, DEFAULT_CAP};
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn beta_kappa_examples() {
        assert_eq!(beta(3).unwrap(), Ratio::new(3, 2));
        assert_eq!(beta(4).unwrap(), Ratio::new(4, 3));
        assert_eq!(kappa(3).unwrap(), Ratio::new(1, 4));
        assert_eq!(kappa(6).unwrap(), Ratio::new(1, 8));
        assert!(matches!(beta(2), Err(Error::UndefinedForDegree(2))));
        assert!(kappa(1).is_err());
    }

    #[test]
    fn beta_kappa_ranges() {
        for d in 3..=64u32 {
            let b = beta(d).unwrap();
            let k = kappa(d).unwrap();
            assert!(b >= Ratio::from_integer(1));
            assert!(b <= Ratio::new(3, 2) + Ratio::new(1, d as u64));
            assert_eq!(k * Ratio::from_integer(2 * d as u64), b);
            // direct max-min for kappa
            let direct = (1..=d as u64)
                .map(|nu| Ratio::new(1, 2 * nu).min(Ratio::new(1, 2 * d as u64 - nu)))
                .max()
                .unwrap();
            assert_eq!(k, direct);
            if d >= 30 {
                let f = b.to_f64().unwrap();
                assert!((1.4..=1.6).contains(&f));
            }
        }
    }

    #[test]
    fn lp_examples() {
        let lp = enumerate_lp(2, 5, 1.0, DEFAULT_CAP).unwrap();
        assert_eq!(lp.len(), 20);
        let lp3 = enumerate_lp(3, 7, 1.0, DEFAULT_CAP).unwrap();
        assert!(!lp3.is_empty() && lp3.density > 0.0);
        let big = enumerate_lp(3, 7, 3.0, DEFAULT_CAP).unwrap();
        assert!(big.is_empty());
    }

    #[test]
    fn lp_members_reverify_and_are_orbit_closed() {
        for p in [5u64, 7, 11, 13] {
            let field = PrimeField::new(p).unwrap();
            for d in 2..=3 {
                let lp = enumerate_lp(d, p, 1.0, DEFAULT_CAP).unwrap();
                for a in &lp.members {
                    assert_ne!(a.leading(), 0);
                    assert!(is_large(field.complete_sum(a.as_slice()).norm(), p, 1.0));
                    for lambda in 1..p {
                        assert!(lp.contains(&lambda_orbit(a, lambda, p).unwrap()));
                    }
                }
            }
        }
    }

    #[test]
    fn first_member_matches_enumeration() {
        let field = PrimeField::new(11).unwrap();
        let lp = enumerate_lp(3, 11, 1.0, DEFAULT_CAP).unwrap();
        assert_eq!(first_lp_member(&field, 3, 1.0).as_ref(), lp.members.first());
    }

    #[test]
    fn orbit_count_examples() {
        let p = 101;
        let full = DiscreteBox::full(2, p);
        assert_eq!(orbit_in_box_count(&[1, 1], p, &full).unwrap().count, p - 1);
        // I = {4, ..., 13}
        let b = DiscreteBox::new(vec![3], 10, p).unwrap();
        assert_eq!(orbit_in_box_count(&[7], p, &b).unwrap().count, 10);
        let b = DiscreteBox::new(vec![0, 0], 60, p).unwrap();
        let c = orbit_in_box_count(&[1, 1], p, &b).unwrap();
        assert!(c.pass && c.count as f64 >= 17.8);
        assert!(orbit_in_box_count(&[1, 0], p, &b).is_err());
    }

    #[test]
    fn orbit_counts_over_a_partition_sum_to_p_minus_1() {
        for p in [7u64, 11, 13] {
            for a in [[1u64, 1], [2, 3], [5, 1]] {
                let mut total = 0;
                for k1 in 0..p {
                    for k2 in 0..p {
                        let b = DiscreteBox::new(vec![k1, k2], 1, p).unwrap();
                        total += orbit_in_box_count(&a, p, &b).unwrap().count;
                    }
                }
                assert_eq!(total, p - 1);
            }
        }
    }

    #[test]
    fn orbit_sweep_agrees_with_direct_counts() {
        let p = 31;
        let sweep = orbit_density_sweep(&[1, 1], p, 1).unwrap();
        for l in 1..=p {
            let b = DiscreteBox::new(vec![0, 0], l, p).unwrap();
            let c = orbit_in_box_count(&[1, 1], p, &b).unwrap();
            assert_eq!(sweep.failures.contains(&l), !c.pass, "L = {l}");
        }
        assert_eq!(sweep.boxes_tested, p);
    }

    #[test]
    fn box_density_examples() {
        let lp = enumerate_lp(3, 31, 1.0, DEFAULT_CAP).unwrap();
        let full = DiscreteBox::full(3, 31);
        assert!(box_density_check(&lp, &full).unwrap().is_some());
        let outside = (0..31u64.pow(3) as usize)
            .map(|i| CoeffVector::from_index(i, 3, 31))
            .find(|a| !lp.contains(a))
            .unwrap();
        let starts = outside.as_slice().iter().map(|&c| (c + 30) % 31).collect();
        let single = DiscreteBox::new(starts, 1, 31).unwrap();
        assert!(box_density_check(&lp, &single).unwrap().is_none());
        let lp2 = enumerate_lp(2, 5, 1.0, DEFAULT_CAP).unwrap();
        assert!(box_density_check(&lp2, &DiscreteBox::full(2, 5)).is_err());
    }

    #[test]
    fn density_threshold_is_tight() {
        let lp = enumerate_lp(3, 13, 1.0, DEFAULT_CAP).unwrap();
        let t = density_threshold(&lp).unwrap();
        let side = t.side.unwrap();
        let every_box_hit = |l: u64| {
            (0..13u64.pow(3) as usize).all(|i| {
                let s = CoeffVector::from_index(i, 3, 13);
                let b = DiscreteBox::new(s.as_slice().to_vec(), l, 13).unwrap();
                box_density_check(&lp, &b).unwrap().is_some()
            })
        };
        assert!(every_box_hit(side));
        if side > 1 {
            assert!(!every_box_hit(side - 1));
        }
    }

    #[test]
    fn plan_examples() {
        let tau5 = RationalExponent::integer(5);
        let plan = amplification_plan(101, tau5, 2, 1.0).unwrap();
        assert_eq!((plan.m, plan.n), (80, 8080));
        assert!(matches!(
            amplification_plan(101, RationalExponent::new(5, 2).unwrap(), 2, 1.0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            amplification_plan(101, RationalExponent::integer(3), 2, 1.0),
            Err(Error::PrimeTooSmall(_))
        ));
        // boundary: 0.25 p^{1/4} in [1, 2) gives N = p
        let plan = amplification_plan(257, RationalExponent::integer(3), 2, 1.0).unwrap();
        assert_eq!(plan.n, 257);
    }

    #[test]
    fn smallest_feasible_primes_match_thresholds() {
        let t3 = RationalExponent::integer(3);
        assert_eq!(
            smallest_feasible_primes(2, t3, 1.0, 3).unwrap(),
            vec![257, 263, 269]
        );
        let t4 = RationalExponent::integer(4);
        assert_eq!(
            smallest_feasible_primes(3, t4, 1.0, 3).unwrap(),
            vec![4099, 4111, 4127]
        );
    }

    #[test]
    fn plan_floor_matches_float_formula_away_from_integers() {
        for p in [101u64, 211, 1009, 4099] {
            for (u, v) in [(5u64, 1u64), (7, 2), (13, 3), (6, 1)] {
                let tau = RationalExponent::new(u, v).unwrap();
                let Ok(plan) = amplification_plan(p, tau, 2, 1.0) else {
                    continue;
                };
                let f = 0.25 * (p as f64).powf((2.0 * tau.to_f64() - 1.0) / 4.0 - 1.0);
                if (f - f.round()).abs() > 1e-6 {
                    assert_eq!(plan.m, f.floor() as u64);
                }
            }
        }
    }

    #[test]
    fn amplified_examples() {
        let p = 101;
        let tau = RationalExponent::integer(5);
        let plan = amplification_plan(p, tau, 2, 1.0).unwrap();
        let a = CoeffVector::new(vec![0, 1], p).unwrap();
        let h = r(1, 2 * 101i64.pow(5));
        let rep = amplified_sum_check(&plan, &a, &[h.clone(), r(0, 1)]).unwrap();
        assert!(rep.pass, "{rep:?}");
        let far = r(2, 101i64.pow(5));
        assert!(matches!(
            amplified_sum_check(&plan, &a, &[far, r(0, 1)]),
            Err(Error::Precondition(_))
        ));
        let edge = r(1, 101i64.pow(5));
        assert!(amplified_sum_check(&plan, &a, &[edge, r(0, 1)]).is_err());
        let not_large = CoeffVector::new(vec![1, 0], p).unwrap();
        assert!(amplified_sum_check(&plan, &not_large, &[h, r(0, 1)]).is_err());
    }

    #[test]
    fn amplified_at_anchor_with_n_equal_p() {
        let p = 101;
        let plan = AmplificationPlan {
            p,
            tau: RationalExponent::integer(5),
            d: 2,
            gamma: 1.0,
            m: 1,
            n: p,
            radius: 0.0,
        };
        let a = CoeffVector::new(vec![3, 7], p).unwrap();
        let rep = amplified_sum_check(&plan, &a, &[r(0, 1), r(0, 1)]).unwrap();
        assert!((rep.value - (p as f64).sqrt()).abs() < 1e-9);
        assert!(rep.pass);
    }

    #[test]
    fn monomial_amplified_examples() {
        let t12 = RationalExponent::integer(12);
        let at = monomial_amplified_check(1, 5, 2, t12, &r(0, 1), None).unwrap();
        assert!((at.value - 5.0).abs() < 1e-9 && at.pass);
        let edge = r(1, 5i64.pow(12));
        let rep = monomial_amplified_check(1, 5, 2, t12, &edge, None).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(matches!(
            monomial_amplified_check(5, 5, 2, t12, &edge, None),
            Err(Error::InvalidNumerator { .. })
        ));
        assert!(matches!(
            monomial_amplified_check(1, 5, 2, RationalExponent::integer(4), &r(0, 1), None),
            Err(Error::PrimeTooSmall(_))
        ));
        assert!(monomial_amplified_check(1, 5, 2, t12, &r(2, 5i64.pow(12)), None).is_err());
    }

    #[test]
    fn measure_examples() {
        let one = measure_estimate(2, 0.3, 1, 1000, 0).unwrap();
        assert_eq!(one.estimate, 1.0);
        let est = measure_estimate(2, 0.4, 16, 10_000, 1).unwrap();
        assert!(est.estimate > 1.0 / 16.0 / 10.0);
        // shrinking alpha only lowers the threshold on the same samples; the
        // limit is the measure of |S| >= 1, which is below 1 once i > 1
        let mut prev = 0;
        for alpha in [0.45, 0.3, 0.1, 1e-9] {
            let e = measure_estimate(2, alpha, 16, 1000, 2).unwrap();
            assert!(e.hits >= prev);
            prev = e.hits;
        }
        assert!(prev > 800 && prev < 1000);
        assert!(measure_estimate(2, 0.6, 16, 1000, 0).is_err());
        assert!(measure_estimate(2, 0.3, 16, 999, 0).is_err());
    }

    #[test]
    fn measure_estimate_independent_of_thread_count() {
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| measure_estimate(3, 0.4, 32, 2000, 9).unwrap());
        let b = four.install(|| measure_estimate(3, 0.4, 32, 2000, 9).unwrap());
        assert_eq!(a.hits, b.hits);
    }

    #[test]
    fn ceil_pow_and_radius() {
        assert_eq!(
            ceil_pow(5, RationalExponent::integer(3)),
            BigUint::from(125u32)
        );
        // 2^{3/2} = 2.83
        assert_eq!(
            ceil_pow(2, RationalExponent::new(3, 2).unwrap()),
            BigUint::from(3u32)
        );
        let t = RationalExponent::new(3, 2).unwrap();
        assert!(within_radius(&r(1, 3), 2, t, false));
        assert!(!within_radius(&r(1, 2), 2, t, false));
        assert!(within_radius(&r(-1, 8), 4, t, true) && !within_radius(&r(-1, 8), 4, t, false));
    }

    #[test]
    fn rational_exponent_parsing() {
        assert_eq!(
            "4".parse::<RationalExponent>().unwrap(),
            RationalExponent::integer(4)
        );
        assert_eq!(
            "10/4".parse::<RationalExponent>().unwrap(),
            RationalExponent::new(5, 2).unwrap()
        );
        assert!("x/2".parse::<RationalExponent>().is_err());
        assert!("0".parse::<RationalExponent>().is_err());
    }

    proptest! {
        #[test]
        fn half_radius_is_strictly_inside(p in 2u64..500, u in 1u64..12, v in 1u64..4) {
            let tau = RationalExponent::new(u, v).unwrap();
            let h = half_radius(p, tau);
            prop_assert!(within_radius(&h, p, tau, false));
            let twice = h * BigRational::from_integer(2.into());
            if tau.is_integer() {
                // 2h is exactly p^{-tau}
                prop_assert!(within_radius(&twice, p, tau, true));
                prop_assert!(!within_radius(&twice, p, tau, false));
            } else {
                prop_assert!(within_radius(&twice, p, tau, true));
            }
        }
    }
}
