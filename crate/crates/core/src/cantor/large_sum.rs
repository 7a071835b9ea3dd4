use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;

use super::{
    expand_level, floor_u64, fmt_rational, ln_rational, BoxCollection, CantorBox, CantorBuild,
    CantorSchedule, PatternSpec, Placement,
};
use crate::complete::{CoeffVector, CompleteSumTable, PrimeField};
use crate::error::{Error, Result};
use crate::large::{ceil_pow, is_large, kappa, plan_multiplier, RationalExponent};
use crate::weyl::{weyl_sum, TorusPoint};

/// Evidence that the sum at a box centre is large.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub level: usize,
    pub p: u64,
    pub anchor: CoeffVector,
    pub n: u64,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub p: u64,
    pub delta: String,
    pub ell: String,
    pub cells_per_side: u64,
    /// `kappa_d - ln(delta_{k-1}/ell_k) / ln p_k`
    pub epsilon_effective: f64,
}

#[derive(Debug)]
pub struct LargeSumCantor {
    pub d: u32,
    pub tau: RationalExponent,
    pub epsilon: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub build: CantorBuild,
    /// `certificates[k - 1][i]` belongs to box `i` of level `k`.
    pub certificates: Vec<Vec<Certificate>>,
    pub levels: Vec<LevelSummary>,
    /// Set when the construction could not reach the requested depth.
    pub stopped: Option<Error>,
}

impl LargeSumCantor {
    pub fn depth_reached(&self) -> usize {
        self.levels.len()
    }

    pub fn all_certificates_pass(&self) -> bool {
        self.certificates.iter().flatten().all(|c| c.pass)
    }

    /// `d (kappa_d - epsilon) / tau` for the requested `epsilon`.
    pub fn target_dimension(&self) -> f64 {
        self.d as f64 * (self.kappa - self.epsilon) / self.tau.to_f64()
    }
}

enum Membership {
    Table(CompleteSumTable),
    Direct(PrimeField),
}

impl Membership {
    fn new(d: u32, p: u64, cap: u64) -> Result<Self> {
        match CompleteSumTable::build(d, p, cap) {
            Ok(t) => Ok(Self::Table(t)),
            Err(Error::ResourceLimit { .. }) => Ok(Self::Direct(PrimeField::new(p)?)),
            Err(e) => Err(e),
        }
    }

    fn is_member(&self, a: &[u64], p: u64, gamma: f64) -> bool {
        if *a.last().unwrap() == 0 {
            return false;
        }
        let mag = match self {
            Self::Table(t) => t.get(a),
            Self::Direct(f) => f.complete_sum(a).norm(),
        };
        is_large(mag, p, gamma)
    }
}

const MAX_CANDIDATES: u128 = 50_000_000;

/// Candidates `a/p` with `B(a/p, delta/2)` inside `cell`, nearest to the
/// cell centre first (L-infinity), ties broken lexicographically.
fn find_anchor(
    cell: &CantorBox,
    delta: &BigRational,
    p: u64,
    gamma: f64,
    members: &Membership,
    level: usize,
) -> Result<CoeffVector> {
    let pr = BigRational::from_integer(p.into());
    let half = delta / BigRational::from_integer(2.into());
    let mut ranges = Vec::with_capacity(cell.dim());
    for c in &cell.corner {
        let lo = ((c + &half) * &pr).ceil().to_integer();
        let hi = ((c + &cell.side - &half) * &pr).floor().to_integer();
        if hi < lo {
            return Err(Error::WitnessNotFound {
                level,
                reason: format!(
                    "no point of (1/{p})Z^d fits a side-{} box inside a cell of side {}",
                    fmt_rational(delta),
                    fmt_rational(&cell.side)
                ),
            });
        }
        ranges.push((lo.to_u64().unwrap(), hi.to_u64().unwrap()));
    }
    let total: u128 = ranges.iter().map(|(l, h)| (h - l + 1) as u128).product();
    if total > MAX_CANDIDATES {
        return Err(Error::WitnessNotFound {
            level,
            reason: format!("{total} candidates per cell exceed the search limit"),
        });
    }
    // distances measured in units of 1/(2 p den) to stay integral
    let centre = cell.center();
    let scale = BigInt::from(2 * p) * cell.side.denom() * delta.denom();
    let centre_scaled: Vec<BigInt> = centre
        .iter()
        .map(|c| (c * BigRational::from_integer(scale.clone())).to_integer())
        .collect();
    let step = &scale / BigInt::from(p);
    let mut cands: Vec<(BigInt, Vec<u64>)> = Vec::with_capacity(total as usize);
    let mut idx: Vec<u64> = ranges.iter().map(|r| r.0).collect();
    'outer: loop {
        let dist = idx
            .iter()
            .zip(&centre_scaled)
            .map(|(&a, c)| (BigInt::from(a) * &step - c).magnitude().clone())
            .max()
            .unwrap();
        cands.push((BigInt::from(dist), idx.clone()));
        for j in (0..idx.len()).rev() {
            idx[j] += 1;
            if idx[j] <= ranges[j].1 {
                continue 'outer;
            }
            idx[j] = ranges[j].0;
        }
        break;
    }
    cands.sort();
    cands
        .into_iter()
        .find(|(_, a)| members.is_member(a, p, gamma))
        .map(|(_, a)| CoeffVector::new(a, p).expect("reduced"))
        .ok_or_else(|| Error::WitnessNotFound {
            level,
            reason: format!("no member of L_{p} has its neighbourhood inside the cell"),
        })
}

fn anchor_of(b: &CantorBox, p: u64) -> CoeffVector {
    let pr = BigRational::from_integer(p.into());
    let a = b
        .center()
        .iter()
        .map(|c| (c * &pr).to_integer().to_u64().expect("in range"))
        .collect();
    CoeffVector::new(a, p).expect("reduced")
}

/// Builds `C_1, ..., C_K` where every depth-`k` box has side
/// `delta_k = 1/ceil(p_k^tau)` and is centred at a point `a/p_k` with
/// `a` in `L_{p_k}`, one per cell of side
/// `ell_k = delta_{k-1} / floor(p_k^{kappa_d - epsilon} delta_{k-1})`.
///
/// Each box carries a certificate `|S_d(a/p_k; N_k)| >= 0.25 gamma N_k p_k^{-1/2}`
/// with `N_k = p_k max(1, floor(0.25 gamma^{1/d} p_k^{(2 tau - 1)/(2d) - 1}))`.
/// If a level cannot be built the result holds the levels before it and
/// the reason in `stopped`.
pub fn large_sum_cantor(
    d: u32,
    tau: RationalExponent,
    epsilon: f64,
    gamma: f64,
    primes: &[u64],
    depth: usize,
    cap: u64,
) -> Result<LargeSumCantor> {
    let kap = kappa(d)?.to_f64().unwrap();
    if 2 * tau.num <= (2 * d as u64 + 1) * tau.den {
        return Err(Error::precondition(format!(
            "tau = {tau} must exceed d + 1/2"
        )));
    }
    if !(epsilon >= 0.0 && epsilon < kap) {
        return Err(Error::precondition(format!(
            "epsilon = {epsilon} must lie in [0, kappa_d = {kap})"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::precondition("gamma must be positive"));
    }
    if depth > primes.len() {
        return Err(Error::precondition(format!(
            "depth {depth} needs {depth} primes, got {}",
            primes.len()
        )));
    }
    if primes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::precondition("primes must be strictly increasing"));
    }
    for &p in primes {
        PrimeField::new(p)?;
    }

    let dd = d as usize;
    let mut delta = vec![BigRational::one()];
    let mut ell: Vec<BigRational> = Vec::new();
    let mut levels = vec![BoxCollection::from_boxes(0, vec![CantorBox::unit(dd)])];
    let mut certificates = Vec::new();
    let mut summaries = Vec::new();
    let mut stopped = None;

    for k in 1..=depth {
        let p = primes[k - 1];
        match build_level(
            k,
            p,
            d,
            tau,
            epsilon,
            gamma,
            kap,
            cap,
            &delta,
            levels.last().unwrap(),
        ) {
            Ok((dk, lk, level, certs, summary)) => {
                delta.push(dk);
                ell.push(lk);
                levels.push(level);
                certificates.push(certs);
                summaries.push(summary);
            }
            Err(e @ (Error::InvalidSchedule { .. } | Error::WitnessNotFound { .. })) => {
                stopped = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let schedule = CantorSchedule::new(dd, delta, ell)?;
    Ok(LargeSumCantor {
        d,
        tau,
        epsilon,
        gamma,
        kappa: kap,
        build: CantorBuild { schedule, levels },
        certificates,
        levels: summaries,
        stopped,
    })
}

type Level = (
    BigRational,
    BigRational,
    BoxCollection,
    Vec<Certificate>,
    LevelSummary,
);

#[allow(clippy::too_many_arguments)]
fn build_level(
    k: usize,
    p: u64,
    d: u32,
    tau: RationalExponent,
    epsilon: f64,
    gamma: f64,
    kap: f64,
    cap: u64,
    delta: &[BigRational],
    parents: &BoxCollection,
) -> Result<Level> {
    let prev = &delta[k - 1];
    let dk = BigRational::new(BigInt::one(), BigInt::from(ceil_pow(p, tau)));
    let target = (p as f64).powf(kap - epsilon) * prev.to_f64().unwrap();
    let cells = if target.is_finite() {
        target.floor() as u64
    } else {
        0
    };
    if cells == 0 {
        return Err(Error::InvalidSchedule {
            level: k,
            reason: format!(
                "floor(p^(kappa - epsilon) delta_(k-1)) = 0 for p = {p}: a cell would exceed the parent box"
            ),
        });
    }
    let lk = prev / BigRational::from_integer(cells.into());
    if lk < dk {
        return Err(Error::InvalidSchedule {
            level: k,
            reason: format!("ell_k = {} is below delta_k", fmt_rational(&lk)),
        });
    }
    let spec = PatternSpec::new(
        prev.clone(),
        lk.clone(),
        dk.clone(),
        Placement::OracleGuided,
    )
    .map_err(|e| Error::InvalidSchedule {
        level: k,
        reason: e.to_string(),
    })?;
    let members = Membership::new(d, p, cap)?;
    let half = &dk / BigRational::from_integer(2.into());
    let pr = BigRational::from_integer(p.into());
    let level = expand_level(parents, &spec, |cell| {
        let a = find_anchor(cell, &dk, p, gamma, &members, k)?;
        Ok(a.as_slice()
            .iter()
            .map(|&c| BigRational::from_integer(c.into()) / &pr - &half)
            .collect())
    })?;

    let m = plan_multiplier(p, tau, d, gamma)?.max(1);
    let n = p * m;
    let bound = 0.25 * gamma * n as f64 / (p as f64).sqrt();
    let certs: Vec<Certificate> = level
        .boxes
        .par_iter()
        .map(|b| {
            let anchor = anchor_of(b, p);
            let nums: Vec<i64> = anchor.as_slice().iter().map(|&c| c as i64).collect();
            let x = TorusPoint::rational(&nums, p)?;
            let value = weyl_sum(&x, n)?.norm();
            Ok(Certificate {
                level: k,
                p,
                anchor,
                n,
                value,
                bound,
                pass: value >= bound,
            })
        })
        .collect::<Result<_>>()?;

    let epsilon_effective = kap - ln_rational(&(prev / &lk)) / (p as f64).ln();
    let summary = LevelSummary {
        level: k,
        p,
        delta: fmt_rational(&dk),
        ell: fmt_rational(&lk),
        cells_per_side: floor_u64(&(prev / &lk)).expect("small"),
        epsilon_effective,
    };
    Ok((dk, lk, level, certs, summary))
}
