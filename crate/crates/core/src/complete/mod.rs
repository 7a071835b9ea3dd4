//! Complete rational exponential sums
//! `T_{d,p}(a) = sum_{n=1}^{p} e_p(a_1 n + ... + a_d n^d)` over prime fields,
//! their classical identities, and moment statistics.

mod table;

pub use table::{load_table, save_table, CompleteSumTable, CACHE_MAGIC, CACHE_VERSION};

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::{binomial_mod, is_prime, mul_mod, pow_mod};
use crate::error::{Error, Result};
use crate::phase::{e_eval, phase_of_residue, ComplexAcc};

/// Refuse to enumerate more than this many coefficient vectors unless the
/// caller raises the cap.
pub const DEFAULT_CAP: u64 = 10_000_000;

/// `F_p` together with the table `e_p(k)` for `k` in `[0, p)`.
#[derive(Clone, Debug)]
pub struct PrimeField {
    p: u64,
    roots: Vec<Complex64>,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if p < 3 || !is_prime(p) {
            return Err(Error::InvalidField(p));
        }
        let roots = (0..p).map(|k| e_eval(phase_of_residue(k, p))).collect();
        Ok(Self { p, roots })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    /// `e_p(k)` for a residue `k` in `[0, p)`.
    #[inline]
    pub fn e_p(&self, k: u64) -> Complex64 {
        self.roots[k as usize]
    }

    /// `T_{d,p}(a)` with `d = a.len()`.
    ///
    /// The polynomial is stepped with forward differences, so each of the `p`
    /// terms costs `d` modular additions.
    pub fn complete_sum(&self, a: &[u64]) -> Complex64 {
        let p = self.p;
        let d = a.len();
        let eval = |n: u64| -> u64 {
            let mut acc = 0u64;
            for &c in a.iter().rev() {
                acc = mul_mod((acc + c) % p, n % p, p);
            }
            acc
        };
        // differences[j] = Delta^j f(1)
        let mut diffs: Vec<u64> = (1..=d as u64 + 1).map(eval).collect();
        for j in 1..=d {
            for i in (j..=d).rev() {
                diffs[i] = (diffs[i] + p - diffs[i - 1]) % p;
            }
        }
        let mut acc = ComplexAcc::new();
        for _ in 0..p {
            acc.add(self.roots[diffs[0] as usize]);
            for j in 0..d {
                let s = diffs[j] + diffs[j + 1];
                diffs[j] = if s >= p { s - p } else { s };
            }
        }
        acc.value()
    }

    /// `sum_{lambda in F_p} e_p(f(lambda))` for coefficients `f = [c_0, c_1, ...]`.
    pub fn polynomial_sum(&self, f: &[u64]) -> Complex64 {
        let p = self.p;
        let mut acc = ComplexAcc::new();
        for lambda in 0..p {
            let mut v = 0u64;
            for &c in f.iter().rev() {
                v = (mul_mod(v, lambda, p) + c % p) % p;
            }
            acc.add(self.roots[v as usize]);
        }
        acc.value()
    }
}

/// `a = (a_1, ..., a_d)` with every component reduced into `[0, p)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CoeffVector(Vec<u64>);

impl CoeffVector {
    pub fn new(coeffs: Vec<u64>, p: u64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::precondition("coefficient vector must have d >= 1"));
        }
        if let Some(c) = coeffs.iter().find(|&&c| c >= p) {
            return Err(Error::precondition(format!(
                "coefficient {c} is not reduced mod {p}"
            )));
        }
        Ok(Self(coeffs))
    }

    /// Reduce arbitrary integers mod `p`.
    pub fn reduced(coeffs: &[i64], p: u64) -> Self {
        Self(
            coeffs
                .iter()
                .map(|&c| c.rem_euclid(p as i64) as u64)
                .collect(),
        )
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// `a_d`, the leading coefficient.
    pub fn leading(&self) -> u64 {
        *self.0.last().expect("non-empty")
    }

    /// Row-major index with `a_1` most significant.
    pub fn index(&self, p: u64) -> usize {
        self.0
            .iter()
            .fold(0usize, |acc, &c| acc * p as usize + c as usize)
    }

    pub fn from_index(mut index: usize, d: usize, p: u64) -> Self {
        let mut v = vec![0u64; d];
        for slot in v.iter_mut().rev() {
            *slot = (index % p as usize) as u64;
            index /= p as usize;
        }
        Self(v)
    }
}

/// `I_1 x ... x I_d` with `I_j = {k_j + 1, ..., k_j + L}` reduced mod `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DiscreteBox {
    starts: Vec<u64>,
    side: u64,
    p: u64,
}

impl DiscreteBox {
    pub fn new(starts: Vec<u64>, side: u64, p: u64) -> Result<Self> {
        if starts.is_empty() {
            return Err(Error::precondition("box must have dimension >= 1"));
        }
        if side == 0 || side > p {
            return Err(Error::precondition(format!(
                "box side {side} must lie in [1, {p}]"
            )));
        }
        Ok(Self {
            starts: starts.into_iter().map(|k| k % p).collect(),
            side,
            p,
        })
    }

    pub fn full(d: usize, p: u64) -> Self {
        Self {
            starts: vec![0; d],
            side: p,
            p,
        }
    }

    pub fn dim(&self) -> usize {
        self.starts.len()
    }

    pub fn side(&self) -> u64 {
        self.side
    }

    pub fn starts(&self) -> &[u64] {
        &self.starts
    }

    pub fn cardinality(&self) -> u128 {
        (self.side as u128).pow(self.dim() as u32)
    }

    #[inline]
    pub fn contains_coord(&self, j: usize, v: u64) -> bool {
        // v in {k+1, ..., k+L} mod p  <=>  (v - k - 1) mod p < L
        let off = (v % self.p + 2 * self.p - self.starts[j] - 1) % self.p;
        off < self.side
    }

    pub fn contains(&self, a: &[u64]) -> bool {
        a.len() == self.dim()
            && a.iter()
                .enumerate()
                .all(|(j, &v)| self.contains_coord(j, v))
    }

    /// All vectors in the box, row-major in the offsets.
    pub fn iter(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        let d = self.dim();
        let total = self.cardinality() as usize;
        (0..total).map(move |mut idx| {
            let mut v = vec![0u64; d];
            for j in (0..d).rev() {
                let off = (idx as u64) % self.side;
                idx /= self.side as usize;
                v[j] = (self.starts[j] + 1 + off) % self.p;
            }
            v
        })
    }
}

pub(crate) fn check_cap(p: u64, d: usize, cap: u64) -> Result<usize> {
    let entries = (p as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if entries > cap as u128 {
        return Err(Error::ResourceLimit { entries, cap });
    }
    Ok(entries as usize)
}

/// `T_{d,p}(a)`.
pub fn complete_sum(p: u64, a: &CoeffVector) -> Result<Complex64> {
    let field = PrimeField::new(p)?;
    Ok(field.complete_sum(a.as_slice()))
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussReport {
    pub p: u64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks `|T_{2,p}(a, b)| = sqrt(p)` for every `a` and every `b != 0`.
pub fn gauss_magnitude_check(p: u64) -> Result<GaussReport> {
    if p < 3 {
        return Err(Error::precondition(format!(
            "Gauss magnitude identity needs p >= 3 (got {p})"
        )));
    }
    let field = PrimeField::new(p)?;
    let root = (p as f64).sqrt();
    let mut max_deviation = 0.0f64;
    for a in 0..p {
        for b in 1..p {
            let dev = (field.complete_sum(&[a, b]).norm() - root).abs();
            max_deviation = max_deviation.max(dev);
        }
    }
    let tolerance = 1e-9 * root;
    Ok(GaussReport {
        p,
        max_deviation,
        tolerance,
        pass: max_deviation <= tolerance,
    })
}

/// `sum_{n=1}^{p^d} e(a n^d / p^d)`, which equals `p^{d-1}` for `gcd(a, p) = 1`.
pub fn monomial_complete_sum(d: u32, p: u64, a: u64) -> Result<Complex64> {
    if !is_prime(p) {
        return Err(Error::InvalidField(p));
    }
    if d == 0 {
        return Err(Error::precondition("degree must be >= 1"));
    }
    if a.is_multiple_of(p) {
        return Err(Error::InvalidNumerator { numerator: a, p });
    }
    let q = p
        .checked_pow(d)
        .ok_or_else(|| Error::precondition("p^d overflows 64 bits"))?;
    let a = a % q;
    let mut acc = ComplexAcc::new();
    for n in 1..=q {
        let r = mul_mod(a, pow_mod(n, d as u64, q), q);
        acc.add(e_eval(phase_of_residue(r, q)));
    }
    Ok(acc.value())
}

#[derive(Clone, Debug, Serialize)]
pub struct WeilReport {
    pub p: u64,
    pub degree: usize,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `|sum_{lambda} e_p(f(lambda))| <= (deg f - 1) sqrt(p)` for `f = [c_0, ..., c_k]`.
pub fn weil_check(f: &[i64], p: u64) -> Result<WeilReport> {
    let field = PrimeField::new(p)?;
    let reduced: Vec<u64> = f.iter().map(|&c| c.rem_euclid(p as i64) as u64).collect();
    let degree = match reduced.iter().rposition(|&c| c != 0) {
        Some(k) if k >= 1 => k,
        _ => return Err(Error::precondition("polynomial must be nonconstant mod p")),
    };
    if degree as u64 >= p {
        return Err(Error::precondition(format!(
            "deg f = {degree} must be below p = {p}"
        )));
    }
    let value = field.polynomial_sum(&reduced[..=degree]).norm();
    let bound = (degree as f64 - 1.0) * (p as f64).sqrt();
    Ok(WeilReport {
        p,
        degree,
        value,
        bound,
        pass: value <= bound + 1e-9,
    })
}

/// `lambda o a = (lambda a_1, lambda^2 a_2, ..., lambda^d a_d) mod p`.
pub fn lambda_orbit(a: &CoeffVector, lambda: u64, p: u64) -> Result<CoeffVector> {
    if lambda.is_multiple_of(p) {
        return Err(Error::InvalidScalar);
    }
    let mut pw = 1u64;
    let out = a
        .as_slice()
        .iter()
        .map(|&c| {
            pw = mul_mod(pw, lambda % p, p);
            mul_mod(c, pw, p)
        })
        .collect();
    Ok(CoeffVector(out))
}

/// Size of the orbit of `a` under the `lambda` action of `F_p^*`.
pub fn orbit_size(a: &CoeffVector, p: u64) -> usize {
    let mut seen = std::collections::BTreeSet::new();
    for lambda in 1..p {
        seen.insert(lambda_orbit(a, lambda, p).expect("lambda != 0"));
    }
    seen.len()
}

#[derive(Clone, Debug, Serialize)]
pub struct VanishingFamily {
    pub d: u32,
    pub p: u64,
    pub members: Vec<CoeffVector>,
    pub max_magnitude: f64,
    pub pass: bool,
}

/// The vectors `(C(d,1) lambda, ..., C(d,d) lambda^d)` for `lambda` in `F_p^*`,
/// whose complete sums vanish whenever `x -> x^d` permutes `F_p`.
pub fn vanishing_family(d: u32, p: u64) -> Result<VanishingFamily> {
    let field = PrimeField::new(p)?;
    if p <= d as u64 {
        return Err(Error::BinomialVanishing { d, p });
    }
    if num_integer::gcd(d as u64, p - 1) != 1 {
        return Err(Error::NotAPermutation { d, p });
    }
    let base = CoeffVector(
        (1..=d as u64)
            .map(|j| binomial_mod(d as u64, j, p))
            .collect(),
    );
    let mut members = Vec::with_capacity(p as usize - 1);
    let mut max_magnitude = 0.0f64;
    for lambda in 1..p {
        let a = lambda_orbit(&base, lambda, p)?;
        max_magnitude = max_magnitude.max(field.complete_sum(a.as_slice()).norm());
        members.push(a);
    }
    Ok(VanishingFamily {
        d,
        p,
        members,
        max_magnitude,
        pass: max_magnitude <= 1e-9 * p as f64,
    })
}

/// `A_d(nu)`: `nu!` for `nu < d` and `d! - 1` for `nu = d`.
pub fn main_term_constant(d: u32, nu: u32) -> u64 {
    let fact = |k: u32| (1..=k as u64).product::<u64>();
    if nu == d {
        fact(d) - 1
    } else {
        fact(nu)
    }
}

fn check_nu(d: usize, nu: u32) -> Result<()> {
    if nu == 0 || nu as usize > d {
        return Err(Error::precondition(format!(
            "moment order nu = {nu} must lie in [1, d = {d}]"
        )));
    }
    Ok(())
}

/// `sum_{a in F_p^d} |T_{d,p}(a)|^{2 nu}`, optionally without `a = 0`.
pub fn mordell_moment(d: u32, p: u64, nu: u32, include_zero: bool, cap: u64) -> Result<f64> {
    check_nu(d as usize, nu)?;
    let table = CompleteSumTable::build(d, p, cap)?;
    Ok(table.moment(nu, include_zero))
}

#[derive(Clone, Debug, Serialize)]
pub struct BoxMomentReport {
    pub d: u32,
    pub p: u64,
    pub nu: u32,
    pub side: u64,
    pub value: f64,
    pub main_term: f64,
    pub ratio: f64,
}

/// `M_{nu,d}(B) = sum_{a in B, a != 0} |T(a)|^{2 nu}` next to its predicted
/// main term `A_d(nu) L^d p^nu`.
pub fn box_moment(table: &CompleteSumTable, nu: u32, b: &DiscreteBox) -> Result<BoxMomentReport> {
    let d = table.d();
    check_nu(d as usize, nu)?;
    if b.dim() != d as usize || b.p != table.p() {
        return Err(Error::precondition("box does not match the table's (d, p)"));
    }
    let value = table.box_moment(nu, b);
    let main_term = main_term_constant(d, nu) as f64
        * (b.side() as f64).powi(d as i32)
        * (table.p() as f64).powi(nu as i32);
    Ok(BoxMomentReport {
        d,
        p: table.p(),
        nu,
        side: b.side(),
        value,
        main_term,
        ratio: value / main_term,
    })
}
