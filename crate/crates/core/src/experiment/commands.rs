//! One function per subcommand. Each returns its artifacts without touching
//! the disk, so the caller controls what gets written and in which order.

use std::fmt::Display;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::{cached_table, invalid, parse_u64, Artifacts, ExperimentConfig};
use crate::arith::is_prime;
use crate::cantor::{
    self, audit, box_counting_dimension, build_cantor, dimension_formula, dimension_profile,
    make_pattern, pairwise_disjoint, CantorBox, CantorSchedule, PatternSpec, Placement,
};
use crate::complete::{
    box_moment, gauss_magnitude_check, monomial_complete_sum, weil_check, DiscreteBox, PrimeField,
};
use crate::discrepancy::{discrepancy_rows, discrepancy_scan, koksma_relation_check};
use crate::error::{Error, Result};
use crate::large::{
    amplification_plan, amplified_sum_check, axis_offsets, box_density_check, density_threshold,
    first_lp_member, half_radius, measure_estimate, monomial_amplified_check, orbit_density_sweep,
    orbit_in_box_count, sample_point, smallest_feasible_primes, LargeSumSet, RationalExponent,
};
use crate::phase::Phase;
use crate::report::{box_record, fmt_f64, CsvTable, LemmaReport};
use crate::weyl::{
    checkpoint_grid, dyadic_grid, exceptional_scan, mr_ratio_scan, phase_from_big_rational,
    sigma_estimate, weyl_sum_trace, ExponentVector, TorusPoint,
};

pub(super) fn dispatch(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let a = Args(cfg);
    match cfg.command.as_str() {
        "gauss-check" => gauss(&a),
        "monomial-check" => monomial(&a),
        "weil-check" => weil(&a),
        "moments" => moments(&a),
        "box-moments" => box_moments(&a),
        "enumerate-lp" => enumerate_lp(&a),
        "orbit-count" => orbit_count(&a),
        "box-density" => box_density(&a),
        "amplify" => amplify(&a),
        "amplify-mono" => amplify_mono(&a),
        "weyl-trace" => weyl_trace(&a),
        "mr-scan" => mr_scan(&a),
        "sigma-scan" => sigma_scan(&a),
        "exceptional-scan" => exceptional(&a),
        "measure-estimate" => measure(&a),
        "cantor-build" => cantor_build(&a),
        "cantor-dim" => cantor_dim(&a),
        "pattern-demo" => pattern_demo(&a),
        "discrepancy" => discrepancy(&a),
        "koksma-check" => koksma(&a),
        "discrepancy-scan" => discrepancy_scan_cmd(&a),
        other => Err(invalid(format!("unknown subcommand {other:?}"))),
    }
}

/// Typed access to the parameter map.
struct Args<'a>(&'a ExperimentConfig);

impl Args<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key)
    }

    fn missing(key: &str) -> Error {
        invalid(format!("missing required parameter {key}"))
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.trim()
                    .parse::<T>()
                    .map_err(|e| invalid(format!("{key} = {v:?}: {e}")))
            })
            .transpose()
    }

    fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        self.raw(key).map(|v| parse_u64(key, v)).transpose()
    }

    fn u64(&self, key: &str) -> Result<u64> {
        self.u64_opt(key)?.ok_or_else(|| Self::missing(key))
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.u64_opt(key)?.unwrap_or(default))
    }

    fn u32(&self, key: &str) -> Result<u32> {
        u32::try_from(self.u64(key)?).map_err(|_| invalid(format!("{key} is too large")))
    }

    fn u32_or(&self, key: &str, default: u32) -> Result<u32> {
        match self.u64_opt(key)? {
            Some(v) => u32::try_from(v).map_err(|_| invalid(format!("{key} is too large"))),
            None => Ok(default),
        }
    }

    fn f64(&self, key: &str) -> Result<f64> {
        self.parsed(key)?.ok_or_else(|| Self::missing(key))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<T>()
                            .map_err(|e| invalid(format!("{key}: bad entry {s:?}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn u64_list(&self, key: &str) -> Result<Option<Vec<u64>>> {
        self.raw(key)
            .map(|v| v.split(',').map(|s| parse_u64(key, s)).collect())
            .transpose()
    }

    fn rational(&self, key: &str) -> Result<Option<BigRational>> {
        self.parsed::<BigRational>(key)
    }

    fn tau(&self, default: Option<u64>) -> Result<RationalExponent> {
        match (self.raw("tau"), default) {
            (Some(v), _) => v.parse(),
            (None, Some(t)) => Ok(RationalExponent::integer(t)),
            (None, None) => Err(Self::missing("tau")),
        }
    }

    fn gamma(&self) -> Result<f64> {
        let g = self.f64_or("gamma", 1.0)?;
        if !(g > 0.0 && g.is_finite()) {
            return Err(invalid(format!("gamma = {g} must be positive")));
        }
        Ok(g)
    }

    /// `x` as exact rationals when every entry is `a/q` or an integer,
    /// otherwise as fixed-point phases.
    fn point(&self) -> Result<Option<TorusPoint>> {
        let Some(v) = self.raw("x") else {
            return Ok(None);
        };
        let parts: Vec<&str> = v.split(',').map(str::trim).collect();
        let rats: Option<Vec<num_rational::Ratio<i64>>> =
            parts.iter().map(|s| s.parse().ok()).collect();
        if let Some(rats) = rats {
            let q = rats.iter().fold(1i64, |acc, r| acc.lcm(r.denom()));
            let nums: Vec<i64> = rats.iter().map(|r| r.numer() * (q / r.denom())).collect();
            return TorusPoint::rational(&nums, q as u64).map(Some);
        }
        // mixed: rational entries still become correctly rounded phases
        let phases: Vec<Phase> = parts
            .iter()
            .map(|s| {
                if let Ok(r) = s.parse::<BigRational>() {
                    return Ok(phase_from_big_rational(&r));
                }
                match s.parse::<f64>() {
                    Ok(t) if t.is_finite() => Ok(Phase::from_f64(t)),
                    _ => Err(invalid(format!("x: bad entry {s:?}"))),
                }
            })
            .collect::<Result<_>>()?;
        Ok(Some(TorusPoint::from_phases(phases)))
    }

    fn required_point(&self) -> Result<TorusPoint> {
        self.point()?.ok_or_else(|| Self::missing("x"))
    }

    fn exponents(&self, dim: usize) -> Result<ExponentVector> {
        match self.list::<u32>("m")? {
            Some(m) => {
                if m.len() != dim {
                    return Err(invalid(format!(
                        "m has {} entries but x has {dim}",
                        m.len()
                    )));
                }
                ExponentVector::new(m)
            }
            None => Ok(ExponentVector::standard(dim)),
        }
    }

    fn placement(&self) -> Result<Placement> {
        match self.raw("placement").unwrap_or("corner") {
            "corner" => Ok(Placement::Corner),
            "centered" => Ok(Placement::Centered),
            "random" => Ok(Placement::SeededRandom(self.seed())),
            other => Err(invalid(format!(
                "placement {other:?}: expected corner, centered or random"
            ))),
        }
    }

    fn seed(&self) -> u64 {
        self.0.seed
    }

    fn cap(&self) -> u64 {
        self.0.cap
    }

    fn params(&self) -> std::collections::BTreeMap<String, String> {
        self.0.effective_params()
    }

    fn cache(&self) -> Option<std::path::PathBuf> {
        self.raw("cache").map(std::path::PathBuf::from)
    }
}

fn fmt_vec<T: Display>(v: &[T]) -> String {
    let inner: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", inner.join(","))
}

fn check_nu(d: u32, nu: u32) -> Result<()> {
    if nu == 0 || nu > d {
        return Err(Error::precondition(format!(
            "nu = {nu} must lie in [1, d = {d}]"
        )));
    }
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn gauss(a: &Args) -> Result<Artifacts> {
    let r = gauss_magnitude_check(a.u64("p")?)?;
    let report = LemmaReport::new(
        "gauss_sum_magnitude",
        &a.params(),
        r.max_deviation,
        Some(r.tolerance),
        r.pass,
    )
    .with_details(&r);
    Ok(Artifacts::new(report))
}

fn monomial(a: &Args) -> Result<Artifacts> {
    let (d, p) = (a.u32("d")?, a.u64("p")?);
    if !is_prime(p) {
        return Err(Error::InvalidField(p));
    }
    let q = p
        .checked_pow(d)
        .ok_or_else(|| Error::precondition("p^d overflows 64 bits"))?;
    let numerators: Vec<u64> = match a.u64_opt("a")? {
        Some(x) => vec![x],
        None => (1..q).filter(|x| x % p != 0).collect(),
    };
    let terms = numerators.len() as u128 * q as u128;
    if terms > a.cap() as u128 {
        return Err(Error::ResourceLimit {
            entries: terms,
            cap: a.cap(),
        });
    }
    let expected = (p as f64).powi(d as i32 - 1);
    let sums: Vec<_> = numerators
        .par_iter()
        .map(|&x| monomial_complete_sum(d, p, x))
        .collect::<Result<_>>()?;
    let params = a.params();
    let mut t = CsvTable::new(&params, &["a", "re", "im", "expected", "rel_err"]);
    let mut worst = 0.0f64;
    for (&x, s) in numerators.iter().zip(&sums) {
        let rel = (s - num_complex::Complex64::new(expected, 0.0)).norm() / expected;
        worst = worst.max(rel);
        t.push(vec![
            x.to_string(),
            fmt_f64(s.re),
            fmt_f64(s.im),
            fmt_f64(expected),
            fmt_f64(rel),
        ]);
    }
    let report = LemmaReport::new(
        "monomial_complete_sum",
        &params,
        worst,
        Some(1e-6),
        worst <= 1e-6,
    );
    let mut art = Artifacts::new(report);
    art.csv.push(("monomial.csv", t));
    Ok(art)
}

fn weil(a: &Args) -> Result<Artifacts> {
    let f = a.list::<i64>("f")?.ok_or_else(|| Args::missing("f"))?;
    let r = weil_check(&f, a.u64("p")?)?;
    let report = LemmaReport::new("weil_bound", &a.params(), r.value, Some(r.bound), r.pass)
        .with_details(&r);
    Ok(Artifacts::new(report))
}

/// Closed forms known for the full-space moment.
fn moment_closed_form(d: u32, p: u64, nu: u32, include_zero: bool) -> Option<f64> {
    let pf = p as f64;
    let full = match (d, nu) {
        (_, 1) => pf.powi(d as i32 + 1),
        (2, 2) => 2.0 * pf.powi(4) - pf.powi(3),
        _ => return None,
    };
    Some(if include_zero {
        full
    } else {
        full - pf.powi(2 * nu as i32)
    })
}

fn moments(a: &Args) -> Result<Artifacts> {
    let (d, p, nu) = (a.u32("d")?, a.u64("p")?, a.u32("nu")?);
    check_nu(d, nu)?;
    let include_zero = a.parsed::<bool>("include-zero")?.unwrap_or(true);
    let table = cached_table(d, p, a.cap(), a.cache().as_deref())?;
    let value = table.moment(nu, include_zero);
    let closed = moment_closed_form(d, p, nu, include_zero);
    let rel = closed.map(|c| (value - c).abs() / c);
    let params = a.params();
    let mut t = CsvTable::new(&params, &["value", "closed_form", "rel_err"]);
    t.push(vec![
        fmt_f64(value),
        closed.map(fmt_f64).unwrap_or_default(),
        rel.map(fmt_f64).unwrap_or_default(),
    ]);
    let pass = rel.is_none_or(|r| r <= 1e-6);
    let mut art = Artifacts::new(LemmaReport::new(
        "complete_sum_moment",
        &params,
        value,
        closed,
        pass,
    ));
    art.csv.push(("moments.csv", t));
    Ok(art)
}

/// Box starts for the `i`-th random box, from its own ChaCha stream.
fn random_starts(seed: u64, i: u64, d: usize, p: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    (0..d).map(|_| rng.gen_range(0..p)).collect()
}

fn box_moments(a: &Args) -> Result<Artifacts> {
    let (d, p) = (a.u32("d")?, a.u64("p")?);
    let nu = a.u32_or("nu", 1)?;
    check_nu(d, nu)?;
    let side = match a.u64_opt("side")? {
        Some(s) => s,
        None => ((p as f64).powf(0.8).ceil() as u64).min(p),
    };
    let count = a.u64_or("boxes", 50)?;
    let table = cached_table(d, p, a.cap(), a.cache().as_deref())?;
    let params = a.params();
    let mut t = CsvTable::new(
        &params,
        &[
            "box",
            "starts",
            "side",
            "value",
            "main_term",
            "ratio",
            "in_range",
        ],
    );
    let mut good = 0u64;
    for i in 0..count {
        let b = DiscreteBox::new(random_starts(a.seed(), i, d as usize, p), side, p)?;
        let r = box_moment(&table, nu, &b)?;
        let ok = (0.5..=1.5).contains(&r.ratio);
        good += ok as u64;
        t.push(vec![
            i.to_string(),
            fmt_vec(b.starts()),
            side.to_string(),
            fmt_f64(r.value),
            fmt_f64(r.main_term),
            fmt_f64(r.ratio),
            ok.to_string(),
        ]);
    }
    let frac = if count == 0 {
        1.0
    } else {
        good as f64 / count as f64
    };
    let mut art = Artifacts::new(LemmaReport::new(
        "box_moment_main_term",
        &params,
        frac,
        Some(0.9),
        frac >= 0.9,
    ));
    art.csv.push(("box_moments.csv", t));
    Ok(art)
}

fn lp_set(
    a: &Args,
    d: u32,
    p: u64,
    gamma: f64,
) -> Result<(crate::complete::CompleteSumTable, LargeSumSet)> {
    let table = cached_table(d, p, a.cap(), a.cache().as_deref())?;
    let lp = LargeSumSet::from_table(&table, gamma);
    Ok((table, lp))
}

fn enumerate_lp(a: &Args) -> Result<Artifacts> {
    let (d, p, gamma) = (a.u32("d")?, a.u64("p")?, a.gamma()?);
    let (table, lp) = lp_set(a, d, p, gamma)?;
    let params = a.params();
    let mut t = CsvTable::new(&params, &["coefficients", "magnitude"]);
    for m in &lp.members {
        t.push(vec![
            fmt_vec(m.as_slice()),
            fmt_f64(table.get(m.as_slice())),
        ]);
    }
    let report = LemmaReport::new("large_value_set", &params, lp.density, None, true)
        .with_details(&json!({ "members": lp.len(), "density": lp.density }));
    let mut art = Artifacts::new(report);
    art.csv.push(("lp.csv", t));
    Ok(art)
}

fn orbit_count(a: &Args) -> Result<Artifacts> {
    let p = a.u64("p")?;
    let coeffs = a.u64_list("a")?.ok_or_else(|| Args::missing("a"))?;
    let params = a.params();
    if let Some(side) = a.u64_opt("side")? {
        let starts = a
            .u64_list("starts")?
            .unwrap_or_else(|| vec![0; coeffs.len()]);
        let b = DiscreteBox::new(starts, side, p)?;
        let r = orbit_in_box_count(&coeffs, p, &b)?;
        let report = LemmaReport::new(
            "orbit_box_density",
            &params,
            r.count as f64,
            Some(r.bound),
            r.pass,
        )
        .with_details(&r);
        return Ok(Artifacts::new(report));
    }
    if a.raw("starts").is_some() {
        return Err(invalid("starts needs side"));
    }
    // every origin box with L >= p^{3/4} ln p
    let pf = p as f64;
    let min_side = (pf.powf(0.75) * pf.ln()).ceil() as u64;
    let r = orbit_density_sweep(&coeffs, p, min_side)?;
    let report = LemmaReport::new(
        "orbit_box_density",
        &params,
        r.failures.len() as f64,
        Some(0.0),
        r.failures.is_empty(),
    )
    .with_details(&r);
    Ok(Artifacts::new(report))
}

fn box_density(a: &Args) -> Result<Artifacts> {
    let (d, p, gamma) = (a.u32("d")?, a.u64("p")?, a.gamma()?);
    let (_, lp) = lp_set(a, d, p, gamma)?;
    let params = a.params();
    if let Some(side) = a.u64_opt("side")? {
        let starts = a.u64_list("starts")?.unwrap_or_else(|| vec![0; d as usize]);
        let b = DiscreteBox::new(starts, side, p)?;
        let witness = box_density_check(&lp, &b)?;
        let report = LemmaReport::new(
            "large_value_box_density",
            &params,
            witness.is_some() as u8 as f64,
            Some(1.0),
            witness.is_some(),
        )
        .with_details(&json!({ "witness": witness }));
        return Ok(Artifacts::new(report));
    }
    let r = density_threshold(&lp)?;
    let report = LemmaReport::new(
        "large_value_box_density",
        &params,
        r.side.map_or(f64::NAN, |s| s as f64),
        Some(r.reference),
        true,
    )
    .with_details(&r);
    Ok(Artifacts::new(report))
}

fn amplify(a: &Args) -> Result<Artifacts> {
    let d = a.u32("d")?;
    let tau = a.tau(Some(d as u64 + 1))?;
    let gamma = a.gamma()?;
    let primes = match (a.u64_list("primes")?, a.u64_opt("p")?) {
        (Some(_), Some(_)) => return Err(invalid("give either p or primes")),
        (Some(ps), None) => ps,
        (None, Some(p)) => vec![p],
        (None, None) => smallest_feasible_primes(d, tau, gamma, a.u64_or("count", 3)? as usize)?,
    };
    let params = a.params();
    let mut t = CsvTable::new(
        &params,
        &["prime", "n", "anchor", "delta", "value", "bound", "pass"],
    );
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for p in primes {
        let plan = amplification_plan(p, tau, d, gamma)?;
        let field = PrimeField::new(p)?;
        let anchor = first_lp_member(&field, d, gamma).ok_or_else(|| Error::WitnessNotFound {
            level: 0,
            reason: format!("L_p is empty for p = {p}"),
        })?;
        for delta in axis_offsets(p, tau, d as usize) {
            let r = amplified_sum_check(&plan, &anchor, &delta)?;
            worst = worst.min(r.value / r.bound);
            pass &= r.pass;
            t.push(vec![
                p.to_string(),
                r.n.to_string(),
                fmt_vec(anchor.as_slice()),
                fmt_vec(&r.delta),
                fmt_f64(r.value),
                fmt_f64(r.bound),
                r.pass.to_string(),
            ]);
        }
    }
    let mut art = Artifacts::new(LemmaReport::new(
        "amplified_sum_lower_bound",
        &params,
        worst,
        Some(1.0),
        pass,
    ));
    art.csv.push(("amplify.csv", t));
    Ok(art)
}

fn amplify_mono(a: &Args) -> Result<Artifacts> {
    let (d, p) = (a.u32("d")?, a.u64("p")?);
    let x = a.u64_or("a", 1)?;
    let tau = a.tau(None)?;
    let n = a.u64_opt("N")?;
    let deltas = match a.rational("delta")? {
        Some(r) => vec![r],
        None => {
            let h = half_radius(p, tau);
            vec![h.clone(), -h]
        }
    };
    let params = a.params();
    let mut t = CsvTable::new(&params, &["n", "delta", "value", "bound", "pass"]);
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for delta in &deltas {
        let r = monomial_amplified_check(x, p, d, tau, delta, n)?;
        worst = worst.min(r.value / r.bound);
        pass &= r.pass;
        t.push(vec![
            r.n.to_string(),
            r.delta.clone(),
            fmt_f64(r.value),
            fmt_f64(r.bound),
            r.pass.to_string(),
        ]);
    }
    let mut art = Artifacts::new(LemmaReport::new(
        "monomial_amplified_lower_bound",
        &params,
        worst,
        Some(1.0),
        pass,
    ));
    art.csv.push(("amplify_mono.csv", t));
    Ok(art)
}

fn trace_table(
    params: &std::collections::BTreeMap<String, String>,
    trace: &crate::weyl::SumTrace,
) -> CsvTable {
    let mut t = CsvTable::new(params, &["N", "re", "im", "magnitude"]);
    for e in &trace.entries {
        t.push(vec![
            e.n.to_string(),
            fmt_f64(e.re),
            fmt_f64(e.im),
            fmt_f64(e.magnitude),
        ]);
    }
    t
}

fn weyl_trace(a: &Args) -> Result<Artifacts> {
    let x = a.required_point()?;
    let m = a.exponents(x.dim())?;
    let n_max = a.u64("N-max")?;
    let grid = match a.raw("grid").unwrap_or("linear") {
        "linear" => checkpoint_grid(n_max),
        "dyadic" => dyadic_grid(n_max),
        other => {
            return Err(invalid(format!(
                "grid {other:?}: expected linear or dyadic"
            )))
        }
    };
    let trace = weyl_sum_trace(&x, &m, &grid)?;
    let params = a.params();
    // trivial bound |S| <= N, checked with a little slack for rounding
    let pass = trace
        .entries
        .iter()
        .all(|e| e.magnitude <= e.n as f64 * (1.0 + 1e-12));
    let last = trace.entries.last().map_or(0.0, |e| e.magnitude);
    let mut art = Artifacts::new(LemmaReport::new(
        "weyl_sum_trace",
        &params,
        last,
        Some(n_max as f64),
        pass,
    ));
    art.csv.push(("trace.csv", trace_table(&params, &trace)));
    Ok(art)
}

fn mr_scan(a: &Args) -> Result<Artifacts> {
    let n_max = a.u64_or("N-max", 100_000)?;
    let points: Vec<TorusPoint> = match a.point()? {
        Some(x) => vec![x],
        None => {
            let d = a.u64_or("d", 2)? as usize;
            let samples = a.u64_or("samples", 100)?;
            (0..samples).map(|s| sample_point(a.seed(), s, d)).collect()
        }
    };
    if points.is_empty() {
        return Err(invalid("samples must be >= 1"));
    }
    let reports: Vec<_> = points
        .par_iter()
        .map(|x| mr_ratio_scan(x, n_max))
        .collect::<Result<_>>()?;
    let params = a.params();
    let mut t = CsvTable::new(&params, &["sample", "max_ratio", "argmax_N"]);
    for (i, r) in reports.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            fmt_f64(r.max_ratio),
            r.argmax_n.to_string(),
        ]);
    }
    let med = median(reports.iter().map(|r| r.max_ratio).collect());
    let mut art = Artifacts::new(LemmaReport::new(
        "menshov_rademacher_ratio",
        &params,
        med,
        Some(100.0),
        med.is_finite() && med < 100.0,
    ));
    art.csv.push(("mr_scan.csv", t));
    Ok(art)
}

fn sigma_scan(a: &Args) -> Result<Artifacts> {
    let x = a.required_point()?;
    let m = a.exponents(x.dim())?;
    let trace = weyl_sum_trace(&x, &m, &dyadic_grid(a.u64("N-max")?))?;
    let s = sigma_estimate(&trace)?;
    let params = a.params();
    let mut art = Artifacts::new(
        LemmaReport::new("growth_exponent", &params, s.value, None, true).with_details(&s),
    );
    art.csv.push(("trace.csv", trace_table(&params, &trace)));
    Ok(art)
}

fn exceptional(a: &Args) -> Result<Artifacts> {
    let x = a.required_point()?;
    let m = a.exponents(x.dim())?;
    let hits = exceptional_scan(&x, a.f64("alpha")?, &m, a.u64("N-max")?)?;
    let params = a.params();
    let mut t = CsvTable::new(&params, &["N"]);
    for n in &hits {
        t.push(vec![n.to_string()]);
    }
    let mut art = Artifacts::new(LemmaReport::new(
        "large_sum_checkpoints",
        &params,
        hits.len() as f64,
        None,
        true,
    ));
    art.csv.push(("exceptional.csv", t));
    Ok(art)
}

fn measure(a: &Args) -> Result<Artifacts> {
    let r = measure_estimate(
        a.u32("d")?,
        a.f64("alpha")?,
        a.u64("i")?,
        a.u64_or("samples", 10_000)?,
        a.seed(),
    )?;
    let report =
        LemmaReport::new("large_sum_measure", &a.params(), r.estimate, None, true).with_details(&r);
    Ok(Artifacts::new(report))
}

fn cantor_build(a: &Args) -> Result<Artifacts> {
    let d = a.u32("d")?;
    let tau = a.tau(None)?;
    let epsilon = a.f64_or("epsilon", 0.01)?;
    let primes = a
        .u64_list("primes")?
        .ok_or_else(|| Args::missing("primes"))?;
    let depth = a.u64("depth")? as usize;
    let run = cantor::large_sum_cantor(d, tau, epsilon, a.gamma()?, &primes, depth, a.cap())?;
    let params = a.params();

    let mut records = Vec::new();
    for (k, certs) in run.certificates.iter().enumerate() {
        for (b, c) in run.build.levels[k + 1].boxes.iter().zip(certs) {
            records.push(box_record(k + 1, b, Some(c)));
        }
    }
    let profile = dimension_profile(&run.build.schedule, run.depth_reached());
    let mut t = CsvTable::new(
        &params,
        &[
            "level",
            "prime",
            "delta",
            "ell",
            "cells_per_side",
            "boxes",
            "epsilon_effective",
            "dimension",
            "target",
        ],
    );
    let mut worst_gap = 0.0f64;
    for (s, dim) in run.levels.iter().zip(&profile) {
        let target = d as f64 * (run.kappa - s.epsilon_effective) / tau.to_f64();
        worst_gap = worst_gap.max((dim - target).abs());
        t.push(vec![
            s.level.to_string(),
            s.p.to_string(),
            s.delta.clone(),
            s.ell.clone(),
            s.cells_per_side.to_string(),
            run.build.levels[s.level].len().to_string(),
            fmt_f64(s.epsilon_effective),
            fmt_f64(*dim),
            fmt_f64(target),
        ]);
    }
    let value = profile.last().copied().unwrap_or(f64::NAN);
    let bound = run.levels.last().map_or(f64::NAN, |s| {
        d as f64 * (run.kappa - s.epsilon_effective) / tau.to_f64()
    });
    let pass = run.depth_reached() > 0 && run.all_certificates_pass() && worst_gap <= 1e-9;
    let report = LemmaReport::new(
        "cantor_large_sum_certificates",
        &params,
        value,
        Some(bound),
        pass,
    )
    .with_details(&json!({
        "depth_requested": depth,
        "depth_reached": run.depth_reached(),
        "certificates": run.certificates.iter().map(Vec::len).sum::<usize>(),
        "all_certificates_pass": run.all_certificates_pass(),
        "target_dimension": run.target_dimension(),
        "stopped": run.stopped.as_ref().map(|e| e.to_string()),
    }));
    let mut art = Artifacts::new(report);
    art.jsonl.push(("boxes.jsonl", records));
    art.csv.push(("levels.csv", t));
    art.stopped = run.stopped;
    Ok(art)
}

fn cantor_dim(a: &Args) -> Result<Artifacts> {
    let d = a.u64_or("d", 2)? as usize;
    let r = a.u64_or("r", 4)?;
    let cells = a.u64_or("cells", 2)?;
    let depth = a.u64_or("depth", 4)? as usize;
    let schedule = CantorSchedule::geometric(d, r, cells, depth)?;
    let build = build_cantor(&schedule, depth, a.placement()?)?;
    let formula = dimension_formula(&schedule, depth)?;
    let scales = match a.u64_list("scales")? {
        Some(s) => s,
        None => (1..=depth as u32)
            .map(|k| r.checked_pow(k).ok_or_else(|| invalid("r^depth overflows")))
            .collect::<Result<_>>()?,
    };
    let leaves = &build.last().boxes;
    let bc = box_counting_dimension(leaves, &scales)?;
    let params = a.params();
    let mut t = CsvTable::new(&params, &["scale", "count"]);
    for (s, c) in bc.scales.iter().zip(&bc.counts) {
        t.push(vec![s.to_string(), c.to_string()]);
    }
    let pass = audit(&build) && (bc.slope - formula).abs() <= 0.15;
    let report = LemmaReport::new("cantor_dimension", &params, bc.slope, Some(formula), pass)
        .with_details(&json!({ "dimension_formula": formula, "box_counting": bc }));
    let mut art = Artifacts::new(report);
    art.csv.push(("box_counts.csv", t));
    art.jsonl.push((
        "boxes.jsonl",
        leaves.iter().map(|b| box_record(depth, b, None)).collect(),
    ));
    Ok(art)
}

fn pattern_demo(a: &Args) -> Result<Artifacts> {
    let d = a.u64_or("d", 2)? as usize;
    let side = a.rational("a")?.unwrap_or_else(BigRational::one);
    let b = a.rational("b")?.ok_or_else(|| Args::missing("b"))?;
    let c = a.rational("c")?.ok_or_else(|| Args::missing("c"))?;
    if side.is_negative() || side > BigRational::one() {
        return Err(invalid("a must lie in (0, 1]"));
    }
    let spec = PatternSpec::new(side.clone(), b, c, a.placement()?)?;
    let parent = CantorBox {
        corner: vec![BigRational::zero(); d],
        side,
    };
    let boxes = make_pattern(&parent, &spec)?;
    let expected = (spec.cells_per_side() as f64).powi(d as i32);
    let pass = boxes.len() as f64 == expected
        && pairwise_disjoint(&boxes)
        && boxes.iter().all(|b| parent.contains_box(b));
    let report = LemmaReport::new(
        "pattern_layout",
        &a.params(),
        boxes.len() as f64,
        Some(expected),
        pass,
    );
    let mut art = Artifacts::new(report);
    art.jsonl.push((
        "boxes.jsonl",
        boxes.iter().map(|b| box_record(1, b, None)).collect(),
    ));
    Ok(art)
}

fn discrepancy(a: &Args) -> Result<Artifacts> {
    let x = a.required_point()?;
    let m = a.exponents(x.dim())?;
    let grid = match (a.u64_opt("N")?, a.u64_opt("N-max")?) {
        (Some(n), None) => vec![n],
        (None, Some(n_max)) => checkpoint_grid(n_max),
        _ => return Err(invalid("give exactly one of N and N-max")),
    };
    let rows = discrepancy_rows(&x, &m, &grid)?;
    let params = a.params();
    let mut t = CsvTable::new(&params, &["N", "D_N", "D*_N", "|S|", "ratio"]);
    let mut pass = true;
    for r in &rows {
        pass &= r.sum_abs <= std::f64::consts::TAU * r.star_discrepancy + 1e-6;
        t.push(vec![
            r.n.to_string(),
            fmt_f64(r.discrepancy),
            fmt_f64(r.star_discrepancy),
            fmt_f64(r.sum_abs),
            fmt_f64(r.ratio),
        ]);
    }
    let last = rows.last().expect("nonempty grid");
    let mut art = Artifacts::new(LemmaReport::new(
        "discrepancy_profile",
        &params,
        last.discrepancy,
        None,
        pass,
    ));
    art.csv.push(("discrepancy.csv", t));
    Ok(art)
}

/// Random `(x, N)` pair number `s`: `x` uniform on the torus, `N` uniform in `1..=n_max`.
fn koksma_sample(seed: u64, s: u64, d: usize, n_max: u64) -> (TorusPoint, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    let x = TorusPoint::from_phases((0..d).map(|_| Phase(rng.gen())).collect());
    (x, rng.gen_range(1..=n_max))
}

fn koksma(a: &Args) -> Result<Artifacts> {
    let params = a.params();
    let cases: Vec<(TorusPoint, u64)> = match a.point()? {
        Some(x) => vec![(x, a.u64("N")?)],
        None => {
            if a.raw("N").is_some() {
                return Err(invalid("N needs x; use N-max for random samples"));
            }
            let d = a.u64_or("d", 2)? as usize;
            let n_max = a.u64_or("N-max", 1000)?;
            if n_max == 0 || d == 0 {
                return Err(invalid("d and N-max must be >= 1"));
            }
            (0..a.u64_or("samples", 1000)?)
                .map(|s| koksma_sample(a.seed(), s, d, n_max))
                .collect()
        }
    };
    let reports: Vec<_> = cases
        .par_iter()
        .map(|(x, n)| koksma_relation_check(x, *n, &a.exponents(x.dim())?))
        .collect::<Result<_>>()?;
    let mut t = CsvTable::new(&params, &["sample", "N", "|S|", "D*_N", "bound", "pass"]);
    let mut worst = 0.0f64;
    for (i, r) in reports.iter().enumerate() {
        worst = worst.max(r.sum_abs / r.bound.max(f64::MIN_POSITIVE));
        t.push(vec![
            i.to_string(),
            r.n.to_string(),
            fmt_f64(r.sum_abs),
            fmt_f64(r.star_discrepancy),
            fmt_f64(r.bound),
            r.pass.to_string(),
        ]);
    }
    let pass = reports.iter().all(|r| r.pass);
    let mut art = Artifacts::new(LemmaReport::new(
        "koksma_relation",
        &params,
        worst,
        Some(1.0),
        pass,
    ));
    art.csv.push(("koksma.csv", t));
    Ok(art)
}

fn discrepancy_scan_cmd(a: &Args) -> Result<Artifacts> {
    let x = a.required_point()?;
    let m = a.exponents(x.dim())?;
    let hits = discrepancy_scan(&x, a.f64("alpha")?, &m, a.u64("N-max")?)?;
    let params = a.params();
    let mut t = CsvTable::new(&params, &["N"]);
    for n in &hits {
        t.push(vec![n.to_string()]);
    }
    let mut art = Artifacts::new(LemmaReport::new(
        "large_discrepancy_checkpoints",
        &params,
        hits.len() as f64,
        None,
        true,
    ));
    art.csv.push(("discrepancy_scan.csv", t));
    Ok(art)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn cfg(cmd: &str, kv: &[(&str, &str)]) -> ExperimentConfig {
        let params: BTreeMap<String, String> = kv
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        ExperimentConfig::new(cmd, params).unwrap()
    }

    #[test]
    fn moments_example() {
        let art = dispatch(&cfg("moments", &[("d", "2"), ("p", "3"), ("nu", "2")])).unwrap();
        assert_eq!(art.report.value, 135.0);
        assert!(art.report.pass);
    }

    #[test]
    fn rational_points_are_exact() {
        let c = cfg("weyl-trace", &[("x", "1/3, 2/7"), ("N-max", "21")]);
        let x = Args(&c).point().unwrap().unwrap();
        assert_eq!(x.rational_part().unwrap().1, 21);
        let c = cfg("weyl-trace", &[("x", "1/3, 0.1"), ("N-max", "21")]);
        let x = Args(&c).point().unwrap().unwrap();
        assert!(x.rational_part().is_none());
        assert_eq!(x.coordinates()[1], Phase::from_f64(0.1));
        let c = cfg("weyl-trace", &[("x", "1/3, zz"), ("N-max", "21")]);
        assert!(Args(&c).point().is_err());
    }

    #[test]
    fn missing_and_bad_values() {
        for (cmd, kv) in [
            ("gauss-check", vec![]),
            ("moments", vec![("d", "2"), ("p", "x"), ("nu", "1")]),
            (
                "pattern-demo",
                vec![("b", "1/2"), ("c", "1/4"), ("placement", "sideways")],
            ),
        ] {
            let e = dispatch(&cfg(cmd, &kv)).err().unwrap();
            assert!(matches!(e, Error::InvalidConfig(_)), "{cmd}: {e}");
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn koksma_samples_reproducible() {
        let (x1, n1) = koksma_sample(5, 3, 2, 1000);
        let (x2, n2) = koksma_sample(5, 3, 2, 1000);
        assert_eq!((x1.coordinates(), n1), (x2.coordinates(), n2));
        assert!((1..=1000).contains(&n1));
    }
}
