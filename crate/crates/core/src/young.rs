//! Young functions of power, log-bump and loglog-bump type, their
//! complementary functions, inverses, and the `B_q` integrability test.

use std::f64::consts::{E, LN_2};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::{illinois, log_grid, simpson};

const ROOT_MAX_ITER: usize = 400;

/// A convex increasing `A: [0,∞) → [0,∞)` with `A(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct YoungFunction {
    family: Family,
}

#[derive(Clone, Debug, PartialEq)]
enum Family {
    /// `t^p`
    Power { p: f64 },
    /// `t^p log(e+t)^{p-1+δ}`; `halved` uses `δ/2`.
    Log { p: f64, delta: f64, halved: bool },
    /// `t^p log(e+t)^{p-1} loglog(e^e+t)^{p-1+δ}`; `halved` uses `δ/2`.
    LogLog { p: f64, delta: f64, halved: bool },
    /// Piecewise linear through the origin and the knots, continued past
    /// the last knot by a power with matching slope.
    Custom(Table),
    /// `sup_t (s t − A(t))`.
    Complement(Box<YoungFunction>),
}

#[derive(Clone, Debug, PartialEq)]
struct Table {
    t: Vec<f64>,
    a: Vec<f64>,
    /// Exponent of the power tail beyond the last knot.
    tail: f64,
}

/// Leading-order shape `t^r (log t)^α (log log t)^β` at infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Shape {
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl YoungFunction {
    pub fn power(p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Self {
            family: Family::Power { p },
        })
    }

    pub fn log_bump(p: f64, delta: f64) -> Result<Self> {
        check_p(p)?;
        check_delta(delta)?;
        Ok(Self {
            family: Family::Log {
                p,
                delta,
                halved: false,
            },
        })
    }

    pub fn loglog_bump(p: f64, delta: f64) -> Result<Self> {
        check_p(p)?;
        check_delta(delta)?;
        Ok(Self {
            family: Family::LogLog {
                p,
                delta,
                halved: false,
            },
        })
    }

    /// The log bump with exponent `p` and half the excess `δ/2`.
    pub fn halved_log_bump(p: f64, delta: f64) -> Result<Self> {
        check_p(p)?;
        check_delta(delta)?;
        Ok(Self {
            family: Family::Log {
                p,
                delta,
                halved: true,
            },
        })
    }

    pub fn halved_loglog_bump(p: f64, delta: f64) -> Result<Self> {
        check_p(p)?;
        check_delta(delta)?;
        Ok(Self {
            family: Family::LogLog {
                p,
                delta,
                halved: true,
            },
        })
    }

    /// Tabulated convex function from knots `(t_i, A(t_i))`, `t_i > 0`
    /// strictly increasing, with non-decreasing chord slopes.
    pub fn custom(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidYoung("custom table needs at least one knot".into()));
        }
        let mut prev = (0.0, 0.0);
        let mut prev_slope = 0.0;
        for &(t, a) in knots {
            if !(t.is_finite() && a.is_finite() && t > prev.0 && a > prev.1) {
                return Err(Error::InvalidYoung(format!(
                    "knot ({t}, {a}) must increase strictly in both coordinates"
                )));
            }
            let slope = (a - prev.1) / (t - prev.0);
            if slope < prev_slope * (1.0 - 1e-12) {
                return Err(Error::InvalidYoung(format!("table is not convex at t = {t}")));
            }
            prev = (t, a);
            prev_slope = slope;
        }
        let (tn, an) = prev;
        let tail = (tn * prev_slope / an).max(1.0);
        Ok(Self {
            family: Family::Custom(Table {
                t: knots.iter().map(|k| k.0).collect(),
                a: knots.iter().map(|k| k.1).collect(),
                tail,
            }),
        })
    }

    /// The complementary Young function `Ā`.
    pub fn complement(&self) -> Self {
        match &self.family {
            Family::Complement(inner) => (**inner).clone(),
            _ => Self {
                family: Family::Complement(Box::new(self.clone())),
            },
        }
    }

    /// Parse `power:p=2`, `logbump:p=2,delta=1`, `loglogbump:p=2,delta=3`,
    /// `b0:p=2,delta=1` (log bump with `δ/2`), `b0loglog:p=2,delta=3`,
    /// `custom:knots=1/1;2/4;4/16`, or `complement:<spec>`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if let Some(inner) = spec.strip_prefix("complement:") {
            return Ok(Self::parse(inner)?.complement());
        }
        let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
        let mut p = None;
        let mut delta = None;
        let mut knots = None;
        for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::spec(spec, format!("expected key=value, got `{kv}`")))?;
            match k.trim() {
                "p" => p = Some(parse_num(spec, v)?),
                "delta" => delta = Some(parse_num(spec, v)?),
                "knots" => knots = Some(parse_knots(spec, v)?),
                other => return Err(Error::spec(spec, format!("unknown parameter `{other}`"))),
            }
        }
        let need_p = || p.ok_or_else(|| Error::spec(spec, "missing p"));
        let need_delta = || delta.ok_or_else(|| Error::spec(spec, "missing delta"));
        let wrap = |r: Result<Self>| r.map_err(|e| Error::spec(spec, e.to_string()));
        match name.trim() {
            "power" => wrap(Self::power(need_p()?)),
            "logbump" => wrap(Self::log_bump(need_p()?, need_delta()?)),
            "loglogbump" => wrap(Self::loglog_bump(need_p()?, need_delta()?)),
            "b0" => wrap(Self::halved_log_bump(need_p()?, need_delta()?)),
            "b0loglog" => wrap(Self::halved_loglog_bump(need_p()?, need_delta()?)),
            "custom" => wrap(Self::custom(
                &knots.ok_or_else(|| Error::spec(spec, "missing knots"))?,
            )),
            other => Err(Error::spec(spec, format!("unknown family `{other}`"))),
        }
    }

    /// `A(t)`; `t` must be a nonnegative number.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("Young function evaluated at {t}")));
        }
        Ok(self.value(t))
    }

    /// `A(t)` for `t ≥ 0` without argument checks.
    pub fn value(&self, t: f64) -> f64 {
        match &self.family {
            Family::Power { p } => t.powf(*p),
            Family::Log { p, delta, halved } => {
                let k = p - 1.0 + excess(*delta, *halved);
                t.powf(*p) * (E + t).ln().powf(k)
            }
            Family::LogLog { p, delta, halved } => {
                let (a, b) = (p - 1.0, p - 1.0 + excess(*delta, *halved));
                t.powf(*p) * (E + t).ln().powf(a) * loglog(t).powf(b)
            }
            Family::Custom(table) => table.value(t),
            Family::Complement(inner) => inner.conjugate_value(t),
        }
    }

    /// Right derivative `A'(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        match &self.family {
            Family::Power { p } => p * t.powf(p - 1.0),
            Family::Log { p, delta, halved } => {
                let k = p - 1.0 + excess(*delta, *halved);
                let l = (E + t).ln();
                t.powf(p - 1.0) * l.powf(k) * (p + t * k / (l * (E + t)))
            }
            Family::LogLog { p, delta, halved } => {
                let (a, b) = (p - 1.0, p - 1.0 + excess(*delta, *halved));
                let l = (E + t).ln();
                let ee = E.exp();
                let m = (ee + t).ln();
                let g = m.ln();
                t.powf(p - 1.0)
                    * l.powf(a)
                    * g.powf(b)
                    * (p + t * a / (l * (E + t)) + t * b / (g * m * (ee + t)))
            }
            Family::Custom(table) => table.derivative(t),
            Family::Complement(inner) => inner.derivative_inverse(t),
        }
    }

    /// `A⁻¹(s)`: the `t ≥ 0` with `A(t) = s` (the largest such `t` where
    /// `A` is flat). Returns `+∞` for `s = +∞`.
    pub fn inverse(&self, s: f64) -> f64 {
        if s <= 0.0 || s.is_nan() {
            return 0.0;
        }
        if s.is_infinite() {
            return f64::INFINITY;
        }
        if let Family::Power { p } = self.family {
            return s.powf(1.0 / p);
        }
        let g = self.growth_exponent();
        // bracket in x = log t so the endpoints are exactly what the solver sees
        let at = |x: f64| self.value(x.exp());
        let mut hi = s.max(2.0 * s.powf(1.0 / g)).ln();
        while at(hi) < s {
            hi += LN_2;
        }
        let mut lo = hi;
        while at(lo) > s {
            lo -= LN_2;
        }
        if lo == hi {
            return hi.exp();
        }
        let x = illinois(|x| (at(x) - s) / s, lo, hi, 1e-15, ROOT_MAX_ITER);
        refine_inverse(self, s, x.exp())
    }

    /// `Ā(s) = sup_{t>0} (s t − A(t))`.
    pub fn complementary_eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("complementary function evaluated at {s}")));
        }
        Ok(self.conjugate_value(s))
    }

    fn conjugate_value(&self, s: f64) -> f64 {
        match &self.family {
            Family::Complement(inner) => inner.value(s),
            Family::Custom(table) => table.conjugate(s),
            _ => {
                let t = self.derivative_inverse(s);
                if t.is_infinite() {
                    return f64::INFINITY;
                }
                (s * t - self.value(t)).max(0.0)
            }
        }
    }

    /// The maximizer `t` of `s t − A(t)`, i.e. `(A')⁻¹(s)`; 0 when
    /// `s ≤ A'(0)` and `+∞` when `s` exceeds `sup A'`.
    fn derivative_inverse(&self, s: f64) -> f64 {
        match &self.family {
            Family::Complement(inner) => return inner.derivative(s),
            Family::Custom(table) => return table.derivative_inverse(s),
            Family::Power { p } if *p == 1.0 => {
                return if s <= 1.0 { 0.0 } else { f64::INFINITY };
            }
            _ => {}
        }
        if s <= self.derivative(0.0) {
            return 0.0;
        }
        let g = self.growth_exponent();
        let guess = if g > 1.0 {
            (s / g).powf(1.0 / (g - 1.0)).clamp(1e-300, 1e300)
        } else {
            1.0
        };
        let slope = |x: f64| self.derivative(x.exp());
        let (mut lo, mut hi) = (guess.ln(), guess.ln());
        while slope(hi) < s {
            hi += LN_2;
            if hi > 690.0 {
                return f64::INFINITY;
            }
        }
        while slope(lo) > s && lo > -690.0 {
            lo -= LN_2;
        }
        if lo == hi {
            return lo.exp();
        }
        illinois(|x| slope(x) - s, lo, hi, 1e-15, ROOT_MAX_ITER).exp()
    }

    /// Lower bound on the growth exponent, used to bracket roots.
    fn growth_exponent(&self) -> f64 {
        match &self.family {
            Family::Power { p } | Family::Log { p, .. } | Family::LogLog { p, .. } => *p,
            Family::Custom(table) => table.tail,
            Family::Complement(inner) => {
                let r = inner.growth_exponent();
                if r > 1.0 {
                    r / (r - 1.0)
                } else {
                    2.0
                }
            }
        }
    }

    /// Asymptotic shape at infinity when known in closed form.
    pub fn shape(&self) -> Option<Shape> {
        match &self.family {
            Family::Power { p } => Some(Shape {
                r: *p,
                alpha: 0.0,
                beta: 0.0,
            }),
            Family::Log { p, delta, halved } => Some(Shape {
                r: *p,
                alpha: p - 1.0 + excess(*delta, *halved),
                beta: 0.0,
            }),
            Family::LogLog { p, delta, halved } => Some(Shape {
                r: *p,
                alpha: p - 1.0,
                beta: p - 1.0 + excess(*delta, *halved),
            }),
            Family::Custom(_) => None,
            Family::Complement(inner) => {
                let s = inner.shape()?;
                if s.r <= 1.0 {
                    return None;
                }
                let rc = s.r / (s.r - 1.0);
                Some(Shape {
                    r: rc,
                    alpha: -s.alpha * rc / s.r,
                    beta: -s.beta * rc / s.r,
                })
            }
        }
    }

    pub fn is_power(&self) -> bool {
        matches!(self.family, Family::Power { .. })
    }

    /// Exponent `p` of a power function.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.family {
            Family::Power { p } => Some(p),
            _ => None,
        }
    }

    /// Check convexity and strict increase on a log grid: consecutive chord
    /// slopes must not decrease beyond relative `1e-9`.
    pub fn is_convex_on(&self, lo: f64, hi: f64, n: usize) -> bool {
        let mut ts = vec![0.0];
        ts.extend(log_grid(lo, hi, n));
        let vals: Vec<f64> = ts.iter().map(|&t| self.value(t)).collect();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..ts.len() {
            let slope = (vals[k] - vals[k - 1]) / (ts[k] - ts[k - 1]);
            if !(vals[k] >= vals[k - 1]) || slope < prev - 1e-9 * prev.abs() {
                return false;
            }
            prev = slope;
        }
        true
    }

    /// `max A(2t)/A(t)` over a log grid of positive `t`.
    pub fn doubling_constant(&self, lo: f64, hi: f64, n: usize) -> f64 {
        log_grid(lo, hi, n)
            .into_iter()
            .map(|t| self.value(2.0 * t) / self.value(t))
            .filter(|r| r.is_finite())
            .fold(0.0, f64::max)
    }

    /// Classify `∫_c^∞ A(t)/t^q dt/t` (the `B_q` condition).
    pub fn bp_check(&self, q: f64, cutoff: f64) -> Result<BpVerdict> {
        if !(q > 1.0) {
            return Err(Error::Domain(format!("B_q test needs q > 1, got {q}")));
        }
        if !(cutoff >= E) {
            return Err(Error::Domain(format!("B_q cutoff must be at least e, got {cutoff}")));
        }
        let integrand = |u: f64| {
            let t = u.exp();
            self.value(t) * (-q * u).exp()
        };
        let integral = simpson(integrand, 1.0, cutoff.ln(), 4000);
        let integral_doubled = simpson(integrand, 1.0, 2.0 * cutoff.ln(), 8000);
        // d log(A/t^q) / d log t and the same against log log t, measured
        // over the last four octaves below the cutoff.
        let (t0, t1) = (cutoff / 16.0, cutoff);
        let log_g = |t: f64| (self.value(t) / t.powf(q)).ln();
        let dg = log_g(t1) - log_g(t0);
        let tail_slope = dg / (t1.ln() - t0.ln());
        let log_slope = dg / (t1.ln().ln() - t0.ln().ln());
        let numeric = if tail_slope <= -BP_SLOPE_THRESHOLD {
            BpClass::Convergent
        } else if tail_slope >= BP_SLOPE_THRESHOLD {
            BpClass::Divergent
        } else if log_slope <= -1.0 - BP_SLOPE_THRESHOLD {
            BpClass::Convergent
        } else if log_slope >= -1.0 + BP_SLOPE_THRESHOLD {
            BpClass::Divergent
        } else {
            BpClass::Indeterminate
        };
        let (classification, analytic) = match self.shape() {
            Some(shape) => (classify_shape(shape, q), true),
            None => (numeric, false),
        };
        Ok(BpVerdict {
            exponent: q,
            classification,
            numeric_classification: numeric,
            tail_slope,
            log_slope,
            integral,
            integral_doubled,
            analytic,
        })
    }
}

/// Slope magnitude below which the numeric `B_q` test declines to decide.
pub const BP_SLOPE_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BpClass {
    Convergent,
    Divergent,
    Indeterminate,
}

/// Outcome of [`YoungFunction::bp_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BpVerdict {
    pub exponent: f64,
    pub classification: BpClass,
    /// What the tail-slope estimate alone says.
    pub numeric_classification: BpClass,
    /// `d log(A(t)/t^q) / d log t` near the cutoff.
    pub tail_slope: f64,
    /// `d log(A(t)/t^q) / d log log t` near the cutoff.
    pub log_slope: f64,
    /// `∫_e^{cutoff} A(t) t^{-q} dt/t`.
    pub integral: f64,
    /// Same integral up to `cutoff²`.
    pub integral_doubled: f64,
    pub analytic: bool,
}

fn classify_shape(s: Shape, q: f64) -> BpClass {
    let tol = 1e-12;
    if s.r < q - tol {
        BpClass::Convergent
    } else if s.r > q + tol {
        BpClass::Divergent
    } else if s.alpha < -1.0 - tol {
        BpClass::Convergent
    } else if s.alpha > -1.0 + tol {
        BpClass::Divergent
    } else if s.beta < -1.0 - tol {
        BpClass::Convergent
    } else {
        BpClass::Divergent
    }
}

/// One step of Newton-free polishing: move to the closer bracketing float.
fn refine_inverse(a: &YoungFunction, s: f64, t: f64) -> f64 {
    let up = next_up(t);
    if (a.value(up) - s).abs() < (a.value(t) - s).abs() {
        up
    } else {
        t
    }
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

fn excess(delta: f64, halved: bool) -> f64 {
    if halved {
        0.5 * delta
    } else {
        delta
    }
}

fn loglog(t: f64) -> f64 {
    (E.exp() + t).ln().ln()
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidYoung(format!("exponent p = {p} must be finite and >= 1")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidYoung(format!("delta = {delta} must be finite and >= 0")))
    }
}

fn parse_num(spec: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| Error::spec(spec, format!("`{v}` is not a number")))
}

fn parse_knots(spec: &str, v: &str) -> Result<Vec<(f64, f64)>> {
    v.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (t, a) = pair
                .split_once('/')
                .ok_or_else(|| Error::spec(spec, format!("knot `{pair}` must be t/A")))?;
            Ok((parse_num(spec, t)?, parse_num(spec, a)?))
        })
        .collect()
}

impl Table {
    fn value(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t >= self.t[n - 1] {
            return self.a[n - 1] * (t / self.t[n - 1]).powf(self.tail);
        }
        let k = self.t.partition_point(|&x| x <= t);
        let (t0, a0) = if k == 0 { (0.0, 0.0) } else { (self.t[k - 1], self.a[k - 1]) };
        a0 + (self.a[k] - a0) * (t - t0) / (self.t[k] - t0)
    }

    fn derivative(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t >= self.t[n - 1] {
            return self.tail * self.a[n - 1] / self.t[n - 1] * (t / self.t[n - 1]).powf(self.tail - 1.0);
        }
        let k = self.t.partition_point(|&x| x <= t);
        let (t0, a0) = if k == 0 { (0.0, 0.0) } else { (self.t[k - 1], self.a[k - 1]) };
        (self.a[k] - a0) / (self.t[k] - t0)
    }

    /// Largest maximizer of `s t − A(t)`.
    fn derivative_inverse(&self, s: f64) -> f64 {
        let n = self.t.len();
        let last_slope = self.derivative(self.t[n - 1]);
        if s > last_slope {
            if self.tail <= 1.0 {
                return f64::INFINITY;
            }
            let c = self.tail * self.a[n - 1] / self.t[n - 1];
            return self.t[n - 1] * (s / c).powf(1.0 / (self.tail - 1.0));
        }
        // the maximizer is the last knot whose incoming slope is <= s
        let mut best = 0.0;
        let mut t0 = 0.0;
        let mut a0 = 0.0;
        for k in 0..n {
            let slope = (self.a[k] - a0) / (self.t[k] - t0);
            if slope <= s {
                best = self.t[k];
            }
            t0 = self.t[k];
            a0 = self.a[k];
        }
        best
    }

    fn conjugate(&self, s: f64) -> f64 {
        let t = self.derivative_inverse(s);
        if t.is_infinite() {
            return f64::INFINITY;
        }
        (s * t - self.value(t)).max(0.0)
    }
}

impl fmt::Display for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Power { p } => write!(f, "power:p={p}"),
            Family::Log { p, delta, halved } => {
                let name = if *halved { "b0" } else { "logbump" };
                write!(f, "{name}:p={p},delta={delta}")
            }
            Family::LogLog { p, delta, halved } => {
                let name = if *halved { "b0loglog" } else { "loglogbump" };
                write!(f, "{name}:p={p},delta={delta}")
            }
            Family::Custom(table) => {
                write!(f, "custom:knots=")?;
                for (k, (t, a)) in table.t.iter().zip(&table.a).enumerate() {
                    if k > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{t}/{a}")?;
                }
                Ok(())
            }
            Family::Complement(inner) => write!(f, "complement:{inner}"),
        }
    }
}

impl Serialize for YoungFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl std::str::FromStr for YoungFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Conjugate exponent `p' = p/(p-1)`.
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eval_examples() {
        let pw = YoungFunction::power(2.0).unwrap();
        assert_eq!(pw.eval(3.0).unwrap(), 9.0);
        let lb = YoungFunction::log_bump(2.0, 1.0).unwrap();
        assert_eq!(lb.eval(0.0).unwrap(), 0.0);
        assert_relative_eq!(lb.eval(1.0).unwrap(), (E + 1.0).ln().powi(2), max_relative = 1e-15);
        assert!(matches!(pw.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn inverse_examples() {
        let pw = YoungFunction::power(2.0).unwrap();
        assert_eq!(pw.inverse(9.0), 3.0);
        let lb = YoungFunction::log_bump(2.0, 1.0).unwrap();
        assert_eq!(lb.inverse(0.0), 0.0);
        let t = lb.inverse(1.0);
        assert_relative_eq!(lb.value(t), 1.0, max_relative = 1e-12);
        // independent bisection oracle on t^2 log(e+t)^2 = 1
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid * (E + mid).ln().powi(2) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_relative_eq!(t, lo, max_relative = 1e-12);
    }

    #[test]
    fn complement_of_square_is_quarter_square() {
        let pw = YoungFunction::power(2.0).unwrap();
        for s in [0.0, 0.1, 1.0, 3.0, 1e4] {
            assert_relative_eq!(pw.complementary_eval(s).unwrap(), s * s / 4.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn complement_of_logbump_matches_shape() {
        let lb = YoungFunction::log_bump(2.0, 1.0).unwrap();
        let ratios: Vec<f64> = log_grid(1e3, 1e12, 30)
            .into_iter()
            .map(|s| lb.complementary_eval(s).unwrap() / (s * s / (E + s).ln().powi(2)))
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(lo > 0.05 && hi < 1.0, "ratio range [{lo}, {hi}]");
    }

    #[test]
    fn complement_by_brute_force_sup() {
        let lb = YoungFunction::loglog_bump(2.0, 3.0).unwrap();
        for s in [0.5, 2.0, 40.0] {
            let brute = (1..200_000)
                .map(|k| {
                    let t = k as f64 * 1e-4;
                    s * t - lb.value(t)
                })
                .fold(0.0f64, f64::max);
            assert_relative_eq!(lb.complementary_eval(s).unwrap(), brute, max_relative = 1e-6);
        }
    }

    #[test]
    fn complement_is_an_involution() {
        let lb = YoungFunction::log_bump(3.0, 0.5).unwrap();
        assert_eq!(lb.complement().complement(), lb);
    }

    #[test]
    fn power_one_complement_is_indicator_type() {
        let one = YoungFunction::power(1.0).unwrap();
        let c = one.complement();
        assert_eq!(c.value(0.5), 0.0);
        assert_eq!(c.value(1.0), 0.0);
        assert!(c.value(1.5).is_infinite());
        assert_relative_eq!(c.inverse(3.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn custom_table_interpolates_and_extends() {
        let a = YoungFunction::custom(&[(1.0, 1.0), (2.0, 4.0), (4.0, 16.0)]).unwrap();
        assert_eq!(a.value(0.5), 0.5);
        assert_eq!(a.value(1.5), 2.5);
        // tail exponent = 4 * 6 / 16 = 1.5
        assert_relative_eq!(a.value(16.0), 16.0 * 4f64.powf(1.5), max_relative = 1e-12);
        assert!(a.is_convex_on(1e-3, 1e3, 200));
        assert!(YoungFunction::custom(&[(1.0, 1.0), (2.0, 3.0)]).is_ok());
        assert!(YoungFunction::custom(&[(1.0, 4.0), (2.0, 5.0)]).is_err());
    }

    #[test]
    fn custom_complement_matches_brute_force() {
        let a = YoungFunction::custom(&[(1.0, 1.0), (2.0, 4.0), (4.0, 16.0)]).unwrap();
        for s in [0.5, 2.0, 5.0, 7.0, 30.0] {
            let brute = (0..400_000)
                .map(|k| {
                    let t = k as f64 * 5e-4;
                    s * t - a.value(t)
                })
                .fold(0.0f64, f64::max);
            let exact = a.complementary_eval(s).unwrap();
            assert!((exact - brute).abs() <= 1e-6 * exact.max(1.0), "{s}: {exact} vs {brute}");
        }
    }

    #[test]
    fn spec_strings_roundtrip() {
        for s in [
            "power:p=2",
            "logbump:p=2,delta=1",
            "loglogbump:p=2,delta=3",
            "b0:p=2,delta=1",
            "b0loglog:p=1.5,delta=2",
            "custom:knots=1/1;2/4;4/16",
            "complement:logbump:p=3,delta=0.5",
        ] {
            let a = YoungFunction::parse(s).unwrap();
            assert_eq!(a.to_string(), s);
        }
        assert!(YoungFunction::parse("logbump:p=2").is_err());
        assert!(YoungFunction::parse("wiggle:p=2").is_err());
        assert!(YoungFunction::parse("power:p=0.5").is_err());
        assert!(YoungFunction::parse("logbump:p=2,delta=-1").is_err());
    }

    #[test]
    fn b0_uses_half_delta() {
        let b0 = YoungFunction::parse("b0:p=2,delta=1").unwrap();
        let half = YoungFunction::log_bump(2.0, 0.5).unwrap();
        for t in [0.1, 1.0, 10.0, 1e5] {
            assert_eq!(b0.value(t), half.value(t));
        }
    }

    #[test]
    fn bp_examples() {
        let p = 2.0;
        let pc = conjugate_exponent(p);
        let pw = YoungFunction::power(p).unwrap().complement();
        let v = pw.bp_check(pc, 1e8).unwrap();
        assert_eq!(v.classification, BpClass::Divergent);
        assert!(v.analytic);

        let lb = YoungFunction::log_bump(p, 1.0).unwrap().complement();
        let v = lb.bp_check(pc, 1e8).unwrap();
        assert_eq!(v.classification, BpClass::Convergent);
        // δ' = δ/(p-1) = 1; the log-scale slope should sit below -δ'
        assert!(v.log_slope < -1.0, "{v:?}");

        let llb = YoungFunction::loglog_bump(p, 3.0).unwrap().complement();
        let v = llb.bp_check(pc, 1e8).unwrap();
        assert_eq!(v.classification, BpClass::Convergent);
        assert!(v.analytic);
    }

    #[test]
    fn loglog_tail_integral_stabilizes() {
        // ∫ dt / (t log(e+t) loglog(e^e+t)^{1+δ'}) with δ' = 3
        let g = |u: f64| {
            let t = u.exp();
            1.0 / ((E + t).ln() * loglog(t).powf(4.0))
        };
        let a = simpson(g, 1.0, 40.0, 20_000);
        let b = simpson(g, 1.0, 80.0, 40_000);
        let c = simpson(g, 1.0, 160.0, 80_000);
        assert!((c - b) < (b - a));
        assert!((c - b) / c < 0.05);
    }

    #[test]
    fn custom_bp_check_is_numeric() {
        let a = YoungFunction::custom(&[(1.0, 1.0), (2.0, 4.0), (4.0, 16.0)]).unwrap();
        let v = a.bp_check(2.0, 1e6).unwrap();
        assert!(!v.analytic);
        // tail exponent 1.5 < 2
        assert_eq!(v.classification, BpClass::Convergent);
    }

    #[test]
    fn doubling_is_finite_for_builtins() {
        for s in ["power:p=3", "logbump:p=2,delta=1", "loglogbump:p=2,delta=3", "b0:p=1.5,delta=2"] {
            let a = YoungFunction::parse(s).unwrap();
            let c = a.doubling_constant(1e-6, 1e6, 100);
            assert!(c.is_finite() && c < 64.0, "{s}: {c}");
            assert!(a.is_convex_on(1e-6, 1e6, 200), "{s}");
        }
    }

    #[test]
    fn duality_sandwich_on_log_grid() {
        for spec in ["power:p=2", "power:p=1.5", "logbump:p=2,delta=1", "logbump:p=3,delta=0.5", "loglogbump:p=2,delta=3"] {
            let a = YoungFunction::parse(spec).unwrap();
            let ac = a.complement();
            for t in log_grid(1e-6, 1e6, 200) {
                let prod = a.inverse(t) * ac.inverse(t);
                assert!(prod >= t * (1.0 - 1e-9) && prod <= 2.0 * t * (1.0 + 1e-9), "{spec} t={t}: {}", prod / t);
            }
        }
    }
}
