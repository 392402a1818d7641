//! Sufficient stability and attractivity tests as pure predicates.
//!
//! Every check reports the comparisons it made as margins so callers can see
//! how close an input sits to a boundary. Inequalities are evaluated in plain
//! double precision: strict where the criterion is strict, non-strict where
//! it allows equality. An unsatisfied report means "inconclusive", never
//! "unstable".

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriteriaError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// One compared pair `left <op> right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub name: String,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub satisfied: bool,
    pub which_case: Option<String>,
    /// Every case whose inequalities all hold, in checking order.
    pub holding_cases: Vec<String>,
    pub margins: Vec<Margin>,
    pub notes: String,
}

fn margin(name: &str, left: f64, right: f64) -> Margin {
    Margin {
        name: name.to_string(),
        left,
        right,
    }
}

/// `4b > a^2` and
/// `2(a + r)/(a r) alpha + 4/(a r) beta < 1` with `r = sqrt(4b - a^2)`,
/// which gives global exponential stability of
/// `x'' + a x' + b x + Σ a_k(t) x'(g_k) + Σ b_k(t) x(h_k) = 0`.
pub fn lemma1_check(a: f64, b: f64, alpha: f64, beta: f64) -> Result<CriterionReport, CriteriaError> {
    if !(a > 0.0 && b > 0.0) {
        return Err(CriteriaError::InvalidInput(format!(
            "need a > 0 and b > 0, got a = {a}, b = {b}"
        )));
    }
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(CriteriaError::InvalidInput(format!(
            "need alpha >= 0 and beta >= 0, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let disc = 4.0 * b - a * a;
    let first = margin("4b > a^2", 4.0 * b, a * a);
    if disc <= 0.0 {
        return Ok(CriterionReport {
            satisfied: false,
            which_case: None,
            holding_cases: vec![],
            margins: vec![first],
            notes: "4b > a^2 fails; the second inequality is undefined".into(),
        });
    }
    let r = disc.sqrt();
    let lhs = 2.0 * (a + r) / (a * r) * alpha + 4.0 / (a * r) * beta;
    let satisfied = lhs < 1.0;
    Ok(CriterionReport {
        satisfied,
        which_case: satisfied.then(|| "lemma1".to_string()),
        holding_cases: if satisfied { vec!["lemma1".into()] } else { vec![] },
        margins: vec![
            first,
            margin("2(a+r)/(a r) alpha + 4/(a r) beta < 1", lhs, 1.0),
        ],
        notes: String::new(),
    })
}

/// Lemma for `x'' + f(t,x,x') + s(t,x) + Σ s_k(t, x, x(h_k)) = 0` with
/// `a0 <= f/x' <= A`, `b0 <= s/x <= B`, `|s_k/u| <= C_k`:
///
/// 1. `B <= a0^2/4` and `ΣC_k < b0 - (a0/2)(A - a0)`
/// 2. `b0 >= (a0/2)(A - a0/2)` and `ΣC_k < a0^2/2 - B`
pub fn lemma2_check(
    a0: f64,
    a_upper: f64,
    b0: f64,
    b_upper: f64,
    c_sum: f64,
) -> Result<CriterionReport, CriteriaError> {
    if !(a0 > 0.0 && a0 <= a_upper) {
        return Err(CriteriaError::InvalidInput(format!(
            "need 0 < a0 <= A, got a0 = {a0}, A = {a_upper}"
        )));
    }
    if !(b0 > 0.0 && b0 <= b_upper) {
        return Err(CriteriaError::InvalidInput(format!(
            "need 0 < b0 <= B, got b0 = {b0}, B = {b_upper}"
        )));
    }
    if !(c_sum >= 0.0) {
        return Err(CriteriaError::InvalidInput(format!(
            "need C_sum >= 0, got {c_sum}"
        )));
    }
    let m1a = margin("1: B <= a0^2/4", b_upper, a0 * a0 / 4.0);
    let m1b = margin("1: C_sum < b0 - (a0/2)(A - a0)", c_sum, b0 - a0 / 2.0 * (a_upper - a0));
    let m2a = margin("2: b0 >= (a0/2)(A - a0/2)", b0, a0 / 2.0 * (a_upper - a0 / 2.0));
    let m2b = margin("2: C_sum < a0^2/2 - B", c_sum, a0 * a0 / 2.0 - b_upper);
    let case1 = m1a.left <= m1a.right && m1b.left < m1b.right;
    let case2 = m2a.left >= m2a.right && m2b.left < m2b.right;
    let holding: Vec<String> = [("1", case1), ("2", case2)]
        .into_iter()
        .filter(|(_, ok)| *ok)
        .map(|(l, _)| l.to_string())
        .collect();
    Ok(finish(holding, vec![m1a, m1b, m2a, m2b]))
}

fn finish(holding: Vec<String>, margins: Vec<Margin>) -> CriterionReport {
    let notes = match holding.len() {
        0 => "no case holds".to_string(),
        1 => String::new(),
        _ => format!("holding cases: {}", holding.join(", ")),
    };
    CriterionReport {
        satisfied: !holding.is_empty(),
        which_case: holding.first().cloned(),
        holding_cases: holding,
        margins,
        notes,
    }
}

fn three_case_check(a: f64, k: f64, c: f64, gain: &str) -> Result<CriterionReport, CriteriaError> {
    if !(a > 0.0 && k > 0.0) {
        return Err(CriteriaError::InvalidInput(format!(
            "need a > 0 and {gain} > 0, got a = {a}, {gain} = {k}"
        )));
    }
    if !(c >= 0.0) {
        return Err(CriteriaError::InvalidInput(format!("need C >= 0, got {c}")));
    }
    let q = a * a / 4.0;
    let ma1 = margin(&format!("a: C < {gain}"), c, k);
    let ma2 = margin(&format!("a: {gain} <= a^2/4"), k, q);
    let mb1 = margin(&format!("b: a^2/4 <= {gain}"), q, k);
    let mb2 = margin(&format!("b: {gain} < a^2/2 - C"), k, a * a / 2.0 - c);
    let disc = 4.0 * k - a * a;
    let mc1 = margin(&format!("c: 4{gain} > a^2"), 4.0 * k, a * a);
    // undefined for 4K <= a^2; reported as 0 so margins stay finite
    let rc = if disc > 0.0 { a * disc.sqrt() / 4.0 } else { 0.0 };
    let mc2 = margin(&format!("c: C < a sqrt(4{gain} - a^2)/4"), c, rc);
    let case_a = ma1.left < ma1.right && ma2.left <= ma2.right;
    let case_b = mb1.left <= mb1.right && mb2.left < mb2.right;
    let case_c = disc > 0.0 && mc2.left < mc2.right;
    let holding = [("a", case_a), ("b", case_b), ("c", case_c)]
        .into_iter()
        .filter(|(_, ok)| *ok)
        .map(|(l, _)| l.to_string())
        .collect();
    Ok(finish(holding, vec![ma1, ma2, mb1, mb2, mc1, mc2]))
}

/// Delayed proportional control `u = -b [x(t) - x(h(t))]` for
/// `x'' + a x' + b x(h(t)) = f(t, x(g(t)))` with
/// `|f(t, v + x*) - b x*| <= C |v|`. Cases:
/// a) `C < b <= a^2/4`; b) `a^2/4 <= b < a^2/2 - C`; c) `C < a sqrt(4b - a^2)/4`.
pub fn theorem3_check(a: f64, b: f64, c: f64) -> Result<CriterionReport, CriteriaError> {
    three_case_check(a, b, c, "b")
}

/// Proportional state control `u = -K (x - x*)` for
/// `x'' + a x' + f(t, x(h(t))) = 0` with `|f(t, v + x*)| <= C |v|`; the same
/// three cases as [`theorem3_check`] with `b` replaced by `K`.
pub fn theorem4_check(a: f64, k: f64, c: f64) -> Result<CriterionReport, CriteriaError> {
    three_case_check(a, k, c, "K")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub inclusive: bool,
}

/// Interval of gains `K`. A missing upper end means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainInterval {
    pub lower: Bound,
    pub upper: Option<Bound>,
}

impl GainInterval {
    pub fn contains(&self, k: f64) -> bool {
        let above = if self.lower.inclusive {
            k >= self.lower.value
        } else {
            k > self.lower.value
        };
        let below = match self.upper {
            None => true,
            Some(u) if u.inclusive => k <= u.value,
            Some(u) => k < u.value,
        };
        above && below
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseInterval {
    pub case: String,
    pub interval: GainInterval,
}

/// Threshold `K_c` above which case c of the proportional-control test
/// holds: the root of `C = a sqrt(4K - a^2)/4`.
pub fn case_c_threshold(a: f64, c: f64) -> f64 {
    (16.0 * c * c / (a * a) + a * a) / 4.0
}

/// Gains `K` stabilizing `x* = (2k+1) pi / omega` of
/// `x'' + a x' + A sin(omega x(h(t))) = -K (x - x*)`, with `C = A omega`:
/// a) `(A omega, a^2/4]`, b) `[a^2/4, a^2/2 - A omega)`, c) `(K_c, inf)`.
pub fn corollary5_gain_range(
    a: f64,
    amplitude: f64,
    omega: f64,
) -> Result<Vec<CaseInterval>, CriteriaError> {
    if !(a > 0.0 && amplitude > 0.0 && omega > 0.0) {
        return Err(CriteriaError::InvalidInput(format!(
            "need a, A, omega > 0, got a = {a}, A = {amplitude}, omega = {omega}"
        )));
    }
    let c = amplitude * omega;
    let q = a * a / 4.0;
    let mut out = Vec::new();
    if c < q {
        out.push(CaseInterval {
            case: "a".into(),
            interval: GainInterval {
                lower: Bound {
                    value: c,
                    inclusive: false,
                },
                upper: Some(Bound {
                    value: q,
                    inclusive: true,
                }),
            },
        });
    }
    let b_hi = a * a / 2.0 - c;
    if q < b_hi {
        out.push(CaseInterval {
            case: "b".into(),
            interval: GainInterval {
                lower: Bound {
                    value: q,
                    inclusive: true,
                },
                upper: Some(Bound {
                    value: b_hi,
                    inclusive: false,
                }),
            },
        });
    }
    out.push(CaseInterval {
        case: "c".into(),
        interval: GainInterval {
            lower: Bound {
                value: case_c_threshold(a, c),
                inclusive: false,
            },
            upper: None,
        },
    });
    Ok(out)
}

/// `sup_{v >= 0} v^m / (1 + v^n)` for `0 <= m < n`.
///
/// The maximum sits at `v^n = m / (n - m)`, giving
/// `m^(m/n) / (n (n - m)^(m/n - 1))`.
pub fn rational_envelope_mu(m: u32, n: u32) -> f64 {
    assert!(m < n, "rational_envelope_mu needs m < n, got m = {m}, n = {n}");
    if m == 0 {
        return 1.0;
    }
    let (m, n) = (m as f64, n as f64);
    let e = m / n;
    m.powf(e) / (n * (n - m).powf(e - 1.0))
}
