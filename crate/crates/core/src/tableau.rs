//! Coefficient sets of stochastic Runge-Kutta methods and their order conditions.
//!
//! A tableau holds `(alpha, A, c, b1, b2)` for the `s`-stage scheme
//!
//! ```text
//! Y_{n+1} = Y_n + h Σ α_i g0(t_n + c_i h, H_i) + √h Σ_l g_l ξ_l
//! H_i     = Y_n + h Σ a_ij g0(t_n + c_j h, H_j) + √h Σ_l g_l (b1_i ξ_l + b2_i ξ_{m+l})
//! ```
//!
//! with `c = A·1`. Vector products in the conditions are componentwise.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{FromPrimitive, Num};
use thiserror::Error;

/// Tolerance used when checking `c = A·1`.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Default tolerance for classifying order conditions as satisfied.
pub const DEFAULT_ORDER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableauError {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    DimensionMismatch {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("c[{row}] differs from the row sum of A by {deviation:e}")]
    InconsistentNodes { row: usize, deviation: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("stage count must be positive")]
    NoStages,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

/// Coefficients of an `s`-stage SRK method for additive noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SrkTableau {
    name: String,
    alpha: Vec<f64>,
    a: Vec<Vec<f64>>,
    c: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    explicit: bool,
}

impl SrkTableau {
    /// Builds a tableau, filling `c` with the row sums of `A` when absent.
    pub fn new(
        name: impl Into<String>,
        alpha: Vec<f64>,
        a: Vec<Vec<f64>>,
        b1: Vec<f64>,
        b2: Vec<f64>,
        c: Option<Vec<f64>>,
    ) -> Result<Self, TableauError> {
        let s = alpha.len();
        if s == 0 {
            return Err(TableauError::NoStages);
        }
        check_len("A", s, a.len())?;
        for row in &a {
            check_len("A row", s, row.len())?;
        }
        check_len("b1", s, b1.len())?;
        check_len("b2", s, b2.len())?;

        let row_sums: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
        let c = match c {
            Some(c) => {
                check_len("c", s, c.len())?;
                for (row, (ci, sum)) in c.iter().zip(&row_sums).enumerate() {
                    let deviation = (ci - sum).abs();
                    if deviation.is_nan() || deviation > ROW_SUM_TOLERANCE {
                        return Err(TableauError::InconsistentNodes { row, deviation });
                    }
                }
                c
            }
            None => row_sums,
        };
        let explicit = a
            .iter()
            .enumerate()
            .all(|(i, row)| row[i..].iter().all(|&x| x == 0.0));

        Ok(Self {
            name: name.into(),
            alpha,
            a,
            c,
            b1,
            b2,
            explicit,
        })
    }

    /// The four-stage method of weak order three and deterministic order four.
    #[allow(clippy::excessive_precision)]
    pub fn an3d1() -> Self {
        Self::new(
            "AN3D1",
            vec![
                1.0 / 6.0,
                -0.005430430675258792,
                2.0 / 3.0,
                0.1720970973419255,
            ],
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0, 0.0],
                vec![3.0 / 8.0, 1.0 / 8.0, 0.0, 0.0],
                vec![
                    -0.4526683126055039,
                    -0.4842227708685013,
                    1.9368910834740051,
                    0.0,
                ],
            ],
            vec![
                -0.01844540496323970,
                0.8017012756521233,
                0.5092227024816198,
                0.9758794209767762,
            ],
            vec![
                -0.1866426386543421,
                -0.8575745885712401,
                -0.4723392695015512,
                0.3060354860326548,
            ],
            Some(vec![0.0, 1.0, 0.5, 1.0]),
        )
        .expect("built-in AN3D1 coefficients are consistent")
    }

    /// The one-stage tableau that reduces the scheme to Euler-Maruyama.
    pub fn euler() -> Self {
        Self::new(
            "Euler",
            vec![1.0],
            vec![vec![0.0]],
            vec![0.0],
            vec![0.0],
            None,
        )
        .expect("Euler tableau is consistent")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    /// True when `A` is strictly lower triangular.
    pub fn is_explicit(&self) -> bool {
        self.explicit
    }

    /// Renders the tableau in the document format read by [`load_tableau`].
    pub fn to_document(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut out = String::new();
        out.push_str(&format!("name={}\n", self.name));
        out.push_str(&format!("s={}\n", self.stages()));
        out.push_str(&format!("alpha={}\n", join(&self.alpha)));
        out.push_str("A=\n");
        for row in &self.a {
            out.push_str(&join(row));
            out.push('\n');
        }
        out.push_str(&format!("b1={}\n", join(&self.b1)));
        out.push_str(&format!("b2={}\n", join(&self.b2)));
        out.push_str(&format!("c={}\n", join(&self.c)));
        out
    }
}

fn check_len(field: &str, expected: usize, found: usize) -> Result<(), TableauError> {
    if expected == found {
        Ok(())
    } else {
        Err(TableauError::DimensionMismatch {
            field: field.to_string(),
            expected,
            found,
        })
    }
}

/// Identifies one order condition: `Stochastic(1..=15)` or `Deterministic(1..=8)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionId {
    Stochastic(u8),
    Deterministic(u8),
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConditionId::Stochastic(k) => write!(f, "{k}"),
            ConditionId::Deterministic(k) => write!(f, "D{k}"),
        }
    }
}

/// Right-hand sides of the fifteen weak order conditions as `(numerator, denominator)`.
/// Condition 15 constrains `(αᵀb2)²`.
pub const STOCHASTIC_RHS: [(i64, i64); 15] = [
    (1, 1),
    (1, 2),
    (1, 2),
    (1, 2),
    (1, 6),
    (1, 3),
    (1, 6),
    (1, 6),
    (1, 6),
    (1, 3),
    (1, 3),
    (1, 3),
    (1, 3),
    (1, 3),
    (1, 12),
];

/// Right-hand sides of the eight deterministic order-four conditions.
pub const DETERMINISTIC_RHS: [(i64, i64); 8] = [
    (1, 1),
    (1, 2),
    (1, 3),
    (1, 6),
    (1, 4),
    (1, 8),
    (1, 12),
    (1, 24),
];

/// Number of leading stochastic conditions required for weak order `p = 1, 2, 3`.
const STOCHASTIC_BLOCKS: [usize; 3] = [1, 4, 15];
/// Number of leading deterministic conditions required for order `p = 1, 2, 3, 4`.
const DETERMINISTIC_BLOCKS: [usize; 4] = [1, 2, 4, 8];

fn dot<T: Num + Clone>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
}

fn matvec<T: Num + Clone>(a: &[Vec<T>], x: &[T]) -> Vec<T> {
    a.iter().map(|row| dot(row, x)).collect()
}

fn mul<T: Num + Clone>(x: &[T], y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(a, b)| a.clone() * b.clone()).collect()
}

fn add<T: Num + Clone>(x: &[T], y: &[T]) -> Vec<T> {
    x.iter().zip(y).map(|(a, b)| a.clone() + b.clone()).collect()
}

/// Left-hand sides of the fifteen weak order conditions, generic over the scalar field
/// so that rational tableaus can be checked exactly.
pub fn stochastic_lhs<T: Num + Clone>(
    alpha: &[T],
    a: &[Vec<T>],
    b1: &[T],
    b2: &[T],
) -> [T; 15] {
    let ones = vec![T::one(); alpha.len()];
    let c = matvec(a, &ones);
    let b1sq = mul(b1, b1);
    let b2sq = mul(b2, b2);
    let bsq = add(&b1sq, &b2sq);
    let ab1 = matvec(a, b1);
    let ab2 = matvec(a, b2);
    let alpha_b2 = dot(alpha, b2);

    [
        dot(alpha, &ones),
        dot(alpha, &c),
        dot(alpha, &bsq),
        dot(alpha, b1),
        dot(alpha, &matvec(a, &c)),
        dot(alpha, &mul(&c, &c)),
        dot(alpha, &matvec(a, &bsq)),
        dot(alpha, &add(&mul(b1, &ab1), &mul(b2, &ab2))),
        dot(alpha, &ab1),
        dot(alpha, &mul(&c, &bsq)),
        dot(alpha, &mul(&c, b1)),
        dot(alpha, &mul(&bsq, &bsq)),
        dot(alpha, &add(&mul(&b1sq, b1), &mul(b1, &b2sq))),
        dot(alpha, &b1sq),
        alpha_b2.clone() * alpha_b2,
    ]
}

/// Left-hand sides of the classical order-four Runge-Kutta conditions.
pub fn deterministic_lhs<T: Num + Clone>(alpha: &[T], a: &[Vec<T>]) -> [T; 8] {
    let ones = vec![T::one(); alpha.len()];
    let c = matvec(a, &ones);
    let ac = matvec(a, &c);
    let c2 = mul(&c, &c);
    [
        dot(alpha, &ones),
        dot(alpha, &c),
        dot(alpha, &c2),
        dot(alpha, &ac),
        dot(alpha, &mul(&c2, &c)),
        dot(alpha, &mul(&c, &ac)),
        dot(alpha, &matvec(a, &c2)),
        dot(alpha, &matvec(a, &ac)),
    ]
}

/// `lhs - rhs` for each entry, with the right-hand sides given as fractions.
pub fn residuals<T: Num + Clone + FromPrimitive, const N: usize>(
    lhs: [T; N],
    rhs: &[(i64, i64); N],
) -> [T; N] {
    let mut i = 0;
    lhs.map(|value| {
        let (n, d) = rhs[i];
        i += 1;
        let r = T::from_i64(n).expect("small integer") / T::from_i64(d).expect("small integer");
        value - r
    })
}

/// Result of checking a tableau against the weak and deterministic order conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub stochastic_order: u8,
    pub deterministic_order: u8,
    pub residuals: BTreeMap<ConditionId, f64>,
    pub tolerance: f64,
}

impl OrderReport {
    pub fn max_stochastic_residual(&self) -> f64 {
        self.max_residual(|id| matches!(id, ConditionId::Stochastic(_)))
    }

    pub fn max_deterministic_residual(&self) -> f64 {
        self.max_residual(|id| matches!(id, ConditionId::Deterministic(_)))
    }

    fn max_residual(&self, keep: impl Fn(&ConditionId) -> bool) -> f64 {
        self.residuals
            .iter()
            .filter(|(id, _)| keep(id))
            .map(|(_, r)| r.abs())
            .fold(0.0, f64::max)
    }
}

fn classify(residuals: &[f64], blocks: &[usize], tol: f64) -> u8 {
    let mut order = 0;
    for (p, &n) in blocks.iter().enumerate() {
        if residuals[..n].iter().all(|r| r.abs() <= tol) {
            order = p as u8 + 1;
        } else {
            break;
        }
    }
    order
}

fn stochastic_residuals(t: &SrkTableau) -> [f64; 15] {
    residuals(stochastic_lhs(&t.alpha, &t.a, &t.b1, &t.b2), &STOCHASTIC_RHS)
}

fn deterministic_residuals(t: &SrkTableau) -> [f64; 8] {
    residuals(deterministic_lhs(&t.alpha, &t.a), &DETERMINISTIC_RHS)
}

fn validate_tolerance(tol: f64) -> Result<(), TableauError> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(TableauError::InvalidTolerance(tol))
    }
}

/// Evaluates all fifteen weak order conditions (and the deterministic set) and
/// classifies the weak order in `{0, 1, 2, 3}`.
pub fn check_stochastic_order(t: &SrkTableau, tol: f64) -> Result<OrderReport, TableauError> {
    validate_tolerance(tol)?;
    let stoch = stochastic_residuals(t);
    let det = deterministic_residuals(t);
    let mut residuals = BTreeMap::new();
    for (k, r) in stoch.iter().enumerate() {
        residuals.insert(ConditionId::Stochastic(k as u8 + 1), *r);
    }
    for (k, r) in det.iter().enumerate() {
        residuals.insert(ConditionId::Deterministic(k as u8 + 1), *r);
    }
    Ok(OrderReport {
        stochastic_order: classify(&stoch, &STOCHASTIC_BLOCKS, tol),
        deterministic_order: classify(&det, &DETERMINISTIC_BLOCKS, tol),
        residuals,
        tolerance: tol,
    })
}

/// Highest deterministic order `p ≤ 4` whose classical conditions hold within `tol`.
pub fn check_deterministic_order(t: &SrkTableau, tol: f64) -> Result<u8, TableauError> {
    validate_tolerance(tol)?;
    Ok(classify(&deterministic_residuals(t), &DETERMINISTIC_BLOCKS, tol))
}

fn parse_number(token: &str, line: usize) -> Result<f64, TableauError> {
    let token = token.trim();
    let parsed = match token.split_once('/') {
        Some((n, d)) => match (n.trim().parse::<f64>(), d.trim().parse::<f64>()) {
            (Ok(n), Ok(d)) if d != 0.0 => Ok(n / d),
            _ => Err(()),
        },
        None => token.parse::<f64>().map_err(|_| ()),
    };
    match parsed {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(TableauError::Parse {
            line,
            message: format!("not a number: `{token}`"),
        }),
    }
}

fn parse_list(text: &str, line: usize) -> Result<Vec<f64>, TableauError> {
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_number(t, line))
        .collect()
}

/// Parses a tableau document:
///
/// ```text
/// name=AN3D1          # optional
/// s=4
/// alpha=1/6, -0.0054, 2/3, 0.172
/// A=
/// 0, 0, 0, 0
/// 1, 0, 0, 0
/// ...
/// b1=...
/// b2=...
/// c=...               # optional, defaults to A·1
/// ```
///
/// Entries are decimal literals or `p/q` fractions; `#` starts a comment.
pub fn load_tableau(text: &str) -> Result<SrkTableau, TableauError> {
    let mut name = None;
    let mut s = None;
    let mut alpha = None;
    let mut b1 = None;
    let mut b2 = None;
    let mut c = None;
    let mut a: Option<Vec<Vec<f64>>> = None;
    let mut pending_rows = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if pending_rows > 0 {
            a.as_mut()
                .expect("A is open")
                .push(parse_list(line, line_no)?);
            pending_rows -= 1;
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(TableauError::Parse {
                line: line_no,
                message: format!("expected `key=value`, found `{line}`"),
            });
        };
        let value = value.trim();
        match key.trim() {
            "name" => name = Some(value.to_string()),
            "s" => {
                let n = value.parse::<usize>().map_err(|_| TableauError::Parse {
                    line: line_no,
                    message: format!("stage count is not a positive integer: `{value}`"),
                })?;
                if n == 0 {
                    return Err(TableauError::NoStages);
                }
                s = Some(n);
            }
            "alpha" => alpha = Some(parse_list(value, line_no)?),
            "b1" => b1 = Some(parse_list(value, line_no)?),
            "b2" => b2 = Some(parse_list(value, line_no)?),
            "c" => c = Some(parse_list(value, line_no)?),
            "A" => {
                let n = s.ok_or(TableauError::Parse {
                    line: line_no,
                    message: "`s` must precede `A`".to_string(),
                })?;
                let mut rows = Vec::with_capacity(n);
                pending_rows = n;
                if !value.is_empty() {
                    rows.push(parse_list(value, line_no)?);
                    pending_rows -= 1;
                }
                a = Some(rows);
            }
            other => {
                return Err(TableauError::Parse {
                    line: line_no,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
    }

    let s = s.ok_or(TableauError::MissingField("s"))?;
    let alpha = alpha.ok_or(TableauError::MissingField("alpha"))?;
    let a = a.ok_or(TableauError::MissingField("A"))?;
    let b1 = b1.ok_or(TableauError::MissingField("b1"))?;
    let b2 = b2.ok_or(TableauError::MissingField("b2"))?;
    check_len("alpha", s, alpha.len())?;
    check_len("A", s, a.len())?;
    SrkTableau::new(name.unwrap_or_else(|| "custom".to_string()), alpha, a, b1, b2, c)
}
