//! Boolean functions on `{-1,+1}^n`.
//!
//! Bits are `i8` values in `{-1, +1}`; `+1` plays the role of "true" both for
//! variables and for function values. Assignments are ordered
//! lexicographically with `-1 < +1`, so the table index of `x` is
//! `Σ [x_i = +1] · 2^(n-1-i)`: `x_1` is the most significant bit.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest dimension for which the cube is enumerated.
pub const ENUMERATION_LIMIT: usize = 24;
/// Largest dimension for which [`SatisfyingSampler`] enumerates instead of rejecting.
pub const EXACT_SAMPLER_LIMIT: usize = 20;
/// Acceptance probability below which rejection sampling is not expected to finish.
pub const REJECTION_DENSITY_FLOOR: f64 = 1.0 / (1u64 << 20) as f64;
/// Attempts before rejection sampling gives up.
pub const MAX_REJECTIONS: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoolFnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid bit value {0}, expected -1 or +1")]
    InvalidBit(i8),
    #[error("dimension {n} exceeds the enumeration limit {limit}")]
    DimensionTooLarge { n: usize, limit: usize },
    #[error("truth table has {len} entries, expected 2^{n}")]
    TableLength { n: usize, len: usize },
    #[error("literal {literal} out of range for {n} variables")]
    LiteralOutOfRange { literal: i64, n: usize },
    #[error("function is unsatisfiable")]
    Unsatisfiable,
    #[error("no satisfying assignment after {attempts} rejection attempts (density below floor)")]
    MaxRejectionsExceeded { attempts: u64 },
    #[error("{0} cannot be written in this format")]
    NotRepresentable(&'static str),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("literal {literal} out of range for {n} variables (line {line})")]
    LiteralOutOfRange { literal: i64, n: usize, line: usize },
    #[error("truth table length {bits} is not a power of two")]
    TableLengthNotPowerOfTwo { bits: usize },
    #[error("truth table has {digits} hex digits, expected {expected} for n = {n}")]
    TableLengthMismatch { digits: usize, expected: usize, n: usize },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unknown format {0:?}")]
    UnknownFormat(String),
}

/// A point of `{-1,+1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<i8>);

impl Assignment {
    pub fn new(bits: Vec<i8>) -> Result<Self, BoolFnError> {
        if let Some(&b) = bits.iter().find(|&&b| b != 1 && b != -1) {
            return Err(BoolFnError::InvalidBit(b));
        }
        Ok(Assignment(bits))
    }

    /// The assignment at position `index` of the lexicographic order.
    pub fn from_index(index: u64, n: usize) -> Self {
        debug_assert!(n < 64 && index < (1u64 << n));
        Assignment(
            (0..n)
                .map(|i| if (index >> (n - 1 - i)) & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }

    pub fn index(&self) -> u64 {
        self.0
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b == 1))
    }

    pub fn ones(n: usize) -> Self {
        Assignment(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.0.len());
        self.0.iter().zip(w).map(|(&b, &wi)| f64::from(b) * wi).sum()
    }

    fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut bits = Vec::with_capacity(n);
        while bits.len() < n {
            let word: u64 = rng.gen();
            let take = (n - bits.len()).min(64);
            bits.extend((0..take).map(|k| if (word >> k) & 1 == 1 { 1i8 } else { -1 }));
        }
        Assignment(bits)
    }
}

impl fmt::Display for Assignment {
    /// Renders as a string of `+` and `-`, one character per bit.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for Assignment {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .chars()
            .map(|c| match c {
                '+' | '1' => Ok(1),
                '-' | '0' => Ok(-1),
                other => Err(ParseError::Malformed {
                    line: 1,
                    reason: format!("unexpected character {other:?} in assignment"),
                }),
            })
            .collect::<Result<Vec<i8>, _>>()
            .map(Assignment)
    }
}

/// How a [`BooleanFunction`] is stored.
#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    /// `table[index(x)]` is `true` iff `f(x) = +1`.
    TruthTable(Vec<bool>),
    /// Conjunction of clauses; literal `k > 0` is true iff `x_k = +1`,
    /// `k < 0` iff `x_|k| = -1`. An empty clause is unsatisfiable.
    Cnf(Vec<Vec<i32>>),
    /// `f(x) = +1` iff `⟨weights, x⟩ ≥ threshold`.
    Ltf { weights: Vec<f64>, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BooleanFunction {
    n: usize,
    repr: Representation,
}

impl BooleanFunction {
    pub fn truth_table(n: usize, table: Vec<bool>) -> Result<Self, BoolFnError> {
        if n > ENUMERATION_LIMIT {
            return Err(BoolFnError::DimensionTooLarge { n, limit: ENUMERATION_LIMIT });
        }
        if table.len() != 1usize << n {
            return Err(BoolFnError::TableLength { n, len: table.len() });
        }
        Ok(BooleanFunction { n, repr: Representation::TruthTable(table) })
    }

    pub fn cnf(n: usize, clauses: Vec<Vec<i32>>) -> Result<Self, BoolFnError> {
        for &lit in clauses.iter().flatten() {
            let v = i64::from(lit).unsigned_abs() as usize;
            if lit == 0 || v > n {
                return Err(BoolFnError::LiteralOutOfRange { literal: lit.into(), n });
            }
        }
        Ok(BooleanFunction { n, repr: Representation::Cnf(clauses) })
    }

    pub fn ltf(weights: Vec<f64>, threshold: f64) -> Result<Self, BoolFnError> {
        if !threshold.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(BoolFnError::NotRepresentable("non-finite threshold function"));
        }
        Ok(BooleanFunction { n: weights.len(), repr: Representation::Ltf { weights, threshold } })
    }

    pub fn constant(n: usize, value: bool) -> Self {
        let clauses = if value { Vec::new() } else { vec![Vec::new()] };
        BooleanFunction { n, repr: Representation::Cnf(clauses) }
    }

    /// Conjunction of the positive literals `x_1 ∧ … ∧ x_n`.
    pub fn and_all(n: usize) -> Self {
        let clauses = (1..=n as i32).map(|v| vec![v]).collect();
        BooleanFunction { n, repr: Representation::Cnf(clauses) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    /// `+1` if `x` satisfies the function, `-1` otherwise.
    pub fn eval(&self, x: &Assignment) -> Result<i8, BoolFnError> {
        Ok(if self.satisfies(x)? { 1 } else { -1 })
    }

    pub fn satisfies(&self, x: &Assignment) -> Result<bool, BoolFnError> {
        if x.len() != self.n {
            return Err(BoolFnError::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(self.satisfies_bits(x.bits()))
    }

    fn satisfies_bits(&self, bits: &[i8]) -> bool {
        match &self.repr {
            Representation::TruthTable(table) => {
                let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b == 1));
                table[idx]
            }
            Representation::Cnf(clauses) => clauses.iter().all(|clause| {
                clause.iter().any(|&lit| {
                    let b = bits[lit.unsigned_abs() as usize - 1];
                    (lit > 0) == (b == 1)
                })
            }),
            Representation::Ltf { weights, threshold } => {
                let s: f64 = bits.iter().zip(weights).map(|(&b, &w)| f64::from(b) * w).sum();
                s >= *threshold
            }
        }
    }

    fn check_enumerable(&self) -> Result<(), BoolFnError> {
        if self.n > ENUMERATION_LIMIT {
            Err(BoolFnError::DimensionTooLarge { n: self.n, limit: ENUMERATION_LIMIT })
        } else {
            Ok(())
        }
    }

    /// Values of the function on all `2^n` points, in index order.
    pub fn to_table(&self) -> Result<Vec<bool>, BoolFnError> {
        self.check_enumerable()?;
        if let Representation::TruthTable(t) = &self.repr {
            return Ok(t.clone());
        }
        let n = self.n;
        let mut bits = vec![-1i8; n];
        Ok((0..1u64 << n)
            .map(|idx| {
                for (i, b) in bits.iter_mut().enumerate() {
                    *b = if (idx >> (n - 1 - i)) & 1 == 1 { 1 } else { -1 };
                }
                self.satisfies_bits(&bits)
            })
            .collect())
    }

    pub fn to_truth_table(&self) -> Result<BooleanFunction, BoolFnError> {
        let table = self.to_table()?;
        BooleanFunction::truth_table(self.n, table)
    }
}

/// The satisfying assignments of a function, in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SatisfyingSet {
    n: usize,
    assignments: Vec<Assignment>,
}

impl SatisfyingSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Assignment> {
        self.assignments.iter()
    }

    pub fn contains(&self, x: &Assignment) -> bool {
        self.assignments.binary_search(x).is_ok()
    }

    pub fn into_vec(self) -> Vec<Assignment> {
        self.assignments
    }
}

pub fn enumerate_satisfying(f: &BooleanFunction) -> Result<SatisfyingSet, BoolFnError> {
    let table = f.to_table()?;
    let assignments = table
        .iter()
        .enumerate()
        .filter(|(_, &v)| v)
        .map(|(idx, _)| Assignment::from_index(idx as u64, f.n))
        .collect();
    Ok(SatisfyingSet { n: f.n, assignments })
}

/// Uniform draw from `f⁻¹(1)` by rejection from the uniform cube.
///
/// Gives up after [`MAX_REJECTIONS`] attempts. When that happens and the cube
/// is small enough to enumerate, an empty solution set is reported as
/// [`BoolFnError::Unsatisfiable`].
pub fn sample_satisfying<R: Rng + ?Sized>(
    f: &BooleanFunction,
    rng: &mut R,
) -> Result<Assignment, BoolFnError> {
    for _ in 0..MAX_REJECTIONS {
        let x = Assignment::random(f.n, rng);
        if f.satisfies_bits(x.bits()) {
            return Ok(x);
        }
    }
    if f.n <= ENUMERATION_LIMIT && enumerate_satisfying(f)?.is_empty() {
        return Err(BoolFnError::Unsatisfiable);
    }
    Err(BoolFnError::MaxRejectionsExceeded { attempts: MAX_REJECTIONS })
}

/// Draws uniformly from `f⁻¹(1)`: exactly from the enumerated set when
/// `n ≤ EXACT_SAMPLER_LIMIT`, by rejection otherwise.
#[derive(Debug, Clone)]
pub enum SatisfyingSampler {
    Enumerated(SatisfyingSet),
    Rejection(BooleanFunction),
}

impl SatisfyingSampler {
    pub fn new(f: &BooleanFunction) -> Result<Self, BoolFnError> {
        if f.n <= EXACT_SAMPLER_LIMIT {
            let set = enumerate_satisfying(f)?;
            if set.is_empty() {
                return Err(BoolFnError::Unsatisfiable);
            }
            Ok(SatisfyingSampler::Enumerated(set))
        } else {
            Ok(SatisfyingSampler::Rejection(f.clone()))
        }
    }

    pub fn n(&self) -> usize {
        match self {
            SatisfyingSampler::Enumerated(s) => s.n,
            SatisfyingSampler::Rejection(f) => f.n,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Assignment, BoolFnError> {
        match self {
            SatisfyingSampler::Enumerated(set) => {
                Ok(set.assignments[rng.gen_range(0..set.len())].clone())
            }
            SatisfyingSampler::Rejection(f) => sample_satisfying(f, rng),
        }
    }
}

/// Text formats for Boolean functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    /// DIMACS CNF.
    #[serde(rename = "dimacs")]
    Dimacs,
    /// Hex string read as one big integer: bit `k` (least significant first)
    /// is `f` at assignment index `k`.
    #[serde(rename = "tt-hex")]
    TruthTableHex,
    /// One line `w1 w2 ... wn ; theta`.
    #[serde(rename = "ltf")]
    LtfText,
}

impl FromStr for Format {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dimacs" | "dimacs-cnf" | "cnf" => Ok(Format::Dimacs),
            "tt-hex" | "truthtable-hex" => Ok(Format::TruthTableHex),
            "ltf" | "ltf-text" => Ok(Format::LtfText),
            other => Err(ParseError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Dimacs => "dimacs",
            Format::TruthTableHex => "tt-hex",
            Format::LtfText => "ltf",
        })
    }
}

pub fn parse_function(text: &str, format: Format) -> Result<BooleanFunction, BoolFnError> {
    match format {
        Format::Dimacs => parse_dimacs(text),
        Format::TruthTableHex => parse_truth_table_hex(text, None),
        Format::LtfText => parse_ltf(text),
    }
}

pub fn parse_dimacs(text: &str) -> Result<BooleanFunction, BoolFnError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut current: Vec<i32> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        // SATLIB end marker
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(ParseError::MalformedHeader("duplicate problem line".into()).into());
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                ["p", "cnf", n, m] => n.parse::<usize>().ok().zip(m.parse::<usize>().ok()),
                _ => None,
            };
            header = Some(parsed.ok_or_else(|| ParseError::MalformedHeader(line.to_string()))?);
            continue;
        }
        let (n, _) = header.ok_or_else(|| {
            ParseError::MalformedHeader(format!("clause before problem line at line {line_no}"))
        })?;
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| ParseError::Malformed {
                line: line_no,
                reason: format!("invalid literal {tok:?}"),
            })?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
            } else if lit.unsigned_abs() as usize > n {
                return Err(ParseError::LiteralOutOfRange { literal: lit, n, line: line_no }.into());
            } else {
                current.push(lit as i32);
            }
        }
    }
    let (n, m) = header.ok_or_else(|| ParseError::MalformedHeader("missing problem line".into()))?;
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != m {
        return Err(ParseError::MalformedHeader(format!(
            "header declares {m} clauses, found {}",
            clauses.len()
        ))
        .into());
    }
    BooleanFunction::cnf(n, clauses)
}

/// Parses a hex truth table. With `n = None` the dimension is inferred from
/// the number of digits (`4 · digits = 2^n`, so `n ≥ 2`); an explicit `n`
/// also admits `n < 2`, in which case unused high bits must be zero.
pub fn parse_truth_table_hex(text: &str, n: Option<usize>) -> Result<BooleanFunction, BoolFnError> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let digits_str = compact
        .strip_prefix("0x")
        .or_else(|| compact.strip_prefix("0X"))
        .unwrap_or(&compact);
    let digits: Vec<u8> = digits_str
        .chars()
        .map(|c| {
            c.to_digit(16).map(|d| d as u8).ok_or_else(|| ParseError::Malformed {
                line: 1,
                reason: format!("invalid hex digit {c:?}"),
            })
        })
        .collect::<Result<_, _>>()?;
    if digits.is_empty() {
        return Err(ParseError::TableLengthNotPowerOfTwo { bits: 0 }.into());
    }
    let n = match n {
        Some(n) => {
            if n > ENUMERATION_LIMIT {
                return Err(BoolFnError::DimensionTooLarge { n, limit: ENUMERATION_LIMIT });
            }
            let expected = (1usize << n).div_ceil(4);
            if digits.len() != expected {
                return Err(ParseError::TableLengthMismatch { digits: digits.len(), expected, n }.into());
            }
            n
        }
        None => {
            let bits = digits.len() * 4;
            if !bits.is_power_of_two() {
                return Err(ParseError::TableLengthNotPowerOfTwo { bits }.into());
            }
            bits.trailing_zeros() as usize
        }
    };
    let size = 1usize << n;
    // least significant digit last in the string
    let bit_at = |k: usize| -> bool {
        let d = digits[digits.len() - 1 - k / 4];
        (d >> (k % 4)) & 1 == 1
    };
    if (size..digits.len() * 4).any(bit_at) {
        return Err(ParseError::Malformed {
            line: 1,
            reason: format!("bits above 2^{n} must be zero"),
        }
        .into());
    }
    BooleanFunction::truth_table(n, (0..size).map(bit_at).collect())
}

pub fn parse_ltf(text: &str) -> Result<BooleanFunction, BoolFnError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (line_no, line) = lines.next().ok_or_else(|| ParseError::Malformed {
        line: 1,
        reason: "empty threshold-function file".into(),
    })?;
    if let Some((extra, _)) = lines.next() {
        return Err(ParseError::Malformed { line: extra, reason: "unexpected trailing line".into() }.into());
    }
    let (lhs, rhs) = line.split_once(';').ok_or_else(|| ParseError::Malformed {
        line: line_no,
        reason: "expected `w1 ... wn ; theta`".into(),
    })?;
    let num = |tok: &str| -> Result<f64, ParseError> {
        tok.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ParseError::Malformed { line: line_no, reason: format!("invalid number {tok:?}") })
    };
    let weights = lhs.split_whitespace().map(num).collect::<Result<Vec<_>, _>>()?;
    let mut rhs_tokens = rhs.split_whitespace();
    let threshold = match (rhs_tokens.next(), rhs_tokens.next()) {
        (Some(t), None) => num(t)?,
        _ => {
            return Err(ParseError::Malformed { line: line_no, reason: "expected one threshold".into() }.into())
        }
    };
    BooleanFunction::ltf(weights, threshold)
}

/// Writes `f` in `format`. Truth tables and threshold functions become
/// DIMACS through one blocking clause per falsifying point; only threshold
/// functions can be written as `ltf` text.
pub fn serialize_function(f: &BooleanFunction, format: Format) -> Result<String, BoolFnError> {
    match format {
        Format::Dimacs => {
            let clauses: Vec<Vec<i32>> = match &f.repr {
                Representation::Cnf(c) => c.clone(),
                _ => f
                    .to_table()?
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| !v)
                    .map(|(idx, _)| {
                        Assignment::from_index(idx as u64, f.n)
                            .bits()
                            .iter()
                            .enumerate()
                            .map(|(i, &b)| if b == 1 { -(i as i32 + 1) } else { i as i32 + 1 })
                            .collect()
                    })
                    .collect(),
            };
            let mut out = format!("p cnf {} {}\n", f.n, clauses.len());
            for clause in &clauses {
                for lit in clause {
                    out.push_str(&lit.to_string());
                    out.push(' ');
                }
                out.push_str("0\n");
            }
            Ok(out)
        }
        Format::TruthTableHex => {
            let table = f.to_table()?;
            let digits = (1usize << f.n).div_ceil(4);
            let mut out = String::with_capacity(digits + 1);
            for d in (0..digits).rev() {
                let nibble = (0..4)
                    .filter(|b| table.get(4 * d + b).copied().unwrap_or(false))
                    .fold(0u32, |acc, b| acc | (1 << b));
                out.push(char::from_digit(nibble, 16).expect("nibble < 16"));
            }
            out.push('\n');
            Ok(out)
        }
        Format::LtfText => match &f.repr {
            Representation::Ltf { weights, threshold } => {
                let ws: Vec<String> = weights.iter().map(|w| w.to_string()).collect();
                Ok(format!("{} ; {}\n", ws.join(" "), threshold))
            }
            _ => Err(BoolFnError::NotRepresentable("a non-threshold representation")),
        },
    }
}

/// Random `width`-CNF with distinct variables per clause and fair signs.
pub fn random_cnf<R: Rng + ?Sized>(n: usize, clauses: usize, width: usize, rng: &mut R) -> BooleanFunction {
    let width = width.min(n);
    let clauses = (0..clauses)
        .map(|_| {
            rand::seq::index::sample(rng, n, width)
                .into_iter()
                .map(|v| {
                    let lit = v as i32 + 1;
                    if rng.gen_bool(0.5) { lit } else { -lit }
                })
                .collect()
        })
        .collect();
    BooleanFunction { n, repr: Representation::Cnf(clauses) }
}

/// Random threshold function with weights uniform in `[-1, 1]` and a
/// threshold uniform in `[-0.5, 0.5] · ‖w‖₁`.
pub fn random_ltf<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BooleanFunction {
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let scale: f64 = weights.iter().map(|w| w.abs()).sum();
    let threshold = rng.gen_range(-0.5..=0.5) * scale;
    BooleanFunction { n, repr: Representation::Ltf { weights, threshold } }
}
