//! Ordinals below epsilon-zero in Cantor normal form.
//!
//! An [`Ordinal`] is a list of terms `w^e * c` with strictly decreasing
//! exponents (themselves ordinals) and positive coefficients. The empty list
//! is zero. Because the representation is canonical, structural equality is
//! ordinal equality, and the derived lexicographic order on the term list is
//! the ordinal order.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrdinalError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("not in Cantor normal form: {0}")]
    NotNormal(String),
}

/// One Cantor-normal-form term `w^exponent * coefficient`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    pub exponent: Ordinal,
    pub coefficient: BigUint,
}

/// An ordinal below epsilon-zero.
///
/// Field order matters: the derived `Ord` compares term lists
/// lexicographically (exponent, then coefficient; a proper prefix is
/// smaller), which coincides with the ordinal order on normal forms.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Ordinal {
    terms: Vec<Term>,
}

/// Zero / successor / limit split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Kind {
    Zero,
    Successor(Ordinal),
    Limit,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Ordinal::from(1u64)
    }

    pub fn omega() -> Self {
        Ordinal::omega_power(&Ordinal::one())
    }

    /// `w^a` as a single term with coefficient 1.
    pub fn omega_power(a: &Ordinal) -> Self {
        Ordinal {
            terms: vec![Term {
                exponent: a.clone(),
                coefficient: BigUint::one(),
            }],
        }
    }

    /// Builds an ordinal from `(exponent, coefficient)` pairs, checking the
    /// normal-form invariants.
    pub fn from_terms(terms: Vec<(Ordinal, BigUint)>) -> Result<Self, OrdinalError> {
        for w in terms.windows(2) {
            if w[0].0 <= w[1].0 {
                return Err(OrdinalError::NotNormal(format!(
                    "exponents not strictly decreasing: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if terms.iter().any(|(_, c)| c.is_zero()) {
            return Err(OrdinalError::NotNormal("zero coefficient".into()));
        }
        Ok(Ordinal {
            terms: terms
                .into_iter()
                .map(|(exponent, coefficient)| Term {
                    exponent,
                    coefficient,
                })
                .collect(),
        })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(|t| t.exponent.is_zero())
    }

    /// The value as a machine integer, if finite and small enough.
    pub fn to_u64(&self) -> Option<u64> {
        match self.terms.as_slice() {
            [] => Some(0),
            [t] if t.exponent.is_zero() => t.coefficient.to_u64(),
            _ => None,
        }
    }

    pub fn leading_exponent(&self) -> Option<&Ordinal> {
        self.terms.first().map(|t| &t.exponent)
    }

    pub fn compare(&self, other: &Ordinal) -> Ordering {
        self.cmp(other)
    }

    /// Ordinary (left-absorbing) ordinal sum.
    pub fn add(&self, other: &Ordinal) -> Ordinal {
        let Some(lead) = other.leading_exponent() else {
            return self.clone();
        };
        let mut terms: Vec<Term> = self
            .terms
            .iter()
            .take_while(|t| t.exponent > *lead)
            .cloned()
            .collect();
        let mut rest = other.terms.clone();
        if let Some(same) = self.terms.iter().find(|t| t.exponent == *lead) {
            rest[0].coefficient += &same.coefficient;
        }
        terms.extend(rest);
        Ordinal { terms }
    }

    /// Ordinal product `self * other` (`other` copies of `self`).
    pub fn mul(&self, other: &Ordinal) -> Ordinal {
        if self.is_zero() || other.is_zero() {
            return Ordinal::zero();
        }
        let lead = &self.terms[0].exponent;
        let mut acc = Ordinal::zero();
        for t in &other.terms {
            let piece = if t.exponent.is_zero() {
                let mut terms = self.terms.clone();
                terms[0].coefficient *= &t.coefficient;
                Ordinal { terms }
            } else {
                Ordinal {
                    terms: vec![Term {
                        exponent: lead.add(&t.exponent),
                        coefficient: t.coefficient.clone(),
                    }],
                }
            };
            acc = acc.add(&piece);
        }
        acc
    }

    /// Hessenberg (natural) sum: merge like exponents and add coefficients.
    pub fn natural_sum(&self, other: &Ordinal) -> Ordinal {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        let mut terms = Vec::with_capacity(a.len() + b.len());
        while i < a.len() && j < b.len() {
            match a[i].exponent.cmp(&b[j].exponent) {
                Ordering::Greater => {
                    terms.push(a[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    terms.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    terms.push(Term {
                        exponent: a[i].exponent.clone(),
                        coefficient: &a[i].coefficient + &b[j].coefficient,
                    });
                    i += 1;
                    j += 1;
                }
            }
        }
        terms.extend_from_slice(&a[i..]);
        terms.extend_from_slice(&b[j..]);
        Ordinal { terms }
    }

    pub fn classify(&self) -> Kind {
        match self.terms.last() {
            None => Kind::Zero,
            Some(last) if last.exponent.is_zero() => {
                let mut terms = self.terms.clone();
                let last = terms.last_mut().unwrap();
                last.coefficient -= 1u32;
                if last.coefficient.is_zero() {
                    terms.pop();
                }
                Kind::Successor(Ordinal { terms })
            }
            Some(_) => Kind::Limit,
        }
    }

    pub fn is_limit(&self) -> bool {
        matches!(self.classify(), Kind::Limit)
    }

    pub fn successor(&self) -> Ordinal {
        self.add(&Ordinal::one())
    }

    /// All pairs `(g0, g1)` with `g0 (+) g1 = self`, ordered lexicographically
    /// by the coefficient split of `g0`. The count is the product of
    /// `(n_i + 1)` over the coefficients `n_i`.
    ///
    /// Panics if a coefficient does not fit in `u64`; such a list could not be
    /// materialized anyway.
    pub fn natural_decompositions(&self) -> Vec<(Ordinal, Ordinal)> {
        let caps: Vec<u64> = self
            .terms
            .iter()
            .map(|t| {
                t.coefficient
                    .to_u64()
                    .expect("coefficient too large to enumerate decompositions")
            })
            .collect();
        let mut out = Vec::new();
        let mut split = vec![0u64; caps.len()];
        loop {
            let build = |pick: &dyn Fn(usize) -> u64| Ordinal {
                terms: self
                    .terms
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| pick(*i) > 0)
                    .map(|(i, t)| Term {
                        exponent: t.exponent.clone(),
                        coefficient: BigUint::from(pick(i)),
                    })
                    .collect(),
            };
            let left = build(&|i| split[i]);
            let right = build(&|i| caps[i] - split[i]);
            out.push((left, right));
            // odometer, last position fastest
            let mut pos = caps.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                if split[pos] < caps[pos] {
                    split[pos] += 1;
                    split[pos + 1..].iter_mut().for_each(|s| *s = 0);
                    break;
                }
            }
        }
    }

    /// The `n`-th element of the standard fundamental sequence of a limit
    /// ordinal: for `g + w^(b+1)` it is `g + w^b * n`, for `g + w^b` with
    /// `b` a limit it is `g + w^(b[n])`. Returns `None` unless `self` is a
    /// limit.
    pub fn fundamental(&self, n: u64) -> Option<Ordinal> {
        if !self.is_limit() {
            return None;
        }
        let mut base = self.terms.clone();
        let last = base.last_mut().unwrap();
        let beta = last.exponent.clone();
        last.coefficient -= 1u32;
        if last.coefficient.is_zero() {
            base.pop();
        }
        let base = Ordinal { terms: base };
        let tail = match beta.classify() {
            Kind::Successor(pred) => {
                if n == 0 {
                    Ordinal::zero()
                } else {
                    Ordinal {
                        terms: vec![Term {
                            exponent: pred,
                            coefficient: BigUint::from(n),
                        }],
                    }
                }
            }
            Kind::Limit => Ordinal::omega_power(&beta.fundamental(n)?),
            Kind::Zero => unreachable!("limit ordinals have positive trailing exponent"),
        };
        Some(base.add(&tail))
    }

    /// Canonical text form, e.g. `w^2*3 + w + 5`.
    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                if t.exponent.is_zero() {
                    return t.coefficient.to_string();
                }
                let mut s = match t.exponent.to_u64() {
                    Some(1) => "w".to_string(),
                    Some(k) => format!("w^{k}"),
                    None => format!("w^({})", t.exponent.render()),
                };
                if !t.coefficient.is_one() {
                    s.push('*');
                    s.push_str(&t.coefficient.to_string());
                }
                s
            })
            .collect();
        parts.join(" + ")
    }

    /// Parses `w^(<ordinal>)*<nat> + ...`. Terms are combined with ordinary
    /// ordinal addition, so non-normal input such as `1 + w` is accepted and
    /// normalized.
    pub fn parse(text: &str) -> Result<Ordinal, OrdinalError> {
        let mut p = Parser {
            src: text,
            pos: 0,
        };
        let value = p.sum()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(value)
    }
}

impl From<u64> for Ordinal {
    fn from(n: u64) -> Self {
        if n == 0 {
            return Ordinal::zero();
        }
        Ordinal {
            terms: vec![Term {
                exponent: Ordinal::zero(),
                coefficient: BigUint::from(n),
            }],
        }
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl fmt::Debug for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ordinal({})", self.render())
    }
}

impl std::str::FromStr for Ordinal {
    type Err = OrdinalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ordinal::parse(s)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> OrdinalError {
        OrdinalError::Parse {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, want: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(want) {
            self.pos += want.len_utf8();
            true
        } else {
            false
        }
    }

    fn eat_omega(&mut self) -> bool {
        self.eat('w') || self.eat('ω')
    }

    fn nat(&mut self) -> Result<BigUint, OrdinalError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a natural number"));
        }
        Ok(self.src[start..self.pos].parse().expect("digits"))
    }

    fn sum(&mut self) -> Result<Ordinal, OrdinalError> {
        let mut acc = self.term()?;
        while self.eat('+') {
            let t = self.term()?;
            acc = acc.add(&t);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Ordinal, OrdinalError> {
        self.skip_ws();
        if self.eat_omega() {
            let exponent = if self.eat('^') {
                self.exponent()?
            } else {
                Ordinal::one()
            };
            let coefficient = if self.eat('*') {
                self.nat()?
            } else {
                BigUint::one()
            };
            if coefficient.is_zero() {
                return Ok(Ordinal::zero());
            }
            return Ok(Ordinal {
                terms: vec![Term {
                    exponent,
                    coefficient,
                }],
            });
        }
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                let n = self.nat()?;
                if n.is_zero() {
                    Ok(Ordinal::zero())
                } else {
                    Ok(Ordinal {
                        terms: vec![Term {
                            exponent: Ordinal::zero(),
                            coefficient: n,
                        }],
                    })
                }
            }
            _ => Err(self.error("expected `w` or a natural number")),
        }
    }

    fn exponent(&mut self) -> Result<Ordinal, OrdinalError> {
        self.skip_ws();
        if self.eat('(') {
            let inner = self.sum()?;
            if !self.eat(')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(inner);
        }
        if self.eat_omega() {
            return Ok(Ordinal::omega());
        }
        let n = self.nat()?;
        Ok(if n.is_zero() {
            Ordinal::zero()
        } else {
            Ordinal {
                terms: vec![Term {
                    exponent: Ordinal::zero(),
                    coefficient: n,
                }],
            }
        })
    }
}

// JSON: an ordinal is an array of `[exponent, coefficient]` pairs with the
// exponent encoded recursively; `[]` is zero. Coefficients are numbers, or
// decimal strings when they exceed u64. The canonical text form is also
// accepted on input.

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoefRepr {
    Num(u64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OrdinalRepr {
    Terms(Vec<(Ordinal, CoefRepr)>),
    Text(String),
}

impl Serialize for Ordinal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = serializer.serialize_seq(Some(self.terms.len()))?;
        for t in &self.terms {
            let coef = match t.coefficient.to_u64() {
                Some(c) => CoefRepr::Num(c),
                None => CoefRepr::Text(t.coefficient.to_string()),
            };
            seq.serialize_element(&(&t.exponent, coef))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Ordinal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match OrdinalRepr::deserialize(deserializer)? {
            OrdinalRepr::Text(s) => Ordinal::parse(&s).map_err(D::Error::custom),
            OrdinalRepr::Terms(pairs) => {
                let mut terms = Vec::with_capacity(pairs.len());
                for (e, c) in pairs {
                    let c = match c {
                        CoefRepr::Num(n) => BigUint::from(n),
                        CoefRepr::Text(s) => s.parse().map_err(D::Error::custom)?,
                    };
                    terms.push((e, c));
                }
                Ordinal::from_terms(terms).map_err(D::Error::custom)
            }
        }
    }
}
