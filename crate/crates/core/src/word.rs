//! Reduced words in the free product `⟨a, b ; a^r = b^s = id⟩`.
//!
//! Syllables are stored in application order: index 0 is applied first.
//! The printed form reads right to left, so `a^2 b^-1 a` applies `a`, then
//! `b^-1`, then `a^2`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Letter {
    A,
    B,
}

impl Letter {
    pub fn other(self) -> Letter {
        match self {
            Letter::A => Letter::B,
            Letter::B => Letter::A,
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Letter::A => "a",
            Letter::B => "b",
        })
    }
}

/// Orders of the two generators; `None` is infinite order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Orders {
    pub r: Option<u32>,
    pub s: Option<u32>,
}

impl Orders {
    pub const FREE: Orders = Orders { r: None, s: None };

    pub fn new(r: Option<u32>, s: Option<u32>) -> Result<Self, String> {
        for (name, o) in [("r", r), ("s", s)] {
            if let Some(n) = o {
                if n < 2 {
                    return Err(format!("order {name} = {n} must be at least 2"));
                }
            }
        }
        Ok(Orders { r, s })
    }

    pub fn of(&self, letter: Letter) -> Option<u32> {
        match letter {
            Letter::A => self.r,
            Letter::B => self.s,
        }
    }

    /// Canonical exponent: `{1..n-1}` for finite order `n`, 0 means drop.
    pub fn normalize(&self, letter: Letter, e: i64) -> i64 {
        match self.of(letter) {
            Some(n) => e.rem_euclid(n as i64),
            None => e,
        }
    }
}

/// One signed letter `x^{±1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignedLetter {
    pub letter: Letter,
    pub inverse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syllable {
    pub letter: Letter,
    pub exp: i64,
}

impl Syllable {
    pub fn new(letter: Letter, exp: i64) -> Self {
        Syllable { letter, exp }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReducedWord {
    syllables: Vec<Syllable>,
    orders: Orders,
}

impl PartialOrd for Orders {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Orders {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.r, self.s).cmp(&(other.r, other.s))
    }
}

/// Stack-based normalization. Merges adjacent same-letter syllables,
/// reduces exponents and drops trivial syllables in one pass.
pub fn make_reduced(raw: &[Syllable], orders: Orders) -> ReducedWord {
    let mut stack: Vec<Syllable> = Vec::with_capacity(raw.len());
    for s in raw {
        let e = orders.normalize(s.letter, s.exp);
        if e == 0 {
            continue;
        }
        match stack.last_mut() {
            Some(top) if top.letter == s.letter => {
                let merged = orders.normalize(s.letter, top.exp + e);
                if merged == 0 {
                    stack.pop();
                } else {
                    top.exp = merged;
                }
            }
            _ => stack.push(Syllable::new(s.letter, e)),
        }
    }
    ReducedWord { syllables: stack, orders }
}

/// `w = W3⁻¹ ∗ W4 ∗ W3` with `W4` cyclically reduced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimalConjugate {
    pub w3: ReducedWord,
    pub w4: ReducedWord,
    /// True when the type-1 core had equal first and last letters, so one
    /// extra syllable merge was needed.
    pub simplified: bool,
}

impl ReducedWord {
    pub fn identity(orders: Orders) -> Self {
        ReducedWord { syllables: Vec::new(), orders }
    }

    pub fn generator(letter: Letter, exp: i64, orders: Orders) -> Self {
        make_reduced(&[Syllable::new(letter, exp)], orders)
    }

    pub fn from_syllables(raw: &[Syllable], orders: Orders) -> Self {
        make_reduced(raw, orders)
    }

    pub fn syllables(&self) -> &[Syllable] {
        &self.syllables
    }

    pub fn orders(&self) -> Orders {
        self.orders
    }

    /// Number of syllables `l`.
    pub fn len(&self) -> usize {
        self.syllables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.syllables.is_empty()
    }

    /// `Σ |r_i|`.
    pub fn letter_len(&self) -> usize {
        self.syllables.iter().map(|s| s.exp.unsigned_abs() as usize).sum()
    }

    /// Flattened letters in application order.
    pub fn letters(&self) -> Vec<SignedLetter> {
        self.syllables
            .iter()
            .flat_map(|s| {
                std::iter::repeat_n(
                    SignedLetter { letter: s.letter, inverse: s.exp < 0 },
                    s.exp.unsigned_abs() as usize,
                )
            })
            .collect()
    }

    /// Syllables `range` as a word (a slice of a reduced word is reduced).
    pub fn slice(&self, range: std::ops::Range<usize>) -> ReducedWord {
        ReducedWord { syllables: self.syllables[range].to_vec(), orders: self.orders }
    }

    /// `self ∗ other`: `other` is applied first.
    pub fn concat(&self, other: &ReducedWord) -> ReducedWord {
        assert_eq!(self.orders, other.orders, "words over different orders");
        let raw: Vec<Syllable> = other.syllables.iter().chain(&self.syllables).copied().collect();
        make_reduced(&raw, self.orders)
    }

    pub fn inverse(&self) -> ReducedWord {
        let raw: Vec<Syllable> = self
            .syllables
            .iter()
            .rev()
            .map(|s| Syllable::new(s.letter, -s.exp))
            .collect();
        make_reduced(&raw, self.orders)
    }

    /// `other⁻¹ ∗ self ∗ other`.
    pub fn conjugate_by(&self, other: &ReducedWord) -> ReducedWord {
        other.inverse().concat(self).concat(other)
    }

    pub fn pow(&self, n: u32) -> ReducedWord {
        let raw: Vec<Syllable> = (0..n).flat_map(|_| self.syllables.iter().copied()).collect();
        make_reduced(&raw, self.orders)
    }

    fn is_inverse_exp(&self, letter: Letter, a: i64, b: i64) -> bool {
        self.orders.normalize(letter, a + b) == 0
    }

    /// Peels matching outer syllables: `w = W1⁻¹ ∗ W2 ∗ W1` without
    /// cancellation. `W1` is applied first.
    pub fn type1_decomposition(&self) -> (ReducedWord, ReducedWord) {
        let s = &self.syllables;
        let (mut lo, mut hi) = (0usize, s.len());
        while hi - lo >= 3 {
            let (first, last) = (s[lo], s[hi - 1]);
            if first.letter == last.letter && self.is_inverse_exp(first.letter, first.exp, last.exp) {
                lo += 1;
                hi -= 1;
            } else {
                break;
            }
        }
        (self.slice(0..lo), self.slice(lo..hi))
    }

    pub fn minimal_conjugate(&self) -> MinimalConjugate {
        let (w1, w2) = self.type1_decomposition();
        let core = w2.syllables();
        if core.len() >= 3 && core[0].letter == core[core.len() - 1].letter {
            // core = x^u ∗ M ∗ x^v with x^v applied first; conjugating by
            // x^v gives x^{u+v} ∗ M.
            let first = core[0];
            let last = core[core.len() - 1];
            let mut w4 = core[1..core.len() - 1].to_vec();
            w4.push(Syllable::new(first.letter, first.exp + last.exp));
            let mut w3 = w1.syllables.clone();
            w3.push(first);
            MinimalConjugate {
                w3: make_reduced(&w3, self.orders),
                w4: make_reduced(&w4, self.orders),
                simplified: true,
            }
        } else {
            MinimalConjugate { w3: w1, w4: w2, simplified: false }
        }
    }

    /// True when the word equals its own minimal conjugate, i.e. it is not a
    /// conjugate of a shorter word.
    pub fn is_cyclically_reduced(&self) -> bool {
        let s = &self.syllables;
        s.len() <= 1 || s[0].letter != s[s.len() - 1].letter
    }

    /// Shortest `p` and largest `n` with `p^n = w`.
    pub fn primitive_root(&self) -> (ReducedWord, u32) {
        assert!(!self.is_identity(), "identity has no primitive root");
        let mc = self.minimal_conjugate();
        if mc.w4.len() == 1 {
            let s = mc.w4.syllables[0];
            let n = s.exp.unsigned_abs() as u32;
            let p = ReducedWord::generator(s.letter, s.exp.signum(), self.orders);
            return (p.conjugate_by(&mc.w3), n);
        }
        let core = mc.w4.syllables();
        let l = core.len();
        let d = (1..=l)
            .find(|&d| l % d == 0 && (d..l).all(|i| core[i] == core[i - d]))
            .expect("d = l always works");
        let p4 = mc.w4.slice(0..d);
        (p4.conjugate_by(&mc.w3), (l / d) as u32)
    }

    /// Common primitive root when the two words are commensurable.
    pub fn commensurable(&self, other: &ReducedWord) -> Option<ReducedWord> {
        let (p, _) = self.primitive_root();
        let (q, _) = other.primitive_root();
        (p == q).then_some(p)
    }

    /// Like `commensurable`, but also accepts `u^n = v^{-m}`: the two words
    /// then generate commensurable cyclic groups.
    pub fn commensurable_up_to_inverse(&self, other: &ReducedWord) -> Option<ReducedWord> {
        let (p, _) = self.primitive_root();
        let (q, _) = other.primitive_root();
        (p == q || p == q.inverse()).then_some(p)
    }

    pub fn parse(text: &str, orders: Orders) -> Result<ReducedWord, ParseError> {
        let raw = parse_raw(text)?;
        Ok(make_reduced(&raw, orders))
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.syllables.is_empty() {
            return f.write_str("id");
        }
        for (i, s) in self.syllables.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if s.exp == 1 {
                write!(f, "{}", s.letter)?;
            } else {
                write!(f, "{}^{}", s.letter, s.exp)?;
            }
        }
        Ok(())
    }
}

impl Serialize for ReducedWord {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("word parse error at position {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

/// Raw syllables in application order from the right-to-left text form.
/// Accepts `a`, `b^3`, `a^-2`, `b^{-1}`, optional `*` separators, and `id`.
pub fn parse_raw(text: &str) -> Result<Vec<Syllable>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let err = |position: usize, message: &str| ParseError { position, message: message.to_string() };
    let mut out = Vec::new();
    let mut i = 0;
    let trimmed = text.trim();
    if trimmed.is_empty() || trimmed == "id" {
        return Ok(out);
    }
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() || c == '*' {
            i += 1;
            continue;
        }
        let letter = match c {
            'a' | 'A' => Letter::A,
            'b' | 'B' => Letter::B,
            _ => return Err(err(i, &format!("expected letter a or b, found '{c}'"))),
        };
        i += 1;
        let mut exp = 1i64;
        if i < chars.len() && chars[i] == '^' {
            i += 1;
            let braced = i < chars.len() && chars[i] == '{';
            if braced {
                i += 1;
            }
            let mut sign = 1i64;
            if i < chars.len() && (chars[i] == '-' || chars[i] == '+') {
                if chars[i] == '-' {
                    sign = -1;
                }
                i += 1;
            }
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if start == i {
                return Err(err(i, "expected exponent digits after '^'"));
            }
            let digits: String = chars[start..i].iter().collect();
            exp = sign * digits.parse::<i64>().map_err(|_| err(start, "exponent out of range"))?;
            if braced {
                if i < chars.len() && chars[i] == '}' {
                    i += 1;
                } else {
                    return Err(err(i, "expected '}'"));
                }
            }
        }
        out.push(Syllable::new(letter, exp));
    }
    out.reverse();
    Ok(out)
}
