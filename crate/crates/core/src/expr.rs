//! Composition trees over the inputs of an n-matrix mean.
//!
//! Text syntax:
//!
//! ```text
//! expr  := term ( '#' [ '^' exp ] term )*        left-associative
//! term  := atom ( '^' exp )*
//! exp   := '{' number '}' | number               number: -4/3, 0.5, 2
//! atom  := 'A' index | '(' expr ')' | name '(' expr { ',' expr } ')'
//! name  := alm | bmp | palfia | new | new_alm, optionally with the arity
//!          appended (alm3, new4)
//! ```
//!
//! `X # Y` is the two-matrix geometric mean, `X #^{t} Y` the geodesic point
//! at `t` and `X^{t}` a real matrix power. Inputs are 1-based (`A1`).

use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::linalg::{mat_power, sharp, sharp_t, MatrixTuple, OpCounters, SpdMatrix};
use crate::means::{compute_mean, Inner3, IterationConfig, MeanKind};
use crate::perm::{all_permutations, PermGroup, Permutation};

#[derive(Debug, Clone, PartialEq)]
pub enum QuasiMeanExpr {
    /// Input matrix, 0-based.
    Input(usize),
    Sharp(Box<QuasiMeanExpr>, Box<QuasiMeanExpr>),
    SharpT(Box<QuasiMeanExpr>, Box<QuasiMeanExpr>, f64),
    Power(Box<QuasiMeanExpr>, f64),
    Named(MeanKind, Vec<QuasiMeanExpr>),
    /// `child` evaluated on `σ·A = (A_{σ(1)}, …, A_{σ(n)})`.
    Permuted(Permutation, Box<QuasiMeanExpr>),
}

use QuasiMeanExpr as E;

impl QuasiMeanExpr {
    /// Input `A_i` with 1-based `i`.
    pub fn input(i: usize) -> Self {
        assert!(i >= 1, "inputs are 1-based");
        E::Input(i - 1)
    }

    pub fn sharp(a: Self, b: Self) -> Self {
        E::Sharp(Box::new(a), Box::new(b))
    }

    pub fn sharp_t(a: Self, b: Self, t: f64) -> Self {
        E::SharpT(Box::new(a), Box::new(b), t)
    }

    pub fn power(a: Self, t: f64) -> Self {
        E::Power(Box::new(a), t)
    }

    /// `kind(A1, …, An)`.
    pub fn named(kind: MeanKind, n: usize) -> Self {
        E::Named(kind, (1..=n).map(E::input).collect())
    }

    pub fn parse(src: &str) -> std::result::Result<Self, ParseError> {
        Parser::new(src).parse()
    }

    /// Number of inputs the expression reads (largest index used).
    pub fn min_arity(&self) -> usize {
        match self {
            E::Input(i) => i + 1,
            E::Sharp(a, b) | E::SharpT(a, b, _) => a.min_arity().max(b.min_arity()),
            E::Power(a, _) => a.min_arity(),
            E::Named(_, children) => children.iter().map(E::min_arity).max().unwrap_or(0),
            E::Permuted(p, child) => p.degree().max(child.min_arity()),
        }
    }

    fn check_arity(&self, n: usize) -> Result<()> {
        match self {
            E::Input(i) if *i >= n => Err(Error::ArityMismatch {
                index: i + 1,
                arity: n,
            }),
            E::Input(_) => Ok(()),
            E::Sharp(a, b) | E::SharpT(a, b, _) => {
                a.check_arity(n)?;
                b.check_arity(n)
            }
            E::Power(a, _) => a.check_arity(n),
            E::Named(_, children) => children.iter().try_for_each(|c| c.check_arity(n)),
            E::Permuted(p, child) => {
                if p.degree() != n {
                    return Err(Error::DegreeMismatch {
                        left: p.degree(),
                        right: n,
                    });
                }
                child.check_arity(n)
            }
        }
    }

    pub fn eval(&self, tuple: &MatrixTuple, cfg: &IterationConfig) -> Result<SpdMatrix> {
        let mut counters = OpCounters::default();
        self.eval_with(tuple, cfg, &mut counters)
    }

    pub fn eval_with(
        &self,
        tuple: &MatrixTuple,
        cfg: &IterationConfig,
        counters: &mut OpCounters,
    ) -> Result<SpdMatrix> {
        self.check_arity(tuple.len())?;
        self.eval_inner(tuple, cfg, counters)
    }

    fn eval_inner(
        &self,
        tuple: &MatrixTuple,
        cfg: &IterationConfig,
        counters: &mut OpCounters,
    ) -> Result<SpdMatrix> {
        match self {
            E::Input(i) => Ok(tuple.get(*i).clone()),
            E::Sharp(a, b) => {
                let x = a.eval_inner(tuple, cfg, counters)?;
                let y = b.eval_inner(tuple, cfg, counters)?;
                sharp(&x, &y, counters)
            }
            E::SharpT(a, b, t) => {
                let x = a.eval_inner(tuple, cfg, counters)?;
                let y = b.eval_inner(tuple, cfg, counters)?;
                sharp_t(&x, &y, *t, counters)
            }
            E::Power(a, t) => Ok(mat_power(&a.eval_inner(tuple, cfg, counters)?, *t)),
            E::Named(kind, children) => {
                let items = children
                    .iter()
                    .map(|c| c.eval_inner(tuple, cfg, counters))
                    .collect::<Result<Vec<_>>>()?;
                if items.len() == 1 {
                    return Ok(items.into_iter().next().expect("one item"));
                }
                let out = compute_mean(*kind, &MatrixTuple::new(items)?, cfg)?;
                counters.merge(out.report.counters);
                Ok(out.mean)
            }
            E::Permuted(p, child) => child.eval_inner(&tuple.permuted(p)?, cfg, counters),
        }
    }

    /// `Qσ`: relabel input `i` as `σ(i)`, so that
    /// `eval(permute(Q, σ), A) = eval(Q, σ·A)`.
    pub fn permute(&self, sigma: &Permutation) -> Self {
        match self {
            E::Input(i) => E::Input(sigma.apply(*i)),
            E::Sharp(a, b) => E::sharp(a.permute(sigma), b.permute(sigma)),
            E::SharpT(a, b, t) => E::sharp_t(a.permute(sigma), b.permute(sigma), *t),
            E::Power(a, t) => E::power(a.permute(sigma), *t),
            E::Named(k, children) => {
                E::Named(*k, children.iter().map(|c| c.permute(sigma)).collect())
            }
            E::Permuted(p, child) => E::Permuted(sigma.compose_unchecked(p), child.clone()),
        }
    }

    /// Replace every `Permuted` node by the relabeled child.
    pub fn expand(&self) -> Self {
        match self {
            E::Input(i) => E::Input(*i),
            E::Sharp(a, b) => E::sharp(a.expand(), b.expand()),
            E::SharpT(a, b, t) => E::sharp_t(a.expand(), b.expand(), *t),
            E::Power(a, t) => E::power(a.expand(), *t),
            E::Named(k, children) => E::Named(*k, children.iter().map(E::expand).collect()),
            E::Permuted(p, child) => child.expand().permute(p),
        }
    }

    /// Exponents `w` with `Q(A) = Π A_i^{w_i}` on commuting inputs.
    pub fn exponents(&self, n: usize) -> Vec<f64> {
        match self {
            E::Input(i) => {
                let mut w = vec![0.0; n];
                if *i < n {
                    w[*i] = 1.0;
                }
                w
            }
            E::Sharp(a, b) => combine(&a.exponents(n), &b.exponents(n), 0.5),
            E::SharpT(a, b, t) => combine(&a.exponents(n), &b.exponents(n), *t),
            E::Power(a, t) => a.exponents(n).iter().map(|x| x * t).collect(),
            E::Named(_, children) => {
                let k = children.len() as f64;
                children.iter().fold(vec![0.0; n], |acc, c| {
                    acc.iter()
                        .zip(c.exponents(n))
                        .map(|(x, y)| x + y / k)
                        .collect()
                })
            }
            E::Permuted(_, _) => self.expand().exponents(n),
        }
    }

    /// Canonical form modulo the symmetries of `#` and of the named means.
    pub fn canonical(&self) -> Canon {
        match self {
            E::Input(i) => Canon::Input(*i),
            E::Sharp(a, b) => {
                let (x, y) = (a.canonical(), b.canonical());
                let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
                Canon::Node(NodeTag::Sharp, vec![lo, hi])
            }
            E::SharpT(a, b, t) => Canon::Node(
                NodeTag::SharpT(float_key(*t)),
                vec![a.canonical(), b.canonical()],
            ),
            E::Power(a, t) => Canon::Node(NodeTag::Power(float_key(*t)), vec![a.canonical()]),
            E::Named(kind, children) => {
                let mut cs: Vec<Canon> = children.iter().map(E::canonical).collect();
                if kind.is_symmetric() || cs.len() <= 2 {
                    cs.sort();
                } else {
                    cs = dihedral_min(&cs);
                }
                Canon::Node(NodeTag::Named(*kind), cs)
            }
            E::Permuted(_, _) => self.expand().canonical(),
        }
    }

    /// Permutations σ of the n inputs with `Qσ` canonically equal to `Q`:
    /// the symmetries provable from the symmetries of the building blocks.
    pub fn structural_stabilizer(&self, n: usize) -> Result<PermGroup> {
        self.check_arity(n)?;
        let base = self.canonical();
        let elements = all_permutations(n)?
            .into_iter()
            .filter(|s| self.permute(s).canonical() == base)
            .collect();
        PermGroup::from_elements(n, elements)
    }

    /// Top-level node and its children, for the composition analysis.
    pub(crate) fn split_top(&self) -> Option<(TopNode, Vec<QuasiMeanExpr>)> {
        match self {
            E::Sharp(a, b) => Some((TopNode::Sharp, vec![(**a).clone(), (**b).clone()])),
            E::SharpT(a, b, t) => Some((TopNode::SharpT(*t), vec![(**a).clone(), (**b).clone()])),
            E::Power(a, t) => Some((TopNode::Power(*t), vec![(**a).clone()])),
            E::Named(k, children) => Some((TopNode::Named(*k), children.clone())),
            E::Permuted(_, _) => self.expand().split_top(),
            E::Input(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum TopNode {
    Sharp,
    SharpT(f64),
    Power(f64),
    Named(MeanKind),
}

impl TopNode {
    /// The node applied to fresh inputs `A1..Ak`.
    pub(crate) fn over_inputs(self, inputs: Vec<QuasiMeanExpr>) -> QuasiMeanExpr {
        let mut it = inputs.into_iter();
        match self {
            TopNode::Sharp => E::sharp(it.next().expect("two"), it.next().expect("two")),
            TopNode::SharpT(t) => E::sharp_t(it.next().expect("two"), it.next().expect("two"), t),
            TopNode::Power(t) => E::power(it.next().expect("one"), t),
            TopNode::Named(k) => E::Named(k, it.collect()),
        }
    }
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - t) * x + t * y)
        .collect()
}

fn float_key(t: f64) -> u64 {
    if t == 0.0 {
        0.0f64.to_bits()
    } else {
        t.to_bits()
    }
}

fn dihedral_min(cs: &[Canon]) -> Vec<Canon> {
    let k = cs.len();
    let mut best: Option<Vec<Canon>> = None;
    for r in 0..k {
        for reflect in [false, true] {
            let seq: Vec<Canon> = (0..k)
                .map(|j| {
                    let idx = if reflect {
                        (r + k - j) % k
                    } else {
                        (r + j) % k
                    };
                    cs[idx].clone()
                })
                .collect();
            if best.as_ref().is_none_or(|b| seq < *b) {
                best = Some(seq);
            }
        }
    }
    best.unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeTag {
    Sharp,
    SharpT(u64),
    Power(u64),
    Named(MeanKind),
}

/// Expression tree with commutative children sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Canon {
    Input(usize),
    Node(NodeTag, Vec<Canon>),
}

fn kind_name(kind: MeanKind) -> &'static str {
    match kind {
        MeanKind::Alm => "alm",
        MeanKind::Bmp => "bmp",
        MeanKind::Palfia => "palfia",
        MeanKind::New(Inner3::Bmp) => "new",
        MeanKind::New(Inner3::Alm) => "new_alm",
    }
}

fn format_number(t: f64) -> String {
    for q in 1..=64u32 {
        let p = (t * f64::from(q)).round();
        if (t - p / f64::from(q)).abs() < 1e-14 {
            return if q == 1 {
                format!("{p}")
            } else {
                format!("{p}/{q}")
            };
        }
    }
    format!("{t:?}")
}

impl fmt::Display for QuasiMeanExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn operand(e: &QuasiMeanExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match e {
                E::Sharp(..) | E::SharpT(..) => write!(f, "({e})"),
                _ => write!(f, "{e}"),
            }
        }
        match self {
            E::Input(i) => write!(f, "A{}", i + 1),
            E::Sharp(a, b) => {
                operand(a, f)?;
                f.write_str("#")?;
                operand(b, f)
            }
            E::SharpT(a, b, t) => {
                operand(a, f)?;
                write!(f, "#^{{{}}}", format_number(*t))?;
                operand(b, f)
            }
            E::Power(a, t) => {
                match **a {
                    E::Input(_) | E::Named(..) => write!(f, "{a}")?,
                    _ => write!(f, "({a})")?,
                }
                write!(f, "^{{{}}}", format_number(*t))
            }
            E::Named(kind, children) => {
                write!(f, "{}(", kind_name(*kind))?;
                for (k, c) in children.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
            E::Permuted(_, _) => write!(f, "{}", self.expand()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    /// The source line with a caret under the offending position.
    pub fn render(&self, src: &str) -> String {
        let col = src[..self.offset.min(src.len())].chars().count();
        format!("{src}\n{}^ {}", " ".repeat(col), self.message)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

type PResult<T> = std::result::Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, pos: 0 }
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> PResult<()> {
        if self.eat(c) {
            Ok(())
        } else {
            match self.peek() {
                Some(found) => self.err(format!("expected '{c}', found '{found}'")),
                None => self.err(format!("expected '{c}', found end of input")),
            }
        }
    }

    fn parse(mut self) -> PResult<QuasiMeanExpr> {
        let e = self.expr()?;
        if let Some(c) = self.peek() {
            return self.err(format!("unexpected '{c}'"));
        }
        Ok(e)
    }

    fn expr(&mut self) -> PResult<QuasiMeanExpr> {
        let mut left = self.term()?;
        while self.eat('#') {
            if self.eat('^') || self.eat('_') {
                let t = self.exponent()?;
                let right = self.term()?;
                left = E::sharp_t(left, right, t);
            } else {
                let right = self.term()?;
                left = E::sharp(left, right);
            }
        }
        Ok(left)
    }

    fn term(&mut self) -> PResult<QuasiMeanExpr> {
        let mut base = self.atom()?;
        while self.eat('^') {
            let t = self.exponent()?;
            base = E::power(base, t);
        }
        Ok(base)
    }

    fn exponent(&mut self) -> PResult<f64> {
        if self.eat('{') {
            let v = self.number()?;
            self.expect('}')?;
            Ok(v)
        } else {
            self.number()
        }
    }

    fn decimal(&mut self) -> PResult<f64> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let len = rest
            .char_indices()
            .find(|&(i, c)| !(c.is_ascii_digit() || c == '.' || (i == 0 && c == '-')))
            .map_or(rest.len(), |(i, _)| i);
        let text = &rest[..len];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = start + len;
                Ok(v)
            }
            _ => self.err("expected a number"),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let num = self.decimal()?;
        if self.eat('/') {
            let at = self.pos;
            let den = self.decimal()?;
            if den == 0.0 {
                self.pos = at;
                return self.err("zero denominator");
            }
            Ok(num / den)
        } else {
            Ok(num)
        }
    }

    fn atom(&mut self) -> PResult<QuasiMeanExpr> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let word: String = self.src[self.pos..]
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                    .collect();
                self.pos += word.len();
                if let Some(digits) = word.strip_prefix('A') {
                    if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
                        let i: usize = digits.parse().map_err(|_| ParseError {
                            offset: start,
                            message: "bad input index".into(),
                        })?;
                        if i == 0 {
                            self.pos = start;
                            return self.err("inputs are numbered from A1");
                        }
                        return Ok(E::Input(i - 1));
                    }
                }
                self.named(&word, start)
            }
            Some(c) => self.err(format!("unexpected '{c}'")),
            None => self.err("unexpected end of input"),
        }
    }

    fn named(&mut self, word: &str, start: usize) -> PResult<QuasiMeanExpr> {
        let stem = word.trim_end_matches(|c: char| c.is_ascii_digit());
        let arity: Option<usize> = word[stem.len()..].parse().ok();
        let kind = match stem {
            "alm" => MeanKind::Alm,
            "bmp" => MeanKind::Bmp,
            "palfia" => MeanKind::Palfia,
            "new" => MeanKind::New(Inner3::Bmp),
            "new_alm" => MeanKind::New(Inner3::Alm),
            _ => {
                self.pos = start;
                return self.err(format!("unknown name '{word}'"));
            }
        };
        self.expect('(')?;
        let mut children = vec![self.expr()?];
        while self.eat(',') {
            children.push(self.expr()?);
        }
        self.expect(')')?;
        if let Some(k) = arity {
            if k != children.len() {
                self.pos = start;
                return self.err(format!(
                    "{word} takes {k} arguments, got {}",
                    children.len()
                ));
            }
        }
        if children.len() < 2 {
            self.pos = start;
            return self.err(format!("{stem} needs at least two arguments"));
        }
        Ok(E::Named(kind, children))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::rel_diff;
    use crate::sampling::SpdSampler;
    use rand::seq::IndexedRandom;
    use rand::SeedableRng;

    fn parse(s: &str) -> QuasiMeanExpr {
        QuasiMeanExpr::parse(s).unwrap()
    }

    fn cfg() -> IterationConfig {
        IterationConfig::default()
    }

    #[test]
    fn parses_the_classic_compositions() {
        let g4 = parse("(A1#A2)#(A3#A4)");
        assert_eq!(
            g4,
            E::sharp(
                E::sharp(E::input(1), E::input(2)),
                E::sharp(E::input(3), E::input(4))
            )
        );
        let grec = parse("(A1^{4/3}#A2^{4/3})#A3^{2/3}");
        assert_eq!(grec.min_arity(), 3);
        assert_eq!(
            parse("A1#A2#A3"),
            E::sharp(E::sharp(E::input(1), E::input(2)), E::input(3))
        );
        assert_eq!(
            parse("A1 #^{1/3} A2"),
            E::sharp_t(E::input(1), E::input(2), 1.0 / 3.0)
        );
        assert_eq!(parse("bmp3(A1, A2, A3)"), E::named(MeanKind::Bmp, 3));
        assert_eq!(parse("A1^-2"), E::power(E::input(1), -2.0));
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "(A1#A2)#(A3#A4)",
            "(A1^{4/3}#A2^{4/3})#A3^{2/3}",
            "bmp((A1#A2)#(A3#A4), (A1#A3)#(A2#A4), (A1#A4)#(A2#A3))",
            "A1#^{1/3}(A2#A3)",
            "palfia(A1, A2, A3, A4)^{2}",
        ] {
            let e = parse(s);
            assert_eq!(parse(&e.to_string()), e, "{s}");
        }
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = QuasiMeanExpr::parse("(A1#A2").unwrap_err();
        assert_eq!(err.offset, 6);
        let rendered = err.render("(A1#A2");
        assert!(
            rendered.ends_with("      ^ expected ')', found end of input"),
            "{rendered}"
        );

        assert_eq!(QuasiMeanExpr::parse("A1#B2").unwrap_err().offset, 3);
        assert_eq!(QuasiMeanExpr::parse("A0").unwrap_err().offset, 0);
        assert!(QuasiMeanExpr::parse("alm3(A1, A2)").is_err());
        assert!(QuasiMeanExpr::parse("A1^{1/0}").is_err());
        assert!(QuasiMeanExpr::parse("A1 A2").is_err());
    }

    #[test]
    fn scalar_tuple_gives_input_back() {
        let a = fixtures::matricibuffe().get(3).clone();
        let t = MatrixTuple::scalar(&a, 4).unwrap();
        let out = parse("(A1#A2)#(A3#A4)").eval(&t, &cfg()).unwrap();
        assert!(rel_diff(out.as_matrix(), a.as_matrix()) < 1e-13);
    }

    #[test]
    fn grec_on_commuting_scalars() {
        let (a, b, c) = (2.0f64, 5.0, 0.3);
        let t = MatrixTuple::new(vec![
            SpdMatrix::from_diagonal(&[a, 1.0]).unwrap(),
            SpdMatrix::from_diagonal(&[b, 2.0]).unwrap(),
            SpdMatrix::from_diagonal(&[c, 3.0]).unwrap(),
        ])
        .unwrap();
        let out = parse("(A1^{4/3}#A2^{4/3})#A3^{2/3}")
            .eval(&t, &cfg())
            .unwrap();
        let expected = ((a.powf(4.0 / 3.0) * b.powf(4.0 / 3.0)).sqrt() * c.powf(2.0 / 3.0)).sqrt();
        assert!((out.get(0, 0) - expected).abs() / expected < 1e-14);
        assert!((expected - (a * b * c).cbrt()).abs() < 1e-14);
        assert_eq!(
            parse("(A1^{4/3}#A2^{4/3})#A3^{2/3}").exponents(3),
            vec![1.0 / 3.0; 3]
        );
    }

    #[test]
    fn relabeling_connects_pairings() {
        let g4 = parse("(A1#A2)#(A3#A4)");
        let r = parse("(A1#A3)#(A2#A4)");
        let swap = Permutation::parse("(2 3)", 4).unwrap();
        assert_eq!(g4.permute(&swap), r);
    }

    #[test]
    fn permute_by_identity_is_structural_identity() {
        let e = parse("bmp(A1#A2, A3, A4#^{1/3}A1)");
        assert_eq!(e.permute(&Permutation::identity(4)), e);
    }

    #[test]
    fn permuted_evaluation_matches_permuted_tuple() {
        let exprs = [
            parse("(A1#A2)#(A3#A4)"),
            parse("(A1^{4/3}#A2^{4/3})#A3^{2/3}#^{1/4}A4"),
            parse("palfia(A4, A2, A1#A3)"),
        ];
        let sampler = SpdSampler::new(77, 3, 0.2, 5.0).unwrap();
        let tuples = sampler.sample_tuples(4, 50);
        let perms = all_permutations(4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for (k, t) in tuples.iter().enumerate() {
            let sigma = perms.choose(&mut rng).unwrap();
            let e = &exprs[k % exprs.len()];
            let lhs = e.permute(sigma).eval(t, &cfg()).unwrap();
            let rhs = e.eval(&t.permuted(sigma).unwrap(), &cfg()).unwrap();
            assert!(rel_diff(lhs.as_matrix(), rhs.as_matrix()) < 1e-14);
            let wrapped = E::Permuted(sigma.clone(), Box::new(e.clone()));
            let via_node = wrapped.eval(t, &cfg()).unwrap();
            assert!(rel_diff(via_node.as_matrix(), rhs.as_matrix()) < 1e-14);
        }
    }

    #[test]
    fn swapping_pairs_evaluates_equal() {
        let e = parse("(A1#A2)#(A3#A4)");
        let s = Permutation::parse("(13)(24)", 4).unwrap();
        let swapped = e.permute(&s);
        assert_eq!(swapped, parse("(A3#A4)#(A1#A2)"));
        let sampler = SpdSampler::new(3, 3, 0.2, 5.0).unwrap();
        for t in sampler.sample_tuples(4, 5) {
            let x = e.eval(&t, &cfg()).unwrap();
            let y = swapped.eval(&t, &cfg()).unwrap();
            assert!(rel_diff(x.as_matrix(), y.as_matrix()) < 1e-13);
        }
    }

    #[test]
    fn structural_stabilizers() {
        let r = parse("(A1#A3)#(A2#A4)");
        let h = r.structural_stabilizer(4).unwrap();
        assert_eq!(h, PermGroup::dihedral(4).unwrap());
        assert_eq!(parse("A1#A2").structural_stabilizer(2).unwrap().order(), 2);
        assert_eq!(
            parse("(A1^{4/3}#A2^{4/3})#A3^{2/3}")
                .structural_stabilizer(3)
                .unwrap()
                .order(),
            2
        );
        assert_eq!(
            E::named(MeanKind::Palfia, 4)
                .structural_stabilizer(4)
                .unwrap(),
            PermGroup::dihedral(4).unwrap()
        );
        assert_eq!(
            E::named(MeanKind::Bmp, 4)
                .structural_stabilizer(4)
                .unwrap()
                .order(),
            24
        );
    }

    #[test]
    fn arity_is_checked() {
        let t = fixtures::matricibuffe();
        assert!(matches!(
            parse("A1#A5").eval(&t, &cfg()),
            Err(Error::ArityMismatch { index: 5, arity: 4 })
        ));
    }

    #[test]
    fn named_nodes_count_roots() {
        let t = fixtures::matricibuffe();
        let mut c = OpCounters::default();
        parse("bmp((A1#A2)#(A3#A4), (A1#A3)#(A2#A4), (A1#A4)#(A2#A3))")
            .eval_with(&t, &cfg(), &mut c)
            .unwrap();
        let direct =
            crate::means::new_mean4(t.get(0), t.get(1), t.get(2), t.get(3), Inner3::Bmp, &cfg())
                .unwrap();
        assert_eq!(c, direct.report.counters);
    }
}
