//! Enumeration of `chi(0^q)`: the empty word together with every binary word
//! that ends in 1 and contains no run of `q` zeros.
//!
//! Two traversals are provided. [`fold_products`] walks the words in exact
//! rational arithmetic and hands each corner value to a visitor. The
//! [`fold_log_corners`] engine does the same walk with scaled integer row
//! vectors and only reports `ln |corner|`; it powers every series in
//! [`crate::gle`].

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::conjugate::{dot, SentinelFactorization};
use crate::error::{Error, Result};
use crate::exactmat::{bigint_ln_abs, Rational, RationalMatrix};

/// Longest word representable by [`BinaryWord`].
pub const MAX_WORD_LEN: usize = 64;

/// A binary word of length at most 64. Symbol `i` (0 = leftmost) is bit `i`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BinaryWord {
    bits: u64,
    len: u8,
}

impl BinaryWord {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn ones(len: usize) -> Self {
        assert!(len <= MAX_WORD_LEN);
        let bits = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        Self {
            bits,
            len: len as u8,
        }
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_WORD_LEN);
        Self {
            bits: 0,
            len: len as u8,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut w = Self::empty();
        for &b in bits {
            w = w.push(b);
        }
        w
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len());
        self.bits >> i & 1 == 1
    }

    pub fn push(self, bit: bool) -> Self {
        assert!(self.len() < MAX_WORD_LEN, "word too long");
        Self {
            bits: self.bits | (bit as u64) << self.len,
            len: self.len + 1,
        }
    }

    pub fn concat(&self, other: &Self) -> Self {
        assert!(self.len() + other.len() <= MAX_WORD_LEN, "word too long");
        Self {
            bits: self.bits | other.bits << self.len,
            len: self.len + other.len,
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Membership in `chi(0^q)`.
    pub fn in_language(&self, q: u32) -> bool {
        if self.is_empty() {
            return true;
        }
        if !self.get(self.len() - 1) {
            return false;
        }
        let mut run = 0;
        for b in self.iter() {
            run = if b { 0 } else { run + 1 };
            if run >= q {
                return false;
            }
        }
        true
    }
}

impl fmt::Display for BinaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("∅");
        }
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryWord({self})")
    }
}

impl FromStr for BinaryWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s == "∅" {
            return Ok(Self::empty());
        }
        if s.len() > MAX_WORD_LEN {
            return Err(Error::InvalidArgument(format!("word longer than {MAX_WORD_LEN}")));
        }
        s.chars().try_fold(Self::empty(), |w, c| match c {
            '0' => Ok(w.push(false)),
            '1' => Ok(w.push(true)),
            _ => Err(Error::InvalidArgument(format!("bad symbol {c:?} in word"))),
        })
    }
}

/// Words of `chi(0^q)` with a fixed length, in lexicographic order.
pub struct WordsOfLength {
    q: u32,
    target: usize,
    // (prefix, trailing zero run)
    stack: Vec<(BinaryWord, u32)>,
}

impl Iterator for WordsOfLength {
    type Item = BinaryWord;

    fn next(&mut self) -> Option<BinaryWord> {
        while let Some((w, run)) = self.stack.pop() {
            if w.len() == self.target {
                if self.target == 0 || w.get(self.target - 1) {
                    return Some(w);
                }
                continue;
            }
            // pushed in reverse so that 0 is explored first
            self.stack.push((w.push(true), 0));
            if run + 1 < self.q {
                self.stack.push((w.push(false), run + 1));
            }
        }
        None
    }
}

pub fn words_of_length(q: u32, len: usize) -> WordsOfLength {
    assert!(q >= 1, "q must be positive");
    assert!(len <= MAX_WORD_LEN);
    WordsOfLength {
        q,
        target: len,
        stack: vec![(BinaryWord::empty(), 0)],
    }
}

/// `c_0 = 1`, `c_l = sum_{i=1..min(q,l)} c_{l-i}`.
pub fn word_count(q: u32, len: usize) -> u128 {
    word_counts(q, len)[len]
}

pub fn word_counts(q: u32, max_len: usize) -> Vec<u128> {
    assert!(q >= 1, "q must be positive");
    let mut c = vec![0u128; max_len + 1];
    c[0] = 1;
    for l in 1..=max_len {
        c[l] = (1..=(q as usize).min(l)).map(|i| c[l - i]).sum();
    }
    c
}

/// Visits every word of `chi(0^q)` up to `max_len` with its exact corner
/// value `beta^T D_w alpha`, depth-first in lexicographic order.
pub fn fold_products<E, V>(
    fact: &SentinelFactorization,
    max_len: usize,
    mut visitor: V,
) -> std::result::Result<(), E>
where
    V: FnMut(&BinaryWord, &Rational) -> std::result::Result<(), E>,
{
    assert!(max_len <= MAX_WORD_LEN);
    let beta = fact.beta().to_vec();
    visitor(&BinaryWord::empty(), &dot(&beta, fact.alpha()))?;
    fold_exact_rec(fact, max_len, BinaryWord::empty(), 0, &beta, &mut visitor)
}

fn fold_exact_rec<E, V>(
    fact: &SentinelFactorization,
    max_len: usize,
    w: BinaryWord,
    run: u32,
    row: &[Rational],
    visitor: &mut V,
) -> std::result::Result<(), E>
where
    V: FnMut(&BinaryWord, &Rational) -> std::result::Result<(), E>,
{
    if w.len() == max_len {
        return Ok(());
    }
    if run + 1 < fact.q() {
        let child = fact.d0().left_mul_vec(row);
        fold_exact_rec(fact, max_len, w.push(false), run + 1, &child, visitor)?;
    }
    let child = fact.d1().left_mul_vec(row);
    let cw = w.push(true);
    visitor(&cw, &dot(&child, fact.alpha()))?;
    fold_exact_rec(fact, max_len, cw, 0, &child, visitor)
}

/// Receives `ln |corner|` (or `None` for an exactly zero corner) for each
/// visited word. Sinks for disjoint parts of the word tree are merged in a
/// fixed order, so results do not depend on the number of worker threads.
pub trait CornerSink: Send {
    fn visit(&mut self, len: usize, ln_abs: Option<f64>);
    fn merge(&mut self, other: Self);
}

/// Integer arithmetic used for the scaled row vectors.
trait ExactInt: Clone + Send + Sync {
    fn from_bigint(b: &BigInt) -> Self;
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn add_mul(&mut self, a: &Self, b: &Self);
    fn ln_abs(&self) -> f64;
}

// The two machine-width impls rely on an a-priori magnitude bound checked in
// `fold_log_corners`; wrapping never actually happens.
impl ExactInt for i64 {
    fn from_bigint(b: &BigInt) -> Self {
        b.to_i64().expect("fits by bound")
    }
    fn zero() -> Self {
        0
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    #[inline]
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self = self.wrapping_add(a.wrapping_mul(*b));
    }
    fn ln_abs(&self) -> f64 {
        (self.unsigned_abs() as f64).ln()
    }
}

impl ExactInt for i128 {
    fn from_bigint(b: &BigInt) -> Self {
        b.to_i128().expect("fits by bound")
    }
    fn zero() -> Self {
        0
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    #[inline]
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self = self.wrapping_add(a.wrapping_mul(*b));
    }
    fn ln_abs(&self) -> f64 {
        (self.unsigned_abs() as f64).ln()
    }
}

impl ExactInt for BigInt {
    fn from_bigint(b: &BigInt) -> Self {
        b.clone()
    }
    fn zero() -> Self {
        Zero::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn ln_abs(&self) -> f64 {
        bigint_ln_abs(self)
    }
}

/// Integer-scaled copy of a factorization:
/// `corner(w) = (beta_i^T D_i,w alpha_i) / (scale * c0^#0 * c1^#1)`.
#[derive(Debug, Clone)]
struct ScaledFactorization {
    q: u32,
    dim: usize,
    alpha: Vec<BigInt>,
    beta: Vec<BigInt>,
    mats: [Vec<BigInt>; 2],
    ln_base: f64,
    ln_digit: [f64; 2],
    ln_bound_step: f64,
    ln_bound_start: f64,
}

fn lcm_denominators<'a>(xs: impl Iterator<Item = &'a Rational>) -> BigInt {
    xs.fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

fn scale_to_int(xs: &[Rational], c: &BigInt) -> Vec<BigInt> {
    xs.iter()
        .map(|x| (x * Rational::from_integer(c.clone())).to_integer())
        .collect()
}

fn ln_big(b: &BigInt) -> f64 {
    bigint_ln_abs(b)
}

impl ScaledFactorization {
    fn new(fact: &SentinelFactorization) -> Self {
        let scale_mat = |m: &RationalMatrix| {
            let c = lcm_denominators(m.entries().iter());
            (scale_to_int(m.entries(), &c), c)
        };
        let (m0, c0) = scale_mat(fact.d0());
        let (m1, c1) = scale_mat(fact.d1());
        let ca = lcm_denominators(fact.alpha().iter());
        let cb = lcm_denominators(fact.beta().iter());
        let alpha = scale_to_int(fact.alpha(), &ca);
        let beta = scale_to_int(fact.beta(), &cb);
        let dim = fact.dim();
        let max_col = |m: &[BigInt]| {
            (0..dim)
                .map(|j| {
                    (0..dim)
                        .map(|i| m[i * dim + j].to_f64().unwrap_or(f64::INFINITY).abs())
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        };
        let step = max_col(&m0).max(max_col(&m1)).max(1.0);
        let l1 = |v: &[BigInt]| v.iter().map(|x| x.to_f64().unwrap_or(f64::INFINITY).abs()).sum::<f64>();
        let amax = alpha
            .iter()
            .map(|x| x.to_f64().unwrap_or(f64::INFINITY).abs())
            .fold(0.0, f64::max);
        Self {
            q: fact.q(),
            dim,
            ln_base: -(ln_big(&ca) + ln_big(&cb)),
            ln_digit: [-ln_big(&c0), -ln_big(&c1)],
            ln_bound_step: step.ln(),
            ln_bound_start: (l1(&beta) * amax.max(1.0)).max(1.0).ln(),
            alpha,
            beta,
            mats: [m0, m1],
        }
    }

    /// Natural log of a bound on every row-vector entry and corner numerator
    /// up to `max_len`.
    fn ln_bound(&self, max_len: usize) -> f64 {
        self.ln_bound_start + self.ln_bound_step * max_len as f64
    }
}

struct Engine<T> {
    q: u32,
    dim: usize,
    max_len: usize,
    // nonzero (i, j, value) entries of D0 and D1
    sparse: [Vec<(usize, usize, T)>; 2],
    alpha: Vec<(usize, T)>,
    ln_base: f64,
    ln_digit: [f64; 2],
}

struct Node<T> {
    depth: usize,
    run: u32,
    ones: usize,
    row: Vec<T>,
}

impl<T: ExactInt> Engine<T> {
    fn new(s: &ScaledFactorization, max_len: usize) -> Self {
        let dim = s.dim;
        let sparse = |m: &[BigInt]| {
            let mut v = Vec::new();
            for i in 0..dim {
                for j in 0..dim {
                    let x = &m[i * dim + j];
                    if !Zero::is_zero(x) {
                        v.push((i, j, T::from_bigint(x)));
                    }
                }
            }
            v
        };
        Self {
            q: s.q,
            dim,
            max_len,
            sparse: [sparse(&s.mats[0]), sparse(&s.mats[1])],
            alpha: s
                .alpha
                .iter()
                .enumerate()
                .filter(|(_, x)| !Zero::is_zero(*x))
                .map(|(i, x)| (i, T::from_bigint(x)))
                .collect(),
            ln_base: s.ln_base,
            ln_digit: s.ln_digit,
        }
    }

    #[inline]
    fn step(&self, digit: usize, row: &[T], out: &mut [T]) {
        for o in out.iter_mut() {
            *o = T::zero();
        }
        for (i, j, v) in &self.sparse[digit] {
            if !row[*i].is_zero() {
                out[*j].add_mul(&row[*i], v);
            }
        }
    }

    #[inline]
    fn ln_corner(&self, row: &[T], len: usize, ones: usize) -> Option<f64> {
        let mut c = T::zero();
        for (i, a) in &self.alpha {
            c.add_mul(&row[*i], a);
        }
        if c.is_zero() {
            return None;
        }
        let mut ln = c.ln_abs() + self.ln_base;
        if self.ln_digit[0] != 0.0 {
            ln += self.ln_digit[0] * (len - ones) as f64;
        }
        if self.ln_digit[1] != 0.0 {
            ln += self.ln_digit[1] * ones as f64;
        }
        Some(ln)
    }

    /// Depth-first walk below `node`, reporting words strictly longer than it.
    fn descend<S: CornerSink>(&self, node: &Node<T>, sink: &mut S) {
        let m = self.dim;
        let levels = self.max_len - node.depth + 1;
        let mut buf = vec![T::zero(); levels * m];
        buf[..m].clone_from_slice(&node.row);
        self.rec(node.depth, node.run, node.ones, 0, &mut buf, sink);
    }

    fn rec<S: CornerSink>(
        &self,
        depth: usize,
        run: u32,
        ones: usize,
        level: usize,
        buf: &mut [T],
        sink: &mut S,
    ) {
        if depth == self.max_len {
            return;
        }
        let m = self.dim;
        let (cur, rest) = buf.split_at_mut((level + 1) * m);
        let row = &cur[level * m..];
        let child = &mut rest[..m];
        if run + 1 < self.q {
            self.step(0, row, child);
            self.rec(depth + 1, run + 1, ones, level + 1, buf, sink);
        }
        let (cur, rest) = buf.split_at_mut((level + 1) * m);
        let row = &cur[level * m..];
        let child = &mut rest[..m];
        self.step(1, row, child);
        sink.visit(depth + 1, self.ln_corner(child, depth + 1, ones + 1));
        self.rec(depth + 1, 0, ones + 1, level + 1, buf, sink);
    }

    /// Visits words of length `<= split` into `top` and returns the tree
    /// nodes at depth `split` in lexicographic order.
    fn frontier<S: CornerSink>(&self, beta: Vec<T>, split: usize, top: &mut S) -> Vec<Node<T>> {
        top.visit(0, self.ln_corner(&beta, 0, 0));
        let mut level = vec![Node {
            depth: 0,
            run: 0,
            ones: 0,
            row: beta,
        }];
        for d in 0..split {
            let mut next = Vec::with_capacity(level.len() * 2);
            for node in &level {
                if node.run + 1 < self.q {
                    let mut row = vec![T::zero(); self.dim];
                    self.step(0, &node.row, &mut row);
                    next.push(Node {
                        depth: d + 1,
                        run: node.run + 1,
                        ones: node.ones,
                        row,
                    });
                }
                let mut row = vec![T::zero(); self.dim];
                self.step(1, &node.row, &mut row);
                top.visit(d + 1, self.ln_corner(&row, d + 1, node.ones + 1));
                next.push(Node {
                    depth: d + 1,
                    run: 0,
                    ones: node.ones + 1,
                    row,
                });
            }
            level = next;
        }
        level
    }
}

const SPLIT_DEPTH: usize = 12;

fn run_engine<T, S, F>(s: &ScaledFactorization, max_len: usize, make: F) -> S
where
    T: ExactInt,
    S: CornerSink,
    F: Fn() -> S + Sync,
{
    let engine = Engine::<T>::new(s, max_len);
    let beta: Vec<T> = s.beta.iter().map(T::from_bigint).collect();
    let mut top = make();
    let split = max_len.min(SPLIT_DEPTH);
    let nodes = engine.frontier(beta, split, &mut top);
    let parts: Vec<S> = nodes
        .par_iter()
        .map(|node| {
            let mut sink = make();
            engine.descend(node, &mut sink);
            sink
        })
        .collect();
    for p in parts {
        top.merge(p);
    }
    top
}

/// Visits every word of `chi(0^q)` of length `<= max_len`, reporting
/// `ln |beta^T D_w alpha|`. Lengths `<= 12` are reported in breadth-first
/// order into the first sink; deeper words are split into lexicographically
/// ordered subtrees that may be processed in parallel.
pub fn fold_log_corners<S, F>(fact: &SentinelFactorization, max_len: usize, make: F) -> S
where
    S: CornerSink,
    F: Fn() -> S + Sync,
{
    let scaled = ScaledFactorization::new(fact);
    let bound = scaled.ln_bound(max_len);
    // leave headroom for the accumulation of `dim` products
    let head = (scaled.dim as f64).ln() + 1.0;
    if bound + head < 62.0 * std::f64::consts::LN_2 {
        run_engine::<i64, S, F>(&scaled, max_len, make)
    } else if bound + head < 126.0 * std::f64::consts::LN_2 {
        run_engine::<i128, S, F>(&scaled, max_len, make)
    } else {
        run_engine::<BigInt, S, F>(&scaled, max_len, make)
    }
}

#[cfg(test)]
pub(crate) fn fold_log_corners_big<S, F>(fact: &SentinelFactorization, max_len: usize, make: F) -> S
where
    S: CornerSink,
    F: Fn() -> S + Sync,
{
    run_engine::<BigInt, S, F>(&ScaledFactorization::new(fact), max_len, make)
}
