//! Sequential importance sampling of complete self-avoiding walks (CSAW)
//! from `(0, 0)` to `(m, m)` on the `(m+1) × (m+1)` vertex grid.
//!
//! A walk picks uniformly among its *available* neighbours at every step,
//! so its probability is `Π 1/d_j` and a complete walk gets weight `Π d_j`.
//! The three proposals differ only in what counts as available:
//!
//! * [`TrapPolicy::Q1AllTraps`]: any unvisited neighbour.
//! * [`TrapPolicy::Q2NoBoundaryTraps`]: unvisited neighbours, except that a
//!   neighbour on the grid boundary must still be able to reach `(m, m)`.
//! * [`TrapPolicy::Q3NoTraps`]: unvisited neighbours that can still reach
//!   `(m, m)` through unvisited vertices.
//!
//! Reachability is decided with one flood fill of the target's component
//! per step; on grids with at most 128 vertices the fill runs on a `u128`
//! bitboard.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Purpose};
use crate::weights::{compensated_sum, Sample};

/// Largest `m` accepted by [`enumerate_csaw`].
pub const MAX_ENUMERATE_M: usize = 5;
/// Largest `m` accepted by [`support_unbiasedness_sum`].
pub const MAX_SUPPORT_M: usize = 4;

/// Number of complete self-avoiding walks on the `m × m` grid, `m = 0..=10`.
const KNOWN_COUNTS: [u128; 11] = [
    1,
    2,
    12,
    184,
    8_512,
    1_262_816,
    575_780_564,
    789_360_053_252,
    3_266_598_486_981_642,
    41_044_208_702_632_496_804,
    1_568_758_030_464_750_013_214_100,
];

/// Published CSAW count for `m ≤ 10`.
pub fn known_csaw_count(m: usize) -> Option<u128> {
    KNOWN_COUNTS.get(m).copied()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrapPolicy {
    #[serde(rename = "q1")]
    Q1AllTraps,
    #[serde(rename = "q2")]
    Q2NoBoundaryTraps,
    #[serde(rename = "q3")]
    Q3NoTraps,
}

impl TrapPolicy {
    pub const ALL: [TrapPolicy; 3] = [TrapPolicy::Q1AllTraps, TrapPolicy::Q2NoBoundaryTraps, TrapPolicy::Q3NoTraps];

    pub fn tag(self) -> &'static str {
        match self {
            TrapPolicy::Q1AllTraps => "q1",
            TrapPolicy::Q2NoBoundaryTraps => "q2",
            TrapPolicy::Q3NoTraps => "q3",
        }
    }
}

impl fmt::Display for TrapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for TrapPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q1" | "all" | "all-traps" => Ok(TrapPolicy::Q1AllTraps),
            "q2" | "interior" | "no-boundary-traps" => Ok(TrapPolicy::Q2NoBoundaryTraps),
            "q3" | "none" | "no-traps" => Ok(TrapPolicy::Q3NoTraps),
            other => invalid(format!("unknown trap policy {other:?}")),
        }
    }
}

pub type Vertex = (usize, usize);

/// Occupancy and reachability queries on the vertex grid.
trait Board {
    fn is_free(&self, idx: usize) -> bool;
    fn occupy(&mut self, idx: usize);
    fn release(&mut self, idx: usize);
    /// Bitmask over `candidates`: bit `i` set iff `candidates[i]` lies in the
    /// free component containing `target`.
    fn reaches_target(&mut self, target: usize, candidates: &[usize]) -> u8;
}

/// Bitboard for grids with at most 128 vertices.
#[derive(Clone)]
struct SmallBoard {
    free: u128,
    width: usize,
    not_first_col: u128,
    not_last_col: u128,
}

impl SmallBoard {
    fn new(width: usize) -> Self {
        let cells = width * width;
        debug_assert!(cells <= 128);
        let all = if cells == 128 { u128::MAX } else { (1u128 << cells) - 1 };
        let mut first = 0u128;
        let mut last = 0u128;
        for y in 0..width {
            first |= 1u128 << (y * width);
            last |= 1u128 << (y * width + width - 1);
        }
        Self {
            free: all,
            width,
            not_first_col: all & !first,
            not_last_col: all & !last,
        }
    }
}

impl Board for SmallBoard {
    #[inline]
    fn is_free(&self, idx: usize) -> bool {
        self.free >> idx & 1 == 1
    }

    #[inline]
    fn occupy(&mut self, idx: usize) {
        self.free &= !(1u128 << idx);
    }

    #[inline]
    fn release(&mut self, idx: usize) {
        self.free |= 1u128 << idx;
    }

    fn reaches_target(&mut self, target: usize, candidates: &[usize]) -> u8 {
        let want: u128 = candidates.iter().fold(0, |acc, &c| acc | 1u128 << c);
        let mut reach = (1u128 << target) & self.free;
        if reach == 0 {
            return 0;
        }
        let w = self.width;
        loop {
            // x+1 lands in column 0 only by wrapping; x-1 lands in the last
            // column only by wrapping.
            let grow = ((reach << 1) & self.not_first_col)
                | ((reach >> 1) & self.not_last_col)
                | (reach << w)
                | (reach >> w);
            let next = (reach | grow) & self.free;
            if next & want == want || next == reach {
                reach = next;
                break;
            }
            reach = next;
        }
        candidates
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &c)| acc | (((reach >> c & 1) as u8) << i))
    }
}

/// Scalar board for any grid size.
#[derive(Clone)]
struct LargeBoard {
    free: Vec<bool>,
    width: usize,
    mark: Vec<u32>,
    epoch: u32,
    stack: Vec<usize>,
}

impl LargeBoard {
    fn new(width: usize) -> Self {
        Self {
            free: vec![true; width * width],
            width,
            mark: vec![0; width * width],
            epoch: 0,
            stack: Vec::new(),
        }
    }
}

impl Board for LargeBoard {
    fn is_free(&self, idx: usize) -> bool {
        self.free[idx]
    }

    fn occupy(&mut self, idx: usize) {
        self.free[idx] = false;
    }

    fn release(&mut self, idx: usize) {
        self.free[idx] = true;
    }

    fn reaches_target(&mut self, target: usize, candidates: &[usize]) -> u8 {
        if !self.free[target] {
            return 0;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        let w = self.width;
        let mut remaining = candidates.len();
        let mut found = 0u8;
        self.stack.clear();
        self.stack.push(target);
        self.mark[target] = epoch;
        while let Some(v) = self.stack.pop() {
            if let Some(i) = candidates.iter().position(|&c| c == v) {
                found |= 1 << i;
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
            let (x, y) = (v % w, v / w);
            let push = |u: usize, mark: &mut Vec<u32>, stack: &mut Vec<usize>| {
                if self.free[u] && mark[u] != epoch {
                    mark[u] = epoch;
                    stack.push(u);
                }
            };
            if x > 0 {
                push(v - 1, &mut self.mark, &mut self.stack);
            }
            if x + 1 < w {
                push(v + 1, &mut self.mark, &mut self.stack);
            }
            if y > 0 {
                push(v - w, &mut self.mark, &mut self.stack);
            }
            if y + 1 < w {
                push(v + w, &mut self.mark, &mut self.stack);
            }
        }
        found
    }
}

#[inline]
fn neighbours(idx: usize, width: usize, out: &mut [usize; 4]) -> usize {
    let (x, y) = (idx % width, idx / width);
    let mut k = 0;
    if x + 1 < width {
        out[k] = idx + 1;
        k += 1;
    }
    if y + 1 < width {
        out[k] = idx + width;
        k += 1;
    }
    if x > 0 {
        out[k] = idx - 1;
        k += 1;
    }
    if y > 0 {
        out[k] = idx - width;
        k += 1;
    }
    k
}

#[inline]
fn on_boundary(idx: usize, width: usize) -> bool {
    let (x, y) = (idx % width, idx / width);
    x == 0 || y == 0 || x + 1 == width || y + 1 == width
}

/// Available moves from `pos` under `policy`, written to `out`. The caller
/// guarantees that `pos` is occupied and is not the target.
#[inline]
fn available<B: Board>(
    board: &mut B,
    pos: usize,
    width: usize,
    policy: TrapPolicy,
    q3_connected: bool,
    out: &mut [usize; 4],
) -> usize {
    let mut nb = [0usize; 4];
    let k = neighbours(pos, width, &mut nb);
    let mut free = [0usize; 4];
    let mut nf = 0;
    for &v in &nb[..k] {
        if board.is_free(v) {
            free[nf] = v;
            nf += 1;
        }
    }
    let target = width * width - 1;
    let needs_check = |v: usize| match policy {
        TrapPolicy::Q1AllTraps => false,
        TrapPolicy::Q2NoBoundaryTraps => on_boundary(v, width),
        TrapPolicy::Q3NoTraps => true,
    };
    let mut to_check = [0usize; 4];
    let mut nc = 0;
    for &v in &free[..nf] {
        if needs_check(v) {
            to_check[nc] = v;
            nc += 1;
        }
    }
    // A walk that is still connected to the target through free vertices
    // and has a single free neighbour must step there.
    let skip = nc == 0 || (policy == TrapPolicy::Q3NoTraps && q3_connected && nf == 1);
    let ok = if skip {
        u8::MAX
    } else {
        board.reaches_target(target, &to_check[..nc])
    };
    let mut n = 0;
    let mut ci = 0;
    for &v in &free[..nf] {
        let pass = if !skip && needs_check(v) {
            let bit = ok >> ci & 1 == 1;
            ci += 1;
            bit
        } else {
            true
        };
        if pass {
            out[n] = v;
            n += 1;
        }
    }
    n
}

/// A walk in progress.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridWalkState {
    m: usize,
    visited: Vec<bool>,
    history: Vec<Vertex>,
}

impl GridWalkState {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return invalid("grid size m must be at least 1");
        }
        let width = m + 1;
        let mut visited = vec![false; width * width];
        visited[0] = true;
        Ok(Self {
            m,
            visited,
            history: vec![(0, 0)],
        })
    }

    /// Builds a state from an explicit self-avoiding path starting at `(0, 0)`.
    pub fn from_path(m: usize, path: &[Vertex]) -> Result<Self> {
        let mut s = Self::new(m)?;
        if path.first() != Some(&(0, 0)) {
            return invalid("path must start at (0, 0)");
        }
        for &v in &path[1..] {
            s.push(v)?;
        }
        Ok(s)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn position(&self) -> Vertex {
        *self.history.last().expect("history starts at the origin")
    }

    pub fn history(&self) -> &[Vertex] {
        &self.history
    }

    pub fn is_visited(&self, v: Vertex) -> bool {
        v.0 <= self.m && v.1 <= self.m && self.visited[self.index(v)]
    }

    pub fn is_complete(&self) -> bool {
        self.position() == (self.m, self.m)
    }

    fn index(&self, v: Vertex) -> usize {
        v.1 * (self.m + 1) + v.0
    }

    fn vertex(&self, idx: usize) -> Vertex {
        (idx % (self.m + 1), idx / (self.m + 1))
    }

    /// Appends `v`; it must be an unvisited lattice neighbour of the position.
    pub fn push(&mut self, v: Vertex) -> Result<()> {
        let (x, y) = self.position();
        if v.0 > self.m || v.1 > self.m {
            return invalid(format!("{v:?} lies outside the {0}×{0} grid", self.m));
        }
        if x.abs_diff(v.0) + y.abs_diff(v.1) != 1 {
            return invalid(format!("{v:?} is not adjacent to {:?}", (x, y)));
        }
        let idx = self.index(v);
        if self.visited[idx] {
            return invalid(format!("{v:?} was already visited"));
        }
        if self.is_complete() {
            return invalid("walk already reached the target");
        }
        self.visited[idx] = true;
        self.history.push(v);
        Ok(())
    }

    fn board(&self) -> LargeBoard {
        let mut b = LargeBoard::new(self.m + 1);
        for (i, &v) in self.visited.iter().enumerate() {
            if v {
                b.occupy(i);
            }
        }
        b
    }
}

/// Neighbours of the current position that `policy` allows the walk to take.
pub fn available_neighbors(state: &GridWalkState, policy: TrapPolicy) -> Vec<Vertex> {
    if state.is_complete() {
        return Vec::new();
    }
    let mut board = state.board();
    let mut out = [0usize; 4];
    let pos = state.index(state.position());
    let n = available(&mut board, pos, state.m + 1, policy, false, &mut out);
    out[..n].iter().map(|&i| state.vertex(i)).collect()
}

/// One sampled walk and its importance weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SawWalk {
    pub path: Vec<Vertex>,
    /// Number of available neighbours at each step taken.
    pub degrees: Vec<u32>,
    pub complete: bool,
    /// `Π d_j` for complete walks, 0 otherwise.
    pub weight: f64,
}

impl SawWalk {
    pub fn length(&self) -> usize {
        self.degrees.len()
    }

    /// `q(x) = Π 1/d_j`.
    pub fn probability(&self) -> f64 {
        self.degrees.iter().map(|&d| 1.0 / d as f64).product()
    }

    /// `Π d_j` as an exact integer.
    pub fn exact_degree_product(&self) -> BigInt {
        degree_product(&self.degrees)
    }
}

/// Exact `Π d_j`.
pub fn degree_product(degrees: &[u32]) -> BigInt {
    degrees.iter().fold(BigInt::one(), |acc, &d| acc * d)
}

enum AnyBoard {
    Small(SmallBoard),
    Large(LargeBoard),
}

impl AnyBoard {
    fn new(width: usize) -> Self {
        if width * width <= 128 {
            AnyBoard::Small(SmallBoard::new(width))
        } else {
            AnyBoard::Large(LargeBoard::new(width))
        }
    }
}

/// Runs one walk. Returns `(weight, complete)`; `record` receives every
/// step as `(vertex index, d_j)`.
fn run_walk<B: Board, R: Rng + ?Sized>(
    board: &mut B,
    width: usize,
    policy: TrapPolicy,
    rng: &mut R,
    mut record: impl FnMut(usize, u32),
) -> (f64, bool) {
    let target = width * width - 1;
    let mut pos = 0;
    board.occupy(pos);
    let mut weight = 1.0;
    let mut out = [0usize; 4];
    let complete = loop {
        if pos == target {
            break true;
        }
        let d = available(board, pos, width, policy, true, &mut out);
        if d == 0 {
            break false;
        }
        let next = out[if d == 1 { 0 } else { rng.random_range(0..d) }];
        weight *= d as f64;
        record(next, d as u32);
        board.occupy(next);
        pos = next;
    };
    (if complete { weight } else { 0.0 }, complete)
}

/// Samples one walk under `policy`.
pub fn sample_walk<R: Rng + ?Sized>(m: usize, policy: TrapPolicy, rng: &mut R) -> Result<SawWalk> {
    if m == 0 {
        return invalid("grid size m must be at least 1");
    }
    let width = m + 1;
    let mut path = vec![(0, 0)];
    let mut degrees = Vec::new();
    let rec = |idx: usize, d: u32| {
        path.push((idx % width, idx / width));
        degrees.push(d);
    };
    let (weight, complete) = match AnyBoard::new(width) {
        AnyBoard::Small(mut b) => run_walk(&mut b, width, policy, rng, rec),
        AnyBoard::Large(mut b) => run_walk(&mut b, width, policy, rng, rec),
    };
    Ok(SawWalk {
        path,
        degrees,
        complete,
        weight,
    })
}

/// Weights of `n` independent walks.
pub fn sample_weights<R: Rng + ?Sized>(m: usize, policy: TrapPolicy, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if m == 0 {
        return invalid("grid size m must be at least 1");
    }
    let width = m + 1;
    let mut out = Vec::with_capacity(n);
    match AnyBoard::new(width) {
        AnyBoard::Small(proto) => {
            for _ in 0..n {
                let mut b = proto.clone();
                out.push(run_walk(&mut b, width, policy, rng, |_, _| {}).0);
            }
        }
        AnyBoard::Large(proto) => {
            for _ in 0..n {
                let mut b = proto.clone();
                out.push(run_walk(&mut b, width, policy, rng, |_, _| {}).0);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SawEstimate {
    pub z_hat: f64,
    pub n: usize,
    pub complete_fraction: f64,
    /// Standard error of `z_hat` from the sample standard deviation.
    pub std_error: f64,
}

/// `Ẑ = (1/n) Σ Π d_j · 𝟙[complete]` over `n` sampled walks, together with
/// the raw weights.
pub fn estimate_csaw<R: Rng + ?Sized>(m: usize, policy: TrapPolicy, n: usize, rng: &mut R) -> Result<(SawEstimate, Sample)> {
    if n == 0 {
        return invalid("need at least one walk");
    }
    let weights = sample_weights(m, policy, n, rng)?;
    let sample = Sample::new(weights)?;
    Ok((summarise(&sample), sample))
}

/// Parallel variant of [`estimate_csaw`]: walks are split into fixed-size
/// blocks, block `b` drawing from stream `b` of `seed`, so the result does
/// not depend on the thread count.
pub fn estimate_csaw_par(m: usize, policy: TrapPolicy, n: usize, seed: u64) -> Result<(SawEstimate, Sample)> {
    const BLOCK: usize = 4096;
    if n == 0 {
        return invalid("need at least one walk");
    }
    let blocks: Vec<Result<Vec<f64>>> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, 0, b as u32, Purpose::Draws);
            sample_weights(m, policy, BLOCK.min(n - b * BLOCK), &mut rng)
        })
        .collect();
    let mut weights = Vec::with_capacity(n);
    for b in blocks {
        weights.extend(b?);
    }
    let sample = Sample::new(weights)?;
    Ok((summarise(&sample), sample))
}

fn summarise(sample: &Sample) -> SawEstimate {
    let n = sample.len();
    let nf = n as f64;
    let z_hat = crate::weights::is_estimate(sample);
    let complete = sample.values().iter().filter(|&&w| w > 0.0).count();
    let std_error = if n > 1 {
        let ss = compensated_sum(sample.values().iter().map(|&w| (w - z_hat) * (w - z_hat)));
        (ss / (nf - 1.0) / nf).sqrt()
    } else {
        f64::NAN
    };
    SawEstimate {
        z_hat,
        n,
        complete_fraction: complete as f64 / nf,
        std_error,
    }
}

/// Replays `path` under `policy`, recording each step's available-neighbour
/// count. Fails if some step is not available under the policy.
pub fn replay_walk(m: usize, path: &[Vertex], policy: TrapPolicy) -> Result<SawWalk> {
    let mut state = GridWalkState::new(m)?;
    if path.first() != Some(&(0, 0)) {
        return invalid("path must start at (0, 0)");
    }
    let mut degrees = Vec::with_capacity(path.len());
    for &v in &path[1..] {
        let avail = available_neighbors(&state, policy);
        if !avail.contains(&v) {
            return invalid(format!("{v:?} is not available under {policy} after {:?}", state.position()));
        }
        degrees.push(avail.len() as u32);
        state.push(v)?;
    }
    let complete = state.is_complete();
    let weight = if complete {
        degrees.iter().map(|&d| d as f64).product()
    } else {
        0.0
    };
    Ok(SawWalk {
        path: path.to_vec(),
        degrees,
        complete,
        weight,
    })
}

fn dfs_count<B: Board>(board: &mut B, pos: usize, width: usize) -> u64 {
    let target = width * width - 1;
    if pos == target {
        return 1;
    }
    let mut out = [0usize; 4];
    let d = available(board, pos, width, TrapPolicy::Q3NoTraps, true, &mut out);
    let mut total = 0;
    for &v in &out[..d] {
        board.occupy(v);
        total += dfs_count(board, v, width);
        board.release(v);
    }
    total
}

/// Exact number of complete self-avoiding walks on the `m × m` grid.
pub fn enumerate_csaw(m: usize) -> Result<u64> {
    if m == 0 || m > MAX_ENUMERATE_M {
        return invalid(format!("exhaustive enumeration supports 1 <= m <= {MAX_ENUMERATE_M}, got {m}"));
    }
    let width = m + 1;
    let mut board = SmallBoard::new(width);
    board.occupy(0);
    Ok(dfs_count(&mut board, 0, width))
}

/// Exact sums over every walk a policy can generate.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSum {
    /// `Σ q(x) · weight(x)`; equals the CSAW count when the proposal is unbiased.
    pub weighted_sum: BigRational,
    /// `Σ q(x)` over all terminal walks; always 1.
    pub probability_mass: BigRational,
    pub complete_walks: u64,
    pub trapped_walks: u64,
}

struct SupportWalker {
    width: usize,
    policy: TrapPolicy,
    degrees: Vec<u32>,
    acc: SupportSum,
}

impl SupportWalker {
    fn visit(&mut self, board: &mut LargeBoard, pos: usize, prob: &BigRational) {
        let target = self.width * self.width - 1;
        if pos == target {
            let weight = BigRational::from_integer(degree_product(&self.degrees));
            self.acc.weighted_sum += prob * weight;
            self.acc.probability_mass += prob;
            self.acc.complete_walks += 1;
            return;
        }
        let mut out = [0usize; 4];
        let d = available(board, pos, self.width, self.policy, false, &mut out);
        if d == 0 {
            self.acc.probability_mass += prob;
            self.acc.trapped_walks += 1;
            return;
        }
        let step = prob / BigInt::from(d);
        for &v in &out[..d] {
            board.occupy(v);
            self.degrees.push(d as u32);
            self.visit(board, v, &step);
            self.degrees.pop();
            board.release(v);
        }
    }
}

/// Enumerates the whole support of `policy` with exact rational arithmetic.
pub fn support_unbiasedness_sum(m: usize, policy: TrapPolicy) -> Result<SupportSum> {
    if m == 0 || m > MAX_SUPPORT_M {
        return invalid(format!("support enumeration supports 1 <= m <= {MAX_SUPPORT_M}, got {m}"));
    }
    let width = m + 1;
    let mut board = LargeBoard::new(width);
    board.occupy(0);
    let mut walker = SupportWalker {
        width,
        policy,
        degrees: Vec::new(),
        acc: SupportSum {
            weighted_sum: BigRational::zero(),
            probability_mass: BigRational::zero(),
            complete_walks: 0,
            trapped_walks: 0,
        },
    };
    walker.visit(&mut board, 0, &BigRational::one());
    Ok(walker.acc)
}

/// Every complete self-avoiding walk on a small grid, by plain backtracking.
pub fn all_complete_walks(m: usize) -> Result<Vec<Vec<Vertex>>> {
    if m == 0 || m > 4 {
        return invalid(format!("walk listing supports 1 <= m <= 4, got {m}"));
    }
    fn rec(m: usize, path: &mut Vec<Vertex>, seen: &mut HashSet<Vertex>, out: &mut Vec<Vec<Vertex>>) {
        let (x, y) = *path.last().unwrap();
        if (x, y) == (m, m) {
            out.push(path.clone());
            return;
        }
        let cand = [
            (x.checked_add(1).filter(|&v| v <= m), Some(y)),
            (Some(x), y.checked_add(1).filter(|&v| v <= m)),
            (x.checked_sub(1), Some(y)),
            (Some(x), y.checked_sub(1)),
        ];
        for c in cand {
            if let (Some(a), Some(b)) = c {
                if seen.insert((a, b)) {
                    path.push((a, b));
                    rec(m, path, seen, out);
                    path.pop();
                    seen.remove(&(a, b));
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut seen = HashSet::from([(0, 0)]);
    rec(m, &mut vec![(0, 0)], &mut seen, &mut out);
    Ok(out)
}
