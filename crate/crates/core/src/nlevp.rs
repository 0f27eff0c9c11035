//! Self-consistent bound states of an energy-dependent Hamiltonian.
//!
//! Eigenvalue branches `E^(n)(z)` are followed across a grid of `z` values by
//! eigenvector-overlap matching, then the fixed points `E^(n)(z) = z` are
//! bracketed by sign changes and refined by bisection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, c, CVector, EigenPair, LinalgError};
use crate::models::{EdHamiltonian, ModelError, ModelMatrix};

pub const DEFAULT_AMBIGUITY_THRESHOLD: f64 = 0.7;
pub const DEFAULT_TOL: f64 = 1e-12;
/// Largest imaginary part tolerated on a branch used for real root finding.
pub const COMPLEX_BRANCH_TOL: f64 = 1e-10;
/// Distance kept from excluded points (poles) when gridding.
pub const DEFAULT_POLE_MARGIN: f64 = 2e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NlevpError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("grid needs at least 2 strictly increasing points")]
    BadGrid,
    #[error("grid step [{lo}, {hi}] crosses the excluded point {pole}")]
    GridCrossesPole { lo: f64, hi: f64, pole: f64 },
    #[error("ambiguous branch matching on [{lo}, {hi}] (branch {branch}, best overlap {quality:.3}); refine the grid")]
    Ambiguous {
        branch: usize,
        lo: f64,
        hi: f64,
        quality: f64,
    },
    #[error("branch {branch} is complex at z = {z} (imaginary part {imag:e})")]
    ComplexBranch { branch: usize, z: f64, imag: f64 },
    #[error("branch {branch} does not exist ({count} branches traced)")]
    NoSuchBranch { branch: usize, count: usize },
    #[error("interval [{lo}, {hi}] is not inside the model domain (offending point {at})")]
    Interval { lo: f64, hi: f64, at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub grid_points: usize,
    pub tol: f64,
    pub ambiguity_threshold: f64,
    /// Track only the lowest branches; `None` tracks all `dim` of them.
    pub max_branches: Option<usize>,
    /// Local bisections of a grid step allowed before a matching is ambiguous.
    pub max_refinements: u32,
    pub pole_margin: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grid_points: 200,
            tol: DEFAULT_TOL,
            ambiguity_threshold: DEFAULT_AMBIGUITY_THRESHOLD,
            max_branches: None,
            max_refinements: 8,
            pole_margin: DEFAULT_POLE_MARGIN,
        }
    }
}

/// Eigen-triples of `H(z)`: ascending real part (ties by imaginary part),
/// `left_i · right_j = δ_ij`, unit-norm rights. Only the lowest `count` pairs
/// are returned when `count` is given.
pub fn eigen_at_lowest(h: &EdHamiltonian, z: f64, count: Option<usize>) -> Result<Vec<EigenPair>, NlevpError> {
    let m = h.eval_structured(z)?;
    let mut pairs = match &m {
        ModelMatrix::Tridiagonal(t) => t
            .lowest(count.unwrap_or(t.dim()))
            .into_iter()
            .map(|(value, v)| {
                let right = v.map(c);
                EigenPair {
                    value: c(value),
                    left: right.clone(),
                    right,
                }
            })
            .collect(),
        ModelMatrix::Dense(d) if h.hermitian_each_z() => linalg::hermitian_eigen(d)?,
        ModelMatrix::Dense(d) => linalg::general_eigen(d)?,
    };
    if let Some(k) = count {
        pairs.truncate(k);
    }
    Ok(pairs)
}

pub fn eigen_at(h: &EdHamiltonian, z: f64) -> Result<Vec<EigenPair>, NlevpError> {
    eigen_at_lowest(h, z, None)
}

/// `‖H r − E r‖₂` and `‖l H − E l‖₂` without densifying structured matrices.
pub fn eigen_residuals(m: &ModelMatrix, energy: f64, right: &CVector, left: &CVector) -> (f64, f64) {
    let e = c(energy);
    match m {
        ModelMatrix::Dense(d) => ((d * right - right * e).norm(), (d.transpose() * left - left * e).norm()),
        ModelMatrix::Tridiagonal(t) => {
            let apply = |v: &CVector| {
                let n = t.dim();
                CVector::from_fn(n, |i, _| {
                    let mut acc = v[i] * t.diag[i];
                    if i > 0 {
                        acc += v[i - 1] * t.off[i - 1];
                    }
                    if i + 1 < n {
                        acc += v[i + 1] * t.off[i];
                    }
                    acc
                })
            };
            ((apply(right) - right * e).norm(), (apply(left) - left * e).norm())
        }
    }
}

fn overlap(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).norm()
}

/// Eigenvalue branches sampled on a grid; `branches[n][k]` is branch `n` at `grid[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTable {
    pub grid: Vec<f64>,
    pub branches: Vec<Vec<EigenPair>>,
    /// Smallest assigned overlap of each grid step (`grid.len() - 1` entries).
    pub match_quality: Vec<f64>,
}

impl BranchTable {
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn values(&self, n: usize) -> Vec<f64> {
        self.branches[n].iter().map(|p| p.value.re).collect()
    }

    pub fn min_match_quality(&self) -> f64 {
        self.match_quality.iter().copied().fold(1.0, f64::min)
    }
}

/// Greedy assignment on the overlap matrix: `perm[i]` is the index in `next`
/// continuing branch `i`, plus the smallest overlap used.
fn greedy_match(prev: &[EigenPair], next: &[EigenPair]) -> (Vec<usize>, f64) {
    let mut entries: Vec<(f64, usize, usize)> = Vec::with_capacity(prev.len() * next.len());
    for (i, p) in prev.iter().enumerate() {
        for (j, q) in next.iter().enumerate() {
            entries.push((overlap(&p.right, &q.right), i, j));
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut perm = vec![usize::MAX; prev.len()];
    let mut taken = vec![false; next.len()];
    let mut quality = 1.0_f64;
    let mut remaining = prev.len().min(next.len());
    for (o, i, j) in entries {
        if remaining == 0 {
            break;
        }
        if perm[i] == usize::MAX && !taken[j] {
            perm[i] = j;
            taken[j] = true;
            quality = quality.min(o);
            remaining -= 1;
        }
    }
    (perm, quality)
}

fn worst_branch(prev: &[EigenPair], next: &[EigenPair], perm: &[usize]) -> usize {
    perm.iter()
        .enumerate()
        .filter(|(_, &j)| j != usize::MAX)
        .map(|(i, &j)| (i, overlap(&prev[i].right, &next[j].right)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

struct Tracer<'a> {
    h: &'a EdHamiltonian,
    count: Option<usize>,
    threshold: f64,
}

impl Tracer<'_> {
    /// Matches `next` (at `zb`) onto the branch-ordered `prev` (at `za`),
    /// bisecting the step while the matching is ambiguous.
    fn step(
        &self,
        za: f64,
        prev: &[EigenPair],
        zb: f64,
        next: Vec<EigenPair>,
        depth: u32,
        out: &mut Vec<(f64, Vec<EigenPair>, f64)>,
    ) -> Result<(), NlevpError> {
        let (perm, quality) = greedy_match(prev, &next);
        if quality >= self.threshold {
            let ordered = perm.iter().map(|&j| next[j].clone()).collect();
            out.push((zb, ordered, quality));
            return Ok(());
        }
        if depth == 0 {
            return Err(NlevpError::Ambiguous {
                branch: worst_branch(prev, &next, &perm),
                lo: za,
                hi: zb,
                quality,
            });
        }
        let mid = 0.5 * (za + zb);
        let mid_pairs = eigen_at_lowest(self.h, mid, self.count)?;
        self.step(za, prev, mid, mid_pairs, depth - 1, out)?;
        let mid_ordered = out.last().expect("just pushed").1.clone();
        self.step(mid, &mid_ordered, zb, next, depth - 1, out)
    }
}

/// Follows every branch (or the lowest `opts.max_branches`) across `grid`.
/// Branch indices are the ascending order at the first grid point.
pub fn trace_branches(h: &EdHamiltonian, grid: &[f64], opts: &SolveOptions) -> Result<BranchTable, NlevpError> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(NlevpError::BadGrid);
    }
    for w in grid.windows(2) {
        if let Some(pole) = h.domain().excluded_between(w[0], w[1]) {
            return Err(NlevpError::GridCrossesPole {
                lo: w[0],
                hi: w[1],
                pole,
            });
        }
    }
    let samples: Vec<Vec<EigenPair>> = grid
        .par_iter()
        .map(|&z| eigen_at_lowest(h, z, opts.max_branches))
        .collect::<Result<_, _>>()?;

    let tracer = Tracer {
        h,
        count: opts.max_branches,
        threshold: opts.ambiguity_threshold,
    };
    let mut samples = samples.into_iter();
    let first = samples.next().expect("grid has >= 2 points");
    let nb = first.len();
    let mut out_grid = vec![grid[0]];
    let mut columns = vec![first];
    let mut quality = Vec::with_capacity(grid.len() - 1);
    for (k, next) in samples.enumerate() {
        let prev = columns.last().expect("nonempty");
        let mut steps = Vec::new();
        tracer.step(grid[k], prev, grid[k + 1], next, opts.max_refinements, &mut steps)?;
        for (z, ordered, q) in steps {
            out_grid.push(z);
            columns.push(ordered);
            quality.push(q);
        }
    }
    let mut branches = vec![Vec::with_capacity(columns.len()); nb];
    for col in columns {
        for (n, pair) in col.into_iter().enumerate() {
            branches[n].push(pair);
        }
    }
    Ok(BranchTable {
        grid: out_grid,
        branches,
        match_quality: quality,
    })
}

/// A fixed point together with the eigenpair of `H(z*)` it belongs to.
#[derive(Debug, Clone)]
struct Root {
    z: f64,
    pair: EigenPair,
    /// Grid interval `[k, k + 1]` (or grid point `k`) the root was found in.
    k: usize,
}

/// Fixed points of the `i`-th lowest eigenvalue `λ_i(z)`, which is continuous
/// wherever the model is, whatever the branch labels do.
fn ordered_roots(
    h: &EdHamiltonian,
    table: &BranchTable,
    sorted: &[Vec<(f64, usize)>],
    i: usize,
    opts: &SolveOptions,
) -> Result<Vec<Root>, NlevpError> {
    let grid = &table.grid;
    let g: Vec<f64> = sorted.iter().zip(grid).map(|(col, z)| col[i].0 - z).collect();
    let eval = |z: f64| -> Result<Option<EigenPair>, NlevpError> {
        Ok(eigen_at_lowest(h, z, opts.max_branches)?.into_iter().nth(i))
    };
    let tol = opts.tol;
    let mut roots: Vec<Root> = Vec::new();
    for k in 0..grid.len() {
        if g[k] == 0.0 {
            let pair = table.branches[sorted[k][i].1][k].clone();
            roots.push(Root { z: grid[k], pair, k });
            continue;
        }
        if k + 1 == grid.len() || g[k + 1] == 0.0 || g[k] * g[k + 1] > 0.0 {
            continue;
        }
        let (a, b) = (grid[k], grid[k + 1]);
        let (mut lo, mut hi, mut g_lo) = (a, b, g[k]);
        let mut best: Option<(f64, f64, EigenPair)> = None;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let Some(pair) = eval(mid)? else { break };
            let g_mid = pair.value.re - mid;
            let done = g_mid.abs() <= tol;
            let (left, right) = (g_lo * g_mid < 0.0, g_lo * g_mid > 0.0);
            if best.as_ref().is_none_or(|bst| g_mid.abs() < bst.1.abs()) {
                best = Some((mid, g_mid, pair));
            }
            if done || !(left || right) {
                break;
            }
            if left {
                hi = mid;
            } else {
                lo = mid;
                g_lo = g_mid;
            }
        }
        let Some((mut z_star, mut g_star, mut pair)) = best else {
            continue;
        };
        // polish with the fixed-point map z ← λ_i(z); exact where the branch is
        // locally constant, kept only while |g| decreases
        for _ in 0..4 {
            let cand = pair.value.re;
            if g_star == 0.0 || cand == z_star || !(a..=b).contains(&cand) {
                break;
            }
            let Some(p) = eval(cand)? else { break };
            let g_cand = p.value.re - cand;
            if g_cand.abs() >= g_star.abs() {
                break;
            }
            (z_star, g_star, pair) = (cand, g_cand, p);
        }
        // a sign change across a jump (step boundary) never converges in |g|
        if g_star.abs() <= tol.max(1e-9 * (1.0 + z_star.abs())) {
            roots.push(Root { z: z_star, pair, k });
        }
    }
    roots.dedup_by(|r2, r1| (r2.z - r1.z).abs() <= 10.0 * tol);
    Ok(roots)
}

/// All fixed points in the grid span, attached to the tracked branch whose
/// eigenvectors at the bracketing grid points overlap most with the root's.
fn all_roots(h: &EdHamiltonian, table: &BranchTable, opts: &SolveOptions) -> Result<Vec<Vec<Root>>, NlevpError> {
    let nb = table.branch_count();
    for (n, branch) in table.branches.iter().enumerate() {
        for (k, p) in branch.iter().enumerate() {
            if p.value.im.abs() > COMPLEX_BRANCH_TOL {
                return Err(NlevpError::ComplexBranch {
                    branch: n,
                    z: table.grid[k],
                    imag: p.value.im,
                });
            }
        }
    }
    let sorted: Vec<Vec<(f64, usize)>> = (0..table.grid.len())
        .map(|k| {
            let mut col: Vec<(f64, usize)> = (0..nb).map(|n| (table.branches[n][k].value.re, n)).collect();
            col.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            col
        })
        .collect();
    let found: Vec<Vec<Root>> = (0..nb)
        .into_par_iter()
        .map(|i| ordered_roots(h, table, &sorted, i, opts))
        .collect::<Result<_, _>>()?;
    let last = table.grid.len() - 1;
    let mut per_branch: Vec<Vec<Root>> = vec![Vec::new(); nb];
    for root in found.into_iter().flatten() {
        let ends = [root.k, (root.k + 1).min(last)];
        let n = (0..nb)
            .map(|n| {
                let score: f64 = ends
                    .iter()
                    .map(|&k| overlap(&table.branches[n][k].right, &root.pair.right))
                    .sum();
                (n, score)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
            .map_or(0, |(n, _)| n);
        per_branch[n].push(root);
    }
    for roots in &mut per_branch {
        roots.sort_by(|a, b| a.z.total_cmp(&b.z));
    }
    Ok(per_branch)
}

/// Real fixed points `z* = E^(n)(z*)` of branch `n` inside the grid span.
pub fn self_consistent_roots(
    h: &EdHamiltonian,
    table: &BranchTable,
    n: usize,
    tol: f64,
) -> Result<Vec<f64>, NlevpError> {
    if n >= table.branch_count() {
        return Err(NlevpError::NoSuchBranch {
            branch: n,
            count: table.branch_count(),
        });
    }
    let opts = SolveOptions {
        tol,
        max_branches: Some(table.branch_count()),
        ..SolveOptions::default()
    };
    Ok(all_roots(h, table, &opts)?
        .swap_remove(n)
        .into_iter()
        .map(|r| r.z)
        .collect())
}

/// Multi-index `α = (n, j)`: branch `n`, root ordinal `j` within the branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Alpha {
    pub n: usize,
    pub j: usize,
}

/// One self-consistent solution of `H(E) φ = E φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    pub alpha: Alpha,
    pub energy: f64,
    /// Unit-norm ket.
    pub right: CVector,
    /// Co-vector with `left · right = 1`.
    pub left: CVector,
    pub residual_right: f64,
    pub residual_left: f64,
    /// `|E^(n)(E_α) − E_α|` at the final evaluation.
    pub fixed_point_residual: f64,
    /// Smallest branch-matching overlap of the span the state was found in.
    pub match_quality: f64,
}

/// Uniform grid on `[lo, hi]` with geometric clustering toward bounding poles.
fn span_grid(lo: f64, hi: f64, points: usize, lo_pole: Option<f64>, hi_pole: Option<f64>) -> Vec<f64> {
    let points = points.max(2);
    let h = (hi - lo) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| lo + i as f64 * h).collect();
    grid[points - 1] = hi;
    if let Some(p) = lo_pole {
        let mut off = 2.0 * (lo - p);
        while p + off < lo + h {
            grid.push(p + off);
            off *= 2.0;
        }
    }
    if let Some(p) = hi_pole {
        let mut off = 2.0 * (p - hi);
        while p - off > hi - h {
            grid.push(p - off);
            off *= 2.0;
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// All self-consistent bound states with energies in `[lo, hi]`.
pub fn solve_all(h: &EdHamiltonian, lo: f64, hi: f64, opts: &SolveOptions) -> Result<Vec<BoundState>, NlevpError> {
    let spans = h
        .domain()
        .admissible_spans(lo, hi, opts.pole_margin)
        .map_err(|at| NlevpError::Interval { lo, hi, at })?;
    let total: f64 = spans.iter().map(|s| s.hi - s.lo).sum();

    let mut states: Vec<BoundState> = Vec::new();
    let mut next_j: Vec<usize> = Vec::new();
    for span in spans {
        let share = ((span.hi - span.lo) / total * opts.grid_points as f64).round() as usize;
        let grid = span_grid(span.lo, span.hi, share.max(16), span.lo_pole, span.hi_pole);
        let table = trace_branches(h, &grid, opts)?;
        let quality = table.min_match_quality();
        let per_branch = all_roots(h, &table, opts)?;
        if next_j.len() < per_branch.len() {
            next_j.resize(per_branch.len(), 0);
        }
        for (n, roots) in per_branch.into_iter().enumerate() {
            for root in roots {
                let pair = root.pair;
                let m = h.eval_structured(root.z)?;
                let right = pair.right.clone();
                let scale = linalg::pair(&pair.left, &right);
                let left = &pair.left / scale;
                let (residual_right, residual_left) = eigen_residuals(&m, root.z, &right, &left);
                states.push(BoundState {
                    alpha: Alpha { n, j: next_j[n] },
                    energy: root.z,
                    right,
                    left,
                    residual_right,
                    residual_left,
                    fixed_point_residual: (pair.value.re - root.z).abs(),
                    match_quality: quality,
                });
                next_j[n] += 1;
            }
        }
    }
    states.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.alpha.cmp(&b.alpha)));
    Ok(states)
}
