//! Generalized dyadic Haar shifts, sparse (Lerner-family) positive shifts,
//! maximal truncations and two-weight norm/testing estimators.
//!
//! A shift of complexity `(m, n)` acts by
//! `S f = Σ_Q (1/|Q|) Σ (f, h_{Q'}) h_{Q''}` where for each base cube `Q`
//! the sum runs over stored triples with `ℓ(Q') = 2^{-n} ℓ(Q)` and
//! `ℓ(Q'') = 2^{-m} ℓ(Q)`. Haar functions are `L^∞`-normalized:
//! `h_R = Σ_{children R'} c_{R'} χ_{R'}` with `|c| ≤ 1`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{top_eigenpair, MAX_STEPS, REL_TOL};
use crate::mesh::{dot, ensure_same_mesh, DyadicCube, DyadicMesh, GridFunction, Pyramid, Weight};
use crate::report::Semantics;
use crate::young::conjugate_exponent;

/// Tolerance on `Σ c` for a Haar function to count as cancellative.
pub const CANCELLATION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarFunction {
    cube: DyadicCube,
    coeffs: Vec<f64>,
}

impl HaarFunction {
    /// One coefficient per child of `cube`, children in lexicographic order.
    pub fn new(cube: DyadicCube, coeffs: Vec<f64>) -> Result<Self> {
        let h = Self { cube, coeffs };
        h.validate()?;
        Ok(h)
    }

    /// `χ_cube`, all coefficients 1.
    pub fn indicator(cube: DyadicCube) -> Self {
        let n = 1usize << cube.dim();
        Self {
            cube,
            coeffs: vec![1.0; n],
        }
    }

    fn validate(&self) -> Result<()> {
        let n = 1usize << self.cube.dim();
        if self.coeffs.len() != n {
            return Err(Error::InvalidShift(format!(
                "Haar function on {} needs {n} coefficients, got {}",
                self.cube,
                self.coeffs.len()
            )));
        }
        if let Some(c) = self.coeffs.iter().find(|c| !(c.abs() <= 1.0)) {
            return Err(Error::InvalidShift(format!(
                "Haar coefficient {c} outside [-1, 1] on {}",
                self.cube
            )));
        }
        Ok(())
    }

    pub fn cube(&self) -> DyadicCube {
        self.cube
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Children have equal volume, so `Σ c |child| = 0` iff `Σ c = 0`.
    pub fn is_cancellative(&self) -> bool {
        self.coeffs.iter().sum::<f64>().abs() <= CANCELLATION_TOL
    }

    pub fn is_nonnegative(&self) -> bool {
        self.coeffs.iter().all(|&c| c >= 0.0)
    }

    /// `(f, h)` from a pyramid of cell sums.
    fn pair(&self, sums: &Pyramid, cell_volume: f64) -> f64 {
        self.cube
            .children()
            .zip(&self.coeffs)
            .map(|(child, c)| c * sums.get(&child))
            .sum::<f64>()
            * cell_volume
    }

    /// Adds `scale · h` to the deposit levels.
    fn deposit(&self, scale: f64, levels: &mut [Vec<f64>]) {
        for (child, c) in self.cube.children().zip(&self.coeffs) {
            levels[child.level() as usize][child.index_in_level()] += scale * c;
        }
    }
}

/// One term `(1/|Q|) (f, h_{Q'}) h_{Q''}` of a shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub base: DyadicCube,
    /// `h_{Q'}`, paired with the input.
    pub source: HaarFunction,
    /// `h_{Q''}`, carrying the output.
    pub target: HaarFunction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complexity {
    /// Depth of the output cubes `Q''` below the base.
    pub m: u32,
    /// Depth of the input cubes `Q'` below the base.
    pub n: u32,
}

impl Complexity {
    pub fn tau(&self) -> u32 {
        self.m.max(self.n) + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftMode {
    Cancellative,
    Positive,
}

impl std::str::FromStr for ShiftMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cancellative" => Ok(Self::Cancellative),
            "positive" => Ok(Self::Positive),
            _ => Err(Error::spec(s, "shift mode must be `cancellative` or `positive`")),
        }
    }
}

/// An immutable shift kernel with its unweighted `L^2` operator norm.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarShift {
    mesh: DyadicMesh,
    complexity: Complexity,
    triples: Vec<Triple>,
    l2_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct ShiftFile {
    mesh: DyadicMesh,
    complexity: Complexity,
    l2_norm: f64,
    triples: Vec<Triple>,
}

/// Start vector seed for the recorded unweighted norm.
const NORM_SEED: u64 = 0x5eed;

impl HaarShift {
    /// Validates the geometry of every triple, sorts them canonically and
    /// records the unweighted `L^2` norm.
    pub fn new(mesh: DyadicMesh, complexity: Complexity, mut triples: Vec<Triple>) -> Result<Self> {
        for t in &triples {
            mesh.check_cube(&t.base)?;
            for (h, depth, role) in [(&t.source, complexity.n, "Q'"), (&t.target, complexity.m, "Q''")] {
                h.validate()?;
                mesh.check_cube(&h.cube)?;
                if h.cube.level() != t.base.level() + depth || !t.base.contains(&h.cube) {
                    return Err(Error::InvalidShift(format!(
                        "{role} = {} is not {depth} levels below base {}",
                        h.cube, t.base
                    )));
                }
                if h.cube.level() >= mesh.depth() {
                    return Err(Error::NoChildren {
                        level: h.cube.level(),
                        depth: mesh.depth(),
                    });
                }
            }
        }
        triples.sort_by(|a, b| {
            (a.base, a.source.cube, a.target.cube).cmp(&(b.base, b.source.cube, b.target.cube))
        });
        let mut s = Self {
            mesh,
            complexity,
            triples,
            l2_norm: 0.0,
        };
        s.l2_norm = s.unweighted_norm();
        Ok(s)
    }

    pub fn mesh(&self) -> DyadicMesh {
        self.mesh
    }

    pub fn complexity(&self) -> Complexity {
        self.complexity
    }

    pub fn tau(&self) -> u32 {
        self.complexity.tau()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Recorded `‖S‖_{L^2(dx) → L^2(dx)}`.
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }

    /// All coefficients nonnegative.
    pub fn is_positive(&self) -> bool {
        self.triples
            .iter()
            .all(|t| t.source.is_nonnegative() && t.target.is_nonnegative())
    }

    fn unweighted_norm(&self) -> f64 {
        let n = self.mesh.cell_count();
        let e = top_eigenpair(
            n,
            |x| self.adjoint_values(&self.apply_values(x)),
            NORM_SEED,
            MAX_STEPS,
            REL_TOL,
        );
        e.value.max(0.0).sqrt()
    }

    /// Sum of the selected terms applied to `values`.
    fn apply_where(&self, values: &[f64], keep: impl Fn(&Triple) -> bool, adjoint: bool) -> Vec<f64> {
        let mesh = self.mesh;
        let sums = Pyramid::sums(mesh, values);
        let vol = mesh.cell_volume();
        let mut levels: Vec<Vec<f64>> = (0..=mesh.depth())
            .map(|j| vec![0.0; mesh.cubes_at_level(j)])
            .collect();
        for t in self.triples.iter().filter(|t| keep(t)) {
            let (src, dst) = if adjoint {
                (&t.target, &t.source)
            } else {
                (&t.source, &t.target)
            };
            let coef = src.pair(&sums, vol) / t.base.volume();
            if coef != 0.0 {
                dst.deposit(coef, &mut levels);
            }
        }
        Pyramid::from_levels(mesh, levels).descend(|a, b| a + b)
    }

    fn apply_values(&self, values: &[f64]) -> Vec<f64> {
        self.apply_where(values, |_| true, false)
    }

    fn adjoint_values(&self, values: &[f64]) -> Vec<f64> {
        self.apply_where(values, |_| true, true)
    }

    /// `S f`, exact.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check_mesh(f)?;
        GridFunction::new(self.mesh, self.apply_values(f.values()))
    }

    /// Only the terms whose base cube lies inside `q0`.
    pub fn apply_inside(&self, f: &GridFunction, q0: &DyadicCube) -> Result<GridFunction> {
        self.check_mesh(f)?;
        self.mesh.check_cube(q0)?;
        GridFunction::new(
            self.mesh,
            self.apply_where(f.values(), |t| q0.contains(&t.base), false),
        )
    }

    /// Only the terms whose base cube is in `bases`.
    pub fn apply_on_bases(&self, f: &GridFunction, bases: &BTreeSet<DyadicCube>) -> Result<GridFunction> {
        self.check_mesh(f)?;
        GridFunction::new(
            self.mesh,
            self.apply_where(f.values(), |t| bases.contains(&t.base), false),
        )
    }

    /// Contribution of each base level `j = 0..=L` separately.
    pub fn level_parts(&self, f: &GridFunction) -> Result<Vec<GridFunction>> {
        self.check_mesh(f)?;
        (0..=self.mesh.depth())
            .into_par_iter()
            .map(|j| {
                GridFunction::new(
                    self.mesh,
                    self.apply_where(f.values(), |t| t.base.level() == j, false),
                )
            })
            .collect()
    }

    fn check_mesh(&self, f: &GridFunction) -> Result<()> {
        if f.mesh() != self.mesh {
            return Err(Error::MeshMismatch(format!(
                "shift on {:?}, function on {:?}",
                self.mesh,
                f.mesh()
            )));
        }
        Ok(())
    }

    /// The `L^2(dx)` adjoint: every triple has its two Haar functions
    /// swapped and the complexity becomes `(n, m)`.
    pub fn adjoint(&self) -> HaarShift {
        let mut triples: Vec<Triple> = self
            .triples
            .iter()
            .map(|t| Triple {
                base: t.base,
                source: t.target.clone(),
                target: t.source.clone(),
            })
            .collect();
        triples.sort_by(|a, b| {
            (a.base, a.source.cube, a.target.cube).cmp(&(b.base, b.source.cube, b.target.cube))
        });
        HaarShift {
            mesh: self.mesh,
            complexity: Complexity {
                m: self.complexity.n,
                n: self.complexity.m,
            },
            triples,
            l2_norm: self.l2_norm,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ShiftFile {
            mesh: self.mesh,
            complexity: self.complexity,
            l2_norm: self.l2_norm,
            triples: self.triples.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Parses and revalidates a kernel; the stored norm is recomputed.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ShiftFile = serde_json::from_str(text)?;
        let mesh = DyadicMesh::new(file.mesh.dim(), file.mesh.depth())?;
        Self::new(mesh, file.complexity, file.triples)
    }
}

fn draw_coeffs(rng: &mut ChaCha8Rng, n: usize, mode: ShiftMode) -> Vec<f64> {
    match mode {
        ShiftMode::Positive => (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect(),
        ShiftMode::Cancellative => {
            let mut c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let mean = c.iter().sum::<f64>() / n as f64;
            c.iter_mut().for_each(|v| *v -= mean);
            // centering can push entries to ±2; rescale rather than clip so
            // the mean stays zero
            let peak = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak > 1.0 {
                c.iter_mut().for_each(|v| *v /= peak);
            }
            c
        }
    }
}

/// One random triple per base cube whose `Q'` and `Q''` still have
/// children. Deterministic in `seed`.
pub fn random_shift(mesh: DyadicMesh, m: u32, n: u32, seed: u64, mode: ShiftMode) -> Result<HaarShift> {
    let reach = m.max(n);
    if reach >= mesh.depth() {
        return Err(Error::InvalidShift(format!(
            "complexity ({m}, {n}) does not fit a mesh of depth {}",
            mesh.depth()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kids = 1usize << mesh.dim();
    let mut triples = Vec::new();
    for j in 0..mesh.depth() - reach {
        for base in mesh.cubes_at(j) {
            let pick = |rng: &mut ChaCha8Rng, depth: u32| {
                let count = 1usize << (mesh.dim() * depth);
                base.descendants_at(depth).nth(rng.gen_range(0..count)).unwrap()
            };
            let qs = pick(&mut rng, n);
            let qt = pick(&mut rng, m);
            let source = HaarFunction::new(qs, draw_coeffs(&mut rng, kids, mode))?;
            let target = HaarFunction::new(qt, draw_coeffs(&mut rng, kids, mode))?;
            triples.push(Triple { base, source, target });
        }
    }
    HaarShift::new(mesh, Complexity { m, n }, triples)
}

/// Cubes `Q_j^k` with pairwise disjoint cell sets `E_j^k ⊆ Q_j^k`,
/// `|E_j^k| ≥ |Q_j^k| / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseFamily {
    mesh: DyadicMesh,
    cubes: Vec<DyadicCube>,
    sets: Vec<Vec<usize>>,
}

impl SparseFamily {
    pub fn new(mesh: DyadicMesh, cubes: Vec<DyadicCube>, sets: Vec<Vec<usize>>) -> Result<Self> {
        if cubes.len() != sets.len() {
            return Err(Error::InvalidFamily(format!(
                "{} cubes but {} sets",
                cubes.len(),
                sets.len()
            )));
        }
        let mut used = vec![false; mesh.cell_count()];
        let mut seen = BTreeSet::new();
        for (q, e) in cubes.iter().zip(&sets) {
            mesh.check_cube(q)?;
            if !seen.insert(*q) {
                return Err(Error::InvalidFamily(format!("{q} listed twice")));
            }
            if q.level() >= mesh.depth() {
                return Err(Error::InvalidFamily(format!("{q} is a finest cell")));
            }
            let inside: BTreeSet<usize> = mesh.cells(q).collect();
            for &c in e {
                if !inside.contains(&c) {
                    return Err(Error::InvalidFamily(format!("cell {c} of E lies outside {q}")));
                }
                if std::mem::replace(&mut used[c], true) {
                    return Err(Error::InvalidFamily(format!("cell {c} belongs to two sets E")));
                }
            }
            if 2 * e.len() < inside.len() {
                return Err(Error::InvalidFamily(format!(
                    "|E| = {} cells is less than half of {q} ({} cells)",
                    e.len(),
                    inside.len()
                )));
            }
        }
        Ok(Self { mesh, cubes, sets })
    }

    /// Random sparse family rooted at every cube of level `min_level`.
    /// Each chosen cube picks descendants one or two levels down covering at
    /// most half of it; those are chosen in turn, and `E` is what remains.
    pub fn random(mesh: DyadicMesh, seed: u64, min_level: u32) -> Result<Self> {
        if min_level >= mesh.depth() {
            return Err(Error::InvalidFamily(format!(
                "roots at level {min_level} leave no room on a mesh of depth {}",
                mesh.depth()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cubes = Vec::new();
        let mut sets = Vec::new();
        let mut stack: Vec<DyadicCube> = mesh.cubes_at(min_level).collect();
        stack.reverse();
        while let Some(q) = stack.pop() {
            let mut chosen = Vec::new();
            let room = mesh.depth() - 1 - q.level();
            if room > 0 {
                let k = if room >= 2 && rng.gen_bool(0.5) { 2 } else { 1 };
                let count = 1usize << (mesh.dim() * k);
                for r in q.descendants_at(k) {
                    if chosen.len() < count / 2 && rng.gen_bool(0.35) {
                        chosen.push(r);
                    }
                }
            }
            let blocked: BTreeSet<usize> = chosen.iter().flat_map(|r| mesh.cells(r)).collect();
            cubes.push(q);
            sets.push(mesh.cells(&q).filter(|c| !blocked.contains(c)).collect());
            stack.extend(chosen.into_iter().rev());
        }
        Self::new(mesh, cubes, sets)
    }

    pub fn mesh(&self) -> DyadicMesh {
        self.mesh
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }
}

/// `f ↦ Σ_Q ⟨f⟩_Q Σ_{R ∈ family, R^i = Q} χ_R`.
///
/// Stored with one triple per family cube `R`: base `R^i`, input Haar
/// function `χ_{R^i}` (so `Q' = Q`) and output `χ_R` at depth `i`. The
/// complexity is therefore `(m, n) = (i, 0)` and `τ = i + 1`.
pub fn lerner_shift(family: &SparseFamily, i: u32) -> Result<HaarShift> {
    let mut triples = Vec::with_capacity(family.len());
    for r in family.cubes() {
        let base = r.ancestor(i).ok_or(Error::ShallowFamilyCube {
            level: r.level(),
            order: i,
        })?;
        triples.push(Triple {
            base,
            source: HaarFunction::indicator(base),
            target: HaarFunction::indicator(*r),
        });
    }
    HaarShift::new(family.mesh(), Complexity { m: i, n: 0 }, triples)
}

/// `S_♯ f(x) = max over level windows [j1, j2] of |Σ_{j1 ≤ level(Q) ≤ j2} S_Q f(x)|`,
/// via per-cell prefix sums over base levels.
pub fn maximal_truncation(s: &HaarShift, f: &GridFunction) -> Result<GridFunction> {
    let parts = s.level_parts(f)?;
    let n = s.mesh.cell_count();
    let mut out = vec![0.0; n];
    for (x, o) in out.iter_mut().enumerate() {
        let (mut acc, mut lo, mut hi) = (0.0f64, 0.0f64, 0.0f64);
        for part in &parts {
            acc += part.values()[x];
            lo = lo.min(acc);
            hi = hi.max(acc);
        }
        *o = hi - lo;
    }
    GridFunction::new(s.mesh, out)
}

/// Two-weight norm estimate of `f ↦ S(fσ)` from `L^p(σ)` to `L^p(u)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    /// Exact for `p = 2`, otherwise the best ratio actually attained.
    pub lower_bound: f64,
    /// Extrapolated limit of the nonlinear power iteration, never below
    /// `lower_bound`; equal to it for `p = 2`.
    pub heuristic: f64,
    pub semantics: Semantics,
    pub candidates: usize,
}

fn weighted_lp(values: &[f64], w: &[f64], p: f64, vol: f64) -> f64 {
    (values
        .iter()
        .zip(w)
        .map(|(v, w)| v.abs().powf(p) * w)
        .sum::<f64>()
        * vol)
        .powf(1.0 / p)
}

fn signed_pow(v: f64, e: f64) -> f64 {
    v.signum() * v.abs().powf(e)
}

/// `sup_f ‖S(fσ)‖_{L^p(u)} / ‖f‖_{L^p(σ)}`.
///
/// For `p = 2` this is the square root of the top eigenvalue of
/// `g ↦ σ^{1/2} S*(u S(σ^{1/2} g))`. Otherwise candidates (the `p = 2`
/// extremizer, cube indicators, random signs, `budget` of the latter two
/// together) are refined by the nonlinear power iteration
/// `f ← ψ_{p'}(S*(u ψ_p(S(fσ))))` and the best attained ratio is returned
/// as a lower bound.
pub fn weighted_norm_estimate(
    s: &HaarShift,
    u: &Weight,
    sigma: &Weight,
    p: f64,
    budget: usize,
    seed: u64,
) -> Result<NormEstimate> {
    ensure_same_mesh(u, sigma)?;
    s.check_mesh(u)?;
    if budget == 0 {
        return Err(Error::Domain("norm estimation needs budget >= 1".into()));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("exponent p = {p} must lie in [1, ∞)")));
    }
    let uv = u.values();
    let sv = sigma.values();
    let root: Vec<f64> = sv.iter().map(|v| v.sqrt()).collect();
    let n = s.mesh.cell_count();
    let op = |g: &[f64]| {
        let x: Vec<f64> = g.iter().zip(&root).map(|(a, b)| a * b).collect();
        let y: Vec<f64> = s.apply_values(&x).iter().zip(uv).map(|(a, b)| a * b).collect();
        s.adjoint_values(&y).iter().zip(&root).map(|(a, b)| a * b).collect::<Vec<f64>>()
    };
    let eig = top_eigenpair(n, op, seed, MAX_STEPS, REL_TOL);
    let exact2 = eig.value.max(0.0).sqrt();
    if p == 2.0 {
        return Ok(NormEstimate {
            lower_bound: exact2,
            heuristic: exact2,
            semantics: Semantics::Exact,
            candidates: 1,
        });
    }
    let vol = s.mesh.cell_volume();
    let ratio = |f: &[f64]| {
        let fs: Vec<f64> = f.iter().zip(sv).map(|(a, b)| a * b).collect();
        let num = weighted_lp(&s.apply_values(&fs), uv, p, vol);
        let den = weighted_lp(f, sv, p, vol);
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    candidates.push(eig.vector.iter().zip(&root).map(|(g, r)| g / r).collect());
    candidates.push(vec![1.0; n]);
    let cubes: Vec<DyadicCube> = s.mesh.cubes().collect();
    for k in 0..budget {
        if k % 2 == 0 {
            let q = cubes[rng.gen_range(0..cubes.len())];
            candidates.push(GridFunction::indicator(s.mesh, &q).into_values());
        } else {
            candidates.push((0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect());
        }
    }
    let scored: Vec<(f64, usize)> = candidates
        .par_iter()
        .enumerate()
        .map(|(k, f)| (ratio(f), k))
        .collect();
    let (mut best, start) = scored
        .iter()
        .copied()
        .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a });
    let pc = conjugate_exponent(p);
    let mut f = candidates[start].clone();
    let mut history = vec![best];
    for _ in 0..40 {
        let fs: Vec<f64> = f.iter().zip(sv).map(|(a, b)| a * b).collect();
        let h: Vec<f64> = s
            .apply_values(&fs)
            .iter()
            .zip(uv)
            .map(|(v, w)| signed_pow(*v, p - 1.0) * w)
            .collect();
        let next: Vec<f64> = s.adjoint_values(&h).iter().map(|v| signed_pow(*v, pc - 1.0)).collect();
        if dot(&next, &next) == 0.0 || next.iter().any(|v| !v.is_finite()) {
            break;
        }
        let r = ratio(&next);
        history.push(r);
        best = best.max(r);
        f = next;
        let k = history.len();
        if k >= 2 && (history[k - 1] - history[k - 2]).abs() <= 1e-12 * history[k - 1] {
            break;
        }
    }
    let heuristic = aitken(&history).unwrap_or(best).max(best);
    Ok(NormEstimate {
        lower_bound: best,
        heuristic,
        semantics: Semantics::LowerBound,
        candidates: candidates.len(),
    })
}

/// Aitken Δ² extrapolation of the last three terms of an increasing run.
fn aitken(x: &[f64]) -> Option<f64> {
    let k = x.len();
    if k < 3 {
        return None;
    }
    let (a, b, c) = (x[k - 3], x[k - 2], x[k - 1]);
    let denom = c - 2.0 * b + a;
    if denom.abs() < 1e-300 || !(a <= b && b <= c) {
        return None;
    }
    let v = c - (c - b) * (c - b) / denom;
    v.is_finite().then_some(v)
}

/// Pointwise check of `max_Q ‖χ_Q S(χ_Q w_in)‖_{L^p(w_out)} / w_in(Q)^{1/p}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestingConstant {
    pub value: f64,
    pub argmax: DyadicCube,
}

/// Exact `sup_Q ‖χ_Q S(χ_Q σ)‖_{L^p(u)} / σ(Q)^{1/p}` over all grid cubes.
/// The dual constant of the testing theorem is
/// `testing_constant(&s.adjoint(), sigma, u, p)`.
pub fn testing_constant(s: &HaarShift, u: &Weight, sigma: &Weight, p: f64) -> Result<TestingConstant> {
    ensure_same_mesh(u, sigma)?;
    s.check_mesh(u)?;
    let mesh = s.mesh;
    let vol = mesh.cell_volume();
    let uv = u.values();
    let cubes: Vec<DyadicCube> = mesh.cubes().collect();
    let best = cubes
        .par_iter()
        .map(|q| {
            let local = sigma.restrict(q);
            let image = s.apply_values(local.values());
            let num: f64 = mesh.cells(q).map(|x| image[x].abs().powf(p) * uv[x]).sum::<f64>() * vol;
            let ratio = (num / sigma.measure(q)).powf(1.0 / p);
            (ratio, *q)
        })
        .reduce(
            || (f64::NEG_INFINITY, mesh.unit_cube()),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    Ok(TestingConstant {
        value: best.0,
        argmax: best.1,
    })
}

/// Result of splitting `χ_{Q0} S(χ_{Q0} σ)` into the terms based inside `Q0`
/// and the remainder from larger base cubes.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationReport {
    /// `Σ_{R ⊆ Q0} S_R(σ)`.
    pub inside: GridFunction,
    /// `max_{x ∈ Q0} (χ_{Q0}S(χ_{Q0}σ) − inside)(x) / ⟨σ⟩_{Q0}`.
    pub outside_ratio: f64,
    /// `max_{x ∈ Q0} Σ_{R ⊋ Q0} (|Q0|/|R|) Σ_{triples at R} h_{Q''}(x)`,
    /// which bounds `outside_ratio` for any positive shift.
    pub tail_factor: f64,
    /// The pointwise bound with `tail_factor · ⟨σ⟩_{Q0}` holds on every cell.
    pub holds: bool,
    /// The bound with tail term exactly `⟨σ⟩_{Q0}` holds on every cell.
    pub holds_unit_tail: bool,
}

pub fn localization_split(s: &HaarShift, sigma: &Weight, q0: &DyadicCube) -> Result<LocalizationReport> {
    if !s.is_positive() {
        return Err(Error::NotPositive);
    }
    s.check_mesh(sigma)?;
    s.mesh.check_cube(q0)?;
    let inside = s.apply_inside(sigma, q0)?;
    let whole = s.apply(&sigma.restrict(q0))?;
    let avg = sigma.average(q0);
    // outside majorant: deposit |Q0|/|R| · h'' for every strictly larger base
    let mut levels: Vec<Vec<f64>> = (0..=s.mesh.depth())
        .map(|j| vec![0.0; s.mesh.cubes_at_level(j)])
        .collect();
    for t in &s.triples {
        if t.base != *q0 && t.base.contains(q0) {
            t.target.deposit(q0.volume() / t.base.volume(), &mut levels);
        }
    }
    let tail = Pyramid::from_levels(s.mesh, levels).descend(|a, b| a + b);
    let slack = 1e-12 * (1.0 + s.l2_norm) * avg.max(whole.max_abs());
    let mut outside_ratio: f64 = 0.0;
    let mut tail_factor: f64 = 0.0;
    let mut holds = true;
    let mut holds_unit_tail = true;
    for x in s.mesh.cells(q0) {
        let lhs = whole.values()[x];
        let rest = lhs - inside.values()[x];
        outside_ratio = outside_ratio.max(rest / avg);
        tail_factor = tail_factor.max(tail[x]);
        holds &= rest <= tail[x] * avg + slack;
        holds_unit_tail &= rest <= avg + slack;
    }
    Ok(LocalizationReport {
        inside,
        outside_ratio,
        tail_factor,
        holds,
        holds_unit_tail,
    })
}
