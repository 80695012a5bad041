//! One-dimensional truncated Hilbert transform `Hf(x) = ∫_{|x−y|>ε} f(y)/(x−y) dy`
//! on cell centers, its weighted testing constants, the weak-type duality
//! pairing and a seeded search over cascade weight pairs.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{top_eigenpair, MAX_STEPS, REL_TOL};
use crate::mesh::{ensure_same_mesh, DyadicCube, DyadicMesh, GridFunction, Weight};
use crate::orlicz::{lorentz21_indicator, maximal_norm_estimate, random_test_functions, weak_norm, MaximalNormEstimate};
use crate::report::Semantics;
use crate::weights::{generate_weight, opposed_cascade};

/// Grids up to this many cells apply the kernel by direct summation.
const DIRECT_CELLS: usize = 256;

/// Start-vector seed for the Lanczos norms.
const NORM_SEED: u64 = 0x4b1d;

/// Cell-to-cell kernel of the truncated transform on a fixed mesh.
///
/// `offsets[D]` is `∫ dy/(x−y)` over the cell whose center sits `D` cells to
/// the left of `x`, with `|x−y| ≤ ε` removed. The kernel is odd in `D`, so
/// the matrix is exactly antisymmetric. Whole-grid products go through a
/// zero-padded FFT convolution; cube-local blocks are summed directly.
#[derive(Clone)]
pub struct HilbertKernel {
    mesh: DyadicMesh,
    eps: f64,
    offsets: Vec<f64>,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for HilbertKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HilbertKernel")
            .field("mesh", &self.mesh)
            .field("eps", &self.eps)
            .finish_non_exhaustive()
    }
}

impl HilbertKernel {
    pub fn new(mesh: DyadicMesh, eps: f64) -> Result<Self> {
        if mesh.dim() != 1 {
            return Err(Error::UnsupportedDimension(mesh.dim()));
        }
        let h = mesh.cell_volume();
        if !(eps >= 0.5 * h && eps.is_finite()) {
            return Err(Error::Domain(format!(
                "truncation {eps} is below half a cell width {}",
                0.5 * h
            )));
        }
        let n = mesh.cell_count();
        let offsets: Vec<f64> = (0..n).map(|d| cell_integral(d as f64 * h, h, eps)).collect();
        // circulant embedding of the Toeplitz matrix, period 2n
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(2 * n);
        let inverse = planner.plan_fft_inverse(2 * n);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); 2 * n];
        for (d, &v) in offsets.iter().enumerate().skip(1) {
            spectrum[d].re = v;
            spectrum[2 * n - d].re = -v;
        }
        forward.process(&mut spectrum);
        Ok(Self {
            mesh,
            eps,
            offsets,
            spectrum,
            forward,
            inverse,
        })
    }

    /// Truncation at one cell width.
    pub fn default_for(mesh: DyadicMesh) -> Result<Self> {
        Self::new(mesh, mesh.cell_volume())
    }

    pub fn mesh(&self) -> DyadicMesh {
        self.mesh
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn entry(&self, out: usize, src: usize) -> f64 {
        if out >= src {
            self.offsets[out - src]
        } else {
            -self.offsets[src - out]
        }
    }

    /// `(Hf)` on the cells `out`, from the values of `f` on the cells `src`
    /// (`f` indexed from `src.start`).
    fn apply_block(&self, f: &[f64], src: Range<usize>, out: Range<usize>) -> Vec<f64> {
        out.into_par_iter()
            .with_min_len(64)
            .map(|k| src.clone().zip(f).map(|(i, v)| self.entry(k, i) * v).sum())
            .collect()
    }

    pub fn apply_values(&self, f: &[f64]) -> Vec<f64> {
        let n = self.mesh.cell_count();
        assert_eq!(f.len(), n);
        if n <= DIRECT_CELLS {
            return self.apply_block(f, 0..n, 0..n);
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        buf.iter_mut().zip(f).for_each(|(b, v)| b.re = *v);
        self.forward.process(&mut buf);
        buf.iter_mut().zip(&self.spectrum).for_each(|(b, k)| *b *= k);
        self.inverse.process(&mut buf);
        let scale = 1.0 / (2 * n) as f64;
        buf[..n].iter().map(|c| c.re * scale).collect()
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.mesh() != self.mesh {
            return Err(Error::MeshMismatch("function and kernel meshes differ".into()));
        }
        GridFunction::new(self.mesh, self.apply_values(f.values()))
    }

    /// `H_w g := H(g·w)`.
    pub fn apply_weighted(&self, g: &GridFunction, w: &Weight) -> Result<GridFunction> {
        self.apply(&g.mul(w)?)
    }

    /// Norm of `f ↦ H(fσ)` from `L²(σ)` to `L²(u)`: the square root of the top
    /// eigenvalue of `σ^{1/2} Hᵀ u H σ^{1/2}`, by Lanczos.
    pub fn weighted_norm(&self, u: &Weight, sigma: &Weight) -> Result<f64> {
        ensure_same_mesh(u, sigma)?;
        if u.mesh() != self.mesh {
            return Err(Error::MeshMismatch("weights and kernel meshes differ".into()));
        }
        let sq: Vec<f64> = sigma.values().iter().map(|v| v.sqrt()).collect();
        let uv = u.values();
        let e = top_eigenpair(
            self.mesh.cell_count(),
            |g| {
                let x: Vec<f64> = g.iter().zip(&sq).map(|(a, b)| a * b).collect();
                let y: Vec<f64> = self.apply_values(&x).iter().zip(uv).map(|(a, b)| a * b).collect();
                // Hᵀ = −H
                self.apply_values(&y).iter().zip(&sq).map(|(a, b)| -a * b).collect()
            },
            NORM_SEED,
            MAX_STEPS,
            REL_TOL,
        );
        Ok(e.value.max(0.0).sqrt())
    }

    /// Unweighted `L²(dx)` operator norm.
    pub fn l2_norm(&self) -> f64 {
        let one = Weight::constant(self.mesh, 1.0).expect("positive constant");
        self.weighted_norm(&one, &one).expect("same mesh")
    }
}

/// `∫ ds/s` over `[D − h/2, D + h/2]` with `|s| ≤ ε` removed.
fn cell_integral(d: f64, h: f64, eps: f64) -> f64 {
    let (a, b) = (d - 0.5 * h, d + 0.5 * h);
    let mut total = 0.0;
    if b > eps {
        let lo = a.max(eps);
        total += (b / lo).ln();
    }
    if a < -eps {
        let hi = b.min(-eps);
        total += (hi.abs() / a.abs()).ln();
    }
    total
}

/// `H_ε f` at every cell center.
pub fn hilbert_apply(f: &GridFunction, eps: f64) -> Result<GridFunction> {
    HilbertKernel::new(f.mesh(), eps)?.apply(f)
}

#[derive(Clone, Debug, Serialize)]
pub struct HilbertTesting {
    /// `max_Q ∫_Q |H(χ_Q σ)|² u / σ(Q)`.
    pub t_sigma: f64,
    pub t_sigma_argmax: DyadicCube,
    /// `max_Q ∫_Q |H(χ_Q u)|² σ / u(Q)`.
    pub t_u: f64,
    pub t_u_argmax: DyadicCube,
}

/// `∫_Q |H(χ_Q w)|² other / w(Q)` for one cube.
fn testing_ratio(k: &HilbertKernel, q: &DyadicCube, w: &[f64], other: &[f64]) -> f64 {
    let mesh = k.mesh;
    let start = q.index_in_level() << (mesh.depth() - q.level());
    let range = start..start + mesh.cells_in(q);
    let g = k.apply_block(&w[range.clone()], range.clone(), range.clone());
    let num: f64 = g.iter().zip(&other[range.clone()]).map(|(a, b)| a * a * b).sum();
    let den: f64 = w[range].iter().sum();
    num / den
}

fn testing_max(k: &HilbertKernel, w: &[f64], other: &[f64]) -> (f64, DyadicCube) {
    let cubes: Vec<DyadicCube> = k.mesh.cubes().collect();
    let (value, arg) = cubes
        .par_iter()
        .enumerate()
        .map(|(i, q)| (testing_ratio(k, q, w, other), i))
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), |a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }
        });
    (value, cubes[arg])
}

/// Both testing suprema, exact over all dyadic cubes.
pub fn hilbert_testing(u: &Weight, sigma: &Weight, eps: f64) -> Result<HilbertTesting> {
    ensure_same_mesh(u, sigma)?;
    let k = HilbertKernel::new(u.mesh(), eps)?;
    hilbert_testing_with(&k, u, sigma)
}

pub fn hilbert_testing_with(k: &HilbertKernel, u: &Weight, sigma: &Weight) -> Result<HilbertTesting> {
    ensure_same_mesh(u, sigma)?;
    let (t_sigma, t_sigma_argmax) = testing_max(k, sigma.values(), u.values());
    let (t_u, t_u_argmax) = testing_max(k, u.values(), sigma.values());
    Ok(HilbertTesting {
        t_sigma,
        t_sigma_argmax,
        t_u,
        t_u_argmax,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    /// `∫_Q H(fσ) u`.
    pub pairing: f64,
    /// `∫_Q |H(fσ)| u`, the quantity actually bounded.
    pub abs_pairing: f64,
    pub weak: f64,
    pub lorentz: f64,
    /// `weak · lorentz − abs_pairing`.
    pub slack: f64,
}

/// `∫_Q |H_σ f| u ≤ ‖H_σ f‖_{L^{2,∞}(u)} ‖χ_Q‖_{L^{2,1}(u)}`, both sides.
pub fn mw_duality_check(
    u: &Weight,
    sigma: &Weight,
    f: &GridFunction,
    q: &DyadicCube,
    eps: f64,
) -> Result<DualityReport> {
    let k = HilbertKernel::new(u.mesh(), eps)?;
    mw_duality_check_with(&k, u, sigma, f, q)
}

pub fn mw_duality_check_with(
    k: &HilbertKernel,
    u: &Weight,
    sigma: &Weight,
    f: &GridFunction,
    q: &DyadicCube,
) -> Result<DualityReport> {
    ensure_same_mesh(u, sigma)?;
    ensure_same_mesh(u, f)?;
    let g = k.apply_weighted(f, sigma)?;
    let h = u.mesh().cell_volume();
    let (mut pairing, mut abs_pairing) = (0.0, 0.0);
    for cell in u.mesh().cells(q) {
        let v = g.values()[cell] * u.values()[cell] * h;
        pairing += v;
        abs_pairing += v.abs();
    }
    let weak = weak_norm(&g, u, 2.0)?;
    let lorentz = lorentz21_indicator(q, u)?;
    Ok(DualityReport {
        pairing,
        abs_pairing,
        weak,
        lorentz,
        slack: weak * lorentz - abs_pairing,
    })
}

/// Left side and the four right-hand terms of the two-weight `L²` bound for
/// `H(·σ)`. All terms are in operator-norm units, so each scales like the
/// left side.
#[derive(Clone, Debug, Serialize)]
pub struct CzmReport {
    /// `‖H(·σ)‖_{L²(σ)→L²(u)}`.
    pub lhs: f64,
    pub lhs_semantics: Semantics,
    /// `M(·σ) : L²(σ) → L²(u)`.
    pub maximal_sigma: MaximalNormEstimate,
    /// `M(·u) : L²(u) → L²(σ)`.
    pub maximal_u: MaximalNormEstimate,
    pub testing: HilbertTesting,
    /// `[M(·σ), M(·u), √T_σ, √T_u]`.
    pub terms: [f64; 4],
    pub rhs: f64,
    pub ratio: f64,
}

pub fn czm_rhs(u: &Weight, sigma: &Weight, eps: f64, budget: usize, seed: u64) -> Result<CzmReport> {
    ensure_same_mesh(u, sigma)?;
    let k = HilbertKernel::new(u.mesh(), eps)?;
    let fs = random_test_functions(u.mesh(), budget, seed);
    let maximal_sigma = maximal_norm_estimate(u, sigma, 2.0, &fs)?;
    let maximal_u = maximal_norm_estimate(sigma, u, 2.0, &fs)?;
    let testing = hilbert_testing_with(&k, u, sigma)?;
    let lhs = k.weighted_norm(u, sigma)?;
    let terms = [
        maximal_sigma.lower_bound,
        maximal_u.lower_bound,
        testing.t_sigma.sqrt(),
        testing.t_u.sqrt(),
    ];
    let rhs: f64 = terms.iter().sum();
    Ok(CzmReport {
        lhs,
        lhs_semantics: Semantics::Exact,
        maximal_sigma,
        maximal_u,
        testing,
        terms,
        rhs,
        ratio: lhs / rhs,
    })
}

/// How the second weight of a searched pair relates to the first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    Independent,
    /// Same random stream with every split reversed.
    Opposed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairParams {
    pub eta_u: f64,
    pub eta_sigma: f64,
    pub seed_u: u64,
    pub seed_sigma: u64,
    pub coupling: Coupling,
}

impl PairParams {
    pub fn weights(&self, mesh: DyadicMesh) -> Result<(Weight, Weight)> {
        let u = generate_weight(&format!("cascade:{},{}", self.eta_u, self.seed_u), mesh)?;
        let sigma = match self.coupling {
            Coupling::Independent => {
                generate_weight(&format!("cascade:{},{}", self.eta_sigma, self.seed_sigma), mesh)?
            }
            Coupling::Opposed => opposed_cascade(mesh, self.eta_sigma, self.seed_u)?,
        };
        Ok((u, sigma))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchConfig {
    pub seed: u64,
    pub budget: usize,
    pub depth: u32,
    /// Coarsest resolution of the returned trajectory.
    pub min_depth: u32,
    /// Test functions are `χ_Q` for cubes down to this level.
    pub candidate_levels: u32,
    /// Soft cap on both empirical maximal norms.
    pub maximal_cap: f64,
    pub penalty: f64,
    pub max_eta: f64,
}

impl SearchConfig {
    pub fn new(seed: u64, budget: usize, depth: u32) -> Self {
        Self {
            seed,
            budget,
            depth,
            min_depth: 4.min(depth),
            candidate_levels: 5,
            maximal_cap: 6.0,
            penalty: 10.0,
            max_eta: 0.9,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairEvaluation {
    pub depth: u32,
    /// `max_f ‖H(fσ)‖_{L^{2,∞}(u)} / ‖f‖_{L²(σ)}` over the candidates.
    pub weak_ratio: f64,
    pub weak_argmax: DyadicCube,
    pub maximal_sigma: f64,
    pub maximal_u: f64,
    /// `cap − maximal`, negative when the soft constraint is violated.
    pub slack_sigma: f64,
    pub slack_u: f64,
    pub score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchStep {
    pub step: usize,
    pub params: PairParams,
    pub evaluation: PairEvaluation,
    pub accepted: bool,
}

/// Evidence record of a search. Nothing here certifies unboundedness.
#[derive(Clone, Debug, Serialize)]
pub struct SearchRecord {
    pub config: SearchConfig,
    pub baseline: PairEvaluation,
    pub best: PairParams,
    pub best_evaluation: PairEvaluation,
    pub history: Vec<SearchStep>,
    /// The best pair re-evaluated at depths `min_depth..=depth`.
    pub trajectory: Vec<PairEvaluation>,
    pub trajectory_nondecreasing: bool,
}

pub fn evaluate_pair(params: &PairParams, depth: u32, config: &SearchConfig) -> Result<PairEvaluation> {
    let mesh = DyadicMesh::new(1, depth)?;
    let (u, sigma) = params.weights(mesh)?;
    let k = HilbertKernel::default_for(mesh)?;
    let top = config.candidate_levels.min(depth);
    let cubes: Vec<DyadicCube> = (0..=top).flat_map(|j| mesh.cubes_at(j)).collect();
    let n = mesh.cell_count();
    let (weak_ratio, arg) = cubes
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let mut f = vec![0.0; n];
            for cell in mesh.cells(q) {
                f[cell] = sigma.values()[cell];
            }
            let g = GridFunction::new(mesh, k.apply_values(&f)).expect("one value per cell");
            let w = weak_norm(&g, &u, 2.0).expect("same mesh");
            (w / sigma.measure(q).sqrt(), i)
        })
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), |a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a }
        });
    let maximal_sigma = maximal_norm_estimate(&u, &sigma, 2.0, &[])?.lower_bound;
    let maximal_u = maximal_norm_estimate(&sigma, &u, 2.0, &[])?.lower_bound;
    let slack_sigma = config.maximal_cap - maximal_sigma;
    let slack_u = config.maximal_cap - maximal_u;
    let score = weak_ratio - config.penalty * ((-slack_sigma).max(0.0) + (-slack_u).max(0.0));
    Ok(PairEvaluation {
        depth,
        weak_ratio,
        weak_argmax: cubes[arg],
        maximal_sigma,
        maximal_u,
        slack_sigma,
        slack_u,
        score,
    })
}

/// Seeded greedy search over cascade pairs for a large weak-type ratio of
/// `H(·σ)` under soft caps on both two-weight maximal norms. Starts from the
/// constant pair; each step either perturbs the incumbent or draws a fresh
/// pair, and keeps the proposal if its score improves.
pub fn counterexample_search(config: &SearchConfig) -> Result<SearchRecord> {
    if config.min_depth > config.depth {
        return Err(Error::Config(format!(
            "min_depth {} exceeds depth {}",
            config.min_depth, config.depth
        )));
    }
    if !(0.0..1.0).contains(&config.max_eta) {
        return Err(Error::Config(format!("max_eta must lie in [0, 1), got {}", config.max_eta)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best = PairParams {
        eta_u: 0.0,
        eta_sigma: 0.0,
        seed_u: rng.gen(),
        seed_sigma: rng.gen(),
        coupling: Coupling::Independent,
    };
    let baseline = evaluate_pair(&best, config.depth, config)?;
    let mut best_eval = baseline.clone();
    let mut history = Vec::with_capacity(config.budget);
    let top = config.max_eta;
    for step in 0..config.budget {
        let params = if rng.gen_bool(0.5) {
            let mut p = best;
            p.eta_u = (p.eta_u + rng.gen_range(-0.15..0.15)).clamp(0.0, top);
            p.eta_sigma = (p.eta_sigma + rng.gen_range(-0.15..0.15)).clamp(0.0, top);
            if rng.gen_bool(0.25) {
                p.seed_u = rng.gen();
                p.seed_sigma = rng.gen();
            }
            if rng.gen_bool(0.2) {
                p.coupling = match p.coupling {
                    Coupling::Independent => Coupling::Opposed,
                    Coupling::Opposed => Coupling::Independent,
                };
            }
            p
        } else {
            PairParams {
                eta_u: rng.gen_range(0.0..=top),
                eta_sigma: rng.gen_range(0.0..=top),
                seed_u: rng.gen(),
                seed_sigma: rng.gen(),
                coupling: if rng.gen_bool(0.5) { Coupling::Independent } else { Coupling::Opposed },
            }
        };
        let evaluation = evaluate_pair(&params, config.depth, config)?;
        let accepted = evaluation.score > best_eval.score;
        if accepted {
            best = params;
            best_eval = evaluation.clone();
        }
        history.push(SearchStep {
            step,
            params,
            evaluation,
            accepted,
        });
    }
    let trajectory = (config.min_depth..=config.depth)
        .map(|l| evaluate_pair(&best, l, config))
        .collect::<Result<Vec<_>>>()?;
    let trajectory_nondecreasing = trajectory
        .windows(2)
        .all(|w| w[1].weak_ratio >= w[0].weak_ratio * (1.0 - 1e-12));
    Ok(SearchRecord {
        config: config.clone(),
        baseline,
        best,
        best_evaluation: best_eval,
        history,
        trajectory,
        trajectory_nondecreasing,
    })
}
