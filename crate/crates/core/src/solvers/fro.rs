//! Alternating ridge updates of `X = PQᵀ` under the squared or
//! squared-hinge loss with penalty `λ/2(‖P‖_F² + ‖Q‖_F²)`.
//!
//! On a clipped entry the hinge is replaced by a squared loss switched on by
//! the indicator `z = 1{M^c > p_iᵀq_j}` (reversed for floor-clipped entries),
//! evaluated at the current factors, which makes each half-step a ridge
//! regression.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng as _;

use super::{aborted, FroInit, FroUpdate, SolveResult, SolverConfig};
use crate::linalg::{Bound, CompensatedSum, DenseMatrix};
use crate::observations::ObservedEntries;
use crate::{rng, Error, Result};

#[derive(Clone, Copy)]
struct Term {
    other: usize,
    value: f64,
    bound: Bound,
}

/// Observed entries grouped by row and by column.
struct Layout {
    by_row: Vec<Vec<Term>>,
    by_col: Vec<Vec<Term>>,
}

impl Layout {
    fn new(obs: &ObservedEntries, hinge: bool) -> Self {
        let mut by_row = vec![Vec::new(); obs.rows()];
        let mut by_col = vec![Vec::new(); obs.cols()];
        for e in obs.entries() {
            let bound = if hinge { obs.bound_of(e) } else { Bound::Interior };
            by_row[e.row].push(Term {
                other: e.col,
                value: e.value,
                bound,
            });
            by_col[e.col].push(Term {
                other: e.row,
                value: e.value,
                bound,
            });
        }
        Self { by_row, by_col }
    }
}

#[inline]
fn row_dot(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols()).map(|k| a[(i, k)] * b[(j, k)]).sum()
}

#[inline]
fn active(term: &Term, prediction: impl FnOnce() -> f64) -> bool {
    match term.bound {
        Bound::Interior => true,
        Bound::Ceiling => term.value > prediction(),
        Bound::Floor => term.value < prediction(),
    }
}

/// Recomputes every row of `target` from the ridge system over its terms.
///
/// The systems sum over rows of `basis`; the hinge indicator of row `a` and
/// term `b` compares against `z_own[a]ᵀ z_other[b]`. Rows without active terms
/// keep their value in `target`.
fn ridge_half_step(
    groups: &[Vec<Term>],
    target: &mut DMatrix<f64>,
    basis: &DMatrix<f64>,
    z_own: &DMatrix<f64>,
    z_other: &DMatrix<f64>,
    lambda: f64,
    factor: &'static str,
) -> Result<()> {
    let k = basis.ncols();
    let mut design = DMatrix::<f64>::zeros(0, k);
    let mut response = Vec::new();
    for (a, terms) in groups.iter().enumerate() {
        response.clear();
        let mut selected = Vec::with_capacity(terms.len());
        for term in terms {
            if active(term, || row_dot(z_own, a, z_other, term.other)) {
                selected.push(term.other);
                response.push(term.value);
            }
        }
        if selected.is_empty() {
            continue;
        }
        let m = selected.len();
        if design.nrows() != m {
            design = DMatrix::zeros(m, k);
        }
        for (r, &b) in selected.iter().enumerate() {
            for c in 0..k {
                design[(r, c)] = basis[(b, c)];
            }
        }
        let design_t = design.transpose();
        let mut gram = &design_t * &design;
        for c in 0..k {
            gram[(c, c)] += lambda;
        }
        let rhs = &design_t * DVector::from_column_slice(&response);
        let chol = Cholesky::new(gram).ok_or(Error::SingularSystem { factor, index: a })?;
        let solution = chol.solve(&rhs);
        if solution.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem { factor, index: a });
        }
        for c in 0..k {
            target[(a, c)] = solution[c];
        }
    }
    Ok(())
}

fn to_factor(m: &DenseMatrix) -> DMatrix<f64> {
    m.as_nalgebra().clone()
}

fn check_factors(obs: &ObservedEntries, p: &DenseMatrix, q: &DenseMatrix) -> Result<()> {
    if p.rows() != obs.rows() || q.rows() != obs.cols() || p.cols() != q.cols() {
        return Err(Error::InvalidDimensions(format!(
            "factors {:?} and {:?} for a {}x{} problem",
            p.shape(),
            q.shape(),
            obs.rows(),
            obs.cols()
        )));
    }
    Ok(())
}

/// One `q`-update: every column `j` solves
/// `(Σ p_i p_iᵀ + λI) q_j = Σ M^c_ij p_i` over its active terms, with the
/// hinge indicator evaluated at `(p, q_prev)`.
pub fn update_q(
    obs: &ObservedEntries,
    p: &DenseMatrix,
    q_prev: &DenseMatrix,
    lambda: f64,
    hinge: bool,
) -> Result<DenseMatrix> {
    check_factors(obs, p, q_prev)?;
    let layout = Layout::new(obs, hinge);
    let (pf, mut qf) = (to_factor(p), to_factor(q_prev));
    let q_z = qf.clone();
    ridge_half_step(&layout.by_col, &mut qf, &pf, &q_z, &pf, lambda, "column")?;
    Ok(DenseMatrix::from_nalgebra(qf))
}

/// One `p`-update: every row `i` solves the ridge system summing over rows of
/// `q_sum`, with the hinge indicator evaluated at `(p_prev, q_indicator)`.
pub fn update_p(
    obs: &ObservedEntries,
    p_prev: &DenseMatrix,
    q_sum: &DenseMatrix,
    q_indicator: &DenseMatrix,
    lambda: f64,
    hinge: bool,
) -> Result<DenseMatrix> {
    check_factors(obs, p_prev, q_sum)?;
    check_factors(obs, p_prev, q_indicator)?;
    let layout = Layout::new(obs, hinge);
    let mut pf = to_factor(p_prev);
    let p_z = pf.clone();
    ridge_half_step(&layout.by_row, &mut pf, &to_factor(q_sum), &p_z, &to_factor(q_indicator), lambda, "row")?;
    Ok(DenseMatrix::from_nalgebra(pf))
}

/// `½ Σ loss(M^c_ij, p_iᵀq_j) + λ/2 (‖P‖_F² + ‖Q‖_F²)`, with the squared hinge on
/// clipped entries when `hinge` is set.
pub fn fro_objective(obs: &ObservedEntries, p: &DenseMatrix, q: &DenseMatrix, lambda: f64, hinge: bool) -> Result<f64> {
    check_factors(obs, p, q)?;
    Ok(objective(obs, &to_factor(p), &to_factor(q), lambda, hinge))
}

fn objective(obs: &ObservedEntries, p: &DMatrix<f64>, q: &DMatrix<f64>, lambda: f64, hinge: bool) -> f64 {
    let mut sum = CompensatedSum::default();
    for e in obs.entries() {
        let pred = row_dot(p, e.row, q, e.col);
        let mut r = pred - e.value;
        if hinge {
            match obs.bound_of(e) {
                Bound::Interior => {}
                Bound::Ceiling => r = r.min(0.0),
                Bound::Floor => r = r.max(0.0),
            }
        }
        sum.add(r * r);
    }
    0.5 * sum.value() + 0.5 * lambda * (p.norm_squared() + q.norm_squared())
}

/// Level the initial product is placed at: the scalar ceiling plus one, or
/// one above the largest observation when no scalar ceiling is available.
fn initial_level(obs: &ObservedEntries) -> f64 {
    obs.spec()
        .and_then(|s| s.scalar_ceiling())
        .filter(|c| c.is_finite())
        .unwrap_or_else(|| obs.values().fold(f64::NEG_INFINITY, f64::max))
        + 1.0
}

fn initial_factors(obs: &ObservedEntries, cfg: &SolverConfig) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = cfg.rank_k;
    let level = initial_level(obs);
    let base = match cfg.fro_init {
        FroInit::Scaled => (level.abs() / k as f64).sqrt(),
        FroInit::Literal => level / (k as f64).sqrt(),
    };
    let mut rng = rng::seeded(cfg.seed);
    let mut draw = |n: usize| {
        DMatrix::from_fn(n, k, |_, _| {
            let u: f64 = rng.random_range(-1.0..1.0);
            base * (1.0 + cfg.fro_jitter * u)
        })
    };
    let p = draw(obs.rows());
    let q = draw(obs.cols());
    (p, q)
}

/// Alternates the `q`- and `p`-updates for `cfg.max_iter` rounds and returns
/// `PQᵀ`.
///
/// The initial factors are constant up to a seeded relative perturbation of
/// size `cfg.fro_jitter` (a perfectly constant start stays rank one). Stops
/// early when `tol > 0` and the relative objective change falls below it.
/// `use_hinge = false` is ordinary alternating least squares.
pub fn solve_fro(obs: &ObservedEntries, cfg: &SolverConfig, use_hinge: bool) -> Result<SolveResult> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    if use_hinge {
        obs.require_spec()?;
    }
    let lambda = cfg.lambda1;
    let layout = Layout::new(obs, use_hinge);
    let (mut p, mut q) = initial_factors(obs, cfg);
    let mut trace = vec![objective(obs, &p, &q, lambda, use_hinge)];
    let mut converged = cfg.tol == 0.0;
    let mut iterations = 0;

    let partial = |p: &DMatrix<f64>, q: &DMatrix<f64>, trace: &Vec<f64>, t: usize| SolveResult {
        estimate: DenseMatrix::from_nalgebra(p * q.transpose()),
        objective_trace: trace.clone(),
        residual_trace: Vec::new(),
        iterations_used: t,
        converged: false,
        best_iterate_index: trace.len() - 1,
    };

    for t in 1..=cfg.max_iter {
        iterations = t;
        let q_prev = q.clone();
        let p_prev = p.clone();
        if let Err(e) = ridge_half_step(&layout.by_col, &mut q, &p_prev, &q_prev, &p_prev, lambda, "column") {
            return Err(aborted(partial(&p, &q_prev, &trace, t - 1), e));
        }
        let q_sum = match cfg.fro_update {
            FroUpdate::Consistent => &q,
            FroUpdate::Literal => &q_prev,
        };
        if let Err(e) = ridge_half_step(&layout.by_row, &mut p, q_sum, &p_prev, &q, lambda, "row") {
            return Err(aborted(partial(&p_prev, &q, &trace, t - 1), e));
        }
        let value = objective(obs, &p, &q, lambda, use_hinge);
        let last = *trace.last().expect("initial objective recorded");
        trace.push(value);
        if !value.is_finite() {
            let e = Error::InvalidArgument(format!("objective diverged at iteration {t}"));
            return Err(aborted(partial(&p, &q, &trace, t), e));
        }
        if cfg.tol > 0.0 && (last - value).abs() <= cfg.tol * last.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    Ok(SolveResult {
        estimate: DenseMatrix::from_nalgebra(&p * q.transpose()),
        best_iterate_index: trace.len() - 1,
        objective_trace: trace,
        residual_trace: Vec::new(),
        iterations_used: iterations,
        converged,
    })
}
