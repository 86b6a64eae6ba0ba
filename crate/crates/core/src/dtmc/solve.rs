use super::TransitionMatrix;
use crate::{Error, Real, Result};

/// Chains up to this order are solved directly.
pub const DIRECT_SOLVE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState<F> {
    pub pi: Vec<F>,
    /// `max |pi P - pi|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<F> {
    pub direct_tol: F,
    pub iterative_tol: F,
    pub max_iterations: usize,
    pub direct_limit: usize,
}

impl<F: Real> Default for SolverOptions<F> {
    fn default() -> Self {
        // below f64 precision the defaults fall back to a few ulps of F
        let floor = F::epsilon().as_f64() * 64.0;
        Self {
            direct_tol: F::of(1e-12f64.max(floor)),
            iterative_tol: F::of(1e-10f64.max(floor)),
            max_iterations: 200_000,
            direct_limit: DIRECT_SOLVE_LIMIT,
        }
    }
}

/// Stationary distribution with residual at most `tol`, whichever solver
/// path is taken.
pub fn steady_state<F: Real>(matrix: &TransitionMatrix<F>, tol: F) -> Result<SteadyState<F>> {
    let opts = SolverOptions {
        direct_tol: tol,
        iterative_tol: tol,
        ..SolverOptions::default()
    };
    steady_state_with(matrix, &opts)
}

/// Direct solve for small chains (state reduction, else elimination), lazy power
/// iteration `pi <- (pi + pi P) / 2` otherwise. The lazy step shares the
/// stationary vector of `P` and converges for periodic chains too.
pub fn steady_state_with<F: Real>(
    matrix: &TransitionMatrix<F>,
    opts: &SolverOptions<F>,
) -> Result<SteadyState<F>> {
    let n = matrix.order();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: 0,
        });
    }
    if n <= opts.direct_limit {
        let pi = match reduce(matrix) {
            Some(pi) => pi,
            None => direct(matrix)?,
        };
        // a couple of lazy sweeps clean up rounding left by elimination
        let polished = iterate(matrix, pi, opts.direct_tol, 64);
        match polished {
            Ok(ss) => Ok(ss),
            Err(Error::NonConvergence { residual, .. }) => Err(Error::NonConvergence {
                iterations: 0,
                residual,
            }),
            Err(e) => Err(e),
        }
    } else {
        let start = vec![F::one() / F::of(n as f64); n];
        iterate(matrix, start, opts.iterative_tol, opts.max_iterations)
    }
}

fn residual<F: Real>(matrix: &TransitionMatrix<F>, pi: &[F]) -> (Vec<F>, f64) {
    let next = matrix.left_mul(pi);
    let r = next
        .iter()
        .zip(pi)
        .map(|(a, b)| (*a - *b).abs().as_f64())
        .fold(0.0, f64::max);
    (next, r)
}

fn normalize<F: Real>(pi: &mut [F]) {
    for x in pi.iter_mut() {
        if *x < F::zero() {
            *x = F::zero();
        }
    }
    let s: F = pi.iter().copied().sum();
    for x in pi.iter_mut() {
        *x = *x / s;
    }
}

fn iterate<F: Real>(
    matrix: &TransitionMatrix<F>,
    mut pi: Vec<F>,
    tol: F,
    max_iterations: usize,
) -> Result<SteadyState<F>> {
    let half = F::of(0.5);
    let tol = tol.as_f64();
    let (mut next, mut r) = residual(matrix, &pi);
    let mut it = 0;
    while r > tol {
        if it == max_iterations {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: r,
            });
        }
        for (p, q) in pi.iter_mut().zip(&next) {
            *p = half * (*p + *q);
        }
        normalize(&mut pi);
        (next, r) = residual(matrix, &pi);
        it += 1;
    }
    Ok(SteadyState { pi, residual: r })
}

/// State reduction (Grassmann, Taksar and Heyman). Uses off-diagonal
/// entries only, so diagonals that round to one do not matter. `None` when
/// some censored state cannot reach any lower-numbered state.
fn reduce<F: Real>(matrix: &TransitionMatrix<F>) -> Option<Vec<F>> {
    let n = matrix.order();
    let mut a = matrix.entries().to_vec();
    for k in (1..n).rev() {
        let s: F = a[k * n..k * n + k].iter().copied().sum();
        if s <= F::zero() {
            return None;
        }
        for i in 0..k {
            a[i * n + k] = a[i * n + k] / s;
        }
        for i in 0..k {
            let f = a[i * n + k];
            if f == F::zero() {
                continue;
            }
            for j in 0..k {
                a[i * n + j] = a[i * n + j] + f * a[k * n + j];
            }
        }
    }
    let mut pi = vec![F::zero(); n];
    pi[0] = F::one();
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[i * n + k]).sum();
    }
    if pi.iter().any(|v| !v.is_finite()) {
        return None;
    }
    normalize(&mut pi);
    Some(pi)
}

/// Gaussian elimination with partial pivoting on `(P^T - I)` with the last
/// balance equation replaced by the normalization row.
fn direct<F: Real>(matrix: &TransitionMatrix<F>) -> Result<Vec<F>> {
    let n = matrix.order();
    let mut a = vec![F::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            // row i of the system is column i of P
            a[i * n + j] = matrix.get(j, i) - if i == j { F::one() } else { F::zero() };
        }
    }
    for j in 0..n {
        a[(n - 1) * n + j] = F::one();
    }
    let mut rhs = vec![F::zero(); n];
    rhs[n - 1] = F::one();

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| {
                a[x * n + col]
                    .abs()
                    .partial_cmp(&a[y * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        // tiny pivots are legitimate for slowly draining chains; a bad
        // solution is caught by the sign and residual checks instead
        if a[pivot * n + col] == F::zero() {
            return Err(Error::NonConvergence {
                iterations: 0,
                residual: f64::INFINITY,
            });
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            rhs.swap(col, pivot);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f == F::zero() {
                continue;
            }
            for j in col..n {
                a[row * n + j] = a[row * n + j] - f * a[col * n + j];
            }
            rhs[row] = rhs[row] - f * rhs[col];
        }
    }
    let mut x = vec![F::zero(); n];
    for row in (0..n).rev() {
        let s: F = (row + 1..n).map(|j| a[row * n + j] * x[j]).sum();
        x[row] = (rhs[row] - s) / a[row * n + row];
    }
    let negative = x.iter().any(|v| v.as_f64() < -1e-8);
    if negative || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: f64::INFINITY,
        });
    }
    normalize(&mut x);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtmc::{per_relay_matrix, MatrixMode};
    use crate::SystemParams;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[Vec<f64>]) -> TransitionMatrix<f64> {
        TransitionMatrix::from_rows(rows, MatrixMode::PerRelay).unwrap()
    }

    #[test]
    fn small_chains() {
        let swap = steady_state(&m(&[vec![0.0, 1.0], vec![1.0, 0.0]]), 1e-12).unwrap();
        assert_abs_diff_eq!(swap.pi[0], 0.5, epsilon = 1e-12);
        let flat = steady_state(&m(&[vec![0.5, 0.5], vec![0.5, 0.5]]), 1e-12).unwrap();
        assert_abs_diff_eq!(flat.pi[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn iterative_path_on_periodic_chain() {
        let opts = SolverOptions {
            direct_limit: 0,
            ..SolverOptions::<f64>::default()
        };
        let ss = steady_state_with(&m(&[vec![0.0, 1.0], vec![1.0, 0.0]]), &opts).unwrap();
        assert_abs_diff_eq!(ss.pi[0], 0.5, epsilon = 1e-10);
        let three = m(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ]);
        let ss = steady_state_with(&three, &opts).unwrap();
        for p in ss.pi {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn reducible_chain_is_reported() {
        // two closed classes: no unique stationary vector
        let id = m(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            steady_state(&id, 1e-12),
            Err(Error::NonConvergence { .. })
        ));
        let opts = SolverOptions {
            direct_limit: 0,
            max_iterations: 10,
            ..SolverOptions::<f64>::default()
        };
        let slow = m(&[vec![1.0 - 1e-9, 1e-9], vec![1e-9, 1.0 - 1e-9]]);
        let biased = TransitionMatrix::from_rows(
            &[vec![1.0 - 1e-9, 1e-9], vec![2e-9, 1.0 - 2e-9]],
            MatrixMode::PerRelay,
        )
        .unwrap();
        assert!(steady_state_with(&slow, &opts).is_ok()); // uniform start is already stationary
        assert!(matches!(
            steady_state_with(&biased, &opts),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn single_relay_example() {
        let p = SystemParams::<f64>::builder()
            .relays(1)
            .levels(1)
            .source_power(10.0)
            .build()
            .unwrap();
        let ss = steady_state(&per_relay_matrix(0, &p).unwrap(), 1e-12).unwrap();
        for (x, y) in ss.pi.iter().zip([0.45234285, 0.3348412, 0.21281595]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-7);
        }
        assert!(ss.residual <= 1e-12);
    }

    #[test]
    fn elimination_covers_closed_class_at_the_end() {
        // state 0 is transient, so reduction cannot start from it
        let ss = steady_state(&m(&[vec![0.0, 1.0], vec![0.0, 1.0]]), 1e-12).unwrap();
        assert_eq!(ss.pi, vec![0.0, 1.0]);
        assert!(reduce(&m(&[vec![0.0, 1.0], vec![0.0, 1.0]])).is_none());
        let p = SystemParams::<f64>::builder()
            .relays(1)
            .levels(3)
            .source_power(10.0)
            .build()
            .unwrap();
        let chain = per_relay_matrix(0, &p).unwrap();
        let (a, b) = (reduce(&chain).unwrap(), direct(&chain).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-13);
        }
    }

    #[test]
    fn slowly_draining_chain() {
        // absorbing at 0 with exit rates far below f64 resolution of 1
        let slow = m(&[
            vec![1.0, 0.0, 0.0],
            vec![2.86e-20, 1.0 - 2.86e-20, 0.0],
            vec![9.36e-14, 2.86e-20, 1.0 - 9.36e-14],
        ]);
        let ss = steady_state(&slow, 1e-12).unwrap();
        assert_eq!(ss.pi, vec![1.0, 0.0, 0.0]);
        // the two-relay version has rows whose diagonals round to one
        let p = SystemParams::<f64>::builder()
            .relays(2)
            .levels(1)
            .kappa(0.0)
            .snr_db(0.0)
            .rate(2.0)
            .build()
            .unwrap();
        let joint = crate::dtmc::joint_matrix_product_form(&p, 4096).unwrap();
        let ss = steady_state(&joint, 1e-12).unwrap();
        assert_eq!(ss.pi[0], 1.0);
    }

    #[test]
    fn single_precision_solve() {
        let p = SystemParams::<f32>::builder()
            .relays(1)
            .levels(3)
            .source_power(10.0)
            .build()
            .unwrap();
        let m = per_relay_matrix(0, &p).unwrap();
        let ss = steady_state_with(&m, &SolverOptions::default()).unwrap();
        let sum: f32 = ss.pi.iter().sum();
        assert!((sum - 1.0).abs() < 1e-5);
    }
}
