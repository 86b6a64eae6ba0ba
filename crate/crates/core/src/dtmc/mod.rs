//! Markov-chain analysis of the quantized relay batteries.
//!
//! A relay's battery moves between `L + 2` levels; the joint state of `N`
//! relays lives in a space of `(L + 2)^N` states indexed in mixed radix with
//! relay 0 as the most significant digit. Three matrix constructions are
//! available:
//!
//! | mode           | what it is                                                 |
//! |----------------|------------------------------------------------------------|
//! | `per-relay`    | closed-form single-relay chain                             |
//! | `product-form` | Kronecker product of the per-relay chains                  |
//! | `mc-joint`     | exact BARS slot dynamics, rows estimated by sampling       |
//!
//! The product form lets every relay in forwarding condition discharge, so it
//! over-counts discharges whenever more than one relay could forward. The
//! `mc-joint` matrix follows the real policy and is the reference for `N > 1`.

mod joint;
mod per_relay;
mod solve;

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

pub use joint::{
    joint_matrix_mc, joint_matrix_product_form, joint_state_count, JointState, DEFAULT_STATE_CAP,
};
pub use per_relay::{per_relay_matrix, printed_per_relay_rows};
pub use solve::{steady_state, steady_state_with, SolverOptions, SteadyState, DIRECT_SOLVE_LIMIT};

use crate::model::{charging, SystemParams};
use crate::{Error, Real, Result};

/// Row sums must be within this of one.
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixMode {
    PerRelay,
    ProductForm,
    McJoint,
}

impl MatrixMode {
    pub fn tag(self) -> &'static str {
        match self {
            MatrixMode::PerRelay => "per-relay",
            MatrixMode::ProductForm => "product-form",
            MatrixMode::McJoint => "mc-joint",
        }
    }
}

impl fmt::Display for MatrixMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for MatrixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-relay" => Ok(MatrixMode::PerRelay),
            "product-form" => Ok(MatrixMode::ProductForm),
            "mc-joint" => Ok(MatrixMode::McJoint),
            other => Err(Error::InvalidParameter {
                name: "mode",
                reason: format!("unknown matrix mode `{other}`"),
            }),
        }
    }
}

/// Dense row-stochastic matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<F> {
    order: usize,
    entries: Vec<F>,
    mode: MatrixMode,
}

impl<F: Real> TransitionMatrix<F> {
    /// Checks shape, non-negativity and row sums.
    pub fn new(order: usize, entries: Vec<F>, mode: MatrixMode) -> Result<Self> {
        if entries.len() != order * order {
            return Err(Error::DimensionMismatch {
                expected: order * order,
                actual: entries.len(),
            });
        }
        let m = Self {
            order,
            entries,
            mode,
        };
        m.check_stochastic()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<F>], mode: MatrixMode) -> Result<Self> {
        let order = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != order) {
            return Err(Error::DimensionMismatch {
                expected: order,
                actual: bad.len(),
            });
        }
        Self::new(order, rows.concat(), mode)
    }

    fn check_stochastic(&self) -> Result<()> {
        for (i, row) in self.rows().enumerate() {
            if let Some(x) = row
                .iter()
                .find(|x| !(**x >= F::zero() && **x <= F::one() + F::of(ROW_SUM_TOL)))
            {
                return Err(Error::NotStochastic(format!("row {i} has entry {x}")));
            }
            let sum: F = row.iter().copied().sum();
            if (sum - F::one()).abs().as_f64() > ROW_SUM_TOL {
                return Err(Error::NotStochastic(format!("row {i} sums to {sum}")));
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mode(&self) -> MatrixMode {
        self.mode
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> F {
        self.entries[from * self.order + to]
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.entries.chunks(self.order.max(1))
    }

    pub fn entries(&self) -> &[F] {
        &self.entries
    }

    /// Largest deviation of any row sum from one.
    pub fn max_row_error(&self) -> f64 {
        self.rows()
            .map(|r| (r.iter().copied().sum::<F>() - F::one()).abs().as_f64())
            .fold(0.0, f64::max)
    }

    /// `x P` for a row vector `x`.
    pub fn left_mul(&self, x: &[F]) -> Vec<F> {
        let mut y = vec![F::zero(); self.order];
        for (xi, row) in x.iter().zip(self.rows()) {
            if *xi == F::zero() {
                continue;
            }
            for (yj, &p) in y.iter_mut().zip(row) {
                *yj = *yj + *xi * p;
            }
        }
        y
    }

    /// Writes `order=<n> mode=<tag>` then one space-separated row per line.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "order={} mode={}", self.order, self.mode)?;
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Reads the format written by [`dump`](Self::dump).
    pub fn read_dump<R: BufRead>(input: R) -> Result<Self> {
        let bad = |what: String| Error::InvalidParameter {
            name: "matrix dump",
            reason: what,
        };
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty input".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let mut order = None;
        let mut mode = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("order", v)) => {
                    order = Some(v.parse::<usize>().map_err(|e| bad(format!("order: {e}")))?)
                }
                Some(("mode", v)) => mode = Some(v.parse::<MatrixMode>()?),
                _ => return Err(bad(format!("unexpected header field `{field}`"))),
            }
        }
        let order = order.ok_or_else(|| bad("header lacks order".into()))?;
        let mode = mode.ok_or_else(|| bad("header lacks mode".into()))?;
        let mut entries = Vec::with_capacity(order * order);
        for line in lines {
            let line = line.map_err(|e| bad(e.to_string()))?;
            for tok in line.split(' ').filter(|t| !t.is_empty()) {
                let x: f64 = tok.parse().map_err(|e| bad(format!("`{tok}`: {e}")))?;
                entries.push(F::of(x));
            }
        }
        Self::new(order, entries, mode)
    }
}

/// Outage probability `sum_j pi_j * prod_i Pr[A_c(V_i)]` over joint states.
pub fn outage_probability<F: Real>(pi: &SteadyState<F>, params: &SystemParams<F>) -> Result<F> {
    let states = joint_state_count(params, usize::MAX)?;
    if pi.pi.len() != states {
        return Err(Error::DimensionMismatch {
            expected: states,
            actual: pi.pi.len(),
        });
    }
    let radix = params.states_per_relay();
    let n = params.n_relays();
    let table: Vec<Vec<F>> = (0..n)
        .map(|i| (0..radix).map(|m| charging(m, i, params)).collect())
        .collect();
    let mut total = F::zero();
    let mut digits = vec![0usize; n];
    for &p in &pi.pi {
        let cond = digits
            .iter()
            .enumerate()
            .fold(F::one(), |acc, (i, &m)| acc * table[i][m]);
        total = total + p * cond;
        // increment the mixed-radix counter, last relay fastest
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < radix {
                break;
            }
            *d = 0;
        }
    }
    Ok(total)
}

/// Outage probability under independent per-relay chains: each relay's chain
/// is solved on its own and the per-relay charging probabilities multiply.
pub fn marginal_product_outage<F: Real>(params: &SystemParams<F>) -> Result<F> {
    let mut product = F::one();
    for i in 0..params.n_relays() {
        let matrix = per_relay_matrix(i, params)?;
        let ss = steady_state(&matrix, SolverOptions::<F>::default().direct_tol)?;
        let p: F = ss
            .pi
            .iter()
            .enumerate()
            .map(|(m, &w)| w * charging(m, i, params))
            .sum();
        product = product * p;
    }
    Ok(product)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example(n: usize) -> SystemParams<f64> {
        SystemParams::builder()
            .relays(n)
            .levels(1)
            .source_power(10.0)
            .build()
            .unwrap()
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(TransitionMatrix::<f64>::from_rows(
            &[vec![0.5, 0.4], vec![0.5, 0.5]],
            MatrixMode::PerRelay
        )
        .is_err());
        assert!(TransitionMatrix::<f64>::from_rows(
            &[vec![1.5, -0.5], vec![0.5, 0.5]],
            MatrixMode::PerRelay
        )
        .is_err());
        assert!(TransitionMatrix::<f64>::new(2, vec![1.0; 3], MatrixMode::PerRelay).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let m = per_relay_matrix(0, &example(1)).unwrap();
        let mut buf = Vec::new();
        m.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("order=3 mode=per-relay\n"));
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().skip(1).all(|l| l.split(' ').count() == 3));
        let back = TransitionMatrix::<f64>::read_dump(&buf[..]).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn outage_on_point_masses() {
        let p = example(2);
        let states = 9;
        let mut pi = vec![0.0; states];
        pi[0] = 1.0;
        let empty = SteadyState {
            pi: pi.clone(),
            residual: 0.0,
        };
        assert_eq!(outage_probability(&empty, &p).unwrap(), 1.0);

        let t0 = p.to_builder().rate(0.0).build().unwrap();
        let mut full = vec![0.0; states];
        full[states - 1] = 1.0;
        let full = SteadyState {
            pi: full,
            residual: 0.0,
        };
        assert_eq!(outage_probability(&full, &t0).unwrap(), 0.0);

        let short = SteadyState {
            pi: vec![0.5, 0.5],
            residual: 0.0,
        };
        assert!(matches!(
            outage_probability(&short, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_relay_outage() {
        let p = example(1);
        let ss = steady_state(&per_relay_matrix(0, &p).unwrap(), 1e-12).unwrap();
        let exact = outage_probability(&ss, &p).unwrap();
        assert_abs_diff_eq!(exact, 0.7470678574, epsilon = 1e-9);
        assert_abs_diff_eq!(marginal_product_outage(&p).unwrap(), exact, epsilon = 1e-12);
        let squared = marginal_product_outage(&example(2)).unwrap();
        assert_abs_diff_eq!(squared, exact * exact, epsilon = 1e-12);
    }
}
