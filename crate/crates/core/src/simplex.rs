//! Dense bounded-variable primal simplex with Bland's rule.
//!
//! Solves `min cᵀx` subject to `A x ≤ b` and `l ≤ x ≤ u`, starting from the
//! vertex where every structural variable sits at its lower bound and the
//! slacks are basic. That start must be feasible (`b − A l ≥ 0`); the
//! feasibility LP built on top of this always satisfies it.

use crate::error::{Error, Result};

pub const DEFAULT_MAX_PIVOTS: usize = 10_000;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const START_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Constraint rows, each of length `objective.len()`, read as `row · x ≤ rhs`.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    /// Upper bounds; `f64::INFINITY` means unbounded above.
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
}

impl LinearProgram {
    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::DimensionMismatch("bounds length differs from objective".into()));
        }
        if self.rhs.len() != self.rows.len() || self.rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("constraint rows malformed".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !l.is_finite() || u < l) {
            return Err(Error::InvalidOptions("bounds must be finite below and ordered".into()));
        }
        Ok(())
    }

    pub fn solve(&self, max_pivots: usize) -> Result<LpSolution> {
        self.validate()?;
        let n = self.objective.len();
        let m = self.rows.len();
        let width = n + m;

        let mut cost = self.objective.clone();
        cost.extend(std::iter::repeat_n(0.0, m));
        let mut lower = self.lower.clone();
        lower.extend(std::iter::repeat_n(0.0, m));
        let mut upper = self.upper.clone();
        upper.extend(std::iter::repeat_n(f64::INFINITY, m));

        let mut tab = vec![vec![0.0; width]; m];
        let mut beta = vec![0.0; m];
        for i in 0..m {
            tab[i][..n].copy_from_slice(&self.rows[i]);
            tab[i][n + i] = 1.0;
            let used: f64 = self.rows[i].iter().zip(&self.lower).map(|(a, l)| a * l).sum();
            beta[i] = self.rhs[i] - used;
            if beta[i] < -START_TOL {
                return Err(Error::InfeasibleStart);
            }
            beta[i] = beta[i].max(0.0);
        }
        let mut basis: Vec<usize> = (n..width).collect();
        let mut state = vec![State::AtLower; width];
        for s in state.iter_mut().skip(n) {
            *s = State::Basic;
        }

        let mut pivots = 0;
        loop {
            // Bland: first eligible column by index.
            let mut entering = None;
            for j in 0..width {
                if state[j] == State::Basic {
                    continue;
                }
                let reduced = cost[j] - (0..m).map(|i| cost[basis[i]] * tab[i][j]).sum::<f64>();
                let eligible = match state[j] {
                    State::AtLower => reduced < -COST_TOL && upper[j] > lower[j],
                    State::AtUpper => reduced > COST_TOL,
                    State::Basic => false,
                };
                if eligible {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { break };
            let dir = if state[j] == State::AtLower { 1.0 } else { -1.0 };

            let mut theta = upper[j] - lower[j];
            let mut leaving: Option<(usize, State)> = None;
            for i in 0..m {
                let alpha = tab[i][j] * dir;
                let b = basis[i];
                let (limit, bound) = if alpha > PIVOT_TOL {
                    ((beta[i] - lower[b]) / alpha, State::AtLower)
                } else if alpha < -PIVOT_TOL && upper[b].is_finite() {
                    ((upper[b] - beta[i]) / -alpha, State::AtUpper)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = match leaving {
                    None => limit < theta,
                    Some((r, _)) => limit < theta || (limit == theta && b < basis[r]),
                };
                if better {
                    theta = limit;
                    leaving = Some((i, bound));
                }
            }
            if !theta.is_finite() {
                return Err(Error::UnboundedLp);
            }

            for i in 0..m {
                beta[i] -= theta * dir * tab[i][j];
            }
            match leaving {
                None => {
                    state[j] = if state[j] == State::AtLower { State::AtUpper } else { State::AtLower };
                }
                Some((r, bound)) => {
                    pivots += 1;
                    if pivots > max_pivots {
                        return Err(Error::SimplexIterationLimit(max_pivots));
                    }
                    let start = if state[j] == State::AtLower { lower[j] } else { upper[j] };
                    let out = basis[r];
                    state[out] = bound;
                    state[j] = State::Basic;
                    basis[r] = j;
                    beta[r] = start + dir * theta;

                    let p = tab[r][j];
                    for v in tab[r].iter_mut() {
                        *v /= p;
                    }
                    let pivot_row = tab[r].clone();
                    for (i, row) in tab.iter_mut().enumerate() {
                        if i == r {
                            continue;
                        }
                        let f = row[j];
                        if f != 0.0 {
                            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                                *v -= f * pv;
                            }
                        }
                    }
                }
            }
        }

        let mut full = vec![0.0; width];
        for j in 0..width {
            full[j] = match state[j] {
                State::AtLower => lower[j],
                State::AtUpper => upper[j],
                State::Basic => 0.0,
            };
        }
        for (i, &b) in basis.iter().enumerate() {
            full[b] = beta[i];
        }
        full.truncate(n);
        let objective = full.iter().zip(&self.objective).map(|(x, c)| x * c).sum();
        Ok(LpSolution {
            x: full,
            objective,
            pivots,
        })
    }
}
