//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `min cᵀx  s.t.  Ax = b, x ≥ 0`.

use crate::error::{Error, Result};

pub const PIVOT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

/// `a` is row-major with `b.len()` rows of `c.len()` columns.
pub fn solve(a: &[f64], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let rows = b.len();
    let cols = c.len();
    assert_eq!(a.len(), rows * cols, "constraint matrix has the wrong shape");
    let mut t = Tableau::new(a, b, cols);

    // Phase 1: minimize the sum of artificials.
    let phase1: Vec<f64> = (0..cols + rows).map(|j| if j < cols { 0.0 } else { 1.0 }).collect();
    t.set_objective(&phase1);
    t.optimize(cols + rows)?;
    let infeasibility = -t.objective_value();
    let scale = 1.0 + b.iter().map(|x| x.abs()).sum::<f64>();
    if infeasibility > PIVOT_TOLERANCE * scale {
        return Err(Error::Infeasible);
    }
    t.drive_out_artificials(cols);

    // Phase 2 over the original columns only.
    let mut phase2 = c.to_vec();
    phase2.extend(std::iter::repeat_n(0.0, rows));
    t.set_objective(&phase2);
    t.optimize(cols)?;

    let mut x = vec![0.0; cols];
    for (i, &bj) in t.basis.iter().enumerate() {
        if bj < cols {
            x[bj] = t.rhs(i).max(0.0);
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution {
        x,
        value,
        pivots: t.pivots,
    })
}

struct Tableau {
    rows: usize,
    /// Original plus artificial columns, excluding the right-hand side.
    width: usize,
    /// `rows + 1` rows of `width + 1` entries; the last row holds reduced costs.
    data: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn new(a: &[f64], b: &[f64], cols: usize) -> Self {
        let rows = b.len();
        let width = cols + rows;
        let stride = width + 1;
        let mut data = vec![0.0; (rows + 1) * stride];
        for i in 0..rows {
            let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
            let row = &mut data[i * stride..(i + 1) * stride];
            for j in 0..cols {
                row[j] = sign * a[i * cols + j];
            }
            row[cols + i] = 1.0;
            row[width] = sign * b[i];
        }
        Self {
            rows,
            width,
            data,
            basis: (cols..cols + rows).collect(),
            pivots: 0,
        }
    }

    fn stride(&self) -> usize {
        self.width + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.stride() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width)
    }

    /// Minus the current objective value.
    fn objective_value(&self) -> f64 {
        self.at(self.rows, self.width)
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let stride = self.stride();
        let obj = self.rows * stride;
        self.data[obj..obj + self.width].copy_from_slice(&cost[..self.width]);
        self.data[obj + self.width] = 0.0;
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..=self.width {
                    self.data[obj + j] -= cb * self.data[i * stride + j];
                }
            }
        }
    }

    /// Runs Bland's rule with entering columns restricted to `0..allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        loop {
            let Some(enter) = (0..allowed).find(|&j| self.at(self.rows, j) < -PIVOT_TOLERANCE) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let coef = self.at(i, enter);
                if coef > PIVOT_TOLERANCE {
                    let ratio = self.rhs(i) / coef;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, enter);
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let stride = self.stride();
        let p = self.data[row * stride + col];
        for j in 0..stride {
            self.data[row * stride + j] /= p;
        }
        let pivot_row: Vec<f64> = self.data[row * stride..(row + 1) * stride].to_vec();
        for i in 0..=self.rows {
            if i == row {
                continue;
            }
            let factor = self.data[i * stride + col];
            if factor != 0.0 {
                let r = &mut self.data[i * stride..(i + 1) * stride];
                for (x, &pv) in r.iter_mut().zip(&pivot_row) {
                    *x -= factor * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Replaces basic artificials (at value zero) by original columns where possible.
    fn drive_out_artificials(&mut self, cols: usize) {
        for i in 0..self.rows {
            if self.basis[i] >= cols {
                if let Some(j) = (0..cols).find(|&j| self.at(i, j).abs() > PIVOT_TOLERANCE) {
                    self.pivot(i, j);
                }
            }
        }
    }
}
