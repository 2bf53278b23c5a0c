//! Dense two-phase simplex for small equality-form linear programs:
//! maximize `c·x` subject to `A x = b`, `x ≥ 0`. Bland's rule avoids cycling.

const EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `m` constraint rows followed by the objective row; last column is the rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.cols]
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let inv = 1.0 / self.rows[p][q];
        for v in &mut self.rows[p] {
            *v *= inv;
        }
        let pivot_row = self.rows[p].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == p {
                continue;
            }
            let f = row[q];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[p] = q;
    }

    /// Runs simplex iterations on the objective row; `allowed` bounds entering columns.
    fn optimize(&mut self, allowed: usize) -> bool {
        let m = self.basis.len();
        loop {
            let obj = &self.rows[m];
            let Some(q) = (0..allowed).find(|&j| obj[j] < -EPS) else {
                return true;
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..m {
                let a = self.rows[i][q];
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match best {
                        None => true,
                        Some((r, _, b)) => ratio < r - EPS || (ratio <= r + EPS && self.basis[i] < b),
                    };
                    if better {
                        best = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            match best {
                None => return false,
                Some((_, p, _)) => self.pivot(p, q),
            }
        }
    }
}

pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let n = c.len();
    let m = b.len();
    assert_eq!(a.len(), m);
    let cols = n + m;
    let mut rows = Vec::with_capacity(m + 1);
    for i in 0..m {
        assert_eq!(a[i].len(), n);
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; cols + 1];
        for j in 0..n {
            row[j] = sign * a[i][j];
        }
        row[n + i] = 1.0;
        row[cols] = sign * b[i];
        rows.push(row);
    }
    // phase one: maximize −Σ artificials
    let mut obj = vec![0.0; cols + 1];
    for row in &rows {
        for j in 0..n {
            obj[j] -= row[j];
        }
        obj[cols] -= row[cols];
    }
    rows.push(obj);
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
        cols,
    };
    t.optimize(cols);
    let scale = 1.0 + b.iter().map(|v| v.abs()).sum::<f64>();
    if t.rows[m][cols] < -1e-9 * scale {
        return LpOutcome::Infeasible;
    }
    for i in 0..m {
        if t.basis[i] >= n {
            if let Some(q) = (0..n).find(|&j| t.rows[i][j].abs() > EPS) {
                t.pivot(i, q);
            }
        }
    }

    // phase two
    let mut obj = vec![0.0; cols + 1];
    for j in 0..n {
        obj[j] = -c[j];
    }
    for i in 0..m {
        let cb = if t.basis[i] < n { c[t.basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for (o, v) in obj.iter_mut().zip(&t.rows[i]) {
                *o += cb * v;
            }
        }
    }
    t.rows[m] = obj;
    if !t.optimize(n) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for i in 0..m {
        if t.basis[i] < n {
            x[t.basis[i]] = t.rhs(i);
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(o: LpOutcome) -> f64 {
        match o {
            LpOutcome::Optimal { value, .. } => value,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → 36 at (2, 6)
        let a = vec![
            vec![1.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0, 1.0, 0.0],
            vec![3.0, 2.0, 0.0, 0.0, 1.0],
        ];
        let out = maximize(&[3.0, 5.0, 0.0, 0.0, 0.0], &a, &[4.0, 12.0, 18.0]);
        let LpOutcome::Optimal { x, value } = out else { panic!() };
        assert!((value - 36.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x + y = −1 with x, y ≥ 0
        assert_eq!(maximize(&[1.0, 1.0], &[vec![1.0, 1.0]], &[-1.0]), LpOutcome::Infeasible);
        // x − y = 0, maximize x
        assert_eq!(maximize(&[1.0, 0.0], &[vec![1.0, -1.0]], &[0.0]), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_and_negative_rows() {
        // x + y = 2 twice, −x = −0.5; max y → 1.5
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![-1.0, 0.0]];
        assert!((value(maximize(&[0.0, 1.0], &a, &[2.0, 2.0, -0.5])) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // classic cycling example under Dantzig's rule (Beale)
        let a = vec![
            vec![0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0],
            vec![0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ];
        let c = [0.75, -150.0, 0.02, -6.0, 0.0, 0.0, 0.0];
        assert!((value(maximize(&c, &a, &[0.0, 0.0, 1.0])) - 0.05).abs() < 1e-9);
    }
}
