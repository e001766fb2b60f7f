//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Factorization is left-looking (Gilbert–Peierls): columns are processed in
//! ascending nonzero count and each is solved against the partial `L` with a
//! depth-first reach, so work is proportional to the nonzeros touched. Pivots
//! are chosen by threshold partial pivoting, preferring sparse rows.

/// Compressed sparse columns of `[A | I]`.
#[derive(Debug, Clone)]
pub(crate) struct Csc {
    pub start: Vec<usize>,
    pub row: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csc {
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.start[j]..self.start[j + 1];
        (&self.row[r.clone()], &self.val[r])
    }
}

const NONE: usize = usize::MAX;
const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Default, Clone)]
struct Sparse {
    start: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Sparse {
    fn with_capacity(n: usize) -> Self {
        let mut s = Sparse::default();
        s.start.reserve(n + 1);
        s.start.push(0);
        s
    }

    fn push(&mut self, i: usize, v: f64) {
        self.idx.push(i);
        self.val.push(v);
    }

    fn close(&mut self) {
        self.start.push(self.idx.len());
    }

    #[inline]
    fn get(&self, k: usize) -> (&[usize], &[f64]) {
        let r = self.start[k]..self.start[k + 1];
        (&self.idx[r.clone()], &self.val[r])
    }

    #[inline]
    fn is_empty_at(&self, k: usize) -> bool {
        self.start[k] == self.start[k + 1]
    }
}

/// One product-form update: basis position `r` replaced, `alpha = B⁻¹ a_q`.
#[derive(Debug, Clone)]
struct Eta {
    r: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

/// `P B Q = L U` plus an eta file.
///
/// Basis positions coincide with pivot rows: after factorization the column
/// pivoted on row `i` sits at position `i`, so both solves work in place on
/// a single index space.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    /// step → pivot row (= basis position)
    prow: Vec<usize>,
    /// L columns by step; indices are rows.
    l: Sparse,
    /// U columns by step; indices are pivot rows of earlier steps.
    u: Sparse,
    diag: Vec<f64>,
    /// row → step
    pinv: Vec<usize>,
    /// Steps with a nonempty L column, ascending.
    l_steps: Vec<usize>,
    /// Steps with a nonempty U column or a non-unit pivot, ascending.
    u_steps: Vec<usize>,
    etas: Vec<Eta>,
    mark: Vec<bool>,
    stack: Vec<(usize, usize)>,
    topo: Vec<usize>,
}

/// Result of a factorization.
pub(crate) struct Factorized {
    pub factor: Factor,
    /// New position → position the column held before (for a repaired slack,
    /// the position of the column it replaced).
    pub origin: Vec<usize>,
    /// `(old position, row)`: singular columns replaced by the slack of `row`.
    pub repairs: Vec<(usize, usize)>,
}

impl Factor {
    /// Factorizes the basis `basis[pos] = column of [A | I]`. Slack columns
    /// have index `n_struct + row`. On return `basis` is reordered so that
    /// positions equal pivot rows; singular columns are replaced by slacks
    /// of unpivoted rows.
    pub fn new(a: &Csc, n_struct: usize, basis: &mut [usize]) -> Factorized {
        let m = basis.len();
        let mut order: Vec<usize> = (0..m).collect();
        let nnz = |p: usize| a.start[basis[p] + 1] - a.start[basis[p]];
        order.sort_by_key(|&p| (nnz(p), p));

        let mut row_count = vec![0usize; m];
        for &j in basis.iter() {
            for &i in a.col(j).0 {
                row_count[i] += 1;
            }
        }

        let mut pinv = vec![NONE; m];
        let mut prow = Vec::with_capacity(m);
        let mut qcol = Vec::with_capacity(m);
        let mut l = Sparse::with_capacity(m);
        let mut u = Sparse::with_capacity(m);
        let mut diag = Vec::with_capacity(m);

        let mut x = vec![0.0; m];
        let mut mark = vec![0u32; m];
        let mut stamp = 0u32;
        let mut topo: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut deferred = Vec::new();

        for &p in &order {
            let (rows, vals) = a.col(basis[p]);
            stamp += 1;
            topo.clear();
            // Depth-first reach of the column's pattern through L.
            for &root in rows {
                if mark[root] == stamp {
                    continue;
                }
                mark[root] = stamp;
                stack.push((root, 0));
                while let Some(&mut (node, ref mut child)) = stack.last_mut() {
                    let s = pinv[node];
                    let children: &[usize] = if s == NONE { &[] } else { l.get(s).0 };
                    if *child < children.len() {
                        let next = children[*child];
                        *child += 1;
                        if mark[next] != stamp {
                            mark[next] = stamp;
                            stack.push((next, 0));
                        }
                    } else {
                        topo.push(node);
                        stack.pop();
                    }
                }
            }
            for (&i, &v) in rows.iter().zip(vals) {
                x[i] = v;
            }
            for &i in topo.iter().rev() {
                let s = pinv[i];
                if s == NONE || x[i] == 0.0 {
                    continue;
                }
                let xi = x[i];
                let (ls, lv) = l.get(s);
                for (&r, &lr) in ls.iter().zip(lv) {
                    x[r] -= lr * xi;
                }
            }

            let mut amax = 0.0f64;
            for &i in &topo {
                if pinv[i] == NONE {
                    amax = amax.max(x[i].abs());
                }
            }
            if amax <= SINGULAR_TOL {
                for &i in &topo {
                    x[i] = 0.0;
                }
                deferred.push(p);
                continue;
            }
            let mut piv = NONE;
            for &i in &topo {
                if pinv[i] != NONE || x[i].abs() < PIVOT_THRESHOLD * amax {
                    continue;
                }
                let better =
                    piv == NONE || row_count[i] < row_count[piv] || (row_count[i] == row_count[piv] && i < piv);
                if better {
                    piv = i;
                }
            }
            let k = prow.len();
            let pv = x[piv];
            let mut ucol: Vec<(usize, f64)> = Vec::new();
            for &i in &topo {
                let v = x[i];
                x[i] = 0.0;
                if v.abs() <= DROP_TOL || i == piv {
                    continue;
                }
                if pinv[i] != NONE {
                    ucol.push((pinv[i], v));
                } else {
                    l.push(i, v / pv);
                }
            }
            // Earlier steps first keeps the pull-style transposed solve cache friendly.
            ucol.sort_unstable_by_key(|e| e.0);
            for (s, v) in ucol {
                u.push(prow[s], v);
            }
            l.close();
            u.close();
            diag.push(pv);
            pinv[piv] = k;
            prow.push(piv);
            qcol.push(p);
        }

        let mut repairs = Vec::new();
        if !deferred.is_empty() {
            let free: Vec<usize> = (0..m).filter(|&i| pinv[i] == NONE).collect();
            for (p, r) in deferred.into_iter().zip(free) {
                basis[p] = n_struct + r;
                repairs.push((p, r));
                let k = prow.len();
                l.close();
                u.close();
                diag.push(1.0);
                pinv[r] = k;
                prow.push(r);
                qcol.push(p);
            }
        }

        let old = basis.to_vec();
        let mut origin = vec![NONE; m];
        for k in 0..m {
            basis[prow[k]] = old[qcol[k]];
            origin[prow[k]] = qcol[k];
        }
        let l_steps = (0..m).filter(|&k| !l.is_empty_at(k)).collect();
        let u_steps = (0..m).filter(|&k| !u.is_empty_at(k) || diag[k] != 1.0).collect();

        Factorized {
            factor: Factor {
                prow,
                l,
                u,
                diag,
                pinv,
                l_steps,
                u_steps,
                etas: Vec::new(),
                mark: vec![false; m],
                stack: Vec::new(),
                topo: Vec::new(),
            },
            origin,
            repairs,
        }
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B z = rhs` in place (rows in, positions out).
    pub fn ftran(&self, rhs: &mut [f64]) {
        for &s in &self.l_steps {
            let w = rhs[self.prow[s]];
            if w == 0.0 {
                continue;
            }
            let (is, vs) = self.l.get(s);
            for (&i, &v) in is.iter().zip(vs) {
                rhs[i] -= v * w;
            }
        }
        for &k in self.u_steps.iter().rev() {
            let i = self.prow[k];
            if rhs[i] == 0.0 {
                continue;
            }
            let v = rhs[i] / self.diag[k];
            rhs[i] = v;
            let (is, us) = self.u.get(k);
            for (&t, &uv) in is.iter().zip(us) {
                rhs[t] -= uv * v;
            }
        }
        for eta in &self.etas {
            let zr = rhs[eta.r];
            if zr == 0.0 {
                continue;
            }
            let zr = zr / eta.pivot;
            rhs[eta.r] = zr;
            for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                rhs[i] -= a * zr;
            }
        }
    }

    /// Rows reachable from `nz` through the columns of `tri`, in topological
    /// order (reverse postorder) in `self.topo`.
    fn reach(&mut self, nz: &[usize], upper: bool) {
        let tri = if upper { &self.u } else { &self.l };
        self.topo.clear();
        for &root in nz {
            if self.mark[root] {
                continue;
            }
            self.mark[root] = true;
            self.stack.push((root, 0));
            while let Some(&mut (node, ref mut child)) = self.stack.last_mut() {
                let children = tri.get(self.pinv[node]).0;
                if *child < children.len() {
                    let next = children[*child];
                    *child += 1;
                    if !self.mark[next] {
                        self.mark[next] = true;
                        self.stack.push((next, 0));
                    }
                } else {
                    self.topo.push(node);
                    self.stack.pop();
                }
            }
        }
        for &i in &self.topo {
            self.mark[i] = false;
        }
        self.topo.reverse();
    }

    /// [`Factor::ftran`] for a sparse right-hand side whose nonzero rows are
    /// listed in `nz`; on exit `nz` lists the (possibly) nonzero positions.
    pub fn ftran_sparse(&mut self, rhs: &mut [f64], nz: &mut Vec<usize>) {
        self.reach(nz, false);
        for &i in &self.topo {
            let w = rhs[i];
            if w == 0.0 {
                continue;
            }
            let (is, vs) = self.l.get(self.pinv[i]);
            for (&r, &v) in is.iter().zip(vs) {
                rhs[r] -= v * w;
            }
        }
        let pattern = std::mem::take(&mut self.topo);
        self.reach(&pattern, true);
        self.topo.iter().for_each(|&i| self.mark[i] = true);
        for &i in &self.topo {
            if rhs[i] == 0.0 {
                continue;
            }
            let k = self.pinv[i];
            let v = rhs[i] / self.diag[k];
            rhs[i] = v;
            let (is, us) = self.u.get(k);
            for (&t, &uv) in is.iter().zip(us) {
                rhs[t] -= uv * v;
            }
        }
        nz.clear();
        nz.extend_from_slice(&self.topo);
        for eta in &self.etas {
            let zr = rhs[eta.r];
            if zr == 0.0 {
                continue;
            }
            let zr = zr / eta.pivot;
            rhs[eta.r] = zr;
            for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                rhs[i] -= a * zr;
                if !self.mark[i] {
                    self.mark[i] = true;
                    nz.push(i);
                }
            }
        }
        nz.iter().for_each(|&i| self.mark[i] = false);
        self.topo = pattern;
    }

    /// Solves `Bᵀ y = rhs` in place (positions in, rows out).
    pub fn btran(&self, rhs: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut v = rhs[eta.r];
            for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                v -= a * rhs[i];
            }
            rhs[eta.r] = v / eta.pivot;
        }
        for &k in &self.u_steps {
            let i = self.prow[k];
            let (is, us) = self.u.get(k);
            let mut v = rhs[i];
            for (&t, &uv) in is.iter().zip(us) {
                v -= uv * rhs[t];
            }
            rhs[i] = v / self.diag[k];
        }
        for &s in self.l_steps.iter().rev() {
            let i = self.prow[s];
            let (is, ls) = self.l.get(s);
            let mut v = rhs[i];
            for (&r, &lv) in is.iter().zip(ls) {
                v -= lv * rhs[r];
            }
            rhs[i] = v;
        }
    }

    /// Records the replacement of position `r` by a column with
    /// `alpha = B⁻¹ a_q` (dense, by position).
    pub fn update(&mut self, r: usize, alpha: &[f64], nonzeros: &[usize]) {
        let mut idx = Vec::with_capacity(nonzeros.len());
        let mut val = Vec::with_capacity(nonzeros.len());
        for &i in nonzeros {
            if i != r && alpha[i].abs() > DROP_TOL {
                idx.push(i);
                val.push(alpha[i]);
            }
        }
        self.etas.push(Eta {
            r,
            pivot: alpha[r],
            idx,
            val,
        });
    }
}
