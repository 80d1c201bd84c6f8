//! Sparse LU factorization of simplex bases with Markowitz pivoting and a
//! product-form eta file for basis updates.

use alloc::vec;
use alloc::vec::Vec;

const THRESHOLD: f64 = 0.1;
const ABS_PIVOT_TOL: f64 = 1e-11;
const SEARCH_LINES: usize = 4;
const NONE: usize = usize::MAX;

/// Columns and rows that could not be pivoted; the basis is singular.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

/// `B = P L U Q` in elimination order: step `k` pivots row `piv_row[k]`
/// against basis position `piv_col[k]`.
#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactors {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    diag: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
}

/// Lazily cleaned count buckets.
struct Buckets {
    lists: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(max: usize) -> Self {
        Buckets { lists: vec![Vec::new(); max + 2] }
    }

    fn push(&mut self, count: usize, item: usize) {
        if count >= self.lists.len() {
            self.lists.resize(count + 1, Vec::new());
        }
        self.lists[count].push(item);
    }
}

impl LuFactors {
    pub fn nnz(&self) -> usize {
        self.l_val.len() + self.u_val.len() + self.m
    }

    /// Factorizes the `m x m` matrix whose column `k` is `cols[k]`
    /// (`(row, value)` pairs, no duplicate rows).
    pub fn factorize(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<LuFactors, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut acol: Vec<Vec<(usize, f64)>> = cols.to_vec();
        let mut arow: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (c, col) in acol.iter_mut().enumerate() {
            col.retain(|e| e.1 != 0.0);
            for &(r, _) in col.iter() {
                arow[r].push(c);
            }
        }
        let mut col_done = vec![false; m];
        let mut row_done = vec![false; m];
        // Row patterns are cleaned lazily: retired columns stay listed and
        // `row_count` holds the number of live entries.
        let mut row_count: Vec<usize> = arow.iter().map(|r| r.len()).collect();
        let mut cbuck = Buckets::new(m);
        let mut rbuck = Buckets::new(m);
        for c in 0..m {
            cbuck.push(acol[c].len(), c);
        }
        for r in 0..m {
            rbuck.push(row_count[r], r);
        }

        let mut f = LuFactors {
            m,
            piv_row: Vec::with_capacity(m),
            piv_col: Vec::with_capacity(m),
            diag: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
        };
        let mut pos = vec![NONE; m];
        let mut lcol: Vec<(usize, f64)> = Vec::new();
        let mut urow: Vec<(usize, f64)> = Vec::new();

        for _step in 0..m {
            let Some((r, c)) = Self::find_pivot(&acol, &arow, &row_count, &col_done, &row_done, &mut cbuck, &mut rbuck)
            else {
                break;
            };
            let p = acol[c].iter().find(|e| e.0 == r).map(|e| e.1).unwrap();

            lcol.clear();
            for &(i, v) in &acol[c] {
                if i != r {
                    lcol.push((i, v / p));
                }
            }
            urow.clear();
            for &j in &arow[r] {
                if j != c && !col_done[j] {
                    let v = acol[j].iter().find(|e| e.0 == r).map(|e| e.1).unwrap();
                    urow.push((j, v));
                }
            }

            // Retire the pivot column and row from the active submatrix.
            for &(i, _) in &acol[c] {
                row_count[i] -= 1;
            }
            acol[c].clear();
            col_done[c] = true;
            for &(j, _) in &urow {
                if let Some(k) = acol[j].iter().position(|e| e.0 == r) {
                    acol[j].swap_remove(k);
                }
            }
            arow[r] = Vec::new();
            row_done[r] = true;

            // Schur complement update.
            for &(j, uj) in &urow {
                let col = &mut acol[j];
                for (k, e) in col.iter().enumerate() {
                    pos[e.0] = k;
                }
                for &(i, li) in &lcol {
                    let delta = -li * uj;
                    if pos[i] != NONE {
                        col[pos[i]].1 += delta;
                    } else {
                        pos[i] = col.len();
                        col.push((i, delta));
                        arow[i].push(j);
                        row_count[i] += 1;
                    }
                }
                for e in col.iter() {
                    pos[e.0] = NONE;
                }
                cbuck.push(col.len(), j);
            }
            for &(i, _) in &lcol {
                rbuck.push(row_count[i], i);
            }

            f.piv_row.push(r);
            f.piv_col.push(c);
            f.diag.push(p);
            for &(i, l) in &lcol {
                f.l_idx.push(i);
                f.l_val.push(l);
            }
            f.l_start.push(f.l_idx.len());
            for &(j, u) in &urow {
                f.u_idx.push(j);
                f.u_val.push(u);
            }
            f.u_start.push(f.u_idx.len());
        }

        if f.piv_row.len() < m {
            return Err(Singular {
                positions: (0..m).filter(|&c| !col_done[c]).collect(),
                rows: (0..m).filter(|&r| !row_done[r]).collect(),
            });
        }
        Ok(f)
    }

    fn find_pivot(
        acol: &[Vec<(usize, f64)>],
        arow: &[Vec<usize>],
        row_count: &[usize],
        col_done: &[bool],
        row_done: &[bool],
        cbuck: &mut Buckets,
        rbuck: &mut Buckets,
    ) -> Option<(usize, usize)> {
        let col_max = |c: usize| acol[c].iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
        let mut best: Option<(usize, usize, usize)> = None; // (cost, row, col)
        let mut lines = 0;
        let maxc = cbuck.lists.len().max(rbuck.lists.len());
        for count in 1..maxc {
            if count < cbuck.lists.len() {
                let mut k = 0;
                while k < cbuck.lists[count].len() {
                    let c = cbuck.lists[count][k];
                    if col_done[c] || acol[c].len() != count {
                        cbuck.lists[count].swap_remove(k);
                        continue;
                    }
                    k += 1;
                    let cmax = col_max(c);
                    for &(r, v) in &acol[c] {
                        if v.abs() >= THRESHOLD * cmax && v.abs() > ABS_PIVOT_TOL {
                            let cost = (row_count[r] - 1) * (count - 1);
                            if best.map_or(true, |b| cost < b.0) {
                                best = Some((cost, r, c));
                            }
                        }
                    }
                    lines += 1;
                    if lines >= SEARCH_LINES && best.is_some() {
                        break;
                    }
                }
            }
            if let Some(b) = best {
                if b.0 <= (count - 1) * (count - 1) || lines >= SEARCH_LINES {
                    return Some((b.1, b.2));
                }
            }
            if count < rbuck.lists.len() {
                let mut k = 0;
                while k < rbuck.lists[count].len() {
                    let r = rbuck.lists[count][k];
                    if row_done[r] || row_count[r] != count {
                        rbuck.lists[count].swap_remove(k);
                        continue;
                    }
                    k += 1;
                    for &c in arow[r].iter().filter(|&&c| !col_done[c]) {
                        let v = acol[c].iter().find(|e| e.0 == r).map_or(0.0, |e| e.1);
                        if v.abs() >= THRESHOLD * col_max(c) && v.abs() > ABS_PIVOT_TOL {
                            let cost = (count - 1) * (acol[c].len() - 1);
                            if best.map_or(true, |b| cost < b.0) {
                                best = Some((cost, r, c));
                            }
                        }
                    }
                    lines += 1;
                    if lines >= SEARCH_LINES && best.is_some() {
                        break;
                    }
                }
            }
            if let Some(b) = best {
                if b.0 <= count * (count - 1) || lines >= SEARCH_LINES {
                    return Some((b.1, b.2));
                }
            }
        }
        best.map(|b| (b.1, b.2))
    }

    /// Solves `B x = b`. `rhs` is indexed by row and is clobbered; the
    /// result is written to `out`, indexed by basis position.
    pub fn ftran(&self, rhs: &mut [f64], out: &mut [f64]) {
        for k in 0..self.m {
            let v = rhs[self.piv_row[k]];
            if v != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_idx[e]] -= self.l_val[e] * v;
                }
            }
        }
        for k in (0..self.m).rev() {
            let mut v = rhs[self.piv_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                v -= self.u_val[e] * out[self.u_idx[e]];
            }
            out[self.piv_col[k]] = v / self.diag[k];
        }
    }

    /// Solves `B^T y = c`. `c` is indexed by basis position and is
    /// clobbered; the result is written to `out`, indexed by row.
    pub fn btran(&self, c: &mut [f64], out: &mut [f64]) {
        for k in 0..self.m {
            let w = c[self.piv_col[k]] / self.diag[k];
            if w != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[e]] -= self.u_val[e] * w;
                }
            }
            out[self.piv_row[k]] = w;
        }
        for k in (0..self.m).rev() {
            let mut v = out[self.piv_row[k]];
            for e in self.l_start[k]..self.l_start[k + 1] {
                v -= self.l_val[e] * out[self.l_idx[e]];
            }
            out[self.piv_row[k]] = v;
        }
    }
}

/// Product-form update `E = I + (eta - e_r) e_r^T` for one basis change.
#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

/// LU factors plus the eta file accumulated since the last refactorization.
#[derive(Debug, Clone, Default)]
pub(crate) struct BasisInverse {
    lu: LuFactors,
    etas: Vec<Eta>,
    eta_nnz: usize,
    work: Vec<f64>,
}

impl BasisInverse {
    pub fn new(lu: LuFactors) -> Self {
        let m = lu.m;
        BasisInverse { lu, etas: Vec::new(), eta_nnz: 0, work: vec![0.0; m] }
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// Nonzeros held by the eta file relative to the base factors.
    pub fn eta_growth(&self) -> f64 {
        self.eta_nnz as f64 / self.lu.nnz().max(1) as f64
    }

    /// `out = B^{-1} a` for a sparse column `a`.
    pub fn ftran_sparse(&mut self, rows: &[usize], vals: &[f64], out: &mut [f64]) {
        self.work.iter_mut().for_each(|x| *x = 0.0);
        for (r, v) in rows.iter().zip(vals) {
            self.work[*r] = *v;
        }
        let mut w = core::mem::take(&mut self.work);
        self.lu.ftran(&mut w, out);
        self.work = w;
        self.apply_etas(out);
    }

    /// `out = B^{-1} b` for a dense `b` (by row).
    pub fn ftran_dense(&mut self, b: &[f64], out: &mut [f64]) {
        self.work.copy_from_slice(b);
        let mut w = core::mem::take(&mut self.work);
        self.lu.ftran(&mut w, out);
        self.work = w;
        self.apply_etas(out);
    }

    fn apply_etas(&self, x: &mut [f64]) {
        for eta in &self.etas {
            let xr = x[eta.pos] / eta.pivot;
            if xr != 0.0 {
                for (i, a) in eta.idx.iter().zip(&eta.val) {
                    x[*i] -= a * xr;
                }
            }
            x[eta.pos] = xr;
        }
    }

    /// `out = B^{-T} c`; `c` is by basis position and is clobbered.
    pub fn btran(&mut self, c: &mut [f64], out: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut v = c[eta.pos];
            for (i, a) in eta.idx.iter().zip(&eta.val) {
                v -= a * c[*i];
            }
            c[eta.pos] = v / eta.pivot;
        }
        self.lu.btran(c, out);
    }

    /// Records that position `pos` now holds a column whose FTRAN was `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > 1e-14 {
                idx.push(i);
                val.push(a);
            }
        }
        self.eta_nnz += idx.len() + 1;
        self.etas.push(Eta { pos, pivot: alpha[pos], idx, val });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn dense_mul(cols: &[Vec<(usize, f64)>], x: &[f64], m: usize) -> Vec<f64> {
        let mut y = vec![0.0; m];
        for (c, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                y[r] += v * x[c];
            }
        }
        y
    }

    fn random_sparse(m: usize, seed: u64) -> Vec<Vec<(usize, f64)>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                p.swap(i, rng.random_range(0..=i));
            }
            p
        };
        (0..m)
            .map(|c| {
                let mut col = vec![(perm[c], 4.0 + rng.random::<f64>())];
                for _ in 0..3 {
                    let r = rng.random_range(0..m);
                    if col.iter().all(|e| e.0 != r) {
                        col.push((r, rng.random::<f64>() - 0.5));
                    }
                }
                col
            })
            .collect()
    }

    #[test]
    fn solves_round_trip() {
        for seed in 0..20 {
            let m = 40;
            let cols = random_sparse(m, seed);
            let lu = LuFactors::factorize(m, &cols).unwrap();
            let x: Vec<f64> = (0..m).map(|i| i as f64 - 7.5).collect();
            let mut b = dense_mul(&cols, &x, m);
            let mut out = vec![0.0; m];
            lu.ftran(&mut b, &mut out);
            for i in 0..m {
                assert!((out[i] - x[i]).abs() < 1e-9, "seed {seed}");
            }
            // B^T y = c check: c_k = col_k . y
            let y: Vec<f64> = (0..m).map(|i| (i % 5) as f64 - 2.0).collect();
            let mut c: Vec<f64> = cols.iter().map(|col| col.iter().map(|e| e.1 * y[e.0]).sum()).collect();
            let mut got = vec![0.0; m];
            lu.btran(&mut c, &mut got);
            for i in 0..m {
                assert!((got[i] - y[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn detects_singular() {
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)], vec![(2, 1.0)]];
        let err = LuFactors::factorize(3, &cols).unwrap_err();
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }

    #[test]
    fn eta_updates_match_refactor() {
        let m = 30;
        let mut cols = random_sparse(m, 99);
        let mut inv = BasisInverse::new(LuFactors::factorize(m, &cols).unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let pos = rng.random_range(0..m);
            let newcol: Vec<(usize, f64)> =
                vec![(pos, 3.0), (rng.random_range(0..m), 0.7)].into_iter().fold(Vec::new(), |mut acc, e| {
                    if acc.iter().all(|x: &(usize, f64)| x.0 != e.0) {
                        acc.push(e);
                    }
                    acc
                });
            let rows: Vec<usize> = newcol.iter().map(|e| e.0).collect();
            let vals: Vec<f64> = newcol.iter().map(|e| e.1).collect();
            let mut alpha = vec![0.0; m];
            inv.ftran_sparse(&rows, &vals, &mut alpha);
            if alpha[pos].abs() < 1e-3 {
                continue;
            }
            inv.update(pos, &alpha);
            cols[pos] = newcol;
        }
        let x: Vec<f64> = (0..m).map(|i| (i as f64).sin()).collect();
        let b = dense_mul(&cols, &x, m);
        let mut out = vec![0.0; m];
        inv.ftran_dense(&b, &mut out);
        for i in 0..m {
            assert!((out[i] - x[i]).abs() < 1e-8);
        }
        let y: Vec<f64> = (0..m).map(|i| (i as f64).cos()).collect();
        let mut c: Vec<f64> = cols.iter().map(|col| col.iter().map(|e| e.1 * y[e.0]).sum()).collect();
        let mut got = vec![0.0; m];
        inv.btran(&mut c, &mut got);
        for i in 0..m {
            assert!((got[i] - y[i]).abs() < 1e-8);
        }
    }
}
