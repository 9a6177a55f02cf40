//! Geometric multigrid V-cycle used as a CG preconditioner.
//!
//! Every level is a fresh rasterization of the same domain at twice the
//! spacing, carrying its own Shortley–Weller operator. Prolongation is
//! bilinear over interior coarse nodes and restriction is its transpose
//! scaled by 1/4, so the cycle is a symmetric operator.

use std::sync::Arc;

use super::poisson::Operator;
use crate::geometry::{Grid, NONE};

const PRE_SMOOTH: usize = 2;
const POST_SMOOTH: usize = 2;
const DIRECT_MAX: usize = 200;

struct Transfer {
    /// Up to four coarse parents of every fine cell.
    parent: Vec<[u32; 4]>,
    weight: Vec<[f64; 4]>,
}

struct Level {
    op: Operator,
    down: Option<Transfer>,
}

enum Coarsest {
    Cholesky { n: usize, l: Vec<f64> },
    Smooth,
}

pub(crate) struct Multigrid {
    levels: Vec<Level>,
    coarsest: Coarsest,
}

impl Multigrid {
    pub(crate) fn new(grid: &Arc<Grid>, fine: Operator) -> Self {
        let mut levels = vec![Level {
            op: fine,
            down: None,
        }];
        let mut current: Arc<Grid> = grid.clone();
        while current.len() > DIRECT_MAX && levels.len() < 20 {
            let coarse = match Grid::new(current.domain(), 2.0 * current.h()) {
                Ok(g) if g.len() >= 4 => Arc::new(g),
                _ => break,
            };
            let transfer = build_transfer(&current, &coarse);
            levels.last_mut().expect("nonempty").down = Some(transfer);
            levels.push(Level {
                op: Operator::new(&coarse),
                down: None,
            });
            current = coarse;
        }
        let last = &levels.last().expect("nonempty").op;
        let coarsest = if last.len() <= 4 * DIRECT_MAX {
            Coarsest::Cholesky {
                n: last.len(),
                l: cholesky(&last.dense()),
            }
        } else {
            Coarsest::Smooth
        };
        Self { levels, coarsest }
    }

    /// `z = M⁻¹ r` for one V-cycle started from zero.
    pub(crate) fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }

    fn cycle(&self, k: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[k];
        x.iter_mut().for_each(|v| *v = 0.0);
        let Some(down) = &level.down else {
            match &self.coarsest {
                Coarsest::Cholesky { n, l } => cholesky_solve(*n, l, b, x),
                Coarsest::Smooth => {
                    for _ in 0..50 {
                        level.op.gauss_seidel_forward(b, x);
                        level.op.gauss_seidel_backward(b, x);
                    }
                }
            }
            return;
        };
        for _ in 0..PRE_SMOOTH {
            level.op.gauss_seidel_forward(b, x);
        }
        let mut r = vec![0.0; x.len()];
        level.op.residual(b, x, &mut r);
        let coarse_n = self.levels[k + 1].op.len();
        let mut bc = vec![0.0; coarse_n];
        for (f, rf) in r.iter().enumerate() {
            let ps = &down.parent[f];
            let ws = &down.weight[f];
            for q in 0..4 {
                if ps[q] != NONE {
                    bc[ps[q] as usize] += 0.25 * ws[q] * rf;
                }
            }
        }
        let mut xc = vec![0.0; coarse_n];
        self.cycle(k + 1, &bc, &mut xc);
        for (f, xf) in x.iter_mut().enumerate() {
            let ps = &down.parent[f];
            let ws = &down.weight[f];
            let mut acc = 0.0;
            for q in 0..4 {
                if ps[q] != NONE {
                    acc += ws[q] * xc[ps[q] as usize];
                }
            }
            *xf += acc;
        }
        for _ in 0..POST_SMOOTH {
            level.op.gauss_seidel_backward(b, x);
        }
    }

    pub(crate) fn depth(&self) -> usize {
        self.levels.len()
    }
}

fn build_transfer(fine: &Grid, coarse: &Grid) -> Transfer {
    let mut parent = Vec::with_capacity(fine.len());
    let mut weight = Vec::with_capacity(fine.len());
    for c in 0..fine.len() {
        let (i, j) = fine.cell_ij(c);
        let xs = split(i);
        let ys = split(j);
        let mut ps = [NONE; 4];
        let mut ws = [0.0; 4];
        let mut q = 0;
        for &(ci, wi) in xs.iter().flatten() {
            for &(cj, wj) in ys.iter().flatten() {
                if let Some(pc) = coarse.cell_at(ci, cj) {
                    ps[q] = pc as u32;
                    ws[q] = wi * wj;
                    q += 1;
                }
            }
        }
        parent.push(ps);
        weight.push(ws);
    }
    Transfer { parent, weight }
}

/// Coarse lattice indices (with bilinear weights) covering fine index `i`.
fn split(i: i64) -> [Option<(i64, f64)>; 2] {
    if i.rem_euclid(2) == 0 {
        [Some((i.div_euclid(2), 1.0)), None]
    } else {
        let lo = i.div_euclid(2);
        [Some((lo, 0.5)), Some((lo + 1, 0.5))]
    }
}

fn cholesky(a: &[f64]) -> Vec<f64> {
    let n = (a.len() as f64).sqrt().round() as usize;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    l
}

fn cholesky_solve(n: usize, l: &[f64], b: &[f64], x: &mut [f64]) {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
}
