//! Infeasible-start primal-dual path following (HKM direction, Mehrotra
//! predictor-corrector). Dense linear algebra throughout.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, LU};

use super::{
    BlockKind, BlockValue, BlockValues, ConicProgram, SdpError, SdpSolution, SdpStatus,
    SolveOptions,
};

/// Objective magnitude beyond which divergence is declared.
const DIVERGENCE: f64 = 1e10;
/// Relative Schur-complement regularization used on the single retry.
const REGULARIZATION: f64 = 1e-12;
const STALL_WINDOW: usize = 8;
/// Iterations without a 10% merit improvement before giving up.
const PROGRESS_WINDOW: usize = 30;
/// Wide-neighborhood bound on `min eig(XZ) / mu`.
const CENTRALITY: f64 = 1e-3;

type Full = Vec<(usize, usize, f64)>;

struct PsdBlock {
    block: usize,
    n: usize,
    c: DMatrix<f64>,
    /// `(constraint index, full symmetric entry list)`
    cons: Vec<(usize, Full)>,
}

/// Program data rearranged by cone type.
struct Data {
    m: usize,
    b: DVector<f64>,
    psd: Vec<PsdBlock>,
    /// nonneg coordinates: `(program block, offset)` per nonneg block
    lin_blocks: Vec<(usize, usize)>,
    nl: usize,
    cl: Vec<f64>,
    /// per constraint: `(coordinate, value)`
    al: Vec<Vec<(usize, f64)>>,
    free_blocks: Vec<(usize, usize)>,
    nf: usize,
    cf: DVector<f64>,
    af: DMatrix<f64>,
    norm_c: f64,
    norm_b: f64,
}

impl Data {
    fn new(p: &ConicProgram) -> Self {
        let m = p.m();
        let mut psd = Vec::new();
        let mut psd_pos = vec![usize::MAX; p.blocks.len()];
        let mut offsets = vec![0usize; p.blocks.len()];
        let (mut lin_blocks, mut free_blocks) = (Vec::new(), Vec::new());
        let (mut nl, mut nf) = (0, 0);
        for (i, bl) in p.blocks.iter().enumerate() {
            match bl.kind {
                BlockKind::Psd => {
                    psd_pos[i] = psd.len();
                    psd.push(PsdBlock {
                        block: i,
                        n: bl.size,
                        c: DMatrix::zeros(bl.size, bl.size),
                        cons: Vec::new(),
                    });
                }
                BlockKind::Nonneg => {
                    offsets[i] = nl;
                    lin_blocks.push((i, nl));
                    nl += bl.size;
                }
                BlockKind::Zero => {
                    offsets[i] = nf;
                    free_blocks.push((i, nf));
                    nf += bl.size;
                }
            }
        }
        let mut cl = vec![0.0; nl];
        let mut cf = DVector::zeros(nf);
        let mut af = DMatrix::zeros(m, nf);
        let mut al = vec![Vec::new(); m];
        for e in &p.c.entries {
            match p.blocks[e.block].kind {
                BlockKind::Psd => {
                    let c = &mut psd[psd_pos[e.block]].c;
                    c[(e.row, e.col)] = e.value;
                    c[(e.col, e.row)] = e.value;
                }
                BlockKind::Nonneg => cl[offsets[e.block] + e.row] = e.value,
                BlockKind::Zero => cf[offsets[e.block] + e.row] = e.value,
            }
        }
        for (k, a) in p.a.iter().enumerate() {
            let mut per_block: Vec<Full> = vec![Vec::new(); psd.len()];
            for e in &a.entries {
                match p.blocks[e.block].kind {
                    BlockKind::Psd => {
                        let f = &mut per_block[psd_pos[e.block]];
                        f.push((e.row, e.col, e.value));
                        if e.row != e.col {
                            f.push((e.col, e.row, e.value));
                        }
                    }
                    BlockKind::Nonneg => al[k].push((offsets[e.block] + e.row, e.value)),
                    BlockKind::Zero => af[(k, offsets[e.block] + e.row)] += e.value,
                }
            }
            for (j, f) in per_block.into_iter().enumerate() {
                if !f.is_empty() {
                    psd[j].cons.push((k, f));
                }
            }
        }
        let norm_c = p.c.norm_sq().sqrt();
        let b = DVector::from_vec(p.b.clone());
        let norm_b = b.norm();
        Data {
            m,
            b,
            psd,
            lin_blocks,
            nl,
            cl,
            al,
            free_blocks,
            nf,
            cf,
            af,
            norm_c,
            norm_b,
        }
    }

    fn cone_dim(&self) -> usize {
        self.psd.iter().map(|b| b.n).sum::<usize>() + self.nl
    }

    /// `A_c(X)` for possibly nonsymmetric psd-block arguments.
    fn apply_a(&self, xs: &[DMatrix<f64>], xl: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, x) in self.psd.iter().zip(xs) {
            for (k, f) in &blk.cons {
                out[*k] += f.iter().map(|&(p, q, a)| a * x[(p, q)]).sum::<f64>();
            }
        }
        for (k, row) in self.al.iter().enumerate() {
            out[k] += row.iter().map(|&(i, a)| a * xl[i]).sum::<f64>();
        }
        out
    }

    /// `sum_k y_k A_k` on the cone blocks.
    fn apply_at(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let mats = self
            .psd
            .iter()
            .map(|blk| {
                let mut m = DMatrix::zeros(blk.n, blk.n);
                for (k, f) in &blk.cons {
                    for &(p, q, a) in f {
                        m[(p, q)] += a * y[*k];
                    }
                }
                m
            })
            .collect();
        let mut v = vec![0.0; self.nl];
        for (k, row) in self.al.iter().enumerate() {
            for &(i, a) in row {
                v[i] += a * y[k];
            }
        }
        (mats, v)
    }
}

#[derive(Clone)]
struct Iterate {
    xs: Vec<DMatrix<f64>>,
    zs: Vec<DMatrix<f64>>,
    xl: Vec<f64>,
    zl: Vec<f64>,
    xf: DVector<f64>,
    y: DVector<f64>,
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<DMatrix<f64>>,
    rdl: Vec<f64>,
    rf: DVector<f64>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    mu: f64,
}

impl Residuals {
    fn rel_gap(&self) -> f64 {
        (self.pobj - self.dobj).abs() / (1.0 + self.dobj.abs())
    }

    /// Worst ratio of a convergence measure to its tolerance.
    fn merit(&self, o: &SolveOptions) -> f64 {
        (self.rel_gap() / o.gap_tol)
            .max(self.pinf / o.feas_tol)
            .max(self.dinf / o.feas_tol)
    }
}

struct Direction {
    dxs: Vec<DMatrix<f64>>,
    dzs: Vec<DMatrix<f64>>,
    dxl: Vec<f64>,
    dzl: Vec<f64>,
    dxf: DVector<f64>,
    dy: DVector<f64>,
}

/// Factorized Newton (Schur complement) system for one iteration.
enum Kkt {
    Schur(Cholesky<f64, Dyn>),
    /// LU of `[S A_f; A_f' 0]`; eliminating `dx_f` through `S^{-1}` loses
    /// too much accuracy once `S` is nearly singular
    Augmented(LU<f64, Dyn, Dyn>, DVector<f64>),
}

/// Solve `[S A_f; A_f' 0] [dy; dx_f] = [h; r_f]` from the factorization.
fn solve_kkt(
    d: &Data,
    kkt: &Kkt,
    h: &DVector<f64>,
    rf: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    match kkt {
        Kkt::Schur(c) => Some((c.solve(h), DVector::zeros(0))),
        Kkt::Augmented(lu, scale) => {
            let rhs = DVector::from_iterator(d.m + d.nf, h.iter().chain(rf.iter()).copied());
            let sol = lu.solve(&rhs.component_mul(scale))?.component_mul(scale);
            Some((
                sol.rows(0, d.m).into_owned(),
                sol.rows(d.m, d.nf).into_owned(),
            ))
        }
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn frob_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Quasi-definite shift of the free-variable block; refinement against the
/// exact operator removes its bias.
const FREE_REGULARIZATION: f64 = 1e-10;

fn chol_reg(mut m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if m.nrows() == 0 {
        return Cholesky::new(m);
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = m.diagonal().iter().fold(1.0f64, |a, &v| a.max(v.abs()));
    for i in 0..m.nrows() {
        m[(i, i)] += REGULARIZATION * scale;
    }
    Cholesky::new(m)
}

impl Iterate {
    fn start(d: &Data) -> Self {
        let mut xs = Vec::new();
        let mut zs = Vec::new();
        for blk in &d.psd {
            let n = blk.n as f64;
            let mut xi: f64 = 10f64.max(n.sqrt());
            let mut eta: f64 = 10f64.max(n.sqrt()).max(blk.c.norm());
            for (k, f) in &blk.cons {
                let na = f.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt();
                xi = xi.max(n * (1.0 + d.b[*k].abs()) / (1.0 + na));
                eta = eta.max(na);
            }
            xs.push(DMatrix::identity(blk.n, blk.n) * xi);
            zs.push(DMatrix::identity(blk.n, blk.n) * eta);
        }
        let (mut xl, mut zl) = (vec![0.0; d.nl], vec![0.0; d.nl]);
        if d.nl > 0 {
            let n = d.nl as f64;
            let mut norms = vec![0.0; d.m];
            for (k, row) in d.al.iter().enumerate() {
                norms[k] = row.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
            }
            let mut xi: f64 = 10f64.max(n.sqrt());
            let mut eta: f64 = 10f64.max(n.sqrt());
            for k in 0..d.m {
                xi = xi.max(n * (1.0 + d.b[k].abs()) / (1.0 + norms[k]));
                eta = eta.max(norms[k]);
            }
            eta = eta.max(d.cl.iter().map(|v| v * v).sum::<f64>().sqrt());
            xl.fill(xi);
            zl.fill(eta);
        }
        Iterate {
            xs,
            zs,
            xl,
            zl,
            xf: DVector::zeros(d.nf),
            y: DVector::zeros(d.m),
        }
    }

    fn residuals(&self, d: &Data) -> Residuals {
        let mut rp = &d.b - d.apply_a(&self.xs, &self.xl);
        if d.nf > 0 {
            rp -= &d.af * &self.xf;
        }
        let (aty, atyl) = d.apply_at(&self.y);
        let rd: Vec<DMatrix<f64>> = d
            .psd
            .iter()
            .zip(aty.iter().zip(&self.zs))
            .map(|(blk, (a, z))| &blk.c - a - z)
            .collect();
        let rdl: Vec<f64> = (0..d.nl).map(|i| d.cl[i] - atyl[i] - self.zl[i]).collect();
        let rf = &d.cf - d.af.transpose() * &self.y;

        let mut pobj = d.cf.dot(&self.xf);
        pobj += d
            .psd
            .iter()
            .zip(&self.xs)
            .map(|(b, x)| inner(&b.c, x))
            .sum::<f64>();
        pobj += d.cl.iter().zip(&self.xl).map(|(c, x)| c * x).sum::<f64>();
        let dobj = d.b.dot(&self.y);

        let dres = rd.iter().map(frob_sq).sum::<f64>()
            + rdl.iter().map(|v| v * v).sum::<f64>()
            + rf.norm_squared();
        let xz = self
            .xs
            .iter()
            .zip(&self.zs)
            .map(|(x, z)| inner(x, z))
            .sum::<f64>()
            + self
                .xl
                .iter()
                .zip(&self.zl)
                .map(|(x, z)| x * z)
                .sum::<f64>();
        Residuals {
            pinf: rp.norm() / (1.0 + d.norm_b),
            dinf: dres.sqrt() / (1.0 + d.norm_c),
            rp,
            rd,
            rdl,
            rf,
            pobj,
            dobj,
            mu: xz / d.cone_dim() as f64,
        }
    }

    fn to_solution(
        &self,
        p: &ConicProgram,
        d: &Data,
        r: &Residuals,
        status: SdpStatus,
        iterations: usize,
    ) -> SdpSolution {
        let mut x = p.zero_values();
        let mut z = p.zero_values();
        for (j, blk) in d.psd.iter().enumerate() {
            x.blocks[blk.block] = BlockValue::Matrix(sym(&self.xs[j]));
            z.blocks[blk.block] = BlockValue::Matrix(sym(&self.zs[j]));
        }
        let fill = |vals: &mut BlockValues, blocks: &[(usize, usize)], src: &[f64]| {
            for &(b, off) in blocks {
                if let BlockValue::Vector(v) = &mut vals.blocks[b] {
                    let n = v.len();
                    v.copy_from_slice(&src[off..off + n]);
                }
            }
        };
        fill(&mut x, &d.lin_blocks, &self.xl);
        fill(&mut z, &d.lin_blocks, &self.zl);
        fill(&mut x, &d.free_blocks, self.xf.as_slice());
        fill(&mut z, &d.free_blocks, r.rf.as_slice());
        SdpSolution {
            status,
            blocks: p.blocks.clone(),
            x,
            y: self.y.iter().copied().collect(),
            z,
            primal_obj: r.pobj,
            dual_obj: r.dobj,
            gap: r.pobj - r.dobj,
            primal_residual: r.pinf,
            dual_residual: r.dinf,
            iterations,
            mu_final: r.mu,
        }
    }
}

/// Largest `a` with `M + a dM` positive semidefinite, given `chol(M)`.
fn max_step_psd(l: &Cholesky<f64, Dyn>, dm: &DMatrix<f64>) -> f64 {
    let lf = l.l();
    let n = dm.nrows();
    // L^{-1} dM L^{-T}
    let t = lf
        .solve_lower_triangular(dm)
        .unwrap_or_else(|| DMatrix::zeros(n, n));
    let t = lf
        .solve_lower_triangular(&t.transpose())
        .unwrap_or_else(|| DMatrix::zeros(n, n));
    let lmin = SymmetricEigen::new(sym(&t))
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v));
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn max_step_lin(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Work<'a> {
    d: &'a Data,
    it: &'a Iterate,
    zinv: Vec<DMatrix<f64>>,
}

impl Work<'_> {
    fn schur(&self) -> DMatrix<f64> {
        let d = self.d;
        let mut s = DMatrix::zeros(d.m, d.m);
        for (j, blk) in d.psd.iter().enumerate() {
            let x = &self.it.xs[j];
            let w = &self.zinv[j];
            for (ia, (k, ek)) in blk.cons.iter().enumerate() {
                for (l, el) in &blk.cons[ia..] {
                    // tr(A_k X A_l W) = sum a_pq X_qr b_rs W_sp
                    let mut acc = 0.0;
                    for &(p, q, a) in ek {
                        for &(r, s_, b) in el {
                            acc += a * b * x[(q, r)] * w[(s_, p)];
                        }
                    }
                    s[(*k, *l)] += acc;
                    if k != l {
                        s[(*l, *k)] += acc;
                    }
                }
            }
        }
        if d.nl > 0 {
            let ratio: Vec<f64> = (0..d.nl).map(|i| self.it.xl[i] / self.it.zl[i]).collect();
            // A_l diag(x/z) A_l' from sparse rows
            let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d.nl];
            for (k, row) in d.al.iter().enumerate() {
                for &(i, a) in row {
                    cols[i].push((k, a));
                }
            }
            for (i, col) in cols.iter().enumerate() {
                for &(k, a) in col {
                    for &(l, b) in col {
                        s[(k, l)] += a * b * ratio[i];
                    }
                }
            }
        }
        s
    }

    fn factor(&self) -> Option<Kkt> {
        let d = self.d;
        if d.nf == 0 {
            return chol_reg(self.schur()).map(Kkt::Schur);
        }
        let n = d.m + d.nf;
        let mut k = DMatrix::zeros(n, n);
        k.view_mut((0, 0), (d.m, d.m)).copy_from(&self.schur());
        k.view_mut((0, d.m), (d.m, d.nf)).copy_from(&d.af);
        k.view_mut((d.m, 0), (d.nf, d.m))
            .copy_from(&d.af.transpose());
        // symmetric equilibration; partial pivoting is not scale invariant
        let scale = DVector::from_fn(n, |i, _| {
            let c = k.column(i).amax();
            if c > 0.0 {
                1.0 / c.sqrt()
            } else {
                1.0
            }
        });
        for j in 0..n {
            for i in 0..n {
                k[(i, j)] *= scale[i] * scale[j];
            }
        }
        for i in d.m..n {
            k[(i, i)] = -FREE_REGULARIZATION;
        }
        let lu = k.lu();
        lu.is_invertible().then_some(Kkt::Augmented(lu, scale))
    }

    fn direction(
        &self,
        kkt: &Kkt,
        r: &Residuals,
        sigma_mu: f64,
        corr: Option<&Direction>,
    ) -> Option<Direction> {
        let d = self.d;
        let it = self.it;
        let mut gs = Vec::with_capacity(d.psd.len());
        let mut ts = Vec::with_capacity(d.psd.len());
        for j in 0..d.psd.len() {
            let w = &self.zinv[j];
            let x = &it.xs[j];
            let mut g = w * sigma_mu - x;
            if let Some(c) = corr {
                g -= &c.dxs[j] * &c.dzs[j] * w;
            }
            let t = &g - x * &r.rd[j] * w;
            gs.push(g);
            ts.push(t);
        }
        let mut gl = vec![0.0; d.nl];
        let mut tl = vec![0.0; d.nl];
        for i in 0..d.nl {
            let (x, z) = (it.xl[i], it.zl[i]);
            let mut g = sigma_mu / z - x;
            if let Some(c) = corr {
                g -= c.dxl[i] * c.dzl[i] / z;
            }
            gl[i] = g;
            tl[i] = g - x * r.rdl[i] / z;
        }
        let h = &r.rp - d.apply_a(&ts, &tl);

        let (mut dy, mut dxf) = solve_kkt(d, kkt, &h, &r.rf)?;
        let mut dir = self.complete(r, &gs, &gl, dy.clone(), dxf.clone());
        // iterative refinement of the full Newton system against the exact operators
        let mut err = self.newton_residual(r, &dir);
        for _ in 0..10 {
            let size = err.0.norm() + err.1.norm();
            if size <= 1e-15 * (1.0 + r.rp.norm() + r.rf.norm()) {
                break;
            }
            let Some((ey, exf)) = solve_kkt(d, kkt, &err.0, &err.1) else {
                break;
            };
            let cand_dy = &dy + ey;
            let cand_dxf = &dxf + exf;
            let cand = self.complete(r, &gs, &gl, cand_dy.clone(), cand_dxf.clone());
            let cerr = self.newton_residual(r, &cand);
            if cerr.0.norm() + cerr.1.norm() >= size {
                break;
            }
            dy = cand_dy;
            dxf = cand_dxf;
            dir = cand;
            err = cerr;
        }
        Some(dir)
    }

    /// Cone parts of a direction from its `(dy, dx_f)` part.
    fn complete(
        &self,
        r: &Residuals,
        gs: &[DMatrix<f64>],
        gl: &[f64],
        dy: DVector<f64>,
        dxf: DVector<f64>,
    ) -> Direction {
        let d = self.d;
        let it = self.it;
        let (aty, atyl) = d.apply_at(&dy);
        let mut dxs = Vec::with_capacity(d.psd.len());
        let mut dzs = Vec::with_capacity(d.psd.len());
        for j in 0..d.psd.len() {
            let dz = &r.rd[j] - &aty[j];
            let dx = sym(&(&gs[j] - &it.xs[j] * &dz * &self.zinv[j]));
            dxs.push(dx);
            dzs.push(dz);
        }
        let dzl: Vec<f64> = (0..d.nl).map(|i| r.rdl[i] - atyl[i]).collect();
        let dxl: Vec<f64> = (0..d.nl)
            .map(|i| gl[i] - it.xl[i] * dzl[i] / it.zl[i])
            .collect();
        Direction {
            dxs,
            dzs,
            dxl,
            dzl,
            dxf,
            dy,
        }
    }

    /// Residuals of the primal and free-variable Newton equations.
    fn newton_residual(&self, r: &Residuals, dir: &Direction) -> (DVector<f64>, DVector<f64>) {
        let d = self.d;
        let mut e = &r.rp - d.apply_a(&dir.dxs, &dir.dxl);
        if d.nf > 0 {
            e -= &d.af * &dir.dxf;
        }
        let ef = &r.rf - d.af.transpose() * &dir.dy;
        (e, ef)
    }

    /// Maximal primal and dual steps keeping the cone iterates interior.
    fn max_steps(
        &self,
        cx: &[Cholesky<f64, Dyn>],
        cz: &[Cholesky<f64, Dyn>],
        dir: &Direction,
    ) -> (f64, f64) {
        let mut ap = max_step_lin(&self.it.xl, &dir.dxl);
        let mut ad = max_step_lin(&self.it.zl, &dir.dzl);
        for j in 0..self.d.psd.len() {
            ap = ap.min(max_step_psd(&cx[j], &dir.dxs[j]));
            ad = ad.min(max_step_psd(&cz[j], &dir.dzs[j]));
        }
        (ap, ad)
    }
}

/// Shrink `a` until every `M + a dM` admits a Cholesky factorization; rounding
/// can push a step computed at the boundary fraction just outside the cone.
fn interior_step(
    ms: &[DMatrix<f64>],
    dms: &[DMatrix<f64>],
    mut a: f64,
) -> (f64, Option<Vec<Cholesky<f64, Dyn>>>) {
    for _ in 0..40 {
        let f: Option<Vec<_>> = ms
            .iter()
            .zip(dms)
            .map(|(m, dm)| Cholesky::new(sym(&(m + dm * a))))
            .collect();
        if f.is_some() {
            return (a, f);
        }
        a *= 0.8;
    }
    (0.0, ms.iter().map(|m| Cholesky::new(sym(m))).collect())
}

fn take_step(it: &mut Iterate, dir: &Direction, ap: f64, ad: f64) {
    for (x, dx) in it.xs.iter_mut().zip(&dir.dxs) {
        *x += dx * ap;
    }
    for (z, dz) in it.zs.iter_mut().zip(&dir.dzs) {
        *z += dz * ad;
    }
    for (x, dx) in it.xl.iter_mut().zip(&dir.dxl) {
        *x += ap * dx;
    }
    for (z, dz) in it.zl.iter_mut().zip(&dir.dzl) {
        *z += ad * dz;
    }
    it.xf += &dir.dxf * ap;
    it.y += &dir.dy * ad;
}

/// `min eig(X^{1/2} Z X^{1/2}) / mu` at the trial point; 0 outside the cone.
fn centrality(d: &Data, it: &Iterate, dir: Option<&Direction>, ap: f64, ad: f64) -> f64 {
    let mut lo = f64::INFINITY;
    let mut xz = 0.0;
    for j in 0..d.psd.len() {
        let (x, z) = match dir {
            Some(dir) => (&it.xs[j] + &dir.dxs[j] * ap, &it.zs[j] + &dir.dzs[j] * ad),
            None => (it.xs[j].clone(), it.zs[j].clone()),
        };
        xz += inner(&x, &z);
        let Some(l) = Cholesky::new(sym(&x)) else {
            return 0.0;
        };
        let l = l.l();
        let e = SymmetricEigen::new(sym(&(l.transpose() * &z * &l))).eigenvalues;
        lo = lo.min(e.min());
    }
    for i in 0..d.nl {
        let (x, z) = match dir {
            Some(dir) => (it.xl[i] + ap * dir.dxl[i], it.zl[i] + ad * dir.dzl[i]),
            None => (it.xl[i], it.zl[i]),
        };
        if x <= 0.0 || z <= 0.0 {
            return 0.0;
        }
        xz += x * z;
        lo = lo.min(x * z);
    }
    let mu = xz / d.cone_dim() as f64;
    if mu > 0.0 {
        lo / mu
    } else {
        0.0
    }
}

/// `<X + ap dX, Z + ad dZ> / n` without forming the trial point.
fn trial_mu(d: &Data, it: &Iterate, dir: &Direction, ap: f64, ad: f64) -> f64 {
    let mut s = 0.0;
    for j in 0..d.psd.len() {
        let x = &it.xs[j] + &dir.dxs[j] * ap;
        let z = &it.zs[j] + &dir.dzs[j] * ad;
        s += inner(&x, &z);
    }
    for i in 0..d.nl {
        s += (it.xl[i] + ap * dir.dxl[i]) * (it.zl[i] + ad * dir.dzl[i]);
    }
    s / d.cone_dim() as f64
}

/// Solve a conic program. Invalid data or options are reported as `Err`;
/// solver outcomes, including failures, come back in the solution status.
pub fn solve(program: &ConicProgram, o: &SolveOptions) -> Result<SdpSolution, SdpError> {
    o.validate()?;
    let mut p = program.clone();
    p.validate()?;
    let d = Data::new(&p);
    let mut it = Iterate::start(&d);
    let mut best: Option<(f64, Iterate)> = None;
    let mut pinf_hist = Vec::new();
    let mut dinf_hist = Vec::new();
    let factor_all = |ms: &[DMatrix<f64>]| -> Option<Vec<Cholesky<f64, Dyn>>> {
        ms.iter().map(|m| Cholesky::new(sym(m))).collect()
    };
    let trace = std::env::var_os("MOMENTLMI_TRACE").is_some();
    let mut fx = factor_all(&it.xs);
    let mut fz = factor_all(&it.zs);

    let mut reference = f64::INFINITY;
    let mut last_gain = 0;

    for iter in 0..o.max_iter {
        let r = it.residuals(&d);
        let merit = r.merit(o);
        if trace {
            eprintln!(
                "iter {iter:3} pobj {:+.10e} dobj {:+.10e} pinf {:.2e} dinf {:.2e} mu {:.2e}",
                r.pobj, r.dobj, r.pinf, r.dinf, r.mu
            );
        }
        if best.as_ref().is_none_or(|(m, _)| merit < *m) {
            best = Some((merit, it.clone()));
        }
        if merit <= 1.0 {
            return Ok(it.to_solution(&p, &d, &r, SdpStatus::Optimal, iter));
        }
        if merit < 0.9 * reference {
            reference = merit;
            last_gain = iter;
        }
        if iter - last_gain > PROGRESS_WINDOW {
            if trace {
                eprintln!("no progress in {PROGRESS_WINDOW} iterations");
            }
            return Ok(fail(&p, &d, best, iter));
        }
        pinf_hist.push(r.pinf);
        dinf_hist.push(r.dinf);
        let stalled = |h: &[f64]| {
            h.len() > STALL_WINDOW && h[h.len() - 1] > 0.5 * h[h.len() - 1 - STALL_WINDOW]
        };
        if r.dobj > DIVERGENCE && stalled(&pinf_hist) {
            return Ok(it.to_solution(&p, &d, &r, SdpStatus::Infeasible, iter));
        }
        if r.pobj < -DIVERGENCE && stalled(&dinf_hist) {
            return Ok(it.to_solution(&p, &d, &r, SdpStatus::Unbounded, iter));
        }

        let (Some(cx), Some(cz)) = (fx.take(), fz.take()) else {
            return Ok(fail(&p, &d, best, iter));
        };
        let work = Work {
            d: &d,
            it: &it,
            zinv: cz.iter().map(|c| c.inverse()).collect(),
        };
        let Some(kkt) = work.factor() else {
            return Ok(fail(&p, &d, best, iter));
        };

        let Some(pred) = work.direction(&kkt, &r, 0.0, None) else {
            return Ok(fail(&p, &d, best, iter));
        };
        let (ap, ad) = work.max_steps(&cx, &cz, &pred);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff = trial_mu(&d, &it, &pred, ap, ad);
        let sigma = if r.mu > 0.0 {
            (mu_aff / r.mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };
        let Some(dir) = work.direction(&kkt, &r, sigma * r.mu, Some(&pred)) else {
            return Ok(fail(&p, &d, best, iter));
        };
        let (mut ap, mut ad) = work.max_steps(&cx, &cz, &dir);
        // a poor predictor makes the second-order term harmful; fall back to
        // the plain centered direction when it steps further
        let mut dir = dir;
        if ap.min(ad) < 0.1 {
            if let Some(plain) = work.direction(&kkt, &r, sigma.max(0.1) * r.mu, None) {
                let (pp, pd) = work.max_steps(&cx, &cz, &plain);
                if pp.min(pd) > ap.min(ad) {
                    (dir, ap, ad) = (plain, pp, pd);
                }
            }
        }
        let ap = (o.step_fraction * ap).min(1.0);
        let ad = (o.step_fraction * ad).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) || dir.dy.iter().any(|v| !v.is_finite()) {
            return Ok(fail(&p, &d, best, iter));
        }
        // stay in a wide neighborhood of the central path
        let floor = CENTRALITY.min(0.5 * centrality(&d, &it, None, 0.0, 0.0));
        let (mut ap, mut ad) = (ap, ad);
        for _ in 0..30 {
            if centrality(&d, &it, Some(&dir), ap, ad) >= floor {
                break;
            }
            ap *= 0.8;
            ad *= 0.8;
        }
        let (ap, nx) = interior_step(&it.xs, &dir.dxs, ap);
        let (ad, nz) = interior_step(&it.zs, &dir.dzs, ad);
        if trace {
            eprintln!("         step {ap:.3e} {ad:.3e} sigma {sigma:.2e}");
        }
        take_step(&mut it, &dir, ap, ad);
        fx = nx;
        fz = nz;
    }
    let (_, bi) = best.unwrap_or((f64::INFINITY, it));
    let rb = bi.residuals(&d);
    Ok(bi.to_solution(&p, &d, &rb, SdpStatus::MaxIter, o.max_iter))
}

fn fail(p: &ConicProgram, d: &Data, best: Option<(f64, Iterate)>, iter: usize) -> SdpSolution {
    let (_, it) = best.expect("at least one iterate is recorded before failure");
    let r = it.residuals(d);
    it.to_solution(p, d, &r, SdpStatus::NumericalFailure, iter)
}
