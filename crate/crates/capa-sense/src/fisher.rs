//! Fisher information and the trace-of-CRB objective for subspace probing
//! currents.
//!
//! The probing current is parameterized as `J(p) = bᵀ(p) w` with basis
//! entries `e^{+j k₀ ‖rₙ - p‖}` (one per target). All receive-aperture
//! integrals then collapse into cross-integral matrices that are computed
//! once per geometry:
//!
//! - `B₀ = ∫ b* bᵀ dp` — the power Gram matrix (`∫|J|² dp = wᴴB₀w`);
//! - `B₁, B₂, B₃` — block matrices of `∫ g* gᵀ dq` outer products built from
//!   per-point derivative vectors, so every Fisher entry is a quadratic form
//!   `(2/σ²) Re{wᴴ [B]ₘₙ w}`.
//!
//! The position-block CRB is the inverse Schur complement
//! `[F_rr - F_rα F_αα⁻¹ F_rαᵀ]⁻¹`; its trace is the design objective `F(w)`.
//!
//! A second, independent route ([`fim_for_current`]) computes the same
//! information for an arbitrary current by direct quadrature of the
//! derivative products; it backs the baselines and serves as the oracle for
//! the blockwise-trace form.

use nalgebra::{Cholesky, DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write as IoWrite;

use crate::channel::{
    a_r, grad_a_r, kernel_prefactor, reflection_scale, transmit_integrals, CurrentFunction,
};
use crate::geometry::{Scenario, MIN_DISTANCE};
use crate::quadrature::{QuadratureGrid, PAR_CHUNK};
use crate::{Error, Result};

/// Ridge factor applied to a near-singular reflection block before failing.
const FAA_RIDGE: f64 = 1e-12;

/// Unit-modulus transmit basis `b(p)` evaluated from target positions.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub positions: Vec<Vector3<f64>>,
    pub k0: f64,
}

impl SubspaceBasis {
    pub fn from_scenario(scenario: &Scenario) -> Self {
        Self {
            positions: scenario.target_positions(),
            k0: scenario.constants.wavenumber_k0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `b(p)` at aperture point `(x, y)`; every entry has unit modulus.
    pub fn evaluate(&self, x: f64, y: f64) -> DVector<Complex64> {
        let p = Vector3::new(x, y, 0.0);
        DVector::from_iterator(
            self.positions.len(),
            self.positions
                .iter()
                .map(|r| Complex64::from_polar(1.0, self.k0 * (r - p).norm())),
        )
    }
}

/// Transmit-side integral vectors, independent of both `w` and the receive
/// point: row `n` of `b1` is `∫ a_t(kₙ) bᵀ dp`, row `n` of `b2[i]` is
/// `∫ [∇a_t(kₙ)]ᵢ bᵀ dp`.
#[derive(Debug, Clone)]
pub struct BasisIntegrals {
    pub b1: DMatrix<Complex64>,
    pub b2: [DMatrix<Complex64>; 3],
}

pub fn compute_basis_integrals(
    scenario: &Scenario,
    tx_grid: &QuadratureGrid,
) -> Result<BasisIntegrals> {
    let n = scenario.n_targets();
    let basis = SubspaceBasis::from_scenario(scenario);
    let k0 = scenario.constants.wavenumber_k0;
    let pref = kernel_prefactor(&scenario.constants);
    let positions = scenario.target_positions();

    type Acc = (DMatrix<Complex64>, [DMatrix<Complex64>; 3]);
    let zeros = || DMatrix::<Complex64>::zeros(n, n);

    let partials: Vec<Result<Acc>> = tx_grid
        .points
        .par_chunks(PAR_CHUNK)
        .map(|chunk| {
            let mut b1 = zeros();
            let mut b2 = [zeros(), zeros(), zeros()];
            for pt in chunk {
                let p = Vector3::new(pt.x, pt.y, 0.0);
                let b = basis.evaluate(pt.x, pt.y);
                for (m, rm) in positions.iter().enumerate() {
                    let u = rm - p;
                    let r = u.norm();
                    if r < MIN_DISTANCE {
                        return Err(Error::Singularity { distance: r });
                    }
                    let at = pref * Complex64::from_polar(1.0 / r, -k0 * r) * pt.weight;
                    let gs = -pref
                        * Complex64::new(1.0, k0 * r)
                        * Complex64::from_polar(1.0 / (r * r * r), -k0 * r)
                        * pt.weight;
                    let grad = [gs * u.x, gs * u.y, gs * u.z];
                    for col in 0..n {
                        b1[(m, col)] += at * b[col];
                        for i in 0..3 {
                            b2[i][(m, col)] += grad[i] * b[col];
                        }
                    }
                }
            }
            Ok((b1, b2))
        })
        .collect();

    let mut b1 = zeros();
    let mut b2 = [zeros(), zeros(), zeros()];
    for part in partials {
        let (p1, p2) = part?;
        b1 += p1;
        for i in 0..3 {
            b2[i] += &p2[i];
        }
    }
    Ok(BasisIntegrals { b1, b2 })
}

/// Power Gram matrix `B₀ = ∫ b* bᵀ dp`; Hermitian positive definite for
/// distinct targets, with diagonal entries equal to the aperture area.
pub fn compute_b0(scenario: &Scenario, tx_grid: &QuadratureGrid) -> Result<DMatrix<Complex64>> {
    let n = scenario.n_targets();
    let basis = SubspaceBasis::from_scenario(scenario);

    let partials: Vec<DMatrix<Complex64>> = tx_grid
        .points
        .par_chunks(PAR_CHUNK)
        .map(|chunk| {
            let mut acc = DMatrix::<Complex64>::zeros(n, n);
            for pt in chunk {
                let b = basis.evaluate(pt.x, pt.y);
                for a in 0..n {
                    let ca = b[a].conj();
                    for c in 0..n {
                        acc[(a, c)] += ca * b[c] * pt.weight;
                    }
                }
            }
            acc
        })
        .collect();

    let mut b0 = DMatrix::<Complex64>::zeros(n, n);
    for p in partials {
        b0 += p;
    }
    Ok(b0)
}

/// Dense block matrix with `block_rows × block_cols` blocks of size `n × n`.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    pub block_rows: usize,
    pub block_cols: usize,
    pub n: usize,
    blocks: Vec<DMatrix<Complex64>>,
}

impl BlockMatrix {
    fn zeros(block_rows: usize, block_cols: usize, n: usize) -> Self {
        Self {
            block_rows,
            block_cols,
            n,
            blocks: vec![DMatrix::zeros(n, n); block_rows * block_cols],
        }
    }

    pub fn block(&self, m: usize, l: usize) -> &DMatrix<Complex64> {
        &self.blocks[m * self.block_cols + l]
    }

    fn block_mut(&mut self, m: usize, l: usize) -> &mut DMatrix<Complex64> {
        &mut self.blocks[m * self.block_cols + l]
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a += b;
        }
    }
}

/// All cross-integral matrices of one geometry.
#[derive(Debug, Clone)]
pub struct CrossMatrices {
    pub n_targets: usize,
    pub b0: DMatrix<Complex64>,
    /// `3N × 3N` blocks from position-derivative vectors.
    pub b1: BlockMatrix,
    /// `2N × 2N` blocks from reflection-derivative vectors.
    pub b2: BlockMatrix,
    /// `3N × 2N` mixed blocks.
    pub b3: BlockMatrix,
}

/// Per-point derivative coefficient vectors: `g[m]` for position parameters
/// (`m = 3n + i`), `gbar[m]` for reflection parameters (`m = 2n + j`).
type DerivativeVectors = (Vec<DVector<Complex64>>, Vec<DVector<Complex64>>);

fn derivative_vectors(
    q: &Vector3<f64>,
    scenario: &Scenario,
    basis_integrals: &BasisIntegrals,
    receive_phase: Complex64,
    conjugate_model: bool,
) -> Result<DerivativeVectors> {
    let n = scenario.n_targets();
    let s = reflection_scale(n);
    let mut g = Vec::with_capacity(3 * n);
    let mut gbar = Vec::with_capacity(2 * n);

    for (ti, t) in scenario.targets.iter().enumerate() {
        let ar = a_r(q, &t.position, &scenario.constants)? * receive_phase;
        let gr = grad_a_r(q, &t.position, &scenario.constants)?;
        let ar_scaled = s * ar;
        let h4 = ar_scaled * t.reflection;
        for i in 0..3 {
            let h3 = s * t.reflection * gr[i] * receive_phase;
            let row = basis_integrals.b1.row(ti) * h3 + basis_integrals.b2[i].row(ti) * h4;
            g.push(row.transpose());
        }
        // Reflection derivatives carry no reflection factor themselves; the
        // factor j selects the imaginary-part parameter.
        let base = basis_integrals.b1.row(ti).transpose() * ar_scaled;
        gbar.push(base.clone());
        gbar.push(base * Complex64::i());
    }

    if conjugate_model {
        for v in g.iter_mut().chain(gbar.iter_mut()) {
            *v = v.map(|z| z.conj());
        }
    }
    Ok((g, gbar))
}

fn assemble_cross(
    scenario: &Scenario,
    rx_grid: &QuadratureGrid,
    basis_integrals: &BasisIntegrals,
    b0: DMatrix<Complex64>,
    receive_phase: Complex64,
    conjugate_model: bool,
) -> Result<CrossMatrices> {
    let n = scenario.n_targets();
    let (nr, na) = (3 * n, 2 * n);

    type Acc = (BlockMatrix, BlockMatrix, BlockMatrix);
    let partials: Vec<Result<Acc>> = rx_grid
        .points
        .par_chunks(PAR_CHUNK)
        .map(|chunk| {
            let mut b1 = BlockMatrix::zeros(nr, nr, n);
            let mut b2 = BlockMatrix::zeros(na, na, n);
            let mut b3 = BlockMatrix::zeros(nr, na, n);
            for pt in chunk {
                let q = Vector3::new(pt.x, pt.y, 0.0);
                let (g, gbar) =
                    derivative_vectors(&q, scenario, basis_integrals, receive_phase, conjugate_model)?;
                let w = pt.weight;
                for m in 0..nr {
                    for (l, gl) in g.iter().enumerate() {
                        accumulate_outer(b1.block_mut(m, l), &g[m], gl, w);
                    }
                    for (l, gbl) in gbar.iter().enumerate() {
                        accumulate_outer(b3.block_mut(m, l), &g[m], gbl, w);
                    }
                }
                for m in 0..na {
                    for (l, gbl) in gbar.iter().enumerate() {
                        accumulate_outer(b2.block_mut(m, l), &gbar[m], gbl, w);
                    }
                }
            }
            Ok((b1, b2, b3))
        })
        .collect();

    let mut b1 = BlockMatrix::zeros(nr, nr, n);
    let mut b2 = BlockMatrix::zeros(na, na, n);
    let mut b3 = BlockMatrix::zeros(nr, na, n);
    for p in partials {
        let (p1, p2, p3) = p?;
        b1.add_assign(&p1);
        b2.add_assign(&p2);
        b3.add_assign(&p3);
    }
    Ok(CrossMatrices {
        n_targets: n,
        b0,
        b1,
        b2,
        b3,
    })
}

/// `block += weight · conj(u) vᵀ`. The product is formed before the weight
/// so the (m,l) and (l,m) accumulations are exact conjugates in floating
/// point, keeping blockwise Hermitian symmetry bit-exact.
#[inline]
fn accumulate_outer(
    block: &mut DMatrix<Complex64>,
    u: &DVector<Complex64>,
    v: &DVector<Complex64>,
    weight: f64,
) {
    let n = u.len();
    for a in 0..n {
        let ua = u[a].conj();
        for b in 0..n {
            block[(a, b)] += ua * v[b] * weight;
        }
    }
}

/// Fill `B₁`–`B₃` in a single pass over the receive grid.
pub fn compute_cross_matrices(
    scenario: &Scenario,
    rx_grid: &QuadratureGrid,
    basis_integrals: &BasisIntegrals,
    b0: DMatrix<Complex64>,
) -> Result<CrossMatrices> {
    assemble_cross(
        scenario,
        rx_grid,
        basis_integrals,
        b0,
        Complex64::new(1.0, 0.0),
        false,
    )
}

impl CrossMatrices {
    /// Convenience: compute basis integrals, `B₀`, and all cross matrices.
    pub fn assemble(
        scenario: &Scenario,
        tx_grid: &QuadratureGrid,
        rx_grid: &QuadratureGrid,
    ) -> Result<Self> {
        let basis_integrals = compute_basis_integrals(scenario, tx_grid)?;
        let b0 = compute_b0(scenario, tx_grid)?;
        compute_cross_matrices(scenario, rx_grid, &basis_integrals, b0)
    }
}

/// Real Fisher-information blocks for the parameter vector
/// `[positions (3N); Re/Im reflections (2N)]`.
#[derive(Debug, Clone)]
pub struct FimBlocks {
    pub f_rr: DMatrix<f64>,
    pub f_ra: DMatrix<f64>,
    pub f_aa: DMatrix<f64>,
}

impl FimBlocks {
    /// Assemble the full `5N × 5N` information matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let nr = self.f_rr.nrows();
        let na = self.f_aa.nrows();
        let mut f = DMatrix::<f64>::zeros(nr + na, nr + na);
        f.view_mut((0, 0), (nr, nr)).copy_from(&self.f_rr);
        f.view_mut((0, nr), (nr, na)).copy_from(&self.f_ra);
        f.view_mut((nr, 0), (na, nr))
            .copy_from(&self.f_ra.transpose());
        f.view_mut((nr, nr), (na, na)).copy_from(&self.f_aa);
        f
    }
}

#[inline]
fn quad_form(w: &DVector<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let n = w.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for c in 0..n {
            row += b[(a, c)] * w[c];
        }
        acc += w[a].conj() * row;
    }
    acc
}

/// Fisher blocks for a general Hermitian PSD weight matrix `W`:
/// each entry is `(2/σ²) Re{Tr{W [B]ₘₙ}}`.
pub fn fim_blocks(
    w_mat: &DMatrix<Complex64>,
    cross: &CrossMatrices,
    noise_power: f64,
) -> Result<FimBlocks> {
    let n = cross.n_targets;
    if w_mat.nrows() != n || w_mat.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "weight matrix must be {n}x{n}, got {}x{}",
            w_mat.nrows(),
            w_mat.ncols()
        )));
    }
    let scale = 2.0 / noise_power;
    let entry = |b: &DMatrix<Complex64>| (w_mat * b).trace().re * scale;

    let (nr, na) = (3 * n, 2 * n);
    let f_rr = DMatrix::from_fn(nr, nr, |m, l| entry(cross.b1.block(m, l)));
    let f_aa = DMatrix::from_fn(na, na, |m, l| entry(cross.b2.block(m, l)));
    let f_ra = DMatrix::from_fn(nr, na, |m, l| entry(cross.b3.block(m, l)));
    Ok(FimBlocks { f_rr, f_ra, f_aa })
}

/// Fisher blocks for the rank-one weight matrix `w wᴴ` (the subspace current
/// `J = bᵀw`); avoids materializing `W`.
pub fn fim_blocks_for_weights(
    w: &DVector<Complex64>,
    cross: &CrossMatrices,
    noise_power: f64,
) -> Result<FimBlocks> {
    let n = cross.n_targets;
    if w.len() != n {
        return Err(Error::InvalidArgument(format!(
            "weight vector must have length {n}, got {}",
            w.len()
        )));
    }
    let scale = 2.0 / noise_power;
    let entry = |b: &DMatrix<Complex64>| quad_form(w, b).re * scale;

    let (nr, na) = (3 * n, 2 * n);
    let f_rr = DMatrix::from_fn(nr, nr, |m, l| entry(cross.b1.block(m, l)));
    let f_aa = DMatrix::from_fn(na, na, |m, l| entry(cross.b2.block(m, l)));
    let f_ra = DMatrix::from_fn(nr, na, |m, l| entry(cross.b3.block(m, l)));
    Ok(FimBlocks { f_rr, f_ra, f_aa })
}

/// Trace of the position-block CRB, with a note when the reflection block
/// needed ridge regularization.
#[derive(Debug, Clone, Copy)]
pub struct CrbTrace {
    pub value: f64,
    pub faa_regularized: bool,
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Factor the reflection block, applying the ridge once if needed.
fn factor_faa(f_aa: &DMatrix<f64>) -> Result<(Cholesky<f64, nalgebra::Dyn>, bool)> {
    if let Some(chol) = Cholesky::new(symmetrize(f_aa.clone())) {
        return Ok((chol, false));
    }
    let ridge = FAA_RIDGE * f_aa.trace();
    let mut ridged = symmetrize(f_aa.clone());
    for i in 0..ridged.nrows() {
        ridged[(i, i)] += ridge;
    }
    match Cholesky::new(ridged) {
        Some(chol) => Ok((chol, true)),
        None => Err(Error::Unidentifiable(
            "reflection-coefficient information block is singular".into(),
        )),
    }
}

/// Position-block CRB trace from precomputed Fisher blocks:
/// `Tr{[F_rr - F_rα F_αα⁻¹ F_rαᵀ]⁻¹}` via symmetric factorizations.
pub fn crb_trace_from_blocks(blocks: &FimBlocks) -> Result<CrbTrace> {
    let (chol_aa, faa_regularized) = factor_faa(&blocks.f_aa)?;
    let l = chol_aa.solve(&blocks.f_ra.transpose());
    let k = symmetrize(&blocks.f_rr - &blocks.f_ra * &l);
    let chol_k = Cholesky::new(k).ok_or_else(|| {
        Error::Unidentifiable("position-information Schur complement is singular".into())
    })?;
    let value = chol_k.inverse().trace();
    Ok(CrbTrace {
        value,
        faa_regularized,
    })
}

/// The design objective `F(w) = Tr{CRB}` for a subspace weight vector.
pub fn crb_trace(
    w: &DVector<Complex64>,
    cross: &CrossMatrices,
    noise_power: f64,
) -> Result<CrbTrace> {
    crb_trace_from_blocks(&fim_blocks_for_weights(w, cross, noise_power)?)
}

/// Analytic Euclidean gradient of `F(w) = Tr{K(w)⁻¹}` with
/// `K = F_rr - F_rα F_αα⁻¹ F_rαᵀ`, in the convention
/// `F(w + δ) ≈ F(w) + 2 Re{gᴴ δ}`.
///
/// Every Fisher entry is `(2/σ²) Re{wᴴ B w}`, whose Wirtinger derivative is
/// `(2/σ²) ((B + Bᴴ)/2) w`; the entry sensitivities of `Tr{K⁻¹}` follow from
/// `d Tr{K⁻¹} = -Tr{K⁻² dK}`.
pub fn euclidean_grad_f(
    w: &DVector<Complex64>,
    cross: &CrossMatrices,
    noise_power: f64,
) -> Result<DVector<Complex64>> {
    let n = cross.n_targets;
    let blocks = fim_blocks_for_weights(w, cross, noise_power)?;
    let (chol_aa, _) = factor_faa(&blocks.f_aa)?;
    let l = chol_aa.solve(&blocks.f_ra.transpose()); // F_αα⁻¹ F_rαᵀ, 2N×3N
    let k = symmetrize(&blocks.f_rr - &blocks.f_ra * &l);
    let chol_k = Cholesky::new(k).ok_or_else(|| {
        Error::Unidentifiable("position-information Schur complement is singular".into())
    })?;
    let kinv = chol_k.inverse();
    let s = &kinv * &kinv; // K⁻², symmetric

    // Entry sensitivities: ∂F/∂F_rr = -S, ∂F/∂F_rα = 2 S Lᵀ, ∂F/∂F_αα = -L S Lᵀ.
    let g_rr = -&s;
    let g_ra = 2.0 * &s * l.transpose();
    let g_aa = -(&l * &s * l.transpose());

    let (nr, na) = (3 * n, 2 * n);
    let mut m_sum = DMatrix::<Complex64>::zeros(n, n);
    let mut add_block = |coeff: f64, b: &DMatrix<Complex64>| {
        // coeff · (B + Bᴴ)/2
        let herm = (b + b.adjoint()) * Complex64::new(0.5 * coeff, 0.0);
        m_sum += herm;
    };
    for m in 0..nr {
        for l2 in 0..nr {
            add_block(g_rr[(m, l2)], cross.b1.block(m, l2));
        }
        for l2 in 0..na {
            add_block(g_ra[(m, l2)], cross.b3.block(m, l2));
        }
    }
    for m in 0..na {
        for l2 in 0..na {
            add_block(g_aa[(m, l2)], cross.b2.block(m, l2));
        }
    }

    Ok(&m_sum * w * Complex64::new(2.0 / noise_power, 0.0))
}

/// Fisher blocks for an arbitrary probing current by direct quadrature of
/// the derivative products over the receive grid. Independent of the
/// blockwise-trace route: no cross matrices are involved.
pub fn fim_for_current(
    current: &CurrentFunction,
    scenario: &Scenario,
    tx_grid: &QuadratureGrid,
    rx_grid: &QuadratureGrid,
) -> Result<FimBlocks> {
    let n = scenario.n_targets();
    let ti = transmit_integrals(current, &scenario.targets, &scenario.constants, tx_grid)?;
    let s = reflection_scale(n);
    let (nr, na) = (3 * n, 2 * n);

    type Acc = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>);
    let partials: Vec<Result<Acc>> = rx_grid
        .points
        .par_chunks(PAR_CHUNK)
        .map(|chunk| {
            let mut f_rr = DMatrix::<f64>::zeros(nr, nr);
            let mut f_ra = DMatrix::<f64>::zeros(nr, na);
            let mut f_aa = DMatrix::<f64>::zeros(na, na);
            let mut d_r = vec![Complex64::new(0.0, 0.0); nr];
            let mut d_a = vec![Complex64::new(0.0, 0.0); na];
            for pt in chunk {
                let q = Vector3::new(pt.x, pt.y, 0.0);
                for (t_idx, t) in scenario.targets.iter().enumerate() {
                    let ar = a_r(&q, &t.position, &scenario.constants)?;
                    let gr = grad_a_r(&q, &t.position, &scenario.constants)?;
                    let base = s * t.reflection;
                    for i in 0..3 {
                        d_r[3 * t_idx + i] = base * (gr[i] * ti.i1[t_idx] + ar * ti.i2[t_idx][i]);
                    }
                    let da = s * ar * ti.i1[t_idx];
                    d_a[2 * t_idx] = da;
                    d_a[2 * t_idx + 1] = da * Complex64::i();
                }
                let w = pt.weight;
                for m in 0..nr {
                    for l in 0..nr {
                        f_rr[(m, l)] += w * (d_r[m] * d_r[l].conj()).re;
                    }
                    for l in 0..na {
                        f_ra[(m, l)] += w * (d_r[m] * d_a[l].conj()).re;
                    }
                }
                for m in 0..na {
                    for l in 0..na {
                        f_aa[(m, l)] += w * (d_a[m] * d_a[l].conj()).re;
                    }
                }
            }
            Ok((f_rr, f_ra, f_aa))
        })
        .collect();

    let mut f_rr = DMatrix::<f64>::zeros(nr, nr);
    let mut f_ra = DMatrix::<f64>::zeros(nr, na);
    let mut f_aa = DMatrix::<f64>::zeros(na, na);
    for p in partials {
        let (p1, p2, p3) = p?;
        f_rr += p1;
        f_ra += p2;
        f_aa += p3;
    }
    let scale = 2.0 / scenario.noise_power;
    Ok(FimBlocks {
        f_rr: f_rr * scale,
        f_ra: f_ra * scale,
        f_aa: f_aa * scale,
    })
}

/// `Tr{CRB}` achieved by an arbitrary probing current.
pub fn crb_trace_for_current(
    current: &CurrentFunction,
    scenario: &Scenario,
    tx_grid: &QuadratureGrid,
    rx_grid: &QuadratureGrid,
) -> Result<CrbTrace> {
    crb_trace_from_blocks(&fim_for_current(current, scenario, tx_grid, rx_grid)?)
}

/// Dump `B₀`–`B₃` as CSV for cross-implementation comparison.
///
/// Format: a comment line documenting the layout, a header row, then one row
/// per complex entry as
/// `matrix,block_row,block_col,row,col,re,im` (blocks in row-major order,
/// entries in row-major order; `B₀` uses block indices 0,0).
pub fn write_cross_matrices_csv<W: IoWrite>(cross: &CrossMatrices, out: &mut W) -> Result<()> {
    writeln!(
        out,
        "# cross-integral matrices; N={}; B1 {}x{} blocks, B2 {}x{}, B3 {}x{}; each block {0}x{0} row-major",
        cross.n_targets,
        cross.b1.block_rows,
        cross.b1.block_cols,
        cross.b2.block_rows,
        cross.b2.block_cols,
        cross.b3.block_rows,
        cross.b3.block_cols,
    )?;
    writeln!(out, "matrix,block_row,block_col,row,col,re,im")?;
    let dump_block = |name: &str, bm: usize, bl: usize, b: &DMatrix<Complex64>, out: &mut W| {
        for r in 0..b.nrows() {
            for c in 0..b.ncols() {
                let z = b[(r, c)];
                writeln!(out, "{name},{bm},{bl},{r},{c},{:.17e},{:.17e}", z.re, z.im)?;
            }
        }
        std::io::Result::Ok(())
    };
    dump_block("B0", 0, 0, &cross.b0, out)?;
    for m in 0..cross.b1.block_rows {
        for l in 0..cross.b1.block_cols {
            dump_block("B1", m, l, cross.b1.block(m, l), out)?;
        }
    }
    for m in 0..cross.b2.block_rows {
        for l in 0..cross.b2.block_cols {
            dump_block("B2", m, l, cross.b2.block(m, l), out)?;
        }
    }
    for m in 0..cross.b3.block_rows {
        for l in 0..cross.b3.block_cols {
            dump_block("B3", m, l, cross.b3.block(m, l), out)?;
        }
    }
    Ok(())
}

/// Path wrapper around [`write_cross_matrices_csv`].
pub fn dump_cross_matrices_csv(cross: &CrossMatrices, path: &std::path::Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_cross_matrices_csv(cross, &mut file)
}
