//! Linearized operators around a ground state and their kernel structure.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HartreeError, Result};
use crate::grid::{barycenter, gradient, mass, radial_derivative, shell_average, Field};
use crate::operators::{
    apply_multiplier, apply_symbol_fn, coulomb_potential, hartree_potential, MultiplierSymbol,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LinearFamily {
    /// Around `Q_∞` with `λ > 0`.
    Limit { lambda: f64, m: f64 },
    /// Around `Q_c` with the multiplier `μ_c` of `H̄_c Q − Φ[Q²]Q = μ_c Q`.
    Relativistic { mu: f64, m: f64, c: f64 },
}

/// Base state, its potential and the coupling constants.
#[derive(Debug, Clone)]
pub struct LinearizedContext {
    pub family: LinearFamily,
    pub base: Field,
    pub k1: f64,
    pub k2: f64,
    phi: Field,
}

impl LinearizedContext {
    /// Context for `L₊` around `Q_∞`.
    pub fn limit(base: Field, lambda: f64, m: f64) -> Result<Self> {
        Self::build(LinearFamily::Limit { lambda, m }, base, 1.0, 0.0)
    }

    /// Context for `𝓛_{k₁,k₂}` around `Q_c`.
    pub fn relativistic(base: Field, mu: f64, m: f64, c: f64, k1: f64, k2: f64) -> Result<Self> {
        Self::build(LinearFamily::Relativistic { mu, m, c }, base, k1, k2)
    }

    fn build(family: LinearFamily, base: Field, k1: f64, k2: f64) -> Result<Self> {
        let mm = mass(&base);
        if (mm - 1.0).abs() > 1e-10 {
            return Err(HartreeError::InvalidParameter(format!(
                "base state has mass {mm}, expected 1"
            )));
        }
        if !(k1 >= 0.0) || !k2.is_finite() {
            return Err(HartreeError::InvalidParameter("need k1 >= 0 and finite k2".into()));
        }
        let (m, ok) = match family {
            LinearFamily::Limit { lambda, m } => (m, lambda > 0.0),
            LinearFamily::Relativistic { mu, m, c } => (m, c > 0.0 && mu.is_finite()),
        };
        if !(m > 0.0) || !ok {
            return Err(HartreeError::InvalidParameter(format!("bad parameters {family:?}")));
        }
        let phi = hartree_potential(&base);
        Ok(Self { family, base, k1, k2, phi })
    }

    /// `Φ[Q²]`
    pub fn potential(&self) -> &Field {
        &self.phi
    }

    fn limit_params(&self) -> Result<(f64, f64)> {
        match self.family {
            LinearFamily::Limit { lambda, m } => Ok((lambda, m)),
            _ => Err(HartreeError::InvalidParameter("operation needs the limit family".into())),
        }
    }

    /// `2Φ[Qξ]Q`
    fn exchange(&self, xi: &Field) -> Field {
        coulomb_potential(&self.base.mul(xi)).mul(&self.base).scale(2.0)
    }
}

/// `L₊ξ = (−Δ/2m + λ − Φ[Q²])ξ − 2Φ[Qξ]Q`.
pub fn apply_lplus(ctx: &LinearizedContext, xi: &Field) -> Result<Field> {
    let (lambda, m) = ctx.limit_params()?;
    ctx.base.ensure_same_grid(xi)?;
    let t = apply_multiplier(&MultiplierSymbol::Nonrelativistic { m }, xi);
    Ok(t.add_scaled(lambda, xi)
        .add_scaled(-1.0, &ctx.phi.mul(xi))
        .add_scaled(-1.0, &ctx.exchange(xi)))
}

/// `𝓛ξ = H̄_c ξ − Φ[Q_c²]ξ − 2k₁Φ[Q_c ξ]Q_c − k₂Q_c`.
pub fn apply_lk1k2(ctx: &LinearizedContext, xi: &Field) -> Result<Field> {
    let LinearFamily::Relativistic { m, c, .. } = ctx.family else {
        return Err(HartreeError::InvalidParameter("operation needs the relativistic family".into()));
    };
    ctx.base.ensure_same_grid(xi)?;
    let mut out = apply_multiplier(&MultiplierSymbol::Relativistic { m, c }, xi)
        .add_scaled(-1.0, &ctx.phi.mul(xi));
    if ctx.k1 != 0.0 {
        out = out.add_scaled(-ctx.k1, &ctx.exchange(xi));
    }
    Ok(out.add_scaled(-ctx.k2, &ctx.base))
}

/// `x·∇Q + 2Q` with `x` measured from the density barycenter.
pub fn dilation_mode(q: &Field) -> Field {
    radial_derivative(q, barycenter(q)).add_scaled(2.0, q)
}

/// `‖L₊(x·∇Q + 2Q) + 2λQ‖ / ‖Q‖`.
pub fn lemma31_residual(ctx: &LinearizedContext) -> Result<f64> {
    lemma31_residual_with(ctx, ctx.limit_params()?.0)
}

/// The same residual with `λ` replaced in the right-hand side only.
pub fn lemma31_residual_with(ctx: &LinearizedContext, lambda: f64) -> Result<f64> {
    let v = dilation_mode(&ctx.base);
    let r = apply_lplus(ctx, &v)?.add_scaled(2.0 * lambda, &ctx.base);
    Ok(r.norm_l2() / ctx.base.norm_l2())
}

/// Eigenpairs of `L₊` closest to zero, with kernel diagnostics.
#[derive(Debug, Clone)]
pub struct KernelReport {
    /// Sorted by absolute value.
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<Field>,
    pub kernel_count: usize,
    pub kernel_tolerance: f64,
    /// `Σσᵢ²/max(count, 3)` over the principal cosines between the numerical
    /// kernel and `span{∂ᵢQ}`; 1 means identical spans.
    pub span_overlap: f64,
    pub iterations: usize,
    pub inconclusive: bool,
}

/// JSON form of a [`KernelReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub eigenvalues: Vec<f64>,
    pub kernel_count: usize,
    pub span_overlap: f64,
}

impl KernelReport {
    pub fn summary(&self) -> EigenReport {
        EigenReport {
            eigenvalues: self.eigenvalues.clone(),
            kernel_count: self.kernel_count,
            span_overlap: self.span_overlap,
        }
    }
}

/// Which trial space the probe iterates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sector {
    Full,
    /// Fields constant on lattice shells about the origin.
    Radial,
}

fn orthonormalize(vs: &mut Vec<Field>) {
    let mut out: Vec<Field> = Vec::with_capacity(vs.len());
    for v in vs.drain(..) {
        let mut w = v;
        for _ in 0..2 {
            for b in &out {
                let p = w.dot(b);
                w = w.add_scaled(-p, b);
            }
        }
        let nrm = w.norm_l2();
        if nrm > 1e-12 {
            out.push(w.scale(1.0 / nrm));
        }
    }
    *vs = out;
}

fn gram(a: &[Field], b: &[Field]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| a[i].dot(&b[j]))
}

fn combine(basis: &[Field], coeffs: &DMatrix<f64>, col: usize) -> Field {
    let mut acc = Field::zeros(basis[0].grid());
    for (i, b) in basis.iter().enumerate() {
        acc = acc.add_scaled(coeffs[(i, col)], b);
    }
    acc
}

/// Lowest-|eigenvalue| eigenpairs of `L₊`.
///
/// With `P = (−Δ/2m + λ)⁻¹` the kernel of `L₊` is the eigenvalue-one space
/// of the compact positive operator `K = P^{½}(Φ[Q²] + 2Φ[Q·]Q)P^{½}`. A block
/// of `n_eigs + 2` vectors is driven by subspace iteration on `K`, then
/// `L₊` is Rayleigh–Ritz projected onto `P^{½}` of the block. The kernel
/// tolerance is `1e-4·λ`.
pub fn kernel_probe(
    ctx: &LinearizedContext,
    n_eigs: usize,
    sector: Sector,
    seed: u64,
) -> Result<KernelReport> {
    let (lambda, m) = ctx.limit_params()?;
    if n_eigs > 10 {
        return Err(HartreeError::InvalidParameter("n_eigs must be at most 10".into()));
    }
    let tol = 1e-4 * lambda;
    if n_eigs == 0 {
        return Ok(KernelReport {
            eigenvalues: vec![],
            vectors: vec![],
            kernel_count: 0,
            kernel_tolerance: tol,
            span_overlap: 0.0,
            iterations: 0,
            inconclusive: false,
        });
    }
    let grid = ctx.base.grid().clone();
    let project = |f: Field| match sector {
        Sector::Full => f,
        Sector::Radial => shell_average(&f),
    };
    let half = |f: &Field| apply_symbol_fn(f, |k2| 1.0 / (k2 / (2.0 * m) + lambda).sqrt());
    let apply_k = |eta: &Field| {
        let xi = project(half(eta));
        let w = ctx.phi.mul(&xi).add_scaled(1.0, &ctx.exchange(&xi));
        project(half(&w))
    };

    let block = n_eigs + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Field> = (0..block)
        .map(|_| {
            let noise: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let noise = Field::new(grid.clone(), noise).expect("finite noise");
            project(noise.mul(&ctx.base.map(|v| v.abs().sqrt())))
        })
        .collect();
    orthonormalize(&mut basis);

    let mut prev: Vec<f64> = vec![f64::INFINITY; block];
    let mut iterations = 0;
    let mut inconclusive = true;
    for it in 1..=400 {
        iterations = it;
        let images: Vec<Field> = basis.iter().map(&apply_k).collect();
        // Ritz step on K keeps the block sorted and accelerates convergence
        let h = gram(&basis, &images);
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..basis.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let nu: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut next: Vec<Field> = order.iter().map(|&i| combine(&images, &eig.eigenvectors, i)).collect();
        orthonormalize(&mut next);
        basis = next;
        let change = nu
            .iter()
            .zip(&prev)
            .take(n_eigs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prev = nu;
        if change < 1e-11 {
            inconclusive = false;
            break;
        }
    }

    // Rayleigh–Ritz for L₊ on ξ = P^{½}η
    let xis: Vec<Field> = basis.iter().map(|b| project(half(b))).collect();
    let lxs: Vec<Field> = xis.iter().map(|x| apply_lplus(ctx, x)).collect::<Result<_>>()?;
    let a = gram(&xis, &lxs);
    let a = (&a + a.transpose()) * 0.5;
    let b = gram(&xis, &xis);
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| HartreeError::InvalidParameter("degenerate probe block".into()))?;
    let linv = chol.l().try_inverse().expect("triangular factor is invertible");
    let c = &linv * &a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let coeffs = linv.transpose() * &eig.eigenvectors;
    let mut order: Vec<usize> = (0..xis.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].abs().total_cmp(&eig.eigenvalues[j].abs()));
    order.truncate(n_eigs);
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors: Vec<Field> = order.iter().map(|&i| combine(&xis, &coeffs, i)).collect();

    let mut kernel: Vec<Field> = eigenvalues
        .iter()
        .zip(&vectors)
        .filter(|(e, _)| e.abs() <= tol)
        .map(|(_, v)| v.clone())
        .collect();
    let kernel_count = kernel.len();
    let span_overlap = if kernel_count == 0 {
        0.0
    } else {
        let mut trans: Vec<Field> = gradient(&ctx.base).into_iter().collect();
        orthonormalize(&mut trans);
        orthonormalize(&mut kernel);
        let g = gram(&kernel, &trans);
        g.iter().map(|v| v * v).sum::<f64>() / kernel_count.max(3) as f64
    };
    Ok(KernelReport {
        eigenvalues,
        vectors,
        kernel_count,
        kernel_tolerance: tol,
        span_overlap,
        iterations,
        inconclusive,
    })
}

/// Decomposition of a normalized difference of two states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferenceMode {
    /// Coefficient of `x·∇Q + 2Q`.
    pub b0: f64,
    /// Coefficients of `∂ᵢQ`.
    pub translation: [f64; 3],
    /// `‖w − projection‖₂ / ‖w‖₂`
    pub remainder_norm: f64,
    /// `∫∇w·∇Q`
    pub gradient_pairing: f64,
}

/// `w = (Q_a − Q_b)/‖Q_a − Q_b‖_∞`.
pub fn difference_mode(qa: &Field, qb: &Field) -> Result<Field> {
    qa.ensure_same_grid(qb)?;
    let d = qa.add_scaled(-1.0, qb);
    let s = d.norm_linf();
    if s <= 1e-14 {
        return Err(HartreeError::DegenerateDifference);
    }
    Ok(d.scale(1.0 / s))
}

/// Least-squares split of `w` over `{x·∇Q+2Q, ∂₁Q, ∂₂Q, ∂₃Q}`.
pub fn difference_mode_report(
    qa: &Field,
    qb: &Field,
    ctx: &LinearizedContext,
) -> Result<DifferenceMode> {
    let w = difference_mode(qa, qb)?;
    w.ensure_same_grid(&ctx.base)?;
    let [g1, g2, g3] = gradient(&ctx.base);
    let basis = [dilation_mode(&ctx.base), g1, g2, g3];
    let gm = DMatrix::from_fn(4, 4, |i, j| basis[i].dot(&basis[j]));
    let rhs = DMatrix::from_fn(4, 1, |i, _| basis[i].dot(&w));
    let coef = gm
        .lu()
        .solve(&rhs)
        .ok_or_else(|| HartreeError::InvalidParameter("singular mode basis".into()))?;
    let mut fit = Field::zeros(w.grid());
    for (i, b) in basis.iter().enumerate() {
        fit = fit.add_scaled(coef[i], b);
    }
    let rem = w.add_scaled(-1.0, &fit).norm_l2() / w.norm_l2();
    let gw = gradient(&w);
    let gq = gradient(&ctx.base);
    let pairing = (0..3).map(|a| gw[a].dot(&gq[a])).sum();
    Ok(DifferenceMode {
        b0: coef[0],
        translation: [coef[1], coef[2], coef[3]],
        remainder_norm: rem,
        gradient_pairing: pairing,
    })
}

/// `k₂ = (μ₁ − μ₂)/‖Q₁ − Q₂‖_∞` via the explicit pairing
/// `−½∫{Φ[Q₁²](Q₁+Q₂)w + Φ[(Q₁+Q₂)w]Q₂²}`.
pub fn k2_from_pair(q1: &Field, q2: &Field) -> Result<f64> {
    let w = difference_mode(q1, q2)?;
    let s = q1.add_scaled(1.0, q2);
    let sw = s.mul(&w);
    let a = hartree_potential(q1).dot(&sw);
    let b = coulomb_potential(&sw).dot(&q2.mul(q2));
    Ok(-0.5 * (a + b))
}

/// Residual of `𝓛_{1,k₂} w = μ₂ w` with `𝓛` built on `Q₁`, relative to
/// `‖w‖`. The exact difference equation has `Φ[(Q₁+Q₂)w]Q₂` in place of
/// `2Φ[Q₁w]Q₁`, so the residual is first order in `‖Q₁ − Q₂‖`.
pub fn difference_equation_residual(
    q1: &Field,
    q2: &Field,
    mu2: f64,
    m: f64,
    c: f64,
    mu1: f64,
) -> Result<f64> {
    let k2 = k2_from_pair(q1, q2)?;
    let ctx = LinearizedContext::relativistic(q1.clone(), mu1, m, c, 1.0, k2)?;
    let w = difference_mode(q1, q2)?;
    let r = apply_lk1k2(&ctx, &w)?.add_scaled(-mu2, &w);
    Ok(r.norm_l2() / w.norm_l2())
}
