//! Periodic cubic lattice, sampled fields and spectral transforms.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{HartreeError, Result};
use crate::fft::{Fft3, PaddedConvolver, C64};
use crate::par;

/// Cubic box `[-L, L)³` sampled with `n` points per axis.
///
/// Holds the FFT plans for its size and lazily builds the padded Coulomb
/// convolver, so it is shared behind an `Arc`.
pub struct GridSpec {
    half_width: f64,
    n: usize,
    spacing: f64,
    fft: Fft3,
    coulomb: OnceLock<PaddedConvolver>,
}

impl fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("half_width", &self.half_width)
            .field("n", &self.n)
            .field("spacing", &self.spacing)
            .finish()
    }
}

/// Sizes accepted per axis: `2^k` or `3·2^k`, at least 8.
pub fn is_valid_size(n: usize) -> bool {
    n >= 8 && (n.is_power_of_two() || (n % 3 == 0 && (n / 3).is_power_of_two()))
}

/// Build a grid. `n` must be `2^k` or `3·2^k` and no smaller than 8.
pub fn make_grid(half_width: f64, points_per_dim: usize) -> Result<Arc<GridSpec>> {
    if !(half_width.is_finite() && half_width > 0.0) {
        return Err(HartreeError::Sizing(format!("half width {half_width} must be positive")));
    }
    if !is_valid_size(points_per_dim) {
        return Err(HartreeError::Sizing(format!(
            "points per dimension {points_per_dim} must be 2^k or 3*2^k and >= 8"
        )));
    }
    Ok(Arc::new(GridSpec {
        half_width,
        n: points_per_dim,
        spacing: 2.0 * half_width / points_per_dim as f64,
        fft: Fft3::new(points_per_dim),
        coulomb: OnceLock::new(),
    }))
}

impl GridSpec {
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Quadrature weight of one sample.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing
    }

    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.split(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Index of the sample at the origin along each axis.
    pub fn origin_index(&self) -> usize {
        self.n / 2
    }

    /// Signed integer wavenumber for FFT bin `j`, in `-n/2..n/2`.
    #[inline]
    pub fn signed_index(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Lattice spacing in wavenumber space, `π/L`.
    pub fn dk(&self) -> f64 {
        PI / self.half_width
    }

    #[inline]
    pub fn wavenumber(&self, j: usize) -> f64 {
        self.dk() * self.signed_index(j) as f64
    }

    #[inline]
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.split(idx);
        [self.wavenumber(i), self.wavenumber(j), self.wavenumber(k)]
    }

    #[inline]
    pub fn k_squared(&self, idx: usize) -> f64 {
        let [a, b, c] = self.wavevector(idx);
        a * a + b * b + c * c
    }

    /// Whether bin `j` is the unpaired Nyquist bin.
    #[inline]
    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// All wavevectors in FFT storage order.
    pub fn wavenumbers(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.wavevector(i)).collect()
    }

    pub(crate) fn fft(&self) -> &Fft3 {
        &self.fft
    }

    /// Convolver for `1/|x|` truncated at radius `2L` on the `(2n)³` lattice.
    pub(crate) fn coulomb(&self) -> &PaddedConvolver {
        self.coulomb.get_or_init(|| {
            let big = 2 * self.n;
            let l = self.half_width;
            let dk = PI / (2.0 * l);
            let norm = 1.0 / (big as f64).powi(3);
            PaddedConvolver::new(self.n, move |j2| {
                if j2 == 0.0 {
                    8.0 * PI * l * l * norm
                } else {
                    let k = dk * j2.sqrt();
                    let s = (l * k).sin();
                    8.0 * PI * s * s / (k * k) * norm
                }
            })
        })
    }

    /// Unnormalized forward transform of a real array.
    pub(crate) fn to_spectral(&self, values: &[f64]) -> Vec<C64> {
        let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.fft.forward(&mut buf);
        buf
    }

    /// Unnormalized forward transform of `a + i b`.
    pub(crate) fn to_spectral_pair(&self, a: &[f64], b: &[f64]) -> Vec<C64> {
        let mut buf: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| C64::new(x, y)).collect();
        self.fft.forward(&mut buf);
        buf
    }

    /// Inverse transform including the `1/n³` factor, in place.
    pub(crate) fn from_spectral(&self, buf: &mut [C64]) {
        self.fft.inverse(buf);
        let s = 1.0 / self.len() as f64;
        par::for_each_mut(buf, |_, v| *v *= s);
    }
}

/// A real scalar sampled on a grid.
#[derive(Clone)]
pub struct Field {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("mass", &mass(self))
            .finish()
    }
}

impl Field {
    pub fn new(grid: Arc<GridSpec>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(HartreeError::Sizing(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(HartreeError::DegenerateField(format!("non-finite value at index {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Trusted constructor for values produced by this crate.
    pub(crate) fn from_vec(grid: Arc<GridSpec>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: &Arc<GridSpec>) -> Self {
        Self::from_vec(grid.clone(), vec![0.0; grid.len()])
    }

    /// Sample `f(x, y, z)` at every grid point.
    pub fn from_fn<F>(grid: &Arc<GridSpec>, f: F) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Sync + Send,
    {
        let g = grid.clone();
        let mut v = vec![0.0; grid.len()];
        par::for_each_mut(&mut v, |i, x| {
            let [a, b, c] = g.position(i);
            *x = f(a, b, c);
        });
        Self::from_vec(grid.clone(), v)
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map<F: Fn(f64) -> f64 + Sync + Send>(&self, f: F) -> Field {
        let mut v = self.values.clone();
        par::for_each_mut(&mut v, |_, x| *x = f(*x));
        Field::from_vec(self.grid.clone(), v)
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &Field) -> Field {
        self.check(other);
        let mut v = self.values.clone();
        let o = &other.values;
        par::for_each_mut(&mut v, |i, x| *x += a * o[i]);
        Field::from_vec(self.grid.clone(), v)
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|x| a * x)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Field {
        self.check(other);
        let mut v = self.values.clone();
        let o = &other.values;
        par::for_each_mut(&mut v, |i, x| *x *= o[i]);
        Field::from_vec(self.grid.clone(), v)
    }

    /// L² inner product with cell-volume weights.
    pub fn dot(&self, other: &Field) -> f64 {
        self.check(other);
        let (a, b) = (&self.values, &other.values);
        par::sum(a.len(), |i| a[i] * b[i]) * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> f64 {
        mass(self).sqrt()
    }

    pub fn norm_linf(&self) -> f64 {
        let v = &self.values;
        par::max(v.len(), |i| v[i].abs())
    }

    pub fn max_value(&self) -> f64 {
        let v = &self.values;
        par::max(v.len(), |i| v[i])
    }

    pub fn min_value(&self) -> f64 {
        let v = &self.values;
        -par::max(v.len(), |i| -v[i])
    }

    /// Value at the sample nearest the origin.
    pub fn at_origin(&self) -> f64 {
        let o = self.grid.origin_index();
        let n = self.grid.points_per_dim();
        self.values[(o * n + o) * n + o]
    }

    fn check(&self, other: &Field) {
        assert!(self.grid.same_as(&other.grid), "fields live on different grids");
    }

    pub(crate) fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(HartreeError::GridMismatch)
        }
    }
}

/// `Σ u² h³`.
pub fn mass(u: &Field) -> f64 {
    let v = &u.values;
    par::sum(v.len(), |i| v[i] * v[i]) * u.grid.cell_volume()
}

/// Rescale `u` to the given mass.
pub fn normalize(u: &Field, target_mass: f64) -> Result<Field> {
    if !(target_mass > 0.0 && target_mass.is_finite()) {
        return Err(HartreeError::InvalidParameter(format!(
            "target mass {target_mass} must be positive"
        )));
    }
    let m = mass(u);
    if !(m > 0.0) {
        return Err(HartreeError::DegenerateField("cannot normalize a zero-mass field".into()));
    }
    Ok(u.scale((target_mass / m).sqrt()))
}

/// Unitary forward transform: `û_k = n^{-3/2} Σ u_j e^{-i k·x_j}` with the
/// phase referred to the first sample. Parseval holds without weights.
pub fn forward_transform(u: &Field) -> Vec<C64> {
    let mut c = u.grid.to_spectral(&u.values);
    let s = 1.0 / (u.grid.len() as f64).sqrt();
    par::for_each_mut(&mut c, |_, v| *v *= s);
    c
}

/// Inverse of [`forward_transform`]; the imaginary part is discarded.
pub fn inverse_transform(grid: &Arc<GridSpec>, coeffs: &[C64]) -> Result<Field> {
    if coeffs.len() != grid.len() {
        return Err(HartreeError::Sizing("coefficient count does not match grid".into()));
    }
    let mut c = coeffs.to_vec();
    grid.fft().inverse(&mut c);
    let s = 1.0 / (grid.len() as f64).sqrt();
    Ok(Field::from_vec(grid.clone(), c.iter().map(|v| v.re * s).collect()))
}

/// Spectral gradient. Nyquist bins are dropped since `i k` is odd.
pub fn gradient(u: &Field) -> [Field; 3] {
    let g = u.grid.clone();
    let spec = g.to_spectral(&u.values);
    let comp = |axis: usize| {
        let mut c = spec.clone();
        let gg = g.clone();
        par::for_each_mut(&mut c, |idx, v| {
            let (i, j, k) = gg.split(idx);
            let b = [i, j, k][axis];
            *v = if gg.is_nyquist(b) {
                C64::new(0.0, 0.0)
            } else {
                *v * C64::new(0.0, gg.wavenumber(b))
            };
        });
        g.from_spectral(&mut c);
        Field::from_vec(g.clone(), c.iter().map(|v| v.re).collect())
    };
    [comp(0), comp(1), comp(2)]
}

/// `x·∇u` with `x` measured from `center`.
pub fn radial_derivative(u: &Field, center: [f64; 3]) -> Field {
    let [gx, gy, gz] = gradient(u);
    let g = u.grid.clone();
    let mut v = vec![0.0; g.len()];
    par::for_each_mut(&mut v, |i, out| {
        let p = g.position(i);
        *out = (p[0] - center[0]) * gx.values[i]
            + (p[1] - center[1]) * gy.values[i]
            + (p[2] - center[2]) * gz.values[i];
    });
    Field::from_vec(g.clone(), v)
}

/// Density barycenter `∫x u² / ∫u²`.
pub fn barycenter(u: &Field) -> [f64; 3] {
    let g = &u.grid;
    let v = &u.values;
    let m = par::sum(v.len(), |i| v[i] * v[i]);
    let comp = |a: usize| par::sum(v.len(), |i| g.position(i)[a] * v[i] * v[i]) / m;
    [comp(0), comp(1), comp(2)]
}

/// Spectral translation `u(x - d)` for any displacement `d`.
pub fn translate(u: &Field, d: [f64; 3]) -> Field {
    let g = u.grid.clone();
    let mut c = g.to_spectral(&u.values);
    let gg = g.clone();
    par::for_each_mut(&mut c, |idx, v| {
        let k = gg.wavevector(idx);
        let ph = -(k[0] * d[0] + k[1] * d[1] + k[2] * d[2]);
        *v *= C64::new(ph.cos(), ph.sin());
    });
    g.from_spectral(&mut c);
    Field::from_vec(g, c.iter().map(|v| v.re).collect())
}

/// Trigonometric interpolation onto another grid with the same box.
///
/// Nyquist bins are split symmetrically when refining and folded when
/// coarsening, so real band-limited fields map to real fields.
pub fn resample(u: &Field, target: &Arc<GridSpec>) -> Result<Field> {
    let src = &u.grid;
    if src.half_width != target.half_width {
        return Err(HartreeError::InvalidParameter("resample needs equal boxes".into()));
    }
    let (n0, n1) = (src.n as i64, target.n as i64);
    let spec = src.to_spectral(&u.values);
    let mut out = vec![C64::new(0.0, 0.0); target.len()];
    let nmin = n0.min(n1);
    let wrap = |s: i64, n: i64| s.rem_euclid(n) as usize;
    // the phase reference is the first sample at -L in both grids
    for (idx, v) in spec.iter().enumerate() {
        let (i, j, k) = src.split(idx);
        let s = [src.signed_index(i), src.signed_index(j), src.signed_index(k)];
        let mut targets: Vec<([i64; 3], f64)> = vec![(s, 1.0)];
        for a in 0..3 {
            if s[a].abs() * 2 == nmin {
                // split the unpaired bin between +/- when it becomes paired
                let mut next = Vec::new();
                for (t, w) in &targets {
                    let mut p = *t;
                    let mut q = *t;
                    p[a] = nmin / 2;
                    q[a] = -nmin / 2;
                    if n1 > n0 {
                        next.push((p, w * 0.5));
                        next.push((q, w * 0.5));
                    } else {
                        next.push((q, *w));
                    }
                }
                targets = next;
            } else if s[a].abs() * 2 > nmin {
                targets.clear();
                break;
            }
        }
        for (t, w) in targets {
            let ti = (wrap(t[0], n1) * target.n + wrap(t[1], n1)) * target.n + wrap(t[2], n1);
            out[ti] += v * w;
        }
    }
    let scale = (n1 as f64 / n0 as f64).powi(3);
    target.fft().inverse(&mut out);
    let inv = scale / target.len() as f64;
    Ok(Field::from_vec(target.clone(), out.iter().map(|v| v.re * inv).collect()))
}

/// Squared integer distance of each sample from the origin sample.
pub(crate) fn shell_index(g: &GridSpec, idx: usize) -> usize {
    let (i, j, k) = g.split(idx);
    let o = g.origin_index() as i64;
    let d = |a: usize| (a as i64 - o) * (a as i64 - o);
    (d(i) + d(j) + d(k)) as usize
}

/// Shell means over exact lattice shells `|j|² = const` around the origin.
pub(crate) fn shell_means(u: &Field) -> (Vec<f64>, Vec<usize>) {
    let g = &u.grid;
    let o = g.origin_index();
    let maxs = 3 * o * o + 1;
    let mut sum = vec![0.0; maxs];
    let mut cnt = vec![0usize; maxs];
    for (idx, &v) in u.values.iter().enumerate() {
        let s = shell_index(g, idx);
        sum[s] += v;
        cnt[s] += 1;
    }
    for (s, c) in sum.iter_mut().zip(&cnt) {
        if *c > 0 {
            *s /= *c as f64;
        }
    }
    (sum, cnt)
}

/// Replace every value by its lattice-shell mean: the orthogonal projection
/// onto fields that depend only on `|x|` through the lattice shells.
pub fn shell_average(u: &Field) -> Field {
    let (means, _) = shell_means(u);
    let g = u.grid.clone();
    let mut v = vec![0.0; g.len()];
    let gg = g.clone();
    par::for_each_mut(&mut v, |i, x| *x = means[shell_index(&gg, i)]);
    Field::from_vec(g, v)
}

/// One radial bin of [`radial_profile`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RadialBin {
    /// Mean sample radius in the bin.
    pub radius: f64,
    pub mean: f64,
    /// Largest distance of a sample from the mean of its lattice shell.
    pub max_deviation: f64,
}

/// Radial profile about the origin.
pub fn radial_profile(u: &Field, bin_width: f64) -> Result<Vec<RadialBin>> {
    let g = &u.grid;
    if !(bin_width >= g.spacing * (1.0 - 1e-12)) {
        return Err(HartreeError::InvalidParameter(format!(
            "bin width {bin_width} is below the grid spacing {}",
            g.spacing
        )));
    }
    let (means, _) = shell_means(u);
    let h = g.spacing;
    let rmax = 3f64.sqrt() * g.half_width;
    let nb = (rmax / bin_width).floor() as usize + 1;
    let mut r_sum = vec![0.0; nb];
    let mut v_sum = vec![0.0; nb];
    let mut dev = vec![0.0f64; nb];
    let mut cnt = vec![0usize; nb];
    for (idx, &v) in u.values.iter().enumerate() {
        let s = shell_index(g, idx);
        let r = (s as f64).sqrt() * h;
        let b = ((r / bin_width).floor() as usize).min(nb - 1);
        r_sum[b] += r;
        v_sum[b] += v;
        cnt[b] += 1;
        dev[b] = dev[b].max((v - means[s]).abs());
    }
    Ok((0..nb)
        .filter(|&b| cnt[b] > 0)
        .map(|b| RadialBin {
            radius: r_sum[b] / cnt[b] as f64,
            mean: v_sum[b] / cnt[b] as f64,
            max_deviation: dev[b],
        })
        .collect())
}

/// Exact lattice shells as `(radius, mean)` pairs, sorted by radius.
pub fn shell_profile(u: &Field) -> Vec<(f64, f64)> {
    let (means, cnt) = shell_means(u);
    let h = u.grid.spacing;
    means
        .iter()
        .zip(&cnt)
        .enumerate()
        .filter(|(_, (_, &c))| c > 0)
        .map(|(s, (&m, _))| ((s as f64).sqrt() * h, m))
        .collect()
}

/// Largest deviation from lattice-shell means, over the whole grid.
pub fn radial_deviation(u: &Field) -> f64 {
    let (means, _) = shell_means(u);
    let g = &u.grid;
    let v = &u.values;
    par::max(v.len(), |i| (v[i] - means[shell_index(g, i)]).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_grid_examples() {
        let g = make_grid(8.0, 64).unwrap();
        assert_eq!(g.spacing(), 0.25);
        let g = make_grid(8.0, 8).unwrap();
        let kmax = (0..8).map(|j| g.wavenumber(j).abs()).fold(0.0, f64::max);
        assert!((kmax - PI / 2.0).abs() < 1e-15);
        assert!(matches!(make_grid(8.0, 63), Err(HartreeError::Sizing(_))));
        assert!(make_grid(0.0, 64).is_err());
        assert!(make_grid(8.0, 4).is_err());
        assert!(make_grid(8.0, 100).is_err());
        assert!(make_grid(8.0, 96).is_ok());
        assert!(make_grid(8.0, 192).is_ok());
    }

    #[test]
    fn lattice_invariants() {
        let g = make_grid(3.0, 16).unwrap();
        assert_eq!(g.spacing() * 16.0, 6.0);
        let ks = g.wavenumbers();
        assert_eq!(ks.len(), 16 * 16 * 16);
        assert_eq!(g.cell_volume(), g.spacing().powi(3));
        // k -> -k symmetry away from Nyquist planes
        for j in 1..16 {
            if j != 8 {
                assert_eq!(g.wavenumber(j), -g.wavenumber(16 - j));
            }
        }
    }

    #[test]
    fn mass_examples() {
        let g = make_grid(4.0, 8).unwrap();
        assert_eq!(mass(&Field::zeros(&g)), 0.0);
        let mut v = vec![0.0; g.len()];
        v[17] = 3.0;
        let u = Field::new(g.clone(), v).unwrap();
        assert!((mass(&u) - 9.0 * g.cell_volume()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_mass() {
        let g = make_grid(12.0, 128).unwrap();
        let c = PI.powf(-0.75);
        let u = Field::from_fn(&g, |x, y, z| c * (-(x * x + y * y + z * z) / 2.0).exp());
        assert!((mass(&u) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn normalize_examples() {
        let g = make_grid(4.0, 8).unwrap();
        let u = Field::from_fn(&g, |x, _, _| 1.0 + x * x);
        let u4 = normalize(&u, 4.0).unwrap();
        let half = normalize(&u4, 1.0).unwrap();
        for (a, b) in u4.values().iter().zip(half.values()) {
            assert!((a / 2.0 - b).abs() < 1e-14 * a.abs());
        }
        let same = normalize(&half, 1.0).unwrap();
        for (a, b) in half.values().iter().zip(same.values()) {
            assert!((a - b).abs() <= 1e-14 * a.abs());
        }
        assert!(matches!(
            normalize(&Field::zeros(&g), 1.0),
            Err(HartreeError::DegenerateField(_))
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let g = make_grid(4.0, 8).unwrap();
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        assert!(Field::new(g, v).is_err());
    }

    #[test]
    fn parseval_and_roundtrip() {
        let g = make_grid(5.0, 16).unwrap();
        let u = Field::from_fn(&g, |x, y, z| (x * 0.3).sin() * (-y * y).exp() + z * 0.01);
        let c = forward_transform(&u);
        let spec: f64 = c.iter().map(|v| v.norm_sqr()).sum::<f64>() * g.cell_volume();
        assert!((spec - mass(&u)).abs() < 1e-12 * mass(&u));
        let back = inverse_transform(&g, &c).unwrap();
        let err = back.add_scaled(-1.0, &u).norm_linf();
        assert!(err < 1e-12 * u.norm_linf());
    }

    #[test]
    fn gradient_of_gaussian() {
        let g = make_grid(8.0, 64).unwrap();
        let u = Field::from_fn(&g, |x, y, z| (-(x * x + y * y + z * z) / 2.0).exp());
        let [gx, _, _] = gradient(&u);
        let expect = Field::from_fn(&g, |x, y, z| -x * (-(x * x + y * y + z * z) / 2.0).exp());
        assert!(gx.add_scaled(-1.0, &expect).norm_linf() < 1e-10);
    }

    #[test]
    fn translate_and_resample_gaussian() {
        let g = make_grid(8.0, 32).unwrap();
        let f = |x: f64, y: f64, z: f64| (-(x * x + y * y + z * z) / 2.0).exp();
        let u = Field::from_fn(&g, f);
        let d = [0.3, -0.7, 0.11];
        let t = translate(&u, d);
        let e = Field::from_fn(&g, |x, y, z| f(x - d[0], y - d[1], z - d[2]));
        assert!(t.add_scaled(-1.0, &e).norm_linf() < 1e-9);
        let fine = make_grid(8.0, 64).unwrap();
        let r = resample(&u, &fine).unwrap();
        let e = Field::from_fn(&fine, f);
        assert!(r.add_scaled(-1.0, &e).norm_linf() < 1e-9);
        let back = resample(&r, &g).unwrap();
        assert!(back.add_scaled(-1.0, &u).norm_linf() < 1e-12);
    }

    #[test]
    fn radial_profile_examples() {
        let g = make_grid(6.0, 32).unwrap();
        let u = Field::from_fn(&g, |x, y, z| (-(x * x + y * y + z * z).sqrt()).exp());
        let w = 2.0 * g.spacing();
        for b in radial_profile(&u, w).unwrap().iter().take(8).skip(1) {
            assert!((b.mean - (-b.radius).exp()).abs() < w * w * (-b.radius).exp());
            assert!(b.max_deviation < 1e-14);
        }
        let odd = Field::from_fn(&g, |x, _, _| x);
        for b in radial_profile(&odd, w).unwrap().iter().take(7) {
            assert!(b.mean.abs() < 1e-12);
        }
        assert!(radial_profile(&u, 0.5 * g.spacing()).is_err());
    }

    #[test]
    fn shell_average_is_projection() {
        let g = make_grid(4.0, 16).unwrap();
        let u = Field::from_fn(&g, |x, y, z| x + y * y + (z * 0.5).cos());
        let a = shell_average(&u);
        let b = shell_average(&a);
        assert!(a.add_scaled(-1.0, &b).norm_linf() < 1e-13 * a.norm_linf());
        assert!(radial_deviation(&a) < 1e-14 * a.norm_linf());
    }
}
