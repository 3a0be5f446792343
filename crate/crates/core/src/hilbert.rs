//! Truncated multi-mode Fock spaces and operators on them.
//!
//! Basis ordering is site-major with the last site varying fastest: the state
//! `|n_0, n_1, ..., n_{N-1}>` has index `sum_i n_i * stride_i` where
//! `stride_{N-1} = 1` and `stride_i = stride_{i+1} * cutoff_{i+1}`. A cutoff is
//! the number of retained levels per site, so cutoff `c` keeps `|0>..|c-1>`.
//! Serialized states always use this ordering.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::CavityNetwork;
use crate::sparse::CsrMatrix;

/// Largest product-space dimension accepted by [`FockBasis::new`].
pub const MAX_DIMENSION: usize = 1 << 20;

/// Operators at or below this dimension are stored densely.
pub const DENSE_LIMIT: usize = 512;

const HERMITIAN_TOL: f64 = 1e-12;

fn c64(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct FockConfig {
    cutoffs: Vec<usize>,
}

impl FockConfig {
    pub fn new(cutoffs: Vec<usize>) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::param("cutoffs", "at least one site is required"));
        }
        for (site, &cutoff) in cutoffs.iter().enumerate() {
            if cutoff < 2 {
                return Err(Error::InvalidCutoff { site, cutoff });
            }
        }
        let mut dim: usize = 1;
        for &c in &cutoffs {
            dim = dim
                .checked_mul(c)
                .filter(|&d| d <= MAX_DIMENSION)
                .ok_or(Error::DimensionOverflow {
                    limit: MAX_DIMENSION,
                })?;
        }
        Ok(FockConfig { cutoffs })
    }

    pub fn uniform(n_sites: usize, cutoff: usize) -> Result<Self> {
        Self::new(vec![cutoff; n_sites])
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn n_sites(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn dimension(&self) -> usize {
        self.cutoffs.iter().product()
    }
}

/// Index maps for the product basis described by a [`FockConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct FockBasis {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
    photons: Vec<u32>,
}

impl FockBasis {
    pub fn new(config: &FockConfig) -> Result<Self> {
        let config = FockConfig::new(config.cutoffs.clone())?;
        let n = config.n_sites();
        let mut strides = vec![1; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * config.cutoffs[i + 1];
        }
        let dim = config.dimension();
        let mut basis = FockBasis {
            cutoffs: config.cutoffs,
            strides,
            dim,
            photons: Vec::new(),
        };
        basis.photons = (0..dim)
            .map(|b| (0..n).map(|s| basis.occupation_at(b, s) as u32).sum())
            .collect();
        Ok(basis)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn n_sites(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    pub fn index(&self, occupation: &[usize]) -> Option<usize> {
        if occupation.len() != self.n_sites() {
            return None;
        }
        let mut idx = 0;
        for ((&n, &c), &s) in occupation.iter().zip(&self.cutoffs).zip(&self.strides) {
            if n >= c {
                return None;
            }
            idx += n * s;
        }
        Some(idx)
    }

    pub fn occupation(&self, index: usize) -> Vec<usize> {
        (0..self.n_sites())
            .map(|s| self.occupation_at(index, s))
            .collect()
    }

    pub fn occupation_at(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.cutoffs[site]
    }

    pub fn total_photons(&self, index: usize) -> u32 {
        self.photons[index]
    }

    /// True when any site of the basis state sits at its highest retained level.
    pub fn at_truncation_edge(&self, index: usize) -> bool {
        (0..self.n_sites()).any(|s| self.occupation_at(index, s) + 1 == self.cutoffs[s])
    }

    pub(crate) fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites() {
            return Err(Error::SiteOutOfRange {
                site,
                n_sites: self.n_sites(),
            });
        }
        Ok(())
    }
}

pub fn build_space(config: &FockConfig) -> Result<FockBasis> {
    FockBasis::new(config)
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<Complex64>),
    Sparse(CsrMatrix),
}

/// A square operator on a product Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    storage: Storage,
    sites: Vec<usize>,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn from_csr(csr: CsrMatrix, sites: Vec<usize>) -> Self {
        let dim = csr.dim();
        let storage = if dim <= DENSE_LIMIT {
            Storage::Dense(csr.to_dense())
        } else {
            Storage::Sparse(csr)
        };
        OperatorMatrix {
            dim,
            storage,
            sites,
            hermitian: false,
        }
    }

    /// Same operator with the storage forced to sparse (for cross-checks).
    pub fn into_sparse_storage(self) -> Self {
        let csr = self.to_csr();
        OperatorMatrix {
            storage: Storage::Sparse(csr),
            ..self
        }
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn site_tags(&self) -> &[usize] {
        &self.sites
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match &self.storage {
            Storage::Dense(d) => CsrMatrix::from_dense(self.dim, d),
            Storage::Sparse(s) => s.clone(),
        }
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Sparse(s) => s.to_dense(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        match &self.storage {
            Storage::Dense(d) => d[row * self.dim + col],
            Storage::Sparse(s) => s.get(row, col),
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(match &self.storage {
            Storage::Dense(d) => d
                .chunks_exact(self.dim)
                .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
                .collect(),
            Storage::Sparse(s) => s.matvec(x),
        })
    }

    fn merge_sites(&self, other: &Self) -> Vec<usize> {
        let mut sites: Vec<usize> = self.sites.iter().chain(&other.sites).copied().collect();
        sites.sort_unstable();
        sites.dedup();
        sites
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::from_csr(self.to_csr().adjoint(), self.sites.clone());
        out.hermitian = self.hermitian;
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_csr(self.to_csr().scale(s), self.sites.clone())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self::from_csr(self.to_csr().add(&other.to_csr())?, self.merge_sites(other)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self::from_csr(self.to_csr().sub(&other.to_csr())?, self.merge_sites(other)))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        Ok(Self::from_csr(
            self.to_csr().matmul(&other.to_csr())?,
            self.merge_sites(other),
        ))
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.to_csr().hermiticity_deviation()
    }

    /// Sets the Hermitian flag after checking `|A - A^dagger| < 1e-12` entrywise.
    pub fn mark_hermitian(mut self) -> Result<Self> {
        let deviation = self.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        self.hermitian = true;
        Ok(self)
    }
}

pub fn annihilation_on(basis: &FockBasis, site: usize) -> Result<OperatorMatrix> {
    basis.check_site(site)?;
    let stride = basis.stride(site);
    let trip = (0..basis.dimension()).filter_map(|b| {
        let n = basis.occupation_at(b, site);
        (n > 0).then(|| (b - stride, b, c64((n as f64).sqrt())))
    });
    Ok(OperatorMatrix::from_csr(
        CsrMatrix::from_triplets(basis.dimension(), trip),
        vec![site],
    ))
}

pub fn annihilation(site: usize, config: &FockConfig) -> Result<OperatorMatrix> {
    annihilation_on(&FockBasis::new(config)?, site)
}

pub fn creation(site: usize, config: &FockConfig) -> Result<OperatorMatrix> {
    Ok(annihilation(site, config)?.adjoint())
}

pub fn number_on(basis: &FockBasis, site: usize) -> Result<OperatorMatrix> {
    basis.check_site(site)?;
    let trip = (0..basis.dimension()).map(|b| (b, b, c64(basis.occupation_at(b, site) as f64)));
    Ok(OperatorMatrix::from_csr(
        CsrMatrix::from_triplets(basis.dimension(), trip),
        vec![site],
    ))
}

pub fn identity(config: &FockConfig) -> OperatorMatrix {
    let dim = config.dimension();
    OperatorMatrix::from_csr(CsrMatrix::identity(dim), (0..config.n_sites()).collect())
}

/// Non-Hermitian effective Hamiltonian with `z_i = Delta_i - i gamma_i / 2`.
pub fn assemble_hamiltonian(
    network: &CavityNetwork,
    config: &FockConfig,
    include_drive: bool,
) -> Result<OperatorMatrix> {
    let basis = FockBasis::new(config)?;
    Ok(OperatorMatrix::from_csr(
        hamiltonian_csr(network, &basis, true, include_drive)?,
        (0..basis.n_sites()).collect(),
    ))
}

/// Hermitian part of [`assemble_hamiltonian`] (losses omitted).
pub fn assemble_hermitian_hamiltonian(
    network: &CavityNetwork,
    config: &FockConfig,
    include_drive: bool,
) -> Result<OperatorMatrix> {
    let basis = FockBasis::new(config)?;
    OperatorMatrix::from_csr(
        hamiltonian_csr(network, &basis, false, include_drive)?,
        (0..basis.n_sites()).collect(),
    )
    .mark_hermitian()
}

pub(crate) fn hamiltonian_csr(
    network: &CavityNetwork,
    basis: &FockBasis,
    with_loss: bool,
    include_drive: bool,
) -> Result<CsrMatrix> {
    let n = network.n_sites();
    if basis.n_sites() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: basis.n_sites(),
        });
    }
    network.validate()?;
    let j = network.couplings();
    let alpha = network.kerr();
    let f = network.drive_amplitude();
    let d = network.drive_site();
    let mut trip = Vec::new();
    for b in 0..basis.dimension() {
        let occ = basis.occupation(b);
        let mut diag = Complex64::new(0.0, 0.0);
        for (i, &o) in occ.iter().enumerate() {
            let ni = o as f64;
            let zi = if with_loss {
                network.complex_detuning(i)
            } else {
                c64(network.detuning()[i])
            };
            diag += zi * ni + c64(alpha * ni * (ni - 1.0));
        }
        for ck in network.cross_kerr() {
            diag += c64(2.0 * ck.strength * occ[ck.i] as f64 * occ[ck.j] as f64);
        }
        trip.push((b, b, diag));
        for (i, row) in j.iter().enumerate() {
            for (jj, &jij) in row.iter().enumerate() {
                if i == jj || jij == 0.0 || occ[jj] == 0 || occ[i] + 1 >= basis.cutoffs()[i] {
                    continue;
                }
                let target = b - basis.stride(jj) + basis.stride(i);
                let amp = ((occ[jj] * (occ[i] + 1)) as f64).sqrt();
                trip.push((target, b, c64(jij * amp)));
            }
        }
        if include_drive {
            if occ[d] + 1 < basis.cutoffs()[d] {
                trip.push((b + basis.stride(d), b, f * ((occ[d] + 1) as f64).sqrt()));
            }
            if occ[d] > 0 {
                trip.push((b - basis.stride(d), b, f.conj() * (occ[d] as f64).sqrt()));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(basis.dimension(), trip))
}

/// Photon-number grading `S = diag(s^-N)`.
///
/// Weak drives make amplitudes of the `N`-photon sector scale like `F^N`.
/// Working with `S psi` (and `S rho S`) keeps every sector at order one, so
/// integrator tolerances act relative to each sector instead of the vacuum.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonScaling {
    s: f64,
    photons: Vec<u32>,
    weights: Vec<f64>,
}

impl PhotonScaling {
    pub fn new(basis: &FockBasis, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::param("scale", "must be positive and finite"));
        }
        let photons: Vec<u32> = (0..basis.dimension()).map(|b| basis.total_photons(b)).collect();
        let weights = photons.iter().map(|&n| s.powi(2 * n as i32)).collect();
        Ok(PhotonScaling { s, photons, weights })
    }

    pub fn identity(basis: &FockBasis) -> Self {
        Self::new(basis, 1.0).expect("unit scale is valid")
    }

    /// Scale suited to a drive amplitude `F`: `min(|F|, 1)`, or 1 without drive.
    pub fn for_drive(basis: &FockBasis, drive: Complex64) -> Self {
        let f = drive.norm();
        let s = if f > 0.0 && f < 1.0 { f } else { 1.0 };
        Self::new(basis, s).expect("drive-derived scale is valid")
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn photons(&self, index: usize) -> u32 {
        self.photons[index]
    }

    /// `s^(2N)` for basis state `index`; the weight of `|psi~_index|^2` in the norm.
    pub fn weight(&self, index: usize) -> f64 {
        self.weights[index]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `S A S^-1`, entries `A_ab s^(N_b - N_a)`.
    pub fn transform(&self, op: &CsrMatrix) -> CsrMatrix {
        op.map_entries(|r, c, v| {
            v * self.s.powi(self.photons[c] as i32 - self.photons[r] as i32)
        })
    }

    pub fn to_scaled(&self, psi: &[Complex64]) -> Vec<Complex64> {
        psi.iter()
            .enumerate()
            .map(|(k, v)| v * self.s.powi(-(self.photons[k] as i32)))
            .collect()
    }

    pub fn from_scaled(&self, psi: &[Complex64]) -> Vec<Complex64> {
        psi.iter()
            .enumerate()
            .map(|(k, v)| v * self.s.powi(self.photons[k] as i32))
            .collect()
    }

    /// Norm squared in original coordinates of a scaled vector.
    pub fn norm_sqr(&self, psi: &[Complex64]) -> f64 {
        psi.iter()
            .zip(&self.weights)
            .map(|(v, w)| v.norm_sqr() * w)
            .sum()
    }
}

/// A pure state on the product basis with a cached Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
    norm: f64,
}

impl QuantumState {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        QuantumState { amplitudes, norm }
    }

    pub fn vacuum(dim: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[0] = c64(1.0);
        Self::new(amps)
    }

    pub fn fock(basis: &FockBasis, occupation: &[usize]) -> Result<Self> {
        let idx = basis
            .index(occupation)
            .ok_or_else(|| Error::param("occupation", "not in the truncated basis"))?;
        let mut amps = vec![Complex64::new(0.0, 0.0); basis.dimension()];
        amps[idx] = c64(1.0);
        Ok(Self::new(amps))
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn normalized(&self) -> Self {
        let inv = 1.0 / self.norm;
        Self::new(self.amplitudes.iter().map(|a| a * inv).collect())
    }

    pub fn apply(&self, op: &OperatorMatrix) -> Result<Self> {
        Ok(Self::new(op.matvec(&self.amplitudes)?))
    }

    /// `<psi|A|psi> / <psi|psi>`.
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<Complex64> {
        let a_psi = op.matvec(&self.amplitudes)?;
        let num: Complex64 = self
            .amplitudes
            .iter()
            .zip(&a_psi)
            .map(|(x, y)| x.conj() * y)
            .sum();
        Ok(num / (self.norm * self.norm))
    }
}

/// Row-major density matrix on the product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_entries(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(DensityMatrix { dim, data })
    }

    pub fn zeros(dim: usize) -> Self {
        DensityMatrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn vacuum(dim: usize) -> Self {
        let mut rho = Self::zeros(dim);
        rho.data[0] = c64(1.0);
        rho
    }

    pub fn from_pure(state: &QuantumState) -> Self {
        let psi = state.amplitudes();
        let dim = psi.len();
        let mut data = Vec::with_capacity(dim * dim);
        for a in psi {
            for b in psi {
                data.push(a * b.conj());
            }
        }
        DensityMatrix { dim, data }
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim + c]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|k| self.data[k * self.dim + k]).sum()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for r in 0..self.dim {
            for c in r..self.dim {
                dev = dev.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        dev
    }

    /// `tr(rho A)`.
    pub fn expectation(&self, op: &OperatorMatrix) -> Result<Complex64> {
        if op.dimension() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: op.dimension(),
            });
        }
        Ok(op
            .to_csr()
            .triplets()
            .map(|(r, c, v)| v * self.get(c, r))
            .sum())
    }

    fn hermitian_part(&self) -> DMatrix<Complex64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |r, c| (self.get(r, c) + self.get(c, r).conj()) * 0.5)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.hermitian_part())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `(1/2) || rho - sigma ||_1`.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let diff = DensityMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        };
        Ok(0.5 * diff.eigenvalues().iter().map(|e| e.abs()).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_mode_two_levels() {
        let basis = build_space(&FockConfig::new(vec![2]).unwrap()).unwrap();
        assert_eq!(basis.dimension(), 2);
        assert_eq!(basis.occupation(0), vec![0]);
        assert_eq!(basis.occupation(1), vec![1]);
    }

    #[test]
    fn ring_with_working_cutoffs_dimension() {
        let cfg = FockConfig::new(vec![16, 8, 8, 8]).unwrap();
        assert_eq!(build_space(&cfg).unwrap().dimension(), 8192);
    }

    #[test]
    fn site_major_ordering() {
        let basis = build_space(&FockConfig::new(vec![3, 3]).unwrap()).unwrap();
        let idx = basis.index(&[1, 2]).unwrap();
        assert_eq!(idx, 3 + 2);
        assert_eq!(basis.occupation(idx), vec![1, 2]);
    }

    #[test]
    fn rejects_small_cutoff_and_overflow() {
        assert_eq!(
            FockConfig::new(vec![3, 1]),
            Err(Error::InvalidCutoff { site: 1, cutoff: 1 })
        );
        assert!(matches!(
            FockConfig::new(vec![1024; 3]),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn ladder_action() {
        let cfg = FockConfig::new(vec![3]).unwrap();
        let a = annihilation(0, &cfg).unwrap();
        let basis = build_space(&cfg).unwrap();
        let two = QuantumState::fock(&basis, &[2]).unwrap();
        let out = two.apply(&a).unwrap();
        assert!((out.amplitudes()[1] - c64(2f64.sqrt())).norm() < 1e-15);
        assert_eq!(out.amplitudes()[0], c64(0.0));
        assert!(annihilation(1, &cfg).is_err());
    }

    #[test]
    fn canonical_commutator_below_edge() {
        let cfg = FockConfig::new(vec![5]).unwrap();
        let a = annihilation(0, &cfg).unwrap();
        let comm = a.commutator(&a.adjoint()).unwrap();
        for n in 0..4 {
            assert!((comm.get(n, n) - c64(1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn embedding_acts_as_identity_elsewhere() {
        let cfg = FockConfig::new(vec![3, 4]).unwrap();
        let basis = build_space(&cfg).unwrap();
        let a0 = annihilation_on(&basis, 0).unwrap();
        for b in 0..basis.dimension() {
            for c in 0..basis.dimension() {
                let v = a0.get(b, c);
                if v != c64(0.0) {
                    assert_eq!(basis.occupation_at(b, 1), basis.occupation_at(c, 1));
                    assert_eq!(basis.occupation_at(b, 0) + 1, basis.occupation_at(c, 0));
                }
            }
        }
    }

    #[test]
    fn cross_site_commutators_vanish() {
        let cfg = FockConfig::new(vec![3, 3, 2]).unwrap();
        let basis = build_space(&cfg).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let ai = annihilation_on(&basis, i).unwrap();
                let ajd = annihilation_on(&basis, j).unwrap().adjoint();
                let comm = ai.commutator(&ajd).unwrap();
                assert_eq!(comm.to_csr().max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn dense_and_sparse_storage_agree() {
        let cfg = FockConfig::new(vec![4, 3]).unwrap();
        let basis = build_space(&cfg).unwrap();
        let a = annihilation_on(&basis, 1).unwrap();
        let h = a.adjoint().matmul(&a).unwrap().add(&a).unwrap();
        assert!(h.is_dense());
        let hs = h.clone().into_sparse_storage();
        assert!(!hs.is_dense());
        let x: Vec<Complex64> = (0..12).map(|k| Complex64::new(k as f64, 1.0 / (k as f64 + 1.0))).collect();
        let y1 = h.matvec(&x).unwrap();
        let y2 = hs.matvec(&x).unwrap();
        for (p, q) in y1.iter().zip(&y2) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn large_operators_are_sparse() {
        let cfg = FockConfig::new(vec![8, 8, 9]).unwrap();
        assert!(!annihilation(0, &cfg).unwrap().is_dense());
    }

    #[test]
    fn mark_hermitian_rejects_ladder() {
        let cfg = FockConfig::new(vec![3]).unwrap();
        assert!(annihilation(0, &cfg).unwrap().mark_hermitian().is_err());
    }

    #[test]
    fn scaling_round_trip_and_norm() {
        let basis = build_space(&FockConfig::new(vec![3, 3]).unwrap()).unwrap();
        let sc = PhotonScaling::new(&basis, 1e-3).unwrap();
        let psi: Vec<Complex64> = (0..9).map(|k| Complex64::new(1e-3f64.powi(basis.total_photons(k) as i32), 0.5)).collect();
        let back = sc.from_scaled(&sc.to_scaled(&psi));
        for (a, b) in psi.iter().zip(&back) {
            assert!((a - b).norm() <= 1e-15 * a.norm().max(1e-300));
        }
        let direct: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
        assert!((sc.norm_sqr(&sc.to_scaled(&psi)) - direct).abs() < 1e-14 * direct);
    }

    #[test]
    fn scaled_operator_commutes_with_scaling() {
        let basis = build_space(&FockConfig::new(vec![4]).unwrap()).unwrap();
        let sc = PhotonScaling::new(&basis, 0.1).unwrap();
        let a = annihilation_on(&basis, 0).unwrap().to_csr();
        let psi: Vec<Complex64> = (0..4).map(|k| Complex64::new(1.0, k as f64)).collect();
        let lhs = sc.transform(&a).matvec(&sc.to_scaled(&psi));
        let rhs = sc.to_scaled(&a.matvec(&psi));
        for (p, q) in lhs.iter().zip(&rhs) {
            assert!((p - q).norm() < 1e-12 * q.norm().max(1.0));
        }
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states() {
        let basis = build_space(&FockConfig::new(vec![3]).unwrap()).unwrap();
        let r0 = DensityMatrix::from_pure(&QuantumState::fock(&basis, &[0]).unwrap());
        let r1 = DensityMatrix::from_pure(&QuantumState::fock(&basis, &[1]).unwrap());
        assert!((r0.trace_distance(&r1).unwrap() - 1.0).abs() < 1e-12);
        assert!((r0.trace() - c64(1.0)).norm() < 1e-15);
        assert!(r0.min_eigenvalue() > -1e-14);
    }

    proptest! {
        #[test]
        fn index_maps_are_bijective(cutoffs in prop::collection::vec(2usize..6, 1..5)) {
            let basis = build_space(&FockConfig::new(cutoffs).unwrap()).unwrap();
            for b in 0..basis.dimension() {
                prop_assert_eq!(basis.index(&basis.occupation(b)), Some(b));
            }
        }

        #[test]
        fn ladder_operators_are_adjoint(cutoffs in prop::collection::vec(2usize..5, 1..4), site_seed in 0usize..8) {
            let cfg = FockConfig::new(cutoffs).unwrap();
            let site = site_seed % cfg.n_sites();
            let a = annihilation(site, &cfg).unwrap();
            let ad = creation(site, &cfg).unwrap();
            let dim = cfg.dimension();
            for r in 0..dim {
                for c in 0..dim {
                    prop_assert_eq!(ad.get(r, c), a.get(c, r).conj());
                }
            }
        }
    }
}
