//! Symmetric curvature functions F and their defining cones.
//!
//! A curvature function here is symmetric in the principal curvatures,
//! positively homogeneous of degree one, strictly monotone (∂F/∂κ_i > 0),
//! concave, normalized so that F(1,…,1) = n, positive inside its cone Γ and
//! vanishing on ∂Γ. Each variant lives behind the [`CurvatureFunction`]
//! trait and is registered by name in [`REGISTRY`] so runs can select it
//! from configuration.

mod jacobi;
mod sigma;

use crate::error::{Error, Result};
use std::fmt;

pub use sigma::MAX_DIM;
use sigma::{binomial, elementary_all, sigma_k_without};

/// Margin for cone membership: values this close to ∂Γ count as outside,
/// since F and its gradient degenerate there.
pub const EPSILON_CONE: f64 = 1e-12;

/// Fixed-capacity vector for per-node curvature tuples (n ≤ MAX_DIM).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KVec {
    data: [f64; MAX_DIM],
    len: usize,
}

impl KVec {
    pub fn from_slice(s: &[f64]) -> Self {
        let mut data = [0.0; MAX_DIM];
        data[..s.len()].copy_from_slice(s);
        Self { data, len: s.len() }
    }

    /// n copies of `radial` replaced in slot 0, `angular` in the rest.
    pub fn radial_angular(radial: f64, angular: f64, n: usize) -> Self {
        let mut data = [angular; MAX_DIM];
        data[0] = radial;
        Self { data, len: n }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl std::ops::Deref for KVec {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        self.as_slice()
    }
}

/// Symmetric convex open cones on which the built-in functions are defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// σ_1 > 0 (domain of the mean curvature).
    HalfSpace,
    /// Gårding cone of σ_k: σ_1 > 0, …, σ_k > 0.
    Garding(usize),
    /// All κ_i > 0.
    Positive,
}

impl Cone {
    /// Strict membership with margin: quantities within `margin` of zero are
    /// treated as outside.
    pub fn contains_with_margin(&self, kappa: &[f64], margin: f64) -> bool {
        match *self {
            Cone::HalfSpace => kappa.iter().sum::<f64>() > margin,
            Cone::Garding(k) => {
                let e = elementary_all(kappa);
                (1..=k).all(|j| e[j] > margin)
            }
            Cone::Positive => kappa.iter().all(|&x| x > margin),
        }
    }

    pub fn contains(&self, kappa: &[f64]) -> bool {
        self.contains_with_margin(kappa, EPSILON_CONE)
    }
}

/// A symmetric, 1-homogeneous, monotone, concave curvature function on a
/// cone Γ ⊂ R^n, normalized so F(1,…,1) = n.
pub trait CurvatureFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Number of principal curvatures n.
    fn dim(&self) -> usize;

    fn cone(&self) -> Cone;

    /// F(κ) for κ in the open cone.
    fn evaluate(&self, kappa: &[f64]) -> Result<f64>;

    /// Eigenvalue partials (∂F/∂κ_i), all strictly positive on Γ.
    fn gradient(&self, kappa: &[f64]) -> Result<KVec>;

    fn in_cone(&self, kappa: &[f64]) -> bool {
        kappa.len() == self.dim() && self.cone().contains(kappa)
    }
}

fn admissibility_err(name: &str, kappa: &[f64]) -> Error {
    Error::Admissibility {
        t: f64::NAN,
        nodes: vec![],
        detail: format!("{kappa:?} outside the cone of {name}"),
    }
}

fn check_args(f: &dyn CurvatureFunction, kappa: &[f64]) -> Result<()> {
    if kappa.len() != f.dim() {
        return Err(Error::config(format!(
            "{} expects {} curvatures, got {}",
            f.name(),
            f.dim(),
            kappa.len()
        )));
    }
    if !f.in_cone(kappa) {
        return Err(admissibility_err(f.name(), kappa));
    }
    Ok(())
}

/// F(κ) = σ_1(κ) = Σ κ_i on the half space σ_1 > 0.
#[derive(Debug, Clone)]
pub struct MeanCurvature {
    n: usize,
}

impl CurvatureFunction for MeanCurvature {
    fn name(&self) -> &'static str {
        "mean"
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn cone(&self) -> Cone {
        Cone::HalfSpace
    }
    fn evaluate(&self, kappa: &[f64]) -> Result<f64> {
        check_args(self, kappa)?;
        Ok(kappa.iter().sum())
    }
    fn gradient(&self, kappa: &[f64]) -> Result<KVec> {
        check_args(self, kappa)?;
        Ok(KVec::radial_angular(1.0, 1.0, self.n))
    }
}

/// F(κ) = n (σ_k(κ)/C(n,k))^{1/k} on the Gårding cone of σ_k.
///
/// k = 1 coincides with the mean curvature; k = n with the geometric mean.
#[derive(Debug, Clone)]
pub struct SigmaKPowerMean {
    n: usize,
    k: usize,
    /// n / C(n,k)^{1/k}, precomputed.
    norm: f64,
}

impl CurvatureFunction for SigmaKPowerMean {
    fn name(&self) -> &'static str {
        "sigma-k"
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn cone(&self) -> Cone {
        Cone::Garding(self.k)
    }
    fn evaluate(&self, kappa: &[f64]) -> Result<f64> {
        check_args(self, kappa)?;
        let sk = elementary_all(kappa)[self.k];
        Ok(self.norm * sk.powf(1.0 / self.k as f64))
    }
    fn gradient(&self, kappa: &[f64]) -> Result<KVec> {
        check_args(self, kappa)?;
        let sk = elementary_all(kappa)[self.k];
        let f = self.norm * sk.powf(1.0 / self.k as f64);
        // ∂F/∂κ_i = F σ_{k-1}(κ | i) / (k σ_k)
        let mut g = [0.0; MAX_DIM];
        for i in 0..self.n {
            g[i] = f * sigma_k_without(kappa, self.k - 1, i) / (self.k as f64 * sk);
        }
        Ok(KVec { data: g, len: self.n })
    }
}

/// F(κ) = n (Π κ_i)^{1/n} on the positive cone.
#[derive(Debug, Clone)]
pub struct GeometricMean {
    n: usize,
}

impl CurvatureFunction for GeometricMean {
    fn name(&self) -> &'static str {
        "geometric"
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn cone(&self) -> Cone {
        Cone::Positive
    }
    fn evaluate(&self, kappa: &[f64]) -> Result<f64> {
        check_args(self, kappa)?;
        let n = self.n as f64;
        let log_mean = kappa.iter().map(|k| k.ln()).sum::<f64>() / n;
        Ok(n * log_mean.exp())
    }
    fn gradient(&self, kappa: &[f64]) -> Result<KVec> {
        // exact closed form F/(n κ_i); no log-domain differencing needed
        let f = self.evaluate(kappa)?;
        let mut g = [0.0; MAX_DIM];
        for i in 0..self.n {
            g[i] = f / (self.n as f64 * kappa[i]);
        }
        Ok(KVec { data: g, len: self.n })
    }
}

/// Typed selector for the built-in curvature functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    MeanCurvature,
    PowerMeanSigmaK(usize),
    GeometricMean,
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionKind::MeanCurvature => write!(f, "mean"),
            FunctionKind::PowerMeanSigmaK(k) => write!(f, "sigma-k:{k}"),
            FunctionKind::GeometricMean => write!(f, "geometric"),
        }
    }
}

/// Instantiate a curvature function for n principal curvatures.
pub fn make_function(kind: FunctionKind, n: usize) -> Result<Box<dyn CurvatureFunction>> {
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::config(format!("n must be in 2..={MAX_DIM}, got {n}")));
    }
    match kind {
        FunctionKind::MeanCurvature => Ok(Box::new(MeanCurvature { n })),
        FunctionKind::PowerMeanSigmaK(k) => {
            if !(1..=n).contains(&k) {
                return Err(Error::config(format!("sigma-k index must be in 1..={n}, got {k}")));
            }
            let norm = n as f64 / binomial(n, k).powf(1.0 / k as f64);
            Ok(Box::new(SigmaKPowerMean { n, k, norm }))
        }
        FunctionKind::GeometricMean => Ok(Box::new(GeometricMean { n })),
    }
}

/// Registry row: a curvature-function strategy selectable by name.
pub struct RegistryEntry {
    pub name: &'static str,
    pub needs_k: bool,
    pub summary: &'static str,
    pub build: fn(n: usize, k: Option<usize>) -> Result<Box<dyn CurvatureFunction>>,
}

/// Name-keyed table of the built-in strategies, used by config/CLI selection.
pub static REGISTRY: &[RegistryEntry] = &[
    RegistryEntry {
        name: "mean",
        needs_k: false,
        summary: "mean curvature sigma_1 on the half space",
        build: |n, _| make_function(FunctionKind::MeanCurvature, n),
    },
    RegistryEntry {
        name: "sigma-k",
        needs_k: true,
        summary: "normalized power mean of sigma_k on its Garding cone",
        build: |n, k| match k {
            Some(k) => make_function(FunctionKind::PowerMeanSigmaK(k), n),
            None => Err(Error::config("curvature 'sigma-k' requires sigma_k = <integer>")),
        },
    },
    RegistryEntry {
        name: "geometric",
        needs_k: false,
        summary: "normalized geometric mean on the positive cone",
        build: |n, _| make_function(FunctionKind::GeometricMean, n),
    },
];

/// Look a strategy up by registry name.
pub fn function_by_name(name: &str, n: usize, k: Option<usize>) -> Result<Box<dyn CurvatureFunction>> {
    for entry in REGISTRY {
        if entry.name == name {
            return (entry.build)(n, k);
        }
    }
    let known: Vec<&str> = REGISTRY.iter().map(|e| e.name).collect();
    Err(Error::config(format!("unknown curvature function '{name}', expected one of {known:?}")))
}

/// A symmetric direction for sampling the second-derivative form of F.
#[derive(Debug, Clone)]
pub enum SymPerturbation {
    /// Diagonal direction in the eigenbasis of κ.
    Diag(Vec<f64>),
    /// Full symmetric matrix, row-major n×n.
    Full(Vec<f64>),
}

/// Samples the quadratic form of the second derivative of F at κ along η by
/// second-order central differencing of s ↦ F(eig(diag(κ) + s η)).
///
/// For concave F the returned value is ≤ 0 up to differencing error.
pub fn check_concavity_sample(
    f: &dyn CurvatureFunction,
    kappa: &[f64],
    eta: &SymPerturbation,
) -> Result<f64> {
    let n = f.dim();
    if kappa.len() != n {
        return Err(Error::config(format!("expected {n} curvatures, got {}", kappa.len())));
    }
    let scale = kappa.iter().fold(0.0_f64, |m, k| m.max(k.abs())).max(1e-30);
    let step = 1e-3 * scale;

    let eval_at = |s: f64| -> Result<f64> {
        let shifted = match eta {
            SymPerturbation::Diag(d) => {
                if d.len() != n {
                    return Err(Error::config("perturbation dimension mismatch"));
                }
                let mut k = KVec::from_slice(kappa);
                for i in 0..n {
                    k.data[i] += s * d[i];
                }
                k
            }
            SymPerturbation::Full(m) => {
                if m.len() != n * n {
                    return Err(Error::config("perturbation dimension mismatch"));
                }
                let mut a = [[0.0; MAX_DIM]; MAX_DIM];
                for i in 0..n {
                    a[i][i] = kappa[i];
                    for j in 0..n {
                        a[i][j] += s * m[i * n + j];
                    }
                }
                let eig = jacobi::sym_eigenvalues(&a, n);
                KVec::from_slice(&eig[..n])
            }
        };
        if !f.in_cone(&shifted) {
            return Err(Error::Stencil(format!(
                "kappa {kappa:?} too close to the cone boundary for step {step:.1e}"
            )));
        }
        f.evaluate(&shifted)
    };

    let fp = eval_at(step)?;
    let f0 = f.evaluate(kappa)?;
    let fm = eval_at(-step)?;
    Ok((fp - 2.0 * f0 + fm) / (step * step))
}
