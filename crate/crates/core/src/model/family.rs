//! Parametrized loss classes `F = {f_g : g ∈ G}`.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use crate::convex::ConvexSet;
use crate::error::{arg, config, Error, Result};
use crate::linalg::{dot, Metric};
use crate::model::{Dataset, PopulationOracle, Sample, SampleLaw};
use crate::rng::Rng;

pub type FeatureFn = Arc<dyn Fn(&Sample, &mut [f64]) + Send + Sync>;
pub type OffsetFn = Arc<dyn Fn(&Sample) -> f64 + Send + Sync>;
pub type LossFn = Arc<dyn Fn(&[f64], &Sample) -> f64 + Send + Sync>;
pub type LossGradFn = Arc<dyn Fn(&[f64], &Sample, &mut [f64]) + Send + Sync>;
pub type PopulationFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type PopulationGradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Domain membership slack for parameters produced by solvers.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Finitely many functions tabulated on a discrete sample space with atoms
/// `0, …, m−1`. Each function carries a parameter vector so that penalties
/// can be applied to it.
#[derive(Clone, Debug)]
pub struct FiniteFamily {
    params: Vec<Vec<f64>>,
    table: Vec<Vec<f64>>,
    probs: Vec<f64>,
    law: SampleLaw,
    means: Vec<f64>,
    reference: Option<usize>,
}

impl FiniteFamily {
    /// `table[k][j] = f_k(atom j)`; `probs[j] = P(atom j)`.
    pub fn new(params: Vec<Vec<f64>>, table: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if params.is_empty() || params.len() != table.len() {
            return config("finite family needs one parameter per tabulated function");
        }
        let m = probs.len();
        if table.iter().any(|row| row.len() != m) {
            return config("every tabulated function needs one value per atom");
        }
        if table.iter().flatten().any(|v| !v.is_finite()) {
            return config("tabulated values must be finite");
        }
        ConvexSet::Finite { points: params.clone() }.validate()?;
        let law = SampleLaw::indexed(probs.clone())?;
        let means = table.iter().map(|row| dot(row, &probs)).collect();
        Ok(FiniteFamily { params, table, probs, law, means, reference: None })
    }

    pub fn with_reference(mut self, k: usize) -> Result<Self> {
        if k >= self.params.len() {
            return config(format!("reference index {k} out of range"));
        }
        self.reference = Some(k);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn law(&self) -> &SampleLaw {
        &self.law
    }

    pub fn atoms(&self) -> usize {
        self.probs.len()
    }

    pub fn reference_index(&self) -> Option<usize> {
        self.reference
    }

    /// `P f_k` for every `k`.
    pub fn population_means(&self) -> &[f64] {
        &self.means
    }

    pub fn index_of(&self, g: &[f64]) -> Result<usize> {
        self.params
            .iter()
            .position(|p| p.len() == g.len() && crate::linalg::dist(p, g) <= 1e-12)
            .ok_or_else(|| Error::DomainViolation(format!("{g:?} is not in the finite parameter list")))
    }

    fn atom(&self, x: &Sample) -> Result<usize> {
        match x {
            Sample::Scalar(v) if *v >= 0.0 && v.fract() == 0.0 && (*v as usize) < self.atoms() => Ok(*v as usize),
            _ => arg(format!("{x:?} is not an atom index of this finite family")),
        }
    }

    pub fn counts(&self, data: &Dataset) -> Result<Vec<usize>> {
        let mut c = vec![0; self.atoms()];
        for x in data.points() {
            c[self.atom(x)?] += 1;
        }
        Ok(c)
    }

    /// `P_n f_k` for every `k`, from atom counts.
    pub fn empirical_means_from_counts(&self, counts: &[usize]) -> Vec<f64> {
        let n: usize = counts.iter().sum();
        self.table
            .iter()
            .map(|row| row.iter().zip(counts).map(|(f, c)| f * *c as f64).sum::<f64>() / n as f64)
            .collect()
    }

    pub fn empirical_means(&self, data: &Dataset) -> Result<Vec<f64>> {
        Ok(self.empirical_means_from_counts(&self.counts(data)?))
    }

    fn reference_required(&self) -> Result<usize> {
        self.reference.ok_or_else(|| Error::Config("no reference parameter g⁰ registered".into()))
    }

    /// `σ²(f_k − f⁰)`.
    pub fn variance_of_difference(&self, k: usize) -> Result<f64> {
        let r = self.reference_required()?;
        let d: Vec<f64> = self.table[k].iter().zip(&self.table[r]).map(|(a, b)| a - b).collect();
        let m = dot(&d, &self.probs);
        Ok(d.iter().zip(&self.probs).map(|(x, p)| p * (x - m) * (x - m)).sum::<f64>().max(0.0))
    }

    /// `max_{k ∈ S, j} |f_k(j) − f⁰(j)|` over a subset of indices.
    pub fn sup_deviation(&self, subset: &[usize]) -> Result<f64> {
        let r = self.reference_required()?;
        Ok(subset
            .iter()
            .flat_map(|k| self.table[*k].iter().zip(&self.table[r]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max))
    }
}

/// Families with `f_g(x) = a(x) − ⟨g, φ(x)⟩ + ½ gᵀHg` and `Pφ = Hg⁰`, so that
/// `P(f_g − f⁰) = ½ (g − g⁰)ᵀH(g − g⁰)` and the centered process is linear:
/// `(P_n − P)(f⁰ − f_g) = ⟨g − g⁰, P_nφ − Pφ⟩`.
#[derive(Clone)]
pub struct LinearFamily {
    hessian: Metric,
    reference: Vec<f64>,
    feature_mean: Vec<f64>,
    features: FeatureFn,
    offset: Option<(OffsetFn, f64)>,
    feature_cov: Option<Metric>,
    domain: ConvexSet,
    law: SampleLaw,
    sup_bound: Option<f64>,
}

impl fmt::Debug for LinearFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearFamily")
            .field("dim", &self.reference.len())
            .field("hessian", &self.hessian)
            .field("reference", &self.reference)
            .field("domain", &self.domain)
            .field("law", &self.law)
            .finish()
    }
}

impl LinearFamily {
    pub fn new(hessian: Metric, reference: Vec<f64>, features: FeatureFn, law: SampleLaw) -> Result<Self> {
        hessian.validate()?;
        if hessian.dim() != reference.len() || reference.is_empty() {
            return config("hessian and reference parameter differ in dimension");
        }
        let feature_mean = hessian.apply(&reference);
        Ok(LinearFamily {
            hessian,
            reference,
            feature_mean,
            features,
            offset: None,
            feature_cov: None,
            domain: ConvexSet::Whole,
            law,
            sup_bound: None,
        })
    }

    /// Adds `a(x)` with known mean `Pa`.
    pub fn with_offset(mut self, offset: OffsetFn, mean: f64) -> Self {
        self.offset = Some((offset, mean));
        self
    }

    pub fn with_feature_cov(mut self, cov: Metric) -> Result<Self> {
        cov.validate()?;
        if cov.dim() != self.dim() {
            return config("feature covariance has the wrong dimension");
        }
        self.feature_cov = Some(cov);
        Ok(self)
    }

    pub fn with_domain(mut self, domain: ConvexSet) -> Result<Self> {
        domain.validate()?;
        if domain.dim().is_some_and(|d| d != self.dim()) {
            return config("domain has the wrong dimension");
        }
        if !domain.contains(&self.reference, DOMAIN_TOL) {
            return config("reference parameter g⁰ lies outside the domain");
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn with_sup_bound(mut self, k: f64) -> Self {
        self.sup_bound = Some(k);
        self
    }

    /// Observations `X ~ N(2g⁰, σ²I)` with `φ(x) = x`, `H = 2I`: the pure
    /// Gaussian case `P(f_g − f⁰) = ‖g − g⁰‖²`.
    pub fn gaussian_location(reference: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return config("noise scale must be positive");
        }
        let d = reference.len();
        let mean: Vec<f64> = reference.iter().map(|x| 2.0 * x).collect();
        let law = SampleLaw::generic(Arc::new(move |rng: &mut Rng| {
            Sample::Vector(
                mean.iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + sigma * z
                    })
                    .collect(),
            )
        }));
        let features: FeatureFn = Arc::new(|x: &Sample, out: &mut [f64]| {
            if let Sample::Vector(v) = x {
                out.copy_from_slice(v);
            }
        });
        LinearFamily::new(Metric::isotropic(d, 2.0), reference, features, law)?
            .with_feature_cov(Metric::isotropic(d, sigma * sigma))
    }

    pub fn dim(&self) -> usize {
        self.reference.len()
    }

    pub fn hessian(&self) -> &Metric {
        &self.hessian
    }

    /// `M = H/2`, so that `P(f_g − f⁰) = (g − g⁰)ᵀM(g − g⁰)`.
    pub fn excess_metric(&self) -> Metric {
        self.hessian.scaled(0.5)
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn feature_mean(&self) -> &[f64] {
        &self.feature_mean
    }

    pub fn feature_cov(&self) -> Option<&Metric> {
        self.feature_cov.as_ref()
    }

    pub fn domain(&self) -> &ConvexSet {
        &self.domain
    }

    pub fn law(&self) -> &SampleLaw {
        &self.law
    }

    pub fn features(&self, x: &Sample, out: &mut [f64]) {
        (self.features)(x, out)
    }

    /// `P_nφ`.
    pub fn empirical_features(&self, data: &Dataset) -> Vec<f64> {
        let d = self.dim();
        let mut acc = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for x in data.points() {
            (self.features)(x, &mut buf);
            acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
        }
        let n = data.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// `v = P_nφ − Pφ`, the coefficient vector of the centered process.
    pub fn process_vector(&self, data: &Dataset) -> Vec<f64> {
        let e = self.empirical_features(data);
        e.iter().zip(&self.feature_mean).map(|(a, b)| a - b).collect()
    }

    pub fn evaluate(&self, g: &[f64], x: &Sample) -> f64 {
        let mut buf = vec![0.0; self.dim()];
        (self.features)(x, &mut buf);
        let a = self.offset.as_ref().map_or(0.0, |(f, _)| f(x));
        a - dot(g, &buf) + 0.5 * self.hessian.quad(g)
    }

    pub fn population_mean(&self, g: &[f64]) -> f64 {
        let a = self.offset.as_ref().map_or(0.0, |(_, m)| *m);
        a - dot(g, &self.feature_mean) + 0.5 * self.hessian.quad(g)
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }
}

/// Families given by closures; used for nonlinear processes.
#[derive(Clone)]
pub struct SmoothFamily {
    dim: usize,
    loss: LossFn,
    loss_grad: Option<LossGradFn>,
    population: Option<PopulationFn>,
    population_grad: Option<PopulationGradFn>,
    domain: ConvexSet,
    law: SampleLaw,
    reference: Option<Vec<f64>>,
    linear_process: bool,
    convex: bool,
    sup_bound: Option<f64>,
}

impl fmt::Debug for SmoothFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFamily")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("reference", &self.reference)
            .field("linear_process", &self.linear_process)
            .field("convex", &self.convex)
            .finish()
    }
}

impl SmoothFamily {
    pub fn new(dim: usize, loss: LossFn, law: SampleLaw) -> Self {
        SmoothFamily {
            dim,
            loss,
            loss_grad: None,
            population: None,
            population_grad: None,
            domain: ConvexSet::Whole,
            law,
            reference: None,
            linear_process: false,
            convex: false,
            sup_bound: None,
        }
    }

    pub fn with_gradient(mut self, grad: LossGradFn) -> Self {
        self.loss_grad = Some(grad);
        self
    }

    /// Closed-form `g ↦ P f_g` and optionally its gradient.
    pub fn with_population(mut self, mean: PopulationFn, grad: Option<PopulationGradFn>) -> Self {
        self.population = Some(mean);
        self.population_grad = grad;
        self
    }

    pub fn with_domain(mut self, domain: ConvexSet) -> Result<Self> {
        domain.validate()?;
        self.domain = domain;
        Ok(self)
    }

    pub fn with_reference(mut self, g0: Vec<f64>) -> Result<Self> {
        if g0.len() != self.dim || !self.domain.contains(&g0, DOMAIN_TOL) {
            return config("reference parameter must lie in the domain");
        }
        self.reference = Some(g0);
        Ok(self)
    }

    pub fn linear_process(mut self, flag: bool) -> Self {
        self.linear_process = flag;
        self
    }

    /// Declares `g ↦ f_g(x)` convex for every `x`.
    pub fn convex(mut self, flag: bool) -> Self {
        self.convex = flag;
        self
    }

    pub fn with_sup_bound(mut self, k: f64) -> Self {
        self.sup_bound = Some(k);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn law(&self) -> &SampleLaw {
        &self.law
    }

    pub fn loss(&self, g: &[f64], x: &Sample) -> f64 {
        (self.loss)(g, x)
    }

    /// Gradient of `f_g(x)` in `g`; central differences when no closure is given.
    pub fn loss_gradient(&self, g: &[f64], x: &Sample, out: &mut [f64]) {
        if let Some(grad) = &self.loss_grad {
            grad(g, x, out);
            return;
        }
        let mut gp = g.to_vec();
        for k in 0..self.dim {
            let h = 1e-6 * (1.0 + g[k].abs());
            gp[k] = g[k] + h;
            let fp = (self.loss)(&gp, x);
            gp[k] = g[k] - h;
            let fm = (self.loss)(&gp, x);
            gp[k] = g[k];
            out[k] = (fp - fm) / (2.0 * h);
        }
    }

    pub fn population_mean(&self, g: &[f64], oracle: &PopulationOracle) -> Result<f64> {
        if let (PopulationOracle::ClosedForm, Some(p)) = (oracle, &self.population) {
            return Ok(p(g));
        }
        oracle.expect(&self.law, &|x| (self.loss)(g, x))
    }

    pub fn population_gradient(&self, g: &[f64], oracle: &PopulationOracle) -> Result<Vec<f64>> {
        if let (PopulationOracle::ClosedForm, Some(p)) = (oracle, &self.population_grad) {
            let mut out = vec![0.0; self.dim];
            p(g, &mut out);
            return Ok(out);
        }
        let mut out = vec![0.0; self.dim];
        for k in 0..self.dim {
            out[k] = oracle.expect(&self.law, &|x| {
                let mut buf = vec![0.0; self.dim];
                self.loss_gradient(g, x, &mut buf);
                buf[k]
            })?;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub enum Family {
    Finite(FiniteFamily),
    Linear(LinearFamily),
    Smooth(SmoothFamily),
}

impl From<FiniteFamily> for Family {
    fn from(f: FiniteFamily) -> Self {
        Family::Finite(f)
    }
}

impl From<LinearFamily> for Family {
    fn from(f: LinearFamily) -> Self {
        Family::Linear(f)
    }
}

impl From<SmoothFamily> for Family {
    fn from(f: SmoothFamily) -> Self {
        Family::Smooth(f)
    }
}

impl Family {
    pub fn dim(&self) -> usize {
        match self {
            Family::Finite(f) => f.params[0].len(),
            Family::Linear(f) => f.dim(),
            Family::Smooth(f) => f.dim,
        }
    }

    pub fn domain(&self) -> ConvexSet {
        match self {
            Family::Finite(f) => ConvexSet::Finite { points: f.params.clone() },
            Family::Linear(f) => f.domain.clone(),
            Family::Smooth(f) => f.domain.clone(),
        }
    }

    pub fn reference(&self) -> Option<Vec<f64>> {
        match self {
            Family::Finite(f) => f.reference.map(|k| f.params[k].clone()),
            Family::Linear(f) => Some(f.reference.clone()),
            Family::Smooth(f) => f.reference.clone(),
        }
    }

    pub fn require_reference(&self) -> Result<Vec<f64>> {
        self.reference()
            .ok_or_else(|| Error::Config("no population minimizer g⁰ registered with the family".into()))
    }

    /// Whether `g ↦ f_g − P f_g` is linear.
    pub fn linear_process(&self) -> bool {
        match self {
            Family::Finite(_) => false,
            Family::Linear(_) => true,
            Family::Smooth(f) => f.linear_process,
        }
    }

    pub fn sup_bound(&self) -> Option<f64> {
        match self {
            Family::Finite(f) => {
                let all: Vec<usize> = (0..f.len()).collect();
                f.sup_deviation(&all).ok()
            }
            Family::Linear(f) => f.sup_bound,
            Family::Smooth(f) => f.sup_bound,
        }
    }

    pub fn law(&self) -> &SampleLaw {
        match self {
            Family::Finite(f) => &f.law,
            Family::Linear(f) => &f.law,
            Family::Smooth(f) => &f.law,
        }
    }

    pub fn check_parameter(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.dim() {
            return Err(Error::DomainViolation(format!(
                "parameter has dimension {}, family has {}",
                g.len(),
                self.dim()
            )));
        }
        match self {
            Family::Finite(f) => f.index_of(g).map(|_| ()),
            Family::Linear(LinearFamily { domain, .. }) | Family::Smooth(SmoothFamily { domain, .. }) => {
                if domain.contains(g, DOMAIN_TOL) {
                    Ok(())
                } else {
                    Err(Error::DomainViolation(format!("{g:?} lies outside the parameter domain")))
                }
            }
        }
    }

    /// `f_g(x)`.
    pub fn evaluate(&self, g: &[f64], x: &Sample) -> Result<f64> {
        self.check_parameter(g)?;
        Ok(match self {
            Family::Finite(f) => f.table[f.index_of(g)?][f.atom(x)?],
            Family::Linear(f) => f.evaluate(g, x),
            Family::Smooth(f) => f.loss(g, x),
        })
    }

    /// `P f_g`.
    pub fn population_mean(&self, g: &[f64], oracle: &PopulationOracle) -> Result<f64> {
        self.check_parameter(g)?;
        match self {
            Family::Finite(f) => Ok(f.means[f.index_of(g)?]),
            Family::Linear(f) => match oracle {
                PopulationOracle::ClosedForm => Ok(f.population_mean(g)),
                _ => oracle.expect(&f.law, &|x| f.evaluate(g, x)),
            },
            Family::Smooth(f) => f.population_mean(g, oracle),
        }
    }

    /// `P(f_g − f⁰)`.
    pub fn population_excess(&self, g: &[f64], oracle: &PopulationOracle) -> Result<f64> {
        let g0 = self.require_reference()?;
        self.check_parameter(g)?;
        match self {
            Family::Linear(f) if matches!(oracle, PopulationOracle::ClosedForm) => {
                let u: Vec<f64> = g.iter().zip(&g0).map(|(a, b)| a - b).collect();
                Ok(0.5 * f.hessian.quad(&u))
            }
            _ => Ok(self.population_mean(g, oracle)? - self.population_mean(&g0, oracle)?),
        }
    }

    /// `σ²(f_g − f⁰)`.
    pub fn variance_of_difference(&self, g: &[f64], oracle: &PopulationOracle) -> Result<f64> {
        let g0 = self.require_reference()?;
        self.check_parameter(g)?;
        match self {
            Family::Finite(f) => f.variance_of_difference(f.index_of(g)?),
            Family::Linear(f) => {
                let u: Vec<f64> = g.iter().zip(&g0).map(|(a, b)| a - b).collect();
                if let (PopulationOracle::ClosedForm, Some(c)) = (oracle, &f.feature_cov) {
                    return Ok(c.quad(&u).max(0.0));
                }
                let mut buf = vec![0.0; f.dim()];
                let second = oracle.expect(&f.law, &|x| {
                    let mut b = buf.clone();
                    f.features(x, &mut b);
                    let c: f64 = u.iter().zip(b.iter().zip(&f.feature_mean)).map(|(a, (p, m))| a * (p - m)).sum();
                    c * c
                })?;
                buf.clear();
                Ok(second.max(0.0))
            }
            Family::Smooth(f) => {
                let diff = |x: &Sample| f.loss(g, x) - f.loss(&g0, x);
                let m1 = oracle.expect(&f.law, &diff)?;
                let m2 = oracle.expect(&f.law, &|x| diff(x).powi(2))?;
                Ok((m2 - m1 * m1).max(0.0))
            }
        }
    }

    /// Whether `g ↦ P_n f_g` is declared convex.
    pub fn convex_objective(&self) -> bool {
        match self {
            Family::Finite(_) | Family::Linear(_) => true,
            Family::Smooth(f) => f.convex,
        }
    }
}

/// Standard normal draw helper shared by simulators.
pub fn standard_normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}
