//! Builders for the worked examples and seeded synthetic data.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::atoms::ConvexAtom;
use crate::cardinality::Variant;
use crate::diagnostics::check_labels;
use crate::error::{check_dim, Error, Result};
use crate::extended::ExtendedReal;
use crate::model::{DualModel, PrimalModel};

/// Undirected graph on `[n]` for the difference operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Graph {
    /// Edges `(i, i+1)`.
    Line(usize),
    /// All pairs `i < j`.
    Complete(usize),
    Edges { n: usize, edges: Vec<(usize, usize)> },
}

impl Graph {
    pub fn n(&self) -> usize {
        match self {
            Graph::Line(n) | Graph::Complete(n) => *n,
            Graph::Edges { n, .. } => *n,
        }
    }

    /// Edge list with each pair ordered `i < j`.
    pub fn edges(&self) -> Result<Vec<(usize, usize)>> {
        let n = self.n();
        let list: Vec<(usize, usize)> = match self {
            Graph::Line(n) => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            Graph::Complete(n) => (0..*n).flat_map(|i| (i + 1..*n).map(move |j| (i, j))).collect(),
            Graph::Edges { edges, .. } => edges.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect(),
        };
        for &(i, j) in &list {
            if i == j || j >= n {
                return Err(Error::InvalidParams(format!("edge ({i}, {j}) is not valid on {n} vertices")));
            }
        }
        if list.is_empty() {
            return Err(Error::InvalidParams("graph has no edges".into()));
        }
        Ok(list)
    }
}

/// `(Dx)_(i,j) = x_j - x_i`, one row per edge.
pub fn difference_operator(graph: &Graph) -> Result<DMatrix<f64>> {
    let edges = graph.edges()?;
    let mut d = DMatrix::zeros(edges.len(), graph.n());
    for (k, &(i, j)) in edges.iter().enumerate() {
        d[(k, i)] = -1.0;
        d[(k, j)] = 1.0;
    }
    Ok(d)
}

fn augmented_points(points: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, s) = points.shape();
    DMatrix::from_fn(r, s + 1, |i, j| if j < s { points[(i, j)] } else { 1.0 })
}

fn svm_operator(points: &DMatrix<f64>, labels: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_dim("labels (rows of the point matrix)", points.nrows(), labels.len())?;
    check_labels(labels)?;
    let qbar = augmented_points(points);
    Ok(DMatrix::from_fn(qbar.nrows(), qbar.ncols(), |i, j| -labels[i] * qbar[(i, j)]))
}

fn svm_f(s: usize, extra: usize) -> Result<ConvexAtom> {
    let n = s + 1 + extra;
    ConvexAtom::half_sq_norm_masked(DVector::zeros(n), (0..n).map(|j| j < s).collect())
}

/// `1/2 |w|^2 + Phi_+(1 - Diag(c) [Q, 1] [w; w_0])`.
pub fn heaviside_svm(points: &DMatrix<f64>, labels: &DVector<f64>, lambda: &DVector<f64>) -> Result<PrimalModel> {
    let b = svm_operator(points, labels)?;
    let (r, n) = b.shape();
    PrimalModel::new(
        svm_f(points.ncols(), 0)?,
        ConvexAtom::zero(1)?,
        DMatrix::zeros(1, n),
        b,
        DVector::from_element(r, -1.0),
        Variant::Plus,
        lambda.clone(),
    )
}

/// Primal whose stationary dual is the SVM dual with `0 <= z <= gamma`:
/// slack block `xi` with `g = |xi|_1`, `A = [0, 0, I]` and
/// `B = -[Diag(c) [Q, 1], Diag(1/gamma)]`.
pub fn box_svm_primal(
    points: &DMatrix<f64>,
    labels: &DVector<f64>,
    lambda: &DVector<f64>,
    gamma: f64,
) -> Result<PrimalModel> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParams(format!("gamma must be positive and finite, got {gamma}")));
    }
    let core = svm_operator(points, labels)?;
    let (r, n0) = core.shape();
    let n = n0 + r;
    let b = DMatrix::from_fn(r, n, |i, j| {
        if j < n0 {
            core[(i, j)]
        } else if j - n0 == i {
            -1.0 / gamma
        } else {
            0.0
        }
    });
    let a = DMatrix::from_fn(r, n, |i, j| if j == n0 + i { 1.0 } else { 0.0 });
    PrimalModel::new(
        svm_f(points.ncols(), r)?,
        ConvexAtom::l1_norm(DVector::zeros(r))?,
        a,
        b,
        DVector::from_element(r, -1.0),
        Variant::Plus,
        lambda.clone(),
    )
}

/// The SVM stationary dual written directly: `y` is pinned to 0 by
/// `g* = delta_{0}`, leaving `1/2 |Q'Diag(c)z|^2 - <1,z> + Psi_+(z)` with
/// `c'z = 0`. With `gamma`, the box-regularized form `0 <= z <= gamma`.
pub fn sparse_svm_dual(
    points: &DMatrix<f64>,
    labels: &DVector<f64>,
    mu: &DVector<f64>,
    gamma: Option<f64>,
) -> Result<DualModel> {
    let p = match gamma {
        None => heaviside_svm(points, labels, mu)?,
        Some(g) => box_svm_primal(points, labels, mu, g)?,
    };
    DualModel::new(p.f, p.g, p.a, p.b, p.rhs, Variant::Plus, mu.clone())
}

/// Closed form of the unregularized SVM dual in `z` alone.
pub fn sparse_svm_dual_value(
    points: &DMatrix<f64>,
    labels: &DVector<f64>,
    mu: &DVector<f64>,
    z: &DVector<f64>,
    zero_tol: f64,
) -> Result<ExtendedReal> {
    check_dim("dual point", points.nrows(), z.len())?;
    check_labels(labels)?;
    if z.iter().any(|&v| v < -zero_tol) || labels.dot(z).abs() > zero_tol {
        return Ok(ExtendedReal::PosInfinity);
    }
    let cz = labels.component_mul(z);
    let v = points.transpose() * cz;
    let card: f64 = (0..z.len()).filter(|&i| z[i].abs() > zero_tol).map(|i| mu[i]).sum();
    Ok(ExtendedReal::Finite(0.5 * v.norm_squared() - z.sum() + card))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Omega {
    Free,
    Nonneg,
    Box { lower: DVector<f64>, upper: DVector<f64> },
}

fn omega_atom(omega: &Omega, n: usize) -> Result<ConvexAtom> {
    match omega {
        Omega::Free => ConvexAtom::zero(n),
        Omega::Nonneg => ConvexAtom::nonneg(n),
        Omega::Box { lower, upper } => {
            check_dim("box bounds", n, lower.len())?;
            ConvexAtom::indicator_box(lower.clone(), upper.clone())
        }
    }
}

/// `delta(x|Omega) + 1/2 |Ax - a|^2 + Phi_0(Dx)`.
pub fn energy_min(
    a: &DMatrix<f64>,
    obs: &DVector<f64>,
    d: &DMatrix<f64>,
    omega: &Omega,
    lambda: &DVector<f64>,
) -> Result<PrimalModel> {
    check_dim("observation length (rows of A)", a.nrows(), obs.len())?;
    let n = a.ncols();
    PrimalModel::new(
        omega_atom(omega, n)?,
        ConvexAtom::half_sq_norm(obs.clone())?,
        a.clone(),
        d.clone(),
        DVector::zeros(d.nrows()),
        Variant::Zero,
        lambda.clone(),
    )
}

/// `1/2 |x - beta|^2 + Phi_0(Dx)` on a graph.
pub fn edge_denoising(graph: &Graph, beta: &DVector<f64>, lambda: &DVector<f64>) -> Result<PrimalModel> {
    check_dim("signal length (vertices)", graph.n(), beta.len())?;
    let n = beta.len();
    energy_min(&DMatrix::identity(n, n), beta, &difference_operator(graph)?, &Omega::Free, lambda)
}

/// `delta(x|x >= 0) + 1/2 |x - beta|^2 + Phi_+(Dx)` on the line graph.
pub fn calcium(beta: &DVector<f64>, lambda: &DVector<f64>) -> Result<PrimalModel> {
    let n = beta.len();
    let d = difference_operator(&Graph::Line(n))?;
    PrimalModel::new(
        ConvexAtom::nonneg(n)?,
        ConvexAtom::half_sq_norm(beta.clone())?,
        DMatrix::identity(n, n),
        d,
        DVector::zeros(n - 1),
        Variant::Plus,
        lambda.clone(),
    )
}

/// `delta(x|x >= 0) + |Ax - a|_1 + Phi_0(Dx)`.
pub fn l1_energy(a: &DMatrix<f64>, obs: &DVector<f64>, d: &DMatrix<f64>, lambda: &DVector<f64>) -> Result<PrimalModel> {
    check_dim("observation length (rows of A)", a.nrows(), obs.len())?;
    PrimalModel::new(
        ConvexAtom::nonneg(a.ncols())?,
        ConvexAtom::l1_norm(obs.clone())?,
        a.clone(),
        d.clone(),
        DVector::zeros(d.nrows()),
        Variant::Zero,
        lambda.clone(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleId {
    HeavisideSvm,
    SparseSvmDual,
    EnergyMin,
    EdgeDenoising,
    Calcium,
    L1Energy,
}

impl ExampleId {
    pub const ALL: [ExampleId; 6] = [
        ExampleId::HeavisideSvm,
        ExampleId::SparseSvmDual,
        ExampleId::EnergyMin,
        ExampleId::EdgeDenoising,
        ExampleId::Calcium,
        ExampleId::L1Energy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExampleId::HeavisideSvm => "heaviside_svm",
            ExampleId::SparseSvmDual => "sparse_svm_dual",
            ExampleId::EnergyMin => "energy_min",
            ExampleId::EdgeDenoising => "edge_denoising",
            ExampleId::Calcium => "calcium",
            ExampleId::L1Energy => "l1_energy",
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExampleId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown example '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Example {
    Primal(PrimalModel),
    Dual(DualModel),
}

/// A small seeded instance of each example, sized for exhaustive
/// enumeration.
pub fn build_example(id: ExampleId, seed: u64) -> Result<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match id {
        ExampleId::HeavisideSvm | ExampleId::SparseSvmDual => {
            let data = separable_2class(2, 6, 1.0, seed)?;
            let w = DVector::from_element(6, 1.0);
            if id == ExampleId::HeavisideSvm {
                Example::Primal(heaviside_svm(&data.points, &data.labels, &w)?)
            } else {
                Example::Dual(sparse_svm_dual(&data.points, &data.labels, &w, None)?)
            }
        }
        ExampleId::EnergyMin => {
            let a = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
            let obs = DVector::from_fn(4, |_, _| rng.random_range(0.0..3.0));
            let d = difference_operator(&Graph::Line(3))?;
            Example::Primal(energy_min(&a, &obs, &d, &Omega::Nonneg, &DVector::from_element(2, 0.5))?)
        }
        ExampleId::EdgeDenoising => {
            let sig = piecewise_signal(4, 1, 0.3, seed)?;
            Example::Primal(edge_denoising(&Graph::Line(4), &sig.observed, &DVector::from_element(3, 1.0))?)
        }
        ExampleId::Calcium => {
            let sig = spike_train(4, 0.4, 0.6, 0.1, seed)?;
            Example::Primal(calcium(&sig.observed, &DVector::from_element(3, 0.5))?)
        }
        ExampleId::L1Energy => {
            let sig = piecewise_signal(3, 1, 0.3, seed)?;
            let d = difference_operator(&Graph::Line(3))?;
            Example::Primal(l1_energy(&DMatrix::identity(3, 3), &sig.observed, &d, &DVector::from_element(2, 0.5))?)
        }
    })
}

/// Labelled points, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: DMatrix<f64>,
    pub labels: DVector<f64>,
    /// `[w; w_0]` with `c_i (q_i'w + w_0) >= 1`, when known by construction.
    pub witness: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub clean: DVector<f64>,
    pub observed: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Separable { dim: usize, n: usize, margin: f64 },
    Nonseparable { dim: usize, n: usize },
    PiecewiseSignal { n: usize, jumps: usize, sigma: f64 },
    SpikeTrain { n: usize, rate: f64, decay: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratedData {
    Classes(Dataset),
    Signal(Signal),
}

pub fn generate_data(spec: &DataSpec, seed: u64) -> Result<GeneratedData> {
    Ok(match *spec {
        DataSpec::Separable { dim, n, margin } => GeneratedData::Classes(separable_2class(dim, n, margin, seed)?),
        DataSpec::Nonseparable { dim, n } => GeneratedData::Classes(nonseparable_2class(dim, n, seed)?),
        DataSpec::PiecewiseSignal { n, jumps, sigma } => GeneratedData::Signal(piecewise_signal(n, jumps, sigma, seed)?),
        DataSpec::SpikeTrain { n, rate, decay, sigma } => {
            GeneratedData::Signal(spike_train(n, rate, decay, sigma, seed)?)
        }
    })
}

fn noise(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> Result<DVector<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParams(format!("sigma must be nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let dist = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok(DVector::from_fn(n, |_, _| dist.sample(rng)))
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let v = DVector::from_fn(dim, |_, _| std.sample(rng));
        let nv = v.norm();
        if nv > 1e-3 {
            return v / nv;
        }
    }
}

/// Alternating labels, points pushed to distance `margin` from the
/// hyperplane `h'q = 0` through the origin; the witness is `[h/margin; 0]`.
pub fn separable_2class(dim: usize, n: usize, margin: f64, seed: u64) -> Result<Dataset> {
    if dim == 0 || n == 0 || !(margin > 0.0) {
        return Err(Error::InvalidParams("separable data needs dim, n and margin positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = unit_vector(&mut rng, dim);
    let labels = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
    let mut points = DMatrix::zeros(n, dim);
    for i in 0..n {
        let mut q = DVector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
        let c = labels[i];
        let push = (margin - c * h.dot(&q)).max(0.0) + rng.random_range(0.0..0.5);
        q += &h * (c * push);
        points.row_mut(i).copy_from(&q.transpose());
    }
    let mut witness = DVector::zeros(dim + 1);
    witness.rows_mut(0, dim).copy_from(&(&h / margin));
    Ok(Dataset {
        points,
        labels,
        witness: Some(witness),
    })
}

/// Random points and labels, with the last point a copy of the first
/// carrying the opposite label.
pub fn nonseparable_2class(dim: usize, n: usize, seed: u64) -> Result<Dataset> {
    if dim == 0 || n < 2 {
        return Err(Error::InvalidParams("nonseparable data needs dim >= 1 and n >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-2.0..2.0));
    let mut labels = DVector::from_fn(n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    let first = points.row(0).into_owned();
    points.row_mut(n - 1).copy_from(&first);
    labels[n - 1] = -labels[0];
    Ok(Dataset {
        points,
        labels,
        witness: None,
    })
}

/// Step function with `jumps` level changes at distinct positions, plus
/// Gaussian noise of deviation `sigma`.
pub fn piecewise_signal(n: usize, jumps: usize, sigma: f64, seed: u64) -> Result<Signal> {
    if n == 0 || jumps >= n {
        return Err(Error::InvalidParams(format!("need jumps < n, got jumps = {jumps}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cuts: Vec<usize> = rand::seq::index::sample(&mut rng, n - 1, jumps)
        .into_iter()
        .map(|k| k + 1)
        .collect();
    cuts.sort_unstable();
    let mut level: f64 = rng.random_range(0..5) as f64;
    let mut clean = DVector::zeros(n);
    let mut next = cuts.iter().peekable();
    for i in 0..n {
        if next.peek() == Some(&&i) {
            next.next();
            let step = rng.random_range(1..4) as f64;
            level += if rng.random_bool(0.5) { step } else { -step };
        }
        clean[i] = level;
    }
    let observed = &clean + noise(&mut rng, n, sigma)?;
    Ok(Signal { clean, observed })
}

/// Autoregressive calcium trace `c_t = decay c_{t-1} + s_t` driven by unit
/// spikes of probability `rate`, observed with Gaussian noise.
pub fn spike_train(n: usize, rate: f64, decay: f64, sigma: f64, seed: u64) -> Result<Signal> {
    if n == 0 || !(0.0..=1.0).contains(&rate) || !(0.0..1.0).contains(&decay) {
        return Err(Error::InvalidParams("spike train needs n >= 1, rate in [0,1], decay in [0,1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clean = DVector::zeros(n);
    let mut c = 0.0;
    for t in 0..n {
        let spike = if rng.random_bool(rate) { 1.0 } else { 0.0 };
        c = decay * c + spike;
        clean[t] = c;
    }
    let observed = &clean + noise(&mut rng, n, sigma)?;
    Ok(Signal { clean, observed })
}
