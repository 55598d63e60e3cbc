//! Shared domain types: clients, graphs, parameter vectors, feasible regions
//! and local datasets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based client index, `1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClientId(pub usize);

impl ClientId {
    /// Zero-based position for indexing per-client vectors.
    #[inline]
    pub fn index(self) -> usize {
        self.0 - 1
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        ClientId(i + 1)
    }
}

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Undirected communication graph over clients `1..=N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_clients: usize,
    edges: Vec<(ClientId, ClientId)>,
    neighbors: Vec<Vec<ClientId>>,
}

impl Graph {
    /// Fully connected graph on `n` clients.
    pub fn complete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("graph needs at least one client".into()));
        }
        let mut edges = Vec::with_capacity(n * (n - 1) / 2);
        for i in 1..=n {
            for j in (i + 1)..=n {
                edges.push((ClientId(i), ClientId(j)));
            }
        }
        Self::from_edges(n, edges)
    }

    /// Graph from an explicit edge list. Pairs are normalized to `(low, high)`
    /// and deduplicated; self-loops and out-of-range indices are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (ClientId, ClientId)>) -> Result<Self> {
        let mut norm: Vec<(ClientId, ClientId)> = Vec::new();
        for (a, b) in edges {
            if a.0 == 0 || b.0 == 0 || a.0 > n || b.0 > n {
                return Err(Error::InvalidArgument(format!("edge ({a},{b}) outside 1..={n}")));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at {a}")));
            }
            norm.push(if a < b { (a, b) } else { (b, a) });
        }
        norm.sort_unstable();
        norm.dedup();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &norm {
            neighbors[a.index()].push(b);
            neighbors[b.index()].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        Ok(Graph {
            num_clients: n,
            edges: norm,
            neighbors,
        })
    }

    pub fn num_clients(&self) -> usize {
        self.num_clients
    }

    pub fn edges(&self) -> &[(ClientId, ClientId)] {
        &self.edges
    }

    pub fn neighbors(&self, v: ClientId) -> &[ClientId] {
        &self.neighbors[v.index()]
    }

    pub fn degree(&self, v: ClientId) -> usize {
        self.neighbors[v.index()].len()
    }

    pub fn is_complete(&self) -> bool {
        let n = self.num_clients;
        self.edges.len() == n * (n - 1) / 2
    }

    pub fn has_edge(&self, a: ClientId, b: ClientId) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn clients(&self) -> impl Iterator<Item = ClientId> {
        (1..=self.num_clients).map(ClientId)
    }
}

/// Model parameter vector. All coordinates are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    params: Vec<f64>,
}

impl ModelState {
    pub fn new(params: Vec<f64>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidArgument("model dimension must be positive".into()));
        }
        if let Some(i) = params.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("parameter {i} is not finite")));
        }
        Ok(ModelState { params })
    }

    pub fn zeros(d: usize) -> Self {
        ModelState { params: vec![0.0; d.max(1)] }
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }
}

/// Closed Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("ball radius must be finite and >= 0, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        crate::linalg::dist(x, &self.center) <= self.radius + tol
    }
}

/// Feasible set Θ, a trust ball, or their intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeasibleRegion {
    FullSpace,
    Ball(Ball),
    /// `Θ ∩ B(θ_ref, ϱ)`: the domain of the noisy corrective steps.
    Intersection(Ball, Ball),
}

impl FeasibleRegion {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Ok(FeasibleRegion::Ball(Ball::new(center, radius)?))
    }

    /// Intersect with a trust ball. The result must be non-empty.
    pub fn intersect(&self, trust: Ball) -> Result<Self> {
        match self {
            FeasibleRegion::FullSpace => Ok(FeasibleRegion::Ball(trust)),
            FeasibleRegion::Ball(b) => {
                let gap = crate::linalg::dist(&b.center, &trust.center);
                if gap > b.radius + trust.radius {
                    return Err(Error::InvalidArgument("trust ball does not meet the feasible set".into()));
                }
                Ok(FeasibleRegion::Intersection(b.clone(), trust))
            }
            FeasibleRegion::Intersection(..) => Err(Error::InvalidArgument(
                "region is already an intersection".into(),
            )),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FeasibleRegion::FullSpace => true,
            FeasibleRegion::Ball(b) => b.contains(x, tol),
            FeasibleRegion::Intersection(a, b) => a.contains(x, tol) && b.contains(x, tol),
        }
    }

    /// Euclidean diameter (`R` for Θ, `R_cert` for the intersection).
    /// Infinite for the full space.
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleRegion::FullSpace => f64::INFINITY,
            FeasibleRegion::Ball(b) => 2.0 * b.radius,
            FeasibleRegion::Intersection(a, b) => lens_diameter(a, b),
        }
    }
}

fn lens_diameter(a: &Ball, b: &Ball) -> f64 {
    let gap = crate::linalg::dist(&a.center, &b.center);
    let (small, big) = if a.radius <= b.radius { (a, b) } else { (b, a) };
    if gap + small.radius <= big.radius {
        return 2.0 * small.radius;
    }
    if gap >= a.radius + b.radius {
        return 0.0;
    }
    // Signed distance from the small center to the radical plane, toward the big center.
    let offset = (gap * gap + small.radius * small.radius - big.radius * big.radius) / (2.0 * gap);
    if offset <= 0.0 {
        2.0 * small.radius
    } else {
        2.0 * (small.radius * small.radius - offset * offset).max(0.0).sqrt()
    }
}

/// One training example. For classification tasks the label is `0.0` or `1.0`;
/// regression-style tasks ignore it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: f64,
}

/// Which part of a client's data a computation ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    Full,
    Retained,
    Forget,
}

/// Local dataset `D_u` with its designated forget subset `D_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    examples: Vec<Example>,
    forget: Vec<usize>,
    retained: Vec<usize>,
}

impl ClientDataset {
    pub fn new(examples: Vec<Example>) -> Self {
        let retained = (0..examples.len()).collect();
        ClientDataset {
            examples,
            forget: Vec::new(),
            retained,
        }
    }

    /// Dataset with the given forget indices. Indices are sorted and must be
    /// distinct and within `0..n_u`.
    pub fn with_forget(examples: Vec<Example>, mut forget: Vec<usize>) -> Result<Self> {
        forget.sort_unstable();
        let n = examples.len();
        if forget.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate forget index".into()));
        }
        if let Some(&bad) = forget.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!("forget index {bad} outside 0..{n}")));
        }
        let mut retained = Vec::with_capacity(n - forget.len());
        let mut k = 0;
        for i in 0..n {
            if k < forget.len() && forget[k] == i {
                k += 1;
            } else {
                retained.push(i);
            }
        }
        Ok(ClientDataset {
            examples,
            forget,
            retained,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn example(&self, i: usize) -> &Example {
        &self.examples[i]
    }

    /// `n_u`
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// `m = |D_f|`
    pub fn forget_len(&self) -> usize {
        self.forget.len()
    }

    pub fn forget_indices(&self) -> &[usize] {
        &self.forget
    }

    pub fn retained_indices(&self) -> &[usize] {
        &self.retained
    }

    pub fn is_forget(&self, i: usize) -> bool {
        self.forget.binary_search(&i).is_ok()
    }

    /// Indices of a subset. `Full` allocates `0..n_u`.
    pub fn indices(&self, subset: Subset) -> std::borrow::Cow<'_, [usize]> {
        match subset {
            Subset::Full => std::borrow::Cow::Owned((0..self.len()).collect()),
            Subset::Retained => std::borrow::Cow::Borrowed(&self.retained),
            Subset::Forget => std::borrow::Cow::Borrowed(&self.forget),
        }
    }

    pub fn subset_len(&self, subset: Subset) -> usize {
        match subset {
            Subset::Full => self.len(),
            Subset::Retained => self.retained.len(),
            Subset::Forget => self.forget.len(),
        }
    }

    /// `D_u ∖ D_f` as a dataset with an empty forget set.
    pub fn without_forget(&self) -> ClientDataset {
        ClientDataset::new(self.retained.iter().map(|&i| self.examples[i].clone()).collect())
    }

    /// Same examples, forget set replaced.
    pub fn reassign_forget(&self, forget: Vec<usize>) -> Result<ClientDataset> {
        ClientDataset::with_forget(self.examples.clone(), forget)
    }

    pub fn dim(&self) -> Option<usize> {
        self.examples.first().map(|e| e.features.len())
    }
}

/// Alignment mode of the corrective step at the unlearning client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `g_u = −∇ℓ_{u∖f}(θ)`
    Exact,
    /// `g_u = (m/n_u)·∇ℓ_f(θ)` from a forget-set minibatch.
    Lightweight,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Lightweight => "lightweight",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Mode::Exact),
            "lightweight" => Ok(Mode::Lightweight),
            other => Err(Error::InvalidArgument(format!("unknown mode '{other}'"))),
        }
    }
}
