//! Quadrature rules on the unit interval and on the reference triangle
//! `{(0,0), (1,0), (0,1)}`.
//!
//! Triangle weights are normalized so that they sum to the reference area
//! `1/2`; interval weights sum to `1`.

/// Gauss-Legendre rule mapped to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Chebyshev-like initial guess for the i-th root on [-1, 1].
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[n - 1 - i] = 0.5 * (x + 1.0);
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    /// Smallest rule integrating degree `degree` exactly.
    pub fn with_degree(degree: usize) -> Self {
        Self::new(degree / 2 + 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on the reference triangle.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    /// Points `(xi, eta)` in reference coordinates.
    pub points: Vec<[f64; 2]>,
    /// Weights summing to `1/2`.
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl TriangleRule {
    /// Symmetric Gauss rule exact to at least `degree`.
    ///
    /// Degrees up to 8 use fully symmetric rules with positive weights;
    /// higher degrees fall back to a collapsed (Duffy) tensor rule.
    pub fn with_degree(degree: usize) -> Self {
        match degree {
            0 | 1 => symmetric(1, &[Orbit::Centroid(1.0)]),
            2 => symmetric(2, &[Orbit::Edge(1.0 / 6.0, 1.0 / 3.0)]),
            3 | 4 => symmetric(
                4,
                &[
                    Orbit::Edge(0.445948490915965, 0.223381589678011),
                    Orbit::Edge(0.091576213509771, 0.109951743655322),
                ],
            ),
            5 => symmetric(
                5,
                &[
                    Orbit::Centroid(0.225),
                    Orbit::Edge(0.470142064105115, 0.132394152788506),
                    Orbit::Edge(0.101286507323456, 0.125939180544827),
                ],
            ),
            6 => symmetric(
                6,
                &[
                    Orbit::Edge(0.249286745170910, 0.116786275726379),
                    Orbit::Edge(0.063089014491502, 0.050844906370207),
                    Orbit::General(0.053145049844817, 0.310352451033784, 0.082851075618374),
                ],
            ),
            7 | 8 => symmetric(
                8,
                &[
                    Orbit::Centroid(0.144315607677787),
                    Orbit::Edge(0.459292588292723, 0.095091634267285),
                    Orbit::Edge(0.170569307751760, 0.103217370534718),
                    Orbit::Edge(0.050547228317031, 0.032458497623198),
                    Orbit::General(0.008394777409958, 0.263112829634638, 0.027230314174435),
                ],
            ),
            _ => collapsed(degree),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

enum Orbit {
    /// Weight of the barycenter.
    Centroid(f64),
    /// Barycentric `(a, a, 1-2a)` and permutations, weight.
    Edge(f64, f64),
    /// Barycentric `(a, b, 1-a-b)` and all six permutations, weight.
    General(f64, f64, f64),
}

/// Builds a rule from barycentric orbits; orbit weights are normalized to sum to 1.
fn symmetric(degree: usize, orbits: &[Orbit]) -> TriangleRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut push = |l1: f64, l2: f64, w: f64| {
        // (l1, l2, l3) barycentric on vertices (0,0), (1,0), (0,1): xi = l2, eta = l3.
        let l3 = 1.0 - l1 - l2;
        points.push([l2, l3]);
        weights.push(0.5 * w);
    };
    for orbit in orbits {
        match *orbit {
            Orbit::Centroid(w) => push(1.0 / 3.0, 1.0 / 3.0, w),
            Orbit::Edge(a, w) => {
                let b = 1.0 - 2.0 * a;
                push(a, a, w);
                push(a, b, w);
                push(b, a, w);
            }
            Orbit::General(a, b, w) => {
                let c = 1.0 - a - b;
                for (p, q) in [(a, b), (b, a), (a, c), (c, a), (b, c), (c, b)] {
                    push(p, q, w);
                }
            }
        }
    }
    TriangleRule {
        points,
        weights,
        degree,
    }
}

fn collapsed(degree: usize) -> TriangleRule {
    let outer = GaussLegendre::with_degree(degree + 1);
    let inner = GaussLegendre::with_degree(degree);
    let mut points = Vec::with_capacity(outer.len() * inner.len());
    let mut weights = Vec::with_capacity(outer.len() * inner.len());
    for (u, wu) in outer.iter() {
        for (v, wv) in inner.iter() {
            points.push([u, v * (1.0 - u)]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    TriangleRule {
        points,
        weights,
        degree,
    }
}

/// Exact integral of `xi^a eta^b` over the reference triangle: `a! b! / (a+b+2)!`.
pub fn reference_monomial_integral(a: usize, b: usize) -> f64 {
    let mut num = 1.0;
    for k in 1..=a {
        num *= k as f64;
    }
    for k in 1..=b {
        num *= k as f64;
    }
    let mut den = 1.0;
    for k in 1..=(a + b + 2) {
        den *= k as f64;
    }
    num / den
}
