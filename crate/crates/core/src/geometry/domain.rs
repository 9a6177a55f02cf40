use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::{GeometryError, Point};

/// Number of angular samples used for star-domain checks (positivity, curvature).
const STAR_SAMPLES: usize = 4096;

/// Radius function `r(θ) = mean + Σ cos[n-1]·cos(nθ) + sin[n-1]·sin(nθ)` of a
/// domain that is star-shaped about the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarShape {
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl StarShape {
    pub fn radius(&self, theta: f64) -> f64 {
        self.derivatives(theta).0
    }

    /// `(r, r', r'')` at `theta`.
    pub fn derivatives(&self, theta: f64) -> (f64, f64, f64) {
        let mut r = self.mean;
        let mut dr = 0.0;
        let mut ddr = 0.0;
        let harmonics = self.cos.len().max(self.sin.len());
        for n in 1..=harmonics {
            let a = self.cos.get(n - 1).copied().unwrap_or(0.0);
            let b = self.sin.get(n - 1).copied().unwrap_or(0.0);
            let nf = n as f64;
            let (s, c) = (nf * theta).sin_cos();
            r += a * c + b * s;
            dr += nf * (-a * s + b * c);
            ddr += -nf * nf * (a * c + b * s);
        }
        (r, dr, ddr)
    }

    /// Upper bound on `r(θ)` from the coefficient magnitudes.
    fn radius_bound(&self) -> f64 {
        self.mean.abs()
            + self.cos.iter().map(|c| c.abs()).sum::<f64>()
            + self.sin.iter().map(|c| c.abs()).sum::<f64>()
    }

    fn min_radius(&self) -> f64 {
        (0..STAR_SAMPLES)
            .map(|i| self.radius(TAU * i as f64 / STAR_SAMPLES as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// Signed curvature numerator `r² + 2r'² − r r''`; its sign is the sign of
    /// the boundary curvature for a counter-clockwise polar curve.
    fn curvature_numerator(&self, theta: f64) -> f64 {
        let (r, dr, ddr) = self.derivatives(theta);
        r * r + 2.0 * dr * dr - r * ddr
    }

    /// Boundary curvature at polar angle `theta`.
    pub fn curvature(&self, theta: f64) -> f64 {
        let (r, dr, _) = self.derivatives(theta);
        self.curvature_numerator(theta) / (r * r + dr * dr).powf(1.5)
    }
}

/// Shape of a simply connected flow domain. All primitives are centred at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainKind {
    UnitDisk,
    Ellipse { a: f64, b: f64 },
    Rectangle { width: f64, height: f64 },
    Star(StarShape),
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::UnitDisk => "unit-disk",
            DomainKind::Ellipse { .. } => "ellipse",
            DomainKind::Rectangle { .. } => "rectangle",
            DomainKind::Star(_) => "star",
        }
    }
}

/// Unvalidated domain description as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainDescription {
    #[serde(flatten)]
    pub kind: DomainKind,
    /// Declared convexity; checked against [`convexity_check`] when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convex: Option<bool>,
}

impl From<DomainKind> for DomainDescription {
    fn from(kind: DomainKind) -> Self {
        Self { kind, convex: None }
    }
}

/// A validated flow domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainDescription", into = "DomainDescription")]
pub struct DomainSpec {
    kind: DomainKind,
    convex: bool,
}

impl TryFrom<DomainDescription> for DomainSpec {
    type Error = GeometryError;
    fn try_from(desc: DomainDescription) -> Result<Self, GeometryError> {
        make_domain(&desc)
    }
}

impl From<DomainSpec> for DomainDescription {
    fn from(spec: DomainSpec) -> Self {
        Self {
            kind: spec.kind,
            convex: Some(spec.convex),
        }
    }
}

/// Validates a domain description.
pub fn make_domain(desc: &DomainDescription) -> Result<DomainSpec, GeometryError> {
    let positive = |name: &'static str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(GeometryError::NonPositive { name, value: v })
        }
    };
    match &desc.kind {
        DomainKind::UnitDisk => {}
        DomainKind::Ellipse { a, b } => {
            positive("a", *a)?;
            positive("b", *b)?;
        }
        DomainKind::Rectangle { width, height } => {
            positive("width", *width)?;
            positive("height", *height)?;
        }
        DomainKind::Star(star) => {
            let all_finite = star.mean.is_finite()
                && star.cos.iter().chain(&star.sin).all(|c| c.is_finite());
            let min = star.min_radius();
            if !all_finite || min <= 0.0 {
                return Err(GeometryError::StarRadius { min });
            }
        }
    }
    let mut spec = DomainSpec {
        kind: desc.kind.clone(),
        convex: false,
    };
    spec.convex = convexity_check(&spec);
    if let Some(declared) = desc.convex {
        if declared != spec.convex {
            return Err(GeometryError::ConvexityMismatch {
                declared,
                measured: spec.convex,
            });
        }
    }
    Ok(spec)
}

/// True iff the boundary curvature is nonnegative everywhere. Primitives are
/// analytic; star domains are sampled at 4096 angles.
pub fn convexity_check(domain: &DomainSpec) -> bool {
    match &domain.kind {
        DomainKind::UnitDisk | DomainKind::Ellipse { .. } | DomainKind::Rectangle { .. } => true,
        DomainKind::Star(star) => (0..STAR_SAMPLES).all(|i| {
            star.curvature_numerator(TAU * i as f64 / STAR_SAMPLES as f64) >= -1e-12
        }),
    }
}

/// Exact (open-set) membership test.
pub fn contains(domain: &DomainSpec, p: Point) -> bool {
    domain.contains(p)
}

impl DomainSpec {
    pub fn unit_disk() -> Self {
        make_domain(&DomainKind::UnitDisk.into()).expect("unit disk is valid")
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self, GeometryError> {
        make_domain(&DomainKind::Ellipse { a, b }.into())
    }

    pub fn rectangle(width: f64, height: f64) -> Result<Self, GeometryError> {
        make_domain(&DomainKind::Rectangle { width, height }.into())
    }

    pub fn star(mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self, GeometryError> {
        make_domain(&DomainKind::Star(StarShape { mean, cos, sin }).into())
    }

    /// The peanut `r(θ) = 1 + 0.4 cos 2θ`.
    pub fn peanut() -> Self {
        Self::star(1.0, vec![0.0, 0.4], vec![]).expect("peanut is valid")
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn is_unit_disk(&self) -> bool {
        matches!(self.kind, DomainKind::UnitDisk)
    }

    pub fn contains(&self, p: Point) -> bool {
        match &self.kind {
            DomainKind::UnitDisk => p.norm_sq() < 1.0,
            DomainKind::Ellipse { a, b } => (p.x / a).powi(2) + (p.y / b).powi(2) < 1.0,
            DomainKind::Rectangle { width, height } => {
                p.x.abs() < 0.5 * width && p.y.abs() < 0.5 * height
            }
            DomainKind::Star(star) => {
                let rho = p.norm();
                rho == 0.0 || rho < star.radius(p.y.atan2(p.x))
            }
        }
    }

    /// `(min, max)` corners of a box containing the closure of the domain.
    pub fn bounding_box(&self) -> (Point, Point) {
        let (hx, hy) = match &self.kind {
            DomainKind::UnitDisk => (1.0, 1.0),
            DomainKind::Ellipse { a, b } => (*a, *b),
            DomainKind::Rectangle { width, height } => (0.5 * width, 0.5 * height),
            DomainKind::Star(star) => {
                let r = star.radius_bound();
                (r, r)
            }
        };
        (Point::new(-hx, -hy), Point::new(hx, hy))
    }

    pub fn area(&self) -> f64 {
        match &self.kind {
            DomainKind::UnitDisk => PI,
            DomainKind::Ellipse { a, b } => PI * a * b,
            DomainKind::Rectangle { width, height } => width * height,
            DomainKind::Star(star) => {
                let sq: f64 = star.cos.iter().chain(&star.sin).map(|c| c * c).sum();
                PI * (star.mean * star.mean + 0.5 * sq)
            }
        }
    }

    /// Point on the boundary at parameter `t ∈ [0, 1)`, traversed counter-clockwise.
    pub fn boundary_point(&self, t: f64) -> Point {
        let theta = TAU * t;
        match &self.kind {
            DomainKind::UnitDisk => Point::from_polar(1.0, theta),
            DomainKind::Ellipse { a, b } => Point::new(a * theta.cos(), b * theta.sin()),
            DomainKind::Rectangle { width, height } => {
                let (w, h) = (*width, *height);
                let mut s = t.rem_euclid(1.0) * 2.0 * (w + h);
                // Walk from the bottom-left corner.
                if s < w {
                    return Point::new(-0.5 * w + s, -0.5 * h);
                }
                s -= w;
                if s < h {
                    return Point::new(0.5 * w, -0.5 * h + s);
                }
                s -= h;
                if s < w {
                    return Point::new(0.5 * w - s, 0.5 * h);
                }
                s -= w;
                Point::new(-0.5 * w, 0.5 * h - s)
            }
            DomainKind::Star(star) => Point::from_polar(star.radius(theta), theta),
        }
    }

    /// Nearest boundary point and its outward unit normal.
    pub fn nearest_boundary(&self, p: Point) -> (Point, Point) {
        match &self.kind {
            DomainKind::UnitDisk => {
                let rho = p.norm();
                let n = if rho > 0.0 {
                    p * (1.0 / rho)
                } else {
                    Point::new(1.0, 0.0)
                };
                (n, n)
            }
            DomainKind::Rectangle { width, height } => {
                let (hw, hh) = (0.5 * width, 0.5 * height);
                let candidates = [
                    (hw - p.x, Point::new(hw, p.y), Point::new(1.0, 0.0)),
                    (p.x + hw, Point::new(-hw, p.y), Point::new(-1.0, 0.0)),
                    (hh - p.y, Point::new(p.x, hh), Point::new(0.0, 1.0)),
                    (p.y + hh, Point::new(p.x, -hh), Point::new(0.0, -1.0)),
                ];
                let best = candidates
                    .iter()
                    .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
                    .expect("four sides");
                (best.1, best.2)
            }
            _ => {
                let t = self.nearest_parameter(p);
                let q = self.boundary_point(t);
                let dt = 1e-7;
                let tangent = self.boundary_point(t + dt) - self.boundary_point(t - dt);
                // Counter-clockwise traversal: outward normal is the tangent turned clockwise.
                let n = Point::new(tangent.y, -tangent.x);
                (q, n * (1.0 / n.norm()))
            }
        }
    }

    /// Distance from `p` to the boundary curve.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match &self.kind {
            DomainKind::UnitDisk => (1.0 - p.norm()).abs(),
            _ => self.nearest_boundary(p).0.dist(p),
        }
    }

    fn nearest_parameter(&self, p: Point) -> f64 {
        const COARSE: usize = 2048;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for i in 0..COARSE {
            let d = self.boundary_point(i as f64 / COARSE as f64).dist(p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        // Bisection on the stationarity condition (b(t) − p)·b'(t) = 0.
        let dt = 1e-6;
        let g = |t: f64| {
            let tangent = self.boundary_point(t + dt) - self.boundary_point(t - dt);
            (self.boundary_point(t) - p).dot(tangent)
        };
        let mut lo = (best as f64 - 1.0) / COARSE as f64;
        let mut hi = (best as f64 + 1.0) / COARSE as f64;
        let (glo, ghi) = (g(lo), g(hi));
        if glo > 0.0 || ghi < 0.0 {
            return (best as f64 / COARSE as f64).rem_euclid(1.0);
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).rem_euclid(1.0)
    }

    /// Largest distance between two boundary points (sampled for curved kinds).
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            DomainKind::UnitDisk => 2.0,
            DomainKind::Ellipse { a, b } => 2.0 * a.max(*b),
            DomainKind::Rectangle { width, height } => width.hypot(*height),
            DomainKind::Star(_) => {
                const N: usize = 720;
                let pts: Vec<Point> = (0..N)
                    .map(|i| self.boundary_point(i as f64 / N as f64))
                    .collect();
                let mut best: f64 = 0.0;
                for (i, a) in pts.iter().enumerate() {
                    for b in &pts[i + 1..] {
                        best = best.max(a.dist(*b));
                    }
                }
                best
            }
        }
    }

    /// Enclosing radius `R = 2·diam(Ω)`, so that `Ω ⊂ B_R(x)` for every `x ∈ Ω`.
    pub fn enclosing_radius(&self) -> f64 {
        2.0 * self.diameter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_disk_membership() {
        let d = DomainSpec::unit_disk();
        assert!(d.contains(Point::ORIGIN));
        assert!(!d.contains(Point::new(1.01, 0.0)));
        assert!(!d.contains(Point::new(1.0, 0.0)));
    }

    #[test]
    fn ellipse_membership_and_convexity() {
        let e = DomainSpec::ellipse(1.5, 1.0).unwrap();
        // (1.2/1.5)² + 0.5² = 0.89
        assert!(e.contains(Point::new(1.2, 0.5)));
        assert!(!e.contains(Point::new(1.2, 0.7)));
        assert!(e.is_convex());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            DomainSpec::ellipse(0.0, 1.0),
            Err(GeometryError::NonPositive { name: "a", .. })
        ));
        assert!(DomainSpec::rectangle(1.0, -2.0).is_err());
        assert!(matches!(
            DomainSpec::star(1.0, vec![0.0, 1.2], vec![]),
            Err(GeometryError::StarRadius { .. })
        ));
    }

    #[test]
    fn peanut_is_not_convex() {
        let p = DomainSpec::peanut();
        assert!(!p.is_convex());
        // r = 0.6, r' = 0, r'' = 1.6 at the neck: 0.36 − 0.96 < 0.
        if let DomainKind::Star(s) = p.kind() {
            assert!(s.curvature(0.5 * PI) < 0.0);
            assert!(s.curvature(0.0) > 0.0);
        }
        assert!(p.contains(Point::new(1.3, 0.0)));
        assert!(!p.contains(Point::new(0.0, 0.65)));
    }

    #[test]
    fn rectangle_is_convex() {
        assert!(DomainSpec::rectangle(2.0, 1.0).unwrap().is_convex());
        assert!(DomainSpec::unit_disk().is_convex());
    }

    #[test]
    fn declared_convexity_is_checked() {
        let desc = DomainDescription {
            kind: DomainSpec::peanut().kind().clone(),
            convex: Some(true),
        };
        assert!(matches!(
            make_domain(&desc),
            Err(GeometryError::ConvexityMismatch { .. })
        ));
    }

    #[test]
    fn areas_and_diameters() {
        assert!((DomainSpec::ellipse(1.5, 1.0).unwrap().area() - 1.5 * PI).abs() < 1e-14);
        let p = DomainSpec::peanut();
        assert!((p.area() - PI * (1.0 + 0.08)).abs() < 1e-12);
        assert!((p.diameter() - 2.8).abs() < 1e-9);
    }

    #[test]
    fn nearest_boundary_on_ellipse() {
        let e = DomainSpec::ellipse(1.5, 1.0).unwrap();
        let (q, n) = e.nearest_boundary(Point::new(0.0, 0.5));
        assert!(q.dist(Point::new(0.0, 1.0)) < 1e-9);
        assert!(n.dist(Point::new(0.0, 1.0)) < 1e-6);
        assert!((e.boundary_distance(Point::new(1.0, 0.0)) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn serde_round_trip() {
        let json = r#"{"kind":"star","mean":1.0,"cos":[0.0,0.4]}"#;
        let d: DomainSpec = serde_json::from_str(json).unwrap();
        assert_eq!(d, DomainSpec::peanut());
        let back: DomainSpec = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<DomainSpec>(r#"{"kind":"ellipse","a":-1,"b":1}"#).is_err());
    }
}
