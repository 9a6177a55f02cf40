use super::{DomainSpec, GeometryError, Point};

/// Marker for "no interior cell" in index tables.
pub const NONE: u32 = u32::MAX;

/// Fractions below this are reclassified as exterior cells.
const MIN_FRACTION: f64 = 1e-6;

/// Neighbour directions, in the order used by [`Grid::neighbors`] and [`Grid::legs`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    East = 0,
    West = 1,
    North = 2,
    South = 3,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::East, Dir::West, Dir::North, Dir::South];

    pub fn offset(self) -> (i64, i64) {
        match self {
            Dir::East => (1, 0),
            Dir::West => (-1, 0),
            Dir::North => (0, 1),
            Dir::South => (0, -1),
        }
    }

    pub fn unit(self) -> Point {
        let (dx, dy) = self.offset();
        Point::new(dx as f64, dy as f64)
    }
}

/// Uniform Cartesian discretization of a domain. Cell centres (nodes) sit at
/// integer multiples of `h`, so a grid at spacing `2h` is a subset of one at `h`.
#[derive(Clone, Debug)]
pub struct Grid {
    domain: DomainSpec,
    h: f64,
    i0: i64,
    j0: i64,
    nx: usize,
    ny: usize,
    node_to_cell: Vec<u32>,
    cell_to_node: Vec<u32>,
    neighbors: Vec<[u32; 4]>,
    legs: Vec<[f64; 4]>,
}

/// Discretizes `domain` at spacing `h`.
pub fn rasterize(domain: &DomainSpec, h: f64) -> Result<Grid, GeometryError> {
    Grid::new(domain, h)
}

impl Grid {
    pub fn new(domain: &DomainSpec, h: f64) -> Result<Self, GeometryError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(GeometryError::NonPositive { name: "h", value: h });
        }
        let (lo, hi) = domain.bounding_box();
        let i0 = (lo.x / h).floor() as i64 - 1;
        let j0 = (lo.y / h).floor() as i64 - 1;
        let i1 = (hi.x / h).ceil() as i64 + 1;
        let j1 = (hi.y / h).ceil() as i64 + 1;
        let nx = (i1 - i0 + 1) as usize;
        let ny = (j1 - j0 + 1) as usize;
        if nx.saturating_mul(ny) > u32::MAX as usize / 2 {
            return Err(GeometryError::GridTooLarge { h });
        }

        let mut inside = vec![false; nx * ny];
        for jj in 0..ny {
            for ii in 0..nx {
                let p = Point::new((i0 + ii as i64) as f64 * h, (j0 + jj as i64) as f64 * h);
                inside[jj * nx + ii] = domain.contains(p);
            }
        }

        let mut legs_by_node = vec![[1.0f64; 4]; nx * ny];
        loop {
            let mut removed = false;
            for jj in 1..ny - 1 {
                for ii in 1..nx - 1 {
                    let node = jj * nx + ii;
                    if !inside[node] {
                        continue;
                    }
                    let p = Point::new((i0 + ii as i64) as f64 * h, (j0 + jj as i64) as f64 * h);
                    let mut fr = [1.0; 4];
                    for d in Dir::ALL {
                        let (dx, dy) = d.offset();
                        let nb = (jj as i64 + dy) as usize * nx + (ii as i64 + dx) as usize;
                        if !inside[nb] {
                            fr[d as usize] = boundary_fraction(domain, p, d.unit() * h);
                        }
                    }
                    if fr.iter().any(|&f| f < MIN_FRACTION) {
                        inside[node] = false;
                        removed = true;
                    } else {
                        legs_by_node[node] = fr;
                    }
                }
            }
            if !removed {
                break;
            }
        }

        let mut node_to_cell = vec![NONE; nx * ny];
        let mut cell_to_node = Vec::new();
        for (node, &ins) in inside.iter().enumerate() {
            if ins {
                node_to_cell[node] = cell_to_node.len() as u32;
                cell_to_node.push(node as u32);
            }
        }
        if cell_to_node.is_empty() {
            return Err(GeometryError::GridTooCoarse { h });
        }
        let mut neighbors = Vec::with_capacity(cell_to_node.len());
        let mut legs = Vec::with_capacity(cell_to_node.len());
        for &node in &cell_to_node {
            let node = node as usize;
            let mut nb = [NONE; 4];
            for d in Dir::ALL {
                let (dx, dy) = d.offset();
                let other = (node as i64 + dy * nx as i64 + dx) as usize;
                nb[d as usize] = node_to_cell[other];
            }
            neighbors.push(nb);
            legs.push(legs_by_node[node]);
        }

        Ok(Self {
            domain: domain.clone(),
            h,
            i0,
            j0,
            nx,
            ny,
            node_to_cell,
            cell_to_node,
            neighbors,
            legs,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of interior cells.
    pub fn len(&self) -> usize {
        self.cell_to_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_to_node.is_empty()
    }

    /// `(i0, j0, nx, ny)`: index origin and extent of the node lattice.
    pub fn lattice(&self) -> (i64, i64, usize, usize) {
        (self.i0, self.j0, self.nx, self.ny)
    }

    /// Corners of the node lattice.
    pub fn bounding_box(&self) -> (Point, Point) {
        let h = self.h;
        (
            Point::new(self.i0 as f64 * h, self.j0 as f64 * h),
            Point::new(
                (self.i0 + self.nx as i64 - 1) as f64 * h,
                (self.j0 + self.ny as i64 - 1) as f64 * h,
            ),
        )
    }

    /// Integer lattice coordinates of a cell.
    pub fn cell_ij(&self, cell: usize) -> (i64, i64) {
        let node = self.cell_to_node[cell] as usize;
        (
            self.i0 + (node % self.nx) as i64,
            self.j0 + (node / self.nx) as i64,
        )
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        let (i, j) = self.cell_ij(cell);
        Point::new(i as f64 * self.h, j as f64 * self.h)
    }

    /// Interior cell at lattice coordinates `(i, j)`, if any.
    pub fn cell_at(&self, i: i64, j: i64) -> Option<usize> {
        let ii = i - self.i0;
        let jj = j - self.j0;
        if ii < 0 || jj < 0 || ii >= self.nx as i64 || jj >= self.ny as i64 {
            return None;
        }
        match self.node_to_cell[jj as usize * self.nx + ii as usize] {
            NONE => None,
            c => Some(c as usize),
        }
    }

    /// Row-major node index of a cell (rows run along `x`).
    pub fn node_of(&self, cell: usize) -> usize {
        self.cell_to_node[cell] as usize
    }

    /// Interior cell of a row-major node index, if any.
    pub fn cell_of_node(&self, node: usize) -> Option<usize> {
        match self.node_to_cell[node] {
            NONE => None,
            c => Some(c as usize),
        }
    }

    /// Neighbour cells in `[E, W, N, S]` order; [`NONE`] marks a boundary leg.
    pub fn neighbors(&self, cell: usize) -> [u32; 4] {
        self.neighbors[cell]
    }

    /// Leg fractions in `[E, W, N, S]` order; 1 towards interior neighbours.
    pub fn legs(&self, cell: usize) -> [f64; 4] {
        self.legs[cell]
    }

    pub(crate) fn neighbor_table(&self) -> &[[u32; 4]] {
        &self.neighbors
    }

    pub(crate) fn leg_table(&self) -> &[[f64; 4]] {
        &self.legs
    }

    /// Boundary intersection point reached along the leg `dir` of `cell`.
    pub fn boundary_point(&self, cell: usize, dir: Dir) -> Point {
        self.cell_center(cell) + dir.unit() * (self.legs[cell][dir as usize] * self.h)
    }

    pub fn is_boundary_adjacent(&self, cell: usize) -> bool {
        self.neighbors[cell].contains(&NONE)
    }

    /// Area estimate `(number of interior cells)·h²`.
    pub fn interior_area(&self) -> f64 {
        self.len() as f64 * self.h * self.h
    }

    /// Lattice coordinates of the node at or below-left of `p`.
    pub fn floor_ij(&self, p: Point) -> (i64, i64) {
        ((p.x / self.h).floor() as i64, (p.y / self.h).floor() as i64)
    }

    /// Interior cell whose centre is nearest to `p`, if that node is interior.
    pub fn nearest_cell(&self, p: Point) -> Option<usize> {
        self.cell_at((p.x / self.h).round() as i64, (p.y / self.h).round() as i64)
    }

    /// True if both grids discretize the same domain at the same spacing.
    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other)
            || (self.h == other.h
                && self.i0 == other.i0
                && self.j0 == other.j0
                && self.nx == other.nx
                && self.ny == other.ny
                && self.len() == other.len()
                && self.domain == other.domain)
    }
}

/// Fraction `t ∈ (0, 1]` along `p → p + step` at which the boundary is crossed,
/// by bisection on the membership test to 1e-12.
fn boundary_fraction(domain: &DomainSpec, p: Point, step: Point) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if domain.contains(p + step * mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
