use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use super::map::{Cell, FloorMap};
use crate::error::{Result, SalcError};
use crate::geometry::Point2;

/// Undirected skeleton edge. Stored once; adjacency is symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

/// Medial-axis graph of the walkable region.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Skeleton {
    vertices: Vec<Point2>,
    edges: Vec<Edge>,
}

/// Ridge-detection knobs for [`build_skeleton`].
#[derive(Debug, Clone, Copy)]
pub struct SkeletonParams {
    /// Minimum angle (degrees) between two nearest-obstacle directions for a
    /// cell to count as a ridge cell.
    pub angle_threshold_deg: f64,
    /// How much farther (in cells) than the nearest obstacle the second
    /// obstacle may be.
    pub equidistance_cells: f64,
    /// Ridge branches whose tip lies within this many cells of an obstacle
    /// are pruned back to where their clearance stops growing. On a grid
    /// these are the bisectors of convex corners, which the angle test lets
    /// through because nearby feature points skew the measured directions.
    pub spur_clearance_cells: f64,
}

impl Default for SkeletonParams {
    fn default() -> Self {
        Self {
            angle_threshold_deg: 90.0,
            equidistance_cells: 1.0,
            spur_clearance_cells: 1.5,
        }
    }
}

impl Skeleton {
    /// Builds a skeleton from explicit parts. Edge lengths must equal the
    /// Euclidean distance between their endpoints.
    pub fn from_parts(vertices: Vec<Point2>, edges: Vec<Edge>) -> Result<Self> {
        for (i, e) in edges.iter().enumerate() {
            if e.a >= vertices.len() || e.b >= vertices.len() {
                return Err(SalcError::invalid(format!("edge {i} references a missing vertex")));
            }
            let euclid = vertices[e.a].dist(vertices[e.b]);
            if (e.length - euclid).abs() > 1e-9 {
                return Err(SalcError::invalid(format!(
                    "edge {i} length {} differs from endpoint distance {euclid}",
                    e.length
                )));
            }
        }
        Ok(Self { vertices, edges })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Adjacency lists `(neighbor, length)`, both directions.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            adj[e.a].push((e.b, e.length));
            adj[e.b].push((e.a, e.length));
        }
        adj
    }

    /// Euclidean-nearest vertex to `p`; the lowest index wins ties.
    pub fn nearest_vertex(&self, p: Point2) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = v.dist(p);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    /// Line-list export: `v x y` per vertex, then `e a b length` per edge.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "v {} {} {}", i, v.x, v.y);
        }
        for e in &self.edges {
            let _ = writeln!(s, "e {} {} {}", e.a, e.b, e.length);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                [] => {}
                [t, ..] if t.starts_with('#') => {}
                ["v", idx, x, y] => {
                    let idx: usize = parse_tok(idx, ln)?;
                    if idx != vertices.len() {
                        return Err(SalcError::parse(ln, "vertices must be listed in index order"));
                    }
                    vertices.push(Point2::new(parse_tok(x, ln)?, parse_tok(y, ln)?));
                }
                ["e", a, b, len] => edges.push(Edge {
                    a: parse_tok(a, ln)?,
                    b: parse_tok(b, ln)?,
                    length: parse_tok(len, ln)?,
                }),
                _ => return Err(SalcError::parse(ln, format!("unrecognized record {line:?}"))),
            }
        }
        Self::from_parts(vertices, edges)
    }
}

pub(crate) fn parse_tok<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    tok.parse::<T>()
        .map_err(|e| SalcError::parse(line, format!("{tok:?}: {e}")))
}

/// Extracts the medial-axis skeleton of the walkable region with default
/// ridge parameters.
pub fn build_skeleton(map: &FloorMap) -> Result<Skeleton> {
    build_skeleton_with(map, SkeletonParams::default())
}

/// Grid medial axis: nearest-obstacle feature transform, then a ridge test
/// over each cell's 3x3 neighborhood (two feature points roughly as near as
/// the closest one and separated by at least the angle threshold), then
/// gap bridging so each walkable component carries one connected skeleton.
pub fn build_skeleton_with(map: &FloorMap, params: SkeletonParams) -> Result<Skeleton> {
    let mut ridge = ridge_cells(map, params);
    prune_spurs(map, &mut ridge, params.spur_clearance_cells);
    let mask = connect_components(map, ridge)?;
    Ok(graph_from_mask(map, &mask))
}

/// Centers of obstacle cells bordering walkable space, including virtual
/// obstacle cells just outside the grid.
fn boundary_features(map: &FloorMap) -> Vec<Point2> {
    let (rows, cols) = (map.rows() as isize, map.cols() as isize);
    let res = map.resolution();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if map.is_obstacle((r as usize, c as usize)) {
                continue;
            }
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    let inside = nr >= 0 && nc >= 0 && nr < rows && nc < cols;
                    let blocked = !inside || map.is_obstacle((nr as usize, nc as usize));
                    if blocked && seen.insert((nr, nc)) {
                        out.push((nr, nc));
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out.into_iter()
        .map(|(r, c)| {
            Point2::new(
                (c as f64 + 0.5) * res,
                map.height_m() - (r as f64 + 0.5) * res,
            )
        })
        .collect()
}

fn ridge_cells(map: &FloorMap, params: SkeletonParams) -> Vec<bool> {
    let features = boundary_features(map);
    let cols = map.cols();
    let idx = |(r, c): Cell| r * cols + c;

    // nearest feature per walkable cell, lowest feature index on ties
    let mut nearest: Vec<Option<usize>> = vec![None; map.rows() * cols];
    for cell in map.cells().filter(|&c| map.is_walkable(c)) {
        let p = map.cell_center(cell);
        let mut best = (usize::MAX, f64::INFINITY);
        for (fi, f) in features.iter().enumerate() {
            let d = f.dist(p);
            if d < best.1 {
                best = (fi, d);
            }
        }
        nearest[idx(cell)] = Some(best.0);
    }

    let cos_threshold = params.angle_threshold_deg.to_radians().cos();
    let tol = params.equidistance_cells * map.resolution() + 1e-9;
    let mut ridge = vec![false; map.rows() * cols];
    let mut local = Vec::with_capacity(9);
    for cell in map.cells().filter(|&c| map.is_walkable(c)) {
        let p = map.cell_center(cell);
        let Some(own) = nearest[idx(cell)] else { continue };
        let limit = features[own].dist(p) + tol;
        local.clear();
        local.push(own);
        for n in map.neighbors8(cell) {
            if let Some(f) = nearest[idx(n)] {
                if !local.contains(&f) && features[f].dist(p) <= limit {
                    local.push(f);
                }
            }
        }
        'pairs: for (i, &fa) in local.iter().enumerate() {
            let u = features[fa] - p;
            for &fb in &local[i + 1..] {
                let v = features[fb] - p;
                let nn = u.norm() * v.norm();
                if u.dot(v) < (cos_threshold - 1e-9) * nn {
                    ridge[idx(cell)] = true;
                    break 'pairs;
                }
            }
        }
    }
    ridge
}

/// A mask cell is an end cell when its masked 8-neighbors form one
/// contiguous run around it of at most three cells. Removing such a cell
/// never splits the skeleton.
fn is_end_cell(map: &FloorMap, mask: &[bool], (r, c): Cell) -> bool {
    const RING: [(isize, isize); 8] = [
        (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1),
    ];
    let on: Vec<bool> = RING
        .iter()
        .map(|&(dr, dc)| {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            nr >= 0
                && nc >= 0
                && (nr as usize) < map.rows()
                && (nc as usize) < map.cols()
                && mask[nr as usize * map.cols() + nc as usize]
        })
        .collect();
    let count = on.iter().filter(|&&b| b).count();
    let runs = (0..8).filter(|&i| on[i] && !on[(i + 7) % 8]).count();
    count > 0 && count <= 3 && (runs == 1 || count == 8)
}

fn prune_spurs(map: &FloorMap, mask: &mut [bool], tip_cells: f64) {
    let cols = map.cols();
    let idx = |(r, c): Cell| r * cols + c;
    let limit = tip_cells * map.resolution() + 1e-9;
    let clearance: Vec<f64> = map
        .cells()
        .map(|c| if mask[idx(c)] { map.clearance(map.cell_center(c)) } else { 0.0 })
        .collect();
    let mut frontier: Vec<Cell> = map
        .cells()
        .filter(|&c| mask[idx(c)] && clearance[idx(c)] <= limit)
        .collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for cell in frontier {
            if !mask[idx(cell)] || !is_end_cell(map, mask, cell) {
                continue;
            }
            let climbs = map
                .neighbors8(cell)
                .any(|n| mask[idx(n)] && clearance[idx(n)] > clearance[idx(cell)] + 1e-9);
            if climbs {
                mask[idx(cell)] = false;
                next.extend(map.neighbors8(cell).filter(|&n| mask[idx(n)]));
            }
        }
        next.sort_unstable();
        next.dedup();
        frontier = next;
    }
}

/// Bridges skeleton fragments inside each walkable component with shortest
/// walkable cell paths, and seeds a vertex in components that have none.
fn connect_components(map: &FloorMap, mut mask: Vec<bool>) -> Result<Vec<bool>> {
    let cols = map.cols();
    let idx = |(r, c): Cell| r * cols + c;
    let (walk_labels, n_walk) = map.walkable_components();
    if n_walk == 0 {
        return Err(SalcError::DegenerateMap("no walkable cell".into()));
    }

    for comp in 0..n_walk {
        let members: Vec<Cell> = map
            .cells()
            .filter(|&c| walk_labels[idx(c)] == Some(comp))
            .collect();
        if !members.iter().any(|&c| mask[idx(c)]) {
            // pick the cell farthest from obstacles
            let best = members
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    map.clearance(map.cell_center(a))
                        .total_cmp(&map.clearance(map.cell_center(b)))
                        .then(b.cmp(&a))
                })
                .expect("component is non-empty");
            mask[idx(best)] = true;
        }
        loop {
            let labels = skeleton_labels(map, &mask, &members);
            let first = members.iter().find_map(|&c| labels[idx(c)]).expect("seeded");
            if members
                .iter()
                .all(|&c| labels[idx(c)].is_none_or(|l| l == first))
            {
                break;
            }
            // BFS from the first fragment until another fragment is reached
            let mut prev: Vec<Option<Cell>> = vec![None; map.rows() * cols];
            let mut visited = vec![false; map.rows() * cols];
            let mut queue = VecDeque::new();
            for &c in &members {
                if labels[idx(c)] == Some(first) {
                    visited[idx(c)] = true;
                    queue.push_back(c);
                }
            }
            let mut hit = None;
            'bfs: while let Some(cell) = queue.pop_front() {
                for n in map.neighbors8(cell) {
                    if map.is_obstacle(n) || visited[idx(n)] {
                        continue;
                    }
                    visited[idx(n)] = true;
                    prev[idx(n)] = Some(cell);
                    if mask[idx(n)] {
                        hit = Some(n);
                        break 'bfs;
                    }
                    queue.push_back(n);
                }
            }
            let mut cur = hit.expect("fragments share a walkable component");
            while let Some(p) = prev[idx(cur)] {
                mask[idx(p)] = true;
                cur = p;
            }
        }
    }
    Ok(mask)
}

fn skeleton_labels(map: &FloorMap, mask: &[bool], members: &[Cell]) -> Vec<Option<usize>> {
    let cols = map.cols();
    let idx = |(r, c): Cell| r * cols + c;
    let mut labels = vec![None; map.rows() * cols];
    let mut next = 0;
    let mut stack = Vec::new();
    for &start in members {
        if !mask[idx(start)] || labels[idx(start)].is_some() {
            continue;
        }
        labels[idx(start)] = Some(next);
        stack.push(start);
        while let Some(c) = stack.pop() {
            for n in map.neighbors8(c) {
                if mask[idx(n)] && labels[idx(n)].is_none() {
                    labels[idx(n)] = Some(next);
                    stack.push(n);
                }
            }
        }
        next += 1;
    }
    labels
}

fn graph_from_mask(map: &FloorMap, mask: &[bool]) -> Skeleton {
    let cols = map.cols();
    let mut vertex_of = vec![usize::MAX; mask.len()];
    let mut vertices = Vec::new();
    for cell in map.cells() {
        let i = cell.0 * cols + cell.1;
        if mask[i] {
            vertex_of[i] = vertices.len();
            vertices.push(map.cell_center(cell));
        }
    }
    let mut edges = Vec::new();
    for (r, c) in map.cells() {
        let a = vertex_of[r * cols + c];
        if a == usize::MAX {
            continue;
        }
        // forward half of the 8-neighborhood so each edge appears once
        for (dr, dc) in [(0isize, 1isize), (1, -1), (1, 0), (1, 1)] {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr as usize >= map.rows() || nc as usize >= cols {
                continue;
            }
            let b = vertex_of[nr as usize * cols + nc as usize];
            if b != usize::MAX {
                edges.push(Edge {
                    a,
                    b,
                    length: vertices[a].dist(vertices[b]),
                });
            }
        }
    }
    Skeleton { vertices, edges }
}
