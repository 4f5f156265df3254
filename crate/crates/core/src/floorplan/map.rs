use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SalcError};
use crate::geometry::{Point2, Rect};

/// Occupancy grid of an indoor floor.
///
/// Row 0 is the top row (largest `y`), matching the order rows appear in the
/// text format. `true` marks an obstacle cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorMap {
    width_m: f64,
    height_m: f64,
    resolution: f64,
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

/// `(row, col)` index of a grid cell.
pub type Cell = (usize, usize);

fn cell_count(extent: f64, resolution: f64, what: &str) -> Result<usize> {
    let n = extent / resolution;
    let rounded = n.round();
    if (n - rounded).abs() > 1e-6 || rounded < 2.0 {
        return Err(SalcError::invalid(format!(
            "{what} {extent} m is not an integral number (>= 2) of {resolution} m cells"
        )));
    }
    Ok(rounded as usize)
}

impl FloorMap {
    /// Builds a map from a row-major obstacle grid (row 0 at the top).
    pub fn new(width_m: f64, height_m: f64, resolution: f64, cells: Vec<Vec<bool>>) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(SalcError::invalid(format!("resolution must be > 0, got {resolution}")));
        }
        let cols = cell_count(width_m, resolution, "width")?;
        let rows = cell_count(height_m, resolution, "height")?;
        if cells.len() != rows || cells.iter().any(|r| r.len() != cols) {
            return Err(SalcError::Shape {
                expected: format!("{rows} rows x {cols} cols"),
                got: format!(
                    "{} rows x {} cols",
                    cells.len(),
                    cells.first().map_or(0, Vec::len)
                ),
            });
        }
        let cells: Vec<bool> = cells.into_iter().flatten().collect();
        if cells.iter().all(|&c| c) {
            return Err(SalcError::DegenerateMap("no walkable cell".into()));
        }
        Ok(Self {
            width_m,
            height_m,
            resolution,
            rows,
            cols,
            cells,
        })
    }

    /// Parses the text format: a `width_m height_m resolution` header followed
    /// by one line per row of `#` (obstacle) and `.` (walkable).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with("//"));
        let (hl, header) = lines
            .next()
            .ok_or_else(|| SalcError::parse(1, "missing header"))?;
        let nums: Vec<f64> = header
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| SalcError::parse(hl, format!("{t}: {e}"))))
            .collect::<Result<_>>()?;
        let [w, h, res] = nums[..] else {
            return Err(SalcError::parse(hl, "header must be `width_m height_m resolution`"));
        };
        let mut grid = Vec::new();
        for (ln, line) in lines {
            let row = line
                .trim()
                .chars()
                .map(|c| match c {
                    '#' => Ok(true),
                    '.' => Ok(false),
                    other => Err(SalcError::parse(ln, format!("unexpected cell char {other:?}"))),
                })
                .collect::<Result<Vec<bool>>>()?;
            grid.push(row);
        }
        Self::new(w, h, res, grid)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.width_m, self.height_m, self.resolution);
        for r in 0..self.rows {
            for c in 0..self.cols {
                s.push(if self.is_obstacle((r, c)) { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }

    /// Empty rectangular room surrounded by a one-cell wall.
    pub fn walled_room(cols: usize, rows: usize, resolution: f64) -> Result<Self> {
        let grid = (0..rows)
            .map(|r| {
                (0..cols)
                    .map(|c| r == 0 || c == 0 || r + 1 == rows || c + 1 == cols)
                    .collect()
            })
            .collect();
        Self::new(cols as f64 * resolution, rows as f64 * resolution, resolution, grid)
    }

    pub fn width_m(&self) -> f64 {
        self.width_m
    }

    pub fn height_m(&self) -> f64 {
        self.height_m
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_obstacle(&self, (r, c): Cell) -> bool {
        self.cells[r * self.cols + c]
    }

    pub fn is_walkable(&self, cell: Cell) -> bool {
        !self.is_obstacle(cell)
    }

    pub fn set_obstacle(&mut self, (r, c): Cell, obstacle: bool) {
        self.cells[r * self.cols + c] = obstacle;
    }

    /// Center of a cell in meters.
    pub fn cell_center(&self, (r, c): Cell) -> Point2 {
        Point2::new(
            (c as f64 + 0.5) * self.resolution,
            self.height_m - (r as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell_rect(&self, (r, c): Cell) -> Rect {
        let x0 = c as f64 * self.resolution;
        let y1 = self.height_m - r as f64 * self.resolution;
        Rect::from_corners(
            Point2::new(x0, y1 - self.resolution),
            Point2::new(x0 + self.resolution, y1),
        )
    }

    /// Cell containing `p`, or `None` outside the grid.
    pub fn cell_at(&self, p: Point2) -> Option<Cell> {
        if !(p.x >= 0.0 && p.y >= 0.0 && p.x < self.width_m && p.y < self.height_m) {
            return None;
        }
        let c = (p.x / self.resolution).floor() as usize;
        let r = ((self.height_m - p.y) / self.resolution).floor() as usize;
        Some((r.min(self.rows - 1), c.min(self.cols - 1)))
    }

    pub fn is_walkable_point(&self, p: Point2) -> bool {
        self.cell_at(p).is_some_and(|c| self.is_walkable(c))
    }

    /// Distance from `p` to the nearest obstacle cell or the map border.
    pub fn clearance(&self, p: Point2) -> f64 {
        let border = p
            .x
            .min(self.width_m - p.x)
            .min(p.y)
            .min(self.height_m - p.y)
            .max(0.0);
        self.cells()
            .filter(|&c| self.is_obstacle(c))
            .map(|c| self.cell_rect(c).distance_to(p))
            .fold(border, f64::min)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| (r, c)))
    }

    /// In-grid 8-neighbors of a cell.
    pub fn neighbors8(&self, (r, c): Cell) -> impl Iterator<Item = Cell> + '_ {
        const OFFSETS: [(isize, isize); 8] =
            [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        OFFSETS.iter().filter_map(move |&(dr, dc)| {
            let nr = r as isize + dr;
            let nc = c as isize + dc;
            (nr >= 0 && nc >= 0 && (nr as usize) < self.rows && (nc as usize) < self.cols)
                .then_some((nr as usize, nc as usize))
        })
    }

    /// Connected components of walkable cells under 8-adjacency.
    /// Returns per-cell labels (`None` for obstacles) and the component count.
    pub fn walkable_components(&self) -> (Vec<Option<usize>>, usize) {
        let mut labels = vec![None; self.rows * self.cols];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in self.cells() {
            let idx = start.0 * self.cols + start.1;
            if self.is_obstacle(start) || labels[idx].is_some() {
                continue;
            }
            labels[idx] = Some(count);
            stack.push(start);
            while let Some(cell) = stack.pop() {
                for n in self.neighbors8(cell) {
                    let ni = n.0 * self.cols + n.1;
                    if self.is_walkable(n) && labels[ni].is_none() {
                        labels[ni] = Some(count);
                        stack.push(n);
                    }
                }
            }
            count += 1;
        }
        (labels, count)
    }

    /// ASCII rendering with extra marks overlaid, for debugging.
    pub fn render_with(&self, marks: &[(Cell, char)]) -> String {
        let mut grid: Vec<Vec<char>> = (0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .map(|c| if self.is_obstacle((r, c)) { '#' } else { '.' })
                    .collect()
            })
            .collect();
        for &((r, c), ch) in marks {
            grid[r][c] = ch;
        }
        let mut s = String::new();
        for row in grid {
            let _ = writeln!(s, "{}", row.into_iter().collect::<String>());
        }
        s
    }
}
