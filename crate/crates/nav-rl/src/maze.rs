//! Occupancy-grid mazes: ASCII format (# wall, . free, S start, G goal),
//! validity checks, and procedural generators (open rooms, pillar fields,
//! corridor mazes, dead-end traps).

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone)]
pub struct MazeSpec {
    pub width: usize,
    pub height: usize,
    /// meters per cell
    pub cell_size: f64,
    /// row-major occupancy, row 0 at the top
    pub occupied: Vec<bool>,
    /// candidate start poses (x, y, heading), meters/radians
    pub starts: Vec<(f64, f64, f64)>,
    /// goal region center, meters
    pub goal: (f64, f64),
    /// goal tolerance ε, meters
    pub goal_tolerance: f64,
}

#[derive(Debug, Error)]
pub enum MazeError {
    #[error("maze parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid maze: {0}")]
    Invalid(String),
}

impl MazeSpec {
    pub fn is_occupied_cell(&self, cx: isize, cy: isize) -> bool {
        if cx < 0 || cy < 0 || cx >= self.width as isize || cy >= self.height as isize {
            return true;
        }
        self.occupied[cy as usize * self.width + cx as usize]
    }

    /// Occupancy at a metric point.
    pub fn is_occupied(&self, x: f64, y: f64) -> bool {
        self.is_occupied_cell((x / self.cell_size).floor() as isize, (y / self.cell_size).floor() as isize)
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> (f64, f64) {
        ((cx as f64 + 0.5) * self.cell_size, (cy as f64 + 0.5) * self.cell_size)
    }

    /// Border closed, start/goal in free space, goal reachable from starts.
    pub fn validate(&self) -> Result<(), MazeError> {
        for x in 0..self.width {
            if !self.occupied[x] || !self.occupied[(self.height - 1) * self.width + x] {
                return Err(MazeError::Invalid("border must be fully occupied".into()));
            }
        }
        for y in 0..self.height {
            if !self.occupied[y * self.width] || !self.occupied[y * self.width + self.width - 1] {
                return Err(MazeError::Invalid("border must be fully occupied".into()));
            }
        }
        if self.starts.is_empty() {
            return Err(MazeError::Invalid("no start poses".into()));
        }
        for &(x, y, _) in &self.starts {
            if self.is_occupied(x, y) {
                return Err(MazeError::Invalid(format!("start ({x}, {y}) inside a wall")));
            }
        }
        if self.is_occupied(self.goal.0, self.goal.1) {
            return Err(MazeError::Invalid("goal inside a wall".into()));
        }
        for (i, &(x, y, _)) in self.starts.iter().enumerate() {
            if !self.reachable((x, y), self.goal) {
                return Err(MazeError::Invalid(format!("goal unreachable from start {i}")));
            }
        }
        Ok(())
    }

    /// 4-connected BFS between the cells containing two metric points.
    pub fn reachable(&self, from: (f64, f64), to: (f64, f64)) -> bool {
        let start = ((from.0 / self.cell_size) as usize, (from.1 / self.cell_size) as usize);
        let goal = ((to.0 / self.cell_size) as usize, (to.1 / self.cell_size) as usize);
        let mut seen = vec![false; self.width * self.height];
        let mut queue = std::collections::VecDeque::new();
        if self.occupied[start.1 * self.width + start.0] {
            return false;
        }
        seen[start.1 * self.width + start.0] = true;
        queue.push_back(start);
        while let Some((x, y)) = queue.pop_front() {
            if (x, y) == goal {
                return true;
            }
            for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
                    continue;
                }
                let idx = ny as usize * self.width + nx as usize;
                if !seen[idx] && !self.occupied[idx] {
                    seen[idx] = true;
                    queue.push_back((nx as usize, ny as usize));
                }
            }
        }
        false
    }

    /// Shortest 4-connected path length in meters, if reachable.
    pub fn path_length(&self, from: (f64, f64), to: (f64, f64)) -> Option<f64> {
        let start = ((from.0 / self.cell_size) as usize, (from.1 / self.cell_size) as usize);
        let goal = ((to.0 / self.cell_size) as usize, (to.1 / self.cell_size) as usize);
        let mut dist = vec![u32::MAX; self.width * self.height];
        let mut queue = std::collections::VecDeque::new();
        dist[start.1 * self.width + start.0] = 0;
        queue.push_back(start);
        while let Some((x, y)) = queue.pop_front() {
            let d = dist[y * self.width + x];
            if (x, y) == goal {
                return Some(d as f64 * self.cell_size);
            }
            for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx < 0 || ny < 0 || nx >= self.width as isize || ny >= self.height as isize {
                    continue;
                }
                let idx = ny as usize * self.width + nx as usize;
                if dist[idx] == u32::MAX && !self.occupied[idx] {
                    dist[idx] = d + 1;
                    queue.push_back((nx as usize, ny as usize));
                }
            }
        }
        None
    }

    /// Parse the ASCII format: `#` wall, `.` free, `S` start, `G` goal.
    pub fn from_ascii(text: &str, cell_size: f64, goal_tolerance: f64) -> Result<Self, MazeError> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if rows.is_empty() {
            return Err(MazeError::Parse { line: 1, message: "empty maze".into() });
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut occupied = vec![false; width * height];
        let mut starts = Vec::new();
        let mut goal = None;
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(MazeError::Parse { line: y + 1, message: "ragged row".into() });
            }
            for (x, ch) in row.chars().enumerate() {
                match ch {
                    '#' => occupied[y * width + x] = true,
                    '.' => {}
                    'S' => {
                        let (cx, cy) = ((x as f64 + 0.5) * cell_size, (y as f64 + 0.5) * cell_size);
                        starts.push((cx, cy, 0.0));
                    }
                    'G' => {
                        if goal.is_some() {
                            return Err(MazeError::Parse { line: y + 1, message: "multiple goals".into() });
                        }
                        goal = Some(((x as f64 + 0.5) * cell_size, (y as f64 + 0.5) * cell_size));
                    }
                    other => {
                        return Err(MazeError::Parse {
                            line: y + 1,
                            message: format!("unexpected character '{other}'"),
                        })
                    }
                }
            }
        }
        let goal = goal.ok_or(MazeError::Parse { line: height, message: "missing goal".into() })?;
        let maze = Self { width, height, cell_size, occupied, starts, goal, goal_tolerance };
        maze.validate()?;
        Ok(maze)
    }

    pub fn to_ascii(&self) -> String {
        let mut grid: Vec<char> =
            self.occupied.iter().map(|&o| if o { '#' } else { '.' }).collect();
        for &(x, y, _) in &self.starts {
            let idx = (y / self.cell_size) as usize * self.width + (x / self.cell_size) as usize;
            grid[idx] = 'S';
        }
        let gidx = (self.goal.1 / self.cell_size) as usize * self.width
            + (self.goal.0 / self.cell_size) as usize;
        grid[gidx] = 'G';
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            out.extend(&grid[y * self.width..(y + 1) * self.width]);
            out.push('\n');
        }
        out
    }
}

fn empty_grid(width: usize, height: usize) -> Vec<bool> {
    let mut occupied = vec![false; width * height];
    for x in 0..width {
        occupied[x] = true;
        occupied[(height - 1) * width + x] = true;
    }
    for y in 0..height {
        occupied[y * width] = true;
        occupied[y * width + width - 1] = true;
    }
    occupied
}

/// Empty room with random start (bottom third) and goal (top third).
pub fn open_room(width: usize, height: usize, cell_size: f64, tol: f64, rng: &mut impl Rng) -> MazeSpec {
    let occupied = empty_grid(width, height);
    let sx = rng.random_range(1..width - 1);
    let sy = rng.random_range(height * 2 / 3..height - 1);
    let gx = rng.random_range(1..width - 1);
    let gy = rng.random_range(1..height / 3);
    let mut maze = MazeSpec {
        width,
        height,
        cell_size,
        occupied,
        starts: vec![],
        goal: (0.0, 0.0),
        goal_tolerance: tol,
    };
    let (sxm, sym) = maze.cell_center(sx, sy);
    maze.starts = vec![(sxm, sym, -std::f64::consts::FRAC_PI_2)];
    maze.goal = maze.cell_center(gx, gy);
    maze
}

/// Scattered single-cell pillars between a bottom start and a top goal.
pub fn pillar_field(width: usize, height: usize, cell_size: f64, tol: f64, rng: &mut impl Rng) -> MazeSpec {
    loop {
        let mut maze = open_room(width, height, cell_size, tol, rng);
        let count = rng.random_range(6..14);
        for _ in 0..count {
            let x = rng.random_range(1..width - 1);
            let y = rng.random_range(1..height - 1);
            maze.occupied[y * width + x] = true;
        }
        let (sx, sy, _) = maze.starts[0];
        maze.occupied[(sy / cell_size) as usize * width + (sx / cell_size) as usize] = false;
        maze.occupied[(maze.goal.1 / cell_size) as usize * width + (maze.goal.0 / cell_size) as usize] = false;
        if maze.validate().is_ok() {
            return maze;
        }
    }
}

/// Dead-end trap: a box open toward the start sits between start and goal,
/// so the direct bearing leads into a cul-de-sac and the route goes around.
pub fn dead_end_trap(width: usize, height: usize, cell_size: f64, tol: f64, rng: &mut impl Rng) -> MazeSpec {
    loop {
        let mut occupied = empty_grid(width, height);

        // trap box: north wall plus two arms, opening south
        let wall_row = rng.random_range(height / 3..height / 2 + 1);
        let half_span = rng.random_range(2..=(width - 7) / 2);
        let center = rng.random_range(1 + half_span + 1..width - 1 - half_span - 1);
        let arm_len = rng.random_range(3..=height - wall_row - 4);
        for x in center - half_span..=center + half_span {
            occupied[wall_row * width + x] = true;
        }
        for dy in 0..=arm_len {
            occupied[(wall_row + dy) * width + center - half_span] = true;
            occupied[(wall_row + dy) * width + center + half_span] = true;
        }

        let gy = rng.random_range(1..wall_row.saturating_sub(1).max(2));
        let goal_cell = (center, gy);
        let start_cell = (center + rng.random_range(0..=2) - 1, height - 2);
        if occupied[start_cell.1 * width + start_cell.0] || occupied[goal_cell.1 * width + goal_cell.0] {
            continue;
        }

        let mut maze = MazeSpec {
            width,
            height,
            cell_size,
            occupied,
            starts: vec![],
            goal: (0.0, 0.0),
            goal_tolerance: tol,
        };
        let (sx, sy) = maze.cell_center(start_cell.0, start_cell.1);
        maze.starts = vec![(sx, sy, -std::f64::consts::FRAC_PI_2)];
        maze.goal = maze.cell_center(goal_cell.0, goal_cell.1);
        if maze.validate().is_ok() {
            return maze;
        }
    }
}

/// Winding single-cell corridors carved by randomized DFS on a coarse
/// lattice, start at the bottom, goal at the top.
pub fn corridor_maze(width: usize, height: usize, cell_size: f64, tol: f64, rng: &mut impl Rng) -> MazeSpec {
    let mut occupied = vec![true; width * height];
    // carve on odd lattice
    let (cw, ch) = ((width - 1) / 2, (height - 1) / 2);
    let cell_idx = |cx: usize, cy: usize| (2 * cy + 1) * width + (2 * cx + 1);
    let mut visited = vec![false; cw * ch];
    let mut stack = vec![(rng.random_range(0..cw), ch - 1)];
    visited[(ch - 1) * cw + stack[0].0] = true;
    occupied[cell_idx(stack[0].0, ch - 1)] = false;
    while let Some(&(x, y)) = stack.last() {
        let mut neighbors = Vec::new();
        for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < cw && (ny as usize) < ch && !visited[ny as usize * cw + nx as usize] {
                neighbors.push((nx as usize, ny as usize));
            }
        }
        if neighbors.is_empty() {
            stack.pop();
            continue;
        }
        let (nx, ny) = neighbors[rng.random_range(0..neighbors.len())];
        visited[ny * cw + nx] = true;
        occupied[cell_idx(nx, ny)] = false;
        // knock down the wall between
        let wall = ((2 * y + 1 + 2 * ny + 1) / 2) * width + (2 * x + 1 + 2 * nx + 1) / 2;
        occupied[wall] = false;
        stack.push((nx, ny));
    }

    let mut maze = MazeSpec {
        width,
        height,
        cell_size,
        occupied,
        starts: vec![],
        goal: (0.0, 0.0),
        goal_tolerance: tol,
    };
    let start_cell = (2 * rng.random_range(0..cw) + 1, 2 * (ch - 1) + 1);
    let goal_cell = (2 * rng.random_range(0..cw) + 1, 1);
    let (sx, sy) = maze.cell_center(start_cell.0, start_cell.1);
    maze.starts = vec![(sx, sy, -std::f64::consts::FRAC_PI_2)];
    maze.goal = maze.cell_center(goal_cell.0, goal_cell.1);
    debug_assert!(maze.validate().is_ok());
    maze
}

/// Which generator to draw from during training/eval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MazeKind {
    OpenRoom,
    PillarField,
    Corridor,
    DeadEndTrap,
}

pub fn generate(kind: MazeKind, width: usize, height: usize, cell_size: f64, tol: f64, rng: &mut impl Rng) -> MazeSpec {
    match kind {
        MazeKind::OpenRoom => open_room(width, height, cell_size, tol, rng),
        MazeKind::PillarField => pillar_field(width, height, cell_size, tol, rng),
        MazeKind::Corridor => corridor_maze(width, height, cell_size, tol, rng),
        MazeKind::DeadEndTrap => dead_end_trap(width, height, cell_size, tol, rng),
    }
}
