//! Tile-based urban world: a height field of semantically labelled cells
//! plus vehicles and pedestrians that move along fixed, wrapping paths.
//!
//! Cell `(row, col)` covers north `[row * cell_size, (row + 1) * cell_size)`
//! and east `[col * cell_size, (col + 1) * cell_size)`. Elevations are metres
//! above the ground datum.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PlanarBounds;
use crate::grid::Grid;

/// Maximum elevation spread (metres) tolerated under a touchdown disc.
pub const FLATNESS_TOLERANCE_M: f64 = 0.3;

/// Default touchdown clearance radius in metres.
pub const DEFAULT_CLEARANCE_RADIUS_M: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("position ({north:.3}, {east:.3}) is outside the scene")]
    OutOfBounds { north: f64, east: f64 },
    #[error("altitude {altitude:.3} m is at or below the surface ({surface:.3} m)")]
    Collision { altitude: f64, surface: f64 },
    #[error("unsupported scene file version {0}")]
    UnsupportedVersion(String),
    #[error("scene file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceClass {
    Rooftop,
    RooftopObstacle,
    Road,
    Sidewalk,
    Pier,
    Water,
    Ground,
    Vegetation,
    WallEdge,
}

impl SurfaceClass {
    pub const ALL: [SurfaceClass; 9] = [
        SurfaceClass::Rooftop,
        SurfaceClass::RooftopObstacle,
        SurfaceClass::Road,
        SurfaceClass::Sidewalk,
        SurfaceClass::Pier,
        SurfaceClass::Water,
        SurfaceClass::Ground,
        SurfaceClass::Vegetation,
        SurfaceClass::WallEdge,
    ];

    /// Character used in scene-file class maps.
    pub fn symbol(self) -> char {
        match self {
            SurfaceClass::Rooftop => 'R',
            SurfaceClass::RooftopObstacle => 'H',
            SurfaceClass::Road => '=',
            SurfaceClass::Sidewalk => 's',
            SurfaceClass::Pier => 'P',
            SurfaceClass::Water => '~',
            SurfaceClass::Ground => '.',
            SurfaceClass::Vegetation => 'T',
            SurfaceClass::WallEdge => 'E',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|class| class.symbol() == c)
    }

    pub fn name(self) -> &'static str {
        match self {
            SurfaceClass::Rooftop => "rooftop",
            SurfaceClass::RooftopObstacle => "rooftop_obstacle",
            SurfaceClass::Road => "road",
            SurfaceClass::Sidewalk => "sidewalk",
            SurfaceClass::Pier => "pier",
            SurfaceClass::Water => "water",
            SurfaceClass::Ground => "ground",
            SurfaceClass::Vegetation => "vegetation",
            SurfaceClass::WallEdge => "wall_edge",
        }
    }

    /// Classes that make any touchdown disc containing them unsafe.
    pub fn is_hazard(self) -> bool {
        matches!(
            self,
            SurfaceClass::RooftopObstacle | SurfaceClass::WallEdge | SurfaceClass::Water
        )
    }

    /// Flat but risky surfaces that are never an acceptable landing cell.
    pub fn is_traffic_or_pier(self) -> bool {
        matches!(self, SurfaceClass::Road | SurfaceClass::Pier)
    }
}

impl std::fmt::Display for SurfaceClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub class: SurfaceClass,
    pub elevation: f64,
}

/// Grid address: `row` counts north, `col` counts east.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub row: u32,
    pub col: u32,
}

impl CellIndex {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Vehicle,
    Pedestrian,
}

impl AgentKind {
    /// Height added on top of the occupied cell's elevation.
    pub fn height_m(self) -> f64 {
        match self {
            AgentKind::Vehicle => 1.5,
            AgentKind::Pedestrian => 1.8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Vehicle => "vehicle",
            AgentKind::Pedestrian => "pedestrian",
        }
    }

    fn allows(self, class: SurfaceClass) -> bool {
        match self {
            AgentKind::Vehicle => class == SurfaceClass::Road,
            AgentKind::Pedestrian => matches!(class, SurfaceClass::Sidewalk | SurfaceClass::Ground),
        }
    }
}

/// A vehicle or pedestrian walking a cell path with wrap-around.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicAgent {
    pub kind: AgentKind,
    /// Every cell visited, in order; consecutive entries are 4-adjacent.
    pub path: Vec<CellIndex>,
    /// Cells advanced per simulation tick.
    pub speed: f64,
    /// Chebyshev radius, in cells, of the occupied square around the centre.
    pub footprint: u32,
    /// Path position at tick 0, in cells.
    pub offset: f64,
}

impl DynamicAgent {
    /// Index into `path` at `tick`: `floor(tick * speed + offset) mod len`.
    pub fn path_index(&self, tick: u64) -> usize {
        let len = self.path.len() as i64;
        let step = (tick as f64 * self.speed + self.offset).floor() as i64;
        step.rem_euclid(len) as usize
    }

    pub fn position_at(&self, tick: u64) -> CellIndex {
        self.path[self.path_index(tick)]
    }

    fn footprint_cells(&self, center: CellIndex) -> impl Iterator<Item = (i64, i64)> {
        let r = i64::from(self.footprint);
        let (cr, cc) = (i64::from(center.row), i64::from(center.col));
        (cr - r..=cr + r).flat_map(move |row| (cc - r..=cc + r).map(move |col| (row, col)))
    }
}

/// Cells occupied by agents at one tick.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy {
    tick: u64,
    cells: Grid<Option<AgentKind>>,
}

impl Occupancy {
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn at(&self, idx: CellIndex) -> Option<AgentKind> {
        *self.cells.get(idx.col as usize, idx.row as usize)
    }

    /// Occupied cells in row-major order.
    pub fn occupied(&self) -> Vec<(CellIndex, AgentKind)> {
        let mut out = Vec::new();
        for row in 0..self.cells.height() {
            for col in 0..self.cells.width() {
                if let Some(kind) = self.cells.get(col, row) {
                    out.push((CellIndex::new(row as u32, col as u32), *kind));
                }
            }
        }
        out
    }
}

/// Launch pose stored with a scenario: position, altitude above datum, yaw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaunchSpec {
    pub north: f64,
    pub east: f64,
    pub altitude: f64,
    pub yaw: f64,
}

/// The ground-truth world.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneModel {
    pub name: String,
    /// Columns (east extent).
    pub grid_width: u32,
    /// Rows (north extent).
    pub grid_height: u32,
    pub cell_size: f64,
    /// Row-major, `row * grid_width + col`.
    pub cells: Vec<Cell>,
    pub agents: Vec<DynamicAgent>,
    pub rng_seed: u64,
    pub launch: Option<LaunchSpec>,
    /// Named cells, e.g. the clear rooftop of a curated scenario.
    pub markers: BTreeMap<String, CellIndex>,
}

impl SceneModel {
    /// Uniform scene of one class and elevation, no agents.
    pub fn uniform(
        name: &str,
        width: u32,
        height: u32,
        cell_size: f64,
        class: SurfaceClass,
        elevation: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            grid_width: width,
            grid_height: height,
            cell_size,
            cells: vec![Cell { class, elevation }; (width * height) as usize],
            agents: Vec::new(),
            rng_seed: 0,
            launch: None,
            markers: BTreeMap::new(),
        }
    }

    pub fn cell(&self, idx: CellIndex) -> &Cell {
        &self.cells[(idx.row * self.grid_width + idx.col) as usize]
    }

    pub fn cell_mut(&mut self, idx: CellIndex) -> &mut Cell {
        &mut self.cells[(idx.row * self.grid_width + idx.col) as usize]
    }

    /// Sets every cell in the inclusive row/col rectangle.
    pub fn fill(
        &mut self,
        rows: std::ops::RangeInclusive<u32>,
        cols: std::ops::RangeInclusive<u32>,
        class: SurfaceClass,
        elevation: f64,
    ) {
        for row in rows {
            for col in cols.clone() {
                *self.cell_mut(CellIndex::new(row, col)) = Cell { class, elevation };
            }
        }
    }

    pub fn in_grid(&self, row: i64, col: i64) -> bool {
        row >= 0
            && col >= 0
            && row < i64::from(self.grid_height)
            && col < i64::from(self.grid_width)
    }

    pub fn bounds(&self) -> PlanarBounds {
        PlanarBounds::new(
            0.0,
            f64::from(self.grid_height) * self.cell_size,
            0.0,
            f64::from(self.grid_width) * self.cell_size,
        )
    }

    pub fn contains_point(&self, north: f64, east: f64) -> bool {
        let b = self.bounds();
        north >= b.north_min && north < b.north_max && east >= b.east_min && east < b.east_max
    }

    pub fn cell_at(&self, north: f64, east: f64) -> Option<CellIndex> {
        if !self.contains_point(north, east) {
            return None;
        }
        let row = ((north / self.cell_size).floor() as u32).min(self.grid_height - 1);
        let col = ((east / self.cell_size).floor() as u32).min(self.grid_width - 1);
        Some(CellIndex::new(row, col))
    }

    pub fn cell_center(&self, idx: CellIndex) -> (f64, f64) {
        (
            (f64::from(idx.row) + 0.5) * self.cell_size,
            (f64::from(idx.col) + 0.5) * self.cell_size,
        )
    }

    pub fn max_elevation(&self) -> f64 {
        self.cells.iter().map(|c| c.elevation).fold(0.0, f64::max)
    }

    /// Highest surface, agents included, at a planar position.
    pub fn surface_height_at(
        &self,
        north: f64,
        east: f64,
        occupancy: &Occupancy,
    ) -> Result<f64, SceneError> {
        let idx = self
            .cell_at(north, east)
            .ok_or(SceneError::OutOfBounds { north, east })?;
        Ok(self.surface_height(idx, occupancy))
    }

    pub fn surface_height(&self, idx: CellIndex, occupancy: &Occupancy) -> f64 {
        self.cell(idx).elevation + occupancy.at(idx).map_or(0.0, AgentKind::height_m)
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.grid_width == 0 || self.grid_height == 0 {
            return Err(SceneError::Invalid("grid has zero size".into()));
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(SceneError::Invalid(format!(
                "cell_size must be positive, got {}",
                self.cell_size
            )));
        }
        if self.cells.len() != (self.grid_width * self.grid_height) as usize {
            return Err(SceneError::Invalid(
                "cell count does not match grid size".into(),
            ));
        }
        for (i, cell) in self.cells.iter().enumerate() {
            let (row, col) = (i as u32 / self.grid_width, i as u32 % self.grid_width);
            if !(cell.elevation.is_finite() && cell.elevation >= 0.0) {
                return Err(SceneError::Invalid(format!(
                    "cell ({row}, {col}) has invalid elevation {}",
                    cell.elevation
                )));
            }
            if cell.class == SurfaceClass::Water && cell.elevation != 0.0 {
                return Err(SceneError::Invalid(format!(
                    "water cell ({row}, {col}) must have elevation 0"
                )));
            }
        }
        for (n, agent) in self.agents.iter().enumerate() {
            self.validate_agent(n, agent)?;
        }
        for (name, idx) in &self.markers {
            if !self.in_grid(i64::from(idx.row), i64::from(idx.col)) {
                return Err(SceneError::Invalid(format!(
                    "marker {name} is outside the grid"
                )));
            }
        }
        if let Some(launch) = &self.launch {
            if !self.contains_point(launch.north, launch.east) {
                return Err(SceneError::Invalid(
                    "launch position is outside the scene".into(),
                ));
            }
        }
        Ok(())
    }

    fn validate_agent(&self, n: usize, agent: &DynamicAgent) -> Result<(), SceneError> {
        if agent.path.is_empty() {
            return Err(SceneError::Invalid(format!("agent {n} has an empty path")));
        }
        if !(agent.speed.is_finite() && agent.speed >= 0.0) || !agent.offset.is_finite() {
            return Err(SceneError::Invalid(format!(
                "agent {n} has invalid speed/offset"
            )));
        }
        for pair in agent.path.windows(2) {
            let dr = (i64::from(pair[0].row) - i64::from(pair[1].row)).abs();
            let dc = (i64::from(pair[0].col) - i64::from(pair[1].col)).abs();
            if dr + dc != 1 {
                return Err(SceneError::Invalid(format!(
                    "agent {n} path is not 4-connected"
                )));
            }
        }
        for &center in &agent.path {
            for (row, col) in agent.footprint_cells(center) {
                if !self.in_grid(row, col) {
                    return Err(SceneError::Invalid(format!(
                        "agent {n} footprint leaves the grid"
                    )));
                }
                let class = self.cell(CellIndex::new(row as u32, col as u32)).class;
                if !agent.kind.allows(class) {
                    return Err(SceneError::Invalid(format!(
                        "agent {n} ({}) would occupy a {class} cell at ({row}, {col})",
                        agent.kind.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Connected rooftop cells sharing the elevation of `seed` (4-connected).
    pub fn plateau(&self, seed: CellIndex) -> Vec<CellIndex> {
        let base = *self.cell(seed);
        let same = |c: &Cell| c.class == base.class && (c.elevation - base.elevation).abs() < 1e-9;
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([seed]);
        seen[(seed.row * self.grid_width + seed.col) as usize] = true;
        let mut out = Vec::new();
        while let Some(idx) = queue.pop_front() {
            out.push(idx);
            let (r, c) = (i64::from(idx.row), i64::from(idx.col));
            for (nr, nc) in [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)] {
                if !self.in_grid(nr, nc) {
                    continue;
                }
                let n = CellIndex::new(nr as u32, nc as u32);
                let flat = (n.row * self.grid_width + n.col) as usize;
                if !seen[flat] && same(self.cell(n)) {
                    seen[flat] = true;
                    queue.push_back(n);
                }
            }
        }
        out.sort();
        out
    }
}

/// Cells occupied by agents at `tick`. Pure in `(scene, tick)`; where
/// footprints overlap a vehicle takes precedence over a pedestrian.
pub fn step_agents(scene: &SceneModel, tick: u64) -> Occupancy {
    let mut cells: Grid<Option<AgentKind>> =
        Grid::filled(scene.grid_width as usize, scene.grid_height as usize, None);
    for agent in &scene.agents {
        for (row, col) in agent.footprint_cells(agent.position_at(tick)) {
            if !scene.in_grid(row, col) {
                continue;
            }
            let slot = cells.get_mut(col as usize, row as usize);
            if *slot != Some(AgentKind::Vehicle) {
                *slot = Some(agent.kind);
            }
        }
    }
    Occupancy { tick, cells }
}

/// Safety verdict for a touchdown point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandingClassification {
    pub surface_class: SurfaceClass,
    pub safe: bool,
    /// Elevation spread under the clearance disc is within tolerance.
    pub flat: bool,
    /// No obstacle, wall edge or water cell under the disc.
    pub hazard_free: bool,
    /// No vehicle or pedestrian under the disc at the evaluated tick.
    pub agent_free: bool,
    /// Landing cell is neither road nor pier.
    pub benign_surface: bool,
    pub elevation_spread: f64,
}

impl LandingClassification {
    /// Everything except the surface-type rule holds.
    pub fn clear_of_hazards(&self) -> bool {
        self.flat && self.hazard_free && self.agent_free
    }

    /// Short phrase naming the first failing factor, or why it is safe.
    pub fn reason(&self) -> String {
        if !self.agent_free {
            "vehicles or people inside the touchdown clearance".into()
        } else if !self.hazard_free {
            "obstructions, edges or water inside the touchdown clearance".into()
        } else if !self.flat {
            format!(
                "uneven surface ({:.2} m elevation spread)",
                self.elevation_spread
            )
        } else if !self.benign_surface {
            format!(
                "{} is flat but exposed to traffic or water",
                self.surface_class
            )
        } else {
            format!("{} is flat and unobstructed", self.surface_class)
        }
    }
}

/// Classifies a touchdown at planar `(north, east)` at `tick`. The disc
/// covers the landing cell and every cell whose centre lies within
/// `clearance_radius` of the point.
pub fn classify_touchdown(
    scene: &SceneModel,
    north: f64,
    east: f64,
    tick: u64,
    clearance_radius: f64,
) -> Result<LandingClassification, SceneError> {
    let landing = scene
        .cell_at(north, east)
        .ok_or(SceneError::OutOfBounds { north, east })?;
    let occupancy = step_agents(scene, tick);
    let cs = scene.cell_size;
    let r = clearance_radius.max(0.0);
    let row_lo = ((north - r) / cs).floor() as i64;
    let row_hi = ((north + r) / cs).floor() as i64;
    let col_lo = ((east - r) / cs).floor() as i64;
    let col_hi = ((east + r) / cs).floor() as i64;

    let mut min_elev = f64::INFINITY;
    let mut max_elev = f64::NEG_INFINITY;
    let mut hazard_free = true;
    let mut agent_free = true;
    for row in row_lo..=row_hi {
        for col in col_lo..=col_hi {
            if !scene.in_grid(row, col) {
                continue;
            }
            let idx = CellIndex::new(row as u32, col as u32);
            let (cn, ce) = scene.cell_center(idx);
            if idx != landing && (cn - north).hypot(ce - east) > r {
                continue;
            }
            let cell = scene.cell(idx);
            min_elev = min_elev.min(cell.elevation);
            max_elev = max_elev.max(cell.elevation);
            hazard_free &= !cell.class.is_hazard();
            agent_free &= occupancy.at(idx).is_none();
        }
    }
    let spread = max_elev - min_elev;
    let class = scene.cell(landing).class;
    let flat = spread <= FLATNESS_TOLERANCE_M;
    let benign_surface = !class.is_traffic_or_pier();
    Ok(LandingClassification {
        surface_class: class,
        safe: flat && hazard_free && agent_free && benign_surface,
        flat,
        hazard_free,
        agent_free,
        benign_surface,
        elevation_spread: spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(path: &[(u32, u32)], speed: f64) -> DynamicAgent {
        DynamicAgent {
            kind: AgentKind::Vehicle,
            path: path.iter().map(|&(r, c)| CellIndex::new(r, c)).collect(),
            speed,
            footprint: 0,
            offset: 0.0,
        }
    }

    fn rooftop_scene() -> SceneModel {
        let mut s = SceneModel::uniform("roof", 20, 20, 1.0, SurfaceClass::Ground, 0.0);
        s.fill(2..=17, 2..=17, SurfaceClass::WallEdge, 10.6);
        s.fill(3..=16, 3..=16, SurfaceClass::Rooftop, 10.0);
        s
    }

    #[test]
    fn agent_walks_and_wraps() {
        let a = agent(&[(0, 0), (0, 1)], 1.0);
        assert_eq!(a.position_at(0), CellIndex::new(0, 0));
        assert_eq!(a.position_at(1), CellIndex::new(0, 1));
        // Hand-rolled modular oracle.
        let path = [(0u32, 0u32), (0, 1), (0, 2), (1, 2), (2, 2)];
        let a = agent(&path, 1.0);
        for tick in 0..40u64 {
            let (r, c) = path[(tick % path.len() as u64) as usize];
            assert_eq!(a.position_at(tick), CellIndex::new(r, c));
        }
        let half = agent(&path, 0.5);
        for tick in 0..40u64 {
            let (r, c) = path[((tick / 2) % path.len() as u64) as usize];
            assert_eq!(half.position_at(tick), CellIndex::new(r, c));
        }
    }

    #[test]
    fn occupancy_is_pure_and_respects_footprint() {
        let mut s = SceneModel::uniform("road", 10, 10, 1.0, SurfaceClass::Road, 0.0);
        s.agents.push(DynamicAgent {
            footprint: 1,
            ..agent(&[(5, 1), (5, 2), (5, 3)], 1.0)
        });
        s.validate().unwrap();
        let occ = step_agents(&s, 1);
        assert_eq!(occ.occupied().len(), 9);
        assert_eq!(occ.at(CellIndex::new(4, 1)), Some(AgentKind::Vehicle));
        assert_eq!(occ.at(CellIndex::new(5, 4)), None);
        assert_eq!(step_agents(&s, 1), occ);
    }

    #[test]
    fn validation_rejects_illegal_agents() {
        let mut s = SceneModel::uniform("g", 6, 6, 1.0, SurfaceClass::Ground, 0.0);
        s.agents.push(agent(&[(1, 1), (1, 2)], 1.0));
        assert!(matches!(s.validate(), Err(SceneError::Invalid(_))));
        s.agents[0].kind = AgentKind::Pedestrian;
        s.validate().unwrap();
        s.agents[0].path.push(CellIndex::new(3, 3));
        assert!(s.validate().is_err());
    }

    #[test]
    fn validation_rejects_raised_water() {
        let mut s = SceneModel::uniform("w", 4, 4, 1.0, SurfaceClass::Water, 0.0);
        s.validate().unwrap();
        s.cell_mut(CellIndex::new(1, 1)).elevation = 0.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn empty_rooftop_center_is_safe() {
        let s = rooftop_scene();
        let c = classify_touchdown(&s, 10.0, 10.0, 0, 2.0).unwrap();
        assert_eq!(c.surface_class, SurfaceClass::Rooftop);
        assert!(c.safe, "{c:?}");
    }

    #[test]
    fn rooftop_near_edge_or_obstacle_is_unsafe() {
        let mut s = rooftop_scene();
        let edge = classify_touchdown(&s, 4.0, 10.0, 0, 2.0).unwrap();
        assert!(!edge.safe && !edge.hazard_free);
        s.fill(10..=11, 11..=11, SurfaceClass::RooftopObstacle, 11.5);
        let hvac = classify_touchdown(&s, 10.5, 9.5, 0, 2.0).unwrap();
        assert_eq!(hvac.surface_class, SurfaceClass::Rooftop);
        assert!(!hvac.safe);
    }

    #[test]
    fn road_with_vehicle_is_unsafe() {
        let mut s = SceneModel::uniform("road", 12, 12, 1.0, SurfaceClass::Road, 0.0);
        s.agents.push(DynamicAgent {
            footprint: 1,
            ..agent(&[(6, 5), (6, 6), (6, 7)], 1.0)
        });
        let c = classify_touchdown(&s, 6.5, 6.5, 0, 2.0).unwrap();
        assert_eq!(c.surface_class, SurfaceClass::Road);
        assert!(!c.safe && !c.agent_free && !c.benign_surface);
    }

    #[test]
    fn classify_rejects_points_outside() {
        let s = rooftop_scene();
        assert!(matches!(
            classify_touchdown(&s, -1.0, 3.0, 0, 2.0),
            Err(SceneError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn plateau_collects_connected_equal_roof() {
        let s = rooftop_scene();
        let p = s.plateau(CellIndex::new(10, 10));
        assert_eq!(p.len(), 14 * 14);
        assert!(p.iter().all(|c| s.cell(*c).class == SurfaceClass::Rooftop));
    }
}
