//! Plain-text scene format.
//!
//! ```text
//! landfall-scene 1
//! name <identifier>
//! size <cols> <rows>
//! cell_size <metres>
//! seed <u64>
//! launch <north> <east> <altitude> <yaw>      (optional)
//! marker <name> <row> <col>                   (optional, repeatable)
//! level <char> <metres>                       (one per elevation symbol)
//! classes
//! <rows lines of <cols> class symbols, northmost row first>
//! end
//! elevations
//! <rows lines of <cols> level symbols, northmost row first>
//! end
//! agent <vehicle|pedestrian> speed <cells/tick> footprint <cells> offset <cells> path <r>,<c> <r>,<c> ...
//! ```
//!
//! Lines starting with `#` and blank lines are ignored outside map blocks.
//! Class symbols: `R` rooftop, `H` rooftop obstacle, `=` road, `s` sidewalk,
//! `P` pier, `~` water, `.` ground, `T` vegetation, `E` wall edge.
//! Agent paths list axis-aligned waypoints; every cell between consecutive
//! waypoints is visited. The path wraps from its last cell to its first.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::scene::{
    AgentKind, Cell, CellIndex, DynamicAgent, LaunchSpec, SceneError, SceneModel, SurfaceClass,
};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "landfall-scene";
const LEVEL_SYMBOLS: &str = "0123456789abcdefghijklmnopqrtuvwxyzABCDFGIJKLMNOQSUVWXYZ";

fn err(line: usize, message: impl Into<String>) -> SceneError {
    SceneError::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, what: &str, tok: Option<&str>) -> Result<T, SceneError> {
    let tok = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| err(line, format!("invalid {what}: {tok:?}")))
}

pub fn load_scene(path: &Path) -> Result<SceneModel, SceneError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SceneError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_scene(&text)
}

pub fn parse_scene(text: &str) -> Result<SceneModel, SceneError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    let skippable = |l: &str| {
        let t = l.trim();
        t.is_empty() || t.starts_with('#')
    };
    while i < lines.len() && skippable(lines[i]) {
        i += 1;
    }
    let header = lines.get(i).ok_or_else(|| err(1, "empty scene file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some(MAGIC) {
        return Err(err(i + 1, format!("expected `{MAGIC} <version>` header")));
    }
    let version = toks.next().unwrap_or("");
    if version != FORMAT_VERSION.to_string() {
        return Err(SceneError::UnsupportedVersion(version.to_string()));
    }
    i += 1;

    let mut name = None;
    let mut size: Option<(u32, u32)> = None;
    let mut cell_size = None;
    let mut seed = None;
    let mut launch = None;
    let mut markers = BTreeMap::new();
    let mut levels: BTreeMap<char, f64> = BTreeMap::new();
    let mut classes: Option<Vec<SurfaceClass>> = None;
    let mut elevation_syms: Option<(usize, Vec<char>)> = None;
    let mut agents = Vec::new();

    while i < lines.len() {
        let lineno = i + 1;
        let line = lines[i];
        i += 1;
        if skippable(line) {
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default();
        match key {
            "name" => {
                name = Some(
                    toks.next()
                        .ok_or_else(|| err(lineno, "missing name"))?
                        .to_string(),
                )
            }
            "size" => {
                let cols: u32 = num(lineno, "column count", toks.next())?;
                let rows: u32 = num(lineno, "row count", toks.next())?;
                if cols == 0 || rows == 0 {
                    return Err(err(lineno, "grid dimensions must be positive"));
                }
                size = Some((cols, rows));
            }
            "cell_size" => cell_size = Some(num::<f64>(lineno, "cell size", toks.next())?),
            "seed" => seed = Some(num::<u64>(lineno, "seed", toks.next())?),
            "launch" => {
                launch = Some(LaunchSpec {
                    north: num(lineno, "launch north", toks.next())?,
                    east: num(lineno, "launch east", toks.next())?,
                    altitude: num(lineno, "launch altitude", toks.next())?,
                    yaw: num(lineno, "launch yaw", toks.next())?,
                })
            }
            "marker" => {
                let label = toks
                    .next()
                    .ok_or_else(|| err(lineno, "missing marker name"))?;
                let row = num(lineno, "marker row", toks.next())?;
                let col = num(lineno, "marker column", toks.next())?;
                markers.insert(label.to_string(), CellIndex::new(row, col));
            }
            "level" => {
                let sym = toks
                    .next()
                    .ok_or_else(|| err(lineno, "missing level symbol"))?;
                let mut chars = sym.chars();
                let c = chars.next().filter(|_| chars.next().is_none());
                let c = c.ok_or_else(|| err(lineno, "level symbol must be one character"))?;
                levels.insert(c, num(lineno, "level elevation", toks.next())?);
            }
            "classes" | "elevations" => {
                let (cols, rows) =
                    size.ok_or_else(|| err(lineno, "`size` must precede map blocks"))?;
                let mut syms = Vec::with_capacity((cols * rows) as usize);
                let mut read_rows = Vec::new();
                loop {
                    let row_line = lines
                        .get(i)
                        .ok_or_else(|| err(lineno, format!("unterminated {key} block")))?;
                    i += 1;
                    if row_line.trim() == "end" {
                        break;
                    }
                    read_rows.push((i, row_line.trim_end()));
                }
                if read_rows.len() != rows as usize {
                    return Err(err(
                        lineno,
                        format!("{key} block has {} rows, expected {rows}", read_rows.len()),
                    ));
                }
                // First line is the northmost row; storage is row 0 = south.
                for (ln, row_text) in read_rows.iter().rev() {
                    let chars: Vec<char> = row_text.chars().collect();
                    if chars.len() != cols as usize {
                        return Err(err(
                            *ln,
                            format!("row has {} cells, expected {cols}", chars.len()),
                        ));
                    }
                    syms.extend(chars.into_iter().map(|c| (*ln, c)));
                }
                if key == "classes" {
                    let parsed = syms
                        .into_iter()
                        .map(|(ln, c)| {
                            SurfaceClass::from_symbol(c)
                                .ok_or_else(|| err(ln, format!("unknown class symbol {c:?}")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    classes = Some(parsed);
                } else {
                    elevation_syms = Some((lineno, syms.into_iter().map(|(_, c)| c).collect()));
                }
            }
            "agent" => agents.push(parse_agent(lineno, toks)?),
            other => return Err(err(lineno, format!("unknown directive {other:?}"))),
        }
    }

    let (cols, rows) = size.ok_or_else(|| err(0, "missing `size`"))?;
    let classes = classes.ok_or_else(|| err(0, "missing `classes` block"))?;
    let (elev_line, elev_syms) =
        elevation_syms.ok_or_else(|| err(0, "missing `elevations` block"))?;
    let cells = classes
        .into_iter()
        .zip(elev_syms)
        .map(|(class, sym)| {
            let elevation = *levels
                .get(&sym)
                .ok_or_else(|| err(elev_line, format!("undeclared level symbol {sym:?}")))?;
            Ok(Cell { class, elevation })
        })
        .collect::<Result<Vec<_>, SceneError>>()?;

    let scene = SceneModel {
        name: name.ok_or_else(|| err(0, "missing `name`"))?,
        grid_width: cols,
        grid_height: rows,
        cell_size: cell_size.ok_or_else(|| err(0, "missing `cell_size`"))?,
        cells,
        agents,
        rng_seed: seed.ok_or_else(|| err(0, "missing `seed`"))?,
        launch,
        markers,
    };
    scene.validate()?;
    Ok(scene)
}

fn parse_agent<'a>(
    line: usize,
    mut toks: impl Iterator<Item = &'a str>,
) -> Result<DynamicAgent, SceneError> {
    let kind = match toks.next() {
        Some("vehicle") => AgentKind::Vehicle,
        Some("pedestrian") => AgentKind::Pedestrian,
        other => return Err(err(line, format!("unknown agent kind {other:?}"))),
    };
    let mut speed = None;
    let mut footprint = 0;
    let mut offset = 0.0;
    let mut waypoints = Vec::new();
    while let Some(tok) = toks.next() {
        match tok {
            "speed" => speed = Some(num(line, "speed", toks.next())?),
            "footprint" => footprint = num(line, "footprint", toks.next())?,
            "offset" => offset = num(line, "offset", toks.next())?,
            "path" => {
                for wp in toks.by_ref() {
                    let (r, c) = wp
                        .split_once(',')
                        .ok_or_else(|| err(line, format!("waypoint {wp:?} is not <row>,<col>")))?;
                    waypoints.push(CellIndex::new(
                        num(line, "waypoint row", Some(r))?,
                        num(line, "waypoint column", Some(c))?,
                    ));
                }
            }
            other => return Err(err(line, format!("unknown agent field {other:?}"))),
        }
    }
    if waypoints.is_empty() {
        return Err(err(line, "agent path is empty"));
    }
    Ok(DynamicAgent {
        kind,
        path: expand_waypoints(line, &waypoints)?,
        speed: speed.ok_or_else(|| err(line, "agent is missing `speed`"))?,
        footprint,
        offset,
    })
}

fn expand_waypoints(line: usize, waypoints: &[CellIndex]) -> Result<Vec<CellIndex>, SceneError> {
    let mut path = vec![waypoints[0]];
    for pair in waypoints.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.row != b.row && a.col != b.col {
            return Err(err(
                line,
                format!(
                    "waypoints ({},{}) -> ({},{}) are not axis-aligned",
                    a.row, a.col, b.row, b.col
                ),
            ));
        }
        if a == b {
            return Err(err(line, "repeated waypoint"));
        }
        let (mut r, mut c) = (i64::from(a.row), i64::from(a.col));
        let (dr, dc) = (
            (i64::from(b.row) - r).signum(),
            (i64::from(b.col) - c).signum(),
        );
        while (r, c) != (i64::from(b.row), i64::from(b.col)) {
            r += dr;
            c += dc;
            path.push(CellIndex::new(r as u32, c as u32));
        }
    }
    Ok(path)
}

/// Reduces an expanded path back to its turning points.
fn compress_path(path: &[CellIndex]) -> Vec<CellIndex> {
    let dir = |a: CellIndex, b: CellIndex| {
        (
            (i64::from(b.row) - i64::from(a.row)).signum(),
            (i64::from(b.col) - i64::from(a.col)).signum(),
        )
    };
    let mut out = vec![path[0]];
    for k in 1..path.len() {
        let is_last = k + 1 == path.len();
        if is_last || dir(path[k - 1], path[k]) != dir(path[k], path[k + 1]) {
            out.push(path[k]);
        }
    }
    out
}

/// Serialises a scene. Fails when it needs more distinct elevations than
/// there are level symbols.
pub fn write_scene(scene: &SceneModel) -> Result<String, SceneError> {
    scene.validate()?;
    let mut distinct: Vec<f64> = scene.cells.iter().map(|c| c.elevation).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() > LEVEL_SYMBOLS.len() {
        return Err(SceneError::Invalid(format!(
            "{} distinct elevations exceed the {} available level symbols",
            distinct.len(),
            LEVEL_SYMBOLS.len()
        )));
    }
    let symbols: Vec<char> = LEVEL_SYMBOLS.chars().collect();
    let sym_of = |e: f64| symbols[distinct.iter().position(|d| *d == e).unwrap_or(0)];

    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "name {}", scene.name);
    let _ = writeln!(out, "size {} {}", scene.grid_width, scene.grid_height);
    let _ = writeln!(out, "cell_size {}", scene.cell_size);
    let _ = writeln!(out, "seed {}", scene.rng_seed);
    if let Some(l) = &scene.launch {
        let _ = writeln!(
            out,
            "launch {} {} {} {}",
            l.north, l.east, l.altitude, l.yaw
        );
    }
    for (label, idx) in &scene.markers {
        let _ = writeln!(out, "marker {label} {} {}", idx.row, idx.col);
    }
    for (k, e) in distinct.iter().enumerate() {
        let _ = writeln!(out, "level {} {e}", symbols[k]);
    }
    for (block, sym) in [
        (
            "classes",
            &(|c: &Cell| c.class.symbol()) as &dyn Fn(&Cell) -> char,
        ),
        ("elevations", &|c: &Cell| sym_of(c.elevation)),
    ] {
        let _ = writeln!(out, "{block}");
        for row in (0..scene.grid_height).rev() {
            let line: String = (0..scene.grid_width)
                .map(|col| sym(scene.cell(CellIndex::new(row, col))))
                .collect();
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "end");
    }
    for agent in &scene.agents {
        let _ = write!(
            out,
            "agent {} speed {} footprint {} offset {} path",
            agent.kind.name(),
            agent.speed,
            agent.footprint,
            agent.offset
        );
        for wp in compress_path(&agent.path) {
            let _ = write!(out, " {},{}", wp.row, wp.col);
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SMALL: &str = "\
# two roofs and a road
landfall-scene 1
name tiny
size 6 4
cell_size 2
seed 9
launch 4 6 30 0.5
marker roof 3 1
level 0 0
level a 12.5
classes
.RR.==
.RR.==
ssss==
ssss==
end
elevations
0aa000
0aa000
000000
000000
end
agent vehicle speed 1 footprint 0 offset 0 path 0,4 3,4 3,5 0,5
agent pedestrian speed 0.5 footprint 0 path 0,0 0,3
";

    #[test]
    fn parses_small_scene() {
        let s = parse_scene(SMALL).unwrap();
        assert_eq!(
            (s.grid_width, s.grid_height, s.cell_size, s.rng_seed),
            (6, 4, 2.0, 9)
        );
        // Northmost line is the last row.
        assert_eq!(s.cell(CellIndex::new(3, 1)).class, SurfaceClass::Rooftop);
        assert_eq!(s.cell(CellIndex::new(3, 1)).elevation, 12.5);
        assert_eq!(s.cell(CellIndex::new(0, 0)).class, SurfaceClass::Sidewalk);
        assert_eq!(s.agents[0].path.len(), 8);
        assert_eq!(s.agents[0].path[4], CellIndex::new(3, 5));
        assert_eq!(s.agents[1].path.len(), 4);
        assert_eq!(s.markers["roof"], CellIndex::new(3, 1));
        assert_eq!(s.launch.unwrap().altitude, 30.0);
    }

    #[test]
    fn rejects_unknown_version() {
        let text = SMALL.replace("landfall-scene 1", "landfall-scene 2");
        assert_eq!(
            parse_scene(&text),
            Err(SceneError::UnsupportedVersion("2".into()))
        );
    }

    #[test]
    fn reports_line_of_bad_symbol() {
        let text = SMALL.replace(".RR.==\n.RR.==\nssss", ".RR.==\n.RX.==\nssss");
        match parse_scene(&text) {
            Err(SceneError::Parse { line, .. }) => assert_eq!(line, 13),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_vehicle_off_road() {
        let text = SMALL.replace("path 0,4 3,4 3,5 0,5", "path 0,3 0,4");
        assert!(matches!(parse_scene(&text), Err(SceneError::Invalid(_))));
    }

    #[test]
    fn round_trips_through_text() {
        let s = parse_scene(SMALL).unwrap();
        let text = write_scene(&s).unwrap();
        assert_eq!(parse_scene(&text).unwrap(), s);
    }

    proptest! {
        #[test]
        fn random_scenes_round_trip(
            cols in 1u32..12, rows in 1u32..12, seed in any::<u64>(),
            picks in proptest::collection::vec((0usize..8, 0u8..6), 144),
        ) {
            let mut s = SceneModel::uniform("rand", cols, rows, 1.5, SurfaceClass::Ground, 0.0);
            s.rng_seed = seed;
            let classes = [
                SurfaceClass::Rooftop, SurfaceClass::RooftopObstacle, SurfaceClass::Road,
                SurfaceClass::Sidewalk, SurfaceClass::Pier, SurfaceClass::Ground,
                SurfaceClass::Vegetation, SurfaceClass::WallEdge,
            ];
            for (k, cell) in s.cells.iter_mut().enumerate() {
                let (c, e) = picks[k];
                *cell = Cell { class: classes[c], elevation: f64::from(e) * 0.75 };
            }
            s.cells[0] = Cell { class: SurfaceClass::Water, elevation: 0.0 };
            let text = write_scene(&s).unwrap();
            prop_assert_eq!(parse_scene(&text).unwrap(), s);
        }
    }
}
