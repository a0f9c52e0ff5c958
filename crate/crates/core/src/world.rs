//! Procedural household worlds: an occupancy grid of rooms joined by doors,
//! containers placed per room, and objects hidden in containers according to
//! configurable placement weights.
//!
//! Layout scheme: `n` rooms side by side, separated by walls with one door
//! carved per wall, so the free cells always form a single connected
//! component. Each room's first container is its room type's highest-weight
//! container type (an anchor that keeps placement feasible); the rest are
//! sampled from the weights.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::executive::BeliefState;

pub type Cell = (u32, u32);

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no path between ({},{}) and ({},{})", .a.0, .a.1, .b.0, .b.1)]
    Unreachable { a: Cell, b: Cell },
    #[error("no feasible world for seed {seed}: {msg}")]
    Infeasible { seed: u64, msg: String },
    #[error("world file, line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("robot is not at container '{0}'")]
    NotAtContainer(String),
    #[error("unknown container '{0}'")]
    UnknownContainer(String),
}

/// splitmix64-style mixer for deriving independent RNG streams.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    pub width: u32,
    pub height: u32,
    cells: Vec<bool>,
}

impl GridMap {
    pub fn new_blocked(width: u32, height: u32) -> GridMap {
        GridMap {
            width,
            height,
            cells: vec![false; (width * height) as usize],
        }
    }

    pub fn from_rows(rows: &[&str]) -> GridMap {
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.len()) as u32;
        let mut g = GridMap::new_blocked(width, height);
        for (y, row) in rows.iter().enumerate() {
            for (x, ch) in row.chars().enumerate() {
                if ch == '.' {
                    g.set_free((x as u32, y as u32), true);
                }
            }
        }
        g
    }

    fn idx(&self, c: Cell) -> usize {
        (c.1 * self.width + c.0) as usize
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.0 < self.width && c.1 < self.height
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.cells[self.idx(c)]
    }

    pub fn set_free(&mut self, c: Cell, free: bool) {
        let i = self.idx(c);
        self.cells[i] = free;
    }

    fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let (x, y) = (c.0 as i64, c.1 as i64);
        [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
            .into_iter()
            .filter(|&(nx, ny)| nx >= 0 && ny >= 0)
            .map(|(nx, ny)| (nx as u32, ny as u32))
            .filter(|&n| self.is_free(n))
    }

    /// BFS distances from `a` to every cell; -1 marks unreachable or blocked.
    pub fn distance_field(&self, a: Cell) -> Vec<i32> {
        let mut field = vec![-1i32; (self.width * self.height) as usize];
        if !self.is_free(a) {
            return field;
        }
        let mut queue = VecDeque::new();
        field[self.idx(a)] = 0;
        queue.push_back(a);
        while let Some(c) = queue.pop_front() {
            let d = field[self.idx(c)];
            for n in self.neighbors(c) {
                let i = self.idx(n);
                if field[i] < 0 {
                    field[i] = d + 1;
                    queue.push_back(n);
                }
            }
        }
        field
    }

    /// Shortest 4-connected path length in cell units, via A* with the
    /// Manhattan-distance heuristic.
    pub fn path_cost(&self, a: Cell, b: Cell) -> Result<f64, WorldError> {
        if !self.is_free(a) || !self.is_free(b) {
            return Err(WorldError::Unreachable { a, b });
        }
        if a == b {
            return Ok(0.0);
        }
        let manhattan = |c: Cell| -> u32 { c.0.abs_diff(b.0) + c.1.abs_diff(b.1) };
        let mut g = vec![u32::MAX; (self.width * self.height) as usize];
        let mut heap: std::collections::BinaryHeap<std::cmp::Reverse<(u32, Cell)>> =
            Default::default();
        g[self.idx(a)] = 0;
        heap.push(std::cmp::Reverse((manhattan(a), a)));
        while let Some(std::cmp::Reverse((f, c))) = heap.pop() {
            let gc = g[self.idx(c)];
            if f > gc + manhattan(c) {
                continue;
            }
            if c == b {
                return Ok(gc as f64);
            }
            for n in self.neighbors(c) {
                let ng = gc + 1;
                if ng < g[self.idx(n)] {
                    g[self.idx(n)] = ng;
                    heap.push(std::cmp::Reverse((ng + manhattan(n), n)));
                }
            }
        }
        Err(WorldError::Unreachable { a, b })
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| (x, y)))
            .filter(|&c| self.is_free(c))
    }
}

/// Memoizes per-source BFS fields so repeated distance queries stay cheap.
pub struct DistanceCache<'a> {
    grid: &'a GridMap,
    fields: HashMap<Cell, Vec<i32>>,
}

impl<'a> DistanceCache<'a> {
    pub fn new(grid: &'a GridMap) -> DistanceCache<'a> {
        DistanceCache {
            grid,
            fields: HashMap::new(),
        }
    }

    pub fn dist(&mut self, a: Cell, b: Cell) -> Result<f64, WorldError> {
        let (src, dst) = if self.fields.contains_key(&b) && !self.fields.contains_key(&a) {
            (b, a)
        } else {
            (a, b)
        };
        let field = self
            .fields
            .entry(src)
            .or_insert_with(|| self.grid.distance_field(src));
        let d = field[(dst.1 * self.grid.width + dst.0) as usize];
        if d < 0 {
            return Err(WorldError::Unreachable { a, b });
        }
        Ok(d as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    pub id: String,
    pub type_name: String,
    pub room_type: String,
    pub pose: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldObject {
    pub id: String,
    pub type_name: String,
    pub true_container: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldModel {
    pub grid: GridMap,
    pub containers: Vec<Container>,
    pub objects: Vec<WorldObject>,
    pub seed: u64,
}

impl WorldModel {
    pub fn container(&self, id: &str) -> Option<&Container> {
        self.containers.iter().find(|c| c.id == id)
    }

    pub fn container_at(&self, pose: Cell) -> Option<&Container> {
        self.containers.iter().find(|c| c.pose == pose)
    }

    pub fn objects_in<'a>(
        &'a self,
        container_id: &'a str,
    ) -> impl Iterator<Item = &'a WorldObject> {
        self.objects
            .iter()
            .filter(move |o| o.true_container == container_id)
    }

    pub fn object_types(&self) -> BTreeSet<&str> {
        self.objects.iter().map(|o| o.type_name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub searched_container: String,
    pub revealed_objects: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Revealed(Observation),
    AlreadySearched,
}

/// Ground-truth search. Reveals exactly the objects whose true container is
/// `container_id`; the caller merges the observation into its belief (and is
/// responsible for discounting objects it has moved itself).
pub fn search_container(
    world: &WorldModel,
    belief: &BeliefState,
    container_id: &str,
) -> Result<SearchOutcome, WorldError> {
    let c = world
        .container(container_id)
        .ok_or_else(|| WorldError::UnknownContainer(container_id.to_string()))?;
    if belief.robot_pose != c.pose {
        return Err(WorldError::NotAtContainer(container_id.to_string()));
    }
    if belief.searched.contains(container_id) {
        return Ok(SearchOutcome::AlreadySearched);
    }
    Ok(SearchOutcome::Revealed(Observation {
        searched_container: container_id.to_string(),
        revealed_objects: world
            .objects_in(container_id)
            .map(|o| o.id.clone())
            .collect(),
    }))
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct ObjectSpec {
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(default = "one")]
    pub count: u32,
    /// `[container_type, room_type, weight]` triples.
    pub weights: Vec<(String, String, f64)>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct WorldConfig {
    pub room_width: u32,
    pub room_height: u32,
    pub rooms_min: u32,
    pub rooms_max: u32,
    pub containers_per_room_min: u32,
    pub containers_per_room_max: u32,
    pub room_types: Vec<String>,
    pub container_weights: BTreeMap<String, BTreeMap<String, f64>>,
    pub objects: Vec<ObjectSpec>,
}

impl WorldConfig {
    pub fn from_toml(text: &str) -> Result<WorldConfig, WorldError> {
        let cfg: WorldConfig =
            toml::from_str(text).map_err(|e| WorldError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let fail = |msg: &str| Err(WorldError::InvalidConfig(msg.to_string()));
        if self.room_width < 3 || self.room_height < 3 {
            return fail("rooms must be at least 3x3 cells");
        }
        if self.rooms_min == 0 || self.rooms_min > self.rooms_max {
            return fail("rooms_min must be in 1..=rooms_max");
        }
        if self.containers_per_room_min == 0
            || self.containers_per_room_min > self.containers_per_room_max
        {
            return fail("containers_per_room_min must be in 1..=containers_per_room_max");
        }
        if self.room_types.is_empty() {
            return fail("room_types is empty");
        }
        for rt in &self.room_types {
            let w = match self.container_weights.get(rt) {
                Some(w) if !w.is_empty() => w,
                _ => {
                    return Err(WorldError::InvalidConfig(format!(
                        "room type '{rt}' has no container weights"
                    )))
                }
            };
            if w.values().any(|&v| v < 0.0 || !v.is_finite()) {
                return fail("container weights must be finite and nonnegative");
            }
            if w.values().sum::<f64>() <= 0.0 {
                return Err(WorldError::InvalidConfig(format!(
                    "room type '{rt}' has no positive container weight"
                )));
            }
        }
        if self.objects.is_empty() {
            return fail("object catalog is empty");
        }
        for o in &self.objects {
            if o.count == 0 {
                return Err(WorldError::InvalidConfig(format!(
                    "object type '{}' has count 0",
                    o.type_name
                )));
            }
            if o.weights.iter().any(|(_, _, w)| *w < 0.0 || !w.is_finite()) {
                return fail("object placement weights must be finite and nonnegative");
            }
            if !o.weights.iter().any(|(_, _, w)| *w > 0.0) {
                return Err(WorldError::InvalidConfig(format!(
                    "object type '{}' has no positive placement weight",
                    o.type_name
                )));
            }
        }
        Ok(())
    }
}

/// The stock household catalog shipped with the toolkit.
pub fn default_config() -> WorldConfig {
    WorldConfig::from_toml(include_str!("../../../configs/household.toml"))
        .expect("bundled household config is valid")
}

pub fn generate_world(seed: u64, config: &WorldConfig) -> Result<WorldModel, WorldError> {
    config.validate()?;
    let mut last = String::new();
    for attempt in 0..100u64 {
        match try_generate(seed, attempt, config) {
            Ok(w) => return Ok(w),
            Err(msg) => last = msg,
        }
    }
    Err(WorldError::Infeasible { seed, msg: last })
}

fn try_generate(seed: u64, attempt: u64, config: &WorldConfig) -> Result<WorldModel, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, attempt));
    let n_rooms = rng.gen_range(config.rooms_min..=config.rooms_max) as usize;

    // Coverage-first room typing: the first min(n, |types|) rooms receive a
    // shuffled permutation of all types, the remainder draw uniformly.
    let mut room_types: Vec<String> = Vec::with_capacity(n_rooms);
    let mut pool: Vec<&String> = config.room_types.iter().collect();
    for i in (1..pool.len()).rev() {
        pool.swap(i, rng.gen_range(0..=i));
    }
    for i in 0..n_rooms {
        if i < pool.len() {
            room_types.push(pool[i].clone());
        } else {
            room_types.push(config.room_types[rng.gen_range(0..config.room_types.len())].clone());
        }
    }

    let rw = config.room_width;
    let rh = config.room_height;
    let width = n_rooms as u32 * (rw + 1) + 1;
    let height = rh + 2;
    let mut grid = GridMap::new_blocked(width, height);
    for room in 0..n_rooms as u32 {
        for x in (room * (rw + 1) + 1)..=(room * (rw + 1) + rw) {
            for y in 1..=rh {
                grid.set_free((x, y), true);
            }
        }
    }
    for wall in 1..n_rooms as u32 {
        let door_y = rng.gen_range(1..=rh);
        grid.set_free((wall * (rw + 1), door_y), true);
    }

    let mut containers: Vec<Container> = Vec::new();
    let mut type_counters: BTreeMap<String, u32> = BTreeMap::new();
    let fresh_id = |counters: &mut BTreeMap<String, u32>, ty: &str| -> String {
        let n = counters.entry(ty.to_string()).or_insert(0);
        let id = format!("{}_{}", ty, n);
        *n += 1;
        id
    };
    for (room, rt) in room_types.iter().enumerate() {
        let weights = &config.container_weights[rt];
        let names: Vec<&String> = weights.keys().collect();
        let ws: Vec<f64> = weights.values().copied().collect();
        // Anchor: the highest-weight container type; names iterate in sorted
        // order, so ties resolve to the lexicographically first name.
        let mut anchor = 0;
        for (i, &w) in ws.iter().enumerate() {
            if w > ws[anchor] {
                anchor = i;
            }
        }
        let k = rng.gen_range(config.containers_per_room_min..=config.containers_per_room_max);
        let dist = WeightedIndex::new(&ws).map_err(|e| e.to_string())?;
        let mut taken: BTreeSet<Cell> = BTreeSet::new();
        for slot in 0..k {
            let ty = if slot == 0 {
                names[anchor].clone()
            } else {
                names[dist.sample(&mut rng)].clone()
            };
            let x0 = room as u32 * (rw + 1) + 1;
            let pose = loop {
                let c = (x0 + rng.gen_range(0..rw), 1 + rng.gen_range(0..rh));
                if taken.insert(c) {
                    break c;
                }
            };
            containers.push(Container {
                id: fresh_id(&mut type_counters, &ty),
                type_name: ty,
                room_type: rt.clone(),
                pose,
            });
        }
    }

    let mut objects: Vec<WorldObject> = Vec::new();
    let mut obj_counters: BTreeMap<String, u32> = BTreeMap::new();
    for spec in &config.objects {
        let ws: Vec<f64> = containers
            .iter()
            .map(|c| {
                spec.weights
                    .iter()
                    .filter(|(ct, rt, _)| *ct == c.type_name && *rt == c.room_type)
                    .map(|(_, _, w)| *w)
                    .sum::<f64>()
            })
            .collect();
        if ws.iter().sum::<f64>() <= 0.0 {
            return Err(format!(
                "no container accepts object type '{}'",
                spec.type_name
            ));
        }
        let dist = WeightedIndex::new(&ws).map_err(|e| e.to_string())?;
        for _ in 0..spec.count {
            let c = &containers[dist.sample(&mut rng)];
            objects.push(WorldObject {
                id: fresh_id(&mut obj_counters, &spec.type_name),
                type_name: spec.type_name.clone(),
                true_container: c.id.clone(),
            });
        }
    }

    Ok(WorldModel {
        grid,
        containers,
        objects,
        seed,
    })
}

impl WorldModel {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "findplan-world 1").unwrap();
        writeln!(s, "seed {}", self.seed).unwrap();
        writeln!(s, "grid {} {}", self.grid.width, self.grid.height).unwrap();
        for y in 0..self.grid.height {
            for x in 0..self.grid.width {
                s.push(if self.grid.is_free((x, y)) { '.' } else { '#' });
            }
            s.push('\n');
        }
        writeln!(s, "containers {}", self.containers.len()).unwrap();
        for c in &self.containers {
            writeln!(
                s,
                "{} {} {} {} {}",
                c.id, c.type_name, c.room_type, c.pose.0, c.pose.1
            )
            .unwrap();
        }
        writeln!(s, "objects {}", self.objects.len()).unwrap();
        for o in &self.objects {
            writeln!(s, "{} {} {}", o.id, o.type_name, o.true_container).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<WorldModel, WorldError> {
        let mut lines = text.lines().enumerate();
        let mut next = |want: &str| -> Result<(usize, String), WorldError> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l.to_string()))
                .ok_or_else(|| WorldError::Parse {
                    line: text.lines().count() + 1,
                    msg: format!("unexpected end of file, expected {want}"),
                })
        };
        let err = |line: usize, msg: String| WorldError::Parse { line, msg };

        let (ln, header) = next("header")?;
        if header.trim() != "findplan-world 1" {
            return Err(err(ln, format!("bad header '{}'", header.trim())));
        }
        let (ln, seed_line) = next("seed")?;
        let seed: u64 = seed_line
            .strip_prefix("seed ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| err(ln, "expected 'seed <u64>'".into()))?;
        let (ln, grid_line) = next("grid size")?;
        let dims: Vec<u32> = grid_line
            .strip_prefix("grid ")
            .map(|v| {
                v.split_whitespace()
                    .filter_map(|t| t.parse().ok())
                    .collect()
            })
            .unwrap_or_default();
        let [width, height] = dims[..] else {
            return Err(err(ln, "expected 'grid <width> <height>'".into()));
        };
        let mut grid = GridMap::new_blocked(width, height);
        for y in 0..height {
            let (ln, row) = next("grid row")?;
            if row.chars().count() != width as usize {
                return Err(err(
                    ln,
                    format!(
                        "grid row has {} cells, expected {width}",
                        row.chars().count()
                    ),
                ));
            }
            for (x, ch) in row.chars().enumerate() {
                match ch {
                    '.' => grid.set_free((x as u32, y), true),
                    '#' => {}
                    other => return Err(err(ln, format!("bad grid cell '{other}'"))),
                }
            }
        }
        let (ln, c_hdr) = next("containers header")?;
        let n_containers: usize = c_hdr
            .strip_prefix("containers ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| err(ln, "expected 'containers <n>'".into()))?;
        let mut containers = Vec::with_capacity(n_containers);
        let mut seen = BTreeSet::new();
        for _ in 0..n_containers {
            let (ln, row) = next("container row")?;
            let f: Vec<&str> = row.split_whitespace().collect();
            let [id, ty, room, x, y] = f[..] else {
                return Err(err(ln, "expected 'id type room x y'".into()));
            };
            let pose: Cell = match (x.parse(), y.parse()) {
                (Ok(x), Ok(y)) => (x, y),
                _ => return Err(err(ln, "bad container pose".into())),
            };
            if !grid.is_free(pose) {
                return Err(err(ln, format!("container '{id}' is on a blocked cell")));
            }
            if !seen.insert(id.to_string()) {
                return Err(err(ln, format!("duplicate container id '{id}'")));
            }
            containers.push(Container {
                id: id.into(),
                type_name: ty.into(),
                room_type: room.into(),
                pose,
            });
        }
        let (ln, o_hdr) = next("objects header")?;
        let n_objects: usize = o_hdr
            .strip_prefix("objects ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| err(ln, "expected 'objects <n>'".into()))?;
        let mut objects = Vec::with_capacity(n_objects);
        let mut seen_obj = BTreeSet::new();
        for _ in 0..n_objects {
            let (ln, row) = next("object row")?;
            let f: Vec<&str> = row.split_whitespace().collect();
            let [id, ty, container] = f[..] else {
                return Err(err(ln, "expected 'id type container'".into()));
            };
            if !seen.contains(container) {
                return Err(err(
                    ln,
                    format!("object '{id}' placed in unknown container '{container}'"),
                ));
            }
            if !seen_obj.insert(id.to_string()) {
                return Err(err(ln, format!("duplicate object id '{id}'")));
            }
            objects.push(WorldObject {
                id: id.into(),
                type_name: ty.into(),
                true_container: container.into(),
            });
        }
        Ok(WorldModel {
            grid,
            containers,
            objects,
            seed,
        })
    }
}
