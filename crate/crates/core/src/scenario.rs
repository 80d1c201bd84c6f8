//! Problem instances: region geometry, reward curve, arrival cases and the
//! built-in 125-scenario library.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Version tag of the built-in cell coordinates below. Bump on any change.
pub const GEOMETRY_VERSION: u32 = 1;

/// Cell centers of the five built-in regions, one unit per cell width.
///
/// Orientation follows the cell diagrams with the origin at the lower-left
/// corner of the bounding box. Mirror images give identical objectives.
const BUILTIN_CENTERS: [[[f64; 2]; 4]; 5] = [
    // R1: a row of four cells.
    [[0.5, 0.5], [1.5, 0.5], [2.5, 0.5], [3.5, 0.5]],
    // R2: 2x2 block, 1 2 on top, 3 4 below.
    [[0.5, 1.5], [1.5, 1.5], [0.5, 0.5], [1.5, 0.5]],
    // R3: offset (S) shape, 1 2 on top, 3 4 shifted right below.
    [[0.5, 1.5], [1.5, 1.5], [1.5, 0.5], [2.5, 0.5]],
    // R4: L shape, 1 above 2, then 3 4 to the right of 2.
    [[0.5, 1.5], [0.5, 0.5], [1.5, 0.5], [2.5, 0.5]],
    // R5: T shape, 1 above 3, row 2 3 4.
    [[1.5, 1.5], [0.5, 0.5], [1.5, 0.5], [2.5, 0.5]],
];

/// Conditional location probabilities, indexed `[region][case][location]`.
const ARRIVAL_TABLE: [[[f64; 4]; 5]; 5] = [
    [[0.25, 0.25, 0.25, 0.25], [0.7, 0.1, 0.1, 0.1], [0.1, 0.7, 0.1, 0.1], [0.4, 0.1, 0.1, 0.4], [0.1, 0.4, 0.4, 0.1]],
    [[0.25, 0.25, 0.25, 0.25], [0.7, 0.1, 0.1, 0.1], [0.2, 0.4, 0.2, 0.2], [0.4, 0.1, 0.1, 0.4], [0.4, 0.4, 0.1, 0.1]],
    [[0.25, 0.25, 0.25, 0.25], [0.7, 0.1, 0.1, 0.1], [0.1, 0.7, 0.1, 0.1], [0.4, 0.1, 0.1, 0.4], [0.1, 0.4, 0.4, 0.1]],
    [[0.25, 0.25, 0.25, 0.25], [0.7, 0.1, 0.1, 0.1], [0.1, 0.7, 0.1, 0.1], [0.4, 0.1, 0.1, 0.4], [0.1, 0.4, 0.4, 0.1]],
    [[0.25, 0.25, 0.25, 0.25], [0.7, 0.1, 0.1, 0.1], [0.1, 0.1, 0.7, 0.1], [0.1, 0.4, 0.1, 0.4], [0.4, 0.1, 0.4, 0.1]],
];

/// Arrival rates of the built-in library.
pub const LIBRARY_LAMBDAS: [f64; 5] = [3.0, 6.0, 9.0, 12.0, 15.0];

/// Default on-scene service time.
pub const DEFAULT_ON_SCENE_TIME: f64 = 12.0;
/// Default fraction of arrivals that are high-level.
pub const DEFAULT_HIGH_SHARE: f64 = 0.5;
/// Default length of the arrival-rate time unit in service-time units:
/// arrivals per hour, service and travel times in minutes.
pub const DEFAULT_TIME_SCALE: f64 = 60.0;

fn default_time_scale() -> f64 {
    DEFAULT_TIME_SCALE
}

/// Triage level of an arriving customer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    High,
    Low,
}

impl Level {
    pub fn suffix(self) -> char {
        match self {
            Level::High => 'H',
            Level::Low => 'L',
        }
    }
}

macro_rules! five_ids {
    ($name:ident, $prefix:literal, $what:literal, [$($var:ident = $num:literal),*]) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $($var),*
        }

        impl $name {
            pub const ALL: [$name; 5] = [$($name::$var),*];

            /// Zero-based position in [`Self::ALL`].
            pub fn index(self) -> usize {
                self as usize
            }

            pub fn number(self) -> u32 {
                self as u32 + 1
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $prefix, self.number())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let t = s.trim();
                $(
                    if t.eq_ignore_ascii_case(concat!($prefix, $num)) {
                        return Ok($name::$var);
                    }
                )*
                Err(Error::Input(format!(concat!("unknown ", $what, " id `{}`"), s)))
            }
        }
    };
}

five_ids!(RegionId, "R", "region", [R1 = "1", R2 = "2", R3 = "3", R4 = "4", R5 = "5"]);
five_ids!(CaseId, "C", "arrival case", [C1 = "1", C2 = "2", C3 = "3", C4 = "4", C5 = "5"]);

/// Location centers and their pairwise Euclidean distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub id: Option<RegionId>,
    pub centers: Vec<[f64; 2]>,
    dist: Vec<f64>,
}

impl RegionMap {
    pub fn from_centers(id: Option<RegionId>, centers: Vec<[f64; 2]>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Input("a region needs at least one location".to_string()));
        }
        if centers.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Input("region centers must be finite".to_string()));
        }
        let n = centers.len();
        let mut dist = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    dist[a * n + b] = math::hypot(centers[a][0] - centers[b][0], centers[a][1] - centers[b][1]);
                }
            }
        }
        Ok(RegionMap { id, centers, dist })
    }

    /// Number of customer locations.
    pub fn n(&self) -> usize {
        self.centers.len()
    }

    /// Distance between locations `a` and `b` (zero-based).
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.n() + b]
    }

    pub fn max_dist(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }
}

/// Built-in region geometry.
pub fn load_region(id: RegionId) -> RegionMap {
    let centers = BUILTIN_CENTERS[id.index()].to_vec();
    RegionMap::from_centers(Some(id), centers).expect("built-in geometry is valid")
}

/// Piecewise-linear utility of sending an ambulance a given distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardCurve {
    /// `(distance, high-level utility)`, strictly increasing in distance.
    pub breakpoints: Vec<(f64, f64)>,
    /// Low-level utility as a multiple of the high-level utility.
    pub low_level_factor: f64,
}

impl Default for RewardCurve {
    fn default() -> Self {
        RewardCurve { breakpoints: vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.25), (3.0, 0.125)], low_level_factor: 0.125 }
    }
}

impl RewardCurve {
    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.is_empty() {
            return Err(Error::Input("reward curve has no breakpoints".to_string()));
        }
        if self.breakpoints[0].0 != 0.0 {
            return Err(Error::Input("reward curve must start at distance 0".to_string()));
        }
        if self.breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Input("reward breakpoints must be strictly increasing".to_string()));
        }
        if self.breakpoints.iter().any(|&(d, r)| !d.is_finite() || !r.is_finite() || r < 0.0) {
            return Err(Error::Input("reward breakpoints must be finite and nonnegative".to_string()));
        }
        if !(self.low_level_factor >= 0.0 && self.low_level_factor.is_finite()) {
            return Err(Error::Input("low-level factor must be finite and nonnegative".to_string()));
        }
        Ok(())
    }

    pub fn max_distance(&self) -> f64 {
        self.breakpoints.last().map_or(0.0, |b| b.0)
    }

    /// Utility for a customer of `level` reached over `distance`.
    pub fn reward_of(&self, level: Level, distance: f64) -> Result<f64> {
        let max = self.max_distance();
        if !(0.0..=max + 1e-12).contains(&distance) {
            return Err(Error::Input(format!("distance {distance} outside the reward curve domain [0, {max}]")));
        }
        let d = distance.min(max);
        let mut high = self.breakpoints[self.breakpoints.len() - 1].1;
        for w in self.breakpoints.windows(2) {
            let ((d0, r0), (d1, r1)) = (w[0], w[1]);
            if d <= d1 {
                high = r0 + (r1 - r0) * (d - d0) / (d1 - d0);
                break;
            }
        }
        Ok(match level {
            Level::High => high,
            Level::Low => self.low_level_factor * high,
        })
    }
}

/// Conditional probability of each location given that a customer arrived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalCase {
    pub id: Option<CaseId>,
    pub p: Vec<f64>,
}

impl ArrivalCase {
    pub fn builtin(region: RegionId, case: CaseId) -> Self {
        ArrivalCase { id: Some(case), p: ARRIVAL_TABLE[region.index()][case.index()].to_vec() }
    }

    pub fn from_probabilities(id: Option<CaseId>, p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Input("arrival probabilities must be nonnegative".to_string()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("arrival probabilities sum to {total}, not 1")));
        }
        Ok(ArrivalCase { id, p })
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Stable identifier, `R{r}-C{c}-L{lambda}` for library scenarios.
    pub id: String,
    pub region: RegionMap,
    pub case: ArrivalCase,
    /// Total arrival rate.
    pub lambda: f64,
    /// Number of ambulances.
    pub m: usize,
    /// Home location of each ambulance (zero-based).
    pub homes: Vec<usize>,
    pub on_scene_time: f64,
    pub high_share: f64,
    /// Service-time units per unit of the arrival-rate clock.
    #[serde(default = "default_time_scale")]
    pub time_scale: f64,
    pub rewards: RewardCurve,
}

/// Optional knobs for [`Scenario::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOptions {
    pub homes: Option<Vec<usize>>,
    pub on_scene_time: f64,
    pub high_share: f64,
    pub time_scale: f64,
    pub rewards: RewardCurve,
    pub id: Option<String>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            homes: None,
            on_scene_time: DEFAULT_ON_SCENE_TIME,
            high_share: DEFAULT_HIGH_SHARE,
            time_scale: DEFAULT_TIME_SCALE,
            rewards: RewardCurve::default(),
            id: None,
        }
    }
}

fn lambda_label(lambda: f64) -> String {
    if crate::math::is_integral(lambda) && lambda.abs() < 1e15 {
        format!("{}", lambda as i64)
    } else {
        format!("{lambda}")
    }
}

impl Scenario {
    pub fn new(region: RegionMap, case: ArrivalCase, lambda: f64, m: usize, opts: ScenarioOptions) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Input(format!("arrival rate must be positive, got {lambda}")));
        }
        if m == 0 {
            return Err(Error::Input("need at least one ambulance".to_string()));
        }
        let n = region.n();
        if case.p.len() != n {
            return Err(Error::Input(format!("arrival case has {} probabilities for {} locations", case.p.len(), n)));
        }
        ArrivalCase::from_probabilities(case.id, case.p.clone())?;
        if !(opts.on_scene_time > 0.0 && opts.on_scene_time.is_finite()) {
            return Err(Error::Input("on-scene time must be positive".to_string()));
        }
        if !(opts.time_scale > 0.0 && opts.time_scale.is_finite()) {
            return Err(Error::Input("time scale must be positive".to_string()));
        }
        if !(0.0..=1.0).contains(&opts.high_share) {
            return Err(Error::Input("high-level share must lie in [0, 1]".to_string()));
        }
        opts.rewards.validate()?;
        let homes = match opts.homes {
            Some(h) => {
                if h.len() != m || h.iter().any(|&x| x >= n) {
                    return Err(Error::Input(format!("need {m} home locations, each below {n}")));
                }
                h
            }
            None => (0..m).map(|j| j % n).collect(),
        };
        if region.max_dist() > opts.rewards.max_distance() + 1e-12 {
            return Err(Error::Input(format!("region spans distance {} beyond the reward curve", region.max_dist())));
        }
        let id = opts.id.unwrap_or_else(|| match (region.id, case.id) {
            (Some(r), Some(c)) => format!("{r}-{c}-L{}", lambda_label(lambda)),
            _ => format!("custom-L{}", lambda_label(lambda)),
        });
        Ok(Scenario {
            id,
            region,
            case,
            lambda,
            m,
            homes,
            on_scene_time: opts.on_scene_time,
            high_share: opts.high_share,
            time_scale: opts.time_scale,
            rewards: opts.rewards,
        })
    }

    /// Number of customer locations.
    pub fn n(&self) -> usize {
        self.region.n()
    }

    /// Arrival rate of customers at location `i` with `level`.
    pub fn arrival_rate(&self, i: usize, level: Level) -> f64 {
        let share = match level {
            Level::High => self.high_share,
            Level::Low => 1.0 - self.high_share,
        };
        self.lambda * self.case.p[i] * share
    }

    /// Distance from ambulance `j`'s home to location `i`.
    pub fn travel(&self, j: usize, i: usize) -> f64 {
        self.region.dist(self.homes[j], i)
    }

    /// Mean service time of ambulance `j` serving location `i`.
    pub fn mean_service_time(&self, i: usize, j: usize) -> f64 {
        self.on_scene_time + self.travel(j, i)
    }

    /// Service rate of ambulance `j` serving location `i`, per unit of the
    /// arrival-rate clock.
    pub fn service_rate(&self, i: usize, j: usize) -> f64 {
        self.time_scale / self.mean_service_time(i, j)
    }

    /// Utility of sending ambulance `j` to a customer at `i` with `level`.
    pub fn reward(&self, i: usize, level: Level, j: usize) -> f64 {
        self.rewards.reward_of(level, self.travel(j, i)).expect("scenario construction checked the distance range")
    }

    /// The scenario with locations renamed by `sigma` (old `i` becomes
    /// `sigma[i]`); ambulances keep their indices and follow their homes.
    pub fn relabel(&self, sigma: &[usize]) -> Result<Scenario> {
        let n = self.n();
        let mut seen = vec![false; n];
        if sigma.len() != n || sigma.iter().any(|&t| t >= n || core::mem::replace(&mut seen[t], true)) {
            return Err(Error::Input("relabeling must be a permutation of the locations".to_string()));
        }
        let mut centers = vec![[0.0; 2]; n];
        let mut p = vec![0.0; n];
        for i in 0..n {
            centers[sigma[i]] = self.region.centers[i];
            p[sigma[i]] = self.case.p[i];
        }
        let mut out = self.clone();
        out.region = RegionMap::from_centers(self.region.id, centers)?;
        out.case = ArrivalCase { id: self.case.id, p };
        out.homes = self.homes.iter().map(|&h| sigma[h]).collect();
        Ok(out)
    }
}

/// Built-in scenario for one cell of the library grid (any `lambda`).
pub fn make_scenario(region: RegionId, case: CaseId, lambda: f64, m: usize) -> Result<Scenario> {
    Scenario::new(load_region(region), ArrivalCase::builtin(region, case), lambda, m, ScenarioOptions::default())
}

/// The 5 regions x 5 cases x 5 arrival rates, with four ambulances each.
pub fn scenario_library() -> Vec<Scenario> {
    let mut out = Vec::with_capacity(125);
    for region in RegionId::ALL {
        for case in CaseId::ALL {
            for lambda in LIBRARY_LAMBDAS {
                out.push(make_scenario(region, case, lambda, 4).expect("library scenarios are valid"));
            }
        }
    }
    out
}
