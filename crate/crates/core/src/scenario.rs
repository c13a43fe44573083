//! Problem instance and propagation primitives.
//!
//! A [`ScenarioConfig`] is loaded from a TOML document (see `docs/config.md`).
//! Keys ending in `_db`, `_dbm`, `_dbi` or `_dbsm` are converted to linear SI
//! values once, at load time. Everything downstream works in linear units.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DVector, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::{AeroParams, FlightModel};

pub type Vec2 = Vector2<f64>;
pub type CVector = DVector<Complex64>;

/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadarTiming {
    pub t_p: f64,
    pub t_o: f64,
    pub n_b: f64,
    pub delta_r: f64,
    pub w_f: f64,
    pub wavelength: f64,
    pub antenna_spacing: f64,
    /// Half-beamwidth of the ideal sensing pattern (rad).
    pub half_beamwidth: f64,
    /// Angular grid size used for beam synthesis.
    pub grid_size: usize,
    /// Explicit rounds-per-slot override; when absent the floor of
    /// `delta_t / (t_p + t_o)` is used.
    pub n_s_override: Option<f64>,
}

impl RadarTiming {
    pub fn round_duration(&self) -> f64 {
        self.t_p + self.t_o
    }

    pub fn computed_rounds(&self, delta_t: f64) -> f64 {
        (delta_t / self.round_duration()).floor()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverParams {
    pub tau1: f64,
    pub tau2: f64,
    pub eps_ao: f64,
    pub max_ao_iters: usize,
    pub binary_tol: f64,
    pub hover_tol: f64,
    pub big_m_scale: f64,
    pub conic_tol: f64,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            tau1: 1e5,
            tau2: 1e5,
            eps_ao: 1e-3,
            max_ao_iters: 50,
            binary_tol: 1e-3,
            hover_tol: 1.0,
            big_m_scale: 10.0,
            conic_tol: 1e-8,
            seed: 7,
        }
    }
}

/// Full problem instance. All quantities are linear SI values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub n_slots: usize,
    pub delta_t: f64,
    pub n_antennas: usize,
    pub altitude: f64,
    pub bs_height: f64,
    pub users: Vec<Vec2>,
    pub targets: Vec<Vec2>,
    pub bs_pos: Vec2,
    pub q_start: Vec2,
    pub q_final: Vec2,
    pub area_size: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub p_max: f64,
    pub r_min_rate: Vec<f64>,
    pub snr_th: Vec<f64>,
    /// Reference channel amplitude gain at 1 m.
    pub beta0: f64,
    pub sigma2_k: f64,
    pub sigma2_e: f64,
    pub sigma2_b: f64,
    pub sigma2_u: f64,
    pub rcs: Vec<f64>,
    pub eta: f64,
    pub p_static: f64,
    pub g_t: f64,
    pub p_bs: f64,
    pub iota: f64,
    pub n_s_max: usize,
    pub f_loc: f64,
    pub hw_const_a: f64,
    pub radar: RadarTiming,
    pub aero: AeroParams,
    pub solver: SolverParams,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl ScenarioConfig {
    pub fn k(&self) -> usize {
        self.users.len()
    }

    pub fn e(&self) -> usize {
        self.targets.len()
    }

    /// Sensing rounds per slot.
    pub fn n_s(&self) -> f64 {
        self.radar
            .n_s_override
            .unwrap_or_else(|| self.radar.computed_rounds(self.delta_t))
    }

    /// Pulse duty factor `N_s t_p / delta_t` that maps peak radar power to
    /// average radiated power.
    pub fn duty(&self) -> f64 {
        self.n_s() * self.radar.t_p / self.delta_t
    }

    /// Effective backhaul height `H - H_bs`.
    pub fn backhaul_height(&self) -> f64 {
        self.altitude - self.bs_height
    }

    pub fn beta0_sq(&self) -> f64 {
        self.beta0 * self.beta0
    }

    pub fn local_power(&self) -> f64 {
        crate::power::local_power(self.hw_const_a, self.f_loc)
    }

    pub fn production_rate(&self) -> f64 {
        let (r_min, r_max) = crate::sensing::sensing_ranges(self.radar.t_p, self.radar.t_o);
        crate::sensing::production_rate(
            self.n_s(),
            self.radar.n_b,
            (r_min, r_max),
            self.radar.delta_r,
            self.delta_t,
            self.radar.w_f,
        )
    }

    pub fn total_min_rate(&self) -> f64 {
        self.r_min_rate.iter().sum()
    }

    /// Diagonal of the square service area.
    pub fn area_diagonal(&self) -> f64 {
        let span = [self.q_start, self.q_final, self.bs_pos]
            .iter()
            .chain(self.users.iter())
            .chain(self.targets.iter())
            .fold(self.area_size, |acc, p| acc.max(p.x.abs()).max(p.y.abs()));
        span * 2f64.sqrt()
    }

    /// Checks every invariant; the error names the first violated one.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Validation(msg.to_string()));
        if self.n_slots < 1 {
            return fail("n_slots must be >= 1");
        }
        if self.n_antennas < 1 {
            return fail("n_antennas must be >= 1");
        }
        if self.solver.seed > i64::MAX as u64 {
            return fail("seed must fit in 63 bits");
        }
        if !(self.delta_t > 0.0) {
            return fail("delta_t must be > 0");
        }
        if !(self.altitude > 0.0) {
            return fail("altitude must be > 0");
        }
        if !(self.backhaul_height() > 0.0) {
            return fail("altitude must exceed bs_height");
        }
        if !(self.iota > 0.0 && self.iota < 1.0) {
            return fail("iota out of (0,1)");
        }
        if !(self.eta > 1.0) {
            return fail("eta must be > 1");
        }
        for (name, s) in [
            ("sigma2_k", self.sigma2_k),
            ("sigma2_e", self.sigma2_e),
            ("sigma2_b", self.sigma2_b),
            ("sigma2_u", self.sigma2_u),
        ] {
            if !(s > 0.0) {
                return Err(Error::Validation(format!("{name} must be > 0")));
            }
        }
        if !(self.v_max > 0.0) {
            return fail("v_max must be > 0");
        }
        if !(self.a_max > 0.0) {
            return fail("a_max must be > 0");
        }
        if !(self.p_max > 0.0) {
            return fail("p_max must be > 0");
        }
        if !(self.beta0 > 0.0) {
            return fail("beta0 must be > 0");
        }
        if self.r_min_rate.len() != self.k() {
            return fail("r_min_rate length must equal the number of users");
        }
        if self.r_min_rate.iter().any(|r| !(*r >= 0.0)) {
            return fail("r_min_rate must be >= 0");
        }
        if self.snr_th.len() != self.e() || self.rcs.len() != self.e() {
            return fail("snr_th and rcs lengths must equal the number of targets");
        }
        if self.snr_th.iter().any(|s| !(*s > 0.0)) {
            return fail("snr_th must be > 0");
        }
        if self.rcs.iter().any(|s| !(*s > 0.0)) {
            return fail("rcs must be > 0");
        }
        if !(self.radar.t_p > 0.0) {
            return fail("t_p must be > 0");
        }
        if !(self.radar.t_o > self.radar.t_p) {
            return fail("t_o must exceed t_p");
        }
        if self.radar.computed_rounds(self.delta_t) < 1.0 {
            return fail("delta_t shorter than one sensing round");
        }
        if let Some(n) = self.radar.n_s_override {
            if !(n >= 1.0) || n * self.radar.round_duration() > self.delta_t * (1.0 + 1e-2) {
                return fail("n_s override inconsistent with slot duration");
            }
        }
        if !(self.radar.half_beamwidth > 0.0 && self.radar.half_beamwidth <= PI / 2.0) {
            return fail("half_beamwidth out of (0, pi/2]");
        }
        if self.radar.grid_size < 3 {
            return fail("grid_size must be >= 3");
        }
        if !(self.radar.wavelength > 0.0 && self.radar.antenna_spacing > 0.0) {
            return fail("wavelength and antenna_spacing must be > 0");
        }
        if !(self.radar.n_b > 0.0 && self.radar.delta_r > 0.0 && self.radar.w_f > 0.0) {
            return fail("n_b, delta_r and w_f must be > 0");
        }
        if !(self.g_t > 0.0 && self.p_bs > 0.0) {
            return fail("g_t and p_bs must be > 0");
        }
        if !(self.p_static >= 0.0 && self.f_loc >= 0.0 && self.hw_const_a >= 0.0) {
            return fail("p_static, f_loc, hw_const_a must be >= 0");
        }
        if !(self.solver.tau1 > 0.0 && self.solver.tau2 > 0.0) {
            return fail("tau1 and tau2 must be > 0");
        }
        if !(self.solver.eps_ao > 0.0 && self.solver.eps_ao <= 1.0) {
            return fail("eps_ao out of (0,1]");
        }
        self.aero.validate()?;
        Ok(())
    }

    /// Table II / Table I constants with the documented defaults for the
    /// values they leave open.
    pub fn table2() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let area = 300.0;
        let mut place = |n: usize| -> Vec<Vec2> {
            (0..n)
                .map(|_| Vec2::new(rng.gen_range(0.0..area), rng.gen_range(0.0..area)))
                .collect()
        };
        let users = place(3);
        let targets = place(3);
        ScenarioConfig {
            n_slots: 70,
            delta_t: 1.0,
            n_antennas: 6,
            altitude: 100.0,
            bs_height: 10.0,
            users,
            targets,
            bs_pos: Vec2::new(200.0, 0.0),
            q_start: Vec2::new(0.0, 0.0),
            q_final: Vec2::new(300.0, 300.0),
            area_size: area,
            v_max: 15.0,
            a_max: 5.0,
            p_max: dbm_to_watts(40.0),
            r_min_rate: vec![1.0; 3],
            snr_th: vec![db_to_linear(5.0); 3],
            beta0: db_to_linear(-30.0),
            sigma2_k: dbm_to_watts(-110.0),
            sigma2_e: dbm_to_watts(-110.0),
            sigma2_b: dbm_to_watts(-110.0),
            sigma2_u: dbm_to_watts(-110.0),
            rcs: vec![0.1; 3],
            eta: 2.0,
            p_static: 0.3,
            g_t: db_to_linear(10.0),
            p_bs: dbm_to_watts(40.0),
            iota: 0.5,
            n_s_max: 5,
            f_loc: 3e9,
            hw_const_a: 1e-28,
            radar: RadarTiming {
                t_p: 0.6e-6,
                t_o: 2.26e-4,
                n_b: 4.0,
                delta_r: 15.0,
                w_f: 10e6,
                wavelength: 0.1,
                antenna_spacing: 0.05,
                half_beamwidth: PI / 12.0,
                grid_size: 181,
                n_s_override: Some(4400.0),
            },
            aero: AeroParams::table1(),
            solver: SolverParams::default(),
            warnings: Vec::new(),
        }
    }

    /// Small instance used for tests and the acceptance suite: K=2, E=2,
    /// N=20, M=4. Feasible with margin under the sensing pre-check. The
    /// users sit near the target route so a tour through every site fits
    /// the horizon, and the acceleration limit is relaxed to 10 m/s^2 so
    /// that the two mandatory hover stops do not dominate a 20-slot
    /// horizon.
    pub fn desk() -> Self {
        let base = Self::table2();
        ScenarioConfig {
            n_slots: 20,
            n_antennas: 4,
            altitude: 40.0,
            bs_height: 10.0,
            users: vec![Vec2::new(45.0, 35.0), Vec2::new(80.0, 45.0)],
            targets: vec![Vec2::new(25.0, 15.0), Vec2::new(60.0, 20.0)],
            bs_pos: Vec2::new(45.0, -20.0),
            q_start: Vec2::new(0.0, 0.0),
            q_final: Vec2::new(90.0, 40.0),
            area_size: 100.0,
            p_max: dbm_to_watts(43.0),
            r_min_rate: vec![1.0; 2],
            snr_th: vec![db_to_linear(5.0); 2],
            rcs: vec![0.1; 2],
            n_s_max: 3,
            a_max: 10.0,
            ..base
        }
    }

    /// Six-slot, one-user, one-target instance small enough for exhaustive
    /// schedule enumeration.
    pub fn desk_tiny() -> Self {
        let base = Self::desk();
        ScenarioConfig {
            n_slots: 6,
            users: vec![Vec2::new(12.0, 10.0)],
            targets: vec![Vec2::new(3.0, 2.0)],
            q_final: Vec2::new(16.0, 10.0),
            area_size: 20.0,
            r_min_rate: vec![1.0],
            snr_th: vec![db_to_linear(5.0)],
            rcs: vec![0.1],
            ..base
        }
    }
}

// ---------------------------------------------------------------------------
// File loading

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

impl ScalarOrList {
    fn expand(&self, n: usize, key: &str) -> Result<Vec<f64>> {
        match self {
            ScalarOrList::Scalar(x) => Ok(vec![*x; n]),
            ScalarOrList::List(v) if v.len() == n => Ok(v.clone()),
            ScalarOrList::List(v) => Err(Error::Validation(format!(
                "{key} has {} entries, expected {n}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRadar {
    t_p: Option<f64>,
    t_o: Option<f64>,
    n_b: Option<f64>,
    delta_r: Option<f64>,
    w_f: Option<f64>,
    wavelength: Option<f64>,
    antenna_spacing: Option<f64>,
    half_beamwidth: Option<f64>,
    grid_size: Option<usize>,
    n_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tau1: Option<f64>,
    tau2: Option<f64>,
    eps_ao: Option<f64>,
    max_ao_iters: Option<usize>,
    binary_tol: Option<f64>,
    hover_tol: Option<f64>,
    big_m_scale: Option<f64>,
    conic_tol: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAero {
    omega: Option<f64>,
    rotor_radius: Option<f64>,
    air_density: Option<f64>,
    solidity: Option<f64>,
    disc_area: Option<f64>,
    p_o: Option<f64>,
    p_i: Option<f64>,
    v0: Option<f64>,
    drag_ratio: Option<f64>,
    model_mode: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    n_slots: Option<usize>,
    delta_t: Option<f64>,
    n_antennas: Option<usize>,
    altitude: Option<f64>,
    bs_height: Option<f64>,
    users: Option<Vec<[f64; 2]>>,
    targets: Option<Vec<[f64; 2]>>,
    n_users: Option<usize>,
    n_targets: Option<usize>,
    bs_pos: Option<[f64; 2]>,
    q_start: Option<[f64; 2]>,
    q_final: Option<[f64; 2]>,
    area_size: Option<f64>,
    v_max: Option<f64>,
    a_max: Option<f64>,
    p_max: Option<f64>,
    p_max_dbm: Option<f64>,
    r_min_rate: Option<ScalarOrList>,
    snr_th: Option<ScalarOrList>,
    snr_th_db: Option<ScalarOrList>,
    beta0: Option<f64>,
    beta0_db: Option<f64>,
    noise_dbm: Option<f64>,
    sigma2_k: Option<f64>,
    sigma2_e: Option<f64>,
    sigma2_b: Option<f64>,
    sigma2_u: Option<f64>,
    sigma2_k_dbm: Option<f64>,
    sigma2_e_dbm: Option<f64>,
    sigma2_b_dbm: Option<f64>,
    sigma2_u_dbm: Option<f64>,
    rcs: Option<ScalarOrList>,
    rcs_dbsm: Option<ScalarOrList>,
    eta: Option<f64>,
    p_static: Option<f64>,
    g_t: Option<f64>,
    g_t_dbi: Option<f64>,
    p_bs: Option<f64>,
    p_bs_dbm: Option<f64>,
    iota: Option<f64>,
    n_s_max: Option<usize>,
    f_loc: Option<f64>,
    hw_const_a: Option<f64>,
    seed: Option<u64>,
    #[serde(default)]
    radar: RawRadar,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    aero: RawAero,
}

fn pick(linear: Option<f64>, log: Option<f64>, conv: fn(f64) -> f64, key: &str) -> Result<Option<f64>> {
    match (linear, log) {
        (Some(_), Some(_)) => Err(Error::Validation(format!(
            "{key} given in both linear and logarithmic form"
        ))),
        (Some(x), None) => Ok(Some(x)),
        (None, Some(x)) => Ok(Some(conv(x))),
        (None, None) => Ok(None),
    }
}

fn pick_list(
    linear: &Option<ScalarOrList>,
    log: &Option<ScalarOrList>,
    n: usize,
    key: &str,
) -> Result<Option<Vec<f64>>> {
    match (linear, log) {
        (Some(_), Some(_)) => Err(Error::Validation(format!(
            "{key} given in both linear and logarithmic form"
        ))),
        (Some(x), None) => Ok(Some(x.expand(n, key)?)),
        (None, Some(x)) => Ok(Some(x.expand(n, key)?.into_iter().map(db_to_linear).collect())),
        (None, None) => Ok(None),
    }
}

fn v2(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

/// Parses and validates a scenario from TOML text.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut cfg = match raw.preset.as_deref() {
        None | Some("table2") => ScenarioConfig::table2(),
        Some("desk") => ScenarioConfig::desk(),
        Some("desk_tiny") => ScenarioConfig::desk_tiny(),
        Some(other) => return Err(Error::Validation(format!("unknown preset {other}"))),
    };
    let mut warnings = Vec::new();

    macro_rules! set {
        ($field:ident) => {
            if let Some(x) = raw.$field {
                cfg.$field = x;
            }
        };
    }
    set!(n_slots);
    set!(delta_t);
    set!(n_antennas);
    set!(altitude);
    set!(bs_height);
    set!(area_size);
    set!(v_max);
    set!(a_max);
    set!(p_static);
    set!(iota);
    set!(n_s_max);
    set!(f_loc);
    set!(hw_const_a);
    if let Some(s) = raw.seed {
        cfg.solver.seed = s;
    }
    if let Some(p) = raw.bs_pos {
        cfg.bs_pos = v2(p);
    }
    if let Some(p) = raw.q_start {
        cfg.q_start = v2(p);
    }
    if let Some(p) = raw.q_final {
        cfg.q_final = v2(p);
    }
    if let Some(x) = pick(raw.p_max, raw.p_max_dbm, dbm_to_watts, "p_max")? {
        cfg.p_max = x;
    }
    if let Some(x) = pick(raw.g_t, raw.g_t_dbi, db_to_linear, "g_t")? {
        cfg.g_t = x;
    }
    if let Some(x) = pick(raw.p_bs, raw.p_bs_dbm, dbm_to_watts, "p_bs")? {
        cfg.p_bs = x;
    } else if raw.preset.is_none() {
        warnings.push("p_bs not given; default 40 dBm applied".to_string());
    }
    if let Some(x) = pick(raw.beta0, raw.beta0_db, db_to_linear, "beta0")? {
        cfg.beta0 = x;
    }
    if let Some(n) = raw.noise_dbm {
        let w = dbm_to_watts(n);
        cfg.sigma2_k = w;
        cfg.sigma2_e = w;
        cfg.sigma2_b = w;
        cfg.sigma2_u = w;
    }
    for (slot, linear, dbm, key) in [
        (&mut cfg.sigma2_k, raw.sigma2_k, raw.sigma2_k_dbm, "sigma2_k"),
        (&mut cfg.sigma2_e, raw.sigma2_e, raw.sigma2_e_dbm, "sigma2_e"),
        (&mut cfg.sigma2_b, raw.sigma2_b, raw.sigma2_b_dbm, "sigma2_b"),
        (&mut cfg.sigma2_u, raw.sigma2_u, raw.sigma2_u_dbm, "sigma2_u"),
    ] {
        if let Some(v) = pick(linear, dbm, dbm_to_watts, key)? {
            *slot = v;
        }
    }
    match raw.eta {
        Some(x) => cfg.eta = x,
        None if raw.preset.is_none() => {
            cfg.eta = 2.0;
            warnings.push("eta not given; default 2.0 applied".to_string());
        }
        None => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed);
    let area = cfg.area_size;
    let mut place = |n: usize| -> Vec<Vec2> {
        (0..n)
            .map(|_| Vec2::new(rng.gen_range(0.0..area), rng.gen_range(0.0..area)))
            .collect()
    };
    if let Some(u) = &raw.users {
        cfg.users = u.iter().copied().map(v2).collect();
    } else if let Some(n) = raw.n_users {
        cfg.users = place(n);
    }
    if let Some(t) = &raw.targets {
        cfg.targets = t.iter().copied().map(v2).collect();
    } else if let Some(n) = raw.n_targets {
        cfg.targets = place(n);
    }
    let (k, e) = (cfg.users.len(), cfg.targets.len());

    if let Some(r) = &raw.r_min_rate {
        cfg.r_min_rate = r.expand(k, "r_min_rate")?;
    } else if cfg.r_min_rate.len() != k {
        cfg.r_min_rate = vec![cfg.r_min_rate.first().copied().unwrap_or(1.0); k];
    }
    match pick_list(&raw.snr_th, &raw.snr_th_db, e, "snr_th")? {
        Some(v) => cfg.snr_th = v,
        None if cfg.snr_th.len() != e => {
            cfg.snr_th = vec![cfg.snr_th.first().copied().unwrap_or(db_to_linear(5.0)); e]
        }
        None => {}
    }
    match pick_list(&raw.rcs, &raw.rcs_dbsm, e, "rcs")? {
        Some(v) => cfg.rcs = v,
        None if cfg.rcs.len() != e => cfg.rcs = vec![cfg.rcs.first().copied().unwrap_or(0.1); e],
        None => {}
    }

    let r = &raw.radar;
    macro_rules! set_radar {
        ($src:ident, $dst:ident) => {
            if let Some(x) = r.$src {
                cfg.radar.$dst = x;
            }
        };
    }
    set_radar!(t_p, t_p);
    set_radar!(t_o, t_o);
    set_radar!(n_b, n_b);
    set_radar!(delta_r, delta_r);
    set_radar!(w_f, w_f);
    set_radar!(wavelength, wavelength);
    set_radar!(antenna_spacing, antenna_spacing);
    set_radar!(half_beamwidth, half_beamwidth);
    set_radar!(grid_size, grid_size);
    if r.n_s.is_some() || raw.preset.is_none() {
        cfg.radar.n_s_override = r.n_s;
    }

    let s = &raw.solver;
    macro_rules! set_solver {
        ($f:ident) => {
            if let Some(x) = s.$f {
                cfg.solver.$f = x;
            }
        };
    }
    set_solver!(tau1);
    set_solver!(tau2);
    set_solver!(eps_ao);
    set_solver!(max_ao_iters);
    set_solver!(binary_tol);
    set_solver!(hover_tol);
    set_solver!(big_m_scale);
    set_solver!(conic_tol);
    set_solver!(seed);

    let a = &raw.aero;
    macro_rules! set_aero {
        ($f:ident) => {
            if let Some(x) = a.$f {
                cfg.aero.$f = x;
            }
        };
    }
    set_aero!(omega);
    set_aero!(rotor_radius);
    set_aero!(air_density);
    set_aero!(solidity);
    set_aero!(disc_area);
    set_aero!(p_o);
    set_aero!(p_i);
    set_aero!(v0);
    set_aero!(drag_ratio);
    if let Some(m) = &a.model_mode {
        cfg.aero.model_mode = match m.as_str() {
            "standard" => FlightModel::Standard,
            "paper_literal" => FlightModel::PaperLiteral,
            other => return Err(Error::Validation(format!("unknown model_mode {other}"))),
        };
    }

    if let Some(n) = cfg.radar.n_s_override {
        let computed = cfg.radar.computed_rounds(cfg.delta_t);
        let rel = (computed - n).abs() / n;
        if rel > 0.0 {
            warnings.push(format!(
                "n_s = {n} supplied, floor(delta_t/T_s) = {computed}; relative mismatch {rel:.4}"
            ));
        }
    }

    cfg.warnings = warnings;
    for w in &cfg.warnings {
        log::warn!("{w}");
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    parse_scenario(&text)
}

/// Writes a scenario as TOML that [`parse_scenario`] reads back to the same
/// values (every field explicit, linear units, no preset).
pub fn scenario_to_toml(cfg: &ScenarioConfig) -> String {
    use toml::{Table, Value};
    fn pts(v: &[Vec2]) -> Value {
        Value::Array(v.iter().map(|p| pt(p)).collect())
    }
    fn pt(p: &Vec2) -> Value {
        Value::Array(vec![Value::Float(p.x), Value::Float(p.y)])
    }
    fn list(v: &[f64]) -> Value {
        Value::Array(v.iter().map(|x| Value::Float(*x)).collect())
    }
    let int = |n: usize| Value::Integer(n as i64);
    let mut t = Table::new();
    let mut put = |k: &str, v: Value| {
        t.insert(k.to_string(), v);
    };
    put("n_slots", int(cfg.n_slots));
    put("delta_t", Value::Float(cfg.delta_t));
    put("n_antennas", int(cfg.n_antennas));
    put("altitude", Value::Float(cfg.altitude));
    put("bs_height", Value::Float(cfg.bs_height));
    put("users", pts(&cfg.users));
    put("targets", pts(&cfg.targets));
    put("bs_pos", pt(&cfg.bs_pos));
    put("q_start", pt(&cfg.q_start));
    put("q_final", pt(&cfg.q_final));
    put("area_size", Value::Float(cfg.area_size));
    put("v_max", Value::Float(cfg.v_max));
    put("a_max", Value::Float(cfg.a_max));
    put("p_max", Value::Float(cfg.p_max));
    put("r_min_rate", list(&cfg.r_min_rate));
    put("snr_th", list(&cfg.snr_th));
    put("beta0", Value::Float(cfg.beta0));
    put("sigma2_k", Value::Float(cfg.sigma2_k));
    put("sigma2_e", Value::Float(cfg.sigma2_e));
    put("sigma2_b", Value::Float(cfg.sigma2_b));
    put("sigma2_u", Value::Float(cfg.sigma2_u));
    put("rcs", list(&cfg.rcs));
    put("eta", Value::Float(cfg.eta));
    put("p_static", Value::Float(cfg.p_static));
    put("g_t", Value::Float(cfg.g_t));
    put("p_bs", Value::Float(cfg.p_bs));
    put("iota", Value::Float(cfg.iota));
    put("n_s_max", int(cfg.n_s_max));
    put("f_loc", Value::Float(cfg.f_loc));
    put("hw_const_a", Value::Float(cfg.hw_const_a));

    let r = &cfg.radar;
    let mut radar = Table::new();
    for (k, v) in [
        ("t_p", r.t_p),
        ("t_o", r.t_o),
        ("n_b", r.n_b),
        ("delta_r", r.delta_r),
        ("w_f", r.w_f),
        ("wavelength", r.wavelength),
        ("antenna_spacing", r.antenna_spacing),
        ("half_beamwidth", r.half_beamwidth),
    ] {
        radar.insert(k.into(), Value::Float(v));
    }
    radar.insert("grid_size".into(), int(r.grid_size));
    if let Some(n) = r.n_s_override {
        radar.insert("n_s".into(), Value::Float(n));
    }
    put("radar", Value::Table(radar));

    let s = &cfg.solver;
    let mut solver = Table::new();
    for (k, v) in [
        ("tau1", s.tau1),
        ("tau2", s.tau2),
        ("eps_ao", s.eps_ao),
        ("binary_tol", s.binary_tol),
        ("hover_tol", s.hover_tol),
        ("big_m_scale", s.big_m_scale),
        ("conic_tol", s.conic_tol),
    ] {
        solver.insert(k.into(), Value::Float(v));
    }
    solver.insert("max_ao_iters".into(), int(s.max_ao_iters));
    solver.insert("seed".into(), Value::Integer(s.seed as i64));
    put("solver", Value::Table(solver));

    let a = &cfg.aero;
    let mut aero = Table::new();
    for (k, v) in [
        ("omega", a.omega),
        ("rotor_radius", a.rotor_radius),
        ("air_density", a.air_density),
        ("solidity", a.solidity),
        ("disc_area", a.disc_area),
        ("p_o", a.p_o),
        ("p_i", a.p_i),
        ("v0", a.v0),
        ("drag_ratio", a.drag_ratio),
    ] {
        aero.insert(k.into(), Value::Float(v));
    }
    let mode = match a.model_mode {
        FlightModel::Standard => "standard",
        FlightModel::PaperLiteral => "paper_literal",
    };
    aero.insert("model_mode".into(), Value::String(mode.into()));
    put("aero", Value::Table(aero));
    t.to_string()
}

/// Scenario quantities a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Sensing SNR threshold of every target, in dB.
    SnrThDb,
    /// Number of antennas.
    Antennas,
    /// x coordinate of the base station (m).
    BsPosX,
    /// Quantization bits of the radar samples.
    Bits,
    /// Radar cross-section of every target (m^2).
    Rcs,
    /// Minimum average rate of every user (bit/s/Hz).
    MinRate,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::SnrThDb,
        SweepParam::Antennas,
        SweepParam::BsPosX,
        SweepParam::Bits,
        SweepParam::Rcs,
        SweepParam::MinRate,
    ];

    /// Canonical key as used on the command line.
    pub fn key(self) -> &'static str {
        match self {
            SweepParam::SnrThDb => "SNR_th",
            SweepParam::Antennas => "M",
            SweepParam::BsPosX => "bs_pos_x",
            SweepParam::Bits => "N_b",
            SweepParam::Rcs => "rcs",
            SweepParam::MinRate => "R_min_rate",
        }
    }

    /// Case-insensitive lookup of a key.
    pub fn parse(key: &str) -> Result<Self> {
        let k = key.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|p| p.key().to_ascii_lowercase() == k)
            .ok_or_else(|| {
                let keys: Vec<_> = Self::ALL.iter().map(|p| p.key()).collect();
                Error::Validation(format!("unknown sweep parameter {key:?}; expected one of {}", keys.join(", ")))
            })
    }

    /// Copy of `cfg` with the parameter set to `value`, validated.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = cfg.clone();
        match self {
            SweepParam::SnrThDb => c.snr_th = vec![db_to_linear(value); c.e()],
            SweepParam::Antennas => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Validation(format!("antenna count must be a positive integer, got {value}")));
                }
                c.n_antennas = value as usize;
            }
            SweepParam::BsPosX => c.bs_pos.x = value,
            SweepParam::Bits => c.radar.n_b = value,
            SweepParam::Rcs => c.rcs = vec![value; c.e()],
            SweepParam::MinRate => c.r_min_rate = vec![value; c.k()],
        }
        c.validate()?;
        Ok(c)
    }
}

// ---------------------------------------------------------------------------
// Propagation primitives

/// Angle of departure from zenith: `arccos(H / sqrt(|q-d|^2 + H^2))`.
pub fn aod_angle(q: &Vec2, d: &Vec2, h: f64) -> f64 {
    let dist = ((q - d).norm_squared() + h * h).sqrt();
    (h / dist).min(1.0).acos()
}

/// ULA response for a direction with `cos(theta) = cos_theta`.
pub fn steering_from_cos(cos_theta: f64, m: usize, spacing: f64, wavelength: f64) -> CVector {
    let k = 2.0 * PI * spacing / wavelength * cos_theta;
    DVector::from_iterator(
        m,
        (0..m).map(|i| {
            if i == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, k * i as f64)
            }
        }),
    )
}

pub fn steering_vector(q: &Vec2, d: &Vec2, h: f64, m: usize, spacing: f64, wavelength: f64) -> CVector {
    let dist = ((q - d).norm_squared() + h * h).sqrt();
    steering_from_cos(h / dist, m, spacing, wavelength)
}

/// Free-space LoS channel `beta0 a(q, d) / dist`.
pub fn user_channel(
    q: &Vec2,
    d: &Vec2,
    h: f64,
    m: usize,
    spacing: f64,
    wavelength: f64,
    beta0: f64,
) -> CVector {
    let dist = ((q - d).norm_squared() + h * h).sqrt();
    steering_vector(q, d, h, m, spacing, wavelength) * Complex64::new(beta0 / dist, 0.0)
}

/// Amplitude gain of the UAV-BS link, `sqrt(beta0^2 G_T) / dist`.
pub fn backhaul_gain(q: &Vec2, bs: &Vec2, h_b: f64, beta0: f64, g_t: f64) -> f64 {
    (beta0 * beta0 * g_t).sqrt() / ((q - bs).norm_squared() + h_b * h_b).sqrt()
}

impl ScenarioConfig {
    pub fn steering(&self, q: &Vec2, d: &Vec2) -> CVector {
        steering_vector(
            q,
            d,
            self.altitude,
            self.n_antennas,
            self.radar.antenna_spacing,
            self.radar.wavelength,
        )
    }

    pub fn channel(&self, q: &Vec2, k: usize) -> CVector {
        user_channel(
            q,
            &self.users[k],
            self.altitude,
            self.n_antennas,
            self.radar.antenna_spacing,
            self.radar.wavelength,
            self.beta0,
        )
    }

    /// Squared 3-D distance from the UAV at `q` to ground point `d`.
    pub fn dist_sq(&self, q: &Vec2, d: &Vec2) -> f64 {
        (q - d).norm_squared() + self.altitude * self.altitude
    }

    pub fn backhaul_gain(&self, q: &Vec2) -> f64 {
        backhaul_gain(q, &self.bs_pos, self.backhaul_height(), self.beta0, self.g_t)
    }
}
