//! Starting points: piecewise-straight paths through a list of waypoints with
//! hover slots inserted above the targets.

use crate::ao::precheck::feasibility_precheck;
use crate::beampattern::SensingBeam;
use crate::error::{Error, Result};
use crate::power::min_power_speed;
use crate::scenario::{ScenarioConfig, Vec2};
use crate::state::{SensingSchedule, Trajectory};

/// An intermediate stop of the path. Targets carry a hover count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub pos: Vec2,
    pub target: Option<usize>,
    pub hover: usize,
}

#[derive(Debug, Clone)]
pub struct InitialPoint {
    pub trajectory: Trajectory,
    pub schedule: SensingSchedule,
    /// Straight segment each slot's start position lies on (degenerate for
    /// hover slots).
    pub segments: Vec<(Vec2, Vec2)>,
}

/// Hover slots to reserve per target: the fewest that carry the radiated
/// energy at hover with a 5 % allowance, at least one when the threshold is
/// positive and at most `N_s_max`.
pub fn hover_counts(cfg: &ScenarioConfig, beam: &SensingBeam) -> Vec<usize> {
    let report = feasibility_precheck(cfg, beam);
    report
        .targets
        .iter()
        .map(|t| {
            if t.required == 0.0 {
                return 0;
            }
            let per_slot = (cfg.p_max - t.offload_power).max(f64::MIN_POSITIVE);
            let slots = (1.05 * t.required / per_slot).ceil() as usize;
            slots.clamp(1, cfg.n_s_max.max(1))
        })
        .collect()
}

/// Hover waypoints over every target, visited in nearest-neighbour order
/// from the start.
pub fn target_waypoints(cfg: &ScenarioConfig, beam: &SensingBeam) -> Vec<Waypoint> {
    let hover = hover_counts(cfg, beam);
    nearest_neighbor_order(&cfg.q_start, &cfg.targets)
        .into_iter()
        .map(|e| Waypoint { pos: cfg.targets[e], target: Some(e), hover: hover[e] })
        .collect()
}

/// Default initialization: start, the targets (nearest-neighbour order),
/// final, cruising near the minimum-power speed where time allows.
pub fn initialize(cfg: &ScenarioConfig, beam: &SensingBeam) -> Result<InitialPoint> {
    let wps = target_waypoints(cfg, beam);
    loiter_path(cfg, &wps, min_power_speed(&cfg.aero, cfg.v_max)).or_else(|_| initialize_path(cfg, &wps))
}

/// Greedy nearest-neighbour visiting order over `sites` starting at `start`.
pub fn nearest_neighbor_order(start: &Vec2, sites: &[Vec2]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..sites.len()).collect();
    let mut order = Vec::with_capacity(sites.len());
    let mut here = *start;
    while !left.is_empty() {
        let (pos, _) = left
            .iter()
            .enumerate()
            .map(|(i, s)| (i, (sites[*s] - here).norm()))
            .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        let s = left.remove(pos);
        here = sites[s];
        order.push(s);
    }
    order
}

fn stops(cfg: &ScenarioConfig, waypoints: &[Waypoint]) -> Vec<Vec2> {
    let mut pts = vec![cfg.q_start];
    pts.extend(waypoints.iter().map(|w| w.pos));
    pts.push(cfg.q_final);
    pts
}

/// Fraction of the acceleration limit used by speed ramps.
const RAMP: f64 = 0.98;
/// Speed (in units of `a_max dt`) at which a leg arrives at or leaves a
/// hover stop.
const STOP_SPEED: f64 = 0.441;

/// Speeds of a leg flown in `k` slots with cruise speed `c`, ramping from
/// the entry speed and down to the exit speed at just under the
/// acceleration limit.
fn leg_speeds(k: usize, c: f64, ends: (f64, f64), a_dt: f64) -> Vec<f64> {
    (0..k)
        .map(|j| {
            let up = ends.0 + RAMP * a_dt * j as f64;
            let down = ends.1 + RAMP * a_dt * (k - 1 - j) as f64;
            c.min(up).min(down)
        })
        .collect()
}

fn leg_length(k: usize, c: f64, ends: (f64, f64), cfg: &ScenarioConfig) -> f64 {
    leg_speeds(k, c, ends, cfg.a_max * cfg.delta_t).iter().sum::<f64>() * cfg.delta_t
}

fn min_leg_slots(dist: f64, ends: (f64, f64), cfg: &ScenarioConfig) -> usize {
    if dist <= 0.0 {
        return 0;
    }
    let mut k = 1;
    while leg_length(k, cfg.v_max, ends, cfg) < dist {
        k += 1;
        if k > 100 * cfg.n_slots.max(1) {
            break;
        }
    }
    k
}

/// Cruise speed that covers `dist` in `k` slots (bisection).
fn cruise_speed(k: usize, dist: f64, ends: (f64, f64), cfg: &ScenarioConfig) -> f64 {
    if dist <= 0.0 || k == 0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, cfg.v_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if leg_length(k, mid, ends, cfg) < dist {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Largest `|v_{n+1} - v_n|` over consecutive slots.
fn worst_accel(v: &[Vec2]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max)
}

/// Point at arc length `s` along the circular arc from `(0,0)` to `(c,0)`
/// with central angle `phi`, bulging to `side` (+1 left, -1 right).
fn arc_point(c: f64, phi: f64, s: f64, side: f64) -> (f64, f64) {
    let r = c / (2.0 * (0.5 * phi).sin());
    let (cx, cy) = (0.5 * c, -r * (0.5 * phi).cos());
    let th = std::f64::consts::FRAC_PI_2 + 0.5 * phi - s / r;
    (cx + r * th.cos(), side * (cy + r * th.sin()))
}

/// Central angle whose arc is `ratio` times its chord (`ratio >= 1`),
/// capped below a full circle.
fn arc_angle(ratio: f64) -> f64 {
    let f = |phi: f64| 0.5 * phi / (0.5 * phi).sin();
    let cap = 1.8 * std::f64::consts::PI;
    if ratio >= f(cap) {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// How a leg between two consecutive stops is shaped.
#[derive(Debug, Clone, Copy)]
struct LegPlan {
    k: usize,
    ends: (f64, f64),
    cruise: f64,
    /// Bulge side of a loitering arc; 0 flies straight.
    side: f64,
}

/// Slot velocities of one leg from `a` to `b`. Straight legs are scaled to
/// land exactly on `b`; longer-than-chord profiles follow a circular arc.
fn leg_velocities(a: Vec2, b: Vec2, plan: &LegPlan, cfg: &ScenarioConfig) -> Vec<Vec2> {
    let dist = (b - a).norm();
    let mut speeds = leg_speeds(plan.k, plan.cruise, plan.ends, cfg.a_max * cfg.delta_t);
    let total: f64 = speeds.iter().sum::<f64>() * cfg.delta_t;
    let (along, across) = if dist > 0.0 {
        let u = (b - a) / dist;
        (u, Vec2::new(-u.y, u.x))
    } else {
        (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0))
    };
    let mut pts = Vec::with_capacity(plan.k + 1);
    if plan.side == 0.0 || total <= dist * (1.0 + 1e-9) || dist <= 0.0 {
        // absorb the bisection residue so the leg lands on its endpoint
        if total > 0.0 {
            let s = dist / total;
            speeds.iter_mut().for_each(|u| *u *= s);
        }
        let mut cum = 0.0;
        pts.push(a);
        for u in &speeds {
            cum += u * cfg.delta_t;
            pts.push(a + along * cum);
        }
    } else {
        let phi = arc_angle(total / dist);
        let r = dist / (2.0 * (0.5 * phi).sin());
        let scale = phi * r / total;
        let mut cum = 0.0;
        pts.push(a);
        for u in &speeds {
            cum += u * cfg.delta_t * scale;
            let (x, y) = arc_point(dist, phi, cum, plan.side);
            pts.push(a + along * x + across * y);
        }
    }
    *pts.last_mut().unwrap() = b;
    pts.windows(2).map(|w| (w[1] - w[0]) / cfg.delta_t).collect()
}

/// Entry and exit speeds of every leg: free at the two ends of the horizon,
/// low at hover stops, and limited by the turn angle at pass-through
/// waypoints so the heading change respects the acceleration limit.
fn leg_ends(cfg: &ScenarioConfig, pts: &[Vec2], waypoints: &[Waypoint], corner_scale: f64) -> Vec<(f64, f64)> {
    let a_dt = cfg.a_max * cfg.delta_t;
    let stop = STOP_SPEED * a_dt;
    let junction = |i: usize| -> f64 {
        // speed allowed through pts[i] (an interior waypoint)
        let w = &waypoints[i - 1];
        if w.hover > 0 {
            return stop;
        }
        let (d1, d2) = (pts[i] - pts[i - 1], pts[i + 1] - pts[i]);
        if d1.norm() == 0.0 || d2.norm() == 0.0 {
            return stop;
        }
        let cos = (d1.dot(&d2) / (d1.norm() * d2.norm())).clamp(-1.0, 1.0);
        let half_sin = ((1.0 - cos) / 2.0).sqrt();
        let e = if half_sin > 0.0 { 0.5 * RAMP * a_dt / half_sin } else { cfg.v_max };
        (e * corner_scale).clamp(stop, cfg.v_max)
    };
    let legs = pts.len() - 1;
    (0..legs)
        .map(|i| {
            let e_in = if i == 0 { cfg.v_max } else { junction(i) };
            let e_out = if i + 1 == legs { cfg.v_max } else { junction(i + 1) };
            (e_in, e_out)
        })
        .collect()
}

/// Plan of one leg of `k` slots: straight at the lowest sufficient cruise
/// speed, or (when `loiter` is given) cruising closer to `loiter` along an
/// arc bulging towards `towards`. `free` marks leg ends whose speed is not
/// bounded by a neighbouring stop.
fn leg_plan(
    cfg: &ScenarioConfig,
    (a, b): (Vec2, Vec2),
    k: usize,
    ends: (f64, f64),
    free: (bool, bool),
    loiter: Option<f64>,
    towards: Option<Vec2>,
) -> LegPlan {
    let a_dt = cfg.a_max * cfg.delta_t;
    let base = cruise_speed(k, (b - a).norm(), ends, cfg);
    let straight = LegPlan { k, ends, cruise: base, side: 0.0 };
    let Some(target) = loiter else { return straight };
    let side = match towards {
        Some(c) => {
            let d = b - a;
            let rel = c - a;
            if d.x * rel.y - d.y * rel.x >= 0.0 { 1.0 } else { -1.0 }
        }
        None => 1.0,
    };
    let fits = |c: f64| {
        let p = LegPlan { k, ends, cruise: c, side };
        let vel = leg_velocities(a, b, &p, cfg);
        let first_ok = free.0 || vel[0].norm() <= ends.0 * (1.0 + 1e-9) + 1e-12;
        let last_ok = free.1 || vel[k - 1].norm() <= ends.1 * (1.0 + 1e-9) + 1e-12;
        first_ok && last_ok && worst_accel(&vel) <= a_dt * (1.0 - 1e-9)
    };
    let top = target.clamp(base, cfg.v_max);
    if top <= base {
        return straight;
    }
    let chosen = if fits(top) {
        top
    } else {
        let (mut lo, mut hi) = (base, top);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if chosen > base && fits(chosen) {
        LegPlan { k, ends, cruise: chosen, side }
    } else {
        straight
    }
}

fn user_centroid(cfg: &ScenarioConfig) -> Option<Vec2> {
    if cfg.users.is_empty() {
        None
    } else {
        Some(cfg.users.iter().fold(Vec2::zeros(), |s, u| s + u) / cfg.users.len() as f64)
    }
}

/// Path through `waypoints` flown with acceleration-limited speed profiles
/// along straight legs. Hover stops are approached at low speed,
/// pass-through waypoints at the fastest speed the turn allows, and spare
/// slots go to whichever leg currently needs the highest cruise speed.
pub fn initialize_path(cfg: &ScenarioConfig, waypoints: &[Waypoint]) -> Result<InitialPoint> {
    build_path(cfg, waypoints, None)
}

/// Like [`initialize_path`] over the given waypoints, but each leg cruises
/// near `cruise` and spends surplus length on a gentle arc instead of
/// slowing down. Falls back to straight legs when no arc fits the
/// acceleration limit.
pub fn loiter_path(cfg: &ScenarioConfig, waypoints: &[Waypoint], cruise: f64) -> Result<InitialPoint> {
    build_path(cfg, waypoints, Some(cruise))
}

fn build_path(cfg: &ScenarioConfig, waypoints: &[Waypoint], cruise: Option<f64>) -> Result<InitialPoint> {
    let a_dt = cfg.a_max * cfg.delta_t;
    let mut corner_scale = 1.0;
    loop {
        let ends = leg_ends(cfg, &stops(cfg, waypoints), waypoints, corner_scale);
        let p = assemble(cfg, waypoints, &ends, cruise)?;
        if worst_accel(&p.trajectory.v) <= a_dt * (1.0 - 1e-9) {
            return Ok(p);
        }
        if ends.iter().skip(1).all(|e| e.0 <= STOP_SPEED * a_dt * (1.0 + 1e-12)) {
            // every junction is already a stop; cannot happen for straight legs
            return Err(Error::Path("no acceleration-feasible speed profile found".into()));
        }
        corner_scale *= 0.7;
    }
}

fn assemble(cfg: &ScenarioConfig, waypoints: &[Waypoint], ends: &[(f64, f64)], cruise: Option<f64>) -> Result<InitialPoint> {
    let pts = stops(cfg, waypoints);
    let legs = pts.len() - 1;
    let dists: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let hover_total: usize = waypoints.iter().map(|w| w.hover).sum();
    let mut slots: Vec<usize> = (0..legs).map(|i| min_leg_slots(dists[i], ends[i], cfg)).collect();
    let needed = hover_total + slots.iter().sum::<usize>();
    if needed > cfg.n_slots {
        return Err(Error::Path(format!(
            "path of {:.1} m with {hover_total} hover slots needs {needed} slots at v_max = {} m/s, \
             horizon has {} (deficit {} slots)",
            dists.iter().sum::<f64>(),
            cfg.v_max,
            cfg.n_slots,
            needed - cfg.n_slots
        )));
    }
    for _ in 0..cfg.n_slots - needed {
        let speeds: Vec<f64> = (0..legs).map(|i| cruise_speed(slots[i], dists[i], ends[i], cfg)).collect();
        let best = (0..legs)
            .rev()
            .fold(legs - 1, |b, i| if speeds[i] > speeds[b] { i } else { b });
        slots[best] += 1;
    }

    // loitering arcs bulge towards the users, which helps the downlink
    let centroid = user_centroid(cfg);

    let n = cfg.n_slots;
    let mut q = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n);
    let mut segments = Vec::with_capacity(n);
    let mut schedule = SensingSchedule::zeros(cfg.e(), n);
    q.push(pts[0]);
    for i in 0..legs {
        let (a, b) = (pts[i], pts[i + 1]);
        let k = slots[i];
        if k > 0 {
            let plan = leg_plan(cfg, (a, b), k, ends[i], (i == 0, i + 1 == legs), cruise, centroid);
            for vel in leg_velocities(a, b, &plan, cfg) {
                let start = *q.last().unwrap();
                segments.push(if plan.side == 0.0 { (a, b) } else { (start, start + vel * cfg.delta_t) });
                v.push(vel);
                q.push(start + vel * cfg.delta_t);
            }
            *q.last_mut().unwrap() = b;
        }
        if i < waypoints.len() {
            let w = &waypoints[i];
            for _ in 0..w.hover {
                let n_now = v.len();
                if let Some(e) = w.target {
                    schedule.alpha[e][n_now] = 1.0;
                }
                segments.push((b, b));
                v.push(Vec2::zeros());
                q.push(b);
            }
        }
    }
    debug_assert_eq!(v.len(), n);
    *q.last_mut().unwrap() = cfg.q_final;
    Ok(InitialPoint { trajectory: Trajectory { q, v }, schedule, segments })
}

/// Path for a prescribed single-target schedule: fly to target `e` in time
/// for the first sensing slot, stay over it until the last one, then fly on
/// to the final position. Legs are straight, or loiter near the `loiter`
/// cruise speed as in [`loiter_path`]. Fails when a leg cannot be flown in
/// the slots the schedule leaves for it.
pub fn hover_pattern_path(
    cfg: &ScenarioConfig,
    e: usize,
    hover_slots: &[usize],
    loiter: Option<f64>,
) -> Result<InitialPoint> {
    let n = cfg.n_slots;
    let mut slots = hover_slots.to_vec();
    slots.sort_unstable();
    slots.dedup();
    if e >= cfg.e() || slots.iter().any(|s| *s >= n) {
        return Err(Error::Validation("hover pattern refers to a missing target or slot".into()));
    }
    let a_dt = cfg.a_max * cfg.delta_t;
    let stop = STOP_SPEED * a_dt;
    let mut schedule = SensingSchedule::zeros(cfg.e(), n);
    for s in &slots {
        schedule.alpha[e][*s] = 1.0;
    }
    let centroid = user_centroid(cfg);
    let leg = |a: Vec2, b: Vec2, k: usize, ends: (f64, f64), free: (bool, bool)| -> Result<Vec<Vec2>> {
        let dist = (b - a).norm();
        if k == 0 {
            return if dist == 0.0 {
                Ok(Vec::new())
            } else {
                Err(Error::Path(format!("a {dist:.1} m leg has no slots")))
            };
        }
        if k < min_leg_slots(dist, ends, cfg) {
            return Err(Error::Path(format!("a {dist:.1} m leg does not fit in {k} slots")));
        }
        let plan = leg_plan(cfg, (a, b), k, ends, free, loiter, centroid);
        Ok(leg_velocities(a, b, &plan, cfg))
    };
    let mut v = Vec::with_capacity(n);
    match (slots.first(), slots.last()) {
        (Some(&first), Some(&last)) => {
            let target = cfg.targets[e];
            v.extend(leg(cfg.q_start, target, first, (cfg.v_max, stop), (true, false))?);
            v.extend(std::iter::repeat(Vec2::zeros()).take(last + 1 - first));
            v.extend(leg(target, cfg.q_final, n - 1 - last, (stop, cfg.v_max), (false, true))?);
        }
        _ => v.extend(leg(cfg.q_start, cfg.q_final, n, (cfg.v_max, cfg.v_max), (true, true))?),
    }
    if worst_accel(&v) > a_dt * (1.0 - 1e-9) {
        return Err(Error::Path("hover pattern breaks the acceleration limit".into()));
    }
    let mut q = Vec::with_capacity(n + 1);
    q.push(cfg.q_start);
    for vel in &v {
        let last = *q.last().unwrap();
        q.push(last + vel * cfg.delta_t);
    }
    *q.last_mut().unwrap() = cfg.q_final;
    let segments = q.windows(2).map(|w| (w[0], w[1])).collect();
    Ok(InitialPoint { trajectory: Trajectory { q, v }, schedule, segments })
}

/// Path through `waypoints` where every non-hover slot moves at exactly
/// `speed`; surplus length is burnt by a symmetric zigzag on each leg.
pub fn fixed_speed_path(cfg: &ScenarioConfig, waypoints: &[Waypoint], speed: f64) -> Result<InitialPoint> {
    if !(speed > 0.0) || speed > cfg.v_max {
        return Err(Error::Validation(format!("fixed speed {speed} m/s must lie in (0, v_max = {}]", cfg.v_max)));
    }
    let pts = stops(cfg, waypoints);
    let legs = pts.len() - 1;
    let step = speed * cfg.delta_t;
    let dists: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let hover_total: usize = waypoints.iter().map(|w| w.hover).sum();
    // one step must match the leg exactly; otherwise at least two steps
    let mut slots: Vec<usize> = dists
        .iter()
        .map(|d| {
            if *d <= 0.0 {
                0
            } else if (d - step).abs() <= 1e-12 * step {
                1
            } else {
                ((d / step).ceil() as usize).max(2)
            }
        })
        .collect();
    let needed = hover_total + slots.iter().sum::<usize>();
    if needed > cfg.n_slots {
        return Err(Error::Path(format!(
            "fixed-speed path needs {needed} slots at {speed} m/s, horizon has {} (deficit {} slots)",
            cfg.n_slots,
            needed - cfg.n_slots
        )));
    }
    let mut spare = cfg.n_slots - needed;
    // spare slots: lengthen the longest leg (a single spare on a zero leg is
    // impossible with equal steps, so pair them up there)
    let longest = (0..legs).fold(legs - 1, |b, i| if dists[i] > dists[b] { i } else { b });
    if spare > 0 && (dists[longest] > 0.0 || spare >= 2) {
        slots[longest] += spare;
        spare = 0;
    }
    if spare > 0 {
        return Err(Error::Path(format!(
            "cannot spend {spare} spare slot(s) at constant speed {speed} m/s without moving"
        )));
    }

    let n = cfg.n_slots;
    let mut q = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n);
    let mut segments = Vec::with_capacity(n);
    let mut schedule = SensingSchedule::zeros(cfg.e(), n);
    q.push(pts[0]);
    for i in 0..legs {
        let (a, b) = (pts[i], pts[i + 1]);
        let k = slots[i];
        if k > 0 {
            let (along, across) = if dists[i] > 0.0 {
                let u = (b - a) / dists[i];
                (u, Vec2::new(-u.y, u.x))
            } else {
                (Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0))
            };
            let steps = equal_steps(k, dists[i], step);
            for (j, (dx, dy)) in steps.iter().enumerate() {
                let start = *q.last().unwrap();
                let next = if j + 1 == k { b } else { start + along * *dx + across * *dy };
                segments.push((a, b));
                v.push((next - start) / cfg.delta_t);
                q.push(next);
            }
        }
        if i < waypoints.len() {
            let w = &waypoints[i];
            for _ in 0..w.hover {
                let n_now = v.len();
                if let Some(e) = w.target {
                    schedule.alpha[e][n_now] = 1.0;
                }
                segments.push((b, b));
                v.push(Vec2::zeros());
                q.push(b);
            }
        }
    }
    *q.last_mut().unwrap() = cfg.q_final;
    Ok(InitialPoint { trajectory: Trajectory { q, v }, schedule, segments })
}

/// `k` steps of length `step` (in leg coordinates) whose sum is `(dist, 0)`.
fn equal_steps(k: usize, dist: f64, step: f64) -> Vec<(f64, f64)> {
    if k == 1 {
        return vec![(dist, 0.0)];
    }
    if k % 2 == 0 {
        let c = (dist / (k as f64 * step)).clamp(-1.0, 1.0);
        let s = (1.0 - c * c).sqrt();
        (0..k).map(|j| (step * c, if j % 2 == 0 { step * s } else { -step * s })).collect()
    } else {
        // one straight step plus (k-1)/2 symmetric pairs
        let c = ((dist - step) / ((k - 1) as f64 * step)).clamp(-1.0, 1.0);
        let s = (1.0 - c * c).sqrt();
        let mut out = vec![(step, 0.0)];
        out.extend((0..k - 1).map(|j| (step * c, if j % 2 == 0 { step * s } else { -step * s })));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beampattern::scenario_beam;

    fn check_kinematics(cfg: &ScenarioConfig, p: &InitialPoint, accel: bool) {
        let t = &p.trajectory;
        let n = cfg.n_slots;
        assert_eq!(t.q.len(), n + 1);
        assert_eq!(t.v.len(), n);
        assert!((t.q[0] - cfg.q_start).norm() < 1e-12);
        assert!((t.q[n] - cfg.q_final).norm() < 1e-9);
        for i in 0..n {
            let gate = 1.0 - p.schedule.slot_sum(i);
            let step = t.q[i + 1] - t.q[i] - t.v[i] * (gate * cfg.delta_t);
            assert!(step.norm() < 1e-9, "C8 at {i}: {}", step.norm());
            assert!(t.v[i].norm() <= gate * cfg.v_max + 1e-9, "C10 at {i}");
            if accel && i + 1 < n {
                assert!((t.v[i + 1] - t.v[i]).norm() <= cfg.a_max * cfg.delta_t * (1.0 + 1e-9), "C9 at {i}");
            }
        }
    }

    #[test]
    fn no_targets_gives_straight_line() {
        let mut cfg = ScenarioConfig::desk();
        cfg.targets.clear();
        cfg.snr_th.clear();
        cfg.rcs.clear();
        let p = initialize_path(&cfg, &[]).unwrap();
        check_kinematics(&cfg, &p, true);
        let dir = (cfg.q_final - cfg.q_start).normalize();
        for q in &p.trajectory.q {
            let rel = q - cfg.q_start;
            assert!((rel.x * dir.y - rel.y * dir.x).abs() < 1e-9);
        }
    }

    #[test]
    fn target_on_line_inserts_hover() {
        let mut cfg = ScenarioConfig::desk();
        cfg.targets = vec![Vec2::new(45.0, 20.0)];
        cfg.snr_th = vec![cfg.snr_th[0]];
        cfg.rcs = vec![cfg.rcs[0]];
        let beam = scenario_beam(&cfg).unwrap();
        let p = initialize_path(&cfg, &target_waypoints(&cfg, &beam)).unwrap();
        check_kinematics(&cfg, &p, true);
        let h = p.schedule.target_sum(0) as usize;
        assert!(h >= 1 && h <= cfg.n_s_max);
        let dir = (cfg.q_final - cfg.q_start).normalize();
        for q in &p.trajectory.q {
            let rel = q - cfg.q_start;
            assert!((rel.x * dir.y - rel.y * dir.x).abs() < 1e-9);
        }
        for n in 0..cfg.n_slots {
            if p.schedule.alpha[0][n] == 1.0 {
                assert!((p.trajectory.q[n] - cfg.targets[0]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn desk_initialization_is_kinematically_feasible() {
        let cfg = ScenarioConfig::desk();
        let beam = scenario_beam(&cfg).unwrap();
        let p = initialize(&cfg, &beam).unwrap();
        check_kinematics(&cfg, &p, true);
        for e in 0..cfg.e() {
            assert!(p.schedule.target_sum(e) >= 1.0);
            assert!(p.schedule.target_sum(e) <= cfg.n_s_max as f64);
        }
    }

    #[test]
    fn too_long_path_names_deficit() {
        let mut cfg = ScenarioConfig::desk();
        cfg.v_max = 2.0;
        let beam = scenario_beam(&cfg).unwrap();
        match initialize(&cfg, &beam) {
            Err(Error::Path(msg)) => assert!(msg.contains("deficit"), "{msg}"),
            other => panic!("expected path error, got {other:?}"),
        }
    }

    #[test]
    fn hover_pattern_paths() {
        let cfg = ScenarioConfig::desk_tiny();
        let p = hover_pattern_path(&cfg, 0, &[3], None).unwrap();
        check_kinematics(&cfg, &p, true);
        assert!((p.trajectory.q[3] - cfg.targets[0]).norm() < 1e-9);
        assert_eq!(p.schedule.target_sum(0), 1.0);
        let none = hover_pattern_path(&cfg, 0, &[], None).unwrap();
        check_kinematics(&cfg, &none, true);
        // the start is not above the target, so slot 0 cannot sense
        assert!(matches!(hover_pattern_path(&cfg, 0, &[0], None), Err(Error::Path(_))));
    }

    #[test]
    fn nearest_neighbor_examples() {
        let sites = vec![Vec2::new(3.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
        assert_eq!(nearest_neighbor_order(&Vec2::zeros(), &sites), vec![1, 2, 0]);
        assert_eq!(nearest_neighbor_order(&Vec2::zeros(), &[Vec2::new(5.0, 5.0)]), vec![0]);
    }

    #[test]
    fn fixed_speed_path_keeps_speed() {
        let cfg = ScenarioConfig::desk();
        let beam = scenario_beam(&cfg).unwrap();
        let hover = hover_counts(&cfg, &beam);
        let wps: Vec<Waypoint> =
            cfg.targets.iter().enumerate().map(|(e, d)| Waypoint { pos: *d, target: Some(e), hover: hover[e] }).collect();
        let p = fixed_speed_path(&cfg, &wps, 13.0).unwrap();
        check_kinematics(&cfg, &p, false);
        for (n, v) in p.trajectory.v.iter().enumerate() {
            if p.schedule.slot_sum(n) == 0.0 {
                assert!((v.norm() - 13.0).abs() < 1e-9, "slot {n}: {}", v.norm());
            } else {
                assert_eq!(v.norm(), 0.0);
            }
        }
        assert!(fixed_speed_path(&cfg, &wps, cfg.v_max + 1.0).is_err());
    }

    #[test]
    fn equal_steps_reach_target() {
        for k in 1..8 {
            for dist in [0.0, 3.0, 7.5, 10.0] {
                let step = 10.0;
                if k == 1 && dist != step {
                    continue;
                }
                if dist > k as f64 * step {
                    continue;
                }
                let s = equal_steps(k, dist, step);
                let sx: f64 = s.iter().map(|p| p.0).sum();
                let sy: f64 = s.iter().map(|p| p.1).sum();
                assert!((sx - dist).abs() < 1e-9 && sy.abs() < 1e-9, "k={k} d={dist}");
                for p in &s {
                    assert!(((p.0 * p.0 + p.1 * p.1).sqrt() - step).abs() < 1e-9);
                }
            }
        }
    }
}
