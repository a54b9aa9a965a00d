//! Ring constellation geometry.
//!
//! Circular two-body orbits for the two ring layouts, Earth-fixed ground
//! stations on a spherical rotating Earth, line-of-sight tests and
//! visibility-session extraction. Lengths are kilometres and angles are
//! degrees at the public boundary; internally everything is radians.

use std::f64::consts::PI;

use thiserror::Error;

/// Mean Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Earth gravitational parameter, km^3/s^2.
pub const EARTH_MU_KM3_S2: f64 = 398_600.441_8;
/// Sidereal rotation rate of the Earth, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("ring needs at least 3 satellites, got {0}")]
    TooFewSatellites(usize),
    #[error("altitude must be positive, got {0} km")]
    NonPositiveAltitude(f64),
    #[error("atmosphere shell {shell_km} km must lie below the orbit altitude {altitude_km} km and be non-negative")]
    ShellAboveOrbit { altitude_km: f64, shell_km: f64 },
    #[error("time {t} s precedes the constellation epoch {epoch} s")]
    BeforeEpoch { t: f64, epoch: f64 },
    #[error("coincident positions")]
    Coincident,
    #[error("latitude {0} deg outside [-90, 90]")]
    BadLatitude(f64),
    #[error("longitude {0} deg outside [-180, 180)")]
    BadLongitude(f64),
    #[error("invalid time window [{t0}, {t1}] with step {dt}")]
    BadWindow { t0: f64, t1: f64, dt: f64 },
    #[error("observation period must be positive, got {0}")]
    NonPositivePeriod(f64),
    #[error("maximum zenith angle {0} deg outside (0, 90]")]
    BadZenithLimit(f64),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Minimal 3-vector used for ephemerides.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }
    pub fn dot(self, o: Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }
    pub fn cross(self, o: Vec3) -> Vec3 {
        let [a, b, c] = self.0;
        let [x, y, z] = o.0;
        Vec3([b * z - c * y, c * x - a * z, a * y - b * x])
    }
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
    pub fn scale(self, k: f64) -> Vec3 {
        Vec3([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }
    pub fn latitude_deg(self) -> f64 {
        (self.0[2] / self.norm()).asin().to_degrees()
    }
    pub fn longitude_deg(self) -> f64 {
        self.0[1].atan2(self.0[0]).to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstellationKind {
    /// One satellite per polar plane, planes equally spaced in right
    /// ascension, all satellites sharing one argument of latitude.
    Type1Polar,
    /// All satellites in one equatorial orbit with uniform phase spacing.
    Type2Equatorial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSpec {
    pub kind: ConstellationKind,
    pub num_sats: usize,
    pub altitude_km: f64,
    pub epoch_s: f64,
    pub atm_shell_km: f64,
    /// Argument of latitude (Type-1) or orbital phase of satellite 0
    /// (Type-2) at the epoch, degrees.
    pub initial_phase_deg: f64,
}

impl ConstellationSpec {
    pub fn new(kind: ConstellationKind, num_sats: usize, altitude_km: f64) -> Self {
        ConstellationSpec {
            kind,
            num_sats,
            altitude_km,
            epoch_s: 0.0,
            atm_shell_km: 100.0,
            initial_phase_deg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sats < 3 {
            return Err(GeometryError::TooFewSatellites(self.num_sats));
        }
        if !(self.altitude_km > 0.0) {
            return Err(GeometryError::NonPositiveAltitude(self.altitude_km));
        }
        if !(self.atm_shell_km >= 0.0) || self.atm_shell_km >= self.altitude_km {
            return Err(GeometryError::ShellAboveOrbit {
                altitude_km: self.altitude_km,
                shell_km: self.atm_shell_km,
            });
        }
        Ok(())
    }

    pub fn orbit_radius_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }

    /// Mean motion sqrt(GM / r^3), rad/s.
    pub fn mean_motion(&self) -> f64 {
        (EARTH_MU_KM3_S2 / self.orbit_radius_km().powi(3)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        2.0 * PI / self.mean_motion()
    }

    /// Cyclic successor/predecessor on the ring.
    pub fn wrap(&self, index: i64) -> usize {
        index.rem_euclid(self.num_sats as i64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatellitePosition {
    pub sat_index: usize,
    pub position_km: Vec3,
    pub time_s: f64,
}

/// Validated constellation with a cheap position evaluator.
#[derive(Debug, Clone)]
pub struct Constellation {
    spec: ConstellationSpec,
    radius: f64,
    omega: f64,
    u0: f64,
}

impl Constellation {
    pub fn new(spec: ConstellationSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Constellation {
            radius: spec.orbit_radius_km(),
            omega: spec.mean_motion(),
            u0: spec.initial_phase_deg.to_radians(),
            spec,
        })
    }

    pub fn spec(&self) -> &ConstellationSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.num_sats
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Inertial position of one satellite; `t` is not checked against the epoch.
    pub fn position(&self, index: usize, t: f64) -> Vec3 {
        let n = self.spec.num_sats as f64;
        let u = self.u0 + self.omega * (t - self.spec.epoch_s);
        let slot = 2.0 * PI * index as f64 / n;
        match self.spec.kind {
            ConstellationKind::Type1Polar => {
                // inclination 90 deg: plane normal lies in the equatorial plane
                let (sr, cr) = slot.sin_cos();
                let (su, cu) = u.sin_cos();
                Vec3([cr * cu, sr * cu, su]).scale(self.radius)
            }
            ConstellationKind::Type2Equatorial => {
                let (s, c) = (u + slot).sin_cos();
                Vec3([c, s, 0.0]).scale(self.radius)
            }
        }
    }

    pub fn positions(&self, t: f64) -> Result<Vec<SatellitePosition>> {
        if t < self.spec.epoch_s {
            return Err(GeometryError::BeforeEpoch {
                t,
                epoch: self.spec.epoch_s,
            });
        }
        Ok((0..self.spec.num_sats)
            .map(|i| SatellitePosition {
                sat_index: i,
                position_km: self.position(i, t),
                time_s: t,
            })
            .collect())
    }
}

/// Positions of every satellite of `spec` at time `t`.
pub fn propagate(spec: &ConstellationSpec, t: f64) -> Result<Vec<SatellitePosition>> {
    Constellation::new(spec.clone())?.positions(t)
}

/// Minimum distance from the Earth's centre to the segment joining two
/// satellites. When the perpendicular foot of the infinite line falls
/// outside the segment, the nearer endpoint radius is returned.
pub fn intersat_clearance(a: &SatellitePosition, b: &SatellitePosition) -> Result<f64> {
    segment_clearance(a.position_km, b.position_km)
}

pub fn segment_clearance(ra: Vec3, rb: Vec3) -> Result<f64> {
    let d = rb.sub(ra);
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return Err(GeometryError::Coincident);
    }
    // foot parameter of the origin on a + s (b - a)
    let s = -ra.dot(d) / len2;
    if (0.0..=1.0).contains(&s) {
        Ok(ra.cross(rb).norm() / len2.sqrt())
    } else {
        Ok(ra.norm().min(rb.norm()))
    }
}

/// Whether the segment between two satellites clears the atmosphere shell.
pub fn has_line_of_sight(spec: &ConstellationSpec, a: Vec3, b: Vec3) -> Result<bool> {
    Ok(segment_clearance(a, b)? > EARTH_RADIUS_KM + spec.atm_shell_km)
}

/// Smallest ring size whose adjacent chords clear the atmosphere shell.
pub fn min_ring_size(altitude_km: f64, atm_shell_km: f64) -> Result<usize> {
    if !(atm_shell_km >= 0.0) || altitude_km <= atm_shell_km {
        return Err(GeometryError::ShellAboveOrbit {
            altitude_km,
            shell_km: atm_shell_km,
        });
    }
    let r = EARTH_RADIUS_KM + altitude_km;
    let floor = EARTH_RADIUS_KM + atm_shell_km;
    let mut n = 3usize;
    while r * (PI / n as f64).cos() <= floor {
        n += 1;
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStation {
    pub id: u8,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
}

impl GroundStation {
    pub fn new(id: u8, latitude_deg: f64, longitude_deg: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&latitude_deg) {
            return Err(GeometryError::BadLatitude(latitude_deg));
        }
        if !(-180.0..180.0).contains(&longitude_deg) {
            return Err(GeometryError::BadLongitude(longitude_deg));
        }
        Ok(GroundStation {
            id,
            latitude_deg,
            longitude_deg,
        })
    }

    /// The partner station at the same latitude, 180 deg away in longitude.
    pub fn antipodal_partner(&self, id: u8) -> GroundStation {
        GroundStation {
            id,
            latitude_deg: self.latitude_deg,
            longitude_deg: normalize_longitude(self.longitude_deg + 180.0),
        }
    }

    /// Local zenith unit vector in the inertial frame at time `t`
    /// (Greenwich aligned with the inertial x axis at `epoch`).
    pub fn zenith(&self, t: f64, epoch: f64) -> Vec3 {
        let lat = self.latitude_deg.to_radians();
        let lon = self.longitude_deg.to_radians() + EARTH_ROTATION_RAD_S * (t - epoch);
        let (sl, cl) = lat.sin_cos();
        let (so, co) = lon.sin_cos();
        Vec3([cl * co, cl * so, sl])
    }

    pub fn position(&self, t: f64, epoch: f64) -> Vec3 {
        self.zenith(t, epoch).scale(EARTH_RADIUS_KM)
    }
}

pub fn normalize_longitude(lon: f64) -> f64 {
    let l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l >= 180.0 {
        l - 360.0
    } else {
        l
    }
}

fn zenith_between(sat: Vec3, gs_pos: Vec3, up: Vec3) -> Result<f64> {
    let d = sat.sub(gs_pos);
    let n = d.norm();
    if n == 0.0 {
        return Err(GeometryError::Coincident);
    }
    Ok((d.dot(up) / n).clamp(-1.0, 1.0).acos().to_degrees())
}

/// Zenith angle of a satellite seen from a ground station, degrees in [0, 180].
pub fn zenith_angle(sat: &SatellitePosition, gs: &GroundStation, epoch: f64) -> Result<f64> {
    let up = gs.zenith(sat.time_s, epoch);
    zenith_between(sat.position_km, up.scale(EARTH_RADIUS_KM), up)
}

/// Zenith angle of satellite `index` from `gs` at time `t`, degrees.
pub fn zenith_angle_at(c: &Constellation, index: usize, gs: &GroundStation, t: f64) -> f64 {
    let up = gs.zenith(t, c.spec().epoch_s);
    let sat = c.position(index, t);
    zenith_between(sat, up.scale(EARTH_RADIUS_KM), up).unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilitySession {
    pub gs_id: u8,
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub serving_sat: usize,
    pub min_zenith_deg: f64,
}

impl VisibilitySession {
    pub fn duration_s(&self) -> f64 {
        self.t_end_s - self.t_start_s
    }
}

/// Serving satellite at one instant: the visible satellite with the smallest
/// zenith angle, lowest index on ties.
pub fn serving_satellite(
    c: &Constellation,
    gs: &GroundStation,
    t: f64,
    max_zenith_deg: f64,
) -> Option<(usize, f64)> {
    let up = gs.zenith(t, c.spec().epoch_s);
    let gpos = up.scale(EARTH_RADIUS_KM);
    let mut best: Option<(usize, f64)> = None;
    for i in 0..c.len() {
        let z = zenith_between(c.position(i, t), gpos, up).unwrap_or(0.0);
        if z <= max_zenith_deg && best.map_or(true, |(_, bz)| z < bz) {
            best = Some((i, z));
        }
    }
    best
}

/// Extracts maximal visibility sessions over `[t0, t1]` sampled every `dt`.
///
/// A session ends when the station loses all satellites or the serving
/// satellite changes. Boundaries are refined by bisection to `dt / 100`;
/// hand-over boundaries are shared by the two adjacent sessions.
pub fn find_sessions(
    spec: &ConstellationSpec,
    gs: &GroundStation,
    max_zenith_deg: f64,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Vec<VisibilitySession>> {
    if !(t1 > t0) || !(dt > 0.0) {
        return Err(GeometryError::BadWindow { t0, t1, dt });
    }
    if !(max_zenith_deg > 0.0 && max_zenith_deg <= 90.0) {
        return Err(GeometryError::BadZenithLimit(max_zenith_deg));
    }
    if t0 < spec.epoch_s {
        return Err(GeometryError::BeforeEpoch {
            t: t0,
            epoch: spec.epoch_s,
        });
    }
    let c = Constellation::new(spec.clone())?;
    let state = |t: f64| serving_satellite(&c, gs, t, max_zenith_deg).map(|(i, _)| i);
    let tol = dt / 100.0;

    let mut sessions = Vec::new();
    let mut open: Option<(usize, f64)> = state(t0).map(|i| (i, t0));
    let mut prev_t = t0;
    let mut prev = open.map(|(i, _)| i);
    let steps = ((t1 - t0) / dt).ceil() as u64;
    for k in 1..=steps {
        let t = (t0 + k as f64 * dt).min(t1);
        let cur = state(t);
        // walk every transition inside (prev_t, t]
        let mut left = prev_t;
        while prev != cur {
            // bracket [a, b] with state(a) == prev, state(b) != prev
            let (mut a, mut b) = (left, t);
            while b - a > tol {
                let m = 0.5 * (a + b);
                if state(m) == prev {
                    a = m;
                } else {
                    b = m;
                }
            }
            let right = if b == t { cur } else { state(b) };
            match (prev, right) {
                (Some(i), Some(j)) => {
                    let edge = 0.5 * (a + b);
                    let (_, start) = open.take().expect("open session");
                    sessions.push(close(&c, gs, i, start, edge, dt));
                    open = Some((j, edge));
                }
                (Some(i), None) => {
                    let (_, start) = open.take().expect("open session");
                    sessions.push(close(&c, gs, i, start, a, dt));
                }
                (None, Some(j)) => open = Some((j, b)),
                (None, None) => {}
            }
            prev = right;
            left = b;
        }
        prev = cur;
        prev_t = t;
    }
    if let Some((i, start)) = open {
        sessions.push(close(&c, gs, i, start, t1, dt));
    }
    sessions.retain(|s| s.t_end_s > s.t_start_s);
    Ok(sessions)
}

fn close(
    c: &Constellation,
    gs: &GroundStation,
    sat: usize,
    start: f64,
    end: f64,
    dt: f64,
) -> VisibilitySession {
    let f = |t: f64| zenith_angle_at(c, sat, gs, t);
    // coarse scan then golden-section refinement around the best sample
    let n = (((end - start) / dt).ceil() as usize).max(1);
    let h = (end - start) / n as f64;
    let mut best = (start, f(start));
    for k in 1..=n {
        let t = start + k as f64 * h;
        let z = f(t);
        if z < best.1 {
            best = (t, z);
        }
    }
    let lo = (best.0 - h).max(start);
    let hi = (best.0 + h).min(end);
    let zmin = golden_min(&f, lo, hi, 1e-6).min(best.1);
    VisibilitySession {
        gs_id: gs.id,
        t_start_s: start,
        t_end_s: end,
        serving_sat: sat,
        min_zenith_deg: zmin,
    }
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    f1.min(f2)
}

/// Fraction of `t_total` covered by the given sessions.
pub fn visibility_fraction(sessions: &[VisibilitySession], t_total: f64) -> Result<f64> {
    if !(t_total > 0.0) {
        return Err(GeometryError::NonPositivePeriod(t_total));
    }
    let covered: f64 = sessions.iter().map(VisibilitySession::duration_s).sum();
    Ok((covered / t_total).clamp(0.0, 1.0))
}
