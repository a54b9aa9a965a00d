//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use ringqkd_core::keyrate::{Devices, SnsParams};

/// Counts from a shot-by-shot simulation of the SNS interferometer.
#[derive(Debug, Clone, Copy, Default)]
pub struct McCounts {
    pub shots: u64,
    pub z_one_windows: u64,
    pub z_detections: u64,
    pub z_errors: u64,
    pub vacuum_windows: u64,
    pub vacuum_detections: u64,
    pub mu1_windows: u64,
    pub mu1_detections: u64,
    pub mu2_windows: u64,
    pub mu2_detections: u64,
    pub slice_windows: u64,
    pub slice_detections: u64,
    pub slice_errors: u64,
    /// Effective one-sender Z events whose sender emitted exactly one photon.
    pub z_single_photon: u64,
}

impl McCounts {
    fn add(mut self, o: McCounts) -> McCounts {
        self.shots += o.shots;
        self.z_one_windows += o.z_one_windows;
        self.z_detections += o.z_detections;
        self.z_errors += o.z_errors;
        self.vacuum_windows += o.vacuum_windows;
        self.vacuum_detections += o.vacuum_detections;
        self.mu1_windows += o.mu1_windows;
        self.mu1_detections += o.mu1_detections;
        self.mu2_windows += o.mu2_windows;
        self.mu2_detections += o.mu2_detections;
        self.slice_windows += o.slice_windows;
        self.slice_detections += o.slice_detections;
        self.slice_errors += o.slice_errors;
        self.z_single_photon += o.z_single_photon;
        self
    }
}

fn click(rng: &mut ChaCha8Rng, mean: f64, dark: f64) -> bool {
    rng.gen::<f64>() < 1.0 - (1.0 - dark) * (-mean).exp()
}

/// Left/right clicks for two coherent pulses with amplitudes `a`, `b`
/// (already including channel and detector efficiency) and phases.
fn interfere(rng: &mut ChaCha8Rng, a: f64, pa: f64, b: f64, pb: f64, dark: f64) -> (bool, bool) {
    let (re, im) = (a * pa.cos() + b * pb.cos(), a * pa.sin() + b * pb.sin());
    let (re2, im2) = (a * pa.cos() - b * pb.cos(), a * pa.sin() - b * pb.sin());
    let left = 0.5 * (re * re + im * im);
    let right = 0.5 * (re2 * re2 + im2 * im2);
    (click(rng, left, dark), click(rng, right, dark))
}

/// One sender emitting a Poisson number of photons; each survives with
/// probability `eff` and picks a detector at random.
fn photons(rng: &mut ChaCha8Rng, mu: f64, eff: f64, dark: f64) -> (u64, bool, bool) {
    let n = if mu > 0.0 {
        Poisson::new(mu).unwrap().sample(rng) as u64
    } else {
        0
    };
    let (mut l, mut r) = (rng.gen::<f64>() < dark, rng.gen::<f64>() < dark);
    for _ in 0..n {
        if rng.gen::<f64>() < eff {
            if rng.gen::<bool>() {
                l = true;
            } else {
                r = true;
            }
        }
    }
    (n, l, r)
}

fn intensity(rng: &mut ChaCha8Rng, p: &SnsParams) -> (u8, f64) {
    let u = rng.gen::<f64>();
    if u < p.p0 {
        (0, 0.0)
    } else if u < p.p0 + p.p1 {
        (1, p.mu1)
    } else {
        (2, p.mu2)
    }
}

fn chunk(
    eta: (f64, f64),
    dev: &Devices,
    p: &SnsParams,
    shots: u64,
    seed: u64,
) -> McCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = dev.dark_count_prob;
    let ea = eta.0 * dev.detector_efficiency;
    let eb = eta.1 * dev.detector_efficiency;
    let mut c = McCounts {
        shots,
        ..McCounts::default()
    };
    for _ in 0..shots {
        let za = rng.gen::<f64>() < p.p_z;
        let zb = rng.gen::<f64>() < p.p_z;
        match (za, zb) {
            (true, true) => {
                let sa = rng.gen::<f64>() < p.p_send;
                let sb = rng.gen::<f64>() < p.p_send;
                let (l, r, single) = match (sa, sb) {
                    (true, true) => {
                        let pa = rng.gen::<f64>() * TAU;
                        let pb = rng.gen::<f64>() * TAU;
                        let (l, r) =
                            interfere(&mut rng, (ea * p.mu_z).sqrt(), pa, (eb * p.mu_z).sqrt(), pb, d);
                        (l, r, false)
                    }
                    (false, false) => (rng.gen::<f64>() < d, rng.gen::<f64>() < d, false),
                    _ => {
                        c.z_one_windows += 1;
                        let eff = if sa { ea } else { eb };
                        let (n, l, r) = photons(&mut rng, p.mu_z, eff, d);
                        (l, r, n == 1)
                    }
                };
                if l != r {
                    c.z_detections += 1;
                    if sa == sb {
                        c.z_errors += 1;
                    }
                    if single {
                        c.z_single_photon += 1;
                    }
                }
            }
            (false, false) => {
                let (ka, ma) = intensity(&mut rng, p);
                let (kb, mb) = intensity(&mut rng, p);
                let pa = rng.gen::<f64>() * TAU;
                let pb = rng.gen::<f64>() * TAU;
                let (l, r) = interfere(&mut rng, (ea * ma).sqrt(), pa, (eb * mb).sqrt(), pb, d);
                let eff = l != r;
                match (ka, kb) {
                    (0, 0) => {
                        c.vacuum_windows += 1;
                        c.vacuum_detections += eff as u64;
                    }
                    (1, 0) | (0, 1) => {
                        c.mu1_windows += 1;
                        c.mu1_detections += eff as u64;
                    }
                    (2, 0) | (0, 2) => {
                        c.mu2_windows += 1;
                        c.mu2_detections += eff as u64;
                    }
                    (1, 1) => {
                        let diff = (pa - pb).rem_euclid(TAU);
                        let half = 0.5 * p.delta;
                        let near_zero = diff <= half || diff >= TAU - half;
                        let near_pi = (diff - PI).abs() <= half;
                        if near_zero || near_pi {
                            c.slice_windows += 1;
                            if eff {
                                c.slice_detections += 1;
                                let flipped = rng.gen::<f64>() < dev.optical_error;
                                let wrong = if near_zero { r } else { l };
                                if wrong != flipped {
                                    c.slice_errors += 1;
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    c
}

/// Simulate `shots` windows over arms with efficiencies `eta = (a, b)`.
pub fn monte_carlo_sns(
    eta: (f64, f64),
    dev: &Devices,
    p: &SnsParams,
    shots: u64,
    seed: u64,
) -> McCounts {
    const CHUNKS: u64 = 64;
    (0..CHUNKS)
        .into_par_iter()
        .map(|i| {
            let n = shots / CHUNKS + u64::from(i < shots % CHUNKS);
            chunk(eta, dev, p, n, seed.wrapping_mul(1_000_003).wrapping_add(i))
        })
        .reduce(McCounts::default, McCounts::add)
}

/// Distance in binomial standard deviations between an observed count and
/// its expectation over `trials`.
pub fn sigmas(observed: u64, expected: f64, trials: u64) -> f64 {
    let q = (expected / trials as f64).clamp(0.0, 1.0);
    let sd = (trials as f64 * q * (1.0 - q)).sqrt();
    let diff = (observed as f64 - expected).abs();
    if sd == 0.0 {
        if diff < 1e-9 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / sd
    }
}

/// Knowledge model of one relay segment with `m` satellites and range `r`,
/// written out independently of the library.
///
/// Unknowns: bit 0 is the secret, the rest are link keys. The adversary
/// sees every hop message and the keys of every link touching a
/// compromised position. Returns whether the secret is in the span.
pub fn oracle_segment_exposed(m: usize, r: usize, compromised: &[usize]) -> bool {
    let bob = m + 1;
    let mut links: Vec<(usize, usize)> = vec![(0, 1), (m, bob)];
    for a in 0..=bob {
        for b in a + 2..=(a + r).min(bob) {
            links.push((a, b));
        }
    }
    assert!(links.len() < 128);
    let mut rows: Vec<u128> = Vec::new();
    for p in 0..bob {
        let mut row = 1u128;
        for (j, &(a, b)) in links.iter().enumerate() {
            if a <= p && p < b {
                row |= 1 << (j + 1);
            }
        }
        rows.push(row);
    }
    for (j, &(a, b)) in links.iter().enumerate() {
        if compromised.contains(&a) || compromised.contains(&b) {
            rows.push(1 << (j + 1));
        }
    }
    in_span(&rows, 1)
}

/// Gaussian elimination over GF(2) on 128-bit rows.
pub fn in_span(rows: &[u128], target: u128) -> bool {
    let mut basis: Vec<u128> = Vec::new();
    for &r in rows {
        let mut v = r;
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|x, y| y.cmp(x));
        }
    }
    let mut t = target;
    for &b in &basis {
        t = t.min(t ^ b);
    }
    t == 0
}
