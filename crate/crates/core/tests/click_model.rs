mod common;

use common::{monte_carlo_sns, sigmas};
use ringqkd_core::keyrate::{
    estimate_untagged, expected_statistics, Analysis, ChannelModel, Devices, SecurityEpsilons,
    SnsParams,
};
use ringqkd_core::linkbudget::TfLink;

fn compare(link: TfLink, dev: Devices, p: SnsParams, shots: u64, seed: u64) -> f64 {
    let mc = monte_carlo_sns(link.arms(), &dev, &p, shots, seed);
    let ch = ChannelModel { link, devices: dev };
    let s = expected_statistics(&ch, &p, shots as f64).unwrap();
    let pairs = [
        ("z_one_windows", mc.z_one_windows, s.z_one_windows),
        ("z_detections", mc.z_detections, s.z_detections),
        ("z_errors", mc.z_errors, s.z_errors),
        ("vacuum_windows", mc.vacuum_windows, s.vacuum_windows),
        ("vacuum_detections", mc.vacuum_detections, s.vacuum_detections),
        ("mu1_windows", mc.mu1_windows, s.mu1_windows),
        ("mu1_detections", mc.mu1_detections, s.mu1_detections),
        ("mu2_windows", mc.mu2_windows, s.mu2_windows),
        ("mu2_detections", mc.mu2_detections, s.mu2_detections),
        ("slice_windows", mc.slice_windows, s.slice_windows),
        ("slice_detections", mc.slice_detections, s.slice_detections),
        ("slice_errors", mc.slice_errors, s.slice_errors),
    ];
    let mut worst: f64 = 0.0;
    for (name, obs, exp) in pairs {
        let z = sigmas(obs, exp, shots);
        assert!(z < 4.0, "{name}: observed {obs}, expected {exp:.1} ({z:.2} sigma)");
        worst = worst.max(z);
    }
    worst
}

#[test]
fn expected_counts_match_simulation_symmetric() {
    let dev = Devices {
        dark_count_prob: 1e-4,
        ..Devices::default()
    };
    let p = SnsParams {
        p_send: 0.3,
        p_z: 0.5,
        ..SnsParams::default()
    };
    compare(TfLink::Total(0.05), dev, p, 2_000_000, 1);
}

#[test]
fn expected_counts_match_simulation_asymmetric_arms() {
    let dev = Devices {
        dark_count_prob: 1e-3,
        optical_error: 0.1,
        ..Devices::default()
    };
    let p = SnsParams {
        mu_z: 0.8,
        mu1: 0.2,
        mu2: 0.6,
        p_send: 0.4,
        p_z: 0.4,
        p0: 0.2,
        p1: 0.6,
        delta: 0.9,
    };
    compare(TfLink::Arms { a: 0.6, b: 0.15 }, dev, p, 2_000_000, 2);
}

/// The decoy lower bound on single-photon events must not exceed what a
/// photon-number-tagged simulation actually produces.
#[test]
fn untagged_lower_bound_is_below_tagged_count() {
    let dev = Devices::default();
    for (k, eta) in [0.3, 0.03, 0.003].into_iter().enumerate() {
        let p = SnsParams {
            p_send: 0.25,
            p_z: 0.5,
            ..SnsParams::default()
        };
        let shots = 4_000_000;
        let mc = monte_carlo_sns((eta, eta), &dev, &p, shots, 10 + k as u64);
        let ch = ChannelModel {
            link: TfLink::Arms { a: eta, b: eta },
            devices: dev,
        };
        let s = expected_statistics(&ch, &p, shots as f64).unwrap();
        for analysis in [Analysis::Finite, Analysis::Asymptotic] {
            let u = estimate_untagged(&s, &SecurityEpsilons::default(), analysis).unwrap();
            let slack = 3.0 * (mc.z_single_photon as f64).sqrt();
            assert!(
                u.n1_lower <= mc.z_single_photon as f64 + slack,
                "eta {eta}: bound {} above tagged {}",
                u.n1_lower,
                mc.z_single_photon
            );
        }
    }
}
