use precool::analysis::spectral_density;
use precool::dynamics::PhotonTrajectory;
use precool::receiver::ReceiverChain;
use precool::synth::{synthesize_trace, SynthConfig};

fn flat_trace(corner_hz: f64, seconds: f64) -> (Vec<f64>, f64) {
    let chain = ReceiverChain::bench_reference();
    let traj = PhotonTrajectory {
        times_s: vec![0.0, seconds],
        occupancy: vec![0.0, 0.0],
        temperature_k: vec![256.0, 256.0],
    };
    let cfg = SynthConfig {
        duration_s: seconds,
        seed: 31,
        one_over_f_corner_hz: corner_hz,
        ..SynthConfig::default()
    };
    let tr = synthesize_trace(&traj, &chain, &cfg, &[]).unwrap();
    let white_level = chain.output_noise(256.0) * 2.0 * cfg.sample_interval_s;
    (tr.voltages_v, white_level)
}

#[test]
fn one_over_f_meets_white_floor_near_corner() {
    let dt = 100e-9;
    let (x, white) = flat_trace(1e6, 0.05);
    let psd = spectral_density(&x, dt, 4096).unwrap();
    // smallest frequency above 100 kHz where the excess falls below the floor
    let crossing = psd
        .frequencies_hz
        .iter()
        .zip(&psd.density)
        .filter(|(f, _)| **f > 1e5)
        .find(|(_, d)| **d - white < white)
        .map(|(f, _)| *f)
        .unwrap();
    assert!((crossing - 1e6).abs() < 0.2e6, "crossing at {crossing} Hz");
}

#[test]
fn one_over_f_slope_is_minus_one_below_corner() {
    let dt = 100e-9;
    let (x, white) = flat_trace(1e6, 0.05);
    let psd = spectral_density(&x, dt, 16384).unwrap();
    let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (f, d) in psd.frequencies_hz.iter().zip(&psd.density) {
        if *f >= 1e4 && *f <= 2e5 {
            let lx = f.log10();
            let ly = (d - white).log10();
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            n += 1.0;
        }
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    assert!((slope + 1.0).abs() < 0.15, "slope {slope}");
}

#[test]
fn white_only_trace_is_flat() {
    let dt = 100e-9;
    let (x, white) = flat_trace(0.0, 0.01);
    let psd = spectral_density(&x, dt, 1024).unwrap();
    let low: f64 = psd.density[1..50].iter().sum::<f64>() / 49.0;
    let high: f64 = psd.density[400..500].iter().sum::<f64>() / 100.0;
    assert!((low / white - 1.0).abs() < 0.05);
    assert!((high / white - 1.0).abs() < 0.05);
}
