// Scratch diagnostics for the interference geometry (not part of the build).

use abqsim_core::experiments::*;
use abqsim_core::gauge::wrap_angle;

fn profile_bin_mag(profile: &[f64], bin: usize) -> (f64, f64) {
    let n = profile.len() as f64;
    let mut re = 0.0;
    let mut im = 0.0;
    for (j, &p) in profile.iter().enumerate() {
        let angle = -2.0 * std::f64::consts::PI * bin as f64 * j as f64 / n;
        re += p * angle.cos();
        im += p * angle.sin();
    }
    ((re * re + im * im).sqrt(), im.atan2(re))
}

fn bench() {
    use abqsim_core::dynamics::{evolve, PropagatorConfig};
    use abqsim_core::lattice::build_hamiltonian;
    let cfg = AbExperimentConfig::reference(0.5);
    let grid = cfg.build_lattice().unwrap();
    let p = cfg.build_potential(&grid, 0.5).unwrap();
    let h = build_hamiltonian(&p, &cfg.constants).unwrap();
    let psi = cfg.initial_packet(&grid, 0.5).unwrap();
    let run = PropagatorConfig {
        dt: cfg.run.dt,
        total_time: 0.2, // 100 steps
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let record = evolve(&psi, &h, &cfg.constants, &run).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "100 steps in {dt:.2}s -> {:.1} ms/step, max CG iterations {}, norm drift {:.2e}",
        dt * 10.0,
        record.max_iterations_used,
        record.norm_drift
    );
    println!("projected per reference run (7000 steps): {:.1} min", dt * 70.0 / 60.0);
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "small".into());
    if which == "bench" {
        bench();
        return;
    }
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];

    let base = |alpha: f64| -> AbExperimentConfig {
        match which.as_str() {
            "reference" => AbExperimentConfig::reference(alpha),
            _ => {
                // mirror of the unit-test small geometry
                let mut cfg = AbExperimentConfig::reference(alpha);
                cfg.nx = 160;
                cfg.ny = 160;
                cfg.spacing = 0.15;
                cfg.barrier = BarrierSpec {
                    x_center: 6.0,
                    thickness: 0.45,
                    slit_centers: [9.525, 14.325],
                    slit_width: 0.9,
                };
                cfg.solenoid_center = [6.0, 11.925];
                cfg.solenoid_radius = 0.45;
                cfg.packet = PacketSpec {
                    center: [2.7, 11.925],
                    sigma: 1.2,
                    wavevector: [2.0, 0.0],
                };
                cfg.screen_x = 12.0;
                cfg.run.dt = 0.004;
                cfg.run.total_time = 6.4;
                cfg
            }
        }
    };

    let cfg = base(0.0);
    let t0 = std::time::Instant::now();
    let rows = fringe_shift_sweep(&cfg, &alphas).unwrap();
    for r in &rows {
        println!(
            "alpha={}: shift={:+.4} predicted={:+.4} vis={:.4} err={:+.4}",
            r.alpha,
            r.shift_rad,
            r.predicted_rad,
            r.visibility,
            wrap_angle(r.shift_rad - r.predicted_rad)
        );
    }
    println!("sweep took {:.1} min", t0.elapsed().as_secs_f64() / 60.0);

    let r = run_ab_interference(&base(0.5)).unwrap();
    let p = &r.screen_profile;
    print!("alpha=0.5 bins: ");
    for bin in 1..=10 {
        let (m, ph) = profile_bin_mag(p, bin);
        print!("b{bin}:{m:.3e}@{ph:+.2} ");
    }
    println!();
    let path = format!("/tmp/profile_{which}_0.5.csv");
    std::fs::write(&path, profile_to_csv(&base(0.5), p)).unwrap();
    println!("wrote {path}");
}
