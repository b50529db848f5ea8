//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use viscojoint::{DamperGeometry, PendulumParams};

/// Gauss–Legendre nodes and weights on [-1, 1], five points.
const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    GL5.iter().map(|&(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

/// Torque on a cylinder of radius `moving` spinning at unit rate inside (or
/// around) a stationary cylinder of radius `fixed`, per unit viscosity,
/// from the Couette solution `omega(r) = A + B / r^2`: wall stress is
/// `2 mu |B| / r^2`, integrated over the lateral area `2 pi r L`.
fn couette_side(moving: f64, fixed: f64, length: f64) -> f64 {
    // omega(moving) = 1, omega(fixed) = 0
    let b = 1.0 / (1.0 / (moving * moving) - 1.0 / (fixed * fixed));
    let stress = 2.0 * b.abs() / (moving * moving);
    // integrate stress * r over the surface in angle and height
    let per_height = gauss(|_phi| stress * moving * moving, 0.0, 2.0 * PI);
    gauss(|_z| per_height, 0.0, length)
}

/// End face of the fin: linear shear `mu r / delta` across the gap, moment
/// arm `r`, annulus area element `2 pi r dr`.
fn end_face(inner: f64, outer: f64, delta: f64) -> f64 {
    // Split the annulus so the quartic integrand is resolved exactly.
    let n = 4;
    (0..n)
        .map(|k| {
            let a = inner + (outer - inner) * k as f64 / n as f64;
            let b = inner + (outer - inner) * (k + 1) as f64 / n as f64;
            gauss(|r| (r / delta) * r * 2.0 * PI * r, a, b)
        })
        .sum()
}

/// Reference G factor of one fin. Fins are interleaved with stationary
/// walls: fin `i` has a channel on its inner face unless it is the innermost
/// pin, and on its outer face unless it is the outermost of several fins.
/// Each fin also shears fluid across its tip face.
pub fn oracle_fin_g(g: &DamperGeometry, i: usize) -> f64 {
    let rho = g.inner_radius + i as f64 * (g.wall_width + g.channel_width);
    let inner = rho - g.wall_width / 2.0;
    let outer = rho + g.wall_width / 2.0;
    let delta = g.channel_width;
    let mut total = end_face(inner, outer, delta);
    if i > 0 {
        total += couette_side(inner, inner - delta, g.fin_length);
    }
    if i + 1 < g.n_fins || g.n_fins == 1 {
        total += couette_side(outer, outer + delta, g.fin_length);
    }
    total
}

pub fn oracle_total_g(g: &DamperGeometry) -> f64 {
    (0..g.n_fins).map(|i| oracle_fin_g(g, i)).sum()
}

/// Fingertip separation of two mirrored fingers built by chaining rotation
/// matrices: each link points along the running sum of joint angles,
/// measured from the palm axis towards the opposing finger.
pub fn oracle_fingertip_distance(palm_offset: f64, links: [f64; 3], q: [f64; 3]) -> f64 {
    let tip = |mirror: f64| {
        let mut p = [mirror * palm_offset, 0.0];
        let mut heading: f64 = if mirror > 0.0 { 0.0 } else { PI };
        for j in 0..3 {
            heading += -mirror * q[j];
            let (s, c) = heading.sin_cos();
            // rotate the unit x vector by heading
            let rot = [[c, -s], [s, c]];
            p[0] += rot[0][0] * links[j];
            p[1] += rot[1][0] * links[j];
        }
        p
    };
    let (a, b) = (tip(1.0), tip(-1.0));
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Signed aperture: positive while the fingertips have not crossed.
pub fn oracle_signed_reach(palm_offset: f64, links: [f64; 3], q: [f64; 3]) -> f64 {
    let mut heading = 0.0;
    let mut x = palm_offset;
    for j in 0..3 {
        heading += q[j];
        x += links[j] * heading.cos();
    }
    2.0 * x
}

/// Pendulum inertia by summing point masses over a fine grid of the bar.
pub fn oracle_inertia(p: &PendulumParams) -> f64 {
    let (nx, ny) = (400, 40);
    let dm = p.bar_mass / (nx * ny) as f64;
    let mut bar = 0.0;
    for i in 0..nx {
        let x = p.bar_com_radius - p.bar_length / 2.0 + (i as f64 + 0.5) * p.bar_length / nx as f64;
        for k in 0..ny {
            let y = -p.bar_width / 2.0 + (k as f64 + 0.5) * p.bar_width / ny as f64;
            bar += dm * (x * x + y * y);
        }
    }
    p.joint_inertia + bar + p.weight_mass * p.weight_radius * p.weight_radius
}

/// Samples of `center + a exp(-t / tau) cos(2 pi t / period)` at spacing `dt`.
pub fn decaying_sinusoid(center: f64, a: f64, tau: f64, period: f64, dt: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            center + a * (-t / tau).exp() * (2.0 * PI * t / period).cos()
        })
        .collect()
}

/// Extrema of a decaying cosine occur at half periods; count how many of
/// them (after the first) lie outside the band, which is the number of
/// band-to-band crossings.
pub fn sinusoid_crossings(a: f64, tau: f64, period: f64, band: f64, duration: f64) -> usize {
    let mut count = 0;
    let mut k = 1;
    while k as f64 * period / 2.0 <= duration {
        let t = k as f64 * period / 2.0;
        if a * (-t / tau).exp() > band {
            count += 1;
        } else {
            break;
        }
        k += 1;
    }
    count
}
