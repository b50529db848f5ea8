//! Unit conversions used at the I/O boundary.

/// Pa·s per centipoise.
pub const PA_S_PER_CP: f64 = 1.0e-3;

pub fn cp_to_pa_s(cp: f64) -> f64 {
    cp * PA_S_PER_CP
}

pub fn pa_s_to_cp(pa_s: f64) -> f64 {
    pa_s / PA_S_PER_CP
}

pub fn mm_to_m(mm: f64) -> f64 {
    mm * 1.0e-3
}

pub fn m_to_mm(m: f64) -> f64 {
    m * 1.0e3
}
