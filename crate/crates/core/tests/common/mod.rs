#![allow(dead_code)]

/// Eight rows with one never-taker (row 4) and one always-taker (row 5).
pub const FIXTURE_Y: [f64; 8] = [1.0, 3.0, 5.0, 2.0, 4.0, 0.5, 2.5, 6.0];
pub const FIXTURE_D: [u8; 8] = [1, 1, 1, 0, 1, 0, 0, 0];
pub const FIXTURE_Z: [u8; 8] = [1, 1, 1, 1, 0, 0, 0, 0];

/// Distinct outcomes in ascending order.
pub const FIXTURE_GRID: [f64; 8] = [0.5, 1.0, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0];

/// Worked by hand with E(D|Z=1) = 3/4 and E(D|Z=0) = 1/4, so both complier
/// denominators have magnitude 1/2 and every value is a multiple of 1/2.
/// Treated: [#(Y≤y, D=1, Z=1)/4 − #(Y≤y, D=1, Z=0)/4] / (1/2).
pub const HAND_F1_RAW: [f64; 8] = [0.0, 0.5, 0.5, 0.5, 1.0, 0.5, 1.0, 1.0];
/// Untreated: [#(Y≤y, D=0, Z=1)/4 − #(Y≤y, D=0, Z=0)/4] / (−1/2).
pub const HAND_F0_RAW: [f64; 8] = [0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.5, 1.0];
pub const HAND_F1_MONO: [f64; 8] = [0.0, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0, 1.0];
pub const HAND_F0_MONO: [f64; 8] = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0];

/// (τ, Q1, Q0) read off the monotonized CDFs.
pub const HAND_LQTE: [(f64, f64, f64); 3] = [(0.25, 1.0, 0.5), (0.5, 1.0, 0.5), (0.75, 3.0, 6.0)];

pub fn fixture_csv() -> String {
    let mut s = String::from("y,d,z\n");
    for i in 0..8 {
        s.push_str(&format!("{},{},{}\n", FIXTURE_Y[i], FIXTURE_D[i], FIXTURE_Z[i]));
    }
    s
}
