//! Binary digit sums, their exact summatory functions, the periodic
//! fluctuation functions `Phi` and `Psi`, odd-coefficient counts of powers
//! of GF(2) polynomials, and empirical dispersion checks built on them.

mod dispersion;
mod fluctuation;
mod gf2;
mod linrep;

pub use dispersion::{
    digit_distribution_compare, dispersion_from_counts, empirical_dispersion, octave_stats, write_octaves_csv, DigitComparison,
    DispersionResult, OctaveStats, StandardizedMoments, DISPERSION_J_MIN, TRAILING_OCTAVES,
};
pub use fluctuation::{
    fluctuation_statistics, phi, phi_statistics, psi, psi_statistics, scan_extrema, write_histogram_csv,
    write_samples_csv, Extrema, Fluctuation, FluctuationSample, FluctuationStats, HISTOGRAM_BINS, PERCENT_LEVELS,
};
pub use gf2::{gf2_row_counts, Gf2Poly, GF2_MAX_N};
pub use linrep::{fit_linear_representation, fit_with_counts, DigitOrder, LinearRepresentation, COUNTS_MAX_J};

/// `#(n)`, the number of ones in the binary expansion of `n`.
pub fn digit_sum(n: u64) -> u32 {
    n.count_ones()
}

/// `S(n) = sum_{k < n} #(k)`, from `S(2m) = 2 S(m) + m` and
/// `S(2m + 1) = S(2m) + #(m)`.
pub fn summatory_digit_sum(n: u64) -> u128 {
    // walk the bits of n from the top, keeping S(m) for the prefix m
    let mut s: u128 = 0;
    let mut m: u64 = 0;
    for i in (0..u64::BITS - n.leading_zeros()).rev() {
        let bit = (n >> i) & 1;
        s = 2 * s + m as u128;
        if bit == 1 {
            s += digit_sum(m) as u128;
        }
        m = 2 * m + bit;
    }
    s
}

/// `Sf(n) = sum_{k < n} 2^#(k)`, from `Sf(2m) = 3 Sf(m)` and
/// `Sf(2m + 1) = Sf(2m) + 2^#(m)`.
pub fn summatory_f(n: u64) -> u128 {
    let mut s: u128 = 0;
    let mut m: u64 = 0;
    for i in (0..u64::BITS - n.leading_zeros()).rev() {
        let bit = (n >> i) & 1;
        s *= 3;
        if bit == 1 {
            s += 1u128 << digit_sum(m);
        }
        m = 2 * m + bit;
    }
    s
}
