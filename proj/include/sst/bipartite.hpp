#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sst/forward.hpp"
#include "sst/numerics.hpp"
#include "sst/optics.hpp"
#include "sst/patterns.hpp"
#include "sst/reconstruct.hpp"

namespace sst {

/// (1/sqrt(d)) sum_i |i>_A |d-1-i>_B; for d = 3 this is (|l r> + |c c> + |r l>)/sqrt(3).
/// Composite index is a * d + b. Throws InputError for d < 2.
std::vector<Complex> max_entangled_state(std::size_t d = 3);

/// (1 - p) |psi><psi| + p I / d^2 with psi = max_entangled_state(d).
DensityMatrix werner_state(double p, std::size_t d = 3);

/// Tr[(M_a x M_b) rho_ab].
double coincidence_probability(const ComplexMatrix &rho_ab, const ComplexMatrix &m_a, const ComplexMatrix &m_b);

/// Tr_B[(I x M_b) rho_ab]: the unnormalized arm-A state given an arm-B detection.
ComplexMatrix conditional_state(const ComplexMatrix &rho_ab, const ComplexMatrix &m_b);

/// Conditional arm-A scans taken at several fixed arm-B positions. Each scan's
/// context holds its x_B and arm-B detector width.
struct ConditionalScanSet {
    std::vector<ScanRecord> scans;
    Geometry geometry;
    DetectorSpec det_a;
    DetectorSpec det_b;
    double exposure = 1.0;

    /// Throws InputError if a scan lacks its arm-B context or is malformed.
    void validate() const;
};

/// `count` evenly spaced positions on [-halfwidth, +halfwidth].
std::vector<double> default_xb_positions(std::size_t count = 29, double halfwidth_um = 140.0);

/// Simulates one conditional arm-A scan per x_B, with mean
/// exposure * dx_k * Tr[(M_a(x_k) x M_b(x_B)) rho]. Scan s uses seed
/// SplitMix64(seed + s); scans are simulated concurrently.
ConditionalScanSet simulate_conditional_set(const DensityMatrix &rho_ab, const Geometry &g, const DetectorSpec &det_a,
                                            const DetectorSpec &det_b, std::span<const double> xb_list,
                                            std::span<const double> grid, double exposure, std::uint64_t seed);

/// Noiseless counterpart of simulate_conditional_set, one vector per scan.
std::vector<std::vector<double>> expected_conditional_counts(const DensityMatrix &rho_ab, const Geometry &g,
                                                             const DetectorSpec &det_a, const DetectorSpec &det_b,
                                                             std::span<const double> xb_list,
                                                             std::span<const double> grid, double exposure);

struct JointOptions {
    PatternMode mode = PatternMode::realistic;
    /// Fit one scale per scan (Gauss-Newton jointly with the state) instead of one global scale.
    bool per_scan_scale = false;
    SolveOptions solve;
    int scale_iterations = 30;
};

struct JointFit {
    FitReport report;
    std::size_t rank = 0;
    std::vector<double> scan_scales; ///< relative per-scan scales (all 1 unless per_scan_scale)
};

/// Stacked design over all scans: row (s, k) holds the channels of
/// M_a(x_k + offset_s) x M_b(x_B^s), scaled by dx_k. Assembly is parallel over scans.
RealMatrix joint_design(const ConditionalScanSet &set, PatternMode mode);

namespace serial {
RealMatrix joint_design(const ConditionalScanSet &set, PatternMode mode);
} // namespace serial

/// One least-squares solve over all d^4 real parameters of rho_ab, then
/// trace normalization and physical projection. Throws IdentifiabilityError
/// (with the rank and a suggested extra x_B) if the stacked design is rank
/// deficient.
JointFit reconstruct_joint(const ConditionalScanSet &set, const JointOptions &options = {});

struct FringeSummary {
    double xb_um = 0.0;
    double phase = 0.0;      ///< radians, unwrapped along the x_B list
    double visibility = 0.0; ///< (max - min) / (max + min) of the fitted periodic part
    bool phase_defined = true;
};

struct FringeOptions {
    DetectorSpec det_a{40.0, 32};
    DetectorSpec det_b{40.0, 32};
    double window_um = 0.0; ///< half-width of the fitted region; 0 means pi / (2K)
    double step_um = 1.0;
};

/// Focal-plane interference check: for each x_B, computes the arm-A coincidence
/// curve and fits envelope * (c0 + a1 cos kx + b1 sin kx + a2 cos 2kx + b2 sin 2kx)
/// with k the adjacent-slit fringe frequency. Requires z = f.
std::vector<FringeSummary> verification_scans(const DensityMatrix &rho_ab, const Geometry &g,
                                              std::span<const double> xb_list, const FringeOptions &options = {});

/// x_B at which the maximally entangled state shows fringe phase `phase` at the
/// focal plane. The conditioned fringe peaks at x = x_B, so phase = -k x_B.
double focal_xb_for_phase(const Geometry &g, double phase);

} // namespace sst
