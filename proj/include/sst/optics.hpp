#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sst/numerics.hpp"

namespace sst {

/// Multi-slit and lens layout. All lengths are micrometers.
///
/// The slit sits a distance L in front of a thin lens of focal length f and the
/// detector plane is a distance z behind the lens. Slit i is centered at the
/// signed transverse offset r_i.
class Geometry {
public:
    /// Throws InputError unless lambda, a, f, L > 0, z >= 0 and the offsets are
    /// strictly increasing with gaps wider than the slit width.
    Geometry(double lambda_um, double slit_width_um, std::vector<double> slit_offsets_um,
             double lens_focal_um, double slit_to_lens_um, double lens_to_detector_um);

    /// d equally spaced slits centered on the optical axis.
    static Geometry with_pitch(double lambda_um, double slit_width_um, double pitch_um, std::size_t count,
                               double lens_focal_um, double slit_to_lens_um, double lens_to_detector_um);

    double lambda() const noexcept { return lambda_; }
    double slit_width() const noexcept { return slit_width_; }
    const std::vector<double> &slit_offsets() const noexcept { return offsets_; }
    double slit_offset(std::size_t i) const { return offsets_.at(i); }
    double lens_focal() const noexcept { return focal_; }
    double slit_to_lens() const noexcept { return slit_to_lens_; }
    double lens_to_detector() const noexcept { return lens_to_detector_; }
    std::size_t dim() const noexcept { return offsets_.size(); }

    /// Same layout with the detector plane moved.
    Geometry at_detector_distance(double z_um) const;
    /// Same layout with every offset negated (left-right mirror image).
    Geometry mirrored() const;

    /// z at which the lens images the slit: L f / (L - f); infinite if L <= f.
    double image_plane_distance() const;

    /// FNV-1a over the defining numbers; identifies the geometry a table was built for.
    std::uint64_t digest() const;

    bool operator==(const Geometry &other) const = default;

private:
    double lambda_;
    double slit_width_;
    std::vector<double> offsets_;
    double focal_;
    double slit_to_lens_;
    double lens_to_detector_;
};

/// 810 nm triple slit (a = 45 um, pitch 135 um), f = 50 mm, L = 2f, z = z_over_f * f.
Geometry reference_geometry(double z_over_f = 1.81);

struct DerivedScales {
    double effective_distance; ///< R, micrometers (infinite at the focal plane)
    double sinc_scale;         ///< K, 1/micrometers
    double envelope_shift_factor; ///< (z - f) / f
};

/// R = (Lf + zf - Lz) / (z - f). Throws GeometryError at z = f.
double effective_distance(const Geometry &g);

/// K = pi a f / (lambda (Lf + zf - Lz)), finite at the focal plane.
/// Throws GeometryError at or beyond the image plane.
double sinc_scale(const Geometry &g);

DerivedScales derived_scales(const Geometry &g);

/// sin(u)/u with a Taylor branch near zero.
double sinc(double u);

/// Transverse amplitude of slit i at detector coordinate x (um), units um^-1/2:
/// sqrt(K/pi) exp(-i (2 r_i / a) K x) sinc(K (x + (z-f)/f r_i)).
Complex slit_wavefunction(const Geometry &g, std::size_t slit, double x_um);

/// Precomputed evaluator for the hot loops of pattern tabulation.
class SlitWavefunctions {
public:
    explicit SlitWavefunctions(const Geometry &g);

    std::size_t dim() const noexcept { return phase_rate_.size(); }
    double sinc_scale() const noexcept { return k_; }

    Complex operator()(std::size_t slit, double x_um) const;
    /// Writes phi_i(x) for every slit into out (size dim()).
    void evaluate_all(double x_um, std::span<Complex> out) const;

private:
    double k_;
    double amplitude_;
    std::vector<double> phase_rate_;   // (2 r_i / a) K
    std::vector<double> envelope_shift_; // (z - f)/f r_i
};

enum class ValidityLevel { pass, warn, fail };

std::string to_string(ValidityLevel level);

struct ValidityThresholds {
    double pass_max = 0.5;
    double warn_max = 1.0;
};

struct ValidityReport {
    ValidityLevel level = ValidityLevel::fail;
    double ratio = 0.0;            ///< a / sqrt(R lambda); 0 at the focal plane
    double fresnel_length_um = 0.0; ///< sqrt(R lambda)
    std::string reason;
};

/// Checks the sinc model's condition a << sqrt(R lambda).
ValidityReport validity_check(const Geometry &g, ValidityThresholds thresholds = {});

struct FresnelOptions {
    std::size_t n_quad = 64;        ///< starting node count, >= 64
    std::size_t max_nodes = 1u << 16;
    double tolerance = 1e-6;        ///< relative change under node doubling
};

struct FresnelAmplitude {
    Complex amplitude;
    std::size_t nodes_used;
};

/// Paraxial (Collins) propagation of a unit-norm top-hat across slit i through
/// slit -> lens -> detector. Independent of the sinc model; valid in every plane
/// except the image plane itself. Throws NumericalError if node doubling does not
/// settle within max_nodes.
FresnelAmplitude fresnel_oracle(const Geometry &g, std::size_t slit, double x_um, FresnelOptions options = {});

} // namespace sst
