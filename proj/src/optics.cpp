#include "sst/optics.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "sst/errors.hpp"
#include "sst/quadrature.hpp"

namespace sst {

namespace {

constexpr double kPi = std::numbers::pi;

// Lf + zf - Lz; vanishes in the image plane, equals f^2 in the focal plane when L = 2f.
double product_form(const Geometry &g)
{
    const double l = g.slit_to_lens();
    const double f = g.lens_focal();
    const double z = g.lens_to_detector();
    return l * f + z * f - l * z;
}

void fnv1a(std::uint64_t &h, double v)
{
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
}

} // namespace

Geometry::Geometry(double lambda_um, double slit_width_um, std::vector<double> slit_offsets_um,
                   double lens_focal_um, double slit_to_lens_um, double lens_to_detector_um)
    : lambda_(lambda_um), slit_width_(slit_width_um), offsets_(std::move(slit_offsets_um)),
      focal_(lens_focal_um), slit_to_lens_(slit_to_lens_um), lens_to_detector_(lens_to_detector_um)
{
    if (!(lambda_ > 0.0))
        throw InputError("geometry: wavelength must be positive");
    if (!(slit_width_ > 0.0))
        throw InputError("geometry: slit width must be positive");
    if (!(focal_ > 0.0))
        throw InputError("geometry: focal length must be positive");
    if (!(slit_to_lens_ > 0.0))
        throw InputError("geometry: slit-to-lens distance must be positive");
    if (!(lens_to_detector_ >= 0.0) || !std::isfinite(lens_to_detector_))
        throw InputError("geometry: lens-to-detector distance must be finite and non-negative");
    if (offsets_.empty())
        throw InputError("geometry: need at least one slit");
    for (std::size_t i = 1; i < offsets_.size(); ++i)
        if (!(offsets_[i] - offsets_[i - 1] > slit_width_))
            throw InputError("geometry: slit offsets must increase by more than the slit width");
}

Geometry Geometry::with_pitch(double lambda_um, double slit_width_um, double pitch_um, std::size_t count,
                              double lens_focal_um, double slit_to_lens_um, double lens_to_detector_um)
{
    std::vector<double> offsets(count);
    const double center = 0.5 * (static_cast<double>(count) - 1.0);
    for (std::size_t i = 0; i < count; ++i)
        offsets[i] = (static_cast<double>(i) - center) * pitch_um;
    return {lambda_um, slit_width_um, std::move(offsets), lens_focal_um, slit_to_lens_um, lens_to_detector_um};
}

Geometry Geometry::at_detector_distance(double z_um) const
{
    return {lambda_, slit_width_, offsets_, focal_, slit_to_lens_, z_um};
}

Geometry Geometry::mirrored() const
{
    std::vector<double> m(offsets_.rbegin(), offsets_.rend());
    for (auto &r : m)
        r = -r;
    return {lambda_, slit_width_, std::move(m), focal_, slit_to_lens_, lens_to_detector_};
}

double Geometry::image_plane_distance() const
{
    if (slit_to_lens_ <= focal_)
        return std::numeric_limits<double>::infinity();
    return slit_to_lens_ * focal_ / (slit_to_lens_ - focal_);
}

std::uint64_t Geometry::digest() const
{
    std::uint64_t h = 1469598103934665603ull;
    fnv1a(h, lambda_);
    fnv1a(h, slit_width_);
    for (double r : offsets_)
        fnv1a(h, r);
    fnv1a(h, focal_);
    fnv1a(h, slit_to_lens_);
    fnv1a(h, lens_to_detector_);
    return h;
}

Geometry reference_geometry(double z_over_f)
{
    constexpr double f = 50'000.0;
    return Geometry::with_pitch(0.810, 45.0, 135.0, 3, f, 2.0 * f, z_over_f * f);
}

double effective_distance(const Geometry &g)
{
    const double dz = g.lens_to_detector() - g.lens_focal();
    if (dz == 0.0)
        throw GeometryError("effective distance is undefined in the focal plane (z = f)");
    return product_form(g) / dz;
}

double sinc_scale(const Geometry &g)
{
    const double p = product_form(g);
    if (!(p > 0.0))
        throw GeometryError("sinc scale undefined: detector plane is at or beyond the image plane (Lf + zf - Lz <= 0)");
    return kPi * g.slit_width() * g.lens_focal() / (g.lambda() * p);
}

DerivedScales derived_scales(const Geometry &g)
{
    const double dz = g.lens_to_detector() - g.lens_focal();
    const double r = dz == 0.0 ? std::numeric_limits<double>::infinity() : product_form(g) / dz;
    return {r, sinc_scale(g), dz / g.lens_focal()};
}

double sinc(double u)
{
    if (std::abs(u) < 1e-4)
        return 1.0 - u * u / 6.0;
    return std::sin(u) / u;
}

SlitWavefunctions::SlitWavefunctions(const Geometry &g)
    : k_(sst::sinc_scale(g)), amplitude_(std::sqrt(k_ / kPi))
{
    const double shift = (g.lens_to_detector() - g.lens_focal()) / g.lens_focal();
    for (double r : g.slit_offsets()) {
        phase_rate_.push_back(2.0 * r / g.slit_width() * k_);
        envelope_shift_.push_back(shift * r);
    }
}

Complex SlitWavefunctions::operator()(std::size_t slit, double x_um) const
{
    const double env = amplitude_ * sinc(k_ * (x_um + envelope_shift_.at(slit)));
    const double phase = -phase_rate_[slit] * x_um;
    return {env * std::cos(phase), env * std::sin(phase)};
}

void SlitWavefunctions::evaluate_all(double x_um, std::span<Complex> out) const
{
    for (std::size_t i = 0; i < phase_rate_.size(); ++i) {
        const double env = amplitude_ * sinc(k_ * (x_um + envelope_shift_[i]));
        const double phase = -phase_rate_[i] * x_um;
        out[i] = {env * std::cos(phase), env * std::sin(phase)};
    }
}

Complex slit_wavefunction(const Geometry &g, std::size_t slit, double x_um)
{
    if (slit >= g.dim())
        throw InputError("slit_wavefunction: slit index out of range");
    return SlitWavefunctions(g)(slit, x_um);
}

std::string to_string(ValidityLevel level)
{
    switch (level) {
    case ValidityLevel::pass:
        return "pass";
    case ValidityLevel::warn:
        return "warn";
    case ValidityLevel::fail:
        return "fail";
    }
    return "fail";
}

ValidityReport validity_check(const Geometry &g, ValidityThresholds thresholds)
{
    ValidityReport report;
    const double dz = g.lens_to_detector() - g.lens_focal();
    if (dz == 0.0) {
        report.level = ValidityLevel::pass;
        report.ratio = 0.0;
        report.fresnel_length_um = std::numeric_limits<double>::infinity();
        report.reason = "focal plane: R is infinite";
        return report;
    }
    const double r = product_form(g) / dz;
    if (!(r > 0.0)) {
        report.level = ValidityLevel::fail;
        report.ratio = std::numeric_limits<double>::infinity();
        report.fresnel_length_um = 0.0;
        report.reason = "effective distance R <= 0 (image plane or outside the focal-image interval)";
        return report;
    }
    report.fresnel_length_um = std::sqrt(r * g.lambda());
    report.ratio = g.slit_width() / report.fresnel_length_um;
    if (report.ratio <= thresholds.pass_max) {
        report.level = ValidityLevel::pass;
        report.reason = "slit width well below sqrt(R lambda)";
    } else if (report.ratio <= thresholds.warn_max) {
        report.level = ValidityLevel::warn;
        report.reason = "slit width comparable to sqrt(R lambda); sinc model is approximate";
    } else {
        report.level = ValidityLevel::fail;
        report.reason = "slit width exceeds sqrt(R lambda); use the Fresnel oracle";
    }
    return report;
}

FresnelAmplitude fresnel_oracle(const Geometry &g, std::size_t slit, double x_um, FresnelOptions options)
{
    if (slit >= g.dim())
        throw InputError("fresnel_oracle: slit index out of range");
    if (options.n_quad < 64)
        throw InputError("fresnel_oracle: n_quad must be at least 64");

    // Ray-transfer matrix of free space L, thin lens f, free space z.
    const double f = g.lens_focal();
    const double l = g.slit_to_lens();
    const double z = g.lens_to_detector();
    const double a_coef = 1.0 - z / f;
    const double b_coef = product_form(g) / f;
    const double d_coef = 1.0 - l / f;
    if (b_coef == 0.0)
        throw GeometryError("fresnel_oracle: the image plane has no Fresnel kernel");

    const double lambda = g.lambda();
    const double width = g.slit_width();
    const double center = g.slit_offset(slit);
    const double k = kPi / (lambda * b_coef);

    constexpr std::size_t kPanelNodes = 16;
    static const GaussLegendreRule rule = gauss_legendre(kPanelNodes);

    auto integral = [&](std::size_t nodes) {
        const std::size_t panels = std::max<std::size_t>(1, nodes / kPanelNodes);
        return integrate_composite(rule, center - 0.5 * width, center + 0.5 * width, panels, [&](double x1) {
            const double phase = k * (a_coef * x1 * x1 - 2.0 * x1 * x_um);
            return Complex{std::cos(phase), std::sin(phase)};
        });
    };

    // 1/sqrt(i lambda B) / sqrt(a), with the output-plane quadratic phase.
    const Complex prefactor = std::exp(Complex{0.0, k * d_coef * x_um * x_um}) /
                              std::sqrt(Complex{0.0, lambda * b_coef}) / std::sqrt(width);
    const double reference = std::sqrt(width / (lambda * std::abs(b_coef)));

    std::size_t nodes = options.n_quad;
    Complex previous = prefactor * integral(nodes);
    while (nodes * 2 <= options.max_nodes) {
        nodes *= 2;
        const Complex current = prefactor * integral(nodes);
        if (std::abs(current - previous) <= options.tolerance * std::max(std::abs(current), reference))
            return {current, nodes};
        previous = current;
    }
    throw NumericalError("fresnel_oracle: quadrature did not converge at x = " + std::to_string(x_um) + " um");
}

} // namespace sst
