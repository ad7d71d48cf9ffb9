#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sst/bipartite.hpp"
#include "sst/forward.hpp"
#include "sst/numerics.hpp"
#include "sst/optics.hpp"
#include "sst/patterns.hpp"
#include "sst/reconstruct.hpp"

namespace sst::io {

/// Flat `key = value` file; `#` starts a comment. Keys remember their line.
struct KeyValues {
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::map<std::string, Entry> entries;
    std::string source;
};

KeyValues parse_key_values(std::istream &in, const std::string &source);
KeyValues read_key_values(const std::filesystem::path &path);

/// Geometry keys: lambda_nm, slit_width_um, slit_pitch_um (+ optional slit_count,
/// default 3) or slit_offsets_um (comma list), f_mm, L_mm, z_mm.
Geometry geometry_from_keys(const KeyValues &kv);
/// Loads a geometry-only file; any other key is an InputError.
Geometry read_geometry(const std::filesystem::path &path);

/// Everything one CLI run needs.
struct RunConfig {
    std::optional<Geometry> geometry;
    double detector_slit_um = 0.0;
    std::optional<double> detector_slit_b_um; ///< arm-B width, defaults to detector_slit_um
    std::size_t quad_points = 32;
    double grid_min_um = -500.0;
    double grid_max_um = 500.0;
    double grid_step_um = 5.0;
    double exposure = 1e7;
    std::uint64_t seed = 1;
    PatternMode mode = PatternMode::realistic;
    std::vector<double> xb_list_um;
    double offset_um = 0.0;
    double offset_search_um = 0.0;
    bool poisson_weights = false;
    bool background = false;
    bool per_scan_scale = false;
    double validity_pass_max = 0.5;
    double validity_warn_max = 1.0;
    std::string out;
    std::filesystem::path base_dir;

    const Geometry &require_geometry() const;
    DetectorSpec detector_a() const;
    DetectorSpec detector_b() const;
    std::vector<double> grid() const;
};

/// Accepts geometry keys plus detector_slit_um, detector_slit_b_um, quad_points,
/// grid_min_um, grid_max_um, grid_step_um, exposure, seed, mode, xB_list_um,
/// offset_um, offset_search_um, poisson_weights, background, per_scan_scale,
/// validity_pass_max, validity_warn_max, out. Unknown keys are InputErrors
/// naming the key and line.
RunConfig run_config_from_keys(const KeyValues &kv);
RunConfig read_run_config(const std::filesystem::path &path);

/// Header x_um,<channel names>, one row per grid point, 12 significant digits.
void write_pattern_csv(std::ostream &out, const PatternSet &pat);

/// Header x_um,counts with `# key=value` metadata lines (exposure, seed,
/// offset_um, xB_um, bB_um).
void write_scan_csv(std::ostream &out, const ScanRecord &scan);
ScanRecord read_scan_csv(std::istream &in, const std::string &source);
ScanRecord read_scan_csv(const std::filesystem::path &path);

/// `dim N`, then `re` and `im` blocks of N rows each, row-major.
void write_matrix(std::ostream &out, const ComplexMatrix &m);
ComplexMatrix read_matrix(std::istream &in, const std::string &source);
ComplexMatrix read_matrix(const std::filesystem::path &path);

/// Scalar fields (mode, scale, rss_pre, rss_post, condition, offset_um, ...)
/// followed by the matrix block; readable by read_matrix.
void write_fit_report(std::ostream &out, const FitReport &report);

struct Manifest {
    std::filesystem::path config;
    double exposure = 1.0;
    double det_a_um = 0.0;
    double det_b_um = 0.0;
    struct Entry {
        std::filesystem::path file;
        double xb_um = 0.0;
    };
    std::vector<Entry> scans;
};

/// Key-value manifest; `scan = <file> <xB_um>` once per scan, paths relative to
/// the manifest directory.
void write_manifest(std::ostream &out, const Manifest &manifest);
Manifest read_manifest(const std::filesystem::path &path);

/// Reads every scan listed in the manifest (missing files are InputErrors).
ConditionalScanSet load_conditional_set(const std::filesystem::path &manifest_path, const Geometry &g,
                                        std::size_t quad_points = 32);

std::string format_number(double v);

} // namespace sst::io
