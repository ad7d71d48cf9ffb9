#include "sst/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sst/bipartite.hpp"
#include "sst/errors.hpp"
#include "sst/forward.hpp"
#include "sst/io.hpp"
#include "sst/numerics.hpp"
#include "sst/optics.hpp"
#include "sst/patterns.hpp"
#include "sst/reconstruct.hpp"

namespace sst {

namespace {

namespace fs = std::filesystem;

struct Flags {
    std::string config;
    std::string mode;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string reference;
    std::optional<double> offset_search;
    std::string state;
    std::string scan;
    std::string manifest;
    std::string matrix;
};

io::RunConfig load_config(const Flags &flags)
{
    if (flags.config.empty())
        throw InputError("--config is required");
    auto cfg = io::read_run_config(flags.config);
    if (!flags.mode.empty())
        cfg.mode = parse_mode(flags.mode);
    if (flags.seed)
        cfg.seed = *flags.seed;
    if (!flags.out.empty())
        cfg.out = flags.out;
    if (flags.offset_search)
        cfg.offset_search_um = *flags.offset_search;
    if (cfg.offset_search_um < 0.0)
        throw InputError("--offset-search must be non-negative");
    return cfg;
}

/// Exit 3 on a failed validity check; a warning is reported and the run continues.
void check_validity(const io::RunConfig &cfg, std::ostream &err)
{
    const auto report = validity_check(cfg.require_geometry(), {cfg.validity_pass_max, cfg.validity_warn_max});
    if (report.level == ValidityLevel::fail)
        throw GeometryError("geometry validity check failed: " + report.reason);
    if (report.level == ValidityLevel::warn)
        err << "warning: " << report.reason << '\n';
}

/// Writes through `write` to the configured path, or to stdout when none is set.
template <typename Writer>
void emit(const std::string &path, std::ostream &out, Writer write)
{
    if (path.empty()) {
        write(out);
        return;
    }
    std::ofstream file(path);
    if (!file)
        throw InputError("cannot write '" + path + "'");
    write(file);
    if (!file)
        throw InputError("failed writing '" + path + "'");
}

/// "maxent", "werner:P", "mixed", or a density-matrix file.
DensityMatrix load_state(const std::string &arg, std::size_t expected_dim)
{
    if (arg.empty())
        throw InputError("--state is required");
    if (arg == "maxent") {
        const auto psi = max_entangled_state(static_cast<std::size_t>(std::lround(std::sqrt(expected_dim))));
        return DensityMatrix::pure(psi);
    }
    if (arg.rfind("werner:", 0) == 0) {
        double p = 0.0;
        try {
            std::size_t used = 0;
            p = std::stod(arg.substr(7), &used);
            if (used != arg.size() - 7)
                throw std::invalid_argument("trailing");
        } catch (const std::exception &) {
            throw InputError("bad werner parameter in '" + arg + "'");
        }
        if (p < 0.0 || p > 1.0)
            throw InputError("werner parameter must lie in [0, 1]");
        return werner_state(p, static_cast<std::size_t>(std::lround(std::sqrt(expected_dim))));
    }
    if (arg == "mixed")
        return DensityMatrix::maximally_mixed(expected_dim);
    if (!fs::exists(arg))
        throw InputError("state file '" + arg + "' does not exist");
    const auto m = io::read_matrix(fs::path(arg));
    if (m.rows() != expected_dim)
        throw DimensionError("state has dimension " + std::to_string(m.rows()) + ", expected " +
                             std::to_string(expected_dim));
    return DensityMatrix(m);
}

struct Reference {
    std::optional<std::vector<Complex>> pure;
    std::optional<ComplexMatrix> mixed;
};

/// A reference is "maxent" or a matrix file; a rank-one file reduces to its eigenvector.
Reference load_reference(const std::string &arg, std::size_t dim)
{
    Reference ref;
    if (arg == "maxent") {
        const auto d = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(dim))));
        if (d * d != dim)
            throw DimensionError("maxent reference needs a bipartite matrix (dim a perfect square), got " +
                                 std::to_string(dim));
        ref.pure = max_entangled_state(d);
        return ref;
    }
    if (!fs::exists(arg))
        throw InputError("reference file '" + arg + "' does not exist");
    const auto m = io::read_matrix(fs::path(arg));
    if (m.rows() != dim)
        throw DimensionError("reference has dimension " + std::to_string(m.rows()) + ", matrix has " +
                             std::to_string(dim));
    const auto eig = hermitian_eig(m.hermitized());
    const double top = eig.values.back();
    const double tr = m.trace().real();
    if (tr > 0.0 && std::abs(top - tr) <= 1e-9 * tr) {
        std::vector<Complex> psi(dim);
        for (std::size_t i = 0; i < dim; ++i)
            psi[i] = eig.vectors(i, dim - 1);
        ref.pure = psi;
    } else {
        ref.mixed = m;
    }
    return ref;
}

double reference_fidelity(const ComplexMatrix &rho, const Reference &ref)
{
    if (ref.pure)
        return fidelity(rho, *ref.pure);
    return uhlmann_fidelity(rho, *ref.mixed);
}

void print_fit(std::ostream &out, const FitReport &report)
{
    out << "mode " << to_string(report.mode) << '\n';
    out << "rss_pre " << io::format_number(report.rss_pre) << '\n';
    out << "rss_post " << io::format_number(report.rss_post) << '\n';
    out << "condition " << io::format_number(report.condition) << '\n';
    out << "offset_um " << io::format_number(report.offset_um) << '\n';
    out << "projection_distance " << io::format_number(report.projection_distance) << '\n';
}

int cmd_patterns(const Flags &flags, std::ostream &out, std::ostream &err)
{
    const auto cfg = load_config(flags);
    check_validity(cfg, err);
    const auto grid = cfg.grid();
    const DetectorSpec det = cfg.mode == PatternMode::ideal ? DetectorSpec{0.0, cfg.quad_points} : cfg.detector_a();
    const auto pat = pattern_table(cfg.require_geometry(), det, grid);
    emit(cfg.out, out, [&](std::ostream &o) { io::write_pattern_csv(o, pat); });
    return 0;
}

int cmd_simulate(const Flags &flags, std::ostream &out, std::ostream &err)
{
    const auto cfg = load_config(flags);
    check_validity(cfg, err);
    const auto &g = cfg.require_geometry();
    const auto rho = load_state(flags.state, g.dim());
    const auto grid = cfg.grid();
    std::vector<double> model_grid(grid);
    for (double &x : model_grid)
        x += cfg.offset_um;
    const auto pat = pattern_table(g, cfg.detector_a(), model_grid);
    auto scan = simulate_scan(rho, pat, cfg.exposure, cfg.seed);
    scan.grid = grid;
    scan.center_offset_um = 0.0;
    emit(cfg.out, out, [&](std::ostream &o) { io::write_scan_csv(o, scan); });
    return 0;
}

int cmd_reconstruct(const Flags &flags, std::ostream &out, std::ostream &err)
{
    const auto cfg = load_config(flags);
    check_validity(cfg, err);
    if (flags.scan.empty())
        throw InputError("--scan is required");
    if (!fs::exists(flags.scan))
        throw InputError("scan file '" + flags.scan + "' does not exist");
    const auto scan = io::read_scan_csv(fs::path(flags.scan));

    ReconstructOptions options;
    options.mode = cfg.mode;
    options.solve = {cfg.poisson_weights, cfg.background};
    if (cfg.offset_search_um > 0.0) {
        OffsetSearch search;
        search.halfwidth_um = cfg.offset_search_um;
        options.offset_search = search;
    }
    const auto report = reconstruct_single(scan, cfg.require_geometry(), cfg.detector_a(), options);
    for (const auto &w : report.warnings)
        err << "warning: " << w << '\n';

    print_fit(out, report);
    if (!flags.reference.empty()) {
        const auto ref = load_reference(flags.reference, report.rho.dim());
        out << "fidelity " << std::fixed << std::setprecision(6) << reference_fidelity(report.rho.matrix(), ref)
            << std::defaultfloat << '\n';
    }
    if (!cfg.out.empty())
        emit(cfg.out, out, [&](std::ostream &o) { io::write_fit_report(o, report); });
    else
        io::write_matrix(out, report.rho.matrix());
    return 0;
}

int cmd_simulate_joint(const Flags &flags, std::ostream &out, std::ostream &err)
{
    const auto cfg = load_config(flags);
    check_validity(cfg, err);
    if (cfg.out.empty())
        throw InputError("simulate-joint needs --out for the manifest path");
    const auto &g = cfg.require_geometry();
    const auto rho = load_state(flags.state.empty() ? "maxent" : flags.state, g.dim() * g.dim());
    const auto xb = cfg.xb_list_um.empty() ? default_xb_positions() : cfg.xb_list_um;
    const auto grid = cfg.grid();
    const auto set = simulate_conditional_set(rho, g, cfg.detector_a(), cfg.detector_b(), xb, grid, cfg.exposure,
                                              cfg.seed);

    const fs::path manifest_path(cfg.out);
    const fs::path dir = manifest_path.parent_path();
    const std::string stem = manifest_path.stem().string();
    io::Manifest manifest;
    if (!flags.config.empty())
        manifest.config = fs::absolute(flags.config);
    manifest.exposure = cfg.exposure;
    manifest.det_a_um = cfg.detector_a().slit_width_um;
    manifest.det_b_um = cfg.detector_b().slit_width_um;
    for (std::size_t s = 0; s < set.scans.size(); ++s) {
        std::ostringstream name;
        name << stem << "_scan" << std::setw(3) << std::setfill('0') << s << ".csv";
        const fs::path file = dir / name.str();
        emit(file.string(), out, [&](std::ostream &o) { io::write_scan_csv(o, set.scans[s]); });
        manifest.scans.push_back({name.str(), xb[s]});
    }
    emit(cfg.out, out, [&](std::ostream &o) { io::write_manifest(o, manifest); });
    out << "wrote " << set.scans.size() << " scans\n";
    return 0;
}

int cmd_reconstruct_joint(const Flags &flags, std::ostream &out, std::ostream &err)
{
    if (flags.manifest.empty())
        throw InputError("--manifest is required");
    if (!fs::exists(flags.manifest))
        throw InputError("manifest '" + flags.manifest + "' does not exist");
    Flags effective = flags;
    if (effective.config.empty()) {
        const auto manifest = io::read_manifest(flags.manifest);
        if (manifest.config.empty())
            throw InputError("--config is required (manifest names no config)");
        effective.config = manifest.config.string();
    }
    const auto cfg = load_config(effective);
    check_validity(cfg, err);
    const auto set = io::load_conditional_set(flags.manifest, cfg.require_geometry(), cfg.quad_points);

    JointOptions options;
    options.mode = cfg.mode;
    options.per_scan_scale = cfg.per_scan_scale;
    options.solve = {cfg.poisson_weights, cfg.background};
    const auto fit = reconstruct_joint(set, options);
    for (const auto &w : fit.report.warnings)
        err << "warning: " << w << '\n';

    out << "rank " << fit.rank << '\n';
    print_fit(out, fit.report);
    const auto ref = load_reference(flags.reference.empty() ? "maxent" : flags.reference, fit.report.rho.dim());
    out << "fidelity " << std::fixed << std::setprecision(6) << reference_fidelity(fit.report.rho.matrix(), ref)
        << std::defaultfloat << '\n';
    if (!cfg.out.empty())
        emit(cfg.out, out, [&](std::ostream &o) { io::write_fit_report(o, fit.report); });
    return 0;
}

int cmd_metrics(const Flags &flags, std::ostream &out, std::ostream &)
{
    if (flags.matrix.empty())
        throw InputError("--matrix is required");
    if (!fs::exists(flags.matrix))
        throw InputError("matrix file '" + flags.matrix + "' does not exist");
    const auto m = io::read_matrix(fs::path(flags.matrix));
    const double tr = m.trace().real();
    out << std::fixed << std::setprecision(6);
    if (!flags.reference.empty()) {
        const auto ref = load_reference(flags.reference, m.rows());
        out << "fidelity " << reference_fidelity(m, ref) << '\n';
    }
    out << "purity " << purity(m) << '\n';
    out << "trace " << tr << '\n';
    out << "min_eigenvalue " << min_eigenvalue(m.hermitized()) << '\n';
    out << std::defaultfloat;
    return 0;
}

int cmd_fringes(const Flags &flags, std::ostream &out, std::ostream &err)
{
    const auto cfg = load_config(flags);
    const auto &g = cfg.require_geometry();
    const Geometry focal = g.at_detector_distance(g.lens_focal());
    const auto rho = load_state(flags.state.empty() ? "maxent" : flags.state, g.dim() * g.dim());
    std::vector<double> xb = cfg.xb_list_um;
    if (xb.empty())
        for (int j = -2; j <= 2; ++j)
            xb.push_back(focal_xb_for_phase(focal, j * M_PI / 6.0));
    FringeOptions options;
    if (cfg.detector_slit_um > 0.0) {
        options.det_a = cfg.detector_a();
        options.det_b = cfg.detector_b();
    }
    const auto fringes = verification_scans(rho, focal, xb, options);
    emit(cfg.out, out, [&](std::ostream &o) {
        o << "xB_um,phase_rad,visibility,phase_defined\n";
        for (const auto &f : fringes)
            o << io::format_number(f.xb_um) << ',' << io::format_number(f.phase) << ','
              << io::format_number(f.visibility) << ',' << (f.phase_defined ? 1 : 0) << '\n';
    });
    for (const auto &f : fringes)
        if (!f.phase_defined)
            err << "warning: fringe phase undefined at xB = " << f.xb_um << " um (visibility "
                << f.visibility << ")\n";
    return 0;
}

int cmd_check(const Flags &flags, std::ostream &out, std::ostream &)
{
    const auto cfg = load_config(flags);
    const auto &g = cfg.require_geometry();
    const auto report = validity_check(g, {cfg.validity_pass_max, cfg.validity_warn_max});
    out << "level " << to_string(report.level) << '\n';
    out << "ratio " << io::format_number(report.ratio) << '\n';
    out << "fresnel_length_um " << io::format_number(report.fresnel_length_um) << '\n';
    if (g.lens_to_detector() != g.lens_focal()) {
        const auto s = derived_scales(g);
        out << "R_um " << io::format_number(s.effective_distance) << '\n';
        out << "K_per_um " << io::format_number(s.sinc_scale) << '\n';
    }
    if (!report.reason.empty())
        out << "reason " << report.reason << '\n';
    return report.level == ValidityLevel::fail ? 3 : 0;
}

} // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Single-scan tomography of spatial qudits"};
    app.require_subcommand(1);
    Flags flags;

    auto add_common = [&](CLI::App *cmd) {
        cmd->add_option("--config", flags.config, "run configuration file");
        cmd->add_option("--mode", flags.mode, "ideal|realistic");
        cmd->add_option("--seed", flags.seed, "random seed");
        cmd->add_option("--out", flags.out, "output path");
    };

    auto *patterns = app.add_subcommand("patterns", "write the pattern-function table as CSV");
    add_common(patterns);

    auto *simulate = app.add_subcommand("simulate", "simulate a counting scan for a density matrix");
    add_common(simulate);
    simulate->add_option("--state", flags.state, "density-matrix file")->required();

    auto *reconstruct = app.add_subcommand("reconstruct", "reconstruct a qudit from one scan");
    add_common(reconstruct);
    reconstruct->add_option("--scan", flags.scan, "scan CSV")->required();
    reconstruct->add_option("--reference", flags.reference, "reference state file or 'maxent'");
    reconstruct->add_option("--offset-search", flags.offset_search, "offset search half-width, um");

    auto *simulate_joint = app.add_subcommand("simulate-joint", "simulate conditional scans for a two-qudit state");
    add_common(simulate_joint);
    simulate_joint->add_option("--state", flags.state, "density-matrix file, 'maxent' or 'werner:P'");

    auto *reconstruct_joint = app.add_subcommand("reconstruct-joint", "reconstruct a two-qudit state");
    add_common(reconstruct_joint);
    reconstruct_joint->add_option("--manifest", flags.manifest, "scan manifest")->required();
    reconstruct_joint->add_option("--reference", flags.reference, "reference state file or 'maxent'");

    auto *metrics = app.add_subcommand("metrics", "fidelity, purity, trace and minimum eigenvalue");
    metrics->add_option("--matrix", flags.matrix, "density-matrix file")->required();
    metrics->add_option("--reference", flags.reference, "reference state file or 'maxent'");

    auto *fringes = app.add_subcommand("fringes", "focal-plane fringe phase against arm-B position");
    add_common(fringes);
    fringes->add_option("--state", flags.state, "two-qudit state (default maxent)");

    auto *check = app.add_subcommand("check", "report the diffraction-model validity check");
    add_common(check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*patterns)
            return cmd_patterns(flags, out, err);
        if (*simulate)
            return cmd_simulate(flags, out, err);
        if (*reconstruct)
            return cmd_reconstruct(flags, out, err);
        if (*simulate_joint)
            return cmd_simulate_joint(flags, out, err);
        if (*reconstruct_joint)
            return cmd_reconstruct_joint(flags, out, err);
        if (*metrics)
            return cmd_metrics(flags, out, err);
        if (*fringes)
            return cmd_fringes(flags, out, err);
        if (*check)
            return cmd_check(flags, out, err);
    } catch (const IdentifiabilityError &e) {
        err << "error: " << e.what() << '\n';
        err << "rank " << e.rank() << '\n';
        return e.exit_code();
    } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace sst
