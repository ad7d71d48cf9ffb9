#include "sst/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "sst/errors.hpp"

namespace sst::io {

namespace {

std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string where(const std::string &source, int line)
{
    return source + ":" + std::to_string(line) + ": ";
}

double parse_double(const std::string &text, const std::string &context)
{
    const std::string t = trim(text);
    double v = 0.0;
    const auto *first = t.data();
    const auto *last = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (t.empty() || ec != std::errc{} || ptr != last || !std::isfinite(v))
        throw InputError(context + "expected a number, got '" + t + "'");
    return v;
}

std::int64_t parse_int(const std::string &text, const std::string &context)
{
    const std::string t = trim(text);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
        throw InputError(context + "expected an integer, got '" + t + "'");
    return v;
}

std::uint64_t parse_uint(const std::string &text, const std::string &context)
{
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
        throw InputError(context + "expected a non-negative integer, got '" + t + "'");
    return v;
}

bool parse_bool(const std::string &text, const std::string &context)
{
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes")
        return true;
    if (t == "false" || t == "0" || t == "no")
        return false;
    throw InputError(context + "expected true/false, got '" + t + "'");
}

std::vector<double> parse_list(const std::string &text, const std::string &context)
{
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        if (trim(item).empty())
            continue;
        out.push_back(parse_double(item, context));
    }
    return out;
}

std::vector<std::string> split(const std::string &s, char sep)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep))
        out.push_back(item);
    if (!s.empty() && s.back() == sep)
        out.emplace_back();
    return out;
}

const std::set<std::string> &geometry_keys()
{
    static const std::set<std::string> keys{"lambda_nm", "slit_width_um", "slit_pitch_um", "slit_count",
                                            "slit_offsets_um", "f_mm", "L_mm", "z_mm"};
    return keys;
}

const std::set<std::string> &run_keys()
{
    static const std::set<std::string> keys{
        "detector_slit_um", "detector_slit_b_um", "quad_points",     "grid_min_um",       "grid_max_um",
        "grid_step_um",     "exposure",           "seed",            "mode",              "xB_list_um",
        "offset_um",        "offset_search_um",   "poisson_weights", "background",        "per_scan_scale",
        "validity_pass_max", "validity_warn_max", "out"};
    return keys;
}

std::ifstream open_input(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open '" + path.string() + "'");
    return in;
}

} // namespace

std::string format_number(double v)
{
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

KeyValues parse_key_values(std::istream &in, const std::string &source)
{
    KeyValues kv;
    kv.source = source;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw InputError(where(source, number) + "expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (key.empty())
            throw InputError(where(source, number) + "empty key");
        if (kv.entries.count(key) && key != "scan")
            throw InputError(where(source, number) + "duplicate key '" + key + "'");
        kv.entries[key] = {value, number};
    }
    return kv;
}

KeyValues read_key_values(const std::filesystem::path &path)
{
    auto in = open_input(path);
    return parse_key_values(in, path.string());
}

Geometry geometry_from_keys(const KeyValues &kv)
{
    auto get = [&](const std::string &key) -> const KeyValues::Entry & {
        const auto it = kv.entries.find(key);
        if (it == kv.entries.end())
            throw InputError(kv.source + ": missing geometry key '" + key + "'");
        return it->second;
    };
    auto number = [&](const std::string &key) {
        const auto &e = get(key);
        return parse_double(e.value, where(kv.source, e.line) + key + ": ");
    };

    const double lambda_um = number("lambda_nm") * 1e-3;
    const double a = number("slit_width_um");
    const double f = number("f_mm") * 1e3;
    const double l = number("L_mm") * 1e3;
    const double z = number("z_mm") * 1e3;

    const bool has_offsets = kv.entries.count("slit_offsets_um") > 0;
    const bool has_pitch = kv.entries.count("slit_pitch_um") > 0;
    if (has_offsets == has_pitch)
        throw InputError(kv.source + ": give exactly one of slit_pitch_um or slit_offsets_um");
    if (has_offsets) {
        if (kv.entries.count("slit_count"))
            throw InputError(kv.source + ": slit_count only applies with slit_pitch_um");
        const auto &e = get("slit_offsets_um");
        return Geometry(lambda_um, a, parse_list(e.value, where(kv.source, e.line) + "slit_offsets_um: "), f, l, z);
    }
    std::size_t count = 3;
    if (const auto it = kv.entries.find("slit_count"); it != kv.entries.end())
        count = parse_uint(it->second.value, where(kv.source, it->second.line) + "slit_count: ");
    if (count == 0)
        throw InputError(kv.source + ": slit_count must be positive");
    return Geometry::with_pitch(lambda_um, a, number("slit_pitch_um"), count, f, l, z);
}

Geometry read_geometry(const std::filesystem::path &path)
{
    const auto kv = read_key_values(path);
    for (const auto &[key, entry] : kv.entries)
        if (!geometry_keys().count(key))
            throw InputError(where(kv.source, entry.line) + "unknown key '" + key + "'");
    return geometry_from_keys(kv);
}

const Geometry &RunConfig::require_geometry() const
{
    if (!geometry)
        throw InputError("configuration has no geometry keys");
    return *geometry;
}

DetectorSpec RunConfig::detector_a() const
{
    DetectorSpec det{detector_slit_um, quad_points};
    det.validate();
    return det;
}

DetectorSpec RunConfig::detector_b() const
{
    DetectorSpec det{detector_slit_b_um.value_or(detector_slit_um), quad_points};
    det.validate();
    return det;
}

std::vector<double> RunConfig::grid() const
{
    return uniform_grid(grid_min_um, grid_max_um, grid_step_um);
}

RunConfig run_config_from_keys(const KeyValues &kv)
{
    RunConfig cfg;
    bool any_geometry = false;
    for (const auto &[key, entry] : kv.entries) {
        if (geometry_keys().count(key)) {
            any_geometry = true;
            continue;
        }
        if (!run_keys().count(key))
            throw InputError(where(kv.source, entry.line) + "unknown key '" + key + "'");
        const std::string ctx = where(kv.source, entry.line) + key + ": ";
        const std::string &v = entry.value;
        if (key == "detector_slit_um")
            cfg.detector_slit_um = parse_double(v, ctx);
        else if (key == "detector_slit_b_um")
            cfg.detector_slit_b_um = parse_double(v, ctx);
        else if (key == "quad_points")
            cfg.quad_points = parse_uint(v, ctx);
        else if (key == "grid_min_um")
            cfg.grid_min_um = parse_double(v, ctx);
        else if (key == "grid_max_um")
            cfg.grid_max_um = parse_double(v, ctx);
        else if (key == "grid_step_um")
            cfg.grid_step_um = parse_double(v, ctx);
        else if (key == "exposure")
            cfg.exposure = parse_double(v, ctx);
        else if (key == "seed")
            cfg.seed = parse_uint(v, ctx);
        else if (key == "mode")
            cfg.mode = parse_mode(trim(v));
        else if (key == "xB_list_um")
            cfg.xb_list_um = parse_list(v, ctx);
        else if (key == "offset_um")
            cfg.offset_um = parse_double(v, ctx);
        else if (key == "offset_search_um")
            cfg.offset_search_um = parse_double(v, ctx);
        else if (key == "poisson_weights")
            cfg.poisson_weights = parse_bool(v, ctx);
        else if (key == "background")
            cfg.background = parse_bool(v, ctx);
        else if (key == "per_scan_scale")
            cfg.per_scan_scale = parse_bool(v, ctx);
        else if (key == "validity_pass_max")
            cfg.validity_pass_max = parse_double(v, ctx);
        else if (key == "validity_warn_max")
            cfg.validity_warn_max = parse_double(v, ctx);
        else if (key == "out")
            cfg.out = trim(v);
    }
    if (any_geometry)
        cfg.geometry = geometry_from_keys(kv);
    if (!(cfg.grid_min_um < cfg.grid_max_um))
        throw InputError(kv.source + ": grid_min_um must be below grid_max_um");
    if (!(cfg.grid_step_um > 0.0))
        throw InputError(kv.source + ": grid_step_um must be positive");
    if (!(cfg.exposure > 0.0))
        throw InputError(kv.source + ": exposure must be positive");
    if (cfg.offset_search_um < 0.0)
        throw InputError(kv.source + ": offset_search_um must be non-negative");
    return cfg;
}

RunConfig read_run_config(const std::filesystem::path &path)
{
    auto cfg = run_config_from_keys(read_key_values(path));
    cfg.base_dir = path.parent_path();
    return cfg;
}

void write_pattern_csv(std::ostream &out, const PatternSet &pat)
{
    const auto names = channel_names(pat.dim());
    out << "x_um";
    for (const auto &n : names)
        out << ',' << n;
    out << '\n';
    for (std::size_t k = 0; k < pat.size(); ++k) {
        out << format_number(pat.grid()[k]);
        for (double v : pat.channels(k))
            out << ',' << format_number(v);
        out << '\n';
    }
}

void write_scan_csv(std::ostream &out, const ScanRecord &scan)
{
    out << "# exposure=" << format_number(scan.exposure) << '\n';
    if (scan.seed)
        out << "# seed=" << *scan.seed << '\n';
    if (scan.center_offset_um != 0.0)
        out << "# offset_um=" << format_number(scan.center_offset_um) << '\n';
    if (scan.context) {
        out << "# xB_um=" << format_number(scan.context->x_um) << '\n';
        out << "# bB_um=" << format_number(scan.context->slit_width_um) << '\n';
    }
    out << "x_um,counts\n";
    for (std::size_t k = 0; k < scan.grid.size(); ++k)
        out << format_number(scan.grid[k]) << ',' << scan.counts[k] << '\n';
}

ScanRecord read_scan_csv(std::istream &in, const std::string &source)
{
    ScanRecord scan;
    std::optional<double> xb;
    std::optional<double> bb;
    bool header = false;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string body = trim(line);
        if (body.empty())
            continue;
        if (body.front() == '#') {
            const std::string meta = trim(body.substr(1));
            const auto eq = meta.find('=');
            if (eq == std::string::npos)
                continue;
            const std::string key = trim(meta.substr(0, eq));
            const std::string value = meta.substr(eq + 1);
            const std::string ctx = where(source, number) + key + ": ";
            if (key == "exposure")
                scan.exposure = parse_double(value, ctx);
            else if (key == "seed")
                scan.seed = parse_uint(value, ctx);
            else if (key == "offset_um")
                scan.center_offset_um = parse_double(value, ctx);
            else if (key == "xB_um")
                xb = parse_double(value, ctx);
            else if (key == "bB_um")
                bb = parse_double(value, ctx);
            continue;
        }
        if (!header) {
            if (body != "x_um,counts")
                throw InputError(where(source, number) + "expected header 'x_um,counts'");
            header = true;
            continue;
        }
        const auto fields = split(body, ',');
        if (fields.size() != 2)
            throw InputError(where(source, number) + "expected two comma-separated fields");
        const std::string ctx = where(source, number);
        scan.grid.push_back(parse_double(fields[0], ctx + "x_um: "));
        const auto c = parse_int(fields[1], ctx + "counts: ");
        if (c < 0)
            throw InputError(ctx + "negative count");
        scan.counts.push_back(c);
    }
    if (!header)
        throw InputError(source + ": missing 'x_um,counts' header");
    if (xb)
        scan.context = ArmBContext{*xb, bb.value_or(0.0)};
    scan.validate();
    return scan;
}

ScanRecord read_scan_csv(const std::filesystem::path &path)
{
    auto in = open_input(path);
    return read_scan_csv(in, path.string());
}

void write_matrix(std::ostream &out, const ComplexMatrix &m)
{
    out << "dim " << m.rows() << '\n';
    for (int part = 0; part < 2; ++part) {
        out << (part == 0 ? "re" : "im") << '\n';
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.cols(); ++j) {
                const double v = part == 0 ? m(i, j).real() : m(i, j).imag();
                out << (j ? " " : "") << format_number(v == 0.0 ? 0.0 : v);
            }
            out << '\n';
        }
    }
}

ComplexMatrix read_matrix(std::istream &in, const std::string &source)
{
    std::vector<std::pair<int, std::string>> lines;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (!body.empty())
            lines.emplace_back(number, body);
    }

    std::optional<std::size_t> dim;
    ComplexMatrix m;
    bool have_re = false;
    bool have_im = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto &[ln, body] = lines[i];
        std::istringstream words(body);
        std::string key;
        words >> key;
        if (key == "dim") {
            std::string v;
            words >> v;
            const auto d = parse_uint(v, where(source, ln) + "dim: ");
            if (d == 0 || d > 64)
                throw InputError(where(source, ln) + "dim must be between 1 and 64");
            dim = d;
            m = ComplexMatrix(d, d);
        } else if (key == "re" || key == "im") {
            if (!dim)
                throw InputError(where(source, ln) + "'" + key + "' block before 'dim'");
            for (std::size_t r = 0; r < *dim; ++r) {
                if (++i >= lines.size())
                    throw InputError(source + ": '" + key + "' block ends early");
                std::istringstream row(lines[i].second);
                std::vector<double> values;
                std::string tok;
                while (row >> tok)
                    values.push_back(parse_double(tok, where(source, lines[i].first)));
                if (values.size() != *dim)
                    throw InputError(where(source, lines[i].first) + "expected " + std::to_string(*dim) + " values");
                for (std::size_t c = 0; c < *dim; ++c) {
                    if (key == "re")
                        m(r, c).real(values[c]);
                    else
                        m(r, c).imag(values[c]);
                }
            }
            (key == "re" ? have_re : have_im) = true;
        }
        // Other scalar lines (fit-report fields) are ignored here.
    }
    if (!dim || !have_re)
        throw InputError(source + ": matrix file needs 'dim' and an 're' block");
    (void)have_im;
    return m;
}

ComplexMatrix read_matrix(const std::filesystem::path &path)
{
    auto in = open_input(path);
    return read_matrix(in, path.string());
}

void write_fit_report(std::ostream &out, const FitReport &report)
{
    out << "mode " << to_string(report.mode) << '\n';
    out << "scale " << format_number(report.scale) << '\n';
    out << "background " << format_number(report.background) << '\n';
    out << "rss_pre " << format_number(report.rss_pre) << '\n';
    out << "rss_post " << format_number(report.rss_post) << '\n';
    out << "condition " << format_number(report.condition) << '\n';
    out << "offset_um " << format_number(report.offset_um) << '\n';
    out << "projection_distance " << format_number(report.projection_distance) << '\n';
    write_matrix(out, report.rho.matrix());
}

void write_manifest(std::ostream &out, const Manifest &manifest)
{
    out << "# conditional scan manifest\n";
    if (!manifest.config.empty())
        out << "config = " << manifest.config.string() << '\n';
    out << "exposure = " << format_number(manifest.exposure) << '\n';
    out << "bA_um = " << format_number(manifest.det_a_um) << '\n';
    out << "bB_um = " << format_number(manifest.det_b_um) << '\n';
    for (const auto &e : manifest.scans)
        out << "scan = " << e.file.string() << ' ' << format_number(e.xb_um) << '\n';
}

Manifest read_manifest(const std::filesystem::path &path)
{
    auto in = open_input(path);
    Manifest manifest;
    std::string line;
    int number = 0;
    const std::string source = path.string();
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw InputError(where(source, number) + "expected 'key = value'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        const std::string ctx = where(source, number) + key + ": ";
        if (key == "config") {
            manifest.config = value;
        } else if (key == "exposure") {
            manifest.exposure = parse_double(value, ctx);
        } else if (key == "bA_um") {
            manifest.det_a_um = parse_double(value, ctx);
        } else if (key == "bB_um") {
            manifest.det_b_um = parse_double(value, ctx);
        } else if (key == "scan") {
            std::istringstream words(value);
            std::string file;
            std::string xb;
            std::string extra;
            if (!(words >> file >> xb) || (words >> extra))
                throw InputError(ctx + "expected '<file> <xB_um>'");
            manifest.scans.push_back({file, parse_double(xb, ctx)});
        } else {
            throw InputError(where(source, number) + "unknown key '" + key + "'");
        }
    }
    if (manifest.scans.empty())
        throw InputError(source + ": manifest lists no scans");
    const auto dir = path.parent_path();
    for (auto &e : manifest.scans)
        if (e.file.is_relative())
            e.file = dir / e.file;
    if (!manifest.config.empty() && manifest.config.is_relative())
        manifest.config = dir / manifest.config;
    return manifest;
}

ConditionalScanSet load_conditional_set(const std::filesystem::path &manifest_path, const Geometry &g,
                                        std::size_t quad_points)
{
    const Manifest manifest = read_manifest(manifest_path);
    ConditionalScanSet set{{}, g, DetectorSpec{manifest.det_a_um, quad_points},
                           DetectorSpec{manifest.det_b_um, quad_points}, manifest.exposure};
    for (const auto &e : manifest.scans) {
        if (!std::filesystem::exists(e.file))
            throw InputError(manifest_path.string() + ": scan file '" + e.file.string() + "' does not exist");
        ScanRecord scan = read_scan_csv(e.file);
        scan.context = ArmBContext{e.xb_um, manifest.det_b_um};
        set.scans.push_back(std::move(scan));
    }
    set.validate();
    return set;
}

} // namespace sst::io
