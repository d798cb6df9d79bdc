#include "htcp/text_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace htcp {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw GridError("parse_double: invalid number \"" + std::string(s) + "\"");
    return v;
}

std::string to_csv(const GridDensity& d) {
    std::string out = "x_left,value\n";
    for (Eigen::Index i = 0; i < d.cells(); ++i) {
        out += format_double(d.left_edge(i));
        out += ',';
        out += format_double(d.values[i]);
        out += '\n';
    }
    out += "# origin=" + format_double(d.origin) + " step=" + format_double(d.step) +
           " defect=" + format_double(d.defect) + "\n";
    return out;
}

GridDensity grid_from_csv(const std::string& text) {
    GridDensity d;
    std::vector<double> values;
    bool have_meta = false, have_header = false;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string tok;
            while (meta >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
                if (key == "origin")
                    d.origin = parse_double(val);
                else if (key == "step")
                    d.step = parse_double(val);
                else if (key == "defect")
                    d.defect = parse_double(val);
                else
                    throw GridError("grid csv: unknown metadata key \"" + key + "\"");
            }
            have_meta = true;
            continue;
        }
        if (!have_header) {
            if (line != "x_left,value") throw GridError("grid csv: missing x_left,value header");
            have_header = true;
            continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos) throw GridError("grid csv: malformed row");
        values.push_back(parse_double(std::string_view(line).substr(comma + 1)));
    }
    if (!have_header || !have_meta) throw GridError("grid csv: incomplete file");
    d.values = Eigen::Map<const Eigen::ArrayXd>(values.data(),
                                                static_cast<Eigen::Index>(values.size()));
    return d;
}

std::string ratio_samples_csv(const TailRatioReport& rep) {
    std::string out = "x,ratio\n";
    for (const auto& s : rep.samples) {
        out += format_double(s.x);
        out += ',';
        out += format_double(s.ratio);
        out += '\n';
    }
    return out;
}

std::string ecdf_csv(const McSupremumResult& mc, std::size_t max_rows) {
    std::string out = "x,cdf\n";
    const std::size_t n = mc.maxima.size();
    if (n == 0) return out;
    const std::size_t rows = std::min(n, std::max<std::size_t>(max_rows, 2));
    for (std::size_t r = 0; r < rows; ++r) {
        // Evenly spaced order statistics, endpoints included.
        std::size_t i = (rows == 1) ? n - 1 : (r * (n - 1)) / (rows - 1);
        out += format_double(mc.maxima[i]);
        out += ',';
        out += format_double(static_cast<double>(i + 1) / static_cast<double>(n));
        out += '\n';
    }
    return out;
}

nlohmann::json window_json(const TailWindow& w) {
    return {{"x_lo", w.x_lo},
            {"x_hi", w.x_hi},
            {"n_points", w.n_points},
            {"spacing", w.spacing == TailWindow::Spacing::geometric ? "geometric" : "arithmetic"}};
}

namespace {
nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}
} // namespace

nlohmann::json report_json(const TailRatioReport& rep) {
    return {{"quantity", rep.quantity},
            {"window", window_json(rep.window)},
            {"limit_estimate", finite_or_null(rep.limit_estimate)},
            {"max_abs_dev", finite_or_null(rep.max_abs_dev)},
            {"trend_ok", rep.trend_ok},
            {"window_valid", rep.window_valid},
            {"excluded", rep.excluded},
            {"samples_kept", rep.samples.size()},
            {"expected_limit", rep.expected_limit},
            {"rel_tol", rep.rel_tol},
            {"pass", rep.pass},
            {"verdict", rep.verdict}};
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw GridError("cannot open for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw GridError("short write: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw GridError("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace htcp
