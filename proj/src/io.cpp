#include "bifract/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace bifract::io {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

[[noreturn]] void parse_fail(const std::string& source, int line, const std::string& what) {
    throw Error(ErrorCode::ParseError, source + ":" + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& field, const std::string& source, int line) {
    double v = 0;
    const char* first = field.data();
    const char* last = first + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || field.empty())
        parse_fail(source, line, "'" + field + "' is not a decimal number");
    return v;
}

Eigen::VectorXd column(const Table& t, std::size_t c) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = t.rows[i][c];
    return out;
}

// Violation indices count data rows from 0; report them as file lines.
[[noreturn]] void rethrow_with_lines(const ValidationError& e, const Table& t, const std::string& source) {
    std::vector<Violation> located;
    for (const auto& v : e.violations()) {
        Violation w = v;
        const int line = v.index < t.lines.size() ? t.lines[v.index] : 0;
        w.message = source + ":" + std::to_string(line) + ": " + v.message;
        located.push_back(std::move(w));
    }
    throw ValidationError(std::move(located));
}

void require_header(const Table& t, const std::vector<std::string>& want, const std::string& source) {
    if (t.header != want) {
        std::string expected;
        for (const auto& w : want) expected += (expected.empty() ? "" : ",") + w;
        parse_fail(source, 1, "expected header '" + expected + "'");
    }
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Table parse_table(std::istream& in, const std::string& source) {
    Table t;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            parse_fail(source, lineno,
                       "expected " + std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
        std::vector<double> row;
        for (const auto& f : fields) row.push_back(parse_number(f, source, lineno));
        t.rows.push_back(std::move(row));
        t.lines.push_back(lineno);
    }
    if (!have_header) parse_fail(source, 1, "empty input");
    return t;
}

Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    return parse_table(in, path);
}

InputKind detect_kind(const Table& table, const std::string& source) {
    if (table.header == std::vector<std::string>{"x", "y", "s"}) return InputKind::Problem;
    if (table.header == std::vector<std::string>{"x", "ylow", "yhigh"}) return InputKind::Chain;
    parse_fail(source, 1, "header must be 'x,y,s' or 'x,ylow,yhigh'");
}

Problem problem_from_table(const Table& table, const std::string& source) {
    require_header(table, {"x", "y", "s"}, source);
    try {
        return Problem(column(table, 0), column(table, 1), column(table, 2));
    } catch (const ValidationError& e) {
        rethrow_with_lines(e, table, source);
    }
}

Chain chain_from_table(const Table& table, const std::string& source) {
    require_header(table, {"x", "ylow", "yhigh"}, source);
    try {
        return Chain(column(table, 0), column(table, 1), column(table, 2));
    } catch (const ValidationError& e) {
        rethrow_with_lines(e, table, source);
    }
}

Problem read_problem(const std::string& path) { return problem_from_table(read_table(path), path); }
Chain read_chain(const std::string& path) { return chain_from_table(read_table(path), path); }

void write_problem(std::ostream& out, const Problem& p) {
    out << "x,y,s\n";
    for (int j = 0; j <= p.intervals(); ++j)
        out << format_double(p.knot(j)) << ',' << format_double(p.value(j)) << ',' << format_double(p.scaling(j))
            << '\n';
}

void write_chain(std::ostream& out, const Chain& chain) {
    out << "x,ylow,yhigh,s\n";
    for (int j = 0; j <= chain.intervals(); ++j)
        out << format_double(chain.knots()[j]) << ',' << format_double(chain.lower()[j]) << ','
            << format_double(chain.upper()[j]) << ',' << format_double(chain.scaling(j)) << '\n';
}

void write_samples(std::ostream& out, const Eigen::VectorXd& xs, const Eigen::VectorXd& fs) {
    out << "x,f\n";
    for (Eigen::Index i = 0; i < xs.size(); ++i) out << format_double(xs[i]) << ',' << format_double(fs[i]) << '\n';
}

void write_points(std::ostream& out, const Eigen::Matrix<double, Eigen::Dynamic, 2>& points) {
    out << "x,y\n";
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        out << format_double(points(i, 0)) << ',' << format_double(points(i, 1)) << '\n';
}

void write_pgm(std::ostream& out, const Raster& raster) {
    out << "P5\n" << raster.width() << ' ' << raster.height() << "\n255\n";
    std::string row(static_cast<std::size_t>(raster.width()), '\0');
    for (int r = 0; r < raster.height(); ++r) {
        for (int c = 0; c < raster.width(); ++c) row[static_cast<std::size_t>(c)] = raster.get(c, r) ? '\0' : '\xff';
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
}

Raster read_pgm(std::istream& in, double xmin, double xmax, double ymin, double ymax) {
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) throw Error(ErrorCode::ParseError, "not an 8-bit P5 image");
    in.get();
    Raster raster(w, h, xmin, xmax, ymin, ymax);
    std::string row(static_cast<std::size_t>(w), '\0');
    for (int r = 0; r < h; ++r) {
        if (!in.read(row.data(), w)) throw Error(ErrorCode::ParseError, "truncated P5 image");
        for (int c = 0; c < w; ++c)
            if (static_cast<unsigned char>(row[static_cast<std::size_t>(c)]) < 128) raster.set(c, r);
    }
    return raster;
}

void write_svg_raster(std::ostream& out, const Raster& raster) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << raster.width() << "\" height=\"" << raster.height()
        << "\" viewBox=\"0 0 " << raster.width() << ' ' << raster.height() << "\" shape-rendering=\"crispEdges\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g fill=\"black\">\n";
    for (int c = 0; c < raster.width(); ++c) {
        int r = 0;
        while (r < raster.height()) {
            if (!raster.get(c, r)) {
                ++r;
                continue;
            }
            const int start = r;
            while (r < raster.height() && raster.get(c, r)) ++r;
            out << "<rect x=\"" << c << "\" y=\"" << start << "\" width=\"1\" height=\"" << r - start << "\"/>\n";
        }
    }
    out << "</g>\n</svg>\n";
}

void write_svg_polyline(std::ostream& out, const Eigen::VectorXd& xs, const Eigen::VectorXd& ys, int width,
                        int height) {
    const double x0 = xs.minCoeff(), x1 = xs.maxCoeff();
    double y0 = ys.minCoeff(), y1 = ys.maxCoeff();
    if (y1 == y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double pad = 20;
    auto px = [&](double x) { return pad + (x - x0) / (x1 - x0) * (width - 2 * pad); };
    auto py = [&](double y) { return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad); };
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"0.5\" points=\"";
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f,%.3f ", px(xs[i]), py(ys[i]));
        out << buf;
    }
    out << "\"/>\n</svg>\n";
}

void write_dimension_csv(std::ostream& out, const DimensionReport& report) {
    out << "r,N_r,slope_partial\n";
    const auto partial = report.partial_slopes();
    for (std::size_t i = 0; i < report.totals.size(); ++i) {
        out << report.resolutions[i] << ',' << report.totals[i] << ',';
        if (!std::isnan(partial[i])) out << format_double(partial[i]);
        out << '\n';
    }
}

void write_columns_csv(std::ostream& out, const DimensionReport& report) {
    out << "r,k,N_rk\n";
    for (std::size_t i = 0; i < report.columns.size(); ++i)
        for (std::size_t k = 0; k < report.columns[i].size(); ++k)
            out << report.resolutions[i] << ',' << k + 1 << ',' << report.columns[i][k] << '\n';
}

void write_loglog_svg(std::ostream& out, const DimensionReport& report) {
    const int width = 640, height = 480;
    const double pad = 50;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < report.totals.size(); ++i) {
        xs.push_back(report.resolutions[i] * std::log(double(report.maps)));
        ys.push_back(std::log(double(report.totals[i])));
    }
    const double xa = *std::min_element(xs.begin(), xs.end()), xb = *std::max_element(xs.begin(), xs.end());
    double ya = *std::min_element(ys.begin(), ys.end()), yb = *std::max_element(ys.begin(), ys.end());
    const double xspan = xb > xa ? xb - xa : 1.0;
    if (!(yb > ya)) yb = ya + 1.0;
    auto px = [&](double x) { return pad + (x - xa) / xspan * (width - 2 * pad); };
    auto py = [&](double y) { return height - pad - (y - ya) / (yb - ya) * (height - 2 * pad); };
    char buf[160];
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", pad,
                  double(height) - pad, double(width) - pad, double(height) - pad);
    out << buf;
    std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n", pad, pad, pad,
                  double(height) - pad);
    out << buf;
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">r log N</text>\n"
        << "<text x=\"14\" y=\"" << height / 2 << "\" transform=\"rotate(-90 14 " << height / 2
        << ")\" text-anchor=\"middle\">log N(r)</text>\n";
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(xs[i]), py(ys[i]));
        out << buf;
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"steelblue\"/>\n", px(xs[i]),
                      py(ys[i]));
        out << buf;
    }
    const auto line_y = [&](double x) { return report.fit.intercept + report.fit.slope * x; };
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"firebrick\" "
                  "stroke-dasharray=\"4 3\"/>\n",
                  px(xa), py(line_y(xa)), px(xb), py(line_y(xb)));
    out << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\">slope %.5f</text>\n", pad + 10, pad + 10,
                  report.fit.slope);
    out << buf << "</svg>\n";
}

std::ofstream open_output(const std::string& path, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::openmode{});
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    return out;
}

} // namespace bifract::io
