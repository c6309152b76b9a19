#pragma once

#include <Eigen/Dense>

#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include "bifract/biaffine.hpp"
#include "bifract/core.hpp"
#include "bifract/dimension.hpp"
#include "bifract/raster.hpp"

namespace bifract::io {

/// Shortest text that round-trips: 17 significant digits.
std::string format_double(double v);

/// A CSV table: header names and numeric rows. Line numbers are 1-based and
/// count the header.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<int> lines;
};

Table parse_table(std::istream& in, const std::string& source);
Table read_table(const std::string& path);

enum class InputKind { Problem, Chain };

/// `x,y,s` is a problem, `x,ylow,yhigh` a chain.
InputKind detect_kind(const Table& table, const std::string& source);

/// Validation failures are rethrown with the offending CSV line in the message.
Problem problem_from_table(const Table& table, const std::string& source);
Chain chain_from_table(const Table& table, const std::string& source);

Problem read_problem(const std::string& path);
Chain read_chain(const std::string& path);

void write_problem(std::ostream& out, const Problem& p);
/// Emits the derived scaling column next to the chain.
void write_chain(std::ostream& out, const Chain& chain);

void write_samples(std::ostream& out, const Eigen::VectorXd& xs, const Eigen::VectorXd& fs);
void write_points(std::ostream& out, const Eigen::Matrix<double, Eigen::Dynamic, 2>& points);

/// Binary PGM (P5), set pixels black on white, top row first.
void write_pgm(std::ostream& out, const Raster& raster);
Raster read_pgm(std::istream& in, double xmin, double xmax, double ymin, double ymax);

/// Set pixels as vertical runs of unit rectangles.
void write_svg_raster(std::ostream& out, const Raster& raster);
void write_svg_polyline(std::ostream& out, const Eigen::VectorXd& xs, const Eigen::VectorXd& ys, int width = 800,
                        int height = 600);

/// Rows `r,N_r,slope_partial`.
void write_dimension_csv(std::ostream& out, const DimensionReport& report);
/// Rows `r,k,N_rk`.
void write_columns_csv(std::ostream& out, const DimensionReport& report);
/// log N(r) against r log N with the fitted line.
void write_loglog_svg(std::ostream& out, const DimensionReport& report);

/// Opens for writing or throws IoError.
std::ofstream open_output(const std::string& path, bool binary = false);

} // namespace bifract::io
