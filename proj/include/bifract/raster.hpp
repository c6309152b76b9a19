#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "bifract/core.hpp"

namespace bifract {

/// Binary image over [xmin, xmax] x [ymin, ymax]. Row 0 is the top row (ymax).
class Raster {
public:
    Raster(int width, int height, double xmin, double xmax, double ymin, double ymax)
        : width_(width), height_(height), xmin_(xmin), xmax_(xmax), ymin_(ymin), ymax_(ymax),
          pixels_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
        if (width <= 0 || height <= 0 || !(xmax > xmin) || !(ymax > ymin))
            throw Error(ErrorCode::SizeMismatch, "raster needs positive size and non-empty ranges");
    }

    /// Same geometry, all pixels clear.
    Raster blank() const { return Raster(width_, height_, xmin_, xmax_, ymin_, ymax_); }

    int width() const { return width_; }
    int height() const { return height_; }
    double xmin() const { return xmin_; }
    double xmax() const { return xmax_; }
    double ymin() const { return ymin_; }
    double ymax() const { return ymax_; }
    double pixel_width() const { return (xmax_ - xmin_) / width_; }
    double pixel_height() const { return (ymax_ - ymin_) / height_; }

    bool get(int col, int row) const { return pixels_[index(col, row)] != 0; }
    void set(int col, int row) { pixels_[index(col, row)] = 1; }

    const std::vector<std::uint8_t>& pixels() const { return pixels_; }

    std::size_t count() const {
        return static_cast<std::size_t>(std::count(pixels_.begin(), pixels_.end(), std::uint8_t{1}));
    }

    /// Sets every pixel whose closed square contains (x, y). Returns false when
    /// the point lies outside the raster.
    bool mark(double x, double y) {
        const double fx = (x - xmin_) / (xmax_ - xmin_) * width_;
        const double fy = (ymax_ - y) / (ymax_ - ymin_) * height_;
        if (!(fx >= 0.0 && fx <= width_ && fy >= 0.0 && fy <= height_)) return false;
        const int c = std::min(static_cast<int>(fx), width_ - 1);
        const int r = std::min(static_cast<int>(fy), height_ - 1);
        const bool on_col_edge = fx == std::floor(fx) && fx > 0.0 && fx < width_;
        const bool on_row_edge = fy == std::floor(fy) && fy > 0.0 && fy < height_;
        set(c, r);
        if (on_col_edge) set(c - 1, r);
        if (on_row_edge) set(c, r - 1);
        if (on_col_edge && on_row_edge) set(c - 1, r - 1);
        return true;
    }

    void merge(const Raster& other) {
        for (std::size_t i = 0; i < pixels_.size(); ++i) pixels_[i] |= other.pixels_[i];
    }

    bool operator==(const Raster& other) const = default;

private:
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
    }

    int width_;
    int height_;
    double xmin_, xmax_, ymin_, ymax_;
    std::vector<std::uint8_t> pixels_;
};

/// Chebyshev-radius dilation.
inline Raster dilate(const Raster& in, int radius = 1) {
    Raster out = in.blank();
    for (int r = 0; r < in.height(); ++r) {
        for (int c = 0; c < in.width(); ++c) {
            if (!in.get(c, r)) continue;
            for (int dr = -radius; dr <= radius; ++dr) {
                for (int dc = -radius; dc <= radius; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr >= 0 && rr < in.height() && cc >= 0 && cc < in.width()) out.set(cc, rr);
                }
            }
        }
    }
    return out;
}

/// Number of set pixels of `a` not covered by `b`.
inline std::size_t uncovered(const Raster& a, const Raster& b) {
    std::size_t misses = 0;
    for (std::size_t i = 0; i < a.pixels().size(); ++i)
        if (a.pixels()[i] && !b.pixels()[i]) ++misses;
    return misses;
}

struct RasterAgreement {
    std::size_t a_outside_dilated_b = 0;
    std::size_t b_outside_dilated_a = 0;
    bool agree() const { return a_outside_dilated_b == 0 && b_outside_dilated_a == 0; }
};

/// Symmetric comparison up to a dilation of `radius` pixels.
inline RasterAgreement compare_dilated(const Raster& a, const Raster& b, int radius = 1) {
    return {uncovered(a, dilate(b, radius)), uncovered(b, dilate(a, radius))};
}

template <typename Derived>
void rasterize_points(const Eigen::MatrixBase<Derived>& points, Raster& raster) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        if (!raster.mark(static_cast<double>(points(i, 0)), static_cast<double>(points(i, 1)))) {
            std::ostringstream os;
            os << "point (" << points(i, 0) << ", " << points(i, 1) << ") lies outside the raster";
            throw Error(ErrorCode::StripTooSmall, os.str());
        }
    }
}

/// Marks a polyline, sampling each segment at least four times per pixel.
template <typename Scalar>
void rasterize_polyline(const VectorX<Scalar>& xs, const VectorX<Scalar>& ys, Raster& raster) {
    for (Eigen::Index i = 0; i + 1 < xs.size(); ++i) {
        const double dx = std::abs(double(xs[i + 1] - xs[i])) / raster.pixel_width();
        const double dy = std::abs(double(ys[i + 1] - ys[i])) / raster.pixel_height();
        const int steps = std::max(1, static_cast<int>(std::ceil(4.0 * std::max(dx, dy))));
        for (int k = 0; k <= steps; ++k) {
            const double t = double(k) / steps;
            const double x = std::lerp(double(xs[i]), double(xs[i + 1]), t);
            const double y = std::lerp(double(ys[i]), double(ys[i + 1]), t);
            if (!raster.mark(x, y))
                throw Error(ErrorCode::StripTooSmall, "polyline leaves the raster");
        }
    }
}

} // namespace bifract
