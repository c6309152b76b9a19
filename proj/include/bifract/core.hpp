#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bifract/error.hpp"

namespace bifract {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

/// Checks the hypotheses on interpolation data: at least two knots, strictly
/// increasing abscissae, finite entries and every |s_j| < 1. Returns one
/// violation per offending entry; an empty result means the data is usable.
template <typename Scalar>
std::vector<Violation> validate(const VectorX<Scalar>& knots, const VectorX<Scalar>& values,
                                const VectorX<Scalar>& scalings) {
    std::vector<Violation> out;
    if (knots.size() != values.size() || knots.size() != scalings.size()) {
        std::ostringstream os;
        os << "knots/values/scalings sizes differ (" << knots.size() << ", " << values.size()
           << ", " << scalings.size() << ")";
        out.push_back({ErrorCode::SizeMismatch, 0, os.str()});
        return out;
    }
    if (knots.size() < 2) {
        out.push_back({ErrorCode::TooFewKnots, 0, "need at least two knots (N >= 1)"});
        return out;
    }
    for (Eigen::Index j = 0; j < knots.size(); ++j) {
        if (!std::isfinite(knots[j]) || !std::isfinite(values[j]) || !std::isfinite(scalings[j])) {
            std::ostringstream os;
            os << "entry " << j << " is not finite";
            out.push_back({ErrorCode::NonFinite, static_cast<std::size_t>(j), os.str()});
        }
    }
    for (Eigen::Index j = 0; j + 1 < knots.size(); ++j) {
        if (!(knots[j] < knots[j + 1])) {
            std::ostringstream os;
            os << "knot " << j + 1 << " (" << knots[j + 1] << ") does not exceed knot " << j << " ("
               << knots[j] << ")";
            out.push_back({ErrorCode::NonIncreasingKnots, static_cast<std::size_t>(j + 1), os.str()});
        }
    }
    for (Eigen::Index j = 0; j < scalings.size(); ++j) {
        if (!(std::abs(scalings[j]) < Scalar(1))) {
            std::ostringstream os;
            os << "scaling " << j << " = " << scalings[j] << " is outside (-1, 1)";
            out.push_back({ErrorCode::ScalingOutOfRange, static_cast<std::size_t>(j), os.str()});
        }
    }
    return out;
}

/// Interpolation data (X_j, Y_j) with vertex scaling factors s_j, j = 0..N.
/// Immutable once constructed; construction throws ValidationError listing
/// every violated invariant.
template <typename Scalar>
class InterpolationProblem {
public:
    using Vector = VectorX<Scalar>;

    InterpolationProblem(Vector knots, Vector values, Vector scalings)
        : knots_(std::move(knots)), values_(std::move(values)), scalings_(std::move(scalings)) {
        auto violations = validate<Scalar>(knots_, values_, scalings_);
        if (!violations.empty()) throw ValidationError(std::move(violations));
        max_scaling_ = scalings_.cwiseAbs().maxCoeff();
    }

    /// Number of maps N (one less than the number of knots).
    int intervals() const { return static_cast<int>(knots_.size()) - 1; }

    const Vector& knots() const { return knots_; }
    const Vector& values() const { return values_; }
    const Vector& scalings() const { return scalings_; }

    Scalar knot(int j) const { return knots_[j]; }
    Scalar value(int j) const { return values_[j]; }
    Scalar scaling(int j) const { return scalings_[j]; }

    Scalar left() const { return knots_[0]; }
    Scalar right() const { return knots_[knots_.size() - 1]; }
    Scalar width() const { return right() - left(); }

    /// s = max_j |s_j|.
    Scalar max_scaling() const { return max_scaling_; }

    bool contains(Scalar x) const { return x >= left() && x <= right(); }

private:
    Vector knots_;
    Vector values_;
    Vector scalings_;
    Scalar max_scaling_{};
};

using Problem = InterpolationProblem<double>;

// Unchecked kernels. Every affine piece is evaluated with std::lerp on the
// normalized parameter so that endpoints are reproduced bit-for-bit.
namespace detail {

template <typename Scalar>
inline Scalar unit_param(const InterpolationProblem<Scalar>& p, Scalar x) {
    return (x - p.left()) / p.width();
}

template <typename Scalar>
inline Scalar map_l(const InterpolationProblem<Scalar>& p, int n, Scalar x) {
    return std::lerp(p.knot(n - 1), p.knot(n), unit_param(p, x));
}

// S_n on the whole of I.
template <typename Scalar>
inline Scalar scaling_piece(const InterpolationProblem<Scalar>& p, int n, Scalar x) {
    return std::lerp(p.scaling(n - 1), p.scaling(n), unit_param(p, x));
}

// The n-th affine piece of h, valid for x in [X_{n-1}, X_n].
template <typename Scalar>
inline Scalar h_piece(const InterpolationProblem<Scalar>& p, int n, Scalar x) {
    const Scalar t = (x - p.knot(n - 1)) / (p.knot(n) - p.knot(n - 1));
    return std::lerp(p.value(n - 1), p.value(n), t);
}

template <typename Scalar>
inline Scalar chord(const InterpolationProblem<Scalar>& p, Scalar x) {
    return std::lerp(p.value(0), p.value(p.intervals()), unit_param(p, x));
}

// Half-open ownership: x in [X_{n-1}, X_n) belongs to n, X_N belongs to N.
template <typename Scalar>
inline int owning_interval(const InterpolationProblem<Scalar>& p, Scalar x) {
    const auto& k = p.knots();
    const auto it = std::upper_bound(k.data(), k.data() + k.size(), x);
    const int n = static_cast<int>(it - k.data());
    return std::clamp(n, 1, p.intervals());
}

template <typename Scalar>
inline Scalar inverse_l(const InterpolationProblem<Scalar>& p, int n, Scalar x) {
    const Scalar t = (x - p.knot(n - 1)) / (p.knot(n) - p.knot(n - 1));
    return std::lerp(p.left(), p.right(), t);
}

template <typename Scalar>
void require_in_domain(const InterpolationProblem<Scalar>& p, Scalar x) {
    if (!p.contains(x)) {
        std::ostringstream os;
        os << "x = " << x << " is outside [" << p.left() << ", " << p.right() << "]";
        throw Error(ErrorCode::PointOutsideDomain, os.str());
    }
}

} // namespace detail

/// l_n(x) = X_{n-1} + (X_n - X_{n-1})/(X_N - X_0) (x - X_0).
template <typename Scalar>
Scalar eval_l(const InterpolationProblem<Scalar>& p, int n, Scalar x) {
    if (n < 1 || n > p.intervals()) {
        std::ostringstream os;
        os << "map index " << n << " outside 1.." << p.intervals();
        throw Error(ErrorCode::IndexOutOfRange, os.str());
    }
    detail::require_in_domain(p, x);
    return detail::map_l(p, n, x);
}

template <typename Scalar>
struct IntervalPreimage {
    int n;
    Scalar y;
};

/// L(x) = l_n^{-1}(x) together with the owning interval n.
template <typename Scalar>
IntervalPreimage<Scalar> eval_L(const InterpolationProblem<Scalar>& p, Scalar x) {
    detail::require_in_domain(p, x);
    const int n = detail::owning_interval(p, x);
    return {n, detail::inverse_l(p, n, x)};
}

/// S = S_n o l_n^{-1}; continuous, equal to s_j at X_j.
template <typename Scalar>
Scalar eval_S(const InterpolationProblem<Scalar>& p, Scalar x) {
    const auto [n, y] = eval_L(p, x);
    return detail::scaling_piece(p, n, y);
}

/// Chord through (X_0, Y_0) and (X_N, Y_N).
template <typename Scalar>
Scalar eval_b(const InterpolationProblem<Scalar>& p, Scalar x) {
    detail::require_in_domain(p, x);
    return detail::chord(p, x);
}

/// Piecewise-linear interpolant of the data.
template <typename Scalar>
Scalar eval_h(const InterpolationProblem<Scalar>& p, Scalar x) {
    detail::require_in_domain(p, x);
    return detail::h_piece(p, detail::owning_interval(p, x), x);
}

/// True iff every data point lies within `eps` (perpendicular distance) of the
/// chord through the end points.
template <typename Scalar>
bool collinear(const InterpolationProblem<Scalar>& p, Scalar eps = Scalar(1e-12)) {
    const Scalar dx = p.width();
    const Scalar dy = p.value(p.intervals()) - p.value(0);
    const Scalar len = std::hypot(dx, dy);
    for (int j = 1; j < p.intervals(); ++j) {
        const Scalar cross = dx * (p.value(j) - p.value(0)) - dy * (p.knot(j) - p.left());
        if (std::abs(cross) / len > eps) return false;
    }
    return true;
}

/// A function on I given by samples, read piecewise-linearly in between.
template <typename Scalar>
class SampledFunction {
public:
    using Vector = VectorX<Scalar>;

    SampledFunction(Vector abscissae, Vector ordinates)
        : x_(std::move(abscissae)), y_(std::move(ordinates)) {
        if (x_.size() != y_.size() || x_.size() < 2)
            throw Error(ErrorCode::SizeMismatch, "sampled function needs >= 2 matching samples");
        for (Eigen::Index i = 0; i < x_.size(); ++i) {
            if (!std::isfinite(x_[i]) || !std::isfinite(y_[i]))
                throw Error(ErrorCode::NonFinite, "sample " + std::to_string(i) + " is not finite");
            if (i > 0 && !(x_[i - 1] < x_[i]))
                throw Error(ErrorCode::NonIncreasingKnots,
                            "abscissa " + std::to_string(i) + " does not increase");
        }
    }

    const Vector& abscissae() const { return x_; }
    const Vector& ordinates() const { return y_; }
    Eigen::Index size() const { return x_.size(); }
    Scalar front() const { return x_[0]; }
    Scalar back() const { return x_[x_.size() - 1]; }

    /// Piecewise-linear read; sample abscissae return the stored ordinate exactly.
    Scalar operator()(Scalar x) const {
        if (!(x >= front() && x <= back())) {
            std::ostringstream os;
            os << "x = " << x << " outside sampled range [" << front() << ", " << back() << "]";
            throw Error(ErrorCode::PointOutsideDomain, os.str());
        }
        const Scalar* begin = x_.data();
        const Scalar* end = begin + x_.size();
        const Scalar* it = std::lower_bound(begin, end, x);
        const auto i = static_cast<Eigen::Index>(it - begin);
        if (*it == x) return y_[i];
        const Scalar t = (x - x_[i - 1]) / (x_[i] - x_[i - 1]);
        return std::lerp(y_[i - 1], y_[i], t);
    }

private:
    Vector x_;
    Vector y_;
};

/// max_i |a_i - b_i| over a common set of abscissae.
template <typename Scalar>
Scalar sup_distance(const SampledFunction<Scalar>& a, const SampledFunction<Scalar>& b) {
    if (a.size() != b.size() || a.abscissae() != b.abscissae())
        throw Error(ErrorCode::SizeMismatch, "sampled functions live on different abscissae");
    return (a.ordinates() - b.ordinates()).cwiseAbs().maxCoeff();
}

/// x = l_{word[0]} o ... o l_{word[k-1]}(X_anchor). Letters are 1-based map indices.
struct AddressPoint {
    std::vector<int> word;
    int anchor = 0;

    /// "1.2.1"; the empty word prints as "".
    std::string word_string() const {
        std::string out;
        for (std::size_t i = 0; i < word.size(); ++i) {
            if (i) out += '.';
            out += std::to_string(word[i]);
        }
        return out;
    }
};

/// The image lattice of the knots under all depth-d words:
/// points l_sigma(X_j), |sigma| = d, sorted. It has N^{d+1} + 1 points and the
/// depth-(d-1) lattice sits inside it at every N-th index, so L maps lattice
/// points onto lattice points without interpolation.
template <typename Scalar>
class KnotLattice {
public:
    using Vector = VectorX<Scalar>;

    /// Largest supported lattice size (points - 1).
    static constexpr std::int64_t kMaxIntervals = std::int64_t{1} << 26;

    KnotLattice(const InterpolationProblem<Scalar>& p, int depth) : depth_(depth), n_(p.intervals()) {
        if (depth < 0) throw Error(ErrorCode::IndexOutOfRange, "lattice depth must be >= 0");
        std::int64_t intervals = n_;
        for (int d = 0; d < depth; ++d) {
            intervals *= n_;
            if (intervals > kMaxIntervals)
                throw Error(ErrorCode::DepthTooLarge,
                            "lattice of depth " + std::to_string(depth) + " exceeds 2^26 intervals");
        }
        intervals_ = intervals;
        points_ = p.knots();
        for (int d = 0; d < depth; ++d) points_ = refine(p, points_);
    }

    int depth() const { return depth_; }
    int maps() const { return n_; }
    const Vector& points() const { return points_; }
    Eigen::Index size() const { return points_.size(); }
    std::int64_t intervals() const { return intervals_; }
    std::int64_t piece_length() const { return intervals_ / n_; }

    /// Owning map n (half-open rule) and lattice index of L(x_i).
    std::pair<int, std::int64_t> source(std::int64_t i) const {
        const std::int64_t m = piece_length();
        const std::int64_t n0 = std::min<std::int64_t>(i / m, n_ - 1);
        return {static_cast<int>(n0) + 1, (i - n0 * m) * n_};
    }

    /// One refinement step: the union of l_n(points) for n = 1..N.
    static Vector refine(const InterpolationProblem<Scalar>& p, const Vector& coarse) {
        const int N = p.intervals();
        const Eigen::Index m = coarse.size() - 1;
        Vector fine(N * m + 1);
        for (int n = 1; n <= N; ++n)
            for (Eigen::Index t = 0; t <= m; ++t) fine[(n - 1) * m + t] = detail::map_l(p, n, coarse[t]);
        return fine;
    }

private:
    int depth_;
    int n_;
    std::int64_t intervals_ = 0;
    Vector points_;
};

/// Largest depth whose lattice has at most 2^11 intervals (10 for N = 2).
inline int default_lattice_depth(int maps) {
    if (maps < 2) return 10;
    int depth = 0;
    std::int64_t intervals = maps;
    while (intervals * maps <= (std::int64_t{1} << 11)) {
        intervals *= maps;
        ++depth;
    }
    return depth;
}

} // namespace bifract
