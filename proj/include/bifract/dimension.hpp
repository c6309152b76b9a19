#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bifract/core.hpp"
#include "bifract/operator.hpp"

namespace bifract {

/// Grid boxes per column at resolution N^-r, columns k = 1..N^r left to right.
struct ColumnCounts {
    int r = 0;
    std::vector<std::int64_t> columns;
    std::int64_t total = 0;
};

/// Upper limit on N^r for a single resolution.
inline constexpr std::int64_t kMaxColumns = std::int64_t{1} << 24;

namespace detail {

template <typename Scalar>
bool uniform_knots(const InterpolationProblem<Scalar>& p, Scalar tol = Scalar(1e-12)) {
    const int N = p.intervals();
    for (int j = 0; j <= N; ++j) {
        const Scalar expected = p.left() + p.width() * Scalar(j) / Scalar(N);
        if (std::abs(p.knot(j) - expected) > tol * p.width()) return false;
    }
    return true;
}

template <typename Scalar>
void require_uniform(const InterpolationProblem<Scalar>& p) {
    if (!uniform_knots(p)) throw Error(ErrorCode::NonUniformKnots, "box counting needs equally spaced knots");
}

inline std::int64_t checked_power(int base, int exponent) {
    std::int64_t out = 1;
    for (int i = 0; i < exponent; ++i) {
        out *= base;
        if (out > kMaxColumns)
            throw Error(ErrorCode::DepthTooLarge, std::to_string(base) + "^" + std::to_string(exponent) +
                                                      " columns exceed the 2^24 budget");
    }
    return out;
}

template <typename Scalar>
std::int64_t boxes_in_extent(Scalar lo, Scalar hi, Scalar scale) {
    return static_cast<std::int64_t>(std::floor(hi * scale)) - static_cast<std::int64_t>(std::floor(lo * scale)) + 1;
}

/// Depth-first walk over address suffixes. A node at depth d holds f o l_sigma
/// on the depth-`oversample` knot lattice, |sigma| = d; its column is
/// k = 1 + sum_i (sigma_i - 1) N^{d-i}. Children prepend a letter through the
/// functional equation, so all samples are bitwise the exact address values.
/// visit(depth, k, min, max) is called for rmin <= depth <= rmax.
template <typename Scalar, typename Visit>
void scan_columns(const InterpolationProblem<Scalar>& p, int rmin, int rmax, int oversample, Visit&& visit) {
    const int N = p.intervals();
    const auto root = exact_samples(p, oversample - 1);  // N^oversample + 1 points
    const Eigen::Index m = root.size();

    struct Level {
        VectorX<Scalar> x, f;
    };
    std::vector<std::int64_t> power(static_cast<std::size_t>(rmax) + 1, 1);
    for (int d = 1; d <= rmax; ++d) power[d] = power[d - 1] * N;

    auto report = [&](int depth, std::int64_t k0, const VectorX<Scalar>& f) {
        if (depth >= rmin && depth <= rmax) visit(depth, k0 + 1, f.minCoeff(), f.maxCoeff());
    };
    report(0, 0, root.ordinates());
    if (rmax == 0) return;

    // levels[d] holds the node at depth d of the current path.
    auto descend = [&](auto&& self, std::vector<Level>& levels, int depth, std::int64_t k0) -> void {
        const Level& parent = levels[depth];
        Level& child = levels[depth + 1];
        for (int n = 1; n <= N; ++n) {
            for (Eigen::Index i = 0; i < m; ++i) {
                const Scalar x = detail::map_l(p, n, parent.x[i]);
                child.x[i] = x;
                child.f[i] = functional_step(p, n, parent.x[i], parent.f[i], x);
            }
            const std::int64_t kc = (n - 1) * power[depth] + k0;
            report(depth + 1, kc, child.f);
            if (depth + 1 < rmax) self(self, levels, depth + 1, kc);
        }
    };

    auto make_levels = [&]() {
        std::vector<Level> levels(static_cast<std::size_t>(rmax) + 1, Level{VectorX<Scalar>(m), VectorX<Scalar>(m)});
        levels[0] = Level{root.abscissae(), root.ordinates()};
        return levels;
    };

    const unsigned hw = std::thread::hardware_concurrency();
    if (hw <= 1 || N == 1 || rmax < 3) {
        auto levels = make_levels();
        descend(descend, levels, 0, 0);
        return;
    }
    // First letter applied to the root picks the residue class of k mod N;
    // subtrees write disjoint columns.
    std::vector<std::jthread> pool;
    for (int n = 1; n <= N; ++n) {
        pool.emplace_back([&, n]() {
            auto levels = make_levels();
            Level& child = levels[1];
            for (Eigen::Index i = 0; i < m; ++i) {
                const Scalar x = detail::map_l(p, n, levels[0].x[i]);
                child.x[i] = x;
                child.f[i] = functional_step(p, n, levels[0].x[i], levels[0].f[i], x);
            }
            const std::int64_t kc = n - 1;
            report(1, kc, child.f);
            if (rmax > 1) descend(descend, levels, 1, kc);
        });
    }
}

} // namespace detail

/// Column counts N(r, k) for every r in [rmin, rmax], each column's y-extent
/// taken over exact samples at address depth r + oversample.
template <typename Scalar>
std::vector<ColumnCounts> box_count_range(const InterpolationProblem<Scalar>& p, int rmin, int rmax,
                                          int oversample) {
    if (rmin < 0 || rmax < rmin) throw Error(ErrorCode::IndexOutOfRange, "need 0 <= rmin <= rmax");
    if (oversample < 1) throw Error(ErrorCode::IndexOutOfRange, "oversample must be >= 1");
    detail::require_uniform(p);
    const int N = p.intervals();
    std::vector<ColumnCounts> out(static_cast<std::size_t>(rmax - rmin + 1));
    std::vector<Scalar> scale(out.size());
    for (int r = rmin; r <= rmax; ++r) {
        auto& c = out[static_cast<std::size_t>(r - rmin)];
        c.r = r;
        c.columns.assign(static_cast<std::size_t>(detail::checked_power(N, r)), 0);
        scale[static_cast<std::size_t>(r - rmin)] = std::pow(Scalar(N), Scalar(r));
    }
    detail::scan_columns(p, rmin, rmax, oversample, [&](int depth, std::int64_t k, Scalar lo, Scalar hi) {
        const auto slot = static_cast<std::size_t>(depth - rmin);
        out[slot].columns[static_cast<std::size_t>(k - 1)] = detail::boxes_in_extent(lo, hi, scale[slot]);
    });
    for (auto& c : out)
        for (auto v : c.columns) c.total += v;
    return out;
}

template <typename Scalar>
ColumnCounts box_count(const InterpolationProblem<Scalar>& p, int r, int oversample = 6) {
    return box_count_range(p, r, r, oversample).front();
}

/// Subtracts the chord b from the data; knots and scalings are unchanged.
template <typename Scalar>
InterpolationProblem<Scalar> normalize(const InterpolationProblem<Scalar>& p) {
    VectorX<Scalar> values(p.values().size());
    for (int j = 0; j <= p.intervals(); ++j) values[j] = p.value(j) - eval_b(p, p.knot(j));
    return InterpolationProblem<Scalar>(p.knots(), std::move(values), p.scalings());
}

/// gamma = sum_n (s_{n-1} + s_n)/2.
template <typename Scalar>
Scalar gamma_sum(const InterpolationProblem<Scalar>& p) {
    Scalar g = 0;
    for (int n = 1; n <= p.intervals(); ++n) g += (p.scaling(n - 1) + p.scaling(n)) / 2;
    return g;
}

template <typename Scalar>
struct ClosedFormDimension {
    Scalar gamma;
    Scalar dimension;
    bool gamma_le_one;
    bool collinear;
};

/// Why the closed form does not apply, or nullopt when it does.
template <typename Scalar>
std::optional<std::string> closed_form_obstruction(const InterpolationProblem<Scalar>& p) {
    if (!detail::uniform_knots(p)) return "knots are not equally spaced";
    const int N = p.intervals();
    if (N < 2) return "needs N >= 2";
    if (std::abs(p.scaling(0) - p.scaling(N)) > Scalar(1e-12)) return "s_0 != s_N";
    for (int j = 0; j <= N; ++j)
        if (p.scaling(j) < 0) return "negative scaling s_" + std::to_string(j);
    return std::nullopt;
}

/// 1 + log(gamma)/log(N) when gamma > 1 and the data are not collinear, else 1.
template <typename Scalar>
ClosedFormDimension<Scalar> closed_form_dimension(const InterpolationProblem<Scalar>& p,
                                                  Scalar collinear_eps = Scalar(1e-12)) {
    if (auto why = closed_form_obstruction(p)) throw Error(ErrorCode::HypothesisViolated, *why);
    ClosedFormDimension<Scalar> out{};
    out.gamma = gamma_sum(p);
    out.gamma_le_one = !(out.gamma > 1);
    out.collinear = collinear(p, collinear_eps);
    out.dimension = (out.gamma_le_one || out.collinear)
                        ? Scalar(1)
                        : Scalar(1) + std::log(out.gamma) / std::log(Scalar(p.intervals()));
    return out;
}

struct DimensionFit {
    double slope = 0;
    double intercept = 0;
    double std_error = 0;
    double ci_low = 0;
    double ci_high = 0;
    std::vector<int> used;  ///< resolutions that entered the fit
};

namespace detail {

// Two-sided 95% Student t quantiles, df = 1..30.
inline double t_quantile_975(int df) {
    static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                       2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                                       2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
    if (df < 1) return std::numeric_limits<double>::infinity();
    return df <= 30 ? table[df - 1] : 1.960;
}

} // namespace detail

/// Least-squares slope of log N(r) against r log N, over resolutions >= min_r.
inline DimensionFit fit_dimension(const std::vector<int>& resolutions, const std::vector<std::int64_t>& totals,
                                  int maps, int min_r = 4) {
    if (resolutions.size() != totals.size()) throw Error(ErrorCode::SizeMismatch, "resolutions/totals differ");
    DimensionFit fit;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < resolutions.size(); ++i) {
        if (resolutions[i] < min_r) continue;
        fit.used.push_back(resolutions[i]);
        xs.push_back(resolutions[i] * std::log(double(maps)));
        ys.push_back(std::log(double(totals[i])));
    }
    if (xs.size() < 3) throw Error(ErrorCode::TooFewResolutions, "need at least 3 resolutions to fit");
    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, 0) = xs[i];
        A(i, 1) = 1.0;
        y[i] = ys[i];
    }
    const Eigen::Vector2d beta = A.colPivHouseholderQr().solve(y);
    fit.slope = beta[0];
    fit.intercept = beta[1];
    const Eigen::VectorXd resid = y - A * beta;
    const double xm = Eigen::Map<const Eigen::VectorXd>(xs.data(), n).mean();
    double sxx = 0;
    for (double x : xs) sxx += (x - xm) * (x - xm);
    const double dof = double(n - 2);
    fit.std_error = dof > 0 ? std::sqrt(resid.squaredNorm() / dof / sxx) : 0.0;
    const double half = detail::t_quantile_975(static_cast<int>(n - 2)) * fit.std_error;
    fit.ci_low = fit.slope - half;
    fit.ci_high = fit.slope + half;
    return fit;
}

struct DimensionReport {
    int maps = 0;
    std::vector<int> resolutions;
    std::vector<std::int64_t> totals;
    std::vector<std::vector<std::int64_t>> columns;  ///< per resolution, when kept
    DimensionFit fit;
    double gamma = 0;
    std::optional<double> closed_form;     ///< withheld outside the closed form's hypotheses
    std::optional<std::string> withheld;   ///< reason the closed form is missing
    bool gamma_le_one = false;
    bool collinear = false;

    /// log(N(r)/N(r-1))/log N for consecutive resolutions; NaN for the first.
    std::vector<double> partial_slopes() const {
        std::vector<double> out(totals.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t i = 1; i < totals.size(); ++i)
            out[i] = std::log(double(totals[i]) / double(totals[i - 1])) /
                     (double(resolutions[i] - resolutions[i - 1]) * std::log(double(maps)));
        return out;
    }
};

/// Counts for r in [rmin, rmax], the slope fit over r >= fit_min_r, and the
/// closed form when its hypotheses hold.
inline DimensionReport dimension_report(const Problem& p, int rmin, int rmax, int oversample, int fit_min_r,
                                        bool keep_columns = false) {
    DimensionReport rep;
    rep.maps = p.intervals();
    for (auto& c : box_count_range(p, rmin, rmax, oversample)) {
        rep.resolutions.push_back(c.r);
        rep.totals.push_back(c.total);
        if (keep_columns) rep.columns.push_back(std::move(c.columns));
    }
    rep.fit = fit_dimension(rep.resolutions, rep.totals, rep.maps, fit_min_r);
    rep.gamma = gamma_sum(p);
    rep.gamma_le_one = !(rep.gamma > 1);
    rep.collinear = collinear(p);
    rep.withheld = closed_form_obstruction(p);
    if (!rep.withheld) rep.closed_form = closed_form_dimension(p).dimension;
    return rep;
}

struct RecursionCell {
    std::int64_t k;
    int n;
    std::int64_t measured;  ///< N(r+1, l(k, n))
    double lower;
    double upper;
};

struct RecursionAudit {
    int r = 0;
    std::int64_t cells = 0;
    std::int64_t violations = 0;
    double max_violation = -std::numeric_limits<double>::infinity();  ///< max(measured - upper, lower - measured)
    bool aggregate_applicable = false;  ///< needs s_0 = s_N
    std::int64_t aggregate_violations = 0;
    double aggregate_max_violation = -std::numeric_limits<double>::infinity();
    double c1 = 0;
    std::vector<RecursionCell> worst;  ///< violating cells, or the tightest one when none violate
};

namespace detail {

template <typename Scalar>
void require_count_hypotheses(const InterpolationProblem<Scalar>& p) {
    if (!uniform_knots(p)) throw Error(ErrorCode::HypothesisViolated, "knots are not equally spaced");
    for (int j = 0; j <= p.intervals(); ++j)
        if (p.scaling(j) < 0) throw Error(ErrorCode::HypothesisViolated, "negative scaling s_" + std::to_string(j));
}

// Height factors of w_n over column k at resolution r: (upper, lower).
inline std::pair<double, double> column_factors(double sl, double sr, std::int64_t k, double columns) {
    const double ds = sr - sl;
    const double at_right = sl + ds * (double(k) / columns);
    const double at_left = sl + ds * (double(k - 1) / columns);
    return ds >= 0 ? std::pair{at_right, at_left} : std::pair{at_left, at_right};
}

} // namespace detail

/// Checks every measured N(r+1, l(k, n)) against the per-cell upper and lower
/// bounds and each column against sum_n N(r+1, l(k, n)) <= N gamma N(r, k) + c_1.
/// Runs on the chord-normalized problem.
inline RecursionAudit recursion_bounds_check(const Problem& original, int r, int oversample = 6) {
    detail::require_count_hypotheses(original);
    const Problem p = normalize(original);
    const int N = p.intervals();
    const auto counts = box_count_range(p, r, r + 1, oversample);
    const auto& coarse = counts[0].columns;
    const auto& fine = counts[1].columns;
    const auto columns = static_cast<std::int64_t>(coarse.size());
    const double gamma = gamma_sum(p);

    RecursionAudit audit;
    audit.r = r;
    audit.aggregate_applicable = std::abs(p.scaling(0) - p.scaling(N)) <= 1e-12;
    for (int n = 1; n <= N; ++n) {
        const double ds = std::abs(p.scaling(n) - p.scaling(n - 1));
        audit.c1 += 2.0 * N * (std::abs(p.value(n) - p.value(n - 1)) + ds) + ds / N + 2.0;
    }
    RecursionCell tightest{};
    double tightest_margin = -std::numeric_limits<double>::infinity();
    for (std::int64_t k = 1; k <= columns; ++k) {
        const double base = double(coarse[static_cast<std::size_t>(k - 1)]);
        std::int64_t sum = 0;
        for (int n = 1; n <= N; ++n) {
            const auto l = k + (n - 1) * columns;
            const auto measured = fine[static_cast<std::size_t>(l - 1)];
            sum += measured;
            const double a = std::abs(p.value(n) - p.value(n - 1));
            const double ds = std::abs(p.scaling(n) - p.scaling(n - 1));
            const auto [up, lo] = detail::column_factors(p.scaling(n - 1), p.scaling(n), k, double(columns));
            const double slack = 2.0 * N * (a + ds) + 2.0;
            RecursionCell cell{k, n, measured, N * lo * base - slack, N * up * base + slack};
            const double margin = std::max(double(measured) - cell.upper, cell.lower - double(measured));
            ++audit.cells;
            audit.max_violation = std::max(audit.max_violation, margin);
            if (margin > 0) {
                ++audit.violations;
                if (audit.worst.size() < 16) audit.worst.push_back(cell);
            } else if (margin > tightest_margin) {
                tightest_margin = margin;
                tightest = cell;
            }
        }
        if (audit.aggregate_applicable) {
            const double margin = double(sum) - (N * gamma * base + audit.c1);
            audit.aggregate_max_violation = std::max(audit.aggregate_max_violation, margin);
            if (margin > 0) ++audit.aggregate_violations;
        }
    }
    if (audit.worst.empty() && audit.cells > 0) audit.worst.push_back(tightest);
    return audit;
}

struct CylinderReport {
    std::vector<int> word;
    std::int64_t count = 0;
    double lower = 0;
    double upper = 0;
    double gamma_product = 1;  ///< gamma_{sigma_1} ... gamma_{sigma_r}
    double ratio = 0;          ///< count / (gamma_product N^{|sigma|})
};

/// Boxes of side N^-|sigma| covering w_sigma(graph f) of the chord-normalized
/// problem, with bounds obtained by chaining the per-cell recursion along the
/// word from the measured N(0).
inline CylinderReport cylinder_count(const Problem& original, const std::vector<int>& word, int extra = 6) {
    if (extra < 1) throw Error(ErrorCode::IndexOutOfRange, "extra depth must be >= 1");
    detail::require_count_hypotheses(original);
    const Problem p = normalize(original);
    const int N = p.intervals();
    const int depth = static_cast<int>(word.size());
    detail::checked_power(N, depth);
    for (int n : word)
        if (n < 1 || n > N) throw Error(ErrorCode::IndexOutOfRange, "letter outside 1..N");
    for (int n = 1; n <= N; ++n)
        if (!((p.scaling(n - 1) + p.scaling(n)) / 2 > 0))
            throw Error(ErrorCode::HypothesisViolated, "gamma_" + std::to_string(n) + " must be positive");

    const auto root = exact_samples(p, extra - 1);
    VectorX<double> xs = root.abscissae(), fs = root.ordinates();
    CylinderReport rep;
    rep.word = word;
    double lo = double(detail::boxes_in_extent(fs.minCoeff(), fs.maxCoeff(), 1.0));
    double hi = lo;
    std::int64_t k = 1;
    double columns = 1;
    // Prepend letters from the innermost one outwards.
    for (int i = depth - 1; i >= 0; --i) {
        const int n = word[static_cast<std::size_t>(i)];
        for (Eigen::Index t = 0; t < xs.size(); ++t) {
            const double x = detail::map_l(p, n, xs[t]);
            fs[t] = functional_step(p, n, xs[t], fs[t], x);
            xs[t] = x;
        }
        const double a = std::abs(p.value(n) - p.value(n - 1));
        const double ds = std::abs(p.scaling(n) - p.scaling(n - 1));
        const auto [up, low] = detail::column_factors(p.scaling(n - 1), p.scaling(n), k, columns);
        const double slack = 2.0 * N * (a + ds) + 2.0;
        hi = N * up * hi + slack;
        lo = std::max(1.0, N * low * lo - slack);
        k += (n - 1) * static_cast<std::int64_t>(columns);
        columns *= N;
        rep.gamma_product *= (p.scaling(n - 1) + p.scaling(n)) / 2;
    }
    rep.count = detail::boxes_in_extent(fs.minCoeff(), fs.maxCoeff(), columns);
    rep.lower = lo;
    rep.upper = hi;
    rep.ratio = double(rep.count) / (rep.gamma_product * columns);
    return rep;
}

} // namespace bifract
