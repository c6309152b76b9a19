#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <thread>
#include <vector>

#include "bifract/core.hpp"
#include "bifract/operator.hpp"
#include "bifract/prng.hpp"
#include "bifract/raster.hpp"

namespace bifract {

/// Coefficients of (u, y) -> a + b u + c y + d u y + e u^2 with
/// u = (x - X_0)/(X_N - X_0). e vanishes exactly when the map is bilinear.
template <typename Scalar>
struct BilinearCoefficients {
    Scalar a, b, c, d, e;
};

/// w(x, y) = (l(x), B(u, y)). B is stored through its values on the corners
/// u, y in {0, 1} plus a curvature term e u (u - 1), so that corner images are
/// reproduced exactly.
template <typename Scalar>
class BilinearMap {
public:
    BilinearMap() = default;

    BilinearMap(Scalar domain_left, Scalar domain_right, Scalar image_left, Scalar image_right, Scalar v00,
                Scalar v10, Scalar v01, Scalar v11, Scalar curvature = Scalar(0))
        : x0_(domain_left), width_(domain_right - domain_left), lo_(image_left), hi_(image_right),
          v00_(v00), v10_(v10), v01_(v01), v11_(v11), e_(curvature) {}

    Scalar param(Scalar x) const { return (x - x0_) / width_; }

    Scalar first(Scalar x) const { return std::lerp(lo_, hi_, param(x)); }

    Scalar second(Scalar x, Scalar y) const {
        const Scalar u = param(x);
        return std::lerp(std::lerp(v00_, v10_, u), std::lerp(v01_, v11_, u), y) + e_ * u * (u - Scalar(1));
    }

    Point2<Scalar> operator()(const Point2<Scalar>& p) const { return {first(p.x()), second(p.x(), p.y())}; }

    BilinearCoefficients<Scalar> coefficients() const {
        return {v00_, v10_ - v00_ - e_, v01_ - v00_, v11_ - v10_ - v01_ + v00_, e_};
    }

    bool is_bilinear() const { return e_ == Scalar(0); }

    /// Lipschitz constant of the first coordinate.
    Scalar x_contraction() const { return (hi_ - lo_) / width_; }

private:
    Scalar x0_{}, width_{1}, lo_{}, hi_{1};
    Scalar v00_{}, v10_{}, v01_{}, v11_{}, e_{};
};

/// The maps w_1..w_N of a plane IFS over I x R.
template <typename Scalar>
class BilinearMapSet {
public:
    BilinearMapSet(Scalar left, Scalar right, std::vector<BilinearMap<Scalar>> maps)
        : left_(left), right_(right), maps_(std::move(maps)) {}

    int size() const { return static_cast<int>(maps_.size()); }
    Scalar left() const { return left_; }
    Scalar right() const { return right_; }

    /// 1-based, matching w_n.
    const BilinearMap<Scalar>& map(int n) const { return maps_.at(static_cast<std::size_t>(n - 1)); }

    Point2<Scalar> apply(int n, const Point2<Scalar>& p) const { return map(n)(p); }

    bool is_bilinear() const {
        return std::all_of(maps_.begin(), maps_.end(), [](const auto& m) { return m.is_bilinear(); });
    }

    /// Fixed point of w_1; it lies on the attractor.
    Point2<Scalar> anchor() const {
        const auto c = maps_.front().coefficients();
        return {left_, c.a / (Scalar(1) - c.c)};
    }

private:
    Scalar left_, right_;
    std::vector<BilinearMap<Scalar>> maps_;
};

/// Largest deviation from the join conditions and endpoint identities
/// w_n(X_N, y) = (X_n, Y_n + s_n (y - Y_N)), w_{n+1}(X_0, y) = (X_n, Y_n + s_n (y - Y_0)),
/// probed at the given ordinates.
template <typename Scalar>
Scalar endpoint_identity_defect(const BilinearMapSet<Scalar>& maps, const InterpolationProblem<Scalar>& p,
                                const std::vector<Scalar>& probes) {
    Scalar worst = 0;
    const int N = p.intervals();
    auto track = [&](const Point2<Scalar>& got, Scalar x, Scalar y) {
        worst = std::max({worst, std::abs(got.x() - x), std::abs(got.y() - y)});
    };
    for (int n = 1; n <= N; ++n) {
        track(maps.apply(n, {p.left(), p.value(0)}), p.knot(n - 1), p.value(n - 1));
        track(maps.apply(n, {p.right(), p.value(N)}), p.knot(n), p.value(n));
        for (Scalar y : probes) {
            track(maps.apply(n, {p.right(), y}), p.knot(n), p.value(n) + p.scaling(n) * (y - p.value(N)));
            track(maps.apply(n, {p.left(), y}), p.knot(n - 1), p.value(n - 1) + p.scaling(n - 1) * (y - p.value(0)));
        }
    }
    return worst;
}

/// w_n(x, y) = (l_n(x), h(l_n(x)) + S_n(x) (y - b(x))) in corner form.
template <typename Scalar>
BilinearMapSet<Scalar> build_maps(const InterpolationProblem<Scalar>& p) {
    const int N = p.intervals();
    const Scalar y0 = p.value(0), yN = p.value(N);
    std::vector<BilinearMap<Scalar>> maps;
    maps.reserve(static_cast<std::size_t>(N));
    for (int n = 1; n <= N; ++n) {
        const Scalar sl = p.scaling(n - 1), sr = p.scaling(n);
        const Scalar yl = p.value(n - 1), yr = p.value(n);
        maps.emplace_back(p.left(), p.right(), p.knot(n - 1), p.knot(n), yl - sl * y0, yr - sr * yN,
                          yl + sl * (Scalar(1) - y0), yr + sr * (Scalar(1) - yN), -(sr - sl) * (yN - y0));
    }
    BilinearMapSet<Scalar> set(p.left(), p.right(), std::move(maps));

    Scalar scale = 1;
    for (int j = 0; j <= N; ++j) scale = std::max(scale, std::abs(p.value(j)));
    const Scalar defect = endpoint_identity_defect<Scalar>(set, p, {y0 - 1, y0, yN, yN + 1, Scalar(0)});
    if (defect > Scalar(1000) * std::numeric_limits<Scalar>::epsilon() * (scale + 1))
        throw Error(ErrorCode::EndpointMismatch, "constructed maps violate the endpoint identities");
    return set;
}

/// d_q((x1,y1),(x2,y2)) = alpha |x1 - x2| + beta |(y1 - q(x1)) - (y2 - q(x2))|.
template <typename Scalar>
class TaxicabMetric {
public:
    TaxicabMetric(Scalar alpha, Scalar beta, SampledFunction<Scalar> q)
        : alpha_(alpha), beta_(beta), q_(std::move(q)) {
        if (!(alpha > 0) || !(beta > 0)) throw Error(ErrorCode::IndexOutOfRange, "alpha and beta must be positive");
    }

    /// q constant on [left, right].
    static TaxicabMetric constant(Scalar alpha, Scalar beta, Scalar left, Scalar right, Scalar value) {
        VectorX<Scalar> xs(2), ys(2);
        xs << left, right;
        ys << value, value;
        return TaxicabMetric(alpha, beta, SampledFunction<Scalar>(xs, ys));
    }

    Scalar alpha() const { return alpha_; }
    Scalar beta() const { return beta_; }
    const SampledFunction<Scalar>& q() const { return q_; }

    Scalar operator()(const Point2<Scalar>& p, const Point2<Scalar>& r) const {
        return alpha_ * std::abs(p.x() - r.x()) + beta_ * std::abs((p.y() - q_(p.x())) - (r.y() - q_(r.x())));
    }

private:
    Scalar alpha_, beta_;
    SampledFunction<Scalar> q_;
};

template <typename Scalar>
Scalar d_q(const TaxicabMetric<Scalar>& metric, const Point2<Scalar>& p, const Point2<Scalar>& r) {
    return metric(p, r);
}

template <typename Scalar>
struct ContractionAnalysis {
    Scalar lambda_l;
    Scalar lambda_S;
    Scalar s;
    Scalar eta;
    Scalar beta_max;      ///< +inf when lambda_S = 0
    bool unconstrained;   ///< beta_max carries no information
    Scalar alpha;
    Scalar beta;          ///< beta_max / 2, or 1 when unconstrained
    Scalar c;             ///< max{s, lambda_l + beta lambda_l lambda_S eta / alpha}
};

template <typename Scalar>
Scalar contraction_factor(Scalar s, Scalar lambda_l, Scalar lambda_S, Scalar eta, Scalar alpha, Scalar beta) {
    return std::max(s, lambda_l + beta * lambda_l * lambda_S * eta / alpha);
}

/// Strip contractivity constants for the maps of `p`, alpha = 1.
template <typename Scalar>
ContractionAnalysis<Scalar> contraction_analysis(const InterpolationProblem<Scalar>& p, Scalar eta) {
    if (!(eta > 0)) throw Error(ErrorCode::IndexOutOfRange, "eta must be positive");
    if (!(p.max_scaling() < 1)) throw Error(ErrorCode::ScalingNotContractive, "max |s_j| must be < 1");
    Scalar lambda_l = 0, lambda_S = 0;
    for (int n = 1; n <= p.intervals(); ++n) {
        const Scalar dx = p.knot(n) - p.knot(n - 1);
        lambda_l = std::max(lambda_l, dx / p.width());
        lambda_S = std::max(lambda_S, std::abs(p.scaling(n) - p.scaling(n - 1)) / dx);
    }
    if (!(lambda_l < 1)) throw Error(ErrorCode::NotContractive, "lambda_l >= 1 (a single map)");
    ContractionAnalysis<Scalar> out{};
    out.lambda_l = lambda_l;
    out.lambda_S = lambda_S;
    out.s = p.max_scaling();
    out.eta = eta;
    out.alpha = 1;
    out.unconstrained = lambda_S == 0;
    out.beta_max = out.unconstrained ? std::numeric_limits<Scalar>::infinity()
                                     : (1 - lambda_l) / (lambda_l * lambda_S * eta);
    out.beta = out.unconstrained ? Scalar(1) : out.beta_max / 2;
    out.c = contraction_factor(out.s, lambda_l, lambda_S, eta, out.alpha, out.beta);
    return out;
}

/// max_j |Y_j - b(X_j)| + 1, enlarged to max |f - b| + 1 over the samples of f
/// when that is bigger.
template <typename Scalar>
Scalar default_eta(const InterpolationProblem<Scalar>& p, const SampledFunction<Scalar>& f) {
    Scalar eta = 0;
    for (int j = 0; j <= p.intervals(); ++j) eta = std::max(eta, std::abs(p.value(j) - eval_b(p, p.knot(j))));
    eta += 1;
    Scalar spread = 0;
    for (Eigen::Index i = 0; i < f.size(); ++i)
        spread = std::max(spread, std::abs(f.ordinates()[i] - eval_b(p, f.abscissae()[i])));
    return std::max(eta, spread + 1);
}

template <typename Scalar>
struct ContractionAudit {
    Scalar max_ratio = 0;
    int worst_map = 0;
    Point2<Scalar> worst_p{0, 0}, worst_r{0, 0};
    long pairs = 0;
};

/// Samples point pairs from the strip |y - q(x)| <= eta and returns the worst
/// observed d(w_n p, w_n r)/d(p, r). When q is sampled on a knot lattice the
/// abscissae are drawn from every N-th sample so that the images land on
/// samples of q as well.
template <typename Scalar>
ContractionAudit<Scalar> verify_contraction(const BilinearMapSet<Scalar>& maps, const TaxicabMetric<Scalar>& metric,
                                            Scalar eta, long trials, std::uint64_t seed) {
    const auto& xs = metric.q().abscissae();
    const std::int64_t last = xs.size() - 1;
    const int N = maps.size();
    const std::int64_t stride = (last % N == 0) ? N : 1;
    const std::int64_t slots = last / stride + 1;
    Xorshift64Star rng(seed);
    auto draw = [&]() -> Point2<Scalar> {
        const Scalar x = xs[static_cast<Eigen::Index>(static_cast<std::int64_t>(rng.below(slots)) * stride)];
        return {x, metric.q()(x) + eta * Scalar(rng.uniform(-1.0, 1.0))};
    };
    ContractionAudit<Scalar> audit;
    for (long t = 0; t < trials; ++t) {
        const auto p = draw();
        const auto r = draw();
        const Scalar base = metric(p, r);
        if (!(base > 0)) continue;
        ++audit.pairs;
        for (int n = 1; n <= N; ++n) {
            const Scalar ratio = metric(maps.apply(n, p), maps.apply(n, r)) / base;
            if (ratio > audit.max_ratio) {
                audit.max_ratio = ratio;
                audit.worst_map = n;
                audit.worst_p = p;
                audit.worst_r = r;
            }
        }
    }
    return audit;
}

/// Smallest interval [lo, hi] with w_n(I x [lo, hi]) inside I x [lo, hi] for
/// every n, found by iterating the strip image from `guess`. It contains the
/// attractor, so it is a safe raster frame. Lattice extrema undershoot badly
/// when s is close to 1.
template <typename Scalar>
std::pair<Scalar, Scalar> invariant_strip(const BilinearMapSet<Scalar>& maps, std::pair<Scalar, Scalar> guess,
                                          int max_iterations = 100000) {
    // For fixed y each second coordinate is a quadratic in x.
    auto extremes = [&](int n, Scalar y, Scalar& lo, Scalar& hi) {
        auto at = [&](Scalar u) { return maps.apply(n, {std::lerp(maps.left(), maps.right(), u), y}).y(); };
        const Scalar q0 = at(0), qm = at(Scalar(0.5)), q1 = at(1);
        const Scalar a = 2 * q0 - 4 * qm + 2 * q1, b = -3 * q0 + 4 * qm - q1;
        lo = std::min({lo, q0, q1});
        hi = std::max({hi, q0, q1});
        if (a != 0) {
            const Scalar u = -b / (2 * a);
            if (u > 0 && u < 1) {
                lo = std::min(lo, at(u));
                hi = std::max(hi, at(u));
            }
        }
    };
    auto [lo, hi] = guess;
    for (int it = 0; it < max_iterations; ++it) {
        Scalar nlo = std::numeric_limits<Scalar>::infinity(), nhi = -nlo;
        for (int n = 1; n <= maps.size(); ++n) {
            extremes(n, lo, nlo, nhi);
            extremes(n, hi, nlo, nhi);
        }
        const Scalar change = std::max(std::abs(nlo - lo), std::abs(nhi - hi));
        lo = nlo;
        hi = nhi;
        if (change <= Scalar(1e-13) * (Scalar(1) + hi - lo)) {
            // Remaining drift is below change * s / (1 - s); cover it generously.
            const Scalar pad = Scalar(1e-9) * (Scalar(1) + hi - lo);
            return {lo - pad, hi + pad};
        }
    }
    throw Error(ErrorCode::NotContractive, "strip iteration does not settle; max |s_j| must be < 1");
}

/// Random orbit under uniformly chosen maps, started at the fixed point of w_1.
/// Deterministic for a given seed; rows are (x, y).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 2> chaos_game(const BilinearMapSet<Scalar>& maps, long n_points,
                                                    long burn_in, std::uint64_t seed) {
    if (n_points < 1) throw Error(ErrorCode::IndexOutOfRange, "n_points must be >= 1");
    Xorshift64Star rng(seed);
    const auto N = static_cast<std::uint64_t>(maps.size());
    Point2<Scalar> p = maps.anchor();
    for (long i = 0; i < burn_in; ++i) p = maps.apply(static_cast<int>(rng.below(N)) + 1, p);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 2> cloud(n_points, 2);
    for (long i = 0; i < n_points; ++i) {
        p = maps.apply(static_cast<int>(rng.below(N)) + 1, p);
        cloud.row(i) = p.transpose();
    }
    return cloud;
}

/// k rounds of B -> union_n w_n(B) on the raster. Each set pixel contributes
/// subsample^2 sub-cell centres; an image pixel is set when its closed square
/// contains a mapped centre. Sub-cell sampling fattens the set by up to half a
/// pixel per round, so the default maps the pixel centre alone.
template <typename Scalar>
Raster hutchinson_iterate(const BilinearMapSet<Scalar>& maps, const Raster& initial, int k, int subsample = 1) {
    if (subsample < 1) throw Error(ErrorCode::IndexOutOfRange, "subsample must be >= 1");
    if (k < 0) throw Error(ErrorCode::IndexOutOfRange, "k must be >= 0");
    Raster current = initial;
    const unsigned workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    for (int round = 0; round < k; ++round) {
        std::vector<Raster> partial(workers, current.blank());
        std::vector<int> escaped(workers, 0);
        auto work = [&](unsigned w) {
            Raster& out = partial[w];
            const double pw = current.pixel_width(), ph = current.pixel_height();
            for (int row = static_cast<int>(w); row < current.height(); row += static_cast<int>(workers)) {
                for (int col = 0; col < current.width(); ++col) {
                    if (!current.get(col, row)) continue;
                    for (int i = 0; i < subsample; ++i) {
                        const double x = current.xmin() + (col + (i + 0.5) / subsample) * pw;
                        for (int j = 0; j < subsample; ++j) {
                            const double y = current.ymax() - (row + (j + 0.5) / subsample) * ph;
                            for (int n = 1; n <= maps.size(); ++n) {
                                const auto img = maps.apply(n, Point2<Scalar>(Scalar(x), Scalar(y)));
                                if (!out.mark(double(img.x()), double(img.y()))) escaped[w] = 1;
                            }
                        }
                    }
                }
            }
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
        }
        if (std::any_of(escaped.begin(), escaped.end(), [](int e) { return e != 0; }))
            throw Error(ErrorCode::StripTooSmall, "map images escape the raster; widen ymin/ymax");
        Raster next = current.blank();
        for (const auto& part : partial) next.merge(part);
        current = std::move(next);
    }
    return current;
}

} // namespace bifract
