#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "bifract/core.hpp"
#include "bifract/ifs.hpp"
#include "bifract/prng.hpp"

namespace bifract {

/// Two data chains over knots 0 = X_0 < ... < X_N = 1 with
/// 0 <= lower_j <= upper_j < 1. Map n sends the unit square onto the
/// trapezoid with vertices (X_{n-1}, lower_{n-1}), (X_n, lower_n),
/// (X_n, upper_n), (X_{n-1}, upper_{n-1}).
template <typename Scalar>
class TrapezoidChain {
public:
    using Vector = VectorX<Scalar>;

    TrapezoidChain(Vector knots, Vector lower, Vector upper)
        : knots_(std::move(knots)), lower_(std::move(lower)), upper_(std::move(upper)) {
        auto violations = check(knots_, lower_, upper_);
        if (!violations.empty()) throw ValidationError(std::move(violations));
    }

    static std::vector<Violation> check(const Vector& knots, const Vector& lower, const Vector& upper) {
        std::vector<Violation> out;
        if (knots.size() != lower.size() || knots.size() != upper.size()) {
            out.push_back({ErrorCode::SizeMismatch, 0, "knots/ylow/yhigh sizes differ"});
            return out;
        }
        if (knots.size() < 2) {
            out.push_back({ErrorCode::TooFewKnots, 0, "need at least two knots"});
            return out;
        }
        if (knots[0] != Scalar(0) || knots[knots.size() - 1] != Scalar(1))
            out.push_back({ErrorCode::InvalidChain, 0, "chain knots must start at 0 and end at 1"});
        for (Eigen::Index j = 0; j + 1 < knots.size(); ++j) {
            if (!(knots[j] < knots[j + 1])) {
                std::ostringstream os;
                os << "knot " << j + 1 << " does not exceed knot " << j;
                out.push_back({ErrorCode::NonIncreasingKnots, static_cast<std::size_t>(j + 1), os.str()});
            }
        }
        for (Eigen::Index j = 0; j < knots.size(); ++j) {
            if (!(Scalar(0) <= lower[j] && lower[j] <= upper[j] && upper[j] < Scalar(1))) {
                std::ostringstream os;
                os << "row " << j << " violates 0 <= ylow <= yhigh < 1 (" << lower[j] << ", " << upper[j] << ")";
                out.push_back({ErrorCode::InvalidChain, static_cast<std::size_t>(j), os.str()});
            }
        }
        return out;
    }

    int intervals() const { return static_cast<int>(knots_.size()) - 1; }
    const Vector& knots() const { return knots_; }
    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }

    /// s_j = upper_j - lower_j.
    Vector scalings() const { return upper_ - lower_; }
    Scalar scaling(int j) const { return upper_[j] - lower_[j]; }

    /// a_n = lower_n - lower_{n-1}.
    Scalar rise(int n) const { return lower_[n] - lower_[n - 1]; }

private:
    Vector knots_, lower_, upper_;
};

using Chain = TrapezoidChain<double>;

/// w_n = (l_n, B_n) with B_n(x, y) = a_n x + [s_{n-1} + (s_n - s_{n-1}) x] y + lower_{n-1},
/// held as the bilinear interpolant of the trapezoid's vertex ordinates.
template <typename Scalar>
BilinearMapSet<Scalar> build_biaffine(const TrapezoidChain<Scalar>& chain) {
    const auto& X = chain.knots();
    const auto& lo = chain.lower();
    const auto& hi = chain.upper();
    std::vector<BilinearMap<Scalar>> maps;
    for (int n = 1; n <= chain.intervals(); ++n)
        maps.emplace_back(Scalar(0), Scalar(1), X[n - 1], X[n], lo[n - 1], lo[n], hi[n - 1], hi[n]);
    return BilinearMapSet<Scalar>(Scalar(0), Scalar(1), std::move(maps));
}

/// The interpolation problem with knots X_j, values lower_j and scalings
/// upper_j - lower_j.
template <typename Scalar>
InterpolationProblem<Scalar> to_interpolation_problem(const TrapezoidChain<Scalar>& chain) {
    return InterpolationProblem<Scalar>(chain.knots(), chain.lower(), chain.scalings());
}

template <typename Scalar>
struct ChainCertificate {
    Scalar lambda_l;
    Scalar beta_max;        ///< (1 - lambda_l)/2
    Scalar beta;            ///< beta used for the audit
    Scalar max_rise;        ///< max_n |a_n|
    Scalar max_slope;       ///< max_n |s_n - s_{n-1}|
    Scalar max_scaling;     ///< max_j s_j
    Scalar bound;           ///< max{lambda_l + 2 beta, max_j s_j}
    Scalar observed_ratio;  ///< worst sampled d_1(w p, w r)/d_1(p, r)
    long pairs;
};

/// Audits contractivity of the bi-affine maps in d_1 (q = 1, alpha = 1) on
/// uniformly drawn point pairs of the unit square. beta <= 0 selects
/// beta_max / 2.
template <typename Scalar>
ChainCertificate<Scalar> chain_certificate(const TrapezoidChain<Scalar>& chain, long trials = 100000,
                                                 std::uint64_t seed = 1, Scalar beta = Scalar(0)) {
    const int N = chain.intervals();
    ChainCertificate<Scalar> cert{};
    for (int n = 1; n <= N; ++n) {
        cert.lambda_l = std::max(cert.lambda_l, chain.knots()[n] - chain.knots()[n - 1]);
        cert.max_rise = std::max(cert.max_rise, std::abs(chain.rise(n)));
        cert.max_slope = std::max(cert.max_slope, std::abs(chain.scaling(n) - chain.scaling(n - 1)));
    }
    if (!(cert.lambda_l < 1)) throw Error(ErrorCode::NotContractive, "lambda_l >= 1 (a single map)");
    cert.max_scaling = chain.scalings().maxCoeff();
    cert.beta_max = (1 - cert.lambda_l) / 2;
    cert.beta = beta > 0 ? beta : cert.beta_max / 2;
    cert.bound = std::max(cert.lambda_l + 2 * cert.beta, cert.max_scaling);

    const auto maps = build_biaffine(chain);
    const auto metric = TaxicabMetric<Scalar>::constant(Scalar(1), cert.beta, Scalar(0), Scalar(1), Scalar(1));
    Xorshift64Star rng(seed);
    for (long t = 0; t < trials; ++t) {
        const Point2<Scalar> p(Scalar(rng.uniform()), Scalar(rng.uniform()));
        const Point2<Scalar> r(Scalar(rng.uniform()), Scalar(rng.uniform()));
        const Scalar base = metric(p, r);
        if (!(base > 0)) continue;
        ++cert.pairs;
        for (int n = 1; n <= N; ++n)
            cert.observed_ratio = std::max(cert.observed_ratio, metric(maps.apply(n, p), maps.apply(n, r)) / base);
    }
    return cert;
}

} // namespace bifract
