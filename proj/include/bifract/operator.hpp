#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>

#include "bifract/core.hpp"

namespace bifract {

/// The Read-Bajraktarevic operator Tg = h + S (g o L - b o L) for one problem.
template <typename Scalar>
class OperatorContext {
public:
    explicit OperatorContext(InterpolationProblem<Scalar> problem) : problem_(std::move(problem)) {
        if (!(problem_.max_scaling() < Scalar(1)))
            throw Error(ErrorCode::ScalingNotContractive, "max |s_j| must be < 1");
    }

    const InterpolationProblem<Scalar>& problem() const { return problem_; }
    Scalar s() const { return problem_.max_scaling(); }

private:
    InterpolationProblem<Scalar> problem_;
};

/// Functional equation f(l_n(z)) = h(l_n(z)) + S_n(z) (f(z) - b(z)), with
/// x = l_n(z) supplied by the caller. Every exact evaluation path
/// (addresses, exact lattice samples, box counting) goes through this.
template <typename Scalar>
inline Scalar functional_step(const InterpolationProblem<Scalar>& p, int n, Scalar z, Scalar fz, Scalar x) {
    return detail::h_piece(p, n, x) + detail::scaling_piece(p, n, z) * (fz - detail::chord(p, z));
}

/// h sampled at the given abscissae.
template <typename Scalar>
VectorX<Scalar> sample_h(const InterpolationProblem<Scalar>& p, const VectorX<Scalar>& xs) {
    VectorX<Scalar> out(xs.size());
    for (Eigen::Index i = 0; i < xs.size(); ++i) out[i] = eval_h(p, xs[i]);
    return out;
}

namespace detail {

template <typename Scalar>
void require_endpoints(const InterpolationProblem<Scalar>& p, Scalar g0, Scalar gN) {
    auto close = [](Scalar a, Scalar b) {
        return std::abs(a - b) <= Scalar(1e-12) * (Scalar(1) + std::abs(b));
    };
    if (!close(g0, p.value(0)) || !close(gN, p.value(p.intervals())))
        throw Error(ErrorCode::EndpointMismatch, "g must satisfy g(X_0) = Y_0 and g(X_N) = Y_N");
}

} // namespace detail

/// T applied on a knot lattice. g holds values at lattice.points(); the
/// preimage L(x_i) is itself a lattice point, so no interpolation happens.
template <typename Scalar>
VectorX<Scalar> rb_apply(const OperatorContext<Scalar>& ctx, const KnotLattice<Scalar>& lattice,
                         const VectorX<Scalar>& g) {
    const auto& p = ctx.problem();
    if (g.size() != lattice.size()) throw Error(ErrorCode::SizeMismatch, "g is not sampled on the lattice");
    detail::require_endpoints(p, g[0], g[g.size() - 1]);
    const auto& xs = lattice.points();
    VectorX<Scalar> out(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const auto [n, j] = lattice.source(i);
        out[i] = functional_step(p, n, xs[j], g[j], xs[i]);
    }
    return out;
}

/// T applied to an arbitrary sampled g, evaluated at `lattice` (which must
/// contain every knot). Reads of g between its samples are piecewise linear.
template <typename Scalar>
SampledFunction<Scalar> rb_apply(const OperatorContext<Scalar>& ctx, const SampledFunction<Scalar>& g,
                                 const VectorX<Scalar>& lattice) {
    const auto& p = ctx.problem();
    if (g.front() != p.left() || g.back() != p.right())
        throw Error(ErrorCode::PointOutsideDomain, "g must be sampled over all of I");
    detail::require_endpoints(p, g.ordinates()[0], g.ordinates()[g.size() - 1]);
    for (int j = 0; j <= p.intervals(); ++j) {
        const Scalar* b = lattice.data();
        if (!std::binary_search(b, b + lattice.size(), p.knot(j)))
            throw Error(ErrorCode::SizeMismatch, "lattice must contain every knot");
    }
    VectorX<Scalar> out(lattice.size());
    for (Eigen::Index i = 0; i < lattice.size(); ++i) {
        const auto [n, y] = eval_L(p, lattice[i]);
        out[i] = functional_step(p, n, y, g(y), lattice[i]);
    }
    return SampledFunction<Scalar>(lattice, std::move(out));
}

template <typename Scalar>
struct FixedPointResult {
    SampledFunction<Scalar> f;
    int iterations;            ///< k, the number of applications of T
    Scalar initial_residual;   ///< d(T f_0, f_0)
    Scalar residual;           ///< d(T f_k, f_k)
    Scalar error_bound;        ///< s^k / (1 - s) d(T f_0, f_0)
};

/// Smallest k >= 1 with s^k/(1-s) d0 <= tol.
template <typename Scalar>
int iteration_bound(Scalar s, Scalar d0, Scalar tol) {
    if (d0 <= tol * (Scalar(1) - s) || s == Scalar(0)) return 1;
    const Scalar k = std::ceil(std::log(tol * (Scalar(1) - s) / d0) / std::log(s));
    return std::max(1, static_cast<int>(k));
}

/// Banach iteration from f_0 = h on the knot lattice, stopped by the a-priori
/// estimate s^k/(1-s) d(T f_0, f_0) <= tol.
template <typename Scalar>
FixedPointResult<Scalar> fixed_point(const OperatorContext<Scalar>& ctx, const KnotLattice<Scalar>& lattice,
                                     Scalar tol) {
    if (!(tol > Scalar(0))) throw Error(ErrorCode::IndexOutOfRange, "tolerance must be positive");
    const Scalar s = ctx.s();
    VectorX<Scalar> g = sample_h(ctx.problem(), lattice.points());
    VectorX<Scalar> next = rb_apply(ctx, lattice, g);
    const Scalar d0 = (next - g).cwiseAbs().maxCoeff();
    int k = 1;
    Scalar sk = s;
    g.swap(next);
    while (sk / (Scalar(1) - s) * d0 > tol) {
        next = rb_apply(ctx, lattice, g);
        g.swap(next);
        ++k;
        sk *= s;
    }
    next = rb_apply(ctx, lattice, g);
    const Scalar residual = (next - g).cwiseAbs().maxCoeff();
    return {SampledFunction<Scalar>(lattice.points(), std::move(g)), k, d0, residual,
            sk / (Scalar(1) - s) * d0};
}

/// f at an address point, by forward application of the functional equation
/// from f(X_anchor) = Y_anchor. No iteration error.
template <typename Scalar>
std::pair<Scalar, Scalar> eval_exact(const InterpolationProblem<Scalar>& p, const AddressPoint& addr) {
    const int N = p.intervals();
    if (addr.anchor < 0 || addr.anchor > N)
        throw Error(ErrorCode::IndexOutOfRange, "anchor " + std::to_string(addr.anchor) + " outside 0..N");
    Scalar x = p.knot(addr.anchor);
    Scalar fx = p.value(addr.anchor);
    for (auto it = addr.word.rbegin(); it != addr.word.rend(); ++it) {
        const int n = *it;
        if (n < 1 || n > N) throw Error(ErrorCode::IndexOutOfRange, "letter " + std::to_string(n) + " outside 1..N");
        const Scalar xn = detail::map_l(p, n, x);
        fx = functional_step(p, n, x, fx, xn);
        x = xn;
    }
    return {x, fx};
}

template <typename Scalar>
std::pair<Scalar, Scalar> eval_exact(const OperatorContext<Scalar>& ctx, const AddressPoint& addr) {
    return eval_exact(ctx.problem(), addr);
}

/// f on the depth-d knot lattice, level by level through the functional
/// equation. Bitwise equal to eval_exact at every address.
template <typename Scalar>
SampledFunction<Scalar> exact_samples(const InterpolationProblem<Scalar>& p, int depth) {
    const KnotLattice<Scalar> lattice(p, depth);  // size check
    const int N = p.intervals();
    VectorX<Scalar> xs = p.knots();
    VectorX<Scalar> fs = p.values();
    for (int d = 0; d < depth; ++d) {
        const Eigen::Index m = xs.size() - 1;
        VectorX<Scalar> nx(N * m + 1), nf(N * m + 1);
        for (int n = 1; n <= N; ++n) {
            for (Eigen::Index t = 0; t <= m; ++t) {
                const Scalar x = detail::map_l(p, n, xs[t]);
                nx[(n - 1) * m + t] = x;
                nf[(n - 1) * m + t] = functional_step(p, n, xs[t], fs[t], x);
            }
        }
        xs.swap(nx);
        fs.swap(nf);
    }
    return SampledFunction<Scalar>(std::move(xs), std::move(fs));
}

/// ||T|| <= (1 + s)/(1 - s).
template <typename Scalar>
Scalar operator_norm_bound(const OperatorContext<Scalar>& ctx) {
    const Scalar s = ctx.s();
    return (Scalar(1) + s) / (Scalar(1) - s);
}

} // namespace bifract
