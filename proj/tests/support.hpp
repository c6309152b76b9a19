#pragma once

#include <Eigen/Core>

#include <initializer_list>

#include "bifract/biaffine.hpp"
#include "bifract/core.hpp"
#include "bifract/prng.hpp"

namespace bifract::testing {

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

inline Problem problem(std::initializer_list<double> x, std::initializer_list<double> y,
                       std::initializer_list<double> s) {
    return Problem(vec(x), vec(y), vec(s));
}

inline Eigen::VectorXd uniform_knots(int N, double a = 0.0, double b = 1.0) {
    Eigen::VectorXd x(N + 1);
    for (int j = 0; j <= N; ++j) x[j] = a + (b - a) * j / N;
    return x;
}

/// Random problem: N in [nmin, nmax], |s_j| <= smax, knots uniform or jittered.
inline Problem random_problem(Xorshift64Star& rng, int nmin = 2, int nmax = 6, double smax = 0.9,
                              bool uniform = false) {
    const int N = nmin + static_cast<int>(rng.below(static_cast<std::uint64_t>(nmax - nmin + 1)));
    const double a = rng.uniform(-2.0, 2.0);
    const double w = rng.uniform(0.5, 3.0);
    Eigen::VectorXd x(N + 1), y(N + 1), s(N + 1);
    if (uniform) {
        x = uniform_knots(N, a, a + w);
    } else {
        Eigen::VectorXd gaps(N);
        for (int n = 0; n < N; ++n) gaps[n] = rng.uniform(0.2, 1.0);
        gaps *= w / gaps.sum();
        x[0] = a;
        for (int n = 1; n <= N; ++n) x[n] = x[n - 1] + gaps[n - 1];
        x[N] = a + w;
    }
    for (int j = 0; j <= N; ++j) {
        y[j] = rng.uniform(-2.0, 2.0);
        s[j] = rng.uniform(-smax, smax);
    }
    return Problem(x, y, s);
}

/// Random unit-square chain with N intervals.
inline Chain random_chain(Xorshift64Star& rng, int N, bool uniform = true) {
    Eigen::VectorXd x = uniform_knots(N), lo(N + 1), hi(N + 1);
    if (!uniform) {
        for (int j = 1; j < N; ++j) x[j] = (j + rng.uniform(-0.4, 0.4)) / N;
    }
    for (int j = 0; j <= N; ++j) {
        lo[j] = rng.uniform(0.0, 0.6);
        hi[j] = lo[j] + rng.uniform(0.0, 0.99 - lo[j]);
    }
    return Chain(x, lo, hi);
}

} // namespace bifract::testing
