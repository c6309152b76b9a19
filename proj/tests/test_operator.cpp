#include <gtest/gtest.h>

#include <cmath>

#include "bifract/operator.hpp"
#include "support.hpp"

using namespace bifract;
using bifract::testing::problem;
using bifract::testing::random_problem;

namespace {

// Random member of C* sampled on `xs`: h plus noise that vanishes at both ends.
Eigen::VectorXd random_cstar(const Problem& p, const Eigen::VectorXd& xs, Xorshift64Star& rng, double amp = 2.0) {
    Eigen::VectorXd g = sample_h(p, xs);
    for (Eigen::Index i = 1; i + 1 < g.size(); ++i) g[i] += rng.uniform(-amp, amp);
    return g;
}

double sup(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

} // namespace

TEST(RbApply, ZeroScalingGivesH) {
    const auto p = problem({0, 0.3, 1}, {1, -1, 2}, {0, 0, 0});
    const OperatorContext<double> ctx(p);
    const KnotLattice<double> lat(p, 4);
    Xorshift64Star rng(1);
    const auto g = random_cstar(p, lat.points(), rng);
    const auto tg = rb_apply(ctx, lat, g);
    for (Eigen::Index i = 0; i < tg.size(); ++i) EXPECT_DOUBLE_EQ(tg[i], eval_h(p, lat.points()[i]));
}

TEST(RbApply, ChordGivesH) {
    const auto p = problem({0, 0.5, 1}, {0, 1, 0.4}, {0.6, 0.6, 0.6});
    const OperatorContext<double> ctx(p);
    const Eigen::VectorXd knots = p.knots();
    Eigen::VectorXd bx(2), by(2);
    bx << 0, 1;
    by << 0, 0.4;
    const SampledFunction<double> b(bx, by);
    const KnotLattice<double> lat(p, 3);
    const auto tb = rb_apply(ctx, b, lat.points());
    for (Eigen::Index i = 0; i < tb.size(); ++i)
        EXPECT_NEAR(tb.ordinates()[i], eval_h(p, lat.points()[i]), 1e-15);
}

TEST(RbApply, FixedPointIsFixed) {
    Xorshift64Star rng(2);
    for (int t = 0; t < 20; ++t) {
        const auto p = random_problem(rng);
        const OperatorContext<double> ctx(p);
        const KnotLattice<double> lat(p, 3);
        const auto f = exact_samples(p, 3);
        const auto tf = rb_apply(ctx, lat, f.ordinates());
        EXPECT_EQ(tf, f.ordinates());
    }
}

TEST(RbApply, InterpolatesAtKnots) {
    Xorshift64Star rng(3);
    const auto p = problem({0, 0.25, 0.6, 1}, {0, 2, -1, 0.5}, {0.5, -0.7, 0.2, 0.4});
    const OperatorContext<double> ctx(p);
    const KnotLattice<double> lat(p, 3);
    const auto tg = rb_apply(ctx, lat, random_cstar(p, lat.points(), rng));
    for (int j = 0; j <= 3; ++j) EXPECT_EQ(tg[j * 27], p.value(j));
}

TEST(RbApply, RejectsGOutsideCStar) {
    const auto p = problem({0, 0.5, 1}, {0, 1, 0}, {0.5, 0.5, 0.5});
    const OperatorContext<double> ctx(p);
    const KnotLattice<double> lat(p, 2);
    Eigen::VectorXd g = sample_h(p, lat.points());
    g[0] = 0.1;
    try {
        rb_apply(ctx, lat, g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EndpointMismatch);
    }
    EXPECT_THROW(rb_apply(ctx, lat, Eigen::VectorXd(Eigen::VectorXd::Zero(3))), Error);
    // The generic form needs every knot in the output lattice.
    const SampledFunction<double> h(lat.points(), sample_h(p, lat.points()));
    Eigen::VectorXd bad(3);
    bad << 0, 0.4, 1;
    EXPECT_THROW(rb_apply(ctx, h, bad), Error);
}

TEST(RbApply, ContractionOnLattice) {
    Xorshift64Star rng(4);
    for (int t = 0; t < 30; ++t) {
        const auto p = random_problem(rng);
        const OperatorContext<double> ctx(p);
        const KnotLattice<double> lat(p, 3);
        for (int k = 0; k < 10; ++k) {
            const auto g1 = random_cstar(p, lat.points(), rng), g2 = random_cstar(p, lat.points(), rng);
            const double lhs = sup(rb_apply(ctx, lat, g1), rb_apply(ctx, lat, g2));
            EXPECT_LE(lhs, ctx.s() * sup(g1, g2) + 1e-12);
        }
    }
}

TEST(RbApply, GenericContractionSlackShrinks) {
    // Off-lattice reads add interpolation slack; on smooth g it decays as the
    // sample grid refines.
    const auto p = problem({0, 0.3, 1}, {0, 1, 0.2}, {0.5, -0.4, 0.6});
    const OperatorContext<double> ctx(p);
    const KnotLattice<double> out(p, 2);
    double previous = 1e9;
    for (int m : {16, 64, 256, 1024}) {
        Eigen::VectorXd xs(m + 1), g1(m + 1), g2(m + 1);
        for (int i = 0; i <= m; ++i) {
            xs[i] = double(i) / m;
            const double x = xs[i];
            g1[i] = eval_h(p, x) + std::sin(3 * M_PI * x) * 0.7;
            g2[i] = eval_h(p, x) + std::sin(5 * M_PI * x) * x * (1 - x);
        }
        const SampledFunction<double> a(xs, g1), b(xs, g2);
        const auto ta = rb_apply(ctx, a, out.points()), tb = rb_apply(ctx, b, out.points());
        double d = 0;
        for (int i = 0; i <= 4096; ++i) {
            const double x = i / 4096.0;
            d = std::max(d, std::abs(0.7 * std::sin(3 * M_PI * x) - std::sin(5 * M_PI * x) * x * (1 - x)));
        }
        const double slack = sup(ta.ordinates(), tb.ordinates()) - ctx.s() * d;
        EXPECT_LE(slack, previous + 1e-15);
        previous = std::max(slack, 0.0);
    }
    EXPECT_LT(previous, 1e-5);
}

TEST(FixedPoint, ZeroScalingStopsAfterOneStep) {
    const auto p = problem({0, 0.5, 1}, {0, 1, 0}, {0, 0, 0});
    const OperatorContext<double> ctx(p);
    const KnotLattice<double> lat(p, 5);
    const auto fp = fixed_point(ctx, lat, 1e-10);
    EXPECT_EQ(fp.iterations, 1);
    EXPECT_EQ(fp.residual, 0.0);
    EXPECT_EQ(fp.f.ordinates(), sample_h(p, lat.points()));
}

TEST(FixedPoint, ResidualBelowTolerance) {
    const auto p = problem({0, 0.5, 1}, {0, 1, 0}, {0.5, 0.5, 0.5});
    const OperatorContext<double> ctx(p);
    const KnotLattice<double> lat(p, 10);
    const auto fp = fixed_point(ctx, lat, 1e-10);
    const auto again = rb_apply(ctx, lat, fp.f.ordinates());
    EXPECT_LE(sup(again, fp.f.ordinates()), 1e-10);
    EXPECT_LE(fp.error_bound, 1e-10);
}

TEST(FixedPoint, IterationCountMatchesBanachBound) {
    Xorshift64Star rng(5);
    for (int t = 0; t < 30; ++t) {
        const auto p = random_problem(rng);
        const OperatorContext<double> ctx(p);
        const KnotLattice<double> lat(p, 2);
        const double tol = std::pow(10.0, -rng.uniform(4, 12));
        const auto fp = fixed_point(ctx, lat, tol);
        const int bound = static_cast<int>(
            std::ceil(std::log(tol * (1 - ctx.s()) / fp.initial_residual) / std::log(ctx.s())));
        EXPECT_LE(fp.iterations, std::max(1, bound));
        EXPECT_LE(fp.error_bound, tol);
        EXPECT_EQ(fp.iterations, iteration_bound(ctx.s(), fp.initial_residual, tol));
    }
    EXPECT_THROW(fixed_point(OperatorContext<double>(problem({0, 1}, {0, 0}, {0.5, 0.5})),
                             KnotLattice<double>(problem({0, 1}, {0, 0}, {0.5, 0.5}), 1), 0.0),
                 Error);
}

TEST(FixedPoint, ResidualsDecayGeometrically) {
    Xorshift64Star rng(6);
    for (int t = 0; t < 20; ++t) {
        const auto p = random_problem(rng);
        const OperatorContext<double> ctx(p);
        const KnotLattice<double> lat(p, 3);
        Eigen::VectorXd g = sample_h(p, lat.points());
        Eigen::VectorXd next = rb_apply(ctx, lat, g);
        const double d0 = sup(next, g);
        double sk = 1;
        for (int k = 0; k < 25; ++k) {
            const Eigen::VectorXd after = rb_apply(ctx, lat, next);
            sk *= ctx.s();
            EXPECT_LE(sup(after, next), sk * d0 * (1 + 1e-12) + 1e-15);
            g = next;
            next = after;
        }
    }
}

TEST(FixedPoint, InterpolatesExactly) {
    Xorshift64Star rng(7);
    for (int t = 0; t < 20; ++t) {
        const auto p = random_problem(rng);
        const OperatorContext<double> ctx(p);
        const int d = 3;
        const KnotLattice<double> lat(p, d);
        const auto fp = fixed_point(ctx, lat, 1e-9);
        std::int64_t step = 1;
        for (int i = 0; i < d; ++i) step *= p.intervals();
        for (int j = 0; j <= p.intervals(); ++j) EXPECT_EQ(fp.f.ordinates()[j * step], p.value(j));
    }
}

TEST(EvalExact, EmptyWordReturnsData) {
    const auto p = problem({0, 0.2, 1}, {3, -1, 2}, {0.5, 0.1, 0.9});
    for (int j = 0; j <= 2; ++j) {
        const auto [x, fx] = eval_exact(p, AddressPoint{{}, j});
        EXPECT_EQ(x, p.knot(j));
        EXPECT_EQ(fx, p.value(j));
    }
    EXPECT_THROW(eval_exact(p, AddressPoint{{3}, 0}), Error);
    EXPECT_THROW(eval_exact(p, AddressPoint{{}, 5}), Error);
}

TEST(EvalExact, ZeroScalingFollowsH) {
    const auto p = problem({0, 0.2, 0.5, 1}, {3, -1, 2, 0}, {0, 0, 0, 0});
    Xorshift64Star rng(8);
    for (int t = 0; t < 200; ++t) {
        AddressPoint a;
        for (int i = 0; i < 6; ++i) a.word.push_back(1 + static_cast<int>(rng.below(3)));
        a.anchor = static_cast<int>(rng.below(4));
        const auto [x, fx] = eval_exact(p, a);
        EXPECT_NEAR(fx, eval_h(p, x), 1e-14);
    }
}

TEST(EvalExact, AgreesWithIterate) {
    Xorshift64Star rng(9);
    for (int t = 0; t < 10; ++t) {
        const auto p = random_problem(rng, 2, 4);
        const OperatorContext<double> ctx(p);
        const int d = 4;
        const KnotLattice<double> lat(p, d);
        const auto fp = fixed_point(ctx, lat, 1e-11);
        for (int k = 0; k < 100; ++k) {
            AddressPoint a;
            for (int i = 0; i < d; ++i) a.word.push_back(1 + static_cast<int>(rng.below(p.intervals())));
            a.anchor = static_cast<int>(rng.below(p.intervals() + 1));
            const auto [x, fx] = eval_exact(ctx, a);
            EXPECT_NEAR(fp.f(x), fx, 1e-11);
        }
    }
}

TEST(ExactSamples, BitwiseEqualToAddressEvaluation) {
    Xorshift64Star rng(10);
    for (int t = 0; t < 10; ++t) {
        const auto p = random_problem(rng, 2, 4);
        const int N = p.intervals(), d = 3;
        const auto f = exact_samples(p, d);
        ASSERT_EQ(f.abscissae(), KnotLattice<double>(p, d).points());
        // Walk every depth-d address: word letters then anchor.
        std::vector<int> word(d, 1);
        while (true) {
            for (int j = 0; j <= N; ++j) {
                std::int64_t idx = j, scale = N;
                for (int i = d - 1; i >= 0; --i) {
                    idx += (word[i] - 1) * scale;
                    scale *= N;
                }
                const auto [x, fx] = eval_exact(p, AddressPoint{word, j});
                EXPECT_EQ(f.abscissae()[idx], x);
                EXPECT_EQ(f.ordinates()[idx], fx);
            }
            int i = d - 1;
            while (i >= 0 && word[i] == N) word[i--] = 1;
            if (i < 0) break;
            ++word[i];
        }
    }
}

TEST(OperatorNorm, Examples) {
    auto ctx_for = [](double s) { return OperatorContext<double>(problem({0, 1}, {0, 0}, {s, s})); };
    EXPECT_EQ(operator_norm_bound(ctx_for(0.0)), 1.0);
    EXPECT_DOUBLE_EQ(operator_norm_bound(ctx_for(0.5)), 3.0);
    EXPECT_NEAR(operator_norm_bound(ctx_for(0.9)), 19.0, 1e-12);
    EXPECT_NEAR(operator_norm_bound(ctx_for(-0.9)), 19.0, 1e-12);
}

TEST(OperatorNorm, BoundsActualNorm) {
    // ||Tg|| <= ||h|| + s(||g|| + ||b||); on the unit ball of C* with zero data this is <= s.
    const auto p = problem({0, 0.4, 1}, {0, 0, 0}, {0.7, -0.3, 0.7});
    const OperatorContext<double> ctx(p);
    const KnotLattice<double> lat(p, 4);
    Xorshift64Star rng(11);
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(lat.size());
        for (Eigen::Index i = 1; i + 1 < g.size(); ++i) g[i] = rng.uniform(-1, 1);
        const auto tg = rb_apply(ctx, lat, g);
        EXPECT_LE(tg.cwiseAbs().maxCoeff(), operator_norm_bound(ctx) * g.cwiseAbs().maxCoeff());
    }
}
