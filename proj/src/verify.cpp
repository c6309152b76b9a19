#include "bifract/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bifract/dimension.hpp"
#include "bifract/ifs.hpp"
#include "bifract/operator.hpp"
#include "bifract/prng.hpp"

namespace bifract::verify {

using nlohmann::json;

nlohmann::json Record::to_json() const {
    json j{{"suite", suite}, {"check", check}, {"status", skipped ? "skipped" : (passed ? "pass" : "fail")}};
    if (!detail.is_null()) j["detail"] = detail;
    return j;
}

namespace {

Problem problem_of(const Subject& subject) {
    if (const auto* p = std::get_if<Problem>(&subject)) return *p;
    return to_interpolation_problem(std::get<Chain>(subject));
}

int depth_for(const Problem& p, const Options& o) {
    return o.depth >= 0 ? o.depth : default_lattice_depth(p.intervals());
}

Record skip(const std::string& suite, const std::string& check, const std::string& why) {
    return {suite, check, true, true, json{{"reason", why}}};
}

double data_scale(const Problem& p) {
    return 1.0 + p.values().cwiseAbs().maxCoeff();
}

// Index of l_sigma(X_anchor) in the depth-d knot lattice, |sigma| <= d.
std::int64_t lattice_index(const AddressPoint& a, int N, int depth) {
    std::int64_t idx = a.anchor, scale = N;
    for (auto it = a.word.rbegin(); it != a.word.rend(); ++it) {
        idx += (*it - 1) * scale;
        scale *= N;
    }
    for (int d = static_cast<int>(a.word.size()); d < depth; ++d) idx *= N;
    return idx;
}

std::vector<Record> metric_suite(const Subject& subject, const Options& o) {
    const Problem p = problem_of(subject);
    const auto f = exact_samples(p, depth_for(p, o));
    const double eta = default_eta(p, f);
    Xorshift64Star rng(o.seed);
    auto point = [&]() -> Point2<double> {
        const double x = rng.uniform(p.left(), p.right());
        return {x, f(x) + rng.uniform(-eta, eta)};
    };
    long asymmetric = 0, identity = 0, positivity = 0, triangle = 0;
    double worst_triangle = -std::numeric_limits<double>::infinity();
    json first_failure;
    for (long t = 0; t < o.trials; ++t) {
        const TaxicabMetric<double> d(rng.uniform(0.1, 10.0), rng.uniform(0.1, 10.0), f);
        const auto a = point(), b = point(), c = point();
        const double ab = d(a, b), ba = d(b, a), bc = d(b, c), ac = d(a, c);
        const double excess = ac - (ab + bc);
        worst_triangle = std::max(worst_triangle, excess);
        bool bad = false;
        if (ab != ba) ++asymmetric, bad = true;
        if (d(a, a) != 0.0) ++identity, bad = true;
        if (a != b && !(ab > 0.0)) ++positivity, bad = true;
        if (excess > 1e-12 * (1.0 + ab + bc)) ++triangle, bad = true;
        if (bad && first_failure.is_null())
            first_failure = json{{"trial", t}, {"a", {a.x(), a.y()}}, {"b", {b.x(), b.y()}}, {"c", {c.x(), c.y()}}};
    }
    std::vector<Record> out;
    auto add = [&](const std::string& check, long failures, json extra = json::object()) {
        extra["trials"] = o.trials;
        extra["failures"] = failures;
        if (failures && !first_failure.is_null()) extra["first_failure"] = first_failure;
        out.push_back({"metric", check, failures == 0, false, extra});
    };
    add("symmetry", asymmetric);
    add("identity", identity);
    add("positivity", positivity);
    add("triangle", triangle, json{{"max_excess", worst_triangle}});
    return out;
}

std::vector<Record> contraction_suite(const Subject& subject, const Options& o) {
    std::vector<Record> out;
    const Problem p = problem_of(subject);
    if (p.intervals() < 2) {
        out.push_back(skip("contraction", "strip_metric", "a single map has lambda_l = 1"));
        return out;
    }
    const auto f = exact_samples(p, depth_for(p, o));
    const double eta = o.eta > 0 ? o.eta : default_eta(p, f);
    auto an = contraction_analysis(p, eta);
    // A user-supplied beta outside the admissible window is measured but not asserted.
    bool in_window = true;
    if (o.beta > 0) {
        in_window = an.unconstrained || o.beta < an.beta_max;
        an.beta = o.beta;
        an.c = contraction_factor(an.s, an.lambda_l, an.lambda_S, eta, an.alpha, an.beta);
    }
    const TaxicabMetric<double> metric(an.alpha, an.beta, f);
    const auto audit = verify_contraction(build_maps(p), metric, eta, o.trials, o.seed);
    json detail{{"lambda_l", an.lambda_l}, {"lambda_S", an.lambda_S}, {"s", an.s},
                {"eta", eta},              {"beta", an.beta},         {"unconstrained", an.unconstrained},
                {"c", an.c},               {"max_ratio", audit.max_ratio}, {"pairs", audit.pairs}};
    if (!an.unconstrained) detail["beta_max"] = an.beta_max;
    const bool ok = an.c < 1.0 && audit.max_ratio <= an.c + 1e-9;
    if (!ok)
        detail["worst"] = json{{"map", audit.worst_map},
                               {"p", {audit.worst_p.x(), audit.worst_p.y()}},
                               {"r", {audit.worst_r.x(), audit.worst_r.y()}}};
    if (!in_window) detail["outside_window"] = true;
    out.push_back({"contraction", "strip_metric", ok || !in_window, !in_window, detail});

    if (const auto* chain = std::get_if<Chain>(&subject)) {
        const auto cert = chain_certificate(*chain, o.trials, o.seed, o.beta);
        const bool window6 = cert.beta < cert.beta_max;
        const bool ok6 = cert.bound < 1.0 && cert.observed_ratio <= cert.bound + 1e-9;
        out.push_back({"contraction", "chain_certificate", ok6 || !window6, !window6,
                       json{{"lambda_l", cert.lambda_l},
                            {"beta_max", cert.beta_max},
                            {"beta", cert.beta},
                            {"max_rise", cert.max_rise},
                            {"max_slope", cert.max_slope},
                            {"bound", cert.bound},
                            {"max_ratio", cert.observed_ratio},
                            {"pairs", cert.pairs}}});
    } else {
        out.push_back(skip("contraction", "chain_certificate", "input is not a unit-square chain"));
    }
    return out;
}

std::vector<Record> fixedpoint_suite(const Subject& subject, const Options& o) {
    std::vector<Record> out;
    const Problem p = problem_of(subject);
    const int N = p.intervals();
    const int depth = depth_for(p, o);
    const OperatorContext<double> ctx(p);
    const KnotLattice<double> lattice(p, depth);
    const auto fp = fixed_point(ctx, lattice, o.tol);
    const auto& fv = fp.f.ordinates();

    std::int64_t stride = 1;
    for (int d = 0; d < depth; ++d) stride *= N;
    long misses = 0;
    for (int j = 0; j <= N; ++j)
        if (fv[static_cast<Eigen::Index>(j * stride)] != p.value(j)) ++misses;
    out.push_back({"fixedpoint", "interpolates", misses == 0, false, json{{"mismatched_knots", misses}}});

    out.push_back({"fixedpoint", "residual", fp.residual <= o.tol, false,
                   json{{"residual", fp.residual}, {"tol", o.tol}, {"iterations", fp.iterations},
                        {"lattice_points", lattice.size()}}});

    const int bound = iteration_bound(ctx.s(), fp.initial_residual, o.tol);
    out.push_back({"fixedpoint", "iteration_bound", fp.iterations <= bound && fp.error_bound <= o.tol, false,
                   json{{"iterations", fp.iterations}, {"bound", bound}, {"error_bound", fp.error_bound}}});

    // Address evaluation against the lattice iterate.
    Xorshift64Star rng(o.seed);
    double worst = 0;
    long samples = std::min<long>(o.trials, 2000);
    for (long t = 0; t < samples; ++t) {
        AddressPoint a;
        const int len = static_cast<int>(rng.below(static_cast<std::uint64_t>(depth) + 1));
        for (int i = 0; i < len; ++i) a.word.push_back(static_cast<int>(rng.below(N)) + 1);
        a.anchor = static_cast<int>(rng.below(static_cast<std::uint64_t>(N) + 1));
        const auto [x, fx] = eval_exact(p, a);
        const auto idx = static_cast<Eigen::Index>(lattice_index(a, N, depth));
        if (lattice.points()[idx] != x) {
            worst = std::numeric_limits<double>::infinity();
            break;
        }
        worst = std::max(worst, std::abs(fv[idx] - fx));
    }
    out.push_back({"fixedpoint", "address_agreement", worst <= o.tol, false,
                   json{{"max_difference", worst}, {"addresses", samples}}});
    return out;
}

// Bilinear map of the unit-square construction for data (X_j, lower_j, s_j).
BilinearMap<double> unit_square_map(const Problem& p, int n) {
    return {0.0, 1.0, p.knot(n - 1), p.knot(n), p.value(n - 1), p.value(n),
            p.value(n - 1) + p.scaling(n - 1), p.value(n) + p.scaling(n)};
}

double max_map_gap(const Problem& p, const BilinearMapSet<double>& a, const std::vector<BilinearMap<double>>& b) {
    double gap = 0;
    for (int n = 1; n <= p.intervals(); ++n)
        for (int i = 0; i <= 20; ++i)
            for (int k = 0; k <= 20; ++k) {
                const Point2<double> q(i / 20.0, -1.0 + k / 10.0);
                gap = std::max(gap, (a.apply(n, q) - b[static_cast<std::size_t>(n - 1)](q)).cwiseAbs().maxCoeff());
            }
    return gap;
}

std::vector<Record> vertices_suite(const Subject& subject, const Options&) {
    std::vector<Record> out;
    const Problem p = problem_of(subject);
    const int N = p.intervals();
    const auto maps = build_maps(p);
    const double scale = data_scale(p);
    std::vector<double> probes;
    for (int k = -10; k <= 10; ++k) probes.push_back(p.value(0) + 0.3 * k);
    const double defect = endpoint_identity_defect(maps, p, probes);
    out.push_back({"vertices", "endpoint_identities", defect <= 1e-12 * scale, false, json{{"max_defect", defect}}});

    double join = 0;
    for (int n = 1; n < N; ++n)
        for (double y : probes) {
            const auto right = maps.apply(n, {p.right(), y});
            const auto left = maps.apply(n + 1, {p.left(), y - p.value(N) + p.value(0)});
            join = std::max(join, (right - left).cwiseAbs().maxCoeff());
        }
    out.push_back({"vertices", "pieces_join", join <= 1e-12 * scale, false, json{{"max_gap", join}}});

    const auto* chain = std::get_if<Chain>(&subject);
    if (!chain) {
        for (const char* c : {"corner_images", "containment", "line_to_line", "consistency"})
            out.push_back(skip("vertices", c, "input is not a unit-square chain"));
        return out;
    }
    const auto bi = build_biaffine(*chain);
    const auto& X = chain->knots();
    const auto& lo = chain->lower();
    const auto& hi = chain->upper();
    long corner_misses = 0;
    for (int n = 1; n <= N; ++n) {
        const auto A = bi.apply(n, {0, 0}), B = bi.apply(n, {1, 0}), C = bi.apply(n, {1, 1}), D = bi.apply(n, {0, 1});
        corner_misses += !(A.x() == X[n - 1] && A.y() == lo[n - 1]);
        corner_misses += !(B.x() == X[n] && B.y() == lo[n]);
        corner_misses += !(C.x() == X[n] && C.y() == hi[n]);
        corner_misses += !(D.x() == X[n - 1] && D.y() == hi[n - 1]);
    }
    out.push_back({"vertices", "corner_images", corner_misses == 0, false, json{{"misses", corner_misses}}});

    long outside = 0;
    double straight = 0;
    for (int n = 1; n <= N; ++n) {
        for (int i = 0; i <= 32; ++i)
            for (int k = 0; k <= 32; ++k) {
                const auto q = bi.apply(n, {i / 32.0, k / 32.0});
                const double t = (q.x() - X[n - 1]) / (X[n] - X[n - 1]);
                const double floor_y = std::lerp(lo[n - 1], lo[n], t), ceil_y = std::lerp(hi[n - 1], hi[n], t);
                const double eps = 1e-12;
                if (q.x() < X[n - 1] - eps || q.x() > X[n] + eps || q.y() < floor_y - eps || q.y() > ceil_y + eps ||
                    q.y() < -eps || q.y() >= 1.0)
                    ++outside;
            }
        for (int i = 0; i <= 8; ++i) {
            const double c = i / 8.0;
            // Images of three points on a horizontal and on a vertical line.
            for (int dir = 0; dir < 2; ++dir) {
                auto at = [&](double t) -> Point2<double> { return dir ? Point2<double>(c, t) : Point2<double>(t, c); };
                const auto a = bi.apply(n, at(0.0)), m = bi.apply(n, at(0.37)), b = bi.apply(n, at(1.0));
                const double cross = (m.x() - a.x()) * (b.y() - a.y()) - (m.y() - a.y()) * (b.x() - a.x());
                straight = std::max(straight, std::abs(cross));
            }
        }
    }
    out.push_back({"vertices", "containment", outside == 0, false, json{{"outside", outside}}});
    out.push_back({"vertices", "line_to_line", straight <= 1e-12, false, json{{"max_cross", straight}}});

    // The chord-based maps coincide with the unit-square maps once the data
    // are shifted so that both end values vanish.
    const Problem normalized = normalize(p);
    std::vector<BilinearMap<double>> square;
    for (int n = 1; n <= N; ++n) square.push_back(unit_square_map(normalized, n));
    const double gap = max_map_gap(normalized, build_maps(normalized), square);
    out.push_back({"vertices", "consistency", gap <= 1e-12, false, json{{"max_gap", gap}, {"normalized", true}}});
    return out;
}

std::vector<Record> recursion_suite(const Subject& subject, const Options& o) {
    const Problem p = problem_of(subject);
    try {
        const auto audit = recursion_bounds_check(p, o.r, o.oversample);
        std::vector<Record> out;
        json cells = json::array();
        for (const auto& c : audit.worst)
            cells.push_back({{"k", c.k}, {"n", c.n}, {"measured", c.measured}, {"lower", c.lower}, {"upper", c.upper}});
        out.push_back({"recursion", "per_cell", audit.violations == 0, false,
                       json{{"r", o.r},
                            {"cells", audit.cells},
                            {"violations", audit.violations},
                            {"max_violation", audit.max_violation},
                            {audit.violations ? "violating" : "tightest", cells}}});
        if (audit.aggregate_applicable)
            out.push_back({"recursion", "aggregate", audit.aggregate_violations == 0, false,
                           json{{"r", o.r},
                                {"c1", audit.c1},
                                {"violations", audit.aggregate_violations},
                                {"max_violation", audit.aggregate_max_violation}}});
        else
            out.push_back(skip("recursion", "aggregate", "s_0 != s_N"));
        return out;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::HypothesisViolated && e.code() != ErrorCode::NonUniformKnots) throw;
        return {skip("recursion", "per_cell", e.what()), skip("recursion", "aggregate", e.what())};
    }
}

std::vector<Record> cylinder_suite(const Subject& subject, const Options& o) {
    const Problem p = problem_of(subject);
    const int N = p.intervals();
    std::vector<std::vector<int>> words{{}};
    Xorshift64Star rng(o.seed);
    for (int w = 0; w < o.cylinder_words; ++w) {
        const int len = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.cylinder_max_length)));
        std::vector<int> word;
        for (int i = 0; i < len; ++i) word.push_back(static_cast<int>(rng.below(N)) + 1);
        words.push_back(std::move(word));
    }
    std::vector<CylinderReport> reports;
    try {
        for (const auto& w : words) reports.push_back(cylinder_count(p, w, o.oversample));
    } catch (const Error& e) {
        if (e.code() != ErrorCode::HypothesisViolated && e.code() != ErrorCode::NonUniformKnots) throw;
        return {skip("cylinder", "bounds", e.what()), skip("cylinder", "empty_word", e.what())};
    }
    long outside = 0;
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0;
    json failures = json::array();
    for (const auto& rep : reports) {
        if (!(rep.lower <= double(rep.count) && double(rep.count) <= rep.upper)) {
            ++outside;
            if (failures.size() < 8)
                failures.push_back({{"word", rep.word}, {"count", rep.count}, {"lower", rep.lower}, {"upper", rep.upper}});
        }
        rmin = std::min(rmin, rep.ratio);
        rmax = std::max(rmax, rep.ratio);
    }
    std::vector<Record> out;
    json detail{{"words", reports.size()}, {"outside", outside}, {"ratio_min", rmin}, {"ratio_max", rmax}};
    if (outside) detail["failures"] = failures;
    out.push_back({"cylinder", "bounds", outside == 0, false, detail});
    const auto full = box_count(normalize(p), 0, o.oversample).total;
    out.push_back({"cylinder", "empty_word", reports.front().count == full, false,
                   json{{"count", reports.front().count}, {"box_count", full}}});
    return out;
}

} // namespace

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"metric", "contraction", "fixedpoint", "vertices", "recursion",
                                                "cylinder", "all"};
    return names;
}

std::vector<Record> run(const std::string& suite, const Subject& subject, const Options& options) {
    using Runner = std::vector<Record> (*)(const Subject&, const Options&);
    static const std::vector<std::pair<std::string, Runner>> table{
        {"metric", metric_suite},       {"contraction", contraction_suite}, {"fixedpoint", fixedpoint_suite},
        {"vertices", vertices_suite},   {"recursion", recursion_suite},     {"cylinder", cylinder_suite}};
    std::vector<Record> out;
    bool matched = false;
    for (const auto& [name, runner] : table) {
        if (suite != "all" && suite != name) continue;
        matched = true;
        auto part = runner(subject, options);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    if (!matched) throw Error(ErrorCode::IndexOutOfRange, "unknown suite '" + suite + "'");
    return out;
}

} // namespace bifract::verify
