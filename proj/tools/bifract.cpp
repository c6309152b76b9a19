// bifract: fractal interpolation from the command line.
//
// Exit codes: 0 ok, 1 verification failed, 2 invalid input, 3 non-contractive
// input, 4 raster too small, 5 closed-form hypotheses violated.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "bifract/biaffine.hpp"
#include "bifract/core.hpp"
#include "bifract/dimension.hpp"
#include "bifract/ifs.hpp"
#include "bifract/io.hpp"
#include "bifract/operator.hpp"
#include "bifract/raster.hpp"
#include "bifract/verify.hpp"

using namespace bifract;

namespace {

enum Exit : int { kOk = 0, kVerifyFail = 1, kValidation = 2, kNonContractive = 3, kRaster = 4, kHypothesis = 5 };

struct RunConfig {
    std::string in, out;
    int depth = -1;
    double tol = 1e-10;
    std::string addresses;
    int address_depth = 3;

    std::string mode = "chaos";
    long points = 1000000;
    long burn_in = 100;
    std::uint64_t seed = 1;
    int k = 12;
    int width = 1024, height = 768;
    std::string format;
    double margin = 0.05;
    double ymin = std::numeric_limits<double>::quiet_NaN(), ymax = std::numeric_limits<double>::quiet_NaN();

    bool closed_form = false, empirical = false;
    int rmin = 4, rmax = 12, oversample = 6, fit_min_r = 4;
    std::string svg, dump_columns;

    std::string suite = "all";
    long trials = 100000;
    int r = 5;
    double eta = 0, beta = 0;
};

int exit_code_for(const Error& e) {
    switch (e.code()) {
    case ErrorCode::ScalingNotContractive:
    case ErrorCode::NotContractive: return kNonContractive;
    case ErrorCode::StripTooSmall: return kRaster;
    case ErrorCode::HypothesisViolated:
    case ErrorCode::NonUniformKnots: return kHypothesis;
    default: break;
    }
    // |s_j| >= 1 is a contractivity failure even though validation reports it.
    if (const auto* v = dynamic_cast<const ValidationError*>(&e); v && v->only(ErrorCode::ScalingOutOfRange))
        return kNonContractive;
    return kValidation;
}

std::optional<std::ofstream> maybe_file(const std::string& path, bool binary = false) {
    if (path.empty() || path == "-") return std::nullopt;
    return io::open_output(path, binary);
}

// Summaries go to stdout unless stdout carries the data.
std::ostream& summary_stream(const std::string& out) { return (out.empty() || out == "-") ? std::cerr : std::cout; }

int cmd_interpolate(const RunConfig& c) {
    const Problem p = io::read_problem(c.in);
    const OperatorContext<double> ctx(p);
    const int depth = c.depth >= 0 ? c.depth : default_lattice_depth(p.intervals());
    const KnotLattice<double> lattice(p, depth);
    const auto fp = fixed_point(ctx, lattice, c.tol);
    auto file = maybe_file(c.out);
    io::write_samples(file ? *file : std::cout, fp.f.abscissae(), fp.f.ordinates());
    auto& log = summary_stream(c.out);
    log << "iterations=" << fp.iterations << '\n'
        << "residual=" << io::format_double(fp.residual) << '\n'
        << "error_bound=" << io::format_double(fp.error_bound) << '\n'
        << "operator_norm_bound=" << io::format_double(operator_norm_bound(ctx)) << '\n'
        << "samples=" << lattice.size() << '\n';

    if (!c.addresses.empty()) {
        auto out = io::open_output(c.addresses);
        out << "word,anchor,x,f\n";
        const int N = p.intervals();
        std::vector<int> word;
        auto emit = [&](auto&& self, int len) -> void {
            if (static_cast<int>(word.size()) == len) {
                for (int j = 0; j <= N; ++j) {
                    const AddressPoint a{word, j};
                    const auto [x, fx] = eval_exact(p, a);
                    out << a.word_string() << ',' << j << ',' << io::format_double(x) << ','
                        << io::format_double(fx) << '\n';
                }
                return;
            }
            for (int n = 1; n <= N; ++n) {
                word.push_back(n);
                self(self, len);
                word.pop_back();
            }
        };
        for (int len = 0; len <= c.address_depth; ++len) emit(emit, len);
    }
    return kOk;
}

struct Scene {
    BilinearMapSet<double> maps;
    Raster frame;
    Eigen::VectorXd seed_x, seed_y;  // polyline for the deterministic start set
};

Scene make_scene(const RunConfig& c) {
    const auto table = io::read_table(c.in);
    if (io::detect_kind(table, c.in) == io::InputKind::Chain) {
        const Chain chain = io::chain_from_table(table, c.in);
        return {build_biaffine(chain), Raster(c.width, c.height, 0.0, 1.0, std::isnan(c.ymin) ? 0.0 : c.ymin, std::isnan(c.ymax) ? 1.0 : c.ymax), chain.knots(), chain.lower()};
    }
    const Problem p = io::problem_from_table(table, c.in);
    if (!(p.max_scaling() < 1)) throw Error(ErrorCode::ScalingNotContractive, "max |s_j| must be < 1");
    auto maps = build_maps(p);
    auto [lo, hi] = invariant_strip(maps, {p.values().minCoeff(), p.values().maxCoeff()});
    const double pad = c.margin * std::max(hi - lo, 1e-9);
    lo -= pad;
    hi += pad;
    if (!std::isnan(c.ymin)) lo = c.ymin;
    if (!std::isnan(c.ymax)) hi = c.ymax;
    return {std::move(maps), Raster(c.width, c.height, p.left(), p.right(), lo, hi), p.knots(), p.values()};
}

int cmd_render(const RunConfig& c) {
    if (c.mode != "chaos" && c.mode != "deterministic")
        throw Error(ErrorCode::ParseError, "--mode must be chaos or deterministic");
    const Scene scene = make_scene(c);
    Raster image = scene.frame.blank();
    if (c.mode == "chaos") {
        rasterize_points(chaos_game(scene.maps, c.points, c.burn_in, c.seed), image);
    } else {
        Raster start = scene.frame.blank();
        rasterize_polyline(scene.seed_x, scene.seed_y, start);
        image = hutchinson_iterate(scene.maps, start, c.k);
    }
    std::string format = c.format;
    if (format.empty()) format = (c.out.size() > 4 && c.out.substr(c.out.size() - 4) == ".svg") ? "svg" : "pgm";
    if (format != "pgm" && format != "svg") throw Error(ErrorCode::ParseError, "--format must be pgm or svg");
    auto file = maybe_file(c.out, format == "pgm");
    std::ostream& out = file ? *file : std::cout;
    if (format == "pgm")
        io::write_pgm(out, image);
    else
        io::write_svg_raster(out, image);
    summary_stream(c.out) << "pixels=" << image.count() << '\n';
    return kOk;
}

int cmd_dimension(const RunConfig& c) {
    const Problem p = io::read_problem(c.in);
    const bool empirical = c.empirical || !c.closed_form;
    // With no table to write, the summary is the output.
    auto& log = empirical ? summary_stream(c.out) : std::cout;
    log << "gamma=" << io::format_double(gamma_sum(p)) << '\n';
    const auto why = closed_form_obstruction(p);
    if (why && !c.closed_form) {
        log << "closed_form withheld: " << *why << '\n';
    } else {
        const auto cf = closed_form_dimension(p);  // HypothesisViolated -> exit 5
        if (cf.gamma_le_one)
            log << "degenerate: gamma<=1, dimension=1\n";
        else if (cf.collinear)
            log << "degenerate: collinear data, dimension=1\n";
        else
            log << "closed_form=" << io::format_double(cf.dimension) << '\n';
    }
    if (!empirical) return kOk;

    const auto rep = dimension_report(p, c.rmin, c.rmax, c.oversample, c.fit_min_r, !c.dump_columns.empty());
    log << "slope=" << io::format_double(rep.fit.slope) << '\n'
        << "ci95=[" << io::format_double(rep.fit.ci_low) << ',' << io::format_double(rep.fit.ci_high) << "]\n";
    auto file = maybe_file(c.out);
    io::write_dimension_csv(file ? *file : std::cout, rep);
    if (!c.svg.empty()) {
        auto svg = io::open_output(c.svg);
        io::write_loglog_svg(svg, rep);
    }
    if (!c.dump_columns.empty()) {
        auto cols = io::open_output(c.dump_columns);
        io::write_columns_csv(cols, rep);
    }
    return kOk;
}

verify::Subject default_subject() {
    Eigen::VectorXd x(3), y(3), s(3);
    x << 0, 0.5, 1;
    y << 0, 1, 0;
    s << 0.6, 0.8, 0.6;
    return Problem(x, y, s);
}

int cmd_verify(const RunConfig& c) {
    verify::Subject subject = default_subject();
    if (!c.in.empty()) {
        const auto table = io::read_table(c.in);
        if (io::detect_kind(table, c.in) == io::InputKind::Chain)
            subject = io::chain_from_table(table, c.in);
        else
            subject = io::problem_from_table(table, c.in);
    }
    verify::Options o;
    o.trials = c.trials;
    o.seed = c.seed;
    o.r = c.r;
    o.depth = c.depth;
    o.oversample = c.oversample;
    o.eta = c.eta;
    o.beta = c.beta;
    const auto records = verify::run(c.suite, subject, o);
    auto file = maybe_file(c.out);
    std::ostream& out = file ? *file : std::cout;
    int failed = 0;
    for (const auto& r : records) {
        out << r.to_json().dump() << '\n';
        if (!r.passed) {
            ++failed;
            std::cerr << "FAIL " << r.suite << '/' << r.check << ' ' << r.detail.dump() << '\n';
        }
    }
    summary_stream(c.out) << "checks=" << records.size() << " failed=" << failed << '\n';
    return failed ? kVerifyFail : kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bilinear fractal interpolation: interpolants, attractors, box-counting dimension"};
    app.require_subcommand(1);
    RunConfig c;

    auto* interp = app.add_subcommand("interpolate", "Fixed point of the operator on a knot lattice");
    interp->add_option("--in", c.in, "Problem CSV (x,y,s)")->required()->check(CLI::ExistingFile);
    interp->add_option("--out", c.out, "Output CSV (x,f); stdout when omitted");
    interp->add_option("--depth", c.depth, "Lattice depth (default: largest with <= 2^11 intervals)")
        ->envname("BIFRACT_DEPTH");
    interp->add_option("--tol", c.tol, "A-priori error tolerance")->envname("BIFRACT_TOL")->check(CLI::PositiveNumber);
    interp->add_option("--addresses", c.addresses, "Also write word,anchor,x,f for all short addresses");
    interp->add_option("--address-depth", c.address_depth, "Longest word for --addresses")
        ->envname("BIFRACT_ADDRESS_DEPTH")
        ->check(CLI::NonNegativeNumber);

    auto* render = app.add_subcommand("render", "Render the attractor");
    render->add_option("--in", c.in, "Problem (x,y,s) or chain (x,ylow,yhigh) CSV")->required()->check(CLI::ExistingFile);
    render->add_option("--out", c.out, "Output image; stdout when omitted");
    render->add_option("--mode", c.mode, "chaos | deterministic")->envname("BIFRACT_MODE");
    render->add_option("--points", c.points, "Chaos-game points")->envname("BIFRACT_POINTS")->check(CLI::PositiveNumber);
    render->add_option("--burn-in", c.burn_in, "Discarded chaos-game steps")
        ->envname("BIFRACT_BURN_IN")
        ->check(CLI::NonNegativeNumber);
    render->add_option("--seed", c.seed, "PRNG seed")->envname("BIFRACT_SEED");
    render->add_option("--k", c.k, "Hutchinson rounds")->envname("BIFRACT_K")->check(CLI::NonNegativeNumber);
    render->add_option("--width", c.width, "Raster width")->envname("BIFRACT_WIDTH")->check(CLI::PositiveNumber);
    render->add_option("--height", c.height, "Raster height")->envname("BIFRACT_HEIGHT")->check(CLI::PositiveNumber);
    render->add_option("--format", c.format, "pgm | svg (default from --out)")->envname("BIFRACT_FORMAT");
    render->add_option("--margin", c.margin, "Vertical margin as a fraction of the graph height")
        ->envname("BIFRACT_MARGIN")
        ->check(CLI::NonNegativeNumber);
    render->add_option("--ymin", c.ymin, "Bottom of the frame (default: an invariant strip)")->envname("BIFRACT_YMIN");
    render->add_option("--ymax", c.ymax, "Top of the frame (default: an invariant strip)")->envname("BIFRACT_YMAX");

    auto* dim = app.add_subcommand("dimension", "Closed-form and empirical box-counting dimension");
    dim->add_option("--in", c.in, "Problem CSV (x,y,s)")->required()->check(CLI::ExistingFile);
    dim->add_option("--out", c.out, "Report CSV (r,N_r,slope_partial); stdout when omitted");
    dim->add_flag("--closed-form", c.closed_form, "Closed-form value only (unless --empirical)");
    dim->add_flag("--empirical", c.empirical, "Grid counting only (unless --closed-form)");
    dim->add_option("--rmin", c.rmin, "Smallest resolution")->envname("BIFRACT_RMIN")->check(CLI::NonNegativeNumber);
    dim->add_option("--rmax", c.rmax, "Largest resolution")->envname("BIFRACT_RMAX")->check(CLI::NonNegativeNumber);
    dim->add_option("--oversample", c.oversample, "Extra address levels per column")
        ->envname("BIFRACT_OVERSAMPLE")
        ->check(CLI::PositiveNumber);
    dim->add_option("--fit-min-r", c.fit_min_r, "Resolutions below this are left out of the fit")
        ->envname("BIFRACT_FIT_MIN_R");
    dim->add_option("--svg", c.svg, "Log-log plot");
    dim->add_option("--dump-columns", c.dump_columns, "Per-column counts CSV (r,k,N_rk)");

    auto* ver = app.add_subcommand("verify", "Run invariant suites, JSON-lines log");
    ver->add_option("--in", c.in, "Problem or chain CSV (default: a built-in N=2 problem)")->check(CLI::ExistingFile);
    ver->add_option("--out", c.out, "JSON-lines log; stdout when omitted");
    ver->add_option("--suite", c.suite, "Suite name")
        ->envname("BIFRACT_SUITE")
        ->check(CLI::IsMember(verify::suite_names()));
    ver->add_option("--trials", c.trials, "Random trials")->envname("BIFRACT_TRIALS")->check(CLI::PositiveNumber);
    ver->add_option("--seed", c.seed, "PRNG seed")->envname("BIFRACT_SEED");
    ver->add_option("--r", c.r, "Recursion audit resolution")->envname("BIFRACT_R")->check(CLI::NonNegativeNumber);
    ver->add_option("--depth", c.depth, "Lattice depth")->envname("BIFRACT_DEPTH");
    ver->add_option("--oversample", c.oversample, "Extra address levels per column")
        ->envname("BIFRACT_OVERSAMPLE")
        ->check(CLI::PositiveNumber);
    ver->add_option("--eta", c.eta, "Strip half-height (default from the data)")->envname("BIFRACT_ETA");
    ver->add_option("--beta", c.beta, "Metric weight (default: half the admissible maximum)")->envname("BIFRACT_BETA");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*interp) return cmd_interpolate(c);
        if (*render) return cmd_render(c);
        if (*dim) return cmd_dimension(c);
        if (*ver) return cmd_verify(c);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    }
    return kOk;
}
