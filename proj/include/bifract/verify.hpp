#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bifract/biaffine.hpp"
#include "bifract/core.hpp"

namespace bifract::verify {

struct Options {
    long trials = 100000;
    std::uint64_t seed = 1;
    int r = 5;              ///< recursion audit resolution
    int depth = -1;         ///< lattice depth; -1 picks default_lattice_depth
    double tol = 1e-9;      ///< fixed-point residual tolerance
    int oversample = 6;
    int cylinder_words = 32;
    int cylinder_max_length = 6;
    double eta = 0;         ///< strip half-height; <= 0 picks default_eta
    double beta = 0;        ///< <= 0 picks half the admissible maximum
};

/// One assertion. Skipped checks pass; `detail` carries the measured tuple.
struct Record {
    std::string suite;
    std::string check;
    bool passed = true;
    bool skipped = false;
    nlohmann::json detail;

    nlohmann::json to_json() const;
};

using Subject = std::variant<Problem, Chain>;

const std::vector<std::string>& suite_names();

/// Runs one suite, or every suite for "all". Throws IndexOutOfRange for an
/// unknown name.
std::vector<Record> run(const std::string& suite, const Subject& subject, const Options& options);

} // namespace bifract::verify
