#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbr/errors.hpp"

namespace cbr::cli {

struct RunConfig {
    std::string command;  // e.g. "fit-fano", "synth g2"
    std::vector<std::string> inputs;
    std::filesystem::path output_dir = ".";
    nlohmann::json overrides = nlohmann::json::object();  // parsed --config document
    std::uint64_t seed = 1;
    int jobs = 1;
};

// 0 ok, 2 input error, 3 computation error, 4 internal error
int exit_code(ErrorClass c);

// {"code": .., "message": .., "context": ..} on one line
std::string error_line(const std::string& code, const std::string& message, const std::string& context = {});

// `cbr <command> [flags] <inputs...>`. Reports go to files under the output
// directory, a one-line JSON summary to `out` and failures to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cbr::cli
