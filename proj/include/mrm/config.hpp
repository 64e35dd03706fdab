#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mrm/io.hpp"
#include "mrm/model.hpp"

namespace mrm {

/// Everything a run of the command-line tool depends on. Serialized as
/// key=value pairs into the header of every output file.
struct RunConfig
{
    std::string command;
    ModelParams params;
    int grid = 256;
    int replicas = 1;
    std::string input;

    // transport
    int steps = 0;  // 0: auto (min_steps)
    bool force = false;
    std::string solver = "auto";
    double epsilon = 1e-2;
    double tol = 1e-6;
    int max_iter = 20000;
    int exact_threshold = 4096;

    // scaling
    std::vector<double> qs{0.5, 1.0, 2.0};
    std::vector<double> radii;  // empty: T/16 .. T/2

    // kpz
    std::string set = "segment";
    bool lebesgue = false;
    int scale_min = 3;
    int scale_max = 8;

    // geodesic
    std::vector<double> from;
    std::vector<double> to;
    int samples = 200;
    int pairs = 0;

    // timechange
    std::string mode = "path";
    int bm_resolution = 4;
    int eval_n = 16;
    std::string anchor = "origin";

    bool csv = false;

    KeyValues emit() const;
    /// Reads the keys emit() writes; other keys are ignored, missing ones
    /// keep their defaults.
    static RunConfig parse(const KeyValues& kv);

    bool operator==(const RunConfig&) const = default;
};

std::string join_doubles(const std::vector<double>& v);
std::vector<double> split_doubles(const std::string& s);

/// Where and how a run executes. Kept out of RunConfig so identical
/// configs write identical files.
struct RunTarget
{
    std::string out = ".";
    int threads = 1;
};

/// Runs one subcommand, writing files under target.out. Data summaries go
/// to `log` as JSON lines, warnings to `warn` as JSON lines. Returns the
/// process exit code.
int run_command(const RunConfig& config, const RunTarget& target, std::ostream& log,
                std::ostream& warn);

}  // namespace mrm
