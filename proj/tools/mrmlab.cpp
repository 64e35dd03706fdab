// mrmlab: command-line front end of the multifractal random measure lab.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mrm/config.hpp"

namespace {

struct Flag
{
    const char* name;
    const char* key;
    const char* help;
};

void add_flags(CLI::App* sub, mrm::KeyValues& flags, std::initializer_list<Flag> list)
{
    for (const Flag& f : list) {
        const std::string key = f.key;
        sub->add_option_function<std::string>(
            f.name, [&flags, key](const std::string& v) { flags.set(key, v); }, f.help);
    }
}

void add_switch(CLI::App* sub, mrm::KeyValues& flags, const char* name, const char* key,
                const char* help)
{
    const std::string k = key;
    sub->add_flag_callback(name, [&flags, k] { flags.set(k, std::string("1")); }, help);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multifractal random measure lab"};
    app.require_subcommand(1);
    mrm::KeyValues flags;
    std::string config_file;
    mrm::RunTarget target;

    const std::initializer_list<Flag> common = {
        {"--m", "m", "Spatial dimension (1 or 2)"},
        {"--gamma2", "gamma2", "Intermittency gamma^2"},
        {"--T", "T", "Correlation length"},
        {"--R", "R", "Domain radius; the grid covers [-R, R]^m"},
        {"--grid", "grid", "Cells per side (even)"},
        {"--seed", "seed", "Master seed"},
        {"--replicas", "replicas", "Number of replicas"},
    };

    CLI::App* simulate = app.add_subcommand("simulate", "Write MRM densities as .grid files");
    CLI::App* transport = app.add_subcommand("transport", "Multi-step transport to Lebesgue");
    CLI::App* geodesic = app.add_subcommand("geodesic", "Pullback geodesics from a .tmap");
    CLI::App* kpz = app.add_subcommand("kpz", "Measure-relative dimension and KPZ check");
    CLI::App* timechange = app.add_subcommand("timechange", "Multifractal time change");
    CLI::App* scaling = app.add_subcommand("scaling", "Scaling exponent estimation");

    for (CLI::App* sub : {simulate, transport, geodesic, kpz, timechange, scaling}) {
        add_flags(sub, flags, common);
        sub->add_option("--out", target.out, "Output directory");
        sub->add_option("--threads", target.threads, "Worker thread cap")
            ->check(CLI::PositiveNumber);
        sub->add_option("--config", config_file, "key=value config file; flags override it")
            ->check(CLI::ExistingFile);
        add_switch(sub, flags, "--csv", "csv", "Also write CSV copies");
    }

    add_flags(transport, flags,
              {{"--steps", "n_steps", "auto or a layer count >= min_steps"},
               {"--solver", "ot_solver", "auto, sinkhorn or exact"},
               {"--epsilon", "ot_epsilon", "Final Sinkhorn regularization"},
               {"--tol", "ot_tol", "Sinkhorn marginal tolerance (L1)"},
               {"--max-iter", "ot_max_iter", "Sinkhorn iteration cap"},
               {"--exact-threshold", "ot_exact_threshold", "Largest ball size for exact"}});
    add_switch(transport, flags, "--force", "force", "Allow steps below min_steps");

    add_flags(geodesic, flags,
              {{"--input", "input", ".tmap file"},
               {"--from", "from", "Start point, comma separated"},
               {"--to", "to", "End point, comma separated"},
               {"--samples", "samples", "Polyline samples"},
               {"--pairs", "pairs", "Random pairs for the geodesic-dimension experiment"},
               {"--scale-min", "scale_min", "Coarsest dyadic level j (scale 2R/2^j)"},
               {"--scale-max", "scale_max", "Finest dyadic level j"}});

    add_flags(kpz, flags,
              {{"--set", "set", "segment, square or cantor"},
               {"--scale-min", "scale_min", "Coarsest dyadic level j (scale 2R/2^j)"},
               {"--scale-max", "scale_max", "Finest dyadic level j"}});
    add_switch(kpz, flags, "--lebesgue", "lebesgue", "Use Lebesgue measure instead of M");

    add_flags(timechange, flags,
              {{"--mode", "mode", "path (m=1) or field (needs --input)"},
               {"--input", "input", ".tmap file for field mode"},
               {"--bm-resolution", "bm_resolution", "Brownian sub-steps per cell"},
               {"--eval-n", "eval_n", "Evaluation points per axis in field mode"},
               {"--anchor", "anchor", "Corner anchor: origin or corner"}});

    add_flags(scaling, flags,
              {{"--qs", "qs", "Moment orders, comma separated"},
               {"--radii", "radii", "Box radii, comma separated (default T/16..T/2)"}});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    mrm::RunConfig config;
    try {
        mrm::KeyValues merged;
        if (!config_file.empty())
            merged = mrm::read_config_file(config_file);
        merged.merge(flags);
        merged.set("command", app.get_subcommands().front()->get_name());
        config = mrm::RunConfig::parse(merged);
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"level", "error"}, {"kind", "usage"}, {"message", e.what()}}
                         .dump()
                  << '\n';
        return 2;
    }
    return mrm::run_command(config, target, std::cout, std::cerr);
}
