#include "mrm/config.hpp"

#include <sstream>
#include <stdexcept>

namespace mrm {

std::string join_doubles(const std::vector<double>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            out += ',';
        out += format_double(v[i]);
    }
    return out;
}

std::vector<double> split_doubles(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty())
            continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size())
            throw std::invalid_argument("not a number: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

KeyValues RunConfig::emit() const
{
    KeyValues kv;
    kv.set("command", command);
    kv.set("m", params.m);
    kv.set("gamma2", params.gamma2);
    kv.set("T", params.T);
    kv.set("R", params.R);
    kv.set("seed", static_cast<unsigned long long>(params.seed));
    kv.set("grid", grid);
    kv.set("replicas", replicas);
    kv.set("input", input);
    kv.set("n_steps", steps == 0 ? std::string("auto") : std::to_string(steps));
    kv.set("force", force ? 1 : 0);
    kv.set("ot_solver", solver);
    kv.set("ot_epsilon", epsilon);
    kv.set("ot_tol", tol);
    kv.set("ot_max_iter", max_iter);
    kv.set("ot_exact_threshold", exact_threshold);
    kv.set("qs", join_doubles(qs));
    kv.set("radii", join_doubles(radii));
    kv.set("set", set);
    kv.set("lebesgue", lebesgue ? 1 : 0);
    kv.set("scale_min", scale_min);
    kv.set("scale_max", scale_max);
    kv.set("from", join_doubles(from));
    kv.set("to", join_doubles(to));
    kv.set("samples", samples);
    kv.set("pairs", pairs);
    kv.set("mode", mode);
    kv.set("bm_resolution", bm_resolution);
    kv.set("eval_n", eval_n);
    kv.set("anchor", anchor);
    kv.set("csv", csv ? 1 : 0);
    return kv;
}

RunConfig RunConfig::parse(const KeyValues& kv)
{
    RunConfig c;
    auto str = [&](const char* key, std::string& dst) {
        if (kv.has(key))
            dst = kv.get(key);
    };
    auto num = [&](const char* key, auto& dst) {
        if (kv.has(key))
            dst = static_cast<std::remove_reference_t<decltype(dst)>>(kv.get_int(key));
    };
    auto real = [&](const char* key, double& dst) {
        if (kv.has(key))
            dst = kv.get_double(key);
    };
    auto flag = [&](const char* key, bool& dst) {
        if (kv.has(key))
            dst = kv.get_int(key) != 0;
    };
    auto list = [&](const char* key, std::vector<double>& dst) {
        if (kv.has(key))
            dst = split_doubles(kv.get(key));
    };

    str("command", c.command);
    num("m", c.params.m);
    real("gamma2", c.params.gamma2);
    real("T", c.params.T);
    real("R", c.params.R);
    if (kv.has("seed"))
        c.params.seed = kv.get_uint("seed");
    num("grid", c.grid);
    num("replicas", c.replicas);
    str("input", c.input);
    if (kv.has("n_steps"))
        c.steps = kv.get("n_steps") == "auto" ? 0 : static_cast<int>(kv.get_int("n_steps"));
    flag("force", c.force);
    str("ot_solver", c.solver);
    real("ot_epsilon", c.epsilon);
    real("ot_tol", c.tol);
    num("ot_max_iter", c.max_iter);
    num("ot_exact_threshold", c.exact_threshold);
    list("qs", c.qs);
    list("radii", c.radii);
    str("set", c.set);
    flag("lebesgue", c.lebesgue);
    num("scale_min", c.scale_min);
    num("scale_max", c.scale_max);
    list("from", c.from);
    list("to", c.to);
    num("samples", c.samples);
    num("pairs", c.pairs);
    str("mode", c.mode);
    num("bm_resolution", c.bm_resolution);
    num("eval_n", c.eval_n);
    str("anchor", c.anchor);
    flag("csv", c.csv);
    return c;
}

}  // namespace mrm
