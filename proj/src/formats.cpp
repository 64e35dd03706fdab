#include "mrm/formats.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace mrm {

namespace {

KeyValues base_header(const ModelParams& p, const Grid& g, double cutoff_l, std::uint64_t replica,
                      const char* kind)
{
    KeyValues kv;
    kv.set("m", g.m);
    kv.set("grid_n", g.n);
    kv.set("R", g.R);
    kv.set("T", p.T);
    kv.set("gamma2", p.gamma2);
    kv.set("cutoff_l", cutoff_l);
    kv.set("seed", static_cast<unsigned long long>(p.seed));
    kv.set("replica", static_cast<unsigned long long>(replica));
    kv.set("kind", std::string(kind));
    return kv;
}

std::uint64_t to_little(std::uint64_t v)
{
    if constexpr (std::endian::native == std::endian::little)
        return v;
    else
        return __builtin_bswap64(v);
}

}  // namespace

KeyValues grid_header(const FieldSlice& field)
{
    ModelParams p;
    p.m = field.grid.m;
    p.gamma2 = field.gamma2;
    p.T = field.T;
    p.R = field.grid.R;
    p.seed = field.seed;
    return base_header(p, field.grid, field.cutoff_l, field.replica, "field");
}

KeyValues grid_header(const DiscreteMeasure& measure)
{
    if (!measure.is_full_grid())
        throw std::invalid_argument("grid_header: measure is not a full grid");
    return base_header(measure.meta.params, measure.meta.grid, measure.meta.cutoff_l,
                       measure.meta.replica, "measure");
}

void write_grid(std::ostream& out, const KeyValues& header, const Eigen::ArrayXd& values)
{
    out << header.str() << '\n';
    for (Index i = 0; i < values.size(); ++i) {
        const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(values(i)));
        char bytes[8];
        std::memcpy(bytes, &bits, 8);
        out.write(bytes, 8);
    }
    if (!out)
        throw std::runtime_error("write_grid: write failed");
}

void write_grid(std::ostream& out, const FieldSlice& field, const KeyValues& extra)
{
    KeyValues kv = grid_header(field);
    kv.merge(extra);
    write_grid(out, kv, field.values);
}

void write_grid(std::ostream& out, const DiscreteMeasure& measure, const KeyValues& extra)
{
    KeyValues kv = grid_header(measure);
    kv.merge(extra);
    write_grid(out, kv, measure.weights.array());
}

GridFile read_grid(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("read_grid: missing header");
    GridFile f;
    f.header = KeyValues::parse(line);
    f.grid = Grid{static_cast<int>(f.header.get_int("m")), static_cast<int>(f.header.get_int("grid_n")),
                  f.header.get_double("R")};
    if (f.grid.m < 1 || f.grid.n < 1)
        throw std::runtime_error("read_grid: bad grid shape");
    f.values.resize(f.grid.size());
    for (Index i = 0; i < f.values.size(); ++i) {
        char bytes[8];
        if (!in.read(bytes, 8))
            throw std::runtime_error("read_grid: truncated data");
        std::uint64_t bits;
        std::memcpy(&bits, bytes, 8);
        f.values(i) = std::bit_cast<double>(to_little(bits));
    }
    return f;
}

void write_grid_csv(std::ostream& out, const Grid& grid, const Eigen::ArrayXd& values)
{
    out << (grid.m == 1 ? "x,value\n" : "x,y,value\n");
    for (Index i = 0; i < grid.size(); ++i) {
        const Eigen::VectorXd c = grid.center(i);
        for (Index d = 0; d < c.size(); ++d)
            out << format_double(c(d)) << ',';
        out << format_double(values(i)) << '\n';
    }
}

void write_measure_csv(std::ostream& out, const DiscreteMeasure& measure)
{
    out << (measure.dim() == 1 ? "x,weight\n" : "x,y,weight\n");
    for (Index i = 0; i < measure.size(); ++i) {
        for (int d = 0; d < measure.dim(); ++d)
            out << format_double(measure.atoms(d, i)) << ',';
        out << format_double(measure.weights(i)) << '\n';
    }
}

void write_scaling_csv(std::ostream& out, const ScalingReport& report, const ModelParams& params)
{
    out << "q,zeta_hat,stderr,n_replicas,zeta,stderr_fit\n";
    for (std::size_t k = 0; k < report.qs.size(); ++k)
        out << format_double(report.qs[k]) << ',' << format_double(report.zeta_hat[k]) << ','
            << format_double(report.stderr_mc[k]) << ',' << report.replicas << ','
            << format_double(zeta(params, report.qs[k])) << ','
            << format_double(report.stderr_fit[k]) << '\n';
}

}  // namespace mrm
