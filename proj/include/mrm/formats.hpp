#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Core>

#include "mrm/chaos.hpp"
#include "mrm/field.hpp"
#include "mrm/io.hpp"

namespace mrm {

/// Contents of a ".grid" file: a key=value header line, then grid_n^m
/// little-endian doubles in row-major cell order.
struct GridFile
{
    KeyValues header;
    Grid grid{0, 0, 0.0};
    Eigen::ArrayXd values;
};

/// Header keys m, grid_n, R, T, gamma2, cutoff_l, seed, replica, kind,
/// followed by `extra`.
KeyValues grid_header(const FieldSlice& field);
KeyValues grid_header(const DiscreteMeasure& measure);

void write_grid(std::ostream& out, const FieldSlice& field, const KeyValues& extra = {});
void write_grid(std::ostream& out, const DiscreteMeasure& measure, const KeyValues& extra = {});
void write_grid(std::ostream& out, const KeyValues& header, const Eigen::ArrayXd& values);
GridFile read_grid(std::istream& in);

/// CSV with columns x[,y],value, one row per cell.
void write_grid_csv(std::ostream& out, const Grid& grid, const Eigen::ArrayXd& values);

/// CSV x[,y],weight for measures that are not a full grid.
void write_measure_csv(std::ostream& out, const DiscreteMeasure& measure);

/// CSV q,zeta_hat,stderr,n_replicas,zeta,stderr_fit
void write_scaling_csv(std::ostream& out, const ScalingReport& report, const ModelParams& params);

}  // namespace mrm
