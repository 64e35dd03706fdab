#pragma once

#include <Eigen/Core>

namespace mrm {

using Index = Eigen::Index;

/// Regular grid of n^m cells on the square [-R,R]^m. Cells are indexed
/// row-major: i = iy * n + ix, with x varying fastest.
struct Grid
{
    int m = 2;
    int n = 0;
    double R = 1.0;

    double spacing() const { return 2.0 * R / n; }
    Index size() const { return m == 1 ? Index(n) : Index(n) * n; }

    /// Integer cell coordinates (ix[, iy]) of flat index i.
    Eigen::VectorXi cell(Index i) const
    {
        Eigen::VectorXi c(m);
        c(0) = static_cast<int>(i % n);
        if (m == 2)
            c(1) = static_cast<int>(i / n);
        return c;
    }

    Eigen::VectorXd center(Index i) const
    {
        const Eigen::VectorXi c = cell(i);
        return (c.cast<double>().array() + 0.5) * spacing() - R;
    }

    /// m x size() matrix of cell centers.
    Eigen::MatrixXd centers() const
    {
        Eigen::MatrixXd out(m, size());
        for (Index i = 0; i < size(); ++i)
            out.col(i) = center(i);
        return out;
    }

    bool operator==(const Grid&) const = default;
};

}  // namespace mrm
