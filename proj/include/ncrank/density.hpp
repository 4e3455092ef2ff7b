#pragma once

#include <iosfwd>
#include <vector>

#include "ncrank/pencil.hpp"

namespace ncrank {

/// Spectral-density samples from Stieltjes inversion,
/// density(t) = -(1/pi) Im(tr_N G(t + i eps_im)).
/// Failed grid points are recorded as NaN.
struct DensityGrid {
    std::vector<double> t_values;
    double eps_im = 0.0;
    std::vector<double> densities;
};

/// Uniform grid over [t_min, t_max]; each point solves the fixed-point
/// equation at b = (t + i eps_im) 1 - mean to tolerance eps_im * 1e-4,
/// warm-starting left to right.
DensityGrid stieltjes_density(const LinearPencil& p, double t_min, double t_max, int points,
                              double eps_im);

/// CSV: header t,density; NaN densities emit an empty field.
void write_density_csv(std::ostream& os, const DensityGrid& grid);

}  // namespace ncrank
