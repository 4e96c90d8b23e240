#pragma once

#include <span>
#include <vector>

#include "gwinv/covariance.hpp"
#include "gwinv/grid.hpp"

namespace gwinv {

/// Eigenpairs of the discretized covariance operator, sorted by descending
/// eigenvalue. Eigenvectors are stored mode-major (mode i occupies
/// [i*N, (i+1)*N)) and are unit-normalized in the cell-area-weighted inner
/// product sum_c area * phi(c)^2.
struct KLEBasis {
    GridSpec grid;
    CovarianceModel model;
    std::vector<double> eigenvalues;
    std::vector<double> eigenvectors;
    std::vector<double> cumulative_energy;

    int size() const { return static_cast<int>(eigenvalues.size()); }

    std::span<const double> mode(int i) const
    {
        const int n = grid.cell_count();
        return {eigenvectors.data() + static_cast<std::size_t>(i) * n,
                static_cast<std::size_t>(n)};
    }
};

/// Nystrom discretization of the covariance eigenproblem: the covariance
/// matrix at cell centers is scaled by the cell area and passed to a dense
/// symmetric eigensolver. Guarded at N <= 10000 cells.
KLEBasis kle_decompose(const GridSpec& grid, const CovarianceModel& model);

/// Smallest m whose cumulative energy fraction reaches energy_target.
int truncate(const KLEBasis& basis, double energy_target);

/// Y = mean + sum_{i<m} sqrt(lambda_i) * phi_i * theta_i per cell.
FieldSample synthesize(const KLEBasis& basis, std::span<const double> theta, int m);

/// kappa = psi * exp(rho * Y). Rejects |rho*Y| > 300 as degenerate.
FieldSample to_permeability(const FieldSample& y, double psi, double rho);

} // namespace gwinv
