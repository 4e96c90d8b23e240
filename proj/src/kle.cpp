#include "gwinv/kle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <lapacke.h>

namespace gwinv {

namespace {
constexpr int kMaxDenseCells = 10000;
}

KLEBasis kle_decompose(const GridSpec& grid, const CovarianceModel& model)
{
    grid.validate();
    model.validate();
    const int n = grid.cell_count();
    if (n > kMaxDenseCells)
        throw std::invalid_argument("kle_decompose: grid too large for a dense eigensolve");

    std::vector<Point> centers(n);
    for (int c = 0; c < n; ++c) centers[c] = grid.center(c);

    // Column-major N x N; symmetric, so only the lower triangle is referenced.
    const double area = grid.cell_area();
    std::vector<double> mat(static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j) {
        for (int i = j; i < n; ++i) {
            const double v = area * covariance_eval(model, centers[i], centers[j]);
            mat[static_cast<std::size_t>(j) * n + i] = v;
        }
    }

    std::vector<double> w(n);
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, mat.data(), n, w.data());
    if (info != 0) throw std::runtime_error("kle_decompose: eigensolver failed");

    KLEBasis basis;
    basis.grid = grid;
    basis.model = model;
    basis.eigenvalues.resize(n);
    basis.eigenvectors.resize(static_cast<std::size_t>(n) * n);

    const double lambda_max = w[n - 1];
    const double tau = 1e-12 * lambda_max;
    const double inv_sqrt_area = 1.0 / std::sqrt(area);

    // LAPACK returns ascending eigenvalues; reverse into descending order.
    for (int k = 0; k < n; ++k) {
        const int src = n - 1 - k;
        double lambda = w[src];
        if (lambda < 0.0) {
            if (lambda < -tau) throw std::runtime_error("kle_decompose: eigenvalue below clamp threshold");
            lambda = 0.0;
        }
        basis.eigenvalues[k] = lambda;

        const double* col = mat.data() + static_cast<std::size_t>(src) * n;
        // Largest-magnitude component (first occurrence) made positive.
        int imax = 0;
        double amax = std::abs(col[0]);
        for (int c = 1; c < n; ++c) {
            const double a = std::abs(col[c]);
            if (a > amax) { amax = a; imax = c; }
        }
        const double sign = (col[imax] < 0.0) ? -1.0 : 1.0;
        double* dst = basis.eigenvectors.data() + static_cast<std::size_t>(k) * n;
        for (int c = 0; c < n; ++c) dst[c] = sign * col[c] * inv_sqrt_area;
    }

    basis.cumulative_energy.resize(n);
    const double total = std::accumulate(basis.eigenvalues.begin(), basis.eigenvalues.end(), 0.0);
    double running = 0.0;
    for (int k = 0; k < n; ++k) {
        running += basis.eigenvalues[k];
        basis.cumulative_energy[k] = running / total;
    }
    return basis;
}

int truncate(const KLEBasis& basis, double energy_target)
{
    if (!(energy_target > 0.0) || energy_target > 1.0)
        throw std::invalid_argument("truncate: energy target must lie in (0,1]");
    const int n = basis.size();
    if (energy_target == 1.0) return n;
    for (int m = 1; m <= n; ++m)
        if (basis.cumulative_energy[m - 1] >= energy_target) return m;
    return n;
}

FieldSample synthesize(const KLEBasis& basis, std::span<const double> theta, int m)
{
    if (m > basis.size()) throw std::invalid_argument("synthesize: mode count exceeds basis size");
    if (static_cast<int>(theta.size()) < m)
        throw std::invalid_argument("synthesize: latent vector shorter than mode count");

    const int n = basis.grid.cell_count();
    FieldSample out;
    out.grid = basis.grid;
    out.kind = FieldKind::gaussian;
    out.values.assign(n, basis.model.mean);
    for (int k = 0; k < m; ++k) {
        const double a = std::sqrt(basis.eigenvalues[k]) * theta[k];
        if (a == 0.0) continue;
        const double* phi = basis.eigenvectors.data() + static_cast<std::size_t>(k) * n;
        for (int c = 0; c < n; ++c) out.values[c] += a * phi[c];
    }
    return out;
}

FieldSample to_permeability(const FieldSample& y, double psi, double rho)
{
    if (!(psi > 0.0)) throw std::invalid_argument("to_permeability: psi must be > 0");
    FieldSample out;
    out.grid = y.grid;
    out.kind = FieldKind::permeability;
    out.values.resize(y.values.size());
    for (std::size_t c = 0; c < y.values.size(); ++c) {
        const double e = rho * y.values[c];
        if (std::abs(e) > 300.0)
            throw std::runtime_error("to_permeability: |rho*Y| > 300, degenerate field");
        out.values[c] = psi * std::exp(e);
    }
    return out;
}

} // namespace gwinv
