#include "gwinv/flow.hpp"

#include <cmath>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/IterativeLinearSolvers>

namespace gwinv {

namespace {

WellSpec make_well(const GridSpec& grid, int i, int j, WellControl control, double value,
                   double r_w)
{
    if (i < 0 || i >= grid.nx || j < 0 || j >= grid.ny)
        throw std::invalid_argument("well: cell outside grid");
    WellSpec w;
    w.cell = grid.index(i, j);
    w.control = control;
    if (control == WellControl::rate)
        w.rate_m3_per_day = value;
    else
        w.bhp_pa = value;
    w.r_w = r_w;
    w.r_eq = 0.2 * grid.dx(); // Peaceman, square cells, isotropic permeability
    if (!(w.r_eq > w.r_w))
        throw std::invalid_argument("well: equivalent radius must exceed well radius");
    return w;
}

/// Well index including the well-cell permeability: WI = 2*pi*k*dz / (mu*ln(r_eq/r_w)),
/// so flux = WI * (p_cell - p_bh). Unit thickness dz = 1 m.
double well_index(const WellSpec& w, double kappa, double viscosity)
{
    constexpr double dz = 1.0;
    return 2.0 * M_PI * kappa * dz / (viscosity * std::log(w.r_eq / w.r_w));
}

struct Transmissibilities {
    std::vector<double> tx; // (nx-1) * ny, between (i,j) and (i+1,j), includes 1/mu
    std::vector<double> ty; // nx * (ny-1), between (i,j) and (i,j+1)
};

Transmissibilities face_transmissibilities(const GridSpec& grid, const FieldSample& perm,
                                           double viscosity)
{
    const int nx = grid.nx, ny = grid.ny;
    const double dx = grid.dx(), dy = grid.dy();
    constexpr double dz = 1.0;
    Transmissibilities t;
    t.tx.resize(static_cast<std::size_t>(nx - 1) * ny);
    t.ty.resize(static_cast<std::size_t>(nx) * (ny - 1));
    // Half-transmissibility of a cell toward an x-face is 2*k*dy*dz/dx; the
    // face value is the harmonic combination of the two halves.
    const double gx = 2.0 * dy * dz / dx;
    const double gy = 2.0 * dx * dz / dy;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            const double ka = perm.values[grid.index(i, j)];
            const double kb = perm.values[grid.index(i + 1, j)];
            const double ha = gx * ka, hb = gx * kb;
            t.tx[static_cast<std::size_t>(j) * (nx - 1) + i] = ha * hb / ((ha + hb) * viscosity);
        }
    }
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double ka = perm.values[grid.index(i, j)];
            const double kb = perm.values[grid.index(i, j + 1)];
            const double ha = gy * ka, hb = gy * kb;
            t.ty[static_cast<std::size_t>(j) * nx + i] = ha * hb / ((ha + hb) * viscosity);
        }
    }
    return t;
}

} // namespace

WellSpec rate_well(const GridSpec& grid, int i, int j, double rate_m3_per_day, double r_w)
{
    return make_well(grid, i, j, WellControl::rate, rate_m3_per_day, r_w);
}

WellSpec bhp_well(const GridSpec& grid, int i, int j, double bhp_pa, double r_w)
{
    return make_well(grid, i, j, WellControl::bhp, bhp_pa, r_w);
}

std::vector<WellSpec> five_spot(const GridSpec& grid, double rate_m3_per_day, double bhp_pa)
{
    const int ic = grid.nx / 2;
    const int jc = grid.ny / 2;
    return {rate_well(grid, ic, jc, rate_m3_per_day),
            bhp_well(grid, 0, 0, bhp_pa),
            bhp_well(grid, grid.nx - 1, 0, bhp_pa),
            bhp_well(grid, 0, grid.ny - 1, bhp_pa),
            bhp_well(grid, grid.nx - 1, grid.ny - 1, bhp_pa)};
}

PressureSolution assemble_and_solve(const GridSpec& grid, const FieldSample& perm,
                                    const FluidAndRock& fluid,
                                    const std::vector<WellSpec>& wells,
                                    LinearSolverKind solver)
{
    grid.validate();
    fluid.validate();
    perm.validate();
    if (perm.kind != FieldKind::permeability)
        throw std::invalid_argument("assemble_and_solve: field is not a permeability");

    bool has_bhp = false;
    for (const auto& w : wells)
        if (w.control == WellControl::bhp) has_bhp = true;
    if (!has_bhp)
        throw std::invalid_argument(
            "assemble_and_solve: at least one BHP well is required to anchor the pressure");

    const int nx = grid.nx, ny = grid.ny;
    const int n = grid.cell_count();
    const Transmissibilities t = face_transmissibilities(grid, perm, fluid.viscosity);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(5) * n);
    std::vector<double> diag(n, 0.0);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);

    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            const int a = grid.index(i, j);
            const int b = grid.index(i + 1, j);
            const double tf = t.tx[static_cast<std::size_t>(j) * (nx - 1) + i];
            diag[a] += tf;
            diag[b] += tf;
            trip.emplace_back(a, b, -tf);
            trip.emplace_back(b, a, -tf);
        }
    }
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int a = grid.index(i, j);
            const int b = grid.index(i, j + 1);
            const double tf = t.ty[static_cast<std::size_t>(j) * nx + i];
            diag[a] += tf;
            diag[b] += tf;
            trip.emplace_back(a, b, -tf);
            trip.emplace_back(b, a, -tf);
        }
    }
    for (const auto& w : wells) {
        if (w.control == WellControl::rate) {
            rhs[w.cell] += w.rate_m3_per_day / kSecondsPerDay;
        } else {
            const double wi = well_index(w, perm.values[w.cell], fluid.viscosity);
            diag[w.cell] += wi;
            rhs[w.cell] += wi * w.bhp_pa;
        }
    }
    for (int c = 0; c < n; ++c) trip.emplace_back(c, c, diag[c]);

    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();

    PressureSolution sol;
    Eigen::VectorXd p;
    if (solver == LinearSolverKind::direct) {
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(A);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("assemble_and_solve: factorization failed (matrix not SPD?)");
        p = llt.solve(rhs);
    } else {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::DiagonalPreconditioner<double>>
            cg(A);
        cg.setTolerance(1e-10);
        cg.setMaxIterations(10LL * n);
        p = cg.solve(rhs);
        if (cg.info() != Eigen::Success)
            throw std::runtime_error("assemble_and_solve: CG did not converge");
        sol.cg_iterations = static_cast<int>(cg.iterations());
    }

    sol.relative_residual = (A * p - rhs).norm() / rhs.norm();
    if (!(sol.relative_residual <= 1e-10))
        throw std::runtime_error("assemble_and_solve: linear solve above residual tolerance");

    sol.pressure.assign(p.data(), p.data() + n);
    sol.well_flux.resize(wells.size());
    double net = 0.0;
    for (std::size_t k = 0; k < wells.size(); ++k) {
        const auto& w = wells[k];
        double q;
        if (w.control == WellControl::rate) {
            q = w.rate_m3_per_day / kSecondsPerDay;
        } else {
            const double wi = well_index(w, perm.values[w.cell], fluid.viscosity);
            q = wi * (w.bhp_pa - sol.pressure[w.cell]); // negative when producing
        }
        sol.well_flux[k] = q;
        net += q;
    }
    sol.mass_residual = net;
    return sol;
}

MassBalanceReport mass_balance(const GridSpec& grid, const FieldSample& perm,
                               const FluidAndRock& fluid, const std::vector<WellSpec>& wells,
                               const PressureSolution& sol)
{
    const int nx = grid.nx, ny = grid.ny;
    const int n = grid.cell_count();
    const Transmissibilities t = face_transmissibilities(grid, perm, fluid.viscosity);

    // Net outflow per cell from face fluxes, then compare with well sources.
    std::vector<double> div(n, 0.0);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            const int a = grid.index(i, j);
            const int b = grid.index(i + 1, j);
            const double f = t.tx[static_cast<std::size_t>(j) * (nx - 1) + i]
                             * (sol.pressure[a] - sol.pressure[b]);
            div[a] += f;
            div[b] -= f;
        }
    }
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int a = grid.index(i, j);
            const int b = grid.index(i, j + 1);
            const double f = t.ty[static_cast<std::size_t>(j) * nx + i]
                             * (sol.pressure[a] - sol.pressure[b]);
            div[a] += f;
            div[b] -= f;
        }
    }

    MassBalanceReport rep;
    for (const auto& w : wells) {
        double q;
        if (w.control == WellControl::rate) {
            q = w.rate_m3_per_day / kSecondsPerDay;
        } else {
            const double wi = well_index(w, perm.values[w.cell], fluid.viscosity);
            q = wi * (w.bhp_pa - sol.pressure[w.cell]);
        }
        div[w.cell] -= q;
        rep.net_well_flux += q;
        if (q > 0.0) rep.total_injection += q;
    }
    for (int c = 0; c < n; ++c) rep.max_cell_divergence = std::max(rep.max_cell_divergence, std::abs(div[c]));
    return rep;
}

SensorLayout sensors_from_positions(const GridSpec& grid, const std::vector<Point>& positions)
{
    if (positions.empty()) throw std::invalid_argument("sensors: at least one position required");
    SensorLayout layout;
    layout.positions = positions;
    layout.cells.reserve(positions.size());
    for (const Point& p : positions) layout.cells.push_back(grid.cell_of(p));
    return layout;
}

SensorLayout default_sensor_lattice(const GridSpec& grid)
{
    std::vector<Point> pos;
    pos.reserve(25);
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i)
            pos.push_back({(0.1 + 0.2 * i) * grid.extent_x, (0.1 + 0.2 * j) * grid.extent_y});
    return sensors_from_positions(grid, pos);
}

std::vector<double> sample_sensors(const PressureSolution& sol, const SensorLayout& layout)
{
    std::vector<double> data;
    data.reserve(layout.cells.size());
    for (const int c : layout.cells) {
        if (c < 0 || c >= static_cast<int>(sol.pressure.size()))
            throw std::invalid_argument("sample_sensors: sensor cell outside solution");
        data.push_back(sol.pressure[c]);
    }
    return data;
}

} // namespace gwinv
