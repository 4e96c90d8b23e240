#pragma once

#include <vector>

#include "gwinv/grid.hpp"

namespace gwinv {

struct FluidAndRock {
    double viscosity = 1e-3; // Pa*s
    double porosity = 0.2;   // unused by the steady incompressible solver

    void validate() const
    {
        if (!(viscosity > 0.0)) throw std::invalid_argument("fluid: viscosity must be > 0");
        if (!(porosity > 0.0) || !(porosity < 1.0))
            throw std::invalid_argument("fluid: porosity must lie in (0,1)");
    }
};

enum class WellControl { rate, bhp };

/// Peaceman well. Rate wells carry a surface rate (m3/day, injection
/// positive); BHP wells a bottom-hole pressure (Pa). The equivalent radius
/// r_eq = 0.2*dx is derived from the grid; the well index uses the
/// permeability of the well cell at solve time.
struct WellSpec {
    int cell = 0;
    WellControl control = WellControl::rate;
    double rate_m3_per_day = 0.0;
    double bhp_pa = 0.0;
    double r_w = 0.1; // m
    double r_eq = 0.0;
};

WellSpec rate_well(const GridSpec& grid, int i, int j, double rate_m3_per_day, double r_w = 0.1);
WellSpec bhp_well(const GridSpec& grid, int i, int j, double bhp_pa, double r_w = 0.1);

/// Injector in the cell containing the domain midpoint, BHP producers in the
/// four corner cells.
std::vector<WellSpec> five_spot(const GridSpec& grid, double rate_m3_per_day, double bhp_pa);

constexpr double kSecondsPerDay = 86400.0;

enum class LinearSolverKind { direct, cg };

struct PressureSolution {
    std::vector<double> pressure;  // Pa, per cell
    std::vector<double> well_flux; // m3/s, per well, injection positive
    double mass_residual = 0.0;    // m3/s, net well flux
    double relative_residual = 0.0;
    int cg_iterations = 0; // 0 for the direct solver
};

/// TPFA assembly with harmonic face transmissibilities and Peaceman well
/// coupling; the SPD system is solved directly (default) or by diagonally
/// preconditioned CG at tol 1e-10.
PressureSolution assemble_and_solve(const GridSpec& grid, const FieldSample& perm,
                                    const FluidAndRock& fluid,
                                    const std::vector<WellSpec>& wells,
                                    LinearSolverKind solver = LinearSolverKind::direct);

struct MassBalanceReport {
    double net_well_flux = 0.0;       // m3/s
    double total_injection = 0.0;     // m3/s
    double max_cell_divergence = 0.0; // m3/s, max |sum of face fluxes - source|
};

/// Recomputes well and face fluxes from the stored pressures; large values
/// flag an inconsistent solution.
MassBalanceReport mass_balance(const GridSpec& grid, const FieldSample& perm,
                               const FluidAndRock& fluid, const std::vector<WellSpec>& wells,
                               const PressureSolution& sol);

struct SensorLayout {
    std::vector<Point> positions;
    std::vector<int> cells;

    int count() const { return static_cast<int>(positions.size()); }
};

SensorLayout sensors_from_positions(const GridSpec& grid, const std::vector<Point>& positions);

/// Default 5x5 interior lattice at fractions (0.1 + 0.2*i) of each extent
/// (10, 30, 50, 70, 90 m on the 100 m domain).
SensorLayout default_sensor_lattice(const GridSpec& grid);

/// Pressure of the containing cell for each sensor, in layout order.
std::vector<double> sample_sensors(const PressureSolution& sol, const SensorLayout& layout);

} // namespace gwinv
