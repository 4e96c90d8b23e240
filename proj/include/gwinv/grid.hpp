#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace gwinv {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Regular cell-centered grid over [0,extent_x] x [0,extent_y].
/// Cells are stored row-major with x fastest: index = j*nx + i.
struct GridSpec {
    double extent_x = 100.0;
    double extent_y = 100.0;
    int nx = 50;
    int ny = 50;

    int cell_count() const { return nx * ny; }
    double dx() const { return extent_x / nx; }
    double dy() const { return extent_y / ny; }
    double cell_area() const { return dx() * dy(); }

    int index(int i, int j) const { return j * nx + i; }

    Point center(int i, int j) const
    {
        return {(i + 0.5) * dx(), (j + 0.5) * dy()};
    }

    Point center(int cell) const { return center(cell % nx, cell / nx); }

    bool contains(Point p) const
    {
        return p.x >= 0.0 && p.x <= extent_x && p.y >= 0.0 && p.y <= extent_y;
    }

    /// Cell containing a point; points on the far boundary map to the last cell.
    int cell_of(Point p) const
    {
        if (!contains(p)) throw std::invalid_argument("point outside domain");
        int i = static_cast<int>(p.x / dx());
        int j = static_cast<int>(p.y / dy());
        if (i >= nx) i = nx - 1;
        if (j >= ny) j = ny - 1;
        return index(i, j);
    }

    void validate() const
    {
        if (nx < 1 || ny < 1) throw std::invalid_argument("grid: nx and ny must be >= 1");
        if (!(extent_x > 0.0) || !(extent_y > 0.0))
            throw std::invalid_argument("grid: extents must be positive");
    }

    bool operator==(const GridSpec&) const = default;
};

enum class FieldKind : std::uint32_t { gaussian = 0, permeability = 1, pressure = 2 };

/// One scalar value per grid cell.
struct FieldSample {
    GridSpec grid;
    FieldKind kind = FieldKind::gaussian;
    std::vector<double> values;

    void validate() const
    {
        if (static_cast<int>(values.size()) != grid.cell_count())
            throw std::invalid_argument("field: value count does not match grid");
        if (kind == FieldKind::permeability) {
            for (const double v : values)
                if (!(v > 0.0)) throw std::invalid_argument("field: permeability must be positive");
        }
    }
};

} // namespace gwinv
