#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace covopt {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Point3&, const Point3&) = default;
};

/// Raster elevation grid in km units.  Samples live at cell centers:
/// cell (r, c) is centered at (origin_x + c*cell_size, origin_y + r*cell_size),
/// with row 0 at the southern edge.
class DemGrid {
public:
    DemGrid(double origin_x, double origin_y, double cell_size, int rows, int cols,
            std::vector<double> elevation);

    double origin_x() const noexcept { return origin_x_; }
    double origin_y() const noexcept { return origin_y_; }
    double cell_size() const noexcept { return cell_size_; }
    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }

    double min_x() const noexcept { return origin_x_; }
    double min_y() const noexcept { return origin_y_; }
    double max_x() const noexcept { return origin_x_ + (cols_ - 1) * cell_size_; }
    double max_y() const noexcept { return origin_y_ + (rows_ - 1) * cell_size_; }

    /// Stored elevation at cell (r, c).
    double at(int r, int c) const;

    /// Bilinear interpolation between the four surrounding cell centers.
    /// Throws std::invalid_argument outside the bounding rectangle.
    double elevation_at(double x, double y) const;

    bool contains(double x, double y) const noexcept;

    /// Indices of the cell whose center is nearest to (x, y).
    std::pair<int, int> nearest_cell(double x, double y) const;

    const std::vector<double>& elevation() const noexcept { return elevation_; }

    friend bool operator==(const DemGrid&, const DemGrid&) = default;

private:
    double origin_x_;
    double origin_y_;
    double cell_size_;
    int rows_;
    int cols_;
    std::vector<double> elevation_;  // row-major, row 0 = south
};

/// Binary visibility along the straight segment a-b.  Walks the Bresenham
/// cell trace of the horizontal projection and compares the interpolated
/// segment altitude against terrain at every interior cell center; the
/// segment must clear terrain by more than 1e-9 km everywhere.  Endpoints in
/// the same cell are always mutually visible.  Symmetric in (a, b).
bool line_of_sight(const DemGrid& grid, const Point3& a, const Point3& b);

/// Deterministic diamond-square fractal surface clipped to [0, max_height].
DemGrid generate_terrain(std::uint64_t seed, int rows, int cols, double cell_size,
                         double roughness, double max_height);

/// ESRI ASCII grid I/O.  Files are written with xllcenter/yllcenter headers
/// and 17-significant-digit values so that save followed by load reproduces
/// the grid bit-exactly.  Import also accepts xllcorner/yllcorner headers;
/// NODATA cells are rejected.
DemGrid load_grid_asc(const std::filesystem::path& path);
void save_grid_asc(const DemGrid& grid, const std::filesystem::path& path);

}
