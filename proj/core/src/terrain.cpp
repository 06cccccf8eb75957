#include "covopt/terrain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "covopt/errors.hpp"
#include "covopt/rng.hpp"

namespace covopt {

namespace {

constexpr double kLosClearance = 1e-9;  // km the segment must clear terrain by

void format_double(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}

DemGrid::DemGrid(double origin_x, double origin_y, double cell_size, int rows, int cols,
                 std::vector<double> elevation)
    : origin_x_(origin_x),
      origin_y_(origin_y),
      cell_size_(cell_size),
      rows_(rows),
      cols_(cols),
      elevation_(std::move(elevation)) {
    if (rows_ < 2 || cols_ < 2)
        throw std::invalid_argument("DemGrid: rows and cols must be at least 2");
    if (!(cell_size_ > 0.0) || !std::isfinite(cell_size_))
        throw std::invalid_argument("DemGrid: cell_size must be positive and finite");
    if (!std::isfinite(origin_x_) || !std::isfinite(origin_y_))
        throw std::invalid_argument("DemGrid: origin must be finite");
    if (elevation_.size() != std::size_t(rows_) * std::size_t(cols_))
        throw std::invalid_argument("DemGrid: elevation size does not match rows*cols");
    for (double e : elevation_)
        if (!std::isfinite(e)) throw std::invalid_argument("DemGrid: non-finite elevation");
}

double DemGrid::at(int r, int c) const {
    if (r < 0 || r >= rows_ || c < 0 || c >= cols_)
        throw std::invalid_argument("DemGrid::at: cell index out of range");
    return elevation_[std::size_t(r) * cols_ + c];
}

bool DemGrid::contains(double x, double y) const noexcept {
    return x >= min_x() && x <= max_x() && y >= min_y() && y <= max_y();
}

double DemGrid::elevation_at(double x, double y) const {
    if (!contains(x, y))
        throw std::invalid_argument("DemGrid::elevation_at: query outside grid bounds");
    double gx = (x - origin_x_) / cell_size_;
    double gy = (y - origin_y_) / cell_size_;
    int c0 = std::clamp(int(std::floor(gx)), 0, cols_ - 2);
    int r0 = std::clamp(int(std::floor(gy)), 0, rows_ - 2);
    double fx = std::clamp(gx - c0, 0.0, 1.0);
    double fy = std::clamp(gy - r0, 0.0, 1.0);
    double v00 = at(r0, c0), v01 = at(r0, c0 + 1);
    double v10 = at(r0 + 1, c0), v11 = at(r0 + 1, c0 + 1);
    double south = (1.0 - fx) * v00 + fx * v01;
    double north = (1.0 - fx) * v10 + fx * v11;
    return (1.0 - fy) * south + fy * north;
}

std::pair<int, int> DemGrid::nearest_cell(double x, double y) const {
    int c = std::clamp(int(std::lround((x - origin_x_) / cell_size_)), 0, cols_ - 1);
    int r = std::clamp(int(std::lround((y - origin_y_) / cell_size_)), 0, rows_ - 1);
    return {r, c};
}

bool line_of_sight(const DemGrid& grid, const Point3& a, const Point3& b) {
    if (!grid.contains(a.x, a.y) || !grid.contains(b.x, b.y))
        throw std::invalid_argument("line_of_sight: endpoint outside grid bounds");
    if (a.z < grid.elevation_at(a.x, a.y) - kLosClearance ||
        b.z < grid.elevation_at(b.x, b.y) - kLosClearance)
        throw std::invalid_argument("line_of_sight: endpoint below terrain");

    // Canonical traversal direction makes the result exactly symmetric.
    Point3 p = a, q = b;
    auto key = [](const Point3& v) { return std::tie(v.x, v.y, v.z); };
    if (key(q) < key(p)) std::swap(p, q);

    auto [r0, c0] = grid.nearest_cell(p.x, p.y);
    auto [r1, c1] = grid.nearest_cell(q.x, q.y);
    if (r0 == r1 && c0 == c1) return true;

    const double ddx = q.x - p.x;
    const double ddy = q.y - p.y;
    const double len2 = ddx * ddx + ddy * ddy;

    int dc = std::abs(c1 - c0);
    int dr = -std::abs(r1 - r0);
    int sc = c0 < c1 ? 1 : -1;
    int sr = r0 < r1 ? 1 : -1;
    int err = dc + dr;
    int c = c0, r = r0;
    while (true) {
        if (!(c == c0 && r == r0) && !(c == c1 && r == r1)) {
            double x = grid.origin_x() + c * grid.cell_size();
            double y = grid.origin_y() + r * grid.cell_size();
            double t = 0.0;
            if (len2 > 0.0)
                t = std::clamp(((x - p.x) * ddx + (y - p.y) * ddy) / len2, 0.0, 1.0);
            double seg_z = p.z + t * (q.z - p.z);
            if (seg_z <= grid.at(r, c) + kLosClearance) return false;
        }
        if (c == c1 && r == r1) break;
        int e2 = 2 * err;
        if (e2 >= dr) {
            err += dr;
            c += sc;
        }
        if (e2 <= dc) {
            err += dc;
            r += sr;
        }
    }
    return true;
}

DemGrid generate_terrain(std::uint64_t seed, int rows, int cols, double cell_size,
                         double roughness, double max_height) {
    if (rows < 3 || cols < 3)
        throw std::invalid_argument("generate_terrain: rows and cols must be at least 3");
    if (!(roughness > 0.0) || roughness > 1.0)
        throw std::invalid_argument("generate_terrain: roughness must be in (0, 1]");
    if (!(max_height > 0.0))
        throw std::invalid_argument("generate_terrain: max_height must be positive");
    if (!(cell_size > 0.0))
        throw std::invalid_argument("generate_terrain: cell_size must be positive");

    int n = 1;
    while (n + 1 < std::max(rows, cols)) n *= 2;
    const int size = n + 1;

    Rng rng(seed);
    std::vector<double> f(std::size_t(size) * size, 0.0);
    auto idx = [size](int r, int c) { return std::size_t(r) * size + c; };

    f[idx(0, 0)] = rng.uniform(0.2, 0.8) * max_height;
    f[idx(0, n)] = rng.uniform(0.2, 0.8) * max_height;
    f[idx(n, 0)] = rng.uniform(0.2, 0.8) * max_height;
    f[idx(n, n)] = rng.uniform(0.2, 0.8) * max_height;

    double amp = 0.5 * max_height;
    for (int step = n; step > 1; step /= 2) {
        int half = step / 2;
        for (int r = half; r < size; r += step) {
            for (int c = half; c < size; c += step) {
                double avg = (f[idx(r - half, c - half)] + f[idx(r - half, c + half)] +
                              f[idx(r + half, c - half)] + f[idx(r + half, c + half)]) /
                             4.0;
                f[idx(r, c)] = avg + rng.uniform(-amp, amp);
            }
        }
        for (int r = 0; r < size; r += half) {
            for (int c = (r / half) % 2 == 0 ? half : 0; c < size; c += step) {
                double sum = 0.0;
                int cnt = 0;
                if (r - half >= 0) sum += f[idx(r - half, c)], ++cnt;
                if (r + half < size) sum += f[idx(r + half, c)], ++cnt;
                if (c - half >= 0) sum += f[idx(r, c - half)], ++cnt;
                if (c + half < size) sum += f[idx(r, c + half)], ++cnt;
                f[idx(r, c)] = sum / cnt + rng.uniform(-amp, amp);
            }
        }
        amp *= roughness;
    }

    std::vector<double> out(std::size_t(rows) * cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out[std::size_t(r) * cols + c] = std::clamp(f[idx(r, c)], 0.0, max_height);
    return DemGrid(0.0, 0.0, cell_size, rows, cols, std::move(out));
}

DemGrid load_grid_asc(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open grid file: " + path.string());

    int ncols = -1, nrows = -1;
    double xll = 0.0, yll = 0.0, cell = 0.0, nodata = -9999.0;
    bool x_is_center = false, y_is_center = false;
    bool have_x = false, have_y = false, have_cell = false;

    std::string token;
    auto next_number = [&](const std::string& key) {
        double v;
        if (!(in >> v)) throw DataError("grid header: missing value for " + key);
        return v;
    };

    // Header: key/value lines until the first purely numeric token.
    while (in >> token) {
        std::string low;
        for (char ch : token) low += char(std::tolower(static_cast<unsigned char>(ch)));
        if (low == "ncols") {
            ncols = int(next_number(low));
        } else if (low == "nrows") {
            nrows = int(next_number(low));
        } else if (low == "xllcorner" || low == "xllcenter") {
            xll = next_number(low);
            x_is_center = low == "xllcenter";
            have_x = true;
        } else if (low == "yllcorner" || low == "yllcenter") {
            yll = next_number(low);
            y_is_center = low == "yllcenter";
            have_y = true;
        } else if (low == "cellsize") {
            cell = next_number(low);
            have_cell = true;
        } else if (low == "nodata_value") {
            nodata = next_number(low);
        } else {
            break;  // first data token
        }
    }
    if (ncols < 2 || nrows < 2 || !have_x || !have_y || !have_cell)
        throw DataError("grid header: incomplete ESRI ASCII header in " + path.string());

    double ox = x_is_center ? xll : xll + 0.5 * cell;
    double oy = y_is_center ? yll : yll + 0.5 * cell;

    std::vector<double> values;
    values.reserve(std::size_t(nrows) * ncols);
    // `token` currently holds the first data value.
    while (true) {
        double v;
        try {
            std::size_t pos = 0;
            v = std::stod(token, &pos);
            if (pos != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw DataError("grid data: non-numeric token '" + token + "'");
        }
        values.push_back(v);
        if (!(in >> token)) break;
    }
    if (values.size() != std::size_t(nrows) * ncols)
        throw DataError("grid data: expected " + std::to_string(std::size_t(nrows) * ncols) +
                        " values, found " + std::to_string(values.size()));
    for (double v : values)
        if (v == nodata) throw DataError("grid data: NODATA cells are not supported");

    // File rows run north to south; storage is south to north.
    std::vector<double> elev(values.size());
    for (int r = 0; r < nrows; ++r)
        for (int c = 0; c < ncols; ++c)
            elev[std::size_t(r) * ncols + c] = values[std::size_t(nrows - 1 - r) * ncols + c];

    try {
        return DemGrid(ox, oy, cell, nrows, ncols, std::move(elev));
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("grid data: ") + e.what());
    }
}

void save_grid_asc(const DemGrid& grid, const std::filesystem::path& path) {
    std::string out;
    out.reserve(std::size_t(grid.rows()) * grid.cols() * 20 + 128);
    out += "ncols " + std::to_string(grid.cols()) + "\n";
    out += "nrows " + std::to_string(grid.rows()) + "\n";
    out += "xllcenter ";
    format_double(out, grid.origin_x());
    out += "\nyllcenter ";
    format_double(out, grid.origin_y());
    out += "\ncellsize ";
    format_double(out, grid.cell_size());
    out += "\nNODATA_value -9999\n";
    for (int r = grid.rows() - 1; r >= 0; --r) {
        for (int c = 0; c < grid.cols(); ++c) {
            if (c) out += ' ';
            format_double(out, grid.at(r, c));
        }
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write grid file: " + path.string());
    f << out;
    if (!f) throw DataError("failed writing grid file: " + path.string());
}

}
