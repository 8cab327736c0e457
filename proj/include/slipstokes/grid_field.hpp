// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "slipstokes/core.hpp"

namespace slipstokes {

/// Uniform cell grid over [x0, x0 + nx hx] x [y0, y0 + ny hy]; values live at
/// cell centers.
struct Grid2 {
    int nx = 0, ny = 0;
    double x0 = 0.0, y0 = 0.0;
    double hx = 0.0, hy = 0.0;

    Grid2() = default;
    Grid2(int nx_, int ny_, double x0_, double y0_, double hx_, double hy_)
        : nx(nx_), ny(ny_), x0(x0_), y0(y0_), hx(hx_), hy(hy_) {}

    static Grid2 unit_square(int n) { return {n, n, 0.0, 0.0, 1.0 / n, 1.0 / n}; }

    Vec2 cell_center(int i, int j) const {
        return {x0 + (i + 0.5) * hx, y0 + (j + 0.5) * hy};
    }
    double cell_area() const { return hx * hy; }
    double width() const { return nx * hx; }
    double height() const { return ny * hy; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
    std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
};

inline double component_norm(double v) { return std::abs(v); }
inline double component_norm(const Vec2& v) { return v.norm(); }
inline double component_norm(const SymMat2& v) { return v.norm(); }

template <typename T>
struct Field {
    Grid2 grid;
    std::vector<T> data;
    std::vector<std::uint8_t> mask;

    Field() = default;
    explicit Field(const Grid2& g, T init = T{})
        : grid(g), data(g.size(), init), mask(g.size(), 1) {}

    T& at(int i, int j) { return data[grid.index(i, j)]; }
    const T& at(int i, int j) const { return data[grid.index(i, j)]; }
    bool inside(int i, int j) const { return mask[grid.index(i, j)] != 0; }

    static Field sampled(const Grid2& g, const std::function<T(Vec2)>& f) {
        Field out(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                out.at(i, j) = f(g.cell_center(i, j));
        return out;
    }

    /// Mean over the masked cells of the whole grid.
    T mean() const {
        T acc{};
        std::size_t n = 0;
        for (std::size_t k = 0; k < data.size(); ++k)
            if (mask[k]) { acc += data[k]; ++n; }
        if (n == 0) throw std::runtime_error("Field::mean: empty mask");
        return acc * (1.0 / static_cast<double>(n));
    }
};

using ScalarField = Field<double>;
using VectorField = Field<Vec2>;
using SymTensorField = Field<SymMat2>;

namespace detail {
inline int components_of(double) { return 1; }
inline int components_of(const Vec2&) { return 2; }
inline int components_of(const SymMat2&) { return 3; }
inline void put(std::ostream& os, double v) { os << v; }
inline void put(std::ostream& os, const Vec2& v) { os << v.x << ',' << v.y; }
inline void put(std::ostream& os, const SymMat2& v) { os << v.a11 << ',' << v.a12 << ',' << v.a22; }
inline void get(const std::vector<double>& c, double& v) { v = c[0]; }
inline void get(const std::vector<double>& c, Vec2& v) { v = {c[0], c[1]}; }
inline void get(const std::vector<double>& c, SymMat2& v) { v = {c[0], c[1], c[2]}; }
} // namespace detail

/// CSV grid format: header "nx,ny,hx,hy,x0,y0,ncomp", then one row-major line
/// per cell "mask,c0[,c1[,c2]]".
template <typename T>
void write_csv(const Field<T>& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out.precision(17);
    const Grid2& g = f.grid;
    out << g.nx << ',' << g.ny << ',' << g.hx << ',' << g.hy << ',' << g.x0 << ',' << g.y0 << ','
        << detail::components_of(T{}) << '\n';
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            out << int(f.mask[g.index(i, j)]) << ',';
            detail::put(out, f.at(i, j));
            out << '\n';
        }
}

template <typename T>
Field<T> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_csv: empty file");
    auto split = [](const std::string& s) {
        std::vector<double> out;
        std::istringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
        return out;
    };
    const auto head = split(line);
    if (head.size() != 7) throw std::runtime_error("read_csv: malformed header");
    Grid2 g(static_cast<int>(head[0]), static_cast<int>(head[1]), head[4], head[5], head[2], head[3]);
    const int ncomp = static_cast<int>(head[6]);
    if (ncomp != detail::components_of(T{}))
        throw std::runtime_error("read_csv: component count mismatch");
    Field<T> f(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            if (!std::getline(in, line)) throw std::runtime_error("read_csv: truncated file");
            const auto row = split(line);
            if (static_cast<int>(row.size()) != 1 + ncomp)
                throw std::runtime_error("read_csv: malformed row");
            f.mask[g.index(i, j)] = row[0] != 0.0;
            std::vector<double> comps(row.begin() + 1, row.end());
            detail::get(comps, f.at(i, j));
        }
    return f;
}

} // namespace slipstokes
