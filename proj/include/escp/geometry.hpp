#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "escp/error.hpp"

namespace escp {

// A point in d-dimensional Euclidean space, d in {2, 3}.  Coordinates are
// stored zero-extended to three components so the squared norm over all
// three entries is always correct.
struct Point {
    std::array<double, 3> c{0.0, 0.0, 0.0};
    int dim = 3;

    Point() = default;
    Point(double x, double y) : c{x, y, 0.0}, dim(2) {}
    Point(double x, double y, double z) : c{x, y, z}, dim(3) {}

    static Point of_dim(int d) {
        Point p;
        p.dim = d;
        return p;
    }

    double& operator[](std::size_t i) { return c[i]; }
    double operator[](std::size_t i) const { return c[i]; }
};

inline void check_dim(int d, const char* what) {
    if (d != 2 && d != 3) throw ParseError(std::string(what) + ": dimension must be 2 or 3");
}

inline double dist(const Point& a, const Point& b) {
    const double dx = a.c[0] - b.c[0];
    const double dy = a.c[1] - b.c[1];
    const double dz = a.c[2] - b.c[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline double norm(const Point& a) {
    return std::sqrt(a.c[0] * a.c[0] + a.c[1] * a.c[1] + a.c[2] * a.c[2]);
}

// Axis-aligned box, the workspace environment and grid-cell type.
struct Box {
    std::array<double, 3> lo{0.0, 0.0, 0.0};
    std::array<double, 3> hi{0.0, 0.0, 0.0};
    int dim = 3;

    Box() = default;
    Box(const std::array<double, 3>& l, const std::array<double, 3>& h, int d)
        : lo(l), hi(h), dim(d) {
        check_dim(d, "Box");
        for (int k = 0; k < d; ++k)
            if (!(lo[k] < hi[k])) throw ParseError("Box: lo must be strictly below hi on every axis");
    }

    double side(int k) const { return hi[k] - lo[k]; }

    double volume() const {
        double v = 1.0;
        for (int k = 0; k < dim; ++k) v *= side(k);
        return v;
    }

    double diameter() const {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) s += side(k) * side(k);
        return std::sqrt(s);
    }

    bool contains(const Point& p, double eps = 1e-9) const {
        for (int k = 0; k < dim; ++k)
            if (p.c[k] < lo[k] - eps || p.c[k] > hi[k] + eps) return false;
        return true;
    }

    Point center() const {
        Point p = Point::of_dim(dim);
        for (int k = 0; k < dim; ++k) p.c[k] = 0.5 * (lo[k] + hi[k]);
        return p;
    }
};

// Smallest box containing both arguments (hull) and the overlap test used by
// grid construction.
inline bool boxes_overlap(const Box& a, const Box& b, double eps = 0.0) {
    for (int k = 0; k < a.dim; ++k)
        if (a.hi[k] < b.lo[k] - eps || b.hi[k] < a.lo[k] - eps) return false;
    return true;
}

}  // namespace escp
