#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "escp/error.hpp"
#include "escp/geometry.hpp"
#include "escp/instance.hpp"
#include "escp/rng.hpp"

namespace escp {

namespace detail {

// Adaptive Simpson quadrature; f must be continuous on [a, b].
inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol, int depth = 40) {
    if (!(a < b)) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Area of the disk u^2 + v^2 <= rho^2 intersected with [a,b] x [c,d].
// Chord-length integral over u, split at the abscissas where the circle
// crosses v = c and v = d so each piece is smooth.
inline double disk_rect_area(double rho, double a, double b, double c, double d) {
    if (rho <= 0.0) return 0.0;
    a = std::max(a, -rho);
    b = std::min(b, rho);
    if (a >= b || c >= d || c >= rho || d <= -rho) return 0.0;
    auto chord = [&](double u) {
        const double s = rho * rho - u * u;
        const double g = s > 0.0 ? std::sqrt(s) : 0.0;
        const double lo = std::max(c, -g), hi = std::min(d, g);
        return hi > lo ? hi - lo : 0.0;
    };
    std::vector<double> cuts{a, b, 0.0};
    for (double y : {c, d}) {
        if (std::abs(y) < rho) {
            const double x = std::sqrt(rho * rho - y * y);
            cuts.push_back(x);
            cuts.push_back(-x);
        }
    }
    std::sort(cuts.begin(), cuts.end());
    double area = 0.0;
    const double tol = 1e-13 * rho * rho + 1e-300;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double lo = std::max(a, cuts[k]), hi = std::min(b, cuts[k + 1]);
        if (hi > lo + 1e-15 * rho) area += adaptive_simpson(chord, lo, hi, tol);
    }
    return area;
}

// Volume of the ball ||p - center|| <= r intersected with an axis box.
inline double ball_box_volume(const Point& center, double r, const Box& cell) {
    // Quick reject / accept.
    double closest2 = 0.0, farthest2 = 0.0;
    for (int k = 0; k < cell.dim; ++k) {
        const double lo = cell.lo[k] - center.c[k], hi = cell.hi[k] - center.c[k];
        const double nearest = (lo > 0.0) ? lo : (hi < 0.0 ? -hi : 0.0);
        closest2 += nearest * nearest;
        const double far = std::max(std::abs(lo), std::abs(hi));
        farthest2 += far * far;
    }
    if (closest2 >= r * r) return 0.0;
    if (farthest2 <= r * r) return cell.volume();
    const double ax = cell.lo[0] - center.c[0], bx = cell.hi[0] - center.c[0];
    const double ay = cell.lo[1] - center.c[1], by = cell.hi[1] - center.c[1];
    if (cell.dim == 2) return disk_rect_area(r, ax, bx, ay, by);
    const double az = std::max(cell.lo[2] - center.c[2], -r);
    const double bz = std::min(cell.hi[2] - center.c[2], r);
    if (az >= bz) return 0.0;
    auto slice = [&](double z) {
        const double s = r * r - z * z;
        return s > 0.0 ? disk_rect_area(std::sqrt(s), ax, bx, ay, by) : 0.0;
    };
    return adaptive_simpson(slice, az, bz, 1e-12 * r * r * r + 1e-300, 36);
}

// Volume of the overlap of two axis boxes.
inline double box_box_volume(const Box& a, const Box& b) {
    double v = 1.0;
    for (int k = 0; k < a.dim; ++k) {
        const double w = std::min(a.hi[k], b.hi[k]) - std::max(a.lo[k], b.lo[k]);
        if (w <= 0.0) return 0.0;
        v *= w;
    }
    return v;
}

}  // namespace detail

// One uniform-density region of a mixture model.
struct Region {
    enum class Shape { box, ball };
    Shape shape = Shape::box;
    Box box;        // shape == box
    Point center;   // shape == ball
    double radius = 0.0;
    double weight = 1.0;

    double volume(int dim) const {
        if (shape == Shape::box) return box.volume();
        if (dim == 2) return M_PI * radius * radius;
        return 4.0 / 3.0 * M_PI * radius * radius * radius;
    }

    bool contains(const Point& p) const {
        if (shape == Shape::box) return box.contains(p, 0.0);
        return dist(p, center) <= radius;
    }

    // Measure of the region inside `cell`, as a fraction of region volume.
    double overlap_fraction(const Box& cell, int dim) const {
        if (shape == Shape::box) return detail::box_box_volume(box, cell) / box.volume();
        return detail::ball_box_volume(center, radius, cell) / volume(dim);
    }
};

// Piecewise-uniform probability density: a weighted mixture of box and ball
// regions inside a common environment.  Weights are normalized to sum to 1.
struct DensityModel {
    int dimension = 3;
    Box env;
    std::vector<Region> regions;

    DensityModel() = default;
    DensityModel(int dim, const Box& e, std::vector<Region> regs)
        : dimension(dim), env(e), regions(std::move(regs)) {
        validate_and_normalize();
    }

    void validate_and_normalize() {
        check_dim(dimension, "DensityModel");
        if (env.dim != dimension) throw ParseError("DensityModel: env dimension mismatch");
        if (regions.empty()) throw ParseError("DensityModel: at least one region required");
        double total = 0.0;
        for (std::size_t g = 0; g < regions.size(); ++g) {
            Region& reg = regions[g];
            const std::string where = "region " + std::to_string(g + 1);
            if (!(reg.weight > 0.0)) throw ParseError(where + ": weight must be positive");
            if (reg.shape == Region::Shape::box) {
                if (reg.box.dim != dimension) throw ParseError(where + ": dimension mismatch");
                for (int k = 0; k < dimension; ++k)
                    if (reg.box.lo[k] < env.lo[k] - 1e-9 || reg.box.hi[k] > env.hi[k] + 1e-9)
                        throw ParseError(where + ": box outside env");
            } else {
                if (!(reg.radius > 0.0)) throw ParseError(where + ": radius must be positive");
                if (reg.center.dim != dimension) throw ParseError(where + ": dimension mismatch");
                for (int k = 0; k < dimension; ++k)
                    if (reg.center.c[k] - reg.radius < env.lo[k] - 1e-9 ||
                        reg.center.c[k] + reg.radius > env.hi[k] + 1e-9)
                        throw ParseError(where + ": ball outside env");
            }
            total += reg.weight;
        }
        for (Region& reg : regions) reg.weight /= total;
    }
};

inline double density_at(const DensityModel& phi, const Point& p) {
    double d = 0.0;
    for (const Region& reg : phi.regions)
        if (reg.contains(p)) d += reg.weight / reg.volume(phi.dimension);
    return d;
}

// Probability mass of `cell` under phi.  Box overlaps are exact products of
// interval overlaps; ball overlaps use deterministic semi-analytic
// integration (exact chord areas, adaptive quadrature along one axis).
inline double cell_measure(const DensityModel& phi, const Box& cell) {
    double m = 0.0;
    for (const Region& reg : phi.regions) m += reg.weight * reg.overlap_fraction(cell, phi.dimension);
    return m;
}

// Draw one point distributed as phi: pick a region by weight, then sample
// uniformly inside it (balls: Gaussian direction, radius R * U^(1/d)).
inline Point sample(const DensityModel& phi, RngStream& rng) {
    double u = rng.next_double();
    std::size_t g = 0;
    for (; g + 1 < phi.regions.size(); ++g) {
        if (u < phi.regions[g].weight) break;
        u -= phi.regions[g].weight;
    }
    const Region& reg = phi.regions[g];
    Point p = Point::of_dim(phi.dimension);
    if (reg.shape == Region::Shape::box) {
        for (int k = 0; k < phi.dimension; ++k)
            p.c[k] = reg.box.lo[k] + reg.box.side(k) * rng.next_double();
        return p;
    }
    double dir[3] = {0.0, 0.0, 0.0};
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (int k = 0; k < phi.dimension; ++k) {
            dir[k] = rng.next_normal();
            n2 += dir[k] * dir[k];
        }
    } while (n2 == 0.0);
    const double rad =
        reg.radius * std::pow(rng.next_double(), 1.0 / static_cast<double>(phi.dimension));
    const double scale = rad / std::sqrt(n2);
    for (int k = 0; k < phi.dimension; ++k) p.c[k] = reg.center.c[k] + scale * dir[k];
    return p;
}

// Uniform draw from region `reg` restricted to `cell` (positive overlap
// required).  Box overlaps sample the overlap box directly; ball overlaps
// use rejection inside the clipped bounding box.
inline Point sample_region_in_cell(const Region& reg, const Box& cell, int dim, RngStream& rng) {
    Point p = Point::of_dim(dim);
    if (reg.shape == Region::Shape::box) {
        for (int k = 0; k < dim; ++k) {
            const double lo = std::max(reg.box.lo[k], cell.lo[k]);
            const double hi = std::min(reg.box.hi[k], cell.hi[k]);
            if (!(hi > lo)) throw ConfigError("sample_region_in_cell: empty overlap");
            p.c[k] = lo + (hi - lo) * rng.next_double();
        }
        return p;
    }
    double lo[3], hi[3];
    for (int k = 0; k < dim; ++k) {
        lo[k] = std::max(cell.lo[k], reg.center.c[k] - reg.radius);
        hi[k] = std::min(cell.hi[k], reg.center.c[k] + reg.radius);
        if (!(hi[k] > lo[k])) throw ConfigError("sample_region_in_cell: empty overlap");
    }
    for (long attempt = 0; attempt < 100000000L; ++attempt) {
        for (int k = 0; k < dim; ++k) p.c[k] = lo[k] + (hi[k] - lo[k]) * rng.next_double();
        if (dist(p, reg.center) <= reg.radius) return p;
    }
    throw ConfigError("sample_region_in_cell: rejection sampling failed to accept");
}

struct CasePair {
    DensityModel pickup;
    DensityModel delivery;
};

inline DensityModel uniform_box_density(const Box& b) {
    Region r;
    r.shape = Region::Shape::box;
    r.box = b;
    r.weight = 1.0;
    return DensityModel(b.dim, b, {r});
}

// Uniform density on the unit cube [0,1]^d.
inline DensityModel uniform_cube(int dim) {
    std::array<double, 3> lo{0.0, 0.0, 0.0}, hi{1.0, 1.0, 1.0};
    if (dim == 2) hi[2] = 0.0, lo[2] = 0.0;
    Box b;
    b.dim = dim;
    b.lo = lo;
    b.hi = hi;
    return uniform_box_density(b);
}

namespace detail {
inline Box make_box(double x0, double y0, double z0, double x1, double y1, double z1) {
    Box b;
    b.dim = 3;
    b.lo = {x0, y0, z0};
    b.hi = {x1, y1, z1};
    return b;
}
}  // namespace detail

// Benchmark pair 1: pickups uniform over two unit cubes centered at
// x = -4 and x = -2; deliveries over unit cubes centered at x = -4 and
// x = +2.  Environment is the tight bounding box of all three cubes.
inline CasePair case1() {
    const Box env = detail::make_box(-4.5, -0.5, -0.5, 2.5, 0.5, 0.5);
    auto cube_at = [](double cx) { return detail::make_box(cx - 0.5, -0.5, -0.5, cx + 0.5, 0.5, 0.5); };
    Region a, b;
    a.shape = b.shape = Region::Shape::box;
    a.weight = b.weight = 0.5;
    a.box = cube_at(-4.0);
    b.box = cube_at(-2.0);
    DensityModel phiP(3, env, {a, b});
    b.box = cube_at(2.0);
    DensityModel phiD(3, env, {a, b});
    return {phiP, phiD};
}

// Benchmark pair 2: pickups uniform on the origin ball of radius 2,
// deliveries uniform on the origin ball of radius 1, env [-2,2]^3.
inline CasePair case2() {
    const Box env = detail::make_box(-2.0, -2.0, -2.0, 2.0, 2.0, 2.0);
    Region r;
    r.shape = Region::Shape::ball;
    r.center = Point(0.0, 0.0, 0.0);
    r.weight = 1.0;
    r.radius = 2.0;
    DensityModel phiP(3, env, {r});
    r.radius = 1.0;
    DensityModel phiD(3, env, {r});
    return {phiP, phiD};
}

struct MeanEstimate {
    double mean = 0.0;
    double se = 0.0;      // standard error of the mean
    std::size_t samples = 0;
};

// Monte-Carlo estimate of E||Y - X|| for X ~ phiP, Y ~ phiD independent.
inline MeanEstimate mean_pair_distance(const DensityModel& phiP, const DensityModel& phiD,
                                       std::size_t samples, RngStream& rng) {
    if (samples < 2) throw ConfigError("mean_pair_distance: need at least 2 samples");
    double mean = 0.0, m2 = 0.0;
    for (std::size_t k = 1; k <= samples; ++k) {
        const Point x = sample(phiP, rng);
        const Point y = sample(phiD, rng);
        const double v = dist(y, x);
        const double delta = v - mean;
        mean += delta / static_cast<double>(k);
        m2 += delta * (v - mean);
    }
    MeanEstimate e;
    e.mean = mean;
    e.se = std::sqrt(m2 / static_cast<double>(samples - 1) / static_cast<double>(samples));
    e.samples = samples;
    return e;
}

// Draw an n-demand instance with pickups ~ phiP and deliveries ~ phiD
// (per demand: pickup first, then delivery).
inline Instance instance_from_samples(const DensityModel& phiP, const DensityModel& phiD,
                                      std::size_t n, RngStream& rng) {
    if (n < 1) throw ParseError("n must be >= 1");
    if (phiP.dimension != phiD.dimension) throw ConfigError("instance_from_samples: dimension mismatch");
    for (int k = 0; k < phiP.dimension; ++k)
        if (std::abs(phiP.env.lo[k] - phiD.env.lo[k]) > 1e-12 ||
            std::abs(phiP.env.hi[k] - phiD.env.hi[k]) > 1e-12)
            throw ConfigError("instance_from_samples: densities must share one env");
    std::vector<Demand> ds(n);
    for (std::size_t i = 0; i < n; ++i) {
        ds[i].pickup = sample(phiP, rng);
        ds[i].delivery = sample(phiD, rng);
    }
    return Instance(phiP.dimension, phiP.env, std::move(ds));
}

}  // namespace escp
