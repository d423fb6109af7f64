#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "escp/error.hpp"
#include "escp/geometry.hpp"
#include "escp/instance.hpp"
#include "escp/permutation.hpp"

namespace escp {

// A bipartite matching between deliveries and pickups: delivery i is linked
// to pickup sigma(i).
struct Matching {
    Permutation sigma;
    double total_cost = 0.0;
    double avg_cost = 0.0;
};

inline std::vector<Point> pickups(const Instance& inst) {
    std::vector<Point> x;
    x.reserve(inst.n());
    for (const Demand& d : inst.demands) x.push_back(d.pickup);
    return x;
}

inline std::vector<Point> deliveries(const Instance& inst) {
    std::vector<Point> y;
    y.reserve(inst.n());
    for (const Demand& d : inst.demands) y.push_back(d.delivery);
    return y;
}

inline double match_cost(const Permutation& sigma, const std::vector<Point>& pickup_pts,
                         const std::vector<Point>& delivery_pts) {
    double s = 0.0;
    for (std::size_t i = 0; i < delivery_pts.size(); ++i)
        s += dist(delivery_pts[i], pickup_pts[static_cast<std::size_t>(sigma(static_cast<int>(i)))]);
    return s;
}

namespace detail {

// Jonker-Volgenant style shortest augmenting path assignment, O(n^3).
// cost(i, j) is read through the row-major flat array.  Ties in the path
// search resolve toward the smaller column index: every comparison is
// strict, so the first candidate scanned wins.
inline std::vector<int> solve_assignment(const std::vector<double>& cost, std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = static_cast<int>(i);
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = static_cast<std::size_t>(p[j0]);
            double delta = inf;
            std::size_t j1 = 0;
            const double* row = cost.data() + (i0 - 1) * n;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = row[j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = static_cast<int>(j0);
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[static_cast<std::size_t>(p[j])] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = static_cast<std::size_t>(way[j0]);
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> rowsol(n, -1);
    for (std::size_t j = 1; j <= n; ++j) rowsol[static_cast<std::size_t>(p[j]) - 1] = static_cast<int>(j) - 1;
    return rowsol;
}

inline std::vector<double> distance_matrix(const std::vector<Point>& pickup_pts,
                                           const std::vector<Point>& delivery_pts) {
    const std::size_t n = delivery_pts.size();
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = dist(delivery_pts[i], pickup_pts[j]);
    return cost;
}

}  // namespace detail

// Optimal Euclidean bipartite matching between pickups and deliveries.
inline Matching hungarian_match(const std::vector<Point>& pickup_pts,
                                const std::vector<Point>& delivery_pts) {
    if (pickup_pts.size() != delivery_pts.size())
        throw ParseError("hungarian_match: point sets must have equal size");
    if (pickup_pts.empty()) throw ParseError("n must be >= 1");
    const std::size_t n = delivery_pts.size();
    const std::vector<double> cost = detail::distance_matrix(pickup_pts, delivery_pts);
    Matching m;
    m.sigma = Permutation(detail::solve_assignment(cost, n));
    m.total_cost = match_cost(m.sigma, pickup_pts, delivery_pts);
    m.avg_cost = m.total_cost / static_cast<double>(n);
    return m;
}

inline Matching hungarian_match(const Instance& inst) {
    return hungarian_match(pickups(inst), deliveries(inst));
}

// Exhaustive optimal matching for small n; keeps the lexicographically
// smallest optimal permutation (enumeration order is lexicographic and only
// strict improvements are accepted).
inline Matching brute_force_match(const std::vector<Point>& pickup_pts,
                                  const std::vector<Point>& delivery_pts,
                                  std::size_t max_n = 9) {
    if (pickup_pts.size() != delivery_pts.size())
        throw ParseError("brute_force_match: point sets must have equal size");
    if (pickup_pts.empty()) throw ParseError("n must be >= 1");
    const std::size_t n = pickup_pts.size();
    if (n > max_n) throw SizeError("brute_force_match: n exceeds exhaustive search cap");
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += dist(delivery_pts[i], pickup_pts[static_cast<std::size_t>(perm[i])]);
        if (c < best_cost) {
            best_cost = c;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    Matching m;
    m.sigma = Permutation(best);
    m.total_cost = best_cost;
    m.avg_cost = best_cost / static_cast<double>(n);
    return m;
}

}  // namespace escp
