#pragma once

#include <cmath>
#include <cstddef>
#include <iostream>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "escp/density.hpp"
#include "escp/error.hpp"
#include "escp/matching.hpp"
#include "escp/rng.hpp"
#include "escp/transport.hpp"

namespace escp {

namespace detail {

// Per-row view of a sparse plan: entries grouped by delivery cell.
inline std::vector<std::vector<TransportPlan::Entry>> plan_rows(const TransportPlan& plan,
                                                                std::size_t cells) {
    std::vector<std::vector<TransportPlan::Entry>> rows(cells);
    for (const TransportPlan::Entry& e : plan.entries)
        rows[static_cast<std::size_t>(e.i)].push_back(e);
    return rows;
}

// Swap the roles of the two marginals (test-mode helper for the symmetric
// variant; not part of the public surface).
inline TransportPlan transpose_plan(const TransportPlan& plan) {
    TransportPlan t = plan;
    for (TransportPlan::Entry& e : t.entries) std::swap(e.i, e.j);
    std::swap(t.u, t.v);
    return t;
}

// Draw from phi conditioned on a cell: pick a region by its mass inside the
// cell, then sample that region restricted to the cell.
class CellSampler {
  public:
    CellSampler(const DensityModel& phi, const GridPartition& grid) : phi_(phi), grid_(grid) {}

    Point draw(int cell_idx, RngStream& rng) {
        const std::vector<double>& mass = masses(cell_idx);
        const Box& cell = grid_.cells[static_cast<std::size_t>(cell_idx)];
        double total = 0.0;
        for (double m : mass) total += m;
        if (total <= 0.0)
            throw ConfigError("cell " + std::to_string(cell_idx) + " carries no pickup mass");
        double u = rng.next_double() * total;
        std::size_t g = 0;
        for (; g + 1 < mass.size(); ++g) {
            if (u < mass[g]) break;
            u -= mass[g];
        }
        if (mass[g] <= 0.0) {  // numerical fallthrough: take the heaviest region
            std::size_t best = 0;
            for (std::size_t q = 1; q < mass.size(); ++q)
                if (mass[q] > mass[best]) best = q;
            g = best;
        }
        return sample_region_in_cell(phi_.regions[g], cell, phi_.dimension, rng);
    }

  private:
    const std::vector<double>& masses(int cell_idx) {
        auto it = cache_.find(cell_idx);
        if (it != cache_.end()) return it->second;
        const Box& cell = grid_.cells[static_cast<std::size_t>(cell_idx)];
        std::vector<double> m(phi_.regions.size());
        for (std::size_t g = 0; g < m.size(); ++g)
            m[g] = phi_.regions[g].weight * phi_.regions[g].overlap_fraction(cell, phi_.dimension);
        return cache_.emplace(cell_idx, std::move(m)).first->second;
    }

    const DensityModel& phi_;
    const GridPartition& grid_;
    std::unordered_map<int, std::vector<double>> cache_;
};

}  // namespace detail

// Shadow sites: for each delivery y, pick a pickup cell j with probability
// alpha_ij / measuresD(i) (i = y's cell) and draw the shadow from the pickup
// density conditioned on cell j.  The shadows are distributed as phiP and
// E||X' - Y|| is bracketed by the plan objectives.
inline std::vector<Point> sample_shadows(const std::vector<Point>& delivery_pts,
                                         const GridPartition& grid, const TransportPlan& plan,
                                         const DensityModel& phiP, RngStream& rng) {
    const auto rows = detail::plan_rows(plan, grid.size());
    detail::CellSampler sampler(phiP, grid);
    std::vector<Point> shadows;
    shadows.reserve(delivery_pts.size());
    for (std::size_t k = 0; k < delivery_pts.size(); ++k) {
        const int i = grid.locate(delivery_pts[k]);
        const auto& row = rows[static_cast<std::size_t>(i)];
        double row_mass = 0.0;
        for (const TransportPlan::Entry& e : row) row_mass += e.alpha;
        if (row_mass <= 0.0)
            throw ConfigError("delivery " + std::to_string(k + 1) +
                              " lies in a cell with no plan mass");
        double u = rng.next_double() * row_mass;
        std::size_t pick = 0;
        for (; pick + 1 < row.size(); ++pick) {
            if (u < row[pick].alpha) break;
            u -= row[pick].alpha;
        }
        shadows.push_back(sampler.draw(row[pick].j, rng));
    }
    return shadows;
}

struct RandMatchInfo {
    double shadow_leg = 0.0;          // sum of ||X'_k - y_k||
    double shadow_match_cost = 0.0;   // optimal matching cost between X' and X
};

// Randomized matching through shadow sites: match the shadows against the
// true pickups optimally, then read the pairing back onto the deliveries.
// The resulting cost never exceeds shadow_leg + shadow_match_cost.
inline Matching randomized_ebmp(const std::vector<Point>& pickup_pts,
                                const std::vector<Point>& delivery_pts, const GridPartition& grid,
                                const TransportPlan& plan, const DensityModel& phiP,
                                RngStream& rng, RandMatchInfo* info = nullptr) {
    if (pickup_pts.size() != delivery_pts.size())
        throw ParseError("randomized_ebmp: point sets must have equal size");
    const std::vector<Point> shadows = sample_shadows(delivery_pts, grid, plan, phiP, rng);
    const Matching shadow_match = hungarian_match(pickup_pts, shadows);
    Matching m;
    m.sigma = shadow_match.sigma;
    m.total_cost = match_cost(m.sigma, pickup_pts, delivery_pts);
    m.avg_cost = m.total_cost / static_cast<double>(delivery_pts.size());
    double leg = 0.0;
    for (std::size_t k = 0; k < delivery_pts.size(); ++k) leg += dist(shadows[k], delivery_pts[k]);
    if (m.total_cost > leg + shadow_match.total_cost + 1e-9)
        throw Error("randomized_ebmp: triangle bound violated");
    if (info) {
        info->shadow_leg = leg;
        info->shadow_match_cost = shadow_match.total_cost;
    }
    return m;
}

// Grid resolution schedule: ceil(n^(1/d) * sqrt(log(e + n))), strictly
// faster than n^(1/d) so the discretization error vanishes per demand.
inline int default_resolution(std::size_t n, int d) {
    check_dim(d, "default_resolution");
    const double nd = std::pow(static_cast<double>(n), 1.0 / static_cast<double>(d));
    const double grow = std::sqrt(std::log(M_E + static_cast<double>(n)));
    return static_cast<int>(std::ceil(nd * grow));
}

struct AutoParams {
    int r = 1;               // requested shortest-axis resolution after capping
    bool capped = false;
    GridPartition grid;
    TransportPlan plan;      // pessimistic plan
};

namespace detail {

inline std::size_t grid_cell_count(const DensityModel& phi, int r) {
    double min_side = std::numeric_limits<double>::infinity();
    for (int k = 0; k < phi.dimension; ++k) min_side = std::min(min_side, phi.env.side(k));
    const double h = min_side / r;
    std::size_t total = 1;
    for (int k = 0; k < phi.dimension; ++k)
        total *= static_cast<std::size_t>(
            std::max(1, static_cast<int>(std::llround(phi.env.side(k) / h))));
    return total;
}

}  // namespace detail

// Resolution schedule plus the pessimistic plan for it; the cell cap of the
// dense solver is enforced by lowering r (with a warning) when needed.
inline AutoParams auto_parameters(const DensityModel& phiP, const DensityModel& phiD,
                                  std::size_t n) {
    AutoParams p;
    p.r = default_resolution(n, phiP.dimension);
    while (p.r > 1 && detail::grid_cell_count(phiP, p.r) > kMaxTransportCells) {
        --p.r;
        p.capped = true;
    }
    if (p.capped)
        std::cerr << "warning: resolution lowered to r = " << p.r
                  << " to respect the 4096-cell transport cap\n";
    p.grid = build_grid(phiP, phiD, p.r);
    p.plan = solve_pessimistic(p.grid);
    return p;
}

// Full randomized matching pipeline at the default resolution schedule.
inline Matching randomized_ebmp_auto(const std::vector<Point>& pickup_pts,
                                     const std::vector<Point>& delivery_pts,
                                     const DensityModel& phiP, const DensityModel& phiD,
                                     RngStream& rng, RandMatchInfo* info = nullptr,
                                     AutoParams* params_out = nullptr) {
    AutoParams p = auto_parameters(phiP, phiD, delivery_pts.size());
    Matching m = randomized_ebmp(pickup_pts, delivery_pts, p.grid, p.plan, phiP, rng, info);
    if (params_out) *params_out = std::move(p);
    return m;
}

}  // namespace escp
