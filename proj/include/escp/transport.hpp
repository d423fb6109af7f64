#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "escp/density.hpp"
#include "escp/error.hpp"
#include "escp/geometry.hpp"

namespace escp {

// Estimated optimal-matching constant for d = 3 (uniform samples).
inline constexpr double kBetaM3 = 0.7080;

// Largest cell count the dense transportation solver accepts.
inline constexpr std::size_t kMaxTransportCells = 4096;

// Smallest distance between any two points of two axis boxes.
inline double min_cell_distance(const Box& a, const Box& b) {
    double s = 0.0;
    for (int k = 0; k < a.dim; ++k) {
        const double gap = std::max({0.0, a.lo[k] - b.hi[k], b.lo[k] - a.hi[k]});
        s += gap * gap;
    }
    return std::sqrt(s);
}

// Largest distance between any two points of two axis boxes (norm of the
// per-axis farthest-corner separations).
inline double max_cell_distance(const Box& a, const Box& b) {
    double s = 0.0;
    for (int k = 0; k < a.dim; ++k) {
        const double far = std::max(std::abs(a.hi[k] - b.lo[k]), std::abs(b.hi[k] - a.lo[k]));
        s += far * far;
    }
    return std::sqrt(s);
}

// A rectangular-cell partition of the environment with the pickup and
// delivery measure of every cell.  Cell indices are row-major with axis 0
// fastest: index = (iz * ry + iy) * rx + ix.
struct GridPartition {
    Box env;
    int dimension = 3;
    std::array<int, 3> res{1, 1, 1};
    std::vector<Box> cells;
    std::vector<double> measuresP;
    std::vector<double> measuresD;

    std::size_t size() const { return cells.size(); }

    int locate(const Point& p) const {
        int idx[3] = {0, 0, 0};
        for (int k = 0; k < dimension; ++k) {
            const double side = env.side(k) / res[static_cast<std::size_t>(k)];
            int i = static_cast<int>(std::floor((p.c[k] - env.lo[k]) / side));
            idx[k] = std::clamp(i, 0, res[static_cast<std::size_t>(k)] - 1);
        }
        return (idx[2] * res[1] + idx[1]) * res[0] + idx[0];
    }

    double max_cell_diameter() const {
        double s = 0.0;
        for (int k = 0; k < dimension; ++k) {
            const double side = env.side(k) / res[static_cast<std::size_t>(k)];
            s += side * side;
        }
        return std::sqrt(s);
    }
};

// Partition the shared environment of two densities into near-cubic cells.
// `r` is the cell count along the shortest axis; longer axes get
// proportionally more cells so cells stay close to cubical.
inline GridPartition build_grid(const DensityModel& phiP, const DensityModel& phiD, int r) {
    if (r < 1) throw ConfigError("build_grid: r must be >= 1");
    if (phiP.dimension != phiD.dimension) throw ConfigError("build_grid: dimension mismatch");
    for (int k = 0; k < phiP.dimension; ++k)
        if (std::abs(phiP.env.lo[k] - phiD.env.lo[k]) > 1e-12 ||
            std::abs(phiP.env.hi[k] - phiD.env.hi[k]) > 1e-12)
            throw ConfigError("build_grid: densities must share one env");

    GridPartition g;
    g.env = phiP.env;
    g.dimension = phiP.dimension;
    double min_side = std::numeric_limits<double>::infinity();
    for (int k = 0; k < g.dimension; ++k) min_side = std::min(min_side, g.env.side(k));
    const double h = min_side / r;
    std::size_t total = 1;
    for (int k = 0; k < g.dimension; ++k) {
        g.res[static_cast<std::size_t>(k)] =
            std::max(1, static_cast<int>(std::llround(g.env.side(k) / h)));
        total *= static_cast<std::size_t>(g.res[static_cast<std::size_t>(k)]);
    }

    g.cells.reserve(total);
    const int rx = g.res[0], ry = g.res[1], rz = g.res[2];
    for (int iz = 0; iz < rz; ++iz)
        for (int iy = 0; iy < ry; ++iy)
            for (int ix = 0; ix < rx; ++ix) {
                Box c;
                c.dim = g.dimension;
                const int id[3] = {ix, iy, iz};
                for (int k = 0; k < g.dimension; ++k) {
                    const double side = g.env.side(k) / g.res[static_cast<std::size_t>(k)];
                    c.lo[k] = g.env.lo[k] + side * id[k];
                    c.hi[k] = (id[k] + 1 == g.res[static_cast<std::size_t>(k)])
                                  ? g.env.hi[k]
                                  : g.env.lo[k] + side * (id[k] + 1);
                }
                g.cells.push_back(c);
            }

    g.measuresP.resize(total);
    g.measuresD.resize(total);
    double sp = 0.0, sd = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        g.measuresP[i] = cell_measure(phiP, g.cells[i]);
        g.measuresD[i] = cell_measure(phiD, g.cells[i]);
        sp += g.measuresP[i];
        sd += g.measuresD[i];
    }
    if (sp <= 0.0 || sd <= 0.0) throw ConfigError("build_grid: empty measures");
    for (std::size_t i = 0; i < total; ++i) {
        g.measuresP[i] /= sp;
        g.measuresD[i] /= sd;
    }
    return g;
}

// A feasible (here: optimal) transportation plan between the delivery
// marginal (rows) and the pickup marginal (columns).  Entries are sparse;
// omitted pairs carry zero mass.  Duals certify optimality.
struct TransportPlan {
    enum class Kind { optimistic, pessimistic };
    struct Entry {
        int i = 0;  // delivery cell
        int j = 0;  // pickup cell
        double alpha = 0.0;
    };
    Kind kind = Kind::optimistic;
    std::vector<Entry> entries;
    double objective = 0.0;
    std::vector<double> u;  // delivery-side duals, full cell indexing
    std::vector<double> v;  // pickup-side duals, full cell indexing

    std::vector<double> row_sums(std::size_t cells) const {
        std::vector<double> s(cells, 0.0);
        for (const Entry& e : entries) s[static_cast<std::size_t>(e.i)] += e.alpha;
        return s;
    }
    std::vector<double> col_sums(std::size_t cells) const {
        std::vector<double> s(cells, 0.0);
        for (const Entry& e : entries) s[static_cast<std::size_t>(e.j)] += e.alpha;
        return s;
    }
};

namespace detail {

// Dense transportation simplex (MODI) with a Vogel start.  Entering
// variables are picked by block pricing over a rotating cursor (most
// negative reduced cost within the first block that has one); the
// cascading epsilon perturbation on the supplies keeps every pivot
// strictly improving, so no anti-cycling discipline is needed.  The
// perturbation is removed before reporting by re-solving the flows on
// the final basis tree against the unperturbed marginals.
class TransportSimplex {
  public:
    struct Arc {
        int r, c;
        double flow;
    };

    TransportSimplex(std::vector<double> cost, std::vector<double> supply,
                     std::vector<double> demand)
        : cost_(std::move(cost)), supply0_(std::move(supply)), demand0_(std::move(demand)) {
        m_ = supply0_.size();
        n_ = demand0_.size();
        cost_scale_ = 1e-300;
        for (double c : cost_) cost_scale_ = std::max(cost_scale_, std::abs(c));
        supply_ = supply0_;
        demand_ = demand0_;
        // Cascading perturbation, total below ~1e-9 so clean-up residue
        // stays well inside the marginal tolerance.
        const double eps = 1e-12;
        double total = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            const double e = eps * static_cast<double>(i + 1) / static_cast<double>(m_ + 1);
            supply_[i] += e;
            total += e;
        }
        double dsum = 0.0;
        for (double d : demand_) dsum += d;
        for (std::size_t j = 0; j < n_; ++j) demand_[j] += total * (demand0_[j] / dsum);
    }

    void solve() {
        vogel_init();
        complete_basis();
        build_adjacency();
        modi();
        desperturb();
        compute_duals();
    }

    const std::vector<Arc>& arcs() const { return arcs_; }
    const std::vector<double>& duals_u() const { return u_; }
    const std::vector<double>& duals_v() const { return v_; }
    double cost_at(std::size_t i, std::size_t j) const { return cost_[i * n_ + j]; }

  private:
    // --- Vogel initial basis ------------------------------------------
    struct Two {
        double c1 = std::numeric_limits<double>::infinity();
        double c2 = std::numeric_limits<double>::infinity();
        int i1 = -1, i2 = -1;
    };

    void scan_row(std::size_t i, Two& t) const {
        t = Two();
        const double* row = cost_.data() + i * n_;
        for (std::size_t j = 0; j < n_; ++j) {
            if (!col_alive_[j]) continue;
            const double c = row[j];
            if (c < t.c1) {
                t.c2 = t.c1;
                t.i2 = t.i1;
                t.c1 = c;
                t.i1 = static_cast<int>(j);
            } else if (c < t.c2) {
                t.c2 = c;
                t.i2 = static_cast<int>(j);
            }
        }
    }

    void scan_col(std::size_t j, Two& t) const {
        t = Two();
        for (std::size_t i = 0; i < m_; ++i) {
            if (!row_alive_[i]) continue;
            const double c = cost_[i * n_ + j];
            if (c < t.c1) {
                t.c2 = t.c1;
                t.i2 = t.i1;
                t.c1 = c;
                t.i1 = static_cast<int>(i);
            } else if (c < t.c2) {
                t.c2 = c;
                t.i2 = static_cast<int>(i);
            }
        }
    }

    // One Vogel allocation; closes exactly one line.
    void allocate(std::size_t i, std::size_t j) {
        const double f = std::min(supply_[i], demand_[j]);
        arcs_.push_back({static_cast<int>(i), static_cast<int>(j), f});
        supply_[i] -= f;
        demand_[j] -= f;
        const bool row_done = supply_[i] <= 0.0;
        const bool col_done = demand_[j] <= 0.0;
        if (row_done && (!col_done || rows_left_ > 1)) {
            row_alive_[i] = 0;
            --rows_left_;
            supply_[i] = 0.0;
        } else {
            col_alive_[j] = 0;
            --cols_left_;
            demand_[j] = 0.0;
        }
    }

    void vogel_init() {
        row_alive_.assign(m_, 1);
        col_alive_.assign(n_, 1);
        rows_left_ = m_;
        cols_left_ = n_;
        std::vector<Two> row_two(m_), col_two(n_);
        std::vector<char> row_ok(m_, 0), col_ok(n_, 0);
        auto row_cache = [&](std::size_t i) -> const Two& {
            Two& t = row_two[i];
            if (!row_ok[i] || t.i1 < 0 || !col_alive_[static_cast<std::size_t>(t.i1)] ||
                (t.i2 >= 0 && !col_alive_[static_cast<std::size_t>(t.i2)])) {
                scan_row(i, t);
                row_ok[i] = 1;
            }
            return t;
        };
        auto col_cache = [&](std::size_t j) -> const Two& {
            Two& t = col_two[j];
            if (!col_ok[j] || t.i1 < 0 || !row_alive_[static_cast<std::size_t>(t.i1)] ||
                (t.i2 >= 0 && !row_alive_[static_cast<std::size_t>(t.i2)])) {
                scan_col(j, t);
                col_ok[j] = 1;
            }
            return t;
        };
        while (rows_left_ > 1 && cols_left_ > 1) {
            double best_pen = -1.0;
            bool from_row = true;
            std::size_t pick = 0, partner = 0;
            for (std::size_t i = 0; i < m_; ++i) {
                if (!row_alive_[i]) continue;
                const Two& t = row_cache(i);
                const double pen = (t.i2 >= 0) ? t.c2 - t.c1 : std::numeric_limits<double>::infinity();
                if (pen > best_pen) {
                    best_pen = pen;
                    from_row = true;
                    pick = i;
                    partner = static_cast<std::size_t>(t.i1);
                }
            }
            for (std::size_t j = 0; j < n_; ++j) {
                if (!col_alive_[j]) continue;
                const Two& t = col_cache(j);
                const double pen = (t.i2 >= 0) ? t.c2 - t.c1 : std::numeric_limits<double>::infinity();
                if (pen > best_pen) {
                    best_pen = pen;
                    from_row = false;
                    pick = j;
                    partner = static_cast<std::size_t>(t.i1);
                }
            }
            if (from_row)
                allocate(pick, partner);
            else
                allocate(partner, pick);
        }
        // A single line remains on one side: sweep it in index order.
        if (rows_left_ == 1) {
            std::size_t i = 0;
            while (!row_alive_[i]) ++i;
            for (std::size_t j = 0; j < n_; ++j)
                if (col_alive_[j]) arcs_.push_back({static_cast<int>(i), static_cast<int>(j), demand_[j]});
        } else if (cols_left_ == 1) {
            std::size_t j = 0;
            while (!col_alive_[j]) ++j;
            for (std::size_t i = 0; i < m_; ++i)
                if (row_alive_[i]) arcs_.push_back({static_cast<int>(i), static_cast<int>(j), supply_[i]});
        }
    }

    // --- Basis tree maintenance ---------------------------------------
    int uf_find(std::vector<int>& p, int x) const {
        while (p[static_cast<std::size_t>(x)] != x) {
            p[static_cast<std::size_t>(x)] = p[static_cast<std::size_t>(p[static_cast<std::size_t>(x)])];
            x = p[static_cast<std::size_t>(x)];
        }
        return x;
    }

    void complete_basis() {
        std::vector<int> parent(m_ + n_);
        for (std::size_t k = 0; k < m_ + n_; ++k) parent[k] = static_cast<int>(k);
        std::size_t components = m_ + n_;
        for (const Arc& a : arcs_) {
            const int r1 = uf_find(parent, a.r);
            const int r2 = uf_find(parent, static_cast<int>(m_) + a.c);
            if (r1 != r2) {
                parent[static_cast<std::size_t>(r1)] = r2;
                --components;
            }
        }
        for (std::size_t i = 0; i < m_ && components > 1; ++i)
            for (std::size_t j = 0; j < n_ && components > 1; ++j) {
                const int r1 = uf_find(parent, static_cast<int>(i));
                const int r2 = uf_find(parent, static_cast<int>(m_ + j));
                if (r1 != r2) {
                    parent[static_cast<std::size_t>(r1)] = r2;
                    arcs_.push_back({static_cast<int>(i), static_cast<int>(j), 0.0});
                    --components;
                }
            }
        if (arcs_.size() != m_ + n_ - 1) throw Error("transport: basis is not a spanning tree");
    }

    void build_adjacency() {
        adj_.assign(m_ + n_, {});
        for (std::size_t a = 0; a < arcs_.size(); ++a) {
            adj_[static_cast<std::size_t>(arcs_[a].r)].push_back(static_cast<int>(a));
            adj_[m_ + static_cast<std::size_t>(arcs_[a].c)].push_back(static_cast<int>(a));
        }
    }

    static void drop_from(std::vector<int>& list, int value) {
        for (std::size_t k = 0; k < list.size(); ++k)
            if (list[k] == value) {
                list[k] = list.back();
                list.pop_back();
                return;
            }
    }

    void compute_duals() {
        u_.assign(m_, 0.0);
        v_.assign(n_, 0.0);
        scratch_flag_.assign(m_ + n_, 0);
        scratch_stack_.clear();
        for (std::size_t start = 0; start < m_; ++start) {
            if (scratch_flag_[start]) continue;
            scratch_flag_[start] = 1;
            scratch_stack_.push_back(static_cast<int>(start));
            while (!scratch_stack_.empty()) {
                const int node = scratch_stack_.back();
                scratch_stack_.pop_back();
                for (int a : adj_[static_cast<std::size_t>(node)]) {
                    const Arc& arc = arcs_[static_cast<std::size_t>(a)];
                    const int other =
                        (node < static_cast<int>(m_)) ? static_cast<int>(m_) + arc.c : arc.r;
                    if (scratch_flag_[static_cast<std::size_t>(other)]) continue;
                    scratch_flag_[static_cast<std::size_t>(other)] = 1;
                    const double c = cost_at(static_cast<std::size_t>(arc.r), static_cast<std::size_t>(arc.c));
                    if (node < static_cast<int>(m_))
                        v_[static_cast<std::size_t>(arc.c)] = c - u_[static_cast<std::size_t>(arc.r)];
                    else
                        u_[static_cast<std::size_t>(arc.r)] = c - v_[static_cast<std::size_t>(arc.c)];
                    scratch_stack_.push_back(other);
                }
            }
        }
    }

    // Tree path between two nodes; fills path_ with arc ids from `to`
    // backwards to `from`.
    void find_path(int from, int to) {
        parent_arc_.assign(m_ + n_, -1);
        parent_node_.assign(m_ + n_, -1);
        scratch_flag_.assign(m_ + n_, 0);
        scratch_stack_.clear();
        scratch_stack_.push_back(from);
        scratch_flag_[static_cast<std::size_t>(from)] = 1;
        for (std::size_t qi = 0; qi < scratch_stack_.size(); ++qi) {
            const int node = scratch_stack_[qi];
            if (node == to) break;
            for (int a : adj_[static_cast<std::size_t>(node)]) {
                const Arc& arc = arcs_[static_cast<std::size_t>(a)];
                const int other =
                    (node < static_cast<int>(m_)) ? static_cast<int>(m_) + arc.c : arc.r;
                if (scratch_flag_[static_cast<std::size_t>(other)]) continue;
                scratch_flag_[static_cast<std::size_t>(other)] = 1;
                parent_arc_[static_cast<std::size_t>(other)] = a;
                parent_node_[static_cast<std::size_t>(other)] = node;
                scratch_stack_.push_back(other);
            }
        }
        if (!scratch_flag_[static_cast<std::size_t>(to)])
            throw Error("transport: basis lost connectivity");
        path_.clear();
        for (int cur = to; cur != from; cur = parent_node_[static_cast<std::size_t>(cur)])
            path_.push_back(parent_arc_[static_cast<std::size_t>(cur)]);
    }

    // Entering-arc pricing: scan the cost matrix in fixed blocks starting at a
    // rotating cursor and take the most negative reduced cost in the first
    // block that has one (ties toward the smallest linear index).  The supply
    // perturbation keeps every pivot strictly improving, so no Bland-style
    // discipline is needed for termination.
    std::size_t find_entering(double tol) {
        const std::size_t total = m_ * n_;
        const std::size_t block = std::min<std::size_t>(16384, total);
        std::size_t scanned = 0;
        while (scanned < total) {
            const std::size_t len = std::min(block, total - scanned);
            std::size_t best = total;
            double best_red = -tol;
            for (std::size_t k = 0; k < len; ++k) {
                const std::size_t p = price_pos_ + k >= total ? price_pos_ + k - total
                                                              : price_pos_ + k;
                const std::size_t i = p / n_, j = p % n_;
                const double red = cost_[p] - u_[i] - v_[j];
                if (red < best_red) {
                    best_red = red;
                    best = p;
                }
            }
            scanned += len;
            price_pos_ += len;
            if (price_pos_ >= total) price_pos_ -= total;
            if (best != total) return best;
        }
        return total;  // optimal
    }

    void modi() {
        const double tol = 1e-10 * cost_scale_;
        const std::size_t max_pivots = 5000000;
        for (std::size_t it = 0; it < max_pivots; ++it) {
            compute_duals();
            const std::size_t enter = find_entering(tol);
            if (enter == m_ * n_) return;  // optimal
            const std::size_t ei = enter / n_, ej = enter % n_;

            // Cycle = entering arc + tree path; path arcs at even positions
            // (counted from the entering row's node) lose flow.
            find_path(static_cast<int>(m_ + ej), static_cast<int>(ei));
            double theta = std::numeric_limits<double>::infinity();
            int leave = -1;
            for (std::size_t k = 0; k < path_.size(); k += 2) {
                const Arc& a = arcs_[static_cast<std::size_t>(path_[k])];
                const bool better =
                    a.flow < theta ||
                    (leave >= 0 && a.flow == theta &&
                     std::pair<int, int>(a.r, a.c) <
                         std::pair<int, int>(arcs_[static_cast<std::size_t>(leave)].r,
                                             arcs_[static_cast<std::size_t>(leave)].c));
                if (better) {
                    theta = a.flow;
                    leave = path_[k];
                }
            }
            if (leave < 0) throw Error("transport: cycle without leaving arc");
            for (std::size_t k = 0; k < path_.size(); ++k) {
                Arc& a = arcs_[static_cast<std::size_t>(path_[k])];
                a.flow += (k % 2 == 0) ? -theta : theta;
            }
            Arc& la = arcs_[static_cast<std::size_t>(leave)];
            drop_from(adj_[static_cast<std::size_t>(la.r)], leave);
            drop_from(adj_[m_ + static_cast<std::size_t>(la.c)], leave);
            la.r = static_cast<int>(ei);
            la.c = static_cast<int>(ej);
            la.flow = theta;
            adj_[ei].push_back(leave);
            adj_[m_ + ej].push_back(leave);
        }
        throw Error("transport: pivot limit exceeded");
    }

    // Re-solve tree flows against unperturbed marginals by leaf stripping.
    void desperturb() {
        const std::size_t nodes = m_ + n_;
        std::vector<double> rem(nodes);
        for (std::size_t i = 0; i < m_; ++i) rem[i] = supply0_[i];
        for (std::size_t j = 0; j < n_; ++j) rem[m_ + j] = demand0_[j];
        std::vector<int> degree(nodes);
        std::vector<char> arc_done(arcs_.size(), 0), node_done(nodes, 0);
        std::vector<int> queue;
        for (std::size_t k = 0; k < nodes; ++k) {
            degree[k] = static_cast<int>(adj_[k].size());
            if (degree[k] == 1) queue.push_back(static_cast<int>(k));
        }
        for (std::size_t qi = 0; qi < queue.size(); ++qi) {
            const int node = queue[qi];
            if (node_done[static_cast<std::size_t>(node)]) continue;
            node_done[static_cast<std::size_t>(node)] = 1;
            int live_arc = -1;
            for (int a : adj_[static_cast<std::size_t>(node)])
                if (!arc_done[static_cast<std::size_t>(a)]) live_arc = a;
            if (live_arc < 0) continue;
            Arc& arc = arcs_[static_cast<std::size_t>(live_arc)];
            arc_done[static_cast<std::size_t>(live_arc)] = 1;
            double f = rem[static_cast<std::size_t>(node)];
            if (f < 0.0) {
                if (f < -1e-7) throw Error("transport: negative flow after clean-up");
                f = 0.0;
            }
            arc.flow = f;
            const int other = (node < static_cast<int>(m_)) ? static_cast<int>(m_) + arc.c : arc.r;
            rem[static_cast<std::size_t>(node)] = 0.0;
            rem[static_cast<std::size_t>(other)] -= f;
            if (--degree[static_cast<std::size_t>(other)] == 1) queue.push_back(other);
        }
    }

    std::size_t m_ = 0, n_ = 0;
    std::vector<double> cost_;
    std::vector<double> supply0_, demand0_, supply_, demand_;
    std::vector<char> row_alive_, col_alive_;
    std::size_t rows_left_ = 0, cols_left_ = 0;
    std::vector<Arc> arcs_;
    std::vector<std::vector<int>> adj_;
    std::vector<double> u_, v_;
    std::vector<int> parent_arc_, parent_node_, scratch_stack_, path_;
    std::vector<char> scratch_flag_;
    double cost_scale_ = 1.0;
    std::size_t price_pos_ = 0;
};

inline TransportPlan solve_transport(const GridPartition& g, TransportPlan::Kind kind) {
    if (g.size() > kMaxTransportCells)
        throw ConfigError("transport: grid exceeds 4096 cells; lower the resolution r");
    // Cells carrying no mass on a marginal are dropped from that side.
    std::vector<int> rows, cols;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.measuresD[i] > 0.0) rows.push_back(static_cast<int>(i));
        if (g.measuresP[i] > 0.0) cols.push_back(static_cast<int>(i));
    }
    const std::size_t m = rows.size(), n = cols.size();
    std::vector<double> cost(m * n), supply(m), demand(n);
    for (std::size_t i = 0; i < m; ++i) supply[i] = g.measuresD[static_cast<std::size_t>(rows[i])];
    for (std::size_t j = 0; j < n; ++j) demand[j] = g.measuresP[static_cast<std::size_t>(cols[j])];
    for (std::size_t i = 0; i < m; ++i) {
        const Box& a = g.cells[static_cast<std::size_t>(rows[i])];
        for (std::size_t j = 0; j < n; ++j) {
            const Box& b = g.cells[static_cast<std::size_t>(cols[j])];
            cost[i * n + j] = (kind == TransportPlan::Kind::optimistic) ? min_cell_distance(a, b)
                                                                        : max_cell_distance(a, b);
        }
    }
    TransportSimplex simplex(std::move(cost), std::move(supply), std::move(demand));
    simplex.solve();

    TransportPlan plan;
    plan.kind = kind;
    plan.u.assign(g.size(), 0.0);
    plan.v.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < m; ++i)
        plan.u[static_cast<std::size_t>(rows[i])] = simplex.duals_u()[i];
    for (std::size_t j = 0; j < n; ++j)
        plan.v[static_cast<std::size_t>(cols[j])] = simplex.duals_v()[j];
    double obj = 0.0;
    for (const auto& arc : simplex.arcs()) {
        if (arc.flow <= 0.0) continue;
        TransportPlan::Entry e;
        e.i = rows[static_cast<std::size_t>(arc.r)];
        e.j = cols[static_cast<std::size_t>(arc.c)];
        e.alpha = arc.flow;
        obj += arc.flow *
               simplex.cost_at(static_cast<std::size_t>(arc.r), static_cast<std::size_t>(arc.c));
        plan.entries.push_back(e);
    }
    plan.objective = obj;
    std::sort(plan.entries.begin(), plan.entries.end(), [](const auto& a, const auto& b) {
        return std::pair<int, int>(a.i, a.j) < std::pair<int, int>(b.i, b.j);
    });
    return plan;
}

}  // namespace detail

// Optimistic discretized transportation problem: mass alpha_ij pays the
// smallest distance between cells i and j.  Its optimum lower-bounds the
// Wasserstein distance between the two densities.
inline TransportPlan solve_optimistic(const GridPartition& g) {
    return detail::solve_transport(g, TransportPlan::Kind::optimistic);
}

// Pessimistic counterpart: mass pays the largest inter-cell distance; the
// optimum upper-bounds the Wasserstein distance.
inline TransportPlan solve_pessimistic(const GridPartition& g) {
    return detail::solve_transport(g, TransportPlan::Kind::pessimistic);
}

struct WassersteinBracket {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t cells = 0;
};

inline WassersteinBracket wasserstein_bracket(const DensityModel& phiP, const DensityModel& phiD,
                                              int r) {
    const GridPartition g = build_grid(phiP, phiD, r);
    WassersteinBracket b;
    b.lower = solve_optimistic(g).objective;
    b.upper = solve_pessimistic(g).objective;
    b.cells = g.size();
    return b;
}

// Worst-case bracket width added by discretization: twice the largest cell
// diameter.
inline double refinement_gap_bound(const GridPartition& g) { return 2.0 * g.max_cell_diameter(); }

namespace detail {

inline bool regions_disjoint(const Region& a, const Region& b) {
    if (a.shape == Region::Shape::box && b.shape == Region::Shape::box)
        return !boxes_overlap(a.box, b.box);
    if (a.shape == Region::Shape::ball && b.shape == Region::Shape::ball)
        return dist(a.center, b.center) > a.radius + b.radius;
    const Region& ball = (a.shape == Region::Shape::ball) ? a : b;
    const Region& box = (a.shape == Region::Shape::ball) ? b : a;
    double s = 0.0;
    for (int k = 0; k < box.box.dim; ++k) {
        const double d =
            std::max({0.0, box.box.lo[k] - ball.center.c[k], ball.center.c[k] - box.box.hi[k]});
        s += d * d;
    }
    return std::sqrt(s) > ball.radius;
}

inline bool pairwise_disjoint(const std::vector<Region>& regs) {
    for (std::size_t a = 0; a < regs.size(); ++a)
        for (std::size_t b = a + 1; b < regs.size(); ++b)
            if (!regions_disjoint(regs[a], regs[b])) return false;
    return true;
}

inline bool boxes_only(const DensityModel& phi) {
    for (const Region& r : phi.regions)
        if (r.shape != Region::Shape::box) return false;
    return true;
}

// Exact integral of f(densities at point) over env for box-only models:
// slice env at every box face, densities are constant on each slab cell.
template <typename F>
double slab_integral(const std::vector<const DensityModel*>& models, F&& f) {
    const DensityModel& first = *models.front();
    const int dim = first.dimension;
    std::array<std::vector<double>, 3> cuts;
    for (int k = 0; k < dim; ++k) {
        auto& c = cuts[static_cast<std::size_t>(k)];
        c = {first.env.lo[k], first.env.hi[k]};
        for (const DensityModel* phi : models)
            for (const Region& r : phi->regions) {
                c.push_back(std::clamp(r.box.lo[k], first.env.lo[k], first.env.hi[k]));
                c.push_back(std::clamp(r.box.hi[k], first.env.lo[k], first.env.hi[k]));
            }
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-13; }),
                c.end());
    }
    if (dim == 2) cuts[2] = {0.0, 1.0};
    double total = 0.0;
    std::vector<double> dens(models.size());
    for (std::size_t iz = 0; iz + 1 < cuts[2].size(); ++iz)
        for (std::size_t iy = 0; iy + 1 < cuts[1].size(); ++iy)
            for (std::size_t ix = 0; ix + 1 < cuts[0].size(); ++ix) {
                Point c = Point::of_dim(dim);
                c.c[0] = 0.5 * (cuts[0][ix] + cuts[0][ix + 1]);
                c.c[1] = 0.5 * (cuts[1][iy] + cuts[1][iy + 1]);
                if (dim == 3) c.c[2] = 0.5 * (cuts[2][iz] + cuts[2][iz + 1]);
                double vol = (cuts[0][ix + 1] - cuts[0][ix]) * (cuts[1][iy + 1] - cuts[1][iy]);
                if (dim == 3) vol *= cuts[2][iz + 1] - cuts[2][iz];
                for (std::size_t q = 0; q < models.size(); ++q) dens[q] = density_at(*models[q], c);
                total += vol * f(dens);
            }
    return total;
}

// Midpoint quadrature of f(densities at point) over env.
template <typename F>
double midpoint_integral(const std::vector<const DensityModel*>& models, F&& f, int res) {
    const DensityModel& first = *models.front();
    const int dim = first.dimension;
    const int r[3] = {res, res, dim == 3 ? res : 1};
    double total = 0.0;
    std::vector<double> dens(models.size());
    double cell_vol = 1.0;
    for (int k = 0; k < dim; ++k) cell_vol *= first.env.side(k) / r[k];
    for (int iz = 0; iz < r[2]; ++iz)
        for (int iy = 0; iy < r[1]; ++iy)
            for (int ix = 0; ix < r[0]; ++ix) {
                Point c = Point::of_dim(dim);
                const int id[3] = {ix, iy, iz};
                for (int k = 0; k < dim; ++k)
                    c.c[k] = first.env.lo[k] + first.env.side(k) * (id[k] + 0.5) / r[k];
                for (std::size_t q = 0; q < models.size(); ++q) dens[q] = density_at(*models[q], c);
                total += cell_vol * f(dens);
            }
    return total;
}

template <typename F>
double density_integral(const std::vector<const DensityModel*>& models, F&& f, int quad_res) {
    bool all_boxes = true;
    for (const DensityModel* phi : models) all_boxes = all_boxes && boxes_only(*phi);
    if (all_boxes) return slab_integral(models, f);
    return midpoint_integral(models, f, quad_res);
}

}  // namespace detail

// kappa(phi) = beta * integral phi^(2/3): the first-order matching-cost
// functional.  Only d = 3 is supported (beta is pinned for d = 3).
inline double kappa(const DensityModel& phi, int quad_res = 160) {
    if (phi.dimension != 3) throw ConfigError("kappa: matching constant is pinned for d = 3 only");
    if (detail::pairwise_disjoint(phi.regions)) {
        double s = 0.0;
        for (const Region& r : phi.regions)
            s += std::pow(r.weight, 2.0 / 3.0) * std::cbrt(r.volume(3));
        return kBetaM3 * s;
    }
    const std::vector<const DensityModel*> models{&phi};
    return kBetaM3 *
           detail::density_integral(
               models, [](const std::vector<double>& d) { return std::pow(d[0], 2.0 / 3.0); },
               quad_res);
}

struct KappaPair {
    double kappa_pickup = 0.0;
    double kappa_delivery = 0.0;
    double kappa = 0.0;        // min of the two: the first-order constant
    double kappa_tilde = 0.0;  // beta * integral min(phiP, phiD)^(2/3)
};

inline KappaPair kappa_pair(const DensityModel& phiP, const DensityModel& phiD,
                            int quad_res = 160) {
    KappaPair k;
    k.kappa_pickup = kappa(phiP, quad_res);
    k.kappa_delivery = kappa(phiD, quad_res);
    k.kappa = std::min(k.kappa_pickup, k.kappa_delivery);
    const std::vector<const DensityModel*> models{&phiP, &phiD};
    k.kappa_tilde =
        kBetaM3 * detail::density_integral(
                      models,
                      [](const std::vector<double>& d) {
                          return std::pow(std::min(d[0], d[1]), 2.0 / 3.0);
                      },
                      quad_res);
    return k;
}

// CSV export of a plan: one row per positive entry, with the cell pair's
// optimistic and pessimistic distances.
inline std::string plan_to_csv(const TransportPlan& plan, const GridPartition& g) {
    std::ostringstream out;
    out.precision(17);
    out << "i,j,alpha,min_dist,max_dist\n";
    for (const TransportPlan::Entry& e : plan.entries) {
        const Box& a = g.cells[static_cast<std::size_t>(e.i)];
        const Box& b = g.cells[static_cast<std::size_t>(e.j)];
        out << e.i << ',' << e.j << ',' << e.alpha << ',' << min_cell_distance(a, b) << ','
            << max_cell_distance(a, b) << '\n';
    }
    return out.str();
}

}  // namespace escp
