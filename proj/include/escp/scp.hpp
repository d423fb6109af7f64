#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "escp/error.hpp"
#include "escp/instance.hpp"
#include "escp/matching.hpp"
#include "escp/permutation.hpp"

namespace escp {

// A closed tour serving every demand.  `order` lists demand indices
// (0-based) in visiting sequence, starting from the smallest demand index.
// The vehicle drives x[order0] -> y[order0] -> x[order1] -> ... and finally
// back to x[order0].
struct Tour {
    std::vector<int> order;
    double total_length = 0.0;
    double pd_length = 0.0;
    double matching_length = 0.0;     // retained delivery->pickup matching links
    double connecting_length = 0.0;   // links added to merge subtours
    std::size_t subtour_count = 0;    // subtours before connection
};

// A delivery->pickup link: after delivering demand `from`, drive to the
// pickup of demand `to`.
struct Link {
    int from = 0;
    int to = 0;
};

struct SpliceDiagnostics {
    Matching matching;
    std::vector<std::vector<int>> subtours;  // canonical: each starts at its smallest demand
    std::vector<Link> added;
    std::vector<Link> removed;
};

// Subtours induced by the matching: follow y_i -> x_sigma(i) links until the
// walk returns to its starting demand.  Listed by ascending smallest member.
inline std::vector<std::vector<int>> matching_subtours(const Permutation& sigma) {
    std::vector<std::vector<int>> tours;
    const std::size_t n = sigma.size();
    std::vector<char> seen(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::vector<int> t;
        int cur = static_cast<int>(s);
        do {
            seen[static_cast<std::size_t>(cur)] = 1;
            t.push_back(cur);
            cur = sigma(cur);
        } while (cur != static_cast<int>(s));
        tours.push_back(std::move(t));
    }
    return tours;
}

// Replace one matching link per subtour with a connecting link so the
// subtours merge into a single closed tour.  Walks subtours in order of
// smallest demand index; from the delivery that closes the current group it
// jumps to the nearest pickup of the next subtour (ties toward the smaller
// demand index), and finally back to the first subtour's smallest pickup.
inline std::vector<Link> connect_subtours(const std::vector<std::vector<int>>& subtours,
                                          const Matching& m, const Instance& inst,
                                          std::vector<Link>* removed = nullptr) {
    std::vector<Link> added;
    if (subtours.size() < 2) return added;
    const Permutation inv = m.sigma.inverse();
    const int first = subtours[0][0];
    int prev = inv(first);  // delivery whose matching link closes subtour 1
    for (std::size_t k = 1; k < subtours.size(); ++k) {
        int next = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int j : subtours[k]) {
            const double c = dist(inst.demands[static_cast<std::size_t>(prev)].delivery,
                                  inst.demands[static_cast<std::size_t>(j)].pickup);
            if (c < best) {
                best = c;
                next = j;
            }
        }
        if (removed) removed->push_back({prev, m.sigma(prev)});
        added.push_back({prev, next});
        prev = inv(next);
    }
    if (removed) removed->push_back({prev, m.sigma(prev)});
    added.push_back({prev, first});
    return added;
}

namespace detail {

inline Tour tour_from_successors(const Instance& inst, const std::vector<int>& succ,
                                 double matching_length, double connecting_length,
                                 std::size_t subtour_count) {
    Tour t;
    t.pd_length = inst.pd_length();
    t.matching_length = matching_length;
    t.connecting_length = connecting_length;
    t.subtour_count = subtour_count;
    t.total_length = t.pd_length + matching_length + connecting_length;
    t.order.reserve(inst.n());
    int cur = 0;
    do {
        t.order.push_back(cur);
        cur = succ[static_cast<std::size_t>(cur)];
    } while (cur != 0 && t.order.size() <= inst.n());
    if (t.order.size() != inst.n()) throw Error("tour successors do not form a single cycle");
    return t;
}

}  // namespace detail

// Heuristic solver: optimal bipartite matching first, then subtour
// connection.  Output tour starts at demand 0 (printed 1-based as demand 1).
inline Tour splice(const Instance& inst, SpliceDiagnostics* diag = nullptr) {
    const Matching m = hungarian_match(inst);
    const std::vector<std::vector<int>> subtours = matching_subtours(m.sigma);
    std::vector<Link> removed;
    const std::vector<Link> added = connect_subtours(subtours, m, inst, &removed);

    std::vector<int> succ = m.sigma.map();
    double connecting = 0.0, removed_len = 0.0;
    for (const Link& l : removed)
        removed_len += dist(inst.demands[static_cast<std::size_t>(l.from)].delivery,
                            inst.demands[static_cast<std::size_t>(l.to)].pickup);
    for (const Link& l : added) {
        connecting += dist(inst.demands[static_cast<std::size_t>(l.from)].delivery,
                           inst.demands[static_cast<std::size_t>(l.to)].pickup);
        succ[static_cast<std::size_t>(l.from)] = l.to;
    }
    if (diag) {
        diag->matching = m;
        diag->subtours = subtours;
        diag->added = added;
        diag->removed = removed;
    }
    return detail::tour_from_successors(inst, succ, m.total_cost - removed_len, connecting,
                                        subtours.size());
}

// Lower bound on any feasible tour: every tour pays all pickup->delivery
// legs plus at least the optimal matching cost of its delivery->pickup legs.
inline double scp_lower_bound(const Instance& inst) {
    return inst.pd_length() + hungarian_match(inst).total_cost;
}

namespace detail {

struct ExactState {
    const std::vector<double>* link = nullptr;  // link[i*n+j] = dist(y_i, x_j)
    const std::vector<double>* out_min = nullptr;
    std::size_t n = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<int> best_order;
    std::vector<int> order;
    std::vector<char> used;
    double remaining_bound = 0.0;  // sum of out_min over unvisited demands
};

inline void exact_dfs(ExactState& st, int cur, double cost) {
    const std::size_t n = st.n;
    if (st.order.size() == n) {
        const double total = cost + (*st.link)[static_cast<std::size_t>(cur) * n + 0];
        if (total < st.best_cost) {
            st.best_cost = total;
            st.best_order = st.order;
        }
        return;
    }
    if (cost + (*st.out_min)[static_cast<std::size_t>(cur)] + st.remaining_bound >= st.best_cost)
        return;
    for (std::size_t j = 1; j < n; ++j) {
        if (st.used[j]) continue;
        const double step = (*st.link)[static_cast<std::size_t>(cur) * n + j];
        st.used[j] = 1;
        st.order.push_back(static_cast<int>(j));
        st.remaining_bound -= (*st.out_min)[j];
        exact_dfs(st, static_cast<int>(j), cost + step);
        st.remaining_bound += (*st.out_min)[j];
        st.order.pop_back();
        st.used[j] = 0;
    }
}

}  // namespace detail

// Optimal single-tour solution by depth-first branch and bound over cyclic
// visiting orders (start pinned at demand 0; candidates scanned in ascending
// index so the lexicographically smallest optimum is found first).
inline Tour exact_scp(const Instance& inst, std::size_t max_n = 12) {
    const std::size_t n = inst.n();
    if (n > max_n) throw SizeError("exact_scp: n exceeds the exact search cap; use splice for larger instances");
    const std::vector<Point> x = pickups(inst);
    const std::vector<Point> y = deliveries(inst);
    std::vector<double> link(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) link[i * n + j] = dist(y[i], x[j]);

    std::vector<double> out_min(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) out_min[i] = std::min(out_min[i], link[i * n + j]);
    if (n == 1) out_min[0] = link[0];

    // Greedy cyclic nearest-neighbor incumbent (cost only, plus slack so the
    // true optimum is always re-discovered and recorded by the search).
    double greedy = 0.0;
    {
        std::vector<char> used(n, 0);
        used[0] = 1;
        std::size_t cur = 0;
        for (std::size_t step = 1; step < n; ++step) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t j = 1; j < n; ++j)
                if (!used[j] && link[cur * n + j] < best) {
                    best = link[cur * n + j];
                    arg = j;
                }
            used[arg] = 1;
            greedy += best;
            cur = arg;
        }
        greedy += link[cur * n + 0];
    }

    detail::ExactState st;
    st.link = &link;
    st.out_min = &out_min;
    st.n = n;
    st.best_cost = greedy + 1e-9 + 1e-12 * greedy;
    st.order.reserve(n);
    st.order.push_back(0);
    st.used.assign(n, 0);
    st.used[0] = 1;
    st.remaining_bound = 0.0;
    for (std::size_t j = 1; j < n; ++j) st.remaining_bound += out_min[j];
    detail::exact_dfs(st, 0, 0.0);

    Tour t;
    t.order = st.best_order;
    t.pd_length = inst.pd_length();
    t.matching_length = st.best_cost;
    t.connecting_length = 0.0;
    t.subtour_count = 1;
    t.total_length = t.pd_length + t.matching_length;
    return t;
}

// Recompute a tour's length geometrically and check its structure; throws
// on malformed tours, returns the walked length.
inline double validate_tour(const Instance& inst, const Tour& t, double tol = 1e-9) {
    const std::size_t n = inst.n();
    if (t.order.size() != n) throw ParseError("tour order must visit every demand once");
    std::vector<char> seen(n, 0);
    for (int i : t.order) {
        if (i < 0 || static_cast<std::size_t>(i) >= n || seen[static_cast<std::size_t>(i)])
            throw ParseError("tour order must visit every demand once");
        seen[static_cast<std::size_t>(i)] = 1;
    }
    double len = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const Demand& a = inst.demands[static_cast<std::size_t>(t.order[k])];
        const Demand& b = inst.demands[static_cast<std::size_t>(t.order[(k + 1) % n])];
        len += dist(a.pickup, a.delivery) + dist(a.delivery, b.pickup);
    }
    if (std::abs(len - t.total_length) > tol * std::max(1.0, std::abs(len)))
        throw Error("tour length fields disagree with geometry");
    return len;
}

}  // namespace escp
