#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <queue>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "escp/density.hpp"
#include "escp/error.hpp"
#include "escp/instance.hpp"
#include "escp/rng.hpp"
#include "escp/scp.hpp"

namespace escp {

enum class Policy { nearest_neighbor, gated_splice };

// Dynamic problem configuration: Poisson demand stream with rate lambda,
// m unit-capacity vehicles of the given speed, observed over [0, horizon].
struct DpdpConfig {
    double lambda = 1.0;
    int vehicles = 1;
    double speed = 1.0;
    Policy policy = Policy::nearest_neighbor;
    double horizon = 1000.0;
    double warmup = -1.0;           // < 0: defaults to horizon / 10
    double queue_sample_dt = -1.0;  // < 0: defaults to horizon / 1000
    std::uint64_t seed = 0;
    DensityModel phiP;
    DensityModel phiD;

    double effective_warmup() const { return warmup < 0.0 ? 0.1 * horizon : warmup; }
    double effective_sample_dt() const {
        return queue_sample_dt <= 0.0 ? horizon / 1000.0 : queue_sample_dt;
    }

    void validate() const {
        if (!(lambda > 0.0)) throw ParseError("lambda > 0 required");
        if (vehicles < 1) throw ParseError("vehicles >= 1 required");
        if (!(speed > 0.0)) throw ParseError("speed > 0 required");
        if (!(horizon > 0.0)) throw ParseError("horizon > 0 required");
        if (effective_warmup() >= horizon) throw ParseError("warmup must be below horizon");
    }
};

struct TraceEvent {
    enum class Kind { arrival, pickup_start, pickup, delivery };
    double time = 0.0;
    Kind kind = Kind::arrival;
    int demand = -1;
    int vehicle = -1;  // -1 for arrivals
};

inline const char* to_string(TraceEvent::Kind k) {
    switch (k) {
        case TraceEvent::Kind::arrival: return "arrival";
        case TraceEvent::Kind::pickup_start: return "pickup_start";
        case TraceEvent::Kind::pickup: return "pickup";
        default: return "delivery";
    }
}

struct QueueSample {
    double time = 0.0;
    std::size_t outstanding = 0;  // arrived but not yet delivered
};

struct SimTrace {
    double lambda = 0.0;
    double horizon = 0.0;
    double warmup = 0.0;
    std::size_t arrivals = 0;
    std::size_t served = 0;
    std::vector<TraceEvent> events;
    std::vector<QueueSample> queue;
    std::vector<double> waits;  // arrival-to-delivery, per served demand

    std::size_t outstanding_at_end() const { return arrivals - served; }
};

// Load factor of the system; stabilizable iff below 1.
inline double load_factor(double lambda, int vehicles, double speed, double mean_pair,
                          double wasserstein) {
    if (!(lambda > 0.0) || vehicles < 1 || !(speed > 0.0))
        throw ConfigError("load_factor: rate, fleet size and speed must be positive");
    return lambda * (mean_pair + wasserstein) / (static_cast<double>(vehicles) * speed);
}

// Largest stabilizable arrival rate.
inline double lambda_star(int vehicles, double speed, double mean_pair, double wasserstein) {
    if (vehicles < 1 || !(speed > 0.0))
        throw ConfigError("lambda_star: fleet size and speed must be positive");
    if (!(mean_pair + wasserstein > 0.0))
        throw ConfigError("lambda_star: zero expected travel per demand");
    return static_cast<double>(vehicles) * speed / (mean_pair + wasserstein);
}

namespace detail {

struct SimDemand {
    double arrival = 0.0;
    Point pickup;
    Point delivery;
    bool claimed = false;
    bool delivered = false;
};

struct SimVehicle {
    Point pos;
    bool idle = true;
    int current = -1;             // demand in service
    std::vector<int> fragment;    // remaining gated route (front = next)
};

// Event ordering at equal timestamps: deliveries first, then pickups, then
// arrivals, then queue samples; ties broken by insertion order.
struct SimEvent {
    double time;
    int priority;
    std::uint64_t seq;
    int kind;  // 0 delivery-reach, 1 pickup-reach, 2 arrival, 3 queue-sample
    int vehicle;
    int demand;
};

struct SimEventLater {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
        return std::tie(a.time, a.priority, a.seq) > std::tie(b.time, b.priority, b.seq);
    }
};

}  // namespace detail

// Event-driven simulation of the dynamic problem under the configured
// policy.  Everything is deterministic given the seed: arrival times and
// demand locations come from dedicated substreams, so the demand process is
// identical across policies.
inline SimTrace simulate(const DpdpConfig& cfg) {
    cfg.validate();
    if (cfg.phiP.dimension != cfg.phiD.dimension)
        throw ConfigError("simulate: density dimension mismatch");
    for (int k = 0; k < cfg.phiP.dimension; ++k)
        if (std::abs(cfg.phiP.env.lo[k] - cfg.phiD.env.lo[k]) > 1e-12 ||
            std::abs(cfg.phiP.env.hi[k] - cfg.phiD.env.hi[k]) > 1e-12)
            throw ConfigError("simulate: pickup and delivery environments differ");

    RngStream root(cfg.seed, 0);
    RngStream arrivals_rng = root.substream(1);
    RngStream pickup_rng = root.substream(2);
    RngStream delivery_rng = root.substream(3);
    RngStream vehicle_rng = root.substream(4);

    SimTrace trace;
    trace.lambda = cfg.lambda;
    trace.horizon = cfg.horizon;
    trace.warmup = cfg.effective_warmup();

    std::vector<detail::SimDemand> demands;
    std::vector<detail::SimVehicle> fleet(static_cast<std::size_t>(cfg.vehicles));
    for (auto& v : fleet) v.pos = sample(cfg.phiP, vehicle_rng);

    std::priority_queue<detail::SimEvent, std::vector<detail::SimEvent>, detail::SimEventLater> pq;
    std::uint64_t seq = 0;
    auto push = [&](double t, int priority, int kind, int vehicle, int demand) {
        pq.push({t, priority, seq++, kind, vehicle, demand});
    };

    // Lazily chained Poisson arrivals.
    double next_arrival = arrivals_rng.next_exponential(cfg.lambda);
    if (next_arrival <= cfg.horizon) push(next_arrival, 2, 2, -1, -1);

    const double dt = cfg.effective_sample_dt();
    for (double t = 0.0; t <= cfg.horizon + 1e-9; t += dt) push(std::min(t, cfg.horizon), 3, 3, -1, -1);

    std::vector<int> unclaimed;  // arrived, not yet claimed by a vehicle
    std::size_t outstanding = 0;

    auto start_service = [&](int vid, int did, double now) {
        detail::SimVehicle& veh = fleet[static_cast<std::size_t>(vid)];
        detail::SimDemand& d = demands[static_cast<std::size_t>(did)];
        d.claimed = true;
        veh.idle = false;
        veh.current = did;
        trace.events.push_back({now, TraceEvent::Kind::pickup_start, did, vid});
        push(now + dist(veh.pos, d.pickup) / cfg.speed, 1, 1, vid, did);
    };

    auto nn_assign_vehicle = [&](int vid, double now) {
        detail::SimVehicle& veh = fleet[static_cast<std::size_t>(vid)];
        if (!veh.idle || unclaimed.empty()) return;
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_slot = 0;
        for (std::size_t s = 0; s < unclaimed.size(); ++s) {
            const double c = dist(veh.pos, demands[static_cast<std::size_t>(unclaimed[s])].pickup);
            if (c < best ||
                (c == best && unclaimed[s] < unclaimed[best_slot])) {
                best = c;
                best_slot = s;
            }
        }
        const int did = unclaimed[best_slot];
        unclaimed.erase(unclaimed.begin() + static_cast<std::ptrdiff_t>(best_slot));
        start_service(vid, did, now);
    };

    auto nn_assign_all = [&](double now) {
        for (int vid = 0; vid < cfg.vehicles && !unclaimed.empty(); ++vid)
            nn_assign_vehicle(vid, now);
    };

    auto all_idle = [&]() {
        for (const auto& v : fleet)
            if (!v.idle) return false;
        return true;
    };

    // Gated rounds: when every vehicle is idle, solve the static problem on
    // all outstanding demands, split the tour at delivery->pickup links into
    // one fragment per vehicle (greedy length balancing), and dispatch.
    auto gated_round = [&](double now) {
        if (unclaimed.empty() || !all_idle()) return;
        std::vector<int> ids = unclaimed;
        std::sort(ids.begin(), ids.end());
        unclaimed.clear();
        std::vector<Demand> round_demands;
        round_demands.reserve(ids.size());
        for (int id : ids)
            round_demands.push_back({demands[static_cast<std::size_t>(id)].pickup,
                                     demands[static_cast<std::size_t>(id)].delivery});
        const Instance round_inst(cfg.phiP.dimension, cfg.phiP.env, std::move(round_demands));
        const Tour tour = splice(round_inst);

        const std::size_t n = ids.size();
        const std::size_t parts = std::min<std::size_t>(static_cast<std::size_t>(cfg.vehicles), n);
        // Leg lengths along the open walk starting at the tour's first demand.
        std::vector<double> pd(n), link(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const Demand& d = round_inst.demands[static_cast<std::size_t>(tour.order[k])];
            pd[k] = dist(d.pickup, d.delivery);
            if (k + 1 < n) {
                const Demand& next = round_inst.demands[static_cast<std::size_t>(tour.order[k + 1])];
                link[k] = dist(d.delivery, next.pickup);
            }
        }
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) total += pd[k] + link[k];

        std::vector<std::vector<int>> fragments(1);
        double frag_len = 0.0, consumed = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            // Cut before demand k when the running fragment would overshoot an
            // adaptive target of (length left)/(fragments left).  Cuts land on
            // delivery->pickup links only, so pairs stay intact.
            if (!fragments.back().empty() && fragments.size() < parts) {
                const double target =
                    (total - consumed) / static_cast<double>(parts - fragments.size() + 1);
                if (frag_len + link[k - 1] + pd[k] > target + 1e-12) {
                    consumed += frag_len;
                    fragments.emplace_back();
                    frag_len = 0.0;
                }
            }
            if (!fragments.back().empty()) frag_len += link[k - 1];
            fragments.back().push_back(tour.order[k]);
            frag_len += pd[k];
        }
        for (std::size_t f = 0; f < fragments.size(); ++f) {
            detail::SimVehicle& veh = fleet[f];
            veh.fragment.clear();
            for (int local : fragments[f]) veh.fragment.push_back(ids[static_cast<std::size_t>(local)]);
            const int did = veh.fragment.front();
            veh.fragment.erase(veh.fragment.begin());
            start_service(static_cast<int>(f), did, now);
        }
    };

    while (!pq.empty()) {
        const detail::SimEvent ev = pq.top();
        pq.pop();
        if (ev.time > cfg.horizon + 1e-9) break;
        const double now = ev.time;
        switch (ev.kind) {
            case 0: {  // delivery reached
                detail::SimVehicle& veh = fleet[static_cast<std::size_t>(ev.vehicle)];
                detail::SimDemand& d = demands[static_cast<std::size_t>(ev.demand)];
                d.delivered = true;
                veh.pos = d.delivery;
                veh.current = -1;
                trace.events.push_back({now, TraceEvent::Kind::delivery, ev.demand, ev.vehicle});
                trace.waits.push_back(now - d.arrival);
                ++trace.served;
                --outstanding;
                if (cfg.policy == Policy::nearest_neighbor) {
                    veh.idle = true;
                    nn_assign_vehicle(ev.vehicle, now);
                } else {
                    if (!veh.fragment.empty()) {
                        const int did = veh.fragment.front();
                        veh.fragment.erase(veh.fragment.begin());
                        start_service(ev.vehicle, did, now);
                    } else {
                        veh.idle = true;
                        gated_round(now);
                    }
                }
                break;
            }
            case 1: {  // pickup reached
                detail::SimVehicle& veh = fleet[static_cast<std::size_t>(ev.vehicle)];
                detail::SimDemand& d = demands[static_cast<std::size_t>(ev.demand)];
                veh.pos = d.pickup;
                trace.events.push_back({now, TraceEvent::Kind::pickup, ev.demand, ev.vehicle});
                push(now + dist(d.pickup, d.delivery) / cfg.speed, 0, 0, ev.vehicle, ev.demand);
                break;
            }
            case 2: {  // arrival
                detail::SimDemand d;
                d.arrival = now;
                d.pickup = sample(cfg.phiP, pickup_rng);
                d.delivery = sample(cfg.phiD, delivery_rng);
                const int did = static_cast<int>(demands.size());
                demands.push_back(d);
                unclaimed.push_back(did);
                ++trace.arrivals;
                ++outstanding;
                trace.events.push_back({now, TraceEvent::Kind::arrival, did, -1});
                next_arrival = now + arrivals_rng.next_exponential(cfg.lambda);
                if (next_arrival <= cfg.horizon) push(next_arrival, 2, 2, -1, -1);
                if (cfg.policy == Policy::nearest_neighbor)
                    nn_assign_all(now);
                else
                    gated_round(now);
                break;
            }
            default: {  // queue sample
                trace.queue.push_back({now, outstanding});
                break;
            }
        }
    }
    return trace;
}

// Throughput-based estimate of the largest stabilizable rate from an
// overloaded run: lambda minus the queue growth rate n(T)/T, with both the
// time origin and the queue baseline taken at the end of the warmup window.
inline double estimate_lambda_star(const SimTrace& trace, double lambda) {
    if (trace.queue.size() < 2) throw ConfigError("estimate_lambda_star: queue samples missing");
    const QueueSample* start = &trace.queue.front();
    for (const QueueSample& q : trace.queue) {
        if (q.time >= trace.warmup) {
            start = &q;
            break;
        }
    }
    const QueueSample& end = trace.queue.back();
    if (!(end.time > start->time))
        throw ConfigError("estimate_lambda_star: empty post-warmup window");
    const double growth = (static_cast<double>(end.outstanding) - static_cast<double>(start->outstanding)) /
                          (end.time - start->time);
    return lambda - growth;
}

inline double estimate_lambda_star(const SimTrace& trace) {
    return estimate_lambda_star(trace, trace.lambda);
}

struct StabilityDiagnostic {
    double mean_outstanding = 0.0;
    double growth_rate = 0.0;  // least-squares slope of outstanding vs time
    std::size_t samples = 0;
};

inline StabilityDiagnostic stability_diagnostic(const SimTrace& trace) {
    StabilityDiagnostic s;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const QueueSample& q : trace.queue) {
        if (q.time < trace.warmup) continue;
        const double x = q.time, y = static_cast<double>(q.outstanding);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++s.samples;
    }
    if (s.samples < 2) throw ConfigError("stability_diagnostic: not enough post-warmup samples");
    const double k = static_cast<double>(s.samples);
    s.mean_outstanding = sy / k;
    const double denom = k * sxx - sx * sx;
    s.growth_rate = denom > 0.0 ? (k * sxy - sx * sy) / denom : 0.0;
    return s;
}

// CSV exports ---------------------------------------------------------------

inline std::string trace_to_csv(const SimTrace& trace) {
    std::ostringstream out;
    out.precision(17);
    out << "time,kind,demand_id,vehicle_id\n";
    for (const TraceEvent& e : trace.events)  // ids 1-based; vehicle 0 = none (arrivals)
        out << e.time << ',' << to_string(e.kind) << ',' << e.demand + 1 << ',' << e.vehicle + 1
            << '\n';
    return out.str();
}

inline std::string queue_to_csv(const SimTrace& trace) {
    std::ostringstream out;
    out.precision(17);
    out << "time,outstanding\n";
    for (const QueueSample& q : trace.queue) out << q.time << ',' << q.outstanding << '\n';
    return out.str();
}

}  // namespace escp
