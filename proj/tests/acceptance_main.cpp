// Acceptance harness: one self-contained check per release criterion.
// Prints one [PASS]/[FAIL] line per criterion with the measured values and
// elapsed time; the exit code is the number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "escp/escp.hpp"
#include "support/oracles.hpp"
#include "support/statistics.hpp"

using namespace escp;

namespace {

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& label) {
        if (!cond) {
            ok = false;
            detail << " !" << label;
        }
    }
};

struct Criterion {
    std::string name;
    double budget_s;  // <= 0: informational only
    std::function<void(Outcome&)> run;
};

std::vector<Point> draw(const DensityModel& phi, std::size_t n, RngStream& rng) {
    std::vector<Point> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(sample(phi, rng));
    return pts;
}

// --- criterion bodies --------------------------------------------------------

void c01_matching_oracle(Outcome& res) {
    double max_diff = 0.0;
    int agree = 0;
    const int total = 200;
    for (int trial = 0; trial < total; ++trial) {
        const int n = 1 + trial % 7;
        const int d = (trial % 2 == 0) ? 2 : 3;
        const Instance inst = testsupport::random_instance(n, d, 11000 + trial);
        const double fast = hungarian_match(inst).total_cost;
        const double slow = brute_force_match(pickups(inst), deliveries(inst)).total_cost;
        max_diff = std::max(max_diff, std::abs(fast - slow));
        if (std::abs(fast - slow) <= 1e-9) ++agree;
    }
    res.detail << agree << "/" << total << " agree, max |diff| = " << max_diff;
    res.require(agree == total, "oracle-mismatch");
}

void c02_exact_oracle(Outcome& res) {
    double max_diff = 0.0;
    int agree = 0, dominated = 0;
    const int total = 100;
    for (int trial = 0; trial < total; ++trial) {
        const int n = 1 + trial % 8;
        const int d = (trial % 2 == 0) ? 2 : 3;
        const Instance inst = testsupport::random_instance(n, d, 12000 + trial);
        const double enumerated = testsupport::exhaustive_scp_total(inst);
        const Tour best = exact_scp(inst);
        const Tour heur = splice(inst);
        max_diff = std::max(max_diff, std::abs(best.total_length - enumerated));
        if (std::abs(best.total_length - enumerated) <= 1e-9) ++agree;
        if (heur.total_length >= best.total_length - 1e-9) ++dominated;
    }
    res.detail << agree << "/" << total << " match enumeration (max |diff| = " << max_diff
               << "), heuristic >= exact in " << dominated << "/" << total;
    res.require(agree == total, "exact-vs-enumeration");
    res.require(dominated == total, "heuristic-below-exact");
}

void c03_subtour_identity(Outcome& res) {
    int agree = 0;
    const int total = 500;
    for (int trial = 0; trial < total; ++trial) {
        const int n = 2 + trial % 40;
        const int d = (trial % 2 == 0) ? 2 : 3;
        const Instance inst = testsupport::random_instance(n, d, 13000 + trial);
        SpliceDiagnostics diag;
        const Tour t = splice(inst, &diag);
        if (t.subtour_count == decompose(diag.matching.sigma).count()) ++agree;
    }
    res.detail << agree << "/" << total << " instances with subtours == permutation cycles";
    res.require(agree == total, "count-mismatch");
}

void c04_matching_equiprobability(Outcome& res) {
    RngStream rng(2025, 0);
    std::map<std::vector<int>, double> counts;
    const int draws = 6000;
    for (int i = 0; i < draws; ++i) {
        std::vector<Point> ps, ds;
        for (int k = 0; k < 3; ++k) ps.push_back(Point(rng.next_double(), rng.next_double()));
        for (int k = 0; k < 3; ++k) ds.push_back(Point(rng.next_double(), rng.next_double()));
        counts[hungarian_match(ps, ds).sigma.map()] += 1.0;
    }
    std::vector<double> obs;
    for (const auto& [key, c] : counts) obs.push_back(c);
    res.require(obs.size() == 6, "missing-permutations");
    double p = 0.0;
    if (obs.size() == 6) {
        p = testsupport::chi_square_gof(obs, std::vector<double>(6, 1.0 / 6.0)).p;
        res.detail << "6 outcomes over " << draws << " draws, chi-square p = " << p;
        res.require(p > 0.001, "uniformity-rejected");
    }
}

void c05_cycle_statistics(Outcome& res) {
    RngStream rng(314, 0);
    const std::size_t n = 1000;
    std::vector<double> counts;
    for (int trial = 0; trial < 200; ++trial)
        counts.push_back(static_cast<double>(decompose(random_permutation(n, rng)).count()));
    const auto m = testsupport::mean_se(counts);
    const double h = expected_cycle_count(n);
    res.detail << "mean cycles = " << m.mean << " vs harmonic sum " << h << " (3 SE = "
               << 3.0 * m.se << ")";
    res.require(std::abs(m.mean - h) <= 3.0 * m.se, "mean-outside-3se");
}

void c06_splice_near_optimality(Outcome& res) {
    const auto phi = uniform_cube(3);
    RngStream rng(606, 0);
    std::vector<double> ratio10;
    for (int trial = 0; trial < 25; ++trial) {
        Instance inst;
        inst.dimension = 3;
        inst.env = phi.env;
        for (int i = 0; i < 10; ++i) inst.demands.push_back({sample(phi, rng), sample(phi, rng)});
        ratio10.push_back(splice(inst).total_length / exact_scp(inst).total_length);
    }
    const double mean10 = testsupport::mean_se(ratio10).mean;

    auto lower_ratio = [&](int n) {
        std::vector<double> ratios;
        for (int trial = 0; trial < 10; ++trial) {
            Instance inst;
            inst.dimension = 3;
            inst.env = phi.env;
            for (int i = 0; i < n; ++i)
                inst.demands.push_back({sample(phi, rng), sample(phi, rng)});
            ratios.push_back(splice(inst).total_length / scp_lower_bound(inst));
        }
        return testsupport::mean_se(ratios).mean;
    };
    const double mean200 = lower_ratio(200);
    const double mean1000 = lower_ratio(1000);

    res.detail << "mean vs exact @ n=10: " << mean10 << " (<= 1.20); vs lower bound @ n=200: "
               << mean200 << " (<= 1.10), @ n=1000: " << mean1000 << " (<= 1.05)";
    res.require(mean10 <= 1.20, "n10-ratio");
    res.require(mean200 <= 1.10, "n200-ratio");
    res.require(mean1000 <= 1.05, "n1000-ratio");
}

void c07_transport_constants(Outcome& res) {
    const auto pair1 = case1();
    const auto pair2 = case2();
    const KappaPair k1 = kappa_pair(pair1.pickup, pair1.delivery);
    const KappaPair k2 = kappa_pair(pair2.pickup, pair2.delivery);
    res.detail << "constants: (" << k1.kappa << ", " << k1.kappa_tilde << ") and (" << k2.kappa
               << ", " << k2.kappa_tilde << ")";
    res.require(std::abs(k1.kappa - 0.892) <= 0.005, "pair1-kappa");
    res.require(std::abs(k1.kappa_tilde - 0.446) <= 0.005, "pair1-kappa-tilde");
    res.require(std::abs(k2.kappa - 1.141) <= 0.01, "pair2-kappa");
    res.require(std::abs(k2.kappa_tilde - 0.285) <= 0.01, "pair2-kappa-tilde");

    const WassersteinBracket b1 = wasserstein_bracket(pair1.pickup, pair1.delivery, 8);
    const WassersteinBracket b2 = wasserstein_bracket(pair2.pickup, pair2.delivery, 8);
    res.detail << "; brackets: [" << b1.lower << ", " << b1.upper << "] and [" << b2.lower << ", "
               << b2.upper << "]";
    res.require(b1.lower >= 1.8, "pair1-lower");
    res.require(b1.upper <= 2.2, "pair1-upper");
    res.require(b2.lower <= 0.75 && 0.75 <= b2.upper, "pair2-contains");
    res.require(std::abs(0.5 * (b2.lower + b2.upper) - 0.75) <= 0.25, "pair2-midpoint");
}

void c08_pair_statistics(Outcome& res) {
    const auto pair1 = case1();
    const auto pair2 = case2();
    RngStream r1(808, 0), r2(809, 0);
    const MeanEstimate m1 = mean_pair_distance(pair1.pickup, pair1.delivery, 1000000, r1);
    const MeanEstimate m2 = mean_pair_distance(pair2.pickup, pair2.delivery, 1000000, r2);
    // exact transport distances for the two benchmark pairs
    const double ls1 = lambda_star(1, 1.0, m1.mean, 2.0);
    const double ls2 = lambda_star(1, 1.0, m2.mean, 0.75);
    res.detail << "mean distances " << m1.mean << " and " << m2.mean << "; critical rates " << ls1
               << " and " << ls2;
    res.require(std::abs(m1.mean - 3.2) <= 0.05, "pair1-mean");
    res.require(std::abs(m2.mean - 1.66) <= 0.03, "pair2-mean");
    res.require(std::abs(ls1 - 0.190) <= 0.003, "pair1-rate");
    res.require(std::abs(ls2 - 0.415) <= 0.005, "pair2-rate");
}

void c09_matching_scaling(Outcome& res) {
    RngStream rng(909, 0);
    const std::size_t n = 1000;
    auto run_case = [&](const CasePair& pair) {
        std::vector<double> per_demand, residual;
        for (int trial = 0; trial < 10; ++trial) {
            const std::vector<Point> ps = draw(pair.pickup, n, rng);
            const std::vector<Point> ds = draw(pair.delivery, n, rng);
            const double lm = hungarian_match(ps, ds).total_cost;
            per_demand.push_back(lm / static_cast<double>(n));
            residual.push_back((lm - static_cast<double>(n) * 2.0) /
                               std::pow(static_cast<double>(n), 2.0 / 3.0));
        }
        return std::make_pair(testsupport::mean_se(per_demand).mean,
                              testsupport::mean_se(residual).mean);
    };
    const auto [mean1, resid1] = run_case(case1());
    const auto [mean2, resid2] = run_case(case2());
    res.detail << "per-demand matching length " << mean1 << " (target [1.90, 2.15]), residual "
               << resid1 << " (<= 0.892); second pair " << mean2 << " (target [0.70, 0.85])";
    res.require(mean1 >= 1.90 && mean1 <= 2.15, "pair1-window");
    res.require(resid1 <= 0.892, "pair1-residual");
    res.require(mean2 >= 0.70 && mean2 <= 0.85, "pair2-window");
}

void c10_shadow_guarantees(Outcome& res) {
    const auto pair = case1();
    // marginal law of the shadow sites
    {
        const GridPartition g = build_grid(pair.pickup, pair.delivery, 2);
        const TransportPlan plan = solve_optimistic(g);
        RngStream rng(1010, 0);
        const std::vector<Point> ds = draw(pair.delivery, 5000, rng);
        const std::vector<Point> shadows = sample_shadows(ds, g, plan, pair.pickup, rng);
        std::vector<double> counts(g.size(), 0.0);
        for (const Point& s : shadows) counts[static_cast<std::size_t>(g.locate(s))] += 1.0;
        const double p = testsupport::chi_square_gof(counts, g.measuresP).p;
        res.detail << "shadow marginal chi-square p = " << p;
        res.require(p > 0.001, "shadow-marginal");
    }
    // mean shadow leg against the pessimistic objective
    {
        const GridPartition g = build_grid(pair.pickup, pair.delivery, 2);
        const TransportPlan pes = solve_pessimistic(g);
        RngStream rng(1011, 0);
        const std::vector<Point> ds = draw(pair.delivery, 5000, rng);
        const std::vector<Point> shadows = sample_shadows(ds, g, pes, pair.pickup, rng);
        std::vector<double> legs;
        for (std::size_t k = 0; k < ds.size(); ++k) legs.push_back(dist(shadows[k], ds[k]));
        const auto m = testsupport::mean_se(legs);
        res.detail << "; mean shadow leg " << m.mean << " vs objective " << pes.objective
                   << " + 3 SE";
        res.require(m.mean <= pes.objective + 3.0 * m.se, "shadow-leg");
    }
    // full randomized matching against its discretization bound
    {
        const auto phi = uniform_cube(2);
        const std::size_t n = 200;
        const AutoParams p = auto_parameters(phi, phi, n);
        RngStream rng(1012, 0);
        std::vector<double> gaps;
        for (int trial = 0; trial < 10; ++trial) {
            const std::vector<Point> ps = draw(phi, n, rng);
            const std::vector<Point> ds = draw(phi, n, rng);
            const Matching m = randomized_ebmp(ps, ds, p.grid, p.plan, phi, rng);
            gaps.push_back(m.avg_cost - hungarian_match(ps, ds).avg_cost);
        }
        const auto g = testsupport::mean_se(gaps);
        const double bound = 2.0 * std::sqrt(2.0) / static_cast<double>(p.r);
        res.detail << "; matching gap " << g.mean << " vs bound " << bound << " + 3 SE";
        res.require(g.mean <= bound + 3.0 * g.se, "matching-gap");
    }
}

void c11_dynamic_thresholds(Outcome& res) {
    auto nn_estimate = [](const CasePair& pair, std::uint64_t seed) {
        DpdpConfig cfg;
        cfg.lambda = 1.0;
        cfg.policy = Policy::nearest_neighbor;
        cfg.horizon = 5000.0;
        cfg.seed = seed;
        cfg.phiP = pair.pickup;
        cfg.phiD = pair.delivery;
        return estimate_lambda_star(simulate(cfg));
    };
    const auto pair1 = case1();
    const auto pair2 = case2();

    const double single1 = nn_estimate(pair1, 42);
    const double single2 = nn_estimate(pair2, 42);
    double mean1 = 0.0, mean2 = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        mean1 += nn_estimate(pair1, seed);
        mean2 += nn_estimate(pair2, seed);
    }
    mean1 /= 5.0;
    mean2 /= 5.0;
    res.detail << "saturated estimates " << single1 << " / mean " << mean1
               << " (window [0.15, 0.25]) and " << single2 << " / mean " << mean2
               << " (window [0.44, 0.56])";
    res.require(single1 >= 0.15 && single1 <= 0.25, "pair1-single");
    res.require(mean1 >= 0.15 && mean1 <= 0.25, "pair1-mean");
    res.require(single2 >= 0.44 && single2 <= 0.56, "pair2-single");
    res.require(mean2 >= 0.44 && mean2 <= 0.56, "pair2-mean");

    // gated policy below and above the critical rate
    DpdpConfig cfg;
    cfg.policy = Policy::gated_splice;
    cfg.horizon = 5000.0;
    cfg.seed = 7;
    cfg.phiP = pair1.pickup;
    cfg.phiD = pair1.delivery;

    cfg.lambda = 0.095;  // half the critical rate
    const StabilityDiagnostic stable = stability_diagnostic(simulate(cfg));
    res.detail << "; stable slope " << stable.growth_rate;
    res.require(std::abs(stable.growth_rate) < 0.01 * cfg.lambda, "stable-slope");

    cfg.lambda = 0.38;  // twice the critical rate
    const SimTrace overloaded = simulate(cfg);
    const StabilityDiagnostic diverging = stability_diagnostic(overloaded);
    const double est = estimate_lambda_star(overloaded);
    const double excess = cfg.lambda - est;
    res.detail << "; overloaded slope " << diverging.growth_rate << " vs excess " << excess;
    res.require(diverging.growth_rate >= 0.5 * excess && diverging.growth_rate <= 1.5 * excess,
                "overloaded-slope");
}

}  // namespace

int main() {
    std::cout.precision(10);
    const std::vector<Criterion> criteria{
        {"matching oracle equivalence", 10.0, c01_matching_oracle},
        {"exact tour oracle equivalence", 60.0, c02_exact_oracle},
        {"subtour/cycle identity", 0.0, c03_subtour_identity},
        {"optimal matching equiprobability", 30.0, c04_matching_equiprobability},
        {"permutation cycle statistics", 0.0, c05_cycle_statistics},
        {"splice near-optimality", 300.0, c06_splice_near_optimality},
        {"transport constants and brackets", 300.0, c07_transport_constants},
        {"pair statistics and critical rates", 0.0, c08_pair_statistics},
        {"matching length scaling", 600.0, c09_matching_scaling},
        {"shadow matching guarantees", 0.0, c10_shadow_guarantees},
        {"dynamic stability thresholds", 900.0, c11_dynamic_thresholds},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const Criterion& c = criteria[i];
        Outcome res;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(res);
        } catch (const std::exception& e) {
            res.ok = false;
            res.detail << " exception: " << e.what();
        }
        const double elapsed = std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count();
        if (c.budget_s > 0.0 && elapsed > c.budget_s) {
            res.ok = false;
            res.detail << " over budget " << c.budget_s << "s";
        }
        if (!res.ok) ++failures;
        std::printf("[%s] %02zu %s: %s (%.1fs)\n", res.ok ? "PASS" : "FAIL", i + 1,
                    c.name.c_str(), res.detail.str().c_str(), elapsed);
        std::fflush(stdout);
    }
    if (failures == 0)
        std::printf("all %zu criteria passed\n", criteria.size());
    else
        std::printf("%d of %zu criteria FAILED\n", failures, criteria.size());
    return failures;
}
