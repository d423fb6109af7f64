#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "escp/density.hpp"
#include "escp/dpdp.hpp"
#include "escp/error.hpp"
#include "escp/instance.hpp"
#include "escp/json_io.hpp"
#include "escp/matching.hpp"
#include "escp/randmatch.hpp"
#include "escp/scp.hpp"
#include "escp/transport.hpp"

namespace escp {
namespace cli {

// Exit codes: 0 success, 1 parse/config error, 2 size cap, 3 unknown preset.
inline constexpr int kExitOk = 0;
inline constexpr int kExitParse = 1;
inline constexpr int kExitSize = 2;
inline constexpr int kExitPreset = 3;

struct PresetError : Error {
    using Error::Error;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::ostringstream make_row() {
    std::ostringstream out;
    out.precision(17);
    return out;
}

inline CasePair densities_for(const std::string& name) {
    if (name == "case1") return case1();
    if (name == "case2") return case2();
    if (name == "uniform-cube") return CasePair{uniform_cube(3), uniform_cube(3)};
    throw ParseError("unknown case: " + name + " (expected case1, case2 or uniform-cube)");
}

inline CasePair load_densities(const std::string& case_name, const std::string& pair_path,
                               const std::string& pickup_path,
                               const std::string& delivery_path) {
    if (!case_name.empty()) return densities_for(case_name);
    if (!pair_path.empty()) return read_density_pair(pair_path);
    if (pickup_path.empty() || delivery_path.empty())
        throw ParseError(
            "provide --case, --densities, or both --pickup-density and --delivery-density");
    return CasePair{read_density(pickup_path), read_density(delivery_path)};
}

}  // namespace detail

// solve ----------------------------------------------------------------------

inline int cmd_solve(const std::string& input, const std::string& algorithm,
                     const std::string& out_path) {
    const Instance inst = read_instance(input);
    const Tour tour = algorithm == "exact" ? exact_scp(inst) : splice(inst);
    if (!out_path.empty()) write_tour(tour, out_path);
    auto out = detail::make_row();
    out << "total_length " << tour.total_length << "\n";
    out << "subtour_count " << tour.subtour_count << "\n";
    std::cout << out.str();
    return kExitOk;
}

// match ----------------------------------------------------------------------

inline int cmd_match(const std::string& input, const std::string& pairs_csv) {
    const Instance inst = read_instance(input);
    const Matching m = hungarian_match(inst);
    if (!pairs_csv.empty()) {
        const std::vector<Point> xs = pickups(inst);
        const std::vector<Point> ys = deliveries(inst);
        auto csv = detail::make_row();
        csv << "delivery,pickup,length\n";
        for (std::size_t i = 0; i < inst.n(); ++i) {
            const int j = m.sigma(static_cast<int>(i));
            csv << i + 1 << ',' << j + 1 << ','
                << dist(ys[i], xs[static_cast<std::size_t>(j)]) << '\n';
        }
        write_text_file(pairs_csv, csv.str());
    }
    auto out = detail::make_row();
    out << "total_cost " << m.total_cost << "\n";
    out << "avg_cost " << m.avg_cost << "\n";
    std::cout << out.str();
    return kExitOk;
}

// wasserstein ------------------------------------------------------------------

inline int cmd_wasserstein(const std::string& case_name, const std::string& pair_path,
                           const std::string& pickup_path, const std::string& delivery_path, int r,
                           const std::string& plan_out) {
    const CasePair pair = detail::load_densities(case_name, pair_path, pickup_path, delivery_path);
    const GridPartition g = build_grid(pair.pickup, pair.delivery, r);
    const TransportPlan lower = solve_optimistic(g);
    const TransportPlan upper = solve_pessimistic(g);
    if (!plan_out.empty()) write_text_file(plan_out, plan_to_csv(upper, g));
    auto out = detail::make_row();
    out << "lower " << lower.objective << "\n";
    out << "upper " << upper.objective << "\n";
    out << "cells " << g.cells.size() << "\n";
    out << "gap_bound " << refinement_gap_bound(g) << "\n";
    std::cout << out.str();
    return kExitOk;
}

// kappa ------------------------------------------------------------------------

inline int cmd_kappa(const std::string& case_name, const std::string& pair_path,
                     const std::string& pickup_path, const std::string& delivery_path,
                     int quad_res) {
    const CasePair pair = detail::load_densities(case_name, pair_path, pickup_path, delivery_path);
    const KappaPair kp = kappa_pair(pair.pickup, pair.delivery, quad_res);
    auto out = detail::make_row();
    out << "kappa_pickup " << kp.kappa_pickup << "\n";
    out << "kappa_delivery " << kp.kappa_delivery << "\n";
    out << "kappa " << kp.kappa << "\n";
    out << "kappa_tilde " << kp.kappa_tilde << "\n";
    std::cout << out.str();
    return kExitOk;
}

// simulate ----------------------------------------------------------------------

inline int cmd_simulate(const std::string& config_path, const std::string& out_dir, int bracket_r,
                        std::size_t mean_samples) {
    const DpdpConfig cfg = read_dpdp_config(config_path);
    const SimTrace trace = simulate(cfg);

    RngStream stat_rng(cfg.seed, 9001);
    const MeanEstimate mean_yx = mean_pair_distance(cfg.phiP, cfg.phiD, mean_samples, stat_rng);
    const WassersteinBracket bracket = wasserstein_bracket(cfg.phiP, cfg.phiD, bracket_r);
    const double w_mid = 0.5 * (bracket.lower + bracket.upper);
    const StabilityDiagnostic diag = stability_diagnostic(trace);

    double mean_wait = 0.0;
    for (double w : trace.waits) mean_wait += w;
    if (!trace.waits.empty()) mean_wait /= static_cast<double>(trace.waits.size());

    json summary{
        {"lambda", cfg.lambda},
        {"m", cfg.vehicles},
        {"v", cfg.speed},
        {"policy", cfg.policy == Policy::nearest_neighbor ? "nearest_neighbor" : "gated_splice"},
        {"horizon", cfg.horizon},
        {"warmup", cfg.effective_warmup()},
        {"seed", cfg.seed},
        {"arrivals", trace.arrivals},
        {"served", trace.served},
        {"outstanding", trace.outstanding_at_end()},
        {"mean_wait", mean_wait},
        {"mean_outstanding", diag.mean_outstanding},
        {"growth_rate", diag.growth_rate},
        {"lambda_star_estimate", estimate_lambda_star(trace, cfg.lambda)},
        {"mean_pair_distance", mean_yx.mean},
        {"mean_pair_se", mean_yx.se},
        {"w_lower", bracket.lower},
        {"w_upper", bracket.upper},
        {"load_factor", load_factor(cfg.lambda, cfg.vehicles, cfg.speed, mean_yx.mean, w_mid)},
        {"lambda_star_theoretical", lambda_star(cfg.vehicles, cfg.speed, mean_yx.mean, w_mid)},
    };

    namespace fs = std::filesystem;
    const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ParseError("cannot create output directory: " + dir.string());
    write_text_file((dir / "trace.csv").string(), trace_to_csv(trace));
    write_text_file((dir / "queue.csv").string(), queue_to_csv(trace));
    write_text_file((dir / "summary.json").string(), summary.dump(2) + "\n");

    auto out = detail::make_row();
    out << "lambda_star_estimate " << summary["lambda_star_estimate"].get<double>() << "\n";
    out << "load_factor " << summary["load_factor"].get<double>() << "\n";
    std::cout << out.str();
    return kExitOk;
}

// experiment ----------------------------------------------------------------------

struct ExperimentSpec {
    std::string preset;
    std::vector<int> sizes;
    int trials = 0;  // 0: preset default
    std::uint64_t seed = 0;
    std::string case_name;  // empty: preset default
    std::string out_path;   // empty: <preset>.csv
    double horizon = 5000.0;

    void validate() const {
        if (!sizes.empty()) {
            if (sizes.front() < 1) throw ParseError("sizes must be >= 1");
            for (std::size_t k = 1; k < sizes.size(); ++k)
                if (sizes[k] <= sizes[k - 1]) throw ParseError("sizes must be ascending");
        }
        if (trials < 0) throw ParseError("trials must be >= 1");
    }
};

namespace detail {

// One stream per (trial, n): trials are independent; sizes draw from
// non-overlapping substreams of the trial stream.
inline RngStream trial_stream(std::uint64_t seed, int trial, int n) {
    RngStream root(seed, static_cast<std::uint64_t>(trial));
    return root.substream(static_cast<std::uint64_t>(n));
}

inline void run_fig4(const ExperimentSpec& spec, const CasePair& pair, std::ostringstream& csv) {
    csv << "preset,case,n,trial,seed,L_splice,L_exact,L_lower,ratio\n";
    const std::size_t exact_cap = 12;
    for (int n : spec.sizes) {
        for (int trial = 0; trial < spec.trials; ++trial) {
            RngStream rng = trial_stream(spec.seed, trial, n);
            const Instance inst =
                instance_from_samples(pair.pickup, pair.delivery, static_cast<std::size_t>(n), rng);
            const Tour s = splice(inst);
            const double lower = scp_lower_bound(inst);
            csv << spec.preset << ',' << spec.case_name << ',' << n << ',' << trial << ','
                << spec.seed << ',' << s.total_length << ',';
            if (static_cast<std::size_t>(n) <= exact_cap) {
                const Tour e = exact_scp(inst);
                csv << e.total_length << ',' << lower << ',' << s.total_length / e.total_length;
            } else {
                csv << ',' << lower << ',' << s.total_length / lower;
            }
            csv << '\n';
        }
    }
}

inline void run_fig5(const ExperimentSpec& spec, const CasePair& pair, std::ostringstream& csv) {
    csv << "preset,case,n,trial,seed,t_splice,t_exact,runtime_ratio\n";
    for (int n : spec.sizes) {
        for (int trial = 0; trial < spec.trials; ++trial) {
            RngStream rng = trial_stream(spec.seed, trial, n);
            const Instance inst =
                instance_from_samples(pair.pickup, pair.delivery, static_cast<std::size_t>(n), rng);
            auto t0 = std::chrono::steady_clock::now();
            (void)splice(inst);
            const double t_splice = seconds_since(t0);
            t0 = std::chrono::steady_clock::now();
            (void)exact_scp(inst);
            const double t_exact = seconds_since(t0);
            csv << spec.preset << ',' << spec.case_name << ',' << n << ',' << trial << ','
                << spec.seed << ',' << t_splice << ',' << t_exact << ','
                << t_splice / std::max(t_exact, 1e-12) << '\n';
        }
    }
}

inline void run_fig6(const ExperimentSpec& spec, const CasePair& pair, std::ostringstream& csv) {
    csv << "preset,case,n,trial,seed,t_splice,L_splice\n";
    for (int n : spec.sizes) {
        for (int trial = 0; trial < spec.trials; ++trial) {
            RngStream rng = trial_stream(spec.seed, trial, n);
            const Instance inst =
                instance_from_samples(pair.pickup, pair.delivery, static_cast<std::size_t>(n), rng);
            const auto t0 = std::chrono::steady_clock::now();
            const Tour s = splice(inst);
            csv << spec.preset << ',' << spec.case_name << ',' << n << ',' << trial << ','
                << spec.seed << ',' << seconds_since(t0) << ',' << s.total_length << '\n';
        }
    }
}

inline void run_fig7(const ExperimentSpec& spec, const CasePair& pair, std::ostringstream& csv) {
    // Matching-length scaling: emit the residual under both readings of the
    // normalization, (L_M - n W)/n^{2/3} and (L_M - W)/n^{2/3}.
    const WassersteinBracket bracket = wasserstein_bracket(pair.pickup, pair.delivery, 8);
    const double w_mid = 0.5 * (bracket.lower + bracket.upper);
    csv << "preset,case,n,trial,seed,L_M,L_M_over_n,w_lower,w_upper,residual_per_demand,"
           "residual_plain\n";
    for (int n : spec.sizes) {
        for (int trial = 0; trial < spec.trials; ++trial) {
            RngStream rng = trial_stream(spec.seed, trial, n);
            const Instance inst =
                instance_from_samples(pair.pickup, pair.delivery, static_cast<std::size_t>(n), rng);
            const Matching m = hungarian_match(inst);
            const double nn = static_cast<double>(n);
            const double scale = std::pow(nn, 2.0 / 3.0);
            csv << spec.preset << ',' << spec.case_name << ',' << n << ',' << trial << ','
                << spec.seed << ',' << m.total_cost << ',' << m.total_cost / nn << ','
                << bracket.lower << ',' << bracket.upper << ','
                << (m.total_cost - nn * w_mid) / scale << ',' << (m.total_cost - w_mid) / scale
                << '\n';
        }
    }
}

inline void run_table1(const ExperimentSpec& spec, const std::vector<std::string>& cases,
                       std::ostringstream& csv) {
    csv << "preset,case,seed,r,w_lower,w_upper,kappa_pickup,kappa_delivery,kappa,kappa_tilde\n";
    const int r = 8;
    for (const std::string& c : cases) {
        const CasePair pair = densities_for(c);
        const WassersteinBracket bracket = wasserstein_bracket(pair.pickup, pair.delivery, r);
        const KappaPair kp = kappa_pair(pair.pickup, pair.delivery);
        csv << spec.preset << ',' << c << ',' << spec.seed << ',' << r << ',' << bracket.lower
            << ',' << bracket.upper << ',' << kp.kappa_pickup << ',' << kp.kappa_delivery << ','
            << kp.kappa << ',' << kp.kappa_tilde << '\n';
    }
}

inline void run_table2(const ExperimentSpec& spec, const std::vector<std::string>& cases,
                       std::ostringstream& csv) {
    csv << "preset,case,seed,mean_pair_distance,mean_pair_se,w_lower,w_upper,"
           "lambda_star_theoretical,lambda,horizon,lambda_star_estimate\n";
    for (const std::string& c : cases) {
        const CasePair pair = densities_for(c);
        RngStream stat_rng(spec.seed, 9001);
        const MeanEstimate mean_yx = mean_pair_distance(pair.pickup, pair.delivery, 200000, stat_rng);
        const WassersteinBracket bracket = wasserstein_bracket(pair.pickup, pair.delivery, 8);
        const double w_mid = 0.5 * (bracket.lower + bracket.upper);
        DpdpConfig cfg;
        cfg.lambda = 1.0;
        cfg.vehicles = 1;
        cfg.speed = 1.0;
        cfg.policy = Policy::nearest_neighbor;
        cfg.horizon = spec.horizon;
        cfg.seed = spec.seed;
        cfg.phiP = pair.pickup;
        cfg.phiD = pair.delivery;
        const SimTrace trace = simulate(cfg);
        csv << spec.preset << ',' << c << ',' << spec.seed << ',' << mean_yx.mean << ','
            << mean_yx.se << ',' << bracket.lower << ',' << bracket.upper << ','
            << lambda_star(cfg.vehicles, cfg.speed, mean_yx.mean, w_mid) << ',' << cfg.lambda << ','
            << cfg.horizon << ',' << estimate_lambda_star(trace, cfg.lambda) << '\n';
    }
}

}  // namespace detail

inline int cmd_experiment(ExperimentSpec spec) {
    static const std::vector<std::string> known = {"fig4", "fig5",   "fig6",
                                                   "fig7", "table1", "table2"};
    if (std::find(known.begin(), known.end(), spec.preset) == known.end())
        throw PresetError("unknown preset: " + spec.preset);
    spec.validate();

    // Preset defaults.
    if (spec.sizes.empty()) {
        if (spec.preset == "fig4" || spec.preset == "fig5")
            spec.sizes = {4, 5, 6, 7, 8, 9, 10, 11, 12};
        else if (spec.preset == "fig6")
            spec.sizes = {10, 25, 50, 100, 200};
        else if (spec.preset == "fig7")
            spec.sizes = {10, 32, 100, 316, 1000};
    }
    if (spec.trials == 0) spec.trials = spec.preset == "fig7" ? 10 : 25;
    if (spec.out_path.empty()) spec.out_path = spec.preset + ".csv";

    auto csv = detail::make_row();
    if (spec.preset == "table1" || spec.preset == "table2") {
        std::vector<std::string> cases;
        if (spec.case_name.empty())
            cases = {"case1", "case2"};
        else
            cases = {spec.case_name};
        if (spec.preset == "table1")
            detail::run_table1(spec, cases, csv);
        else
            detail::run_table2(spec, cases, csv);
    } else {
        if (spec.case_name.empty())
            spec.case_name = spec.preset == "fig7" ? "case1" : "uniform-cube";
        const CasePair pair = detail::densities_for(spec.case_name);
        if (spec.preset == "fig4")
            detail::run_fig4(spec, pair, csv);
        else if (spec.preset == "fig5")
            detail::run_fig5(spec, pair, csv);
        else if (spec.preset == "fig6")
            detail::run_fig6(spec, pair, csv);
        else
            detail::run_fig7(spec, pair, csv);
    }
    write_text_file(spec.out_path, csv.str());
    std::cout << "wrote " << spec.out_path << "\n";
    return kExitOk;
}

// entry point -----------------------------------------------------------------

inline int run(int argc, const char* const* argv) {
    CLI::App app{"Stacker-crane and dynamic pickup-delivery toolkit"};
    app.require_subcommand(1);

    // solve
    std::string in_path, out_path, algorithm = "splice";
    auto* solve_cmd = app.add_subcommand("solve", "Solve a static instance");
    solve_cmd->add_option("input", in_path, "instance JSON file")->required();
    solve_cmd->add_option("--algorithm", algorithm, "splice | exact")
        ->check(CLI::IsMember({"splice", "exact"}));
    solve_cmd->add_option("--out", out_path, "tour JSON output path");

    // match
    std::string match_in, pairs_csv;
    auto* match_cmd = app.add_subcommand("match", "Optimal delivery-to-pickup matching");
    match_cmd->add_option("input", match_in, "instance JSON file")->required();
    match_cmd->add_option("--pairs-csv", pairs_csv, "write matched pairs CSV");

    // wasserstein
    std::string w_case, w_pair, w_pickup, w_delivery, plan_out;
    int w_r = 8;
    auto* w_cmd = app.add_subcommand("wasserstein", "Grid bracket of the Wasserstein distance");
    w_cmd->add_option("--case", w_case, "case1 | case2 | uniform-cube");
    w_cmd->add_option("--densities", w_pair, "density pair JSON (pickup + delivery)");
    w_cmd->add_option("--pickup-density", w_pickup, "pickup density JSON");
    w_cmd->add_option("--delivery-density", w_delivery, "delivery density JSON");
    w_cmd->add_option("--r", w_r, "grid resolution (cells per shortest side)");
    w_cmd->add_option("--plan-out", plan_out, "write pessimistic plan CSV");

    // kappa
    std::string k_case, k_pair, k_pickup, k_delivery;
    int quad_res = 160;
    auto* k_cmd = app.add_subcommand("kappa", "Matching-scaling constants");
    k_cmd->add_option("--case", k_case, "case1 | case2 | uniform-cube");
    k_cmd->add_option("--densities", k_pair, "density pair JSON (pickup + delivery)");
    k_cmd->add_option("--pickup-density", k_pickup, "pickup density JSON");
    k_cmd->add_option("--delivery-density", k_delivery, "delivery density JSON");
    k_cmd->add_option("--quad-res", quad_res, "quadrature resolution per axis");

    // simulate
    std::string sim_config, sim_out = ".";
    int bracket_r = 4;
    std::size_t mean_samples = 200000;
    auto* sim_cmd = app.add_subcommand("simulate", "Run the dynamic simulator");
    sim_cmd->add_option("--config", sim_config, "simulation config JSON")->required();
    sim_cmd->add_option("--out", sim_out, "output directory");
    sim_cmd->add_option("--bracket-r", bracket_r, "grid resolution for the summary W bracket");
    sim_cmd->add_option("--mean-samples", mean_samples, "samples for the summary E||Y-X||");

    // experiment
    ExperimentSpec spec;
    auto* exp_cmd = app.add_subcommand("experiment", "Preset experiment sweeps");
    exp_cmd->add_option("--preset", spec.preset, "fig4|fig5|fig6|fig7|table1|table2")->required();
    exp_cmd->add_option("--sizes", spec.sizes, "instance sizes (comma list)")->delimiter(',');
    exp_cmd->add_option("--trials", spec.trials, "trials per size");
    exp_cmd->add_option("--seed", spec.seed, "master seed");
    exp_cmd->add_option("--case", spec.case_name, "case1 | case2 | uniform-cube");
    exp_cmd->add_option("--out", spec.out_path, "output CSV path");
    exp_cmd->add_option("--horizon", spec.horizon, "simulation horizon (table2)");

    try {
        app.parse(argc, argv);
        if (solve_cmd->parsed()) return cmd_solve(in_path, algorithm, out_path);
        if (match_cmd->parsed()) return cmd_match(match_in, pairs_csv);
        if (w_cmd->parsed())
            return cmd_wasserstein(w_case, w_pair, w_pickup, w_delivery, w_r, plan_out);
        if (k_cmd->parsed()) return cmd_kappa(k_case, k_pair, k_pickup, k_delivery, quad_res);
        if (sim_cmd->parsed()) return cmd_simulate(sim_config, sim_out, bracket_r, mean_samples);
        if (exp_cmd->parsed()) return cmd_experiment(spec);
        std::cerr << "error: no subcommand\n";
        return kExitParse;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitParse;
    } catch (const PresetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPreset;
    } catch (const SizeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSize;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }
}

inline int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cli
}  // namespace escp
