#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "escp/density.hpp"
#include "escp/dpdp.hpp"
#include "escp/error.hpp"
#include "escp/geometry.hpp"
#include "escp/instance.hpp"
#include "escp/scp.hpp"

namespace escp {

using nlohmann::json;

// File helpers ---------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write file: " + path);
    out << text;
    if (!out) throw ParseError("write failed: " + path);
}

inline json parse_json_text(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError(what + ": malformed JSON");
    return j;
}

// Points and boxes -----------------------------------------------------------

namespace detail {

inline json coords_to_json(const Point& p) {
    json a = json::array();
    for (int k = 0; k < p.dim; ++k) a.push_back(p.c[k]);
    return a;
}

inline Point coords_from_json(const json& j, int dim, const std::string& where) {
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
        throw ParseError(where + ": expected " + std::to_string(dim) + " coordinates");
    Point p = Point::of_dim(dim);
    for (int k = 0; k < dim; ++k) {
        if (!j[static_cast<std::size_t>(k)].is_number())
            throw ParseError(where + ": coordinate must be a number");
        p.c[k] = j[static_cast<std::size_t>(k)].get<double>();
    }
    return p;
}

inline json env_to_json(const Box& b) {
    json lo = json::array(), hi = json::array();
    for (int k = 0; k < b.dim; ++k) {
        lo.push_back(b.lo[k]);
        hi.push_back(b.hi[k]);
    }
    return json{{"lo", lo}, {"hi", hi}};
}

inline Box env_from_json(const json& j, int dim, const std::string& where) {
    if (!j.is_object() || !j.contains("lo") || !j.contains("hi"))
        throw ParseError(where + ": env must carry lo and hi");
    const Point lo = coords_from_json(j.at("lo"), dim, where + ".lo");
    const Point hi = coords_from_json(j.at("hi"), dim, where + ".hi");
    return Box(lo.c, hi.c, dim);
}

inline int dimension_from_json(const json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("dimension") || !j.at("dimension").is_number_integer())
        throw ParseError(what + ": integer field 'dimension' required");
    const int dim = j.at("dimension").get<int>();
    check_dim(dim, what.c_str());
    return dim;
}

}  // namespace detail

// Instance -------------------------------------------------------------------

inline json instance_to_json(const Instance& inst) {
    json demands = json::array();
    for (const Demand& d : inst.demands)
        demands.push_back(json{{"pickup", detail::coords_to_json(d.pickup)},
                               {"delivery", detail::coords_to_json(d.delivery)}});
    return json{{"dimension", inst.dimension},
                {"env", detail::env_to_json(inst.env)},
                {"demands", demands}};
}

inline Instance instance_from_json(const json& j) {
    const int dim = detail::dimension_from_json(j, "Instance");
    if (!j.contains("env")) throw ParseError("Instance: field 'env' required");
    const Box env = detail::env_from_json(j.at("env"), dim, "Instance.env");
    if (!j.contains("demands") || !j.at("demands").is_array())
        throw ParseError("Instance: array field 'demands' required");
    std::vector<Demand> ds;
    ds.reserve(j.at("demands").size());
    for (std::size_t i = 0; i < j.at("demands").size(); ++i) {
        const json& dj = j.at("demands")[i];
        const std::string where = "demand " + std::to_string(i + 1);
        if (!dj.is_object() || !dj.contains("pickup") || !dj.contains("delivery"))
            throw ParseError(where + ": pickup and delivery required");
        Demand d;
        d.pickup = detail::coords_from_json(dj.at("pickup"), dim, where + ".pickup");
        d.delivery = detail::coords_from_json(dj.at("delivery"), dim, where + ".delivery");
        ds.push_back(d);
    }
    return Instance(dim, env, std::move(ds));
}

inline Instance read_instance(const std::string& path) {
    return instance_from_json(parse_json_text(read_text_file(path), "Instance"));
}

inline void write_instance(const Instance& inst, const std::string& path) {
    write_text_file(path, instance_to_json(inst).dump(2) + "\n");
}

// Tour -----------------------------------------------------------------------

inline json tour_to_json(const Tour& t) {
    json order = json::array();
    for (int i : t.order) order.push_back(i + 1);  // demand indices are 1-based on disk
    return json{{"order", order},
                {"total_length", t.total_length},
                {"pd_length", t.pd_length},
                {"matching_length", t.matching_length},
                {"connecting_length", t.connecting_length},
                {"subtour_count", t.subtour_count}};
}

inline Tour tour_from_json(const json& j) {
    Tour t;
    if (!j.is_object() || !j.contains("order") || !j.at("order").is_array())
        throw ParseError("Tour: array field 'order' required");
    for (const json& v : j.at("order")) {
        if (!v.is_number_integer()) throw ParseError("Tour: order entries must be integers");
        t.order.push_back(v.get<int>() - 1);
    }
    auto num = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_number())
            throw ParseError(std::string("Tour: numeric field '") + key + "' required");
        return j.at(key).get<double>();
    };
    t.total_length = num("total_length");
    t.pd_length = num("pd_length");
    t.matching_length = num("matching_length");
    t.connecting_length = num("connecting_length");
    t.subtour_count = static_cast<std::size_t>(num("subtour_count"));
    return t;
}

inline void write_tour(const Tour& t, const std::string& path) {
    write_text_file(path, tour_to_json(t).dump(2) + "\n");
}

inline Tour read_tour(const std::string& path) {
    return tour_from_json(parse_json_text(read_text_file(path), "Tour"));
}

// DensityModel ----------------------------------------------------------------

inline json density_to_json(const DensityModel& phi) {
    json regions = json::array();
    for (const Region& r : phi.regions) {
        if (r.shape == Region::Shape::box) {
            json lo = json::array(), hi = json::array();
            for (int k = 0; k < phi.dimension; ++k) {
                lo.push_back(r.box.lo[k]);
                hi.push_back(r.box.hi[k]);
            }
            regions.push_back(json{{"shape", "box"}, {"lo", lo}, {"hi", hi}, {"weight", r.weight}});
        } else {
            regions.push_back(json{{"shape", "ball"},
                                   {"center", detail::coords_to_json(r.center)},
                                   {"radius", r.radius},
                                   {"weight", r.weight}});
        }
    }
    return json{{"dimension", phi.dimension},
                {"env", detail::env_to_json(phi.env)},
                {"regions", regions}};
}

inline DensityModel density_from_json(const json& j) {
    const int dim = detail::dimension_from_json(j, "DensityModel");
    if (!j.contains("env")) throw ParseError("DensityModel: field 'env' required");
    const Box env = detail::env_from_json(j.at("env"), dim, "DensityModel.env");
    if (!j.contains("regions") || !j.at("regions").is_array())
        throw ParseError("DensityModel: array field 'regions' required");
    std::vector<Region> regions;
    for (std::size_t g = 0; g < j.at("regions").size(); ++g) {
        const json& rj = j.at("regions")[g];
        const std::string where = "region " + std::to_string(g + 1);
        if (!rj.is_object() || !rj.contains("shape") || !rj.at("shape").is_string())
            throw ParseError(where + ": string field 'shape' required");
        Region r;
        const std::string shape = rj.at("shape").get<std::string>();
        if (rj.contains("weight")) {
            if (!rj.at("weight").is_number()) throw ParseError(where + ": weight must be a number");
            r.weight = rj.at("weight").get<double>();
        }
        if (shape == "box") {
            r.shape = Region::Shape::box;
            if (!rj.contains("lo") || !rj.contains("hi"))
                throw ParseError(where + ": box region needs lo and hi");
            const Point lo = detail::coords_from_json(rj.at("lo"), dim, where + ".lo");
            const Point hi = detail::coords_from_json(rj.at("hi"), dim, where + ".hi");
            r.box = Box(lo.c, hi.c, dim);
        } else if (shape == "ball") {
            r.shape = Region::Shape::ball;
            if (!rj.contains("center") || !rj.contains("radius") || !rj.at("radius").is_number())
                throw ParseError(where + ": ball region needs center and radius");
            r.center = detail::coords_from_json(rj.at("center"), dim, where + ".center");
            r.radius = rj.at("radius").get<double>();
        } else {
            throw ParseError(where + ": shape must be 'box' or 'ball'");
        }
        regions.push_back(r);
    }
    return DensityModel(dim, env, std::move(regions));
}

inline DensityModel read_density(const std::string& path) {
    return density_from_json(parse_json_text(read_text_file(path), "DensityModel"));
}

inline void write_density(const DensityModel& phi, const std::string& path) {
    write_text_file(path, density_to_json(phi).dump(2) + "\n");
}

// A pickup/delivery density pair on one shared environment, the shape of the
// shipped case fixtures.
inline json density_pair_to_json(const CasePair& pair) {
    return json{{"pickup", density_to_json(pair.pickup)},
                {"delivery", density_to_json(pair.delivery)}};
}

inline CasePair density_pair_from_json(const json& j) {
    if (!j.is_object() || !j.contains("pickup") || !j.contains("delivery"))
        throw ParseError("density pair: fields 'pickup' and 'delivery' required");
    CasePair pair;
    pair.pickup = density_from_json(j.at("pickup"));
    pair.delivery = density_from_json(j.at("delivery"));
    return pair;
}

inline CasePair read_density_pair(const std::string& path) {
    return density_pair_from_json(parse_json_text(read_text_file(path), "density pair"));
}

inline void write_density_pair(const CasePair& pair, const std::string& path) {
    write_text_file(path, density_pair_to_json(pair).dump(2) + "\n");
}

// DpdpConfig -------------------------------------------------------------------

// Accepts either a named density pair ("case": "case1" | "case2") or explicit
// "phiP"/"phiD" density objects.
inline DpdpConfig dpdp_config_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("DpdpConfig: object expected");
    DpdpConfig cfg;
    auto num = [&](const char* key, bool required, double fallback) {
        if (!j.contains(key)) {
            if (required) throw ParseError(std::string("DpdpConfig: field '") + key + "' required");
            return fallback;
        }
        if (!j.at(key).is_number())
            throw ParseError(std::string("DpdpConfig: field '") + key + "' must be a number");
        return j.at(key).get<double>();
    };
    cfg.lambda = num("lambda", true, 0.0);
    cfg.vehicles = static_cast<int>(num("m", false, 1.0));
    cfg.speed = num("v", false, 1.0);
    cfg.horizon = num("horizon", true, 0.0);
    cfg.warmup = num("warmup", false, -1.0);
    cfg.queue_sample_dt = num("queue_sample_dt", false, -1.0);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer())
            throw ParseError("DpdpConfig: field 'seed' must be an integer");
        cfg.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("policy")) {
        if (!j.at("policy").is_string())
            throw ParseError("DpdpConfig: field 'policy' must be a string");
        const std::string p = j.at("policy").get<std::string>();
        if (p == "nearest_neighbor")
            cfg.policy = Policy::nearest_neighbor;
        else if (p == "gated_splice")
            cfg.policy = Policy::gated_splice;
        else
            throw ParseError("DpdpConfig: policy must be 'nearest_neighbor' or 'gated_splice'");
    }
    if (j.contains("case")) {
        if (!j.at("case").is_string())
            throw ParseError("DpdpConfig: field 'case' must be a string");
        const std::string c = j.at("case").get<std::string>();
        CasePair pair;
        if (c == "case1")
            pair = case1();
        else if (c == "case2")
            pair = case2();
        else
            throw ParseError("DpdpConfig: case must be 'case1' or 'case2'");
        cfg.phiP = pair.pickup;
        cfg.phiD = pair.delivery;
    } else {
        if (!j.contains("phiP") || !j.contains("phiD"))
            throw ParseError("DpdpConfig: either 'case' or both 'phiP' and 'phiD' required");
        cfg.phiP = density_from_json(j.at("phiP"));
        cfg.phiD = density_from_json(j.at("phiD"));
    }
    cfg.validate();
    return cfg;
}

inline DpdpConfig read_dpdp_config(const std::string& path) {
    return dpdp_config_from_json(parse_json_text(read_text_file(path), "DpdpConfig"));
}

}  // namespace escp
