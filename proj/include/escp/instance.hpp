#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "escp/error.hpp"
#include "escp/geometry.hpp"

namespace escp {

// One transportation demand: a pickup site and a delivery site.
struct Demand {
    Point pickup;
    Point delivery;
};

// A static problem instance: n demands inside a bounded environment.
struct Instance {
    int dimension = 3;
    Box env;
    std::vector<Demand> demands;

    Instance() = default;
    Instance(int dim, const Box& e, std::vector<Demand> ds)
        : dimension(dim), env(e), demands(std::move(ds)) {
        validate();
    }

    std::size_t n() const { return demands.size(); }

    void validate() const {
        check_dim(dimension, "Instance");
        if (env.dim != dimension) throw ParseError("Instance: env dimension mismatch");
        if (demands.empty()) throw ParseError("n must be >= 1");
        for (std::size_t i = 0; i < demands.size(); ++i) {
            const std::string where = "demand " + std::to_string(i + 1);
            if (demands[i].pickup.dim != dimension || demands[i].delivery.dim != dimension)
                throw ParseError(where + ": dimension mismatch");
            if (!env.contains(demands[i].pickup)) throw ParseError(where + ": pickup outside env");
            if (!env.contains(demands[i].delivery))
                throw ParseError(where + ": delivery outside env");
        }
    }

    // Sum of pickup-to-delivery distances, the length every tour pays.
    double pd_length() const {
        double s = 0.0;
        for (const Demand& d : demands) s += dist(d.pickup, d.delivery);
        return s;
    }
};

}  // namespace escp
