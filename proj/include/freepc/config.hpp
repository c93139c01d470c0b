#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "frf.hpp"
#include "lti.hpp"
#include "ocp.hpp"
#include "signals.hpp"
#include "simloop.hpp"

// JSON run configuration. Every object rejects keys it does not know so typos fail loudly.
namespace freepc::config {

using Json = nlohmann::json;

struct RunConfig {
    lti::SisoTransferFunction plant{{0.0}, {1.0}};
    lti::SisoTransferFunction controller{{0.0}, {1.0}};

    std::vector<std::size_t> bins;
    std::size_t              period_length   = 0;
    std::size_t              periods         = 2;
    double                   amplitude       = 1.0;
    std::uint64_t            phase_seed      = 0;
    double                   experiment_noise = 0.0;
    std::size_t              discard_periods = 0;

    ocp::OcpConfig ocp;

    std::size_t         sim_length = 50;
    std::vector<double> warmup;  // open-loop input samples before control starts
    std::vector<double> x0;
    double              loop_noise = 0.0;

    std::vector<std::size_t> mc_periods;
    std::size_t              mc_runs           = 2;
    std::size_t              mc_workers        = 1;
    bool                     regenerate_phases = false;

    std::uint64_t seed    = 0;
    std::string   out_dir = ".";
};

namespace detail {

inline void only_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
        throw InvalidInput("config: '" + where + "' must be an object");
    }
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items()) {
        if (!ok.count(k)) {
            throw InvalidInput("config: unknown key '" + where + "." + k + "'");
        }
    }
}

template <class T>
void get(const Json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput(std::string("config: bad value for '") + key + "': " + e.what());
        }
    }
}

inline RealMatrix square(const Json& j, const char* key) {
    std::vector<std::vector<double>> rows;
    get(j, key, rows);
    const auto n = static_cast<Eigen::Index>(rows.size());
    RealMatrix m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != n) {
            throw InvalidInput(std::string("config: '") + key + "' must be a square matrix");
        }
        for (Eigen::Index c = 0; c < n; ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    return m;
}

inline std::vector<ocp::Box> boxes(const Json& j, const char* key) {
    std::vector<std::vector<double>> raw;
    get(j, key, raw);
    std::vector<ocp::Box> out;
    for (const auto& b : raw) {
        if (b.size() != 2) {
            throw InvalidInput(std::string("config: each '") + key + "' entry must be [lo, hi]");
        }
        out.push_back({b[0], b[1]});
    }
    return out;
}

inline lti::SisoTransferFunction transfer_function(const Json& j, const std::string& where) {
    only_keys(j, where, {"num", "den"});
    if (!j.contains("num") || !j.contains("den")) {
        throw InvalidInput("config: '" + where + "' needs num and den");
    }
    std::vector<double> num, den;
    get(j, "num", num);
    get(j, "den", den);
    return {num, den};
}

}  // namespace detail

inline RunConfig from_json(const Json& j) {
    using detail::get;
    detail::only_keys(j, "", {"plant", "controller", "excitation", "experiment", "ocp", "loop", "montecarlo", "seed",
                              "out_dir"});
    RunConfig c;
    if (!j.contains("plant") || !j.contains("controller") || !j.contains("excitation")) {
        throw InvalidInput("config: plant, controller and excitation are required");
    }
    c.plant      = detail::transfer_function(j.at("plant"), "plant");
    c.controller = detail::transfer_function(j.at("controller"), "controller");

    const auto& ex = j.at("excitation");
    detail::only_keys(ex, "excitation", {"bins", "period_length", "periods", "amplitude", "phase_seed"});
    get(ex, "bins", c.bins);
    get(ex, "period_length", c.period_length);
    get(ex, "periods", c.periods);
    get(ex, "amplitude", c.amplitude);
    get(ex, "phase_seed", c.phase_seed);

    if (j.contains("experiment")) {
        const auto& e = j.at("experiment");
        detail::only_keys(e, "experiment", {"noise_std", "discard_periods"});
        get(e, "noise_std", c.experiment_noise);
        get(e, "discard_periods", c.discard_periods);
    }
    if (j.contains("ocp")) {
        const auto& o = j.at("ocp");
        detail::only_keys(o, "ocp", {"T", "T_bar", "Q", "R", "lambda_g", "lambda_sigma", "u_box", "y_box", "nominal"});
        get(o, "T", c.ocp.T);
        get(o, "T_bar", c.ocp.T_bar);
        if (o.contains("Q")) c.ocp.Q = detail::square(o, "Q");
        if (o.contains("R")) c.ocp.R = detail::square(o, "R");
        get(o, "lambda_g", c.ocp.lambda_g);
        get(o, "lambda_sigma", c.ocp.lambda_sigma);
        c.ocp.u_box = detail::boxes(o, "u_box");
        c.ocp.y_box = detail::boxes(o, "y_box");
        get(o, "nominal", c.ocp.nominal);
    }
    if (j.contains("loop")) {
        const auto& l = j.at("loop");
        detail::only_keys(l, "loop", {"sim_length", "warmup", "x0", "noise_std"});
        get(l, "sim_length", c.sim_length);
        get(l, "warmup", c.warmup);
        get(l, "x0", c.x0);
        get(l, "noise_std", c.loop_noise);
    }
    if (j.contains("montecarlo")) {
        const auto& m = j.at("montecarlo");
        detail::only_keys(m, "montecarlo", {"periods", "runs", "workers", "regenerate_phases"});
        get(m, "periods", c.mc_periods);
        get(m, "runs", c.mc_runs);
        get(m, "workers", c.mc_workers);
        get(m, "regenerate_phases", c.regenerate_phases);
    }
    get(j, "seed", c.seed);
    get(j, "out_dir", c.out_dir);

    // Surface module invariants at load time rather than mid-run.
    if (c.warmup.empty()) c.warmup.assign(c.ocp.T_bar, 0.0);
    ocp::validate(c.ocp, 1, 1);
    signals::validate(
        signals::MultisineSpec::on_grid(c.bins, c.period_length, c.periods, c.amplitude, c.phase_seed));
    if (c.warmup.size() < c.ocp.T_bar) {
        throw InvalidInput("config: loop.warmup needs at least T_bar samples");
    }
    if (!c.x0.empty() && c.x0.size() != c.plant.den().size() - 1) {
        throw InvalidInput("config: loop.x0 must have one entry per plant state");
    }
    if (!(c.experiment_noise >= 0.0) || !(c.loop_noise >= 0.0)) {
        throw InvalidInput("config: noise levels must be >= 0");
    }
    return c;
}

inline RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot open config '" + path + "'");
    }
    try {
        return from_json(Json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput("config '" + path + "': " + e.what());
    }
}

inline frf::ClosedLoopExperiment experiment(const RunConfig& c) {
    frf::ClosedLoopExperiment e;
    e.plant           = lti::tf_to_ss(c.plant);
    e.controller      = lti::tf_to_ss(c.controller);
    e.excitation      = signals::MultisineSpec::on_grid(c.bins, c.period_length, c.periods, c.amplitude, c.phase_seed);
    e.noise_std       = c.experiment_noise;
    e.discard_periods = c.discard_periods;
    e.rng_seed        = c.seed;
    return e;
}

inline simloop::LoopSettings loop(const RunConfig& c) {
    simloop::LoopSettings s;
    s.ocp        = c.ocp;
    s.sim_length = c.sim_length;
    s.warmup     = TimeSeries::scalar(c.warmup, "u0");
    if (!c.x0.empty()) s.x0 = Eigen::Map<const RealVector>(c.x0.data(), static_cast<Eigen::Index>(c.x0.size()));
    s.noise_std = c.loop_noise;
    s.rng_seed  = c.seed;
    return s;
}

inline simloop::MonteCarloConfig monte_carlo(const RunConfig& c) {
    simloop::MonteCarloConfig m;
    m.experiment        = experiment(c);
    m.loop              = loop(c);
    m.periods_list      = c.mc_periods;
    m.runs              = c.mc_runs;
    m.seed              = c.seed;
    m.workers           = c.mc_workers;
    m.regenerate_phases = c.regenerate_phases;
    return m;
}

}  // namespace freepc::config
