// Command-line front end: data collection, FRF estimation, closed-loop runs and Monte Carlo tables.
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <freepc/config.hpp>
#include <freepc/io.hpp>
#include <freepc/simloop.hpp>

namespace fs = std::filesystem;
using namespace freepc;

namespace {

enum Exit { kOk = 0, kVerdictFalse = 1, kUsage = 2 };

// Flags that override config keys.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string>   out_dir;
    std::optional<std::size_t>   periods;
    std::optional<std::size_t>   runs;
    std::optional<std::size_t>   workers;
};

config::RunConfig load_config(const std::string& path, const Overrides& o) {
    auto c = config::load(path);
    if (o.seed) c.seed = *o.seed;
    if (o.out_dir) c.out_dir = *o.out_dir;
    if (o.periods) c.periods = *o.periods;
    if (o.runs) c.mc_runs = *o.runs;
    if (o.workers) c.mc_workers = *o.workers;
    return c;
}

std::string out_path(const config::RunConfig& c, const std::string& name) {
    fs::create_directories(c.out_dir);
    return (fs::path(c.out_dir) / name).string();
}

int cmd_check_pe(const std::string& file, std::size_t L, const std::string& domain) {
    signals::PeReport rep;
    if (domain == "time") {
        rep = signals::is_pe_time(io::load(file, io::read_time_series), L);
    } else {
        rep = freqdomain::is_pe_freq(io::load(file, io::read_spectrum), L);
    }
    std::cout << "rank " << rep.rank << ", required " << rep.required << ": "
              << (rep.persistently_exciting ? "persistently exciting" : "not persistently exciting") << " of order "
              << L << "\n";
    return rep.persistently_exciting ? kOk : kVerdictFalse;
}

frf::ClosedLoopExperiment seeded_experiment(const config::RunConfig& c) {
    // Same stream a Monte Carlo run 0 would use, so single runs can be cross-checked.
    auto e     = config::experiment(c);
    e.rng_seed = simloop::derive_seed(c.seed, c.periods, 0, 0);
    return e;
}

int cmd_collect(const config::RunConfig& c) {
    const auto data = frf::run_experiment(seeded_experiment(c));
    io::save(out_path(c, "d.csv"), [&](std::ostream& o) { io::write_time_series(o, data.d); });
    io::save(out_path(c, "u.csv"), [&](std::ostream& o) { io::write_time_series(o, data.u); });
    io::save(out_path(c, "y.csv"), [&](std::ostream& o) { io::write_time_series(o, data.y); });
    std::cout << "wrote " << data.d.length() << " samples (" << c.periods << " periods) of d, u, y to " << c.out_dir
              << "\n";
    return kOk;
}

int cmd_estimate_frf(const config::RunConfig& c, const std::string& data_dir) {
    auto read = [&](const char* name) { return io::load((fs::path(data_dir) / name).string(), io::read_time_series); };
    const auto spec = signals::MultisineSpec::on_grid(c.bins, c.period_length, 1, c.amplitude, c.phase_seed);
    const auto est  = frf::estimate_frf(read("d.csv"), read("u.csv"), read("y.csv"), c.period_length, spec.frequencies);
    io::save(out_path(c, "frf.csv"), [&](std::ostream& o) { io::write_frf(o, est); });
    std::cout << "periods used " << est.periods_used << ", frequencies " << est.frequencies.size()
              << ", max variance " << est.variance.maxCoeff() << ", max 99% radius "
              << est.confidence_radius_99.maxCoeff() << "\n";
    return kOk;
}

int cmd_run(const config::RunConfig& c, const std::string& scheme, const std::string& frf_file) {
    const auto            plant = lti::tf_to_ss(c.plant);
    simloop::LoopSettings loop  = config::loop(c);
    loop.rng_seed               = simloop::derive_seed(c.seed, c.periods, 0, 1);
    const std::size_t     L     = c.ocp.T + c.ocp.T_bar;

    simloop::RhcResult r;
    if (scheme == "mpc") {
        r = simloop::run_mpc_benchmark(plant, loop);
    } else if (scheme == "freepc") {
        frf::FrfEstimate est;
        if (!frf_file.empty()) {
            est = io::load(frf_file, io::read_frf);
        } else {
            const auto e = seeded_experiment(c);
            const auto d = frf::run_experiment(e);
            est = frf::estimate_frf(d.d, d.u, d.y, c.period_length, e.excitation.frequencies);
        }
        const auto eqs = freqdomain::freq_data_equations(freqdomain::frf_to_freq_data(est.frequencies, est.g_hat), L);
        r              = simloop::run_rhc(plant, {eqs, loop});
    } else {
        const auto d = frf::run_experiment(seeded_experiment(c));
        r            = simloop::run_rhc(plant, {freqdomain::hankel_data_equations(d.u, d.y, L), loop});
    }
    io::save(out_path(c, "run_" + scheme + ".csv"), [&](std::ostream& o) { io::write_rhc(o, r); });
    std::cout << scheme << " J = " << io::format_number(r.cost_J) << " over " << r.u.length() << " steps\n";
    return kOk;
}

int cmd_montecarlo(const config::RunConfig& c) {
    const auto mc = config::monte_carlo(c);
    if (mc.periods_list.empty()) {
        throw InvalidInput("montecarlo: config lists no periods");
    }
    const double bench = simloop::run_mpc_benchmark(mc.experiment.plant, mc.loop).cost_J;
    const auto   rows  = simloop::monte_carlo(mc);
    io::save(out_path(c, "montecarlo.csv"), [&](std::ostream& o) { io::write_monte_carlo(o, rows); });
    std::cout << "benchmark J " << bench << "\n";
    for (const auto& r : rows) {
        std::cout << "P " << r.periods << "  mean J " << r.mean_J << "  var J " << r.var_J << "  failures "
                  << r.failures << "/" << r.runs << "\n";
    }
    return kOk;
}

int cmd_dump_ocp(const config::RunConfig& c, const std::string& scheme) {
    const auto e = seeded_experiment(c);
    const auto d = frf::run_experiment(e);
    const auto L = c.ocp.T + c.ocp.T_bar;
    freqdomain::DataEquations eqs;
    if (scheme == "deepc") {
        eqs = freqdomain::hankel_data_equations(d.u, d.y, L);
    } else if (scheme == "freepc") {
        const auto est = frf::estimate_frf(d.d, d.u, d.y, c.period_length, e.excitation.frequencies);
        eqs            = freqdomain::freq_data_equations(freqdomain::frf_to_freq_data(est.frequencies, est.g_hat), L);
    } else {
        throw InvalidInput("dump-ocp: scheme must be deepc or freepc");
    }
    const RealVector past = RealVector::Zero(static_cast<Eigen::Index>(c.ocp.T_bar));
    const auto       f    = ocp::to_qp(ocp::build_ocp(eqs, past, past, c.ocp));
    const auto&      lay  = f.layout;
    std::cout << "scheme " << scheme << ", record " << d.u.length() << " samples\n"
              << "variables " << lay.total() << " (u " << lay.u.size << ", y " << lay.y.size << ", g " << lay.g.size
              << ", sigma " << lay.sigma.size << ", t_g " << lay.t_g.size << ", t_sigma " << lay.t_sigma.size << ")\n"
              << "equalities " << f.qp.eq_matrix.rows() << ", inequalities " << f.qp.ineq_matrix.rows() << "\n";
    return kOk;
}

int cmd_plot_data(const config::RunConfig& c, const std::string& frf_file) {
    const auto est   = io::load(frf_file, io::read_frf);
    const auto plant = lti::tf_to_ss(c.plant);
    io::save(out_path(c, "frf_plot.csv"), [&](std::ostream& o) {
        io::write_header(o, {"frequency", "mag_db", "phase_deg", "radius_99", "true_mag_db", "true_phase_deg",
                             "abs_error"});
        for (std::size_t m = 0; m < est.frequencies.size(); ++m) {
            const auto    i = static_cast<Eigen::Index>(m);
            const Complex g = lti::freq_response(plant, est.frequencies[m])(0, 0);
            io::write_row(o, {est.frequencies[m], 20.0 * std::log10(std::abs(est.g_hat(i))),
                              std::arg(est.g_hat(i)) * 180.0 / std::numbers::pi, est.confidence_radius_99(i),
                              20.0 * std::log10(std::abs(g)), std::arg(g) * 180.0 / std::numbers::pi,
                              std::abs(est.g_hat(i) - g)});
        }
    });
    std::cout << "wrote " << est.frequencies.size() << " rows to " << out_path(c, "frf_plot.csv") << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FreePC: frequency-domain data-driven predictive control"};
    app.require_subcommand(1);

    Overrides   ov;
    std::string cfg_path;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", cfg_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { ov.seed = v; },
                                                "master seed (overrides config)");
        sub->add_option_function<std::string>("--out-dir", [&](const std::string& v) { ov.out_dir = v; },
                                               "output directory (overrides config)");
        sub->add_option_function<std::size_t>("--periods", [&](const std::size_t& v) { ov.periods = v; },
                                              "excitation periods P (overrides config)");
    };

    std::string pe_file, pe_domain = "freq";
    std::size_t pe_L = 0;
    auto*       pe   = app.add_subcommand("check-pe", "rank test for persistency of excitation");
    pe->add_option("file", pe_file, "CSV: time series, or frequency + _re/_im column pairs")->required();
    pe->add_option("-L,--order", pe_L, "order L")->required()->check(CLI::PositiveNumber);
    pe->add_option("--domain", pe_domain, "time or freq")->check(CLI::IsMember({"time", "freq"}));

    auto* collect = app.add_subcommand("collect", "run the closed-loop multisine experiment, write d/u/y CSV");
    add_common(collect);

    std::string data_dir;
    auto*       est = app.add_subcommand("estimate-frf", "estimate the FRF from d/u/y CSV files");
    add_common(est);
    est->add_option("--data-dir", data_dir, "directory holding d.csv, u.csv, y.csv")->required();

    std::string scheme = "freepc", frf_file;
    auto*       run    = app.add_subcommand("run", "closed-loop receding-horizon simulation");
    add_common(run);
    run->add_option("--scheme", scheme, "deepc, freepc or mpc")->check(CLI::IsMember({"deepc", "freepc", "mpc"}));
    run->add_option("--frf", frf_file, "FRF CSV to use instead of a fresh experiment (freepc only)");

    auto* mc = app.add_subcommand("montecarlo", "FreePC cost statistics over repeated experiments");
    add_common(mc);
    mc->add_option_function<std::size_t>("--runs", [&](const std::size_t& v) { ov.runs = v; }, "runs per P");
    mc->add_option_function<std::size_t>("--workers", [&](const std::size_t& v) { ov.workers = v; }, "threads");

    std::string dump_scheme = "freepc";
    auto*       dump        = app.add_subcommand("dump-ocp", "print the QP structure for one data set");
    add_common(dump);
    dump->add_option("--scheme", dump_scheme, "deepc or freepc")->check(CLI::IsMember({"deepc", "freepc"}));

    std::string plot_frf;
    auto*       plot = app.add_subcommand("plot-data", "FRF estimate vs true plant, plot-ready CSV");
    add_common(plot);
    plot->add_option("--frf", plot_frf, "FRF CSV from estimate-frf")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (pe->parsed()) return cmd_check_pe(pe_file, pe_L, pe_domain);
        const auto c = load_config(cfg_path, ov);
        if (collect->parsed()) return cmd_collect(c);
        if (est->parsed()) return cmd_estimate_frf(c, data_dir);
        if (run->parsed()) return cmd_run(c, scheme, frf_file);
        if (mc->parsed()) return cmd_montecarlo(c);
        if (dump->parsed()) return cmd_dump_ocp(c, dump_scheme);
        if (plot->parsed()) return cmd_plot_data(c, plot_frf);
    } catch (const simloop::RhcFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kVerdictFalse;
    } catch (const SingularityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kVerdictFalse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
