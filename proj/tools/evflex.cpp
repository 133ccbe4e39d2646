// evflex: exact recourse, policies and SDDP benchmarks for EV fleets.
//
// Exit codes: 0 success, 1 usage error, 2 data / infeasibility / solver error.
// Primary results go to stdout, diagnostics to stderr.

#include "evflex/aggregate.hpp"
#include "evflex/io.hpp"
#include "evflex/pricing.hpp"
#include "evflex/recourse.hpp"
#include "evflex/sddp.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace evflex;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

io::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path);
    try {
        return io::json::parse(in);
    } catch (const io::json::exception& e) {
        throw Error(ErrorKind::ParseError, path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
    out << text;
}

std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string tok;
    try {
        while (std::getline(ss, tok, ':')) parts.push_back(io::parse_double(tok, 0));
    } catch (const Error&) {
        throw UsageError("malformed --grid '" + spec + "', expected min:max:step");
    }
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[0] > parts[1])
        throw UsageError("malformed --grid '" + spec + "', expected min:max:step with step > 0 and min <= max");
    const double lo = parts[0], hi = parts[1], step = parts[2];
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (n > 10'000'000) throw UsageError("--grid has too many points");
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) grid[i] = lo + static_cast<double>(i) * step;
    return grid;
}

struct Inputs {
    std::string fleet;
    std::string dist;
};

void add_inputs(CLI::App* cmd, Inputs& in) {
    cmd->add_option("--fleet", in.fleet, "fleet JSON")->required();
    cmd->add_option("--dist", in.dist, "price distribution JSON")->required();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact recourse and SDDP benchmarks for EV fleets under a single imbalance price"};
    app.require_subcommand(1);

    std::string csv_in, json_out;
    int periods = 48;
    auto* ingest = app.add_subcommand("ingest-prices", "build per-period empirical price distributions from CSV");
    ingest->add_option("--input", csv_in, "price CSV (date,period,price)")->required();
    ingest->add_option("--periods", periods, "settlement periods per day")->required();
    ingest->add_option("--output", json_out, "distribution JSON")->required();

    Inputs solve_in;
    std::string weights_out, pwa_out;
    bool all_stages = false;
    auto* solve_cmd = app.add_subcommand("solve", "exact weights, recourse pieces and expected cost");
    add_inputs(solve_cmd, solve_in);
    solve_cmd->add_option("--weights", weights_out, "weights JSON output");
    solve_cmd->add_option("--pwa", pwa_out, "piecewise-affine recourse CSV output");
    solve_cmd->add_flag("--all-stages", all_stages, "emit pieces for every non-terminal stage");

    Inputs pr_in;
    std::string grid_spec, pr_out;
    auto* pr_cmd = app.add_subcommand("price-response", "first-stage optimal aggregate power over a price grid");
    add_inputs(pr_cmd, pr_in);
    pr_cmd->add_option("--grid", grid_spec, "min:max:step")->required();
    pr_cmd->add_option("--output", pr_out, "CSV output")->required();

    Inputs sddp_in;
    std::size_t iterations = 10, samples = 100, sim_paths = 100;
    std::uint64_t seed = 0;
    std::string trace_out;
    auto* sddp_cmd = app.add_subcommand("sddp", "device-level SDDP baseline");
    add_inputs(sddp_cmd, sddp_in);
    sddp_cmd->add_option("--iterations", iterations, "SDDP iterations")->required();
    sddp_cmd->add_option("--samples", samples, "max backward-pass atoms per stage");
    sddp_cmd->add_option("--seed", seed, "random seed");
    sddp_cmd->add_option("--sim-paths", sim_paths, "policy-evaluation paths per iteration");
    sddp_cmd->add_option("--trace", trace_out, "trace CSV output")->required();

    Inputs cmp_in;
    std::string cmp_out;
    auto* cmp_cmd = app.add_subcommand("compare", "normalized cost versus time, exact vs SDDP");
    add_inputs(cmp_cmd, cmp_in);
    cmp_cmd->add_option("--iterations", iterations, "SDDP iterations")->required();
    cmp_cmd->add_option("--samples", samples, "max backward-pass atoms per stage");
    cmp_cmd->add_option("--seed", seed, "random seed");
    cmp_cmd->add_option("--sim-paths", sim_paths, "policy-evaluation paths per iteration");
    cmp_cmd->add_option("--output", cmp_out, "CSV output")->required();

    Inputs sim_in;
    std::size_t paths = 1000;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo cost of the exact policy");
    add_inputs(sim_cmd, sim_in);
    sim_cmd->add_option("--paths", paths, "number of price paths")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest) {
            std::ifstream in(csv_in);
            if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + csv_in);
            const PriceModel model = from_records(io::read_price_csv(in), periods);
            write_text(json_out, io::to_json(model).dump() + "\n");
            std::cerr << "wrote " << model.horizon() << " stages to " << json_out << "\n";
        } else if (*solve_cmd) {
            const FleetState fleet = io::fleet_from_json(read_json(solve_in.fleet));
            const PriceModel model = io::price_model_from_json(read_json(solve_in.dist));
            const SolveResult r = solve(fleet, model);
            if (!weights_out.empty()) write_text(weights_out, io::to_json(r.weights).dump() + "\n");
            if (!pwa_out.empty()) {
                std::ostringstream csv;
                io::write_pwa_header(csv);
                Generator g = aggregate_generator(fleet);
                const std::size_t last = all_stages ? model.horizon() - 1 : std::min<std::size_t>(1, model.horizon() - 1);
                for (std::size_t t = 0; t < last; ++t) {
                    io::write_pwa_rows(csv, t + 1, pwa(r.weights, t, g));
                    // later stages are reported along the mean-price trajectory
                    g = transition(g, optimal_action(r.weights, t, g, model.stages[t].mean()).u);
                }
                write_text(pwa_out, csv.str());
            }
            std::cout << io::format_double(r.expected_cost) << "\n";
        } else if (*pr_cmd) {
            const auto grid = parse_grid(grid_spec);
            const FleetState fleet = io::fleet_from_json(read_json(pr_in.fleet));
            const PriceModel model = io::price_model_from_json(read_json(pr_in.dist));
            std::ostringstream csv;
            io::write_price_response_csv(csv, price_response(fleet, model, grid));
            write_text(pr_out, csv.str());
        } else if (*sddp_cmd) {
            const FleetState fleet = io::fleet_from_json(read_json(sddp_in.fleet));
            const PriceModel model = io::price_model_from_json(read_json(sddp_in.dist));
            const SddpResult r = run_sddp(fleet, model, {iterations, samples, seed, sim_paths});
            std::ostringstream csv;
            io::write_trace_csv(csv, r.trace);
            write_text(trace_out, csv.str());
        } else if (*cmp_cmd) {
            const FleetState fleet = io::fleet_from_json(read_json(cmp_in.fleet));
            const PriceModel model = io::price_model_from_json(read_json(cmp_in.dist));
            const auto start = std::chrono::steady_clock::now();
            const SolveResult exact = solve(fleet, model);
            const double exact_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (exact.expected_cost == 0.0) throw Error(ErrorKind::InvalidInput, "exact cost is zero; cannot normalize");
            const SddpResult r = run_sddp(fleet, model, {iterations, samples, seed, std::max<std::size_t>(sim_paths, 1)});
            std::ostringstream csv;
            csv << "method,seconds,normalized_cost\n";
            csv << "exact," << io::format_double(exact_seconds) << ",1\n";
            for (const auto& row : r.trace)
                csv << "sddp," << io::format_double(row.seconds) << ','
                    << io::format_double(row.simulated_cost / exact.expected_cost) << '\n';
            write_text(cmp_out, csv.str());
        } else if (*sim_cmd) {
            const FleetState fleet = io::fleet_from_json(read_json(sim_in.fleet));
            const PriceModel model = io::price_model_from_json(read_json(sim_in.dist));
            const SimulationResult r = simulate(fleet, model, paths, seed);
            std::cout << io::format_double(r.mean) << ',' << io::format_double(r.std_error) << "\n";
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
