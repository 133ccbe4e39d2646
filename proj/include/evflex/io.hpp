#pragma once

// File formats: price CSV, fleet / distribution / weight JSON, PWA, trace and
// compare CSVs. Decimals are written in shortest round-trip form.

#include "evflex/aggregate.hpp"
#include "evflex/error.hpp"
#include "evflex/pricing.hpp"
#include "evflex/random.hpp"
#include "evflex/recourse.hpp"
#include "evflex/sddp.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace evflex::io {

using nlohmann::json;

/// Shortest decimal that reads back to the same double; "-0" prints as "0".
inline std::string format_double(double v) {
    if (v == 0.0) return "0";
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line) {
    double v = 0.0;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
    return v;
}

inline int parse_int(std::string_view s, std::size_t line) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
    return v;
}

inline bool is_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (s[i] < '0' || s[i] > '9') return false;
    const int month = (s[5] - '0') * 10 + (s[6] - '0');
    const int day = (s[8] - '0') * 10 + (s[9] - '0');
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

/// Reads `date,period,price` rows; blank lines are skipped, CRLF accepted.
inline std::vector<PriceRecord> read_price_csv(std::istream& in) {
    std::vector<PriceRecord> out;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (!header) {
            if (line != "date,period,price")
                throw Error(ErrorKind::ParseError, "line 1: expected header 'date,period,price'");
            header = true;
            continue;
        }
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
            throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": expected 3 fields");
        const std::string_view sv(line);
        PriceRecord r;
        r.date = std::string(sv.substr(0, c1));
        if (!is_iso_date(r.date))
            throw Error(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": bad date '" + r.date + "'");
        r.period = parse_int(sv.substr(c1 + 1, c2 - c1 - 1), lineno);
        r.price = parse_double(sv.substr(c2 + 1), lineno);
        out.push_back(std::move(r));
    }
    if (!header) throw Error(ErrorKind::ParseError, "line 1: missing header");
    return out;
}

inline json to_json(const PriceModel& model) {
    json stages = json::array();
    for (const auto& s : model.stages) stages.push_back({{"support", s.support()}, {"probs", s.probs()}});
    return {{"stages", stages}};
}

inline PriceModel price_model_from_json(const json& j) {
    try {
        PriceModel model;
        for (const auto& s : j.at("stages"))
            model.stages.emplace_back(s.at("support").get<std::vector<double>>(), s.at("probs").get<std::vector<double>>());
        model.validate();
        return model;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("distribution JSON: ") + e.what());
    }
}

inline json to_json(const WeightTable& table) { return {{"stages", table.stages()}}; }

inline WeightTable weights_from_json(const json& j) {
    try {
        return WeightTable(j.at("stages").get<std::vector<std::vector<double>>>());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("weights JSON: ") + e.what());
    }
}

/**
 * Fleet file: {"horizon": T, "devices": [{"id", "u_max", "demand"}...]} or
 * {"horizon": T, "sampler": {"count", "seed", "u_max_range": [a, b],
 * "demand_fraction_range": [f0, f1]}} with demand = fraction * T * u_max.
 */
inline FleetState fleet_from_json(const json& j) {
    try {
        const auto T = j.at("horizon").get<std::size_t>();
        if (T < 1) throw Error(ErrorKind::InvalidInput, "horizon must be >= 1");
        std::vector<DeviceSpec> specs;
        if (j.contains("devices")) {
            for (const auto& d : j.at("devices")) {
                DeviceSpec s;
                s.id = d.at("id").get<std::string>();
                s.u_max = d.at("u_max").get<double>();
                s.initial_demand = d.at("demand").get<double>();
                specs.push_back(std::move(s));
            }
        } else {
            const auto& s = j.at("sampler");
            const auto count = s.at("count").get<std::size_t>();
            const auto ur = s.at("u_max_range").get<std::vector<double>>();
            const auto fr = s.at("demand_fraction_range").get<std::vector<double>>();
            if (ur.size() != 2 || fr.size() != 2 || !(ur[0] > 0.0) || ur[0] > ur[1] || fr[0] < 0.0 || fr[0] > fr[1] ||
                fr[1] > 1.0)
                throw Error(ErrorKind::InvalidInput, "sampler ranges must satisfy 0 < u_lo <= u_hi, 0 <= f_lo <= f_hi <= 1");
            Rng rng(s.at("seed").get<std::uint64_t>());
            specs.reserve(count);
            for (std::size_t l = 0; l < count; ++l) {
                DeviceSpec d;
                d.id = "ev" + std::to_string(l);
                d.u_max = rng.uniform(ur[0], ur[1]);
                d.initial_demand = rng.uniform(fr[0], fr[1]) * static_cast<double>(T) * d.u_max;
                specs.push_back(std::move(d));
            }
        }
        return FleetState(std::move(specs), T);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("fleet JSON: ") + e.what());
    }
}

inline void write_pwa_header(std::ostream& out) { out << "stage,piece,lo,hi,slope,intercept\n"; }

/// Rows for one stage; `stage` and pieces are written 1-based.
inline void write_pwa_rows(std::ostream& out, std::size_t stage, const PiecewiseAffine& f) {
    for (std::size_t k = 0; k < f.pieces(); ++k)
        out << stage << ',' << (k + 1) << ',' << format_double(f.breakpoints()[k]) << ','
            << format_double(f.breakpoints()[k + 1]) << ',' << format_double(f.slopes()[k]) << ','
            << format_double(f.intercepts()[k]) << '\n';
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
    out << "iteration,seconds,lower_bound,simulated_cost\n";
    for (const auto& r : trace)
        out << r.iteration << ',' << format_double(r.seconds) << ',' << format_double(r.lower_bound) << ','
            << format_double(r.simulated_cost) << '\n';
}

inline void write_price_response_csv(std::ostream& out, const std::vector<PricePoint>& curve) {
    out << "price,aggregate_power\n";
    for (const auto& p : curve) out << format_double(p.price) << ',' << format_double(p.power) << '\n';
}

}  // namespace evflex::io
