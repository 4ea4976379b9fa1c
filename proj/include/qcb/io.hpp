#pragma once

// CSV / JSON serialization: pulse import/export, trajectory tables, and
// shared formatting helpers.  All outputs are deterministic except the
// optional "# generated:" timestamp comment in CSV headers.

#include "qcb/lindblad.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace qcb::io {

using ordered_json = nlohmann::ordered_json;

inline const char* kSchemaVersion = "1";

// shortest-round-trip-ish fixed formatting; %.17g is reproducible across runs
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string timestamp_utc() {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

// --- pulse CSV -------------------------------------------------------------
// columns: segment,t_start,u_1..u_K; dt and eta carried in comment lines so a
// round trip is lossless even for single-segment pulses.

inline std::string pulse_csv(const ControlPulse& pulse, bool with_timestamp = false) {
    std::ostringstream os;
    if (with_timestamp) os << "# generated: " << timestamp_utc() << "\n";
    os << "# dt=" << fmt_double(pulse.dt) << "\n";
    os << "# eta=" << fmt_double(pulse.eta) << "\n";
    os << "segment,t_start";
    for (int k = 0; k < pulse.values.cols(); ++k) os << ",u_" << (k + 1);
    os << "\n";
    for (int i = 0; i < pulse.values.rows(); ++i) {
        os << i << "," << fmt_double(i * pulse.dt);
        for (int k = 0; k < pulse.values.cols(); ++k) os << "," << fmt_double(pulse.values(i, k));
        os << "\n";
    }
    return os.str();
}

inline ControlPulse pulse_from_csv(const std::string& text) {
    ControlPulse pulse;
    pulse.dt = 0.0;
    pulse.eta = 0.0;
    std::vector<std::vector<double>> rows;
    std::vector<double> t_starts;
    std::istringstream is(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (auto p = line.find("dt="); p != std::string::npos && pulse.dt == 0.0)
                pulse.dt = std::stod(line.substr(p + 3));
            if (auto p = line.find("eta="); p != std::string::npos)
                pulse.eta = std::stod(line.substr(p + 4));
            continue;
        }
        if (!header_seen) {  // column header
            header_seen = true;
            continue;
        }
        std::vector<double> fields;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) fields.push_back(std::stod(cell));
        if (fields.size() < 3) throw std::invalid_argument("pulse_from_csv: malformed row");
        t_starts.push_back(fields[1]);
        rows.emplace_back(fields.begin() + 2, fields.end());
    }
    if (rows.empty()) throw std::invalid_argument("pulse_from_csv: no data rows");
    const std::size_t K = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != K) throw std::invalid_argument("pulse_from_csv: ragged rows");
    if (pulse.dt == 0.0) {
        if (t_starts.size() < 2)
            throw std::invalid_argument("pulse_from_csv: cannot infer dt from one segment");
        pulse.dt = t_starts[1] - t_starts[0];
    }
    if (pulse.dt <= 0) throw std::invalid_argument("pulse_from_csv: dt must be positive");
    pulse.values.resize(static_cast<int>(rows.size()), static_cast<int>(K));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < K; ++k)
            pulse.values(static_cast<int>(i), static_cast<int>(k)) = rows[i][k];
    return pulse;
}

inline ordered_json pulse_json(const ControlPulse& pulse) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["dt"] = pulse.dt;
    j["eta"] = pulse.eta;
    j["n_segments"] = pulse.values.rows();
    j["n_controls"] = pulse.values.cols();
    std::vector<std::vector<double>> vals;
    for (int i = 0; i < pulse.values.rows(); ++i) {
        std::vector<double> row(pulse.values.cols());
        for (int k = 0; k < pulse.values.cols(); ++k) row[static_cast<std::size_t>(k)] = pulse.values(i, k);
        vals.push_back(std::move(row));
    }
    j["values"] = vals;
    return j;
}

inline ControlPulse pulse_from_json(const ordered_json& j) {
    ControlPulse pulse;
    pulse.dt = j.at("dt").get<double>();
    pulse.eta = j.value("eta", 0.0);
    auto vals = j.at("values").get<std::vector<std::vector<double>>>();
    if (vals.empty()) throw std::invalid_argument("pulse_from_json: empty values");
    pulse.values.resize(static_cast<int>(vals.size()), static_cast<int>(vals.front().size()));
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (vals[i].size() != vals.front().size())
            throw std::invalid_argument("pulse_from_json: ragged values");
        for (std::size_t k = 0; k < vals[i].size(); ++k)
            pulse.values(static_cast<int>(i), static_cast<int>(k)) = vals[i][k];
    }
    if (pulse.dt <= 0) throw std::invalid_argument("pulse_from_json: dt must be positive");
    return pulse;
}

// --- trajectory CSV ---------------------------------------------------------
// columns: t,purity,r_0..r_{d-1}

inline std::string trajectory_csv(const TrajectoryRecord& traj, bool with_timestamp = false) {
    std::ostringstream os;
    if (with_timestamp) os << "# generated: " << timestamp_utc() << "\n";
    const int d = traj.r_series.empty() ? 0 : static_cast<int>(traj.r_series.front().size());
    os << "t,purity";
    for (int n = 0; n < d; ++n) os << ",r_" << n;
    os << "\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        os << fmt_double(traj.times[i]) << "," << fmt_double(traj.purity_series[i]);
        for (int n = 0; n < d; ++n) os << "," << fmt_double(traj.r_series[i](n));
        os << "\n";
    }
    return os.str();
}

// --- misc -------------------------------------------------------------------

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << content;
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline std::vector<double> to_std(const RVec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline ordered_json state_json(const AmplitudePhaseState& s) {
    ordered_json j;
    j["r"] = to_std(s.r);
    j["phi"] = to_std(s.phi);
    j["basis_id"] = s.basis_id;
    return j;
}

}  // namespace qcb::io
