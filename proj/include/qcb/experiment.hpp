#pragma once

// End-to-end experiment pipeline: configuration, windowed target generation,
// synthesize -> propagate -> first-passage -> bound evaluation rows, and the
// N-scaling sweep with slope fits and the eta-solve companion check.

#include "qcb/bounds.hpp"
#include "qcb/grape.hpp"
#include "qcb/io.hpp"

#include <atomic>
#include <cmath>
#include <optional>
#include <thread>

namespace qcb {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    // model
    std::vector<int> n_list{8};
    double omega = 1.0;
    double delta = 0.3;
    double u_int = 1.7;
    // transformation / noise
    std::vector<double> eta_list{1e-3};
    double epsilon = 0.05;
    // initial state
    std::string initial_state = "eigenstate";  // "eigenstate" | "coherent"
    int eigenstate_index = -1;                 // -1 -> mid-spectrum (d/2)
    double coherent_theta = std::numbers::pi / 2;
    // synthesis
    double t_total = 4.0;
    int n_segments = 0;  // 0 -> resolution-based default
    double amplitude_penalty = 1e-5;
    double u_init_scale = 0.02;
    double fidelity_goal = 0.9999;
    int max_iter = 400;
    int window_half_width = 3;
    double margin = 1.3;  // target distance = margin * epsilon
    int lbfgs_memory = 10;
    // propagation
    std::string integrator = "rk4";  // "auto" | "exact" | "rk4"
    double rk_theta = 0.01;
    int stride = 1;
    // sweep
    int jobs = 1;
    bool eta_solve = true;
    double eta_solve_rel_tol = 0.02;
    int eta_solve_max_iter = 48;
    // misc
    std::uint64_t seed = 0;
    std::string out_dir = ".";

    void validate() const {
        if (n_list.empty()) throw ConfigError("n_list must be non-empty");
        for (int n : n_list)
            if (n < 1) throw ConfigError("invalid N: " + std::to_string(n));
        if (eta_list.empty()) throw ConfigError("eta_list must be non-empty");
        for (double e : eta_list)
            if (!(e >= 0)) throw ConfigError("eta must be >= 0");
        if (!(epsilon > 0 && epsilon < 1)) throw ConfigError("epsilon must be in (0,1)");
        if (initial_state != "eigenstate" && initial_state != "coherent")
            throw ConfigError("initial_state must be 'eigenstate' or 'coherent'");
        if (!(t_total > 0)) throw ConfigError("t_total must be positive");
        if (n_segments < 0) throw ConfigError("n_segments must be >= 0");
        if (amplitude_penalty < 0) throw ConfigError("amplitude_penalty must be >= 0");
        if (!(fidelity_goal > 0 && fidelity_goal <= 1))
            throw ConfigError("fidelity_goal must be in (0,1]");
        if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
        if (window_half_width < 1) throw ConfigError("window_half_width must be >= 1");
        if (!(margin >= 1.0)) throw ConfigError("margin must be >= 1");
        if (integrator != "auto" && integrator != "exact" && integrator != "rk4")
            throw ConfigError("integrator must be auto|exact|rk4");
        if (!(rk_theta > 0)) throw ConfigError("rk_theta must be positive");
        if (stride < 1) throw ConfigError("stride must be >= 1");
        if (jobs < 1) throw ConfigError("jobs must be >= 1");
        if (!(eta_solve_rel_tol > 0)) throw ConfigError("eta_solve_rel_tol must be positive");
    }

    static ExperimentConfig from_json(const io::ordered_json& j) {
        ExperimentConfig c;
        for (const auto& [key, val] : j.items()) {
            try {
                if (key == "n") c.n_list = {val.get<int>()};
                else if (key == "n_list") c.n_list = val.get<std::vector<int>>();
                else if (key == "omega") c.omega = val.get<double>();
                else if (key == "delta") c.delta = val.get<double>();
                else if (key == "u") c.u_int = val.get<double>();
                else if (key == "eta") c.eta_list = {val.get<double>()};
                else if (key == "eta_list") c.eta_list = val.get<std::vector<double>>();
                else if (key == "epsilon") c.epsilon = val.get<double>();
                else if (key == "initial_state") c.initial_state = val.get<std::string>();
                else if (key == "eigenstate_index") c.eigenstate_index = val.get<int>();
                else if (key == "coherent_theta") c.coherent_theta = val.get<double>();
                else if (key == "t_total") c.t_total = val.get<double>();
                else if (key == "n_segments") c.n_segments = val.get<int>();
                else if (key == "amplitude_penalty") c.amplitude_penalty = val.get<double>();
                else if (key == "u_init_scale") c.u_init_scale = val.get<double>();
                else if (key == "fidelity_goal") c.fidelity_goal = val.get<double>();
                else if (key == "max_iter") c.max_iter = val.get<int>();
                else if (key == "window_half_width") c.window_half_width = val.get<int>();
                else if (key == "margin") c.margin = val.get<double>();
                else if (key == "lbfgs_memory") c.lbfgs_memory = val.get<int>();
                else if (key == "integrator") c.integrator = val.get<std::string>();
                else if (key == "rk_theta") c.rk_theta = val.get<double>();
                else if (key == "stride") c.stride = val.get<int>();
                else if (key == "jobs") c.jobs = val.get<int>();
                else if (key == "eta_solve") c.eta_solve = val.get<bool>();
                else if (key == "eta_solve_rel_tol") c.eta_solve_rel_tol = val.get<double>();
                else if (key == "eta_solve_max_iter") c.eta_solve_max_iter = val.get<int>();
                else if (key == "seed") c.seed = val.get<std::uint64_t>();
                else if (key == "out_dir") c.out_dir = val.get<std::string>();
                else throw ConfigError("unknown config key: " + key);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("bad value for config key '" + key + "': " + e.what());
            }
        }
        c.validate();
        return c;
    }

    io::ordered_json to_json() const {
        io::ordered_json j;
        j["n_list"] = n_list;
        j["omega"] = omega;
        j["delta"] = delta;
        j["u"] = u_int;
        j["eta_list"] = eta_list;
        j["epsilon"] = epsilon;
        j["initial_state"] = initial_state;
        j["eigenstate_index"] = eigenstate_index;
        j["coherent_theta"] = coherent_theta;
        j["t_total"] = t_total;
        j["n_segments"] = n_segments;
        j["amplitude_penalty"] = amplitude_penalty;
        j["u_init_scale"] = u_init_scale;
        j["fidelity_goal"] = fidelity_goal;
        j["max_iter"] = max_iter;
        j["window_half_width"] = window_half_width;
        j["margin"] = margin;
        j["lbfgs_memory"] = lbfgs_memory;
        j["integrator"] = integrator;
        j["rk_theta"] = rk_theta;
        j["stride"] = stride;
        j["jobs"] = jobs;
        j["eta_solve"] = eta_solve;
        j["eta_solve_rel_tol"] = eta_solve_rel_tol;
        j["eta_solve_max_iter"] = eta_solve_max_iter;
        j["seed"] = seed;
        j["out_dir"] = out_dir;
        return j;
    }
};

// Segment count giving pulse bandwidth comfortably above the H0 level span
// and enough parameters for the 2d-2 real degrees of freedom of the target.
inline int default_segments(const ModelSystem& model, double t_total) {
    const int by_bandwidth = static_cast<int>(std::ceil(t_total * model.h0_norm() / 0.5));
    const int by_dof = static_cast<int>(
        std::ceil(1.5 * (2.0 * model.dim - 2.0) / std::max(1, model.num_controls())));
    return std::max({24, by_bandwidth, by_dof});
}

// Target amplitudes: perturb r_i along a random non-negative direction
// supported on a window of eigenstates around the initial support, with
// |r_f - r_i| = dist enforced by bisection on the step length.
inline RVec make_bound_target(const RVec& r_i, double dist, std::uint64_t seed,
                              int half_width = 3) {
    const int d = static_cast<int>(r_i.size());
    if (d < 2) throw std::invalid_argument("make_bound_target: need dim >= 2");
    int mid = 0;
    r_i.maxCoeff(&mid);
    RVec g = RVec::Zero(d);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    const int lo_i = std::max(0, mid - half_width);
    const int hi_i = std::min(d - 1, mid + half_width);
    for (int n = lo_i; n <= hi_i; ++n) g(n) = std::abs(nd(rng));
    g(mid) = 0.0;
    if (g.norm() == 0.0) throw std::invalid_argument("make_bound_target: empty direction");
    g /= g.norm();

    double lo = 0.0, hi = 4.0;
    RVec rf = r_i;
    for (int it = 0; it < 200; ++it) {
        const double s = 0.5 * (lo + hi);
        rf = (r_i + s * g).normalized();
        if ((rf - r_i).norm() < dist) lo = s;
        else hi = s;
    }
    if ((rf - r_i).norm() < 0.99 * dist)
        throw ConfigError("make_bound_target: requested distance unreachable in window");
    return rf;
}

struct SweepRow {
    int n = 0;
    double eta = 0.0;
    double epsilon = 0.0;
    bool converged = false;
    double fidelity = 0.0;
    int iterations = 0;
    double t_total = 0.0;
    int n_segments = 0;
    double t_fp = 0.0;
    double t_bound = 0.0;
    double dp_measured = 0.0;
    double dp_bound_general = 0.0;
    double dp_bound_scaling = 0.0;
    std::vector<double> u_bar;
    bool time_ok = true;
    bool dp_ok = true;
    bool bound_violated = false;
    std::string note;
};

// Flag recomputation shared by the pipeline and the fault-injection tests.
inline void apply_row_flags(SweepRow& row) {
    if (!row.converged) {
        row.time_ok = row.dp_ok = true;
        row.bound_violated = false;
        return;
    }
    row.time_ok = row.t_fp >= row.t_bound - 1e-9;
    row.dp_ok = row.dp_measured >= row.dp_bound_general - 1e-9;
    row.bound_violated = !(row.time_ok && row.dp_ok);
}

// Everything about one sweep point that does not depend on eta.
struct RowContext {
    ModelSystem model;
    AmplitudePhaseState psi_i;
    TransformationSpec spec;
    SynthesisResult synth;
};

inline RowContext prepare_row(const ExperimentConfig& cfg, int n) {
    RowContext ctx;
    ctx.model = double_well_model(n, cfg.omega, cfg.delta, cfg.u_int);
    if (cfg.initial_state == "eigenstate") {
        int idx = cfg.eigenstate_index >= 0 ? cfg.eigenstate_index : ctx.model.dim / 2;
        if (idx >= ctx.model.dim)
            throw ConfigError("eigenstate_index out of range for N=" + std::to_string(n));
        ctx.psi_i = eigenstate_initial_condition(ctx.model, idx);
    } else {
        ctx.psi_i = to_eigenbasis(spin_coherent_state(n, cfg.coherent_theta), ctx.model);
    }

    const std::uint64_t dir_seed = 100 + static_cast<std::uint64_t>(n) + 1000 * cfg.seed;
    const RVec r_f = make_bound_target(ctx.psi_i.r, cfg.margin * cfg.epsilon, dir_seed,
                                       cfg.window_half_width);

    SynthesisConfig scfg;
    scfg.t_total = cfg.t_total;
    scfg.n_seg = cfg.n_segments > 0 ? cfg.n_segments : default_segments(ctx.model, cfg.t_total);
    scfg.max_iter = cfg.max_iter;
    scfg.fidelity_goal = cfg.fidelity_goal;
    scfg.amplitude_penalty = cfg.amplitude_penalty;
    scfg.seed = 3 + 1000 * cfg.seed;
    scfg.u_init_scale = cfg.u_init_scale;
    scfg.lbfgs_memory = cfg.lbfgs_memory;

    auto fp = synthesize_free_phase(ctx.model, state_vector(ctx.psi_i, ctx.model), r_f, scfg);
    ctx.synth = std::move(fp.synthesis);
    ctx.spec.psi_i = ctx.psi_i;
    ctx.spec.psi_f = std::move(fp.psi_f);
    ctx.spec.epsilon = cfg.epsilon;
    return ctx;
}

inline PropagateOptions propagate_options(const ExperimentConfig& cfg) {
    PropagateOptions opt;
    if (cfg.integrator == "exact") opt.integrator = PropagateOptions::Integrator::Exact;
    else if (cfg.integrator == "rk4") opt.integrator = PropagateOptions::Integrator::RK4;
    else opt.integrator = PropagateOptions::Integrator::Auto;
    opt.rk_theta = cfg.rk_theta;
    opt.record_substeps = true;
    return opt;
}

// Propagate the prepared pulse at the given eta and evaluate all bounds at
// the measured first passage.
inline SweepRow finish_row(const ExperimentConfig& cfg, const RowContext& ctx, double eta,
                           TrajectoryRecord* traj_out = nullptr) {
    SweepRow row;
    row.n = ctx.model.size_param;
    row.eta = eta;
    row.epsilon = cfg.epsilon;
    row.fidelity = ctx.synth.fidelity;
    row.iterations = ctx.synth.iterations;
    row.t_total = cfg.t_total;
    row.n_segments = static_cast<int>(ctx.synth.pulse.values.rows());
    if (!ctx.synth.converged) {
        row.note = "synthesis unconverged";
        apply_row_flags(row);
        return row;
    }

    ControlPulse pulse = ctx.synth.pulse;
    pulse.eta = eta;
    PropagateOptions opt = propagate_options(cfg);
    opt.stop_distance = cfg.epsilon;
    opt.stop_r_ref = ctx.psi_i.r;

    DensityMatrix rho0 = DensityMatrix::pure(state_vector(ctx.psi_i, ctx.model));
    TrajectoryRecord traj = propagate_lindblad(ctx.model, pulse, rho0, opt);
    auto t_fp = first_passage_time(traj, ctx.spec);
    if (traj_out) *traj_out = traj;
    if (!t_fp) {
        row.note = "no first passage within pulse duration";
        apply_row_flags(row);
        return row;
    }
    row.converged = true;
    row.t_fp = *t_fp;
    row.dp_measured = std::max(0.0, 1.0 - purity_at(traj, *t_fp));

    const PulseStatistics stats = pulse_statistics_prefix(pulse, *t_fp);
    const BoundReport rep = bound_report(ctx.spec, ctx.model, stats, eta);
    row.t_bound = rep.t_bound;
    row.dp_bound_general = rep.dp_bound_general;
    row.dp_bound_scaling = rep.dp_bound_scaling;
    row.u_bar = stats.u_bar;
    apply_row_flags(row);
    return row;
}

inline SweepRow run_bound_row(const ExperimentConfig& cfg, int n, double eta,
                              RowContext* ctx_out = nullptr,
                              TrajectoryRecord* traj_out = nullptr) {
    RowContext ctx = prepare_row(cfg, n);
    SweepRow row = finish_row(cfg, ctx, eta, traj_out);
    if (ctx_out) *ctx_out = std::move(ctx);
    return row;
}

inline double fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("fit_loglog_slope: need >= 2 points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += std::log(xs[i]);
        my += std::log(ys[i]);
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = std::log(xs[i]) - mx;
        sxy += dx * (std::log(ys[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0) throw std::invalid_argument("fit_loglog_slope: degenerate abscissa");
    return sxy / sxx;
}

struct EtaSolveResult {
    int n = 0;
    double eta_star = 0.0;
    double dp_achieved = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Bisect eta so the measured first-passage purity loss matches dp_target,
// reusing the already synthesized (noise-free) pulse for this N.
inline EtaSolveResult solve_eta_for_dp(const ExperimentConfig& cfg, const RowContext& ctx,
                                       double dp_target) {
    EtaSolveResult res;
    res.n = ctx.model.size_param;
    if (!ctx.synth.converged || dp_target <= 0) return res;
    auto dp_at = [&](double eta) { return finish_row(cfg, ctx, eta).dp_measured; };

    double lo = 1e-9, hi = 1e-1;
    double dp_lo = dp_at(lo), dp_hi = dp_at(hi);
    if (dp_lo > dp_target || dp_hi < dp_target) return res;  // target outside bracket
    for (int it = 0; it < cfg.eta_solve_max_iter; ++it) {
        const double mid = std::sqrt(lo * hi);  // log-space bisection
        const double dp = dp_at(mid);
        ++res.iterations;
        if (std::abs(dp - dp_target) <= cfg.eta_solve_rel_tol * dp_target) {
            res.eta_star = mid;
            res.dp_achieved = dp;
            res.converged = true;
            return res;
        }
        if (dp < dp_target) lo = mid;
        else hi = mid;
    }
    res.eta_star = std::sqrt(lo * hi);
    res.dp_achieved = dp_at(res.eta_star);
    res.converged = false;
    return res;
}

struct SweepSummary {
    int n_rows = 0;
    int n_converged = 0;
    bool all_time_ok = true;
    bool all_dp_ok = true;
    double slope_dp_measured = std::numeric_limits<double>::quiet_NaN();
    double slope_dp_scaling = std::numeric_limits<double>::quiet_NaN();
    double slope_eta_star = std::numeric_limits<double>::quiet_NaN();
    std::vector<EtaSolveResult> eta_solutions;
};

// One sweep point per (N, eta).  N points run on a worker pool; rows are
// collected into pre-assigned slots so output order is deterministic.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                       SweepSummary* summary = nullptr) {
    const int n_points = static_cast<int>(cfg.n_list.size());
    std::vector<std::optional<RowContext>> contexts(static_cast<std::size_t>(n_points));
    std::vector<std::string> failures(static_cast<std::size_t>(n_points));

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n_points) return;
            try {
                contexts[static_cast<std::size_t>(i)] = prepare_row(cfg, cfg.n_list[static_cast<std::size_t>(i)]);
            } catch (const std::exception& e) {
                failures[static_cast<std::size_t>(i)] = e.what();
            }
        }
    };
    const int n_workers = std::max(1, std::min(cfg.jobs, n_points));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<SweepRow> rows;
    for (int i = 0; i < n_points; ++i) {
        for (double eta : cfg.eta_list) {
            if (contexts[static_cast<std::size_t>(i)]) {
                rows.push_back(finish_row(cfg, *contexts[static_cast<std::size_t>(i)], eta));
            } else {
                SweepRow row;
                row.n = cfg.n_list[static_cast<std::size_t>(i)];
                row.eta = eta;
                row.epsilon = cfg.epsilon;
                row.note = "row failed: " + failures[static_cast<std::size_t>(i)];
                apply_row_flags(row);
                rows.push_back(std::move(row));
            }
        }
    }

    if (summary) {
        *summary = SweepSummary{};
        summary->n_rows = static_cast<int>(rows.size());
        std::vector<double> ns, dps, sbs;
        const double eta_ref = cfg.eta_list.front();
        for (const auto& row : rows) {
            if (row.converged) ++summary->n_converged;
            if (row.converged && !row.time_ok) summary->all_time_ok = false;
            if (row.converged && !row.dp_ok) summary->all_dp_ok = false;
            if (row.converged && row.eta == eta_ref && row.dp_measured > 0) {
                ns.push_back(static_cast<double>(row.n));
                dps.push_back(row.dp_measured);
                sbs.push_back(row.dp_bound_scaling);
            }
        }
        if (ns.size() >= 2) {
            summary->slope_dp_measured = fit_loglog_slope(ns, dps);
            summary->slope_dp_scaling = fit_loglog_slope(ns, sbs);
        }
        if (cfg.eta_solve && dps.size() >= 2) {
            double log_mean = 0;
            for (double dp : dps) log_mean += std::log(dp);
            const double dp_target = std::exp(log_mean / static_cast<double>(dps.size()));
            std::vector<double> en, es;
            for (int i = 0; i < n_points; ++i) {
                if (!contexts[static_cast<std::size_t>(i)]) continue;
                EtaSolveResult r = solve_eta_for_dp(cfg, *contexts[static_cast<std::size_t>(i)], dp_target);
                if (r.converged) {
                    en.push_back(static_cast<double>(r.n));
                    es.push_back(r.eta_star);
                }
                summary->eta_solutions.push_back(std::move(r));
            }
            if (en.size() >= 2) summary->slope_eta_star = fit_loglog_slope(en, es);
        }
    }
    return rows;
}

// --- serialization ----------------------------------------------------------

inline std::string sweep_csv(const std::vector<SweepRow>& rows, bool with_timestamp = false) {
    std::ostringstream os;
    if (with_timestamp) os << "# generated: " << io::timestamp_utc() << "\n";
    const int K = rows.empty() ? 0
                               : static_cast<int>(std::max<std::size_t>(
                                     1, rows.front().u_bar.size()));
    os << "N,eta,epsilon,converged,fidelity,iterations,t_total,n_segments,t_fp,t_bound,"
          "dp_measured,dp_bound_general,dp_bound_scaling,time_ok,dp_ok,bound_violated";
    for (int k = 0; k < K; ++k) os << ",u_bar_" << (k + 1);
    os << "\n";
    for (const auto& r : rows) {
        os << r.n << "," << io::fmt_double(r.eta) << "," << io::fmt_double(r.epsilon) << ","
           << (r.converged ? 1 : 0) << "," << io::fmt_double(r.fidelity) << "," << r.iterations
           << "," << io::fmt_double(r.t_total) << "," << r.n_segments << ","
           << io::fmt_double(r.t_fp) << "," << io::fmt_double(r.t_bound) << ","
           << io::fmt_double(r.dp_measured) << "," << io::fmt_double(r.dp_bound_general) << ","
           << io::fmt_double(r.dp_bound_scaling) << "," << (r.time_ok ? 1 : 0) << ","
           << (r.dp_ok ? 1 : 0) << "," << (r.bound_violated ? 1 : 0);
        for (int k = 0; k < K; ++k)
            os << ","
               << io::fmt_double(k < static_cast<int>(r.u_bar.size())
                                     ? r.u_bar[static_cast<std::size_t>(k)]
                                     : 0.0);
        os << "\n";
    }
    return os.str();
}

inline io::ordered_json row_json(const SweepRow& r) {
    io::ordered_json j;
    j["N"] = r.n;
    j["eta"] = r.eta;
    j["epsilon"] = r.epsilon;
    j["converged"] = r.converged;
    j["fidelity"] = r.fidelity;
    j["iterations"] = r.iterations;
    j["t_total"] = r.t_total;
    j["n_segments"] = r.n_segments;
    j["t_fp"] = r.t_fp;
    j["t_bound"] = r.t_bound;
    j["dp_measured"] = r.dp_measured;
    j["dp_bound_general"] = r.dp_bound_general;
    j["dp_bound_scaling"] = r.dp_bound_scaling;
    j["u_bar"] = r.u_bar;
    j["time_ok"] = r.time_ok;
    j["dp_ok"] = r.dp_ok;
    j["bound_violated"] = r.bound_violated;
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

inline io::ordered_json sweep_summary_json(const ExperimentConfig& cfg,
                                           const std::vector<SweepRow>& rows,
                                           const SweepSummary& summary) {
    io::ordered_json j;
    j["schema_version"] = io::kSchemaVersion;
    j["config"] = cfg.to_json();
    j["n_rows"] = summary.n_rows;
    j["n_converged"] = summary.n_converged;
    j["all_time_ok"] = summary.all_time_ok;
    j["all_dp_ok"] = summary.all_dp_ok;
    auto put_opt = [&](const char* key, double v) {
        if (std::isnan(v)) j[key] = nullptr;
        else j[key] = v;
    };
    put_opt("slope_dp_measured", summary.slope_dp_measured);
    put_opt("slope_dp_scaling", summary.slope_dp_scaling);
    put_opt("slope_eta_star", summary.slope_eta_star);
    io::ordered_json sols = io::ordered_json::array();
    for (const auto& s : summary.eta_solutions) {
        io::ordered_json e;
        e["N"] = s.n;
        e["eta_star"] = s.eta_star;
        e["dp_achieved"] = s.dp_achieved;
        e["iterations"] = s.iterations;
        e["converged"] = s.converged;
        sols.push_back(std::move(e));
    }
    j["eta_solutions"] = std::move(sols);
    io::ordered_json rj = io::ordered_json::array();
    for (const auto& r : rows) rj.push_back(row_json(r));
    j["rows"] = std::move(rj);
    return j;
}

}  // namespace qcb
