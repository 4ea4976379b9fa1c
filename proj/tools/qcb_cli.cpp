// Command-line driver: model inspection, propagation, pulse synthesis,
// single-point bound verification, and the N-scaling sweep.
//
// Exit codes: 0 success, 2 config error, 3 synthesis non-convergence,
// 4 internal bound-checker violation.

#include "qcb/qcb.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

using namespace qcb;

namespace {

// Options shared by every subcommand.  A value participates in the final
// ExperimentConfig only if the flag was actually passed, so flags override
// --config file values which override the built-in defaults.
struct CommonOpts {
    CLI::App* sub = nullptr;

    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    int jobs = 1;
    int stride = 1;

    int size = 0;
    std::vector<int> size_list;
    double eta = 0.0;
    std::vector<double> eta_list;
    double epsilon = 0.0;
    std::string initial_state;
    int eigenstate_index = -1;
    double coherent_theta = 0.0;
    double omega = 0.0, delta = 0.0, u_int = 0.0;
    double t_total = 0.0;
    int segments = 0;
    double penalty = 0.0;
    double u_init_scale = 0.0;
    double goal = 0.0;
    int max_iter = 0;
    double margin = 0.0;
    std::string integrator;
    double rk_theta = 0.0;
    bool eta_solve_on = false, eta_solve_off = false;

    void attach(CLI::App* s) {
        sub = s;
        s->add_option("--config", config_path, "JSON config file (flags override its values)")
            ->check(CLI::ExistingFile);
        s->add_option("--out", out, "output directory");
        s->add_option("--seed", seed, "base seed for targets and synthesis");
        s->add_option("--jobs", jobs, "worker threads for sweep points");
        s->add_option("--stride", stride, "sampling stride for trajectory output");

        s->add_option("--size,-N", size, "system size N");
        s->add_option("--size-list", size_list, "comma-separated N values")->delimiter(',');
        s->add_option("--eta", eta, "relative noise strength");
        s->add_option("--eta-list", eta_list, "comma-separated eta values")->delimiter(',');
        s->add_option("--epsilon", epsilon, "transformation distance epsilon");
        s->add_option("--initial-state", initial_state, "eigenstate | coherent");
        s->add_option("--eigenstate-index", eigenstate_index, "H0 level index (-1 = mid)");
        s->add_option("--coherent-theta", coherent_theta, "polar angle of the coherent start");
        s->add_option("--omega", omega, "tunneling strength");
        s->add_option("--delta", delta, "well asymmetry");
        s->add_option("--interaction,-U", u_int, "interaction strength U");
        s->add_option("--t-total", t_total, "pulse duration");
        s->add_option("--segments", segments, "pulse segments (0 = auto)");
        s->add_option("--penalty", penalty, "amplitude penalty weight");
        s->add_option("--u-init-scale", u_init_scale, "random init scale for controls");
        s->add_option("--goal", goal, "synthesis fidelity goal");
        s->add_option("--max-iter", max_iter, "synthesis iteration cap");
        s->add_option("--margin", margin, "target distance / epsilon ratio");
        s->add_option("--integrator", integrator, "auto | exact | rk4");
        s->add_option("--rk-theta", rk_theta, "integrator substep control");
        s->add_flag("--eta-solve", eta_solve_on, "enable the eta-vs-N companion solve");
        s->add_flag("--no-eta-solve", eta_solve_off, "disable the eta-vs-N companion solve");
    }

    bool given(const std::string& name) const { return sub->count(name) > 0; }

    ExperimentConfig build() const {
        ExperimentConfig cfg;
        if (given("--config"))
            cfg = ExperimentConfig::from_json(
                io::ordered_json::parse(io::read_file(config_path)));
        if (given("--out")) cfg.out_dir = out;
        if (given("--seed")) cfg.seed = seed;
        if (given("--jobs")) cfg.jobs = jobs;
        if (given("--stride")) cfg.stride = stride;
        if (given("--size")) cfg.n_list = {size};
        if (given("--size-list")) cfg.n_list = size_list;
        if (given("--eta")) cfg.eta_list = {eta};
        if (given("--eta-list")) cfg.eta_list = eta_list;
        if (given("--epsilon")) cfg.epsilon = epsilon;
        if (given("--initial-state")) cfg.initial_state = initial_state;
        if (given("--eigenstate-index")) cfg.eigenstate_index = eigenstate_index;
        if (given("--coherent-theta")) cfg.coherent_theta = coherent_theta;
        if (given("--omega")) cfg.omega = omega;
        if (given("--delta")) cfg.delta = delta;
        if (given("--interaction")) cfg.u_int = u_int;
        if (given("--t-total")) cfg.t_total = t_total;
        if (given("--segments")) cfg.n_segments = segments;
        if (given("--penalty")) cfg.amplitude_penalty = penalty;
        if (given("--u-init-scale")) cfg.u_init_scale = u_init_scale;
        if (given("--goal")) cfg.fidelity_goal = goal;
        if (given("--max-iter")) cfg.max_iter = max_iter;
        if (given("--margin")) cfg.margin = margin;
        if (given("--integrator")) cfg.integrator = integrator;
        if (given("--rk-theta")) cfg.rk_theta = rk_theta;
        if (eta_solve_on) cfg.eta_solve = true;
        if (eta_solve_off) cfg.eta_solve = false;
        cfg.validate();
        return cfg;
    }
};

void write_output(const ExperimentConfig& cfg, const std::string& name,
                  const std::string& content) {
    std::filesystem::create_directories(cfg.out_dir);
    io::write_file(cfg.out_dir + "/" + name, content);
}

void emit(const io::ordered_json& j) { std::cout << j.dump(2) << "\n"; }

// ----------------------------------------------------------------- model

int cmd_model(const CommonOpts& opts, bool force_closure) {
    const ExperimentConfig cfg = opts.build();
    const int n = cfg.n_list.front();
    ModelSystem m = double_well_model(n, cfg.omega, cfg.delta, cfg.u_int);

    io::ordered_json j;
    j["schema_version"] = io::kSchemaVersion;
    j["n"] = n;
    j["dim"] = m.dim;
    j["omega"] = cfg.omega;
    j["delta"] = cfg.delta;
    j["u"] = cfg.u_int;
    j["lambda"] = m.lambda;
    if (m.dim <= 20 || force_closure) {
        j["lie_closure_rank"] = lie_closure_rank(m);
    } else {
        j["lie_closure_rank"] = nullptr;
        j["note"] = "closure rank skipped for dim > 20; pass --force-closure to compute";
    }
    j["h0_spectrum"] = io::to_std(m.eigen_values);
    emit(j);
    return 0;
}

// ------------------------------------------------------------- propagate

int cmd_propagate(const CommonOpts& opts, const std::string& pulse_path) {
    const ExperimentConfig cfg = opts.build();
    ControlPulse pulse = io::pulse_from_csv(io::read_file(pulse_path));
    if (opts.given("--eta")) pulse.eta = cfg.eta_list.front();

    const int n = cfg.n_list.front();
    ModelSystem m = double_well_model(n, cfg.omega, cfg.delta, cfg.u_int);
    if (pulse.num_controls() != m.num_controls())
        throw ConfigError("pulse has " + std::to_string(pulse.num_controls()) +
                          " controls, model expects " + std::to_string(m.num_controls()));

    AmplitudePhaseState psi_i;
    if (cfg.initial_state == "eigenstate") {
        const int idx = cfg.eigenstate_index >= 0 ? cfg.eigenstate_index : m.dim / 2;
        psi_i = eigenstate_initial_condition(m, idx);
    } else {
        psi_i = to_eigenbasis(spin_coherent_state(n, cfg.coherent_theta), m);
    }

    PropagateOptions popt = propagate_options(cfg);
    TrajectoryRecord traj =
        propagate_lindblad(m, pulse, DensityMatrix::pure(state_vector(psi_i, m)), popt);

    // stride-decimated table; endpoints always kept
    TrajectoryRecord out_traj;
    out_traj.basis_id = traj.basis_id;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        if (i % static_cast<std::size_t>(cfg.stride) != 0 && i + 1 != traj.times.size())
            continue;
        out_traj.times.push_back(traj.times[i]);
        out_traj.purity_series.push_back(traj.purity_series[i]);
        out_traj.r_series.push_back(traj.r_series[i]);
    }
    write_output(cfg, "trajectory.csv", io::trajectory_csv(out_traj, true));

    TransformationSpec spec;
    spec.psi_i = psi_i;
    spec.psi_f = psi_i;
    spec.epsilon = cfg.epsilon;
    const auto t_fp = first_passage_time(traj, spec);
    const PulseStatistics stats = pulse_statistics(pulse);

    io::ordered_json j;
    j["schema_version"] = io::kSchemaVersion;
    j["n"] = n;
    j["eta"] = pulse.eta;
    j["t_total"] = pulse.t_total();
    j["n_segments"] = pulse.n_seg();
    j["u_bar"] = stats.u_bar;
    j["purity_final"] = traj.purity_series.back();
    j["dp_final"] = std::max(0.0, 1.0 - traj.purity_series.back());
    if (t_fp) {
        j["first_passage"] = *t_fp;
        j["dp_at_first_passage"] = std::max(0.0, 1.0 - purity_at(traj, *t_fp));
    } else {
        j["first_passage"] = nullptr;
    }
    j["trajectory_file"] = cfg.out_dir + "/trajectory.csv";
    write_output(cfg, "propagate.json", j.dump(2) + "\n");
    emit(j);
    return 0;
}

// ------------------------------------------------------------ synthesize

int cmd_synthesize(const CommonOpts& opts) {
    const ExperimentConfig cfg = opts.build();
    const int n = cfg.n_list.front();
    RowContext ctx = prepare_row(cfg, n);

    ControlPulse pulse = ctx.synth.pulse;
    pulse.eta = cfg.eta_list.front();
    write_output(cfg, "pulse.csv", io::pulse_csv(pulse, true));

    io::ordered_json j;
    j["schema_version"] = io::kSchemaVersion;
    j["config"] = cfg.to_json();
    j["n"] = n;
    j["n_segments"] = pulse.n_seg();
    j["dt"] = pulse.dt;
    j["fidelity"] = ctx.synth.fidelity;
    j["iterations"] = ctx.synth.iterations;
    j["converged"] = ctx.synth.converged;
    j["target"] = io::state_json(ctx.spec.psi_f);
    j["pulse_file"] = cfg.out_dir + "/pulse.csv";
    write_output(cfg, "synthesize.json", j.dump(2) + "\n");
    emit(j);
    return ctx.synth.converged ? 0 : 3;
}

// --------------------------------------------------------- verify-bounds

int cmd_verify_bounds(const CommonOpts& opts, bool save_trajectory) {
    const ExperimentConfig cfg = opts.build();
    TrajectoryRecord traj;
    SweepRow row = run_bound_row(cfg, cfg.n_list.front(), cfg.eta_list.front(), nullptr,
                                 save_trajectory ? &traj : nullptr);
    io::ordered_json j = row_json(row);
    j["schema_version"] = io::kSchemaVersion;
    if (save_trajectory && row.converged) {
        write_output(cfg, "trajectory.csv", io::trajectory_csv(traj, true));
        j["trajectory_file"] = cfg.out_dir + "/trajectory.csv";
    }
    emit(j);
    if (!row.converged) {
        std::cerr << "verify-bounds: synthesis did not converge\n";
        return 3;
    }
    if (row.bound_violated) {
        std::cerr << "verify-bounds: bound violated (measured below bound - 1e-9)\n";
        return 4;
    }
    return 0;
}

// ----------------------------------------------------------------- sweep

int cmd_sweep(const CommonOpts& opts) {
    const ExperimentConfig cfg = opts.build();
    if (cfg.n_list.size() < 3)
        throw ConfigError("sweep needs >= 3 N values for the slope fit (got " +
                          std::to_string(cfg.n_list.size()) + ")");

    SweepSummary summary;
    std::vector<SweepRow> rows = run_sweep(cfg, &summary);

    write_output(cfg, "sweep.csv", sweep_csv(rows, true));
    io::ordered_json j = sweep_summary_json(cfg, rows, summary);
    write_output(cfg, "summary.json", j.dump(2) + "\n");
    emit(j);

    for (const SweepRow& r : rows)
        if (r.bound_violated) {
            std::cerr << "sweep: bound violated at N=" << r.n << ", eta=" << r.eta << "\n";
            return 4;
        }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"control-noise bound verification toolkit"};
    app.require_subcommand(1);

    CommonOpts m_opts, p_opts, s_opts, v_opts, w_opts;
    bool force_closure = false, save_trajectory = false;
    std::string pulse_path;

    CLI::App* c_model = app.add_subcommand("model", "model summary: dims, Lambda, spectrum");
    m_opts.attach(c_model);
    c_model->add_flag("--force-closure", force_closure, "compute closure rank even for dim > 20");

    CLI::App* c_prop = app.add_subcommand("propagate", "evolve a pulse from file");
    p_opts.attach(c_prop);
    c_prop->add_option("--pulse", pulse_path, "pulse CSV file")
        ->required()
        ->check(CLI::ExistingFile);

    CLI::App* c_synth = app.add_subcommand("synthesize", "synthesize a bound-probe pulse");
    s_opts.attach(c_synth);

    CLI::App* c_verify = app.add_subcommand("verify-bounds", "single-point bound check");
    v_opts.attach(c_verify);
    c_verify->add_flag("--save-trajectory", save_trajectory, "also write trajectory.csv");

    CLI::App* c_sweep = app.add_subcommand("sweep", "N-scaling sweep with slope fits");
    w_opts.attach(c_sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (c_model->parsed()) return cmd_model(m_opts, force_closure);
        if (c_prop->parsed()) return cmd_propagate(p_opts, pulse_path);
        if (c_synth->parsed()) return cmd_synthesize(s_opts);
        if (c_verify->parsed()) return cmd_verify_bounds(v_opts, save_trajectory);
        if (c_sweep->parsed()) return cmd_sweep(w_opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
