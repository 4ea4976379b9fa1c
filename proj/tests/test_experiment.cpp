#include "qcb/experiment.hpp"

#include "catch_amalgamated.hpp"

using namespace qcb;

TEST_CASE("experiment config parsing and validation") {
    SECTION("defaults are valid") {
        ExperimentConfig cfg;
        REQUIRE_NOTHROW(cfg.validate());
    }

    SECTION("scalar and list spellings") {
        auto j = io::ordered_json::parse(R"({"n": 6, "eta": 0.002, "epsilon": 0.03})");
        ExperimentConfig cfg = ExperimentConfig::from_json(j);
        REQUIRE(cfg.n_list == std::vector<int>{6});
        REQUIRE(cfg.eta_list == std::vector<double>{0.002});
        REQUIRE(cfg.epsilon == 0.03);

        auto j2 = io::ordered_json::parse(R"({"n_list": [4, 8], "eta_list": [0.0, 1e-3]})");
        ExperimentConfig cfg2 = ExperimentConfig::from_json(j2);
        REQUIRE(cfg2.n_list.size() == 2);
        REQUIRE(cfg2.eta_list.size() == 2);
    }

    SECTION("invalid values are rejected") {
        REQUIRE_THROWS_AS(ExperimentConfig::from_json(io::ordered_json::parse(R"({"n": 0})")),
                          ConfigError);
        REQUIRE_THROWS_AS(
            ExperimentConfig::from_json(io::ordered_json::parse(R"({"epsilon": 1.5})")),
            ConfigError);
        REQUIRE_THROWS_AS(
            ExperimentConfig::from_json(io::ordered_json::parse(R"({"eta": -1e-3})")),
            ConfigError);
        REQUIRE_THROWS_AS(
            ExperimentConfig::from_json(io::ordered_json::parse(R"({"n_list": []})")),
            ConfigError);
        REQUIRE_THROWS_AS(
            ExperimentConfig::from_json(io::ordered_json::parse(R"({"integrator": "euler"})")),
            ConfigError);
    }

    SECTION("unknown keys are rejected") {
        REQUIRE_THROWS_AS(
            ExperimentConfig::from_json(io::ordered_json::parse(R"({"nsegments": 10})")),
            ConfigError);
    }

    SECTION("round trip through JSON") {
        ExperimentConfig cfg;
        cfg.n_list = {4, 8};
        cfg.epsilon = 0.04;
        cfg.seed = 9;
        ExperimentConfig back = ExperimentConfig::from_json(cfg.to_json());
        REQUIRE(back.n_list == cfg.n_list);
        REQUIRE(back.epsilon == cfg.epsilon);
        REQUIRE(back.seed == cfg.seed);
    }
}

TEST_CASE("windowed bound targets") {
    ModelSystem m = double_well_model(16, 1.0, 0.3, 1.7);
    AmplitudePhaseState init = eigenstate_initial_condition(m, m.dim / 2);
    const int mid = m.dim / 2;

    SECTION("support, norm, and displacement") {
        RVec rf = make_bound_target(init.r, 0.065, 42, 3);
        REQUIRE(std::abs(rf.norm() - 1.0) <= 1e-12);
        REQUIRE((rf - init.r).norm() == Catch::Approx(0.065).margin(1e-9));
        for (int n = 0; n < m.dim; ++n) {
            if (std::abs(n - mid) > 3) REQUIRE(rf(n) == 0.0);
            REQUIRE(rf(n) >= 0.0);
        }
        REQUIRE(rf(mid) > 0.9);  // small perturbation keeps the center dominant
    }

    SECTION("deterministic in the seed") {
        RVec a = make_bound_target(init.r, 0.065, 7, 3);
        RVec b = make_bound_target(init.r, 0.065, 7, 3);
        RVec c = make_bound_target(init.r, 0.065, 8, 3);
        REQUIRE(a == b);
        REQUIRE((a - c).norm() > 0.0);
    }

    SECTION("unreachable displacement is rejected") {
        REQUIRE_THROWS_AS(make_bound_target(init.r, 1.45, 42, 3), ConfigError);
    }
}

TEST_CASE("segment-count default scales with the spectral span") {
    REQUIRE(default_segments(double_well_model(2, 1.0, 0.3, 1.7), 4.0) == 24);   // floor
    REQUIRE(default_segments(double_well_model(64, 1.0, 0.3, 1.7), 4.0) == 359);  // bandwidth
}

TEST_CASE("single bound row: noiseless control case") {
    ExperimentConfig cfg;
    cfg.eta_solve = false;
    SweepRow row = run_bound_row(cfg, 4, 0.0);
    REQUIRE(row.converged);
    REQUIRE(row.dp_measured <= 1e-9);  // unitary evolution keeps purity 1
    REQUIRE(row.dp_bound_general == 0.0);
    REQUIRE(row.dp_bound_scaling == 0.0);
    REQUIRE(row.time_ok);
    REQUIRE(row.dp_ok);
    REQUIRE_FALSE(row.bound_violated);
}

TEST_CASE("single bound row: noisy pipeline satisfies both bounds") {
    ExperimentConfig cfg;
    cfg.eta_solve = false;
    RowContext ctx;
    TrajectoryRecord traj;
    SweepRow row = run_bound_row(cfg, 8, 1e-3, &ctx, &traj);
    REQUIRE(row.converged);
    REQUIRE(row.fidelity >= cfg.fidelity_goal);
    REQUIRE(row.t_fp >= row.t_bound - 1e-9);
    REQUIRE(row.dp_measured >= row.dp_bound_general - 1e-9);
    REQUIRE(row.dp_measured > 0.0);
    REQUIRE(row.dp_bound_scaling == Catch::Approx(2.0 * 0.05 * 0.05 * 1e-3 * 8));
    REQUIRE_FALSE(row.bound_violated);

    SECTION("trajectory is in the model basis and reaches epsilon") {
        REQUIRE(traj.basis_id == ctx.model.basis_id);
        const double final_dist = (traj.r_series.back() - ctx.psi_i.r).norm();
        REQUIRE(final_dist >= cfg.epsilon);
    }

    SECTION("rows are deterministic") {
        SweepRow again = run_bound_row(cfg, 8, 1e-3);
        REQUIRE(again.t_fp == row.t_fp);
        REQUIRE(again.dp_measured == row.dp_measured);
        REQUIRE(again.fidelity == row.fidelity);
    }
}

TEST_CASE("fault injection: corrupted bound evaluator trips the checker") {
    // craft a row whose true margin is < 10x, then corrupt Lambda -> Lambda/10
    ModelSystem m = double_well_model(2, 1.0, 0.3, 1.7);
    TransformationSpec spec;
    spec.psi_i = eigenstate_initial_condition(m, 1);
    spec.psi_f = eigenstate_initial_condition(m, 2);
    spec.epsilon = 0.1;
    PulseStatistics st;
    st.t_total = 0.02;
    st.u_bar = {0.5, 0.5};

    SweepRow row;
    row.n = 2;
    row.eta = 0.0;
    row.epsilon = spec.epsilon;
    row.converged = true;
    row.t_fp = 0.02;  // measured passage, 4x above the honest bound
    row.t_bound = time_lower_bound(spec, m, st);
    REQUIRE(row.t_bound == Catch::Approx(0.005));
    apply_row_flags(row);
    REQUIRE_FALSE(row.bound_violated);

    ModelSystem corrupted = m;
    for (double& l : corrupted.lambda) l /= 10.0;
    row.t_bound = time_lower_bound(spec, corrupted, st);
    REQUIRE(row.t_bound == Catch::Approx(0.05));
    apply_row_flags(row);
    REQUIRE(row.bound_violated);
    REQUIRE_FALSE(row.time_ok);
}

TEST_CASE("small sweep with summary and eta-solve companion") {
    ExperimentConfig cfg;
    cfg.n_list = {2, 4, 8};
    cfg.eta_solve = true;
    SweepSummary sm;
    std::vector<SweepRow> rows = run_sweep(cfg, &sm);

    REQUIRE(rows.size() == 3);
    REQUIRE(sm.n_converged == 3);
    REQUIRE(sm.all_time_ok);
    REQUIRE(sm.all_dp_ok);
    REQUIRE(std::isfinite(sm.slope_dp_measured));
    REQUIRE(sm.slope_dp_scaling == Catch::Approx(1.0).margin(1e-9));

    SECTION("holding dP fixed forces eta to fall with N") {
        REQUIRE(sm.eta_solutions.size() == 3);
        for (const auto& s : sm.eta_solutions) REQUIRE(s.converged);
        REQUIRE(sm.slope_eta_star <= -0.5);
    }

    SECTION("worker pool does not change results") {
        ExperimentConfig cfg2 = cfg;
        cfg2.jobs = 2;
        cfg2.eta_solve = false;
        SweepSummary sm2;
        std::vector<SweepRow> rows2 = run_sweep(cfg2, &sm2);
        REQUIRE(sweep_csv(rows2) == sweep_csv(rows));
    }

    SECTION("serialized outputs are deterministic and carry the schema") {
        const std::string csv_a = sweep_csv(rows);
        const std::string csv_b = sweep_csv(rows);
        REQUIRE(csv_a == csv_b);
        REQUIRE(csv_a.rfind("N,eta,epsilon,converged,", 0) == 0);

        io::ordered_json ja = sweep_summary_json(cfg, rows, sm);
        io::ordered_json jb = sweep_summary_json(cfg, rows, sm);
        REQUIRE(ja.dump() == jb.dump());
        REQUIRE(ja["schema_version"] == "1");
        REQUIRE(ja["rows"].size() == 3);
        REQUIRE_FALSE(ja.contains("timestamp"));
    }
}

TEST_CASE("coherent-start sweep: pipeline validity and the variance witness") {
    ExperimentConfig cfg;
    cfg.n_list = {4, 8, 16};
    cfg.initial_state = "coherent";
    cfg.eta_solve = false;
    SweepSummary sm;
    std::vector<SweepRow> rows = run_sweep(cfg, &sm);
    for (const auto& r : rows) {
        REQUIRE(r.converged);
        REQUIRE(r.time_ok);
        REQUIRE(r.dp_ok);
    }

    // the Eq.-17-driving variance grows ~N^2 from a mid-spectrum eigenstate
    // but only ~N from the equatorial coherent state
    std::vector<double> ns, dv_eig, dv_coh;
    MinVarianceOptions mo;
    mo.starts = 8;
    for (int n : {4, 16, 64}) {
        ModelSystem m = double_well_model(n, 1.0, 0.3, 1.7);
        AmplitudePhaseState eig = eigenstate_initial_condition(m, m.dim / 2);
        AmplitudePhaseState coh =
            to_eigenbasis(spin_coherent_state(n, std::numbers::pi / 2), m);
        ns.push_back(static_cast<double>(n));
        dv_eig.push_back(min_variance_over_phases(m.controls[1], eig.r, m, mo).value);
        dv_coh.push_back(min_variance_over_phases(m.controls[1], coh.r, m, mo).value);
    }
    const double slope_eig = fit_loglog_slope(ns, dv_eig);
    const double slope_coh = fit_loglog_slope(ns, dv_coh);
    REQUIRE(slope_eig >= 1.6);
    REQUIRE(slope_coh <= 1.2);
    REQUIRE(slope_eig - slope_coh >= 0.4);
}

TEST_CASE("pulse CSV round trip is lossless") {
    ControlPulse p;
    p.dt = 0.07;
    p.eta = 2.5e-3;
    p.values.resize(3, 2);
    p.values << 0.1, -0.2, 1.0 / 3.0, 0.4, -1e-17, 5.5;

    const std::string csv = io::pulse_csv(p);
    ControlPulse back = io::pulse_from_csv(csv);
    REQUIRE(back.dt == p.dt);
    REQUIRE(back.eta == p.eta);
    REQUIRE(back.values == p.values);  // bitwise via %.17g

    SECTION("JSON round trip") {
        ControlPulse jback = io::pulse_from_json(io::pulse_json(p));
        REQUIRE(jback.dt == p.dt);
        REQUIRE(jback.values == p.values);
    }

    SECTION("malformed input is rejected") {
        REQUIRE_THROWS(io::pulse_from_csv("segment,t_start,u_1\n"));
        REQUIRE_THROWS(io::pulse_from_csv("# dt=0\nsegment,t_start,u_1\n0,0,1\n"));
    }
}

TEST_CASE("trajectory CSV format") {
    ModelSystem m = double_well_model(2, 1.0, 0.3, 1.7);
    ControlPulse p = constant_pulse(0.5, 5, {0.4, 0.1}, 1e-3);
    DensityMatrix rho0 = DensityMatrix::pure(Vec(m.eigen_basis.col(0)));
    TrajectoryRecord traj = propagate_lindblad(m, p, rho0, {});

    const std::string csv = io::trajectory_csv(traj);
    REQUIRE(csv.rfind("t,purity,r_0,r_1,r_2\n", 0) == 0);
    const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    REQUIRE(lines == traj.times.size() + 1);
    REQUIRE(io::trajectory_csv(traj) == csv);  // deterministic
}
