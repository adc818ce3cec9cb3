#include "sflr/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>

namespace sflr {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

Process parse_process(const std::string& s) {
    if (s == "far1") return Process::far1;
    if (s == "fma4") return Process::fma4;
    throw ConfigError("unknown process '" + s + "' (far1|fma4)");
}

Scheme parse_scheme(const std::string& s) {
    if (s == "reg1") return Scheme::reg1;
    if (s == "reg2") return Scheme::reg2;
    if (s == "reg3") return Scheme::reg3;
    throw ConfigError("unknown scheme '" + s + "' (reg1|reg2|reg3)");
}

Shape parse_shape(const std::string& s) {
    if (s == "a" || s == "A") return Shape::A;
    if (s == "b" || s == "B") return Shape::B;
    throw ConfigError("unknown shape '" + s + "' (a|b)");
}

std::string method_name(Regularization m) {
    return m == Regularization::truncation ? "truncation" : "tikhonov";
}

void write_json(const std::filesystem::path& path, const json& doc) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

void write_cv_trace(const std::filesystem::path& path, const CVTrace& trace) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << "what,candidate,score\n";
    for (const auto& row : trace)
        out << row.what << ',' << format_double(row.candidate) << ','
            << format_double(row.score) << '\n';
}

// Last time index with an observed response; 0 if none.
int last_observed(const ScalarTS& z) {
    for (int t = z.T(); t >= 1; --t)
        if (!ScalarTS::missing(z.z[static_cast<std::size_t>(t - 1)])) return t;
    return 0;
}

json manifest_base(const RunConfig& cfg, const EstimationResult* est) {
    json m;
    m["version"] = kVersion;
    m["command"] = cfg.command;
    m["inputs"] = {{"sparse", cfg.sparse_path.string()},
                   {"scalar", cfg.scalar_path.string()},
                   {"regressor2", cfg.regressor2_path.string()},
                   {"regressor2_kind", cfg.regressor2_kind}};
    m["p"] = cfg.p;
    m["n_freq"] = cfg.n_freq;
    m["seed"] = cfg.seed;
    m["threads"] = cfg.threads;
    m["method"] = cfg.method;
    m["window"] = cfg.window;
    m["outdir"] = cfg.outdir.string();
    if (est) {
        m["resolved"] = {{"L", est->L},
                         {"B_R", est->B_R},
                         {"B_V", est->B_V},
                         {"B_C", est->B_C},
                         {"reg_param", est->reg_param},
                         {"M", est->M},
                         {"sigma2", est->sigma2}};
    }
    return m;
}

}  // namespace

void RunConfig::validate() const {
    if (p < 2) throw ConfigError("grid needs p >= 2");
    if (n_freq < 4 || n_freq % 2 != 0) throw ConfigError("n_freq must be even and >= 4");
    if (method != "tikhonov" && method != "truncation")
        throw ConfigError("method must be tikhonov or truncation");
    if (regressor2_kind != "dense" && regressor2_kind != "sparse")
        throw ConfigError("regressor2 kind must be dense or sparse");
    if (L < 0 || M < 0) throw ConfigError("L and M must be non-negative");
    if (window < -2) throw ConfigError("window must be >= -1 (or -2 for the default)");
    if (B_R < 0 || B_V < 0 || B_C < 0) throw ConfigError("bandwidths must be non-negative");
    if (reg_param < 0 || reg_param2 < 0)
        throw ConfigError("regularization parameters must be non-negative");
}

Regularization RunConfig::regularization() const {
    return method == "truncation" ? Regularization::truncation : Regularization::tikhonov;
}

SimConfig RunConfig::sim_config() const {
    SimConfig sim;
    sim.process = parse_process(process);
    sim.scheme = parse_scheme(scheme);
    sim.shape = parse_shape(shape);
    sim.T = T;
    sim.N_max = N_max;
    sim.seed = seed;
    return sim;
}

EstimationResult estimate_scalar_model(const SparseFTS& x, const ScalarTS& z,
                                       const RunConfig& cfg, const SpatialGrid& grid,
                                       const FrequencyGrid& fgrid) {
    x.validate();
    z.validate();
    if (x.T() != z.T()) throw DataError("regressor and response series disagree in length");
    const int T = x.T();

    EstimationResult res;
    res.L = cfg.L > 0 ? cfg.L : std::min(bartlett_span_default(T), T - 1);
    if (fgrid.n_freq <= 2 * res.L)
        throw ConfigError("n_freq must exceed 2L = " + std::to_string(2 * res.L));

    CVPlan plan = CVPlan::defaults();
    plan.seed = derive_seed(cfg.seed, stream::kFolds);

    if (cfg.B_R > 0 && cfg.B_V > 0) {
        res.B_R = cfg.B_R;
        res.B_V = cfg.B_V;
    } else {
        const BandwidthChoice bw = cv_bandwidths(x, grid, plan, &res.cv_trace);
        res.B_R = cfg.B_R > 0 ? cfg.B_R : bw.B_R;
        res.B_V = cfg.B_V > 0 ? cfg.B_V : bw.B_V;
    }
    res.B_C = cfg.B_C > 0 ? cfg.B_C : cv_cross_bandwidth(x, z, grid, plan, &res.cv_trace);

    const RawCovariances raw = raw_covariances(x, res.L);
    res.fx = estimate_spectral_density(raw, grid, fgrid, res.L, res.B_R, x.counts());
    res.eig = eigendecompose(res.fx, grid);
    res.R = invert_to_autocov(res.fx, fgrid);

    const Vector noisy = smooth_noisy_diagonal(x, grid, res.B_V);
    const Vector denoised = smooth_diagonal_perpendicular(raw, grid, res.B_R);
    res.sigma2 = estimate_sigma2(noisy, denoised, grid).sigma2;

    const int window = cfg.window == -2 ? res.L : cfg.window;

    if (cfg.reg_param > 0) {
        res.reg_param = cfg.reg_param;
    } else {
        // Holdout selection reusing the pieces estimated above.
        HoldoutState state;
        state.T = T;
        state.S = static_cast<int>(std::floor(0.8 * T));
        state.K_max = kDefaultTrialLags;
        state.eig = res.eig;
        ScalarTS z_train = z;
        for (int t = state.S; t < T; ++t)
            z_train.z[static_cast<std::size_t>(t)] = std::numeric_limits<double>::quiet_NaN();
        state.fzx = estimate_cross_spectral(x, z_train, grid, fgrid, res.L, res.B_C);
        const StackedModel model =
            make_stacked_model(res.fx, fgrid, res.sigma2, window, T, state.K_max);
        state.t_first = state.S + 1 - state.K_max;
        state.curves = blup_latent(x, model, grid, state.t_first, T + state.K_max);
        state.z_test.assign(z.z.begin() + state.S, z.z.end());
        plan.seed = derive_seed(cfg.seed, stream::kHoldout);
        res.reg_param =
            holdout_regularization(state, cfg.regularization(), grid, fgrid, plan, &res.cv_trace);
    }

    res.fzx = estimate_cross_spectral(x, z, grid, fgrid, res.L, res.B_C);
    const TransferEstimate transfer =
        cfg.regularization() == Regularization::truncation
            ? truncation_transfer(res.fzx, res.eig, grid, res.reg_param)
            : tikhonov_transfer(res.fzx, res.eig, grid, res.reg_param);
    const FilterSet trial = filters_from_transfer(transfer, fgrid, kDefaultTrialLags);
    res.M = cfg.M > 0 ? cfg.M : choose_M(trial, grid);
    if (res.M > kDefaultTrialLags) throw ConfigError("M exceeds the trial lag range");
    res.filters = FilterSet::zeros(res.M, grid.p);
    for (int k = -res.M; k <= res.M; ++k) res.filters.at(k) = trial.at(k);
    return res;
}

std::vector<ReplicationRow> run_replication(const SimConfig& sim, const SpatialGrid& grid,
                                            const FrequencyGrid& fgrid, int window) {
    const SimulatedDataset data = simulate_dataset(sim, grid);
    const SimulatedDataset copy = simulate_dataset(sim, grid, true);

    RunConfig cfg;
    cfg.seed = sim.seed;
    cfg.p = grid.p;
    cfg.n_freq = fgrid.n_freq;
    cfg.window = window;

    const int T = sim.T;
    const int S = static_cast<int>(std::floor(0.8 * T));

    std::vector<ReplicationRow> rows;
    for (const char* method : {"truncation", "tikhonov"}) {
        cfg.method = method;
        const EstimationResult est = estimate_scalar_model(data.x, data.z, cfg, grid, fgrid);

        const double delta_B = metric_delta_B(est.filters, data.truth.filters, grid);

        // Forecast the response of an independent copy from its sparse
        // observations, using the dynamics estimated on the original data.
        const int win = cfg.window == -2 ? est.L : cfg.window;
        const StackedModel model =
            make_stacked_model(est.fx, fgrid, est.sigma2, win, T, est.M);
        const ForecastResult fc = forecast_pipeline(copy.x, model, est.filters, grid, S + 1, T);
        std::vector<double> z_true(copy.z.z.begin() + S, copy.z.z.end());
        const double delta_pred = metric_delta_pred(fc.zhat, z_true, copy.truth.var_z);

        // Oracle: true dynamics and true filters on the same copy.
        StackedModel oracle_model{copy.truth.R, copy.truth.sigma2, copy.truth.R.max_lag()};
        const ForecastResult oracle =
            forecast_pipeline(copy.x, oracle_model, copy.truth.filters, grid, S + 1, T);
        const double delta_pred_oracle =
            metric_delta_pred(oracle.zhat, z_true, copy.truth.var_z);

        ReplicationRow row;
        row.process = sim.process == Process::far1 ? "far1" : "fma4";
        row.scheme = sim.scheme == Scheme::reg1 ? "reg1"
                     : sim.scheme == Scheme::reg2 ? "reg2"
                                                  : "reg3";
        row.shape = sim.shape == Shape::A ? "a" : "b";
        row.T = sim.T;
        row.N_max = sim.N_max;
        row.method = method;
        row.delta_B = delta_B;
        row.delta_pred = delta_pred;
        row.delta_pred_oracle = delta_pred_oracle;
        row.seed = sim.seed;
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

void write_scalar_artifacts(const RunConfig& cfg, const EstimationResult& est,
                            const SpatialGrid& grid, const FrequencyGrid& fgrid) {
    write_spectral_csv(cfg.outdir / "spectral.csv", est.fx, grid, fgrid);
    write_cross_spectral_csv(cfg.outdir / "cross_spectral.csv", est.fzx, grid, fgrid);
    write_filters_csv(cfg.outdir / "filters.csv", est.filters, grid);
    if (!est.cv_trace.empty()) write_cv_trace(cfg.outdir / "cv_trace.csv", est.cv_trace);
}

int run_estimate(const RunConfig& cfg) {
    const SpatialGrid grid(cfg.p);
    const FrequencyGrid fgrid(cfg.n_freq);
    const SparseFTS x = ingest_sparse_csv(cfg.sparse_path);
    const ScalarTS z = ingest_scalar_csv(cfg.scalar_path);
    const EstimationResult est = estimate_scalar_model(x, z, cfg, grid, fgrid);
    write_scalar_artifacts(cfg, est, grid, fgrid);

    json metrics;
    metrics["sigma2"] = est.sigma2;
    metrics["L"] = est.L;
    metrics["M"] = est.M;
    metrics["reg_param"] = est.reg_param;
    metrics["method"] = cfg.method;
    write_json(cfg.outdir / "metrics.json", metrics);
    write_json(cfg.outdir / "manifest.json", manifest_base(cfg, &est));
    return 0;
}

int run_forecast(const RunConfig& cfg) {
    const SpatialGrid grid(cfg.p);
    const FrequencyGrid fgrid(cfg.n_freq);
    const SparseFTS x = ingest_sparse_csv(cfg.sparse_path);
    const ScalarTS z = ingest_scalar_csv(cfg.scalar_path);
    const EstimationResult est = estimate_scalar_model(x, z, cfg, grid, fgrid);

    const int T = x.T();
    const int S = last_observed(z);
    int s_lo = S + 1, s_hi = T;
    if (s_lo > s_hi) {
        // Fully observed response: forecast the final 20% for inspection.
        s_lo = std::max(1, T - static_cast<int>(std::ceil(0.2 * T)) + 1);
        s_hi = T;
    }
    const int window = cfg.window == -2 ? est.L : cfg.window;
    const StackedModel model =
        make_stacked_model(est.fx, fgrid, est.sigma2, window, T, est.M);
    const ForecastResult fc = forecast_pipeline(x, model, est.filters, grid, s_lo, s_hi);

    write_scalar_artifacts(cfg, est, grid, fgrid);
    write_forecasts_csv(cfg.outdir / "forecasts.csv", fc.zhat, fc.s_first);

    json metrics;
    metrics["sigma2"] = est.sigma2;
    metrics["L"] = est.L;
    metrics["M"] = est.M;
    metrics["reg_param"] = est.reg_param;
    metrics["method"] = cfg.method;
    metrics["forecast_from"] = s_lo;
    metrics["forecast_to"] = s_hi;
    write_json(cfg.outdir / "metrics.json", metrics);
    write_json(cfg.outdir / "manifest.json", manifest_base(cfg, &est));
    return 0;
}

int run_simulate(const RunConfig& cfg) {
    const SpatialGrid grid(cfg.p);
    const FrequencyGrid fgrid(cfg.n_freq);
    const SimConfig sim = cfg.sim_config();
    const SimulatedDataset data = simulate_dataset(sim, grid);
    const SimulatedDataset copy = simulate_dataset(sim, grid, true);

    write_sparse_csv(cfg.outdir / "sparse.csv", data.x);
    write_scalar_csv(cfg.outdir / "scalar.csv", data.z);
    write_filters_csv(cfg.outdir / "true_filters.csv", data.truth.filters, grid);

    const EstimationResult est = estimate_scalar_model(data.x, data.z, cfg, grid, fgrid);
    write_scalar_artifacts(cfg, est, grid, fgrid);

    const int T = sim.T;
    const int S = static_cast<int>(std::floor(0.8 * T));
    const int window = cfg.window == -2 ? est.L : cfg.window;
    const StackedModel model =
        make_stacked_model(est.fx, fgrid, est.sigma2, window, T, est.M);
    const ForecastResult fc = forecast_pipeline(copy.x, model, est.filters, grid, S + 1, T);
    write_forecasts_csv(cfg.outdir / "forecasts.csv", fc.zhat, fc.s_first);

    std::vector<double> z_true(copy.z.z.begin() + S, copy.z.z.end());
    const double delta_pred = metric_delta_pred(fc.zhat, z_true, copy.truth.var_z);

    StackedModel oracle_model{copy.truth.R, copy.truth.sigma2, copy.truth.R.max_lag()};
    const ForecastResult oracle =
        forecast_pipeline(copy.x, oracle_model, copy.truth.filters, grid, S + 1, T);

    json metrics;
    metrics["sigma2_true"] = data.truth.sigma2;
    metrics["sigma2"] = est.sigma2;
    metrics["L"] = est.L;
    metrics["M"] = est.M;
    metrics["reg_param"] = est.reg_param;
    metrics["method"] = cfg.method;
    metrics["var_z"] = data.truth.var_z;
    metrics["delta_B"] = metric_delta_B(est.filters, data.truth.filters, grid);
    metrics["delta_pred"] = delta_pred;
    metrics["delta_pred_oracle"] = metric_delta_pred(oracle.zhat, z_true, copy.truth.var_z);
    write_json(cfg.outdir / "metrics.json", metrics);
    write_json(cfg.outdir / "manifest.json", manifest_base(cfg, &est));
    return 0;
}

int run_cv(const RunConfig& cfg) {
    const SpatialGrid grid(cfg.p);
    const FrequencyGrid fgrid(cfg.n_freq);
    const SparseFTS x = ingest_sparse_csv(cfg.sparse_path);
    const ScalarTS z = ingest_scalar_csv(cfg.scalar_path);

    CVPlan plan = CVPlan::defaults();
    plan.seed = derive_seed(cfg.seed, stream::kFolds);
    CVTrace trace;
    const BandwidthChoice bw = cv_bandwidths(x, grid, plan, &trace);
    const double B_C = cv_cross_bandwidth(x, z, grid, plan, &trace);

    const int T = x.T();
    const int L = cfg.L > 0 ? cfg.L : std::min(bartlett_span_default(T), T - 1);
    HoldoutInputs inputs{x,  z,  grid, fgrid, L, cfg.B_R > 0 ? cfg.B_R : bw.B_R,
                         cfg.B_V > 0 ? cfg.B_V : bw.B_V,
                         cfg.B_C > 0 ? cfg.B_C : B_C,
                         cfg.window == -2 ? L : cfg.window, kDefaultTrialLags};
    plan.seed = derive_seed(cfg.seed, stream::kHoldout);
    const HoldoutState state = prepare_holdout(inputs);
    const double upsilon =
        holdout_regularization(state, Regularization::truncation, grid, fgrid, plan, &trace);
    const double rho =
        holdout_regularization(state, Regularization::tikhonov, grid, fgrid, plan, &trace);

    write_cv_trace(cfg.outdir / "cv_trace.csv", trace);
    json selected;
    selected["B_R"] = bw.B_R;
    selected["B_V"] = bw.B_V;
    selected["B_C"] = B_C;
    selected["upsilon"] = upsilon;
    selected["rho"] = rho;
    selected["L"] = L;
    write_json(cfg.outdir / "selected.json", selected);
    write_json(cfg.outdir / "manifest.json", manifest_base(cfg, nullptr));
    return 0;
}

int run_reproduce(const RunConfig& cfg) {
    const SpatialGrid grid(cfg.p);
    const FrequencyGrid fgrid(cfg.n_freq);

    std::vector<SimConfig> settings;
    if (cfg.reduced) {
        for (std::uint64_t s = 1; s <= static_cast<std::uint64_t>(cfg.replications); ++s) {
            SimConfig sim;
            sim.process = Process::far1;
            sim.scheme = Scheme::reg1;
            sim.shape = Shape::B;
            sim.T = 300;
            sim.N_max = 40;
            sim.seed = derive_seed(cfg.seed, s);
            settings.push_back(sim);
        }
    } else {
        for (Process proc : {Process::far1, Process::fma4})
            for (Scheme scheme : {Scheme::reg1, Scheme::reg2, Scheme::reg3})
                for (Shape shape : {Shape::A, Shape::B})
                    for (std::uint64_t s = 1; s <= static_cast<std::uint64_t>(cfg.replications);
                         ++s) {
                        SimConfig sim;
                        sim.process = proc;
                        sim.scheme = scheme;
                        sim.shape = shape;
                        sim.T = cfg.T;
                        sim.N_max = cfg.N_max;
                        sim.seed = derive_seed(cfg.seed, (s << 8) ^ static_cast<std::uint64_t>(
                                                             std::hash<std::string>{}(
                                                                 std::to_string(static_cast<int>(
                                                                     proc)) +
                                                                 std::to_string(
                                                                     static_cast<int>(scheme)) +
                                                                 std::to_string(
                                                                     static_cast<int>(shape)))));
                        settings.push_back(sim);
                    }
    }

    std::filesystem::create_directories(cfg.outdir);
    std::ofstream out(cfg.outdir / "reproduce.csv", std::ios::trunc);
    if (!out) throw DataError("cannot write reproduce.csv");
    out << "process,scheme,shape,T,N_max,method,delta_B,delta_pred,delta_pred_oracle,seed\n";
    for (const SimConfig& sim : settings) {
        const auto rows = run_replication(sim, grid, fgrid, cfg.window);
        for (const auto& r : rows)
            out << r.process << ',' << r.scheme << ',' << r.shape << ',' << r.T << ','
                << r.N_max << ',' << r.method << ',' << format_double(r.delta_B) << ','
                << format_double(r.delta_pred) << ',' << format_double(r.delta_pred_oracle)
                << ',' << r.seed << '\n';
    }
    out.close();
    write_json(cfg.outdir / "manifest.json", manifest_base(cfg, nullptr));
    return 0;
}

// Joint model: a second regressor, fully observed or sparse.
int run_joint(const RunConfig& cfg) {
    const SpatialGrid grid(cfg.p);
    const FrequencyGrid fgrid(cfg.n_freq);
    const SparseFTS x1_raw = ingest_sparse_csv(cfg.sparse_path);
    const ScalarTS z_raw = ingest_scalar_csv(cfg.scalar_path);
    x1_raw.validate();
    z_raw.validate();
    const int T = x1_raw.T();
    if (z_raw.T() != T) throw DataError("regressor and response series disagree in length");

    const int L = cfg.L > 0 ? cfg.L : std::min(bartlett_span_default(T), T - 1);

    CVPlan plan = CVPlan::defaults();
    plan.seed = derive_seed(cfg.seed, stream::kFolds);
    CVTrace trace;
    double B_R = cfg.B_R, B_V = cfg.B_V, B_C = cfg.B_C;
    if (B_R <= 0 || B_V <= 0) {
        const BandwidthChoice bw = cv_bandwidths(x1_raw, grid, plan, &trace);
        if (B_R <= 0) B_R = bw.B_R;
        if (B_V <= 0) B_V = bw.B_V;
    }
    if (B_C <= 0) B_C = cv_cross_bandwidth(x1_raw, z_raw, grid, plan, &trace);

    // Means; the sparse mean shares the cross-smoother bandwidth.
    const Vector mean1 = estimate_mean_sparse(x1_raw, grid, B_C);
    double z_bar = 0.0;
    int zn = 0;
    for (double v : z_raw.z)
        if (!ScalarTS::missing(v)) {
            z_bar += v;
            ++zn;
        }
    z_bar /= zn;

    SparseFTS x1 = x1_raw;  // centered
    for (auto& row : x1.obs)
        for (auto& o : row) o.y -= grid.interp1(mean1, o.x);
    ScalarTS z = z_raw;
    for (auto& v : z.z)
        if (!ScalarTS::missing(v)) v -= z_bar;

    // Marginal structure of the sparse regressor.
    const RawCovariances raw1 = raw_covariances(x1, L);
    JointSpectralEstimate joint;
    SpectralDensityEstimate f11 = estimate_spectral_density(raw1, grid, fgrid, L, B_R, x1.counts());
    joint.eig1 = eigendecompose(f11, grid);
    joint.F11 = f11.values;
    const Vector noisy = smooth_noisy_diagonal(x1, grid, B_V);
    const Vector denoised = smooth_diagonal_perpendicular(raw1, grid, B_R);
    const double sigma2 = estimate_sigma2(noisy, denoised, grid).sigma2;
    joint.Fz1 = estimate_cross_spectral(x1, z, grid, fgrid, L, B_C);

    // Second regressor.
    Vector mean2;
    DenseFTS x2_for_forecast;
    if (cfg.regressor2_kind == "dense") {
        const DenseFTS x2 = ingest_dense_csv(cfg.regressor2_path, grid);
        if (x2.T() != T) throw DataError("second regressor disagrees in length");
        const DenseSpectra dense = dense_bartlett(x2, z_raw, grid, fgrid, L);
        mean2 = dense.mean2;
        SpectralDensityEstimate f22_view;
        f22_view.values = dense.F22;
        f22_view.L = L;
        joint.eig2 = eigendecompose(f22_view, grid);
        joint.F22 = std::move(f22_view.values);
        joint.Fz2.values = dense.Fz2;
        joint.Fz2.L = L;
        joint.Fz2.B_C = 0.0;
        joint.F12 = est_cross_sparse_dense(x1_raw, x2, mean1, mean2, grid, fgrid, L, B_R);
        x2_for_forecast = x2;
    } else {
        const SparseFTS x2_raw = ingest_sparse_csv(cfg.regressor2_path);
        if (x2_raw.T() != T) throw DataError("second regressor disagrees in length");
        mean2 = estimate_mean_sparse(x2_raw, grid, B_C);
        SparseFTS x2 = x2_raw;
        for (auto& row : x2.obs)
            for (auto& o : row) o.y -= grid.interp1(mean2, o.x);
        const RawCovariances raw2 = raw_covariances(x2, L);
        SpectralDensityEstimate f22 =
            estimate_spectral_density(raw2, grid, fgrid, L, B_R, x2.counts());
        joint.eig2 = eigendecompose(f22, grid);
        joint.Fz2 = estimate_cross_spectral(x2, z, grid, fgrid, L, B_C);
        const OperatorCrossSpectral f12 =
            est_cross_spectral_functional(x2, x1, grid, fgrid, L, B_R);
        joint.F12 = f12.values;

        // Predict the second series on [1, T]; outside that range the joint
        // forecast mean-pads.
        const Vector noisy2 = smooth_noisy_diagonal(x2, grid, B_V);
        const Vector denoised2 = smooth_diagonal_perpendicular(raw2, grid, B_R);
        const double sigma2_2 = estimate_sigma2(noisy2, denoised2, grid).sigma2;
        const StackedModel model2 = make_stacked_model(
            f22, fgrid, sigma2_2, cfg.window == -2 ? L : cfg.window, T, 0);
        joint.F22 = std::move(f22.values);
        const Matrix curves2 = blup_latent(x2, model2, grid, 1, T);
        x2_for_forecast.curves = (curves2.colwise() + mean2).transpose();
    }

    // Transfers; both regressors share the parameter unless a second one is
    // given.
    const double param1 = cfg.reg_param > 0 ? cfg.reg_param : 0.1 * joint.eig1.sup_lambda1();
    const double param2 = cfg.reg_param2 > 0 ? cfg.reg_param2
                          : cfg.reg_param > 0 ? cfg.reg_param
                                              : 0.1 * joint.eig2.sup_lambda1();
    JointTransfer transfer;
    if (cfg.regularization() == Regularization::truncation) {
        transfer = joint_truncation_transfer(joint, threshold_rank(joint.eig1, param1),
                                             threshold_rank(joint.eig2, param2), grid);
    } else {
        transfer = joint_tikhonov_transfer(joint, param1, param2, grid);
    }

    TransferEstimate t1, t2;
    t1.b = transfer.b1;
    t2.b = transfer.b2;
    const FilterSet trial1 = filters_from_transfer(t1, fgrid, kDefaultTrialLags);
    const FilterSet trial2 = filters_from_transfer(t2, fgrid, kDefaultTrialLags);
    const int M = cfg.M > 0 ? cfg.M : std::max(choose_M(trial1, grid), choose_M(trial2, grid));
    FilterSet f1 = FilterSet::zeros(M, grid.p), f2 = FilterSet::zeros(M, grid.p);
    for (int k = -M; k <= M; ++k) {
        f1.at(k) = trial1.at(k);
        f2.at(k) = trial2.at(k);
    }

    // Forecast the missing tail of the response.
    const int S = last_observed(z_raw);
    int s_lo = S + 1, s_hi = T;
    if (s_lo > s_hi) {
        s_lo = std::max(1, T - static_cast<int>(std::ceil(0.2 * T)) + 1);
        s_hi = T;
    }
    const int window = cfg.window == -2 ? L : cfg.window;
    const StackedModel model1 = make_stacked_model(f11, fgrid, sigma2, window, T, M);
    const Matrix curves1c = blup_latent(x1, model1, grid, s_lo - M, s_hi + M);
    const Matrix curves1 = curves1c.colwise() + mean1;
    const std::vector<double> zhat = joint_forecast(curves1, s_lo - M, f1, mean1,
                                                    x2_for_forecast, f2, mean2, z_bar, grid,
                                                    s_lo, s_hi);

    write_filters_csv(cfg.outdir / "filters.csv", f1, grid);
    write_filters_csv(cfg.outdir / "filters2.csv", f2, grid);
    write_forecasts_csv(cfg.outdir / "forecasts.csv", zhat, s_lo);
    if (!trace.empty()) write_cv_trace(cfg.outdir / "cv_trace.csv", trace);

    json metrics;
    metrics["sigma2"] = sigma2;
    metrics["L"] = L;
    metrics["M"] = M;
    metrics["method"] = cfg.method;
    metrics["reg_param"] = param1;
    metrics["reg_param2"] = param2;
    metrics["z_bar"] = z_bar;
    metrics["forecast_from"] = s_lo;
    metrics["forecast_to"] = s_hi;
    write_json(cfg.outdir / "metrics.json", metrics);
    write_json(cfg.outdir / "manifest.json", manifest_base(cfg, nullptr));
    return 0;
}

}  // namespace

int run_command(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.threads > 0) set_max_threads(cfg.threads);
    if (!cfg.regressor2_path.empty() && (cfg.command == "estimate" || cfg.command == "forecast"))
        return run_joint(cfg);
    if (cfg.command == "estimate") return run_estimate(cfg);
    if (cfg.command == "forecast") return run_forecast(cfg);
    if (cfg.command == "simulate") return run_simulate(cfg);
    if (cfg.command == "cv") return run_cv(cfg);
    if (cfg.command == "reproduce") return run_reproduce(cfg);
    throw ConfigError("unknown command '" + cfg.command + "'");
}

}  // namespace sflr
