#include "sflr/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

void add_common_flags(CLI::App* cmd, sflr::RunConfig& cfg) {
    cmd->add_option("--outdir", cfg.outdir, "Output directory")
        ->envname("SFLR_OUTDIR")
        ->capture_default_str();
    cmd->add_option("--threads", cfg.threads, "Worker thread cap (0 = all cores)")
        ->envname("SFLR_THREADS")
        ->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    cmd->add_option("--p", cfg.p, "Spatial grid size")->capture_default_str();
    cmd->add_option("--nfreq", cfg.n_freq, "Frequency grid size")->capture_default_str();
    cmd->add_option("--L", cfg.L, "Bartlett span (0 = floor(2 T^{1/3}))")
        ->capture_default_str();
    cmd->add_option("--br", cfg.B_R, "Surface bandwidth (0 = cross-validate)")
        ->capture_default_str();
    cmd->add_option("--bv", cfg.B_V, "Diagonal bandwidth (0 = cross-validate)")
        ->capture_default_str();
    cmd->add_option("--bc", cfg.B_C, "Cross bandwidth (0 = cross-validate)")
        ->capture_default_str();
    cmd->add_option("--method", cfg.method, "Regularization: tikhonov|truncation")
        ->capture_default_str();
    cmd->add_option("--param", cfg.reg_param, "Regularization parameter (0 = holdout CV)")
        ->capture_default_str();
    cmd->add_option("--param2", cfg.reg_param2, "Second-regressor parameter (joint model)")
        ->capture_default_str();
    cmd->add_option("--M", cfg.M, "Filter lag span (0 = auto by the 1% rule)")
        ->capture_default_str();
    cmd->add_option("--window", cfg.window,
                    "BLUP conditioning half-width (-1 = all data, default L)")
        ->capture_default_str();
}

void add_data_flags(CLI::App* cmd, sflr::RunConfig& cfg, bool required) {
    auto* sparse = cmd->add_option("--sparse", cfg.sparse_path, "Sparse regressor CSV (t,x,y)");
    auto* scalar = cmd->add_option("--scalar", cfg.scalar_path, "Response CSV (t,z)");
    if (required) {
        sparse->required();
        scalar->required();
    }
    cmd->add_option("--regressor2", cfg.regressor2_path,
                    "Second regressor CSV; activates the joint model");
    cmd->add_option("--regressor2-kind", cfg.regressor2_kind, "dense|sparse")
        ->capture_default_str();
}

void add_sim_flags(CLI::App* cmd, sflr::RunConfig& cfg) {
    cmd->add_option("--process", cfg.process, "far1|fma4")->capture_default_str();
    cmd->add_option("--scheme", cfg.scheme, "reg1|reg2|reg3")->capture_default_str();
    cmd->add_option("--shape", cfg.shape, "a|b")->capture_default_str();
    cmd->add_option("--T", cfg.T, "Series length")->capture_default_str();
    cmd->add_option("--nmax", cfg.N_max, "Max observations per curve")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Functional lagged regression from sparse noisy observations"};
    app.require_subcommand(1);

    sflr::RunConfig cfg;

    CLI::App* estimate =
        app.add_subcommand("estimate", "Estimate spectral structure and filter coefficients");
    add_data_flags(estimate, cfg, true);
    add_common_flags(estimate, cfg);

    CLI::App* forecast = app.add_subcommand("forecast", "Estimate and forecast the response");
    add_data_flags(forecast, cfg, true);
    add_common_flags(forecast, cfg);

    CLI::App* simulate =
        app.add_subcommand("simulate", "Simulate a study setting and run the full pipeline");
    add_sim_flags(simulate, cfg);
    add_common_flags(simulate, cfg);

    CLI::App* cv = app.add_subcommand("cv", "Cross-validate bandwidths and regularization");
    add_data_flags(cv, cfg, true);
    add_common_flags(cv, cfg);

    CLI::App* reproduce =
        app.add_subcommand("reproduce", "Run the simulation grid and emit per-replication rows");
    reproduce->add_flag("--reduced", cfg.reduced, "Reduced desk-scale grid");
    reproduce->add_option("--replications", cfg.replications, "Seeds per setting")
        ->capture_default_str();
    add_sim_flags(reproduce, cfg);
    add_common_flags(reproduce, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    for (CLI::App* sub : {estimate, forecast, simulate, cv, reproduce})
        if (sub->parsed()) cfg.command = sub->get_name();

    try {
        return sflr::run_command(cfg);
    } catch (const sflr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const sflr::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const sflr::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
