#include "physmg.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "physmg/io.hpp"

struct physmg_ctx {
    std::string error;
};

namespace {

namespace fs = std::filesystem;
using physmg::io::RunConfig;

template <typename F>
int guarded(physmg_ctx* ctx, F&& body) {
    if (!ctx) return PHYSMG_ERR_INVALID;
    ctx->error.clear();
    try {
        body();
        return PHYSMG_OK;
    } catch (const std::invalid_argument& e) {
        ctx->error = e.what();
        return PHYSMG_ERR_INVALID;
    } catch (const std::domain_error& e) {
        ctx->error = e.what();
        return PHYSMG_ERR_INVALID;
    } catch (const std::exception& e) {
        ctx->error = e.what();
        return PHYSMG_ERR_RUNTIME;
    }
}

RunConfig load_config(const char* config_json) {
    if (!config_json) throw std::invalid_argument("config document is required");
    return physmg::io::parse_config(config_json);
}

fs::path resolve_out(const RunConfig& config, const char* out_dir) {
    fs::path dir = (out_dir && *out_dir) ? fs::path(out_dir) : fs::path(config.output_dir);
    fs::create_directories(dir);
    return dir;
}

physmg::systems::Dataset make_dataset(const RunConfig& config) {
    if (config.family.kind == physmg::systems::FamilyKind::pendulum)
        return physmg::systems::curate_pendulum_dataset(
            config.family, config.prior, config.counts.dataset_size, config.seeds.front());
    return physmg::systems::sample_dataset(config.family, config.prior,
                                           config.counts.dataset_size, config.seeds.front());
}

physmg::recovery::BinnedMarginal posterior_pullback(
    const physmg::recovery::ReferenceGrid& grid, const physmg::systems::Dataset& dataset,
    const physmg::systems::QuantityPrior& prior) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(dataset.size()), grid.references.cols());
    for (size_t i = 0; i < dataset.size(); ++i)
        x.row(static_cast<Eigen::Index>(i)) =
            physmg::recovery::normalized_row(dataset.trajectories[i], grid.normalization);
    return physmg::recovery::pullback_marginal(
        physmg::recovery::recover_binned_batch(grid, x, prior), prior);
}

void write_report_bundle(const physmg::prediction::DriftReport& report, const fs::path& dir,
                         const std::string& stem) {
    physmg::io::write_report(report, (dir / (stem + ".json")).string());
    physmg::io::write_marginal_csv(report.data_marginal,
                                   (dir / (stem + "_data_marginal.csv")).string());
    physmg::io::write_marginal_csv(report.predicted_marginal,
                                   (dir / (stem + "_predicted_marginal.csv")).string());
    physmg::io::write_kde_csv(report.data_marginal, (dir / (stem + "_data_kde.csv")).string());
    physmg::io::write_kde_csv(report.predicted_marginal,
                              (dir / (stem + "_predicted_kde.csv")).string());
}

}  // namespace

extern "C" {

physmg_ctx* physmg_ctx_new(void) { return new (std::nothrow) physmg_ctx; }

void physmg_ctx_free(physmg_ctx* ctx) { delete ctx; }

const char* physmg_last_error(const physmg_ctx* ctx) {
    return ctx ? ctx->error.c_str() : "null context";
}

int physmg_generate(physmg_ctx* ctx, const char* config_json, const char* out_dir) {
    return guarded(ctx, [&] {
        RunConfig config = load_config(config_json);
        fs::path dir = resolve_out(config, out_dir);
        physmg::systems::Dataset dataset = make_dataset(config);
        physmg::io::write_dataset(dataset, (dir / "dataset.csv").string(),
                                  (dir / "dataset_meta.json").string());
    });
}

int physmg_recover(physmg_ctx* ctx, const char* config_json, const char* csv_path,
                   const char* meta_path, const char* out_dir) {
    return guarded(ctx, [&] {
        RunConfig config = load_config(config_json);
        fs::path dir = resolve_out(config, out_dir);
        physmg::systems::Dataset dataset =
            csv_path ? physmg::io::ingest_trajectories(
                           csv_path, meta_path ? meta_path : std::string(csv_path) + ".json")
                     : make_dataset(config);

        std::ofstream rec((dir / "recoveries.csv").string());
        if (!rec) throw std::runtime_error("cannot open recoveries.csv for writing");
        physmg::recovery::BinnedMarginal marginal;
        if (config.family.kind == physmg::systems::FamilyKind::pendulum) {
            std::vector<double> energies;
            rec << "traj_id,energy\n";
            for (size_t i = 0; i < dataset.size(); ++i) {
                double e = physmg::recovery::recover_pendulum_energy(dataset.trajectories[i],
                                                                     config.family);
                energies.push_back(e);
                rec << i << "," << physmg::io::format_double(e) << "\n";
            }
            marginal = physmg::recovery::pullback_scalars(energies, config.prior);
        } else {
            physmg::recovery::ReferenceGrid grid = physmg::recovery::build_reference_grid(
                config.family, config.prior, config.counts.grid_resolution);
            rec << "traj_id,mode,mean\n";
            for (size_t i = 0; i < dataset.size(); ++i) {
                auto post = physmg::recovery::recover_posterior(grid, dataset.trajectories[i],
                                                                config.prior);
                rec << i << ","
                    << physmg::io::format_double(
                           physmg::recovery::summarize(post, physmg::recovery::SummaryRule::mode))
                    << ","
                    << physmg::io::format_double(
                           physmg::recovery::summarize(post, physmg::recovery::SummaryRule::mean))
                    << "\n";
            }
            marginal = posterior_pullback(grid, dataset, config.prior);
        }
        physmg::io::write_marginal_csv(marginal, (dir / "marginal.csv").string());
    });
}

int physmg_predict(physmg_ctx* ctx, const char* config_json, const char* out_dir) {
    return guarded(ctx, [&] {
        RunConfig config = load_config(config_json);
        fs::path dir = resolve_out(config, out_dir);
        physmg::prediction::DriftReport report = physmg::prediction::drift_report(
            config.family, config.prior, config.kernel, config.counts, config.seeds.front());
        write_report_bundle(report, dir, "drift_report");
    });
}

int physmg_sweep(physmg_ctx* ctx, const char* config_json, const char* out_dir) {
    return guarded(ctx, [&] {
        RunConfig config = load_config(config_json);
        fs::path dir = resolve_out(config, out_dir);
        std::vector<physmg::prediction::DriftReport> reports = physmg::prediction::sigma_sweep(
            config.family, config.prior, config.kernel, config.counts, config.sigmas,
            config.seeds.front());
        std::ofstream summary((dir / "sweep_summary.csv").string());
        if (!summary) throw std::runtime_error("cannot open sweep_summary.csv for writing");
        summary << "sigma,tv_pred_prior,tv_pred_data,tv_data_prior\n";
        for (size_t i = 0; i < reports.size(); ++i) {
            char stem[32];
            std::snprintf(stem, sizeof(stem), "report_%02zu", i);
            write_report_bundle(reports[i], dir, stem);
            summary << physmg::io::format_double(reports[i].sigma) << ","
                    << physmg::io::format_double(reports[i].tv_pred_prior) << ","
                    << physmg::io::format_double(reports[i].tv_pred_data) << ","
                    << physmg::io::format_double(reports[i].tv_data_prior) << "\n";
        }
    });
}

int physmg_audit(physmg_ctx* ctx, const char* config_json, const char* csv_path,
                 const char* meta_path, const char* out_dir) {
    return guarded(ctx, [&] {
        RunConfig config = load_config(config_json);
        if (!csv_path || !meta_path)
            throw std::invalid_argument("audit requires sample CSV and metadata paths");
        fs::path dir = resolve_out(config, out_dir);
        physmg::systems::Dataset model = physmg::io::ingest_trajectories(csv_path, meta_path);
        physmg::systems::Dataset data = make_dataset(config);

        physmg::recovery::ReferenceGrid grid = physmg::recovery::build_reference_grid(
            config.family, config.prior, config.counts.grid_resolution);
        physmg::recovery::BinnedMarginal model_marginal =
            posterior_pullback(grid, model, config.prior);
        physmg::recovery::BinnedMarginal data_marginal =
            posterior_pullback(grid, data, config.prior);
        physmg::recovery::BinnedMarginal prior_marginal =
            physmg::recovery::uniform_marginal(config.prior);

        nlohmann::ordered_json doc;
        doc["n_model"] = model.size();
        doc["n_data"] = data.size();
        doc["tv_model_prior"] = physmg::prediction::tv_distance(model_marginal, prior_marginal);
        doc["tv_model_data"] = physmg::prediction::tv_distance(model_marginal, data_marginal);
        doc["tv_data_prior"] = physmg::prediction::tv_distance(data_marginal, prior_marginal);
        doc["edges"] = prior_marginal.edges;
        doc["model_marginal"] = model_marginal.mass;
        doc["data_marginal"] = data_marginal.mass;
        std::ofstream out((dir / "audit.json").string());
        if (!out) throw std::runtime_error("cannot open audit.json for writing");
        out << doc.dump(2) << "\n";
        physmg::io::write_marginal_csv(model_marginal, (dir / "model_marginal.csv").string());
        physmg::io::write_kde_csv(model_marginal, (dir / "model_kde.csv").string());
    });
}

int physmg_mitigate(physmg_ctx* ctx, const char* config_json, const char* mode,
                    const char* out_dir) {
    return guarded(ctx, [&] {
        RunConfig config = load_config(config_json);
        std::string which = mode ? mode : "reweight";
        if (which != "reweight" && which != "transform")
            throw std::invalid_argument("mitigate mode must be 'reweight' or 'transform'");
        fs::path dir = resolve_out(config, out_dir);

        physmg::systems::Dataset dataset = make_dataset(config);
        physmg::recovery::ReferenceGrid grid = physmg::recovery::build_reference_grid(
            config.family, config.prior, config.counts.grid_resolution);
        Eigen::MatrixXd x(static_cast<Eigen::Index>(dataset.size()), grid.references.cols());
        for (size_t i = 0; i < dataset.size(); ++i)
            x.row(static_cast<Eigen::Index>(i)) =
                physmg::recovery::normalized_row(dataset.trajectories[i], grid.normalization);
        Eigen::MatrixXd binned = physmg::recovery::recover_binned_batch(grid, x, config.prior);

        std::vector<int> bin_of(dataset.size());
        std::vector<double> recovered(dataset.size());
        for (size_t i = 0; i < dataset.size(); ++i) {
            auto post = physmg::recovery::recover_posterior(grid, dataset.trajectories[i],
                                                            config.prior);
            recovered[i] =
                physmg::recovery::summarize(post, physmg::recovery::SummaryRule::mode);
            bin_of[i] = config.prior.bin_of(recovered[i]);
        }
        physmg::recovery::BinnedMarginal model_marginal =
            physmg::recovery::pullback_scalars(recovered, config.prior);

        if (which == "reweight") {
            physmg::mitigation::ReweightPlan plan = physmg::mitigation::compute_reweight(
                recovered, config.prior, model_marginal);
            physmg::io::write_reweight_csv(plan, (dir / "reweight.csv").string());
            physmg::io::write_marginal_csv(physmg::mitigation::inverse_prior(model_marginal),
                                           (dir / "inverse_prior.csv").string());
            return;
        }

        const int n = static_cast<int>(dataset.size());
        std::vector<physmg::recovery::BinnedMarginal> nu(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            nu[static_cast<size_t>(i)].edges = config.prior.edges();
            nu[static_cast<size_t>(i)].mass.resize(static_cast<size_t>(binned.cols()));
            for (Eigen::Index j = 0; j < binned.cols(); ++j)
                nu[static_cast<size_t>(i)].mass[static_cast<size_t>(j)] = binned(i, j);
        }
        physmg::mitigation::CodeSupport support = physmg::mitigation::latin_hypercube(
            n, config.family.horizon * config.family.dims(), config.seeds.front());
        physmg::mitigation::DecoderMatrix m = physmg::mitigation::decoder_matrix(
            support, config.kernel, 8, 64, config.seeds.front());
        physmg::mitigation::Pairing pairing = physmg::mitigation::init_pairing(
            m, nu, config.prior, config.seeds.front());
        double initial_objective = pairing.objective;
        physmg::mitigation::SwapOptions options;
        options.seed = config.seeds.front();
        pairing = physmg::mitigation::swap_optimize(m, nu, config.prior, bin_of,
                                                    std::move(pairing), options);
        std::ofstream out((dir / "pairing.json").string());
        if (!out) throw std::runtime_error("cannot open pairing.json for writing");
        out << physmg::io::pairing_to_json(pairing) << "\n";

        nlohmann::ordered_json summary;
        summary["initial_objective"] = initial_objective;
        summary["final_objective"] = pairing.objective;
        summary["accepted_swaps"] = pairing.trace.size() - 1;
        std::ofstream sum((dir / "transform_summary.json").string());
        if (!sum) throw std::runtime_error("cannot open transform_summary.json for writing");
        sum << summary.dump(2) << "\n";
    });
}

int physmg_lyapunov(physmg_ctx* ctx, const char* family, double r, double x0, int horizon,
                    double* lambda_finite, double* lambda_closed) {
    return guarded(ctx, [&] {
        if (!family) throw std::invalid_argument("family name is required");
        if (!lambda_finite || !lambda_closed)
            throw std::invalid_argument("output pointers are required");
        physmg::systems::FamilyConfig config;
        config.kind = physmg::systems::family_from_string(family);
        config.horizon = horizon > 0 ? horizon : 10000;
        config.x0 = x0;
        *lambda_finite = physmg::systems::lyapunov_finite(config, r, x0);
        double closed = std::numeric_limits<double>::quiet_NaN();
        switch (config.kind) {
            case physmg::systems::FamilyKind::sinusoid:
                closed = 0.0;
                break;
            case physmg::systems::FamilyKind::tent:
                if (r > 0.0) closed = std::log(r);
                break;
            case physmg::systems::FamilyKind::logistic:
                if (r > 1.0 && r < 3.0)
                    closed = std::log(std::fabs(2.0 - r));
                else if (r == 4.0)
                    closed = std::log(2.0);
                break;
            default:
                break;
        }
        *lambda_closed = closed;
    });
}

}  // extern "C"
