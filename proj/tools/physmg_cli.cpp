#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "physmg.h"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot read config file: " << path << "\n";
        std::exit(2);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int finish(physmg_ctx* ctx, int rc) {
    if (rc != PHYSMG_OK) std::cerr << "error: " << physmg_last_error(ctx) << "\n";
    physmg_ctx_free(ctx);
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physical-quantity drift analysis for trajectory datasets"};
    app.require_subcommand(1);

    std::string config_path, out_dir, csv_path, meta_path, mode = "reweight";
    std::string family;
    double r = 0.0, x0 = 0.25;
    int horizon = 10000;
    if (const char* env = std::getenv("PHYSMG_OUT")) out_dir = env;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON configuration file")->required();
        cmd->add_option("--out", out_dir, "output directory (default: PHYSMG_OUT or config)");
    };

    CLI::App* generate = app.add_subcommand("generate", "sample a dataset to CSV");
    add_config(generate);
    CLI::App* recover = app.add_subcommand("recover", "recover quantities and marginal");
    add_config(recover);
    recover->add_option("--csv", csv_path, "ingest this trajectory CSV instead of sampling");
    recover->add_option("--meta", meta_path, "metadata sidecar for --csv");
    CLI::App* predict = app.add_subcommand("predict", "write a drift report at kernel.sigma");
    add_config(predict);
    CLI::App* sweep = app.add_subcommand("sweep", "drift reports across the sigma sweep");
    add_config(sweep);
    CLI::App* audit = app.add_subcommand("audit", "drift of externally generated samples");
    add_config(audit);
    audit->add_option("--csv", csv_path, "sample trajectory CSV")->required();
    audit->add_option("--meta", meta_path, "metadata sidecar")->required();
    CLI::App* mitigate = app.add_subcommand("mitigate", "reweight or transform mitigation");
    add_config(mitigate);
    mitigate->add_option("--mode", mode, "reweight | transform")
        ->check(CLI::IsMember({"reweight", "transform"}));
    CLI::App* lyapunov = app.add_subcommand("lyapunov", "finite and closed-form exponents");
    lyapunov->add_option("--family", family, "sinusoid | tent | logistic")->required();
    lyapunov->add_option("--r", r, "quantity value")->required();
    lyapunov->add_option("--x0", x0, "initial state");
    lyapunov->add_option("--horizon", horizon, "finite horizon");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    physmg_ctx* ctx = physmg_ctx_new();
    if (!ctx) {
        std::cerr << "error: out of memory\n";
        return 1;
    }
    const char* out = out_dir.empty() ? nullptr : out_dir.c_str();

    if (generate->parsed())
        return finish(ctx, physmg_generate(ctx, read_file(config_path).c_str(), out));
    if (recover->parsed())
        return finish(ctx, physmg_recover(ctx, read_file(config_path).c_str(),
                                          csv_path.empty() ? nullptr : csv_path.c_str(),
                                          meta_path.empty() ? nullptr : meta_path.c_str(),
                                          out));
    if (predict->parsed())
        return finish(ctx, physmg_predict(ctx, read_file(config_path).c_str(), out));
    if (sweep->parsed())
        return finish(ctx, physmg_sweep(ctx, read_file(config_path).c_str(), out));
    if (audit->parsed())
        return finish(ctx, physmg_audit(ctx, read_file(config_path).c_str(), csv_path.c_str(),
                                        meta_path.c_str(), out));
    if (mitigate->parsed())
        return finish(ctx,
                      physmg_mitigate(ctx, read_file(config_path).c_str(), mode.c_str(), out));
    if (lyapunov->parsed()) {
        double lam = 0.0, closed = 0.0;
        int rc = physmg_lyapunov(ctx, family.c_str(), r, x0, horizon, &lam, &closed);
        if (rc == PHYSMG_OK) {
            std::cout.precision(17);
            std::cout << "finite " << lam << "\n";
            std::cout << "closed " << closed << "\n";
        }
        return finish(ctx, rc);
    }
    physmg_ctx_free(ctx);
    return 2;
}
