#include "physmg/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace physmg::io {

using nlohmann::json;
using nlohmann::ordered_json;

std::string format_double(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& path) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* k) { return key == k; }) == allowed.end())
            throw std::invalid_argument("unknown config field: " + path + key);
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

systems::FamilyConfig parse_family(const json& obj) {
    check_keys(obj, {"kind", "horizon", "x0", "phase", "state_bins", "dt", "pendulum"},
               "family.");
    if (!obj.contains("kind"))
        throw std::invalid_argument("missing config field: family.kind");
    systems::FamilyConfig family;
    family.kind = systems::family_from_string(obj.at("kind").get<std::string>());
    read_field(obj, "horizon", family.horizon);
    read_field(obj, "x0", family.x0);
    read_field(obj, "phase", family.phase);
    read_field(obj, "state_bins", family.state_bins);
    read_field(obj, "dt", family.dt);
    if (auto it = obj.find("pendulum"); it != obj.end()) {
        check_keys(*it, {"m1", "m2", "l1", "l2", "g"}, "family.pendulum.");
        read_field(*it, "m1", family.pendulum.m1);
        read_field(*it, "m2", family.pendulum.m2);
        read_field(*it, "l1", family.pendulum.l1);
        read_field(*it, "l2", family.pendulum.l2);
        read_field(*it, "g", family.pendulum.g);
    }
    family.validate();
    return family;
}

systems::QuantityPrior parse_prior(const json* obj, const systems::FamilyConfig& family) {
    int default_bins = family.kind == systems::FamilyKind::pendulum ? 40 : 64;
    systems::QuantityPrior prior = systems::QuantityPrior::uniform(
        family.quantity_lower(), family.quantity_upper(), default_bins);
    if (obj) {
        check_keys(*obj, {"lower", "upper", "bins", "density"}, "prior.");
        double lower = prior.lower, upper = prior.upper;
        int bins = prior.bins;
        read_field(*obj, "lower", lower);
        read_field(*obj, "upper", upper);
        read_field(*obj, "bins", bins);
        if (auto it = obj->find("density"); it != obj->end()) {
            prior = systems::QuantityPrior{lower, upper, bins,
                                           it->get<std::vector<double>>()};
        } else {
            prior = systems::QuantityPrior::uniform(lower, upper, bins);
        }
    }
    prior.validate();
    return prior;
}

devkernel::KernelConfig parse_kernel(const json& obj) {
    check_keys(obj,
               {"sigma", "run_length", "dense_cutoff", "k_dec_floor", "clip_to_bounds",
                "preserve_endpoints", "randomize_run_phase", "variance_prepass_draws"},
               "kernel.");
    devkernel::KernelConfig kernel;
    read_field(obj, "sigma", kernel.sigma);
    read_field(obj, "run_length", kernel.run_length);
    read_field(obj, "dense_cutoff", kernel.dense_cutoff);
    read_field(obj, "k_dec_floor", kernel.k_dec_floor);
    read_field(obj, "clip_to_bounds", kernel.clip_to_bounds);
    read_field(obj, "preserve_endpoints", kernel.preserve_endpoints);
    read_field(obj, "randomize_run_phase", kernel.randomize_run_phase);
    read_field(obj, "variance_prepass_draws", kernel.variance_prepass_draws);
    kernel.validate();
    return kernel;
}

prediction::PredictionConfig parse_counts(const json& obj) {
    check_keys(obj, {"dataset_size", "samples_per_row", "grid_resolution", "rule"},
               "counts.");
    prediction::PredictionConfig counts;
    read_field(obj, "dataset_size", counts.dataset_size);
    read_field(obj, "samples_per_row", counts.samples_per_row);
    read_field(obj, "grid_resolution", counts.grid_resolution);
    if (auto it = obj.find("rule"); it != obj.end()) {
        std::string rule = it->get<std::string>();
        if (rule == "posterior")
            counts.rule = prediction::RecoveryRule::posterior;
        else if (rule == "mode")
            counts.rule = prediction::RecoveryRule::mode;
        else if (rule == "mean")
            counts.rule = prediction::RecoveryRule::mean;
        else
            throw std::invalid_argument("counts.rule must be posterior, mode, or mean");
    }
    if (counts.dataset_size < 1 || counts.samples_per_row < 1 || counts.grid_resolution < 2)
        throw std::invalid_argument("counts fields must be positive");
    return counts;
}

ordered_json marginal_json(const recovery::BinnedMarginal& marginal) {
    return ordered_json{{"edges", marginal.edges}, {"mass", marginal.mass}};
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
    check_keys(doc, {"family", "prior", "kernel", "counts", "sigmas", "seeds", "output_dir"},
               "");
    if (!doc.contains("family"))
        throw std::invalid_argument("missing config field: family");

    RunConfig config;
    config.family = parse_family(doc.at("family"));
    const json* prior_obj = doc.contains("prior") ? &doc.at("prior") : nullptr;
    config.prior = parse_prior(prior_obj, config.family);
    if (doc.contains("kernel")) config.kernel = parse_kernel(doc.at("kernel"));
    if (doc.contains("counts")) config.counts = parse_counts(doc.at("counts"));
    config.sigmas = prediction::default_sigma_sweep();
    read_field(doc, "sigmas", config.sigmas);
    for (double s : config.sigmas)
        if (!(s >= 0.0)) throw std::invalid_argument("sigmas entries must be >= 0");
    config.seeds = {1};
    read_field(doc, "seeds", config.seeds);
    if (config.seeds.empty()) throw std::invalid_argument("seeds must be non-empty");
    read_field(doc, "output_dir", config.output_dir);
    return config;
}

void write_dataset(const systems::Dataset& dataset, const std::string& csv_path,
                   const std::string& meta_path) {
    std::ofstream csv = open_out(csv_path);
    const int dims = dataset.family.dims();
    csv << "traj_id,t";
    for (int c = 0; c < dims; ++c) csv << ",c" << c;
    csv << "\n";
    for (size_t i = 0; i < dataset.trajectories.size(); ++i) {
        const systems::Trajectory& traj = dataset.trajectories[i];
        for (int t = 0; t < traj.horizon; ++t) {
            csv << i << "," << t;
            for (int c = 0; c < traj.dims; ++c) csv << "," << format_double(traj.at(t, c));
            csv << "\n";
        }
    }

    ordered_json meta;
    meta["family"] = systems::to_string(dataset.family.kind);
    meta["horizon"] = dataset.family.horizon;
    meta["dims"] = dims;
    meta["ranges"] = {{"lo", dataset.normalization.lo}, {"hi", dataset.normalization.hi}};
    meta["state_bins"] = dataset.family.state_bins;
    meta["x0"] = dataset.family.x0;
    meta["phase"] = dataset.family.phase;
    meta["dt"] = dataset.family.dt;
    meta["prior"] = ordered_json{{"lower", dataset.prior.lower},
                                 {"upper", dataset.prior.upper},
                                 {"bins", dataset.prior.bins},
                                 {"density", dataset.prior.density}};
    std::vector<double> quantities;
    bool all_known = true;
    for (const auto& traj : dataset.trajectories) {
        if (!traj.has_quantity) {
            all_known = false;
            break;
        }
        quantities.push_back(traj.quantity_true);
    }
    if (all_known && !quantities.empty()) meta["quantities"] = quantities;
    open_out(meta_path) << meta.dump(2) << "\n";
}

systems::Dataset ingest_trajectories(const std::string& csv_path,
                                     const std::string& meta_path) {
    json meta;
    std::ifstream meta_in = open_in(meta_path);
    try {
        meta = json::parse(std::string(std::istreambuf_iterator<char>(meta_in),
                                       std::istreambuf_iterator<char>()));
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("metadata is not valid JSON: ") + e.what());
    }
    for (const char* key : {"horizon", "dims", "ranges"})
        if (!meta.contains(key))
            throw std::invalid_argument(std::string("metadata missing field: ") + key);

    systems::Dataset dataset;
    if (meta.contains("family"))
        dataset.family.kind = systems::family_from_string(meta.at("family").get<std::string>());
    const int horizon = meta.at("horizon").get<int>();
    const int dims = meta.at("dims").get<int>();
    if (horizon < 1 || dims < 1)
        throw std::invalid_argument("metadata horizon and dims must be >= 1");
    dataset.family.horizon = horizon;
    read_field(meta, "state_bins", dataset.family.state_bins);
    read_field(meta, "x0", dataset.family.x0);
    read_field(meta, "phase", dataset.family.phase);
    read_field(meta, "dt", dataset.family.dt);
    dataset.normalization.lo = meta.at("ranges").at("lo").get<std::vector<double>>();
    dataset.normalization.hi = meta.at("ranges").at("hi").get<std::vector<double>>();
    if (static_cast<int>(dataset.normalization.lo.size()) != dims ||
        static_cast<int>(dataset.normalization.hi.size()) != dims)
        throw std::invalid_argument("metadata ranges must have one entry per coordinate");
    if (meta.contains("prior")) {
        const json& p = meta.at("prior");
        dataset.prior = systems::QuantityPrior{p.at("lower").get<double>(),
                                               p.at("upper").get<double>(),
                                               p.at("bins").get<int>(),
                                               p.at("density").get<std::vector<double>>()};
        dataset.prior.validate();
    }

    std::ifstream csv = open_in(csv_path);
    std::string line;
    // id -> (timestep -> values), first-appearance order preserved separately
    std::map<std::string, std::map<int, std::vector<double>>> rows;
    std::vector<std::string> order;
    long row_number = 0;
    while (std::getline(csv, line)) {
        ++row_number;
        if (line.empty()) continue;
        if (row_number == 1 && line.rfind("traj_id", 0) == 0) continue;
        std::istringstream fields(line);
        std::string token;
        std::vector<std::string> parts;
        while (std::getline(fields, token, ',')) parts.push_back(token);
        if (static_cast<int>(parts.size()) != 2 + dims)
            throw std::invalid_argument("row " + std::to_string(row_number) +
                                        ": expected " + std::to_string(2 + dims) + " fields");
        const std::string& id = parts[0];
        int t = 0;
        auto [p1, e1] = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), t);
        if (e1 != std::errc{} || p1 != parts[1].data() + parts[1].size())
            throw std::invalid_argument("row " + std::to_string(row_number) +
                                        ": bad timestep '" + parts[1] + "'");
        std::vector<double> values(static_cast<size_t>(dims));
        for (int c = 0; c < dims; ++c) {
            const std::string& f = parts[static_cast<size_t>(2 + c)];
            char* end = nullptr;
            double v = std::strtod(f.c_str(), &end);
            if (end != f.c_str() + f.size() || f.empty())
                throw std::invalid_argument("row " + std::to_string(row_number) +
                                            ": bad value '" + f + "'");
            if (!std::isfinite(v))
                throw std::invalid_argument("row " + std::to_string(row_number) +
                                            ": non-finite value");
            values[static_cast<size_t>(c)] = v;
        }
        auto [it, inserted] = rows.try_emplace(id);
        if (inserted) order.push_back(id);
        if (!it->second.emplace(t, std::move(values)).second)
            throw std::invalid_argument("trajectory '" + id + "': duplicate timestep " +
                                        std::to_string(t));
    }
    if (order.empty()) throw std::invalid_argument("no trajectories in " + csv_path);

    std::vector<double> quantities;
    if (meta.contains("quantities"))
        quantities = meta.at("quantities").get<std::vector<double>>();
    if (!quantities.empty() && quantities.size() != order.size())
        throw std::invalid_argument("metadata quantities count does not match trajectories");

    for (size_t i = 0; i < order.size(); ++i) {
        const auto& steps = rows.at(order[i]);
        if (static_cast<int>(steps.size()) != horizon)
            throw std::invalid_argument("trajectory '" + order[i] + "': expected " +
                                        std::to_string(horizon) + " timesteps, got " +
                                        std::to_string(steps.size()));
        systems::Trajectory traj;
        traj.horizon = horizon;
        traj.dims = dims;
        traj.values.resize(static_cast<size_t>(horizon) * static_cast<size_t>(dims));
        for (int t = 0; t < horizon; ++t) {
            auto it = steps.find(t);
            if (it == steps.end())
                throw std::invalid_argument("trajectory '" + order[i] +
                                            "': missing timestep " + std::to_string(t));
            for (int c = 0; c < dims; ++c) traj.at(t, c) = it->second[static_cast<size_t>(c)];
        }
        if (!quantities.empty()) {
            traj.has_quantity = true;
            traj.quantity_true = quantities[i];
        }
        dataset.trajectories.push_back(std::move(traj));
    }
    return dataset;
}

void write_marginal_csv(const recovery::BinnedMarginal& marginal, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "bin_lo,bin_hi,mass\n";
    for (size_t b = 0; b < marginal.mass.size(); ++b)
        out << format_double(marginal.edges[b]) << "," << format_double(marginal.edges[b + 1])
            << "," << format_double(marginal.mass[b]) << "\n";
}

recovery::BinnedMarginal read_marginal_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    recovery::BinnedMarginal marginal;
    std::string line;
    long row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        if (row == 1 && line.rfind("bin_lo", 0) == 0) continue;
        std::istringstream fields(line);
        std::string lo, hi, mass;
        if (!std::getline(fields, lo, ',') || !std::getline(fields, hi, ',') ||
            !std::getline(fields, mass, ','))
            throw std::invalid_argument(path + " row " + std::to_string(row) +
                                        ": expected bin_lo,bin_hi,mass");
        if (marginal.edges.empty()) marginal.edges.push_back(std::stod(lo));
        marginal.edges.push_back(std::stod(hi));
        marginal.mass.push_back(std::stod(mass));
    }
    marginal.validate();
    return marginal;
}

std::string report_to_json(const prediction::DriftReport& report) {
    ordered_json doc;
    doc["sigma"] = report.sigma;
    doc["seed"] = report.seed;
    doc["tv_data_prior"] = report.tv_data_prior;
    doc["tv_pred_prior"] = report.tv_pred_prior;
    doc["tv_pred_data"] = report.tv_pred_data;
    doc["out_of_range_count"] = report.out_of_range_count;
    doc["edges"] = report.prior_marginal.edges;
    doc["prior"] = report.prior_marginal.mass;
    doc["data_marginal"] = report.data_marginal.mass;
    doc["predicted_marginal"] = report.predicted_marginal.mass;
    doc["signed_drift"] = report.drift;
    return doc.dump(2);
}

void write_report(const prediction::DriftReport& report, const std::string& path) {
    open_out(path) << report_to_json(report) << "\n";
}

void write_kde_csv(const recovery::BinnedMarginal& marginal, const std::string& path,
                   int points) {
    if (points < 2) throw std::invalid_argument("write_kde_csv: points must be >= 2");
    const size_t b_count = marginal.mass.size();
    std::vector<double> centers(b_count);
    for (size_t b = 0; b < b_count; ++b)
        centers[b] = 0.5 * (marginal.edges[b] + marginal.edges[b + 1]);

    double mean = 0.0;
    for (size_t b = 0; b < b_count; ++b) mean += marginal.mass[b] * centers[b];
    double var = 0.0, n_eff_inv = 0.0;
    for (size_t b = 0; b < b_count; ++b) {
        var += marginal.mass[b] * (centers[b] - mean) * (centers[b] - mean);
        n_eff_inv += marginal.mass[b] * marginal.mass[b];
    }
    // Quartiles of the binned CDF, for the robust spread term.
    auto quantile = [&](double q) {
        double acc = 0.0;
        for (size_t b = 0; b < b_count; ++b) {
            if (acc + marginal.mass[b] >= q) {
                double frac = marginal.mass[b] > 0.0 ? (q - acc) / marginal.mass[b] : 0.0;
                return marginal.edges[b] + frac * (marginal.edges[b + 1] - marginal.edges[b]);
            }
            acc += marginal.mass[b];
        }
        return marginal.edges.back();
    };
    double iqr = quantile(0.75) - quantile(0.25);
    double spread = std::sqrt(var);
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    double n_eff = n_eff_inv > 0.0 ? 1.0 / n_eff_inv : 1.0;
    double h = 0.9 * spread * std::pow(n_eff, -0.2);
    if (!(h > 0.0)) h = marginal.edges[1] - marginal.edges[0];

    std::ofstream out = open_out(path);
    out << "r,density\n";
    const double lo = marginal.edges.front(), hi = marginal.edges.back();
    const double inv_norm = 1.0 / (h * std::sqrt(2.0 * M_PI));
    for (int i = 0; i < points; ++i) {
        double r = lo + (hi - lo) * i / (points - 1);
        double f = 0.0;
        for (size_t b = 0; b < b_count; ++b) {
            double z = (r - centers[b]) / h;
            f += marginal.mass[b] * std::exp(-0.5 * z * z);
        }
        out << format_double(r) << "," << format_double(f * inv_norm) << "\n";
    }
}

void write_reweight_csv(const mitigation::ReweightPlan& plan, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "traj_id,weight\n";
    for (size_t i = 0; i < plan.weights.size(); ++i)
        out << i << "," << format_double(plan.weights[i]) << "\n";
}

std::string pairing_to_json(const mitigation::Pairing& pairing) {
    ordered_json doc;
    doc["objective"] = pairing.objective;
    doc["assignment"] = pairing.assignment;
    doc["trace"] = pairing.trace;
    return doc.dump(2);
}

}  // namespace physmg::io
