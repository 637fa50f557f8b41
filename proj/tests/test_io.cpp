#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "physmg/dataset.hpp"
#include "physmg/io.hpp"

using namespace physmg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("physmg_io_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("format_double round-trips and is shortest") {
    CHECK(io::format_double(0.1) == "0.1");
    CHECK(io::format_double(1.0) == "1");
    CHECK(io::format_double(0.30000000000000004) == "0.30000000000000004");
    double ugly = 1.0 / 3.0;
    CHECK(std::stod(io::format_double(ugly)) == ugly);
}

TEST_CASE("parse_config fills defaults") {
    io::RunConfig c = io::parse_config(R"({"family": {"kind": "tent"}})");
    CHECK(c.family.kind == systems::FamilyKind::tent);
    CHECK(c.family.horizon == 64);
    CHECK(c.family.x0 == 0.25);
    CHECK(c.family.state_bins == 1024);
    CHECK(c.prior.lower == 0.0);
    CHECK(c.prior.upper == 2.0);
    CHECK(c.prior.bins == 64);
    CHECK(c.kernel.sigma == 0.0);
    CHECK(c.sigmas == prediction::default_sigma_sweep());
    CHECK(c.seeds == std::vector<std::uint64_t>{1});
    CHECK(c.output_dir == ".");
}

TEST_CASE("parse_config pendulum defaults to 40 energy bins") {
    io::RunConfig c = io::parse_config(R"({"family": {"kind": "pendulum"}})");
    CHECK(c.prior.bins == 40);
    CHECK(c.prior.lower == 5.0);
    CHECK(c.prior.upper == 40.0);
}

TEST_CASE("parse_config honors explicit fields") {
    io::RunConfig c = io::parse_config(R"({
        "family": {"kind": "logistic", "horizon": 32, "x0": 0.3},
        "prior": {"lower": 1.0, "upper": 4.0, "bins": 16},
        "kernel": {"sigma": 0.02, "run_length": 4},
        "counts": {"dataset_size": 500, "samples_per_row": 50, "rule": "mode"},
        "sigmas": [0.0, 0.01],
        "seeds": [7, 8],
        "output_dir": "/tmp/x"
    })");
    CHECK(c.family.kind == systems::FamilyKind::logistic);
    CHECK(c.family.horizon == 32);
    CHECK(c.prior.bins == 16);
    CHECK(c.kernel.sigma == 0.02);
    CHECK(c.kernel.run_length == 4);
    CHECK(c.counts.dataset_size == 500);
    CHECK(c.counts.rule == prediction::RecoveryRule::mode);
    CHECK(c.sigmas == std::vector<double>{0.0, 0.01});
    CHECK(c.seeds == std::vector<std::uint64_t>{7, 8});
    CHECK(c.output_dir == "/tmp/x");
}

TEST_CASE("parse_config rejects unknown fields by name") {
    CHECK_THROWS_WITH_AS(io::parse_config(R"({"family": {"kind": "tent"}, "bogus": 1})"),
                         doctest::Contains("bogus"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        io::parse_config(R"({"family": {"kind": "tent", "sigma": 0.1}})"),
        doctest::Contains("family.sigma"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        io::parse_config(R"({"family": {"kind": "tent"}, "kernel": {"sgima": 0.1}})"),
        doctest::Contains("kernel.sgima"), std::invalid_argument);
}

TEST_CASE("parse_config rejects malformed input") {
    CHECK_THROWS_AS(io::parse_config("not json"), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_config("[1,2]"), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_config(R"({"family": {}})"), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_config("{}"), std::invalid_argument);
    CHECK_THROWS_AS(
        io::parse_config(R"({"family": {"kind": "tent"}, "sigmas": [-0.1]})"),
        std::invalid_argument);
    CHECK_THROWS_AS(io::parse_config(R"({"family": {"kind": "tent"}, "seeds": []})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        io::parse_config(
            R"({"family": {"kind": "tent"}, "counts": {"rule": "median"}})"),
        std::invalid_argument);
}

TEST_CASE("dataset CSV round-trips bitwise") {
    TempDir dir;
    systems::FamilyConfig c;
    c.kind = systems::FamilyKind::tent;
    c.horizon = 12;
    auto prior = systems::QuantityPrior::uniform(0.0, 2.0, 8);
    auto data = systems::sample_dataset(c, prior, 20, 3);
    io::write_dataset(data, dir.file("d.csv"), dir.file("d.json"));
    auto back = io::ingest_trajectories(dir.file("d.csv"), dir.file("d.json"));
    REQUIRE(back.trajectories.size() == data.trajectories.size());
    CHECK(back.family.kind == systems::FamilyKind::tent);
    CHECK(back.family.horizon == 12);
    CHECK(back.normalization.lo == data.normalization.lo);
    CHECK(back.normalization.hi == data.normalization.hi);
    CHECK(back.prior.density == data.prior.density);
    for (size_t i = 0; i < data.trajectories.size(); ++i) {
        CHECK(back.trajectories[i].values == data.trajectories[i].values);
        CHECK(back.trajectories[i].has_quantity);
        CHECK(back.trajectories[i].quantity_true == data.trajectories[i].quantity_true);
    }
}

TEST_CASE("ingest rejects structural problems with named errors") {
    TempDir dir;
    std::ofstream(dir.file("m.json"))
        << R"({"horizon": 2, "dims": 1, "ranges": {"lo": [0], "hi": [1]}})";

    std::ofstream(dir.file("short.csv")) << "traj_id,t,c0\n0,0,0.5\n";
    CHECK_THROWS_WITH_AS(io::ingest_trajectories(dir.file("short.csv"), dir.file("m.json")),
                         doctest::Contains("expected 2 timesteps"), std::invalid_argument);

    std::ofstream(dir.file("dup.csv")) << "traj_id,t,c0\n0,0,0.5\n0,0,0.6\n";
    CHECK_THROWS_WITH_AS(io::ingest_trajectories(dir.file("dup.csv"), dir.file("m.json")),
                         doctest::Contains("duplicate timestep"), std::invalid_argument);

    std::ofstream(dir.file("bad.csv")) << "traj_id,t,c0\n0,0,abc\n0,1,0.5\n";
    CHECK_THROWS_WITH_AS(io::ingest_trajectories(dir.file("bad.csv"), dir.file("m.json")),
                         doctest::Contains("bad value"), std::invalid_argument);

    std::ofstream(dir.file("wide.csv")) << "traj_id,t,c0\n0,0,0.5,0.9\n";
    CHECK_THROWS_AS(io::ingest_trajectories(dir.file("wide.csv"), dir.file("m.json")),
                    std::invalid_argument);

    std::ofstream(dir.file("empty.csv")) << "traj_id,t,c0\n";
    CHECK_THROWS_AS(io::ingest_trajectories(dir.file("empty.csv"), dir.file("m.json")),
                    std::invalid_argument);

    std::ofstream(dir.file("m2.json")) << R"({"dims": 1, "ranges": {"lo": [0], "hi": [1]}})";
    std::ofstream(dir.file("ok.csv")) << "traj_id,t,c0\n0,0,0.5\n0,1,0.6\n";
    CHECK_THROWS_WITH_AS(io::ingest_trajectories(dir.file("ok.csv"), dir.file("m2.json")),
                         doctest::Contains("horizon"), std::invalid_argument);
}

TEST_CASE("ingest accepts out-of-order rows and string ids") {
    TempDir dir;
    std::ofstream(dir.file("m.json"))
        << R"({"horizon": 2, "dims": 2, "ranges": {"lo": [0, 0], "hi": [1, 1]}})";
    std::ofstream(dir.file("d.csv")) << "traj_id,t,c0,c1\n"
                                        "b,1,0.3,0.4\n"
                                        "a,0,0.1,0.2\n"
                                        "b,0,0.5,0.6\n"
                                        "a,1,0.7,0.8\n";
    auto data = io::ingest_trajectories(dir.file("d.csv"), dir.file("m.json"));
    REQUIRE(data.trajectories.size() == 2);
    // first-appearance order: b then a
    CHECK(data.trajectories[0].at(0, 0) == 0.5);
    CHECK(data.trajectories[0].at(1, 1) == 0.4);
    CHECK(data.trajectories[1].at(0, 0) == 0.1);
    CHECK_FALSE(data.trajectories[0].has_quantity);
}

TEST_CASE("marginal CSV round-trips") {
    TempDir dir;
    recovery::BinnedMarginal m;
    m.edges = {0.0, 0.5, 1.0, 1.5};
    m.mass = {0.25, 0.5, 0.25};
    io::write_marginal_csv(m, dir.file("m.csv"));
    auto back = io::read_marginal_csv(dir.file("m.csv"));
    CHECK(back.edges == m.edges);
    CHECK(back.mass == m.mass);
}

TEST_CASE("drift report JSON has fixed field order and round-trip doubles") {
    prediction::DriftReport rep;
    rep.sigma = 0.0125;
    rep.seed = 42;
    rep.prior_marginal.edges = {0.0, 1.0, 2.0};
    rep.prior_marginal.mass = {0.5, 0.5};
    rep.data_marginal = rep.prior_marginal;
    rep.predicted_marginal.edges = rep.prior_marginal.edges;
    rep.predicted_marginal.mass = {0.3, 0.7};
    rep.drift = {-0.2, 0.2};
    rep.tv_data_prior = 0.0;
    rep.tv_pred_prior = 0.2;
    rep.tv_pred_data = 0.2;
    std::string a = io::report_to_json(rep);
    std::string b = io::report_to_json(rep);
    CHECK(a == b);
    CHECK(a.find("\"sigma\"") < a.find("\"seed\""));
    CHECK(a.find("\"seed\"") < a.find("\"tv_data_prior\""));
    CHECK(a.find("\"edges\"") < a.find("\"predicted_marginal\""));
    CHECK(a.find("0.0125") != std::string::npos);

    TempDir dir;
    io::write_report(rep, dir.file("r.json"));
    CHECK(slurp(dir.file("r.json")) == a + "\n");
}

TEST_CASE("KDE curve integrates to about one and is headered") {
    TempDir dir;
    recovery::BinnedMarginal m;
    int b = 32;
    for (int i = 0; i <= b; ++i) m.edges.push_back(i / static_cast<double>(b));
    m.mass.assign(b, 1.0 / b);
    io::write_kde_csv(m, dir.file("k.csv"), 512);
    std::ifstream in(dir.file("k.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "r,density");
    double prev_r = 0.0, prev_f = 0.0, integral = 0.0;
    bool first = true;
    while (std::getline(in, line)) {
        auto comma = line.find(',');
        double r = std::stod(line.substr(0, comma));
        double f = std::stod(line.substr(comma + 1));
        CHECK(f >= 0.0);
        if (!first) integral += 0.5 * (f + prev_f) * (r - prev_r);
        prev_r = r;
        prev_f = f;
        first = false;
    }
    CHECK(integral > 0.8);  // some mass leaks past the domain edges
    CHECK(integral <= 1.0 + 1e-9);
}

TEST_CASE("reweight CSV lists one weight per trajectory") {
    TempDir dir;
    mitigation::ReweightPlan plan;
    plan.weights = {0.25, 0.75};
    io::write_reweight_csv(plan, dir.file("w.csv"));
    CHECK(slurp(dir.file("w.csv")) == "traj_id,weight\n0,0.25\n1,0.75\n");
}

TEST_CASE("pairing JSON carries assignment and trace") {
    mitigation::Pairing p;
    p.assignment = {2, 0, 1};
    p.objective = 0.125;
    p.trace = {0.5, 0.25, 0.125};
    std::string doc = io::pairing_to_json(p);
    CHECK(doc.find("\"objective\": 0.125") != std::string::npos);
    CHECK(doc.find("[\n    2,\n    0,\n    1\n  ]") != std::string::npos);
}
