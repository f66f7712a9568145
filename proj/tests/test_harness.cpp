#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "isac/experiments.hpp"

using namespace isac;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("isac_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

json tiny_train(const std::string& mode) {
    return {{"mode", mode},
            {"bits_per_symbol", 2},
            {"snr_c_db", 8.0},
            {"kappa_limit", 1.2},
            {"total_steps", 40},
            {"batch_schedule", json::array({{0, 64}, {40, 128}})},
            {"seed", 5}};
}

} // namespace

TEST_CASE("config parsing errors") {
    CHECK_THROWS_AS(load_json("/nonexistent/config.json"), ConfigError);

    json bad_scenario = {{"numerology", {{"n_subcarriers", 100}, {"cp_len", 16}}},
                         {"noise", {{"sigma2", 1.0}}},
                         {"targets", json::array()}};
    CHECK_THROWS_AS(parse_scenario(bad_scenario), ConfigError);

    // target delay beyond the cyclic prefix
    json beyond = {{"numerology", {{"n_subcarriers", 128}, {"cp_len", 16}}},
                   {"noise", {{"snr_db", 10.0}}},
                   {"targets", json::array({{{"delay_bins", 50}, {"power", 1.0}}})}};
    CHECK_THROWS_AS(parse_scenario(beyond), ConfigError);
}

TEST_CASE("scenario parsing: ranges, link budget, noise forms") {
    json j = {{"numerology",
               {{"n_subcarriers", 1024}, {"cp_len", 256}, {"subcarrier_spacing_hz", 120e3}}},
              {"noise", {{"snr_db", 20.0}}},
              {"k_budget", 1e6},
              {"targets",
               json::array({{{"range_m", 170.0}, {"rcs_m2", 500.0}, {"swerling", 0}},
                            {{"delay_bins", 10}, {"power", 0.5}, {"is_toi", true}}})}};
    const SensingScenario sc = parse_scenario(j);
    CHECK(sc.noise_variance == doctest::Approx(0.01));
    // 170 m at ~1.22 m bins -> bin 139
    CHECK(sc.targets[0].delay_bins == 139);
    CHECK(sc.targets[0].power == doctest::Approx(1e6 * 500.0 / std::pow(170.0, 4)));
    CHECK(toi_index(sc) == 1);
}

TEST_CASE("checkpoint round trip") {
    Checkpoint ck;
    ck.step = 123;
    ck.mode = ShapingMode::Probabilistic;
    ck.params.raw_points = {{0.5, -0.25}, {1.0, 2.0}};
    ck.params.raw_logits = {0.1, -0.3};
    ck.adam_m = {1e-3, 2e-3};
    ck.adam_v = {1e-6, 4e-6};
    ck.adam_t = 55;
    const fs::path dir = temp_dir("ckpt");
    save_checkpoint(ck, (dir / "c.json").string());
    const Checkpoint l = load_checkpoint((dir / "c.json").string());
    CHECK(l.step == 123);
    CHECK(l.mode == ShapingMode::Probabilistic);
    CHECK(l.params.raw_points[0] == ck.params.raw_points[0]);
    CHECK(l.params.raw_logits[1] == ck.params.raw_logits[1]);
    CHECK(l.adam_t == 55);
}

TEST_CASE("optimize: artifacts and byte-identical reruns") {
    const fs::path dir1 = temp_dir("opt1");
    const fs::path dir2 = temp_dir("opt2");
    json cfg = {{"experiment", "optimize"}, {"train", tiny_train("joint")}};
    const auto o1 = run_optimize(cfg, {dir1});
    const auto o2 = run_optimize(cfg, {dir2});
    CHECK_FALSE(o1.result.diverged);
    CHECK(slurp(o1.constellation_path) == slurp(o2.constellation_path));
    CHECK(slurp(o1.trace_path) == slurp(o2.trace_path));
    // the emitted table loads back as a valid constellation
    const Constellation c = load_constellation(o1.constellation_path);
    validate(c);
    CHECK(fs::exists(o1.checkpoint_path));
}

TEST_CASE("gmi-curve: baselines, capacity column, bound") {
    const fs::path dir = temp_dir("gmi");
    json cfg = {{"experiment", "gmi-curve"},
                {"snr_db_grid", json::array({0.0, 10.0})},
                {"samples", 20000},
                {"seed", 3}};
    run_gmi_curve(cfg, {dir});
    const std::string csv = slurp((dir / "gmi_curve.csv").string());
    CHECK(csv.find("# config_hash=") == 0);
    CHECK(csv.find("constellation,snr_db,gmi,stderr,capacity") != std::string::npos);
    CHECK(csv.find("qam64") != std::string::npos);
    CHECK(csv.find("psk64") != std::string::npos);

    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string name, f[4];
        std::getline(ls, name, ',');
        for (auto& v : f) std::getline(ls, v, ',');
        CHECK(std::stod(f[1]) <= std::stod(f[3]) + 3.0 * std::stod(f[2]));
    }
}

TEST_CASE("pd-curve: output schema and limit behavior") {
    const fs::path dir = temp_dir("pd");
    json cfg = {
        {"experiment", "pd-curve"},
        {"constellations", json::array({"psk4"})},
        {"scenario",
         {{"numerology", {{"n_subcarriers", 256}, {"cp_len", 64}, {"subcarrier_spacing_hz", 120e3}}},
          {"noise", {{"sigma2", 0.05}}},
          {"k_budget", 1500.0},
          {"targets", json::array({{{"range_m", 30.0}, {"rcs_m2", 1.0}, {"swerling", 1},
                                    {"is_toi", true}}})}}},
        {"cfar", {{"p_fa", 1e-3}, {"window_cells", 64}, {"guard_cells", 2}}},
        {"range_grid_m", json::array({20.0, 60.0})},
        {"trials", 1500},
        {"seed", 2}};
    const auto pts = run_pd_curve(cfg, {dir});
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].kappa == doctest::Approx(1.0));
    // detection degrades with range; both estimates must agree coarsely
    for (const auto& p : pts) {
        CHECK(p.ci_lo <= p.pd_sim);
        CHECK(p.pd_sim <= p.ci_hi);
        CHECK(std::abs(p.pd_sim - p.pd_analytic) < 0.08);
    }
    CHECK(pts[0].pd_analytic > pts[1].pd_analytic);
    const std::string csv = slurp((dir / "pd_curve.csv").string());
    CHECK(csv.find("kappa,range_m,gamma_analytic,pd_analytic,pd_sim,ci_lo,ci_hi") !=
          std::string::npos);

    // a grid point pushing the TOI beyond the CP fails validation up front
    cfg["range_grid_m"] = json::array({20.0, 5000.0});
    CHECK_THROWS_AS(run_pd_curve(cfg, {dir}), ConfigError);
}

TEST_CASE("gaussianity experiment writes the expected grid") {
    const fs::path dir = temp_dir("gauss");
    json cfg = {{"experiment", "gaussianity"},
                {"n_grid", json::array({4, 64})},
                {"trials", 3000},
                {"seed", 8}};
    const auto pts = run_gaussianity(cfg, {dir});
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].n_subcarriers == 4);
    // small N is visibly non-Gaussian, 64 subcarriers are close
    CHECK(std::abs(pts[0].excess_kurtosis) > 0.1);
    CHECK(std::abs(pts[1].excess_kurtosis) < 0.15);
    CHECK(fs::exists(dir / "gaussianity.csv"));
}

TEST_CASE("tradeoff sweep: tiny grid smoke test") {
    const fs::path dir = temp_dir("sweep");
    json cfg = {{"experiment", "tradeoff-sweep"},
                {"modes", json::array({"geometric", "probabilistic"})},
                {"kappa_grid", json::array({1.5})},
                {"train", tiny_train("joint")},
                {"eval_samples", 20000},
                {"seed", 4}};
    const auto pts = run_tradeoff_sweep(cfg, {dir});
    REQUIRE(pts.size() == 2);
    for (const auto& p : pts) {
        CHECK(p.ok);
        CHECK(p.kappa <= 1.5 + 0.05);
    }
    const std::string csv = slurp((dir / "tradeoff.csv").string());
    CHECK(csv.find("qam64") != std::string::npos);
    CHECK(csv.find("psk64") != std::string::npos);
}

TEST_CASE("named constellation lookup") {
    CHECK(named_constellation("qam16").bits_per_symbol == 4);
    CHECK(named_constellation("psk64").bits_per_symbol == 6);
    CHECK_THROWS(named_constellation("does_not_exist.csv"));
}
