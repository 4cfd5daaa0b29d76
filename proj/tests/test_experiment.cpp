#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hasim/experiment.hpp"

using namespace hasim;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("hasim_exp_" + std::to_string(++counter) + "_" +
            std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

// Two profiles over three short traces; movies pinned to 12 segments so the
// matrix finishes quickly.
fs::path write_fixture(const fs::path& root,
                       const json& config_patch = json::object()) {
  write_file(root / "traces" / "normal_a.csv",
             "0,3000000\n30,1000000\n60,3000000\n90,1000000\n"
             "120,3000000\n150,3000000\n");
  write_file(root / "traces" / "chal_a.csv",
             "0,2000000\n20,300000\n40,1500000\n60,800000\n200,800000\n");
  write_file(root / "traces" / "chal_b.csv",
             "40,5000000\n80,40000000\n120,2000000\n160,6000000\n"
             "200,6000000\n");
  json manifest = json::array();
  manifest.push_back({{"label", "normal"}, {"path", "../traces/normal_a.csv"}});
  manifest.push_back({{"label", "challenging"},
                      {"path", "../traces/chal_a.csv"},
                      {"format", "csv-rate"}});
  manifest.push_back({{"label", "challenging"},
                      {"path", "../traces/chal_b.csv"},
                      {"format", "csv-bytes"}});
  write_file(root / "manifests" / "main.json", manifest.dump(2) + "\n");
  json config;
  config["schema_version"] = 1;
  config["manifests"] = {"manifests/main.json"};
  config["ladder"] = {{"mode", "explicit"},
                      {"rates_bps", {300000, 1000000, 3000000}}};
  config["buffer_sizes_s"] = {16.0};
  config["algorithms"] = {{{"id", "conventional"}, {"params", {{"alpha", 0.3}}}},
                          {{"id", "bba"}}};
  config["master_seed"] = 7;
  config["vbr_cv"] = 0.1;
  config["k_total_choices"] = {12};
  config.update(config_patch);
  fs::path cfg_path = root / "config.json";
  write_file(cfg_path, config.dump(2) + "\n");
  return cfg_path;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

size_t count_lines(const std::string& s) {
  size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("config loads with manifests resolved and defaults applied") {
  TempDir tmp;
  fs::path cfg_path = write_fixture(tmp.path);
  ExperimentConfig cfg = load_config(cfg_path.string());
  REQUIRE(cfg.traces.size() == 3);
  CHECK(cfg.traces[0].label == "normal");
  CHECK(cfg.traces[2].format == TraceFormat::kCsvBytes);
  for (const auto& t : cfg.traces) CHECK(fs::exists(t.path));
  CHECK(cfg.ladder.mode == "explicit");
  REQUIRE(cfg.buffer_sizes_s.size() == 1);
  CHECK(cfg.buffer_sizes_s[0] == 16.0);
  REQUIRE(cfg.algorithms.size() == 2);
  CHECK(cfg.algorithms[0].id == "conventional");
  CHECK(cfg.algorithms[0].params.at("alpha") == 0.3);
  CHECK(cfg.master_seed == 7);
  CHECK(cfg.vbr_cv == 0.1);
  CHECK(cfg.omega == 2);
}

TEST_CASE("omitted fields fall back to the study matrix") {
  TempDir tmp;
  fs::path cfg_path = write_fixture(tmp.path);
  json config = json::parse(std::ifstream(cfg_path));
  config.erase("buffer_sizes_s");
  config.erase("algorithms");
  config.erase("k_total_choices");
  config.erase("master_seed");
  config.erase("vbr_cv");
  write_file(cfg_path, config.dump(2) + "\n");
  ExperimentConfig cfg = load_config(cfg_path.string());
  REQUIRE(cfg.buffer_sizes_s.size() == 2);
  CHECK(cfg.buffer_sizes_s[0] == 16.0);
  CHECK(cfg.buffer_sizes_s[1] == 92.0);
  REQUIRE(cfg.algorithms.size() == 5);
  CHECK(cfg.algorithms[0].id == "conventional");
  CHECK(cfg.algorithms[4].id == "abma");
  CHECK(cfg.master_seed == 1);
  CHECK(cfg.vbr_cv == 0.2);
  REQUIRE(cfg.k_total_choices.size() == 3);
  CHECK(cfg.k_total_choices[1] == 864);
}

TEST_CASE("config rejects broken setups before any session runs") {
  TempDir tmp;
  fs::path cfg_path = write_fixture(tmp.path);

  SUBCASE("missing manifest file") {
    write_file(cfg_path, R"({"manifests": ["nope.json"]})");
    CHECK_THROWS_AS(load_config(cfg_path.string()), std::runtime_error);
  }
  SUBCASE("missing trace file") {
    fs::remove(tmp.path / "traces" / "chal_b.csv");
    CHECK_THROWS_AS(load_config(cfg_path.string()), std::runtime_error);
  }
  SUBCASE("manifest not a list") {
    write_file(tmp.path / "manifests" / "main.json", R"({"label": "x"})");
    CHECK_THROWS_AS(load_config(cfg_path.string()), std::runtime_error);
  }
  SUBCASE("unknown algorithm id") {
    json config = json::parse(std::ifstream(cfg_path));
    config["algorithms"] = {{{"id", "mystery"}}};
    write_file(cfg_path, config.dump());
    CHECK_THROWS_AS(load_config(cfg_path.string()), std::runtime_error);
  }
  SUBCASE("vbr_cv out of range") {
    json config = json::parse(std::ifstream(cfg_path));
    config["vbr_cv"] = 1.0;
    write_file(cfg_path, config.dump());
    CHECK_THROWS_AS(load_config(cfg_path.string()), std::runtime_error);
  }
  SUBCASE("buffer below the playback threshold") {
    json config = json::parse(std::ifstream(cfg_path));
    config["buffer_sizes_s"] = {4.0};
    write_file(cfg_path, config.dump());
    CHECK_THROWS_AS(load_config(cfg_path.string()), std::runtime_error);
  }
  SUBCASE("unsupported schema version") {
    json config = json::parse(std::ifstream(cfg_path));
    config["schema_version"] = 2;
    write_file(cfg_path, config.dump());
    CHECK_THROWS_AS(load_config(cfg_path.string()), std::runtime_error);
  }
  SUBCASE("nonpositive movie length") {
    json config = json::parse(std::ifstream(cfg_path));
    config["k_total_choices"] = {0};
    write_file(cfg_path, config.dump());
    CHECK_THROWS_AS(load_config(cfg_path.string()), std::runtime_error);
  }
}

TEST_CASE("matrix run writes a complete, well-formed bundle") {
  TempDir tmp;
  fs::path cfg_path = write_fixture(tmp.path);
  ExperimentConfig cfg = load_config(cfg_path.string());
  fs::path out = tmp.path / "out";
  MatrixSummary sum = run_matrix(cfg, out.string());
  // 2 profiles x 2 algorithms x 1 buffer; 3 traces overall.
  CHECK(sum.cells == 4);
  CHECK(sum.sessions == 6);
  CHECK(sum.flagged == 0);

  auto sessions = read_tree(out).at("sessions.csv");
  CHECK(count_lines(sessions) == 7);
  CHECK(sessions.rfind("profile,trace,algorithm,b_max_s,", 0) == 0);

  std::ifstream agg_in(out / "aggregates.csv");
  std::string header;
  std::getline(agg_in, header);
  CHECK(header ==
        "profile,algorithm,b_max_s,metric,n,mean,stderr,ci_half_width");
  size_t rows = 0;
  for (std::string line; std::getline(agg_in, line);) ++rows;
  CHECK(rows == 4 * 5);

  json bundle = json::parse(std::ifstream(out / "bundle.json"));
  CHECK(bundle.at("schema_version") == 1);
  CHECK(bundle.at("ladder_bps") == json({300000, 1000000, 3000000}));
  CHECK(bundle.at("cells").size() == 4);
  CHECK(bundle.at("sessions").size() == 6);
  // Profiles run in sorted order; algorithms keep config order.
  CHECK(bundle.at("cells")[0].at("profile") == "challenging");
  CHECK(bundle.at("cells")[0].at("algorithm") == "conventional");
  CHECK(bundle.at("cells")[1].at("algorithm") == "bba");
  CHECK(bundle.at("cells")[2].at("profile") == "normal");
  // Two challenging traces give an interval; the lone normal trace cannot.
  CHECK(bundle.at("cells")[0].at("aggregates").at("adaptability").at("n") == 2);
  CHECK(bundle.at("cells")[0].at("aggregates").at("adaptability")
            .contains("ci_half_width"));
  CHECK(bundle.at("cells")[2].at("aggregates").at("adaptability").at("n") == 1);
  CHECK(!bundle.at("cells")[2].at("aggregates").at("adaptability")
             .contains("ci_half_width"));

  size_t log_files = 0;
  for (const auto& e : fs::directory_iterator(out / "logs")) {
    CHECK(e.is_regular_file());
    ++log_files;
  }
  CHECK(log_files == 12);
  for (const auto& s : bundle.at("sessions")) {
    CHECK(fs::exists(out / s.at("log_csv").get<std::string>()));
    CHECK(fs::exists(out / s.at("log_json").get<std::string>()));
  }
}

TEST_CASE("matrix reruns are byte-identical") {
  TempDir tmp;
  ExperimentConfig cfg = load_config(write_fixture(tmp.path).string());
  fs::path a = tmp.path / "a", b = tmp.path / "b";
  run_matrix(cfg, a.string());
  run_matrix(cfg, b.string());
  auto ta = read_tree(a), tb = read_tree(b);
  REQUIRE(ta.size() == tb.size());
  for (const auto& [rel, content] : ta) {
    REQUIRE(tb.count(rel) == 1);
    CHECK_MESSAGE(content == tb.at(rel), rel);
  }
}

TEST_CASE("quantile ladder mode derives rates from a profile") {
  TempDir tmp;
  json patch;
  patch["ladder"] = {{"mode", "quantiles"},
                     {"profile", "normal"},
                     {"quantiles", {0.25, 0.5}}};
  ExperimentConfig cfg = load_config(write_fixture(tmp.path, patch).string());
  fs::path out = tmp.path / "out";
  run_matrix(cfg, out.string());
  json bundle = json::parse(std::ifstream(out / "bundle.json"));
  // The normal trace spends 40% of its time at 1 Mb/s, the rest at 3 Mb/s.
  CHECK(bundle.at("ladder_bps") == json({1000000, 3000000}));
}

TEST_CASE("plot data is one file per metric, grouped for plotting") {
  TempDir tmp;
  ExperimentConfig cfg = load_config(write_fixture(tmp.path).string());
  fs::path out = tmp.path / "out";
  run_matrix(cfg, out.string());
  emit_plot_data(out.string(), (out / "plots").string());
  for (const char* m :
       {"adaptability", "adaptation_frequency", "adaptation_amplitude",
        "rebuffer_duration", "rebuffer_frequency"})
    CHECK(fs::exists(out / "plots" / (std::string("plot_") + m + ".csv")));
  std::ifstream in(out / "plots" / "plot_adaptability.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "profile,b_max_s,algorithm,n,mean,ci_half_width");
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(line);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].rfind("challenging,16,conventional,2,", 0) == 0);
  CHECK(rows[1].rfind("challenging,16,bba,2,", 0) == 0);
  CHECK(rows[2].rfind("normal,16,conventional,1,", 0) == 0);
  // n = 1 rows carry a mean but leave the interval column empty.
  CHECK(rows[2].back() == ',');
}

TEST_CASE("validation report round trips through json") {
  ValidationReport r;
  r.checks.push_back({"alpha", true, "ok"});
  r.checks.push_back({"beta", false, "weird"});
  CHECK(!r.all_pass());
  std::stringstream ss;
  write_validation_report(r, ss);
  ValidationReport back = parse_validation_report(ss);
  REQUIRE(back.checks.size() == 2);
  CHECK(back.checks[0].name == "alpha");
  CHECK(back.checks[0].pass);
  CHECK(back.checks[1].detail == "weird");

  ValidationReport empty;
  CHECK(!empty.all_pass());
  r.checks[1].pass = true;
  CHECK(r.all_pass());
}

TEST_CASE("controlled square wave reproduces the expected signatures") {
  TempDir tmp;
  fs::path out = tmp.path / "val";
  ValidationReport report = validate_controlled(out.string());
  REQUIRE(report.checks.size() == 4);
  for (const auto& c : report.checks) CHECK_MESSAGE(c.pass, c.name << ": " << c.detail);
  CHECK(report.all_pass());
  for (const char* f : {"fig_bba.csv", "fig_conventional.csv", "fig_abma.csv",
                        "validation_report.json"})
    CHECK(fs::exists(out / f));
  std::ifstream in(out / "validation_report.json");
  ValidationReport parsed = parse_validation_report(in);
  CHECK(parsed.all_pass());
  // The probe-window algorithm precomputed its stall map into the cache.
  CHECK(!fs::is_empty(out / "cache"));
  // Per-second figure data covers the whole session with the right columns.
  std::ifstream fig(out / "fig_bba.csv");
  std::string header;
  std::getline(fig, header);
  CHECK(header == "time_s,throughput_bps,selected_bps,buffer_s");
  size_t rows = 0;
  for (std::string line; std::getline(fig, line);) ++rows;
  CHECK(rows >= 300);
}
