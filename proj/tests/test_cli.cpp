#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "timebin/config.hpp"

using namespace timebin;
namespace fs = std::filesystem;

namespace {

#ifndef TBSIM_PATH
#error "TBSIM_PATH must point at the tbsim binary"
#endif

struct Workdir {
  fs::path path;
  Workdir() {
    path = fs::temp_directory_path() / ("tbsim_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Workdir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
  std::string cmd = std::string(TBSIM_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

nlohmann::json slurp_json(const std::string& path) {
  return nlohmann::json::parse(slurp(path));
}

}  // namespace

TEST_CASE("help exits zero and lists the subcommands") {
  CHECK(run("--help") == 0);
  CHECK(run("jti --help") == 0);
  CHECK(run("gen --help") == 0);
  CHECK(run("correlate --help") == 0);
  CHECK(run("bell --help") == 0);
}

TEST_CASE("config errors exit 2, io errors exit 3, data errors exit 4") {
  Workdir wd;
  CHECK(run("gen --config " + wd.file("missing.json")) == 3);

  std::ofstream bad(wd.file("bad.json"));
  bad << "{\"schema_version\": 1, \"mystery\": true}";
  bad.close();
  CHECK(run("gen --config " + wd.file("bad.json")) == 2);

  CHECK(run("jti --stage nonsense --out " + wd.file("x")) == 2);

  std::ofstream corrupt(wd.file("corrupt.ttag"), std::ios::binary);
  corrupt << "TTAG";  // truncated before the version byte
  corrupt.close();
  CHECK(run("correlate " + wd.file("corrupt.ttag") + " --out " + wd.file("c")) == 4);
}

TEST_CASE("gen writes an exact-size deterministic tag file") {
  Workdir wd;
  ExperimentConfig cfg = default_config();
  cfg.source.pair_mean = 0.02;
  cfg.seed = 7;
  cfg.save(wd.file("cfg.json"));

  auto header_len = [](const std::string& blob) {
    std::uint32_t hlen = 0;
    for (int i = 3; i >= 0; --i)
      hlen = (hlen << 8) | static_cast<unsigned char>(blob[5 + i]);
    return hlen;
  };

  // pulses = 0: header-only file.
  CHECK(run("gen --config " + wd.file("cfg.json") + " --pulses 0 --out-file " +
            wd.file("empty.ttag")) == 0);
  std::string empty = slurp(wd.file("empty.ttag"));
  CHECK(empty.size() >= 9);
  CHECK(empty.size() == 9 + header_len(empty));

  CHECK(run("gen --config " + wd.file("cfg.json") + " --pulses 50000 --out-file " +
            wd.file("a.ttag")) == 0);
  CHECK(run("gen --config " + wd.file("cfg.json") + " --pulses 50000 --out-file " +
            wd.file("b.ttag")) == 0);
  std::string a = slurp(wd.file("a.ttag"));
  CHECK(a == slurp(wd.file("b.ttag")));  // same seed, byte-identical
  CHECK((a.size() - (9 + header_len(a))) % 9 == 0);

  CHECK(run("gen --config " + wd.file("cfg.json") + " --seed 8 --pulses 50000 --out-file " +
            wd.file("c.ttag")) == 0);
  CHECK(a != slurp(wd.file("c.ttag")));
}

TEST_CASE("correlate reports counts and CAR on generated tags") {
  Workdir wd;
  ExperimentConfig cfg = default_config();
  cfg.mode = DeviceMode::passive;
  cfg.source.pair_mean = 0.05;
  cfg.detector_signal.efficiency = 1.0;
  cfg.detector_signal.channel_loss_db = 0.0;
  cfg.detector_idler.efficiency = 1.0;
  cfg.detector_idler.channel_loss_db = 0.0;
  cfg.device.insertion_loss_db = 0.0;
  cfg.save(wd.file("cfg.json"));

  CHECK(run("gen --config " + wd.file("cfg.json") + " --pulses 400000 --out-file " +
            wd.file("tags.ttag")) == 0);
  CHECK(run("correlate " + wd.file("tags.ttag") + " --config " + wd.file("cfg.json") +
            " --jti --out " + wd.file("out")) == 0);

  auto summary = slurp_json(wd.file("out/correlate_summary.json"));
  CHECK(summary["pairs_in_window"].get<std::uint64_t>() > 1000);
  CHECK(summary["tags_signal"].get<std::uint64_t>() > 5000);
  CHECK(fs::exists(wd.file("out/histogram.csv")));
  CHECK(fs::exists(wd.file("out/jti_counts.csv")));

  // Histogram CSV starts with the unit header.
  std::ifstream h(wd.file("out/histogram.csv"));
  std::string header;
  std::getline(h, header);
  CHECK(header == "delay_ps,mass");
}

TEST_CASE("jti analytic summary reports the lobe structure") {
  Workdir wd;
  CHECK(run("jti --stage passive --method analytic --out " + wd.file("p")) == 0);
  auto passive = slurp_json(wd.file("p/jti_summary.json"));
  CHECK(passive["lobe_count"].get<int>() == 7);
  CHECK(fs::exists(wd.file("p/jti.csv")));
  CHECK(fs::exists(wd.file("p/delay.csv")));

  CHECK(run("jti --stage active --method analytic --out " + wd.file("a")) == 0);
  auto active = slurp_json(wd.file("a/jti_summary.json"));
  CHECK(active["lobe_count"].get<int>() == 1);

  CHECK(run("jti --stage input --method analytic --out " + wd.file("i")) == 0);
  auto input = slurp_json(wd.file("i/jti_summary.json"));
  CHECK(input["lobe_count"].get<int>() == 2);
  CHECK(input["schmidt_number"].get<double>() == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("bell analytic fit hits the ideal visibilities") {
  Workdir wd;
  CHECK(run("bell --method analytic --mode active --phases 16 --out " + wd.file("act")) == 0);
  auto act = slurp_json(wd.file("act/fit.json"));
  CHECK(act["visibility"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

  CHECK(run("bell --method analytic --mode passive --phases 16 --out " + wd.file("pas")) ==
        0);
  auto pas = slurp_json(wd.file("pas/fit.json"));
  CHECK(pas["visibility"].get<double>() == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(fs::exists(wd.file("pas/bell_curve.csv")));
}

TEST_CASE("correlating a header-only file yields a zero histogram") {
  Workdir wd;
  ExperimentConfig cfg = default_config();
  cfg.save(wd.file("cfg.json"));
  CHECK(run("gen --config " + wd.file("cfg.json") + " --pulses 0 --out-file " +
            wd.file("none.ttag")) == 0);
  CHECK(run("correlate " + wd.file("none.ttag") + " --config " + wd.file("cfg.json") +
            " --out " + wd.file("out")) == 0);
  auto summary = slurp_json(wd.file("out/correlate_summary.json"));
  CHECK(summary["pairs_in_window"].get<std::uint64_t>() == 0);
  CHECK(summary["tags_signal"].get<std::uint64_t>() == 0);
}

TEST_CASE("montecarlo outputs are byte-identical for a fixed seed") {
  Workdir wd;
  ExperimentConfig cfg = default_config();
  cfg.source.pair_mean = 0.02;
  cfg.detector_signal.efficiency = 1.0;
  cfg.detector_signal.channel_loss_db = 0.0;
  cfg.detector_idler.efficiency = 1.0;
  cfg.detector_idler.channel_loss_db = 0.0;
  cfg.device.insertion_loss_db = 0.0;
  cfg.save(wd.file("cfg.json"));

  std::string args = "bell --config " + wd.file("cfg.json") +
                     " --method montecarlo --phases 8 --pulses-per-point 50000 --out ";
  CHECK(run(args + wd.file("r1")) == 0);
  CHECK(run(args + wd.file("r2")) == 0);
  CHECK(slurp(wd.file("r1/bell_curve.csv")) == slurp(wd.file("r2/bell_curve.csv")));
  CHECK(slurp(wd.file("r1/fit.json")) == slurp(wd.file("r2/fit.json")));

  std::string jti_args = "jti --config " + wd.file("cfg.json") +
                         " --stage active --method montecarlo --pulses 100000 --out ";
  CHECK(run(jti_args + wd.file("j1")) == 0);
  CHECK(run(jti_args + wd.file("j2")) == 0);
  CHECK(slurp(wd.file("j1/jti_counts.csv")) == slurp(wd.file("j2/jti_counts.csv")));
  CHECK(slurp(wd.file("j1/jti_summary.json")) == slurp(wd.file("j2/jti_summary.json")));
}
