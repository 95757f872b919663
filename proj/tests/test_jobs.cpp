#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "reslab/jobs.hpp"

using namespace reslab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path source_dir{RESLAB_SOURCE_DIR};

fs::path scratch() {
  static const fs::path d = [] {
    auto p = fs::temp_directory_path() / ("reslab_jobs_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

struct Run {
  int status;
  std::string err;
};

Run cli(const std::string& args, const std::string& env = "") {
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = env + " '" + std::string(RESLAB_CLI) + "' " + args + " 2> '" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, jobs::read_file(err)};
}

std::string config(const std::string& name) { return "'" + (source_dir / "configs" / name).string() + "'"; }

json read_json(const fs::path& p) { return json::parse(jobs::read_file(p)); }

fs::path write_config(const std::string& name, const json& j) {
  const auto p = scratch() / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

bool staging_left(const fs::path& parent) {
  for (const auto& e : fs::directory_iterator(parent))
    if (e.path().filename().string().find(".staging-") != std::string::npos) return true;
  return false;
}

json parse(const std::string& text) { return json::parse(text); }

ErrorKind config_error(const json& j, std::optional<jobs::JobKind> kind = std::nullopt) {
  try {
    jobs::parse_config(j, source_dir / "configs", kind);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(Cli, GapTwoDiskIsHalfLyapunov) {
  const auto out = scratch() / "gap2";
  const auto r = cli("gap --config " + config("gap_two_disk.json") + " --out '" + out.string() + "'");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto g = read_json(out / "gap.json");
  const double L = 4.0, half = 1 + L + std::sqrt(L * (L + 2));  // unit disks, gap 4
  const double lambda = std::log(half * half) / 8.0;
  EXPECT_NEAR(g["gap_width"].get<double>(), lambda / 2, 1e-6);
  EXPECT_TRUE(g["informative"].get<bool>());
}

TEST(Cli, DimensionThreeEstimators) {
  const auto out = scratch() / "dim";
  const auto r = cli("dimension --config " + config("dimension_three_funnel.json") + " --out '" + out.string() + "'");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto d = read_json(out / "dimension.json");
  const auto& e = d["estimators"];
  const double b = e["bowen"], t = e["transfer_eigenvalue"], z = e["determinant_zero"], bc = e["box_count"];
  EXPECT_NEAR(b, t, 1e-3);
  EXPECT_NEAR(b, z, 1e-3);
  EXPECT_NEAR(t, z, 1e-3);
  EXPECT_NEAR(bc, b, 0.05);
  EXPECT_EQ(d["agreement"].size(), 6u);
}

TEST(Cli, ZeroHeightRectangleRejected) {
  const auto out = scratch() / "invalid";
  const auto r = cli("resonances --config " + config("invalid_zero_height.json") + " --out '" + out.string() + "'");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("ConfigInvalid"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("rectangle"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(out));
  EXPECT_FALSE(staging_left(scratch()));
}

TEST(Cli, NumericalFailureLeavesNothing) {
  // a single periodic orbit has no pressure sign change on [0, 1]
  const auto cfg = write_config("dim_two_disk.json", {{"schema_version", 1},
                                                      {"model", {{"file", (source_dir / "configs/models/two_disk.json").string()}}},
                                                      {"params", {{"max_word_length", 4}}}});
  const auto out = scratch() / "dim_fail";
  const auto r = cli("dimension --config '" + cfg.string() + "' --out '" + out.string() + "'");
  EXPECT_EQ(r.status, 3);
  EXPECT_NE(r.err.find("NoBracket"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(out));
  EXPECT_FALSE(staging_left(scratch()));
}

TEST(Cli, JobFieldMustMatchSubcommand) {
  const auto r = cli("pressure --config " + config("gap_two_disk.json") + " --out '" + (scratch() / "x").string() + "'");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("job"), std::string::npos) << r.err;
}

TEST(Cli, MissingOutputDirectory) {
  const auto r = cli("gap --config " + config("gap_two_disk.json"));
  EXPECT_EQ(r.status, 2);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli("").status, 2);
  EXPECT_EQ(cli("gap").status, 2);
  EXPECT_EQ(cli("gap --config /nonexistent/file.json --out x").status, 2);
  EXPECT_EQ(cli("--version").status, 0);
}

TEST(Cli, ManifestChecksums) {
  const auto out = scratch() / "orbits";
  const auto r = cli("orbits --config " + config("orbits_three_disk.json") + " --out '" + out.string() + "'");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto m = read_json(out / "manifest.json");
  EXPECT_EQ(m["job"], "orbits");
  EXPECT_EQ(m["version"], std::string(version));
  EXPECT_FALSE(m["created_utc"].get<std::string>().empty());
  ASSERT_FALSE(m["outputs"].empty());
  for (const auto& f : m["outputs"])
    EXPECT_EQ(f["sha256"], jobs::sha256_hex(jobs::read_file(out / f["file"].get<std::string>())));
  ASSERT_EQ(m["inputs"].size(), 2u);  // config and model file
  for (const auto& f : m["inputs"]) EXPECT_EQ(f["sha256"], jobs::sha256_hex(jobs::read_file(f["path"].get<std::string>())));
}

TEST(Cli, DeterministicAcrossRunsAndThreads) {
  for (const std::string job : {"pressure", "orbits", "resonances", "fup"}) {
    const std::string name = job == "pressure"     ? "pressure_three_disk.json"
                             : job == "orbits"     ? "orbits_three_disk.json"
                             : job == "resonances" ? "resonances_two_disk.json"
                                                   : "fup_m5.json";
    const auto a = scratch() / ("det_a_" + job), b = scratch() / ("det_b_" + job);
    ASSERT_EQ(cli(job + " --config " + config(name) + " --threads 1 --out '" + a.string() + "'").status, 0) << job;
    ASSERT_EQ(cli(job + " --config " + config(name) + " --threads 3 --out '" + b.string() + "'").status, 0) << job;
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      if (e.path().filename() == "manifest.json") continue;
      ++files;
      EXPECT_EQ(jobs::read_file(e.path()), jobs::read_file(b / e.path().filename())) << e.path();
    }
    EXPECT_GT(files, 0u) << job;
    auto ma = read_json(a / "manifest.json"), mb = read_json(b / "manifest.json");
    ma.erase("created_utc");
    mb.erase("created_utc");
    EXPECT_EQ(ma, mb) << job;
  }
}

TEST(Cli, RerunReplacesOutputs) {
  const auto out = scratch() / "rerun";
  ASSERT_EQ(cli("fup --config " + config("fup_m5.json") + " --out '" + out.string() + "'").status, 0);
  const auto first = jobs::read_file(out / "fup.csv");
  ASSERT_EQ(cli("fup --config " + config("fup_m5.json") + " --out '" + out.string() + "'").status, 0);
  EXPECT_EQ(jobs::read_file(out / "fup.csv"), first);
  EXPECT_FALSE(staging_left(scratch()));
}

TEST(Cli, CacheReuseGivesIdenticalOutput) {
  const auto cache = scratch() / "cache";
  const std::string env = "RESLAB_CACHE_DIR='" + cache.string() + "'";
  const auto a = scratch() / "cache_a", b = scratch() / "cache_b";
  ASSERT_EQ(cli("pressure --config " + config("pressure_three_disk.json") + " --out '" + a.string() + "'", env).status, 0);
  ASSERT_TRUE(fs::exists(cache));
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(cache)) ++entries;
  EXPECT_GT(entries, 0u);
  ASSERT_EQ(cli("pressure --config " + config("pressure_three_disk.json") + " --out '" + b.string() + "'", env).status, 0);
  EXPECT_EQ(jobs::read_file(a / "pressure.csv"), jobs::read_file(b / "pressure.csv"));
  const auto c = scratch() / "cache_c";
  ASSERT_EQ(cli("pressure --config " + config("pressure_three_disk.json") + " --out '" + c.string() + "'").status, 0);
  EXPECT_EQ(jobs::read_file(a / "pressure.csv"), jobs::read_file(c / "pressure.csv"));
}

TEST(Config, FieldDiagnostics) {
  const auto base = parse(R"({"schema_version": 1, "model": {"file": "models/three_funnel.json"},
                              "params": {"rectangle": {"re": [0, 1], "im": [0, 5]}}})");
  EXPECT_NO_THROW(jobs::parse_config(base, source_dir / "configs", jobs::JobKind::resonances));

  auto j = base;
  j["schema_version"] = 2;
  EXPECT_EQ(config_error(j, jobs::JobKind::resonances), ErrorKind::ConfigInvalid);
  j = base;
  j["params"]["tol"] = -1e-8;
  EXPECT_EQ(config_error(j, jobs::JobKind::resonances), ErrorKind::ConfigInvalid);
  j = base;
  j["params"]["rectangle"]["re"] = {1, 0};
  EXPECT_EQ(config_error(j, jobs::JobKind::resonances), ErrorKind::ConfigInvalid);
  j = base;
  j["model"]["file"] = "models/missing.json";
  EXPECT_EQ(config_error(j, jobs::JobKind::resonances), ErrorKind::ConfigInvalid);
  j = base;
  j["job"] = "gap";
  EXPECT_EQ(config_error(j, jobs::JobKind::resonances), ErrorKind::ConfigInvalid);
  j = base;
  j.erase("model");
  EXPECT_EQ(config_error(j, jobs::JobKind::resonances), ErrorKind::ConfigInvalid);
}

TEST(Config, MessageNamesField) {
  auto j = parse(R"({"schema_version": 1, "model": {"file": "models/three_funnel.json"},
                     "params": {"rectangle": {"re": [0, 1], "im": [5, 5]}}})");
  try {
    jobs::parse_config(j, source_dir / "configs", jobs::JobKind::resonances);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("field '"), std::string::npos) << e.what();
  }
}

TEST(Config, BundledConfigsParse) {
  for (const auto& e : fs::directory_iterator(source_dir / "configs")) {
    if (e.path().extension() != ".json" || e.path().filename().string().starts_with("invalid")) continue;
    EXPECT_NO_THROW(jobs::load_config(e.path(), std::nullopt)) << e.path();
  }
}
