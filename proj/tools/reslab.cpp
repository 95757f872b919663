// reslab: batch front-end for the resonance toolkit.
//
//   reslab <job> --config PATH [--out DIR] [--threads N] [--verbose]
//
// exit status: 0 success, 2 config error, 3 numerical failure

#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "reslab/jobs.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

int run(reslab::jobs::JobKind kind, const std::string& config, const std::string& out, unsigned threads,
        bool verbose) {
  using namespace reslab;
  try {
    if (threads > 0) set_threads(threads);
    auto cfg = jobs::load_config(config, kind);
    std::filesystem::path dir;
    if (!out.empty()) dir = out;
    else if (cfg.out) dir = *cfg.out;
    else fail(ErrorKind::ConfigInvalid, "field 'out': no output directory (pass --out or set \"out\")");
    jobs::run_job(cfg, dir, jobs::Logger{verbose});
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "reslab %s: %s\n", jobs::to_string(kind).c_str(), e.what());
    return e.kind() == ErrorKind::ConfigInvalid ? exit_config : exit_numerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "reslab %s: %s\n", jobs::to_string(kind).c_str(), e.what());
    return exit_numerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reslab: scattering resonances, pressure and fractal uncertainty numerics"};
  app.set_version_flag("--version", std::string(reslab::version));
  app.require_subcommand(1);

  std::string config, out;
  unsigned threads = 0;
  bool verbose = false;
  const char* names[] = {"resonances", "pressure", "dimension", "weyl-fit", "gap", "fup", "orbits"};
  const char* help[] = {"locate zeta zeros in a rectangle",
                        "pressure curve P(beta)",
                        "limit-set dimension from several estimators",
                        "fractal Weyl exponent from windowed resonance counts",
                        "pressure gap prediction and resonance gap report",
                        "fractal uncertainty norms for a Cantor digit set",
                        "primitive periodic orbit / geodesic tables"};
  for (std::size_t i = 0; i < std::size(names); ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", config, "job config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--threads", threads, "worker cap (default: hardware concurrency)")->check(CLI::PositiveNumber);
    sub->add_flag("--verbose", verbose, "progress on stderr");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_config;
  }
  for (auto* sub : app.get_subcommands()) {
    const auto kind = reslab::jobs::job_from_string(sub->get_name());
    return run(*kind, config, out, threads, verbose);
  }
  return exit_config;
}
