#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mkvlab/mkvlab.h"

namespace {

struct Common {
  std::string config;
  std::optional<unsigned long long> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<double> tolerance;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "run configuration (key = value lines)")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "RNG seed");
  sub->add_option("--threads", c.threads, "worker threads (default: MKVLAB_THREADS, then all cores)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--tolerance", c.tolerance, "relative slack on bounds");
}

int report(mkv_result* r) {
  const int code = mkv_result_exit_code(r);
  std::fputs(mkv_result_report(r), stdout);
  if (*mkv_result_message(r)) std::fprintf(stderr, "error: %s\n", mkv_result_message(r));
  mkv_result_free(r);
  return code;
}

int config_error() {
  std::fprintf(stderr, "error: %s\n", mkv_last_error());
  return 2;
}

int run(const std::string& experiment, const Common& c) {
  mkv_config* cfg = nullptr;
  if ((c.config.empty() ? mkv_config_new(&cfg) : mkv_config_load(c.config.c_str(), &cfg)) != MKV_OK)
    return config_error();
  std::unique_ptr<mkv_config, decltype(&mkv_config_free)> hold(cfg, mkv_config_free);
  auto set = [&](const char* key, const std::string& value) { return mkv_config_set(cfg, key, value.c_str()) == MKV_OK; };
  bool ok = set("experiment", experiment);
  if (ok && c.seed) ok = set("sim.seed", std::to_string(*c.seed));
  if (ok && c.threads) ok = set("sim.threads", std::to_string(*c.threads));
  if (ok && c.out) ok = set("out", *c.out);
  if (ok && c.tolerance) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", *c.tolerance);
    ok = set("tolerance", buf);
  }
  if (!ok) return config_error();
  mkv_result* r = nullptr;
  if (mkv_run(cfg, &r) != MKV_OK) {
    std::fprintf(stderr, "error: %s\n", mkv_last_error());
    return 1;
  }
  return report(r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"McKean-Vlasov particle laboratory"};
  app.set_version_flag("--version", std::string(mkv_version()));
  app.require_subcommand(1);

  Common common;
  std::string chosen;
  for (const char* name : {"simulate", "stability", "stationary", "lions-check", "lyapunov-check"}) {
    auto* sub = app.add_subcommand(name);
    add_common(sub, common);
    sub->callback([&chosen, name] { chosen = name; });
  }

  std::string file_a, file_b, out_dir;
  double power = 1.0;
  auto* w = app.add_subcommand("wasserstein", "distance between two sample files");
  w->add_option("fileA", file_a)->required()->check(CLI::ExistingFile);
  w->add_option("fileB", file_b)->required()->check(CLI::ExistingFile);
  w->add_option("--power", power, "p >= 1");
  w->add_option("--out", out_dir, "write summary.txt here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (w->parsed()) {
    mkv_result* r = nullptr;
    if (mkv_wasserstein_files(file_a.c_str(), file_b.c_str(), power, out_dir.empty() ? nullptr : out_dir.c_str(),
                              &r) != MKV_OK) {
      std::fprintf(stderr, "error: %s\n", mkv_last_error());
      return 1;
    }
    return report(r);
  }
  return run(chosen, common);
}
