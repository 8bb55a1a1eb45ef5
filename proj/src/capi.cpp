#include <cstring>
#include <string>

#include "mkvlab/analysis.hpp"
#include "mkvlab/config.hpp"
#include "mkvlab/error.hpp"
#include "mkvlab/measure.hpp"
#include "mkvlab/mkvlab.h"
#include "mkvlab/runner.hpp"

struct mkv_config {
  mkv::RunConfig cfg;
};

struct mkv_result {
  mkv::RunResult r;
  std::string summary;
};

struct mkv_measure {
  mkv::EmpiricalMeasure mu;
};

namespace {

thread_local std::string last_error;

mkv_status fail(mkv_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

template <class F>
mkv_status guard(F&& f) {
  try {
    last_error.clear();
    f();
    return MKV_OK;
  } catch (const mkv::ConfigError& e) {
    return fail(MKV_ERR_CONFIG, e.what());
  } catch (const mkv::InvalidArgument& e) {
    return fail(MKV_ERR_ARGUMENT, e.what());
  } catch (const mkv::NumericalError& e) {
    return fail(MKV_ERR_NUMERICAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MKV_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MKV_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MKV_ERR_INTERNAL, "unknown error");
  }
}

#define MKV_REQUIRE(p) \
  if (!(p)) return fail(MKV_ERR_ARGUMENT, "null argument: " #p)

mkv_result* wrap(mkv::RunResult r) {
  auto* out = new mkv_result{std::move(r), {}};
  out->summary = out->r.summary.str();
  return out;
}

}  // namespace

extern "C" {

const char* mkv_version(void) { return "0.1.0"; }

const char* mkv_last_error(void) { return last_error.c_str(); }

mkv_status mkv_config_new(mkv_config** out) {
  MKV_REQUIRE(out);
  return guard([&] { *out = new mkv_config{}; });
}

mkv_status mkv_config_parse(const char* text, mkv_config** out) {
  MKV_REQUIRE(text);
  MKV_REQUIRE(out);
  return guard([&] { *out = new mkv_config{mkv::RunConfig::parse(text)}; });
}

mkv_status mkv_config_load(const char* path, mkv_config** out) {
  MKV_REQUIRE(path);
  MKV_REQUIRE(out);
  return guard([&] { *out = new mkv_config{mkv::RunConfig::load(path)}; });
}

mkv_status mkv_config_set(mkv_config* cfg, const char* key, const char* value) {
  MKV_REQUIRE(cfg);
  MKV_REQUIRE(key);
  MKV_REQUIRE(value);
  return guard([&] { cfg->cfg.set(key, value); });
}

mkv_status mkv_config_serialize(const mkv_config* cfg, char* buf, size_t cap, size_t* needed) {
  MKV_REQUIRE(cfg);
  std::string text;
  const auto s = guard([&] { text = cfg->cfg.serialize(); });
  if (s != MKV_OK) return s;
  if (needed) *needed = text.size() + 1;
  if (!buf || cap < text.size() + 1) return fail(MKV_ERR_BUFFER, "buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return MKV_OK;
}

void mkv_config_free(mkv_config* cfg) { delete cfg; }

mkv_status mkv_run(const mkv_config* cfg, mkv_result** out) {
  MKV_REQUIRE(cfg);
  MKV_REQUIRE(out);
  return guard([&] {
    *out = wrap(mkv::run_experiment(cfg->cfg));
    if (!(*out)->r.message.empty()) last_error = (*out)->r.message;
  });
}

mkv_status mkv_wasserstein_files(const char* file_a, const char* file_b, double p, const char* out_dir,
                                 mkv_result** out) {
  MKV_REQUIRE(file_a);
  MKV_REQUIRE(file_b);
  MKV_REQUIRE(out);
  return guard([&] {
    *out = wrap(mkv::run_wasserstein(file_a, file_b, p, out_dir ? out_dir : ""));
    if (!(*out)->r.message.empty()) last_error = (*out)->r.message;
  });
}

int mkv_result_exit_code(const mkv_result* r) { return r ? r->r.code : mkv::kExitFailure; }
const char* mkv_result_message(const mkv_result* r) { return r ? r->r.message.c_str() : ""; }
const char* mkv_result_summary(const mkv_result* r) { return r ? r->summary.c_str() : ""; }
const char* mkv_result_report(const mkv_result* r) { return r ? r->r.report.c_str() : ""; }
void mkv_result_free(mkv_result* r) { delete r; }

mkv_status mkv_measure_new(const double* samples, size_t n, int dim, mkv_measure** out) {
  MKV_REQUIRE(out);
  MKV_REQUIRE(samples || n == 0);
  if (dim < 1) return fail(MKV_ERR_ARGUMENT, "dimension must be >= 1");
  return guard([&] {
    std::vector<double> v(samples, samples + n * static_cast<size_t>(dim));
    *out = new mkv_measure{mkv::EmpiricalMeasure::owning(std::move(v), dim)};
  });
}

void mkv_measure_free(mkv_measure* m) { delete m; }

mkv_status mkv_measure_size(const mkv_measure* m, size_t* n, int* dim) {
  MKV_REQUIRE(m);
  if (n) *n = m->mu.size();
  if (dim) *dim = m->mu.dim();
  return MKV_OK;
}

mkv_status mkv_measure_moment(const mkv_measure* m, double p, int axis, double* out) {
  MKV_REQUIRE(m);
  MKV_REQUIRE(out);
  return guard([&] { *out = mkv::moment(m->mu, p, axis); });
}

mkv_status mkv_measure_quantile(const mkv_measure* m, double level, int axis, double* out) {
  MKV_REQUIRE(m);
  MKV_REQUIRE(out);
  return guard([&] { *out = mkv::quantile(m->mu, level, axis); });
}

mkv_status mkv_measure_expected_shortfall(const mkv_measure* m, double alpha, int axis, double* out) {
  MKV_REQUIRE(m);
  MKV_REQUIRE(out);
  return guard([&] { *out = mkv::expected_shortfall(m->mu, alpha, axis); });
}

mkv_status mkv_wasserstein(const mkv_measure* a, const mkv_measure* b, double p, double* cost, int* upper_bound) {
  MKV_REQUIRE(a);
  MKV_REQUIRE(b);
  MKV_REQUIRE(cost);
  return guard([&] {
    if (!(p >= 1.0)) throw mkv::InvalidArgument("power must be >= 1");
    const auto w = mkv::semi_wasserstein(a->mu, b->mu, mkv::Vbar::power(p));
    *cost = w.value;
    if (upper_bound) *upper_bound = w.upper_bound ? 1 : 0;
  });
}

mkv_status mkv_moment_ode_oracle(double m0, double t, double* out) {
  MKV_REQUIRE(out);
  return guard([&] { *out = mkv::moment_ode_oracle(m0, t); });
}

}  // extern "C"
