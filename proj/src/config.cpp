#include "mkvlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "mkvlab/error.hpp"
#include "mkvlab/table.hpp"

namespace mkv {

InitialLaw InitSpec::build(int dim) const {
  if (kind == "point") {
    if (static_cast<int>(value.size()) != dim) throw InvalidArgument("init point has the wrong dimension");
    return InitialLaw::point_mass(value);
  }
  if (kind == "uniform") {
    if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim)
      throw InvalidArgument("init box has the wrong dimension");
    std::vector<Interval> box;
    for (int a = 0; a < dim; ++a) box.push_back({lo[a], hi[a]});
    return InitialLaw::uniform_box(box);
  }
  if (kind == "file") return InitialLaw::from_file(path, dim);
  throw InvalidArgument("unknown init kind '" + kind + "'");
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"simulate",   "stability",      "stationary",
                                              "lions-check", "lyapunov-check", "wasserstein"};
  return names;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

template <class T>
T parse_int(const std::string& s) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
    throw InvalidArgument("not an integer: '" + s + "'");
  return v;
}

template <class T>
std::string join(const std::vector<T>& v, std::function<std::string(const T&)> f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += f(v[i]);
  }
  return out;
}

std::string num(double x) { return format_double(x); }
template <class T>
std::string integer(T x) { return std::to_string(x); }

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

Field real(std::string key, double RunConfig::*m) {
  return {key, [m](const RunConfig& c) { return num(c.*m); },
          [m](RunConfig& c, const std::string& v) { c.*m = parse_double(v); }};
}

Field text(std::string key, std::string RunConfig::*m) {
  return {key, [m](const RunConfig& c) { return c.*m; }, [m](RunConfig& c, const std::string& v) { c.*m = v; }};
}

template <class T>
Field count(std::string key, T RunConfig::*m) {
  return {key, [m](const RunConfig& c) { return integer(c.*m); },
          [m](RunConfig& c, const std::string& v) { c.*m = parse_int<T>(v); }};
}

template <class T>
Field sim_int(std::string key, T SimConfig::*m) {
  return {key, [m](const RunConfig& c) { return integer(c.sim.*m); },
          [m](RunConfig& c, const std::string& v) { c.sim.*m = parse_int<T>(v); }};
}

Field real_list(std::string key, std::vector<double> RunConfig::*m) {
  return {key, [m](const RunConfig& c) { return join<double>(c.*m, num); },
          [m](RunConfig& c, const std::string& v) {
            (c.*m).clear();
            for (const auto& s : split(v)) (c.*m).push_back(parse_double(s));
          }};
}

void add_init(std::vector<Field>& f, const std::string& prefix, InitSpec RunConfig::*m) {
  f.push_back({prefix + ".kind", [m](const RunConfig& c) { return (c.*m).kind; },
               [m](RunConfig& c, const std::string& v) {
                 if (v != "point" && v != "uniform" && v != "file")
                   throw InvalidArgument("expected point, uniform or file");
                 (c.*m).kind = v;
               }});
  auto list = [&](const std::string& name, std::vector<double> InitSpec::*vm) {
    f.push_back({prefix + "." + name, [m, vm](const RunConfig& c) { return join<double>((c.*m).*vm, num); },
                 [m, vm](RunConfig& c, const std::string& v) {
                   ((c.*m).*vm).clear();
                   for (const auto& s : split(v)) ((c.*m).*vm).push_back(parse_double(s));
                 }});
  };
  list("value", &InitSpec::value);
  list("lo", &InitSpec::lo);
  list("hi", &InitSpec::hi);
  f.push_back({prefix + ".path", [m](const RunConfig& c) { return (c.*m).path; },
               [m](RunConfig& c, const std::string& v) { (c.*m).path = v; }});
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> f;
    f.push_back({"experiment", [](const RunConfig& c) { return c.experiment; },
                 [](RunConfig& c, const std::string& v) {
                   const auto& n = experiment_names();
                   if (std::find(n.begin(), n.end(), v) == n.end()) throw InvalidArgument("unknown experiment");
                   c.experiment = v;
                 }});
    f.push_back(text("out", &RunConfig::out));
    f.push_back(real("tolerance", &RunConfig::tolerance));
    f.push_back(text("scenario.name", &RunConfig::scenario));
    f.push_back(sim_int("sim.particles", &SimConfig::particles));
    f.push_back({"sim.horizon", [](const RunConfig& c) { return num(c.sim.horizon); },
                 [](RunConfig& c, const std::string& v) { c.sim.horizon = parse_double(v); }});
    f.push_back(sim_int("sim.steps_per_unit", &SimConfig::steps_per_unit));
    f.push_back(sim_int("sim.substeps", &SimConfig::substeps));
    f.push_back(sim_int("sim.cut_level", &SimConfig::cut_level));
    f.push_back(sim_int("sim.seed", &SimConfig::seed));
    f.push_back({"sim.exit_levels", [](const RunConfig& c) { return join<int>(c.sim.exit_levels, integer<int>); },
                 [](RunConfig& c, const std::string& v) {
                   c.sim.exit_levels.clear();
                   for (const auto& s : split(v)) c.sim.exit_levels.push_back(parse_int<int>(s));
                 }});
    f.push_back({"sim.lag", [](const RunConfig& c) { return std::string(c.sim.lag == LagMode::Kappa ? "kappa" : "none"); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "kappa")
                     c.sim.lag = LagMode::Kappa;
                   else if (v == "none")
                     c.sim.lag = LagMode::None;
                   else
                     throw InvalidArgument("expected none or kappa");
                 }});
    f.push_back(sim_int("sim.threads", &SimConfig::threads));
    f.push_back(sim_int("sim.checkpoint_every", &SimConfig::checkpoint_every));
    add_init(f, "init", &RunConfig::init);
    add_init(f, "init2", &RunConfig::init2);
    f.push_back(text("stability.probe", &RunConfig::stability_probe));
    f.push_back(text("stability.certificate", &RunConfig::stability_certificate));
    f.push_back(real("stability.vbar_power", &RunConfig::stability_vbar_power));
    f.push_back({"stability.seeds",
                 [](const RunConfig& c) { return join<std::uint64_t>(c.stability_seeds, integer<std::uint64_t>); },
                 [](RunConfig& c, const std::string& v) {
                   c.stability_seeds.clear();
                   for (const auto& s : split(v)) c.stability_seeds.push_back(parse_int<std::uint64_t>(s));
                 }});
    f.push_back(real("stability.transient", &RunConfig::stability_transient));
    f.push_back(real_list("stationary.horizons", &RunConfig::stationary_horizons));
    f.push_back(count("stationary.checkpoints", &RunConfig::stationary_checkpoints));
    f.push_back(count("stationary.max_points", &RunConfig::stationary_max_points));
    f.push_back({"lions.functions",
                 [](const RunConfig& c) {
                   return join<std::string>(c.lions_functions, [](const std::string& s) { return s; });
                 },
                 [](RunConfig& c, const std::string& v) { c.lions_functions = split(v); }});
    f.push_back(count("lions.probes", &RunConfig::lions_probes));
    f.push_back(count("lions.particles", &RunConfig::lions_particles));
    f.push_back(text("lions.residual", &RunConfig::lions_residual));
    f.push_back(count("lyapunov.probes", &RunConfig::lyapunov_probes));
    f.push_back(count("lyapunov.probe_particles", &RunConfig::lyapunov_probe_particles));
    f.push_back(real("lyapunov.probe_scale", &RunConfig::lyapunov_probe_scale));
    return f;
  }();
  return f;
}

void check_choice(const std::string& v, std::initializer_list<const char*> ok, const std::string& key, int line) {
  for (const char* o : ok)
    if (v == o) return;
  throw ConfigError("unexpected value '" + v + "' for " + key, line, key);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::set<std::string> seen;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line);
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError("missing key", line);
    if (!seen.insert(key).second) throw ConfigError("duplicate key " + key, line, key);
    c.set(key, value, line);
  }
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value, int line) {
  if (key.rfind("scenario.", 0) == 0 && key != "scenario.name") {
    const std::string param = key.substr(9);
    try {
      params[param] = parse_double(value);
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string(e.what()) + " for " + key, line, key);
    }
    return;
  }
  const auto& fs = fields();
  const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == key; });
  if (it == fs.end()) throw ConfigError("unknown key " + key, line, key);
  if (key == "stability.probe") check_choice(value, {"contraction", "scheutzow"}, key, line);
  if (key == "stability.certificate") check_choice(value, {"pointwise", "integrated", "all"}, key, line);
  if (key == "lions.residual") check_choice(value, {"none", "measure", "full"}, key, line);
  try {
    it->set(*this, value);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string(e.what()) + " for " + key, line, key);
  }
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key + " = " + f.get(*this) + "\n";
    if (f.key == "scenario.name")
      for (const auto& [k, v] : params) out += "scenario." + k + " = " + num(v) + "\n";
  }
  return out;
}

}  // namespace mkv
