#include "hqao/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "hqao/errors.hpp"
#include "hqao/io.hpp"

namespace hqao {

namespace {

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw ConfigError("expected a number, got '" + s + "'");
  return v;
}

long long to_integer(const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

std::uint64_t to_unsigned(const std::string& s) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    if (!s.empty() && s[0] != '-') v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw ConfigError("expected a non-negative integer, got '" + s + "'");
  return v;
}

std::vector<double> to_grid(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) || c == '[' || c == ']'; }),
          s.end());
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(to_double(item));
  return out;
}

std::string grid_text(const std::vector<double>& g) {
  std::string s;
  for (std::size_t i = 0; i < g.size(); ++i) s += (i ? "," : "") + csv_double(g[i]);
  return s;
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define HQAO_DOUBLE(KEY, MEMBER)                                                            \
  Field {                                                                                   \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_double(v); },        \
        [](const ExperimentConfig& c) { return csv_double(c.MEMBER); }                      \
  }
#define HQAO_INT(KEY, MEMBER)                                                                            \
  Field {                                                                                                \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = static_cast<decltype(c.MEMBER)>(to_integer(v)); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }                              \
  }
#define HQAO_UINT(KEY, MEMBER)                                                          \
  Field {                                                                               \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = to_unsigned(v); },  \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }              \
  }
#define HQAO_STRING(KEY, MEMBER)                                                         \
  Field {                                                                                \
    KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = v; },                \
        [](const ExperimentConfig& c) { return c.MEMBER; }                               \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      HQAO_INT("schema_version", schema_version),
      HQAO_STRING("out", out),
      HQAO_INT("hierarchy.kappa", hierarchy.kappa),
      HQAO_DOUBLE("hierarchy.delta", hierarchy.delta),
      HQAO_STRING("hierarchy.coupling", hierarchy.coupling),
      HQAO_DOUBLE("model.mass", model.mass),
      HQAO_DOUBLE("model.a", model.a),
      HQAO_DOUBLE("model.b", model.b),
      HQAO_DOUBLE("model.beta", model.beta),
      Field{"model.beta_grid", [](ExperimentConfig& c, const std::string& v) { c.beta_grid = to_grid(v); },
            [](const ExperimentConfig& c) { return grid_text(c.beta_grid); }},
      HQAO_INT("mc.level", mc.level),
      HQAO_INT("mc.slices", mc.slices),
      HQAO_INT("mc.sweeps", mc.sweeps),
      HQAO_INT("mc.chains", mc.chains),
      HQAO_INT("mc.threads", mc.threads),
      HQAO_UINT("mc.seed", mc.seed),
      HQAO_INT("rg.population", rg.population),
      HQAO_INT("rg.cutoff", rg.cutoff),
      HQAO_INT("rg.n_max", rg.n_max),
      HQAO_INT("rg.islands", rg.islands),
      HQAO_UINT("rg.seed", rg.seed),
      HQAO_DOUBLE("bounds.epsilon", bounds.epsilon),
      HQAO_DOUBLE("bounds.tol", bounds.tol),
      HQAO_INT("bounds.n_max", bounds.n_max),
      HQAO_INT("bounds.levels", bounds.levels),
      HQAO_DOUBLE("bounds.gamma", bounds.gamma),
      HQAO_DOUBLE("bounds.margin", bounds.margin),
      HQAO_STRING("verify.mutation", verify.mutation),
  };
  return f;
}

#undef HQAO_DOUBLE
#undef HQAO_INT
#undef HQAO_UINT
#undef HQAO_STRING

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown key '" + key + "'");
}

std::string env_name(const std::string& key) {
  std::string s = "HQAO_";
  for (char c : key) s += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

int line_of(const YAML::Node& n) { return n.Mark().line + 1; }

std::string scalar_text(const YAML::Node& n, const std::string& key) {
  if (n.IsScalar()) return n.Scalar();
  if (n.IsSequence() && key == "model.beta_grid") {
    std::string s;
    for (std::size_t i = 0; i < n.size(); ++i) {
      if (!n[i].IsScalar()) throw ConfigError("beta_grid entries must be numbers", line_of(n[i]));
      s += (i ? "," : "") + n[i].Scalar();
    }
    return s;
  }
  throw ConfigError("'" + key + "' must be a scalar", line_of(n));
}

void set_at(ExperimentConfig& cfg, const std::string& key, const YAML::Node& value, const YAML::Node& key_node) {
  try {
    set_config_value(cfg, key, scalar_text(value, key));
  } catch (const ConfigError& e) {
    if (e.line() > 0) throw;
    throw ConfigError(e.what(), line_of(key_node));
  }
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  try {
    field(key).set(cfg, value);
  } catch (const ConfigError& e) {
    if (std::string(e.what()).rfind("unknown key", 0) == 0) throw;
    throw ConfigError(key + ": " + e.what(), e.line());
  }
}

std::string get_config_value(const ExperimentConfig& cfg, const std::string& key) { return field(key).get(cfg); }

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping", root.IsDefined() ? line_of(root) : 0);
  if (!root["schema_version"]) throw ConfigError("missing schema_version", 1);
  ExperimentConfig cfg;
  for (const auto& kv : root) {
    const std::string top = kv.first.Scalar();
    if (kv.second.IsMap()) {
      for (const auto& inner : kv.second) set_at(cfg, top + "." + inner.first.Scalar(), inner.second, inner.first);
    } else {
      set_at(cfg, top, kv.second, kv.first);
    }
  }
  if (cfg.schema_version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(cfg.schema_version) + " (expected " +
                          std::to_string(kSchemaVersion) + ")",
                      line_of(root["schema_version"]));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_env_overrides(ExperimentConfig& cfg, const std::function<const char*(const char*)>& getenv) {
  for (const auto& key : config_keys()) {
    if (key == "schema_version") continue;
    const std::string name = env_name(key);
    const char* v = getenv ? getenv(name.c_str()) : std::getenv(name.c_str());
    if (!v) continue;
    try {
      set_config_value(cfg, key, v);
    } catch (const ConfigError& e) {
      throw ConfigError(name + ": " + e.what());
    }
  }
}

void validate_config(const ExperimentConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(!c.out.empty(), "out must not be empty");
  need(c.hierarchy.kappa >= 2, "hierarchy.kappa must be >= 2");
  need(c.hierarchy.delta > 0.0 && c.hierarchy.delta < 0.5, "hierarchy.delta must lie in (0, 1/2)");
  need(c.hierarchy.coupling == "normalized" || c.hierarchy.coupling == "decoupled",
       "hierarchy.coupling must be normalized or decoupled");
  need(c.model.mass > 0.0, "model.mass must be positive");
  need(c.model.b >= 0.0, "model.b must be non-negative");
  need(c.model.beta > 0.0, "model.beta must be positive");
  for (double b : c.beta_grid) need(b > 0.0, "model.beta_grid entries must be positive");
  need(c.mc.level >= 0, "mc.level must be non-negative");
  need(c.mc.slices >= 2 && c.mc.slices % 2 == 0, "mc.slices must be even and >= 2");
  need(c.mc.sweeps >= 10000, "mc.sweeps must be >= 10^4");
  need(c.mc.chains >= 1 && c.mc.threads >= 1, "mc.chains and mc.threads must be >= 1");
  need(c.rg.population >= 1000, "rg.population must be >= 10^3");
  need(c.rg.islands >= 2 && c.rg.population % c.rg.islands == 0, "rg.islands must be >= 2 and divide rg.population");
  need(c.rg.cutoff >= 0, "rg.cutoff must be non-negative");
  need(c.rg.n_max >= 0 && c.rg.n_max <= 20, "rg.n_max must lie in [0, 20]");
  need(c.bounds.epsilon > 0.0 && c.bounds.epsilon < (1.0 - 2.0 * c.hierarchy.delta) / 4.0,
       "bounds.epsilon must lie in (0, (1 - 2 delta)/4)");
  need(c.bounds.tol > 0.0, "bounds.tol must be positive");
  need(c.bounds.levels >= 1 && c.bounds.n_max >= c.bounds.levels, "need 1 <= bounds.levels <= bounds.n_max");
  need(c.bounds.gamma > 0.0 && c.bounds.margin > 1.0, "need bounds.gamma > 0 and bounds.margin > 1");
  need(c.verify.mutation == "none" || c.verify.mutation == "lambda_off_by_one",
       "verify.mutation must be none or lambda_off_by_one");
}

std::string to_yaml(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    if (dot == std::string::npos) {
      out << YAML::Key << f.key << YAML::Value << f.get(cfg);
      continue;
    }
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out << YAML::EndMap;
      out << YAML::Key << s << YAML::Value << YAML::BeginMap;
      section = s;
    }
    out << YAML::Key << f.key.substr(dot + 1) << YAML::Value;
    if (f.key == "model.beta_grid") {
      out << YAML::Flow << YAML::BeginSeq;
      for (double b : cfg.beta_grid) out << csv_double(b);
      out << YAML::EndSeq;
    } else {
      out << f.get(cfg);
    }
  }
  if (!section.empty()) out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace hqao
