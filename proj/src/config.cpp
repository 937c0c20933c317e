#include "mpscl/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include "mpscl/error.hpp"

namespace mpscl {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ValueError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ValueError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long i = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ValueError("config: key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValueError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Field {
  const char* key;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

const std::vector<Field>& fields() {
  auto dbl = [](double TrainConfig::* member, const char* key) {
    return Field{key,
                 [member, key](TrainConfig& c, const std::string& v) {
                   c.*member = parse_double(key, v);
                 },
                 [member](const TrainConfig& c) { return fmt_double(c.*member); }};
  };
  auto i64 = [](std::int64_t TrainConfig::* member, const char* key) {
    return Field{key,
                 [member, key](TrainConfig& c, const std::string& v) {
                   c.*member = parse_int(key, v);
                 },
                 [member](const TrainConfig& c) { return std::to_string(c.*member); }};
  };
  static const std::vector<Field> fs = {
      dbl(&TrainConfig::alpha, "alpha"),
      dbl(&TrainConfig::delta_th, "delta_th"),
      dbl(&TrainConfig::margin, "margin"),
      dbl(&TrainConfig::tau, "tau"),
      dbl(&TrainConfig::gamma, "gamma"),
      dbl(&TrainConfig::beta, "beta"),
      dbl(&TrainConfig::lambda, "lambda"),
      dbl(&TrainConfig::g_lr, "g_lr"),
      dbl(&TrainConfig::g_momentum, "g_momentum"),
      dbl(&TrainConfig::g_weight_decay, "g_weight_decay"),
      dbl(&TrainConfig::d_lr, "d_lr"),
      dbl(&TrainConfig::d_beta1, "d_beta1"),
      dbl(&TrainConfig::d_beta2, "d_beta2"),
      dbl(&TrainConfig::d_eps, "d_eps"),
      i64(&TrainConfig::phase1_iters, "phase1_iters"),
      i64(&TrainConfig::phase2_iters, "phase2_iters"),
      i64(&TrainConfig::batch_size, "batch_size"),
      i64(&TrainConfig::eval_every, "eval_every"),
      i64(&TrainConfig::d_every, "d_every"),
      Field{"seed",
            [](TrainConfig& c, const std::string& v) { c.seed = parse_uint("seed", v); },
            [](const TrainConfig& c) { return std::to_string(c.seed); }},
      i64(&TrainConfig::feature_dim, "feature_dim"),
      i64(&TrainConfig::num_categories, "num_categories"),
      Field{"source_domain",
            [](TrainConfig& c, const std::string& v) { c.source_domain = v; },
            [](const TrainConfig& c) { return c.source_domain; }},
      Field{"target_domain",
            [](TrainConfig& c, const std::string& v) { c.target_domain = v; },
            [](const TrainConfig& c) { return c.target_domain; }},
      Field{"proto_include_target",
            [](TrainConfig& c, const std::string& v) {
              c.proto_include_target = parse_bool("proto_include_target", v);
            },
            [](const TrainConfig& c) { return c.proto_include_target ? "true" : "false"; }},
      i64(&TrainConfig::hist_bins, "hist_bins"),
      Field{"data_dir", [](TrainConfig& c, const std::string& v) { c.data_dir = v; },
            [](const TrainConfig& c) { return c.data_dir; }},
      Field{"out_dir", [](TrainConfig& c, const std::string& v) { c.out_dir = v; },
            [](const TrainConfig& c) { return c.out_dir; }},
  };
  return fs;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(g_lr > 0.0) || !(d_lr > 0.0)) {
    throw ValueError("config: learning rates must be positive");
  }
  if (alpha < 0.0 || alpha > 1.0) throw ValueError("config: alpha must lie in [0,1]");
  if (!(tau > 0.0)) throw ValueError("config: tau must be positive");
  if (margin < 0.0) throw ValueError("config: margin must be non-negative");
  // phase lengths of zero are allowed on purpose: phase2_iters=0 is the
  // adversarial-only ablation and lambda=beta=gamma=0 the no-adaptation one.
  if (phase1_iters < 0 || phase2_iters < 0) {
    throw ValueError("config: phase lengths must be non-negative");
  }
  if (batch_size < 1) throw ValueError("config: batch_size must be >= 1");
  if (eval_every < 1) throw ValueError("config: eval_every must be >= 1");
  if (d_every < 1) throw ValueError("config: d_every must be >= 1");
  if (feature_dim < 1) throw ValueError("config: feature_dim must be >= 1");
  if (num_categories < 2) throw ValueError("config: num_categories must be >= 2");
  if (hist_bins < 1) throw ValueError("config: hist_bins must be >= 1");
  if (source_domain == target_domain) {
    throw ValueError("config: source and target domains must differ");
  }
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValueError("config: line " + std::to_string(lineno) + " is not key=value: '" +
                       line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!is_config_key(key)) {
      throw ValueError("config: unknown key '" + key + "' at line " + std::to_string(lineno));
    }
    kv[key] = value;
  }
  return kv;
}

void apply_config_overrides(TrainConfig& cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    const Field* f = find_field(key);
    if (!f) throw ValueError("config: unknown key '" + key + "'");
    f->set(cfg, value);
  }
}

std::string config_to_text(const TrainConfig& cfg) {
  // fields() is already in a fixed order; emit sorted for canonical bytes
  std::vector<std::pair<std::string, std::string>> kv;
  for (const auto& f : fields()) kv.emplace_back(f.key, f.get(cfg));
  std::sort(kv.begin(), kv.end());
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

TrainConfig config_from_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ValueError("config text: bad line '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  apply_config_overrides(cfg, kv);
  return cfg;
}

bool is_config_key(const std::string& key) { return find_field(key) != nullptr; }

}  // namespace mpscl
