#pragma once

// Combiner configuration and the eight named presets.

#include <json.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "wordpred/error.hpp"
#include "wordpred/lsa_predictor.hpp"

namespace wordpred {

enum class Method { baseline, cache, semantic_cache, rerank, li, gi, cwli, cwgi };

inline constexpr std::array<std::pair<Method, std::string_view>, 8> kMethodNames{{
    {Method::baseline, "baseline"},
    {Method::cache, "cache"},
    {Method::semantic_cache, "semantic-cache"},
    {Method::rerank, "rerank"},
    {Method::li, "li"},
    {Method::gi, "gi"},
    {Method::cwli, "cwli"},
    {Method::cwgi, "cwgi"},
}};

inline std::string_view to_string(Method m) {
  for (const auto& [k, name] : kMethodNames) {
    if (k == m) return name;
  }
  return "baseline";
}

inline Method method_from_string(std::string_view s) {
  for (const auto& [k, name] : kMethodNames) {
    if (name == s) return k;
  }
  if (s == "semcache" || s == "semantic_cache") return Method::semantic_cache;
  throw Error("unknown combination method '" + std::string(s) + "'");
}

/// Methods that need a semantic space.
inline bool uses_space(Method m) { return m != Method::baseline && m != Method::cache; }

struct CombinerConfig {
  std::string name = "baseline";
  Method method = Method::baseline;
  /// Weight of the n-gram model for li/gi.
  double lambda = 1.0;
  double gamma = kDefaultGamma;
  /// Influence constant: cache scale, rerank bonus, or confidence ceiling.
  double beta = 0.0;
  std::size_t cache_length = 400;
  double mu = 20.0;
  std::size_t neighbors = 10;
  double theta = 0.4;
  std::size_t n_best = 1000;
  std::size_t list_size = 5;
  /// Highest n-gram order used at query time (clamped to the model's order).
  int order = 4;
  /// Number of most recent words forming the LSA context; whole session when unset.
  std::optional<std::size_t> context_window;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("lambda must be in [0,1]");
    if (!(gamma > 0.0)) throw Error("gamma must be positive");
    if (!(beta >= 0.0)) throw Error("beta must be non-negative");
    if (cache_length == 0) throw Error("cache length must be at least 1");
    if (!(mu >= 0.0)) throw Error("mu must be non-negative");
    if (!(theta >= 0.0 && theta <= 1.0)) throw Error("theta must be in [0,1]");
    if (n_best == 0) throw Error("n_best must be at least 1");
    if (list_size == 0) throw Error("list_size must be at least 1");
    if (order < 1) throw Error("order must be at least 1");
    if (context_window && *context_window == 0) throw Error("context_window must be at least 1");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"v", 1},
                        {"name", name},
                        {"method", std::string(to_string(method))},
                        {"lambda", lambda},
                        {"gamma", gamma},
                        {"beta", beta},
                        {"cache_length", cache_length},
                        {"mu", mu},
                        {"neighbors", neighbors},
                        {"theta", theta},
                        {"n_best", n_best},
                        {"list_size", list_size},
                        {"order", order}};
    if (context_window) j["context_window"] = *context_window;
    return j;
  }

  /// Missing keys take the defaults of the named method's preset.
  static CombinerConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("config must be a JSON object");
    const auto method = method_from_string(j.value("method", std::string("baseline")));
    CombinerConfig c = defaults_for(method);
    try {
      c.name = j.value("name", c.name);
      c.lambda = j.value("lambda", c.lambda);
      if (j.contains("lambda_lsa")) c.lambda = 1.0 - j.at("lambda_lsa").get<double>();
      c.gamma = j.value("gamma", c.gamma);
      c.beta = j.value("beta", c.beta);
      c.cache_length = j.value("cache_length", c.cache_length);
      c.mu = j.value("mu", c.mu);
      c.neighbors = j.value("neighbors", c.neighbors);
      c.theta = j.value("theta", c.theta);
      c.n_best = j.value("n_best", c.n_best);
      c.list_size = j.value("list_size", c.list_size);
      c.order = j.value("order", c.order);
      if (j.contains("context_window") && !j.at("context_window").is_null()) {
        c.context_window = j.at("context_window").get<std::size_t>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
  }

  static CombinerConfig defaults_for(Method m) {
    CombinerConfig c;
    c.method = m;
    c.name = std::string(to_string(m));
    switch (m) {
      case Method::baseline:
        break;
      case Method::cache:
        c.cache_length = 400;
        c.beta = 0.1 / 400.0;
        break;
      case Method::semantic_cache:
        c.name = "semcache";
        c.cache_length = 4000;
        c.neighbors = 10;
        c.theta = 0.4;
        c.beta = 0.0001;
        break;
      case Method::rerank:
        c.n_best = 1000;
        c.beta = 0.001;
        break;
      case Method::li:
        c.lambda = 1.0 - 0.11;
        break;
      case Method::gi:
        c.lambda = 1.0 - 0.07;
        break;
      case Method::cwli:
      case Method::cwgi:
        c.beta = 0.4;
        break;
    }
    return c;
  }

  static const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"baseline", "cache", "li", "gi", "cwli", "cwgi", "rerank", "semcache"};
    return names;
  }

  static CombinerConfig preset(std::string_view name) {
    for (const auto& [m, n] : kMethodNames) {
      if (n == name) return defaults_for(m);
    }
    if (name == "semcache") return defaults_for(Method::semantic_cache);
    throw Error("unknown preset '" + std::string(name) + "'");
  }
};

inline CombinerConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError("bad JSON in " + path + ": " + e.what());
  }
  auto c = CombinerConfig::from_json(j);
  if (!j.contains("name")) c.name = std::filesystem::path(path).stem().string();
  return c;
}

inline void save_config(const CombinerConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write config: " + path);
  out << c.to_json().dump(2) << '\n';
}

/// Every *.json file in `dir`, keyed by config name.
inline std::map<std::string, CombinerConfig> load_config_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw LoadError("config directory not found: " + dir);
  std::map<std::string, CombinerConfig> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    auto c = load_config(entry.path().string());
    out[c.name] = c;
  }
  return out;
}

/// Accepts a preset name or a path to a JSON file.
inline CombinerConfig resolve_config(const std::string& name_or_path) {
  if (std::filesystem::exists(name_or_path)) return load_config(name_or_path);
  return CombinerConfig::preset(name_or_path);
}

}  // namespace wordpred
