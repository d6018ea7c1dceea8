#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "netmarl/envs/sis.hpp"
#include "netmarl/sac.hpp"

namespace netmarl::harness {

using json = nlohmann::json;

/// Invalid configuration; the message carries "<source>:<line>:" when the offending key is located.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnvSpec {
  std::string kind = "wireless";  ///< wireless | sis | tabular
  double gamma = 0.7;
  // wireless and sis grids
  int h = 5, w = 5;
  // wireless
  int users_per_cell = 1;
  int life_span = 2;
  double arrival_prob = 0.5;
  std::vector<double> ap_success;  ///< empty: sampled U[0,1]
  // sis
  double initial_infection = 0.3;
  std::vector<envs::SisAgentParams> sis_params;  ///< empty: sampled
  // tabular
  std::string graph = "path";  ///< path | grid
  int agents = 3;
  int local_states = 2, local_actions = 2;
  std::string links = "static_local";  ///< static_local | geometric
  int alpha1 = 1, alpha2 = 1;
  double link_c = 1.0, link_lambda = 0.5;
};

struct ExperimentConfig {
  EnvSpec env;
  SACConfig sac;
  std::vector<double> baseline_grid;  ///< ALOHA p_empty grid; empty means no baseline
  std::size_t baseline_rollouts = 2000;
  std::size_t eval_rollouts = 20;
  std::size_t trailing_window = 100;
  std::size_t replicates = 1;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  bool checkpoints = true;
  bool oracle = true;             ///< exact return and critic residual when the global model fits
  bool record_wall_time = false;  ///< wall_ms column is 0 unless set, so CSVs stay byte-identical
  json source;                    ///< the parsed document, echoed into the manifest
};

namespace detail {

/// Maps JSON pointers ("/sac/T", "/baseline/p_empty_grid/3") to 1-based source lines.
inline std::map<std::string, int> pointer_lines(const std::string& text) {
  struct Frame {
    bool object;
    std::string path;
    std::string key;
    int index = 0;
    bool expect_key = true;
  };
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  int line = 1;
  auto escape = [](const std::string& k) {
    std::string out;
    for (char c : k) out += c == '~' ? "~0" : c == '/' ? "~1" : std::string(1, c);
    return out;
  };
  auto value_path = [&]() -> std::string {
    if (stack.empty()) return "";
    const Frame& f = stack.back();
    return f.path + "/" + (f.object ? escape(f.key) : std::to_string(f.index));
  };
  auto start_value = [&]() {
    const std::string p = value_path();
    if (!lines.count(p)) lines[p] = line;
    return p;
  };
  for (std::size_t k = 0; k < text.size(); ++k) {
    const char c = text[k];
    if (c == '\n') {
      ++line;
    } else if (c == '"') {
      std::string s;
      for (++k; k < text.size() && text[k] != '"'; ++k) {
        if (text[k] == '\\' && k + 1 < text.size()) ++k;
        if (text[k] == '\n') ++line;
        s += text[k];
      }
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        stack.back().key = s;
        stack.back().expect_key = false;
        lines[value_path()] = line;
      } else {
        start_value();
      }
    } else if (c == '{' || c == '[') {
      const std::string p = start_value();
      stack.push_back({c == '{', p, "", 0, true});
    } else if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
    } else if (c == ',') {
      if (!stack.empty()) {
        if (stack.back().object) stack.back().expect_key = true;
        else ++stack.back().index;
      }
    } else if (c != ':' && c != ' ' && c != '\t' && c != '\r') {
      start_value();
      while (k + 1 < text.size() && std::string(",]}\n \t\r").find(text[k + 1]) == std::string::npos) ++k;
    }
  }
  return lines;
}

class Reader {
 public:
  Reader(const json& doc, std::string source, std::map<std::string, int> lines)
      : doc_(doc), source_(std::move(source)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
    std::ostringstream os;
    os << source_;
    std::string p = pointer;
    while (true) {
      const auto it = lines_.find(p);
      if (it != lines_.end()) {
        os << ":" << it->second;
        break;
      }
      if (p.empty()) break;
      p = p.substr(0, p.rfind('/'));
    }
    os << ": " << (pointer.empty() ? "/" : pointer) << ": " << msg;
    throw ConfigError(os.str());
  }

  const json* find(const std::string& pointer) const {
    const json::json_pointer ptr(pointer);
    return doc_.contains(ptr) ? &doc_.at(ptr) : nullptr;
  }

  void object(const std::string& pointer, std::initializer_list<const char*> allowed) const {
    const json* v = find(pointer);
    if (!v) return;
    if (!v->is_object()) fail(pointer, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, _] : v->items())
      if (!ok.count(k)) fail(pointer + "/" + k, "unknown key");
  }

  template <class T>
  void get(const std::string& pointer, T& out) const {
    const json* v = find(pointer);
    if (!v) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) fail(pointer, "expected true or false");
      out = v->get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v->is_string()) fail(pointer, "expected a string");
      out = v->get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v->is_number_integer()) fail(pointer, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v->is_number_unsigned()) out = v->get<T>();
        else if (v->get<std::int64_t>() < 0) fail(pointer, "must be nonnegative");
        else out = static_cast<T>(v->get<std::int64_t>());
      } else {
        out = v->get<T>();
      }
    } else {
      if (!v->is_number()) fail(pointer, "expected a number");
      out = v->get<T>();
    }
  }

  void numbers(const std::string& pointer, std::vector<double>& out) const {
    const json* v = find(pointer);
    if (!v) return;
    if (!v->is_array()) fail(pointer, "expected an array of numbers");
    out.clear();
    for (std::size_t k = 0; k < v->size(); ++k) {
      if (!(*v)[k].is_number()) fail(pointer + "/" + std::to_string(k), "expected a number");
      out.push_back((*v)[k].get<double>());
    }
  }

 private:
  const json& doc_;
  std::string source_;
  std::map<std::string, int> lines_;
};

}  // namespace detail

/// Parses and validates an experiment config; every error names the source line of the offending key.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "config") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t k = 0; k < e.byte && k < text.size(); ++k) line += text[k] == '\n';
    throw ConfigError(source + ":" + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
  }
  const detail::Reader rd(doc, source, detail::pointer_lines(text));
  if (!doc.is_object()) rd.fail("", "expected an object at top level");
  rd.object("", {"env", "sac", "baseline", "evaluation", "replicates", "seed", "output", "oracle", "record_wall_time"});
  rd.object("/env", {"kind", "gamma", "grid", "users_per_cell", "life_span", "arrival_prob", "ap_success",
                     "initial_infection", "agent_params", "graph", "agents", "local_states", "local_actions", "links"});
  rd.object("/env/links", {"kind", "alpha1", "alpha2", "c", "lambda"});
  rd.object("/sac", {"kappa", "beta", "T", "M", "H", "t0", "eta", "warm_start", "sigma_prime", "K2", "W_prime"});
  rd.object("/baseline", {"kind", "p_empty_grid", "rollouts"});
  rd.object("/evaluation", {"rollouts", "trailing_window"});
  rd.object("/output", {"dir", "checkpoints"});

  ExperimentConfig cfg;
  cfg.source = doc;
  EnvSpec& env = cfg.env;
  if (!rd.find("/env")) rd.fail("/env", "missing environment section");
  rd.get("/env/kind", env.kind);
  if (env.kind != "wireless" && env.kind != "sis" && env.kind != "tabular")
    rd.fail("/env/kind", "unknown environment '" + env.kind + "' (wireless, sis or tabular)");
  rd.get("/env/gamma", env.gamma);
  if (!(env.gamma >= 0.0 && env.gamma < 1.0)) rd.fail("/env/gamma", "must lie in [0, 1)");
  if (const json* g = rd.find("/env/grid")) {
    if (!g->is_array() || g->size() != 2 || !(*g)[0].is_number_integer() || !(*g)[1].is_number_integer())
      rd.fail("/env/grid", "expected [h, w]");
    env.h = (*g)[0].get<int>();
    env.w = (*g)[1].get<int>();
    if (env.h < 1 || env.w < 1) rd.fail("/env/grid", "dimensions must be positive");
  }
  rd.get("/env/users_per_cell", env.users_per_cell);
  if (env.users_per_cell < 1) rd.fail("/env/users_per_cell", "must be at least 1");
  rd.get("/env/life_span", env.life_span);
  if (env.life_span < 1 || env.life_span > 20) rd.fail("/env/life_span", "must lie in [1, 20]");
  rd.get("/env/arrival_prob", env.arrival_prob);
  if (!(env.arrival_prob >= 0.0 && env.arrival_prob <= 1.0)) rd.fail("/env/arrival_prob", "must lie in [0, 1]");
  rd.numbers("/env/ap_success", env.ap_success);
  for (std::size_t k = 0; k < env.ap_success.size(); ++k)
    if (!(env.ap_success[k] >= 0.0 && env.ap_success[k] <= 1.0))
      rd.fail("/env/ap_success/" + std::to_string(k), "must lie in [0, 1]");
  rd.get("/env/initial_infection", env.initial_infection);
  if (!(env.initial_infection >= 0.0 && env.initial_infection <= 1.0))
    rd.fail("/env/initial_infection", "must lie in [0, 1]");
  if (const json* ps = rd.find("/env/agent_params")) {
    if (!ps->is_array()) rd.fail("/env/agent_params", "expected an array of objects");
    for (std::size_t k = 0; k < ps->size(); ++k) {
      const std::string base = "/env/agent_params/" + std::to_string(k);
      rd.object(base, {"c_s", "c_a", "p_r", "p_h", "p_m", "p_l"});
      envs::SisAgentParams p;
      for (const char* f : {"c_s", "c_a", "p_r", "p_h"})
        if (!rd.find(base + "/" + f)) rd.fail(base, std::string("missing ") + f);
      rd.get(base + "/c_s", p.c_s);
      rd.get(base + "/c_a", p.c_a);
      rd.get(base + "/p_r", p.p_r);
      rd.get(base + "/p_h", p.p_h);
      p.p_m = p.p_h / 4.0;
      rd.get(base + "/p_m", p.p_m);
      p.p_l = p.p_m / 4.0;
      rd.get(base + "/p_l", p.p_l);
      if (!(p.p_h > p.p_m && p.p_m > p.p_l && p.p_l >= 0.0 && p.p_h <= 1.0 && p.p_r >= 0.0 && p.p_r <= 1.0))
        rd.fail(base, "need probabilities in [0, 1] with p_h > p_m > p_l");
      if (!(p.c_s > 0.0 && p.c_a > 0.0)) rd.fail(base, "costs must be positive");
      env.sis_params.push_back(p);
    }
  }
  rd.get("/env/graph", env.graph);
  if (env.graph != "path" && env.graph != "grid") rd.fail("/env/graph", "expected path or grid");
  rd.get("/env/agents", env.agents);
  if (env.agents < 1) rd.fail("/env/agents", "must be at least 1");
  rd.get("/env/local_states", env.local_states);
  rd.get("/env/local_actions", env.local_actions);
  if (env.local_states < 1) rd.fail("/env/local_states", "must be at least 1");
  if (env.local_actions < 1 || env.local_actions > 64) rd.fail("/env/local_actions", "must lie in [1, 64]");
  rd.get("/env/links/kind", env.links);
  if (env.links != "static_local" && env.links != "geometric")
    rd.fail("/env/links/kind", "expected static_local or geometric");
  rd.get("/env/links/alpha1", env.alpha1);
  rd.get("/env/links/alpha2", env.alpha2);
  if (env.alpha1 < 0) rd.fail("/env/links/alpha1", "must be nonnegative");
  if (env.alpha2 < 0) rd.fail("/env/links/alpha2", "must be nonnegative");
  rd.get("/env/links/c", env.link_c);
  rd.get("/env/links/lambda", env.link_lambda);
  if (!(env.link_c >= 0.0)) rd.fail("/env/links/c", "must be nonnegative");
  if (!(env.link_lambda >= 0.0 && env.link_lambda <= 1.0)) rd.fail("/env/links/lambda", "must lie in [0, 1]");

  SACConfig& sac = cfg.sac;
  if (env.kind == "sis") sac.beta = 1;
  rd.get("/sac/kappa", sac.kappa);
  rd.get("/sac/beta", sac.beta);
  if (sac.kappa < 0) rd.fail("/sac/kappa", "must be nonnegative");
  if (sac.beta < 0) rd.fail("/sac/beta", "must be nonnegative");
  rd.get("/sac/T", sac.T);
  rd.get("/sac/M", sac.M);
  rd.get("/sac/H", sac.H);
  if (!(sac.H > 0.0)) rd.fail("/sac/H", "must be positive");
  sac.t0 = 4.0 * sac.H;
  rd.get("/sac/t0", sac.t0);
  if (!(sac.t0 >= sac.H)) rd.fail("/sac/t0", "must be at least H so that every step size is at most 1");
  rd.get("/sac/eta", sac.eta);
  if (!(sac.eta >= 0.0)) rd.fail("/sac/eta", "must be nonnegative");
  rd.get("/sac/warm_start", sac.warm_start);
  for (auto [key, field] : {std::pair{"/sac/sigma_prime", &sac.sigma_prime}, std::pair{"/sac/K2", &sac.K2},
                            std::pair{"/sac/W_prime", &sac.W_prime}}) {
    double v = 0.0;
    if (rd.find(key)) {
      rd.get(key, v);
      if (!(v > 0.0)) rd.fail(key, "must be positive");
      *field = v;
    }
  }

  if (rd.find("/baseline")) {
    std::string kind = "aloha";
    rd.get("/baseline/kind", kind);
    if (kind != "aloha") rd.fail("/baseline/kind", "only the aloha baseline exists");
    if (env.kind != "wireless") rd.fail("/baseline", "the aloha baseline needs a wireless environment");
    rd.numbers("/baseline/p_empty_grid", cfg.baseline_grid);
    if (cfg.baseline_grid.empty()) rd.fail("/baseline/p_empty_grid", "must be a nonempty array");
    for (std::size_t k = 0; k < cfg.baseline_grid.size(); ++k)
      if (!(cfg.baseline_grid[k] >= 0.0 && cfg.baseline_grid[k] <= 1.0))
        rd.fail("/baseline/p_empty_grid/" + std::to_string(k), "must lie in [0, 1]");
    rd.get("/baseline/rollouts", cfg.baseline_rollouts);
    if (cfg.baseline_rollouts < 2) rd.fail("/baseline/rollouts", "need at least 2 for a standard error");
  }
  rd.get("/evaluation/rollouts", cfg.eval_rollouts);
  if (cfg.eval_rollouts < 1) rd.fail("/evaluation/rollouts", "must be at least 1");
  rd.get("/evaluation/trailing_window", cfg.trailing_window);
  if (cfg.trailing_window < 1) rd.fail("/evaluation/trailing_window", "must be at least 1");
  rd.get("/replicates", cfg.replicates);
  if (cfg.replicates < 1) rd.fail("/replicates", "must be at least 1");
  rd.get("/seed", cfg.seed);
  rd.get("/output/dir", cfg.out_dir);
  rd.get("/output/checkpoints", cfg.checkpoints);
  rd.get("/oracle", cfg.oracle);
  rd.get("/record_wall_time", cfg.record_wall_time);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace netmarl::harness
