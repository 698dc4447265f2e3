#include "ammlab_cli/run_config.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace ammlab::cli {
namespace {

using nlohmann::json;

const json* find(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

template <typename T>
T get(const json& obj, const std::string& key, const std::string& path) {
  const json* v = find(obj, key);
  if (!v) throw ConfigError("missing required field '" + path + key + "'");
  try {
    return v->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("field '" + path + key + "' has the wrong type: " + e.what());
  }
}

template <typename T>
void read_optional(const json& obj, const std::string& key, const std::string& path, T& out) {
  if (find(obj, key)) out = get<T>(obj, key, path);
}

const json& section(const json& obj, const std::string& key, const std::string& path, bool required) {
  static const json empty = json::object();
  const json* v = find(obj, key);
  if (!v) {
    if (required) throw ConfigError("missing required section '" + path + key + "'");
    return empty;
  }
  if (!v->is_object()) throw ConfigError("'" + path + key + "' must be an object");
  return *v;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::optional<WeightVector> read_theta0(const json& obj, const std::string& path) {
  if (!find(obj, "theta0") || obj.at("theta0").is_null()) return std::nullopt;
  const auto v = get<std::vector<double>>(obj, "theta0", path);
  try {
    return WeightVector(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  } catch (const std::exception& e) {
    throw ConfigError("field '" + path + "theta0': " + e.what());
  }
}

json theta0_json(const std::optional<WeightVector>& t) { return t ? json(to_vector(t->values())) : json(); }

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::pipeline: return "pipeline";
    case Method::krr: return "krr";
    case Method::sqp: return "sqp";
    case Method::grid: return "grid";
    case Method::finatics: return "finatics";
    case Method::blanco: return "blanco";
    case Method::elagnitram: return "elagnitram";
  }
  return "?";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::pipeline, Method::krr,    Method::sqp,       Method::grid,
                                           Method::finatics, Method::blanco, Method::elagnitram};
  return methods;
}

Method parse_method(const std::string& name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "' (pipeline|krr|sqp|grid|finatics|blanco|elagnitram)");
}

RunConfig default_run_config() {
  RunConfig c;
  c.hardware = detect_hardware();
  return c;
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");

  RunConfig c = default_run_config();
  PipelineConfig& p = c.pipeline;

  const json& market = section(root, "market", "", true);
  p.market.kappa = get<std::vector<double>>(market, "kappa", "market.");
  p.market.p = get<std::vector<double>>(market, "p", "market.");
  p.market.sigma = get<std::vector<double>>(market, "sigma", "market.");
  read_optional(market, "t_horizon", "market.", p.market.t_horizon);
  read_optional(market, "b_paths", "market.", p.market.b_paths);
  if (const json* mode = find(market, "allpool_sigma")) {
    const auto s = mode->get<std::string>();
    if (s == "common") p.market.allpool_sigma = AllPoolSigma::common;
    else if (s == "per_pool") p.market.allpool_sigma = AllPoolSigma::per_pool;
    else throw ConfigError("field 'market.allpool_sigma' must be 'common' or 'per_pool'");
  }

  if (const json* pools = find(root, "initial_pools"); pools && !pools->is_null()) {
    if (!pools->is_array()) throw ConfigError("'initial_pools' must be an array");
    p.initial_pools.clear();
    for (std::size_t i = 0; i < pools->size(); ++i) {
      const std::string path = "initial_pools[" + std::to_string(i) + "].";
      const json& e = (*pools)[i];
      p.initial_pools.push_back({get<double>(e, "rx", path), get<double>(e, "ry", path), get<double>(e, "l_total", path),
                                 get<double>(e, "phi", path)});
    }
  } else {
    p.initial_pools = default_initial_pools(p.market.n_pools());
  }

  read_optional(root, "x0", "", p.x0);
  read_optional(root, "alpha", "", p.alpha);
  read_optional(root, "xi", "", p.xi);
  read_optional(root, "q", "", p.q);
  read_optional(root, "n_train", "", p.n_train);
  read_optional(root, "ridge_lambda", "", p.ridge_lambda);
  read_optional(root, "guard_stage3_start", "", p.guard_stage3_start);
  read_optional(root, "workers", "", p.workers);
  if (const json* u = find(root, "unwind")) {
    const auto s = u->get<std::string>();
    if (s == "optimal_split") p.unwind = UnwindRule::optimal_split;
    else if (s == "best_single_pool") p.unwind = UnwindRule::best_single_pool;
    else throw ConfigError("field 'unwind' must be 'optimal_split' or 'best_single_pool'");
  }

  const json& sqp = section(root, "sqp", "", false);
  read_optional(sqp, "max_iterations", "sqp.", p.sqp.max_iterations);
  read_optional(sqp, "gradient_fd_step", "sqp.", p.sqp.gradient_fd_step);
  read_optional(sqp, "convergence_tol", "sqp.", p.sqp.convergence_tol);
  read_optional(sqp, "max_line_search_halvings", "sqp.", p.sqp.max_line_search_halvings);

  if (const json* m = find(root, "method")) c.method = parse_method(m->get<std::string>());
  if (find(root, "seeds")) {
    c.seeds = get<std::vector<std::uint64_t>>(root, "seeds", "");
    if (c.seeds.empty()) throw ConfigError("field 'seeds' must not be empty");
  }
  read_optional(root, "grid_points", "", c.grid_points);
  read_optional(root, "hardware", "", c.hardware);

  const json& out = section(root, "output", "", false);
  read_optional(out, "dir", "output.", c.out_dir);
  read_optional(out, "stream_out", "output.", c.stream_out);

  const json& base = section(root, "baselines", "", false);
  const json& fin = section(base, "finatics", "baselines.", false);
  read_optional(fin, "eta", "baselines.finatics.", c.finatics.eta);
  read_optional(fin, "n_iter", "baselines.finatics.", c.finatics.n_iter);
  read_optional(fin, "fd_step", "baselines.finatics.", c.finatics.fd_step);
  read_optional(fin, "shared_stream", "baselines.finatics.", c.finatics.shared_stream);
  c.finatics.theta0 = read_theta0(fin, "baselines.finatics.");
  const json& bl = section(base, "blanco", "baselines.", false);
  if (find(bl, "omega") && !bl.at("omega").is_null()) {
    c.blanco.omega = get<std::array<double, 4>>(bl, "omega", "baselines.blanco.");
  }
  read_optional(bl, "beta", "baselines.blanco.", c.blanco.beta);
  read_optional(bl, "n_iter", "baselines.blanco.", c.blanco.n_iter);
  read_optional(bl, "n_gd", "baselines.blanco.", c.blanco.n_gd);
  read_optional(bl, "sigmoid_scale", "baselines.blanco.", c.blanco.sigmoid_scale);
  read_optional(bl, "fd_step", "baselines.blanco.", c.blanco.fd_step);
  read_optional(bl, "fresh_stream", "baselines.blanco.", c.blanco.fresh_stream);
  c.blanco.theta0 = read_theta0(bl, "baselines.blanco.");
  const json& el = section(base, "elagnitram", "baselines.", false);
  read_optional(el, "delta1", "baselines.elagnitram.", c.elagnitram.delta1);
  read_optional(el, "delta2", "baselines.elagnitram.", c.elagnitram.delta2);
  read_optional(el, "learning_rate", "baselines.elagnitram.", c.elagnitram.learning_rate);
  read_optional(el, "n_iter", "baselines.elagnitram.", c.elagnitram.n_iter);
  read_optional(el, "fd_step", "baselines.elagnitram.", c.elagnitram.fd_step);
  read_optional(el, "step_tol", "baselines.elagnitram.", c.elagnitram.step_tol);
  read_optional(el, "max_rejections", "baselines.elagnitram.", c.elagnitram.max_rejections);
  c.elagnitram.theta0 = read_theta0(el, "baselines.elagnitram.");
  c.finatics.q = c.blanco.q = c.elagnitram.q = p.q;

  try {
    validate(p);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string dump_run_config(const RunConfig& c) {
  const PipelineConfig& p = c.pipeline;
  json pools = json::array();
  for (const auto& pool : p.initial_pools) {
    pools.push_back({{"rx", pool.rx}, {"ry", pool.ry}, {"l_total", pool.l_total}, {"phi", pool.phi}});
  }
  json j;
  j["market"] = {{"kappa", p.market.kappa},
                 {"p", p.market.p},
                 {"sigma", p.market.sigma},
                 {"t_horizon", p.market.t_horizon},
                 {"b_paths", p.market.b_paths},
                 {"allpool_sigma", p.market.allpool_sigma == AllPoolSigma::common ? "common" : "per_pool"}};
  j["initial_pools"] = pools;
  j["x0"] = p.x0;
  j["alpha"] = p.alpha;
  j["xi"] = p.xi;
  j["q"] = p.q;
  j["n_train"] = p.n_train;
  j["ridge_lambda"] = p.ridge_lambda;
  j["guard_stage3_start"] = p.guard_stage3_start;
  j["workers"] = p.workers;
  j["unwind"] = p.unwind == UnwindRule::optimal_split ? "optimal_split" : "best_single_pool";
  j["sqp"] = {{"max_iterations", p.sqp.max_iterations},
              {"gradient_fd_step", p.sqp.gradient_fd_step},
              {"convergence_tol", p.sqp.convergence_tol},
              {"max_line_search_halvings", p.sqp.max_line_search_halvings}};
  j["method"] = to_string(c.method);
  j["seeds"] = c.seeds;
  j["grid_points"] = c.grid_points;
  j["hardware"] = c.hardware;
  j["output"] = {{"dir", c.out_dir}, {"stream_out", c.stream_out}};
  j["baselines"] = {
      {"finatics",
       {{"eta", c.finatics.eta},
        {"n_iter", c.finatics.n_iter},
        {"fd_step", c.finatics.fd_step},
        {"shared_stream", c.finatics.shared_stream},
        {"theta0", theta0_json(c.finatics.theta0)}}},
      {"blanco",
       {{"omega", c.blanco.omega ? json(*c.blanco.omega) : json()},
        {"beta", c.blanco.beta},
        {"n_iter", c.blanco.n_iter},
        {"n_gd", c.blanco.n_gd},
        {"sigmoid_scale", c.blanco.sigmoid_scale},
        {"fd_step", c.blanco.fd_step},
        {"fresh_stream", c.blanco.fresh_stream},
        {"theta0", theta0_json(c.blanco.theta0)}}},
      {"elagnitram",
       {{"delta1", c.elagnitram.delta1},
        {"delta2", c.elagnitram.delta2},
        {"learning_rate", c.elagnitram.learning_rate},
        {"n_iter", c.elagnitram.n_iter},
        {"fd_step", c.elagnitram.fd_step},
        {"step_tol", c.elagnitram.step_tol},
        {"max_rejections", c.elagnitram.max_rejections},
        {"theta0", theta0_json(c.elagnitram.theta0)}}}};
  return j.dump(2);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto dash = item.find('-');
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(item));
        continue;
      }
      const auto lo = std::stoull(item.substr(0, dash));
      const auto hi = std::stoull(item.substr(dash + 1));
      if (hi < lo) throw ConfigError("empty seed range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("malformed seed list '" + text + "'");
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

std::string detect_hardware() {
  std::string model;
  std::ifstream cpu("/proc/cpuinfo");
  for (std::string line; std::getline(cpu, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(colon + 2);
      break;
    }
  }
  std::string out = std::to_string(std::thread::hardware_concurrency()) + " threads";
  if (!model.empty()) out += ", " + model;
  return out;
}

}  // namespace ammlab::cli
