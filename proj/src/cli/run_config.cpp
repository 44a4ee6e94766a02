#include "tlcqm/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <nlohmann/json.hpp>
#include <sstream>

#include "tlcqm/errors.hpp"

namespace tlcqm {

namespace {

using json = nlohmann::json;

// Scalars may be given where a list is expected.
template <class T>
std::vector<T> as_list(const json& v) {
  if (v.is_array()) return v.get<std::vector<T>>();
  return {v.get<T>()};
}

struct Field {
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

std::optional<double> opt_number(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"seed", {[](const RunConfig& c) { return json(c.seed); },
                [](RunConfig& c, const json& v) { c.seed = v.get<std::uint64_t>(); }}},
      {"output_dir", {[](const RunConfig& c) { return json(c.output_dir); },
                      [](RunConfig& c, const json& v) { c.output_dir = v.get<std::string>(); }}},
      {"engression.hidden_sizes",
       {[](const RunConfig& c) { return json(c.pipeline.engression.hidden_sizes); },
        [](RunConfig& c, const json& v) { c.pipeline.engression.hidden_sizes = as_list<int>(v); }}},
      {"engression.noise_dim", {[](const RunConfig& c) { return json(c.pipeline.engression.noise_dim); },
                                [](RunConfig& c, const json& v) { c.pipeline.engression.noise_dim = v.get<int>(); }}},
      {"engression.learning_rate",
       {[](const RunConfig& c) { return json(c.pipeline.engression.learning_rate); },
        [](RunConfig& c, const json& v) { c.pipeline.engression.learning_rate = v.get<double>(); }}},
      {"engression.epochs", {[](const RunConfig& c) { return json(c.pipeline.engression.epochs); },
                             [](RunConfig& c, const json& v) { c.pipeline.engression.epochs = v.get<int>(); }}},
      {"engression.m_train", {[](const RunConfig& c) { return json(c.pipeline.engression.m_train); },
                              [](RunConfig& c, const json& v) { c.pipeline.engression.m_train = v.get<int>(); }}},
      {"engression.batch_size",
       {[](const RunConfig& c) { return json(c.pipeline.engression.batch_size); },
        [](RunConfig& c, const json& v) { c.pipeline.engression.batch_size = v.get<int>(); }}},
      {"engression.noise_law",
       {[](const RunConfig& c) { return json(to_string(c.pipeline.engression.noise_law)); },
        [](RunConfig& c, const json& v) {
          c.pipeline.engression.noise_law = noise_law_from_string(v.get<std::string>());
        }}},
      {"engression.standardize_response",
       {[](const RunConfig& c) { return json(c.pipeline.engression.standardize_response); },
        [](RunConfig& c, const json& v) { c.pipeline.engression.standardize_response = v.get<bool>(); }}},
      {"pipeline.M", {[](const RunConfig& c) { return json(c.pipeline.M); },
                      [](RunConfig& c, const json& v) { c.pipeline.M = v.get<int>(); }}},
      {"pipeline.M_pred", {[](const RunConfig& c) { return json(c.pipeline.M_pred); },
                           [](RunConfig& c, const json& v) { c.pipeline.M_pred = v.get<int>(); }}},
      {"pipeline.constraint_mode",
       {[](const RunConfig& c) { return json(to_string(c.pipeline.constraint_mode)); },
        [](RunConfig& c, const json& v) {
          c.pipeline.constraint_mode = constraint_mode_from_string(v.get<std::string>());
        }}},
      {"pipeline.use_density_ratio",
       {[](const RunConfig& c) { return json(c.pipeline.use_density_ratio); },
        [](RunConfig& c, const json& v) { c.pipeline.use_density_ratio = v.get<bool>(); }}},
      {"pipeline.standardize", {[](const RunConfig& c) { return json(c.pipeline.standardize); },
                                [](RunConfig& c, const json& v) { c.pipeline.standardize = v.get<bool>(); }}},
      {"pipeline.predict_mode",
       {[](const RunConfig& c) { return json(to_string(c.pipeline.predict_mode)); },
        [](RunConfig& c, const json& v) {
          c.pipeline.predict_mode = predict_mode_from_string(v.get<std::string>());
        }}},
      {"quantile_match.tol", {[](const RunConfig& c) { return json(c.pipeline.qm_tol); },
                              [](RunConfig& c, const json& v) { c.pipeline.qm_tol = v.get<double>(); }}},
      {"quantile_match.max_iter", {[](const RunConfig& c) { return json(c.pipeline.qm_max_iter); },
                                   [](RunConfig& c, const json& v) { c.pipeline.qm_max_iter = v.get<int>(); }}},
      {"quantile_match.ridge", {[](const RunConfig& c) { return json(c.pipeline.qm_ridge); },
                                [](RunConfig& c, const json& v) { c.pipeline.qm_ridge = v.get<double>(); }}},
      {"kmm.bandwidth", {[](const RunConfig& c) { return opt_json(c.pipeline.kmm.bandwidth); },
                         [](RunConfig& c, const json& v) { c.pipeline.kmm.bandwidth = opt_number(v); }}},
      {"kmm.B_zeta", {[](const RunConfig& c) { return json(c.pipeline.kmm.B_zeta); },
                      [](RunConfig& c, const json& v) { c.pipeline.kmm.B_zeta = v.get<double>(); }}},
      {"kmm.xi", {[](const RunConfig& c) { return opt_json(c.pipeline.kmm.xi); },
                  [](RunConfig& c, const json& v) { c.pipeline.kmm.xi = opt_number(v); }}},
      {"kmm.max_iter", {[](const RunConfig& c) { return json(c.pipeline.kmm.max_iter); },
                        [](RunConfig& c, const json& v) { c.pipeline.kmm.max_iter = v.get<int>(); }}},
      {"kmm.tol", {[](const RunConfig& c) { return json(c.pipeline.kmm.tol); },
                   [](RunConfig& c, const json& v) { c.pipeline.kmm.tol = v.get<double>(); }}},
      {"kmm.dykstra_iters", {[](const RunConfig& c) { return json(c.pipeline.kmm.dykstra_iters); },
                             [](RunConfig& c, const json& v) { c.pipeline.kmm.dykstra_iters = v.get<int>(); }}},
      {"kmm.power_iters", {[](const RunConfig& c) { return json(c.pipeline.kmm.power_iters); },
                           [](RunConfig& c, const json& v) { c.pipeline.kmm.power_iters = v.get<int>(); }}},
      {"learners.names", {[](const RunConfig& c) { return json(c.learners); },
                          [](RunConfig& c, const json& v) { c.learners = as_list<std::string>(v); }}},
      {"learners.folds", {[](const RunConfig& c) { return json(c.folds); },
                          [](RunConfig& c, const json& v) { c.folds = v.get<int>(); }}},
      {"learners.mlp_epochs", {[](const RunConfig& c) { return json(c.mlp_epochs); },
                               [](RunConfig& c, const json& v) { c.mlp_epochs = v.get<int>(); }}},
      {"scenario.n0", {[](const RunConfig& c) { return json(c.n0); },
                       [](RunConfig& c, const json& v) { c.n0 = as_list<int>(v); }}},
      {"scenario.ratio", {[](const RunConfig& c) { return json(c.ratio); },
                          [](RunConfig& c, const json& v) { c.ratio = as_list<double>(v); }}},
      {"scenario.test_size", {[](const RunConfig& c) { return json(c.test_size); },
                              [](RunConfig& c, const json& v) { c.test_size = v.get<int>(); }}},
      {"bench.repetitions", {[](const RunConfig& c) { return json(c.repetitions); },
                             [](RunConfig& c, const json& v) { c.repetitions = v.get<int>(); }}},
  };
  return table;
}

void apply(RunConfig& config, const std::string& key, const json& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown configuration key '" + key + "'");
  try {
    it->second.set(config, value);
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::defaults() {
  RunConfig c;
  if (const char* env = std::getenv("TLCQM_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("TLCQM_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  return c;
}

RunConfig RunConfig::from_json_text(const std::string& text, RunConfig base) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) apply(base, key, value);
  return base;
}

RunConfig RunConfig::load(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str(), std::move(base));
}

void RunConfig::set(const std::string& key, const std::string& json_value) {
  json v;
  try {
    v = json::parse(json_value);
  } catch (const json::parse_error&) {
    v = json_value;  // bare strings
  }
  apply(*this, key, v);
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [key, field] : fields()) out.push_back(key);
  return out;
}

std::string RunConfig::to_json() const {
  json doc = json::object();
  for (const auto& [key, field] : fields()) doc[key] = field.get(*this);
  return doc.dump(1);
}

std::vector<LearnerKind> RunConfig::learner_kinds() const {
  std::vector<LearnerKind> out;
  for (const auto& name : learners) {
    try {
      out.push_back(learner_kind_from_string(name));
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

BenchOptions RunConfig::bench_options() const {
  BenchOptions o;
  o.scenarios.clear();
  for (int n : n0) {
    for (double r : ratio) {
      SimScenario s;
      s.n0 = n;
      s.ratio = r;
      s.test_size = test_size;
      o.scenarios.push_back(s);
    }
  }
  o.learners = learner_kinds();
  o.repetitions = repetitions;
  o.folds = folds;
  o.mlp_epochs = mlp_epochs;
  o.pipeline = pipeline;
  o.pipeline.seed = seed;
  return o;
}

void RunConfig::validate() const {
  try {
    bench_options().validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace tlcqm
