#include <fstream>
#include <sstream>

#include "din/cli.hpp"
#include "din/error.hpp"
#include "json.hpp"

namespace din::cli {

using nlohmann::json;

Task parse_task(const std::string& name) {
  if (name == "image") return Task::image;
  if (name == "sampler") return Task::sampler;
  if (name == "ggx") return Task::ggx;
  if (name == "sdf") return Task::sdf;
  throw ConfigError("unknown task '" + name + "'");
}

std::string to_string(Task task) {
  switch (task) {
    case Task::image: return "image";
    case Task::sampler: return "sampler";
    case Task::ggx: return "ggx";
    case Task::sdf: return "sdf";
  }
  return "?";
}

namespace {

template <class T>
T get(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

void parse_train(const json& j, TrainConfig& t) {
  if (!j.is_object()) throw ConfigError("config key 'train' must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "learning_rate") t.learning_rate = get<double>(v, key);
    else if (key == "beta1") t.beta1 = get<double>(v, key);
    else if (key == "beta2") t.beta2 = get<double>(v, key);
    else if (key == "adam_eps") t.adam_eps = get<double>(v, key);
    else if (key == "batch_size") t.batch_size = get<std::size_t>(v, key);
    else if (key == "steps") t.steps = get<std::int64_t>(v, key);
    else if (key == "clipping") t.clipping = parse_clip_mode(get<std::string>(v, key));
    else if (key == "kappa") t.kappa = get<double>(v, key);
    else if (key == "epsilon") t.epsilon = get<double>(v, key);
    else if (key == "schedule") {
      if (v.is_null()) {
        t.schedule.reset();
        continue;
      }
      StepDecay s;
      for (const auto& [k2, v2] : v.items()) {
        if (k2 == "factor") s.factor = get<double>(v2, k2);
        else if (k2 == "every") s.every = get<std::int64_t>(v2, k2);
        else throw ConfigError("unknown config key 'train.schedule." + k2 + "'");
      }
      t.schedule = s;
    } else {
      throw ConfigError("unknown config key 'train." + key + "'");
    }
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, RunConfig c) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "task") c.task = parse_task(get<std::string>(v, key));
    else if (key == "input") c.input = get<std::string>(v, key);
    else if (key == "shape") c.shape = get<std::string>(v, key);
    else if (key == "compression") c.compression = get<double>(v, key);
    else if (key == "budget_bytes") c.budget_bytes = get<std::uint64_t>(v, key);
    else if (key == "rho") c.rho = get<double>(v, key);
    else if (key == "cascaded_dims") c.cascaded_dims = get<int>(v, key);
    else if (key == "epochs") c.epochs = get<int>(v, key);
    else if (key == "quantize") {
      const auto q = get<std::string>(v, key);
      if (q != "none" && q != "u8") throw ConfigError("quantize must be 'none' or 'u8'");
      c.quantize = q == "u8";
    } else if (key == "train") parse_train(v, c.train);
    else if (key == "out") c.out = get<std::string>(v, key);
    else if (key == "seed") c.seed = get<std::uint64_t>(v, key);
    else if (key == "footprints") c.footprints = get<std::vector<double>>(v, key);
    else if (key == "ignore_footprint") c.ignore_footprint = get<bool>(v, key);
    else if (key == "density_weighting") c.density_weighting = get<bool>(v, key);
    else if (key == "target_cap") {
      if (v.is_null()) c.target_cap.reset();
      else c.target_cap = get<double>(v, key);
    } else if (key == "near_samples") c.near_samples = get<std::size_t>(v, key);
    else if (key == "resample") c.resample = get<bool>(v, key);
    else if (key == "test_points") c.test_points = get<std::size_t>(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), std::move(base));
}

}  // namespace din::cli
