#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>

#include "CLI11.hpp"
#include "din/cli.hpp"
#include "din/error.hpp"
#include "din/model_io.hpp"
#include "din/task_ggx.hpp"
#include "din/task_image.hpp"
#include "din/task_sampler.hpp"
#include "din/task_sdf.hpp"
#include "json.hpp"

namespace din::cli {

using nlohmann::ordered_json;

namespace {

// Flag values; every one is optional so the config file keeps its value
// unless the flag is given.
struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<double> compression;
  std::optional<std::uint64_t> budget_bytes;
  std::optional<double> rho;
  std::optional<std::string> quantize;
  std::optional<std::int64_t> steps;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<int> epochs;
  std::optional<int> cascaded_dims;
  std::optional<std::string> out;
  std::optional<std::string> input;
  std::optional<std::string> shape;
  std::optional<std::string> clipping;
  std::optional<double> kappa;
  std::optional<std::size_t> test_points;
  bool ignore_footprint = false;

  // evaluation / inspection
  std::string model;
  std::string reference;
  std::vector<double> footprints;
  int resolution = 64;
};

ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

RunConfig resolve(Task task, const Flags& f) {
  RunConfig c;
  c.task = task;
  if (f.config) {
    c = load_run_config(*f.config, c);
    if (c.task != task) throw ConfigError("config task '" + to_string(c.task) + "' does not match the subcommand");
  }
  if (f.seed) c.seed = *f.seed;
  if (f.compression) c.compression = *f.compression;
  if (f.budget_bytes) c.budget_bytes = *f.budget_bytes;
  if (f.rho) c.rho = *f.rho;
  if (f.quantize) {
    if (*f.quantize != "none" && *f.quantize != "u8") throw ConfigError("--quantize must be none or u8");
    c.quantize = *f.quantize == "u8";
  }
  if (f.steps) c.train.steps = *f.steps;
  if (f.lr) c.train.learning_rate = *f.lr;
  if (f.batch) c.train.batch_size = *f.batch;
  if (f.epochs) c.epochs = *f.epochs;
  if (f.cascaded_dims) c.cascaded_dims = *f.cascaded_dims;
  if (f.out) c.out = *f.out;
  if (f.input) c.input = *f.input;
  if (f.shape) c.shape = *f.shape;
  if (f.clipping) c.train.clipping = parse_clip_mode(*f.clipping);
  if (f.kappa) c.train.kappa = *f.kappa;
  if (f.test_points) c.test_points = *f.test_points;
  if (f.ignore_footprint) c.ignore_footprint = true;
  if (!f.footprints.empty()) c.footprints = f.footprints;
  c.train.seed = c.seed;
  c.train.validate();
  if ((task == Task::image || task == Task::sampler) && c.input.empty()) {
    throw ConfigError("an input image is required (--input)");
  }
  return c;
}

AnalyticSdf make_shape(const std::string& name) {
  switch (parse_shape_kind(name)) {
    case ShapeKind::sphere: return AnalyticSdf::sphere({0.5, 0.5, 0.5}, 0.25);
    case ShapeKind::torus: return AnalyticSdf::torus({0.5, 0.5, 0.5}, 0.25, 0.1);
    case ShapeKind::box: return AnalyticSdf::box({0.5, 0.5, 0.5}, {0.2, 0.15, 0.1});
  }
  throw ConfigError("unknown shape");
}

// Held-out sets use a stream separate from training.
Rng eval_rng(std::uint64_t seed) { return Rng(seed ^ 0x9e3779b97f4a7c15ULL); }

ordered_json layout_json(const Layout& l) {
  ordered_json j;
  j["kind"] = std::string(to_string(l.kind));
  j["rho"] = l.rho;
  j["channels"] = l.channels;
  j["cascaded_dims"] = l.cascaded_dims;
  j["primary_resolution"] = l.primary_resolution;
  if (l.kind == LayoutKind::sampler) {
    j["footprint_resolution"] = l.footprint_resolution;
    j["lod_resolution"] = l.lod_resolution;
  }
  j["cascaded_resolution"] = l.cascaded_resolution;
  j["budget_bytes"] = l.budget_bytes;
  j["achieved_bytes"] = l.achieved_bytes;
  if (l.uncompressed_bytes > 0) {
    j["uncompressed_bytes"] = l.uncompressed_bytes;
    j["requested_compression"] = l.requested_compression;
    j["achieved_compression"] = l.achieved_compression;
  }
  return j;
}

ordered_json footprint_table(std::span<const FootprintPsnr> rows) {
  ordered_json t = ordered_json::array();
  for (const auto& r : rows) t.push_back({{"footprint", r.footprint}, {"psnr", number(r.psnr)}});
  return t;
}

// Saves the model, appends the report line and echoes it.
void finish(const RunConfig& c, const DInNetwork& net, ordered_json layout, ordered_json metrics, double seconds,
            std::ostream& out) {
  std::filesystem::create_directories(c.out);
  const auto bytes = encode_model(net);
  const auto model_path = c.out / "model.din";
  {
    std::ofstream f(model_path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("cannot write " + model_path.string());
  }
  ordered_json r;
  r["task"] = to_string(c.task);
  r["layout"] = std::move(layout);
  r["metrics"] = std::move(metrics);
  r["seconds"] = seconds;
  r["seed"] = c.seed;
  r["quantize"] = c.quantize ? "u8" : "none";
  r["model"] = model_path.string();
  r["model_bytes"] = bytes.size();
  r["model_crc32"] = crc32_of(bytes);
  const std::string line = r.dump();
  std::ofstream rep(c.out / "report.jsonl", std::ios::app);
  rep << line << '\n';
  if (!rep) throw IoError("cannot write " + (c.out / "report.jsonl").string());
  out << line << '\n';
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void train_image_cmd(const RunConfig& c, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto stack = read_image_any(c.input);
  ImageTaskConfig cfg;
  if (c.compression) cfg.compression = *c.compression;
  cfg.rho = c.rho;
  if (c.cascaded_dims) cfg.cascaded_dims = *c.cascaded_dims;
  if (c.epochs) cfg.epochs = *c.epochs;
  cfg.train = c.train;
  cfg.roles = stack.roles;
  auto model = train_image(stack.image, cfg);
  const auto& img = stack.image;
  ordered_json m;
  m["psnr_float"] = number(psnr(decode_image(model.net, img.width, img.height), img));
  m["psnr_baseline"] = number(psnr(downsample_baseline(img, cfg.compression), img));
  DInNetwork saved = c.quantize ? quantize_network(model.net) : model.net;
  m["psnr"] = number(psnr(decode_image(saved, img.width, img.height), img));
  m["steps"] = model.report.steps;
  m["final_loss"] = model.report.losses.empty() ? 0.0 : model.report.losses.back();
  finish(c, saved, layout_json(model.layout), std::move(m), elapsed(t0), out);
}

void train_sampler_cmd(const RunConfig& c, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto stack = read_image_any(c.input);
  SamplerTaskConfig cfg;
  if (c.compression) cfg.compression = *c.compression;
  if (c.rho) cfg.rho = *c.rho;
  if (c.epochs) cfg.epochs = *c.epochs;
  cfg.train = c.train;
  cfg.roles = stack.roles;
  cfg.ignore_footprint = c.ignore_footprint;
  auto model = train_sampler(stack.image, cfg);
  DInNetwork saved = c.quantize ? quantize_network(model.net) : model.net;
  const auto chain = build_mip_chain(stack.image);
  const auto rows = sampler_psnr_table(saved, chain, c.footprints, c.ignore_footprint);
  std::filesystem::create_directories(c.out);
  write_psnr_csv(rows, c.out / "psnr.csv");
  ordered_json m;
  m["psnr_by_footprint"] = footprint_table(rows);
  m["steps"] = model.report.steps;
  finish(c, saved, layout_json(model.layout), std::move(m), elapsed(t0), out);
}

void train_ggx_cmd(const RunConfig& c, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  GgxTaskConfig cfg;
  cfg.train = c.train;
  cfg.density_weighting = c.density_weighting;
  cfg.target_cap = c.target_cap;
  auto model = train_ggx(cfg);
  DInNetwork saved = c.quantize ? quantize_network(model.net) : model.net;
  auto rng = eval_rng(c.seed);
  const auto hold = sample_ggx_inputs(rng, c.test_points);
  const double scale = ggx_normalizer(hold);
  ordered_json layout;
  layout["primary_resolution"] = cfg.primary_resolution;
  layout["cascaded_resolution"] = cfg.cascaded_resolution;
  layout["achieved_bytes"] = 2 * cfg.primary_resolution * cfg.primary_resolution +
                             cfg.cascaded_resolution * cfg.cascaded_resolution;
  ordered_json m;
  m["psnr"] = number(ggx_psnr(saved, hold, scale));
  m["normalizer"] = scale;
  m["target_scale"] = model.target_scale;
  m["steps"] = model.report.steps;
  finish(c, saved, std::move(layout), std::move(m), elapsed(t0), out);
}

ordered_json sdf_metrics(const SdfMetrics& e) {
  ordered_json m;
  m["iou"] = e.iou ? ordered_json(*e.iou) : ordered_json(nullptr);
  m["mae"] = e.mae;
  m["sign_errors"] = e.sign_errors;
  m["points"] = e.points;
  return m;
}

void train_sdf_cmd(const RunConfig& c, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto shape = make_shape(c.shape);
  SdfTaskConfig cfg;
  if (c.budget_bytes) cfg.budget_bytes = *c.budget_bytes;
  if (c.rho) cfg.rho = *c.rho;
  if (c.epochs) cfg.epochs = *c.epochs;
  if (c.near_samples) cfg.counts = {*c.near_samples, *c.near_samples / 50};
  cfg.resample = c.resample;
  cfg.train = c.train;
  auto model = train_sdf(shape, cfg);
  DInNetwork saved = c.quantize ? quantize_network(model.net) : model.net;
  auto rng = eval_rng(c.seed);
  const auto pts = sample_sdf_test_points(shape, c.test_points, cfg.sigma, rng);
  auto m = sdf_metrics(eval_sdf(saved, shape, pts));
  m["shape"] = c.shape;
  m["sign_agreement_u8"] = sign_agreement(model.net, quantize_network(model.net), pts);
  m["steps"] = model.report.steps;
  finish(c, saved, layout_json(model.layout), std::move(m), elapsed(t0), out);
}

void eval_image_cmd(const Flags& f, std::ostream& out) {
  const auto net = load_model(f.model);
  const auto ref = read_image_any(f.reference).image;
  const auto decoded = decode_image(net, ref.width, ref.height);
  if (decoded.channels != ref.channels) throw ConfigError("model and reference channel counts differ");
  ordered_json r;
  r["psnr"] = number(psnr(decoded, ref));
  if (f.out) {
    write_image_any(decoded, default_channel_roles(decoded.channels), *f.out);
    r["decoded"] = *f.out;
  }
  out << r.dump() << '\n';
}

void eval_sampler_cmd(const Flags& f, std::ostream& out) {
  const auto net = load_model(f.model);
  const auto chain = build_mip_chain(read_image_any(f.reference).image);
  const std::vector<double> fs = f.footprints.empty() ? RunConfig{}.footprints : f.footprints;
  const auto rows = sampler_psnr_table(net, chain, fs, f.ignore_footprint);
  if (f.out) write_psnr_csv(rows, *f.out);
  ordered_json r;
  r["psnr_by_footprint"] = footprint_table(rows);
  out << r.dump() << '\n';
}

void eval_sdf_cmd(const Flags& f, std::ostream& out) {
  const auto net = load_model(f.model);
  const auto shape = make_shape(f.shape.value_or("sphere"));
  auto rng = eval_rng(f.seed.value_or(1));
  const auto pts = sample_sdf_test_points(shape, f.test_points.value_or(RunConfig{}.test_points), 0.01, rng);
  const auto e = eval_sdf(net, shape, pts);
  if (f.out) {
    std::ofstream csv(*f.out);
    csv.precision(17);
    csv << "shape,points,iou,mae,sign_errors\n"
        << f.shape.value_or("sphere") << ',' << e.points << ',' << (e.iou ? *e.iou : std::nan("")) << ',' << e.mae
        << ',' << e.sign_errors << '\n';
    if (!csv) throw IoError("cannot write " + *f.out);
  }
  auto r = sdf_metrics(e);
  r["shape"] = f.shape.value_or("sphere");
  out << r.dump() << '\n';
}

void info_cmd(const Flags& f, std::ostream& out) {
  const auto net = load_model(f.model);
  const auto info = describe_model(net);
  ordered_json r;
  r["magic"] = std::string(kModelMagic, 4);
  r["version"] = info.version;
  r["file_bytes"] = std::filesystem::file_size(f.model);
  r["input_dims"] = net.input_dims();
  r["output_channels"] = net.output_channels();
  ordered_json arrays = ordered_json::array();
  for (std::size_t i = 0; i < info.arrays.size(); ++i) {
    const auto& a = info.arrays[i];
    ordered_json ja;
    ja["role"] = i + 1 == info.arrays.size() ? "cascaded" : "primary";
    ja["shape"] = a.shape;
    ja["channels"] = a.channels;
    ja["nonlinearity"] = std::string(to_string(a.nonlinearity));
    if (a.nonlinearity == NonlinearityKind::sine) ja["frequency"] = a.frequency;
    ja["quantization"] = a.quantized ? "u8" : "f32";
    ja["payload_bytes"] = a.payload_bytes;
    arrays.push_back(std::move(ja));
  }
  r["arrays"] = std::move(arrays);
  ordered_json wiring = ordered_json::array();
  for (const auto& w : info.wiring) wiring.push_back({{"primary", w.primary}, {"channel", w.channel}});
  r["wiring"] = std::move(wiring);
  out << r.dump() << '\n';
}

void export_grid_cmd(const Flags& f, std::ostream& out) {
  const auto net = load_model(f.model);
  if (!f.out) throw ConfigError("export-grid needs --out");
  ordered_json r;
  if (net.input_dims() == 3 && net.output_channels() == 1) {
    export_sign_grid(net, f.resolution, *f.out);
    r["format"] = "sign-grid-u8";
  } else if (net.input_dims() == 2 && net.output_channels() == 1) {
    write_ggx_grid_csv(net, f.resolution, *f.out);
    r["format"] = "ggx-csv";
  } else {
    throw ConfigError("export-grid supports 3-D single-channel (SDF) and 2-D single-channel (GGX) models");
  }
  r["resolution"] = f.resolution;
  r["path"] = *f.out;
  out << r.dump() << '\n';
}

void error_object(std::ostream& err, const char* kind, const std::string& message) {
  ordered_json e;
  e["error"] = kind;
  e["message"] = message;
  err << e.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differentiable indirection: train and evaluate cascaded lookup-array networks", "din"};
  app.require_subcommand(1);
  Flags f;

  auto train_flags = [&f](CLI::App* s) {
    s->add_option("--config", f.config, "JSON run configuration");
    s->add_option("--seed", f.seed, "Random seed");
    s->add_option("--steps", f.steps, "Optimizer steps (0 derives from epochs)");
    s->add_option("--lr", f.lr, "ADAM learning rate");
    s->add_option("--batch", f.batch, "Batch size");
    s->add_option("--epochs", f.epochs, "Passes over the training set when steps is 0");
    s->add_option("--quantize", f.quantize, "Save the model as f32 or u8")->check(CLI::IsMember({"none", "u8"}));
    s->add_option("--clipping", f.clipping, "Gradient clipping: none, symmetric, monotone");
    s->add_option("--kappa", f.kappa, "Soft monotonicity weight");
    s->add_option("--out", f.out, "Output directory");
  };

  std::function<void()> action;
  auto train_cmd = [&](const char* name, const char* help, Task task, void (*fn)(const RunConfig&, std::ostream&)) {
    auto* s = app.add_subcommand(name, help);
    train_flags(s);
    s->callback([&f, &out, &action, task, fn] { action = [&f, &out, task, fn] { fn(resolve(task, f), out); }; });
    return s;
  };

  auto* ti = train_cmd("train-image", "Compress an image or channel stack", Task::image, train_image_cmd);
  ti->add_option("--input", f.input, "Image (.ppm/.pgm) or stack manifest (.json)");
  ti->add_option("--compression", f.compression, "Target compression ratio");
  ti->add_option("--rho", f.rho, "Primary / cascaded side ratio");
  ti->add_option("--cascaded-dims", f.cascaded_dims, "Cascaded dimensionality (2-4)");

  auto* ts = train_cmd("train-sampler", "Train a footprint-aware texture sampler", Task::sampler, train_sampler_cmd);
  ts->add_option("--input", f.input, "Square power-of-two image or stack manifest");
  ts->add_option("--compression", f.compression, "Target compression ratio");
  ts->add_option("--rho", f.rho, "Primary / cascaded side ratio");
  ts->add_option("--footprints", f.footprints, "Footprints for the PSNR report");
  ts->add_flag("--ignore-footprint", f.ignore_footprint, "Train the footprint-ignorant ablation");

  train_cmd("train-ggx", "Approximate the isotropic GGX distribution", Task::ggx, train_ggx_cmd)
      ->add_option("--test-points", f.test_points, "Held-out sample count");

  auto* tsdf = train_cmd("train-sdf", "Learn a truncated signed distance field", Task::sdf, train_sdf_cmd);
  tsdf->add_option("--shape", f.shape, "sphere, torus or box");
  tsdf->add_option("--budget-bytes", f.budget_bytes, "Byte budget for both arrays");
  tsdf->add_option("--rho", f.rho, "Primary / cascaded side ratio");
  tsdf->add_option("--test-points", f.test_points, "Near-surface test point count");

  auto eval_cmd = [&](const char* name, const char* help, void (*fn)(const Flags&, std::ostream&)) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--model", f.model, "Model file")->required();
    s->callback([&f, &out, &action, fn] { action = [&f, &out, fn] { fn(f, out); }; });
    return s;
  };
  auto* ei = eval_cmd("eval-image", "PSNR of a model against a reference image", eval_image_cmd);
  ei->add_option("--reference", f.reference, "Reference image")->required();
  ei->add_option("--out", f.out, "Write the decoded image");
  auto* es = eval_cmd("eval-sampler", "Per-footprint PSNR against the proxy sampler", eval_sampler_cmd);
  es->add_option("--reference", f.reference, "Reference base image")->required();
  es->add_option("--footprints", f.footprints, "Footprints to evaluate");
  es->add_flag("--ignore-footprint", f.ignore_footprint, "Query at footprint 0");
  es->add_option("--out", f.out, "Write a CSV table");
  auto* esd = eval_cmd("eval-sdf", "IoU and MAE on near-surface test points", eval_sdf_cmd);
  esd->add_option("--shape", f.shape, "sphere, torus or box");
  esd->add_option("--seed", f.seed, "Test set seed");
  esd->add_option("--test-points", f.test_points, "Test point count");
  esd->add_option("--out", f.out, "Write a CSV row");

  auto* inf = app.add_subcommand("info", "Print model header fields");
  inf->add_option("model", f.model, "Model file")->required();
  inf->callback([&] { action = [&] { info_cmd(f, out); }; });

  auto* eg = eval_cmd("export-grid", "Dense sign grid (SDF) or D table (GGX)", export_grid_cmd);
  eg->add_option("--out", f.out, "Output file")->required();
  eg->add_option("--resolution", f.resolution, "Vertices per axis")->check(CLI::Range(2, 4096));

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      error_object(err, "config", e.what());
      return 2;
    }
    if (action) action();
    return 0;
  } catch (const InfeasibleLayoutError& e) {
    error_object(err, "infeasible", e.what());
    return 3;
  } catch (const IoError& e) {
    error_object(err, "io", e.what());
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    error_object(err, "io", e.what());
    return 4;
  } catch (const ConfigError& e) {
    error_object(err, "config", e.what());
    return 2;
  } catch (const ArgumentError& e) {
    error_object(err, "config", e.what());
    return 2;
  } catch (const std::exception& e) {
    error_object(err, "internal", e.what());
    return 1;
  }
}

}  // namespace din::cli
