// tbif: generate scenes, train, evaluate, predict and dump diagnostics.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "tbiformer/tbiformer.hpp"

namespace fs = std::filesystem;
using namespace tbif;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

// Git blob id: sha1("blob <size>\0<content>").
std::string git_blob_sha1(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob.push_back('\0');
  blob += content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr)) throw std::runtime_error("sha1 failed");
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

std::string file_sha1(const fs::path& p) { return git_blob_sha1(io_detail::read_text(p)); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create directory: " + ec.message());
}

struct Manifest {
  json j;
  explicit Manifest(std::string command) { j = {{"command", std::move(command)}, {"inputs", json::array()}, {"outputs", json::array()}}; }
  void input(const fs::path& p) { j["inputs"].push_back({{"path", p.string()}, {"sha1", file_sha1(p)}}); }
  void output(const fs::path& p) { j["outputs"].push_back({{"path", p.string()}, {"sha1", file_sha1(p)}}); }
  void write(const fs::path& p) const { io_detail::write_text(p, j.dump(2) + "\n"); }
};

std::vector<fs::path> dataset_files(const fs::path& data) {
  std::error_code ec;
  if (!fs::exists(data, ec)) throw IoError(data.string() + ": no such file or directory");
  if (!fs::is_directory(data)) return {data};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(data))
    if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "manifest.json")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError(data.string() + ": no scene files");
  return files;
}

std::vector<Scene> load_scenes(const std::vector<fs::path>& files) {
  std::vector<Scene> scenes;
  for (const fs::path& f : files) scenes.push_back(load_scene(f));
  return scenes;
}

std::string dataset_id(const std::vector<fs::path>& files) {
  std::string ids;
  for (const fs::path& f : files) ids += file_sha1(f);
  return git_blob_sha1(ids);
}

// Flat config object: ModelConfig fields plus TrainConfig fields.
std::pair<ModelConfig, TrainConfig> read_run_config(const std::optional<fs::path>& path) {
  ModelConfig mc;
  TrainConfig tc;
  if (!path) return {mc, tc};
  json j = io_detail::parse_json(io_detail::read_text(*path), path->string());
  if (!j.is_object()) throw ValidationError(path->string() + ": config must be a JSON object");
  static const std::set<std::string> train_keys{"epochs", "batch_size", "lr", "seed", "observed"};
  json model = json::object();
  try {
    for (auto& [key, value] : j.items()) {
      if (train_keys.count(key)) continue;
      if (!model_config_keys().count(key)) throw ValidationError("unknown field \"" + key + "\"");
      model[key] = value;
    }
    mc = model_config_from_json(model, mc);
    auto count = [&](const char* key, std::size_t& out) {
      if (j.contains(key)) out = io_detail::count(j[key], key);
    };
    count("epochs", tc.epochs);
    count("batch_size", tc.batch_size);
    count("observed", tc.observed);
    if (j.contains("lr")) tc.lr = io_detail::number(j["lr"], "lr");
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw ValidationError("seed: expected a non-negative integer");
      tc.seed = j["seed"].get<std::uint64_t>();
    }
    tc.dropout = mc.dropout;
    tc.ablation = mc.ablation;
    tc.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path->string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path->string() + ": " + e.what());
  }
  return {mc, tc};
}

json train_config_to_json(const TrainConfig& tc) {
  return {{"epochs", tc.epochs}, {"batch_size", tc.batch_size}, {"lr", tc.lr}, {"seed", tc.seed}, {"observed", tc.observed}};
}

std::vector<double> parse_horizons(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("horizons: cannot parse '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError("horizons: empty list");
  return out;
}

// Observed part and future truth of an evaluation scene: the last N frames
// are the target unless an explicit T is given.
Sample eval_sample(const Scene& scene, const ModelConfig& cfg, std::optional<std::size_t> observed) {
  const std::size_t frames = scene.num_frames();
  if (!observed && frames < cfg.N + 2)
    throw ValidationError("scene has " + std::to_string(frames) + " frames, need more than N + 1 = " + std::to_string(cfg.N + 1));
  return make_sample(scene, observed.value_or(frames - cfg.N - 1), cfg);
}

std::string matrix_csv(const Tensor& m) {
  std::ostringstream out;
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    for (std::size_t j = 0; j < m.dim(1); ++j) out << (j ? "," : "") << format_number(m(i, j));
    out << "\n";
  }
  return out.str();
}

// ---- commands ----------------------------------------------------------------

struct GenArgs {
  std::size_t persons = 3, frames = 76, scenes = 8;
  std::string behavior = "mixed";
  double fps = 25.0;
  std::uint64_t seed = 0;
  fs::path out;
};

void cmd_gen(const GenArgs& a) {
  GeneratorSpec spec;
  spec.persons = a.persons;
  spec.frames = a.frames;
  spec.behavior = parse_behavior(a.behavior);
  spec.fps = a.fps;
  spec.validate();
  if (a.scenes == 0) throw ValidationError("scenes: must be positive");
  ensure_dir(a.out);
  Manifest m("gen");
  m.j["args"] = {{"persons", a.persons}, {"frames", a.frames}, {"scenes", a.scenes}, {"behavior", a.behavior}, {"fps", a.fps}};
  m.j["seed"] = a.seed;
  std::vector<Scene> scenes = synth_dataset(spec, a.scenes, a.seed);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04zu.json", i);
    save_scene(a.out / name, scenes[i]);
    m.output(a.out / name);
  }
  m.write(a.out / "manifest.json");
  std::cout << "wrote " << scenes.size() << " scenes to " << a.out.string() << "\n";
}

struct TrainArgs {
  fs::path data, out;
  std::optional<fs::path> config;
  std::vector<std::string> ablation;
  bool quiet = false;
};

void cmd_train(const TrainArgs& a) {
  auto [mc, tc] = read_run_config(a.config);
  for (const std::string& flag : a.ablation) set_ablation_flag(tc.ablation, flag);
  tc.validate();
  mc = apply_ablation(mc, tc.ablation);
  const auto files = dataset_files(a.data);
  std::vector<Sample> data = make_samples(load_scenes(files), tc.observed, mc);
  ensure_dir(a.out);
  ParamSet params = init_params(mc, tc.seed);
  TrainResult r = train(data, params, mc, tc, 0, [&](std::size_t epoch, std::size_t step, double loss) {
    if (!a.quiet) std::cerr << "epoch " << epoch + 1 << " step " << step << " loss " << loss << "\n";
    return true;
  });
  const fs::path ckpt = a.out / "checkpoint.json", curve = a.out / "loss.csv";
  save_checkpoint(ckpt, mc, params);
  io_detail::write_text(curve, loss_curve_csv(r.epoch_loss));
  Manifest m("train");
  m.j["config"] = model_config_to_json(mc);
  m.j["train"] = train_config_to_json(tc);
  m.j["seed"] = tc.seed;
  for (const fs::path& f : files) m.input(f);
  m.output(ckpt);
  m.output(curve);
  m.j["checkpoint_sha1"] = file_sha1(ckpt);
  m.write(a.out / "manifest.json");
  std::cout << "final epoch loss " << format_number(r.epoch_loss.back()) << "; wrote " << ckpt.string() << "\n";
}

struct EvalArgs {
  fs::path ckpt, data;
  std::string horizons = "0.2,0.6,1.0", format = "csv";
  std::optional<std::size_t> observed;
  std::optional<fs::path> out;
  bool baseline = false;
};

void cmd_eval(const EvalArgs& a) {
  if (a.format != "csv" && a.format != "json") throw ValidationError("format: expected csv or json, got '" + a.format + "'");
  const std::vector<double> horizons = parse_horizons(a.horizons);
  Checkpoint ck = load_checkpoint(a.ckpt);
  const auto files = dataset_files(a.data);
  std::vector<Sample> data;
  for (const Scene& s : load_scenes(files)) data.push_back(eval_sample(s, ck.config, a.observed));
  MetricReport rep = evaluate(ck.params, ck.config, data, horizons);
  const std::string cfg_hash = git_blob_sha1(model_config_to_json(ck.config).dump());
  const std::string ds = dataset_id(files);
  rep.config_hash = cfg_hash;
  rep.dataset_id = ds;
  std::optional<MetricReport> base;
  if (a.baseline) {
    base = evaluate_baseline(data, horizons);
    base->config_hash = cfg_hash;
    base->dataset_id = ds;
  }
  std::string text;
  if (a.format == "csv") {
    text = metric_rows_csv(rep);
    if (base) text += metric_rows_csv(*base, false);
  } else {
    json j = {{"reports", json::array({metric_report_to_json(rep)})}};
    if (base) j["reports"].push_back(metric_report_to_json(*base));
    text = j.dump(2) + "\n";
  }
  if (!a.out) {
    std::cout << text;
    return;
  }
  io_detail::write_text(*a.out, text);
  Manifest m("eval");
  m.j["config"] = model_config_to_json(ck.config);
  m.j["args"] = {{"horizons", horizons}, {"format", a.format}, {"baseline", a.baseline}};
  m.j["seed"] = nullptr;
  m.input(a.ckpt);
  for (const fs::path& f : files) m.input(f);
  m.output(*a.out);
  m.j["checkpoint_sha1"] = file_sha1(a.ckpt);
  m.write(a.out->string() + ".manifest.json");
}

struct PredictArgs {
  fs::path ckpt, scene, out;
};

void cmd_predict(const PredictArgs& a) {
  Checkpoint ck = load_checkpoint(a.ckpt);
  const Scene observed = load_scene(a.scene).in_meters();
  Tensor pred = predict(observed, ck.params, ck.config);
  const std::size_t T1 = observed.num_frames(), N = ck.config.N, J = observed.num_joints();
  Scene full = observed;
  for (std::size_t p = 0; p < observed.num_persons(); ++p) {
    Tensor x({T1 + N, J, 3});
    std::copy(observed.persons[p].data(), observed.persons[p].data() + T1 * J * 3, x.data());
    std::copy(pred.data() + p * N * J * 3, pred.data() + (p + 1) * N * J * 3, x.data() + T1 * J * 3);
    full.persons[p] = std::move(x);
  }
  save_scene(a.out, full, T1);
  Manifest m("predict");
  m.j["config"] = model_config_to_json(ck.config);
  m.j["seed"] = nullptr;
  m.input(a.ckpt);
  m.input(a.scene);
  m.output(a.out);
  m.j["checkpoint_sha1"] = file_sha1(a.ckpt);
  m.write(a.out.string() + ".manifest.json");
}

struct DumpArgs {
  fs::path ckpt, scene, out;
  std::string what = "attention";
  std::size_t layer = 0;
};

void cmd_dump(const DumpArgs& a) {
  Checkpoint ck = load_checkpoint(a.ckpt);
  const ModelConfig& cfg = ck.config;
  const Scene scene = load_scene(a.scene).in_meters();
  std::string text;
  if (a.what == "attention") {
    if (a.layer >= cfg.blocks)
      throw ValidationError("layer: " + std::to_string(a.layer) + " out of range, model has " + std::to_string(cfg.blocks) +
                            " blocks");
    ForwardTrace trace;
    predict(scene, ck.params, cfg, &trace);
    text = matrix_csv(trace.encoder[a.layer].mean_over_heads());
  } else if (a.what == "psi" || a.what == "trpe-indices") {
    PreparedScene ps = prepare_scene(scene, cfg);
    TrajectorySimilarity sim;
    if (ps.similarity) {
      sim = *ps.similarity;
    } else {
      std::vector<Tensor> roots;
      for (const Tensor& x : scene.persons)
        roots.push_back(window_slice(root_trajectory(x, scene.skeleton.root_joint), 0, ps.steps));
      sim = trajectory_similarity(roots, cfg.l, cfg.stride, cfg.soft_dtw_gamma,
                                  cfg.ablation.eupe ? TrajectoryMetric::Euclidean : TrajectoryMetric::Dtw);
    }
    if (a.what == "psi") {
      TrpeIndexMatrix psi = build_psi(sim, ps.layout, cfg.trpe_params());
      Tensor m({psi.size, psi.size});
      for (std::size_t i = 0; i < psi.size; ++i)
        for (std::size_t j = 0; j < psi.size; ++j) m(i, j) = psi(i, j);
      text = matrix_csv(m);
    } else {
      std::ostringstream out;
      out << "window,person_m,person_n,cost\n";
      for (std::size_t w = 0; w < sim.windows; ++w)
        for (std::size_t m = 0; m < sim.persons; ++m)
          for (std::size_t n = 0; n < sim.persons; ++n) out << w << "," << m << "," << n << "," << format_number(sim(m, n, w)) << "\n";
      text = out.str();
    }
  } else {
    throw ValidationError("what: expected attention, psi or trpe-indices, got '" + a.what + "'");
  }
  io_detail::write_text(a.out, text);
  Manifest m("dump");
  m.j["config"] = model_config_to_json(cfg);
  m.j["args"] = {{"what", a.what}, {"layer", a.layer}};
  m.j["seed"] = nullptr;
  m.input(a.ckpt);
  m.input(a.scene);
  m.output(a.out);
  m.j["checkpoint_sha1"] = file_sha1(a.ckpt);
  m.write(a.out.string() + ".manifest.json");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-person motion forecasting"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "write synthetic scenes");
  g->add_option("--persons", gen.persons);
  g->add_option("--frames", gen.frames);
  g->add_option("--scenes", gen.scenes);
  g->add_option("--behavior", gen.behavior, "static|walk|follow|approach|circle|mixed");
  g->add_option("--fps", gen.fps);
  g->add_option("--seed", gen.seed);
  g->add_option("--out", gen.out)->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--data", tr.data, "scene file or directory")->required();
  t->add_option("--config", tr.config, "JSON config");
  t->add_option("--out", tr.out, "output directory")->required();
  t->add_option("--ablation", tr.ablation, "no_tbpm|no_ie|no_trpe|eupe|no_sbi_msa");
  t->add_flag("--quiet", tr.quiet);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--ckpt", ev.ckpt)->required();
  e->add_option("--data", ev.data)->required();
  e->add_option("--horizons", ev.horizons, "seconds, comma separated");
  e->add_option("--format", ev.format, "csv|json");
  e->add_option("--observed", ev.observed, "observed displacements T (default: all but the last N frames)");
  e->add_option("--out", ev.out);
  e->add_flag("--baseline", ev.baseline, "append zero-velocity rows");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "forecast one scene");
  p->add_option("--ckpt", pr.ckpt)->required();
  p->add_option("--scene", pr.scene)->required();
  p->add_option("--out", pr.out)->required();

  DumpArgs du;
  auto* d = app.add_subcommand("dump", "export attention or index matrices as CSV");
  d->add_option("--ckpt", du.ckpt)->required();
  d->add_option("--scene", du.scene)->required();
  d->add_option("--what", du.what, "attention|psi|trpe-indices");
  d->add_option("--layer", du.layer);
  d->add_option("--out", du.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*g) cmd_gen(gen);
    else if (*t) cmd_train(tr);
    else if (*e) cmd_eval(ev);
    else if (*p) cmd_predict(pr);
    else if (*d) cmd_dump(du);
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
