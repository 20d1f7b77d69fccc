#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tbiformer/checkpoint.hpp"
#include "tbiformer/model.hpp"
#include "tbiformer/optim.hpp"

namespace tbif {

// ---- loss -------------------------------------------------------------------------

inline constexpr double kLossEps = 1e-8;

// Mean per-joint Euclidean displacement error over persons, frames and joints.
inline Var rec_loss(Var pred, Var truth) {
  if (pred.shape() != truth.shape())
    throw DimensionError("rec_loss: prediction " + shape_str(pred.shape()) + " vs truth " + shape_str(truth.shape()));
  if (pred.shape().back() != 3) throw DimensionError("rec_loss: trailing axis must hold xyz");
  return mean_row_norm(sub(pred, truth), kLossEps);
}

inline double rec_loss_value(const Tensor& pred, const Tensor& truth) {
  Tape tape;
  return rec_loss(tape.constant(pred), tape.constant(truth)).value()[0];
}

// ---- samples ------------------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 3e-4;
  double dropout = 0.2;
  std::uint64_t seed = 0;
  std::size_t observed = 50;  // T observed displacements, i.e. T+1 input frames
  Ablation ablation;

  void validate() const {
    if (epochs == 0) throw ConfigError("epochs: must be positive");
    if (batch_size == 0) throw ConfigError("batch_size: must be positive");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr: must be finite and >= 0");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout: must be in [0, 1)");
    if (observed == 0) throw ConfigError("observed: must be positive");
    ablation.validate();
  }
};

// Model config with the run's ablation and dropout applied.
inline ModelConfig apply_ablation(ModelConfig cfg, const Ablation& flags) {
  flags.validate();
  cfg.ablation = flags;
  cfg.validate();
  return cfg;
}

// One scene split into observed input and future target.
struct Sample {
  Scene observed;       // first T+1 frames, meters
  Tensor future;        // P x N x J x 3 absolute poses, meters
  Tensor target;        // P x N x J x 3 displacements
  PreparedScene prepared;
};

inline std::size_t required_frames(std::size_t T, std::size_t N) { return T + 1 + N; }

// Splits the first T+1+N frames of `scene` into input and target.
inline Sample make_sample(const Scene& scene_any_unit, std::size_t T, const ModelConfig& cfg) {
  const Scene scene = scene_any_unit.in_meters();
  const std::size_t need = required_frames(T, cfg.N);
  if (scene.num_frames() < need)
    throw ValidationError("scene has " + std::to_string(scene.num_frames()) + " frames, need " + std::to_string(need));
  Sample s;
  s.observed = scene.slice_frames(0, T + 1);
  const std::size_t P = scene.num_persons(), J = scene.num_joints(), N = cfg.N;
  s.future = Tensor({P, N, J, 3});
  s.target = Tensor({P, N, J, 3});
  for (std::size_t p = 0; p < P; ++p) {
    const Tensor& x = scene.persons[p];
    for (std::size_t k = 0; k < N; ++k)
      for (std::size_t j = 0; j < J; ++j)
        for (std::size_t c = 0; c < 3; ++c) {
          const std::size_t at = ((p * N + k) * J + j) * 3 + c;
          s.future[at] = x(T + 1 + k, j, c);
          s.target[at] = x(T + 1 + k, j, c) - x(T + k, j, c);
        }
  }
  s.prepared = prepare_scene(s.observed, cfg);
  return s;
}

// Rejects, with a list of offenders, any scene shorter than T+1+N frames.
inline void check_scene_lengths(const std::vector<Scene>& scenes, std::size_t T, std::size_t N) {
  const std::size_t need = required_frames(T, N);
  std::ostringstream bad;
  std::size_t n_bad = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i)
    if (scenes[i].num_frames() < need) {
      bad << (n_bad++ ? ", " : "") << "#" << i << " (" << scenes[i].num_frames() << " frames)";
    }
  if (n_bad)
    throw ValidationError(std::to_string(n_bad) + " scene(s) shorter than " + std::to_string(need) +
                          " frames: " + bad.str());
}

inline std::vector<Sample> make_samples(const std::vector<Scene>& scenes, std::size_t T, const ModelConfig& cfg) {
  if (scenes.empty()) throw ValidationError("dataset is empty");
  check_scene_lengths(scenes, T, cfg.N);
  std::vector<Sample> out;
  out.reserve(scenes.size());
  for (const Scene& s : scenes) out.push_back(make_sample(s, T, cfg));
  return out;
}

// Deterministic 90/10 split by seeded shuffle: {train indices, held-out indices}.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, std::uint64_t seed,
                                                                                    double train_fraction = 0.9) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n)));
  return {{idx.begin(), idx.begin() + static_cast<long>(n_train)}, {idx.begin() + static_cast<long>(n_train), idx.end()}};
}

// ---- training -------------------------------------------------------------------------

struct TrainResult {
  std::vector<double> epoch_loss;  // mean training loss per epoch
  std::vector<double> step_loss;   // mean batch loss per optimizer step
  std::size_t steps = 0;
};

// Stops training early when it returns false; receives (epoch, step, batch loss).
using TrainCallback = std::function<bool(std::size_t, std::size_t, double)>;

// Loss of one sample; accumulates gradients scaled by `weight` when weight != 0.
inline double sample_loss(ParamSet& params, const ModelConfig& cfg, const Sample& s, bool train, std::mt19937_64* rng,
                          double weight) {
  Tape tape;
  ForwardOptions fo;
  fo.train = train;
  fo.rng = rng;
  Var pred = forward(tape, params, cfg, s.prepared, fo);
  Var loss = rec_loss(pred, tape.constant(s.target));
  const double value = loss.value()[0];
  if (weight != 0.0) tape.backward(scale(loss, weight));
  return value;
}

// Mini-batch Adam on rec_loss. Shuffling and dropout use independent streams
// derived from tc.seed, so identical seeds give identical runs. At most
// `max_steps` optimizer steps are taken when it is non-zero.
inline TrainResult train(const std::vector<Sample>& data, ParamSet& params, ModelConfig cfg, const TrainConfig& tc,
                         std::size_t max_steps = 0, const TrainCallback& callback = {}) {
  tc.validate();
  if (data.empty()) throw ValidationError("train: no samples");
  if (cfg.ablation != tc.ablation) throw ConfigError("train: model ablation flags differ from the run's flags");
  cfg.dropout = tc.dropout;
  validate_params(params, cfg);
  Adam opt(AdamConfig{tc.lr, 0.9, 0.999, 1e-8});
  std::mt19937_64 shuffle_rng(tc.seed);
  std::mt19937_64 dropout_rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  TrainResult res;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      const double w = 1.0 / static_cast<double>(end - start);
      params.zero_grad();
      double batch_sum = 0.0;
      for (std::size_t i = start; i < end; ++i) batch_sum += sample_loss(params, cfg, data[order[i]], true, &dropout_rng, w);
      opt.step(params);
      ++res.steps;
      epoch_sum += batch_sum;
      seen += end - start;
      res.step_loss.push_back(batch_sum * w);
      const bool stop_requested = callback && !callback(epoch, res.steps, batch_sum * w);
      if (stop_requested || (max_steps && res.steps >= max_steps)) {
        res.epoch_loss.push_back(epoch_sum / static_cast<double>(seen));
        return res;
      }
    }
    res.epoch_loss.push_back(epoch_sum / static_cast<double>(seen));
  }
  return res;
}

// Mean eval-mode loss over samples.
inline double mean_loss(const std::vector<Sample>& data, ParamSet& params, const ModelConfig& cfg) {
  double s = 0.0;
  for (const Sample& d : data) s += sample_loss(params, cfg, d, false, nullptr, 0.0);
  return s / static_cast<double>(data.size());
}

// ---- metrics ---------------------------------------------------------------------------

namespace metric_detail {

inline void check_pair(const Tensor& pred, const Tensor& truth, const char* what) {
  if (pred.shape() != truth.shape())
    throw DimensionError(std::string(what) + ": prediction " + shape_str(pred.shape()) + " vs truth " +
                         shape_str(truth.shape()));
  if (pred.rank() != 4 || pred.dim(3) != 3) throw DimensionError(std::string(what) + ": expected P x N x J x 3");
}

inline double pose_error(const Tensor& pred, const Tensor& truth, std::size_t frame, const char* what,
                         std::optional<int> root) {
  check_pair(pred, truth, what);
  const std::size_t P = pred.dim(0), N = pred.dim(1), J = pred.dim(2);
  if (frame >= N) throw ValidationError(std::string(what) + ": frame " + std::to_string(frame) + " >= N = " + std::to_string(N));
  double s = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    const std::size_t base = (p * N + frame) * J * 3;
    for (std::size_t j = 0; j < J; ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        double a = pred[base + j * 3 + c], b = truth[base + j * 3 + c];
        if (root) {
          a -= pred[base + static_cast<std::size_t>(*root) * 3 + c];
          b -= truth[base + static_cast<std::size_t>(*root) * 3 + c];
        }
        sq += (a - b) * (a - b);
      }
      s += std::sqrt(sq);
    }
  }
  return 1000.0 * s / static_cast<double>(P * J);
}

}  // namespace metric_detail

// Mean joint position error in mm at 0-based future frame `frame` (inputs in meters).
inline double jpe(const Tensor& pred, const Tensor& truth, std::size_t frame) {
  return metric_detail::pose_error(pred, truth, frame, "jpe", std::nullopt);
}

// Root-relative joint position error in mm.
inline double ape(const Tensor& pred, const Tensor& truth, std::size_t frame, int root_joint = 0) {
  if (root_joint < 0 || (pred.rank() == 4 && static_cast<std::size_t>(root_joint) >= pred.dim(2)))
    throw ValidationError("ape: root joint out of range");
  return metric_detail::pose_error(pred, truth, frame, "ape", root_joint);
}

// Root error at the final predicted frame in mm, averaged over persons.
inline double fde(const Tensor& pred, const Tensor& truth, int root_joint = 0) {
  metric_detail::check_pair(pred, truth, "fde");
  const std::size_t P = pred.dim(0), N = pred.dim(1), J = pred.dim(2);
  if (root_joint < 0 || static_cast<std::size_t>(root_joint) >= J) throw ValidationError("fde: root joint out of range");
  double s = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    const std::size_t at = ((p * N + N - 1) * J + static_cast<std::size_t>(root_joint)) * 3;
    double sq = 0.0;
    for (std::size_t c = 0; c < 3; ++c) sq += (pred[at + c] - truth[at + c]) * (pred[at + c] - truth[at + c]);
    s += std::sqrt(sq);
  }
  return 1000.0 * s / static_cast<double>(P);
}

// Repeats the last observed pose N times: P x N x J x 3.
inline Tensor zero_velocity_baseline(const Scene& observed, std::size_t N) {
  observed.validate();
  if (N == 0) throw ValidationError("zero_velocity_baseline: N must be positive");
  const Scene s = observed.in_meters();
  const std::size_t P = s.num_persons(), J = s.num_joints(), last = s.num_frames() - 1;
  Tensor out({P, N, J, 3});
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t k = 0; k < N; ++k)
      std::copy(s.persons[p].data() + last * J * 3, s.persons[p].data() + (last + 1) * J * 3,
                out.data() + (p * N + k) * J * 3);
  return out;
}

// 1-based future frame count for a horizon in seconds.
inline std::size_t horizon_frame(double horizon_s, double fps, std::size_t N) {
  const double f = horizon_s * fps;
  const double r = std::round(f);
  if (!(horizon_s > 0.0) || std::abs(f - r) > 1e-6)
    throw ValidationError("horizon " + std::to_string(horizon_s) + " s is not a whole number of frames at " +
                          std::to_string(fps) + " fps");
  if (r > static_cast<double>(N))
    throw ValidationError("horizon " + std::to_string(horizon_s) + " s needs " + std::to_string(static_cast<long>(r)) +
                          " frames, model predicts " + std::to_string(N));
  return static_cast<std::size_t>(r);
}

struct MetricReport {
  std::string model = "tbiformer";
  std::vector<double> horizons_s;
  std::vector<double> jpe;  // mm, per horizon
  std::vector<double> ape;  // mm, per horizon
  double fde = 0.0;         // mm, final frame
  std::size_t scenes = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string dataset_id;

  double overall_jpe() const { return horizons_s.empty() ? 0.0 : std::accumulate(jpe.begin(), jpe.end(), 0.0) / jpe.size(); }
  double overall_ape() const { return horizons_s.empty() ? 0.0 : std::accumulate(ape.begin(), ape.end(), 0.0) / ape.size(); }
};

// Metrics averaged over scenes; preds and truths are P x N x J x 3 in meters.
inline MetricReport evaluate_predictions(const std::vector<Tensor>& preds, const std::vector<Tensor>& truths,
                                         const std::vector<double>& fps, const std::vector<int>& roots,
                                         const std::vector<double>& horizons_s) {
  if (preds.size() != truths.size() || preds.size() != fps.size() || preds.size() != roots.size())
    throw DimensionError("evaluate: mismatched scene counts");
  if (preds.empty()) throw ValidationError("evaluate: no scenes");
  MetricReport rep;
  rep.horizons_s = horizons_s;
  rep.jpe.assign(horizons_s.size(), 0.0);
  rep.ape.assign(horizons_s.size(), 0.0);
  rep.scenes = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t N = preds[i].dim(1);
    for (std::size_t h = 0; h < horizons_s.size(); ++h) {
      const std::size_t frame = horizon_frame(horizons_s[h], fps[i], N) - 1;
      rep.jpe[h] += jpe(preds[i], truths[i], frame);
      rep.ape[h] += ape(preds[i], truths[i], frame, roots[i]);
    }
    rep.fde += fde(preds[i], truths[i], roots[i]);
  }
  const double n = static_cast<double>(preds.size());
  for (double& v : rep.jpe) v /= n;
  for (double& v : rep.ape) v /= n;
  rep.fde /= n;
  return rep;
}

using Predictor = std::function<Tensor(const Sample&)>;

inline MetricReport evaluate_with(const Predictor& predictor, const std::vector<Sample>& data,
                                  const std::vector<double>& horizons_s) {
  std::vector<Tensor> preds, truths;
  std::vector<double> fps;
  std::vector<int> roots;
  for (const Sample& s : data) {
    preds.push_back(predictor(s));
    truths.push_back(s.future);
    fps.push_back(s.observed.fps);
    roots.push_back(s.observed.skeleton.root_joint);
  }
  return evaluate_predictions(preds, truths, fps, roots, horizons_s);
}

inline MetricReport evaluate(ParamSet& params, const ModelConfig& cfg, const std::vector<Sample>& data,
                             const std::vector<double>& horizons_s) {
  return evaluate_with(
      [&](const Sample& s) {
        Tape tape;
        Var disp = forward(tape, params, cfg, s.prepared);
        return integrate_displacements(s.prepared.last_pose, disp.value());
      },
      data, horizons_s);
}

inline MetricReport evaluate_baseline(const std::vector<Sample>& data, const std::vector<double>& horizons_s) {
  MetricReport r =
      evaluate_with([](const Sample& s) { return zero_velocity_baseline(s.observed, s.future.dim(1)); }, data, horizons_s);
  r.model = "zero_velocity";
  return r;
}

// ---- report serialization ---------------------------------------------------------------

// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Rows: metric, horizon_s, value_mm. Metric names carry a "<model>." prefix
// for every model other than the default one.
inline std::string metric_rows_csv(const MetricReport& r, bool header = true) {
  const std::string pre = r.model == "tbiformer" ? "" : r.model + ".";
  std::ostringstream out;
  if (header) out << "metric,horizon_s,value_mm\n";
  for (std::size_t h = 0; h < r.horizons_s.size(); ++h)
    out << pre << "jpe," << format_number(r.horizons_s[h]) << "," << format_number(r.jpe[h]) << "\n";
  out << pre << "jpe,overall," << format_number(r.overall_jpe()) << "\n";
  for (std::size_t h = 0; h < r.horizons_s.size(); ++h)
    out << pre << "ape," << format_number(r.horizons_s[h]) << "," << format_number(r.ape[h]) << "\n";
  out << pre << "ape,overall," << format_number(r.overall_ape()) << "\n";
  out << pre << "fde,overall," << format_number(r.fde) << "\n";
  return out.str();
}

inline json metric_report_to_json(const MetricReport& r) {
  json rows = json::array();
  for (std::size_t h = 0; h < r.horizons_s.size(); ++h)
    rows.push_back({{"horizon_s", r.horizons_s[h]}, {"jpe", r.jpe[h]}, {"ape", r.ape[h]}});
  return {{"model", r.model},
          {"horizons", rows},
          {"overall", {{"jpe", r.overall_jpe()}, {"ape", r.overall_ape()}, {"fde", r.fde}}},
          {"scenes", r.scenes},
          {"seed", r.seed},
          {"config_hash", r.config_hash},
          {"dataset_id", r.dataset_id}};
}

inline std::string loss_curve_csv(const std::vector<double>& epoch_loss) {
  std::ostringstream out;
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) out << e + 1 << "," << format_number(epoch_loss[e]) << "\n";
  return out.str();
}

}  // namespace tbif
