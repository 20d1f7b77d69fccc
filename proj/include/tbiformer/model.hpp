#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tbiformer/attention.hpp"
#include "tbiformer/dct.hpp"
#include "tbiformer/encodings.hpp"
#include "tbiformer/motion.hpp"
#include "tbiformer/tbpm.hpp"

namespace tbif {

// Component switches for ablation variants.
struct Ablation {
  bool no_tbpm = false;     // per-joint tokens instead of pooled body parts
  bool no_ie = false;       // drop the person identity encoding
  bool no_trpe = false;     // no attention bias
  bool eupe = false;        // bias indices from lock-step Euclidean root cost
  bool no_sbi_msa = false;  // attention restricted to each person's own tokens

  void validate() const {
    if (eupe && no_trpe) throw ConfigError("ablation: eupe and no_trpe are mutually exclusive");
  }
  bool uses_trpe() const { return !no_trpe && !no_sbi_msa; }

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct ModelConfig {
  std::size_t D = 512;
  std::size_t d_z = 64;
  std::size_t heads = 8;
  std::size_t blocks = 3;
  std::size_t decoder_layers = 1;
  std::size_t d_ff = 1024;
  std::size_t l = 10;
  std::size_t stride = 1;
  std::size_t B = 5;
  int alpha = 1;
  int beta = 9;
  double gamma = 2000.0;
  double eta = 2000.0;
  double trpe_scale = 1.0;
  double soft_dtw_gamma = 0.0;
  double dropout = 0.2;
  std::optional<std::size_t> K_in;   // head low-pass keep; unset = no smoothing
  std::optional<std::size_t> K_out;  // output DCT coefficients; unset = N
  std::size_t N = 25;
  std::size_t J = 15;
  std::size_t max_persons = 16;
  Ablation ablation;

  std::size_t out_coeffs() const { return K_out.value_or(N); }
  std::size_t tokens_per_window() const { return ablation.no_tbpm ? J : B; }
  TrpeIndexParams trpe_params() const { return {alpha, beta, gamma, eta, trpe_scale}; }

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw ConfigError(std::string(name) + ": must be positive");
    };
    positive(D, "D");
    positive(d_z, "d_z");
    positive(heads, "heads");
    positive(blocks, "blocks");
    positive(decoder_layers, "decoder_layers");
    positive(d_ff, "d_ff");
    positive(l, "l");
    positive(stride, "stride");
    positive(N, "N");
    positive(J, "J");
    positive(max_persons, "max_persons");
    if (D != heads * d_z)
      throw ConfigError("D: must equal heads * d_z (" + std::to_string(heads) + " * " + std::to_string(d_z) + ")");
    if (D % 2 != 0) throw ConfigError("D: must be even for the temporal encoding");
    if (B != kNumParts) throw ConfigError("B: must be 5");
    if (!(alpha > 0) || !(beta > alpha) || !(gamma > alpha))
      throw ConfigError("alpha/beta/gamma: require gamma > alpha > 0 and beta > alpha");
    if (eta < 0.0) throw ConfigError("eta: must be >= 0");
    if (trpe_scale < 0.0) throw ConfigError("trpe_scale: must be >= 0");
    if (soft_dtw_gamma < 0.0) throw ConfigError("soft_dtw_gamma: must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout: must be in [0, 1)");
    if (K_in && *K_in == 0) throw ConfigError("K_in: must be positive");
    if (K_out && (*K_out == 0 || *K_out > N)) throw ConfigError("K_out: must be in 1..N");
    ablation.validate();
  }

  // Small model used by tests and the acceptance suite.
  static ModelConfig toy(std::size_t width = 16, std::size_t n_heads = 2, std::size_t n_blocks = 1) {
    ModelConfig c;
    c.D = width;
    c.heads = n_heads;
    c.d_z = width / n_heads;
    c.blocks = n_blocks;
    c.d_ff = 2 * width;
    c.N = 4;
    return c;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// ---- parameters -----------------------------------------------------------------

namespace model_detail {

inline void add_attention(ParamSet& ps, const std::string& pre, std::size_t D, double sd, std::mt19937_64& rng) {
  for (const char* w : {"wq", "wk", "wv", "wo"}) ps.add(pre + "." + w, Tensor::normal({D, D}, sd, rng));
  ps.add(pre + ".bo", Tensor::zeros({D}));
}

inline void add_norm(ParamSet& ps, const std::string& pre, std::size_t D) {
  ps.add(pre + ".gain", Tensor({D}, 1.0));
  ps.add(pre + ".shift", Tensor::zeros({D}));
}

inline void add_ff(ParamSet& ps, const std::string& pre, std::size_t D, std::size_t d_ff, double sd,
                   std::mt19937_64& rng) {
  ps.add(pre + ".w1", Tensor::normal({D, d_ff}, sd, rng));
  ps.add(pre + ".b1", Tensor::zeros({d_ff}));
  ps.add(pre + ".w2", Tensor::normal({d_ff, D}, sd, rng));
  ps.add(pre + ".b2", Tensor::zeros({D}));
}

}  // namespace model_detail

// Fresh parameters: N(0, 0.02) for projections and embeddings, zero biases,
// unit norm gains, and a zero final layer so the untrained model freezes the
// last observed pose.
inline ParamSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
  using namespace model_detail;
  cfg.validate();
  std::mt19937_64 rng(seed);
  const double sd = 0.02;
  const std::size_t D = cfg.D;
  ParamSet ps;
  ps.add("tbpm.conv.weight", Tensor::normal({cfg.l, 1, 3, D}, sd, rng));
  ps.add("tbpm.conv.bias", Tensor::zeros({D}));
  if (!cfg.ablation.no_ie) ps.add("identity.table", Tensor::normal({cfg.max_persons, D}, sd, rng));
  if (cfg.ablation.uses_trpe())
    ps.add("trpe.table", Tensor::normal({static_cast<std::size_t>(cfg.beta) + 1, cfg.d_z}, sd, rng));
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string pre = "encoder." + std::to_string(b);
    add_attention(ps, pre + ".attn", D, sd, rng);
    add_norm(ps, pre + ".norm1", D);
    add_ff(ps, pre + ".ff", D, cfg.d_ff, sd, rng);
    add_norm(ps, pre + ".norm2", D);
  }
  ps.add("query.conv.weight", Tensor::normal({cfg.l, 1, cfg.J * 3, D}, sd, rng));
  ps.add("query.conv.bias", Tensor::zeros({D}));
  for (std::size_t k = 0; k < cfg.decoder_layers; ++k) {
    const std::string pre = "decoder." + std::to_string(k);
    add_attention(ps, pre + ".self", D, sd, rng);
    add_norm(ps, pre + ".norm1", D);
    add_attention(ps, pre + ".cross", D, sd, rng);
    add_norm(ps, pre + ".norm2", D);
    add_ff(ps, pre + ".ff", D, cfg.d_ff, sd, rng);
    add_norm(ps, pre + ".norm3", D);
  }
  ps.add("head.fc1.weight", Tensor::normal({D, cfg.d_ff}, sd, rng));
  ps.add("head.fc1.bias", Tensor::zeros({cfg.d_ff}));
  ps.add("head.fc2.weight", Tensor::zeros({cfg.d_ff, cfg.out_coeffs() * cfg.J * 3}));
  ps.add("head.fc2.bias", Tensor::zeros({cfg.out_coeffs() * cfg.J * 3}));
  return ps;
}

// ---- scene preprocessing ----------------------------------------------------------

// Everything the forward pass derives from an observed scene without
// learnable parameters.
struct PreparedScene {
  std::size_t persons = 0;
  std::size_t steps = 0;              // T observed displacements
  MpbpLayout layout;
  std::vector<Tensor> tokens;         // per person: T x parts x 3
  Tensor temporal_encoding;           // M x D
  std::optional<TrpeIndexMatrix> psi;
  std::optional<TrajectorySimilarity> similarity;
  std::vector<Tensor> query_inputs;   // per person: l x 1 x (J*3)
  Tensor last_pose;                   // P x J x 3
  std::vector<int> groups;            // person of each token
};

// `observed` holds T+1 frames; coordinates are converted to meters.
inline PreparedScene prepare_scene(const Scene& observed_any_unit, const ModelConfig& cfg) {
  cfg.validate();
  const Scene observed = observed_any_unit.in_meters();
  observed.validate();
  if (observed.num_joints() != cfg.J)
    throw ValidationError("scene has " + std::to_string(observed.num_joints()) + " joints, model expects " +
                          std::to_string(cfg.J));
  if (observed.num_persons() > cfg.max_persons && !cfg.ablation.no_ie)
    throw ValidationError("scene has " + std::to_string(observed.num_persons()) + " persons, identity table holds " +
                          std::to_string(cfg.max_persons));
  const std::size_t frames = observed.num_frames();
  if (frames < std::max<std::size_t>(cfg.l + 1, 2))
    throw ValidationError("scene has " + std::to_string(frames) + " frames, need at least " +
                          std::to_string(cfg.l + 1));
  DisplacementScene disp = to_displacements(observed);
  PreparedScene ps;
  ps.persons = observed.num_persons();
  ps.steps = frames - 1;
  const std::size_t L = conv_output_length(ps.steps, cfg.l, cfg.stride);
  if (L == 0) throw ValidationError("scene too short for stride " + std::to_string(cfg.stride));
  ps.layout = {ps.persons, L, cfg.tokens_per_window()};
  for (std::size_t p = 0; p < ps.persons; ++p) {
    Tensor y = disp.persons[p];
    if (cfg.K_in && *cfg.K_in < ps.steps) y = lowpass_smooth(y, *cfg.K_in);
    ps.tokens.push_back(cfg.ablation.no_tbpm ? y : partition_pool(y, observed.skeleton));
  }
  ps.temporal_encoding = temporal_positional_encoding(ps.layout, cfg.D);
  if (cfg.ablation.uses_trpe()) {
    std::vector<Tensor> roots;
    for (const Tensor& x : observed.persons) {
      Tensor r = root_trajectory(x, observed.skeleton.root_joint);
      roots.push_back(window_slice(r, 0, ps.steps));
    }
    const auto metric = cfg.ablation.eupe ? TrajectoryMetric::Euclidean : TrajectoryMetric::Dtw;
    ps.similarity = trajectory_similarity(roots, cfg.l, cfg.stride, cfg.soft_dtw_gamma, metric);
    ps.psi = build_psi(*ps.similarity, ps.layout, cfg.trpe_params());
  }
  const std::size_t J3 = cfg.J * 3;
  for (const Tensor& x : observed.persons) {
    Tensor q({cfg.l, 1, J3});
    std::copy(x.data() + (frames - cfg.l) * J3, x.data() + frames * J3, q.data());
    ps.query_inputs.push_back(std::move(q));
  }
  ps.last_pose = disp.last_pose;
  ps.groups = ps.layout.person_of_rows();
  return ps;
}

// ---- forward pass -------------------------------------------------------------------

struct ForwardTrace {
  std::vector<AttentionTrace> encoder;        // per block
  std::vector<AttentionTrace> decoder_self;   // per decoder layer
  std::vector<AttentionTrace> decoder_cross;  // per decoder layer, P x M
};

struct ForwardOptions {
  bool train = false;
  std::mt19937_64* rng = nullptr;  // dropout stream, required when train
  ForwardTrace* trace = nullptr;
};

// Binds parameters to a tape on first use.
class BoundParams {
 public:
  BoundParams(Tape& tape, ParamSet& params) : tape_(tape), params_(params) {}
  Var operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Var v = tape_.param(params_.at(name));
    bound_.emplace(name, v);
    return v;
  }
  bool has(const std::string& name) const { return params_.contains(name); }
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  ParamSet& params_;
  std::map<std::string, Var> bound_;
};

namespace model_detail {

struct Ctx {
  BoundParams& w;
  const ModelConfig& cfg;
  const ForwardOptions& opt;
  std::mt19937_64 fallback{0};

  Var drop(Var x) {
    if (!opt.train) return x;
    return dropout(x, cfg.dropout, true, opt.rng ? *opt.rng : fallback);
  }
};

inline Var linear(Var x, Var weight, Var bias) { return add_bias(matmul(x, weight), bias); }

inline Var norm(Ctx& c, Var x, const std::string& pre) {
  return layer_norm(x, c.w(pre + ".gain"), c.w(pre + ".shift"));
}

inline Var feed_forward(Ctx& c, Var x, const std::string& pre) {
  Var h = relu(linear(x, c.w(pre + ".w1"), c.w(pre + ".b1")));
  return linear(h, c.w(pre + ".w2"), c.w(pre + ".b2"));
}

// Multi-head attention with projections W_Q, W_K, W_V, W_O.
inline Var attention_layer(Ctx& c, Var queries, Var context, const std::string& pre, AttentionOptions opt) {
  Var q = matmul(queries, c.w(pre + ".wq"));
  Var k = matmul(context, c.w(pre + ".wk"));
  Var v = matmul(context, c.w(pre + ".wv"));
  Var heads = multi_head_attention(q, k, v, c.cfg.heads, opt);
  return linear(heads, c.w(pre + ".wo"), c.w(pre + ".bo"));
}

}  // namespace model_detail

// Social body-interaction attention over the token stream H[M x D], biased by
// the shared trajectory-aware table when psi is given.
inline Var sbi_msa(BoundParams& w, const ModelConfig& cfg, Var h, const std::string& pre,
                   const std::optional<TrpeIndexMatrix>& psi, const std::vector<int>* groups,
                   AttentionTrace* trace = nullptr) {
  ForwardOptions fo;
  model_detail::Ctx c{w, cfg, fo};
  AttentionOptions opt;
  if (psi && w.has("trpe.table")) {
    opt.bias_table = w("trpe.table");
    opt.bias_index = psi->psi;
  }
  if (groups) {
    opt.query_groups = *groups;
    opt.key_groups = *groups;
  }
  opt.trace = trace;
  return model_detail::attention_layer(c, h, h, pre, opt);
}

inline Var tbiformer_block(BoundParams& w, const ModelConfig& cfg, const ForwardOptions& fo, Var h, std::size_t index,
                           const std::optional<TrpeIndexMatrix>& psi, const std::vector<int>* groups,
                           AttentionTrace* trace = nullptr) {
  using namespace model_detail;
  Ctx c{w, cfg, fo};
  const std::string pre = "encoder." + std::to_string(index);
  Var a = sbi_msa(w, cfg, h, pre + ".attn", psi, groups, trace);
  Var h1 = norm(c, add(h, c.drop(a)), pre + ".norm1");
  Var f = feed_forward(c, h1, pre + ".ff");
  return norm(c, add(h1, c.drop(f)), pre + ".norm2");
}

// One query token per person from the last l absolute frames.
inline Var build_queries(BoundParams& w, const PreparedScene& ps) {
  Tape& tape = w.tape();
  std::vector<Var> rows;
  for (const Tensor& q : ps.query_inputs) {
    Var x = tape.constant(q);
    Var y = conv_time_part(x, w("query.conv.weight"), w("query.conv.bias"), 1);
    rows.push_back(reshape(y, {1, y.dim(2)}));
  }
  return concat_rows(rows);
}

inline Var decode(BoundParams& w, const ModelConfig& cfg, const ForwardOptions& fo, Var queries, Var memory,
                  ForwardTrace* trace = nullptr) {
  using namespace model_detail;
  Ctx c{w, cfg, fo};
  Var x = queries;
  for (std::size_t k = 0; k < cfg.decoder_layers; ++k) {
    const std::string pre = "decoder." + std::to_string(k);
    AttentionOptions self_opt, cross_opt;
    if (trace) {
      trace->decoder_self.emplace_back();
      trace->decoder_cross.emplace_back();
      self_opt.trace = &trace->decoder_self.back();
      cross_opt.trace = &trace->decoder_cross.back();
    }
    Var s = attention_layer(c, x, x, pre + ".self", self_opt);
    x = norm(c, add(x, c.drop(s)), pre + ".norm1");
    Var a = attention_layer(c, x, memory, pre + ".cross", cross_opt);
    x = norm(c, add(x, c.drop(a)), pre + ".norm2");
    Var f = feed_forward(c, x, pre + ".ff");
    x = norm(c, add(x, c.drop(f)), pre + ".norm3");
  }
  return x;
}

// FC -> ReLU -> FC to K_out DCT coefficients per joint coordinate, then the
// inverse transform to N frames. Returns P x N x J x 3 displacements.
inline Var output_head(BoundParams& w, const ModelConfig& cfg, Var decoded) {
  using namespace model_detail;
  const std::size_t P = decoded.dim(0), K = cfg.out_coeffs(), J3 = cfg.J * 3;
  Var h = relu(linear(decoded, w("head.fc1.weight"), w("head.fc1.bias")));
  Var coeffs = linear(h, w("head.fc2.weight"), w("head.fc2.bias"));
  std::vector<Var> per_person;
  for (std::size_t p = 0; p < P; ++p) {
    Var cp = reshape(slice_rows(coeffs, p, 1), {K, J3});
    per_person.push_back(idct_time(cp, cfg.N));
  }
  return reshape(concat_rows(per_person), {P, cfg.N, cfg.J, 3});
}

// Encoder input: projected tokens plus temporal and identity encodings.
inline Var embed_tokens(BoundParams& w, const ModelConfig& cfg, const PreparedScene& ps) {
  Tape& tape = w.tape();
  std::vector<Var> projected;
  for (const Tensor& tok : ps.tokens)
    projected.push_back(project(tape.constant(tok), w("tbpm.conv.weight"), w("tbpm.conv.bias"), cfg.stride));
  MpbpSequence seq = concat_mpbp(projected);
  Var h = add(seq.features, tape.constant(ps.temporal_encoding));
  if (!cfg.ablation.no_ie) h = add(h, identity_encoding(w("identity.table"), ps.layout));
  return h;
}

// Full forward pass to predicted future displacements, P x N x J x 3.
inline Var forward(Tape& tape, ParamSet& params, const ModelConfig& cfg, const PreparedScene& ps,
                   const ForwardOptions& fo = {}) {
  BoundParams w(tape, params);
  model_detail::Ctx c{w, cfg, fo};
  Var h = c.drop(embed_tokens(w, cfg, ps));
  const std::vector<int>* groups = cfg.ablation.no_sbi_msa ? &ps.groups : nullptr;
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    AttentionTrace* tr = nullptr;
    if (fo.trace) {
      fo.trace->encoder.emplace_back();
      tr = &fo.trace->encoder.back();
    }
    h = tbiformer_block(w, cfg, fo, h, b, ps.psi, groups, tr);
  }
  Var queries = build_queries(w, ps);
  Var decoded = decode(w, cfg, fo, queries, h, fo.trace);
  return output_head(w, cfg, decoded);
}

// Predicted absolute poses P x N x J x 3 (meters) for an observed scene.
inline Tensor predict(const Scene& observed, ParamSet& params, const ModelConfig& cfg, ForwardTrace* trace = nullptr) {
  PreparedScene ps = prepare_scene(observed, cfg);
  Tape tape;
  ForwardOptions fo;
  fo.trace = trace;
  Var disp = forward(tape, params, cfg, ps, fo);
  return integrate_displacements(ps.last_pose, disp.value());
}

// Attention mass from each person's decoder query onto each person's memory
// tokens, P x P, averaged over heads (layer `layer` of the decoder).
inline Tensor cross_attention_mass(const ForwardTrace& trace, const MpbpLayout& layout, std::size_t layer = 0) {
  if (layer >= trace.decoder_cross.size()) throw ConfigError("cross_attention_mass: no decoder layer " + std::to_string(layer));
  Tensor probs = trace.decoder_cross[layer].mean_over_heads();
  const std::size_t P = layout.persons;
  Tensor mass({P, P});
  for (std::size_t a = 0; a < P; ++a)
    for (std::size_t j = 0; j < layout.rows(); ++j) mass(a, layout.entry(j).person) += probs(a, j);
  return mass;
}

}  // namespace tbif
