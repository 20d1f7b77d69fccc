// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance --criterion N [--save-model PATH] [--load-model PATH]

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>

#include "tbiformer/tbiformer.hpp"

using namespace tbif;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Tensor rnd(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return Tensor::uniform(std::move(s), lo, hi, rng);
}

// ---- 1: gradients ---------------------------------------------------------------

constexpr double kGradTol = 1e-4;

Var weigh(Var y) {
  std::mt19937_64 wr(99);
  return sum(mul(y, y.tape->constant(Tensor::uniform(y.shape(), -1.0, 1.0, wr))));
}

void criterion_gradients(Verdict& v) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7);
  auto r = [&](Shape s, double lo = -1.0, double hi = 1.0) { return rnd(std::move(s), rng, lo, hi); };
  auto idx = std::make_shared<std::vector<int>>(36);
  for (std::size_t i = 0; i < 36; ++i) (*idx)[i] = static_cast<int>((i * 7) % 5);
  Tensor away = r({4, 5}, 0.1, 1.0);
  for (std::size_t i = 0; i < away.size(); i += 2) away[i] = -away[i];
  const MpbpLayout layout{2, 3, 5};
  Tensor target = r({1, 2, 4, 3});

  struct Case {
    std::string name;
    ScalarFn f;
    std::vector<Tensor> inputs;
  };
  std::vector<Case> cases{
      {"add", [](Tape&, std::span<const Var> x) { return weigh(add(x[0], x[1])); }, {r({3, 4}), r({3, 4})}},
      {"sub", [](Tape&, std::span<const Var> x) { return weigh(sub(x[0], x[1])); }, {r({3, 4}), r({3, 4})}},
      {"mul", [](Tape&, std::span<const Var> x) { return weigh(mul(x[0], x[1])); }, {r({3, 4}), r({3, 4})}},
      {"scale", [](Tape&, std::span<const Var> x) { return weigh(scale(x[0], -2.5)); }, {r({3, 4})}},
      {"relu", [](Tape&, std::span<const Var> x) { return weigh(relu(x[0])); }, {away}},
      {"add_bias", [](Tape&, std::span<const Var> x) { return weigh(add_bias(x[0], x[1])); }, {r({2, 3, 4}), r({4})}},
      {"sum", [](Tape&, std::span<const Var> x) { return sum(x[0]); }, {r({3, 4})}},
      {"mean", [](Tape&, std::span<const Var> x) { return mean(mul(x[0], x[0])); }, {r({3, 4})}},
      {"mean_row_norm", [](Tape&, std::span<const Var> x) { return mean_row_norm(x[0], 1e-8); }, {r({6, 3})}},
      {"matmul", [](Tape&, std::span<const Var> x) { return weigh(matmul(x[0], x[1])); }, {r({3, 4}), r({4, 2})}},
      {"transpose", [](Tape&, std::span<const Var> x) { return weigh(transpose(x[0])); }, {r({3, 5})}},
      {"softmax_rows", [](Tape&, std::span<const Var> x) { return weigh(softmax_rows(x[0])); }, {r({4, 6}, -3, 3)}},
      {"layer_norm", [](Tape&, std::span<const Var> x) { return weigh(layer_norm(x[0], x[1], x[2])); },
       {r({4, 8}), r({8}), r({8})}},
      {"reshape", [](Tape&, std::span<const Var> x) { return weigh(reshape(x[0], {6, 2})); }, {r({3, 4})}},
      {"slice_rows", [](Tape&, std::span<const Var> x) { return weigh(slice_rows(x[0], 1, 2)); }, {r({4, 3})}},
      {"slice_cols", [](Tape&, std::span<const Var> x) { return weigh(slice_cols(x[0], 2, 3)); }, {r({4, 6})}},
      {"concat_rows", [](Tape&, std::span<const Var> x) { return weigh(concat_rows({x[0], x[1], x[0]})); },
       {r({2, 3}), r({4, 3})}},
      {"concat_cols", [](Tape&, std::span<const Var> x) { return weigh(concat_cols({x[0], x[1]})); }, {r({3, 2}), r({3, 4})}},
      {"gather_rows", [](Tape&, std::span<const Var> x) { return weigh(gather_rows(x[0], {2, 0, 2, 1, 2})); }, {r({3, 4})}},
      {"indexed_dot", [&](Tape&, std::span<const Var> x) { return weigh(indexed_dot(x[0], x[1], idx, 12)); },
       {r({3, 5}), r({5, 5})}},
      {"conv_time_part", [](Tape&, std::span<const Var> x) { return weigh(conv_time_part(x[0], x[1], x[2], 1)); },
       {r({9, 2, 3}), r({4, 1, 3, 5}), r({5})}},
      {"conv_time_part/stride2", [](Tape&, std::span<const Var> x) { return weigh(conv_time_part(x[0], x[1], x[2], 2)); },
       {r({9, 2, 3}), r({4, 1, 3, 5}), r({5})}},
      {"attention", [](Tape&, std::span<const Var> x) { return weigh(multi_head_attention(x[0], x[1], x[2], 2)); },
       {r({6, 8}), r({6, 8}), r({6, 8})}},
      {"attention/cross", [](Tape&, std::span<const Var> x) { return weigh(multi_head_attention(x[0], x[1], x[2], 2)); },
       {r({2, 8}), r({5, 8}), r({5, 8})}},
      {"attention/biased",
       [&](Tape&, std::span<const Var> x) {
         AttentionOptions opt;
         opt.bias_table = x[3];
         opt.bias_index = idx;
         return weigh(multi_head_attention(x[0], x[1], x[2], 2, opt));
       },
       {r({6, 8}), r({6, 8}), r({6, 8}), r({5, 4})}},
      {"attention/grouped",
       [](Tape&, std::span<const Var> x) {
         AttentionOptions opt;
         opt.query_groups = opt.key_groups = {0, 0, 1, 1, 1, 2};
         return weigh(multi_head_attention(x[0], x[1], x[2], 4, opt));
       },
       {r({6, 8}), r({6, 8}), r({6, 8})}},
      {"idct_time", [](Tape&, std::span<const Var> x) { return weigh(idct_time(x[0], 7)); }, {r({3, 4})}},
      {"dropout",
       [](Tape&, std::span<const Var> x) {
         std::mt19937_64 stream(11);
         return weigh(dropout(x[0], 0.3, true, stream));
       },
       {r({5, 6})}},
      {"identity_encoding", [&](Tape&, std::span<const Var> x) { return weigh(identity_encoding(x[0], layout)); }, {r({3, 4})}},
      {"rec_loss", [&](Tape& t, std::span<const Var> x) { return rec_loss(x[0], t.constant(target)); }, {r({1, 2, 4, 3})}},
  };

  double worst_op = 0.0;
  std::string worst_name;
  for (const Case& c : cases) {
    const GradCheckReport rep = grad_check(c.f, c.inputs, 1e-5);
    if (rep.max_rel_error > worst_op) {
      worst_op = rep.max_rel_error;
      worst_name = c.name;
    }
    v.require(rep.max_rel_error < kGradTol, c.name + " rel " + std::to_string(rep.max_rel_error));
  }

  // End-to-end: D=16, 1 block, P=2, T=12, N=4, standard initialization with
  // the zero-initialized output layer replaced by noise of the same scale.
  ModelConfig cfg = ModelConfig::toy(16, 2, 1);
  cfg.N = 4;
  cfg.max_persons = 2;
  GeneratorSpec g;
  g.persons = 2;
  g.frames = 12 + 1 + 4;
  g.behavior = Behavior::Follow;
  const Sample s = make_sample(synth_scene(g, 1), 12, cfg);
  ParamSet ps = init_params(cfg, 1);
  std::mt19937_64 head_rng(2);
  ps.at("head.fc2.weight").value = Tensor::normal(ps.at("head.fc2.weight").value.shape(), 0.02, head_rng);
  const GradCheckReport e2e = grad_check_params(
      [&](Tape& t) { return rec_loss(forward(t, ps, cfg, s.prepared), t.constant(s.target)); }, ps, 1e-5);
  const double secs = seconds_since(t0);
  v.require(e2e.max_rel_error < kGradTol, "end-to-end rel " + std::to_string(e2e.max_rel_error));
  v.require(secs < 60.0, "runtime");
  v.detail << cases.size() << " ops, worst " << worst_name << " rel " << worst_op << "; end-to-end over "
           << e2e.coordinates << " coordinates rel " << e2e.max_rel_error << " (analytic " << e2e.worst_analytic
           << ", numeric " << e2e.worst_numeric << ", max abs " << e2e.max_abs_error << "); " << secs << " s";
}

// ---- 2: DTW --------------------------------------------------------------------

double dtw_by_enumeration(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.dim(0), k = b.dim(0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    double d = 0.0;
    for (std::size_t c = 0; c < a.dim(1); ++c) d += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
    acc += d;
    if (i == n - 1 && j == k - 1) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < n) walk(i + 1, j, acc);
    if (j + 1 < k) walk(i, j + 1, acc);
    if (i + 1 < n && j + 1 < k) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

void criterion_dtw(Verdict& v) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> len(1, 5);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    Tensor a = rnd({len(rng), 3}, rng, -2, 2), b = rnd({len(rng), 3}, rng, -2, 2);
    worst = std::max(worst, std::abs(soft_dtw(a, b, 0.0) - dtw_by_enumeration(a, b)));
  }
  const double secs = seconds_since(t0);
  v.require(worst <= 1e-9, "deviation");
  v.require(secs < 10.0, "runtime");
  v.detail << "200 instances, max |dtw - enumeration| " << worst << "; " << secs << " s";
}

// ---- 3: index function --------------------------------------------------------------

void criterion_index(Verdict& v) {
  auto g = [](double e) { return g_index(e, 1, 9, 2000.0); };
  v.require(g(0) == 0 && g(1) == 1 && g(2000) == 9, "anchor values");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> mag(-2.0, 4.0);
  std::vector<double> xs;
  for (int i = 0; i < 1000; ++i) xs.push_back((i % 2 ? 1.0 : -1.0) * std::pow(10.0, mag(rng)));
  std::sort(xs.begin(), xs.end());
  bool odd = true, mono = true, range = true;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const int gi = g(xs[i]);
    odd = odd && g(-xs[i]) == -gi;
    range = range && gi >= -9 && gi <= 9;
    if (i) mono = mono && gi >= g(xs[i - 1]);
  }
  v.require(odd, "oddness");
  v.require(mono, "monotonicity");
  v.require(range, "range");
  v.detail << "g(0)=" << g(0) << " g(1)=" << g(1) << " g(2000)=" << g(2000) << "; 1000 points odd, monotone, in [-9, 9]";
}

// ---- 4: shapes ----------------------------------------------------------------------

void criterion_shapes(Verdict& v) {
  ModelConfig cfg = ModelConfig::toy(16, 2, 1);
  GeneratorSpec g;
  g.persons = 3;
  g.frames = 51;
  const Scene scene = synth_scene(g, 4);
  PreparedScene ps = prepare_scene(scene, cfg);
  const MpbpLayout& L = ps.layout;
  ParamSet params = init_params(cfg, 0);
  Tape tape;
  BoundParams w(tape, params);
  const Var h = embed_tokens(w, cfg, ps);
  v.require(L.windows == 41 && L.per_person() == 205 && L.rows() == 615, "layout");
  v.require(h.dim(0) == 615, "token rows");
  v.require(ps.psi.has_value() && ps.psi->size == 615, "psi size");
  bool sym = true, range = true, same = true, far = true;
  for (std::size_t i = 0; i < 615; ++i)
    for (std::size_t j = 0; j < 615; ++j) {
      const int x = (*ps.psi)(i, j);
      const auto a = L.entry(i), b = L.entry(j);
      sym = sym && x == (*ps.psi)(j, i);
      range = range && x >= 0 && x <= 9;
      if (a.person == b.person) same = same && x == 0;
      else if (a.window != b.window) far = far && x == 9;
    }
  v.require(sym, "symmetry");
  v.require(range, "range");
  v.require(same, "same-person zero");
  v.require(far, "cross-window nine");
  v.detail << "L=" << L.windows << " U=" << L.per_person() << " M=" << L.rows() << " tokens " << shape_str(h.shape())
           << " psi " << ps.psi->size << "x" << ps.psi->size;
}

// ---- 5: DCT -----------------------------------------------------------------------

void criterion_dct(Verdict& v) {
  std::mt19937_64 rng(5);
  double worst_rt = 0.0, worst_id = 0.0;
  for (std::size_t n = 1; n <= 128; ++n) {
    Tensor x = rnd({n, 6}, rng);
    worst_rt = std::max(worst_rt, max_abs_diff(idct_time(dct_time(x, n), n), x));
    worst_id = std::max(worst_id, max_abs_diff(lowpass_smooth(x, n), x));
  }
  ModelConfig cfg = ModelConfig::toy(16, 2, 1);
  cfg.N = 25;
  ParamSet ps = init_params(cfg, 6);
  bool frozen = true;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GeneratorSpec g;
    g.persons = 3;
    g.frames = 20;
    const Scene s = synth_scene(g, 60 + seed).in_meters();
    const Tensor pred = predict(s, ps, cfg);
    const std::size_t J = s.num_joints();
    for (std::size_t p = 0; p < 3; ++p)
      for (std::size_t k = 0; k < cfg.N; ++k)
        for (std::size_t e = 0; e < J * 3; ++e) frozen = frozen && pred[(p * cfg.N + k) * J * 3 + e] == s.persons[p][19 * J * 3 + e];
  }
  v.require(worst_rt < 1e-9, "roundtrip");
  v.require(worst_id < 1e-9, "K=T smoothing");
  v.require(frozen, "pose freeze");
  v.detail << "roundtrip max err " << worst_rt << " (n<=128); K=T smoothing max err " << worst_id
           << "; zero-init head freezes pose exactly: " << (frozen ? "yes" : "no");
}

// ---- 6: loss and metrics ----------------------------------------------------------

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

void criterion_metrics(Verdict& v) {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  bool ape_inv = true;
  for (int it = 0; it < 100; ++it) {
    const std::size_t P = 1 + it % 3, N = 5, J = 15;
    Tensor a = rnd({P, N, J, 3}, rng), b = rnd({P, N, J, 3}, rng);
    double loss = 0.0;
    for (std::size_t r = 0; r < P * N * J; ++r) {
      double sq = 0.0;
      for (std::size_t c = 0; c < 3; ++c) sq += (a[r * 3 + c] - b[r * 3 + c]) * (a[r * 3 + c] - b[r * 3 + c]);
      loss += std::sqrt(sq + kLossEps) - std::sqrt(kLossEps);
    }
    worst = std::max(worst, rel(rec_loss_value(a, b), loss / static_cast<double>(P * N * J)));
    const std::size_t f = it % N;
    double jp = 0.0, ap = 0.0, fd = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t j = 0; j < J; ++j) {
        double sj = 0.0, sa = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double dj = a(p, f, j, c) - b(p, f, j, c);
          const double da = (a(p, f, j, c) - a(p, f, 0, c)) - (b(p, f, j, c) - b(p, f, 0, c));
          sj += dj * dj;
          sa += da * da;
        }
        jp += std::sqrt(sj);
        ap += std::sqrt(sa);
      }
      double sf = 0.0;
      for (std::size_t c = 0; c < 3; ++c) sf += std::pow(a(p, N - 1, 0, c) - b(p, N - 1, 0, c), 2);
      fd += std::sqrt(sf);
    }
    worst = std::max(worst, rel(jpe(a, b, f), 1000.0 * jp / static_cast<double>(P * J)));
    worst = std::max(worst, rel(ape(a, b, f), 1000.0 * ap / static_cast<double>(P * J)));
    worst = std::max(worst, rel(fde(a, b), 1000.0 * fd / static_cast<double>(P)));
    // Rigid per-person translation of the prediction.
    Tensor moved = a;
    for (std::size_t p = 0; p < P; ++p) {
      const double off[3] = {rng() % 7 - 3.0, 0.25 * (rng() % 5), -1.5};
      for (std::size_t k = 0; k < N; ++k)
        for (std::size_t j = 0; j < J; ++j)
          for (std::size_t c = 0; c < 3; ++c) moved(p, k, j, c) += off[c];
    }
    ape_inv = ape_inv && std::abs(ape(moved, b, f) - ape(a, b, f)) < 1e-9;
  }
  Tensor truth({1, 1, 15, 3}), pred({1, 1, 15, 3});
  for (std::size_t j = 0; j < 15; ++j) {
    pred(0, 0, j, 0) = 0.003;
    pred(0, 0, j, 1) = 0.004;
  }
  const double five = jpe(pred, truth, 0);
  v.require(worst <= 1e-12, "oracle agreement");
  v.require(ape_inv, "APE translation invariance");
  v.require(std::abs(five - 5.0) < 1e-12, "3-4-5 example");
  v.detail << "100 random cases, max relative deviation " << worst << "; APE translation invariant; (3,4,0) mm -> JPE "
           << format_number(five) << " mm";
}

// ---- 7: permutation equivariance -------------------------------------------------

void criterion_permutation(Verdict& v) {
  ModelConfig cfg = ModelConfig::toy(32, 4, 2);
  cfg.N = 10;
  cfg.max_persons = 4;
  ParamSet ps = init_params(cfg, 7);
  std::mt19937_64 rng(8);
  for (auto& p : ps)
    if (p->name.find("gain") == std::string::npos) p->value = Tensor::normal(p->value.shape(), 0.2, rng);
  Tensor& ie = ps.at("identity.table").value;
  for (std::size_t m = 1; m < ie.dim(0); ++m)
    for (std::size_t d = 0; d < ie.dim(1); ++d) ie(m, d) = ie(0, d);
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    GeneratorSpec g;
    g.persons = 2 + k % 3;
    g.frames = 25;
    const Scene s = synth_scene(g, 700 + k);
    std::vector<std::size_t> order(g.persons);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 perm_rng(k);
    do std::shuffle(order.begin(), order.end(), perm_rng);
    while (std::is_sorted(order.begin(), order.end()));
    Scene permuted = s;
    for (std::size_t i = 0; i < order.size(); ++i) permuted.persons[i] = s.persons[order[i]];
    const Tensor a = predict(s, ps, cfg), b = predict(permuted, ps, cfg);
    const std::size_t per = a.size() / g.persons;
    for (std::size_t i = 0; i < order.size(); ++i)
      for (std::size_t e = 0; e < per; ++e) worst = std::max(worst, std::abs(b[i * per + e] - a[order[i] * per + e]));
  }
  v.require(worst < 1e-6, "deviation");
  v.detail << "20 scenes, max abs deviation " << worst;
}

// ---- 8 and 11: learning smoke test ----------------------------------------------

struct SmokeSetup {
  ModelConfig cfg;
  TrainConfig tc;
  std::vector<Sample> data;
};

constexpr std::size_t kSmokeSteps = 500;

SmokeSetup smoke_setup(const Ablation& flags = {}) {
  SmokeSetup s;
  s.cfg = ModelConfig::toy(64, 8, 1);
  s.cfg.d_ff = 128;
  s.cfg.N = 10;
  s.cfg = apply_ablation(s.cfg, flags);
  s.tc.epochs = 1000;
  s.tc.batch_size = 4;
  s.tc.lr = 3e-4;
  s.tc.dropout = 0.0;
  s.tc.seed = 1;
  s.tc.observed = 20;
  s.tc.ablation = flags;
  GeneratorSpec g;
  g.persons = 3;
  g.frames = 20 + 1 + 10;
  s.data = make_samples(synth_dataset(g, 4, 11), 20, s.cfg);
  return s;
}

struct SmokeRun {
  double initial = 0.0, final = 0.0;
  std::vector<double> curve;
};

SmokeRun smoke_run(const SmokeSetup& s) {
  SmokeRun r;
  ParamSet ps = init_params(s.cfg, 5);
  r.initial = mean_loss(s.data, ps, s.cfg);
  r.curve = train(s.data, ps, s.cfg, s.tc, kSmokeSteps).step_loss;
  r.final = mean_loss(s.data, ps, s.cfg);
  return r;
}

void criterion_smoke(Verdict& v) {
  const auto t0 = Clock::now();
  const SmokeSetup s = smoke_setup();
  const SmokeRun a = smoke_run(s);
  const double secs = seconds_since(t0);
  const SmokeRun b = smoke_run(s);
  v.require(a.curve.size() <= kSmokeSteps, "step budget");
  v.require(a.final < 0.1 * a.initial, "loss reduction");
  v.require(secs < 300.0, "runtime");
  v.require(a.curve == b.curve, "determinism");
  v.detail << a.curve.size() << " steps, rec_loss " << a.initial << " -> " << a.final << " ("
           << 100.0 * a.final / a.initial << "% of initial) in " << secs << " s; rerun curve identical: "
           << (a.curve == b.curve ? "yes" : "no");
}

void criterion_ablations(Verdict& v) {
  const char* names[] = {"no_tbpm", "no_ie", "no_trpe", "eupe", "no_sbi_msa"};
  for (const char* name : names) {
    Ablation flags;
    set_ablation_flag(flags, name);
    try {
      const auto t0 = Clock::now();
      const SmokeSetup s = smoke_setup(flags);
      ParamSet ps = init_params(s.cfg, 5);
      const double initial = mean_loss(s.data, ps, s.cfg);
      train(s.data, ps, s.cfg, s.tc, kSmokeSteps);
      const MetricReport rep = evaluate(ps, s.cfg, s.data, {0.2, 0.4});
      const double secs = seconds_since(t0);
      const bool finite = std::isfinite(rep.overall_jpe()) && std::isfinite(rep.fde);
      v.require(finite, std::string(name) + " metrics");
      v.require(secs < 300.0, std::string(name) + " runtime");
      v.detail << name << ": loss " << initial << " -> " << mean_loss(s.data, ps, s.cfg) << ", JPE@0.4s "
               << rep.jpe[1] << " mm, " << secs << " s; ";
    } catch (const std::exception& e) {
      v.require(false, std::string(name) + ": " + e.what());
    }
  }

  // Without the bias, the encoder must equal a biased model whose table is
  // zero, bit for bit.
  ModelConfig plain = ModelConfig::toy(16, 2, 1);
  plain.ablation.no_trpe = true;
  ModelConfig full = plain;
  full.ablation.no_trpe = false;
  ParamSet ps = init_params(plain, 9);
  std::mt19937_64 rng(10);
  for (auto& p : ps)
    if (p->name.find("gain") == std::string::npos) p->value = Tensor::normal(p->value.shape(), 0.2, rng);
  ParamSet with_table = ps;
  with_table.add("trpe.table", Tensor({static_cast<std::size_t>(full.beta) + 1, full.d_z}));
  GeneratorSpec g;
  g.persons = 3;
  g.frames = 20;
  g.behavior = Behavior::Follow;
  const Scene scene = synth_scene(g, 12);
  ForwardTrace ta, tb;
  const Tensor pa = predict(scene, ps, plain, &ta), pb = predict(scene, with_table, full, &tb);
  bool same = pa.storage() == pb.storage();
  for (std::size_t h = 0; h < ta.encoder[0].probs.size(); ++h)
    same = same && ta.encoder[0].probs[h].storage() == tb.encoder[0].probs[h].storage();
  const bool no_index = !prepare_scene(scene, plain).psi.has_value() && !ps.contains("trpe.table");
  v.require(same && no_index, "no_trpe bitwise unbiased");
  v.detail << "no_trpe attention bitwise equal to zero-bias attention: " << (same ? "yes" : "no");
}

// ---- 9 and 10: forecasting skill and interaction attention ---------------------

const std::vector<double> kHorizons{0.2, 0.6, 1.0};

ModelConfig skill_config() {
  ModelConfig cfg = ModelConfig::toy(64, 8, 3);
  cfg.d_ff = 128;
  cfg.N = 25;
  return cfg;
}

void criterion_skill(Verdict& v, const std::string& save_path) {
  const auto t0 = Clock::now();
  const ModelConfig cfg = skill_config();
  GeneratorSpec g;
  g.persons = 3;
  g.frames = 50 + 1 + 25;
  const std::vector<Sample> samples = make_samples(synth_dataset(g, 200, 2024), 50, cfg);
  const auto [train_idx, test_idx] = split_indices(samples.size(), 1);
  std::vector<Sample> train_set, test_set;
  for (std::size_t i : train_idx) train_set.push_back(samples[i]);
  for (std::size_t i : test_idx) test_set.push_back(samples[i]);
  TrainConfig tc;
  tc.epochs = 20;
  tc.batch_size = 8;
  tc.lr = 1e-3;
  tc.dropout = 0.2;
  tc.seed = 0;
  tc.observed = 50;
  ParamSet ps = init_params(cfg, 5);
  const TrainResult tr = train(train_set, ps, cfg, tc);
  const MetricReport model = evaluate(ps, cfg, test_set, kHorizons);
  const MetricReport base = evaluate_baseline(test_set, kHorizons);
  const double secs = seconds_since(t0);
  if (!save_path.empty()) save_checkpoint(save_path, cfg, ps);
  for (std::size_t h = 0; h < kHorizons.size(); ++h) {
    v.require(model.jpe[h] < base.jpe[h], "JPE at " + format_number(kHorizons[h]) + " s");
    v.detail << "JPE@" << format_number(kHorizons[h]) << "s " << model.jpe[h] << " vs " << base.jpe[h] << " mm; ";
  }
  v.require(secs < 1800.0, "runtime");
  v.detail << train_set.size() << " train / " << test_set.size() << " held-out scenes, loss " << tr.epoch_loss.front()
           << " -> " << tr.epoch_loss.back() << ", " << secs << " s";
}

void criterion_attention(Verdict& v, const std::string& load_path) {
  if (load_path.empty()) {
    v.require(false, "needs --load-model from criterion 9");
    return;
  }
  Checkpoint ck = load_checkpoint(load_path);
  GeneratorSpec g;
  g.persons = 3;
  g.frames = 50 + 1;
  g.behavior = Behavior::Follow;
  double pair = 0.0, walker = 0.0;
  const int scenes = 20;
  for (int k = 0; k < scenes; ++k) {
    ForwardTrace trace;
    const Scene s = synth_scene(g, 500 + k);
    predict(s, ck.params, ck.config, &trace);
    const Tensor mass = cross_attention_mass(trace, prepare_scene(s, ck.config).layout);
    // Persons 0 and 1 form the pair, person 2 walks independently.
    pair += 0.5 * (mass(0, 1) + mass(1, 0));
    walker += 0.5 * (mass(0, 2) + mass(1, 2));
  }
  const double ratio = pair / walker;
  v.require(ratio > 1.0, "ratio");
  v.detail << scenes << " follow scenes, mean pair mass " << pair / scenes << ", mean walker mass " << walker / scenes
           << ", ratio " << ratio;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int criterion = 0;
  std::string save_model, load_model;
  app.add_option("--criterion", criterion)->required()->check(CLI::Range(1, 11));
  app.add_option("--save-model", save_model);
  app.add_option("--load-model", load_model);
  CLI11_PARSE(app, argc, argv);

  Verdict v;
  try {
    switch (criterion) {
      case 1: criterion_gradients(v); break;
      case 2: criterion_dtw(v); break;
      case 3: criterion_index(v); break;
      case 4: criterion_shapes(v); break;
      case 5: criterion_dct(v); break;
      case 6: criterion_metrics(v); break;
      case 7: criterion_permutation(v); break;
      case 8: criterion_smoke(v); break;
      case 9: criterion_skill(v, save_model); break;
      case 10: criterion_attention(v, load_model); break;
      case 11: criterion_ablations(v); break;
    }
  } catch (const std::exception& e) {
    v.require(false, std::string("exception: ") + e.what());
  }
  std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << criterion << ": " << v.detail.str() << std::endl;
  return v.pass ? 0 : 1;
}
