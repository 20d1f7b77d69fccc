#pragma once

#include <filesystem>
#include <set>
#include <string>

#include "tbiformer/model.hpp"
#include "tbiformer/scene_io.hpp"

namespace tbif {

inline json ablation_to_json(const Ablation& a) {
  return {{"no_tbpm", a.no_tbpm}, {"no_ie", a.no_ie}, {"no_trpe", a.no_trpe}, {"eupe", a.eupe},
          {"no_sbi_msa", a.no_sbi_msa}};
}

inline Ablation ablation_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("ablation: expected an object");
  Ablation a;
  for (auto& [key, value] : j.items()) {
    if (!value.is_boolean()) throw ValidationError("ablation." + key + ": expected a boolean");
    const bool b = value.get<bool>();
    if (key == "no_tbpm") a.no_tbpm = b;
    else if (key == "no_ie") a.no_ie = b;
    else if (key == "no_trpe") a.no_trpe = b;
    else if (key == "eupe") a.eupe = b;
    else if (key == "no_sbi_msa") a.no_sbi_msa = b;
    else throw ValidationError("ablation: unknown flag \"" + key + "\"");
  }
  return a;
}

// Sets one flag by name; used by command-line parsing.
inline void set_ablation_flag(Ablation& a, const std::string& name) {
  ablation_from_json(json{{name, true}});
  if (name == "no_tbpm") a.no_tbpm = true;
  else if (name == "no_ie") a.no_ie = true;
  else if (name == "no_trpe") a.no_trpe = true;
  else if (name == "eupe") a.eupe = true;
  else a.no_sbi_msa = true;
}

inline json model_config_to_json(const ModelConfig& c) {
  json j{{"D", c.D},
         {"d_z", c.d_z},
         {"heads", c.heads},
         {"blocks", c.blocks},
         {"decoder_layers", c.decoder_layers},
         {"d_ff", c.d_ff},
         {"l", c.l},
         {"stride", c.stride},
         {"B", c.B},
         {"alpha", c.alpha},
         {"beta", c.beta},
         {"gamma", c.gamma},
         {"eta", c.eta},
         {"trpe_scale", c.trpe_scale},
         {"soft_dtw_gamma", c.soft_dtw_gamma},
         {"dropout", c.dropout},
         {"N", c.N},
         {"J", c.J},
         {"max_persons", c.max_persons},
         {"ablation", ablation_to_json(c.ablation)}};
  j["K_in"] = c.K_in ? json(*c.K_in) : json(nullptr);
  j["K_out"] = c.K_out ? json(*c.K_out) : json(nullptr);
  return j;
}

namespace io_detail {

inline std::size_t count(const json& v, const std::string& what) {
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ValidationError(what + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace io_detail

inline const std::set<std::string>& model_config_keys() {
  static const std::set<std::string> keys{"D",     "d_z",   "heads",      "blocks",         "decoder_layers",
                                          "d_ff",  "l",     "stride",     "B",              "alpha",
                                          "beta",  "gamma", "eta",        "trpe_scale",     "soft_dtw_gamma",
                                          "dropout", "N",   "J",          "max_persons",    "ablation",
                                          "K_in",  "K_out"};
  return keys;
}

// Reads the model fields present in `j` over the defaults in `base`.
// Unknown keys are left for the caller to judge.
inline ModelConfig model_config_from_json(const json& j, ModelConfig base = {}) {
  using io_detail::count;
  using io_detail::integer;
  using io_detail::number;
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  ModelConfig c = base;
  auto opt_count = [&](const char* key, std::optional<std::size_t>& out) {
    if (!j.contains(key)) return;
    out = j.at(key).is_null() ? std::nullopt : std::optional<std::size_t>(count(j.at(key), key));
  };
  auto get_count = [&](const char* key, std::size_t& out) {
    if (j.contains(key)) out = count(j.at(key), key);
  };
  auto get_number = [&](const char* key, double& out) {
    if (j.contains(key)) out = number(j.at(key), key);
  };
  get_count("D", c.D);
  get_count("d_z", c.d_z);
  get_count("heads", c.heads);
  get_count("blocks", c.blocks);
  get_count("decoder_layers", c.decoder_layers);
  get_count("d_ff", c.d_ff);
  get_count("l", c.l);
  get_count("stride", c.stride);
  get_count("B", c.B);
  if (j.contains("alpha")) c.alpha = integer(j.at("alpha"), "alpha");
  if (j.contains("beta")) c.beta = integer(j.at("beta"), "beta");
  get_number("gamma", c.gamma);
  get_number("eta", c.eta);
  get_number("trpe_scale", c.trpe_scale);
  get_number("soft_dtw_gamma", c.soft_dtw_gamma);
  get_number("dropout", c.dropout);
  get_count("N", c.N);
  get_count("J", c.J);
  get_count("max_persons", c.max_persons);
  opt_count("K_in", c.K_in);
  opt_count("K_out", c.K_out);
  if (j.contains("ablation")) c.ablation = ablation_from_json(j.at("ablation"));
  c.validate();
  return c;
}

// Checks names and shapes of `params` against a fresh initialization of `cfg`.
inline void validate_params(const ParamSet& params, const ModelConfig& cfg) {
  ParamSet expected = init_params(cfg, 0);
  for (const auto& p : expected) {
    const Param* got = params.find(p->name);
    if (!got) throw ValidationError("checkpoint: missing parameter \"" + p->name + "\"");
    if (got->value.shape() != p->value.shape())
      throw ValidationError("checkpoint: parameter \"" + p->name + "\" has shape " + shape_str(got->value.shape()) +
                            ", config implies " + shape_str(p->value.shape()));
  }
  for (const auto& p : params)
    if (!expected.contains(p->name)) throw ValidationError("checkpoint: unexpected parameter \"" + p->name + "\"");
}

struct Checkpoint {
  ModelConfig config;
  ParamSet params;
};

inline json checkpoint_to_json(const ModelConfig& cfg, const ParamSet& params) {
  json list = json::array();
  for (const auto& p : params)
    list.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"data", p->value.storage()}});
  return {{"config", model_config_to_json(cfg)}, {"params", std::move(list)}};
}

inline Checkpoint checkpoint_from_json(const json& j) {
  using namespace io_detail;
  Checkpoint ck;
  const json& cfg = field(j, "config");
  for (auto& [key, value] : cfg.items())
    if (!model_config_keys().count(key)) throw ValidationError("config: unknown field \"" + key + "\"");
  ck.config = model_config_from_json(cfg);
  const json& list = field(j, "params");
  if (!list.is_array()) throw ValidationError("params: expected an array");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "params[" + std::to_string(i) + "]";
    const json& entry = list[i];
    const json& name = field(entry, "name", where + ": ");
    if (!name.is_string()) throw ValidationError(where + ".name: expected a string");
    const json& shape_j = field(entry, "shape", where + ": ");
    const json& data_j = field(entry, "data", where + ": ");
    if (!shape_j.is_array() || !data_j.is_array()) throw ValidationError(where + ": shape and data must be arrays");
    Shape shape;
    for (const json& d : shape_j) {
      const std::size_t n = count(d, where + ".shape");
      if (n == 0) throw ValidationError(where + ".shape: dimensions must be positive");
      shape.push_back(n);
    }
    if (shape_size(shape) != data_j.size())
      throw ValidationError(where + ": " + std::to_string(data_j.size()) + " values for shape " + shape_str(shape));
    std::vector<double> data;
    data.reserve(data_j.size());
    for (const json& v : data_j) data.push_back(number(v, where + ".data"));
    const std::string n = name.get<std::string>();
    if (ck.params.contains(n)) throw ValidationError(where + ": duplicate parameter \"" + n + "\"");
    ck.params.add(n, Tensor(shape, std::move(data)));
  }
  validate_params(ck.params, ck.config);
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ParamSet& params) {
  io_detail::write_text(path, checkpoint_to_json(cfg, params).dump() + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  json j = io_detail::parse_json(io_detail::read_text(path), path.string());
  try {
    return checkpoint_from_json(j);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace tbif
