#include "mmgpvae/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace mmgpvae {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("config field '" + where + "': " + what);
}

double as_double(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

Index as_index(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<Index>();
}

std::string as_string(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

std::vector<Index> as_index_list(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of integers");
  std::vector<Index> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) fail(where, "expected an array of integers");
    out.push_back(v.get<Index>());
  }
  return out;
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& known) {
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) fail(where + "." + key, "unknown key");
}

void parse_sim(const json& j, SimConfig& cfg) {
  check_keys(j, "simulate",
             {"trials", "time_bins", "image_side", "neurons", "kernel", "angle_range_deg",
              "scale_range", "seed", "train_fraction", "template_path", "loading_scale",
              "base_log_rate"});
  if (j.contains("trials")) cfg.trials = as_index(j["trials"], "simulate.trials");
  if (j.contains("time_bins")) cfg.t_bins = as_index(j["time_bins"], "simulate.time_bins");
  if (j.contains("image_side"))
    cfg.image_side = as_index(j["image_side"], "simulate.image_side");
  if (j.contains("neurons")) cfg.neurons = as_index(j["neurons"], "simulate.neurons");
  if (j.contains("kernel")) {
    const json& k = j["kernel"];
    check_keys(k, "simulate.kernel", {"rho", "ell", "alpha"});
    if (k.contains("rho")) cfg.kernel.rho = as_double(k["rho"], "simulate.kernel.rho");
    if (k.contains("ell")) cfg.kernel.ell = as_double(k["ell"], "simulate.kernel.ell");
    if (k.contains("alpha")) cfg.kernel.alpha = as_double(k["alpha"], "simulate.kernel.alpha");
  }
  if (j.contains("angle_range_deg")) {
    const json& r = j["angle_range_deg"];
    if (!r.is_array() || r.size() != 2) fail("simulate.angle_range_deg", "expected [lo, hi]");
    cfg.angle_lo_deg = as_double(r[0], "simulate.angle_range_deg[0]");
    cfg.angle_hi_deg = as_double(r[1], "simulate.angle_range_deg[1]");
  }
  if (j.contains("scale_range")) {
    const json& r = j["scale_range"];
    if (!r.is_array() || r.size() != 2) fail("simulate.scale_range", "expected [lo, hi]");
    cfg.scale_lo = as_double(r[0], "simulate.scale_range[0]");
    cfg.scale_hi = as_double(r[1], "simulate.scale_range[1]");
  }
  if (j.contains("seed")) cfg.seed = static_cast<std::uint64_t>(as_index(j["seed"], "simulate.seed"));
  if (j.contains("train_fraction"))
    cfg.train_fraction = as_double(j["train_fraction"], "simulate.train_fraction");
  if (j.contains("template_path"))
    cfg.template_path = as_string(j["template_path"], "simulate.template_path");
  if (j.contains("loading_scale"))
    cfg.loading_scale = as_double(j["loading_scale"], "simulate.loading_scale");
  if (j.contains("base_log_rate"))
    cfg.base_log_rate = as_double(j["base_log_rate"], "simulate.base_log_rate");
}

void parse_model(const json& j, ModelConfig& cfg) {
  check_keys(j, "model",
             {"mode", "latents", "time_bins", "freq_bins", "prune", "kernel_init", "alpha",
              "neural_likelihood", "sigma_y2_init", "sigma_n2_init", "embed_dim",
              "encoder_widths", "decoder_widths", "variance_floor", "exp_clamp"});
  if (j.contains("mode")) cfg.mode = mode_from_name(as_string(j["mode"], "model.mode"));
  if (j.contains("latents")) {
    const json& l = j["latents"];
    check_keys(l, "model.latents", {"behavior", "shared", "neural"});
    if (l.contains("behavior"))
      cfg.partition.p_a = as_index(l["behavior"], "model.latents.behavior");
    if (l.contains("shared")) cfg.partition.p_s = as_index(l["shared"], "model.latents.shared");
    if (l.contains("neural")) cfg.partition.p_b = as_index(l["neural"], "model.latents.neural");
  }
  if (j.contains("time_bins")) cfg.t_bins = as_index(j["time_bins"], "model.time_bins");
  if (j.contains("freq_bins")) cfg.f_bins = as_index(j["freq_bins"], "model.freq_bins");
  if (j.contains("prune")) {
    const json& p = j["prune"];
    check_keys(p, "model.prune", {"ell_min", "mass"});
    if (p.contains("ell_min")) cfg.prune_ell_min = as_double(p["ell_min"], "model.prune.ell_min");
    if (p.contains("mass")) cfg.prune_mass = as_double(p["mass"], "model.prune.mass");
  }
  if (j.contains("kernel_init")) {
    const json& k = j["kernel_init"];
    check_keys(k, "model.kernel_init", {"rho", "ell"});
    if (k.contains("rho")) cfg.rho_init = as_double(k["rho"], "model.kernel_init.rho");
    if (k.contains("ell")) cfg.ell_init = as_double(k["ell"], "model.kernel_init.ell");
  }
  if (j.contains("alpha")) cfg.alpha = as_double(j["alpha"], "model.alpha");
  if (j.contains("neural_likelihood")) {
    const std::string kind = as_string(j["neural_likelihood"], "model.neural_likelihood");
    if (kind == "poisson") cfg.neural_kind = NeuralKind::kPoisson;
    else if (kind == "gaussian") cfg.neural_kind = NeuralKind::kGaussian;
    else fail("model.neural_likelihood", "expected 'poisson' or 'gaussian'");
  }
  if (j.contains("sigma_y2_init"))
    cfg.sigma_y2_init = as_double(j["sigma_y2_init"], "model.sigma_y2_init");
  if (j.contains("sigma_n2_init"))
    cfg.sigma_n2_init = as_double(j["sigma_n2_init"], "model.sigma_n2_init");
  if (j.contains("embed_dim")) cfg.embed_dim = as_index(j["embed_dim"], "model.embed_dim");
  if (j.contains("encoder_widths")) {
    const json& w = j["encoder_widths"];
    check_keys(w, "model.encoder_widths", {"behavior", "neural"});
    if (w.contains("behavior"))
      cfg.enc_a_widths = as_index_list(w["behavior"], "model.encoder_widths.behavior");
    if (w.contains("neural"))
      cfg.enc_b_widths = as_index_list(w["neural"], "model.encoder_widths.neural");
  }
  if (j.contains("decoder_widths"))
    cfg.dec_widths = as_index_list(j["decoder_widths"], "model.decoder_widths");
  if (j.contains("variance_floor"))
    cfg.variance_floor = as_double(j["variance_floor"], "model.variance_floor");
  if (j.contains("exp_clamp")) cfg.exp_clamp = as_double(j["exp_clamp"], "model.exp_clamp");
}

void parse_train(const json& j, TrainConfig& cfg) {
  check_keys(j, "train",
             {"epochs", "batch_size", "step_size", "seed", "samples_per_trial"});
  if (j.contains("epochs")) cfg.epochs = as_index(j["epochs"], "train.epochs");
  if (j.contains("batch_size")) cfg.batch_size = as_index(j["batch_size"], "train.batch_size");
  if (j.contains("step_size")) cfg.step_size = as_double(j["step_size"], "train.step_size");
  if (j.contains("seed")) cfg.seed = static_cast<std::uint64_t>(as_index(j["seed"], "train.seed"));
  if (j.contains("samples_per_trial"))
    cfg.samples_per_trial = as_index(j["samples_per_trial"], "train.samples_per_trial");
}

void parse_compare(const json& j, CompareOptions& cfg) {
  check_keys(j, "compare", {"modes", "seeds", "base_seed"});
  if (j.contains("modes")) {
    if (!j["modes"].is_array()) fail("compare.modes", "expected an array of mode names");
    cfg.modes.clear();
    for (const auto& m : j["modes"])
      cfg.modes.push_back(mode_from_name(as_string(m, "compare.modes[]")));
  }
  if (j.contains("seeds")) cfg.n_seeds = static_cast<int>(as_index(j["seeds"], "compare.seeds"));
  if (j.contains("base_seed"))
    cfg.base_seed = static_cast<std::uint64_t>(as_index(j["base_seed"], "compare.base_seed"));
}

}  // namespace

AppConfig parse_config_json(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(origin + ": top level must be a JSON object");
  check_keys(root, origin, {"simulate", "model", "train", "compare"});
  AppConfig cfg;
  if (root.contains("simulate")) parse_sim(root["simulate"], cfg.sim);
  if (root.contains("model")) parse_model(root["model"], cfg.model);
  if (root.contains("train")) parse_train(root["train"], cfg.train);
  if (root.contains("compare")) parse_compare(root["compare"], cfg.compare);
  return cfg;
}

AppConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file '" + path + "': cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_json(buf.str(), path);
}

std::string model_config_to_json(const ModelConfig& cfg) {
  json j;
  j["mode"] = mode_name(cfg.mode);
  j["latents"] = {{"behavior", cfg.partition.p_a},
                  {"shared", cfg.partition.p_s},
                  {"neural", cfg.partition.p_b}};
  j["time_bins"] = cfg.t_bins;
  j["freq_bins"] = cfg.f_bins;
  j["prune"] = {{"ell_min", cfg.prune_ell_min}, {"mass", cfg.prune_mass}};
  j["kernel_init"] = {{"rho", cfg.rho_init}, {"ell", cfg.ell_init}};
  j["alpha"] = cfg.alpha;
  j["neural_likelihood"] = cfg.neural_kind == NeuralKind::kPoisson ? "poisson" : "gaussian";
  j["sigma_y2_init"] = cfg.sigma_y2_init;
  j["sigma_n2_init"] = cfg.sigma_n2_init;
  j["embed_dim"] = cfg.embed_dim;
  j["encoder_widths"] = {{"behavior", cfg.enc_a_widths}, {"neural", cfg.enc_b_widths}};
  j["decoder_widths"] = cfg.dec_widths;
  j["variance_floor"] = cfg.variance_floor;
  j["exp_clamp"] = cfg.exp_clamp;
  j["m_dim"] = cfg.m_dim;
  j["n_dim"] = cfg.n_dim;
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig cfg;
  const json dims_m = j.contains("m_dim") ? j["m_dim"] : json(0);
  const json dims_n = j.contains("n_dim") ? j["n_dim"] : json(0);
  j.erase("m_dim");
  j.erase("n_dim");
  parse_model(j, cfg);
  cfg.m_dim = dims_m.get<Index>();
  cfg.n_dim = dims_n.get<Index>();
  return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["step_size"] = cfg.step_size;
  j["seed"] = cfg.seed;
  j["samples_per_trial"] = cfg.samples_per_trial;
  return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig cfg;
  parse_train(json::parse(text), cfg);
  return cfg;
}

std::string sim_config_to_json(const SimConfig& cfg) {
  json j;
  j["trials"] = cfg.trials;
  j["time_bins"] = cfg.t_bins;
  j["image_side"] = cfg.image_side;
  j["neurons"] = cfg.neurons;
  j["kernel"] = {{"rho", cfg.kernel.rho}, {"ell", cfg.kernel.ell}, {"alpha", cfg.kernel.alpha}};
  j["angle_range_deg"] = {cfg.angle_lo_deg, cfg.angle_hi_deg};
  j["scale_range"] = {cfg.scale_lo, cfg.scale_hi};
  j["seed"] = cfg.seed;
  j["train_fraction"] = cfg.train_fraction;
  j["template_path"] = cfg.template_path;
  j["loading_scale"] = cfg.loading_scale;
  j["base_log_rate"] = cfg.base_log_rate;
  return j.dump();
}

}  // namespace mmgpvae
