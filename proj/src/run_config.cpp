#include "meshfield/run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "meshfield/errors.hpp"

namespace meshfield {

namespace {

using nlohmann::json;

int get_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) fail(ErrorKind::config, key + " must be an integer");
  return v.get<int>();
}

double get_double(const json& v, const std::string& key) {
  if (!v.is_number()) fail(ErrorKind::config, key + " must be a number");
  return v.get<double>();
}

bool get_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) fail(ErrorKind::config, key + " must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) fail(ErrorKind::config, key + " must be a string");
  return v.get<std::string>();
}

Vec3 get_rgb(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
      !v[2].is_number())
    fail(ErrorKind::config, key + " must be an [r, g, b] array");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("config is not valid json: ") + e.what());
  }
  if (!root.is_object()) fail(ErrorKind::config, "config must be a json object");

  RunConfig c;
  TrainConfig& t = c.train;
  for (const auto& [key, v] : root.items()) {
    if (key == "rays_per_batch") t.rays_per_batch = get_int(v, key);
    else if (key == "samples_per_ray") t.samples_per_ray = get_int(v, key);
    else if (key == "lr_network") t.lr_network = get_double(v, key);
    else if (key == "lr_face") t.lr_face = get_double(v, key);
    else if (key == "adam_beta1") t.adam_beta1 = get_double(v, key);
    else if (key == "adam_beta2") t.adam_beta2 = get_double(v, key);
    else if (key == "adam_eps") t.adam_eps = get_double(v, key);
    else if (key == "total_iters") t.total_iters = get_int(v, key);
    else if (key == "phase_switch_iter") t.phase_switch_iter = get_int(v, key);
    else if (key == "eps0") t.eps0 = get_double(v, key);
    else if (key == "eps_final") t.eps_final = get_double(v, key);
    else if (key == "seed") {
      if (!v.is_number_unsigned() && !v.is_number_integer())
        fail(ErrorKind::config, "seed must be an integer");
      t.seed = v.get<uint64_t>();
    } else if (key == "shell_skip") t.shell_skip = get_bool(v, key);
    else if (key == "stratified") t.stratified = get_bool(v, key);
    else if (key == "background") t.background = get_rgb(v, key);
    else if (key == "checkpoint_every") t.checkpoint_every = get_int(v, key);
    else if (key == "num_frequencies") t.num_frequencies = get_int(v, key);
    else if (key == "hidden_layers") t.hidden_layers = get_int(v, key);
    else if (key == "hidden_width") t.hidden_width = get_int(v, key);
    else if (key == "skip_layer") t.skip_layer = get_int(v, key);
    else if (key == "data_dir") c.data_dir = get_string(v, key);
    else if (key == "manifest") c.manifest = get_string(v, key);
    else if (key == "assets") c.assets = get_string(v, key);
    else if (key == "out_dir") c.out_dir = get_string(v, key);
    else if (key == "checkpoint") c.checkpoint = get_string(v, key);
    else if (key == "mouth_filter") c.mouth_filter = get_bool(v, key);
    else if (key == "retarget_density") c.retarget_density = get_string(v, key);
    else fail(ErrorKind::config, "unknown config key " + key);
  }
  if (c.retarget_density != "analytic" && c.retarget_density != "learned")
    fail(ErrorKind::config, "retarget_density must be analytic or learned");
  return c;
}

std::string emit_run_config(const RunConfig& c) {
  const TrainConfig& t = c.train;
  json root;
  root["rays_per_batch"] = t.rays_per_batch;
  root["samples_per_ray"] = t.samples_per_ray;
  root["lr_network"] = t.lr_network;
  root["lr_face"] = t.lr_face;
  root["adam_beta1"] = t.adam_beta1;
  root["adam_beta2"] = t.adam_beta2;
  root["adam_eps"] = t.adam_eps;
  root["total_iters"] = t.total_iters;
  root["phase_switch_iter"] = t.phase_switch_iter;
  root["eps0"] = t.eps0;
  root["eps_final"] = t.eps_final;
  root["seed"] = t.seed;
  root["shell_skip"] = t.shell_skip;
  root["stratified"] = t.stratified;
  root["background"] = {t.background.x, t.background.y, t.background.z};
  root["checkpoint_every"] = t.checkpoint_every;
  root["num_frequencies"] = t.num_frequencies;
  root["hidden_layers"] = t.hidden_layers;
  root["hidden_width"] = t.hidden_width;
  root["skip_layer"] = t.skip_layer;
  root["data_dir"] = c.data_dir;
  root["manifest"] = c.manifest;
  root["assets"] = c.assets;
  root["out_dir"] = c.out_dir;
  root["checkpoint"] = c.checkpoint;
  root["mouth_filter"] = c.mouth_filter;
  root["retarget_density"] = c.retarget_density;
  return root.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::missing_file, "cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

void save_run_config(const RunConfig& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::missing_file, "cannot create config " + path);
  out << emit_run_config(c);
  if (!out) fail(ErrorKind::parse, "failed writing config " + path);
}

}  // namespace meshfield
