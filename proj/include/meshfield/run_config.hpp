#pragma once

#include <string>

#include "meshfield/training.hpp"

namespace meshfield {

// Everything a CLI run needs, serializable as one flat json object so a run
// is reproducible from a single file. Missing keys keep their defaults;
// unknown keys are config errors.
struct RunConfig {
  TrainConfig train;
  std::string data_dir;
  std::string manifest;
  std::string assets;
  std::string out_dir;
  std::string checkpoint;
  bool mouth_filter = false;
  std::string retarget_density = "analytic";  // "analytic" | "learned"

  bool operator==(const RunConfig&) const = default;
};

// parse(emit(c)) == c holds exactly: doubles are emitted round-trippable.
RunConfig parse_run_config(const std::string& json_text);
std::string emit_run_config(const RunConfig& c);

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& c, const std::string& path);

}  // namespace meshfield
