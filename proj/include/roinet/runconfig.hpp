#ifndef ROINET_RUNCONFIG_HPP
#define ROINET_RUNCONFIG_HPP

#include <cstdint>
#include <string>

#include "roinet/synth.hpp"

namespace roinet {

// Every knob of the pipeline in one flat key = value file. Unknown keys are
// rejected; absent keys keep the defaults below. default_config_text()
// documents each key.
struct RunConfig {
  // generator
  int size = 96;
  int count_normal = 118;
  int count_blotch = 120;
  int count_alternaria = 166;
  double clutter = 1.0;
  double palette_overlap = 1.0;
  int spots_min = 2;
  int spots_max = 12;
  double spot_radius_min = 0.035;
  double spot_radius_max = 0.085;

  // training protocol
  std::uint64_t seed = 1009;
  double split_ratio = 0.5;
  int batch_size = 8;
  double momentum = 0.9;
  int epochs_roi = 40;
  double lr_roi = 0.05;
  int epochs_cls = 40;
  double lr_cls = 0.02;
  int epochs_e2e = 20;
  double lr_e2e = 0.005;
  std::string class_weight_mode = "inverse";  // "inverse" or "none"
  bool stage_b_ground_truth = false;  // feed GT masks instead of predictions

  // baselines
  int gmm_components = 16;
  int gmm_iterations = 50;
  double svm_lambda = 1e-4;
  int svm_epochs = 400;
  int cluster_thresholds = 16;  // threshold sweep resolution

  GenConfig gen_config() const;
  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string default_config_text();

}  // namespace roinet

#endif  // ROINET_RUNCONFIG_HPP
