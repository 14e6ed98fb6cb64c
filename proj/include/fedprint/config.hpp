#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedprint/attack.hpp"
#include "fedprint/dataset.hpp"
#include "fedprint/federation.hpp"
#include "fedprint/network.hpp"

namespace fedprint {

// One experiment, one file. Serialized as sectioned key = value text; the
// copy written into the output directory is the run's provenance record.
// Every stochastic component derives its seed from the single global seed
// here by hashing a fixed component name, so runs are reproducible from
// this file alone.
struct ExperimentConfig {
  CorpusParams corpus;

  std::vector<int> hidden = {64, 64, 64, 64, 64, 64};  // hidden layer widths

  // Local training, shared by FL clients and the attacker's enrollment step.
  int epochs = 20;
  int batch_size = 16;
  double learning_rate = 0.05;

  int num_rounds = 30;
  int clients_per_round = 10;

  int enrollment_speakers = 20;
  int enrollment_frames = 180;
  std::vector<int> attack_layers = {1, 2, 3, 4, 5, 6};
  std::vector<int> attack_rounds = {3, 5, 10, 20, 30};

  std::uint64_t seed = 0;
  std::string out = "out";

  bool operator==(const ExperimentConfig&) const = default;

  void validate() const;

  // [feature_dim, hidden..., num_classes]
  std::vector<std::size_t> layer_dims() const;

  std::uint64_t corpus_seed() const;
  FederationConfig federation_config() const;
  AttackConfig attack_config() const;
};

// Parses sectioned key = value text. Unset keys keep their defaults;
// unknown sections or keys are configuration errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);

// Canonical serialization; parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);
void write_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

}  // namespace fedprint
