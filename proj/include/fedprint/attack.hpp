#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fedprint/dataset.hpp"
#include "fedprint/exec.hpp"
#include "fedprint/federation.hpp"
#include "fedprint/network.hpp"
#include "fedprint/params.hpp"

namespace fedprint {

// Mean activation difference at one hidden layer, the speaker's trace left
// in an exchanged model.
struct Footprint {
  int layer = 0;              // hidden layer index, 1-based
  std::vector<double> mu;     // length = that layer's width
};

struct TrialRecord {
  int round = 0;
  int layer = 0;
  int enroll_id = -1;
  int test_id = -1;
  double score = 0.0;         // cosine in [-1, 1]
  bool is_target = false;     // enroll_id == test_id
};

struct AttackConfig {
  int enrollment_speakers = 20;
  int enrollment_frames = 150;   // taken from the head of each enroll pool
  TrainConfig finetune;          // seed doubles as the attack's base seed
  std::vector<int> layers = {1, 2, 3, 4, 5, 6};
  std::vector<int> rounds = {3, 5, 10, 20, 30};

  void validate() const;
};

// Everything the attacker observes in one round: the broadcast global and
// the participants' uploaded models.
struct RoundModels {
  int round = 0;
  ParamSet broadcast;
  std::vector<ClientUpdate> client_models;
};

// Fine-tunes the observed global on known-speaker enrollment frames.
ParamSet make_enrollment_model(const ParamSet& g, const Matrix& frames,
                               const std::vector<int>& labels,
                               const TrainConfig& cfg);

// mu = mean over all indicator frames of (activation_m[h] - activation_g[h]),
// activations taken after the ReLU. Every frame counts once regardless of
// which utterance it belongs to.
Footprint footprint(const ParamSet& g, const ParamSet& m,
                    const IndicatorSet& indicator, int layer);

// Cosine of the angle between two footprints of the same layer. A footprint
// with norm below 1e-12 carries no identity evidence; scoring it is refused.
double similarity(const Footprint& a, const Footprint& b);

// For each requested round and layer: enroll speakers (round participants
// first, then a seeded draw from the remaining clients), fine-tune each on
// its held-out enrollment frames, and score every (enrollment, participant)
// pair. Trials are ordered by (round, layer, enroll_id, test_id); pairs with
// an undefined similarity are recorded with the neutral score 0.
std::vector<TrialRecord> run_attack(const std::vector<RoundModels>& models,
                                    const CorpusSplit& corpus,
                                    const AttackConfig& cfg,
                                    const ExecPolicy& policy = {});

// trials.csv: round,layer,enroll_id,test_id,score,is_target (0/1).
void write_trials_csv(const std::filesystem::path& path,
                      const std::vector<TrialRecord>& trials);

}  // namespace fedprint
