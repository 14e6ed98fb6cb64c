#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "fedprint/matrix.hpp"
#include "fedprint/network.hpp"
#include "fedprint/params.hpp"

namespace fedprint {

// Labeled frames of one speaker, split into the local training portion and
// the analysis holdout used to track per-speaker performance. The enroll
// pool is extra same-speaker data generated alongside; it never enters any
// training run and exists so verification trials can enroll a speaker on
// frames disjoint from everything that speaker trained on.
struct SpeakerDataset {
  int speaker_id = -1;
  Matrix train_frames;
  std::vector<int> train_labels;
  Matrix analysis_frames;
  std::vector<int> analysis_labels;
  Matrix enroll_frames;
  std::vector<int> enroll_labels;

  bool operator==(const SpeakerDataset&) const = default;
};

// Probe-only utterances from speakers outside every other split. Used to
// compare model activations, never to train.
struct IndicatorSet {
  std::vector<Matrix> utterances;

  bool operator==(const IndicatorSet&) const = default;
};

struct CorpusParams {
  int num_clients = 60;
  int feature_dim = 16;
  int num_classes = 10;
  double speaker_strength = 0.5;
  double noise_sigma = 0.87;
  int frames_min = 200;
  int frames_max = 800;
  int analysis_threshold = 500;
  int analysis_size = 150;
  int dev_speakers = 8;
  int test_speakers = 8;
  int indicator_utterances = 10;
  int indicator_frames = 20;
  int enroll_pool = 200;

  void validate() const;  // throws config_error

  bool operator==(const CorpusParams&) const = default;
};

// Full corpus: client speakers, disjoint dev/test speaker sets, and the
// indicator set. Speaker-id ranges never overlap between groups.
struct CorpusSplit {
  CorpusParams params;
  std::uint64_t seed = 0;
  std::vector<SpeakerDataset> clients;
  std::vector<SpeakerDataset> dev;
  std::vector<SpeakerDataset> test;
  IndicatorSet indicator;

  bool operator==(const CorpusSplit&) const = default;
};

struct AnalysisSplit {
  Matrix train_frames;
  std::vector<int> train_labels;
  Matrix analysis_frames;
  std::vector<int> analysis_labels;
};

// If the speaker has more than `threshold` frames, the last `analysis_size`
// frames become the analysis portion and the rest train; otherwise the
// analysis portion is empty. Pure function, requires analysis_size < threshold.
AnalysisSplit split_analysis(const Matrix& frames, const std::vector<int>& labels,
                             int threshold, int analysis_size);

// Synthetic corpus: frame of speaker s with label y is
//   x = prototype[y] + speaker_strength * voice[s] + Normal(0, noise_sigma^2 I).
// Class prototypes are drawn once per corpus, voice vectors once per speaker.
// Deterministic given the seed.
CorpusSplit generate_corpus(const CorpusParams& params, std::uint64_t seed);

// Binary corpus file (magic "FPCORP1\n", decimal shape lines, little-endian
// binary64 frames / int32 labels) plus a JSON manifest listing speaker ids,
// frame counts and split membership.
void save_corpus(const CorpusSplit& corpus, const std::filesystem::path& path);
CorpusSplit load_corpus(const std::filesystem::path& path);
void write_manifest(const CorpusSplit& corpus, const std::filesystem::path& path);

// Convenience overload matching how clients are trained everywhere: local
// SGD on the speaker's training portion only.
inline ParamSet train_local(const ParamSet& start, const SpeakerDataset& data,
                            const TrainConfig& cfg) {
  return train_local(start, data.train_frames, data.train_labels, cfg);
}

}  // namespace fedprint
