#include "fedprint/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>

#include "fedprint/errors.hpp"
#include "fedprint/format.hpp"
#include "fedprint/rng.hpp"

namespace fedprint {

namespace {

std::size_t indicator_frame_count(const IndicatorSet& indicator) {
  std::size_t total = 0;
  for (const auto& utt : indicator.utterances) total += utt.rows;
  return total;
}

// One forward pass per model covers every probed layer at once; the public
// single-layer footprint() below reuses this with one entry.
std::vector<Footprint> footprints_from_traces(
    const std::vector<ActivationTrace>& g_traces, const ParamSet& m,
    const IndicatorSet& indicator, const std::vector<int>& layers,
    std::size_t total_frames) {
  std::vector<Footprint> out;
  out.reserve(layers.size());
  for (int h : layers) {
    Footprint fp;
    fp.layer = h;
    fp.mu.assign(m.layers[std::size_t(h) - 1].weight.rows, 0.0);
    out.push_back(std::move(fp));
  }

  for (std::size_t u = 0; u < indicator.utterances.size(); ++u) {
    const ActivationTrace m_trace = forward(m, indicator.utterances[u]).trace;
    const ActivationTrace& g_trace = g_traces[u];
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const Matrix& ma = m_trace.per_layer[std::size_t(layers[li]) - 1];
      const Matrix& ga = g_trace.per_layer[std::size_t(layers[li]) - 1];
      auto& mu = out[li].mu;
      for (std::size_t j = 0; j < ma.data.size(); ++j) {
        mu[j % ma.cols] += ma.data[j] - ga.data[j];
      }
    }
  }
  for (auto& fp : out) {
    for (double& v : fp.mu) v /= double(total_frames);
  }
  return out;
}

std::vector<ActivationTrace> trace_indicator(const ParamSet& p,
                                             const IndicatorSet& indicator) {
  std::vector<ActivationTrace> traces;
  traces.reserve(indicator.utterances.size());
  for (const auto& utt : indicator.utterances) {
    traces.push_back(forward(p, utt).trace);
  }
  return traces;
}

void check_probe_layers(const ParamSet& model, const std::vector<int>& layers) {
  const int hidden = int(model.layers.size()) - 1;
  for (int h : layers) {
    if (h < 1 || h > hidden) {
      throw config_error("attack: probed layer " + std::to_string(h) +
                         " outside [1, " + std::to_string(hidden) + "]");
    }
  }
}

const SpeakerDataset& client_by_id(const CorpusSplit& corpus, int speaker) {
  for (const auto& c : corpus.clients) {
    if (c.speaker_id == speaker) return c;
  }
  throw protocol_error("attack: stored model references unknown client " +
                       std::to_string(speaker));
}

Matrix head_rows(const Matrix& m, std::size_t n) {
  Matrix out(n, m.cols);
  std::copy(m.data.begin(), m.data.begin() + long(n * m.cols), out.data.begin());
  return out;
}

}  // namespace

void AttackConfig::validate() const {
  if (enrollment_speakers < 1) {
    throw config_error("attack: enrollment_speakers must be >= 1");
  }
  if (enrollment_frames < 1) {
    throw config_error("attack: enrollment_frames must be >= 1");
  }
  finetune.validate();
  if (layers.empty()) throw config_error("attack: no layers to probe");
  for (int h : layers) {
    if (h < 1) throw config_error("attack: layer indices are 1-based");
  }
  if (rounds.empty()) throw config_error("attack: no rounds to attack");
  for (int r : rounds) {
    if (r < 1) throw config_error("attack: round indices are 1-based");
  }
}

ParamSet make_enrollment_model(const ParamSet& g, const Matrix& frames,
                               const std::vector<int>& labels,
                               const TrainConfig& cfg) {
  return train_local(g, frames, labels, cfg);
}

Footprint footprint(const ParamSet& g, const ParamSet& m,
                    const IndicatorSet& indicator, int layer) {
  if (!g.same_dims(m)) {
    throw shape_error("footprint: models disagree on layer dimensions");
  }
  check_probe_layers(g, {layer});
  const std::size_t total = indicator_frame_count(indicator);
  if (indicator.utterances.empty() || total == 0) {
    throw data_error("footprint: empty indicator set");
  }
  auto traces = trace_indicator(g, indicator);
  return footprints_from_traces(traces, m, indicator, {layer}, total).front();
}

double similarity(const Footprint& a, const Footprint& b) {
  if (a.layer != b.layer || a.mu.size() != b.mu.size()) {
    throw shape_error("similarity: footprints disagree on layer or width");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.mu.size(); ++i) {
    dot += a.mu[i] * b.mu[i];
    na += a.mu[i] * a.mu[i];
    nb += b.mu[i] * b.mu[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < 1e-12 || nb < 1e-12) {
    throw undefined_similarity("similarity: footprint norm below 1e-12");
  }
  return dot / (na * nb);
}

std::vector<TrialRecord> run_attack(const std::vector<RoundModels>& models,
                                    const CorpusSplit& corpus,
                                    const AttackConfig& cfg,
                                    const ExecPolicy& policy) {
  cfg.validate();
  policy.validate();
  const std::size_t total_frames = indicator_frame_count(corpus.indicator);
  if (corpus.indicator.utterances.empty() || total_frames == 0) {
    throw data_error("attack: corpus has no indicator data");
  }
  if (cfg.enrollment_speakers > corpus.params.num_clients) {
    throw config_error("attack: more enrollment speakers than clients");
  }
  if (cfg.enrollment_frames > corpus.params.enroll_pool) {
    throw config_error("attack: enrollment_frames exceeds the enroll pool");
  }

  std::map<int, const RoundModels*> by_round;
  for (const auto& rm : models) by_round[rm.round] = &rm;

  std::vector<int> rounds = cfg.rounds;
  std::sort(rounds.begin(), rounds.end());
  rounds.erase(std::unique(rounds.begin(), rounds.end()), rounds.end());
  for (int r : rounds) {
    if (!by_round.count(r)) {
      throw protocol_error("attack: no stored models for round " + std::to_string(r));
    }
  }

  std::vector<int> layers = cfg.layers;
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());

  std::vector<TrialRecord> trials;
  for (int r : rounds) {
    const RoundModels& rm = *by_round.at(r);
    if (rm.client_models.empty()) {
      throw protocol_error("attack: round " + std::to_string(r) +
                           " has no client models");
    }
    check_probe_layers(rm.broadcast, layers);

    // Test models in ascending speaker order.
    std::vector<const ClientUpdate*> tests;
    for (const auto& u : rm.client_models) tests.push_back(&u);
    std::sort(tests.begin(), tests.end(),
              [](const ClientUpdate* a, const ClientUpdate* b) {
                return a->client_id < b->client_id;
              });

    // Enrollment set: participants first (these supply the target trials),
    // then a seeded draw from the remaining clients.
    std::vector<int> enroll_ids;
    for (const auto* t : tests) {
      if (int(enroll_ids.size()) < cfg.enrollment_speakers) {
        enroll_ids.push_back(t->client_id);
      }
    }
    if (int(enroll_ids.size()) < cfg.enrollment_speakers) {
      std::vector<int> pool;
      for (const auto& c : corpus.clients) {
        if (!std::binary_search(enroll_ids.begin(), enroll_ids.end(), c.speaker_id)) {
          pool.push_back(c.speaker_id);
        }
      }
      std::sort(pool.begin(), pool.end());
      const int need = cfg.enrollment_speakers - int(enroll_ids.size());
      Rng rng(derive_seed(cfg.finetune.seed, "attack/enroll-set", std::uint64_t(r)));
      for (int pick : sample_clients(int(pool.size()), need, rng)) {
        enroll_ids.push_back(pool[std::size_t(pick)]);
      }
      std::sort(enroll_ids.begin(), enroll_ids.end());
    }

    const auto g_traces = trace_indicator(rm.broadcast, corpus.indicator);

    std::vector<std::vector<Footprint>> enroll_fp(enroll_ids.size());
    run_indexed(enroll_ids.size(), policy, [&](std::size_t i) {
      const int speaker = enroll_ids[i];
      const SpeakerDataset& sp = client_by_id(corpus, speaker);
      if (sp.enroll_frames.rows < std::size_t(cfg.enrollment_frames)) {
        throw config_error("attack: enroll pool of speaker " +
                           std::to_string(speaker) + " is too small");
      }
      const Matrix frames = head_rows(sp.enroll_frames, std::size_t(cfg.enrollment_frames));
      const std::vector<int> labels(sp.enroll_labels.begin(),
                                    sp.enroll_labels.begin() + cfg.enrollment_frames);
      TrainConfig tc = cfg.finetune;
      tc.seed = derive_seed(cfg.finetune.seed, "attack/enroll", std::uint64_t(r),
                            std::uint64_t(speaker));
      const ParamSet me = make_enrollment_model(rm.broadcast, frames, labels, tc);
      enroll_fp[i] = footprints_from_traces(g_traces, me, corpus.indicator, layers,
                                            total_frames);
    });

    std::vector<std::vector<Footprint>> test_fp(tests.size());
    run_indexed(tests.size(), policy, [&](std::size_t i) {
      test_fp[i] = footprints_from_traces(g_traces, tests[i]->model, corpus.indicator,
                                          layers, total_frames);
    });

    for (std::size_t li = 0; li < layers.size(); ++li) {
      for (std::size_t e = 0; e < enroll_ids.size(); ++e) {
        for (std::size_t t = 0; t < tests.size(); ++t) {
          TrialRecord trial;
          trial.round = r;
          trial.layer = layers[li];
          trial.enroll_id = enroll_ids[e];
          trial.test_id = tests[t]->client_id;
          trial.is_target = (trial.enroll_id == trial.test_id);
          try {
            const double s = similarity(enroll_fp[e][li], test_fp[t][li]);
            trial.score = std::clamp(s, -1.0, 1.0);
          } catch (const undefined_similarity&) {
            trial.score = 0.0;  // no identity evidence either way
          }
          trials.push_back(trial);
        }
      }
    }
  }
  return trials;
}

void write_trials_csv(const std::filesystem::path& path,
                      const std::vector<TrialRecord>& trials) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path.string());
  out << "round,layer,enroll_id,test_id,score,is_target\n";
  for (const auto& t : trials) {
    out << t.round << ',' << t.layer << ',' << t.enroll_id << ',' << t.test_id
        << ',' << g9(t.score) << ',' << (t.is_target ? 1 : 0) << '\n';
  }
  if (!out) throw io_error("failed writing: " + path.string());
}

}  // namespace fedprint
