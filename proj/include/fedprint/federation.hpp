#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fedprint/dataset.hpp"
#include "fedprint/exec.hpp"
#include "fedprint/network.hpp"
#include "fedprint/params.hpp"
#include "fedprint/rng.hpp"

namespace fedprint {

struct FederationConfig {
  int num_rounds = 30;
  int clients_per_round = 10;
  TrainConfig train;
  std::uint64_t seed = 0;

  void validate() const;
};

// One client's upload: its fine-tuned model plus how many frames trained it.
struct ClientUpdate {
  int client_id = -1;
  ParamSet model;
  std::size_t num_frames = 0;
};

struct RoundLog {
  int round = 0;
  std::vector<int> participant_ids;        // ascending speaker ids
  std::vector<std::size_t> client_sizes;   // aligned with participant_ids
  std::map<std::string, double> metrics;   // e.g. test_error, dev_error

  std::size_t n_total() const;
};

struct FederationState {
  ParamSet global;
  int next_round = 1;
  std::vector<RoundLog> history;
};

// Weighted model average: sum_k (n_k / n) * p_k, accumulated in input order
// so results are reproducible bit for bit.
ParamSet fedavg(const std::vector<ClientUpdate>& updates);

// m distinct indices from [0, num_clients), returned ascending.
std::vector<int> sample_clients(int num_clients, int m, Rng& rng);

// Seed for one client's local training in one round. Deriving from
// (seed, round, id) rather than from a shared stream keeps training
// independent of thread scheduling and participant order.
std::uint64_t client_train_seed(std::uint64_t seed, int round, int client_id);

FederationState init_federation(const std::vector<std::size_t>& layer_dims,
                                const FederationConfig& cfg);

// Called after a round is archived; the log reference points into
// state.history and may be extended with metrics.
using RoundHook = std::function<void(FederationState&, RoundLog&,
                                     const ParamSet& broadcast,
                                     const std::vector<ClientUpdate>&)>;

// One protocol round: sample -> broadcast -> local training -> aggregate.
// state is untouched if sampling, training, or aggregation throws.
RoundLog run_round(FederationState& state, const std::vector<SpeakerDataset>& clients,
                   const FederationConfig& cfg, const ExecPolicy& policy,
                   const RoundHook& hook = {});

struct NamedMetric {
  std::string name;
  std::function<double(const ParamSet&)> fn;  // evaluated on the new global
};

// Rounds state.next_round .. cfg.num_rounds inclusive.
void run_federation(FederationState& state, const std::vector<SpeakerDataset>& clients,
                    const FederationConfig& cfg, const ExecPolicy& policy,
                    const std::vector<NamedMetric>& metrics = {},
                    const RoundHook& hook = {});

std::vector<int> participants_union(const std::vector<RoundLog>& history);

// CSV: round,participant_ids,n_total,<metric columns>. Participant ids are
// ';'-joined; numbers use '.' decimals with 9 significant digits.
void write_rounds_csv(const std::filesystem::path& path,
                      const std::vector<RoundLog>& history,
                      const std::vector<std::string>& metric_names);

}  // namespace fedprint
