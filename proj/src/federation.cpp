#include "fedprint/federation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "fedprint/errors.hpp"
#include "fedprint/format.hpp"

namespace fedprint {

void FederationConfig::validate() const {
  if (num_rounds < 1) throw config_error("federation: num_rounds must be >= 1");
  if (clients_per_round < 1) {
    throw config_error("federation: clients_per_round must be >= 1");
  }
  train.validate();
}

std::size_t RoundLog::n_total() const {
  return std::accumulate(client_sizes.begin(), client_sizes.end(), std::size_t{0});
}

ParamSet fedavg(const std::vector<ClientUpdate>& updates) {
  if (updates.empty()) throw data_error("fedavg: no updates to aggregate");

  const ParamSet& first = updates.front().model;
  std::size_t total = 0;
  for (const auto& u : updates) {
    if (!u.model.same_dims(first)) {
      throw shape_error("fedavg: client models disagree on layer dimensions");
    }
    total += u.num_frames;
  }
  if (total == 0) throw data_error("fedavg: total frame count is zero");

  ParamSet out;
  out.layers.resize(first.layers.size());
  for (std::size_t l = 0; l < first.layers.size(); ++l) {
    out.layers[l].weight = Matrix(first.layers[l].weight.rows, first.layers[l].weight.cols);
    out.layers[l].bias.assign(first.layers[l].bias.size(), 0.0);
  }

  // Accumulate in input order so the sum is reproducible bit for bit.
  for (const auto& u : updates) {
    const double w = double(u.num_frames) / double(total);
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
      const auto& src = u.model.layers[l];
      auto& dst = out.layers[l];
      for (std::size_t j = 0; j < dst.weight.data.size(); ++j) {
        dst.weight.data[j] += w * src.weight.data[j];
      }
      for (std::size_t j = 0; j < dst.bias.size(); ++j) {
        dst.bias[j] += w * src.bias[j];
      }
    }
  }
  return out;
}

std::vector<int> sample_clients(int num_clients, int m, Rng& rng) {
  if (num_clients < 1) throw config_error("sample_clients: no clients");
  if (m < 1 || m > num_clients) {
    throw config_error("sample_clients: need 1 <= m <= num_clients");
  }
  std::vector<int> pool(num_clients);
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates: after m swaps the prefix holds the sample.
  for (int i = 0; i < m; ++i) {
    const int j = i + int(rng.below(std::uint64_t(num_clients - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(std::size_t(m));
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::uint64_t client_train_seed(std::uint64_t seed, int round, int client_id) {
  return derive_seed(seed, "federation/client", std::uint64_t(round),
                     std::uint64_t(client_id));
}

FederationState init_federation(const std::vector<std::size_t>& layer_dims,
                                const FederationConfig& cfg) {
  cfg.validate();
  FederationState state;
  state.global = init_params(layer_dims, derive_seed(cfg.seed, "federation/init"));
  return state;
}

RoundLog run_round(FederationState& state, const std::vector<SpeakerDataset>& clients,
                   const FederationConfig& cfg, const ExecPolicy& policy,
                   const RoundHook& hook) {
  cfg.validate();
  policy.validate();
  if (clients.empty()) throw data_error("run_round: no clients");
  if (cfg.clients_per_round > int(clients.size())) {
    throw config_error("run_round: clients_per_round exceeds the client count");
  }

  const int round = state.next_round;
  Rng sampler(derive_seed(cfg.seed, "federation/sampling", std::uint64_t(round)));
  const auto picks = sample_clients(int(clients.size()), cfg.clients_per_round, sampler);

  const ParamSet broadcast = state.global;
  std::vector<ClientUpdate> updates(picks.size());
  run_indexed(picks.size(), policy, [&](std::size_t slot) {
    const SpeakerDataset& c = clients[std::size_t(picks[slot])];
    TrainConfig tc = cfg.train;
    tc.seed = client_train_seed(cfg.seed, round, c.speaker_id);
    ClientUpdate u;
    u.client_id = c.speaker_id;
    u.model = train_local(broadcast, c, tc);
    u.num_frames = c.train_frames.rows;
    updates[slot] = std::move(u);
  });

  ParamSet aggregated = fedavg(updates);

  RoundLog log;
  log.round = round;
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].client_id < updates[b].client_id;
  });
  for (std::size_t i : order) {
    log.participant_ids.push_back(updates[i].client_id);
    log.client_sizes.push_back(updates[i].num_frames);
  }

  state.global = std::move(aggregated);
  state.next_round = round + 1;
  state.history.push_back(std::move(log));
  if (hook) hook(state, state.history.back(), broadcast, updates);
  return state.history.back();
}

void run_federation(FederationState& state, const std::vector<SpeakerDataset>& clients,
                    const FederationConfig& cfg, const ExecPolicy& policy,
                    const std::vector<NamedMetric>& metrics, const RoundHook& hook) {
  while (state.next_round <= cfg.num_rounds) {
    run_round(state, clients, cfg, policy,
              [&](FederationState& st, RoundLog& log, const ParamSet& broadcast,
                  const std::vector<ClientUpdate>& updates) {
                for (const auto& m : metrics) log.metrics[m.name] = m.fn(st.global);
                if (hook) hook(st, log, broadcast, updates);
              });
  }
}

std::vector<int> participants_union(const std::vector<RoundLog>& history) {
  std::vector<int> out;
  for (const auto& log : history) {
    out.insert(out.end(), log.participant_ids.begin(), log.participant_ids.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void write_rounds_csv(const std::filesystem::path& path,
                      const std::vector<RoundLog>& history,
                      const std::vector<std::string>& metric_names) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path.string());

  out << "round,participant_ids,n_total";
  for (const auto& name : metric_names) out << ',' << name;
  out << '\n';

  for (const auto& log : history) {
    out << log.round << ',' << join_ids(log.participant_ids) << ',' << log.n_total();
    for (const auto& name : metric_names) {
      auto it = log.metrics.find(name);
      if (it == log.metrics.end()) {
        throw data_error("rounds csv: round " + std::to_string(log.round) +
                         " is missing metric \"" + name + "\"");
      }
      out << ',' << g9(it->second);
    }
    out << '\n';
  }
  if (!out) throw io_error("failed writing: " + path.string());
}

}  // namespace fedprint
