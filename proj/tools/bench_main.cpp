#include <chrono>
#include <cstdint>
#include <iostream>
#include <vector>

#include "CLI11.hpp"
#include "fedprint/attack.hpp"
#include "fedprint/dataset.hpp"
#include "fedprint/exec.hpp"
#include "fedprint/federation.hpp"

using namespace fedprint;

namespace {

template <typename Fn>
double best_seconds(int repeat, Fn&& fn) {
  double best = 1e300;
  for (int i = 0; i < repeat; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    if (dt.count() < best) best = dt.count();
  }
  return best;
}

void print_row(const char* name, double serial, double parallel, bool identical) {
  std::cout << name << ": serial " << serial << " s, parallel " << parallel
            << " s, speedup " << (parallel > 0 ? serial / parallel : 0.0)
            << "x, identical output: " << (identical ? "yes" : "NO") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"times the two hot paths (round training, attack scoring) with the serial\n"
               "reference and with the parallel schedule, checking the outputs match bit "
               "for bit"};
  int clients = 24;
  int clients_per_round = 12;
  int epochs = 10;
  int threads = 0;  // all cores
  int repeat = 3;
  app.add_option("--clients", clients, "corpus size");
  app.add_option("--per-round", clients_per_round, "clients trained per round");
  app.add_option("--epochs", epochs, "local epochs");
  app.add_option("--threads", threads, "parallel thread count (0 = all cores)");
  app.add_option("--repeat", repeat, "timing repetitions (best of)");
  CLI11_PARSE(app, argc, argv);

  CorpusParams params;
  params.num_clients = clients;
  params.frames_min = 200;
  params.frames_max = 400;
  params.enroll_pool = 60;
  const CorpusSplit corpus = generate_corpus(params, 42);

  FederationConfig fed;
  fed.num_rounds = 1;
  fed.clients_per_round = clients_per_round;
  fed.train.epochs = epochs;
  fed.seed = 7;
  const std::vector<std::size_t> dims{std::size_t(params.feature_dim), 64, 64, 64,
                                      std::size_t(params.num_classes)};

  const ExecPolicy serial{1};
  const ExecPolicy parallel{threads};
  std::cout << "corpus: " << clients << " clients, round of " << clients_per_round
            << ", " << epochs << " epochs; parallel side uses "
            << parallel.resolved_threads() << " thread(s)\n";

  // one protocol round, repeated from the same initial state
  FederationState ref_state;
  RoundModels observed;
  const auto capture = [&](FederationState&, RoundLog& lg, const ParamSet& broadcast,
                           const std::vector<ClientUpdate>& updates) {
    observed.round = lg.round;
    observed.broadcast = broadcast;
    observed.client_models = updates;
  };
  const double t_round_serial = best_seconds(repeat, [&] {
    ref_state = init_federation(dims, fed);
    run_round(ref_state, corpus.clients, fed, serial, capture);
  });
  FederationState par_state;
  const double t_round_parallel = best_seconds(repeat, [&] {
    par_state = init_federation(dims, fed);
    run_round(par_state, corpus.clients, fed, parallel);
  });
  print_row("round", t_round_serial, t_round_parallel,
            ref_state.global == par_state.global);

  // the attack over that round's exchanged models
  AttackConfig atk;
  atk.enrollment_speakers = std::min(20, clients);
  atk.enrollment_frames = 50;
  atk.finetune = fed.train;
  atk.finetune.seed = 11;
  atk.layers = {1, 2, 3};
  atk.rounds = {observed.round};
  const std::vector<RoundModels> models{observed};
  std::vector<TrialRecord> trials_serial, trials_parallel;
  const double t_atk_serial = best_seconds(
      repeat, [&] { trials_serial = run_attack(models, corpus, atk, serial); });
  const double t_atk_parallel = best_seconds(
      repeat, [&] { trials_parallel = run_attack(models, corpus, atk, parallel); });
  bool same = trials_serial.size() == trials_parallel.size();
  for (std::size_t i = 0; same && i < trials_serial.size(); ++i) {
    same = trials_serial[i].score == trials_parallel[i].score &&
           trials_serial[i].enroll_id == trials_parallel[i].enroll_id &&
           trials_serial[i].test_id == trials_parallel[i].test_id;
  }
  print_row("attack", t_atk_serial, t_atk_parallel, same);

  return 0;
}
