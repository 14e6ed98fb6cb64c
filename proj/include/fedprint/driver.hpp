#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "fedprint/config.hpp"

namespace fedprint {

// Command-line choices shared by all subcommands. config_path empty means:
// built-in defaults for generate, the experiment file stored in the output
// directory for everything else.
struct DriverOptions {
  std::string config_path;
  std::string out_override;
  std::optional<std::uint64_t> seed_override;
  int threads = 1;  // 0 = all cores, 1 = serial reference
  bool force = false;
};

// Applies --out and --seed on top of the parsed (or default) config and
// validates the result. from_out_dir selects where a missing --config falls
// back to.
ExperimentConfig resolve_config(const DriverOptions& opt, bool from_out_dir);

// generate: corpus + manifest + the experiment file itself. Overwrites
// freely; regenerating with the same seed is byte-identical.
void cmd_generate(const DriverOptions& opt, std::ostream& log);

// train: the federated run. Writes rounds.csv, a global snapshot per round,
// and the exchanged models (broadcast global + client uploads) for every
// round on the attack list. Refuses to overwrite earlier training artifacts
// unless force is set.
void cmd_train(const DriverOptions& opt, std::ostream& log);

// attack: verification trials against the stored exchanged models. Writes
// trials.csv, eer.csv, eer_avg.csv.
void cmd_attack(const DriverOptions& opt, std::ostream& log);

// report: best round, participation coverage, per-layer EER trend, and the
// personalization comparison. Writes longitudinal.csv, local_vs_global.csv
// and summary.txt; the summary text also goes to the stream.
void cmd_report(const DriverOptions& opt, std::ostream& log);

}  // namespace fedprint
