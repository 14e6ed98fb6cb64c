#include "fedprint/driver.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fedprint/attack.hpp"
#include "fedprint/dataset.hpp"
#include "fedprint/errors.hpp"
#include "fedprint/exec.hpp"
#include "fedprint/federation.hpp"
#include "fedprint/format.hpp"
#include "fedprint/metrics.hpp"
#include "fedprint/params.hpp"

namespace fs = std::filesystem;

namespace fedprint {
namespace {

ExecPolicy policy_for(const DriverOptions& opt) {
  ExecPolicy p{opt.threads};
  p.validate();
  return p;
}

fs::path out_dir_for(const DriverOptions& opt) {
  if (!opt.out_override.empty()) return opt.out_override;
  if (!opt.config_path.empty()) return parse_config(opt.config_path).out;
  return ExperimentConfig{}.out;
}

CorpusSplit load_matching_corpus(const ExperimentConfig& cfg) {
  const fs::path path = fs::path(cfg.out) / "corpus.bin";
  CorpusSplit corpus = load_corpus(path);
  if (corpus.params != cfg.corpus || corpus.seed != cfg.corpus_seed()) {
    throw protocol_error(path.string() +
                         " was generated from a different configuration; rerun the generate step");
  }
  return corpus;
}

// Dev/test speakers keep all their frames in the train portion; pooling them
// gives the group-level evaluation set.
void pool_frames(const std::vector<SpeakerDataset>& speakers, Matrix& frames,
                 std::vector<int>& labels) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  for (const auto& s : speakers) {
    rows += s.train_frames.rows;
    cols = s.train_frames.cols;
  }
  frames = Matrix{rows, cols};
  labels.clear();
  labels.reserve(rows);
  std::size_t at = 0;
  for (const auto& s : speakers) {
    std::copy(s.train_frames.data.begin(), s.train_frames.data.end(),
              frames.data.begin() + long(at * cols));
    labels.insert(labels.end(), s.train_labels.begin(), s.train_labels.end());
    at += s.train_frames.rows;
  }
}

std::string round_file(int round) { return "round_" + std::to_string(round); }

// strict "<prefix><digits><suffix>" matcher for artifact file names
bool numbered_file(const std::string& name, const std::string& prefix,
                   const std::string& suffix, int& number) {
  if (name.size() <= prefix.size() + suffix.size()) return false;
  if (name.compare(0, prefix.size(), prefix) != 0) return false;
  if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) return false;
  const std::string digits =
      name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
  if (digits.empty() || digits.size() > 9 ||
      digits.find_first_not_of("0123456789") != std::string::npos) {
    return false;
  }
  number = std::atoi(digits.c_str());
  return true;
}

double parse_csv_double(const std::string& field, const std::string& where) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw data_error(where + ": malformed number \"" + field + "\"");
  }
  return v;
}

long long parse_csv_int(const std::string& field, const std::string& where) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0') {
    throw data_error(where + ": malformed integer \"" + field + "\"");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(line);
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

struct RoundsRow {
  int round = 0;
  std::vector<int> participants;
  std::size_t n_total = 0;
  double test_error = 0.0;  // percent, as written
  double dev_error = 0.0;
};

std::vector<RoundsRow> read_rounds_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  const std::string where = path.filename().string();

  std::string line;
  if (!std::getline(in, line)) throw data_error(where + ": empty file");
  const std::vector<std::string> header = split(line, ',');
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw data_error(where + ": missing column " + name);
    return std::size_t(it - header.begin());
  };
  const std::size_t c_round = column("round");
  const std::size_t c_ids = column("participant_ids");
  const std::size_t c_total = column("n_total");
  const std::size_t c_test = column("test_error");
  const std::size_t c_dev = column("dev_error");

  std::vector<RoundsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != header.size()) throw data_error(where + ": ragged row \"" + line + "\"");
    RoundsRow row;
    row.round = int(parse_csv_int(f[c_round], where));
    for (const std::string& id : split(f[c_ids], ';')) {
      row.participants.push_back(int(parse_csv_int(id, where)));
    }
    row.n_total = std::size_t(parse_csv_int(f[c_total], where));
    row.test_error = parse_csv_double(f[c_test], where);
    row.dev_error = parse_csv_double(f[c_dev], where);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<EerRecord> read_eer_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  const std::string where = path.filename().string();

  std::string line;
  bool saw_header = false;
  std::vector<EerRecord> records;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "round,layer,eer,num_target,num_nontarget") {
        throw data_error(where + ": unexpected header \"" + line + "\"");
      }
      saw_header = true;
      continue;
    }
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 5) throw data_error(where + ": ragged row \"" + line + "\"");
    EerRecord r;
    r.round = int(parse_csv_int(f[0], where));
    r.layer = int(parse_csv_int(f[1], where));
    r.eer = parse_csv_double(f[2], where);
    r.num_target = std::size_t(parse_csv_int(f[3], where));
    r.num_nontarget = std::size_t(parse_csv_int(f[4], where));
    records.push_back(r);
  }
  if (!saw_header) throw data_error(where + ": missing header");
  return records;
}

std::vector<RoundLog> history_from_rows(const std::vector<RoundsRow>& rows,
                                        const CorpusSplit& corpus) {
  std::vector<RoundLog> history;
  for (const auto& row : rows) {
    RoundLog log;
    log.round = row.round;
    log.participant_ids = row.participants;
    for (int id : row.participants) {
      if (id < 0 || std::size_t(id) >= corpus.clients.size()) {
        throw data_error("rounds.csv names client " + std::to_string(id) +
                         " which is not in the corpus");
      }
      log.client_sizes.push_back(corpus.clients[std::size_t(id)].train_frames.rows);
    }
    history.push_back(std::move(log));
  }
  return history;
}

std::vector<std::pair<int, ParamSet>> load_snapshots(const fs::path& dir) {
  std::vector<std::pair<int, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    int round = 0;
    if (numbered_file(entry.path().filename().string(), "round_", ".bin", round)) {
      found.emplace_back(round, entry.path());
    }
  }
  std::sort(found.begin(), found.end());
  if (found.empty()) throw io_error("no snapshots under " + dir.string());
  std::vector<std::pair<int, ParamSet>> snapshots;
  snapshots.reserve(found.size());
  for (const auto& [round, path] : found) {
    snapshots.emplace_back(round, load_checkpoint(path));
  }
  return snapshots;
}

std::vector<EerRecord> eer_from_trials(const std::vector<TrialRecord>& trials) {
  std::map<std::pair<int, int>, ScoreSet> groups;
  for (const auto& t : trials) {
    ScoreSet& s = groups[{t.round, t.layer}];
    (t.is_target ? s.target : s.nontarget).push_back(t.score);
  }
  std::vector<EerRecord> records;
  records.reserve(groups.size());
  for (const auto& [key, scores] : groups) {
    EerRecord r;
    r.round = key.first;
    r.layer = key.second;
    r.eer = compute_eer(scores);
    r.num_target = scores.target.size();
    r.num_nontarget = scores.nontarget.size();
    records.push_back(r);
  }
  return records;
}

}  // namespace

ExperimentConfig resolve_config(const DriverOptions& opt, bool from_out_dir) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty()) {
    cfg = parse_config(opt.config_path);
  } else if (from_out_dir) {
    const fs::path out =
        opt.out_override.empty() ? fs::path(cfg.out) : fs::path(opt.out_override);
    cfg = parse_config(out / "experiment.ini");
  }
  if (!opt.out_override.empty()) cfg.out = opt.out_override;
  if (opt.seed_override) cfg.seed = *opt.seed_override;
  cfg.validate();
  return cfg;
}

void cmd_generate(const DriverOptions& opt, std::ostream& log) {
  policy_for(opt);  // reject malformed --threads early, like every command
  const ExperimentConfig cfg = resolve_config(opt, false);
  const fs::path out = cfg.out;

  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw io_error("cannot create " + out.string() + ": " + ec.message());

  const CorpusSplit corpus = generate_corpus(cfg.corpus, cfg.corpus_seed());
  write_config(cfg, out / "experiment.ini");
  save_corpus(corpus, out / "corpus.bin");
  write_manifest(corpus, out / "manifest.json");

  log << "generate: " << corpus.clients.size() << " clients, " << corpus.dev.size()
      << " dev + " << corpus.test.size() << " test speakers, "
      << corpus.indicator.utterances.size() << " indicator utterances" << std::endl;
  log << "generate: wrote " << (out / "corpus.bin").string()
      << ", manifest.json, experiment.ini" << std::endl;
}

void cmd_train(const DriverOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = resolve_config(opt, true);
  const ExecPolicy policy = policy_for(opt);
  const fs::path out = cfg.out;
  const CorpusSplit corpus = load_matching_corpus(cfg);

  const fs::path rounds_csv = out / "rounds.csv";
  const fs::path snap_dir = out / "snapshots";
  const fs::path attack_dir = out / "attack_rounds";
  if (!opt.force &&
      (fs::exists(rounds_csv) || fs::exists(snap_dir) || fs::exists(attack_dir))) {
    throw io_error("training artifacts already present in " + out.string() +
                   "; pass --force to redo the run");
  }
  // a shorter rerun must not leave snapshots of rounds it never executed
  fs::remove(rounds_csv);
  fs::remove_all(snap_dir);
  fs::remove_all(attack_dir);
  fs::create_directories(snap_dir);

  Matrix test_frames, dev_frames;
  std::vector<int> test_labels, dev_labels;
  pool_frames(corpus.test, test_frames, test_labels);
  pool_frames(corpus.dev, dev_frames, dev_labels);

  const FederationConfig fed = cfg.federation_config();
  FederationState state = init_federation(cfg.layer_dims(), fed);
  const std::set<int> attacked(cfg.attack_rounds.begin(), cfg.attack_rounds.end());

  const std::vector<NamedMetric> metrics{
      {"test_error",
       [&](const ParamSet& g) { return 100.0 * error_rate(g, test_frames, test_labels); }},
      {"dev_error",
       [&](const ParamSet& g) { return 100.0 * error_rate(g, dev_frames, dev_labels); }},
  };
  const RoundHook hook = [&](FederationState& st, RoundLog& lg, const ParamSet& broadcast,
                             const std::vector<ClientUpdate>& updates) {
    save_checkpoint(st.global, snap_dir / (round_file(lg.round) + ".bin"));
    if (attacked.count(lg.round)) {
      const fs::path dir = attack_dir / round_file(lg.round);
      fs::create_directories(dir);
      save_checkpoint(broadcast, dir / "global.bin");
      for (const auto& u : updates) {
        save_checkpoint(u.model, dir / ("client_" + std::to_string(u.client_id) + ".bin"));
      }
    }
    log << "train: round " << lg.round << "/" << fed.num_rounds << "  test "
        << g9(lg.metrics.at("test_error")) << "%  dev " << g9(lg.metrics.at("dev_error"))
        << "%" << std::endl;
  };

  run_federation(state, corpus.clients, fed, policy, metrics, hook);
  write_rounds_csv(rounds_csv, state.history, {"test_error", "dev_error"});

  const std::vector<int> covered = participants_union(state.history);
  log << "train: " << covered.size() << "/" << corpus.clients.size()
      << " clients participated; wrote " << rounds_csv.string() << " and "
      << state.history.size() << " snapshots" << std::endl;
}

void cmd_attack(const DriverOptions& opt, std::ostream& log) {
  const ExperimentConfig cfg = resolve_config(opt, true);
  const ExecPolicy policy = policy_for(opt);
  const fs::path out = cfg.out;
  const CorpusSplit corpus = load_matching_corpus(cfg);

  const fs::path trials_csv = out / "trials.csv";
  const fs::path eer_csv = out / "eer.csv";
  const fs::path eer_avg_csv = out / "eer_avg.csv";
  if (!opt.force && (fs::exists(trials_csv) || fs::exists(eer_csv))) {
    throw io_error("attack artifacts already present in " + out.string() +
                   "; pass --force to redo the attack");
  }

  std::vector<int> rounds = cfg.attack_rounds;
  std::sort(rounds.begin(), rounds.end());
  rounds.erase(std::unique(rounds.begin(), rounds.end()), rounds.end());

  std::vector<RoundModels> models;
  for (int r : rounds) {
    const fs::path dir = out / "attack_rounds" / round_file(r);
    if (!fs::exists(dir / "global.bin")) {
      throw protocol_error("no stored models for round " + std::to_string(r) + " under " +
                           (out / "attack_rounds").string() + "; rerun the train step");
    }
    RoundModels rm;
    rm.round = r;
    rm.broadcast = load_checkpoint(dir / "global.bin");

    std::vector<std::pair<int, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      int id = 0;
      if (numbered_file(entry.path().filename().string(), "client_", ".bin", id)) {
        files.emplace_back(id, entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw protocol_error("round " + std::to_string(r) + " has no stored client models");
    }
    for (const auto& [id, path] : files) {
      ClientUpdate u;
      u.client_id = id;
      u.model = load_checkpoint(path);
      if (id < 0 || std::size_t(id) >= corpus.clients.size()) {
        throw protocol_error("stored client model " + path.string() +
                             " names a speaker outside the corpus");
      }
      u.num_frames = corpus.clients[std::size_t(id)].train_frames.rows;
      rm.client_models.push_back(std::move(u));
    }
    models.push_back(std::move(rm));
  }

  const AttackConfig atk = cfg.attack_config();
  const std::vector<TrialRecord> trials = run_attack(models, corpus, atk, policy);
  write_trials_csv(trials_csv, trials);

  const std::vector<EerRecord> records = eer_from_trials(trials);
  write_eer_csv(eer_csv, records);
  write_eer_avg_csv(eer_avg_csv, records);

  for (const auto& r : records) {
    log << "attack: round " << r.round << " layer " << r.layer << "  eer " << g9(r.eer)
        << "  (" << r.num_target << " target / " << r.num_nontarget << " nontarget)"
        << std::endl;
  }
  log << "attack: " << trials.size() << " trials; wrote trials.csv, eer.csv, eer_avg.csv"
      << std::endl;
}

void cmd_report(const DriverOptions& opt, std::ostream& log) {
  // check artifacts before touching the config so an empty directory lists
  // everything that is missing at once
  const fs::path out = out_dir_for(opt);
  std::vector<std::string> missing;
  for (const char* name : {"experiment.ini", "corpus.bin", "rounds.csv", "eer.csv"}) {
    if (!fs::exists(out / name)) missing.push_back(name);
  }
  if (!fs::exists(out / "snapshots")) missing.push_back("snapshots/");
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (i > 0) list += ", ";
      list += missing[i];
    }
    throw io_error("missing artifacts in " + out.string() + ": " + list);
  }

  const ExperimentConfig cfg = resolve_config(opt, true);
  const ExecPolicy policy = policy_for(opt);
  const CorpusSplit corpus = load_matching_corpus(cfg);

  const std::vector<RoundsRow> rounds = read_rounds_csv(out / "rounds.csv");
  if (rounds.empty()) throw data_error("rounds.csv has no data rows");
  const std::vector<EerRecord> eers = read_eer_csv(out / "eer.csv");
  if (eers.empty()) throw data_error("eer.csv has no data rows");
  const std::vector<RoundLog> history = history_from_rows(rounds, corpus);

  std::size_t best = 0;
  for (std::size_t i = 1; i < rounds.size(); ++i) {
    if (rounds[i].test_error < rounds[best].test_error) best = i;
  }

  const auto snapshots = load_snapshots(out / "snapshots");
  const ParamSet* g_best = nullptr;
  for (const auto& [round, params] : snapshots) {
    if (round == rounds[best].round) g_best = &params;
  }
  if (!g_best) {
    throw protocol_error("no snapshot stored for best round " +
                         std::to_string(rounds[best].round));
  }

  // the tracked panel: the first speakers large enough to have an analysis
  // holdout
  std::vector<int> panel;
  for (const auto& c : corpus.clients) {
    if (c.analysis_frames.rows > 0 && panel.size() < 5) panel.push_back(c.speaker_id);
  }
  if (panel.empty()) throw data_error("no client has an analysis holdout to track");
  const auto series = longitudinal_eval(snapshots, panel, corpus, history);
  write_longitudinal_csv(out / "longitudinal.csv", series);

  TrainConfig personal = cfg.federation_config().train;
  personal.seed = cfg.seed;  // per-speaker seeds are derived inside
  const auto rows = local_vs_global(*g_best, corpus, history, personal, policy);
  write_local_vs_global_csv(out / "local_vs_global.csv", rows);

  std::size_t local_wins = 0;
  double mean_local_test = 0.0;
  for (const auto& row : rows) {
    if (row.local_error_on_analysis < row.global_error_on_analysis) ++local_wins;
    mean_local_test += row.local_error_on_test;
  }
  if (!rows.empty()) mean_local_test /= double(rows.size());

  std::map<int, std::pair<double, int>> by_round;  // round -> (eer sum, count)
  std::map<int, std::pair<double, int>> by_layer;
  for (const auto& r : eers) {
    by_round[r.round].first += r.eer;
    by_round[r.round].second += 1;
    by_layer[r.layer].first += r.eer;
    by_layer[r.layer].second += 1;
  }
  std::vector<double> trend_rounds, trend_eers;
  for (const auto& [round, acc] : by_round) {
    trend_rounds.push_back(double(round));
    trend_eers.push_back(acc.first / double(acc.second));
  }
  const double trend = spearman(trend_rounds, trend_eers);

  const std::vector<int> covered = participants_union(history);

  std::ostringstream s;
  s << "experiment: seed " << cfg.seed << ", " << corpus.clients.size() << " clients, "
    << rounds.size() << " rounds, output " << out.string() << "\n";
  s << "utility: best round " << rounds[best].round << " with test error "
    << g9(rounds[best].test_error) << "% (round " << rounds.front().round << ": "
    << g9(rounds.front().test_error) << "%, round " << rounds.back().round << ": "
    << g9(rounds.back().test_error) << "%)\n";
  s << "participation: " << covered.size() << "/" << corpus.clients.size() << " clients ("
    << g9(100.0 * double(covered.size()) / double(corpus.clients.size()))
    << "%) trained in at least one round\n";
  s << "attack: eer averaged over rounds, per layer:";
  for (const auto& [layer, acc] : by_layer) {
    s << "  " << layer << ": " << g9(acc.first / double(acc.second));
  }
  s << "\n";
  s << "attack: spearman(round, layer-averaged eer) = " << g9(trend)
    << (trend >= 0.0 ? "  (eer does not fall as training proceeds)"
                     : "  (eer falls as training proceeds)")
    << "\n";
  s << "personalization: local model beats the round-" << rounds[best].round
    << " global on its own analysis frames for " << local_wins << "/" << rows.size()
    << " tracked speakers\n";
  s << "personalization: mean local test error " << g9(100.0 * mean_local_test)
    << "% vs global " << g9(rounds[best].test_error) << "%\n";
  s << "report: wrote longitudinal.csv, local_vs_global.csv, summary.txt\n";

  std::ofstream summary(out / "summary.txt");
  if (!summary) throw io_error("cannot open " + (out / "summary.txt").string());
  summary << s.str();
  if (!summary.flush()) throw io_error("failed writing " + (out / "summary.txt").string());

  log << s.str() << std::flush;
}

}  // namespace fedprint
