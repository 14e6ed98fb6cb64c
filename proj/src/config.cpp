#include "fedprint/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fedprint/errors.hpp"
#include "fedprint/rng.hpp"

namespace fedprint {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(int lineno, const std::string& what) {
  throw config_error("config line " + std::to_string(lineno) + ": " + what);
}

long long parse_int(const std::string& v, int lineno) {
  const char* begin = v.c_str();
  char* end = nullptr;
  errno = 0;
  const long long n = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    bad_value(lineno, "expected an integer, got \"" + v + "\"");
  }
  return n;
}

std::uint64_t parse_u64(const std::string& v, int lineno) {
  if (v.empty() || v[0] == '-') bad_value(lineno, "expected a nonnegative integer");
  const char* begin = v.c_str();
  char* end = nullptr;
  errno = 0;
  const unsigned long long n = std::strtoull(begin, &end, 0);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    bad_value(lineno, "expected a nonnegative integer, got \"" + v + "\"");
  }
  return n;
}

double parse_double(const std::string& v, int lineno) {
  const char* begin = v.c_str();
  char* end = nullptr;
  const double d = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    bad_value(lineno, "expected a number, got \"" + v + "\"");
  }
  return d;
}

std::vector<int> parse_int_list(const std::string& v, int lineno) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) bad_value(lineno, "empty list element");
    out.push_back(int(parse_int(item, lineno)));
  }
  if (out.empty()) bad_value(lineno, "expected a ';'-separated list");
  return out;
}

// Shortest decimal form that parses back to the identical double.
std::string dump_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string dump_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ';';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  corpus.validate();
  if (hidden.empty()) throw config_error("model: need at least one hidden layer");
  for (int w : hidden) {
    if (w < 1) throw config_error("model: hidden widths must be >= 1");
  }
  federation_config().validate();
  const AttackConfig atk = attack_config();
  atk.validate();
  if (clients_per_round > corpus.num_clients) {
    throw config_error("federation: clients_per_round exceeds num_clients");
  }
  for (int r : attack_rounds) {
    if (r > num_rounds) {
      throw config_error("attack: round " + std::to_string(r) +
                         " is past num_rounds = " + std::to_string(num_rounds));
    }
  }
  for (int h : attack_layers) {
    if (h > int(hidden.size())) {
      throw config_error("attack: layer " + std::to_string(h) + " is past the " +
                         std::to_string(hidden.size()) + " hidden layers");
    }
  }
  if (enrollment_speakers > corpus.num_clients) {
    throw config_error("attack: enrollment_speakers exceeds num_clients");
  }
  if (enrollment_frames > corpus.enroll_pool) {
    throw config_error("attack: enrollment_frames exceeds the enroll pool");
  }
}

std::vector<std::size_t> ExperimentConfig::layer_dims() const {
  std::vector<std::size_t> dims;
  dims.push_back(std::size_t(corpus.feature_dim));
  for (int w : hidden) dims.push_back(std::size_t(w));
  dims.push_back(std::size_t(corpus.num_classes));
  return dims;
}

std::uint64_t ExperimentConfig::corpus_seed() const {
  return derive_seed(seed, "experiment/corpus");
}

FederationConfig ExperimentConfig::federation_config() const {
  FederationConfig fed;
  fed.num_rounds = num_rounds;
  fed.clients_per_round = clients_per_round;
  fed.train.epochs = epochs;
  fed.train.batch_size = batch_size;
  fed.train.learning_rate = learning_rate;
  fed.train.seed = 0;  // per-client seeds are derived inside run_round
  fed.seed = derive_seed(seed, "experiment/federation");
  return fed;
}

AttackConfig ExperimentConfig::attack_config() const {
  AttackConfig atk;
  atk.enrollment_speakers = enrollment_speakers;
  atk.enrollment_frames = enrollment_frames;
  atk.finetune.epochs = epochs;  // attacker mirrors client training
  atk.finetune.batch_size = batch_size;
  atk.finetune.learning_rate = learning_rate;
  atk.finetune.seed = derive_seed(seed, "experiment/attack");
  atk.layers = attack_layers;
  atk.rounds = attack_rounds;
  return atk;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int lineno = 0;

  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') bad_value(lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "experiment" && section != "corpus" && section != "model" &&
          section != "train" && section != "federation" && section != "attack") {
        bad_value(lineno, "unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) bad_value(lineno, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) bad_value(lineno, "empty key");
    if (section.empty()) bad_value(lineno, "key \"" + key + "\" outside any section");

    auto as_int = [&] { return int(parse_int(value, lineno)); };
    bool known = true;

    if (section == "experiment") {
      if (key == "seed") cfg.seed = parse_u64(value, lineno);
      else if (key == "out") cfg.out = value;
      else known = false;
    } else if (section == "corpus") {
      if (key == "num_clients") cfg.corpus.num_clients = as_int();
      else if (key == "feature_dim") cfg.corpus.feature_dim = as_int();
      else if (key == "num_classes") cfg.corpus.num_classes = as_int();
      else if (key == "speaker_strength") cfg.corpus.speaker_strength = parse_double(value, lineno);
      else if (key == "noise_sigma") cfg.corpus.noise_sigma = parse_double(value, lineno);
      else if (key == "frames_min") cfg.corpus.frames_min = as_int();
      else if (key == "frames_max") cfg.corpus.frames_max = as_int();
      else if (key == "analysis_threshold") cfg.corpus.analysis_threshold = as_int();
      else if (key == "analysis_size") cfg.corpus.analysis_size = as_int();
      else if (key == "dev_speakers") cfg.corpus.dev_speakers = as_int();
      else if (key == "test_speakers") cfg.corpus.test_speakers = as_int();
      else if (key == "indicator_utterances") cfg.corpus.indicator_utterances = as_int();
      else if (key == "indicator_frames") cfg.corpus.indicator_frames = as_int();
      else if (key == "enroll_pool") cfg.corpus.enroll_pool = as_int();
      else known = false;
    } else if (section == "model") {
      if (key == "hidden") cfg.hidden = parse_int_list(value, lineno);
      else known = false;
    } else if (section == "train") {
      if (key == "epochs") cfg.epochs = as_int();
      else if (key == "batch_size") cfg.batch_size = as_int();
      else if (key == "learning_rate") cfg.learning_rate = parse_double(value, lineno);
      else known = false;
    } else if (section == "federation") {
      if (key == "num_rounds") cfg.num_rounds = as_int();
      else if (key == "clients_per_round") cfg.clients_per_round = as_int();
      else known = false;
    } else if (section == "attack") {
      if (key == "enrollment_speakers") cfg.enrollment_speakers = as_int();
      else if (key == "enrollment_frames") cfg.enrollment_frames = as_int();
      else if (key == "layers") cfg.attack_layers = parse_int_list(value, lineno);
      else if (key == "rounds") cfg.attack_rounds = parse_int_list(value, lineno);
      else known = false;
    }

    if (!known) {
      bad_value(lineno, "unknown key \"" + key + "\" in section [" + section + "]");
    }
  }
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[experiment]\n";
  out << "seed = " << cfg.seed << '\n';
  out << "out = " << cfg.out << '\n';
  out << '\n';
  out << "[corpus]\n";
  out << "num_clients = " << cfg.corpus.num_clients << '\n';
  out << "feature_dim = " << cfg.corpus.feature_dim << '\n';
  out << "num_classes = " << cfg.corpus.num_classes << '\n';
  out << "speaker_strength = " << dump_double(cfg.corpus.speaker_strength) << '\n';
  out << "noise_sigma = " << dump_double(cfg.corpus.noise_sigma) << '\n';
  out << "frames_min = " << cfg.corpus.frames_min << '\n';
  out << "frames_max = " << cfg.corpus.frames_max << '\n';
  out << "analysis_threshold = " << cfg.corpus.analysis_threshold << '\n';
  out << "analysis_size = " << cfg.corpus.analysis_size << '\n';
  out << "dev_speakers = " << cfg.corpus.dev_speakers << '\n';
  out << "test_speakers = " << cfg.corpus.test_speakers << '\n';
  out << "indicator_utterances = " << cfg.corpus.indicator_utterances << '\n';
  out << "indicator_frames = " << cfg.corpus.indicator_frames << '\n';
  out << "enroll_pool = " << cfg.corpus.enroll_pool << '\n';
  out << '\n';
  out << "[model]\n";
  out << "hidden = " << dump_list(cfg.hidden) << '\n';
  out << '\n';
  out << "[train]\n";
  out << "epochs = " << cfg.epochs << '\n';
  out << "batch_size = " << cfg.batch_size << '\n';
  out << "learning_rate = " << dump_double(cfg.learning_rate) << '\n';
  out << '\n';
  out << "[federation]\n";
  out << "num_rounds = " << cfg.num_rounds << '\n';
  out << "clients_per_round = " << cfg.clients_per_round << '\n';
  out << '\n';
  out << "[attack]\n";
  out << "enrollment_speakers = " << cfg.enrollment_speakers << '\n';
  out << "enrollment_frames = " << cfg.enrollment_frames << '\n';
  out << "layers = " << dump_list(cfg.attack_layers) << '\n';
  out << "rounds = " << dump_list(cfg.attack_rounds) << '\n';
  return out.str();
}

void write_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open config for writing: " + path.string());
  out << serialize_config(cfg);
  if (!out) throw io_error("failed writing config: " + path.string());
}

}  // namespace fedprint
