#include "fedprint/dataset.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "fedprint/errors.hpp"
#include "fedprint/rng.hpp"
#include "json.hpp"

namespace fedprint {

namespace {

constexpr char kMagic[] = "FPCORP1\n";

static_assert(std::endian::native == std::endian::little,
              "corpus writer assumes a little-endian host");

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s, const std::filesystem::path& path) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw io_error("bad number in corpus header: " + path.string());
  return v;
}

void write_matrix(std::ofstream& out, const Matrix& m) {
  out << m.rows << ' ' << m.cols << '\n';
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

void write_labels(std::ofstream& out, const std::vector<int>& labels) {
  out << labels.size() << '\n';
  for (int l : labels) {
    auto v = static_cast<std::int32_t>(l);
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
}

Matrix read_matrix(std::ifstream& in, const std::filesystem::path& path) {
  std::size_t rows = 0, cols = 0;
  if (!(in >> rows >> cols)) throw io_error("bad matrix header: " + path.string());
  in.get();
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!in) throw io_error("truncated corpus file: " + path.string());
  return m;
}

std::vector<int> read_labels(std::ifstream& in, const std::filesystem::path& path) {
  std::size_t count = 0;
  if (!(in >> count)) throw io_error("bad label header: " + path.string());
  in.get();
  std::vector<int> labels(count);
  for (auto& l : labels) {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    l = v;
  }
  if (!in && count > 0) throw io_error("truncated corpus file: " + path.string());
  return labels;
}

void write_speaker(std::ofstream& out, const SpeakerDataset& s) {
  out << s.speaker_id << '\n';
  write_matrix(out, s.train_frames);
  write_labels(out, s.train_labels);
  write_matrix(out, s.analysis_frames);
  write_labels(out, s.analysis_labels);
  write_matrix(out, s.enroll_frames);
  write_labels(out, s.enroll_labels);
}

SpeakerDataset read_speaker(std::ifstream& in, const std::filesystem::path& path) {
  SpeakerDataset s;
  if (!(in >> s.speaker_id)) throw io_error("bad speaker block: " + path.string());
  in.get();
  s.train_frames = read_matrix(in, path);
  s.train_labels = read_labels(in, path);
  s.analysis_frames = read_matrix(in, path);
  s.analysis_labels = read_labels(in, path);
  s.enroll_frames = read_matrix(in, path);
  s.enroll_labels = read_labels(in, path);
  return s;
}

// One synthetic frame: class prototype plus scaled voice vector plus noise.
void fill_frame(double* frame, const std::vector<std::vector<double>>& prototypes,
                const std::vector<double>& voice, int label,
                const CorpusParams& p, Rng& rng) {
  const auto& proto = prototypes[label];
  for (int d = 0; d < p.feature_dim; ++d) {
    frame[d] = proto[d] + p.speaker_strength * voice[d] + p.noise_sigma * rng.normal();
  }
}

}  // namespace

void CorpusParams::validate() const {
  if (num_clients < 1) throw config_error("corpus: num_clients must be >= 1");
  if (feature_dim < 1) throw config_error("corpus: feature_dim must be >= 1");
  if (num_classes < 2) throw config_error("corpus: num_classes must be >= 2");
  if (speaker_strength < 0.0) throw config_error("corpus: speaker_strength must be >= 0");
  if (!(noise_sigma > 0.0)) throw config_error("corpus: noise_sigma must be > 0");
  if (frames_min < 1 || frames_max < frames_min) {
    throw config_error("corpus: need 1 <= frames_min <= frames_max");
  }
  if (analysis_size < 1 || analysis_size >= analysis_threshold) {
    throw config_error("corpus: need 1 <= analysis_size < analysis_threshold");
  }
  if (dev_speakers < 1 || test_speakers < 1) {
    throw config_error("corpus: need at least one dev and one test speaker");
  }
  if (indicator_utterances < 1 || indicator_frames < 1) {
    throw config_error("corpus: indicator set must be nonempty");
  }
  if (enroll_pool < 1) throw config_error("corpus: enroll_pool must be >= 1");
}

AnalysisSplit split_analysis(const Matrix& frames, const std::vector<int>& labels,
                             int threshold, int analysis_size) {
  if (analysis_size >= threshold) {
    throw config_error("split_analysis: analysis_size must be < threshold");
  }
  if (labels.size() != frames.rows) {
    throw data_error("split_analysis: label count != frame count");
  }

  AnalysisSplit out;
  const std::size_t n = frames.rows;
  if (n <= std::size_t(threshold)) {
    out.train_frames = frames;
    out.train_labels = labels;
    return out;
  }

  const std::size_t train_n = n - std::size_t(analysis_size);
  out.train_frames = Matrix(train_n, frames.cols);
  out.analysis_frames = Matrix(std::size_t(analysis_size), frames.cols);
  std::copy(frames.data.begin(), frames.data.begin() + train_n * frames.cols,
            out.train_frames.data.begin());
  std::copy(frames.data.begin() + train_n * frames.cols, frames.data.end(),
            out.analysis_frames.data.begin());
  out.train_labels.assign(labels.begin(), labels.begin() + train_n);
  out.analysis_labels.assign(labels.begin() + train_n, labels.end());
  return out;
}

CorpusSplit generate_corpus(const CorpusParams& p, std::uint64_t seed) {
  p.validate();

  CorpusSplit corpus;
  corpus.params = p;
  corpus.seed = seed;

  Rng proto_rng(derive_seed(seed, "corpus/prototypes"));
  std::vector<std::vector<double>> prototypes(p.num_classes);
  for (auto& proto : prototypes) {
    proto.resize(p.feature_dim);
    for (double& v : proto) v = proto_rng.normal();
  }

  // Every speaker (clients, dev, test) draws from its own seeded stream, so
  // the corpus layout does not depend on generation order.
  auto make_speaker = [&](int speaker_id, bool is_client) {
    Rng rng(derive_seed(seed, "corpus/speaker", std::uint64_t(speaker_id)));
    std::vector<double> voice(p.feature_dim);
    for (double& v : voice) v = rng.normal();

    const int count =
        p.frames_min + int(rng.below(std::uint64_t(p.frames_max - p.frames_min + 1)));
    Matrix frames(count, p.feature_dim);
    std::vector<int> labels(count);
    for (int f = 0; f < count; ++f) {
      // First frames carry fixed labels so every class is guaranteed to
      // appear somewhere in the corpus; the rest are uniform.
      int y;
      if (f == 0) {
        y = speaker_id % p.num_classes;
      } else if (speaker_id == 0 && f < p.num_classes) {
        y = f;
      } else {
        y = int(rng.below(std::uint64_t(p.num_classes)));
      }
      labels[f] = y;
      fill_frame(frames.row(f), prototypes, voice, y, p, rng);
    }

    SpeakerDataset s;
    s.speaker_id = speaker_id;
    if (is_client) {
      AnalysisSplit split =
          split_analysis(frames, labels, p.analysis_threshold, p.analysis_size);
      s.train_frames = std::move(split.train_frames);
      s.train_labels = std::move(split.train_labels);
      s.analysis_frames = std::move(split.analysis_frames);
      s.analysis_labels = std::move(split.analysis_labels);

      // Enrollment pool: extra same-speaker frames on a separate stream,
      // disjoint by construction from everything above.
      Rng enroll_rng(derive_seed(seed, "corpus/enroll", std::uint64_t(speaker_id)));
      s.enroll_frames = Matrix(p.enroll_pool, p.feature_dim);
      s.enroll_labels.resize(p.enroll_pool);
      for (int f = 0; f < p.enroll_pool; ++f) {
        const int y = int(enroll_rng.below(std::uint64_t(p.num_classes)));
        s.enroll_labels[f] = y;
        fill_frame(s.enroll_frames.row(f), prototypes, voice, y, p, enroll_rng);
      }
    } else {
      s.train_frames = std::move(frames);
      s.train_labels = std::move(labels);
    }
    return s;
  };

  int next_id = 0;
  corpus.clients.reserve(p.num_clients);
  for (int i = 0; i < p.num_clients; ++i) corpus.clients.push_back(make_speaker(next_id++, true));
  corpus.dev.reserve(p.dev_speakers);
  for (int i = 0; i < p.dev_speakers; ++i) corpus.dev.push_back(make_speaker(next_id++, false));
  corpus.test.reserve(p.test_speakers);
  for (int i = 0; i < p.test_speakers; ++i) corpus.test.push_back(make_speaker(next_id++, false));

  // Indicator utterances come from fresh speakers past every other id range.
  corpus.indicator.utterances.reserve(p.indicator_utterances);
  for (int u = 0; u < p.indicator_utterances; ++u) {
    const int speaker_id = next_id++;
    Rng rng(derive_seed(seed, "corpus/indicator", std::uint64_t(speaker_id)));
    std::vector<double> voice(p.feature_dim);
    for (double& v : voice) v = rng.normal();
    Matrix utt(p.indicator_frames, p.feature_dim);
    for (int f = 0; f < p.indicator_frames; ++f) {
      const int y = int(rng.below(std::uint64_t(p.num_classes)));
      fill_frame(utt.row(f), prototypes, voice, y, p, rng);
    }
    corpus.indicator.utterances.push_back(std::move(utt));
  }

  return corpus;
}

void save_corpus(const CorpusSplit& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open corpus for writing: " + path.string());
  const CorpusParams& p = corpus.params;
  out << kMagic;
  out << corpus.seed << '\n';
  out << p.num_clients << ' ' << p.feature_dim << ' ' << p.num_classes << ' '
      << p.frames_min << ' ' << p.frames_max << ' ' << p.analysis_threshold << ' '
      << p.analysis_size << ' ' << p.dev_speakers << ' ' << p.test_speakers << ' '
      << p.indicator_utterances << ' ' << p.indicator_frames << ' '
      << p.enroll_pool << '\n';
  out << hex_double(p.speaker_strength) << ' ' << hex_double(p.noise_sigma) << '\n';

  for (const auto& s : corpus.clients) write_speaker(out, s);
  for (const auto& s : corpus.dev) write_speaker(out, s);
  for (const auto& s : corpus.test) write_speaker(out, s);
  for (const auto& utt : corpus.indicator.utterances) write_matrix(out, utt);
  if (!out) throw io_error("failed writing corpus: " + path.string());
}

CorpusSplit load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open corpus: " + path.string());

  char magic[sizeof(kMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw io_error("not a corpus file: " + path.string());
  }

  CorpusSplit corpus;
  CorpusParams& p = corpus.params;
  std::string strength_str, sigma_str;
  if (!(in >> corpus.seed >> p.num_clients >> p.feature_dim >> p.num_classes >>
        p.frames_min >> p.frames_max >> p.analysis_threshold >> p.analysis_size >>
        p.dev_speakers >> p.test_speakers >> p.indicator_utterances >>
        p.indicator_frames >> p.enroll_pool >> strength_str >> sigma_str)) {
    throw io_error("bad corpus header: " + path.string());
  }
  p.speaker_strength = parse_hex_double(strength_str, path);
  p.noise_sigma = parse_hex_double(sigma_str, path);

  corpus.clients.reserve(p.num_clients);
  for (int i = 0; i < p.num_clients; ++i) corpus.clients.push_back(read_speaker(in, path));
  corpus.dev.reserve(p.dev_speakers);
  for (int i = 0; i < p.dev_speakers; ++i) corpus.dev.push_back(read_speaker(in, path));
  corpus.test.reserve(p.test_speakers);
  for (int i = 0; i < p.test_speakers; ++i) corpus.test.push_back(read_speaker(in, path));
  corpus.indicator.utterances.reserve(p.indicator_utterances);
  for (int u = 0; u < p.indicator_utterances; ++u) {
    corpus.indicator.utterances.push_back(read_matrix(in, path));
  }
  return corpus;
}

void write_manifest(const CorpusSplit& corpus, const std::filesystem::path& path) {
  nlohmann::json manifest;
  manifest["seed"] = corpus.seed;
  manifest["num_clients"] = corpus.params.num_clients;
  manifest["feature_dim"] = corpus.params.feature_dim;
  manifest["num_classes"] = corpus.params.num_classes;
  manifest["speaker_strength"] = corpus.params.speaker_strength;
  manifest["noise_sigma"] = corpus.params.noise_sigma;

  auto speaker_entry = [](const SpeakerDataset& s, const char* split) {
    nlohmann::json e;
    e["id"] = s.speaker_id;
    e["split"] = split;
    e["train_frames"] = s.train_frames.rows;
    e["analysis_frames"] = s.analysis_frames.rows;
    e["enroll_frames"] = s.enroll_frames.rows;
    return e;
  };

  auto& speakers = manifest["speakers"] = nlohmann::json::array();
  for (const auto& s : corpus.clients) speakers.push_back(speaker_entry(s, "client"));
  for (const auto& s : corpus.dev) speakers.push_back(speaker_entry(s, "dev"));
  for (const auto& s : corpus.test) speakers.push_back(speaker_entry(s, "test"));

  manifest["indicator"] = {
      {"utterances", corpus.indicator.utterances.size()},
      {"frames_per_utterance", corpus.params.indicator_frames},
  };

  std::ofstream out(path);
  if (!out) throw io_error("cannot open manifest for writing: " + path.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw io_error("failed writing manifest: " + path.string());
}

}  // namespace fedprint
