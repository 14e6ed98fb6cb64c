#include "fedprint/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <string>

#include "fedprint/errors.hpp"
#include "fedprint/format.hpp"
#include "fedprint/rng.hpp"

namespace fedprint {

namespace {

constexpr char kEerConvention[] =
    "# eer convention: P_miss(t) = fraction of target scores < t; "
    "P_fa(t) = fraction of nontarget scores >= t; thresholds sweep distinct "
    "scores, their midpoints, and one sentinel beyond each end; linear "
    "interpolation at the lowest-threshold crossing";

void check_finite_scores(const std::vector<double>& scores) {
  for (double v : scores) {
    if (!std::isfinite(v)) throw data_error("compute_eer: non-finite score");
  }
}

const SpeakerDataset& tracked_client(const CorpusSplit& corpus, int speaker,
                                     const char* who) {
  for (const auto& c : corpus.clients) {
    if (c.speaker_id == speaker) {
      if (c.analysis_frames.rows == 0) {
        throw data_error(std::string(who) + ": speaker " + std::to_string(speaker) +
                         " has no analysis data");
      }
      return c;
    }
  }
  throw data_error(std::string(who) + ": speaker " + std::to_string(speaker) +
                   " has no analysis data");
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path.string());
  return out;
}

void finish_csv(std::ofstream& out, const std::filesystem::path& path) {
  if (!out) throw io_error("failed writing: " + path.string());
}

}  // namespace

double compute_eer(const ScoreSet& scores) {
  if (scores.target.empty() || scores.nontarget.empty()) {
    throw data_error("compute_eer: need nonempty target and nontarget scores");
  }
  check_finite_scores(scores.target);
  check_finite_scores(scores.nontarget);

  std::vector<double> tgt = scores.target;
  std::vector<double> non = scores.nontarget;
  std::sort(tgt.begin(), tgt.end());
  std::sort(non.begin(), non.end());

  std::vector<double> pool = tgt;
  pool.insert(pool.end(), non.begin(), non.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  std::vector<double> sweep;
  sweep.reserve(2 * pool.size() + 2);
  sweep.push_back(pool.front() - 1.0);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    sweep.push_back(pool[i]);
    if (i + 1 < pool.size()) sweep.push_back(0.5 * (pool[i] + pool[i + 1]));
  }
  sweep.push_back(pool.back() + 1.0);

  // Sorted inputs make each rate one binary search instead of a recount.
  auto p_miss = [&](double t) {
    const auto below = std::lower_bound(tgt.begin(), tgt.end(), t) - tgt.begin();
    return double(below) / double(tgt.size());
  };
  auto p_fa = [&](double t) {
    const auto below = std::lower_bound(non.begin(), non.end(), t) - non.begin();
    return double(non.size() - std::size_t(below)) / double(non.size());
  };

  // P_fa - P_miss starts at +1 below all scores and ends at -1 above them,
  // so a sign change is guaranteed; take the first (lowest threshold).
  for (std::size_t i = 0; i + 1 < sweep.size(); ++i) {
    const double d1 = p_fa(sweep[i]) - p_miss(sweep[i]);
    const double d2 = p_fa(sweep[i + 1]) - p_miss(sweep[i + 1]);
    if (d1 > 0.0 && d2 <= 0.0) {
      const double alpha = d1 / (d1 - d2);
      return p_miss(sweep[i]) + alpha * (p_miss(sweep[i + 1]) - p_miss(sweep[i]));
    }
  }
  throw data_error("compute_eer: no rate crossing found");
}

double error_rate(const ParamSet& model, const Matrix& frames,
                  const std::vector<int>& labels) {
  if (frames.rows == 0) throw data_error("error_rate: empty data");
  if (labels.size() != frames.rows) {
    throw data_error("error_rate: label count does not match frame count");
  }

  const Matrix logits = forward_logits(model, frames);
  std::size_t wrong = 0;
  for (std::size_t f = 0; f < logits.rows; ++f) {
    const double* row = logits.row(f);
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols; ++c) {
      if (row[c] > row[best]) best = c;
    }
    wrong += (int(best) != labels[f]);
  }
  return double(wrong) / double(frames.rows);
}

std::vector<LongitudinalSeries> longitudinal_eval(
    const std::vector<std::pair<int, ParamSet>>& snapshots,
    const std::vector<int>& speaker_ids, const CorpusSplit& corpus,
    const std::vector<RoundLog>& history) {
  for (std::size_t i = 1; i < snapshots.size(); ++i) {
    if (snapshots[i].first <= snapshots[i - 1].first) {
      throw data_error("longitudinal: snapshot rounds must be strictly increasing");
    }
  }

  std::map<int, const std::vector<int>*> by_round;
  for (const auto& log : history) by_round[log.round] = &log.participant_ids;

  auto sampled_between = [&](int speaker, int after, int upto) {
    auto it = by_round.upper_bound(after);
    for (; it != by_round.end() && it->first <= upto; ++it) {
      if (std::binary_search(it->second->begin(), it->second->end(), speaker)) {
        return true;
      }
    }
    return false;
  };

  std::vector<LongitudinalSeries> out;
  out.reserve(speaker_ids.size());
  for (int speaker : speaker_ids) {
    const SpeakerDataset& sp = tracked_client(corpus, speaker, "longitudinal");
    LongitudinalSeries series;
    series.speaker_id = speaker;
    int prev = 0;
    for (const auto& [round, model] : snapshots) {
      LongitudinalPoint pt;
      pt.round = round;
      pt.error = error_rate(model, sp.analysis_frames, sp.analysis_labels);
      pt.participated = sampled_between(speaker, prev, round);
      series.points.push_back(pt);
      prev = round;
    }
    out.push_back(std::move(series));
  }
  return out;
}

std::vector<LocalVsGlobalRow> local_vs_global(const ParamSet& g_best,
                                              const CorpusSplit& corpus,
                                              const std::vector<RoundLog>& history,
                                              const TrainConfig& cfg,
                                              const ExecPolicy& policy) {
  cfg.validate();

  // Tracked speakers: every participant that owns an analysis slice.
  std::vector<int> speakers;
  for (int id : participants_union(history)) {
    for (const auto& c : corpus.clients) {
      if (c.speaker_id == id && c.analysis_frames.rows > 0) {
        speakers.push_back(id);
        break;
      }
    }
  }
  if (speakers.empty()) {
    throw data_error("local_vs_global: no participant has analysis data");
  }

  // Pooled test-speaker data, the held-out generalization probe.
  std::size_t test_rows = 0;
  for (const auto& t : corpus.test) test_rows += t.train_frames.rows;
  if (test_rows == 0) throw data_error("local_vs_global: test split is empty");
  Matrix test_frames(test_rows, std::size_t(corpus.params.feature_dim));
  std::vector<int> test_labels;
  test_labels.reserve(test_rows);
  std::size_t at = 0;
  for (const auto& t : corpus.test) {
    std::copy(t.train_frames.data.begin(), t.train_frames.data.end(),
              test_frames.data.begin() + long(at * test_frames.cols));
    test_labels.insert(test_labels.end(), t.train_labels.begin(), t.train_labels.end());
    at += t.train_frames.rows;
  }

  std::vector<LocalVsGlobalRow> rows(speakers.size());
  run_indexed(speakers.size(), policy, [&](std::size_t i) {
    const int speaker = speakers[i];
    const SpeakerDataset& sp = tracked_client(corpus, speaker, "local_vs_global");
    TrainConfig tc = cfg;
    tc.seed = derive_seed(cfg.seed, "personalization", std::uint64_t(speaker));
    const ParamSet local = train_local(g_best, sp, tc);
    LocalVsGlobalRow row;
    row.speaker = speaker;
    row.global_error_on_analysis =
        error_rate(g_best, sp.analysis_frames, sp.analysis_labels);
    row.local_error_on_analysis =
        error_rate(local, sp.analysis_frames, sp.analysis_labels);
    row.local_error_on_test = error_rate(local, test_frames, test_labels);
    rows[i] = row;
  });
  return rows;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw data_error("spearman: length mismatch");
  if (x.size() < 2) throw data_error("spearman: need at least two points");

  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * (double(i) + double(j)) + 1.0;  // 1-based average rank
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };

  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / double(rx.size());
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / double(ry.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

void write_eer_csv(const std::filesystem::path& path, std::vector<EerRecord> records) {
  std::sort(records.begin(), records.end(), [](const EerRecord& a, const EerRecord& b) {
    return a.round != b.round ? a.round < b.round : a.layer < b.layer;
  });
  auto out = open_csv(path);
  out << kEerConvention << '\n';
  out << "round,layer,eer,num_target,num_nontarget\n";
  for (const auto& r : records) {
    out << r.round << ',' << r.layer << ',' << g9(r.eer) << ',' << r.num_target
        << ',' << r.num_nontarget << '\n';
  }
  finish_csv(out, path);
}

void write_eer_avg_csv(const std::filesystem::path& path,
                       const std::vector<EerRecord>& records) {
  std::map<int, std::pair<double, std::size_t>> by_layer;
  for (const auto& r : records) {
    by_layer[r.layer].first += r.eer;
    by_layer[r.layer].second += 1;
  }
  auto out = open_csv(path);
  out << kEerConvention << '\n';
  out << "layer,eer\n";
  for (const auto& [layer, acc] : by_layer) {
    out << layer << ',' << g9(acc.first / double(acc.second)) << '\n';
  }
  finish_csv(out, path);
}

void write_longitudinal_csv(const std::filesystem::path& path,
                            const std::vector<LongitudinalSeries>& series) {
  auto out = open_csv(path);
  out << "# error is frame classification error in percent\n";
  out << "speaker,round,error,participated\n";
  for (const auto& s : series) {
    for (const auto& pt : s.points) {
      out << s.speaker_id << ',' << pt.round << ',' << g9(100.0 * pt.error) << ','
          << (pt.participated ? 1 : 0) << '\n';
    }
  }
  finish_csv(out, path);
}

void write_local_vs_global_csv(const std::filesystem::path& path,
                               const std::vector<LocalVsGlobalRow>& rows) {
  auto out = open_csv(path);
  out << "# error columns are frame classification error in percent\n";
  out << "speaker,global_error_on_analysis,local_error_on_analysis,"
         "local_error_on_test\n";
  for (const auto& r : rows) {
    out << r.speaker << ',' << g9(100.0 * r.global_error_on_analysis) << ','
        << g9(100.0 * r.local_error_on_analysis) << ','
        << g9(100.0 * r.local_error_on_test) << '\n';
  }
  finish_csv(out, path);
}

}  // namespace fedprint
