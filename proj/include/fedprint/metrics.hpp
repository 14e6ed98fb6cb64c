#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "fedprint/dataset.hpp"
#include "fedprint/exec.hpp"
#include "fedprint/federation.hpp"
#include "fedprint/matrix.hpp"
#include "fedprint/network.hpp"
#include "fedprint/params.hpp"

namespace fedprint {

struct ScoreSet {
  std::vector<double> target;
  std::vector<double> nontarget;
};

// Equal error rate of a detection score set. Convention (also written into
// the csv headers): P_miss(t) = fraction of target scores < t, P_fa(t) =
// fraction of nontarget scores >= t; thresholds sweep all distinct scores,
// the midpoints between them, and one sentinel beyond each end; the result
// is linearly interpolated at the lowest-threshold crossing of the two
// rates. Both score lists must be nonempty and finite.
double compute_eer(const ScoreSet& scores);

// Fraction of frames whose argmax logit differs from the label; logit ties
// resolve toward the lowest class index. Returns a value in [0, 1].
double error_rate(const ParamSet& model, const Matrix& frames,
                  const std::vector<int>& labels);

struct LongitudinalPoint {
  int round = 0;
  double error = 0.0;  // fraction in [0, 1]
  bool participated = false;  // sampled in any round since the previous point
};

struct LongitudinalSeries {
  int speaker_id = -1;
  std::vector<LongitudinalPoint> points;  // rounds strictly increasing
};

// Per-speaker error of each supplied global snapshot on that speaker's
// analysis set. snapshots are (round, model) pairs with strictly increasing
// rounds; participation flags are recomputed from the round history.
std::vector<LongitudinalSeries> longitudinal_eval(
    const std::vector<std::pair<int, ParamSet>>& snapshots,
    const std::vector<int>& speaker_ids, const CorpusSplit& corpus,
    const std::vector<RoundLog>& history);

struct LocalVsGlobalRow {
  int speaker = -1;
  double global_error_on_analysis = 0.0;
  double local_error_on_analysis = 0.0;
  double local_error_on_test = 0.0;
};

// For every speaker that ever participated: fine-tune g_best on the
// speaker's train data, then compare the global and personalized models on
// the speaker's analysis set and score the personalized model on the pooled
// test speakers. All errors are fractions.
std::vector<LocalVsGlobalRow> local_vs_global(const ParamSet& g_best,
                                              const CorpusSplit& corpus,
                                              const std::vector<RoundLog>& history,
                                              const TrainConfig& cfg,
                                              const ExecPolicy& policy = {});

// Spearman rank correlation with average ranks for ties; returns 0 when
// either input has no rank variance.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct EerRecord {
  int round = 0;
  int layer = 0;
  double eer = 0.0;
  std::size_t num_target = 0;
  std::size_t num_nontarget = 0;
};

// eer.csv: round,layer,eer,num_target,num_nontarget, sorted by (round,
// layer), preceded by a '#' comment line stating the threshold convention.
void write_eer_csv(const std::filesystem::path& path, std::vector<EerRecord> records);

// eer_avg.csv: layer,eer where eer is the mean over all rounds of a layer.
void write_eer_avg_csv(const std::filesystem::path& path,
                       const std::vector<EerRecord>& records);

// longitudinal.csv: speaker,round,error,participated. Error is written as a
// percentage; participated as 0/1.
void write_longitudinal_csv(const std::filesystem::path& path,
                            const std::vector<LongitudinalSeries>& series);

// local_vs_global.csv: speaker,global_error_on_analysis,
// local_error_on_analysis,local_error_on_test, all percentages.
void write_local_vs_global_csv(const std::filesystem::path& path,
                               const std::vector<LocalVsGlobalRow>& rows);

}  // namespace fedprint
