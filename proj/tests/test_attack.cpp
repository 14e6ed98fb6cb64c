#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fedprint/attack.hpp"
#include "fedprint/errors.hpp"
#include "fedprint/metrics.hpp"
#include "fedprint/rng.hpp"

using namespace fedprint;

namespace {

ParamSet zero_net(const std::vector<std::size_t>& dims) {
  ParamSet p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerParams layer;
    layer.weight = Matrix(dims[l + 1], dims[l]);
    layer.bias.assign(dims[l + 1], 0.0);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

IndicatorSet one_frame_indicator(std::vector<double> frame) {
  IndicatorSet ind;
  Matrix utt(1, frame.size());
  utt.data = std::move(frame);
  ind.utterances.push_back(std::move(utt));
  return ind;
}

IndicatorSet random_indicator(int utterances, int frames, int dim, Rng& rng) {
  IndicatorSet ind;
  for (int u = 0; u < utterances; ++u) {
    Matrix m{std::size_t(frames), std::size_t(dim)};
    for (double& v : m.data) v = rng.normal();
    ind.utterances.push_back(std::move(m));
  }
  return ind;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

struct AttackFixture {
  CorpusSplit corpus;
  std::vector<RoundModels> models;
  FederationConfig fed;
  std::vector<std::size_t> dims{4, 5, 4, 3};
};

AttackFixture make_fixture(int clients, int per_round, int rounds) {
  AttackFixture fx;
  CorpusParams p;
  p.num_clients = clients;
  p.feature_dim = 4;
  p.num_classes = 3;
  p.speaker_strength = 0.5;
  p.noise_sigma = 1.0;
  p.frames_min = 30;
  p.frames_max = 60;
  p.analysis_threshold = 100;
  p.analysis_size = 20;
  p.dev_speakers = 1;
  p.test_speakers = 1;
  p.indicator_utterances = 2;
  p.indicator_frames = 4;
  p.enroll_pool = 12;
  fx.corpus = generate_corpus(p, 7);

  fx.fed.num_rounds = rounds;
  fx.fed.clients_per_round = per_round;
  fx.fed.train.epochs = 2;
  fx.fed.train.batch_size = 8;
  fx.fed.train.learning_rate = 0.05;
  fx.fed.seed = 99;

  FederationState state = init_federation(fx.dims, fx.fed);
  run_federation(state, fx.corpus.clients, fx.fed, ExecPolicy{1}, {},
                 [&](FederationState&, RoundLog& log, const ParamSet& broadcast,
                     const std::vector<ClientUpdate>& updates) {
                   fx.models.push_back({log.round, broadcast, updates});
                 });
  return fx;
}

AttackConfig fixture_attack_cfg() {
  AttackConfig cfg;
  cfg.enrollment_speakers = 4;
  cfg.enrollment_frames = 10;
  cfg.finetune.epochs = 2;
  cfg.finetune.batch_size = 8;
  cfg.finetune.learning_rate = 0.05;
  cfg.finetune.seed = 123;
  cfg.layers = {1, 2};
  cfg.rounds = {1, 2};
  return cfg;
}

}  // namespace

TEST_CASE("a model compared against itself leaves a exactly-zero footprint") {
  ParamSet g = init_params({4, 6, 5, 3}, 31);
  Rng rng(2);
  IndicatorSet ind = random_indicator(3, 5, 4, rng);
  for (int h : {1, 2}) {
    Footprint fp = footprint(g, g, ind, h);
    CHECK(fp.layer == h);
    for (double v : fp.mu) CHECK(v == 0.0);
  }
  CHECK(footprint(g, g, ind, 1).mu.size() == 6);
  CHECK(footprint(g, g, ind, 2).mu.size() == 5);
}

TEST_CASE("single-frame footprint is the raw activation difference") {
  ParamSet g = zero_net({1, 2, 2});
  ParamSet m = zero_net({1, 2, 2});
  g.layers[0].bias = {0.0, 0.5};
  m.layers[0].bias = {0.5, 0.0};
  Footprint fp = footprint(g, m, one_frame_indicator({3.0}), 1);
  REQUIRE(fp.mu.size() == 2);
  CHECK(fp.mu[0] == 0.5);
  CHECK(fp.mu[1] == -0.5);
}

TEST_CASE("footprint averages per frame, not per utterance") {
  ParamSet g = zero_net({2, 2, 2});
  ParamSet m = zero_net({2, 2, 2});
  m.layers[0].weight(0, 0) = 1.0;  // identity map into the hidden layer
  m.layers[0].weight(1, 1) = 1.0;

  IndicatorSet even;
  even.utterances.push_back(Matrix(1, 2));
  even.utterances[0].data = {1.0, 0.0};
  even.utterances.push_back(Matrix(1, 2));
  even.utterances[1].data = {0.0, 1.0};
  Footprint fp = footprint(g, m, even, 1);
  CHECK(fp.mu[0] == 0.5);
  CHECK(fp.mu[1] == 0.5);

  IndicatorSet skewed;
  skewed.utterances.push_back(Matrix(2, 2));
  skewed.utterances[0].data = {1.0, 0.0, 0.0, 1.0};
  skewed.utterances.push_back(Matrix(1, 2));
  skewed.utterances[1].data = {1.0, 0.0};
  Footprint fp2 = footprint(g, m, skewed, 1);
  CHECK(fp2.mu[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(fp2.mu[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("footprint validates layer index, shapes, and indicator data") {
  ParamSet g = init_params({4, 6, 3}, 1);
  Rng rng(3);
  IndicatorSet ind = random_indicator(2, 3, 4, rng);
  CHECK_THROWS_AS(footprint(g, g, ind, 0), config_error);
  CHECK_THROWS_AS(footprint(g, g, ind, 2), config_error);  // only 1 hidden layer

  ParamSet other = init_params({4, 5, 3}, 2);
  CHECK_THROWS_AS(footprint(g, other, ind, 1), shape_error);

  CHECK_THROWS_AS(footprint(g, g, IndicatorSet{}, 1), data_error);

  IndicatorSet bad = random_indicator(1, 2, 5, rng);
  CHECK_THROWS_AS(footprint(g, g, bad, 1), shape_error);
}

TEST_CASE("similarity reproduces hand-computed cosines") {
  Rng rng(12);
  Footprint a{1, {}};
  for (int i = 0; i < 8; ++i) a.mu.push_back(rng.normal());
  CHECK(similarity(a, a) == doctest::Approx(1.0).epsilon(1e-15));

  Footprint e1{1, {1.0, 0.0}};
  Footprint e2{1, {0.0, 1.0}};
  CHECK(similarity(e1, e2) == 0.0);

  Footprint diag{1, {1.0, 1.0}};
  CHECK(similarity(e1, diag) == doctest::Approx(0.70710678118654752).epsilon(1e-12));
}

TEST_CASE("similarity is scale invariant and symmetric") {
  Rng rng(13);
  Footprint a{2, {}}, b{2, {}};
  for (int i = 0; i < 10; ++i) {
    a.mu.push_back(rng.normal());
    b.mu.push_back(rng.normal());
  }
  const double base = similarity(a, b);
  for (double c : {3.7, 1e8, 1e-8}) {
    Footprint scaled = a;
    for (double& v : scaled.mu) v *= c;
    CHECK(std::abs(similarity(scaled, b) - base) <= 1e-12);
  }
  CHECK(similarity(a, b) == similarity(b, a));
}

TEST_CASE("similarity refuses mismatched or information-free footprints") {
  Footprint a{1, {1.0, 2.0}};
  Footprint other_layer{2, {1.0, 2.0}};
  Footprint other_dim{1, {1.0, 2.0, 3.0}};
  Footprint tiny{1, {1e-13, 0.0}};
  CHECK_THROWS_AS(similarity(a, other_layer), shape_error);
  CHECK_THROWS_AS(similarity(a, other_dim), shape_error);
  CHECK_THROWS_AS(similarity(a, tiny), undefined_similarity);
  CHECK_THROWS_AS(similarity(tiny, a), undefined_similarity);
}

TEST_CASE("enrollment models are deterministic and need data") {
  ParamSet g = init_params({3, 4, 2}, 5);
  Rng rng(6);
  Matrix frames(6, 3);
  for (double& v : frames.data) v = rng.normal();
  std::vector<int> labels(6);
  for (auto& l : labels) l = int(rng.below(2));
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 3;
  tc.learning_rate = 0.1;
  tc.seed = 44;

  ParamSet m1 = make_enrollment_model(g, frames, labels, tc);
  ParamSet m2 = make_enrollment_model(g, frames, labels, tc);
  CHECK(m1.layers[0].weight == m2.layers[0].weight);

  CHECK_THROWS_AS(make_enrollment_model(g, Matrix(0, 3), {}, tc), data_error);
}

TEST_CASE("a vanishing learning rate leaves a vanishing footprint") {
  ParamSet g = init_params({3, 4, 2}, 5);
  Rng rng(6);
  Matrix frames(6, 3);
  for (double& v : frames.data) v = rng.normal();
  std::vector<int> labels(6);
  for (auto& l : labels) l = int(rng.below(2));
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 3;
  tc.learning_rate = 1e-300;
  tc.seed = 44;

  ParamSet m = make_enrollment_model(g, frames, labels, tc);
  IndicatorSet ind = random_indicator(2, 4, 3, rng);
  CHECK(norm(footprint(g, m, ind, 1).mu) < 1e-9);
}

TEST_CASE("run_attack emits one ordered trial per enrollment-participant pair") {
  AttackFixture fx = make_fixture(6, 3, 2);
  AttackConfig cfg = fixture_attack_cfg();

  auto trials = run_attack(fx.models, fx.corpus, cfg);
  // 2 rounds x 2 layers x (4 enrollments x 3 participants)
  REQUIRE(trials.size() == 48);

  auto key = [](const TrialRecord& t) {
    return std::tuple(t.round, t.layer, t.enroll_id, t.test_id);
  };
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    if (i > 0) CHECK(key(trials[i - 1]) < key(t));
    CHECK(t.is_target == (t.enroll_id == t.test_id));
    CHECK(t.score >= -1.0);
    CHECK(t.score <= 1.0);
  }

  for (int round : {1, 2}) {
    for (int layer : {1, 2}) {
      std::size_t count = 0, targets = 0;
      for (const auto& t : trials) {
        if (t.round == round && t.layer == layer) {
          ++count;
          targets += t.is_target;
        }
      }
      CHECK(count == 12);
      CHECK(targets == 3);  // every participant is also enrolled
    }
  }
}

TEST_CASE("run_attack is deterministic and thread-count independent") {
  AttackFixture fx = make_fixture(6, 3, 2);
  AttackConfig cfg = fixture_attack_cfg();

  auto a = run_attack(fx.models, fx.corpus, cfg);
  auto b = run_attack(fx.models, fx.corpus, cfg);
  auto c = run_attack(fx.models, fx.corpus, cfg, ExecPolicy{2});
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].score == b[i].score);
    CHECK(a[i].score == c[i].score);
    CHECK(a[i].enroll_id == c[i].enroll_id);
    CHECK(a[i].test_id == c[i].test_id);
  }
}

TEST_CASE("one enrolled speaker testing its own upload is a single target trial") {
  AttackFixture fx = make_fixture(1, 1, 1);
  AttackConfig cfg = fixture_attack_cfg();
  cfg.enrollment_speakers = 1;
  cfg.layers = {1};
  cfg.rounds = {1};

  auto trials = run_attack(fx.models, fx.corpus, cfg);
  REQUIRE(trials.size() == 1);
  CHECK(trials[0].is_target);
  CHECK(trials[0].enroll_id == trials[0].test_id);
}

TEST_CASE("run_attack validates rounds, layers, and enrollment resources") {
  AttackFixture fx = make_fixture(6, 3, 2);

  AttackConfig missing_round = fixture_attack_cfg();
  missing_round.rounds = {1, 3};
  CHECK_THROWS_AS(run_attack(fx.models, fx.corpus, missing_round), protocol_error);

  AttackConfig bad_layer = fixture_attack_cfg();
  bad_layer.layers = {3};
  CHECK_THROWS_AS(run_attack(fx.models, fx.corpus, bad_layer), config_error);

  AttackConfig too_many = fixture_attack_cfg();
  too_many.enrollment_speakers = 7;
  CHECK_THROWS_AS(run_attack(fx.models, fx.corpus, too_many), config_error);

  AttackConfig deep_pool = fixture_attack_cfg();
  deep_pool.enrollment_frames = 20;  // pools hold only 12
  CHECK_THROWS_AS(run_attack(fx.models, fx.corpus, deep_pool), config_error);
}

TEST_CASE("attack trials on a speaker-strength corpus carry ranking signal") {
  // Not an eer threshold test (that is the acceptance suite's job), just a
  // sanity check that target scores are not systematically below nontargets.
  AttackFixture fx = make_fixture(6, 3, 2);
  AttackConfig cfg = fixture_attack_cfg();
  cfg.layers = {2};
  auto trials = run_attack(fx.models, fx.corpus, cfg);
  ScoreSet s;
  for (const auto& t : trials) {
    (t.is_target ? s.target : s.nontarget).push_back(t.score);
  }
  REQUIRE_FALSE(s.target.empty());
  REQUIRE_FALSE(s.nontarget.empty());
  CHECK(compute_eer(s) <= 0.9);
}

TEST_CASE("trials csv layout is exact") {
  std::vector<TrialRecord> trials = {{3, 2, 5, 5, 1.0, true},
                                     {3, 2, 5, 7, 0.25, false}};
  const auto path = std::filesystem::temp_directory_path() / "fp_trials_test.csv";
  write_trials_csv(path, trials);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "round,layer,enroll_id,test_id,score,is_target");
  REQUIRE(std::getline(in, line));
  CHECK(line == "3,2,5,5,1,1");
  REQUIRE(std::getline(in, line));
  CHECK(line == "3,2,5,7,0.25,0");
  CHECK_FALSE(std::getline(in, line));
  std::filesystem::remove(path);
}
