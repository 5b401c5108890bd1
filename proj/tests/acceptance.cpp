/*
 * Copyright 2026 The sentinsert Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "baseline_oracles.hpp"
#include "sentinsert/sentinsert.hpp"

namespace sentinsert {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Gate {
  int failures = 0;

  void report(const std::string& name, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
  }

  void run(const std::string& name, const std::function<bool(std::string&)>& check) {
    std::string detail;
    bool pass = false;
    try {
      pass = check(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    report(name, pass, detail);
  }
};

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

bool gradient_fidelity(std::string& detail) {
  const auto start = Clock::now();
  const auto r = run_gradcheck(8, 200, 1e-6, 1234);
  const double elapsed = seconds_since(start);
  detail = fmt("max_rel_error=%.3e probes=%zu time=%.1fs", r.max_rel_error, r.probes, elapsed);
  return r.probes == 200 && r.max_rel_error <= 1e-4 && elapsed < 60.0;
}

double worst_row_sum_error(const Matrix& H0, const GgnT<Matrix>& ggn, const InsertionGraph& g) {
  double worst = 0.0;
  Matrix H = H0;
  for (const auto& layer : ggn.layers) {
    for (std::size_t h = 0; h < layer.config.heads; ++h) {
      const Matrix a = attention_weights(H, layer, g, h, nullptr, false);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j);
        worst = std::max(worst, std::abs(s - 1.0));
      }
    }
    H = gat_layer(H, layer, g, nullptr, false);
  }
  return worst;
}

bool attention_normalization(std::string& detail) {
  Rng rng(1234);
  ModelConfig cfg;
  cfg.embedding_dim = 8;
  const auto params = init_model(cfg, rng);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto p = random_problem(8, rng);
    const auto g = build_insertion_graph(p);
    worst = std::max(worst, worst_row_sum_error(g.features, params.ggn, g));
    ad::Tape t;
    const auto vars = ad::bind(t, params, false);
    const auto f = ad::model_forward(t, vars, g, p.label, LossWeights{}, nullptr, false);
    worst = std::max(worst, worst_row_sum_error(t.value(f.fused_e), params.fused, g));
  }
  detail = fmt("max |sum(alpha)-1|=%.3e over 50 problems, both attention stacks", worst);
  return worst <= 1e-9;
}

double best_train_accuracy(const std::vector<EmbeddedProblem>& problems, const RunConfig& cfg) {
  // Evaluating the training set as the validation set records accuracy after every epoch.
  const auto r = train(problems, problems, cfg);
  double best = 0.0;
  for (double a : r.train_metrics.val_accuracy_curve) best = std::max(best, a);
  return best;
}

bool planted_learnability(std::string& detail) {
  const auto start = Clock::now();
  Rng rng(1234);
  auto problems = planted_signal_problems(32, 16, 0.1, rng);
  RunConfig cfg;
  cfg.epochs = 200;
  cfg.embedding_dim = 16;
  const double planted = best_train_accuracy(problems, cfg);

  std::vector<int> labels;
  for (const auto& p : problems) labels.push_back(p.label);
  Rng shuffle_rng(99);
  shuffle_rng.shuffle(std::span<int>(labels));
  for (std::size_t i = 0; i < problems.size(); ++i) problems[i].label = labels[i];
  const double control = best_train_accuracy(problems, cfg);

  const double elapsed = seconds_since(start);
  detail = fmt("planted best train acc=%.4f (need 1.0), shuffled control=%.4f (need <0.6), time=%.1fs", planted,
               control, elapsed);
  return planted == 1.0 && control < 0.6 && elapsed < 120.0;
}

bool determinism(std::string& detail) {
  Rng rng(7);
  const auto problems = planted_signal_problems(24, 8, 0.1, rng);
  RunConfig cfg;
  cfg.embedding_dim = 8;
  const auto a = train(problems, {}, cfg);
  const auto b = train(problems, {}, cfg);
  bool same_curve = a.train_metrics.loss_curve.size() == b.train_metrics.loss_curve.size() &&
                    std::memcmp(a.train_metrics.loss_curve.data(), b.train_metrics.loss_curve.data(),
                                a.train_metrics.loss_curve.size() * sizeof(double)) == 0;
  std::size_t same_predictions = 0;
  for (const auto& p : problems) {
    const auto oa = run_model(a.params, p, LossWeights{}, nullptr, false);
    const auto ob = run_model(b.params, p, LossWeights{}, nullptr, false);
    if (std::memcmp(oa.fused_probs.data(), ob.fused_probs.data(), sizeof(double) * kSlotCount) == 0 &&
        predict(a.params, p) == predict(b.params, p))
      ++same_predictions;
  }
  detail = fmt("loss curves bit-identical=%s, identical predictions %zu/%zu", same_curve ? "yes" : "no",
               same_predictions, problems.size());
  return same_curve && same_predictions == problems.size();
}

bool baseline_oracles(std::string& detail) {
  using namespace testing;
  Rng rng(1234);
  std::size_t agree = 0, total = 0;
  for (auto alg : {CoherenceAlgorithm::pav, CoherenceAlgorithm::ssv, CoherenceAlgorithm::msv}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto p = random_problem_with_padding(rng, 6);
      const std::optional<double> theta = alg == CoherenceAlgorithm::msv ? std::optional(0.3) : std::nullopt;
      agree += insert_by_coherence(p, alg, theta) == oracle_insert(p, alg, 0.3);
      ++total;
    }
  }
  auto model = init_pairwise_model(6, 16, rng);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_problem_with_padding(rng, 6);
    std::array<double, 5> probs{};
    std::array<bool, 5> present{};
    for (std::size_t i = 0; i < 5; ++i) {
      present[i] = !all_zero(p.parts[i]);
      probs[i] = pairwise_precedes(model, p.question, p.parts[i]);
    }
    agree += toposort_infer(p, model) == oracle_toposort(probs, present);
    ++total;
  }
  detail = fmt("%zu/%zu agree (PAV, SSV, MSV, toposort x100)", agree, total);
  return agree == total;
}

bool graph_structure(std::string& detail) {
  Rng rng(1234);
  bool ok = true;
  ModelConfig cfg;
  cfg.embedding_dim = 6;
  const auto params = init_model(cfg, rng);
  double worst_identity = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto p = random_problem(6, rng);
    const auto g = build_insertion_graph(p);
    ok = ok && g.node_count() == 9 && g.edges.size() == 12;
    ok = ok && membership_counts(g) == std::vector<std::size_t>{1, 2, 2, 2, 1, 1, 1, 1, 1};
    Matrix H(9, 4);
    for (double& x : H.data()) x = rng.normal();
    std::array<Fingerprints, kSlotCount> zero;
    for (auto& f : zero) {
      f.layers = {Matrix(3, 4), Matrix(3, 4)};
      f.concat = concat_cols(std::span<const Matrix>(f.layers));
    }
    const Matrix E = fuse(H, zero, g).E;
    for (std::size_t k = 0; k < H.size(); ++k) worst_identity = std::max(worst_identity, std::abs(E[k] - H[k]));
    const auto o = run_model(params, p, {0, 0, 1}, nullptr, false);
    ok = ok && o.loss_total == o.loss_fused;
  }
  detail = fmt("9 nodes, 12 edges, membership and (0,0,1) loss %s; zero-fingerprint fuse max diff=%.1e",
               ok ? "hold" : "VIOLATED", worst_identity);
  return ok && worst_identity == 0.0;
}

bool data_round_trips(std::string& detail) {
  Rng rng(1234);
  const auto dir = std::filesystem::temp_directory_path() / "sentinsert_acceptance";
  std::filesystem::create_directories(dir);

  std::vector<InsertionProblem> problems;
  std::size_t reassembled = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    std::vector<std::string> sentences;
    const auto n = 5 + rng.below(12);
    for (std::size_t s = 0; s < n; ++s)
      sentences.push_back("Sentence " + std::to_string(s) + " of text " + std::to_string(i) + " ends here.");
    auto p = synthesize_problem(sentences, rng, "p" + std::to_string(i));
    reassembled += reassemble(p) == sentences;
    problems.push_back(std::move(p));
  }
  const auto problem_path = (dir / "problems.jsonl").string();
  write_problems(problem_path, problems);
  const bool problems_exact = read_problems(problem_path) == problems;

  std::vector<EmbeddedProblem> embedded;
  for (int i = 0; i < 50; ++i) embedded.push_back(random_problem(7, rng, "e" + std::to_string(i)));
  const auto set = to_embedding_set(embedded);
  const auto embedding_path = (dir / "embeddings.igne").string();
  write_embeddings(embedding_path, set);
  const auto back = read_embeddings(embedding_path, 7);
  bool embeddings_exact = back.records.size() == set.records.size() && read_file_bytes(embedding_path) == encode_embeddings(back);
  for (std::size_t r = 0; embeddings_exact && r < set.records.size(); ++r) {
    embeddings_exact = back.records[r].id == set.records[r].id;
    for (std::size_t k = 0; k < set.records[r].vectors.size(); ++k)
      embeddings_exact = embeddings_exact && std::memcmp(back.records[r].vectors[k].data(), set.records[r].vectors[k].data(),
                                                         7 * sizeof(float)) == 0;
  }

  std::array<std::size_t, kSlotCount> counts{};
  std::vector<std::string> eight;
  for (int s = 0; s < 8; ++s) eight.push_back("Sentence " + std::to_string(s) + " here.");
  for (int i = 0; i < 4000; ++i) ++counts[static_cast<std::size_t>(synthesize_problem(eight, rng).label)];
  double worst = 0.0;
  for (auto c : counts) worst = std::max(worst, std::abs(static_cast<double>(c) / 4000.0 - 0.25));
  std::filesystem::remove_all(dir);

  detail = fmt("problem file exact=%s, embedding file exact=%s, reassembly %zu/1000, max |freq-0.25|=%.4f",
               problems_exact ? "yes" : "no", embeddings_exact ? "yes" : "no", reassembled, worst);
  return problems_exact && embeddings_exact && reassembled == 1000 && worst <= 0.03;
}

}  // namespace
}  // namespace sentinsert

int main() {
  using namespace sentinsert;
  Gate gate;
  gate.run("gradient fidelity", gradient_fidelity);
  gate.run("attention normalization", attention_normalization);
  gate.run("planted-signal learnability", planted_learnability);
  gate.run("determinism", determinism);
  gate.run("baseline oracle equivalence", baseline_oracles);
  gate.run("graph/fusion structure", graph_structure);
  gate.run("data round-trips", data_round_trips);
  std::printf("%d of 7 criteria failed\n", gate.failures);
  return gate.failures == 0 ? 0 : 1;
}
