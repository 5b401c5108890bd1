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

#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sentinsert/baselines.hpp"
#include "sentinsert/config.hpp"
#include "sentinsert/dataset.hpp"
#include "sentinsert/embedding_file.hpp"
#include "sentinsert/errors.hpp"
#include "sentinsert/gradcheck.hpp"
#include "sentinsert/harness.hpp"
#include "sentinsert/model.hpp"
#include "sentinsert/problem.hpp"
#include "sentinsert/text.hpp"

// Command-line surface. Exit codes: 0 success, 1 validation or usage error,
// 2 I/O error. Results go to `out` as key=value lines.
namespace sentinsert {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void print_metrics(std::ostream& out, const std::string& prefix, const Metrics& m) {
  out << prefix << "accuracy=" << format_double(m.accuracy) << '\n';
  out << prefix << "correct=" << m.correct << '\n';
  out << prefix << "total=" << m.total << '\n';
  for (std::size_t k = 0; k < kSlotCount; ++k)
    out << prefix << "accuracy_" << role_name(slot_role(k)) << '=' << format_double(m.per_label_accuracy[k]) << '\n';
}

inline void print_curve(std::ostream& out, const std::string& key, const std::vector<double>& curve) {
  out << key << '=';
  for (std::size_t i = 0; i < curve.size(); ++i) out << (i ? "," : "") << format_double(curve[i]);
  out << '\n';
}

namespace detail {

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, weight_decay, dropout, attn_dropout, leaky_slope, val_ratio, msv_theta;
  std::optional<double> alpha, beta, gamma;
  std::optional<std::size_t> epochs, heads_hidden, heads_out, head_width, embedding_dim;
  std::optional<std::size_t> word_threshold, problems_per_abstract, toposort_epochs;
  std::optional<double> toposort_lr;
  std::optional<std::string> problems, embeddings, target_problems, target_embeddings, model, corpus, out;
  bool ensemble_heads = false;

  void add_common(CLI::App* app) {
    app->add_option("--config", config, "JSON config file; flags override it");
    app->add_option("--seed", seed);
    app->add_option("--lr", lr);
    app->add_option("--epochs", epochs);
    app->add_option("--weight-decay", weight_decay);
    app->add_option("--dropout", dropout);
    app->add_option("--attn-dropout", attn_dropout);
    app->add_option("--leaky-slope", leaky_slope);
    app->add_option("--heads-hidden", heads_hidden);
    app->add_option("--heads-out", heads_out);
    app->add_option("--head-width", head_width);
    app->add_option("--alpha", alpha, "weight of the global loss");
    app->add_option("--beta", beta, "weight of the local loss");
    app->add_option("--gamma", gamma, "weight of the fused loss");
    app->add_option("--val-ratio", val_ratio);
    app->add_option("--embedding-dim", embedding_dim);
    app->add_flag("--ensemble-heads", ensemble_heads, "predict from the mean of global and fused heads");
    app->add_option("--problems", problems, "problem file (JSON lines)");
    app->add_option("--embeddings", embeddings, "embedding file (binary)");
  }

  RunConfig resolve() const {
    RunConfig cfg = config ? load_config(*config) : RunConfig{};
    auto set = [](auto& field, const auto& opt) {
      if (opt) field = *opt;
    };
    set(cfg.seed, seed);
    set(cfg.lr, lr);
    set(cfg.epochs, epochs);
    set(cfg.weight_decay, weight_decay);
    set(cfg.dropout, dropout);
    set(cfg.attn_dropout, attn_dropout);
    set(cfg.leaky_slope, leaky_slope);
    set(cfg.heads_hidden, heads_hidden);
    set(cfg.heads_out, heads_out);
    set(cfg.head_width, head_width);
    set(cfg.loss_weights.alpha, alpha);
    set(cfg.loss_weights.beta, beta);
    set(cfg.loss_weights.gamma, gamma);
    set(cfg.val_ratio, val_ratio);
    set(cfg.embedding_dim, embedding_dim);
    set(cfg.msv_theta, msv_theta);
    set(cfg.word_threshold, word_threshold);
    set(cfg.problems_per_abstract, problems_per_abstract);
    set(cfg.toposort_epochs, toposort_epochs);
    set(cfg.toposort_lr, toposort_lr);
    set(cfg.problems, problems);
    set(cfg.embeddings, embeddings);
    set(cfg.target_problems, target_problems);
    set(cfg.target_embeddings, target_embeddings);
    set(cfg.model, model);
    set(cfg.corpus, corpus);
    set(cfg.out, out);
    if (ensemble_heads) cfg.ensemble_heads = true;
    cfg.validate();
    return cfg;
  }
};

inline const std::string& require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required ") + flag);
  return value;
}

inline std::vector<EmbeddedProblem> load_embedded(const std::string& problems_path,
                                                  const std::string& embeddings_path, std::size_t expected_dim) {
  const auto problems = read_problems(require_path(problems_path, "--problems"));
  const auto set = read_embeddings(require_path(embeddings_path, "--embeddings"),
                                   expected_dim ? std::optional<std::uint32_t>(static_cast<std::uint32_t>(expected_dim))
                                                : std::nullopt);
  return attach_embeddings(problems, set);
}

inline std::vector<std::string> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(line);
  return out;
}

inline std::optional<CoherenceAlgorithm> parse_coherence(const std::string& alg) {
  if (alg == "pav") return CoherenceAlgorithm::pav;
  if (alg == "ssv") return CoherenceAlgorithm::ssv;
  if (alg == "msv") return CoherenceAlgorithm::msv;
  return std::nullopt;
}

}  // namespace detail

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sentence insertion with global-local graph networks"};
  app.require_subcommand(1);

  detail::Overrides o;
  auto* synth = app.add_subcommand("synthesize", "Build insertion problems from a corpus of abstracts");
  o.add_common(synth);
  synth->add_option("--corpus", o.corpus, "text file, one abstract per line");
  synth->add_option("--out", o.out, "output problem file");
  synth->add_option("--word-threshold", o.word_threshold);
  synth->add_option("--problems-per-abstract", o.problems_per_abstract);
  std::string source = "arxiv";
  synth->add_option("--source", source)->check(CLI::IsMember({"toefl", "arxiv", "synthetic"}));

  auto* train_cmd = app.add_subcommand("train", "Train on a problem set");
  o.add_common(train_cmd);
  train_cmd->add_option("--model-out", o.model, "where to save the trained model");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model");
  o.add_common(eval_cmd);
  eval_cmd->add_option("--model", o.model, "saved model file");

  auto* cross_cmd = app.add_subcommand("cross", "Train on a source domain, test on a target domain");
  o.add_common(cross_cmd);
  cross_cmd->add_option("--target-problems", o.target_problems);
  cross_cmd->add_option("--target-embeddings", o.target_embeddings);
  cross_cmd->add_option("--model-out", o.model);

  auto* base_cmd = app.add_subcommand("baseline", "Run a baseline method");
  o.add_common(base_cmd);
  std::string alg;
  base_cmd->add_option("--alg", alg, "pav | ssv | msv | toposort")
      ->required()
      ->check(CLI::IsMember({"pav", "ssv", "msv", "toposort"}));
  base_cmd->add_option("--msv-theta", o.msv_theta);
  base_cmd->add_option("--toposort-epochs", o.toposort_epochs);
  base_cmd->add_option("--toposort-lr", o.toposort_lr);

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of model gradients");
  o.add_common(grad_cmd);
  std::size_t gc_dim = 8, gc_probes = 200;
  double gc_eps = 1e-6, gc_tol = 1e-4;
  grad_cmd->add_option("--dim", gc_dim);
  grad_cmd->add_option("--probes", gc_probes);
  grad_cmd->add_option("--eps", gc_eps);
  grad_cmd->add_option("--tolerance", gc_tol);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    const RunConfig cfg = o.resolve();

    if (synth->parsed()) {
      const auto abstracts = detail::read_corpus(detail::require_path(cfg.corpus, "--corpus"));
      SynthesisOptions so;
      so.filter.min_words = cfg.word_threshold;
      so.problems_per_abstract = cfg.problems_per_abstract;
      so.source = parse_source(source);
      const auto problems = synthesize_corpus(abstracts, Rng(cfg.seed), so);
      write_problems(detail::require_path(cfg.out, "--out"), problems);
      out << "abstracts=" << abstracts.size() << '\n' << "problems=" << problems.size() << '\n';
      return 0;
    }

    if (train_cmd->parsed()) {
      const auto data = detail::load_embedded(cfg.problems, cfg.embeddings, cfg.embedding_dim);
      Rng split_rng = Rng(cfg.seed).derive(100);
      const auto split = split_dataset(data, cfg.val_ratio, split_rng);
      const auto r = train(split.train, split.validation, cfg);
      out << "train_size=" << split.train.size() << '\n' << "val_size=" << split.validation.size() << '\n';
      print_metrics(out, "train_", r.train_metrics);
      print_metrics(out, "val_", r.val_metrics);
      out << "final_loss=" << format_double(r.train_metrics.loss_curve.back()) << '\n';
      print_curve(out, "loss_curve", r.train_metrics.loss_curve);
      out << "loss_warning=" << (r.train_metrics.loss_warning ? "true" : "false") << '\n';
      if (!cfg.model.empty()) save_model(cfg.model, r.model_config, r.params);
      return 0;
    }

    if (eval_cmd->parsed()) {
      const auto loaded = load_model(detail::require_path(cfg.model, "--model"));
      const auto data = detail::load_embedded(cfg.problems, cfg.embeddings, loaded.config.embedding_dim);
      print_metrics(out, "", evaluate(data, loaded.params, cfg.ensemble_heads || loaded.config.ensemble_heads));
      return 0;
    }

    if (cross_cmd->parsed()) {
      const auto source_data = detail::load_embedded(cfg.problems, cfg.embeddings, cfg.embedding_dim);
      const auto target_data =
          detail::load_embedded(cfg.target_problems, cfg.target_embeddings, cfg.embedding_dim);
      Rng split_rng = Rng(cfg.seed).derive(100);
      const auto split = split_dataset(source_data, cfg.val_ratio, split_rng);
      const auto r = cross_domain(split.train, split.validation, target_data, cfg);
      print_metrics(out, "source_", r.source.val_metrics);
      print_metrics(out, "target_", r.target);
      if (!cfg.model.empty()) save_model(cfg.model, r.source.model_config, r.source.params);
      return 0;
    }

    if (base_cmd->parsed()) {
      const auto data = detail::load_embedded(cfg.problems, cfg.embeddings, cfg.embedding_dim);
      out << "alg=" << alg << '\n';
      if (const auto coherence = detail::parse_coherence(alg)) {
        const std::optional<double> theta =
            *coherence == CoherenceAlgorithm::msv ? std::optional<double>(cfg.msv_theta) : std::nullopt;
        print_metrics(out, "", evaluate_with(data, [&](const EmbeddedProblem& p) {
                        return insert_by_coherence(p, *coherence, theta);
                      }));
        return 0;
      }
      Rng split_rng = Rng(cfg.seed).derive(100);
      const auto split = split_dataset(data, cfg.val_ratio, split_rng);
      Rng init = Rng(cfg.seed).derive(0);
      auto model = init_pairwise_model(dataset_dim(data), cfg.toposort_hidden, init);
      Rng order = Rng(cfg.seed).derive(1);
      const auto pairs = harvest_order_pairs(split.train);
      const auto report = toposort_train(pairs, model, cfg.toposort_epochs, cfg.toposort_lr, order);
      out << "train_pairs=" << pairs.size() << '\n';
      out << "pair_loss_before=" << format_double(report.loss_before) << '\n';
      out << "pair_loss_after=" << format_double(report.loss_after) << '\n';
      print_metrics(out, "", evaluate_with(split.validation, [&](const EmbeddedProblem& p) {
                      return toposort_infer(p, model);
                    }));
      return 0;
    }

    if (grad_cmd->parsed()) {
      const auto r = run_gradcheck(gc_dim, gc_probes, gc_eps, cfg.seed);
      const bool pass = r.max_rel_error <= gc_tol;
      out << "dim=" << gc_dim << '\n'
          << "probes=" << r.probes << '\n'
          << "max_rel_error=" << format_double(r.max_rel_error) << '\n'
          << "pass=" << (pass ? "true" : "false") << '\n';
      return pass ? 0 : 1;
    }
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(std::move(args), out, err);
}

}  // namespace sentinsert
