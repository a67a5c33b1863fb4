#pragma once

#include "plangen/harvest.hpp"
#include "plangen/policy.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace plangen::loop {

struct LoopConfig {
  std::size_t n_loop = 15;
  /// Problems sampled per iteration.
  std::size_t m = 200;
  /// Candidate plans per problem.
  std::size_t n = 32;
  policy::SamplerConfig sampler;
  /// 30 epochs at a tenth of the pretraining rate; see for_pretrain().
  policy::TrainConfig finetune;
  std::uint64_t seed = 0;
  std::filesystem::path dir;

  /// Defaults derived from a pretraining schedule.
  static LoopConfig for_pretrain(const policy::TrainConfig &pretrain);
  void check(std::size_t pool_size) const;
};

struct IterationReport {
  int iteration = 0;
  std::size_t problems_sampled = 0;
  std::size_t candidates = 0;
  std::size_t valid_candidates = 0;
  double valid_rate = 0;
  std::size_t problems_harvested = 0;
  std::size_t improved = 0;
  double mean_harvested_length = 0;
  double mean_cache_length = 0;
  std::size_t finetune_examples = 0;
  bool finetune_skipped = false;
  std::vector<policy::LogRow> finetune_log;
  double sample_seconds = 0;
  double harvest_seconds = 0;
  double finetune_seconds = 0;

  std::string to_json() const;
  static IterationReport from_json(const std::string &text);
};

/// Builds training examples from labelled records.
std::vector<policy::Example>
examples_of(const std::vector<DatasetRecord> &records,
            const tokenizer::Vocabulary &vocab);

struct PretrainResult {
  policy::Checkpoint checkpoint;
  policy::TrainResult train;
};

/// Trains a fresh model on labelled records; with a validation set the
/// lowest-validation-loss checkpoint is returned.
PretrainResult pretrain(const std::vector<DatasetRecord> &train,
                        const std::vector<DatasetRecord> &valid,
                        const tokenizer::Vocabulary &vocab,
                        const policy::ModelConfig &model,
                        const policy::TrainConfig &schedule,
                        std::uint64_t seed);

struct LoopResult {
  policy::Checkpoint model;
  std::vector<IterationReport> reports;
  /// Iterations executed by this call (the rest were loaded on resume).
  std::size_t executed = 0;
};

/// Self-improvement iterations over the problem pool. Pool records with a
/// plan seed the solution cache. Writes iter-<k>/{checkpoint, finetune.jsonl,
/// cache.jsonl, finetune-log.csv, report.json} and cache.jsonl under
/// cfg.dir, resuming after the last iteration with a report. At most
/// `max_new` iterations are executed when given.
LoopResult run(const LoopConfig &cfg, domains::DomainKind domain,
               const std::vector<DatasetRecord> &pool,
               const policy::Checkpoint &pi0,
               std::optional<std::size_t> max_new = std::nullopt);

/// Number of completed iterations recorded in `dir`.
std::size_t completed_iterations(const std::filesystem::path &dir);

struct EvalRecord {
  std::string id;
  bool completed = false;
  std::optional<std::size_t> length;
  std::optional<std::size_t> bfs_length;
  std::optional<int> optimal_length;
  std::size_t valid_candidates = 0;
  double latency = 0;
};

class OverlapError : public Error {
public:
  using Error::Error;
};

/// Throws OverlapError if a test problem is structurally identical to a
/// training problem.
void check_disjoint(const std::vector<DatasetRecord> &train,
                    const std::vector<DatasetRecord> &test);

/// Best-of-N evaluation. Problem i uses sampler stream i. With `with_bfs`,
/// also reports the shortest plan over the graph of all valid candidates.
std::vector<EvalRecord> evaluate(const policy::Checkpoint &model,
                                 domains::DomainKind domain,
                                 const std::vector<DatasetRecord> &test,
                                 std::size_t n, bool with_bfs,
                                 const policy::SamplerConfig &sampler);

/// id,completed,length,bfs_length,optimal_length,valid_candidates. Contains
/// no timing, so equal runs give byte-identical files.
std::string eval_csv(const std::vector<EvalRecord> &records);
std::vector<EvalRecord> parse_eval_csv(const std::string &text);
/// id,latency
std::string latency_csv(const std::vector<EvalRecord> &records);

} // namespace plangen::loop
