#pragma once

#include "plangen/loop.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace plangen::bench {

/// Percentage excess over the optimum; 0 when cost_opt = 0. Throws
/// harvest::IntegrityError when cost < cost_opt.
double regret(double cost, double cost_opt);

/// (cost + 1) / (cost_opt + 1) * 100.
double normalized_length(double cost, double cost_opt);

struct MetricRow {
  std::string problem_id;
  std::string method;
  bool completed = false;
  std::optional<std::size_t> length;
  std::optional<int> optimal_length;
  double latency = 0;
};

/// Rows for one evaluation; `bfs` selects the +BFS length column.
std::vector<MetricRow> rows_of(const std::vector<loop::EvalRecord> &records,
                               const std::string &method, bool bfs = false);

struct Summary {
  std::string method;
  std::size_t problems = 0;
  std::size_t completed = 0;
  double completion = 0; ///< percent
  std::size_t length_n = 0;
  double mean_length = 0;
  double se_length = 0;
  /// Percent of rows with a known optimum that were solved optimally.
  std::optional<double> optimality;
  double mean_latency = 0;
  double se_latency = 0;
};

/// Summaries per method in order of first appearance. Length statistics use
/// completed rows only; in intersection mode only problems completed by
/// every method contribute to them.
std::vector<Summary> aggregate(const std::vector<MetricRow> &rows,
                               bool intersection = false);

/// Sample mean and standard error (sample sd / sqrt(n)).
std::pair<double, double> mean_se(std::span<const double> xs);

struct StatResult {
  std::string test;
  std::string label;
  double statistic = 0;
  double p = 1;
  double corrected_p = 1;
  std::size_t n = 0;
  bool degenerate = false;
  std::string note;
};

enum class WilcoxonMode { automatic, exact, normal };

/// Two-sided signed-rank test on paired samples. Zero differences are
/// dropped; tied magnitudes get midranks. Automatic mode is exact for
/// n <= 25 and the tie-corrected normal approximation above. The statistic
/// is W+ (sum of ranks of positive differences a - b).
StatResult wilcoxon_signed_rank(std::span<const double> a,
                                std::span<const double> b,
                                WilcoxonMode mode = WilcoxonMode::automatic);

/// McNemar's test on paired success flags. Exact two-sided binomial on the
/// discordant pairs, or the continuity-corrected chi-square statistic.
StatResult mcnemar(const std::vector<bool> &a, const std::vector<bool> &b,
                   bool chi_square = false);

/// Sets corrected_p = min(1, p * comparisons).
void bonferroni(std::vector<StatResult> &results, std::size_t comparisons);

std::string summary_csv(const std::vector<Summary> &summaries);
std::string stats_csv(const std::vector<StatResult> &results);
/// One row per iteration report.
std::string convergence_csv(const std::vector<loop::IterationReport> &reports);

struct ReportFiles {
  std::filesystem::path summary, intersection, convergence;
};

/// Reads <run>/eval/<method>.csv (plus optional <method>.latency.csv) and
/// <run>/iter-*/report.json from each run directory and writes summary.csv,
/// summary-intersection.csv and convergence.csv to `out`. Methods are named
/// "<run>/<method>" when several runs are given; evaluations with +BFS
/// lengths add a "<method>+bfs" row.
ReportFiles report(const std::vector<std::filesystem::path> &runs,
                   const std::filesystem::path &out);

} // namespace plangen::bench
