#include "plangen/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

namespace plangen::bench {

namespace fs = std::filesystem;

double regret(double cost, double cost_opt) {
  if (cost < 0 || cost_opt < 0) {
    throw UsageError("plan costs must be non-negative");
  }
  if (cost < cost_opt) {
    throw harvest::IntegrityError("plan shorter than the optimum");
  }
  if (cost_opt == 0) {
    return 0;
  }
  return (cost - cost_opt) / cost_opt * 100.0;
}

double normalized_length(double cost, double cost_opt) {
  return (cost + 1) / (cost_opt + 1) * 100.0;
}

std::vector<MetricRow> rows_of(const std::vector<loop::EvalRecord> &records,
                               const std::string &method, bool bfs) {
  std::vector<MetricRow> out;
  for (const auto &r : records) {
    MetricRow m;
    m.problem_id = r.id;
    m.method = method;
    m.completed = r.completed;
    m.length = bfs ? r.bfs_length : r.length;
    if (bfs && r.completed && !r.bfs_length) {
      throw UsageError("record " + r.id + " has no +BFS length");
    }
    m.optimal_length = r.optimal_length;
    m.latency = r.latency;
    out.push_back(std::move(m));
  }
  return out;
}

std::pair<double, double> mean_se(std::span<const double> xs) {
  if (xs.empty()) {
    return {0, 0};
  }
  const double n = static_cast<double>(xs.size());
  double mean = 0;
  for (double x : xs) {
    mean += x;
  }
  mean /= n;
  if (xs.size() < 2) {
    return {mean, 0};
  }
  double ss = 0;
  for (double x : xs) {
    ss += (x - mean) * (x - mean);
  }
  return {mean, std::sqrt(ss / (n - 1)) / std::sqrt(n)};
}

std::vector<Summary> aggregate(const std::vector<MetricRow> &rows,
                               bool intersection) {
  std::vector<std::string> methods;
  std::map<std::string, std::vector<const MetricRow *>> by_method;
  for (const auto &r : rows) {
    if (r.completed != r.length.has_value()) {
      throw UsageError("row " + r.problem_id + ": length present iff completed");
    }
    auto [it, fresh] = by_method.try_emplace(r.method);
    if (fresh) {
      methods.push_back(r.method);
    }
    it->second.push_back(&r);
  }
  std::set<std::string> common;
  if (intersection) {
    bool first = true;
    for (const auto &m : methods) {
      std::set<std::string> solved;
      for (const auto *r : by_method[m]) {
        if (r->completed) {
          solved.insert(r->problem_id);
        }
      }
      if (first) {
        common = std::move(solved);
        first = false;
      } else {
        std::set<std::string> keep;
        std::set_intersection(common.begin(), common.end(), solved.begin(),
                              solved.end(), std::inserter(keep, keep.end()));
        common = std::move(keep);
      }
    }
  }
  std::vector<Summary> out;
  for (const auto &m : methods) {
    Summary s;
    s.method = m;
    std::vector<double> lengths, latencies;
    std::size_t with_opt = 0, optimal = 0;
    for (const auto *r : by_method[m]) {
      ++s.problems;
      latencies.push_back(r->latency);
      if (r->completed) {
        ++s.completed;
      }
      if (r->optimal_length) {
        ++with_opt;
        if (r->completed &&
            *r->length == static_cast<std::size_t>(*r->optimal_length)) {
          ++optimal;
        }
      }
      if (r->completed && (!intersection || common.count(r->problem_id))) {
        lengths.push_back(static_cast<double>(*r->length));
      }
    }
    s.completion = s.problems ? 100.0 * static_cast<double>(s.completed) /
                                    static_cast<double>(s.problems)
                              : 0;
    s.length_n = lengths.size();
    std::tie(s.mean_length, s.se_length) = mean_se(lengths);
    if (with_opt) {
      s.optimality = 100.0 * static_cast<double>(optimal) /
                     static_cast<double>(with_opt);
    }
    std::tie(s.mean_latency, s.se_latency) = mean_se(latencies);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

double normal_sf2(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

} // namespace

StatResult wilcoxon_signed_rank(std::span<const double> a,
                                std::span<const double> b, WilcoxonMode mode) {
  if (a.size() != b.size()) {
    throw UsageError("paired samples differ in size");
  }
  StatResult r;
  r.test = "wilcoxon";
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) {
      d.push_back(a[i] - b[i]);
    }
  }
  const std::size_t dropped = a.size() - d.size();
  const std::size_t n = d.size();
  r.n = n;
  if (a.size() && 5 * dropped > a.size()) {
    r.note = "dropped " + std::to_string(dropped) + " of " +
             std::to_string(a.size()) + " zero differences";
  }
  if (n == 0) {
    r.degenerate = true;
    r.p = r.corrected_p = 1;
    return r;
  }
  // Midranks, doubled so they are integers.
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    idx[i] = i;
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(d[x]) < std::abs(d[y]);
  });
  std::vector<long> rank2(n);
  double tie_term = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[idx[j + 1]]) == std::abs(d[idx[i]])) {
      ++j;
    }
    const long r2 = static_cast<long>(i + j + 2); // (i+1 + j+1)
    for (std::size_t k = i; k <= j; ++k) {
      rank2[idx[k]] = r2;
    }
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  long w2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) {
      w2 += rank2[i];
    }
  }
  r.statistic = static_cast<double>(w2) / 2.0;
  const bool exact = mode == WilcoxonMode::exact ||
                     (mode == WilcoxonMode::automatic && n <= 25);
  if (exact) {
    if (n > 60) {
      throw UsageError("exact Wilcoxon distribution limited to n <= 60");
    }
    long total = 0;
    for (long x : rank2) {
      total += x;
    }
    // counts[s] = number of sign vectors with doubled W+ = s
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1;
    long reach = 0;
    for (long x : rank2) {
      for (long s = reach; s >= 0; --s) {
        counts[static_cast<std::size_t>(s + x)] +=
            counts[static_cast<std::size_t>(s)];
      }
      reach += x;
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double lower = 0, upper = 0;
    for (long s = 0; s <= total; ++s) {
      if (s <= w2) {
        lower += counts[static_cast<std::size_t>(s)];
      }
      if (s >= w2) {
        upper += counts[static_cast<std::size_t>(s)];
      }
    }
    r.p = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    r.test = "wilcoxon-exact";
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1) / 4;
    const double var = nn * (nn + 1) * (2 * nn + 1) / 24 - tie_term / 48;
    if (var <= 0) {
      r.degenerate = true;
      r.p = 1;
    } else {
      r.p = std::min(1.0, normal_sf2((r.statistic - mean) / std::sqrt(var)));
    }
    r.test = "wilcoxon-normal";
  }
  r.corrected_p = r.p;
  return r;
}

StatResult mcnemar(const std::vector<bool> &a, const std::vector<bool> &b,
                   bool chi_square) {
  if (a.size() != b.size()) {
    throw UsageError("paired samples differ in size");
  }
  StatResult r;
  std::size_t nb = 0, nc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    nb += a[i] && !b[i];
    nc += !a[i] && b[i];
  }
  const std::size_t n = nb + nc;
  r.n = n;
  r.note = "b=" + std::to_string(nb) + " c=" + std::to_string(nc);
  if (n == 0) {
    r.test = chi_square ? "mcnemar-chi2" : "mcnemar-exact";
    r.degenerate = true;
    return r;
  }
  if (chi_square) {
    r.test = "mcnemar-chi2";
    const double diff =
        std::max(0.0, std::abs(static_cast<double>(nb) - static_cast<double>(nc)) - 1.0);
    r.statistic = diff * diff / static_cast<double>(n);
    r.p = std::min(1.0, std::erfc(std::sqrt(r.statistic / 2)));
  } else {
    r.test = "mcnemar-exact";
    r.statistic = static_cast<double>(std::min(nb, nc));
    const std::size_t k = std::min(nb, nc);
    double tail = 0;
    const double ln2n = static_cast<double>(n) * std::log(2.0);
    for (std::size_t i = 0; i <= k; ++i) {
      tail += std::exp(std::lgamma(static_cast<double>(n) + 1) -
                       std::lgamma(static_cast<double>(i) + 1) -
                       std::lgamma(static_cast<double>(n - i) + 1) - ln2n);
    }
    r.p = std::min(1.0, 2 * tail);
  }
  r.corrected_p = r.p;
  return r;
}

void bonferroni(std::vector<StatResult> &results, std::size_t comparisons) {
  if (comparisons == 0) {
    throw UsageError("number of comparisons must be positive");
  }
  for (auto &r : results) {
    r.corrected_p = std::min(1.0, r.p * static_cast<double>(comparisons));
  }
}

namespace {

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string sci(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

} // namespace

std::string summary_csv(const std::vector<Summary> &summaries) {
  std::string out = "method,problems,completed,completion_pct,length_n,"
                    "mean_length,se_length,optimality_pct,mean_latency_s,"
                    "se_latency_s\n";
  for (const auto &s : summaries) {
    out += s.method + "," + std::to_string(s.problems) + "," +
           std::to_string(s.completed) + "," + num(s.completion) + "," +
           std::to_string(s.length_n) + "," + num(s.mean_length) + "," +
           num(s.se_length) + "," + (s.optimality ? num(*s.optimality) : "") +
           "," + num(s.mean_latency) + "," + num(s.se_latency) + "\n";
  }
  return out;
}

std::string stats_csv(const std::vector<StatResult> &results) {
  std::string out = "test,label,n,statistic,p,corrected_p,degenerate,note\n";
  for (const auto &r : results) {
    out += r.test + "," + r.label + "," + std::to_string(r.n) + "," +
           sci(r.statistic) + "," + sci(r.p) + "," + sci(r.corrected_p) + "," +
           (r.degenerate ? "1" : "0") + "," + r.note + "\n";
  }
  return out;
}

std::string convergence_csv(const std::vector<loop::IterationReport> &reports) {
  std::string out = "iteration,problems_sampled,valid_rate,problems_harvested,"
                    "improved,mean_harvested_length,mean_cache_length,"
                    "finetune_examples,final_finetune_loss\n";
  for (const auto &r : reports) {
    out += std::to_string(r.iteration) + "," +
           std::to_string(r.problems_sampled) + "," + num(r.valid_rate) + "," +
           std::to_string(r.problems_harvested) + "," +
           std::to_string(r.improved) + "," + num(r.mean_harvested_length) +
           "," + num(r.mean_cache_length) + "," +
           std::to_string(r.finetune_examples) + "," +
           (r.finetune_log.empty() ? "" : num(r.finetune_log.back().loss)) +
           "\n";
  }
  return out;
}

ReportFiles report(const std::vector<fs::path> &runs, const fs::path &out) {
  if (runs.empty()) {
    throw UsageError("no run directories given");
  }
  std::vector<MetricRow> rows;
  std::string convergence;
  for (const auto &run : runs) {
    std::vector<fs::path> evals;
    if (fs::is_directory(run / "eval")) {
      for (const auto &e : fs::directory_iterator(run / "eval")) {
        const auto p = e.path();
        if (p.extension() == ".csv" &&
            p.stem().extension() != ".latency") {
          evals.push_back(p);
        }
      }
    }
    std::sort(evals.begin(), evals.end());
    const std::size_t iters = loop::completed_iterations(run);
    if (evals.empty() && iters == 0) {
      throw Error(run.string() + ": missing eval/<method>.csv and " +
                  "iter-1/report.json");
    }
    for (const auto &p : evals) {
      auto records = loop::parse_eval_csv(read_file(p));
      fs::path lat = p;
      lat.replace_extension(".latency.csv");
      if (fs::exists(lat)) {
        std::map<std::string, double> by_id;
        const std::string text = read_file(lat);
        std::size_t pos = text.find('\n');
        while (pos != std::string::npos && pos + 1 < text.size()) {
          std::size_t end = text.find('\n', pos + 1);
          std::string line = text.substr(pos + 1, end - pos - 1);
          auto c = line.find(',');
          if (c != std::string::npos) {
            by_id[line.substr(0, c)] = std::stod(line.substr(c + 1));
          }
          pos = end;
        }
        for (auto &r : records) {
          r.latency = by_id.count(r.id) ? by_id[r.id] : 0.0;
        }
      }
      std::string method = p.stem().string();
      if (runs.size() > 1) {
        method = run.filename().string() + "/" + method;
      }
      auto base = rows_of(records, method);
      rows.insert(rows.end(), base.begin(), base.end());
      const bool has_bfs = std::any_of(
          records.begin(), records.end(),
          [](const loop::EvalRecord &r) { return r.bfs_length.has_value(); });
      if (has_bfs) {
        auto extra = rows_of(records, method + "+bfs", true);
        rows.insert(rows.end(), extra.begin(), extra.end());
      }
    }
    std::vector<loop::IterationReport> reps;
    for (std::size_t k = 1; k <= iters; ++k) {
      reps.push_back(loop::IterationReport::from_json(
          read_file(run / ("iter-" + std::to_string(k)) / "report.json")));
    }
    auto csv = convergence_csv(reps);
    if (runs.size() > 1) {
      std::string prefixed;
      std::size_t pos = csv.find('\n') + 1;
      if (convergence.empty()) {
        prefixed = "run," + csv.substr(0, pos);
      }
      while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        prefixed += run.filename().string() + "," + csv.substr(pos, end - pos + 1);
        pos = end + 1;
      }
      convergence += prefixed;
    } else {
      convergence = csv;
    }
  }
  fs::create_directories(out);
  ReportFiles files{out / "summary.csv", out / "summary-intersection.csv",
                    out / "convergence.csv"};
  write_file_atomic(files.summary, summary_csv(aggregate(rows, false)));
  write_file_atomic(files.intersection, summary_csv(aggregate(rows, true)));
  write_file_atomic(files.convergence, convergence);
  return files;
}

} // namespace plangen::bench
