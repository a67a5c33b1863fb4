#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace plangen {

/// One line of a dataset / finetune JSONL file.
struct DatasetRecord {
  std::string id;
  std::string domain;
  std::string problem_pddl;
  std::optional<std::vector<std::string>> plan;
  std::string plan_source;
  std::optional<int> optimal_length;

  bool operator==(const DatasetRecord &) const = default;
};

std::string to_json_line(const DatasetRecord &rec);
DatasetRecord record_from_json_line(const std::string &line);

void write_jsonl(const std::filesystem::path &path,
                 const std::vector<DatasetRecord> &records);
std::vector<DatasetRecord> read_jsonl(const std::filesystem::path &path);

std::string read_file(const std::filesystem::path &path);
/// Writes to a temporary sibling and renames, so readers never observe a
/// half-written file.
void write_file_atomic(const std::filesystem::path &path,
                       const std::string &content);

} // namespace plangen
