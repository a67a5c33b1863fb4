#include "plangen/dataset.hpp"

#include "plangen/common.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace plangen {

using nlohmann::json;

std::string to_json_line(const DatasetRecord &rec) {
  json j;
  j["id"] = rec.id;
  j["domain-name"] = rec.domain;
  j["problem-pddl-text"] = rec.problem_pddl;
  j["plan"] = rec.plan ? json(*rec.plan) : json(nullptr);
  j["plan-source"] = rec.plan_source;
  j["optimal-length"] =
      rec.optimal_length ? json(*rec.optimal_length) : json(nullptr);
  return j.dump();
}

DatasetRecord record_from_json_line(const std::string &line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error &e) {
    throw Error(std::string("malformed dataset line: ") + e.what());
  }
  DatasetRecord rec;
  try {
    rec.id = j.at("id").get<std::string>();
    rec.domain = j.at("domain-name").get<std::string>();
    rec.problem_pddl = j.at("problem-pddl-text").get<std::string>();
    if (!j.at("plan").is_null()) {
      rec.plan = j.at("plan").get<std::vector<std::string>>();
    }
    rec.plan_source = j.value("plan-source", std::string{});
    if (j.contains("optimal-length") && !j.at("optimal-length").is_null()) {
      rec.optimal_length = j.at("optimal-length").get<int>();
    }
  } catch (const json::exception &e) {
    throw Error(std::string("invalid dataset record: ") + e.what());
  }
  return rec;
}

void write_jsonl(const std::filesystem::path &path,
                 const std::vector<DatasetRecord> &records) {
  std::string out;
  for (const auto &r : records) {
    out += to_json_line(r);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<DatasetRecord> read_jsonl(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  std::vector<DatasetRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    out.push_back(record_from_json_line(line));
  }
  return out;
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path &path,
                       const std::string &content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot write " + tmp.string());
    }
    out << content;
    if (!out) {
      throw Error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

} // namespace plangen
