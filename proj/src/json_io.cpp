#include "aupair/json_io.hpp"

#include <fstream>
#include <sstream>

#include "aupair/error.hpp"

namespace aupair {

void to_json(json& j, const TestCase& t) {
  j = json{{"input", t.input}, {"expected_output", t.expected_output}};
}

void from_json(const json& j, TestCase& t) {
  j.at("input").get_to(t.input);
  j.at("expected_output").get_to(t.expected_output);
}

void to_json(json& j, const Problem& p) {
  j = json{{"id", p.id},
           {"description", p.description},
           {"difficulty", p.difficulty ? json(*p.difficulty) : json(nullptr)},
           {"categories", p.categories},
           {"source", p.source},
           {"tests", p.tests}};
}

void from_json(const json& j, Problem& p) {
  j.at("id").get_to(p.id);
  j.at("description").get_to(p.description);
  p.difficulty.reset();
  if (auto it = j.find("difficulty"); it != j.end() && !it->is_null())
    p.difficulty = it->get<std::string>();
  p.categories = j.value("categories", std::vector<std::string>{});
  p.source = j.value("source", std::string{});
  j.at("tests").get_to(p.tests);
}

void to_json(json& j, const Attempt& a) {
  j = json{{"id", a.id}, {"code", a.code}, {"score", a.score}};
  if (!a.per_test.empty()) {
    json verdicts = json::array();
    for (auto v : a.per_test) verdicts.push_back(std::string(to_string(v)));
    j["per_test"] = std::move(verdicts);
  }
  j["parent_attempt"] = a.parent_attempt ? json(*a.parent_attempt) : json(nullptr);
}

void from_json(const json& j, Attempt& a) {
  j.at("id").get_to(a.id);
  j.at("code").get_to(a.code);
  j.at("score").get_to(a.score);
  a.per_test.clear();
  if (auto it = j.find("per_test"); it != j.end())
    for (const auto& v : *it) a.per_test.push_back(verdict_from_string(v.get<std::string>()));
  a.parent_attempt.reset();
  if (auto it = j.find("parent_attempt"); it != j.end() && !it->is_null())
    a.parent_attempt = it->get<std::string>();
  a.validate();
}

void to_json(json& j, const CuratedProblem& c) {
  to_json(j, c.problem);
  j["guess"] = c.guess;
}

void from_json(const json& j, CuratedProblem& c) {
  from_json(j, c.problem);
  j.at("guess").get_to(c.guess);
}

json pair_to_json(const CandidatePair& p) {
  return json{{"id", p.id()},
              {"problem_id", p.problem_id()},
              {"guess", p.guess()},
              {"fix", p.fix()},
              {"created_at_call", p.created_at_call()}};
}

CandidatePair pair_from_json(const json& j) {
  return CandidatePair(j.at("id").get<std::string>(), j.at("problem_id").get<std::string>(),
                       j.at("guess").get<Attempt>(), j.at("fix").get<Attempt>(),
                       j.value("created_at_call", std::int64_t{-1}));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw EnvironmentError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw EnvironmentError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(line_no, json::parse(line));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed record: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string to_jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

}  // namespace aupair
