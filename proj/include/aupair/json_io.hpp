#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aupair/types.hpp"

namespace aupair {

using json = nlohmann::json;

void to_json(json& j, const TestCase& t);
void from_json(const json& j, TestCase& t);
void to_json(json& j, const Problem& p);
void from_json(const json& j, Problem& p);
void to_json(json& j, const Attempt& a);
void from_json(const json& j, Attempt& a);
void to_json(json& j, const CuratedProblem& c);
void from_json(const json& j, CuratedProblem& c);
json pair_to_json(const CandidatePair& p);
CandidatePair pair_from_json(const json& j);

std::string read_file(const std::filesystem::path& path);

// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Calls `fn(line_number, record)` for every non-blank line. Parse errors and
// exceptions thrown by `fn` are rethrown as ValidationError naming the line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn);

std::string to_jsonl(const std::vector<json>& records);

}  // namespace aupair
