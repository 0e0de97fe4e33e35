#include "aupair/prompt.hpp"

#include <cmath>

#include "aupair/error.hpp"

namespace aupair {

namespace {

constexpr std::string_view kHeader =
    "You are an experienced software developer.\n"
    "\n"
    "Look at the question (Q) and solutions below (A).\n"
    "\n";
constexpr std::string_view kObjective =
    "The main objective is to improve the solve() function to answer the question.\n"
    "\n";
constexpr std::string_view kGuessInstruction =
    "Complete the function definition below. Print the final answer in the function. "
    "Do not write main. Do not write anything outside the solve() function.\n";
constexpr std::string_view kSignatureStub = "def solve(s: str):\n  ...\n";

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

void append_target(std::string& out, const RepairPromptSpec& spec) {
  const bool scores = spec.style == PromptStyle::instruction_and_score;
  if (spec.style != PromptStyle::naive) out += kObjective;
  out += "(Q): " + spec.target_question + "\n\n";
  out += "Bad solution code A(bad):\n\n";
  out += fence_code(spec.target_code) + "\n";
  if (scores)
    out += "The score of this solution is score(A(bad)) = " +
           std::to_string(render_score(spec.target_score)) + "\n\n";
  out += "Good solution code A(good):\n";
  if (scores)
    out += "\nThe score of this solution is score(A(good)) = " +
           std::to_string(spec.target_fix_score_rendered) + "\n";
}

}  // namespace

std::string_view to_string(PromptStyle s) {
  switch (s) {
    case PromptStyle::naive: return "naive";
    case PromptStyle::instruction: return "instruction";
    case PromptStyle::instruction_and_score: return "instruction_and_score";
  }
  return "unknown";
}

PromptStyle prompt_style_from_string(std::string_view s) {
  if (s == "naive") return PromptStyle::naive;
  if (s == "instruction") return PromptStyle::instruction;
  if (s == "instruction_and_score") return PromptStyle::instruction_and_score;
  throw ValidationError("unknown prompt style '" + std::string(s) + "'");
}

PromptExample example_from_pair(const CandidatePair& pair, const ProblemIndex& problems) {
  return PromptExample{pair.id(),          problems.at(pair.problem_id()).description,
                       pair.guess().code,  pair.guess().score,
                       pair.fix().code,    pair.fix().score};
}

RepairPromptSpec make_repair_spec(const std::vector<const CandidatePair*>& pairs,
                                  const ProblemIndex& pair_problems, const Problem& target,
                                  const Attempt& target_guess, PromptStyle style) {
  RepairPromptSpec spec;
  for (const auto* p : pairs) spec.in_context.push_back(example_from_pair(*p, pair_problems));
  spec.target_question = target.description;
  spec.target_code = target_guess.code;
  spec.target_score = target_guess.score;
  spec.style = style;
  return spec;
}

int render_score(double fraction) {
  // The epsilon absorbs representation error in products such as 0.285 * 100.
  return static_cast<int>(std::floor(fraction * 100.0 + 0.5 + 1e-9));
}

std::string fence_code(std::string_view code) {
  std::string out = "```python\n";
  out += code;
  if (code.empty() || code.back() != '\n') out += '\n';
  out += "```\n";
  return out;
}

std::string build_guess_prompt(const Problem& problem) {
  if (problem.description.empty())
    throw ValidationError("problem '" + problem.id + "' has an empty description");
  std::string out = problem.description;
  out += "\n\n";
  out += kGuessInstruction;
  out += "\n";
  out += fence_code(kSignatureStub);
  return out;
}

std::string build_repair_prompt_allow_empty(const RepairPromptSpec& spec) {
  const bool instructions = spec.style != PromptStyle::naive;
  const bool scores = spec.style == PromptStyle::instruction_and_score;
  std::string out;
  if (instructions) {
    out += kHeader;
    out += kObjective;
  }
  for (std::size_t i = 0; i < spec.in_context.size(); ++i) {
    const auto& ex = spec.in_context[i];
    out += "Example " + std::to_string(i + 1) + ":\n\n";
    out += "(Q): " + ex.question + "\n\n";
    out += "Bad solution code A(bad):\n\n";
    out += fence_code(ex.bad_code) + "\n";
    if (scores)
      out += "The score of this code is score(A(bad)) = " +
             std::to_string(render_score(ex.bad_score)) + ".\n\n";
    out += "Good solution code A(good):\n\n";
    if (scores)
      out += "The score of this code is score(A(good)) = " +
             std::to_string(render_score(ex.good_score)) + ".\n\n";
    out += fence_code(ex.good_code) + "\n";
    out += kExampleSeparator;
    out += "\n\n";
  }
  append_target(out, spec);
  return out;
}

std::string build_repair_prompt(const RepairPromptSpec& spec) {
  if (spec.in_context.empty())
    throw ValidationError("repair prompt needs at least one in-context pair");
  return build_repair_prompt_allow_empty(spec);
}

std::string build_feedback_prompt(const Problem& problem, const Attempt& guess) {
  std::string out = "You are an experienced software developer.\n\n";
  out += "Look at the question (Q) and the solution below (A).\n\n";
  out += "(Q): " + problem.description + "\n\n";
  out += "Solution code A:\n\n";
  out += fence_code(guess.code) + "\n";
  out += "The score of this solution is score(A) = " + std::to_string(render_score(guess.score)) +
         "\n\n";
  out += "Explain briefly why this code fails to answer the question. Do not write any code.\n";
  return out;
}

std::string build_feedback_repair_prompt(const Problem& problem, const Attempt& guess,
                                         std::string_view feedback) {
  std::string out = "You are an experienced software developer.\n\n";
  out += "Look at the question (Q), the solution below (A) and the feedback on it.\n\n";
  out += kObjective;
  out += "(Q): " + problem.description + "\n\n";
  out += "Bad solution code A(bad):\n\n";
  out += fence_code(guess.code) + "\n";
  out += "The score of this solution is score(A(bad)) = " +
         std::to_string(render_score(guess.score)) + "\n\n";
  out += "Feedback:\n";
  out += feedback;
  out += "\n\nGood solution code A(good):\n\n";
  out += "The score of this solution is score(A(good)) = 100\n";
  return out;
}

std::optional<std::string> last_fenced_block(std::string_view text) {
  std::optional<std::string> last;
  bool inside = false;
  std::string current;
  for (auto line : split_lines(text)) {
    const auto t = trim(line);
    if (!inside) {
      if (starts_with(t, "```")) {
        inside = true;
        current.clear();
      }
    } else if (t == "```") {
      inside = false;
      if (!current.empty() && current.back() == '\n') current.pop_back();
      last = current;
    } else {
      std::string_view body = line;
      if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
      current += body;
      current += '\n';
    }
  }
  return last;
}

std::string extract_code(std::string_view response) {
  if (auto block = last_fenced_block(response)) return *block;
  std::size_t pos = 0;
  while (pos < response.size()) {
    if (starts_with(response.substr(pos), "def solve")) return std::string(response.substr(pos));
    auto nl = response.find('\n', pos);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  throw NoCodeFound();
}

}  // namespace aupair
