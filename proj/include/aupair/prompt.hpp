#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aupair/types.hpp"

namespace aupair {

enum class PromptStyle { naive, instruction, instruction_and_score };

std::string_view to_string(PromptStyle s);
PromptStyle prompt_style_from_string(std::string_view s);

// Bumped whenever the self-repair prompt wording changes.
inline constexpr std::string_view kSelfRepairPromptVersion = "self-repair-v1";

inline constexpr std::string_view kExampleSeparator = "=======================================";

// One in-context (question, bad code, good code) example.
struct PromptExample {
  std::string pair_id;
  std::string question;
  std::string bad_code;
  double bad_score = 0.0;
  std::string good_code;
  double good_score = 0.0;
};

PromptExample example_from_pair(const CandidatePair& pair, const ProblemIndex& problems);

struct RepairPromptSpec {
  std::vector<PromptExample> in_context;
  std::string target_question;
  std::string target_code;
  double target_score = 0.0;
  PromptStyle style = PromptStyle::instruction_and_score;
  int target_fix_score_rendered = 100;
};

RepairPromptSpec make_repair_spec(const std::vector<const CandidatePair*>& pairs,
                                  const ProblemIndex& pair_problems, const Problem& target,
                                  const Attempt& target_guess,
                                  PromptStyle style = PromptStyle::instruction_and_score);

// 100 * fraction, rounded half up.
int render_score(double fraction);

// Wraps code in a python fence. Code is emitted verbatim; a missing final
// newline is added before the closing fence.
std::string fence_code(std::string_view code);

std::string build_guess_prompt(const Problem& problem);

// k-shot repair prompt; throws ValidationError when there are no in-context examples.
std::string build_repair_prompt(const RepairPromptSpec& spec);

// Same layout with any number of examples, including none (best-of-N and the
// first pair-generation calls use it with an empty example list).
std::string build_repair_prompt_allow_empty(const RepairPromptSpec& spec);

std::string build_feedback_prompt(const Problem& problem, const Attempt& guess);
std::string build_feedback_repair_prompt(const Problem& problem, const Attempt& guess,
                                         std::string_view feedback);

std::optional<std::string> last_fenced_block(std::string_view text);

// Last fenced block, else the suffix starting at the first `def solve` line.
// Throws NoCodeFound otherwise.
std::string extract_code(std::string_view response);

}  // namespace aupair
