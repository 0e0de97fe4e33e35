#include "aupair/pairgen.hpp"

#include <algorithm>
#include <numeric>

#include "aupair/digest.hpp"
#include "aupair/error.hpp"
#include "aupair/json_io.hpp"
#include "aupair/random.hpp"

namespace aupair {

GenerationRequest make_request(std::string prompt, std::string tag, const GenerationSettings& gen,
                               RequestContext context) {
  GenerationRequest r;
  r.prompt = std::move(prompt);
  r.temperature = gen.temperature;
  r.max_tokens = gen.max_tokens;
  r.stop_sequences = gen.stop_sequences;
  r.tag = std::move(tag);
  r.context = std::move(context);
  return r;
}

Attempt score_response(const std::string& response, std::string attempt_id, const Problem& problem,
                       const CodeScorer& scorer, std::optional<std::string> parent) {
  std::string code;
  try {
    code = extract_code(response);
  } catch (const NoCodeFound&) {
    Attempt empty;
    empty.id = std::move(attempt_id);
    empty.parent_attempt = std::move(parent);
    return empty;
  }
  return scorer.score_attempt(std::move(attempt_id), std::move(code), problem, std::move(parent));
}

CurationResult curate_guesses(const std::vector<Problem>& problems, Gateway& gateway,
                              Budget& budget, const CodeScorer& scorer,
                              const GenerationSettings& gen) {
  if (budget.remaining() < static_cast<std::int64_t>(problems.size()))
    throw BudgetExhausted("curation needs " + std::to_string(problems.size()) +
                          " calls but only " + std::to_string(budget.remaining()) + " remain");
  CurationResult out;
  out.report.total = problems.size();
  double score_sum = 0.0;
  for (const auto& p : problems) {
    RequestContext ctx;
    ctx.problem_id = p.id;
    const auto record = gateway.generate(make_request(build_guess_prompt(p), "guess", gen, ctx), budget);
    Attempt guess = score_response(record.response_text, "guess/" + p.id, p, scorer, std::nullopt);
    if (guess.solved()) {
      ++out.report.solved_and_dropped;
      continue;
    }
    if (guess.code.empty()) ++out.report.generation_failures;
    score_sum += guess.score;
    out.curated.push_back({p, std::move(guess)});
  }
  out.report.retained = out.curated.size();
  out.report.mean_initial_score =
      out.curated.empty() ? 0.0 : score_sum / static_cast<double>(out.curated.size());
  return out;
}

std::string curation_report_to_json(const CurationReport& r) {
  return json{{"total", r.total},
              {"solved_and_dropped", r.solved_and_dropped},
              {"retained", r.retained},
              {"generation_failures", r.generation_failures},
              {"mean_initial_score", r.mean_initial_score}}
             .dump(2) +
         "\n";
}

// ---------------------------------------------------------------------------

namespace {

std::string content_key(const CandidatePair& p) {
  return p.problem_id() + "\n" + sha256_hex(p.guess().code) + "\n" + sha256_hex(p.fix().code);
}

}  // namespace

bool PairStore::add(CandidatePair pair) {
  if (by_id_.count(pair.id())) throw ValidationError("duplicate pair id '" + pair.id() + "'");
  const auto key = content_key(pair);
  if (content_keys_.count(key)) return false;
  const std::size_t idx = pairs_.size();
  content_keys_.emplace(key, idx);
  by_id_.emplace(pair.id(), idx);
  by_problem_[pair.problem_id()].push_back(idx);
  pairs_.push_back(std::move(pair));
  return true;
}

const CandidatePair& PairStore::by_id(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw ValidationError("unknown pair id '" + id + "'");
  return pairs_[it->second];
}

std::vector<const CandidatePair*> PairStore::for_problem(const std::string& problem_id) const {
  std::vector<const CandidatePair*> out;
  if (auto it = by_problem_.find(problem_id); it != by_problem_.end())
    for (auto i : it->second) out.push_back(&pairs_[i]);
  return out;
}

void PairStore::save(const std::filesystem::path& path) const {
  std::vector<json> lines;
  for (const auto& p : pairs_) lines.push_back(pair_to_json(p));
  write_file_atomic(path, to_jsonl(lines));
}

PairStore PairStore::load(const std::filesystem::path& path) {
  PairStore store;
  for_each_jsonl(path, [&](std::size_t, const json& j) { store.add(pair_from_json(j)); });
  return store;
}

std::string_view to_string(IterationOutcome o) {
  switch (o) {
    case IterationOutcome::no_improvement: return "no_improvement";
    case IterationOutcome::duplicate: return "duplicate";
    case IterationOutcome::added_imperfect: return "added_imperfect";
    case IterationOutcome::added_perfect: return "added_perfect";
  }
  return "unknown";
}

json event_to_json(const PairGenEvent& e) {
  return json{{"iteration", e.iteration},
              {"call_index", e.call_index},
              {"problem_id", e.problem_id},
              {"guess_id", e.guess_id},
              {"guess_score", e.guess_score},
              {"fix_score", e.fix_score},
              {"extraction_failed", e.extraction_failed},
              {"outcome", std::string(to_string(e.outcome))},
              {"context_pair_ids", e.context_pair_ids},
              {"instances_after", e.instances_after},
              {"dataset_size_after", e.dataset_size_after}};
}

PairGenResult generate_pairs(const std::vector<CuratedProblem>& train, Gateway& gateway,
                             Budget& budget, const CodeScorer& scorer,
                             const PairGenOptions& options) {
  struct Instance {
    std::size_t problem;
    Attempt guess;
  };
  for (const auto& c : train)
    if (c.guess.solved())
      throw ValidationError("training problem '" + c.problem.id + "' already has a perfect guess");

  const ProblemIndex problems(train);
  std::vector<Instance> instances;
  for (std::size_t i = 0; i < train.size(); ++i) instances.push_back({i, train[i].guess});

  PairGenResult out;
  Rng rng(options.seed);
  for (std::int64_t it = 0; it < options.calls; ++it) {
    if (instances.empty() || budget.exhausted()) break;

    const Instance chosen = instances[rng.index(instances.size())];
    const Problem& problem = train[chosen.problem].problem;
    const std::size_t shots = std::min(options.k, out.store.size());
    std::vector<const CandidatePair*> context;
    for (auto idx : rng.sample_without_replacement(out.store.size(), shots))
      context.push_back(&out.store.at(idx));

    RequestContext ctx;
    ctx.problem_id = problem.id;
    ctx.guess_code = chosen.guess.code;
    ctx.attempt_index = it;
    for (const auto* p : context) {
      ctx.pair_ids.push_back(p->id());
      ctx.pair_problem_ids.push_back(p->problem_id());
    }
    const auto spec = make_repair_spec(context, problems, problem, chosen.guess, options.gen.style);
    GenerationRecord record;
    try {
      record = gateway.generate(
          make_request(build_repair_prompt_allow_empty(spec), "pairgen", options.gen, ctx), budget);
    } catch (const BudgetExhausted&) {
      break;
    }

    Attempt fix = score_response(record.response_text, "fix/" + std::to_string(record.call_index),
                                 problem, scorer, chosen.guess.id);
    PairGenEvent ev;
    ev.iteration = it;
    ev.call_index = record.call_index;
    ev.problem_id = problem.id;
    ev.guess_id = chosen.guess.id;
    ev.guess_score = chosen.guess.score;
    ev.fix_score = fix.score;
    ev.extraction_failed = fix.code.empty();
    ev.context_pair_ids = ctx.pair_ids;

    if (fix.score > chosen.guess.score) {
      const bool perfect = fix.solved();
      CandidatePair pair("pair/" + std::to_string(record.call_index), problem.id, chosen.guess,
                         fix, record.call_index);
      if (!out.store.add(std::move(pair))) {
        ev.outcome = IterationOutcome::duplicate;
      } else if (!perfect) {
        ev.outcome = IterationOutcome::added_imperfect;
        instances.push_back({chosen.problem, std::move(fix)});
      } else {
        ev.outcome = IterationOutcome::added_perfect;
        std::erase_if(instances, [&](const Instance& x) { return x.problem == chosen.problem; });
      }
    }
    ev.instances_after = static_cast<std::size_t>(std::count_if(
        instances.begin(), instances.end(),
        [&](const Instance& x) { return x.problem == chosen.problem; }));
    ev.dataset_size_after = instances.size();
    out.events.push_back(std::move(ev));
  }
  for (auto& inst : instances) out.remaining.push_back({train[inst.problem].problem, inst.guess});
  return out;
}

}  // namespace aupair
