#include "aupair/extraction.hpp"

#include <atomic>
#include <bit>
#include <cstring>
#include <set>
#include <numeric>
#include <thread>

#include "aupair/error.hpp"
#include "aupair/json_io.hpp"
#include "aupair/random.hpp"

namespace aupair {

namespace {

constexpr char kMagic[8] = {'A', 'U', 'P', 'A', 'I', 'R', 'F', 'Q'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

FixQualityMatrix::FixQualityMatrix(std::vector<std::string> row_ids,
                                   std::vector<std::string> col_ids)
    : row_ids_(std::move(row_ids)),
      col_ids_(std::move(col_ids)),
      values_(row_ids_.size() * col_ids_.size(), 0.0) {}

FixQualityMatrix FixQualityMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  std::vector<std::string> rids, cids;
  for (std::size_t i = 0; i < rows.size(); ++i) rids.push_back("r" + std::to_string(i));
  for (std::size_t j = 0; j < cols; ++j) cids.push_back("c" + std::to_string(j));
  FixQualityMatrix m(std::move(rids), std::move(cids));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ValidationError("ragged matrix rows");
    for (std::size_t j = 0; j < cols; ++j) m.set(i, j, rows[i][j]);
  }
  return m;
}

void FixQualityMatrix::set(std::size_t i, std::size_t j, double v) {
  if (!(v >= 0.0 && v <= 1.0))
    throw ValidationError("matrix entry " + std::to_string(v) + " outside [0,1]");
  values_.at(i * cols() + j) = v;
}

std::string serialize_matrix(const FixQualityMatrix& m) {
  const json header{{"rows", m.rows()},
                    {"cols", m.cols()},
                    {"row_ids", m.row_ids()},
                    {"col_ids", m.col_ids()},
                    {"provenance", m.provenance},
                    {"dtype", "float64-le"},
                    {"layout", "row-major"}};
  const std::string h = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put_u64(out, h.size());
  out += h;
  for (double v : m.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

FixQualityMatrix deserialize_matrix(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw ValidationError("not a fix-quality matrix file");
  const std::uint64_t hlen = get_u64(bytes, 8);
  if (bytes.size() < 16 + hlen) throw ValidationError("truncated matrix header");
  json header;
  try {
    header = json::parse(bytes.substr(16, hlen));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed matrix header: ") + e.what());
  }
  FixQualityMatrix m(header.at("row_ids").get<std::vector<std::string>>(),
                     header.at("col_ids").get<std::vector<std::string>>());
  m.provenance = header.value("provenance", json::object());
  const std::size_t n = m.rows() * m.cols();
  if (bytes.size() != 16 + hlen + 8 * n) throw ValidationError("matrix payload size mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    const double v = std::bit_cast<double>(get_u64(bytes, 16 + hlen + 8 * k));
    m.set(k / m.cols(), k % m.cols(), v);
  }
  return m;
}

void save_matrix(const std::filesystem::path& path, const FixQualityMatrix& m) {
  write_file_atomic(path, serialize_matrix(m));
}

FixQualityMatrix load_matrix(const std::filesystem::path& path) {
  return deserialize_matrix(read_file(path));
}

FixQualityMatrix compute_fix_quality_matrix(const PairStore& pairs, const ProblemIndex& pair_problems,
                                            const std::vector<CuratedProblem>& val,
                                            Gateway& gateway, Budget& budget,
                                            const CodeScorer& scorer,
                                            const MatrixOptions& options) {
  std::vector<std::string> rids, cids;
  for (const auto& p : pairs.pairs()) rids.push_back(p.id());
  for (const auto& c : val) cids.push_back(c.problem.id);
  FixQualityMatrix m(std::move(rids), std::move(cids));

  const std::int64_t cells = static_cast<std::int64_t>(m.rows() * m.cols());
  if (budget.remaining() < cells)
    throw BudgetExhausted("fix-quality matrix needs " + std::to_string(cells) +
                          " calls but only " + std::to_string(budget.remaining()) + " remain");
  for (const auto& p : pairs.pairs()) pair_problems.at(p.problem_id());

  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::int64_t cell = next++; cell < cells; cell = next++) {
      try {
        const auto i = static_cast<std::size_t>(cell) / m.cols();
        const auto j = static_cast<std::size_t>(cell) % m.cols();
        const CandidatePair& pair = pairs.at(i);
        const CuratedProblem& target = val[j];
        RequestContext ctx;
        ctx.problem_id = target.problem.id;
        ctx.pair_ids = {pair.id()};
        ctx.pair_problem_ids = {pair.problem_id()};
        ctx.guess_code = target.guess.code;
        const auto spec =
            make_repair_spec({&pair}, pair_problems, target.problem, target.guess, options.gen.style);
        const auto record = gateway.generate(
            make_request(build_repair_prompt(spec), "matrix", options.gen, ctx), budget);
        const auto fix = score_response(record.response_text,
                                        "matrix/" + std::to_string(record.call_index),
                                        target.problem, scorer, target.guess.id);
        m.set(i, j, fix.score);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cells;
      }
    }
  };
  const auto threads = std::min<std::size_t>(std::max<std::size_t>(1, options.parallelism),
                                             static_cast<std::size_t>(std::max<std::int64_t>(1, cells)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return m;
}

AuPairList extract_aupairs(const FixQualityMatrix& m, double tolerance, ClipMode clip) {
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  AuPairList out;
  out.tolerance = tolerance;
  const std::size_t rows = m.rows(), cols = m.cols();
  if (rows == 0 || cols == 0) return out;

  std::vector<double> residual = m.values();
  std::vector<double> means(rows);
  for (;;) {
    for (std::size_t i = 0; i < rows; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < cols; ++j) sum += residual[i * cols + j];
      means[i] = sum / static_cast<double>(cols);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows; ++i)
      if (means[i] > means[best]) best = i;
    if (means[best] < tolerance) break;
    out.entries.push_back({best, m.row_ids()[best], means[best]});

    const std::vector<double> chosen(residual.begin() + static_cast<std::ptrdiff_t>(best * cols),
                                     residual.begin() + static_cast<std::ptrdiff_t>((best + 1) * cols));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        double& v = residual[i * cols + j];
        v -= chosen[j];
        if (clip == ClipMode::clip) v = std::clamp(v, 0.0, 1.0);
      }
  }
  return out;
}

std::string aupairs_to_jsonl(const AuPairList& list) {
  std::vector<json> lines;
  for (std::size_t r = 0; r < list.entries.size(); ++r) {
    const auto& e = list.entries[r];
    lines.push_back(json{{"rank", r + 1},
                         {"pair_id", e.pair_id},
                         {"row", e.row},
                         {"marginal_gain", e.marginal_gain},
                         {"tolerance", list.tolerance}});
  }
  return to_jsonl(lines);
}

AuPairList load_aupairs(const std::filesystem::path& path) {
  AuPairList list;
  bool first = true;
  for_each_jsonl(path, [&](std::size_t, const json& j) {
    if (j.at("rank").get<std::size_t>() != list.entries.size() + 1)
      throw ValidationError("aupair ranks out of order");
    list.entries.push_back({j.at("row").get<std::size_t>(), j.at("pair_id").get<std::string>(),
                            j.at("marginal_gain").get<double>()});
    if (first) list.tolerance = j.value("tolerance", list.tolerance);
    first = false;
  });
  return list;
}

std::vector<const CandidatePair*> resolve_aupairs(const AuPairList& list, const PairStore& store) {
  std::vector<const CandidatePair*> out;
  for (const auto& e : list.entries) out.push_back(&store.by_id(e.pair_id));
  return out;
}

std::vector<const CandidatePair*> random_pair_baseline(const PairStore& store, std::size_t n,
                                                       std::uint64_t seed, bool dedup) {
  std::size_t available = store.size();
  if (dedup) {
    std::set<std::string> problems;
    for (const auto& p : store.pairs()) problems.insert(p.problem_id());
    available = problems.size();
  }
  if (n > available)
    throw ValidationError("random baseline wants " + std::to_string(n) + " pairs but only " +
                          std::to_string(available) + " are eligible");
  Rng rng(seed);
  std::vector<std::size_t> order(store.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<const CandidatePair*> out;
  std::set<std::string> used;
  for (auto idx : order) {
    if (out.size() == n) break;
    const auto& p = store.at(idx);
    if (dedup && !used.insert(p.problem_id()).second) continue;
    out.push_back(&p);
  }
  return out;
}

}  // namespace aupair
