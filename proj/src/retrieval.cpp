#include "trinoloc/retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>
#include <unordered_set>

namespace trinoloc {

namespace {

FrameRetrieval localize_with_pooler(const QueryFrame& frame, const LocationLibrary& lib,
                                    const VladPooler& pooler, const AdaptiveWeight& alpha,
                                    int shortlist_n, int checks, int ranked_k) {
  const auto start = std::chrono::steady_clock::now();

  if (lib.size() == 0) throw ValidationError("library holds no references");
  if (shortlist_n < 1) throw ValidationError("shortlist size must be >= 1");
  if (ranked_k < 1) throw ValidationError("ranked prefix size must be >= 1");
  for (View v : kViews) {
    const auto& map = frame.view(v);
    validate_feature_map(map);
    if (map.source_view != v)
      throw ValidationError("frame view slot " + std::string(view_name(v)) +
                            " holds a " + std::string(view_name(map.source_view)) +
                            " map");
    if (map.dim() != lib.metadata().local_dim ||
        map.point_count() != lib.metadata().grid_rows * lib.metadata().grid_cols)
      throw ValidationError(
          "frame " + std::string(view_name(v)) + " view shape " +
          std::to_string(map.dim()) + "x" + std::to_string(map.point_count()) +
          " does not match library shape " + std::to_string(lib.metadata().local_dim) +
          "x" + std::to_string(lib.metadata().grid_rows * lib.metadata().grid_cols));
  }

  // Shortlists per view, merged by id union so one ambiguous view cannot
  // evict the true reference.
  std::unordered_set<std::uint32_t> candidate_ids;
  for (View v : kViews) {
    const DescriptorVector pooled = pooler.pool(frame.view(v));
    for (const auto& neighbor : knn_search(lib.tree(v), pooled.values, shortlist_n, checks))
      candidate_ids.insert(neighbor.id);
  }

  CandidateBuffer buffer;
  buffer.entries.reserve(candidate_ids.size());
  for (const auto id : candidate_ids) {
    const ReferenceEntry& ref = lib.entry(id);
    const VotingCost s_f = voting_cost(frame.view(View::front), ref.features_view(View::front));
    const VotingCost s_l = voting_cost(frame.view(View::left), ref.features_view(View::left));
    const VotingCost s_r = voting_cost(frame.view(View::right), ref.features_view(View::right));
    CandidateScore score;
    score.id = id;
    score.per_view_costs = {s_f.value, s_l.value, s_r.value};
    score.total_cost = total_cost(s_f, s_l, s_r, alpha);
    buffer.entries.push_back(score);
  }

  std::sort(buffer.entries.begin(), buffer.entries.end(),
            [](const CandidateScore& a, const CandidateScore& b) {
              if (a.total_cost != b.total_cost) return a.total_cost < b.total_cost;
              return a.id < b.id;
            });

  FrameRetrieval out;
  const CandidateScore& best = buffer.entries.front();
  out.best.reference_id = best.id;
  out.best.predicted = lib.entry(best.id).geotag;
  out.best.total_cost = best.total_cost;
  out.best.per_view_costs = best.per_view_costs;
  out.best.shortlist_size = buffer.entries.size();
  const std::size_t keep = std::min<std::size_t>(buffer.entries.size(),
                                                 static_cast<std::size_t>(ranked_k));
  out.ranked.assign(buffer.entries.begin(),
                    buffer.entries.begin() + static_cast<std::ptrdiff_t>(keep));

  const auto end = std::chrono::steady_clock::now();
  out.best.elapsed_ms = std::chrono::duration<double, std::milli>(end - start).count();
  return out;
}

}  // namespace

RetrievalResult localize_frame(const QueryFrame& frame, const LocationLibrary& lib,
                               const AdaptiveWeight& alpha, int shortlist_n, int checks) {
  return localize_frame_ranked(frame, lib, alpha, shortlist_n, checks, 1).best;
}

FrameRetrieval localize_frame_ranked(const QueryFrame& frame, const LocationLibrary& lib,
                                     const AdaptiveWeight& alpha, int shortlist_n,
                                     int checks, int ranked_k) {
  const VladPooler pooler = lib.make_pooler();
  return localize_with_pooler(frame, lib, pooler, alpha, shortlist_n, checks, ranked_k);
}

SequenceRetrieval localize_sequence(const std::vector<QueryFrame>& frames,
                                    const LocationLibrary& lib,
                                    const AdaptiveWeight& alpha, int shortlist_n,
                                    int checks, int threads, int ranked_k) {
  if (threads < 1) throw ValidationError("thread count must be >= 1");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].timestamp < frames[i - 1].timestamp)
      throw ValidationError("frame timestamps decrease at frame " + std::to_string(i));
  }

  SequenceRetrieval out;
  out.frames.resize(frames.size());
  if (frames.empty()) return out;

  const VladPooler pooler = lib.make_pooler();
  std::atomic<std::size_t> next{0};
  std::vector<std::string> failures(frames.size());
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= frames.size()) return;
      try {
        out.frames[i] = localize_with_pooler(frames[i], lib, pooler, alpha, shortlist_n,
                                             checks, ranked_k);
      } catch (const Error& e) {
        failures[i] = e.what();
      }
    }
  };

  const int worker_count = std::min<int>(threads, static_cast<int>(frames.size()));
  if (worker_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(worker_count));
    for (int t = 0; t < worker_count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty())
      throw ValidationError("frame " + std::to_string(i) + ": " + failures[i]);
  }

  std::vector<double> elapsed;
  elapsed.reserve(frames.size());
  double sum = 0.0;
  for (const auto& f : out.frames) {
    elapsed.push_back(f.best.elapsed_ms);
    sum += f.best.elapsed_ms;
  }
  std::sort(elapsed.begin(), elapsed.end());
  out.stats.frames = frames.size();
  out.stats.mean_ms = sum / static_cast<double>(frames.size());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(elapsed.size())));
  out.stats.p95_ms = elapsed[std::min(elapsed.size() - 1, rank == 0 ? 0 : rank - 1)];
  return out;
}

}  // namespace trinoloc
