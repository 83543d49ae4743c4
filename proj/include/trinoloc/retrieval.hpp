#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "trinoloc/library.hpp"
#include "trinoloc/voting.hpp"

namespace trinoloc {

/// One query instant: the three-view feature maps and a frame time.
struct QueryFrame {
  std::array<LocalFeatureMap, 3> views;  // indexed by View
  double timestamp = 0.0;

  const LocalFeatureMap& view(View v) const { return views[static_cast<std::size_t>(v)]; }
};

/// Scored candidate accumulated while searching the library.
struct CandidateScore {
  std::uint32_t id = 0;
  double total_cost = 0.0;
  std::array<double, 3> per_view_costs = {0.0, 0.0, 0.0};  // indexed by View
};

/// Shortlisted candidates with their fused costs; argmin source for one frame.
struct CandidateBuffer {
  std::vector<CandidateScore> entries;
};

struct RetrievalResult {
  std::uint32_t reference_id = 0;
  GeoTag predicted;
  double total_cost = 0.0;
  std::array<double, 3> per_view_costs = {0.0, 0.0, 0.0};  // indexed by View
  std::size_t shortlist_size = 0;
  double elapsed_ms = 0.0;
};

/// RetrievalResult plus the cost-ranked candidate prefix used by evaluation.
struct FrameRetrieval {
  RetrievalResult best;
  std::vector<CandidateScore> ranked;  // ascending cost, ties by smaller id
};

/// Localizes one frame: pools each view, shortlists `shortlist_n` candidates
/// per view tree (bounded by `checks` leaf visits; 0 = exact), unions the
/// candidate ids, votes every candidate on the stored feature maps and
/// returns the minimum-total-cost reference, ties broken by smaller id.
RetrievalResult localize_frame(const QueryFrame& frame, const LocationLibrary& lib,
                               const AdaptiveWeight& alpha, int shortlist_n,
                               int checks = 0);

/// As localize_frame, but also returns the top `ranked_k` candidates.
FrameRetrieval localize_frame_ranked(const QueryFrame& frame, const LocationLibrary& lib,
                                     const AdaptiveWeight& alpha, int shortlist_n,
                                     int checks = 0, int ranked_k = 1);

struct SequenceStats {
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  std::size_t frames = 0;
};

struct SequenceRetrieval {
  std::vector<FrameRetrieval> frames;
  SequenceStats stats;
};

/// Independent per-frame localization over an ordered sequence. Output order
/// always matches input order; `threads` only bounds internal parallelism.
SequenceRetrieval localize_sequence(const std::vector<QueryFrame>& frames,
                                    const LocationLibrary& lib,
                                    const AdaptiveWeight& alpha, int shortlist_n,
                                    int checks = 0, int threads = 1, int ranked_k = 1);

}  // namespace trinoloc
