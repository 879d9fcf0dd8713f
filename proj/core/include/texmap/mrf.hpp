#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "texmap/mesh.hpp"
#include "texmap/quality.hpp"

namespace texmap {

// A view label with an associated cost. Labels are global view ids.
struct Label {
  int view_id = 0;
  double cost = 0.0;
  friend bool operator==(const Label&, const Label&) = default;
};

// Per face, labels sorted by view id. A face with no labels is untextured and
// takes no part in the MRF.
struct CostVolume {
  std::vector<std::vector<Label>> faces;
};

// E_data(F, l) = 1 - Q(F, l) / max_l' Q(F, l'); all-zero Q gives cost 0.
CostVolume build_data_costs(const QualityTable& table);

struct LbpOptions {
  double lambda = 0.5;
  int iterations = 50;
  // Fraction of the previous message kept on each update, in [0, 1). Zero is
  // the plain synchronous update; synchronous min-sum can oscillate on
  // loops, and a small value makes it settle.
  double damping = 0.0;
  double tolerance = 1e-9;  // stop early when no message entry moves more
  int workers = 1;
};

// Final per-label costs C = E_data + sum of incoming messages, labels in the
// same order as the CostVolume.
struct BeliefVolume {
  std::vector<std::vector<Label>> faces;
  int iterations = 0;
  double last_change = 0.0;
};

// Synchronous min-sum loopy belief propagation with a Potts term lambda *
// [view ids differ]. Messages start at zero and are shifted to a zero minimum
// after every update. Results are bit-identical for any worker count.
// Throws InvariantError if the graph and cost volume disagree on face count.
BeliefVolume lbp_solve(const AdjacencyGraph& graph, const CostVolume& costs,
                       const LbpOptions& options = {});

// Sum of data costs plus lambda per adjacency edge whose labels differ.
// labeling[f] is a view id, or -1 for faces without labels. Edges touching an
// unlabeled face are ignored. Throws InvariantError on an unlisted label.
double total_energy(const AdjacencyGraph& graph, const CostVolume& costs, double lambda,
                    std::span<const int> labeling);

// Ranked candidates per face, ascending cost (smaller view id on ties).
struct CandidateSet {
  std::vector<std::vector<Label>> faces;
};

inline constexpr double kRatioEpsilon = 1e-6;

// Keeps at most n labels, then truncates at the first i >= 1 where
// (c[i-1] + eps) / (c[i] + eps) < ratio.
CandidateSet extract_top_n(const BeliefVolume& beliefs, std::size_t n, double ratio);

// Per face argmin view id (smaller id on ties), -1 for unlabeled faces.
std::vector<int> argmin_labeling(const BeliefVolume& beliefs);

// face,rank,view,cost rows.
void write_labels_csv(const std::filesystem::path& path, const CandidateSet& candidates);

}  // namespace texmap
