#include "texmap/mrf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "texmap/error.hpp"
#include "texmap/parallel.hpp"

namespace texmap {

CostVolume build_data_costs(const QualityTable& table) {
  CostVolume costs;
  costs.faces.resize(table.faces.size());
  for (std::size_t f = 0; f < table.faces.size(); ++f) {
    const auto& entries = table.faces[f];
    double q_max = 0.0;
    for (const QualityEntry& e : entries) q_max = std::max(q_max, e.quality);
    auto& labels = costs.faces[f];
    labels.reserve(entries.size());
    for (const QualityEntry& e : entries) {
      const double cost = q_max > 0.0 ? 1.0 - e.quality / q_max : 0.0;
      labels.push_back({e.view_id, std::clamp(cost, 0.0, 1.0)});
    }
    std::sort(labels.begin(), labels.end(),
              [](const Label& a, const Label& b) { return a.view_id < b.view_id; });
  }
  return costs;
}

namespace {

struct Slot {
  FaceIndex source = 0;
  FaceIndex target = 0;
  std::size_t offset = 0;  // into the message buffer, length = labels of target
  // For each target label, index of the same view id among source labels or -1.
  std::vector<int> match;
  // Incoming slots of the source, excluding the one from target.
  std::vector<std::size_t> inputs;
};

}  // namespace

BeliefVolume lbp_solve(const AdjacencyGraph& graph, const CostVolume& costs,
                       const LbpOptions& options) {
  const std::size_t n = costs.faces.size();
  if (graph.face_count() != n) {
    throw InvariantError("adjacency graph has " + std::to_string(graph.face_count()) +
                         " faces but cost volume has " + std::to_string(n));
  }
  if (options.lambda < 0.0 || options.iterations < 1 || !(options.damping >= 0.0 && options.damping < 1.0)) {
    throw InvariantError("lbp_solve needs lambda >= 0, iterations >= 1 and damping in [0, 1)");
  }
  const auto labeled = [&](FaceIndex f) { return !costs.faces[f].empty(); };

  // Directed slots in (source, target) order; incoming[f] lists (neighbor, slot)
  // sorted by neighbor id.
  std::vector<Slot> slots;
  std::vector<std::vector<std::pair<FaceIndex, std::size_t>>> incoming(n);
  std::size_t buffer_size = 0;
  for (FaceIndex i = 0; i < n; ++i) {
    if (!labeled(i)) continue;
    for (FaceIndex j : graph.neighbors[i]) {
      if (j >= n) throw InvariantError("adjacency references a face outside the cost volume");
      if (!labeled(j)) continue;
      Slot s;
      s.source = i;
      s.target = j;
      s.offset = buffer_size;
      const auto& src = costs.faces[i];
      const auto& dst = costs.faces[j];
      s.match.assign(dst.size(), -1);
      for (std::size_t a = 0, b = 0; a < dst.size(); ++a) {
        while (b < src.size() && src[b].view_id < dst[a].view_id) ++b;
        if (b < src.size() && src[b].view_id == dst[a].view_id) s.match[a] = static_cast<int>(b);
      }
      buffer_size += dst.size();
      incoming[j].emplace_back(i, slots.size());
      slots.push_back(std::move(s));
    }
  }
  for (auto& list : incoming) std::sort(list.begin(), list.end());
  for (Slot& s : slots) {
    for (const auto& [k, slot] : incoming[s.source]) {
      if (k != s.target) s.inputs.push_back(slot);
    }
  }

  std::vector<double> previous(buffer_size, 0.0);
  std::vector<double> current(buffer_size, 0.0);
  std::vector<double> change(slots.size(), 0.0);
  const double lambda = options.lambda;
  const double damping = options.damping;

  BeliefVolume result;
  for (int iter = 0; iter < options.iterations; ++iter) {
    parallel_for(slots.size(), options.workers, [&](std::size_t si) {
      const Slot& s = slots[si];
      const auto& src = costs.faces[s.source];
      thread_local std::vector<double> h;
      h.resize(src.size());
      double h_min = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < src.size(); ++a) {
        double v = src[a].cost;
        for (std::size_t in : s.inputs) v += previous[slots[in].offset + a];
        h[a] = v;
        h_min = std::min(h_min, v);
      }
      double* out = current.data() + s.offset;
      const std::size_t len = s.match.size();
      double m_min = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < len; ++b) {
        double v = h_min + lambda;
        if (s.match[b] >= 0) v = std::min(v, h[static_cast<std::size_t>(s.match[b])]);
        out[b] = v;
        m_min = std::min(m_min, v);
      }
      double delta = 0.0;
      for (std::size_t b = 0; b < len; ++b) {
        out[b] -= m_min;
        if (damping > 0.0) out[b] = damping * previous[s.offset + b] + (1.0 - damping) * out[b];
        delta = std::max(delta, std::abs(out[b] - previous[s.offset + b]));
      }
      change[si] = delta;
    });
    previous.swap(current);
    result.iterations = iter + 1;
    result.last_change = 0.0;
    for (double c : change) result.last_change = std::max(result.last_change, c);
    if (result.last_change < options.tolerance) break;
  }

  result.faces.resize(n);
  parallel_for(n, options.workers, [&](std::size_t f) {
    const auto& labels = costs.faces[f];
    auto& out = result.faces[f];
    out = labels;
    for (std::size_t a = 0; a < labels.size(); ++a) {
      double v = labels[a].cost;
      for (const auto& [k, slot] : incoming[f]) v += previous[slots[slot].offset + a];
      out[a].cost = v;
    }
  });
  return result;
}

double total_energy(const AdjacencyGraph& graph, const CostVolume& costs, double lambda,
                    std::span<const int> labeling) {
  if (labeling.size() != costs.faces.size() || graph.face_count() != costs.faces.size()) {
    throw InvariantError("labeling, graph and cost volume sizes differ");
  }
  double energy = 0.0;
  for (std::size_t f = 0; f < costs.faces.size(); ++f) {
    const auto& labels = costs.faces[f];
    if (labels.empty()) {
      if (labeling[f] != -1) throw InvariantError("face " + std::to_string(f) + " has no labels");
      continue;
    }
    auto it = std::find_if(labels.begin(), labels.end(),
                           [&](const Label& l) { return l.view_id == labeling[f]; });
    if (it == labels.end()) {
      throw InvariantError("face " + std::to_string(f) + " assigned unlisted view " +
                           std::to_string(labeling[f]));
    }
    energy += it->cost;
  }
  for (const auto& [a, b] : graph.edges) {
    if (costs.faces[a].empty() || costs.faces[b].empty()) continue;
    if (labeling[a] != labeling[b]) energy += lambda;
  }
  return energy;
}

namespace {

std::vector<Label> ranked(const std::vector<Label>& labels) {
  std::vector<Label> out = labels;
  std::sort(out.begin(), out.end(), [](const Label& a, const Label& b) {
    return a.cost != b.cost ? a.cost < b.cost : a.view_id < b.view_id;
  });
  return out;
}

}  // namespace

CandidateSet extract_top_n(const BeliefVolume& beliefs, std::size_t n, double ratio) {
  if (n < 1 || !(ratio >= 0.0 && ratio <= 1.0)) {
    throw InvariantError("extract_top_n needs n >= 1 and ratio in [0, 1]");
  }
  CandidateSet out;
  out.faces.resize(beliefs.faces.size());
  for (std::size_t f = 0; f < beliefs.faces.size(); ++f) {
    std::vector<Label> r = ranked(beliefs.faces[f]);
    if (r.size() > n) r.resize(n);
    for (std::size_t i = 1; i < r.size(); ++i) {
      if ((r[i - 1].cost + kRatioEpsilon) / (r[i].cost + kRatioEpsilon) < ratio) {
        r.resize(i);
        break;
      }
    }
    out.faces[f] = std::move(r);
  }
  return out;
}

std::vector<int> argmin_labeling(const BeliefVolume& beliefs) {
  std::vector<int> out(beliefs.faces.size(), -1);
  for (std::size_t f = 0; f < beliefs.faces.size(); ++f) {
    const auto& labels = beliefs.faces[f];
    if (labels.empty()) continue;
    out[f] = ranked(labels).front().view_id;
  }
  return out;
}

void write_labels_csv(const std::filesystem::path& path, const CandidateSet& candidates) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write label dump: " + path.string());
  out.precision(17);
  out << "face,rank,view,cost\n";
  for (std::size_t f = 0; f < candidates.faces.size(); ++f) {
    const auto& c = candidates.faces[f];
    for (std::size_t r = 0; r < c.size(); ++r) {
      out << f << ',' << r + 1 << ',' << c[r].view_id << ',' << c[r].cost << '\n';
    }
  }
}

}  // namespace texmap
