#pragma once
// Statistical distortion: joint histograms over complete observation tuples
// and the exact Earth Mover's Distance between them.
//
// The transport solver is successive-shortest-paths with node potentials on
// the bipartite transportation graph. Because the ground distance is a metric,
// mass shared between identical bins is kept in place and only the surplus /
// deficit per bin enters the solve.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "cleanbench/core.hpp"

namespace cleanbench {

// ---------------------------------------------------------------------------
// Binning
// ---------------------------------------------------------------------------

// Equal-width bins per dimension over a fixed support. A dimension whose
// support collapses to a point is degenerate: every value maps to bin 0 and
// the dimension contributes nothing to the ground distance.
struct BinningSpec {
  std::vector<int> bins;
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dims() const { return bins.size(); }

  bool degenerate(std::size_t d) const { return !(hi[d] > lo[d]); }

  double bin_width(std::size_t d) const {
    return degenerate(d) ? 0.0 : (hi[d] - lo[d]) / static_cast<double>(bins[d]);
  }

  int effective_bins(std::size_t d) const { return degenerate(d) ? 1 : bins[d]; }

  int bin_index(std::size_t d, double x) const {
    if (degenerate(d)) return 0;
    const int idx = static_cast<int>(std::floor((x - lo[d]) / bin_width(d)));
    return std::clamp(idx, 0, bins[d] - 1);  // last bin closed at hi
  }

  double center(std::size_t d, int idx) const {
    return degenerate(d) ? lo[d] : lo[d] + (static_cast<double>(idx) + 0.5) * bin_width(d);
  }

  void validate() const {
    if (bins.empty()) throw Error("binning spec needs at least one dimension");
    for (std::size_t d = 0; d < dims(); ++d) {
      if (bins[d] < 2) throw Error("binning spec needs at least 2 bins per dimension");
      if (hi[d] < lo[d]) throw Error("binning spec support has hi < lo");
    }
  }

  bool operator==(const BinningSpec&) const = default;
};

// Euclidean distance between bin centers after rescaling each dimension by
// the reciprocal of its support range.
inline double ground_distance(std::span<const double> a, std::span<const double> b,
                              const BinningSpec& spec) {
  double sum = 0.0;
  for (std::size_t d = 0; d < spec.dims(); ++d) {
    if (spec.degenerate(d)) continue;
    const double delta = (a[d] - b[d]) / (spec.hi[d] - spec.lo[d]);
    sum += delta * delta;
  }
  return std::sqrt(sum);
}

// ---------------------------------------------------------------------------
// Point pools and histograms
// ---------------------------------------------------------------------------

// Row-major list of complete v-tuples.
struct TupleList {
  std::size_t dims = 0;
  std::vector<double> data;

  std::size_t count() const { return dims == 0 ? 0 : data.size() / dims; }

  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * dims, dims};
  }

  void push(std::span<const double> tuple) {
    data.insert(data.end(), tuple.begin(), tuple.end());
  }
};

// All fully observed tuples of a dataset, pooled across series and time.
inline TupleList pool_complete_tuples(const Dataset& ds) {
  TupleList pool;
  pool.dims = ds.width();
  std::vector<double> tuple(pool.dims);
  for (const auto& s : ds.series) {
    for (const auto& obs : s.observations) {
      bool complete = true;
      for (std::size_t a = 0; a < tuple.size(); ++a) {
        if (!obs.values[a]) {
          complete = false;
          break;
        }
        tuple[a] = *obs.values[a];
      }
      if (complete) pool.push(tuple);
    }
  }
  return pool;
}

struct HistogramBin {
  std::int64_t flat = 0;  // row-major joint bin id
  std::vector<double> center;
  double mass = 0.0;
};

// Sparse normalized histogram; empty bins are omitted and masses sum to 1.
struct Histogram {
  BinningSpec spec;
  std::vector<HistogramBin> bins;  // sorted by flat id
};

inline Histogram build_histogram(const TupleList& points, const BinningSpec& spec) {
  spec.validate();
  if (points.count() == 0) throw Error("no complete observations");
  if (points.dims != spec.dims())
    throw Error("point dimensionality does not match binning spec");

  std::map<std::int64_t, std::int64_t> counts;
  for (std::size_t r = 0; r < points.count(); ++r) {
    const auto row = points.row(r);
    std::int64_t flat = 0;
    for (std::size_t d = 0; d < spec.dims(); ++d)
      flat = flat * spec.effective_bins(d) + spec.bin_index(d, row[d]);
    ++counts[flat];
  }

  Histogram hist;
  hist.spec = spec;
  hist.bins.reserve(counts.size());
  const double total = static_cast<double>(points.count());
  for (const auto& [flat, count] : counts) {
    HistogramBin bin;
    bin.flat = flat;
    bin.mass = static_cast<double>(count) / total;
    bin.center.resize(spec.dims());
    std::int64_t rest = flat;
    for (std::size_t d = spec.dims(); d-- > 0;) {
      const int nb = spec.effective_bins(d);
      bin.center[d] = spec.center(d, static_cast<int>(rest % nb));
      rest /= nb;
    }
    hist.bins.push_back(std::move(bin));
  }
  return hist;
}

// Convenience for hand-built histograms in tests and tools: explicit masses on
// a dense 1-D grid (zero masses are dropped, the rest normalized).
inline Histogram histogram_from_masses(const BinningSpec& spec,
                                       std::span<const double> masses) {
  spec.validate();
  if (spec.dims() != 1) throw Error("histogram_from_masses expects a 1-D spec");
  if (static_cast<int>(masses.size()) != spec.effective_bins(0))
    throw Error("mass vector length does not match bin count");
  double total = 0.0;
  for (double m : masses) {
    if (m < 0.0) throw Error("histogram masses must be non-negative");
    total += m;
  }
  if (total <= 0.0) throw Error("histogram has no mass");
  Histogram hist;
  hist.spec = spec;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    if (masses[i] == 0.0) continue;
    hist.bins.push_back(
        {static_cast<std::int64_t>(i), {spec.center(0, static_cast<int>(i))},
         masses[i] / total});
  }
  return hist;
}

inline void dump_histogram_csv(const Histogram& hist, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (std::size_t d = 0; d < hist.spec.dims(); ++d)
    out << "center" << (d + 1) << ',';
  out << "mass\n";
  for (const auto& bin : hist.bins) {
    for (double c : bin.center) out << format_double(c) << ',';
    out << format_double(bin.mass) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Exact transportation solve
// ---------------------------------------------------------------------------

// Optimal flow between two histograms. Arc endpoints index into the source
// and sink histograms' bin lists; row sums equal source masses and column
// sums equal sink masses.
struct FlowSolution {
  struct Arc {
    std::size_t from = 0;
    std::size_t to = 0;
    double amount = 0.0;
  };
  std::vector<Arc> flows;
  double objective = 0.0;
};

namespace detail {

// Successive shortest paths with potentials on a dense bipartite
// transportation problem. Supplies and demands must balance.
class TransportSolver {
 public:
  TransportSolver(std::vector<double> supply, std::vector<double> demand,
                  std::vector<double> cost /* m x n row-major */)
      : supply_(std::move(supply)),
        demand_(std::move(demand)),
        cost_(std::move(cost)),
        m_(supply_.size()),
        n_(demand_.size()),
        flow_(m_ * n_, 0.0),
        pi_(m_ + n_, 0.0) {}

  void solve() {
    const std::size_t max_iters = 64 * (m_ + n_) + 4096;
    std::size_t iters = 0;
    while (true) {
      double remaining_supply = 0.0, remaining_demand = 0.0;
      for (double s : supply_) remaining_supply += s;
      for (double d : demand_) remaining_demand += d;
      if (remaining_supply <= kBalanceEps || remaining_demand <= kBalanceEps) break;
      if (++iters > max_iters)
        throw Error("transport solver failed to converge");
      augment_once();
    }
  }

  double flow(std::size_t i, std::size_t j) const { return flow_[i * n_ + j]; }
  double cost(std::size_t i, std::size_t j) const { return cost_[i * n_ + j]; }
  std::size_t sources() const { return m_; }
  std::size_t sinks() const { return n_; }

 private:
  static constexpr double kBalanceEps = 1e-12;
  static constexpr double kSnapEps = 1e-14;
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  // One shortest augmenting path from the supply side to any sink with
  // remaining demand; returns the amount moved.
  double augment_once() {
    const std::size_t nodes = m_ + n_;
    std::vector<double> dist(nodes, kInf);
    std::vector<int> parent(nodes, -1);
    std::vector<std::uint8_t> settled(nodes, 0);

    for (std::size_t i = 0; i < m_; ++i) {
      if (supply_[i] > 0.0) dist[i] = std::max(0.0, -pi_[i]);
    }

    std::size_t target = nodes;
    while (true) {
      std::size_t u = nodes;
      double best = kInf;
      for (std::size_t x = 0; x < nodes; ++x) {
        if (!settled[x] && dist[x] < best) {
          best = dist[x];
          u = x;
        }
      }
      if (u == nodes) throw Error("transport solver: no augmenting path");
      settled[u] = 1;

      if (u >= m_) {
        const std::size_t j = u - m_;
        if (demand_[j] > 0.0) {
          target = u;
          break;
        }
        // Backward residual arcs j -> i exist where flow is positive.
        for (std::size_t i = 0; i < m_; ++i) {
          if (flow_[i * n_ + j] <= 0.0 || settled[i]) continue;
          const double rc = std::max(0.0, -cost_[i * n_ + j] + pi_[u] - pi_[i]);
          if (dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            parent[i] = static_cast<int>(u);
          }
        }
      } else {
        const std::size_t i = u;
        const double* row = &cost_[i * n_];
        for (std::size_t j = 0; j < n_; ++j) {
          const std::size_t w = m_ + j;
          if (settled[w]) continue;
          const double rc = std::max(0.0, row[j] + pi_[i] - pi_[w]);
          if (dist[u] + rc < dist[w]) {
            dist[w] = dist[u] + rc;
            parent[w] = static_cast<int>(u);
          }
        }
      }
    }

    const double reached = dist[target];
    for (std::size_t x = 0; x < nodes; ++x)
      pi_[x] += std::min(dist[x], reached);

    // Bottleneck along the path: start supply, backward-arc flows, end demand.
    const std::size_t sink_j = target - m_;
    double amount = demand_[sink_j];
    std::size_t node = target;
    while (parent[node] >= 0) {
      const std::size_t prev = static_cast<std::size_t>(parent[node]);
      if (node < m_) amount = std::min(amount, flow_[node * n_ + (prev - m_)]);
      node = prev;
    }
    amount = std::min(amount, supply_[node]);

    const std::size_t path_start = node;
    node = target;
    while (parent[node] >= 0) {
      const std::size_t prev = static_cast<std::size_t>(parent[node]);
      if (node >= m_) {
        flow_[prev * n_ + (node - m_)] += amount;
      } else {
        double& f = flow_[node * n_ + (prev - m_)];
        f -= amount;
        if (f < kSnapEps) f = 0.0;
      }
      node = prev;
    }
    supply_[path_start] -= amount;
    if (supply_[path_start] < kSnapEps) supply_[path_start] = 0.0;
    demand_[sink_j] -= amount;
    if (demand_[sink_j] < kSnapEps) demand_[sink_j] = 0.0;
    return amount;
  }

  std::vector<double> supply_;
  std::vector<double> demand_;
  std::vector<double> cost_;
  std::size_t m_, n_;
  std::vector<double> flow_;
  std::vector<double> pi_;
};

}  // namespace detail

// Exact minimum-cost transportation plan between two histograms sharing a
// binning spec. Shared per-bin mass stays in place (zero-cost diagonal arcs);
// only surpluses and deficits are routed by the solver.
inline FlowSolution solve_transport(const Histogram& P, const Histogram& Q) {
  if (!(P.spec == Q.spec))
    throw Error("histograms were built from different binning specs");
  double mass_p = 0.0, mass_q = 0.0;
  for (const auto& bin : P.bins) mass_p += bin.mass;
  for (const auto& bin : Q.bins) mass_q += bin.mass;
  if (std::abs(mass_p - mass_q) > 1e-9)
    throw Error("histogram masses are not balanced");

  constexpr double kDiffEps = 1e-15;

  FlowSolution solution;
  std::vector<std::size_t> src_bins, snk_bins;
  std::vector<double> supply, demand;

  std::size_t pi = 0, qi = 0;
  while (pi < P.bins.size() || qi < Q.bins.size()) {
    const bool p_next =
        qi >= Q.bins.size() ||
        (pi < P.bins.size() && P.bins[pi].flat < Q.bins[qi].flat);
    const bool q_next =
        pi >= P.bins.size() ||
        (qi < Q.bins.size() && Q.bins[qi].flat < P.bins[pi].flat);

    if (p_next) {
      src_bins.push_back(pi);
      supply.push_back(P.bins[pi].mass);
      ++pi;
    } else if (q_next) {
      snk_bins.push_back(qi);
      demand.push_back(Q.bins[qi].mass);
      ++qi;
    } else {
      const double p = P.bins[pi].mass;
      const double q = Q.bins[qi].mass;
      const double kept = std::min(p, q);
      solution.flows.push_back({pi, qi, kept});
      const double diff = p - q;
      if (diff > kDiffEps) {
        src_bins.push_back(pi);
        supply.push_back(diff);
      } else if (diff < -kDiffEps) {
        snk_bins.push_back(qi);
        demand.push_back(-diff);
      }
      ++pi;
      ++qi;
    }
  }

  if (src_bins.empty() || snk_bins.empty()) {
    solution.objective = 0.0;
    return solution;
  }

  const std::size_t m = src_bins.size();
  const std::size_t n = snk_bins.size();
  std::vector<double> cost(m * n);
  for (std::size_t a = 0; a < m; ++a) {
    const auto& ca = P.bins[src_bins[a]].center;
    for (std::size_t b = 0; b < n; ++b)
      cost[a * n + b] = ground_distance(ca, Q.bins[snk_bins[b]].center, P.spec);
  }

  detail::TransportSolver solver(std::move(supply), std::move(demand), std::move(cost));
  solver.solve();

  double objective = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double f = solver.flow(a, b);
      if (f <= 0.0) continue;
      objective += f * solver.cost(a, b);
      solution.flows.push_back({src_bins[a], snk_bins[b], f});
    }
  }
  solution.objective = objective;
  return solution;
}

// EMD between two normalized histograms on a shared spec: the optimal
// transportation objective (total mass is 1, so no denominator is needed).
inline double emd(const Histogram& P, const Histogram& Q) {
  return solve_transport(P, Q).objective;
}

// Closed-form 1-D optimal transport: sum over bins of |CDF_P - CDF_Q| times
// the normalized center spacing. Used as the correctness oracle for the
// general solver.
inline double emd_1d_oracle(const Histogram& P, const Histogram& Q) {
  if (!(P.spec == Q.spec))
    throw Error("histograms were built from different binning specs");
  if (P.spec.dims() != 1) throw Error("1-D oracle requires one-dimensional histograms");

  const int nbins = P.spec.effective_bins(0);
  std::vector<double> mass_p(nbins, 0.0), mass_q(nbins, 0.0);
  for (const auto& bin : P.bins) mass_p[bin.flat] = bin.mass;
  for (const auto& bin : Q.bins) mass_q[bin.flat] = bin.mass;

  const double spacing =
      P.spec.degenerate(0) ? 0.0 : 1.0 / static_cast<double>(nbins);
  double cdf_p = 0.0, cdf_q = 0.0, total = 0.0;
  for (int b = 0; b + 1 < nbins; ++b) {
    cdf_p += mass_p[b];
    cdf_q += mass_q[b];
    total += std::abs(cdf_p - cdf_q);
  }
  return total * spacing;
}

// ---------------------------------------------------------------------------
// Statistical distortion between datasets
// ---------------------------------------------------------------------------

enum class DistortionMode { Joint, PerAttributeSum };

// Bin counts: empty means 8 per dimension; a single entry broadcasts; an
// entry per attribute sets each dimension's resolution separately.
struct DistortionOptions {
  std::vector<int> bins;
  DistortionMode mode = DistortionMode::Joint;

  DistortionOptions() = default;
  DistortionOptions(int bins_per_dim, DistortionMode m)
      : bins{bins_per_dim}, mode(m) {}

  std::vector<int> bins_for(std::size_t dims) const {
    if (bins.empty()) return std::vector<int>(dims, 8);
    if (bins.size() == 1) return std::vector<int>(dims, bins[0]);
    if (bins.size() != dims)
      throw Error("bin counts must be scalar or one per attribute");
    return bins;
  }
};

namespace detail {

inline BinningSpec derive_spec(const TupleList& a, const TupleList& b,
                               std::vector<int> bins) {
  const std::size_t dims = a.dims;
  BinningSpec spec;
  spec.bins = std::move(bins);
  spec.lo.assign(dims, std::numeric_limits<double>::infinity());
  spec.hi.assign(dims, -std::numeric_limits<double>::infinity());
  for (const TupleList* pool : {&a, &b}) {
    for (std::size_t r = 0; r < pool->count(); ++r) {
      const auto row = pool->row(r);
      for (std::size_t d = 0; d < dims; ++d) {
        spec.lo[d] = std::min(spec.lo[d], row[d]);
        spec.hi[d] = std::max(spec.hi[d], row[d]);
      }
    }
  }
  return spec;
}

inline TupleList project(const TupleList& pool, std::size_t d) {
  TupleList out;
  out.dims = 1;
  out.data.reserve(pool.count());
  for (std::size_t r = 0; r < pool.count(); ++r) out.data.push_back(pool.row(r)[d]);
  return out;
}

}  // namespace detail

// EMD between the empirical distributions of two datasets' complete tuples.
// One binning spec is derived from the union of both pools, so the histograms
// are directly comparable. Rows with any missing attribute are excluded,
// which makes the two pools differ in size when cleaning fills values in.
inline double statistical_distortion(const Dataset& dirty, const Dataset& treated,
                                     const DistortionOptions& opts = {}) {
  if (dirty.width() != treated.width())
    throw Error("datasets have different attribute counts");

  const TupleList pool_d = pool_complete_tuples(dirty);
  const TupleList pool_t = pool_complete_tuples(treated);
  if (pool_d.count() == 0) throw Error("no complete observations in dirty dataset");
  if (pool_t.count() == 0) throw Error("no complete observations in treated dataset");

  const std::vector<int> bins = opts.bins_for(dirty.width());

  if (opts.mode == DistortionMode::Joint) {
    const BinningSpec spec = detail::derive_spec(pool_d, pool_t, bins);
    return emd(build_histogram(pool_d, spec), build_histogram(pool_t, spec));
  }

  double total = 0.0;
  for (std::size_t d = 0; d < dirty.width(); ++d) {
    const TupleList pd = detail::project(pool_d, d);
    const TupleList pt = detail::project(pool_t, d);
    const BinningSpec spec = detail::derive_spec(pd, pt, {bins[d]});
    total += emd(build_histogram(pd, spec), build_histogram(pt, spec));
  }
  return total;
}

}  // namespace cleanbench
