#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "spherot/alpha.hpp"

namespace spherot {

struct NeighborGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // sorted, i < j, no duplicates

  static NeighborGraph from_edges(int n, std::vector<std::pair<int, int>> edges) {
    NeighborGraph g;
    g.n = n;
    for (auto& e : edges) {
      if (e.first == e.second) fail(ErrorKind::DomainError, "self-loop");
      if (e.first > e.second) std::swap(e.first, e.second);
      if (e.first < 0 || e.second >= n)
        fail(ErrorKind::DomainError, "edge index out of range");
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    g.edges = std::move(edges);
    return g;
  }

  static NeighborGraph skeleton(const SimplicialComplex& c) {
    std::vector<std::pair<int, int>> edges;
    if (c.maxdim() >= 1)
      for (const auto& e : c.simplices_by_dim[1]) edges.emplace_back(e[0], e[1]);
    return from_edges(static_cast<int>(c.vertices.size()), std::move(edges));
  }
};

// Uniform target on the (directed) edges: P_ij = P_ji = 1/(2 #edges).
inline Mat target_probabilities(const NeighborGraph& g) {
  if (g.edges.empty()) fail(ErrorKind::EmptyGraph, "graph has no edges");
  Mat P = Mat::Zero(g.n, g.n);
  double p = 1.0 / (2.0 * static_cast<double>(g.edges.size()));
  for (auto [i, j] : g.edges) {
    P(i, j) = p;
    P(j, i) = p;
  }
  return P;
}

// KL(P || Q) with Student-t(1) similarities Q_ij ~ (1 + |z_i - z_j|^2)^{-1}
// normalized over ordered pairs i != j.
inline double kl_loss(const Mat& P, const Mat& coords) {
  const int n = static_cast<int>(coords.rows());
  if (P.rows() != n || P.cols() != n)
    fail(ErrorKind::DimensionOutOfRange, "P and coords disagree on n");
  double wsum = 0.0;
  double cross = 0.0;  // sum P_ij log w_ij
  double ent = 0.0;    // sum P_ij log P_ij
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double w = 1.0 / (1.0 + (coords.row(i) - coords.row(j)).squaredNorm());
      wsum += w;
      double p = P(i, j);
      if (p > 0.0) {
        cross += p * std::log(w);
        ent += p * std::log(p);
      }
    }
  }
  return ent - cross + std::log(wsum);
}

struct EmbedOptions {
  int dim = 3;
  long iters = 200000;
  double init_scale = 1e-2;          // stddev of the gaussian start
  double tau0_factor = 0.1;          // tau_0 = factor * initial loss
  double tau_final_ratio = 1e-3;     // geometric schedule ends at ratio * tau_0
  double proposal_rms_factor = 0.05; // sigma_0 = factor * coordinate RMS
  double target_acceptance = 0.40;
  int adapt_interval = 200;
  long resync_interval = 10000;
  int chains = 1;
  unsigned threads = 1;
};

struct EmbeddingState {
  Mat coords;                    // best-loss coordinates visited
  double loss = 0.0;             // exact kl_loss of coords
  double temperature = 0.0;      // temperature at the final step
  long accepted = 0;
  double max_resync_drift = 0.0; // worst |incremental - full| seen at resyncs
  int chain = 0;
};

namespace detail {

inline EmbeddingState run_chain(const NeighborGraph& g, const Mat& P,
                                const EmbedOptions& opts, const RngStream& rng,
                                int chain_id) {
  const int n = g.n;
  const int dim = opts.dim;
  auto eng = rng.substream(static_cast<std::uint64_t>(chain_id)).engine();
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, n - 1);

  Mat coords(n, dim);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < dim; ++k) coords(i, k) = opts.init_scale * gauss(eng);

  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (auto [i, j] : g.edges) {
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  const double pe = 1.0 / (2.0 * static_cast<double>(g.edges.size()));
  const double ent = 2.0 * static_cast<double>(g.edges.size()) * pe * std::log(pe);

  Mat w(n, n);
  double wsum = 0.0, cross = 0.0;
  auto full_recompute = [&]() {
    wsum = 0.0;
    cross = 0.0;
    for (int i = 0; i < n; ++i) {
      w(i, i) = 0.0;
      for (int j = i + 1; j < n; ++j) {
        double wij = 1.0 / (1.0 + (coords.row(i) - coords.row(j)).squaredNorm());
        w(i, j) = wij;
        w(j, i) = wij;
        wsum += 2.0 * wij;
      }
    }
    for (auto [i, j] : g.edges) cross += 2.0 * pe * std::log(w(i, j));
  };
  full_recompute();
  double loss = ent - cross + std::log(wsum);

  const double init_loss = loss;
  double tau0 = opts.tau0_factor * init_loss;
  double gamma = opts.iters > 0 && tau0 > 0.0
                     ? std::pow(opts.tau_final_ratio, 1.0 / static_cast<double>(opts.iters))
                     : 1.0;
  double rms = std::sqrt(coords.squaredNorm() / static_cast<double>(n * dim));
  double sigma = std::max(opts.proposal_rms_factor * rms, 1e-12);

  EmbeddingState best;
  best.coords = coords;
  best.loss = loss;
  best.chain = chain_id;

  double tau = tau0;
  long accepted = 0;
  int window_accepted = 0;
  Vec new_row(dim);
  std::vector<double> new_w(static_cast<std::size_t>(n));
  for (long step = 0; step < opts.iters; ++step) {
    int v = pick(eng);
    for (int k = 0; k < dim; ++k) new_row[k] = coords(v, k) + sigma * gauss(eng);

    double dwsum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == v) continue;
      double sq = 0.0;
      for (int k = 0; k < dim; ++k) {
        double diff = new_row[k] - coords(j, k);
        sq += diff * diff;
      }
      double wnew = 1.0 / (1.0 + sq);
      new_w[static_cast<std::size_t>(j)] = wnew;
      dwsum += 2.0 * (wnew - w(v, j));
    }
    double dcross = 0.0;
    for (int j : adj[static_cast<std::size_t>(v)])
      dcross += 2.0 * pe * (std::log(new_w[static_cast<std::size_t>(j)]) - std::log(w(v, j)));
    double new_loss = ent - (cross + dcross) + std::log(wsum + dwsum);
    double dloss = new_loss - loss;

    bool accept = dloss <= 0.0;
    if (!accept && tau > 0.0) accept = unif(eng) < std::exp(-dloss / tau);
    if (accept) {
      coords.row(v) = new_row.transpose();
      for (int j = 0; j < n; ++j) {
        if (j == v) continue;
        w(v, j) = new_w[static_cast<std::size_t>(j)];
        w(j, v) = new_w[static_cast<std::size_t>(j)];
      }
      wsum += dwsum;
      cross += dcross;
      loss = new_loss;
      ++accepted;
      ++window_accepted;
      if (loss < best.loss) {
        best.loss = loss;
        best.coords = coords;
      }
    }

    tau *= gamma;
    if (opts.adapt_interval > 0 && (step + 1) % opts.adapt_interval == 0) {
      double rate = static_cast<double>(window_accepted) / opts.adapt_interval;
      sigma *= std::exp(0.5 * (rate - opts.target_acceptance));
      // The similarity 1/(1+d^2) resolves nothing beyond d ~ 1 and its far
      // field is scale invariant, so an uncapped sigma runs away during the
      // hot phase. Cap proposals at the similarity resolution scale.
      sigma = std::clamp(sigma, 1e-6, 0.5);
      window_accepted = 0;
    }
    if (opts.resync_interval > 0 && (step + 1) % opts.resync_interval == 0) {
      double incr = loss;
      full_recompute();
      loss = ent - cross + std::log(wsum);
      best.max_resync_drift = std::max(best.max_resync_drift, std::abs(incr - loss));
    }
  }

  best.temperature = tau;
  best.accepted = accepted;
  best.loss = kl_loss(P, best.coords);
  return best;
}

}  // namespace detail

// Single-site Metropolis descent of the KL loss. Starts from a small gaussian
// cloud, perturbs one vertex per step, accepts with probability
// min(1, exp(-dloss / tau)) under a geometric cooling schedule, and returns
// the best state visited. Chains are independent; the best final loss wins
// (ties to the lowest chain id), so the result does not depend on thread
// scheduling.
inline EmbeddingState metropolis_embed(const NeighborGraph& g,
                                       const RngStream& rng,
                                       EmbedOptions opts = {}) {
  if (opts.dim < 2) fail(ErrorKind::DomainError, "embedding dim must be >= 2");
  if (opts.iters < 1) fail(ErrorKind::DomainError, "iters must be >= 1");
  if (opts.chains < 1) fail(ErrorKind::DomainError, "chains must be >= 1");
  Mat P = target_probabilities(g);
  std::vector<EmbeddingState> states(static_cast<std::size_t>(opts.chains));
  parallel_for(static_cast<std::size_t>(opts.chains), opts.threads,
               [&](std::size_t c) {
                 states[c] = detail::run_chain(g, P, opts, rng, static_cast<int>(c));
               });
  std::size_t best = 0;
  for (std::size_t c = 1; c < states.size(); ++c)
    if (states[c].loss < states[best].loss) best = c;
  return states[best];
}

inline EmbeddingState metropolis_embed(const NeighborGraph& g, int dim,
                                       long iters, const RngStream& rng) {
  EmbedOptions opts;
  opts.dim = dim;
  opts.iters = iters;
  return metropolis_embed(g, rng, opts);
}

}  // namespace spherot
