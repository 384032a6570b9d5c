#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "spherot/embedding.hpp"
#include "spherot/homology.hpp"
#include "spherot/sampler.hpp"

namespace spherot {

// Rows are time steps, columns are channels.
using TimeSeriesMatrix = Mat;

// Column-wise convolution with a truncated (+-4 sigma) normalized gaussian,
// half-sample symmetric reflection at the ends. sigma = 0 is the identity.
inline TimeSeriesMatrix gaussian_smooth(const TimeSeriesMatrix& m, double sigma) {
  if (sigma < 0.0) fail(ErrorKind::DomainError, "smoothing sigma must be >= 0");
  if (sigma == 0.0) return m;
  const int T = static_cast<int>(m.rows());
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  Vec k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i)
    k[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
  k /= k.sum();

  auto reflect = [T](int i) {
    while (i < 0 || i >= T) {
      if (i < 0) i = -i - 1;
      if (i >= T) i = 2 * T - 1 - i;
    }
    return i;
  };
  TimeSeriesMatrix out(m.rows(), m.cols());
  for (int c = 0; c < m.cols(); ++c) {
    for (int t = 0; t < T; ++t) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[i + radius] * m(reflect(t + i), c);
      out(t, c) = acc;
    }
  }
  return out;
}

struct ZscoreResult {
  TimeSeriesMatrix matrix;
  std::vector<int> constant_columns;  // zeroed out, reported not fatal
};

// Center and scale each column to mean 0, population variance 1.
inline ZscoreResult zscore_columns(const TimeSeriesMatrix& m) {
  ZscoreResult res;
  res.matrix = m;
  const double T = static_cast<double>(m.rows());
  for (int c = 0; c < m.cols(); ++c) {
    double mean = m.col(c).mean();
    double var = (m.col(c).array() - mean).square().sum() / T;
    double sd = std::sqrt(var);
    if (sd <= 1e-12 * (std::abs(mean) + 1.0)) {
      res.matrix.col(c).setZero();
      res.constant_columns.push_back(c);
    } else {
      res.matrix.col(c) = (m.col(c).array() - mean) / sd;
    }
  }
  return res;
}

struct SvdResult {
  TimeSeriesMatrix scores;  // T x k, rows projected on the top-k right singular vectors
  Vec singular_values;      // all min(T,N) of them, descending
  bool rank_deficient = false;
};

// Scores U_k Sigma_k = A V_k via the (small) Gram matrix A'A; T can be large.
inline SvdResult svd_reduce(const TimeSeriesMatrix& m, int k) {
  const int T = static_cast<int>(m.rows());
  const int N = static_cast<int>(m.cols());
  if (k < 1 || k > std::min(T, N))
    fail(ErrorKind::DomainError, "svd dimension must satisfy 1 <= k <= min(T,N)");
  Mat gram = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
  SvdResult res;
  res.singular_values = Vec(N);
  Mat V(N, N);
  for (int i = 0; i < N; ++i) {  // eigensolver sorts ascending; flip
    double ev = std::max(eig.eigenvalues()[N - 1 - i], 0.0);
    res.singular_values[i] = std::sqrt(ev);
    V.col(i) = eig.eigenvectors().col(N - 1 - i);
  }
  res.singular_values.conservativeResize(std::min(T, N));
  res.scores = m * V.leftCols(k);
  res.rank_deficient =
      res.singular_values[k - 1] < 1e-12 * res.singular_values[0];
  return res;
}

struct RowNormalizeResult {
  std::vector<UnitPoint> points;
  int dropped = 0;
};

inline RowNormalizeResult row_normalize(const TimeSeriesMatrix& m) {
  RowNormalizeResult res;
  for (int r = 0; r < m.rows(); ++r) {
    Vec row = m.row(r).transpose();
    double n = row.norm();
    if (n <= kDegenerateTol) {
      ++res.dropped;
      continue;
    }
    res.points.push_back(UnitPoint(row / n));
  }
  if (res.points.empty()) fail(ErrorKind::AllRowsZero, "no nonzero rows");
  return res;
}

struct TorusOptions {
  bool random_rotation = true;
};

// Clifford torus sample in S^3, noised, re-normalized, zero-padded to the
// ambient dimension and hit with a Haar-random rotation. Point i depends
// only on (rng, i); the rotation comes from a dedicated substream.
inline std::vector<UnitPoint> synth_torus(int n, double noise, int ambient_dim,
                                          const RngStream& rng,
                                          TorusOptions opts = {}) {
  if (ambient_dim < 4) fail(ErrorKind::DomainError, "ambient_dim must be >= 4");
  if (noise < 0.0) fail(ErrorKind::DomainError, "noise must be >= 0");
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  Mat rot;
  if (opts.random_rotation) {
    auto eng = rng.substream(1).engine();
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat G(ambient_dim, ambient_dim);
    for (int i = 0; i < ambient_dim; ++i)
      for (int j = 0; j < ambient_dim; ++j) G(i, j) = gauss(eng);
    Eigen::HouseholderQR<Mat> qr(G);
    rot = qr.householderQ();
    Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < ambient_dim; ++j)
      if (R(j, j) < 0.0) rot.col(j) = -rot.col(j);
  }

  RngStream pts = rng.substream(0);
  std::vector<UnitPoint> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto eng = pts.engine_at(static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double u = angle(eng), v = angle(eng);
    Vec p(4);
    p << std::cos(u), std::sin(u), std::cos(v), std::sin(v);
    p *= inv_sqrt2;
    if (noise > 0.0)
      for (int j = 0; j < 4; ++j) p[j] += noise * gauss(eng);
    double norm = p.norm();
    if (norm <= kDegenerateTol) {  // vanishing odds; keep the draw total
      p << 1, 0, 0, 0;
      norm = 1.0;
    }
    Vec q = Vec::Zero(ambient_dim);
    q.head(4) = p / norm;
    if (opts.random_rotation) q = rot * q;
    out.push_back(UnitPoint(std::move(q)));
  }
  return out;
}

struct PipelineConfig {
  double smoothing_sigma = 5.0;
  int svd_dim = 6;
  double bandwidth_h = 0.3;
  double quantile_a = 0.9;  // fraction of data points with psi(x_i) >= a
  double threshold_a = std::numeric_limits<double>::quiet_NaN();  // direct a
  double separation_s = 0.4;
  long samples_M = 100000;
  double inflate = 1.1;
  int maxdim = 3;
  std::uint64_t seed = 0;
  bool embed = false;
  int embed_dim = 3;
  long embed_iters = 200000;
  bool exact_marginal = false;

  double exponent() const { return 1.0 / (bandwidth_h * bandwidth_h); }

  void validate() const {
    if (!(bandwidth_h > 0.0 && bandwidth_h < 1.0))
      fail(ErrorKind::DomainError, "bandwidth_h must lie in (0,1) so that t > 1");
    if (!(quantile_a > 0.0 && quantile_a < 1.0))
      fail(ErrorKind::DomainError, "quantile_a must lie in (0,1)");
    if (!(separation_s > 0.0 && separation_s < 1.0))
      fail(ErrorKind::DomainError, "separation_s must lie in (0,1)");
    if (samples_M < 1) fail(ErrorKind::DomainError, "samples_M must be >= 1");
    if (!(inflate >= 1.0)) fail(ErrorKind::DomainError, "inflate must be >= 1");
    if (maxdim < 0) fail(ErrorKind::DomainError, "maxdim must be >= 0");
    if (smoothing_sigma < 0.0)
      fail(ErrorKind::DomainError, "smoothing_sigma must be >= 0");
    if (svd_dim < 1) fail(ErrorKind::DomainError, "svd_dim must be >= 1");
  }
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineReport {
  // input shape; rows/cols of the matrix, or count/dim for point input
  long input_rows = 0;
  long input_cols = 0;
  bool preprocessed = false;
  int constant_columns = 0;
  int dropped_rows = 0;
  long points = 0;
  int dimension = 0;
  double t = 0.0;
  double a = 0.0;
  double r = 0.0;
  long samples = 0;
  long landmark_count = 0;
  std::vector<std::size_t> simplex_counts;
  std::vector<int> betti;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::optional<double> embed_loss;
  std::vector<StageTiming> timings;

  // artifacts for callers that want to save them
  std::vector<UnitPoint> model_points;
  LandmarkSet landmarks;
  SimplicialComplex complex;
  std::optional<Mat> embedding_coords;
};

namespace detail {

template <class F>
auto run_stage(const char* name, std::vector<StageTiming>& timings, F&& f) {
  auto start = std::chrono::steady_clock::now();
  try {
    auto finish = [&]() {
      std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
      timings.push_back({name, dt.count()});
    };
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto out = f();
      finish();
      return out;
    }
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage ") + name + ": " + e.detail());
  }
}

}  // namespace detail

// Threshold a from the quantile of {psi(x_i)}: the largest a with
// psi(x_i) >= a for at least `quantile` of the data points.
inline double threshold_from_quantile(const KdeModel& m, double quantile,
                                      unsigned threads = 1) {
  if (!(quantile > 0.0 && quantile < 1.0))
    fail(ErrorKind::DomainError, "quantile must lie in (0,1)");
  const int n = m.size();
  std::vector<double> psi(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    LogValue v = log_density(m, m.point(static_cast<int>(i)));
    psi[i] = v.value();  // -inf cannot happen at a data point
  });
  std::sort(psi.begin(), psi.end());
  std::size_t idx = static_cast<std::size_t>(
      std::floor((1.0 - quantile) * static_cast<double>(n)));
  idx = std::min(idx, static_cast<std::size_t>(n - 1));
  return psi[idx];
}

// End-to-end run on pre-normalized points: model, threshold, sampling,
// landmark selection, alpha complex, Betti numbers, optional embedding.
inline PipelineReport run_pipeline(std::vector<UnitPoint> points,
                                   const PipelineConfig& cfg,
                                   unsigned threads = 1) {
  cfg.validate();
  PipelineReport rep;
  rep.seed = cfg.seed;
  rep.threads = threads;
  if (points.empty())
    throw Error(ErrorKind::EmptyModel, "stage model: no input points");
  rep.input_rows = static_cast<long>(points.size());
  rep.input_cols = points[0].dim();
  rep.points = static_cast<long>(points.size());
  rep.dimension = points[0].dim();
  rep.t = cfg.exponent();
  rep.model_points = points;

  auto model = detail::run_stage("model", rep.timings, [&]() {
    return KdeModel::uniform_weights(points, cfg.exponent());
  });

  rep.a = detail::run_stage("threshold", rep.timings, [&]() {
    if (std::isfinite(cfg.threshold_a)) return cfg.threshold_a;
    return threshold_from_quantile(model, cfg.quantile_a, threads);
  });

  auto samples = detail::run_stage("sampling", rep.timings, [&]() {
    SampleOptions so;
    so.exact_marginal = cfg.exact_marginal;
    return draw_transport_samples(model, RngStream{cfg.seed, 0},
                                  static_cast<std::size_t>(cfg.samples_M),
                                  threads, so);
  });
  rep.samples = static_cast<long>(samples.size());

  rep.landmarks = detail::run_stage("landmarks", rep.timings, [&]() {
    return select_landmarks(samples, rep.a, cfg.separation_s, cfg.exponent());
  });
  rep.landmark_count = static_cast<long>(rep.landmarks.landmarks.size());
  rep.r = rep.landmarks.radius_r;

  rep.complex = detail::run_stage("complex", rep.timings, [&]() {
    std::vector<UnitPoint> verts;
    verts.reserve(rep.landmarks.landmarks.size());
    for (const auto& l : rep.landmarks.landmarks) verts.push_back(l.image);
    BuildOptions bo;
    bo.threads = threads;
    return build_complex(verts, rep.r, cfg.maxdim, cfg.inflate, bo);
  });
  for (int k = 0; k <= rep.complex.maxdim(); ++k)
    rep.simplex_counts.push_back(rep.complex.count(k));

  if (cfg.maxdim >= 1) {
    rep.betti = detail::run_stage("betti", rep.timings, [&]() {
      return betti_numbers(rep.complex, cfg.maxdim - 1);
    });
  }

  if (cfg.embed) {
    auto state = detail::run_stage("embed", rep.timings, [&]() {
      EmbedOptions eo;
      eo.dim = cfg.embed_dim;
      eo.iters = cfg.embed_iters;
      eo.chains = 4;
      eo.threads = threads;
      return metropolis_embed(NeighborGraph::skeleton(rep.complex),
                              RngStream{cfg.seed, 1}, eo);
    });
    rep.embed_loss = state.loss;
    rep.embedding_coords = std::move(state.coords);
  }
  return rep;
}

// Full run from a raw time-series matrix: smooth, z-score, SVD to svd_dim,
// row-normalize, then the point pipeline above.
inline PipelineReport run_pipeline(const TimeSeriesMatrix& input,
                                   const PipelineConfig& cfg,
                                   unsigned threads = 1) {
  cfg.validate();
  std::vector<StageTiming> pre_timings;
  if (input.rows() < 1 || input.cols() < 1)
    throw Error(ErrorKind::DomainError, "stage preprocess: empty input matrix");

  int constant_columns = 0;
  int dropped = 0;
  auto points = detail::run_stage("preprocess", pre_timings, [&]() {
    TimeSeriesMatrix smoothed = gaussian_smooth(input, cfg.smoothing_sigma);
    ZscoreResult z = zscore_columns(smoothed);
    constant_columns = static_cast<int>(z.constant_columns.size());
    SvdResult svd = svd_reduce(z.matrix, cfg.svd_dim);
    RowNormalizeResult rows = row_normalize(svd.scores);
    dropped = rows.dropped;
    return rows.points;
  });

  PipelineReport rep = run_pipeline(std::move(points), cfg, threads);
  rep.preprocessed = true;
  rep.input_rows = static_cast<long>(input.rows());
  rep.input_cols = static_cast<long>(input.cols());
  rep.constant_columns = constant_columns;
  rep.dropped_rows = dropped;
  rep.timings.insert(rep.timings.begin(), pre_timings.begin(), pre_timings.end());
  return rep;
}

namespace detail {

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

// Plain key: value rendering; deterministic unless timings are requested.
inline std::string render_report(const PipelineReport& rep,
                                 bool include_timings = false) {
  std::ostringstream os;
  os << "input_rows: " << rep.input_rows << "\n";
  os << "input_cols: " << rep.input_cols << "\n";
  os << "preprocessed: " << (rep.preprocessed ? "true" : "false") << "\n";
  if (rep.preprocessed) {
    os << "constant_columns: " << rep.constant_columns << "\n";
    os << "dropped_rows: " << rep.dropped_rows << "\n";
  }
  os << "points: " << rep.points << "\n";
  os << "dimension: " << rep.dimension << "\n";
  os << "t: " << detail::format_double(rep.t) << "\n";
  os << "a: " << detail::format_double(rep.a) << "\n";
  os << "r: " << detail::format_double(rep.r) << "\n";
  os << "samples: " << rep.samples << "\n";
  os << "landmarks: " << rep.landmark_count << "\n";
  os << "simplices:";
  for (std::size_t c : rep.simplex_counts) os << " " << c;
  os << "\n";
  os << "betti:";
  for (int b : rep.betti) os << " " << b;
  os << "\n";
  if (rep.embed_loss)
    os << "embed_loss: " << detail::format_double(*rep.embed_loss) << "\n";
  os << "seed: " << rep.seed << "\n";
  os << "threads: " << rep.threads << "\n";
  if (include_timings)
    for (const auto& t : rep.timings)
      os << "time_" << t.stage << "_s: " << t.seconds << "\n";
  return os.str();
}

// --- config file: one `key: value` per line, # comments ---------------------

inline PipelineConfig parse_config(std::istream& in) {
  PipelineConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = line.substr(0, line.find('#'));
    auto notspace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    if (s.empty()) continue;
    auto colon = s.find(':');
    if (colon == std::string::npos)
      fail(ErrorKind::ParseError,
           "config line " + std::to_string(lineno) + ": expected key: value");
    std::string key = s.substr(0, colon);
    std::string value = s.substr(colon + 1);
    key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
    value.erase(value.begin(), std::find_if(value.begin(), value.end(), notspace));
    try {
      if (key == "smoothing_sigma") cfg.smoothing_sigma = std::stod(value);
      else if (key == "svd_dim") cfg.svd_dim = std::stoi(value);
      else if (key == "bandwidth_h") cfg.bandwidth_h = std::stod(value);
      else if (key == "quantile_a") cfg.quantile_a = std::stod(value);
      else if (key == "threshold_a") cfg.threshold_a = std::stod(value);
      else if (key == "separation_s") cfg.separation_s = std::stod(value);
      else if (key == "samples_M") cfg.samples_M = std::stol(value);
      else if (key == "inflate") cfg.inflate = std::stod(value);
      else if (key == "maxdim") cfg.maxdim = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "embed") cfg.embed = (value == "true" || value == "1");
      else if (key == "embed_dim") cfg.embed_dim = std::stoi(value);
      else if (key == "embed_iters") cfg.embed_iters = std::stol(value);
      else if (key == "exact_marginal") cfg.exact_marginal = (value == "true" || value == "1");
      else fail(ErrorKind::ParseError, "unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
      fail(ErrorKind::ParseError,
           "config line " + std::to_string(lineno) + ": bad value for " + key);
    } catch (const std::out_of_range&) {
      fail(ErrorKind::ParseError,
           "config line " + std::to_string(lineno) + ": value out of range");
    }
  }
  return cfg;
}

}  // namespace spherot
