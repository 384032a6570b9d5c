// spherot: cosine-kernel densities on spheres, their transport maps and
// c-transforms, landmark subsampling, alpha complexes, GF(2) Betti numbers
// and Metropolis KL embeddings, end to end or stage by stage.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "spherot/io.hpp"
#include "spherot/spherot.hpp"

namespace {

using namespace spherot;

std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) fail(ErrorKind::ParseError, "cannot open input file " + path);
  return in;
}

std::ofstream open_output(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) fail(ErrorKind::ParseError, "cannot open output file " + path);
  return out;
}

// Writes through to stdout when no path is given.
template <class F>
void with_output(const std::string& path, F&& writer, bool binary = false) {
  if (path.empty()) {
    writer(std::cout);
  } else {
    std::ofstream out = open_output(path, binary);
    writer(out);
  }
}

// Tabular output: labeled text by default, the packed binary matrix with
// --binary (column names are dropped there; the format is values only).
void emit_table(const std::string& path, bool binary,
                const std::vector<std::string>& cols, const Mat& rows) {
  if (binary) {
    with_output(path, [&](std::ostream& out) { io::write_matrix_binary(out, rows); },
                true);
  } else {
    with_output(path, [&](std::ostream& out) { io::write_table(out, cols, rows); });
  }
}

Mat load_matrix_any(const std::string& path) {
  std::ifstream in = open_input(path, true);
  if (io::looks_binary(in)) return io::read_matrix_binary(in);
  return io::read_table(in);
}

std::vector<UnitPoint> load_points_any(const std::string& path) {
  Mat m = load_matrix_any(path);
  std::vector<UnitPoint> pts;
  pts.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    pts.push_back(UnitPoint(m.row(r).transpose()));
  return pts;
}

std::vector<TransportedSample> load_landmarks_any(const std::string& path) {
  std::ifstream probe = open_input(path, true);
  if (io::looks_binary(probe))
    return io::samples_from_matrix(io::read_matrix_binary(probe));
  std::ifstream in = open_input(path);
  return io::read_landmarks(in).landmarks;
}

struct CommonFlags {
  std::uint64_t seed = 0;
  int threads = static_cast<int>(default_thread_count());
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--seed", flags.seed, "random seed");
  cmd->add_option("--threads", flags.threads, "worker thread cap");
}

KdeModel load_model(const std::string& points_path, double h) {
  if (!(h > 0.0 && h < 1.0))
    fail(ErrorKind::DomainError, "bandwidth_h must lie in (0,1)");
  return KdeModel::uniform_weights(load_points_any(points_path), 1.0 / (h * h));
}

int run(int argc, char** argv) {
  CLI::App app{"cosine-kernel sphere densities, transport maps and alpha complexes"};
  app.require_subcommand(1);

  // --- synth-torus ---
  auto* synth = app.add_subcommand("synth-torus", "sample a noisy torus point cloud");
  CommonFlags synth_flags;
  add_common(synth, synth_flags);
  int synth_n = 5000, synth_ambient = 6;
  double synth_noise = 0.12;
  bool synth_no_rotation = false, synth_binary = false;
  std::string synth_out;
  synth->add_option("--n", synth_n, "number of points");
  synth->add_option("--noise", synth_noise, "gaussian noise scale");
  synth->add_option("--ambient_dim", synth_ambient, "ambient dimension (>= 4)");
  synth->add_flag("--no-rotation", synth_no_rotation, "skip the random rotation");
  synth->add_flag("--binary", synth_binary, "emit the packed binary matrix");
  synth->add_option("--out", synth_out, "output table (default stdout)");
  synth->callback([&]() {
    TorusOptions topts;
    topts.random_rotation = !synth_no_rotation;
    auto pts = synth_torus(synth_n, synth_noise, synth_ambient,
                           RngStream{synth_flags.seed, 0}, topts);
    Mat rows(static_cast<Eigen::Index>(pts.size()), synth_ambient);
    std::vector<std::string> cols;
    for (int k = 0; k < synth_ambient; ++k) cols.push_back("x" + std::to_string(k));
    for (std::size_t i = 0; i < pts.size(); ++i)
      rows.row(static_cast<Eigen::Index>(i)) = pts[i].coords().transpose();
    emit_table(synth_out, synth_binary, cols, rows);
  });

  // --- density ---
  auto* density_cmd = app.add_subcommand(
      "density", "evaluate psi, T and psi^c(T(.)) at query points");
  CommonFlags density_flags;
  add_common(density_cmd, density_flags);
  std::string density_points, density_queries, density_out;
  double density_h = 0.3;
  bool density_binary = false;
  density_cmd->add_option("--points", density_points, "data point table")->required();
  density_cmd->add_option("--queries", density_queries, "query point table")->required();
  density_cmd->add_option("--bandwidth_h", density_h, "bandwidth h, t = 1/h^2");
  density_cmd->add_flag("--binary", density_binary, "emit the packed binary matrix");
  density_cmd->add_option("--out", density_out, "output table (default stdout)");
  density_cmd->callback([&]() {
    KdeModel m = load_model(density_points, density_h);
    auto queries = load_points_any(density_queries);
    const int d = m.dim();
    Mat rows(static_cast<Eigen::Index>(queries.size()), d + 2);
    parallel_for(queries.size(), static_cast<unsigned>(density_flags.threads),
                 [&](std::size_t i) {
                   Eigen::Index r = static_cast<Eigen::Index>(i);
                   DensityMoment dm = density_moment(m, queries[i].coords());
                   if (dm.density > 0.0) {
                     TransportedSample ts = conjugate_at_transport(m, queries[i]);
                     rows(r, 0) = std::log(dm.density);
                     rows.row(r).segment(1, d) = ts.image.coords().transpose();
                     rows(r, d + 1) = ts.conjugate_value;
                   } else {
                     rows(r, 0) = -std::numeric_limits<double>::infinity();
                     rows.row(r).segment(1, d).setConstant(
                         std::numeric_limits<double>::quiet_NaN());
                     rows(r, d + 1) = -std::numeric_limits<double>::infinity();
                   }
                 });
    std::vector<std::string> cols = {"psi"};
    for (int k = 0; k < d; ++k) cols.push_back("T" + std::to_string(k));
    cols.push_back("psic");
    emit_table(density_out, density_binary, cols, rows);
  });

  // --- transport ---
  auto* transport_cmd =
      app.add_subcommand("transport", "draw mu-samples with transport images");
  CommonFlags transport_flags;
  add_common(transport_cmd, transport_flags);
  std::string transport_points, transport_out;
  double transport_h = 0.3;
  long transport_M = 1000;
  bool transport_exact = false, transport_binary = false;
  transport_cmd->add_option("--points", transport_points, "data point table")->required();
  transport_cmd->add_option("--bandwidth_h", transport_h, "bandwidth h");
  transport_cmd->add_option("--samples_M", transport_M, "number of samples");
  transport_cmd->add_flag("--exact-marginal", transport_exact,
                          "exact hemisphere marginal instead of the Beta form");
  transport_cmd->add_flag("--binary", transport_binary, "emit the packed binary matrix");
  transport_cmd->add_option("--out", transport_out, "output table (default stdout)");
  transport_cmd->callback([&]() {
    KdeModel m = load_model(transport_points, transport_h);
    SampleOptions so;
    so.exact_marginal = transport_exact;
    auto samples = draw_transport_samples(
        m, RngStream{transport_flags.seed, 0}, static_cast<std::size_t>(transport_M),
        static_cast<unsigned>(transport_flags.threads), so);
    emit_table(transport_out, transport_binary,
               io::sample_columns(samples[0].source.dim()),
               io::samples_matrix(samples));
  });

  // --- landmarks ---
  auto* landmarks_cmd =
      app.add_subcommand("landmarks", "sample, transport and select landmarks");
  CommonFlags landmarks_flags;
  add_common(landmarks_cmd, landmarks_flags);
  std::string landmarks_points, landmarks_out;
  double landmarks_h = 0.3, landmarks_q = 0.9, landmarks_s = 0.4;
  double landmarks_a = std::numeric_limits<double>::quiet_NaN();
  long landmarks_M = 100000;
  bool landmarks_exact = false, landmarks_binary = false;
  landmarks_cmd->add_option("--points", landmarks_points, "data point table")->required();
  landmarks_cmd->add_option("--bandwidth_h", landmarks_h, "bandwidth h");
  landmarks_cmd->add_option("--quantile_a", landmarks_q,
                            "fraction of data points with psi >= a");
  landmarks_cmd->add_option("--threshold_a", landmarks_a,
                            "direct threshold a (overrides the quantile)");
  landmarks_cmd->add_option("--separation_s", landmarks_s, "kernel separation in (0,1)");
  landmarks_cmd->add_option("--samples_M", landmarks_M, "number of mu samples");
  landmarks_cmd->add_flag("--exact-marginal", landmarks_exact,
                          "exact hemisphere marginal instead of the Beta form");
  landmarks_cmd->add_flag("--binary", landmarks_binary, "emit the packed binary matrix");
  landmarks_cmd->add_option("--out", landmarks_out, "output table (default stdout)");
  landmarks_cmd->callback([&]() {
    KdeModel m = load_model(landmarks_points, landmarks_h);
    unsigned threads = static_cast<unsigned>(landmarks_flags.threads);
    double a = std::isfinite(landmarks_a)
                   ? landmarks_a
                   : threshold_from_quantile(m, landmarks_q, threads);
    SampleOptions so;
    so.exact_marginal = landmarks_exact;
    auto samples = draw_transport_samples(m, RngStream{landmarks_flags.seed, 0},
                                          static_cast<std::size_t>(landmarks_M),
                                          threads, so);
    LandmarkSet set = select_landmarks(samples, a, landmarks_s, m.exponent());
    std::cerr << "landmarks: " << set.landmarks.size() << " of " << landmarks_M
              << " samples (a = " << a << ", r = " << set.radius_r << ")\n";
    if (landmarks_binary) {
      emit_table(landmarks_out, true, {}, io::samples_matrix(set.landmarks));
    } else {
      with_output(landmarks_out,
                  [&](std::ostream& out) { io::write_landmarks(out, set); });
    }
  });

  // --- complex ---
  auto* complex_cmd = app.add_subcommand("complex", "build the alpha complex");
  CommonFlags complex_flags;
  add_common(complex_cmd, complex_flags);
  std::string complex_landmarks, complex_points, complex_out;
  double complex_h = 0.3, complex_s = 0.4, complex_inflate = 1.1;
  int complex_maxdim = 3;
  complex_cmd->add_option("--landmarks", complex_landmarks,
                          "landmark table; images become vertices");
  complex_cmd->add_option("--points", complex_points,
                          "plain point table used directly as vertices");
  complex_cmd->add_option("--bandwidth_h", complex_h, "bandwidth h");
  complex_cmd->add_option("--separation_s", complex_s, "kernel separation in (0,1)");
  complex_cmd->add_option("--inflate", complex_inflate, "radius inflation factor");
  complex_cmd->add_option("--maxdim", complex_maxdim, "top simplex dimension");
  complex_cmd->add_option("--out", complex_out, "output json (default stdout)");
  complex_cmd->callback([&]() {
    std::vector<UnitPoint> verts;
    if (!complex_landmarks.empty()) {
      for (const auto& l : load_landmarks_any(complex_landmarks))
        verts.push_back(l.image);
    } else if (!complex_points.empty()) {
      verts = load_points_any(complex_points);
    } else {
      throw CLI::ValidationError("complex", "need --landmarks or --points");
    }
    double t = 1.0 / (complex_h * complex_h);
    double r = separation_radius(complex_s, t);
    BuildOptions bo;
    bo.threads = static_cast<unsigned>(complex_flags.threads);
    SimplicialComplex cx = build_complex(verts, r, complex_maxdim, complex_inflate, bo);
    std::cerr << "complex:";
    for (int k = 0; k <= cx.maxdim(); ++k) std::cerr << " " << cx.count(k);
    std::cerr << " (r = " << r << ", inflate = " << complex_inflate << ")\n";
    with_output(complex_out, [&](std::ostream& out) { io::write_complex_json(out, cx); });
  });

  // --- betti ---
  auto* betti_cmd = app.add_subcommand("betti", "Betti numbers of a stored complex");
  CommonFlags betti_flags;
  add_common(betti_cmd, betti_flags);
  std::string betti_complex;
  int betti_top = -1;
  betti_cmd->add_option("--complex", betti_complex, "complex json")->required();
  betti_cmd->add_option("--top", betti_top,
                        "highest homology degree (default maxdim-1)");
  betti_cmd->callback([&]() {
    std::ifstream in = open_input(betti_complex);
    SimplicialComplex cx = io::read_complex_json(in);
    int top = betti_top >= 0 ? betti_top : cx.maxdim() - 1;
    std::vector<int> betti = betti_numbers(cx, top);
    for (std::size_t i = 0; i < betti.size(); ++i)
      std::cout << (i ? " " : "") << betti[i];
    std::cout << "\n";
  });

  // --- embed ---
  auto* embed_cmd =
      app.add_subcommand("embed", "Metropolis KL embedding of the 1-skeleton");
  CommonFlags embed_flags;
  add_common(embed_cmd, embed_flags);
  std::string embed_complex, embed_out;
  int embed_dim = 3, embed_chains = 4;
  long embed_iters = 200000;
  bool embed_binary = false;
  embed_cmd->add_option("--complex", embed_complex, "complex json")->required();
  embed_cmd->add_option("--dim", embed_dim, "embedding dimension");
  embed_cmd->add_option("--iters", embed_iters, "Metropolis steps per chain");
  embed_cmd->add_option("--chains", embed_chains, "independent chains");
  embed_cmd->add_flag("--binary", embed_binary, "emit the packed binary matrix");
  embed_cmd->add_option("--out", embed_out, "coordinate table (default stdout)");
  embed_cmd->callback([&]() {
    std::ifstream in = open_input(embed_complex);
    SimplicialComplex cx = io::read_complex_json(in);
    EmbedOptions eo;
    eo.dim = embed_dim;
    eo.iters = embed_iters;
    eo.chains = embed_chains;
    eo.threads = static_cast<unsigned>(embed_flags.threads);
    EmbeddingState state =
        metropolis_embed(NeighborGraph::skeleton(cx), RngStream{embed_flags.seed, 0}, eo);
    std::cerr << "embed: loss " << state.loss << " from chain " << state.chain << "\n";
    Mat rows(state.coords.rows(), state.coords.cols() + 1);
    for (Eigen::Index i = 0; i < state.coords.rows(); ++i) {
      rows(i, 0) = static_cast<double>(i);
      rows.row(i).tail(state.coords.cols()) = state.coords.row(i);
    }
    std::vector<std::string> cols = {"index"};
    for (int k = 0; k < embed_dim; ++k) cols.push_back("z" + std::to_string(k));
    emit_table(embed_out, embed_binary, cols, rows);
  });

  // --- pipeline ---
  auto* pipeline_cmd = app.add_subcommand("pipeline", "full end-to-end run");
  CommonFlags pipeline_flags;
  add_common(pipeline_cmd, pipeline_flags);
  std::string pl_config, pl_points, pl_matrix, pl_binary;
  std::string pl_save_points, pl_save_landmarks, pl_save_complex, pl_save_coords;
  bool pl_timings = false;
  PipelineConfig flag_cfg;
  pipeline_cmd->add_option("--config", pl_config, "pipeline config file");
  pipeline_cmd->add_option("--input-points", pl_points,
                           "pre-normalized point table (skips preprocessing)");
  pipeline_cmd->add_option("--input-matrix", pl_matrix, "time-series matrix table");
  pipeline_cmd->add_option("--input-binary", pl_binary, "packed binary matrix");
  auto* o_sigma = pipeline_cmd->add_option("--smoothing_sigma", flag_cfg.smoothing_sigma);
  auto* o_svd = pipeline_cmd->add_option("--svd_dim", flag_cfg.svd_dim);
  auto* o_h = pipeline_cmd->add_option("--bandwidth_h", flag_cfg.bandwidth_h);
  auto* o_q = pipeline_cmd->add_option("--quantile_a", flag_cfg.quantile_a);
  auto* o_a = pipeline_cmd->add_option("--threshold_a", flag_cfg.threshold_a);
  auto* o_s = pipeline_cmd->add_option("--separation_s", flag_cfg.separation_s);
  auto* o_m = pipeline_cmd->add_option("--samples_M", flag_cfg.samples_M);
  auto* o_inf = pipeline_cmd->add_option("--inflate", flag_cfg.inflate);
  auto* o_max = pipeline_cmd->add_option("--maxdim", flag_cfg.maxdim);
  auto* o_embed = pipeline_cmd->add_flag("--embed", flag_cfg.embed);
  auto* o_edim = pipeline_cmd->add_option("--embed_dim", flag_cfg.embed_dim);
  auto* o_eit = pipeline_cmd->add_option("--embed_iters", flag_cfg.embed_iters);
  auto* o_exact = pipeline_cmd->add_flag("--exact_marginal", flag_cfg.exact_marginal);
  pipeline_cmd->add_flag("--timings", pl_timings, "append wall-clock timings");
  pipeline_cmd->add_option("--save-points", pl_save_points, "write model points");
  pipeline_cmd->add_option("--save-landmarks", pl_save_landmarks, "write landmarks");
  pipeline_cmd->add_option("--save-complex", pl_save_complex, "write complex json");
  pipeline_cmd->add_option("--save-coords", pl_save_coords, "write embedding coords");
  pipeline_cmd->callback([&]() {
    PipelineConfig cfg;
    if (!pl_config.empty()) {
      std::ifstream in = open_input(pl_config);
      cfg = parse_config(in);
    }
    if (*o_sigma) cfg.smoothing_sigma = flag_cfg.smoothing_sigma;
    if (*o_svd) cfg.svd_dim = flag_cfg.svd_dim;
    if (*o_h) cfg.bandwidth_h = flag_cfg.bandwidth_h;
    if (*o_q) cfg.quantile_a = flag_cfg.quantile_a;
    if (*o_a) cfg.threshold_a = flag_cfg.threshold_a;
    if (*o_s) cfg.separation_s = flag_cfg.separation_s;
    if (*o_m) cfg.samples_M = flag_cfg.samples_M;
    if (*o_inf) cfg.inflate = flag_cfg.inflate;
    if (*o_max) cfg.maxdim = flag_cfg.maxdim;
    if (*o_embed) cfg.embed = flag_cfg.embed;
    if (*o_edim) cfg.embed_dim = flag_cfg.embed_dim;
    if (*o_eit) cfg.embed_iters = flag_cfg.embed_iters;
    if (*o_exact) cfg.exact_marginal = flag_cfg.exact_marginal;
    if (pipeline_cmd->count("--seed")) cfg.seed = pipeline_flags.seed;
    if (pl_save_coords.empty() == false) cfg.embed = true;

    unsigned threads = static_cast<unsigned>(pipeline_flags.threads);
    PipelineReport rep;
    int sources = (!pl_points.empty()) + (!pl_matrix.empty()) + (!pl_binary.empty());
    if (sources != 1)
      throw CLI::ValidationError(
          "pipeline", "need exactly one of --input-points/--input-matrix/--input-binary");
    if (!pl_points.empty()) {
      rep = run_pipeline(load_points_any(pl_points), cfg, threads);
    } else if (!pl_matrix.empty()) {
      rep = run_pipeline(load_matrix_any(pl_matrix), cfg, threads);
    } else {
      std::ifstream in = open_input(pl_binary, true);
      rep = run_pipeline(io::read_matrix_binary(in), cfg, threads);
    }

    if (!pl_save_points.empty()) {
      std::ofstream out = open_output(pl_save_points);
      io::write_points(out, rep.model_points);
    }
    if (!pl_save_landmarks.empty()) {
      std::ofstream out = open_output(pl_save_landmarks);
      io::write_landmarks(out, rep.landmarks);
    }
    if (!pl_save_complex.empty()) {
      std::ofstream out = open_output(pl_save_complex);
      io::write_complex_json(out, rep.complex);
    }
    if (!pl_save_coords.empty() && rep.embedding_coords) {
      std::ofstream out = open_output(pl_save_coords);
      Mat rows(rep.embedding_coords->rows(), rep.embedding_coords->cols() + 1);
      for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        rows(i, 0) = static_cast<double>(i);
        rows.row(i).tail(rep.embedding_coords->cols()) = rep.embedding_coords->row(i);
      }
      std::vector<std::string> cols = {"index"};
      for (int k = 0; k < cfg.embed_dim; ++k) cols.push_back("z" + std::to_string(k));
      io::write_table(out, cols, rows);
    }
    std::cout << render_report(rep, pl_timings);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const spherot::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
