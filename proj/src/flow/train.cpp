#include "nfisam/flow/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nfisam/core/require.hpp"
#include "nfisam/geometry/pose2.hpp"

namespace nfisam::flow {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// objective over standardized data; gradient accumulated when requested
double objective_std(const TriangularFlow& flow, const Mat& z, ObjectiveTerm term,
                     std::vector<double>* grad) {
  std::size_t n = z.rows();
  int dim = flow.dim();
  double wq = term == ObjectiveTerm::LogDetOnly ? 0.0 : 1.0;
  double wd = term == ObjectiveTerm::LogQOnly ? 0.0 : 1.0;

  double obj = 0.0;
  if (wq != 0.0) obj += -0.5 * dim * kLog2Pi * n;
  if (wd != 0.0)
    for (int d = 0; d < dim; ++d) obj += -std::log(flow.stdev()[d]) * n;

  SplineWorkspace ws;
  Mat h;
  MlpCache cache;
  Mat gh;
  for (int r = 0; r < dim; ++r) {
    flow.row_preparams(r, z, n, h, grad ? &cache : nullptr);
    if (grad) gh = Mat(n, flow.rows()[r].n_pre, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double y, ld;
      flow.row_eval(r, h.row_span(i), z(i, r), y, ld, ws);
      obj += wq * (-0.5 * y * y) + wd * ld;
      if (grad) {
        double gy = wq * (-y) / static_cast<double>(n);
        double gld = wd / static_cast<double>(n);
        flow.row_backward(r, h.row_span(i), z(i, r), gy, gld, gh.row_span(i), ws);
      }
    }
    if (grad) {
      const RowShape& row = flow.rows()[r];
      if (row.ctx_dim == 0) {
        Mat dummy;
        mlp_backward(row.net, flow.params(), dummy, cache, gh, *grad);
      } else {
        Mat ctx(n, row.ctx_dim);
        for (std::size_t i = 0; i < n; ++i)
          for (int j = 0; j < row.ctx_dim; ++j) ctx(i, j) = z(i, j);
        mlp_backward(row.net, flow.params(), ctx, cache, gh, *grad);
      }
    }
  }
  return obj / static_cast<double>(n);
}

Mat standardize_block(const TriangularFlow& flow, const Mat& raw) {
  std::size_t n = raw.rows();
  int dim = flow.dim();
  Mat z(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = raw.row(i);
    double* dst = z.row(i);
    for (int d = 0; d < dim; ++d) {
      double v = src[d];
      if (flow.circular()[d]) v = geometry::wrap_angle(v);
      dst[d] = (v - flow.mean()[d]) / flow.stdev()[d];
    }
  }
  return z;
}

}  // namespace

double flow_objective(const TriangularFlow& flow, const Mat& raw_batch, ObjectiveTerm term,
                      std::vector<double>* grad) {
  require(raw_batch.cols() == static_cast<std::size_t>(flow.dim()),
          "flow_objective: dimension mismatch");
  if (grad) grad->assign(flow.params().size(), 0.0);
  Mat z = standardize_block(flow, raw_batch);
  return objective_std(flow, z, term, grad);
}

TriangularFlow train_flow(const SampleBlock& samples, const FlowTrainConfig& cfg,
                          TrainDiagnostics* diag) {
  std::size_t n = samples.rows();
  int dim = static_cast<int>(samples.dims());
  require(n >= 2, "train_flow: need at least 2 samples");
  require(dim >= 1, "train_flow: empty sample block");

  std::vector<bool> circular(dim);
  for (int d = 0; d < dim; ++d) circular[d] = samples.cols[d].circular;

  FlowStructure structure;
  structure.knots = cfg.knots;
  structure.hidden = cfg.hidden;
  structure.interval_bound = cfg.interval_bound;
  structure.deriv_floor = cfg.deriv_floor;
  structure.affine = cfg.affine_only;

  Rng rng(derive_seed(cfg.seed, 0xf10));
  TriangularFlow flow = TriangularFlow::create(dim, circular, structure, rng);

  // frozen standardization from the sample moments (wrapped first)
  std::vector<double> mean(dim, 0.0), stdev(dim, 0.0);
  Mat wrapped(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) {
      double v = samples.data(i, d);
      wrapped(i, d) = circular[d] ? geometry::wrap_angle(v) : v;
    }
  for (int d = 0; d < dim; ++d) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += wrapped(i, d);
    m /= static_cast<double>(n);
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = wrapped(i, d) - m;
      s2 += r * r;
    }
    mean[d] = m;
    stdev[d] = std::sqrt(s2 / static_cast<double>(n));
  }
  std::vector<int> degenerate;
  for (int d = 0; d < dim; ++d)
    if (stdev[d] < cfg.std_floor) {
      stdev[d] = cfg.std_floor;
      degenerate.push_back(d);
    }
  flow.set_standardization(mean, stdev, degenerate);

  Mat z(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) z(i, d) = (wrapped(i, d) - mean[d]) / stdev[d];

  // Adam state
  std::size_t np = flow.params().size();
  std::vector<double> g(np), m1(np, 0.0), m2(np, 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step_count = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  int batch = std::max(1, cfg.batch);

  double best = -std::numeric_limits<double>::infinity();
  int best_age = 0;
  if (diag) {
    diag->epoch_objective.clear();
    diag->degenerate_dims = degenerate;
  }

  int epoch = 0;
  for (; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_obj = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      std::size_t stop = std::min(n, start + batch);
      Mat zb(stop - start, dim);
      for (std::size_t i = start; i < stop; ++i)
        for (int d = 0; d < dim; ++d) zb(i - start, d) = z(order[i], d);

      std::fill(g.begin(), g.end(), 0.0);
      double obj = objective_std(flow, zb, ObjectiveTerm::Both, &g);
      epoch_obj += obj * static_cast<double>(stop - start);

      ++step_count;
      double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
      double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
      double* p = flow.params().data();
      for (std::size_t i = 0; i < np; ++i) {
        m1[i] = beta1 * m1[i] + (1.0 - beta1) * g[i];
        m2[i] = beta2 * m2[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] += cfg.step * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + eps);
      }
    }
    epoch_obj /= static_cast<double>(n);
    if (diag) diag->epoch_objective.push_back(epoch_obj);

    if (epoch_obj > best + 1e-4 * std::max(1.0, std::fabs(best))) {
      best = epoch_obj;
      best_age = 0;
    } else {
      ++best_age;
    }
    if (epoch + 1 >= cfg.min_epochs && best_age >= cfg.plateau_epochs) {
      ++epoch;
      break;
    }
  }
  if (diag) diag->epochs_run = epoch;

  flow.final_objective = objective_std(flow, z, ObjectiveTerm::Both, nullptr);
  return flow;
}

}  // namespace nfisam::flow
