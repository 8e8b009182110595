#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include <json.hpp>

#include "pfsarnn/heads.hpp"
#include "pfsarnn/pfsa_io.hpp"

namespace pfsarnn {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Mat float_matrix(const Matrix<Rational>& m) {
  Mat out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c).to_double();
  }
  return out;
}

Mat stack(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  Mat out(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < cols; ++c) out(i, c) = rows[i][c];
  }
  return out;
}

// Largest deviation of log from the chord through u[i] and u[j], halved:
// the sup error of the best line over those points (log is concave).
double chord_error(const std::vector<double>& u, std::size_t i, std::size_t j) {
  const double la = std::log(u[i]), lb = std::log(u[j]);
  double worst = 0.0;
  for (std::size_t m = i + 1; m < j; ++m) {
    const double chord = la + (lb - la) * (u[m] - u[i]) / (u[j] - u[i]);
    worst = std::max(worst, std::log(u[m]) - chord);
  }
  return worst / 2.0;
}

// Greedy left-to-right segmentation with every segment within tol.
std::vector<std::pair<std::size_t, std::size_t>> segments(const std::vector<double>& u, double tol) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while (i < u.size()) {
    std::size_t j = i;
    while (j + 1 < u.size() && chord_error(u, i, j + 1) <= tol) ++j;
    out.emplace_back(i, j);
    i = j + 1;
  }
  return out;
}

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v) {
    if (out.empty() || x > out.back() * (1.0 + 1e-12)) out.push_back(x);
  }
  return out;
}

// Knots for every output under one shared tolerance, using at most `budget`
// knots in total.
std::vector<std::vector<double>> place_knots(const std::vector<std::vector<double>>& projections, std::size_t budget) {
  std::vector<std::vector<double>> values;
  for (const auto& p : projections) values.push_back(unique_sorted(p));
  auto knots_at = [&](double tol) {
    std::vector<std::vector<double>> knots(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
      const auto segs = segments(values[k], tol);
      for (std::size_t m = 0; m + 1 < segs.size(); ++m)
        knots[k].push_back(std::sqrt(values[k][segs[m].second] * values[k][segs[m + 1].first]));
    }
    return knots;
  };
  auto count = [](const std::vector<std::vector<double>>& knots) {
    std::size_t n = 0;
    for (const auto& k : knots) n += k.size();
    return n;
  };
  double lo = 1e-12, hi = 1e3;
  auto best = knots_at(hi);
  if (count(best) > budget) return std::vector<std::vector<double>>(values.size());
  for (int it = 0; it < 60; ++it) {
    const double mid = std::sqrt(lo * hi);
    auto candidate = knots_at(mid);
    if (count(candidate) <= budget) {
      hi = mid;
      best = std::move(candidate);
    } else {
      lo = mid;
    }
  }
  return best;
}

// Knot so small that the hinge never fires on a positive input.
constexpr double kInertLogKnot = -690.0;

// Hidden unit j is either linear along row k of E (a = E_k h, positive on the
// domain) or a hinge a = ReLU(1 - E_k h / exp(s_j)).
struct Basis {
  std::vector<std::size_t> row;  // E row per unit
  std::vector<bool> hinge;
  Vec log_knot;                  // used by hinge units only
};

Mat activations(const Basis& basis, const Mat& proj) {
  const auto n = proj.rows();
  const auto h = static_cast<Eigen::Index>(basis.row.size());
  Mat a(n, h);
  for (Eigen::Index j = 0; j < h; ++j) {
    const auto& u = proj.col(static_cast<Eigen::Index>(basis.row[j]));
    if (basis.hinge[j]) {
      a.col(j) = (1.0 - u.array() / std::exp(basis.log_knot(j))).max(0.0).matrix();
    } else {
      a.col(j) = u;
    }
  }
  return a;
}

MlpHead to_head(const Basis& basis, const Mat& Erows, const Mat& W2, const Vec& b2, double xi1, bool clamp) {
  const auto hidden = basis.row.size();
  MlpHead head = zero_mlp(static_cast<std::size_t>(Erows.cols()), hidden, static_cast<std::size_t>(Erows.rows()));
  for (std::size_t j = 0; j < hidden; ++j) {
    if (basis.hinge[j] && basis.log_knot(static_cast<Eigen::Index>(j)) <= kInertLogKnot) continue;
    const double scale = basis.hinge[j] ? -1.0 / std::exp(basis.log_knot(static_cast<Eigen::Index>(j))) : 1.0;
    for (std::size_t i = 0; i < head.input_dim; ++i)
      head.W1(j, i) = scale * Erows(static_cast<Eigen::Index>(basis.row[j]), static_cast<Eigen::Index>(i));
    head.b1[j] = basis.hinge[j] ? 1.0 : 0.0;
  }
  for (std::size_t k = 0; k < head.outputs; ++k) {
    for (std::size_t j = 0; j < hidden; ++j)
      head.W2(k, j) = W2(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
    head.b2[k] = b2(static_cast<Eigen::Index>(k));
  }
  head.xi1 = xi1;
  head.clamp = clamp;
  return head;
}

Mat log_targets(const Mat& proj) { return proj.array().log().matrix(); }

struct Adam {
  Vec m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-12;
  std::size_t t = 0;
  explicit Adam(Eigen::Index n) : m(Vec::Zero(n)), v(Vec::Zero(n)) {}
  void step(Vec& params, const Vec& grad, double lr) {
    ++t;
    m = beta1 * m + (1 - beta1) * grad;
    v = beta2 * v + (1 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1 - std::pow(beta2, static_cast<double>(t));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

}  // namespace

double sup_logit_error(const MlpHead& head, const OutputMatrix& output, const std::vector<std::vector<double>>& inputs) {
  const Mat E = float_matrix(output.E);
  double worst = 0.0;
  for (const auto& x : inputs) {
    const auto z = head.logits(x);
    const Vec u = E * Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (Eigen::Index k = 0; k < u.size(); ++k) {
      const double err = std::abs(std::log(u(k)) - z[static_cast<std::size_t>(k)]);
      worst = std::max(worst, std::isnan(err) ? std::numeric_limits<double>::infinity() : err);
    }
  }
  return worst;
}

MlpFit fit_mlp_log_head(const OutputMatrix& output, const std::vector<HiddenState<double>>& samples,
                        const MlpFitConfig& config) {
  if (samples.empty()) throw std::invalid_argument("fit_mlp_log_head needs at least one sample");
  if (config.hidden == 0 || config.max_iterations == 0 || !(config.learning_rate > 0.0) || !(config.jitter >= 0.0) ||
      !(config.target_tau > 0.0))
    throw std::invalid_argument("MLP fit configuration values must be positive");
  const Mat E = float_matrix(output.E);
  const auto dim = static_cast<std::size_t>(E.cols());
  const auto outputs = static_cast<Eigen::Index>(E.rows());

  MlpFitReport report;
  report.config = config;
  report.target_tau = config.target_tau;
  report.xi1 = std::numeric_limits<double>::infinity();
  report.xi2 = std::numeric_limits<double>::infinity();
  std::vector<double> mass;
  for (const auto& s : samples) {
    if (s.entries.size() != dim) throw std::invalid_argument("sample dimension does not match the output matrix");
    const Vec u = E * Eigen::Map<const Vec>(s.entries.data(), static_cast<Eigen::Index>(dim));
    if ((u.array() <= 0.0).any())
      throw std::invalid_argument("sample has a zero entry of E h; the log target is undefined");
    for (double v : s.entries) {
      if (v > 0.0) report.xi1 = std::min(report.xi1, v);
    }
    report.xi2 = std::min(report.xi2, u.array().log().minCoeff());
    mass.push_back(s.l1_norm());
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto jittered = [&](const std::vector<double>& x) {
    auto y = x;
    for (auto& v : y) {
      if (v > 0.0) v *= 1.0 + config.jitter * unit(rng);
    }
    return y;
  };
  std::vector<std::vector<double>> train, validation;
  std::vector<double> train_mass;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    train.push_back(samples[i].entries);
    train_mass.push_back(mass[i]);
    for (std::size_t c = 0; c < config.train_copies; ++c) {
      train.push_back(jittered(samples[i].entries));
      train_mass.push_back(mass[i]);
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    validation.push_back(samples[i].entries);
    for (std::size_t c = 0; c < config.validation_copies; ++c) validation.push_back(jittered(samples[i].entries));
  }
  report.train_size = train.size();
  report.validation_size = validation.size();

  const Mat X = stack(train, dim);
  const Mat proj = X * E.transpose();
  const Mat T = log_targets(proj);
  const auto n = X.rows();

  // Row weights: half proportional to prefix mass, half uniform.
  Vec mass_w = Eigen::Map<const Vec>(train_mass.data(), n);
  mass_w /= mass_w.sum();
  Vec uniform_w = Vec::Constant(n, 1.0 / static_cast<double>(n));

  // Constructive initialization.
  Basis basis;
  const auto linear_units = std::min<std::size_t>(config.hidden, static_cast<std::size_t>(outputs));
  for (std::size_t k = 0; k < linear_units; ++k) {
    basis.row.push_back(k);
    basis.hinge.push_back(false);
  }
  std::vector<std::vector<double>> projections(static_cast<std::size_t>(outputs));
  for (Eigen::Index k = 0; k < outputs; ++k)
    projections[static_cast<std::size_t>(k)].assign(proj.col(k).data(), proj.col(k).data() + n);
  const auto knots = place_knots(projections, config.hidden - linear_units);
  std::vector<double> log_knots(linear_units, 0.0);
  for (std::size_t k = 0; k < knots.size(); ++k) {
    for (double t : knots[k]) {
      basis.row.push_back(k);
      basis.hinge.push_back(true);
      log_knots.push_back(std::log(t));
    }
  }
  // Units left over once every output is covered stay inert.
  while (basis.row.size() < config.hidden) {
    basis.row.push_back(basis.row.size() % static_cast<std::size_t>(outputs));
    basis.hinge.push_back(true);
    log_knots.push_back(kInertLogKnot);
  }
  basis.log_knot = Eigen::Map<const Vec>(log_knots.data(), static_cast<Eigen::Index>(log_knots.size()));
  const auto hidden = static_cast<Eigen::Index>(basis.row.size());

  auto solve_output = [&](const Vec& w) {
    Mat phi(n, hidden + 1);
    phi.leftCols(hidden) = activations(basis, proj);
    phi.col(hidden).setOnes();
    const Vec sw = w.cwiseSqrt();
    const Mat coeffs = (sw.asDiagonal() * phi).completeOrthogonalDecomposition().solve(sw.asDiagonal() * T);
    return std::pair<Mat, Vec>(coeffs.topRows(hidden).transpose(), coeffs.row(hidden).transpose());
  };
  Vec weights = 0.5 * mass_w + 0.5 * uniform_w;
  auto [W2, b2] = solve_output(weights);

  auto residuals = [&](const Basis& bs, const Mat& w2, const Vec& bias) {
    Mat r = activations(bs, proj) * w2.transpose();
    r.rowwise() += bias.transpose();
    return Mat(r - T);
  };
  report.initial_tau = sup_logit_error(to_head(basis, E, W2, b2, report.xi1, config.clamp), output, validation);

  // Refinement: Adam over (log knots, W2, b2). The uniform half of the row
  // weights is shifted toward the worst rows every few hundred steps.
  const Eigen::Index n_w2 = outputs * hidden;
  Vec params(hidden + n_w2 + outputs);
  auto pack = [&](const Basis& bs, const Mat& w2, const Vec& bias) {
    params.head(hidden) = bs.log_knot;
    params.segment(hidden, n_w2) = Eigen::Map<const Vec>(w2.data(), n_w2);
    params.tail(outputs) = bias;
  };
  pack(basis, W2, b2);
  Adam adam(params.size());
  Basis best_basis = basis;
  Mat best_W2 = W2;
  Vec best_b2 = b2;
  double best_train_sup = residuals(basis, W2, b2).cwiseAbs().maxCoeff();
  constexpr std::size_t kReweightEvery = 250;
  std::size_t iterations = 0;
  for (; iterations < config.max_iterations; ++iterations) {
    basis.log_knot = params.head(hidden);
    W2 = Eigen::Map<const Mat>(params.segment(hidden, n_w2).data(), outputs, hidden);
    b2 = params.tail(outputs);
    const Mat A = activations(basis, proj);
    Mat R = A * W2.transpose();
    R.rowwise() += b2.transpose();
    R -= T;
    const double train_sup = R.cwiseAbs().maxCoeff();
    if (train_sup < best_train_sup) {
      best_train_sup = train_sup;
      best_basis = basis;
      best_W2 = W2;
      best_b2 = b2;
    }
    if (iterations > 0 && iterations % kReweightEvery == 0) {
      const Vec row_err = R.cwiseAbs().rowwise().maxCoeff();
      uniform_w = uniform_w.cwiseProduct(row_err / row_err.mean());
      uniform_w /= uniform_w.sum();
      weights = 0.5 * mass_w + 0.5 * uniform_w;
    }
    const Mat G = 2.0 * (weights.asDiagonal() * R);  // dLoss/dOutput
    Vec grad(params.size());
    const Mat gW2 = G.transpose() * A;
    grad.segment(hidden, n_w2) = Eigen::Map<const Vec>(gW2.data(), n_w2);
    grad.tail(outputs) = G.colwise().sum().transpose();
    const Mat gA = G * W2;
    for (Eigen::Index j = 0; j < hidden; ++j) {
      if (!basis.hinge[static_cast<std::size_t>(j)]) {
        grad(j) = 0.0;
        continue;
      }
      // d/ds ReLU(1 - u e^{-s}) = u e^{-s} where active.
      const auto& u = proj.col(static_cast<Eigen::Index>(basis.row[static_cast<std::size_t>(j)]));
      const double inv_t = std::exp(-basis.log_knot(j));
      double g = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (A(i, j) > 0.0) g += gA(i, j) * u(i) * inv_t;
      }
      grad(j) = g;
    }
    const double progress = static_cast<double>(iterations) / static_cast<double>(config.max_iterations);
    const double lr = config.final_learning_rate +
                      0.5 * (config.learning_rate - config.final_learning_rate) * (1.0 + std::cos(M_PI * progress));
    adam.step(params, grad, lr);
  }

  MlpFit fit{to_head(best_basis, E, best_W2, best_b2, report.xi1, config.clamp), std::move(report)};
  fit.report.iterations = iterations;
  fit.report.tau_achieved = sup_logit_error(fit.head, output, validation);
  fit.report.converged = fit.report.tau_achieved <= config.target_tau;
  fit.report.validation = std::move(validation);
  return fit;
}

namespace {

using nlohmann::json;

json matrix_doc(const Matrix<double>& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

Matrix<double> matrix_from(const json& doc, const char* field, std::size_t rows, std::size_t cols) {
  const auto& v = doc.at(field);
  if (!v.is_array() || v.size() != rows) throw ParseError(std::string("field '") + field + "' has the wrong shape");
  Matrix<double> m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!v[r].is_array() || v[r].size() != cols) throw ParseError(std::string("field '") + field + "' has the wrong shape");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = v[r][c].get<double>();
  }
  return m;
}

}  // namespace

std::string mlp_to_json(const MlpFit& fit) {
  const auto& h = fit.head;
  const auto& r = fit.report;
  json doc;
  doc["input_dim"] = h.input_dim;
  doc["hidden"] = h.hidden;
  doc["outputs"] = h.outputs;
  doc["xi1"] = h.xi1;
  doc["clamp"] = h.clamp;
  doc["temperature"] = h.temperature;
  doc["W1"] = matrix_doc(h.W1);
  doc["b1"] = h.b1;
  doc["W2"] = matrix_doc(h.W2);
  doc["b2"] = h.b2;
  doc["fit"] = {{"tau_achieved", r.tau_achieved},
                {"target_tau", r.target_tau},
                {"converged", r.converged},
                {"initial_tau", r.initial_tau},
                {"xi1", r.xi1},
                {"xi2", r.xi2},
                {"iterations", r.iterations},
                {"train_size", r.train_size},
                {"validation_size", r.validation_size}};
  doc["config"] = {{"hidden", r.config.hidden},
                   {"train_copies", r.config.train_copies},
                   {"validation_copies", r.config.validation_copies},
                   {"jitter", r.config.jitter},
                   {"max_iterations", r.config.max_iterations},
                   {"learning_rate", r.config.learning_rate},
                   {"final_learning_rate", r.config.final_learning_rate},
                   {"target_tau", r.config.target_tau},
                   {"seed", r.config.seed},
                   {"clamp", r.config.clamp}};
  doc["validation"] = r.validation;
  // nlohmann prints doubles with round-trip precision.
  return doc.dump(1) + "\n";
}

MlpFit parse_mlp(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed MLP head JSON: ") + e.what());
  }
  try {
    MlpFit fit;
    auto& h = fit.head;
    h.input_dim = doc.at("input_dim").get<std::size_t>();
    h.hidden = doc.at("hidden").get<std::size_t>();
    h.outputs = doc.at("outputs").get<std::size_t>();
    h.xi1 = doc.at("xi1").get<double>();
    h.clamp = doc.at("clamp").get<bool>();
    h.temperature = doc.value("temperature", 1.0);
    h.W1 = matrix_from(doc, "W1", h.hidden, h.input_dim);
    h.b1 = doc.at("b1").get<std::vector<double>>();
    h.W2 = matrix_from(doc, "W2", h.outputs, h.hidden);
    h.b2 = doc.at("b2").get<std::vector<double>>();
    if (h.b1.size() != h.hidden || h.b2.size() != h.outputs) throw ParseError("bias vectors have the wrong length");
    auto& r = fit.report;
    const auto& f = doc.at("fit");
    r.tau_achieved = f.at("tau_achieved").get<double>();
    r.target_tau = f.at("target_tau").get<double>();
    r.converged = f.at("converged").get<bool>();
    r.initial_tau = f.value("initial_tau", 0.0);
    r.xi1 = f.at("xi1").get<double>();
    r.xi2 = f.at("xi2").get<double>();
    r.iterations = f.at("iterations").get<std::size_t>();
    r.train_size = f.at("train_size").get<std::size_t>();
    r.validation_size = f.at("validation_size").get<std::size_t>();
    const auto& c = doc.at("config");
    r.config.hidden = c.at("hidden").get<std::size_t>();
    r.config.train_copies = c.at("train_copies").get<std::size_t>();
    r.config.validation_copies = c.at("validation_copies").get<std::size_t>();
    r.config.jitter = c.at("jitter").get<double>();
    r.config.max_iterations = c.at("max_iterations").get<std::size_t>();
    r.config.learning_rate = c.at("learning_rate").get<double>();
    r.config.final_learning_rate = c.at("final_learning_rate").get<double>();
    r.config.target_tau = c.at("target_tau").get<double>();
    r.config.seed = c.at("seed").get<std::uint64_t>();
    r.config.clamp = c.at("clamp").get<bool>();
    r.validation = doc.at("validation").get<std::vector<std::vector<double>>>();
    return fit;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid MLP head document: ") + e.what());
  }
}

}  // namespace pfsarnn
