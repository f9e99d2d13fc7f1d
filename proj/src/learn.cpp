#include "cmp/learn.hpp"

#include <algorithm>
#include <cmath>

namespace cmp {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

MatrixXd one_hot_history(const std::vector<Assignment>& history, int n_c,
                         int n_omega) {
  MatrixXd X = MatrixXd::Zero(n_c * (n_omega + 1), history.size());
  for (size_t k = 0; k < history.size(); ++k)
    for (int c = 0; c < n_c; ++c)
      X(c * (n_omega + 1) + history[k][c], static_cast<int>(k)) = 1.0;
  return X;
}

PolicyValueNet::PolicyValueNet(const ModelArch& arch) : arch_(arch) {
  const int in = arch.input(), H = arch.hidden_rnn, h1 = arch.hidden1,
            h2 = arch.hidden2, A = arch.actions(), tin = arch.trunk_in();
  int off = 0;
  auto add = [&](const std::string& name, int rows, int cols) {
    sections_.push_back({name, off, rows, cols});
    off += rows * cols;
  };
  for (const char* gate : {"z", "r", "h"}) {
    add(std::string("rnn.W") + gate, H, in);
    add(std::string("rnn.U") + gate, H, H);
    add(std::string("rnn.b") + gate, H, 1);
  }
  add("fc1.W", h1, tin);
  add("fc1.b", h1, 1);
  add("fc2.W", h2, h1);
  add("fc2.b", h2, 1);
  add("policy.W", A, h2);
  add("policy.b", A, 1);
  add("value.w", 1, h2);
  add("value.b", 1, 1);
  theta_ = VectorXd::Zero(off);
}

PolicyValueNet PolicyValueNet::init_random(const ModelArch& arch,
                                           std::uint64_t seed) {
  PolicyValueNet net(arch);
  std::mt19937_64 rng(seed);
  auto fill = [&](const std::string& name, int fan_in) {
    auto m = net.view(name);
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int c = 0; c < m.cols(); ++c)
      for (int r = 0; r < m.rows(); ++r) m(r, c) = uniform_real(rng, -s, s);
  };
  fill("rnn.Wz", arch.input());
  fill("rnn.Uz", arch.hidden_rnn);
  fill("rnn.Wr", arch.input());
  fill("rnn.Ur", arch.hidden_rnn);
  fill("rnn.Wh", arch.input());
  fill("rnn.Uh", arch.hidden_rnn);
  fill("fc1.W", arch.trunk_in());
  fill("fc2.W", arch.hidden1);
  fill("policy.W", arch.hidden2);
  fill("value.w", arch.hidden2);
  return net;
}

Eigen::Map<const MatrixXd> PolicyValueNet::view(const std::string& name) const {
  for (const Section& s : sections_)
    if (s.name == name)
      return {theta_.data() + s.offset, s.rows, s.cols};
  throw std::out_of_range("no section " + name);
}

Eigen::Map<MatrixXd> PolicyValueNet::view(const std::string& name) {
  for (const Section& s : sections_)
    if (s.name == name)
      return {theta_.data() + s.offset, s.rows, s.cols};
  throw std::out_of_range("no section " + name);
}

namespace {

inline MatrixXd sigmoid(const MatrixXd& x) {
  return ((-x.array()).exp() + 1.0).inverse().matrix();
}

Eigen::Map<const MatrixXd> cview(const VectorXd& theta,
                                 const std::vector<PolicyValueNet::Section>& secs,
                                 const char* name) {
  for (const auto& s : secs)
    if (s.name == name) return {theta.data() + s.offset, s.rows, s.cols};
  throw std::out_of_range(name);
}

Eigen::Map<MatrixXd> mview(VectorXd& theta,
                           const std::vector<PolicyValueNet::Section>& secs,
                           const char* name) {
  for (const auto& s : secs)
    if (s.name == name) return {theta.data() + s.offset, s.rows, s.cols};
  throw std::out_of_range(name);
}

struct GruCache {
  MatrixXd X, h_prev, z, r, g, rh;
};

/// Runs the encoder over per-sample histories (columns), masking columns
/// whose history ended. Returns the final hidden state.
MatrixXd gru_forward(const VectorXd& theta,
                     const std::vector<PolicyValueNet::Section>& secs,
                     const ModelArch& arch,
                     const std::vector<const TrainingSample*>& batch,
                     std::vector<GruCache>* caches) {
  const int B = static_cast<int>(batch.size());
  const int H = arch.hidden_rnn, in = arch.input();
  int Lmax = 0;
  for (const auto* s : batch) Lmax = std::max(Lmax, static_cast<int>(s->history.size()));

  auto Wz = cview(theta, secs, "rnn.Wz"), Uz = cview(theta, secs, "rnn.Uz"),
       Wr = cview(theta, secs, "rnn.Wr"), Ur = cview(theta, secs, "rnn.Ur"),
       Wh = cview(theta, secs, "rnn.Wh"), Uh = cview(theta, secs, "rnn.Uh");
  auto bz = cview(theta, secs, "rnn.bz"), br = cview(theta, secs, "rnn.br"),
       bh = cview(theta, secs, "rnn.bh");

  MatrixXd h = MatrixXd::Zero(H, B);
  for (int tau = 0; tau < Lmax; ++tau) {
    MatrixXd X = MatrixXd::Zero(in, B);
    RowVectorXd mask = RowVectorXd::Zero(B);
    for (int i = 0; i < B; ++i) {
      const auto& hist = batch[i]->history;
      if (tau >= static_cast<int>(hist.size())) continue;
      mask[i] = 1.0;
      for (int c = 0; c < arch.n_c; ++c)
        X(c * (arch.n_omega + 1) + hist[tau][c], i) = 1.0;
    }
    MatrixXd z = sigmoid(((Wz * X + Uz * h).colwise() + bz.col(0)));
    MatrixXd r = sigmoid(((Wr * X + Ur * h).colwise() + br.col(0)));
    MatrixXd rh = r.cwiseProduct(h);
    MatrixXd g = ((Wh * X + Uh * rh).colwise() + bh.col(0)).array().tanh().matrix();
    MatrixXd h_new = (1.0 - z.array()).matrix().cwiseProduct(h) + z.cwiseProduct(g);
    if (caches) caches->push_back({X, h, z, r, g, rh});
    for (int i = 0; i < B; ++i)
      if (mask[i] > 0.5) h.col(i) = h_new.col(i);
  }
  return h;
}

struct TrunkCache {
  MatrixXd u, a1p, a1, a2p, a2, logits;
  RowVectorXd vp, v;
};

void trunk_forward(const VectorXd& theta,
                   const std::vector<PolicyValueNet::Section>& secs,
                   const ModelArch& arch, const MatrixXd& h_final,
                   const std::vector<const TrainingSample*>& batch, TrunkCache& tc) {
  const int B = static_cast<int>(batch.size());
  tc.u.resize(arch.trunk_in(), B);
  tc.u.topRows(arch.hidden_rnn) = h_final;
  for (int i = 0; i < B; ++i) {
    tc.u.block(arch.hidden_rnn, i, 12, 1) = batch[i]->pose_features;
    tc.u.block(arch.hidden_rnn + 12, i, 6, 1) = batch[i]->goal;
  }
  auto W1 = cview(theta, secs, "fc1.W"), W2 = cview(theta, secs, "fc2.W"),
       Wp = cview(theta, secs, "policy.W"), wv = cview(theta, secs, "value.w");
  auto b1 = cview(theta, secs, "fc1.b"), b2 = cview(theta, secs, "fc2.b"),
       bp = cview(theta, secs, "policy.b"), bv = cview(theta, secs, "value.b");

  tc.a1p = (W1 * tc.u).colwise() + b1.col(0);
  tc.a1 = tc.a1p.cwiseMax(0.0);
  tc.a2p = (W2 * tc.a1).colwise() + b2.col(0);
  tc.a2 = tc.a2p.cwiseMax(0.0);
  tc.logits = (Wp * tc.a2).colwise() + bp.col(0);
  tc.vp = (wv * tc.a2).row(0) + RowVectorXd::Constant(B, bv(0, 0));
  tc.v = sigmoid(tc.vp);
}

/// Masked softmax over the legal actions of one column.
VectorXd masked_softmax(const MatrixXd& logits, int col,
                        const std::vector<int>& legal) {
  VectorXd p(legal.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < legal.size(); ++a) mx = std::max(mx, logits(legal[a], col));
  double sum = 0.0;
  for (size_t a = 0; a < legal.size(); ++a) {
    p[a] = std::exp(logits(legal[a], col) - mx);
    sum += p[a];
  }
  return p / sum;
}

}  // namespace

std::pair<VectorXd, double> PolicyValueNet::forward(const TrainingSample& s) const {
  std::vector<const TrainingSample*> batch{&s};
  MatrixXd h = gru_forward(theta_, sections_, arch_, batch, nullptr);
  TrunkCache tc;
  trunk_forward(theta_, sections_, arch_, h, batch, tc);
  return {masked_softmax(tc.logits, 0, s.legal), tc.v[0]};
}

double PolicyValueNet::loss(const std::vector<const TrainingSample*>& batch) const {
  MatrixXd h = gru_forward(theta_, sections_, arch_, batch, nullptr);
  TrunkCache tc;
  trunk_forward(theta_, sections_, arch_, h, batch, tc);
  double total = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const TrainingSample& s = *batch[i];
    const VectorXd p = masked_softmax(tc.logits, static_cast<int>(i), s.legal);
    double lp = 0.0;
    for (int a = 0; a < p.size(); ++a)
      if (s.p_bar[a] > 0) lp -= s.p_bar[a] * std::log(std::max(p[a], 1e-300));
    const double dv = tc.v[static_cast<int>(i)] - s.v_bar;
    total += dv * dv + lp;
  }
  return total / static_cast<double>(batch.size());
}

double PolicyValueNet::loss_and_grad(const std::vector<const TrainingSample*>& batch,
                                     VectorXd& grad) const {
  const int B = static_cast<int>(batch.size());
  const int H = arch_.hidden_rnn;
  grad = VectorXd::Zero(theta_.size());

  std::vector<GruCache> caches;
  MatrixXd h_final = gru_forward(theta_, sections_, arch_, batch, &caches);
  TrunkCache tc;
  trunk_forward(theta_, sections_, arch_, h_final, batch, tc);

  double total = 0.0;
  MatrixXd dlogits = MatrixXd::Zero(tc.logits.rows(), B);
  RowVectorXd dvp(B);
  for (int i = 0; i < B; ++i) {
    const TrainingSample& s = *batch[i];
    const VectorXd p = masked_softmax(tc.logits, i, s.legal);
    double lp = 0.0;
    for (int a = 0; a < p.size(); ++a) {
      if (s.p_bar[a] > 0) lp -= s.p_bar[a] * std::log(std::max(p[a], 1e-300));
      dlogits(s.legal[a], i) = (p[a] - s.p_bar[a]) / B;
    }
    const double dv = tc.v[i] - s.v_bar;
    total += dv * dv + lp;
    dvp[i] = 2.0 * dv * tc.v[i] * (1.0 - tc.v[i]) / B;
  }
  total /= B;

  auto Wp = cview(theta_, sections_, "policy.W");
  auto wv = cview(theta_, sections_, "value.w");
  auto W2 = cview(theta_, sections_, "fc2.W");
  auto W1 = cview(theta_, sections_, "fc1.W");

  mview(grad, sections_, "policy.W") += dlogits * tc.a2.transpose();
  mview(grad, sections_, "policy.b").col(0) += dlogits.rowwise().sum();
  mview(grad, sections_, "value.w") += dvp * tc.a2.transpose();
  mview(grad, sections_, "value.b")(0, 0) += dvp.sum();

  MatrixXd da2 = Wp.transpose() * dlogits + wv.transpose() * dvp;
  MatrixXd da2p =
      da2.cwiseProduct((tc.a2p.array() > 0.0).cast<double>().matrix());
  mview(grad, sections_, "fc2.W") += da2p * tc.a1.transpose();
  mview(grad, sections_, "fc2.b").col(0) += da2p.rowwise().sum();

  MatrixXd da1 = W2.transpose() * da2p;
  MatrixXd da1p =
      da1.cwiseProduct((tc.a1p.array() > 0.0).cast<double>().matrix());
  mview(grad, sections_, "fc1.W") += da1p * tc.u.transpose();
  mview(grad, sections_, "fc1.b").col(0) += da1p.rowwise().sum();

  MatrixXd dh = (W1.transpose() * da1p).topRows(H);

  auto Uz = cview(theta_, sections_, "rnn.Uz");
  auto Ur = cview(theta_, sections_, "rnn.Ur");
  auto Uh = cview(theta_, sections_, "rnn.Uh");

  for (int tau = static_cast<int>(caches.size()) - 1; tau >= 0; --tau) {
    const GruCache& cc = caches[tau];
    // columns whose history had ended pass dh through unchanged
    MatrixXd dh_cand = dh;
    MatrixXd dh_prev = MatrixXd::Zero(H, dh.cols());
    for (int i = 0; i < dh.cols(); ++i) {
      if (tau >= static_cast<int>(batch[i]->history.size())) {
        dh_prev.col(i) = dh.col(i);
        dh_cand.col(i).setZero();
      }
    }

    MatrixXd dz = dh_cand.cwiseProduct(cc.g - cc.h_prev);
    MatrixXd dg = dh_cand.cwiseProduct(cc.z);
    dh_prev += dh_cand.cwiseProduct((1.0 - cc.z.array()).matrix());

    MatrixXd dag = dg.cwiseProduct((1.0 - cc.g.array().square()).matrix());
    mview(grad, sections_, "rnn.Wh") += dag * cc.X.transpose();
    mview(grad, sections_, "rnn.Uh") += dag * cc.rh.transpose();
    mview(grad, sections_, "rnn.bh").col(0) += dag.rowwise().sum();

    MatrixXd drh = Uh.transpose() * dag;
    MatrixXd dr = drh.cwiseProduct(cc.h_prev);
    dh_prev += drh.cwiseProduct(cc.r);

    MatrixXd dar = dr.cwiseProduct(cc.r.cwiseProduct((1.0 - cc.r.array()).matrix()));
    mview(grad, sections_, "rnn.Wr") += dar * cc.X.transpose();
    mview(grad, sections_, "rnn.Ur") += dar * cc.h_prev.transpose();
    mview(grad, sections_, "rnn.br").col(0) += dar.rowwise().sum();
    dh_prev += Ur.transpose() * dar;

    MatrixXd daz = dz.cwiseProduct(cc.z.cwiseProduct((1.0 - cc.z.array()).matrix()));
    mview(grad, sections_, "rnn.Wz") += daz * cc.X.transpose();
    mview(grad, sections_, "rnn.Uz") += daz * cc.h_prev.transpose();
    mview(grad, sections_, "rnn.bz").col(0) += daz.rowwise().sum();
    dh_prev += Uz.transpose() * daz;

    dh = dh_prev;
  }
  return total;
}

namespace {

/// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
void shuffle_indices(std::vector<int>& idx, std::mt19937_64& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

struct Adam {
  VectorXd m, v;
  int t = 0;
  void step(VectorXd& theta, const VectorXd& g, const TrainConfig& cfg) {
    if (m.size() == 0) {
      m = VectorXd::Zero(theta.size());
      v = VectorXd::Zero(theta.size());
    }
    ++t;
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g.cwiseProduct(g);
    const double bc1 = 1 - std::pow(cfg.beta1, t);
    const double bc2 = 1 - std::pow(cfg.beta2, t);
    theta -= (cfg.lr / bc1) *
             m.cwiseQuotient(((v / bc2).cwiseSqrt().array() + cfg.eps).matrix());
  }
};

}  // namespace

PolicyValueNet train_model(const std::vector<TrainingSample>& dataset,
                           const ModelArch& arch, const TrainConfig& cfg,
                           TrainLog* log) {
  std::vector<const TrainingSample*> positives;
  for (const TrainingSample& s : dataset)
    if (s.v_bar > 0.0) positives.push_back(&s);  // D+ only, Eq. (13)-(14)
  if (positives.empty())
    throw EmptyPositiveSet("no feasible samples to train the policy-value net");

  PolicyValueNet net = PolicyValueNet::init_random(arch, cfg.seed);
  Adam adam;
  std::mt19937_64 rng(cfg.seed + 0x517cc1b727220a95ULL);

  std::vector<int> idx(positives.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  VectorXd grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(idx, rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < idx.size(); start += cfg.batch) {
      std::vector<const TrainingSample*> batch;
      for (size_t i = start; i < std::min(idx.size(), start + cfg.batch); ++i)
        batch.push_back(positives[idx[i]]);
      epoch_loss += net.loss_and_grad(batch, grad);
      adam.step(net.params(), grad, cfg);
      ++batches;
    }
    if (log) log->epoch_loss.push_back(epoch_loss / std::max(1, batches));
  }
  return net;
}

FeasibilityClassifier::FeasibilityClassifier(const ModelArch& arch,
                                             std::uint64_t encoder_seed)
    : arch_(arch), encoder_seed_(encoder_seed),
      encoder_(PolicyValueNet::init_random(arch, encoder_seed)),
      w_(VectorXd::Zero(arch.hidden_rnn + arch.pose_goal())) {}

VectorXd FeasibilityClassifier::features(const TrainingSample& s) const {
  std::vector<const TrainingSample*> batch{&s};
  MatrixXd h = gru_forward(encoder_.params(), encoder_.sections(), arch_, batch,
                           nullptr);
  VectorXd x(arch_.hidden_rnn + arch_.pose_goal());
  x.head(arch_.hidden_rnn) = h.col(0);
  x.segment(arch_.hidden_rnn, 12) = s.pose_features;
  x.tail(6) = s.goal;
  return x;
}

double FeasibilityClassifier::score(const TrainingSample& s) const {
  const double z = w_.dot(features(s)) + b_;
  return 1.0 / (1.0 + std::exp(-z));
}

namespace {

void fit_logistic(const MatrixXd& F, const std::vector<char>& y,
                  const std::vector<int>& rows, double w_pos,
                  const TrainConfig& cfg, std::uint64_t seed, VectorXd& w,
                  double& b) {
  w = VectorXd::Zero(F.rows());
  b = 0.0;
  VectorXd params = VectorXd::Zero(F.rows() + 1);
  Adam adam;
  std::mt19937_64 rng(seed);
  std::vector<int> idx = rows;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(idx, rng);
    for (size_t start = 0; start < idx.size(); start += cfg.batch) {
      const size_t end = std::min(idx.size(), start + cfg.batch);
      VectorXd g = VectorXd::Zero(params.size());
      for (size_t i = start; i < end; ++i) {
        const int row = idx[i];
        const double z = params.head(F.rows()).dot(F.col(row)) + params[F.rows()];
        const double p = 1.0 / (1.0 + std::exp(-z));
        const double factor =
            y[row] ? w_pos * (p - 1.0) : p;  // d(weighted BCE)/dz
        g.head(F.rows()) += factor * F.col(row);
        g[F.rows()] += factor;
      }
      g /= static_cast<double>(end - start);
      adam.step(params, g, cfg);
    }
  }
  w = params.head(F.rows());
  b = params[F.rows()];
}

}  // namespace

FeasibilityClassifier train_classifier(const std::vector<TrainingSample>& dataset,
                                       const ModelArch& arch,
                                       const TrainConfig& cfg) {
  int pos = 0, neg = 0;
  for (const TrainingSample& s : dataset) (s.feasible ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw SingleClass("classifier needs both feasible and infeasible samples");

  FeasibilityClassifier clf(arch, cfg.seed + 0x2545F4914F6CDD1DULL);

  const int N = static_cast<int>(dataset.size());
  MatrixXd F(arch.hidden_rnn + arch.pose_goal(), N);
  std::vector<char> y(N);
  for (int i = 0; i < N; ++i) {
    F.col(i) = clf.features(dataset[i]);
    y[i] = dataset[i].feasible ? 1 : 0;
  }
  const double w_pos = cfg.positive_weight > 0
                           ? cfg.positive_weight
                           : static_cast<double>(neg) / static_cast<double>(pos);

  // held-out estimate from an 80/20 split, then refit on everything
  std::vector<int> order(N);
  for (int i = 0; i < N; ++i) order[i] = i;
  std::mt19937_64 rng(cfg.seed + 0x9E3779B97F4A7C15ULL);
  shuffle_indices(order, rng);
  const int n_train = std::max(1, (8 * N) / 10);
  std::vector<int> train_rows(order.begin(), order.begin() + n_train);
  std::vector<int> held_rows(order.begin() + n_train, order.end());

  VectorXd w;
  double b;
  fit_logistic(F, y, train_rows, w_pos, cfg, cfg.seed + 11, w, b);

  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (int row : held_rows) {
    const double p = 1.0 / (1.0 + std::exp(-(w.dot(F.col(row)) + b)));
    const bool pred = p >= 0.5;
    if (y[row]) (pred ? tp : fn)++;
    else (pred ? fp : tn)++;
  }
  double acc = 0.0;
  int classes = 0;
  if (tp + fn > 0) { acc += tp / (tp + fn); ++classes; }
  if (tn + fp > 0) { acc += tn / (tn + fp); ++classes; }
  clf.held_out_balanced_accuracy = classes ? acc / classes : 0.0;

  std::vector<int> all_rows(order.begin(), order.end());
  fit_logistic(F, y, all_rows, w_pos, cfg, cfg.seed + 12, clf.weights(), clf.bias());
  return clf;
}

std::pair<VectorXd, double> LearnedGuide::priors(const TrainingSample& state) const {
  const int n = static_cast<int>(state.legal.size());
  if (classifier_.score(state) < 0.5)
    return {VectorXd::Constant(n, 1.0 / std::max(1, n)), 0.0};
  return net_.forward(state);
}

}  // namespace cmp
