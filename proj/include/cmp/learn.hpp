#pragma once

#include "cmp/search.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cmp {

struct EmptyPositiveSet : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingleClass : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int epochs = 300;
  int batch = 256;
  double positive_weight = 0.0;  // classifier; 0 = #negatives / #positives
  std::uint64_t seed = 1;
};

struct ModelArch {
  int n_c = 2;
  int n_omega = 5;
  int hidden_rnn = 64;
  int hidden1 = 128, hidden2 = 128;
  int h_lookahead = 1;  // goal lookahead in samples, kept for provenance

  int input() const { return n_c * (n_omega + 1); }
  int actions() const {
    int a = 1;
    for (int i = 0; i < n_c; ++i) a *= n_omega + 1;
    return a;
  }
  int pose_goal() const { return 18; }
  int trunk_in() const { return hidden_rnn + pose_goal(); }
};

/// One-hot encoding of an epoch history, one column per epoch.
Eigen::MatrixXd one_hot_history(const std::vector<Assignment>& history, int n_c,
                                int n_omega);

/// Goal-conditioned policy-value network: GRU history encoder, two-layer
/// trunk, masked-softmax policy head and sigmoid value head. Parameters live
/// in one flat vector addressed through named sections; gradients are
/// computed by hand (the architecture is small and fixed).
class PolicyValueNet {
 public:
  struct Section {
    std::string name;
    int offset = 0, rows = 0, cols = 0;
    int size() const { return rows * cols; }
  };

  explicit PolicyValueNet(const ModelArch& arch);
  static PolicyValueNet init_random(const ModelArch& arch, std::uint64_t seed);

  /// p is aligned with s.legal and sums to 1; v is in [0, 1].
  std::pair<VectorXd, double> forward(const TrainingSample& s) const;

  double loss(const std::vector<const TrainingSample*>& batch) const;
  double loss_and_grad(const std::vector<const TrainingSample*>& batch,
                       VectorXd& grad) const;

  const ModelArch& arch() const { return arch_; }
  const std::vector<Section>& sections() const { return sections_; }
  VectorXd& params() { return theta_; }
  const VectorXd& params() const { return theta_; }

  Eigen::Map<const Eigen::MatrixXd> view(const std::string& name) const;
  Eigen::Map<Eigen::MatrixXd> view(const std::string& name);

 private:
  ModelArch arch_;
  std::vector<Section> sections_;
  VectorXd theta_;
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

/// Adam on the positive subset {v_bar > 0} of the dataset. Throws
/// EmptyPositiveSet when no sample qualifies. Deterministic under the seed.
PolicyValueNet train_model(const std::vector<TrainingSample>& dataset,
                           const ModelArch& arch, const TrainConfig& cfg,
                           TrainLog* log = nullptr);

/// Logistic feasibility gate over (frozen random GRU encoding, pose, goal).
class FeasibilityClassifier {
 public:
  FeasibilityClassifier(const ModelArch& arch, std::uint64_t encoder_seed);

  VectorXd features(const TrainingSample& s) const;
  double score(const TrainingSample& s) const;  // probability of feasibility

  const ModelArch& arch() const { return arch_; }
  std::uint64_t encoder_seed() const { return encoder_seed_; }
  VectorXd& weights() { return w_; }
  const VectorXd& weights() const { return w_; }
  double& bias() { return b_; }
  double bias() const { return b_; }
  double held_out_balanced_accuracy = 0.0;

 private:
  ModelArch arch_;
  std::uint64_t encoder_seed_ = 0;
  PolicyValueNet encoder_;  // only the rnn.* sections are used
  VectorXd w_;
  double b_ = 0.0;
};

/// Weighted logistic regression (positives weighted #neg/#pos unless
/// overridden). Throws SingleClass when only one label is present.
FeasibilityClassifier train_classifier(const std::vector<TrainingSample>& dataset,
                                       const ModelArch& arch, const TrainConfig& cfg);

/// Classifier-gated network guidance: states labeled infeasible get uniform
/// priors and zero value, everything else the network outputs.
class LearnedGuide : public SearchGuide {
 public:
  LearnedGuide(PolicyValueNet net, FeasibilityClassifier classifier)
      : net_(std::move(net)), classifier_(std::move(classifier)) {}

  std::pair<VectorXd, double> priors(const TrainingSample& state) const override;

  const PolicyValueNet& net() const { return net_; }
  const FeasibilityClassifier& classifier() const { return classifier_; }

 private:
  PolicyValueNet net_;
  FeasibilityClassifier classifier_;
};

}  // namespace cmp
