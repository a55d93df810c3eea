#pragma once

#include <Eigen/Core>
#include <random>
#include <stdexcept>
#include <vector>

namespace crossroads::neural {

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class Head { linear, tanh_scaled };

struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;  // pre-activation per layer
};

struct Gradients {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
};

// Dense feed-forward network. Hidden layers use the rectifier; the output is
// either linear or out_scale * tanh. Weights are (out x in), batches are
// stored one sample per column.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> dims, Head head, double out_scale = 1.0);

  // Uniform fan-in initialization; the last layer is shrunk by
  // final_layer_scale (near-zero initial actor outputs).
  void init(std::mt19937_64& rng, double final_layer_scale = 1.0);

  int in_dim() const { return dims_.front(); }
  int out_dim() const { return dims_.back(); }
  std::size_t n_layers() const { return w.size(); }
  Head head() const { return head_; }
  double out_scale() const { return out_scale_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x,
                          ForwardCache* cache = nullptr) const;
  Eigen::VectorXd forward_one(const Eigen::VectorXd& x) const;

  // Exact reverse-mode gradients for the loss whose d(loss)/d(output) is
  // grad_out; optionally also returns d(loss)/d(input).
  Gradients backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_out,
                     Eigen::MatrixXd* grad_input = nullptr) const;

  Gradients zero_gradients() const;

  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;

 private:
  std::vector<int> dims_;
  Head head_ = Head::linear;
  double out_scale_ = 1.0;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(const Mlp& net, double lr);
};

void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

// target <- tau * main + (1 - tau) * target
void soft_update(const Mlp& main, Mlp& target, double tau);

}  // namespace crossroads::neural
