#include "crossroads/neural.hpp"

#include <cmath>

namespace crossroads::neural {

Mlp::Mlp(std::vector<int> dims, Head head, double out_scale)
    : dims_(std::move(dims)), head_(head), out_scale_(out_scale) {
  if (dims_.size() < 2) throw DimensionMismatch("need at least two layer dims");
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    w.emplace_back(Eigen::MatrixXd::Zero(dims_[i + 1], dims_[i]));
    b.emplace_back(Eigen::VectorXd::Zero(dims_[i + 1]));
  }
}

void Mlp::init(std::mt19937_64& rng, double final_layer_scale) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w[l].cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    const double scale = l + 1 == w.size() ? final_layer_scale : 1.0;
    for (Eigen::Index i = 0; i < w[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < w[l].cols(); ++j) w[l](i, j) = scale * u(rng);
    }
    for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l](i) = scale * u(rng);
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x,
                             ForwardCache* cache) const {
  if (x.rows() != in_dim()) {
    throw DimensionMismatch("forward input rows " + std::to_string(x.rows()) +
                            " != " + std::to_string(in_dim()));
  }
  if (cache) {
    cache->input = x;
    cache->pre.clear();
    cache->pre.reserve(w.size());
  }
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < w.size(); ++l) {
    Eigen::MatrixXd z = (w[l] * h).colwise() + b[l];
    if (cache) cache->pre.push_back(z);
    if (l + 1 < w.size()) {
      h = z.cwiseMax(0.0);
    } else if (head_ == Head::tanh_scaled) {
      h = out_scale_ * z.array().tanh();
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Eigen::VectorXd Mlp::forward_one(const Eigen::VectorXd& x) const {
  return forward(Eigen::MatrixXd(x)).col(0);
}

Gradients Mlp::backward(const ForwardCache& cache,
                        const Eigen::MatrixXd& grad_out,
                        Eigen::MatrixXd* grad_input) const {
  if (cache.pre.size() != w.size()) {
    throw DimensionMismatch("cache does not match network depth");
  }
  if (grad_out.rows() != out_dim() || grad_out.cols() != cache.input.cols()) {
    throw DimensionMismatch("output-gradient shape mismatch");
  }

  Gradients g = zero_gradients();
  Eigen::MatrixXd delta;  // d(loss)/d(pre-activation) of the current layer
  if (head_ == Head::tanh_scaled) {
    const Eigen::ArrayXXd t = cache.pre.back().array().tanh();
    delta = grad_out.array() * out_scale_ * (1.0 - t * t);
  } else {
    delta = grad_out;
  }

  for (std::size_t l = w.size(); l-- > 0;) {
    const Eigen::MatrixXd& below =
        l == 0 ? cache.input : cache.pre[l - 1].cwiseMax(0.0);
    g.w[l] = delta * below.transpose();
    g.b[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (w[l].transpose() * delta).array() *
              (cache.pre[l - 1].array() > 0.0).cast<double>();
    } else if (grad_input) {
      *grad_input = w[0].transpose() * delta;
    }
  }
  return g;
}

Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (std::size_t l = 0; l < w.size(); ++l) {
    g.w.emplace_back(Eigen::MatrixXd::Zero(w[l].rows(), w[l].cols()));
    g.b.emplace_back(Eigen::VectorXd::Zero(b[l].size()));
  }
  return g;
}

AdamState AdamState::like(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    s.mw.emplace_back(Eigen::MatrixXd::Zero(net.w[l].rows(), net.w[l].cols()));
    s.vw.emplace_back(Eigen::MatrixXd::Zero(net.w[l].rows(), net.w[l].cols()));
    s.mb.emplace_back(Eigen::VectorXd::Zero(net.b[l].size()));
    s.vb.emplace_back(Eigen::VectorXd::Zero(net.b[l].size()));
  }
  return s;
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
  if (grads.w.size() != net.w.size() || state.mw.size() != net.w.size()) {
    throw DimensionMismatch("adam state/gradient shape mismatch");
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, state.step);
  const double c2 = 1.0 - std::pow(state.beta2, state.step);
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    state.mw[l] = state.beta1 * state.mw[l] + (1.0 - state.beta1) * grads.w[l];
    state.vw[l] = state.beta2 * state.vw[l] +
                  (1.0 - state.beta2) * grads.w[l].cwiseProduct(grads.w[l]);
    net.w[l].array() -= state.lr * (state.mw[l].array() / c1) /
                        ((state.vw[l].array() / c2).sqrt() + state.eps);
    state.mb[l] = state.beta1 * state.mb[l] + (1.0 - state.beta1) * grads.b[l];
    state.vb[l] = state.beta2 * state.vb[l] +
                  (1.0 - state.beta2) * grads.b[l].cwiseProduct(grads.b[l]);
    net.b[l].array() -= state.lr * (state.mb[l].array() / c1) /
                        ((state.vb[l].array() / c2).sqrt() + state.eps);
  }
}

void soft_update(const Mlp& main, Mlp& target, double tau) {
  if (main.w.size() != target.w.size()) {
    throw DimensionMismatch("soft_update across different depths");
  }
  for (std::size_t l = 0; l < main.w.size(); ++l) {
    if (main.w[l].rows() != target.w[l].rows() ||
        main.w[l].cols() != target.w[l].cols()) {
      throw DimensionMismatch("soft_update across different layer shapes");
    }
    target.w[l] = tau * main.w[l] + (1.0 - tau) * target.w[l];
    target.b[l] = tau * main.b[l] + (1.0 - tau) * target.b[l];
  }
}

}  // namespace crossroads::neural
