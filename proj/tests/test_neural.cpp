#include "crossroads/neural.hpp"

#include <random>

#include "doctest.h"

using namespace crossroads::neural;

namespace {

Eigen::VectorXd random_vec(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

// Central finite differences of a scalar loss over every parameter.
double max_rel_grad_error(Mlp& net, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& loss_weights) {
  auto loss = [&]() {
    return loss_weights.dot(net.forward(Eigen::MatrixXd(x)).col(0));
  };
  ForwardCache cache;
  net.forward(Eigen::MatrixXd(x), &cache);
  Eigen::MatrixXd grad_out = loss_weights;
  const Gradients g = net.backward(cache, grad_out);

  const double h = 1e-5;
  double worst = 0.0;
  auto check_param = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = loss();
    param = keep - h;
    const double down = loss();
    param = keep;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic) / denom);
  };
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    for (Eigen::Index i = 0; i < net.w[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < net.w[l].cols(); ++j) {
        check_param(net.w[l](i, j), g.w[l](i, j));
      }
    }
    for (Eigen::Index i = 0; i < net.b[l].size(); ++i) {
      check_param(net.b[l][i], g.b[l][i]);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("zero actor network outputs zero actions") {
  Mlp actor({6, 8, 3}, Head::tanh_scaled, 5.0);
  const Eigen::VectorXd out = actor.forward_one(Eigen::VectorXd::Ones(6));
  CHECK(out.norm() == 0.0);
}

TEST_CASE("identity linear layer passes input through") {
  Mlp net({3, 3}, Head::linear);
  net.w[0].setIdentity();
  Eigen::VectorXd x(3);
  x << 1.5, -2.0, 0.25;
  CHECK((net.forward_one(x) - x).norm() == 0.0);
}

TEST_CASE("forward is deterministic") {
  std::mt19937_64 rng(3);
  Mlp net({5, 16, 16, 2}, Head::tanh_scaled, 5.0);
  net.init(rng);
  const Eigen::VectorXd x = random_vec(5, rng);
  const Eigen::VectorXd a = net.forward_one(x);
  const Eigen::VectorXd b = net.forward_one(x);
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("actor outputs are bounded by the scale") {
  std::mt19937_64 rng(4);
  Mlp actor({4, 32, 32, 2}, Head::tanh_scaled, 5.0);
  actor.init(rng);
  for (auto& w : actor.w) w *= 50.0;  // force saturation
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd out = actor.forward_one(random_vec(4, rng, 3.0));
    CHECK(out.cwiseAbs().maxCoeff() <= 5.0 + 1e-12);
  }
}

TEST_CASE("dimension mismatches are rejected") {
  Mlp net({4, 8, 2}, Head::linear);
  CHECK_THROWS_AS(net.forward_one(Eigen::VectorXd::Zero(5)),
                  DimensionMismatch);
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
  std::mt19937_64 rng(5);
  Mlp net({4, 8, 2}, Head::linear);
  net.init(rng);
  ForwardCache cache;
  net.forward(Eigen::MatrixXd(random_vec(4, rng)), &cache);
  const Gradients g = net.backward(cache, Eigen::MatrixXd::Zero(2, 1));
  for (const auto& gw : g.w) CHECK(gw.norm() == 0.0);
  for (const auto& gb : g.b) CHECK(gb.norm() == 0.0);
}

TEST_CASE("single linear layer gradient is the input") {
  Mlp net({3, 1}, Head::linear);
  net.w[0] << 0.5, -1.0, 2.0;
  Eigen::VectorXd x(3);
  x << 1.0, 2.0, 3.0;
  ForwardCache cache;
  net.forward(Eigen::MatrixXd(x), &cache);
  const Gradients g = net.backward(cache, Eigen::MatrixXd::Ones(1, 1));
  CHECK((g.w[0].transpose() - x).norm() < 1e-15);
  CHECK(g.b[0][0] == 1.0);
}

TEST_CASE("backward matches central finite differences") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 4; ++trial) {
    const bool tanh_head = trial % 2 == 0;
    Mlp net({5, 12, 10, 3},
            tanh_head ? Head::tanh_scaled : Head::linear, 5.0);
    net.init(rng);
    const Eigen::VectorXd x = random_vec(5, rng);
    const Eigen::VectorXd w = random_vec(3, rng);
    CHECK(max_rel_grad_error(net, x, w) < 1e-4);
  }
}

TEST_CASE("input gradient matches finite differences") {
  std::mt19937_64 rng(7);
  Mlp net({4, 10, 1}, Head::linear);
  net.init(rng);
  Eigen::VectorXd x = random_vec(4, rng);
  ForwardCache cache;
  net.forward(Eigen::MatrixXd(x), &cache);
  Eigen::MatrixXd dx;
  net.backward(cache, Eigen::MatrixXd::Ones(1, 1), &dx);
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd up = x, down = x;
    up[i] += h;
    down[i] -= h;
    const double numeric =
        (net.forward_one(up)[0] - net.forward_one(down)[0]) / (2 * h);
    CHECK(numeric == doctest::Approx(dx(i, 0)).epsilon(1e-4));
  }
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  std::mt19937_64 rng(8);
  Mlp net({3, 4, 1}, Head::linear);
  net.init(rng);
  const Mlp before = net;
  AdamState opt = AdamState::like(net, 3e-4);
  adam_step(net, net.zero_gradients(), opt);
  CHECK(opt.step == 1);
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    CHECK((net.w[l] - before.w[l]).norm() == 0.0);
  }
}

TEST_CASE("adam first step moves against the gradient sign by about lr") {
  Mlp net({1, 1}, Head::linear);
  net.w[0](0, 0) = 1.0;
  AdamState opt = AdamState::like(net, 3e-4);
  Gradients g = net.zero_gradients();
  g.w[0](0, 0) = 0.7;  // positive gradient -> parameter decreases
  adam_step(net, g, opt);
  CHECK(net.w[0](0, 0) == doctest::Approx(1.0 - 3e-4).epsilon(1e-6));
}

TEST_CASE("adam monotonically decreases a fixed quadratic") {
  Mlp net({1, 1}, Head::linear);
  net.w[0](0, 0) = 1.0;
  net.b[0][0] = -0.5;
  AdamState opt = AdamState::like(net, 3e-4);
  auto loss = [&] {
    const double w = net.w[0](0, 0), b = net.b[0][0];
    return 0.5 * (w * w + b * b);
  };
  double prev = loss();
  for (int i = 0; i < 1000; ++i) {
    Gradients g = net.zero_gradients();
    g.w[0](0, 0) = net.w[0](0, 0);
    g.b[0][0] = net.b[0][0];
    adam_step(net, g, opt);
    const double now = loss();
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("soft update blends toward the main network") {
  std::mt19937_64 rng(9);
  Mlp main({2, 4, 1}, Head::linear), target({2, 4, 1}, Head::linear);
  main.init(rng);
  target.init(rng);
  Mlp full = target;
  soft_update(main, full, 1.0);
  for (std::size_t l = 0; l < main.w.size(); ++l) {
    CHECK((full.w[l] - main.w[l]).norm() == 0.0);
  }
  Mlp frozen = target;
  soft_update(main, frozen, 0.0);
  for (std::size_t l = 0; l < main.w.size(); ++l) {
    CHECK((frozen.w[l] - target.w[l]).norm() == 0.0);
  }
  Mlp blended = target;
  soft_update(main, blended, 5e-3);
  CHECK(blended.w[0](0, 0) ==
        doctest::Approx(5e-3 * main.w[0](0, 0) + 0.995 * target.w[0](0, 0)));
}
