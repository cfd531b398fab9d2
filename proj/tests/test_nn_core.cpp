#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "lautum/errors.hpp"
#include "lautum/nn.hpp"
#include "lautum/rng.hpp"
#include "support/finite_diff.hpp"
#include "support/random_inputs.hpp"

using namespace lautum;
using namespace lautum::nn;
using testsupport::random_matrix;

namespace {

Eigen::MatrixXd random_onehot(Rng& rng, Eigen::Index k, Eigen::Index b) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(k, b);
  for (Eigen::Index s = 0; s < b; ++s) {
    y(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(k))), s) =
        1.0;
  }
  return y;
}

// Worst relative finite-difference error over every parameter of the net for
// the CE loss on (x, y). Analytic gradients are computed before any
// perturbation.
double net_fd_worst_rel_err(Network& net, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& y) {
  ForwardCache cache;
  const Eigen::MatrixXd logits = net.forward(x, &cache);
  const CeLossResult ce = softmax_ce_loss(logits, y);
  const Gradients grads = net.backward(cache, ce.dlogits);

  auto loss = [&]() { return softmax_ce_loss(net.forward(x), y).loss; };

  double worst = 0.0;
  auto& layers = net.mutable_layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    if (!layers[li].has_params()) continue;
    worst = std::max(
        worst, testsupport::max_grad_rel_err(loss, layers[li].weights,
                                             grads[li].weights));
    Eigen::MatrixXd bias_view = layers[li].bias;
    for (Eigen::Index i = 0; i < layers[li].bias.size(); ++i) {
      const double numeric =
          testsupport::central_diff(loss, layers[li].bias(i));
      const double analytic = grads[li].bias(i);
      const double denom = std::max(std::abs(analytic), std::abs(numeric));
      if (denom < 1e-8) continue;
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("identity dense network reproduces its inputs") {
  NetworkSpec spec;
  spec.input = {1, 1, 4};
  spec.layers = {LayerSpec::dense(4)};
  spec.seed = 7;
  Network net(spec, 4);
  net.mutable_layers()[0].weights = Eigen::MatrixXd::Identity(4, 4);
  net.mutable_layers()[0].bias.setZero();

  Rng rng(201);
  const Eigen::MatrixXd x = random_matrix(rng, 4, 6);
  CHECK((net.forward(x) - x).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("zero weights give zero logits and a uniform softmax") {
  NetworkSpec spec;
  spec.input = {1, 1, 3};
  spec.layers = {LayerSpec::dense(8), LayerSpec::relu(), LayerSpec::dense(5)};
  spec.seed = 7;
  Network net(spec, 5);
  for (Layer& layer : net.mutable_layers()) {
    if (layer.has_params()) {
      layer.weights.setZero();
      layer.bias.setZero();
    }
  }
  Rng rng(202);
  const Eigen::MatrixXd x = random_matrix(rng, 3, 4);
  const Eigen::MatrixXd logits = net.forward(x);
  CHECK(logits.cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd y = random_onehot(rng, 5, 4);
  CHECK(softmax_ce_loss(logits, y).loss ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("fixed-seed two-layer MLP matches the pinned golden logits") {
  NetworkSpec spec;
  spec.input = {1, 1, 4};
  spec.layers = {LayerSpec::dense(5), LayerSpec::relu(), LayerSpec::dense(3)};
  spec.seed = 42;
  Network net(spec, 3);
  Eigen::MatrixXd x(4, 2);
  x << 0.5, -1.0, 1.5, 0.25, -0.75, 2.0, 0.1, -0.3;
  const Eigen::MatrixXd logits = net.forward(x);
  Eigen::MatrixXd golden(3, 2);
  golden << 0.46429415560627729, 0.61698489068151008,  //
      0.23281725461581756, -0.32891430545946049,       //
      0.50001520679746614, 1.773431560487333;
  CHECK((logits - golden).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("softmax cross-entropy") {
  SUBCASE("uniform logits cost log K") {
    const Eigen::MatrixXd logits = Eigen::MatrixXd::Constant(10, 3, 0.7);
    Rng rng(203);
    const Eigen::MatrixXd y = random_onehot(rng, 10, 3);
    CHECK(softmax_ce_loss(logits, y).loss ==
          doctest::Approx(std::log(10.0)).epsilon(1e-12));
  }

  SUBCASE("saturating the true class drives the loss to zero") {
    Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(4, 1);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(4, 1);
    y(2, 0) = 1.0;
    logits(2, 0) = 60.0;
    CHECK(softmax_ce_loss(logits, y).loss < 1e-12);
    CHECK(softmax_ce_loss(logits, y).loss >= 0.0);
  }

  SUBCASE("gradient matches central finite differences") {
    Rng rng(204);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::MatrixXd logits = random_matrix(rng, 4, 3, 2.0);
      const Eigen::MatrixXd y = random_onehot(rng, 4, 3);
      const Eigen::MatrixXd analytic = softmax_ce_loss(logits, y).dlogits;
      auto f = [&]() { return softmax_ce_loss(logits, y).loss; };
      const double worst = testsupport::max_grad_rel_err(f, logits, analytic);
      CHECK(worst <= 1e-6);
    }
  }

  SUBCASE("labels must be exactly one-hot") {
    const Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(3, 2);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(3, 2);
    y(0, 0) = 1.0;
    y(1, 1) = 0.5;
    y(2, 1) = 0.5;
    CHECK_THROWS_AS(softmax_ce_loss(logits, y), DataError);
    y.setZero();
    CHECK_THROWS_AS(softmax_ce_loss(logits, y), DataError);
  }

  SUBCASE("loss is nonnegative on random instances") {
    Rng rng(205);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::MatrixXd logits = random_matrix(rng, 6, 5, 3.0);
      const Eigen::MatrixXd y = random_onehot(rng, 6, 5);
      CHECK(softmax_ce_loss(logits, y).loss >= 0.0);
    }
  }
}

TEST_CASE("backward pass") {
  SUBCASE("zero upstream gradient gives all-zero parameter gradients") {
    NetworkSpec spec;
    spec.input = {1, 1, 4};
    spec.layers = {LayerSpec::dense(6), LayerSpec::relu(),
                   LayerSpec::dense(3)};
    spec.seed = 11;
    Network net(spec, 3);
    Rng rng(206);
    const Eigen::MatrixXd x = random_matrix(rng, 4, 5);
    ForwardCache cache;
    net.forward(x, &cache);
    const Gradients grads =
        net.backward(cache, Eigen::MatrixXd::Zero(3, 5));
    for (const LayerGrads& g : grads) {
      if (g.weights.size() > 0) {
        CHECK(g.weights.cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.bias.cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }

  SUBCASE("dense weight gradient equals dY X^T (loop oracle)") {
    NetworkSpec spec;
    spec.input = {1, 1, 3};
    spec.layers = {LayerSpec::dense(4)};
    spec.seed = 12;
    Network net(spec, 4);
    Rng rng(207);
    const Eigen::MatrixXd x = random_matrix(rng, 3, 6);
    const Eigen::MatrixXd dy = random_matrix(rng, 4, 6);
    ForwardCache cache;
    net.forward(x, &cache);
    const Gradients grads = net.backward(cache, dy);
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(4, 3);
    for (Eigen::Index s = 0; s < 6; ++s)
      for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) expect(i, j) += dy(i, s) * x(j, s);
    CHECK((grads[0].weights - expect).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((grads[0].bias - dy.rowwise().sum()).cwiseAbs().maxCoeff() <=
          1e-12);
  }

  SUBCASE("stale cache is rejected after a parameter change") {
    NetworkSpec spec;
    spec.input = {1, 1, 3};
    spec.layers = {LayerSpec::dense(2)};
    spec.seed = 13;
    Network net(spec, 2);
    Rng rng(208);
    ForwardCache cache;
    net.forward(random_matrix(rng, 3, 2), &cache);
    net.mutable_layers()[0].weights(0, 0) += 0.5;
    CHECK_THROWS_AS(net.backward(cache, Eigen::MatrixXd::Zero(2, 2)),
                    CacheError);
  }
}

TEST_CASE("finite differences validate every layer kind") {
  SUBCASE("MLP with relu, 20 random instances") {
    Rng rng(209);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      NetworkSpec spec;
      spec.input = {1, 1, 5};
      spec.layers = {LayerSpec::dense(4), LayerSpec::relu(),
                     LayerSpec::dense(3)};
      spec.seed = 1000 + static_cast<std::uint64_t>(trial);
      Network net(spec, 3);
      const Eigen::MatrixXd x = random_matrix(rng, 5, 4);
      const Eigen::MatrixXd y = random_onehot(rng, 3, 4);
      worst = std::max(worst, net_fd_worst_rel_err(net, x, y));
    }
    CHECK(worst <= 1e-5);
  }

  SUBCASE("conv3x3 + maxpool + flatten network on 6x6 inputs") {
    Rng rng(210);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      NetworkSpec spec;
      spec.input = {1, 6, 6};
      spec.layers = {LayerSpec::conv3x3(2), LayerSpec::relu(),
                     LayerSpec::maxpool2(), LayerSpec::flatten(),
                     LayerSpec::dense(3)};
      spec.seed = 2000 + static_cast<std::uint64_t>(trial);
      Network net(spec, 3);
      const Eigen::MatrixXd x = random_matrix(rng, 36, 3);
      const Eigen::MatrixXd y = random_onehot(rng, 3, 3);
      worst = std::max(worst, net_fd_worst_rel_err(net, x, y));
    }
    CHECK(worst <= 1e-5);
  }

  SUBCASE("two stacked conv blocks") {
    Rng rng(211);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      NetworkSpec spec;
      spec.input = {1, 8, 8};
      spec.layers = {LayerSpec::conv3x3(2),  LayerSpec::relu(),
                     LayerSpec::maxpool2(),  LayerSpec::conv3x3(3),
                     LayerSpec::relu(),      LayerSpec::maxpool2(),
                     LayerSpec::flatten(),   LayerSpec::dense(2)};
      spec.seed = 3000 + static_cast<std::uint64_t>(trial);
      Network net(spec, 2);
      const Eigen::MatrixXd x = random_matrix(rng, 64, 2);
      const Eigen::MatrixXd y = random_onehot(rng, 2, 2);
      worst = std::max(worst, net_fd_worst_rel_err(net, x, y));
    }
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("Adam optimizer") {
  SUBCASE("zero gradients leave the parameters untouched") {
    NetworkSpec spec;
    spec.input = {1, 1, 3};
    spec.layers = {LayerSpec::dense(2)};
    spec.seed = 14;
    Network net(spec, 2);
    const Eigen::MatrixXd before = net.layers()[0].weights;
    AdamState state(net, {});
    Gradients grads(1);
    grads[0].weights = Eigen::MatrixXd::Zero(2, 3);
    grads[0].bias = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < 10; ++i) adam_step(net, grads, state);
    CHECK((net.layers()[0].weights - before).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("constant gradient tracks the scalar simulation oracle") {
    NetworkSpec spec;
    spec.input = {1, 1, 1};
    spec.layers = {LayerSpec::dense(2)};
    spec.seed = 15;
    Network net(spec, 2);
    AdamParams hp;
    AdamState state(net, hp);
    Gradients grads(1);
    grads[0].weights = Eigen::MatrixXd::Constant(2, 1, 1.5);
    grads[0].bias = Eigen::VectorXd::Zero(2);

    // independent scalar recurrence
    double m = 0.0, v = 0.0, p = net.layers()[0].weights(0, 0);
    double prev = p;
    for (int t = 1; t <= 100; ++t) {
      adam_step(net, grads, state);
      m = hp.beta1 * m + (1 - hp.beta1) * 1.5;
      v = hp.beta2 * v + (1 - hp.beta2) * 1.5 * 1.5;
      const double mhat = m / (1 - std::pow(hp.beta1, t));
      const double vhat = v / (1 - std::pow(hp.beta2, t));
      p -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
      const double actual = net.layers()[0].weights(0, 0);
      CHECK(actual == doctest::Approx(p).epsilon(1e-12));
      CHECK(actual < prev);  // monotone decrease
      if (t > 50) {
        // step size settles at about lr per step
        CHECK(std::abs((prev - actual) - hp.lr) <= 0.01 * hp.lr);
      }
      prev = actual;
    }
  }

  SUBCASE("two identical runs are bit-identical after 100 steps") {
    auto train = [](std::uint64_t seed) {
      NetworkSpec spec;
      spec.input = {1, 1, 6};
      spec.layers = {LayerSpec::dense(8), LayerSpec::relu(),
                     LayerSpec::dense(4)};
      spec.seed = seed;
      Network net(spec, 4);
      AdamState state(net, {});
      Rng rng(906);
      for (int step = 0; step < 100; ++step) {
        const Eigen::MatrixXd x = random_matrix(rng, 6, 5);
        const Eigen::MatrixXd y = random_onehot(rng, 4, 5);
        ForwardCache cache;
        const Eigen::MatrixXd logits = net.forward(x, &cache);
        const CeLossResult ce = softmax_ce_loss(logits, y);
        adam_step(net, net.backward(cache, ce.dlogits), state);
      }
      return net.state();
    };
    const auto a = train(99);
    const auto b = train(99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].second.data == b[i].second.data);  // exact bit equality
    }
  }
}

TEST_CASE("checkpoints round-trip exactly") {
  NetworkSpec spec;
  spec.input = {1, 6, 6};
  spec.layers = {LayerSpec::conv3x3(2), LayerSpec::relu(),
                 LayerSpec::maxpool2(), LayerSpec::flatten(),
                 LayerSpec::dense(3)};
  spec.seed = 77;
  Network net(spec, 3);

  const auto path =
      (std::filesystem::temp_directory_path() / "lautum_ckpt_test.bin")
          .string();
  net.save_checkpoint(path);
  const Network restored = Network::load_checkpoint(path);

  const auto a = net.state(), b = restored.state();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second.shape == b[i].second.shape);
    CHECK(a[i].second.data == b[i].second.data);
  }

  Rng rng(212);
  const Eigen::MatrixXd x = random_matrix(rng, 36, 2);
  CHECK((net.forward(x) - restored.forward(x)).cwiseAbs().maxCoeff() == 0.0);

  std::filesystem::remove(path);
}

TEST_CASE("network construction validates shapes") {
  NetworkSpec spec;
  spec.input = {1, 1, 4};
  spec.layers = {LayerSpec::dense(5)};
  CHECK_THROWS_AS(Network(spec, 3), ShapeError);  // final width != K

  NetworkSpec conv_on_flat;
  conv_on_flat.input = {1, 1, 4};
  conv_on_flat.layers = {LayerSpec::maxpool2(), LayerSpec::dense(2)};
  CHECK_THROWS_AS(Network(conv_on_flat, 2), ShapeError);

  NetworkSpec ok;
  ok.input = {1, 1, 4};
  ok.layers = {LayerSpec::dense(2)};
  Network net(ok, 2);
  Rng rng(213);
  CHECK_THROWS_AS(net.forward(random_matrix(rng, 5, 2)), ShapeError);
}
