#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rsonerf/tensor.hpp"
#include "testing_util.hpp"

using namespace rsonerf;
using namespace rsonerf::ad;
using rsotest::finite_diff_gradient;
using rsotest::gradient_rel_error;

namespace {

Tensor<double> random_tensor(std::vector<Index> shape, Rng& rng) {
  Index n = 1;
  for (Index d : shape) n *= d;
  ArrX<double> v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
  return Tensor<double>(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("matmul against identity and annihilator") {
  Tape<double> tape;
  Rng rng(7);
  auto a = random_tensor({2, 2}, rng);
  auto eye = Tensor<double>::from_mat(MatX<double>::Identity(2, 2));
  auto prod = matmul(tape, a, eye);
  CHECK((prod.mat() - a.mat()).cwiseAbs().maxCoeff() == 0.0);

  auto zeros = Tensor<double>::zeros({3, 4});
  auto b = random_tensor({4, 2}, rng);
  auto z = matmul(tape, zeros, b);
  CHECK(z.rows() == 3);
  CHECK(z.cols() == 2);
  CHECK(z.values.abs().maxCoeff() == 0.0);
}

TEST_CASE("matmul rejects mismatched inner dimensions, naming both shapes") {
  Tape<double> tape;
  auto a = Tensor<double>::zeros({2, 3});
  auto b = Tensor<double>::zeros({4, 2});
  try {
    matmul(tape, a, b);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x2") != std::string::npos);
  }
}

TEST_CASE("matmul gradients match finite differences") {
  Rng rng(11);
  auto a = random_tensor({3, 3}, rng);
  auto b = random_tensor({3, 3}, rng);

  Tape<double> tape;
  auto pa = tape.parameter(a);
  auto pb = tape.parameter(b);
  auto loss = sum(tape, matmul(tape, pa, pb));
  auto grads = tape.backward(loss.node);
  const ArrX<double> ga = Tape<double>::grad_of(grads, pa).values;
  const ArrX<double> gb = Tape<double>::grad_of(grads, pb).values;

  auto forward = [&](const ArrX<double>& av, const ArrX<double>& bv) {
    Tape<double> t;
    auto xa = t.constant(Tensor<double>({3, 3}, av));
    auto xb = t.constant(Tensor<double>({3, 3}, bv));
    return sum(t, matmul(t, xa, xb)).item();
  };
  ArrX<double> av = a.values, bv = b.values;
  auto fd_a = finite_diff_gradient(av, [&] { return forward(av, bv); });
  auto fd_b = finite_diff_gradient(bv, [&] { return forward(av, bv); });
  CHECK(gradient_rel_error(ga, fd_a) < 1e-4);
  CHECK(gradient_rel_error(gb, fd_b) < 1e-4);
}

TEST_CASE("activation definitions") {
  Tape<double> tape;
  ArrX<double> v(2);
  v << -2.5, 3.0;
  auto x = Tensor<double>({2}, v);
  auto r = relu(tape, x);
  CHECK(r.values[0] == 0.0);
  CHECK(r.values[1] == 3.0);

  auto s = sigmoid(tape, Tensor<double>::scalar(0.0));
  CHECK(s.item() == doctest::Approx(0.5).epsilon(1e-12));

  auto e = exp_clamped(tape, Tensor<double>::scalar(100.0));
  CHECK(e.item() == doctest::Approx(std::exp(15.0)));
}

TEST_CASE("softplus derivative at zero matches finite differences") {
  Tape<double> tape;
  auto x = tape.parameter(Tensor<double>::scalar(0.0));
  auto y = softplus(tape, x);
  auto grads = tape.backward(y.node);
  const double analytic = Tape<double>::grad_of(grads, x).values[0];
  CHECK(analytic == doctest::Approx(0.5).epsilon(1e-12));

  ArrX<double> xv = ArrX<double>::Zero(1);
  auto fd = finite_diff_gradient(xv, [&] {
    Tape<double> t;
    return softplus(t, t.constant(Tensor<double>::scalar(xv[0]))).item();
  });
  CHECK(std::abs(analytic - fd[0]) < 1e-6);
}

TEST_CASE("activation gradients match finite differences for all kinds") {
  Rng rng(23);
  for (auto kind : {Activation::Relu, Activation::Sigmoid, Activation::Softplus,
                    Activation::Exp}) {
    auto x = random_tensor({8}, rng);
    Tape<double> tape;
    auto px = tape.parameter(x);
    auto loss = sum(tape, activation(tape, px, kind));
    auto grads = tape.backward(loss.node);
    const ArrX<double> g = Tape<double>::grad_of(grads, px).values;

    ArrX<double> xv = x.values;
    auto fd = finite_diff_gradient(xv, [&] {
      Tape<double> t;
      return sum(t, activation(t, t.constant(Tensor<double>({8}, xv)), kind)).item();
    });
    CHECK(gradient_rel_error(g, fd) < 1e-4);
  }
}

TEST_CASE("mse_loss basics and gradient") {
  Rng rng(5);
  auto pred = random_tensor({4, 3}, rng);

  Tape<double> tape;
  CHECK(mse_loss(tape, pred, pred).item() == 0.0);

  auto shifted = pred;
  shifted.values += 1.0;
  CHECK(mse_loss(tape, shifted, pred).item() == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(mse_loss(tape, pred, Tensor<double>::zeros({3, 4})), ContractError);

  auto target = random_tensor({4, 3}, rng);
  Tape<double> t2;
  auto pp = t2.parameter(pred);
  auto loss = mse_loss(t2, pp, target);
  auto grads = t2.backward(loss.node);
  const ArrX<double> g = Tape<double>::grad_of(grads, pp).values;

  ArrX<double> pv = pred.values;
  auto fd = finite_diff_gradient(pv, [&] {
    Tape<double> t;
    return mse_loss(t, t.constant(Tensor<double>({4, 3}, pv)), target).item();
  });
  CHECK(gradient_rel_error(g, fd) < 1e-4);
}

TEST_CASE("backward of x^2 and of a constant loss") {
  Tape<double> tape;
  auto x = tape.parameter(Tensor<double>::scalar(3.0));
  auto loss = mul(tape, x, x);
  auto grads = tape.backward(loss.node);
  CHECK(Tape<double>::grad_of(grads, x).values[0] == doctest::Approx(6.0));

  Tape<double> t2;
  auto p = t2.parameter(Tensor<double>::scalar(1.5));
  auto c = t2.constant(Tensor<double>::scalar(4.0));
  auto loss2 = mul(t2, c, c);  // never touches p
  auto grads2 = t2.backward(loss2.node);
  CHECK(Tape<double>::grad_of(grads2, p).values.abs().maxCoeff() == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
  Tape<double> tape;
  auto x = tape.parameter(Tensor<double>::zeros({2, 2}));
  auto y = add(tape, x, x);
  CHECK_THROWS_AS(tape.backward(y.node), ContractError);
}

TEST_CASE("three-layer MLP gradient matches finite differences") {
  // layer sizes 3 -> 5 -> 4 -> 1, relu/sigmoid/softplus mixture
  Rng rng(31);
  const std::vector<std::vector<Index>> shapes = {{3, 5}, {5}, {5, 4}, {4}, {4, 1}, {1}};
  std::vector<Tensor<double>> params;
  for (const auto& s : shapes) params.push_back(random_tensor(s, rng));
  auto input = random_tensor({2, 3}, rng);

  auto forward = [&](Tape<double>& tape, std::vector<Tensor<double>>& ps) {
    std::vector<Tensor<double>> bound;
    for (auto& p : ps) bound.push_back(tape.parameter(p));
    auto h0 = relu(tape, add_bias(tape, matmul(tape, input, bound[0]), bound[1]));
    auto h1 = sigmoid(tape, add_bias(tape, matmul(tape, h0, bound[2]), bound[3]));
    auto h2 = softplus(tape, add_bias(tape, matmul(tape, h1, bound[4]), bound[5]));
    return std::pair(sum(tape, h2), bound);
  };

  Tape<double> tape;
  auto [loss, bound] = forward(tape, params);
  auto grads = tape.backward(loss.node);

  ArrX<double> analytic(0);
  for (auto& b : bound) {
    auto g = Tape<double>::grad_of(grads, b).values;
    ArrX<double> merged(analytic.size() + g.size());
    merged << analytic, g;
    analytic = merged;
  }

  // flatten all parameters into one vector for the oracle
  ArrX<double> flat(0);
  for (auto& p : params) {
    ArrX<double> merged(flat.size() + p.values.size());
    merged << flat, p.values;
    flat = merged;
  }
  auto eval = [&]() {
    std::vector<Tensor<double>> ps;
    Index off = 0;
    for (const auto& s : shapes) {
      Index n = 1;
      for (Index d : s) n *= d;
      ps.push_back(Tensor<double>(s, flat.segment(off, n)));
      off += n;
    }
    Tape<double> t;
    auto [l, _] = forward(t, ps);
    return l.item();
  };
  auto fd = finite_diff_gradient(flat, eval);
  CHECK(gradient_rel_error(analytic, fd) < 1e-3);
}

TEST_CASE("backward is bitwise deterministic") {
  Rng rng(13);
  auto w = random_tensor({4, 4}, rng);
  auto x = random_tensor({2, 4}, rng);
  auto run = [&] {
    Tape<double> tape;
    auto pw = tape.parameter(w);
    auto loss = mean(tape, sigmoid(tape, matmul(tape, x, pw)));
    auto grads = tape.backward(loss.node);
    return Tape<double>::grad_of(grads, pw).values;
  };
  const ArrX<double> g1 = run(), g2 = run();
  CHECK(g1.size() == g2.size());
  for (Index i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("adam: zero gradients are a fixed point of fresh state") {
  Rng rng(3);
  auto p = random_tensor({6}, rng);
  const ArrX<double> before = p.values;
  AdamState<double> state(AdamConfig{0.1, 0.9, 0.999, 1e-8});
  std::vector<Tensor<double>*> params = {&p};
  std::vector<ArrX<double>> grads = {ArrX<double>::Zero(6)};
  adam_step(params, grads, state);
  CHECK(state.step_count == 1);
  for (Index i = 0; i < 6; ++i) CHECK(p.values[i] == before[i]);
}

TEST_CASE("adam descends on x^2 and follows the scalar recurrence") {
  auto grad_of = [](double x) { return 2.0 * x; };  // f(x) = x^2

  // one step from x = 1 decreases x
  {
    auto p = Tensor<double>::scalar(1.0);
    AdamState<double> state(AdamConfig{0.1, 0.9, 0.999, 1e-8});
    std::vector<Tensor<double>*> params = {&p};
    std::vector<ArrX<double>> grads = {ArrX<double>::Constant(1, grad_of(1.0))};
    adam_step(params, grads, state);
    CHECK(p.values[0] < 1.0);
  }

  // 200 steps on f(x) = (x-2)^2 from 0, compared against the recurrence
  // evaluated directly with scalar arithmetic
  {
    auto p = Tensor<double>::scalar(0.0);
    AdamState<double> state(AdamConfig{0.1, 0.9, 0.999, 1e-8});
    std::vector<Tensor<double>*> params = {&p};

    double ox = 0.0, om = 0.0, ov = 0.0;  // oracle state
    for (int t = 1; t <= 200; ++t) {
      const double g = 2.0 * (p.values[0] - 2.0);
      std::vector<ArrX<double>> grads = {ArrX<double>::Constant(1, g)};
      adam_step(params, grads, state);

      const double og = 2.0 * (ox - 2.0);
      om = 0.9 * om + 0.1 * og;
      ov = 0.999 * ov + 0.001 * og * og;
      const double mhat = om / (1.0 - std::pow(0.9, t));
      const double vhat = ov / (1.0 - std::pow(0.999, t));
      ox -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
      CHECK(p.values[0] == doctest::Approx(ox).epsilon(1e-12));
    }
    CHECK(std::abs(p.values[0] - 2.0) < 0.05);
  }
}

TEST_CASE("adam rejects mismatched gradient shapes") {
  auto p = Tensor<double>::zeros({4});
  AdamState<double> state;
  std::vector<Tensor<double>*> params = {&p};
  std::vector<ArrX<double>> grads = {ArrX<double>::Zero(3)};
  CHECK_THROWS_AS(adam_step(params, grads, state), ContractError);
}

TEST_CASE("random composite gradcheck across op set") {
  Rng rng(41);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({3, 4}, rng);
  auto w = random_tensor({8, 2}, rng);

  auto build = [&](Tape<double>& t, const Tensor<double>& ta, const Tensor<double>& tb,
                   const Tensor<double>& tw) {
    auto x = concat_cols(t, mul(t, ta, tb), sub(t, ta, tb));  // 3x8
    auto y = matmul(t, clamp01(t, x), tw);                    // 3x2
    auto z = slice_cols(t, y, 0, 2);
    return mse_loss(t, sigmoid(t, z), Tensor<double>::full({3, 2}, 0.25));
  };

  Tape<double> tape;
  auto pa = tape.parameter(a), pb = tape.parameter(b), pw = tape.parameter(w);
  auto grads = tape.backward(build(tape, pa, pb, pw).node);

  auto check_one = [&](Tensor<double>& which, const ArrX<double>& analytic) {
    ArrX<double> xv = which.values;
    ArrX<double> saved = which.values;
    auto fd = finite_diff_gradient(xv, [&] {
      Tensor<double> ta = a, tb = b, tw = w;
      if (&which == &a) ta.values = xv;
      if (&which == &b) tb.values = xv;
      if (&which == &w) tw.values = xv;
      Tape<double> t;
      return build(t, t.constant(ta), t.constant(tb), t.constant(tw)).item();
    });
    which.values = saved;
    CHECK(gradient_rel_error(analytic, fd) < 1e-3);
  };
  check_one(a, Tape<double>::grad_of(grads, pa).values);
  check_one(b, Tape<double>::grad_of(grads, pb).values);
  check_one(w, Tape<double>::grad_of(grads, pw).values);
}
