#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "oracles.hpp"
#include "topolidar/common/error.hpp"
#include "topolidar/common/rng.hpp"
#include "topolidar/num/adam.hpp"
#include "topolidar/num/checkpoint.hpp"
#include "topolidar/num/init.hpp"
#include "topolidar/num/ops.hpp"

using namespace topolidar;
using num::Shape;
using num::Tensor;

namespace {

Tensor rnd(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng = make_stream(seed, "unit");
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(num::numel_of(s));
  for (auto& x : v) x = u(rng);
  return Tensor::from(std::move(s), std::move(v));
}

constexpr double kTol = 1e-5;

}  // namespace

TEST_CASE("tensor construction rejects bad shapes") {
  CHECK_THROWS_AS(Tensor::from({2, 0}, {}), ShapeError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK(Tensor::scalar(3.0).item() == 3.0);
  CHECK(Tensor::zeros({2, 3}).numel() == 6);
}

TEST_CASE("broadcasting follows the trailing suffix rule") {
  auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Tensor::from({3}, {10, 20, 30});
  auto c = num::add(a, b);
  CHECK(c.shape() == Shape{2, 3});
  CHECK(c[4] == 25.0);
  CHECK(num::mul(b, a)[5] == 180.0);
  CHECK(num::add(a, Tensor::scalar(1.0))[0] == 2.0);
  CHECK_THROWS_AS(num::add(a, Tensor::from({2}, {1, 2})), ShapeError);
  CHECK_THROWS_AS(num::matmul(a, a), ShapeError);
}

TEST_CASE("elementwise ops pass finite-difference checks on three shapes") {
  const std::vector<Shape> shapes{{5}, {3, 4}, {2, 3, 2}};
  std::uint64_t seed = 1;
  for (const auto& s : shapes) {
    CAPTURE(num::to_string(s));
    auto x = rnd(s, seed++), y = rnd(s, seed++), p = rnd(s, seed++, 0.5, 2.0);
    auto suffix = rnd(Shape(s.end() - 1, s.end()), seed++);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::add(in[0], in[1])); }, {x, y}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::sub(in[0], in[1])); }, {x, suffix}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::mul(in[0], in[1])); }, {x, suffix}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::mul(in[0], in[1])); }, {x, y}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::add_scalar(in[0], 0.3)); }, {x}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::mul_scalar(in[0], -1.7)); }, {x}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::neg(in[0])); }, {x}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::square(in[0])); }, {x}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::abs(in[0])); }, {x}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::exp(in[0])); }, {x}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::sigmoid(in[0])); }, {x}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::leaky_relu(in[0], 0.2)); }, {x}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return num::sum(in[0]); }, {p}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return num::mean(num::square(in[0])); }, {p}) < kTol);
  }
}

TEST_CASE("linear algebra and reductions pass finite-difference checks") {
  const std::vector<std::array<std::size_t, 3>> mkn{{1, 1, 1}, {3, 4, 2}, {5, 2, 6}};
  std::uint64_t seed = 100;
  for (auto [m, k, n] : mkn) {
    auto a = rnd({m, k}, seed++), b = rnd({k, n}, seed++), bias = rnd({n}, seed++);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::matmul(in[0], in[1])); }, {a, b}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::transpose(in[0])); }, {a}) < kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::linear(in[0], in[1], in[2])); }, {a, b, bias}) <
          kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::linear(in[0], in[1], Tensor{})); }, {a, b}) <
          kTol);
  }
  const std::vector<Shape> shapes{{4, 3}, {2, 3, 5}, {6, 1}};
  for (const auto& s : shapes) {
    auto x = rnd(s, seed++);
    for (std::size_t axis = 0; axis < s.size(); ++axis) {
      CHECK(oracle::gradient_error([axis](auto& in) { return oracle::probe(num::sum(in[0], axis)); }, {x}) < kTol);
      CHECK(oracle::gradient_error([axis](auto& in) { return oracle::probe(num::max(in[0], axis)); }, {x}) < kTol);
    }
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::reshape(in[0], {in[0].numel()})); }, {x}) < kTol);
  }
}

TEST_CASE("structural ops pass finite-difference checks") {
  std::uint64_t seed = 200;
  const std::vector<Shape> shapes{{3, 2}, {4, 3, 2}, {2, 5}};
  for (const auto& s : shapes) {
    auto a = rnd(s, seed++), b = rnd(s, seed++);
    for (std::size_t axis = 0; axis < s.size(); ++axis)
      CHECK(oracle::gradient_error(
                [axis](auto& in) {
                  std::vector<Tensor> parts{in[0], in[1]};
                  return oracle::probe(num::concat(parts, axis));
                },
                {a, b}) < kTol);
    const std::vector<std::size_t> rows{1, 0, 1, s[0] - 1};
    CHECK(oracle::gradient_error([&rows](auto& in) { return oracle::probe(num::gather_rows(in[0], rows)); }, {a}) < kTol);
  }
}

TEST_CASE("circular convolution and upsampling pass finite-difference checks") {
  struct Case {
    std::size_t h, w, cin, cout, kh, kw, sh, sw;
  };
  const std::vector<Case> cases{{4, 6, 2, 3, 3, 3, 1, 1}, {5, 8, 1, 2, 3, 5, 2, 2}, {3, 4, 3, 1, 1, 3, 1, 2}};
  std::uint64_t seed = 300;
  for (const auto& c : cases) {
    auto x = rnd({c.h, c.w, c.cin}, seed++), w = rnd({c.kh, c.kw, c.cin, c.cout}, seed++), b = rnd({c.cout}, seed++);
    CHECK(oracle::gradient_error(
              [&c](auto& in) { return oracle::probe(num::conv2d_circular(in[0], in[1], in[2], c.sh, c.sw)); }, {x, w, b}) <
          kTol);
    CHECK(oracle::gradient_error([](auto& in) { return oracle::probe(num::upsample_nearest(in[0], 2, 3)); }, {x}) < kTol);
  }
}

TEST_CASE("circular convolution wraps columns and zero-pads rows") {
  // 1x3 kernel of ones sums each pixel with its horizontal neighbours
  auto x = Tensor::from({2, 4, 1}, {1, 2, 3, 4, 5, 6, 7, 8});
  auto w = Tensor::full({1, 3, 1, 1}, 1.0);
  auto y = num::conv2d_circular(x, w, Tensor{});
  CHECK(y[0] == doctest::Approx(4 + 1 + 2));
  CHECK(y[3] == doctest::Approx(3 + 4 + 1));
  auto v = Tensor::full({3, 1, 1, 1}, 1.0);
  auto z = num::conv2d_circular(x, v, Tensor{});
  CHECK(z[0] == doctest::Approx(1 + 5));
  auto s = num::conv2d_circular(Tensor::zeros({5, 8, 1}), v, Tensor{}, 2, 2);
  CHECK(s.shape() == Shape{3, 4, 1});
}

TEST_CASE("tape replays in reverse recording order and releases history") {
  auto x = Tensor::from({2}, {1.0, 2.0}, true);
  auto a = num::mul_scalar(x, 2.0);
  auto b = num::square(a);
  auto c = num::sum(b);
  auto tape = num::GradTape::collect(c);
  REQUIRE(tape.entries().size() == 3);
  CHECK(tape.entries()[0].seq < tape.entries()[1].seq);
  CHECK(std::string(tape.entries()[2].op) == "sum");
  c.backward();
  CHECK(x.grad()[0] == doctest::Approx(8.0));
  CHECK(x.grad()[1] == doctest::Approx(16.0));
  CHECK(c.node()->inputs.empty());
  CHECK(!c.node()->backward);
}

TEST_CASE("gradients accumulate over shared subexpressions") {
  auto x = Tensor::scalar(3.0, true);
  auto y = num::add(num::mul(x, x), x);
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(7.0));
}

TEST_CASE("no-grad guard and finite checks") {
  auto x = Tensor::scalar(1.0, true);
  {
    num::NoGradGuard g;
    auto y = num::mul_scalar(x, 2.0);
    CHECK(!y.requires_grad());
  }
  CHECK(num::mul_scalar(x, 2.0).requires_grad());
  num::set_finite_checks(true);
  CHECK_THROWS_AS(num::exp(Tensor::scalar(1000.0)), NumericalError);
  num::set_finite_checks(false);
  CHECK(std::isinf(num::exp(Tensor::scalar(1000.0)).item()));
}

TEST_CASE("sigmoid is stable and leaky relu uses the slope at zero") {
  CHECK(num::sigmoid(Tensor::scalar(-800.0)).item() == 0.0);
  CHECK(num::sigmoid(Tensor::scalar(800.0)).item() == 1.0);
  auto z = Tensor::scalar(0.0, true);
  num::leaky_relu(z, 0.2).backward();
  CHECK(z.grad()[0] == 0.2);
  auto m = Tensor::from({3}, {2.0, 5.0, 5.0}, true);
  num::max(m, 0).backward();
  CHECK(m.grad()[1] == 1.0);
  CHECK(m.grad()[2] == 0.0);
}

TEST_CASE("cosine schedule reaches zero at the period") {
  num::CosineSchedule s{1e-3, 100};
  CHECK(s.lr_at(0) == doctest::Approx(1e-3));
  CHECK(s.lr_at(50) == doctest::Approx(5e-4));
  CHECK(s.lr_at(100) == 0.0);
  CHECK(s.lr_at(150) == 0.0);
}

TEST_CASE("adam matches a hand-computed first step") {
  auto p = Tensor::from({2}, {1.0, -1.0}, true);
  p.mutable_grad()[0] = 0.5;
  p.mutable_grad()[1] = -2.0;
  num::AdamState st;
  st.schedule = {0.1, 100};
  std::vector<Tensor> ps{p};
  num::adam_step(ps, st, 0);
  // bias-corrected moments give m_hat = g, v_hat = g^2, so the step is lr * sign(g)
  CHECK(p[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-1.0 + 0.1).epsilon(1e-6));
  CHECK(st.step_count == 1);
}

TEST_CASE("adam minimises a quadratic") {
  auto p = Tensor::from({3}, {2.0, -3.0, 1.0}, true);
  num::AdamState st;
  st.schedule = {0.05, 2000};
  std::vector<Tensor> ps{p};
  for (int i = 0; i < 2000; ++i) {
    p.zero_grad();
    num::sum(num::square(p)).backward();
    num::adam_step(ps, st, i);  // one step per epoch, lr decays to 0
  }
  for (double v : p.data()) CHECK(std::abs(v) < 1e-2);
}

TEST_CASE("checkpoint round trip is bit exact") {
  num::TensorBundle b;
  b.put("a", Tensor::from({2, 2}, {1.0, -0.0, 1e-300, 3.141592653589793}));
  b.put("scalar", Tensor::scalar(42.0));
  auto bytes = num::encode_checkpoint(b);
  CHECK(bytes.substr(0, 4) == "TLDM");
  auto back = num::decode_checkpoint(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back.get("a").shape() == Shape{2, 2});
  CHECK(std::memcmp(back.get("a").data().data(), b.get("a").data().data(), 4 * sizeof(double)) == 0);
  CHECK(back.get("scalar").item() == 42.0);
  CHECK(num::encode_checkpoint(back) == bytes);
  CHECK_THROWS_AS(back.get("missing"), FormatError);
}

TEST_CASE("checkpoint decoding reports corruption") {
  num::TensorBundle b;
  b.put("w", Tensor::from({3}, {1, 2, 3}));
  auto bytes = num::encode_checkpoint(b);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(num::decode_checkpoint(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 99;
  CHECK_THROWS_AS(num::decode_checkpoint(bad_version), VersionError);
  CHECK_THROWS_AS(num::decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(num::decode_checkpoint(bytes + "x"), FormatError);
  try {
    num::decode_checkpoint(bytes.substr(0, bytes.size() - 3));
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("at byte") != std::string::npos);
  }
}

TEST_CASE("named substreams are reproducible and distinct") {
  Rng a = make_stream(7, "data", 3), b = make_stream(7, "data", 3), c = make_stream(7, "data", 4),
      d = make_stream(7, "sampling", 3);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
}

TEST_CASE("initialisers") {
  Rng rng(1);
  auto w = num::init_normal({64, 64}, 64, rng);
  CHECK(w.requires_grad());
  double ss = 0;
  for (double v : w.data()) ss += v * v;
  CHECK(std::sqrt(ss / w.numel()) == doctest::Approx(1.0 / 8.0).epsilon(0.05));
  CHECK(num::init_zeros({3}).requires_grad());
}
