#include <stdexcept>

#include "cassikit/autodiff.hpp"
#include "cassikit/imaging.hpp"
#include "cassikit/network.hpp"
#include "cassikit/ops.hpp"
#include "cassikit/recon.hpp"
#include "cassikit/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cassikit;

namespace {

NetworkConfig small_config(int bands = 4) {
  NetworkConfig config;
  config.bands = bands;
  config.feature_width = 8;
  config.z_channels = 4;
  config.seed = 17;
  return config;
}

Tensor conv_of(const NamedTensors& p, const std::string& prefix,
               const Tensor& x, int stride = 1) {
  return ops::conv2d(x, p.at(prefix + ".w"), p.at(prefix + ".b"), stride);
}

}  // namespace

TEST_CASE("build_network is deterministic per seed") {
  const NetworkConfig config = small_config();
  const NamedTensors a = build_network(config, System::ss);
  const NamedTensors b = build_network(config, System::ss);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.names[i] == b.names[i]);
    CHECK(a.tensors[i] == b.tensors[i]);
  }
  NetworkConfig other = config;
  other.seed = 18;
  const NamedTensors c = build_network(other, System::ss);
  CHECK_FALSE(a.tensors[0] == c.tensors[0]);
}

TEST_CASE("tail conv produces one output channel per band") {
  const NetworkConfig config = small_config(6);
  const NamedTensors params = build_network(config, System::ss);
  CHECK(params.at("tail.b").channels() == 6);
  CHECK(params.at("tail.w").channels() == 6 * config.feature_width);
}

TEST_CASE("biases start at zero and weights within the He bound") {
  const NetworkConfig config = small_config();
  const NamedTensors params = build_network(config, System::ss);
  const double stem_bound = std::sqrt(6.0 / input_channel_count(config,
                                                                System::ss));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.names[i].ends_with(".b")) {
      for (std::size_t j = 0; j < params.tensors[i].size(); ++j) {
        CHECK(params.tensors[i].data()[j] == 0.0f);
      }
    }
  }
  const Tensor& stem = params.at("stem.w");
  for (std::size_t j = 0; j < stem.size(); ++j) {
    CHECK(std::abs(stem.data()[j]) <= stem_bound);
  }
}

TEST_CASE("parameter count matches the closed-form architecture table") {
  NetworkConfig config;
  config.bands = 8;
  config.feature_width = 64;
  config.z_channels = 32;
  const NamedTensors params = build_network(config, System::ss);

  const std::size_t f = 64, m = 32, c = 8, in = 32 + 1;
  const std::size_t stem = f * in + f;
  const std::size_t brb =
      (f * f + f) + (m * f + m) + (9 * m * m + m) + (f * m + f);
  const std::size_t down = 9 * f * f + f;
  const std::size_t scale = (9 * f * f + f) * 2 + (9 * 2 * f * f + f);
  const std::size_t tail = c * f + c;
  const std::size_t total = stem + 3 * brb + 2 * down + 2 * scale + tail;
  CHECK(total == 424648);  // frozen from the table arithmetic
  CHECK(params.value_count() == total);
}

TEST_CASE("conditional input channel counts per mode") {
  const Tensor z = draw_random_code(3, 4, 8, 8);
  Snapshot y;
  y.plane = Tensor::full(1, 8, 8, 0.5f);
  y.system = System::ss;

  CHECK(make_conditional_input(z, y, {}, 4, InputMode::z_only).channels() ==
        4);
  CHECK(make_conditional_input(z, y, {}, 4, InputMode::y_only).channels() ==
        1);
  const Tensor both = make_conditional_input(z, y, {}, 4, InputMode::z_and_y);
  CHECK(both.channels() == 5);
  CHECK(slice_channels(both, 0, 4) == z);
}

TEST_CASE("random code values live in [0, 0.1] and are fixed per seed") {
  const Tensor z = draw_random_code(11, 8, 6, 6);
  for (std::size_t i = 0; i < z.size(); ++i) {
    CHECK(z.data()[i] >= 0.0f);
    CHECK(z.data()[i] <= 0.1f);
  }
  CHECK(z == draw_random_code(11, 8, 6, 6));
}

TEST_CASE("SD conditional input is the max-normalized shift-back windows") {
  Rng rng(55);
  const Tensor cube = testutil::random_tensor<float>(rng, 2, 3, 4, 0.1, 1.0);
  const Tensor mask = generate_mask(4, 3, 4, MaskKind::binary, 0.5);
  const CassiOperator op(System::sd, mask, DispersionModel{1}, 2);
  const Snapshot y = simulate(cube, op, 0.0f, 0);

  const Tensor z = draw_random_code(1, 2, 3, 4);
  const Tensor input = make_conditional_input(z, y, DispersionModel{1}, 2,
                                              InputMode::y_only);
  const Tensor windows = shift_back(y.plane, DispersionModel{1}, 2);
  const float peak = ops::max_value(y.plane);
  REQUIRE(input.channels() == 2);
  for (int b = 0; b < 2; ++b) {
    for (int h = 0; h < 3; ++h) {
      for (int w = 0; w < 4; ++w) {
        CHECK(input(b, h, w) ==
              doctest::Approx(windows(b, h, w) / peak).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("all-zero measurement is rejected") {
  const Tensor z = draw_random_code(1, 2, 4, 4);
  Snapshot y;
  y.plane = Tensor(1, 4, 4);
  y.system = System::ss;
  CHECK_THROWS_AS(make_conditional_input(z, y, {}, 2, InputMode::z_and_y),
                  std::invalid_argument);
}

TEST_CASE("brb with all-zero parameters maps everything to zero") {
  const NetworkConfig config = small_config();
  NamedTensors params = build_network(config, System::ss);
  for (auto& t : params.tensors) t.fill(0.0f);
  Rng rng(5);
  const Tensor x =
      testutil::random_tensor<float>(rng, config.feature_width, 4, 4);
  const Tensor out = brb_forward(x, params, "brb1");
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.0f);
}

TEST_CASE("brb with identity skip and zero main path is the identity") {
  const NetworkConfig config = small_config();
  NamedTensors params = build_network(config, System::ss);
  for (auto& t : params.tensors) t.fill(0.0f);
  const int f = config.feature_width;
  Tensor& skip = params.at("brb2.skip.w");
  for (int oc = 0; oc < f; ++oc) skip(oc * f + oc, 0, 0) = 1.0f;
  Rng rng(6);
  const Tensor x = testutil::random_tensor<float>(rng, f, 5, 5);
  CHECK(brb_forward(x, params, "brb2") == x);
}

TEST_CASE("brb matches an external composition of the primitives") {
  const NetworkConfig config = small_config();
  const NamedTensors p = build_network(config, System::ss);
  Rng rng(7);
  const Tensor x =
      testutil::random_tensor<float>(rng, config.feature_width, 6, 6);

  const Tensor skip = conv_of(p, "brb1.skip", x);
  Tensor main = ops::leaky_relu(conv_of(p, "brb1.reduce", x), kLeakySlope);
  main = ops::leaky_relu(conv_of(p, "brb1.mid", main), kLeakySlope);
  main = conv_of(p, "brb1.expand", main);
  const Tensor want = ops::add(main, skip);

  CHECK(testutil::max_abs_diff(brb_forward(x, p, "brb1"), want) < 1e-6);
}

TEST_CASE("ssam matches an external composition of the primitives") {
  const NetworkConfig config = small_config();
  const NamedTensors p = build_network(config, System::ss);
  Rng rng(8);
  const Tensor x =
      testutil::random_tensor<float>(rng, config.feature_width, 8, 8);

  const Tensor l2 = ops::leaky_relu(conv_of(p, "ssam.down1", x, 2),
                                    kLeakySlope);
  const Tensor l3 = ops::leaky_relu(conv_of(p, "ssam.down2", l2, 2),
                                    kLeakySlope);
  const Tensor up3 = ops::bilinear_upsample2x(l3);
  const Tensor a2 = ops::sigmoid(conv_of(p, "ssam.att2", up3));
  const Tensor g2 = ops::hadamard(a2, conv_of(p, "ssam.feat2", l2));
  const Tensor r2 = ops::leaky_relu(
      conv_of(p, "ssam.fuse2", ops::concat_channels(g2, up3)), kLeakySlope);
  const Tensor up2 = ops::bilinear_upsample2x(r2);
  const Tensor a1 = ops::sigmoid(conv_of(p, "ssam.att1", up2));
  const Tensor g1 = ops::hadamard(a1, conv_of(p, "ssam.feat1", x));
  const Tensor want = ops::leaky_relu(
      conv_of(p, "ssam.fuse1", ops::concat_channels(g1, up2)), kLeakySlope);

  CHECK(testutil::max_abs_diff(ssam_forward(x, p), want) < 1e-5);
}

TEST_CASE("zeroed attention convs reduce every attention map to 0.5") {
  const NetworkConfig config = small_config();
  NamedTensors params = build_network(config, System::ss);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.names[i].starts_with("ssam.att")) params.tensors[i].fill(0.0f);
  }
  Rng rng(9);
  const Tensor x =
      testutil::random_tensor<float>(rng, config.feature_width, 8, 8);

  // External composition with the constant 0.5 map in place of the
  // sigmoid(conv) attention branch; equality must be exact.
  const Tensor l2 = ops::leaky_relu(conv_of(params, "ssam.down1", x, 2),
                                    kLeakySlope);
  const Tensor l3 = ops::leaky_relu(conv_of(params, "ssam.down2", l2, 2),
                                    kLeakySlope);
  const Tensor up3 = ops::bilinear_upsample2x(l3);
  const Tensor half2 = Tensor::full(l2.channels(), l2.height(), l2.width(),
                                    0.5f);
  const Tensor g2 = ops::hadamard(half2, conv_of(params, "ssam.feat2", l2));
  const Tensor r2 = ops::leaky_relu(
      conv_of(params, "ssam.fuse2", ops::concat_channels(g2, up3)),
      kLeakySlope);
  const Tensor up2 = ops::bilinear_upsample2x(r2);
  const Tensor half1 = Tensor::full(x.channels(), x.height(), x.width(), 0.5f);
  const Tensor g1 = ops::hadamard(half1, conv_of(params, "ssam.feat1", x));
  const Tensor want = ops::leaky_relu(
      conv_of(params, "ssam.fuse1", ops::concat_channels(g1, up2)),
      kLeakySlope);

  CHECK(ssam_forward(x, params) == want);
}

TEST_CASE("ssam keeps the input shape and rejects indivisible sizes") {
  const NetworkConfig config = small_config();
  const NamedTensors p = build_network(config, System::ss);
  Rng rng(10);
  const Tensor x =
      testutil::random_tensor<float>(rng, config.feature_width, 12, 8);
  const Tensor out = ssam_forward(x, p);
  CHECK(out.same_shape(x));
  const Tensor bad =
      testutil::random_tensor<float>(rng, config.feature_width, 6, 8);
  CHECK_THROWS_AS(ssam_forward(bad, p), std::invalid_argument);
}

TEST_CASE("zero tail weights give an all-0.5 cube") {
  const NetworkConfig config = small_config();
  NamedTensors params = build_network(config, System::ss);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.names[i].starts_with("tail")) params.tensors[i].fill(0.0f);
  }
  Rng rng(11);
  const Tensor input = testutil::random_tensor<float>(
      rng, input_channel_count(config, System::ss), 8, 8);
  const Tensor out = network_forward(input, config, params);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.5f);
}

TEST_CASE("network output has C bands, input spatial size, range (0,1)") {
  for (ArchMode arch : {ArchMode::brb_only, ArchMode::ssam_only,
                        ArchMode::full}) {
    NetworkConfig config = small_config(3);
    config.arch_mode = arch;
    const NamedTensors params = build_network(config, System::ss);
    Rng rng(12);
    const Tensor input = testutil::random_tensor<float>(
        rng, input_channel_count(config, System::ss), 8, 12);
    const Tensor out = network_forward(input, config, params);
    CHECK(out.channels() == 3);
    CHECK(out.height() == 8);
    CHECK(out.width() == 12);
    // Sigmoid codomain; float32 rounds to the boundary when extreme random
    // parameters saturate it.
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out.data()[i] >= 0.0f);
      CHECK(out.data()[i] <= 1.0f);
    }
  }
}

TEST_CASE("forward is bitwise deterministic") {
  const NetworkConfig config = small_config();
  const NamedTensors params = build_network(config, System::ss);
  Rng rng(13);
  const Tensor input = testutil::random_tensor<float>(
      rng, input_channel_count(config, System::ss), 8, 8);
  CHECK(network_forward(input, config, params) ==
        network_forward(input, config, params));
}

TEST_CASE("every parameter receives gradient on some random instance") {
  NetworkConfig config = small_config();
  const NamedTensors params = build_network(config, System::ss);
  std::vector<bool> seen(params.size(), false);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(100 + seed);
    TapeT<float> tape;
    auto input = tape.constant(testutil::random_tensor<float>(
        rng, input_channel_count(config, System::ss), 8, 8));
    auto out = build_network_graph(tape, input, config, params);
    auto probe = tape.constant(testutil::random_tensor<float>(
        rng, config.bands, 8, 8));
    auto loss = tape.sum_all(tape.hadamard(out, probe));
    auto grads = tape.backward(loss);
    for (std::size_t i = 0; i < grads.size(); ++i) {
      for (std::size_t j = 0; j < grads.tensors[i].size(); ++j) {
        if (grads.tensors[i].data()[j] != 0.0f) {
          seen[i] = true;
          break;
        }
      }
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    INFO("parameter ", params.names[i]);
    CHECK(seen[i]);
  }
}

TEST_CASE("full-network gradient agrees with finite differences") {
  NetworkConfig config = small_config(2);
  config.feature_width = 6;
  config.z_channels = 2;
  const NamedTensors params = build_network(config, System::ss);
  Rng rng(14);

  TapeT<double> tape;
  auto input = tape.constant(testutil::random_tensor<double>(
      rng, input_channel_count(config, System::ss), 8, 8, 0.0, 0.5));
  auto out = build_network_graph(tape, input, config,
                                 params.cast<double>());
  const Tensor mask = generate_mask(21, 8, 8, MaskKind::binary, 0.5);
  const CassiOperatorT<double> op(System::ss, mask.cast<double>(),
                                  DispersionModel{1}, 2);
  Rng cube_rng(15);
  const auto truth =
      testutil::random_tensor<double>(cube_rng, 2, 8, 8, 0.0, 1.0);
  auto loss = build_l1_loss_graph(tape, out, op, op.forward(truth));
  CHECK(testutil::max_fd_rel_error(tape, loss, 1e-5, 1e-6, 7) < 1e-4);
}
