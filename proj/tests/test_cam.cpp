#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "camscope/cam/cam.hpp"
#include "camscope/cam/fixture.hpp"
#include "camscope/core/rng.hpp"

namespace camscope::cam {
namespace {

// Hand-computed expectations for the CamFixture (target class 0), frozen from
// an independent double-precision evaluation of the published formulas.
const std::vector<float> kFixLogits = {0.118203125f, -0.054843750f, 0.075937500f};
const std::vector<float> kFixGradcamRaw = {
    0.000000000f, 0.033828125f, 0.036640625f, 0.000000000f,
    0.000000000f, 0.019687500f, 0.032343750f, 0.015468750f,
    0.000000000f, 0.000000000f, 0.000000000f, 0.032187500f,
    0.026562500f, 0.000000000f, 0.000000000f, 0.028046875f};
const std::vector<float> kFixGradcamppRaw = {
    0.000000000f, 0.209150327f, 0.266191325f, 0.000000000f,
    0.000000000f, 0.171122995f, 0.228163993f, 0.085561497f,
    0.000000000f, 0.000000000f, 0.000000000f, 0.209150327f,
    0.180629828f, 0.000000000f, 0.000000000f, 0.247177659f};
const std::vector<float> kFixLayercamRaw = {
    0.000000000f, 0.027500000f, 0.035000000f, 0.000000000f,
    0.000000000f, 0.022500000f, 0.030000000f, 0.011250000f,
    0.000000000f, 0.000000000f, 0.000000000f, 0.027500000f,
    0.023750000f, 0.000000000f, 0.000000000f, 0.032500000f};
const std::vector<float> kFixScorecamRaw = {
    0.000000000f, 0.079460283f, 0.282478842f, 0.020801039f,
    0.000000000f, 0.290944321f, 0.215615442f, 0.000000000f,
    0.152428359f, 0.067192279f, 0.000000000f, 0.125851522f,
    0.143634002f, 0.000000000f, 0.000000000f, 0.431298441f};
const std::vector<float> kFixGradcamNorm8 = {
    0.000000000f, 0.235326087f, 0.705978261f, 0.960869565f, 1.000000000f, 0.764673913f,
    0.254891304f, 0.000000000f, 0.000000000f, 0.210733696f, 0.632201087f, 0.879619565f,
    0.952989130f, 0.769157609f, 0.328125000f, 0.107608696f, 0.000000000f, 0.161548913f,
    0.484646739f, 0.717119565f, 0.858967391f, 0.778125000f, 0.474592391f, 0.322826087f,
    0.000000000f, 0.102717391f, 0.308152174f, 0.476902174f, 0.608967391f, 0.642934783f,
    0.578804348f, 0.546739130f, 0.000000000f, 0.034239130f, 0.102717391f, 0.158967391f,
    0.202989130f, 0.363586957f, 0.640760870f, 0.779347826f, 0.184782609f, 0.138586957f,
    0.046195652f, 0.000000000f, 0.000000000f, 0.216711957f, 0.650135870f, 0.866847826f,
    0.554347826f, 0.415760870f, 0.138586957f, 0.000000000f, 0.000000000f, 0.202309783f,
    0.606929348f, 0.809239130f, 0.739130435f, 0.554347826f, 0.184782609f, 0.000000000f,
    0.000000000f, 0.195108696f, 0.585326087f, 0.780434783f};

void expect_map_near(const Tensor& got, const std::vector<float>& want, double tol) {
    ASSERT_EQ(got.numel(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i)
        EXPECT_NEAR(got[i], want[i], tol) << "at flat index " << i;
}

model::TapResult make_tap(int c, int h, int w, Rng& rng, double lo = -2.0, double hi = 2.0) {
    model::TapResult t;
    t.activations = Tensor({c, h, w});
    t.gradients = Tensor({c, h, w});
    for (std::size_t i = 0; i < t.activations.numel(); ++i) {
        t.activations[i] = static_cast<float>(rng.uniform(lo, hi));
        t.gradients[i] = static_cast<float>(rng.uniform(lo, hi));
    }
    t.tap_layer = "tap";
    t.target_class = 0;
    return t;
}

std::vector<double> normalized_copy(const Tensor& m) {
    double lo = m[0], hi = m[0];
    for (std::size_t i = 0; i < m.numel(); ++i) {
        lo = std::min(lo, static_cast<double>(m[i]));
        hi = std::max(hi, static_cast<double>(m[i]));
    }
    std::vector<double> out(m.numel(), 0.0);
    if (hi == lo) return out;
    for (std::size_t i = 0; i < m.numel(); ++i) out[i] = (m[i] - lo) / (hi - lo);
    return out;
}

TEST(FixtureOracle, ForwardAndUniformGradients) {
    CamFixture f = make_cam_fixture();
    model::TapResult tap = fixture_tap(f);

    ASSERT_EQ(tap.logits.size(), 3u);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(tap.logits[i], kFixLogits[i], 1e-6);
    EXPECT_EQ(tap.target_class, 0);
    ASSERT_EQ(tap.activations.dim(0), 2);
    ASSERT_EQ(tap.activations.dim(1), 4);

    // d logit0 / d A_k is W[0][k] / 16, uniform over each 4x4 plane
    for (int i = 0; i < 16; ++i) {
        EXPECT_NEAR(tap.gradients[i], 0.05, 1e-7);
        EXPECT_NEAR(tap.gradients[16 + i], -0.01875, 1e-7);
    }
}

TEST(FixtureOracle, GradcamMatchesHandComputation) {
    CamFixture f = make_cam_fixture();
    Heatmap h = grad_cam(fixture_tap(f));
    expect_map_near(h.values, kFixGradcamRaw, 1e-6);
    EXPECT_FALSE(h.normalized);
    EXPECT_EQ(h.method, "gradcam");
    EXPECT_EQ(h.tap_layer, "conv");
    EXPECT_EQ(h.target_class, 0);
}

TEST(FixtureOracle, GradcamppMatchesHandComputation) {
    CamFixture f = make_cam_fixture();
    Heatmap h = grad_cam_pp(fixture_tap(f));
    expect_map_near(h.values, kFixGradcamppRaw, 1e-6);
    EXPECT_EQ(h.method, "gradcampp");
}

TEST(FixtureOracle, LayercamMatchesHandComputation) {
    CamFixture f = make_cam_fixture();
    Heatmap h = layer_cam(fixture_tap(f));
    expect_map_near(h.values, kFixLayercamRaw, 1e-6);
    EXPECT_EQ(h.method, "layercam");
}

TEST(FixtureOracle, ScorecamMatchesHandComputation) {
    CamFixture f = make_cam_fixture();
    Heatmap h = score_cam_net(f.net, f.conv_node, f.input, 0, 32, "conv");
    expect_map_near(h.values, kFixScorecamRaw, 1e-6);
    EXPECT_EQ(h.method, "scorecam");
    EXPECT_EQ(h.tap_layer, "conv");
    EXPECT_EQ(h.target_class, 0);

    // channel batching must not change anything
    Heatmap h1 = score_cam_net(f.net, f.conv_node, f.input, 0, 1, "conv");
    for (std::size_t i = 0; i < h.values.numel(); ++i)
        EXPECT_FLOAT_EQ(h1.values[i], h.values[i]);
}

TEST(FixtureOracle, PostprocessedGradcamMatchesHandComputation) {
    CamFixture f = make_cam_fixture();
    Heatmap h = postprocess(grad_cam(fixture_tap(f)), 8);
    expect_map_near(h.values, kFixGradcamNorm8, 1e-6);
    EXPECT_TRUE(h.normalized);
    EXPECT_EQ(h.method, "gradcam");
    EXPECT_EQ(h.tap_layer, "conv");
    EXPECT_EQ(h.target_class, 0);
}

TEST(FixtureOracle, CapturedGradientsMatchFiniteDifferences) {
    CamFixture f = make_cam_fixture();
    model::TapResult tap = fixture_tap(f, 0);

    f.net.forward(f.input, false);
    const Tensor base = f.net.node_output(f.conv_node);
    const float eps = 1e-3f;
    for (std::size_t i = 0; i < base.numel(); ++i) {
        Tensor plus = base;
        plus[i] += eps;
        const float lp = f.net.forward_from(f.conv_node, plus).at(0, 0);
        Tensor minus = base;
        minus[i] -= eps;
        const float lm = f.net.forward_from(f.conv_node, minus).at(0, 0);
        EXPECT_NEAR((lp - lm) / (2.0f * eps), tap.gradients[i], 1e-4) << "entry " << i;
    }
}

TEST(Gradcam, UniformOnesStayOnes) {
    model::TapResult t;
    t.activations = Tensor({1, 2, 2}, {1, 1, 1, 1});
    t.gradients = Tensor({1, 2, 2}, {1, 1, 1, 1});
    Heatmap h = grad_cam(t);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(h.values[i], 1.0f);
}

TEST(Gradcam, ScalesThenNormalizes) {
    model::TapResult t;
    t.activations = Tensor({1, 2, 2}, {1, 0, 0, 0});
    t.gradients = Tensor({1, 2, 2}, {0.5f, 0.5f, 0.5f, 0.5f});
    Heatmap raw = grad_cam(t);
    expect_map_near(raw.values, {0.5f, 0, 0, 0}, 1e-7);
    Heatmap norm = postprocess(raw, 2);
    expect_map_near(norm.values, {1, 0, 0, 0}, 1e-7);
}

TEST(Gradcam, RandomTapsMatchBruteForce) {
    Rng rng(101);
    for (int trial = 0; trial < 25; ++trial) {
        const int c = 1 + rng.uniform_int(4), h = 1 + rng.uniform_int(5),
                  w = 1 + rng.uniform_int(5);
        model::TapResult t = make_tap(c, h, w, rng);
        Heatmap got = grad_cam(t);

        const std::size_t plane = static_cast<std::size_t>(h) * w;
        for (std::size_t i = 0; i < plane; ++i) {
            double acc = 0.0;
            for (int k = 0; k < c; ++k) {
                double alpha = 0.0;
                for (std::size_t j = 0; j < plane; ++j) alpha += t.gradients[k * plane + j];
                acc += alpha / static_cast<double>(plane) * t.activations[k * plane + i];
            }
            EXPECT_NEAR(got.values[i], std::max(0.0, acc), 1e-5);
        }
    }
}

TEST(Gradcampp, UniformPositiveGradientsCollapseToGradcam) {
    Rng rng(202);
    // single channel
    for (int trial = 0; trial < 5; ++trial) {
        model::TapResult t = make_tap(1, 4, 4, rng, 0.0, 2.0);
        const float g = static_cast<float>(rng.uniform(0.1, 1.5));
        for (std::size_t i = 0; i < t.gradients.numel(); ++i) t.gradients[i] = g;
        const auto pp = normalized_copy(grad_cam_pp(t).values);
        const auto gc = normalized_copy(grad_cam(t).values);
        for (std::size_t i = 0; i < pp.size(); ++i) EXPECT_NEAR(pp[i], gc[i], 1e-6);
    }
    // multi channel, identical per-channel activation mass
    for (int trial = 0; trial < 5; ++trial) {
        model::TapResult t = make_tap(3, 4, 4, rng, 0.05, 2.0);
        const std::size_t plane = 16;
        for (int k = 0; k < 3; ++k) {
            double sum = 0.0;
            for (std::size_t i = 0; i < plane; ++i) sum += t.activations[k * plane + i];
            for (std::size_t i = 0; i < plane; ++i)
                t.activations[k * plane + i] = static_cast<float>(t.activations[k * plane + i] * 5.0 / sum);
        }
        const float g = static_cast<float>(rng.uniform(0.1, 1.5));
        for (std::size_t i = 0; i < t.gradients.numel(); ++i) t.gradients[i] = g;
        const auto pp = normalized_copy(grad_cam_pp(t).values);
        const auto gc = normalized_copy(grad_cam(t).values);
        for (std::size_t i = 0; i < pp.size(); ++i) EXPECT_NEAR(pp[i], gc[i], 1e-6);
    }
}

TEST(Gradcampp, NonpositiveGradientsGiveZeroMap) {
    Rng rng(203);
    model::TapResult t = make_tap(2, 3, 3, rng);
    for (std::size_t i = 0; i < t.gradients.numel(); ++i)
        t.gradients[i] = -std::abs(t.gradients[i]);
    t.gradients[4] = 0.0f;
    Heatmap h = grad_cam_pp(t);
    for (std::size_t i = 0; i < h.values.numel(); ++i) EXPECT_FLOAT_EQ(h.values[i], 0.0f);
}

TEST(Gradcampp, RandomTapsMatchClosedForm) {
    Rng rng(204);
    for (int trial = 0; trial < 25; ++trial) {
        model::TapResult t = make_tap(2, 3, 3, rng);
        if (trial == 0)
            for (int i = 0; i < 9; ++i) t.gradients[i] = 0.0f;  // exercises 0/0 -> 0
        Heatmap got = grad_cam_pp(t);

        const std::size_t plane = 9;
        std::vector<double> want(plane, 0.0);
        for (int k = 0; k < 2; ++k) {
            double s3 = 0.0;
            for (std::size_t j = 0; j < plane; ++j) {
                const double g = t.gradients[k * plane + j];
                s3 += t.activations[k * plane + j] * g * g * g;
            }
            double wk = 0.0;
            for (std::size_t j = 0; j < plane; ++j) {
                const double g = t.gradients[k * plane + j];
                const double denom = 2.0 * g * g + s3;
                if (denom != 0.0) wk += g * g / denom * std::max(0.0, g);
            }
            for (std::size_t j = 0; j < plane; ++j) want[j] += wk * t.activations[k * plane + j];
        }
        for (std::size_t j = 0; j < plane; ++j)
            EXPECT_NEAR(got.values[j], std::max(0.0, want[j]), 1e-5);
    }
}

TEST(Layercam, NegativeGradientsGiveZeroMap) {
    Rng rng(301);
    model::TapResult t = make_tap(3, 4, 4, rng);
    for (std::size_t i = 0; i < t.gradients.numel(); ++i)
        t.gradients[i] = -std::abs(t.gradients[i]) - 0.01f;
    Heatmap h = layer_cam(t);
    for (std::size_t i = 0; i < h.values.numel(); ++i) EXPECT_FLOAT_EQ(h.values[i], 0.0f);
}

TEST(Layercam, UniformGradientsReproduceActivations) {
    Rng rng(302);
    model::TapResult t = make_tap(1, 5, 5, rng, 0.0, 3.0);
    for (std::size_t i = 0; i < t.gradients.numel(); ++i) t.gradients[i] = 0.3f;
    const auto got = normalized_copy(layer_cam(t).values);
    const auto want = normalized_copy(t.activations);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
}

TEST(Layercam, RandomTapsMatchBruteForce) {
    Rng rng(303);
    for (int trial = 0; trial < 25; ++trial) {
        model::TapResult t = make_tap(3, 4, 4, rng);
        Heatmap got = layer_cam(t);
        const std::size_t plane = 16;
        for (std::size_t i = 0; i < plane; ++i) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k)
                acc += std::max(0.0, static_cast<double>(t.gradients[k * plane + i])) *
                       t.activations[k * plane + i];
            EXPECT_NEAR(got.values[i], std::max(0.0, acc), 1e-5);
        }
    }
}

TEST(Invariants, RawMapsAreNonnegativeAndNormalizedMapsUnitRange) {
    Rng rng(401);
    for (int trial = 0; trial < 25; ++trial) {
        const int c = 1 + rng.uniform_int(4), h = 2 + rng.uniform_int(5),
                  w = 2 + rng.uniform_int(5);
        model::TapResult t = make_tap(c, h, w, rng);
        for (Heatmap raw : {grad_cam(t), grad_cam_pp(t), layer_cam(t)}) {
            float raw_max = 0.0f;
            for (std::size_t i = 0; i < raw.values.numel(); ++i) {
                ASSERT_TRUE(std::isfinite(raw.values[i]));
                ASSERT_GE(raw.values[i], 0.0f) << raw.method;
                raw_max = std::max(raw_max, raw.values[i]);
            }
            Heatmap norm = postprocess(raw, 9);
            float norm_max = 0.0f;
            for (std::size_t i = 0; i < norm.values.numel(); ++i) {
                ASSERT_GE(norm.values[i], 0.0f);
                ASSERT_LE(norm.values[i], 1.0f);
                norm_max = std::max(norm_max, norm.values[i]);
            }
            if (raw_max > 0.0f)
                EXPECT_FLOAT_EQ(norm_max, 1.0f) << raw.method;
            else
                EXPECT_FLOAT_EQ(norm_max, 0.0f) << raw.method;
        }
    }
}

TEST(Invariants, PositiveGradientScaleLeavesNormalizedMapsUnchanged) {
    Rng rng(402);
    const double c = 3.7;
    for (int trial = 0; trial < 10; ++trial) {
        model::TapResult t = make_tap(3, 4, 4, rng);
        model::TapResult scaled = t;
        for (std::size_t i = 0; i < scaled.gradients.numel(); ++i)
            scaled.gradients[i] = static_cast<float>(scaled.gradients[i] * c);

        for (auto method : {grad_cam, layer_cam}) {
            Heatmap a = method(t), b = method(scaled);
            for (std::size_t i = 0; i < a.values.numel(); ++i)
                EXPECT_NEAR(b.values[i], c * a.values[i], 1e-6 * std::max(1.0, c * a.values[i]));
            Heatmap na = postprocess(a, 4), nb = postprocess(b, 4);
            for (std::size_t i = 0; i < na.values.numel(); ++i)
                EXPECT_NEAR(na.values[i], nb.values[i], 1e-6);
        }
    }
}

TEST(HeatmapErrors, MalformedTapsRejected) {
    model::TapResult empty;
    EXPECT_THROW(grad_cam(empty), DataError);
    EXPECT_THROW(grad_cam_pp(empty), DataError);
    EXPECT_THROW(layer_cam(empty), DataError);

    model::TapResult mismatched;
    mismatched.activations = Tensor({2, 3, 3});
    mismatched.gradients = Tensor({2, 3, 2});
    EXPECT_THROW(grad_cam(mismatched), DataError);

    model::TapResult flat;
    flat.activations = Tensor({3, 3});
    flat.gradients = Tensor({3, 3});
    EXPECT_THROW(layer_cam(flat), DataError);
}

TEST(Scorecam, IdenticalChannelsRecoverTheCommonMap) {
    const int c = 3, side = 4;
    nn::Network net;
    auto conv = std::make_unique<nn::Conv2d>(c, c, 1, 1, 0, 1, false);
    conv->weight().value.zero();
    for (int k = 0; k < c; ++k) conv->weight().value.at(k, k, 0, 0) = 1.0f;
    const int tap = net.add("tap", std::move(conv), {net.input()});
    const int gap = net.add("gap", std::make_unique<nn::GlobalAvgPool>(), {tap});
    auto fc = std::make_unique<nn::Linear>(c, 2);
    fc->weight().value = Tensor({2, c}, {0.4f, -0.2f, 0.7f, -0.1f, 0.5f, 0.3f});
    net.add("fc", std::move(fc), {gap});

    Rng rng(501);
    Tensor common({side, side});
    for (std::size_t i = 0; i < common.numel(); ++i)
        common[i] = static_cast<float>(rng.uniform(0.0, 2.0));
    Tensor input({1, c, side, side});
    for (int k = 0; k < c; ++k)
        for (std::size_t i = 0; i < common.numel(); ++i)
            input[k * common.numel() + i] = common[i];

    Heatmap h = score_cam_net(net, tap, input, 0, 2, "tap");
    for (std::size_t i = 0; i < common.numel(); ++i)
        EXPECT_NEAR(h.values[i], common[i], 1e-5);

    const auto got = normalized_copy(h.values);
    const auto want = normalized_copy(common);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
}

TEST(Scorecam, LogitShiftLeavesHeatmapUnchanged) {
    CamFixture f = make_cam_fixture();
    Heatmap before = score_cam_net(f.net, f.conv_node, f.input, 0, 32, "conv");

    auto* fc = dynamic_cast<nn::Linear*>(f.net.layer(f.net.find("fc")));
    ASSERT_NE(fc, nullptr);
    for (int i = 0; i < 3; ++i) fc->bias().value[i] += 3.7f;

    Heatmap after = score_cam_net(f.net, f.conv_node, f.input, 0, 32, "conv");
    ASSERT_EQ(before.values.numel(), after.values.numel());
    for (std::size_t i = 0; i < before.values.numel(); ++i)
        EXPECT_NEAR(after.values[i], before.values[i], 1e-6);
}

TEST(Scorecam, RejectsBadArguments) {
    CamFixture f = make_cam_fixture();
    EXPECT_THROW(score_cam_net(f.net, f.conv_node, f.input, 0, 0, "conv"), ConfigError);
    EXPECT_THROW(score_cam_net(f.net, f.conv_node, f.input, 5, 32, "conv"), ConfigError);
    Tensor flat({1, 6, 6});
    EXPECT_THROW(score_cam_net(f.net, f.conv_node, flat, 0, 32, "conv"), DataError);
}

TEST(Scorecam, ModelWrapperResolvesPredictedTarget) {
    model::BackboneSpec spec;
    spec.name = "MobileNetV3";
    spec.input_side = 64;
    model::ClassifierModel m(spec, 3, 11);
    auto& head = m.head();
    Rng wrng(512);
    for (std::size_t i = 0; i < head.weight().value.numel(); ++i)
        head.weight().value[i] = static_cast<float>(wrng.uniform(-0.1, 0.1));

    Tensor input({1, 3, 64, 64});
    Rng rng(513);
    for (std::size_t i = 0; i < input.numel(); ++i)
        input[i] = static_cast<float>(rng.uniform(0.0, 1.0));

    const Tensor& logits = m.forward(input, false);
    const int predicted = nn::argmax_row(logits, 0);

    Heatmap def = score_cam(m, input, "stem.hs", std::nullopt, 8);
    EXPECT_EQ(def.target_class, predicted);
    EXPECT_EQ(def.tap_layer, "stem.hs");
    ASSERT_EQ(def.values.dim(0), 32);

    Heatmap explicit_t = score_cam(m, input, "stem.hs", predicted, 8);
    for (std::size_t i = 0; i < def.values.numel(); ++i)
        EXPECT_FLOAT_EQ(explicit_t.values[i], def.values[i]);

    EXPECT_THROW(score_cam(m, input, "no_such_layer", 0, 8), ConfigError);
}

TEST(Postprocess, ConstantAndZeroMapsBecomeZeros) {
    model::TapResult t;
    t.activations = Tensor({1, 2, 2}, {1, 1, 1, 1});
    t.gradients = Tensor({1, 2, 2}, {1, 1, 1, 1});
    Heatmap constant = grad_cam(t);  // all ones
    Heatmap norm = postprocess(constant, 5);
    for (std::size_t i = 0; i < norm.values.numel(); ++i) EXPECT_FLOAT_EQ(norm.values[i], 0.0f);
    EXPECT_TRUE(norm.normalized);

    Heatmap zero;
    zero.values = Tensor({3, 3});
    Heatmap znorm = postprocess(zero, 7);
    for (std::size_t i = 0; i < znorm.values.numel(); ++i) EXPECT_FLOAT_EQ(znorm.values[i], 0.0f);
}

TEST(Postprocess, MinMaxArithmetic) {
    Heatmap raw;
    raw.values = Tensor({2, 2}, {0, 2, 0, 0});
    Heatmap norm = postprocess(raw, 2);
    expect_map_near(norm.values, {0, 1, 0, 0}, 1e-7);
}

TEST(Postprocess, AlreadySpanningMapAtTargetSizeIsUnchanged) {
    Heatmap raw;
    raw.values = Tensor({2, 2}, {0.0f, 0.25f, 1.0f, 0.5f});
    Heatmap norm = postprocess(raw, 2);
    expect_map_near(norm.values, {0.0f, 0.25f, 1.0f, 0.5f}, 1e-7);
}

TEST(Postprocess, RejectsDoubleNormalizationAndBadArgs) {
    Heatmap raw;
    raw.values = Tensor({2, 2}, {0, 1, 2, 3});
    Heatmap norm = postprocess(raw, 4);
    EXPECT_THROW(postprocess(norm, 4), ConfigError);
    EXPECT_THROW(postprocess(raw, 0), ConfigError);
    Heatmap empty;
    EXPECT_THROW(postprocess(empty, 4), DataError);
}

Heatmap unit_ramp(int side) {
    Heatmap h;
    h.values = Tensor({side, side});
    for (std::size_t i = 0; i < h.values.numel(); ++i)
        h.values[i] = static_cast<float>(i) / static_cast<float>(h.values.numel() - 1);
    h.normalized = true;
    return h;
}

TEST(Overlay, AlphaZeroReturnsTheImage) {
    Image gray(4, 4, 1);
    for (std::size_t i = 0; i < gray.numel(); ++i) gray.px[i] = static_cast<float>(i) / 16.0f;
    Image out = overlay(gray, unit_ramp(4), 0.0);
    const Image base = replicate_to_rgb(gray);
    ASSERT_EQ(out.c, 3);
    for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_FLOAT_EQ(out.px[i], base.px[i]);

    Image rgb(4, 4, 3, 0.25f);
    Image out3 = overlay(rgb, unit_ramp(4), 0.0);
    for (std::size_t i = 0; i < out3.numel(); ++i) EXPECT_FLOAT_EQ(out3.px[i], rgb.px[i]);
}

TEST(Overlay, AlphaOneDependsOnlyOnTheHeatmap) {
    Image a(4, 4, 1, 0.1f);
    Image b(4, 4, 3, 0.9f);
    Heatmap map = unit_ramp(4);
    Image oa = overlay(a, map, 1.0);
    Image ob = overlay(b, map, 1.0);
    ASSERT_EQ(oa.numel(), ob.numel());
    for (std::size_t i = 0; i < oa.numel(); ++i) {
        EXPECT_FLOAT_EQ(oa.px[i], ob.px[i]);
        EXPECT_GE(oa.px[i], 0.0f);
        EXPECT_LE(oa.px[i], 1.0f);
    }
}

TEST(Overlay, ZeroHeatmapBlendsOneConstantColor) {
    Image img(5, 5, 1);
    Rng rng(601);
    for (std::size_t i = 0; i < img.numel(); ++i)
        img.px[i] = static_cast<float>(rng.uniform(0.0, 1.0));
    Heatmap zero;
    zero.values = Tensor({5, 5});
    zero.normalized = true;

    const double alpha = 0.4;
    Image out = overlay(img, zero, alpha);
    const Image base = replicate_to_rgb(img);
    for (int ch = 0; ch < 3; ++ch) {
        const float color = out.at(0, 0, ch) - (1.0f - static_cast<float>(alpha)) * base.at(0, 0, ch);
        for (int y = 0; y < 5; ++y)
            for (int x = 0; x < 5; ++x)
                EXPECT_NEAR(out.at(y, x, ch) - (1.0f - alpha) * base.at(y, x, ch), color, 1e-6);
    }
}

TEST(Overlay, RejectsInvalidInputs) {
    Image img(4, 4, 1, 0.5f);
    Heatmap raw;
    raw.values = Tensor({4, 4}, std::vector<float>(16, 0.5f));
    EXPECT_THROW(overlay(img, raw, 0.5), ConfigError);

    Heatmap small = unit_ramp(3);
    EXPECT_THROW(overlay(img, small, 0.5), DataError);

    Heatmap ok = unit_ramp(4);
    EXPECT_THROW(overlay(img, ok, -0.1), ConfigError);
    EXPECT_THROW(overlay(img, ok, 1.5), ConfigError);
}

}  // namespace
}  // namespace camscope::cam
