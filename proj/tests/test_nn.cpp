#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "camscope/nn/adam.hpp"
#include "camscope/nn/init.hpp"
#include "camscope/nn/layers.hpp"
#include "camscope/nn/loss.hpp"
#include "camscope/nn/network.hpp"
#include "nn_testutil.hpp"

using namespace camscope;
using namespace camscope::nn;
using testutil::dot_score;
using testutil::expect_tensor_near;
using testutil::gradcheck_layer;
using testutil::random_like;

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------
TEST(Rng, DeterministicStreams) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
    Rng c(Rng::derive(42, "alpha"));
    Rng d(Rng::derive(42, "beta"));
    ASSERT_NE(c.next_u64(), d.next_u64());
    ASSERT_EQ(Rng::derive(42, "alpha"), Rng::derive(42, "alpha"));
    ASSERT_NE(Rng::derive(42, 1, 2), Rng::derive(42, 2, 1));
}

TEST(Rng, UniformBoundsAndMean) {
    Rng r(7);
    double sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / 20000.0, 0.5, 0.01);
}

TEST(Rng, NormalMoments) {
    Rng r(11);
    double sum = 0.0, sq = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        const double v = r.normal();
        sum += v;
        sq += v * v;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.02);
    EXPECT_NEAR(sq / n, 1.0, 0.03);
}

TEST(Rng, ShuffleIsPermutation) {
    Rng r(3);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    r.shuffle(v);
    std::set<int> seen(v.begin(), v.end());
    ASSERT_EQ(seen.size(), 50u);
    ASSERT_EQ(*seen.begin(), 0);
    ASSERT_EQ(*seen.rbegin(), 49);
}

TEST(Rng, UniformIntInRange) {
    Rng r(9);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const int k = static_cast<int>(r.uniform_int(7));
        ASSERT_GE(k, 0);
        ASSERT_LT(k, 7);
        ++counts[k];
    }
    for (int c : counts) EXPECT_GT(c, 700);
}

// ---------------------------------------------------------------------------
// Convolution vs a direct nested-loop oracle
// ---------------------------------------------------------------------------
static Tensor conv_naive(const Tensor& x, const Tensor& w, const Tensor* bias, int sh,
                         int sw, int ph, int pw, int groups) {
    const int n = x.dim(0), ic = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int oc = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int icg = ic / groups, ocg = oc / groups;
    const int oh = (h + 2 * ph - kh) / sh + 1;
    const int ow = (ww + 2 * pw - kw) / sw + 1;
    Tensor y({n, oc, oh, ow});
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < oc; ++o) {
            const int g = o / ocg;
            for (int r = 0; r < oh; ++r)
                for (int q = 0; q < ow; ++q) {
                    double acc = bias ? (*bias)[o] : 0.0;
                    for (int c = 0; c < icg; ++c)
                        for (int ki = 0; ki < kh; ++ki)
                            for (int kj = 0; kj < kw; ++kj) {
                                const int yy = r * sh - ph + ki;
                                const int xx = q * sw - pw + kj;
                                if (yy < 0 || yy >= h || xx < 0 || xx >= ww) continue;
                                acc += static_cast<double>(w.at(o, c, ki, kj)) *
                                       x.at(i, g * icg + c, yy, xx);
                            }
                    y.at(i, o, r, q) = static_cast<float>(acc);
                }
        }
    return y;
}

static void conv_forward_case(int n, int ic, int oc, int h, int w, int kh, int kw, int sh,
                              int sw, int ph, int pw, int groups, bool bias, unsigned seed) {
    Rng rng(seed);
    Conv2d conv(ic, oc, kh, kw, sh, sw, ph, pw, groups, bias);
    testutil::Tensor wv = random_like({oc, ic / groups, kh, kw}, rng);
    conv.weight().value = wv;
    if (bias) conv.bias().value = random_like({oc}, rng);
    Tensor x = random_like({n, ic, h, w}, rng);
    Tensor got = conv.forward({&x}, false);
    Tensor want = conv_naive(x, wv, bias ? &conv.bias().value : nullptr, sh, sw, ph, pw, groups);
    expect_tensor_near(got, want, 2e-4f);
}

TEST(Conv2d, MatchesNaiveGeneral) { conv_forward_case(2, 3, 5, 7, 6, 3, 3, 2, 2, 1, 1, 1, true, 101); }
TEST(Conv2d, MatchesNaivePointwise) { conv_forward_case(2, 8, 6, 5, 5, 1, 1, 1, 1, 0, 0, 1, true, 102); }
TEST(Conv2d, MatchesNaiveDepthwise) { conv_forward_case(2, 6, 6, 8, 8, 3, 3, 1, 1, 1, 1, 6, false, 103); }
TEST(Conv2d, MatchesNaiveDepthwiseStride2K5) { conv_forward_case(1, 4, 4, 9, 9, 5, 5, 2, 2, 2, 2, 4, false, 104); }
TEST(Conv2d, MatchesNaiveGrouped) { conv_forward_case(2, 8, 12, 6, 6, 3, 3, 1, 1, 1, 1, 4, true, 105); }
TEST(Conv2d, MatchesNaiveAsymmetric) { conv_forward_case(1, 3, 4, 9, 9, 1, 7, 1, 1, 0, 3, 1, true, 106); }
TEST(Conv2d, MatchesNaiveAsymmetricTall) { conv_forward_case(1, 3, 4, 9, 9, 7, 1, 1, 1, 3, 0, 1, true, 107); }
TEST(Conv2d, MatchesNaiveNoPadStride) { conv_forward_case(2, 3, 4, 8, 8, 3, 3, 2, 2, 0, 0, 1, true, 108); }

TEST(Conv2d, GradcheckGeneral) {
    Rng rng(201);
    Conv2d conv(3, 4, 3, 3, 2, 2, 1, 1, 1, true);
    he_init(conv.weight(), conv.fan_in(), rng);
    gradcheck_layer(conv, {random_like({2, 3, 5, 5}, rng)}, false, 202);
}

TEST(Conv2d, GradcheckDepthwise) {
    Rng rng(203);
    Conv2d conv(4, 4, 3, 3, 1, 1, 1, 1, 4, false);
    he_init(conv.weight(), conv.fan_in(), rng);
    gradcheck_layer(conv, {random_like({2, 4, 4, 4}, rng)}, false, 204);
}

TEST(Conv2d, GradcheckPointwise) {
    Rng rng(205);
    Conv2d conv(5, 3, 1, 1, 1, 1, 0, 0, 1, true);
    he_init(conv.weight(), conv.fan_in(), rng);
    gradcheck_layer(conv, {random_like({2, 5, 3, 3}, rng)}, false, 206);
}

TEST(Conv2d, GradcheckGrouped) {
    Rng rng(207);
    Conv2d conv(4, 6, 3, 3, 1, 1, 1, 1, 2, true);
    he_init(conv.weight(), conv.fan_in(), rng);
    gradcheck_layer(conv, {random_like({1, 4, 4, 4}, rng)}, false, 208);
}

// ---------------------------------------------------------------------------
// BatchNorm
// ---------------------------------------------------------------------------
TEST(BatchNorm2d, TrainForwardMatchesDirect) {
    Rng rng(301);
    BatchNorm2d bn(3);
    bn.params()[0]->value = random_like({3}, rng, 0.5f, 1.5f);
    bn.params()[1]->value = random_like({3}, rng, -0.5f, 0.5f);
    Tensor x = random_like({4, 3, 2, 2}, rng, -2.0f, 2.0f);
    Tensor y = bn.forward({&x}, true);

    const int count = 4 * 2 * 2;
    for (int c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (int n = 0; n < 4; ++n)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) mean += x.at(n, c, i, j);
        mean /= count;
        double var = 0.0;
        for (int n = 0; n < 4; ++n)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    const double d = x.at(n, c, i, j) - mean;
                    var += d * d;
                }
        var /= count;
        const double istd = 1.0 / std::sqrt(var + 1e-5);
        const double g = bn.params()[0]->value[c], b = bn.params()[1]->value[c];
        for (int n = 0; n < 4; ++n)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    ASSERT_NEAR(y.at(n, c, i, j), g * (x.at(n, c, i, j) - mean) * istd + b, 1e-4);

        // running stats: momentum 0.1, unbiased variance
        const double unb = var * count / (count - 1);
        ASSERT_NEAR(bn.state()[0]->value[c], 0.1 * mean, 1e-5);
        ASSERT_NEAR(bn.state()[1]->value[c], 0.9 * 1.0 + 0.1 * unb, 1e-4);
    }
}

TEST(BatchNorm2d, EvalUsesRunningStats) {
    BatchNorm2d bn(2);
    bn.state()[0]->value[0] = 1.0f;
    bn.state()[0]->value[1] = -1.0f;
    bn.state()[1]->value[0] = 4.0f;
    bn.state()[1]->value[1] = 0.25f;
    Tensor x({1, 2, 1, 1}, {3.0f, 0.0f});
    Tensor y = bn.forward({&x}, false);
    EXPECT_NEAR(y[0], (3.0 - 1.0) / std::sqrt(4.0 + 1e-5), 1e-5);
    EXPECT_NEAR(y[1], (0.0 + 1.0) / std::sqrt(0.25 + 1e-5), 1e-5);
}

TEST(BatchNorm2d, GradcheckTrainMode) {
    Rng rng(303);
    BatchNorm2d bn(2);
    bn.params()[0]->value = random_like({2}, rng, 0.5f, 1.5f);
    bn.params()[1]->value = random_like({2}, rng, -0.3f, 0.3f);
    gradcheck_layer(bn, {random_like({3, 2, 2, 2}, rng, -2.0f, 2.0f)}, true, 304, 1e-2f, 5e-3, 4e-2);
}

TEST(BatchNorm2d, GradcheckEvalMode) {
    Rng rng(305);
    BatchNorm2d bn(2);
    bn.params()[0]->value = random_like({2}, rng, 0.5f, 1.5f);
    bn.state()[0]->value = random_like({2}, rng, -0.5f, 0.5f);
    bn.state()[1]->value = random_like({2}, rng, 0.5f, 2.0f);
    gradcheck_layer(bn, {random_like({2, 2, 3, 3}, rng, -2.0f, 2.0f)}, false, 306);
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------
static Tensor away_from(const std::vector<int>& shape, const std::vector<float>& kinks,
                        Rng& rng) {
    Tensor t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) {
        float v;
        bool ok;
        do {
            v = static_cast<float>(rng.uniform(-5.0, 5.0));
            ok = true;
            for (float k : kinks)
                if (std::abs(v - k) < 0.2f) ok = false;
        } while (!ok);
        t[i] = v;
    }
    return t;
}

TEST(Activations, ReluForwardAndGrad) {
    Rng rng(401);
    ReLU relu;
    Tensor x({1, 1, 2, 2}, {-1.0f, 2.0f, 0.0f, -3.0f});
    Tensor y = relu.forward({&x}, false);
    expect_tensor_near(y, Tensor({1, 1, 2, 2}, {0.0f, 2.0f, 0.0f, 0.0f}), 0.0f);
    gradcheck_layer(relu, {away_from({2, 3, 3, 3}, {0.0f}, rng)}, false, 402);
}

TEST(Activations, HardSwishValuesAndGrad) {
    HardSwish hs;
    Tensor x({1, 1, 1, 5}, {-4.0f, -3.0f, 0.0f, 3.0f, 5.0f});
    Tensor y = hs.forward({&x}, false);
    EXPECT_FLOAT_EQ(y[0], 0.0f);
    EXPECT_FLOAT_EQ(y[1], 0.0f);
    EXPECT_FLOAT_EQ(y[2], 0.0f);
    EXPECT_FLOAT_EQ(y[3], 3.0f);
    EXPECT_FLOAT_EQ(y[4], 5.0f);
    EXPECT_NEAR(hs.forward({&x}, false)[2], 0.0f, 1e-6);
    Tensor x1({1, 1, 1, 1}, {1.0f});
    EXPECT_NEAR(hs.forward({&x1}, false)[0], 1.0f * 4.0f / 6.0f, 1e-6);
    Rng rng(403);
    gradcheck_layer(hs, {away_from({2, 2, 3, 3}, {-3.0f, 3.0f}, rng)}, false, 404);
}

TEST(Activations, HardSigmoidValuesAndGrad) {
    HardSigmoid hsig;
    Tensor x({1, 1, 1, 4}, {-5.0f, -3.0f, 0.0f, 4.0f});
    Tensor y = hsig.forward({&x}, false);
    EXPECT_FLOAT_EQ(y[0], 0.0f);
    EXPECT_FLOAT_EQ(y[1], 0.0f);
    EXPECT_FLOAT_EQ(y[2], 0.5f);
    EXPECT_FLOAT_EQ(y[3], 1.0f);
    Rng rng(405);
    gradcheck_layer(hsig, {away_from({2, 2, 2, 2}, {-3.0f, 3.0f}, rng)}, false, 406);
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------
TEST(MaxPool2d, ForwardOracleAndRouting) {
    MaxPool2d mp(2, 2, 0);
    Tensor x({1, 1, 4, 4}, {1, 5, 2, 0,
                            3, 4, 1, 7,
                            0, 0, 9, 8,
                            2, 1, 3, 4});
    Tensor y = mp.forward({&x}, false);
    expect_tensor_near(y, Tensor({1, 1, 2, 2}, {5, 7, 2, 9}), 0.0f);
    Tensor g({1, 1, 2, 2}, {10, 20, 30, 40});
    Tensor gx = mp.backward({&x}, y, g)[0];
    Tensor want({1, 1, 4, 4}, {0, 10, 0, 0,
                               0, 0, 0, 20,
                               0, 0, 40, 0,
                               30, 0, 0, 0});
    expect_tensor_near(gx, want, 0.0f);
}

TEST(MaxPool2d, PaddedWindowIgnoresOutside) {
    MaxPool2d mp(3, 2, 1);
    Tensor x({1, 1, 3, 3}, {-5, -6, -7, -8, -9, -1, -2, -3, -4});
    Tensor y = mp.forward({&x}, false);
    // top-left window covers rows/cols {0,1} only
    EXPECT_FLOAT_EQ(y.at(0, 0, 0, 0), -5.0f);
    EXPECT_FLOAT_EQ(y.at(0, 0, 1, 1), -1.0f);
}

TEST(MaxPool2d, Gradcheck) {
    Rng rng(411);
    MaxPool2d mp(3, 2, 1);
    // well-separated values so +-h cannot flip an argmax
    Tensor x({1, 2, 5, 5});
    std::vector<int> order(x.numel());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = order[i] * 0.5f;
    gradcheck_layer(mp, {x}, false, 412);
}

TEST(AvgPool2d, CountIncludePad) {
    AvgPool2d ap(3, 1, 1);
    Tensor x({1, 1, 2, 2}, {6, 6, 6, 6});
    Tensor y = ap.forward({&x}, false);
    // corner window sees 4 real cells of 6 and 5 padded zeros, divisor 9
    EXPECT_NEAR(y.at(0, 0, 0, 0), 24.0 / 9.0, 1e-6);
}

TEST(AvgPool2d, Gradcheck) {
    Rng rng(413);
    AvgPool2d ap(3, 2, 1);
    gradcheck_layer(ap, {random_like({2, 2, 5, 5}, rng)}, false, 414);
}

TEST(GlobalAvgPool, ForwardAndGrad) {
    GlobalAvgPool gap;
    Tensor x({1, 2, 2, 2}, {1, 2, 3, 4, 10, 20, 30, 40});
    Tensor y = gap.forward({&x}, false);
    EXPECT_FLOAT_EQ(y.at(0, 0), 2.5f);
    EXPECT_FLOAT_EQ(y.at(0, 1), 25.0f);
    Rng rng(415);
    gradcheck_layer(gap, {random_like({2, 3, 4, 4}, rng)}, false, 416);
}

// ---------------------------------------------------------------------------
// Linear / structural layers
// ---------------------------------------------------------------------------
TEST(Linear, ForwardOracle) {
    Linear fc(3, 2);
    fc.weight().value = Tensor({2, 3}, {1, 2, 3, 4, 5, 6});
    fc.bias().value = Tensor({2}, {0.5f, -0.5f});
    Tensor x({2, 3}, {1, 0, -1, 2, 2, 2});
    Tensor y = fc.forward({&x}, false);
    expect_tensor_near(y, Tensor({2, 2}, {1 - 3 + 0.5f, 4 - 6 - 0.5f, 12.5f, 29.5f}), 1e-5f);
}

TEST(Linear, Gradcheck) {
    Rng rng(421);
    Linear fc(4, 3);
    he_init(fc.weight(), fc.fan_in(), rng);
    gradcheck_layer(fc, {random_like({3, 4}, rng)}, false, 422);
}

TEST(Structural, AddGradcheck) {
    Rng rng(431);
    Add add;
    gradcheck_layer(add, {random_like({2, 3, 2, 2}, rng), random_like({2, 3, 2, 2}, rng)},
                    false, 432);
}

TEST(Structural, ConcatForwardAndGrad) {
    Concat cat;
    Tensor a({1, 1, 1, 2}, {1, 2});
    Tensor b({1, 2, 1, 2}, {3, 4, 5, 6});
    Tensor y = cat.forward({&a, &b}, false);
    expect_tensor_near(y, Tensor({1, 3, 1, 2}, {1, 2, 3, 4, 5, 6}), 0.0f);
    Rng rng(433);
    gradcheck_layer(cat, {random_like({2, 2, 2, 2}, rng), random_like({2, 3, 2, 2}, rng)},
                    false, 434);
}

TEST(Structural, ChannelScaleGradcheck) {
    Rng rng(435);
    ChannelScale cs;
    gradcheck_layer(cs, {random_like({2, 3, 2, 2}, rng), random_like({2, 3}, rng)}, false, 436);
}

// ---------------------------------------------------------------------------
// Network graph
// ---------------------------------------------------------------------------
static Network diamond_net(unsigned seed) {
    Rng rng(seed);
    Network net;
    auto conv1 = std::make_unique<Conv2d>(2, 4, 3, 1, 1);
    he_init(conv1->weight(), conv1->fan_in(), rng);
    const int c1 = net.add("conv1", std::move(conv1), {net.input()});
    const int r1 = net.add("relu1", std::make_unique<ReLU>(), {c1});
    auto conv2 = std::make_unique<Conv2d>(4, 4, 3, 1, 1);
    he_init(conv2->weight(), conv2->fan_in(), rng);
    const int c2 = net.add("conv2", std::move(conv2), {r1});
    const int sum = net.add("sum", std::make_unique<Add>(), {c2, r1});
    const int gap = net.add("gap", std::make_unique<GlobalAvgPool>(), {sum});
    auto fc = std::make_unique<Linear>(4, 3);
    he_init(fc->weight(), fc->fan_in(), rng);
    net.add("fc", std::move(fc), {gap});
    return net;
}

TEST(Network, DiamondGradcheckInput) {
    Network net = diamond_net(501);
    Rng rng(502);
    Tensor x = random_like({2, 2, 5, 5}, rng);
    Tensor out = net.forward(x, false);
    Tensor r(out.shape());
    for (std::size_t i = 0; i < r.numel(); ++i) r[i] = rng.uniform() < 0.5 ? -1.0f : 1.0f;
    net.zero_grads();
    net.backward(r);
    Tensor gin = net.node_grad(net.input());
    ASSERT_TRUE(gin.same_shape(x));

    const float h = 1e-2f;
    for (std::size_t e = 0; e < x.numel(); ++e) {
        const float save = x[e];
        x[e] = save + h;
        const double up = dot_score(net.forward(x, false), r);
        x[e] = save - h;
        const double dn = dot_score(net.forward(x, false), r);
        x[e] = save;
        const double numeric = (up - dn) / (2.0 * h);
        const double bound =
            3e-3 + 3e-2 * std::max(std::abs(numeric), std::abs(static_cast<double>(gin[e])));
        ASSERT_LE(std::abs(gin[e] - numeric), bound) << "input elem " << e;
    }
}

TEST(Network, DiamondGradcheckParams) {
    Network net = diamond_net(503);
    Rng rng(504);
    Tensor x = random_like({1, 2, 4, 4}, rng);
    Tensor out = net.forward(x, false);
    Tensor r(out.shape());
    for (std::size_t i = 0; i < r.numel(); ++i) r[i] = rng.uniform() < 0.5 ? -1.0f : 1.0f;
    net.zero_grads();
    net.backward(r);
    std::vector<Tensor> saved;
    for (Param* p : net.params()) saved.push_back(p->grad);

    const float h = 1e-2f;
    std::vector<Param*> ps = net.params();
    for (std::size_t k = 0; k < ps.size(); ++k)
        for (std::size_t e = 0; e < ps[k]->value.numel(); ++e) {
            const float save = ps[k]->value[e];
            ps[k]->value[e] = save + h;
            const double up = dot_score(net.forward(x, false), r);
            ps[k]->value[e] = save - h;
            const double dn = dot_score(net.forward(x, false), r);
            ps[k]->value[e] = save;
            const double numeric = (up - dn) / (2.0 * h);
            const double analytic = saved[k][e];
            const double bound = 3e-3 + 3e-2 * std::max(std::abs(numeric), std::abs(analytic));
            ASSERT_LE(std::abs(analytic - numeric), bound)
                << ps[k]->name << " elem " << e;
        }
}

TEST(Network, ForwardFromReproducesDownstream) {
    Network net = diamond_net(505);
    Rng rng(506);
    Tensor x = random_like({1, 2, 5, 5}, rng);
    Tensor out = net.forward(x, false);
    const int node = net.find("relu1");
    ASSERT_GE(node, 0);
    Tensor cached = net.node_output(node);
    Tensor redo = net.forward_from(node, cached);
    expect_tensor_near(redo, out, 0.0f);

    Tensor bumped = cached;
    bumped[0] += 1.0f;
    Tensor changed = net.forward_from(node, bumped);
    bool differs = false;
    for (std::size_t i = 0; i < changed.numel(); ++i)
        if (changed[i] != out[i]) differs = true;
    EXPECT_TRUE(differs);
}

TEST(Network, FindAndRanks) {
    Network net = diamond_net(507);
    EXPECT_EQ(net.find("missing"), -1);
    EXPECT_EQ(net.rank(net.find("conv1")), 4);
    EXPECT_EQ(net.rank(net.find("gap")), 2);
    EXPECT_EQ(net.rank(net.find("fc")), 2);
}

// ---------------------------------------------------------------------------
// Loss and optimizer
// ---------------------------------------------------------------------------
TEST(Loss, SoftmaxRowsSumToOne) {
    Tensor logits({2, 3}, {1.0f, 2.0f, 3.0f, -50.0f, 0.0f, 50.0f});
    Tensor p = softmax(logits);
    for (int i = 0; i < 2; ++i) {
        double s = 0.0;
        for (int j = 0; j < 3; ++j) {
            ASSERT_GE(p.at(i, j), 0.0f);
            s += p.at(i, j);
        }
        ASSERT_NEAR(s, 1.0, 1e-5);
    }
    EXPECT_NEAR(p.at(1, 2), 1.0f, 1e-6);
}

TEST(Loss, CrossEntropyMatchesFiniteDifference) {
    Rng rng(601);
    Tensor logits = random_like({3, 4}, rng, -2.0f, 2.0f);
    std::vector<int> labels = {2, 0, 3};
    CeResult res = cross_entropy(logits, labels);

    const float h = 1e-3f;
    for (std::size_t e = 0; e < logits.numel(); ++e) {
        const float save = logits[e];
        logits[e] = save + h;
        const double up = cross_entropy(logits, labels).loss;
        logits[e] = save - h;
        const double dn = cross_entropy(logits, labels).loss;
        logits[e] = save;
        const double numeric = (up - dn) / (2.0 * h);
        ASSERT_NEAR(res.grad[e], numeric, 2e-3) << "logit " << e;
    }
}

TEST(Loss, CrossEntropyKnownValue) {
    // uniform logits over k classes: loss = log k
    Tensor logits({1, 4}, {0.7f, 0.7f, 0.7f, 0.7f});
    CeResult res = cross_entropy(logits, {1});
    EXPECT_NEAR(res.loss, std::log(4.0), 1e-5);
}

TEST(Loss, ArgmaxLowestTieWins) {
    Tensor t({1, 4}, {1.0f, 3.0f, 3.0f, 2.0f});
    EXPECT_EQ(argmax_row(t, 0), 1);
}

TEST(Adam, SingleStepHandComputed) {
    Param p("w", {2});
    p.value[0] = 1.0f;
    p.value[1] = -2.0f;
    p.grad[0] = 0.5f;
    p.grad[1] = -1.0f;
    Adam opt({&p}, 0.1f);
    opt.step();
    // t=1: mhat = g, vhat = g^2, update = lr * g / (|g| + eps)
    EXPECT_NEAR(p.value[0], 1.0f - 0.1f * 0.5f / (0.5f + 1e-8f), 1e-6);
    EXPECT_NEAR(p.value[1], -2.0f + 0.1f * 1.0f / (1.0f + 1e-8f), 1e-6);
}

TEST(Adam, TwoStepsHandComputed) {
    Param p("w", {1});
    p.value[0] = 0.0f;
    p.grad[0] = 1.0f;
    Adam opt({&p}, 0.01f);
    opt.step();
    const double w1 = -0.01 * 1.0 / (1.0 + 1e-8);
    EXPECT_NEAR(p.value[0], w1, 1e-7);
    p.grad[0] = 2.0f;
    opt.step();
    const double m = 0.9 * 0.1 * 1.0 + 0.1 * 2.0;  // raw first moment after step 2
    const double v = 0.999 * 0.001 * 1.0 + 0.001 * 4.0;
    const double mh = m / (1.0 - 0.81);
    const double vh = v / (1.0 - 0.999 * 0.999);
    EXPECT_NEAR(p.value[0], w1 - 0.01 * mh / (std::sqrt(vh) + 1e-8), 1e-6);
}

// A two-parameter quadratic should descend under Adam.
TEST(Adam, ConvergesOnQuadratic) {
    Param p("w", {2});
    p.value[0] = 3.0f;
    p.value[1] = -4.0f;
    Adam opt({&p}, 0.05f);
    for (int i = 0; i < 2000; ++i) {
        p.grad[0] = 2.0f * p.value[0];
        p.grad[1] = 2.0f * p.value[1];
        opt.step();
    }
    EXPECT_NEAR(p.value[0], 0.0f, 1e-2);
    EXPECT_NEAR(p.value[1], 0.0f, 1e-2);
}

// End-to-end sanity: a tiny conv net should overfit 8 samples.
TEST(Training, TinyNetOverfits) {
    Rng rng(701);
    Network net;
    auto conv = std::make_unique<Conv2d>(1, 4, 3, 1, 1);
    he_init(conv->weight(), conv->fan_in(), rng);
    const int c = net.add("conv", std::move(conv), {net.input()});
    const int bn = net.add("bn", std::make_unique<BatchNorm2d>(4), {c});
    const int r = net.add("relu", std::make_unique<ReLU>(), {bn});
    const int g = net.add("gap", std::make_unique<GlobalAvgPool>(), {r});
    auto fc = std::make_unique<Linear>(4, 2);
    normal_init(fc->weight(), 0.05f, rng);
    net.add("fc", std::move(fc), {g});

    // class 0: bright top half; class 1: bright bottom half
    Tensor x({8, 1, 6, 6});
    std::vector<int> labels(8);
    for (int i = 0; i < 8; ++i) {
        labels[i] = i % 2;
        for (int y = 0; y < 6; ++y)
            for (int xx = 0; xx < 6; ++xx) {
                const bool bright = labels[i] == 0 ? y < 3 : y >= 3;
                x.at(i, 0, y, xx) = (bright ? 1.0f : 0.1f) +
                                    0.05f * static_cast<float>(rng.normal());
            }
    }

    Adam opt(net.params(), 0.05f);
    float last = 1e9f;
    for (int step = 0; step < 400; ++step) {
        const Tensor& logits = net.forward(x, true);
        CeResult ce = cross_entropy(logits, labels);
        net.zero_grads();
        net.backward(ce.grad);
        opt.step();
        last = ce.loss;
    }
    EXPECT_LT(last, 0.05f);

    const Tensor& logits = net.forward(x, false);
    int correct = 0;
    for (int i = 0; i < 8; ++i)
        if (argmax_row(logits, i) == labels[i]) ++correct;
    EXPECT_EQ(correct, 8);
}
