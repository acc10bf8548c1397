#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "camscope/core/rng.hpp"
#include "camscope/model/backbone_spec.hpp"
#include "camscope/nn/init.hpp"
#include "camscope/nn/layers.hpp"
#include "camscope/nn/network.hpp"

namespace camscope::model {

struct BuiltFeatures {
    int out_node = -1;  // final feature-map node (the default tap)
    int channels = 0;
};

namespace build_detail {

using nn::Network;

// Shared plumbing for the architecture builders. Weights are He-initialized
// in creation order from one stream, so a (name, seed) pair pins every value.
struct B {
    Network& net;
    Rng& rng;
    float bn_eps = 1e-5f;

    int conv(const std::string& name, int in, int in_c, int out_c, int kh, int kw, int sh,
             int sw, int ph, int pw, int groups = 1, bool bias = false) {
        auto c = std::make_unique<nn::Conv2d>(in_c, out_c, kh, kw, sh, sw, ph, pw, groups,
                                              bias);
        nn::he_init(c->weight(), c->fan_in(), rng);
        return net.add(name, std::move(c), {in});
    }

    int bn(const std::string& name, int in, int channels) {
        return net.add(name, std::make_unique<nn::BatchNorm2d>(channels, bn_eps), {in});
    }

    int relu(const std::string& name, int in) {
        return net.add(name, std::make_unique<nn::ReLU>(), {in});
    }

    int hswish(const std::string& name, int in) {
        return net.add(name, std::make_unique<nn::HardSwish>(), {in});
    }

    int conv_bn(const std::string& prefix, int in, int in_c, int out_c, int kh, int kw,
                int sh, int sw, int ph, int pw, int groups = 1) {
        const int c = conv(prefix + ".conv", in, in_c, out_c, kh, kw, sh, sw, ph, pw, groups);
        return bn(prefix + ".bn", c, out_c);
    }

    int conv_bn_relu(const std::string& prefix, int in, int in_c, int out_c, int kh, int kw,
                     int sh, int sw, int ph, int pw, int groups = 1) {
        return relu(prefix + ".relu", conv_bn(prefix, in, in_c, out_c, kh, kw, sh, sw, ph, pw, groups));
    }

    int maxpool(const std::string& name, int in, int k, int s, int p) {
        return net.add(name, std::make_unique<nn::MaxPool2d>(k, s, p), {in});
    }

    int avgpool(const std::string& name, int in, int k, int s, int p) {
        return net.add(name, std::make_unique<nn::AvgPool2d>(k, s, p), {in});
    }

    int add(const std::string& name, int a, int b2) {
        return net.add(name, std::make_unique<nn::Add>(), {a, b2});
    }

    int cat(const std::string& name, std::vector<int> ins) {
        return net.add(name, std::make_unique<nn::Concat>(), std::move(ins));
    }
};

// ---------------------------------------------------------------------------
// ResNet 50 / 101 / 152 (bottleneck residual stages, stride on the 3x3)
// ---------------------------------------------------------------------------
inline BuiltFeatures build_resnet(Network& net, Rng& rng, const std::array<int, 4>& blocks) {
    B b{net, rng};
    int n = b.conv_bn_relu("conv1", net.input(), 3, 64, 7, 7, 2, 2, 3, 3);
    n = b.maxpool("maxpool", n, 3, 2, 1);

    int in_c = 64;
    const int mids[4] = {64, 128, 256, 512};
    for (int s = 0; s < 4; ++s) {
        const int stage_stride = s == 0 ? 1 : 2;
        for (int blk = 0; blk < blocks[s]; ++blk) {
            const std::string p =
                "layer" + std::to_string(s + 1) + "." + std::to_string(blk);
            const int st = blk == 0 ? stage_stride : 1;
            const int mid = mids[s], out_c = mid * 4;

            int x = b.conv_bn_relu(p + ".conv1", n, in_c, mid, 1, 1, 1, 1, 0, 0);
            x = b.conv_bn_relu(p + ".conv2", x, mid, mid, 3, 3, st, st, 1, 1);
            x = b.conv_bn(p + ".conv3", x, mid, out_c, 1, 1, 1, 1, 0, 0);

            int skip = n;
            if (st != 1 || in_c != out_c)
                skip = b.conv_bn(p + ".down", n, in_c, out_c, 1, 1, st, st, 0, 0);
            n = b.relu(p + ".out", b.add(p + ".add", x, skip));
            in_c = out_c;
        }
    }
    return {n, in_c};
}

// ---------------------------------------------------------------------------
// DenseNet 121 / 169 / 201 (growth 32, bottleneck factor 4)
// ---------------------------------------------------------------------------
inline BuiltFeatures build_densenet(Network& net, Rng& rng,
                                    const std::array<int, 4>& config) {
    B b{net, rng};
    constexpr int growth = 32, bottleneck = 4 * growth;

    int n = b.conv("features.conv0", net.input(), 3, 64, 7, 7, 2, 2, 3, 3);
    n = b.bn("features.norm0", n, 64);
    n = b.relu("features.relu0", n);
    n = b.maxpool("features.pool0", n, 3, 2, 1);

    int ch = 64;
    for (int bi = 0; bi < 4; ++bi) {
        for (int li = 0; li < config[bi]; ++li) {
            const std::string p = "features.denseblock" + std::to_string(bi + 1) +
                                  ".denselayer" + std::to_string(li + 1);
            int x = b.relu(p + ".relu1", b.bn(p + ".norm1", n, ch));
            x = b.conv(p + ".conv1", x, ch, bottleneck, 1, 1, 1, 1, 0, 0);
            x = b.relu(p + ".relu2", b.bn(p + ".norm2", x, bottleneck));
            x = b.conv(p + ".conv2", x, bottleneck, growth, 3, 3, 1, 1, 1, 1);
            n = b.cat(p + ".cat", {n, x});
            ch += growth;
        }
        if (bi < 3) {
            const std::string p = "features.transition" + std::to_string(bi + 1);
            n = b.relu(p + ".relu", b.bn(p + ".norm", n, ch));
            n = b.conv(p + ".conv", n, ch, ch / 2, 1, 1, 1, 1, 0, 0);
            n = b.avgpool(p + ".pool", n, 2, 2, 0);
            ch /= 2;
        }
    }
    n = b.bn("features.norm5", n, ch);
    n = b.relu("features.relu5", n);
    return {n, ch};
}

// ---------------------------------------------------------------------------
// MobileNetV3 (large variant)
// ---------------------------------------------------------------------------
inline int make_divisible(int v, int divisor) {
    int out = std::max(divisor, (v + divisor / 2) / divisor * divisor);
    if (out * 10 < v * 9) out += divisor;
    return out;
}

inline BuiltFeatures build_mobilenet_v3(Network& net, Rng& rng) {
    B b{net, rng};
    struct Row {
        int k, exp, out;
        bool se, hs;
        int stride;
    };
    static const Row rows[] = {
        {3, 16, 16, false, false, 1},  {3, 64, 24, false, false, 2},
        {3, 72, 24, false, false, 1},  {5, 72, 40, true, false, 2},
        {5, 120, 40, true, false, 1},  {5, 120, 40, true, false, 1},
        {3, 240, 80, false, true, 2},  {3, 200, 80, false, true, 1},
        {3, 184, 80, false, true, 1},  {3, 184, 80, false, true, 1},
        {3, 480, 112, true, true, 1},  {3, 672, 112, true, true, 1},
        {5, 672, 160, true, true, 2},  {5, 960, 160, true, true, 1},
        {5, 960, 160, true, true, 1},
    };

    int n = b.hswish("stem.hs", b.conv_bn("stem", net.input(), 3, 16, 3, 3, 2, 2, 1, 1));
    int ch = 16;
    int idx = 0;
    for (const Row& row : rows) {
        const std::string p = "features." + std::to_string(idx++);
        const int in_node = n, in_ch = ch;
        const auto act = [&](const std::string& name, int node) {
            return row.hs ? b.hswish(name + ".hs", node) : b.relu(name + ".relu", node);
        };

        int x = n;
        if (row.exp != in_ch)
            x = act(p + ".expand", b.conv_bn(p + ".expand", x, in_ch, row.exp, 1, 1, 1, 1, 0, 0));
        const int pad = (row.k - 1) / 2;
        x = act(p + ".dw", b.conv_bn(p + ".dw", x, row.exp, row.exp, row.k, row.k,
                                     row.stride, row.stride, pad, pad, row.exp));
        if (row.se) {
            const int sq = make_divisible(row.exp / 4, 8);
            int g = net.add(p + ".se.gap", std::make_unique<nn::GlobalAvgPool>(), {x});
            auto fc1 = std::make_unique<nn::Linear>(row.exp, sq);
            nn::he_init(fc1->weight(), fc1->fan_in(), rng);
            g = net.add(p + ".se.fc1", std::move(fc1), {g});
            g = b.relu(p + ".se.relu", g);
            auto fc2 = std::make_unique<nn::Linear>(sq, row.exp);
            nn::he_init(fc2->weight(), fc2->fan_in(), rng);
            g = net.add(p + ".se.fc2", std::move(fc2), {g});
            g = net.add(p + ".se.gate", std::make_unique<nn::HardSigmoid>(), {g});
            x = net.add(p + ".se.scale", std::make_unique<nn::ChannelScale>(), {x, g});
        }
        x = b.conv_bn(p + ".project", x, row.exp, row.out, 1, 1, 1, 1, 0, 0);
        if (row.stride == 1 && in_ch == row.out) x = b.add(p + ".add", x, in_node);
        n = x;
        ch = row.out;
    }
    n = b.hswish("conv_last.hs", b.conv_bn("conv_last", n, ch, 960, 1, 1, 1, 1, 0, 0));
    return {n, 960};
}

// ---------------------------------------------------------------------------
// InceptionV3
// ---------------------------------------------------------------------------
inline BuiltFeatures build_inception_v3(Network& net, Rng& rng) {
    B b{net, rng, 1e-3f};

    const auto basic = [&](const std::string& p, int in, int in_c, int out_c, int kh,
                           int kw, int sh, int sw, int ph, int pw) {
        return b.conv_bn_relu(p, in, in_c, out_c, kh, kw, sh, sw, ph, pw);
    };

    int n = basic("Conv2d_1a_3x3", net.input(), 3, 32, 3, 3, 2, 2, 0, 0);
    n = basic("Conv2d_2a_3x3", n, 32, 32, 3, 3, 1, 1, 0, 0);
    n = basic("Conv2d_2b_3x3", n, 32, 64, 3, 3, 1, 1, 1, 1);
    n = b.maxpool("maxpool1", n, 3, 2, 0);
    n = basic("Conv2d_3b_1x1", n, 64, 80, 1, 1, 1, 1, 0, 0);
    n = basic("Conv2d_4a_3x3", n, 80, 192, 3, 3, 1, 1, 0, 0);
    n = b.maxpool("maxpool2", n, 3, 2, 0);
    int ch = 192;

    const auto block_a = [&](const std::string& p, int in, int in_c, int pool_f) {
        const int b1 = basic(p + ".branch1x1", in, in_c, 64, 1, 1, 1, 1, 0, 0);
        int b5 = basic(p + ".branch5x5_1", in, in_c, 48, 1, 1, 1, 1, 0, 0);
        b5 = basic(p + ".branch5x5_2", b5, 48, 64, 5, 5, 1, 1, 2, 2);
        int b3 = basic(p + ".branch3x3dbl_1", in, in_c, 64, 1, 1, 1, 1, 0, 0);
        b3 = basic(p + ".branch3x3dbl_2", b3, 64, 96, 3, 3, 1, 1, 1, 1);
        b3 = basic(p + ".branch3x3dbl_3", b3, 96, 96, 3, 3, 1, 1, 1, 1);
        int bp = b.avgpool(p + ".pool", in, 3, 1, 1);
        bp = basic(p + ".branch_pool", bp, in_c, pool_f, 1, 1, 1, 1, 0, 0);
        return std::pair<int, int>(b.cat(p + ".cat", {b1, b5, b3, bp}),
                                   64 + 64 + 96 + pool_f);
    };

    auto [a1, c1] = block_a("Mixed_5b", n, ch, 32);
    auto [a2, c2] = block_a("Mixed_5c", a1, c1, 64);
    auto [a3, c3] = block_a("Mixed_5d", a2, c2, 64);
    n = a3;
    ch = c3;  // 288

    {  // grid reduction to 17x17
        const std::string p = "Mixed_6a";
        const int b3 = basic(p + ".branch3x3", n, ch, 384, 3, 3, 2, 2, 0, 0);
        int dbl = basic(p + ".branch3x3dbl_1", n, ch, 64, 1, 1, 1, 1, 0, 0);
        dbl = basic(p + ".branch3x3dbl_2", dbl, 64, 96, 3, 3, 1, 1, 1, 1);
        dbl = basic(p + ".branch3x3dbl_3", dbl, 96, 96, 3, 3, 2, 2, 0, 0);
        const int mp = b.maxpool(p + ".pool", n, 3, 2, 0);
        n = b.cat(p + ".cat", {b3, dbl, mp});
        ch = 384 + 96 + ch;  // 768
    }

    const auto block_c = [&](const std::string& p, int in, int in_c, int c7) {
        const int b1 = basic(p + ".branch1x1", in, in_c, 192, 1, 1, 1, 1, 0, 0);
        int b7 = basic(p + ".branch7x7_1", in, in_c, c7, 1, 1, 1, 1, 0, 0);
        b7 = basic(p + ".branch7x7_2", b7, c7, c7, 1, 7, 1, 1, 0, 3);
        b7 = basic(p + ".branch7x7_3", b7, c7, 192, 7, 1, 1, 1, 3, 0);
        int d = basic(p + ".branch7x7dbl_1", in, in_c, c7, 1, 1, 1, 1, 0, 0);
        d = basic(p + ".branch7x7dbl_2", d, c7, c7, 7, 1, 1, 1, 3, 0);
        d = basic(p + ".branch7x7dbl_3", d, c7, c7, 1, 7, 1, 1, 0, 3);
        d = basic(p + ".branch7x7dbl_4", d, c7, c7, 7, 1, 1, 1, 3, 0);
        d = basic(p + ".branch7x7dbl_5", d, c7, 192, 1, 7, 1, 1, 0, 3);
        int bp = b.avgpool(p + ".pool", in, 3, 1, 1);
        bp = basic(p + ".branch_pool", bp, in_c, 192, 1, 1, 1, 1, 0, 0);
        return b.cat(p + ".cat", {b1, b7, d, bp});  // 768
    };

    n = block_c("Mixed_6b", n, ch, 128);
    n = block_c("Mixed_6c", n, 768, 160);
    n = block_c("Mixed_6d", n, 768, 160);
    n = block_c("Mixed_6e", n, 768, 192);
    ch = 768;

    {  // grid reduction to 8x8
        const std::string p = "Mixed_7a";
        int b3 = basic(p + ".branch3x3_1", n, ch, 192, 1, 1, 1, 1, 0, 0);
        b3 = basic(p + ".branch3x3_2", b3, 192, 320, 3, 3, 2, 2, 0, 0);
        int b7 = basic(p + ".branch7x7x3_1", n, ch, 192, 1, 1, 1, 1, 0, 0);
        b7 = basic(p + ".branch7x7x3_2", b7, 192, 192, 1, 7, 1, 1, 0, 3);
        b7 = basic(p + ".branch7x7x3_3", b7, 192, 192, 7, 1, 1, 1, 3, 0);
        b7 = basic(p + ".branch7x7x3_4", b7, 192, 192, 3, 3, 2, 2, 0, 0);
        const int mp = b.maxpool(p + ".pool", n, 3, 2, 0);
        n = b.cat(p + ".cat", {b3, b7, mp});
        ch = 320 + 192 + 768;  // 1280
    }

    const auto block_e = [&](const std::string& p, int in, int in_c) {
        const int b1 = basic(p + ".branch1x1", in, in_c, 320, 1, 1, 1, 1, 0, 0);
        const int b3s = basic(p + ".branch3x3_1", in, in_c, 384, 1, 1, 1, 1, 0, 0);
        const int b3a = basic(p + ".branch3x3_2a", b3s, 384, 384, 1, 3, 1, 1, 0, 1);
        const int b3b = basic(p + ".branch3x3_2b", b3s, 384, 384, 3, 1, 1, 1, 1, 0);
        const int b3 = b.cat(p + ".branch3x3.cat", {b3a, b3b});
        int d = basic(p + ".branch3x3dbl_1", in, in_c, 448, 1, 1, 1, 1, 0, 0);
        d = basic(p + ".branch3x3dbl_2", d, 448, 384, 3, 3, 1, 1, 1, 1);
        const int da = basic(p + ".branch3x3dbl_3a", d, 384, 384, 1, 3, 1, 1, 0, 1);
        const int db = basic(p + ".branch3x3dbl_3b", d, 384, 384, 3, 1, 1, 1, 1, 0);
        const int dd = b.cat(p + ".branch3x3dbl.cat", {da, db});
        int bp = b.avgpool(p + ".pool", in, 3, 1, 1);
        bp = basic(p + ".branch_pool", bp, in_c, 192, 1, 1, 1, 1, 0, 0);
        return b.cat(p + ".cat", {b1, b3, dd, bp});  // 320+768+768+192 = 2048
    };

    n = block_e("Mixed_7b", n, ch);
    n = block_e("Mixed_7c", n, 2048);
    return {n, 2048};
}

// ---------------------------------------------------------------------------
// Xception
// ---------------------------------------------------------------------------
inline BuiltFeatures build_xception(Network& net, Rng& rng) {
    B b{net, rng};

    // depthwise 3x3 + pointwise 1x1, one BN after the pair
    const auto sepconv = [&](const std::string& p, int in, int in_c, int out_c) {
        int x = b.conv(p + ".dw", in, in_c, in_c, 3, 3, 1, 1, 1, 1, in_c);
        x = b.conv(p + ".pw", x, in_c, out_c, 1, 1, 1, 1, 0, 0);
        return b.bn(p + ".bn", x, out_c);
    };

    int n = b.conv_bn_relu("conv1", net.input(), 3, 32, 3, 3, 2, 2, 0, 0);
    n = b.conv_bn_relu("conv2", n, 32, 64, 3, 3, 1, 1, 0, 0);

    // entry-flow downsampling blocks; the first has no leading relu
    const auto down_block = [&](const std::string& p, int in, int in_c, int out_c,
                                bool leading_relu) {
        const int skip = b.conv_bn(p + ".skip", in, in_c, out_c, 1, 1, 2, 2, 0, 0);
        int x = in;
        if (leading_relu) x = b.relu(p + ".relu1", x);
        x = sepconv(p + ".sepconv1", x, in_c, out_c);
        x = b.relu(p + ".relu2", x);
        x = sepconv(p + ".sepconv2", x, out_c, out_c);
        x = b.maxpool(p + ".pool", x, 3, 2, 1);
        return b.add(p + ".add", x, skip);
    };

    n = down_block("block2", n, 64, 128, false);
    n = down_block("block3", n, 128, 256, true);
    n = down_block("block4", n, 256, 728, true);

    for (int i = 5; i <= 12; ++i) {
        const std::string p = "block" + std::to_string(i);
        int x = n;
        for (int j = 1; j <= 3; ++j) {
            x = b.relu(p + ".relu" + std::to_string(j), x);
            x = sepconv(p + ".sepconv" + std::to_string(j), x, 728, 728);
        }
        n = b.add(p + ".add", x, n);
    }

    {  // exit-flow reduction
        const std::string p = "block13";
        const int skip = b.conv_bn(p + ".skip", n, 728, 1024, 1, 1, 2, 2, 0, 0);
        int x = b.relu(p + ".relu1", n);
        x = sepconv(p + ".sepconv1", x, 728, 728);
        x = b.relu(p + ".relu2", x);
        x = sepconv(p + ".sepconv2", x, 728, 1024);
        x = b.maxpool(p + ".pool", x, 3, 2, 1);
        n = b.add(p + ".add", x, skip);
    }

    n = sepconv("block14.sepconv1", n, 1024, 1536);
    n = b.relu("block14.sepconv1.act", n);
    n = sepconv("block14.sepconv2", n, 1536, 2048);
    n = b.relu("block14.sepconv2.act", n);
    return {n, 2048};
}

}  // namespace build_detail

// Assembles the named feature extractor into `net`, He-initialized from
// `rng`. Returns the default tap node and its channel count.
inline BuiltFeatures build_features(const std::string& name, nn::Network& net, Rng& rng) {
    using namespace build_detail;
    if (name == "ResNet50") return build_resnet(net, rng, {3, 4, 6, 3});
    if (name == "ResNet101") return build_resnet(net, rng, {3, 4, 23, 3});
    if (name == "ResNet152") return build_resnet(net, rng, {3, 8, 36, 3});
    if (name == "DenseNet121") return build_densenet(net, rng, {6, 12, 24, 16});
    if (name == "DenseNet169") return build_densenet(net, rng, {6, 12, 32, 32});
    if (name == "DenseNet201") return build_densenet(net, rng, {6, 12, 48, 32});
    if (name == "MobileNetV3") return build_mobilenet_v3(net, rng);
    if (name == "InceptionV3") return build_inception_v3(net, rng);
    if (name == "Xception") return build_xception(net, rng);
    backbone_info(name);  // throws with the list of valid names
    return {};
}

}  // namespace camscope::model
