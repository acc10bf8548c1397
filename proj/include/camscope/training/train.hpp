#pragma once
// Fine-tuning loop: shuffled mini-batch optimization with per-epoch
// validation and best-epoch weight selection.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "camscope/core/error.hpp"
#include "camscope/core/image.hpp"
#include "camscope/core/log.hpp"
#include "camscope/core/rng.hpp"
#include "camscope/data/dataset.hpp"
#include "camscope/data/preprocess.hpp"
#include "camscope/io/imageio.hpp"
#include "camscope/model/classifier.hpp"
#include "camscope/nn/adam.hpp"
#include "camscope/nn/loss.hpp"

namespace camscope::training {

using camscope::Image;
using camscope::Rng;
using camscope::Tensor;
using model::ClassifierModel;

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs = 10;
    std::string optimizer = "adam";
    int batch_size = 32;
    std::uint64_t seed = 0;
    std::string loss = "cross_entropy";

    void validate() const {
        // zero is allowed so a no-op run stays expressible; negative is not
        if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (optimizer != "adam")
            throw ConfigError("unsupported optimizer '" + optimizer + "' (expected adam)");
        if (loss != "cross_entropy")
            throw ConfigError("unsupported loss '" + loss + "' (expected cross_entropy)");
    }
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0, train_acc = 0.0;
    double val_loss = 0.0, val_acc = 0.0;
    double wall_time_s = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> records;
    int best_epoch = 0;  // 1-based; argmax val accuracy, earliest on ties
};

// Uniform access to dataset items whether they live on disk or in memory.
// image() returns raw pixels in [0, 255].
class ItemSource {
public:
    virtual ~ItemSource() = default;
    virtual std::size_t size() const = 0;
    virtual const data::DatasetItem& item(std::size_t i) const = 0;
    virtual Image image(std::size_t i) const = 0;
};

class FileItemSource final : public ItemSource {
public:
    explicit FileItemSource(std::vector<data::DatasetItem> items) : items_(std::move(items)) {}
    std::size_t size() const override { return items_.size(); }
    const data::DatasetItem& item(std::size_t i) const override { return items_.at(i); }
    Image image(std::size_t i) const override { return io::load_image(items_.at(i).path); }

private:
    std::vector<data::DatasetItem> items_;
};

// In-memory labeled images, already in the raw [0, 255] range.
class MemoryItemSource final : public ItemSource {
public:
    explicit MemoryItemSource(const std::vector<LabeledImage>& images) {
        items_.reserve(images.size());
        images_.reserve(images.size());
        for (const LabeledImage& li : images) {
            data::DatasetItem it;
            it.path = li.source_id;
            it.source_id = li.source_id;
            it.label = li.label;
            items_.push_back(std::move(it));
            images_.push_back(li.image);
        }
    }
    std::size_t size() const override { return items_.size(); }
    const data::DatasetItem& item(std::size_t i) const override { return items_.at(i); }
    Image image(std::size_t i) const override { return images_.at(i); }

private:
    std::vector<data::DatasetItem> items_;
    std::vector<Image> images_;
};

namespace detail {

// raw -> model-ready image: canonical preprocessing, optional augmentation,
// then the model's own input resolution
inline Image prepare(const Image& raw, const data::PreprocessConfig& pp, int model_side,
                     Rng* aug_rng) {
    Image img = data::preprocess_eval(raw, pp);
    if (aug_rng != nullptr && pp.augment) img = data::augment(img, *pp.augment, *aug_rng);
    if (img.h != model_side || img.w != model_side) img = data::resize_square(img, model_side);
    return img;
}

inline Tensor make_batch(const ItemSource& source, const std::vector<int>& ids, std::size_t lo,
                         std::size_t hi, const data::PreprocessConfig& pp, int side,
                         std::uint64_t aug_stream, bool augmented, std::vector<int>& labels_out) {
    const int b = static_cast<int>(hi - lo);
    Tensor batch({b, 3, side, side});
    const std::size_t plane = static_cast<std::size_t>(3) * side * side;
    labels_out.clear();
    labels_out.reserve(b);
    for (std::size_t k = lo; k < hi; ++k) {
        const int id = ids[k];
        std::optional<Rng> rng;
        if (augmented && pp.augment)
            rng.emplace(Rng::derive(aug_stream, static_cast<std::uint64_t>(id)));
        const Image img =
            prepare(source.image(static_cast<std::size_t>(id)), pp, side, rng ? &*rng : nullptr);
        const Tensor chw = to_chw(img);
        std::memcpy(batch.data() + (k - lo) * plane, chw.data(), plane * sizeof(float));
        labels_out.push_back(source.item(static_cast<std::size_t>(id)).label);
    }
    return batch;
}

inline void check_labels(const ItemSource& source, const std::vector<int>& ids, int n_classes) {
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= source.size())
            throw DataError("split index out of range: " + std::to_string(id));
        const int label = source.item(static_cast<std::size_t>(id)).label;
        if (label < 0 || label >= n_classes)
            throw DataError("item label " + std::to_string(label) + " outside the model's " +
                            std::to_string(n_classes) + " classes: " +
                            source.item(static_cast<std::size_t>(id)).source_id);
    }
}

}  // namespace detail

struct EvalResult {
    std::vector<int> predictions;          // aligned with the input index list
    std::vector<std::vector<float>> logits;
    double mean_loss = 0.0;
    double accuracy = 0.0;
};

// Deterministic inference over the given items: no augmentation, argmax
// prediction with lowest-index tie-break.
inline EvalResult evaluate(ClassifierModel& model, const ItemSource& source,
                           const std::vector<int>& indices, const data::PreprocessConfig& pp,
                           int batch_size = 32) {
    if (indices.empty()) throw DataError("cannot evaluate an empty item list");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    detail::check_labels(source, indices, model.n_classes());

    const int side = model.spec().input_side;
    EvalResult out;
    out.predictions.reserve(indices.size());
    out.logits.reserve(indices.size());
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t lo = 0; lo < indices.size(); lo += static_cast<std::size_t>(batch_size)) {
        const std::size_t hi = std::min(indices.size(), lo + static_cast<std::size_t>(batch_size));
        std::vector<int> labels;
        const Tensor batch =
            detail::make_batch(source, indices, lo, hi, pp, side, 0, false, labels);
        const Tensor& logits = model.forward(batch, false);
        const auto ce = nn::cross_entropy(logits, labels);
        loss_sum += ce.loss * static_cast<double>(hi - lo);
        const int k = model.n_classes();
        for (int r = 0; r < static_cast<int>(hi - lo); ++r) {
            const int pred = nn::argmax_row(logits, r);
            out.predictions.push_back(pred);
            const float* row = logits.data() + static_cast<std::size_t>(r) * k;
            out.logits.emplace_back(row, row + k);
            if (pred == labels[r]) ++correct;
        }
    }
    out.mean_loss = loss_sum / static_cast<double>(indices.size());
    out.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
    return out;
}

// Checkpoint class names must match the dataset registry exactly.
inline void check_registry(const ClassifierModel& model, const data::ClassRegistry& registry) {
    if (model.class_names() != registry.names())
        throw DataError("model classes do not match the dataset registry");
}

// Runs cfg.epochs of shuffled mini-batch optimization on the train split
// (augmenting when pp.augment is set), evaluates the val split after each
// epoch, and leaves the model holding the weights of the best epoch
// (highest val accuracy, earliest on ties). Fully seeded: batch order and
// per-image augmentation draws derive from cfg.seed alone.
inline TrainLog train(ClassifierModel& model, const ItemSource& source,
                      const data::DatasetSplit& split, const data::PreprocessConfig& pp,
                      const TrainConfig& cfg) {
    cfg.validate();
    pp.validate();
    if (split.train.empty()) throw DataError("train split is empty");
    if (split.val.empty()) throw DataError("val split is empty");
    detail::check_labels(source, split.train, model.n_classes());
    detail::check_labels(source, split.val, model.n_classes());

    const int side = model.spec().input_side;
    nn::Adam opt(model.network().params(), static_cast<float>(cfg.learning_rate));
    Rng order_rng(Rng::derive(cfg.seed, "order"));
    const std::uint64_t aug_root = Rng::derive(cfg.seed, "aug");

    TrainLog log;
    double best_acc = -1.0;
    std::vector<Tensor> best_params, best_state;
    const auto snapshot = [&]() {
        best_params.clear();
        best_state.clear();
        for (auto& [name, p] : model.network().named_params()) best_params.push_back(p->value);
        for (auto& [name, p] : model.network().named_state()) best_state.push_back(p->value);
    };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<int> order = split.train;
        order_rng.shuffle(order);
        const std::uint64_t aug_stream =
            Rng::derive(aug_root, static_cast<std::uint64_t>(epoch));

        double loss_sum = 0.0;
        std::size_t correct = 0, seen = 0;
        int batch_no = 0;
        for (std::size_t lo = 0; lo < order.size();
             lo += static_cast<std::size_t>(cfg.batch_size), ++batch_no) {
            const std::size_t hi =
                std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
            std::vector<int> labels;
            const Tensor batch =
                detail::make_batch(source, order, lo, hi, pp, side, aug_stream, true, labels);
            const Tensor& logits = model.forward(batch, true);
            const auto ce = nn::cross_entropy(logits, labels);
            if (!std::isfinite(ce.loss))
                throw TrainError("non-finite training loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_no));
            model.network().zero_grads();
            model.network().backward(ce.grad);
            opt.step();

            loss_sum += ce.loss * static_cast<double>(hi - lo);
            seen += hi - lo;
            for (int r = 0; r < static_cast<int>(hi - lo); ++r)
                if (nn::argmax_row(logits, r) == labels[r]) ++correct;
        }

        const EvalResult val = evaluate(model, source, split.val, pp, cfg.batch_size);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
        rec.val_loss = val.mean_loss;
        rec.val_acc = val.accuracy;
        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.records.push_back(rec);
        log_info("epoch " + std::to_string(epoch) + "/" + std::to_string(cfg.epochs) +
                 " train_loss=" + std::to_string(rec.train_loss) +
                 " train_acc=" + std::to_string(rec.train_acc) +
                 " val_acc=" + std::to_string(rec.val_acc));

        if (val.accuracy > best_acc) {
            best_acc = val.accuracy;
            log.best_epoch = epoch;
            snapshot();
        }
    }

    // leave the model at its best epoch
    std::size_t pi = 0, si = 0;
    for (auto& [name, p] : model.network().named_params()) p->value = best_params[pi++];
    for (auto& [name, p] : model.network().named_state()) p->value = best_state[si++];
    return log;
}

inline nlohmann::json epoch_to_json(const EpochRecord& r) {
    return nlohmann::json{{"epoch", r.epoch},         {"train_loss", r.train_loss},
                          {"train_acc", r.train_acc}, {"val_loss", r.val_loss},
                          {"val_acc", r.val_acc},     {"wall_time_s", r.wall_time_s}};
}

// JSON lines: one record per epoch, then a summary line with best_epoch.
inline void write_trainlog(const std::string& path, const TrainLog& log) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write train log: " + path);
    for (const EpochRecord& r : log.records) out << epoch_to_json(r).dump() << "\n";
    out << nlohmann::json{{"best_epoch", log.best_epoch}}.dump() << "\n";
}

inline TrainLog read_trainlog(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read train log: " + path);
    TrainLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("malformed train log line in " + path + ": " + e.what());
        }
        if (j.contains("best_epoch") && !j.contains("epoch")) {
            log.best_epoch = j.at("best_epoch").get<int>();
            continue;
        }
        EpochRecord r;
        r.epoch = j.at("epoch").get<int>();
        r.train_loss = j.at("train_loss").get<double>();
        r.train_acc = j.at("train_acc").get<double>();
        r.val_loss = j.at("val_loss").get<double>();
        r.val_acc = j.at("val_acc").get<double>();
        r.wall_time_s = j.at("wall_time_s").get<double>();
        log.records.push_back(r);
    }
    return log;
}

}  // namespace camscope::training
