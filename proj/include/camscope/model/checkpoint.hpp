#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "camscope/core/error.hpp"
#include "camscope/model/classifier.hpp"

namespace camscope::model {

// Self-describing container: magic line, little-endian u64 header length,
// JSON header, then raw float32 blobs in header-entry order.
inline constexpr char kCheckpointMagic[] = "CAMSCOPE1\n";

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline nlohmann::json entry_list(ClassifierModel& model, bool features_only) {
    nlohmann::json entries = nlohmann::json::array();
    const auto push = [&](const std::string& name, const Tensor& t, const char* kind) {
        if (features_only && (name == "fc.weight" || name == "fc.bias")) return;
        entries.push_back({{"name", name}, {"kind", kind}, {"shape", t.shape()}});
    };
    for (auto& [name, p] : model.network().named_params()) push(name, p->value, "param");
    for (auto& [name, p] : model.network().named_state()) push(name, p->value, "state");
    return entries;
}

inline std::vector<Tensor*> tensor_list(ClassifierModel& model, bool features_only) {
    std::vector<Tensor*> out;
    for (auto& [name, p] : model.network().named_params()) {
        if (features_only && (name == "fc.weight" || name == "fc.bias")) continue;
        out.push_back(&p->value);
    }
    for (auto& [name, p] : model.network().named_state()) {
        if (features_only && (name == "fc.weight" || name == "fc.bias")) continue;
        out.push_back(&p->value);
    }
    return out;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, ClassifierModel& model,
                            bool features_only = false) {
    nlohmann::json header;
    header["format"] = "camscope-checkpoint";
    header["version"] = 1;
    header["architecture"] = model.spec().name;
    header["input_side"] = model.spec().input_side;
    header["tap_layer"] = model.spec().last_conv_layer;
    header["pretrained"] = model.spec().pretrained;
    header["n_classes"] = features_only ? 0 : model.n_classes();
    header["class_names"] =
        features_only ? std::vector<std::string>{} : model.class_names();
    header["preprocess"] = {{"target_side", model.preprocess().target_side},
                            {"normalize", model.preprocess().normalize}};
    header["entries"] = detail::entry_list(model, features_only);

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open checkpoint for writing: " + path);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    const std::string hs = header.dump();
    detail::write_u64(os, hs.size());
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (Tensor* t : detail::tensor_list(model, features_only))
        os.write(reinterpret_cast<const char*>(t->data()),
                 static_cast<std::streamsize>(t->numel() * sizeof(float)));
    if (!os) throw DataError("short write while saving checkpoint: " + path);
}

inline nlohmann::json read_checkpoint_header(std::istream& is, const std::string& path) {
    char magic[sizeof(kCheckpointMagic)] = {};
    is.read(magic, sizeof(kCheckpointMagic) - 1);
    if (!is || std::string(magic) != kCheckpointMagic)
        throw DataError("not a checkpoint file: " + path);
    const std::uint64_t len = detail::read_u64(is);
    if (!is || len > (1ull << 30)) throw DataError("corrupt checkpoint header: " + path);
    std::string hs(len, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(len));
    if (!is) throw DataError("truncated checkpoint header: " + path);
    nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "camscope-checkpoint")
        throw DataError("corrupt checkpoint header: " + path);
    return header;
}

// Reads blob data into an already-built model, matching entries by
// (name, shape). `expected` lists what the file must provide.
inline void read_checkpoint_blobs(std::istream& is, const std::string& path,
                                  const nlohmann::json& header, ClassifierModel& model,
                                  bool features_only) {
    const nlohmann::json& entries = header.at("entries");
    nlohmann::json expect = detail::entry_list(model, features_only);
    if (entries.size() != expect.size())
        throw DataError("checkpoint tensor count mismatch for " + path);
    std::vector<Tensor*> targets = detail::tensor_list(model, features_only);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto& got = entries[i];
        const auto& want = expect[i];
        if (got.at("name") != want.at("name") || got.at("shape") != want.at("shape"))
            throw DataError("checkpoint tensor mismatch at '" +
                            got.at("name").get<std::string>() + "' in " + path);
        is.read(reinterpret_cast<char*>(targets[i]->data()),
                static_cast<std::streamsize>(targets[i]->numel() * sizeof(float)));
        if (!is) throw DataError("truncated checkpoint blobs: " + path);
    }
}

// Rebuilds the full model recorded in a training checkpoint.
inline ClassifierModel load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);
    const nlohmann::json header = read_checkpoint_header(is, path);

    const int n_classes = header.at("n_classes").get<int>();
    if (n_classes < 2)
        throw DataError("checkpoint is features-only, not a trained model: " + path);
    BackboneSpec spec;
    spec.name = header.at("architecture").get<std::string>();
    spec.input_side = header.at("input_side").get<int>();
    spec.last_conv_layer = header.at("tap_layer").get<std::string>();
    spec.pretrained = header.value("pretrained", false);

    ClassifierModel model(spec, n_classes, 0);
    model.set_class_names(header.at("class_names").get<std::vector<std::string>>());
    data::PreprocessConfig pp;
    pp.target_side = header.at("preprocess").at("target_side").get<int>();
    pp.normalize = header.at("preprocess").at("normalize").get<bool>();
    model.set_preprocess(pp);
    read_checkpoint_blobs(is, path, header, model, false);
    return model;
}

// Overwrites a model's feature-extractor weights from a features-only file
// produced by save_checkpoint(..., features_only=true).
inline void load_pretrained_features(const std::string& path, ClassifierModel& model) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("pretrained weights not found: " + path);
    const nlohmann::json header = read_checkpoint_header(is, path);
    if (header.at("architecture").get<std::string>() != model.spec().name)
        throw DataError("pretrained weights are for architecture " +
                        header.at("architecture").get<std::string>() + ", wanted " +
                        model.spec().name);
    read_checkpoint_blobs(is, path, header, model, true);
}

// Resolution order for pretrained feature weights: explicit path, then
// $CAMSCOPE_PRETRAINED_DIR/<architecture>.ckpt.
inline std::string pretrained_path_for(const std::string& architecture,
                                       const std::string& explicit_path) {
    if (!explicit_path.empty()) return explicit_path;
    if (const char* dir = std::getenv("CAMSCOPE_PRETRAINED_DIR"))
        return (std::filesystem::path(dir) / (architecture + ".ckpt")).string();
    throw DataError("pretrained weights requested for " + architecture +
                    " but no weights path is configured (set model.weights or "
                    "CAMSCOPE_PRETRAINED_DIR, or set pretrained=false)");
}

}  // namespace camscope::model
