#pragma once

// Run configuration: a single JSON file drives every subcommand. Parsing is
// strict: unknown keys are rejected by their dotted path so typos surface as
// configuration errors instead of silently falling back to defaults.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "camscope/core/error.hpp"
#include "camscope/data/dataset.hpp"
#include "camscope/data/preprocess.hpp"
#include "camscope/data/synthetic.hpp"
#include "camscope/model/backbone_spec.hpp"
#include "camscope/training/train.hpp"

namespace camscope::cli {

inline const std::vector<std::string>& cam_method_names() {
    static const std::vector<std::string> names = {"gradcam", "gradcampp", "layercam",
                                                   "scorecam"};
    return names;
}

struct DatasetConfig {
    std::string root;  // class-per-directory image tree; empty when synthetic
    std::optional<data::SyntheticSpec> synthetic;
    data::SplitFractions fractions;
    std::uint64_t split_seed = 0;

    void validate() const {
        if (root.empty() == !synthetic.has_value())
            throw ConfigError("dataset: exactly one of 'root' and 'synthetic' is required");
        if (synthetic) synthetic->validate();
        fractions.validate();
    }
};

struct ExplainConfig {
    std::vector<std::string> methods = cam_method_names();
    std::string tap_layer;             // empty: the model's own tap layer
    std::string target = "predicted";  // "predicted" or "true"
    int images_per_class = 3;
    double alpha = 0.5;
    int scorecam_batch = 32;

    void validate() const {
        if (methods.empty()) throw ConfigError("explain: methods must not be empty");
        const std::vector<std::string>& known = cam_method_names();
        for (std::size_t i = 0; i < methods.size(); ++i) {
            if (std::find(known.begin(), known.end(), methods[i]) == known.end())
                throw ConfigError("explain: unknown method '" + methods[i] +
                                  "' (valid: gradcam, gradcampp, layercam, scorecam)");
            if (std::find(methods.begin(), methods.begin() + i, methods[i]) !=
                methods.begin() + i)
                throw ConfigError("explain: duplicate method '" + methods[i] + "'");
        }
        if (target != "predicted" && target != "true")
            throw ConfigError("explain: target must be 'predicted' or 'true'");
        if (images_per_class < 1)
            throw ConfigError("explain: images_per_class must be at least 1");
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ConfigError("explain: alpha must be in [0, 1]");
        if (scorecam_batch < 1) throw ConfigError("explain: scorecam_batch must be at least 1");
    }
};

struct RunConfig {
    DatasetConfig dataset;
    data::PreprocessConfig preprocess;
    model::BackboneSpec model;
    std::string weights;  // explicit pretrained-features checkpoint, optional
    training::TrainConfig train;
    ExplainConfig explain;
    std::string out_dir = "runs";

    void validate() const {
        dataset.validate();
        preprocess.validate();
        if (model.name.empty()) throw ConfigError("model: name is required");
        train.validate();
        explain.validate();
        if (out_dir.empty()) throw ConfigError("report: out_dir must not be empty");
    }
};

namespace detail {

inline std::string join_key(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

inline void expect_object(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config: '" + path + "' must be an object");
}

inline void reject_unknown_keys(const nlohmann::json& j, const std::string& path,
                                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return it.key() == k; });
        if (!known) throw ConfigError("config: unknown key '" + join_key(path, it.key()) + "'");
    }
}

inline double as_number(const nlohmann::json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError("config: '" + path + "' must be a number");
    return v.get<double>();
}

inline int as_int(const nlohmann::json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError("config: '" + path + "' must be an integer");
    return static_cast<int>(v.get<long long>());
}

inline std::uint64_t as_u64(const nlohmann::json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0)
        return static_cast<std::uint64_t>(v.get<long long>());
    throw ConfigError("config: '" + path + "' must be a non-negative integer");
}

inline std::string as_string(const nlohmann::json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError("config: '" + path + "' must be a string");
    return v.get<std::string>();
}

inline bool as_bool(const nlohmann::json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError("config: '" + path + "' must be a boolean");
    return v.get<bool>();
}

inline void as_range(const nlohmann::json& v, const std::string& path, double& lo, double& hi) {
    if (!v.is_array() || v.size() != 2)
        throw ConfigError("config: '" + path + "' must be a [lo, hi] pair");
    lo = as_number(v[0], path + "[0]");
    hi = as_number(v[1], path + "[1]");
}

inline data::AugmentConfig parse_augment(const nlohmann::json& j, const std::string& path) {
    expect_object(j, path);
    reject_unknown_keys(j, path,
                        {"rotation_max_deg", "hflip_prob", "crop_fraction", "brightness_delta",
                         "contrast_factor", "seed"});
    data::AugmentConfig a;
    if (j.contains("rotation_max_deg"))
        a.rotation_max_deg = as_number(j["rotation_max_deg"], join_key(path, "rotation_max_deg"));
    if (j.contains("hflip_prob"))
        a.hflip_prob = as_number(j["hflip_prob"], join_key(path, "hflip_prob"));
    if (j.contains("crop_fraction"))
        as_range(j["crop_fraction"], join_key(path, "crop_fraction"), a.crop_fraction_lo,
                 a.crop_fraction_hi);
    if (j.contains("brightness_delta"))
        as_range(j["brightness_delta"], join_key(path, "brightness_delta"), a.brightness_delta_lo,
                 a.brightness_delta_hi);
    if (j.contains("contrast_factor"))
        as_range(j["contrast_factor"], join_key(path, "contrast_factor"), a.contrast_factor_lo,
                 a.contrast_factor_hi);
    if (j.contains("seed")) a.seed = as_u64(j["seed"], join_key(path, "seed"));
    return a;
}

inline data::PreprocessConfig parse_preprocess(const nlohmann::json& j, const std::string& path) {
    expect_object(j, path);
    reject_unknown_keys(j, path, {"target_side", "normalize", "augment"});
    data::PreprocessConfig pp;
    if (j.contains("target_side"))
        pp.target_side = as_int(j["target_side"], join_key(path, "target_side"));
    if (j.contains("normalize")) pp.normalize = as_bool(j["normalize"], join_key(path, "normalize"));
    if (j.contains("augment")) pp.augment = parse_augment(j["augment"], join_key(path, "augment"));
    return pp;
}

inline data::SyntheticSpec parse_synthetic(const nlohmann::json& j, const std::string& path) {
    expect_object(j, path);
    reject_unknown_keys(j, path, {"classes", "per_class", "side", "noise_sigma", "seed"});
    data::SyntheticSpec s;
    if (j.contains("classes")) s.classes = as_int(j["classes"], join_key(path, "classes"));
    if (j.contains("per_class")) s.per_class = as_int(j["per_class"], join_key(path, "per_class"));
    if (j.contains("side")) s.side = as_int(j["side"], join_key(path, "side"));
    if (j.contains("noise_sigma"))
        s.noise_sigma = as_number(j["noise_sigma"], join_key(path, "noise_sigma"));
    if (j.contains("seed")) s.seed = as_u64(j["seed"], join_key(path, "seed"));
    return s;
}

inline DatasetConfig parse_dataset(const nlohmann::json& j, const std::string& path) {
    expect_object(j, path);
    reject_unknown_keys(j, path, {"root", "synthetic", "fractions", "seed"});
    DatasetConfig d;
    if (j.contains("root")) d.root = as_string(j["root"], join_key(path, "root"));
    if (j.contains("synthetic"))
        d.synthetic = parse_synthetic(j["synthetic"], join_key(path, "synthetic"));
    if (j.contains("fractions")) {
        const nlohmann::json& f = j["fractions"];
        const std::string fp = join_key(path, "fractions");
        expect_object(f, fp);
        reject_unknown_keys(f, fp, {"train", "val", "test"});
        if (f.contains("train")) d.fractions.train = as_number(f["train"], join_key(fp, "train"));
        if (f.contains("val")) d.fractions.val = as_number(f["val"], join_key(fp, "val"));
        if (f.contains("test")) d.fractions.test = as_number(f["test"], join_key(fp, "test"));
    }
    if (j.contains("seed")) d.split_seed = as_u64(j["seed"], join_key(path, "seed"));
    return d;
}

inline void parse_model(const nlohmann::json& j, const std::string& path, RunConfig& cfg) {
    expect_object(j, path);
    reject_unknown_keys(j, path, {"name", "input_side", "tap_layer", "pretrained", "weights"});
    if (j.contains("name")) cfg.model.name = as_string(j["name"], join_key(path, "name"));
    if (j.contains("input_side"))
        cfg.model.input_side = as_int(j["input_side"], join_key(path, "input_side"));
    if (j.contains("tap_layer"))
        cfg.model.last_conv_layer = as_string(j["tap_layer"], join_key(path, "tap_layer"));
    if (j.contains("pretrained"))
        cfg.model.pretrained = as_bool(j["pretrained"], join_key(path, "pretrained"));
    if (j.contains("weights")) cfg.weights = as_string(j["weights"], join_key(path, "weights"));
}

inline training::TrainConfig parse_train(const nlohmann::json& j, const std::string& path) {
    expect_object(j, path);
    reject_unknown_keys(j, path,
                        {"learning_rate", "epochs", "batch_size", "optimizer", "loss", "seed"});
    training::TrainConfig t;
    if (j.contains("learning_rate"))
        t.learning_rate = as_number(j["learning_rate"], join_key(path, "learning_rate"));
    if (j.contains("epochs")) t.epochs = as_int(j["epochs"], join_key(path, "epochs"));
    if (j.contains("batch_size"))
        t.batch_size = as_int(j["batch_size"], join_key(path, "batch_size"));
    if (j.contains("optimizer")) t.optimizer = as_string(j["optimizer"], join_key(path, "optimizer"));
    if (j.contains("loss")) t.loss = as_string(j["loss"], join_key(path, "loss"));
    if (j.contains("seed")) t.seed = as_u64(j["seed"], join_key(path, "seed"));
    return t;
}

inline ExplainConfig parse_explain(const nlohmann::json& j, const std::string& path) {
    expect_object(j, path);
    reject_unknown_keys(j, path, {"methods", "tap_layer", "target", "images_per_class", "alpha",
                                  "scorecam_batch"});
    ExplainConfig e;
    if (j.contains("methods")) {
        const nlohmann::json& m = j["methods"];
        if (!m.is_array())
            throw ConfigError("config: '" + join_key(path, "methods") + "' must be an array");
        e.methods.clear();
        for (std::size_t i = 0; i < m.size(); ++i)
            e.methods.push_back(
                as_string(m[i], join_key(path, "methods") + "[" + std::to_string(i) + "]"));
    }
    if (j.contains("tap_layer")) e.tap_layer = as_string(j["tap_layer"], join_key(path, "tap_layer"));
    if (j.contains("target")) e.target = as_string(j["target"], join_key(path, "target"));
    if (j.contains("images_per_class"))
        e.images_per_class = as_int(j["images_per_class"], join_key(path, "images_per_class"));
    if (j.contains("alpha")) e.alpha = as_number(j["alpha"], join_key(path, "alpha"));
    if (j.contains("scorecam_batch"))
        e.scorecam_batch = as_int(j["scorecam_batch"], join_key(path, "scorecam_batch"));
    return e;
}

// 1-based line:column of a byte offset, for parse-error messages
inline std::string text_location(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
    detail::expect_object(j, "(root)");
    detail::reject_unknown_keys(j, "",
                                {"dataset", "preprocess", "model", "train", "explain", "report"});
    RunConfig cfg;
    if (j.contains("dataset")) cfg.dataset = detail::parse_dataset(j["dataset"], "dataset");
    if (j.contains("preprocess"))
        cfg.preprocess = detail::parse_preprocess(j["preprocess"], "preprocess");
    if (j.contains("model")) detail::parse_model(j["model"], "model", cfg);
    if (j.contains("train")) cfg.train = detail::parse_train(j["train"], "train");
    if (j.contains("explain")) cfg.explain = detail::parse_explain(j["explain"], "explain");
    if (j.contains("report")) {
        const nlohmann::json& r = j["report"];
        detail::expect_object(r, "report");
        detail::reject_unknown_keys(r, "report", {"out_dir"});
        if (r.contains("out_dir"))
            cfg.out_dir = detail::as_string(r["out_dir"], "report.out_dir");
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path + ":" + detail::text_location(text, e.byte) +
                          ": invalid JSON");
    }
    return parse_config(j);
}

// Canonical serialization with every effective value materialized; reruns of
// the same configuration produce byte-identical files.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    nlohmann::json ds;
    if (cfg.dataset.synthetic) {
        const data::SyntheticSpec& s = *cfg.dataset.synthetic;
        ds["synthetic"] = {{"classes", s.classes},
                           {"per_class", s.per_class},
                           {"side", s.side},
                           {"noise_sigma", s.noise_sigma},
                           {"seed", s.seed}};
    } else {
        ds["root"] = cfg.dataset.root;
    }
    ds["fractions"] = {{"train", cfg.dataset.fractions.train},
                       {"val", cfg.dataset.fractions.val},
                       {"test", cfg.dataset.fractions.test}};
    ds["seed"] = cfg.dataset.split_seed;
    j["dataset"] = ds;

    nlohmann::json pp;
    pp["target_side"] = cfg.preprocess.target_side;
    pp["normalize"] = cfg.preprocess.normalize;
    if (cfg.preprocess.augment) {
        const data::AugmentConfig& a = *cfg.preprocess.augment;
        pp["augment"] = {{"rotation_max_deg", a.rotation_max_deg},
                         {"hflip_prob", a.hflip_prob},
                         {"crop_fraction", {a.crop_fraction_lo, a.crop_fraction_hi}},
                         {"brightness_delta", {a.brightness_delta_lo, a.brightness_delta_hi}},
                         {"contrast_factor", {a.contrast_factor_lo, a.contrast_factor_hi}},
                         {"seed", a.seed}};
    }
    j["preprocess"] = pp;

    nlohmann::json md;
    md["name"] = cfg.model.name;
    if (cfg.model.input_side > 0) md["input_side"] = cfg.model.input_side;
    if (!cfg.model.last_conv_layer.empty()) md["tap_layer"] = cfg.model.last_conv_layer;
    md["pretrained"] = cfg.model.pretrained;
    if (!cfg.weights.empty()) md["weights"] = cfg.weights;
    j["model"] = md;

    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"optimizer", cfg.train.optimizer},
                  {"loss", cfg.train.loss},
                  {"seed", cfg.train.seed}};

    j["explain"] = {{"methods", cfg.explain.methods},
                    {"tap_layer", cfg.explain.tap_layer},
                    {"target", cfg.explain.target},
                    {"images_per_class", cfg.explain.images_per_class},
                    {"alpha", cfg.explain.alpha},
                    {"scorecam_batch", cfg.explain.scorecam_batch}};

    j["report"] = {{"out_dir", cfg.out_dir}};
    return j;
}

}  // namespace camscope::cli
