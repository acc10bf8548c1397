#pragma once

// Subcommand implementations. Each cmd_* owns the exit-code boundary: it
// catches, logs, and maps exceptions, so callers (main or tests) only see
// the contract: 0 success, 2 usage/config, 3 training failure, 4 data or
// artifact mismatch.

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "camscope/cam/cam.hpp"
#include "camscope/cli/config.hpp"
#include "camscope/core/error.hpp"
#include "camscope/core/log.hpp"
#include "camscope/core/rng.hpp"
#include "camscope/data/synthetic.hpp"
#include "camscope/io/imageio.hpp"
#include "camscope/metrics/metrics.hpp"
#include "camscope/model/checkpoint.hpp"
#include "camscope/reporting/report.hpp"
#include "camscope/training/train.hpp"

namespace camscope::cli {

namespace detail {

namespace fs = std::filesystem;

template <typename Fn>
inline int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        log_error(e.what());
        return exit_code_for(e);
    }
}

inline void note_device() {
    const char* dev = std::getenv("CAMSCOPE_DEVICE");
    if (dev != nullptr && std::string(dev) != "cpu")
        log_warn("device '" + std::string(dev) + "' is unavailable in this build, using cpu");
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

inline nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error&) {
        throw DataError("invalid json in " + path.string());
    }
}

// dataset materialized per the config: either a directory scan backed by
// lazy file loads, or an in-memory synthetic set (with localization boxes)
struct BuiltDataset {
    data::ClassRegistry registry;
    std::vector<data::DatasetItem> items;
    std::unique_ptr<training::ItemSource> source;
    std::vector<std::array<int, 4>> bboxes;  // synthetic only, aligned with items
};

inline BuiltDataset build_dataset(const DatasetConfig& dc) {
    BuiltDataset b;
    if (dc.synthetic) {
        data::SyntheticDataset sd = data::generate_synthetic(*dc.synthetic);
        b.registry = sd.registry;
        auto src = std::make_unique<training::MemoryItemSource>(sd.images);
        for (std::size_t i = 0; i < src->size(); ++i) b.items.push_back(src->item(i));
        b.source = std::move(src);
        b.bboxes = std::move(sd.bboxes);
    } else {
        data::ScanResult scan = data::scan_directory(dc.root);
        b.registry = std::move(scan.registry);
        b.items = scan.items;
        b.source = std::make_unique<training::FileItemSource>(std::move(scan.items));
    }
    return b;
}

inline std::string default_run_id(const RunConfig& cfg) {
    return cfg.model.name + "-seed" + std::to_string(cfg.train.seed);
}

inline data::DatasetSplit load_split(const fs::path& run, const BuiltDataset& ds) {
    const fs::path path = run / "split.json";
    if (!fs::exists(path))
        throw DataError("malformed run directory: " + run.string() + " (missing split.json)");
    return data::split_from_json(read_json(path), ds.registry, ds.items);
}

inline RunConfig load_run_config(const fs::path& run) {
    const fs::path path = run / "config.json";
    if (!fs::exists(path))
        throw DataError("malformed run directory: " + run.string() + " (missing config.json)");
    return load_config(path.string());
}

inline void require_run_dir(const fs::path& run) {
    if (!fs::is_directory(run))
        throw DataError("malformed run directory: " + run.string() + " (not a directory)");
}

inline Tensor single_image_batch(const Image& img) {
    const Tensor chw = to_chw(img);
    Tensor batch({1, chw.dim(0), chw.dim(1), chw.dim(2)});
    std::memcpy(batch.data(), chw.data(), chw.numel() * sizeof(float));
    return batch;
}

// "circle/circle_0007.png" -> "circle_circle_0007", safe as a directory name
inline std::string sanitize_image_id(const std::string& source_id) {
    std::string id = fs::path(source_id).stem().string();
    std::string prefix = fs::path(source_id).parent_path().string();
    if (!prefix.empty()) id = prefix + "_" + id;
    std::replace(id.begin(), id.end(), '/', '_');
    std::replace(id.begin(), id.end(), '\\', '_');
    return id;
}

inline Image heatmap_to_gray(const cam::Heatmap& hm) {
    const int h = hm.values.dim(0), w = hm.values.dim(1);
    Image img(h, w, 1);
    std::memcpy(img.px.data(), hm.values.data(), img.px.size() * sizeof(float));
    return img;
}

}  // namespace detail

struct TrainOptions {
    std::string config_path;
    std::string out_dir;                 // run directory override
    std::optional<std::uint64_t> seed;   // overrides both train and split seeds
};

inline int cmd_train(const TrainOptions& opt) {
    return detail::guarded([&]() -> int {
        namespace fs = std::filesystem;
        if (opt.config_path.empty()) throw ConfigError("train: --config is required");
        RunConfig cfg = load_config(opt.config_path);
        if (opt.seed) {
            cfg.train.seed = *opt.seed;
            cfg.dataset.split_seed = *opt.seed;
        }
        if (!cfg.dataset.root.empty() && !fs::is_directory(cfg.dataset.root))
            throw ConfigError("dataset: root directory not found: " + cfg.dataset.root);
        detail::note_device();

        const fs::path run = opt.out_dir.empty()
                                 ? fs::path(cfg.out_dir) / detail::default_run_id(cfg)
                                 : fs::path(opt.out_dir);
        fs::create_directories(run);
        detail::write_text(run / "config.json", config_to_json(cfg).dump(2) + "\n");

        detail::BuiltDataset ds = detail::build_dataset(cfg.dataset);
        const data::DatasetSplit split = data::stratified_split(ds.items, ds.registry,
                                                                cfg.dataset.fractions,
                                                                cfg.dataset.split_seed);
        detail::write_text(run / "split.json",
                           data::split_to_json(split, ds.registry, ds.items).dump(2) + "\n");

        model::ClassifierModel m(cfg.model, ds.registry.size(), cfg.train.seed);
        m.set_class_names(ds.registry.names());
        m.set_preprocess(cfg.preprocess);
        if (cfg.model.pretrained)
            model::load_pretrained_features(
                model::pretrained_path_for(cfg.model.name, cfg.weights), m);

        const training::TrainLog log = training::train(m, *ds.source, split, cfg.preprocess,
                                                       cfg.train);
        training::write_trainlog((run / "trainlog.jsonl").string(), log);
        model::save_checkpoint((run / "checkpoint.ckpt").string(), m);
        log_info("run complete: " + run.string());
        return 0;
    });
}

struct EvaluateOptions {
    std::string run_dir;
    std::string checkpoint;   // default <run>/checkpoint.ckpt
    std::string config_path;  // default <run>/config.json
};

inline int cmd_evaluate(const EvaluateOptions& opt) {
    return detail::guarded([&]() -> int {
        namespace fs = std::filesystem;
        if (opt.run_dir.empty()) throw ConfigError("evaluate: --run is required");
        const fs::path run(opt.run_dir);
        detail::require_run_dir(run);
        const RunConfig cfg = opt.config_path.empty() ? detail::load_run_config(run)
                                                      : load_config(opt.config_path);
        detail::note_device();

        detail::BuiltDataset ds = detail::build_dataset(cfg.dataset);
        const std::string ckpt = opt.checkpoint.empty() ? (run / "checkpoint.ckpt").string()
                                                        : opt.checkpoint;
        model::ClassifierModel m = model::load_checkpoint(ckpt);
        training::check_registry(m, ds.registry);
        const data::DatasetSplit split = detail::load_split(run, ds);

        const training::EvalResult ev = training::evaluate(m, *ds.source, split.test,
                                                           m.preprocess(), cfg.train.batch_size);
        std::vector<int> truth;
        truth.reserve(split.test.size());
        for (int id : split.test) truth.push_back(ds.source->item(id).label);
        const metrics::ConfusionMatrix cm =
            metrics::ConfusionMatrix::from_predictions(ds.registry.size(), truth, ev.predictions);
        const metrics::MetricsReport rep = metrics::compute_metrics(cm, ds.registry.names());

        detail::write_text(run / "metrics.json", metrics::metrics_to_json(rep).dump(2) + "\n");
        detail::write_text(run / "confusion.csv", cm.to_csv(ds.registry.names()));
        io::save_image((run / "confusion.png").string(),
                       reporting::confusion_image(cm, ds.registry.names()));

        std::printf("accuracy=%s precision=%s recall=%s f1=%s jaccard=%s\n",
                    reporting::format4(rep.accuracy).c_str(),
                    reporting::format4(rep.avg_precision).c_str(),
                    reporting::format4(rep.avg_recall).c_str(),
                    reporting::format4(rep.avg_f1).c_str(),
                    reporting::format4(rep.avg_jaccard).c_str());
        return 0;
    });
}

struct ExplainOptions {
    std::string run_dir;
    std::string image;                 // explain one external image instead of the test split
    std::vector<std::string> methods;  // override the configured list
};

inline int cmd_explain(const ExplainOptions& opt) {
    return detail::guarded([&]() -> int {
        namespace fs = std::filesystem;
        if (opt.run_dir.empty()) throw ConfigError("explain: --run is required");
        const fs::path run(opt.run_dir);
        detail::require_run_dir(run);
        RunConfig cfg = detail::load_run_config(run);
        if (!opt.methods.empty()) cfg.explain.methods = opt.methods;
        cfg.explain.validate();
        detail::note_device();

        model::ClassifierModel m = model::load_checkpoint((run / "checkpoint.ckpt").string());
        const std::string tap = cfg.explain.tap_layer.empty() ? m.spec().last_conv_layer
                                                              : cfg.explain.tap_layer;
        const int side = m.spec().input_side;

        struct Selected {
            Image raw;
            std::string image_id;
            std::optional<int> true_label;
        };
        std::vector<Selected> picks;
        if (!opt.image.empty()) {
            picks.push_back({io::load_image(opt.image),
                             detail::sanitize_image_id(fs::path(opt.image).filename().string()),
                             std::nullopt});
        } else {
            detail::BuiltDataset ds = detail::build_dataset(cfg.dataset);
            const data::DatasetSplit split = detail::load_split(run, ds);
            Rng rng(Rng::derive(cfg.dataset.split_seed, "explain"));
            for (int c = 0; c < ds.registry.size(); ++c) {
                std::vector<int> pool;
                for (int id : split.test)
                    if (ds.source->item(id).label == c) pool.push_back(id);
                rng.shuffle(pool);
                const int take = std::min<int>(cfg.explain.images_per_class,
                                               static_cast<int>(pool.size()));
                for (int k = 0; k < take; ++k) {
                    const int id = pool[k];
                    picks.push_back({ds.source->image(id),
                                     detail::sanitize_image_id(ds.source->item(id).source_id),
                                     ds.source->item(id).label});
                }
            }
        }

        const bool want_true_target = cfg.explain.target == "true";
        for (const Selected& sel : picks) {
            const Image prepared =
                training::detail::prepare(sel.raw, m.preprocess(), side, nullptr);
            const Tensor input = detail::single_image_batch(prepared);
            std::optional<int> target;
            if (want_true_target) {
                if (sel.true_label)
                    target = *sel.true_label;
                else
                    log_warn("explain: no true label for " + sel.image_id +
                             ", falling back to the predicted class");
            }

            const model::TapResult tr = m.capture(input, tap, target);
            const fs::path dir = run / "explanations" / sel.image_id;
            fs::create_directories(dir);

            std::map<std::string, cam::Heatmap> maps;
            for (const std::string& method : cfg.explain.methods) {
                cam::Heatmap raw;
                if (method == "gradcam")
                    raw = cam::grad_cam(tr);
                else if (method == "gradcampp")
                    raw = cam::grad_cam_pp(tr);
                else if (method == "layercam")
                    raw = cam::layer_cam(tr);
                else
                    raw = cam::score_cam(m, input, tap, target, cfg.explain.scorecam_batch);
                cam::Heatmap post = cam::postprocess(raw, side);

                io::save_image((dir / (method + "_heatmap.png")).string(),
                               detail::heatmap_to_gray(post));
                io::save_image((dir / (method + ".png")).string(),
                               cam::overlay(prepared, post, cfg.explain.alpha));
                nlohmann::json side_car = {{"method", method},
                                           {"tap_layer", post.tap_layer},
                                           {"target_class", post.target_class},
                                           {"target_policy", cfg.explain.target},
                                           {"alpha", cfg.explain.alpha},
                                           {"normalization", "minmax"}};
                detail::write_text(dir / (method + ".json"), side_car.dump(2) + "\n");
                maps.emplace(method, std::move(post));
            }

            if (maps.size() == cam_method_names().size()) {
                io::save_image((run / ("panel_" + sel.image_id + ".png")).string(),
                               reporting::explanation_panel(prepared, maps, cfg.explain.alpha));
            } else {
                log_info("panel skipped for " + sel.image_id + ": requires all four methods");
            }
        }
        log_info("explained " + std::to_string(picks.size()) + " image(s)");
        return 0;
    });
}

struct CompareOptions {
    std::vector<std::string> run_dirs;
    std::string out_dir;  // default: current directory
};

inline int cmd_compare(const CompareOptions& opt) {
    return detail::guarded([&]() -> int {
        namespace fs = std::filesystem;
        if (opt.run_dirs.empty())
            throw ConfigError("compare: at least one run directory is required");

        std::vector<reporting::RunArtifact> arts;
        for (const std::string& rd : opt.run_dirs) {
            const fs::path run(rd);
            detail::require_run_dir(run);
            if (!fs::exists(run / "metrics.json"))
                throw DataError("malformed run directory: " + rd + " (missing metrics.json)");
            reporting::RunArtifact a;
            try {
                a.model_name = detail::load_run_config(run).model.name;
            } catch (const ConfigError&) {
                throw DataError("malformed run directory: " + rd + " (invalid config.json)");
            }
            a.checkpoint_path = (run / "checkpoint.ckpt").string();
            a.metrics = metrics::metrics_from_json(detail::read_json(run / "metrics.json"));
            if (fs::exists(run / "trainlog.jsonl"))
                a.trainlog = training::read_trainlog((run / "trainlog.jsonl").string());
            arts.push_back(std::move(a));
        }

        const fs::path out = opt.out_dir.empty() ? fs::path(".") : fs::path(opt.out_dir);
        fs::create_directories(out);
        const reporting::TableDocument table = reporting::comparison_table(arts);
        detail::write_text(out / "comparison.csv", table.csv);
        detail::write_text(out / "comparison.txt", table.text);
        if (arts.size() >= 2)
            io::save_image((out / "chart.png").string(), reporting::performance_chart(arts));
        else
            log_info("chart skipped: needs at least two runs");
        std::fputs(table.text.c_str(), stdout);
        return 0;
    });
}

struct SynthOptions {
    std::string config_path;
    std::string out_dir;
};

inline int cmd_synth(const SynthOptions& opt) {
    return detail::guarded([&]() -> int {
        namespace fs = std::filesystem;
        if (opt.config_path.empty()) throw ConfigError("synth: --config is required");
        if (opt.out_dir.empty()) throw ConfigError("synth: --out is required");
        const RunConfig cfg = load_config(opt.config_path);
        if (!cfg.dataset.synthetic)
            throw ConfigError("synth: config must define dataset.synthetic");

        const data::SyntheticDataset sd = data::generate_synthetic(*cfg.dataset.synthetic);
        const fs::path out(opt.out_dir);
        for (const LabeledImage& li : sd.images) {
            const fs::path dst = out / li.source_id;
            fs::create_directories(dst.parent_path());
            Image img = li.image;  // rendered as [0, 255]; save_image expects [0, 1]
            for (float& v : img.px) v /= 255.0f;
            io::save_image(dst.string(), img);
        }
        log_info("wrote " + std::to_string(sd.images.size()) + " images to " + out.string());
        return 0;
    });
}

}  // namespace camscope::cli
