#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "camscope/core/error.hpp"
#include "camscope/core/log.hpp"
#include "camscope/core/rng.hpp"

namespace camscope::data {

// Maps class names to 0-based indices. Order is whatever the constructor
// received; scan_directory sorts names first, the synthetic generator keeps
// its primitive order.
class ClassRegistry {
public:
    ClassRegistry() = default;

    explicit ClassRegistry(std::vector<std::string> names) : names_(std::move(names)) {
        for (std::size_t i = 0; i < names_.size(); ++i)
            for (std::size_t j = i + 1; j < names_.size(); ++j)
                if (names_[i] == names_[j])
                    throw DataError("duplicate class name: " + names_[i]);
    }

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int idx) const { return names_.at(idx); }
    const std::vector<std::string>& names() const { return names_; }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return static_cast<int>(i);
        throw DataError("unknown class name: " + name);
    }

private:
    std::vector<std::string> names_;
};

// One dataset entry before pixels are loaded.
struct DatasetItem {
    std::string path;       // filesystem path, empty for in-memory items
    std::string source_id;  // "<class>/<filename>", stable identifier
    int label = -1;
};

struct ScanResult {
    ClassRegistry registry;
    std::vector<DatasetItem> items;    // ordered by class index, then filename
    std::vector<std::string> skipped;  // files present but not decodable
};

// Expects root/<class_name>/<image files>. Files that do not decode are
// skipped with a warning; a class directory with no usable image is an error.
inline ScanResult scan_directory(const std::string& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root);

    const auto has_image_ext = [](const fs::path& p) {
        std::string ext = p.extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
    };

    std::vector<std::string> class_names;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) class_names.push_back(e.path().filename().string());
    if (class_names.empty())
        throw DataError("dataset root has no class subdirectories: " + root);
    std::sort(class_names.begin(), class_names.end());

    ScanResult out;
    out.registry = ClassRegistry(class_names);
    for (int ci = 0; ci < out.registry.size(); ++ci) {
        const std::string& cname = out.registry.name(ci);
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(fs::path(root) / cname))
            if (e.is_regular_file() && has_image_ext(e.path()))
                files.push_back(e.path().filename().string());
        std::sort(files.begin(), files.end());

        std::size_t usable = 0;
        for (const std::string& f : files) {
            const std::string path = (fs::path(root) / cname / f).string();
            // reduced decode: validates the file without holding full pixels
            if (cv::imread(path, cv::IMREAD_REDUCED_GRAYSCALE_8).empty()) {
                log_warn("skipping undecodable image: " + path);
                out.skipped.push_back(path);
                continue;
            }
            DatasetItem item;
            item.path = path;
            item.source_id = cname + "/" + f;
            item.label = ci;
            out.items.push_back(std::move(item));
            ++usable;
        }
        if (usable == 0)
            throw DataError("class directory has no decodable images: " + cname);
    }
    return out;
}

struct SplitFractions {
    double train = 0.8, val = 0.1, test = 0.1;

    void validate() const {
        if (train <= 0 || val <= 0 || test <= 0)
            throw ConfigError("split fractions must be positive");
        if (std::abs(train + val + test - 1.0) > 1e-9)
            throw ConfigError("split fractions must sum to 1");
    }
};

struct DatasetSplit {
    std::vector<int> train, val, test;  // indices into the scan's item list
    std::uint64_t seed = 0;
    SplitFractions fractions;
};

// Stratified split with largest-remainder rounding inside each class, so
// each subset stays within one image of its ideal share per class.
// Remainder ties go to the later subset (test, then val), keeping the small
// eval sets from starving.
inline DatasetSplit stratified_split(const std::vector<DatasetItem>& items,
                                     const ClassRegistry& registry,
                                     const SplitFractions& fractions, std::uint64_t seed) {
    fractions.validate();
    if (items.empty()) throw DataError("cannot split an empty dataset");

    const int n_classes = registry.size();
    std::vector<std::vector<int>> by_class(n_classes);
    for (int i = 0; i < static_cast<int>(items.size()); ++i) {
        if (items[i].label < 0 || items[i].label >= n_classes)
            throw DataError("item label out of range: " + items[i].source_id);
        by_class[items[i].label].push_back(i);
    }
    for (int c = 0; c < n_classes; ++c)
        if (by_class[c].size() < 3)
            throw DataError("class has fewer than 3 items, cannot split: " +
                            registry.name(c));

    DatasetSplit split;
    split.seed = seed;
    split.fractions = fractions;
    const double fr[3] = {fractions.train, fractions.val, fractions.test};

    for (int c = 0; c < n_classes; ++c) {
        std::vector<int>& idx = by_class[c];
        Rng rng(Rng::derive(seed, "split", static_cast<std::uint64_t>(c)));
        rng.shuffle(idx);

        const int n = static_cast<int>(idx.size());
        int take[3];
        double frac_part[3];
        int assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double ideal = fr[s] * n;
            take[s] = static_cast<int>(ideal);
            frac_part[s] = ideal - take[s];
            assigned += take[s];
        }
        const int leftover = n - assigned;
        // larger fractional part first; tie broken toward test, then val
        int order[3] = {2, 1, 0};
        std::stable_sort(order, order + 3,
                         [&](int a, int b) { return frac_part[a] > frac_part[b]; });
        for (int k = 0; k < leftover; ++k) ++take[order[k]];

        int pos = 0;
        for (int k = 0; k < take[0]; ++k) split.train.push_back(idx[pos++]);
        for (int k = 0; k < take[1]; ++k) split.val.push_back(idx[pos++]);
        for (int k = 0; k < take[2]; ++k) split.test.push_back(idx[pos++]);
    }

    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

inline nlohmann::json split_to_json(const DatasetSplit& split,
                                    const ClassRegistry& registry,
                                    const std::vector<DatasetItem>& items) {
    nlohmann::json j;
    j["seed"] = split.seed;
    j["fractions"] = {{"train", split.fractions.train},
                      {"val", split.fractions.val},
                      {"test", split.fractions.test}};
    j["classes"] = registry.names();
    const auto ids = [&](const std::vector<int>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (int i : v) a.push_back(items[i].source_id);
        return a;
    };
    j["train"] = ids(split.train);
    j["val"] = ids(split.val);
    j["test"] = ids(split.test);
    return j;
}

// Rebuilds index lists against a scan; every recorded id must still exist
// and the class list must match.
inline DatasetSplit split_from_json(const nlohmann::json& j, const ClassRegistry& registry,
                                    const std::vector<DatasetItem>& items) {
    const auto classes = j.at("classes").get<std::vector<std::string>>();
    if (classes != registry.names())
        throw DataError("split manifest classes do not match the scanned dataset");

    DatasetSplit split;
    split.seed = j.at("seed").get<std::uint64_t>();
    split.fractions.train = j.at("fractions").at("train").get<double>();
    split.fractions.val = j.at("fractions").at("val").get<double>();
    split.fractions.test = j.at("fractions").at("test").get<double>();

    std::unordered_map<std::string, int> lookup;
    for (int i = 0; i < static_cast<int>(items.size()); ++i)
        lookup[items[i].source_id] = i;
    const auto restore = [&](const nlohmann::json& arr, std::vector<int>& out,
                             const char* which) {
        for (const auto& v : arr) {
            const auto it = lookup.find(v.get<std::string>());
            if (it == lookup.end())
                throw DataError(std::string("split references missing image in ") + which +
                                ": " + v.get<std::string>());
            out.push_back(it->second);
        }
    };
    restore(j.at("train"), split.train, "train");
    restore(j.at("val"), split.val, "val");
    restore(j.at("test"), split.test, "test");
    return split;
}

}  // namespace camscope::data
