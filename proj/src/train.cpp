#include "ramangeo/train.hpp"

#include <map>
#include <sstream>

namespace ramangeo::train {

FilterResult filter_rare_classes(const std::vector<std::string>& labels, int min_count) {
    std::map<std::string, long long> counts;
    for (const auto& label : labels) ++counts[label];

    FilterResult result;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (counts[labels[i]] >= min_count) result.kept.push_back(i);
    }
    for (const auto& [label, count] : counts) {
        if (count < min_count) result.removed[label] = count;
    }
    if (result.kept.empty()) {
        throw EmptyError("filter_rare_classes: no class has " + std::to_string(min_count) +
                         " or more samples");
    }
    return result;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const std::vector<int>& labels) {
    int max_label = -1;
    for (int y : labels) max_label = std::max(max_label, y);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) throw IndexError("negative class label");
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    return by_class;
}

} // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_split(const std::vector<int>& labels, double holdout_fraction, std::uint64_t seed) {
    if (labels.empty()) throw EmptyError("stratified_split: no labels");
    if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
        throw ConfigError("stratified_split: holdout_fraction must be in (0, 1)");
    }
    auto by_class = indices_by_class(labels);
    Rng rng = seeded_rng(seed, 11);

    std::vector<std::size_t> train_idx, test_idx;
    for (auto& members : by_class) {
        if (members.empty()) continue;
        if (members.size() < 2) {
            throw ConfigError("stratified_split: a class has a single sample; filter first");
        }
        shuffle(members, rng);
        auto take = static_cast<std::size_t>(
            std::llround(static_cast<double>(members.size()) * holdout_fraction));
        take = std::min(take, members.size() - 1); // every class keeps a training row
        for (std::size_t i = 0; i < members.size(); ++i) {
            (i < take ? test_idx : train_idx).push_back(members[i]);
        }
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    return {train_idx, test_idx};
}

std::vector<int> stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("stratified_kfold: k must be >= 2");
    if (labels.empty()) throw EmptyError("stratified_kfold: no labels");
    auto by_class = indices_by_class(labels);
    Rng rng = seeded_rng(seed, 13);

    std::vector<int> fold(labels.size(), -1);
    int start = 0;
    for (auto& members : by_class) {
        if (members.empty()) continue;
        shuffle(members, rng);
        for (std::size_t j = 0; j < members.size(); ++j) {
            fold[members[j]] = (start + static_cast<int>(j)) % k;
        }
        start = (start + static_cast<int>(members.size())) % k;
    }
    return fold;
}

std::string history_to_jsonl(const std::vector<EpochRecord>& history) {
    std::ostringstream os;
    for (const auto& r : history) {
        nlohmann::json j = {{"fold", r.fold}, {"epoch", r.epoch}, {"train_loss", r.train_loss}};
        j["val_loss"] = r.val_loss ? nlohmann::json(*r.val_loss) : nlohmann::json(nullptr);
        j["val_accuracy"] =
            r.val_accuracy ? nlohmann::json(*r.val_accuracy) : nlohmann::json(nullptr);
        if (r.wall_ms) j["wall_ms"] = *r.wall_ms;
        os << j.dump() << '\n';
    }
    return os.str();
}

} // namespace ramangeo::train
