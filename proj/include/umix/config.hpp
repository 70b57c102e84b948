// Copyright 2026 The umix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "umix/common.hpp"

namespace umix::config {

struct KeySpec {
    const char* key;
    const char* default_value;
    const char* help;
};

/// Every recognised key with its default. Keys are namespaced per module;
/// anything else is rejected (typo safety).
inline const std::vector<KeySpec>& registry() {
    static const std::vector<KeySpec> keys = {
        {"data.path", "", "CSV path (tabular features or a close-price series)"},
        {"data.target", "", "target column name for tabular CSVs"},
        {"data.kind", "tabular", "dataset kind: tabular | series | synthetic"},
        {"data.close_column", "close", "price column name for series CSVs"},
        {"data.synthetic", "trend", "synthetic series kind: trend | shock | high_vol"},
        {"data.synthetic_n", "800", "synthetic series length"},
        {"data.window", "60", "window length for series datasets"},
        {"data.train_fraction", "0.8", "chronological train fraction for series datasets"},
        {"data.standardize", "true", "z-score features/targets on the training split"},
        {"data.dir", "data", "directory searched for named dataset presets"},
        {"graph.k", "15", "neighbour count for the data graph"},
        {"graph.metric", "euclidean", "distance metric: euclidean | manhattan"},
        {"umap.min_dist", "0.1", "kernel fit target; ignored when umap.a/umap.b are set"},
        {"umap.a", "", "kernel shape override (requires umap.b)"},
        {"umap.b", "", "kernel shape override (requires umap.a)"},
        {"umap.m_negatives", "5", "negative edges attached per positive edge"},
        {"train.method", "umap_mixup",
         "erm | mixup | manifold_mixup | umap_mixup | supervised_umap"},
        {"train.alpha", "2", "Beta(alpha, alpha) mixing concentration"},
        {"train.gamma", "0.1", "weight of the embedding-graph regulariser"},
        {"train.lr", "0.001", "Adam learning rate"},
        {"train.batch_size", "32", "samples (erm/mixup) or positive edges per batch"},
        {"train.epochs", "400", "training epochs (series runs default to 150)"},
        {"train.seed", "0", "master seed; all randomness flows from it"},
        {"train.loss", "squared_error", "supervised loss"},
        {"train.pair_source", "uniform", "mixup partner draw: uniform | graph"},
        {"model.embed", "mlp", "embedding network kind: mlp | lstm"},
        {"model.embed_widths", "100,50", "mlp hidden widths; the last is the embedding size"},
        {"model.head_widths", "-", "head hidden widths; '-' means a single linear layer"},
        {"model.activation", "relu", "hidden activation: relu | tanh | identity"},
        {"model.lstm_hidden", "64", "lstm hidden size (the embedding size)"},
        {"bench.methods", "erm,mixup,manifold_mixup,umap_mixup", "comma list of methods"},
        {"bench.folds", "20", "train/test folds"},
        {"bench.test_fraction", "0.1", "test fraction per fold"},
        {"bench.parallel", "1", "worker threads for fold-level parallelism"},
    };
    return keys;
}

/// Flat key=value settings: defaults, then an optional config file, then
/// command-line overrides, in that precedence order.
class Settings {
public:
    static Settings defaults() {
        Settings s;
        for (const auto& k : registry()) s.values_[k.key] = k.default_value;
        return s;
    }

    void set(const std::string& key, const std::string& value) {
        if (!values_.count(key)) {
            throw UsageError(detail::cat("unknown config key '", key, "'"));
        }
        values_[key] = value;
        explicit_.insert({key, true});
    }

    /// '#' starts a comment; blank lines are skipped; "key = value" per line.
    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw UsageError(detail::cat("cannot open config file '", path, "'"));
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            const auto eq = line.find('=');
            std::string key = trim(eq == std::string::npos ? line : line.substr(0, eq));
            if (key.empty()) {
                if (trim(line).empty()) continue;
                throw UsageError(detail::cat(path, ":", lineno, ": expected key=value"));
            }
            if (eq == std::string::npos) {
                throw UsageError(detail::cat(path, ":", lineno, ": expected key=value"));
            }
            try {
                set(key, trim(line.substr(eq + 1)));
            } catch (const UsageError& e) {
                throw UsageError(detail::cat(path, ":", lineno, ": ", e.what()));
            }
        }
    }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            throw UsageError(detail::cat("unknown config key '", key, "'"));
        }
        return it->second;
    }

    bool is_set(const std::string& key) const {
        return explicit_.count(key) && !get(key).empty();
    }

    double get_double(const std::string& key) const {
        try {
            return std::stod(get(key));
        } catch (const std::exception&) {
            throw UsageError(detail::cat("config key '", key, "': '", get(key),
                                         "' is not a number"));
        }
    }

    std::size_t get_size(const std::string& key) const {
        try {
            return std::stoull(get(key));
        } catch (const std::exception&) {
            throw UsageError(detail::cat("config key '", key, "': '", get(key),
                                         "' is not a count"));
        }
    }

    std::uint64_t get_u64(const std::string& key) const { return get_size(key); }

    bool get_bool(const std::string& key) const {
        const std::string& v = get(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw UsageError(detail::cat("config key '", key, "': '", v, "' is not a boolean"));
    }

    /// Comma-separated size list; "-" or empty means none.
    std::vector<std::size_t> get_sizes(const std::string& key) const {
        std::vector<std::size_t> out;
        const std::string& v = get(key);
        if (v.empty() || v == "-") return out;
        std::string tok;
        std::istringstream is(v);
        while (std::getline(is, tok, ',')) {
            try {
                out.push_back(std::stoull(trim(tok)));
            } catch (const std::exception&) {
                throw UsageError(detail::cat("config key '", key, "': bad list entry '", tok,
                                             "'"));
            }
        }
        return out;
    }

    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        std::string tok;
        std::istringstream is(get(key));
        while (std::getline(is, tok, ',')) {
            tok = trim(tok);
            if (!tok.empty()) out.push_back(tok);
        }
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
    std::map<std::string, bool> explicit_;
};

} // namespace umix::config
