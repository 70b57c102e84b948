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

#include <bit>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "umix/data_io.hpp"
#include "umix/nn.hpp"
#include "umix/trainer.hpp"

namespace umix::io {

static_assert(std::endian::native == std::endian::little,
              "model files store 64-bit little-endian floats");

// Versioned flat model file: a text header (shapes, layer specs, fitted
// scalers) followed by every parameter as raw 64-bit little-endian floats in
// declaration order.

namespace detail_io {

inline std::string join_sizes(const std::vector<std::size_t>& v) {
    if (v.empty()) return "-";
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

inline std::vector<std::size_t> parse_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    if (s == "-") return out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::stoull(tok));
    return out;
}

inline std::string join_doubles(const std::vector<double>& v) {
    if (v.empty()) return "-";
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << format_double(v[i]);
    return os.str();
}

inline std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    if (s == "-") return out;
    std::istringstream is(s);
    double v;
    while (is >> v) out.push_back(v);
    return out;
}

inline void write_scaler(std::ostream& out, const std::string& tag, const data::Scaler& s) {
    out << tag << ".in_cols " << s.in_cols() << "\n";
    out << tag << ".kept " << join_sizes(s.kept()) << "\n";
    out << tag << ".mean " << join_doubles(s.mean()) << "\n";
    out << tag << ".std " << join_doubles(s.stddev()) << "\n";
}

} // namespace detail_io

inline void save_model(const std::string& path, const train::FittedModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(detail::cat("save_model: cannot open '", path, "'"));
    const nn::ModelSpec& spec = model.net.spec();
    out << "umix-model v1\n";
    out << "embed " << (spec.embed == nn::EmbedKind::mlp ? "mlp" : "lstm") << "\n";
    out << "activation " << nn::activation_name(spec.activation) << "\n";
    out << "d_x " << spec.d_x << "\n";
    out << "d_y " << spec.d_y << "\n";
    out << "d_z " << spec.d_z() << "\n";
    out << "embed_widths " << detail_io::join_sizes(spec.embed_widths) << "\n";
    out << "head_widths " << detail_io::join_sizes(spec.head_widths) << "\n";
    out << "lstm_hidden " << spec.lstm_hidden << "\n";
    out << "window " << spec.window << "\n";
    detail_io::write_scaler(out, "scaler.x", model.x_scaler);
    detail_io::write_scaler(out, "scaler.y", model.y_scaler);

    std::size_t total = 0;
    for (const auto& p : model.net.params()) total += p.value.size();
    out << "params " << total << "\n";
    for (const auto& p : model.net.params()) {
        out.write(reinterpret_cast<const char*>(p.value.raw().data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
    if (!out) throw Error(detail::cat("save_model: write failed for '", path, "'"));
}

namespace detail_io {

inline std::string expect_line(std::istream& in, const std::string& key, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(detail::cat("load_model: '", path, "': missing '", key, "' line"));
    }
    if (line.rfind(key + " ", 0) != 0) {
        throw Error(detail::cat("load_model: '", path, "': expected '", key, "', got '", line,
                                "'"));
    }
    return line.substr(key.size() + 1);
}

inline data::Scaler read_scaler(std::istream& in, const std::string& tag, const std::string& path) {
    const std::size_t in_cols = std::stoull(expect_line(in, tag + ".in_cols", path));
    auto kept = parse_sizes(expect_line(in, tag + ".kept", path));
    auto mean = parse_doubles(expect_line(in, tag + ".mean", path));
    auto stddev = parse_doubles(expect_line(in, tag + ".std", path));
    if (kept.size() != mean.size() || kept.size() != stddev.size()) {
        throw Error(detail::cat("load_model: '", path, "': inconsistent ", tag, " block"));
    }
    return data::Scaler::restore(in_cols, std::move(kept), std::move(mean), std::move(stddev));
}

} // namespace detail_io

inline train::FittedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(detail::cat("load_model: cannot open '", path, "'"));
    std::string line;
    std::getline(in, line);
    if (line != "umix-model v1") {
        throw Error(detail::cat("load_model: '", path, "' is not a umix-model v1 file"));
    }

    nn::ModelSpec spec;
    const std::string embed = detail_io::expect_line(in, "embed", path);
    if (embed == "mlp") {
        spec.embed = nn::EmbedKind::mlp;
    } else if (embed == "lstm") {
        spec.embed = nn::EmbedKind::lstm;
    } else {
        throw Error(detail::cat("load_model: '", path, "': unknown embed kind '", embed, "'"));
    }
    spec.activation = nn::activation_from_name(detail_io::expect_line(in, "activation", path));
    spec.d_x = std::stoull(detail_io::expect_line(in, "d_x", path));
    spec.d_y = std::stoull(detail_io::expect_line(in, "d_y", path));
    const std::size_t d_z = std::stoull(detail_io::expect_line(in, "d_z", path));
    spec.embed_widths = detail_io::parse_sizes(detail_io::expect_line(in, "embed_widths", path));
    spec.head_widths = detail_io::parse_sizes(detail_io::expect_line(in, "head_widths", path));
    spec.lstm_hidden = std::stoull(detail_io::expect_line(in, "lstm_hidden", path));
    spec.window = std::stoull(detail_io::expect_line(in, "window", path));

    train::FittedModel model{nn::SplitModel::uninitialized(spec),
                             detail_io::read_scaler(in, "scaler.x", path),
                             detail_io::read_scaler(in, "scaler.y", path)};
    if (model.net.spec().d_z() != d_z) {
        throw Error(detail::cat("load_model: '", path, "': d_z mismatch"));
    }

    const std::size_t total = std::stoull(detail_io::expect_line(in, "params", path));
    std::size_t expected = 0;
    for (const auto& p : model.net.params()) expected += p.value.size();
    if (total != expected) {
        throw Error(detail::cat("load_model: '", path, "': parameter count ", total,
                                " does not match spec (", expected, ")"));
    }
    for (auto& p : model.net.params()) {
        in.read(reinterpret_cast<char*>(p.value.raw().data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(double)));
        if (!in) throw Error(detail::cat("load_model: '", path, "': truncated parameter data"));
    }
    return model;
}

} // namespace umix::io
