/*
 * Copyright 2026 The OXDS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "oxds/dataset.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "oxds/error.hpp"
#include "text_util.hpp"

namespace oxds {

FeatureTable read_features(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::kParseError, source + ": empty feature file");
  }
  ++line_no;
  const auto header = detail::split_ws(line);
  if (header.size() != 4 || header[0] != "OXDS-FEAT" || header[1] != "1") {
    throw Error(ErrorKind::kParseError,
                source + ": expected header 'OXDS-FEAT 1 <N> <D_in>'");
  }
  const auto count = detail::parse_uint(header[2], detail::where(source, 1));
  const auto dim = static_cast<Eigen::Index>(
      detail::parse_uint(header[3], detail::where(source, 1)));

  FeatureTable table;
  table.ids.reserve(count);
  table.rows.resize(static_cast<Eigen::Index>(count), dim);
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::split_ws(line);
    if (tokens.empty()) continue;
    const auto ctx = detail::where(source, line_no);
    if (table.ids.size() == count) {
      throw Error(ErrorKind::kParseError,
                  fmt::format("{}: more than {} rows", ctx, count));
    }
    if (static_cast<Eigen::Index>(tokens.size()) != dim + 1) {
      throw Error(ErrorKind::kDimensionMismatch,
                  fmt::format("{}: expected {} values, found {}", ctx, dim,
                              tokens.size() - 1));
    }
    const auto r = static_cast<Eigen::Index>(table.ids.size());
    for (Eigen::Index k = 0; k < dim; ++k) {
      table.rows(r, k) =
          detail::parse_double(tokens[static_cast<std::size_t>(k) + 1], ctx);
    }
    table.ids.emplace_back(tokens[0]);
  }
  if (table.ids.size() != count) {
    throw Error(ErrorKind::kParseError,
                fmt::format("{}: header announces {} rows, found {}", source,
                            count, table.ids.size()));
  }
  if (!table.rows.allFinite()) {
    throw Error(ErrorKind::kParseError, source + ": non-finite feature value");
  }
  return table;
}

FeatureTable load_features(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_features(in, path.string());
}

void write_features(const FeatureTable& table, std::ostream& out) {
  fmt::print(out, "OXDS-FEAT 1 {} {}\n", table.ids.size(), table.rows.cols());
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    out << table.ids[i];
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index k = 0; k < table.rows.cols(); ++k) {
      fmt::print(out, " {:.17g}", table.rows(r, k));
    }
    out << '\n';
  }
}

void save_features(const FeatureTable& table,
                   const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  write_features(table, out);
}

std::vector<LabelRecord> read_labels(std::istream& in,
                                     const std::string& source) {
  std::vector<LabelRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    if (tokens.size() != 3 && tokens.size() != 4) {
      throw Error(ErrorKind::kParseError,
                  detail::where(source, line_no) +
                      ": expected '<item_id> <domain> <category> [group]'");
    }
    LabelRecord rec{std::string(tokens[0]), std::string(tokens[1]),
                    std::string(tokens[2]),
                    tokens.size() == 4 ? std::string(tokens[3]) : ""};
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<LabelRecord> load_labels(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_labels(in, path.string());
}

void save_labels(const std::vector<LabelRecord>& labels,
                 const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const auto& rec : labels) {
    out << rec.item_id << ' ' << rec.domain << ' ' << rec.category;
    if (!rec.group.empty()) out << ' ' << rec.group;
    out << '\n';
  }
}

CategorySplit read_split(std::istream& in, const std::string& source,
                         SplitMode mode) {
  CategorySplit split;
  split.mode = mode;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    if (tokens.size() != 2 || (tokens[1] != "train" && tokens[1] != "test")) {
      throw Error(ErrorKind::kParseError,
                  detail::where(source, line_no) +
                      ": expected '<category> train|test'");
    }
    (tokens[1] == "train" ? split.train : split.test)
        .emplace(std::string(tokens[0]));
  }
  if (mode == SplitMode::kManyShot) {
    split.train.insert(split.test.begin(), split.test.end());
    split.test = split.train;
  }
  split.validate();
  return split;
}

CategorySplit load_split(const std::filesystem::path& path, SplitMode mode) {
  auto in = detail::open_input(path);
  return read_split(in, path.string(), mode);
}

void save_split(const CategorySplit& split,
                const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const auto& c : split.train) out << c << " train\n";
  for (const auto& c : split.test) {
    if (split.train.count(c) == 0) out << c << " test\n";
  }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  const auto base = path.parent_path();
  auto resolve = [&base](std::string_view value) {
    std::filesystem::path p{std::string(value)};
    return p.is_absolute() ? p : base / p;
  };

  DatasetManifest m;
  bool has_mode = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto ctx = detail::where(path.string(), line_no);
    std::string_view sv(line);
    while (!sv.empty() && (sv.back() == '\r' || sv.back() == ' ')) {
      sv.remove_suffix(1);
    }
    while (!sv.empty() && sv.front() == ' ') sv.remove_prefix(1);
    if (sv.empty() || sv.front() == '#') continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw Error(ErrorKind::kParseError, ctx + ": expected key=value");
    }
    const auto key = sv.substr(0, eq);
    const auto value = sv.substr(eq + 1);
    if (key == "mode") {
      m.mode = parse_split_mode(value);
      has_mode = true;
    } else if (key == "prototypes") {
      m.prototypes = resolve(value);
    } else if (key == "labels") {
      m.labels = resolve(value);
    } else if (key == "split") {
      m.split = resolve(value);
    } else if (key == "holdout") {
      m.holdout = detail::parse_double(value, ctx);
      if (!(m.holdout > 0.0 && m.holdout < 1.0)) {
        throw Error(ErrorKind::kParseError, ctx + ": holdout must be in (0,1)");
      }
    } else if (key == "seed") {
      m.seed = detail::parse_uint(value, ctx);
    } else if (key.starts_with("features.") && key.size() > 9) {
      m.features[std::string(key.substr(9))] = resolve(value);
    } else {
      throw Error(ErrorKind::kParseError,
                  ctx + ": unknown key '" + std::string(key) + "'");
    }
  }
  if (!has_mode || m.prototypes.empty() || m.labels.empty() ||
      m.split.empty() || m.features.empty()) {
    throw Error(ErrorKind::kParseError,
                path.string() +
                    ": manifest needs mode, prototypes, labels, split and at "
                    "least one features.<domain> entry");
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "mode=" << split_mode_name(manifest.mode) << '\n';
  out << "prototypes=" << manifest.prototypes.generic_string() << '\n';
  out << "labels=" << manifest.labels.generic_string() << '\n';
  out << "split=" << manifest.split.generic_string() << '\n';
  for (const auto& [domain, file] : manifest.features) {
    out << "features." << domain << '=' << file.generic_string() << '\n';
  }
  fmt::print(out, "holdout={:.17g}\n", manifest.holdout);
  out << "seed=" << manifest.seed << '\n';
}

Dataset load_dataset(const DatasetManifest& manifest,
                     const std::set<std::string>& domains) {
  std::set<std::string> wanted = domains;
  if (wanted.empty()) {
    for (const auto& [d, p] : manifest.features) wanted.insert(d);
  }
  for (const auto& d : wanted) {
    if (manifest.features.count(d) == 0) {
      throw Error(ErrorKind::kMissingDomain,
                  "domain '" + d + "' is not in the manifest");
    }
  }

  Dataset ds{manifest, load_prototypes(manifest.prototypes),
             load_split(manifest.split, manifest.mode), {}, {}};
  for (const auto* set : {&ds.split.train, &ds.split.test}) {
    for (const auto& c : *set) {
      if (!ds.book.contains(c)) {
        throw Error(ErrorKind::kUnknownCategory,
                    "split category '" + c + "' has no prototype");
      }
    }
  }

  std::map<std::string, const LabelRecord*> by_id;
  const auto labels = load_labels(manifest.labels);
  for (const auto& rec : labels) {
    if (!by_id.emplace(rec.item_id, &rec).second) {
      throw Error(ErrorKind::kInconsistentLabels,
                  "item '" + rec.item_id + "' is labelled twice");
    }
  }

  std::set<std::string> seen;
  for (const auto& domain : wanted) {
    const auto table = load_features(manifest.features.at(domain));
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
      const auto& id = table.ids[i];
      auto it = by_id.find(id);
      if (it == by_id.end()) {
        throw Error(ErrorKind::kInconsistentLabels,
                    "feature row '" + id + "' has no label");
      }
      const LabelRecord& rec = *it->second;
      if (rec.domain != domain) {
        throw Error(ErrorKind::kInconsistentLabels,
                    "item '" + id + "' is labelled as domain '" + rec.domain +
                        "' but stored with '" + domain + "'");
      }
      if (!ds.book.contains(rec.category)) {
        throw Error(ErrorKind::kUnknownCategory,
                    "item '" + id + "' has category '" + rec.category +
                        "' without a prototype");
      }
      if (!seen.insert(id).second) {
        throw Error(ErrorKind::kInconsistentLabels,
                    "item '" + id + "' appears in two feature rows");
      }
      ds.items.push_back(ItemRecord{id, domain, rec.category,
                                    table.rows.row(
                                        static_cast<Eigen::Index>(i))
                                        .transpose()});
      if (!rec.group.empty()) ds.group[id] = rec.group;
    }
  }
  for (const auto& rec : labels) {
    if (wanted.count(rec.domain) != 0 && seen.count(rec.item_id) == 0) {
      throw Error(ErrorKind::kInconsistentLabels,
                  "labelled item '" + rec.item_id + "' has no feature row");
    }
  }
  std::sort(ds.items.begin(), ds.items.end(),
            [](const ItemRecord& a, const ItemRecord& b) {
              return a.item_id < b.item_id;
            });
  return ds;
}

}  // namespace oxds
