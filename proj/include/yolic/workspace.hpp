// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// On-disk workspace shared by the CLI and the HTTP service:
//
//   <root>/manifest.json          "yolic-manifest/1"
//   <root>/configs/<name>.json    "yolic-config/1"
//   <root>/images/<id>.ppm        P6
//   <root>/masks/<id>.pgm         P5 class ids, 255 = none
//   <root>/annotations/<id>.ann   "yolic-ann/1"
//   <root>/weights/  <root>/reports/

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "yolic/cellgeom.hpp"
#include "yolic/common.hpp"
#include "yolic/image.hpp"
#include "yolic/labelkit.hpp"
#include "yolic/yolicnet.hpp"

#ifndef YOLIC_CONFIG_DIR
#define YOLIC_CONFIG_DIR "configs"
#endif

namespace yolic {

namespace fs = std::filesystem;

inline constexpr std::string_view kManifestVersion = "yolic-manifest/1";

struct ManifestItem {
  std::string id;
  std::string image;       // relative to the workspace root
  std::string mask;        // may be empty
  std::string annotation;  // may be empty

  friend bool operator==(const ManifestItem&, const ManifestItem&) = default;
};

struct Manifest {
  std::string config;
  double tau = kDefaultCoverage;
  std::vector<ManifestItem> items;

  const ManifestItem* find(std::string_view id) const {
    for (const auto& it : items) {
      if (it.id == id) return &it;
    }
    return nullptr;
  }
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

inline std::string manifest_to_text(const Manifest& m) {
  nlohmann::ordered_json j;
  j["version"] = kManifestVersion;
  j["config"] = m.config;
  j["tau"] = m.tau;
  auto items = nlohmann::ordered_json::array();
  for (const auto& it : m.items) {
    items.push_back({{"id", it.id}, {"image", it.image}, {"mask", it.mask}, {"annotation", it.annotation}});
  }
  j["items"] = std::move(items);
  return j.dump(2) + "\n";
}

inline Manifest manifest_from_text(std::string_view text) {
  Manifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    YOLIC_CHECK(j.value("version", std::string()) == kManifestVersion, FormatError, "manifest: expected version '",
                kManifestVersion, "'");
    m.config = j.at("config").get<std::string>();
    m.tau = j.value("tau", kDefaultCoverage);
    for (const auto& it : j.at("items")) {
      m.items.push_back({it.at("id").get<std::string>(), it.at("image").get<std::string>(),
                         it.value("mask", std::string()), it.value("annotation", std::string())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(detail::concat("manifest: ", e.what()));
  }
  return m;
}

// FNV-1a over the bytes, as 16 hex digits. Used as the version echo for
// optimistic concurrency.
inline std::string content_version(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Write to a sibling temp file, then rename over the target.
inline void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  write_file(tmp.string(), bytes);
  fs::rename(tmp, path);
}

// Ids and config names become file names; keep them to a safe alphabet.
inline bool is_safe_name(std::string_view s) {
  if (s.empty() || s.size() > 128 || s.front() == '.') return false;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                    c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

class Workspace {
 public:
  explicit Workspace(fs::path root) : root_(std::move(root)) {}

  // Creates the directory layout (and an empty manifest) when missing.
  static Workspace create(const fs::path& root, const std::string& config_name = {}) {
    Workspace ws(root);
    for (const char* d : {"configs", "images", "masks", "annotations", "weights", "reports"}) {
      fs::create_directories(root / d);
    }
    if (!fs::exists(ws.manifest_path())) {
      Manifest m;
      m.config = config_name;
      ws.save_manifest(m);
    }
    return ws;
  }

  const fs::path& root() const noexcept { return root_; }
  fs::path manifest_path() const { return root_ / "manifest.json"; }
  fs::path config_path(std::string_view name) const { return root_ / "configs" / (std::string(name) + ".json"); }
  fs::path image_path(std::string_view id) const { return root_ / "images" / (std::string(id) + ".ppm"); }
  fs::path mask_path(std::string_view id) const { return root_ / "masks" / (std::string(id) + ".pgm"); }
  fs::path annotation_path(std::string_view id) const { return root_ / "annotations" / (std::string(id) + ".ann"); }
  fs::path weights_dir() const { return root_ / "weights"; }
  fs::path reports_dir() const { return root_ / "reports"; }

  Manifest load_manifest() const {
    YOLIC_CHECK(fs::exists(manifest_path()), Error, "workspace '", root_.string(), "' has no manifest.json");
    return manifest_from_text(read_file(manifest_path().string()));
  }
  void save_manifest(const Manifest& m) const { write_file_atomic(manifest_path(), manifest_to_text(m)); }

  std::vector<std::string> list_configs() const { return stems(root_ / "configs", ".json"); }
  std::vector<std::string> list_reports() const { return stems(root_ / "reports", ".json"); }

  std::optional<std::string> read_config_text(std::string_view name) const {
    if (!is_safe_name(name) || !fs::exists(config_path(name))) return std::nullopt;
    return read_file(config_path(name).string());
  }

  // The manifest's config, from this workspace or the shipped set.
  CellConfig active_config() const;

 private:
  static std::vector<std::string> stems(const fs::path& dir, std::string_view ext) {
    std::vector<std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path().stem().string());
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  fs::path root_;
};

// Resolution order: an existing file path, the workspace's configs/, then the
// shipped config directory.
inline fs::path locate_config(const std::string& name_or_path, const Workspace* ws = nullptr) {
  std::vector<fs::path> candidates{name_or_path};
  if (is_safe_name(name_or_path)) {
    if (ws) candidates.push_back(ws->config_path(name_or_path));
    candidates.push_back(fs::path(YOLIC_CONFIG_DIR) / (name_or_path + ".json"));
  }
  std::string tried;
  for (const auto& p : candidates) {
    if (fs::is_regular_file(p)) return p;
    tried += (tried.empty() ? "" : ", ") + p.string();
  }
  throw Error(detail::concat("config '", name_or_path, "' not found (tried ", tried, ")"));
}

// Loads and fully validates; the first violation is reported as a FormatError.
inline CellConfig resolve_config(const std::string& name_or_path, const Workspace* ws = nullptr) {
  const auto path = locate_config(name_or_path, ws);
  auto cfg = load_config(read_file(path.string()));
  const auto problems = validate_config_full(cfg);
  YOLIC_CHECK(problems.empty(), FormatError, path.string(), ": ", to_string(problems.front()));
  return cfg;
}

inline CellConfig Workspace::active_config() const {
  const auto m = load_manifest();
  YOLIC_CHECK(!m.config.empty(), Error, "workspace manifest names no config");
  return resolve_config(m.config, this);
}

// Shared by `config validate` and PUT /api/configs: parse, then collect every
// invariant violation. Diagnostics are empty iff the document is valid.
struct ConfigCheck {
  std::optional<CellConfig> config;
  std::vector<std::string> diagnostics;
};

inline ConfigCheck check_config_text(std::string_view text) {
  ConfigCheck out;
  try {
    out.config = load_config(text);
  } catch (const FormatError& e) {
    out.diagnostics.push_back(e.what());
    return out;
  }
  for (const auto& v : validate_config_full(*out.config)) out.diagnostics.push_back(to_string(v));
  return out;
}

// Every cross-reference resolves and every annotation validates against the
// workspace config.
inline std::vector<std::string> check_workspace(const Workspace& ws) {
  std::vector<std::string> problems;
  Manifest m;
  try {
    m = ws.load_manifest();
  } catch (const Error& e) {
    return {e.what()};
  }
  std::optional<CellConfig> cfg;
  try {
    cfg = ws.active_config();
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  for (const auto& it : m.items) {
    auto exists = [&](const std::string& rel, const char* what) {
      if (!rel.empty() && !fs::is_regular_file(ws.root() / rel)) {
        problems.push_back(detail::concat("item ", it.id, ": ", what, " '", rel, "' does not exist"));
        return false;
      }
      return !rel.empty();
    };
    if (it.image.empty()) problems.push_back(detail::concat("item ", it.id, ": no image"));
    exists(it.image, "image");
    exists(it.mask, "mask");
    if (exists(it.annotation, "annotation") && cfg) {
      try {
        read_annotation(read_file((ws.root() / it.annotation).string()), *cfg);
      } catch (const Error& e) {
        problems.push_back(detail::concat("item ", it.id, ": ", e.what()));
      }
    }
  }
  return problems;
}

// Image plus ground truth for every annotated manifest item, in manifest order.
inline std::vector<std::pair<std::string, Sample>> load_labeled(const Workspace& ws, const CellConfig& cfg) {
  std::vector<std::pair<std::string, Sample>> out;
  for (const auto& it : ws.load_manifest().items) {
    if (it.annotation.empty()) continue;
    Sample s{decode_ppm(read_file((ws.root() / it.image).string())),
             read_annotation(read_file((ws.root() / it.annotation).string()), cfg)};
    out.emplace_back(it.id, std::move(s));
  }
  return out;
}

// Labels from a pixel mask: rasterize at the mask size, then convert.
inline CellLabelVector labels_from_mask(const ClassIdMask& mask, const CellConfig& cfg, double tau) {
  return mask_to_labels(mask, rasterize(cfg, mask.width, mask.height), cfg.num_classes(), tau);
}

// Appends `count` synthetic scenes (image, mask, derived annotation) to the
// workspace. Ids are "synth-<seed>-<k>".
inline std::vector<std::string> synth_into(const Workspace& ws, const CellConfig& cfg, int count, std::uint64_t seed,
                                           int size, double tau = kDefaultCoverage) {
  YOLIC_CHECK(count >= 1, Error, "synth: count must be >= 1");
  YOLIC_CHECK(size >= 8, Error, "synth: size must be >= 8");
  SynthParams p;
  p.width = p.height = size;
  p.n_classes = static_cast<int>(cfg.num_classes());
  const auto cells = rasterize(cfg, size, size);
  auto manifest = ws.load_manifest();
  if (manifest.config.empty()) manifest.config = cfg.name;
  YOLIC_CHECK(manifest.config == cfg.name, MismatchError, "workspace uses config '", manifest.config,
              "', not '", cfg.name, "'");
  manifest.tau = tau;
  if (!fs::exists(ws.config_path(cfg.name))) write_file_atomic(ws.config_path(cfg.name), save_config(cfg));

  std::vector<std::string> ids;
  for (int k = 0; k < count; ++k) {
    const auto scene = synth_scene(p, hash_counter(seed, static_cast<std::uint64_t>(k)));
    const auto labels = mask_to_labels(scene.mask, cells, cfg.num_classes(), tau);
    const std::string id = detail::concat("synth-", seed, "-", k);
    write_file_atomic(ws.image_path(id), encode_ppm(scene.image));
    write_file_atomic(ws.mask_path(id), encode_pgm(scene.mask));
    write_file_atomic(ws.annotation_path(id), write_annotation(labels));
    ManifestItem item{id, "images/" + id + ".ppm", "masks/" + id + ".pgm", "annotations/" + id + ".ann"};
    auto existing = std::find_if(manifest.items.begin(), manifest.items.end(), [&](const auto& x) { return x.id == id; });
    if (existing != manifest.items.end()) {
      *existing = item;
    } else {
      manifest.items.push_back(item);
    }
    ids.push_back(id);
  }
  ws.save_manifest(manifest);
  return ids;
}

}  // namespace yolic
