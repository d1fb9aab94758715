// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// Local HTTP front end over a Workspace. Payloads are the module file formats
// verbatim; error bodies carry the same diagnostics the CLI prints.
//
//   GET  /api/configs                 JSON list of names
//   GET  /api/configs/:name           yolic-config/1
//   PUT  /api/configs/:name           yolic-config/1 -> 400 with violations
//   GET  /api/images                  JSON list of items
//   GET  /api/images/:id              P6 image
//   GET  /api/images/:id/mask         P5 class-id mask
//   GET  /api/annotations/:id         yolic-ann/1, ETag = version
//   PUT  /api/annotations/:id         yolic-ann/1, optional If-Match
//   POST /api/infer/:id               yolic-pred/1
//   GET  /api/reports[/:name]         yolic-metrics/1 documents

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "yolic/decode.hpp"
#include "yolic/workspace.hpp"
#include "yolic/yolicnet.hpp"

namespace yolic {

inline constexpr const char* kConfigContentType = "application/json; profile=yolic-config/1";
inline constexpr const char* kAnnotationContentType = "text/plain; profile=yolic-ann/1";
inline constexpr const char* kPredictionContentType = "text/plain; profile=yolic-pred/1";

class Service {
 public:
  explicit Service(Workspace ws) : ws_(std::move(ws)) {}

  // Single-model serving; the model's C must match the workspace config.
  void load_model(std::string_view weights_bytes) {
    auto model = load_weights<float>(weights_bytes, static_cast<int>(ws_.active_config().num_outputs()));
    std::lock_guard lock(model_mu_);
    model_ = std::make_unique<YolicModel<float>>(std::move(model));
  }

  bool has_model() const {
    std::lock_guard lock(model_mu_);
    return model_ != nullptr;
  }

  const Workspace& workspace() const noexcept { return ws_; }

  void mount(httplib::Server& srv) {
    srv.Get("/api/configs", [this](const auto& req, auto& res) { guard(req, res, &Service::list_configs); });
    srv.Get("/api/configs/:name", [this](const auto& req, auto& res) { guard(req, res, &Service::get_config); });
    srv.Put("/api/configs/:name", [this](const auto& req, auto& res) { guard(req, res, &Service::put_config); });
    srv.Get("/api/images", [this](const auto& req, auto& res) { guard(req, res, &Service::list_images); });
    srv.Get("/api/images/:id", [this](const auto& req, auto& res) { guard(req, res, &Service::get_image); });
    srv.Get("/api/images/:id/mask", [this](const auto& req, auto& res) { guard(req, res, &Service::get_mask); });
    srv.Get("/api/annotations/:id", [this](const auto& req, auto& res) { guard(req, res, &Service::get_annotation); });
    srv.Put("/api/annotations/:id", [this](const auto& req, auto& res) { guard(req, res, &Service::put_annotation); });
    srv.Post("/api/infer/:id", [this](const auto& req, auto& res) { guard(req, res, &Service::infer); });
    srv.Get("/api/reports", [this](const auto& req, auto& res) { guard(req, res, &Service::list_reports); });
    srv.Get("/api/reports/:name", [this](const auto& req, auto& res) { guard(req, res, &Service::get_report); });
  }

 private:
  using Handler = void (Service::*)(const httplib::Request&, httplib::Response&);

  struct HttpError {
    int status;
    std::string body;
  };

  void guard(const httplib::Request& req, httplib::Response& res, Handler h) {
    try {
      (this->*h)(req, res);
    } catch (const HttpError& e) {
      fail(res, e.status, e.body);
    } catch (const MismatchError& e) {
      fail(res, 409, e.what());
    } catch (const FormatError& e) {
      fail(res, 400, e.what());
    } catch (const std::exception& e) {
      fail(res, 500, e.what());
    }
  }

  static void fail(httplib::Response& res, int status, const std::string& body) {
    res.status = status;
    res.set_content(body.ends_with('\n') ? body : body + "\n", "text/plain");
  }

  static std::string param(const httplib::Request& req, const char* key) {
    const auto it = req.path_params.find(key);
    const std::string v = it == req.path_params.end() ? std::string() : it->second;
    if (!is_safe_name(v)) throw HttpError{404, detail::concat("unknown ", key, " '", v, "'")};
    return v;
  }

  ManifestItem item(const httplib::Request& req) const {
    const auto id = param(req, "id");
    const auto manifest = ws_.load_manifest();
    const auto* it = manifest.find(id);
    if (!it) throw HttpError{404, detail::concat("unknown image id '", id, "'")};
    return *it;
  }

  std::mutex& annotation_lock(const std::string& id) {
    std::lock_guard lock(locks_mu_);
    auto& m = annotation_locks_[id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  void list_configs(const httplib::Request&, httplib::Response& res) {
    res.set_content(nlohmann::json(ws_.list_configs()).dump(), "application/json");
  }

  void get_config(const httplib::Request& req, httplib::Response& res) {
    const auto name = param(req, "name");
    const auto text = ws_.read_config_text(name);
    if (!text) throw HttpError{404, detail::concat("unknown config '", name, "'")};
    res.set_header("ETag", content_version(*text));
    res.set_content(*text, kConfigContentType);
  }

  void put_config(const httplib::Request& req, httplib::Response& res) {
    const auto name = param(req, "name");
    const auto check = check_config_text(req.body);
    if (!check.diagnostics.empty()) {
      std::string body;
      for (const auto& d : check.diagnostics) body += d + "\n";
      throw HttpError{400, body};
    }
    const auto bytes = save_config(*check.config);
    {
      std::lock_guard lock(config_mu_);
      if (const auto cur = ws_.read_config_text(name); cur && req.has_header("If-Match") &&
                                                         req.get_header_value("If-Match") != content_version(*cur)) {
        throw HttpError{409, detail::concat("config '", name, "' changed since version ", req.get_header_value("If-Match"))};
      }
      write_file_atomic(ws_.config_path(name), bytes);
    }
    res.set_header("ETag", content_version(bytes));
    res.set_content(bytes, kConfigContentType);
  }

  void list_images(const httplib::Request&, httplib::Response& res) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& it : ws_.load_manifest().items) {
      arr.push_back({{"id", it.id}, {"has_mask", !it.mask.empty()}, {"has_annotation", !it.annotation.empty()}});
    }
    res.set_content(arr.dump(), "application/json");
  }

  void get_image(const httplib::Request& req, httplib::Response& res) {
    const auto it = item(req);
    res.set_content(read_file((ws_.root() / it.image).string()), "image/x-portable-pixmap");
  }

  void get_mask(const httplib::Request& req, httplib::Response& res) {
    const auto it = item(req);
    if (it.mask.empty()) throw HttpError{404, detail::concat("image '", it.id, "' has no mask")};
    res.set_content(read_file((ws_.root() / it.mask).string()), "image/x-portable-graymap");
  }

  void get_annotation(const httplib::Request& req, httplib::Response& res) {
    const auto it = item(req);
    std::lock_guard lock(annotation_lock(it.id));
    const auto path = ws_.annotation_path(it.id);
    if (!fs::exists(path)) throw HttpError{404, detail::concat("image '", it.id, "' has no annotation")};
    const auto text = read_file(path.string());
    res.set_header("ETag", content_version(text));
    res.set_content(text, kAnnotationContentType);
  }

  // Validates against the workspace config (FormatError -> 400, header N/M
  // mismatch -> 409), then checks the version echo under the per-file lock.
  void put_annotation(const httplib::Request& req, httplib::Response& res) {
    const auto it = item(req);
    const auto cfg = ws_.active_config();
    const auto labels = read_annotation(req.body, cfg);
    const auto bytes = write_annotation(labels);
    {
      std::lock_guard lock(annotation_lock(it.id));
      const auto path = ws_.annotation_path(it.id);
      if (req.has_header("If-Match")) {
        const auto expected = req.get_header_value("If-Match");
        const auto current = fs::exists(path) ? content_version(read_file(path.string())) : std::string("none");
        if (expected != current) {
          throw HttpError{409, detail::concat("annotation '", it.id, "' is at version ", current, ", not ", expected)};
        }
      }
      write_file_atomic(path, bytes);
      if (it.annotation.empty()) {
        std::lock_guard mlock(manifest_mu_);
        auto manifest = ws_.load_manifest();
        for (auto& m : manifest.items) {
          if (m.id == it.id) m.annotation = "annotations/" + it.id + ".ann";
        }
        ws_.save_manifest(manifest);
      }
    }
    res.set_header("ETag", content_version(bytes));
    res.set_content(bytes, kAnnotationContentType);
  }

  void infer(const httplib::Request& req, httplib::Response& res) {
    const auto it = item(req);
    const auto cfg = ws_.active_config();
    const Image img = decode_ppm(read_file((ws_.root() / it.image).string()));
    std::vector<float> probs;
    {
      std::lock_guard lock(model_mu_);
      if (!model_) throw HttpError{503, "no model loaded; start the service with --weights"};
      const Image batch[] = {img};
      const auto x = images_to_tensor<float>(batch, model_->spec().input_size);
      probs = nn::sigmoid(model_->forward(x, nn::Mode::kEval)).vec();
    }
    const auto preds = decode(std::span<const float>(probs), cfg.num_cells(), cfg.num_classes());
    res.set_content(write_predictions(preds), kPredictionContentType);
  }

  void list_reports(const httplib::Request&, httplib::Response& res) {
    res.set_content(nlohmann::json(ws_.list_reports()).dump(), "application/json");
  }

  void get_report(const httplib::Request& req, httplib::Response& res) {
    const auto name = param(req, "name");
    const auto path = ws_.reports_dir() / (name + ".json");
    if (!fs::exists(path)) throw HttpError{404, detail::concat("unknown report '", name, "'")};
    res.set_content(read_file(path.string()), "application/json");
  }

  Workspace ws_;
  mutable std::mutex model_mu_;
  std::unique_ptr<YolicModel<float>> model_;
  std::mutex config_mu_;
  std::mutex manifest_mu_;
  std::mutex locks_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> annotation_locks_;
};

}  // namespace yolic
