// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// yolic: command-line front end. Each verb wraps one library operation.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "yolic/benchkit.hpp"
#include "yolic/cellgeom.hpp"
#include "yolic/decode.hpp"
#include "yolic/evalkit.hpp"
#include "yolic/service.hpp"
#include "yolic/workspace.hpp"
#include "yolic/yolicnet.hpp"

namespace {

using namespace yolic;

enum ExitCode { kOk = 0, kFailure = 1, kFormat = 3, kMismatch = 4 };

struct Options {
  std::string workspace = ".";
  // config
  std::string config;
  std::string output;
  // rasterize
  int width = 224, height = 224;
  // convert / synth
  std::string mask;
  double tau = kDefaultCoverage;
  int count = 8;
  std::uint64_t seed = 0;
  int size = 64;
  // train
  std::string spec = "tiny";
  int input_size = 0;
  int steps = 0;
  int epochs = 150;
  int batch = 32;
  double lr = 1e-3;
  std::vector<int> milestones{100, 125};
  bool no_flip = false;
  bool no_jitter = false;
  std::string trace;
  // infer / eval / quantize / serve
  std::string weights;
  std::vector<std::string> ids;
  double theta = kDefaultTheta;
  std::string pred_dir;
  std::string report = "eval";
  // bench
  int outputs = 0;
  int runs = 20;
  int warmup = 3;
  int threads = 1;
  bool per_layer = false;
  std::string json;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
};

Workspace open_ws(const Options& o) { return Workspace(o.workspace); }

CellConfig workspace_config(const Options& o, const Workspace& ws) {
  return o.config.empty() ? ws.active_config() : resolve_config(o.config, &ws);
}

int cmd_config_validate(const Options& o) {
  const Workspace ws = open_ws(o);
  const auto path = locate_config(o.config, &ws);
  const auto check = check_config_text(read_file(path.string()));
  if (!check.diagnostics.empty()) {
    for (const auto& d : check.diagnostics) std::cerr << path.string() << ": " << d << "\n";
    return kFormat;
  }
  const auto& cfg = *check.config;
  const auto mirror = mirror_config(cfg);
  std::printf("%s: valid, N=%zu M=%zu C=%zu, mirror permutation %s\n", cfg.name.c_str(), cfg.num_cells(),
              cfg.num_classes(), cfg.num_outputs(), mirror.perm ? "present" : "absent (flip disabled)");
  return kOk;
}

int cmd_config_mirror(const Options& o) {
  const Workspace ws = open_ws(o);
  const auto cfg = resolve_config(o.config, &ws);
  const auto m = mirror_config(cfg);
  if (m.perm) {
    std::string line = "permutation:";
    for (auto p : *m.perm) line += " " + std::to_string(p);
    std::printf("%s\n", line.c_str());
  } else {
    std::printf("permutation: absent\n");
  }
  if (!o.output.empty()) write_file(o.output, save_config(m.config));
  return kOk;
}

int cmd_rasterize(const Options& o) {
  const Workspace ws = open_ws(o);
  const auto cfg = resolve_config(o.config, &ws);
  const auto set = rasterize(cfg, o.width, o.height);
  for (std::size_t i = 0; i < set.masks.size(); ++i) std::printf("cell %zu: %zu px\n", i, set.area(i));
  if (!o.output.empty()) {
    // Pixel value = index (mod 255) of the last cell containing it; 255 = none.
    ClassIdMask label_map(o.width, o.height);
    for (std::size_t i = 0; i < set.masks.size(); ++i) {
      for (std::size_t p = 0; p < set.masks[i].size(); ++p) {
        if (set.masks[i][p]) label_map.ids[p] = static_cast<std::uint8_t>(i % 255);
      }
    }
    write_file(o.output, encode_pgm(label_map));
  }
  return kOk;
}

int cmd_convert(const Options& o) {
  if (!o.mask.empty()) {
    const Workspace ws = open_ws(o);
    const auto cfg = resolve_config(o.config, &ws);
    const auto labels = labels_from_mask(decode_pgm(read_file(o.mask)), cfg, o.tau);
    const auto text = write_annotation(labels);
    if (o.output.empty()) {
      std::fputs(text.c_str(), stdout);
    } else {
      write_file(o.output, text);
    }
    return kOk;
  }
  const Workspace ws = open_ws(o);
  const auto cfg = workspace_config(o, ws);
  auto manifest = ws.load_manifest();
  int converted = 0;
  for (auto& it : manifest.items) {
    if (it.mask.empty()) continue;
    const auto labels = labels_from_mask(decode_pgm(read_file((ws.root() / it.mask).string())), cfg, o.tau);
    write_file_atomic(ws.annotation_path(it.id), write_annotation(labels));
    it.annotation = "annotations/" + it.id + ".ann";
    ++converted;
  }
  manifest.tau = o.tau;
  ws.save_manifest(manifest);
  std::printf("converted %d masks with tau=%g\n", converted, o.tau);
  return kOk;
}

int cmd_synth(const Options& o) {
  const auto ws = Workspace::create(o.workspace);
  const auto cfg = resolve_config(o.config, &ws);
  const auto ids = synth_into(ws, cfg, o.count, o.seed, o.size, o.tau);
  std::printf("wrote %zu synthetic scenes (%dx%d, config %s) to %s\n", ids.size(), o.size, o.size, cfg.name.c_str(),
              ws.root().string().c_str());
  return kOk;
}

int cmd_train(const Options& o) {
  const Workspace ws = open_ws(o);
  const auto cfg = workspace_config(o, ws);
  auto labeled = load_labeled(ws, cfg);
  YOLIC_CHECK(!labeled.empty(), Error, "workspace has no annotated images");
  std::vector<Sample> data;
  for (auto& [id, s] : labeled) data.push_back(std::move(s));

  const auto spec = ModelSpec::preset_named(o.spec, static_cast<int>(cfg.num_outputs()), o.input_size);
  auto model = build_model<float>(spec, o.seed);
  TrainConfig tc;
  tc.lr = o.lr;
  tc.milestones = o.milestones;
  tc.batch_size = o.batch;
  tc.epochs = o.epochs;
  tc.max_steps = o.steps;
  tc.flip = !o.no_flip;
  tc.jitter = !o.no_jitter;
  tc.seed = o.seed;
  const auto perm = mirror_config(cfg).perm;
  if (tc.flip && !perm) std::fprintf(stderr, "note: config %s has no mirror permutation; flip disabled\n", cfg.name.c_str());

  const auto trace = train(model, std::span<const Sample>(data), tc, perm, [](int epoch, double loss, double lr) {
    if (epoch % 10 == 0) std::printf("epoch %4d  lr %.1e  loss %.6f\n", epoch, lr, loss);
  });

  const fs::path weights = o.output.empty() ? ws.weights_dir() / "model.yw" : fs::path(o.output);
  const fs::path trace_path = o.trace.empty() ? ws.reports_dir() / "train_loss.csv" : fs::path(o.trace);
  write_file_atomic(weights, save_weights(model, cfg.name));
  std::string csv = "epoch,lr,loss\n";
  char buf[96];
  for (std::size_t e = 0; e < trace.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", e, trace.epoch_lr[e], trace.epoch_loss[e]);
    csv += buf;
  }
  write_file_atomic(trace_path, csv);
  std::printf("trained %zu steps over %zu epochs: loss %.6f -> %.6f\nweights: %s\nloss trace: %s\n",
              trace.step_loss.size(), trace.epoch_loss.size(), trace.epoch_loss.front(), trace.epoch_loss.back(),
              weights.string().c_str(), trace_path.string().c_str());
  return kOk;
}

int cmd_infer(const Options& o) {
  const Workspace ws = open_ws(o);
  const auto cfg = workspace_config(o, ws);
  auto model = load_weights<float>(read_file(o.weights), static_cast<int>(cfg.num_outputs()));
  const fs::path out = o.output.empty() ? ws.root() / "predictions" : fs::path(o.output);
  fs::create_directories(out);
  const auto manifest = ws.load_manifest();
  std::vector<std::string> ids = o.ids;
  if (ids.empty()) {
    for (const auto& it : manifest.items) ids.push_back(it.id);
  }
  for (const auto& id : ids) {
    const auto* it = manifest.find(id);
    YOLIC_CHECK(it, Error, "unknown image id '", id, "'");
    const Image batch[] = {decode_ppm(read_file((ws.root() / it->image).string()))};
    const auto probs = predict_probs(model, batch);
    const auto preds = decode(std::span<const float>(probs.vec()), cfg.num_cells(), cfg.num_classes(), o.theta);
    write_file_atomic(out / (id + ".pred"), write_predictions(preds));
  }
  std::printf("wrote %zu prediction files to %s\n", ids.size(), out.string().c_str());
  return kOk;
}

int cmd_eval(const Options& o) {
  const Workspace ws = open_ws(o);
  const auto cfg = workspace_config(o, ws);
  const fs::path dir = o.pred_dir.empty() ? ws.root() / "predictions" : fs::path(o.pred_dir);
  MetricCounts counts(cfg.num_cells(), cfg.num_classes());
  for (const auto& it : ws.load_manifest().items) {
    if (it.annotation.empty()) continue;
    const auto gt = read_annotation(read_file((ws.root() / it.annotation).string()), cfg);
    std::vector<CellPrediction> preds;
    if (fs::exists(dir / (it.id + ".pred"))) {
      const auto pf = read_predictions(read_file((dir / (it.id + ".pred")).string()));
      YOLIC_CHECK(pf.n_cells == cfg.num_cells() && pf.n_classes == cfg.num_classes(), MismatchError, it.id,
                  ".pred declares N=", pf.n_cells, " M=", pf.n_classes, " but the config has N=", cfg.num_cells(),
                  " M=", cfg.num_classes());
      preds = predictions_from_file(pf);
    } else if (fs::exists(dir / (it.id + ".ann"))) {
      preds = labels_to_predictions(read_annotation(read_file((dir / (it.id + ".ann")).string()), cfg), o.theta);
    } else {
      throw Error(detail::concat("no prediction for image '", it.id, "' in ", dir.string()));
    }
    accumulate(counts, gt, preds);
  }
  YOLIC_CHECK(counts.images > 0, Error, "workspace has no annotated images");
  const auto report = finalize(counts, cfg.class_names);
  std::fputs(format_report(report).c_str(), stdout);
  YOLIC_CHECK(is_safe_name(o.report), Error, "report name '", o.report, "' is not a safe file name");
  const auto path = ws.reports_dir() / (o.report + ".json");
  write_file_atomic(path, report_to_json(report).dump(2) + "\n");
  std::printf("report: %s\n", path.string().c_str());
  return kOk;
}

int cmd_bench(const Options& o) {
  std::optional<YolicModel<float>> model;
  std::size_t n_cells = 0, n_classes = 0;
  if (!o.weights.empty()) {
    model.emplace(load_weights<float>(read_file(o.weights)));
  }
  if (!o.config.empty()) {
    const Workspace ws = open_ws(o);
    const auto cfg = resolve_config(o.config, &ws);
    n_cells = cfg.num_cells();
    n_classes = cfg.num_classes();
  } else {
    YOLIC_CHECK(o.outputs > 0 || model, Error, "bench needs --config, --outputs or --weights");
    n_cells = 1;
    n_classes = static_cast<std::size_t>((model ? model->spec().n_outputs : o.outputs) - 1);
  }
  if (!model) {
    model.emplace(build_model<float>(
        ModelSpec::preset_named(o.spec, static_cast<int>(n_cells * (n_classes + 1)), o.input_size), o.seed));
  }
  auto report = cost_report(*model);
  if (o.runs > 0) report.latency = bench_latency(*model, n_cells, n_classes, o.runs, o.warmup, o.threads);
  std::fputs(format_cost_report(report, o.per_layer).c_str(), stdout);
  if (!o.json.empty()) write_file(o.json, cost_report_to_json(report).dump(2) + "\n");
  return kOk;
}

int cmd_quantize(const Options& o) {
  const Workspace ws = open_ws(o);
  const auto cfg = workspace_config(o, ws);
  auto model = load_weights<float>(read_file(o.weights), static_cast<int>(cfg.num_outputs()));
  auto q = quantize_int8(model);
  const fs::path out = o.output.empty() ? ws.weights_dir() / "model.q8" : fs::path(o.output);
  write_file_atomic(out, save_quantized(q, cfg.name));

  std::vector<Image> images;
  for (auto& [id, s] : load_labeled(ws, cfg)) images.push_back(std::move(s.image));
  if (!images.empty()) {
    const auto x = images_to_tensor<float>(images, model.spec().input_size);
    const auto pf = nn::sigmoid(model.forward(x, nn::Mode::kEval));
    const auto pq = nn::sigmoid(q.forward(x));
    const double agree = decode_agreement(pf, pq, cfg.num_cells(), cfg.num_classes());
    std::printf("decode agreement with float model: %.2f%% of %zu cells\n", 100.0 * agree,
                images.size() * cfg.num_cells());
  }
  std::printf("quantized weights: %s\n", out.string().c_str());
  return kOk;
}

int cmd_serve(const Options& o) {
  Service service(open_ws(o));
  service.workspace().load_manifest();
  if (!o.weights.empty()) service.load_model(read_file(o.weights));
  httplib::Server srv;
  service.mount(srv);
  std::printf("serving %s on http://%s:%d\n", fs::absolute(o.workspace).string().c_str(), o.host.c_str(), o.port);
  std::fflush(stdout);
  YOLIC_CHECK(srv.listen(o.host, o.port), Error, "cannot listen on ", o.host, ":", o.port);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"yolic: cell-wise multi-label localization toolkit"};
  app.require_subcommand(1);
  Options o;
  std::function<int(const Options&)> action;
  auto bind = [&](CLI::App* sub, int (*fn)(const Options&)) { sub->callback([&action, fn] { action = fn; }); };
  auto add_ws = [&](CLI::App* sub) { sub->add_option("-w,--workspace", o.workspace, "Workspace root")->capture_default_str(); };

  auto* config = app.add_subcommand("config", "Validate or mirror a cell configuration");
  config->require_subcommand(1);
  auto* validate = config->add_subcommand("validate", "Check every invariant; echo N, M and C");
  validate->add_option("config", o.config, "Config name or path")->required();
  add_ws(validate);
  bind(validate, cmd_config_validate);
  auto* mirror = config->add_subcommand("mirror", "Mirror x -> 1-x and report the cell permutation");
  mirror->add_option("config", o.config, "Config name or path")->required();
  mirror->add_option("-o,--output", o.output, "Write the mirrored config here");
  add_ws(mirror);
  bind(mirror, cmd_config_mirror);

  auto* rast = app.add_subcommand("rasterize", "Rasterize cells and report per-cell pixel areas");
  rast->add_option("config", o.config, "Config name or path")->required();
  rast->add_option("--width", o.width)->capture_default_str()->check(CLI::PositiveNumber);
  rast->add_option("--height", o.height)->capture_default_str()->check(CLI::PositiveNumber);
  rast->add_option("-o,--output", o.output, "Write a PGM cell-index map");
  add_ws(rast);
  bind(rast, cmd_rasterize);

  auto* convert = app.add_subcommand("convert", "Pixel class masks -> yolic-ann/1 annotations");
  convert->add_option("--config", o.config, "Config name or path (default: workspace config)");
  convert->add_option("--mask", o.mask, "Convert a single P5 mask instead of the whole workspace");
  convert->add_option("--tau", o.tau, "Coverage threshold")->capture_default_str()->check(CLI::Range(1e-9, 1.0));
  convert->add_option("-o,--output", o.output, "Annotation output for --mask (default: stdout)");
  add_ws(convert);
  bind(convert, cmd_convert);

  auto* synth = app.add_subcommand("synth", "Generate synthetic scenes with masks and annotations");
  synth->add_option("--config", o.config, "Config name or path")->required();
  synth->add_option("--count", o.count)->capture_default_str()->check(CLI::PositiveNumber);
  synth->add_option("--seed", o.seed)->capture_default_str();
  synth->add_option("--size", o.size, "Image side in pixels")->capture_default_str()->check(CLI::Range(8, 4096));
  synth->add_option("--tau", o.tau, "Coverage threshold")->capture_default_str()->check(CLI::Range(1e-9, 1.0));
  add_ws(synth);
  bind(synth, cmd_synth);

  auto* train_cmd = app.add_subcommand("train", "Train on the workspace's annotated images");
  train_cmd->add_option("--spec", o.spec, "Model preset: tiny or table1")->capture_default_str();
  train_cmd->add_option("--input-size", o.input_size, "Input side (default: preset's)");
  train_cmd->add_option("--steps", o.steps, "Stop after this many optimizer steps");
  train_cmd->add_option("--epochs", o.epochs, "Epochs when --steps is not given")->capture_default_str();
  train_cmd->add_option("--batch", o.batch)->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", o.lr)->capture_default_str();
  train_cmd->add_option("--milestones", o.milestones, "Epochs where lr drops by 10x")->capture_default_str();
  train_cmd->add_option("--seed", o.seed)->capture_default_str();
  train_cmd->add_flag("--no-flip", o.no_flip, "Disable horizontal flip augmentation");
  train_cmd->add_flag("--no-jitter", o.no_jitter, "Disable color jitter");
  train_cmd->add_option("--config", o.config, "Config name or path (default: workspace config)");
  train_cmd->add_option("-o,--output", o.output, "Weights file (default: <ws>/weights/model.yw)");
  train_cmd->add_option("--trace", o.trace, "Loss trace CSV (default: <ws>/reports/train_loss.csv)");
  add_ws(train_cmd);
  bind(train_cmd, cmd_train);

  auto* infer = app.add_subcommand("infer", "Write yolic-pred/1 predictions for workspace images");
  infer->add_option("--weights", o.weights)->required();
  infer->add_option("--id", o.ids, "Image ids (default: all)");
  infer->add_option("--theta", o.theta, "Decision threshold")->capture_default_str();
  infer->add_option("--config", o.config, "Config name or path (default: workspace config)");
  infer->add_option("-o,--output", o.output, "Output directory (default: <ws>/predictions)");
  add_ws(infer);
  bind(infer, cmd_infer);

  auto* eval = app.add_subcommand("eval", "Score predictions (.pred or .ann per image id) against annotations");
  eval->add_option("--pred", o.pred_dir, "Prediction directory (default: <ws>/predictions)");
  eval->add_option("--name", o.report, "Report name under <ws>/reports")->capture_default_str();
  eval->add_option("--theta", o.theta, "Threshold for .ann inputs")->capture_default_str();
  eval->add_option("--config", o.config, "Config name or path (default: workspace config)");
  add_ws(eval);
  bind(eval, cmd_eval);

  auto* bench = app.add_subcommand("bench", "Parameter/FLOP accounting and single-image latency");
  bench->add_option("--spec", o.spec, "Model preset: tiny or table1")->capture_default_str();
  bench->add_option("--config", o.config, "Size the head from this config");
  bench->add_option("--outputs", o.outputs, "Head width C when no config is given");
  bench->add_option("--weights", o.weights, "Benchmark a trained model instead of a fresh one");
  bench->add_option("--input-size", o.input_size, "Input side (default: preset's)");
  bench->add_option("--runs", o.runs, "Timed runs (0 = counts only)")->capture_default_str();
  bench->add_option("--warmup", o.warmup)->capture_default_str();
  bench->add_option("--threads", o.threads)->capture_default_str();
  bench->add_flag("--per-layer", o.per_layer, "Print the per-layer table");
  bench->add_option("--json", o.json, "Also write the report as JSON");
  add_ws(bench);
  bind(bench, cmd_bench);

  auto* quant = app.add_subcommand("quantize", "INT8 post-training quantization with decode agreement");
  quant->add_option("--weights", o.weights)->required();
  quant->add_option("--config", o.config, "Config name or path (default: workspace config)");
  quant->add_option("-o,--output", o.output, "Output file (default: <ws>/weights/model.q8)");
  add_ws(quant);
  bind(quant, cmd_quantize);

  auto* serve = app.add_subcommand("serve", "HTTP service over the workspace");
  serve->add_option("--weights", o.weights, "Model for /api/infer");
  serve->add_option("--host", o.host)->capture_default_str();
  serve->add_option("--port", o.port)->capture_default_str();
  add_ws(serve);
  bind(serve, cmd_serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action(o);
  } catch (const MismatchError& e) {
    std::cerr << "yolic: mismatch: " << e.what() << "\n";
    return kMismatch;
  } catch (const FormatError& e) {
    std::cerr << "yolic: format error: " << e.what() << "\n";
    return kFormat;
  } catch (const std::exception& e) {
    std::cerr << "yolic: error: " << e.what() << "\n";
    return kFailure;
  }
}
