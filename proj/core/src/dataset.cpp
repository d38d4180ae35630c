#include "dpsynth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dpsynth/error.hpp"
#include "dpsynth/lensfx.hpp"
#include "dpsynth/parallel.hpp"
#include "dpsynth/render.hpp"
#include "dpsynth/rng.hpp"
#include "json.hpp"

namespace dpsynth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kPresetName = "paper-synthia";

bool safe_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get_as<T>(obj, key, where);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

CameraConfig parse_camera(const json& j, const std::string& where) {
  check_keys(j, where,
             {"id", "focal_length_mm", "f_number", "focus_distance_m", "pixels_per_mm", "max_radius_px", "near_m",
              "distortion"});
  CameraConfig cam;
  cam.id = get_as<std::string>(j, "id", where);
  read_opt(j, "focal_length_mm", where, cam.focal_length_mm);
  read_opt(j, "f_number", where, cam.f_number);
  read_opt(j, "focus_distance_m", where, cam.focus_distance_m);
  read_opt(j, "pixels_per_mm", where, cam.pixels_per_mm);
  if (j.contains("distortion")) {
    const auto c = get_as<std::vector<double>>(j, "distortion", where);
    if (c.size() != 3) throw ConfigError(where + ".distortion: expected [c1, c2, c3]");
    cam.distortion = {c[0], c[1], c[2]};
  }
  if (j.contains("max_radius_px")) {
    if (j.contains("pixels_per_mm")) {
      throw ConfigError(where + ": give either pixels_per_mm or max_radius_px, not both");
    }
    double near_m = 1.0;
    read_opt(j, "near_m", where, near_m);
    try {
      cam.pixels_per_mm = pixels_per_mm_for_max_radius(cam, near_m, get_as<double>(j, "max_radius_px", where));
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return cam;
}

json camera_json(const CameraConfig& cam) {
  return {{"id", cam.id},
          {"focal_length_mm", cam.focal_length_mm},
          {"f_number", cam.f_number},
          {"focus_distance_m", cam.focus_distance_m},
          {"pixels_per_mm", cam.pixels_per_mm},
          {"distortion", {cam.distortion.c1, cam.distortion.c2, cam.distortion.c3}}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void GenerationConfig::validate() const {
  if (bit_depth != 8 && bit_depth != 16) {
    throw ConfigError("bit_depth: must be 8 or 16, got " + std::to_string(bit_depth));
  }
  if (max_layers < 1 || max_layers > kMaxDepthLayers) {
    throw ConfigError("max_layers: must be in [1, " + std::to_string(kMaxDepthLayers) + "], got " +
                      std::to_string(max_layers));
  }
  if (!(depth.scale > 0.0) || !std::isfinite(depth.scale)) throw ConfigError("depth.scale: must be positive");
  if (!(depth.far_sentinel_m > 0.0) || !std::isfinite(depth.far_sentinel_m)) {
    throw ConfigError("depth.far_sentinel_m: must be positive");
  }
  for (std::size_t i = 0; i < noise_sigmas.size(); ++i) {
    if (!(noise_sigmas[i] >= 0.0) || !std::isfinite(noise_sigmas[i])) {
      throw ConfigError("noise_sigmas[" + std::to_string(i) + "]: must be finite and >= 0");
    }
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const auto where = "cameras[" + std::to_string(i) + "] (" + cameras[i].id + ")";
    if (!safe_id(cameras[i].id)) throw ConfigError(where + ": id must be non-empty [A-Za-z0-9._-]");
    if (!ids.insert(cameras[i].id).second) throw ConfigError(where + ": duplicate camera id");
    try {
      cameras[i].validate();
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (!inputs.empty()) {
    if (cameras.empty()) throw ConfigError("cameras: at least one camera is required");
    if (psf.shapes().empty()) throw ConfigError("psf: the shape grid is empty");
  }
  for (const auto& shape : psf.shapes()) {
    try {
      PsfParams(shape, psf.kappa, 1.0).validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("psf: ") + e.what());
    }
  }
  std::set<std::pair<std::string, int>> frames;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& in = inputs[i];
    const auto where = "inputs[" + std::to_string(i) + "]";
    if (!safe_id(in.sequence)) throw ConfigError(where + ".sequence: must be non-empty [A-Za-z0-9._-]");
    if (in.frame < 0) throw ConfigError(where + ".frame: must be >= 0");
    if (!frames.insert({in.sequence, in.frame}).second) {
      throw ConfigError(where + ": duplicate frame " + in.sequence + "/" + std::to_string(in.frame));
    }
    if (!fs::is_regular_file(in.image)) throw ConfigError(where + ".image: no such file " + in.image.string());
    if (!fs::is_regular_file(in.depth)) throw ConfigError(where + ".depth: no such file " + in.depth.string());
  }
}

GenerationConfig synthia_preset() {
  GenerationConfig cfg;
  cfg.cameras = standard_camera_sets();
  cfg.psf = PsfGrids::bank_defaults();
  cfg.noise_sigmas = standard_noise_sigmas();
  cfg.depth.format = DepthFormat::Png16;
  cfg.depth.scale = 0.01;  // centimeters
  cfg.max_layers = kMaxDepthLayers;
  return cfg;
}

GenerationConfig parse_generation_config(const std::string& text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config",
             {"preset", "inputs", "cameras", "psf", "noise_sigmas", "depth", "max_layers", "seed", "output_dir",
              "bit_depth", "linearize_srgb"});
  GenerationConfig cfg;
  if (root.contains("preset")) {
    const auto name = get_as<std::string>(root, "preset", "config");
    if (name != kPresetName) throw ConfigError("preset: unknown preset '" + name + "'");
    cfg = synthia_preset();
  }
  if (root.contains("inputs")) {
    const auto& arr = root.at("inputs");
    if (!arr.is_array()) throw ConfigError("inputs: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto where = "inputs[" + std::to_string(i) + "]";
      check_keys(arr[i], where, {"image", "depth", "sequence", "frame"});
      FrameInput in;
      in.image = resolve(base_dir, get_as<std::string>(arr[i], "image", where));
      in.depth = resolve(base_dir, get_as<std::string>(arr[i], "depth", where));
      read_opt(arr[i], "sequence", where, in.sequence);
      in.frame = static_cast<int>(i);
      read_opt(arr[i], "frame", where, in.frame);
      cfg.inputs.push_back(std::move(in));
    }
  }
  if (root.contains("cameras")) {
    const auto& arr = root.at("cameras");
    if (!arr.is_array()) throw ConfigError("cameras: expected an array");
    cfg.cameras.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) cfg.cameras.push_back(parse_camera(arr[i], "cameras[" + std::to_string(i) + "]"));
  }
  if (root.contains("psf")) {
    const auto& p = root.at("psf");
    check_keys(p, "psf", {"orders", "alphas", "betas", "kappa"});
    read_opt(p, "orders", "psf", cfg.psf.orders);
    read_opt(p, "alphas", "psf", cfg.psf.alphas);
    read_opt(p, "betas", "psf", cfg.psf.betas);
    read_opt(p, "kappa", "psf", cfg.psf.kappa);
  }
  read_opt(root, "noise_sigmas", "config", cfg.noise_sigmas);
  if (root.contains("depth")) {
    const auto& d = root.at("depth");
    check_keys(d, "depth", {"format", "scale", "far_sentinel_m"});
    if (d.contains("format")) {
      const auto name = get_as<std::string>(d, "format", "depth");
      const auto fmt = parse_depth_format(name);
      if (!fmt) throw ConfigError("depth.format: unknown format '" + name + "' (png16 or pfm)");
      cfg.depth.format = *fmt;
    }
    read_opt(d, "scale", "depth", cfg.depth.scale);
    read_opt(d, "far_sentinel_m", "depth", cfg.depth.far_sentinel_m);
  }
  read_opt(root, "max_layers", "config", cfg.max_layers);
  read_opt(root, "seed", "config", cfg.seed);
  cfg.output_dir = root.contains("output_dir") ? resolve(base_dir, get_as<std::string>(root, "output_dir", "config"))
                                              : resolve(base_dir, cfg.output_dir.string());
  read_opt(root, "bit_depth", "config", cfg.bit_depth);
  read_opt(root, "linearize_srgb", "config", cfg.linearize_srgb);
  return cfg;
}

GenerationConfig load_generation_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_generation_config(text.str(), path.parent_path());
}

std::string output_stem(const std::string& sequence, int frame, const std::string& camera_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d", frame);
  return sequence + "/" + buf + "_" + camera_id;
}

GenerateReport generate(const GenerationConfig& config, const GenerateOptions& options) {
  config.validate();
  fs::create_directories(config.output_dir);
  for (const auto& in : config.inputs) fs::create_directories(config.output_dir / in.sequence);

  const auto shapes = config.psf.shapes();
  const std::size_t n_cam = config.cameras.size();
  const std::size_t n_tasks = config.inputs.size() * n_cam;
  struct Outcome {
    json entry;
    std::optional<FrameFailure> failure;
  };
  std::vector<Outcome> outcomes(n_tasks);

  parallel_for(n_tasks, options.jobs, [&](std::size_t t) {
    const FrameInput& in = config.inputs[t / n_cam];
    const CameraConfig& cam = config.cameras[t % n_cam];
    const std::string stem = output_stem(in.sequence, in.frame, cam.id);
    try {
      // Shape and sigma are per frame, shared by every camera set.
      const std::uint64_t frame_key =
          derive_key(config.seed, {hash_string(in.sequence), static_cast<std::uint64_t>(in.frame)});
      const CounterRng rng(frame_key);
      const PsfShape shape = shapes[rng.below(shapes.size(), 0)];
      const double sigma =
          config.noise_sigmas.empty() ? 0.0 : config.noise_sigmas[rng.below(config.noise_sigmas.size(), 1)];

      Image sharp = load_image(in.image);
      if (config.linearize_srgb) sharp = srgb_to_linear(std::move(sharp));
      const DepthMap depth = load_depth(in.depth, config.depth);
      RenderOptions ropt;
      ropt.max_layers = config.max_layers;
      ropt.kappa = config.psf.kappa;
      DpFrame frame = render_dp_frame(sharp, depth, cam, shape, nullptr, ropt);

      WarpStats warp;
      Image left = distort(frame.left, cam.distortion, &warp);
      Image right = distort(frame.right, cam.distortion);
      const Image warped_sharp = distort(frame.sharp, cam.distortion);

      const std::uint64_t noise_id = derive_key(frame_key, {hash_string(cam.id)});
      const NoiseConfig noise{sigma, config.seed};
      left = add_signal_noise(left, noise, {noise_id, 0});
      right = add_signal_noise(right, noise, {noise_id, 1});
      const Image combined = clamp01(add(left, right));

      const fs::path base = config.output_dir / stem;
      const std::map<std::string, std::string> files = {
          {"l", stem + "_l.png"},   {"r", stem + "_r.png"},   {"b", stem + "_b.png"},
          {"s", stem + "_s.png"},   {"rd", stem + "_rd.png"}, {"meta", stem + ".json"}};
      save_image(left, config.output_dir / files.at("l"), config.bit_depth);
      save_image(right, config.output_dir / files.at("r"), config.bit_depth);
      save_image(combined, config.output_dir / files.at("b"), config.bit_depth);
      save_image(warped_sharp, config.output_dir / files.at("s"), config.bit_depth);
      save_image(frame.radial_distance, config.output_dir / files.at("rd"), config.bit_depth);

      json meta = {{"sequence", in.sequence},
                   {"frame", in.frame},
                   {"camera", camera_json(cam)},
                   {"psf", {{"order", shape.order}, {"alpha", shape.alpha}, {"beta", shape.beta}, {"kappa", frame.meta.kappa}}},
                   {"noise_sigma", sigma},
                   {"seed", config.seed},
                   {"frame_key", frame_key},
                   {"layers", frame.meta.layer_count},
                   {"radius_px", {frame.meta.min_radius_px, frame.meta.max_radius_px}},
                   {"diverged_pixels", warp.diverged_pixels},
                   {"bit_depth", config.bit_depth},
                   {"linear", config.linearize_srgb}};
      write_text(config.output_dir / files.at("meta"), meta.dump(2) + "\n");

      outcomes[t].entry = {{"sequence", in.sequence},
                           {"frame", in.frame},
                           {"camera", cam.id},
                           {"image", in.image.generic_string()},
                           {"depth", in.depth.generic_string()},
                           {"files", files}};
    } catch (const std::exception& e) {
      outcomes[t].failure = FrameFailure{in.sequence, in.frame, cam.id, e.what()};
    }
  });

  GenerateReport report;
  json manifest = {{"kappa", config.psf.kappa}, {"seed", config.seed}, {"outputs", json::array()},
                   {"failures", json::array()}};
  for (auto& o : outcomes) {
    if (o.failure) {
      manifest["failures"].push_back({{"sequence", o.failure->sequence},
                                      {"frame", o.failure->frame},
                                      {"camera", o.failure->camera_id},
                                      {"error", o.failure->message}});
      report.failures.push_back(std::move(*o.failure));
    } else {
      manifest["outputs"].push_back(std::move(o.entry));
      ++report.written_quintets;
    }
  }
  report.manifest = config.output_dir / "manifest.json";
  write_text(report.manifest, manifest.dump(2) + "\n");
  return report;
}

namespace {

std::map<std::string, fs::path> collect_images(const fs::path& dir, const std::string& suffix) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext != ".png" && ext != ".pfm") continue;
    fs::path rel = fs::relative(entry.path(), dir);
    std::string id = (rel.parent_path() / rel.stem()).generic_string();
    if (!suffix.empty() && id.size() > suffix.size() && id.compare(id.size() - suffix.size(), suffix.size(), suffix) == 0) {
      id.resize(id.size() - suffix.size());
    }
    if (!out.emplace(id, entry.path()).second) {
      throw InvalidArgument("evaluate: two files map to id '" + id + "' in " + dir.string());
    }
  }
  return out;
}

}  // namespace

EvalReport evaluate(const fs::path& pred_dir, const fs::path& gt_dir, const EvalOptions& options) {
  options.edge.validate();
  const auto preds = collect_images(pred_dir, options.pred_suffix);
  const auto gts = collect_images(gt_dir, options.gt_suffix);
  EvalReport report;
  for (const auto& [id, path] : preds) {
    const auto it = gts.find(id);
    if (it == gts.end()) {
      report.unmatched_pred.push_back(id);
      continue;
    }
    const Image pred = load_image(path);
    const Image gt = load_image(it->second);
    if (!pred.same_shape(gt)) throw InvalidArgument("evaluate: '" + id + "' differs in shape from its ground truth");
    EvalRow row;
    row.id = id;
    row.psnr = psnr(pred, gt);
    row.ssim = ssim(pred, gt);
    row.mae = mae(pred, gt);
    row.edge = edge_loss(pred, gt, options.edge);
    report.rows.push_back(row);
  }
  for (const auto& [id, path] : gts)
    if (!preds.count(id)) report.unmatched_gt.push_back(id);

  report.mean.id = "mean";
  if (!report.rows.empty()) {
    const double n = static_cast<double>(report.rows.size());
    for (const auto& r : report.rows) {
      report.mean.psnr += r.psnr / n;
      report.mean.ssim += r.ssim / n;
      report.mean.mae += r.mae / n;
      report.mean.edge.total += r.edge.total / n;
      report.mean.edge.mse += r.edge.mse / n;
      report.mean.edge.x += r.edge.x / n;
      report.mean.edge.y += r.edge.y / n;
    }
  }
  return report;
}

std::string eval_report_csv(const EvalReport& report) {
  std::string out = "id,psnr,ssim,mae,edge_total,edge_mse,edge_x,edge_y\n";
  const auto line = [&](const EvalRow& r) {
    out += r.id;
    for (double v : {r.psnr, r.ssim, r.mae, r.edge.total, r.edge.mse, r.edge.x, r.edge.y}) out += "," + format_double(v);
    out += "\n";
  };
  for (const auto& r : report.rows) line(r);
  line(report.mean);
  return out;
}

namespace {

std::string entry_stem(const PsfParams& p) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "n%d_a%.2f_b%.2f_r%+.1f", p.order, p.alpha, p.beta, p.radius_px);
  return buf;
}

}  // namespace

Image psf_mosaic(const PsfBank& bank) {
  if (bank.empty()) return {};
  int slot = 1;
  bank.for_each([&](const DpPsf& psf) { slot = std::max(slot, psf.combined.size()); });
  constexpr int kGap = 1;
  constexpr int kBorder = 2;
  const int cell_w = 3 * slot + 2 * kGap;
  const int cell_h = slot;
  const int count = static_cast<int>(bank.size());
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
  const int rows = (count + cols - 1) / cols;
  Image out(cols * (cell_w + kBorder) + kBorder, rows * (cell_h + kBorder) + kBorder, 1);
  int index = 0;
  bank.for_each([&](const DpPsf& psf) {
    const int ox = kBorder + (index % cols) * (cell_w + kBorder);
    const int oy = kBorder + (index / cols) * (cell_h + kBorder);
    const double peak = psf.combined.max();
    const Kernel2D* parts[] = {&psf.left, &psf.right, &psf.combined};
    for (int p = 0; p < 3; ++p) {
      const Kernel2D& k = *parts[p];
      const int off = (slot - k.size()) / 2;
      for (int y = 0; y < k.size(); ++y)
        for (int x = 0; x < k.size(); ++x)
          out.at(ox + p * (slot + kGap) + off + x, oy + off + y) = peak > 0.0 ? std::clamp(k.at(x, y) / peak, 0.0, 1.0) : 0.0;
    }
    ++index;
  });
  return out;
}

BankExport export_psf_bank(const PsfBank& bank, const fs::path& out_dir, bool mosaic) {
  fs::create_directories(out_dir);
  BankExport result;
  json entries = json::array();
  bank.for_each([&](const DpPsf& psf) {
    const std::string stem = entry_stem(psf.params);
    write_pfm(kernel_to_image(psf.left), out_dir / (stem + "_l.pfm"));
    write_pfm(kernel_to_image(psf.right), out_dir / (stem + "_r.pfm"));
    write_pfm(kernel_to_image(psf.combined), out_dir / (stem + "_c.pfm"));
    entries.push_back({{"order", psf.params.order},
                       {"alpha", psf.params.alpha},
                       {"beta", psf.params.beta},
                       {"kappa", psf.params.kappa},
                       {"radius_px", psf.params.radius_px},
                       {"size", psf.combined.size()},
                       {"files", {stem + "_l.pfm", stem + "_r.pfm", stem + "_c.pfm"}}});
    ++result.entries;
  });
  json doc = {{"kappa", bank.kappa()}, {"entries", entries}};
  if (mosaic && !bank.empty()) {
    result.mosaic = out_dir / "mosaic.png";
    save_image(psf_mosaic(bank), *result.mosaic, 8);
    doc["mosaic"] = "mosaic.png";
  }
  result.manifest = out_dir / "bank.json";
  write_text(result.manifest, doc.dump(2) + "\n");
  return result;
}

}  // namespace dpsynth
