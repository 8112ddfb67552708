#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pixsub/cascade.hpp"
#include "pixsub/config.hpp"
#include "pixsub/image_io.hpp"

namespace pixsub {

namespace detail {

namespace fs = std::filesystem;

inline bool image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

// A directory yields its image files sorted by name; a file yields itself.
inline std::vector<fs::path> list_inputs(const std::string& spec) {
  if (spec.empty()) throw ConfigError("no input path given");
  const fs::path p(spec);
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(p))
      if (entry.is_regular_file() && image_extension(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no images found in " + spec);
    return files;
  }
  if (!fs::exists(p)) throw IoError("input does not exist: " + spec);
  return {p};
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          std::ostringstream os;
          os << "\\u" << std::hex << std::setw(4) << std::setfill('0') << static_cast<int>(c);
          out += os.str();
        } else {
          out += c;
        }
    }
  }
  return out;
}

// Full-precision number, or the string "inf" (JSON has no infinity literal).
inline std::string json_number(double v) {
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string format_metric(double v, int precision = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline std::string residual_json(const ResidualReport& r) {
  std::ostringstream os;
  os << "{\"mse\": " << json_number(r.mse) << ", \"psnr\": " << json_number(r.psnr)
     << ", \"mse_8bit\": " << json_number(r.mse_8bit)
     << ", \"psnr_8bit\": " << json_number(r.psnr_8bit) << "}";
  return os.str();
}

inline void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << content;
  if (!os) throw IoError("failed writing " + path.string());
}

inline std::string degrade_mode_name(DegradeMode m) {
  return m == DegradeMode::GaussianDecimate ? "gaussian-decimate" : "bicubic";
}

}  // namespace detail

// degrade: turn HR images into LR observations plus a manifest of what was done.
inline int cmd_degrade(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const DegradeSpec spec = cfg.degrade_spec();
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  const std::string out_dir = cfg.get("io.out_dir");
  if (out_dir.empty()) throw ConfigError("degrade needs io.out_dir");
  fs::create_directories(out_dir);

  const auto inputs = detail::list_inputs(cfg.get("io.input"));
  std::ostringstream manifest;
  manifest << "{\n  \"scale\": " << spec.scale.s << ",\n  \"mode\": \""
           << detail::degrade_mode_name(spec.mode) << "\",\n  \"sigma\": "
           << detail::json_number(spec.effective_sigma()) << ",\n  \"kernel_size\": "
           << (spec.mode == DegradeMode::GaussianDecimate ? spec.effective_kernel_size() : 0)
           << ",\n  \"noise_level\": " << detail::json_number(spec.noise_level)
           << ",\n  \"seed\": " << seed << ",\n  \"images\": [\n";

  for (size_t i = 0; i < inputs.size(); ++i) {
    const Image hr = load_image(inputs[i].string());
    const std::uint64_t img_seed = detail::mix_seed(seed, i);
    const Image lr = degrade(hr, spec, img_seed);
    const std::string name = inputs[i].stem().string() + "_x" + std::to_string(spec.scale.s) + ".png";
    const fs::path out_path = fs::path(out_dir) / name;
    save_image(lr, out_path.string());
    std::cout << inputs[i].filename().string() << " -> " << name << " (" << lr.width << "x"
              << lr.height << ")\n";
    manifest << "    {\"source\": \"" << detail::json_escape(inputs[i].filename().string())
             << "\", \"output\": \"" << detail::json_escape(name) << "\", \"width\": " << lr.width
             << ", \"height\": " << lr.height << ", \"seed\": " << img_seed << "}"
             << (i + 1 < inputs.size() ? ",\n" : "\n");
  }
  manifest << "  ]\n}\n";
  detail::write_text_file(fs::path(out_dir) / "manifest.json", manifest.str());
  std::cout << inputs.size() << " image(s) degraded, manifest.json written\n";
  return 0;
}

// sr: run the cascade on one LR image. Optional per-stage trace dump and a
// final consistency check.
inline int cmd_sr(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const std::string in_path = cfg.get("io.input");
  const std::string out_path = cfg.get("io.output");
  if (in_path.empty()) throw ConfigError("sr needs io.input");
  if (out_path.empty()) throw ConfigError("sr needs io.output");

  const CascadeConfig ccfg = cfg.cascade_config();
  const Image lr = load_image(in_path);
  const CascadeResult res = run_cascade(lr, ccfg);

  const fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_image(res.output, out_path);
  std::cout << "sr: " << in_path << " -> " << out_path << " (" << res.output.width << "x"
            << res.output.height << ", " << ccfg.stages_count << " stage(s))\n";

  if (cfg.get_bool("sr.trace")) {
    const fs::path base = out.parent_path() / out.stem();
    std::ostringstream js;
    js << "{\n  \"stages\": [\n";
    for (size_t t = 0; t < res.stages.size(); ++t) {
      const StageTrace& st = res.stages[t];
      const std::string tag = "_stage" + std::to_string(t + 1);
      save_image(st.refined, (base.string() + tag + "_refined.png"));
      save_image(st.blurred, (base.string() + tag + "_blurred.png"));
      save_image(st.substituted, (base.string() + tag + "_substituted.png"));
      js << "    {\"stage\": " << t + 1
         << ", \"refined_residual\": " << detail::residual_json(st.refined_residual)
         << ", \"substituted_residual\": " << detail::residual_json(st.substituted_residual)
         << ", \"substituted_count\": " << st.record.substituted_count
         << ", \"expected_count\": " << st.record.expected_count
         << ", \"max_injected_delta\": " << detail::json_number(st.record.max_injected_delta)
         << ", \"iterations\": " << st.iterations << ", \"guard_tripped\": "
         << (st.guard_tripped ? "true" : "false") << "}" << (t + 1 < res.stages.size() ? ",\n" : "\n");
    }
    js << "  ]\n}\n";
    detail::write_text_file(base.string() + "_trace.json", js.str());
    std::cout << "trace: " << res.stages.size() << " stage(s) written to "
              << (base.string() + "_trace.json") << "\n";
  }

  if (cfg.get_bool("sr.check")) {
    for (size_t t = 0; t < res.stages.size(); ++t) {
      const ResidualReport& rep = res.stages[t].substituted_residual;
      std::cout << "check: stage " << t + 1 << " substituted residual mse="
                << detail::json_number(rep.mse) << " exact=" << (rep.mse == 0.0 ? "yes" : "no")
                << "\n";
    }
    const ResidualReport& out_rep = res.stages.back().refined_residual;
    std::cout << "check: output formation residual mse=" << detail::json_number(out_rep.mse)
              << " psnr=" << detail::format_metric(out_rep.psnr) << "\n";
  }

  if (res.guard_tripped) {
    std::cerr << "warning: divergence guard tripped; wrote best iterate\n";
    return 4;
  }
  return 0;
}

namespace detail {

// Find the partner of an HR image inside `dir`: same stem, or stem_x<s>.
inline fs::path find_partner(const fs::path& dir, const std::string& stem, int scale) {
  const std::string suffixed = stem + "_x" + std::to_string(scale);
  for (const std::string& candidate : {suffixed, stem})
    for (const char* ext : {".png", ".ppm", ".pgm"}) {
      const fs::path p = dir / (candidate + ext);
      if (fs::exists(p)) return p;
    }
  return {};
}

}  // namespace detail

// train: fit the cascade nets on HR/LR pairs (LR generated on the fly when no
// LR directory is given), write per-stage weight files and a loss CSV.
inline int cmd_train(const RunConfig& cfg_in) {
  namespace fs = std::filesystem;
  // stages default to trainable refiners here; explicit non-toynet kinds
  // still reach train_cascade and fail there
  RunConfig cfg = cfg_in;
  for (int t = 1; t <= cfg.get_int("cascade.T"); ++t) {
    const std::string key = "stage" + std::to_string(t) + ".kind";
    if (!cfg.is_set(key)) cfg.set(key, "toynet");
  }

  const std::string hr_dir = cfg.get("io.hr");
  if (hr_dir.empty()) throw ConfigError("train needs io.hr");
  const std::string lr_dir = cfg.get("io.lr");
  const std::string prefix = cfg.get("io.weights");
  if (prefix.empty()) throw ConfigError("train needs io.weights (output prefix)");

  const CascadeConfig ccfg = cfg.cascade_config();
  const TrainOptions opts = cfg.train_options();
  const DegradeSpec dspec = cfg.degrade_spec();
  const int patch = cfg.get_int("train.patch");
  if (patch < 4) throw ConfigError("train.patch must be >= 4");
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  const int s = ccfg.degrade.scale.s;

  const auto hr_files = detail::list_inputs(hr_dir);
  std::vector<TrainSample> samples;
  int skipped = 0;
  for (size_t i = 0; i < hr_files.size(); ++i) {
    Image hr = load_image(hr_files[i].string());
    Image lr;
    if (lr_dir.empty()) {
      lr = degrade(hr, dspec, detail::mix_seed(seed, i));
    } else {
      const fs::path lp = detail::find_partner(lr_dir, hr_files[i].stem().string(), s);
      if (lp.empty()) {
        std::cerr << "warning: no LR partner for " << hr_files[i].filename().string()
                  << ", skipping\n";
        ++skipped;
        continue;
      }
      lr = load_image(lp.string());
      if (lr.width * s != hr.width || lr.height * s != hr.height)
        throw DimensionError("LR/HR pair dimensions do not match for " +
                             hr_files[i].filename().string());
    }
    // one seeded patch per image; small images are used whole
    const int pw = std::min(patch, lr.width), ph = std::min(patch, lr.height);
    std::mt19937_64 rng(detail::mix_seed(opts.seed, 1000 + i));
    const int x0 = pw < lr.width
                       ? static_cast<int>(std::uniform_int_distribution<int>(0, lr.width - pw)(rng))
                       : 0;
    const int y0 = ph < lr.height
                       ? static_cast<int>(std::uniform_int_distribution<int>(0, lr.height - ph)(rng))
                       : 0;
    samples.push_back({crop(lr, x0, y0, pw, ph), crop(hr, x0 * s, y0 * s, pw * s, ph * s)});
  }
  if (samples.empty()) throw DataError("no usable training pairs");
  if (skipped > 0) std::cerr << "warning: skipped " << skipped << " unpaired image(s)\n";

  const std::string loss_kind = cfg.get("train.loss");
  TrainResult result;
  if (loss_kind == "soft") {
    result = train_soft_constraint(samples, ccfg, opts, cfg.get_double("train.lambda"));
  } else if (loss_kind == "l1") {
    result = train_cascade(samples, ccfg, opts);
  } else {
    throw ConfigError("train.loss must be l1 or soft, got '" + loss_kind + "'");
  }

  const size_t to_save = loss_kind == "soft"
                             ? size_t{1}
                             : (ccfg.shared_weights ? std::min<size_t>(result.nets.size(), 2)
                                                    : result.nets.size());
  for (size_t t = 0; t < to_save; ++t) {
    const std::string path = prefix + "_stage" + std::to_string(t + 1) + ".pxw";
    save_weights(result.nets[t], path);
    std::cout << "weights: " << path << "\n";
  }

  const std::string log_path = cfg.get("io.log");
  if (!log_path.empty()) {
    std::ostringstream csv;
    csv << "stage,step,loss\n" << std::setprecision(17);
    for (const TrainLogEntry& e : result.log) csv << e.stage << "," << e.step << "," << e.loss << "\n";
    detail::write_text_file(log_path, csv.str());
    std::cout << "log: " << log_path << " (" << result.log.size() << " steps)\n";
  }

  // first/last loss per stage, for a quick read on convergence
  for (size_t t = 0; t < to_save; ++t) {
    double first = 0.0, last = 0.0;
    bool seen = false;
    for (const TrainLogEntry& e : result.log)
      if (e.stage == static_cast<int>(t + 1)) {
        if (!seen) first = e.loss;
        last = e.loss;
        seen = true;
      }
    if (seen)
      std::cout << "stage " << t + 1 << ": loss " << detail::format_metric(first, 6) << " -> "
                << detail::format_metric(last, 6) << "\n";
  }
  return 0;
}

// eval: PSNR/SSIM table for SR results against HR ground truth; optionally a
// consistency table against the LR observations they should reproduce.
inline int cmd_eval(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const std::string sr_dir = cfg.get("io.sr");
  const std::string hr_dir = cfg.get("io.hr");
  if (sr_dir.empty() || hr_dir.empty()) throw ConfigError("eval needs io.sr and io.hr");
  const std::string lr_dir = cfg.get("io.lr");
  const EvalProtocol protocol = cfg.eval_protocol();
  const int scale = ScaleFactor(cfg.get_int("scale")).s;
  const std::string residual_mode = cfg.get("eval.residual");
  if (residual_mode != "float" && residual_mode != "8bit")
    throw ConfigError("eval.residual must be float or 8bit, got '" + residual_mode + "'");

  const auto hr_files = detail::list_inputs(hr_dir);
  struct Row {
    std::string name;
    MetricsReport metrics;
    bool has_regen = false;
    ResidualReport regen;
  };
  std::vector<Row> rows;
  int skipped = 0;

  for (const auto& hf : hr_files) {
    const std::string stem = hf.stem().string();
    const fs::path sp = detail::find_partner(fs::path(sr_dir), stem, scale);
    if (sp.empty()) {
      std::cerr << "warning: no SR result for " << hf.filename().string() << ", skipping\n";
      ++skipped;
      continue;
    }
    const Image hr = load_image(hf.string());
    const Image sr = load_image(sp.string());
    if (!sr.same_shape(hr)) {
      std::cerr << "warning: " << sp.filename().string() << " does not match HR dimensions, skipping\n";
      ++skipped;
      continue;
    }
    Row row;
    row.name = stem;
    row.metrics = evaluate_sr(sr, hr, scale, protocol);
    if (!lr_dir.empty()) {
      const fs::path lp = detail::find_partner(fs::path(lr_dir), stem, scale);
      if (lp.empty()) {
        std::cerr << "warning: no LR observation for " << stem << "\n";
      } else {
        row.has_regen = true;
        row.regen = constraint_residual(sr, load_image(lp.string()), cfg.degrade_spec());
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("eval: no usable SR/HR pairs");

  size_t name_w = 5;
  for (const Row& r : rows) name_w = std::max(name_w, r.name.size());
  std::cout << std::left << std::setw(static_cast<int>(name_w) + 2) << "image" << std::right
            << std::setw(9) << "psnr" << std::setw(9) << "ssim" << "\n";
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (const Row& r : rows) {
    std::cout << std::left << std::setw(static_cast<int>(name_w) + 2) << r.name << std::right
              << std::setw(9) << detail::format_metric(r.metrics.psnr, 2) << std::setw(9)
              << detail::format_metric(r.metrics.ssim, 4) << "\n";
    psnr_sum += r.metrics.psnr;
    ssim_sum += r.metrics.ssim;
  }
  const double n = static_cast<double>(rows.size());
  std::cout << std::left << std::setw(static_cast<int>(name_w) + 2) << "mean" << std::right
            << std::setw(9) << detail::format_metric(psnr_sum / n, 2) << std::setw(9)
            << detail::format_metric(ssim_sum / n, 4) << "\n";

  const bool any_regen = std::any_of(rows.begin(), rows.end(), [](const Row& r) { return r.has_regen; });
  if (any_regen) {
    const bool bits8 = residual_mode == "8bit";
    std::cout << "\nobservation consistency (regenerated LR vs observed LR, " << residual_mode
              << " mode)\n";
    std::cout << std::left << std::setw(static_cast<int>(name_w) + 2) << "image" << std::right
              << std::setw(14) << "mse" << std::setw(12) << "psnr" << "\n";
    for (const Row& r : rows) {
      if (!r.has_regen) continue;
      const double m = bits8 ? r.regen.mse_8bit : r.regen.mse;
      const double p = bits8 ? r.regen.psnr_8bit : r.regen.psnr;
      std::cout << std::left << std::setw(static_cast<int>(name_w) + 2) << r.name << std::right
                << std::setw(14) << detail::format_metric(m, 6) << std::setw(12)
                << detail::format_metric(p, 2) << "\n";
    }
  }

  const std::string json_path = cfg.get("io.output");
  if (!json_path.empty()) {
    std::ostringstream js;
    js << "{\n  \"protocol\": \"" << cfg.get("eval.protocol") << "\",\n  \"scale\": " << scale
       << ",\n  \"images\": [\n";
    for (size_t i = 0; i < rows.size(); ++i) {
      const Row& r = rows[i];
      js << "    {\"name\": \"" << detail::json_escape(r.name)
         << "\", \"psnr\": " << detail::json_number(r.metrics.psnr)
         << ", \"ssim\": " << detail::json_number(r.metrics.ssim);
      if (r.has_regen) js << ", \"regen\": " << detail::residual_json(r.regen);
      js << "}" << (i + 1 < rows.size() ? ",\n" : "\n");
    }
    js << "  ],\n  \"mean\": {\"psnr\": " << detail::json_number(psnr_sum / n)
       << ", \"ssim\": " << detail::json_number(ssim_sum / n) << "}\n}\n";
    detail::write_text_file(json_path, js.str());
    std::cout << "report: " << json_path << "\n";
  }
  if (skipped > 0) std::cerr << skipped << " image(s) skipped\n";
  return 0;
}

// check-constraint: how consistent is an HR estimate with an LR observation,
// both as a fresh degradation and under decimation alone (the right reading
// for substituted outputs, which are already blurred).
inline int cmd_check_constraint(const RunConfig& cfg) {
  const std::string in_path = cfg.get("io.input");
  const std::string lr_path = cfg.get("io.lr");
  if (in_path.empty() || lr_path.empty())
    throw ConfigError("check-constraint needs io.input and io.lr");

  const Image est = load_image(in_path);
  const Image lr = load_image(lr_path);
  const DegradeSpec spec = cfg.degrade_spec();
  if (est.width != lr.width * spec.scale.s || est.height != lr.height * spec.scale.s)
    throw DimensionError("estimate is not scale times the observation");

  const ResidualReport formation = constraint_residual(est, lr, spec);
  const ResidualReport decim = decimation_residual(est, lr, spec.scale);

  std::cout << "formation residual:  mse=" << detail::json_number(formation.mse)
            << " psnr=" << detail::format_metric(formation.psnr)
            << " psnr_8bit=" << detail::format_metric(formation.psnr_8bit) << "\n";
  std::cout << "decimation residual: mse=" << detail::json_number(decim.mse)
            << " psnr=" << detail::format_metric(decim.psnr)
            << " psnr_8bit=" << detail::format_metric(decim.psnr_8bit) << "\n";
  std::cout << "exact at observed pixels: " << (decim.mse == 0.0 ? "yes" : "no") << "\n";

  const std::string json_path = cfg.get("io.output");
  if (!json_path.empty()) {
    std::ostringstream js;
    js << "{\n  \"formation\": " << detail::residual_json(formation)
       << ",\n  \"decimation\": " << detail::residual_json(decim) << ",\n  \"exact\": "
       << (decim.mse == 0.0 ? "true" : "false") << "\n}\n";
    detail::write_text_file(json_path, js.str());
  }
  return 0;
}

}  // namespace pixsub
