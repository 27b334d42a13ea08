// Copyright 2026 The btap Authors.
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

// Operator entry points.  Exit codes: 0 success, 1 usage, 2 data error,
// 3 verification failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "btap/checkpoint.h"
#include "btap/evaltap.h"
#include "btap/gradcheck.h"
#include "btap/imageio.h"
#include "btap/interchange.h"
#include "btap/losses.h"
#include "btap/ops.h"
#include "btap/synthdata.h"
#include "btap/tracker.h"
#include "btap/trainer.h"
#include "btap/transforms.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace btap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitVerification = 3;

// ---------------------------------------------------------------------
// Manifest plumbing: every command records its resolved configuration,
// seed, and an FNV-1a content hash of its inputs so a run can be
// reproduced from the manifest alone.

uint64_t fnv1a(uint64_t h, const void* data, size_t n) {
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t hash_file(uint64_t h, const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot read input: " + path.string());
  char buf[1 << 16];
  std::string name = path.filename().string();
  h = fnv1a(h, name.data(), name.size());
  while (f) {
    f.read(buf, sizeof(buf));
    h = fnv1a(h, buf, static_cast<size_t>(f.gcount()));
  }
  return h;
}

uint64_t hash_inputs(const std::vector<std::string>& paths) {
  uint64_t h = 1469598103934665603ULL;
  for (const auto& s : paths) {
    if (s.empty()) continue;
    fs::path p(s);
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) h = hash_file(h, f);
    } else if (fs::is_regular_file(p)) {
      h = hash_file(h, p);
    } else {
      fail("input not found: " + s);
    }
  }
  return h;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const json& resolved, uint64_t seed,
                    const std::vector<std::string>& inputs) {
  json m;
  m["command"] = command;
  m["config"] = resolved;
  m["seed"] = seed;
  std::ostringstream hex;
  hex << std::hex << hash_inputs(inputs);
  m["input_hash"] = hex.str();
  fs::create_directories(out_dir);
  std::ofstream f(fs::path(out_dir) / "manifest.json");
  f << m.dump(2) << "\n";
  if (!f) fail("cannot write manifest in " + out_dir);
}

// ---------------------------------------------------------------------
// Flat key-value config files ("key = value" per line, '#' comments),
// overridable by CLI flags.

std::map<std::string, std::string> read_kv_config(const std::string& path) {
  std::map<std::string, std::string> kv;
  if (path.empty()) return kv;
  std::ifstream f(path);
  if (!f) fail("cannot read config: " + path);
  std::string line;
  while (std::getline(f, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = val;
  }
  return kv;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail("bad boolean: " + v);
}

void apply_train_config(TrainConfig& cfg,
                        const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "steps") cfg.steps = std::stoi(v);
    else if (k == "b_sup") cfg.b_sup = std::stoi(v);
    else if (k == "b_ssl") cfg.b_ssl = std::stoi(v);
    else if (k == "n_q") cfg.n_q = std::stoi(v);
    else if (k == "peak_lr") cfg.peak_lr = std::stod(v);
    else if (k == "warmup_steps") cfg.warmup_steps = std::stoi(v);
    else if (k == "ema_decay") cfg.ema_decay = std::stod(v);
    else if (k == "q1_equals_q2_prob") cfg.q1_equals_q2_prob = std::stod(v);
    else if (k == "use_affine") cfg.use_affine = parse_bool(v);
    else if (k == "use_jpeg") cfg.use_jpeg = parse_bool(v);
    else if (k == "filter") cfg.filter = ssl_filter_from_string(v);
    else if (k == "siamese_mode") cfg.siamese_mode = parse_bool(v);
    else if (k == "ssl_enabled") cfg.ssl_enabled = parse_bool(v);
    else if (k == "seed") cfg.seed = std::stoull(v);
    else if (k == "clip_frames") cfg.clip_frames = std::stoi(v);
    else if (k == "data_fraction") cfg.data_fraction = std::stod(v);
    else if (k == "eval_interval") cfg.eval_interval = std::stoi(v);
    else if (k == "threads") cfg.threads = std::stoi(v);
    else if (k == "refine_lr_mult") cfg.refine_lr_mult = std::stod(v);
    else if (k == "max_skip_rate") cfg.max_skip_rate = std::stod(v);
    else if (k == "delta") cfg.loss.delta = std::stod(v);
    else if (k == "delta_cycle") cfg.loss.delta_cycle = std::stod(v);
    else if (k == "huber_knee") cfg.loss.huber_knee = std::stod(v);
    else if (k == "confidence_threshold")
      cfg.loss.confidence_threshold = std::stod(v);
    else if (k == "iterations") cfg.tracker.iterations = std::stoi(v);
    else if (k == "temperature") cfg.tracker.temperature = std::stod(v);
    else if (k == "stride") cfg.tracker.stride = std::stoi(v);
    else if (k == "feature_dim") cfg.tracker.feature_dim = std::stoi(v);
    else if (k == "refine_hidden") cfg.tracker.refine_hidden = std::stoi(v);
    else if (k == "patch") cfg.tracker.patch = std::stoi(v);
    else fail("unknown config key: " + k);
  }
}

json train_config_json(const TrainConfig& cfg) {
  json j;
  j["steps"] = cfg.steps;
  j["b_sup"] = cfg.b_sup;
  j["b_ssl"] = cfg.b_ssl;
  j["n_q"] = cfg.n_q;
  j["peak_lr"] = cfg.peak_lr;
  j["warmup_steps"] = cfg.warmup_steps;
  j["ema_decay"] = cfg.ema_decay;
  j["q1_equals_q2_prob"] = cfg.q1_equals_q2_prob;
  j["use_affine"] = cfg.use_affine;
  j["use_jpeg"] = cfg.use_jpeg;
  j["filter"] = to_string(cfg.filter);
  j["siamese_mode"] = cfg.siamese_mode;
  j["ssl_enabled"] = cfg.ssl_enabled;
  j["seed"] = cfg.seed;
  j["clip_frames"] = cfg.clip_frames;
  j["data_fraction"] = cfg.data_fraction;
  j["eval_interval"] = cfg.eval_interval;
  j["threads"] = cfg.threads;
  j["refine_lr_mult"] = cfg.refine_lr_mult;
  j["max_skip_rate"] = cfg.max_skip_rate;
  j["delta"] = cfg.loss.delta;
  j["delta_cycle"] = cfg.loss.delta_cycle;
  j["huber_knee"] = cfg.loss.huber_knee;
  j["confidence_threshold"] = cfg.loss.confidence_threshold;
  j["iterations"] = cfg.tracker.iterations;
  j["temperature"] = cfg.tracker.temperature;
  j["stride"] = cfg.tracker.stride;
  j["feature_dim"] = cfg.tracker.feature_dim;
  j["refine_hidden"] = cfg.tracker.refine_hidden;
  j["patch"] = cfg.tracker.patch;
  return j;
}

// ---------------------------------------------------------------------
// Dataset plumbing.

std::vector<Clip> load_clips(const std::string& dir, bool need_tracks) {
  std::vector<Clip> clips;
  for (const auto& d : list_clip_dirs(dir)) {
    Clip c = read_clip(d);
    if (need_tracks && !c.has_tracks) {
      fail("clip has no tracks: " + d);
    }
    clips.push_back(std::move(c));
  }
  if (clips.empty()) fail("no clips found in " + dir);
  return clips;
}

// Deterministic subsample by directory-name hash, independent of list
// order and of how many clips exist.
std::vector<Clip> load_clips_fraction(const std::string& dir,
                                      double fraction) {
  std::vector<Clip> clips;
  for (const auto& d : list_clip_dirs(dir)) {
    std::string name = fs::path(d).filename().string();
    uint64_t h = fnv1a(1469598103934665603ULL, name.data(), name.size());
    double u = static_cast<double>(h % 1000000ULL) / 1000000.0;
    if (u < fraction) clips.push_back(read_clip(d));
  }
  if (clips.empty()) fail("data fraction left no clips in " + dir);
  return clips;
}

void save_train_result(const std::string& out_dir, const TrainResult& r) {
  CheckpointMap m;
  params_to_checkpoint(r.student, "", m);
  params_to_checkpoint(r.teacher, "teacher.", m);
  fs::create_directories(out_dir);
  write_checkpoint((fs::path(out_dir) / "checkpoint.bin").string(), m);
  std::ofstream log(fs::path(out_dir) / "train_log.jsonl");
  for (const auto& line : r.log_lines) log << line << "\n";
}

// ---------------------------------------------------------------------
// gen

struct GenOptions {
  std::string domain = "A";
  int clips = 16;
  int eval_clips = 4;
  std::string out;
  std::string config;
  uint64_t seed = 0;
  int frames = 16;
  int size = 64;
  int tracks = 24;
  bool force = false;
};

void apply_gen_config(SceneConfig& cfg,
                      const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "frames") cfg.T = std::stoi(v);
    else if (k == "size") cfg.H = cfg.W = std::stoi(v);
    else if (k == "sprites") cfg.sprite_count = std::stoi(v);
    else if (k == "tracks") cfg.tracks_per_scene = std::stoi(v);
    else if (k == "texture")
      cfg.texture_family = texture_family_from_string(v);
    else if (k == "background")
      cfg.background_family = texture_family_from_string(v);
    else if (k == "max_speed") cfg.max_speed = std::stod(v);
    else if (k == "max_ang_vel") cfg.max_ang_vel = std::stod(v);
    else if (k == "min_radius") cfg.min_radius = std::stod(v);
    else if (k == "max_radius") cfg.max_radius = std::stod(v);
    else if (k == "object_query_bias") cfg.object_query_bias = std::stod(v);
    else if (k == "snap") cfg.snap_queries = parse_bool(v);
    else fail("unknown config key: " + k);
  }
}

int run_gen(const GenOptions& opt) {
  if (fs::exists(opt.out) && !opt.force) {
    fail("output directory exists (use --force): " + opt.out);
  }
  SceneConfig base;
  base.T = opt.frames;
  base.H = base.W = opt.size;
  base.tracks_per_scene = opt.tracks;
  // Domain B is a distinct visual domain: noise textures instead of the
  // checker default.
  if (opt.domain == "B") {
    base.texture_family = TextureFamily::kNoise;
    base.background_family = TextureFamily::kNoise;
  } else if (opt.domain != "A") {
    fail("domain must be A or B");
  }
  apply_gen_config(base, read_kv_config(opt.config));

  auto emit = [&](const std::string& split, int count, bool labeled,
                  uint64_t salt) {
    for (int i = 0; i < count; ++i) {
      SceneConfig cfg = base;
      cfg.seed = Rng(opt.seed).split(salt).split(static_cast<uint64_t>(i))
                     .uniform_int(1u << 30);
      Scene s = generate_scene(cfg);
      Clip clip;
      clip.video = s.video;
      if (labeled) {
        clip.tracks = s.tracks;
        clip.has_tracks = true;
      }
      std::ostringstream name;
      name << "clip_" << std::setw(4) << std::setfill('0') << i;
      write_clip((fs::path(opt.out) / split / name.str()).string(), clip);
    }
  };
  // Domain B's training copy is unlabeled; its eval split keeps labels.
  emit("train", opt.clips, opt.domain == "A", 1);
  emit("eval", opt.eval_clips, true, 2);

  json resolved;
  resolved["domain"] = opt.domain;
  resolved["clips"] = opt.clips;
  resolved["eval_clips"] = opt.eval_clips;
  resolved["frames"] = base.T;
  resolved["size"] = base.H;
  resolved["tracks"] = base.tracks_per_scene;
  resolved["texture"] = to_string(base.texture_family);
  resolved["background"] = to_string(base.background_family);
  write_manifest(opt.out, "gen", resolved, opt.seed, {opt.config});
  std::cout << "gen: wrote " << opt.clips << " train + " << opt.eval_clips
            << " eval clips to " << opt.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------
// train / bootstrap / ablate

struct TrainOptions {
  std::string labeled, unlabeled, eval_dir, out, config, init;
  std::vector<std::string> ablations;
  int clip_frames = -1;       // -1 = not set on the command line
  double data_fraction = -1;  // ditto
  int steps = -1;
  int threads = -1;
  int64_t seed = -1;
  bool supervised_only = false;
};

// Frozen ablation names; each maps to exactly one flag combination on
// top of the base configuration (confidence filtering, both
// augmentations, EMA teacher).
void apply_ablation(TrainConfig& cfg, const std::string& raw) {
  std::string name = raw;
  if (name.rfind("BASE-", 0) == 0) name = name.substr(5);
  if (name == "BASE+cycle" || name == "+cycle" || name == "cycle") {
    cfg.filter = SslFilter::kCycle;
  } else if (name == "no-augm") {
    cfg.use_affine = false;
    cfg.use_jpeg = false;
  } else if (name == "no-affine") {
    cfg.use_affine = false;
  } else if (name == "same-queries") {
    cfg.q1_equals_q2_prob = 1.0;
  } else if (name == "uniform") {
    cfg.q1_equals_q2_prob = 0.0;
  } else if (name == "no-filtering") {
    cfg.filter = SslFilter::kNone;
  } else if (name == "SIAMESE" || name == "siamese") {
    cfg.siamese_mode = true;
  } else if (name == "kubric-only") {
    cfg.ssl_enabled = false;
  } else if (name == "BASE" || name == "base") {
    // base flags already set
  } else {
    fail("unknown ablation name: " + raw);
  }
}

TrainConfig resolve_train_config(const TrainOptions& opt, bool ssl) {
  TrainConfig cfg;
  cfg.ssl_enabled = ssl;
  cfg.filter = SslFilter::kConfidence;  // base configuration
  apply_train_config(cfg, read_kv_config(opt.config));
  for (const auto& name : opt.ablations) apply_ablation(cfg, name);
  if (opt.clip_frames >= 0) cfg.clip_frames = opt.clip_frames;
  if (opt.data_fraction >= 0) cfg.data_fraction = opt.data_fraction;
  if (opt.steps >= 0) cfg.steps = opt.steps;
  if (opt.threads >= 0) cfg.threads = opt.threads;
  if (opt.seed >= 0) cfg.seed = static_cast<uint64_t>(opt.seed);
  if (opt.supervised_only) cfg.ssl_enabled = false;
  return cfg;
}

int run_training(const TrainOptions& opt, const std::string& command) {
  TrainConfig cfg = resolve_train_config(opt, command == "bootstrap");
  std::vector<Clip> labeled = load_clips(opt.labeled, true);
  std::vector<Clip> unlabeled;
  if (cfg.ssl_enabled) {
    unlabeled = load_clips_fraction(opt.unlabeled, cfg.data_fraction);
  }
  std::vector<Clip> eval_clips = load_clips(opt.eval_dir, true);

  std::optional<ModelParams> initial;
  if (!opt.init.empty()) {
    initial = params_from_checkpoint(read_checkpoint(opt.init), "");
    cfg.tracker = initial->cfg;
  }

  write_manifest(opt.out, command, train_config_json(cfg), cfg.seed,
                 {opt.config, opt.init, opt.labeled, opt.unlabeled,
                  opt.eval_dir});
  TrainResult r = train(cfg, labeled, unlabeled, eval_clips, initial,
                        &std::cout);
  save_train_result(opt.out, r);

  MetricsReport m = evaluate_clips(r.student, eval_clips,
                                   QueryMode::kStrided, cfg.threads);
  json final_metrics;
  final_metrics["aj"] = m.aj;
  final_metrics["delta_avg"] = m.delta_avg;
  final_metrics["oa"] = m.oa;
  final_metrics["points"] = m.points;
  final_metrics["skipped_steps"] = r.skipped_steps;
  std::ofstream f(fs::path(opt.out) / "final_metrics.json");
  f << final_metrics.dump(2) << "\n";
  std::cout << command << ": delta_avg=" << m.delta_avg << " aj=" << m.aj
            << " oa=" << m.oa << "\n";
  return kExitOk;
}

int run_ablate(const TrainOptions& opt,
               const std::vector<std::string>& names) {
  json summary;
  for (const auto& name : names) {
    TrainOptions each = opt;
    each.ablations = {name};
    std::string sub = name;
    for (auto& c : sub) {
      if (c == '+' || c == '/') c = '_';
    }
    each.out = (fs::path(opt.out) / sub).string();
    run_training(each, "bootstrap");
    std::ifstream f(fs::path(each.out) / "final_metrics.json");
    json m;
    f >> m;
    summary[name] = m;
  }
  fs::create_directories(opt.out);
  std::ofstream f(fs::path(opt.out) / "ablation_summary.json");
  f << summary.dump(2) << "\n";
  std::cout << "ablate: " << names.size() << " runs written to " << opt.out
            << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------
// eval

int run_eval(const std::string& ckpt, const std::string& data,
             const std::string& mode_s, const std::string& out,
             int threads) {
  QueryMode mode = mode_s == "q_first" ? QueryMode::kQueryFirst
                                       : QueryMode::kStrided;
  if (mode_s != "q_first" && mode_s != "strided") {
    fail("mode must be strided or q_first");
  }
  ModelParams params = params_from_checkpoint(read_checkpoint(ckpt), "");
  std::vector<Clip> clips = load_clips(data, true);
  MetricsReport total = evaluate_clips(params, clips, mode, threads);

  fs::create_directories(out);
  json j;
  j["aj"] = total.aj;
  j["delta_avg"] = total.delta_avg;
  j["oa"] = total.oa;
  j["points"] = total.points;
  j["videos"] = static_cast<int64_t>(clips.size());
  j["mode"] = mode_s;
  for (const auto& [thr, acc] : total.per_threshold) {
    j["per_threshold"][std::to_string(thr)] = acc;
  }
  std::ofstream jf(fs::path(out) / "metrics.json");
  jf << j.dump(2) << "\n";

  std::ofstream csv(fs::path(out) / "per_video.csv");
  csv << "video,aj,delta_avg,oa,points\n";
  auto dirs = list_clip_dirs(data);
  for (size_t i = 0; i < clips.size(); ++i) {
    MetricsReport m = evaluate_clips(params, {clips[i]}, mode, threads);
    csv << fs::path(dirs[i]).filename().string() << "," << m.aj << ","
        << m.delta_avg << "," << m.oa << "," << m.points << "\n";
  }
  write_manifest(out, "eval", j, 0, {ckpt, data});
  std::cout << "eval: aj=" << total.aj << " delta_avg=" << total.delta_avg
            << " oa=" << total.oa << " (" << total.points << " queries)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------
// render

int run_render(const std::string& ckpt, const std::string& clip_dir,
               const std::string& out) {
  ModelParams params = params_from_checkpoint(read_checkpoint(ckpt), "");
  Clip clip = read_clip(clip_dir);
  std::vector<QueryPoint> queries;
  if (clip.has_tracks) {
    for (const auto& tr : clip.tracks) {
      auto q = extract_queries(tr, QueryMode::kQueryFirst);
      queries.insert(queries.end(), q.begin(), q.end());
    }
  } else {
    Rng rng(0);
    queries = sample_teacher_queries(clip.video.T, clip.video.H,
                                     clip.video.W, 8, rng);
  }
  if (queries.empty()) fail("no usable queries in clip");

  auto trajs = forward(clip.video, queries, params);
  std::vector<PredictedTrack> tracks;
  for (const auto& tr : trajs) tracks.push_back(to_predicted(tr));
  Video overlay = render_overlay(clip.video, tracks);
  fs::create_directories(out);
  for (int t = 0; t < overlay.T; ++t) {
    std::ostringstream name;
    name << "frame_" << std::setw(4) << std::setfill('0') << t << ".png";
    write_png((fs::path(out) / name.str()).string(), overlay.W, overlay.H,
              frame_to_rgb8(overlay, t));
  }
  json resolved;
  resolved["queries"] = queries.size();
  resolved["frames"] = overlay.T;
  write_manifest(out, "render", resolved, 0, {ckpt, clip_dir});
  std::cout << "render: wrote " << overlay.T << " frames to " << out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------
// gradcheck

struct CheckRow {
  std::string name;
  double err;
};

void check_op(std::vector<CheckRow>& rows, const std::string& name,
              const std::function<Tensor()>& f,
              const std::vector<Tensor>& leaves) {
  GradCheckResult r = grad_check(f, leaves);
  rows.push_back({name, r.max_rel_err});
}

std::vector<double> rand_vec(int64_t n, Rng& rng, double lo = -2.0,
                             double hi = 2.0) {
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

void gradcheck_ops(std::vector<CheckRow>& rows) {
  Rng rng(101);
  Tensor a = Tensor::from({2, 3}, rand_vec(6, rng), true);
  Tensor b = Tensor::from({3}, rand_vec(3, rng, 0.5, 2.0), true);
  check_op(rows, "add", [&] { return sum(add(a, b)); }, {a, b});
  check_op(rows, "sub", [&] { return sum(sub(a, b)); }, {a, b});
  check_op(rows, "mul", [&] { return sum(mul(a, b)); }, {a, b});
  check_op(rows, "div", [&] { return sum(div(a, b)); }, {a, b});
  check_op(rows, "exp", [&] { return sum(exp(scale(a, 0.3))); }, {a});
  check_op(rows, "sigmoid", [&] { return sum(sigmoid(a)); }, {a});
  check_op(rows, "softplus", [&] { return sum(softplus(a)); }, {a});
  Tensor pos = Tensor::from({4}, rand_vec(4, rng, 0.2, 3.0), true);
  check_op(rows, "log", [&] { return sum(log(pos)); }, {pos});
  check_op(rows, "sqrt", [&] { return sum(sqrt(pos)); }, {pos});
  check_op(rows, "mean", [&] { return mean(mul(a, a)); }, {a});
  check_op(rows, "max_all", [&] { return max_all(a); }, {a});
  Tensor m1 = Tensor::from({3, 4}, rand_vec(12, rng), true);
  Tensor m2 = Tensor::from({4, 2}, rand_vec(8, rng), true);
  check_op(rows, "matmul", [&] { return sum(matmul(m1, m2)); }, {m1, m2});

  Tensor img = Tensor::from({5, 5, 2}, rand_vec(50, rng), true);
  Tensor ker = Tensor::from({3, 3, 2, 3}, rand_vec(54, rng), true);
  check_op(rows, "conv2d_s1", [&] {
    Tensor o = conv2d(img, ker, 1);
    return sum(mul(o, o));
  }, {img, ker});
  check_op(rows, "conv2d_s2", [&] {
    Tensor o = conv2d(img, ker, 2);
    return sum(mul(o, o));
  }, {img, ker});
  Tensor seq = Tensor::from({6, 3}, rand_vec(18, rng), true);
  Tensor k1 = Tensor::from({3, 3, 2}, rand_vec(18, rng), true);
  check_op(rows, "conv1d_edge", [&] {
    Tensor o = conv1d_edge(seq, k1);
    return sum(mul(o, sigmoid(o)));
  }, {seq, k1});
  Tensor logits = Tensor::from({3, 4}, rand_vec(12, rng, -3.0, 3.0), true);
  Tensor w = Tensor::from({3, 4}, rand_vec(12, rng));
  check_op(rows, "softmax2d", [&] { return sum(mul(softmax2d(logits), w)); },
           {logits});
  Tensor field = Tensor::from({6, 7, 2}, rand_vec(84, rng), true);
  std::vector<double> pts;
  for (int i = 0; i < 5; ++i) {
    pts.push_back(rng.uniform(0.2, 5.7));
    pts.push_back(rng.uniform(0.2, 4.7));
  }
  Tensor xy = Tensor::from({5, 2}, pts, true);
  check_op(rows, "bilinear_sample", [&] {
    Tensor s = bilinear_sample(field, xy);
    return sum(mul(s, s));
  }, {field, xy});
  Tensor bl = Tensor::from({4}, rand_vec(4, rng), true);
  Tensor bt = Tensor::from({4}, rand_vec(4, rng, 0.1, 0.9), true);
  check_op(rows, "bce_logits", [&] { return sum(bce_logits(bl, bt)); },
           {bl, bt});
  Tensor hp = Tensor::from({3, 2}, rand_vec(6, rng), true);
  Tensor ht = Tensor::from({3, 2}, rand_vec(6, rng, 2.5, 4.0), true);
  check_op(rows, "huber_l2", [&] { return sum(huber_l2(hp, ht, 1.0)); },
           {hp, ht});
}

void gradcheck_model(std::vector<CheckRow>& rows) {
  TrackerConfig cfg;
  cfg.stride = 2;
  ModelParams p = init_params(23, cfg);
  Rng r(5);
  for (auto& v : p.at("refine.conv2.w").mutable_data()) {
    v = 0.05 * r.normal();  // off the zero init so refinement is live
  }
  Video v = Video::zeros(3, 16, 16);
  Rng vr(55);
  for (auto& px : v.rgb) px = static_cast<float>(vr.uniform());
  GroundTruthTrack gt;
  for (int t = 0; t < 3; ++t) {
    gt.p.push_back({4.0 + t, 6.0});
    gt.o.push_back(0);
  }
  LossConfig lcfg;
  lcfg.working_resolution = 16;
  auto f = [&] {
    auto preds = forward(v, {{{4.0, 6.0}, 0}}, p);
    return tapir_loss(preds[0], gt, lcfg);
  };
  std::vector<Tensor> leaves;
  for (auto& [name, t] : p.tensors) leaves.push_back(t);
  GradCheckResult res = grad_check(f, leaves, 1e-5, 4, Rng(3));
  rows.push_back({"tracker_forward+supervised_loss", res.max_rel_err});
}

void gradcheck_loss(std::vector<CheckRow>& rows) {
  Rng rng(7);
  const int T = 4;
  auto make = [&](double spread) {
    IterationPrediction it;
    it.p = Tensor::from({T, 2}, rand_vec(2 * T, rng, 0.0, spread), true);
    it.o = Tensor::from({T}, rand_vec(T, rng, -1.5, 1.5), true);
    it.u = Tensor::from({T}, rand_vec(T, rng, -1.5, 1.5), true);
    return it;
  };
  TrajectoryPrediction pred;
  pred.iters.push_back(make(10.0));
  pred.iters.push_back(make(10.0));
  GroundTruthTrack gt;
  for (int t = 0; t < T; ++t) {
    gt.p.push_back({rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)});
    gt.o.push_back(t == 2 ? 1 : 0);
  }
  LossConfig cfg;
  cfg.working_resolution = 64;
  std::vector<Tensor> leaves;
  for (const auto& it : pred.iters) {
    leaves.push_back(it.p);
    leaves.push_back(it.o);
    leaves.push_back(it.u);
  }
  check_op(rows, "supervised_loss",
           [&] { return tapir_loss(pred, gt, cfg); }, leaves);

  PseudoLabels lab;
  for (int t = 0; t < T; ++t) {
    lab.p.push_back({rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)});
    lab.o.push_back(t == 1 ? 1 : 0);
    lab.u.push_back(t == 3 ? 1 : 0);
  }
  std::vector<double> tlogits = rand_vec(T, rng, -2.0, 2.0);
  check_op(rows, "ssl_loss",
           [&] { return ssl_loss(pred, lab, tlogits, cfg, true); }, leaves);

  Tensor teacher_p = Tensor::from({T, 2}, rand_vec(2 * T, rng, 0.0, 10.0),
                                  true);
  std::vector<Tensor> leaves_s = leaves;
  leaves_s.push_back(teacher_p);
  check_op(rows, "ssl_loss_siamese", [&] {
    return ssl_loss_siamese(pred, teacher_p, lab, tlogits, cfg, true);
  }, leaves_s);
}

// Deliberately wrong backward pass; the harness must flag it.
void gradcheck_corrupt(std::vector<CheckRow>& rows) {
  Tensor x = Tensor::from({2}, {1.0, 2.0}, true);
  auto bad_square = [&] {
    auto n = std::make_shared<Node>();
    n->shape = {2};
    n->value = {x.at(0) * x.at(0), x.at(1) * x.at(1)};
    n->requires_grad = true;
    n->op_name = "corrupt_square";
    n->parents = {x.node()};
    NodePtr xn = x.node();
    n->backward = [xn](const std::vector<double>& g, GradMap& sink) {
      auto& gx = sink.slot(xn.get(), 2);
      for (int i = 0; i < 2; ++i) gx[i] += g[i] * 2.2 * xn->value[i];
    };
    return sum(Tensor(n));
  };
  GradCheckResult r = grad_check(bad_square, {x});
  rows.push_back({"corrupt_fixture", r.max_rel_err});
}

int run_gradcheck(const std::string& scope, bool corrupt) {
  std::vector<CheckRow> rows;
  if (scope == "op" || scope == "all") gradcheck_ops(rows);
  if (scope == "model" || scope == "all") gradcheck_model(rows);
  if (scope == "loss" || scope == "all") gradcheck_loss(rows);
  if (scope != "op" && scope != "model" && scope != "loss" &&
      scope != "all") {
    fail("scope must be op, model, loss, or all");
  }
  if (corrupt) gradcheck_corrupt(rows);
  const double tol = 1e-3;
  bool ok = true;
  for (const auto& row : rows) {
    bool pass = row.err <= tol;
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << row.name
              << " max_rel_err=" << row.err << "\n";
  }
  std::cout << (ok ? "gradcheck: all checks passed\n"
                   : "gradcheck: FAILURES detected\n");
  return ok ? kExitOk : kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point tracking bootstrap toolkit"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* cgen = app.add_subcommand("gen", "generate synthetic clip datasets");
  cgen->add_option("--domain", gen.domain, "A (checker) or B (noise)");
  cgen->add_option("--clips", gen.clips, "training clips");
  cgen->add_option("--eval-clips", gen.eval_clips, "held-out labeled clips");
  cgen->add_option("--out", gen.out)->required();
  cgen->add_option("--config", gen.config, "flat key-value config file");
  cgen->add_option("--seed", gen.seed);
  cgen->add_option("--frames", gen.frames);
  cgen->add_option("--size", gen.size);
  cgen->add_option("--tracks", gen.tracks);
  cgen->add_flag("--force", gen.force, "overwrite existing output");

  TrainOptions tr;
  auto* ctrain = app.add_subcommand("train", "supervised training");
  ctrain->add_option("--labeled", tr.labeled)->required();
  ctrain->add_option("--eval", tr.eval_dir)->required();
  ctrain->add_option("--out", tr.out)->required();
  ctrain->add_option("--config", tr.config);
  ctrain->add_option("--init", tr.init, "warm-start checkpoint");
  ctrain->add_option("--steps", tr.steps);
  ctrain->add_option("--threads", tr.threads);
  ctrain->add_option("--seed", tr.seed);

  TrainOptions bs;
  auto* cboot = app.add_subcommand(
      "bootstrap", "student-teacher co-training on unlabeled clips");
  cboot->add_option("--labeled", bs.labeled)->required();
  cboot->add_option("--unlabeled", bs.unlabeled)->required();
  cboot->add_option("--eval", bs.eval_dir)->required();
  cboot->add_option("--out", bs.out)->required();
  cboot->add_option("--init", bs.init, "checkpoint from train")->required();
  cboot->add_option("--config", bs.config);
  cboot->add_option("--ablation", bs.ablations,
                    "named flag combination (repeatable)");
  cboot->add_option("--clip-frames", bs.clip_frames,
                    "crop unlabeled clips to this length");
  cboot->add_option("--data-fraction", bs.data_fraction,
                    "deterministic hash subsample of unlabeled clips");
  cboot->add_option("--steps", bs.steps);
  cboot->add_option("--threads", bs.threads);
  cboot->add_option("--seed", bs.seed);

  TrainOptions ab;
  std::vector<std::string> ab_names;
  auto* cablate = app.add_subcommand("ablate", "run a set of named ablations");
  cablate->add_option("--labeled", ab.labeled)->required();
  cablate->add_option("--unlabeled", ab.unlabeled)->required();
  cablate->add_option("--eval", ab.eval_dir)->required();
  cablate->add_option("--out", ab.out)->required();
  cablate->add_option("--init", ab.init)->required();
  cablate->add_option("--config", ab.config);
  cablate->add_option("--names", ab_names, "ablation names")->required();
  cablate->add_option("--steps", ab.steps);
  cablate->add_option("--threads", ab.threads);
  cablate->add_option("--seed", ab.seed);

  std::string ev_ckpt, ev_data, ev_mode = "strided", ev_out;
  int ev_threads = 1;
  auto* ceval = app.add_subcommand("eval", "TAP-Vid style metrics");
  ceval->add_option("--checkpoint", ev_ckpt)->required();
  ceval->add_option("--data", ev_data)->required();
  ceval->add_option("--mode", ev_mode, "strided or q_first");
  ceval->add_option("--out", ev_out)->required();
  ceval->add_option("--threads", ev_threads);

  std::string rd_ckpt, rd_clip, rd_out;
  auto* crender = app.add_subcommand("render", "overlay tracks as PNG frames");
  crender->add_option("--checkpoint", rd_ckpt)->required();
  crender->add_option("--clip", rd_clip)->required();
  crender->add_option("--out", rd_out)->required();

  std::string gc_scope = "all";
  bool gc_corrupt = false;
  auto* cgrad = app.add_subcommand("gradcheck", "finite-difference suites");
  cgrad->add_option("--scope", gc_scope, "op, model, loss, or all");
  cgrad->add_flag("--corrupt", gc_corrupt,
                  "include a deliberately wrong gradient (must fail)");

  try {
    app.parse(argc, argv);
    if (*cgen) return run_gen(gen);
    if (*ctrain) {
      tr.supervised_only = true;
      return run_training(tr, "train");
    }
    if (*cboot) return run_training(bs, "bootstrap");
    if (*cablate) return run_ablate(ab, ab_names);
    if (*ceval) return run_eval(ev_ckpt, ev_data, ev_mode, ev_out,
                                ev_threads);
    if (*crender) return run_render(rd_ckpt, rd_clip, rd_out);
    if (*cgrad) return run_gradcheck(gc_scope, gc_corrupt);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
