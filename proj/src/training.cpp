#include "ovl/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ovl/config.hpp"

namespace ovl {

using ad::Graph;

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size < 1");
  if (!(lr >= 0)) throw std::invalid_argument("TrainConfig: bad learning rate");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs < 0");
  if (!(tau > 0)) throw std::invalid_argument("TrainConfig: tau must be positive");
  if (lambda_word < 0) throw std::invalid_argument("TrainConfig: lambda_word < 0");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw std::invalid_argument("TrainConfig: betas must be in [0,1)");
  if (weight_decay < 0) throw std::invalid_argument("TrainConfig: weight_decay < 0");
  if (precision != "standard" && precision != "high")
    throw std::invalid_argument("TrainConfig: precision must be standard|high");
}

namespace {

Graph::Id add_chain(Graph& g, const std::vector<Graph::Id>& xs) {
  if (xs.empty()) return g.scalar(0.0);
  Graph::Id acc = xs[0];
  for (size_t i = 1; i < xs.size(); ++i) acc = g.add(acc, xs[i]);
  return acc;
}

}  // namespace

BatchLoss build_batch_loss(Graph& g, const nn::Bound& b, const Model& model,
                           const Vocabulary& vocab, const Dataset& ds,
                           const Batch& batch, const LossConfig& cfg,
                           const LossToggle& toggle) {
  if (batch.samples.empty()) throw std::invalid_argument("build_batch_loss: empty batch");
  int bsz = static_cast<int>(batch.samples.size());
  bool hard = !batch.hard.empty();
  if (hard && static_cast<int>(batch.hard.size()) != bsz)
    throw std::invalid_argument("build_batch_loss: hard negatives must pair the batch");

  std::vector<ClipForward> fwd(bsz);
  std::vector<Graph::Id> v_rows, t_rows, vh_rows, th_rows;
  for (int i = 0; i < bsz; ++i) {
    fwd[i] = model.forward_clip(b, batch.samples[i].frames);
    v_rows.push_back(fwd[i].video_emb);
    const ClipSample& clip = ds.clips[batch.samples[i].dataset_index];
    t_rows.push_back(model.text_embedding(b, tokenize(clip.narration, vocab)));
  }
  for (const SampledClip& s : batch.hard) {
    vh_rows.push_back(model.clip_embedding(b, s.frames));
    const ClipSample& clip = ds.clips[s.dataset_index];
    th_rows.push_back(model.text_embedding(b, tokenize(clip.narration, vocab)));
  }

  BatchLoss out;
  if (toggle.ego) {
    std::optional<Graph::Id> vh, th;
    if (hard) {
      vh = g.concat_rows(vh_rows);
      th = g.concat_rows(th_rows);
    }
    EgoNceLoss ego = egonce(g, g.concat_rows(v_rows), g.concat_rows(t_rows), vh, th,
                            batch.structure, cfg);
    out.parts.v2t = ego.v2t;
    out.parts.t2v = ego.t2v;
  } else {
    out.parts.v2t = g.scalar(0.0);
    out.parts.t2v = g.scalar(0.0);
  }

  BoxGridLayout layout = model.box_layout();
  if (toggle.box) {
    std::vector<Graph::Id> sums;
    int pairs = 0;
    for (int i = 0; i < bsz; ++i) {
      MatchedBoxes m = match_boxes(g.val(fwd[i].boxes), layout,
                                   batch.samples[i].detections);
      out.dropped_gt += m.dropped_gt;
      if (m.gt.empty()) continue;
      sums.push_back(box_pair_loss_sum(g, fwd[i].boxes, m.pred_rows, m.gt));
      pairs += static_cast<int>(m.gt.size());
    }
    out.matched_pairs = pairs;
    out.parts.box = pairs > 0 ? g.scale(add_chain(g, sums), 1.0 / pairs) : g.scalar(0.0);
  } else {
    out.parts.box = g.scalar(0.0);
  }

  if (toggle.word) {
    Graph::Id dict = model.phrase_embeddings(b, vocab, ds.dict_surfaces);
    std::vector<Graph::Id> terms;
    for (int i = 0; i < bsz; ++i) {
      const ClipSample& clip = ds.clips[batch.samples[i].dataset_index];
      std::vector<int> idx = clip.noun_dict_idx;
      if (static_cast<int>(idx.size()) > layout.object_queries)
        idx.resize(layout.object_queries);
      terms.push_back(word_loss(g, fwd[i].names, dict, idx, cfg));
    }
    out.parts.word = g.scale(add_chain(g, terms), 1.0 / bsz);
  } else {
    out.parts.word = g.scalar(0.0);
  }

  out.total = total_loss(g, out.parts, cfg);
  return out;
}

void adamw_update(Model& model, const std::map<std::string, Tensor>& grads,
                  AdamWState& state, const TrainConfig& cfg) {
  ++state.step;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  double lr = cfg.lr;
  if (cfg.warmup && cfg.warmup_steps > 0)
    lr *= std::min(1.0, static_cast<double>(state.step) / cfg.warmup_steps);

  for (auto& [name, p] : model.params) {
    if (!model.is_trainable(name)) continue;
    auto git = grads.find(name);
    if (git == grads.end()) throw std::runtime_error("adamw_update: missing grad " + name);
    const Tensor& grad = git->second;
    Tensor& m = state.m.try_emplace(name, Tensor::zeros(p.rows, p.cols)).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor::zeros(p.rows, p.cols)).first->second;
    bool decay = !(name.size() >= 2 && (name.compare(name.size() - 2, 2, ".b") == 0 ||
                                        name.compare(name.size() - 2, 2, ".g") == 0));
    double wd = decay ? cfg.weight_decay : 0.0;
    for (size_t i = 0; i < p.v.size(); ++i) {
      double gv = grad.v[i];
      m.v[i] = cfg.beta1 * m.v[i] + (1 - cfg.beta1) * gv;
      v.v[i] = cfg.beta2 * v.v[i] + (1 - cfg.beta2) * gv * gv;
      double mh = m.v[i] / bc1;
      double vh = v.v[i] / bc2;
      p.v[i] -= lr * (mh / (std::sqrt(vh) + cfg.adam_eps) + wd * p.v[i]);
    }
  }
}

StepReport train_step(Model& model, const Vocabulary& vocab, const Dataset& ds,
                      const Batch& batch, AdamWState& opt, const TrainConfig& cfg,
                      const LossToggle& toggle) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();

  Graph g;
  nn::Bound bound = model.bind(g, true);
  BatchLoss bl = build_batch_loss(g, bound, model, vocab, ds, batch, cfg.loss_config(),
                                  toggle);

  StepReport rep;
  rep.v2t = g.val(bl.parts.v2t)(0, 0);
  rep.t2v = g.val(bl.parts.t2v)(0, 0);
  rep.box = g.val(bl.parts.box)(0, 0);
  rep.word = g.val(bl.parts.word)(0, 0);
  rep.total = g.val(bl.total)(0, 0);
  rep.matched_pairs = bl.matched_pairs;
  rep.dropped_gt = bl.dropped_gt;
  auto check = [](double x, const char* who) {
    if (!std::isfinite(x))
      throw std::runtime_error(std::string("train_step: non-finite loss component ") + who);
  };
  check(rep.v2t, "v2t");
  check(rep.t2v, "t2v");
  check(rep.box, "box");
  check(rep.word, "word");
  check(rep.total, "total");

  g.backward(bl.total);

  std::map<std::string, Tensor> grads;
  double norm2 = 0;
  for (const auto& [name, p] : model.params) {
    if (!model.is_trainable(name)) continue;
    Graph::Id id = bound[name];
    Tensor grad = g.has_grad(id) ? g.grad(id) : Tensor::zeros(p.rows, p.cols);
    if (!grad.all_finite())
      throw std::runtime_error("train_step: non-finite gradient for " + name);
    for (double x : grad.v) norm2 += x * x;
    grads.emplace(name, std::move(grad));
  }
  rep.grad_norm = std::sqrt(norm2);

  adamw_update(model, grads, opt, cfg);

  rep.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------- checkpoint

namespace {

void write_u32(std::ostream& o, uint32_t x) { o.write(reinterpret_cast<char*>(&x), 4); }
void write_i64(std::ostream& o, int64_t x) { o.write(reinterpret_cast<char*>(&x), 8); }

void write_string(std::ostream& o, const std::string& s) {
  int64_t n = static_cast<int64_t>(s.size());
  write_i64(o, n);
  o.write(s.data(), n);
}

void write_tensor(std::ostream& o, const Tensor& t) {
  write_i64(o, t.rows);
  write_i64(o, t.cols);
  o.write(reinterpret_cast<const char*>(t.v.data()),
          static_cast<std::streamsize>(t.v.size() * sizeof(double)));
}

void write_tensor_map(std::ostream& o, const std::map<std::string, Tensor>& m) {
  write_i64(o, static_cast<int64_t>(m.size()));
  for (const auto& [name, t] : m) {
    write_string(o, name);
    write_tensor(o, t);
  }
}

uint32_t read_u32(std::istream& i) {
  uint32_t x;
  i.read(reinterpret_cast<char*>(&x), 4);
  return x;
}

int64_t read_i64(std::istream& i) {
  int64_t x;
  i.read(reinterpret_cast<char*>(&x), 8);
  return x;
}

std::string read_string(std::istream& i) {
  int64_t n = read_i64(i);
  if (n < 0 || n > (1ll << 32)) throw std::runtime_error("checkpoint: bad string length");
  std::string s(static_cast<size_t>(n), '\0');
  i.read(s.data(), n);
  return s;
}

Tensor read_tensor(std::istream& i) {
  int64_t r = read_i64(i), c = read_i64(i);
  if (r < 0 || c < 0 || r * c > (1ll << 31)) throw std::runtime_error("checkpoint: bad shape");
  Tensor t(static_cast<int>(r), static_cast<int>(c));
  i.read(reinterpret_cast<char*>(t.v.data()),
         static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  return t;
}

std::map<std::string, Tensor> read_tensor_map(std::istream& i) {
  int64_t n = read_i64(i);
  if (n < 0 || n > (1 << 24)) throw std::runtime_error("checkpoint: bad map size");
  std::map<std::string, Tensor> m;
  for (int64_t k = 0; k < n; ++k) {
    std::string name = read_string(i);
    m.emplace(std::move(name), read_tensor(i));
  }
  return m;
}

constexpr char kMagic[8] = {'O', 'V', 'L', 'C', 'K', 'P', 'T', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
  out.write(kMagic, 8);
  write_u32(out, ck.version);
  write_i64(out, ck.step);
  write_string(out, ck.config_json);
  write_string(out, ck.data_rng_state);
  write_tensor_map(out, ck.params);
  write_tensor_map(out, ck.adam_m);
  write_tensor_map(out, ck.adam_v);
  if (!out) throw std::runtime_error("save_checkpoint: write failed " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  Checkpoint ck;
  ck.version = read_u32(in);
  if (ck.version != 1) throw std::runtime_error("load_checkpoint: unsupported version");
  ck.step = read_i64(in);
  ck.config_json = read_string(in);
  ck.data_rng_state = read_string(in);
  ck.params = read_tensor_map(in);
  ck.adam_m = read_tensor_map(in);
  ck.adam_v = read_tensor_map(in);
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return ck;
}

Model model_from_checkpoint(const Checkpoint& ck, int vocab_size) {
  nlohmann::json j = nlohmann::json::parse(ck.config_json);
  Model model;
  model.cfg = model_config_from_json(j.at("model"));
  model.cfg.text.vocab_size = vocab_size;
  model.init(0);
  if (model.params.size() != ck.params.size())
    throw std::runtime_error("model_from_checkpoint: parameter set mismatch");
  for (const auto& [name, t] : ck.params) {
    auto it = model.params.find(name);
    if (it == model.params.end() || !it->second.same_shape(t))
      throw std::runtime_error("model_from_checkpoint: parameter mismatch at " + name +
                               " (wrong vocabulary or config?)");
  }
  model.params = ck.params;
  return model;
}

std::string train_snapshot_json(const Model& model, const TrainConfig& cfg) {
  nlohmann::json j = {{"model", model_config_to_json(model.cfg)},
                      {"train", train_config_to_json(cfg)}};
  return j.dump();
}

// ---------------------------------------------------------------- train loop

namespace {

// epochs differ between a run and its resumed continuation; everything else
// must match.
void check_resume_config(const std::string& saved, const std::string& current) {
  nlohmann::json a = nlohmann::json::parse(saved);
  nlohmann::json b = nlohmann::json::parse(current);
  a["train"].erase("epochs");
  b["train"].erase("epochs");
  if (a != b)
    throw std::runtime_error("resume: checkpoint config does not match the current run");
}

}  // namespace

TrainResult train(Model& model, const Vocabulary& vocab, const Dataset& ds,
                  const TrainConfig& cfg, const std::string& out_dir,
                  const std::optional<std::string>& resume, const LossToggle& toggle) {
  cfg.validate();
  model.cfg.freeze_backbone = cfg.freeze_backbone;
  if (model.params.empty()) model.init(cfg.seed);

  AdamWState opt;
  Rng data_rng(cfg.seed ^ 0xD5A79147930AA725ull);
  std::string snapshot = train_snapshot_json(model, cfg);

  if (resume) {
    Checkpoint ck = load_checkpoint(*resume);
    check_resume_config(ck.config_json, snapshot);
    if (ck.params.size() != model.params.size())
      throw std::runtime_error("resume: parameter set mismatch");
    for (const auto& [name, t] : ck.params) {
      auto it = model.params.find(name);
      if (it == model.params.end() || !it->second.same_shape(t))
        throw std::runtime_error("resume: parameter mismatch at " + name);
    }
    model.params = ck.params;
    opt.m = ck.adam_m;
    opt.v = ck.adam_v;
    opt.step = ck.step;
    data_rng.set_state(ck.data_rng_state);
  }

  int n = static_cast<int>(ds.clips.size());
  int bsz = std::min(cfg.batch_size, n);
  int steps_per_epoch = std::max(1, n / bsz);
  int64_t total_steps = static_cast<int64_t>(cfg.epochs) * steps_per_epoch;

  std::ofstream metrics;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    metrics.open(out_dir + "/metrics.jsonl",
                 resume ? std::ios::app : std::ios::trunc);
  }

  auto make_checkpoint = [&]() {
    Checkpoint ck;
    ck.config_json = snapshot;
    ck.step = opt.step;
    ck.data_rng_state = data_rng.state();
    ck.params = model.params;
    ck.adam_m = opt.m;
    ck.adam_v = opt.v;
    return ck;
  };

  TrainResult res;
  while (opt.step < total_steps) {
    Batch batch = sample_batch(ds, bsz, cfg.use_hard_negatives, model.cfg.video.frames,
                               model.cfg.video.frame_h, model.cfg.video.frame_w, data_rng);
    StepReport rep = train_step(model, vocab, ds, batch, opt, cfg, toggle);
    ++res.steps_run;
    if (metrics.is_open()) {
      nlohmann::json line = {{"step", opt.step},       {"total", rep.total},
                             {"v2t", rep.v2t},         {"t2v", rep.t2v},
                             {"box", rep.box},         {"word", rep.word},
                             {"grad_norm", rep.grad_norm},
                             {"matched_pairs", rep.matched_pairs},
                             {"dropped_gt", rep.dropped_gt},
                             {"wall_ms", rep.wall_ms}};
      metrics << line.dump() << "\n";
    }
    res.log.push_back(rep);
    if (!out_dir.empty() && opt.step % steps_per_epoch == 0)
      save_checkpoint(out_dir + "/checkpoint.ckpt", make_checkpoint());
  }

  res.final_checkpoint = make_checkpoint();
  if (!out_dir.empty())
    save_checkpoint(out_dir + "/checkpoint.ckpt", res.final_checkpoint);
  return res;
}

// ---------------------------------------------------------------- grad check

namespace {

double loss_value(Model& model, const Vocabulary& vocab, const Dataset& ds,
                  const Batch& batch, const LossConfig& cfg, const LossToggle& toggle) {
  Graph g;
  nn::Bound b = model.bind(g, false);
  BatchLoss bl = build_batch_loss(g, b, model, vocab, ds, batch, cfg, toggle);
  return g.val(bl.total)(0, 0);
}

}  // namespace

GradCheckReport compare_gradients_fd(Model& model, const Vocabulary& vocab,
                                     const Dataset& ds, const Batch& batch,
                                     const LossConfig& cfg, const LossToggle& toggle,
                                     const std::map<std::string, Tensor>& analytic,
                                     int min_per_group, double step, Rng& rng) {
  std::map<ParamGroup, std::vector<std::string>> by_group;
  for (const auto& [name, p] : model.params)
    if (model.is_trainable(name)) by_group[param_group_of(name)].push_back(name);

  GradCheckReport rep;
  for (const auto& [group, names] : by_group) {
    GroupGradReport gr;
    gr.group = param_group_name(group);
    int64_t total = 0;
    std::vector<int64_t> offsets;
    for (const auto& n : names) {
      offsets.push_back(total);
      total += static_cast<int64_t>(model.params.at(n).v.size());
    }
    std::vector<int64_t> picks;
    if (total <= min_per_group) {
      picks.resize(total);
      for (int64_t i = 0; i < total; ++i) picks[i] = i;
    } else {
      std::set<int64_t> seen;
      while (static_cast<int>(seen.size()) < min_per_group)
        seen.insert(rng.uniform_int(static_cast<int>(total)));
      picks.assign(seen.begin(), seen.end());
    }
    for (int64_t flat : picks) {
      size_t which = std::upper_bound(offsets.begin(), offsets.end(), flat) -
                     offsets.begin() - 1;
      const std::string& name = names[which];
      int idx = static_cast<int>(flat - offsets[which]);
      double keep = model.params[name].v[idx];
      model.params[name].v[idx] = keep + step;
      double hi = loss_value(model, vocab, ds, batch, cfg, toggle);
      model.params[name].v[idx] = keep - step;
      double lo = loss_value(model, vocab, ds, batch, cfg, toggle);
      model.params[name].v[idx] = keep;
      double numeric = (hi - lo) / (2 * step);
      double a = analytic.at(name).v[idx];
      double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
      ++gr.checked;
      if (rel > gr.max_rel_err) {
        gr.max_rel_err = rel;
        gr.worst_param = name;
        gr.worst_index = idx;
        gr.analytic = a;
        gr.numeric = numeric;
      }
    }
    rep.max_rel_err = std::max(rep.max_rel_err, gr.max_rel_err);
    rep.groups.push_back(std::move(gr));
  }
  return rep;
}

GradCheckReport gradient_check(Model& model, const Vocabulary& vocab, const Dataset& ds,
                               const Batch& batch, const TrainConfig& cfg,
                               const LossToggle& toggle, int min_per_group, double step) {
  cfg.validate();
  Graph g;
  nn::Bound bound = model.bind(g, true);
  BatchLoss bl = build_batch_loss(g, bound, model, vocab, ds, batch, cfg.loss_config(),
                                  toggle);
  g.backward(bl.total);
  std::map<std::string, Tensor> analytic;
  for (const auto& [name, p] : model.params) {
    if (!model.is_trainable(name)) continue;
    Graph::Id id = bound[name];
    analytic.emplace(name, g.has_grad(id) ? g.grad(id) : Tensor::zeros(p.rows, p.cols));
  }
  Rng rng(cfg.seed ^ 0xA5A5A5A5A5A5A5A5ull);
  return compare_gradients_fd(model, vocab, ds, batch, cfg.loss_config(), toggle, analytic,
                              min_per_group, step, rng);
}

}  // namespace ovl
