#include "ovl/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace ovl {

using nlohmann::json;

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0) || !(nb > 0)) throw std::invalid_argument("cosine: zero-norm embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------- MCQ

McqAccuracy mcq_accuracy(const std::vector<McqQuestion>& questions) {
  McqAccuracy acc;
  int hit_inter = 0, hit_intra = 0;
  for (const auto& q : questions) {
    if (q.candidates.empty()) throw std::invalid_argument("mcq: no candidates");
    int best = 0;
    double best_sim = cosine(q.query, q.candidates[0]);
    for (int i = 1; i < static_cast<int>(q.candidates.size()); ++i) {
      double s = cosine(q.query, q.candidates[i]);
      if (s > best_sim) {  // ties keep the lowest index
        best_sim = s;
        best = i;
      }
    }
    bool hit = best == q.answer;
    if (q.split == McqSplit::kInter) {
      ++acc.n_inter;
      hit_inter += hit ? 1 : 0;
    } else {
      ++acc.n_intra;
      hit_intra += hit ? 1 : 0;
    }
  }
  acc.inter = acc.n_inter ? static_cast<double>(hit_inter) / acc.n_inter : 0.0;
  acc.intra = acc.n_intra ? static_cast<double>(hit_intra) / acc.n_intra : 0.0;
  return acc;
}

// ---------------------------------------------------------------- retrieval

namespace {

std::vector<int> ranking(const Tensor& sim, int row) {
  std::vector<int> order(sim.cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sim(row, a) > sim(row, b); });
  return order;
}

}  // namespace

double retrieval_map(const Tensor& sim, const Tensor& rel, int* skipped) {
  if (!sim.same_shape(rel)) throw std::invalid_argument("retrieval_map: shape mismatch");
  double total = 0;
  int used = 0, skip = 0;
  for (int i = 0; i < sim.rows; ++i) {
    int n_pos = 0;
    for (int j = 0; j < rel.cols; ++j) {
      double r = rel(i, j);
      if (r != 0.0 && r != 1.0)
        throw std::invalid_argument("retrieval_map: relevance must be binary");
      n_pos += r == 1.0 ? 1 : 0;
    }
    if (n_pos == 0) {
      ++skip;
      continue;
    }
    std::vector<int> order = ranking(sim, i);
    double hits = 0, ap = 0;
    for (size_t k = 0; k < order.size(); ++k) {
      if (rel(i, order[k]) == 1.0) {
        hits += 1;
        ap += hits / static_cast<double>(k + 1);
      }
    }
    total += ap / n_pos;
    ++used;
  }
  if (skipped) *skipped = skip;
  return used ? total / used : 0.0;
}

double retrieval_ndcg(const Tensor& sim, const Tensor& rel, int* skipped) {
  if (!sim.same_shape(rel)) throw std::invalid_argument("retrieval_ndcg: shape mismatch");
  double total = 0;
  int used = 0, skip = 0;
  for (int i = 0; i < sim.rows; ++i) {
    double grade_sum = 0;
    for (int j = 0; j < rel.cols; ++j) {
      if (rel(i, j) < 0 || rel(i, j) > 1)
        throw std::invalid_argument("retrieval_ndcg: grades must be in [0,1]");
      grade_sum += rel(i, j);
    }
    if (grade_sum == 0) {
      ++skip;
      continue;
    }
    std::vector<int> order = ranking(sim, i);
    double dcg = 0;
    for (size_t k = 0; k < order.size(); ++k)
      dcg += rel(i, order[k]) / std::log2(static_cast<double>(k) + 2.0);
    std::vector<double> ideal(rel.cols);
    for (int j = 0; j < rel.cols; ++j) ideal[j] = rel(i, j);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0;
    for (size_t k = 0; k < ideal.size(); ++k)
      idcg += ideal[k] / std::log2(static_cast<double>(k) + 2.0);
    total += dcg / idcg;
    ++used;
  }
  if (skipped) *skipped = skip;
  return used ? total / used : 0.0;
}

namespace {

double jaccard(const std::set<int>& a, const std::set<int>& b) {
  if (a.empty() && b.empty()) return 1.0;  // identical emptiness
  int inter = 0;
  for (int x : a) inter += b.count(x) ? 1 : 0;
  int uni = static_cast<int>(a.size() + b.size()) - inter;
  return uni > 0 ? static_cast<double>(inter) / uni : 1.0;
}

}  // namespace

Tensor caption_relevance(const std::vector<std::set<int>>& nouns_a,
                         const std::vector<std::set<int>>& verbs_a,
                         const std::vector<std::set<int>>& nouns_b,
                         const std::vector<std::set<int>>& verbs_b) {
  if (nouns_a.size() != verbs_a.size() || nouns_b.size() != verbs_b.size())
    throw std::invalid_argument("caption_relevance: set list mismatch");
  Tensor rel(static_cast<int>(nouns_a.size()), static_cast<int>(nouns_b.size()));
  for (int i = 0; i < rel.rows; ++i)
    for (int j = 0; j < rel.cols; ++j)
      rel(i, j) = 0.5 * (jaccard(nouns_a[i], nouns_b[j]) + jaccard(verbs_a[i], verbs_b[j]));
  return rel;
}

// ---------------------------------------------------------------- classify

ClassifyResult classify(const std::vector<std::vector<Embedding>>& videos,
                        const std::vector<Embedding>& class_embs,
                        const std::vector<int>& labels) {
  if (videos.size() != labels.size())
    throw std::invalid_argument("classify: label count mismatch");
  int n_classes = static_cast<int>(class_embs.size());
  std::vector<int> per_class_total(n_classes, 0), per_class_hit(n_classes, 0);
  int hits = 0;
  for (size_t v = 0; v < videos.size(); ++v) {
    if (videos[v].empty()) throw std::invalid_argument("classify: video without clips");
    if (labels[v] < 0 || labels[v] >= n_classes)
      throw std::invalid_argument("classify: label out of range");
    std::vector<double> logits(n_classes, -HUGE_VAL);
    for (const Embedding& clip : videos[v])
      for (int c = 0; c < n_classes; ++c)
        logits[c] = std::max(logits[c], cosine(clip, class_embs[c]));  // max-pool
    int pred = 0;
    for (int c = 1; c < n_classes; ++c)
      if (logits[c] > logits[pred]) pred = c;
    ++per_class_total[labels[v]];
    if (pred == labels[v]) {
      ++hits;
      ++per_class_hit[labels[v]];
    }
  }
  ClassifyResult res;
  res.top1 = videos.empty() ? 0.0 : static_cast<double>(hits) / videos.size();
  double recall_sum = 0;
  int classes_used = 0;
  for (int c = 0; c < n_classes; ++c) {
    if (per_class_total[c] == 0) {
      ++res.excluded_classes;
      continue;
    }
    recall_sum += static_cast<double>(per_class_hit[c]) / per_class_total[c];
    ++classes_used;
  }
  res.mean_class = classes_used ? recall_sum / classes_used : 0.0;
  return res;
}

// ---------------------------------------------------------------- grounding

GroundClipResult ground_clip(const Model& model, const Vocabulary& vocab,
                             const VideoFrames& frames,
                             const std::vector<std::string>& noun_phrases) {
  int k = model.cfg.decoder.object_queries;
  if (static_cast<int>(noun_phrases.size()) > k)
    throw std::invalid_argument("ground_clip: more nouns than object queries");
  ad::Graph g;
  nn::Bound b = model.bind(g, false);
  ClipForward f = model.forward_clip(b, frames);
  const Tensor& grid = g.val(f.boxes);
  int t = model.cfg.decoder.frames;
  auto layout = model.box_layout();
  auto boxes = boxes_from_grid(grid, layout.hand_queries + layout.object_queries, t);

  std::vector<int> noun_query;
  std::vector<double> noun_score;
  if (!noun_phrases.empty()) {
    Tensor nouns = g.val(model.phrase_embeddings(b, vocab, noun_phrases));
    const Tensor& names = g.val(f.names);
    Tensor cost = noun_align_cost(nouns, names);
    Assignment a = hungarian_solve(cost);
    for (size_t i = 0; i < noun_phrases.size(); ++i) {
      noun_query.push_back(a.col_of_row[i]);
      noun_score.push_back(-cost(static_cast<int>(i), a.col_of_row[i]));
    }
  }

  GroundClipResult res;
  res.frames.resize(t);
  for (int i = 0; i < t; ++i) {
    GroundedFrame& fr = res.frames[i];
    fr.left_hand = boxes[0][i];   // first hand query reads out the left hand
    fr.right_hand = boxes[1][i];  // second hand query the right hand
    for (size_t n = 0; n < noun_query.size(); ++n) {
      fr.noun_boxes.push_back(boxes[layout.hand_queries + noun_query[n]][i]);
      fr.noun_query.push_back(noun_query[n]);
      fr.noun_score.push_back(noun_score[n]);
    }
  }
  return res;
}

GroundClipResult ground_single_image(const Model& model, const Vocabulary& vocab,
                                     const VideoFrames& one_frame,
                                     const std::vector<std::string>& noun_phrases) {
  if (one_frame.t != 1) throw std::invalid_argument("ground_single_image: expects t=1");
  int t = model.cfg.video.frames;
  VideoFrames rep(t, one_frame.h, one_frame.w);
  for (int f = 0; f < t; ++f)
    std::copy(one_frame.rgb.begin(), one_frame.rgb.end(),
              rep.rgb.begin() + static_cast<size_t>(f) * one_frame.h * one_frame.w * 3);
  return ground_clip(model, vocab, rep, noun_phrases);
}

AssignMode assign_mode_from_string(const std::string& s) {
  if (s == "predicted") return AssignMode::kPredicted;
  if (s == "random") return AssignMode::kRandom;
  if (s == "gt_matching") return AssignMode::kGtMatching;
  throw std::invalid_argument("unknown grounding mode: " + s);
}

namespace {

// Hands are always matched by side label; unknown-side boxes fill leftover
// slots in order.
int hand_hits_from_sides(const std::vector<HandDetection>& gt,
                         const std::optional<Box>& left, const std::optional<Box>& right) {
  int hits = 0;
  bool left_used = false, right_used = false;
  for (const auto& h : gt) {
    std::optional<Box> pick;
    if (h.side == HandSide::kLeft && left) {
      pick = left;
      left_used = true;
    } else if (h.side == HandSide::kRight && right) {
      pick = right;
      right_used = true;
    } else if (h.side == HandSide::kUnknown) {
      if (left && !left_used) {
        pick = left;
        left_used = true;
      } else if (right && !right_used) {
        pick = right;
        right_used = true;
      }
    }
    if (pick && center_inside(*pick, h.box)) ++hits;
  }
  return hits;
}

void detector_hand_slots(const std::vector<HandDetection>& dets, std::optional<Box>* left,
                         std::optional<Box>* right) {
  for (const auto& d : dets) {
    if (d.side == HandSide::kLeft && !*left) *left = d.box;
    else if (d.side == HandSide::kRight && !*right) *right = d.box;
  }
  for (const auto& d : dets) {
    if (d.side != HandSide::kUnknown) continue;
    if (!*left) *left = d.box;
    else if (!*right) *right = d.box;
  }
}

}  // namespace

double localization_accuracy(const std::vector<GroundingInstance>& instances,
                             AssignMode mode, Rng* rng) {
  if (mode == AssignMode::kRandom && rng == nullptr)
    throw std::invalid_argument("localization_accuracy: random mode needs an rng");
  long long targets = 0, hits = 0;
  for (const auto& inst : instances) {
    targets += static_cast<long long>(inst.gt_hands.size() + inst.gt_objects.size());
    if (mode == AssignMode::kPredicted) {
      hits += hand_hits_from_sides(inst.gt_hands, inst.pred_left_hand, inst.pred_right_hand);
      for (size_t i = 0; i < inst.gt_objects.size(); ++i)
        if (i < inst.pred_noun_boxes.size() &&
            center_inside(inst.pred_noun_boxes[i], inst.gt_objects[i].box))
          ++hits;
      continue;
    }
    std::optional<Box> left, right;
    detector_hand_slots(inst.det_hands, &left, &right);
    hits += hand_hits_from_sides(inst.gt_hands, left, right);
    int n_gt = static_cast<int>(inst.gt_objects.size());
    int n_det = static_cast<int>(inst.det_objects.size());
    if (n_gt == 0 || n_det == 0) continue;  // all object targets miss
    if (mode == AssignMode::kRandom) {
      std::vector<int> order(n_det);
      std::iota(order.begin(), order.end(), 0);
      rng->shuffle(order);
      for (int i = 0; i < n_gt && i < n_det; ++i)
        if (center_inside(inst.det_objects[order[i]], inst.gt_objects[i].box)) ++hits;
    } else {  // kGtMatching: Hungarian on -IoU
      bool gt_rows = n_gt <= n_det;
      int rows = gt_rows ? n_gt : n_det, cols = gt_rows ? n_det : n_gt;
      Tensor cost(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
          const Box& gb = gt_rows ? inst.gt_objects[i].box : inst.gt_objects[j].box;
          const Box& db = gt_rows ? inst.det_objects[j] : inst.det_objects[i];
          cost(i, j) = -iou(gb, db);
        }
      Assignment a = hungarian_solve(cost);
      for (int r = 0; r < rows; ++r) {
        int gt_i = gt_rows ? r : a.col_of_row[r];
        int det_i = gt_rows ? a.col_of_row[r] : r;
        if (center_inside(inst.det_objects[det_i], inst.gt_objects[gt_i].box)) ++hits;
      }
    }
  }
  return targets > 0 ? static_cast<double>(hits) / targets : 0.0;
}

RandomBaseline localization_accuracy_random(const std::vector<GroundingInstance>& instances,
                                            int n_draws, uint64_t seed) {
  if (n_draws < 1) throw std::invalid_argument("localization_accuracy_random: n_draws < 1");
  std::vector<double> vals(n_draws);
  for (int d = 0; d < n_draws; ++d) {
    Rng rng(seed + static_cast<uint64_t>(d));
    vals[d] = localization_accuracy(instances, AssignMode::kRandom, &rng);
  }
  RandomBaseline out;
  out.draws = n_draws;
  for (double v : vals) out.mean += v;
  out.mean /= n_draws;
  double ss = 0;
  for (double v : vals) ss += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(ss / n_draws);
  return out;
}

std::vector<GroundingInstance> build_grounding_instances(
    const Model& model, const Vocabulary& vocab, const Dataset& ds,
    const std::map<std::string, std::vector<FrameDetections>>& clean, bool run_model,
    int max_clips) {
  std::vector<GroundingInstance> out;
  int t = model.cfg.video.frames;
  int h = model.cfg.video.frame_h, w = model.cfg.video.frame_w;
  int clips_done = 0;
  for (const auto& clip : ds.clips) {
    auto it = clean.find(clip.clip_id);
    if (it == clean.end()) continue;
    if (max_clips > 0 && clips_done >= max_clips) break;
    ++clips_done;
    std::vector<int> canon = canonical_sample_indices(clip.total_frames(), t);
    std::map<int, int> slot_of;
    for (int i = 0; i < t; ++i) slot_of.emplace(canon[i], i);

    // nouns whose boxes the model must produce, deduplicated in order
    std::vector<std::string> nouns;
    for (const auto& fd : it->second)
      for (const auto& od : fd.objects)
        if (od.in_contact &&
            std::find(nouns.begin(), nouns.end(), od.noun) == nouns.end())
          nouns.push_back(od.noun);

    GroundClipResult grounded;
    if (run_model) {
      VideoFrames frames = render_clip_frames(clip, canon, h, w);
      grounded = ground_clip(model, vocab, frames, nouns);
    }
    std::map<int, const FrameDetections*> pseudo_by_frame;
    for (const auto& fd : clip.detections) pseudo_by_frame.emplace(fd.frame_idx, &fd);

    for (const auto& fd : it->second) {
      auto slot_it = slot_of.find(fd.frame_idx);
      if (slot_it == slot_of.end()) continue;  // only readable frames
      GroundingInstance inst;
      inst.gt_hands = fd.hands;
      for (const auto& od : fd.objects)
        if (od.in_contact) inst.gt_objects.push_back(od);
      if (run_model) {
        const GroundedFrame& gf = grounded.frames[slot_it->second];
        inst.pred_left_hand = gf.left_hand;
        inst.pred_right_hand = gf.right_hand;
        for (const auto& od : inst.gt_objects) {
          auto ni = std::find(nouns.begin(), nouns.end(), od.noun) - nouns.begin();
          inst.pred_noun_boxes.push_back(gf.noun_boxes[ni]);
        }
      }
      auto ps = pseudo_by_frame.find(fd.frame_idx);
      if (ps != pseudo_by_frame.end()) {
        inst.det_hands = ps->second->hands;
        for (const auto& od : ps->second->objects) inst.det_objects.push_back(od.box);
      }
      out.push_back(std::move(inst));
    }
  }
  return out;
}

TemporalConsistency temporal_consistency(
    const Model& model, const Vocabulary& vocab, const Dataset& ds,
    const std::map<std::string, std::vector<FrameDetections>>& clean, int max_clips) {
  TemporalConsistency res;
  int t = model.cfg.video.frames;
  int h = model.cfg.video.frame_h, w = model.cfg.video.frame_w;
  double model_sum = 0, pseudo_sum = 0;
  int clips_done = 0;
  for (const auto& clip : ds.clips) {
    auto it = clean.find(clip.clip_id);
    if (it == clean.end() || it->second.empty()) continue;
    if (max_clips > 0 && clips_done >= max_clips) break;
    std::string noun;
    for (const auto& od : it->second.front().objects)
      if (od.in_contact) noun = od.noun;
    if (noun.empty()) continue;

    std::vector<int> canon = canonical_sample_indices(clip.total_frames(), t);
    VideoFrames frames = render_clip_frames(clip, canon, h, w);
    GroundClipResult grounded = ground_clip(model, vocab, frames, {noun});
    double m = 0;
    int pairs = 0;
    for (int i = 0; i < t; ++i)
      for (int j = i + 1; j < t; ++j) {
        m += iou(grounded.frames[i].noun_boxes[0], grounded.frames[j].noun_boxes[0]);
        ++pairs;
      }
    if (pairs == 0) continue;
    model_sum += m / pairs;

    // pseudo boxes have no identity: pair frames by max-IoU Hungarian
    std::vector<std::vector<Box>> pseudo;
    for (const auto& fd : clip.detections)
      if (!fd.objects.empty()) {
        std::vector<Box> boxes;
        for (const auto& od : fd.objects) boxes.push_back(od.box);
        pseudo.push_back(std::move(boxes));
      }
    double p = 0;
    int p_pairs = 0;
    for (size_t i = 0; i < pseudo.size(); ++i)
      for (size_t j = i + 1; j < pseudo.size(); ++j) {
        const auto& small = pseudo[i].size() <= pseudo[j].size() ? pseudo[i] : pseudo[j];
        const auto& large = pseudo[i].size() <= pseudo[j].size() ? pseudo[j] : pseudo[i];
        Tensor cost(static_cast<int>(small.size()), static_cast<int>(large.size()));
        for (int a = 0; a < cost.rows; ++a)
          for (int b = 0; b < cost.cols; ++b) cost(a, b) = -iou(small[a], large[b]);
        Assignment as = hungarian_solve(cost);
        double matched = 0;
        for (int a = 0; a < cost.rows; ++a) matched += -cost(a, as.col_of_row[a]);
        p += matched / cost.rows;
        ++p_pairs;
      }
    pseudo_sum += p_pairs > 0 ? p / p_pairs : 0.0;
    ++clips_done;
  }
  res.clips = clips_done;
  if (clips_done > 0) {
    res.model_mean_iou = model_sum / clips_done;
    res.pseudo_mean_iou = pseudo_sum / clips_done;
  }
  return res;
}

// ---------------------------------------------------------------- drivers

std::vector<Embedding> embed_all_clips(const EvalContext& ctx, int max_clips) {
  const Model& m = *ctx.model;
  std::vector<Embedding> out;
  int n = static_cast<int>(ctx.ds->clips.size());
  if (max_clips > 0) n = std::min(n, max_clips);
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const ClipSample& clip = ctx.ds->clips[i];
    std::vector<int> canon = canonical_sample_indices(clip.total_frames(),
                                                      m.cfg.video.frames);
    out.push_back(m.embed_clip(render_clip_frames(clip, canon, m.cfg.video.frame_h,
                                                  m.cfg.video.frame_w)));
  }
  return out;
}

std::vector<Embedding> embed_all_narrations(const EvalContext& ctx, int max_clips) {
  std::vector<Embedding> out;
  int n = static_cast<int>(ctx.ds->clips.size());
  if (max_clips > 0) n = std::min(n, max_clips);
  out.reserve(n);
  for (int i = 0; i < n; ++i)
    out.push_back(ctx.model->embed_text(*ctx.vocab, ctx.ds->clips[i].narration));
  return out;
}

std::vector<McqQuestion> build_mcq_questions(const EvalContext& ctx,
                                             const std::vector<Embedding>& clip_embs,
                                             const std::vector<Embedding>& narr_embs,
                                             int per_split, Rng& rng) {
  const Dataset& ds = *ctx.ds;
  int n = static_cast<int>(clip_embs.size());
  std::vector<McqQuestion> out;

  // intra: all candidates from the answer clip's own video
  std::vector<const std::vector<int>*> big_videos;
  for (const auto& [vid, clips] : ds.videos) {
    bool in_range = true;
    for (int c : clips)
      if (c >= n) in_range = false;
    if (in_range && clips.size() >= 5) big_videos.push_back(&clips);
  }
  if (!big_videos.empty()) {
    for (int q = 0; q < per_split; ++q) {
      const auto& clips = *big_videos[rng.uniform_int(static_cast<int>(big_videos.size()))];
      std::vector<int> pick = rng.sample_without_replacement(static_cast<int>(clips.size()), 5);
      McqQuestion question;
      question.split = McqSplit::kIntra;
      question.answer = rng.uniform_int(5);
      question.query = narr_embs[clips[pick[question.answer]]];
      for (int i = 0; i < 5; ++i) question.candidates.push_back(clip_embs[clips[pick[i]]]);
      out.push_back(std::move(question));
    }
  }

  // inter: distractors from other videos
  for (int q = 0; q < per_split; ++q) {
    int answer_clip = rng.uniform_int(n);
    McqQuestion question;
    question.split = McqSplit::kInter;
    question.answer = rng.uniform_int(5);
    question.query = narr_embs[answer_clip];
    std::vector<int> cand;
    std::set<std::string> used_videos = {ds.clips[answer_clip].video_id};
    while (static_cast<int>(cand.size()) < 4) {
      int c = rng.uniform_int(n);
      if (used_videos.count(ds.clips[c].video_id)) continue;
      used_videos.insert(ds.clips[c].video_id);
      cand.push_back(c);
    }
    for (int i = 0, d = 0; i < 5; ++i)
      question.candidates.push_back(clip_embs[i == question.answer ? answer_clip : cand[d++]]);
    out.push_back(std::move(question));
  }
  return out;
}

RetrievalSummary retrieval_eval(const EvalContext& ctx,
                                const std::vector<Embedding>& clip_embs,
                                const std::vector<Embedding>& narr_embs) {
  const Dataset& ds = *ctx.ds;
  int n = static_cast<int>(clip_embs.size());
  std::vector<std::set<int>> nouns, verbs;
  for (int i = 0; i < n; ++i) {
    nouns.push_back(ds.clips[i].noun_groups);
    verbs.push_back(ds.clips[i].verb_groups);
  }
  Tensor rel = caption_relevance(nouns, verbs, nouns, verbs);
  Tensor rel_bin(rel.rows, rel.cols);
  for (size_t i = 0; i < rel.v.size(); ++i) rel_bin.v[i] = rel.v[i] == 1.0 ? 1.0 : 0.0;

  Tensor sim(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sim(i, j) = cosine(clip_embs[i], narr_embs[j]);
  Tensor sim_t(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sim_t(i, j) = sim(j, i);

  RetrievalSummary s;
  int sk1 = 0, sk2 = 0, sk3 = 0, sk4 = 0;
  s.map_v2t = retrieval_map(sim, rel_bin, &sk1);
  s.map_t2v = retrieval_map(sim_t, rel_bin, &sk2);
  s.map_avg = 0.5 * (s.map_v2t + s.map_t2v);
  s.ndcg_v2t = retrieval_ndcg(sim, rel, &sk3);
  s.ndcg_t2v = retrieval_ndcg(sim_t, rel, &sk4);
  s.ndcg_avg = 0.5 * (s.ndcg_v2t + s.ndcg_t2v);
  s.skipped_map = sk1 + sk2;
  s.skipped_ndcg = sk3 + sk4;
  return s;
}

ClassifyResult classify_eval(const EvalContext& ctx, int clips_per_video) {
  const Dataset& ds = *ctx.ds;
  const Model& m = *ctx.model;
  if (clips_per_video < 1) throw std::invalid_argument("classify_eval: clips_per_video < 1");

  // class = (verb group, first noun group); text = canonical template
  std::map<std::pair<int, int>, int> class_ids;
  std::vector<std::string> class_texts;
  std::vector<int> labels;
  auto group_canonical = [&](const std::vector<NounGroup>& gs, int id) -> std::string {
    for (const auto& g : gs)
      if (g.id == id) return g.canonical;
    return "";
  };
  std::vector<std::pair<int, int>> clip_keys;
  for (const auto& clip : ds.clips) {
    if (clip.verb_groups.empty() || clip.noun_matches.empty()) {
      clip_keys.emplace_back(-1, -1);
      continue;
    }
    clip_keys.emplace_back(*clip.verb_groups.begin(), clip.noun_matches.front().group_id);
  }
  for (const auto& key : clip_keys) {
    if (key.first < 0 || class_ids.count(key)) continue;
    class_ids.emplace(key, static_cast<int>(class_texts.size()));
    class_texts.push_back("#C C " + group_canonical(ds.taxonomy.verbs, key.first) +
                          " the " + group_canonical(ds.taxonomy.nouns, key.second));
  }
  if (class_texts.empty()) throw std::runtime_error("classify_eval: no classes");

  std::vector<Embedding> class_embs;
  for (const auto& text : class_texts) class_embs.push_back(m.embed_text(*ctx.vocab, text));

  std::vector<std::vector<Embedding>> videos;
  for (size_t i = 0; i < ds.clips.size(); ++i) {
    if (clip_keys[i].first < 0) continue;
    const ClipSample& clip = ds.clips[i];
    int total = clip.total_frames();
    int t = m.cfg.video.frames;
    std::vector<Embedding> windows;
    int n_windows = std::min(clips_per_video, std::max(1, total - t + 1));
    for (int wdx = 0; wdx < n_windows; ++wdx) {
      int start = n_windows == 1
                      ? (total - t) / 2
                      : wdx * (total - t) / (n_windows - 1);
      std::vector<int> idx(t);
      for (int f = 0; f < t; ++f) idx[f] = start + f;
      windows.push_back(m.embed_clip(
          render_clip_frames(clip, idx, m.cfg.video.frame_h, m.cfg.video.frame_w)));
    }
    videos.push_back(std::move(windows));
    labels.push_back(class_ids.at(clip_keys[i]));
  }
  return classify(videos, class_embs, labels);
}

// ---------------------------------------------------------------- features

void extract_features(const EvalContext& ctx, const std::string& path, int max_clips) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("extract_features: cannot write " + path);
  std::vector<Embedding> embs = embed_all_clips(ctx, max_clips);
  for (size_t i = 0; i < embs.size(); ++i) {
    const ClipSample& clip = ctx.ds->clips[i];
    json j = {{"clip_id", clip.clip_id},
              {"t_start_s", clip.t_start_s},
              {"t_end_s", clip.t_end_s},
              {"feature", embs[i]}};
    out << j.dump() << "\n";
  }
}

std::vector<FeatureRecord> read_feature_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_feature_file: cannot open " + path);
  std::vector<FeatureRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      FeatureRecord r;
      r.clip_id = j.at("clip_id").get<std::string>();
      r.t_start_s = j.at("t_start_s").get<double>();
      r.t_end_s = j.at("t_end_s").get<double>();
      r.feature = j.at("feature").get<std::vector<double>>();
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ovl
