#include "ovl/losses.hpp"

#include <algorithm>

namespace ovl {

using ad::Graph;

BatchStructure build_positive_sets(const std::vector<std::set<int>>& nouns,
                                   const std::vector<std::set<int>>& verbs) {
  if (nouns.size() != verbs.size())
    throw std::invalid_argument("build_positive_sets: size mismatch");
  BatchStructure s;
  s.nouns = nouns;
  s.verbs = verbs;
  int n = static_cast<int>(nouns.size());
  auto intersects = [](const std::set<int>& a, const std::set<int>& b) {
    for (int x : a)
      if (b.count(x)) return true;
    return false;
  };
  s.positives.resize(n);
  for (int m = 0; m < n; ++m) {
    for (int k = 0; k < n; ++k) {
      if (k == m) {
        s.positives[m].push_back(k);  // a sample always shares its own sets
        continue;
      }
      if (intersects(nouns[m], nouns[k]) && intersects(verbs[m], verbs[k]))
        s.positives[m].push_back(k);
    }
    std::sort(s.positives[m].begin(), s.positives[m].end());
  }
  return s;
}

// ---------------------------------------------------------------- EgoNCE

Graph::Id egonce_direction(Graph& g, Graph::Id anchors, Graph::Id targets,
                           std::optional<Graph::Id> hard_targets,
                           const BatchStructure& s, const LossConfig& cfg) {
  cfg.validate();
  int b = g.val(anchors).rows;
  if (b != s.size() || g.val(targets).rows != b)
    throw std::invalid_argument("egonce: batch size mismatch");
  if (hard_targets && g.val(*hard_targets).rows != b)
    throw std::invalid_argument("egonce: hard-negative size mismatch");

  Graph::Id an = g.l2_normalize_rows(anchors);
  Graph::Id tn = g.l2_normalize_rows(targets);
  Graph::Id cat = hard_targets
                      ? g.concat_rows({tn, g.l2_normalize_rows(*hard_targets)})
                      : tn;
  Graph::Id sims = g.scale(g.matmul_nt(an, cat), 1.0 / cfg.tau);

  Graph::Id lse = g.logsumexp_rows(sims);  // b x 1
  Graph::Id lse_term = g.scale(g.sum_all(lse), 1.0 / b);

  std::vector<std::pair<int, int>> pairs;
  std::vector<double> weights;
  for (int m = 0; m < b; ++m) {
    const auto& pm = s.positives[m];
    for (int k : pm) {
      pairs.emplace_back(m, k);
      weights.push_back(1.0 / (static_cast<double>(b) * pm.size()));
    }
  }
  Graph::Id sel = g.select(sims, std::move(pairs));
  Tensor w(static_cast<int>(weights.size()), 1);
  w.v = weights;
  Graph::Id pos_term = g.sum_all(g.mul_const(sel, std::move(w)));
  return g.sub(lse_term, pos_term);
}

EgoNceLoss egonce(Graph& g, Graph::Id v, Graph::Id t, std::optional<Graph::Id> v_hard,
                  std::optional<Graph::Id> t_hard, const BatchStructure& s,
                  const LossConfig& cfg) {
  if (v_hard.has_value() != t_hard.has_value())
    throw std::invalid_argument("egonce: hard negatives need both modalities");
  EgoNceLoss out;
  out.v2t = egonce_direction(g, v, t, t_hard, s, cfg);
  out.t2v = egonce_direction(g, t, v, v_hard, s, cfg);
  return out;
}

double egonce_value(const Tensor& v, const Tensor& t, const Tensor* v_hard,
                    const Tensor* t_hard, const BatchStructure& s,
                    const LossConfig& cfg, double* v2t_out, double* t2v_out) {
  Graph g;
  std::optional<Graph::Id> vh, th;
  if (v_hard) vh = g.constant(*v_hard);
  if (t_hard) th = g.constant(*t_hard);
  EgoNceLoss l = egonce(g, g.constant(v), g.constant(t), vh, th, s, cfg);
  double v2t = g.val(l.v2t)(0, 0), t2v = g.val(l.t2v)(0, 0);
  if (v2t_out) *v2t_out = v2t;
  if (t2v_out) *t2v_out = t2v;
  return v2t + t2v;
}

// ---------------------------------------------------------------- box loss

namespace {

std::vector<Box> grid_boxes_at(const Tensor& grid, int first_query, int n_queries,
                               int frames, int slot) {
  std::vector<Box> out;
  out.reserve(n_queries);
  for (int j = first_query; j < first_query + n_queries; ++j) {
    int r = j * frames + slot;
    out.push_back({grid(r, 0), grid(r, 1), grid(r, 2), grid(r, 3)});
  }
  return out;
}

}  // namespace

MatchedBoxes match_boxes(const Tensor& grid_values, const BoxGridLayout& layout,
                         const std::vector<FrameDetections>& frames) {
  int q = layout.hand_queries + layout.object_queries;
  if (grid_values.rows != q * layout.frames || grid_values.cols != 4)
    throw std::invalid_argument("match_boxes: grid does not match layout");
  MatchedBoxes out;
  for (const FrameDetections& fd : frames) {
    if (fd.frame_idx < 0 || fd.frame_idx >= layout.frames)
      throw std::invalid_argument("match_boxes: frame slot out of range");

    std::vector<Box> gt_hands;
    for (const auto& h : fd.hands) gt_hands.push_back(h.box);
    if (static_cast<int>(gt_hands.size()) > layout.hand_queries) {
      out.dropped_gt += static_cast<int>(gt_hands.size()) - layout.hand_queries;
      gt_hands.resize(layout.hand_queries);  // surplus dropped highest-index-first
    }
    if (!gt_hands.empty()) {
      std::vector<Box> pred = grid_boxes_at(grid_values, 0, layout.hand_queries,
                                            layout.frames, fd.frame_idx);
      Assignment a = hungarian_solve(box_match_cost(gt_hands, pred));
      for (size_t i = 0; i < gt_hands.size(); ++i) {
        out.pred_rows.push_back(a.col_of_row[i] * layout.frames + fd.frame_idx);
        out.gt.push_back(gt_hands[i]);
      }
    }

    std::vector<Box> gt_objects;
    for (const auto& o : fd.objects) gt_objects.push_back(o.box);
    if (static_cast<int>(gt_objects.size()) > layout.object_queries) {
      out.dropped_gt += static_cast<int>(gt_objects.size()) - layout.object_queries;
      gt_objects.resize(layout.object_queries);
    }
    if (!gt_objects.empty()) {
      std::vector<Box> pred = grid_boxes_at(grid_values, layout.hand_queries,
                                            layout.object_queries, layout.frames,
                                            fd.frame_idx);
      Assignment a = hungarian_solve(box_match_cost(gt_objects, pred));
      for (size_t i = 0; i < gt_objects.size(); ++i) {
        out.pred_rows.push_back((layout.hand_queries + a.col_of_row[i]) * layout.frames +
                                fd.frame_idx);
        out.gt.push_back(gt_objects[i]);
      }
    }
  }
  return out;
}

Graph::Id box_pair_loss_sum(Graph& g, Graph::Id grid, const std::vector<int>& pred_rows,
                            const std::vector<Box>& gt) {
  if (pred_rows.size() != gt.size())
    throw std::invalid_argument("box_pair_loss_sum: size mismatch");
  int n = static_cast<int>(gt.size());
  if (n == 0) return g.scalar(0.0);

  Graph::Id p = g.gather_rows(grid, pred_rows);
  Tensor gt_center(n, 4), gx1(n, 1), gy1(n, 1), gx2(n, 1), gy2(n, 1), garea(n, 1);
  for (int i = 0; i < n; ++i) {
    const Box& b = gt[i];
    gt_center(i, 0) = b.cx;
    gt_center(i, 1) = b.cy;
    gt_center(i, 2) = b.w;
    gt_center(i, 3) = b.h;
    gx1(i, 0) = b.cx - b.w / 2;
    gy1(i, 0) = b.cy - b.h / 2;
    gx2(i, 0) = b.cx + b.w / 2;
    gy2(i, 0) = b.cy + b.h / 2;
    garea(i, 0) = b.w * b.h;
  }
  Graph::Id l1 = g.sum_all(g.abs(g.sub(p, g.constant(gt_center))));

  Graph::Id pcx = g.slice_cols(p, 0, 1), pcy = g.slice_cols(p, 1, 1);
  Graph::Id pw = g.slice_cols(p, 2, 1), ph = g.slice_cols(p, 3, 1);
  Graph::Id px1 = g.sub(pcx, g.scale(pw, 0.5)), px2 = g.add(pcx, g.scale(pw, 0.5));
  Graph::Id py1 = g.sub(pcy, g.scale(ph, 0.5)), py2 = g.add(pcy, g.scale(ph, 0.5));
  Graph::Id cgx1 = g.constant(gx1), cgy1 = g.constant(gy1);
  Graph::Id cgx2 = g.constant(gx2), cgy2 = g.constant(gy2);

  Graph::Id iw = g.relu(g.sub(g.minimum(px2, cgx2), g.maximum(px1, cgx1)));
  Graph::Id ih = g.relu(g.sub(g.minimum(py2, cgy2), g.maximum(py1, cgy1)));
  Graph::Id inter = g.mul(iw, ih);
  Graph::Id uni = g.sub(g.add(g.mul(pw, ph), g.constant(garea)), inter);
  Graph::Id hull_w = g.sub(g.maximum(px2, cgx2), g.minimum(px1, cgx1));
  Graph::Id hull_h = g.sub(g.maximum(py2, cgy2), g.minimum(py1, cgy1));
  Graph::Id hull = g.mul(hull_w, hull_h);
  Graph::Id giou_col = g.sub(g.div(inter, uni), g.div(g.sub(hull, uni), hull));
  Graph::Id giou_term = g.sub(g.scalar(static_cast<double>(n)), g.sum_all(giou_col));

  return g.add(l1, giou_term);
}

BoxLoss box_loss(Graph& g, Graph::Id grid, const BoxGridLayout& layout,
                 const std::vector<FrameDetections>& frames) {
  MatchedBoxes m = match_boxes(g.val(grid), layout, frames);
  BoxLoss out;
  out.matched_pairs = static_cast<int>(m.gt.size());
  out.dropped_gt = m.dropped_gt;
  if (m.gt.empty()) {
    out.loss = g.scalar(0.0);
    return out;
  }
  out.loss = g.scale(box_pair_loss_sum(g, grid, m.pred_rows, m.gt),
                     1.0 / out.matched_pairs);
  return out;
}

double box_loss_value(const Tensor& grid, const BoxGridLayout& layout,
                      const std::vector<FrameDetections>& frames) {
  Graph g;
  return g.val(box_loss(g, g.constant(grid), layout, frames).loss)(0, 0);
}

// ---------------------------------------------------------------- word loss

Graph::Id word_loss(Graph& g, Graph::Id names, Graph::Id dict,
                    const std::vector<int>& noun_dict_idx, const LossConfig& cfg) {
  cfg.validate();
  if (noun_dict_idx.empty()) return g.scalar(0.0);
  int k = g.val(names).rows;
  int d = g.val(dict).rows;
  std::vector<int> idx = noun_dict_idx;
  if (static_cast<int>(idx.size()) > k) idx.resize(k);  // first K nouns kept
  for (int i : idx)
    if (i < 0 || i >= d)
      throw std::invalid_argument("word_loss: dictionary index out of range");
  int n = static_cast<int>(idx.size());

  Graph::Id names_n = g.l2_normalize_rows(names);
  Graph::Id dict_n = g.l2_normalize_rows(dict);

  // Step 1: align nouns to predicted names (values only; the assignment is
  // data, not a differentiable path).
  Tensor nouns_v(n, g.val(dict_n).cols);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < nouns_v.cols; ++c) nouns_v(i, c) = g.val(dict_n)(idx[i], c);
  Assignment a = hungarian_solve(noun_align_cost(nouns_v, g.val(names_n)));

  // Step 2: InfoNCE of each matched name against the whole dictionary.
  Graph::Id matched = g.gather_rows(names_n, a.col_of_row);
  Graph::Id sims = g.scale(g.matmul_nt(matched, dict_n), 1.0 / cfg.tau);
  Graph::Id lse = g.sum_all(g.logsumexp_rows(sims));
  std::vector<std::pair<int, int>> numer;
  for (int i = 0; i < n; ++i) numer.emplace_back(i, idx[i]);
  Graph::Id pos = g.sum_all(g.select(sims, std::move(numer)));
  return g.scale(g.sub(lse, pos), 1.0 / n);
}

double word_loss_value(const Tensor& names, const Tensor& dict,
                       const std::vector<int>& noun_dict_idx, const LossConfig& cfg) {
  Graph g;
  return g.val(word_loss(g, g.constant(names), g.constant(dict), noun_dict_idx, cfg))(0, 0);
}

// ---------------------------------------------------------------- total

Graph::Id total_loss(Graph& g, const LossParts& parts, const LossConfig& cfg) {
  cfg.validate();
  Graph::Id l = g.add(parts.v2t, parts.t2v);
  l = g.add(l, parts.box);
  return g.add(l, g.scale(parts.word, cfg.lambda_word));
}

}  // namespace ovl
