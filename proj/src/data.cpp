#include "ovl/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace ovl {

using nlohmann::json;

namespace {

constexpr uint64_t kNoiseSalt = 0x9e3779b97f4a7c15ull;

const std::vector<std::string> kShapeCanon = {"square", "circle",  "triangle", "ring",
                                              "cross",  "diamond", "star",     "bar"};
const std::vector<std::vector<std::string>> kShapeSyn = {
    {"square", "block"}, {"circle", "disc"}, {"triangle"},        {"ring", "hoop"},
    {"cross", "plus sign"}, {"diamond", "rhombus"}, {"star"},     {"bar", "slab"}};
const std::vector<std::string> kColorNames = {"red",     "green", "blue",   "yellow",
                                              "magenta", "cyan",  "orange", "white"};
const double kColorRgb[8][3] = {{0.85, 0.10, 0.10}, {0.10, 0.75, 0.10},
                                {0.15, 0.20, 0.90}, {0.90, 0.85, 0.10},
                                {0.85, 0.10, 0.80}, {0.10, 0.80, 0.85},
                                {0.95, 0.55, 0.10}, {0.95, 0.95, 0.95}};
const double kSkin[3] = {0.87, 0.66, 0.41};

const std::vector<std::string> kVerbCanon = {"pick", "push", "lift", "shake", "rotate", "hold"};
const std::vector<std::vector<std::string>> kVerbSyn = {
    {"pick", "picks", "pick up", "picks up"},
    {"push", "pushes"},
    {"lift", "lifts"},
    {"shake", "shakes"},
    {"rotate", "rotates"},
    {"hold", "holds"}};
const std::vector<std::string> kVerbSurface = {"picks up", "pushes", "lifts",
                                               "shakes",   "rotates", "holds"};

// ------------------------------------------------------------------ scene

struct SceneObject {
  int shape = 0;
  int color = 0;
  double size = 0.3;
  double ax = 0.5, ay = 0.5;  // anchor
  double phase = 0;
};

struct Scene {
  bool is_static = false;
  double motion_amp = 0;
  int n_hands = 1;
  int verb = 0;
  double hand_size[2] = {0.16, 0.16};
  double hand_ax[2] = {0.3, 0.7}, hand_ay[2] = {0.6, 0.6};
  double hand_phase[2] = {0, 0};
  double contact_dx = 0.12, contact_dy = 0;
  std::vector<SceneObject> objects;  // [0] is in contact with hand 0
};

Scene scene_from_seed(uint64_t seed) {
  Rng r(seed);
  Scene s;
  s.is_static = (seed & 1ull) != 0;
  s.motion_amp = r.uniform(0.10, 0.18);
  if (s.is_static) s.motion_amp = 0.0;
  s.n_hands = r.bernoulli(0.96) ? 2 : 1;
  double u = r.uniform();
  int n_objects = u < 0.60 ? 1 : (u < 0.83 ? 2 : (u < 0.90 ? 3 : 4));
  s.verb = r.uniform_int(static_cast<int>(kVerbCanon.size()));

  std::vector<int> shape_pool(kShapeCanon.size());
  for (size_t i = 0; i < shape_pool.size(); ++i) shape_pool[i] = static_cast<int>(i);
  r.shuffle(shape_pool);
  std::vector<int> color_pool(kColorNames.size());
  for (size_t i = 0; i < color_pool.size(); ++i) color_pool[i] = static_cast<int>(i);
  r.shuffle(color_pool);

  s.objects.resize(n_objects);
  for (int i = 0; i < n_objects; ++i) {
    s.objects[i].shape = shape_pool[i];
    s.objects[i].color = color_pool[i];
    s.objects[i].size = r.uniform(0.26, 0.40);
    s.objects[i].phase = r.uniform(0, 2 * M_PI);
  }
  for (int i = 0; i < 2; ++i) {
    s.hand_size[i] = r.uniform(0.12, 0.20);
    s.hand_phase[i] = r.uniform(0, 2 * M_PI);
  }

  // anchors with a minimum separation, fixed retry budget
  std::vector<std::pair<double, double>> pts;
  auto place = [&]() {
    for (int attempt = 0; attempt < 40; ++attempt) {
      double x = r.uniform(0.2, 0.8), y = r.uniform(0.2, 0.8);
      bool ok = true;
      for (auto [px, py] : pts)
        if (std::hypot(x - px, y - py) < 0.22) ok = false;
      if (ok || attempt == 39) {
        pts.emplace_back(x, y);
        return;
      }
    }
  };
  for (int i = 0; i < s.n_hands + n_objects; ++i) place();
  for (int i = 0; i < s.n_hands; ++i) {
    s.hand_ax[i] = pts[i].first;
    s.hand_ay[i] = pts[i].second;
  }
  for (int i = 0; i < n_objects; ++i) {
    s.objects[i].ax = pts[s.n_hands + i].first;
    s.objects[i].ay = pts[s.n_hands + i].second;
  }

  double ang = r.uniform(0, 2 * M_PI);
  double mag = r.uniform(0.10, 0.16);
  s.contact_dx = mag * std::cos(ang);
  s.contact_dy = mag * std::sin(ang);
  return s;
}

// Unit-scale displacement of the acting hand for each verb at time t in [0,1].
void verb_path(int verb, double t, double phase, double* dx, double* dy) {
  switch (verb) {
    case 0: *dx = 0.2 * std::sin(2 * M_PI * t + phase); *dy = -t; break;          // pick
    case 1: *dx = t; *dy = 0.15 * std::sin(2 * M_PI * t + phase); break;          // push
    case 2: *dx = -0.3 * t; *dy = -t; break;                                      // lift
    case 3: *dx = 0.9 * std::sin(6 * M_PI * t + phase); *dy = 0; break;           // shake
    case 4:                                                                        // rotate
      *dx = 0.7 * (std::cos(2 * M_PI * t + phase) - std::cos(phase));
      *dy = 0.7 * (std::sin(2 * M_PI * t + phase) - std::sin(phase));
      break;
    default: *dx = 0.08 * std::sin(2 * M_PI * t + phase); *dy = 0; break;         // hold
  }
}

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

double clamp_center(double c, double size) {
  double half = size / 2;
  if (half > 0.5) half = 0.5;
  return std::min(1.0 - half, std::max(half, c));
}

void hand_center(const Scene& s, int hand, double t, double* cx, double* cy) {
  double dx = 0, dy = 0;
  if (hand == 0) {
    verb_path(s.verb, t, s.hand_phase[0], &dx, &dy);
  } else {
    dx = 0.4 * std::sin(2 * M_PI * t + s.hand_phase[1]);
    dy = 0.4 * std::cos(2 * M_PI * t + s.hand_phase[1]);
  }
  *cx = clamp_center(s.hand_ax[hand] + s.motion_amp * dx, s.hand_size[hand]);
  *cy = clamp_center(s.hand_ay[hand] + s.motion_amp * dy, s.hand_size[hand]);
}

void object_center(const Scene& s, int idx, double t, double* cx, double* cy) {
  const SceneObject& o = s.objects[idx];
  if (idx == 0) {
    double hx, hy;
    hand_center(s, 0, t, &hx, &hy);
    *cx = clamp_center(hx + s.contact_dx, o.size);
    *cy = clamp_center(hy + s.contact_dy, o.size);
    return;
  }
  double dx = 0.3 * std::sin(2 * M_PI * t + o.phase);
  double dy = 0.3 * std::cos(2 * M_PI * t + o.phase);
  *cx = clamp_center(o.ax + s.motion_amp * dx, o.size);
  *cy = clamp_center(o.ay + s.motion_amp * dy, o.size);
}

bool inside_shape(int shape, double u, double v) {
  switch (shape) {
    case 0: return true;                                        // square: whole box
    case 1: return u * u + v * v <= 1.0;                        // circle
    case 2: return std::abs(u) <= (1.0 - v) / 2;                // triangle, apex up
    case 3: {                                                   // ring
      double d = u * u + v * v;
      return d <= 1.0 && d >= 0.3;
    }
    case 4: return std::abs(u) <= 0.34 || std::abs(v) <= 0.34;  // cross
    case 5: return std::abs(u) + std::abs(v) <= 1.0;            // diamond
    case 6:                                                     // four-point star
      return std::abs(u * v) <= 0.11 && u * u + v * v <= 1.0;
    default: return std::abs(v) <= 0.35;                        // bar
  }
}

struct FrameGeometry {
  std::vector<Box> hands;    // index = hand slot
  std::vector<Box> objects;  // index 0 = in-contact object
};

FrameGeometry frame_geometry(const Scene& s, double t) {
  FrameGeometry g;
  for (int i = 0; i < s.n_hands; ++i) {
    double cx, cy;
    hand_center(s, i, t, &cx, &cy);
    g.hands.push_back({cx, cy, s.hand_size[i], s.hand_size[i]});
  }
  for (size_t i = 0; i < s.objects.size(); ++i) {
    double cx, cy;
    object_center(s, static_cast<int>(i), t, &cx, &cy);
    g.objects.push_back({cx, cy, s.objects[i].size, s.objects[i].size});
  }
  return g;
}

struct BackgroundSpec {
  double base[3];
  double weight[3];
  double gx, gy, freq, phase, amp;
};

BackgroundSpec background_for_video(const std::string& video_id) {
  Rng r(fnv1a(video_id));
  BackgroundSpec b;
  for (int c = 0; c < 3; ++c) b.base[c] = r.uniform(0.08, 0.35);
  for (int c = 0; c < 3; ++c) b.weight[c] = r.uniform(0.5, 1.0);
  double ang = r.uniform(0, 2 * M_PI);
  b.gx = std::cos(ang);
  b.gy = std::sin(ang);
  b.freq = r.uniform(1.0, 3.0);
  b.phase = r.uniform(0, 2 * M_PI);
  b.amp = r.uniform(0.05, 0.12);
  return b;
}

void render_frame(const Scene& s, const BackgroundSpec& bg, double t, int h, int w,
                  int frame_slot, VideoFrames* out) {
  for (int y = 0; y < h; ++y) {
    double y01 = (y + 0.5) / h;
    for (int x = 0; x < w; ++x) {
      double x01 = (x + 0.5) / w;
      double wave = bg.amp * std::sin(2 * M_PI * bg.freq * (x01 * bg.gx + y01 * bg.gy) + bg.phase);
      double grad = 0.08 * (bg.gx * x01 + bg.gy * y01);
      for (int c = 0; c < 3; ++c)
        out->at(frame_slot, y, x, c) = clamp01(bg.base[c] + bg.weight[c] * (wave + grad));
    }
  }
  FrameGeometry geo = frame_geometry(s, t);
  // distractors first, then the contact object, hands on top
  auto draw_box = [&](const Box& bx, int shape, const double rgb[3]) {
    CornerBox c = to_corners(bx);
    int x0 = std::max(0, static_cast<int>(std::floor(c.x1 * w)));
    int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x2 * w)));
    int y0 = std::max(0, static_cast<int>(std::floor(c.y1 * h)));
    int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y2 * h)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double u = ((x + 0.5) / w - bx.cx) / (bx.w / 2);
        double v = ((y + 0.5) / h - bx.cy) / (bx.h / 2);
        if (std::abs(u) > 1 || std::abs(v) > 1) continue;
        if (!inside_shape(shape, u, v)) continue;
        for (int ch = 0; ch < 3; ++ch) out->at(frame_slot, y, x, ch) = rgb[ch];
      }
  };
  for (size_t i = geo.objects.size(); i-- > 1;)
    draw_box(geo.objects[i], s.objects[i].shape, kColorRgb[s.objects[i].color]);
  if (!geo.objects.empty())
    draw_box(geo.objects[0], s.objects[0].shape, kColorRgb[s.objects[0].color]);
  for (size_t i = 0; i < geo.hands.size(); ++i) draw_box(geo.hands[i], 1, kSkin);
}

// left hand = smaller anchor x when two hands are present
HandSide hand_side(const Scene& s, int idx, Rng& tie_rng) {
  if (s.n_hands == 2) {
    bool first_is_left = s.hand_ax[0] <= s.hand_ax[1];
    return (idx == 0) == first_is_left ? HandSide::kLeft : HandSide::kRight;
  }
  return tie_rng.bernoulli(0.5) ? HandSide::kLeft : HandSide::kRight;
}

// ------------------------------------------------------------------ json

json box_to_json(const Box& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::runtime_error("box must be a 4-array");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  check_box(b, "box_from_json");
  return b;
}

std::string side_to_string(HandSide s) {
  switch (s) {
    case HandSide::kLeft: return "left";
    case HandSide::kRight: return "right";
    default: return "unknown";
  }
}

HandSide side_from_string(const std::string& s) {
  if (s == "left") return HandSide::kLeft;
  if (s == "right") return HandSide::kRight;
  if (s == "unknown") return HandSide::kUnknown;
  throw std::runtime_error("bad hand side: " + s);
}

json detections_to_json(const std::string& clip_id, const FrameDetections& fd,
                        bool clean) {
  json hands = json::array();
  for (const auto& hd : fd.hands)
    hands.push_back({{"box", box_to_json(hd.box)},
                     {"side", side_to_string(hd.side)},
                     {"score", hd.score}});
  json objects = json::array();
  for (const auto& od : fd.objects) {
    json o = {{"box", box_to_json(od.box)}, {"score", od.score}};
    if (clean) {
      o["noun"] = od.noun;
      o["in_contact"] = od.in_contact;
    }
    objects.push_back(o);
  }
  return {{"clip_id", clip_id}, {"frame_idx", fd.frame_idx}, {"hands", hands},
          {"objects", objects}};
}

FrameDetections detections_from_json(const json& j, std::string* clip_id) {
  *clip_id = j.at("clip_id").get<std::string>();
  FrameDetections fd;
  fd.frame_idx = j.at("frame_idx").get<int>();
  for (const auto& h : j.at("hands")) {
    HandDetection hd;
    hd.box = box_from_json(h.at("box"));
    hd.side = side_from_string(h.at("side").get<std::string>());
    hd.score = h.at("score").get<double>();
    if (hd.score < 0 || hd.score > 1) throw std::runtime_error("hand score out of [0,1]");
    fd.hands.push_back(hd);
  }
  for (const auto& o : j.at("objects")) {
    ObjectDetection od;
    od.box = box_from_json(o.at("box"));
    od.score = o.at("score").get<double>();
    if (od.score < 0 || od.score > 1) throw std::runtime_error("object score out of [0,1]");
    if (o.contains("noun")) od.noun = o.at("noun").get<std::string>();
    if (o.contains("in_contact")) od.in_contact = o.at("in_contact").get<bool>();
    fd.objects.push_back(od);
  }
  return fd;
}

json group_to_json(const NounGroup& g) {
  return {{"id", g.id}, {"canonical", g.canonical}, {"synonyms", g.synonyms}};
}

NounGroup group_from_json(const json& j) {
  NounGroup g;
  g.id = j.at("id").get<int>();
  g.canonical = j.at("canonical").get<std::string>();
  g.synonyms = j.at("synonyms").get<std::vector<std::string>>();
  return g;
}

}  // namespace

// ------------------------------------------------------------------ taxonomy

TaxonomyDictionary TaxonomyDictionary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("taxonomy: cannot open " + path);
  json j;
  in >> j;
  TaxonomyDictionary t;
  for (const auto& g : j.at("nouns")) t.nouns.push_back(group_from_json(g));
  t.removal = j.at("removal").get<std::vector<std::string>>();
  for (const auto& g : j.at("verbs")) t.verbs.push_back(group_from_json(g));
  std::set<int> ids;
  for (const auto& g : t.nouns)
    if (!ids.insert(g.id).second) throw std::runtime_error("taxonomy: duplicate noun group id");
  return t;
}

void TaxonomyDictionary::save(const std::string& path) const {
  json j;
  j["nouns"] = json::array();
  for (const auto& g : nouns) j["nouns"].push_back(group_to_json(g));
  j["removal"] = removal;
  j["verbs"] = json::array();
  for (const auto& g : verbs) j["verbs"].push_back(group_to_json(g));
  std::ofstream out(path);
  if (!out) throw std::runtime_error("taxonomy: cannot write " + path);
  out << j.dump(2) << "\n";
}

namespace {

std::vector<NounMatch> match_groups(const std::string& text,
                                    const std::vector<NounGroup>& groups,
                                    const std::vector<std::string>& removal) {
  std::set<std::string> removed(removal.begin(), removal.end());
  std::map<std::string, int> unigram, bigram;
  for (const auto& g : groups) {
    std::vector<std::string> surfaces = g.synonyms;
    surfaces.push_back(g.canonical);
    for (const auto& s : surfaces) {
      std::vector<std::string> ws = split_words(s);
      if (ws.size() == 1) unigram.emplace(ws[0], g.id);
      else if (ws.size() == 2) bigram.emplace(ws[0] + " " + ws[1], g.id);
    }
  }
  // removal applies before matching
  std::vector<std::string> words;
  for (const auto& w : split_words(text))
    if (!removed.count(w)) words.push_back(w);

  std::vector<NounMatch> out;
  size_t i = 0;
  while (i < words.size()) {
    if (i + 1 < words.size()) {
      std::string two = words[i] + " " + words[i + 1];
      auto it = bigram.find(two);
      if (it != bigram.end() && !removed.count(two)) {
        out.push_back({two, it->second});
        i += 2;
        continue;
      }
    }
    auto it = unigram.find(words[i]);
    if (it != unigram.end()) out.push_back({words[i], it->second});
    ++i;
  }
  return out;
}

}  // namespace

std::vector<NounMatch> extract_nouns(const std::string& narration,
                                     const TaxonomyDictionary& tax) {
  return match_groups(narration, tax.nouns, tax.removal);
}

std::vector<NounMatch> extract_verbs(const std::string& narration,
                                     const TaxonomyDictionary& tax) {
  return match_groups(narration, tax.verbs, {});
}

std::vector<std::string> dictionary_surfaces(const TaxonomyDictionary& tax) {
  std::set<std::string> removed(tax.removal.begin(), tax.removal.end());
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& g : tax.nouns) {
    std::vector<std::string> surfaces = {g.canonical};
    for (const auto& s : g.synonyms)
      if (s != g.canonical) surfaces.push_back(s);
    for (const auto& s : surfaces) {
      if (removed.count(s) || seen.count(s)) continue;
      seen.insert(s);
      out.push_back(s);
    }
  }
  return out;
}

// ------------------------------------------------------------------ dataset

int ClipSample::total_frames() const {
  return static_cast<int>(std::lround((t_end_s - t_start_s) * kFps));
}

namespace {

void derive_clip_text_fields(ClipSample& c, const TaxonomyDictionary& tax,
                             const std::vector<std::string>& dict) {
  c.noun_matches = extract_nouns(c.narration, tax);
  c.noun_groups.clear();
  c.verb_groups.clear();
  c.noun_dict_idx.clear();
  std::map<std::string, int> dict_idx;
  for (size_t i = 0; i < dict.size(); ++i) dict_idx.emplace(dict[i], static_cast<int>(i));
  for (const auto& m : c.noun_matches) {
    c.noun_groups.insert(m.group_id);
    auto it = dict_idx.find(m.surface);
    if (it != dict_idx.end()) c.noun_dict_idx.push_back(it->second);
  }
  for (const auto& m : extract_verbs(c.narration, tax)) c.verb_groups.insert(m.group_id);
}

void cap_detections(FrameDetections& fd, DatasetStats* stats) {
  if (fd.hands.size() > 2) {
    if (stats) stats->truncated_boxes += static_cast<int>(fd.hands.size()) - 2;
    fd.hands.resize(2);
  }
  if (fd.objects.size() > 4) {
    if (stats) stats->truncated_boxes += static_cast<int>(fd.objects.size()) - 4;
    fd.objects.resize(4);
  }
}

}  // namespace

Dataset load_dataset(const std::string& clips_path, const std::string& detections_path,
                     const std::string& tax_path) {
  Dataset ds;
  ds.taxonomy = TaxonomyDictionary::load(tax_path);
  ds.dict_surfaces = dictionary_surfaces(ds.taxonomy);

  std::ifstream in(clips_path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + clips_path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      ClipSample c;
      c.clip_id = j.at("clip_id").get<std::string>();
      c.video_id = j.at("video_id").get<std::string>();
      c.t_start_s = j.at("t_start_s").get<double>();
      c.t_end_s = j.at("t_end_s").get<double>();
      c.narration = j.at("narration").get<std::string>();
      c.synth_seed = j.at("synth_seed").get<uint64_t>();
      if (!(c.t_start_s < c.t_end_s)) throw std::runtime_error("t_start must precede t_end");
      if (c.total_frames() < 1) throw std::runtime_error("clip too short for one frame");
      derive_clip_text_fields(c, ds.taxonomy, ds.dict_surfaces);
      if (ds.clip_index.count(c.clip_id))
        throw std::runtime_error("duplicate clip_id " + c.clip_id);
      ds.clip_index.emplace(c.clip_id, static_cast<int>(ds.clips.size()));
      ds.videos[c.video_id].push_back(static_cast<int>(ds.clips.size()));
      ds.clips.push_back(std::move(c));
    } catch (const std::exception& e) {
      throw std::runtime_error(clips_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  ds.stats.clips = static_cast<int>(ds.clips.size());

  std::ifstream din(detections_path);
  if (!din) throw std::runtime_error("load_dataset: cannot open " + detections_path);
  line_no = 0;
  long long frames_no_hands = 0, frames_no_objects = 0, total_hands = 0, total_objects = 0;
  while (std::getline(din, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string clip_id;
    FrameDetections fd;
    try {
      fd = detections_from_json(json::parse(line), &clip_id);
    } catch (const std::exception& e) {
      throw std::runtime_error(detections_path + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
    auto it = ds.clip_index.find(clip_id);
    if (it == ds.clip_index.end()) {
      ++ds.stats.skipped_unknown_clip;
      continue;
    }
    ClipSample& clip = ds.clips[it->second];
    if (fd.frame_idx < 0 || fd.frame_idx >= clip.total_frames())
      throw std::runtime_error(detections_path + ":" + std::to_string(line_no) +
                               ": frame_idx out of range for " + clip_id);
    cap_detections(fd, &ds.stats);
    ++ds.stats.detection_records;
    frames_no_hands += fd.hands.empty() ? 1 : 0;
    frames_no_objects += fd.objects.empty() ? 1 : 0;
    total_hands += static_cast<long long>(fd.hands.size());
    total_objects += static_cast<long long>(fd.objects.size());
    clip.detections.push_back(std::move(fd));
  }
  for (auto& c : ds.clips)
    std::sort(c.detections.begin(), c.detections.end(),
              [](const FrameDetections& a, const FrameDetections& b) {
                return a.frame_idx < b.frame_idx;
              });
  if (ds.stats.detection_records > 0) {
    double n = ds.stats.detection_records;
    ds.stats.frac_frames_no_hands = frames_no_hands / n;
    ds.stats.frac_frames_no_objects = frames_no_objects / n;
    ds.stats.mean_hands_per_frame = total_hands / n;
    ds.stats.mean_objects_per_frame = total_objects / n;
  }
  return ds;
}

std::map<std::string, std::vector<FrameDetections>> load_detections_file(
    const std::string& path, const Dataset& ds, DatasetStats* stats) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_detections_file: cannot open " + path);
  std::map<std::string, std::vector<FrameDetections>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string clip_id;
    FrameDetections fd;
    try {
      fd = detections_from_json(json::parse(line), &clip_id);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!ds.clip_index.count(clip_id)) {
      if (stats) ++stats->skipped_unknown_clip;
      continue;
    }
    out[clip_id].push_back(std::move(fd));
  }
  for (auto& [id, v] : out)
    std::sort(v.begin(), v.end(), [](const FrameDetections& a, const FrameDetections& b) {
      return a.frame_idx < b.frame_idx;
    });
  return out;
}

std::vector<int> canonical_sample_indices(int total_frames, int t) {
  if (t < 1 || total_frames < 1)
    throw std::invalid_argument("canonical_sample_indices: empty range");
  std::vector<int> out(t);
  for (int i = 0; i < t; ++i)
    out[i] = std::min(total_frames - 1, (2 * i + 1) * total_frames / (2 * t));
  return out;
}

VideoFrames render_clip_frames(const ClipSample& clip, const std::vector<int>& frame_indices,
                               int h, int w) {
  Scene scene = scene_from_seed(clip.synth_seed);
  BackgroundSpec bg = background_for_video(clip.video_id);
  int total = clip.total_frames();
  VideoFrames out(static_cast<int>(frame_indices.size()), h, w);
  for (size_t i = 0; i < frame_indices.size(); ++i) {
    int f = frame_indices[i];
    if (f < 0 || f >= total) throw std::invalid_argument("render: frame index out of range");
    double t = total > 1 ? static_cast<double>(f) / (total - 1) : 0.0;
    render_frame(scene, bg, t, h, w, static_cast<int>(i), &out);
  }
  return out;
}

std::vector<FrameDetections> detections_for_slots(
    const std::vector<FrameDetections>& dets, const std::vector<int>& frame_indices) {
  std::map<int, int> slot_of;
  for (size_t i = 0; i < frame_indices.size(); ++i)
    slot_of.emplace(frame_indices[i], static_cast<int>(i));
  std::vector<FrameDetections> out;
  for (const auto& fd : dets) {
    auto it = slot_of.find(fd.frame_idx);
    if (it == slot_of.end()) continue;
    FrameDetections slot_fd = fd;
    slot_fd.frame_idx = it->second;
    out.push_back(std::move(slot_fd));
  }
  return out;
}

Batch sample_batch(const Dataset& ds, int size, bool use_hard_negatives, int t, int h,
                   int w, Rng& rng) {
  int n = static_cast<int>(ds.clips.size());
  if (size < 1 || size > n) throw std::invalid_argument("sample_batch: bad batch size");
  Batch batch;

  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  rng.shuffle(pool);

  std::vector<int> chosen;
  for (int idx : pool) {
    if (static_cast<int>(chosen.size()) == size) break;
    if (use_hard_negatives &&
        ds.videos.at(ds.clips[idx].video_id).size() < 2) {
      ++batch.resampled_single_clip_videos;
      continue;
    }
    chosen.push_back(idx);
  }
  if (static_cast<int>(chosen.size()) < size)
    throw std::runtime_error("sample_batch: not enough eligible clips");

  auto make_sample = [&](int idx) {
    const ClipSample& clip = ds.clips[idx];
    SampledClip s;
    s.dataset_index = idx;
    s.frame_indices = canonical_sample_indices(clip.total_frames(), t);
    s.frames = render_clip_frames(clip, s.frame_indices, h, w);
    s.detections = detections_for_slots(clip.detections, s.frame_indices);
    return s;
  };

  std::vector<std::set<int>> nouns, verbs;
  for (int idx : chosen) {
    batch.samples.push_back(make_sample(idx));
    nouns.push_back(ds.clips[idx].noun_groups);
    verbs.push_back(ds.clips[idx].verb_groups);
  }
  if (use_hard_negatives) {
    for (int idx : chosen) {
      const auto& sibs = ds.videos.at(ds.clips[idx].video_id);
      int pick;
      do {
        pick = sibs[rng.uniform_int(static_cast<int>(sibs.size()))];
      } while (pick == idx);
      batch.hard.push_back(make_sample(pick));
    }
  }
  batch.structure = build_positive_sets(nouns, verbs);
  batch.structure.has_hard_negatives = use_hard_negatives;
  return batch;
}

// ------------------------------------------------------------------ generator

void GenConfig::validate() const {
  if (clips < 1) throw std::invalid_argument("gen: clips < 1");
  if (clips_per_video < 1) throw std::invalid_argument("gen: clips_per_video < 1");
  if (frames_per_clip < 2) throw std::invalid_argument("gen: frames_per_clip < 2");
  if (sampled_frames < 1 || sampled_frames > frames_per_clip)
    throw std::invalid_argument("gen: sampled_frames out of range");
  if (object_vocab_size < 4 || object_vocab_size > static_cast<int>(kShapeCanon.size()))
    throw std::invalid_argument(
        "gen: object vocabulary must cover the 4 objects a scene can hold");
  if (clips_per_video > object_vocab_size)
    throw std::invalid_argument("gen: clips_per_video exceeds object vocabulary");
  if (hand_drop < 0 || hand_drop >= 1 || object_drop < 0 || object_drop >= 1)
    throw std::invalid_argument("gen: drop probabilities must be in [0,1)");
  if (jitter_sigma < 0) throw std::invalid_argument("gen: jitter_sigma < 0");
  if (frame_size < 8) throw std::invalid_argument("gen: frame_size too small");
}

TaxonomyDictionary make_default_taxonomy() {
  TaxonomyDictionary t;
  for (size_t i = 0; i < kShapeCanon.size(); ++i)
    t.nouns.push_back({static_cast<int>(i), kShapeCanon[i], kShapeSyn[i]});
  // hand group exists but is removal-listed: hand supervision comes from the
  // detector stream, not the narrations
  t.nouns.push_back({static_cast<int>(kShapeCanon.size()), "hand", {"hand", "hands"}});
  t.removal = {"man", "woman", "person", "lady", "they",
               "ground", "camera", "table", "leg", "hand", "hands"};
  for (size_t i = 0; i < kVerbCanon.size(); ++i)
    t.verbs.push_back({static_cast<int>(i), kVerbCanon[i], kVerbSyn[i]});
  return t;
}

Vocabulary make_default_vocabulary(const TaxonomyDictionary& tax) {
  std::vector<std::string> words = {"c", "picks", "up", "the", "next", "to",
                                    "with", "his", "her"};
  auto add_surface_words = [&](const std::vector<NounGroup>& groups) {
    for (const auto& g : groups) {
      for (const auto& w : split_words(g.canonical)) words.push_back(w);
      for (const auto& s : g.synonyms)
        for (const auto& w : split_words(s)) words.push_back(w);
    }
  };
  add_surface_words(tax.nouns);
  add_surface_words(tax.verbs);
  for (const auto& w : tax.removal) words.push_back(w);
  for (const auto& c : kColorNames) words.push_back(c);
  return Vocabulary::from_words(words);
}

GenResult generate_synthetic(const GenConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  TaxonomyDictionary tax = make_default_taxonomy();

  GenResult res;
  res.clips_path = out_dir + "/clips.jsonl";
  res.detections_path = out_dir + "/detections.jsonl";
  res.clean_detections_path = out_dir + "/detections_clean.jsonl";
  res.taxonomy_path = out_dir + "/taxonomy.json";
  res.vocab_path = out_dir + "/vocab.txt";

  tax.save(res.taxonomy_path);
  make_default_vocabulary(tax).save(res.vocab_path);

  std::ofstream clips_out(res.clips_path);
  std::ofstream pseudo_out(res.detections_path);
  std::ofstream clean_out(res.clean_detections_path);
  if (!clips_out || !pseudo_out || !clean_out)
    throw std::runtime_error("generate_synthetic: cannot write to " + out_dir);

  Rng rng(cfg.seed);
  double duration = cfg.frames_per_clip / kFps;
  std::vector<int> sample_idx = canonical_sample_indices(cfg.frames_per_clip,
                                                         cfg.sampled_frames);
  long long frames_no_hands = 0, frames_no_objects = 0, total_hands = 0,
            total_objects = 0, records = 0;

  int emitted = 0, video = 0;
  while (emitted < cfg.clips) {
    char vid[32];
    std::snprintf(vid, sizeof vid, "v%04d", video);
    std::string video_id = vid;
    std::set<int> used_contact;
    for (int slot = 0; slot < cfg.clips_per_video && emitted < cfg.clips; ++slot) {
      // rejection-sample a seed whose scene satisfies the dataset constraints
      uint64_t seed;
      Scene scene;
      for (;;) {
        seed = (rng.raw() & ~1ull) | (cfg.static_scenes ? 1ull : 0ull);
        scene = scene_from_seed(seed);
        bool vocab_ok = true;
        for (const auto& o : scene.objects)
          if (o.shape >= cfg.object_vocab_size) vocab_ok = false;
        if (vocab_ok && !used_contact.count(scene.objects[0].shape)) break;
      }
      used_contact.insert(scene.objects[0].shape);

      char cid[48];
      std::snprintf(cid, sizeof cid, "%s_c%02d", video_id.c_str(), slot);
      std::string clip_id = cid;

      // narration
      const SceneObject& contact = scene.objects[0];
      auto surface_of = [&](int shape) {
        const NounGroup& g = tax.nouns[shape];
        if (rng.bernoulli(cfg.p_synonym) && !g.synonyms.empty())
          return g.synonyms[rng.uniform_int(static_cast<int>(g.synonyms.size()))];
        return g.canonical;
      };
      std::string narration = "#C C " + kVerbSurface[scene.verb] + " the " +
                              kColorNames[contact.color] + " " + surface_of(contact.shape);
      if (scene.objects.size() > 1 && rng.bernoulli(cfg.p_distractor_mention)) {
        const SceneObject& d = scene.objects[1];
        narration += " next to the " + std::string(kColorNames[d.color]) + " " +
                     surface_of(d.shape);
      }
      if (rng.bernoulli(cfg.p_hand_suffix)) narration += " with his hand";

      json clip_j = {{"clip_id", clip_id},
                     {"video_id", video_id},
                     {"t_start_s", slot * duration},
                     {"t_end_s", (slot + 1) * duration},
                     {"narration", narration},
                     {"synth_seed", seed}};
      clips_out << clip_j.dump() << "\n";

      // clean + pseudo detections at the canonical sampled frames
      Rng noise(seed ^ kNoiseSalt);
      Rng side_rng(seed ^ 0x1234567ull);
      for (int f : sample_idx) {
        double t = cfg.frames_per_clip > 1
                       ? static_cast<double>(f) / (cfg.frames_per_clip - 1)
                       : 0.0;
        FrameGeometry geo = frame_geometry(scene, t);
        FrameDetections clean;
        clean.frame_idx = f;
        for (size_t i = 0; i < geo.hands.size(); ++i)
          clean.hands.push_back(
              {geo.hands[i], hand_side(scene, static_cast<int>(i), side_rng), 1.0});
        for (size_t i = 0; i < geo.objects.size(); ++i) {
          ObjectDetection od;
          od.box = geo.objects[i];
          od.score = 1.0;
          od.noun = tax.nouns[scene.objects[i].shape].canonical;
          od.in_contact = i == 0;
          clean.objects.push_back(od);
        }
        clean_out << detections_to_json(clip_id, clean, true).dump() << "\n";

        FrameDetections pseudo;
        pseudo.frame_idx = f;
        bool drop_h = noise.bernoulli(cfg.hand_drop);
        bool drop_o = noise.bernoulli(cfg.object_drop);
        auto jitter = [&](const Box& b) {
          CornerBox c = to_corners(b);
          c.x1 = clamp01(c.x1 + noise.normal(0, cfg.jitter_sigma));
          c.y1 = clamp01(c.y1 + noise.normal(0, cfg.jitter_sigma));
          c.x2 = clamp01(c.x2 + noise.normal(0, cfg.jitter_sigma));
          c.y2 = clamp01(c.y2 + noise.normal(0, cfg.jitter_sigma));
          if (c.x2 < c.x1) std::swap(c.x1, c.x2);
          if (c.y2 < c.y1) std::swap(c.y1, c.y2);
          return from_corners(c);
        };
        if (!drop_h)
          for (const auto& hd : clean.hands)
            pseudo.hands.push_back({jitter(hd.box), hd.side, noise.uniform(0.5, 1.0)});
        if (!drop_o)
          for (const auto& od : clean.objects)
            pseudo.objects.push_back({jitter(od.box), noise.uniform(0.5, 1.0), "", false});
        noise.shuffle(pseudo.hands);
        noise.shuffle(pseudo.objects);  // no cross-frame identity
        pseudo_out << detections_to_json(clip_id, pseudo, false).dump() << "\n";

        ++records;
        frames_no_hands += pseudo.hands.empty() ? 1 : 0;
        frames_no_objects += pseudo.objects.empty() ? 1 : 0;
        total_hands += static_cast<long long>(pseudo.hands.size());
        total_objects += static_cast<long long>(pseudo.objects.size());
      }
      ++emitted;
    }
    ++video;
  }

  res.pseudo_stats.clips = emitted;
  res.pseudo_stats.detection_records = static_cast<int>(records);
  if (records > 0) {
    res.pseudo_stats.frac_frames_no_hands = static_cast<double>(frames_no_hands) / records;
    res.pseudo_stats.frac_frames_no_objects =
        static_cast<double>(frames_no_objects) / records;
    res.pseudo_stats.mean_hands_per_frame = static_cast<double>(total_hands) / records;
    res.pseudo_stats.mean_objects_per_frame = static_cast<double>(total_objects) / records;
  }
  return res;
}

}  // namespace ovl
