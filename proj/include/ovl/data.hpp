#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ovl/batch.hpp"
#include "ovl/encoders.hpp"
#include "ovl/losses.hpp"

namespace ovl {

// Clip timing is defined at a fixed rate so frame counts derive from the
// stored timestamps alone.
inline constexpr double kFps = 4.0;

struct NounGroup {
  int id = 0;
  std::string canonical;
  std::vector<std::string> synonyms;  // includes single and two-word forms
};

struct TaxonomyDictionary {
  std::vector<NounGroup> nouns;
  std::vector<std::string> removal;  // surfaces dropped before matching
  std::vector<NounGroup> verbs;

  static TaxonomyDictionary load(const std::string& path);
  void save(const std::string& path) const;
};

struct NounMatch {
  std::string surface;  // as matched, lowercased ("bell pepper")
  int group_id = 0;
};

// Single words and two-word phrases matched against the taxonomy; removal
// surfaces are dropped first, two-word matches take precedence and consume
// their words, narration order and duplicates are preserved.
std::vector<NounMatch> extract_nouns(const std::string& narration,
                                     const TaxonomyDictionary& tax);
std::vector<NounMatch> extract_verbs(const std::string& narration,
                                     const TaxonomyDictionary& tax);

// Word-loss negative pool: every taxonomy noun surface not on the removal
// list, in group order. Also the title lookup for caption nouns.
std::vector<std::string> dictionary_surfaces(const TaxonomyDictionary& tax);

struct ClipSample {
  std::string clip_id;
  std::string video_id;
  double t_start_s = 0;
  double t_end_s = 0;
  std::string narration;
  uint64_t synth_seed = 0;

  // Derived at load time.
  std::vector<NounMatch> noun_matches;
  std::set<int> noun_groups;
  std::set<int> verb_groups;
  std::vector<int> noun_dict_idx;               // into dictionary_surfaces
  std::vector<FrameDetections> detections;      // pseudo stream, absolute frame_idx

  int total_frames() const;
};

struct DatasetStats {
  int clips = 0;
  int detection_records = 0;
  double frac_frames_no_hands = 0;
  double frac_frames_no_objects = 0;
  double mean_hands_per_frame = 0;
  double mean_objects_per_frame = 0;
  int skipped_unknown_clip = 0;
  int truncated_boxes = 0;  // beyond the 2-hand / 4-object caps
};

struct Dataset {
  std::vector<ClipSample> clips;
  TaxonomyDictionary taxonomy;
  std::vector<std::string> dict_surfaces;
  std::map<std::string, int> clip_index;
  std::map<std::string, std::vector<int>> videos;
  DatasetStats stats;
};

Dataset load_dataset(const std::string& clips_path, const std::string& detections_path,
                     const std::string& tax_path);

// Loads a second detections stream (e.g. the clean one) keyed like the
// dataset's clips; used by evaluation.
std::map<std::string, std::vector<FrameDetections>> load_detections_file(
    const std::string& path, const Dataset& ds, DatasetStats* stats = nullptr);

// Centered uniform sampling: index i -> floor((2i+1) * total / (2t)).
std::vector<int> canonical_sample_indices(int total_frames, int t);

// Renders the given absolute frame indices of a clip. Everything about the
// scene derives from (synth_seed, video_id); resolution is free. Bit 0 of
// synth_seed marks a static scene (no object/hand motion).
VideoFrames render_clip_frames(const ClipSample& clip, const std::vector<int>& frame_indices,
                               int h, int w);

struct SampledClip {
  int dataset_index = -1;
  VideoFrames frames;
  std::vector<int> frame_indices;             // absolute, canonical order
  std::vector<FrameDetections> detections;    // frame_idx re-mapped to slots [0,T)
};

struct Batch {
  std::vector<SampledClip> samples;
  std::vector<SampledClip> hard;  // same size as samples, or empty
  BatchStructure structure;
  int resampled_single_clip_videos = 0;
};

// Uniform sampling without replacement; per sample one other clip of the
// same video becomes its hard negative. Frames are rendered at (h, w) with
// t slots.
Batch sample_batch(const Dataset& ds, int size, bool use_hard_negatives, int t,
                   int h, int w, Rng& rng);

// Slot-resolves a clip's detections for a given sampled index list:
// records at unsampled frames are dropped.
std::vector<FrameDetections> detections_for_slots(
    const std::vector<FrameDetections>& dets, const std::vector<int>& frame_indices);

// ---------------------------------------------------------------- generator

struct GenConfig {
  int clips = 2000;
  int clips_per_video = 5;
  int frames_per_clip = 12;
  int sampled_frames = 4;      // where detections are emitted
  int frame_size = 32;         // recorded for reference; rendering is free
  int object_vocab_size = 8;   // prefix of the built-in shape list
  double hand_drop = 0.158;    // per-frame probability of losing all hands
  double object_drop = 0.179;
  double jitter_sigma = 0.05;  // corner noise on surviving pseudo boxes
  double p_distractor_mention = 0.5;
  double p_synonym = 0.25;
  double p_hand_suffix = 0.2;
  bool static_scenes = false;
  uint64_t seed = 1;

  void validate() const;
};

struct GenResult {
  std::string clips_path;
  std::string detections_path;        // pseudo labels
  std::string clean_detections_path;  // exact boxes, eval only
  std::string taxonomy_path;
  std::string vocab_path;
  DatasetStats pseudo_stats;
};

TaxonomyDictionary make_default_taxonomy();
Vocabulary make_default_vocabulary(const TaxonomyDictionary& tax);

GenResult generate_synthetic(const GenConfig& cfg, const std::string& out_dir);

}  // namespace ovl
