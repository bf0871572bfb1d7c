#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "ovl/config.hpp"
#include "ovl/data.hpp"
#include "ovl/eval.hpp"
#include "ovl/model.hpp"
#include "ovl/training.hpp"

using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
};

void add_common(CLI::App* cmd, Common* c) {
  cmd->add_option("--config", c->config_path, "JSON config file");
  cmd->add_option("--out", c->out_dir, "output directory");
  cmd->add_option("--seed", c->seed, "seed override");
}

ovl::RunConfig resolve(const Common& c) {
  ovl::RunConfig rc;
  if (!c.config_path.empty()) rc = ovl::load_run_config(c.config_path);
  if (!c.out_dir.empty()) rc.out_dir = c.out_dir;
  if (c.seed) {
    rc.train.seed = *c.seed;
    rc.gen.seed = *c.seed;
    rc.eval.seed = *c.seed;
  }
  return rc;
}

struct DatasetBundle {
  ovl::Dataset ds;
  ovl::Vocabulary vocab;
  std::string dir;
};

DatasetBundle load_bundle(const std::string& dir) {
  if (dir.empty()) throw std::invalid_argument("--dataset is required");
  DatasetBundle b;
  b.dir = dir;
  b.ds = ovl::load_dataset(dir + "/clips.jsonl", dir + "/detections.jsonl",
                           dir + "/taxonomy.json");
  b.vocab = ovl::Vocabulary::load(dir + "/vocab.txt");
  return b;
}

ovl::Model load_model(const std::string& checkpoint, const ovl::Vocabulary& vocab) {
  if (checkpoint.empty()) throw std::invalid_argument("--checkpoint is required");
  return ovl::model_from_checkpoint(ovl::load_checkpoint(checkpoint), vocab.size());
}

void write_outputs(const ovl::RunConfig& rc, const std::string& command,
                   const json& metrics) {
  std::filesystem::create_directories(rc.out_dir);
  ovl::write_resolved_config(rc, rc.out_dir + "/resolved_config.json");
  json summary = {{"command", command}, {"metrics", metrics}};
  std::ofstream out(rc.out_dir + "/summary.json");
  out << summary.dump(2) << "\n";
}

void print_table(const json& metrics) {
  size_t width = 0;
  for (auto it = metrics.begin(); it != metrics.end(); ++it)
    width = std::max(width, it.key().size());
  for (auto it = metrics.begin(); it != metrics.end(); ++it)
    std::cout << "  " << it.key() << std::string(width - it.key().size() + 2, ' ')
              << it.value().dump() << "\n";
}

json box_json(const ovl::Box& b) { return json::array({b.cx, b.cy, b.w, b.h}); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"object-aware video-language model: data, training, evaluation"};
  app.require_subcommand(1);

  Common common;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  Common gen_common;
  add_common(gen, &gen_common);
  std::optional<int> gen_clips, gen_cpv;
  std::optional<bool> gen_static;
  std::optional<double> gen_jitter, gen_hand_drop, gen_object_drop;
  gen->add_option("--clips", gen_clips, "number of clips");
  gen->add_option("--clips-per-video", gen_cpv, "clips per video");
  gen->add_option("--jitter", gen_jitter, "pseudo-label corner noise sigma");
  gen->add_option("--hand-drop", gen_hand_drop, "per-frame hand drop probability");
  gen->add_option("--object-drop", gen_object_drop, "per-frame object drop probability");
  gen->add_flag("--static,!--moving", gen_static, "freeze all scene motion");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model");
  Common train_common;
  add_common(train_cmd, &train_common);
  std::string train_dataset, train_resume, train_losses = "all";
  std::optional<int> train_epochs, train_batch;
  std::optional<double> train_lr;
  std::optional<bool> train_freeze, train_hard;
  train_cmd->add_option("--dataset", train_dataset, "dataset directory");
  train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");
  train_cmd->add_option("--epochs", train_epochs, "total epochs");
  train_cmd->add_option("--batch-size", train_batch, "batch size");
  train_cmd->add_option("--lr", train_lr, "learning rate");
  train_cmd->add_option("--losses", train_losses, "all | ego_only")
      ->check(CLI::IsMember({"all", "ego_only"}));
  train_cmd->add_flag("--freeze-backbone,!--train-backbone", train_freeze,
                      "freeze the dual encoder");
  train_cmd->add_flag("--hard-negatives,!--no-hard-negatives", train_hard,
                      "same-video hard negatives");

  // grad-check
  auto* grad = app.add_subcommand("grad-check", "finite-difference gradient check");
  Common grad_common;
  add_common(grad, &grad_common);
  std::string grad_dataset, grad_checkpoint;
  int grad_samples = 200, grad_batch = 4;
  grad->add_option("--dataset", grad_dataset, "dataset directory");
  grad->add_option("--checkpoint", grad_checkpoint, "checkpoint (fresh init when absent)");
  grad->add_option("--samples", grad_samples, "scalars per parameter group");
  grad->add_option("--batch-size", grad_batch, "batch size for the check");

  // eval commands
  auto* mcq = app.add_subcommand("eval-mcq", "5-way multiple choice accuracy");
  Common mcq_common;
  add_common(mcq, &mcq_common);
  std::string mcq_dataset, mcq_checkpoint;
  std::optional<int> mcq_questions;
  mcq->add_option("--dataset", mcq_dataset, "dataset directory");
  mcq->add_option("--checkpoint", mcq_checkpoint, "trained checkpoint");
  mcq->add_option("--questions", mcq_questions, "questions per split");

  auto* retr = app.add_subcommand("eval-retrieval", "multi-instance retrieval mAP/nDCG");
  Common retr_common;
  add_common(retr, &retr_common);
  std::string retr_dataset, retr_checkpoint;
  std::optional<int> retr_max;
  retr->add_option("--dataset", retr_dataset, "dataset directory");
  retr->add_option("--checkpoint", retr_checkpoint, "trained checkpoint");
  retr->add_option("--max-clips", retr_max, "cap on clips evaluated");

  auto* cls = app.add_subcommand("eval-classify", "zero-shot classification");
  Common cls_common;
  add_common(cls, &cls_common);
  std::string cls_dataset, cls_checkpoint;
  std::optional<int> cls_cpv;
  cls->add_option("--dataset", cls_dataset, "dataset directory");
  cls->add_option("--checkpoint", cls_checkpoint, "trained checkpoint");
  cls->add_option("--clips-per-video", cls_cpv, "sub-clips pooled per instance");

  auto* grnd = app.add_subcommand("eval-grounding", "localization accuracy");
  Common grnd_common;
  add_common(grnd, &grnd_common);
  std::string grnd_dataset, grnd_checkpoint, grnd_mode;
  std::optional<int> grnd_seeds;
  std::optional<int> grnd_max;
  grnd->add_option("--dataset", grnd_dataset, "dataset directory");
  grnd->add_option("--checkpoint", grnd_checkpoint, "trained checkpoint (predicted mode)");
  grnd->add_option("--mode", grnd_mode, "predicted | random | gt_matching");
  grnd->add_option("--seeds", grnd_seeds, "draws for the random baseline");
  grnd->add_option("--max-clips", grnd_max, "cap on clips evaluated");

  auto* ground_cmd = app.add_subcommand("ground", "dump per-frame grounding records");
  Common ground_common;
  add_common(ground_cmd, &ground_common);
  std::string ground_dataset, ground_checkpoint, ground_clip_id;
  ground_cmd->add_option("--dataset", ground_dataset, "dataset directory");
  ground_cmd->add_option("--checkpoint", ground_checkpoint, "trained checkpoint");
  ground_cmd->add_option("--clip", ground_clip_id, "clip id (all clips when absent)");

  auto* feat = app.add_subcommand("extract-features", "per-clip video embeddings");
  Common feat_common;
  add_common(feat, &feat_common);
  std::string feat_dataset, feat_checkpoint;
  std::optional<int> feat_max;
  feat->add_option("--dataset", feat_dataset, "dataset directory");
  feat->add_option("--checkpoint", feat_checkpoint, "trained checkpoint");
  feat->add_option("--max-clips", feat_max, "cap on clips extracted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      ovl::RunConfig rc = resolve(gen_common);
      if (gen_clips) rc.gen.clips = *gen_clips;
      if (gen_cpv) rc.gen.clips_per_video = *gen_cpv;
      if (gen_static) rc.gen.static_scenes = *gen_static;
      if (gen_jitter) rc.gen.jitter_sigma = *gen_jitter;
      if (gen_hand_drop) rc.gen.hand_drop = *gen_hand_drop;
      if (gen_object_drop) rc.gen.object_drop = *gen_object_drop;
      ovl::GenResult res = ovl::generate_synthetic(rc.gen, rc.out_dir);
      json metrics = {{"clips", res.pseudo_stats.clips},
                      {"detection_records", res.pseudo_stats.detection_records},
                      {"frac_frames_no_hands", res.pseudo_stats.frac_frames_no_hands},
                      {"frac_frames_no_objects", res.pseudo_stats.frac_frames_no_objects},
                      {"mean_hands_per_frame", res.pseudo_stats.mean_hands_per_frame},
                      {"mean_objects_per_frame", res.pseudo_stats.mean_objects_per_frame}};
      write_outputs(rc, "gen-data", metrics);
      std::cout << "generated " << res.pseudo_stats.clips << " clips in " << rc.out_dir
                << "\n";
      print_table(metrics);
    } else if (train_cmd->parsed()) {
      ovl::RunConfig rc = resolve(train_common);
      if (!train_dataset.empty()) rc.dataset_dir = train_dataset;
      if (train_epochs) rc.train.epochs = *train_epochs;
      if (train_batch) rc.train.batch_size = *train_batch;
      if (train_lr) rc.train.lr = *train_lr;
      if (train_freeze) rc.train.freeze_backbone = *train_freeze;
      if (train_hard) rc.train.use_hard_negatives = *train_hard;
      DatasetBundle b = load_bundle(rc.dataset_dir);
      ovl::Model model;
      model.cfg = rc.model;
      model.cfg.text.vocab_size = b.vocab.size();
      ovl::LossToggle toggle;
      if (train_losses == "ego_only") toggle.box = toggle.word = false;
      std::optional<std::string> resume;
      if (!train_resume.empty()) resume = train_resume;
      ovl::TrainResult res =
          ovl::train(model, b.vocab, b.ds, rc.train, rc.out_dir, resume, toggle);
      json metrics = {{"steps", res.final_checkpoint.step},
                      {"checkpoint", rc.out_dir + "/checkpoint.ckpt"}};
      if (!res.log.empty()) {
        metrics["final_total"] = res.log.back().total;
        metrics["final_v2t"] = res.log.back().v2t;
        metrics["final_t2v"] = res.log.back().t2v;
        metrics["final_box"] = res.log.back().box;
        metrics["final_word"] = res.log.back().word;
      }
      write_outputs(rc, "train", metrics);
      std::cout << "trained " << res.steps_run << " steps -> " << rc.out_dir
                << "/checkpoint.ckpt\n";
      print_table(metrics);
    } else if (grad->parsed()) {
      ovl::RunConfig rc = resolve(grad_common);
      if (!grad_dataset.empty()) rc.dataset_dir = grad_dataset;
      DatasetBundle b = load_bundle(rc.dataset_dir);
      ovl::Model model;
      if (!grad_checkpoint.empty()) {
        model = load_model(grad_checkpoint, b.vocab);
      } else {
        model.cfg = rc.model;
        model.cfg.text.vocab_size = b.vocab.size();
        model.cfg.freeze_backbone = rc.train.freeze_backbone;
        model.init(rc.train.seed);
      }
      ovl::Rng rng(rc.train.seed ^ 0xBADC0FFEEull);
      ovl::Batch batch = ovl::sample_batch(b.ds, std::min<int>(grad_batch, b.ds.clips.size()),
                                           rc.train.use_hard_negatives,
                                           model.cfg.video.frames, model.cfg.video.frame_h,
                                           model.cfg.video.frame_w, rng);
      ovl::GradCheckReport rep =
          ovl::gradient_check(model, b.vocab, b.ds, batch, rc.train, {}, grad_samples);
      json groups = json::array();
      for (const auto& gr : rep.groups)
        groups.push_back({{"group", gr.group},
                          {"checked", gr.checked},
                          {"max_rel_err", gr.max_rel_err},
                          {"worst_param", gr.worst_param}});
      double threshold = rc.train.precision == "high" ? 1e-5 : 1e-3;
      json metrics = {{"max_rel_err", rep.max_rel_err},
                      {"threshold", threshold},
                      {"pass", rep.max_rel_err < threshold},
                      {"groups", groups}};
      write_outputs(rc, "grad-check", metrics);
      for (const auto& gr : rep.groups)
        std::cout << "  " << gr.group << ": checked " << gr.checked << ", max rel err "
                  << gr.max_rel_err << " (worst " << gr.worst_param << ")\n";
      std::cout << (rep.max_rel_err < threshold ? "PASS" : "FAIL")
                << " max_rel_err=" << rep.max_rel_err << "\n";
      if (rep.max_rel_err >= threshold) return 1;
    } else if (mcq->parsed()) {
      ovl::RunConfig rc = resolve(mcq_common);
      if (!mcq_dataset.empty()) rc.dataset_dir = mcq_dataset;
      if (!mcq_checkpoint.empty()) rc.checkpoint = mcq_checkpoint;
      if (mcq_questions) rc.eval.mcq_questions = *mcq_questions;
      DatasetBundle b = load_bundle(rc.dataset_dir);
      ovl::Model model = load_model(rc.checkpoint, b.vocab);
      ovl::EvalContext ctx{&model, &b.ds, &b.vocab};
      std::vector<ovl::Embedding> clips = ovl::embed_all_clips(ctx, rc.eval.max_clips);
      std::vector<ovl::Embedding> narr = ovl::embed_all_narrations(ctx, rc.eval.max_clips);
      ovl::Rng rng(rc.eval.seed);
      ovl::McqAccuracy acc = ovl::mcq_accuracy(
          ovl::build_mcq_questions(ctx, clips, narr, rc.eval.mcq_questions, rng));
      json metrics = {{"inter", acc.inter},
                      {"intra", acc.intra},
                      {"n_inter", acc.n_inter},
                      {"n_intra", acc.n_intra}};
      write_outputs(rc, "eval-mcq", metrics);
      print_table(metrics);
    } else if (retr->parsed()) {
      ovl::RunConfig rc = resolve(retr_common);
      if (!retr_dataset.empty()) rc.dataset_dir = retr_dataset;
      if (!retr_checkpoint.empty()) rc.checkpoint = retr_checkpoint;
      if (retr_max) rc.eval.max_clips = *retr_max;
      DatasetBundle b = load_bundle(rc.dataset_dir);
      ovl::Model model = load_model(rc.checkpoint, b.vocab);
      ovl::EvalContext ctx{&model, &b.ds, &b.vocab};
      std::vector<ovl::Embedding> clips = ovl::embed_all_clips(ctx, rc.eval.max_clips);
      std::vector<ovl::Embedding> narr = ovl::embed_all_narrations(ctx, rc.eval.max_clips);
      ovl::RetrievalSummary s = ovl::retrieval_eval(ctx, clips, narr);
      json metrics = {{"map_v2t", s.map_v2t},   {"map_t2v", s.map_t2v},
                      {"map_avg", s.map_avg},   {"ndcg_v2t", s.ndcg_v2t},
                      {"ndcg_t2v", s.ndcg_t2v}, {"ndcg_avg", s.ndcg_avg},
                      {"skipped_map", s.skipped_map}, {"skipped_ndcg", s.skipped_ndcg}};
      write_outputs(rc, "eval-retrieval", metrics);
      print_table(metrics);
    } else if (cls->parsed()) {
      ovl::RunConfig rc = resolve(cls_common);
      if (!cls_dataset.empty()) rc.dataset_dir = cls_dataset;
      if (!cls_checkpoint.empty()) rc.checkpoint = cls_checkpoint;
      if (cls_cpv) rc.eval.classify_clips_per_video = *cls_cpv;
      DatasetBundle b = load_bundle(rc.dataset_dir);
      ovl::Model model = load_model(rc.checkpoint, b.vocab);
      ovl::EvalContext ctx{&model, &b.ds, &b.vocab};
      ovl::ClassifyResult r = ovl::classify_eval(ctx, rc.eval.classify_clips_per_video);
      json metrics = {{"top1", r.top1},
                      {"mean_class", r.mean_class},
                      {"excluded_classes", r.excluded_classes}};
      write_outputs(rc, "eval-classify", metrics);
      print_table(metrics);
    } else if (grnd->parsed()) {
      ovl::RunConfig rc = resolve(grnd_common);
      if (!grnd_dataset.empty()) rc.dataset_dir = grnd_dataset;
      if (!grnd_checkpoint.empty()) rc.checkpoint = grnd_checkpoint;
      if (!grnd_mode.empty()) rc.eval.grounding_mode = grnd_mode;
      if (grnd_seeds) rc.eval.random_seeds = *grnd_seeds;
      if (grnd_max) rc.eval.max_clips = *grnd_max;
      DatasetBundle b = load_bundle(rc.dataset_dir);
      ovl::AssignMode mode = ovl::assign_mode_from_string(rc.eval.grounding_mode);
      auto clean = ovl::load_detections_file(b.dir + "/detections_clean.jsonl", b.ds);
      ovl::Model model;
      if (mode == ovl::AssignMode::kPredicted) model = load_model(rc.checkpoint, b.vocab);
      std::vector<ovl::GroundingInstance> instances = ovl::build_grounding_instances(
          model, b.vocab, b.ds, clean, mode == ovl::AssignMode::kPredicted,
          rc.eval.max_clips);
      json metrics = {{"mode", rc.eval.grounding_mode},
                      {"instances", instances.size()}};
      if (mode == ovl::AssignMode::kRandom) {
        ovl::RandomBaseline rb = ovl::localization_accuracy_random(
            instances, rc.eval.random_seeds, rc.eval.seed);
        metrics["accuracy"] = rb.mean;
        metrics["stddev"] = rb.stddev;
        metrics["draws"] = rb.draws;
      } else {
        metrics["accuracy"] = ovl::localization_accuracy(instances, mode);
      }
      write_outputs(rc, "eval-grounding", metrics);
      print_table(metrics);
    } else if (ground_cmd->parsed()) {
      ovl::RunConfig rc = resolve(ground_common);
      if (!ground_dataset.empty()) rc.dataset_dir = ground_dataset;
      if (!ground_checkpoint.empty()) rc.checkpoint = ground_checkpoint;
      DatasetBundle b = load_bundle(rc.dataset_dir);
      ovl::Model model = load_model(rc.checkpoint, b.vocab);
      std::filesystem::create_directories(rc.out_dir);
      std::ofstream out(rc.out_dir + "/grounding.jsonl");
      if (!out) throw std::runtime_error("cannot write grounding.jsonl");
      int n_records = 0;
      for (const auto& clip : b.ds.clips) {
        if (!ground_clip_id.empty() && clip.clip_id != ground_clip_id) continue;
        std::vector<std::string> nouns;
        for (const auto& m : clip.noun_matches)
          if (static_cast<int>(nouns.size()) < model.cfg.decoder.object_queries)
            nouns.push_back(m.surface);
        std::vector<int> canon =
            ovl::canonical_sample_indices(clip.total_frames(), model.cfg.video.frames);
        ovl::GroundClipResult res = ovl::ground_clip(
            model, b.vocab,
            ovl::render_clip_frames(clip, canon, model.cfg.video.frame_h,
                                    model.cfg.video.frame_w),
            nouns);
        for (size_t f = 0; f < res.frames.size(); ++f) {
          const ovl::GroundedFrame& gf = res.frames[f];
          json left = {{"clip_id", clip.clip_id}, {"frame_idx", canon[f]},
                       {"role", "left"},          {"noun", nullptr},
                       {"box", box_json(gf.left_hand)}, {"score", 1.0}};
          json right = left;
          right["role"] = "right";
          right["box"] = box_json(gf.right_hand);
          out << left.dump() << "\n" << right.dump() << "\n";
          n_records += 2;
          for (size_t i = 0; i < nouns.size(); ++i) {
            json rec = {{"clip_id", clip.clip_id}, {"frame_idx", canon[f]},
                        {"role", "noun"},          {"noun", nouns[i]},
                        {"box", box_json(gf.noun_boxes[i])},
                        {"score", gf.noun_score[i]}};
            out << rec.dump() << "\n";
            ++n_records;
          }
        }
      }
      json metrics = {{"records", n_records},
                      {"path", rc.out_dir + "/grounding.jsonl"}};
      write_outputs(rc, "ground", metrics);
      print_table(metrics);
    } else if (feat->parsed()) {
      ovl::RunConfig rc = resolve(feat_common);
      if (!feat_dataset.empty()) rc.dataset_dir = feat_dataset;
      if (!feat_checkpoint.empty()) rc.checkpoint = feat_checkpoint;
      if (feat_max) rc.eval.max_clips = *feat_max;
      DatasetBundle b = load_bundle(rc.dataset_dir);
      ovl::Model model = load_model(rc.checkpoint, b.vocab);
      ovl::EvalContext ctx{&model, &b.ds, &b.vocab};
      std::filesystem::create_directories(rc.out_dir);
      std::string path = rc.out_dir + "/features.jsonl";
      ovl::extract_features(ctx, path, rc.eval.max_clips);
      json metrics = {{"clips", rc.eval.max_clips > 0
                                    ? std::min<int>(rc.eval.max_clips, b.ds.clips.size())
                                    : static_cast<int>(b.ds.clips.size())},
                      {"path", path}};
      write_outputs(rc, "extract-features", metrics);
      print_table(metrics);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
