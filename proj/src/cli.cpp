#include "affcue/cli.hpp"

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "affcue/attention_export.hpp"
#include "affcue/config_io.hpp"
#include "affcue/error.hpp"
#include "affcue/evaluation.hpp"
#include "affcue/expert.hpp"
#include "affcue/rng.hpp"
#include "affcue/training.hpp"

namespace affcue {

namespace fs = std::filesystem;

namespace {

struct GenMugsArgs {
  int n = 24;
  std::uint64_t seed = 0;
  std::string out;
};

struct GenDemosArgs {
  std::string mugs;
  int per_category = 9;
  std::uint64_t seed = 0;
  int image_size = 144;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string mugs;
  std::string variant = "full";
  int epochs = 200;
  std::uint64_t seed = 0;
  std::string out;
  int batch_triplets = 8;
  int eval_every = 10;
  int eval_grasps = 20;
  double margin = 1.0;
  double lr = 1e-3;
  double w_ctl = 1.0;
  double w_bc = 1.0;
  std::string coupling = "anchor_affordance";
  bool bc_anchor_only = false;
  bool l2_root = false;
  bool stop_gradient_on_cue = false;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string mugs;
  int n_grasps = 20;
  std::uint64_t seed = 0;
  int horizon = 8;
  int holdout = 0;
};

struct VizArgs {
  std::string checkpoint;
  std::string out;
  std::string trajectory;
  std::string mugs;
  std::string mug_id;
  int horizon = 8;
  bool overlay = false;
};

struct Table1Args {
  std::string work = "table1_work";
  int image_size = 64;
  int n_mugs = 24;
  int per_category = 9;
  int epochs = 200;
  int seeds = 3;
  int eval_every = 10;
  int eval_grasps = 20;
  std::uint64_t data_seed = 0;
  std::string coupling = "anchor_affordance";
  std::vector<std::string> variants{"full", "normal-triplet", "no-contrastive", "baseline"};
  std::string out;
  bool quiet = false;
};

const std::map<Variant, std::string>& table_labels() {
  static const std::map<Variant, std::string> labels{
      {Variant::Full, "1. Ours (Full Model): Siamese + Coupled Triplet Loss"},
      {Variant::NormalTriplet, "2. Ours (Ablation): Siamese + Normal Triplet Loss"},
      {Variant::NoContrastive, "3. Ours (Ablation): Without Contrastive Learning"},
      {Variant::BaselineBc, "4. Baseline"}};
  return labels;
}

SimConfig sim_with_image(int size) {
  if (size < 8) throw Error(ErrorKind::InvalidArgument, "image size must be >= 8");
  SimConfig sim;
  sim.camera = SimConfig::default_camera(size);
  return sim;
}

ModelConfig model_for(Variant v, const SimConfig& sim, std::uint64_t seed) {
  ModelConfig m;
  m.variant = v;
  m.init_seed = seed;
  m.encoder.image_height = sim.camera.height;
  m.encoder.image_width = sim.camera.width;
  return m;
}

std::string percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", 100.0 * x);
  return buf;
}

int run_gen_mugs(const GenMugsArgs& a, std::ostream& out) {
  const SimConfig sim;
  const auto mugs = generate_mug_catalog(a.n, a.seed, sim);
  save_mugs(mugs, a.out);
  std::array<int, kNumCategories> counts{};
  for (const auto& m : mugs)
    for (auto c : m.affordable) counts[static_cast<std::size_t>(category_index(c))] += 1;
  out << "wrote " << mugs.size() << " mugs to " << a.out << " (body " << counts[0] << ", handle_lr " << counts[1]
      << ", handle_fb " << counts[2] << ")\n";
  return 0;
}

int run_gen_demos(const GenDemosArgs& a, std::ostream& out) {
  const SimConfig sim = sim_with_image(a.image_size);
  const auto mugs = load_mugs(a.mugs, sim.gripper);
  BuildStats stats;
  const Dataset ds = build_dataset(mugs, a.per_category, a.seed, sim, &stats);
  save_dataset(ds, a.out);
  save_mugs(mugs, fs::path(a.out) / "mugs.json");
  out << "wrote " << ds.size() << " demonstrations to " << a.out << " (" << stats.plan_failures << " of "
      << stats.plan_attempts << " planning attempts rejected)\n";
  return 0;
}

std::vector<MugSpec> mugs_for_dataset(const std::string& explicit_path, const fs::path& data_dir,
                                      const SimConfig& sim) {
  const fs::path p = explicit_path.empty() ? data_dir / "mugs.json" : fs::path(explicit_path);
  return load_mugs(p, sim.gripper);
}

void write_train_outputs(const TrainResult& r, const fs::path& dir) {
  save_checkpoint(r.best, dir);
  save_checkpoint(r.last, dir / "last");
  write_text_file(dir / "train_log.jsonl", r.log.to_jsonl());
}

int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const Dataset ds = load_dataset(a.data);
  const auto mugs = mugs_for_dataset(a.mugs, a.data, ds.sim);
  TrainConfig tc;
  tc.variant = variant_from_name(a.variant);
  tc.epochs = a.epochs;
  tc.seed = a.seed;
  tc.batch_triplets = a.batch_triplets;
  tc.eval_every = a.eval_every;
  tc.eval_grasps = a.eval_grasps;
  tc.margin = a.margin;
  tc.lr = a.lr;
  tc.w_ctl = a.w_ctl;
  tc.w_bc = a.w_bc;
  tc.coupling = coupling_from_name(a.coupling);
  tc.bc_on_anchor_only = a.bc_anchor_only;
  tc.l2_squared = !a.l2_root;
  ModelConfig mc = model_for(tc.variant, ds.sim, a.seed);
  mc.encoder.stop_gradient_on_cue = a.stop_gradient_on_cue;
  TrainHooks hooks;
  if (!a.quiet) {
    hooks.on_epoch = [&err](const EpochRecord& r) {
      if (!r.eval_success) return;
      err << "epoch " << r.epoch << " loss " << r.total << " (ctl " << r.ctl << ", bc " << r.bc << ") success "
          << percent(*r.eval_success) << "\n";
    };
  }
  const TrainResult r = train(tc, mc, ds, mugs, hooks);
  write_train_outputs(r, a.out);
  Json summary{{"checkpoint", a.out},
               {"variant", variant_name(tc.variant)},
               {"best_epoch", r.best.epoch},
               {"best_success", r.best.eval_success ? Json(*r.best.eval_success) : Json(nullptr)},
               {"final_loss", r.log.epochs.empty() ? Json(nullptr) : Json(r.log.epochs.back().total)}};
  out << summary.dump(2) << "\n";
  return 0;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  std::vector<MugSpec> mugs;
  if (a.holdout > 0) {
    mugs = generate_mug_catalog(a.holdout, mix_seed(a.seed, 0x401d), ckpt.sim);
  } else {
    if (a.mugs.empty()) throw Error(ErrorKind::InvalidArgument, "eval needs --mugs or --holdout");
    mugs = load_mugs(a.mugs, ckpt.sim.gripper);
  }
  const EvalReport rep = evaluate(ckpt, mugs, a.n_grasps, a.seed, a.horizon);
  out << rep.to_json().dump(2) << "\n";
  return 0;
}

int run_viz(const VizArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Model model(ckpt.model);
  std::vector<AttentionMap> maps;
  std::vector<std::vector<float>> frames;
  int h = 0, w = 0;
  if (!a.trajectory.empty()) {
    const Trajectory t = load_trajectory(a.trajectory);
    maps = attention_for_trajectory(model, ckpt.params, t);
    for (int k = 0; k < t.T; ++k) frames.emplace_back(t.frame(k), t.frame(k) + t.H * t.W);
    h = t.H;
    w = t.W;
  } else {
    if (a.mugs.empty()) throw Error(ErrorKind::InvalidArgument, "viz needs --trajectory or --mugs");
    const auto mugs = load_mugs(a.mugs, ckpt.sim.gripper);
    const MugSpec* mug = &mugs.front();
    for (const auto& m : mugs) {
      if (m.id == a.mug_id) mug = &m;
    }
    if (!a.mug_id.empty() && mug->id != a.mug_id) throw Error(ErrorKind::InvalidArgument, "unknown mug " + a.mug_id);
    NetworkPolicy policy(ckpt);
    const EpisodeTrace ep = rollout_policy(policy, *mug, ckpt.sim, a.horizon);
    // One more query so the final observation gets a map too.
    const MugSim sim(*mug, ckpt.sim);
    policy.act(ep.states.back(), sim.observe(ep.states.back()), ep.steps_taken);
    maps = attention_from_records(policy);
    for (const auto& d : ep.depths) frames.emplace_back(d.pixels.begin(), d.pixels.end());
    h = ckpt.sim.camera.height;
    w = ckpt.sim.camera.width;
  }
  export_attention(maps, a.out, a.overlay ? &frames : nullptr, h, w);
  out << "wrote " << maps.size() << " attention maps to " << a.out << "\n";
  return 0;
}

int run_table1(const Table1Args& a, std::ostream& out, std::ostream& err) {
  const SimConfig sim = sim_with_image(a.image_size);
  const fs::path work = a.work;
  const auto mugs = generate_mug_catalog(a.n_mugs, a.data_seed, sim);
  save_mugs(mugs, work / "mugs.json");
  const Dataset ds = build_dataset(mugs, a.per_category, a.data_seed, sim);
  save_dataset(ds, work / "data");

  std::vector<Variant> variants;
  for (const auto& v : a.variants) variants.push_back(variant_from_name(v));
  Json runs = Json::array();
  std::map<Variant, std::vector<double>> success;
  for (Variant v : variants) {
    for (int s = 0; s < a.seeds; ++s) {
      TrainConfig tc;
      tc.variant = v;
      tc.epochs = a.epochs;
      tc.seed = static_cast<std::uint64_t>(s);
      tc.eval_every = a.eval_every;
      tc.eval_grasps = a.eval_grasps;
      tc.coupling = coupling_from_name(a.coupling);
      TrainHooks hooks;
      if (!a.quiet) {
        hooks.on_epoch = [&err, v, s](const EpochRecord& r) {
          if (!r.eval_success) return;
          err << variant_name(v) << " seed " << s << " epoch " << r.epoch << " loss " << r.total << " success "
              << percent(*r.eval_success) << "\n";
        };
      }
      const TrainResult r = train(tc, model_for(v, sim, tc.seed), ds, mugs, hooks);
      const fs::path dir = work / "runs" / (variant_name(v) + "_seed" + std::to_string(s));
      write_train_outputs(r, dir);
      const double best = r.best.eval_success.value_or(0.0);
      success[v].push_back(best);
      runs.push_back(Json{{"variant", variant_name(v)}, {"seed", s}, {"best_success", best},
                          {"best_epoch", r.best.epoch}, {"checkpoint", dir.string()}});
    }
  }

  std::ostringstream table;
  table << "| Method |";
  for (int s = 0; s < a.seeds; ++s) table << " Seed " << s << " |";
  table << " Mean success rate |\n|---|";
  for (int s = 0; s < a.seeds; ++s) table << "---|";
  table << "---|\n";
  Json means = Json::object();
  for (Variant v : variants) {
    double mean = 0;
    table << "| " << table_labels().at(v) << " |";
    for (double x : success[v]) {
      table << " " << percent(x) << " |";
      mean += x;
    }
    mean /= std::max<std::size_t>(1, success[v].size());
    means[variant_name(v)] = mean;
    table << " " << percent(mean) << " |\n";
  }
  Json results{{"image_size", a.image_size}, {"n_mugs", a.n_mugs},     {"n_demos", ds.size()},
               {"epochs", a.epochs},         {"seeds", a.seeds},       {"eval_grasps", a.eval_grasps},
               {"coupling_direction", a.coupling}, {"runs", runs}, {"mean_success", means}};
  write_json_file(work / "results.json", results);
  write_text_file(work / "table1.md", table.str());
  if (!a.out.empty()) write_text_file(a.out, table.str());
  out << table.str();
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Affordance-cue imitation learning toolkit: mug simulator, expert demos, training, evaluation"};
  app.require_subcommand(1);

  GenMugsArgs gm;
  auto* c_gm = app.add_subcommand("gen-mugs", "Sample a mug catalog with full affordance coverage");
  c_gm->add_option("--n", gm.n, "Number of mugs")->capture_default_str();
  c_gm->add_option("--seed", gm.seed, "Random seed")->capture_default_str();
  c_gm->add_option("--out", gm.out, "Output JSON file")->required();

  GenDemosArgs gd;
  auto* c_gd = app.add_subcommand("gen-demos", "Generate scripted expert demonstrations");
  c_gd->add_option("--mugs", gd.mugs, "Mug catalog JSON")->required();
  c_gd->add_option("--per-category", gd.per_category, "Demonstrations per affordance category")->capture_default_str();
  c_gd->add_option("--seed", gd.seed, "Random seed")->capture_default_str();
  c_gd->add_option("--image-size", gd.image_size, "Depth image height and width")->capture_default_str();
  c_gd->add_option("--out", gd.out, "Output dataset directory")->required();

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train one model variant");
  c_tr->add_option("--data", tr.data, "Dataset directory")->required();
  c_tr->add_option("--mugs", tr.mugs, "Evaluation catalog (default: DATA/mugs.json)");
  c_tr->add_option("--variant", tr.variant, "full|normal-triplet|no-contrastive|baseline")->capture_default_str();
  c_tr->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
  c_tr->add_option("--seed", tr.seed, "Seed for initialization, batches and evaluation")->capture_default_str();
  c_tr->add_option("--out", tr.out, "Checkpoint directory")->required();
  c_tr->add_option("--batch-triplets", tr.batch_triplets, "Triplets per optimization step")->capture_default_str();
  c_tr->add_option("--eval-every", tr.eval_every, "Epochs between evaluations")->capture_default_str();
  c_tr->add_option("--eval-grasps", tr.eval_grasps, "Grasps per evaluation")->capture_default_str();
  c_tr->add_option("--margin", tr.margin, "Triplet margin M")->capture_default_str();
  c_tr->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  c_tr->add_option("--w-ctl", tr.w_ctl, "Contrastive loss weight")->capture_default_str();
  c_tr->add_option("--w-bc", tr.w_bc, "Behavior cloning loss weight")->capture_default_str();
  c_tr->add_option("--coupling", tr.coupling, "anchor_affordance|anchor_observation")->capture_default_str();
  c_tr->add_flag("--bc-anchor-only", tr.bc_anchor_only, "Apply the BC loss to anchors only");
  c_tr->add_flag("--l2-root", tr.l2_root, "Use the root (non-squared) L2 action error");
  c_tr->add_flag("--stop-gradient-on-cue", tr.stop_gradient_on_cue, "Block decoder gradients into the cue");
  c_tr->add_flag("--quiet", tr.quiet, "No progress output");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Evaluate a checkpoint in closed loop; prints a JSON report");
  c_ev->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  c_ev->add_option("--mugs", ev.mugs, "Mug catalog JSON");
  c_ev->add_option("--n-grasps", ev.n_grasps, "Number of episodes")->capture_default_str();
  c_ev->add_option("--seed", ev.seed, "Mug sampling seed")->capture_default_str();
  c_ev->add_option("--horizon", ev.horizon, "Episode length in states")->capture_default_str();
  c_ev->add_option("--holdout", ev.holdout, "Evaluate on N freshly generated mugs instead of --mugs");

  VizArgs vz;
  auto* c_vz = app.add_subcommand("viz", "Export per-step attention maps");
  c_vz->add_option("--checkpoint", vz.checkpoint, "Checkpoint directory")->required();
  c_vz->add_option("--out", vz.out, "Output directory")->required();
  c_vz->add_option("--trajectory", vz.trajectory, "Stored .afft trajectory (teacher forced)");
  c_vz->add_option("--mugs", vz.mugs, "Mug catalog for a closed-loop episode");
  c_vz->add_option("--mug-id", vz.mug_id, "Mug to roll out (default: first)");
  c_vz->add_option("--horizon", vz.horizon, "Episode length in states")->capture_default_str();
  c_vz->add_flag("--overlay", vz.overlay, "Also write cue overlays on the depth images");

  Table1Args t1;
  auto* c_t1 = app.add_subcommand("reproduce-table1", "Train all four variants over several seeds and tabulate");
  c_t1->add_option("--work", t1.work, "Working directory")->capture_default_str();
  c_t1->add_option("--image-size", t1.image_size, "Depth image height and width")->capture_default_str();
  c_t1->add_option("--n-mugs", t1.n_mugs, "Catalog size")->capture_default_str();
  c_t1->add_option("--per-category", t1.per_category, "Demonstrations per category")->capture_default_str();
  c_t1->add_option("--epochs", t1.epochs, "Training epochs")->capture_default_str();
  c_t1->add_option("--seeds", t1.seeds, "Number of seeds")->capture_default_str();
  c_t1->add_option("--eval-every", t1.eval_every, "Epochs between evaluations")->capture_default_str();
  c_t1->add_option("--eval-grasps", t1.eval_grasps, "Grasps per evaluation")->capture_default_str();
  c_t1->add_option("--data-seed", t1.data_seed, "Seed for mugs and demonstrations")->capture_default_str();
  c_t1->add_option("--coupling", t1.coupling, "anchor_affordance|anchor_observation")->capture_default_str();
  c_t1->add_option("--variants", t1.variants, "Subset of variants to run");
  c_t1->add_option("--out", t1.out, "Also write the markdown table here");
  c_t1->add_flag("--quiet", t1.quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const auto* sub : app.get_subcommands()) target = sub;
    out << target->help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "affcue: " << e.what() << "\n";
    err << "run 'affcue --help' for usage\n";
    return 1;
  }

  try {
    if (c_gm->parsed()) return run_gen_mugs(gm, out);
    if (c_gd->parsed()) return run_gen_demos(gd, out);
    if (c_tr->parsed()) return run_train(tr, out, err);
    if (c_ev->parsed()) return run_eval(ev, out);
    if (c_vz->parsed()) return run_viz(vz, out);
    if (c_t1->parsed()) return run_table1(t1, out, err);
  } catch (const Error& e) {
    err << "affcue: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "affcue: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace affcue
