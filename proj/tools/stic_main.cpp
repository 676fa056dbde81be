#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "stic/boundary.hpp"
#include "stic/checkpoint.hpp"
#include "stic/image_io.hpp"
#include "stic/metrics.hpp"
#include "stic/settings.hpp"

namespace fs = std::filesystem;
using namespace stic;

namespace {

// Collects every artifact path so the manifest can list the run's outputs.
struct OutDir {
  fs::path root;
  std::vector<std::string> files;

  explicit OutDir(const std::string& path) : root(path) { fs::create_directories(root); }

  fs::path file(const std::string& name) {
    files.push_back(name);
    return root / name;
  }
};

std::string trimmed(const std::string& s) {
  auto a = s.find_first_not_of(" \t");
  auto b = s.find_last_not_of(" \t");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

void apply_overrides(Config& cfg, const std::vector<std::string>& overrides) {
  for (const std::string& item : overrides) {
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("override '" + item + "' is not of the form key=value");
    }
    std::string key = trimmed(item.substr(0, eq));
    std::string value = trimmed(item.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("override '" + item + "' has an empty key");
    cfg.set(key, value);
  }
}

Config load_config(const std::string& path) {
  if (path.empty()) return Config();
  try {
    return Config::load(path);
  } catch (const std::exception& e) {
    throw std::invalid_argument(e.what());
  }
}

void reject_unknown(const Config& cfg) {
  auto leftover = cfg.unconsumed();
  if (leftover.empty()) return;
  std::string msg = "unknown config key(s):";
  for (const std::string& k : leftover) msg += " " + k;
  throw std::invalid_argument(msg);
}

// One config file drives a whole pipeline, so checkpoint-driven subcommands
// accept (and ignore) the training-side keys instead of flagging them.
void consume_pipeline_keys(Config& cfg) {
  train_from_config(cfg);
  cfg.get_string("model", "");
  cfg.get_string("model.hidden", "");
  cfg.get_bool("model.score_head", false);
  cfg.get_double("score.weight", 0.0);
  cfg.get_double("score.fd_step", 0.0);
  cfg.get_int("score.probes", 0);
  cfg.get_string("score.mode", "");
}

void write_manifest(const OutDir& dir, const std::string& command, const Config& cfg,
                    std::uint64_t seed, const std::string& config_path) {
  std::ofstream os(dir.root / "manifest.txt");
  os << "command = " << command << '\n';
  os << "config = " << (config_path.empty() ? "(none)" : config_path) << '\n';
  os << "seed = " << seed << '\n';
  for (const auto& [key, value] : cfg.entries()) {
    if (key != "seed") os << key << " = " << value << '\n';
  }
  os << "[files]\n";
  for (const std::string& f : dir.files) os << f << '\n';
  os << "manifest.txt\n";
}

// --seed beats the config key; the config key is consumed either way so it
// never shows up as unknown.
std::uint64_t resolve_seed(Config& cfg, bool flag_given, std::uint64_t flag_seed) {
  auto cfg_seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  return flag_given ? flag_seed : cfg_seed;
}

GramTarget class_anchor(const ClassifierModel& model, const Dataset& data, int cls,
                        const std::vector<int>& layers) {
  std::vector<int> use = layers.empty() ? model.gram_layers_default() : layers;
  if (use.empty()) return GramTarget();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] != cls) continue;
    Tensor x = data.sample_tensor(i);
    if (data.pixel_domain) {
      Rng none(0);
      x = preprocess(x, 0.0, none);
    }
    return make_gram_target(model, x, use, "class " + std::to_string(cls));
  }
  return GramTarget();
}

void write_train_artifacts(OutDir& out, const ClassifierModel& model, const TrainResult& result,
                           const Dataset& data) {
  {
    std::ofstream os(out.file("metrics.csv"));
    write_metrics_csv(os, result.iterations);
  }
  {
    std::ofstream os(out.file("passes.csv"));
    write_pass_csv(os, result.passes);
  }
  for (const Checkpoint& ckpt : result.checkpoints) {
    save_checkpoint(out.file("pass_" + std::to_string(ckpt.tau) + ".stic").string(), ckpt);
  }
  if (!result.checkpoints.empty()) {
    save_checkpoint(out.file("final.stic").string(), result.checkpoints.back());
  }

  if (data.pixel_domain && !result.state.hard.empty()) {
    std::vector<Tensor> states;
    for (const FakeEntry& entry : result.state.hard) states.push_back(entry.sample);
    std::size_t clipped = write_pgm(out.file("buffer.pgm").string(), tile_grid(states, 8));
    if (clipped > 0) std::cout << "note: clipped " << clipped << " pixel values in buffer.pgm\n";
  } else if (data.sample_shape == Shape{2} && !result.state.hard.empty()) {
    std::ofstream os(out.file("fakes.csv"));
    os << std::setprecision(17) << "x0,x1,target_class\n";
    for (const FakeEntry& entry : result.state.hard) {
      os << entry.sample.at(0) << ',' << entry.sample.at(1) << ',' << entry.target_class << '\n';
    }
  }
  if (data.sample_shape == Shape{2}) {
    BoundaryMap map = boundary_map(model, Bounds2D{-2.0, 2.0, -2.0, 2.0}, 128);
    write_ppm(out.file("boundary.ppm").string(), boundary_image(map, model.num_real_classes()));
  }

  for (const PassSummary& p : result.passes) {
    std::cout << "pass " << p.pass << ": mean_loss=" << p.mean_loss
              << " train_acc=" << p.train_accuracy << " proxy=" << p.mean_max_real_softmax
              << '\n';
  }
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              bool seed_given, std::uint64_t flag_seed, const std::string& out_path,
              bool with_score) {
  Config cfg = load_config(config_path);
  apply_overrides(cfg, overrides);
  std::uint64_t seed = resolve_seed(cfg, seed_given, flag_seed);
  Rng root(seed);

  Dataset data = dataset_from_config(cfg, root);
  ModelSpec spec = model_spec_from_config(cfg, data);
  OutDir out(out_path);
  TrainResult result;
  if (with_score) {
    ScoreTrainConfig sc = score_train_from_config(cfg);
    reject_unknown(cfg);
    spec.with_score_head = true;
    Rng model_rng = root.fork(0x6d6f6465);
    ClassifierModel model(spec, model_rng);
    result = train_score_stic(model, sc, data, root.fork(0x747261696e));
    write_train_artifacts(out, model, result, data);
  } else {
    TrainConfig tc = train_from_config(cfg);
    reject_unknown(cfg);
    Rng model_rng = root.fork(0x6d6f6465);
    ClassifierModel model(spec, model_rng);
    result = train(model, tc, data, root.fork(0x747261696e));
    write_train_artifacts(out, model, result, data);
  }
  write_manifest(out, with_score ? "score-train" : "train", cfg, seed, config_path);
  std::cout << "wrote " << out.root.string() << '\n';
  return 0;
}

int cmd_sample(const std::string& ckpt_path, const std::string& config_path,
               const std::vector<std::string>& overrides, bool seed_given,
               std::uint64_t flag_seed, const std::string& out_path, int cls, int count) {
  Config cfg = load_config(config_path);
  apply_overrides(cfg, overrides);
  std::uint64_t seed = resolve_seed(cfg, seed_given, flag_seed);
  Rng root(seed);

  ClassifierModel model = model_from_checkpoint(load_checkpoint(ckpt_path));
  SamplerConfig sampler = sampler_from_config(cfg);
  Dataset anchors;
  if (cfg.has("dataset")) anchors = dataset_from_config(cfg, root);
  consume_pipeline_keys(cfg);
  reject_unknown(cfg);

  if (count < 1) throw std::invalid_argument("sample: --n must be >= 1");
  if (cls >= model.num_real_classes()) {
    throw std::invalid_argument("sample: class out of range, model has " +
                                std::to_string(model.num_real_classes()) + " classes");
  }
  std::vector<int> classes;
  if (cls >= 0) {
    classes.push_back(cls);
  } else {
    for (int c = 0; c < model.num_real_classes(); ++c) classes.push_back(c);
  }

  OutDir out(out_path);
  bool image_model = model.spec().input_shape.size() == 3;
  std::ofstream point_csv;
  if (!image_model) {
    point_csv.open(out.file("samples.csv"));
    point_csv << std::setprecision(17) << "class,chain";
    for (std::int64_t d = 0; d < shape_numel(model.spec().input_shape); ++d) {
      point_csv << ",x" << d;
    }
    point_csv << ",prob_target\n";
  }

  int failures = 0;
  for (int k : classes) {
    GramTarget gram = anchors.size() > 0 ? class_anchor(model, anchors, k, sampler.layers)
                                         : GramTarget();
    Tensor target = one_hot(k, model.num_logits());
    std::vector<Tensor> finals;
    for (int i = 0; i < count; ++i) {
      SynthesisResult r = synthesize(model, target, k, gram, sampler,
                                     root.fork((static_cast<std::uint64_t>(k) << 32) | i));
      if (r.chain.failed) ++failures;
      finals.push_back(r.chain.state);
      if (i == 0) {
        std::ofstream os(out.file("trajectory_class" + std::to_string(k) + ".csv"));
        write_trajectory_csv(os, r.trajectory);
      }
      if (image_model) {
        write_pgm(out.file("sample_c" + std::to_string(k) + "_" + std::to_string(i) + ".pgm")
                      .string(),
                  r.chain.state);
      } else {
        Tensor probs = softmax(model.forward_logits(r.chain.state), 0);
        point_csv << k << ',' << i;
        for (std::int64_t d = 0; d < r.chain.state.numel(); ++d) {
          point_csv << ',' << r.chain.state.at(d);
        }
        point_csv << ',' << probs.at(k) << '\n';
      }
    }
    if (image_model) {
      write_pgm(out.file("grid_class" + std::to_string(k) + ".pgm").string(),
                tile_grid(finals, 4));
    }
  }
  if (failures > 0) std::cout << "note: " << failures << " chain(s) hit non-finite gradients\n";
  write_manifest(out, "sample", cfg, seed, config_path);
  std::cout << "wrote " << out.root.string() << '\n';
  return 0;
}

int cmd_interpolate(const std::string& ckpt_path, const std::string& config_path,
                    const std::vector<std::string>& overrides, bool seed_given,
                    std::uint64_t flag_seed, const std::string& out_path, int class_a,
                    int class_b, int points) {
  Config cfg = load_config(config_path);
  apply_overrides(cfg, overrides);
  std::uint64_t seed = resolve_seed(cfg, seed_given, flag_seed);
  Rng root(seed);

  ClassifierModel model = model_from_checkpoint(load_checkpoint(ckpt_path));
  SamplerConfig sampler = sampler_from_config(cfg);
  Dataset anchors;
  if (cfg.has("dataset")) anchors = dataset_from_config(cfg, root);
  consume_pipeline_keys(cfg);
  reject_unknown(cfg);

  if (class_a < 0 || class_a >= model.num_real_classes() || class_b < 0 ||
      class_b >= model.num_real_classes()) {
    throw std::invalid_argument("interpolate: endpoint classes out of range");
  }

  auto endpoint = [&](int k, std::uint64_t tag) {
    GramTarget gram = anchors.size() > 0 ? class_anchor(model, anchors, k, sampler.layers)
                                         : GramTarget();
    return synthesize(model, one_hot(k, model.num_logits()), k, gram, sampler, root.fork(tag))
        .chain.state;
  };
  Tensor a = endpoint(class_a, 0xa0);
  Tensor b = endpoint(class_b, 0xb0);
  std::vector<Tensor> path = interpolate(a, b, points);

  OutDir out(out_path);
  {
    std::ofstream os(out.file("interpolation.csv"));
    os << std::setprecision(17) << "index,weight,argmax";
    for (int c = 0; c < model.num_logits(); ++c) os << ",p" << c;
    os << '\n';
    for (std::size_t i = 0; i < path.size(); ++i) {
      Tensor probs = softmax(model.forward_logits(path[i]), 0);
      int best = 0;
      for (int c = 1; c < model.num_logits(); ++c) {
        if (probs.at(c) > probs.at(best)) best = c;
      }
      os << i << ',' << static_cast<double>(i) / (points - 1) << ',' << best;
      for (int c = 0; c < model.num_logits(); ++c) os << ',' << probs.at(c);
      os << '\n';
    }
  }
  if (model.spec().input_shape.size() == 3) {
    write_pgm(out.file("interpolation.pgm").string(), tile_grid(path, points));
  }
  write_manifest(out, "interpolate", cfg, seed, config_path);
  std::cout << "wrote " << out.root.string() << '\n';
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& config_path,
             const std::vector<std::string>& overrides, bool seed_given, std::uint64_t flag_seed,
             const std::string& out_path) {
  Config cfg = load_config(config_path);
  apply_overrides(cfg, overrides);
  std::uint64_t seed = resolve_seed(cfg, seed_given, flag_seed);
  Rng root(seed);

  Dataset data = dataset_from_config(cfg, root);
  ClassifierModel model = model_from_checkpoint(load_checkpoint(ckpt_path));
  ModelSpec template_spec = model_spec_from_config(cfg, data);
  SamplerConfig sampler = sampler_from_config(cfg);
  int per_class = cfg.get_int("eval.per_class", 16);
  int epochs = cfg.get_int("eval.epochs", 3);
  int knn_k = cfg.get_int("eval.knn_k", 3);
  int chains = cfg.get_int("eval.chains", 8);
  double sigma = cfg.get_double("eval.sigma", 0.1);
  consume_pipeline_keys(cfg);
  reject_unknown(cfg);
  if (per_class < 1) throw std::invalid_argument("eval: eval.per_class must be >= 1");

  // synthesize the generated counterpart of the real dataset
  Dataset generated;
  generated.num_classes = data.num_classes;
  generated.sample_shape = data.sample_shape;
  generated.pixel_domain = false;  // synthesized samples already live in model space
  generated.name = data.name + "-synth";
  int failures = 0;
  for (int k = 0; k < data.num_classes; ++k) {
    GramTarget gram = class_anchor(model, data, k, sampler.layers);
    Tensor target = one_hot(k, model.num_logits());
    for (int i = 0; i < per_class; ++i) {
      SynthesisResult r = synthesize(model, target, k, gram, sampler,
                                     root.fork(0xe0000000ULL + k * 1024 + i));
      if (r.chain.failed) {
        ++failures;
        continue;
      }
      generated.samples.emplace_back(r.chain.state.data().begin(), r.chain.state.data().end());
      generated.labels.push_back(k);
    }
  }
  if (failures > 0) std::cout << "note: dropped " << failures << " failed chain(s)\n";

  std::vector<std::string> messages;
  double cls_r = cls_cross(data, generated, template_spec, epochs, root.fork(0xc1), &messages);
  double cls_g = cls_cross(generated, data, template_spec, epochs, root.fork(0xc2), &messages);
  FeatureCloud real_cloud = extract_features(model, data, "real");
  FeatureCloud gen_cloud = extract_features(model, generated, "generated");
  double fd = frechet_distance(real_cloud, gen_cloud, &messages);
  KnnResult knn = knn_precision_recall(real_cloud, gen_cloud, knn_k);
  DiversityReport div = diversity_report(model, 0, chains, sigma, sampler, root.fork(0xd1));

  OutDir out(out_path);
  {
    std::ofstream os(out.file("metrics.csv"));
    append_metrics_csv(os, "eval-" + std::to_string(seed),
                       {{"cls_r_percent", cls_r},
                        {"cls_g_percent", cls_g},
                        {"frechet", fd},
                        {"knn_precision", knn.precision},
                        {"knn_recall", knn.recall},
                        {"diversity_near", div.near_mean_distance},
                        {"diversity_far", div.far_mean_distance}});
  }
  for (const std::string& m : messages) std::cout << "note: " << m << '\n';
  std::cout << "cls_r=" << cls_r << "% cls_g=" << cls_g << "% frechet=" << fd
            << " knn_p=" << knn.precision << " knn_r=" << knn.recall << '\n';
  write_manifest(out, "eval", cfg, seed, config_path);
  std::cout << "wrote " << out.root.string() << '\n';
  return 0;
}

int cmd_boundary(const std::string& ckpt_path, const std::string& config_path,
                 const std::vector<std::string>& overrides, bool seed_given,
                 std::uint64_t flag_seed, const std::string& out_path, int grid, double lo,
                 double hi) {
  Config cfg = load_config(config_path);
  apply_overrides(cfg, overrides);
  std::uint64_t seed = resolve_seed(cfg, seed_given, flag_seed);
  Rng root(seed);
  if (cfg.has("dataset")) dataset_from_config(cfg, root);
  consume_pipeline_keys(cfg);
  reject_unknown(cfg);

  ClassifierModel model = model_from_checkpoint(load_checkpoint(ckpt_path));
  BoundaryMap map = boundary_map(model, Bounds2D{lo, hi, lo, hi}, grid);

  OutDir out(out_path);
  write_ppm(out.file("boundary.ppm").string(), boundary_image(map, model.num_real_classes()));
  write_manifest(out, "boundary-viz", cfg, seed, config_path);
  std::cout << "wrote " << out.root.string() << '\n';
  return 0;
}

int cmd_attentive(const std::string& config_path, const std::vector<std::string>& overrides,
                  bool seed_given, std::uint64_t flag_seed, const std::string& out_path) {
  Config cfg = load_config(config_path);
  apply_overrides(cfg, overrides);
  std::uint64_t seed = resolve_seed(cfg, seed_given, flag_seed);
  Rng root(seed);

  Dataset data = dataset_from_config(cfg, root);
  AttentiveSettings settings = attentive_from_config(cfg, data);
  ModelSpec classifier_spec = model_spec_from_config(cfg, data);
  reject_unknown(cfg);

  classifier_spec.kind = ArchKind::kMlp;
  classifier_spec.input_shape = {settings.encoder.feature_width};
  classifier_spec.with_score_head = false;

  Rng init_rng = root.fork(0x656e63);
  AttentiveEncoder encoder(settings.encoder, init_rng);
  Decoder decoder(settings.decoder, init_rng);
  ClassifierModel classifier(classifier_spec, init_rng);

  AttentiveTrainResult result =
      attentive_train(encoder, decoder, classifier, settings.train, data, root.fork(0x617474));

  OutDir out(out_path);
  {
    std::ofstream os(out.file("recon.csv"));
    os << std::setprecision(17) << "iteration,loss\n";
    for (std::size_t i = 0; i < result.recon_loss.size(); ++i) {
      os << i << ',' << result.recon_loss[i] << '\n';
    }
  }
  {
    std::ofstream os(out.file("metrics.csv"));
    write_metrics_csv(os, result.classifier_run.iterations);
  }
  {
    std::ofstream os(out.file("passes.csv"));
    write_pass_csv(os, result.classifier_run.passes);
  }
  if (!result.classifier_run.checkpoints.empty()) {
    save_checkpoint(out.file("features.stic").string(),
                    result.classifier_run.checkpoints.back());
  }

  // decode a few synthesized feature vectors into an image grid
  std::vector<Tensor> decoded;
  SamplerConfig feature_sampler = settings.train.classifier.sampler;
  for (int k = 0; k < data.num_classes; ++k) {
    FeatureSampleResult fs = feature_sample(
        classifier, random_normal({settings.encoder.feature_width}, root), k,
        feature_sampler.eps1, feature_sampler.eps3, feature_sampler.steps, root);
    decoded.push_back(decoder.decode(fs.feature));
  }
  write_pgm(out.file("decoded.pgm").string(), tile_grid(decoded, data.num_classes));

  for (const PassSummary& p : result.classifier_run.passes) {
    std::cout << "pass " << p.pass << ": mean_loss=" << p.mean_loss
              << " train_acc=" << p.train_accuracy << '\n';
  }
  write_manifest(out, "attentive-train", cfg, seed, config_path);
  std::cout << "wrote " << out.root.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent generative classifier: train, synthesize, evaluate"};
  app.require_subcommand(1);

  std::string config_path;
  std::string ckpt_path;
  std::string out_path = "run";
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
  int cls = -1;
  int count = 16;
  int class_a = 0;
  int class_b = 1;
  int points = 8;
  int grid = 256;
  double lo = -2.0;
  double hi = 2.0;

  std::vector<CLI::Option*> seed_opts;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* copt = sub->add_option("--config", config_path, "flat key = value config file");
    if (config_required) copt->required();
    seed_opts.push_back(sub->add_option("--seed", seed, "root seed; overrides the config's seed key"));
    sub->add_option("--out", out_path, "output directory");
    sub->add_option("overrides", overrides, "key=value config overrides, last wins");
  };

  auto* train_cmd = app.add_subcommand("train", "recurrent training with synthesized fakes");
  add_common(train_cmd, true);

  auto* sample_cmd = app.add_subcommand("sample", "class-conditional synthesis from a checkpoint");
  add_common(sample_cmd, false);
  sample_cmd->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  sample_cmd->add_option("--class", cls, "conditioning class, -1 for all");
  sample_cmd->add_option("--n", count, "chains per class");

  auto* interp_cmd = app.add_subcommand("interpolate", "linear path between two class samples");
  add_common(interp_cmd, false);
  interp_cmd->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  interp_cmd->add_option("--class-a", class_a, "first endpoint class");
  interp_cmd->add_option("--class-b", class_b, "second endpoint class");
  interp_cmd->add_option("--points", points, "number of interpolation points");

  auto* eval_cmd = app.add_subcommand("eval", "cross-classification, Frechet, k-NN, diversity");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--ckpt", ckpt_path, "model checkpoint")->required();

  auto* boundary_cmd = app.add_subcommand("boundary-viz", "argmax-class map of a 2-input model");
  add_common(boundary_cmd, false);
  boundary_cmd->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  boundary_cmd->add_option("--grid", grid, "grid resolution");
  boundary_cmd->add_option("--lo", lo, "lower bound of both axes");
  boundary_cmd->add_option("--hi", hi, "upper bound of both axes");

  auto* score_cmd = app.add_subcommand("score-train", "training with the score regularizer");
  add_common(score_cmd, true);

  auto* att_cmd = app.add_subcommand("attentive-train", "feature-space pipeline with attention");
  add_common(att_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  bool seed_given = false;
  for (const CLI::Option* opt : seed_opts) {
    if (opt->count() > 0) seed_given = true;
  }
  try {
    if (train_cmd->parsed()) {
      return cmd_train(config_path, overrides, seed_given, seed, out_path, false);
    }
    if (score_cmd->parsed()) {
      return cmd_train(config_path, overrides, seed_given, seed, out_path, true);
    }
    if (sample_cmd->parsed()) {
      return cmd_sample(ckpt_path, config_path, overrides, seed_given, seed, out_path, cls,
                        count);
    }
    if (interp_cmd->parsed()) {
      return cmd_interpolate(ckpt_path, config_path, overrides, seed_given, seed, out_path,
                             class_a, class_b, points);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(ckpt_path, config_path, overrides, seed_given, seed, out_path);
    }
    if (boundary_cmd->parsed()) {
      return cmd_boundary(ckpt_path, config_path, overrides, seed_given, seed, out_path, grid,
                          lo, hi);
    }
    if (att_cmd->parsed()) {
      return cmd_attentive(config_path, overrides, seed_given, seed, out_path);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
