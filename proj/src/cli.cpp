#include "ctxbias/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ctxbias/benchgen.hpp"
#include "ctxbias/corpus.hpp"
#include "ctxbias/evalkit.hpp"
#include "ctxbias/lm.hpp"
#include "ctxbias/parallel.hpp"
#include "ctxbias/robust.hpp"
#include "ctxbias/tagger.hpp"
#include "ctxbias/version.hpp"

namespace ctxbias {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

uint64_t default_seed() {
  if (const char* env = std::getenv("CONTEXTBIAS_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw ConfigError("CONTEXTBIAS_SEED is not an integer");
    }
  }
  return 1;
}

TypeSet parse_types(const std::string& csv) {
  std::vector<std::string> names;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) names.push_back(item);
  return TypeSet(names);
}

SelectionThresholds parse_thresholds(const std::string& csv) {
  std::istringstream in(csv);
  std::string item;
  std::vector<double> vals;
  while (std::getline(in, item, ',')) vals.push_back(std::stod(item));
  if (vals.size() != 3)
    throw ConfigError("--thresholds expects weak_conf,nrb_gap,wts_gap");
  SelectionThresholds th;
  th.weak_conf_min = vals[0];
  th.nrb_gap_min = vals[1];
  th.wts_gap_max = vals[2];
  th.validate();
  return th;
}

// Reproducibility record written next to each subcommand's primary output.
void write_manifest(const std::string& out_path, const std::string& subcommand,
                    const nlohmann::json& config,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["tool"] = "ctxbias";
  j["version"] = kVersion;
  j["subcommand"] = subcommand;
  j["config"] = config;
  j["config_hash"] = fnv1a(config.dump());
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  write_file(out_path, j.dump(2) + "\n");
}

// Injects values from a JSON config file as synthesized CLI flags placed
// before the user's own flags; explicitly passed options win because their
// keys are dropped from the injection.
std::vector<std::string> merge_config_args(const std::vector<std::string>& args) {
  std::string config_path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;

  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(read_file(config_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config file " + config_path + ": " + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config file must hold a JSON object");

  std::vector<std::string> out;
  if (!args.empty()) out.push_back(args[0]);  // subcommand name stays first
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    bool overridden = false;
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) overridden = true;
    if (overridden) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back(flag);
    } else if (value.is_string()) {
      out.push_back(flag);
      out.push_back(value.get<std::string>());
    } else {
      out.push_back(flag);
      out.push_back(value.dump());
    }
  }
  for (size_t i = args.empty() ? 0 : 1; i < args.size(); ++i) out.push_back(args[i]);
  return out;
}

struct CommonOpts {
  int threads = 0;
  std::string config_path;
  std::string manifest_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--threads", threads, "Cap worker threads (0 = runtime default)");
    cmd->add_option("--config", config_path, "JSON config file; flags override");
    cmd->add_option("--manifest", manifest_path,
                    "Manifest path (default: <out>.manifest.json)");
  }

  std::string manifest_for(const std::string& primary_output) const {
    return manifest_path.empty() ? primary_output + ".manifest.json" : manifest_path;
  }
};

std::vector<std::vector<std::string>> dataset_labels(const Dataset& ds) {
  std::vector<std::vector<std::string>> out;
  out.reserve(ds.sentences.size());
  for (const auto& s : ds.sentences) out.push_back(s.labels);
  return out;
}

// ---- subcommand bodies ----------------------------------------------------

int cmd_synth(const std::string& out_dir, uint64_t seed, const SynthSpec& spec,
              const CommonOpts& common) {
  Rng rng = make_rng(seed);
  SynthData data = gen_synthetic_bias(spec, rng);
  save_conll_file(data.train, out_dir + "/train.conll");
  save_conll_file(data.test, out_dir + "/test.conll");
  save_conll_file(data.challenge, out_dir + "/challenge.conll");

  nlohmann::json cfg{{"seed", seed},
                     {"types", spec.num_types},
                     {"names_per_type", spec.names_per_type},
                     {"templates_per_type", spec.templates_per_type},
                     {"generic_templates", spec.generic_templates},
                     {"generic_rate", spec.generic_rate},
                     {"train_size", spec.train_size},
                     {"test_size", spec.test_size},
                     {"challenge_size", spec.challenge_size},
                     {"leak_rate", spec.leak_rate}};
  write_manifest(common.manifest_for(out_dir + "/synth"), "synth", cfg, {},
                 {out_dir + "/train.conll", out_dir + "/test.conll",
                  out_dir + "/challenge.conll"});
  std::cout << "wrote " << data.train.sentences.size() << " train, "
            << data.test.sentences.size() << " test, "
            << data.challenge.sentences.size() << " challenge sentences to "
            << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& train_path, const std::string& dev_path,
              const std::string& out_path, const std::string& log_path,
              const std::string& types_csv, const TaggerConfig& cfg,
              const CommonOpts& common) {
  TypeSet ts = parse_types(types_csv);
  Dataset train = load_conll_file(train_path, ts);
  std::optional<Dataset> dev;
  if (!dev_path.empty()) dev = load_conll_file(dev_path, ts);

  TrainedTagger model = train_tagger(train, dev ? &*dev : nullptr, cfg);
  save_tagger(model, out_path);

  std::ostringstream log;
  for (const TrainLogEntry& e : model.log) {
    nlohmann::json j{{"epoch", e.epoch}, {"l_true", e.l_true}, {"l_noisy", e.l_noisy}};
    if (e.dev_f1 >= 0.0) j["dev_f1"] = e.dev_f1;
    log << j.dump() << "\n";
  }
  const std::string actual_log = log_path.empty() ? out_path + ".log.jsonl" : log_path;
  write_file(actual_log, log.str());

  nlohmann::json jcfg{{"train", train_path},
                      {"dev", dev_path},
                      {"types", types_csv},
                      {"embed_dim", cfg.embed_dim},
                      {"window", cfg.window},
                      {"hidden", cfg.hidden},
                      {"lr", cfg.lr},
                      {"lr_decay", cfg.lr_decay},
                      {"epochs", cfg.epochs},
                      {"batch", cfg.batch_size},
                      {"seed", cfg.seed},
                      {"freeze", cfg.freeze_embeddings},
                      {"lambda", cfg.lambda},
                      {"adv", cfg.use_adv},
                      {"mask", cfg.use_mask}};
  std::vector<std::string> inputs{train_path};
  if (!dev_path.empty()) inputs.push_back(dev_path);
  write_manifest(common.manifest_for(out_path), "train", jcfg, inputs,
                 {out_path, actual_log});
  if (!model.log.empty())
    std::cout << "final l_true=" << model.log.back().l_true
              << " l_noisy=" << model.log.back().l_noisy << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& in_path,
                const std::string& out_path, const CommonOpts& common) {
  TrainedTagger model = load_tagger(model_path);
  Dataset data = load_conll_file(in_path, model.typeset);
  auto preds = predict_dataset(model.params, model.vocab, model.typeset, data,
                               model.config);
  Dataset out = data;
  for (size_t i = 0; i < out.sentences.size(); ++i)
    out.sentences[i].labels = preds[i];
  save_conll_file(out, out_path);
  write_manifest(common.manifest_for(out_path), "predict",
                 {{"model", model_path}, {"in", in_path}}, {model_path, in_path},
                 {out_path});
  return 0;
}

int cmd_eval(const std::string& gold_path, const std::string& pred_path,
             const std::string& report_path, const std::string& tsv_path,
             const std::string& types_csv, const CommonOpts& common) {
  TypeSet ts = parse_types(types_csv);
  Dataset gold = load_conll_file(gold_path, ts);
  Dataset pred = load_conll_file(pred_path, ts);
  auto labels = dataset_labels(pred);
  EvalResult mention = mention_prf(gold, labels);
  PRF boundary = boundary_prf(gold, labels);

  std::map<std::string, std::string> meta{{"gold", gold_path}, {"pred", pred_path}};
  const std::string report = report_json(mention, boundary, meta);
  if (!report_path.empty()) write_file(report_path, report + "\n");
  if (!tsv_path.empty()) write_file(tsv_path, report_tsv(mention, boundary));
  std::cout << "mention F1 " << mention.overall.f1 << " (P " << mention.overall.precision
            << ", R " << mention.overall.recall << "), boundary F1 " << boundary.f1
            << "\n";
  if (!report_path.empty())
    write_manifest(common.manifest_for(report_path), "eval",
                   {{"gold", gold_path}, {"pred", pred_path}},
                   {gold_path, pred_path}, {report_path});
  return 0;
}

int cmd_lm_train(const std::string& in_path, const std::string& conll_path,
                 const std::string& out_path, int order, double discount,
                 const std::string& types_csv, const std::string& dump_path,
                 const CommonOpts& common) {
  TypeSet ts = parse_types(types_csv);
  TokenStream stream;
  std::vector<std::string> inputs;
  if (!conll_path.empty()) {
    Dataset ds = load_conll_file(conll_path, ts);
    stream = abstract_entities(ds);
    inputs.push_back(conll_path);
  } else if (!in_path.empty()) {
    stream = load_stream_file(in_path);
    inputs.push_back(in_path);
  } else {
    throw ConfigError("lm-train needs --in or --conll");
  }
  KNModel model = train_kn(stream, order, ts.types, discount);
  save_kn(model, out_path);
  std::vector<std::string> outputs{out_path};
  if (!dump_path.empty()) {
    write_file(dump_path, dump_kn_text(model));
    outputs.push_back(dump_path);
  }
  write_manifest(common.manifest_for(out_path), "lm-train",
                 {{"order", order},
                  {"discount", discount},
                  {"types", types_csv},
                  {"in", in_path},
                  {"conll", conll_path}},
                 inputs, outputs);
  std::cout << "trained order-" << order << " model, vocab " << model.vocab_size()
            << "\n";
  return 0;
}

int cmd_lm_tag(const std::string& model_path, const std::string& in_path,
               const std::string& out_path, const CommonOpts& common) {
  KNModel model = load_kn(model_path);
  TypeSet ts(model.type_names);
  Dataset data = load_conll_file(in_path, ts);

  std::ostringstream out;
  size_t correct = 0, total = 0;
  for (size_t si = 0; si < data.sentences.size(); ++si) {
    const Sentence& s = data.sentences[si];
    std::vector<std::string> tokens;
    for (const Token& t : s.tokens) tokens.push_back(t.surface);
    for (const Mention& m : extract_mentions(s, ts)) {
      TypeDistribution dist = tag_slot(model, tokens, m.start, m.end);
      nlohmann::json j;
      j["sentence"] = si;
      j["span"] = {m.start, m.end};
      j["gold"] = ts.name(m.type);
      j["argmax"] = dist.top();
      j["gap"] = dist.gap;
      for (size_t t = 0; t < dist.types.size(); ++t)
        j["probs"][dist.types[t]] = dist.probs[t];
      out << j.dump() << "\n";
      ++total;
      if (dist.top() == ts.name(m.type)) ++correct;
    }
  }
  write_file(out_path, out.str());
  write_manifest(common.manifest_for(out_path), "lm-tag",
                 {{"model", model_path}, {"in", in_path}}, {model_path, in_path},
                 {out_path});
  std::cout << "tagged " << total << " mentions, argmax accuracy "
            << (total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0)
            << "\n";
  return 0;
}

int cmd_build(bool nrb, const std::string& cand_path, const std::string& lm_path,
              const std::string& thresholds_csv, const std::string& out_path,
              const std::string& selected_path, bool allow_multi_token,
              const std::string& types_csv, const CommonOpts& common) {
  SelectionThresholds th = parse_thresholds(thresholds_csv);
  auto candidates = load_candidates_file(cand_path);
  KNModel lm = load_kn(lm_path);
  TypeSet ts = parse_types(types_csv);

  auto selected = nrb ? select_nrb(candidates, lm, th, !allow_multi_token)
                      : select_wts(candidates, lm, th, !allow_multi_token);
  Dataset ds = candidates_to_dataset(candidates, selected, ts);
  save_conll_file(ds, out_path);

  std::vector<std::string> outputs{out_path};
  if (!selected_path.empty()) {
    std::vector<Candidate> kept;
    for (size_t idx : selected) kept.push_back(candidates[idx]);
    write_file(selected_path, candidates_to_jsonl(kept));
    outputs.push_back(selected_path);
  }
  const char* name = nrb ? "build-nrb" : "build-wts";
  write_manifest(common.manifest_for(out_path), name,
                 {{"candidates", cand_path},
                  {"lm", lm_path},
                  {"thresholds", thresholds_csv},
                  {"multi_token", allow_multi_token},
                  {"types", types_csv}},
                 {cand_path, lm_path}, outputs);
  std::cout << name << ": selected " << selected.size() << " of "
            << candidates.size() << " candidates\n";
  return 0;
}

int cmd_augment(bool mask, const std::string& in_path, const std::string& out_path,
                const std::string& types_csv, const CommonOpts& common) {
  if (!mask) throw ConfigError("augment: only --mask mode is available");
  TypeSet ts = parse_types(types_csv);
  Dataset ds = load_conll_file(in_path, ts);
  Dataset augmented = mask_augment(ds);
  save_conll_file(augmented, out_path);
  write_manifest(common.manifest_for(out_path), "augment",
                 {{"mask", true}, {"in", in_path}, {"types", types_csv}},
                 {in_path}, {out_path});
  std::cout << "augmented " << ds.sentences.size() << " -> "
            << augmented.sentences.size() << " sentences\n";
  return 0;
}

int cmd_permute(const std::string& in_path, const std::string& out_path,
                uint64_t seed, const std::string& types_csv, const CommonOpts& common) {
  TypeSet ts = parse_types(types_csv);
  Dataset ds = load_conll_file(in_path, ts);
  if (ds.total_mentions() < 2)
    std::cerr << "warning: fewer than 2 mentions, permutation is a no-op\n";
  Rng rng = make_rng(seed);
  Dataset out = permute_mentions(ds, rng);
  save_conll_file(out, out_path);
  write_manifest(common.manifest_for(out_path), "permute",
                 {{"in", in_path}, {"seed", seed}, {"types", types_csv}}, {in_path},
                 {out_path});
  return 0;
}

int cmd_lowres(const std::string& in_path, const std::string& out_path, size_t k,
               uint64_t seed, const std::string& types_csv, const CommonOpts& common) {
  TypeSet ts = parse_types(types_csv);
  Dataset ds = load_conll_file(in_path, ts);
  Rng rng = make_rng(seed);
  Dataset out = lowres_sample(ds, k, rng);
  save_conll_file(out, out_path);
  write_manifest(common.manifest_for(out_path), "lowres",
                 {{"in", in_path}, {"k", k}, {"seed", seed}, {"types", types_csv}},
                 {in_path}, {out_path});
  std::cout << "sampled " << out.sentences.size() << " sentences\n";
  return 0;
}

std::vector<double> load_numbers(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<double> vals;
  double x;
  while (in >> x) vals.push_back(x);
  return vals;
}

int cmd_ttest(const std::string& a_path, const std::string& b_path) {
  auto a = load_numbers(a_path);
  auto b = load_numbers(b_path);
  TTestResult r = paired_t_test(a, b);
  nlohmann::json j{{"t", r.t}, {"p", r.p}, {"df", r.df}};
  std::cout << j.dump() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args) {
  CLI::App app{"contextbias: diagnose and mitigate name-regularity bias in NER"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonOpts common;

  uint64_t seed = default_seed();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic biased corpus");
  std::string synth_out_dir;
  SynthSpec synth_spec;
  synth->add_option("--out-dir", synth_out_dir, "Output directory")->required();
  synth->add_option("--seed", seed, "Random seed");
  synth->add_option("--types", synth_spec.num_types)->check(CLI::Range(2, 16));
  synth->add_option("--names-per-type", synth_spec.names_per_type)->check(CLI::PositiveNumber);
  synth->add_option("--templates-per-type", synth_spec.templates_per_type)->check(CLI::PositiveNumber);
  synth->add_option("--generic-templates", synth_spec.generic_templates);
  synth->add_option("--generic-rate", synth_spec.generic_rate)->check(CLI::Range(0.0, 1.0));
  synth->add_option("--train-size", synth_spec.train_size)->check(CLI::PositiveNumber);
  synth->add_option("--test-size", synth_spec.test_size)->check(CLI::PositiveNumber);
  synth->add_option("--challenge-size", synth_spec.challenge_size)->check(CLI::PositiveNumber);
  synth->add_option("--leak-rate", synth_spec.leak_rate)->check(CLI::Range(0.0, 1.0));
  common.attach(synth);

  // train
  auto* train = app.add_subcommand("train", "Train the windowed tagger");
  std::string train_in, train_dev, train_out, train_log, train_types = "PER,LOC,ORG";
  TaggerConfig tagger_cfg;
  train->add_option("--train", train_in, "Training CoNLL file")->required();
  train->add_option("--dev", train_dev, "Development CoNLL file");
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--log", train_log, "Training log path (JSONL)");
  train->add_option("--types", train_types, "Comma-separated type names");
  train->add_option("--embed-dim", tagger_cfg.embed_dim)->check(CLI::PositiveNumber);
  train->add_option("--window", tagger_cfg.window)->check(CLI::PositiveNumber);
  train->add_option("--hidden", tagger_cfg.hidden)->check(CLI::PositiveNumber);
  train->add_option("--lr", tagger_cfg.lr)->check(CLI::PositiveNumber);
  train->add_option("--lr-decay", tagger_cfg.lr_decay)->check(CLI::Range(1e-9, 1.0));
  train->add_option("--epochs", tagger_cfg.epochs)->check(CLI::PositiveNumber);
  train->add_option("--batch", tagger_cfg.batch_size)->check(CLI::PositiveNumber);
  train->add_option("--seed", seed, "Random seed");
  train->add_flag("--freeze", tagger_cfg.freeze_embeddings, "Freeze the embedding table");
  train->add_option("--lambda", tagger_cfg.lambda, "Noise rate for --adv")
      ->check(CLI::Range(0.0, 1.0));
  train->add_flag("--adv", tagger_cfg.use_adv, "Adversarial noise embeddings");
  train->add_flag("--mask", tagger_cfg.use_mask, "Entity-mask augmentation");
  common.attach(train);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Tag a CoNLL file with a checkpoint");
  std::string pred_model, pred_in, pred_out;
  predict_cmd->add_option("--model", pred_model)->required();
  predict_cmd->add_option("--in", pred_in)->required();
  predict_cmd->add_option("--out", pred_out)->required();
  common.attach(predict_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against gold");
  std::string eval_gold, eval_pred, eval_report, eval_tsv, eval_types = "PER,LOC,ORG";
  eval_cmd->add_option("--gold", eval_gold)->required();
  eval_cmd->add_option("--pred", eval_pred)->required();
  eval_cmd->add_option("--report", eval_report, "JSON report path");
  eval_cmd->add_option("--tsv", eval_tsv, "TSV summary path");
  eval_cmd->add_option("--types", eval_types);
  common.attach(eval_cmd);

  // lm-train
  auto* lm_train = app.add_subcommand("lm-train", "Train the Kneser-Ney context model");
  std::string lmt_in, lmt_conll, lmt_out, lmt_dump, lmt_types = "PER,LOC,ORG";
  int lmt_order = 5;
  double lmt_discount = 0.75;
  lm_train->add_option("--in", lmt_in, "Abstracted token stream file");
  lm_train->add_option("--conll", lmt_conll, "CoNLL file to abstract and train on");
  lm_train->add_option("--out", lmt_out, "Model path")->required();
  lm_train->add_option("--order", lmt_order)->check(CLI::Range(2, 16));
  lm_train->add_option("--discount", lmt_discount)->check(CLI::Range(1e-9, 0.999999));
  lm_train->add_option("--types", lmt_types);
  lm_train->add_option("--dump", lmt_dump, "Plain-text dump path");
  common.attach(lm_train);

  // lm-tag
  auto* lm_tag = app.add_subcommand("lm-tag", "Context-only tag mentions of a CoNLL file");
  std::string lmg_model, lmg_in, lmg_out;
  lm_tag->add_option("--model", lmg_model)->required();
  lm_tag->add_option("--in", lmg_in)->required();
  lm_tag->add_option("--out", lmg_out)->required();
  common.attach(lm_tag);

  // build-nrb / build-wts
  std::string b_cand, b_lm, b_thresholds = "0.85,0.25,0.1", b_out, b_selected;
  std::string b_types = "PER,LOC,ORG";
  bool b_multi = false;
  auto add_build_opts = [&](CLI::App* cmd) {
    cmd->add_option("--candidates", b_cand, "Candidate JSONL file")->required();
    cmd->add_option("--lm", b_lm, "Context tagger model")->required();
    cmd->add_option("--thresholds", b_thresholds, "weak_conf,nrb_gap,wts_gap");
    cmd->add_option("--out", b_out, "Output CoNLL path")->required();
    cmd->add_option("--selected", b_selected, "Also write selected candidates (JSONL)");
    cmd->add_flag("--multi-token", b_multi, "Keep multi-token spans too");
    cmd->add_option("--types", b_types);
    common.attach(cmd);
  };
  auto* build_nrb = app.add_subcommand("build-nrb", "Select the NRB diagnostic set");
  add_build_opts(build_nrb);
  auto* build_wts = app.add_subcommand("build-wts", "Select the WTS control set");
  add_build_opts(build_wts);

  // augment
  auto* augment = app.add_subcommand("augment", "Data augmentation");
  std::string aug_in, aug_out, aug_types = "PER,LOC,ORG";
  bool aug_mask = false;
  augment->add_flag("--mask", aug_mask, "Entity masking augmentation");
  augment->add_option("--in", aug_in)->required();
  augment->add_option("--out", aug_out)->required();
  augment->add_option("--types", aug_types);
  common.attach(augment);

  // permute
  auto* permute = app.add_subcommand("permute", "Dataset-wise mention permutation");
  std::string perm_in, perm_out, perm_types = "PER,LOC,ORG";
  permute->add_option("--in", perm_in)->required();
  permute->add_option("--out", perm_out)->required();
  permute->add_option("--seed", seed);
  permute->add_option("--types", perm_types);
  common.attach(permute);

  // lowres
  auto* lowres = app.add_subcommand("lowres", "Low-resource eligible-sentence sample");
  std::string low_in, low_out, low_types = "PER,LOC,ORG";
  size_t low_k = 100;
  lowres->add_option("--in", low_in)->required();
  lowres->add_option("--out", low_out)->required();
  lowres->add_option("--k", low_k)->required()->check(CLI::PositiveNumber);
  lowres->add_option("--seed", seed);
  lowres->add_option("--types", low_types);
  common.attach(lowres);

  // ttest
  auto* ttest = app.add_subcommand("ttest", "Paired t-test over two score files");
  std::string tt_a, tt_b;
  ttest->add_option("--a", tt_a)->required();
  ttest->add_option("--b", tt_b)->required();
  common.attach(ttest);

  try {
    std::vector<std::string> args = merge_config_args(raw_args);
    // CLI11 wants reversed argv without the program name.
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  set_thread_cap(common.threads);
  tagger_cfg.seed = seed;

  try {
    if (synth->parsed()) return cmd_synth(synth_out_dir, seed, synth_spec, common);
    if (train->parsed())
      return cmd_train(train_in, train_dev, train_out, train_log, train_types,
                       tagger_cfg, common);
    if (predict_cmd->parsed()) return cmd_predict(pred_model, pred_in, pred_out, common);
    if (eval_cmd->parsed())
      return cmd_eval(eval_gold, eval_pred, eval_report, eval_tsv, eval_types, common);
    if (lm_train->parsed())
      return cmd_lm_train(lmt_in, lmt_conll, lmt_out, lmt_order, lmt_discount,
                          lmt_types, lmt_dump, common);
    if (lm_tag->parsed()) return cmd_lm_tag(lmg_model, lmg_in, lmg_out, common);
    if (build_nrb->parsed())
      return cmd_build(true, b_cand, b_lm, b_thresholds, b_out, b_selected, b_multi,
                       b_types, common);
    if (build_wts->parsed())
      return cmd_build(false, b_cand, b_lm, b_thresholds, b_out, b_selected, b_multi,
                       b_types, common);
    if (augment->parsed()) return cmd_augment(aug_mask, aug_in, aug_out, aug_types, common);
    if (permute->parsed()) return cmd_permute(perm_in, perm_out, seed, perm_types, common);
    if (lowres->parsed()) return cmd_lowres(low_in, low_out, low_k, seed, low_types, common);
    if (ttest->parsed()) return cmd_ttest(tt_a, tt_b);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "usage error: no subcommand\n";
  return 1;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace ctxbias
