#include "nimbus/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nimbus/attribution.hpp"
#include "nimbus/experiment.hpp"
#include "nimbus/tnsr_io.hpp"

namespace nimbus {

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int seed = -1;
  bool overwrite = false;
};

void add_common(CLI::App* cmd, CommonArgs* args, bool needs_out = true) {
  cmd->add_option("--config", args->config_path, "key=value configuration file");
  if (needs_out) cmd->add_option("--out", args->out_dir, "output directory")->required();
  cmd->add_option("--seed", args->seed, "override the configured seed");
  cmd->add_flag("--overwrite", args->overwrite, "allow writing into a non-empty directory");
}

KeyValues load_kv(const CommonArgs& args) {
  KeyValues kv;
  if (!args.config_path.empty()) kv = load_config_file(args.config_path);
  return kv;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

std::vector<Sample> load_split(const DatasetIndex& index, const std::string& split, int limit) {
  std::vector<Sample> out;
  for (const SampleMeta& m : index.entries) {
    if (m.split != split) continue;
    out.push_back(load_sample(index, m.id));
    if (limit > 0 && static_cast<int>(out.size()) >= limit) break;
  }
  NIMBUS_CHECK(!out.empty(), "dataset has no '" + split + "' samples");
  return out;
}

InputSpec spec_for(const GenConfig& gen, InputMode mode) {
  InputSpec spec = InputSpec::for_mode(mode);
  spec.radar_slices = gen.geometry.radar_slices;
  spec.sat_slices = gen.geometry.sat_slices;
  spec.assim_slices = gen.geometry.assim_slices;
  return spec;
}

void save_train_outputs(const std::string& out_dir, const ModelConfig& model_cfg,
                        const InputSpec& ispec, const TrainResult& result) {
  write_text(fs::path(out_dir) / "train_log.csv", train_log_csv(result.log));
  std::map<std::string, std::string> manifest = model_config_manifest(model_cfg, ispec);
  manifest["checkpoint.kind"] = "final_polyak";
  save_checkpoint((fs::path(out_dir) / "checkpoints" / "final").string(), result.polyak,
                  manifest);
  for (const CheckpointSet::Entry& e : result.checkpoints.entries) {
    std::map<std::string, std::string> m = model_config_manifest(model_cfg, ispec);
    m["checkpoint.kind"] = "best_hour";
    m["checkpoint.lead_hour"] = std::to_string(e.lead_hour);
    m["checkpoint.step"] = std::to_string(e.step);
    m["checkpoint.val_loss"] = format_double(e.val_loss);
    char name[32];
    std::snprintf(name, sizeof(name), "hour_%02d", e.lead_hour);
    save_checkpoint((fs::path(out_dir) / "checkpoints" / name).string(), e.params, m);
  }
}

CheckpointSet load_checkpoint_set(const std::string& ckpt_root) {
  CheckpointSet set;
  for (const auto& entry : fs::directory_iterator(ckpt_root)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("hour_", 0) != 0) continue;
    CheckpointSet::Entry e;
    std::map<std::string, std::string> kv = load_checkpoint(entry.path().string(), &e.params);
    e.lead_hour = std::stoi(kv.at("checkpoint.lead_hour"));
    e.step = std::stoi(kv.at("checkpoint.step"));
    e.val_loss = std::stod(kv.at("checkpoint.val_loss"));
    set.entries.push_back(std::move(e));
  }
  std::sort(set.entries.begin(), set.entries.end(),
            [](const CheckpointSet::Entry& a, const CheckpointSet::Entry& b) {
              return a.lead_hour < b.lead_hour;
            });
  return set;
}

int cmd_gen_data(const CommonArgs& args) {
  KeyValues kv = load_kv(args);
  GenConfig cfg = gen_config_from_kv(kv);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  prepare_out_dir(args.out_dir, args.overwrite);
  write_text(fs::path(args.out_dir) / "gen.cfg", config_text(gen_config_to_kv(cfg)));
  DatasetIndex index = generate_dataset(cfg, args.out_dir);
  std::vector<std::string> files = {"gen.cfg", "index.txt"};
  for (const SampleMeta& m : index.entries) {
    char name[64];
    std::snprintf(name, sizeof(name), "samples/sample_%06d.tnsr", m.id);
    files.emplace_back(name);
  }
  write_manifest(args.out_dir, files);
  std::cout << "wrote " << index.entries.size() << " samples to " << args.out_dir << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& data_dir, const KeyValues& overrides) {
  KeyValues kv = load_kv(args);
  for (const auto& [k, v] : overrides) kv[k] = v;  // flags win over the file
  GenConfig gen = gen_config_from_kv(kv);
  ModelConfig model_cfg = model_config_from_kv(kv);
  TrainConfig train_cfg = train_config_from_kv(kv);
  if (args.seed >= 0) {
    gen.seed = static_cast<std::uint64_t>(args.seed);
    train_cfg.seed = hash_combine(gen.seed, 0x747261696eULL);
  }
  gen.geometry.context_extent = model_cfg.context_extent;
  gen.geometry.target_extent = model_cfg.target_extent;
  if (train_cfg.mode != InputMode::Default) gen.with_nwp = true;

  std::vector<Sample> train_set, val_set;
  if (!data_dir.empty()) {
    DatasetIndex index = load_dataset_index(data_dir);
    train_set = load_split(index, "train", 0);
    val_set = load_split(index, "val", 0);
  } else {
    train_set = cut_samples(gen, "train", gen.train_samples);
    val_set = cut_samples(gen, "val", gen.val_samples);
  }

  InputSpec ispec = spec_for(gen, train_cfg.mode);
  MetNet2 model(model_cfg, ispec, gen.seed);
  TrainResult result = train(train_cfg, model, train_set, val_set);

  prepare_out_dir(args.out_dir, args.overwrite);
  write_text(fs::path(args.out_dir) / "experiment.cfg", config_text(kv));
  save_train_outputs(args.out_dir, model_cfg, ispec, result);
  std::vector<std::string> files = {"experiment.cfg", "train_log.csv"};
  write_manifest(args.out_dir, files);
  std::cout << "trained " << train_cfg.steps << " steps; final train loss "
            << format_double(result.log.back().train_loss) << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& data_dir, const std::string& ckpt_root,
             const std::string& region_mask_path) {
  KeyValues kv = load_kv(args);
  GenConfig gen = gen_config_from_kv(kv);
  if (args.seed >= 0) gen.seed = static_cast<std::uint64_t>(args.seed);
  const std::vector<double> rates = kv_double_list(kv, "eval.rates", {0.2, 1.0, 2.0});

  Params final_params;
  std::map<std::string, std::string> ckpt_kv =
      load_checkpoint((fs::path(ckpt_root) / "final").string(), &final_params);
  ModelConfig model_cfg = model_config_from_manifest(ckpt_kv);
  InputSpec ispec = input_spec_from_manifest(ckpt_kv);
  gen.geometry.context_extent = model_cfg.context_extent;
  gen.geometry.target_extent = model_cfg.target_extent;
  if (ispec.nwp) gen.with_nwp = true;

  std::vector<Sample> calib, test;
  if (!data_dir.empty()) {
    DatasetIndex index = load_dataset_index(data_dir);
    calib = load_split(index, "val", 0);
    test = load_split(index, "test", 0);
  } else {
    calib = cut_samples(gen, "val", gen.val_samples);
    test = cut_samples(gen, "test", gen.test_samples);
  }

  if (!region_mask_path.empty()) {
    Tensor region = load_tnsr(region_mask_path);
    for (Sample& s : calib)
      for (std::int64_t i = 0; i < s.mask.size(); ++i) s.mask[i] *= region[i];
    for (Sample& s : test)
      for (std::int64_t i = 0; i < s.mask.size(); ++i) s.mask[i] *= region[i];
  }

  MetNet2 model(model_cfg, ispec, gen.seed);
  model.params() = final_params;
  CheckpointSet ckpts = load_checkpoint_set(ckpt_root);

  ThresholdTable thresholds;
  ScoreReport report = score_forecaster("model", model_forecaster(model, &ckpts), calib, test,
                                        rates, &thresholds);
  {
    ScoreReport p = score_forecaster("persistence", persistence_forecaster(model_cfg.binning()),
                                     calib, test, rates);
    for (ScoreRow& r : p.rows) report.add(std::move(r));
  }
  const bool has_nwp = !test.empty() && !test.front().nwp_target.empty();
  if (has_nwp) {
    ScoreReport p =
        score_forecaster("nwp", nwp_forecaster(model_cfg.binning()), calib, test, rates);
    for (ScoreRow& r : p.rows) report.add(std::move(r));
    add_skill_rows(report, "model", "nwp");
  }
  add_skill_rows(report, "model", "persistence");

  prepare_out_dir(args.out_dir, args.overwrite);
  std::vector<std::string> files = emit_report(report, args.out_dir);
  {
    std::ostringstream t;
    t << "rate_mm_hr,lead_hour,threshold,degenerate\n";
    for (const ThresholdTable::Entry& e : thresholds.entries)
      t << format_double(e.rate) << ',' << e.lead_hour << ',' << format_double(e.threshold)
        << ',' << (e.degenerate ? 1 : 0) << "\n";
    write_text(fs::path(args.out_dir) / "thresholds.csv", t.str());
    files.push_back("thresholds.csv");
  }
  write_manifest(args.out_dir, files);
  std::cout << "evaluated " << test.size() << " samples; wrote " << files.size()
            << " artifacts to " << args.out_dir << "\n";
  return 0;
}

int cmd_ablate(const CommonArgs& args) {
  KeyValues kv = load_kv(args);
  ExperimentSpec spec = ExperimentSpec::from_kv(kv);
  if (args.seed >= 0) spec.seeds = {static_cast<std::uint64_t>(args.seed)};
  NIMBUS_USAGE_CHECK(!spec.ablate_axis.empty(), "config must set ablate.axis");
  NIMBUS_USAGE_CHECK(!spec.ablate_arms.empty(), "config must set ablate.arms");

  AblationResult result = run_ablation(spec, spec.ablate_axis, spec.ablate_arms);
  prepare_out_dir(args.out_dir, args.overwrite);
  std::vector<std::string> files = emit_report(result.report, args.out_dir);
  write_manifest(args.out_dir, files);
  for (const AblationArm& arm : result.arms) {
    std::cout << "arm " << arm.arm << " (params " << arm.param_count << "):";
    for (std::size_t i = 0; i < arm.lead_minutes.size(); ++i)
      std::cout << " csi@" << arm.lead_minutes[i] << "=" << format_double(arm.csi_by_lead[i]);
    std::cout << "\n";
  }
  return 0;
}

int cmd_attribute(const CommonArgs& args, const std::string& data_dir,
                  const std::string& ckpt_root, int sample_count, int ig_steps,
                  const std::vector<int>& lead_minutes) {
  KeyValues kv = load_kv(args);
  GenConfig gen = gen_config_from_kv(kv);
  if (args.seed >= 0) gen.seed = static_cast<std::uint64_t>(args.seed);

  Params final_params;
  std::map<std::string, std::string> ckpt_kv =
      load_checkpoint((fs::path(ckpt_root) / "final").string(), &final_params);
  ModelConfig model_cfg = model_config_from_manifest(ckpt_kv);
  InputSpec ispec = input_spec_from_manifest(ckpt_kv);
  gen.geometry.context_extent = model_cfg.context_extent;
  gen.geometry.target_extent = model_cfg.target_extent;
  if (ispec.nwp) gen.with_nwp = true;

  std::vector<Sample> samples;
  if (!data_dir.empty()) {
    DatasetIndex index = load_dataset_index(data_dir);
    samples = load_split(index, "test", sample_count);
  } else {
    samples = cut_samples(gen, "test", sample_count);
  }

  MetNet2 model(model_cfg, ispec, gen.seed);
  model.params() = final_params;
  ModelInputs baseline = baseline_of(samples, ispec);

  prepare_out_dir(args.out_dir, args.overwrite);
  std::vector<std::string> files;
  std::vector<std::pair<int, std::vector<FeatureImportance>>> by_lead;
  std::vector<int> leads = lead_minutes;
  if (leads.empty()) leads = {gen.min_lead_minutes, gen.max_lead_minutes};

  for (int lead_min : leads) {
    const LeadTime lead = LeadTime::from_minutes(lead_min, model_cfg.max_lead_minutes());
    std::vector<AttributionMap> maps;
    for (const Sample& s : samples) {
      OutputSpec out_spec = OutputSpec::mean_exceedance(0.2, s.mask);
      maps.push_back(
          integrated_gradients(model, s.inputs, baseline, ig_steps, lead, out_spec, s.kind));
    }
    by_lead.emplace_back(lead_min, aggregate_global(maps, ispec));

    // local map of the first sample: one plane per set, newest slice, chan 0
    char prefix[64];
    std::snprintf(prefix, sizeof(prefix), "map_lead%03d", lead_min);
    const AttributionMap& m = maps.front();
    for (std::size_t v = 0; v < m.attributions.size(); ++v) {
      const Tensor& a = m.attributions[v];
      const int slices = a.dim(0), h = a.dim(1), w = a.dim(2);
      Tensor plane(Shape{h, w});
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) plane.at2(y, x) = a.at4(slices - 1, y, x, 0);
      const std::string base = std::string(prefix) + "_" + m.set_names[v];
      save_tnsr((fs::path(args.out_dir) / (base + ".tnsr")).string(), plane);
      write_text(fs::path(args.out_dir) / (base + ".svg"), attribution_map_svg(plane));
      files.push_back(base + ".tnsr");
      files.push_back(base + ".svg");
    }
    std::cout << "lead " << lead_min << "m: completeness residual "
              << format_double(m.completeness_residual) << " (f(x)-f(x') = "
              << format_double(m.f_input - m.f_baseline) << ")\n";
  }

  write_text(fs::path(args.out_dir) / "importance.csv", importance_table_csv(by_lead));
  files.push_back("importance.csv");
  write_manifest(args.out_dir, files);
  return 0;
}

int cmd_rf_analyze(const CommonArgs& args, int grid, int tile) {
  KeyValues kv = load_kv(args);
  ModelConfig model_cfg = model_config_from_kv(kv);
  const std::vector<ScheduleEntry> sched = model_cfg.conv_schedule();
  const int rf = receptive_field(sched, 3);
  const int tile_extent = tile > 0 ? tile : model_cfg.context_extent / grid;
  HaloPlan plan = halo_plan(sched, grid, tile_extent, 3);

  std::ostringstream out;
  out << "receptive_field," << rf << "\n";
  out << "grid," << grid << "\n";
  out << "tile_extent," << tile_extent << "\n";
  out << "layer,dilation,halo,interior_fetch_cells,grid_fetch_cells,depth_into_adjacent,"
         "touches_diagonal,spans_past_adjacent\n";
  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    const HaloLayer& l = plan.layers[i];
    out << i << ',' << l.dilation << ',' << l.halo << ',' << l.interior_fetch_cells << ','
        << l.grid_fetch_cells << ',' << l.depth_into_adjacent << ',' << (l.touches_diagonal ? 1 : 0)
        << ',' << (l.spans_past_adjacent ? 1 : 0) << "\n";
  }
  out << "total_grid_fetch_cells," << plan.total_grid_fetch_cells << "\n";

  if (!args.out_dir.empty()) {
    prepare_out_dir(args.out_dir, args.overwrite);
    write_text(fs::path(args.out_dir) / "rf_halo.csv", out.str());
    write_manifest(args.out_dir, {"rf_halo.csv"});
  }
  std::cout << out.str();
  return 0;
}

int cmd_report(const CommonArgs& args, const std::string& in_dir) {
  ScoreReport merged;
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(in_dir))
    if (entry.path().extension() == ".csv") inputs.push_back(entry.path());
  std::sort(inputs.begin(), inputs.end());
  NIMBUS_CHECK(!inputs.empty(), "no score CSV files in " + in_dir);
  for (const fs::path& p : inputs) {
    std::ifstream f(p);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    ScoreReport r = score_report_from_csv(text);
    for (ScoreRow& row : r.rows) merged.add(std::move(row));
  }
  prepare_out_dir(args.out_dir, args.overwrite);
  std::vector<std::string> files = emit_report(merged, args.out_dir);
  write_manifest(args.out_dir, files);
  std::cout << "re-rendered " << files.size() << " artifacts\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"desk-scale probabilistic precipitation forecasting testbed"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, ablate_args, attr_args, rf_args, report_args;
  std::string train_data, eval_data, eval_ckpt, eval_region, attr_data, attr_ckpt, report_in;
  KeyValues train_overrides;
  std::string ov_mode;
  int ov_steps = -1, ov_batch = -1;
  double ov_lr = -1.0;
  int attr_samples = 8, attr_steps = 64;
  std::vector<int> attr_leads;
  int rf_grid = 4, rf_tile = 0;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, &gen_args);

  CLI::App* tr = app.add_subcommand("train", "train a model");
  add_common(tr, &train_args);
  tr->add_option("--data", train_data, "dataset directory (else cut in memory)");
  tr->add_option("--steps", ov_steps, "override train.steps");
  tr->add_option("--lr", ov_lr, "override train.learning_rate");
  tr->add_option("--batch", ov_batch, "override train.batch_size");
  tr->add_option("--mode", ov_mode, "override train.mode (default|postprocess|hybrid)");

  CLI::App* ev = app.add_subcommand("eval", "score a trained model");
  add_common(ev, &eval_args);
  ev->add_option("--ckpt", eval_ckpt, "checkpoints directory (train output)")->required();
  ev->add_option("--data", eval_data, "dataset directory (else cut in memory)");
  ev->add_option("--region-mask", eval_region, "TNSR1 {0,1} region mask over the target patch");

  CLI::App* ab = app.add_subcommand("ablate", "run an ablation axis");
  add_common(ab, &ablate_args);

  CLI::App* at = app.add_subcommand("attribute", "integrated-gradients attribution");
  add_common(at, &attr_args);
  at->add_option("--ckpt", attr_ckpt, "checkpoints directory (train output)")->required();
  at->add_option("--data", attr_data, "dataset directory (else cut in memory)");
  at->add_option("--samples", attr_samples, "number of samples to attribute");
  at->add_option("--steps", attr_steps, "integration steps");
  at->add_option("--leads", attr_leads, "lead minutes to attribute at");

  CLI::App* rf = app.add_subcommand("rf-analyze", "receptive field and halo plan");
  rf->add_option("--config", rf_args.config_path, "key=value configuration file");
  rf->add_option("--out", rf_args.out_dir, "optional output directory");
  rf->add_flag("--overwrite", rf_args.overwrite, "allow writing into a non-empty directory");
  rf->add_option("--grid", rf_grid, "partition grid per side");
  rf->add_option("--tile", rf_tile, "tile extent (default context/grid)");

  CLI::App* rp = app.add_subcommand("report", "re-render plots from score CSVs");
  add_common(rp, &report_args);
  rp->add_option("--in", report_in, "directory of score CSV files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_args);
    if (tr->parsed()) {
      if (ov_steps >= 0) train_overrides["train.steps"] = std::to_string(ov_steps);
      if (ov_lr >= 0.0) train_overrides["train.learning_rate"] = format_double(ov_lr);
      if (ov_batch >= 0) train_overrides["train.batch_size"] = std::to_string(ov_batch);
      if (!ov_mode.empty()) train_overrides["train.mode"] = ov_mode;
      return cmd_train(train_args, train_data, train_overrides);
    }
    if (ev->parsed()) return cmd_eval(eval_args, eval_data, eval_ckpt, eval_region);
    if (ab->parsed()) return cmd_ablate(ablate_args);
    if (at->parsed())
      return cmd_attribute(attr_args, attr_data, attr_ckpt, attr_samples, attr_steps, attr_leads);
    if (rf->parsed()) return cmd_rf_analyze(rf_args, rf_grid, rf_tile);
    if (rp->parsed()) return cmd_report(report_args, report_in);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace nimbus
