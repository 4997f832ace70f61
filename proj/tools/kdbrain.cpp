// kdbrain: generate synthetic connectomes, train, evaluate, interpret, and
// gradient-check the prior-informed subnetwork interaction classifier.
//
// Exit status: 0 success, 1 validation/usage error, 2 runtime/numerical error.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kdbrain/commands.hpp"

namespace {

using namespace kdbrain;
namespace fs = std::filesystem;

void add_model_flags(CLI::App& cmd, ModelConfig& m) {
  cmd.add_option("--q", m.orders, "Interaction order q: number of stacked attention rounds among subnetworks")
      ->capture_default_str();
  cmd.add_option("--lambda-sp", m.prior_strength,
                 "lambda_sp: strength of semantic prior injection into attention queries (0 = no prior)")
      ->capture_default_str();
  cmd.add_option("--d", m.embed_dim, "Subnetwork embedding dimension d")->capture_default_str();
  cmd.add_option("--d-h", m.classifier_hidden, "Classifier hidden width d_h")->capture_default_str();
  cmd.add_option("--c-out", m.c_out, "Encoder convolution channels C_out")->capture_default_str();
  cmd.add_option("--fuse-dim", m.fuse_dim, "Encoder fused channel width h")->capture_default_str();
}

int run(int argc, char** argv) {
  CLI::App app{"Prior-informed heterogeneous brain-network classifier"};
  app.require_subcommand(1);

  // generate
  commands::GenerateOptions gen;
  std::string gen_mode = "mean-shift";
  std::optional<double> gen_fraction;
  auto* generate = app.add_subcommand("generate", "Write a synthetic planted-signal dataset");
  generate->add_option("--out", gen.out_dir, "Output directory")->capture_default_str();
  generate->add_option("--mode", gen_mode, "mean-shift | coupled-blocks")->capture_default_str();
  generate->add_option("--delta", gen.spec.delta, "Planted effect size (>= 0)")->capture_default_str();
  generate->add_option("--sigma", gen.spec.sigma, "Noise standard deviation (> 0)")->capture_default_str();
  generate->add_option("--n-regions", gen.spec.n_regions, "Number of regions N")->capture_default_str();
  generate->add_option("--names", gen.spec.names, "Subnetwork names, in region-block order")
      ->capture_default_str()
      ->delimiter(',');
  generate->add_option("--sizes", gen.spec.sizes, "Regions per subnetwork")->capture_default_str()->delimiter(',');
  generate->add_option("--n-per-class", gen.spec.n_per_class, "Samples per class")->capture_default_str();
  generate->add_option("--seed", gen.spec.seed, "Random seed")->capture_default_str();
  generate->add_option("--prior-dim", gen.prior_dim, "Dimension of the emitted stand-in semantic prior bank")
      ->capture_default_str();
  generate->add_option("--prior-coupling", gen.prior_coupling,
                       "Mass the emitted prior interaction matrix puts on DMN<->CEN")
      ->capture_default_str();
  generate->add_option("--train-fraction", gen_fraction,
                       "Also write stratified train/ and test/ splits with this train fraction");

  // train
  commands::TrainOptions tr;
  std::string tr_pmc = "avg";
  std::string tr_bank;
  std::string tr_prior;
  auto* train = app.add_subcommand("train", "Train on a dataset manifest");
  train->add_option("--dataset", tr.dataset, "Dataset manifest (JSON)")->required();
  train->add_option("--semantic-prior", tr_bank, "Semantic prior bank H_sp (JSON); optional when --lambda-sp 0");
  train->add_option("--prior-interaction", tr_prior, "Prior interaction matrix P_prior (JSON); optional when --beta 0");
  train->add_option("--out", tr.out_dir, "Output directory")->capture_default_str();
  add_model_flags(*train, tr.config.model);
  train->add_option("--beta", tr.config.beta, "beta: weight of the KL(P_prior || P_sni) term in the loss")
      ->capture_default_str();
  train->add_option("--pmc-orders", tr_pmc, "How per-order attention forms P_sni: avg | final")->capture_default_str();
  train->add_option("--lr", tr.config.adam.learning_rate, "Adam learning rate")->capture_default_str();
  train->add_option("--adam-beta1", tr.config.adam.beta1, "Adam first-moment decay")->capture_default_str();
  train->add_option("--adam-beta2", tr.config.adam.beta2, "Adam second-moment decay")->capture_default_str();
  train->add_option("--adam-eps", tr.config.adam.epsilon, "Adam epsilon")->capture_default_str();
  train->add_option("--epochs", tr.config.epochs, "Training epochs")->capture_default_str();
  train->add_option("--batch-size", tr.config.batch_size, "Mini-batch size")->capture_default_str();
  train->add_option("--seed", tr.config.seed, "Seed for initialisation and shuffling")->capture_default_str();

  // evaluate
  commands::EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "Compute ACC/AUC of a checkpoint on a dataset");
  evaluate->add_option("--checkpoint", ev.checkpoint, "Checkpoint written by train")->required();
  evaluate->add_option("--dataset", ev.dataset, "Dataset manifest (JSON)")->required();
  evaluate->add_option("--out", ev.out_dir, "Output directory")->capture_default_str();

  // interpret
  commands::InterpretOptions in;
  std::string in_class = "patient";
  auto* interpret = app.add_subcommand("interpret", "Emit mean attention traces, pathways and biomarkers");
  interpret->add_option("--checkpoint", in.checkpoint, "Checkpoint written by train")->required();
  interpret->add_option("--dataset", in.dataset, "Dataset manifest (JSON)")->required();
  interpret->add_option("--out", in.out_dir, "Output directory")->capture_default_str();
  interpret->add_option("--top", in.top, "Pathways kept per start subnetwork")->capture_default_str();
  interpret->add_option("--class", in_class, "Class whose mean trace is analysed: patient | control")
      ->capture_default_str();

  // gradcheck
  commands::GradcheckOptions gc;
  std::string gc_out;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full loss on a random instance");
  gradcheck->add_option("--seed", gc.instance.seed, "Instance seed")->capture_default_str();
  gradcheck->add_option("--step", gc.check.step, "Central-difference step")->capture_default_str();
  gradcheck->add_option("--tolerance", gc.check.tolerance, "Maximum relative error")->capture_default_str();
  gradcheck->add_option("--subnetworks", gc.instance.subnetworks, "Number of subnetworks |T|")->capture_default_str();
  gradcheck->add_option("--regions-per-subnetwork", gc.instance.regions_per_subnetwork, "N_k")->capture_default_str();
  gradcheck->add_option("--channels", gc.instance.n_channels, "Input channels C_in")->capture_default_str();
  gradcheck->add_option("--batch", gc.instance.batch, "Samples in the checked batch")->capture_default_str();
  gradcheck->add_option("--beta", gc.instance.beta, "beta")->capture_default_str();
  add_model_flags(*gradcheck, gc.instance.model);
  gradcheck->add_option("--out", gc_out, "Optional directory for gradcheck.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*generate) {
    gen.spec.mode = synth::parse_mode(gen_mode);
    gen.train_fraction = gen_fraction;
    const Dataset d = commands::run_generate(gen);
    std::cout << "wrote " << d.size() << " samples to " << gen.out_dir.string() << "\n";
  } else if (*train) {
    tr.config.pmc_orders = parse_pmc_orders(tr_pmc);
    if (!tr_bank.empty()) tr.semantic_prior = fs::path(tr_bank);
    if (!tr_prior.empty()) tr.prior_interaction = fs::path(tr_prior);
    commands::run_train(tr, &std::cout);
  } else if (*evaluate) {
    const Evaluation e = commands::run_evaluate(ev);
    std::cout << commands::metrics_json(e).dump(2) << "\n";
  } else if (*interpret) {
    in.label = commands::parse_class(in_class);
    commands::run_interpret(in);
    std::cout << "wrote interpretation files to " << in.out_dir.string() << "\n";
  } else if (*gradcheck) {
    if (!gc_out.empty()) gc.out_dir = fs::path(gc_out);
    const auto report = commands::run_gradcheck(gc, &std::cout);
    return report.passed ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const kdbrain::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
