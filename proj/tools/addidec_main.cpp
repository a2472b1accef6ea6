#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "addidec/cli.hpp"
#include "addidec/errors.hpp"
#include "addidec/runconfig.hpp"

using namespace addidec;

int main(int argc, char** argv) {
  CLI::App app{"two-ball scenes: data generation, reconstruction training, and decoder analysis"};
  app.require_subcommand(1);

  std::string config_path, out_flag, decoder_flag;
  std::vector<std::uint64_t> seed_flag;
  const std::pair<const char*, const char*> subs[] = {
      {"gen-data", "sample and render the train/val/test splits"},
      {"train", "reconstruction training, one run per seed"},
      {"eval", "metrics report for existing checkpoints on the test split"},
      {"extrapolate", "cartesian-product grid decode with panel export"},
      {"traverse", "single-coordinate latent traversals (block datasets)"},
      {"verify-nonlinearity", "analytic sufficient-nonlinearity scan and injectivity probe"},
      {"check-hessian", "finite-difference additivity check on a checkpoint"},
  };
  for (const auto& [name, desc] : subs) {
    CLI::App* sc = app.add_subcommand(name, desc);
    sc->add_option("--config", config_path, "JSON run configuration")->required();
    sc->add_option("--out", out_flag, "output directory (overrides the config)");
    sc->add_option("--seed", seed_flag, "seed list (overrides the config)");
    sc->add_option("--decoder", decoder_flag, "decoder kind (overrides the config)")
        ->check(CLI::IsMember({"additive", "nonadditive"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage problems are config errors
  }

  try {
    RunConfig cfg = RunConfig::load_file(config_path);
    // precedence: flag > config > default
    if (!out_flag.empty()) cfg.out_dir = out_flag;
    if (!seed_flag.empty()) cfg.seeds = seed_flag;
    if (!decoder_flag.empty())
      cfg.decoder =
          decoder_flag == "additive" ? DecoderKind::Additive : DecoderKind::NonAdditive;
    cfg.validate();

    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "gen-data") return cli::cmd_gen_data(cfg);
    if (sub == "train") return cli::cmd_train(cfg);
    if (sub == "eval") return cli::cmd_eval(cfg);
    if (sub == "extrapolate") return cli::cmd_extrapolate(cfg);
    if (sub == "traverse") return cli::cmd_traverse(cfg);
    if (sub == "verify-nonlinearity") return cli::cmd_verify_nonlinearity(cfg);
    if (sub == "check-hessian") return cli::cmd_check_hessian(cfg);
    std::fprintf(stderr, "error: unhandled subcommand %s\n", sub.c_str());
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const PreconditionError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const CapabilityError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric abort: %s\n", e.what());
    return 4;
  } catch (const Error& e) {  // DataError family and the statistic errors
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
